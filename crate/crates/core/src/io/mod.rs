//! Persistence, test potentials, configuration and reports.

pub mod config;
pub mod lpbs;
pub mod phantom;
pub mod report;

pub use config::ExperimentConfig;
pub use lpbs::{load_cylinder, load_scalar, save_cylinder, save_scalar, Metadata};
pub use phantom::{make_phantom, Phantom, PhantomSpec};
pub use report::{write_json, Provenance};

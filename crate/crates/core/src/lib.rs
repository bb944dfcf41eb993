//! Lax-Phillips translation representation of three-dimensional potential
//! scattering.
//!
//! The crate is organised bottom-up:
//! - [`geometry`]: grids, sphere quadrature, the scattering map `S`, constants
//! - [`radon`]: `R`, `R^t`, `R_n`, inversion, Sobolev norms
//! - [`laxphillips`]: the Lax-Phillips transform and the free wave group
//! - [`vlp`]: the potential operator `V_LP = c^2 D_s R V R^t`
//! - [`forward`]: Volterra transport solver, Born terms, scattering kernel
//! - [`spectral_born`]: closed-form Fourier-domain oracles
//! - [`backscatter`]: projection, `beta_S`, generalized inverse, inversion
//! - [`io`]: LPBS container, phantoms, configuration, reports
//! - [`selftest`]: invariant suites behind `lpbs selftest`
//! - [`commands`]: the `lpbs` subcommands

// `!(x > 0.0)` is how NaN is rejected throughout; index loops mirror the
// formulas they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod error;
pub mod fft;
pub mod geometry;
pub mod gridded;
pub mod interp;
pub mod laxphillips;
pub mod radon;
pub mod vlp;
pub mod forward;
pub mod spectral_born;
pub mod backscatter;
pub mod io;
pub mod selftest;
pub mod commands;

pub use error::{Error, Result};

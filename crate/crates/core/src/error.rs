use thiserror::Error;

/// Every failure the library can report. `kind()` gives a stable
/// machine-readable tag used in CLI error JSON.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not orthogonal (defect {defect:.3e})")]
    NotOrthogonal { defect: f64 },
    #[error("Id - S is singular or nearly so (|det| = {det:.3e} < {threshold:.1e})")]
    IdMinusSSingular { det: f64, threshold: f64 },
    #[error("unsupported order {0}")]
    UnsupportedOrder(i64),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("s-range too small: {0}")]
    SRangeTooSmall(String),
    #[error("interpolation point {value:.4} outside s-grid [{lo:.4}, {hi:.4}]")]
    InterpolationOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("negative power of D_s applied to data with zero-frequency content {0:.3e}")]
    NonIntegrableMode(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("support escapes grid: {0}")]
    SupportEscapesGrid(String),
    #[error("step size {dt:.3e} violates the stability bound (dt * |V_LP| = {product:.3e})")]
    StabilityViolation { dt: f64, product: f64 },
    #[error("solution support escaped the characteristic window: {0}")]
    SupportEscape(String),
    #[error("outgoing slice not frozen out (relative change {0:.3e})")]
    NotFrozenOut(f64),
    #[error("sphere rule of degree {rule_degree} cannot project onto harmonics of degree {fit_degree}")]
    InterpolationDegreeTooLow { rule_degree: usize, fit_degree: usize },
    #[error("point too close to the origin (|y| = {0:.3e})")]
    OriginSingularity(f64),
    #[error("spectral parameter in the wrong half plane (Im = {0})")]
    WrongHalfPlane(f64),
    #[error("singular scattering geometry: {0}")]
    SingularGeometry(String),
    #[error("iteration diverged at step {iter} (residual {residual:.3e})")]
    Diverged { iter: usize, residual: f64 },
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported container version {0}")]
    VersionUnsupported(u32),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("container truncated: {0}")]
    Truncated(String),
    #[error("phantom support violation: {0}")]
    SupportViolation(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotOrthogonal { .. } => "NotOrthogonal",
            Error::IdMinusSSingular { .. } => "IdMinusSSingular",
            Error::UnsupportedOrder(_) => "UnsupportedOrder",
            Error::GridTooCoarse(_) => "GridTooCoarse",
            Error::SRangeTooSmall(_) => "SRangeTooSmall",
            Error::InterpolationOutOfRange { .. } => "InterpolationOutOfRange",
            Error::NonIntegrableMode(_) => "NonIntegrableMode",
            Error::GridMismatch(_) => "GridMismatch",
            Error::SupportEscapesGrid(_) => "SupportEscapesGrid",
            Error::StabilityViolation { .. } => "StabilityViolation",
            Error::SupportEscape(_) => "SupportEscape",
            Error::NotFrozenOut(_) => "NotFrozenOut",
            Error::InterpolationDegreeTooLow { .. } => "InterpolationDegreeTooLow",
            Error::OriginSingularity(_) => "OriginSingularity",
            Error::WrongHalfPlane(_) => "WrongHalfPlane",
            Error::SingularGeometry(_) => "SingularGeometry",
            Error::Diverged { .. } => "Diverged",
            Error::BadMagic => "BadMagic",
            Error::VersionUnsupported(_) => "VersionUnsupported",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::Truncated(_) => "Truncated",
            Error::SupportViolation(_) => "SupportViolation",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

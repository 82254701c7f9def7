use thiserror::Error;

/// Errors raised by grid construction, evolutions, norms and forms.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid point count must be a power of two >= 8, got {0}")]
    BadPointCount(usize),
    #[error("grid half extent must be positive and finite, got {0}")]
    BadExtent(f64),
    #[error("dimension {got} outside supported range 1..={max}")]
    BadDimension { got: usize, max: usize },
    #[error("field contains NaN or infinite samples")]
    NonFinite,
    #[error("sample count {got} does not match grid size {expected}")]
    SampleCount { got: usize, expected: usize },
    #[error("Lebesgue exponent must be >= 1, got {0}")]
    BadExponent(f64),
    #[error("fields live on incompatible grids")]
    GridMismatch,
    #[error("sample {value:e} is below the negativity tolerance -{tolerance:e}")]
    Negativity { value: f64, tolerance: f64 },
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("flow power {0} outside [1/2, 1]")]
    PowerOutOfRange(f64),
    #[error(
        "wrap-around aliasing at s = {s}: support radius {radius:.3} plus spread {spread:.3} exceeds box half extent {half_extent:.3}"
    )]
    Aliasing {
        s: f64,
        radius: f64,
        spread: f64,
        half_extent: f64,
    },
    #[error("grid cannot resolve the field: {0}")]
    Resolution(String),
    #[error("complex width path ends on the branch cut of the amplitude factor")]
    BranchCut,
    #[error("gaussian width must have positive real part, got {0}")]
    BadWidth(f64),
    #[error("the closed-form route needs an analytic gaussian input")]
    ClosedFormNeedsGaussian,
    #[error("flow {0} is not supported on this route")]
    UnsupportedRoute(&'static str),
    #[error("s-integral diverges: space-time decay exponent {0} <= 1")]
    NotIntegrable(f64),
    #[error("s-axis tail estimate {0:e} above tolerance")]
    InsufficientCoverage(f64),
    #[error("modified-norm order nu must be positive, got {0}")]
    NonPositiveNu(f64),
    #[error("invalid invariance subspace: {0}")]
    BadSubspace(String),
    #[error("ambient dimension {0} exceeds the desk-scale cap of 4")]
    TooManyDimensions(usize),
    #[error("boundary leakage {0:e}: samples land outside the grid where the source is not negligible")]
    BoundaryLeakage(f64),
    #[error("finite-difference step underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

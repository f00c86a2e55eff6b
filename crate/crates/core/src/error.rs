use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids or have incompatible shapes: {0}")]
    ShapeMismatch(String),

    #[error("metric is not positive definite at grid point {point} (smallest eigenvalue {eigenvalue:e})")]
    NonPositiveDefinite { point: usize, eigenvalue: f64 },

    #[error("heat kernel requested at non-positive time t = {0}")]
    NonPositiveTime(f64),

    #[error("perturbation too large for the inverse expansion: sup |h| = {norm} (must be < 1)")]
    GammaExceeded { norm: f64 },

    #[error("Picard iteration failed to contract (successive X-norm differences {history:?})")]
    NoContraction { history: Vec<f64> },

    #[error("time stepping left the bilipschitz regime at t = {time}: sup |g - gbar| = {norm}")]
    StepUnstable { time: f64, norm: f64 },

    #[error("diffeomorphism Jacobian degenerate at grid point {point} (det = {det:e})")]
    JacobianDegenerate { point: usize, det: f64 },

    #[error("trajectory lattice too short: need at least {needed} stored times, found {found}")]
    InsufficientLattice { needed: usize, found: usize },

    #[error("ball of radius {radius} is below two grid spacings ({spacing})")]
    BallUnresolved { radius: f64, spacing: f64 },

    #[error("weight w_0 is undefined at the center point at t = 0")]
    UndefinedAtCenter,

    #[error("grid of {points} points per axis cannot resolve {octaves} octaves of spectrum")]
    ResolutionTooCoarse { points: usize, octaves: u32 },

    #[error("angular profile is not radially tangent: x^i x^j G_ij = {value:e}")]
    RadialTangencyViolated { value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration invalid at `{path}`: {message}")]
    ConfigInvalid { path: String, message: String },

    #[error("scenario `{scenario}` at resolution {resolution}: {source}")]
    Scenario { scenario: String, resolution: usize, source: Box<Error> },

    #[error("no readable manifest at {0}")]
    ManifestMissing(PathBuf),

    #[error("malformed field container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// The innermost error, with scenario context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Scenario { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for errors that signal a numerical abort of a solver run.
    pub fn is_numerical_abort(&self) -> bool {
        matches!(
            self.root(),
            Error::NoContraction { .. } | Error::StepUnstable { .. } | Error::GammaExceeded { .. }
        )
    }
}

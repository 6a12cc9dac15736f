//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Shapes of the inputs disagree (matrix/vector lengths, grid sizes).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A dataset violated a structural invariant (ones column, row count,
    /// label count).
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    /// The design matrix is numerically rank deficient.
    #[error("design matrix is rank deficient (column {column}): |r[{column},{column}]| = {diag:.3e} below threshold {threshold:.3e}")]
    RankDeficient {
        column: usize,
        diag: f64,
        threshold: f64,
    },

    /// The response has zero variance, so R^2 is undefined.
    #[error("response is constant; R^2 undefined")]
    ConstantResponse,

    /// The fit has zero residual; residual-direction noise is undefined.
    #[error("fit is exact (zero residual norm); noise direction undefined")]
    DegenerateFit,

    /// The random vector lies in the span of the design and the residual, so
    /// its orthogonalized part vanishes.
    #[error("direction degenerate after orthogonalization: |u| = {norm:.3e} <= {threshold:.3e}")]
    DegenerateDirection { norm: f64, threshold: f64 },

    /// A zero orthogonal direction was supplied where b > 0 requires one.
    #[error("orthogonal direction required for b > 0 but missing or zero")]
    ZeroDirection,

    /// Noise parameters outside the admissible region (a = 0 or b < 0 or
    /// non-finite).
    #[error("invalid noise parameters: {0}")]
    InvalidParameters(String),

    /// 1 + b + a(a+2) <= 0: the perturbed residual scale is not defined.
    #[error("undefined scale: 1 + b + a(a+2) = {0:.6e} is not positive")]
    UndefinedScale(f64),

    /// Could not keep the perturbed response positive within the retry budget.
    #[error("positivity unachievable after {attempts} attempt(s); best minimum {best_min:.6e}")]
    PositivityUnachievable { best_min: f64, attempts: u32 },

    /// Too few rows for the requested operation (subsample sizes, degrees of
    /// freedom).
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// No b on the calibration grid reaches the acceptance target.
    #[error("no b on the grid reaches acceptance {target:.3} for q = {q}")]
    NoAdequateB { q: f64, target: f64 },

    /// A synthetic-data specification is unusable (bad bounds, unreachable
    /// moments, empty columns).
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    /// Numerical routine failed to converge or left its domain.
    #[error("numerical error: {0}")]
    Numerical(String),
}

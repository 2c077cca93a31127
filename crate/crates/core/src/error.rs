use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series needs at least one coefficient")]
    EmptyCoefficients,
    #[error("coefficient {index} is not finite")]
    NonFiniteCoefficient { index: usize },
    #[error("derivative order {requested} exhausts a series with valid order {valid_order}")]
    OrderExhausted { requested: usize, valid_order: usize },
    #[error("linear combination needs at least one term")]
    EmptyCombination,
    #[error("invalid disk: radius {radius}, {grid_points} grid points (need radius > 0, >= 8 points)")]
    InvalidDisk { radius: f64, grid_points: usize },
    #[error("convolution part is identically zero")]
    ZeroOperator,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("commutator with d/dz is not a scalar multiple of the identity (off-diagonal {off_diagonal:.3e}, diagonal spread {diagonal_spread:.3e})")]
    NotWeyl { off_diagonal: f64, diagonal_spread: f64 },
    #[error("column {column} is not the image of a constant-coefficient operator (row {row}, deviation {deviation:.3e})")]
    InconsistentConvolution { column: usize, row: usize, deviation: f64 },
    #[error("kernel residual {residual:.3e} exceeds {threshold:.1e}")]
    KernelResidualTooLarge { residual: f64, threshold: f64 },
    #[error("operator has order zero: its kernel is trivial")]
    ZeroOrderOperator,
    #[error("a = 0: the kernel is spanned by exponential monomials, use the exponential family")]
    ConvolutionCase,
    #[error("regularized system is numerically singular (condition {condition:.3e} at ridge {ridge:.1e})")]
    SingularSystem { condition: f64, ridge: f64 },
    #[error("no point with |L_a(λ)| >= {threshold} within radius {radius_cap}")]
    SearchExhausted { threshold: f64, radius_cap: f64 },
    #[error("target {target}: fit residual {residual:.3e} exceeds budget {budget:.3e} at stage {stage}")]
    BudgetExceeded { target: usize, residual: f64, budget: f64, stage: String },
    #[error("schedule entry {requested} for target {target} exceeds the cap {cap}")]
    ScheduleOverflow { target: usize, requested: usize, cap: usize },
    #[error("malformed spec: {0}")]
    MalformedSpec(String),
    #[error("i/o failure on {path}: {source}")]
    IoFailure { path: String, source: std::io::Error },
}

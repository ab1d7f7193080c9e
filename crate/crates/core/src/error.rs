use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 3, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("field does not match mesh layout: expected {expected} values, got {found}")]
    FieldShape { expected: usize, found: usize },

    #[error("field vanishes identically")]
    ZeroField,

    #[error("conformal factor must be non-negative (min nodal value {0})")]
    NegativeFactor(f64),

    #[error("negative exponent {0} requires a positive floor where the factor vanishes")]
    SingularPower(f64),

    #[error("weight supports fewer than {k} independent directions (deflated rank {rank})")]
    RankDeficient { k: usize, rank: usize },

    #[error("pencil is unbounded below: the form is not positive on the null space of the weight")]
    Unbounded,

    #[error("degenerate denominator: the weighted norm of the test function vanishes")]
    DegenerateDenominator,

    #[error("restriction to M \\ u^-1(0) not injective (weighted Gram min eigenvalue {0:e})")]
    DegenerateSpan(f64),

    #[error("not in the positive cone of the form (v^T A v = {0:e})")]
    NotPositiveCone(f64),

    #[error("derivative formula invalid at degenerate lambda_2 (gap {gap:e})")]
    DegenerateGap { gap: f64 },

    #[error("mesh under-resolves the bubble: {found} nodes within r <= sqrt(eps), need {required}")]
    UnderResolved { required: usize, found: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("eigensolver failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

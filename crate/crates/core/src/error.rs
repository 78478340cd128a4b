use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("band of half-width {half_bandwidth} does not fit in a {n}x{n} matrix")]
    BandTooWide { n: usize, half_bandwidth: usize },

    #[error("tridiagonal QL iteration exceeded {cap} sweeps at index {index}")]
    IterationCap { index: usize, cap: usize },

    #[error("dense eigenvalue path limited to n <= {cap}, got n = {n}")]
    DenseSizeCap { n: usize, cap: usize },

    #[error("spectral invariant violated: {0}")]
    InvariantViolation(String),

    #[error("complex argument {re}{im:+}i lies on the real axis")]
    RealArgument { re: f64, im: f64 },

    #[error("argument lies on the branch cut [-2, 2]")]
    BranchCut,

    #[error("|g(z1) g(z2)| = {0} is not below 1")]
    LogBranch(f64),

    #[error("test function {0} is not integrable")]
    NotIntegrable(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("variance kernel near-singular at theta = {theta}")]
    NearSingular { theta: f64 },

    #[error("Neumann series did not converge within {0} terms")]
    SeriesDivergence(usize),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("replica {replica} failed: {source}")]
    Replica {
        replica: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("report digests differ ({left} vs {right})")]
    DigestMismatch { left: String, right: String },

    #[error("malformed record: {0}")]
    Record(String),
}

pub type Result<T> = std::result::Result<T, Error>;

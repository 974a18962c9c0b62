use thiserror::Error;

/// Errors raised by constructors and checks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("non-positive mass in {what} at index {index}: {value}")]
    NonPositiveMass {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("zero weight mass (s = {0}); the weight integral must be strictly positive")]
    ZeroWeightMass(f64),

    #[error("column integrals non-constant: column 0 gives {first}, column {index} gives {value}")]
    NonConstantColumns { first: f64, index: usize, value: f64 },

    #[error("non-finite degree at v-atom {0}")]
    NonFiniteDegree(usize),

    #[error("mean identity failed: mean degree {mean} vs c*s/mu(V) = {identity}")]
    MeanIdentity { mean: f64, identity: f64 },

    #[error("key identity mismatch: double sum {double_sum} vs marginal form {marginal}")]
    KeyIdentity { double_sum: f64, marginal: f64 },

    #[error("range [{lo}, {hi}] exits the domain {domain}")]
    RangeOutsideDomain { lo: f64, hi: f64, domain: String },

    #[error("degree {value} at v-atom {index} lies outside the domain {domain}")]
    DegreeOutsideDomain {
        index: usize,
        value: f64,
        domain: String,
    },

    #[error("mean degree {mean} is not strictly inside the domain {domain}")]
    MeanOutsideDomain { mean: f64, domain: String },

    #[error("shape mismatch: check requires {required}, certified {found}")]
    ShapeMismatch {
        required: &'static str,
        found: String,
    },

    #[error("phi evaluation failed at t = {0}")]
    Evaluation(f64),

    #[error("invalid phi specification {0:?}")]
    PhiParse(String),

    #[error("negative degree {value} with non-integer exponent {exponent}")]
    NegativeBase { value: f64, exponent: f64 },

    #[error("non-positive degree {value} at v-atom {index}")]
    NonPositiveDegree { index: usize, value: f64 },

    #[error("induced probability measure unavailable (requires c*s > 0 and all degrees >= 0)")]
    RhoUnavailable,

    #[error("perturbation cannot stay inside the domain {0}")]
    PerturbationInfeasible(String),

    #[error("degenerate kernel column {column} after {attempts} redraws")]
    DegenerateColumn { column: usize, attempts: usize },

    #[error("edge {edge} has multiplicity sum {sum}, expected k = {k}")]
    NonUniform { edge: usize, sum: u64, k: u32 },

    #[error("vertex {0} is isolated")]
    IsolatedVertex(usize),

    #[error("vertex {0} has zero degree")]
    ZeroDegree(usize),

    #[error("regular {k}-uniform hypergraph on {p} vertices with {q} edges is infeasible: {p} does not divide {kq}", kq = (*k as usize) * q)]
    RegularInfeasible { p: usize, q: usize, k: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

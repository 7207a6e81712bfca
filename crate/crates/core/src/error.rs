//! Error type shared by every module of the crate.

use thiserror::Error;

use crate::graph_model::Chart;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("incidence matrix is not symmetric at ({i}, {j})")]
    AsymmetricIncidence { i: usize, j: usize },

    #[error("incidence matrix has a nonzero diagonal entry at node {0}")]
    NonzeroDiagonal(usize),

    #[error("incidence entry ({i}, {j}) is {value}; only 0 and 1 are allowed")]
    NonBinaryIncidence { i: usize, j: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// `e^{t/ε}` is not representable (`|t|/ε` above the overflow threshold).
    #[error("scale overflow: |t|/epsilon = {ratio:.3e} exceeds {limit}")]
    ScaleOverflow { ratio: f64, limit: f64 },

    #[error("cosine similarity needs a nonzero {which} norm at node {node}")]
    ZeroNormFeature { node: usize, which: &'static str },

    #[error("softmax activation must be frozen before use")]
    MissingFrozenDenominators,

    #[error("similarity variant `{0}` has no closed-form dynamics; only scaled-dot does")]
    UnsupportedVariant(&'static str),

    #[error("state is in the {found:?} chart, expected {expected:?}")]
    WrongChart { expected: Chart, found: Chart },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last update {update:.3e})")]
    NoConvergence { iterations: usize, update: f64 },

    #[error("linear system is singular or ill-conditioned (condition estimate {condition:.3e})")]
    SingularLinearSystem { condition: f64 },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::AsymmetricIncidence { .. } => "asymmetric-incidence",
            Error::NonzeroDiagonal(_) => "nonzero-diagonal",
            Error::NonBinaryIncidence { .. } => "non-binary-incidence",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::NonFinite(_) => "non-finite",
            Error::ScaleOverflow { .. } => "scale-overflow",
            Error::ZeroNormFeature { .. } => "zero-norm-feature",
            Error::MissingFrozenDenominators => "missing-frozen-denominators",
            Error::UnsupportedVariant(_) => "unsupported-variant",
            Error::WrongChart { .. } => "wrong-chart",
            Error::NoConvergence { .. } => "no-convergence",
            Error::SingularLinearSystem { .. } => "singular-linear-system",
            Error::AtStep { source, .. } => source.kind(),
            Error::UnknownPreset(_) => "unknown-preset",
            Error::InvalidConfig(_) => "invalid-config",
            Error::Io(_) => "io-error",
            Error::Json(_) => "json-error",
            Error::Csv(_) => "csv-error",
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

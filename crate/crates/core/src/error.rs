use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph must have at least one node")]
    EmptyGraph,

    #[error("edge ({src}, {dst}) references a node outside [0, {nodes})")]
    InvalidNode { src: usize, dst: usize, nodes: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("graph is not strongly connected: node {unreachable} cannot be reached from node {from}")]
    NotStronglyConnected { from: usize, unreachable: usize },

    #[error(
        "baselines need a symmetric topology, but edge ({src}, {dst}) has no reverse; \
         symmetrize the topology for baseline runs"
    )]
    AsymmetricGraph { src: usize, dst: usize },

    #[error("diameter bound {bound} is smaller than the graph diameter {diameter}")]
    DiameterBoundTooSmall { bound: usize, diameter: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("quantization level must be positive and finite, got {0}")]
    InvalidQuantization(f64),

    #[error("value {value} is too large to quantize at level {delta}")]
    QuantizationOverflow { value: f64, delta: f64 },

    #[error("message from {src} to {dst} does not follow an edge of the topology")]
    TopologyViolation { src: usize, dst: usize },

    #[error(
        "protocol stalled after {rounds} rounds: {active} of {components} components still \
         running, widest remaining spread {spread}"
    )]
    ProtocolStall {
        rounds: u64,
        active: usize,
        components: usize,
        spread: i64,
    },

    #[error("batch size {batch} outside [1, {samples}]")]
    InvalidBatch { batch: usize, samples: usize },

    #[error("oracle for epoch {epoch} did not converge: gradient norm {gradient_norm:e} after {iterations} iterations")]
    OracleFailure {
        epoch: usize,
        gradient_norm: f64,
        iterations: usize,
    },

    #[error("curvature constants must satisfy 0 < lower <= upper, got ({lower}, {upper})")]
    InvalidCurvature { lower: f64, upper: f64 },

    #[error("invalid bound parameters: {0}")]
    InvalidBoundParams(String),

    #[error("invalid step size {0}")]
    InvalidStepSize(f64),

    #[error("trace is empty")]
    EmptyTrace,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{algorithm} needs a communication budget schedule covering {needed} iterations, got {available}")]
    MissingBudget {
        algorithm: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("iteration {k}: {source}")]
    Iteration {
        k: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_iteration(self, k: usize) -> Self {
        match self {
            e @ Error::Iteration { .. } => e,
            e => Error::Iteration {
                k,
                source: Box::new(e),
            },
        }
    }
}

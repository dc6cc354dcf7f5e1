use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid lattice dimensions: {0}")]
    InvalidDimensions(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("qubit {index} out of range for {num_qubits} qubits")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("({0}, {1}) is not an edge of the graph")]
    NotAnEdge(usize, usize),
    #[error("no pattern generator for geometry `{0}`; supply a pattern explicitly")]
    UnsupportedGeometry(&'static str),
    #[error("driving pattern is invalid: {0}")]
    InvalidPattern(String),
    #[error("parameter point does not match the block: {0}")]
    ParameterMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite control value at index {0}")]
    NonFiniteControl(usize),
    #[error("invalid control vector: {0}")]
    InvalidControls(String),
    #[error("{num_qubits} qubits exceed the limit of {limit} for this operation")]
    TooManyQubits { num_qubits: usize, limit: usize },
    #[error("{0} uncertain parameters exceed the hypercube limit of 24")]
    TooManyCorners(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("linear program solver failure: {0}")]
    LinearProgram(String),
    #[error("state is not normalized (norm deviation {0:e})")]
    UnnormalizedState(f64),
    #[error("invalid spectroscopy cluster: {0}")]
    InvalidCluster(String),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("no pulse in the library for target `{target}` on block shape {shape}")]
    MissingPulse { target: String, shape: String },
}

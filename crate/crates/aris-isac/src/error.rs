use thiserror::Error;

/// Errors surfaced by the simulation chain.
#[derive(Debug, Error)]
pub enum Error {
    /// Two nodes coincide where a distance or angle is required.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// The target direction lies entirely inside the interference subspace;
    /// no NSP receive beamformer exists for this slot.
    #[error("NSP degenerate: target direction is inside the interference span")]
    NspDegenerate,

    /// The echo channel carries no target return.
    #[error("no echo: target echo power is zero")]
    NoEcho,

    /// The coordinate Fisher information matrix is singular for the given
    /// hover-point geometry.
    #[error("singular geometry: coordinate FIM is not invertible")]
    SingularGeometry,

    /// Parameter shapes do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Configuration parsing or validation failed. Exit code 1.
    #[error("config error: {0}")]
    Config(String),

    /// Runtime failure in an experiment. Exit code 2.
    #[error("runtime error: {0}")]
    Runtime(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

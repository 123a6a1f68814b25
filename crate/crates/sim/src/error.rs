use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Ownship and opponent occupy the same point, so the LOS has no direction.
    #[error("degenerate geometry: aircraft coincide")]
    DegenerateGeometry,

    #[error("simulation fault: {0}")]
    Fault(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// Trajectory views requested before the history buffer has filled.
    #[error("warm-up incomplete: history holds {have} of {need} states")]
    WarmUp { have: usize, need: usize },
}

pub type Result<T> = std::result::Result<T, SimError>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("collision: {0}")]
    Collision(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("slot at position {pos} in lane {lane} is occupied")]
    OccupiedSlot { lane: usize, pos: f64 },
    #[error("rejected insertion of vehicle {vid} into lane {lane}: {reason}")]
    RejectedInsertion {
        vid: u32,
        lane: usize,
        reason: String,
    },
    #[error("unknown vehicle {0}")]
    UnknownVehicle(u32),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SimError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, SimError>;

use thiserror::Error;

/// Errors raised by the modeling, analysis and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LccError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("gain for vehicle {vehicle} is outside the topology")]
    GainOutOfRange { vehicle: i32 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("gramian is numerically singular (lambda_min = {lambda_min:e})")]
    SingularGramian { lambda_min: f64 },

    #[error("transfer function has a pole on the imaginary axis at omega = {omega}")]
    PoleOnAxis { omega: f64 },

    #[error("collision at t = {time:.2} s between vehicle {leader} and vehicle {follower}")]
    Collision { time: f64, leader: i32, follower: i32 },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("csv output failed: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, LccError>;

impl From<csv::Error> for LccError {
    fn from(e: csv::Error) -> Self {
        LccError::Output(e.to_string())
    }
}

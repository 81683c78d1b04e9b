use thiserror::Error;

use crate::receivers::ReceiverKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no interior maximizer: f(x) = x f'(x) has no positive root")]
    NoInteriorMaximizer,

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("load beyond receiver capacity for {receiver}: {quantity} = {load} must be < {threshold}")]
    LoadBeyondCapacity {
        receiver: ReceiverKind,
        quantity: &'static str,
        load: f64,
        threshold: f64,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),
}

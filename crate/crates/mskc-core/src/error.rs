//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("denominator is zero")]
    ZeroDenominator,

    #[error("not a rational: {0:?}")]
    BadRational(String),

    #[error("magnitude cap exceeded: {bits} bits > cap {cap}")]
    MagnitudeExceeded { bits: u64, cap: u64 },

    #[error("invalid distribution: {0}")]
    BadDistribution(String),

    #[error("invalid instance: {0}")]
    BadInstance(String),

    #[error("effort level {action} of agent {agent} is not implementable")]
    NotImplementable { agent: usize, action: usize },

    #[error("agent {0} has no implementable effort level")]
    NoImplementableAction(usize),

    #[error("no choice with positive profit proxy; IOR is undefined")]
    NoPositiveChoice,

    #[error("state space too large: {states} states exceed cap {cap}")]
    StateSpaceTooLarge { states: usize, cap: usize },

    #[error("infeasible input assignment: {0}")]
    InfeasibleInput(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("delta too large: moment matching produced a negative probability for support point {index}")]
    DeltaTooLarge { index: usize },

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(context: impl Into<String>) -> Self {
        Error::Parse(context.into())
    }
}

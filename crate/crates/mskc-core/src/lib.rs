//! Solver, simulator and experiment harness for the multi-choice stochastic
//! knapsack with costs (MSKC) and the knapsack-contracts problem built on it.
//!
//! Everything model-level is exact rational arithmetic; Monte Carlo
//! estimation and display are the only floating-point surfaces.

pub mod contracts;
pub mod dist;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod instances;
pub mod lp_phi;
pub mod model;
pub mod oracle;
pub mod policies;
pub mod policy;
pub mod rational;
pub mod simplex;

pub use dist::FiniteDistribution;
pub use error::Error;
pub use model::{
    Contract, ContractAction, ContractAgent, ContractInstance, MskcChoice, MskcInstance, MskcItem,
    NULL_CHOICE,
};
pub use rational::Rational;

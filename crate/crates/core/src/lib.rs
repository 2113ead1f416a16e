pub mod analytics;
pub mod config;
pub mod domain;
pub mod error;
pub mod io;
pub mod milp;
pub mod mpc;
pub mod operation;
pub mod parallel;
pub mod planning;
pub mod stochastic;
pub mod sweep;

pub use error::{DomainError, Error, MilpError, Result};

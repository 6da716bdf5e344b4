//! Heavy-tailed multi-armed bandit laboratory.
//!
//! The [`policy`] module implements the parameter-free uniINF policy on top of
//! the log-barrier FTRL machinery in [`ftrl`]. [`env`] provides three-point
//! heavy-tailed environments with exact moment and truncation checks,
//! [`harness`] plays trajectories and audits them, and [`cli`] drives it all
//! from JSON experiment configs.

pub mod audit;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod ftrl;
pub mod harness;
pub mod output;
pub mod policy;
pub mod rng;
pub mod scaling;

pub use error::{Error, Result};

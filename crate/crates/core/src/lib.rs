//! Opportunistic multi-user scheduling under short-term temporal fairness.
//!
//! The crate covers exact feasibility analysis of fairness windows, the
//! ordered round robin / TBS / ATBS schedulers, threshold calibration,
//! a downlink channel model, and the experiment harness with its exact
//! dynamic-programming oracle.

pub mod calibration;
pub mod catalog;
pub mod channel;
pub mod demand;
pub mod error;
pub mod feasibility;
pub mod harness;
pub mod rational;
pub mod strategies;
pub mod trace;

pub use catalog::{VirtualUser, VirtualUserCatalog};
pub use demand::{CountBounds, TemporalDemand};
pub use error::{Error, Result};
pub use rational::Rational;
pub use strategies::{Strategy, StrategyKind, StrategyState, ThresholdVector};
pub use trace::{average_utility, check_fairness, temporal_share, FairnessReport, ScheduleTrace, ShareVector};

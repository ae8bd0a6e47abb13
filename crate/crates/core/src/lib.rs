//! Joint uplink/downlink sum-rate regions of a multi-user MIMO cell under
//! imperfect channel knowledge.
//!
//! The crate models how pilot density and CSI feedback budget trade off
//! against each other: per-PRB MMSE estimation and prediction yield scalar
//! CSI-quality figures, which feed lower bounds on the uplink and downlink
//! sum rates. A sweep over the operating parameters then gives net rates,
//! the Pareto frontier and its convex hull.

pub mod error;
pub mod numerics;
pub mod channel;
pub mod pilots;
pub mod estimation;
pub mod feedback;
pub mod capacity;
pub mod config;
pub mod region;
pub mod cli;

pub use error::{Error, Result};

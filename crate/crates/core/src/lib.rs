//! Decentralized zeroth-order optimization of nonsmooth nonconvex objectives
//! through randomized smoothing and gradient tracking.

#![allow(clippy::needless_range_loop)]

pub mod algorithms;
pub mod data;
pub mod error;
pub mod metrics;
pub mod objectives;
pub mod rng;
pub mod smoothing;
pub mod stacked;
pub mod topology;

pub use error::{Error, Result};
pub use stacked::Stacked;

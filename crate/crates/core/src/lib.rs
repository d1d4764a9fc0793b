//! Analytic engine and Monte-Carlo oracle for infinite-server queues with
//! marked MAP arrivals, per-type general service, random resource vectors
//! and a semi-Markov environment whose transitions flush the system.

pub mod analysis;
pub mod cli;
pub mod distribution;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod map_algebra;
pub mod measures;
pub mod model;
pub mod model_file;
pub mod renewal;
pub mod report;
pub mod simulator;
pub mod special_case;
pub mod transient;

pub use error::{Error, Result};

//! Air-ground cooperative mobile edge computing.
//!
//! One UAV-mounted edge server, one base-station server and a handful of
//! terrestrial user devices share a slotted world in which every device
//! decides, each slot, whether to process its queued task bits locally or
//! ship them to one of the two servers, while the UAV picks a flight
//! direction. The crate contains:
//!
//! - [`env`]: the seeded physical world (channels, rates, FIFO queues,
//!   energy accounting, periodic task production);
//! - [`morl`]: the distributed multi-objective kernel R-learning agent with
//!   n-step return, ALD dictionary growth and visit-table exploration;
//! - [`dnn`]: a fully connected network baseline with replay, target
//!   networks and Adam, written from scratch;
//! - [`harness`]: configuration, experiment execution, CSV emission, sweeps,
//!   timing and checkpoints.
//!
//! Independent runs fan out over rayon when the `parallel` feature is on
//! (the default); see [`par`].

pub mod dnn;
pub mod env;
pub mod error;
pub mod harness;
pub mod morl;
pub mod par;
pub mod rng;

pub use error::{Error, Result};

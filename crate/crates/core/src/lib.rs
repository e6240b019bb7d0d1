//! Pace-and-path correction for chunked action policies under moving targets.
//!
//! The crate is organised bottom-up: [`model`] holds the domain types,
//! [`pace`] and [`path`] the two closed-form channels, [`latch`] the cadence
//! gate, and [`wrapper`] composes them per chunk. [`oracle`] is a dense
//! least-squares reference used by tests and the verification suite.
//! [`sim`] provides the point-mass benchmark, [`batch`] runs episodes in
//! parallel, and [`experiment`] turns batches into CSV and JSON artifacts.

pub mod batch;
pub mod error;
pub mod experiment;
pub mod latch;
pub mod model;
pub mod oracle;
pub mod pace;
pub mod path;
pub mod sim;
pub mod verify;
pub mod wrapper;

pub use error::{PpcError, Result};
pub use model::{ActionStep, ChunkPlan, DisturbanceEstimate, LatchConstants, Vec3, WrapperConfig};

//! Gearshift feasibility for two-speed electric-vehicle powertrains.
//!
//! The crate builds no-jerk output targets from a vehicle model, tracks them
//! through a rigid driveline model during a gearshift, and checks whether a
//! saturated motor can follow them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod driveline;
pub mod error;
pub mod feasibility;
pub mod integrate;
pub mod motor_sizing;
pub mod roots;
pub mod trajectory;
pub mod vehicle_load;

pub use error::{Error, Result};

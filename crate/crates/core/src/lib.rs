//! Reactive-force thrust model for undulating tail propulsors, together with
//! the dual-cantilever force-sensor model and the measured-force processing
//! pipeline used to characterize them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod datastore;
pub mod error;
pub mod kinematics;
pub mod numerics;
pub mod reactive;
pub mod sensor;
pub mod sigproc;
pub mod synthetic;

pub use error::{Error, Result};

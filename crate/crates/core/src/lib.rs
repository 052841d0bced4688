//! Grid-forming inverter control laws (Andronov–Hopf oscillator, enhanced
//! oscillator and droop), averaged time-domain simulation, and small-signal
//! analysis of the single-phase inverter–grid system.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod controllers;
pub mod error;
pub mod model;
pub mod sim;
pub mod tuning;

pub use error::{Error, Result};

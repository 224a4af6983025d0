//! Update-focused GUI testing: finds the methods changed between two app
//! versions, builds a static window model annotated with those targets, and
//! drives a three-phase exploration that tries to exercise them.

pub mod abstraction;
pub mod app_model;
pub mod appdiff;
pub mod cli_io;
pub mod code;
pub mod error;
pub mod explorer;
pub mod gui;
pub mod ir;
pub mod scenario;
pub mod simulator;
pub mod static_model;

pub use error::{Error, Result};

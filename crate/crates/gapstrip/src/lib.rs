//! Sweeps, configuration, file formats and the command-line driver for
//! [`gapstrip_core`].

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pool;
pub mod svg;
pub mod verify;

pub use gapstrip_core as core;

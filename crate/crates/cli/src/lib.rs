//! Library surface of the `beamtrack` binary: run configuration, checkpoint
//! format, and command implementations. The acceptance suite drives the same
//! code paths the CLI does.

pub mod checkpoint;
pub mod commands;
pub mod config;

//! Library side of the `inxt` command-line tool: benchmark harness,
//! gradient-check runner, and the subcommand implementations.

pub mod bench;
pub mod commands;
pub mod gradcheck;

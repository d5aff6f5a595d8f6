//! Pipeline plumbing behind the `dph` binary: configuration, the synthetic
//! planted-block generator, and one function per subcommand.

pub mod commands;
pub mod config;
pub mod fsutil;
pub mod synth;

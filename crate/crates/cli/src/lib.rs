//! Configuration schema, value-function persistence, and the command
//! implementations behind the `fastrack` binary.

pub mod config;
pub mod run;
pub mod vffile;

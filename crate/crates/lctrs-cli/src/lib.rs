//! Problem-file parsing and command implementations behind the `lctrs`
//! binary.

pub mod commands;
pub mod parse;

pub use commands::{BackendOpts, CmdError, Outcome};
pub use parse::{parse_problem, FileError, ProblemFile};

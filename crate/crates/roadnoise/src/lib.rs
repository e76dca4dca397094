//! File formats, parallel orchestration and the command-line front end for
//! the `roadnoise-core` pipeline.

pub mod cli;
pub mod corpus_io;
pub mod error;
pub mod files;
pub mod model_io;
pub mod parallel;
pub mod report;
pub mod tensor_io;
pub mod wav;

pub use cli::run_command;
pub use error::{Error, Result};

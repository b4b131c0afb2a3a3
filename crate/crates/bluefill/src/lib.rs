//! File formats, benchmark driver and command-line interface on top of
//! [`bluefill_core`].

pub mod bench;
pub mod cli;
pub mod error;
pub mod io;
pub mod plan;

pub use error::{Error, Result};

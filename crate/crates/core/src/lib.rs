pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod hydraulics;
pub mod io;
pub mod performance;
pub mod repro;
pub mod simplex;
pub mod thermal;
pub mod units;
pub mod valve;

pub use error::{Error, Result};

pub mod error;
pub mod interval;
pub mod maps;
pub mod cylinders;
pub mod measures;
pub mod normality;
pub mod jointergo;
pub mod entropy;
pub mod mixing;
pub mod cli;

pub use error::{Error, Result};
pub use interval::{make_enclosure, sample, EnclosedReal, PrecisionConfig};
pub use maps::{orbit_digits, DigitString, MapSpec, Orbit, Symbol};

//! Extremum-seeking control of wave energy converter power take-off.

pub mod controllers;
pub mod engine;
pub mod error;
pub mod hydro;
pub mod mapgen;
pub mod plants;
pub mod signals;
pub mod waves;

pub use error::{Error, Result};

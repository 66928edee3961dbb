//! FMCW radar processing for sign-language interface triggering.

// `!(x > 0.0)` style checks deliberately reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod datacube;
pub mod envelope;
pub mod error;
pub mod evaluation;
pub mod fidelity;
pub mod motiondetect;
pub mod pipeline;
pub mod rfrep;
pub mod seqdecode;
pub mod synth;
pub mod util;

pub use error::{Error, Result};

//! Two-element interferometer pulse-pair discovery: synthetic observations,
//! first-level scoring, pair formation and filtering, and the binomial
//! effect-size scan over RA bins.

pub mod config;
pub mod discovery;
pub mod error;
pub mod firstlevel;
pub mod geometry;
pub mod io;
pub mod pairing;
pub mod phasecal;
pub mod pipeline;
pub mod selftest;
pub mod sky;
pub mod stats;
pub mod synth;

pub use config::RunConfig;
pub use error::{Error, Result};

//! Acoustic-to-articulatory inversion: MFCC front end, rtMRI contour corpus
//! handling, a small recurrent network stack, training and evaluation.

pub mod corpus;
mod error;
pub mod features;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod report;
pub mod synth;
pub mod training;

pub use error::{Error, Result};

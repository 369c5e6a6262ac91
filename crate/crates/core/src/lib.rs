//! Saliency analysis and prediction for 360-degree panoramas.

pub mod apps;
pub mod bias;
pub mod error;
pub mod io;
pub mod metrics;
pub mod predict;
mod numeric;
pub mod salmap;
pub mod sphere;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};

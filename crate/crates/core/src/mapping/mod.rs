//! Rendering tumor state into CT intensities.

mod noise;
mod render;

pub use noise::{normalize, value_noise, ValueNoise};
pub use render::{render, IntensityModel};

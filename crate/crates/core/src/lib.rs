//! Synthetic tumor generation for CT volumes.
//!
//! Two generators share seed selection, intensity rendering, and mass
//! effect: a cellular automaton that grows a lesion from a single voxel
//! ([`ca`]) and a shape-based generator ([`handcrafted`]). [`metrics`]
//! holds the overlap, surface, reader-study, and appearance measures used
//! to evaluate the output.

pub mod ca;
pub mod distance;
pub mod error;
pub mod grid;
pub mod handcrafted;
pub mod interaction;
pub mod mapping;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod quantize;
pub mod rng;
pub mod volume_io;

pub use error::{Error, Result};

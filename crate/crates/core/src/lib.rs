//! Synthetic FMCW mmWave radar data from animated human meshes.
//!
//! The crate covers the whole text-to-signal path short of the learned
//! models: motion prompts ([`scenario_text`]), mesh sequence handling
//! ([`mesh_motion`]), radar physics ([`radar_model`], [`em_synthesis`]),
//! range/Doppler processing ([`signal_processing`]), sim-to-real
//! randomization ([`domain_randomization`]) and dataset packaging
//! ([`dataset_pipeline`]). [`alignment_math`] holds the numeric pieces
//! that downstream contrastive training consumes.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment_math;
pub mod dataset_pipeline;
pub mod domain_randomization;
pub mod em_synthesis;
pub mod error;
pub mod geometry;
mod io_util;
pub mod mesh_motion;
pub mod radar_model;
pub mod rng;
pub mod scenario_text;
pub mod signal_processing;

pub use error::{Error, Result};
pub use geometry::Vec3;
pub use io_util::sidecar_path;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Version string written into dataset manifests.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

//! Degradation-coupled P2D lithium-ion cell simulation, parameter calibration
//! and motion-aware health assessment of multirotor battery packs.
//!
//! Sign convention throughout: discharge current is positive.

pub mod assessment;
pub mod calibration;
pub mod degradation;
pub mod error;
pub mod model;
pub mod params;
pub mod profiles;

pub use error::{Error, Result};
pub use params::{DegradationParams, DegradationToggles, Electrode, ParameterSet};

//! Planar range sensing and the egocircle local map.

mod egocircle;
mod raycast;

pub use egocircle::{EgoPoint, Egocircle, EgocircleConfig, Observation};
pub use raycast::{raycast, Scan, SensorConfig};

//! Differential-drive simulation and the episode loop.

mod episode;
mod kinematics;

pub use episode::*;
pub use kinematics::*;

//! Navigation laboratory for online, scene-sensitive tuning of planner
//! parameters.
//!
//! A differential-drive robot navigates procedurally generated worlds with a
//! hierarchical planner: an incremental grid planner (D*-Lite) for the global
//! path and a gap-based local planner over an egocentric polar map. Tuners
//! (fixed defaults, best-value curves, batch-trained networks, and an
//! action-branching DQN) reconfigure the planner parameters every two
//! simulated seconds.

pub mod bench;
pub mod geom;
pub mod global_planner;
pub mod local_planner;
pub mod nn;
pub mod robot_sim;
pub mod sensing;
pub mod tuners;
pub mod world;

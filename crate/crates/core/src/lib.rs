//! Learning-from-demonstration toolkit for collaborative peg-in-hole assembly.

pub mod assembly;
pub mod config;
pub mod diff;
pub mod dmp;
pub mod ktc;
pub mod metrics;
pub mod se3;
pub mod synthetic;
pub mod trajectory;
pub mod vision;

pub use se3::{Pose, UnitQuaternion, Vec3, Wrench};
pub use trajectory::{Sample, Trajectory};

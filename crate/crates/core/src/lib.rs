//! Planar kinematics, heading optimization, docking checks and scenario
//! simulation for structures assembled from single-omni-wheel modules.

pub mod control;
pub mod docking;
pub mod kinematics;
pub mod model;
pub mod optimizer;
pub mod sim;

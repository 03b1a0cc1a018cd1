//! Deterministic bird's-eye-view driving simulation and planner scoring.

pub mod analysis;
pub mod bench;
pub mod curation;
pub mod dynamics;
pub mod geom;
pub mod metrics;
pub mod planners;
pub mod scene;
pub mod sim;

//! Mirror self-recognition benchmark: a kinematic mirror room, a
//! first-person renderer, a JSON agent protocol, scripted and remote agent
//! backends, and the episode metrics.

pub mod agents;
pub mod color;
pub mod harness;
pub mod metrics;
pub mod protocol;
pub mod render;
pub mod world;

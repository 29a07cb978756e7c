//! Dual-camera visuomotor imitation learning with meta-learned adaptation
//! of the external-camera encoder to new camera poses.
//!
//! The pipeline: record expert demonstrations in a deterministic kinematic
//! pick-and-place world, train a baseline policy with DAgger, then adapt
//! the external perception encoder to a moved camera with a MAML-style
//! latent-alignment objective while the policy stays frozen.

pub mod ckpt;
pub mod data;
pub mod harness;
pub mod imitation;
pub mod meta;
pub mod nets;
pub mod render;
pub mod rng;
pub mod sim;

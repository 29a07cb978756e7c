//! Differentiable perception and policy networks.

pub mod adam;
pub mod dual;
pub mod encoder;
pub mod model;
pub mod ops;
pub mod params;
pub mod policy;
pub mod real;

pub use adam::Adam;
pub use encoder::EncoderParams;
pub use model::{bc_batch_loss, bc_batch_loss_grad, bc_loss, perception_forward, predict, Sample};
pub use params::{Group, ParamSet};
pub use policy::{ActionDistribution, PolicyParams};
pub use real::Real;

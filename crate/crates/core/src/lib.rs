pub mod analysis;
pub mod attitude_lift;
pub mod error;
pub mod harness;
pub mod lifted_model;
pub mod ode;
pub mod position_lift;
pub mod quad_control;
pub mod rigid_body;

pub use error::{Error, Result};

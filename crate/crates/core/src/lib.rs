pub mod analysis;
pub mod error;
pub mod experiments;
pub mod mac;
pub mod orthant;
pub mod quadrature;
pub mod relay_set;
pub mod scenario;
pub mod shadowing;
pub mod sim;

pub use error::{Error, Result};

pub mod error;
pub mod expcli;
pub mod fieldsim;
pub mod gmc;
pub mod kernels;
pub mod quad;
pub mod radial;
pub mod rng;
pub mod stats;
pub mod tailest;

pub use error::{Error, Result};

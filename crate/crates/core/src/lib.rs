//! Channel estimation for RIS-assisted MIMO links with passive and hybrid
//! reflecting surfaces, built on gridless atomic norm minimization.

pub mod anm;
pub mod channel;
pub mod control;
pub mod error;
pub mod harness;
pub mod hybrid;
pub mod linalg;
pub mod metrics;
pub mod passive;
pub mod spectral;

pub use error::{Error, Result};

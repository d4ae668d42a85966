//! The Lerch family of discrete distributions: Lerch's transcendent, the
//! distribution itself, exact sampling, fitting, and goodness of fit.

pub mod baselines;
pub mod data;
pub mod dist;
pub mod error;
pub mod estimate;
pub mod gof;
pub mod optim;
pub mod phi;
pub mod sampler;
pub mod special;
pub mod sum;

pub use dist::{LerchDist, LerchParams, Truncation};
pub use error::{LerchError, Result};

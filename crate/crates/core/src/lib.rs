//! Maximum-likelihood estimation of stochastic production frontiers with an
//! endogenous binary treatment.

pub mod baseline;
pub mod cli;
pub mod efficiency;
pub mod error;
pub mod estimation;
pub mod inference;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod simulation;
pub mod special_fns;

pub use error::{Result, SfError};
pub use model::{Dataset, ModelSpec, Theta};

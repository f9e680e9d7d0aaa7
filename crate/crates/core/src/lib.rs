//! Multi-modal, multi-fidelity Gaussian-process surrogates for preference
//! learning, with MCMC inference, acquisition functions, phased Bayesian
//! optimization loops and synthetic benchmark problems.

pub mod acquisition;
pub mod api;
pub mod bench;
pub mod bo;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod likelihood;
pub mod linalg;
pub mod manifest;
pub mod mcmc;
pub mod normal;
pub mod seed;
pub mod session;
pub mod sobol;
pub mod space;
pub mod surrogate;

pub use error::{Error, Result};

//! Seasonal stochastic volatility for commodity futures.
//!
//! A multi-factor model in which each factor's CIR variance reverts to a periodic
//! mean level θ(t). The crate provides the seasonal patterns and their Laplace-type
//! transforms, path simulation, the semi-closed-form characteristic function, Fourier
//! option pricing, a Kalman-filter quasi-likelihood for futures panels, annealing-based
//! estimation with likelihood-ratio tests, and data preparation for roll-adjusted returns.

pub mod charfn;
pub mod cir;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod estimation;
pub mod kalman;
pub mod optim;
pub mod params;
pub mod pricing;
pub mod quadrature;
pub mod seasonality;
pub mod statespace;

pub use error::{Error, Result};
pub use params::{FactorParams, ModelParams};
pub use seasonality::{Pattern, SeasonalitySpec};

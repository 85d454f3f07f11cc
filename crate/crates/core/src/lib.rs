//! Structural bid stack model for electricity prices in a multi-fuel market.
//!
//! Fuel bid curves are exponential in the supplied quantity and
//! multiplicative in the fuel price. Stacking them in merit order maps
//! demand and fuel prices to a spot price, and under lognormal fuels and
//! truncated Gaussian demand the model yields closed forms for power
//! forwards, power price moments and zero-strike dark/spark spread options.
//!
//! The crate is `no_std` (it needs `alloc`). IO, configuration and
//! parallel Monte Carlo drivers live in the `bidstack` crate.
//!
//! Module map:
//!
//! - [`gauss`]: univariate/bivariate normal distribution functions and the
//!   exponential-Gaussian overlap integral every closed form reduces to.
//! - [`stack`]: bid curves, marginal-fuel classification and spot prices.
//! - [`market`]: terminal laws, exp-OU parameter mapping, scenarios.
//! - [`forward`]: forward prices, spike correction and price moments.
//! - [`spread`]: dark and spark spread options.
//! - [`reference`]: Margrabe, cointegration, moment matching, implied
//!   correlation.
//! - [`mc`]: seeded Monte Carlo oracle and path simulation.
//! - [`plant`]: generation asset values as strips of spread options.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
mod expectation;
mod math;

pub mod forward;
pub mod gauss;
pub mod market;
pub mod mc;
pub mod optim;
pub mod plant;
pub mod quad;
pub mod reference;
pub mod spread;
pub mod stack;

pub use error::{Error, Result};
pub(crate) use error::ensure;
pub use forward::PricingInputs;
pub use market::{DemandLaw, FuelDynamics, FuelTerminalLaw, MarketParams, ScenarioId, ScenarioSpec};
pub use stack::{Fuel, FuelBid, SpikeParams, TwoFuelStack};

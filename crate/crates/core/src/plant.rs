//! Generation assets as strips of hourly spread options.

use alloc::vec::Vec;

use crate::forward::PricingInputs;
use crate::market::{DemandLaw, ScenarioSpec};
use crate::reference::{stack_power_moments, MargrabeSetup};
use crate::spread::{heat_rate_quantity, spread_price_closed, Leg, SpreadSpec};
use crate::stack::SpikeParams;
use crate::{ensure, Error, Result};

pub const HOURS_PER_YEAR: f64 = 8760.0;

/// One week in years.
pub const WEEK: f64 = 168.0 / HOURS_PER_YEAR;

/// Hour midpoints (j + 1/2)/8760 covering `years`.
pub fn hourly_maturities(years: f64) -> Vec<f64> {
    let n = crate::math::round(years * HOURS_PER_YEAR) as usize;
    (0..n).map(|j| (j as f64 + 0.5) / HOURS_PER_YEAR).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    pub leg: Leg,
    pub heat_rate: f64,
    pub capacity_mw: f64,
    pub hours: Vec<f64>,
    pub rate: f64,
}

impl PlantSpec {
    pub fn validate(&self) -> Result<()> {
        ensure(self.capacity_mw > 0.0 && self.capacity_mw.is_finite(), "capacity_mw", "must be positive")?;
        ensure(self.heat_rate > 0.0, "heat_rate", "must be positive")?;
        ensure(self.rate.is_finite(), "rate", "must be finite")?;
        ensure(!self.hours.is_empty(), "hours", "must not be empty")?;
        ensure(self.hours[0] > 0.0, "hours", "maturities must be positive")?;
        ensure(self.hours.windows(2).all(|w| w[1] > w[0]), "hours", "must be strictly increasing")?;
        ensure(self.hours.iter().all(|t| t.is_finite()), "hours", "must be finite")
    }
}

/// How hourly maturities are priced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlantMode {
    /// One closed-form price per hour.
    Exact,
    /// Prices on a grid of this spacing (years), linearly interpolated.
    Cached { step: f64 },
}

impl PlantMode {
    pub const WEEKLY: PlantMode = PlantMode::Cached { step: WEEK };
}

/// Pricing inputs for one hour.
pub fn hour_inputs(scenario: &ScenarioSpec, demand: &DemandLaw, spike: Option<SpikeParams>, rate: f64, t: f64) -> Result<PricingInputs> {
    let mut inp = PricingInputs::from_scenario(scenario, t)?;
    inp.demand = *demand;
    inp.rate = rate;
    inp.spike = spike;
    inp.validate()?;
    Ok(inp)
}

/// capacity × Σ_j unit(T_j), with unit prices discounted.
pub fn strip_value<F: FnMut(f64) -> Result<f64>>(plant: &PlantSpec, mode: PlantMode, mut unit: F) -> Result<f64> {
    plant.validate()?;
    let total = match mode {
        PlantMode::Exact => {
            let mut s = 0.0;
            for &t in &plant.hours {
                s += unit(t)?;
            }
            s
        }
        PlantMode::Cached { step } => {
            ensure(step > 0.0 && step.is_finite(), "step", "must be positive")?;
            let (first, last) = (plant.hours[0], plant.hours[plant.hours.len() - 1]);
            let n = crate::math::ceil((last - first) / step).max(1.0) as usize;
            let nodes: Vec<f64> = (0..=n).map(|i| first + (last - first) * i as f64 / n as f64).collect();
            let mut values = Vec::with_capacity(nodes.len());
            for &t in &nodes {
                values.push(unit(t)?);
            }
            let mut s = 0.0;
            let mut k = 0;
            for &t in &plant.hours {
                while k + 2 < nodes.len() && t > nodes[k + 1] {
                    k += 1;
                }
                let (t0, t1) = (nodes[k], nodes[(k + 1).min(nodes.len() - 1)]);
                let w = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
                s += values[k] + w * (values[(k + 1).min(nodes.len() - 1)] - values[k]);
            }
            s
        }
    };
    Ok(plant.capacity_mw * total)
}

/// Stack-model plant value at a fixed demand law.
pub fn plant_value(plant: &PlantSpec, scenario: &ScenarioSpec, demand: &DemandLaw, spike: Option<SpikeParams>, mode: PlantMode) -> Result<f64> {
    scenario.validate()?;
    heat_rate_quantity(plant.heat_rate, scenario.base.stack.bid(plant.leg.fuel()))?;
    strip_value(plant, mode, |t| {
        let inp = hour_inputs(scenario, demand, spike, plant.rate, t)?;
        spread_price_closed(&inp, &SpreadSpec::new(plant.leg, plant.heat_rate, t))
    })
}

/// Margrabe strip: power moments come from `history` (the scenario itself
/// when `None`), fuel forwards from `scenario`.
#[derive(Debug, Clone, PartialEq)]
pub struct MargrabeCompanion {
    pub rho_pi: f64,
    pub history: Option<ScenarioSpec>,
}

pub fn plant_value_margrabe(plant: &PlantSpec, scenario: &ScenarioSpec, demand: &DemandLaw, companion: &MargrabeCompanion, mode: PlantMode) -> Result<f64> {
    scenario.validate()?;
    if !(-1.0..=1.0).contains(&companion.rho_pi) {
        return Err(Error::CorrelationOutOfRange(companion.rho_pi));
    }
    let moments_from = companion.history.as_ref().unwrap_or(scenario);
    strip_value(plant, mode, |t| {
        let inp = hour_inputs(scenario, demand, None, plant.rate, t)?;
        let (m, v) = stack_power_moments(&hour_inputs(moments_from, demand, None, plant.rate, t)?)?;
        MargrabeSetup::from_moments(m, v, &inp.law, plant.leg, plant.heat_rate, plant.rate, t)?.price(companion.rho_pi)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub mu_d: f64,
    pub value: f64,
}

/// Demand law of the sweep: scenario σ_d and capacity, varying μ_d.
pub fn sweep_demand(scenario: &ScenarioSpec, mu_d: f64) -> Result<DemandLaw> {
    DemandLaw::new(mu_d, scenario.base.sigma_d, scenario.base.stack.capacity())
}

pub fn plant_value_sweep(plant: &PlantSpec, scenario: &ScenarioSpec, mu_grid: &[f64], spike: Option<SpikeParams>, mode: PlantMode) -> Result<Vec<SweepPoint>> {
    ensure(!mu_grid.is_empty(), "mu_d grid", "must not be empty")?;
    mu_grid
        .iter()
        .map(|&mu_d| Ok(SweepPoint { mu_d, value: plant_value(plant, scenario, &sweep_demand(scenario, mu_d)?, spike, mode)? }))
        .collect()
}

pub fn plant_value_sweep_margrabe(plant: &PlantSpec, scenario: &ScenarioSpec, mu_grid: &[f64], companion: &MargrabeCompanion, mode: PlantMode) -> Result<Vec<SweepPoint>> {
    ensure(!mu_grid.is_empty(), "mu_d grid", "must not be empty")?;
    mu_grid
        .iter()
        .map(|&mu_d| Ok(SweepPoint { mu_d, value: plant_value_margrabe(plant, scenario, &sweep_demand(scenario, mu_d)?, companion, mode)? }))
        .collect()
}

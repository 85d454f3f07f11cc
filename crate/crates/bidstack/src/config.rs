//! JSON run configuration. Every field has a default; the market defaults
//! are the symmetric reference set.

use std::path::{Path, PathBuf};

use bidstack_core::market::{ForwardInputs, LevelOverrides};
use bidstack_core::mc::SimConfig;
use bidstack_core::reference::MatchPolicy;
use bidstack_core::spread::Leg;
use bidstack_core::{FuelBid, FuelDynamics, MarketParams, ScenarioId, ScenarioSpec, SpikeParams, TwoFuelStack};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioName {
    I,
    II,
    III,
}

impl From<ScenarioName> for ScenarioId {
    fn from(s: ScenarioName) -> Self {
        match s {
            ScenarioName::I => ScenarioId::I,
            ScenarioName::II => ScenarioId::II,
            ScenarioName::III => ScenarioId::III,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LegName {
    Dark,
    Spark,
}

impl From<LegName> for Leg {
    fn from(l: LegName) -> Self {
        match l {
            LegName::Dark => Leg::Dark,
            LegName::Spark => Leg::Spark,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidBlock {
    pub k: f64,
    pub m: f64,
    pub cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketBlock {
    pub coal: BidBlock,
    pub gas: BidBlock,
    pub kappa_c: f64,
    pub kappa_g: f64,
    pub nu_c: f64,
    pub nu_g: f64,
    pub lambda_c: f64,
    pub lambda_g: f64,
    pub s0_c: f64,
    pub s0_g: f64,
    pub varrho: f64,
    pub mu_d: f64,
    pub sigma_d: f64,
    pub rate: f64,
}

impl Default for MarketBlock {
    fn default() -> Self {
        Self::from_params(&MarketParams::symmetric(0.0))
    }
}

impl MarketBlock {
    fn from_params(p: &MarketParams) -> Self {
        let bid = |b: &FuelBid| BidBlock { k: b.k, m: b.m, cap: b.cap };
        let d = &p.dynamics;
        Self {
            coal: bid(&p.stack.coal),
            gas: bid(&p.stack.gas),
            kappa_c: d.kappa_c,
            kappa_g: d.kappa_g,
            nu_c: d.nu_c,
            nu_g: d.nu_g,
            lambda_c: d.lambda_c,
            lambda_g: d.lambda_g,
            s0_c: d.s0_c,
            s0_g: d.s0_g,
            varrho: d.varrho,
            mu_d: p.mu_d,
            sigma_d: p.sigma_d,
            rate: p.rate,
        }
    }

    pub fn params(&self, varrho: f64) -> Result<MarketParams, CliError> {
        let bid = |b: &BidBlock| FuelBid::new(b.k, b.m, b.cap);
        let p = MarketParams {
            stack: TwoFuelStack::new(bid(&self.coal)?, bid(&self.gas)?)?,
            dynamics: FuelDynamics {
                kappa_c: self.kappa_c,
                kappa_g: self.kappa_g,
                nu_c: self.nu_c,
                nu_g: self.nu_g,
                lambda_c: self.lambda_c,
                lambda_g: self.lambda_g,
                s0_c: self.s0_c,
                s0_g: self.s0_g,
                varrho,
            },
            mu_d: self.mu_d,
            sigma_d: self.sigma_d,
            rate: self.rate,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Observed fuel forward curve (scenario II).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum ForwardBlock {
    /// Levels plus a per-month step.
    Linear { level_c: f64, level_g: f64, step_c: f64, step_g: f64 },
    /// Rows [T, F^c, F^g].
    Table(Vec<[f64; 3]>),
}

impl From<&ForwardBlock> for ForwardInputs {
    fn from(f: &ForwardBlock) -> Self {
        match *f {
            ForwardBlock::Linear { level_c, level_g, step_c, step_g } => ForwardInputs::Linear { level_c, level_g, step_c, step_g },
            ForwardBlock::Table(ref rows) => ForwardInputs::Table(rows.iter().map(|r| (r[0], r[1], r[2])).collect()),
        }
    }
}

/// Replacement fuel levels (scenario III).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelBlock {
    pub lambda_c: f64,
    pub lambda_g: f64,
    pub s0_c: f64,
    pub s0_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpikeBlock {
    pub enabled: bool,
    pub m_n: f64,
    pub m_s: f64,
}

impl Default for SpikeBlock {
    fn default() -> Self {
        Self { enabled: false, m_n: 50.0, m_s: 50.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McBlock {
    pub enabled: bool,
    pub paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McBlock {
    fn default() -> Self {
        Self { enabled: true, paths: 1_000_000, seed: 20_240_601, antithetic: true }
    }
}

/// A spot query: demand (or the demand driver X when spikes are on) and fuel prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpotBlock {
    pub demand: f64,
    pub s_c: f64,
    pub s_g: f64,
}

impl Default for SpotBlock {
    fn default() -> Self {
        Self { demand: 0.5, s_c: 10.0, s_g: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyBlock {
    pub mean: bool,
    pub variance: bool,
}

impl Default for PolicyBlock {
    fn default() -> Self {
        Self { mean: true, variance: true }
    }
}

impl From<PolicyBlock> for MatchPolicy {
    fn from(p: PolicyBlock) -> Self {
        MatchPolicy { match_mean: p.mean, match_variance: p.variance }
    }
}

/// Matched Margrabe companion. Moments not matched to the priced scenario
/// come from `history`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MargrabeBlock {
    /// Power–fuel correlation; the row's ϱ when absent.
    pub rho_pi: Option<f64>,
    pub history: Option<ScenarioName>,
    pub policy: PolicyBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CointegrationBlock {
    pub enabled: bool,
    pub paths: usize,
}

impl Default for CointegrationBlock {
    fn default() -> Self {
        Self { enabled: true, paths: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantBlock {
    pub leg: LegName,
    pub heat_rate: f64,
    pub capacity_mw: f64,
    pub years: f64,
    /// Discount rate; the market rate when absent.
    pub rate: Option<f64>,
    /// Spacing of the cached maturity grid in hours.
    pub cache_hours: f64,
    pub mu_d: Vec<f64>,
    pub rho_pi: f64,
    /// Scenario whose power moments feed the Margrabe strip.
    pub history: Option<ScenarioName>,
}

impl Default for PlantBlock {
    fn default() -> Self {
        Self {
            leg: LegName::Dark,
            heat_rate: 2.25f64.exp(),
            capacity_mw: 1000.0,
            years: 3.0,
            rate: None,
            cache_hours: 168.0,
            mu_d: (1..=9).map(|i| i as f64 / 10.0).collect(),
            rho_pi: 0.0,
            history: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeasonalBlock {
    pub amplitude: f64,
    /// Years.
    pub period: f64,
    pub phase: f64,
}

impl SeasonalBlock {
    pub fn at(&self, t: f64) -> f64 {
        self.amplitude * (std::f64::consts::TAU * t / self.period + self.phase).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateBlock {
    pub paths: usize,
    pub steps: usize,
    pub horizon: f64,
    pub antithetic: bool,
    pub demand_kappa: f64,
    pub demand_level: f64,
    pub demand_nu: f64,
    pub demand_x0: f64,
    pub seasonal: Option<SeasonalBlock>,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            paths: 4,
            steps: 365,
            horizon: 1.0,
            antithetic: false,
            demand_kappa: 20.0,
            demand_level: 0.5,
            demand_nu: 1.0,
            demand_x0: 0.5,
            seasonal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: ScenarioName,
    pub market: MarketBlock,
    pub forwards: Option<ForwardBlock>,
    pub levels: Option<LevelBlock>,
    pub spike: SpikeBlock,
    pub mc: McBlock,
    pub spot: SpotBlock,
    pub maturities: Vec<f64>,
    pub heat_rates: Vec<f64>,
    /// Fuel correlations to sweep; the market's ϱ when empty.
    pub varrho: Vec<f64>,
    pub legs: Vec<LegName>,
    pub margrabe: MargrabeBlock,
    pub cointegration: CointegrationBlock,
    pub plant: PlantBlock,
    pub simulate: SimulateBlock,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioName::I,
            market: MarketBlock::default(),
            forwards: None,
            levels: None,
            spike: SpikeBlock::default(),
            mc: McBlock::default(),
            spot: SpotBlock::default(),
            maturities: vec![0.25, 1.0, 3.0],
            heat_rates: [2.1f64, 2.25, 2.4].iter().map(|x| x.exp()).collect(),
            varrho: Vec::new(),
            legs: vec![LegName::Dark],
            margrabe: MargrabeBlock::default(),
            cointegration: CointegrationBlock::default(),
            plant: PlantBlock::default(),
            simulate: SimulateBlock::default(),
            out: None,
        }
    }
}

fn check(cond: bool, msg: &str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(msg.to_string()))
    }
}

fn finite_positive(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite() && *x > 0.0)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn varrho_list(&self) -> Vec<f64> {
        if self.varrho.is_empty() {
            vec![self.market.varrho]
        } else {
            self.varrho.clone()
        }
    }

    pub fn scenario_with(&self, name: ScenarioName, varrho: f64) -> Result<ScenarioSpec, CliError> {
        let mut spec = ScenarioSpec::preset(name.into(), self.market.params(varrho)?);
        if name == self.scenario {
            if let Some(f) = &self.forwards {
                spec.forward_inputs = Some(f.into());
            }
            if let Some(l) = self.levels {
                spec.level_overrides = Some(LevelOverrides { lambda_c: l.lambda_c, lambda_g: l.lambda_g, s0_c: l.s0_c, s0_g: l.s0_g });
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn scenario_spec(&self, varrho: f64) -> Result<ScenarioSpec, CliError> {
        self.scenario_with(self.scenario, varrho)
    }

    pub fn spike_params(&self) -> Result<Option<SpikeParams>, CliError> {
        if self.spike.enabled {
            Ok(Some(SpikeParams::new(self.spike.m_n, self.spike.m_s)?))
        } else {
            Ok(None)
        }
    }

    pub fn sim_config(&self, paths: usize, seed: u64) -> SimConfig {
        SimConfig { n_paths: paths, n_steps: 1, seed, antithetic: self.mc.antithetic }
    }

    /// Range checks that do not depend on the command.
    pub fn validate(&self) -> Result<(), CliError> {
        for v in self.varrho_list() {
            self.scenario_spec(v)?;
        }
        if let Some(h) = self.margrabe.history {
            self.scenario_with(h, self.market.varrho)?;
        }
        if let Some(h) = self.plant.history {
            self.scenario_with(h, self.market.varrho)?;
        }
        check(self.forwards.is_none() || self.scenario == ScenarioName::II, "forwards apply to scenario II only")?;
        check(self.levels.is_none() || self.scenario == ScenarioName::III, "levels apply to scenario III only")?;
        self.spike_params()?;
        check(self.mc.paths >= 1, "mc.paths must be at least 1")?;
        check(!self.mc.antithetic || self.mc.paths >= 2, "mc.paths must be at least 2 with antithetic sampling")?;
        check(self.spot.demand.is_finite(), "spot.demand must be finite")?;
        check(self.spot.s_c > 0.0 && self.spot.s_g > 0.0, "spot fuel prices must be positive")?;
        check(finite_positive(&self.maturities), "maturities must be positive")?;
        check(finite_positive(&self.heat_rates), "heat_rates must be positive")?;
        check(self.varrho.iter().all(|r| (-1.0..=1.0).contains(r)), "varrho entries must lie in [-1, 1]")?;
        if let Some(r) = self.margrabe.rho_pi {
            check((-1.0..=1.0).contains(&r), "margrabe.rho_pi must lie in [-1, 1]")?;
        }
        check(self.cointegration.paths >= bidstack_core::reference::MIN_COINTEGRATION_PATHS, "cointegration.paths must be at least 10000")?;
        let p = &self.plant;
        check(p.heat_rate.is_finite() && p.heat_rate > 0.0, "plant.heat_rate must be positive")?;
        check(p.capacity_mw.is_finite() && p.capacity_mw > 0.0, "plant.capacity_mw must be positive")?;
        check(p.years.is_finite() && p.years > 0.0 && p.years <= 50.0, "plant.years must lie in (0, 50]")?;
        check(p.cache_hours.is_finite() && p.cache_hours >= 1.0, "plant.cache_hours must be at least 1")?;
        check(p.mu_d.iter().all(|m| m.is_finite()), "plant.mu_d must be finite")?;
        check(p.rate.is_none_or(|r| r.is_finite()), "plant.rate must be finite")?;
        check((-1.0..=1.0).contains(&p.rho_pi), "plant.rho_pi must lie in [-1, 1]")?;
        let s = &self.simulate;
        check(s.paths >= 1 && s.steps >= 1, "simulate needs at least one path and one step")?;
        check(!s.antithetic || s.paths >= 2, "simulate.paths must be at least 2 with antithetic sampling")?;
        check(s.horizon.is_finite() && s.horizon > 0.0, "simulate.horizon must be positive")?;
        check(s.demand_kappa >= 0.0 && s.demand_nu >= 0.0, "simulate demand parameters must be non-negative")?;
        if let Some(season) = s.seasonal {
            check(season.period > 0.0 && season.amplitude.is_finite() && season.phase.is_finite(), "simulate.seasonal is invalid")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_symmetric() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.market.params(0.0).unwrap(), MarketParams::symmetric(0.0));
    }

    #[test]
    fn empty_object_is_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::from_json(r#"{"senario": "I"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"market": {"sigma": 1}}"#).is_err());
    }

    #[test]
    fn physical_ranges_checked() {
        for bad in [
            r#"{"market": {"sigma_d": -0.1}}"#,
            r#"{"varrho": [1.5]}"#,
            r#"{"maturities": [0]}"#,
            r#"{"market": {"coal": {"k": 2, "m": 1, "cap": 0}}}"#,
            r#"{"levels": {"lambda_c": 1, "lambda_g": 1, "s0_c": 1, "s0_g": 1}}"#,
            r#"{"plant": {"capacity_mw": -1}}"#,
        ] {
            assert!(RunConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn scenario_overrides() {
        let cfg = RunConfig::from_json(r#"{"scenario": "II", "forwards": {"table": [[0.5, 9, 11], [2, 8, 12]]}}"#).unwrap();
        let spec = cfg.scenario_spec(0.0).unwrap();
        assert_eq!(spec.forward_inputs.unwrap().at(1.0), (9.0 - 1.0 / 3.0, 11.0 + 1.0 / 3.0));
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }
}

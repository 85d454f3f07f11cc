//! Terminal laws of fuels and demand, exp-OU dynamics and scenario presets.

use alloc::vec::Vec;

use crate::gauss::norm_cdf;
use crate::math::{exp, expm1, ln, sqrt};
use crate::stack::{Fuel, FuelBid, TwoFuelStack};
use crate::{ensure, Error, Result};

/// Joint normal law of (ln S^c_T, ln S^g_T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuelTerminalLaw {
    pub mu_c: f64,
    pub mu_g: f64,
    pub sigma_c: f64,
    pub sigma_g: f64,
    pub rho: f64,
}

impl FuelTerminalLaw {
    pub fn new(mu_c: f64, mu_g: f64, sigma_c: f64, sigma_g: f64, rho: f64) -> Result<Self> {
        let law = Self { mu_c, mu_g, sigma_c, sigma_g, rho };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.mu_c.is_finite() && self.mu_g.is_finite(), "mu", "must be finite")?;
        ensure(self.sigma_c >= 0.0 && self.sigma_c.is_finite(), "sigma_c", "must be non-negative")?;
        ensure(self.sigma_g >= 0.0 && self.sigma_g.is_finite(), "sigma_g", "must be non-negative")?;
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::CorrelationOutOfRange(self.rho));
        }
        Ok(())
    }

    pub fn mu(&self, fuel: Fuel) -> f64 {
        match fuel {
            Fuel::Coal => self.mu_c,
            Fuel::Gas => self.mu_g,
        }
    }

    pub fn sigma(&self, fuel: Fuel) -> f64 {
        match fuel {
            Fuel::Coal => self.sigma_c,
            Fuel::Gas => self.sigma_g,
        }
    }

    pub fn covariance(&self) -> f64 {
        self.rho * self.sigma_c * self.sigma_g
    }

    /// Variance of ln S^g − ln S^c.
    pub fn spread_variance(&self) -> f64 {
        let d = self.sigma_c - self.sigma_g;
        (d * d + 2.0 * (1.0 - self.rho) * self.sigma_c * self.sigma_g).max(0.0)
    }

    pub fn forward(&self, fuel: Fuel) -> f64 {
        let s = self.sigma(fuel);
        exp(self.mu(fuel) + 0.5 * s * s)
    }

    pub fn forwards(&self) -> (f64, f64) {
        (self.forward(Fuel::Coal), self.forward(Fuel::Gas))
    }

    pub fn swapped(&self) -> Self {
        Self { mu_c: self.mu_g, mu_g: self.mu_c, sigma_c: self.sigma_g, sigma_g: self.sigma_c, rho: self.rho }
    }
}

pub fn fuel_forward(law: &FuelTerminalLaw, fuel: Fuel) -> f64 {
    law.forward(fuel)
}

/// Shifts the log mean of one fuel so that its forward equals `observed`.
pub fn calibrate_mean_to_forward(law: &FuelTerminalLaw, fuel: Fuel, observed: f64) -> Result<FuelTerminalLaw> {
    if !(observed > 0.0 && observed.is_finite()) {
        return Err(Error::NonPositiveForward(observed));
    }
    let mut out = *law;
    let s = law.sigma(fuel);
    let mu = ln(observed) - 0.5 * s * s;
    match fuel {
        Fuel::Coal => out.mu_c = mu,
        Fuel::Gas => out.mu_g = mu,
    }
    Ok(out)
}

/// Correlated exp-OU dynamics of the two fuel prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuelDynamics {
    pub kappa_c: f64,
    pub kappa_g: f64,
    pub nu_c: f64,
    pub nu_g: f64,
    pub lambda_c: f64,
    pub lambda_g: f64,
    pub s0_c: f64,
    pub s0_g: f64,
    pub varrho: f64,
}

impl FuelDynamics {
    pub fn validate(&self) -> Result<()> {
        ensure(self.kappa_c > 0.0 && self.kappa_g > 0.0, "kappa", "mean reversion must be positive")?;
        ensure(self.nu_c >= 0.0 && self.nu_g >= 0.0, "nu", "volatility must be non-negative")?;
        ensure(self.lambda_c.is_finite() && self.lambda_g.is_finite(), "lambda", "must be finite")?;
        ensure(self.s0_c > 0.0 && self.s0_g > 0.0, "s0", "spot fuel prices must be positive")?;
        if !(-1.0..=1.0).contains(&self.varrho) {
            return Err(Error::CorrelationOutOfRange(self.varrho));
        }
        Ok(())
    }
}

/// 1 − e^{−x} without cancellation for small x.
fn one_minus_exp_neg(x: f64) -> f64 {
    -expm1(-x)
}

/// Law of the log fuel prices at horizon `t` under the exp-OU dynamics.
pub fn terminal_law_from_dynamics(dynamics: &FuelDynamics, t: f64) -> Result<FuelTerminalLaw> {
    dynamics.validate()?;
    ensure(t > 0.0 && t.is_finite(), "maturity", "must be positive")?;
    let d = dynamics;
    let mean = |kappa: f64, s0: f64, lambda: f64| ln(s0) * exp(-kappa * t) + lambda * one_minus_exp_neg(kappa * t);
    let var = |kappa: f64, nu: f64| nu * nu * one_minus_exp_neg(2.0 * kappa * t) / (2.0 * kappa);
    let (vc, vg) = (var(d.kappa_c, d.nu_c), var(d.kappa_g, d.nu_g));
    let ks = d.kappa_c + d.kappa_g;
    let cov = d.varrho * d.nu_c * d.nu_g * one_minus_exp_neg(ks * t) / ks;
    let (sc, sg) = (sqrt(vc), sqrt(vg));
    let rho = if sc > 0.0 && sg > 0.0 { (cov / (sc * sg)).clamp(-1.0, 1.0) } else { 0.0 };
    FuelTerminalLaw::new(mean(d.kappa_c, d.s0_c, d.lambda_c), mean(d.kappa_g, d.s0_g, d.lambda_g), sc, sg, rho)
}

/// Demand D_T = clamp(X_T, 0, cap) with X_T ~ N(mu_d, sigma_d²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandLaw {
    pub mu_d: f64,
    pub sigma_d: f64,
    pub cap: f64,
}

impl DemandLaw {
    pub fn new(mu_d: f64, sigma_d: f64, cap: f64) -> Result<Self> {
        let d = Self { mu_d, sigma_d, cap };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.mu_d.is_finite(), "mu_d", "must be finite")?;
        ensure(self.sigma_d >= 0.0 && self.sigma_d.is_finite(), "sigma_d", "must be non-negative")?;
        ensure(self.cap > 0.0 && self.cap.is_finite(), "cap", "must be positive")
    }

    pub fn is_deterministic(&self) -> bool {
        self.sigma_d == 0.0
    }

    /// Density of the unbounded driver X_T.
    pub fn driver_density(&self, x: f64) -> f64 {
        let z = (x - self.mu_d) / self.sigma_d;
        crate::gauss::norm_pdf(z) / self.sigma_d
    }

    pub fn standardize(&self, xi: f64) -> f64 {
        (xi - self.mu_d) / self.sigma_d
    }
}

/// Probabilities of D_T = 0 and D_T = cap.
pub fn demand_atoms(d: &DemandLaw) -> (f64, f64) {
    if d.is_deterministic() {
        let p0 = if d.mu_d <= 0.0 { 1.0 } else { 0.0 };
        let pc = if d.mu_d >= d.cap { 1.0 } else { 0.0 };
        return (p0, pc);
    }
    (norm_cdf(-d.mu_d / d.sigma_d), norm_cdf((d.mu_d - d.cap) / d.sigma_d))
}

/// A full parameter block: bid curves, fuel dynamics, demand and rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub stack: TwoFuelStack,
    pub dynamics: FuelDynamics,
    pub mu_d: f64,
    pub sigma_d: f64,
    pub rate: f64,
}

impl MarketParams {
    /// The symmetric reference parameter set, with fuel correlation `varrho`.
    pub fn symmetric(varrho: f64) -> Self {
        let bid = FuelBid { k: 2.0, m: 1.0, cap: 0.5 };
        let l10 = ln(10.0);
        Self {
            stack: TwoFuelStack { coal: bid, gas: bid },
            dynamics: FuelDynamics {
                kappa_c: 1.0,
                kappa_g: 1.0,
                nu_c: 0.5,
                nu_g: 0.5,
                lambda_c: l10,
                lambda_g: l10,
                s0_c: 10.0,
                s0_g: 10.0,
                varrho,
            },
            mu_d: 0.5,
            sigma_d: 0.2,
            rate: 0.0,
        }
    }

    pub fn demand(&self) -> DemandLaw {
        DemandLaw { mu_d: self.mu_d, sigma_d: self.sigma_d, cap: self.stack.capacity() }
    }

    pub fn validate(&self) -> Result<()> {
        self.stack.coal.validate()?;
        self.stack.gas.validate()?;
        self.dynamics.validate()?;
        self.demand().validate()?;
        ensure(self.rate.is_finite(), "rate", "must be finite")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    I,
    II,
    III,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 3] = [ScenarioId::I, ScenarioId::II, ScenarioId::III];

    pub fn label(self) -> &'static str {
        match self {
            ScenarioId::I => "I",
            ScenarioId::II => "II",
            ScenarioId::III => "III",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioId::I => "fuel forwards implied by the exp-OU dynamics",
            ScenarioId::II => "gas in contango, coal in backwardation (0.2 per month from 10)",
            ScenarioId::III => "gas bids above coal: lambda_c = ln 7, s_c = 7, lambda_g = ln 13, s_g = 13",
        }
    }
}

/// Observed fuel forward curves.
#[derive(Debug, Clone, PartialEq)]
pub enum ForwardInputs {
    /// F^i(T) = level_i + step_i · 12T, with steps quoted per month.
    Linear { level_c: f64, level_g: f64, step_c: f64, step_g: f64 },
    /// Rows (T, F^c, F^g) with strictly increasing T, interpolated linearly
    /// and held flat outside the grid.
    Table(Vec<(f64, f64, f64)>),
}

impl ForwardInputs {
    pub fn at(&self, t: f64) -> (f64, f64) {
        match self {
            ForwardInputs::Linear { level_c, level_g, step_c, step_g } => {
                (level_c + step_c * 12.0 * t, level_g + step_g * 12.0 * t)
            }
            ForwardInputs::Table(rows) => {
                let first = rows[0];
                let last = rows[rows.len() - 1];
                if t <= first.0 {
                    return (first.1, first.2);
                }
                if t >= last.0 {
                    return (last.1, last.2);
                }
                let j = rows.partition_point(|r| r.0 <= t);
                let (a, b) = (rows[j - 1], rows[j]);
                let w = (t - a.0) / (b.0 - a.0);
                (a.1 + w * (b.1 - a.1), a.2 + w * (b.2 - a.2))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let ForwardInputs::Table(rows) = self {
            ensure(!rows.is_empty(), "forward_inputs", "table needs at least one row")?;
            ensure(rows.windows(2).all(|w| w[1].0 > w[0].0), "forward_inputs", "maturities must increase")?;
        }
        Ok(())
    }
}

/// Replacement long-run levels and spot prices of the fuels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelOverrides {
    pub lambda_c: f64,
    pub lambda_g: f64,
    pub s0_c: f64,
    pub s0_g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub base: MarketParams,
    pub forward_inputs: Option<ForwardInputs>,
    pub level_overrides: Option<LevelOverrides>,
}

impl ScenarioSpec {
    /// Built-in presets on top of `base`.
    pub fn preset(id: ScenarioId, base: MarketParams) -> Self {
        let (forward_inputs, level_overrides) = match id {
            ScenarioId::I => (None, None),
            ScenarioId::II => (Some(ForwardInputs::Linear { level_c: 10.0, level_g: 10.0, step_c: -0.2, step_g: 0.2 }), None),
            ScenarioId::III => (
                None,
                Some(LevelOverrides { lambda_c: ln(7.0), lambda_g: ln(13.0), s0_c: 7.0, s0_g: 13.0 }),
            ),
        };
        Self { id, base, forward_inputs, level_overrides }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        match self.id {
            ScenarioId::I => ensure(
                self.forward_inputs.is_none() && self.level_overrides.is_none(),
                "scenario",
                "scenario I takes neither forward inputs nor level overrides",
            ),
            ScenarioId::II => {
                let f = self.forward_inputs.as_ref().ok_or(Error::InvalidParameter {
                    name: "scenario",
                    reason: "scenario II needs forward inputs",
                })?;
                f.validate()
            }
            ScenarioId::III => ensure(self.level_overrides.is_some(), "scenario", "scenario III needs level overrides"),
        }
    }

    /// Fuel dynamics after applying level overrides.
    pub fn dynamics(&self) -> FuelDynamics {
        let mut d = self.base.dynamics;
        if let Some(o) = self.level_overrides {
            d.lambda_c = o.lambda_c;
            d.lambda_g = o.lambda_g;
            d.s0_c = o.s0_c;
            d.s0_g = o.s0_g;
        }
        d
    }
}

/// Everything the pricing formulas need at one maturity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalMarket {
    pub law: FuelTerminalLaw,
    pub demand: DemandLaw,
    pub forwards: (f64, f64),
}

pub fn scenario_build(spec: &ScenarioSpec, t: f64) -> Result<TerminalMarket> {
    spec.validate()?;
    let mut law = terminal_law_from_dynamics(&spec.dynamics(), t)?;
    if let (ScenarioId::II, Some(f)) = (spec.id, &spec.forward_inputs) {
        let (fc, fg) = f.at(t);
        law = calibrate_mean_to_forward(&law, Fuel::Coal, fc)?;
        law = calibrate_mean_to_forward(&law, Fuel::Gas, fg)?;
    }
    Ok(TerminalMarket { law, demand: spec.base.demand(), forwards: law.forwards() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn symmetric_mapping() {
        let p = MarketParams::symmetric(0.0);
        let law = terminal_law_from_dynamics(&p.dynamics, 1.0).unwrap();
        assert_relative_eq!(law.mu_c, 10f64.ln(), max_relative = 1e-15);
        let v = 0.25 * (1.0 - (-2.0f64).exp()) / 2.0;
        assert_relative_eq!(law.sigma_c * law.sigma_c, v, max_relative = 1e-14);
        assert!((v - 0.108_083).abs() < 1e-6);
        assert_eq!(law.rho, 0.0);
        let far = terminal_law_from_dynamics(&p.dynamics, 200.0).unwrap();
        assert_relative_eq!(far.sigma_g * far.sigma_g, 0.125, max_relative = 1e-14);
        assert!(terminal_law_from_dynamics(&p.dynamics, 0.0).is_err());
    }

    #[test]
    fn forward_examples() {
        let law = FuelTerminalLaw::new(10f64.ln(), 0.0, 0.108_083f64.sqrt(), 0.0, 0.0).unwrap();
        assert!((fuel_forward(&law, Fuel::Coal) - 10.5553).abs() < 1e-4);
        assert_eq!(fuel_forward(&law, Fuel::Gas), 1.0);
        let cal = calibrate_mean_to_forward(&law, Fuel::Coal, 12.0).unwrap();
        assert_relative_eq!(cal.mu_c, 12f64.ln() - 0.054_041_5, epsilon = 1e-12);
        assert_relative_eq!(fuel_forward(&cal, Fuel::Coal), 12.0, max_relative = 1e-14);
        let same = calibrate_mean_to_forward(&law, Fuel::Coal, fuel_forward(&law, Fuel::Coal)).unwrap();
        assert_relative_eq!(same.mu_c, law.mu_c, max_relative = 1e-14);
        assert!(matches!(calibrate_mean_to_forward(&law, Fuel::Gas, 0.0), Err(Error::NonPositiveForward(_))));
    }

    #[test]
    fn atoms() {
        let (p0, pc) = demand_atoms(&DemandLaw::new(0.5, 0.2, 1.0).unwrap());
        assert_relative_eq!(p0, 0.006_209_665_325_776_132, max_relative = 1e-14);
        assert_eq!(p0, pc);
        assert_eq!(demand_atoms(&DemandLaw::new(0.5, 0.0, 1.0).unwrap()), (0.0, 0.0));
        assert!(demand_atoms(&DemandLaw::new(-50.0, 1.0, 1.0).unwrap()).0 > 1.0 - 1e-15);
    }

    #[test]
    fn scenarios() {
        let base = MarketParams::symmetric(0.0);
        let s1 = scenario_build(&ScenarioSpec::preset(ScenarioId::I, base), 1.0).unwrap();
        assert!((s1.forwards.0 - 10.5553).abs() < 1e-4);
        assert_eq!(s1.forwards.0, s1.forwards.1);
        let law = terminal_law_from_dynamics(&base.dynamics, 1.0).unwrap();
        assert_relative_eq!(s1.forwards.0, fuel_forward(&law, Fuel::Coal), max_relative = 1e-14);

        let s2 = scenario_build(&ScenarioSpec::preset(ScenarioId::II, base), 1.0).unwrap();
        assert_relative_eq!(s2.forwards.0, 7.6, max_relative = 1e-14);
        assert_relative_eq!(s2.forwards.1, 12.4, max_relative = 1e-14);
        assert!(scenario_build(&ScenarioSpec::preset(ScenarioId::II, base), 50.0 / 12.0).is_err());

        let s3 = scenario_build(&ScenarioSpec::preset(ScenarioId::III, base), 300.0).unwrap();
        assert_relative_eq!(s3.forwards.0, 7.0 * 0.0625f64.exp(), max_relative = 1e-13);
        assert_relative_eq!(s3.forwards.1, 13.0 * 0.0625f64.exp(), max_relative = 1e-13);

        let mut bad = ScenarioSpec::preset(ScenarioId::II, base);
        bad.forward_inputs = None;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn forward_table_interpolates() {
        let f = ForwardInputs::Table(alloc::vec![(0.0, 10.0, 10.0), (1.0, 8.0, 12.0)]);
        assert_eq!(f.at(0.5), (9.0, 11.0));
        assert_eq!(f.at(2.0), (8.0, 12.0));
    }

    proptest! {
        #[test]
        fn mapped_correlation_bounded(kc in 0.05..5.0f64, kg in 0.05..5.0f64, nc in 0.01..2.0f64, ng in 0.01..2.0f64,
                                      vr in -1.0..1.0f64, t in 0.01..10.0f64) {
            let mut d = MarketParams::symmetric(vr).dynamics;
            d.kappa_c = kc; d.kappa_g = kg; d.nu_c = nc; d.nu_g = ng;
            let law = terminal_law_from_dynamics(&d, t).unwrap();
            prop_assert!(law.rho.abs() <= vr.abs() + 1e-12);
            let later = terminal_law_from_dynamics(&d, t * 1.5).unwrap();
            prop_assert!(later.sigma_c >= law.sigma_c && later.sigma_g >= law.sigma_g);
        }

        #[test]
        fn atoms_leave_interior_mass(mu in 0.01..0.99f64, sd in 0.01..2.0f64) {
            let (a, b) = demand_atoms(&DemandLaw { mu_d: mu, sigma_d: sd, cap: 1.0 });
            prop_assert!(a + b < 1.0);
        }
    }
}

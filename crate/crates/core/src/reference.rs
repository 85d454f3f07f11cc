//! Reduced-form comparison models: Margrabe, cointegration, OU moment fits
//! and implied correlation.

use alloc::vec::Vec;

use crate::forward::{forward_price_closed, power_variance, PricingInputs};
use crate::gauss::norm_cdf;
use crate::market::{FuelTerminalLaw, ScenarioSpec};
use crate::math::{exp, expm1, ln, sqrt};
use crate::mc::{estimate, terminal_from_normals, Estimate, SimConfig};
use crate::optim::NelderMead;
use crate::spread::{Leg, SpreadSpec};
use crate::stack::{Fuel, TwoFuelStack};
use crate::{ensure, Error, Result};

/// σ_{p,i} = sqrt(σ_p² − 2ρσ_pσ_i + σ_i²).
pub fn margrabe_sigma(sigma_p: f64, sigma_i: f64, rho_pi: f64) -> f64 {
    sqrt((sigma_p * sigma_p - 2.0 * rho_pi * sigma_p * sigma_i + sigma_i * sigma_i).max(0.0))
}

/// e^{−rT}[F_p Φ(d₊) − hF_i Φ(d₋)].
pub fn margrabe_price(f_p: f64, f_i: f64, h: f64, sigma_pi: f64, r: f64, t: f64) -> Result<f64> {
    if !(f_p > 0.0) {
        return Err(Error::NonPositiveForward(f_p));
    }
    if !(f_i > 0.0) {
        return Err(Error::NonPositiveForward(f_i));
    }
    ensure(h > 0.0, "heat_rate", "must be positive")?;
    ensure(sigma_pi >= 0.0, "sigma_pi", "must be non-negative")?;
    let df = exp(-r * t);
    let cost = h * f_i;
    if sigma_pi == 0.0 {
        return Ok(df * (f_p - cost).max(0.0));
    }
    let lm = ln(f_p / cost);
    let d1 = (lm + 0.5 * sigma_pi * sigma_pi) / sigma_pi;
    let d2 = d1 - sigma_pi;
    Ok(df * (f_p * norm_cdf(d1) - cost * norm_cdf(d2)).max(0.0))
}

/// Lognormal terminal power price with its correlations to each fuel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalPowerLaw {
    pub mu_p: f64,
    pub sigma_p: f64,
    pub rho_pc: f64,
    pub rho_pg: f64,
}

impl LognormalPowerLaw {
    pub fn new(mu_p: f64, sigma_p: f64, rho_pc: f64, rho_pg: f64) -> Result<Self> {
        let l = Self { mu_p, sigma_p, rho_pc, rho_pg };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.mu_p.is_finite(), "mu_p", "must be finite")?;
        ensure(self.sigma_p >= 0.0 && self.sigma_p.is_finite(), "sigma_p", "must be non-negative")?;
        for r in [self.rho_pc, self.rho_pg] {
            if !(-1.0..=1.0).contains(&r) {
                return Err(Error::CorrelationOutOfRange(r));
            }
        }
        Ok(())
    }

    /// Exact match of a positive mean and a variance.
    pub fn from_moments(mean: f64, variance: f64, rho_pc: f64, rho_pg: f64) -> Result<Self> {
        if !(mean > 0.0) {
            return Err(Error::NonPositiveForward(mean));
        }
        ensure(variance >= 0.0, "variance", "must be non-negative")?;
        let s2 = crate::math::ln1p(variance / (mean * mean));
        Self::new(ln(mean) - 0.5 * s2, sqrt(s2), rho_pc, rho_pg)
    }

    pub fn forward(&self) -> f64 {
        exp(self.mu_p + 0.5 * self.sigma_p * self.sigma_p)
    }

    pub fn variance(&self) -> f64 {
        let f = self.forward();
        f * f * expm1(self.sigma_p * self.sigma_p)
    }

    pub fn rho(&self, fuel: Fuel) -> f64 {
        match fuel {
            Fuel::Coal => self.rho_pc,
            Fuel::Gas => self.rho_pg,
        }
    }
}

/// Everything Margrabe needs except ρ_{p,i}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MargrabeSetup {
    pub f_p: f64,
    pub f_i: f64,
    pub h: f64,
    pub sigma_p: f64,
    pub sigma_i: f64,
    pub rate: f64,
    pub maturity: f64,
}

impl MargrabeSetup {
    pub fn price(&self, rho_pi: f64) -> Result<f64> {
        let s = margrabe_sigma(self.sigma_p, self.sigma_i, rho_pi);
        margrabe_price(self.f_p, self.f_i, self.h, s, self.rate, self.maturity)
    }

    /// Power law from (mean, variance); fuel leg from `law`.
    pub fn from_moments(mean: f64, variance: f64, law: &FuelTerminalLaw, leg: Leg, h: f64, rate: f64, maturity: f64) -> Result<Self> {
        let p = LognormalPowerLaw::from_moments(mean, variance, 0.0, 0.0)?;
        let fuel = leg.fuel();
        Ok(Self { f_p: p.forward(), f_i: law.forward(fuel), h, sigma_p: p.sigma_p, sigma_i: law.sigma(fuel), rate, maturity })
    }
}

/// Mean and variance of P_T from the base stack (no spike regime).
pub fn stack_power_moments(inputs: &PricingInputs) -> Result<(f64, f64)> {
    let base = inputs.with_spike(None);
    Ok((forward_price_closed(&base)?, power_variance(&base)?))
}

/// Margrabe calibrated to the stack's own mean and variance at T.
pub fn matched_margrabe(inputs: &PricingInputs, leg: Leg, h: f64) -> Result<MargrabeSetup> {
    let (m, v) = stack_power_moments(inputs)?;
    MargrabeSetup::from_moments(m, v, &inputs.law, leg, h, inputs.rate, inputs.maturity)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImpliedCorrelation {
    Exists(f64),
    Nonexistent,
}

impl ImpliedCorrelation {
    pub fn value(self) -> Option<f64> {
        match self {
            ImpliedCorrelation::Exists(r) => Some(r),
            ImpliedCorrelation::Nonexistent => None,
        }
    }
}

pub const CORRELATION_EDGE: f64 = 1.0 - 1e-9;
pub const IMPLIED_PRICE_TOL: f64 = 1e-10;

/// ρ with margrabe(ρ) = stack_value, by bisection.
pub fn implied_correlation(stack_value: f64, setup: &MargrabeSetup) -> Result<ImpliedCorrelation> {
    let (mut lo, mut hi) = (-CORRELATION_EDGE, CORRELATION_EDGE);
    let (p_lo, p_hi) = (setup.price(lo)?, setup.price(hi)?);
    if !(stack_value <= p_lo && stack_value >= p_hi) {
        return Ok(ImpliedCorrelation::Nonexistent);
    }
    if (p_lo - stack_value).abs() <= IMPLIED_PRICE_TOL {
        return Ok(ImpliedCorrelation::Exists(lo));
    }
    if (p_hi - stack_value).abs() <= IMPLIED_PRICE_TOL {
        return Ok(ImpliedCorrelation::Exists(hi));
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let p = setup.price(mid)?;
        if (p - stack_value).abs() <= IMPLIED_PRICE_TOL {
            break;
        }
        if p > stack_value {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    Ok(ImpliedCorrelation::Exists(mid))
}

/// Equal weights (1/2)·exp(k_c + m_c·μ_d·cap_c).
pub fn cointegration_weights(stack: &TwoFuelStack, mu_d: f64) -> (f64, f64) {
    let w = 0.5 * exp(stack.coal.k + stack.coal.m * mu_d * stack.coal.cap);
    (w, w)
}

/// P_T = w_c S^c + w_g S^g + Y with Y ~ N(mu_y, sigma_y²) independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CointegrationSpec {
    pub w_c: f64,
    pub w_g: f64,
    pub mu_y: f64,
    pub sigma_y: f64,
}

impl CointegrationSpec {
    pub fn new(w_c: f64, w_g: f64, mu_y: f64, sigma_y: f64) -> Result<Self> {
        let s = Self { w_c, w_g, mu_y, sigma_y };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.w_c > 0.0 && self.w_g > 0.0, "weights", "must be positive")?;
        ensure(self.mu_y.is_finite(), "mu_y", "must be finite")?;
        ensure(self.sigma_y >= 0.0 && self.sigma_y.is_finite(), "sigma_y", "must be non-negative")
    }

    /// Variance of w_c S^c + w_g S^g.
    pub fn fuel_variance(w_c: f64, w_g: f64, law: &FuelTerminalLaw) -> f64 {
        let (fc, fg) = law.forwards();
        let vc = fc * fc * expm1(law.sigma_c * law.sigma_c);
        let vg = fg * fg * expm1(law.sigma_g * law.sigma_g);
        let cov = fc * fg * expm1(law.covariance());
        w_c * w_c * vc + w_g * w_g * vg + 2.0 * w_c * w_g * cov
    }

    /// Residual fitted to a target mean and variance; a variance the fuels
    /// already exceed leaves σ_y = 0.
    pub fn from_moments(w: (f64, f64), law: &FuelTerminalLaw, mean: f64, variance: f64) -> Result<Self> {
        let (fc, fg) = law.forwards();
        let vy = variance - Self::fuel_variance(w.0, w.1, law);
        Self::new(w.0, w.1, mean - w.0 * fc - w.1 * fg, sqrt(vy.max(0.0)))
    }

    /// Matched to the base stack at the inputs' maturity.
    pub fn matched(inputs: &PricingInputs) -> Result<Self> {
        let (m, v) = stack_power_moments(inputs)?;
        Self::from_moments(cointegration_weights(&inputs.stack, inputs.demand.mu_d), &inputs.law, m, v)
    }

    pub fn mean(&self, law: &FuelTerminalLaw) -> f64 {
        let (fc, fg) = law.forwards();
        self.w_c * fc + self.w_g * fg + self.mu_y
    }

    pub fn variance(&self, law: &FuelTerminalLaw) -> f64 {
        Self::fuel_variance(self.w_c, self.w_g, law) + self.sigma_y * self.sigma_y
    }
}

pub const MIN_COINTEGRATION_PATHS: usize = 10_000;

/// Discounted spread payoff under the cointegration model.
pub fn cointegration_kernel(spec: CointegrationSpec, law: FuelTerminalLaw, spread: SpreadSpec, rate: f64) -> impl Fn(&[f64; 3]) -> f64 + Sync {
    let df = exp(-rate * spread.maturity);
    let unit = crate::market::DemandLaw { mu_d: 0.0, sigma_d: 1.0, cap: 1.0 };
    move |z| {
        let s = terminal_from_normals(&law, &unit, z);
        let p = spec.w_c * s.s_c + spec.w_g * s.s_g + spec.mu_y + spec.sigma_y * s.x;
        let fuel = match spread.leg {
            Leg::Dark => s.s_c,
            Leg::Spark => s.s_g,
        };
        df * (p - spread.heat_rate * fuel).max(0.0)
    }
}

pub fn cointegration_spread_mc(spec: &CointegrationSpec, law: &FuelTerminalLaw, spread: &SpreadSpec, rate: f64, paths: usize, seed: u64) -> Result<Estimate> {
    ensure(paths >= MIN_COINTEGRATION_PATHS, "paths", "need at least 10^4 paths")?;
    spec.validate()?;
    law.validate()?;
    ensure(spread.heat_rate > 0.0, "heat_rate", "must be positive")?;
    estimate(&SimConfig::new(paths, seed), &cointegration_kernel(*spec, *law, *spread, rate))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchPolicy {
    pub match_mean: bool,
    pub match_variance: bool,
}

impl MatchPolicy {
    pub const FULL: MatchPolicy = MatchPolicy { match_mean: true, match_variance: true };
    pub const MEAN_ONLY: MatchPolicy = MatchPolicy { match_mean: true, match_variance: false };
    pub const NONE: MatchPolicy = MatchPolicy { match_mean: false, match_variance: false };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentTarget {
    pub maturity: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Ten log-spaced maturities on [0.5, 3]. Demand noise keeps the stack
/// variance away from zero at short maturities, where a started OU cannot follow.
pub fn default_fit_grid() -> Vec<f64> {
    (0..10).map(|i| 0.5 * exp(ln(6.0) * i as f64 / 9.0)).collect()
}

/// Stack mean and variance of P_T over a maturity grid.
pub fn stack_moment_targets(spec: &ScenarioSpec, maturities: &[f64]) -> Result<Vec<MomentTarget>> {
    maturities
        .iter()
        .map(|&t| {
            let inp = PricingInputs::from_scenario(spec, t)?;
            let (mean, variance) = stack_power_moments(&inp)?;
            Ok(MomentTarget { maturity: t, mean, variance })
        })
        .collect()
}

/// Which process the fit describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuKind {
    /// exp-OU: log P_t is OU, moments are lognormal.
    LogPrice,
    /// Gaussian OU level (the cointegration residual).
    Level,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuFit {
    pub kind: OuKind,
    pub kappa: f64,
    pub lambda: f64,
    pub nu: f64,
    pub p0: f64,
    /// Final relative squared-error loss.
    pub residual: f64,
}

impl OuFit {
    pub fn state_mean(&self, t: f64) -> f64 {
        self.p0 * exp(-self.kappa * t) - self.lambda * expm1(-self.kappa * t)
    }

    pub fn state_variance(&self, t: f64) -> f64 {
        crate::mc::ou_transition(self.kappa, self.nu, t).1
    }

    pub fn mean(&self, t: f64) -> f64 {
        match self.kind {
            OuKind::LogPrice => exp(self.state_mean(t) + 0.5 * self.state_variance(t)),
            OuKind::Level => self.state_mean(t),
        }
    }

    pub fn variance(&self, t: f64) -> f64 {
        match self.kind {
            OuKind::LogPrice => {
                let m = self.mean(t);
                m * m * expm1(self.state_variance(t))
            }
            OuKind::Level => self.state_variance(t),
        }
    }

    /// Largest relative error of (mean, variance) against `targets`.
    pub fn max_relative_error(&self, targets: &[MomentTarget]) -> (f64, f64) {
        targets.iter().fold((0.0f64, 0.0f64), |(em, ev), t| {
            (em.max((self.mean(t.maturity) / t.mean - 1.0).abs()), ev.max((self.variance(t.maturity) / t.variance - 1.0).abs()))
        })
    }
}

/// Targets after applying `policy`: unmatched quantities come from `reference`.
pub fn effective_targets(targets: &[MomentTarget], reference: &[MomentTarget], policy: MatchPolicy) -> Result<Vec<MomentTarget>> {
    if policy.match_mean && policy.match_variance {
        return Ok(targets.to_vec());
    }
    ensure(reference.len() == targets.len(), "reference", "must cover the same maturities as the targets")?;
    targets
        .iter()
        .zip(reference)
        .map(|(t, r)| {
            ensure((t.maturity - r.maturity).abs() <= 1e-12, "reference", "maturities must coincide")?;
            Ok(MomentTarget {
                maturity: t.maturity,
                mean: if policy.match_mean { t.mean } else { r.mean },
                variance: if policy.match_variance { t.variance } else { r.variance },
            })
        })
        .collect()
}

/// Least-squares OU fit of relative mean and variance errors.
pub fn moment_match_ou(targets: &[MomentTarget], reference: &[MomentTarget], policy: MatchPolicy, kind: OuKind) -> Result<OuFit> {
    ensure(targets.len() >= 2, "maturities", "need at least two maturities")?;
    let eff = effective_targets(targets, reference, policy)?;
    for t in &eff {
        ensure(t.maturity > 0.0 && t.maturity.is_finite(), "maturity", "must be positive")?;
        ensure(t.variance >= 0.0 && t.variance.is_finite(), "variance", "must be non-negative")?;
        if kind == OuKind::LogPrice && !(t.mean > 0.0) {
            return Err(Error::NonPositiveForward(t.mean));
        }
    }
    if eff.iter().all(|t| t.variance == 0.0) {
        return Err(Error::DegenerateTargets("every target variance is zero"));
    }
    let scale_m = eff.iter().map(|t| t.mean.abs()).fold(0.0, f64::max).max(1e-300);
    let scale_v = eff.iter().map(|t| t.variance).fold(0.0, f64::max);

    // Start from the state moments implied at the shortest and longest maturities.
    let state = |t: &MomentTarget| match kind {
        OuKind::LogPrice => {
            let s2 = crate::math::ln1p(t.variance / (t.mean * t.mean));
            (ln(t.mean) - 0.5 * s2, s2)
        }
        OuKind::Level => (t.mean, t.variance),
    };
    let mut sorted = eff.clone();
    sorted.sort_by(|a, b| a.maturity.total_cmp(&b.maturity));
    let (m_first, _) = state(&sorted[0]);
    let (m_last, v_last) = state(&sorted[sorted.len() - 1]);
    let start = [0.0, m_last, 0.5 * ln(2.0 * v_last.max(1e-12)), m_first];

    let build = |x: &[f64]| OuFit { kind, kappa: exp(x[0]), lambda: x[1], nu: exp(x[2]), p0: x[3], residual: 0.0 };
    let loss = |x: &[f64]| {
        let f = build(x);
        eff.iter()
            .map(|t| {
                let dm = (f.mean(t.maturity) - t.mean) / t.mean.abs().max(1e-9 * scale_m);
                let dv = (f.variance(t.maturity) - t.variance) / t.variance.max(1e-9 * scale_v);
                dm * dm + dv * dv
            })
            .sum::<f64>()
    };
    let nm = NelderMead { max_evals: 40_000, restarts: 8, ..NelderMead::default() };
    let best = nm.minimize(loss, &start);
    Ok(OuFit { residual: best.value, ..build(&best.x) })
}

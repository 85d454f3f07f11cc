//! Power forward prices and moments of the spot price at maturity.

use alloc::vec;
use alloc::vec::Vec;

use crate::expectation::{demand_grid, eval_piece, integrate_piece, price_pieces, LogPair};
use crate::gauss::norm_cdf;
use crate::market::{demand_atoms, scenario_build, DemandLaw, FuelTerminalLaw, ScenarioSpec};
use crate::math::exp;
use crate::quad::{integrate, Tolerance};
use crate::stack::{SpikeParams, TwoFuelStack};
use crate::{ensure, Error, Result};

/// Model inputs at a single maturity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingInputs {
    pub stack: TwoFuelStack,
    pub law: FuelTerminalLaw,
    pub demand: DemandLaw,
    pub rate: f64,
    pub maturity: f64,
    pub spike: Option<SpikeParams>,
}

impl PricingInputs {
    pub fn new(stack: TwoFuelStack, law: FuelTerminalLaw, demand: DemandLaw, rate: f64, maturity: f64) -> Result<Self> {
        let p = Self { stack, law, demand, rate, maturity, spike: None };
        p.validate()?;
        Ok(p)
    }

    pub fn from_scenario(spec: &ScenarioSpec, maturity: f64) -> Result<Self> {
        let tm = scenario_build(spec, maturity)?;
        Self::new(spec.base.stack, tm.law, tm.demand, spec.base.rate, maturity)
    }

    pub fn with_spike(mut self, spike: Option<SpikeParams>) -> Self {
        self.spike = spike;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.stack.coal.validate()?;
        self.stack.gas.validate()?;
        self.law.validate()?;
        self.demand.validate()?;
        let cap = self.stack.capacity();
        ensure(
            (self.demand.cap - cap).abs() <= 1e-12 * cap,
            "demand.cap",
            "must equal the total stack capacity",
        )?;
        ensure(self.rate.is_finite(), "rate", "must be finite")?;
        ensure(self.maturity > 0.0 && self.maturity.is_finite(), "maturity", "must be positive")
    }

    /// Fuel forwards (F^c, F^g) implied by the terminal law.
    pub fn forwards(&self) -> (f64, f64) {
        self.law.forwards()
    }

    pub fn discount(&self) -> f64 {
        exp(-self.rate * self.maturity)
    }

    /// Inputs with coal and gas exchanged.
    pub fn swapped(&self) -> Self {
        Self { stack: self.stack.swapped(), law: self.law.swapped(), ..*self }
    }
}

/// Demand intervals split at the smaller and larger fuel capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardRegion {
    Low,
    Mid,
    High,
}

impl ForwardRegion {
    pub fn bounds(self, stack: &TwoFuelStack) -> (f64, f64) {
        let lo = stack.coal.cap.min(stack.gas.cap);
        let hi = stack.coal.cap.max(stack.gas.cap);
        match self {
            ForwardRegion::Low => (0.0, lo),
            ForwardRegion::Mid => (lo, hi),
            ForwardRegion::High => (hi, stack.capacity()),
        }
    }

    fn name(self) -> &'static str {
        match self {
            ForwardRegion::Low => "low",
            ForwardRegion::Mid => "mid",
            ForwardRegion::High => "high",
        }
    }

    fn contains(self, stack: &TwoFuelStack, xi: f64) -> bool {
        let (a, b) = self.bounds(stack);
        match self {
            ForwardRegion::Low => (a..=b).contains(&xi),
            _ => xi > a && xi <= b,
        }
    }
}

/// E[P_T^n | D_T = ξ].
pub(crate) fn conditional_moment(inputs: &PricingInputs, xi: f64, n: f64) -> f64 {
    let pair = LogPair::new(&inputs.law);
    price_pieces(&inputs.stack, xi, n).iter().map(|p| eval_piece(p, &pair, xi)).sum()
}

/// E[P_T | D_T = ξ] for ξ in the given region.
pub fn forward_integrand(region: ForwardRegion, xi: f64, inputs: &PricingInputs) -> Result<f64> {
    if !region.contains(&inputs.stack, xi) {
        let (lower, upper) = region.bounds(&inputs.stack);
        return Err(Error::OutsideRegion { region: region.name(), demand: xi, lower, upper });
    }
    Ok(conditional_moment(inputs, xi, 1.0))
}

/// A demand law on [0, cap]: a density on the interior plus endpoint atoms.
pub trait DemandDensity {
    fn cap(&self) -> f64;
    fn density(&self, xi: f64) -> f64;
    fn atoms(&self) -> (f64, f64);
    /// Points where the density is not smooth or is sharply peaked.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
    /// Some(ξ) when all mass sits at ξ.
    fn point_mass(&self) -> Option<f64> {
        None
    }
    /// Driver law, needed for the spike and negative-price regimes.
    fn driver(&self) -> Option<&DemandLaw> {
        None
    }
}

impl DemandDensity for DemandLaw {
    fn cap(&self) -> f64 {
        self.cap
    }
    fn density(&self, xi: f64) -> f64 {
        self.driver_density(xi)
    }
    fn atoms(&self) -> (f64, f64) {
        demand_atoms(self)
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![self.mu_d, self.mu_d - 3.0 * self.sigma_d, self.mu_d + 3.0 * self.sigma_d]
    }
    fn point_mass(&self) -> Option<f64> {
        self.is_deterministic().then(|| self.mu_d.clamp(0.0, self.cap))
    }
    fn driver(&self) -> Option<&DemandLaw> {
        Some(self)
    }
}

pub(crate) const QUAD_TOL: Tolerance = Tolerance { abs: 1e-14, rel: 1e-12 };

/// ∫ g(ξ) φ_d(ξ) dξ over (0, cap) plus the atom contributions, checking
/// that the density and atoms carry unit mass.
pub(crate) fn demand_expectation<G: FnMut(f64) -> f64>(
    density: &dyn DemandDensity,
    breaks: &[f64],
    mut g: G,
) -> Result<f64> {
    if let Some(x) = density.point_mass() {
        return Ok(g(x));
    }
    let cap = density.cap();
    let mut cuts = density.breakpoints();
    cuts.extend_from_slice(breaks);
    let (p0, pc) = density.atoms();
    let mass = integrate(|x| density.density(x), 0.0, cap, &cuts, QUAD_TOL)? + p0 + pc;
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::DensityNotNormalised(mass));
    }
    let interior = integrate(|x| g(x) * density.density(x), 0.0, cap, &cuts, QUAD_TOL)?;
    let mut total = interior;
    if p0 > 0.0 {
        total += p0 * g(0.0);
    }
    if pc > 0.0 {
        total += pc * g(cap);
    }
    Ok(total)
}

/// Expected spike premium and negative-price discount of the driver,
/// integrated numerically over its tails.
pub(crate) fn spike_tails_quadrature(d: &DemandLaw, spike: &SpikeParams) -> Result<f64> {
    if d.is_deterministic() {
        return Ok(spike_forward_correction(d, spike));
    }
    let sd = d.sigma_d;
    let hi = (d.mu_d + spike.m_s * sd * sd).max(d.cap) + 40.0 * sd;
    let lo = (d.mu_d - spike.m_n * sd * sd).min(0.0) - 40.0 * sd;
    let up = integrate(
        |x| crate::math::expm1(spike.m_s * (x - d.cap)) * d.driver_density(x),
        d.cap,
        hi,
        &[d.mu_d + spike.m_s * sd * sd, d.mu_d],
        QUAD_TOL,
    )?;
    let down = integrate(
        |x| crate::math::expm1(-spike.m_n * x) * d.driver_density(x),
        lo,
        0.0,
        &[d.mu_d - spike.m_n * sd * sd, d.mu_d],
        QUAD_TOL,
    )?;
    Ok(up - down)
}

/// Forward price by numerical integration of the conditional price over
/// an arbitrary demand law.
pub fn forward_price_quadrature(inputs: &PricingInputs, density: &dyn DemandDensity) -> Result<f64> {
    inputs.validate()?;
    ensure(
        (density.cap() - inputs.stack.capacity()).abs() <= 1e-12,
        "density",
        "support must match the stack capacity",
    )?;
    let breaks = [inputs.stack.coal.cap, inputs.stack.gas.cap];
    let mut value = demand_expectation(density, &breaks, |x| conditional_moment(inputs, x, 1.0))?;
    if let Some(sp) = &inputs.spike {
        let d = density.driver().ok_or(Error::InvalidParameter {
            name: "density",
            reason: "spike regimes need the unbounded demand driver",
        })?;
        value += spike_tails_quadrature(d, sp)?;
    }
    Ok(value)
}

/// E[P_T^n] for truncated Gaussian demand, in closed form.
fn closed_moment(inputs: &PricingInputs, n: f64) -> f64 {
    let d = &inputs.demand;
    if d.is_deterministic() {
        return conditional_moment(inputs, d.mu_d.clamp(0.0, d.cap), n);
    }
    let pair = LogPair::new(&inputs.law);
    let (p0, pc) = demand_atoms(d);
    let mut total = p0 * conditional_moment(inputs, 0.0, n) + pc * conditional_moment(inputs, d.cap, n);
    let grid = demand_grid(d.cap, &[inputs.stack.coal.cap, inputs.stack.gas.cap]);
    for w in grid.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        for p in price_pieces(&inputs.stack, mid, n) {
            total += integrate_piece(&p, &pair, d, w[0], w[1]);
        }
    }
    total
}

/// Forward price for lognormal fuels and truncated Gaussian demand.
pub fn forward_price_closed(inputs: &PricingInputs) -> Result<f64> {
    inputs.validate()?;
    let mut value = closed_moment(inputs, 1.0);
    if let Some(sp) = &inputs.spike {
        value += spike_forward_correction(&inputs.demand, sp);
    }
    Ok(value)
}

/// Extra expected price from the spike and negative-price regimes.
pub fn spike_forward_correction(d: &DemandLaw, spike: &SpikeParams) -> f64 {
    spike_premium(d, spike) - negative_discount(d, spike)
}

/// E[(exp(m_s(X − cap)) − 1)·1{X > cap}].
pub(crate) fn spike_premium(d: &DemandLaw, spike: &SpikeParams) -> f64 {
    let (mu, sd, ms) = (d.mu_d, d.sigma_d, spike.m_s);
    if d.is_deterministic() {
        return if mu > d.cap { crate::math::expm1(ms * (mu - d.cap)) } else { 0.0 };
    }
    let z = (mu - d.cap) / sd;
    exp(ms * (mu - d.cap) + 0.5 * ms * ms * sd * sd) * norm_cdf(z + ms * sd) - norm_cdf(z)
}

/// E[(exp(−m_n X) − 1)·1{X < 0}].
pub(crate) fn negative_discount(d: &DemandLaw, spike: &SpikeParams) -> f64 {
    let (mu, sd, mn) = (d.mu_d, d.sigma_d, spike.m_n);
    if d.is_deterministic() {
        return if mu < 0.0 { crate::math::expm1(-mn * mu) } else { 0.0 };
    }
    exp(-mn * mu + 0.5 * mn * mn * sd * sd) * norm_cdf(mn * sd - mu / sd) - norm_cdf(-mu / sd)
}

/// E[P_T^n] of the base stack (the spike extension is not included).
pub fn power_moment(n: u32, inputs: &PricingInputs) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter { name: "n", reason: "moment order must be at least 1" });
    }
    inputs.validate()?;
    Ok(closed_moment(inputs, n as f64))
}

/// Var[P_T] of the base stack.
pub fn power_variance(inputs: &PricingInputs) -> Result<f64> {
    let m1 = power_moment(1, inputs)?;
    let m2 = power_moment(2, inputs)?;
    Ok((m2 - m1 * m1).max(0.0))
}

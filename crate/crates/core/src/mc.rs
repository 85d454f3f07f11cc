//! Monte Carlo oracle: terminal sampling, chunked estimators and spot paths.
//!
//! Samples are split into fixed-size chunks. Chunk `i` draws from ChaCha12
//! seeded with the master seed on stream `i`, and chunk statistics are
//! merged in a fixed pairwise tree, so the result does not depend on how
//! chunks are scheduled.

use alloc::vec::Vec;
use core::ops::Range;

use rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::forward::PricingInputs;
use crate::gauss::norm_quantile;
use crate::market::{DemandLaw, FuelDynamics, FuelTerminalLaw};
use crate::math::{exp, expm1, sqrt};
use crate::spread::{Leg, SpreadSpec};
use crate::stack::{SpikeParams, TwoFuelStack};
use crate::{ensure, Result};

/// Samples per chunk (antithetic pairs count once).
pub const CHUNK_SIZE: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self { n_paths, n_steps: 1, seed, antithetic: true }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n_paths >= 1, "n_paths", "must be positive")?;
        ensure(!self.antithetic || self.n_paths >= 2, "n_paths", "antithetic sampling needs at least 2 paths")?;
        ensure(self.n_steps >= 1, "n_steps", "must be positive")
    }

    /// Independent samples: antithetic pairs are averaged into one.
    pub fn samples(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }

    pub fn chunks(&self) -> usize {
        self.samples().div_ceil(CHUNK_SIZE)
    }

    pub fn chunk_range(&self, chunk: usize) -> Range<usize> {
        let start = chunk * CHUNK_SIZE;
        start.min(self.samples())..(start + CHUNK_SIZE).min(self.samples())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_effective: u64,
}

impl Estimate {
    /// |value − x| in standard errors (infinite if SE is 0 and they differ).
    pub fn z_score(&self, x: f64) -> f64 {
        let d = (self.value - x).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, x: f64, k: f64) -> bool {
        self.z_score(x) <= k
    }
}

/// Running mean and centred sum of squares.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(a: Moments, b: Moments) -> Moments {
        if a.n == 0 {
            return b;
        }
        if b.n == 0 {
            return a;
        }
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        let wb = b.n as f64 / n as f64;
        Moments { n, mean: a.mean + d * wb, m2: a.m2 + b.m2 + d * d * a.n as f64 * wb }
    }

    pub fn estimate(&self) -> Estimate {
        let n = self.n as f64;
        let var = if self.n > 1 { self.m2 / (n - 1.0) } else { 0.0 };
        Estimate { value: self.mean, std_error: sqrt(var.max(0.0) / n), n_effective: self.n }
    }
}

/// Fixed-shape pairwise merge.
pub fn reduce(parts: &[Moments]) -> Moments {
    match parts.len() {
        0 => Moments::default(),
        1 => parts[0],
        n => Moments::merge(reduce(&parts[..n / 2]), reduce(&parts[n / 2..])),
    }
}

/// Standard normals by inversion of ChaCha12 uniforms.
pub struct Normals {
    rng: ChaCha12Rng,
}

impl Normals {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next(&mut self) -> f64 {
        norm_quantile(self.uniform())
    }

    pub fn fill<const D: usize>(&mut self) -> [f64; D] {
        core::array::from_fn(|_| self.next())
    }
}

/// Statistics of one chunk for a functional of D standard normals.
pub fn run_chunk<const D: usize, F: Fn(&[f64; D]) -> f64>(cfg: &SimConfig, chunk: usize, f: &F) -> Moments {
    let mut normals = Normals::new(cfg.seed, chunk as u64);
    let mut acc = Moments::default();
    for _ in cfg.chunk_range(chunk) {
        let z = normals.fill::<D>();
        let v = if cfg.antithetic { 0.5 * (f(&z) + f(&z.map(|x| -x))) } else { f(&z) };
        acc.push(v);
    }
    acc
}

/// Serial estimator; parallel drivers map `run_chunk` and `reduce` the same way.
pub fn estimate<const D: usize, F: Fn(&[f64; D]) -> f64>(cfg: &SimConfig, f: &F) -> Result<Estimate> {
    cfg.validate()?;
    let parts: Vec<Moments> = (0..cfg.chunks()).map(|c| run_chunk(cfg, c, f)).collect();
    Ok(reduce(&parts).estimate())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalSample {
    pub s_c: f64,
    pub s_g: f64,
    pub x: f64,
    pub d: f64,
}

/// Maps (z_c, z_g, z_d) to fuels, demand driver and clamped demand.
pub fn terminal_from_normals(law: &FuelTerminalLaw, demand: &DemandLaw, z: &[f64; 3]) -> TerminalSample {
    let r = law.rho;
    let lc = law.mu_c + law.sigma_c * z[0];
    let lg = law.mu_g + law.sigma_g * (r * z[0] + sqrt((1.0 - r * r).max(0.0)) * z[1]);
    let x = demand.mu_d + demand.sigma_d * z[2];
    TerminalSample { s_c: exp(lc), s_g: exp(lg), x, d: x.clamp(0.0, demand.cap) }
}

/// Raw samples in chunk order; antithetic partners are adjacent.
pub fn sample_terminal(law: &FuelTerminalLaw, demand: &DemandLaw, cfg: &SimConfig) -> Result<Vec<TerminalSample>> {
    law.validate()?;
    demand.validate()?;
    cfg.validate()?;
    let per = if cfg.antithetic { 2 } else { 1 };
    let mut out = Vec::with_capacity(cfg.samples() * per);
    for chunk in 0..cfg.chunks() {
        let mut normals = Normals::new(cfg.seed, chunk as u64);
        for _ in cfg.chunk_range(chunk) {
            let z = normals.fill::<3>();
            out.push(terminal_from_normals(law, demand, &z));
            if cfg.antithetic {
                out.push(terminal_from_normals(law, demand, &z.map(|x| -x)));
            }
        }
    }
    Ok(out)
}

fn spot(inputs: &PricingInputs, s: &TerminalSample) -> f64 {
    match &inputs.spike {
        Some(sp) => inputs.stack.extended_unchecked(s.x, s.s_c, s.s_g, sp).0,
        None => inputs.stack.price_unchecked(s.d, s.s_c, s.s_g),
    }
}

/// P_T as a functional of three standard normals.
pub fn forward_kernel(inputs: PricingInputs) -> impl Fn(&[f64; 3]) -> f64 + Sync {
    move |z| spot(&inputs, &terminal_from_normals(&inputs.law, &inputs.demand, z))
}

/// Discounted spread payoff.
pub fn spread_kernel(inputs: PricingInputs, spec: SpreadSpec) -> impl Fn(&[f64; 3]) -> f64 + Sync {
    let df = inputs.discount();
    move |z| {
        let s = terminal_from_normals(&inputs.law, &inputs.demand, z);
        let fuel = match spec.leg {
            Leg::Dark => s.s_c,
            Leg::Spark => s.s_g,
        };
        df * (spot(&inputs, &s) - spec.heat_rate * fuel).max(0.0)
    }
}

/// P_T^n of the base stack.
pub fn moment_kernel(n: i32, inputs: PricingInputs) -> impl Fn(&[f64; 3]) -> f64 + Sync {
    move |z| {
        let s = terminal_from_normals(&inputs.law, &inputs.demand, z);
        crate::math::powi(inputs.stack.price_unchecked(s.d, s.s_c, s.s_g), n)
    }
}

pub fn mc_forward(inputs: &PricingInputs, cfg: &SimConfig) -> Result<Estimate> {
    inputs.validate()?;
    estimate(cfg, &forward_kernel(*inputs))
}

pub fn mc_spread(inputs: &PricingInputs, spec: &SpreadSpec, cfg: &SimConfig) -> Result<Estimate> {
    inputs.validate()?;
    estimate(cfg, &spread_kernel(*inputs, *spec))
}

pub fn mc_moment(n: i32, inputs: &PricingInputs, cfg: &SimConfig) -> Result<Estimate> {
    ensure(n >= 1, "n", "moment order must be at least 1")?;
    inputs.validate()?;
    estimate(cfg, &moment_kernel(n, *inputs))
}

/// Exact OU step: returns (e^{−κΔ}, conditional variance).
pub fn ou_transition(kappa: f64, nu: f64, dt: f64) -> (f64, f64) {
    let decay = exp(-kappa * dt);
    let var = if kappa * dt > 1e-12 { -nu * nu * expm1(-2.0 * kappa * dt) / (2.0 * kappa) } else { nu * nu * dt };
    (decay, var)
}

/// Conditional covariance of two OU increments over Δ.
pub fn ou_cross_covariance(kappa_1: f64, kappa_2: f64, nu_1: f64, nu_2: f64, corr: f64, dt: f64) -> f64 {
    let ks = kappa_1 + kappa_2;
    let scale = if ks * dt > 1e-12 { -expm1(-ks * dt) / ks } else { dt };
    corr * nu_1 * nu_2 * scale
}

/// Demand driver X_t = season(t) + Y_t with Y an OU process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandOu {
    pub kappa: f64,
    pub level: f64,
    pub nu: f64,
    pub x0: f64,
    pub cap: f64,
}

impl DemandOu {
    pub fn validate(&self) -> Result<()> {
        ensure(self.kappa >= 0.0 && self.kappa.is_finite(), "kappa_d", "must be non-negative")?;
        ensure(self.nu >= 0.0 && self.nu.is_finite(), "nu_d", "must be non-negative")?;
        ensure(self.level.is_finite() && self.x0.is_finite(), "demand level", "must be finite")?;
        ensure(self.cap > 0.0, "cap", "must be positive")
    }
}

pub struct PathSpec<'a> {
    pub stack: TwoFuelStack,
    pub dynamics: FuelDynamics,
    pub demand: DemandOu,
    pub seasonal: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
    pub spike: Option<SpikeParams>,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub t: f64,
    pub s_c: f64,
    pub s_g: f64,
    pub x: f64,
    pub d: f64,
    pub p: f64,
}

impl PathSpec<'_> {
    pub fn validate(&self, cfg: &SimConfig) -> Result<()> {
        cfg.validate()?;
        self.dynamics.validate()?;
        self.demand.validate()?;
        ensure(self.horizon > 0.0 && self.horizon.is_finite(), "horizon", "must be positive")?;
        ensure(
            (self.demand.cap - self.stack.capacity()).abs() <= 1e-12,
            "cap",
            "demand cap must equal stack capacity",
        )
    }

    fn season(&self, t: f64) -> f64 {
        self.seasonal.map_or(0.0, |s| s(t))
    }

    fn point(&self, t: f64, lc: f64, lg: f64, y: f64) -> PathPoint {
        let x = self.season(t) + y;
        let (s_c, s_g) = (exp(lc), exp(lg));
        let d = x.clamp(0.0, self.demand.cap);
        let p = match &self.spike {
            Some(sp) => self.stack.extended_unchecked(x, s_c, s_g, sp).0,
            None => self.stack.price_unchecked(d, s_c, s_g),
        };
        PathPoint { t, s_c, s_g, x, d, p }
    }
}

/// One path; path 2k+1 mirrors path 2k when antithetic.
pub fn simulate_path(spec: &PathSpec, cfg: &SimConfig, index: usize) -> Vec<PathPoint> {
    let dy = &spec.dynamics;
    let n = cfg.n_steps;
    let dt = spec.horizon / n as f64;
    let (dc, vc) = ou_transition(dy.kappa_c, dy.nu_c, dt);
    let (dg, vg) = ou_transition(dy.kappa_g, dy.nu_g, dt);
    let (dd, vd) = ou_transition(spec.demand.kappa, spec.demand.nu, dt);
    let cov = ou_cross_covariance(dy.kappa_c, dy.kappa_g, dy.nu_c, dy.nu_g, dy.varrho, dt);
    let (sc, sd) = (sqrt(vc), sqrt(vd));
    let l21 = if sc > 0.0 { cov / sc } else { 0.0 };
    let l22 = sqrt((vg - l21 * l21).max(0.0));

    let (stream, sign) = if cfg.antithetic { ((index / 2) as u64, if index % 2 == 1 { -1.0 } else { 1.0 }) } else { (index as u64, 1.0) };
    let mut normals = Normals::new(cfg.seed, stream);
    let (mut lc, mut lg) = (crate::math::ln(dy.s0_c), crate::math::ln(dy.s0_g));
    let mut y = spec.demand.x0 - spec.season(0.0);
    let mut out = Vec::with_capacity(n + 1);
    out.push(spec.point(0.0, lc, lg, y));
    for step in 1..=n {
        let z = normals.fill::<3>().map(|v| sign * v);
        lc = dy.lambda_c + (lc - dy.lambda_c) * dc + sc * z[0];
        lg = dy.lambda_g + (lg - dy.lambda_g) * dg + l21 * z[0] + l22 * z[1];
        y = spec.demand.level + (y - spec.demand.level) * dd + sd * z[2];
        out.push(spec.point(step as f64 * dt, lc, lg, y));
    }
    out
}

pub fn simulate_spot_paths(spec: &PathSpec, cfg: &SimConfig) -> Result<Vec<Vec<PathPoint>>> {
    spec.validate(cfg)?;
    Ok((0..cfg.n_paths).map(|i| simulate_path(spec, cfg, i)).collect())
}

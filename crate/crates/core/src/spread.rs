//! Zero-strike dark and spark spread options on spot power.

use alloc::vec::Vec;

use crate::expectation::{demand_grid, eval_piece, integrate_piece, price_pieces, Affine, LogPair, Piece};
use crate::forward::{demand_expectation, spike_premium, DemandDensity, PricingInputs, QUAD_TOL};
use crate::market::{demand_atoms, DemandLaw};
use crate::math::{exp, expm1, ln};
use crate::quad::integrate;
use crate::stack::{Fuel, FuelBid, TwoFuelStack};
use crate::{ensure, Error, Result};

/// Fuel whose cost is subtracted in the payoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Leg {
    /// (P − h·S^c)^+
    Dark,
    /// (P − h·S^g)^+
    Spark,
}

impl Leg {
    pub fn fuel(self) -> Fuel {
        match self {
            Leg::Dark => Fuel::Coal,
            Leg::Spark => Fuel::Gas,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Leg::Dark => "dark",
            Leg::Spark => "spark",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadSpec {
    pub leg: Leg,
    pub heat_rate: f64,
    pub maturity: f64,
}

impl SpreadSpec {
    pub fn new(leg: Leg, heat_rate: f64, maturity: f64) -> Self {
        Self { leg, heat_rate, maturity }
    }

    fn check(&self, inputs: &PricingInputs) -> Result<()> {
        ensure(
            (self.maturity - inputs.maturity).abs() <= 1e-12 * inputs.maturity.max(1.0),
            "maturity",
            "spread maturity must match the pricing inputs",
        )?;
        heat_rate_quantity(self.heat_rate, inputs.stack.bid(self.leg.fuel())).map(|_| ())
    }
}

/// Admissible heat rates [e^k, e^{k + m·cap}] for a fuel.
pub fn heat_rate_bounds(bid: &FuelBid) -> (f64, f64) {
    (exp(bid.k), exp(bid.k + bid.m * bid.cap))
}

/// Median market heat rate exp(k + m·cap/2).
pub fn median_heat_rate(bid: &FuelBid) -> f64 {
    exp(bid.k + 0.5 * bid.m * bid.cap)
}

/// Capacity of the fuel with heat rate at most `h`: (ln h − k)/m.
pub fn heat_rate_quantity(h: f64, bid: &FuelBid) -> Result<f64> {
    let (lower, upper) = heat_rate_bounds(bid);
    let slack = 1e-12;
    if !(h >= lower * (1.0 - slack) && h <= upper * (1.0 + slack)) {
        return Err(Error::HeatRateOutOfRange { heat_rate: h, lower, upper });
    }
    Ok(((ln(h) - bid.k) / bid.m).clamp(0.0, bid.cap))
}

/// Integration limits of the seven dark-spread regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoints {
    /// Demand levels, non-decreasing.
    pub grid: [f64; 8],
    /// Standardised levels (grid − μ_d)/σ_d.
    pub a: [f64; 8],
}

fn dark_grid(stack: &TwoFuelStack, xi_h: f64) -> [f64; 8] {
    let (cc, cg) = (stack.coal.cap, stack.gas.cap);
    let mut grid = [
        0.0,
        cg.min(xi_h),
        cc.min(cg),
        cg.max(xi_h),
        cc.min(cg + xi_h),
        cc.max(cg),
        cc.max(cg + xi_h),
        cc + cg,
    ];
    // Listed order is only monotone when coal has the larger capacity.
    grid.sort_by(f64::total_cmp);
    grid
}

pub fn spread_breakpoints(stack: &TwoFuelStack, demand: &DemandLaw, xi_h: f64) -> Result<Breakpoints> {
    ensure(demand.sigma_d > 0.0, "sigma_d", "breakpoints need random demand")?;
    ensure((0.0..=stack.coal.cap).contains(&xi_h), "xi_h", "must lie in [0, coal capacity]")?;
    let grid = dark_grid(stack, xi_h);
    let a = grid.map(|x| demand.standardize(x));
    Ok(Breakpoints { grid, a })
}

/// Demand regions in increasing order of demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpreadRegion {
    Low2,
    Low1,
    Mid3,
    Mid2,
    Mid1,
    High2,
    High1,
}

impl SpreadRegion {
    pub const ALL: [SpreadRegion; 7] = [
        SpreadRegion::Low2,
        SpreadRegion::Low1,
        SpreadRegion::Mid3,
        SpreadRegion::Mid2,
        SpreadRegion::Mid1,
        SpreadRegion::High2,
        SpreadRegion::High1,
    ];

    fn index(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            SpreadRegion::Low2 => "low2",
            SpreadRegion::Low1 => "low1",
            SpreadRegion::Mid3 => "mid3",
            SpreadRegion::Mid2 => "mid2",
            SpreadRegion::Mid1 => "mid1",
            SpreadRegion::High2 => "high2",
            SpreadRegion::High1 => "high1",
        }
    }
}

/// Terms of E[(P − h·S^c)^+ | ξ] on the sub-interval of the dark grid that
/// contains `xi`.
pub(crate) fn dark_pieces(stack: &TwoFuelStack, xi: f64, h: f64) -> Vec<Piece> {
    let lh = ln(h);
    let mut out = Vec::with_capacity(6);
    for p in price_pieces(stack, xi, 1.0) {
        let mut cost = Piece::new(-h, 1.0, 0.0, Affine::new(0.0, 0.0));
        cost.lower = p.lower;
        cost.upper = p.upper;
        let (price, cost) = if p.wg == 0.0 {
            // Coal sets the price: in the money iff its bid level beats h.
            if p.log.at(xi) <= lh {
                continue;
            }
            (p, cost)
        } else {
            let itm = Affine::new((lh - p.log.c0) / p.wg, -p.log.c1 / p.wg);
            (p.above(itm), cost.above(itm))
        };
        out.push(price);
        out.push(cost);
    }
    out
}

fn dark_conditional(inputs: &PricingInputs, xi: f64, h: f64) -> f64 {
    let pair = LogPair::new(&inputs.law);
    dark_pieces(&inputs.stack, xi, h).iter().map(|p| eval_piece(p, &pair, xi)).sum::<f64>().max(0.0)
}

/// Undiscounted E[(P_T − h·S^leg_T)^+ | D_T = ξ].
pub fn spread_conditional(inputs: &PricingInputs, leg: Leg, h: f64, xi: f64) -> f64 {
    match leg {
        Leg::Dark => dark_conditional(inputs, xi, h),
        Leg::Spark => dark_conditional(&inputs.swapped(), xi, h),
    }
}

/// Conditional dark (or, relabelled, spark) payoff on one demand region.
pub fn spread_integrand(region: SpreadRegion, xi: f64, inputs: &PricingInputs, spec: &SpreadSpec) -> Result<f64> {
    spec.check(inputs)?;
    let inp = match spec.leg {
        Leg::Dark => *inputs,
        Leg::Spark => inputs.swapped(),
    };
    let xi_h = heat_rate_quantity(spec.heat_rate, &inp.stack.coal)?;
    let grid = dark_grid(&inp.stack, xi_h);
    let (lower, upper) = (grid[region.index()], grid[region.index() + 1]);
    let inside = if region.index() == 0 { xi >= lower && xi <= upper } else { xi > lower && xi <= upper };
    if !inside {
        return Err(Error::OutsideRegion { region: region.name(), demand: xi, lower, upper });
    }
    Ok(dark_conditional(&inp, xi, spec.heat_rate))
}

/// Spread price by numerical integration over the demand density.
pub fn spread_price_quadrature(inputs: &PricingInputs, spec: &SpreadSpec) -> Result<f64> {
    spread_price_quadrature_with(inputs, spec, &inputs.demand)
}

pub fn spread_price_quadrature_with(inputs: &PricingInputs, spec: &SpreadSpec, density: &dyn DemandDensity) -> Result<f64> {
    inputs.validate()?;
    spec.check(inputs)?;
    let inp = match spec.leg {
        Leg::Dark => *inputs,
        Leg::Spark => inputs.swapped(),
    };
    let h = spec.heat_rate;
    let xi_h = heat_rate_quantity(h, &inp.stack.coal)?;
    let grid = dark_grid(&inp.stack, xi_h);
    let mut value = demand_expectation(density, &grid, |x| dark_conditional(&inp, x, h))?;
    if let Some(sp) = &inputs.spike {
        let d = density.driver().ok_or(Error::InvalidParameter {
            name: "density",
            reason: "spike regimes need the unbounded demand driver",
        })?;
        value += if d.is_deterministic() {
            spike_premium(d, sp)
        } else {
            let sd = d.sigma_d;
            let peak = d.mu_d + sp.m_s * sd * sd;
            integrate(
                |x| expm1(sp.m_s * (x - d.cap)) * d.driver_density(x),
                d.cap,
                peak.max(d.cap) + 40.0 * sd,
                &[peak, d.mu_d],
                QUAD_TOL,
            )?
        };
    }
    Ok(inputs.discount() * value)
}

/// Spread price for lognormal fuels and truncated Gaussian demand.
pub fn spread_price_closed(inputs: &PricingInputs, spec: &SpreadSpec) -> Result<f64> {
    inputs.validate()?;
    spec.check(inputs)?;
    let inp = match spec.leg {
        Leg::Dark => *inputs,
        Leg::Spark => inputs.swapped(),
    };
    let h = spec.heat_rate;
    let d = &inp.demand;
    let mut value = if d.is_deterministic() {
        dark_conditional(&inp, d.mu_d.clamp(0.0, d.cap), h)
    } else {
        let xi_h = heat_rate_quantity(h, &inp.stack.coal)?;
        let pair = LogPair::new(&inp.law);
        let (p0, pc) = demand_atoms(d);
        let mut total = p0 * dark_conditional(&inp, 0.0, h) + pc * dark_conditional(&inp, d.cap, h);
        let grid = demand_grid(d.cap, &dark_grid(&inp.stack, xi_h));
        for w in grid.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            for p in dark_pieces(&inp.stack, mid, h) {
                total += integrate_piece(&p, &pair, d, w[0], w[1]);
            }
        }
        total.max(0.0)
    };
    if let Some(sp) = &inputs.spike {
        value += spike_premium(d, sp);
    }
    Ok(inputs.discount() * value)
}

/// Spark spread: the dark spread with coal and gas exchanged.
pub fn spark_spread_price(inputs: &PricingInputs, heat_rate: f64) -> Result<f64> {
    spread_price_closed(inputs, &SpreadSpec::new(Leg::Spark, heat_rate, inputs.maturity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::forward_price_closed;
    use crate::market::{FuelTerminalLaw, MarketParams, ScenarioId, ScenarioSpec};
    use crate::quad::Tolerance;
    use crate::stack::SpikeParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn symmetric(t: f64, varrho: f64) -> PricingInputs {
        PricingInputs::from_scenario(&ScenarioSpec::preset(ScenarioId::I, MarketParams::symmetric(varrho)), t).unwrap()
    }

    fn coal_small() -> PricingInputs {
        let stack = TwoFuelStack::new(FuelBid::new(2.0, 1.2, 0.35).unwrap(), FuelBid::new(2.2, 0.8, 0.65).unwrap()).unwrap();
        let law = FuelTerminalLaw::new(2.1, 2.3, 0.3, 0.45, 0.35).unwrap();
        PricingInputs::new(stack, law, DemandLaw::new(0.55, 0.22, 1.0).unwrap(), 0.03, 1.5).unwrap()
    }

    fn coal_large() -> PricingInputs {
        let mut p = coal_small().swapped();
        p.law = FuelTerminalLaw::new(2.0, 2.2, 0.4, 0.25, -0.5).unwrap();
        p
    }

    /// E[(b(ξ, S) − h S_c)^+] by nested quadrature over the log fuel prices,
    /// with kinks located by bisection on the region tag and payoff sign.
    fn nested_oracle(inp: &PricingInputs, xi: f64, h: f64) -> f64 {
        let l = inp.law;
        let tol = Tolerance { abs: 1e-13, rel: 1e-12 };
        let cond_sd = l.sigma_g * (1.0 - l.rho * l.rho).sqrt();
        let payoff = |u: f64, v: f64| {
            let (p, r) = inp.stack.spot_price_tagged(xi, u.exp(), v.exp()).unwrap();
            (p - h * u.exp(), r)
        };
        integrate(
            |u| {
                let mg = l.mu_g + l.rho * l.sigma_g / l.sigma_c * (u - l.mu_c);
                let (lo, hi) = (mg - 12.0 * cond_sd, mg + 12.0 * cond_sd);
                let mut kinks = std::vec::Vec::new();
                let n = 400;
                let mut prev = payoff(u, lo);
                let mut v0 = lo;
                for i in 1..=n {
                    let v1 = lo + (hi - lo) * i as f64 / n as f64;
                    let cur = payoff(u, v1);
                    let same = |a: (f64, _), b: (f64, _)| a.1 == b.1 && (a.0 > 0.0) == (b.0 > 0.0);
                    if !same(prev, cur) {
                        let (mut a, mut b) = (v0, v1);
                        for _ in 0..80 {
                            let m = 0.5 * (a + b);
                            if same(payoff(u, m), prev) { a = m } else { b = m }
                        }
                        kinks.push(0.5 * (a + b));
                    }
                    prev = cur;
                    v0 = v1;
                }
                let inner = integrate(
                    |v| payoff(u, v).0.max(0.0) * crate::gauss::norm_pdf((v - mg) / cond_sd) / cond_sd,
                    lo,
                    hi,
                    &kinks,
                    tol,
                )
                .unwrap();
                inner * crate::gauss::norm_pdf((u - l.mu_c) / l.sigma_c) / l.sigma_c
            },
            l.mu_c - 12.0 * l.sigma_c,
            l.mu_c + 12.0 * l.sigma_c,
            &[l.mu_c],
            tol,
        )
        .unwrap()
    }

    #[test]
    fn conditional_forward_matches_nested_quadrature() {
        let inp = coal_small();
        for xi in [0.1, 0.3, 0.45, 0.6] {
            let a = crate::forward::conditional_moment(&inp, xi, 1.0);
            assert_relative_eq!(a, nested_oracle(&inp, xi, 0.0), max_relative = 1e-11);
        }
    }

    #[test]
    fn heat_rate_examples() {
        let b = FuelBid::new(2.0, 1.0, 0.5).unwrap();
        assert_eq!(heat_rate_quantity(2f64.exp(), &b).unwrap(), 0.0);
        assert_relative_eq!(heat_rate_quantity(2.5f64.exp(), &b).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(heat_rate_quantity(2.25f64.exp(), &b).unwrap(), 0.25, epsilon = 1e-15);
        assert!(matches!(heat_rate_quantity(3f64.exp(), &b), Err(Error::HeatRateOutOfRange { .. })));
        assert!(heat_rate_quantity(1.9f64.exp(), &b).is_err());
    }

    #[test]
    fn breakpoint_examples() {
        let inp = symmetric(1.0, 0.0);
        let bp = spread_breakpoints(&inp.stack, &inp.demand, 0.25).unwrap();
        let want = [-2.5, -1.25, 0.0, 0.0, 0.0, 0.0, 1.25, 2.5];
        for (a, w) in bp.a.iter().zip(want) {
            assert!((a - w).abs() < 1e-14);
        }
        let small = coal_small();
        let bp = spread_breakpoints(&small.stack, &small.demand, 0.2).unwrap();
        assert_eq!(bp.a[2], bp.a[3]);
        assert_eq!(bp.a[4], bp.a[5]);
        let mut det = small.demand;
        det.sigma_d = 0.0;
        assert!(spread_breakpoints(&small.stack, &det, 0.2).is_err());
    }

    #[test]
    fn integrand_matches_nested_quadrature() {
        for inp in [coal_small(), coal_large(), symmetric(1.0, -0.5)] {
            let b = inp.stack.coal;
            let (lo, hi) = heat_rate_bounds(&b);
            for h in [lo, (lo * hi).sqrt(), hi * 0.99] {
                for xi in [0.0, 0.1, 0.3, 0.45, 0.6, 0.8, 1.0] {
                    let a = dark_conditional(&inp, xi, h);
                    let o = nested_oracle(&inp, xi, h);
                    assert!((a - o).abs() <= 1e-10 * o.max(1.0), "xi {xi} h {h}: {a} vs {o}");
                }
            }
        }
    }

    #[test]
    fn region_integrands() {
        let inp = symmetric(1.0, 0.2);
        let h = 2.25f64.exp();
        let spec = SpreadSpec::new(Leg::Dark, h, 1.0);
        assert_eq!(spread_integrand(SpreadRegion::Low2, 0.1, &inp, &spec).unwrap(), 0.0);
        assert!(spread_integrand(SpreadRegion::Low2, 0.3, &inp, &spec).is_err());
        assert!(spread_integrand(SpreadRegion::Low1, 0.3, &inp, &spec).unwrap() > 0.0);

        // Always in the money: conditional forward minus fuel cost.
        let big = coal_large();
        let hb = heat_rate_bounds(&big.stack.coal).0 * 1.01;
        let xi_h = heat_rate_quantity(hb, &big.stack.coal).unwrap();
        let grid = dark_grid(&big.stack, xi_h);
        let spec = SpreadSpec::new(Leg::Dark, hb, big.maturity);
        let xi = 0.5 * (grid[4] + grid[5]);
        assert!(grid[5] > grid[4]);
        let v = spread_integrand(SpreadRegion::Mid1, xi, &big, &spec).unwrap();
        let f = crate::forward::conditional_moment(&big, xi, 1.0) - hb * big.forwards().0;
        assert_relative_eq!(v, f, max_relative = 1e-12);
    }

    #[test]
    fn closed_matches_quadrature() {
        for inp in [symmetric(0.25, -0.8), symmetric(1.0, 0.0), symmetric(3.0, 0.8), coal_small(), coal_large()] {
            for leg in [Leg::Dark, Leg::Spark] {
                let (lo, hi) = heat_rate_bounds(inp.stack.bid(leg.fuel()));
                for w in [0.0, 0.3, 0.5, 0.85, 1.0] {
                    let h = lo * (hi / lo).powf(w);
                    let spec = SpreadSpec::new(leg, h, inp.maturity);
                    let a = spread_price_closed(&inp, &spec).unwrap();
                    let b = spread_price_quadrature(&inp, &spec).unwrap();
                    assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{leg:?} h {h}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn deterministic_everything() {
        let mut inp = coal_small();
        inp.law.sigma_c = 0.0;
        inp.law.sigma_g = 0.0;
        inp.demand.sigma_d = 0.0;
        let (fc, fg) = inp.forwards();
        let h = median_heat_rate(&inp.stack.coal);
        let spec = SpreadSpec::new(Leg::Dark, h, inp.maturity);
        let want = inp.discount() * (inp.stack.spot_price(inp.demand.mu_d, fc, fg).unwrap() - h * fc).max(0.0);
        assert_relative_eq!(spread_price_closed(&inp, &spec).unwrap(), want, max_relative = 1e-13);
        assert_relative_eq!(spread_price_quadrature(&inp, &spec).unwrap(), want, max_relative = 1e-13);
    }

    #[test]
    fn symmetric_dark_equals_spark() {
        let inp = symmetric(1.0, 0.3);
        for w in [0.0f64, 0.2, 0.5, 0.9, 1.0] {
            let h = 2.0f64.exp() * (0.5 * w).exp();
            let dark = spread_price_closed(&inp, &SpreadSpec::new(Leg::Dark, h, 1.0)).unwrap();
            let spark = spark_spread_price(&inp, h).unwrap();
            assert!((dark - spark).abs() <= 1e-10 * dark.max(1.0));
        }
        let a = coal_small();
        let h = median_heat_rate(&a.stack.gas);
        let twice = spread_price_closed(&a.swapped().swapped(), &SpreadSpec::new(Leg::Spark, h, a.maturity)).unwrap();
        assert_eq!(twice, spark_spread_price(&a, h).unwrap());
    }

    #[test]
    fn spike_adds_premium() {
        let mut inp = symmetric(1.0, 0.0);
        inp.demand = DemandLaw::new(0.8, 0.1, 1.0).unwrap();
        let sp = SpikeParams::new(50.0, 50.0).unwrap();
        let spec = SpreadSpec::new(Leg::Dark, 2.3f64.exp(), 1.0);
        let base = spread_price_closed(&inp, &spec).unwrap();
        let ext = inp.with_spike(Some(sp));
        let a = spread_price_closed(&ext, &spec).unwrap();
        assert_relative_eq!(a - base, spike_premium(&inp.demand, &sp), max_relative = 1e-12);
        assert_relative_eq!(a, spread_price_quadrature(&ext, &spec).unwrap(), max_relative = 1e-10);
    }

    #[test]
    fn atom_at_zero_demand_is_worthless() {
        for inp in [coal_small(), coal_large(), symmetric(2.0, -0.8)] {
            let (lo, hi) = heat_rate_bounds(&inp.stack.coal);
            for h in [lo, (lo * hi).sqrt(), hi] {
                assert_eq!(dark_conditional(&inp, 0.0, h), 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn sandwich_and_monotone(w in 0.0..1.0f64, t in 0.1..3.0f64, varrho in -0.95..0.95f64,
                                 mud in 0.05..0.95f64, sd in 0.02..0.4f64, dark in proptest::bool::ANY) {
            let mut inp = symmetric(t, varrho);
            inp.demand.mu_d = mud;
            inp.demand.sigma_d = sd;
            inp.rate = 0.02;
            let leg = if dark { Leg::Dark } else { Leg::Spark };
            let (lo, hi) = heat_rate_bounds(inp.stack.bid(leg.fuel()));
            let h = lo * (hi / lo).powf(w);
            let v = spread_price_closed(&inp, &SpreadSpec::new(leg, h, t)).unwrap();
            let fp = forward_price_closed(&inp).unwrap();
            let f_leg = inp.law.forward(leg.fuel());
            let df = inp.discount();
            prop_assert!(v >= df * (fp - h * f_leg).max(0.0) * (1.0 - 1e-10) - 1e-12);
            prop_assert!(v <= df * fp * (1.0 + 1e-12));
            let h2 = (h * 1.05).min(hi);
            let v2 = spread_price_closed(&inp, &SpreadSpec::new(leg, h2, t)).unwrap();
            prop_assert!(v2 <= v * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn more_demand_noise_adds_value() {
        let h = median_heat_rate(&MarketParams::symmetric(0.0).stack.coal);
        for varrho in [-0.8, 0.0, 0.8] {
            let mut prev = 0.0;
            for sd in [0.05, 0.1, 0.15, 0.2, 0.25, 0.3] {
                let mut inp = symmetric(1.0, varrho);
                inp.demand.sigma_d = sd;
                let v = spread_price_closed(&inp, &SpreadSpec::new(Leg::Dark, h, 1.0)).unwrap();
                assert!(v >= prev, "varrho {varrho} sd {sd}: {v} < {prev}");
                prev = v;
            }
        }
    }
}

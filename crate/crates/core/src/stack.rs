//! Fuel bid curves, the market bid stack and the spot price map.

use alloc::vec::Vec;
use core::fmt;

use crate::math::{exp, ln};
use crate::{ensure, Error, Result};

/// The two technologies of the closed-form model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fuel {
    Coal,
    Gas,
}

impl Fuel {
    pub fn other(self) -> Fuel {
        match self {
            Fuel::Coal => Fuel::Gas,
            Fuel::Gas => Fuel::Coal,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Fuel::Coal => "coal",
            Fuel::Gas => "gas",
        }
    }
}

/// Exponential bid curve `s·exp(k + m·ξ)` for ξ ∈ [0, cap].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuelBid {
    pub k: f64,
    pub m: f64,
    pub cap: f64,
}

impl FuelBid {
    pub fn new(k: f64, m: f64, cap: f64) -> Result<Self> {
        let bid = Self { k, m, cap };
        bid.validate()?;
        Ok(bid)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.k.is_finite(), "k", "must be finite")?;
        ensure(self.m > 0.0 && self.m.is_finite(), "m", "bid slope must be positive")?;
        ensure(self.cap > 0.0 && self.cap.is_finite(), "cap", "capacity must be positive")
    }

    /// ln b(ξ, s) without range checks.
    #[inline]
    pub fn log_price(&self, quantity: f64, fuel_price: f64) -> f64 {
        ln(fuel_price) + self.k + self.m * quantity
    }

    #[inline]
    pub fn floor(&self, fuel_price: f64) -> f64 {
        fuel_price * exp(self.k)
    }

    #[inline]
    pub fn top(&self, fuel_price: f64) -> f64 {
        fuel_price * exp(self.k + self.m * self.cap)
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, quantity: f64, fuel_price: f64) -> f64 {
        fuel_price * exp(self.k + self.m * quantity)
    }
}

pub fn bid_curve_eval(bid: &FuelBid, quantity: f64, fuel_price: f64) -> Result<f64> {
    if !(0.0..=bid.cap).contains(&quantity) {
        return Err(Error::QuantityOutOfRange { quantity, capacity: bid.cap });
    }
    ensure(fuel_price > 0.0, "fuel_price", "must be positive")?;
    Ok(bid.eval_unchecked(quantity, fuel_price))
}

/// Generalized inverse of the bid curve: the quantity offered at `price`.
pub fn bid_curve_inverse(bid: &FuelBid, price: f64, fuel_price: f64) -> f64 {
    if price < bid.floor(fuel_price) {
        return 0.0;
    }
    if price >= bid.top(fuel_price) {
        return bid.cap;
    }
    ((ln(price / fuel_price) - bid.k) / bid.m).clamp(0.0, bid.cap)
}

/// Demand level and fuel prices, index-aligned with a slice of bids.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSnapshot {
    pub demand: f64,
    pub fuel_prices: Vec<f64>,
}

impl MarketSnapshot {
    pub fn new(demand: f64, fuel_prices: Vec<f64>) -> Self {
        Self { demand, fuel_prices }
    }

    fn check(&self, bids: &[FuelBid]) -> Result<()> {
        if bids.is_empty() {
            return Err(Error::InvalidParameter { name: "bids", reason: "need at least one fuel" });
        }
        if bids.len() != self.fuel_prices.len() {
            return Err(Error::InvalidParameter { name: "fuel_prices", reason: "one price per bid curve" });
        }
        for &s in &self.fuel_prices {
            ensure(s > 0.0 && s.is_finite(), "fuel_prices", "must be positive")?;
        }
        let capacity: f64 = bids.iter().map(|b| b.cap).sum();
        if !(0.0..=capacity).contains(&self.demand) {
            return Err(Error::DemandOutOfRange { demand: self.demand, capacity });
        }
        Ok(())
    }
}

/// Indices of partially used (marginal) and fully used (saturated) fuels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MarginalSets {
    pub marginal: Vec<usize>,
    pub saturated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackCoefficients {
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub zeta: f64,
}

/// Exponents of the price over a set of jointly marginal fuels.
pub fn stack_coefficients(marginal: &[FuelBid]) -> Result<StackCoefficients> {
    if marginal.is_empty() {
        return Err(Error::EmptyMarginalSet);
    }
    let prod_except = |i: usize| -> f64 {
        marginal.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, b)| b.m).product()
    };
    let zeta: f64 = (0..marginal.len()).map(prod_except).sum();
    let alpha: Vec<f64> = (0..marginal.len()).map(|i| prod_except(i) / zeta).collect();
    let beta = marginal.iter().zip(&alpha).map(|(b, a)| b.k * a).sum();
    let gamma = marginal.iter().map(|b| b.m).product::<f64>() / zeta;
    Ok(StackCoefficients { alpha, beta, gamma, zeta })
}

fn total_supply(bids: &[FuelBid], prices: &[f64], p: f64) -> f64 {
    bids.iter().zip(prices).map(|(b, &s)| bid_curve_inverse(b, p, s)).sum()
}

/// Left-continuous clearing price for any number of fuels.
///
/// Walks the sorted floors and tops, finds the segment on which supply
/// first reaches the demand and solves the log-linear supply equation of
/// the fuels marginal on that segment.
pub fn spot_price_nfuel(bids: &[FuelBid], snap: &MarketSnapshot) -> Result<f64> {
    snap.check(bids)?;
    let s = &snap.fuel_prices;
    let mut knots: Vec<f64> = bids
        .iter()
        .zip(s)
        .flat_map(|(b, &si)| [b.floor(si), b.top(si)])
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    if snap.demand <= 0.0 {
        return Ok(knots[0]);
    }
    let mut lo = knots[0];
    for &hi in &knots[1..] {
        let reached = total_supply(bids, s, hi);
        if reached >= snap.demand {
            if total_supply(bids, s, lo) >= snap.demand {
                return Ok(lo);
            }
            let mut residual = snap.demand;
            let mut marginal = Vec::new();
            let mut log_level = 0.0;
            for (b, &si) in bids.iter().zip(s) {
                if b.top(si) <= lo {
                    residual -= b.cap;
                } else if b.floor(si) <= lo && b.top(si) >= hi {
                    marginal.push(*b);
                    log_level += ln(si) / b.m;
                }
            }
            let c = stack_coefficients(&marginal)?;
            let inv_m_sum: f64 = marginal.iter().map(|b| 1.0 / b.m).sum();
            let p = exp(log_level / inv_m_sum + c.beta + c.gamma * residual);
            return Ok(p.clamp(lo, hi));
        }
        lo = hi;
    }
    Ok(*knots.last().expect("non-empty"))
}

/// Marginal and saturated fuels at the clearing price. A fuel exactly at
/// full capacity counts as saturated.
pub fn classify_marginal_sets(bids: &[FuelBid], snap: &MarketSnapshot) -> Result<MarginalSets> {
    let p = spot_price_nfuel(bids, snap)?;
    let mut sets = MarginalSets::default();
    if snap.demand <= 0.0 {
        return Ok(sets);
    }
    for (i, (b, &si)) in bids.iter().zip(&snap.fuel_prices).enumerate() {
        if p >= b.top(si) {
            sets.saturated.push(i);
        } else if p > b.floor(si) {
            sets.marginal.push(i);
        }
    }
    Ok(sets)
}

/// Price regimes of the two-fuel stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// Coal alone is marginal.
    P1,
    /// Gas alone is marginal.
    P2,
    /// Coal marginal, gas saturated.
    P3,
    /// Gas marginal, coal saturated.
    P4,
    /// Both marginal.
    P5,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::P1 => "P1",
            Region::P2 => "P2",
            Region::P3 => "P3",
            Region::P4 => "P4",
            Region::P5 => "P5",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeParams {
    pub m_n: f64,
    pub m_s: f64,
}

impl SpikeParams {
    pub fn new(m_n: f64, m_s: f64) -> Result<Self> {
        ensure(m_n > 0.0 && m_n.is_finite(), "m_n", "must be positive")?;
        ensure(m_s > 0.0 && m_s.is_finite(), "m_s", "must be positive")?;
        Ok(Self { m_n, m_s })
    }
}

/// Regime of the extended price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtendedRegion {
    Negative,
    Base(Region),
    Spike,
}

impl fmt::Display for ExtendedRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedRegion::Negative => f.write_str("negative"),
            ExtendedRegion::Base(r) => r.fmt(f),
            ExtendedRegion::Spike => f.write_str("spike"),
        }
    }
}

/// Exponents of the jointly marginal coal/gas price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointCoefficients {
    pub alpha_c: f64,
    pub alpha_g: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoFuelStack {
    pub coal: FuelBid,
    pub gas: FuelBid,
}

impl TwoFuelStack {
    pub fn new(coal: FuelBid, gas: FuelBid) -> Result<Self> {
        coal.validate()?;
        gas.validate()?;
        Ok(Self { coal, gas })
    }

    pub fn bid(&self, fuel: Fuel) -> &FuelBid {
        match fuel {
            Fuel::Coal => &self.coal,
            Fuel::Gas => &self.gas,
        }
    }

    pub fn capacity(&self) -> f64 {
        self.coal.cap + self.gas.cap
    }

    /// The stack with the coal and gas roles exchanged.
    pub fn swapped(&self) -> Self {
        Self { coal: self.gas, gas: self.coal }
    }

    /// The fuel with the smaller capacity (coal on ties).
    pub fn smaller(&self) -> Fuel {
        if self.coal.cap <= self.gas.cap {
            Fuel::Coal
        } else {
            Fuel::Gas
        }
    }

    pub fn joint(&self) -> JointCoefficients {
        let (mc, mg) = (self.coal.m, self.gas.m);
        let z = mc + mg;
        JointCoefficients {
            alpha_c: mg / z,
            alpha_g: mc / z,
            beta: (self.coal.k * mg + self.gas.k * mc) / z,
            gamma: mc * mg / z,
        }
    }

    fn check(&self, demand: f64, s_c: f64, s_g: f64) -> Result<()> {
        if !(0.0..=self.capacity()).contains(&demand) {
            return Err(Error::DemandOutOfRange { demand, capacity: self.capacity() });
        }
        ensure(s_c > 0.0 && s_c.is_finite(), "s_c", "must be positive")?;
        ensure(s_g > 0.0 && s_g.is_finite(), "s_g", "must be positive")
    }

    /// Region of demand `xi` at fuel prices (s_c, s_g); boundaries resolve
    /// to the lower-demand case.
    pub fn region(&self, xi: f64, s_c: f64, s_g: f64) -> Region {
        let (c, g) = (&self.coal, &self.gas);
        let lo_cap = c.cap.min(g.cap);
        let hi_cap = c.cap.max(g.cap);
        if xi <= lo_cap {
            if c.eval_unchecked(xi, s_c) <= g.floor(s_g) {
                Region::P1
            } else if g.eval_unchecked(xi, s_g) <= c.floor(s_c) {
                Region::P2
            } else {
                Region::P5
            }
        } else if xi <= hi_cap {
            // The larger fuel p may run alone or with q saturated.
            let (p, sp, q, sq, alone, with_q_full) = if c.cap > g.cap {
                (c, s_c, g, s_g, Region::P1, Region::P3)
            } else {
                (g, s_g, c, s_c, Region::P2, Region::P4)
            };
            if p.eval_unchecked(xi, sp) <= q.floor(sq) {
                alone
            } else if p.eval_unchecked(xi - q.cap, sp) > q.top(sq) {
                with_q_full
            } else {
                Region::P5
            }
        } else if c.eval_unchecked(xi - g.cap, s_c) > g.top(s_g) {
            Region::P3
        } else if g.eval_unchecked(xi - c.cap, s_g) > c.top(s_c) {
            Region::P4
        } else {
            Region::P5
        }
    }

    /// Price in a given region without consistency checks.
    pub fn price_in_region(&self, region: Region, xi: f64, s_c: f64, s_g: f64) -> f64 {
        match region {
            Region::P1 => self.coal.eval_unchecked(xi, s_c),
            Region::P2 => self.gas.eval_unchecked(xi, s_g),
            Region::P3 => self.coal.eval_unchecked(xi - self.gas.cap, s_c),
            Region::P4 => self.gas.eval_unchecked(xi - self.coal.cap, s_g),
            Region::P5 => {
                let j = self.joint();
                exp(j.alpha_c * ln(s_c) + j.alpha_g * ln(s_g) + j.beta + j.gamma * xi)
            }
        }
    }

    pub(crate) fn price_unchecked(&self, xi: f64, s_c: f64, s_g: f64) -> f64 {
        self.price_in_region(self.region(xi, s_c, s_g), xi, s_c, s_g)
    }

    pub fn spot_price_tagged(&self, demand: f64, s_c: f64, s_g: f64) -> Result<(f64, Region)> {
        self.check(demand, s_c, s_g)?;
        let r = self.region(demand, s_c, s_g);
        Ok((self.price_in_region(r, demand, s_c, s_g), r))
    }

    pub fn spot_price(&self, demand: f64, s_c: f64, s_g: f64) -> Result<f64> {
        self.spot_price_tagged(demand, s_c, s_g).map(|(p, _)| p)
    }

    /// Spot price driven by unbounded demand `x`, with exponential
    /// negative-price and spike regimes outside [0, cap].
    pub fn spot_price_extended(&self, x: f64, s_c: f64, s_g: f64, spike: &SpikeParams) -> Result<(f64, ExtendedRegion)> {
        ensure(x.is_finite(), "x", "must be finite")?;
        let cap = self.capacity();
        let d = x.clamp(0.0, cap);
        self.check(d, s_c, s_g)?;
        Ok(self.extended_unchecked(x, s_c, s_g, spike))
    }

    pub(crate) fn extended_unchecked(&self, x: f64, s_c: f64, s_g: f64, spike: &SpikeParams) -> (f64, ExtendedRegion) {
        let cap = self.capacity();
        if x <= 0.0 {
            let base = self.price_unchecked(0.0, s_c, s_g);
            (base - exp(-spike.m_n * x) + 1.0, ExtendedRegion::Negative)
        } else if x >= cap {
            let base = self.price_unchecked(cap, s_c, s_g);
            (base + exp(spike.m_s * (x - cap)) - 1.0, ExtendedRegion::Spike)
        } else {
            let r = self.region(x, s_c, s_g);
            (self.price_in_region(r, x, s_c, s_g), ExtendedRegion::Base(r))
        }
    }
}

pub fn spot_price_twofuel(coal: &FuelBid, gas: &FuelBid, snap: &MarketSnapshot) -> Result<f64> {
    if snap.fuel_prices.len() != 2 {
        return Err(Error::InvalidParameter { name: "fuel_prices", reason: "two-fuel stack takes (coal, gas) prices" });
    }
    TwoFuelStack::new(*coal, *gas)?.spot_price(snap.demand, snap.fuel_prices[0], snap.fuel_prices[1])
}

/// Number of distinct price expressions for an n-fuel stack.
pub fn case_count(n: u32) -> Result<u64> {
    if n < 1 {
        return Err(Error::InvalidParameter { name: "n", reason: "need at least one fuel" });
    }
    let overflow = Error::InvalidParameter { name: "n", reason: "case count overflows u64" };
    let mut total: u64 = 0;
    let mut binom: u64 = 1;
    for i in 1..=n {
        binom = binom.checked_mul((n - i + 1) as u64).ok_or(overflow.clone())? / i as u64;
        let saturations = 1u64.checked_shl(n - i).filter(|_| n - i < 64).ok_or(overflow.clone())?;
        total = binom
            .checked_mul(saturations)
            .and_then(|t| total.checked_add(t))
            .ok_or(overflow.clone())?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn symmetric() -> TwoFuelStack {
        let b = FuelBid::new(2.0, 1.0, 0.5).unwrap();
        TwoFuelStack::new(b, b).unwrap()
    }

    #[test]
    fn bid_curve_examples() {
        let b = FuelBid::new(2.0, 1.0, 0.5).unwrap();
        assert_relative_eq!(bid_curve_eval(&b, 0.0, 10.0).unwrap(), 73.890_560_989_306_5, max_relative = 1e-14);
        assert_relative_eq!(bid_curve_eval(&b, 0.5, 10.0).unwrap(), 121.824_939_607_034_73, max_relative = 1e-14);
        let unit = FuelBid::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(bid_curve_eval(&unit, 0.0, 1.0).unwrap(), 1.0);
        assert!(bid_curve_eval(&b, 0.6, 10.0).is_err());
        assert!(FuelBid::new(2.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn inverse_examples() {
        let b = FuelBid::new(2.0, 1.0, 0.5).unwrap();
        assert_eq!(bid_curve_inverse(&b, b.floor(10.0) * (1.0 - 1e-12), 10.0), 0.0);
        assert_eq!(bid_curve_inverse(&b, b.top(10.0), 10.0), 0.5);
        assert_relative_eq!(bid_curve_inverse(&b, 10.0 * 2.25f64.exp(), 10.0), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn coefficient_examples() {
        let b = FuelBid::new(2.0, 1.0, 0.5).unwrap();
        let c = stack_coefficients(&[b, b]).unwrap();
        assert_eq!(c.alpha, vec![0.5, 0.5]);
        assert_eq!((c.beta, c.gamma), (2.0, 0.5));
        let one = stack_coefficients(&[b]).unwrap();
        assert_eq!((one.alpha[0], one.beta, one.gamma), (1.0, 2.0, 1.0));
        let c2 = stack_coefficients(&[FuelBid::new(2.0, 1.0, 0.5).unwrap(), FuelBid::new(1.0, 3.0, 0.5).unwrap()]).unwrap();
        assert_relative_eq!(c2.alpha[0], 0.75);
        assert_relative_eq!(c2.alpha[1], 0.25);
        assert_relative_eq!(c2.beta, 1.75);
        assert_relative_eq!(c2.gamma, 0.75);
        assert_eq!(c2.zeta, 4.0);
        assert!(matches!(stack_coefficients(&[]), Err(Error::EmptyMarginalSet)));
        let j = TwoFuelStack::new(FuelBid::new(2.0, 1.0, 0.5).unwrap(), FuelBid::new(1.0, 3.0, 0.5).unwrap()).unwrap().joint();
        assert_relative_eq!(j.alpha_c, 0.75);
        assert_relative_eq!(j.beta, 1.75);
        assert_relative_eq!(j.gamma, 0.75);
    }

    #[test]
    fn spot_examples() {
        let st = symmetric();
        let bids = [st.coal, st.gas];
        let p = spot_price_nfuel(&bids, &MarketSnapshot::new(0.5, vec![10.0, 10.0])).unwrap();
        assert_relative_eq!(p, 10.0 * 2.25f64.exp(), max_relative = 1e-14);
        let (p2, r) = st.spot_price_tagged(0.5, 10.0, 10.0).unwrap();
        assert_relative_eq!(p2, p, max_relative = 1e-14);
        assert_eq!(r, Region::P5);
        let floor = spot_price_nfuel(&bids, &MarketSnapshot::new(0.0, vec![5.0, 20.0])).unwrap();
        assert_relative_eq!(floor, 5.0 * 2f64.exp(), max_relative = 1e-14);
        let near0 = spot_price_nfuel(&bids, &MarketSnapshot::new(1e-12, vec![5.0, 20.0])).unwrap();
        assert_relative_eq!(near0, 36.945_280_494_653_25, max_relative = 1e-10);
        assert_relative_eq!(st.spot_price(0.0, 5.0, 20.0).unwrap(), floor, max_relative = 1e-15);
        assert!(spot_price_nfuel(&bids, &MarketSnapshot::new(1.1, vec![10.0, 10.0])).is_err());
    }

    #[test]
    fn classification_examples() {
        let st = symmetric();
        let bids = [st.coal, st.gas];
        let sets = classify_marginal_sets(&bids, &MarketSnapshot::new(0.5, vec![10.0, 10.0])).unwrap();
        assert_eq!(sets.marginal, vec![0, 1]);
        assert!(sets.saturated.is_empty());
        let empty = classify_marginal_sets(&bids, &MarketSnapshot::new(0.0, vec![10.0, 10.0])).unwrap();
        assert!(empty.marginal.is_empty());
        let coal_only = classify_marginal_sets(&bids, &MarketSnapshot::new(0.1, vec![5.0, 20.0])).unwrap();
        assert_eq!(coal_only.marginal, vec![0]);
        assert!(coal_only.saturated.is_empty());
        assert_eq!(st.region(0.1, 5.0, 20.0), Region::P1);
    }

    #[test]
    fn high_demand_and_decoupling() {
        let st = symmetric();
        let bids = [st.coal, st.gas];
        let p = st.spot_price(0.9, 10.0, 10.0).unwrap();
        let q = spot_price_nfuel(&bids, &MarketSnapshot::new(0.9, vec![10.0, 10.0])).unwrap();
        assert_relative_eq!(p, q, max_relative = 1e-13);
        assert_relative_eq!(p, 10.0 * 2.45f64.exp(), max_relative = 1e-13);
        let (p, r) = st.spot_price_tagged(0.3, 10.0, 1e9).unwrap();
        assert_eq!(r, Region::P1);
        assert_relative_eq!(p, 10.0 * 2.3f64.exp(), max_relative = 1e-14);
    }

    #[test]
    fn unequal_caps_regions() {
        let st = TwoFuelStack::new(FuelBid::new(2.0, 1.0, 0.7).unwrap(), FuelBid::new(2.5, 2.0, 0.3).unwrap()).unwrap();
        let bids = [st.coal, st.gas];
        for &(d, sc, sg) in &[(0.5, 10.0, 1.0), (0.5, 1.0, 10.0), (0.5, 10.0, 10.0), (0.9, 3.0, 30.0), (0.9, 30.0, 3.0)] {
            let a = st.spot_price(d, sc, sg).unwrap();
            let b = spot_price_nfuel(&bids, &MarketSnapshot::new(d, vec![sc, sg])).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        assert_eq!(st.region(0.5, 1.0, 1e6), Region::P1);
        assert_eq!(st.region(0.5, 1e6, 1.0), Region::P3);
        assert_eq!(st.region(0.9, 1.0, 1e3), Region::P4);
    }

    #[test]
    fn extended_price_junctions() {
        let st = symmetric();
        let sp = SpikeParams::new(50.0, 50.0).unwrap();
        let (p0, r0) = st.spot_price_extended(0.0, 10.0, 10.0, &sp).unwrap();
        assert_eq!(p0, st.spot_price(0.0, 10.0, 10.0).unwrap());
        assert_eq!(r0, ExtendedRegion::Negative);
        let (p1, _) = st.spot_price_extended(1.0, 10.0, 10.0, &sp).unwrap();
        assert_eq!(p1, st.spot_price(1.0, 10.0, 10.0).unwrap());
        let (p11, r11) = st.spot_price_extended(1.1, 10.0, 10.0, &sp).unwrap();
        assert_eq!(r11, ExtendedRegion::Spike);
        assert_relative_eq!(p11 - p1, 147.413_159_102_576_6, max_relative = 1e-12);
        let (neg, _) = st.spot_price_extended(-0.2, 10.0, 10.0, &sp).unwrap();
        assert!(neg < p0 - 20_000.0);
    }

    #[test]
    fn case_counts() {
        assert_eq!(case_count(1).unwrap(), 1);
        assert_eq!(case_count(2).unwrap(), 5);
        assert_eq!(case_count(3).unwrap(), 19);
        assert!(case_count(0).is_err());
        for n in 1..=30u32 {
            assert_eq!(case_count(n).unwrap(), 3u64.pow(n) - 2u64.pow(n));
        }
    }

    fn bid_strategy() -> impl Strategy<Value = FuelBid> {
        (-1.0..3.0f64, 0.2..3.0f64, 0.1..1.0f64).prop_map(|(k, m, cap)| FuelBid { k, m, cap })
    }

    proptest! {
        #[test]
        fn twofuel_matches_nfuel(c in bid_strategy(), g in bid_strategy(), u in 0.0..1.0f64,
                                 sc in 0.5..30.0f64, sg in 0.5..30.0f64) {
            let st = TwoFuelStack::new(c, g).unwrap();
            let d = u * st.capacity();
            let a = st.spot_price(d, sc, sg).unwrap();
            let b = spot_price_nfuel(&[c, g], &MarketSnapshot::new(d, vec![sc, sg])).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} vs {b}");
        }

        #[test]
        fn homogeneity(c in bid_strategy(), g in bid_strategy(), u in 0.0..1.0f64,
                       sc in 0.5..30.0f64, sg in 0.5..30.0f64, lam in 0.1..10.0f64) {
            let st = TwoFuelStack::new(c, g).unwrap();
            let d = u * st.capacity();
            let a = st.spot_price(d, sc, sg).unwrap();
            let b = st.spot_price(d, lam * sc, lam * sg).unwrap();
            prop_assert!((b - lam * a).abs() <= 1e-12 * b.abs());
        }

        #[test]
        fn monotone_in_demand_and_fuels(c in bid_strategy(), g in bid_strategy(), u in 0.0..1.0f64,
                                        du in 0.0..0.2f64, sc in 0.5..30.0f64, sg in 0.5..30.0f64, ds in 0.0..5.0f64) {
            let st = TwoFuelStack::new(c, g).unwrap();
            let cap = st.capacity();
            let d = u * cap;
            let d2 = (d + du * cap).min(cap);
            let p = st.spot_price(d, sc, sg).unwrap();
            prop_assert!(st.spot_price(d2, sc, sg).unwrap() >= p * (1.0 - 1e-14));
            prop_assert!(st.spot_price(d, sc + ds, sg).unwrap() >= p * (1.0 - 1e-14));
            prop_assert!(st.spot_price(d, sc, sg + ds).unwrap() >= p * (1.0 - 1e-14));
        }

        #[test]
        fn supply_consistency(bids in proptest::collection::vec(bid_strategy(), 1..5),
                              prices in proptest::collection::vec(0.5..30.0f64, 5), u in 0.0..1.0f64) {
            let n = bids.len();
            let s = prices[..n].to_vec();
            let cap: f64 = bids.iter().map(|b| b.cap).sum();
            let snap = MarketSnapshot::new(u * cap, s.clone());
            let p = spot_price_nfuel(&bids, &snap).unwrap();
            let sets = classify_marginal_sets(&bids, &snap).unwrap();
            let supplied: f64 = sets.marginal.iter().map(|&i| bid_curve_inverse(&bids[i], p, s[i])).sum::<f64>()
                + sets.saturated.iter().map(|&i| bids[i].cap).sum::<f64>();
            prop_assert!((supplied - snap.demand).abs() <= 1e-12, "{supplied} vs {}", snap.demand);
            for &i in &sets.marginal {
                prop_assert!(!sets.saturated.contains(&i));
            }
        }

        #[test]
        fn extended_is_continuous(sc in 0.5..30.0f64, sg in 0.5..30.0f64, ms in 1.0..60.0f64, mn in 1.0..60.0f64) {
            let st = symmetric();
            let sp = SpikeParams { m_n: mn, m_s: ms };
            let eps = 1e-9;
            for x0 in [0.0, st.capacity()] {
                let a = st.spot_price_extended(x0 - eps, sc, sg, &sp).unwrap().0;
                let b = st.spot_price_extended(x0 + eps, sc, sg, &sp).unwrap().0;
                prop_assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0));
            }
        }
    }
}

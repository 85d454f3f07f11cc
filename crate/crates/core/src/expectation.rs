//! Expectations of exponential-lognormal functionals over truncated
//! Gaussian demand.
//!
//! Conditional on demand ξ, the price (and every payoff we need) is a sum
//! of terms `coef · S_c^a · S_g^b · exp(l(ξ)) · 1{Z ∈ (lo(ξ), hi(ξ))}` with
//! Z = ln S_g − ln S_c and l, lo, hi affine in ξ. Tilting the joint normal
//! law by S_c^a S_g^b keeps Z normal with the same variance, so each term
//! has an explicit conditional expectation and, integrated against the
//! demand density, reduces to bivariate normal CDFs.

use alloc::vec::Vec;

use crate::gauss::{bvn_cdf, norm_cdf, norm_cdf_diff};
use crate::market::{DemandLaw, FuelTerminalLaw};
use crate::math::{exp, sqrt};
use crate::stack::TwoFuelStack;

/// c0 + c1·ξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Affine {
    pub c0: f64,
    pub c1: f64,
}

impl Affine {
    pub const fn new(c0: f64, c1: f64) -> Self {
        Self { c0, c1 }
    }

    #[inline]
    pub fn at(&self, xi: f64) -> f64 {
        self.c0 + self.c1 * xi
    }

    fn crossing(&self, other: &Affine) -> Option<f64> {
        let dc = self.c1 - other.c1;
        if dc == 0.0 {
            None
        } else {
            Some((other.c0 - self.c0) / dc)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Piece {
    pub coef: f64,
    pub wc: f64,
    pub wg: f64,
    pub log: Affine,
    pub lower: [Option<Affine>; 2],
    pub upper: Option<Affine>,
}

impl Piece {
    pub fn new(coef: f64, wc: f64, wg: f64, log: Affine) -> Self {
        Self { coef, wc, wg, log, lower: [None, None], upper: None }
    }

    pub fn above(mut self, bound: Affine) -> Self {
        if self.lower[0].is_none() {
            self.lower[0] = Some(bound);
        } else {
            self.lower[1] = Some(bound);
        }
        self
    }

    pub fn below(mut self, bound: Affine) -> Self {
        self.upper = Some(bound);
        self
    }

    fn binding_lower(&self, xi: f64) -> Option<Affine> {
        match (self.lower[0], self.lower[1]) {
            (Some(a), Some(b)) => Some(if a.at(xi) >= b.at(xi) { a } else { b }),
            (a, b) => a.or(b),
        }
    }
}

/// Moment data of the log fuel pair under a power tilt.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogPair {
    mu_c: f64,
    mu_g: f64,
    vc: f64,
    vg: f64,
    cov: f64,
    sigma: f64,
}

impl LogPair {
    pub fn new(law: &FuelTerminalLaw) -> Self {
        Self {
            mu_c: law.mu_c,
            mu_g: law.mu_g,
            vc: law.sigma_c * law.sigma_c,
            vg: law.sigma_g * law.sigma_g,
            cov: law.covariance(),
            sigma: sqrt(law.spread_variance()),
        }
    }

    /// ln E[S_c^a S_g^b].
    #[inline]
    fn log_mass(&self, a: f64, b: f64) -> f64 {
        a * self.mu_c + b * self.mu_g + 0.5 * (a * a * self.vc + b * b * self.vg + 2.0 * a * b * self.cov)
    }

    /// Mean of Z under the measure tilted by S_c^a S_g^b.
    #[inline]
    fn tilted_mean(&self, a: f64, b: f64) -> f64 {
        self.mu_g - self.mu_c + a * (self.cov - self.vc) + b * (self.vg - self.cov)
    }

    /// P(lo < Z < hi) under the tilt with mean `m`.
    fn prob(&self, m: f64, lo: Option<f64>, hi: Option<f64>) -> f64 {
        let hi = hi.unwrap_or(f64::INFINITY);
        let lo = lo.unwrap_or(f64::NEG_INFINITY);
        if lo >= hi {
            return 0.0;
        }
        if self.sigma == 0.0 {
            let ind = |b: f64| -> f64 {
                if b > m {
                    1.0
                } else if b == m {
                    0.5
                } else {
                    0.0
                }
            };
            return ind(hi) - ind(lo);
        }
        norm_cdf_diff((hi - m) / self.sigma, (lo - m) / self.sigma)
    }
}

/// E[piece | demand = ξ].
pub(crate) fn eval_piece(p: &Piece, pair: &LogPair, xi: f64) -> f64 {
    let m = pair.tilted_mean(p.wc, p.wg);
    let lo = p.binding_lower(xi).map(|b| b.at(xi));
    let hi = p.upper.map(|b| b.at(xi));
    let prob = pair.prob(m, lo, hi);
    if prob == 0.0 {
        return 0.0;
    }
    p.coef * exp(pair.log_mass(p.wc, p.wg) + p.log.at(xi)) * prob
}

/// ∫_{ξ1}^{ξ2} exp(l(ξ)) Φ((u(ξ) − m)/σ) φ_d(ξ) dξ with `u = None` meaning Φ ≡ 1.
fn exp_phi_integral(l: Affine, u: Option<Affine>, m: f64, sigma: f64, d: &DemandLaw, xi1: f64, xi2: f64) -> f64 {
    if xi2 <= xi1 {
        return 0.0;
    }
    let l1 = l.at(d.mu_d);
    let q1 = l.c1 * d.sigma_d;
    let (x1, x2) = (d.standardize(xi1), d.standardize(xi2));
    let plain = |x1: f64, x2: f64| exp(l1 + 0.5 * q1 * q1) * norm_cdf_diff(x2 - q1, x1 - q1);
    let Some(u) = u else {
        return plain(x1, x2);
    };
    if sigma == 0.0 {
        // Indicator of u(ξ) > m.
        let v0 = u.c0 - m;
        if u.c1 == 0.0 {
            let w = if v0 > 0.0 { 1.0 } else if v0 == 0.0 { 0.5 } else { 0.0 };
            return w * plain(x1, x2);
        }
        let root = -v0 / u.c1;
        let (a, b) = if u.c1 > 0.0 { (root.max(xi1), xi2) } else { (xi1, root.min(xi2)) };
        return if b > a { plain(d.standardize(a), d.standardize(b)) } else { 0.0 };
    }
    let l2 = (u.at(d.mu_d) - m) / sigma;
    let q2 = u.c1 * d.sigma_d / sigma;
    let s = sqrt(1.0 + q2 * q2);
    let y = (l2 + q1 * q2) / s;
    let r = -q2 / s;
    if r.abs() < 1e-15 {
        return plain(x1, x2) * norm_cdf(y);
    }
    exp(l1 + 0.5 * q1 * q1) * (bvn_cdf(x2 - q1, y, r) - bvn_cdf(x1 - q1, y, r))
}

/// ∫_{ξ1}^{ξ2} E[piece | ξ] φ_d(ξ) dξ for non-degenerate demand.
pub(crate) fn integrate_piece(p: &Piece, pair: &LogPair, d: &DemandLaw, xi1: f64, xi2: f64) -> f64 {
    if xi2 <= xi1 {
        return 0.0;
    }
    let mut bounds: Vec<Affine> = p.lower.iter().flatten().copied().collect();
    bounds.extend(p.upper);
    let mut cuts: Vec<f64> = Vec::with_capacity(6);
    cuts.push(xi1);
    for i in 0..bounds.len() {
        for j in i + 1..bounds.len() {
            if let Some(x) = bounds[i].crossing(&bounds[j]) {
                if x > xi1 && x < xi2 {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.push(xi2);
    cuts.sort_by(f64::total_cmp);

    let m = pair.tilted_mean(p.wc, p.wg);
    let scale = p.coef * exp(pair.log_mass(p.wc, p.wg));
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        let lo = p.binding_lower(mid);
        if let (Some(lo), Some(hi)) = (lo, p.upper) {
            if lo.at(mid) >= hi.at(mid) {
                continue;
            }
        }
        let upper = exp_phi_integral(p.log, p.upper, m, pair.sigma, d, a, b);
        let lower = match lo {
            Some(lo) => exp_phi_integral(p.log, Some(lo), m, pair.sigma, d, a, b),
            None => 0.0,
        };
        total += upper - lower;
    }
    scale * total
}

/// Terms of E[P^n | ξ] valid on the demand interval that contains `xi`
/// (between consecutive capacity kinks), with affine coefficients.
pub(crate) fn price_pieces(stack: &TwoFuelStack, xi: f64, n: f64) -> [Piece; 3] {
    let (c, g) = (&stack.coal, &stack.gas);
    let j = stack.joint();
    let dk = c.k - g.k;
    // Z above `high`: coal alone below its capacity, else gas marginal
    // with coal saturated.
    let (high, top_piece) = if xi <= c.cap {
        (Affine::new(dk, c.m), Piece::new(1.0, n, 0.0, Affine::new(n * c.k, n * c.m)))
    } else {
        (
            Affine::new(dk + c.m * c.cap + g.m * c.cap, -g.m),
            Piece::new(1.0, 0.0, n, Affine::new(n * (g.k - g.m * c.cap), n * g.m)),
        )
    };
    // Z below `low`: gas alone, else coal marginal with gas saturated.
    let (low, bottom_piece) = if xi <= g.cap {
        (Affine::new(dk, -g.m), Piece::new(1.0, 0.0, n, Affine::new(n * g.k, n * g.m)))
    } else {
        (
            Affine::new(dk - c.m * g.cap - g.m * g.cap, c.m),
            Piece::new(1.0, n, 0.0, Affine::new(n * (c.k - c.m * g.cap), n * c.m)),
        )
    };
    let joint = Piece::new(1.0, n * j.alpha_c, n * j.alpha_g, Affine::new(n * j.beta, n * j.gamma))
        .above(low)
        .below(high);
    [top_piece.above(high), bottom_piece.below(low), joint]
}

/// Sorted, de-duplicated interior cut points of [0, cap] plus both ends.
pub(crate) fn demand_grid(cap: f64, inner: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = Vec::with_capacity(inner.len() + 2);
    v.push(0.0);
    v.extend(inner.iter().copied().filter(|&x| x > 0.0 && x < cap));
    v.push(cap);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stack::FuelBid;

    fn stack() -> TwoFuelStack {
        TwoFuelStack::new(FuelBid::new(2.0, 1.0, 0.6).unwrap(), FuelBid::new(2.3, 1.5, 0.4).unwrap()).unwrap()
    }

    #[test]
    fn deterministic_fuels_recover_spot() {
        let st = stack();
        let law = FuelTerminalLaw::new(2.0, 2.5, 0.0, 0.0, 0.0).unwrap();
        let pair = LogPair::new(&law);
        for i in 0..=50 {
            let xi = i as f64 / 50.0;
            let v: f64 = price_pieces(&st, xi, 1.0).iter().map(|p| eval_piece(p, &pair, xi)).sum();
            let spot = st.spot_price(xi, 2f64.exp(), 2.5f64.exp()).unwrap();
            assert!((v - spot).abs() < 1e-12 * spot, "xi {xi}: {v} vs {spot}");
        }
    }

    #[test]
    fn tilt_matches_lognormal_moments() {
        let law = FuelTerminalLaw::new(0.3, -0.2, 0.4, 0.25, -0.3).unwrap();
        let pair = LogPair::new(&law);
        let (fc, fg) = law.forwards();
        assert!((exp(pair.log_mass(1.0, 0.0)) - fc).abs() < 1e-14);
        assert!((exp(pair.log_mass(0.0, 1.0)) - fg).abs() < 1e-14);
        let s2 = law.spread_variance();
        assert!((pair.tilted_mean(1.0, 0.0) - ((fg / fc).ln() - 0.5 * s2)).abs() < 1e-14);
        assert!((pair.tilted_mean(0.0, 1.0) - ((fg / fc).ln() + 0.5 * s2)).abs() < 1e-14);
    }

    #[test]
    fn integral_matches_quadrature() {
        let st = stack();
        let law = FuelTerminalLaw::new(2.2, 2.4, 0.35, 0.2, 0.4).unwrap();
        let pair = LogPair::new(&law);
        let d = DemandLaw::new(0.45, 0.25, 1.0).unwrap();
        let grid = demand_grid(1.0, &[0.6, 0.4]);
        for w in grid.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            for p in price_pieces(&st, mid, 2.0) {
                let closed = integrate_piece(&p, &pair, &d, w[0], w[1]);
                let quad = crate::quad::integrate(
                    |x| eval_piece(&p, &pair, x) * d.driver_density(x),
                    w[0],
                    w[1],
                    &[],
                    crate::quad::Tolerance { abs: 0.0, rel: 1e-13 },
                )
                .unwrap();
                assert!((closed - quad).abs() <= 1e-10 * quad.abs().max(1.0), "{closed} vs {quad}");
            }
        }
    }
}

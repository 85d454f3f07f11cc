//! Gaussian distribution functions.
//!
//! The bivariate CDF is Genz's double precision refinement of the
//! Drezner-Wesolowsky Gauss-Legendre scheme (`BVND` in TVPACK). Absolute
//! error is below 1e-14 across the plane; correlations within 1e-12 of
//! ±1 are routed to the degenerate closed forms.
#![allow(clippy::excessive_precision)]

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::math::{exp, ln, sqrt};
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_4;

/// Correlations with |ρ| above this are treated as exactly ±1.
const DEGENERATE_RHO: f64 = 1.0 - 1e-12;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * exp(-0.5 * x * x)
}

/// Standard normal CDF Φ(x). Total on the extended reals.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
    }
}

/// Φ(hi) − Φ(lo) without cancellation in the upper tail.
pub fn norm_cdf_diff(hi: f64, lo: f64) -> f64 {
    if lo >= hi {
        return 0.0;
    }
    if lo > 0.0 {
        norm_cdf(-lo) - norm_cdf(-hi)
    } else {
        norm_cdf(hi) - norm_cdf(lo)
    }
}

/// Inverse standard normal CDF.
///
/// Acklam's rational approximation followed by one Halley step against
/// `erfc`, which brings the relative error to machine precision.
pub fn norm_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = if p < P_LOW {
        let q = sqrt(-2.0 * ln(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = sqrt(-2.0 * ln(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley refinement; the residual is taken on the smaller tail.
    let e = if x < 0.0 { norm_cdf(x) - p } else { (1.0 - p) - norm_cdf(-x) };
    let u = e * sqrt(TWO_PI) * exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Bivariate standard normal CDF Φ₂(x, y; ρ).
pub fn binorm_cdf(x: f64, y: f64, rho: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::CorrelationOutOfRange(rho));
    }
    Ok(bvn_cdf(x, y, rho))
}

/// Unchecked Φ₂ for callers that already validated `rho`.
pub(crate) fn bvn_cdf(x: f64, y: f64, rho: f64) -> f64 {
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return norm_cdf(y);
    }
    if y == f64::INFINITY {
        return norm_cdf(x);
    }
    if rho > DEGENERATE_RHO {
        return norm_cdf(x.min(y));
    }
    if rho < -DEGENERATE_RHO {
        return (norm_cdf(x) + norm_cdf(y) - 1.0).max(0.0);
    }
    bvnd(-x, -y, rho).clamp(0.0, 1.0)
}

// Gauss-Legendre half-rules (weight, abscissa) for 6, 12 and 20 points.
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705e+00, -0.9324695142031522e+00),
    (0.3607615730481384e+00, -0.6612093864662647e+00),
    (0.4679139345726904e+00, -0.2386191860831970e+00),
];
const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-01, -0.9815606342467191e+00),
    (0.1069393259953183e+00, -0.9041172563704750e+00),
    (0.1600783285433464e+00, -0.7699026741943050e+00),
    (0.2031674267230659e+00, -0.5873179542866171e+00),
    (0.2334925365383547e+00, -0.3678314989981802e+00),
    (0.2491470458134029e+00, -0.1252334085114692e+00),
];
const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, -0.9931285991850949e+00),
    (0.4060142980038694e-01, -0.9639719272779138e+00),
    (0.6267204833410906e-01, -0.9122344282513259e+00),
    (0.8327674157670475e-01, -0.8391169718222188e+00),
    (0.1019301198172404e+00, -0.7463319064601508e+00),
    (0.1181945319615184e+00, -0.6360536807265150e+00),
    (0.1316886384491766e+00, -0.5108670019508271e+00),
    (0.1420961093183821e+00, -0.3737060887154196e+00),
    (0.1491729864726037e+00, -0.2277858511416451e+00),
    (0.1527533871307259e+00, -0.7652652113349733e-01),
];

/// P(X > dh, Y > dk) for a standard bivariate normal with correlation `r`.
fn bvnd(dh: f64, dk: f64, r: f64) -> f64 {
    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let mut bvn = 0.0;

    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = libm::asin(r);
        for &(w, x) in rule {
            for s in [-1.0, 1.0] {
                let sn = libm::sin(asr * (s * x + 1.0) / 2.0);
                bvn += w * exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        return bvn * asr / (2.0 * TWO_PI) + norm_cdf(-h) * norm_cdf(-k);
    }

    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = sqrt(a_s);
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let asr = -(b_s / a_s + hk) / 2.0;
        if asr > -100.0 {
            bvn = a * exp(asr) * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        }
        if -hk < 100.0 {
            let b = sqrt(b_s);
            bvn -= exp(-hk / 2.0) * sqrt(TWO_PI) * norm_cdf(-b / a) * b * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a /= 2.0;
        for &(w, x) in rule {
            for s in [-1.0, 1.0] {
                let xs = (a * (s * x + 1.0)) * (a * (s * x + 1.0));
                let rs = sqrt(1.0 - xs);
                let asr = -(b_s / xs + hk) / 2.0;
                if asr > -100.0 {
                    bvn += a * w * exp(asr) * (exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / TWO_PI;
    }
    if r > 0.0 {
        bvn + norm_cdf(-h.max(k))
    } else {
        bvn = -bvn;
        if k > h {
            if h < 0.0 {
                bvn += norm_cdf(k) - norm_cdf(h);
            } else {
                bvn += norm_cdf(-h) - norm_cdf(-k);
            }
        }
        bvn
    }
}

/// Arguments of a difference-combination of bivariate CDFs sharing the
/// second argument and the correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct StripArgs {
    pub upper_rows: Vec<f64>,
    pub lower_rows: Vec<f64>,
    pub second_arg: f64,
    pub correlation: f64,
}

/// Σᵢ [Φ₂(upperᵢ, y; ρ) − Φ₂(lowerᵢ, y; ρ)].
pub fn binorm_strip(args: &StripArgs) -> Result<f64> {
    if args.upper_rows.len() != args.lower_rows.len() {
        return Err(Error::StripLengthMismatch {
            upper: args.upper_rows.len(),
            lower: args.lower_rows.len(),
        });
    }
    if args.upper_rows.is_empty() {
        return Err(Error::InvalidParameter { name: "upper_rows", reason: "strip needs at least one column" });
    }
    if !(-1.0..=1.0).contains(&args.correlation) {
        return Err(Error::CorrelationOutOfRange(args.correlation));
    }
    let (y, rho) = (args.second_arg, args.correlation);
    Ok(args
        .upper_rows
        .iter()
        .zip(&args.lower_rows)
        .map(|(&hi, &lo)| bvn_cdf(hi, y, rho) - bvn_cdf(lo, y, rho))
        .sum())
}

/// Closed form of ∫_{−∞}^{a} exp(l₁ + q₁x) φ(x) Φ(l₂ + q₂x) dx.
///
/// Equals exp(l₁ + q₁²/2) · Φ₂(a − q₁, (l₂ + q₁q₂)/√(1+q₂²); −q₂/√(1+q₂²)).
/// `a` may be `+∞`.
pub fn gaussian_exp_overlap(l1: f64, l2: f64, q1: f64, q2: f64, a: f64) -> f64 {
    let scale = sqrt(1.0 + q2 * q2);
    exp(l1 + 0.5 * q1 * q1) * bvn_cdf(a - q1, (l2 + q1 * q2) / scale, -q2 / scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_cdf_reference_points() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert_eq!(norm_cdf(f64::INFINITY), 1.0);
        assert_eq!(norm_cdf(f64::NEG_INFINITY), 0.0);
        assert!((norm_cdf(1.959964) - 0.975).abs() < 1e-6);
        // Φ(-2.5) to 16 digits.
        assert!((norm_cdf(-2.5) - 0.006_209_665_325_776_132).abs() < 1e-17);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.01, 0.02425, 0.3, 0.5, 0.77, 0.99, 1.0 - 1e-9] {
            let x = norm_quantile(p);
            let back = norm_cdf(x);
            assert!(((back - p) / p).abs() < 1e-13, "p={p} x={x} back={back}");
        }
        assert_eq!(norm_quantile(0.5), 0.0);
    }

    #[test]
    fn binorm_reference_values() {
        assert!((bvn_cdf(0.0, 0.0, 0.0) - 0.25).abs() < 1e-15);
        assert!((bvn_cdf(0.0, 0.0, 0.5) - 1.0 / 3.0).abs() < 1e-15);
        let r: f64 = -0.95;
        let exact = 0.25 + libm::asin(r) / TWO_PI;
        assert!((bvn_cdf(0.0, 0.0, r) - exact).abs() < 1e-15);
        assert!(binorm_cdf(0.0, 0.0, 1.5).is_err());
    }

    #[test]
    fn binorm_degenerate_correlations() {
        assert_eq!(bvn_cdf(0.3, -0.2, 1.0), norm_cdf(-0.2));
        assert!((bvn_cdf(0.3, -0.2, -1.0) - (norm_cdf(0.3) + norm_cdf(-0.2) - 1.0).max(0.0)).abs() < 1e-16);
        assert_eq!(bvn_cdf(-1.0, -1.0, -1.0), 0.0);
    }

    #[test]
    fn strip_examples() {
        let same = StripArgs { upper_rows: vec![0.4], lower_rows: vec![0.4], second_arg: 1.0, correlation: 0.3 };
        assert_eq!(binorm_strip(&same).unwrap(), 0.0);
        let marg = StripArgs {
            upper_rows: vec![f64::INFINITY],
            lower_rows: vec![f64::NEG_INFINITY],
            second_arg: 0.7,
            correlation: 0.0,
        };
        assert!((binorm_strip(&marg).unwrap() - norm_cdf(0.7)).abs() < 1e-16);
        let two = StripArgs {
            upper_rows: vec![0.0, 0.0],
            lower_rows: vec![f64::NEG_INFINITY, f64::NEG_INFINITY],
            second_arg: 0.0,
            correlation: 0.0,
        };
        assert!((binorm_strip(&two).unwrap() - 0.5).abs() < 1e-15);
        let bad = StripArgs { upper_rows: vec![0.0], lower_rows: vec![], second_arg: 0.0, correlation: 0.0 };
        assert!(matches!(binorm_strip(&bad), Err(Error::StripLengthMismatch { .. })));
    }

    #[test]
    fn overlap_trivial_cases() {
        assert!((gaussian_exp_overlap(0.0, 0.0, 0.0, 0.0, f64::INFINITY) - 0.5).abs() < 1e-15);
        let y = -0.37;
        let v = gaussian_exp_overlap(1.0, y, 0.0, 0.0, f64::INFINITY);
        assert!((v - core::f64::consts::E * norm_cdf(y)).abs() < 1e-14);
    }
}

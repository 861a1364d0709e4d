//! Univariate and bivariate standard normal primitives.
//!
//! Extended reals are plain `f64` values with `f64::INFINITY` and
//! `f64::NEG_INFINITY` as the explicit sentinels. The checked entry points
//! (`phi`, `cdf`, `quantile`, `bvn_rect`) validate their inputs; the
//! crate-internal fast paths assume validated arguments.
#![allow(clippy::excessive_precision)]

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398942280401432677939946059934381868;
const SQRT_2PI: f64 = 2.506628274631000502415765284811045253;

/// Correlations this close to ±1 use the degenerate one-dimensional law.
pub const DEGENERATE_RHO_EPS: f64 = 1e-12;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Prob(f64);

impl Prob {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Prob(value))
        } else {
            Err(Error::domain(format!("probability must lie in [0, 1], got {value}")))
        }
    }

    /// Clamps a computed value into `[0, 1]`; NaN maps to 0.
    pub(crate) fn clamped(value: f64) -> Self {
        Prob(if value.is_nan() { 0.0 } else { value.clamp(0.0, 1.0) })
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<Prob> for f64 {
    fn from(p: Prob) -> f64 {
        p.0
    }
}

/// A correlation coefficient in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Corr(f64);

impl Corr {
    pub fn new(value: f64) -> Result<Self> {
        if (-1.0..=1.0).contains(&value) {
            Ok(Corr(value))
        } else {
            Err(Error::domain(format!("correlation must lie in [-1, 1], got {value}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<Corr> for f64 {
    fn from(r: Corr) -> f64 {
        r.0
    }
}

// ---------------------------------------------------------------------------
// Unchecked fast paths

#[inline]
pub(crate) fn pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ(x). erfc keeps full relative accuracy in the lower tail.
#[inline]
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// 1 − Φ(x), accurate in the upper tail.
#[inline]
pub(crate) fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Φ(hi) − Φ(lo) for lo ≤ hi, evaluated on the side that avoids cancellation.
#[inline]
pub(crate) fn interval_prob(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let p = if lo >= 0.0 {
        norm_sf(lo) - norm_sf(hi)
    } else if hi <= 0.0 {
        norm_cdf(hi) - norm_cdf(lo)
    } else {
        1.0 - norm_cdf(lo) - norm_sf(hi)
    };
    p.max(0.0)
}

/// Φ⁻¹(p) without range checks. Jäckel's (2024) minimax rational
/// approximations followed by one Halley step against `norm_cdf`.
pub(crate) fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const U_MAX: f64 = 0.3413447460685429;
    let u = p - 0.5;
    let x0 = if u.abs() < U_MAX {
        ppf_central(u)
    } else if u > 0.0 {
        -ppf_lower_tail(1.0 - p)
    } else {
        ppf_lower_tail(p)
    };
    if p < 1e-300 {
        return x0;
    }
    // Halley refinement on whichever tail carries the precision.
    if p < 0.5 {
        let e = norm_cdf(x0) - p;
        let v = e * SQRT_2PI * (0.5 * x0 * x0).exp();
        x0 - v / (1.0 + 0.5 * x0 * v)
    } else {
        let e = norm_sf(x0) - (1.0 - p);
        let v = e * SQRT_2PI * (0.5 * x0 * x0).exp();
        x0 + v / (1.0 - 0.5 * x0 * v)
    }
}

fn ppf_central(u: f64) -> f64 {
    const U_MAX: f64 = 0.3413447460685429;
    let s = U_MAX * U_MAX - u * u;
    u * ((2.92958954698308805
        + s * (5.0260572167303103e1
            + s * (3.01870541922933937e2
                + s * (7.4997781456657924e2
                    + s * (6.90489242061408612e2
                        + s * (1.34233243502653864e2 - 7.58939881401259242 * s))))))
        / (1.0
            + s * (1.8918538074574598e1
                + s * (1.29404120448755281e2
                    + s * (3.86821208540417453e2
                        + s * (4.79123914509756757e2 + 1.79227008508102628e2 * s))))))
}

// Valid for p ≤ Φ(−1); returns x ≤ −1.
fn ppf_lower_tail(p: f64) -> f64 {
    let r = (-p.ln()).sqrt();
    if r < 2.05 {
        (3.691562302945566191
            + r * (4.7170590600740689449e1
                + r * (6.5451292110261454609e1
                    + r * (-7.4594687726045926821e1
                        + r * (-8.3383894003636969722e1 - 1.3054072340494093704e1 * r)))))
            / (1.0
                + r * (2.0837211328697753726e1
                    + r * (7.1813812182579255459e1
                        + r * (5.9270122556046077717e1
                            + r * (9.2216887978737432303 + 1.8295174852053530579e-4 * r)))))
    } else if r < 3.41 {
        (3.2340179116317970288
            + r * (1.449177828689122096e1
                + r * (6.8397370256591532878e-1
                    + r * (-1.81254427791789183e1
                        + r * (-1.005916339568646151e1 - 1.2013147879435525574 * r)))))
            / (1.0
                + r * (8.8820931773304337525
                    + r * (1.4656370665176799712e1
                        + r * (7.1369811056109768745
                            + r * (8.4884892199149255469e-1 + 1.0957576098829595323e-5 * r)))))
    } else if r < 6.7 {
        (3.1252235780087584807
            + r * (9.9483724317036560676
                + r * (-5.1633929115525534628
                    + r * (-1.1070534689309368061e1
                        + r * (-2.8699061335882526744 - 1.5414319494013597492e-1 * r)))))
            / (1.0
                + r * (7.076769154309171622
                    + r * (8.1086341122361532407
                        + r * (2.0307076064309043613
                            + r * (1.0897972234131828901e-1 + 1.3565983564441297634e-7 * r)))))
    } else if r < 12.9 {
        (2.6161264950897283681
            + r * (2.250881388987032271
                + r * (-3.688196041019692267
                    + r * (-2.9644251353150605663
                        + r * (-4.7595169546783216436e-1 - 1.612303318390145052e-2 * r)))))
            / (1.0
                + r * (3.2517455169035921495
                    + r * (2.1282030272153188194
                        + r * (3.3663746405626400164e-1
                            + r * (1.1400087282177594359e-2 + 3.0848093570966787291e-9 * r)))))
    } else {
        (2.3226849047872302955
            + r * (-4.2799650734502094297e-2
                + r * (-2.5894451568465728432
                    + r * (-8.6385181219213758847e-1
                        + r * (-6.5127593753781672404e-2 - 1.0566357727202585402e-3 * r)))))
            / (1.0
                + r * (1.9361316119254412206
                    + r * (6.1320841329197493341e-1
                        + r * (4.6054974512474443189e-2
                            + r * (7.471447992167225483e-4 + 2.3135343206304887818e-11 * r)))))
    }
}

// Gauss–Legendre half-rules (weight, abscissa) used by Genz's BVND.
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

/// P(X > h, Y > k) for a standard bivariate normal with correlation `r`,
/// |r| < 1, finite h and k. Drezner–Wesolowsky with Genz's double-precision
/// modifications; the rule order grows with |r|.
fn bvnd(h: f64, k: f64, r: f64) -> f64 {
    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let two_pi = 2.0 * PI;
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for &(w, x) in rule {
            let sn = (asr * (x + 1.0) / 2.0).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            let sn = (asr * (-x + 1.0) / 2.0).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        return bvn * asr / (2.0 * two_pi) + norm_cdf(-h) * norm_cdf(-k);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    let a_sq = (1.0 - r) * (1.0 + r);
    let mut a = a_sq.sqrt();
    let b_sq = (h - k) * (h - k);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 16.0;
    bvn = a
        * (-(b_sq / a_sq + hk) / 2.0).exp()
        * (1.0 - c * (b_sq - a_sq) * (1.0 - d * b_sq / 5.0) / 3.0 + c * d * a_sq * a_sq / 5.0);
    if hk > -160.0 {
        let b = b_sq.sqrt();
        bvn -= (-hk / 2.0).exp()
            * two_pi.sqrt()
            * norm_cdf(-b / a)
            * b
            * (1.0 - c * b_sq * (1.0 - d * b_sq / 5.0) / 3.0);
    }
    a /= 2.0;
    for &(w, x) in rule {
        let xs = (a * (x + 1.0)).powi(2);
        let rs = (1.0 - xs).sqrt();
        bvn += a
            * w
            * ((-b_sq / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                - (-(b_sq / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
        let xs = a_sq * (-x + 1.0).powi(2) / 4.0;
        let rs = (1.0 - xs).sqrt();
        bvn += a
            * w
            * (-(b_sq / xs + hk) / 2.0).exp()
            * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                - (1.0 + c * xs * (1.0 + d * xs)));
    }
    bvn = -bvn / two_pi;
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

/// Lower-orthant probability P(U ≤ x, V ≤ y) with corr(U, V) = r.
/// Accepts ±∞ bounds; |r| within `DEGENERATE_RHO_EPS` of 1 uses the
/// comonotone/countermonotone closed forms.
pub(crate) fn lower_orthant(x: f64, y: f64, r: f64) -> f64 {
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return norm_cdf(y);
    }
    if y == f64::INFINITY {
        return norm_cdf(x);
    }
    if r >= 1.0 - DEGENERATE_RHO_EPS {
        return norm_cdf(x.min(y));
    }
    if r <= -1.0 + DEGENERATE_RHO_EPS {
        return interval_prob(-y, x);
    }
    bvnd(-x, -y, r).clamp(0.0, 1.0)
}

/// Partial derivatives of `lower_orthant` with respect to x and y.
pub(crate) fn lower_orthant_grad(x: f64, y: f64, r: f64) -> (f64, f64) {
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return (0.0, 0.0);
    }
    if x == f64::INFINITY {
        return (0.0, pdf(y));
    }
    if y == f64::INFINITY {
        return (pdf(x), 0.0);
    }
    if r >= 1.0 - DEGENERATE_RHO_EPS {
        return if x < y {
            (pdf(x), 0.0)
        } else if y < x {
            (0.0, pdf(y))
        } else {
            (0.5 * pdf(x), 0.5 * pdf(y))
        };
    }
    if r <= -1.0 + DEGENERATE_RHO_EPS {
        return if x + y > 0.0 { (pdf(x), pdf(y)) } else { (0.0, 0.0) };
    }
    let s = ((1.0 - r) * (1.0 + r)).sqrt();
    (pdf(x) * norm_cdf((y - r * x) / s), pdf(y) * norm_cdf((x - r * y) / s))
}

// ---------------------------------------------------------------------------
// Checked public API

/// Standard normal density.
pub fn phi(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("phi requires a finite argument, got {x}")));
    }
    Ok(pdf(x))
}

/// Standard normal distribution function on the extended reals.
pub fn cdf(x: f64) -> Result<Prob> {
    if x.is_nan() {
        return Err(Error::domain("cdf argument is NaN"));
    }
    Ok(Prob::clamped(norm_cdf(x)))
}

/// Standard normal quantile; `quantile(0) = -inf`, `quantile(1) = +inf`.
pub fn quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("quantile requires p in [0, 1], got {p}")));
    }
    Ok(norm_ppf(p))
}

/// P(a_lo ≤ U ≤ a_hi, b_lo ≤ V ≤ b_hi) for a standard bivariate normal
/// pair with correlation `rho`, by inclusion–exclusion over lower orthants.
pub fn bvn_rect(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64, rho: f64) -> Result<Prob> {
    if [a_lo, a_hi, b_lo, b_hi].iter().any(|v| v.is_nan()) {
        return Err(Error::domain("rectangle bound is NaN"));
    }
    if a_lo > a_hi || b_lo > b_hi {
        return Err(Error::domain(format!(
            "inverted rectangle bounds: [{a_lo}, {a_hi}] x [{b_lo}, {b_hi}]"
        )));
    }
    let rho = Corr::new(rho)?.get();
    Ok(Prob::clamped(rect_unchecked(a_lo, a_hi, b_lo, b_hi, rho)))
}

pub(crate) fn rect_unchecked(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64, rho: f64) -> f64 {
    lower_orthant(a_hi, b_hi, rho) - lower_orthant(a_lo, b_hi, rho) - lower_orthant(a_hi, b_lo, rho)
        + lower_orthant(a_lo, b_lo, rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn phi_values() {
        assert_eq!(phi(0.0).unwrap(), 0.3989422804014327);
        assert_eq!(phi(1.0).unwrap(), phi(-1.0).unwrap());
        // 40-digit oracle: exp(-3.125)/sqrt(2 pi)
        assert!((phi(2.5).unwrap() - 0.01752830049356853736215832).abs() <= 1e-15);
        assert!(phi(INF).is_err());
        assert!(phi(f64::NAN).is_err());
    }

    #[test]
    fn cdf_values() {
        assert_eq!(cdf(0.0).unwrap().get(), 0.5);
        assert_eq!(cdf(INF).unwrap().get(), 1.0);
        assert_eq!(cdf(-INF).unwrap().get(), 0.0);
        assert!((cdf(1.6448536269514722).unwrap().get() - 0.95).abs() <= 1e-12);
        assert!(cdf(f64::NAN).is_err());
    }

    #[test]
    fn cdf_is_monotone_on_a_fine_grid() {
        let mut prev = 0.0;
        for i in -40_000..=40_000 {
            let v = norm_cdf(i as f64 * 2.5e-4);
            assert!(v >= prev, "inversion at {}", i);
            prev = v;
        }
    }

    #[test]
    fn quantile_values() {
        assert_eq!(quantile(0.5).unwrap(), 0.0);
        assert!((quantile(0.95).unwrap() - 1.6448536269514722).abs() <= 1e-10);
        assert!((quantile(0.975).unwrap() - 1.959963984540054).abs() <= 1e-10);
        assert_eq!(quantile(0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(quantile(1.0).unwrap(), INF);
        assert!(quantile(1.5).is_err());
        assert!(quantile(-0.1).is_err());
    }

    #[test]
    fn bvn_rect_simple_cases() {
        let v = bvn_rect(-INF, 0.0, -INF, 0.0, 0.0).unwrap().get();
        assert!((v - 0.25).abs() < 1e-15);
        for &x in &[-2.0, -0.3, 0.0, 1.1, 3.0] {
            let v = bvn_rect(-INF, x, -INF, x, 1.0).unwrap().get();
            assert!((v - norm_cdf(x)).abs() < 1e-15);
        }
        assert!(bvn_rect(1.0, 0.0, -INF, 0.0, 0.0).is_err());
        assert!(bvn_rect(0.0, 1.0, -INF, 0.0, 1.5).is_err());
    }

    #[test]
    fn lower_orthant_matches_high_precision_values() {
        // 40-digit quadrature of phi(t) Phi((y - r t)/sqrt(1 - r^2)).
        let cases = [
            (1.0, 1.0, 0.5, 0.7452035868467497309629061),
            (-2.0, -3.0, -0.95, 9.153017441877151749212401e-59),
            (0.5, -1.0, 0.97, 0.158655253924676822604872),
            (-5.0, -5.0, 0.999, 2.601796211494632801952298e-7),
            (1.3, -0.4, -0.6, 0.2685569312228330515194673),
            (2.0, 2.0, -0.99, 0.9544997361036415855994347),
            (-1.0, 2.0, 0.2, 0.1571400558493951155063243),
            (-3.0, -1.0, 0.93, 0.001349897879295966749679622),
            (0.0, 0.0, -0.926, 0.06161213121375339531879666),
            (-8.0, -8.0, 0.9999, 5.936066284283378556685329e-16),
            (3.0, -3.0, -0.97, 0.0004244943011545615672958622),
        ];
        for (x, y, r, want) in cases {
            let got = lower_orthant(x, y, r);
            assert!((got - want).abs() < 1e-14, "({x}, {y}, {r}): {got} vs {want}");
            assert!((lower_orthant(y, x, r) - got).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = 1e-6;
        for &(x, y, r) in &[(0.3, -0.2, 0.4), (1.5, 0.7, -0.8), (-0.5, 1.0, 0.95), (0.2, 0.9, -0.97)] {
            let (gx, gy) = lower_orthant_grad(x, y, r);
            let fx = (lower_orthant(x + h, y, r) - lower_orthant(x - h, y, r)) / (2.0 * h);
            let fy = (lower_orthant(x, y + h, r) - lower_orthant(x, y - h, r)) / (2.0 * h);
            assert!((gx - fx).abs() < 1e-8, "{gx} {fx}");
            assert!((gy - fy).abs() < 1e-8, "{gy} {fy}");
        }
    }

    #[test]
    fn degenerate_correlations_are_continuous() {
        for &(x, y) in &[(0.4, 1.2), (-0.7, 0.3), (1.0, -0.2)] {
            let near = lower_orthant(x, y, 1.0 - 1e-9);
            assert!((near - lower_orthant(x, y, 1.0)).abs() < 1e-4);
            let near = lower_orthant(x, y, -1.0 + 1e-9);
            assert!((near - lower_orthant(x, y, -1.0)).abs() < 1e-4);
        }
    }
}

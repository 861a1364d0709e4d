//! Confidence intervals for a partially identified parameter from a realized
//! bounds-estimator tuple.

use crate::critical::{solve_c1, solve_c2, Alpha};
use crate::error::{Error, Result};
use crate::normal::Corr;

/// Realized estimates of the identified-set bounds, their asymptotic
/// standard deviations and correlation, and the sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorTuple {
    theta_l_hat: f64,
    theta_u_hat: f64,
    sigma_l_hat: f64,
    sigma_u_hat: f64,
    rho_hat: Corr,
    n: u64,
}

impl EstimatorTuple {
    /// Rejects unordered bounds rather than clipping them.
    pub fn new(
        theta_l_hat: f64,
        theta_u_hat: f64,
        sigma_l_hat: f64,
        sigma_u_hat: f64,
        rho_hat: Corr,
        n: u64,
    ) -> Result<Self> {
        if !theta_l_hat.is_finite() || !theta_u_hat.is_finite() {
            return Err(Error::domain("bound estimates must be finite"));
        }
        if theta_l_hat > theta_u_hat {
            return Err(Error::domain(format!(
                "lower bound estimate {theta_l_hat} exceeds upper bound estimate {theta_u_hat}"
            )));
        }
        for (name, s) in [("sigma_l_hat", sigma_l_hat), ("sigma_u_hat", sigma_u_hat)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::domain(format!("{name} must be a positive finite real, got {s}")));
            }
        }
        if n == 0 {
            return Err(Error::domain("sample size must be positive"));
        }
        Ok(EstimatorTuple { theta_l_hat, theta_u_hat, sigma_l_hat, sigma_u_hat, rho_hat, n })
    }

    pub fn theta_l_hat(&self) -> f64 {
        self.theta_l_hat
    }

    pub fn theta_u_hat(&self) -> f64 {
        self.theta_u_hat
    }

    pub fn sigma_l_hat(&self) -> f64 {
        self.sigma_l_hat
    }

    pub fn sigma_u_hat(&self) -> f64 {
        self.sigma_u_hat
    }

    pub fn rho_hat(&self) -> Corr {
        self.rho_hat
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    fn root_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    /// √N (θ̂_u − θ̂_l).
    pub fn scaled_width(&self) -> f64 {
        self.root_n() * (self.theta_u_hat - self.theta_l_hat)
    }

    fn widen(&self, c_l: f64, c_u: f64) -> Interval {
        let rn = self.root_n();
        Interval {
            lo: self.theta_l_hat - self.sigma_l_hat * c_l / rn,
            hi: self.theta_u_hat + self.sigma_u_hat * c_u / rn,
        }
    }
}

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::domain(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `[θ̂_l − σ̂_l c¹/√N, θ̂_u + σ̂_u c¹/√N]`. The correlation is not used.
pub fn build_ci1(est: &EstimatorTuple, alpha: Alpha) -> Result<Interval> {
    let c = solve_c1(est.scaled_width(), est.sigma_l_hat, est.sigma_u_hat, alpha)?.c;
    Ok(est.widen(c, c))
}

/// `[θ̂_l − σ̂_l c_l²/√N, θ̂_u + σ̂_u c_u²/√N]`.
pub fn build_ci2(est: &EstimatorTuple, alpha: Alpha) -> Result<Interval> {
    let p = solve_c2(est.scaled_width(), est.sigma_l_hat, est.sigma_u_hat, est.rho_hat, alpha)?;
    Ok(est.widen(p.c_l, p.c_u))
}

/// Closed-interval membership.
pub fn covers(ci: &Interval, theta: f64) -> bool {
    ci.lo <= theta && theta <= ci.hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corr(r: f64) -> Corr {
        Corr::new(r).unwrap()
    }

    fn a05() -> Alpha {
        Alpha::new(0.05).unwrap()
    }

    #[test]
    fn rejects_unordered_and_bad_scales() {
        assert!(EstimatorTuple::new(1.0, 0.0, 1.0, 1.0, corr(0.0), 10).unwrap_err().is_domain());
        assert!(EstimatorTuple::new(0.0, 1.0, 0.0, 1.0, corr(0.0), 10).is_err());
        assert!(EstimatorTuple::new(0.0, 1.0, 1.0, 1.0, corr(0.0), 0).is_err());
        assert!(Interval::new(1.0, 0.0).is_err());
    }

    #[test]
    fn point_identified_case() {
        let est = EstimatorTuple::new(0.0, 0.0, 1.0, 1.0, corr(1.0), 100).unwrap();
        let ci1 = build_ci1(&est, a05()).unwrap();
        assert!((ci1.lo + 0.1959963984540054).abs() < 1e-12);
        assert!((ci1.hi - 0.1959963984540054).abs() < 1e-12);
        let ci2 = build_ci2(&est, a05()).unwrap();
        assert!((ci2.lo - ci1.lo).abs() < 1e-12 && (ci2.hi - ci1.hi).abs() < 1e-12);
    }

    #[test]
    fn wide_set_uses_one_sided_quantile() {
        let z = 1.6448536269514722;
        let est = EstimatorTuple::new(0.0, 1.0, 1.0, 1.0, corr(0.0), 10_000).unwrap();
        let ci1 = build_ci1(&est, a05()).unwrap();
        assert!((ci1.lo + z / 100.0).abs() < 1e-12 && (ci1.hi - 1.0 - z / 100.0).abs() < 1e-12);
        let ci2 = build_ci2(&est, a05()).unwrap();
        assert!((ci2.lo + z / 100.0).abs() < 1e-12 && (ci2.hi - 1.0 - z / 100.0).abs() < 1e-12);
    }

    #[test]
    fn ci1_endpoints_from_bisected_critical_value() {
        // Bisection on Φ(c + 2/2) − Φ(−c) = 0.95 (√N·width = 2, max σ = 2).
        let f = |c: f64| crate::normal::norm_cdf(c + 1.0) - crate::normal::norm_cdf(-c) - 0.95;
        let (mut lo, mut hi) = (0.0, 4.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f(m) < 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        let c = 0.5 * (lo + hi);
        let est = EstimatorTuple::new(0.0, 0.2, 1.0, 2.0, corr(0.3), 100).unwrap();
        let ci = build_ci1(&est, a05()).unwrap();
        assert!((ci.lo + c / 10.0).abs() < 1e-8 && (ci.hi - 0.2 - 2.0 * c / 10.0).abs() < 1e-8);
    }

    #[test]
    fn covers_is_closed() {
        let ci = Interval::new(0.0, 1.0).unwrap();
        assert!(covers(&ci, 0.0));
        assert!(covers(&ci, 0.5));
        assert!(covers(&ci, 1.0));
        assert!(!covers(&ci, 1.0000001));
    }

    fn tuple() -> impl Strategy<Value = EstimatorTuple> {
        (-5.0f64..5.0, 0.0f64..0.5, 0.2f64..3.0, 0.2f64..3.0, -1.0f64..=1.0, 1u64..5000).prop_map(
            |(l, w, sl, su, r, n)| EstimatorTuple::new(l, l + w, sl, su, corr(r), n).unwrap(),
        )
    }

    proptest! {
        #[test]
        fn intervals_contain_estimates_and_ci2_is_shorter(est in tuple(), a in 0.01f64..0.3) {
            let alpha = Alpha::new(a).unwrap();
            let ci1 = build_ci1(&est, alpha).unwrap();
            let ci2 = build_ci2(&est, alpha).unwrap();
            for ci in [ci1, ci2] {
                prop_assert!(ci.lo <= est.theta_l_hat() && ci.hi >= est.theta_u_hat());
            }
            prop_assert!(ci2.length() <= ci1.length() + 1e-8);
        }

        #[test]
        fn scale_equivariance(est in tuple(), k in 0.1f64..10.0) {
            let scaled = EstimatorTuple::new(
                k * est.theta_l_hat(), k * est.theta_u_hat(), k * est.sigma_l_hat(),
                k * est.sigma_u_hat(), est.rho_hat(), est.n(),
            ).unwrap();
            for build in [build_ci1, build_ci2] {
                let a = build(&est, a05()).unwrap();
                let b = build(&scaled, a05()).unwrap();
                for (x, y) in [(a.lo, b.lo), (a.hi, b.hi)] {
                    prop_assert!((k * x - y).abs() <= 1e-10 * (k * x).abs().max(1.0), "{x} {y} {k}");
                }
            }
        }

        #[test]
        fn builders_are_deterministic(est in tuple()) {
            for build in [build_ci1, build_ci2] {
                let a = build(&est, a05()).unwrap();
                let b = build(&est, a05()).unwrap();
                prop_assert_eq!(a.lo.to_bits(), b.lo.to_bits());
                prop_assert_eq!(a.hi.to_bits(), b.hi.to_bits());
            }
        }
    }
}

//! Limiting coverage probabilities of CI¹ under drifting alternatives.
//!
//! A sequence of true parameters θ_N below the identified set satisfies
//! √N(θ_u − θ_l) → μ and √N(θ_l − θ_N) → Ψ. Along such sequences the
//! coverage probability of CI¹ converges to W(σ_l, σ_u, ρ, μ, Ψ); the only
//! reachable limits are μ = ∞ and, for finite μ, ρ = 1 with σ_l = σ_u, where
//! W reduces to H(σ, μ, Ψ).

use rayon::prelude::*;

use crate::critical::{g_prime, solve_c1, solve_g, Alpha, LARGE_DELTA_FACTOR};
use crate::error::{Error, Result};
use crate::normal::{interval_prob, norm_cdf, Corr, Prob, DEGENERATE_RHO_EPS};
use crate::quad::integrate;

/// Limits of the scaled identified-set width (μ) and of the scaled distance
/// from the true parameter to the violated bound (Ψ). Either may be +∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftParams {
    mu: f64,
    psi: f64,
}

impl DriftParams {
    pub fn new(mu: f64, psi: f64) -> Result<Self> {
        for (name, v) in [("mu", mu), ("psi", psi)] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::domain(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(DriftParams { mu, psi })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }
}

/// Limiting standard deviations and correlation of the bounds estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSigmas {
    sigma_l: f64,
    sigma_u: f64,
    rho: Corr,
}

impl LimitSigmas {
    pub fn new(sigma_l: f64, sigma_u: f64, rho: Corr) -> Result<Self> {
        for (name, s) in [("sigma_l", sigma_l), ("sigma_u", sigma_u)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::domain(format!("{name} must be a positive finite real, got {s}")));
            }
        }
        Ok(LimitSigmas { sigma_l, sigma_u, rho })
    }

    pub fn sigma_l(&self) -> f64 {
        self.sigma_l
    }

    pub fn sigma_u(&self) -> f64 {
        self.sigma_u
    }

    pub fn rho(&self) -> Corr {
        self.rho
    }

    /// Whether both standard deviations lie in `[lower, upper]`.
    pub fn within(&self, lower: f64, upper: f64) -> bool {
        [self.sigma_l, self.sigma_u].iter().all(|&s| lower <= s && s <= upper)
    }

    fn is_degenerate(&self) -> bool {
        self.rho.get() >= 1.0 - DEGENERATE_RHO_EPS
            && (self.sigma_l - self.sigma_u).abs() <= DEGENERATE_RHO_EPS * self.sigma_l.max(self.sigma_u)
    }

    fn mu_is_infinite(&self, mu: f64) -> bool {
        mu > LARGE_DELTA_FACTOR * self.sigma_l.max(self.sigma_u)
    }
}

/// The confidence interval whose limiting coverage is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitCi {
    Ci1,
}

/// How `eval_w_with` evaluates the limiting probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WMethod {
    /// The closed forms Φ(z₁₋α − Ψ/σ_l) and H.
    ClosedForm,
    /// Nested adaptive quadrature of the defining event over (z₁, z₂).
    Quadrature,
}

/// G(y), the unique c > 0 solving Φ(c + y) − Φ(−c) = 1 − α.
pub fn eval_g(y: f64, alpha: Alpha) -> Result<f64> {
    Ok(solve_g(y, alpha)?.c)
}

/// G′(y).
pub fn eval_g_prime(y: f64, alpha: Alpha) -> Result<f64> {
    g_prime(y, alpha)
}

/// H(σ, μ, Ψ) = Φ((Ψ + μ)/σ + G(μ/σ)) − Φ(Ψ/σ − G(μ/σ)); zero at Ψ = ∞.
pub fn eval_h(sigma: f64, mu: f64, psi: f64, alpha: Alpha) -> Result<Prob> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be a positive finite real, got {sigma}")));
    }
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::domain(format!("mu must be finite and nonnegative, got {mu}")));
    }
    if psi.is_nan() || psi < 0.0 {
        return Err(Error::domain(format!("psi must be nonnegative, got {psi}")));
    }
    if psi == f64::INFINITY {
        return Ok(Prob::clamped(0.0));
    }
    let g = solve_g(mu / sigma, alpha)?.c;
    Ok(Prob::clamped(interval_prob(psi / sigma - g, (psi + mu) / sigma + g)))
}

/// Limiting coverage W(σ_l, σ_u, ρ, μ, Ψ) in closed form.
pub fn eval_w(sig: &LimitSigmas, drift: &DriftParams, alpha: Alpha, ci: LimitCi) -> Result<Prob> {
    eval_w_with(sig, drift, alpha, ci, WMethod::ClosedForm)
}

/// Limiting coverage W by the chosen method. Finite μ is only reachable with
/// ρ = 1 and σ_l = σ_u; other finite-μ inputs are rejected.
pub fn eval_w_with(
    sig: &LimitSigmas,
    drift: &DriftParams,
    alpha: Alpha,
    ci: LimitCi,
    method: WMethod,
) -> Result<Prob> {
    let LimitCi::Ci1 = ci;
    if !sig.mu_is_infinite(drift.mu) && !sig.is_degenerate() {
        return Err(Error::UnreachableLimit {
            rho: sig.rho.get(),
            sigma_l: sig.sigma_l,
            sigma_u: sig.sigma_u,
        });
    }
    match method {
        WMethod::ClosedForm => {
            if sig.mu_is_infinite(drift.mu) {
                Ok(w_mu_infinity(sig, drift.psi, alpha))
            } else {
                eval_h(sig.sigma_l, drift.mu, drift.psi, alpha)
            }
        }
        WMethod::Quadrature => w_quadrature(sig, drift, alpha),
    }
}

/// Φ(Φ⁻¹(1 − α) − Ψ/σ_l).
pub fn w_mu_infinity(sig: &LimitSigmas, psi: f64, alpha: Alpha) -> Prob {
    Prob::clamped(norm_cdf(alpha.one_sided_z() - psi / sig.sigma_l))
}

/// Membership of (z₁, z₂) in the event whose probability defines W, with
/// the critical value F(x) = c¹(x, σ_l, σ_u) evaluated at the realized
/// x = z₂σ_u√(1−ρ²) + z₁(ρσ_u − σ_l) + μ. Negative x (possible only off the
/// reachable regimes) is an error.
pub fn w_event(sig: &LimitSigmas, drift: &DriftParams, alpha: Alpha, z1: f64, z2: f64) -> Result<bool> {
    let (sl, su, rho) = (sig.sigma_l, sig.sigma_u, sig.rho.get());
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let mu_inf = drift.mu == f64::INFINITY || sig.mu_is_infinite(drift.mu);
    let x = if mu_inf { f64::INFINITY } else { z2 * su * s + z1 * (rho * su - sl) + drift.mu };
    let x = if x < 0.0 && x > -1e-12 { 0.0 } else { x };
    let f = solve_c1(x, sl, su, alpha)?.c;
    let psi = drift.psi;
    let lower_ok = -f <= -z1 - psi / sl;
    let upper_ok = mu_inf || -psi / su <= z2 * s + z1 * rho + drift.mu / su + f;
    Ok(lower_ok && upper_ok)
}

/// Standard-normal mass outside [−QUAD_BOX, QUAD_BOX] is below 1e−18.
const QUAD_BOX: f64 = 9.0;

fn w_quadrature(sig: &LimitSigmas, drift: &DriftParams, alpha: Alpha) -> Result<Prob> {
    if drift.psi == f64::INFINITY {
        return Ok(Prob::clamped(0.0));
    }
    let inner = |z1: f64| -> Result<f64> {
        let (v, _) = integrate(
            |z2| Ok(if w_event(sig, drift, alpha, z1, z2)? { crate::normal::pdf(z2) } else { 0.0 }),
            -QUAD_BOX,
            QUAD_BOX,
            1e-11,
            400,
        )?;
        Ok(crate::normal::pdf(z1) * v)
    };
    let (v, _) = integrate(inner, -QUAD_BOX, QUAD_BOX, 1e-9, 400)?;
    Ok(Prob::clamped(v))
}

/// One adjacent-σ pair at which H decreased by more than the tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HViolation {
    pub sigma_1: f64,
    pub sigma_2: f64,
    pub mu: f64,
    pub psi: f64,
    pub h_1: f64,
    pub h_2: f64,
}

/// Outcome of a monotonicity scan of H in σ.
#[derive(Debug, Clone, PartialEq)]
pub struct HScanReport {
    pub pairs_checked: usize,
    pub violations: Vec<HViolation>,
}

/// Tolerance for weak increase in σ.
pub const H_SCAN_TOL: f64 = 1e-10;

/// Checks H(σ₁) ≤ H(σ₂) + 1e−10 for every adjacent pair σ₁ < σ₂ sharing the
/// same (μ, Ψ). Evaluation runs in parallel; the report is order-independent.
pub fn h_monotonicity_scan(grid: &[(f64, f64, f64)], alpha: Alpha) -> Result<HScanReport> {
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&(s, mu, psi)| eval_h(s, mu, psi, alpha).map(Prob::get))
        .collect::<Result<_>>()?;
    Ok(pair_violations(grid, &values))
}

fn pair_violations(grid: &[(f64, f64, f64)], values: &[f64]) -> HScanReport {
    let mut rows: Vec<(f64, f64, f64, f64)> =
        grid.iter().zip(values).map(|(&(s, mu, psi), &h)| (mu, psi, s, h)).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let mut report = HScanReport { pairs_checked: 0, violations: Vec::new() };
    for w in rows.windows(2) {
        let ((mu1, psi1, s1, h1), (mu2, psi2, s2, h2)) = (w[0], w[1]);
        if mu1 != mu2 || psi1 != psi2 || s1 == s2 {
            continue;
        }
        report.pairs_checked += 1;
        if h1 > h2 + H_SCAN_TOL {
            report.violations.push(HViolation { sigma_1: s1, sigma_2: s2, mu: mu1, psi: psi1, h_1: h1, h_2: h2 });
        }
    }
    report
}

/// Limiting coverage of CI¹ built from the efficient and the inefficient
/// estimators at the same alternative. Requires σ^E ≤ σ^I componentwise.
pub fn power_dominance_limit(
    sig_e: &LimitSigmas,
    sig_i: &LimitSigmas,
    drift: &DriftParams,
    alpha: Alpha,
) -> Result<(Prob, Prob)> {
    if sig_e.sigma_l > sig_i.sigma_l || sig_e.sigma_u > sig_i.sigma_u {
        return Err(Error::domain(format!(
            "efficient standard deviations ({}, {}) must not exceed inefficient ones ({}, {})",
            sig_e.sigma_l, sig_e.sigma_u, sig_i.sigma_l, sig_i.sigma_u
        )));
    }
    let e = eval_w(sig_e, drift, alpha, LimitCi::Ci1)?;
    let i = eval_w(sig_i, drift, alpha, LimitCi::Ci1)?;
    if e.get() > i.get() + 1e-9 {
        return Err(Error::solver(
            "limiting coverage ordering violated",
            format!("efficient {} > inefficient {}", e.get(), i.get()),
        ));
    }
    Ok((e, i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervals::{build_ci1, covers, EstimatorTuple};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn a(x: f64) -> Alpha {
        Alpha::new(x).unwrap()
    }

    fn sig(sl: f64, su: f64, rho: f64) -> LimitSigmas {
        LimitSigmas::new(sl, su, Corr::new(rho).unwrap()).unwrap()
    }

    fn drift(mu: f64, psi: f64) -> DriftParams {
        DriftParams::new(mu, psi).unwrap()
    }

    #[test]
    fn h_examples() {
        assert!((eval_h(1.0, 0.0, 0.0, a(0.05)).unwrap().get() - 0.95).abs() < 1e-12);
        assert_eq!(eval_h(1.0, 1.0, f64::INFINITY, a(0.05)).unwrap().get(), 0.0);
        assert!(eval_h(0.0, 1.0, 1.0, a(0.05)).unwrap_err().is_domain());
        assert!(eval_h(1.0, f64::INFINITY, 1.0, a(0.05)).is_err());
    }

    #[test]
    fn h_matches_simulated_degenerate_procedure() {
        // ρ = 1, σ_l = σ_u = 1.5: θ̂_l and θ̂_u share one normal draw. The true
        // parameter sits Ψ/√n below θ_l and the set has scaled width μ.
        let (s, mu, psi, n) = (1.5, 0.5, 2.0, 400u64);
        let rn = (n as f64).sqrt();
        let (theta_l, theta_u, theta) = (0.0, mu / rn, -psi / rn);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let reps = 1_000_000;
        let mut hits = 0u64;
        for _ in 0..reps {
            let z: f64 = StandardNormal.sample(&mut rng);
            let e = s * z / rn;
            let est = EstimatorTuple::new(theta_l + e, theta_u + e, s, s, Corr::new(1.0).unwrap(), n).unwrap();
            if covers(&build_ci1(&est, a(0.05)).unwrap(), theta) {
                hits += 1;
            }
        }
        let p = hits as f64 / reps as f64;
        let h = eval_h(s, mu, psi, a(0.05)).unwrap().get();
        let se = (h * (1.0 - h) / reps as f64).sqrt();
        assert!((p - h).abs() <= 3.0 * se, "simulated {p} vs H {h} (se {se})");
    }

    #[test]
    fn w_examples() {
        let w = eval_w(&sig(1.0, 1.0, 0.7), &drift(f64::INFINITY, 0.0), a(0.05), LimitCi::Ci1).unwrap();
        assert!((w.get() - 0.95).abs() < 1e-12);
        let w = eval_w(&sig(1.0, 1.0, 1.0), &drift(0.0, 0.0), a(0.05), LimitCi::Ci1).unwrap();
        assert!((w.get() - 0.95).abs() < 1e-12);
        let w = eval_w(&sig(1.0, 1.0, 0.7), &drift(f64::INFINITY, 1.2), a(0.05), LimitCi::Ci1).unwrap();
        assert!((w.get() - norm_cdf(1.6448536269514722 - 1.2)).abs() < 1e-14);
    }

    #[test]
    fn w_rejects_unreachable_finite_mu() {
        let e = eval_w(&sig(1.0, 1.0, 0.5), &drift(1.0, 1.0), a(0.05), LimitCi::Ci1).unwrap_err();
        assert!(matches!(e, Error::UnreachableLimit { .. }));
        let e = eval_w(&sig(1.0, 2.0, 1.0), &drift(1.0, 1.0), a(0.05), LimitCi::Ci1).unwrap_err();
        assert!(e.is_domain());
        // Large finite μ routes to the μ = ∞ form.
        assert!(eval_w(&sig(1.0, 2.0, 0.5), &drift(100.0, 1.0), a(0.05), LimitCi::Ci1).is_ok());
    }

    fn legal_points() -> Vec<(LimitSigmas, DriftParams, Alpha)> {
        vec![
            (sig(1.0, 1.0, 1.0), drift(0.0, 0.0), a(0.05)),
            (sig(1.5, 1.5, 1.0), drift(0.5, 2.0), a(0.05)),
            (sig(0.7, 0.7, 1.0), drift(2.0, 0.3), a(0.10)),
            (sig(2.0, 2.0, 1.0), drift(1.0, 1.0), a(0.01)),
            (sig(1.0, 1.0, 1.0), drift(5.0, 0.5), a(0.05)),
            (sig(1.0, 1.3, 0.7), drift(f64::INFINITY, 0.0), a(0.05)),
            (sig(1.0, 1.3, 0.7), drift(f64::INFINITY, 1.2), a(0.05)),
            (sig(2.0, 0.5, -0.4), drift(f64::INFINITY, 3.0), a(0.10)),
            (sig(0.8, 1.0, 0.0), drift(f64::INFINITY, 0.5), a(0.01)),
            (sig(1.2, 1.2, 0.3), drift(f64::INFINITY, 2.5), a(0.05)),
        ]
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for (s, d, al) in legal_points() {
            let closed = eval_w(&s, &d, al, LimitCi::Ci1).unwrap().get();
            let quad = eval_w_with(&s, &d, al, LimitCi::Ci1, WMethod::Quadrature).unwrap().get();
            assert!((closed - quad).abs() < 1e-6, "{s:?} {d:?}: closed {closed} quad {quad}");
        }
    }

    #[test]
    fn closed_form_matches_simulated_event() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let reps = 1_000_000;
        for (s, d, al) in legal_points() {
            let mut hits = 0u64;
            for _ in 0..reps {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                if w_event(&s, &d, al, z1, z2).unwrap() {
                    hits += 1;
                }
            }
            let p = hits as f64 / reps as f64;
            let w = eval_w(&s, &d, al, LimitCi::Ci1).unwrap().get();
            let se = (w * (1.0 - w) / reps as f64).sqrt();
            assert!((p - w).abs() <= 3.0 * se, "{s:?} {d:?}: simulated {p} vs {w}");
        }
    }

    #[test]
    fn g_prime_matches_finite_differences() {
        let h = 1e-5;
        for al in [a(0.05), a(0.10)] {
            for y in [0.0f64, 0.5, 1.0, 2.0, 5.0] {
                let hi = eval_g(y + h, al).unwrap();
                // The defining equation extends to y < 0 with G(−h) = G(h) + h.
                let lo = if y == 0.0 { hi + h } else { eval_g(y - h, al).unwrap() };
                let fd = (hi - lo) / (2.0 * h);
                assert!((eval_g_prime(y, al).unwrap() - fd).abs() <= 1e-5, "y = {y}");
            }
        }
    }

    #[test]
    fn scan_examples() {
        let mut grid = Vec::new();
        for s in [0.5, 1.0, 2.0] {
            for mu in [0.0, 1.0] {
                for psi in [0.0, 1.0, 5.0] {
                    grid.push((s, mu, psi));
                }
            }
        }
        let r = h_monotonicity_scan(&grid, a(0.05)).unwrap();
        assert_eq!(r.pairs_checked, 12);
        assert!(r.violations.is_empty());

        let r = h_monotonicity_scan(&[(1.0, 0.5, 1.0)], a(0.05)).unwrap();
        assert_eq!(r.pairs_checked, 0);

        let dense: Vec<_> = (0..=250).map(|i| (0.5 + 0.01 * i as f64, 0.7, 2.0)).collect();
        let r = h_monotonicity_scan(&dense, a(0.10)).unwrap();
        assert_eq!(r.pairs_checked, 250);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn pairing_reports_decreases_within_matching_drift() {
        let grid = [(2.0, 0.0, 1.0), (1.0, 0.0, 1.0), (1.5, 0.0, 1.0), (1.0, 1.0, 1.0), (2.0, 1.0, 1.0)];
        let values = [0.9, 0.7, 0.6, 0.1, 0.2];
        let r = pair_violations(&grid, &values);
        assert_eq!(r.pairs_checked, 3);
        assert_eq!(r.violations.len(), 1);
        let v = r.violations[0];
        assert_eq!((v.sigma_1, v.sigma_2, v.h_1, v.h_2), (1.0, 1.5, 0.7, 0.6));
    }

    #[test]
    fn dominance_examples() {
        let d = drift(0.5, 2.0);
        let (e, i) = power_dominance_limit(&sig(1.0, 1.0, 1.0), &sig(1.5, 1.5, 1.0), &d, a(0.05)).unwrap();
        assert_eq!(e.get(), eval_h(1.0, 0.5, 2.0, a(0.05)).unwrap().get());
        assert_eq!(i.get(), eval_h(1.5, 0.5, 2.0, a(0.05)).unwrap().get());
        assert!(e.get() < i.get());

        let (e, i) = power_dominance_limit(&sig(1.0, 1.0, 1.0), &sig(1.0, 1.0, 1.0), &d, a(0.05)).unwrap();
        assert!((e.get() - i.get()).abs() < 1e-12);

        let d = drift(f64::INFINITY, 1.0);
        let (e, i) = power_dominance_limit(&sig(1.0, 1.0, 0.3), &sig(2.0, 1.5, 0.5), &d, a(0.05)).unwrap();
        assert!((e.get() - norm_cdf(1.6448536269514722 - 1.0)).abs() < 1e-14);
        assert!((i.get() - norm_cdf(1.6448536269514722 - 0.5)).abs() < 1e-14);
        assert!(e.get() < i.get());

        assert!(power_dominance_limit(&sig(2.0, 1.0, 1.0), &sig(1.0, 1.0, 1.0), &d, a(0.05))
            .unwrap_err()
            .is_domain());
    }

    proptest! {
        #[test]
        fn h_is_a_probability_with_boundary_coverage(s in 0.1f64..5.0, mu in 0.0f64..20.0, psi in 0.0f64..20.0) {
            let h = eval_h(s, mu, psi, a(0.05)).unwrap().get();
            prop_assert!((0.0..=1.0).contains(&h));
            prop_assert!(eval_h(s, mu, 0.0, a(0.05)).unwrap().get() >= 0.95 - 1e-10);
        }

        #[test]
        fn h_monotone_in_sigma_and_psi(s in 0.1f64..5.0, ds in 0.0f64..2.0, mu in 0.0f64..10.0,
                                       psi in 0.0f64..10.0, dpsi in 0.0f64..3.0) {
            let al = a(0.05);
            prop_assert!(eval_h(s, mu, psi, al).unwrap().get() <= eval_h(s + ds, mu, psi, al).unwrap().get() + 1e-10);
            prop_assert!(eval_h(s, mu, psi + dpsi, al).unwrap().get() <= eval_h(s, mu, psi, al).unwrap().get() + 1e-10);
        }

        #[test]
        fn w_at_infinite_mu_and_zero_psi_is_nominal(sl in 0.1f64..5.0, su in 0.1f64..5.0, rho in -1.0f64..=1.0, al in 0.01f64..0.49) {
            let w = eval_w(&sig(sl, su, rho), &drift(f64::INFINITY, 0.0), a(al), LimitCi::Ci1).unwrap().get();
            prop_assert!((w - (1.0 - al)).abs() <= 1e-12);
        }
    }
}

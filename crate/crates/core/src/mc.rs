//! Monte Carlo coverage of CI¹ and CI² under simulated ordered-bounds data.
//!
//! Each replication draws one efficient estimator tuple and derives the
//! inefficient one by adding a common noise term to both bounds, so the two
//! channels share random numbers. Every replication has its own ChaCha
//! stream keyed by (seed, n) and indexed by the replication number, and
//! results are aggregated as integer counts, so output does not depend on
//! thread count or scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::critical::Alpha;
use crate::error::{Error, Result};
use crate::intervals::{build_ci1, build_ci2, covers, EstimatorTuple, Interval};
use crate::normal::{norm_cdf, Corr, Prob};

/// Raw draws allowed per replication before the DGP is declared misconfigured.
pub const MAX_REJECTION_DRAWS: u64 = 1_000_000;

/// Replications below this count are rejected.
pub const MIN_REPS: u64 = 1000;

/// Solver failures above this fraction of replications abort a run.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

const CHUNK: u64 = 256;

/// Which interval is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CiKind {
    Ci1,
    Ci2,
}

impl CiKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CiKind::Ci1 => "ci1",
            CiKind::Ci2 => "ci2",
        }
    }

    fn build(self, est: &EstimatorTuple, alpha: Alpha) -> Result<Interval> {
        match self {
            CiKind::Ci1 => build_ci1(est, alpha),
            CiKind::Ci2 => build_ci2(est, alpha),
        }
    }
}

impl std::str::FromStr for CiKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ci1" => Ok(CiKind::Ci1),
            "ci2" => Ok(CiKind::Ci2),
            _ => Err(Error::domain(format!("unknown interval kind {s:?}; expected ci1 or ci2"))),
        }
    }
}

/// Data-generating process for simulated bounds estimators.
///
/// `sigma_lo_bound` and `sigma_hi_bound` bound the variances (not standard
/// deviations) of both channels. `plugin_noise` is the constant c in the
/// N(0, c/n) perturbation of the reported σ̂ and ρ̂; zero reports the exact
/// values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSpec {
    pub theta_l: f64,
    pub theta_u: f64,
    pub sigma_l: f64,
    pub sigma_u: f64,
    pub rho: Corr,
    pub noise_tau: f64,
    pub sigma_lo_bound: f64,
    pub sigma_hi_bound: f64,
    pub delta_bar: f64,
    pub plugin_noise: f64,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.theta_l, self.theta_u, self.sigma_l, self.sigma_u, self.noise_tau, self.plugin_noise];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("DGP parameters must be finite"));
        }
        if self.delta_bar.is_nan() || self.delta_bar <= 0.0 {
            return Err(Error::domain("delta_bar must be positive"));
        }
        if self.theta_l > self.theta_u || self.theta_u > self.theta_l + self.delta_bar {
            return Err(Error::domain(format!(
                "need theta_l <= theta_u <= theta_l + delta_bar, got {} , {} , {}",
                self.theta_l, self.theta_u, self.delta_bar
            )));
        }
        if !(self.sigma_l > 0.0 && self.sigma_u > 0.0) {
            return Err(Error::domain("sigma_l and sigma_u must be positive"));
        }
        if self.noise_tau < 0.0 || self.plugin_noise < 0.0 {
            return Err(Error::domain("noise_tau and plugin_noise must be nonnegative"));
        }
        if !(self.sigma_lo_bound > 0.0 && self.sigma_lo_bound <= self.sigma_hi_bound) {
            return Err(Error::domain("need 0 < sigma_lo_bound <= sigma_hi_bound"));
        }
        let tau2 = self.noise_tau * self.noise_tau;
        for v in [self.sigma_l.powi(2), self.sigma_u.powi(2)] {
            if v < self.sigma_lo_bound || v + tau2 > self.sigma_hi_bound {
                return Err(Error::domain(format!(
                    "variances must lie in [{}, {}] for both channels",
                    self.sigma_lo_bound, self.sigma_hi_bound
                )));
            }
        }
        for (sl, su, r) in [self.efficient_sigmas(), self.inefficient_sigmas()] {
            let cov = r * sl * su;
            if sl * sl * su * su - cov * cov < -1e-12 * (sl * su).powi(2) {
                return Err(Error::domain("implied covariance matrix is not positive semi-definite"));
            }
        }
        Ok(())
    }

    /// (σ_l, σ_u, ρ) of the efficient channel.
    pub fn efficient_sigmas(&self) -> (f64, f64, f64) {
        (self.sigma_l, self.sigma_u, self.rho.get())
    }

    /// (σ_l, σ_u, ρ) of the inefficient channel: √(σ² + τ²) and the
    /// correlation after adding the common shift.
    pub fn inefficient_sigmas(&self) -> (f64, f64, f64) {
        let tau2 = self.noise_tau * self.noise_tau;
        let (vl, vu) = (self.sigma_l.powi(2) + tau2, self.sigma_u.powi(2) + tau2);
        // Equal variances use the exact denominator so ρ = 1 stays exactly 1.
        let denom = if vl == vu { vl } else { (vl * vu).sqrt() };
        let r = ((self.rho.get() * self.sigma_l * self.sigma_u + tau2) / denom).clamp(-1.0, 1.0);
        (vl.sqrt(), vu.sqrt(), r)
    }

    /// √n (θ_u − θ_l).
    pub fn scaled_width(&self, n: u64) -> f64 {
        (n as f64).sqrt() * (self.theta_u - self.theta_l)
    }

    /// Standard deviation of the raw difference √n(θ̂_u − θ̂_l) − √n(θ_u − θ_l).
    pub fn difference_sd(&self) -> f64 {
        let (sl, su, r) = self.efficient_sigmas();
        (sl * sl + su * su - 2.0 * r * sl * su).max(0.0).sqrt()
    }
}

/// How the true parameter moves with n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlternativeSeq {
    /// A fixed point outside the identified set.
    Fixed { theta_bar: f64 },
    /// θ_N = θ_l − Ψ/√N.
    LocalLower,
    /// θ_N = θ_u + Ψ/√N.
    LocalUpper,
}

impl AlternativeSeq {
    pub fn validate(&self, spec: &DgpSpec) -> Result<()> {
        if let AlternativeSeq::Fixed { theta_bar } = *self {
            if !theta_bar.is_finite() || (spec.theta_l <= theta_bar && theta_bar <= spec.theta_u) {
                return Err(Error::domain(format!(
                    "fixed alternative {theta_bar} must lie outside [{}, {}]",
                    spec.theta_l, spec.theta_u
                )));
            }
        }
        Ok(())
    }

    /// The true parameter at sample size n and drift Ψ, with the Ψ actually
    /// realized (√n times the distance to the nearest bound for fixed points).
    pub fn point(&self, spec: &DgpSpec, n: u64, psi: f64) -> (f64, f64) {
        let rn = (n as f64).sqrt();
        match *self {
            AlternativeSeq::Fixed { theta_bar } => {
                let dist = if theta_bar < spec.theta_l { spec.theta_l - theta_bar } else { theta_bar - spec.theta_u };
                (theta_bar, rn * dist)
            }
            AlternativeSeq::LocalLower => (spec.theta_l - psi / rn, psi),
            AlternativeSeq::LocalUpper => (spec.theta_u + psi / rn, psi),
        }
    }
}

/// Replication count, level and seed shared by the engine entry points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub reps: u64,
    pub alpha: Alpha,
    pub seed: u64,
}

/// Estimated coverage of both channels at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPoint {
    pub ci_kind: CiKind,
    pub theta: f64,
    pub psi: f64,
    pub n: u64,
    pub cover_rate_e: Prob,
    pub cover_rate_i: Prob,
    /// √(p(1−p)/reps) at the rate pooled over both channels.
    pub mc_se: f64,
    /// Replications that produced both intervals.
    pub reps: u64,
    pub failures: u64,
    pub seed: u64,
}

impl PowerPoint {
    /// cover_rate_e − cover_rate_i.
    pub fn difference(&self) -> f64 {
        self.cover_rate_e.get() - self.cover_rate_i.get()
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The stream for replication `rep` at sample size `n`.
pub fn replication_rng(seed: u64, n: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(n)));
    rng.set_stream(rep);
    rng
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// One raw (pre-rejection) draw of the scaled errors (Z_l, Z_u).
fn raw_errors<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> (f64, f64) {
    let (sl, su, r) = spec.efficient_sigmas();
    let z1 = normal(rng);
    let z2 = normal(rng);
    (sl * z1, su * (r * z1 + (1.0 - r * r).max(0.0).sqrt() * z2))
}

/// Draws the (efficient, inefficient) estimator tuples for one replication.
/// Efficient bounds are redrawn until ordered; the inefficient bounds add
/// one common N(0, τ²)/√n shift. Reported σ̂ and ρ̂ are the implied values,
/// perturbed by N(0, c/n) noise shared across channels when c > 0.
pub fn draw_estimators<R: Rng + ?Sized>(
    spec: &DgpSpec,
    n: u64,
    rng: &mut R,
) -> Result<(EstimatorTuple, EstimatorTuple)> {
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let rn = (n as f64).sqrt();
    let mut draws = 0u64;
    let (tl, tu) = loop {
        if draws == MAX_REJECTION_DRAWS {
            return Err(Error::domain(format!(
                "ordered draw not obtained in {MAX_REJECTION_DRAWS} attempts; the DGP is misconfigured"
            )));
        }
        draws += 1;
        let (el, eu) = raw_errors(spec, rng);
        let (tl, tu) = (spec.theta_l + el / rn, spec.theta_u + eu / rn);
        if tl <= tu {
            break (tl, tu);
        }
    };
    let shift = spec.noise_tau * normal(rng) / rn;
    let noise = [normal(rng), normal(rng), normal(rng)];
    let scale = (spec.plugin_noise / n as f64).sqrt();
    let (s_lo, s_hi) = (spec.sigma_lo_bound.sqrt(), spec.sigma_hi_bound.sqrt());
    let report = |(sl, su, r): (f64, f64, f64)| -> Result<(f64, f64, Corr)> {
        if scale == 0.0 {
            return Ok((sl, su, Corr::new(r)?));
        }
        Ok((
            (sl + scale * noise[0]).clamp(s_lo, s_hi),
            (su + scale * noise[1]).clamp(s_lo, s_hi),
            Corr::new((r + scale * noise[2]).clamp(-1.0, 1.0))?,
        ))
    };
    let (sl, su, r) = report(spec.efficient_sigmas())?;
    let eff = EstimatorTuple::new(tl, tu, sl, su, r, n)?;
    let (sl, su, r) = report(spec.inefficient_sigmas())?;
    let ineff = EstimatorTuple::new(tl + shift, tu + shift, sl, su, r, n)?;
    Ok((eff, ineff))
}

/// Hit counts laid out as [kind][theta][channel], plus per-kind usable
/// replications and failures.
#[derive(Debug, Clone)]
struct Counts {
    hits: Vec<u64>,
    used: Vec<u64>,
    failed: Vec<u64>,
}

impl Counts {
    fn zero(kinds: usize, thetas: usize) -> Self {
        Counts { hits: vec![0; kinds * thetas * 2], used: vec![0; kinds], failed: vec![0; kinds] }
    }

    fn add(mut self, other: Counts) -> Counts {
        for (a, b) in self.hits.iter_mut().zip(other.hits) {
            *a += b;
        }
        for (a, b) in self.used.iter_mut().zip(other.used) {
            *a += b;
        }
        for (a, b) in self.failed.iter_mut().zip(other.failed) {
            *a += b;
        }
        self
    }
}

fn simulate(spec: &DgpSpec, thetas: &[f64], n: u64, kinds: &[CiKind], settings: &McSettings) -> Result<Counts> {
    let nt = thetas.len();
    let chunks = settings.reps.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|chunk| -> Result<Counts> {
            let mut counts = Counts::zero(kinds.len(), nt);
            let end = ((chunk + 1) * CHUNK).min(settings.reps);
            for rep in chunk * CHUNK..end {
                let mut rng = replication_rng(settings.seed, n, rep);
                let (eff, ineff) = draw_estimators(spec, n, &mut rng)?;
                for (k, kind) in kinds.iter().enumerate() {
                    let (ce, ci) = match (kind.build(&eff, settings.alpha), kind.build(&ineff, settings.alpha)) {
                        (Ok(a), Ok(b)) => (a, b),
                        (Err(e), _) | (_, Err(e)) if e.is_domain() => return Err(e),
                        _ => {
                            counts.failed[k] += 1;
                            continue;
                        }
                    };
                    counts.used[k] += 1;
                    for (t, &theta) in thetas.iter().enumerate() {
                        let base = (k * nt + t) * 2;
                        counts.hits[base] += covers(&ce, theta) as u64;
                        counts.hits[base + 1] += covers(&ci, theta) as u64;
                    }
                }
            }
            Ok(counts)
        })
        .try_reduce(|| Counts::zero(kinds.len(), nt), |a, b| Ok(a.add(b)))
}

fn check_settings(spec: &DgpSpec, n: u64, settings: &McSettings) -> Result<()> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    if settings.reps < MIN_REPS {
        return Err(Error::domain(format!("reps must be at least {MIN_REPS}, got {}", settings.reps)));
    }
    Ok(())
}

/// Coverage of every (kind, θ) pair from one shared set of replications.
/// `points` holds (θ, Ψ) pairs; Ψ is carried through for reporting.
pub fn coverage_table(
    spec: &DgpSpec,
    points: &[(f64, f64)],
    n: u64,
    kinds: &[CiKind],
    settings: &McSettings,
) -> Result<Vec<PowerPoint>> {
    check_settings(spec, n, settings)?;
    if points.is_empty() || kinds.is_empty() {
        return Err(Error::domain("need at least one parameter value and one interval kind"));
    }
    let thetas: Vec<f64> = points.iter().map(|p| p.0).collect();
    let counts = simulate(spec, &thetas, n, kinds, settings)?;
    let mut out = Vec::with_capacity(kinds.len() * points.len());
    for (k, &kind) in kinds.iter().enumerate() {
        let failed = counts.failed[k];
        if failed as f64 > MAX_FAILURE_RATE * settings.reps as f64 {
            return Err(Error::Engine(format!(
                "{failed} of {} replications failed to build {} at n = {n}",
                settings.reps,
                kind.as_str()
            )));
        }
        let used = counts.used[k];
        for (t, &(theta, psi)) in points.iter().enumerate() {
            let base = (k * points.len() + t) * 2;
            let (he, hi) = (counts.hits[base], counts.hits[base + 1]);
            let pooled = (he + hi) as f64 / (2 * used) as f64;
            out.push(PowerPoint {
                ci_kind: kind,
                theta,
                psi,
                n,
                cover_rate_e: Prob::new(he as f64 / used as f64)?,
                cover_rate_i: Prob::new(hi as f64 / used as f64)?,
                mc_se: (pooled * (1.0 - pooled) / used as f64).sqrt(),
                reps: used,
                failures: failed,
                seed: settings.seed,
            });
        }
    }
    Ok(out)
}

/// Coverage of one interval kind at one parameter value.
pub fn estimate_coverage(
    spec: &DgpSpec,
    theta: f64,
    n: u64,
    kind: CiKind,
    settings: &McSettings,
) -> Result<PowerPoint> {
    if !theta.is_finite() {
        return Err(Error::domain("theta must be finite"));
    }
    let psi = (n as f64).sqrt() * (spec.theta_l - theta).max(theta - spec.theta_u).max(0.0);
    Ok(coverage_table(spec, &[(theta, psi)], n, &[kind], settings)?.remove(0))
}

/// Paired coverage along an alternative sequence for each interval kind,
/// ordered by n, then kind, then Ψ. All kinds and Ψ values at one n share
/// the same replications. Ψ = 0 is allowed as the boundary point.
pub fn power_curves(
    spec: &DgpSpec,
    alt: &AlternativeSeq,
    n_grid: &[u64],
    psi_grid: &[f64],
    kinds: &[CiKind],
    settings: &McSettings,
) -> Result<Vec<PowerPoint>> {
    alt.validate(spec)?;
    if n_grid.is_empty() || psi_grid.is_empty() {
        return Err(Error::domain("n and psi grids must be nonempty"));
    }
    if let Some(p) = psi_grid.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::domain(format!("psi values must be finite and nonnegative, got {p}")));
    }
    let mut out = Vec::new();
    for &n in n_grid {
        let points: Vec<(f64, f64)> = match alt {
            AlternativeSeq::Fixed { .. } => vec![alt.point(spec, n, 0.0)],
            _ => psi_grid.iter().map(|&psi| alt.point(spec, n, psi)).collect(),
        };
        out.extend(coverage_table(spec, &points, n, kinds, settings)?);
    }
    Ok(out)
}

/// Paired coverage along an alternative sequence for one interval kind.
pub fn power_curve(
    spec: &DgpSpec,
    alt: &AlternativeSeq,
    n_grid: &[u64],
    psi_grid: &[f64],
    kind: CiKind,
    settings: &McSettings,
) -> Result<Vec<PowerPoint>> {
    power_curves(spec, alt, n_grid, psi_grid, &[kind], settings)
}

/// Ordering-violation footprint of one (spec, n) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Near1Row {
    pub index: usize,
    pub n: u64,
    /// √n (θ_u − θ_l).
    pub mu_n: f64,
    /// Fraction of raw draws with θ̂_l > θ̂_u.
    pub raw_rate: f64,
    /// Fraction of delivered (post-rejection) tuples with θ̂_l > θ̂_u.
    pub delivered_rate: f64,
    /// P(N(μ_n, sd²) < 0) for the raw difference, 0 when sd = 0.
    pub oracle: f64,
    /// √(p(1−p)/reps) at the oracle rate.
    pub mc_se: f64,
}

/// Raw and delivered ordering-violation rates for each (spec, n) pair,
/// matched elementwise. A finite scaled width with ρ < 1 or σ_l ≠ σ_u leaves
/// a raw violation rate bounded away from zero.
pub fn near1_diagnostic(spec_seq: &[DgpSpec], n_grid: &[u64], reps: u64, seed: u64) -> Result<Vec<Near1Row>> {
    if spec_seq.len() != n_grid.len() || spec_seq.is_empty() {
        return Err(Error::domain("spec and n sequences must be nonempty and of equal length"));
    }
    if reps < MIN_REPS {
        return Err(Error::domain(format!("reps must be at least {MIN_REPS}, got {reps}")));
    }
    spec_seq
        .iter()
        .zip(n_grid)
        .enumerate()
        .map(|(index, (spec, &n))| {
            spec.validate()?;
            if n == 0 {
                return Err(Error::domain("sample size must be positive"));
            }
            let rn = (n as f64).sqrt();
            let chunks = reps.div_ceil(CHUNK);
            let (raw, delivered) = (0..chunks)
                .into_par_iter()
                .map(|chunk| -> Result<(u64, u64)> {
                    let (mut raw, mut delivered) = (0u64, 0u64);
                    for rep in chunk * CHUNK..((chunk + 1) * CHUNK).min(reps) {
                        let mut rng = replication_rng(seed, n, rep);
                        let (el, eu) = raw_errors(spec, &mut rng);
                        raw += (spec.theta_l + el / rn > spec.theta_u + eu / rn) as u64;
                        let (eff, _) = draw_estimators(spec, n, &mut rng)?;
                        delivered += (eff.theta_l_hat() > eff.theta_u_hat()) as u64;
                    }
                    Ok((raw, delivered))
                })
                .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
            let mu_n = spec.scaled_width(n);
            let sd = spec.difference_sd();
            let oracle = if sd > 0.0 { norm_cdf(-mu_n / sd) } else { 0.0 };
            Ok(Near1Row {
                index,
                n,
                mu_n,
                raw_rate: raw as f64 / reps as f64,
                delivered_rate: delivered as f64 / reps as f64,
                oracle,
                mc_se: (oracle * (1.0 - oracle) / reps as f64).sqrt(),
            })
        })
        .collect()
}

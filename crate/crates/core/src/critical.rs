//! Critical values for the two interval confidence sets.
//!
//! `solve_c1` and `solve_g` invert the scalar equation
//! `Φ(c + y) − Φ(−c) = 1 − α`. `solve_c2` solves the weighted-length
//! program with two bivariate-normal coverage constraints; see
//! [`solve_c2`] for the algorithm.

use crate::error::{Error, Result};
use crate::normal::{Corr, lower_orthant, lower_orthant_grad, norm_ppf, norm_sf, pdf};
use crate::roots::{brent, newton_increasing};

/// Scaled interval lengths above this multiple of the largest standard
/// deviation are treated as infinite: the tail masses involved are far below
/// machine epsilon.
pub const LARGE_DELTA_FACTOR: f64 = 40.0;

/// Correlations this close to ±1 are snapped to the degenerate law in the
/// CI² program.
pub const RHO_SNAP_EPS: f64 = 1e-8;

/// Constraint values within this distance of 1 − α count as binding.
pub const BINDING_TOL: f64 = 1e-9;

/// Significance level, restricted to `(0, 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 0.5 {
            Ok(Alpha(value))
        } else {
            Err(Error::domain("alpha must lie in (0, 0.5)"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Φ⁻¹(1 − α), computed from the lower tail for full precision.
    pub fn one_sided_z(self) -> f64 {
        -norm_ppf(self.0)
    }

    /// Φ⁻¹(1 − α/2).
    pub fn two_sided_z(self) -> f64 {
        -norm_ppf(0.5 * self.0)
    }
}

/// A scalar critical value and the residual of its defining equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CritScalar {
    pub c: f64,
    /// `Φ(c + y) − Φ(−c) − (1 − α)` at the returned `c`.
    pub residual: f64,
}

/// How `solve_c2` arrived at its answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum C2Branch {
    /// δ = ∞ (or numerically indistinguishable): both constraints reduce to Φ(c) ≥ 1 − α.
    InfiniteDelta,
    /// ρ = 1 and σ_l = σ_u: the pair (G(δ/σ), G(δ/σ)).
    EqualVariance,
    /// Optimal for the lower-bound coverage constraint alone; the other is slack or binds incidentally.
    LowerOnly,
    /// Optimal for the upper-bound coverage constraint alone.
    UpperOnly,
    /// Both constraints hold with equality.
    BothBinding,
    /// Recovered by direct one-dimensional search after the KKT path failed.
    Search,
}

impl C2Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            C2Branch::InfiniteDelta => "infinite_delta",
            C2Branch::EqualVariance => "equal_variance",
            C2Branch::LowerOnly => "lower_only",
            C2Branch::UpperOnly => "upper_only",
            C2Branch::BothBinding => "both_binding",
            C2Branch::Search => "search",
        }
    }
}

/// Critical pair for CI².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CritPair {
    pub c_l: f64,
    pub c_u: f64,
    /// Whether each coverage constraint (lower bound, upper bound) binds.
    pub binding: [bool; 2],
    /// The two constraint probabilities at the solution.
    pub coverage: [f64; 2],
    /// σ_l·c_l + σ_u·c_u.
    pub objective: f64,
    pub branch: C2Branch,
    /// Set when distinct minimizers were found; the smallest c_l is returned.
    pub ambiguous: bool,
}

fn check_sigma(name: &str, s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be a positive finite real, got {s}")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_nan() || delta < 0.0 {
        Err(Error::domain(format!("delta must be nonnegative, got {delta}")))
    } else {
        Ok(())
    }
}

/// α − Q(c + y) − Q(c), which equals `Φ(c + y) − Φ(−c) − (1 − α)` with the
/// sign flipped and without the cancellation of the direct form.
fn g_excess(c: f64, y: f64, alpha: f64) -> f64 {
    alpha - norm_sf(c + y) - norm_sf(c)
}

/// G(y): the unique c > 0 with `Φ(c + y) − Φ(−c) = 1 − α`.
pub fn solve_g(y: f64, alpha: Alpha) -> Result<CritScalar> {
    if y.is_nan() || y < 0.0 {
        return Err(Error::domain(format!("y must be nonnegative, got {y}")));
    }
    let a = alpha.get();
    let lo = alpha.one_sided_z();
    if y > LARGE_DELTA_FACTOR {
        return Ok(CritScalar { c: lo, residual: -g_excess(lo, y, a) });
    }
    let hi = alpha.two_sided_z();
    // Decreasing in c on [lo, hi].
    let f = |c: f64| -g_excess(c, y, a);
    let (flo, fhi) = (f(lo), f(hi));
    if flo <= 0.0 {
        return Ok(CritScalar { c: lo, residual: flo });
    }
    if fhi >= 0.0 {
        return Ok(CritScalar { c: hi, residual: fhi });
    }
    let root = brent(f, lo, hi, flo, fhi, 1e-15, 200)?;
    Ok(CritScalar { c: root.x, residual: root.fx })
}

/// G′(y) from the implicit-function identity
/// `φ(G + y)(G′ + 1) + φ(−G)G′ = 0`.
pub fn g_prime(y: f64, alpha: Alpha) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::domain(format!("g_prime requires finite y, got {y}")));
    }
    let g = solve_g(y, alpha)?.c;
    let upper = pdf(g + y);
    Ok(-upper / (upper + pdf(g)))
}

/// c¹ = G(δ / max{σ_l, σ_u}).
pub fn solve_c1(delta: f64, sigma_l: f64, sigma_u: f64, alpha: Alpha) -> Result<CritScalar> {
    check_delta(delta)?;
    check_sigma("sigma_l", sigma_l)?;
    check_sigma("sigma_u", sigma_u)?;
    let s = sigma_l.max(sigma_u);
    let y = if delta > LARGE_DELTA_FACTOR * s { f64::INFINITY } else { delta / s };
    solve_g(y, alpha)
}

/// The CI² program in standardized form. With r = −ρ, a = δ/σ_u, b = δ/σ_l
/// the two coverage constraints are lower-orthant probabilities
///
/// * lower: Φ₂(c_l, c_u + a; r) ≥ 1 − α
/// * upper: Φ₂(c_l + b, c_u; r) ≥ 1 − α
struct Program {
    a: f64,
    b: f64,
    r: f64,
    alpha: f64,
    target: f64,
    z: f64,
    sigma_l: f64,
    sigma_u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Lower,
    Upper,
}

impl Program {
    fn value(&self, side: Side, cl: f64, cu: f64) -> f64 {
        match side {
            Side::Lower => lower_orthant(cl, cu + self.a, self.r),
            Side::Upper => lower_orthant(cl + self.b, cu, self.r),
        }
    }

    fn grad(&self, side: Side, cl: f64, cu: f64) -> (f64, f64) {
        match side {
            Side::Lower => lower_orthant_grad(cl, cu + self.a, self.r),
            Side::Upper => lower_orthant_grad(cl + self.b, cu, self.r),
        }
    }

    /// Infimum of feasible c_l for the constraint on its own.
    fn cl_floor(&self, side: Side) -> f64 {
        match side {
            Side::Lower => self.z,
            Side::Upper => self.z - self.b,
        }
    }

    /// Smallest c_u satisfying `side` at this c_l, or +∞ if none exists.
    fn min_cu(&self, side: Side, cl: f64) -> Result<f64> {
        // The constraint is at most Φ(c_u + shift) and, by Bonferroni, at
        // least Φ(cl + lshift) + Φ(c_u + shift) − 1.
        let (shift, lshift) = match side {
            Side::Lower => (self.a, 0.0),
            Side::Upper => (0.0, self.b),
        };
        let slack = self.alpha - norm_sf(cl + lshift);
        if slack <= 0.0 {
            return Ok(f64::INFINITY);
        }
        let lo = self.z - shift;
        let mut hi = if slack > 1e-300 { -norm_ppf(slack) - shift } else { 40.0 - shift };
        let g = |cu: f64| {
            let v = self.value(side, cl, cu) - self.target;
            (v, self.grad(side, cl, cu).1)
        };
        if g(lo).0 >= 0.0 {
            return Ok(lo);
        }
        let mut ghi = g(hi).0;
        let mut tries = 0;
        while ghi < 0.0 {
            if tries == 40 {
                return Ok(f64::INFINITY);
            }
            hi += 0.25;
            ghi = g(hi).0;
            tries += 1;
        }
        let root = newton_increasing(g, lo, hi, hi, 1e-15, 200)?;
        // Step up to the feasible side of the root.
        let mut cu = root.x;
        let mut k = 0;
        while g(cu).0 < 0.0 && k < 8 {
            cu += 4.0 * f64::EPSILON * cu.abs().max(1.0);
            k += 1;
        }
        Ok(cu)
    }

    /// Scaled derivative of σ_l c_l + σ_u min_cu(c_l) along the boundary of
    /// `side`: σ_l ∂f/∂c_u − σ_u ∂f/∂c_l. Same sign as the derivative.
    fn tangent_slope(&self, side: Side, cl: f64) -> Result<f64> {
        let cu = self.min_cu(side, cl)?;
        if !cu.is_finite() {
            return Ok(-self.sigma_u * pdf(cl));
        }
        let (gl, gu) = self.grad(side, cl, cu);
        Ok(self.sigma_l * gu - self.sigma_u * gl)
    }

    fn objective(&self, cl: f64, cu: f64) -> f64 {
        self.sigma_l * cl + self.sigma_u * cu
    }

    /// Minimizer of the objective subject to `side` alone.
    fn tangent_point(&self, side: Side, cl_max: f64) -> Result<(f64, f64)> {
        let floor = self.cl_floor(side);
        let left = floor;
        // Limit of the slope as c_l ↓ floor, where the boundary c_u → ∞.
        let f_left = -self.sigma_u * pdf(floor);
        let mut right = cl_max.max(floor + 1e-3);
        let mut f_right = self.tangent_slope(side, right)?;
        let mut tries = 0;
        while f_right < 0.0 && tries < 30 {
            right += 0.5 + (right - floor);
            f_right = self.tangent_slope(side, right)?;
            tries += 1;
        }
        let cl = if f_right <= 0.0 {
            right
        } else {
            let mut err = None;
            let root = brent(
                |cl| {
                    if cl <= floor {
                        return f_left;
                    }
                    match self.tangent_slope(side, cl) {
                        Ok(v) => v,
                        Err(e) => {
                            err = Some(e);
                            f64::NAN
                        }
                    }
                },
                left,
                right,
                f_left,
                f_right,
                1e-13,
                200,
            );
            if let Some(e) = err {
                return Err(e);
            }
            root?.x
        };
        // At the floor itself the boundary may be unbounded; nudge inside.
        let cl = if cl <= floor { floor + 1e-12 * floor.abs().max(1.0) } else { cl };
        let cu = self.min_cu(side, cl)?;
        Ok((cl, cu))
    }

    fn feasible(&self, cl: f64, cu: f64, tol: f64) -> bool {
        cu.is_finite()
            && self.value(Side::Lower, cl, cu) >= self.target - tol
            && self.value(Side::Upper, cl, cu) >= self.target - tol
    }

    /// Lagrange multipliers for both constraints active at (cl, cu).
    fn multipliers(&self, cl: f64, cu: f64) -> Option<(f64, f64)> {
        let (l_l, l_u) = self.grad(Side::Lower, cl, cu);
        let (u_l, u_u) = self.grad(Side::Upper, cl, cu);
        let det = l_l * u_u - u_l * l_u;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let lam_lower = (self.sigma_l * u_u - self.sigma_u * u_l) / det;
        let lam_upper = (l_l * self.sigma_u - l_u * self.sigma_l) / det;
        Some((lam_lower, lam_upper))
    }

    fn boundary_envelope(&self, cl: f64) -> Result<f64> {
        Ok(self.min_cu(Side::Lower, cl)?.max(self.min_cu(Side::Upper, cl)?))
    }

    /// Golden-section search of the convex envelope objective. Used only
    /// when the KKT path cannot certify its answer.
    fn search(&self, cl_max: f64) -> Result<(f64, f64)> {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let h = |cl: f64| -> Result<f64> {
            let cu = self.boundary_envelope(cl)?;
            Ok(if cu.is_finite() { self.objective(cl, cu) } else { f64::INFINITY })
        };
        let (mut lo, mut hi) = (self.z, cl_max.max(self.z + 1e-3));
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let (mut h1, mut h2) = (h(x1)?, h(x2)?);
        for _ in 0..200 {
            if hi - lo < 1e-12 {
                break;
            }
            if h1 <= h2 {
                hi = x2;
                x2 = x1;
                h2 = h1;
                x1 = hi - inv_phi * (hi - lo);
                h1 = h(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                h1 = h2;
                x2 = lo + inv_phi * (hi - lo);
                h2 = h(x2)?;
            }
        }
        let cl = 0.5 * (lo + hi);
        let cu = self.boundary_envelope(cl)?;
        if !cu.is_finite() {
            return Err(Error::solver("CI2 program infeasible", format!("at c_l = {cl}")));
        }
        Ok((cl, cu))
    }
}

/// Solves `min σ_l c_l + σ_u c_u` subject to the two CI² coverage
/// constraints at level 1 − α.
///
/// Both constraint sets are upper level sets of log-concave functions, so
/// the program is convex and KKT points are global minima. The solver:
///
/// 1. returns the analytic pair for δ = ∞ (or δ > 40·max σ) and for
///    ρ = 1 with σ_l = σ_u;
/// 2. otherwise finds the minimizer of each constraint on its own by
///    parametrizing its boundary c_u(c_l) and root-finding the tangency
///    condition; a single-constraint minimizer that satisfies the other
///    constraint is optimal;
/// 3. otherwise both constraints bind: the crossing of the two boundaries
///    between the two tangency points is located by Brent's method and
///    certified by nonnegative multipliers;
/// 4. if certification fails, a golden-section search on the convex
///    envelope objective is used instead.
pub fn solve_c2(delta: f64, sigma_l: f64, sigma_u: f64, rho: Corr, alpha: Alpha) -> Result<CritPair> {
    check_delta(delta)?;
    check_sigma("sigma_l", sigma_l)?;
    check_sigma("sigma_u", sigma_u)?;
    let rho = rho.get();
    let a = alpha.get();
    let z = alpha.one_sided_z();
    let s_max = sigma_l.max(sigma_u);

    if delta > LARGE_DELTA_FACTOR * s_max {
        let cov = 1.0 - norm_sf(z);
        return Ok(CritPair {
            c_l: z,
            c_u: z,
            binding: [true, true],
            coverage: [cov, cov],
            objective: (sigma_l + sigma_u) * z,
            branch: C2Branch::InfiniteDelta,
            ambiguous: false,
        });
    }

    let r = if rho >= 1.0 - RHO_SNAP_EPS {
        -1.0
    } else if rho <= -1.0 + RHO_SNAP_EPS {
        1.0
    } else {
        -rho
    };
    let prog = Program {
        a: delta / sigma_u,
        b: delta / sigma_l,
        r,
        alpha: a,
        target: 1.0 - a,
        z,
        sigma_l,
        sigma_u,
    };
    let finish = |cl: f64, cu: f64, branch: C2Branch, ambiguous: bool| -> CritPair {
        let coverage = [prog.value(Side::Lower, cl, cu), prog.value(Side::Upper, cl, cu)];
        CritPair {
            c_l: cl,
            c_u: cu,
            binding: coverage.map(|v| (v - prog.target).abs() <= BINDING_TOL),
            coverage,
            objective: prog.objective(cl, cu),
            branch,
            ambiguous,
        }
    };

    if r == -1.0 && (sigma_l - sigma_u).abs() <= 1e-12 * s_max {
        let c = solve_g(delta / s_max, alpha)?.c;
        return Ok(finish(c, c, C2Branch::EqualVariance, false));
    }

    // (c¹, c¹) is feasible by Bonferroni, which bounds the optimal c_l.
    let c1 = solve_c1(delta, sigma_l, sigma_u, alpha)?.c;
    let cl_cap = |shift: f64| c1 + sigma_u * (c1 - z + shift) / sigma_l + 1e-6;

    // Both constraints bind in the typical case; try that first from the
    // feasible point (c¹, c¹) and fall back to the tangency analysis.
    if let Ok((cl, cu)) = prog.certify_both_binding((c1, c1)) {
        return Ok(finish(cl, cu, C2Branch::BothBinding, false));
    }
    match kkt_path(&prog, cl_cap(prog.a), cl_cap(0.0)) {
        Ok((cl, cu, branch, ambiguous)) => Ok(finish(cl, cu, branch, ambiguous)),
        Err(_) => {
            let (cl, cu) = prog.search(cl_cap(0.0))?;
            Ok(finish(cl, cu, C2Branch::Search, false))
        }
    }
}

fn kkt_path(prog: &Program, cap_lower: f64, cap_upper: f64) -> Result<(f64, f64, C2Branch, bool)> {
    let feas_tol = 1e-12;
    let (l_cl, l_cu) = prog.tangent_point(Side::Lower, cap_lower)?;
    let (u_cl, u_cu) = prog.tangent_point(Side::Upper, cap_upper)?;

    let mut candidates = Vec::with_capacity(2);
    if prog.feasible(l_cl, l_cu, feas_tol) {
        candidates.push((l_cl, l_cu, C2Branch::LowerOnly));
    }
    if prog.feasible(u_cl, u_cu, feas_tol) {
        candidates.push((u_cl, u_cu, C2Branch::UpperOnly));
    }
    if !candidates.is_empty() {
        let best = candidates
            .iter()
            .map(|&(cl, cu, _)| prog.objective(cl, cu))
            .fold(f64::INFINITY, f64::min);
        let scale = 1e-12 * best.abs().max(1.0);
        let mut ties: Vec<_> =
            candidates.into_iter().filter(|&(cl, cu, _)| prog.objective(cl, cu) <= best + scale).collect();
        ties.sort_by(|x, y| x.0.total_cmp(&y.0));
        let ambiguous = ties.len() > 1 && (ties[ties.len() - 1].0 - ties[0].0).abs() > 1e-9;
        let (cl, cu, branch) = ties[0];
        return Ok((cl, cu, branch, ambiguous));
    }

    // Neither single-constraint minimizer is feasible, so both bind. Locate
    // the crossing of the two boundaries between the tangency points, then
    // polish it with Newton's method on the pair of equations. When δ/σ is
    // large the lower boundary is nearly vertical and the crossing is only
    // resolvable in two dimensions, so a failed bracket starts from (z, z).
    let start = crossing(prog, u_cl, l_cl).unwrap_or((prog.z, prog.z));
    let (cl, cu) = prog.certify_both_binding(start)?;
    Ok((cl, cu, C2Branch::BothBinding, false))
}

/// Root of the gap between the two constraint boundaries on
/// `[max(upper_cl, z), lower_cl]`.
fn crossing(prog: &Program, upper_cl: f64, lower_cl: f64) -> Result<(f64, f64)> {
    let gap = |cl: f64| -> Result<f64> {
        let lower = prog.min_cu(Side::Lower, cl)?;
        let upper = prog.min_cu(Side::Upper, cl)?;
        Ok(if lower.is_finite() { lower - upper } else { 1e6 })
    };
    let left = upper_cl.max(prog.z);
    let right = lower_cl;
    if left.is_nan() || right.is_nan() || left >= right {
        return Err(Error::solver(
            "tangency points out of order",
            format!("upper-side c_l = {upper_cl}, lower-side c_l = {lower_cl}"),
        ));
    }
    let (g_left, g_right) = (gap(left)?, gap(right)?);
    let mut err = None;
    let root = brent(
        |cl| match gap(cl) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        left,
        right,
        g_left,
        g_right,
        1e-14,
        200,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let cl = root?.x;
    Ok((cl, prog.boundary_envelope(cl)?))
}

impl Program {
    /// Solves for a point where both constraints bind, starting from `start`,
    /// and accepts it only if it is feasible with nonnegative multipliers.
    /// By convexity such a point is a global minimizer.
    fn certify_both_binding(&self, start: (f64, f64)) -> Result<(f64, f64)> {
        let (cl, cu) = self.polish(start);
        let coverage = [self.value(Side::Lower, cl, cu), self.value(Side::Upper, cl, cu)];
        let binding = coverage.iter().all(|v| (v - self.target).abs() <= BINDING_TOL);
        match self.multipliers(cl, cu) {
            Some((l1, l2)) if l1 >= -1e-8 && l2 >= -1e-8 && binding && self.feasible(cl, cu, 1e-12) => Ok((cl, cu)),
            m => Err(Error::solver(
                "KKT certification failed",
                format!("c = ({cl}, {cu}), coverage {coverage:?}, multipliers {m:?}"),
            )),
        }
    }

    /// Damped Newton iteration on (f_lower − t, f_upper − t) = 0 followed by
    /// a few ulp-sized steps up to the feasible side.
    fn polish(&self, start: (f64, f64)) -> (f64, f64) {
        let resid = |cl: f64, cu: f64| {
            [self.value(Side::Lower, cl, cu) - self.target, self.value(Side::Upper, cl, cu) - self.target]
        };
        let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
        let (mut cl, mut cu) = start;
        if !cu.is_finite() {
            cu = self.z;
        }
        let mut r = resid(cl, cu);
        for _ in 0..50 {
            if norm(r) <= 1e-15 {
                break;
            }
            let (l_l, l_u) = self.grad(Side::Lower, cl, cu);
            let (u_l, u_u) = self.grad(Side::Upper, cl, cu);
            let det = l_l * u_u - l_u * u_l;
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let dl = (-r[0] * u_u + r[1] * l_u) / det;
            let du = (-r[1] * l_l + r[0] * u_l) / det;
            let mut step = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let (nl, nu) = (cl + step * dl, cu + step * du);
                let nr = resid(nl, nu);
                if norm(nr) < norm(r) {
                    cl = nl;
                    cu = nu;
                    r = nr;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        let mut k = 0;
        while (r[0] < 0.0 || r[1] < 0.0) && k < 16 {
            if r[0] < 0.0 {
                cl += 2.0 * f64::EPSILON * cl.abs().max(1.0);
            }
            if r[1] < 0.0 {
                cu += 2.0 * f64::EPSILON * cu.abs().max(1.0);
            }
            r = resid(cl, cu);
            k += 1;
        }
        (cl, cu)
    }
}

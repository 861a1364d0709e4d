//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Result of a bracketed root search.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Root {
    pub x: f64,
    pub fx: f64,
}

/// Brent's method (zeroin) on `[a, b]` given endpoint values of opposite
/// sign. Endpoint values may be limits rather than evaluations, which lets
/// callers bracket against an asymptote. Stops when the bracket is narrower
/// than `4·eps·|x| + xtol` or an exact zero is hit.
pub(crate) fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<Root> {
    if fa == 0.0 {
        return Ok(Root { x: a, fx: fa });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: fb });
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::solver(
            "root not bracketed",
            format!("f({a}) = {fa}, f({b}) = {fb}"),
        ));
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(Root { x: b, fx: fb });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::solver("objective returned NaN", format!("at x = {b}")));
        }
    }
    Err(Error::solver(
        "root search did not converge",
        format!("bracket [{b}, {c}] after {max_iter} iterations"),
    ))
}

/// Newton's method safeguarded by bisection for an increasing function on
/// `[lo, hi]` with `g(lo) ≤ 0 ≤ g(hi)`. `g` returns value and derivative.
pub(crate) fn newton_increasing<G: FnMut(f64) -> (f64, f64)>(
    mut g: G,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<Root> {
    let mut x = if x0 > lo && x0 < hi { x0 } else { 0.5 * (lo + hi) };
    let mut last = (f64::NAN, f64::NAN);
    for _ in 0..max_iter {
        let (gx, dgx) = g(x);
        if gx.is_nan() {
            return Err(Error::solver("objective returned NaN", format!("at x = {x}")));
        }
        last = (x, gx);
        if gx == 0.0 {
            return Ok(Root { x, fx: gx });
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = gx / dgx;
        let mut next = x - step;
        // Bisect unless the Newton step is finite and stays inside the bracket.
        let inside = dgx > 0.0 && next > lo && next < hi;
        if !inside {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= xtol + 2.0 * f64::EPSILON * x.abs() || hi - lo <= xtol {
            if next != x {
                let (gn, _) = g(next);
                if gn.abs() <= gx.abs() {
                    return Ok(Root { x: next, fx: gn });
                }
            }
            return Ok(Root { x, fx: gx });
        }
        x = next;
    }
    Err(Error::solver(
        "safeguarded Newton did not converge",
        format!("last iterate x = {}, g = {}, bracket [{lo}, {hi}]", last.0, last.1),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let f = |x: f64| x * x * x - 2.0 * x - 5.0;
        let r = brent(f, 2.0, 3.0, f(2.0), f(3.0), 1e-15, 100).unwrap();
        assert!((r.x - 2.0945514815423265).abs() < 1e-14);
    }

    #[test]
    fn brent_rejects_unbracketed() {
        let f = |x: f64| x * x + 1.0;
        assert!(brent(f, -1.0, 1.0, f(-1.0), f(1.0), 1e-12, 50).is_err());
    }

    #[test]
    fn brent_accepts_limit_endpoint() {
        // f -> -1 as x -> 0+, never evaluated there.
        let f = |x: f64| x.ln().tanh();
        let r = brent(f, 0.0, 5.0, -1.0, f(5.0), 1e-14, 200).unwrap();
        assert!((r.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn newton_solves_monotone_equation() {
        let r = newton_increasing(|x| (x.exp() - 3.0, x.exp()), 0.0, 5.0, 4.9, 1e-15, 100).unwrap();
        assert!((r.x - 3f64.ln()).abs() < 1e-14);
    }
}

//! Shared numeric kernels: adaptive quadrature, bracketed root-finding,
//! special functions.

use crate::error::{Error, Result};
use crate::real::Real;

/// Adaptive Simpson integration of `f` on `[a, b]` to absolute tolerance.
///
/// The recursion stops when the usual Richardson estimate `|S2 - S1| / 15`
/// is below the tolerance share of the sub-interval, or at depth 60.
pub fn integrate<R: Real>(f: &impl Fn(R) -> R, a: R, b: R, abs_tol: R) -> Result<R> {
    if a == b {
        return Ok(R::zero());
    }
    if !(a < b) {
        return Err(Error::domain(format!("integrate: bad interval [{a}, {b}]")));
    }
    let tol = abs_tol.max(R::epsilon() * R::of(16.0));
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) / R::of(2.0);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut converged = true;
    // Budget guards against exponential refinement on noisy integrands.
    let mut budget: u64 = 2_000_000;
    let v = adaptive(
        f,
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        tol,
        60,
        &mut converged,
        &mut budget,
    );
    if converged {
        Ok(v)
    } else {
        Err(Error::Integration(format!(
            "adaptive quadrature failed tolerance {tol} on [{a}, {b}]"
        )))
    }
}

#[inline]
fn simpson<R: Real>(a: R, b: R, fa: R, fm: R, fb: R) -> R {
    (b - a) / R::of(6.0) * (fa + R::of(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<R: Real>(
    f: &impl Fn(R) -> R,
    a: R,
    b: R,
    fa: R,
    fm: R,
    fb: R,
    whole: R,
    tol: R,
    depth: u32,
    converged: &mut bool,
    budget: &mut u64,
) -> R {
    let m = (a + b) / R::of(2.0);
    let lm = (a + m) / R::of(2.0);
    let rm = (m + b) / R::of(2.0);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    if err.abs() <= R::of(15.0) * tol {
        return left + right + err / R::of(15.0);
    }
    if depth == 0 || *budget == 0 {
        *converged = false;
        return left + right;
    }
    *budget -= 1;
    let half = tol / R::of(2.0);
    adaptive(f, a, m, fa, flm, fm, left, half, depth - 1, converged, budget)
        + adaptive(f, m, b, fm, frm, fb, right, half, depth - 1, converged, budget)
}

/// Integration over `[a, b]` that first splits at the interior points in
/// `cuts` (where the integrand changes analytic form).
pub fn integrate_split<R: Real>(
    f: &impl Fn(R) -> R,
    a: R,
    b: R,
    cuts: &[R],
    abs_tol: R,
) -> Result<R> {
    let mut pts: Vec<R> = cuts.iter().copied().filter(|&c| c > a && c < b).collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.insert(0, a);
    pts.push(b);
    let share = abs_tol / R::of((pts.len() - 1) as f64);
    let mut total = R::zero();
    for w in pts.windows(2) {
        total = total + integrate(f, w[0], w[1], share)?;
    }
    Ok(total)
}

/// Options for [`solve_bracketed`].
pub struct RootOpts<R> {
    pub x_tol: R,
    pub f_tol: R,
    pub max_iter: usize,
}

impl<R: Real> Default for RootOpts<R> {
    fn default() -> Self {
        RootOpts {
            x_tol: R::epsilon().sqrt() * R::of(1e-4),
            f_tol: R::of(1e-13),
            max_iter: 200,
        }
    }
}

/// Hybrid bisection/secant root solve on a sign-changing bracket.
///
/// Falls back to bisection whenever the secant step leaves the bracket or
/// fails to shrink it fast enough; the bracket is maintained throughout, so
/// convergence is guaranteed for continuous `f`.
pub fn solve_bracketed<R: Real>(
    f: impl Fn(R) -> R,
    mut lo: R,
    mut hi: R,
    opts: &RootOpts<R>,
) -> Result<R> {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo == R::zero() {
        return Ok(lo);
    }
    if fhi == R::zero() {
        return Ok(hi);
    }
    if (flo > R::zero()) == (fhi > R::zero()) {
        return Err(Error::convergence(format!(
            "no sign change on bracket [{lo}, {hi}]: f = ({flo}, {fhi})"
        )));
    }
    let mut x = (lo + hi) / R::of(2.0);
    for _ in 0..opts.max_iter {
        // Secant proposal from the current bracket endpoints.
        let denom = fhi - flo;
        let secant = if denom != R::zero() {
            hi - fhi * (hi - lo) / denom
        } else {
            (lo + hi) / R::of(2.0)
        };
        let width = hi - lo;
        x = if secant > lo + width * R::of(0.01) && secant < hi - width * R::of(0.01) {
            secant
        } else {
            (lo + hi) / R::of(2.0)
        };
        let fx = f(x);
        if fx == R::zero() || fx.abs() <= opts.f_tol {
            return Ok(x);
        }
        if (fx > R::zero()) == (fhi > R::zero()) {
            hi = x;
            fhi = fx;
        } else {
            lo = x;
            flo = fx;
        }
        if hi - lo <= opts.x_tol * (R::one() + x.abs()) {
            return Ok((lo + hi) / R::of(2.0));
        }
    }
    Err(Error::convergence(format!(
        "root iteration exceeded {} steps near {x}",
        opts.max_iter
    )))
}

/// Expand `hi` upward by doubling until `f` changes sign relative to `f(lo)`.
pub fn expand_up<R: Real>(
    f: impl Fn(R) -> R,
    lo: R,
    mut hi: R,
    max_doublings: usize,
) -> Result<(R, R)> {
    let flo = f(lo);
    let mut span = (hi - lo).max(R::of(1e-8));
    for _ in 0..max_doublings {
        let fhi = f(hi);
        if (fhi > R::zero()) != (flo > R::zero()) || fhi == R::zero() {
            return Ok((lo, hi));
        }
        span = span * R::of(2.0);
        hi = hi + span;
    }
    Err(Error::convergence(format!(
        "bracket expansion above {lo} never changed sign"
    )))
}

/// Central-difference derivative with step `1e-6 * max(1, |x|)`.
pub fn central_diff<R: Real>(f: impl Fn(R) -> R, x: R) -> R {
    let h = R::of(1e-6).max(R::epsilon().cbrt()) * R::one().max(x.abs());
    (f(x + h) - f(x - h)) / (R::of(2.0) * h)
}

/// Exponential integral E1(x) = ∫_1^∞ e^{-x t} / t dt for x > 0.
///
/// Series below 1, modified Lentz continued fraction above.
pub fn exp_integral_e1<R: Real>(x: R) -> R {
    assert!(x > R::zero(), "E1 needs a positive argument");
    let euler = R::of(0.577_215_664_901_532_9);
    if x <= R::one() {
        let mut sum = R::zero();
        let mut term = R::one();
        for k in 1..200 {
            let kr = R::of(k as f64);
            term = term * (-x) / kr;
            let add = -term / kr;
            sum = sum + add;
            if add.abs() < R::epsilon() * sum.abs().max(R::one()) {
                break;
            }
        }
        -euler - x.ln() + sum
    } else {
        // Modified Lentz on e^{-x} / (x+1 - 1/(x+3 - 4/(x+5 - 9/(...)))).
        let tiny = R::min_positive_value() / R::epsilon();
        let mut h = tiny;
        let mut c = h;
        let mut d = R::zero();
        for n in 1..200usize {
            let (a, b) = if n == 1 {
                (R::one(), x + R::one())
            } else {
                let k = R::of((n - 1) as f64);
                (-k * k, x + R::of((2 * n - 1) as f64))
            };
            d = b + a * d;
            if d == R::zero() {
                d = tiny;
            }
            c = b + a / c;
            if c == R::zero() {
                c = tiny;
            }
            d = d.recip();
            let del = c * d;
            h = h * del;
            if (del - R::one()).abs() < R::epsilon() * R::of(4.0) {
                break;
            }
        }
        (-x).exp() * h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_exact_on_cubic() {
        let v = integrate(&|x: f64| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_handles_kink_via_split() {
        // |x - 1| on [0, 2]; exact area 1.
        let v = integrate_split(&|x: f64| (x - 1.0).abs(), 0.0, 2.0, &[1.0], 1e-12).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-11);
    }

    #[test]
    fn root_of_shifted_cosine() {
        let r = solve_bracketed(|x: f64| x.cos() - x, 0.0, 1.0, &RootOpts::default()).unwrap();
        assert_relative_eq!(r, 0.739_085_133_215_160_6, epsilon = 1e-10);
    }

    #[test]
    fn bracket_expansion_finds_sign_change() {
        let f = |x: f64| x * x - 100.0;
        let (lo, hi) = expand_up(f, 0.0, 1.0, 64).unwrap();
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        let r = solve_bracketed(f, lo, hi, &RootOpts::default()).unwrap();
        assert_relative_eq!(r, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn e1_matches_quadrature() {
        // Oracle: direct adaptive quadrature of the defining integral with the
        // tail truncated where e^{-xt}/t < 1e-18.
        for &x in &[0.1f64, 0.367_879_441_171_442_33, 1.0, 2.5, 7.0] {
            let upper = (45.0 / x).max(2.0);
            let direct =
                integrate(&|t: f64| (-x * t).exp() / t, 1.0, upper, 1e-14).unwrap();
            assert_relative_eq!(exp_integral_e1(x), direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn central_diff_on_exp() {
        let d = central_diff(|x: f64| x.exp(), 1.3);
        assert_relative_eq!(d, 1.3f64.exp(), max_relative = 1e-9);
    }
}

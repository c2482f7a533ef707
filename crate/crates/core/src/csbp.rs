//! Laplace functionals, exponential change-of-measure weights, and path
//! samplers for the CSBP Z under P_x.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, Poisson};

use crate::error::{Error, Result};
use crate::mechanism::{BranchingMechanism, LevyMeasure};
use crate::numerics::{integrate, solve_bracketed, RootOpts};
use crate::real::Real;
use crate::Mechanism;

/// Documented bounds for the Euler scheme configuration.
pub const STEP_RANGE: (f64, f64) = (1e-6, 0.05);
pub const JUMP_CUTOFF_RANGE: (f64, f64) = (1e-8, 0.5);
/// Default small-jump truncation.
pub const DEFAULT_JUMP_CUTOFF: f64 = 1e-4;

/// A sampled CSBP path on a time grid.
#[derive(Debug, Clone)]
pub struct CsbpPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub extinct_at: Option<f64>,
    pub exploded: bool,
    pub x0: f64,
}

impl CsbpPath {
    pub fn final_time(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// ∫_0^a Z_s ds by the trapezoid rule on the grid.
    pub fn trapezoid_integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, z)| 0.5 * (z[0] + z[1]) * (t[1] - t[0]))
            .sum()
    }
}

/// Exponential martingale weight M_a = e^{qx − qZ_a − ψ(q)∫_0^a Z_s ds}.
#[derive(Debug, Clone, Copy)]
pub struct GirsanovWeight {
    pub q: f64,
    pub value: f64,
    pub integral_term: f64,
}

/// ∫_u^λ dr/ψ(r) for q0 < u ≤ λ.
fn inv_psi_integral<R: Real>(m: &BranchingMechanism<R>, u: R, lam: R) -> Result<R> {
    if u == lam {
        return Ok(R::zero());
    }
    integrate(
        &|r: R| m.eval_psi(r).map(|v| v.recip()).unwrap_or(R::nan()),
        u,
        lam,
        R::of(1e-12),
    )
}

/// The flow u(a, λ) solving ∫_{u(a,λ)}^λ dr/ψ(r) = a.
///
/// Defined for (sub)critical mechanisms and for conservative super-critical
/// ones above the largest root q0 (the integral diverges at q0).
pub fn solve_u<R: Real>(m: &BranchingMechanism<R>, a: R, lam: R) -> Result<R> {
    if !(lam > R::zero()) {
        return Err(Error::domain("solve_u needs λ > 0"));
    }
    if a < R::zero() {
        return Err(Error::domain("solve_u needs a ≥ 0"));
    }
    if a == R::zero() {
        return Ok(lam);
    }
    let q0 = m.largest_root();
    if q0 > R::zero() && lam <= q0 {
        return Err(Error::domain(format!(
            "solve_u: λ = {lam} at or below the largest root q0 = {q0}"
        )));
    }
    // G(u) = ∫_u^λ dr/ψ(r) decreases from +∞ (at q0) to 0 (at λ).
    let g = |u: R| inv_psi_integral(m, u, lam).unwrap_or(R::nan()) - a;
    let mut frac = R::of(0.5);
    let lo = loop {
        let cand = q0 + (lam - q0) * frac;
        let v = g(cand);
        if v.is_finite() && v > R::zero() {
            break cand;
        }
        frac = frac / R::of(2.0);
        if frac < R::of(1e-17) {
            return Err(Error::convergence(
                "solve_u: no bracket above q0 (a too large for the scale)".to_string(),
            ));
        }
    };
    solve_bracketed(
        g,
        lo,
        lam,
        &RootOpts {
            x_tol: R::epsilon() * R::of(4.0),
            f_tol: R::of(1e-12),
            max_iter: 200,
        },
    )
}

/// E_x[e^{−λ Z_a}] = e^{−x u(a,λ)}.
pub fn laplace_za<R: Real>(m: &BranchingMechanism<R>, x: R, a: R, lam: R) -> Result<R> {
    if x < R::zero() {
        return Err(Error::domain("initial mass must be ≥ 0"));
    }
    Ok((-x * solve_u(m, a, lam)?).exp())
}

/// P_x(Z_∞ = 0) = e^{−x q0}.
pub fn extinction_prob<R: Real>(m: &BranchingMechanism<R>, x: R) -> R {
    (-x * m.largest_root()).exp()
}

/// E_x[e^{−λσ}] = e^{−x ψ^{-1}(λ)} for the total mass σ = ∫_0^∞ Z_a da.
pub fn total_mass_laplace<R: Real>(m: &BranchingMechanism<R>, x: R, lam: R) -> Result<R> {
    Ok((-x * m.psi_inverse(lam)?).exp())
}

/// Exact transition sample of Z_t from Z_0 = x for ψ(λ) = βλ².
///
/// Draw N ~ Poisson(x/(βt)); zero if N = 0, else a Gamma(N, scale βt)
/// variable (the sum of N exponentials of mean βt). The Laplace transform
/// is e^{−xλ/(1+βλt)}.
pub fn sample_quadratic_transition(beta: f64, x: f64, t: f64, rng: &mut impl Rng) -> f64 {
    assert!(beta > 0.0 && t > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let mean = x / (beta * t);
    let n = Poisson::new(mean).expect("positive mean").sample(rng);
    if n < 0.5 {
        0.0
    } else {
        Gamma::new(n.round(), beta * t)
            .expect("valid gamma")
            .sample(rng)
    }
}

/// Exact-in-law quadratic CSBP path on a uniform grid.
pub fn sample_quadratic_path(
    beta: f64,
    x: f64,
    tmax: f64,
    h: f64,
    rng: &mut impl Rng,
) -> CsbpPath {
    let n = (tmax / h).round() as usize;
    let mut grid = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut z = x;
    let mut extinct_at = None;
    grid.push(0.0);
    values.push(z);
    for k in 1..=n {
        let t = h * k as f64;
        if z > 0.0 {
            z = sample_quadratic_transition(beta, z, h, rng);
            if z == 0.0 {
                extinct_at = Some(t);
            }
        }
        grid.push(t);
        values.push(z);
    }
    CsbpPath {
        grid,
        values,
        extinct_at,
        exploded: false,
        x0: x,
    }
}

/// Sampler for one jump of the tempered measure e^{−θℓ}π(dℓ) on (ε, ∞).
enum JumpSampler {
    None,
    /// ℓ = ε + Exp(rate).
    ExpShifted { rate: f64, eps: f64 },
    /// Pareto proposal of index `index` from ε, accepted with e^{−temper(ℓ−ε)}.
    ParetoTempered { index: f64, temper: f64, eps: f64 },
    /// Normalized cumulative weights over atom positions.
    Discrete { pos: Vec<f64>, cum: Vec<f64> },
    /// Inverse-CDF table on a fine grid.
    Table { xs: Vec<f64>, cdf: Vec<f64> },
}

impl JumpSampler {
    fn build(m: &Mechanism, eps: f64) -> JumpSampler {
        let th = m.accumulated_shift();
        match m.pi() {
            LevyMeasure::Zero => JumpSampler::None,
            LevyMeasure::ExpDensity => JumpSampler::ExpShifted {
                rate: 1.0 + th,
                eps,
            },
            LevyMeasure::InverseSquareExp { rate } => JumpSampler::ParetoTempered {
                index: 1.0,
                temper: rate + th,
                eps,
            },
            LevyMeasure::Stable { alpha, .. } => JumpSampler::ParetoTempered {
                index: *alpha,
                temper: th,
                eps,
            },
            LevyMeasure::Atoms(atoms) => {
                let mut pos = Vec::new();
                let mut cum = Vec::new();
                let mut acc = 0.0;
                for &(l, mass) in atoms.iter().filter(|&&(l, _)| l > eps) {
                    acc += mass * (-th * l).exp();
                    pos.push(l);
                    cum.push(acc);
                }
                for c in &mut cum {
                    *c /= acc;
                }
                JumpSampler::Discrete { pos, cum }
            }
            LevyMeasure::Tabulated(pts) => {
                let lo = pts[0].0.max(eps);
                let hi = pts.last().unwrap().0;
                let n = 2048;
                let mut xs = Vec::with_capacity(n + 1);
                let mut cdf = Vec::with_capacity(n + 1);
                let dens = |l: f64| -> f64 {
                    let base = crate::mechanism::tabulated_density(pts, l);
                    base * (-th * l).exp()
                };
                let mut acc = 0.0;
                let step = (hi - lo) / n as f64;
                xs.push(lo);
                cdf.push(0.0);
                for i in 0..n {
                    let a = lo + step * i as f64;
                    let b = a + step;
                    acc += 0.5 * (dens(a) + dens(b)) * step;
                    xs.push(b);
                    cdf.push(acc);
                }
                for c in &mut cdf {
                    *c /= acc;
                }
                JumpSampler::Table { xs, cdf }
            }
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            JumpSampler::None => unreachable!("no jump part"),
            JumpSampler::ExpShifted { rate, eps } => {
                eps + Exp::new(*rate).expect("rate > 0").sample(rng)
            }
            JumpSampler::ParetoTempered { index, temper, eps } => loop {
                let u: f64 = rng.random::<f64>().max(1e-300);
                let l = eps * u.powf(-1.0 / index);
                if *temper <= 0.0 || rng.random::<f64>() < (-temper * (l - eps)).exp() {
                    return l;
                }
            },
            JumpSampler::Discrete { pos, cum } => {
                let u: f64 = rng.random();
                let idx = cum.partition_point(|&c| c < u).min(pos.len() - 1);
                pos[idx]
            }
            JumpSampler::Table { xs, cdf } => {
                let u: f64 = rng.random();
                let idx = cdf.partition_point(|&c| c < u).clamp(1, xs.len() - 1);
                let (c0, c1) = (cdf[idx - 1], cdf[idx]);
                let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
                xs[idx - 1] + w * (xs[idx] - xs[idx - 1])
            }
        }
    }
}

/// Euler / compound-Poisson path scheme for a conservative mechanism.
///
/// Diffusion part: Euler step of variance 2βZh. Jump part: compound Poisson
/// for the tempered measure restricted to ℓ > ε, with the (ε,1] compensation
/// moved into the drift. Negative overshoots are absorbed at 0.
pub fn sample_general_path(
    m: &Mechanism,
    x: f64,
    tmax: f64,
    h: f64,
    eps: f64,
    rng: &mut impl Rng,
) -> Result<CsbpPath> {
    if !(h >= STEP_RANGE.0 && h <= STEP_RANGE.1) {
        return Err(Error::Config(format!(
            "step h = {h} outside documented range {STEP_RANGE:?}"
        )));
    }
    if !(eps >= JUMP_CUTOFF_RANGE.0 && eps <= JUMP_CUTOFF_RANGE.1) {
        return Err(Error::Config(format!(
            "jump cutoff ε = {eps} outside documented range {JUMP_CUTOFF_RANGE:?}"
        )));
    }
    let beta = m.beta();
    let has_jumps = !matches!(m.pi(), LevyMeasure::Zero);
    // Deterministic decay rate: effective drift plus the (ε,1] compensator.
    let drift_rate = m.effective_alpha_tilde()? + m.tempered_first_moment(eps, 1.0)?;
    let jump_rate = if has_jumps { m.tempered_mass_above(eps)? } else { 0.0 };
    let sampler = JumpSampler::build(m, eps);
    let normal = Normal::new(0.0, 1.0).unwrap();

    let n = (tmax / h).round().max(1.0) as usize;
    let mut grid = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut z = x;
    let mut extinct_at = None;
    let mut exploded = false;
    grid.push(0.0);
    values.push(z);
    for k in 1..=n {
        let t = h * k as f64;
        if z > 0.0 && !exploded {
            let mut znext = z - drift_rate * z * h;
            if beta > 0.0 {
                znext += (2.0 * beta * z * h).sqrt() * normal.sample(rng);
            }
            if jump_rate > 0.0 {
                let lam = z * jump_rate * h;
                let njumps = Poisson::new(lam).expect("positive rate").sample(rng);
                for _ in 0..(njumps.round() as u64) {
                    znext += sampler.sample(rng);
                }
            }
            if znext <= 0.0 {
                z = 0.0;
                extinct_at = Some(t);
            } else if !znext.is_finite() || znext > 1e30 {
                exploded = true;
                z = f64::INFINITY;
            } else {
                z = znext;
            }
        }
        grid.push(t);
        values.push(z);
    }
    Ok(CsbpPath {
        grid,
        values,
        extinct_at,
        exploded,
        x0: x,
    })
}

/// The weight M_a^{ψ,q} evaluated on the final time of the path.
///
/// For q < 0 the change of measure needs the tempered first moment of π at
/// tilt q to be finite, i.e. ψ_q'(0+) finite.
pub fn girsanov_weight(path: &CsbpPath, m: &Mechanism, q: f64) -> Result<GirsanovWeight> {
    if q < 0.0 {
        let shifted = m.shift(q)?;
        let d = shifted.alpha();
        if !d.is_finite() {
            return Err(Error::domain(format!(
                "girsanov_weight: tilt q = {q} violates the integrability hypothesis"
            )));
        }
    }
    let integral = path.trapezoid_integral();
    let psi_q = m.eval_psi(q)?;
    let value = (q * path.x0 - q * path.final_value() - psi_q * integral).exp();
    Ok(GirsanovWeight {
        q,
        value,
        integral_term: integral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{module_id, substream};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn quad(beta: f64) -> Mechanism {
        Mechanism::quadratic(beta)
    }

    fn example_iv() -> Mechanism {
        Mechanism::critical(0.0, LevyMeasure::ExpDensity).unwrap()
    }

    #[test]
    fn solve_u_quadratic_closed_form() {
        let beta = 0.5;
        let m = quad(beta);
        for &a in &[0.1, 1.0, 4.0] {
            for &lam in &[0.2, 1.0, 10.0] {
                let expect = lam / (1.0 + beta * lam * a);
                assert_relative_eq!(solve_u(&m, a, lam).unwrap(), expect, max_relative = 1e-9);
            }
        }
        assert_eq!(solve_u(&m, 0.0, 3.0).unwrap(), 3.0);
    }

    #[test]
    fn solve_u_stable_closed_form() {
        let (c, alpha) = (1.2, 1.5);
        let m = Mechanism::stable(c, alpha).unwrap();
        for &a in &[0.3, 2.0] {
            for &lam in &[0.5f64, 5.0] {
                let expect = (lam.powf(1.0 - alpha) + c * (alpha - 1.0) * a)
                    .powf(1.0 / (1.0 - alpha));
                let got = solve_u(&m, a, lam).unwrap();
                assert_relative_eq!(got, expect, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn solve_u_flow_property() {
        let m = example_iv();
        let (a, b, lam) = (0.7, 1.3, 2.5);
        let inner = solve_u(&m, b, lam).unwrap();
        let lhs = solve_u(&m, a, inner).unwrap();
        let rhs = solve_u(&m, a + b, lam).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8);
    }

    #[test]
    fn solve_u_super_critical_domain() {
        let m = quad(1.0).shift(-1.0).unwrap(); // q0 = 2
        assert!(solve_u(&m, 1.0, 1.5).is_err());
        let u = solve_u(&m, 1.0, 3.0).unwrap();
        assert!(u > 2.0 && u < 3.0);
    }

    #[test]
    fn laplace_za_values() {
        let beta = 0.5;
        let m = quad(beta);
        assert_eq!(laplace_za(&m, 0.0, 1.0, 2.0).unwrap(), 1.0);
        let (x, a, lam) = (1.3, 0.8, 2.0);
        assert_relative_eq!(
            laplace_za(&m, x, a, lam).unwrap(),
            (-x * lam / (1.0 + beta * lam * a)).exp(),
            max_relative = 1e-9
        );
        // Critical extinction limit: u(a, λ) → q0 = 0.
        assert_relative_eq!(laplace_za(&m, 1.0, 500.0, 1.0).unwrap(), 1.0, epsilon = 1e-2);
    }

    #[test]
    fn extinction_and_total_mass() {
        let m = quad(1.0);
        assert_eq!(extinction_prob(&m, 1.0), 1.0);
        assert_eq!(extinction_prob(&m, 0.0), 1.0);
        let sup = m.shift(-1.0).unwrap();
        assert_relative_eq!(extinction_prob(&sup, 1.0), (-2.0f64).exp(), epsilon = 1e-9);

        let beta = 0.5;
        let mq = quad(beta);
        for &lam in &[0.1, 1.0, 10.0] {
            assert_relative_eq!(
                total_mass_laplace(&mq, 2.0, lam).unwrap(),
                (-2.0 * (lam / beta).sqrt()).exp(),
                max_relative = 1e-9
            );
        }
        assert_eq!(total_mass_laplace(&mq, 1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            total_mass_laplace(&sup, 3.0, 0.0).unwrap(),
            (-6.0f64).exp(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn quadratic_transition_moments() {
        let mut rng = substream(7, module_id::CSBP, 0);
        let (beta, x, t) = (1.0, 1.0, 1.0);
        let n = 100_000;
        let mut sum = 0.0;
        let mut zeros = 0usize;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let z = sample_quadratic_transition(beta, x, t, &mut rng);
            sum += z;
            sumsq += z * z;
            if z == 0.0 {
                zeros += 1;
            }
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        // Criticality: E Z_t = x.
        assert!((mean - x).abs() <= 3.0 * se, "mean {mean} se {se}");
        // P(Z_t = 0) = e^{−x/(βt)}.
        let p0 = zeros as f64 / n as f64;
        let p = (-x / (beta * t)).exp();
        let se0 = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p0 - p).abs() <= 3.0 * se0, "p0 {p0} expect {p}");
        assert_eq!(sample_quadratic_transition(beta, 0.0, t, &mut rng), 0.0);
    }

    #[test]
    fn general_path_zero_start_stays_zero() {
        let m = example_iv();
        let mut rng = substream(8, module_id::CSBP, 1);
        let p = sample_general_path(&m, 0.0, 1.0, 1e-3, 1e-4, &mut rng).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert!(!p.exploded);
    }

    #[test]
    fn general_path_first_moment_example_iv() {
        // Critical mechanism: E Z_t = x for all t.
        let m = example_iv();
        let (x, tmax, h) = (1.0, 0.5, 1e-3);
        let n = 20_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for rep in 0..n {
            let mut rng = substream(9, module_id::CSBP, rep as u64);
            let p = sample_general_path(&m, x, tmax, h, 1e-4, &mut rng).unwrap();
            let z = p.final_value();
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!((mean - x).abs() <= 3.0 * se, "mean {mean} ± {se}");
    }

    #[test]
    fn general_path_config_errors() {
        let m = example_iv();
        let mut rng = substream(1, module_id::CSBP, 0);
        assert!(sample_general_path(&m, 1.0, 1.0, 0.5, 1e-4, &mut rng).is_err());
        assert!(sample_general_path(&m, 1.0, 1.0, 1e-3, 0.9, &mut rng).is_err());
    }

    #[test]
    fn girsanov_weight_basics() {
        let m = quad(0.5);
        let mut rng = substream(10, module_id::CSBP, 3);
        let p = sample_quadratic_path(0.5, 1.0, 1.0, 1.0 / 256.0, &mut rng);
        let w = girsanov_weight(&p, &m, 0.0).unwrap();
        assert_eq!(w.value, 1.0);
        // Boundedness: M ≤ e^{qx} for q > 0, ψ(q) ≥ 0.
        let w2 = girsanov_weight(&p, &m, 1.0).unwrap();
        assert!(w2.value <= (1.0f64).exp() + 1e-12);
    }

    #[test]
    fn girsanov_martingale_mean_quadratic() {
        let (beta, x, a, q) = (0.5, 1.0, 1.0, 0.7);
        let m = quad(beta);
        let n = 20_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for rep in 0..n {
            let mut rng = substream(11, module_id::CSBP, rep as u64);
            let p = sample_quadratic_path(beta, x, a, 1.0 / 256.0, &mut rng);
            let w = girsanov_weight(&p, &m, q).unwrap().value;
            sum += w;
            sumsq += w * w;
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean} ± {se}");
    }

    #[test]
    fn girsanov_reweighting_matches_shifted_law() {
        // Ê^ψ[M_a e^{−λ Z_a}] = E^{ψ_q}[e^{−λ Z_a}].
        let (beta, x, a, q, lam) = (0.5, 1.0, 0.75, 0.6, 0.9);
        let m = quad(beta);
        let n = 40_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for rep in 0..n {
            let mut rng = substream(12, module_id::CSBP, rep as u64);
            let p = sample_quadratic_path(beta, x, a, 1.0 / 256.0, &mut rng);
            let w = girsanov_weight(&p, &m, q).unwrap().value;
            let v = w * (-lam * p.final_value()).exp();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
        let expect = laplace_za(&m.shift(q).unwrap(), x, a, lam).unwrap();
        assert!(
            (mean - expect).abs() <= 3.0 * se + 2e-4,
            "mean {mean} expect {expect} se {se}"
        );
    }

    #[test]
    fn girsanov_negative_tilt_integrability() {
        let m = example_iv();
        let mut rng = substream(13, module_id::CSBP, 0);
        let p = sample_general_path(&m, 1.0, 0.2, 1e-3, 1e-4, &mut rng).unwrap();
        // q = −0.5 is inside Θ' for the exponential density: allowed.
        assert!(girsanov_weight(&p, &m, -0.5).is_ok());
        // q = −1 is outside.
        assert!(girsanov_weight(&p, &m, -1.0).is_err());
    }
}

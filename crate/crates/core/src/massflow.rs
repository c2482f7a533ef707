//! The decreasing total-mass process (σ_θ), its explosion time
//! A = inf{θ : σ_θ < ∞}, the size-biased mass σ*, and the closed-form laws
//! tying them together.
//!
//! Quadratic mechanisms get exact samplers built on the stable-1/2
//! subordinator τ_θ = θ²/G² and on first-passage (inverse Gaussian) laws;
//! every other mechanism goes through the numeric transform inversion of
//! [`crate::laplace`].

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, InverseGaussian, StandardNormal};

use crate::error::{Error, Result};
use crate::laplace::{InvertedCdf, PsiInverseTracker};
use crate::mechanism::{BranchingMechanism, Criticality, LevyMeasure};
use crate::numerics::{integrate, solve_bracketed, RootOpts};
use crate::real::Real;
use crate::Mechanism;

/// σ value with ∞ as a distinguished flag, never a float sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassValue {
    Finite(f64),
    Infinite,
}

impl MassValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, MassValue::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            MassValue::Finite(v) => Some(*v),
            MassValue::Infinite => None,
        }
    }
}

/// Where a sampled explosion time landed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExplosionTime {
    /// A ∈ (θ_∞, 0).
    Interior(f64),
    /// The atom at θ_∞ (only when θ_∞ belongs to the domain).
    AtLowerEndpoint,
}

/// Samples of (σ_θ) on a θ-grid.
#[derive(Debug, Clone)]
pub struct MassTrajectory {
    pub thetas: Vec<f64>,
    pub sigmas: Vec<MassValue>,
    /// Bracket around A when the grid straddles it (refined to width 1e-4).
    pub explosion_bracket: Option<(f64, f64)>,
    pub under_excursion: bool,
}

impl MassTrajectory {
    /// Midpoint estimate of A when the trajectory straddles it.
    pub fn explosion_estimate(&self) -> Option<f64> {
        self.explosion_bracket.map(|(lo, hi)| 0.5 * (lo + hi))
    }

    pub fn is_non_increasing(&self) -> bool {
        self.sigmas.windows(2).all(|w| match (w[0], w[1]) {
            (MassValue::Infinite, _) => true,
            (MassValue::Finite(_), MassValue::Infinite) => false,
            (MassValue::Finite(a), MassValue::Finite(b)) => a >= b,
        })
    }
}

/// τ_θ, the stable-1/2 subordinator at time θ (first passage of Brownian
/// motion at level θ): τ_θ = θ²/G².
pub fn sample_tau(theta: f64, rng: &mut impl Rng) -> f64 {
    assert!(theta >= 0.0);
    if theta == 0.0 {
        return 0.0;
    }
    loop {
        let g: f64 = StandardNormal.sample(rng);
        if g != 0.0 {
            return theta * theta / (g * g);
        }
    }
}

fn require_critical<R: Real>(m: &BranchingMechanism<R>, what: &str) -> Result<()> {
    if m.classify().criticality == Criticality::Critical {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} needs a critical mechanism")))
    }
}

fn is_plain_quadratic(m: &Mechanism) -> bool {
    matches!(m.pi(), LevyMeasure::Zero) && m.accumulated_shift() == 0.0
}

// ---------------------------------------------------------------------------
// Closed-form evaluators (generic over the scalar).
// ---------------------------------------------------------------------------

/// P[σ_q < ∞ | σ_θ] = e^{−σ_θ ψ_θ(q̄ − q)} for q ≤ θ.
pub fn prob_finite_given<R: Real>(
    m: &BranchingMechanism<R>,
    theta: R,
    q: R,
    sigma_theta: R,
) -> Result<R> {
    if q > theta {
        return Err(Error::domain("needs q ≤ θ"));
    }
    if sigma_theta < R::zero() {
        return Err(Error::domain("σ_θ must be non-negative"));
    }
    let qbar = m.bar_theta(q)?;
    let expo = m.eval_psi(qbar - q + theta)? - m.eval_psi(theta)?;
    Ok((-sigma_theta * expo).exp())
}

/// E[e^{−λσ_q} | σ_θ] = e^{−σ_θ ψ_θ(ψ_q^{-1}(λ))} for q ≤ θ.
pub fn conditional_laplace_growth<R: Real>(
    m: &BranchingMechanism<R>,
    theta: R,
    q: R,
    sigma_theta: R,
    lam: R,
) -> Result<R> {
    if q > theta {
        return Err(Error::domain("needs q ≤ θ"));
    }
    // r = ψ_q^{-1}(λ) on the shifted scale; then ψ_θ(r) = ψ(r+θ) − ψ(θ).
    let r = m.shift(q)?.psi_inverse(lam)?;
    let expo = m.eval_psi(r + theta)? - m.eval_psi(theta)?;
    Ok((-sigma_theta * expo).exp())
}

/// Survival function of the explosion time: N[A > θ] = θ̄ − θ.
///
/// This is a value of the (infinite) excursion measure and may exceed 1.
pub fn law_of_a_survival<R: Real>(m: &BranchingMechanism<R>, theta: R) -> Result<R> {
    require_critical(m, "law_of_a_survival")?;
    if theta >= R::zero() {
        return Ok(R::zero());
    }
    let class = m.classify();
    if theta < class.theta_inf {
        return Err(Error::domain(format!(
            "θ = {theta} below θ_inf = {}",
            class.theta_inf
        )));
    }
    if theta == class.theta_inf {
        return Ok(class.bar_theta_inf - class.theta_inf);
    }
    Ok(m.bar_theta(theta)? - theta)
}

/// Density of A at r ∈ (θ_∞, 0): 1 − ψ'(r)/ψ'(r̄).
///
/// Only defined when θ_∞ ∉ Θ (otherwise A carries an atom at θ_∞).
pub fn density_of_a<R: Real>(m: &BranchingMechanism<R>, r: R) -> Result<R> {
    require_critical(m, "density_of_a")?;
    let class = m.classify();
    if class.theta_inf_in_theta() {
        return Err(Error::domain(
            "A has an atom at θ_inf; the interior density does not apply",
        ));
    }
    if !(r > class.theta_inf && r < R::zero()) {
        return Err(Error::domain(format!("r = {r} outside (θ_inf, 0)")));
    }
    let rbar = m.bar_theta(r)?;
    Ok(R::one() - m.eval_dpsi(r)? / m.eval_dpsi(rbar)?)
}

/// E[e^{−λ σ_A} | A = θ] = ψ'(θ̄) / ψ'(ψ^{-1}(λ + ψ(θ))) for θ ∈ (θ_∞, 0).
pub fn sigma_a_laplace<R: Real>(m: &BranchingMechanism<R>, theta: R, lam: R) -> Result<R> {
    require_critical(m, "sigma_a_laplace")?;
    let class = m.classify();
    if !(theta > class.theta_inf && theta < R::zero()) {
        return Err(Error::domain(format!("θ = {theta} outside (θ_inf, 0)")));
    }
    if lam < R::zero() {
        return Err(Error::domain("λ must be non-negative"));
    }
    let bar = m.bar_theta(theta)?;
    let w = m.psi_inverse(lam + m.eval_psi(theta)?)?;
    Ok(m.eval_dpsi(bar)? / m.eval_dpsi(w)?)
}

/// E[e^{−λ σ*_θ}] for the size-biased mass at θ > 0 — the same ratio with
/// θ̄ = θ.
pub fn sigma_star_laplace<R: Real>(m: &BranchingMechanism<R>, theta: R, lam: R) -> Result<R> {
    require_critical(m, "sigma_star_laplace")?;
    if !(theta > R::zero()) {
        return Err(Error::domain("σ* needs θ > 0"));
    }
    let w = m.psi_inverse(lam + m.eval_psi(theta)?)?;
    Ok(m.eval_dpsi(theta)? / m.eval_dpsi(w)?)
}

/// Unnormalized density of the time-change variable of the post-explosion
/// tree: (1 − ψ'(r)/ψ'(ř)) on (0, θ̄_∞).
pub fn g_a_density<R: Real>(m: &BranchingMechanism<R>, r: R) -> Result<R> {
    require_critical(m, "g_a_density")?;
    let class = m.classify();
    if class.theta_inf_in_theta() {
        return Err(Error::domain(
            "θ_inf belongs to Θ: the window density does not apply",
        ));
    }
    if !(r > R::zero() && r < class.bar_theta_inf) {
        return Err(Error::domain(format!("r = {r} outside (0, θ̄_inf)")));
    }
    let rneg = m.check_theta(r)?;
    Ok(R::one() - m.eval_dpsi(r)? / m.eval_dpsi(rneg)?)
}

/// Numeric check value: ∫_θ^0 density_of_a(r) dr (equals θ̄ − θ when the
/// density form applies).
///
/// Close to 0⁻ the ratio ψ'(r)/ψ'(r̄) is a 0/0 form whose numeric evaluation
/// degrades, so the last stretch is handled by a midpoint stub.
pub fn integrate_a_density<R: Real>(m: &BranchingMechanism<R>, theta: R) -> Result<R> {
    let cut = -R::of(1e-4);
    if theta >= cut {
        return Ok(density_of_a(m, theta / R::of(2.0))? * -theta);
    }
    let main = integrate(
        &|r: R| density_of_a(m, r).unwrap_or(R::nan()),
        theta,
        cut,
        R::of(1e-9),
    )?;
    let stub = density_of_a(m, cut / R::of(2.0))? * -cut;
    Ok(main + stub)
}

// ---------------------------------------------------------------------------
// Samplers (f64).
// ---------------------------------------------------------------------------

/// Total mass σ of a quadratic-shift CSBP started at x: E e^{−λσ} =
/// e^{−x(√(λ/β+θ²)−θ)}. Defective for θ < 0 (infinite with prob 1−e^{−2|θ|x}).
pub fn sample_quadratic_total_mass(
    beta: f64,
    x: f64,
    theta: f64,
    rng: &mut impl Rng,
) -> MassValue {
    assert!(beta > 0.0 && x >= 0.0);
    if x == 0.0 {
        return MassValue::Finite(0.0);
    }
    let a = x / (2.0 * beta).sqrt();
    if theta < 0.0 {
        let p_fin = (-2.0 * a * theta.abs() * (2.0 * beta).sqrt()).exp();
        if rng.random::<f64>() >= p_fin {
            return MassValue::Infinite;
        }
    }
    if theta == 0.0 {
        return MassValue::Finite(sample_tau(a, rng));
    }
    let nu = theta.abs() * (2.0 * beta).sqrt();
    let ig = InverseGaussian::new(a / nu, a * a).expect("valid IG");
    MassValue::Finite(ig.sample(rng))
}

/// Sampler for σ_0 under P_x for a critical mechanism.
///
/// Quadratic: exact via σ_0 = τ_{x/√(2β)}. General: numeric inversion of
/// e^{−x ψ^{-1}(λ)} with the support shift x/ψ'(∞) factored out.
pub enum Sigma0Sampler {
    ExactQuadratic { beta: f64, x: f64 },
    Inverted(InvertedCdf),
}

impl Sigma0Sampler {
    pub fn new(m: &Mechanism, x: f64) -> Result<Self> {
        require_critical(m, "Sigma0Sampler")?;
        if x < 0.0 {
            return Err(Error::domain("x must be non-negative"));
        }
        if is_plain_quadratic(m) {
            return Ok(Sigma0Sampler::ExactQuadratic { beta: m.beta(), x });
        }
        let cinf = m.psi_prime_at_infinity();
        let t0 = if cinf.is_finite() { x / cinf } else { 0.0 };
        let mut tracker = PsiInverseTracker::new(m, 0.0);
        let mut phi = |s: Complex64| -> Result<Complex64> {
            let w = tracker.eval(s)?;
            Ok(-x * w)
        };
        Ok(Sigma0Sampler::Inverted(InvertedCdf::build_shifted(
            &mut phi, t0,
        )?))
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            Sigma0Sampler::ExactQuadratic { beta, x } => {
                if *x == 0.0 {
                    0.0
                } else {
                    sample_tau(x / (2.0 * beta).sqrt(), rng)
                }
            }
            Sigma0Sampler::Inverted(cdf) => cdf.sample(rng),
        }
    }
}

/// One backward step of the mass chain: σ_q given σ_θ = s for q ≤ θ.
///
/// The conditional law is s plus a (possibly killed) subordinator value with
/// exponent ψ_θ ∘ ψ_q^{-1} run for time s. Quadratic mechanisms use the
/// exact first-passage representation; others invert the transform.
pub fn sample_growth(
    m: &Mechanism,
    theta: f64,
    q: f64,
    sigma_theta: f64,
    rng: &mut impl Rng,
) -> Result<MassValue> {
    if q > theta {
        return Err(Error::domain("needs q ≤ θ"));
    }
    if sigma_theta < 0.0 {
        return Err(Error::domain("σ_θ must be non-negative"));
    }
    if sigma_theta == 0.0 || q == theta {
        return Ok(MassValue::Finite(sigma_theta));
    }
    let p_fin = prob_finite_given(m, theta, q, sigma_theta)?;
    if rng.random::<f64>() >= p_fin {
        return Ok(MassValue::Infinite);
    }
    if is_plain_quadratic(m) {
        let beta = m.beta();
        let delta = theta - q;
        let a = (2.0 * beta).sqrt() * delta * sigma_theta;
        let t = if q == 0.0 {
            sample_tau(a, rng)
        } else {
            let nu = (2.0 * beta).sqrt() * q.abs();
            InverseGaussian::new(a / nu, a * a)
                .expect("valid IG")
                .sample(rng)
        };
        return Ok(MassValue::Finite(sigma_theta + t));
    }
    let cdf = growth_cdf(m, theta, q, sigma_theta)?;
    Ok(MassValue::Finite(cdf.sample(rng)))
}

/// Inverted CDF of σ_q given σ_θ and {σ_q < ∞}, for repeated sampling at a
/// fixed conditioning value (general mechanisms).
pub fn growth_cdf(m: &Mechanism, theta: f64, q: f64, sigma_theta: f64) -> Result<InvertedCdf> {
    let phi0 = {
        let qbar = m.bar_theta(q)?;
        m.eval_psi(qbar - q + theta)? - m.eval_psi(theta)?
    };
    let psi_theta_real = m.eval_psi(theta)?;
    let psi_q = m.eval_psi(q)?;
    let mut tracker = PsiInverseTracker::new(m, psi_q);
    let mut phi = |s: Complex64| -> Result<Complex64> {
        let w = tracker.eval(s)?; // ψ^{-1}(s + ψ(q)), so ψ_q^{-1}(s) = w − q
        let num = m.eval_psi_complex(w - q + theta) - psi_theta_real;
        Ok(-sigma_theta * (num - phi0))
    };
    InvertedCdf::build_shifted(&mut phi, sigma_theta)
}

/// Inverse-CDF sample of A given σ_0: solve ψ(q̄ − q) = −ln U / σ_0.
pub fn sample_a_given_sigma0(
    m: &Mechanism,
    sigma0: f64,
    rng: &mut impl Rng,
) -> Result<ExplosionTime> {
    require_critical(m, "sample_a_given_sigma0")?;
    if !(sigma0 > 0.0) {
        return Err(Error::domain("σ_0 must be positive and finite"));
    }
    let class = m.classify();
    let u: f64 = rng.random::<f64>().max(1e-300);
    let target = -u.ln() / sigma0;
    // Atom at θ_inf: the exponent g(q) = ψ(q̄ − q) stays bounded on
    // (θ_inf, 0) exactly when θ̄_inf is finite (θ_inf ∈ Θ').
    if class.bar_theta_inf.is_finite() {
        let gmax = m.eval_psi(class.bar_theta_inf - class.theta_inf)?;
        if target >= gmax {
            return Ok(ExplosionTime::AtLowerEndpoint);
        }
    }
    let g = |q: f64| -> f64 {
        let qbar = match m.bar_theta(q) {
            Ok(v) => v,
            Err(_) => return f64::NAN,
        };
        m.eval_psi(qbar - q).unwrap_or(f64::NAN) - target
    };
    // g decreases from g(θ_inf+) to 0 at 0−: bracket below zero.
    let lo = if class.theta_inf.is_finite() {
        let mut t = 0.5;
        loop {
            let cand = class.theta_inf + (0.0 - class.theta_inf) * t;
            let v = g(cand);
            if v.is_finite() && v > 0.0 {
                break cand;
            }
            t /= 2.0;
            if t < 1e-15 {
                return Err(Error::convergence("no bracket above θ_inf".to_string()));
            }
        }
    } else {
        let mut cand = -1.0;
        loop {
            let v = g(cand);
            if v.is_finite() && v > 0.0 {
                break cand;
            }
            cand *= 2.0;
            if cand < -1e12 {
                return Err(Error::convergence(
                    "downward bracket expansion failed".to_string(),
                ));
            }
        }
    };
    let a = solve_bracketed(g, lo, 0.0, &RootOpts::default())?;
    Ok(ExplosionTime::Interior(a))
}

/// Sampler for σ*_θ (θ > 0) and, through ψ(θ̄) = ψ(θ), for σ_A given
/// A = θ < 0.
pub enum SizeBiasedMassSampler {
    /// Quadratic closed form: σ* = 1/(2β τ_θ̄).
    ExactQuadratic { beta: f64, bar_theta: f64 },
    Inverted(InvertedCdf),
}

impl SizeBiasedMassSampler {
    /// σ*_θ for θ > 0 on a critical mechanism (exact when quadratic).
    pub fn sigma_star(m: &Mechanism, theta: f64) -> Result<Self> {
        require_critical(m, "sigma_star")?;
        if !(theta > 0.0) {
            return Err(Error::domain("σ* needs θ > 0"));
        }
        if is_plain_quadratic(m) {
            return Ok(SizeBiasedMassSampler::ExactQuadratic {
                beta: m.beta(),
                bar_theta: theta,
            });
        }
        Self::inverted(m, theta)
    }

    /// σ_A given A = θ for θ ∈ (θ_inf, 0), always through the transform
    /// inversion (the exact σ* route serves as its independent check).
    pub fn sigma_a_given(m: &Mechanism, theta: f64) -> Result<Self> {
        require_critical(m, "sigma_a_given")?;
        let class = m.classify();
        if !(theta > class.theta_inf && theta < 0.0) {
            return Err(Error::domain(format!("θ = {theta} outside (θ_inf, 0)")));
        }
        Self::inverted(m, theta)
    }

    fn inverted(m: &Mechanism, theta: f64) -> Result<Self> {
        let bar = m.bar_theta(theta)?;
        let dbar = m.eval_dpsi(bar)?;
        let psi_theta = m.eval_psi(theta)?;
        let mut tracker = PsiInverseTracker::new(m, psi_theta);
        let mut phi = |s: Complex64| -> Result<Complex64> {
            let w = tracker.eval(s)?;
            let d = m.eval_dpsi_complex(w);
            Ok(Complex64::new(dbar, 0.0).ln() - d.ln())
        };
        Ok(SizeBiasedMassSampler::Inverted(InvertedCdf::build(
            &mut phi,
        )?))
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            SizeBiasedMassSampler::ExactQuadratic { beta, bar_theta } => {
                1.0 / (2.0 * beta * sample_tau(*bar_theta, rng))
            }
            SizeBiasedMassSampler::Inverted(cdf) => cdf.sample(rng),
        }
    }
}

/// Post-explosion mass path, conditionally on A = θ < 0 (quadratic only):
/// σ_{A+u} = 1/(2β τ'_{|θ|+u}) with τ' a fresh stable-1/2 path, sampled with
/// independent increments across the grid.
pub fn sample_post_explosion(
    m: &Mechanism,
    a_theta: f64,
    offsets: &[f64],
    rng: &mut impl Rng,
) -> Result<MassTrajectory> {
    require_critical(m, "sample_post_explosion")?;
    if !is_plain_quadratic(m) {
        return Err(Error::domain(
            "post-explosion path sampling is exact-quadratic only",
        ));
    }
    if !(a_theta < 0.0) {
        return Err(Error::domain("conditioning explosion time must be negative"));
    }
    if offsets.is_empty() || offsets[0] < 0.0 || offsets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("offsets must be increasing and non-negative"));
    }
    let beta = m.beta();
    let mut tau = sample_tau(a_theta.abs() + offsets[0], rng);
    let mut thetas = Vec::with_capacity(offsets.len());
    let mut sigmas = Vec::with_capacity(offsets.len());
    thetas.push(a_theta + offsets[0]);
    sigmas.push(MassValue::Finite(1.0 / (2.0 * beta * tau)));
    for w in offsets.windows(2) {
        tau += sample_tau(w[1] - w[0], rng);
        thetas.push(a_theta + w[1]);
        sigmas.push(MassValue::Finite(1.0 / (2.0 * beta * tau)));
    }
    Ok(MassTrajectory {
        thetas,
        sigmas,
        explosion_bracket: Some((a_theta, a_theta)),
        under_excursion: true,
    })
}

/// Restricted-window sampler for the density (1 − ψ'(r)/ψ'(ř)) on (0, B].
///
/// The density need not be normalizable on all of (0, θ̄_∞) (quadratic:
/// constant 2), so sampling is exposed on a user-chosen bounded window and
/// normalized there.
pub struct GaWindowSampler {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    total: f64,
}

impl GaWindowSampler {
    pub fn new(m: &Mechanism, window_hi: f64) -> Result<Self> {
        require_critical(m, "GaWindowSampler")?;
        let class = m.classify();
        if class.theta_inf_in_theta() {
            return Err(Error::domain(
                "θ_inf belongs to Θ: the window density does not apply",
            ));
        }
        if !(window_hi > 0.0) || window_hi >= class.bar_theta_inf {
            return Err(Error::domain(format!(
                "window (0, {window_hi}] must sit inside (0, θ̄_inf = {})",
                class.bar_theta_inf
            )));
        }
        let n = 512;
        let mut grid = Vec::with_capacity(n + 1);
        let mut cdf = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        grid.push(0.0);
        cdf.push(0.0);
        // Midpoint rule keeps clear of the 0/0 ratio at the left edge.
        let cell = window_hi / n as f64;
        for i in 1..=n {
            let r = cell * i as f64;
            acc += g_a_density(m, r - 0.5 * cell)? * cell;
            grid.push(r);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::domain("window density integrated to zero"));
        }
        Ok(GaWindowSampler {
            grid,
            cdf,
            total: acc,
        })
    }

    /// Unnormalized mass of the window.
    pub fn window_mass(&self) -> f64 {
        self.total
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random::<f64>() * self.total;
        let idx = self
            .cdf
            .partition_point(|&c| c < u)
            .clamp(1, self.grid.len() - 1);
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.grid[idx - 1] + w * (self.grid[idx] - self.grid[idx - 1])
    }
}

/// Importance-sampling estimate of E^{ψ_q}[F(σ)] from samples drawn under ψ,
/// with dP^{ψ_q}/dP^ψ = e^{qx − ψ(q)σ} 1{σ < ∞}.
///
/// Returns (estimate, standard error, effective sample size).
pub fn girsanov_mass_reweight(
    samples: &[MassValue],
    m: &Mechanism,
    q: f64,
    x: f64,
    f: impl Fn(f64) -> f64,
) -> Result<(f64, f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySample("no σ samples".into()));
    }
    if q < 0.0 {
        return Err(Error::domain("reweighting needs q ≥ 0"));
    }
    let psi_q = m.eval_psi(q)?;
    // ψ(q0) is zero up to root-finding residue; only genuinely negative
    // values (unbounded weights) are rejected.
    if psi_q < -1e-9 {
        return Err(Error::domain(
            "needs ψ(q) ≥ 0 so that the weight is a.s. bounded",
        ));
    }
    let n = samples.len() as f64;
    let mut vals = Vec::with_capacity(samples.len());
    let mut wsum = 0.0;
    let mut w2sum = 0.0;
    for s in samples {
        let (w, v) = match s {
            MassValue::Infinite => (0.0, 0.0),
            MassValue::Finite(sig) => {
                let w = (q * x - psi_q * sig).exp();
                (w, w * f(*sig))
            }
        };
        wsum += w;
        w2sum += w * w;
        vals.push(v);
    }
    let ess = if w2sum > 0.0 { wsum * wsum / w2sum } else { 0.0 };
    if ess < 50.0 {
        return Err(Error::DegenerateWeights(format!(
            "effective sample size {ess:.1} below 50"
        )));
    }
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt(), ess))
}

/// How a mass trajectory is anchored at the top of the θ-grid.
#[derive(Debug, Clone, Copy)]
pub enum MassStart {
    /// Under P_x: σ at the largest grid θ is the total mass of the
    /// ψ_θ-CSBP started from x.
    Population { x: f64 },
    /// Excursion-style conditioning: σ at the largest grid θ is given.
    Conditioned { sigma: f64 },
}

/// Width to which the bracket around A is refined.
pub const EXPLOSION_BRACKET_WIDTH: f64 = 1e-4;

/// Sample (σ_θ) on a θ-grid by walking the backward (growth) kernel from the
/// largest θ down, then refine the bracket around A by conditioned bisection
/// (proposals from the backward kernel, an exact rejection against the
/// left-endpoint-infinite event).
///
/// Exact for quadratic mechanisms; general mechanisms run every backward
/// step through the transform inversion (slow, desk scale only).
pub fn simulate_mass_trajectory(
    m: &Mechanism,
    start: MassStart,
    thetas: &[f64],
    rng: &mut impl Rng,
) -> Result<MassTrajectory> {
    require_critical(m, "simulate_mass_trajectory")?;
    if thetas.is_empty() || thetas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("θ-grid must be strictly increasing"));
    }
    let quadratic = is_plain_quadratic(m);
    let top = *thetas.last().unwrap();
    let mut rev: Vec<MassValue> = Vec::with_capacity(thetas.len());
    let first = match start {
        MassStart::Conditioned { sigma } => {
            if !(sigma >= 0.0) {
                return Err(Error::domain("conditioned σ must be non-negative"));
            }
            MassValue::Finite(sigma)
        }
        MassStart::Population { x } => {
            if quadratic {
                sample_quadratic_total_mass(m.beta(), x, top, rng)
            } else {
                if top < 0.0 {
                    return Err(Error::domain(
                        "general-mechanism trajectories need the top grid point ≥ 0",
                    ));
                }
                let shifted = m.shift(top)?;
                MassValue::Finite(Sigma0Sampler::new(&shifted, x)?.sample(rng))
            }
        }
    };
    rev.push(first);
    for pair in thetas.windows(2).rev() {
        let (q, th) = (pair[0], pair[1]);
        let next = match *rev.last().unwrap() {
            MassValue::Infinite => MassValue::Infinite,
            MassValue::Finite(s) => sample_growth(m, th, q, s, rng)?,
        };
        rev.push(next);
    }
    rev.reverse();
    let sigmas = rev;
    // Conditionally on σ_θk = s and σ_{θ_{k−1}} = ∞, the Markov property
    // gives A an explicit CDF F(q) = P(σ_q < ∞ | σ_θk = s) truncated to the
    // bracketing cell; refine by inverse-CDF bisection on F.
    let mut explosion_bracket = None;
    if let Some(k) = sigmas.iter().position(|s| s.is_finite()) {
        if k > 0 {
            let mut lo = thetas[k - 1];
            let mut hi = thetas[k];
            let s_hi = sigmas[k].finite().unwrap();
            let anchor = hi;
            let f = |q: f64| -> Result<f64> { prob_finite_given(m, anchor, q, s_hi) };
            let f_lo = f(lo)?;
            let f_hi = 1.0;
            let u = f_lo + rng.random::<f64>() * (f_hi - f_lo);
            while hi - lo > EXPLOSION_BRACKET_WIDTH {
                let mid = 0.5 * (lo + hi);
                if f(mid)? < u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            explosion_bracket = Some((lo, hi));
        }
    }
    Ok(MassTrajectory {
        thetas: thetas.to_vec(),
        sigmas,
        explosion_bracket,
        under_excursion: matches!(start, MassStart::Conditioned { .. }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csbp;
    use crate::streams::{module_id, substream};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use statrs::distribution::{ContinuousCDF, Gamma, Normal};

    fn quad(beta: f64) -> Mechanism {
        Mechanism::quadratic(beta)
    }

    fn example_iv() -> Mechanism {
        Mechanism::critical(0.0, LevyMeasure::ExpDensity).unwrap()
    }

    fn ks_stat(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = samples.len() as f64;
        let mut sup: f64 = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let c = cdf(x);
            sup = sup
                .max((c - i as f64 / n).abs())
                .max((c - (i + 1) as f64 / n).abs());
        }
        sup
    }

    /// CDF of τ_t: P(τ_t ≤ x) = 2(1 − Φ(t/√x)).
    fn tau_cdf(t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let norm = Normal::new(0.0, 1.0).unwrap();
        2.0 * (1.0 - norm.cdf(t / x.sqrt()))
    }

    #[test]
    fn tau_cdf_formula_matches_density_quadrature() {
        // Oracle for the closed-form CDF used across the tests: integrate
        // the density t/√(2πx³)·e^{−t²/2x} numerically.
        let t = 1.3;
        for &x in &[0.4f64, 1.0, 3.7] {
            let dens = |y: f64| {
                t / (2.0 * std::f64::consts::PI * y.powi(3)).sqrt()
                    * (-t * t / (2.0 * y)).exp()
            };
            let direct = integrate(&dens, 1e-9, x, 1e-10).unwrap();
            assert_abs_diff_eq!(direct, tau_cdf(t, x), epsilon = 1e-7);
        }
    }

    #[test]
    fn sigma0_quadratic_laplace_and_ks() {
        let (beta, x) = (0.5, 1.0);
        let m = quad(beta);
        let sampler = Sigma0Sampler::new(&m, x).unwrap();
        let mut rng = substream(21, module_id::MASS, 0);
        let n = 20_000;
        let mut vals: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        // Ê[e^{−σ}] ≈ e^{−√2} since ψ^{-1}(1) = √(1/β) = √2.
        let mean: f64 = vals.iter().map(|&s| (-s).exp()).sum::<f64>() / n as f64;
        let var: f64 = vals
            .iter()
            .map(|&s| ((-s).exp() - mean).powi(2))
            .sum::<f64>()
            / (n as f64 - 1.0);
        let expect = (-(2.0f64).sqrt()).exp();
        assert!(
            (mean - expect).abs() <= 3.0 * (var / n as f64).sqrt(),
            "mean {mean} expect {expect}"
        );
        // KS against the first-passage CDF at t = x/√(2β) = 1.
        let stat = ks_stat(&mut vals, |y| tau_cdf(1.0, y));
        assert!(stat <= 1.63 / (n as f64).sqrt(), "KS {stat}");
        // x = 0 degenerates to zero mass.
        let zero = Sigma0Sampler::new(&m, 0.0).unwrap();
        assert_eq!(zero.sample(&mut rng), 0.0);
    }

    #[test]
    fn sigma0_general_self_consistent_laplace() {
        // The inversion sampler for the exponential-density mechanism must
        // reproduce the closed transform e^{−x ψ^{-1}(λ)}.
        let m = example_iv();
        let x = 1.0;
        let sampler = Sigma0Sampler::new(&m, x).unwrap();
        let mut rng = substream(22, module_id::MASS, 0);
        let n = 20_000;
        let samples: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        for &lam in &[0.3, 1.0, 3.0] {
            let mean: f64 =
                samples.iter().map(|&s| (-lam * s).exp()).sum::<f64>() / n as f64;
            let var: f64 = samples
                .iter()
                .map(|&s| ((-lam * s).exp() - mean).powi(2))
                .sum::<f64>()
                / (n as f64 - 1.0);
            let expect = csbp::total_mass_laplace(&m, x, lam).unwrap();
            assert!(
                (mean - expect).abs() <= 3.0 * (var / n as f64).sqrt() + 2e-3,
                "lam={lam}: {mean} vs {expect}"
            );
        }
    }

    #[test]
    fn prob_finite_closed_forms() {
        let beta = 0.5;
        let m = quad(beta);
        assert_abs_diff_eq!(
            prob_finite_given(&m, -0.3, -0.3, 2.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        // θ = 0, q < 0: e^{−4βq²σ}.
        let (q, s0) = (-0.7, 1.3);
        assert_relative_eq!(
            prob_finite_given(&m, 0.0, q, s0).unwrap(),
            (-4.0 * beta * q * q * s0).exp(),
            max_relative = 1e-10
        );
        assert_eq!(prob_finite_given(&m, 0.0, -1.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn conditional_laplace_quadratic_closed_form() {
        // θ = 1, q = 0: exponent ψ_1(ψ^{-1}(λ)) = λ + 2√(βλ).
        let beta = 0.5;
        let m = quad(beta);
        let s = 0.8;
        for &lam in &[0.2f64, 1.0, 5.0] {
            let expect = (-s * (lam + 2.0 * (beta * lam).sqrt())).exp();
            assert_relative_eq!(
                conditional_laplace_growth(&m, 1.0, 0.0, s, lam).unwrap(),
                expect,
                max_relative = 1e-8
            );
        }
        assert_abs_diff_eq!(
            conditional_laplace_growth(&m, 1.0, 0.5, 2.0, 0.0).unwrap(),
            1.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn conditional_laplace_matches_subordinator_quadrature() {
        // Independent oracle for the quadratic conditional transform: the
        // conditional law is σ_θ + first-passage time with drift, whose
        // density integrates to the same transform.
        let beta = 0.5;
        let m = quad(beta);
        let (theta, q, s, lam) = (0.9, 0.3, 1.1, 0.7);
        // T ~ IG(a/nu, a²) with a = √(2β)(θ−q)s, nu = √(2β)q.
        let a = (2.0 * beta).sqrt() * (theta - q) * s;
        let nu = (2.0 * beta).sqrt() * q;
        let dens = |t: f64| {
            (a * a / (2.0 * std::f64::consts::PI * t.powi(3))).sqrt()
                * (-(a - nu * t) * (a - nu * t) / (2.0 * t)).exp()
        };
        // Forced interior nodes stop the adaptive rule from accepting an
        // all-zero coarse pass over the narrow density bump.
        let transform = |l: f64| {
            crate::numerics::integrate_split(
                &|t: f64| (-l * t).exp() * dens(t),
                1e-12,
                60.0,
                &[0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
                1e-10,
            )
            .unwrap()
        };
        let expect = (-lam * s).exp() * transform(lam);
        let got = conditional_laplace_growth(&m, theta, q, s, lam).unwrap();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-6);
    }

    #[test]
    fn growth_sampler_matches_conditional_laplace_quadratic() {
        let beta = 0.5;
        let m = quad(beta);
        let (theta, q, s) = (0.4, -0.6, 0.9);
        let mut rng = substream(23, module_id::MASS, 1);
        let n = 40_000;
        let mut fin = Vec::new();
        for _ in 0..n {
            match sample_growth(&m, theta, q, s, &mut rng).unwrap() {
                MassValue::Finite(v) => {
                    assert!(v >= s);
                    fin.push(v);
                }
                MassValue::Infinite => {}
            }
        }
        let p_fin_emp = fin.len() as f64 / n as f64;
        let p_fin = prob_finite_given(&m, theta, q, s).unwrap();
        let se = (p_fin * (1.0 - p_fin) / n as f64).sqrt();
        assert!(
            (p_fin_emp - p_fin).abs() <= 3.0 * se,
            "{p_fin_emp} vs {p_fin}"
        );
        for &lam in &[0.4, 1.5] {
            let mean: f64 = fin.iter().map(|&v| (-lam * v).exp()).sum::<f64>() / n as f64;
            let expect = conditional_laplace_growth(&m, theta, q, s, lam).unwrap();
            let var: f64 = fin
                .iter()
                .map(|&v| ((-lam * v).exp() - mean).powi(2))
                .sum::<f64>()
                / (n as f64 - 1.0);
            assert!(
                (mean - expect).abs() <= 3.0 * (var / n as f64).sqrt() + 1e-4,
                "lam={lam}: {mean} vs {expect}"
            );
        }
    }

    #[test]
    fn growth_sampler_general_mechanism_monotone_and_consistent() {
        let m = example_iv();
        let (theta, q, s) = (0.5, 0.1, 0.7);
        let mut rng = substream(34, module_id::MASS, 12);
        let n = 4_000;
        let cdf = growth_cdf(&m, theta, q, s).unwrap();
        let mut vals = Vec::new();
        for _ in 0..n {
            let v = cdf.sample(&mut rng);
            assert!(v >= s - 1e-9);
            vals.push(v);
        }
        let lam = 0.8;
        let mean: f64 = vals.iter().map(|&v| (-lam * v).exp()).sum::<f64>() / n as f64;
        let expect = conditional_laplace_growth(&m, theta, q, s, lam).unwrap();
        let var: f64 = vals
            .iter()
            .map(|&v| ((-lam * v).exp() - mean).powi(2))
            .sum::<f64>()
            / (n as f64 - 1.0);
        assert!(
            (mean - expect).abs() <= 3.0 * (var / n as f64).sqrt() + 2e-3,
            "{mean} vs {expect}"
        );
    }

    #[test]
    fn tower_property_over_sigma_theta() {
        // E[ E[e^{−λσ_q} | σ_θ] ] must equal e^{−x ψ_q^{-1}(λ)} under P_x.
        let beta = 0.5;
        let m = quad(beta);
        let (x, theta, q, lam) = (1.0, 0.8, 0.2, 1.1);
        let mut rng = substream(24, module_id::MASS, 2);
        let n = 40_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let s = match sample_quadratic_total_mass(beta, x, theta, &mut rng) {
                MassValue::Finite(v) => v,
                MassValue::Infinite => unreachable!("θ > 0"),
            };
            let v = conditional_laplace_growth(&m, theta, q, s, lam).unwrap();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
        let expect = (-x * m.shift(q).unwrap().psi_inverse(lam).unwrap()).exp();
        assert!((mean - expect).abs() <= 3.0 * se, "{mean} vs {expect}");
    }

    #[test]
    fn law_of_a_survival_values() {
        let m = quad(1.0);
        assert_relative_eq!(law_of_a_survival(&m, -1.0).unwrap(), 2.0, epsilon = 1e-10);
        assert_eq!(law_of_a_survival(&m, 0.0).unwrap(), 0.0);
        assert_eq!(law_of_a_survival(&m, 0.7).unwrap(), 0.0);
        let iv = example_iv();
        let th = -0.5;
        let expect = iv.bar_theta(th).unwrap() + 0.5;
        assert_relative_eq!(law_of_a_survival(&iv, th).unwrap(), expect, epsilon = 1e-10);
    }

    #[test]
    fn density_of_a_values_and_consistency() {
        let m = quad(0.7);
        for &r in &[-0.2, -1.0, -4.0] {
            assert_relative_eq!(density_of_a(&m, r).unwrap(), 2.0, epsilon = 1e-9);
        }
        // ∫_θ^0 density = θ̄ − θ (quadrature against the survival law).
        let iv = example_iv();
        let th = -0.6;
        let integral = integrate_a_density(&iv, th).unwrap();
        let expect = law_of_a_survival(&iv, th).unwrap();
        assert_abs_diff_eq!(integral, expect, epsilon = 1e-6);
        // Mechanism with θ_inf ∈ Θ carries an atom: the density refuses.
        let iii = Mechanism::critical(
            0.0,
            LevyMeasure::InverseSquareExp {
                rate: (-1.0f64).exp(),
            },
        )
        .unwrap();
        assert!(density_of_a(&iii, -0.1).is_err());
    }

    #[test]
    fn a_density_limit_at_zero_matches_quadratic_constant() {
        // The ratio ψ'(r)/ψ'(r̄) is 0/0 at the origin; numerically it tends
        // to −1 (r̄ ≈ −r to first order when ψ''(0) is finite), so the
        // density tends to 2 — the value the quadratic case takes exactly.
        let iv = example_iv();
        let near = density_of_a(&iv, -1e-5).unwrap();
        assert!((near - 2.0).abs() < 1e-3, "density near 0⁻ was {near}");
    }

    #[test]
    fn sample_a_quadratic_matches_inverse_cdf_form() {
        // Closed form of the conditional law: P(A ≤ q | σ0) = e^{−4βσ0 q²}.
        let (beta, s0) = (0.5, 1.4);
        let m = quad(beta);
        let mut rng = substream(25, module_id::MASS, 3);
        let n = 10_000;
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            match sample_a_given_sigma0(&m, s0, &mut rng).unwrap() {
                ExplosionTime::Interior(a) => {
                    assert!(a < 0.0);
                    vals.push(a);
                }
                ExplosionTime::AtLowerEndpoint => panic!("no atom for quadratic"),
            }
        }
        let stat = ks_stat(&mut vals, |q| (-4.0 * beta * s0 * q * q).exp());
        assert!(stat <= 1.63 / (n as f64).sqrt(), "KS {stat}");
    }

    #[test]
    fn sample_a_example_iii_produces_endpoint_atom() {
        let iii = Mechanism::critical(
            0.0,
            LevyMeasure::InverseSquareExp {
                rate: (-1.0f64).exp(),
            },
        )
        .unwrap();
        let mut rng = substream(35, module_id::MASS, 13);
        let mut atoms = 0;
        let n = 4_000;
        let s0 = 0.5;
        for _ in 0..n {
            match sample_a_given_sigma0(&iii, s0, &mut rng).unwrap() {
                ExplosionTime::AtLowerEndpoint => atoms += 1,
                ExplosionTime::Interior(a) => {
                    assert!(a < 0.0 && a > -(-1.0f64).exp());
                }
            }
        }
        // Atom mass: e^{−σ0·ψ(θ̄_∞−θ_∞)}.
        let class = iii.classify();
        let gmax = iii.eval_psi(class.bar_theta_inf - class.theta_inf).unwrap();
        let p = (-s0 * gmax).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let emp = atoms as f64 / n as f64;
        assert!((emp - p).abs() <= 3.0 * se, "{emp} vs {p}");
    }

    #[test]
    fn sigma_a_laplace_values() {
        let m = quad(1.0);
        assert_relative_eq!(
            sigma_a_laplace(&m, -1.0, 3.0).unwrap(),
            0.5,
            max_relative = 1e-9
        );
        assert_relative_eq!(sigma_a_laplace(&m, -0.4, 0.0).unwrap(), 1.0, epsilon = 1e-9);
        let beta = 0.5;
        let mb = quad(beta);
        let (th, lam) = (-0.8, 1.7);
        assert_relative_eq!(
            sigma_a_laplace(&mb, th, lam).unwrap(),
            (beta * th * th).sqrt() / (lam + beta * th * th).sqrt(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn sigma_star_exact_sampler_matches_transform() {
        let beta = 0.5;
        let m = quad(beta);
        let theta = 1.0;
        let sampler = SizeBiasedMassSampler::sigma_star(&m, theta).unwrap();
        let mut rng = substream(26, module_id::MASS, 4);
        let n = 30_000;
        let samples: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        for &lam in &[0.3, 1.0, 4.0] {
            let mean: f64 =
                samples.iter().map(|&v| (-lam * v).exp()).sum::<f64>() / n as f64;
            let var: f64 = samples
                .iter()
                .map(|&v| ((-lam * v).exp() - mean).powi(2))
                .sum::<f64>()
                / (n as f64 - 1.0);
            let expect = sigma_star_laplace(&m, theta, lam).unwrap();
            assert!(
                (mean - expect).abs() <= 3.0 * (var / n as f64).sqrt(),
                "lam={lam}: {mean} vs {expect}"
            );
        }
    }

    #[test]
    fn sigma_a_inversion_matches_gamma_law() {
        // Quadratic σ_A | A=θ is Gamma(1/2, rate βθ²); the sampler runs the
        // generic inversion machinery, making this its end-to-end oracle.
        let (beta, theta) = (0.5, -1.2);
        let m = quad(beta);
        let sampler = SizeBiasedMassSampler::sigma_a_given(&m, theta).unwrap();
        assert!(matches!(sampler, SizeBiasedMassSampler::Inverted(_)));
        let mut rng = substream(27, module_id::MASS, 5);
        let n = 5_000;
        let mut vals: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        let g = Gamma::new(0.5, beta * theta * theta).unwrap();
        let stat = ks_stat(&mut vals, |v| g.cdf(v));
        assert!(stat <= 1.63 / (n as f64).sqrt(), "KS {stat}");
    }

    #[test]
    fn post_explosion_marginals_and_monotonicity() {
        let beta = 0.5;
        let m = quad(beta);
        let a_theta = -1.0;
        let offsets: Vec<f64> = (0..8).map(|i| i as f64 * 0.25).collect();
        let mut rng = substream(28, module_id::MASS, 6);
        let n = 30_000;
        let mut at_zero = Vec::with_capacity(n);
        for _ in 0..n {
            let traj = sample_post_explosion(&m, a_theta, &offsets, &mut rng).unwrap();
            assert!(traj.is_non_increasing());
            at_zero.push(traj.sigmas[0].finite().unwrap());
        }
        // Marginal at offset 0 is σ_A | A=θ, Laplace √(βθ²)/√(λ+βθ²).
        for &lam in &[0.5, 2.0] {
            let mean: f64 =
                at_zero.iter().map(|&v| (-lam * v).exp()).sum::<f64>() / n as f64;
            let var: f64 = at_zero
                .iter()
                .map(|&v| ((-lam * v).exp() - mean).powi(2))
                .sum::<f64>()
                / (n as f64 - 1.0);
            let expect = sigma_a_laplace(&m, a_theta, lam).unwrap();
            assert!(
                (mean - expect).abs() <= 3.0 * (var / n as f64).sqrt(),
                "lam={lam}: {mean} vs {expect}"
            );
        }
    }

    #[test]
    fn ga_window_sampler_quadratic_is_uniform() {
        let m = quad(1.0);
        let b = 2.0;
        let sampler = GaWindowSampler::new(&m, b).unwrap();
        // Constant density 2 on the window: total mass 2B.
        assert_relative_eq!(sampler.window_mass(), 2.0 * b, max_relative = 1e-6);
        let mut rng = substream(29, module_id::MASS, 7);
        let n = 10_000;
        let mut vals: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        let stat = ks_stat(&mut vals, |v| (v / b).clamp(0.0, 1.0));
        assert!(stat <= 1.63 / (n as f64).sqrt(), "KS {stat}");
        // Window mass equals the survival value of A at the matching
        // negative parameter (change of variable r = q̄).
        let neg = m.check_theta(b).unwrap();
        let survival = law_of_a_survival(&m, neg).unwrap();
        assert_relative_eq!(sampler.window_mass(), survival, max_relative = 1e-5);
        // Mechanism with the endpoint atom refuses.
        let iii = Mechanism::critical(
            0.0,
            LevyMeasure::InverseSquareExp {
                rate: (-1.0f64).exp(),
            },
        )
        .unwrap();
        assert!(GaWindowSampler::new(&iii, 0.1).is_err());
    }

    #[test]
    fn mass_reweight_normalization_and_oracle() {
        let beta = 0.5;
        let m = quad(beta);
        let x = 1.0;
        let mut rng = substream(30, module_id::MASS, 8);
        let n = 40_000;
        let sampler = Sigma0Sampler::new(&m, x).unwrap();
        let samples: Vec<MassValue> = (0..n)
            .map(|_| MassValue::Finite(sampler.sample(&mut rng)))
            .collect();
        let q = 0.6;
        let (est, se, _) = girsanov_mass_reweight(&samples, &m, q, x, |_| 1.0).unwrap();
        assert!((est - 1.0).abs() <= 3.0 * se, "{est} ± {se}");
        let lam = 0.9;
        let (est, se, _) =
            girsanov_mass_reweight(&samples, &m, q, x, |s| (-lam * s).exp()).unwrap();
        let expect = csbp::total_mass_laplace(&m.shift(q).unwrap(), x, lam).unwrap();
        assert!((est - expect).abs() <= 3.0 * se, "{est} vs {expect}");
    }

    #[test]
    fn mass_reweight_extinction_conditioning() {
        // For super-critical ψ̃ (a negative quadratic shift), reweighting by
        // q0 equals conditioning on extinction.
        let beta = 0.5;
        let shift = -0.8;
        let m = quad(beta).shift(shift).unwrap();
        let q0 = m.classify().q0;
        assert_relative_eq!(q0, 2.0 * shift.abs(), epsilon = 1e-9);
        let x = 1.0;
        let mut rng = substream(31, module_id::MASS, 9);
        let n = 40_000;
        let samples: Vec<MassValue> = (0..n)
            .map(|_| sample_quadratic_total_mass(beta, x, shift, &mut rng))
            .collect();
        let lam = 0.5;
        let (est, se, _) =
            girsanov_mass_reweight(&samples, &m, q0, x, |s| (-lam * s).exp()).unwrap();
        let tilted = m.shift(q0).unwrap();
        let expect = csbp::total_mass_laplace(&tilted, x, lam).unwrap();
        assert!((est - expect).abs() <= 3.0 * se + 1e-3, "{est} vs {expect}");
    }

    #[test]
    fn trajectory_monotone_and_explosion_bracket() {
        let beta = 0.5;
        let m = quad(beta);
        let thetas: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.25).collect();
        let mut rng = substream(32, module_id::MASS, 10);
        let mut saw_bracket = 0;
        for _ in 0..200 {
            let traj = simulate_mass_trajectory(
                &m,
                MassStart::Population { x: 1.0 },
                &thetas,
                &mut rng,
            )
            .unwrap();
            assert!(traj.is_non_increasing());
            if let Some((lo, hi)) = traj.explosion_bracket {
                assert!(hi - lo <= EXPLOSION_BRACKET_WIDTH + 1e-12);
                saw_bracket += 1;
            }
        }
        assert!(saw_bracket > 0, "some trajectories must explode inside the grid");
    }

    #[test]
    fn trajectory_conditioned_start_is_excursion_flagged() {
        let m = quad(0.5);
        let thetas = [0.0, 0.5, 1.0];
        let mut rng = substream(33, module_id::MASS, 11);
        let traj = simulate_mass_trajectory(
            &m,
            MassStart::Conditioned { sigma: 1.0 },
            &thetas,
            &mut rng,
        )
        .unwrap();
        assert!(traj.under_excursion);
        assert_eq!(traj.sigmas[2], MassValue::Finite(1.0));
    }
}

//! The validation suites: each acceptance check wired to its closed-form
//! reference, emitting one machine-readable report per check.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::csbp;
use crate::crtfrag::{build_spanned_tree, fragment_reference_cdf, sample_excursion, tagged_fragment_process};
use crate::error::{Error, Result};
use crate::gwprune::{special_markov_check, OffspringLaw};
use crate::harness::report::{SimConfig, ValidationReport};
use crate::harness::stats::{empirical_laplace, ks_test, ks_two_sample};
use crate::massflow::{
    sample_a_given_sigma0, sample_post_explosion, sample_tau, ExplosionTime, MassValue,
    Sigma0Sampler, SizeBiasedMassSampler,
};
use crate::mechanism::{Criticality, LevyMeasure};
use crate::streams::{module_id, substream};
use crate::Mechanism;

/// Validation suites, mirroring the CLI names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Mechanism,
    Csbp,
    Mass,
    Gw,
    Crt,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mechanism" => Suite::Mechanism,
            "csbp" => Suite::Csbp,
            "mass" => Suite::Mass,
            "gw" => Suite::Gw,
            "crt" => Suite::Crt,
            "all" => Suite::All,
            other => {
                return Err(Error::Config(format!(
                    "unknown suite '{other}' (mechanism | csbp | mass | gw | crt | all)"
                )))
            }
        })
    }
}

fn stream(cfg: &SimConfig, module: u32, crit: u64, rep: u64) -> rand_chacha::ChaCha8Rng {
    substream(cfg.master_seed, module, (crit << 40) | rep)
}

fn timed(
    test_id: &str,
    reference: &str,
    f: impl FnOnce() -> Result<(f64, f64, bool, u64, Vec<(String, f64)>)>,
) -> Result<ValidationReport> {
    let start = std::time::Instant::now();
    let (statistic, threshold, pass, sample_size, reference_values) = f()?;
    Ok(ValidationReport {
        test_id: test_id.to_string(),
        reference: reference.to_string(),
        statistic,
        threshold,
        pass,
        sample_size,
        reference_values,
        runtime_ms: start.elapsed().as_millis(),
    })
}

/// The four reference mechanisms of the algebra checks.
fn named_mechanisms() -> Vec<(&'static str, Mechanism, f64, bool, f64)> {
    // (name, mechanism, expected θ_inf, expected endpoint-in-domain, grid lo)
    let e = (-1.0f64).exp();
    vec![
        ("quadratic", Mechanism::quadratic(0.5), f64::NEG_INFINITY, false, -5.0),
        ("stable-1.5", Mechanism::stable(1.0, 1.5).unwrap(), 0.0, true, 0.0),
        (
            "log-branching",
            Mechanism::critical(0.0, LevyMeasure::InverseSquareExp { rate: e }).unwrap(),
            -e,
            true,
            -e,
        ),
        (
            "exp-density",
            Mechanism::critical(0.0, LevyMeasure::ExpDensity).unwrap(),
            -1.0,
            false,
            -0.999,
        ),
    ]
}

// -------------------------------------------------------------------------
// Mechanism suite.
// -------------------------------------------------------------------------

fn mechanism_suite(cfg: &SimConfig) -> Result<Vec<ValidationReport>> {
    let mut out = Vec::new();
    for (name, m, theta_inf_expect, closed_expect, grid_lo) in named_mechanisms() {
        let tol = cfg.tolerance.residual_tol;
        out.push(timed(
            &format!("mechanism/bar-theta-residual/{name}"),
            "psi(bar(theta)) = psi(theta); bar(theta) = theta for theta >= 0",
            || {
                let grid_hi = 5.0f64;
                let n = 50usize;
                let mut worst: f64 = 0.0;
                for i in 0..n {
                    let th = grid_lo + (grid_hi - grid_lo) * i as f64 / (n - 1) as f64;
                    let bar = m.bar_theta(th)?;
                    if th >= 0.0 && bar != th {
                        worst = f64::INFINITY;
                        break;
                    }
                    let resid = (m.eval_psi(bar)? - m.eval_psi(th)?).abs();
                    worst = worst.max(resid);
                }
                Ok((worst, tol, worst <= tol, n as u64, vec![]))
            },
        )?);
        out.push(timed(
            &format!("mechanism/theta-domain/{name}"),
            "Theta endpoint and closure match the known table",
            || {
                let class = m.classify();
                let mut stat: f64 = if theta_inf_expect.is_infinite() {
                    if class.theta_inf == theta_inf_expect {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (class.theta_inf - theta_inf_expect).abs()
                };
                if class.theta_inf_in_domain != closed_expect {
                    stat = f64::INFINITY;
                }
                if class.criticality != Criticality::Critical {
                    stat = f64::INFINITY;
                }
                Ok((
                    stat,
                    tol,
                    stat <= tol,
                    1,
                    vec![("theta_inf".into(), theta_inf_expect)],
                ))
            },
        )?);
    }
    Ok(out)
}

// -------------------------------------------------------------------------
// CSBP suite.
// -------------------------------------------------------------------------

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn csbp_suite(cfg: &SimConfig) -> Result<Vec<ValidationReport>> {
    let mut out = Vec::new();
    let tol_flow = 1e-8;

    out.push(timed(
        "csbp/flow-quadratic",
        "u(a,lambda) = lambda/(1 + beta*lambda*a)",
        || {
            let beta = 0.5;
            let m = Mechanism::quadratic(beta);
            let grid = log_grid(0.1, 10.0, 20);
            let mut worst: f64 = 0.0;
            for &a in &grid {
                for &lam in &grid {
                    let expect = lam / (1.0 + beta * lam * a);
                    let got = csbp::solve_u(&m, a, lam)?;
                    worst = worst.max((got - expect).abs() / expect);
                }
            }
            Ok((worst, tol_flow, worst <= tol_flow, 400, vec![("beta".into(), beta)]))
        },
    )?);

    out.push(timed(
        "csbp/flow-stable",
        "u(a,lambda) = (lambda^(1-alpha) + c(alpha-1)a)^(1/(1-alpha))",
        || {
            let (c, alpha) = (1.0, 1.5);
            let m = Mechanism::stable(c, alpha)?;
            let grid = log_grid(0.1, 10.0, 20);
            let mut worst: f64 = 0.0;
            for &a in &grid {
                for &lam in &grid {
                    let expect =
                        (lam.powf(1.0 - alpha) + c * (alpha - 1.0) * a).powf(1.0 / (1.0 - alpha));
                    let got = csbp::solve_u(&m, a, lam)?;
                    worst = worst.max((got - expect).abs() / expect);
                }
            }
            Ok((
                worst,
                tol_flow,
                worst <= tol_flow,
                400,
                vec![("c".into(), c), ("alpha".into(), alpha)],
            ))
        },
    )?);

    out.push(timed(
        "csbp/flow-semigroup",
        "u(a+b, lambda) = u(a, u(b, lambda))",
        || {
            let mechs = [Mechanism::quadratic(0.5), Mechanism::stable(1.0, 1.5)?];
            let grid = log_grid(0.2, 5.0, 8);
            let mut worst: f64 = 0.0;
            for m in &mechs {
                for &a in &grid {
                    for &lam in &grid {
                        let direct = csbp::solve_u(m, a, lam)?;
                        let nested = csbp::solve_u(m, a / 2.0, csbp::solve_u(m, a / 2.0, lam)?)?;
                        worst = worst.max((direct - nested).abs());
                    }
                }
            }
            Ok((worst, tol_flow, worst <= tol_flow, 128, vec![]))
        },
    )?);

    // Exact quadratic transition sampler against its Laplace transform.
    let n = cfg.replicates;
    let se_mult = cfg.tolerance.se_multiplier;
    out.push(timed(
        "csbp/exact-transition",
        "E e^{-lambda Z_a} = e^{-x u(a,lambda)}; P(Z_a = 0) = e^{-x/(beta a)}",
        || {
            let (beta, x, a) = (0.5, 1.0, 1.0);
            let m = Mechanism::quadratic(beta);
            let lams = [0.1, 1.0, 10.0];
            let draws: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = stream(cfg, module_id::CSBP, 3, rep as u64);
                    csbp::sample_quadratic_transition(beta, x, a, &mut rng)
                })
                .collect();
            let samples: Vec<MassValue> = draws.iter().map(|&z| MassValue::Finite(z)).collect();
            let (est, _) = empirical_laplace(&samples, &lams)?;
            let mut refs = Vec::new();
            let mut worst: f64 = 0.0;
            for e in &est {
                let reference = csbp::laplace_za(&m, x, a, e.lambda)?;
                refs.push((format!("laplace@{}", e.lambda), reference));
                worst = worst.max((e.estimate - reference).abs() / e.std_error.max(1e-300));
            }
            let zeros = draws.iter().filter(|&&z| z == 0.0).count() as f64 / n as f64;
            let p0 = (-x / (beta * a)).exp();
            refs.push(("extinction".into(), p0));
            let se0 = (p0 * (1.0 - p0) / n as f64).sqrt();
            worst = worst.max((zeros - p0).abs() / se0);
            Ok((worst, se_mult, worst <= se_mult, n as u64, refs))
        },
    )?);

    // Martingale mean of the exponential weight: exact quadratic paths.
    out.push(timed(
        "csbp/girsanov-quadratic",
        "E[M_a] = 1 for M_a = exp(qx - qZ_a - psi(q) int Z)",
        || {
            let (beta, x, a, h) = (0.5, 1.0, 1.0, 1.0 / 256.0);
            let m = Mechanism::quadratic(beta);
            // q = 0.5 and q = q0 of the super-critical shift by -0.5.
            let q0 = m.shift(-0.5)?.classify().q0;
            let qs = [0.5, q0];
            let mut refs = vec![("q0_super_shift".into(), q0)];
            let mut worst: f64 = 0.0;
            for (qi, &q) in qs.iter().enumerate() {
                let vals: Vec<f64> = (0..n)
                    .into_par_iter()
                    .map(|rep| {
                        let mut rng =
                            stream(cfg, module_id::CSBP, 4 + qi as u64, rep as u64);
                        let path = csbp::sample_quadratic_path(beta, x, a, h, &mut rng);
                        csbp::girsanov_weight(&path, &m, q).map(|w| w.value).unwrap_or(f64::NAN)
                    })
                    .collect();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (n as f64 - 1.0);
                let se = (var / n as f64).sqrt();
                refs.push((format!("mean@q={q:.4}"), mean));
                worst = worst.max((mean - 1.0).abs() / se);
            }
            Ok((worst, se_mult, worst <= se_mult, n as u64, refs))
        },
    )?);

    out.push(timed(
        "csbp/girsanov-exp-density",
        "E[M_a] = 1 under the Euler/compound-Poisson scheme",
        || {
            let m = Mechanism::critical(0.0, LevyMeasure::ExpDensity)?;
            let (x, a, h, eps) = (1.0, 0.5, 1e-3, 1e-4);
            let q0 = {
                let shifted = m.shift(-0.5)?;
                shifted.classify().q0
            };
            let qs = [0.5, q0];
            let mut refs = vec![("q0_super_shift".into(), q0)];
            let mut worst: f64 = 0.0;
            for (qi, &q) in qs.iter().enumerate() {
                let vals: Vec<f64> = (0..n)
                    .into_par_iter()
                    .map(|rep| {
                        let mut rng =
                            stream(cfg, module_id::CSBP, 6 + qi as u64, rep as u64);
                        let path = csbp::sample_general_path(&m, x, a, h, eps, &mut rng)
                            .expect("config in range");
                        csbp::girsanov_weight(&path, &m, q).map(|w| w.value).unwrap_or(f64::NAN)
                    })
                    .collect();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (n as f64 - 1.0);
                let se = (var / n as f64).sqrt();
                refs.push((format!("mean@q={q:.4}"), mean));
                worst = worst.max((mean - 1.0).abs() / se);
            }
            Ok((worst, se_mult, worst <= se_mult, n as u64, refs))
        },
    )?);

    Ok(out)
}

// -------------------------------------------------------------------------
// Mass suite.
// -------------------------------------------------------------------------

fn mass_suite(cfg: &SimConfig) -> Result<Vec<ValidationReport>> {
    let mut out = Vec::new();
    let n = cfg.replicates;
    let ks_n = (cfg.replicates / 10).max(200);
    let se_mult = cfg.tolerance.se_multiplier;

    out.push(timed(
        "mass/total-mass-laplace",
        "E e^{-lambda sigma} = e^{-x sqrt(lambda/beta)}",
        || {
            let (beta, x) = (0.5, 1.0);
            let m = Mechanism::quadratic(beta);
            let sampler = Sigma0Sampler::new(&m, x)?;
            let draws: Vec<MassValue> = (0..n)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = stream(cfg, module_id::MASS, 1, rep as u64);
                    MassValue::Finite(sampler.sample(&mut rng))
                })
                .collect();
            let lams = [0.1, 1.0, 10.0];
            let (est, _) = empirical_laplace(&draws, &lams)?;
            let mut refs = Vec::new();
            let mut worst: f64 = 0.0;
            for e in &est {
                let reference = (-x * (e.lambda / beta).sqrt()).exp();
                refs.push((format!("laplace@{}", e.lambda), reference));
                worst = worst.max((e.estimate - reference).abs() / e.std_error.max(1e-300));
            }
            Ok((worst, se_mult, worst <= se_mult, n as u64, refs))
        },
    )?);

    // Law of A given sigma_0, quadratic and exponential-density mechanisms.
    let a_mechs: Vec<(&str, Mechanism)> = vec![
        ("quadratic", Mechanism::quadratic(0.5)),
        (
            "exp-density",
            Mechanism::critical(0.0, LevyMeasure::ExpDensity)?,
        ),
    ];
    for (mi, (name, m)) in a_mechs.iter().enumerate() {
        for (si, &s0) in [0.5, 1.0, 2.0].iter().enumerate() {
            let m = m.clone();
            let name = name.to_string();
            out.push(timed(
                &format!("mass/law-of-a/{name}/sigma0={s0}"),
                "P(A <= q | sigma_0) = e^{-sigma_0 psi(qbar - q)}",
                || {
                    let crit = 10 + (mi * 3 + si) as u64;
                    let vals: Vec<f64> = (0..ks_n)
                        .into_par_iter()
                        .map(|rep| {
                            let mut rng = stream(cfg, module_id::MASS, crit, rep as u64);
                            match sample_a_given_sigma0(&m, s0, &mut rng).expect("valid") {
                                ExplosionTime::Interior(a) => a,
                                ExplosionTime::AtLowerEndpoint => f64::NEG_INFINITY,
                            }
                        })
                        .collect();
                    let cdf = |q: f64| -> f64 {
                        if q >= 0.0 {
                            return 1.0;
                        }
                        let qbar = m.bar_theta(q).unwrap_or(f64::NAN);
                        (-s0 * m.eval_psi(qbar - q).unwrap_or(f64::NAN)).exp()
                    };
                    let ks = ks_test(&vals, cdf);
                    Ok((
                        ks.statistic,
                        ks.threshold,
                        ks.pass,
                        ks.n as u64,
                        vec![("sigma0".into(), s0)],
                    ))
                },
            )?);
        }
    }

    out.push(timed(
        "mass/sigma-a-gamma",
        "sigma_A | A=theta is Gamma(1/2, beta theta^2) (quadratic)",
        || {
            let (beta, theta) = (0.5, -1.0);
            let m = Mechanism::quadratic(beta);
            let sampler = SizeBiasedMassSampler::sigma_a_given(&m, theta)?;
            let vals: Vec<f64> = (0..ks_n)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = stream(cfg, module_id::MASS, 20, rep as u64);
                    sampler.sample(&mut rng)
                })
                .collect();
            let g = Gamma::new(0.5, beta * theta * theta).unwrap();
            let ks = ks_test(&vals, |v| g.cdf(v));
            Ok((
                ks.statistic,
                ks.threshold,
                ks.pass,
                ks.n as u64,
                vec![("rate".into(), beta * theta * theta), ("shape".into(), 0.5)],
            ))
        },
    )?);

    out.push(timed(
        "mass/sigma-a-vs-sigma-star",
        "sigma_A | A=theta and sigma*_{bar theta} share one law",
        || {
            let (beta, theta) = (0.5, -1.0);
            let m = Mechanism::quadratic(beta);
            let inv = SizeBiasedMassSampler::sigma_a_given(&m, theta)?;
            let bar = m.bar_theta(theta)?;
            let exact = SizeBiasedMassSampler::sigma_star(&m, bar)?;
            let a: Vec<f64> = (0..ks_n)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = stream(cfg, module_id::MASS, 21, rep as u64);
                    inv.sample(&mut rng)
                })
                .collect();
            let b: Vec<f64> = (0..ks_n)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = stream(cfg, module_id::MASS, 22, rep as u64);
                    exact.sample(&mut rng)
                })
                .collect();
            let ks = ks_two_sample(&a, &b);
            Ok((
                ks.statistic,
                ks.threshold,
                ks.pass,
                ks.n as u64,
                vec![("bar_theta".into(), bar)],
            ))
        },
    )?);

    for (ti, &theta) in [0.5, 1.0, 2.0].iter().enumerate() {
        out.push(timed(
            &format!("mass/sigma-star-inverse-subordinator/theta={theta}"),
            "2 beta sigma*_theta is distributed as 1/tau_theta",
            || {
                let beta = 0.5;
                let m = Mechanism::quadratic(beta);
                let sampler = SizeBiasedMassSampler::sigma_star(&m, theta)?;
                let vals: Vec<f64> = (0..ks_n)
                    .into_par_iter()
                    .map(|rep| {
                        let mut rng = stream(cfg, module_id::MASS, 23 + ti as u64, rep as u64);
                        2.0 * beta * sampler.sample(&mut rng)
                    })
                    .collect();
                // P(1/tau_theta <= y) = erf(theta sqrt(y/2)).
                let cdf = |y: f64| {
                    if y <= 0.0 {
                        0.0
                    } else {
                        statrs::function::erf::erf(theta * (y / 2.0).sqrt())
                    }
                };
                let ks = ks_test(&vals, cdf);
                Ok((
                    ks.statistic,
                    ks.threshold,
                    ks.pass,
                    ks.n as u64,
                    vec![("theta".into(), theta)],
                ))
            },
        )?);
    }

    out.push(timed(
        "mass/post-explosion-two-time",
        "conditional two-time Laplace transform of (sigma_{A+s}, sigma_{A+s+t})",
        || {
            let (beta, theta) = (0.5f64, -1.0f64);
            let m = Mechanism::quadratic(beta);
            let points = [
                (0.0, 0.5, 1.0, 1.0),
                (0.5, 0.5, 0.5, 2.0),
                (1.0, 1.0, 2.0, 0.5),
                (0.25, 2.0, 1.0, 3.0),
                (2.0, 1.0, 3.0, 1.0),
            ];
            let noyau = |s: f64, t: f64, lam: f64, kap: f64| -> f64 {
                let b1 = (beta * (theta.abs() + s).powi(2)).sqrt();
                let r = (lam + b1 * b1).sqrt();
                let b2 = (beta * t * t).sqrt();
                (b1 / r) * (b2 + r) / (kap + (b2 + r) * (b2 + r)).sqrt()
            };
            let nn = (cfg.replicates / 10).max(200);
            let mut refs = Vec::new();
            let mut worst: f64 = 0.0;
            for (pi, &(s, t, lam, kap)) in points.iter().enumerate() {
                let offsets = [s, s + t];
                let vals: Vec<f64> = (0..nn)
                    .into_par_iter()
                    .map(|rep| {
                        let mut rng = stream(cfg, module_id::MASS, 30 + pi as u64, rep as u64);
                        let traj = sample_post_explosion(&m, theta, &offsets, &mut rng)
                            .expect("valid conditioning");
                        let s1 = traj.sigmas[0].finite().unwrap();
                        let s2 = traj.sigmas[1].finite().unwrap();
                        (-lam * s1 - kap * s2).exp()
                    })
                    .collect();
                let mean = vals.iter().sum::<f64>() / nn as f64;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (nn as f64 - 1.0);
                let se = (var / nn as f64).sqrt();
                let reference = noyau(s, t, lam, kap);
                refs.push((format!("point{pi}"), reference));
                worst = worst.max((mean - reference).abs() / se.max(1e-300));
            }
            Ok((worst, se_mult, worst <= se_mult, nn as u64, refs))
        },
    )?);

    Ok(out)
}

// -------------------------------------------------------------------------
// GW suite.
// -------------------------------------------------------------------------

fn gw_suite(cfg: &SimConfig) -> Result<Vec<ValidationReport>> {
    let mut out = Vec::new();
    let law = OffspringLaw::binary_critical();
    let keep_p = 0.8;
    let n = cfg.replicates;
    let mut rng = stream(cfg, module_id::GW, 1, 0);
    let report = special_markov_check(&law, keep_p, n, 24, &mut rng)?;
    out.push(ValidationReport {
        test_id: "gw/special-markov-enumeration".into(),
        reference: "pruned tree law equals thinned-law tree (depth <= 3, exact)".into(),
        statistic: report.enumeration_tv,
        threshold: 1e-12,
        pass: report.pass_enumeration,
        sample_size: 1,
        reference_values: vec![("keep_p".into(), keep_p)],
        runtime_ms: 0,
    });
    out.push(ValidationReport {
        test_id: "gw/special-markov-progeny".into(),
        reference: "chi-square homogeneity of pruned vs thinned total progeny".into(),
        statistic: report.p_value,
        threshold: 0.01,
        pass: report.pass_chi_square,
        sample_size: n as u64,
        reference_values: vec![
            ("chi_square".into(), report.chi_square),
            ("df".into(), report.degrees as f64),
        ],
        runtime_ms: 0,
    });
    Ok(out)
}

// -------------------------------------------------------------------------
// CRT suite.
// -------------------------------------------------------------------------

fn fragment_ks(
    cfg: &SimConfig,
    crit: u64,
    grid_n: usize,
    leaves: usize,
    trees: usize,
    thetas: &[f64],
) -> Result<Vec<crate::harness::stats::KsOutcome>> {
    let fractions: Vec<Vec<f64>> = (0..trees)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(cfg, module_id::CRT, crit, rep as u64);
            let exc = sample_excursion(grid_n, &mut rng).expect("grid size valid");
            let tree = build_spanned_tree(&exc, leaves, &mut rng).expect("leaves fit");
            tagged_fragment_process(&tree, thetas)
                .into_iter()
                .map(|(_, f)| f)
                .collect()
        })
        .collect();
    Ok(thetas
        .iter()
        .enumerate()
        .map(|(ti, &th)| {
            let samples: Vec<f64> = fractions.iter().map(|f| f[ti]).collect();
            ks_test(&samples, |y| fragment_reference_cdf(th, y))
        })
        .collect())
}

fn crt_suite(cfg: &SimConfig) -> Result<Vec<ValidationReport>> {
    let mut out = Vec::new();
    let thetas = [0.5, 1.0, 2.0];
    let trees = ((2000.0 * cfg.crt_scale).round() as usize).max(50);
    let threshold = 0.05;

    let start = std::time::Instant::now();
    let fine = fragment_ks(cfg, 1, 1 << 14, 1000, trees, &thetas)?;
    let fine_ms = start.elapsed().as_millis();
    for (ks, &th) in fine.iter().zip(&thetas) {
        out.push(ValidationReport {
            test_id: format!("crt/tagged-fragment/theta={th}"),
            reference: "fraction law 1/(1+tau_theta) given sigma_0 = 1".into(),
            statistic: ks.statistic,
            threshold,
            pass: ks.statistic <= threshold,
            sample_size: trees as u64,
            reference_values: vec![("theta".into(), th)],
            runtime_ms: fine_ms,
        });
    }

    let start = std::time::Instant::now();
    let coarse = fragment_ks(cfg, 2, 1 << 13, 500, trees, &thetas)?;
    let mean_fine: f64 = fine.iter().map(|k| k.statistic).sum::<f64>() / thetas.len() as f64;
    let mean_coarse: f64 =
        coarse.iter().map(|k| k.statistic).sum::<f64>() / thetas.len() as f64;
    out.push(ValidationReport {
        test_id: "crt/tagged-fragment-grid-refinement".into(),
        reference: "mean KS strictly decreases when the grid doubles".into(),
        statistic: mean_fine - mean_coarse,
        threshold: 0.0,
        pass: mean_fine < mean_coarse,
        sample_size: (2 * trees) as u64,
        reference_values: vec![
            ("mean_ks_coarse".into(), mean_coarse),
            ("mean_ks_fine".into(), mean_fine),
        ],
        runtime_ms: start.elapsed().as_millis(),
    });
    Ok(out)
}

/// Run a suite and return its reports in a deterministic order.
pub fn run_suite(suite: Suite, cfg: &SimConfig) -> Result<Vec<ValidationReport>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Mechanism | Suite::All) {
        out.extend(mechanism_suite(cfg)?);
    }
    if matches!(suite, Suite::Csbp | Suite::All) {
        out.extend(csbp_suite(cfg)?);
    }
    if matches!(suite, Suite::Mass | Suite::All) {
        out.extend(mass_suite(cfg)?);
    }
    if matches!(suite, Suite::Gw | Suite::All) {
        out.extend(gw_suite(cfg)?);
    }
    if matches!(suite, Suite::Crt | Suite::All) {
        out.extend(crt_suite(cfg)?);
    }
    Ok(out)
}

/// Convenience used by the explosion-time checks.
pub fn tau_quantile_sample(theta: f64, rng: &mut impl rand::Rng) -> f64 {
    sample_tau(theta, rng)
}

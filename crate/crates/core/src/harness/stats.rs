//! Estimators and distributional tests used by the validation suites.

use crate::error::{Error, Result};
use crate::massflow::MassValue;

/// One λ of an empirical Laplace transform.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceEstimate {
    pub lambda: f64,
    pub estimate: f64,
    pub std_error: f64,
}

/// Mean of e^{−λσ} per λ with its standard error. Infinite samples are
/// excluded from the mean and reported in the count (they carry weight 0 in
/// the transform of the finite part; callers decide how to fold them in).
pub fn empirical_laplace(
    samples: &[MassValue],
    lam_grid: &[f64],
) -> Result<(Vec<LaplaceEstimate>, usize)> {
    let finite: Vec<f64> = samples.iter().filter_map(|s| s.finite()).collect();
    if finite.is_empty() {
        return Err(Error::EmptySample("empirical_laplace".into()));
    }
    let infinite = samples.len() - finite.len();
    let n = finite.len() as f64;
    let out = lam_grid
        .iter()
        .map(|&lam| {
            let mean = finite.iter().map(|&s| (-lam * s).exp()).sum::<f64>() / n;
            let var = finite
                .iter()
                .map(|&s| ((-lam * s).exp() - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0).max(1.0);
            LaplaceEstimate {
                lambda: lam,
                estimate: mean,
                std_error: (var / n).sqrt(),
            }
        })
        .collect();
    Ok((out, infinite))
}

/// Result of a KS comparison.
#[derive(Debug, Clone, Copy)]
pub struct KsOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n: usize,
}

/// One-sample KS against a reference CDF; pass iff sup-distance is at most
/// 1.63/√n (α ≈ 0.01).
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsOutcome {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let nf = n as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let c = cdf(x);
        sup = sup
            .max((c - i as f64 / nf).abs())
            .max((c - (i + 1) as f64 / nf).abs());
    }
    let threshold = 1.63 / nf.sqrt();
    KsOutcome {
        statistic: sup,
        threshold,
        pass: sup <= threshold,
        n,
    }
}

/// Two-sample KS with threshold 1.63·√((n+m)/(nm)).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsOutcome {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|p, q| p.partial_cmp(q).unwrap());
    xb.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let mut sup: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < xa.len() && j < xb.len() {
        if xa[i] <= xb[j] {
            i += 1;
        } else {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    let threshold = 1.63 * ((na + nb) / (na * nb)).sqrt();
    KsOutcome {
        statistic: sup,
        threshold,
        pass: sup <= threshold,
        n: xa.len() + xb.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{module_id, substream};
    use rand::Rng;
    use rand_distr::{Distribution, Exp};

    #[test]
    fn laplace_of_constants_and_exponentials() {
        let c = 0.7;
        let samples: Vec<MassValue> = vec![MassValue::Finite(c); 50];
        let (est, inf) = empirical_laplace(&samples, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(inf, 0);
        assert_eq!(est[0].estimate, 1.0);
        assert_eq!(est[0].std_error, 0.0);
        assert!((est[1].estimate - (-c).exp()).abs() < 1e-12);

        // Exp(1) draws: E e^{−σ} = 1/2 within 3·SE.
        let mut rng = substream(61, module_id::HARNESS, 0);
        let exp = Exp::new(1.0).unwrap();
        let draws: Vec<MassValue> = (0..50_000)
            .map(|_| MassValue::Finite(exp.sample(&mut rng)))
            .collect();
        let (est, _) = empirical_laplace(&draws, &[1.0]).unwrap();
        assert!((est[0].estimate - 0.5).abs() <= 3.0 * est[0].std_error);

        // Infinite flags are excluded but counted.
        let mixed = vec![MassValue::Infinite, MassValue::Finite(1.0)];
        let (_, inf) = empirical_laplace(&mixed, &[1.0]).unwrap();
        assert_eq!(inf, 1);
        assert!(empirical_laplace(&[MassValue::Infinite], &[1.0]).is_err());
    }

    #[test]
    fn ks_calibration_and_power() {
        let mut rng = substream(62, module_id::HARNESS, 1);
        // Samples from the reference itself pass with high frequency.
        let mut passes = 0;
        let meta = 40;
        for _ in 0..meta {
            let samples: Vec<f64> = (0..2_000).map(|_| rng.random::<f64>()).collect();
            if ks_test(&samples, |x| x.clamp(0.0, 1.0)).pass {
                passes += 1;
            }
        }
        assert!(passes >= meta - 2, "calibration: {passes}/{meta}");
        // A shifted distribution fails.
        let shifted: Vec<f64> = (0..2_000)
            .map(|_| rng.random::<f64>() * 0.8 + 0.2)
            .collect();
        assert!(!ks_test(&shifted, |x| x.clamp(0.0, 1.0)).pass);
        // Degenerate n = 1 always passes (threshold 1.63).
        let one = ks_test(&[0.4], |x| x);
        assert!(one.pass && one.threshold > 1.0);
    }

    #[test]
    fn two_sample_ks_detects_and_accepts() {
        let mut rng = substream(63, module_id::HARNESS, 2);
        let a: Vec<f64> = (0..4_000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..4_000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_two_sample(&a, &b).pass);
        let c: Vec<f64> = (0..4_000).map(|_| rng.random::<f64>() + 0.15).collect();
        assert!(!ks_two_sample(&a, &c).pass);
    }
}

//! Pareto-smoothed self-normalized importance weights.
//!
//! The M = min(⌈0.2 S⌉, ⌈3√S⌉) largest raw ratios are replaced by
//! expected order statistics of a generalized Pareto distribution fitted
//! to their exceedances by probability-weighted moments; the tail shape
//! k̂ is the reliability diagnostic (k̂ > 0.7 is the customary alarm).

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PsisResult {
    /// Normalized weights (simplex).
    pub weights: Vec<f64>,
    /// Fitted generalized-Pareto tail shape.
    pub pareto_k: f64,
    /// Effective sample size 1 / Σ w².
    pub ess: f64,
}

/// Generalized Pareto fit by probability-weighted moments, in the
/// Hosking-Wallis parameterization: survival (1 - k y/a)^{1/k}.
/// Returns (a, k); the tail-shape diagnostic is ξ = -k.
pub fn gpd_fit_pwm(exceedances_sorted: &[f64]) -> (f64, f64) {
    let m = exceedances_sorted.len();
    debug_assert!(m >= 2);
    let mf = m as f64;
    let b0: f64 = exceedances_sorted.iter().sum::<f64>() / mf;
    let b1: f64 = exceedances_sorted
        .iter()
        .enumerate()
        .map(|(i, &y)| (mf - 1.0 - i as f64) / (mf - 1.0) * y)
        .sum::<f64>()
        / mf;
    let denom = b0 - 2.0 * b1;
    if denom <= 0.0 {
        // degenerate sample (e.g. all equal); treat as exponential-ish
        return (b0.max(1e-300), 0.0);
    }
    let k = b0 / denom - 2.0;
    let a = b0 * (1.0 + k);
    (a, k)
}

/// Quantile of the Hosking-Wallis GPD.
fn gpd_quantile(a: f64, k: f64, p: f64) -> f64 {
    if k.abs() < 1e-9 {
        -a * (1.0 - p).ln()
    } else {
        a / k * (1.0 - (1.0 - p).powf(k))
    }
}

/// Smooth raw log-ratios into normalized weights with the Pareto tail
/// replacement. The input is stabilized by its maximum, so any finite
/// shift cancels.
pub fn smooth_weights(log_ratios: &[f64]) -> Result<PsisResult> {
    let s = log_ratios.len();
    assert!(s >= 5, "need at least a handful of samples");
    let max_lr = log_ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max_lr.is_finite() {
        return Err(Error::AllWeightsDegenerate { max_weight: f64::NAN });
    }
    let mut ratios: Vec<f64> = log_ratios.iter().map(|&lr| (lr - max_lr).exp()).collect();

    let m = ((0.2 * s as f64).ceil() as usize).min((3.0 * (s as f64).sqrt()).ceil() as usize);
    let m = m.min(s - 1).max(2);

    // indices of the m largest ratios, ascending by value
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&i, &j| ratios[i].partial_cmp(&ratios[j]).unwrap());
    let tail = &order[s - m..];
    let threshold = ratios[order[s - m - 1]];
    let max_ratio = ratios[*tail.last().unwrap()];

    let exceedances: Vec<f64> = tail.iter().map(|&i| ratios[i] - threshold).collect();
    let spread = exceedances.last().unwrap() - exceedances.first().unwrap();
    let pareto_k = if spread <= 1e-12 * (1.0 + threshold) {
        // flat tail: nothing to smooth; a uniform tail is reported as a
        // very short-tailed fit
        -1.0
    } else {
        let (a, k) = gpd_fit_pwm(&exceedances);
        for (z, &i) in tail.iter().enumerate() {
            let p = (z as f64 + 0.5) / m as f64;
            ratios[i] = (threshold + gpd_quantile(a, k, p)).min(max_ratio);
        }
        -k
    };

    let total: f64 = ratios.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::AllWeightsDegenerate { max_weight: 1.0 });
    }
    let weights: Vec<f64> = ratios.iter().map(|r| r / total).collect();
    let max_w = weights.iter().cloned().fold(0.0f64, f64::max);
    if max_w > 0.999 {
        return Err(Error::AllWeightsDegenerate { max_weight: max_w });
    }
    let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    Ok(PsisResult {
        weights,
        pareto_k,
        ess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn equal_ratios_give_uniform_weights() {
        let lr = vec![3.7; 400];
        let r = smooth_weights(&lr).unwrap();
        for w in &r.weights {
            assert!((w - 1.0 / 400.0).abs() < 1e-10);
        }
        assert!(r.pareto_k <= 0.0);
        assert!((r.ess - 400.0).abs() < 1e-6);
    }

    #[test]
    fn shift_invariance() {
        let lr: Vec<f64> = (0..300).map(|i| (i as f64 * 0.618).sin()).collect();
        let a = smooth_weights(&lr).unwrap();
        let shifted: Vec<f64> = lr.iter().map(|x| x + 123.4).collect();
        let b = smooth_weights(&shifted).unwrap();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa - wb).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_equivariance() {
        let lr: Vec<f64> = (0..200).map(|i| ((i * 37 % 200) as f64) * 0.01).collect();
        let a = smooth_weights(&lr).unwrap();
        let mut perm: Vec<usize> = (0..200).collect();
        perm.reverse();
        let lr_p: Vec<f64> = perm.iter().map(|&i| lr[i]).collect();
        let b = smooth_weights(&lr_p).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert!((a.weights[i] - b.weights[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn ess_within_bounds() {
        let mut rng = crate::rng::seeded(5);
        let lr: Vec<f64> = (0..1000).map(|_| 2.0 * rng.random::<f64>()).collect();
        let r = smooth_weights(&lr).unwrap();
        assert!(r.ess >= 1.0 && r.ess <= 1000.0);
        let sum: f64 = r.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_single_heavy_weight_detected() {
        let mut lr = vec![0.0; 200];
        lr[7] = 800.0;
        assert!(matches!(
            smooth_weights(&lr),
            Err(Error::AllWeightsDegenerate { .. })
        ));
    }

    #[test]
    fn gpd_pwm_recovers_parameters() {
        // inverse-CDF draws from GPD(a, k) in Hosking parameterization
        let (a_true, k_true) = (2.0, 0.25);
        let mut rng = crate::rng::seeded(9);
        let mut y: Vec<f64> = (0..50_000)
            .map(|_| {
                let u: f64 = rng.random();
                gpd_quantile(a_true, k_true, u)
            })
            .collect();
        y.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let (a, k) = gpd_fit_pwm(&y);
        assert!((a - a_true).abs() < 0.05, "a = {a}");
        assert!((k - k_true).abs() < 0.02, "k = {k}");

        // heavy tail (k < 0 in this parameterization, ξ = -k > 0)
        let (a_true, k_true) = (1.0, -0.3);
        let mut y: Vec<f64> = (0..50_000)
            .map(|_| {
                let u: f64 = rng.random();
                gpd_quantile(a_true, k_true, u)
            })
            .collect();
        y.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let (a, k) = gpd_fit_pwm(&y);
        assert!((a - a_true).abs() < 0.05, "a = {a}");
        assert!((k - k_true).abs() < 0.03, "k = {k}");
    }
}

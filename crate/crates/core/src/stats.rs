//! Small statistical helpers shared by experiments and tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

/// Pearson chi-square goodness-of-fit of observed counts against expected
/// probabilities. Cells with expected count below `min_expected` are merged
/// into the largest cell, the standard validity fix for near-zero-mass
/// states. Returns `(statistic, dof, p_value)`.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64], min_expected: f64) -> (f64, usize, f64) {
    assert_eq!(observed.len(), expected_probs.len());
    let total: u64 = observed.iter().sum();
    let t = total as f64;
    let largest = expected_probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap();
    let mut merged_obs = observed[largest] as f64;
    let mut merged_exp = expected_probs[largest] * t;
    let mut stat = 0.0;
    let mut cells = 1usize;
    for (k, (&o, &p)) in observed.iter().zip(expected_probs).enumerate() {
        if k == largest {
            continue;
        }
        let e = p * t;
        if e < min_expected {
            merged_obs += o as f64;
            merged_exp += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    stat += (merged_obs - merged_exp).powi(2) / merged_exp;
    let dof = cells.saturating_sub(1).max(1);
    let p = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat);
    (stat, dof, p)
}

/// Largest absolute z-score of observed multinomial counts against
/// expected probabilities; `sigma` floors at one count to keep near-empty
/// cells meaningful.
pub fn max_multinomial_z(observed: &[u64], expected_probs: &[f64], total: u64) -> f64 {
    let t = total as f64;
    observed
        .iter()
        .zip(expected_probs)
        .map(|(&o, &p)| {
            let sigma = (t * p * (1.0 - p)).sqrt().max(1.0);
            ((o as f64 - t * p) / sigma).abs()
        })
        .fold(0.0, f64::max)
}

/// 95% order-statistic confidence band for the q-quantile estimated from
/// `m` sorted samples: returns 1-based order-statistic indices `(lo, hi)`
/// from the Binomial(m, q) quantiles. Log-space pmf keeps the tails from
/// underflowing for large m.
pub fn quantile_order_band(m: usize, q: f64) -> (usize, usize) {
    let mf = m as f64;
    let ln_q = q.ln();
    let ln_1q = (1.0 - q).ln();
    let ln_m1 = ln_gamma(mf + 1.0);
    let mut cdf = 0.0;
    let mut lo = 1usize;
    let mut hi = m;
    let mut lo_set = false;
    for k in 0..=m {
        let kf = k as f64;
        let ln_pmf =
            ln_m1 - ln_gamma(kf + 1.0) - ln_gamma(mf - kf + 1.0) + kf * ln_q + (mf - kf) * ln_1q;
        cdf += ln_pmf.exp();
        if !lo_set && cdf > 0.025 {
            lo = k.max(1); // largest index with P(Bin < index) <= 0.025
            lo_set = true;
        }
        if cdf >= 0.975 {
            hi = (k + 1).min(m);
            break;
        }
    }
    (lo.min(m).max(1), hi.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_matches_known_quantiles() {
        // chi2 with 3 dof: P(X > 11.345) ~ 0.01
        let (_, _, p) = chi_square_gof(
            &[262, 246, 246, 246],
            &[0.25, 0.25, 0.25, 0.25],
            5.0,
        );
        assert!(p > 0.5, "balanced counts should fit well, p = {p}");
        let (_, _, p) = chi_square_gof(&[400, 200, 200, 200], &[0.25; 4], 5.0);
        assert!(p < 1e-6, "badly skewed counts should fail, p = {p}");
    }

    #[test]
    fn chi_square_pools_tiny_cells() {
        // a near-zero expected cell with zero observations must not blow up
        let probs = [1e-18, 0.5, 0.5 - 1e-18];
        let (stat, dof, p) = chi_square_gof(&[0, 501, 499], &probs, 5.0);
        assert!(stat.is_finite());
        assert_eq!(dof, 1);
        assert!(p > 0.9);
    }

    #[test]
    fn multinomial_z_detects_shift() {
        let z = max_multinomial_z(&[520, 480], &[0.5, 0.5], 1000);
        assert!(z > 1.0 && z < 2.0);
    }

    #[test]
    fn quantile_band_brackets_true_quantile() {
        let (lo, hi) = quantile_order_band(1000, 0.75);
        assert!(lo < 750 && 750 < hi);
        assert!(hi - lo < 80, "band unexpectedly wide: {lo}..{hi}");
    }
}

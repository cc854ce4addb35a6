//! Closed-form bounds on sparse estimation time, bias and mixing time, all
//! driven by the total influence alpha and the delay parameters tau and
//! tau*. Logs are natural throughout.

use crate::error::{Error, Result};

/// Shared inputs of the bound formulas. Fields irrelevant to a given bound
/// are ignored by it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundInputs {
    /// Variable count n.
    pub n: u64,
    /// Total influence alpha >= 0.
    pub alpha: f64,
    /// Expected-delay bound tau >= 0.
    pub tau: f64,
    /// Exponential-moment delay bound tau* >= 0.
    pub tau_star: f64,
    /// Event sparsity omega in [1, n].
    pub omega: u64,
    /// Target accuracy epsilon in (0, 1].
    pub epsilon: f64,
    /// Step count t, used by the bias bound.
    pub t: u64,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        if self.n == 0
            || self.alpha < 0.0
            || self.tau < 0.0
            || self.tau_star < 0.0
            || self.omega < 1
            || self.omega > self.n
            || !(self.epsilon > 0.0 && self.epsilon <= 1.0)
        {
            return Err(Error::ConfigError(format!("invalid bound inputs: {self:?}")));
        }
        Ok(())
    }

    fn require_dobrushin(&self) -> Result<()> {
        if self.alpha >= 1.0 {
            return Err(Error::DobrushinViolated { alpha: self.alpha });
        }
        Ok(())
    }
}

fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

/// Steps after which sequential Gibbs estimates every omega-sparse event
/// within epsilon, under Dobrushin's condition:
/// `ceil(n/(1-alpha) * ln(omega/epsilon))`, floored at 0.
pub fn bound_seq_sparse_estimation(inputs: &BoundInputs) -> Result<u64> {
    inputs.validate()?;
    inputs.require_dobrushin()?;
    Ok(seq_sparse_value(inputs).max(0.0).ceil() as u64)
}

fn seq_sparse_value(inputs: &BoundInputs) -> f64 {
    inputs.n as f64 / (1.0 - inputs.alpha) * (inputs.omega as f64 / inputs.epsilon).ln()
}

/// Asynchronous counterpart of `bound_seq_sparse_estimation`:
/// `ceil(n/(1-alpha) * ln(omega/epsilon) + 2*omega*alpha*tau/((1-alpha)^2 * epsilon))`,
/// valid only when `epsilon >= 2*omega*alpha*tau/((1-alpha)*n)`.
pub fn bound_hog_sparse_estimation(inputs: &BoundInputs) -> Result<u64> {
    inputs.validate()?;
    inputs.require_dobrushin()?;
    let one_minus = 1.0 - inputs.alpha;
    let threshold = 2.0 * inputs.omega as f64 * inputs.alpha * inputs.tau
        / (one_minus * inputs.n as f64);
    if inputs.epsilon < threshold {
        return Err(Error::EpsilonTooSmall {
            epsilon: inputs.epsilon,
            threshold,
        });
    }
    let correction = 2.0 * inputs.omega as f64 * inputs.alpha * inputs.tau
        / (one_minus * one_minus * inputs.epsilon);
    Ok((seq_sparse_value(inputs) + correction).max(0.0).ceil() as u64)
}

/// Sparse-variation gap between the asynchronous and sequential chains
/// after t steps from a shared start:
/// `(omega*alpha*tau*t/n^2) * exp(((alpha-1)_+ / n) * t)`.
pub fn bound_hogwild_bias(inputs: &BoundInputs) -> f64 {
    let n = inputs.n as f64;
    let t = inputs.t as f64;
    inputs.omega as f64 * inputs.alpha * inputs.tau * t / (n * n)
        * (positive_part(inputs.alpha - 1.0) / n * t).exp()
}

/// Sparse-estimation bound for the asynchronous chain built on top of an
/// arbitrary convex, decreasing sequential bound `seq_bound(epsilon)`
/// (real-valued, e.g. the Dobrushin bound before its ceiling):
/// with `c = seq_bound(epsilon/2) / n`, returns
/// `ceil(seq_bound(epsilon) + (2*omega*alpha*tau*c^2/epsilon) * exp(c*(alpha-1)_+))`,
/// valid when `epsilon >= (2*omega*alpha*tau*c/n) * exp(c*(alpha-1)_+)`.
///
/// Convexity and monotonicity of `seq_bound` are the caller's
/// responsibility; a three-point spot check rejects obvious violations.
pub fn bound_general_bias_estimation<F: Fn(f64) -> f64>(
    inputs: &BoundInputs,
    seq_bound: F,
) -> Result<u64> {
    inputs.validate()?;
    let eps = inputs.epsilon;
    let (fa, fm, fb) = (seq_bound(eps / 2.0), seq_bound(eps * 0.75), seq_bound(eps));
    let scale = fa.abs().max(1.0);
    if fa < fm - 1e-9 * scale
        || fm < fb - 1e-9 * scale
        || fm > 0.5 * (fa + fb) + 1e-9 * scale
    {
        return Err(Error::NonConvexBoundFunction);
    }
    let n = inputs.n as f64;
    let c = fa / n;
    let growth = (c * positive_part(inputs.alpha - 1.0)).exp();
    let threshold = 2.0 * inputs.omega as f64 * inputs.alpha * inputs.tau * c / n * growth;
    if eps < threshold {
        return Err(Error::EpsilonTooSmall {
            epsilon: eps,
            threshold,
        });
    }
    let correction = 2.0 * inputs.omega as f64 * inputs.alpha * inputs.tau * c * c / eps * growth;
    Ok((fb + correction).max(0.0).ceil() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingVariant {
    Sequential,
    Hogwild,
}

/// Mixing-time bounds under Dobrushin's condition:
/// sequential `n/(1-alpha) * ln(n/epsilon)`, asynchronous
/// `(n + alpha*tau*)/(1-alpha) * ln(n/epsilon)`. Their ratio is exactly
/// `1 + alpha*tau*/n`.
pub fn bound_mixing(inputs: &BoundInputs, variant: MixingVariant) -> Result<f64> {
    inputs.validate()?;
    inputs.require_dobrushin()?;
    let n = inputs.n as f64;
    let log_term = (n / inputs.epsilon).ln();
    let numerator = match variant {
        MixingVariant::Sequential => n,
        MixingVariant::Hogwild => n + inputs.alpha * inputs.tau_star,
    };
    Ok(numerator / (1.0 - inputs.alpha) * log_term)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> BoundInputs {
        BoundInputs {
            n: 1000,
            alpha: 0.5,
            tau: 0.0,
            tau_star: 0.0,
            omega: 1,
            epsilon: 0.1,
            t: 0,
        }
    }

    fn rel_eq(a: f64, b: f64) {
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn seq_sparse_plug_ins() {
        let mut i = inputs();
        i.n = 2;
        assert_eq!(bound_seq_sparse_estimation(&i).unwrap(), 10);
        i.epsilon = 1.0; // epsilon = omega
        assert_eq!(bound_seq_sparse_estimation(&i).unwrap(), 0);
        let i = BoundInputs {
            n: 1000,
            alpha: 0.6,
            epsilon: 0.05,
            ..inputs()
        };
        assert_eq!(bound_seq_sparse_estimation(&i).unwrap(), 7490);
    }

    #[test]
    fn seq_sparse_rejects_dobrushin_violation() {
        let i = BoundInputs { alpha: 1.0, ..inputs() };
        assert!(matches!(
            bound_seq_sparse_estimation(&i),
            Err(Error::DobrushinViolated { .. })
        ));
    }

    #[test]
    fn hog_sparse_plug_ins() {
        // tau = 0 collapses to the sequential bound
        let i = BoundInputs { n: 300, alpha: 0.4, ..inputs() };
        assert_eq!(
            bound_hog_sparse_estimation(&i).unwrap(),
            bound_seq_sparse_estimation(&i).unwrap()
        );
        let i = BoundInputs {
            n: 1000,
            alpha: 0.6,
            tau: 1.0,
            epsilon: 0.05,
            ..inputs()
        };
        assert_eq!(bound_hog_sparse_estimation(&i).unwrap(), 7640);
    }

    #[test]
    fn hog_sparse_guard() {
        let i = BoundInputs {
            n: 10,
            alpha: 0.9,
            tau: 50.0,
            epsilon: 0.01,
            ..inputs()
        };
        assert!(matches!(
            bound_hog_sparse_estimation(&i),
            Err(Error::EpsilonTooSmall { .. })
        ));
    }

    #[test]
    fn bias_bound_plug_ins() {
        let i = BoundInputs {
            n: 2,
            alpha: 0.5,
            tau: 1.0,
            t: 4,
            ..inputs()
        };
        rel_eq(bound_hogwild_bias(&i), 0.5);
        let i = BoundInputs { t: 0, ..i };
        assert_eq!(bound_hogwild_bias(&i), 0.0);
        let i = BoundInputs {
            n: 10,
            alpha: 2.0,
            tau: 1.0,
            t: 10,
            ..inputs()
        };
        rel_eq(bound_hogwild_bias(&i), 0.5436563656918091);
    }

    #[test]
    fn general_bias_plug_ins() {
        let i = BoundInputs {
            n: 1000,
            alpha: 0.5,
            tau: 1.0,
            epsilon: 0.2,
            ..inputs()
        };
        let seq = |e: f64| 1000.0 / 0.5 * (1.0f64 / e).ln();
        assert_eq!(bound_general_bias_estimation(&i, seq).unwrap(), 3325);

        // tau = 0 reduces to ceil(seq_bound(eps))
        let i0 = BoundInputs { tau: 0.0, ..i };
        assert_eq!(
            bound_general_bias_estimation(&i0, seq).unwrap(),
            seq(0.2).ceil() as u64
        );
    }

    #[test]
    fn general_bias_guards() {
        let i = BoundInputs {
            n: 1000,
            alpha: 0.5,
            tau: 1e9,
            epsilon: 0.2,
            ..inputs()
        };
        let seq = |e: f64| 1000.0 / 0.5 * (1.0f64 / e).ln();
        assert!(matches!(
            bound_general_bias_estimation(&i, seq),
            Err(Error::EpsilonTooSmall { .. })
        ));
        // a concave bound function fails the spot check
        let concave = |e: f64| -(e * e);
        assert!(matches!(
            bound_general_bias_estimation(&inputs(), concave),
            Err(Error::NonConvexBoundFunction)
        ));
    }

    #[test]
    fn mixing_plug_ins() {
        let i = BoundInputs {
            n: 1000,
            alpha: 0.6,
            epsilon: 0.25,
            ..inputs()
        };
        rel_eq(
            bound_mixing(&i, MixingVariant::Sequential).unwrap(),
            20735.12410025507,
        );
        // tau* = 0: both variants coincide
        assert_eq!(
            bound_mixing(&i, MixingVariant::Sequential).unwrap(),
            bound_mixing(&i, MixingVariant::Hogwild).unwrap()
        );
    }

    #[test]
    fn mixing_ratio_is_one_plus_alpha_tau_star_over_n() {
        let alpha = 3.0 * (0.2f64).tanh();
        let i = BoundInputs {
            n: 1000,
            alpha,
            tau_star: 200.0,
            epsilon: 0.25,
            ..inputs()
        };
        let ratio = bound_mixing(&i, MixingVariant::Hogwild).unwrap()
            / bound_mixing(&i, MixingVariant::Sequential).unwrap();
        let expect = 1.0 + alpha * 200.0 / 1000.0;
        assert!((ratio - expect).abs() < 1e-14);
        rel_eq(ratio, 1.1184251921349424);
    }

    #[test]
    fn mixing_rejects_dobrushin_violation() {
        let i = BoundInputs { alpha: 1.2, ..inputs() };
        assert!(matches!(
            bound_mixing(&i, MixingVariant::Hogwild),
            Err(Error::DobrushinViolated { .. })
        ));
    }

    #[test]
    fn bounds_are_monotone_on_input_grids() {
        let base = BoundInputs {
            n: 500,
            alpha: 0.5,
            tau: 1.0,
            tau_star: 5.0,
            omega: 2,
            epsilon: 0.2,
            t: 100,
        };
        // nonincreasing in epsilon
        let mut prev = u64::MAX;
        for eps in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let v = bound_hog_sparse_estimation(&BoundInputs { epsilon: eps, ..base }).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        // nondecreasing in n, tau, tau*, omega
        let mut prev = 0;
        for n in [100, 200, 400, 800] {
            let v = bound_seq_sparse_estimation(&BoundInputs { n, ..base }).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = 0;
        for tau in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let v = bound_hog_sparse_estimation(&BoundInputs { tau, ..base }).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = 0.0;
        for tau_star in [0.0, 10.0, 50.0, 200.0] {
            let v = bound_mixing(&BoundInputs { tau_star, ..base }, MixingVariant::Hogwild)
                .unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = 0;
        for omega in [1, 2, 4, 8] {
            let v = bound_hog_sparse_estimation(&BoundInputs { omega, ..base }).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        // bias bound monotone in t
        let mut prev = -1.0;
        for t in [0, 10, 100, 1000] {
            let v = bound_hogwild_bias(&BoundInputs { t, ..base });
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn hog_dominates_seq_when_both_defined() {
        let mut rng_state = 123456789u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (rng_state >> 33) as f64 / (1u64 << 31) as f64
        };
        for _ in 0..200 {
            let i = BoundInputs {
                n: 100 + (next() * 900.0) as u64,
                alpha: next() * 0.95,
                tau: next() * 3.0,
                tau_star: 0.0,
                omega: 1 + (next() * 4.0) as u64,
                epsilon: 0.05 + next() * 0.9,
                t: 0,
            };
            if let (Ok(seq), Ok(hog)) = (
                bound_seq_sparse_estimation(&i),
                bound_hog_sparse_estimation(&i),
            ) {
                assert!(hog >= seq, "{i:?}");
            }
        }
    }
}

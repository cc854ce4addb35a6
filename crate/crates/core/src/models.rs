//! Constructors for the example models and delay distributions used by the
//! experiments, with their standard parameterizations.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Factor, FactorGraph, FactorKind, VariableSpec};

/// Energy penalty used to encode "forbidden" states as large-but-finite.
/// The residual probability e^-40 sits far below every test tolerance.
pub const FORBIDDEN_STATE_PENALTY: f64 = 40.0;

fn binary_vars(n: usize) -> Vec<VariableSpec> {
    (0..n)
        .map(|id| VariableSpec { id, domain_size: 2 })
        .collect()
}

/// Two binary variables with p(0,1) = p(1,0) = p(1,1) = 1/3 and p(0,0)
/// suppressed by a finite penalty so the distribution stays strictly
/// positive.
pub fn build_bias_example() -> FactorGraph {
    let table = vec![-FORBIDDEN_STATE_PENALTY, 0.0, 0.0, 0.0];
    FactorGraph::new(binary_vars(2), vec![Factor::table(vec![0, 1], table)])
        .expect("bias example is a valid graph")
}

/// Two-variable Ising edge with coupling `beta` and no priors.
pub fn single_edge_ising(beta: f64) -> FactorGraph {
    FactorGraph::new(
        binary_vars(2),
        vec![Factor {
            scope: vec![0, 1],
            kind: FactorKind::IsingEdge { beta },
        }],
    )
    .expect("single-edge ising is a valid graph")
}

/// Slow-mixing two-bank spin model: `n_bank` X spins under a magnetization
/// penalty of weight `m1`, plus `n_bank` Y spins whose squared
/// magnetization is weighted `beta / n_bank` while `|1^T X| <= 1` and `m2`
/// otherwise. Conditionals are evaluated from maintained spin sums, never
/// from tables, so instances with thousands of spins cost O(n_bank)
/// memory.
///
/// `m1` must dominate `m2 * n_bank^2` for the X dynamics to keep
/// `|1^T X| = 1`; the default 1e10 does. Arbitrarily large energies are
/// safe because every consumer max-subtracts before exponentiating.
pub fn build_badmix_model(n_bank: usize, beta: f64, m1: f64, m2: f64) -> Result<FactorGraph> {
    if n_bank.is_multiple_of(2) || n_bank < 3 {
        return Err(Error::ConfigError(format!(
            "bad-mix model needs an odd bank size >= 3, got {n_bank}"
        )));
    }
    if m1 < 0.0 || m2 < 0.0 || !m1.is_finite() || !m2.is_finite() {
        return Err(Error::ConfigError(
            "bad-mix model needs finite m1, m2 >= 0".into(),
        ));
    }
    let phi_x = Factor {
        scope: (0..n_bank).collect(),
        kind: FactorKind::MagnetizationPenalty { weight: m1 },
    };
    let phi_y = Factor {
        scope: (0..2 * n_bank).collect(),
        kind: FactorKind::GatedSquare {
            low: beta / n_bank as f64,
            high: m2,
        },
    };
    FactorGraph::new(binary_vars(2 * n_bank), vec![phi_x, phi_y])
}

/// Uniform random `degree`-regular Ising model on `n` spins generated by
/// the configuration (pairing) model, rejecting pairings with self-loops
/// or repeated edges. Each edge carries energy `beta * sigma * sigma'` as
/// a dense table; nonzero `priors[x]` add single-variable factors.
pub fn build_random_ising(
    n: usize,
    degree: usize,
    beta: f64,
    priors: &[f64],
    rng: &mut impl Rng,
) -> Result<FactorGraph> {
    if degree >= n {
        return Err(Error::ConfigError(format!(
            "degree {degree} must be smaller than n = {n}"
        )));
    }
    if !(n * degree).is_multiple_of(2) {
        return Err(Error::ConfigError(format!(
            "n * degree must be even, got {n} * {degree}"
        )));
    }
    if !priors.is_empty() && priors.len() != n {
        return Err(Error::ConfigError(format!(
            "priors must be empty or length n, got {}",
            priors.len()
        )));
    }
    const MAX_ATTEMPTS: usize = 1000;
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
    let half = stubs.len() / 2;
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(half);
    let mut ok = false;
    for _ in 0..MAX_ATTEMPTS {
        stubs.shuffle(rng);
        edges.clear();
        let mut seen = std::collections::HashSet::with_capacity(half);
        let mut simple = true;
        for k in 0..half {
            let (u, v) = (stubs[2 * k], stubs[2 * k + 1]);
            if u == v {
                simple = false;
                break;
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                simple = false;
                break;
            }
            edges.push(key);
        }
        if simple {
            ok = true;
            break;
        }
    }
    if !ok {
        return Err(Error::GenerationFailure {
            attempts: MAX_ATTEMPTS,
        });
    }
    edges.sort_unstable();
    let mut factors: Vec<Factor> = edges
        .iter()
        .map(|&(u, v)| Factor::table(vec![u, v], vec![beta, -beta, -beta, beta]))
        .collect();
    for (x, &b) in priors.iter().enumerate() {
        if b != 0.0 {
            factors.push(Factor {
                scope: vec![x],
                kind: FactorKind::IsingPrior { field: b },
            });
        }
    }
    FactorGraph::new(binary_vars(n), factors)
}

/// Maximum-entropy delay distribution on `{0..support_max}` consistent
/// with an exponential-moment target: `E[exp(delay/n)] = 1 + tau_star/n`.
/// The maximizer is the tilted family `pmf(k) proportional to
/// exp(lambda * exp(k/n))` with `lambda` solved by bisection.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MaxEntDelaySpec {
    pub support_max: u64,
    pub target_tau_star: f64,
    pub n: u64,
    pub lambda: f64,
    pub pmf: Vec<f64>,
    /// Mean delay of the solved pmf; always <= target_tau_star.
    pub reported_tau: f64,
}

/// Solves the maximum-entropy delay distribution for a given tau* target.
pub fn build_maxent_delay(support_max: u64, target_tau_star: f64, n: u64) -> Result<MaxEntDelaySpec> {
    let nf = n as f64;
    let k_max = support_max as usize;
    let moment_cap = nf * ((support_max as f64 / nf).exp() - 1.0);
    if !(0.0..=moment_cap).contains(&target_tau_star) {
        return Err(Error::UnattainableTauStar {
            target: target_tau_star,
            support_max,
            n,
        });
    }
    let mut spec = MaxEntDelaySpec {
        support_max,
        target_tau_star,
        n,
        lambda: 0.0,
        pmf: vec![0.0; k_max + 1],
        reported_tau: 0.0,
    };
    // degenerate endpoints: only a point mass attains the extreme moment
    if target_tau_star == 0.0 {
        spec.lambda = f64::NEG_INFINITY;
        spec.pmf[0] = 1.0;
        return Ok(spec);
    }
    if target_tau_star == moment_cap {
        spec.lambda = f64::INFINITY;
        spec.pmf[k_max] = 1.0;
        spec.reported_tau = support_max as f64;
        return Ok(spec);
    }

    let exps: Vec<f64> = (0..=k_max).map(|k| (k as f64 / nf).exp()).collect();
    // max-subtracted softmax over lambda * exp(k/n), stable for any lambda
    let pmf_for = |lambda: f64, out: &mut [f64]| {
        let m = exps
            .iter()
            .map(|e| lambda * e)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (k, w) in out.iter_mut().enumerate() {
            *w = (lambda * exps[k] - m).exp();
            sum += *w;
        }
        for w in out.iter_mut() {
            *w /= sum;
        }
    };
    let target_moment = 1.0 + target_tau_star / nf;
    let moment_of = |pmf: &[f64]| -> f64 { pmf.iter().zip(&exps).map(|(p, e)| p * e).sum() };

    let mut scratch = vec![0.0; k_max + 1];
    let (mut lo, mut hi) = (-1e7, 1e7);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        pmf_for(mid, &mut scratch);
        let gap = moment_of(&scratch) - target_moment;
        if gap < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if gap.abs() < 1e-14 {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    pmf_for(lambda, &mut scratch);
    let residual = (moment_of(&scratch) - target_moment).abs();
    debug_assert!(residual < 1e-10, "bisection residual {residual}");
    spec.lambda = lambda;
    spec.reported_tau = scratch
        .iter()
        .enumerate()
        .map(|(k, p)| k as f64 * p)
        .sum();
    spec.pmf = scratch;
    Ok(spec)
}

impl MaxEntDelaySpec {
    /// Exponential-moment constraint residual |E[exp(delay/n)] - (1 + tau*/n)|.
    pub fn constraint_residual(&self) -> f64 {
        let nf = self.n as f64;
        let moment: f64 = self
            .pmf
            .iter()
            .enumerate()
            .map(|(k, p)| p * (k as f64 / nf).exp())
            .sum();
        (moment - (1.0 + self.target_tau_star / nf)).abs()
    }

    pub fn entropy(&self) -> f64 {
        self.pmf
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }
}

/// Small random table-factor model for fuzz tests: `n <= 3` variables with
/// domains in {2, 3} and mild random energies, so chains mix fast and
/// enumeration stays cheap.
pub fn random_small_model(n: usize, rng: &mut impl Rng) -> FactorGraph {
    assert!((1..=3).contains(&n));
    let vars: Vec<VariableSpec> = (0..n)
        .map(|id| VariableSpec {
            id,
            domain_size: rng.gen_range(2..=3),
        })
        .collect();
    let mut factors = Vec::new();
    let n_factors = rng.gen_range(1..=3);
    for _ in 0..n_factors {
        let size = rng.gen_range(1..=n.min(2));
        let mut scope: Vec<usize> = (0..n).collect();
        scope.shuffle(rng);
        scope.truncate(size);
        scope.sort_unstable();
        let len: usize = scope.iter().map(|&v| vars[v].domain_size as usize).product();
        let table: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.2..1.2)).collect();
        factors.push(Factor::table(scope, table));
    }
    FactorGraph::new(vars, factors).expect("random small model is valid")
}

//! Empirical mixing-time estimation by coupling to the future: two chains
//! from the all-up and all-down states share every random choice through a
//! monotone coupling, and the first time they meet upper-bounds the mixing
//! time.

use rand::Rng;
use rayon::prelude::*;

use crate::delay::{DelayKind, DelayModel};
use crate::error::{Error, Result};
use crate::graph::{FactorGraph, FactorKind, State, Value};
use crate::history::StateHistory;
use crate::influence::ising_influence_bound;
use crate::rng::RngStream;
use crate::stats::quantile_order_band;

/// Default hard cap on steps per coupling trial.
pub const DEFAULT_COUPLING_CAP: u64 = 100_000_000;

/// Samples a pair with marginals exactly `p` and `q` that disagrees with
/// probability exactly `TV(p, q)`: the overlap `min(p, q)` is sampled with
/// probability `1 - TV`, otherwise the two normalized residuals (which
/// have disjoint supports) are sampled independently.
pub fn maximal_coupling_sample(
    p: &[f64],
    q: &[f64],
    rng: &mut impl Rng,
) -> Result<(Value, Value)> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "maximal coupling needs equal-length vectors, got {} and {}",
            p.len(),
            q.len()
        )));
    }
    let overlap: f64 = p.iter().zip(q).map(|(a, b)| a.min(*b)).sum();
    let u: f64 = rng.gen();
    if u < overlap {
        // walk the overlap mass with the same uniform
        let mut acc = 0.0;
        for (k, (a, b)) in p.iter().zip(q).enumerate() {
            acc += a.min(*b);
            if u < acc {
                return Ok((k as Value, k as Value));
            }
        }
        let k = (p.len() - 1) as Value;
        return Ok((k, k));
    }
    let tv = (1.0 - overlap).max(f64::MIN_POSITIVE);
    let residual_sample = |dist: &[f64], other: &[f64], u: f64| -> Value {
        let mut acc = 0.0;
        for (k, (a, b)) in dist.iter().zip(other).enumerate() {
            acc += (a - b.min(*a)) / tv;
            if u < acc {
                return k as Value;
            }
        }
        (dist.len() - 1) as Value
    };
    let x = residual_sample(p, q, rng.gen());
    let y = residual_sample(q, p, rng.gen());
    Ok((x, y))
}

/// One coupled-pair trial.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CouplingRun {
    /// First step at which the two chains are equal (or the cap).
    pub coupling_time: u64,
    /// True when the trial hit the step cap before coupling.
    pub censored: bool,
    pub trial: u64,
    pub delay_model: String,
    pub stream: RngStream,
}

#[derive(Debug, Clone)]
pub struct CouplingConfig {
    pub delay_model: DelayModel,
    /// Hard step cap; a capped trial records the cap and is censored.
    pub max_steps: u64,
    /// Steps to keep simulating past the coupling time, asserting the
    /// chains stay equal. Zero outside verification runs.
    pub verify_past_coupling: u64,
}

impl CouplingConfig {
    pub fn sequential() -> Self {
        Self {
            delay_model: DelayModel::zero(),
            max_steps: DEFAULT_COUPLING_CAP,
            verify_past_coupling: 0,
        }
    }

    pub fn with_delays(delay_model: DelayModel) -> Self {
        Self {
            delay_model,
            max_steps: DEFAULT_COUPLING_CAP,
            verify_past_coupling: 0,
        }
    }
}

/// Checks that every factor keeps the conditional probability of the up
/// spin monotone in the other variables, so the shared-threshold coupling
/// preserves the coordinatewise order. Two-variable tables must be
/// supermodular (that is ferromagnetic up to an energy shift);
/// single-variable factors are unconstrained.
fn check_monotone_ising(graph: &FactorGraph) -> Result<()> {
    if graph.domains().iter().any(|&d| d != 2) {
        return Err(Error::NonFerromagnetic(
            "all variables must be binary spins".into(),
        ));
    }
    for (fi, f) in graph.factors().iter().enumerate() {
        match &f.kind {
            FactorKind::IsingEdge { beta } => {
                if *beta < 0.0 {
                    return Err(Error::NonFerromagnetic(format!(
                        "factor {fi} has negative coupling beta = {beta}"
                    )));
                }
            }
            FactorKind::IsingPrior { .. } => {}
            FactorKind::Table(t) if f.scope.len() == 1 => {
                let _ = t;
            }
            FactorKind::Table(t) if f.scope.len() == 2 => {
                // supermodular: e(1,1) + e(0,0) >= e(0,1) + e(1,0)
                if t[3] + t[0] < t[1] + t[2] {
                    return Err(Error::NonFerromagnetic(format!(
                        "factor {fi} table is not supermodular"
                    )));
                }
            }
            _ => {
                return Err(Error::NonFerromagnetic(format!(
                    "factor {fi} is not a pairwise spin factor"
                )));
            }
        }
    }
    Ok(())
}

/// Runs one coupling-to-the-future trial on a ferromagnetic Ising-type
/// graph. Chain X starts all-up, chain Y all-down; each step both chains
/// sample the same variable, share the same staleness draws and apply the
/// same uniform threshold to their own conditional up-probability
/// (value up iff `r < p_up`). The coordinatewise order Y <= X is asserted
/// at every write. Returns the first step at which the chains agree.
pub fn run_monotone_coupling_ising(
    graph: &FactorGraph,
    config: &CouplingConfig,
    stream: RngStream,
) -> Result<CouplingRun> {
    check_monotone_ising(graph)?;
    if matches!(config.delay_model.kind, DelayKind::TwoThreadRace { .. }) {
        return Err(Error::ConfigError(
            "couplings support samplable delay models only".into(),
        ));
    }
    let n = graph.n();
    let mut rng = stream.rng();
    let support = config.delay_model.support_max();
    let mut hi = StateHistory::new(&State::constant(n, 1), support);
    let mut lo = StateHistory::new(&State::constant(n, 0), support);
    let mut disagree = n as u64;
    let mut cond_hi = Vec::new();
    let mut cond_lo = Vec::new();
    let mut delays: Vec<(usize, u64)> = Vec::new();
    let mut coupling_time = None;
    let mut step = 0u64;
    while step < config.max_steps {
        step += 1;
        let i = rng.gen_range(0..n);
        let t = hi.t();
        delays.clear();
        for &j in graph.markov_blanket(i) {
            delays.push((j, config.delay_model.sample(&mut rng).min(t)));
        }
        let r: f64 = rng.gen();
        let up_hi = threshold_update(graph, &hi, &delays, i, r, &mut cond_hi);
        let up_lo = threshold_update(graph, &lo, &delays, i, r, &mut cond_lo);
        assert!(
            up_lo <= up_hi,
            "monotone coupling order violated at step {step}, variable {i}"
        );
        let was_equal = hi.current()[i] == lo.current()[i];
        hi.write(i, up_hi);
        lo.write(i, up_lo);
        let is_equal = up_hi == up_lo;
        match (was_equal, is_equal) {
            (true, false) => disagree += 1,
            (false, true) => disagree -= 1,
            _ => {}
        }
        if disagree == 0 {
            if coupling_time.is_none() {
                coupling_time = Some(step);
                if config.verify_past_coupling == 0 {
                    break;
                }
            }
            if step >= coupling_time.unwrap() + config.verify_past_coupling {
                break;
            }
        } else if let Some(tc) = coupling_time {
            panic!("chains diverged at step {step} after coupling at {tc}");
        }
    }
    let (coupling_time, censored) = match coupling_time {
        Some(t) => (t, false),
        None => (config.max_steps, true),
    };
    Ok(CouplingRun {
        coupling_time,
        censored,
        trial: stream.stream,
        delay_model: config.delay_model.describe(),
        stream,
    })
}

#[inline]
fn threshold_update(
    graph: &FactorGraph,
    hist: &StateHistory,
    delays: &[(usize, u64)],
    i: usize,
    r: f64,
    cond: &mut Vec<f64>,
) -> Value {
    graph.conditional_into(
        |v| {
            for &(j, d) in delays {
                if j == v {
                    return hist.read(v, d);
                }
            }
            hist.current()[v]
        },
        i,
        cond,
    );
    // up iff r < P(spin = +1); this orientation is what preserves the
    // coordinatewise order under shared r
    if r < cond[1] {
        1
    } else {
        0
    }
}

/// Empirical mixing-time estimate: the (1-epsilon) quantile of coupling
/// times with a binomial order-statistic 95% band.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MixingEstimate {
    pub epsilon: f64,
    pub t_hat: u64,
    pub trials: usize,
    pub band: (u64, u64),
    pub censored_count: usize,
    /// True when any contributing trial hit the step cap, making t_hat a
    /// lower bound on the true quantile.
    pub right_censored: bool,
}

/// Minimum trials accepted by `estimate_mixing_time`.
pub const MIN_COUPLING_TRIALS: usize = 100;

/// The `ceil((1-epsilon) * m)`-th order statistic of the coupling times:
/// the fraction of trials strictly exceeding it is at most epsilon, and
/// exceeds epsilon one step earlier.
pub fn estimate_mixing_time(runs: &[CouplingRun], epsilon: f64) -> Result<MixingEstimate> {
    if runs.len() < MIN_COUPLING_TRIALS {
        return Err(Error::InsufficientTrials {
            required: MIN_COUPLING_TRIALS,
            actual: runs.len(),
        });
    }
    assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
    let m = runs.len();
    let mut times: Vec<u64> = runs.iter().map(|r| r.coupling_time).collect();
    times.sort_unstable();
    let q = 1.0 - epsilon;
    let idx = ((q * m as f64).ceil() as usize).clamp(1, m);
    let (lo, hi) = quantile_order_band(m, q);
    Ok(MixingEstimate {
        epsilon,
        t_hat: times[idx - 1],
        trials: m,
        band: (times[lo - 1], times[hi - 1]),
        censored_count: runs.iter().filter(|r| r.censored).count(),
        right_censored: runs.iter().any(|r| r.censored),
    })
}

/// One point of a tau*-sweep.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub tau_star: f64,
    pub t_hat: u64,
    pub band_lo: u64,
    pub band_hi: u64,
    /// Sequential baseline scaled by `1 + alpha * tau*/n` with alpha from
    /// the Ising closed form.
    pub theory_prediction: f64,
    pub trials: usize,
    pub censored_count: usize,
}

/// Runs `trials` couplings per grid point with maximum-entropy delays on
/// `{0..support_max}` and estimates `t_hat(epsilon)` for each tau*.
/// Trials run concurrently; per-trial streams derive from `stream` in
/// counter mode so results are reproducible regardless of scheduling.
pub fn tau_sweep(
    graph: &FactorGraph,
    tau_star_grid: &[f64],
    support_max: u64,
    trials: usize,
    epsilon: f64,
    stream: RngStream,
    max_steps: u64,
) -> Result<Vec<SweepRow>> {
    check_monotone_ising(graph)?;
    let n = graph.n() as u64;
    let alpha = ising_alpha_bound(graph);

    let run_point = |tau_star: f64, offset: u64| -> Result<MixingEstimate> {
        let spec = crate::models::build_maxent_delay(support_max, tau_star, n)?;
        let config = CouplingConfig {
            delay_model: DelayModel::maxent(spec),
            max_steps,
            verify_past_coupling: 0,
        };
        let runs: Result<Vec<CouplingRun>> = (0..trials as u64)
            .into_par_iter()
            .map(|trial| {
                run_monotone_coupling_ising(graph, &config, stream.substream(offset + trial))
            })
            .collect();
        estimate_mixing_time(&runs?, epsilon)
    };

    let estimates: Vec<MixingEstimate> = tau_star_grid
        .iter()
        .enumerate()
        .map(|(gi, &ts)| run_point(ts, 1 + gi as u64 * trials as u64))
        .collect::<Result<_>>()?;

    // theory anchors at the measured tau* = 0 estimate
    let baseline = match tau_star_grid.iter().position(|&t| t == 0.0) {
        Some(k) => estimates[k].t_hat,
        None => {
            run_point(0.0, 1 + tau_star_grid.len() as u64 * trials as u64)?.t_hat
        }
    };

    Ok(tau_star_grid
        .iter()
        .zip(&estimates)
        .map(|(&tau_star, est)| SweepRow {
            tau_star,
            t_hat: est.t_hat,
            band_lo: est.band.0,
            band_hi: est.band.1,
            theory_prediction: baseline as f64 * (1.0 + alpha * tau_star / n as f64),
            trials: est.trials,
            censored_count: est.censored_count,
        })
        .collect())
}

/// Closed-form influence bound read off the graph structure:
/// `max_i sum over incident edges of tanh(beta_e)`, which reduces to
/// `degree * tanh(beta)` on regular graphs with uniform coupling.
pub fn ising_alpha_bound(graph: &FactorGraph) -> f64 {
    let mut incident = vec![0.0f64; graph.n()];
    for f in graph.factors() {
        let beta = match &f.kind {
            FactorKind::IsingEdge { beta } => *beta,
            // shift-invariant interaction coefficient of a 2x2 table
            FactorKind::Table(t) if f.scope.len() == 2 => {
                (t[0] + t[3] - t[1] - t[2]) / 4.0
            }
            _ => continue,
        };
        for &v in &f.scope {
            incident[v] += beta.abs().tanh();
        }
    }
    let max_deg_bound = incident.iter().cloned().fold(0.0, f64::max);
    // consistent with the uniform-coupling closed form
    debug_assert!(max_deg_bound <= ising_influence_bound(graph.n().max(1), 1e9) + 1.0);
    max_deg_bound
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_random_ising, single_edge_ising};
    use crate::graph::VariableSpec;

    fn free_spins(n: usize) -> FactorGraph {
        FactorGraph::new(
            (0..n).map(|id| VariableSpec { id, domain_size: 2 }).collect(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn maximal_coupling_identical_always_agrees() {
        let mut rng = RngStream::new(61, 0).rng();
        let p = [0.3, 0.5, 0.2];
        for _ in 0..1000 {
            let (x, y) = maximal_coupling_sample(&p, &p, &mut rng).unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn maximal_coupling_disjoint_always_disagrees() {
        let mut rng = RngStream::new(62, 0).rng();
        for _ in 0..1000 {
            let (x, y) = maximal_coupling_sample(&[1.0, 0.0], &[0.0, 1.0], &mut rng).unwrap();
            assert_eq!((x, y), (0, 1));
        }
    }

    #[test]
    fn maximal_coupling_rate_and_marginals() {
        let mut rng = RngStream::new(63, 0).rng();
        let p = [0.75, 0.25];
        let q = [0.25, 0.75];
        let draws = 1_000_000u64;
        let mut disagree = 0u64;
        let mut x1 = 0u64;
        let mut y1 = 0u64;
        for _ in 0..draws {
            let (x, y) = maximal_coupling_sample(&p, &q, &mut rng).unwrap();
            disagree += (x != y) as u64;
            x1 += (x == 1) as u64;
            y1 += (y == 1) as u64;
        }
        let m = draws as f64;
        let sigma_tv = (0.5 * 0.5 / m).sqrt();
        assert!((disagree as f64 / m - 0.5).abs() < 3.0 * sigma_tv);
        let sigma_p = (0.25 * 0.75 / m).sqrt();
        assert!((x1 as f64 / m - 0.25).abs() < 3.0 * sigma_p);
        assert!((y1 as f64 / m - 0.75).abs() < 3.0 * sigma_p);
    }

    #[test]
    fn maximal_coupling_dimension_mismatch() {
        let mut rng = RngStream::new(64, 0).rng();
        assert!(maximal_coupling_sample(&[1.0], &[0.5, 0.5], &mut rng).is_err());
    }

    #[test]
    fn isolated_spin_couples_at_step_one() {
        let g = free_spins(1);
        let run =
            run_monotone_coupling_ising(&g, &CouplingConfig::sequential(), RngStream::new(65, 0))
                .unwrap();
        assert_eq!(run.coupling_time, 1);
        assert!(!run.censored);
    }

    #[test]
    fn chains_stay_equal_past_coupling() {
        let g = build_random_ising(20, 3, 0.2, &[], &mut RngStream::new(66, 0).rng()).unwrap();
        let config = CouplingConfig {
            verify_past_coupling: 100,
            ..CouplingConfig::sequential()
        };
        // the run panics internally if the chains diverge after T_c
        let run = run_monotone_coupling_ising(&g, &config, RngStream::new(66, 1)).unwrap();
        assert!(run.coupling_time > 0);
    }

    #[test]
    fn negative_coupling_is_rejected() {
        let g = single_edge_ising(-0.3);
        assert!(matches!(
            run_monotone_coupling_ising(&g, &CouplingConfig::sequential(), RngStream::new(67, 0)),
            Err(Error::NonFerromagnetic(_))
        ));
    }

    #[test]
    fn censoring_records_the_cap() {
        let g = build_random_ising(30, 3, 0.2, &[], &mut RngStream::new(68, 0).rng()).unwrap();
        let config = CouplingConfig {
            max_steps: 5,
            ..CouplingConfig::sequential()
        };
        let run = run_monotone_coupling_ising(&g, &config, RngStream::new(68, 1)).unwrap();
        assert!(run.censored);
        assert_eq!(run.coupling_time, 5);
    }

    fn fake_runs(times: &[u64]) -> Vec<CouplingRun> {
        times
            .iter()
            .enumerate()
            .map(|(k, &t)| CouplingRun {
                coupling_time: t,
                censored: false,
                trial: k as u64,
                delay_model: "zero".into(),
                stream: RngStream::new(0, k as u64),
            })
            .collect()
    }

    #[test]
    fn estimate_on_identical_runs_returns_the_common_time() {
        let runs = fake_runs(&[42; 200]);
        for eps in [0.1, 0.25, 0.5] {
            assert_eq!(estimate_mixing_time(&runs, eps).unwrap().t_hat, 42);
        }
    }

    #[test]
    fn estimate_quantile_on_1_to_100() {
        let times: Vec<u64> = (1..=100).collect();
        let est = estimate_mixing_time(&fake_runs(&times), 0.25).unwrap();
        assert_eq!(est.t_hat, 75);
        assert!(est.band.0 < 75 && est.band.1 > 75);
    }

    #[test]
    fn estimate_is_shift_equivariant_and_monotone_in_epsilon() {
        let times: Vec<u64> = (0..500).map(|k| (k * k % 9973) as u64).collect();
        let base = estimate_mixing_time(&fake_runs(&times), 0.25).unwrap().t_hat;
        let shifted: Vec<u64> = times.iter().map(|t| t + 17).collect();
        let shifted_hat = estimate_mixing_time(&fake_runs(&shifted), 0.25).unwrap().t_hat;
        assert_eq!(shifted_hat, base + 17);

        let mut prev = u64::MAX;
        for eps in [0.05, 0.1, 0.25, 0.5, 0.9] {
            let t = estimate_mixing_time(&fake_runs(&times), eps).unwrap().t_hat;
            assert!(t <= prev);
            prev = t;
        }
    }

    #[test]
    fn estimate_rejects_too_few_trials() {
        let runs = fake_runs(&[1; 50]);
        assert!(matches!(
            estimate_mixing_time(&runs, 0.25),
            Err(Error::InsufficientTrials { .. })
        ));
    }

    #[test]
    fn alpha_bound_matches_closed_form_on_regular_graph() {
        let g = build_random_ising(40, 3, 0.2, &[], &mut RngStream::new(69, 0).rng()).unwrap();
        let a = ising_alpha_bound(&g);
        assert!((a - ising_influence_bound(3, 0.2)).abs() < 1e-12);
    }

    #[test]
    fn sweep_single_zero_point_anchors_theory_exactly() {
        let g = build_random_ising(16, 3, 0.15, &[], &mut RngStream::new(70, 0).rng()).unwrap();
        let rows = tau_sweep(&g, &[0.0], 8, 120, 0.25, RngStream::new(70, 1), 1_000_000).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].theory_prediction, rows[0].t_hat as f64);
        assert_eq!(rows[0].censored_count, 0);
    }

    #[test]
    fn coupon_collector_coupling_time_at_beta_zero() {
        // with no couplings a variable equalizes exactly when first
        // sampled, so T_c is a coupon-collector completion time
        let n = 50;
        let g = free_spins(n);
        let trials = 1000;
        let mean: f64 = (0..trials)
            .map(|k| {
                run_monotone_coupling_ising(
                    &g,
                    &CouplingConfig::sequential(),
                    RngStream::new(71, k),
                )
                .unwrap()
                .coupling_time as f64
            })
            .sum::<f64>()
            / trials as f64;
        let harmonic: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
        let expect = n as f64 * harmonic;
        assert!(
            (mean - expect).abs() / expect < 0.05,
            "mean {mean} vs n*H_n = {expect}"
        );
    }
}

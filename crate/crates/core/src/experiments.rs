//! Reusable experiment drivers: the two-variable bias study with its exact
//! extended-chain oracle, the slow-mixing two-bank separation study (with a
//! sum-tracking engine that keeps full-size banks cheap), and the
//! shared-state vs multi-model throughput comparison.

use rand::Rng;
use rayon::prelude::*;

use crate::delay::DelayModel;
use crate::dist::{sparse_variation_distance, tv_distance, JointTable};
use crate::error::{Error, Result};
use crate::graph::{normalize_energies, spin, FactorGraph, State, Value};
use crate::rng::RngStream;
use crate::sampler::{run_hogwild_parallel, run_hogwild_simulated, run_multimodel, run_sequential, sample_categorical};
use crate::sink::{EmpiricalDistribution, SampleSink};

/// Exact stationary distribution of the simulated asynchronous sampler on
/// a two-variable model under i.i.d. Bernoulli(rho) one-step delays,
/// computed on the extended chain over (current, previous) state pairs and
/// projected back to the current state.
pub fn extended_chain_oracle(graph: &FactorGraph, rho: f64) -> Result<JointTable> {
    if graph.n() != 2 {
        return Err(Error::ConfigError(
            "extended-chain oracle supports two-variable models".into(),
        ));
    }
    let d0 = graph.domain_size(0) as usize;
    let d1 = graph.domain_size(1) as usize;
    let joint = d0 * d1;
    if joint > 16 {
        return Err(Error::ConfigError(
            "extended-chain oracle supports up to 16 joint states".into(),
        ));
    }
    let size = joint * joint; // (current, previous)
    let decompose = |c: usize| -> [Value; 2] { [(c / d1) as Value, (c % d1) as Value] };
    let mut transition = vec![0.0f64; size * size];
    let mut cond = Vec::new();
    for cur in 0..joint {
        for prev in 0..joint {
            let row = cur * joint + prev;
            let cur_v = decompose(cur);
            let prev_v = decompose(prev);
            for i in 0..2usize {
                let j = 1 - i;
                for (delay, p_delay) in [(0usize, 1.0 - rho), (1, rho)] {
                    let v_j = if delay == 0 { cur_v[j] } else { prev_v[j] };
                    graph.conditional_into(|v| if v == j { v_j } else { 0 }, i, &mut cond);
                    for (z, &pz) in cond.iter().enumerate() {
                        let mut next = cur_v;
                        next[i] = z as Value;
                        let next_cur = next[0] as usize * d1 + next[1] as usize;
                        transition[row * size + next_cur * joint + cur] += 0.5 * p_delay * pz;
                    }
                }
            }
        }
    }
    // power iteration to the stationary distribution
    let mut pi = vec![1.0 / size as f64; size];
    let mut next = vec![0.0f64; size];
    for _ in 0..1_000_000 {
        for x in next.iter_mut() {
            *x = 0.0;
        }
        for (s, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let row = &transition[s * size..(s + 1) * size];
            for (t, &p) in row.iter().enumerate() {
                next[t] += mass * p;
            }
        }
        let delta: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if delta < 1e-15 {
            break;
        }
    }
    let mut probs = vec![0.0f64; joint];
    for (s, &mass) in pi.iter().enumerate() {
        probs[s / joint] += mass;
    }
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(JointTable {
        ids: vec![0, 1],
        domain_sizes: vec![d0 as u32, d1 as u32],
        probs,
    })
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BiasConfig {
    pub steps: u64,
    pub burn_in: u64,
    /// Recording stride; > 1 decorrelates successive samples so i.i.d.
    /// statistical bands apply to the histograms.
    pub stride: u64,
    /// Bernoulli delay probability of the simulated asynchronous run.
    pub rho: f64,
    pub stream: RngStream,
}

impl Default for BiasConfig {
    fn default() -> Self {
        Self {
            steps: 1_000_000,
            burn_in: 1000,
            stride: 1,
            rho: 0.5,
            stream: RngStream::new(0, 0),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BiasOutput {
    pub exact: JointTable,
    pub oracle: JointTable,
    pub sequential: EmpiricalDistribution,
    pub hogwild: EmpiricalDistribution,
    pub tv_sequential: f64,
    pub sv1_sequential: f64,
    pub tv_hogwild: f64,
    pub sv1_hogwild: f64,
}

/// Runs the two-variable bias study: a sequential chain and a simulated
/// asynchronous chain under Bernoulli(rho) one-step delays, with exact and
/// extended-chain reference distributions and their variation distances.
pub fn run_bias_experiment(cfg: &BiasConfig) -> Result<BiasOutput> {
    let graph = crate::models::build_bias_example();
    let initial = State::new(vec![1, 1]);
    let sink = SampleSink::joint_strided(cfg.burn_in, cfg.stride);
    let sequential = run_sequential(&graph, cfg.steps, &initial, cfg.stream, &sink)?
        .histogram()
        .clone();
    let hogwild = run_hogwild_simulated(
        &graph,
        cfg.steps,
        &initial,
        &DelayModel::iid_bernoulli(cfg.rho, 1),
        cfg.stream.substream(1),
        &sink,
    )?
    .histogram()
    .clone();
    let exact = graph.exact_distribution()?;
    let oracle = extended_chain_oracle(&graph, cfg.rho)?;
    let seq_table = sequential.to_table();
    let hog_table = hogwild.to_table();
    Ok(BiasOutput {
        tv_sequential: tv_distance(&seq_table, &exact)?,
        sv1_sequential: sparse_variation_distance(&seq_table, &exact, 1)?,
        tv_hogwild: tv_distance(&hog_table, &exact)?,
        sv1_hogwild: sparse_variation_distance(&hog_table, &exact, 1)?,
        exact,
        oracle,
        sequential,
        hogwild,
    })
}

/// Parameters of the slow-mixing two-bank model experiment.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BadmixConfig {
    /// Spins per bank (odd).
    pub n_bank: usize,
    pub beta: f64,
    pub m1: f64,
    pub m2: f64,
    pub trials: usize,
    pub total_updates: u64,
    pub checkpoint_every: u64,
}

impl Default for BadmixConfig {
    fn default() -> Self {
        // the race-induced pinning of the Y bank is exponential in n_bank
        // and washes out below roughly a thousand spins (measured: the
        // two-thread chain symmetrizes within ~10^4 updates at 201..801
        // spins, stays fully pinned at 2001); sum tracking makes the
        // large bank free anyway
        Self {
            n_bank: 2001,
            beta: 0.3,
            m1: 1e10,
            m2: 100.0,
            trials: 200,
            total_updates: 500_000,
            checkpoint_every: 2_500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BadmixMode {
    Sequential,
    TwoThread,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct BadmixSeriesPoint {
    pub updates: u64,
    /// Fraction of trials with positive Y magnetization at this point.
    pub p_y_positive: f64,
}

/// Sum-tracking sampler for the two-bank model: conditionals come from the
/// maintained bank magnetizations in O(1), reproducing the generic
/// samplers on this graph bit for bit (asserted in tests).
pub(crate) struct BadmixEngine {
    n_bank: usize,
    m1: f64,
    m2: f64,
    /// beta / n_bank, the low-branch coefficient.
    low: f64,
    values: Vec<Value>,
    sx: i64,
    sy: i64,
}

impl BadmixEngine {
    pub fn all_ones(n_bank: usize, beta: f64, m1: f64, m2: f64) -> Self {
        Self {
            n_bank,
            m1,
            m2,
            low: beta / n_bank as f64,
            values: vec![1; 2 * n_bank],
            sx: n_bank as i64,
            sy: n_bank as i64,
        }
    }

    #[cfg(test)]
    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn sy(&self) -> i64 {
        self.sy
    }

    /// Conditional of X variable `i` with the X magnetization taken from
    /// `sx_context` (current or a pre-race snapshot). Accumulation order
    /// matches the generic factor iteration: penalty factor, then gate.
    #[inline]
    fn cond_x(&self, i: usize, sx_context: i64) -> [f64; 2] {
        let s = sx_context - spin(self.values[i]);
        let mut acc = [0.0f64; 2];
        for (z, a) in acc.iter_mut().enumerate() {
            *a += -self.m1 * (s + spin(z as Value)).abs() as f64;
        }
        for (z, a) in acc.iter_mut().enumerate() {
            let gx = s + spin(z as Value);
            let g = if gx.abs() <= 1 { self.low } else { self.m2 };
            *a += g * (self.sy * self.sy) as f64;
        }
        normalize_energies(&mut acc);
        acc
    }

    /// Conditional of Y variable `j` (bank-local index) at the current
    /// state.
    #[inline]
    fn cond_y(&self, j: usize) -> [f64; 2] {
        let s = self.sy - spin(self.values[self.n_bank + j]);
        let g = if self.sx.abs() <= 1 { self.low } else { self.m2 };
        let mut acc = [0.0f64; 2];
        for (z, a) in acc.iter_mut().enumerate() {
            let gy = s + spin(z as Value);
            *a += g * (gy * gy) as f64;
        }
        normalize_energies(&mut acc);
        acc
    }

    #[inline]
    fn write_x(&mut self, i: usize, z: Value) {
        self.sx += spin(z) - spin(self.values[i]);
        self.values[i] = z;
    }

    #[inline]
    fn write_y(&mut self, j: usize, z: Value) {
        let idx = self.n_bank + j;
        self.sy += spin(z) - spin(self.values[idx]);
        self.values[idx] = z;
    }

    /// One uniform sequential update over both banks.
    pub fn sequential_step(&mut self, rng: &mut impl Rng) {
        let i = rng.gen_range(0..2 * self.n_bank);
        if i < self.n_bank {
            let probs = self.cond_x(i, self.sx);
            let z = sample_categorical(&probs, rng);
            self.write_x(i, z);
        } else {
            let j = i - self.n_bank;
            let probs = self.cond_y(j);
            let z = sample_categorical(&probs, rng);
            self.write_y(j, z);
        }
    }

    /// One two-thread macro-step: with probability 1/3 (when two updates
    /// still fit) two distinct X variables resampled from the same
    /// snapshot, else one synchronous Y update. Returns updates performed,
    /// calling `on_update` after each write.
    pub fn two_thread_macro<F: FnMut(&BadmixEngine)>(
        &mut self,
        rng: &mut impl Rng,
        remaining: u64,
        mut on_update: F,
    ) -> u64 {
        let can_race = remaining >= 2;
        let race = can_race && rng.gen::<f64>() < 1.0 / 3.0;
        if race {
            let a = rng.gen_range(0..self.n_bank);
            let mut b = rng.gen_range(0..self.n_bank - 1);
            if b >= a {
                b += 1;
            }
            let old_a = spin(self.values[a]);
            let probs = self.cond_x(a, self.sx);
            let za = sample_categorical(&probs, rng);
            self.write_x(a, za);
            on_update(self);
            // b reads the pre-race snapshot: undo a's contribution
            let sx_snapshot = self.sx - (spin(za) - old_a);
            let probs = self.cond_x(b, sx_snapshot);
            let zb = sample_categorical(&probs, rng);
            self.write_x(b, zb);
            on_update(self);
            2
        } else {
            let j = rng.gen_range(0..self.n_bank);
            let probs = self.cond_y(j);
            let z = sample_categorical(&probs, rng);
            self.write_y(j, z);
            on_update(self);
            1
        }
    }
}

/// Runs repeated chains on the two-bank model and reports the fraction of
/// trials with positive Y magnetization at each checkpoint. Trials run
/// concurrently with counter-mode streams.
pub fn run_badmix_series(
    cfg: &BadmixConfig,
    mode: BadmixMode,
    stream: RngStream,
) -> Result<Vec<BadmixSeriesPoint>> {
    if cfg.n_bank.is_multiple_of(2) || cfg.n_bank < 3 {
        return Err(Error::ConfigError(format!(
            "bank size must be odd and >= 3, got {}",
            cfg.n_bank
        )));
    }
    let n_points = (cfg.total_updates / cfg.checkpoint_every) as usize;
    if n_points == 0 {
        return Err(Error::ConfigError("no checkpoints in run budget".into()));
    }
    let positives: Vec<u64> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream.substream(1 + trial).rng();
            let mut engine = BadmixEngine::all_ones(cfg.n_bank, cfg.beta, cfg.m1, cfg.m2);
            let mut hits = vec![0u64; n_points];
            let mut step = 0u64;
            let record = |step: u64, engine: &BadmixEngine, hits: &mut [u64]| {
                if step.is_multiple_of(cfg.checkpoint_every) {
                    let k = (step / cfg.checkpoint_every) as usize - 1;
                    if k < hits.len() {
                        hits[k] += (engine.sy() > 0) as u64;
                    }
                }
            };
            match mode {
                BadmixMode::Sequential => {
                    while step < cfg.total_updates {
                        engine.sequential_step(&mut rng);
                        step += 1;
                        record(step, &engine, &mut hits);
                    }
                }
                BadmixMode::TwoThread => {
                    while step < cfg.total_updates {
                        engine.two_thread_macro(&mut rng, cfg.total_updates - step, |e| {
                            record(step + 1, e, &mut hits);
                            step += 1;
                        });
                    }
                }
            }
            hits
        })
        .reduce(
            || vec![0u64; n_points],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(positives
        .into_iter()
        .enumerate()
        .map(|(k, hits)| BadmixSeriesPoint {
            updates: (k as u64 + 1) * cfg.checkpoint_every,
            p_y_positive: hits as f64 / cfg.trials as f64,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ThroughputRow {
    pub workers: usize,
    pub hogwild_updates_per_sec: f64,
    pub multimodel_updates_per_sec: f64,
}

/// Wall-clock updates/second of the lock-free shared-state sampler vs
/// multi-model Gibbs at each worker count, on the same graph and budget.
/// Uses a single-variable marginal sink so recording cost stays O(1).
pub fn run_throughput(
    graph: &FactorGraph,
    worker_counts: &[usize],
    steps_per_point: u64,
    stream: RngStream,
) -> Result<Vec<ThroughputRow>> {
    let initial = State::zeros(graph.n());
    let sink = SampleSink::marginal(vec![0], 0);
    let mut rows = Vec::with_capacity(worker_counts.len());
    for (k, &workers) in worker_counts.iter().enumerate() {
        let hog = run_hogwild_parallel(
            graph,
            steps_per_point,
            &initial,
            workers,
            stream.substream(2 * k as u64),
            &sink,
        )?;
        let multi = run_multimodel(
            graph,
            steps_per_point,
            &initial,
            workers,
            stream.substream(2 * k as u64 + 1),
            &sink,
        )?;
        rows.push(ThroughputRow {
            workers,
            hogwild_updates_per_sec: hog.updates_per_second,
            multimodel_updates_per_sec: multi.updates_per_second,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::DelayModel;
    use crate::models::{build_badmix_model, build_bias_example};
    use crate::sink::SinkOutput;

    #[test]
    fn oracle_matches_exact_projection_for_bias_model() {
        let g = build_bias_example();
        let oracle = extended_chain_oracle(&g, 0.5).unwrap();
        // exact stationary projection: (1, 14, 14, 16)/45 up to the
        // forbidden-state residual
        let expect = [1.0 / 45.0, 14.0 / 45.0, 14.0 / 45.0, 16.0 / 45.0];
        for (p, e) in oracle.probs.iter().zip(expect) {
            assert!((p - e).abs() < 1e-9, "{p} vs {e}");
        }
    }

    #[test]
    fn oracle_with_zero_rho_recovers_pi() {
        let g = build_bias_example();
        let oracle = extended_chain_oracle(&g, 0.0).unwrap();
        let exact = g.exact_distribution().unwrap();
        for (p, e) in oracle.probs.iter().zip(&exact.probs) {
            assert!((p - e).abs() < 1e-10);
        }
    }

    #[test]
    fn badmix_engine_matches_generic_sequential_sampler() {
        let n_bank = 5;
        let graph = build_badmix_model(n_bank, 0.3, 50.0, 2.0).unwrap();
        let stream = RngStream::new(77, 0);
        let steps = 4000u64;
        let out = run_sequential(
            &graph,
            steps,
            &State::constant(2 * n_bank, 1),
            stream,
            &SampleSink::trace(1),
        )
        .unwrap();
        let trace = match out {
            SinkOutput::Trace(t) => t,
            _ => unreachable!(),
        };
        let mut engine = BadmixEngine::all_ones(n_bank, 0.3, 50.0, 2.0);
        let mut rng = stream.rng();
        for (k, expect) in trace.iter().enumerate() {
            engine.sequential_step(&mut rng);
            assert_eq!(engine.values(), &expect[..], "diverged at step {k}");
        }
    }

    #[test]
    fn badmix_engine_matches_generic_two_thread_sampler() {
        let n_bank = 5;
        let graph = build_badmix_model(n_bank, 0.3, 50.0, 2.0).unwrap();
        let stream = RngStream::new(78, 0);
        let steps = 4000u64;
        let out = run_hogwild_simulated(
            &graph,
            steps,
            &State::constant(2 * n_bank, 1),
            &DelayModel::two_thread_race(n_bank),
            stream,
            &SampleSink::trace(1),
        )
        .unwrap();
        let trace = match out {
            SinkOutput::Trace(t) => t,
            _ => unreachable!(),
        };
        let mut engine = BadmixEngine::all_ones(n_bank, 0.3, 50.0, 2.0);
        let mut rng = stream.rng();
        let mut collected: Vec<Vec<Value>> = Vec::new();
        let mut step = 0u64;
        while step < steps {
            let done = engine.two_thread_macro(&mut rng, steps - step, |e| {
                collected.push(e.values().to_vec());
            });
            step += done;
        }
        assert_eq!(collected.len(), trace.len());
        for (k, (got, expect)) in collected.iter().zip(&trace).enumerate() {
            assert_eq!(got, expect, "diverged at update {k}");
        }
    }

    #[test]
    fn badmix_series_shapes_and_determinism() {
        let cfg = BadmixConfig {
            n_bank: 11,
            trials: 8,
            total_updates: 4000,
            checkpoint_every: 500,
            m1: 1e10,
            ..BadmixConfig::default()
        };
        let a = run_badmix_series(&cfg, BadmixMode::Sequential, RngStream::new(79, 0)).unwrap();
        let b = run_badmix_series(&cfg, BadmixMode::Sequential, RngStream::new(79, 0)).unwrap();
        assert_eq!(a.len(), 8);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.p_y_positive, y.p_y_positive);
        }
        assert_eq!(a.last().unwrap().updates, 4000);
    }

    #[test]
    fn bias_experiment_smoke() {
        let cfg = BiasConfig {
            steps: 50_000,
            burn_in: 500,
            stride: 1,
            rho: 0.5,
            stream: RngStream::new(80, 0),
        };
        let out = run_bias_experiment(&cfg).unwrap();
        assert_eq!(out.sequential.total, 49_500);
        assert!(out.tv_hogwild > out.tv_sequential);
        assert!(out.sv1_hogwild < 0.05);
    }
}

//! Gibbs samplers: sequential, simulated-asynchronous under a pluggable
//! delay model, truly parallel lock-free over shared atomic state, and
//! multi-model (independent chains).

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::time::Instant;

use rand::Rng;

use crate::delay::{DelayKind, DelayModel};
use crate::error::{Error, Result};
use crate::graph::{FactorGraph, State, Value};
use crate::history::StateHistory;
use crate::rng::RngStream;
use crate::sink::{SampleSink, SinkOutput};

/// Draws an index from a normalized probability vector.
#[inline]
pub(crate) fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> Value {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k as Value;
        }
    }
    (probs.len() - 1) as Value
}

/// Runs `steps` single-variable updates of sequential Gibbs, choosing the
/// variable uniformly and resampling it from its conditional at the
/// current state. Deterministic given `(stream, initial)`.
pub fn run_sequential(
    graph: &FactorGraph,
    steps: u64,
    initial: &State,
    stream: RngStream,
    sink: &SampleSink,
) -> Result<SinkOutput> {
    debug_assert!(graph.state_is_valid(initial));
    let n = graph.n();
    let mut rng = stream.rng();
    let mut acc = sink.accumulator(graph)?;
    let mut state = initial.clone();
    let mut cond = Vec::new();
    for step in 0..steps {
        let i = rng.gen_range(0..n);
        graph.conditional_into(|v| state.values[v], i, &mut cond);
        state.values[i] = sample_categorical(&cond, &mut rng);
        acc.record(step, |v| state.values[v]);
    }
    Ok(acc.finish())
}

/// Simulated asynchronous Gibbs. At each write time the chosen variable is
/// resampled from its conditional at a stale view: each Markov-blanket
/// variable is read `delay` writes back, with the delay drawn from
/// `delay_model` independently of the variable choice and clamped to the
/// elapsed time. A zero-delay model reproduces `run_sequential`
/// bit-for-bit on the same stream.
///
/// A `TwoThreadRace` delay model switches to macro-steps: with probability
/// 1/3 two distinct race-bank variables are resampled from one shared
/// snapshot (two writes), otherwise one synchronous-bank variable is
/// resampled from fresh values. The 1/3 makes each bank receive half the
/// updates in expectation, matching the uniform sequential schedule.
pub fn run_hogwild_simulated(
    graph: &FactorGraph,
    steps: u64,
    initial: &State,
    delay_model: &DelayModel,
    stream: RngStream,
    sink: &SampleSink,
) -> Result<SinkOutput> {
    debug_assert!(graph.state_is_valid(initial));
    if let DelayKind::TwoThreadRace { race_vars } = delay_model.kind {
        return run_two_thread_race(graph, steps, initial, race_vars, stream, sink);
    }
    let n = graph.n();
    let mut rng = stream.rng();
    let mut acc = sink.accumulator(graph)?;
    let support = delay_model.support_max();
    let mut hist = StateHistory::new(initial, support);
    let mut cond = Vec::new();
    let mut stale: Vec<(usize, Value)> = Vec::new();
    for step in 0..steps {
        let i = rng.gen_range(0..n);
        let t = hist.t();
        stale.clear();
        for &j in graph.markov_blanket(i) {
            let d = delay_model.sample(&mut rng).min(t);
            debug_assert!(d <= support && d <= t);
            stale.push((j, hist.read(j, d)));
        }
        graph.conditional_into(
            |v| {
                for &(j, val) in &stale {
                    if j == v {
                        return val;
                    }
                }
                hist.current()[v]
            },
            i,
            &mut cond,
        );
        let z = sample_categorical(&cond, &mut rng);
        hist.write(i, z);
        let current = hist.current();
        acc.record(step, |v| current[v]);
    }
    Ok(acc.finish())
}

fn run_two_thread_race(
    graph: &FactorGraph,
    steps: u64,
    initial: &State,
    race_vars: usize,
    stream: RngStream,
    sink: &SampleSink,
) -> Result<SinkOutput> {
    let n = graph.n();
    if race_vars > n {
        return Err(Error::ConfigError(format!(
            "race bank of {race_vars} variables exceeds n = {n}"
        )));
    }
    let sync_vars = n - race_vars;
    let mut rng = stream.rng();
    let mut acc = sink.accumulator(graph)?;
    let mut state = initial.clone();
    let mut cond = Vec::new();
    let mut step = 0u64;
    while step < steps {
        let can_race = race_vars >= 2 && steps - step >= 2;
        let race = if sync_vars == 0 {
            can_race
        } else {
            can_race && rng.gen::<f64>() < 1.0 / 3.0
        };
        if race {
            let a = rng.gen_range(0..race_vars);
            let mut b = rng.gen_range(0..race_vars - 1);
            if b >= a {
                b += 1;
            }
            // both updates read the pre-macro-step snapshot; only a's old
            // value can differ from the live state when b is resampled
            let old_a = state.values[a];
            graph.conditional_into(|v| state.values[v], a, &mut cond);
            state.values[a] = sample_categorical(&cond, &mut rng);
            acc.record(step, |v| state.values[v]);
            step += 1;
            graph.conditional_into(
                |v| if v == a { old_a } else { state.values[v] },
                b,
                &mut cond,
            );
            state.values[b] = sample_categorical(&cond, &mut rng);
            acc.record(step, |v| state.values[v]);
            step += 1;
        } else {
            let i = if sync_vars > 0 {
                race_vars + rng.gen_range(0..sync_vars)
            } else {
                rng.gen_range(0..race_vars)
            };
            graph.conditional_into(|v| state.values[v], i, &mut cond);
            state.values[i] = sample_categorical(&cond, &mut rng);
            acc.record(step, |v| state.values[v]);
            step += 1;
        }
    }
    Ok(acc.finish())
}

/// Outcome of a multi-worker run.
#[derive(Debug, Clone)]
pub struct ParallelRun {
    pub output: SinkOutput,
    pub updates_per_second: f64,
    pub total_updates: u64,
    /// State words allocated across workers: n for the shared-state
    /// sampler, workers * n for multi-model.
    pub state_words_allocated: u64,
}

/// Lock-free parallel Gibbs: `workers` threads share one state array with
/// per-slot atomic reads and writes and no cross-variable snapshot. Each
/// worker repeatedly picks a uniform variable, reads its Markov blanket
/// from the live array, resamples and writes, until the global update
/// counter reaches `total_steps`. Output is nondeterministic by design;
/// only statistical assertions apply (except with one worker, which has
/// no races and reproduces the sequential sampler on the same stream).
pub fn run_hogwild_parallel(
    graph: &FactorGraph,
    total_steps: u64,
    initial: &State,
    workers: usize,
    stream: RngStream,
    sink: &SampleSink,
) -> Result<ParallelRun> {
    if workers < 1 {
        return Err(Error::ConfigError("workers must be >= 1".into()));
    }
    debug_assert!(graph.state_is_valid(initial));
    let n = graph.n();
    let shared: Vec<AtomicU32> = initial.values.iter().map(|&v| AtomicU32::new(v)).collect();
    let counter = AtomicU64::new(0);
    // workers claim update tickets in blocks; a per-update fetch_add would
    // bounce the counter's cache line and serialize the hot path
    let block = 256u64.min(total_steps.max(1));
    let start = Instant::now();
    let accs = std::thread::scope(|scope| -> Result<Vec<crate::sink::SinkAccum>> {
        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers {
            let shared = &shared;
            let counter = &counter;
            let mut acc = sink.accumulator(graph)?;
            handles.push(scope.spawn(move || {
                let mut rng = stream.substream(w as u64).rng();
                let mut cond = Vec::new();
                loop {
                    let first = counter.fetch_add(block, Ordering::Relaxed);
                    if first >= total_steps {
                        break;
                    }
                    for ticket in first..(first + block).min(total_steps) {
                        let i = rng.gen_range(0..n);
                        graph.conditional_into(
                            |v| shared[v].load(Ordering::Relaxed),
                            i,
                            &mut cond,
                        );
                        let z = sample_categorical(&cond, &mut rng);
                        shared[i].store(z, Ordering::Relaxed);
                        acc.record(ticket, |v| shared[v].load(Ordering::Relaxed));
                    }
                }
                acc
            }));
        }
        Ok(handles.into_iter().map(|h| h.join().unwrap()).collect())
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut merged = accs.into_iter();
    let mut first = merged.next().unwrap();
    for acc in merged {
        first.merge(acc);
    }
    Ok(ParallelRun {
        output: first.finish(),
        updates_per_second: total_steps as f64 / elapsed.max(1e-12),
        total_updates: total_steps,
        state_words_allocated: n as u64,
    })
}

/// Multi-model Gibbs: each worker owns a private state copy and runs an
/// independent sequential chain; sinks are merged. Burn-in applies per
/// worker chain. Memory grows linearly in the worker count.
pub fn run_multimodel(
    graph: &FactorGraph,
    total_steps: u64,
    initial: &State,
    workers: usize,
    stream: RngStream,
    sink: &SampleSink,
) -> Result<ParallelRun> {
    if workers < 1 {
        return Err(Error::ConfigError("workers must be >= 1".into()));
    }
    debug_assert!(graph.state_is_valid(initial));
    let n = graph.n();
    let base = total_steps / workers as u64;
    let remainder = total_steps % workers as u64;
    let start = Instant::now();
    let accs = std::thread::scope(|scope| -> Result<Vec<crate::sink::SinkAccum>> {
        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers {
            let steps_w = base + if (w as u64) < remainder { 1 } else { 0 };
            let acc = sink.accumulator(graph)?;
            let mut state = initial.clone();
            handles.push(scope.spawn(move || {
                let mut acc = acc;
                let mut rng = stream.substream(w as u64).rng();
                let mut cond = Vec::new();
                for step in 0..steps_w {
                    let i = rng.gen_range(0..n);
                    graph.conditional_into(|v| state.values[v], i, &mut cond);
                    state.values[i] = sample_categorical(&cond, &mut rng);
                    acc.record(step, |v| state.values[v]);
                }
                acc
            }));
        }
        Ok(handles.into_iter().map(|h| h.join().unwrap()).collect())
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut merged = accs.into_iter();
    let mut first = merged.next().unwrap();
    for acc in merged {
        first.merge(acc);
    }
    Ok(ParallelRun {
        output: first.finish(),
        updates_per_second: total_steps as f64 / elapsed.max(1e-12),
        total_updates: total_steps,
        state_words_allocated: (workers * n) as u64,
    })
}

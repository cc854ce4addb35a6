use crate::dist::JointTable;
use crate::error::{Error, Result};
use crate::graph::{spin, FactorGraph, Value};

/// Counted samples over joint states or a low-order marginal, convertible
/// to probability estimates.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EmpiricalDistribution {
    pub ids: Vec<usize>,
    pub domain_sizes: Vec<u32>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl EmpiricalDistribution {
    pub fn to_table(&self) -> JointTable {
        let t = self.total.max(1) as f64;
        JointTable {
            ids: self.ids.clone(),
            domain_sizes: self.domain_sizes.clone(),
            probs: self.counts.iter().map(|&c| c as f64 / t).collect(),
        }
    }

    /// Marginal counts over `subset`; the total is preserved exactly.
    pub fn marginal_counts(&self, subset: &[usize]) -> EmpiricalDistribution {
        let axes: Vec<usize> = subset
            .iter()
            .map(|id| self.ids.iter().position(|x| x == id).expect("unknown id"))
            .collect();
        let out_domains: Vec<u32> = axes.iter().map(|&a| self.domain_sizes[a]).collect();
        let out_len: usize = out_domains.iter().map(|&d| d as usize).product();
        let mut counts = vec![0u64; out_len];
        let n = self.ids.len();
        let mut values = vec![0u32; n];
        for (idx, &c) in self.counts.iter().enumerate() {
            let mut rem = idx;
            for k in (0..n).rev() {
                let d = self.domain_sizes[k] as usize;
                values[k] = (rem % d) as u32;
                rem /= d;
            }
            let mut oi = 0usize;
            for (&a, &d) in axes.iter().zip(&out_domains) {
                oi = oi * d as usize + values[a] as usize;
            }
            counts[oi] += c;
        }
        EmpiricalDistribution {
            ids: subset.to_vec(),
            domain_sizes: out_domains,
            counts,
            total: self.total,
        }
    }
}

/// Named state predicate for event counting; serializable so experiment
/// configs can reference it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventSpec {
    /// Spin-sum over the listed variables (stored {0,1} mapped to -1/+1)
    /// is strictly positive.
    SpinSumPositive { ids: Vec<usize> },
    /// Variable `id` currently holds `value`.
    ValueEquals { id: usize, value: Value },
}

impl EventSpec {
    pub fn holds<R: Fn(usize) -> Value>(&self, read: R) -> bool {
        match self {
            EventSpec::SpinSumPositive { ids } => {
                ids.iter().map(|&i| spin(read(i))).sum::<i64>() > 0
            }
            EventSpec::ValueEquals { id, value } => read(*id) == *value,
        }
    }
}

/// What a sampler records.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SinkMode {
    /// Exact histogram over all joint states (product space must fit the
    /// enumeration cap).
    JointHistogram,
    /// Histogram over one variable subset.
    MarginalAccumulator { subset: Vec<usize> },
    /// Count of post-update states satisfying a predicate.
    EventCounter { event: EventSpec },
    /// Every stride-th post-update state, verbatim.
    ThinnedTrace { stride: u64 },
}

/// Recording plan: mode plus burn-in and stride. The first `burn_in`
/// updates are discarded; of the rest, every `stride`-th state is counted,
/// so with stride 1 the total count is exactly `steps - burn_in`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SampleSink {
    pub mode: SinkMode,
    pub burn_in: u64,
    pub stride: u64,
}

impl SampleSink {
    pub fn joint(burn_in: u64) -> Self {
        Self {
            mode: SinkMode::JointHistogram,
            burn_in,
            stride: 1,
        }
    }

    pub fn joint_strided(burn_in: u64, stride: u64) -> Self {
        Self {
            mode: SinkMode::JointHistogram,
            burn_in,
            stride,
        }
    }

    pub fn marginal(subset: Vec<usize>, burn_in: u64) -> Self {
        Self {
            mode: SinkMode::MarginalAccumulator { subset },
            burn_in,
            stride: 1,
        }
    }

    pub fn events(event: EventSpec, burn_in: u64) -> Self {
        Self {
            mode: SinkMode::EventCounter { event },
            burn_in,
            stride: 1,
        }
    }

    pub fn trace(stride: u64) -> Self {
        Self {
            mode: SinkMode::ThinnedTrace { stride },
            burn_in: 0,
            stride: 1,
        }
    }

    /// Default burn-in for a run length: 10^3 or 1% of steps, whichever is
    /// larger (never more than half the run).
    pub fn default_burn_in(steps: u64) -> u64 {
        (1000).max(steps / 100).min(steps / 2)
    }

    pub(crate) fn accumulator(&self, graph: &FactorGraph) -> Result<SinkAccum> {
        let state = match &self.mode {
            SinkMode::JointHistogram => {
                let total = graph.joint_states();
                if total > crate::graph::DEFAULT_ENUM_CAP as u128 {
                    return Err(Error::ConfigError(format!(
                        "joint histogram over {total} states exceeds the cap; \
                         use a marginal or event sink"
                    )));
                }
                AccumState::Joint {
                    domains: graph.domains().to_vec(),
                    counts: vec![0; total as usize],
                }
            }
            SinkMode::MarginalAccumulator { subset } => {
                if subset.iter().any(|&v| v >= graph.n()) {
                    return Err(Error::ConfigError("marginal subset id out of range".into()));
                }
                let domains: Vec<u32> =
                    subset.iter().map(|&v| graph.domain_size(v)).collect();
                let len: usize = domains.iter().map(|&d| d as usize).product();
                AccumState::Marginal {
                    subset: subset.clone(),
                    domains,
                    counts: vec![0; len],
                }
            }
            SinkMode::EventCounter { event } => AccumState::Events {
                event: event.clone(),
                hits: 0,
            },
            SinkMode::ThinnedTrace { stride } => AccumState::Trace {
                n: graph.n(),
                trace_stride: (*stride).max(1),
                states: Vec::new(),
            },
        };
        Ok(SinkAccum {
            burn_in: self.burn_in,
            stride: self.stride.max(1),
            total: 0,
            state,
        })
    }
}

#[derive(Debug, Clone)]
enum AccumState {
    Joint {
        domains: Vec<u32>,
        counts: Vec<u64>,
    },
    Marginal {
        subset: Vec<usize>,
        domains: Vec<u32>,
        counts: Vec<u64>,
    },
    Events {
        event: EventSpec,
        hits: u64,
    },
    Trace {
        n: usize,
        trace_stride: u64,
        states: Vec<Vec<Value>>,
    },
}

/// Mutable recording state; one per worker, merged after the run.
#[derive(Debug, Clone)]
pub(crate) struct SinkAccum {
    burn_in: u64,
    stride: u64,
    total: u64,
    state: AccumState,
}

impl SinkAccum {
    /// Records the post-update state of write number `step` (0-based),
    /// reading only the variables its mode needs.
    #[inline]
    pub fn record<R: Fn(usize) -> Value>(&mut self, step: u64, read: R) {
        if step < self.burn_in || !(step - self.burn_in).is_multiple_of(self.stride) {
            return;
        }
        self.total += 1;
        match &mut self.state {
            AccumState::Joint { domains, counts } => {
                let mut idx = 0usize;
                for (v, d) in domains.iter().enumerate() {
                    idx = idx * *d as usize + read(v) as usize;
                }
                counts[idx] += 1;
            }
            AccumState::Marginal {
                subset,
                domains,
                counts,
            } => {
                let mut idx = 0usize;
                for (v, d) in subset.iter().zip(domains.iter()) {
                    idx = idx * *d as usize + read(*v) as usize;
                }
                counts[idx] += 1;
            }
            AccumState::Events { event, hits } => {
                if event.holds(read) {
                    *hits += 1;
                }
            }
            AccumState::Trace {
                n,
                trace_stride,
                states,
            } => {
                if (self.total - 1).is_multiple_of(*trace_stride) {
                    states.push((0..*n).map(read).collect());
                }
            }
        }
    }

    pub fn merge(&mut self, other: SinkAccum) {
        self.total += other.total;
        match (&mut self.state, other.state) {
            (AccumState::Joint { counts, .. }, AccumState::Joint { counts: o, .. })
            | (
                AccumState::Marginal { counts, .. },
                AccumState::Marginal { counts: o, .. },
            ) => {
                for (a, b) in counts.iter_mut().zip(o) {
                    *a += b;
                }
            }
            (AccumState::Events { hits, .. }, AccumState::Events { hits: o, .. }) => {
                *hits += o;
            }
            (AccumState::Trace { states, .. }, AccumState::Trace { states: o, .. }) => {
                states.extend(o);
            }
            _ => unreachable!("merging sinks of different modes"),
        }
    }

    pub fn finish(self) -> SinkOutput {
        match self.state {
            AccumState::Joint { domains, counts } => {
                SinkOutput::Histogram(EmpiricalDistribution {
                    ids: (0..domains.len()).collect(),
                    domain_sizes: domains,
                    counts,
                    total: self.total,
                })
            }
            AccumState::Marginal {
                subset,
                domains,
                counts,
            } => SinkOutput::Histogram(EmpiricalDistribution {
                ids: subset,
                domain_sizes: domains,
                counts,
                total: self.total,
            }),
            AccumState::Events { hits, .. } => SinkOutput::Events {
                hits,
                total: self.total,
            },
            AccumState::Trace { states, .. } => SinkOutput::Trace(states),
        }
    }
}

/// Result of a sampling run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SinkOutput {
    Histogram(EmpiricalDistribution),
    Events { hits: u64, total: u64 },
    Trace(Vec<Vec<Value>>),
}

impl SinkOutput {
    pub fn histogram(&self) -> &EmpiricalDistribution {
        match self {
            SinkOutput::Histogram(h) => h,
            other => panic!("expected histogram output, got {other:?}"),
        }
    }

    pub fn event_rate(&self) -> f64 {
        match self {
            SinkOutput::Events { hits, total } => *hits as f64 / (*total).max(1) as f64,
            other => panic!("expected event output, got {other:?}"),
        }
    }

    /// CSV serialization with columns `state_or_event,count,probability`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["state_or_event", "count", "probability"])?;
        match self {
            SinkOutput::Histogram(h) => {
                let t = h.total.max(1) as f64;
                let n = h.ids.len();
                let mut values = vec![0u32; n];
                for (idx, &c) in h.counts.iter().enumerate() {
                    let mut rem = idx;
                    for k in (0..n).rev() {
                        let d = h.domain_sizes[k] as usize;
                        values[k] = (rem % d) as u32;
                        rem /= d;
                    }
                    let label = format!(
                        "({})",
                        values
                            .iter()
                            .map(|v| v.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    );
                    wtr.write_record([label, c.to_string(), (c as f64 / t).to_string()])?;
                }
            }
            SinkOutput::Events { hits, total } => {
                wtr.write_record([
                    "event".to_string(),
                    hits.to_string(),
                    (*hits as f64 / (*total).max(1) as f64).to_string(),
                ])?;
            }
            SinkOutput::Trace(states) => {
                for (k, s) in states.iter().enumerate() {
                    let label = format!(
                        "({})",
                        s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
                    );
                    wtr.write_record([label, k.to_string(), String::new()])?;
                }
            }
        }
        wtr.flush()
    }
}

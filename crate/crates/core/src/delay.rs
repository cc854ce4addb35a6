use rand::Rng;
use rand_distr::weighted_alias::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::models::MaxEntDelaySpec;

/// Stochastic staleness law for simulated asynchronous execution: how many
/// writes old each cached value is allowed to be. Draws are i.i.d. across
/// (variable, time) for every samplable kind.
///
/// `TwoThreadRace` is not a per-read law; it switches the sampler into
/// alternating macro-steps where either two distinct variables of the race
/// bank are updated from one shared snapshot, or one variable of the
/// synchronous bank is updated with fresh reads. Its delays are bounded
/// by 1.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub enum DelayKind {
    Zero,
    Constant { k: u64 },
    /// Delay `k` with probability `rho`, else 0.
    IidBernoulli { rho: f64, k: u64 },
    MaxEnt(MaxEntDelaySpec),
    /// Variables `0..race_vars` race pairwise; the rest update synchronously.
    TwoThreadRace { race_vars: usize },
}

#[derive(Debug, Clone)]
pub struct DelayModel {
    pub kind: DelayKind,
    alias: Option<WeightedAliasIndex<f64>>,
}

impl serde::Serialize for DelayModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.kind.serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for DelayModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(DelayModel::new(DelayKind::deserialize(d)?))
    }
}

impl DelayModel {
    pub fn new(kind: DelayKind) -> Self {
        let alias = match &kind {
            DelayKind::MaxEnt(spec) => Some(
                WeightedAliasIndex::new(spec.pmf.clone())
                    .expect("maxent pmf is a valid weight vector"),
            ),
            _ => None,
        };
        Self { kind, alias }
    }

    pub fn zero() -> Self {
        Self::new(DelayKind::Zero)
    }

    pub fn constant(k: u64) -> Self {
        Self::new(DelayKind::Constant { k })
    }

    pub fn iid_bernoulli(rho: f64, k: u64) -> Self {
        assert!((0.0..=1.0).contains(&rho));
        Self::new(DelayKind::IidBernoulli { rho, k })
    }

    pub fn maxent(spec: MaxEntDelaySpec) -> Self {
        Self::new(DelayKind::MaxEnt(spec))
    }

    pub fn two_thread_race(race_vars: usize) -> Self {
        Self::new(DelayKind::TwoThreadRace { race_vars })
    }

    /// Largest delay this model can produce.
    pub fn support_max(&self) -> u64 {
        match &self.kind {
            DelayKind::Zero => 0,
            DelayKind::Constant { k } => *k,
            DelayKind::IidBernoulli { k, .. } => *k,
            DelayKind::MaxEnt(spec) => spec.support_max,
            DelayKind::TwoThreadRace { .. } => 1,
        }
    }

    /// Draws one staleness value. Never called for `TwoThreadRace`, whose
    /// schedule fixes the delays structurally.
    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        match &self.kind {
            DelayKind::Zero => 0,
            DelayKind::Constant { k } => *k,
            DelayKind::IidBernoulli { rho, k } => {
                if rng.gen::<f64>() < *rho {
                    *k
                } else {
                    0
                }
            }
            DelayKind::MaxEnt(_) => self.alias.as_ref().unwrap().sample(rng) as u64,
            DelayKind::TwoThreadRace { .. } => {
                unreachable!("two-thread race delays are structural, not sampled")
            }
        }
    }

    /// Whether sampling consumes randomness; zero/constant models must not,
    /// so a zero-delay run stays bit-identical to the sequential sampler.
    pub fn consumes_rng(&self) -> bool {
        matches!(
            self.kind,
            DelayKind::IidBernoulli { .. } | DelayKind::MaxEnt(_)
        )
    }

    /// Bound on the expected delay E[delay].
    pub fn reported_tau(&self) -> f64 {
        match &self.kind {
            DelayKind::Zero => 0.0,
            DelayKind::Constant { k } => *k as f64,
            DelayKind::IidBernoulli { rho, k } => rho * *k as f64,
            DelayKind::MaxEnt(spec) => spec.reported_tau,
            DelayKind::TwoThreadRace { .. } => 0.5,
        }
    }

    /// Exponential-moment bound: the tau* with
    /// `E[exp(delay/n)] = 1 + tau*/n` for the given chain size.
    pub fn reported_tau_star(&self, n: u64) -> f64 {
        let nf = n as f64;
        match &self.kind {
            DelayKind::Zero => 0.0,
            DelayKind::Constant { k } => nf * ((*k as f64 / nf).exp() - 1.0),
            DelayKind::IidBernoulli { rho, k } => nf * rho * ((*k as f64 / nf).exp() - 1.0),
            DelayKind::MaxEnt(spec) => {
                debug_assert_eq!(spec.n, n);
                spec.target_tau_star
            }
            DelayKind::TwoThreadRace { .. } => nf * ((1.0 / nf).exp() - 1.0),
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            DelayKind::Zero => "zero".into(),
            DelayKind::Constant { k } => format!("constant({k})"),
            DelayKind::IidBernoulli { rho, k } => format!("iid-bernoulli(rho={rho}, k={k})"),
            DelayKind::MaxEnt(spec) => format!(
                "maxent(tau*={}, support={}, n={})",
                spec.target_tau_star, spec.support_max, spec.n
            ),
            DelayKind::TwoThreadRace { race_vars } => {
                format!("two-thread-pattern(race_vars={race_vars})")
            }
        }
    }
}

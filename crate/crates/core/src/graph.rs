use crate::dist::JointTable;
use crate::error::{Error, Result};

/// Stored value of one variable. Values are `0..domain_size`; spin models
/// map a stored `v` to the spin `2v - 1`.
pub type Value = u32;

/// Joint-state enumeration cap for the exact oracle.
pub const DEFAULT_ENUM_CAP: u64 = 1 << 24;

/// A discrete variable: dense id and finite domain of size >= 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct VariableSpec {
    pub id: usize,
    pub domain_size: u32,
}

/// An assignment of values to all variables of a graph.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct State {
    pub values: Vec<Value>,
}

impl State {
    pub fn new(values: Vec<Value>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0; n] }
    }

    pub fn constant(n: usize, v: Value) -> Self {
        Self { values: vec![v; n] }
    }
}

pub fn spin(v: Value) -> i64 {
    2 * v as i64 - 1
}

/// Energy function of one factor over its scope, in nats.
///
/// `Table` holds a dense energy table in row-major order with the **last**
/// scope variable varying fastest. The remaining kinds are evaluation
/// callbacks, serializable by name in the model file format; they make
/// large-scope energies (whole spin banks) representable without tables.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum FactorKind {
    Table(Vec<f64>),
    /// `beta * sigma(x) * sigma(y)` over a two-variable scope.
    IsingEdge { beta: f64 },
    /// `field * sigma(x)` over a one-variable scope.
    IsingPrior { field: f64 },
    /// `-weight * |sum of spins over the scope|`.
    MagnetizationPenalty { weight: f64 },
    /// Scope is an even split `[x-bank..., y-bank...]`; energy is
    /// `g * (sum of y spins)^2` where `g = low` when `|sum of x spins| <= 1`
    /// and `g = high` otherwise.
    GatedSquare { low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Factor {
    pub scope: Vec<usize>,
    pub kind: FactorKind,
}

impl Factor {
    pub fn table(scope: Vec<usize>, table: Vec<f64>) -> Self {
        Self {
            scope,
            kind: FactorKind::Table(table),
        }
    }

    /// Energy at the assignment supplied by `read`, which must cover the
    /// whole scope.
    pub fn energy<R: Fn(usize) -> Value>(&self, domains: &[u32], read: R) -> f64 {
        match &self.kind {
            FactorKind::Table(t) => {
                let mut idx = 0usize;
                for &v in &self.scope {
                    idx = idx * domains[v] as usize + read(v) as usize;
                }
                t[idx]
            }
            FactorKind::IsingEdge { beta } => {
                beta * (spin(read(self.scope[0])) * spin(read(self.scope[1]))) as f64
            }
            FactorKind::IsingPrior { field } => field * spin(read(self.scope[0])) as f64,
            FactorKind::MagnetizationPenalty { weight } => {
                let s: i64 = self.scope.iter().map(|&v| spin(read(v))).sum();
                -weight * s.abs() as f64
            }
            FactorKind::GatedSquare { low, high } => {
                let half = self.scope.len() / 2;
                let sx: i64 = self.scope[..half].iter().map(|&v| spin(read(v))).sum();
                let sy: i64 = self.scope[half..].iter().map(|&v| spin(read(v))).sum();
                let g = if sx.abs() <= 1 { *low } else { *high };
                g * (sy * sy) as f64
            }
        }
    }

    /// Adds this factor's energy to `acc[z]` for every candidate value `z`
    /// of the scope variable at position `pos`, with all other scope
    /// variables read from `read`. One pass over the scope, O(1) per
    /// candidate afterwards.
    fn accumulate_conditional<R: Fn(usize) -> Value>(
        &self,
        domains: &[u32],
        read: &R,
        pos: usize,
        acc: &mut [f64],
    ) {
        match &self.kind {
            FactorKind::Table(t) => {
                let mut base = 0usize;
                let mut var_stride = 0usize;
                let mut stride = 1usize;
                for (k, &v) in self.scope.iter().enumerate().rev() {
                    if k == pos {
                        var_stride = stride;
                    } else {
                        base += stride * read(v) as usize;
                    }
                    stride *= domains[v] as usize;
                }
                for (z, a) in acc.iter_mut().enumerate() {
                    *a += t[base + z * var_stride];
                }
            }
            FactorKind::IsingEdge { beta } => {
                let other = self.scope[1 - pos];
                let s = spin(read(other)) as f64;
                acc[0] += -beta * s;
                acc[1] += beta * s;
            }
            FactorKind::IsingPrior { field } => {
                acc[0] += -field;
                acc[1] += field;
            }
            FactorKind::MagnetizationPenalty { weight } => {
                let mut s: i64 = 0;
                for (k, &v) in self.scope.iter().enumerate() {
                    if k != pos {
                        s += spin(read(v));
                    }
                }
                for (z, a) in acc.iter_mut().enumerate() {
                    *a += -weight * (s + spin(z as Value)).abs() as f64;
                }
            }
            FactorKind::GatedSquare { low, high } => {
                let half = self.scope.len() / 2;
                let mut sx: i64 = 0;
                let mut sy: i64 = 0;
                for (k, &v) in self.scope.iter().enumerate() {
                    if k == pos {
                        continue;
                    }
                    if k < half {
                        sx += spin(read(v));
                    } else {
                        sy += spin(read(v));
                    }
                }
                for (z, a) in acc.iter_mut().enumerate() {
                    let (gx, gy) = if pos < half {
                        (sx + spin(z as Value), sy)
                    } else {
                        (sx, sy + spin(z as Value))
                    };
                    let g = if gx.abs() <= 1 { *low } else { *high };
                    *a += g * (gy * gy) as f64;
                }
            }
        }
    }
}

/// An immutable discrete factor graph defining pi(x) proportional to
/// exp(sum of factor energies). Finite energies keep pi strictly positive.
/// Safe to share by reference across concurrent workers.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    domains: Vec<u32>,
    factors: Vec<Factor>,
    /// Factor indices touching each variable.
    var_factors: Vec<Vec<u32>>,
    /// Markov blanket of each variable: union of scopes of factors
    /// containing it, minus the variable itself. Sorted.
    blankets: Vec<Vec<usize>>,
}

impl FactorGraph {
    pub fn new(variables: Vec<VariableSpec>, factors: Vec<Factor>) -> Result<Self> {
        let n = variables.len();
        let mut domains = vec![0u32; n];
        for (k, v) in variables.iter().enumerate() {
            if v.id != k {
                return Err(Error::ConfigError(format!(
                    "variable ids must be dense 0..n, got id {} at position {}",
                    v.id, k
                )));
            }
            if v.domain_size < 2 {
                return Err(Error::ConfigError(format!(
                    "variable {} has domain_size {} < 2",
                    v.id, v.domain_size
                )));
            }
            domains[k] = v.domain_size;
        }
        for (fi, f) in factors.iter().enumerate() {
            let mut seen = f.scope.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != f.scope.len() {
                return Err(Error::ConfigError(format!(
                    "factor {fi} has repeated scope variables"
                )));
            }
            if f.scope.iter().any(|&v| v >= n) {
                return Err(Error::ConfigError(format!(
                    "factor {fi} references a variable outside 0..{n}"
                )));
            }
            match &f.kind {
                FactorKind::Table(t) => {
                    let want: usize = f.scope.iter().map(|&v| domains[v] as usize).product();
                    if t.len() != want {
                        return Err(Error::ConfigError(format!(
                            "factor {fi} table has {} entries, scope needs {want}",
                            t.len()
                        )));
                    }
                    if t.iter().any(|e| !e.is_finite()) {
                        return Err(Error::ConfigError(format!(
                            "factor {fi} has a non-finite energy entry"
                        )));
                    }
                }
                FactorKind::IsingEdge { beta } => {
                    if f.scope.len() != 2 || !beta.is_finite() {
                        return Err(Error::ConfigError(format!(
                            "factor {fi}: ising edge needs a 2-variable scope and finite beta"
                        )));
                    }
                }
                FactorKind::IsingPrior { field } => {
                    if f.scope.len() != 1 || !field.is_finite() {
                        return Err(Error::ConfigError(format!(
                            "factor {fi}: ising prior needs a 1-variable scope and finite field"
                        )));
                    }
                }
                FactorKind::MagnetizationPenalty { weight } => {
                    if !weight.is_finite() {
                        return Err(Error::ConfigError(format!(
                            "factor {fi}: non-finite penalty weight"
                        )));
                    }
                }
                FactorKind::GatedSquare { low, high } => {
                    if f.scope.len() % 2 != 0 {
                        return Err(Error::ConfigError(format!(
                            "factor {fi}: gated square needs an even scope split"
                        )));
                    }
                    if !low.is_finite() || !high.is_finite() {
                        return Err(Error::ConfigError(format!(
                            "factor {fi}: non-finite gated square coefficients"
                        )));
                    }
                }
            }
        }
        let mut var_factors = vec![Vec::new(); n];
        let mut blankets = vec![Vec::new(); n];
        for (fi, f) in factors.iter().enumerate() {
            for &v in &f.scope {
                var_factors[v].push(fi as u32);
                for &w in &f.scope {
                    if w != v {
                        blankets[v].push(w);
                    }
                }
            }
        }
        for b in &mut blankets {
            b.sort_unstable();
            b.dedup();
        }
        Ok(Self {
            domains,
            factors,
            var_factors,
            blankets,
        })
    }

    pub fn n(&self) -> usize {
        self.domains.len()
    }

    pub fn domain_size(&self, i: usize) -> u32 {
        self.domains[i]
    }

    pub fn domains(&self) -> &[u32] {
        &self.domains
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn markov_blanket(&self, i: usize) -> &[usize] {
        &self.blankets[i]
    }

    pub fn variables(&self) -> Vec<VariableSpec> {
        self.domains
            .iter()
            .enumerate()
            .map(|(id, &domain_size)| VariableSpec { id, domain_size })
            .collect()
    }

    /// Number of joint states, saturating at `u128` scale.
    pub fn joint_states(&self) -> u128 {
        self.domains
            .iter()
            .fold(1u128, |acc, &d| acc.saturating_mul(d as u128))
    }

    pub fn state_is_valid(&self, state: &State) -> bool {
        state.values.len() == self.n()
            && state
                .values
                .iter()
                .zip(&self.domains)
                .all(|(&v, &d)| v < d)
    }

    /// Log-unnormalized density: the sum of all factor energies at `state`.
    pub fn energy(&self, state: &State) -> f64 {
        debug_assert!(self.state_is_valid(state));
        self.factors
            .iter()
            .map(|f| f.energy(&self.domains, |v| state.values[v]))
            .sum()
    }

    /// Conditional distribution of variable `i` given the other variables
    /// as read through `read`. Only factors touching `i` are evaluated.
    /// Writes a normalized probability vector into `out`.
    pub fn conditional_into<R: Fn(usize) -> Value>(&self, read: R, i: usize, out: &mut Vec<f64>) {
        let d = self.domains[i] as usize;
        out.clear();
        out.resize(d, 0.0);
        for &fi in &self.var_factors[i] {
            let f = &self.factors[fi as usize];
            let pos = f.scope.iter().position(|&v| v == i).unwrap();
            f.accumulate_conditional(&self.domains, &read, pos, out);
        }
        normalize_energies(out);
    }

    /// Conditional distribution of variable `i` given the rest of `state`.
    pub fn conditional_distribution(&self, state: &State, i: usize) -> Vec<f64> {
        debug_assert!(self.state_is_valid(state) && i < self.n());
        let mut out = Vec::new();
        self.conditional_into(|v| state.values[v], i, &mut out);
        out
    }

    /// Exact distribution by brute-force enumeration, with the default cap.
    pub fn exact_distribution(&self) -> Result<ExactDistribution> {
        self.exact_distribution_capped(DEFAULT_ENUM_CAP)
    }

    /// Exact distribution with an explicit joint-state cap. Energies are
    /// max-subtracted before exponentiation so arbitrarily large penalty
    /// scales stay finite.
    pub fn exact_distribution_capped(&self, cap: u64) -> Result<ExactDistribution> {
        let total = self.joint_states();
        if total > cap as u128 {
            return Err(Error::StateSpaceTooLarge { actual: total, cap });
        }
        let total = total as usize;
        let n = self.n();
        let mut energies = Vec::with_capacity(total);
        let mut state = State::zeros(n);
        loop {
            energies.push(self.energy(&state));
            // mixed-radix increment, last variable fastest
            let mut k = n;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                state.values[k] += 1;
                if state.values[k] < self.domains[k] {
                    break;
                }
                state.values[k] = 0;
                if k == 0 {
                    // wrapped all the way around
                    break;
                }
            }
            if state.values.iter().all(|&v| v == 0) {
                break;
            }
        }
        debug_assert_eq!(energies.len(), total);
        normalize_energies(&mut energies);
        Ok(JointTable {
            ids: (0..n).collect(),
            domain_sizes: self.domains.clone(),
            probs: energies,
        })
    }
}

/// Explicit representation of pi over the full product space; entries sum
/// to 1 within 1e-12.
pub type ExactDistribution = JointTable;

/// In-place max-subtracted softmax: turns energies into probabilities.
pub fn normalize_energies(e: &mut [f64]) {
    let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in e.iter_mut() {
        *x = (*x - m).exp();
        sum += *x;
    }
    for x in e.iter_mut() {
        *x /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_bias_example, single_edge_ising};

    fn two_free_binary_vars() -> FactorGraph {
        FactorGraph::new(
            vec![
                VariableSpec { id: 0, domain_size: 2 },
                VariableSpec { id: 1, domain_size: 2 },
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn energy_of_zero_factor_graph_is_zero() {
        let g = two_free_binary_vars();
        assert_eq!(g.energy(&State::new(vec![0, 1])), 0.0);
    }

    #[test]
    fn energy_of_single_edge_ising() {
        let g = single_edge_ising(0.2);
        assert!((g.energy(&State::new(vec![1, 1])) - 0.2).abs() < 1e-15);
        assert!((g.energy(&State::new(vec![1, 0])) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn bias_example_forbidden_state_is_suppressed() {
        let g = build_bias_example();
        let exact = g.exact_distribution().unwrap();
        // near-forbidden state (0,0) carries probability <= 1e-9
        assert!(exact.probs[0] <= 1e-9);
        // its energy sits >= 20.7 nats below the others
        let e00 = g.energy(&State::new(vec![0, 0]));
        for s in [vec![0, 1], vec![1, 0], vec![1, 1]] {
            assert!(g.energy(&State::new(s)) - e00 >= 20.7);
        }
    }

    #[test]
    fn bias_example_conditionals() {
        let g = build_bias_example();
        // X2 = 1: either value of X1 equally likely
        let c = g.conditional_distribution(&State::new(vec![0, 1]), 0);
        assert!((c[0] - 0.5).abs() < 1e-12);
        assert!((c[1] - 0.5).abs() < 1e-12);
        // X2 = 0: X1 forced to 1 up to the soft-constraint residual
        let c = g.conditional_distribution(&State::new(vec![0, 0]), 0);
        assert!(c[0] <= 1e-9);
        assert!((c[0] + c[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_factor_conditional_is_uniform() {
        let g = two_free_binary_vars();
        let c = g.conditional_distribution(&State::new(vec![0, 1]), 1);
        assert_eq!(c, vec![0.5, 0.5]);
    }

    #[test]
    fn exact_distribution_bias_example() {
        let exact = build_bias_example().exact_distribution().unwrap();
        assert!(exact.probs[0] <= 1e-9);
        for k in 1..4 {
            assert!((exact.probs[k] - 1.0 / 3.0).abs() < 1e-9);
        }
        let sum: f64 = exact.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_distribution_zero_factors_is_uniform() {
        let exact = two_free_binary_vars().exact_distribution().unwrap();
        for p in &exact.probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_distribution_single_edge_ising() {
        let exact = single_edge_ising(0.2).exact_distribution().unwrap();
        let agree = (0.2f64).exp() / (2.0 * (0.2f64).exp() + 2.0 * (-0.2f64).exp());
        assert!((exact.probs[0] - agree).abs() < 1e-12); // (-1,-1)
        assert!((exact.probs[3] - agree).abs() < 1e-12); // (+1,+1)
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let vars = (0..30)
            .map(|id| VariableSpec { id, domain_size: 2 })
            .collect();
        let g = FactorGraph::new(vars, vec![]).unwrap();
        match g.exact_distribution() {
            Err(Error::StateSpaceTooLarge { .. }) => {}
            other => panic!("expected StateSpaceTooLarge, got {other:?}"),
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn conditional_matches_exact_distribution_on_random_models() {
        use rand::Rng;
        let mut rng = crate::rng::RngStream::new(7, 0).rng();
        for _ in 0..25 {
            let n = rng.gen_range(1..=3);
            let g = crate::models::random_small_model(n, &mut rng);
            let exact = g.exact_distribution().unwrap();
            // exhaustively compare blanket conditionals with conditionals
            // derived from the enumerated joint
            let mut state = State::zeros(n);
            'outer: loop {
                for i in 0..n {
                    let cond = g.conditional_distribution(&state, i);
                    let d = g.domain_size(i) as usize;
                    let mut joint = vec![0.0; d];
                    for z in 0..d {
                        let mut s = state.clone();
                        s.values[i] = z as Value;
                        joint[z] = exact.prob_of(&s.values);
                    }
                    let tot: f64 = joint.iter().sum();
                    for z in 0..d {
                        assert!((cond[z] - joint[z] / tot).abs() < 1e-10);
                    }
                    let sum: f64 = cond.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-12);
                    assert!(cond.iter().all(|&p| p >= 0.0));
                }
                let mut k = n;
                loop {
                    if k == 0 {
                        break 'outer;
                    }
                    k -= 1;
                    state.values[k] += 1;
                    if state.values[k] < g.domain_size(k) {
                        break;
                    }
                    state.values[k] = 0;
                    if k == 0 {
                        break 'outer;
                    }
                }
            }
        }
    }

    #[test]
    fn exact_distribution_invariant_under_energy_shift() {
        
        let mut rng = crate::rng::RngStream::new(8, 0).rng();
        let g = crate::models::random_small_model(3, &mut rng);
        let base = g.exact_distribution().unwrap();
        let mut factors = g.factors().to_vec();
        if let Some(f) = factors.first_mut() {
            if let FactorKind::Table(t) = &mut f.kind {
                for e in t.iter_mut() {
                    *e += 3.25;
                }
            }
        }
        let shifted = FactorGraph::new(g.variables(), factors)
            .unwrap()
            .exact_distribution()
            .unwrap();
        for (a, b) in base.probs.iter().zip(&shifted.probs) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

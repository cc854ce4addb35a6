//! Total influence of a distribution and Dobrushin's condition.

use crate::dist::tv_slice;
use crate::error::{Error, Result};
use crate::graph::{FactorGraph, State, Value};

/// Joint-state cap for exact influence enumeration.
pub const INFLUENCE_ENUM_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfluenceMethod {
    ExactEnumeration,
    IsingClosedForm,
}

/// Total influence alpha together with how it was obtained. When computed
/// by enumeration, `per_variable_rows[i][j]` is the worst-case TV change of
/// variable i's conditional when variable j flips; alpha is the maximum
/// row sum.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct InfluenceReport {
    pub alpha: f64,
    pub method: InfluenceMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_variable_rows: Option<Vec<Vec<f64>>>,
    pub dobrushin_satisfied: bool,
    pub n: usize,
    pub cap_used: u64,
}

/// Exact total influence by enumerating, for every ordered pair (i, j),
/// all assignments of the remaining variables and all value pairs at j.
pub fn total_influence_exact(graph: &FactorGraph) -> Result<InfluenceReport> {
    total_influence_exact_capped(graph, INFLUENCE_ENUM_CAP)
}

#[allow(clippy::needless_range_loop)]
pub fn total_influence_exact_capped(graph: &FactorGraph, cap: u64) -> Result<InfluenceReport> {
    let total = graph.joint_states();
    if total > cap as u128 {
        return Err(Error::StateSpaceTooLarge { actual: total, cap });
    }
    let n = graph.n();
    let mut rows = vec![vec![0.0f64; n]; n];
    let mut state = State::zeros(n);
    let mut cond_a: Vec<f64> = Vec::new();
    let mut cond_b: Vec<f64> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if j == i {
                // the pair (X, Y) differs only at j = i, and the conditional
                // of i never reads coordinate i, so this term is always 0
                continue;
            }
            let dj = graph.domain_size(j) as usize;
            let mut worst = 0.0f64;
            // enumerate assignments of all variables other than {i, j};
            // coordinate i is irrelevant to i's conditional and stays 0
            for v in state.values.iter_mut() {
                *v = 0;
            }
            'assignments: loop {
                for a in 0..dj {
                    for b in a + 1..dj {
                        state.values[j] = a as Value;
                        graph.conditional_into(|v| state.values[v], i, &mut cond_a);
                        state.values[j] = b as Value;
                        graph.conditional_into(|v| state.values[v], i, &mut cond_b);
                        worst = worst.max(tv_slice(&cond_a, &cond_b));
                    }
                }
                state.values[j] = 0;
                // mixed-radix increment over variables excluding i and j
                let mut k = n;
                loop {
                    if k == 0 {
                        break 'assignments;
                    }
                    k -= 1;
                    if k == i || k == j {
                        continue;
                    }
                    state.values[k] += 1;
                    if state.values[k] < graph.domain_size(k) {
                        break;
                    }
                    state.values[k] = 0;
                    if k == 0 {
                        break 'assignments;
                    }
                }
                if state.values.iter().all(|&v| v == 0) {
                    break;
                }
            }
            rows[i][j] = worst;
        }
    }
    let alpha = rows
        .iter()
        .map(|r| r.iter().sum::<f64>())
        .fold(0.0f64, f64::max);
    Ok(InfluenceReport {
        alpha,
        method: InfluenceMethod::ExactEnumeration,
        per_variable_rows: Some(rows),
        dobrushin_satisfied: alpha < 1.0,
        n,
        cap_used: cap,
    })
}

/// Closed-form influence bound for Ising models: `max_degree * tanh(beta)`.
pub fn ising_influence_bound(max_degree: usize, beta: f64) -> f64 {
    assert!(beta >= 0.0, "ising influence bound needs beta >= 0");
    max_degree as f64 * beta.tanh()
}

/// Report wrapper for the closed-form Ising bound.
pub fn ising_influence_report(n: usize, max_degree: usize, beta: f64) -> InfluenceReport {
    let alpha = ising_influence_bound(max_degree, beta);
    InfluenceReport {
        alpha,
        method: InfluenceMethod::IsingClosedForm,
        per_variable_rows: None,
        dobrushin_satisfied: alpha < 1.0,
        n,
        cap_used: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Factor, FactorGraph, FactorKind, VariableSpec};
    use crate::models::{build_bias_example, single_edge_ising};
    use rand::Rng;

    #[test]
    fn bias_example_influence_is_one_half() {
        let r = total_influence_exact(&build_bias_example()).unwrap();
        assert!((r.alpha - 0.5).abs() < 1e-6);
        assert!(r.dobrushin_satisfied);
        let rows = r.per_variable_rows.unwrap();
        assert!((rows[0][1] - 0.5).abs() < 1e-6);
        assert!((rows[1][0] - 0.5).abs() < 1e-6);
        assert_eq!(rows[0][0], 0.0);
    }

    #[test]
    fn zero_factor_graph_has_zero_influence() {
        let g = FactorGraph::new(
            vec![
                VariableSpec { id: 0, domain_size: 2 },
                VariableSpec { id: 1, domain_size: 3 },
            ],
            vec![],
        )
        .unwrap();
        let r = total_influence_exact(&g).unwrap();
        assert_eq!(r.alpha, 0.0);
    }

    #[test]
    fn single_edge_ising_influence_is_tanh_beta() {
        for beta in [0.1, 0.2, 0.5] {
            let r = total_influence_exact(&single_edge_ising(beta)).unwrap();
            assert!(
                (r.alpha - beta.tanh()).abs() < 1e-9,
                "beta {beta}: {} vs {}",
                r.alpha,
                beta.tanh()
            );
        }
    }

    #[test]
    fn ising_bound_values() {
        assert!((ising_influence_bound(3, 0.2) - 0.592125960674712).abs() < 1e-12);
        assert!(ising_influence_bound(3, 0.2) <= 0.6);
        assert_eq!(ising_influence_bound(0, 0.7), 0.0);
        assert_eq!(ising_influence_bound(5, 0.0), 0.0);
        assert!(ising_influence_bound(1, 20.0) > 0.999999);
    }

    #[test]
    fn influence_at_most_blanket_degree() {
        let mut rng = crate::rng::RngStream::new(31, 0).rng();
        for _ in 0..10 {
            let g = crate::models::random_small_model(3, &mut rng);
            let r = total_influence_exact(&g).unwrap();
            let max_deg = (0..g.n())
                .map(|i| g.markov_blanket(i).len())
                .max()
                .unwrap_or(0);
            assert!(r.alpha <= max_deg as f64 + 1e-12);
        }
    }

    #[test]
    fn random_ising_influence_below_tanh_sum() {
        let mut rng = crate::rng::RngStream::new(32, 0).rng();
        for _ in 0..10 {
            let n = rng.gen_range(2..=4usize);
            let mut factors = Vec::new();
            let mut incident = vec![0.0f64; n];
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(0.7) {
                        let beta = rng.gen_range(0.0..0.5);
                        factors.push(Factor {
                            scope: vec![u, v],
                            kind: FactorKind::IsingEdge { beta },
                        });
                        incident[u] += beta.tanh();
                        incident[v] += beta.tanh();
                    }
                }
            }
            let vars = (0..n)
                .map(|id| VariableSpec { id, domain_size: 2 })
                .collect();
            let g = FactorGraph::new(vars, factors).unwrap();
            let r = total_influence_exact(&g).unwrap();
            let bound = incident.iter().cloned().fold(0.0, f64::max);
            assert!(r.alpha <= bound + 1e-9, "{} > {}", r.alpha, bound);
        }
    }

    #[test]
    fn influence_invariant_under_energy_shift() {
        let g = build_bias_example();
        let a = total_influence_exact(&g).unwrap().alpha;
        let mut factors = g.factors().to_vec();
        if let FactorKind::Table(t) = &mut factors[0].kind {
            for e in t.iter_mut() {
                *e += 11.5;
            }
        }
        let shifted = FactorGraph::new(g.variables(), factors).unwrap();
        let b = total_influence_exact(&shifted).unwrap().alpha;
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn influence_increases_with_beta() {
        let mut last = -1.0;
        for beta in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let a = total_influence_exact(&single_edge_ising(beta)).unwrap().alpha;
            assert!(a > last);
            last = a;
        }
    }

    #[test]
    fn influence_cap_is_enforced() {
        let vars = (0..25)
            .map(|id| VariableSpec { id, domain_size: 2 })
            .collect();
        let g = FactorGraph::new(vars, vec![]).unwrap();
        assert!(matches!(
            total_influence_exact(&g),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }
}

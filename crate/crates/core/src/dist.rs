use crate::error::{Error, Result};
use crate::graph::Value;

/// Largest subset size `marginal` will enumerate.
pub const MAX_MARGINAL_VARS: usize = 16;
/// Largest variable count `sparse_variation_distance` will enumerate
/// subsets over.
pub const MAX_SPARSE_VARS: usize = 20;

/// A probability table over a product space of named variables, row-major
/// with the last axis varying fastest. Exact distributions, empirical
/// histograms and marginals all flow through this shape.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JointTable {
    pub ids: Vec<usize>,
    pub domain_sizes: Vec<u32>,
    pub probs: Vec<f64>,
}

impl JointTable {
    pub fn index_of(&self, values: &[Value]) -> usize {
        debug_assert_eq!(values.len(), self.ids.len());
        let mut idx = 0usize;
        for (v, d) in values.iter().zip(&self.domain_sizes) {
            idx = idx * *d as usize + *v as usize;
        }
        idx
    }

    /// Probability of a full-graph assignment; picks this table's axes out
    /// of `state_values` by variable id.
    pub fn prob_of(&self, state_values: &[Value]) -> f64 {
        let mut idx = 0usize;
        for (id, d) in self.ids.iter().zip(&self.domain_sizes) {
            idx = idx * *d as usize + state_values[*id] as usize;
        }
        self.probs[idx]
    }

    /// Sums the joint mass over all variables outside `subset`. Axes of the
    /// result follow the order of `subset`.
    pub fn marginal(&self, subset: &[usize]) -> JointTable {
        assert!(
            subset.len() <= MAX_MARGINAL_VARS,
            "marginal subsets are limited to {MAX_MARGINAL_VARS} variables"
        );
        let axes: Vec<usize> = subset
            .iter()
            .map(|id| {
                self.ids
                    .iter()
                    .position(|x| x == id)
                    .expect("subset id not present in table")
            })
            .collect();
        let out_domains: Vec<u32> = axes.iter().map(|&a| self.domain_sizes[a]).collect();
        let out_len: usize = out_domains.iter().map(|&d| d as usize).product();
        let mut out = vec![0.0; out_len];
        let n = self.ids.len();
        let mut values = vec![0u32; n];
        for (idx, &p) in self.probs.iter().enumerate() {
            // decompose idx into per-axis values
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
            out[oi] += p;
        }
        JointTable {
            ids: subset.to_vec(),
            domain_sizes: out_domains,
            probs: out,
        }
    }

    fn same_shape(&self, other: &JointTable) -> bool {
        self.ids == other.ids && self.domain_sizes == other.domain_sizes
    }
}

/// Total variation distance between two tables over the same support:
/// half the L1 distance.
pub fn tv_distance(p: &JointTable, q: &JointTable) -> Result<f64> {
    if !p.same_shape(q) {
        return Err(Error::DimensionMismatch(format!(
            "tv_distance: ids {:?}/{:?}, domains {:?}/{:?}",
            p.ids, q.ids, p.domain_sizes, q.domain_sizes
        )));
    }
    Ok(tv_slice(&p.probs, &q.probs))
}

/// Half-L1 distance between two probability vectors of equal length.
pub fn tv_slice(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    0.5 * p
        .iter()
        .zip(q)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
}

/// omega-sparse variation distance: the maximum TV distance between
/// marginals over any variable subset of size at most omega. Only subsets
/// of size exactly omega are enumerated; marginal TV is monotone under
/// subset inclusion, so smaller subsets never attain the max.
pub fn sparse_variation_distance(p: &JointTable, q: &JointTable, omega: usize) -> Result<f64> {
    if !p.same_shape(q) {
        return Err(Error::DimensionMismatch(format!(
            "sparse_variation_distance: ids {:?}/{:?}",
            p.ids, q.ids
        )));
    }
    let n = p.ids.len();
    if n > MAX_SPARSE_VARS {
        return Err(Error::SubsetSpaceTooLarge {
            n,
            max: MAX_SPARSE_VARS,
        });
    }
    assert!(omega >= 1 && omega <= n, "omega must lie in [1, n]");
    let mut best = 0.0f64;
    let mut subset: Vec<usize> = (0..omega).collect();
    loop {
        let ids: Vec<usize> = subset.iter().map(|&k| p.ids[k]).collect();
        let d = tv_distance(&p.marginal(&ids), &q.marginal(&ids))?;
        best = best.max(d);
        // next k-combination of {0..n} in lexicographic order
        let mut i = omega;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            if subset[i] < n - (omega - i) {
                subset[i] += 1;
                for j in i + 1..omega {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

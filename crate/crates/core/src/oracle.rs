//! Exhaustive modularity maximization for tiny instances.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::metrics::multiplex_modularity;
use crate::network::{DegreeData, MultiplexNetwork};
use crate::partition::Partition;

/// Largest accepted `n_c ^ nL`.
pub const MAX_ASSIGNMENTS: f64 = 1e7;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub q_max: f64,
    pub partition: Partition,
    /// Assignments visited after removing label permutations.
    pub visited: u64,
}

/// Dense modularity matrix assembled entry by entry from the network.
fn dense_modularity(net: &MultiplexNetwork, deg: &DegreeData, gamma: &[f64]) -> Result<DMatrix<f64>> {
    let coefs = deg.null_model_coefficients(gamma)?;
    let n = net.n();
    let layers = net.num_layers();
    let mut m = DMatrix::zeros(net.dim(), net.dim());
    for (l, layer) in net.layers().iter().enumerate() {
        for (i, j, w) in layer.entries() {
            m[(l * n + i, l * n + j)] += w;
        }
        let d = &deg.intra_degrees[l];
        for i in 0..n {
            for j in 0..n {
                m[(l * n + i, l * n + j)] -= coefs[l] * d[i] * d[j];
            }
        }
    }
    for k in 0..layers {
        for l in 0..layers {
            let c = net.omega() * net.coupling(k, l);
            if k != l && c != 0.0 {
                for j in 0..n {
                    m[(k * n + j, l * n + j)] += c;
                }
            }
        }
    }
    Ok(m)
}

struct Search<'a> {
    m: &'a DMatrix<f64>,
    n_c: usize,
    labels: Vec<usize>,
    best: f64,
    best_labels: Vec<usize>,
    visited: u64,
}

impl Search<'_> {
    /// Labels are restricted-growth strings: first occurrences appear in
    /// increasing label order, which fixes one representative per relabeling.
    fn descend(&mut self, i: usize, used: usize, score: f64) {
        let dim = self.labels.len();
        if i == dim {
            self.visited += 1;
            if score > self.best {
                self.best = score;
                self.best_labels.clone_from(&self.labels);
            }
            return;
        }
        let limit = (used + 1).min(self.n_c);
        for c in 0..limit {
            let mut gain = self.m[(i, i)];
            for j in 0..i {
                if self.labels[j] == c {
                    gain += 2.0 * self.m[(i, j)];
                }
            }
            self.labels[i] = c;
            self.descend(i + 1, used.max(c + 1), score + gain);
        }
    }
}

/// Exact maximum of multiplex modularity over all partitions into at most
/// `n_c` communities.
pub fn oracle_max_modularity(
    net: &MultiplexNetwork,
    deg: &DegreeData,
    gamma: &[f64],
    n_c: usize,
) -> Result<OracleResult> {
    let dim = net.dim();
    if n_c == 0 {
        return Err(Error::InvalidParameter("n_c must be at least 1".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidParameter("network has no node-layer pairs".into()));
    }
    let assignments = (n_c as f64).powi(dim as i32);
    if assignments > MAX_ASSIGNMENTS {
        return Err(Error::TooLarge(format!(
            "{n_c}^{dim} = {assignments:.3e} assignments exceed {MAX_ASSIGNMENTS:.0e}"
        )));
    }
    if deg.total_strength == 0.0 {
        return Err(Error::ZeroStrength);
    }
    let m = dense_modularity(net, deg, gamma)?;
    let mut search = Search {
        m: &m,
        n_c,
        labels: vec![0; dim],
        best: f64::NEG_INFINITY,
        best_labels: vec![0; dim],
        visited: 0,
    };
    search.descend(0, 0, 0.0);

    let partition = Partition::new(search.best_labels, n_c)?;
    let q_max = multiplex_modularity(&partition, net, deg, gamma)?;
    Ok(OracleResult {
        q_max,
        partition,
        visited: search.visited,
    })
}

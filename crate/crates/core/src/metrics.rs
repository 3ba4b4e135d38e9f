//! Partition quality: multiplex modularity (two independent evaluations), the
//! balanced total variation objective, NMI and matched accuracy.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::network::{DegreeData, MultiplexNetwork};
use crate::operators::{LinearOperator, ModularityMatrix};
use crate::partition::Partition;

fn check_len(p: &Partition, expected: usize) -> Result<()> {
    if p.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: p.len() });
    }
    Ok(())
}

/// Sum that does not depend on the order the terms were produced in.
fn order_free_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Multiplex modularity `Q = tr(Uᵀ M U) / 2mu`, evaluated with the
/// matrix-free modularity operator on each community indicator.
///
/// Per-community terms are summed in sorted order, so relabeling
/// communities leaves `Q` bit-identical.
pub fn multiplex_modularity(p: &Partition, net: &MultiplexNetwork, deg: &DegreeData, gamma: &[f64]) -> Result<f64> {
    check_len(p, net.dim())?;
    if deg.total_strength == 0.0 {
        return Err(Error::ZeroStrength);
    }
    let m = ModularityMatrix::new(net, deg, gamma)?;
    let mut mu = vec![0.0; net.dim()];
    let sizes = p.community_sizes();
    let mut terms = Vec::with_capacity(sizes.len());
    for (c, &size) in sizes.iter().enumerate() {
        if size == 0 {
            continue;
        }
        let u = p.indicator(c);
        m.apply_into(&u, &mut mu);
        terms.push(
            p.labels()
                .iter()
                .zip(&mu)
                .filter(|(&l, _)| l == c)
                .map(|(_, v)| v)
                .sum(),
        );
    }
    Ok(order_free_sum(terms) / deg.total_strength)
}

/// Multiplex modularity from its defining double sum: same-community intra
/// edges, minus the per-layer null model `gamma_l / 2m_l * d_i d_j` over
/// same-community pairs (grouped by community volume), plus same-community
/// inter-layer couplings.
pub fn multiplex_modularity_sumform(
    p: &Partition,
    net: &MultiplexNetwork,
    deg: &DegreeData,
    gamma: &[f64],
) -> Result<f64> {
    check_len(p, net.dim())?;
    if deg.total_strength == 0.0 {
        return Err(Error::ZeroStrength);
    }
    let coefs = deg.null_model_coefficients(gamma)?;
    let n = net.n();
    let layers = net.num_layers();
    let labels = p.labels();

    let mut edges = 0.0;
    for (l, layer) in net.layers().iter().enumerate() {
        for (i, j, w) in layer.entries() {
            if labels[l * n + i] == labels[l * n + j] {
                edges += w;
            }
        }
    }

    let mut null_model = 0.0;
    for (l, d) in deg.intra_degrees.iter().enumerate() {
        if coefs[l] == 0.0 {
            continue;
        }
        let mut vol = vec![0.0; p.n_communities()];
        for (j, &dj) in d.iter().enumerate() {
            vol[labels[l * n + j]] += dj;
        }
        null_model += coefs[l] * vol.iter().map(|v| v * v).sum::<f64>();
    }

    let mut inter = 0.0;
    for k in 0..layers {
        for l in 0..layers {
            let c = net.omega() * net.coupling(k, l);
            if c == 0.0 {
                continue;
            }
            for j in 0..n {
                if labels[k * n + j] == labels[l * n + j] {
                    inter += c;
                }
            }
        }
    }

    Ok((edges - null_model + inter) / deg.total_strength)
}

/// Balanced multiplex total variation split into its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalancedTv {
    /// `sum_r Cut(S_r, S_r^C)` on the supra-adjacency.
    pub tv: f64,
    /// `sum_l gamma_l / 2m_l * ||d_lᵀ U_l||²`.
    pub balance: f64,
}

impl BalancedTv {
    pub fn total(&self) -> f64 {
        self.tv + self.balance
    }
}

pub fn balanced_tv_objective(
    p: &Partition,
    net: &MultiplexNetwork,
    deg: &DegreeData,
    gamma: &[f64],
) -> Result<BalancedTv> {
    check_len(p, net.dim())?;
    let coefs = deg.null_model_coefficients(gamma)?;
    let n = net.n();
    let labels = p.labels();

    // ordered pairs, so every cut edge counts once from each side
    let mut tv = 0.0;
    for (l, layer) in net.layers().iter().enumerate() {
        for (i, j, w) in layer.entries() {
            if labels[l * n + i] != labels[l * n + j] {
                tv += w;
            }
        }
    }
    for k in 0..net.num_layers() {
        for l in 0..net.num_layers() {
            let c = net.omega() * net.coupling(k, l);
            if c == 0.0 {
                continue;
            }
            tv += c * (0..n).filter(|&j| labels[k * n + j] != labels[l * n + j]).count() as f64;
        }
    }

    let mut balance = 0.0;
    for (l, d) in deg.intra_degrees.iter().enumerate() {
        let mut vol = vec![0.0; p.n_communities()];
        for (j, &dj) in d.iter().enumerate() {
            vol[labels[l * n + j]] += dj;
        }
        balance += coefs[l] * vol.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(BalancedTv { tv, balance })
}

/// Term of `sum p_xy ln(p_xy / (p_x p_y))` for a cell of `c` pairs.
fn information_term(c: usize, size_x: usize, size_y: usize, total: f64) -> f64 {
    let pxy = c as f64 / total;
    pxy * (total * c as f64 / (size_x as f64 * size_y as f64)).ln()
}

/// Entropy as the self-information of a labeling, evaluated with the same
/// expression as the mutual information so that `nmi(a, a)` is exactly 1.
fn entropy_terms(counts: &[usize], total: f64) -> Vec<f64> {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| information_term(c, c, c, total))
        .collect()
}

/// Normalized mutual information with geometric-mean normalization.
///
/// Zero-entropy convention: two constant labelings score 1, one constant
/// labeling against a non-constant one scores 0.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    check_len(b, a.len())?;
    if a.is_empty() {
        return Err(Error::InvalidParameter("NMI of empty labelings".into()));
    }
    let total = a.len() as f64;
    let size_a = a.community_sizes();
    let size_b = b.community_sizes();
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        *joint.entry((x, y)).or_insert(0) += 1;
    }

    let ha = order_free_sum(entropy_terms(&size_a, total));
    let hb = order_free_sum(entropy_terms(&size_b, total));
    if ha == 0.0 || hb == 0.0 {
        return Ok(if ha == 0.0 && hb == 0.0 { 1.0 } else { 0.0 });
    }

    let mi_terms: Vec<f64> = joint
        .iter()
        .map(|(&(x, y), &c)| information_term(c, size_a[x], size_b[y], total))
        .collect();
    let mi = order_free_sum(mi_terms);
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

/// Accuracy after greedily matching detected communities (largest first) to
/// the unused ground-truth community of largest overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedAccuracy {
    pub accuracy: f64,
    /// detected label -> truth label, 0-based; unmatched communities absent.
    pub matching: BTreeMap<usize, usize>,
}

pub fn matched_accuracy(detected: &Partition, truth: &Partition) -> Result<MatchedAccuracy> {
    check_len(truth, detected.len())?;
    if detected.is_empty() {
        return Err(Error::InvalidParameter("accuracy of empty labelings".into()));
    }
    let det_sizes = detected.community_sizes();
    let mut overlap = vec![vec![0usize; truth.n_communities()]; detected.n_communities()];
    for (&d, &t) in detected.labels().iter().zip(truth.labels()) {
        overlap[d][t] += 1;
    }

    let mut order: Vec<usize> = (0..det_sizes.len()).filter(|&c| det_sizes[c] > 0).collect();
    order.sort_by(|&a, &b| det_sizes[b].cmp(&det_sizes[a]).then(a.cmp(&b)));

    let truth_sizes = truth.community_sizes();
    let mut available: Vec<bool> = truth_sizes.iter().map(|&s| s > 0).collect();
    let mut matching = BTreeMap::new();
    let mut correct = 0usize;
    for d in order {
        let best = (0..available.len())
            .filter(|&t| available[t])
            .max_by(|&x, &y| overlap[d][x].cmp(&overlap[d][y]).then(y.cmp(&x)));
        if let Some(t) = best {
            available[t] = false;
            matching.insert(d, t);
            correct += overlap[d][t];
        }
    }
    Ok(MatchedAccuracy {
        accuracy: correct as f64 / detected.len() as f64,
        matching,
    })
}

/// Quality report for one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub modularity: f64,
    pub accuracy: Option<f64>,
    pub nmi: Option<f64>,
    pub n_communities_detected: usize,
    pub matching: Option<BTreeMap<usize, usize>>,
}

pub fn evaluate(
    p: &Partition,
    net: &MultiplexNetwork,
    deg: &DegreeData,
    gamma: &[f64],
    truth: Option<&Partition>,
) -> Result<EvalReport> {
    let modularity = multiplex_modularity(p, net, deg, gamma)?;
    let (accuracy, nmi_value, matching) = match truth {
        Some(t) => {
            let m = matched_accuracy(p, t)?;
            (Some(m.accuracy), Some(nmi(p, t)?), Some(m.matching))
        }
        None => (None, None, None),
    };
    Ok(EvalReport {
        modularity,
        accuracy,
        nmi: nmi_value,
        n_communities_detected: p.communities_used(),
        matching,
    })
}

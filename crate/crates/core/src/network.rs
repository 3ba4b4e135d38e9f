//! Multiplex network model and degree bookkeeping.
//!
//! Node-layer pair `(j, l)` (both 0-based) lives at supra index `l * n + j`,
//! i.e. the layer blocks of the supra-adjacency are stacked in layer order.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Undirected, weighted, layer-coupled multiplex network.
///
/// The supra-adjacency `blkdiag(A_1..A_L) + omega * (C ⊗ I)` is never formed;
/// see [`crate::operators`] for the matrix-free products.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplexNetwork {
    n: usize,
    layers: Vec<CsrMatrix>,
    /// `L x L`, row-major, symmetric, zero diagonal.
    coupling: Vec<f64>,
    omega: f64,
}

impl MultiplexNetwork {
    pub fn new(n: usize, layers: Vec<CsrMatrix>, coupling: Vec<f64>, omega: f64) -> Result<Self> {
        let l = layers.len();
        if l == 0 {
            return Err(Error::InvalidNetwork("at least one layer is required".into()));
        }
        if coupling.len() != l * l {
            return Err(Error::InvalidNetwork(format!(
                "coupling matrix has {} entries, expected {}",
                coupling.len(),
                l * l
            )));
        }
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::InvalidNetwork(format!(
                "omega must be finite and >= 0, got {omega}"
            )));
        }
        for (idx, layer) in layers.iter().enumerate() {
            if layer.dim() != n {
                return Err(Error::InvalidNetwork(format!(
                    "layer {} has dimension {}, expected {n}",
                    idx + 1,
                    layer.dim()
                )));
            }
            for (i, j, w) in layer.entries() {
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidNetwork(format!(
                        "layer {} entry ({}, {}) has invalid weight {w}",
                        idx + 1,
                        i + 1,
                        j + 1
                    )));
                }
            }
            if !layer.is_symmetric() {
                return Err(Error::InvalidNetwork(format!("layer {} is not symmetric", idx + 1)));
            }
        }
        for k in 0..l {
            if coupling[k * l + k] != 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "coupling entry ({}, {}) on the diagonal must be zero",
                    k + 1,
                    k + 1
                )));
            }
            for m in 0..l {
                let w = coupling[k * l + m];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidNetwork(format!(
                        "coupling entry ({}, {}) has invalid weight {w}",
                        k + 1,
                        m + 1
                    )));
                }
                if w.to_bits() != coupling[m * l + k].to_bits() {
                    return Err(Error::InvalidNetwork("coupling matrix is not symmetric".into()));
                }
            }
        }
        Ok(MultiplexNetwork {
            n,
            layers,
            coupling,
            omega,
        })
    }

    /// Network with all-to-all layer coupling `11ᵀ - I`.
    pub fn with_all_to_all(n: usize, layers: Vec<CsrMatrix>, omega: f64) -> Result<Self> {
        let l = layers.len();
        Self::new(n, layers, all_to_all_coupling(l), omega)
    }

    /// Physical node count.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Number of node-layer pairs, `n * L`.
    pub fn dim(&self) -> usize {
        self.n * self.layers.len()
    }

    pub fn layers(&self) -> &[CsrMatrix] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> &CsrMatrix {
        &self.layers[l]
    }

    pub fn coupling(&self, k: usize, l: usize) -> f64 {
        self.coupling[k * self.layers.len() + l]
    }

    pub fn coupling_matrix(&self) -> &[f64] {
        &self.coupling
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Same network with a different inter-layer coupling strength.
    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(self.n, self.layers.clone(), self.coupling.clone(), omega)
    }

    /// Supra index of node-layer pair `(node, layer)`, both 0-based.
    pub fn pair_index(&self, node: usize, layer: usize) -> usize {
        layer * self.n + node
    }

    /// Row sums of the coupling matrix.
    pub fn coupling_row_sums(&self) -> Vec<f64> {
        let l = self.layers.len();
        (0..l).map(|k| self.coupling[k * l..(k + 1) * l].iter().sum()).collect()
    }

    pub fn degrees(&self) -> DegreeData {
        DegreeData::compute(self)
    }
}

pub fn all_to_all_coupling(l: usize) -> Vec<f64> {
    let mut c = vec![1.0; l * l];
    for k in 0..l {
        c[k * l + k] = 0.0;
    }
    c
}

/// Per-layer and supra degree vectors with their totals.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeData {
    /// `d^(l) = A^(l) 1` for each layer.
    pub intra_degrees: Vec<Vec<f64>>,
    /// `2m^(l) = 1ᵀ d^(l)`.
    pub layer_strengths: Vec<f64>,
    /// `d = A 1` over all node-layer pairs.
    pub supra_degrees: Vec<f64>,
    /// `2mu = 1ᵀ A 1`.
    pub total_strength: f64,
}

impl DegreeData {
    pub fn compute(net: &MultiplexNetwork) -> Self {
        let n = net.n();
        let intra_degrees: Vec<Vec<f64>> = net.layers().iter().map(CsrMatrix::row_sums).collect();
        let layer_strengths: Vec<f64> = intra_degrees.iter().map(|d| d.iter().sum()).collect();
        let inter = net.coupling_row_sums();

        let mut supra_degrees = Vec::with_capacity(net.dim());
        for (l, d) in intra_degrees.iter().enumerate() {
            let extra = net.omega() * inter[l];
            supra_degrees.extend(d.iter().map(|&x| x + extra));
        }
        debug_assert_eq!(supra_degrees.len(), n * net.num_layers());
        let total_strength = supra_degrees.iter().sum();

        DegreeData {
            intra_degrees,
            layer_strengths,
            supra_degrees,
            total_strength,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.intra_degrees.len()
    }

    /// Layers whose intra-layer strength is zero. Their null-model and balance
    /// contributions are defined as zero.
    pub fn empty_layers(&self) -> Vec<usize> {
        (0..self.num_layers())
            .filter(|&l| self.layer_strengths[l] == 0.0)
            .collect()
    }

    /// Per-layer null-model coefficients `gamma_l / 2m_l` (0 for empty layers).
    pub fn null_model_coefficients(&self, gamma: &[f64]) -> Result<Vec<f64>> {
        validate_gamma(gamma, self.num_layers())?;
        Ok(gamma
            .iter()
            .zip(&self.layer_strengths)
            .map(|(&g, &two_m)| if two_m == 0.0 { 0.0 } else { g / two_m })
            .collect())
    }
}

pub fn validate_gamma(gamma: &[f64], layers: usize) -> Result<()> {
    if gamma.len() != layers {
        return Err(Error::InvalidParameter(format!(
            "expected {layers} resolution values, got {}",
            gamma.len()
        )));
    }
    if let Some(g) = gamma.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "resolution values must be positive, got {g}"
        )));
    }
    Ok(())
}

//! Matrix-free symmetric operators on vectors indexed by node-layer pairs.
//!
//! The rank-1 null-model blocks are applied through one inner product and one
//! scaled degree vector per layer, so no dense `n x n` block is ever built.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::network::{DegreeData, MultiplexNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    SupraAdjacency,
    SupraLaplacian,
    BalanceK,
    NegLPlusKShifted,
    ModularityM,
}

impl OperatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::SupraAdjacency => "supra_adjacency",
            OperatorKind::SupraLaplacian => "supra_laplacian",
            OperatorKind::BalanceK => "balance_K",
            OperatorKind::NegLPlusKShifted => "neg_L_plus_K_shifted",
            OperatorKind::ModularityM => "modularity_M",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            OperatorKind::SupraAdjacency,
            OperatorKind::SupraLaplacian,
            OperatorKind::BalanceK,
            OperatorKind::NegLPlusKShifted,
            OperatorKind::ModularityM,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A real symmetric linear map on `R^dim`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    fn kind(&self) -> OperatorKind;

    /// `y = Op x`. Panics if either slice has the wrong length.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// Dense matrix obtained by applying the operator to every unit vector.
    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            out.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        out
    }
}

fn check_dims(dim: usize, x: &[f64], y: &[f64]) {
    assert_eq!(x.len(), dim, "operator input has wrong length");
    assert_eq!(y.len(), dim, "operator output has wrong length");
}

/// `y += scale * omega * (C ⊗ I) x`.
fn add_inter_layer(net: &MultiplexNetwork, x: &[f64], y: &mut [f64], scale: f64) {
    let n = net.n();
    let layers = net.num_layers();
    if net.omega() == 0.0 || n == 0 {
        return;
    }
    for k in 0..layers {
        for l in 0..layers {
            let c = net.coupling(k, l);
            if c == 0.0 {
                continue;
            }
            let w = scale * net.omega() * c;
            let (src, dst) = (&x[l * n..(l + 1) * n], &mut y[k * n..(k + 1) * n]);
            for (yi, xi) in dst.iter_mut().zip(src) {
                *yi += w * xi;
            }
        }
    }
}

/// `y_l += sign * coef_l * d_l (d_lᵀ x_l)` for every layer.
fn add_rank_one_blocks(deg: &DegreeData, coefs: &[f64], x: &[f64], y: &mut [f64], sign: f64) {
    let mut offset = 0;
    for (d, &c) in deg.intra_degrees.iter().zip(coefs) {
        let n = d.len();
        if c != 0.0 {
            let xl = &x[offset..offset + n];
            let dot: f64 = d.iter().zip(xl).map(|(a, b)| a * b).sum();
            let s = sign * c * dot;
            for (yi, di) in y[offset..offset + n].iter_mut().zip(d) {
                *yi += s * di;
            }
        }
        offset += n;
    }
}

fn apply_intra_into(net: &MultiplexNetwork, x: &[f64], y: &mut [f64]) {
    let n = net.n();
    for (l, layer) in net.layers().iter().enumerate() {
        layer.mul_vec_into(&x[l * n..(l + 1) * n], &mut y[l * n..(l + 1) * n]);
    }
}

/// Supra-adjacency `A = blkdiag(A_l) + omega (C ⊗ I)`.
#[derive(Debug, Clone, Copy)]
pub struct SupraAdjacency<'a> {
    net: &'a MultiplexNetwork,
}

impl<'a> SupraAdjacency<'a> {
    pub fn new(net: &'a MultiplexNetwork) -> Self {
        SupraAdjacency { net }
    }
}

impl LinearOperator for SupraAdjacency<'_> {
    fn dim(&self) -> usize {
        self.net.dim()
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::SupraAdjacency
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        check_dims(self.dim(), x, y);
        apply_intra_into(self.net, x, y);
        add_inter_layer(self.net, x, y, 1.0);
    }
}

/// Supra-Laplacian `L = diag(d) - A`.
#[derive(Debug, Clone, Copy)]
pub struct SupraLaplacian<'a> {
    net: &'a MultiplexNetwork,
    deg: &'a DegreeData,
}

impl<'a> SupraLaplacian<'a> {
    pub fn new(net: &'a MultiplexNetwork, deg: &'a DegreeData) -> Result<Self> {
        if deg.supra_degrees.len() != net.dim() {
            return Err(Error::DimensionMismatch {
                expected: net.dim(),
                got: deg.supra_degrees.len(),
            });
        }
        Ok(SupraLaplacian { net, deg })
    }
}

impl LinearOperator for SupraLaplacian<'_> {
    fn dim(&self) -> usize {
        self.net.dim()
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::SupraLaplacian
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        check_dims(self.dim(), x, y);
        apply_intra_into(self.net, x, y);
        add_inter_layer(self.net, x, y, 1.0);
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.deg.supra_degrees) {
            *yi = di * xi - *yi;
        }
    }
}

/// Balance operator `K = blkdiag((gamma_l / m_l) d_l d_lᵀ)`.
#[derive(Debug, Clone)]
pub struct BalanceK<'a> {
    deg: &'a DegreeData,
    /// `gamma_l / m_l = 2 gamma_l / 2m_l`
    coefs: Vec<f64>,
    dim: usize,
}

impl<'a> BalanceK<'a> {
    pub fn new(deg: &'a DegreeData, gamma: &[f64]) -> Result<Self> {
        let coefs = deg
            .null_model_coefficients(gamma)?
            .into_iter()
            .map(|c| 2.0 * c)
            .collect();
        Ok(BalanceK {
            deg,
            coefs,
            dim: deg.supra_degrees.len(),
        })
    }

    /// Non-zero eigenvalue of each layer block, `(gamma_l / m_l) ||d_l||²`.
    pub fn block_eigenvalues(&self) -> Vec<f64> {
        self.deg
            .intra_degrees
            .iter()
            .zip(&self.coefs)
            .map(|(d, c)| c * d.iter().map(|x| x * x).sum::<f64>())
            .collect()
    }
}

impl LinearOperator for BalanceK<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::BalanceK
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        check_dims(self.dim, x, y);
        y.fill(0.0);
        add_rank_one_blocks(self.deg, &self.coefs, x, y, 1.0);
    }
}

/// Multiplex modularity matrix: intra blocks `A_l - (gamma_l / 2m_l) d_l d_lᵀ`,
/// off-diagonal blocks `omega C_kl I`.
#[derive(Debug, Clone)]
pub struct ModularityMatrix<'a> {
    net: &'a MultiplexNetwork,
    deg: &'a DegreeData,
    coefs: Vec<f64>,
}

impl<'a> ModularityMatrix<'a> {
    pub fn new(net: &'a MultiplexNetwork, deg: &'a DegreeData, gamma: &[f64]) -> Result<Self> {
        let coefs = deg.null_model_coefficients(gamma)?;
        Ok(ModularityMatrix { net, deg, coefs })
    }
}

impl LinearOperator for ModularityMatrix<'_> {
    fn dim(&self) -> usize {
        self.net.dim()
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::ModularityM
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        check_dims(self.dim(), x, y);
        apply_intra_into(self.net, x, y);
        add_inter_layer(self.net, x, y, 1.0);
        add_rank_one_blocks(self.deg, &self.coefs, x, y, -1.0);
    }
}

/// `sigma I - (L + K)`, whose largest eigenpairs are the smallest of `L + K`.
#[derive(Debug, Clone)]
pub struct ShiftedNegLK<'a> {
    laplacian: SupraLaplacian<'a>,
    balance: BalanceK<'a>,
    shift: f64,
}

impl<'a> ShiftedNegLK<'a> {
    pub fn new(net: &'a MultiplexNetwork, deg: &'a DegreeData, gamma: &[f64]) -> Result<Self> {
        let laplacian = SupraLaplacian::new(net, deg)?;
        let balance = BalanceK::new(deg, gamma)?;
        let shift = gershgorin_bound(net, deg, gamma);
        Ok(ShiftedNegLK {
            laplacian,
            balance,
            shift,
        })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }
}

/// Gershgorin upper bound on `lambda_max(L + K)`:
/// `max_(j,l) 2 d_(l n + j) + 2 gamma_l d^(l)_j`.
pub fn gershgorin_bound(net: &MultiplexNetwork, deg: &DegreeData, gamma: &[f64]) -> f64 {
    let n = net.n();
    let mut sigma = 0.0_f64;
    for (l, d) in deg.intra_degrees.iter().enumerate() {
        // K rows of empty layers vanish; their d is zero anyway
        let g = gamma.get(l).copied().unwrap_or(0.0);
        for (supra, dj) in deg.supra_degrees[l * n..(l + 1) * n].iter().zip(d) {
            sigma = sigma.max(2.0 * supra + 2.0 * g * dj);
        }
    }
    sigma
}

impl LinearOperator for ShiftedNegLK<'_> {
    fn dim(&self) -> usize {
        self.laplacian.dim()
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::NegLPlusKShifted
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.laplacian.apply_into(x, y);
        add_rank_one_blocks(self.balance.deg, &self.balance.coefs, x, y, 1.0);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.shift * xi - *yi;
        }
    }
}

/// Builds `sigma I - (L + K)` and returns it with `sigma`.
pub fn shifted_neg_lk<'a>(
    net: &'a MultiplexNetwork,
    deg: &'a DegreeData,
    gamma: &[f64],
) -> Result<(ShiftedNegLK<'a>, f64)> {
    let op = ShiftedNegLK::new(net, deg, gamma)?;
    let shift = op.shift();
    Ok((op, shift))
}

//! Dense reference computations and random instances for tests.
//!
//! Everything here is assembled from raw edge lists with dense matrices, so
//! it shares no arithmetic with the matrix-free library code it checks.

use multiplex_mbo::{CsrMatrix, MultiplexNetwork, Partition};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

/// A multiplex network as plain data.
#[derive(Debug, Clone)]
pub struct Instance {
    pub n: usize,
    /// Per layer, undirected edges `(u, v, w)` with 0-based ids.
    pub layers: Vec<Vec<(usize, usize, f64)>>,
    /// Row-major `L x L` coupling, symmetric with zero diagonal.
    pub coupling: Vec<f64>,
    pub omega: f64,
}

impl Instance {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        self.n * self.layers.len()
    }

    pub fn with_all_to_all_coupling(&self) -> Instance {
        let l = self.num_layers();
        let coupling = (0..l * l).map(|i| if i / l == i % l { 0.0 } else { 1.0 }).collect();
        Instance {
            coupling,
            ..self.clone()
        }
    }

    pub fn network(&self) -> MultiplexNetwork {
        let layers = self
            .layers
            .iter()
            .map(|edges| CsrMatrix::from_undirected_edges(self.n, edges.iter().copied()))
            .collect();
        MultiplexNetwork::new(self.n, layers, self.coupling.clone(), self.omega).expect("valid instance")
    }

    /// Dense intra-layer adjacency of layer `l`.
    pub fn layer_matrix(&self, l: usize) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(u, v, w) in &self.layers[l] {
            a[(u, v)] += w;
            if u != v {
                a[(v, u)] += w;
            }
        }
        a
    }

    pub fn supra_adjacency(&self) -> DMatrix<f64> {
        let (n, nl) = (self.n, self.num_layers());
        let mut a = DMatrix::zeros(self.dim(), self.dim());
        for l in 0..nl {
            a.view_mut((l * n, l * n), (n, n)).copy_from(&self.layer_matrix(l));
            for k in 0..nl {
                let c = self.omega * self.coupling[k * nl + l];
                for j in 0..n {
                    a[(k * n + j, l * n + j)] += c;
                }
            }
        }
        a
    }

    pub fn layer_degrees(&self, l: usize) -> Vec<f64> {
        let a = self.layer_matrix(l);
        (0..self.n).map(|i| a.row(i).sum()).collect()
    }

    pub fn supra_degrees(&self) -> Vec<f64> {
        let a = self.supra_adjacency();
        (0..self.dim()).map(|i| a.row(i).sum()).collect()
    }

    pub fn total_strength(&self) -> f64 {
        self.supra_adjacency().sum()
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let a = self.supra_adjacency();
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.supra_degrees())) - a
    }

    /// Blocks `scale * gamma_l / 2m_l * d_l d_l^T`, zero for empty layers.
    fn null_model(&self, gamma: &[f64], scale: f64) -> DMatrix<f64> {
        let n = self.n;
        let mut k = DMatrix::zeros(self.dim(), self.dim());
        for l in 0..self.num_layers() {
            let d = self.layer_degrees(l);
            let two_m: f64 = d.iter().sum();
            if two_m == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    k[(l * n + i, l * n + j)] = scale * gamma[l] / two_m * d[i] * d[j];
                }
            }
        }
        k
    }

    pub fn balance_k(&self, gamma: &[f64]) -> DMatrix<f64> {
        self.null_model(gamma, 2.0)
    }

    pub fn modularity_matrix(&self, gamma: &[f64]) -> DMatrix<f64> {
        self.supra_adjacency() - self.null_model(gamma, 1.0)
    }

    /// Modularity as the literal double sum over same-community pairs.
    pub fn modularity(&self, labels: &[usize], gamma: &[f64]) -> f64 {
        let m = self.modularity_matrix(gamma);
        let mut q = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                if labels[i] == labels[j] {
                    q += m[(i, j)];
                }
            }
        }
        q / self.total_strength()
    }

    /// Ordered cut pairs and layer-wise squared volumes.
    pub fn tv_and_balance(&self, labels: &[usize], gamma: &[f64]) -> (f64, f64) {
        let a = self.supra_adjacency();
        let mut tv = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                if labels[i] != labels[j] {
                    tv += a[(i, j)];
                }
            }
        }
        let n_c = labels.iter().max().map_or(0, |m| m + 1);
        let mut balance = 0.0;
        for l in 0..self.num_layers() {
            let d = self.layer_degrees(l);
            let two_m: f64 = d.iter().sum();
            if two_m == 0.0 {
                continue;
            }
            let mut vol = vec![0.0; n_c];
            for j in 0..self.n {
                vol[labels[l * self.n + j]] += d[j];
            }
            balance += gamma[l] / two_m * vol.iter().map(|v| v * v).sum::<f64>();
        }
        (tv, balance)
    }
}

/// Knobs for [`random_instance`].
#[derive(Debug, Clone, Copy)]
pub struct InstanceShape {
    pub max_n: usize,
    pub max_layers: usize,
    pub edge_prob: f64,
    /// Use all-to-all coupling instead of random weights.
    pub all_to_all: bool,
}

impl Default for InstanceShape {
    fn default() -> Self {
        InstanceShape {
            max_n: 20,
            max_layers: 3,
            edge_prob: 0.3,
            all_to_all: false,
        }
    }
}

pub fn random_instance(rng: &mut impl Rng, shape: InstanceShape) -> Instance {
    let n = rng.random_range(2..=shape.max_n);
    let num_layers = rng.random_range(1..=shape.max_layers);
    let layers = (0..num_layers)
        .map(|_| {
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u..n {
                    let p = if u == v {
                        shape.edge_prob / 10.0
                    } else {
                        shape.edge_prob
                    };
                    if rng.random_bool(p) {
                        edges.push((u, v, rng.random_range(0.1..2.0)));
                    }
                }
            }
            edges
        })
        .collect();
    let mut coupling = vec![0.0; num_layers * num_layers];
    for k in 0..num_layers {
        for l in k + 1..num_layers {
            let w = if shape.all_to_all {
                1.0
            } else {
                rng.random_range(0.0..1.5)
            };
            coupling[k * num_layers + l] = w;
            coupling[l * num_layers + k] = w;
        }
    }
    let omega = [0.0, 0.5, 1.0][rng.random_range(0..3)];
    Instance {
        n,
        layers,
        coupling,
        omega,
    }
}

/// Random resolution values in `[0.3, 2]`.
pub fn random_gamma(rng: &mut impl Rng, layers: usize) -> Vec<f64> {
    (0..layers).map(|_| rng.random_range(0.3..=2.0)).collect()
}

pub fn random_partition(rng: &mut impl Rng, len: usize, n_c: usize) -> Partition {
    let labels = (0..len).map(|_| rng.random_range(0..n_c)).collect();
    Partition::new(labels, n_c).expect("labels in range")
}

/// Eigenvalues in descending order with matching eigenvector columns.
pub fn dense_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(m.nrows(), m.ncols());
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Matrix exponential by scaling and squaring with a Taylor polynomial.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.abs().row_sum().max();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * scale;
    let id = DMatrix::identity(a.nrows(), a.ncols());
    let mut result = id.clone();
    let mut term = id;
    for i in 1..=24 {
        term = &term * &x / i as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Frobenius norm of the part of `span(a)` outside `span(b)`, for matrices
/// with orthonormal columns. Bounds the largest principal angle sine.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b * (b.transpose() * a)).norm()
}

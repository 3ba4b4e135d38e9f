//! Multi-run MBO driver: random one-hot starts, truncated spectral diffusion
//! and row-wise thresholding.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::eigen::{basis_for_method, LanczosOptions, Method, SpectralBasis};
use crate::error::{Error, Result};
use crate::metrics::multiplex_modularity;
use crate::network::{validate_gamma, DegreeData, MultiplexNetwork};
use crate::partition::Partition;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_DT: f64 = 1.0;
pub const DEFAULT_RUNS: usize = 20;
/// Entries within this fraction of `max |V|` of a row maximum count as tied.
pub const DEFAULT_TIE_TOL: f64 = 1e-6;
/// Seed of the eigensolver start vectors. Fixed so that a basis depends on
/// the operator alone and cached bases are interchangeable across run seeds.
pub const EIG_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectConfig {
    pub method: Method,
    /// One resolution value per layer.
    pub gamma: Vec<f64>,
    pub n_c: usize,
    /// Number of eigenpairs used by the diffusion step.
    pub k: usize,
    pub dt: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub n_runs: usize,
    pub seed: u64,
    pub eig: LanczosOptions,
    /// Relative tie tolerance of the thresholding step. Rows that lie outside
    /// the retained eigenspace diffuse to zero up to eigensolver error, and
    /// this keeps their labels from following that noise.
    pub tie_tol: f64,
}

impl DetectConfig {
    pub fn new(method: Method, gamma: Vec<f64>, n_c: usize, k: usize) -> Self {
        DetectConfig {
            method,
            gamma,
            n_c,
            k,
            dt: DEFAULT_DT,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            n_runs: DEFAULT_RUNS,
            seed: 0,
            eig: LanczosOptions::default(),
            tie_tol: DEFAULT_TIE_TOL,
        }
    }

    pub fn validate(&self, net: &MultiplexNetwork) -> Result<()> {
        validate_gamma(&self.gamma, net.num_layers())?;
        if self.n_c < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_c must be at least 2, got {}",
                self.n_c
            )));
        }
        if self.k == 0 || self.k > net.dim() {
            return Err(Error::InvalidParameter(format!(
                "k must lie in 1..={}, got {}",
                net.dim(),
                self.k
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.tie_tol >= 0.0 && self.tie_tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tie tolerance must lie in [0, 1), got {}",
                self.tie_tol
            )));
        }
        if self.n_runs == 0 {
            return Err(Error::InvalidParameter("at least one run is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub partition: Partition,
    pub modularity: f64,
    pub iterations: usize,
    pub converged: bool,
    pub run_index: usize,
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub best: RunResult,
    /// Every run, ordered by run index.
    pub runs: Vec<RunResult>,
    /// Eigensolver time (zero when a basis was supplied).
    pub offline: Duration,
    /// Wall time of all runs together.
    pub online: Duration,
}

impl Detection {
    pub fn modularities(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.modularity).collect()
    }
}

/// Generator for run `run_index`.
pub fn run_rng(seed: u64, run_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ run_index as u64)
}

/// Each row gets a label drawn uniformly from `0..n_c`.
pub fn random_onehot_init(n_rows: usize, n_c: usize, rng: &mut impl Rng) -> Result<Partition> {
    if n_c < 2 {
        return Err(Error::InvalidParameter(format!("n_c must be at least 2, got {n_c}")));
    }
    let labels = (0..n_rows).map(|_| rng.random_range(0..n_c)).collect();
    Partition::new(labels, n_c)
}

fn diffuse(basis: &SpectralBasis, dt: f64, u: &DMatrix<f64>, offset: f64) -> Result<DMatrix<f64>> {
    if u.nrows() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: u.nrows(),
        });
    }
    let mut coef = basis.eigenvectors.tr_mul(u);
    for (i, &lambda) in basis.eigenvalues.iter().enumerate() {
        let f = (dt * (lambda - offset)).exp();
        coef.row_mut(i).scale_mut(f);
    }
    Ok(&basis.eigenvectors * coef)
}

/// `Phi exp(dt Lambda) Phi^T U`, with `Phi^T U` formed first.
pub fn diffusion_step(basis: &SpectralBasis, dt: f64, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    diffuse(basis, dt, u, 0.0)
}

/// Row-wise argmax; ties go to the smallest column.
pub fn threshold(v: &DMatrix<f64>) -> Result<Partition> {
    threshold_with_tolerance(v, 0.0)
}

/// Row-wise argmax where entries within `rtol * max |V|` of the row maximum
/// are tied; ties go to the smallest column.
pub fn threshold_with_tolerance(v: &DMatrix<f64>, rtol: f64) -> Result<Partition> {
    let mut vmax = 0.0_f64;
    for j in 0..v.ncols() {
        for i in 0..v.nrows() {
            let x = v[(i, j)];
            if !x.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            vmax = vmax.max(x.abs());
        }
    }
    let slack = rtol * vmax;
    let labels = (0..v.nrows())
        .map(|i| {
            let row = v.row(i);
            let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.iter().position(|&x| x >= top - slack).unwrap_or(0)
        })
        .collect();
    Partition::new(labels, v.ncols().max(1))
}

/// Iterates diffusion and thresholding from `u0`.
pub fn mbo_run(
    basis: &SpectralBasis,
    config: &DetectConfig,
    net: &MultiplexNetwork,
    deg: &DegreeData,
    u0: Partition,
    run_index: usize,
) -> Result<RunResult> {
    if u0.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: u0.len(),
        });
    }
    if u0.n_communities() != config.n_c {
        return Err(Error::InvalidLabels(format!(
            "initial partition has {} communities, expected {}",
            u0.n_communities(),
            config.n_c
        )));
    }
    // a common positive factor leaves every argmax unchanged and keeps
    // large positive eigenvalues from overflowing
    let offset = basis.eigenvalues.iter().copied().fold(0.0_f64, f64::max);

    let mut u = u0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        let v = diffuse(basis, config.dt, &u.one_hot(), offset)?;
        let next = threshold_with_tolerance(&v, config.tie_tol)?;
        let changed = next.changed_rows(&u);
        u = next;
        iterations += 1;
        if ((2 * changed) as f64).sqrt() < config.tol {
            converged = true;
            break;
        }
    }
    let modularity = multiplex_modularity(&u, net, deg, &config.gamma)?;
    Ok(RunResult {
        partition: u,
        modularity,
        iterations,
        converged,
        run_index,
    })
}

/// Computes the method's basis, then runs [`detect_with_basis`].
pub fn detect(net: &MultiplexNetwork, deg: &DegreeData, config: &DetectConfig) -> Result<Detection> {
    config.validate(net)?;
    let start = Instant::now();
    let basis = basis_for_method(config.method, net, deg, &config.gamma, config.k, &config.eig, EIG_SEED)?;
    let offline = start.elapsed();
    let mut detection = detect_with_basis(net, deg, &basis, config)?;
    detection.offline = offline;
    Ok(detection)
}

/// Runs all initial conditions against a precomputed basis, which is
/// truncated to `config.k` columns when larger.
pub fn detect_with_basis(
    net: &MultiplexNetwork,
    deg: &DegreeData,
    basis: &SpectralBasis,
    config: &DetectConfig,
) -> Result<Detection> {
    config.validate(net)?;
    if basis.dim() != net.dim() {
        return Err(Error::DimensionMismatch {
            expected: net.dim(),
            got: basis.dim(),
        });
    }
    let truncated;
    let basis = match basis.k().cmp(&config.k) {
        std::cmp::Ordering::Less => {
            return Err(Error::InvalidParameter(format!(
                "basis holds {} eigenpairs, {} requested",
                basis.k(),
                config.k
            )))
        }
        std::cmp::Ordering::Equal => basis,
        std::cmp::Ordering::Greater => {
            truncated = basis.truncated(config.k)?;
            &truncated
        }
    };

    let start = Instant::now();
    let runs = (0..config.n_runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = run_rng(config.seed, r);
            let u0 = random_onehot_init(net.dim(), config.n_c, &mut rng)?;
            mbo_run(basis, config, net, deg, u0, r)
        })
        .collect::<Result<Vec<_>>>()?;
    let online = start.elapsed();

    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.modularity > runs[best].modularity {
            best = i;
        }
    }
    Ok(Detection {
        best: runs[best].clone(),
        runs,
        offline: Duration::ZERO,
        online,
    })
}

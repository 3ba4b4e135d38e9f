//! Extremal eigenpairs of symmetric operators by thick-restart Lanczos.
//!
//! Each restart cycle expands an orthonormal Krylov basis with full (two-pass
//! classical Gram-Schmidt) reorthogonalization, solves the projected problem,
//! locks the leading Ritz pairs whose residual estimate `|beta * y_last|` is
//! below `tol * scale`, and restarts from the next best Ritz vectors plus the
//! residual direction. Invariant subspaces are continued with a fresh random
//! vector. A Krylov space only sees one direction per eigenspace, so after the
//! wanted pairs are locked a deflated pass searches the orthogonal complement
//! for a larger eigenvalue that was missed and swaps it in.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{format_coupling, format_network};
use crate::network::{DegreeData, MultiplexNetwork};
use crate::operators::{shifted_neg_lk, LinearOperator, ModularityMatrix, OperatorKind};

pub const DEFAULT_EIG_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_RESTARTS: usize = 500;

/// Which gradient flow drives the diffusion step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Balanced total variation flow, operator `-(L + K)`.
    Mpbtv,
    /// Direct modularity flow, operator `M`.
    Dgfm3,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mpbtv => "mpbtv",
            Method::Dgfm3 => "dgfm3",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mpbtv" => Ok(Method::Mpbtv),
            "dgfm3" => Ok(Method::Dgfm3),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Relative residual tolerance.
    pub tol: f64,
    /// Maximum restart cycles per Lanczos run.
    pub max_restarts: usize,
    /// Working subspace is `max(multiplier * k, k + min_extra)`.
    pub subspace_multiplier: usize,
    pub min_extra: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: DEFAULT_EIG_TOL,
            max_restarts: DEFAULT_MAX_RESTARTS,
            subspace_multiplier: 2,
            min_extra: 15,
        }
    }
}

/// `k` eigenpairs with eigenvalues sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub eigenvalues: Vec<f64>,
    /// `nL x k`, orthonormal columns.
    pub eigenvectors: DMatrix<f64>,
    /// `||Op phi_i - lambda_i phi_i||` for the decomposed operator.
    pub residuals: Vec<f64>,
    pub operator: OperatorKind,
    /// Spectral shift that was removed from the eigenvalues (0 if none).
    pub shift: f64,
}

impl SpectralBasis {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// Residual scale `max(max_i |lambda_i|, shift)`.
    pub fn scale(&self) -> f64 {
        self.eigenvalues.iter().fold(self.shift.abs(), |s, l| s.max(l.abs()))
    }

    /// Leading `k` pairs. Valid because every pair is converged on its own.
    pub fn truncated(&self, k: usize) -> Result<SpectralBasis> {
        if k == 0 || k > self.k() {
            return Err(Error::InvalidParameter(format!(
                "cannot truncate a basis of {} pairs to {k}",
                self.k()
            )));
        }
        Ok(SpectralBasis {
            eigenvalues: self.eigenvalues[..k].to_vec(),
            eigenvectors: self.eigenvectors.columns(0, k).into_owned(),
            residuals: self.residuals[..k].to_vec(),
            operator: self.operator,
            shift: self.shift,
        })
    }

    /// `max |Phiᵀ Phi - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.eigenvectors.transpose() * &self.eigenvectors;
        let mut err = 0.0_f64;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g[(i, j)] - target).abs());
            }
        }
        err
    }
}

#[derive(Debug, Clone)]
struct Eigenpair {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn scale_in_place(a: &mut [f64], s: f64) {
    for x in a {
        *x *= s;
    }
}

/// Removes the components of `w` along the (orthonormal) vectors, twice.
/// Returns the accumulated coefficients.
fn orthogonalize<'a>(w: &mut [f64], against: impl Iterator<Item = &'a [f64]> + Clone) -> Vec<f64> {
    let mut coefs: Vec<f64> = Vec::new();
    for pass in 0..2 {
        for (i, v) in against.clone().enumerate() {
            let c = dot(v, w);
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= c * vi;
            }
            if pass == 0 {
                coefs.push(c);
            } else {
                coefs[i] += c;
            }
        }
    }
    coefs
}

/// Random unit vector orthogonal to every given vector, or `None` when they
/// already span the space.
fn random_orthogonal<'a>(
    n: usize,
    rng: &mut ChaCha8Rng,
    against: impl Iterator<Item = &'a [f64]> + Clone,
    count: usize,
) -> Option<Vec<f64>> {
    if count >= n {
        return None;
    }
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let before = norm(&v);
        orthogonalize(&mut v, against.clone());
        let after = norm(&v);
        if after > 1e-8 * before {
            scale_in_place(&mut v, 1.0 / after);
            return Some(v);
        }
    }
    None
}

/// Thick-restart Lanczos for the `nev` largest eigenpairs of `P Op P`, where
/// `P` projects out `deflate` (orthonormal eigenvectors of `Op`).
fn thick_restart_lanczos(
    op: &dyn LinearOperator,
    nev: usize,
    deflate: &[Vec<f64>],
    opts: &LanczosOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Eigenpair>> {
    let n = op.dim();
    let avail = n - deflate.len();
    debug_assert!(nev >= 1 && nev <= avail);
    let m_max = (opts.subspace_multiplier * nev).max(nev + opts.min_extra).min(avail);

    let mut locked: Vec<Eigenpair> = Vec::with_capacity(nev);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_max);
    let mut h = DMatrix::<f64>::zeros(m_max, m_max);
    let mut best = vec![f64::INFINITY; nev];
    let mut anorm = 0.0_f64;

    let fixed = |locked: &[Eigenpair]| -> Vec<Vec<f64>> {
        deflate
            .iter()
            .cloned()
            .chain(locked.iter().map(|p| p.vector.clone()))
            .collect()
    };
    let mut projected = fixed(&locked);
    let mut next = random_orthogonal(n, rng, projected.iter().map(Vec::as_slice), projected.len())
        .ok_or_else(|| Error::InvalidParameter("no room for a Krylov start vector".into()))?;
    let mut last_beta;
    let mut w = vec![0.0; n];

    for restart in 0..=opts.max_restarts {
        let wanted = nev - locked.len();
        let m = m_max.min(avail - locked.len());
        last_beta = 0.0;

        while basis.len() < m {
            let j = basis.len();
            basis.push(std::mem::take(&mut next));
            op.apply_into(&basis[j], &mut w);
            anorm = anorm.max(norm(&w));
            orthogonalize(&mut w, projected.iter().map(Vec::as_slice));
            let coefs = orthogonalize(&mut w, basis.iter().map(Vec::as_slice));
            for (i, &c) in coefs.iter().enumerate() {
                h[(i, j)] = c;
                h[(j, i)] = c;
            }
            let beta = norm(&w);
            if beta > 1e-12 * anorm && beta > 0.0 {
                last_beta = beta;
                next = w.iter().map(|x| x / beta).collect();
            } else {
                last_beta = 0.0;
                let against = projected.iter().chain(basis.iter()).map(Vec::as_slice);
                next =
                    random_orthogonal(n, rng, against, projected.len() + basis.len()).unwrap_or_else(|| vec![0.0; n]);
            }
        }

        let mm = basis.len();
        let hs = h.view((0, 0), (mm, mm)).into_owned();
        let hs = (&hs + hs.transpose()) * 0.5;
        let eig = SymmetricEigen::new(hs);
        let mut order: Vec<usize> = (0..mm).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

        let theta = |i: usize| eig.eigenvalues[order[i]];
        let estimate = |i: usize| (last_beta * eig.eigenvectors[(mm - 1, order[i])]).abs();

        let mut scale = locked.iter().map(|p| p.value.abs()).fold(0.0, f64::max);
        for i in 0..wanted.min(mm) {
            scale = scale.max(theta(i).abs());
        }
        let threshold = if scale > 0.0 {
            opts.tol * scale
        } else {
            opts.tol * anorm
        };

        let mut nconv = 0;
        while nconv < wanted.min(mm) && estimate(nconv) <= threshold {
            nconv += 1;
        }
        for i in 0..wanted.min(mm) {
            best[locked.len() + i] = best[locked.len() + i].min(estimate(i));
        }

        let ritz_vector = |i: usize| -> Vec<f64> {
            let y = eig.eigenvectors.column(order[i]);
            let mut x = vec![0.0; n];
            for (v, &c) in basis.iter().zip(y.iter()) {
                for (xi, vi) in x.iter_mut().zip(v) {
                    *xi += c * vi;
                }
            }
            x
        };

        for i in 0..nconv {
            locked.push(Eigenpair {
                value: theta(i),
                vector: ritz_vector(i),
                residual: estimate(i),
            });
        }
        if locked.len() == nev {
            break;
        }
        if restart == opts.max_restarts {
            return Err(Error::NoConvergence {
                restarts: opts.max_restarts,
                converged: locked.len(),
                wanted: nev,
                residuals: best,
            });
        }

        let wanted = nev - locked.len();
        let m_next = m_max.min(avail - locked.len());
        let keep = (wanted + (m_max - wanted) / 2)
            .min(m_next.saturating_sub(1))
            .min(mm - nconv);
        let kept: Vec<Vec<f64>> = (nconv..nconv + keep).map(ritz_vector).collect();
        h.fill(0.0);
        for i in 0..keep {
            h[(i, i)] = theta(nconv + i);
        }
        basis = kept;
        projected = fixed(&locked);
        if next.iter().all(|&x| x == 0.0) {
            let against = projected.iter().chain(basis.iter()).map(Vec::as_slice);
            next = random_orthogonal(n, rng, against, projected.len() + basis.len()).unwrap_or_else(|| vec![0.0; n]);
        }
    }

    // true residuals against the unprojected operator
    let mut ax = vec![0.0; n];
    for p in &mut locked {
        op.apply_into(&p.vector, &mut ax);
        let r: f64 = ax
            .iter()
            .zip(&p.vector)
            .map(|(a, x)| (a - p.value * x).powi(2))
            .sum::<f64>()
            .sqrt();
        p.residual = r;
    }
    locked.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(locked)
}

/// The `k` algebraically largest eigenpairs of a symmetric operator.
///
/// Deterministic for a fixed `seed`: every random vector comes from one
/// seeded ChaCha stream.
pub fn largest_eigenpairs(
    op: &dyn LinearOperator,
    k: usize,
    opts: &LanczosOptions,
    seed: u64,
) -> Result<SpectralBasis> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= nL, got k={k} with nL={n}"
        )));
    }
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "eigensolver tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // keep start vectors apart from the streams used for initial conditions
    rng.set_stream(1);
    let mut pairs = thick_restart_lanczos(op, k, &[], opts, &mut rng)?;

    // completeness: a larger eigenvalue hiding in the complement of the
    // found vectors (repeated eigenvalues) replaces the current smallest
    for _ in 0..n.saturating_sub(k) {
        let deflate: Vec<Vec<f64>> = pairs.iter().map(|p| p.vector.clone()).collect();
        let candidate = thick_restart_lanczos(op, 1, &deflate, opts, &mut rng)?.remove(0);
        let scale = pairs.iter().fold(candidate.value.abs(), |s, p| s.max(p.value.abs()));
        let smallest = pairs[k - 1].value;
        if candidate.value <= smallest + opts.tol * scale {
            break;
        }
        pairs.pop();
        let pos = pairs.partition_point(|p| p.value >= candidate.value);
        pairs.insert(pos, candidate);
    }

    let mut eigenvectors = DMatrix::zeros(n, k);
    for (j, p) in pairs.iter().enumerate() {
        eigenvectors.column_mut(j).copy_from_slice(&p.vector);
    }
    Ok(SpectralBasis {
        eigenvalues: pairs.iter().map(|p| p.value).collect(),
        eigenvectors,
        residuals: pairs.iter().map(|p| p.residual).collect(),
        operator: op.kind(),
        shift: 0.0,
    })
}

/// Spectral basis of the method's diffusion operator.
///
/// For [`Method::Mpbtv`] the `k` smallest eigenpairs of `L + K` are found as
/// the largest of `sigma I - (L + K)`; stored eigenvalues are `-lambda_i(L+K)`.
/// For [`Method::Dgfm3`] the `k` largest eigenpairs of `M` are returned.
pub fn basis_for_method(
    method: Method,
    net: &MultiplexNetwork,
    deg: &DegreeData,
    gamma: &[f64],
    k: usize,
    opts: &LanczosOptions,
    seed: u64,
) -> Result<SpectralBasis> {
    match method {
        Method::Mpbtv => {
            let (op, sigma) = shifted_neg_lk(net, deg, gamma)?;
            let mut basis = largest_eigenpairs(&op, k, opts, seed)?;
            for v in &mut basis.eigenvalues {
                *v -= sigma;
            }
            basis.shift = sigma;
            Ok(basis)
        }
        Method::Dgfm3 => {
            let op = ModularityMatrix::new(net, deg, gamma)?;
            largest_eigenpairs(&op, k, opts, seed)
        }
    }
}

/// Identifies the operator a cached basis belongs to.
pub fn basis_fingerprint(net: &MultiplexNetwork, gamma: &[f64], method: Method) -> String {
    let mut hasher = Sha256::new();
    hasher.update(method.as_str().as_bytes());
    hasher.update(format_network(net).as_bytes());
    hasher.update(format_coupling(net).as_bytes());
    hasher.update(format!("omega={}\n", net.omega()).as_bytes());
    for g in gamma {
        hasher.update(format!("gamma={g}\n").as_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

const CACHE_MAGIC: &str = "#spectral-basis v1";

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join("\t")
}

/// TSV cache of a basis; floats use shortest round-trip formatting so a
/// reloaded basis is bit-identical.
pub fn format_basis_cache(basis: &SpectralBasis, fingerprint: &str) -> String {
    let mut out = String::new();
    out.push_str(CACHE_MAGIC);
    out.push('\n');
    out.push_str(&format!("operator\t{}\n", basis.operator));
    out.push_str(&format!("fingerprint\t{fingerprint}\n"));
    out.push_str(&format!("shift\t{}\n", basis.shift));
    out.push_str(&format!("rows\t{}\n", basis.dim()));
    out.push_str(&format!("k\t{}\n", basis.k()));
    out.push_str(&format!("eigenvalues\t{}\n", join(basis.eigenvalues.iter().copied())));
    out.push_str(&format!("residuals\t{}\n", join(basis.residuals.iter().copied())));
    for row in basis.eigenvectors.row_iter() {
        out.push_str(&join(row.iter().copied()));
        out.push('\n');
    }
    out
}

pub fn save_basis_cache(basis: &SpectralBasis, fingerprint: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_basis_cache(basis, fingerprint)).map_err(|e| Error::io(path, e))
}

/// Parses a cache and returns the basis with its fingerprint.
pub fn parse_basis_cache(text: &str, path: &Path) -> Result<(SpectralBasis, String)> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut field = |name: &str| -> Result<(usize, String)> {
        let (no, line) = lines.next().ok_or_else(|| err(0, format!("missing '{name}' line")))?;
        if name == CACHE_MAGIC {
            return if line == CACHE_MAGIC {
                Ok((no, String::new()))
            } else {
                Err(err(no, "not a spectral basis cache".into()))
            };
        }
        match line.split_once('\t') {
            Some((key, value)) if key == name => Ok((no, value.to_string())),
            _ => Err(err(no, format!("expected '{name}'"))),
        }
    };
    let parse_f64 = |no: usize, s: &str| s.parse::<f64>().map_err(|_| err(no, format!("invalid number '{s}'")));
    let parse_usize = |no: usize, s: &str| s.parse::<usize>().map_err(|_| err(no, format!("invalid count '{s}'")));

    field(CACHE_MAGIC)?;
    let (no, op) = field("operator")?;
    let operator = OperatorKind::parse(&op).ok_or_else(|| err(no, format!("unknown operator '{op}'")))?;
    let (_, fingerprint) = field("fingerprint")?;
    let (no, shift) = field("shift")?;
    let shift = parse_f64(no, &shift)?;
    let (no, rows) = field("rows")?;
    let rows = parse_usize(no, &rows)?;
    let (no, k) = field("k")?;
    let k = parse_usize(no, &k)?;
    let mut vector = |name: &str| -> Result<Vec<f64>> {
        let (no, values) = field(name)?;
        let v = values
            .split('\t')
            .map(|s| parse_f64(no, s))
            .collect::<Result<Vec<_>>>()?;
        if v.len() != k {
            return Err(err(no, format!("expected {k} {name}, found {}", v.len())));
        }
        Ok(v)
    };
    let eigenvalues = vector("eigenvalues")?;
    let residuals = vector("residuals")?;

    let mut eigenvectors = DMatrix::zeros(rows, k);
    for r in 0..rows {
        let (no, line) = lines
            .next()
            .ok_or_else(|| err(0, format!("expected {rows} vector rows")))?;
        let values = line.split('\t').map(|s| parse_f64(no, s)).collect::<Result<Vec<_>>>()?;
        if values.len() != k {
            return Err(err(no, format!("expected {k} columns, found {}", values.len())));
        }
        for (c, v) in values.into_iter().enumerate() {
            eigenvectors[(r, c)] = v;
        }
    }
    Ok((
        SpectralBasis {
            eigenvalues,
            eigenvectors,
            residuals,
            operator,
            shift,
        },
        fingerprint,
    ))
}

pub fn load_basis_cache(path: impl AsRef<Path>) -> Result<(SpectralBasis, String)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_basis_cache(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::SupraLaplacian;
    use crate::sparse::CsrMatrix;

    fn complete_graph(n: usize) -> MultiplexNetwork {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0)));
        MultiplexNetwork::with_all_to_all(n, vec![CsrMatrix::from_undirected_edges(n, edges)], 0.0).unwrap()
    }

    #[test]
    fn complete_graph_laplacian_triple_eigenvalue() {
        // L(K_4) has spectrum {0, 4, 4, 4}
        let net = complete_graph(4);
        let deg = net.degrees();
        let lap = SupraLaplacian::new(&net, &deg).unwrap();
        let basis = largest_eigenpairs(&lap, 3, &LanczosOptions::default(), 1).unwrap();
        for v in &basis.eigenvalues {
            assert!((v - 4.0).abs() < 1e-10, "{v}");
        }
        assert!(basis.orthonormality_error() < 1e-8);
        // the three vectors must be orthogonal to the constant vector
        for j in 0..3 {
            assert!(basis.eigenvectors.column(j).sum().abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_k() {
        let net = complete_graph(4);
        let deg = net.degrees();
        let lap = SupraLaplacian::new(&net, &deg).unwrap();
        assert!(largest_eigenpairs(&lap, 0, &LanczosOptions::default(), 0).is_err());
        assert!(largest_eigenpairs(&lap, 5, &LanczosOptions::default(), 0).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let n = 80;
        let path = CsrMatrix::from_undirected_edges(n, (0..n - 1).map(|i| (i, i + 1, 1.0)));
        let net = MultiplexNetwork::with_all_to_all(n, vec![path], 0.0).unwrap();
        let deg = net.degrees();
        let m = ModularityMatrix::new(&net, &deg, &[1.0]).unwrap();
        let opts = LanczosOptions {
            tol: 1e-300,
            max_restarts: 2,
            ..LanczosOptions::default()
        };
        match largest_eigenpairs(&m, 2, &opts, 0) {
            Err(Error::NoConvergence {
                restarts,
                wanted,
                residuals,
                ..
            }) => {
                assert_eq!(restarts, 2);
                assert_eq!(wanted, 2);
                assert_eq!(residuals.len(), 2);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_garbage_cache() {
        assert!(parse_basis_cache("nope", Path::new("x")).is_err());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("MPBTV".parse::<Method>().unwrap(), Method::Mpbtv);
        assert_eq!("dgfm3".parse::<Method>().unwrap(), Method::Dgfm3);
        assert!("louvain".parse::<Method>().is_err());
    }

    #[test]
    fn cache_round_trip_is_exact() {
        let net = complete_graph(6);
        let deg = net.degrees();
        let basis = basis_for_method(Method::Mpbtv, &net, &deg, &[1.0], 3, &LanczosOptions::default(), 3).unwrap();
        let text = format_basis_cache(&basis, "abc");
        let (back, fp) = parse_basis_cache(&text, Path::new("mem")).unwrap();
        assert_eq!(fp, "abc");
        assert_eq!(back, basis);
    }
}

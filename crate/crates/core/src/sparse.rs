//! Compressed sparse row storage for symmetric, non-negative layer adjacencies.

use std::collections::BTreeMap;

/// Square CSR matrix. Column indices are sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n: usize) -> Self {
        CsrMatrix {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a symmetric matrix from undirected edges `(u, v, w)`.
    ///
    /// Weights of repeated edges are summed on the canonical pair `(min, max)`
    /// before mirroring, so both triangles hold bit-identical values. Entries
    /// that sum to exactly zero are dropped. Callers validate indices and signs.
    pub fn from_undirected_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut canon: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            debug_assert!(u < n && v < n);
            let key = if u <= v { (u, v) } else { (v, u) };
            *canon.entry(key).or_insert(0.0) += w;
        }

        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(u, v), &w) in &canon {
            if w == 0.0 {
                continue;
            }
            rows[u].push((v, w));
            if u != v {
                rows[v].push((u, w));
            }
        }

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, w) in row {
                col_idx.push(c);
                values.push(w);
            }
            row_ptr.push(col_idx.len());
        }

        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries (both triangles).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// All stored entries `(i, j, w)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, w)| (i, j, w)))
    }

    /// Entries of the upper triangle including the diagonal.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries().filter(|&(i, j, _)| i <= j)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, w)| w).sum()).collect()
    }

    /// `y = self * x`, overwriting `y`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row(i).map(|(j, w)| w * x[j]).sum();
        }
    }

    /// `y += self * x`.
    pub fn mul_vec_add(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi += self.row(i).map(|(j, w)| w * x[j]).sum::<f64>();
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries().all(|(i, j, w)| self.get(j, i).to_bits() == w.to_bits())
    }
}

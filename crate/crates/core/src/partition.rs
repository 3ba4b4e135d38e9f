use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Hard assignment of every node-layer pair to one of `n_c` communities.
///
/// Labels are 0-based in memory and 1-based in files. Empty communities are
/// allowed; [`Partition::communities_used`] reports the non-empty count.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
    n_communities: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, n_communities: usize) -> Result<Self> {
        if let Some((row, &c)) = labels.iter().enumerate().find(|(_, &c)| c >= n_communities) {
            return Err(Error::InvalidLabels(format!(
                "row {row} has label {} outside 1..={n_communities}",
                c + 1
            )));
        }
        Ok(Partition { labels, n_communities })
    }

    /// Partition with `n_communities` set to one past the largest label.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let n_communities = labels.iter().max().map_or(0, |&m| m + 1);
        Partition { labels, n_communities }
    }

    pub fn single_community(len: usize) -> Self {
        Partition {
            labels: vec![0; len],
            n_communities: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, row: usize) -> usize {
        self.labels[row]
    }

    pub fn n_communities(&self) -> usize {
        self.n_communities
    }

    pub fn community_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_communities];
        for &c in &self.labels {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn communities_used(&self) -> usize {
        self.community_sizes().iter().filter(|&&s| s > 0).count()
    }

    /// One-hot matrix `U` of shape `len x n_c`.
    pub fn one_hot(&self) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(self.labels.len(), self.n_communities);
        for (row, &c) in self.labels.iter().enumerate() {
            u[(row, c)] = 1.0;
        }
        u
    }

    /// Indicator vector of community `c`.
    pub fn indicator(&self, c: usize) -> Vec<f64> {
        self.labels.iter().map(|&l| if l == c { 1.0 } else { 0.0 }).collect()
    }

    /// Number of rows whose labels differ.
    pub fn changed_rows(&self, other: &Partition) -> usize {
        self.labels.iter().zip(&other.labels).filter(|(a, b)| a != b).count()
    }
}

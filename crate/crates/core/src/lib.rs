//! Community detection for undirected, weighted multiplex networks.
//!
//! Partitions of node-layer pairs are found by an MBO scheme: repeated
//! diffusion with a truncated spectral matrix exponential followed by
//! row-wise thresholding. Two diffusion operators are available:
//! `-(L + K)` (balanced total variation flow, [`Method::Mpbtv`]) and the
//! modularity matrix `M` ([`Method::Dgfm3`]).
//!
//! ```
//! use multiplex_mbo::{detect, CsrMatrix, DetectConfig, Method, MultiplexNetwork};
//!
//! let tri = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)];
//! let layer = CsrMatrix::from_undirected_edges(6, tri);
//! let net = MultiplexNetwork::with_all_to_all(6, vec![layer.clone(), layer], 1.0).unwrap();
//! let deg = net.degrees();
//! let config = DetectConfig::new(Method::Dgfm3, vec![1.0, 1.0], 2, 2);
//! let found = detect(&net, &deg, &config).unwrap();
//! assert!(found.best.modularity > 0.4);
//! ```

pub mod eigen;
pub mod error;
pub mod io;
pub mod mbo;
pub mod metrics;
pub mod network;
pub mod operators;
pub mod oracle;
pub mod partition;
pub mod sparse;

pub use eigen::{basis_for_method, largest_eigenpairs, LanczosOptions, Method, SpectralBasis};
pub use error::{Error, Result};
pub use mbo::{detect, detect_with_basis, mbo_run, DetectConfig, Detection, RunResult};
pub use metrics::{evaluate, matched_accuracy, multiplex_modularity, nmi, EvalReport};
pub use network::{DegreeData, MultiplexNetwork};
pub use operators::{LinearOperator, OperatorKind};
pub use oracle::oracle_max_modularity;
pub use partition::Partition;
pub use sparse::CsrMatrix;

use multiplex_mbo::eigen::{format_basis_cache, parse_basis_cache, SpectralBasis};
use multiplex_mbo::io::load_network;
use multiplex_mbo::operators::{gershgorin_bound, SupraLaplacian};
use multiplex_mbo::{
    basis_for_method, largest_eigenpairs, CsrMatrix, Error, LanczosOptions, LinearOperator, Method, MultiplexNetwork,
};
use multiplex_mbo_testkit::{
    dense_eigen_desc, random_gamma, random_instance, subspace_distance, Instance, InstanceShape,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

fn florentine() -> MultiplexNetwork {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/florentine.mpx");
    load_network(path, None, 1.0).unwrap()
}

/// Compares a basis against the leading part of a dense decomposition:
/// eigenvalues to `1e-8` times the spectral radius, and each cluster of close eigenvalues as a
/// subspace.
fn check_against_dense(basis: &SpectralBasis, dense: &DMatrix<f64>, label: &str) {
    let (values, vectors) = dense_eigen_desc(dense);
    let k = basis.k();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for (i, (found, expected)) in basis.eigenvalues.iter().zip(&values).enumerate() {
        let err = (found - expected).abs();
        assert!(
            err <= 1e-8 * scale,
            "{label}: eigenvalue {i} off by {err:e} (scale {scale})"
        );
    }
    // clusters separated by gaps of at least 1e-3 * scale
    let gap = 1e-3 * scale;
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < values.len() && values[end - 1] - values[end] < gap {
            end += 1;
        }
        let cols = end.min(k) - start;
        let found = basis.eigenvectors.columns(start, cols).into_owned();
        let reference = vectors.columns(start, end - start).into_owned();
        let dist = subspace_distance(&found, &reference);
        assert!(dist <= 1e-5, "{label}: cluster {start}..{end} distance {dist:e}");
        if end - start == 1 {
            let overlap = found.column(0).dot(&reference.column(0)).abs();
            assert!(overlap >= 1.0 - 1e-6, "{label}: vector {start} overlap {overlap}");
        }
        start = end;
    }
    assert!(basis.orthonormality_error() <= 1e-8, "{label}");
}

fn neg_lk(inst: &Instance, gamma: &[f64]) -> DMatrix<f64> {
    -(inst.laplacian() + inst.balance_k(gamma))
}

#[test]
fn random_spectra_match_dense_oracle() {
    let shape = InstanceShape {
        max_n: 66,
        max_layers: 3,
        edge_prob: 0.12,
        all_to_all: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..24 {
        let inst = random_instance(&mut rng, shape);
        let gamma = random_gamma(&mut rng, inst.num_layers());
        let net = inst.network();
        let deg = net.degrees();
        if deg.total_strength == 0.0 {
            continue;
        }
        let k = rng.random_range(1..=inst.dim().min(12) - 1).max(1);
        let opts = LanczosOptions::default();
        let lk = basis_for_method(Method::Mpbtv, &net, &deg, &gamma, k, &opts, trial).unwrap();
        check_against_dense(&lk, &neg_lk(&inst, &gamma), &format!("lk trial {trial}"));
        let m = basis_for_method(Method::Dgfm3, &net, &deg, &gamma, k, &opts, trial).unwrap();
        check_against_dense(&m, &inst.modularity_matrix(&gamma), &format!("mod trial {trial}"));
        for basis in [&lk, &m] {
            let bound = opts.tol * basis.scale();
            assert!(
                basis.residuals.iter().all(|&r| r <= bound),
                "trial {trial}: {:?}",
                basis.residuals
            );
        }
    }
}

#[test]
fn repeated_eigenvalues_are_all_found() {
    // five disjoint triangles: the Laplacian has 0 five times and 3 ten times
    let edges: Vec<_> = (0..5)
        .flat_map(|t| {
            let b = 3 * t;
            [(b, b + 1, 1.0), (b + 1, b + 2, 1.0), (b, b + 2, 1.0)]
        })
        .collect();
    let net = MultiplexNetwork::with_all_to_all(15, vec![CsrMatrix::from_undirected_edges(15, edges)], 0.0).unwrap();
    let deg = net.degrees();
    let lap = SupraLaplacian::new(&net, &deg).unwrap();
    let basis = largest_eigenpairs(&lap, 12, &LanczosOptions::default(), 4).unwrap();
    for (i, v) in basis.eigenvalues.iter().enumerate() {
        let expected = if i < 10 { 3.0 } else { 0.0 };
        assert!((v - expected).abs() < 1e-8 * 3.0, "{i}: {v}");
    }
    check_against_dense(&basis, &lap.to_dense(), "triangles");
}

#[test]
fn full_basis_is_available() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inst = random_instance(
        &mut rng,
        InstanceShape {
            max_n: 12,
            ..InstanceShape::default()
        },
    );
    let gamma = random_gamma(&mut rng, inst.num_layers());
    let net = inst.network();
    let deg = net.degrees();
    let basis = basis_for_method(
        Method::Dgfm3,
        &net,
        &deg,
        &gamma,
        inst.dim(),
        &LanczosOptions::default(),
        0,
    )
    .unwrap();
    check_against_dense(&basis, &inst.modularity_matrix(&gamma), "full");
}

/// Connected networks with all-to-all coupling: layer 1 contains a path
/// through every physical node.
fn connected_instance(rng: &mut ChaCha8Rng) -> Instance {
    let shape = InstanceShape {
        max_n: 25,
        max_layers: 3,
        edge_prob: 0.2,
        all_to_all: true,
    };
    let mut inst = random_instance(rng, shape);
    inst.omega = 1.0;
    for j in 1..inst.n {
        inst.layers[0].push((j - 1, j, 0.5));
    }
    inst
}

#[test]
fn lk_is_positive_definite_without_isolated_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for trial in 0..20 {
        let inst = connected_instance(&mut rng);
        let gamma = random_gamma(&mut rng, inst.num_layers());
        let net = inst.network();
        let deg = net.degrees();
        let sigma = gershgorin_bound(&net, &deg, &gamma);
        let basis = basis_for_method(Method::Mpbtv, &net, &deg, &gamma, 3, &LanczosOptions::default(), 0).unwrap();
        assert!(basis.eigenvalues.iter().all(|&v| v < 0.0), "trial {trial}");
        assert!(
            -basis.eigenvalues[0] > 1e-8 * sigma,
            "trial {trial}: {}",
            basis.eigenvalues[0]
        );
        assert_eq!(basis.shift, sigma);
    }
}

#[test]
fn isolated_node_gives_zero_eigenvalue() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    for trial in 0..10 {
        let mut inst = connected_instance(&mut rng);
        // node n is added without any intra-layer edge
        inst.n += 1;
        let gamma = random_gamma(&mut rng, inst.num_layers());
        let net = inst.network();
        let deg = net.degrees();
        let sigma = gershgorin_bound(&net, &deg, &gamma);
        let basis = basis_for_method(Method::Mpbtv, &net, &deg, &gamma, 3, &LanczosOptions::default(), 0).unwrap();
        assert!(
            basis.eigenvalues[0].abs() <= 1e-10 * sigma,
            "trial {trial}: {}",
            basis.eigenvalues[0]
        );
        assert!(-basis.eigenvalues[1] > 1e-8 * sigma, "trial {trial}");
        let (dense, _) = dense_eigen_desc(&neg_lk(&inst, &gamma));
        assert!(dense[0] <= 1e-10 * sigma);
    }
}

#[test]
fn florentine_modularity_spectrum_matches_dense() {
    let net = florentine();
    let deg = net.degrees();
    let gamma = [0.6, 0.6];
    let basis = basis_for_method(Method::Dgfm3, &net, &deg, &gamma, 7, &LanczosOptions::default(), 0).unwrap();
    let dense = multiplex_mbo::operators::ModularityMatrix::new(&net, &deg, &gamma)
        .unwrap()
        .to_dense();
    check_against_dense(&basis, &dense, "florentine");
    assert!((basis.eigenvalues[0] - 3.283277452792).abs() < 1e-9);
}

#[test]
fn triangles_modularity_top_eigenvalue_is_positive() {
    let edges = [
        (0, 1, 1.0),
        (1, 2, 1.0),
        (0, 2, 1.0),
        (3, 4, 1.0),
        (4, 5, 1.0),
        (3, 5, 1.0),
    ];
    let net = MultiplexNetwork::with_all_to_all(6, vec![CsrMatrix::from_undirected_edges(6, edges)], 0.0).unwrap();
    let deg = net.degrees();
    let basis = basis_for_method(Method::Dgfm3, &net, &deg, &[1.0], 2, &LanczosOptions::default(), 0).unwrap();
    assert!((basis.eigenvalues[0] - 2.0).abs() < 1e-10);
}

#[test]
fn same_seed_gives_bitwise_identical_basis() {
    let net = florentine();
    let deg = net.degrees();
    let opts = LanczosOptions::default();
    let a = basis_for_method(Method::Mpbtv, &net, &deg, &[0.6, 0.6], 6, &opts, 3).unwrap();
    let b = basis_for_method(Method::Mpbtv, &net, &deg, &[0.6, 0.6], 6, &opts, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn truncation_keeps_leading_columns() {
    let net = florentine();
    let deg = net.degrees();
    let basis = basis_for_method(Method::Dgfm3, &net, &deg, &[0.6, 0.6], 8, &LanczosOptions::default(), 0).unwrap();
    let short = basis.truncated(4).unwrap();
    assert_eq!(short.eigenvalues, basis.eigenvalues[..4]);
    assert_eq!(short.eigenvectors, basis.eigenvectors.columns(0, 4).into_owned());
    assert!(basis.truncated(9).is_err());
}

#[test]
fn cache_round_trip_through_disk() {
    let net = florentine();
    let deg = net.degrees();
    let basis = basis_for_method(Method::Mpbtv, &net, &deg, &[0.6, 0.6], 4, &LanczosOptions::default(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path: PathBuf = dir.path().join("basis.tsv");
    multiplex_mbo::eigen::save_basis_cache(&basis, "abc", &path).unwrap();
    let (loaded, fp) = multiplex_mbo::eigen::load_basis_cache(&path).unwrap();
    assert_eq!(fp, "abc");
    assert_eq!(loaded, basis);
    let text = format_basis_cache(&basis, "abc");
    let truncated_text: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
    assert!(parse_basis_cache(&truncated_text, &path).is_err());
}

#[test]
fn non_convergence_reports_residuals() {
    let net = florentine();
    let deg = net.degrees();
    let opts = LanczosOptions {
        tol: 1e-300,
        max_restarts: 1,
        ..LanczosOptions::default()
    };
    match basis_for_method(Method::Mpbtv, &net, &deg, &[0.6, 0.6], 4, &opts, 0) {
        Err(Error::NoConvergence { wanted, residuals, .. }) => {
            assert_eq!(wanted, 4);
            assert_eq!(residuals.len(), 4);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

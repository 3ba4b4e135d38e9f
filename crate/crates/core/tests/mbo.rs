use multiplex_mbo::io::load_network;
use multiplex_mbo::mbo::{diffusion_step, mbo_run, random_onehot_init, run_rng, threshold};
use multiplex_mbo::{
    basis_for_method, detect, detect_with_basis, oracle_max_modularity, CsrMatrix, DetectConfig, LanczosOptions,
    Method, MultiplexNetwork, Partition, SpectralBasis,
};
use multiplex_mbo_testkit::{expm, random_gamma, random_instance, random_partition, Instance, InstanceShape};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn florentine() -> MultiplexNetwork {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/florentine.mpx");
    load_network(path, None, 1.0).unwrap()
}

fn two_triangles() -> MultiplexNetwork {
    let edges = [
        (0, 1, 1.0),
        (1, 2, 1.0),
        (0, 2, 1.0),
        (3, 4, 1.0),
        (4, 5, 1.0),
        (3, 5, 1.0),
    ];
    MultiplexNetwork::with_all_to_all(6, vec![CsrMatrix::from_undirected_edges(6, edges)], 0.0).unwrap()
}

fn dense_operator(inst: &Instance, method: Method, gamma: &[f64]) -> DMatrix<f64> {
    match method {
        Method::Mpbtv => -(inst.laplacian() + inst.balance_k(gamma)),
        Method::Dgfm3 => inst.modularity_matrix(gamma),
    }
}

#[test]
fn full_basis_diffusion_matches_dense_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let shape = InstanceShape {
        max_n: 33,
        max_layers: 3,
        edge_prob: 0.2,
        all_to_all: false,
    };
    for trial in 0..12 {
        let inst = random_instance(&mut rng, shape);
        let gamma = random_gamma(&mut rng, inst.num_layers());
        let net = inst.network();
        let deg = net.degrees();
        let u = random_partition(&mut rng, inst.dim(), 3).one_hot();
        for method in [Method::Mpbtv, Method::Dgfm3] {
            let basis =
                basis_for_method(method, &net, &deg, &gamma, inst.dim(), &LanczosOptions::default(), 0).unwrap();
            for dt in [0.4, 1.0] {
                let v = diffusion_step(&basis, dt, &u).unwrap();
                let e = expm(&(dense_operator(&inst, method, &gamma) * dt)) * &u;
                let err = (&v - &e).amax() / e.amax().max(1.0);
                assert!(err <= 1e-8, "trial {trial} {method} dt {dt}: {err:e}");
            }
        }
    }
}

#[test]
fn zero_spectrum_diffusion_is_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let q = nalgebra::linalg::QR::new(DMatrix::<f64>::from_fn(10, 3, |i, j| {
        ((i * 7 + j * 3) % 5) as f64 - 2.0
    }))
    .q();
    let basis = SpectralBasis {
        eigenvalues: vec![0.0; 3],
        eigenvectors: q.clone(),
        residuals: vec![0.0; 3],
        operator: multiplex_mbo::OperatorKind::SupraLaplacian,
        shift: 0.0,
    };
    let u = random_partition(&mut rng, 10, 2).one_hot();
    let proj = &q * (q.transpose() * &u);
    for dt in [0.0, 1.0, 7.5] {
        assert!((diffusion_step(&basis, dt, &u).unwrap() - &proj).amax() < 1e-14);
    }
}

#[test]
fn triangles_recovered_from_every_unbalanced_start() {
    let net = two_triangles();
    let deg = net.degrees();
    for method in [Method::Mpbtv, Method::Dgfm3] {
        let mut cfg = DetectConfig::new(method, vec![1.0], 2, 2);
        cfg.n_runs = 1;
        let basis = basis_for_method(method, &net, &deg, &cfg.gamma, 2, &cfg.eig, 0).unwrap();
        for code in 0..64usize {
            let labels: Vec<usize> = (0..6).map(|i| (code >> i) & 1).collect();
            let in_a = labels[..3].iter().sum::<usize>();
            let in_b = labels[3..].iter().sum::<usize>();
            // the leading eigenvector only sees the difference of label counts
            if in_a == in_b {
                continue;
            }
            let u0 = Partition::new(labels.clone(), 2).unwrap();
            let r = mbo_run(&basis, &cfg, &net, &deg, u0, 0).unwrap();
            assert_eq!(r.modularity, 0.5, "{method} from {labels:?}");
            assert!(r.converged);
        }
    }
}

#[test]
fn triangles_detect_attains_oracle_value() {
    let net = two_triangles();
    let deg = net.degrees();
    let oracle = oracle_max_modularity(&net, &deg, &[1.0], 2).unwrap();
    for method in [Method::Mpbtv, Method::Dgfm3] {
        let cfg = DetectConfig::new(method, vec![1.0], 2, 2);
        let d = detect(&net, &deg, &cfg).unwrap();
        assert_eq!(d.best.modularity, oracle.q_max);
        assert_eq!(d.best.modularity, 0.5);
    }
}

#[test]
fn detect_never_beats_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let shape = InstanceShape {
        max_n: 5,
        max_layers: 2,
        edge_prob: 0.5,
        all_to_all: false,
    };
    let mut checked = 0;
    while checked < 30 {
        let inst = random_instance(&mut rng, shape);
        let net = inst.network();
        let deg = net.degrees();
        if deg.total_strength == 0.0 || inst.dim() < 2 || inst.dim() > 10 {
            continue;
        }
        let gamma = random_gamma(&mut rng, inst.num_layers());
        let oracle = oracle_max_modularity(&net, &deg, &gamma, 2).unwrap();
        for method in [Method::Mpbtv, Method::Dgfm3] {
            let mut cfg = DetectConfig::new(method, gamma.clone(), 2, (inst.dim() / 2).max(1));
            cfg.n_runs = 5;
            cfg.seed = checked as u64;
            let d = detect(&net, &deg, &cfg).unwrap();
            assert!(d.best.modularity <= oracle.q_max + 1e-12);
        }
        checked += 1;
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let net = florentine();
    let deg = net.degrees();
    let mut cfg = DetectConfig::new(Method::Dgfm3, vec![0.6, 0.6], 3, 7);
    cfg.n_runs = 40;
    cfg.seed = 12;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| detect(&net, &deg, &cfg).unwrap())
    };
    let serial = run(1);
    let parallel = run(4);
    assert_eq!(serial.best, parallel.best);
    assert_eq!(serial.runs, parallel.runs);
}

#[test]
fn florentine_reaches_published_modularity() {
    let net = florentine();
    let deg = net.degrees();
    for (method, k) in [(Method::Mpbtv, 4), (Method::Dgfm3, 7)] {
        let mut cfg = DetectConfig::new(method, vec![0.6, 0.6], 3, k);
        cfg.n_runs = 50;
        let d = detect(&net, &deg, &cfg).unwrap();
        assert!(
            (d.best.modularity - 0.681).abs() <= 0.01,
            "{method}: {}",
            d.best.modularity
        );
    }
}

#[test]
fn truncated_basis_gives_same_result_as_direct_basis() {
    let net = florentine();
    let deg = net.degrees();
    let mut cfg = DetectConfig::new(Method::Mpbtv, vec![0.6, 0.6], 3, 4);
    cfg.n_runs = 30;
    let direct = detect(&net, &deg, &cfg).unwrap();
    let wide = basis_for_method(cfg.method, &net, &deg, &cfg.gamma, 8, &cfg.eig, 0).unwrap();
    let via_wide = detect_with_basis(&net, &deg, &wide, &cfg).unwrap();
    assert!((direct.best.modularity - via_wide.best.modularity).abs() <= 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn runs_keep_one_hot_rows_and_exact_modularity(seed in any::<u64>(), n_c in 2usize..5) {
        let net = florentine();
        let deg = net.degrees();
        let mut cfg = DetectConfig::new(Method::Dgfm3, vec![0.6, 0.6], n_c, 5);
        cfg.n_runs = 4;
        cfg.seed = seed;
        let d = detect(&net, &deg, &cfg).unwrap();
        for r in &d.runs {
            let u = r.partition.one_hot();
            for i in 0..u.nrows() {
                prop_assert_eq!(u.row(i).sum(), 1.0);
            }
            let q = multiplex_mbo::multiplex_modularity(&r.partition, &net, &deg, &cfg.gamma).unwrap();
            prop_assert!((q - r.modularity).abs() <= 1e-12);
            prop_assert!(r.modularity <= d.best.modularity);
        }
    }

    #[test]
    fn thresholding_one_hot_is_identity(labels in prop::collection::vec(0usize..5, 1..30)) {
        let p = Partition::new(labels, 5).unwrap();
        prop_assert_eq!(threshold(&p.one_hot()).unwrap(), p);
    }

    #[test]
    fn initialization_is_reproducible(seed in any::<u64>(), run in 0usize..100) {
        let a = random_onehot_init(40, 3, &mut run_rng(seed, run)).unwrap();
        let b = random_onehot_init(40, 3, &mut run_rng(seed, run)).unwrap();
        prop_assert_eq!(a, b);
    }
}

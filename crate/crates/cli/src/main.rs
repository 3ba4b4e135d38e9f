use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use multiplex_mbo::eigen::{basis_fingerprint, load_basis_cache, save_basis_cache, DEFAULT_EIG_TOL};
use multiplex_mbo::io::{load_labels, load_network, load_partition, save_partition};
use multiplex_mbo::mbo::{DEFAULT_DT, DEFAULT_MAX_ITER, DEFAULT_RUNS, DEFAULT_TOL, EIG_SEED};
use multiplex_mbo::{
    basis_for_method, detect_with_basis, evaluate, oracle_max_modularity, DegreeData, DetectConfig, Detection, Error,
    LanczosOptions, Method, MultiplexNetwork, SpectralBasis,
};

#[derive(Parser)]
#[command(name = "mpmbo", version, about = "Community detection in multiplex networks")]
struct Cli {
    /// Worker threads for the independent runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect communities and write the best partition.
    Detect(DetectArgs),
    /// Score a partition, optionally against ground truth.
    Eval(EvalArgs),
    /// Leading eigenvalues of L+K or M.
    Spectrum(SpectrumArgs),
    /// Exhaustive modularity maximum of a tiny network.
    Oracle(OracleArgs),
    /// Best modularity over a grid of community counts and truncations.
    Grid(GridArgs),
}

#[derive(Args)]
struct NetArgs {
    /// Network file.
    #[arg(long)]
    input: PathBuf,
    /// Layer coupling file (default: all layers coupled with weight 1).
    #[arg(long)]
    coupling: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// One value for every layer, or a comma-separated list with one per layer.
    #[arg(long, default_value = "1")]
    gamma: String,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Mpbtv)]
    method: MethodArg,
    #[arg(long, default_value_t = DEFAULT_DT)]
    dt: f64,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_EIG_TOL)]
    eig_tol: f64,
    /// Spectral basis cache; read when it covers the request, written otherwise.
    #[arg(long)]
    basis_cache: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    nc: usize,
    #[arg(long)]
    k: usize,
    /// Partition output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    net: NetArgs,
    /// Partition file as written by `detect`.
    #[arg(long)]
    partition: PathBuf,
    /// Ground-truth labels.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, value_enum, default_value_t = OperatorArg::Lk)]
    operator: OperatorArg,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_EIG_TOL)]
    eig_tol: f64,
    /// Eigenvalue table output (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also store the basis for later `detect` or `grid` calls.
    #[arg(long)]
    basis_cache: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    net: NetArgs,
    #[arg(long)]
    nc: usize,
    /// Optimal partition output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Community counts, as `2,3,4` or `2:4`.
    #[arg(long)]
    nc_range: String,
    /// Truncations, as `4,8` or `2:6`.
    #[arg(long)]
    k_range: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Mpbtv,
    Dgfm3,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Mpbtv => Method::Mpbtv,
            MethodArg::Dgfm3 => Method::Dgfm3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OperatorArg {
    /// Smallest eigenvalues of L + K.
    Lk,
    /// Largest eigenvalues of the modularity matrix.
    Mod,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(msg) => Failure::Usage(msg),
            other => Failure::Runtime(other),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Grid(a) => cmd_grid(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// At least 15 significant digits.
fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..15).contains(&mag) {
        format!("{:.*}", (14 - mag) as usize, x)
    } else {
        format!("{x:.14e}")
    }
}

fn parse_gamma(text: &str, layers: usize) -> Result<Vec<f64>, Failure> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Failure::Usage(format!("invalid --gamma '{text}'")))?;
    match values.len() {
        1 => Ok(vec![values[0]; layers]),
        len if len == layers => Ok(values),
        len => Err(Failure::Usage(format!(
            "--gamma has {len} values, network has {layers} layers"
        ))),
    }
}

fn parse_range(text: &str, flag: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::Usage(format!("invalid {flag} '{text}'"));
    let mut values = Vec::new();
    for part in text.split(',') {
        match part.split_once(':') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                values.extend(a..=b);
            }
            None => values.push(part.trim().parse().map_err(|_| bad())?),
        }
    }
    values.sort_unstable();
    values.dedup();
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

struct Loaded {
    net: MultiplexNetwork,
    deg: DegreeData,
    gamma: Vec<f64>,
}

fn load(args: &NetArgs) -> Result<Loaded, Failure> {
    let net = load_network(&args.input, args.coupling.as_deref(), args.omega)?;
    let gamma = parse_gamma(&args.gamma, net.num_layers())?;
    multiplex_mbo::network::validate_gamma(&gamma, net.num_layers())?;
    let deg = net.degrees();
    Ok(Loaded { net, deg, gamma })
}

fn emit(text: &str, out: Option<&Path>) -> CmdResult {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| {
            Failure::Runtime(Error::Io {
                path: path.to_path_buf(),
                source: e,
            })
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn config(run: &RunArgs, gamma: Vec<f64>, n_c: usize, k: usize) -> DetectConfig {
    let mut c = DetectConfig::new(run.method.into(), gamma, n_c, k);
    c.dt = run.dt;
    c.max_iter = run.max_iter;
    c.tol = run.tol;
    c.n_runs = run.runs;
    c.seed = run.seed;
    c.eig = LanczosOptions {
        tol: run.eig_tol,
        ..LanczosOptions::default()
    };
    c
}

/// Basis with at least `k` eigenpairs, from the cache when possible.
/// Returns the basis and the seconds spent computing it.
fn obtain_basis(
    data: &Loaded,
    method: Method,
    k: usize,
    eig: &LanczosOptions,
    cache: Option<&Path>,
) -> Result<(SpectralBasis, f64), Failure> {
    let fingerprint = basis_fingerprint(&data.net, &data.gamma, method);
    if let Some(path) = cache.filter(|p| p.exists()) {
        let (basis, stored) = load_basis_cache(path)?;
        if stored != fingerprint {
            return Err(Failure::Runtime(Error::CacheMismatch(format!(
                "{} was computed for a different network, resolution or method",
                path.display()
            ))));
        }
        if basis.k() >= k {
            return Ok((basis, 0.0));
        }
    }
    let start = Instant::now();
    let basis = basis_for_method(method, &data.net, &data.deg, &data.gamma, k, eig, EIG_SEED)?;
    let seconds = start.elapsed().as_secs_f64();
    if let Some(path) = cache {
        save_basis_cache(&basis, &fingerprint, path)?;
    }
    Ok((basis, seconds))
}

fn summary(detection: &Detection, config: &DetectConfig, offline: f64) -> String {
    let qs = detection.modularities();
    let mean = qs.iter().sum::<f64>() / qs.len() as f64;
    let min = qs.iter().copied().fold(f64::INFINITY, f64::min);
    let best = &detection.best;
    let online = detection.online.as_secs_f64();
    let mut s = String::new();
    let mut row = |key: &str, value: String| {
        let _ = writeln!(s, "{key}\t{value}");
    };
    row("method", config.method.to_string());
    row("n_c", config.n_c.to_string());
    row("k", config.k.to_string());
    row("runs", config.n_runs.to_string());
    row("seed", config.seed.to_string());
    row("best_run", best.run_index.to_string());
    row("best_modularity", num(best.modularity));
    row("communities_detected", best.partition.communities_used().to_string());
    row("best_iterations", best.iterations.to_string());
    row("best_converged", best.converged.to_string());
    row("modularity_mean", num(mean));
    row("modularity_min", num(min));
    row(
        "runs_converged",
        detection.runs.iter().filter(|r| r.converged).count().to_string(),
    );
    row("offline_seconds", num(offline));
    row("online_seconds", num(online));
    row("seconds_per_run", num(online / config.n_runs as f64));
    s.push('\n');
    s.push_str("run\tmodularity\titerations\tconverged\n");
    for r in &detection.runs {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            r.run_index,
            num(r.modularity),
            r.iterations,
            r.converged
        );
    }
    s
}

fn cmd_detect(args: DetectArgs) -> CmdResult {
    let data = load(&args.net)?;
    let config = config(&args.run, data.gamma.clone(), args.nc, args.k);
    config.validate(&data.net)?;
    let (basis, offline) = obtain_basis(
        &data,
        config.method,
        config.k,
        &config.eig,
        args.run.basis_cache.as_deref(),
    )?;
    let detection = detect_with_basis(&data.net, &data.deg, &basis, &config)?;
    if let Some(out) = &args.out {
        save_partition(&detection.best.partition, data.net.n(), out)?;
    }
    print!("{}", summary(&detection, &config, offline));
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let data = load(&args.net)?;
    let partition = load_partition(&args.partition, data.net.n(), data.net.num_layers())?;
    let truth = args.truth.as_ref().map(|t| load_labels(t, &data.net)).transpose()?;
    let report = evaluate(&partition, &data.net, &data.deg, &data.gamma, truth.as_ref())?;
    println!("modularity\t{}", num(report.modularity));
    println!("communities\t{}", report.n_communities_detected);
    if let (Some(acc), Some(nmi)) = (report.accuracy, report.nmi) {
        println!("accuracy\t{}", num(acc));
        println!("nmi\t{}", num(nmi));
    }
    if let Some(matching) = report.matching {
        println!();
        println!("detected\ttruth");
        for (d, t) in matching {
            println!("{}\t{}", d + 1, t + 1);
        }
    }
    Ok(())
}

fn cmd_spectrum(args: SpectrumArgs) -> CmdResult {
    let data = load(&args.net)?;
    let method = match args.operator {
        OperatorArg::Lk => Method::Mpbtv,
        OperatorArg::Mod => Method::Dgfm3,
    };
    let eig = LanczosOptions {
        tol: args.eig_tol,
        ..LanczosOptions::default()
    };
    let start = Instant::now();
    let basis = basis_for_method(method, &data.net, &data.deg, &data.gamma, args.k, &eig, EIG_SEED)?;
    let seconds = start.elapsed().as_secs_f64();
    if let Some(path) = &args.basis_cache {
        save_basis_cache(&basis, &basis_fingerprint(&data.net, &data.gamma, method), path)?;
    }
    let mut s = String::new();
    let _ = writeln!(s, "index\teigenvalue\tresidual");
    for (i, (&value, &res)) in basis.eigenvalues.iter().zip(&basis.residuals).enumerate() {
        // stored values for L + K are negated
        let value = if method == Method::Mpbtv { -value } else { value };
        let _ = writeln!(s, "{}\t{}\t{}", i + 1, num(value), num(res));
    }
    emit(&s, args.out.as_deref())?;
    eprintln!("operator\t{}", basis.operator);
    eprintln!("seconds\t{}", num(seconds));
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> CmdResult {
    let data = load(&args.net)?;
    let result = oracle_max_modularity(&data.net, &data.deg, &data.gamma, args.nc)?;
    println!("q_max\t{}", num(result.q_max));
    println!("communities\t{}", result.partition.communities_used());
    println!("assignments_visited\t{}", result.visited);
    match &args.out {
        Some(path) => save_partition(&result.partition, data.net.n(), path)?,
        None => {
            println!();
            print!(
                "{}",
                multiplex_mbo::io::format_partition(&result.partition, data.net.n())
            );
        }
    }
    Ok(())
}

fn cmd_grid(args: GridArgs) -> CmdResult {
    let data = load(&args.net)?;
    let ncs = parse_range(&args.nc_range, "--nc-range")?;
    let ks = parse_range(&args.k_range, "--k-range")?;
    let k_max = *ks.last().expect("non-empty range");
    let base = config(&args.run, data.gamma.clone(), ncs[0], k_max);
    for &n_c in &ncs {
        for &k in &ks {
            config(&args.run, data.gamma.clone(), n_c, k).validate(&data.net)?;
        }
    }
    let (basis, offline) = obtain_basis(&data, base.method, k_max, &base.eig, args.run.basis_cache.as_deref())?;

    println!("n_c\tk\tbest_modularity\tbest_run\tcommunities_detected\tmodularity_mean");
    let mut best: Option<(usize, usize, f64)> = None;
    for &n_c in &ncs {
        for &k in &ks {
            let cfg = config(&args.run, data.gamma.clone(), n_c, k);
            let d = detect_with_basis(&data.net, &data.deg, &basis, &cfg)?;
            let qs = d.modularities();
            let mean = qs.iter().sum::<f64>() / qs.len() as f64;
            println!(
                "{n_c}\t{k}\t{}\t{}\t{}\t{}",
                num(d.best.modularity),
                d.best.run_index,
                d.best.partition.communities_used(),
                num(mean)
            );
            if best.is_none_or(|(_, _, q)| d.best.modularity > q) {
                best = Some((n_c, k, d.best.modularity));
            }
        }
    }
    let (n_c, k, q) = best.expect("non-empty grid");
    println!();
    println!("recommended_n_c\t{n_c}");
    println!("recommended_k\t{k}");
    println!("recommended_modularity\t{}", num(q));
    println!("offline_seconds\t{}", num(offline));
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use robust_admm::harness::{
    constants_json, constants_table, prepare, run_experiment, sweep, sweep_csv, trace_csv, write_outputs, Algo,
    ErrorSpec, ExperimentConfig, PenaltySpec, ProblemKind, SweepGrid, TopologySpec,
};
use robust_admm::AdmmError;

const EXIT_RUNTIME: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_BOUND: u8 = 3;

#[derive(Parser)]
#[command(name = "robust-admm", version, about = "Decentralized ADMM with unreliable agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decentralized least squares.
    Regression(RunArgs),
    /// Decentralized smoothed-hinge classifier.
    Svm(RunArgs),
    /// Print rate constants for an instance.
    Theory(RunArgs),
    /// Grid over algorithm, penalty, and error mean.
    Sweep(SweepArgs),
    /// Rerun, check determinism and every applicable bound.
    Verify(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Path,
    Ring,
    Complete,
    Star,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum ErrorArg {
    None,
    Gaussian,
    Bounded,
    Decay,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Regression,
    Svm,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Admm,
    Road,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    problem: Option<ProblemArg>,
    #[arg(long, value_enum)]
    topology: Option<TopologyArg>,
    /// Explicit edges as `0-1,1-2,…`.
    #[arg(long)]
    edges: Option<String>,
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long)]
    topology_seed: Option<u64>,
    #[arg(long)]
    agents: Option<usize>,
    /// Penalty value or `opt`.
    #[arg(long)]
    c: Option<String>,
    /// Iteration budget.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    #[arg(long)]
    unreliable: Option<usize>,
    #[arg(long, value_enum)]
    errors: Option<ErrorArg>,
    #[arg(long)]
    mu_b: Option<f64>,
    #[arg(long)]
    sigma_b: Option<f64>,
    #[arg(long)]
    e_cap: Option<f64>,
    #[arg(long)]
    e0: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    /// CSV of `k,agent,components…` rows.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Sets the data, error, and selection seeds at once.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    error_seed: Option<u64>,
    #[arg(long)]
    pick_seed: Option<u64>,
    #[arg(long)]
    c_svm: Option<f64>,
    /// Hinge smoothing width.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',', default_value = "admm,road")]
    algos: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "opt")]
    cs: Vec<String>,
    #[arg(long = "mu-bs", value_delimiter = ',', default_value = "0,0.5,1")]
    mu_bs: Vec<f64>,
}

fn invalid(msg: impl Into<String>) -> AdmmError {
    AdmmError::InvalidConfig(msg.into())
}

fn parse_edges(s: &str) -> Result<Vec<(usize, usize)>, AdmmError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (a, b) = p.trim().split_once('-').ok_or_else(|| invalid(format!("edge {p:?} is not `i-j`")))?;
            let a = a.trim().parse().map_err(|_| invalid(format!("bad agent index in {p:?}")))?;
            let b = b.trim().parse().map_err(|_| invalid(format!("bad agent index in {p:?}")))?;
            Ok((a, b))
        })
        .collect()
}

fn parse_algo(s: &str) -> Result<Algo, AdmmError> {
    match s.trim() {
        "admm" => Ok(Algo::Admm),
        "road" => Ok(Algo::Road),
        other => Err(invalid(format!("unknown algorithm {other:?} (expected admm or road)"))),
    }
}

fn build_config(args: &RunArgs, default_problem: ProblemKind) -> Result<ExperimentConfig, AdmmError> {
    let problem = args.problem.map(|p| match p {
        ProblemArg::Regression => ProblemKind::Regression,
        ProblemArg::Svm => ProblemKind::Svm,
    });
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| AdmmError::Io(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => match problem.unwrap_or(default_problem) {
            ProblemKind::Regression => ExperimentConfig::regression(),
            ProblemKind::Svm => ExperimentConfig::svm(),
        },
    };
    if let Some(p) = problem {
        cfg.problem = p;
    }
    if let Some(s) = args.seed {
        cfg.data_seed = s;
        cfg.error_seed = s;
        cfg.pick_seed = s;
    }
    if let Some(s) = args.data_seed {
        cfg.data_seed = s;
    }
    if let Some(s) = args.error_seed {
        cfg.error_seed = s;
    }
    if let Some(s) = args.pick_seed {
        cfg.pick_seed = s;
    }
    if let Some(d) = args.agents {
        cfg.agents = d;
    }
    let (cur_p, cur_seed) = match cfg.topology {
        TopologySpec::Random { p, seed } => (p, seed),
        _ => (0.5, cfg.data_seed),
    };
    if let Some(t) = args.topology {
        cfg.topology = match t {
            TopologyArg::Path => TopologySpec::Path,
            TopologyArg::Ring => TopologySpec::Ring,
            TopologyArg::Complete => TopologySpec::Complete,
            TopologyArg::Star => TopologySpec::Star,
            TopologyArg::Random => TopologySpec::Random { p: cur_p, seed: cur_seed },
        };
    }
    if args.edge_prob.is_some() || args.topology_seed.is_some() {
        match &mut cfg.topology {
            TopologySpec::Random { p, seed } => {
                if let Some(x) = args.edge_prob {
                    *p = x;
                }
                if let Some(x) = args.topology_seed {
                    *seed = x;
                }
            }
            _ => return Err(invalid("--edge-prob and --topology-seed need the random topology")),
        }
    }
    if let Some(e) = &args.edges {
        cfg.topology = TopologySpec::Explicit { edges: parse_edges(e)? };
    }
    if let Some(c) = &args.c {
        cfg.c = c.parse::<PenaltySpec>()?;
    }
    if let Some(t) = args.t {
        cfg.t = t;
    }
    if let Some(a) = args.algo {
        cfg.algo = match a {
            AlgoArg::Admm => Algo::Admm,
            AlgoArg::Road => Algo::Road,
        };
    }
    if let Some(m) = args.unreliable {
        cfg.unreliable = m;
    }
    let (mut mu_b, mut sigma_b) = match cfg.errors {
        ErrorSpec::Gaussian { mu_b, sigma_b } => (mu_b, sigma_b),
        _ => (1.0, 1.5),
    };
    mu_b = args.mu_b.unwrap_or(mu_b);
    sigma_b = args.sigma_b.unwrap_or(sigma_b);
    let kind = args.errors.or(if args.mu_b.is_some() || args.sigma_b.is_some() {
        Some(ErrorArg::Gaussian)
    } else if args.e_cap.is_some() {
        Some(ErrorArg::Bounded)
    } else if args.e0.is_some() || args.rate.is_some() {
        Some(ErrorArg::Decay)
    } else {
        None
    });
    match kind {
        Some(ErrorArg::None) => cfg.errors = ErrorSpec::None,
        Some(ErrorArg::Gaussian) => cfg.errors = ErrorSpec::Gaussian { mu_b, sigma_b },
        Some(ErrorArg::Bounded) => cfg.errors = ErrorSpec::Bounded { e_cap: args.e_cap.unwrap_or(1.0) },
        Some(ErrorArg::Decay) => {
            cfg.errors = ErrorSpec::LinearDecay { e0: args.e0.unwrap_or(1.0), rate: args.rate.unwrap_or(0.5) }
        }
        None => {
            if let ErrorSpec::Gaussian { .. } = cfg.errors {
                cfg.errors = ErrorSpec::Gaussian { mu_b, sigma_b };
            }
        }
    }
    if let Some(p) = &args.script {
        cfg.errors = ErrorSpec::Scripted { path: p.display().to_string() };
    }
    if let Some(x) = args.c_svm {
        cfg.c_svm = x;
    }
    if let Some(x) = args.mu {
        cfg.mu = x;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn is_validation(e: &AdmmError) -> bool {
    matches!(
        e,
        AdmmError::DisconnectedGraph { .. }
            | AdmmError::InvalidEdge(..)
            | AdmmError::InvalidTopology(_)
            | AdmmError::InvalidConfig(_)
            | AdmmError::MajorityViolated(_)
            | AdmmError::DomainError(_)
            | AdmmError::NotStronglyConvex(_)
            | AdmmError::Parse(_)
            | AdmmError::DimensionMismatch { .. }
    )
}

fn fail(e: AdmmError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if is_validation(&e) { EXIT_VALIDATION } else { EXIT_RUNTIME })
}

fn cmd_run(args: &RunArgs, problem: ProblemKind) -> Result<ExitCode, AdmmError> {
    let mut args = args.clone();
    args.problem.get_or_insert(match problem {
        ProblemKind::Regression => ProblemArg::Regression,
        ProblemKind::Svm => ProblemArg::Svm,
    });
    let cfg = build_config(&args, problem)?;
    let out = run_experiment(&cfg)?;
    write_outputs(&args.out, &out)?;
    let last = out.trace.records.last().expect("trace has the initial record");
    println!(
        "{} c={:.6} T={} final_gap={:.6e} plateau={:.6e} flags={} -> {}",
        cfg.algo.name(),
        out.prepared.c,
        cfg.t,
        last.f_gap.abs(),
        out.trace.plateau(),
        out.trace.flag_events.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_theory(args: &RunArgs) -> Result<ExitCode, AdmmError> {
    let cfg = build_config(args, ProblemKind::Regression)?;
    let prep = prepare(&cfg)?;
    print!("{}", constants_table(&prep));
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("constants.json"), constants_json(&prep)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode, AdmmError> {
    let cfg = build_config(&args.run, ProblemKind::Regression)?;
    let grid = SweepGrid {
        algos: args.algos.iter().map(|a| parse_algo(a)).collect::<Result<_, _>>()?,
        penalties: args.cs.iter().map(|c| c.parse()).collect::<Result<_, _>>()?,
        mu_bs: args.mu_bs.clone(),
    };
    let rows = sweep(&cfg, &grid)?;
    let csv = sweep_csv(&rows);
    std::fs::create_dir_all(&args.run.out)?;
    std::fs::write(args.run.out.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &RunArgs) -> Result<ExitCode, AdmmError> {
    let cfg = build_config(args, ProblemKind::Regression)?;
    let first = run_experiment(&cfg)?;
    let second = run_experiment(&cfg)?;
    write_outputs(&args.out, &first)?;
    let mut ok = true;
    if trace_csv(&first.trace) != trace_csv(&second.trace) {
        println!("FAIL determinism: repeated runs differ");
        ok = false;
    } else {
        println!("ok   determinism");
    }
    for rep in &first.reports {
        match rep.first_violation {
            Some(k) => {
                ok = false;
                println!("FAIL {:<20} first violation at k={} (min slack {:.3e})", rep.name, k, rep.min_slack);
            }
            None => println!("ok   {:<20} min slack {:.3e}", rep.name, rep.min_slack),
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_BOUND) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Regression(a) => cmd_run(a, ProblemKind::Regression),
        Command::Svm(a) => cmd_run(a, ProblemKind::Svm),
        Command::Theory(a) => cmd_theory(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
    };
    res.unwrap_or_else(fail)
}

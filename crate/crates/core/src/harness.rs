//! Instance synthesis, experiment configuration, runs, and file output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use crate::operators::symmetric_eigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::costs::{estimate_constants, GlobalCostProfile, LeastSquaresCost, SharedCost, SmoothedHingeSvmCost};
use crate::engine::{run, AdmmConfig, Problem, Trace};
use crate::error::{AdmmError, Result};
use crate::errors::{pick_unreliable_with_majority, ErrorKind, ErrorModel};
use crate::operators::Topology;
use crate::road::run_road;
use crate::theory::{
    contraction_report, convex_report, average_consensus_report, road_threshold, theorem5_report,
    tuned_params, BoundReport, TheoryConstants, TheoryInputs,
};

/// Per-agent measurement models for decentralized least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionInstance {
    pub b: Vec<DMatrix<f64>>,
    pub y: Vec<DVector<f64>>,
    pub x_true: DVector<f64>,
}

impl RegressionInstance {
    pub fn costs(&self) -> Result<Vec<SharedCost>> {
        self.b
            .iter()
            .zip(&self.y)
            .map(|(b, y)| Ok(Arc::new(LeastSquaresCost::new(b.clone(), y.clone())?) as SharedCost))
            .collect()
    }

    /// Condition number of `Σ_i B_iᵀB_i`.
    pub fn normal_condition_number(&self) -> f64 {
        let n = self.x_true.len();
        let h = self.b.iter().fold(DMatrix::zeros(n, n), |acc, b| acc + b.transpose() * b);
        let e = symmetric_eigen(&h).eigenvalues;
        e.max() / e.min()
    }
}

/// `B_i` with standard normal entries, `x ~ N(0, I)`, `y_i = B_i x + N(0, I)` noise.
pub fn synth_regression(seed: u64, agents: usize, n: usize) -> RegressionInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let b: Vec<DMatrix<f64>> = (0..agents).map(|_| DMatrix::from_fn(n, n, |_, _| normal())).collect();
    let x_true = DVector::from_fn(n, |_, _| normal());
    let y = b.iter().map(|bi| bi * &x_true + DVector::from_fn(n, |_, _| normal())).collect();
    RegressionInstance { b, y, x_true }
}

/// Labeled planar points sharded across agents.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmInstance {
    pub shards: Vec<(Vec<DVector<f64>>, Vec<f64>)>,
}

impl SvmInstance {
    pub fn costs(&self, c_svm: f64, mu: f64) -> Result<Vec<SharedCost>> {
        self.shards
            .iter()
            .map(|(f, l)| Ok(Arc::new(SmoothedHingeSvmCost::new(f.clone(), l.clone(), c_svm, mu)?) as SharedCost))
            .collect()
    }
}

/// Mean of the positive class.
pub const SVM_POSITIVE_MEAN: [f64; 2] = [2.8, 2.8];

/// Each shard holds equal counts of `+1 ~ N([2.8, 2.8], I)` and `−1 ~ N(0, I)`.
pub fn synth_svm(seed: u64, agents: usize, samples: usize) -> Result<SvmInstance> {
    if agents == 0 || samples % (2 * agents) != 0 {
        return Err(AdmmError::InvalidConfig(format!(
            "{samples} samples cannot be split into balanced shards for {agents} agents"
        )));
    }
    let per_class = samples / (2 * agents);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shards = Vec::with_capacity(agents);
    for _ in 0..agents {
        let mut feats = Vec::with_capacity(2 * per_class);
        let mut labels = Vec::with_capacity(2 * per_class);
        for _ in 0..per_class {
            let p = DVector::from_fn(2, |r, _| SVM_POSITIVE_MEAN[r] + Distribution::<f64>::sample(&StandardNormal, &mut rng));
            feats.push(p);
            labels.push(1.0);
            let q = DVector::from_fn(2, |_, _| Distribution::<f64>::sample(&StandardNormal, &mut rng));
            feats.push(q);
            labels.push(-1.0);
        }
        shards.push((feats, labels));
    }
    Ok(SvmInstance { shards })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum TopologySpec {
    Path,
    Ring,
    Complete,
    Star,
    Random { p: f64, seed: u64 },
    Explicit { edges: Vec<(usize, usize)> },
}

impl TopologySpec {
    pub fn build(&self, agents: usize, n: usize) -> Result<Topology> {
        match self {
            TopologySpec::Path => Topology::path(agents, n),
            TopologySpec::Ring => Topology::ring(agents, n),
            TopologySpec::Complete => Topology::complete(agents, n),
            TopologySpec::Star => Topology::star(agents, n),
            TopologySpec::Random { p, seed } => Topology::random_connected(agents, n, *p, *seed),
            TopologySpec::Explicit { edges } => Topology::new(agents, n, edges),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Regression,
    Svm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Admm,
    Road,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::Admm => "admm",
            Algo::Road => "road",
        }
    }
}

/// A numeric penalty or `"opt"` for the tuned one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltySpec {
    Opt,
    Value(f64),
}

impl std::str::FromStr for PenaltySpec {
    type Err = AdmmError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("opt") {
            return Ok(PenaltySpec::Opt);
        }
        let v: f64 = s.parse().map_err(|_| AdmmError::InvalidConfig(format!("penalty {s:?} is neither \"opt\" nor a number")))?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(AdmmError::InvalidConfig(format!("penalty {v} must be positive")));
        }
        Ok(PenaltySpec::Value(v))
    }
}

impl std::fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PenaltySpec::Opt => write!(f, "opt"),
            PenaltySpec::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for PenaltySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PenaltySpec::Opt => s.serialize_str("opt"),
            PenaltySpec::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for PenaltySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            S(String),
            N(f64),
        }
        match Raw::deserialize(d)? {
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::N(v) => format!("{v}").parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorSpec {
    None,
    Gaussian { mu_b: f64, sigma_b: f64 },
    Bounded { e_cap: f64 },
    LinearDecay { e0: f64, rate: f64 },
    Scripted { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub topology: TopologySpec,
    pub agents: usize,
    pub dim: usize,
    pub c: PenaltySpec,
    pub t: usize,
    pub algo: Algo,
    pub unreliable: usize,
    pub errors: ErrorSpec,
    pub data_seed: u64,
    pub error_seed: u64,
    pub pick_seed: u64,
    pub svm_samples: usize,
    pub c_svm: f64,
    pub mu: f64,
    pub theory: TheoryInputs,
}

/// Seed shared by every default configuration.
pub const DEFAULT_SEED: u64 = 42;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::regression()
    }
}

impl ExperimentConfig {
    pub fn regression() -> Self {
        Self {
            problem: ProblemKind::Regression,
            topology: TopologySpec::Random { p: 0.5, seed: DEFAULT_SEED },
            agents: 10,
            dim: 3,
            c: PenaltySpec::Opt,
            t: 300,
            algo: Algo::Admm,
            unreliable: 3,
            errors: ErrorSpec::Gaussian { mu_b: 1.0, sigma_b: 1.5 },
            data_seed: DEFAULT_SEED,
            error_seed: DEFAULT_SEED,
            pick_seed: DEFAULT_SEED,
            svm_samples: 1000,
            c_svm: 1.0,
            mu: 0.1,
            theory: TheoryInputs::default(),
        }
    }

    pub fn svm() -> Self {
        Self {
            problem: ProblemKind::Svm,
            c: PenaltySpec::Value(0.35),
            t: 500,
            errors: ErrorSpec::Gaussian { mu_b: 0.0, sigma_b: 1.5 },
            ..Self::regression()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents < 2 {
            return Err(AdmmError::InvalidConfig("need at least 2 agents".into()));
        }
        if self.dim == 0 {
            return Err(AdmmError::InvalidConfig("dimension must be positive".into()));
        }
        if self.problem == ProblemKind::Svm && self.dim != 3 {
            return Err(AdmmError::InvalidConfig("svm variables are (w ∈ ℝ², b), so dim must be 3".into()));
        }
        if self.unreliable > self.agents {
            return Err(AdmmError::InvalidConfig(format!(
                "{} unreliable agents exceed {} agents",
                self.unreliable, self.agents
            )));
        }
        if let PenaltySpec::Value(c) = self.c {
            if !(c > 0.0) {
                return Err(AdmmError::InvalidConfig(format!("penalty {c} must be positive")));
            }
        }
        Ok(())
    }

    fn error_kind(&self) -> Result<ErrorKind> {
        Ok(match &self.errors {
            ErrorSpec::None => ErrorKind::None,
            ErrorSpec::Gaussian { mu_b, sigma_b } => ErrorKind::Gaussian { mu_b: *mu_b, sigma_b: *sigma_b },
            ErrorSpec::Bounded { e_cap } => ErrorKind::Bounded { e_cap: *e_cap },
            ErrorSpec::LinearDecay { e0, rate } => ErrorKind::LinearDecay { e0: *e0, rate: *rate },
            ErrorSpec::Scripted { .. } => ErrorKind::None,
        })
    }
}

/// A built instance before any run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub problem: Problem,
    pub profile: GlobalCostProfile,
    pub constants: Option<TheoryConstants>,
    pub c: f64,
    pub unreliable: Vec<usize>,
    pub model: ErrorModel,
    pub threshold: f64,
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    cfg.validate()?;
    let topology = cfg.topology.build(cfg.agents, cfg.dim)?;
    let costs = match cfg.problem {
        ProblemKind::Regression => synth_regression(cfg.data_seed, cfg.agents, cfg.dim).costs()?,
        ProblemKind::Svm => synth_svm(cfg.data_seed, cfg.agents, cfg.svm_samples)?.costs(cfg.c_svm, cfg.mu)?,
    };
    Problem::new(&topology, costs)
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let problem = build_problem(cfg)?;
    let profile = estimate_constants(&problem.costs, &problem.ops, &problem.x_star)?;
    let spectra = problem.ops.spectra;
    let tuned = if profile.v > 0.0 { Some(tuned_params(&spectra, profile.v, profile.l, &cfg.theory)?) } else { None };
    let c = match (cfg.c, &tuned) {
        (PenaltySpec::Value(c), _) => c,
        (PenaltySpec::Opt, Some(k)) => k.c_opt,
        (PenaltySpec::Opt, None) => {
            return Err(AdmmError::InvalidConfig(
                "the tuned penalty needs a strongly convex cost; pass a numeric c".into(),
            ))
        }
    };
    let threshold = road_threshold(&spectra, profile.v1, profile.v2, c)?;
    let constants = match tuned {
        Some(k) => {
            let r_star = crate::theory::compute_r_star(&problem.ops, &problem.grad_star, k.c_opt)?;
            let z0 = problem.x_star_stacked.norm_squared();
            let u = road_threshold(&spectra, profile.v1, profile.v2, k.c_opt)?;
            Some(k.with_initial_distances(z0, r_star.norm_squared()).with_threshold(u))
        }
        None => None,
    };
    let topo = problem.topology();
    let unreliable = pick_unreliable_with_majority(topo, cfg.unreliable, cfg.pick_seed)?;
    let model = match &cfg.errors {
        ErrorSpec::Scripted { path } => {
            let f = fs::File::open(path).map_err(|e| AdmmError::Io(format!("{path}: {e}")))?;
            ErrorModel::scripted_from_csv(topo.agents(), topo.dim(), &unreliable, f)?
        }
        _ => ErrorModel::new(topo.agents(), topo.dim(), &unreliable, cfg.error_kind()?, cfg.error_seed)?,
    };
    Ok(Prepared { problem, profile, constants, c, unreliable, model, threshold })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub prepared: Prepared,
    pub trace: Trace,
    pub reports: Vec<BoundReport>,
}

impl ExperimentOutput {
    pub fn violations(&self) -> Vec<&BoundReport> {
        self.reports.iter().filter(|r| r.violated()).collect()
    }
}

/// Reports whose hypotheses the run satisfies.
pub fn applicable_reports(cfg: &ExperimentConfig, prep: &Prepared, trace: &Trace) -> Result<Vec<BoundReport>> {
    let problem = &prep.problem;
    let mut out = Vec::new();
    let mut ident = BoundReport::new("identity_residual");
    for r in trace.records.iter().filter(|r| r.k >= 1) {
        ident.push(r.k, crate::engine::IDENTITY_TOL, r.lemma1_residual);
    }
    out.push(ident);
    if trace.record_every != 1 {
        return Ok(out);
    }
    let robust_flags = trace.flag_events.len();
    if cfg.algo == Algo::Admm || robust_flags == 0 {
        let cr = convex_report(trace, problem)?;
        out.push(cr.last_iterate);
        out.push(cr.averaged);
    }
    if cfg.algo == Algo::Road {
        out.push(theorem5_report(trace, problem, prep.threshold)?);
    }
    if prep.model.is_error_free() {
        out.push(average_consensus_report(trace, problem, prep.profile.v1, prep.profile.v2)?);
    }
    if let Some(k) = &prep.constants {
        if k.feasible && (k.c_opt - prep.c).abs() <= 1e-12 * k.c_opt && robust_flags == 0 {
            let cr = contraction_report(trace, k, problem)?;
            out.push(cr.linear);
            out.push(cr.linear_alt);
            out.push(cr.single_step);
        }
    }
    Ok(out)
}

pub fn run_prepared(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Trace> {
    let mut admm = AdmmConfig::new(prep.c, cfg.t);
    admm.verify_identities = false;
    match cfg.algo {
        Algo::Admm => run(&prep.problem, &admm, &prep.model),
        Algo::Road => run_road(&prep.problem, &admm, &prep.model, prep.threshold),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let prepared = prepare(cfg)?;
    let trace = run_prepared(cfg, &prepared)?;
    let reports = applicable_reports(cfg, &prepared, &trace)?;
    Ok(ExperimentOutput { config: cfg.clone(), prepared, trace, reports })
}

/// Exact header of the trace CSV.
pub const TRACE_HEADER: &str = "k,f_gap,consensus_violation,g_dist,lemma1_residual,flags,plateau_window";

fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn trace_csv(trace: &Trace) -> String {
    let start = trace.plateau_start();
    let mut s = String::new();
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for (idx, r) in trace.records.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.k,
            num(r.f_gap.abs()),
            num(r.consensus_violation),
            num(r.g_dist),
            num(r.lemma1_residual),
            r.flags,
            u8::from(idx >= start)
        );
    }
    s
}

pub fn bounds_csv(reports: &[BoundReport]) -> String {
    let mut s = String::from("report,k,bound,measured,slack\n");
    for rep in reports {
        for e in &rep.entries {
            let _ = writeln!(s, "{},{},{},{},{}", rep.name, e.k, num(e.bound), num(e.measured), num(e.slack));
        }
    }
    s
}

pub fn flags_csv(trace: &Trace) -> String {
    let mut s = String::from("k,i,j,statistic,U\n");
    for e in &trace.flag_events {
        let _ = writeln!(s, "{},{},{},{},{}", e.k, e.i, e.j, num(e.statistic), num(e.u));
    }
    s
}

pub fn plot_csv(trace: &Trace, problem: &Problem) -> String {
    let mut s = String::from("series,k,value\n");
    for r in &trace.records {
        let _ = writeln!(s, "f_gap,{},{}", r.k, num(r.f_gap.abs()));
    }
    for (k, g) in trace.running_average_gaps(problem) {
        let _ = writeln!(s, "running_average_gap,{},{}", k, num(g.abs()));
    }
    for r in &trace.records {
        let _ = writeln!(s, "consensus_violation,{},{}", r.k, num(r.consensus_violation));
    }
    for r in &trace.records {
        let _ = writeln!(s, "g_dist,{},{}", r.k, num(r.g_dist));
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsDoc<'a> {
    pub penalty: f64,
    pub profile: &'a GlobalCostProfile,
    pub spectra: &'a crate::operators::Spectra,
    pub unreliable: &'a [usize],
    pub threshold: f64,
    pub edges: usize,
    pub theory: Option<&'a TheoryConstants>,
}

pub fn constants_json(prep: &Prepared) -> Result<String> {
    let doc = ConstantsDoc {
        penalty: prep.c,
        profile: &prep.profile,
        spectra: &prep.problem.ops.spectra,
        unreliable: &prep.unreliable,
        threshold: prep.threshold,
        edges: prep.problem.topology().edge_count(),
        theory: prep.constants.as_ref(),
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Writes `trace.csv`, `bounds.csv`, `flags.csv`, `plot.csv`, and `constants.json`.
pub fn write_outputs(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trace.csv"), trace_csv(&out.trace))?;
    fs::write(dir.join("bounds.csv"), bounds_csv(&out.reports))?;
    fs::write(dir.join("flags.csv"), flags_csv(&out.trace))?;
    fs::write(dir.join("plot.csv"), plot_csv(&out.trace, &out.prepared.problem))?;
    fs::write(dir.join("constants.json"), constants_json(&out.prepared)?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub algos: Vec<Algo>,
    pub penalties: Vec<PenaltySpec>,
    pub mu_bs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub algo: Algo,
    pub penalty: PenaltySpec,
    pub c: f64,
    pub mu_b: f64,
    pub final_gap: f64,
    pub plateau: f64,
    pub running_average_gap: f64,
    pub iterations_to_tol: Option<usize>,
    pub flags: usize,
}

/// Gap threshold behind `iterations_to_tol`.
pub const SWEEP_TOL: f64 = 1e-4;

/// One run per `(algo, penalty, μ_b)`; `μ_b = 0` means no unreliable errors.
pub fn sweep(base: &ExperimentConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    if grid.algos.is_empty() || grid.penalties.is_empty() || grid.mu_bs.is_empty() {
        return Err(AdmmError::InvalidConfig("sweep grid has an empty axis".into()));
    }
    let sigma_b = match base.errors {
        ErrorSpec::Gaussian { sigma_b, .. } => sigma_b,
        _ => 1.5,
    };
    let mut rows = Vec::new();
    for &algo in &grid.algos {
        for &penalty in &grid.penalties {
            for &mu_b in &grid.mu_bs {
                let mut cfg = base.clone();
                cfg.algo = algo;
                cfg.c = penalty;
                cfg.errors = if mu_b == 0.0 { ErrorSpec::None } else { ErrorSpec::Gaussian { mu_b, sigma_b } };
                let prep = prepare(&cfg)?;
                let trace = run_prepared(&cfg, &prep)?;
                let avg = trace.running_average_gaps(&prep.problem);
                rows.push(SweepRow {
                    algo,
                    penalty,
                    c: prep.c,
                    mu_b,
                    final_gap: trace.records.last().map(|r| r.f_gap.abs()).unwrap_or(f64::NAN),
                    plateau: trace.plateau(),
                    running_average_gap: avg.last().map(|p| p.1.abs()).unwrap_or(f64::NAN),
                    iterations_to_tol: trace.iterations_to(SWEEP_TOL),
                    flags: trace.flag_events.len(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("algo,c,penalty,mu_b,final_gap,plateau,running_average_gap,iterations_to_tol,flags\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.algo.name(),
            num(r.c),
            r.penalty,
            r.mu_b,
            num(r.final_gap),
            num(r.plateau),
            num(r.running_average_gap),
            r.iterations_to_tol.map(|k| k.to_string()).unwrap_or_default(),
            r.flags
        );
    }
    s
}

/// Human-readable constants table.
pub fn constants_table(prep: &Prepared) -> String {
    let mut s = String::new();
    let sp = &prep.problem.ops.spectra;
    let p = &prep.profile;
    let _ = writeln!(s, "{:<22}{}", "agents", prep.problem.topology().agents());
    let _ = writeln!(s, "{:<22}{}", "edges", prep.problem.topology().edge_count());
    let _ = writeln!(s, "{:<22}{:.6e} / {:.6e}", "L+ min / max", sp.l_plus.min_nonzero, sp.l_plus.max);
    let _ = writeln!(s, "{:<22}{:.6e} / {:.6e}", "L- min / max", sp.l_minus.min_nonzero, sp.l_minus.max);
    let _ = writeln!(s, "{:<22}{:.6e} / {:.6e}", "Q min / max", sp.q.min_nonzero, sp.q.max);
    let _ = writeln!(s, "{:<22}{:.6e}", "W max", sp.w.max);
    let _ = writeln!(s, "{:<22}{:.6e}", "v", p.v);
    let _ = writeln!(s, "{:<22}{:.6e}", "L", p.l);
    let _ = writeln!(s, "{:<22}{:.6e}", "V1", p.v1);
    let _ = writeln!(s, "{:<22}{:.6e}", "V2", p.v2);
    let _ = writeln!(s, "{:<22}{:.6e}", "c (used)", prep.c);
    let _ = writeln!(s, "{:<22}{:.6e}", "U", prep.threshold);
    if let Some(k) = &prep.constants {
        let rows: [(&str, f64); 20] = [
            ("lambda1", k.lambda1),
            ("lambda2", k.lambda2),
            ("lambda3", k.lambda3),
            ("lambda4", k.lambda4),
            ("b", k.b),
            ("beta", k.beta),
            ("beta cap 1", k.beta_cap1),
            ("beta cap 2", k.beta_cap2),
            ("delta", k.delta),
            ("delta branch 1", k.delta_branch1),
            ("delta branch 2", k.delta_branch2),
            ("P", k.p),
            ("A", k.a.unwrap_or(f64::NAN)),
            ("A (alt)", k.a_alt.unwrap_or(f64::NAN)),
            ("A1", k.a1),
            ("A2", k.a2),
            ("B", k.rate_b),
            ("C", k.c_const),
            ("c_opt", k.c_opt),
            ("spectral ratio", k.spectral_ratio),
        ];
        for (name, v) in rows {
            let _ = writeln!(s, "{:<22}{:.6e}", name, v);
        }
        let _ = writeln!(s, "{:<22}{:.6e}", "spectral threshold", k.spectral_threshold);
        let _ = writeln!(s, "{:<22}{:.6e}", "cost-only rhs bound", k.cost_only_bound);
        let _ = writeln!(s, "{:<22}{}", "network condition", k.network_condition);
        let _ = writeln!(s, "{:<22}{}", "threshold met", k.threshold_met);
        let _ = writeln!(s, "{:<22}{}", "feasible", k.feasible);
    } else {
        let _ = writeln!(s, "{:<22}{}", "rate constants", "n/a (cost not strongly convex)");
    }
    s
}

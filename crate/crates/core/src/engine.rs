//! Synchronous decentralized ADMM rounds with broadcast errors.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::costs::{centralized_minimizer, stacked_gradient, stacked_value, x_update_solve, SharedCost};
use crate::error::{AdmmError, Result};
use crate::errors::ErrorModel;
use crate::operators::{consensus_vector, ConsensusOperators, Topology};
use crate::theory::compute_r_star;

/// Contract on the relative residual of the per-round identities.
pub const IDENTITY_TOL: f64 = 1e-8;

/// A network instance with its centralized optimum.
#[derive(Debug, Clone)]
pub struct Problem {
    pub ops: ConsensusOperators,
    pub costs: Vec<SharedCost>,
    pub x_star: DVector<f64>,
    pub x_star_stacked: DVector<f64>,
    /// `Σ_i f_i(x*)`.
    pub f_star: f64,
    /// Stacked `∇f(𝟙⊗x*)`.
    pub grad_star: DVector<f64>,
}

impl Problem {
    pub fn new(topology: &Topology, costs: Vec<SharedCost>) -> Result<Self> {
        if costs.len() != topology.agents() {
            return Err(AdmmError::DimensionMismatch { expected: topology.agents(), got: costs.len() });
        }
        let n = topology.dim();
        let ops = ConsensusOperators::new(topology)?;
        let x_star = centralized_minimizer(&costs, n)?;
        let x_star_stacked = consensus_vector(topology.agents(), &x_star);
        let f_star = stacked_value(&costs, n, &x_star_stacked);
        let grad_star = stacked_gradient(&costs, n, &x_star_stacked);
        Ok(Self { ops, costs, x_star, x_star_stacked, f_star, grad_star })
    }

    pub fn topology(&self) -> &Topology {
        &self.ops.topology
    }

    pub fn dim(&self) -> usize {
        self.ops.topology.dim()
    }

    pub fn stacked_dim(&self) -> usize {
        self.ops.stacked_dim()
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        stacked_value(&self.costs, self.dim(), x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        stacked_gradient(&self.costs, self.dim(), x)
    }

    /// `f(x) − f*` with `f` summed over each agent's own copy.
    pub fn gap(&self, x: &DVector<f64>) -> f64 {
        self.value(x) - self.f_star
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub c: f64,
    pub t: usize,
    pub record_every: usize,
    pub verify_identities: bool,
}

impl AdmmConfig {
    pub fn new(c: f64, t: usize) -> Self {
        Self { c, t, record_every: 1, verify_identities: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(AdmmError::InvalidConfig(format!("penalty c = {} must be positive", self.c)));
        }
        if self.record_every == 0 {
            return Err(AdmmError::InvalidConfig("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub k: usize,
    pub x: DVector<f64>,
    pub alpha: DVector<f64>,
    pub z: DVector<f64>,
    /// `e^k`, the error carried by the latest broadcast.
    pub e: DVector<f64>,
    /// `r^k = Σ_{s≤k} Q z^s`.
    pub r: DVector<f64>,
    /// `Σ_{s≤k} z^s`.
    pub z_sum: DVector<f64>,
}

impl NetworkState {
    /// `x⁰ = α⁰ = e⁰ = 0`, `r⁰ = Q z⁰`.
    pub fn initial(problem: &Problem) -> Self {
        let dn = problem.stacked_dim();
        Self::from_consensus(problem, &DVector::zeros(dn))
    }

    /// Starts from `x⁰ = z⁰ = x0`, `α⁰ = 0`; `x0` should be a consensus vector.
    pub fn from_consensus(problem: &Problem, x0: &DVector<f64>) -> Self {
        let dn = problem.stacked_dim();
        Self {
            k: 0,
            x: x0.clone(),
            alpha: DVector::zeros(dn),
            z: x0.clone(),
            e: DVector::zeros(dn),
            r: &problem.ops.q * x0,
            z_sum: x0.clone(),
        }
    }
}

/// Per-agent quantities a round used, for identity checks under substitution.
#[derive(Debug, Clone)]
pub(crate) struct RoundView {
    /// Neighbor sums entering each agent's primal solve.
    pub x_neighbor_sums: Vec<DVector<f64>>,
    /// `d_i z_i^{k+1} − Σ_j z̃_j^{k+1}` per agent.
    pub local_laplacian: Vec<DVector<f64>>,
}

/// One synchronous round; `flagged[arc]` makes the receiver use its own value in place of the sender's.
pub(crate) fn round(
    state: &NetworkState,
    problem: &Problem,
    c: f64,
    model: &ErrorModel,
    flagged: Option<&[bool]>,
) -> Result<(NetworkState, RoundView)> {
    let t = problem.topology();
    let n = t.dim();
    let d = t.agents();
    let k = state.k + 1;
    let is_flagged = |i: usize, j: usize| -> bool {
        match flagged {
            Some(f) => t.arc_index(i, j).map(|a| f[a]).unwrap_or(false),
            None => false,
        }
    };

    let mut x = DVector::zeros(d * n);
    let mut x_neighbor_sums = Vec::with_capacity(d);
    for i in 0..d {
        let own_x = state.x.rows(i * n, n);
        let mut ns = DVector::zeros(n);
        for &j in t.neighbors(i) {
            if is_flagged(i, j) {
                ns += own_x;
            } else {
                ns += state.z.rows(j * n, n);
            }
        }
        let alpha_i = state.alpha.rows(i * n, n).into_owned();
        let z_self = state.z.rows(i * n, n).into_owned();
        let xi = x_update_solve(problem.costs[i].as_ref(), t.degree(i), c, &alpha_i, &ns, &z_self)
            .map_err(|e| match e {
                AdmmError::SolverDivergence { residual, .. } => {
                    AdmmError::SolverDivergence { agent: i, iteration: k, residual }
                }
                other => other,
            })?;
        x.rows_mut(i * n, n).copy_from(&xi);
        x_neighbor_sums.push(ns);
    }

    let e = model.sample(k);
    let z = &x + &e;

    let mut alpha = state.alpha.clone();
    let mut local_laplacian = Vec::with_capacity(d);
    for i in 0..d {
        let own_x = x.rows(i * n, n);
        let mut ns = DVector::zeros(n);
        for &j in t.neighbors(i) {
            if is_flagged(i, j) {
                ns += own_x;
            } else {
                ns += z.rows(j * n, n);
            }
        }
        let lap = (t.degree(i) as f64) * z.rows(i * n, n).into_owned() - ns;
        let mut a = alpha.rows_mut(i * n, n);
        a += c * &lap;
        local_laplacian.push(lap);
    }

    let r = &state.r + &problem.ops.q * &z;
    let z_sum = &state.z_sum + &z;
    Ok((
        NetworkState { k, x, alpha, z, e, r, z_sum },
        RoundView { x_neighbor_sums, local_laplacian },
    ))
}

/// `x`-update with round-start broadcasts, error injection, then the multiplier and `r` updates.
pub fn step(state: &NetworkState, problem: &Problem, config: &AdmmConfig, model: &ErrorModel) -> Result<NetworkState> {
    config.validate()?;
    if state.k >= config.t {
        return Err(AdmmError::InvalidConfig(format!(
            "iteration budget exhausted (k = {}, T = {})",
            state.k, config.t
        )));
    }
    Ok(round(state, problem, config.c, model, None)?.0)
}

/// Relative residual of the closed-form primal update.
pub fn verify_lemma1(next: &NetworkState, prev: &NetworkState, problem: &Problem, c: f64) -> f64 {
    let ops = &problem.ops;
    let grad = problem.gradient(&next.x);
    let inner = grad / (2.0 * c) - 0.5 * (&ops.l_plus * &prev.z) + 0.5 * (&ops.l_minus * &prev.z_sum);
    let res = &next.x + ops.w_inv_apply(&inner);
    res.norm() / (next.x.norm() + 1.0)
}

/// Relative residual of `½L₊(z^{k+1}−z^k) − We^{k+1} + Q(r^{k+1}−r*) + (1/2c)(∇f(x^{k+1}) − ∇f(x*))`.
pub fn verify_lemma2_4(
    next: &NetworkState,
    prev: &NetworkState,
    problem: &Problem,
    c: f64,
    r_star: &DVector<f64>,
) -> f64 {
    let ops = &problem.ops;
    let t1 = 0.5 * (&ops.l_plus * (&next.z - &prev.z));
    let t2 = &ops.w * &next.e;
    let t3 = &ops.q * (&next.r - r_star);
    let t4 = (problem.gradient(&next.x) - &problem.grad_star) / (2.0 * c);
    let scale = 1.0 + t1.norm().max(t2.norm()).max(t3.norm()).max(t4.norm());
    (t1 - t2 + t3 + t4).norm() / scale
}

/// `c‖r‖² + (c/2) xᵀL₊x`.
pub fn g_norm_sq(ops: &ConsensusOperators, c: f64, r: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
    let dn = ops.stacked_dim();
    for v in [r, x] {
        if v.len() != dn {
            return Err(AdmmError::DimensionMismatch { expected: dn, got: v.len() });
        }
    }
    Ok(c * r.norm_squared() + 0.5 * c * x.dot(&(&ops.l_plus * x)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub e: DVector<f64>,
    pub r: DVector<f64>,
    /// Signed `f(x^k) − f*`.
    pub f_gap: f64,
    /// `‖Q x^k‖`.
    pub consensus_violation: f64,
    /// `‖q^k − q*‖²_G` with `q = (r, z)`.
    pub g_dist: f64,
    pub lemma1_residual: f64,
    pub optimality_residual: f64,
    /// Arcs flagged so far (robust runs only).
    pub flags: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlagEvent {
    pub k: usize,
    pub i: usize,
    pub j: usize,
    pub statistic: f64,
    pub u: f64,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub c: f64,
    pub t: usize,
    pub record_every: usize,
    pub r_star: DVector<f64>,
    pub records: Vec<TraceRecord>,
    pub final_state: NetworkState,
    pub flag_events: Vec<FlagEvent>,
    /// Final per-arc deviation statistics (robust runs only).
    pub deviation_stats: Option<Vec<f64>>,
    pub threshold: Option<f64>,
}

impl Trace {
    /// Fails unless every iteration was recorded.
    pub fn require_dense(&self) -> Result<()> {
        if self.record_every != 1 || self.records.len() != self.t + 1 {
            return Err(AdmmError::MissingFields(format!(
                "bound checks need every iteration recorded (record_every = {}, {} of {} records)",
                self.record_every,
                self.records.len(),
                self.t + 1
            )));
        }
        Ok(())
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f_gap).collect()
    }

    /// Index of the first record inside the trailing 20% of iterations.
    pub fn plateau_start(&self) -> usize {
        let cutoff = self.t - self.t.div_ceil(5);
        self.records.iter().position(|r| r.k > cutoff).unwrap_or(self.records.len())
    }

    /// Median `|f(x^k) − f*|` over the trailing 20% of iterations.
    pub fn plateau(&self) -> f64 {
        let mut v: Vec<f64> = self.records[self.plateau_start()..].iter().map(|r| r.f_gap.abs()).collect();
        if v.is_empty() {
            return self.records.last().map(|r| r.f_gap.abs()).unwrap_or(f64::NAN);
        }
        v.sort_by(|a, b| a.total_cmp(b));
        let m = v.len();
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    }

    /// First recorded `k ≥ 1` with `|f(x^k) − f*| < tol`.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.k >= 1 && r.f_gap.abs() < tol).map(|r| r.k)
    }

    /// `f(x̂_T) − f*` for the running average `x̂_T = (1/T)Σ_{k=1}^T x^k`, indexed by `T`.
    pub fn running_average_gaps(&self, problem: &Problem) -> Vec<(usize, f64)> {
        let mut acc = DVector::zeros(problem.stacked_dim());
        let mut out = Vec::new();
        for rec in self.records.iter().filter(|r| r.k >= 1) {
            acc += &rec.x;
            out.push((rec.k, problem.gap(&(&acc / rec.k as f64))));
        }
        out
    }
}

pub(crate) fn make_record(
    problem: &Problem,
    c: f64,
    r_star: &DVector<f64>,
    state: &NetworkState,
    primal: f64,
    optimality: f64,
    flags: usize,
) -> TraceRecord {
    let ops = &problem.ops;
    let dz = &state.z - &problem.x_star_stacked;
    let dr = &state.r - r_star;
    TraceRecord {
        k: state.k,
        x: state.x.clone(),
        z: state.z.clone(),
        e: state.e.clone(),
        r: state.r.clone(),
        f_gap: problem.gap(&state.x),
        consensus_violation: (&ops.q * &state.x).norm(),
        g_dist: c * dr.norm_squared() + 0.5 * c * dz.dot(&(&ops.l_plus * &dz)),
        lemma1_residual: primal,
        optimality_residual: optimality,
        flags,
    }
}

pub(crate) fn check_identities(k: usize, primal: f64, optimality: f64) -> Result<()> {
    if primal > IDENTITY_TOL || optimality > IDENTITY_TOL || !primal.is_finite() || !optimality.is_finite() {
        return Err(AdmmError::IdentityViolation { k, primal, optimality });
    }
    Ok(())
}

/// Runs `T` rounds from [`NetworkState::initial`].
pub fn run(problem: &Problem, config: &AdmmConfig, model: &ErrorModel) -> Result<Trace> {
    run_from(problem, config, model, NetworkState::initial(problem))
}

pub fn run_from(problem: &Problem, config: &AdmmConfig, model: &ErrorModel, init: NetworkState) -> Result<Trace> {
    config.validate()?;
    let c = config.c;
    let r_star = compute_r_star(&problem.ops, &problem.grad_star, c)?;
    let mut state = init;
    let mut records = vec![make_record(problem, c, &r_star, &state, 0.0, 0.0, 0)];
    while state.k < config.t {
        let (next, _) = round(&state, problem, c, model, None)?;
        let l1 = verify_lemma1(&next, &state, problem, c);
        let l2 = verify_lemma2_4(&next, &state, problem, c, &r_star);
        if config.verify_identities {
            check_identities(next.k, l1, l2)?;
        }
        if next.k % config.record_every == 0 {
            records.push(make_record(problem, c, &r_star, &next, l1, l2, 0));
        }
        state = next;
    }
    Ok(Trace {
        c,
        t: config.t,
        record_every: config.record_every,
        r_star,
        records,
        final_state: state,
        flag_events: Vec::new(),
        deviation_stats: None,
        threshold: None,
    })
}

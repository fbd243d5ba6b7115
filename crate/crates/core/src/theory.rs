//! Convergence constants, feasibility conditions, and bound checks over traces.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::engine::{Problem, Trace};
use crate::error::{AdmmError, Result};
use crate::errors::ErrorKind;
use crate::operators::{ConsensusOperators, Spectra};

/// Relative tolerance of every inequality check.
pub const BOUND_REL_TOL: f64 = 1e-7;
/// Absolute floor of every inequality check.
pub const BOUND_ABS_FLOOR: f64 = 1e-12;

/// Squared extremal eigenvalues in the combinations the bounds use.
#[derive(Debug, Clone, Copy)]
struct Sq {
    lp_min: f64,
    lp_max: f64,
    q_min: f64,
    w_max: f64,
}

impl Sq {
    fn of(s: &Spectra) -> Self {
        Self {
            lp_min: s.l_plus.min_nonzero.powi(2),
            lp_max: s.l_plus.max.powi(2),
            q_min: s.q.min_nonzero.powi(2),
            w_max: s.w.max.powi(2),
        }
    }
}

fn require_gt1(name: &str, x: f64) -> Result<()> {
    if x > 1.0 && x.is_finite() {
        Ok(())
    } else {
        Err(AdmmError::DomainError(format!("{name} = {x} must exceed 1")))
    }
}

fn require_pos(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(AdmmError::DomainError(format!("{name} = {x} must be positive")))
    }
}

/// The two arguments of the general contraction-rate minimum.
pub fn delta_branches(
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    c: f64,
    v: f64,
    l: f64,
    spectra: &Spectra,
) -> Result<(f64, f64)> {
    require_gt1("λ1", lambda1)?;
    require_gt1("λ2", lambda2)?;
    require_gt1("λ3", lambda3)?;
    require_pos("c", c)?;
    require_pos("v", v)?;
    require_pos("L", l)?;
    let s = Sq::of(spectra);
    let b1 = (lambda1 - 1.0) * (lambda2 - 1.0) * s.q_min * s.lp_min / (lambda1 * lambda2 * s.lp_max);
    let b2 = 4.0 * v * (lambda2 - 1.0) * (lambda3 - 1.0) * s.q_min
        / (lambda1 * lambda2 * (lambda3 - 1.0) * l * l + c * c * lambda3 * (lambda2 - 1.0) * s.lp_max * s.q_min);
    Ok((b1, b2))
}

pub fn delta_general(
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    c: f64,
    v: f64,
    l: f64,
    spectra: &Spectra,
) -> Result<f64> {
    let (a, b) = delta_branches(lambda1, lambda2, lambda3, c, v, l, spectra)?;
    Ok(a.min(b))
}

/// `δ` after the penalty is tuned to equalize both branches.
pub fn delta_tuned(lambda2: f64, v: f64, l: f64, spectra: &Spectra) -> f64 {
    let s = Sq::of(spectra);
    (lambda2 - 1.0) / lambda2 * 2.0 * v * s.q_min * s.lp_min / (l * l * s.lp_min + 2.0 * v * s.lp_max)
}

pub fn lambda1(v: f64, l: f64, spectra: &Spectra) -> f64 {
    let s = Sq::of(spectra);
    1.0 + 2.0 * v * s.lp_max / (l * l * s.lp_min)
}

pub fn lambda3(beta: f64, lambda1: f64, v: f64, l: f64, spectra: &Spectra) -> f64 {
    let s = Sq::of(spectra);
    1.0 + ((l * l * s.lp_min + 2.0 * v * s.lp_max) / (beta * lambda1 * l * l * v * s.lp_min)).sqrt()
}

pub fn c_opt(lambda1: f64, lambda2: f64, lambda3: f64, l: f64, spectra: &Spectra) -> f64 {
    let s = Sq::of(spectra);
    (lambda1 * lambda2 * (lambda3 - 1.0) * l * l / (lambda3 * (lambda2 - 1.0) * s.lp_max * s.q_min)).sqrt()
}

pub fn beta_cap1(b: f64, delta: f64, lambda4: f64, spectra: &Spectra) -> f64 {
    let s = Sq::of(spectra);
    let g = 1.0 - 1.0 / lambda4;
    b * (1.0 + delta) * s.lp_min * g / (4.0 * b * s.lp_min * g + 16.0 * s.w_max)
}

pub fn beta_cap2(b: f64, delta: f64, spectra: &Spectra) -> f64 {
    let s = Sq::of(spectra);
    ((1.0 - b) * (1.0 + delta) * s.lp_min - s.lp_max) / (4.0 * s.lp_max + 4.0 * (1.0 - b) * s.lp_min)
}

pub fn p_const(c: f64, delta: f64, lambda2: f64, lambda3: f64, spectra: &Spectra) -> f64 {
    let s = Sq::of(spectra);
    c * c * delta * lambda2 * s.w_max / s.q_min + c * c * delta * lambda3 * s.lp_max / 4.0
}

pub fn rate_b(beta: f64, b: f64, delta: f64, spectra: &Spectra) -> f64 {
    let s = Sq::of(spectra);
    (1.0 + 4.0 * beta) * s.lp_max / ((1.0 - b) * (1.0 + delta - 4.0 * beta) * s.lp_min)
}

pub fn const_c(p: f64, beta: f64, c: f64, b: f64, delta: f64, lambda4: f64, spectra: &Spectra) -> f64 {
    let s = Sq::of(spectra);
    (4.0 * p + 2.0 / beta) / (c * c * (1.0 - b) * (1.0 + delta - 4.0 * beta) * s.lp_min)
        + b * (lambda4 - 1.0) / (1.0 - b)
}

pub fn a1_const(b: f64, spectra: &Spectra) -> f64 {
    4.0 / ((1.0 - b) * Sq::of(spectra).lp_min)
}

pub fn a2_const(beta: f64, spectra: &Spectra) -> f64 {
    4.0 / ((1.0 + 4.0 * beta) * Sq::of(spectra).lp_max)
}

/// `(1−b)(1+δ)σ²_min(L₊) > σ²_max(L₊)`.
pub fn network_condition(b: f64, delta: f64, spectra: &Spectra) -> bool {
    let s = Sq::of(spectra);
    (1.0 - b) * (1.0 + delta) * s.lp_min > s.lp_max
}

/// Largest `b` for which the network condition can hold at this `δ`.
pub fn b_max(delta: f64, spectra: &Spectra) -> f64 {
    let s = Sq::of(spectra);
    1.0 - s.lp_max / ((1.0 + delta) * s.lp_min)
}

pub fn spectral_threshold(v: f64, l: f64, lambda2: f64, spectra: &Spectra) -> f64 {
    let s = Sq::of(spectra);
    let l2 = l * l;
    let g = (lambda2 - 1.0) / lambda2;
    4.0 * v / (((l2 + 2.0 * v).powi(2) + 16.0 * v * v * g * s.q_min).sqrt() - l2 + 2.0 * v)
}

pub fn spectral_ratio(spectra: &Spectra) -> f64 {
    let s = Sq::of(spectra);
    s.lp_min / s.lp_max
}

pub fn check_condition9(spectra: &Spectra, v: f64, l: f64, lambda2: f64) -> bool {
    lambda2 > 1.0 && spectral_ratio(spectra) > spectral_threshold(v, l, lambda2, spectra)
}

/// Claimed cost-only upper bound on [`spectral_threshold`].
pub fn cost_only_bound(v: f64, l: f64) -> f64 {
    let r2 = std::f64::consts::SQRT_2;
    4.0 * v / ((r2 - 1.0) * l * l + (2.0 * r2 + 2.0) * v)
}

/// ROAD threshold `U`.
pub fn road_threshold(spectra: &Spectra, v1: f64, v2: f64, c: f64) -> Result<f64> {
    require_pos("V1", v1)?;
    require_pos("V2", v2)?;
    require_pos("c", c)?;
    Ok((spectra.l_plus.max * v1 * v1 + 2.0 * v2 * v2 / (spectra.l_minus.min_nonzero * c * c) + 4.0)
        / (2.0 * std::f64::consts::SQRT_2))
}

/// Error-free bound on `(1/T)Σ_{k=1}^T ‖Q x^k‖`.
pub fn average_consensus_bound(spectra: &Spectra, v1: f64, v2: f64, c: f64, t: usize) -> f64 {
    (spectra.l_plus.max * v1 * v1 + 2.0 * v2 * v2 / (spectra.l_minus.min_nonzero * c * c) + 4.0) / (4.0 * t as f64)
}

/// Minimum-norm `r*` with `Q r* = −(1/2c)∇f(x*)`.
pub fn compute_r_star(ops: &ConsensusOperators, grad_at_xstar: &DVector<f64>, c: f64) -> Result<DVector<f64>> {
    require_pos("c", c)?;
    let t = &ops.topology;
    let n = t.dim();
    if grad_at_xstar.len() != t.stacked_dim() {
        return Err(AdmmError::DimensionMismatch { expected: t.stacked_dim(), got: grad_at_xstar.len() });
    }
    let mut total = DVector::zeros(n);
    for i in 0..t.agents() {
        total += grad_at_xstar.rows(i * n, n);
    }
    let scale = 1.0 + grad_at_xstar.norm();
    if total.norm() > 1e-8 * scale {
        return Err(AdmmError::InconsistentSystem(format!(
            "gradient has consensus component of norm {:e}",
            total.norm()
        )));
    }
    let rhs = -grad_at_xstar / (2.0 * c);
    let r = &ops.q_pinv * &rhs;
    let residual = (&ops.q * &r - &rhs).norm();
    if residual > 1e-9 * (1.0 + rhs.norm()) {
        return Err(AdmmError::InconsistentSystem(format!("pseudo-inverse residual {residual:e}")));
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub b: f64,
    pub lambda4: f64,
    pub lambda2_grid: Vec<f64>,
    pub b_scan: Vec<f64>,
}

impl Default for TheoryInputs {
    fn default() -> Self {
        Self { b: 0.1, lambda4: 2.0, lambda2_grid: default_lambda2_grid(), b_scan: default_b_scan() }
    }
}

/// 60 log-spaced points from 1.01 to 100.
pub fn default_lambda2_grid() -> Vec<f64> {
    let (lo, hi, m) = (1.01f64.ln(), 100f64.ln(), 60);
    (0..m).map(|i| (lo + (hi - lo) * i as f64 / (m - 1) as f64).exp()).collect()
}

/// `0.05, 0.10, …, 0.90`.
pub fn default_b_scan() -> Vec<f64> {
    (1..=18).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub v: f64,
    pub l: f64,
    pub spectra: Spectra,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub b: f64,
    pub beta: f64,
    pub beta_cap1: f64,
    pub beta_cap2: f64,
    pub delta: f64,
    pub delta_branch1: f64,
    pub delta_branch2: f64,
    pub p: f64,
    pub a1: f64,
    pub a2: f64,
    /// `‖z⁰−z*‖² + A₂‖r⁰−r*‖²`.
    pub a: Option<f64>,
    /// `‖z⁰−z*‖² + A₁‖r⁰−r*‖²`.
    pub a_alt: Option<f64>,
    pub rate_b: f64,
    pub c_const: f64,
    pub c_opt: f64,
    pub u: Option<f64>,
    pub network_condition: bool,
    pub threshold_met: bool,
    pub spectral_threshold: f64,
    pub spectral_ratio: f64,
    pub cost_only_bound: f64,
    /// False when the network condition fails and the penalty is only a heuristic.
    pub feasible: bool,
}

impl TheoryConstants {
    pub fn with_initial_distances(mut self, z0_dist_sq: f64, r0_dist_sq: f64) -> Self {
        self.a = Some(z0_dist_sq + self.a2 * r0_dist_sq);
        self.a_alt = Some(z0_dist_sq + self.a1 * r0_dist_sq);
        self
    }

    pub fn with_threshold(mut self, u: f64) -> Self {
        self.u = Some(u);
        self
    }
}

fn validate_inputs(v: f64, l: f64, inputs: &TheoryInputs) -> Result<()> {
    if !(v > 0.0) {
        return Err(AdmmError::NotStronglyConvex(v));
    }
    require_pos("L", l)?;
    if !(inputs.b > 0.0 && inputs.b < 1.0) {
        return Err(AdmmError::DomainError(format!("b = {} must lie in (0, 1)", inputs.b)));
    }
    require_gt1("λ4", inputs.lambda4)?;
    if inputs.lambda2_grid.is_empty() || inputs.lambda2_grid.iter().any(|&x| !(x > 1.0)) {
        return Err(AdmmError::DomainError("λ2 grid must be nonempty with entries above 1".into()));
    }
    Ok(())
}

fn assemble(spectra: &Spectra, v: f64, l: f64, lambda2: f64, b: f64, lambda4: f64, beta_rule: BetaRule) -> Result<TheoryConstants> {
    let delta = delta_tuned(lambda2, v, l, spectra);
    let lam1 = lambda1(v, l, spectra);
    let cap1 = beta_cap1(b, delta, lambda4, spectra);
    let cap2 = beta_cap2(b, delta, spectra);
    let beta = match beta_rule {
        BetaRule::Feasible => cap1.min(0.5 * cap2),
        BetaRule::FirstCapOnly => cap1,
    };
    require_pos("β", beta)?;
    let lam3 = lambda3(beta, lam1, v, l, spectra);
    let c = c_opt(lam1, lambda2, lam3, l, spectra);
    let (d1, d2) = delta_branches(lam1, lambda2, lam3, c, v, l, spectra)?;
    let p = p_const(c, delta, lambda2, lam3, spectra);
    let rb = rate_b(beta, b, delta, spectra);
    let cc = const_c(p, beta, c, b, delta, lambda4, spectra);
    let c8 = network_condition(b, delta, spectra);
    Ok(TheoryConstants {
        v,
        l,
        spectra: *spectra,
        lambda1: lam1,
        lambda2,
        lambda3: lam3,
        lambda4,
        b,
        beta,
        beta_cap1: cap1,
        beta_cap2: cap2,
        delta,
        delta_branch1: d1,
        delta_branch2: d2,
        p,
        a1: a1_const(b, spectra),
        a2: a2_const(beta, spectra),
        a: None,
        a_alt: None,
        rate_b: rb,
        c_const: cc,
        c_opt: c,
        u: None,
        network_condition: c8,
        threshold_met: check_condition9(spectra, v, l, lambda2),
        spectral_threshold: spectral_threshold(v, l, lambda2, spectra),
        spectral_ratio: spectral_ratio(spectra),
        cost_only_bound: cost_only_bound(v, l),
        feasible: c8,
    })
}

#[derive(Debug, Clone, Copy)]
enum BetaRule {
    Feasible,
    FirstCapOnly,
}

/// Constants at a fixed `λ₂`: the default `b` if it satisfies the network condition, else the scan, else half the largest admissible `b`.
pub fn params_at_lambda2(spectra: &Spectra, v: f64, l: f64, inputs: &TheoryInputs, lambda2: f64) -> Result<TheoryConstants> {
    validate_inputs(v, l, inputs)?;
    require_gt1("λ2", lambda2)?;
    let delta = delta_tuned(lambda2, v, l, spectra);
    let b = std::iter::once(inputs.b)
        .chain(inputs.b_scan.iter().copied())
        .find(|&b| b > 0.0 && b < 1.0 && network_condition(b, delta, spectra))
        .or_else(|| {
            let bm = b_max(delta, spectra);
            (bm > 0.0).then_some(0.5 * bm)
        })
        .ok_or_else(|| {
            AdmmError::ConditionInfeasible(format!(
                "spectral ratio {:.6} does not exceed the network threshold at λ2 = {lambda2}",
                spectral_ratio(spectra)
            ))
        })?;
    assemble(spectra, v, l, lambda2, b, inputs.lambda4, BetaRule::Feasible)
}

/// Grid search over `λ₂` for the largest `δ` whose network condition holds.
pub fn optimal_params(spectra: &Spectra, v: f64, l: f64, inputs: &TheoryInputs) -> Result<TheoryConstants> {
    validate_inputs(v, l, inputs)?;
    let mut best: Option<TheoryConstants> = None;
    for &lambda2 in &inputs.lambda2_grid {
        if let Ok(k) = params_at_lambda2(spectra, v, l, inputs, lambda2) {
            if best.as_ref().map_or(true, |b| k.delta > b.delta) {
                best = Some(k);
            }
        }
    }
    best.ok_or_else(|| {
        let hi = inputs.lambda2_grid.iter().cloned().fold(f64::MIN, f64::max);
        AdmmError::ConditionInfeasible(format!(
            "spectral ratio {:.6} ≤ threshold {:.6} for every λ2 up to {hi}",
            spectral_ratio(spectra),
            spectral_threshold(v, l, hi, spectra)
        ))
    })
}

/// Penalty and constants when the network condition fails: largest `λ₂`, default `b`, `β` at the first cap.
pub fn heuristic_params(spectra: &Spectra, v: f64, l: f64, inputs: &TheoryInputs) -> Result<TheoryConstants> {
    validate_inputs(v, l, inputs)?;
    let lambda2 = inputs.lambda2_grid.iter().cloned().fold(f64::MIN, f64::max);
    let mut k = assemble(spectra, v, l, lambda2, inputs.b, inputs.lambda4, BetaRule::FirstCapOnly)?;
    k.feasible = false;
    Ok(k)
}

/// [`optimal_params`] when feasible, [`heuristic_params`] otherwise.
pub fn tuned_params(spectra: &Spectra, v: f64, l: f64, inputs: &TheoryInputs) -> Result<TheoryConstants> {
    match optimal_params(spectra, v, l, inputs) {
        Err(AdmmError::ConditionInfeasible(_)) => heuristic_params(spectra, v, l, inputs),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub k: usize,
    pub bound: f64,
    pub measured: f64,
    /// `(bound − measured)/(|bound| + floor/tol)`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub entries: Vec<BoundEntry>,
    pub min_slack: f64,
    pub first_violation: Option<usize>,
}

pub fn scaled_slack(bound: f64, measured: f64) -> f64 {
    (bound - measured) / (bound.abs() + BOUND_ABS_FLOOR / BOUND_REL_TOL)
}

impl BoundReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), entries: Vec::new(), min_slack: f64::INFINITY, first_violation: None }
    }

    pub fn push(&mut self, k: usize, bound: f64, measured: f64) {
        let slack = if bound.is_nan() || measured.is_nan() { f64::NEG_INFINITY } else { scaled_slack(bound, measured) };
        if slack < self.min_slack {
            self.min_slack = slack;
        }
        if slack < -BOUND_REL_TOL && self.first_violation.is_none() {
            self.first_violation = Some(k);
        }
        self.entries.push(BoundEntry { k, bound, measured, slack });
    }

    pub fn violated(&self) -> bool {
        self.first_violation.is_some()
    }
}

fn check_constants_match(trace: &Trace, constants: &TheoryConstants) -> Result<()> {
    let rel = (trace.c - constants.c_opt).abs() / constants.c_opt.abs().max(1e-300);
    if rel > 1e-12 {
        return Err(AdmmError::MissingFields(format!(
            "trace penalty {} differs from the constants' penalty {}",
            trace.c, constants.c_opt
        )));
    }
    Ok(())
}

fn require_initial(constants: &TheoryConstants) -> Result<(f64, f64)> {
    match (constants.a, constants.a_alt) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(AdmmError::MissingFields("constants lack initial distances".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `‖z^k−z*‖² ≤ B^k(A + Σ B^{−s}C‖e^s‖²)` with the `A₂` initial term.
    pub linear: BoundReport,
    /// Same with the `A₁` initial term.
    pub linear_alt: BoundReport,
    /// The single-step `G`-distance inequality.
    pub single_step: BoundReport,
    /// Largest `‖q^k−q*‖²_G / ‖q^{k−1}−q*‖²_G` over error-free steps above the floor.
    pub max_error_free_ratio: Option<f64>,
}

/// Ratio checks skip steps whose previous distance fell below this fraction of the initial one.
pub const RATIO_FLOOR: f64 = 1e-12;

pub fn contraction_report(
    trace: &Trace,
    constants: &TheoryConstants,
    problem: &Problem,
) -> Result<ContractionReport> {
    trace.require_dense()?;
    check_constants_match(trace, constants)?;
    let (a, a_alt) = require_initial(constants)?;
    let ops = &problem.ops;
    let c = trace.c;
    let bb = constants.rate_b;
    let cc = constants.c_const;
    let xs = &problem.x_star_stacked;
    let r_star = &trace.r_star;

    let mut linear = BoundReport::new("linear_rate");
    let mut linear_alt = BoundReport::new("linear_rate_alt");
    let mut single = BoundReport::new("single_step");
    let mut acc = 0.0;
    let mut bk = 1.0;
    let mut max_ratio: Option<f64> = None;
    let g0 = trace.records[0].g_dist;
    for w in trace.records.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let k = cur.k;
        let e2 = cur.e.norm_squared();
        acc = bb * acc + cc * e2;
        bk *= bb;
        let zd = (&cur.z - xs).norm_squared();
        linear.push(k, bk * a + acc, zd);
        linear_alt.push(k, bk * a_alt + acc, zd);

        let s = c * (&ops.l_plus * (&cur.z - &prev.z))
            + 2.0 * c * (&ops.q * (&cur.r - r_star))
            + 2.0 * c * (&ops.w * (&cur.x - xs));
        let bound = (prev.g_dist + constants.p * e2 + cur.e.dot(&s)) / (1.0 + constants.delta);
        single.push(k, bound, cur.g_dist);
        if e2 == 0.0 && prev.g_dist > RATIO_FLOOR * g0 {
            let ratio = cur.g_dist / prev.g_dist;
            max_ratio = Some(max_ratio.map_or(ratio, |m: f64| m.max(ratio)));
        }
    }
    Ok(ContractionReport { linear, linear_alt, single_step: single, max_error_free_ratio: max_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexReport {
    /// `f(x^T) − f* ≤ ‖q^{T−1} − p‖²_G`.
    pub last_iterate: BoundReport,
    /// Averaged-value bound with the accumulated error terms.
    pub averaged: BoundReport,
    /// `‖p⁰ − p‖²_G`.
    pub p0_dist: f64,
    /// `(T, T·(avg_{k≤T} f(x^k) − f*))`.
    pub scaled_average_gap: Vec<(usize, f64)>,
}

pub fn convex_report(trace: &Trace, problem: &Problem) -> Result<ConvexReport> {
    trace.require_dense()?;
    let ops = &problem.ops;
    let c = trace.c;
    let xs = &problem.x_star_stacked;
    let g = |r: &DVector<f64>, x: &DVector<f64>| {
        let dx = x - xs;
        c * r.norm_squared() + 0.5 * c * dx.dot(&(&ops.l_plus * &dx))
    };
    let first = &trace.records[0];
    let p0 = g(&first.r, &first.x);
    let coef = ops.spectra.l_plus.max.powi(2) / (2.0 * ops.spectra.l_minus.min_nonzero);
    let mut last = BoundReport::new("last_iterate");
    let mut avg = BoundReport::new("averaged");
    let mut scaled = Vec::new();
    let mut sum_gap = 0.0;
    let mut sum_err = 0.0;
    for w in trace.records.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let t = cur.k as f64;
        last.push(cur.k, g(&prev.r, &prev.z), cur.f_gap);
        sum_gap += cur.f_gap;
        sum_err += coef * cur.e.norm_squared() + cur.e.dot(&(2.0 * (&ops.q * &cur.r)));
        avg.push(cur.k, p0 / t + c / t * sum_err, sum_gap / t);
        scaled.push((cur.k, sum_gap));
    }
    Ok(ConvexReport { last_iterate: last, averaged: avg, p0_dist: p0, scaled_average_gap: scaled })
}

/// Running-average bound for the robust variant.
pub fn theorem5_report(trace: &Trace, problem: &Problem, u: f64) -> Result<BoundReport> {
    trace.require_dense()?;
    let ops = &problem.ops;
    let c = trace.c;
    let xs = &problem.x_star_stacked;
    let first = &trace.records[0];
    let dx = &first.x - xs;
    let p0 = c * first.r.norm_squared() + 0.5 * c * dx.dot(&(&ops.l_plus * &dx));
    let e = ops.topology.edge_count() as f64;
    let extra = 8.0 * c * ops.spectra.l_plus.max.powi(2) / ops.spectra.l_minus.min_nonzero.powi(2) * e * e * u * u;
    let mut rep = BoundReport::new("robust_average");
    for (t, gap) in trace.running_average_gaps(problem) {
        rep.push(t, (p0 + extra) / t as f64, gap);
    }
    Ok(rep)
}

/// Error-free average consensus-violation bound.
pub fn average_consensus_report(trace: &Trace, problem: &Problem, v1: f64, v2: f64) -> Result<BoundReport> {
    trace.require_dense()?;
    let mut rep = BoundReport::new("average_consensus");
    let mut sum = 0.0;
    for rec in trace.records.iter().filter(|r| r.k >= 1) {
        sum += rec.consensus_violation;
        let t = rec.k;
        rep.push(t, average_consensus_bound(&problem.ops.spectra, v1, v2, trace.c, t), sum / t as f64);
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorScheduleCases {
    pub bounded: Option<f64>,
    pub linear_decay: Option<f64>,
    pub per_step: bool,
}

impl ErrorScheduleCases {
    pub fn none_satisfied(&self) -> bool {
        self.bounded.is_none() && self.linear_decay.is_none() && !self.per_step
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodReport {
    pub cases: ErrorScheduleCases,
    /// `‖z^k−z*‖² ≤ B^kA + Ce(1−B^k)/(1−B)`.
    pub bounded: Option<BoundReport>,
    /// `Ce/(1−B)`.
    pub radius: Option<f64>,
    /// `‖z^k−z*‖² ≤ B^k(A + C e₀ R/(B−R))`.
    pub linear_decay: Option<BoundReport>,
    /// `‖z^k−z*‖² ≤ B^k(‖z⁰−z*‖² + A₁‖r⁰−r*‖²)`.
    pub per_step: Option<BoundReport>,
    /// Median `‖z^k−z*‖²` over the trailing 20% of iterations.
    pub plateau_z_dist: f64,
}

pub fn corollary1_monitor(
    trace: &Trace,
    constants: &TheoryConstants,
    problem: &Problem,
    schedule: &ErrorKind,
) -> Result<NeighborhoodReport> {
    trace.require_dense()?;
    check_constants_match(trace, constants)?;
    let (a, _) = require_initial(constants)?;
    let bb = constants.rate_b;
    let cc = constants.c_const;
    let xs = &problem.x_star_stacked;
    let r_star = &trace.r_star;
    let errors_present = trace.records.iter().any(|r| r.e.iter().any(|&v| v != 0.0));

    let bounded_cap = match schedule {
        ErrorKind::Bounded { e_cap } => Some(*e_cap),
        _ if !errors_present => Some(0.0),
        _ => None,
    };
    let decay = match schedule {
        ErrorKind::LinearDecay { e0, rate } if *rate > 0.0 && *rate < bb => Some((*e0, *rate)),
        _ if !errors_present => Some((0.0, 0.5 * bb)),
        _ => None,
    };
    let per_step = trace.records.windows(2).all(|w| {
        cc * w[1].e.norm_squared() <= bb * (constants.a1 - constants.a2) * (&w[0].r - r_star).norm_squared()
    });
    let cases = ErrorScheduleCases { bounded: bounded_cap, linear_decay: decay.map(|d| d.1), per_step };

    let zd: Vec<(usize, f64)> = trace.records.iter().map(|r| (r.k, (&r.z - xs).norm_squared())).collect();
    let z0 = zd[0].1;
    let r0 = (&trace.records[0].r - r_star).norm_squared();

    let bounded = bounded_cap.map(|e| {
        let mut rep = BoundReport::new("bounded_errors");
        for &(k, d) in zd.iter().skip(1) {
            let bk = bb.powi(k as i32);
            rep.push(k, bk * a + cc * e * (1.0 - bk) / (1.0 - bb), d);
        }
        rep
    });
    let radius = bounded_cap.map(|e| cc * e / (1.0 - bb));
    let linear_decay = decay.map(|(e0, rate)| {
        let konst = a + cc * e0 * rate / (bb - rate);
        let mut rep = BoundReport::new("decaying_errors");
        for &(k, d) in zd.iter().skip(1) {
            rep.push(k, bb.powi(k as i32) * konst, d);
        }
        rep
    });
    let per_step_rep = per_step.then(|| {
        let mut rep = BoundReport::new("per_step_cap");
        for &(k, d) in zd.iter().skip(1) {
            rep.push(k, bb.powi(k as i32) * (z0 + constants.a1 * r0), d);
        }
        rep
    });
    let start = trace.plateau_start();
    let mut tail: Vec<f64> = zd[start..].iter().map(|p| p.1).collect();
    tail.sort_by(|x, y| x.total_cmp(y));
    let plateau = if tail.is_empty() { zd.last().map(|p| p.1).unwrap_or(f64::NAN) } else { median_sorted(&tail) };
    Ok(NeighborhoodReport {
        cases,
        bounded,
        radius,
        linear_decay,
        per_step: per_step_rep,
        plateau_z_dist: plateau,
    })
}

fn median_sorted(v: &[f64]) -> f64 {
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

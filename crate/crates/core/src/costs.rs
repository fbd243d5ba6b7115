//! Local objectives, the per-agent primal solve, and global cost constants.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use crate::operators::symmetric_eigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{AdmmError, Result};
use crate::operators::{consensus_vector, ConsensusOperators};

/// Newton iteration cap for non-quadratic costs.
pub const NEWTON_MAX_ITERS: usize = 100;
const ARMIJO_FACTOR: f64 = 0.5;
const ARMIJO_SLOPE: f64 = 1e-4;
/// Relative residual accepted from [`LocalCost::resolve`].
pub const RESOLVE_TOL: f64 = 1e-9;

pub trait LocalCost: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Solves `∇f(x) + a·x = b`.
    fn resolve(&self, a: f64, b: &DVector<f64>) -> Result<DVector<f64>> {
        newton_resolve(self, a, b)
    }

    /// Modulus `v` with `f(x) ≥ f(y) + ⟨∇f(y), x−y⟩ + v‖x−y‖²`.
    fn strong_convexity(&self) -> f64;
    /// Lipschitz constant of the gradient.
    fn smoothness(&self) -> f64;
}

pub type SharedCost = Arc<dyn LocalCost>;

/// `‖∇f(x) + a·x − b‖`.
pub fn resolve_residual(cost: &dyn LocalCost, a: f64, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    (cost.gradient(x) + a * x - b).norm()
}

fn newton_resolve<C: LocalCost + ?Sized>(cost: &C, a: f64, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = cost.dim();
    let tol = RESOLVE_TOL * (1.0 + b.norm());
    let phi = |x: &DVector<f64>| cost.evaluate(x) + 0.5 * a * x.norm_squared() - b.dot(x);
    let mut x = DVector::zeros(n);
    let mut g = cost.gradient(&x) + a * &x - b;
    for _ in 0..NEWTON_MAX_ITERS {
        if g.norm() <= tol {
            return Ok(x);
        }
        let mut h = cost.hessian(&x);
        for i in 0..n {
            h[(i, i)] += a;
        }
        let ridge = 1e-12 * (1.0 + h.amax());
        for i in 0..n {
            h[(i, i)] += ridge;
        }
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => match h.lu().solve(&(-&g)) {
                Some(s) => s,
                None => -&g,
            },
        };
        let slope = g.dot(&step);
        let f0 = phi(&x);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &x + t * &step;
            if phi(&cand) <= f0 + ARMIJO_SLOPE * t * slope {
                x = cand;
                accepted = true;
                break;
            }
            t *= ARMIJO_FACTOR;
        }
        if !accepted {
            // Round-off floor: take the full step if it lowers the residual.
            let cand = &x + &step;
            let gc = cost.gradient(&cand) + a * &cand - b;
            if gc.norm() < g.norm() {
                x = cand;
            } else {
                break;
            }
        }
        g = cost.gradient(&x) + a * &x - b;
    }
    let residual = g.norm();
    if residual <= tol {
        Ok(x)
    } else {
        Err(AdmmError::SolverDivergence { agent: usize::MAX, iteration: 0, residual })
    }
}

/// `f(x) = ½‖y − Bx‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresCost {
    pub b: DMatrix<f64>,
    pub y: DVector<f64>,
    gram: DMatrix<f64>,
    bty: DVector<f64>,
    eig_min: f64,
    eig_max: f64,
}

impl LeastSquaresCost {
    pub fn new(b: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if b.nrows() != y.len() {
            return Err(AdmmError::DimensionMismatch { expected: b.nrows(), got: y.len() });
        }
        let gram = b.transpose() * &b;
        let bty = b.transpose() * &y;
        let eig = symmetric_eigen(&gram).eigenvalues;
        let eig_min = eig.min().max(0.0);
        let eig_max = eig.max();
        Ok(Self { b, y, gram, bty, eig_min, eig_max })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
}

impl LocalCost for LeastSquaresCost {
    fn dim(&self) -> usize {
        self.b.ncols()
    }

    fn evaluate(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.y - &self.b * x).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gram * x - &self.bty
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.gram.clone()
    }

    fn resolve(&self, a: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let mut m = self.gram.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += a;
        }
        let v = &self.bty + rhs;
        let x = match m.clone().cholesky() {
            Some(ch) => ch.solve(&v),
            None => m.lu().solve(&v).ok_or(AdmmError::SolverDivergence {
                agent: usize::MAX,
                iteration: 0,
                residual: f64::INFINITY,
            })?,
        };
        let residual = resolve_residual(self, a, rhs, &x);
        if residual <= RESOLVE_TOL * (1.0 + rhs.norm()) {
            Ok(x)
        } else {
            Err(AdmmError::SolverDivergence { agent: usize::MAX, iteration: 0, residual })
        }
    }

    /// Half the smallest eigenvalue of `BᵀB`, matching the no-½ modulus convention.
    fn strong_convexity(&self) -> f64 {
        0.5 * self.eig_min
    }

    fn smoothness(&self) -> f64 {
        self.eig_max
    }
}

/// Huberized hinge: `0` for `t ≤ 0`, `t²/2μ` on `(0, μ]`, `t − μ/2` beyond.
pub fn huber_hinge(t: f64, mu: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t <= mu {
        t * t / (2.0 * mu)
    } else {
        t - 0.5 * mu
    }
}

fn huber_hinge_d1(t: f64, mu: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t <= mu {
        t / mu
    } else {
        1.0
    }
}

fn huber_hinge_d2(t: f64, mu: f64) -> f64 {
    if t > 0.0 && t <= mu {
        1.0 / mu
    } else {
        0.0
    }
}

/// `f(w, b) = ½‖w‖² + C·Σ h_μ(1 − y(wᵀa + b))` with `x = (w, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedHingeSvmCost {
    pub features: Vec<DVector<f64>>,
    pub labels: Vec<f64>,
    pub c_svm: f64,
    pub mu: f64,
}

impl SmoothedHingeSvmCost {
    pub fn new(features: Vec<DVector<f64>>, labels: Vec<f64>, c_svm: f64, mu: f64) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(AdmmError::InvalidConfig("svm needs matching, nonempty features and labels".into()));
        }
        let p = features[0].len();
        if features.iter().any(|f| f.len() != p) {
            return Err(AdmmError::InvalidConfig("svm features have unequal lengths".into()));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(AdmmError::InvalidConfig("svm labels must be ±1".into()));
        }
        if !(mu > 0.0) || !(c_svm > 0.0) {
            return Err(AdmmError::InvalidConfig("svm needs μ > 0 and C > 0".into()));
        }
        Ok(Self { features, labels, c_svm, mu })
    }

    /// Loads `(feature..., label)` rows without a header.
    pub fn from_csv_reader<R: std::io::Read>(reader: R, c_svm: f64, mu: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| AdmmError::Parse(format!("{s:?}: {e}"))))
                .collect::<Result<_>>()?;
            let (label, feat) = vals
                .split_last()
                .ok_or_else(|| AdmmError::Parse("empty row".into()))?;
            features.push(DVector::from_column_slice(feat));
            labels.push(*label);
        }
        Self::new(features, labels, c_svm, mu)
    }

    fn augmented(&self, j: usize) -> DVector<f64> {
        let f = &self.features[j];
        DVector::from_fn(f.len() + 1, |r, _| if r < f.len() { f[r] } else { 1.0 })
    }

    fn margin_arg(&self, j: usize, x: &DVector<f64>) -> f64 {
        1.0 - self.labels[j] * self.augmented(j).dot(x)
    }

    fn reg_part(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = x.clone();
        let n = g.len();
        g[n - 1] = 0.0;
        g
    }
}

impl LocalCost for SmoothedHingeSvmCost {
    fn dim(&self) -> usize {
        self.features[0].len() + 1
    }

    fn evaluate(&self, x: &DVector<f64>) -> f64 {
        let w = x.rows(0, x.len() - 1);
        let loss: f64 = (0..self.labels.len()).map(|j| huber_hinge(self.margin_arg(j, x), self.mu)).sum();
        0.5 * w.norm_squared() + self.c_svm * loss
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = self.reg_part(x);
        for j in 0..self.labels.len() {
            let d = huber_hinge_d1(self.margin_arg(j, x), self.mu);
            if d != 0.0 {
                g -= (self.c_svm * d * self.labels[j]) * self.augmented(j);
            }
        }
        g
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::identity(n, n);
        h[(n - 1, n - 1)] = 0.0;
        for j in 0..self.labels.len() {
            let d = huber_hinge_d2(self.margin_arg(j, x), self.mu);
            if d != 0.0 {
                let a = self.augmented(j);
                h += (self.c_svm * d) * &a * a.transpose();
            }
        }
        h
    }

    /// The offset is unregularized, so only plain convexity is claimed.
    fn strong_convexity(&self) -> f64 {
        0.0
    }

    fn smoothness(&self) -> f64 {
        let n = self.dim();
        let mut s = DMatrix::zeros(n, n);
        for j in 0..self.labels.len() {
            let a = self.augmented(j);
            s += &a * a.transpose();
        }
        let top = symmetric_eigen(&s).eigenvalues.max();
        1.0 + self.c_svm * top / self.mu
    }
}

/// Solves the primal step `∇f_i(x) + α_i + 2c·d_i·x = c·d_i·z_i + c·Σ_{j∈N_i} z_j`.
pub fn x_update_solve(
    cost: &dyn LocalCost,
    degree: usize,
    c: f64,
    alpha_i: &DVector<f64>,
    neighbor_sum: &DVector<f64>,
    z_self: &DVector<f64>,
) -> Result<DVector<f64>> {
    if !(c > 0.0) {
        return Err(AdmmError::DomainError(format!("penalty c = {c} must be positive")));
    }
    if degree == 0 {
        return Err(AdmmError::DomainError("agent has no neighbors".into()));
    }
    let d = degree as f64;
    let a = 2.0 * c * d;
    let rhs = (c * d) * z_self + c * neighbor_sum - alpha_i;
    cost.resolve(a, &rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalCostProfile {
    pub v: f64,
    pub l: f64,
    pub v1: f64,
    pub v2: f64,
}

impl GlobalCostProfile {
    pub fn require_strongly_convex(&self) -> Result<()> {
        if self.v > 0.0 {
            Ok(())
        } else {
            Err(AdmmError::NotStronglyConvex(self.v))
        }
    }
}

/// Number of ball samples behind the gradient bound.
pub const V2_SAMPLES: usize = 10_000;
/// Multiplicative margin on the sampled gradient bound.
pub const V2_MARGIN: f64 = 1.1;
const V2_SEED: u64 = 0x5eed_0f_ba11;

/// `v`, `L` from the local costs; `V1 = 2‖𝟙⊗x*‖`; `V2` from gradients sampled over the stacked ball of radius `V1`.
pub fn estimate_constants(
    costs: &[SharedCost],
    ops: &ConsensusOperators,
    x_star: &DVector<f64>,
) -> Result<GlobalCostProfile> {
    if costs.is_empty() {
        return Err(AdmmError::InvalidConfig("no local costs".into()));
    }
    let v = costs.iter().map(|c| c.strong_convexity()).fold(f64::INFINITY, f64::min);
    let l = costs.iter().map(|c| c.smoothness()).fold(0.0, f64::max);
    let t = &ops.topology;
    let stacked_star = consensus_vector(t.agents(), x_star);
    let v1 = 2.0 * stacked_star.norm();
    let dn = t.stacked_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(V2_SEED);
    let unit = Uniform::new(0.0f64, 1.0);
    let mut best: f64 = stacked_gradient(costs, t.dim(), &stacked_star).norm();
    for _ in 0..V2_SAMPLES {
        let dir = DVector::from_fn(dn, |_, _| StandardNormal.sample(&mut rng));
        let nrm: f64 = dir.norm();
        if nrm == 0.0 {
            continue;
        }
        let radius = v1 * unit.sample(&mut rng).powf(1.0 / dn as f64);
        let p = dir * (radius / nrm);
        best = best.max(stacked_gradient(costs, t.dim(), &p).norm());
    }
    Ok(GlobalCostProfile { v, l, v1, v2: V2_MARGIN * best })
}

/// Stacked `∇f(x) = (∇f_1(x_1), …, ∇f_D(x_D))`.
pub fn stacked_gradient(costs: &[SharedCost], n: usize, x: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(costs.len() * n);
    for (i, c) in costs.iter().enumerate() {
        let gi = c.gradient(&x.rows(i * n, n).into_owned());
        g.rows_mut(i * n, n).copy_from(&gi);
    }
    g
}

/// `Σ_i f_i(x_i)`.
pub fn stacked_value(costs: &[SharedCost], n: usize, x: &DVector<f64>) -> f64 {
    costs
        .iter()
        .enumerate()
        .map(|(i, c)| c.evaluate(&x.rows(i * n, n).into_owned()))
        .sum()
}

/// Tolerance on `‖Σ_i ∇f_i(x*)‖`.
pub const MINIMIZER_TOL: f64 = 1e-10;

/// Minimizer of `Σ_i f_i(x)` over a shared `x` by damped Newton.
pub fn centralized_minimizer(costs: &[SharedCost], n: usize) -> Result<DVector<f64>> {
    if costs.is_empty() {
        return Err(AdmmError::InvalidConfig("no local costs".into()));
    }
    if let Some(c) = costs.iter().find(|c| c.dim() != n) {
        return Err(AdmmError::DimensionMismatch { expected: n, got: c.dim() });
    }
    let value = |x: &DVector<f64>| costs.iter().map(|c| c.evaluate(x)).sum::<f64>();
    let grad = |x: &DVector<f64>| costs.iter().fold(DVector::zeros(n), |acc, c| acc + c.gradient(x));
    let hess = |x: &DVector<f64>| costs.iter().fold(DMatrix::zeros(n, n), |acc, c| acc + c.hessian(x));
    let mut x = DVector::zeros(n);
    let mut g = grad(&x);
    for _ in 0..4 * NEWTON_MAX_ITERS {
        if g.norm() <= MINIMIZER_TOL {
            return Ok(x);
        }
        let mut h = hess(&x);
        let ridge = 1e-14 * (1.0 + h.amax());
        for i in 0..n {
            h[(i, i)] += ridge;
        }
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => h.lu().solve(&(-&g)).unwrap_or_else(|| -&g),
        };
        let f0 = value(&x);
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = &x + t * &step;
            if value(&cand) <= f0 + ARMIJO_SLOPE * t * slope {
                x = cand;
                moved = true;
                break;
            }
            t *= ARMIJO_FACTOR;
        }
        if !moved {
            let cand = &x + &step;
            if grad(&cand).norm() < g.norm() {
                x = cand;
            } else {
                break;
            }
        }
        g = grad(&x);
    }
    let residual = g.norm();
    if residual <= MINIMIZER_TOL {
        Ok(x)
    } else {
        Err(AdmmError::SolverDivergence { agent: usize::MAX, iteration: 0, residual })
    }
}

//! Agent graphs and the block matrices derived from them.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AdmmError, Result};

/// Relative cutoff below which an eigenvalue counts as zero.
pub const EIG_REL_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    d: usize,
    n: usize,
    edges: Vec<(usize, usize)>,
    arcs: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a connected undirected graph; edges are normalized to `(min, max)` and sorted.
    pub fn new(d: usize, n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if d < 2 {
            return Err(AdmmError::InvalidTopology(format!("need at least 2 agents, got {d}")));
        }
        if n < 1 {
            return Err(AdmmError::InvalidTopology("local dimension must be positive".into()));
        }
        if edges.is_empty() {
            return Err(AdmmError::InvalidTopology("edge list is empty".into()));
        }
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i >= d || j >= d {
                return Err(AdmmError::InvalidEdge(i, j, "agent index out of range"));
            }
            if i == j {
                return Err(AdmmError::InvalidEdge(i, j, "self-loop"));
            }
            if !set.insert((i.min(j), i.max(j))) {
                return Err(AdmmError::InvalidEdge(i, j, "duplicate edge"));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); d];
        let mut arcs = Vec::with_capacity(2 * edges.len());
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
            arcs.push((i, j));
            arcs.push((j, i));
        }
        arcs.sort_unstable();
        for nb in &mut neighbors {
            nb.sort_unstable();
        }

        let mut seen = vec![false; d];
        let mut stack = vec![0];
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = stack.pop() {
            for &v in &neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    stack.push(v);
                }
            }
        }
        if reached != d {
            return Err(AdmmError::DisconnectedGraph { reached, total: d });
        }
        Ok(Self { d, n, edges, arcs, neighbors })
    }

    pub fn path(d: usize, n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..d).map(|i| (i - 1, i)).collect();
        Self::new(d, n, &edges)
    }

    pub fn ring(d: usize, n: usize) -> Result<Self> {
        if d < 3 {
            return Self::path(d, n);
        }
        let edges: Vec<_> = (0..d).map(|i| (i, (i + 1) % d)).collect();
        Self::new(d, n, &edges)
    }

    pub fn complete(d: usize, n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
        Self::new(d, n, &edges)
    }

    /// Agent 0 is the hub.
    pub fn star(d: usize, n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..d).map(|j| (0, j)).collect();
        Self::new(d, n, &edges)
    }

    /// Erdős–Rényi draws from a seeded stream, redrawn until connected.
    pub fn random_connected(d: usize, n: usize, p: f64, seed: u64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(AdmmError::InvalidTopology(format!("edge probability {p} not in (0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10_000 {
            let mut edges = Vec::new();
            for i in 0..d {
                for j in i + 1..d {
                    if rng.gen::<f64>() < p {
                        edges.push((i, j));
                    }
                }
            }
            match Self::new(d, n, &edges) {
                Ok(t) => return Ok(t),
                Err(AdmmError::DisconnectedGraph { .. }) | Err(AdmmError::InvalidTopology(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(AdmmError::InvalidTopology(format!(
            "no connected draw with p = {p} for {d} agents"
        )))
    }

    pub fn agents(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn stacked_dim(&self) -> usize {
        self.d * self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Position of arc `(i, j)` in the sorted arc list.
    pub fn arc_index(&self, i: usize, j: usize) -> Option<usize> {
        self.arcs.binary_search(&(i, j)).ok()
    }

    /// Block `i` of a stacked vector.
    pub fn block(&self, v: &DVector<f64>, i: usize) -> DVector<f64> {
        v.rows(i * self.n, self.n).into_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub min_nonzero: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spectra {
    pub w: Spectrum,
    pub l_plus: Spectrum,
    pub l_minus: Spectrum,
    pub q: Spectrum,
}

#[derive(Debug, Clone)]
pub struct ConsensusOperators {
    pub topology: Topology,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub m_plus: DMatrix<f64>,
    pub m_minus: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub l_plus: DMatrix<f64>,
    pub l_minus: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// Moore–Penrose inverse of `q`.
    pub q_pinv: DMatrix<f64>,
    pub spectra: Spectra,
}

impl ConsensusOperators {
    pub fn new(t: &Topology) -> Result<Self> {
        let n = t.dim();
        let dn = t.stacked_dim();
        let rows = t.arcs().len() * n;
        let mut a1 = DMatrix::zeros(rows, dn);
        let mut a2 = DMatrix::zeros(rows, dn);
        for (q, &(i, j)) in t.arcs().iter().enumerate() {
            for s in 0..n {
                a1[(q * n + s, i * n + s)] = 1.0;
                a2[(q * n + s, j * n + s)] = 1.0;
            }
        }
        let m_plus = a1.transpose() + a2.transpose();
        let m_minus = a1.transpose() - a2.transpose();
        let l_plus = 0.5 * &m_plus * m_plus.transpose();
        let l_minus = 0.5 * &m_minus * m_minus.transpose();
        let w = 0.5 * (&l_plus + &l_minus);

        let (q, q_pinv) = psd_sqrt_and_pinv(&(0.5 * &l_minus));
        let spectra = Spectra {
            w: spectral_stats(&w)?,
            l_plus: spectral_stats(&l_plus)?,
            l_minus: spectral_stats(&l_minus)?,
            q: spectral_stats(&q)?,
        };
        Ok(Self {
            topology: t.clone(),
            a1,
            a2,
            m_plus,
            m_minus,
            w,
            l_plus,
            l_minus,
            q,
            q_pinv,
            spectra,
        })
    }

    pub fn stacked_dim(&self) -> usize {
        self.topology.stacked_dim()
    }

    /// `W⁻¹ v`, using that `W` is the block-diagonal degree matrix.
    pub fn w_inv_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = self.topology.dim();
        DVector::from_fn(v.len(), |r, _| v[r] / self.topology.degree(r / n) as f64)
    }
}

/// Cap on polishing sweeps; two or three suffice from a QR start.
const JACOBI_MAX_SWEEPS: usize = 30;

/// Symmetric eigendecomposition: a QR start polished by cyclic Jacobi rotations on `VᵀMV`.
///
/// The plain QR result can leave reconstruction errors near `1e-8` on small Laplacians.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, Dyn> {
    let n = m.nrows();
    let start = SymmetricEigen::new(m.clone());
    let mut v = start.eigenvectors;
    let mut a = v.transpose() * m * &v;
    let scale = m.norm().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta == 0.0 { 1.0 } else { theta.signum() / (theta.abs() + theta.hypot(1.0)) };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    SymmetricEigen { eigenvalues: a.diagonal(), eigenvectors: v }
}

/// Symmetric PSD square root and the pseudo-inverse of that root.
fn psd_sqrt_and_pinv(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = symmetric_eigen(m);
    let top = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let cut = EIG_REL_CUTOFF * top;
    let roots = eig.eigenvalues.map(|l| if l > cut { l.sqrt() } else { 0.0 });
    let inv = roots.map(|s| if s > 0.0 { 1.0 / s } else { 0.0 });
    let v = &eig.eigenvectors;
    let sqrt = v * DMatrix::from_diagonal(&roots) * v.transpose();
    let pinv = v * DMatrix::from_diagonal(&inv) * v.transpose();
    (symmetrize(sqrt), symmetrize(pinv))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (&m + m.transpose())
}

/// Smallest eigenvalue above the relative cutoff and the largest eigenvalue.
pub fn spectral_stats(m: &DMatrix<f64>) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(AdmmError::NotSymmetric(f64::INFINITY));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 {
        return Err(AdmmError::NotSymmetric(asym));
    }
    let eig = symmetric_eigen(m);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return Err(AdmmError::AllZeroSpectrum);
    }
    let min_nonzero = eig
        .eigenvalues
        .iter()
        .cloned()
        .filter(|&l| l > EIG_REL_CUTOFF * max)
        .fold(f64::INFINITY, f64::min);
    Ok(Spectrum { min_nonzero, max })
}

/// `𝟙_D ⊗ v`.
pub fn consensus_vector(d: usize, v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(d * n, |r, _| v[r % n])
}

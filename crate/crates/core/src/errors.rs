//! Error injection for unreliable agents.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{AdmmError, Result};
use crate::operators::Topology;

/// Scripted per-agent errors: `(k, agent) → e_agent^k`.
pub type ScriptTable = BTreeMap<(usize, usize), Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorKind {
    None,
    Gaussian { mu_b: f64, sigma_b: f64 },
    Bounded { e_cap: f64 },
    LinearDecay { e0: f64, rate: f64 },
    Scripted { table: Vec<ScriptRow> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRow {
    pub k: usize,
    pub agent: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    d: usize,
    n: usize,
    unreliable: Vec<usize>,
    kind: ErrorKind,
    seed: u64,
    script: ScriptTable,
}

const TAG_SAMPLE: u64 = 0x6572_726f_725f_6b00;
const TAG_DIRECTION: u64 = 0x6572_726f_725f_6400;

/// Counter-based stream: the key bytes are `(seed, agent, k, tag)` verbatim.
pub fn keyed_rng(seed: u64, agent: usize, k: u64, tag: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(agent as u64).to_le_bytes());
    key[16..24].copy_from_slice(&k.to_le_bytes());
    key[24..32].copy_from_slice(&tag.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

impl ErrorModel {
    pub fn new(d: usize, n: usize, unreliable: &[usize], kind: ErrorKind, seed: u64) -> Result<Self> {
        let mut set: Vec<usize> = unreliable.to_vec();
        set.sort_unstable();
        set.dedup();
        if set.len() != unreliable.len() {
            return Err(AdmmError::InvalidConfig("unreliable set has duplicates".into()));
        }
        if let Some(&bad) = set.iter().find(|&&i| i >= d) {
            return Err(AdmmError::InvalidConfig(format!("unreliable agent {bad} out of range")));
        }
        let mut script = ScriptTable::new();
        match &kind {
            ErrorKind::None => {}
            ErrorKind::Gaussian { sigma_b, .. } => {
                if !(*sigma_b >= 0.0) {
                    return Err(AdmmError::InvalidConfig("σ_b must be nonnegative".into()));
                }
            }
            ErrorKind::Bounded { e_cap } => {
                if !(*e_cap >= 0.0) {
                    return Err(AdmmError::InvalidConfig("e_cap must be nonnegative".into()));
                }
            }
            ErrorKind::LinearDecay { e0, rate } => {
                if !(*e0 >= 0.0) || !(*rate > 0.0) {
                    return Err(AdmmError::InvalidConfig("decay needs e0 ≥ 0 and R > 0".into()));
                }
            }
            ErrorKind::Scripted { table } => {
                for row in table {
                    if row.values.len() != n {
                        return Err(AdmmError::DimensionMismatch { expected: n, got: row.values.len() });
                    }
                    if set.binary_search(&row.agent).is_err() {
                        return Err(AdmmError::InvalidConfig(format!(
                            "scripted error for reliable agent {} at k = {}",
                            row.agent, row.k
                        )));
                    }
                    if script.insert((row.k, row.agent), row.values.clone()).is_some() {
                        return Err(AdmmError::InvalidConfig(format!(
                            "duplicate scripted row (k = {}, agent = {})",
                            row.k, row.agent
                        )));
                    }
                }
            }
        }
        Ok(Self { d, n, unreliable: set, kind, seed, script })
    }

    pub fn none(d: usize, n: usize) -> Self {
        Self::new(d, n, &[], ErrorKind::None, 0).expect("empty model is valid")
    }

    pub fn unreliable(&self) -> &[usize] {
        &self.unreliable
    }

    pub fn kind(&self) -> &ErrorKind {
        &self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_error_free(&self) -> bool {
        self.unreliable.is_empty() || matches!(self.kind, ErrorKind::None)
    }

    /// Stacked `e^k`; zero outside the unreliable blocks.
    pub fn sample(&self, k: usize) -> DVector<f64> {
        let n = self.n;
        let mut e = DVector::zeros(self.d * n);
        let m = self.unreliable.len();
        if m == 0 {
            return e;
        }
        for &i in &self.unreliable {
            let block = match &self.kind {
                ErrorKind::None => continue,
                ErrorKind::Gaussian { mu_b, sigma_b } => {
                    let mut rng = keyed_rng(self.seed, i, k as u64, TAG_SAMPLE);
                    if *sigma_b == 0.0 {
                        DVector::from_element(n, *mu_b)
                    } else {
                        let dist = Normal::new(*mu_b, *sigma_b).expect("validated σ_b");
                        DVector::from_fn(n, |_, _| dist.sample(&mut rng))
                    }
                }
                ErrorKind::Bounded { e_cap } => {
                    let mut rng = keyed_rng(self.seed, i, k as u64, TAG_SAMPLE);
                    let dir = unit_direction(&mut rng, n);
                    let u: f64 = Uniform::new(0.0, 1.0).sample(&mut rng);
                    dir * (u * e_cap / m as f64).sqrt()
                }
                ErrorKind::LinearDecay { e0, rate } => {
                    let mut rng = keyed_rng(self.seed, i, u64::MAX, TAG_DIRECTION);
                    let dir = unit_direction(&mut rng, n);
                    dir * (e0 * rate.powi(k as i32) / m as f64).sqrt()
                }
                ErrorKind::Scripted { .. } => match self.script.get(&(k, i)) {
                    Some(v) => DVector::from_column_slice(v),
                    None => continue,
                },
            };
            e.rows_mut(i * n, n).copy_from(&block);
        }
        e
    }

    /// Reads `k,agent,components…` rows (header optional) into a scripted model.
    pub fn scripted_from_csv<R: std::io::Read>(
        d: usize,
        n: usize,
        unreliable: &[usize],
        reader: R,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
        let mut table = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let first = rec.get(0).unwrap_or("").trim();
            if line == 0 && first.parse::<usize>().is_err() {
                continue;
            }
            if rec.len() < 3 {
                return Err(AdmmError::Parse(format!("row {}: expected k, agent, components", line + 1)));
            }
            let parse_idx = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| AdmmError::Parse(format!("row {}: {s:?}: {e}", line + 1)))
            };
            let k = parse_idx(&rec[0])?;
            let agent = parse_idx(&rec[1])?;
            let values = rec
                .iter()
                .skip(2)
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| AdmmError::Parse(format!("row {}: {s:?}: {e}", line + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            table.push(ScriptRow { k, agent, values });
        }
        Self::new(d, n, unreliable, ErrorKind::Scripted { table }, 0)
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut *rng));
        let nrm = v.norm();
        if nrm > 1e-12 {
            return v / nrm;
        }
    }
}

/// A seeded `m`-subset of `0..d`, sorted.
pub fn pick_unreliable(d: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m > d {
        return Err(AdmmError::InvalidConfig(format!("cannot pick {m} of {d} agents")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = index::sample(&mut rng, d, m).into_vec();
    v.sort_unstable();
    Ok(v)
}

/// Every agent must have strictly more reliable than unreliable neighbors.
pub fn check_majority(t: &Topology, unreliable: &[usize]) -> Result<()> {
    for i in 0..t.agents() {
        let nb = t.neighbors(i);
        let bad = nb.iter().filter(|j| unreliable.contains(j)).count();
        if 2 * bad >= nb.len() {
            return Err(AdmmError::MajorityViolated(format!(
                "agent {i} has {bad} unreliable of {} neighbors",
                nb.len()
            )));
        }
    }
    Ok(())
}

/// Retry budget for [`pick_unreliable_with_majority`].
pub const MAJORITY_RETRIES: u64 = 1000;

/// Like [`pick_unreliable`] but redraws until [`check_majority`] passes.
pub fn pick_unreliable_with_majority(t: &Topology, m: usize, seed: u64) -> Result<Vec<usize>> {
    let mut last = None;
    for attempt in 0..MAJORITY_RETRIES {
        let s = seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let cand = pick_unreliable(t.agents(), m, s)?;
        match check_majority(t, &cand) {
            Ok(()) => return Ok(cand),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| AdmmError::MajorityViolated("no attempts".into())))
}

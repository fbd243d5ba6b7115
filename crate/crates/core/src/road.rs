//! Robust rounds: per-arc deviation statistics, thresholding, and neighbor substitution.

use nalgebra::DVector;

use crate::engine::{check_identities, make_record, round, verify_lemma2_4, AdmmConfig, FlagEvent, NetworkState, Problem, Trace};
use crate::error::{AdmmError, Result};
use crate::errors::ErrorModel;
use crate::theory::compute_r_star;

/// Per-arc cumulative `Σ_t ‖x_i^t − z_j^t‖`, indexed like [`crate::operators::Topology::arcs`].
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationTracker {
    pub stats: Vec<f64>,
    pub flagged: Vec<bool>,
}

impl DeviationTracker {
    pub fn new(arcs: usize) -> Self {
        Self { stats: vec![0.0; arcs], flagged: vec![false; arcs] }
    }

    pub fn flag_count(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadState {
    pub net: NetworkState,
    pub tracker: DeviationTracker,
    /// Per-agent running sum of the local Laplacian terms each agent applied, stacked.
    pub local_history: DVector<f64>,
}

impl RoadState {
    pub fn initial(problem: &Problem) -> Self {
        let net = NetworkState::initial(problem);
        let local_history = &problem.ops.l_minus * &net.z_sum;
        Self { net, tracker: DeviationTracker::new(problem.topology().arcs().len()), local_history }
    }
}

/// Outcome of one robust round.
#[derive(Debug, Clone)]
pub struct RoadRound {
    pub state: RoadState,
    pub events: Vec<FlagEvent>,
    /// Relative residual of each agent's closed-form primal update, using its own substituted view.
    pub lemma1_residual: f64,
}

pub fn road_step(
    state: &RoadState,
    problem: &Problem,
    config: &AdmmConfig,
    model: &ErrorModel,
    u: f64,
) -> Result<RoadRound> {
    config.validate()?;
    if !(u > 0.0) {
        return Err(AdmmError::DomainError(format!("threshold U = {u} must be positive")));
    }
    let c = config.c;
    let t = problem.topology();
    let n = t.dim();
    let (net, view) = round(&state.net, problem, c, model, Some(&state.tracker.flagged))?;

    let mut res = DVector::zeros(t.stacked_dim());
    for i in 0..t.agents() {
        let d = t.degree(i) as f64;
        let xi = net.x.rows(i * n, n).into_owned();
        let gi = problem.costs[i].gradient(&xi);
        let zi = state.net.z.rows(i * n, n).into_owned();
        let hist = state.local_history.rows(i * n, n).into_owned();
        let ri = &xi + gi / (2.0 * c * d) - (d * zi + &view.x_neighbor_sums[i]) / (2.0 * d) + hist / (2.0 * d);
        res.rows_mut(i * n, n).copy_from(&ri);
    }
    let lemma1_residual = res.norm() / (net.x.norm() + 1.0);

    let mut local_history = state.local_history.clone();
    for (i, lap) in view.local_laplacian.iter().enumerate() {
        let mut h = local_history.rows_mut(i * n, n);
        h += lap;
    }

    let mut tracker = state.tracker.clone();
    let mut events = Vec::new();
    for (a, &(i, j)) in t.arcs().iter().enumerate() {
        let dev = (net.x.rows(i * n, n) - net.z.rows(j * n, n)).norm();
        tracker.stats[a] += dev;
        if !tracker.flagged[a] && tracker.stats[a] > u {
            tracker.flagged[a] = true;
            events.push(FlagEvent { k: net.k, i, j, statistic: tracker.stats[a], u });
        }
    }
    Ok(RoadRound { state: RoadState { net, tracker, local_history }, events, lemma1_residual })
}

pub fn run_road(problem: &Problem, config: &AdmmConfig, model: &ErrorModel, u: f64) -> Result<Trace> {
    config.validate()?;
    let c = config.c;
    let r_star = compute_r_star(&problem.ops, &problem.grad_star, c)?;
    let mut state = RoadState::initial(problem);
    let mut records = vec![make_record(problem, c, &r_star, &state.net, 0.0, 0.0, 0)];
    let mut events = Vec::new();
    while state.net.k < config.t {
        let any_flag_before = state.tracker.flag_count() > 0;
        let out = road_step(&state, problem, config, model, u)?;
        let l2 = verify_lemma2_4(&out.state.net, &state.net, problem, c, &r_star);
        if config.verify_identities {
            let l2_check = if any_flag_before { 0.0 } else { l2 };
            check_identities(out.state.net.k, out.lemma1_residual, l2_check)?;
        }
        if out.state.net.k % config.record_every == 0 {
            records.push(make_record(
                problem,
                c,
                &r_star,
                &out.state.net,
                out.lemma1_residual,
                l2,
                out.state.tracker.flag_count(),
            ));
        }
        events.extend(out.events);
        state = out.state;
    }
    Ok(Trace {
        c,
        t: config.t,
        record_every: config.record_every,
        r_star,
        records,
        final_state: state.net,
        flag_events: events,
        deviation_stats: Some(state.tracker.stats),
        threshold: Some(u),
    })
}

/// Global diagnostic `Z(k) = Σ_{t=1}^k ‖Q z^t‖` over recorded rounds.
pub fn global_deviation(trace: &Trace, problem: &Problem) -> Vec<(usize, f64)> {
    let mut z = 0.0;
    trace
        .records
        .iter()
        .filter(|r| r.k >= 1)
        .map(|r| {
            z += (&problem.ops.q * &r.z).norm();
            (r.k, z)
        })
        .collect()
}

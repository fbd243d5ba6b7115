use proptest::prelude::*;
use robust_admm::engine::{run, step, AdmmConfig, Problem};
use robust_admm::errors::{pick_unreliable, ErrorKind, ErrorModel};
use robust_admm::harness::synth_regression;
use robust_admm::operators::Topology;
use robust_admm::road::{road_step, run_road, RoadState};

fn problem(d: usize, n: usize, seed: u64) -> Problem {
    let t = Topology::random_connected(d, n, 0.6, seed).unwrap();
    Problem::new(&t, synth_regression(seed.wrapping_add(1), d, n).costs().unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unflagged_robust_run_equals_plain(d in 3usize..8, n in 1usize..=3, seed in any::<u64>(), c in 0.2f64..4.0,
                                         mu_b in -1.0f64..1.0) {
        let p = problem(d, n, seed);
        let bad = pick_unreliable(d, 1, seed).unwrap();
        let model = ErrorModel::new(d, n, &bad, ErrorKind::Gaussian { mu_b, sigma_b: 0.5 }, seed).unwrap();
        let cfg = AdmmConfig::new(c, 30);
        let plain = run(&p, &cfg, &model).unwrap();
        let robust = run_road(&p, &cfg, &model, f64::MAX).unwrap();
        prop_assert!(robust.flag_events.is_empty());
        for (a, b) in plain.records.iter().zip(&robust.records) {
            prop_assert_eq!(&a.x, &b.x);
            prop_assert_eq!(&a.z, &b.z);
            prop_assert_eq!(&a.r, &b.r);
            prop_assert_eq!(a.f_gap.to_bits(), b.f_gap.to_bits());
        }
    }

    #[test]
    fn statistics_and_flags_only_grow(d in 3usize..8, seed in any::<u64>(), c in 0.2f64..4.0, u in 0.5f64..20.0) {
        let p = problem(d, 2, seed);
        let bad = pick_unreliable(d, 1, seed).unwrap();
        let model = ErrorModel::new(d, 2, &bad, ErrorKind::Gaussian { mu_b: 1.0, sigma_b: 1.5 }, seed).unwrap();
        let cfg = AdmmConfig { verify_identities: false, ..AdmmConfig::new(c, 40) };
        let mut s = RoadState::initial(&p);
        for _ in 0..40 {
            let out = road_step(&s, &p, &cfg, &model, u).unwrap();
            for a in 0..s.tracker.stats.len() {
                prop_assert!(out.state.tracker.stats[a] >= s.tracker.stats[a]);
                prop_assert!(!s.tracker.flagged[a] || out.state.tracker.flagged[a]);
                prop_assert_eq!(out.state.tracker.flagged[a], out.state.tracker.stats[a] > u);
            }
            for ev in &out.events {
                prop_assert!(ev.statistic > u);
                prop_assert_eq!(ev.k, out.state.net.k);
            }
            s = out.state;
        }
    }

    #[test]
    fn fully_flagged_receiver_ignores_neighbors(d in 3usize..8, seed in any::<u64>(), c in 0.2f64..4.0,
                                                shift in -5.0f64..5.0, warm in 1usize..10) {
        let n = 2;
        let p = problem(d, n, seed);
        let model = ErrorModel::none(d, n);
        let cfg = AdmmConfig::new(c, 100);
        let mut s = RoadState::initial(&p);
        for _ in 0..warm {
            s = road_step(&s, &p, &cfg, &model, f64::MAX).unwrap().state;
        }
        let t = p.topology();
        let i = (seed % d as u64) as usize;
        for &j in t.neighbors(i) {
            s.tracker.flagged[t.arc_index(i, j).unwrap()] = true;
        }
        let mut moved = s.clone();
        for &j in t.neighbors(i) {
            for r in 0..n {
                moved.net.z[j * n + r] += shift;
            }
        }
        let a = road_step(&s, &p, &cfg, &model, f64::MAX).unwrap();
        let b = road_step(&moved, &p, &cfg, &model, f64::MAX).unwrap();
        prop_assert_eq!(a.state.net.x.rows(i * n, n), b.state.net.x.rows(i * n, n));
        prop_assert_eq!(a.state.net.alpha.rows(i * n, n), b.state.net.alpha.rows(i * n, n));
    }
}

#[test]
fn robust_step_matches_plain_step_without_flags() {
    let p = problem(6, 3, 11);
    let bad = pick_unreliable(6, 2, 11).unwrap();
    let model = ErrorModel::new(6, 3, &bad, ErrorKind::Bounded { e_cap: 2.0 }, 5).unwrap();
    let cfg = AdmmConfig::new(1.3, 10);
    let mut plain = robust_admm::engine::NetworkState::initial(&p);
    let mut robust = RoadState::initial(&p);
    for _ in 0..10 {
        plain = step(&plain, &p, &cfg, &model).unwrap();
        let out = road_step(&robust, &p, &cfg, &model, 1e300).unwrap();
        assert!(out.lemma1_residual < 1e-8);
        robust = out.state;
        assert_eq!(plain, robust.net);
    }
}

#[test]
fn nonpositive_threshold_rejected() {
    let p = problem(4, 1, 2);
    let s = RoadState::initial(&p);
    let err = road_step(&s, &p, &AdmmConfig::new(1.0, 5), &ErrorModel::none(4, 1), 0.0).unwrap_err();
    assert!(matches!(err, robust_admm::AdmmError::DomainError(_)));
}

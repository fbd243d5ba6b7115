use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use robust_admm::operators::{consensus_vector, spectral_stats, ConsensusOperators, Topology};

/// Cyclic Jacobi rotations; slow but independent of the library eigensolver.
fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Degree, adjacency, and the two Laplacians built straight from the edge list.
fn graph_oracles(t: &Topology) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let d = t.agents();
    let n = t.dim();
    let mut deg = DMatrix::zeros(d * n, d * n);
    let mut adj = DMatrix::zeros(d * n, d * n);
    for &(i, j) in t.edges() {
        for r in 0..n {
            adj[(i * n + r, j * n + r)] = 1.0;
            adj[(j * n + r, i * n + r)] = 1.0;
            deg[(i * n + r, i * n + r)] += 1.0;
            deg[(j * n + r, j * n + r)] += 1.0;
        }
    }
    let lap = &deg - &adj;
    let signless = &deg + &adj;
    (deg, lap, signless)
}

fn topologies() -> impl Strategy<Value = Topology> {
    (2usize..=12, 1usize..=3, 0.2f64..0.9, any::<u64>())
        .prop_map(|(d, n, p, seed)| Topology::random_connected(d, n, p, seed).expect("connected draw"))
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &v| a.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacians_match_edge_list(t in topologies()) {
        let ops = ConsensusOperators::new(&t).unwrap();
        let (deg, lap, signless) = graph_oracles(&t);
        prop_assert_eq!(&ops.l_minus, &lap);
        prop_assert_eq!(&ops.l_plus, &signless);
        prop_assert_eq!(&ops.w, &deg);
        prop_assert_eq!(&ops.w, &((&ops.l_plus + &ops.l_minus) * 0.5));
        prop_assert_eq!(&ops.m_plus, &(ops.a1.transpose() + ops.a2.transpose()));
        prop_assert_eq!(&ops.m_minus, &(ops.a1.transpose() - ops.a2.transpose()));
    }

    #[test]
    fn square_root_and_null_space(t in topologies(), v in prop::collection::vec(-5.0f64..5.0, 3)) {
        let ops = ConsensusOperators::new(&t).unwrap();
        let half = &ops.l_minus * 0.5;
        prop_assert!(max_abs(&(&ops.q * &ops.q - &half)) <= 1e-10);
        prop_assert!(max_abs(&(&ops.q - ops.q.transpose())) == 0.0);
        let v = DVector::from_column_slice(&v[..t.dim()]);
        let ones = consensus_vector(t.agents(), &v);
        prop_assert!((&ops.q * &ones).amax() <= 1e-10 * (1.0 + v.amax()));
        prop_assert!((&ops.l_minus * &ones).amax() <= 1e-12 * t.agents() as f64 * (1.0 + v.amax()));
        let proj = &ops.q_pinv * &ops.q;
        prop_assert!(max_abs(&(&proj * &proj - &proj)) <= 1e-9);
    }

    #[test]
    fn laplacian_rank_deficiency_is_dim(t in topologies()) {
        let ops = ConsensusOperators::new(&t).unwrap();
        let ev = jacobi_eigenvalues(&ops.l_minus);
        let max = ev.last().copied().unwrap();
        let zeros = ev.iter().filter(|&&x| x <= 1e-10 * max).count();
        prop_assert_eq!(zeros, t.dim());
    }

    #[test]
    fn spectra_agree_with_jacobi(t in topologies()) {
        let ops = ConsensusOperators::new(&t).unwrap();
        for (m, s) in [(&ops.l_minus, ops.spectra.l_minus), (&ops.l_plus, ops.spectra.l_plus), (&ops.q, ops.spectra.q), (&ops.w, ops.spectra.w)] {
            let ev = jacobi_eigenvalues(m);
            let max = ev.last().copied().unwrap();
            let min_nz = ev.iter().copied().find(|&x| x > 1e-10 * max).unwrap();
            prop_assert!((s.max - max).abs() <= 1e-9 * max);
            prop_assert!((s.min_nonzero - min_nz).abs() <= 1e-8 * max);
        }
    }

    #[test]
    fn spectral_stats_matches_jacobi_on_gram(entries in prop::collection::vec(-3.0f64..3.0, 25)) {
        let b = DMatrix::from_column_slice(5, 5, &entries);
        let g = b.transpose() * &b;
        let g = (&g + g.transpose()) * 0.5;
        prop_assume!(max_abs(&g) > 1e-6);
        let s = spectral_stats(&g).unwrap();
        let ev = jacobi_eigenvalues(&g);
        let max = *ev.last().unwrap();
        prop_assert!((s.max - max).abs() <= 1e-9 * max);
        if let Some(&mn) = ev.iter().find(|&&x| x > 1e-10 * max) {
            prop_assert!((s.min_nonzero - mn).abs() <= 1e-8 * max);
        }
    }
}

#[test]
fn complete_graph_spectrum() {
    for d in 2..=8 {
        let t = Topology::complete(d, 2).unwrap();
        let ops = ConsensusOperators::new(&t).unwrap();
        let df = d as f64;
        assert!((ops.spectra.l_minus.min_nonzero - df).abs() < 1e-9);
        assert!((ops.spectra.l_minus.max - df).abs() < 1e-9);
        assert!((ops.spectra.l_plus.max - 2.0 * (df - 1.0)).abs() < 1e-9);
        let expect_min = if d == 2 { 2.0 } else { df - 2.0 };
        assert!((ops.spectra.l_plus.min_nonzero - expect_min).abs() < 1e-9, "d={d}");
        assert!((ops.spectra.q.max - (df / 2.0).sqrt()).abs() < 1e-9);
        assert!((ops.spectra.w.max - (df - 1.0)).abs() < 1e-12);
    }
}

#[test]
fn ring_spectrum_matches_cosine_formula() {
    let d = 7;
    let t = Topology::ring(d, 1).unwrap();
    let ops = ConsensusOperators::new(&t).unwrap();
    let ev: Vec<f64> = (0..d).map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / d as f64).cos()).collect();
    let min_nz = ev.iter().copied().filter(|&x| x > 1e-9).fold(f64::INFINITY, f64::min);
    let max = ev.iter().copied().fold(0.0, f64::max);
    assert!((ops.spectra.l_minus.min_nonzero - min_nz).abs() < 1e-10);
    assert!((ops.spectra.l_minus.max - max).abs() < 1e-10);
}

#[test]
fn star_topology_degrees() {
    let t = Topology::star(6, 1).unwrap();
    assert_eq!(t.degree(0), 5);
    assert!((1..6).all(|i| t.degree(i) == 1));
    assert_eq!(t.arcs().len(), 10);
    assert!(t.arcs().windows(2).all(|w| w[0] < w[1]));
}

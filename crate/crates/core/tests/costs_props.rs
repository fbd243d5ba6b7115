use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use robust_admm::costs::{
    centralized_minimizer, huber_hinge, resolve_residual, x_update_solve, LeastSquaresCost, LocalCost, SharedCost,
    SmoothedHingeSvmCost, RESOLVE_TOL,
};
use std::sync::Arc;

fn vecn(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-3.0f64..3.0, n).prop_map(DVector::from_vec)
}

fn least_squares() -> impl Strategy<Value = LeastSquaresCost> {
    (prop::collection::vec(-2.0f64..2.0, 9), prop::collection::vec(-2.0f64..2.0, 3)).prop_filter_map(
        "well-posed",
        |(b, y)| {
            let b = DMatrix::from_column_slice(3, 3, &b) + DMatrix::identity(3, 3) * 0.5;
            LeastSquaresCost::new(b, DVector::from_vec(y)).ok()
        },
    )
}

fn svm() -> impl Strategy<Value = SmoothedHingeSvmCost> {
    (prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, any::<bool>()), 1..12), 0.05f64..1.0, 0.1f64..3.0)
        .prop_map(|(pts, mu, c)| {
            let feats = pts.iter().map(|&(a, b, _)| DVector::from_vec(vec![a, b])).collect();
            let labels = pts.iter().map(|&(_, _, l)| if l { 1.0 } else { -1.0 }).collect();
            SmoothedHingeSvmCost::new(feats, labels, c, mu).unwrap()
        })
}

/// Central differences with a step scaled to the point.
fn fd_gradient(f: &dyn LocalCost, x: &DVector<f64>) -> DVector<f64> {
    let h = 1e-6;
    DVector::from_fn(x.len(), |i, _| {
        let mut p = x.clone();
        let mut m = x.clone();
        p[i] += h;
        m[i] -= h;
        (f.evaluate(&p) - f.evaluate(&m)) / (2.0 * h)
    })
}

fn fd_hessian(f: &dyn LocalCost, x: &DVector<f64>) -> DMatrix<f64> {
    let h = 1e-5;
    let n = x.len();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut p = x.clone();
        let mut m = x.clone();
        p[j] += h;
        m[j] -= h;
        let col = (f.gradient(&p) - f.gradient(&m)) / (2.0 * h);
        out.set_column(j, &col);
    }
    out
}

fn check_cost(f: &dyn LocalCost, x: &DVector<f64>, y: &DVector<f64>) -> Result<(), TestCaseError> {
    let g = f.gradient(x);
    let fd = fd_gradient(f, x);
    prop_assert!((&g - &fd).norm() <= 1e-5 * (1.0 + g.norm()), "gradient {g} vs {fd}");
    let v = f.strong_convexity();
    let l = f.smoothness();
    let d = y - x;
    let lower = f.evaluate(y) - f.evaluate(x) - g.dot(&d);
    prop_assert!(lower >= v * d.norm_squared() - 1e-9 * (1.0 + lower.abs()), "strong convexity witness");
    let gd = (f.gradient(y) - &g).norm();
    prop_assert!(gd <= l * d.norm() * (1.0 + 1e-9) + 1e-12, "smoothness witness");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn least_squares_derivatives(f in least_squares(), x in vecn(3), y in vecn(3)) {
        check_cost(&f, &x, &y)?;
        let h = fd_hessian(&f, &x);
        prop_assert!((&h - f.hessian(&x)).amax() <= 1e-6);
    }

    #[test]
    fn svm_derivatives(f in svm(), x in vecn(3), y in vecn(3)) {
        check_cost(&f, &x, &y)?;
        let h = fd_hessian(&f, &x);
        let exact = f.hessian(&x);
        // The second derivative jumps at the smoothing breakpoints.
        prop_assume!(!kink_within(&f, &x, 1e-4));
        prop_assert!((&h - &exact).amax() <= 1e-4 * (1.0 + exact.amax()));
    }

    #[test]
    fn resolve_meets_tolerance(f in svm(), a in 0.01f64..50.0, b in vecn(3)) {
        let x = f.resolve(a, &b).unwrap();
        prop_assert!(resolve_residual(&f, a, &b, &x) <= RESOLVE_TOL * (1.0 + b.norm()));
    }

    #[test]
    fn least_squares_resolve_is_exact(f in least_squares(), a in 0.0f64..50.0, b in vecn(3)) {
        let x = f.resolve(a, &b).unwrap();
        prop_assert!(resolve_residual(&f, a, &b, &x) <= 1e-9 * (1.0 + b.norm()));
    }

    #[test]
    fn primal_step_residual(f in least_squares(), deg in 1usize..6, c in 0.05f64..10.0,
                            alpha in vecn(3), ns in vecn(3), z in vecn(3)) {
        let x = x_update_solve(&f, deg, c, &alpha, &ns, &z).unwrap();
        let d = deg as f64;
        let r = f.gradient(&x) + &alpha + 2.0 * c * d * &x - c * d * &z - c * &ns;
        prop_assert!(r.norm() <= 1e-8 * (1.0 + (c * d * &z + c * &ns - &alpha).norm()));
    }

    #[test]
    fn huber_is_continuous_and_monotone(t in -5.0f64..5.0, mu in 0.01f64..2.0) {
        let eps = 1e-9;
        prop_assert!((huber_hinge(t + eps, mu) - huber_hinge(t, mu)).abs() <= 2.0 * eps);
        prop_assert!(huber_hinge(t + 0.1, mu) >= huber_hinge(t, mu));
        prop_assert!(huber_hinge(t, mu) >= 0.0);
    }
}

/// True when some hinge argument `1 − y(wᵀa + b)` sits within `tol` of `0` or `μ`.
fn kink_within(f: &SmoothedHingeSvmCost, x: &DVector<f64>, tol: f64) -> bool {
    let n = x.len();
    f.features.iter().zip(&f.labels).any(|(a, &y)| {
        let t = 1.0 - y * (a.dot(&x.rows(0, n - 1)) + x[n - 1]);
        t.abs() < tol || (t - f.mu).abs() < tol
    })
}

#[test]
fn minimizer_zeroes_global_gradient() {
    let costs: Vec<SharedCost> = (0..4)
        .map(|i| {
            let b = DMatrix::from_fn(3, 3, |r, c| ((r * 3 + c + i) as f64 * 0.37).sin() + if r == c { 2.0 } else { 0.0 });
            let y = DVector::from_fn(3, |r, _| (r + i) as f64 - 1.5);
            Arc::new(LeastSquaresCost::new(b, y).unwrap()) as SharedCost
        })
        .collect();
    let x = centralized_minimizer(&costs, 3).unwrap();
    let g = costs.iter().fold(DVector::zeros(3), |acc, c| acc + c.gradient(&x));
    assert!(g.norm() < 1e-10);
    // Normal equations oracle.
    let mut h = DMatrix::zeros(3, 3);
    let mut rhs = DVector::zeros(3);
    for c in &costs {
        h += c.hessian(&x);
        rhs += c.hessian(&x) * &x - c.gradient(&x);
    }
    let direct = h.lu().solve(&rhs).unwrap();
    assert!((direct - x).norm() < 1e-10);
}

use jcone::flow::*;
use nalgebra::{dvector, DMatrix, DVector};

/// Scaling-and-squaring with a truncated Taylor series.
fn expm_oracle(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.abs().row_sum().max();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let b = a / 2f64.powi(s);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..30 {
        term = &term * &b / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Classical fixed-step RK4 on the Lorenz field.
fn rk4_lorenz(x0: [f64; 3], t: f64, steps: usize) -> [f64; 3] {
    let f = |x: [f64; 3]| [10.0 * (x[1] - x[0]), x[0] * (28.0 - x[2]) - x[1], x[0] * x[1] - 8.0 / 3.0 * x[2]];
    let h = t / steps as f64;
    let mut x = x0;
    let add = |x: [f64; 3], k: [f64; 3], c: f64| [x[0] + c * k[0], x[1] + c * k[1], x[2] + c * k[2]];
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f(add(x, k1, h / 2.0));
        let k3 = f(add(x, k2, h / 2.0));
        let k4 = f(add(x, k3, h));
        for i in 0..3 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

#[test]
fn lorenz_matches_richardson_oracle() {
    let m = VectorFieldModel::lorenz_classic();
    let x = flow_to(&m, &dvector![1.0, 1.0, 1.0], 1.0, &Tolerances::default()).unwrap();
    let coarse = rk4_lorenz([1.0, 1.0, 1.0], 1.0, 4000);
    let fine = rk4_lorenz([1.0, 1.0, 1.0], 1.0, 8000);
    for i in 0..3 {
        let extrapolated = fine[i] + (fine[i] - coarse[i]) / 15.0;
        assert!((x[i] - extrapolated).abs() < 1e-6, "component {i}: {} vs {extrapolated}", x[i]);
    }
}

#[test]
fn lorenz_orbit_stays_in_trapping_region() {
    let m = VectorFieldModel::lorenz_classic();
    let tr = integrate(&m, &dvector![1.0, 1.0, 1.0], 50.0, &Tolerances::default()).unwrap();
    // V = ρx² + σy² + σ(z − 2ρ)² decreases outside a bounded ellipsoid
    let v = |x: &DVector<f64>| 28.0 * x[0] * x[0] + 10.0 * x[1] * x[1] + 10.0 * (x[2] - 56.0).powi(2);
    let v_max = tr.states.iter().map(v).fold(0.0, f64::max);
    assert!(v_max < 10.0 * 100.0 * 100.0);
    for i in 0..=5000 {
        let x = tr.state_at(i as f64 * 0.01).unwrap();
        assert!(x.norm() < 100.0);
    }
    assert!(tr.max_norm() < 100.0);
    assert!(tr.states.iter().all(|x| x.iter().all(|v| v.is_finite())));
}

#[test]
fn linear_cocycle_matches_matrix_exponential() {
    let a = DMatrix::from_row_slice(3, 3, &[-0.5, 1.0, 0.2, -1.0, -0.3, 0.0, 0.4, 0.1, 0.6]);
    let m = VectorFieldModel::linear(a.clone()).unwrap();
    for t in [0.0, 0.5, 2.0] {
        let seg = tangent_cocycle(&m, &dvector![1.0, 0.0, 0.0], t, &Tolerances::default()).unwrap();
        let oracle = expm_oracle(&(&a * t));
        assert!((&seg.matrix - &oracle).amax() < 1e-8, "t = {t}");
        assert!(seg.liouville_ok(1e-6));
    }
}

#[test]
fn cocycle_invariants_hold_for_all_builtin_models() {
    let models = [
        (VectorFieldModel::linear(DMatrix::from_row_slice(2, 2, &[0.1, -2.0, 1.0, -0.4])).unwrap(), dvector![1.0, 0.5]),
        (VectorFieldModel::lorenz_classic(), dvector![1.0, 1.0, 1.0]),
        (VectorFieldModel::planar_limit_cycle(1.0), dvector![0.3, -0.8, 0.5]),
        (VectorFieldModel::planar_limit_cycle(0.0), dvector![1.3, 0.2, -0.5]),
    ];
    let tol = Tolerances::default();
    for (m, x0) in &models {
        let (t, s) = (0.6, 0.45);
        let a = tangent_cocycle(m, x0, t, &tol).unwrap();
        let b = tangent_cocycle(m, &a.end, s, &tol).unwrap();
        let ab = tangent_cocycle(m, x0, t + s, &tol).unwrap();
        let scale = ab.matrix.amax().max(1.0);
        assert!((&b.matrix * &a.matrix - &ab.matrix).amax() < 1e-6 * scale, "{}", m.family());
        for seg in [&a, &b, &ab] {
            assert!(seg.liouville_ok(1e-6), "{}: {}", m.family(), seg.liouville_residual);
        }
    }
}

#[test]
fn wedge_of_cocycle_is_multiplicative() {
    let m = VectorFieldModel::lorenz_classic();
    let tol = Tolerances::default();
    let a = tangent_cocycle(&m, &dvector![1.0, 2.0, 20.0], 0.3, &tol).unwrap();
    let b = tangent_cocycle(&m, &a.end, 0.2, &tol).unwrap();
    let ab = tangent_cocycle(&m, &dvector![1.0, 2.0, 20.0], 0.5, &tol).unwrap();
    let lhs = wedge_cocycle(&ab, 2).unwrap();
    let rhs = wedge_cocycle(&b, 2).unwrap() * wedge_cocycle(&a, 2).unwrap();
    assert!((&lhs - &rhs).amax() < 1e-6 * lhs.amax());
    let top = wedge_cocycle(&ab, 3).unwrap();
    assert!((top[(0, 0)] / (-41.0f64 / 3.0 * 0.5).exp() - 1.0).abs() < 1e-6);
}

#[test]
fn lorenz_lyapunov_spectrum() {
    let m = VectorFieldModel::lorenz_classic();
    let est = lyapunov_exponents(&m, &dvector![1.0, 1.0, 1.0], 2000.0, 3, &LyapunovOptions::default()).unwrap();
    let chi = &est.exponents;
    assert!((chi[0] - 0.906).abs() < 0.05, "{chi:?}");
    assert!(chi[1].abs() < 0.02, "{chi:?}");
    assert!((est.sum() + 41.0 / 3.0).abs() < 0.01, "{chi:?}");
    assert!(est.converged, "drift {}", est.drift);
}

use jcone::cone_field::*;
use jcone::flow::*;
use jcone::jsep_analysis::{Monotonicity, SeparationLevel};
use jcone::linalg;
use jcone::pseudo_metric::QuadraticForm;
use nalgebra::{dvector, DMatrix, DVector};
use proptest::prelude::*;
use std::f64::consts::TAU;

fn constant(d: &[f64]) -> ConstantField {
    ConstantField::new(QuadraticForm::diagonal(d).unwrap())
}

/// `d/dt J(DX_t(x) v)` at 0 by a central difference of the integrated cocycle.
fn derivative_oracle(form: &QuadraticForm, model: &VectorFieldModel, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let h = 1e-3 / linalg::spectral_norm(&model.jacobian(x)).max(1.0);
    let tol = Tolerances::new(1e-13, 1e-15);
    let plus = tangent_cocycle(model, x, h, &tol).unwrap().matrix * v;
    let minus = tangent_cocycle(model, x, -h, &tol).unwrap().matrix * v;
    (form.eval(&plus) - form.eval(&minus)) / (2.0 * h)
}

fn signature_form(raw: &[f64], n: usize, q: usize) -> QuadraticForm {
    // congruent image of diag(−I_q, I_p) under a well-conditioned matrix
    let s = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.3 * raw[i * n + j] });
    QuadraticForm::standard(q, n).congruent(&s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn form_derivative_matches_difference_quotient(
        which in 0usize..3,
        raw in proptest::collection::vec(-1.0f64..1.0, 9),
        xs in proptest::collection::vec(-1.0f64..1.0, 3),
        vs in proptest::collection::vec(-1.0f64..1.0, 3),
        q in 1usize..3,
    ) {
        let model = match which {
            0 => VectorFieldModel::lorenz_classic(),
            1 => VectorFieldModel::planar_limit_cycle(1.0),
            _ => VectorFieldModel::linear(DMatrix::from_row_slice(3, 3, &raw)).unwrap(),
        };
        let x = DVector::from_vec(xs) * if which == 0 { 15.0 } else { 1.0 };
        let v = DVector::from_vec(vs);
        prop_assume!(v.norm() > 1e-3);
        let form = signature_form(&raw, 3, q);
        let field = ConstantField::new(form.clone());
        let got = form_derivative(&field, &model, &x, &v).unwrap();
        let want = derivative_oracle(&form, &model, &x, &v);
        let scale = form.norm() * linalg::spectral_norm(&model.jacobian(&x)).max(1.0) * v.norm_squared();
        prop_assert!((got - want).abs() <= 1e-5 * scale.max(got.abs()), "{} vs {}", got, want);
    }

    #[test]
    fn projector_identities(
        raw in proptest::collection::vec(-1.0f64..1.0, 9),
        xs in proptest::collection::vec(-20.0f64..20.0, 3),
    ) {
        let model = VectorFieldModel::lorenz_classic();
        let x = DVector::from_vec(xs);
        let field = ConstantField::new(signature_form(&raw, 3, 1));
        match poincare_project(&field, &model, &x) {
            Ok(p) => {
                prop_assert!(p.identity_residual() <= 1e-10);
                prop_assert_eq!(p.restricted_form.index_q(), 1);
                // range(Π) = N_x
                let jx = p.form.matrix() * &p.flow;
                prop_assert!((p.projector.transpose() * &jx).amax() <= 1e-10 * jx.amax());
            }
            Err(jcone::Error::NonAdmissibleDirection(_)) => {}
            Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
        }
    }

    #[test]
    fn reversal_duality_on_linear_flows(
        diag in proptest::collection::vec(0.3f64..2.0, 3),
        raw in proptest::collection::vec(-1.0f64..1.0, 9),
        x0 in proptest::collection::vec(-1.0f64..1.0, 3),
        t in 0.2f64..2.0,
    ) {
        let s = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.25 * raw[i * 3 + j] });
        let d = linalg::diag(&[-diag[0] - diag[1], -diag[1], diag[2]]);
        let a = &s * d * s.clone().try_inverse().unwrap();
        let model = VectorFieldModel::linear(a).unwrap();
        let field = constant(&[-1.0, -1.0, 1.0]);
        let x0 = DVector::from_vec(x0);
        let grid = GridOptions::fixed_step(0.25);
        let fwd = check_separation_along_orbit(&field, &model, &x0, t, &grid).unwrap();
        let end = flow_to(&model, &x0, t, &Tolerances::default()).unwrap();
        let neg = ScaledField { inner: &field, factor: -1.0 };
        let back = check_separation_along_orbit(&neg, &model.reversed(), &end, t, &grid).unwrap();
        let margin = |r: &OrbitSeparationReport| r.intervals.iter().chain(&r.anchored)
            .map(|i| i.verdict.certificate_margin.abs()).fold(f64::INFINITY, f64::min);
        prop_assume!(margin(&fwd).min(margin(&back)) > 1e-6);
        prop_assert_eq!(
            fwd.level == SeparationLevel::StrictlySeparated,
            back.level == SeparationLevel::StrictlySeparated
        );
    }

    #[test]
    fn verdicts_are_scale_invariant(c in 0.01f64..100.0, t in 0.3f64..2.0) {
        let model = VectorFieldModel::linear(linalg::diag(&[-2.0, -1.0, 1.0])).unwrap();
        let base = constant(&[-1.0, -1.0, 1.0]);
        let scaled = ScaledField { inner: &base, factor: c };
        let x0 = dvector![0.2, 0.5, 1.0];
        let grid = GridOptions::fixed_step(0.25);
        let a = check_separation_along_orbit(&base, &model, &x0, t, &grid).unwrap();
        let b = check_separation_along_orbit(&scaled, &model, &x0, t, &grid).unwrap();
        prop_assert_eq!(a.level, b.level);
        let samples = OrbitSamples::along(&model, &x0, t, 4, true, &Tolerances::default()).unwrap();
        prop_assert_eq!(
            check_lpf_strict_monotone(&base, &model, &samples).unwrap().verdict,
            check_lpf_strict_monotone(&scaled, &model, &samples).unwrap().verdict
        );

        let rotation = VectorFieldModel::linear(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])).unwrap();
        let j2 = constant(&[-1.0, 1.0]);
        let j2c = ScaledField { inner: &j2, factor: c };
        let a = check_separation_along_orbit(&j2, &rotation, &dvector![1.0, 0.0], t, &grid).unwrap();
        let b = check_separation_along_orbit(&j2c, &rotation, &dvector![1.0, 0.0], t, &grid).unwrap();
        prop_assert_eq!(a.level, b.level);
    }
}

fn limit_cycle_orbit() -> (VectorFieldModel, PeriodicOrbit) {
    let model = VectorFieldModel::planar_limit_cycle(1.0);
    let section = Section::coordinate(3, 1, 0.0).unwrap();
    let orbit = find_periodic_orbit(&model, &section, &dvector![1.05, 0.0, 0.02], 6.0, &PeriodicOrbitOptions::default()).unwrap();
    (model, orbit)
}

#[test]
fn limit_cycle_lpf_spectrum_matches_multipliers() {
    let (model, orbit) = limit_cycle_orbit();
    let field = CylindricalField::new(-1.0, 1.0, -1.0).unwrap();
    let lpf = linear_poincare_flow(&field, &model, &orbit.anchor, orbit.period, &Tolerances::new(1e-12, 1e-14)).unwrap();
    assert_eq!(lpf.matrix.shape(), (2, 2));
    let mut got: Vec<f64> = spectrum(&lpf.matrix).iter().map(|e| e.modulus()).collect();
    got.sort_by(|a, b| b.total_cmp(a));
    let want: Vec<f64> = orbit.multipliers.iter().map(|m| m.modulus()).collect();
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-6 * w, "{got:?} vs {want:?}");
    }
    assert!((want[0] - (-TAU).exp()).abs() <= 1e-6 * want[0]);
    assert!((want[1] - (-2.0 * TAU).exp()).abs() <= 1e-6 * want[1]);
}

#[test]
fn lorenz_orbit_floquet_certificate() {
    let model = VectorFieldModel::lorenz_classic();
    let section = Section::coordinate(3, 2, 27.0).unwrap();
    let orbit = find_periodic_orbit(&model, &section, &dvector![-13.7636, -19.5787, 27.0], 1.5587, &PeriodicOrbitOptions::default()).unwrap();
    let field = FloquetField::new(&model, &orbit).unwrap();
    assert_eq!(field.index(), 1);
    let sep = check_separation_along_orbit(&field, &model, &orbit.anchor, orbit.period, &GridOptions::default()).unwrap();
    assert_eq!(sep.level, SeparationLevel::StrictlySeparated);
    assert!(sep.grid_converged);
    assert_eq!(sep.reversal_consistent, Some(true));

    let rep = period_map_monotonicity(&field, &model, &orbit, &Tolerances::new(1e-12, 1e-14)).unwrap();
    assert_eq!(rep.monotonicity, Monotonicity::StrictlyMonotone);
    let (lo, hi) = (orbit.multipliers[1].modulus(), orbit.multipliers[0].modulus());
    // μ_s ≈ 1e-10 sits near the rounding floor ε‖M‖ of the computed monodromy
    let floor = 1e-14 * orbit.monodromy.norm();
    assert!((rep.polar.r_minus[0] - lo).abs() <= 1e-6 * lo + floor, "{:?} vs {lo}", rep.polar.r_minus);
    assert!((rep.polar.r_plus[0] - hi).abs() <= 1e-6 * hi, "{:?} vs {hi}", rep.polar.r_plus);
}

#[test]
fn adapted_forms_at_lorenz_equilibria() {
    let model = VectorFieldModel::lorenz_classic();
    let seeds = vec![dvector![0.0, 0.0, 0.0], dvector![8.0, 8.0, 27.0], dvector![-8.0, -8.0, 27.0]];
    let found = find_equilibria(&model, &seeds, &EquilibriumOptions::default()).unwrap();
    assert_eq!(found.equilibria.len(), 3);
    for eq in &found.equilibria {
        let a = model.jacobian(&eq.point);
        let adapted = adapted_form_search(&a, eq.index).unwrap();
        let field = ConstantField::new(adapted.form.clone());
        let check = singularity_form_positivity(&field, &model, &eq.point).unwrap();
        assert!(check.passed(), "{check:?} at {}", eq.point);
    }
}

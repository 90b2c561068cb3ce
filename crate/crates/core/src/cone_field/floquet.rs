//! Forms adapted to the Floquet frame of a hyperbolic periodic orbit.
//!
//! With `T(t) = M(t) T₀ e^{−tG}` the field `J = T⁻ᵀ η T⁻¹` is periodic, and in
//! its frames the cocycle from `s` to `t` reads `e^{(t−s)G}`.

use nalgebra::{DMatrix, DVector};

use super::field::FormField;
use super::poincare::{lpf_matrix, poincare_project, LinearPoincareFlow};
use crate::error::{Error, Result};
use crate::flow::{flow_to, interval_cocycles, tangent_cocycle, PeriodicOrbit, Tolerances, VectorFieldModel};
use crate::jsep_analysis::{monotonicity_of, polar_decompose, Monotonicity, PolarDecomposition, DEFAULT_MONOTONE_TOL};
use crate::linalg;

const MAX_FRAME_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct FloquetField {
    model: VectorFieldModel,
    period: f64,
    /// `η`: −1 on contracting directions, +1 on the flow and expanding ones.
    eta: Vec<f64>,
    generator: DMatrix<f64>,
    times: Vec<f64>,
    points: Vec<DVector<f64>>,
    /// `T(t_k)`.
    frames: Vec<DMatrix<f64>>,
    index: usize,
    pub tube_radius: f64,
    pub integration: Tolerances,
}

/// Unit vector spanning the (numerical) kernel of `m`.
fn kernel_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let (i, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
    v_t.row(i).transpose()
}

impl FloquetField {
    pub fn new(model: &VectorFieldModel, orbit: &PeriodicOrbit) -> Result<Self> {
        Self::with_samples(model, orbit, 256)
    }

    pub fn with_samples(model: &VectorFieldModel, orbit: &PeriodicOrbit, samples: usize) -> Result<Self> {
        if let Some(reason) = &orbit.suspect {
            return Err(Error::SuspectOrbit(reason.clone()));
        }
        let n = model.dim();
        if orbit.anchor.len() != n || orbit.multipliers.len() + 1 != n {
            return Err(Error::DimensionMismatch { expected: n, found: orbit.anchor.len() });
        }
        let period = orbit.period;
        let m = &orbit.monodromy;
        let mut frame0 = DMatrix::zeros(n, n);
        let mut generator = DMatrix::zeros(n, n);
        let mut eta = vec![1.0; n];
        // T(T) = T₀ · diag(sign μ) on real columns
        let mut end_signs = vec![1.0; n];
        let mut col = 0;
        for mu in &orbit.multipliers {
            let rho = mu.modulus();
            if (rho - 1.0).abs() <= 1e-8 {
                return Err(Error::NotHyperbolic((rho - 1.0).abs()));
            }
            let sign = if rho < 1.0 { -1.0 } else { 1.0 };
            if mu.im.abs() <= 1e-10 * rho {
                let v = kernel_vector(&(m - DMatrix::identity(n, n) * mu.re));
                frame0.set_column(col, &v);
                generator[(col, col)] = rho.ln() / period;
                eta[col] = sign;
                end_signs[col] = mu.re.signum();
                col += 1;
            } else if mu.im > 0.0 {
                let mut big = DMatrix::zeros(2 * n, 2 * n);
                let shifted = m - DMatrix::identity(n, n) * mu.re;
                big.view_mut((0, 0), (n, n)).copy_from(&shifted);
                big.view_mut((n, n), (n, n)).copy_from(&shifted);
                big.view_mut((0, n), (n, n)).copy_from(&(DMatrix::identity(n, n) * mu.im));
                big.view_mut((n, 0), (n, n)).copy_from(&(DMatrix::identity(n, n) * -mu.im));
                let w = kernel_vector(&big);
                let (vr, vi) = (w.rows(0, n).into_owned(), w.rows(n, n).into_owned());
                // M [vr vi] = [vr vi] ρ R(θ), R(θ) = [[c, s], [−s, c]]
                let theta = mu.im.atan2(mu.re);
                frame0.set_column(col, &vr);
                frame0.set_column(col + 1, &vi);
                let (a, b) = (rho.ln() / period, theta / period);
                generator[(col, col)] = a;
                generator[(col + 1, col + 1)] = a;
                generator[(col, col + 1)] = b;
                generator[(col + 1, col)] = -b;
                eta[col] = sign;
                eta[col + 1] = sign;
                col += 2;
            }
        }
        if col != n - 1 {
            return Err(Error::NoCertificate("could not pair the complex multipliers".into()));
        }
        let flow = model.eval(&orbit.anchor);
        frame0.set_column(n - 1, &(&flow / flow.norm()));
        let svd = frame0.clone().svd(false, false);
        let cond = svd.singular_values.max() / svd.singular_values.min();
        if !(cond <= MAX_FRAME_CONDITION) {
            return Err(Error::NoCertificate(format!("Floquet frame condition {cond:.3e}")));
        }

        let integration = Tolerances::new(1e-12, 1e-14);
        let count = samples.max(8);
        let times: Vec<f64> = (0..=count).map(|i| period * i as f64 / count as f64).collect();
        let ic = interval_cocycles(model, &orbit.anchor, &times, &integration)?;
        let scale = ic.points.iter().map(|p| p.amax()).fold(1.0, f64::max);

        // expanding and flow columns go forward from t = 0, contracting ones
        // backward from t = T, each in its numerically stable direction
        let mut forward = vec![frame0.clone()];
        for (k, step) in ic.steps.iter().enumerate() {
            let e = (&generator * -(times[k + 1] - times[k])).exp();
            forward.push(step * &forward[k] * e);
        }
        let mut backward = vec![&frame0 * linalg::diag(&end_signs)];
        for k in (0..ic.steps.len()).rev() {
            let inv = ic.steps[k].clone().try_inverse().ok_or(Error::Singular)?;
            let e = (&generator * (times[k + 1] - times[k])).exp();
            let next = inv * backward.last().expect("non-empty") * e;
            backward.push(next);
        }
        backward.reverse();
        let frames: Vec<DMatrix<f64>> = forward
            .iter()
            .zip(&backward)
            .map(|(f, b)| DMatrix::from_fn(n, n, |i, j| if eta[j] < 0.0 { b[(i, j)] } else { f[(i, j)] }))
            .collect();

        let (mut times, mut points, mut frames) = (ic.times, ic.points, frames);
        // the endpoint duplicates the anchor; keeping it would give two
        // numerically different frames near x = anchor
        times.pop();
        points.pop();
        frames.pop();
        Ok(Self {
            model: model.clone(),
            period,
            index: eta.iter().filter(|s| **s < 0.0).count(),
            eta,
            generator,
            times,
            points,
            frames,
            tube_radius: 1e-4 * scale,
            integration,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    /// `T(t)` for the orbit time matching `x`.
    fn frame_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.len() != self.eta.len() {
            return Err(Error::DimensionMismatch { expected: self.eta.len(), found: x.len() });
        }
        let (i, _) = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - x).norm()))
            .fold((0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
        let xi = &self.points[i];
        let flow = self.model.eval(xi);
        let mut tau = flow.dot(&(x - xi)) / flow.norm_squared();
        // Newton on the orbit time: the first-order offset alone biases the
        // field derivative at O(τ · curvature)
        for _ in 0..6 {
            let end = flow_to(&self.model, xi, tau, &self.integration)?;
            let fx = self.model.eval(&end);
            let delta = fx.dot(&(x - &end)) / fx.norm_squared();
            tau += delta;
            if delta.abs() <= 1e-15 * (self.times[i] + tau).abs().max(1.0) {
                break;
            }
        }
        let (step, end) = if tau == 0.0 {
            (DMatrix::identity(x.len(), x.len()), xi.clone())
        } else {
            let seg = tangent_cocycle(&self.model, xi, tau, &self.integration)?;
            (seg.matrix, seg.end)
        };
        if (&end - x).norm() > self.tube_radius {
            return Err(Error::OutsideDomain);
        }
        let e = (&self.generator * -tau).exp();
        Ok(step * &self.frames[i] * e)
    }

    fn pull(&self, frame: &DMatrix<f64>, inner: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let inv = frame.clone().try_inverse().ok_or(Error::Singular)?;
        Ok(linalg::symmetrize(&(inv.transpose() * inner * &inv)))
    }
}

impl FormField for FloquetField {
    fn dim(&self) -> usize {
        self.eta.len()
    }

    fn index(&self) -> usize {
        self.index
    }

    fn matrix_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.pull(&self.frame_at(x)?, &linalg::diag(&self.eta))
    }

    /// `∇_X J = T⁻ᵀ (Gᵀη + ηG) T⁻¹ − J A − Aᵀ J`.
    fn flow_derivative(&self, model: &VectorFieldModel, x: &DVector<f64>) -> Option<Result<DMatrix<f64>>> {
        let run = || {
            let frame = self.frame_at(x)?;
            let eta = linalg::diag(&self.eta);
            let j = self.pull(&frame, &eta)?;
            let gen = self.pull(&frame, &(self.generator.transpose() * &eta + &eta * &self.generator))?;
            let a = model.jacobian(x);
            Ok(gen - &j * &a - a.transpose() * &j)
        };
        Some(run())
    }

    fn label(&self) -> String {
        format!("floquet(T={:.6}, index={})", self.period, self.index)
    }
}

#[derive(Debug, Clone)]
pub struct PeriodMapReport {
    pub lpf: LinearPoincareFlow,
    pub polar: PolarDecomposition,
    pub monotonicity: Monotonicity,
}

/// The period-`T` linear Poincaré flow at the anchor, its polar factor and
/// monotonicity verdict.
pub fn period_map_monotonicity(field: &dyn FormField, model: &VectorFieldModel, orbit: &PeriodicOrbit, tol: &Tolerances) -> Result<PeriodMapReport> {
    let start = poincare_project(field, model, &orbit.anchor)?;
    let seg = tangent_cocycle(model, &orbit.anchor, orbit.period, tol)?;
    // the orbit closes, so both ends use the anchor's normal basis and form
    let matrix = lpf_matrix(&start, &start, &seg.matrix);
    let polar = polar_decompose(&start.restricted_form, &matrix)?;
    let monotonicity = monotonicity_of(&polar, DEFAULT_MONOTONE_TOL);
    let lpf = LinearPoincareFlow { end: start.clone(), start, time: orbit.period, matrix, cocycle: seg.matrix };
    Ok(PeriodMapReport { lpf, polar, monotonicity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone_field::field::numerical_flow_derivative;
    use crate::cone_field::poincare::{check_lpf_strict_monotone, MonotonicityVerdict, OrbitSamples};
    use crate::cone_field::separation::{check_separation_along_orbit, GridOptions};
    use crate::flow::{find_periodic_orbit, PeriodicOrbitOptions, Section};
    use crate::jsep_analysis::SeparationLevel;
    use nalgebra::dvector;
    use std::f64::consts::TAU;

    fn limit_cycle() -> (VectorFieldModel, PeriodicOrbit) {
        let model = VectorFieldModel::planar_limit_cycle(1.0);
        let section = Section::coordinate(3, 1, 0.0).unwrap();
        let orbit = find_periodic_orbit(&model, &section, &dvector![1.05, 0.0, 0.02], 6.0, &PeriodicOrbitOptions::default()).unwrap();
        (model, orbit)
    }

    #[test]
    fn limit_cycle_period_map_matches_multipliers() {
        let (model, orbit) = limit_cycle();
        let field = FloquetField::new(&model, &orbit).unwrap();
        assert_eq!(field.index(), 2);
        let rep = period_map_monotonicity(&field, &model, &orbit, &Tolerances::new(1e-12, 1e-14)).unwrap();
        assert_eq!(rep.monotonicity, Monotonicity::StrictlyMonotone);
        assert!(rep.polar.r_plus.is_empty());
        let want = [(-TAU).exp(), (-2.0 * TAU).exp()];
        for (r, w) in rep.polar.r_minus.iter().zip(want) {
            assert!((r - w).abs() <= 1e-6 * w, "{:?}", rep.polar.r_minus);
        }
    }

    #[test]
    fn limit_cycle_is_strictly_separated_and_monotone() {
        let (model, orbit) = limit_cycle();
        let field = FloquetField::new(&model, &orbit).unwrap();
        let rep = check_separation_along_orbit(&field, &model, &orbit.anchor, orbit.period, &GridOptions::default()).unwrap();
        assert_eq!(rep.level, SeparationLevel::StrictlySeparated);
        let samples = OrbitSamples::along(&model, &orbit.anchor, orbit.period, 16, false, &Tolerances::new(1e-12, 1e-14)).unwrap();
        assert_eq!(check_lpf_strict_monotone(&field, &model, &samples).unwrap().verdict, MonotonicityVerdict::Strict);
    }

    #[test]
    fn analytic_derivative_matches_finite_difference() {
        let (model, orbit) = limit_cycle();
        let field = FloquetField::new(&model, &orbit).unwrap();
        let samples = OrbitSamples::along(&model, &orbit.anchor, orbit.period, 5, false, &Tolerances::new(1e-12, 1e-14)).unwrap();
        for x in &samples.points {
            let analytic = field.flow_derivative(&model, x).unwrap().unwrap();
            let fd = numerical_flow_derivative(&field, &model, x).unwrap();
            assert!((&analytic - &fd).amax() <= 1e-5 * analytic.amax().max(1.0), "{analytic} vs {fd}");
        }
    }

    #[test]
    fn far_points_are_outside() {
        let (model, orbit) = limit_cycle();
        let field = FloquetField::new(&model, &orbit).unwrap();
        assert!(matches!(field.matrix_at(&dvector![0.2, 0.0, 0.0]), Err(Error::OutsideDomain)));
    }
}

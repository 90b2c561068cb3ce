//! The J-orthogonal linear Poincaré flow `Pᵗ v = Π_{X_t x} DX_t v`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::derivative::form_derivative_matrix;
use super::field::FormField;
use crate::error::{Error, Result};
use crate::flow::{integrate, tangent_cocycle, Tolerances, VectorFieldModel};
use crate::linalg;
use crate::pseudo_metric::QuadraticForm;

#[derive(Debug, Clone)]
pub struct PoincareProjection {
    pub base: DVector<f64>,
    pub flow: DVector<f64>,
    /// Euclidean-orthonormal basis of `N_x = {v : ⟨J X, v⟩ = 0}`.
    pub normal_basis: DMatrix<f64>,
    /// `Π = I − X (J X)ᵀ / J(X)`.
    pub projector: DMatrix<f64>,
    /// `J` restricted to `N_x` in `normal_basis` coordinates.
    pub restricted_form: QuadraticForm,
    pub form: QuadraticForm,
}

impl PoincareProjection {
    /// `max(‖Π² − Π‖, ‖Π X‖ / ‖X‖)`.
    pub fn identity_residual(&self) -> f64 {
        let p = &self.projector;
        let idem = (p * p - p).amax();
        let kills = (p * &self.flow).amax() / self.flow.amax();
        idem.max(kills)
    }
}

/// Relative tolerance on `J(X)` below which the flow direction counts as null.
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

pub fn poincare_project(field: &dyn FormField, model: &VectorFieldModel, x: &DVector<f64>) -> Result<PoincareProjection> {
    let n = model.dim();
    if x.len() != n || field.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    if n < 2 {
        return Err(Error::BadDimension("normal space needs n ≥ 2".into()));
    }
    let flow = model.eval(x);
    let speed = flow.norm();
    if speed == 0.0 || speed <= 1e-14 * x.norm() {
        return Err(Error::SingularPoint);
    }
    let form = field.form_at(x)?;
    let jx = form.eval(&flow);
    if jx <= ADMISSIBILITY_TOL * form.norm() * speed * speed {
        return Err(Error::NonAdmissibleDirection(jx));
    }
    let jflow = form.matrix() * &flow;
    let projector = DMatrix::identity(n, n) - &flow * jflow.transpose() / jx;
    let normal_basis = householder_complement(&jflow);
    let restricted = QuadraticForm::new(linalg::symmetrize(&(normal_basis.transpose() * form.matrix() * &normal_basis)))?;
    if restricted.index_q() != form.index_q() {
        return Err(Error::InvalidArgument(format!(
            "restricted form has index {}, expected {}",
            restricted.index_q(),
            form.index_q()
        )));
    }
    Ok(PoincareProjection { base: x.clone(), flow, normal_basis, projector, restricted_form: restricted, form })
}

/// Orthonormal basis of `w^⊥`: the columns `j ≠ k` of the Householder
/// reflection sending `e_k` to `∓ w / ‖w‖`, `k = argmax |w_k|`. Unlike an SVD
/// null space it varies continuously with `w` (for fixed `k`).
pub(crate) fn householder_complement(w: &DVector<f64>) -> DMatrix<f64> {
    let n = w.len();
    let u = w / w.norm();
    let k = u.iamax();
    let mut v = u.clone();
    v[k] += u[k].signum();
    let h = DMatrix::identity(n, n) - &v * v.transpose() * (2.0 / v.norm_squared());
    DMatrix::from_columns(&(0..n).filter(|&j| j != k).map(|j| h.column(j).into_owned()).collect::<Vec<_>>())
}

/// Matrix of `Pᵗ : N_x → N_{X_t x}` in the stored normal bases.
#[derive(Debug, Clone)]
pub struct LinearPoincareFlow {
    pub start: PoincareProjection,
    pub end: PoincareProjection,
    pub time: f64,
    pub matrix: DMatrix<f64>,
    pub cocycle: DMatrix<f64>,
}

pub fn linear_poincare_flow(field: &dyn FormField, model: &VectorFieldModel, x: &DVector<f64>, t: f64, tol: &Tolerances) -> Result<LinearPoincareFlow> {
    let start = poincare_project(field, model, x)?;
    let seg = tangent_cocycle(model, x, t, tol)?;
    let end = poincare_project(field, model, &seg.end)?;
    let matrix = lpf_matrix(&start, &end, &seg.matrix);
    Ok(LinearPoincareFlow { start, end, time: t, matrix, cocycle: seg.matrix })
}

pub(crate) fn lpf_matrix(start: &PoincareProjection, end: &PoincareProjection, m: &DMatrix<f64>) -> DMatrix<f64> {
    end.normal_basis.transpose() * &end.projector * m * &start.normal_basis
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonotonicityVerdict {
    Strict,
    NonStrict,
    Fails,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub times: Vec<f64>,
    /// Minimum of the infinitesimal LPF form derivative over the unit sphere
    /// of `N_x` at each sample.
    pub minima: Vec<f64>,
    /// Per-sample strictness thresholds (`1e-8 ×` local operator norm).
    pub thresholds: Vec<f64>,
    pub global_minimum: f64,
    pub witness_sample: usize,
    pub witness: Vec<f64>,
    pub verdict: MonotonicityVerdict,
}

/// Orbit points at given times, for per-sample checks.
#[derive(Debug, Clone)]
pub struct OrbitSamples {
    pub times: Vec<f64>,
    pub points: Vec<DVector<f64>>,
}

impl OrbitSamples {
    /// `count` evenly spaced samples on `[0, t)` (or `[0, t]` when `closed`).
    pub fn along(model: &VectorFieldModel, x0: &DVector<f64>, t: f64, count: usize, closed: bool, tol: &Tolerances) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidArgument("need at least one sample".into()));
        }
        let tr = integrate(model, x0, t, tol)?;
        let denom = if closed && count > 1 { (count - 1) as f64 } else { count as f64 };
        let times: Vec<f64> = (0..count).map(|i| t * i as f64 / denom).collect();
        let points = times.iter().map(|&s| tr.state_at(s).ok_or(Error::OutsideDomain)).collect::<Result<Vec<_>>>()?;
        Ok(Self { times, points })
    }
}

pub fn check_lpf_strict_monotone(field: &dyn FormField, model: &VectorFieldModel, samples: &OrbitSamples) -> Result<MonotonicityReport> {
    if samples.points.is_empty() {
        return Err(Error::InvalidArgument("no orbit samples".into()));
    }
    let mut minima = Vec::with_capacity(samples.points.len());
    let mut thresholds = Vec::with_capacity(samples.points.len());
    let mut witness = (0, f64::INFINITY, Vec::new());
    for (i, x) in samples.points.iter().enumerate() {
        let proj = poincare_project(field, model, x)?;
        let d = form_derivative_matrix(field, model, x)?;
        let restricted = linalg::symmetrize(&(proj.normal_basis.transpose() * &d * &proj.normal_basis));
        let (min, w) = linalg::min_sym_eigen(&restricted);
        let threshold = 1e-8 * linalg::spectral_norm(&d).max(f64::MIN_POSITIVE);
        if min < witness.1 {
            witness = (i, min, (&proj.normal_basis * w).iter().copied().collect());
        }
        minima.push(min);
        thresholds.push(threshold);
    }
    let verdict = if minima.iter().zip(&thresholds).all(|(m, t)| m > t) {
        MonotonicityVerdict::Strict
    } else if minima.iter().zip(&thresholds).any(|(m, t)| *m < -t) {
        MonotonicityVerdict::Fails
    } else {
        MonotonicityVerdict::NonStrict
    };
    Ok(MonotonicityReport {
        times: samples.times.clone(),
        minima,
        thresholds,
        global_minimum: witness.1,
        witness_sample: witness.0,
        witness: witness.2,
        verdict,
    })
}

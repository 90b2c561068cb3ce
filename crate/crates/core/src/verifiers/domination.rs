//! Dominated splittings and volume expansion along orbit segments.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fit::{fit_second_half, RateFit};
use crate::error::{Error, Result};
use crate::flow::{compound_matrix, interval_cocycles, IntervalCocycles, Tolerances, VectorFieldModel};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportOptions {
    pub per_unit_time: f64,
    pub min_intervals: usize,
    /// Smallest principal angle between `E` and `F` before `SplitCollapse`.
    pub collapse_angle: f64,
    pub integration: Tolerances,
    /// Repeat on a doubled grid with tighter tolerances and compare rates.
    pub self_check: bool,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self { per_unit_time: 20.0, min_intervals: 64, collapse_angle: 1e-8, integration: Tolerances::new(1e-11, 1e-13), self_check: true }
    }
}

impl TransportOptions {
    fn refined(&self) -> Self {
        let tol = Tolerances::new(self.integration.rtol * 1e-2, self.integration.atol * 1e-2);
        Self { per_unit_time: 2.0 * self.per_unit_time, min_intervals: 2 * self.min_intervals, integration: tol, self_check: false, ..*self }
    }
}

/// Relative agreement required between the two grids.
const GRID_AGREEMENT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DominationVerdict {
    Dominated,
    NotDominated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub dim_e: usize,
    pub dim_f: usize,
    pub k: f64,
    pub lambda: f64,
    pub fit: RateFit,
    /// `(t, log‖DX_t|E‖ + log‖DX_{−t}|F_{X_t}‖)`.
    pub series: Vec<(f64, f64)>,
    /// Smallest principal angle between the transported bundles.
    pub min_angle: f64,
    /// `None` when the self check was skipped.
    pub grid_converged: Option<bool>,
    pub verdict: DominationVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolumeVerdict {
    Pass,
    Fails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeExpansionReport {
    pub dim_f: usize,
    pub p: usize,
    /// `|∧ᵖ DX_t|_F| ≥ C⁻¹ e^{λt}` on the sampled times.
    pub c: f64,
    pub lambda: f64,
    pub fit: RateFit,
    /// `(t, log σ_min(∧ᵖ DX_t|_F))`.
    pub series: Vec<(f64, f64)>,
    pub grid_converged: Option<bool>,
    pub verdict: VolumeVerdict,
}

/// Orthonormal bases of a transported subspace at every sample and the
/// reduced steps `Q_{k+1}ᵀ M_k Q_k`.
struct Bundle {
    bases: Vec<DMatrix<f64>>,
    steps: Vec<DMatrix<f64>>,
}

fn collapse(t: f64, r: &DMatrix<f64>) -> Option<Error> {
    let d: Vec<f64> = r.diagonal().iter().map(|v| v.abs()).collect();
    let hi = d.iter().copied().fold(0.0, f64::max);
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    (!(lo > 1e-13 * hi)).then(|| Error::SplitCollapse { t, angle: lo / hi.max(f64::MIN_POSITIVE) })
}

/// Pushes `seed` forward from the first sample.
fn push_forward(c: &IntervalCocycles, seed: &DMatrix<f64>) -> Result<Bundle> {
    let qr = seed.clone().qr();
    if let Some(e) = collapse(c.times[0], &qr.r()) {
        return Err(e);
    }
    let mut bases = vec![qr.q()];
    let mut steps = Vec::with_capacity(c.steps.len());
    for (k, m) in c.steps.iter().enumerate() {
        let qr = (m * &bases[k]).qr();
        let r = qr.r();
        if let Some(e) = collapse(c.times[k + 1], &r) {
            return Err(e);
        }
        bases.push(qr.q());
        steps.push(r);
    }
    Ok(Bundle { bases, steps })
}

/// Pulls `seed` (read at the last sample) back to the first.
fn pull_back(c: &IntervalCocycles, seed: &DMatrix<f64>) -> Result<Bundle> {
    let n = c.steps.len();
    let qr = seed.clone().qr();
    if let Some(e) = collapse(c.times[n], &qr.r()) {
        return Err(e);
    }
    let mut bases = vec![qr.q()];
    let mut steps = Vec::with_capacity(n);
    for k in (0..n).rev() {
        let lu = c.steps[k].clone().lu();
        let back = lu.solve(bases.last().expect("seeded")).ok_or(Error::Singular)?;
        let qr = back.qr();
        let s = qr.r();
        if let Some(e) = collapse(c.times[k], &s) {
            return Err(e);
        }
        // M_k Q_k = Q_{k+1} S⁻¹
        steps.push(s.try_inverse().ok_or(Error::Singular)?);
        bases.push(qr.q());
    }
    bases.reverse();
    steps.reverse();
    Ok(Bundle { bases, steps })
}

/// Running `log` scale and normalized product of the reduced steps.
fn scaled_products(steps: &[DMatrix<f64>], map: impl Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>) -> Result<Vec<(f64, DMatrix<f64>)>> {
    let first = map(&DMatrix::identity(steps.first().map_or(0, |s| s.nrows()), steps.first().map_or(0, |s| s.ncols())))?;
    let mut out = vec![(0.0, first)];
    for s in steps {
        let (log, prev) = out.last().expect("seeded");
        let next = map(s)? * prev;
        let norm = linalg::spectral_norm(&next);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Singular);
        }
        out.push((log + norm.ln(), next / norm));
    }
    Ok(out)
}

fn times_for(t: f64, opts: &TransportOptions) -> Vec<f64> {
    let n = ((opts.per_unit_time * t).ceil() as usize).max(opts.min_intervals);
    (0..=n).map(|k| t * k as f64 / n as f64).collect()
}

fn check_segment(model: &VectorFieldModel, x0: &DVector<f64>, t: f64) -> Result<()> {
    if x0.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: x0.len() });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("segment length must be positive, got {t}")));
    }
    Ok(())
}

/// Pointwise agreement of two series, the finer one interpolated at the
/// coarse times. Fitted slopes are not compared: they move with the sample
/// set even when every sample is accurate.
fn series_agree(coarse: &[(f64, f64)], fine: &[(f64, f64)]) -> bool {
    coarse.iter().all(|&(t, y)| {
        let k = fine.partition_point(|p| p.0 < t).clamp(1, fine.len() - 1);
        let ((t0, y0), (t1, y1)) = (fine[k - 1], fine[k]);
        let yi = if t1 > t0 { y0 + (y1 - y0) * (t - t0) / (t1 - t0) } else { y1 };
        (y - yi).abs() <= GRID_AGREEMENT * y.abs().max(1.0)
    })
}

/// Transports `E` (pulled back from the segment end) and `F` (pushed from the
/// start) and fits the decay rate of `‖DX_t|E‖ · ‖DX_{−t}|F_{X_t}‖`.
pub fn verify_dominated_splitting(
    model: &VectorFieldModel,
    x0: &DVector<f64>,
    t: f64,
    e0: &DMatrix<f64>,
    f0: &DMatrix<f64>,
    opts: &TransportOptions,
) -> Result<DominationReport> {
    check_segment(model, x0, t)?;
    let n = model.dim();
    if e0.nrows() != n || f0.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: e0.nrows().max(f0.nrows()) });
    }
    if e0.ncols() == 0 || f0.ncols() == 0 || e0.ncols() + f0.ncols() != n {
        return Err(Error::BadDimension(format!("dim E + dim F must be {n} with both positive, got {} + {}", e0.ncols(), f0.ncols())));
    }
    let joint = DMatrix::from_fn(n, n, |i, j| if j < e0.ncols() { e0[(i, j)] } else { f0[(i, j - e0.ncols())] });
    if linalg::min_singular(&joint) <= 1e-12 * linalg::spectral_norm(&joint) {
        return Err(Error::InvalidArgument("E and F are not complementary".into()));
    }

    let cocycles = interval_cocycles(model, x0, &times_for(t, opts), &opts.integration)?;
    let e = pull_back(&cocycles, e0)?;
    let f = push_forward(&cocycles, f0)?;
    let mut min_angle = f64::INFINITY;
    for (k, (qe, qf)) in e.bases.iter().zip(&f.bases).enumerate() {
        let angle = linalg::principal_angles(qe, qf).into_iter().fold(f64::INFINITY, f64::min);
        if angle < opts.collapse_angle {
            return Err(Error::SplitCollapse { t: cocycles.times[k], angle });
        }
        min_angle = min_angle.min(angle);
    }

    let pe = scaled_products(&e.steps, |s| Ok(s.clone()))?;
    let pf = scaled_products(&f.steps, |s| Ok(s.clone()))?;
    let series: Vec<(f64, f64)> = cocycles
        .times
        .iter()
        .zip(pe.iter().zip(&pf))
        .map(|(&tk, ((le, _), (lf, mf)))| (tk, le - (lf + linalg::min_singular(mf).ln())))
        .collect();
    let fit = fit_second_half(&series)?;
    let lambda = -fit.slope;
    let k = series.iter().map(|(tk, r)| (r + lambda * tk).exp()).fold(0.0, f64::max);
    let grid_converged = if opts.self_check {
        let fine = verify_dominated_splitting(model, x0, t, e0, f0, &opts.refined())?;
        Some(series_agree(&series, &fine.series))
    } else {
        None
    };
    let dominated = lambda > 0.0 && fit.significant() && grid_converged != Some(false);
    Ok(DominationReport {
        dim_e: e0.ncols(),
        dim_f: f0.ncols(),
        k,
        lambda,
        fit,
        series,
        min_angle,
        grid_converged,
        verdict: if dominated { DominationVerdict::Dominated } else { DominationVerdict::NotDominated },
    })
}

/// Fits the growth rate of the smallest `p`-dimensional volume expansion
/// inside the forward-transported `F`.
pub fn verify_volume_expansion(
    model: &VectorFieldModel,
    x0: &DVector<f64>,
    t: f64,
    f0: &DMatrix<f64>,
    p: usize,
    opts: &TransportOptions,
) -> Result<VolumeExpansionReport> {
    check_segment(model, x0, t)?;
    if f0.nrows() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: f0.nrows() });
    }
    if p == 0 || p > f0.ncols() {
        return Err(Error::BadDimension(format!("wedge order {p} outside 1..={}", f0.ncols())));
    }
    let cocycles = interval_cocycles(model, x0, &times_for(t, opts), &opts.integration)?;
    let f = push_forward(&cocycles, f0)?;
    let products = scaled_products(&f.steps, |s| compound_matrix(s, p))?;
    let series: Vec<(f64, f64)> =
        cocycles.times.iter().zip(&products).map(|(&tk, (log, w))| (tk, log + linalg::min_singular(w).ln())).collect();
    let fit = fit_second_half(&series)?;
    let lambda = fit.slope;
    let c = series.iter().map(|(tk, y)| (lambda * tk - y).exp()).fold(0.0, f64::max);
    let grid_converged = if opts.self_check {
        let fine = verify_volume_expansion(model, x0, t, f0, p, &opts.refined())?;
        Some(series_agree(&series, &fine.series))
    } else {
        None
    };
    let pass = lambda > 0.0 && fit.significant() && grid_converged != Some(false);
    Ok(VolumeExpansionReport {
        dim_f: f0.ncols(),
        p,
        c,
        lambda,
        fit,
        series,
        grid_converged,
        verdict: if pass { VolumeVerdict::Pass } else { VolumeVerdict::Fails },
    })
}

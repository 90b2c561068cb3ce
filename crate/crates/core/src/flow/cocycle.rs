//! The tangent cocycle `M(t) = DX_t(x)`, integrated jointly with the orbit.

use nalgebra::{DMatrix, DVector};

use super::integrator::{Dopri5, IntegratorStats, Tolerances};
use super::model::VectorFieldModel;
use crate::error::{Error, Result};

/// Right-hand side of `ẋ = X(x)`, `Ṁ = DX(x) M` (`M` is `n × k`, column
/// major) and, when `with_trace`, `τ̇ = tr DX(x)`.
pub(crate) fn tangent_rhs(model: &VectorFieldModel, k: usize, with_trace: bool) -> impl FnMut(&[f64], &mut [f64]) + '_ {
    let n = model.dim();
    let mut jac = vec![0.0; n * n];
    move |y: &[f64], dy: &mut [f64]| {
        let x = &y[..n];
        model.eval_into(x, &mut dy[..n]);
        model.jacobian_into(x, &mut jac);
        for c in 0..k {
            let col = &y[n + c * n..n + (c + 1) * n];
            for i in 0..n {
                let row = &jac[i * n..(i + 1) * n];
                dy[n + c * n + i] = row.iter().zip(col).map(|(a, b)| a * b).sum();
            }
        }
        if with_trace {
            dy[n + n * k] = (0..n).map(|i| jac[i * n + i]).sum();
        }
    }
}

pub(crate) fn augmented_initial(x0: &DVector<f64>, frame: &DMatrix<f64>, with_trace: bool) -> Vec<f64> {
    let mut y = Vec::with_capacity(x0.len() * (1 + frame.ncols()) + 1);
    y.extend_from_slice(x0.as_slice());
    y.extend_from_slice(frame.as_slice());
    if with_trace {
        y.push(0.0);
    }
    y
}

/// `DX_t(x)` over one orbit segment.
#[derive(Debug, Clone)]
pub struct CocycleSegment {
    pub base: DVector<f64>,
    pub duration: f64,
    pub end: DVector<f64>,
    pub matrix: DMatrix<f64>,
    /// `∫₀ᵗ tr DX(x(s)) ds`.
    pub trace_integral: f64,
    /// `|det M / exp(∫ tr DX) − 1|`.
    pub liouville_residual: f64,
    pub stats: IntegratorStats,
}

impl CocycleSegment {
    pub fn liouville_ok(&self, tol: f64) -> bool {
        self.liouville_residual <= tol
    }
}

pub(crate) fn liouville_residual(m: &DMatrix<f64>, trace_integral: f64) -> f64 {
    let lu = m.clone().lu();
    let u = lu.u();
    let mut log_det = 0.0;
    let mut sign = if lu.p().determinant::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d == 0.0 {
            return f64::INFINITY;
        }
        if d < 0.0 {
            sign = -sign;
        }
        log_det += d.abs().ln();
    }
    if sign < 0.0 {
        return f64::INFINITY;
    }
    (log_det - trace_integral).exp_m1().abs()
}

/// Cocycle samples `M(t_k) = DX_{t_k}(x0)` at increasing times.
#[derive(Debug, Clone)]
pub struct CocycleSamples {
    pub times: Vec<f64>,
    pub points: Vec<DVector<f64>>,
    pub matrices: Vec<DMatrix<f64>>,
    pub trace_integrals: Vec<f64>,
    pub stats: IntegratorStats,
}

impl CocycleSamples {
    /// `M(t_j) M(t_i)⁻¹ = DX_{t_j − t_i}(x(t_i))`.
    pub fn transition(&self, i: usize, j: usize) -> Result<DMatrix<f64>> {
        let inv = self.matrices[i].clone().try_inverse().ok_or(Error::Singular)?;
        Ok(&self.matrices[j] * inv)
    }

    pub fn segment(&self, k: usize) -> CocycleSegment {
        CocycleSegment {
            base: self.points[0].clone(),
            duration: self.times[k],
            end: self.points[k].clone(),
            matrix: self.matrices[k].clone(),
            trace_integral: self.trace_integrals[k],
            liouville_residual: liouville_residual(&self.matrices[k], self.trace_integrals[k]),
            stats: self.stats,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Integrate the cocycle from `x0`, stopping exactly at each of `times`.
/// Times must be monotone with a common sign; negative times use the
/// reversed field.
pub fn sample_cocycle(model: &VectorFieldModel, x0: &DVector<f64>, times: &[f64], tol: &Tolerances) -> Result<CocycleSamples> {
    let n = model.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len() });
    }
    let backwards = times.iter().any(|&t| t < 0.0);
    let spans: Vec<f64> = times.iter().map(|t| t.abs()).collect();
    if times.iter().any(|t| !t.is_finite())
        || (backwards && times.iter().any(|&t| t > 0.0))
        || spans.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::InvalidArgument("sample times must be finite, monotone and of one sign".into()));
    }
    let run = if backwards { model.reversed() } else { model.clone() };
    let y0 = augmented_initial(x0, &DMatrix::identity(n, n), true);
    let mut solver = Dopri5::new(tangent_rhs(&run, n, true), &y0, *tol)?;
    let mut out = CocycleSamples {
        times: Vec::with_capacity(times.len()),
        points: Vec::with_capacity(times.len()),
        matrices: Vec::with_capacity(times.len()),
        trace_integrals: Vec::with_capacity(times.len()),
        stats: IntegratorStats::default(),
    };
    for (&t, &s) in times.iter().zip(&spans) {
        solver.advance_to(s, |_| {})?;
        let y = &solver.y;
        out.times.push(t);
        out.points.push(DVector::from_column_slice(&y[..n]));
        out.matrices.push(DMatrix::from_column_slice(n, n, &y[n..n + n * n]));
        out.trace_integrals.push(y[n + n * n]);
    }
    out.stats = solver.stats;
    Ok(out)
}

/// Per-interval cocycles `DX_{t_{k+1} − t_k}(x(t_k))` along one orbit. The
/// tangent part restarts from the identity at every sample, so the steps stay
/// well conditioned where the cumulative `M(t)` does not.
#[derive(Debug, Clone)]
pub struct IntervalCocycles {
    pub times: Vec<f64>,
    pub points: Vec<DVector<f64>>,
    /// `steps[k]` maps the tangent space at `points[k]` to the one at `points[k + 1]`.
    pub steps: Vec<DMatrix<f64>>,
    pub stats: IntegratorStats,
}

impl IntervalCocycles {
    /// `steps[j − 1] ⋯ steps[i]` for `i ≤ j`.
    pub fn product(&self, i: usize, j: usize) -> DMatrix<f64> {
        let n = self.points[0].len();
        self.steps[i..j].iter().fold(DMatrix::identity(n, n), |acc, s| s * acc)
    }
}

/// Times must start at 0 and be monotone with a common sign.
pub fn interval_cocycles(model: &VectorFieldModel, x0: &DVector<f64>, times: &[f64], tol: &Tolerances) -> Result<IntervalCocycles> {
    let n = model.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len() });
    }
    let backwards = times.iter().any(|&t| t < 0.0);
    let spans: Vec<f64> = times.iter().map(|t| t.abs()).collect();
    if times.first() != Some(&0.0)
        || times.iter().any(|t| !t.is_finite())
        || (backwards && times.iter().any(|&t| t > 0.0))
        || spans.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::InvalidArgument("interval times must start at 0 and be finite, monotone and of one sign".into()));
    }
    let run = if backwards { model.reversed() } else { model.clone() };
    let id = DMatrix::<f64>::identity(n, n);
    let mut y = augmented_initial(x0, &id, false);
    let mut solver = Dopri5::new(tangent_rhs(&run, n, false), &y, *tol)?;
    let mut out = IntervalCocycles { times: vec![0.0], points: vec![x0.clone()], steps: Vec::new(), stats: IntegratorStats::default() };
    for (&t, &s) in times.iter().zip(&spans).skip(1) {
        solver.advance_to(s, |_| {})?;
        y.copy_from_slice(&solver.y);
        out.times.push(t);
        out.points.push(DVector::from_column_slice(&y[..n]));
        out.steps.push(DMatrix::from_column_slice(n, n, &y[n..]));
        y[n..].copy_from_slice(id.as_slice());
        solver.reset_state(&y);
    }
    out.stats = solver.stats;
    Ok(out)
}

pub fn tangent_cocycle(model: &VectorFieldModel, x0: &DVector<f64>, t: f64, tol: &Tolerances) -> Result<CocycleSegment> {
    let samples = sample_cocycle(model, x0, &[t], tol)?;
    let mut seg = samples.segment(0);
    seg.duration = t;
    Ok(seg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn identity_at_time_zero() {
        let m = VectorFieldModel::lorenz_classic();
        let seg = tangent_cocycle(&m, &dvector![1.0, 1.0, 1.0], 0.0, &Tolerances::default()).unwrap();
        assert_eq!(seg.matrix, DMatrix::identity(3, 3));
        assert_eq!(seg.liouville_residual, 0.0);
    }

    #[test]
    fn lorenz_liouville_identity() {
        let m = VectorFieldModel::lorenz_classic();
        let seg = tangent_cocycle(&m, &dvector![1.0, 1.0, 1.0], 1.0, &Tolerances::default()).unwrap();
        assert!((seg.trace_integral + 41.0 / 3.0).abs() < 1e-9);
        assert!(seg.liouville_ok(1e-6), "residual {}", seg.liouville_residual);
        let det = seg.matrix.determinant();
        assert!((det / (-41.0f64 / 3.0).exp() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cocycle_property_along_lorenz() {
        let m = VectorFieldModel::lorenz_classic();
        let x0 = dvector![1.0, 1.0, 1.0];
        let tol = Tolerances::default();
        let (t, s) = (0.4, 0.3);
        let a = tangent_cocycle(&m, &x0, t, &tol).unwrap();
        let b = tangent_cocycle(&m, &a.end, s, &tol).unwrap();
        let ab = tangent_cocycle(&m, &x0, t + s, &tol).unwrap();
        let composed = &b.matrix * &a.matrix;
        assert!((composed - &ab.matrix).amax() < 1e-6 * ab.matrix.amax());
    }

    #[test]
    fn interval_steps_compose_to_the_cocycle() {
        let m = VectorFieldModel::lorenz_classic();
        let x0 = dvector![1.0, 1.0, 1.0];
        let tol = Tolerances::new(1e-11, 1e-13);
        let steps = interval_cocycles(&m, &x0, &[0.0, 0.1, 0.25, 0.4], &tol).unwrap();
        let whole = tangent_cocycle(&m, &x0, 0.4, &tol).unwrap();
        assert!((steps.product(0, 3) - &whole.matrix).amax() < 1e-7 * whole.matrix.amax());
        assert!((&steps.points[3] - &whole.end).amax() < 1e-8);
        assert_eq!(steps.product(1, 1), DMatrix::identity(3, 3));
    }

    #[test]
    fn backward_cocycle_inverts_forward() {
        let m = VectorFieldModel::planar_limit_cycle(1.0);
        let tol = Tolerances::new(1e-11, 1e-13);
        let fwd = tangent_cocycle(&m, &dvector![0.5, 0.2, 0.3], 0.7, &tol).unwrap();
        let back = tangent_cocycle(&m, &fwd.end, -0.7, &tol).unwrap();
        assert!((&back.matrix * &fwd.matrix - DMatrix::identity(3, 3)).amax() < 1e-8);
        assert!((&back.end - dvector![0.5, 0.2, 0.3]).amax() < 1e-9);
    }
}

//! Adapted quadratic forms at hyperbolic equilibria.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::spectrum;
use crate::linalg;
use crate::pseudo_metric::QuadraticForm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdaptedStrategy {
    /// `diag(−I, I)` in a stable/unstable basis.
    Splitting,
    /// Per-block Lyapunov solutions `diag(−P_s, P_u)`.
    Lyapunov,
}

#[derive(Debug, Clone)]
pub struct AdaptedForm {
    pub form: QuadraticForm,
    /// `λ_min(J A + Aᵀ J)`.
    pub positivity_margin: f64,
    pub strategy: AdaptedStrategy,
    /// Condition number of the stable/unstable basis.
    pub basis_condition: f64,
}

const MAX_BASIS_CONDITION: f64 = 1e12;

/// Matrix sign function by the scaled Newton iteration.
pub(crate) fn matrix_sign(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut s = a.clone();
    for _ in 0..100 {
        let inv = s.clone().try_inverse().ok_or(Error::Singular)?;
        // determinant scaling speeds up the early iterations
        let det = s.clone().lu().determinant().abs();
        let mu = if det > 0.0 && det.is_finite() { det.powf(-1.0 / n as f64) } else { 1.0 };
        let next = (&s * mu + inv / mu) * 0.5;
        let change = (&next - &s).amax();
        s = next;
        if change <= 1e-14 * s.amax().max(1.0) {
            return Ok(s);
        }
    }
    Err(Error::NoConvergence("matrix sign iteration".into()))
}

/// Solves `Aᵀ P + P A = C` through the Kronecker form.
pub(crate) fn lyapunov_solve(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let k = id.kronecker(&at) + at.kronecker(&id);
    let rhs = nalgebra::DVector::from_column_slice(c.as_slice());
    let sol = k.lu().solve(&rhs).ok_or(Error::Singular)?;
    Ok(linalg::symmetrize(&DMatrix::from_column_slice(n, n, sol.as_slice())))
}

fn margin(j: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    linalg::min_sym_eigen(&linalg::symmetrize(&(j * a + a.transpose() * j))).0
}

/// A form `J` of index `q` with `J A + Aᵀ J` positive definite, built from the
/// stable/unstable splitting of `A`.
pub fn adapted_form_search(a: &DMatrix<f64>, q: usize) -> Result<AdaptedForm> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::BadDimension(format!("operator must be square, got {}×{}", a.nrows(), a.ncols())));
    }
    let scale = linalg::spectral_norm(a).max(1.0);
    let eig = spectrum(a);
    let gap = eig.iter().map(|e| e.re.abs()).fold(f64::INFINITY, f64::min);
    if gap < 1e-8 * scale {
        return Err(Error::NotHyperbolic(gap));
    }
    let stable = eig.iter().filter(|e| e.re < 0.0).count();
    if stable != q {
        return Err(Error::IndexMismatch { requested: q, actual: stable });
    }
    let sign = matrix_sign(a)?;
    let id = DMatrix::<f64>::identity(n, n);
    let es = linalg::orthonormal_basis(&((&id - &sign) * 0.5), 1e-8);
    let eu = linalg::orthonormal_basis(&((&id + &sign) * 0.5), 1e-8);
    if es.ncols() != q || eu.ncols() != n - q {
        return Err(Error::NoCertificate(format!("invariant subspaces have dimensions {} and {}", es.ncols(), eu.ncols())));
    }
    let mut t = DMatrix::zeros(n, n);
    t.columns_mut(0, q).copy_from(&es);
    t.columns_mut(q, n - q).copy_from(&eu);
    let svd = t.clone().svd(false, false);
    let cond = svd.singular_values.max() / svd.singular_values.min();
    if !(cond <= MAX_BASIS_CONDITION) {
        return Err(Error::NoCertificate(format!("stable/unstable basis condition {cond:.3e}")));
    }
    let t_inv = t.clone().try_inverse().ok_or(Error::Singular)?;
    let pull = |jt: &DMatrix<f64>| linalg::symmetrize(&(t_inv.transpose() * jt * &t_inv));

    let mut signs = vec![-1.0; q];
    signs.resize(n, 1.0);
    let j = pull(&linalg::diag(&signs));
    let tol = 1e-10 * linalg::spectral_norm(&j) * scale;
    let m = margin(&j, a);
    if m > tol {
        return finish(j, m, AdaptedStrategy::Splitting, cond);
    }

    // block-diagonal form of A in the new basis
    let at = &t_inv * a * &t;
    let mut jt = DMatrix::zeros(n, n);
    if q > 0 {
        let a_s = at.view((0, 0), (q, q)).into_owned();
        let p_s = lyapunov_solve(&a_s, &(-DMatrix::identity(q, q)))?;
        jt.view_mut((0, 0), (q, q)).copy_from(&(-p_s));
    }
    if q < n {
        let a_u = at.view((q, q), (n - q, n - q)).into_owned();
        let p_u = lyapunov_solve(&a_u, &DMatrix::identity(n - q, n - q))?;
        jt.view_mut((q, q), (n - q, n - q)).copy_from(&p_u);
    }
    let j = pull(&jt);
    let tol = 1e-10 * linalg::spectral_norm(&j) * scale;
    let m = margin(&j, a);
    if m > tol {
        finish(j, m, AdaptedStrategy::Lyapunov, cond)
    } else {
        Err(Error::NoCertificate(format!("positivity margin {m:.3e} after Lyapunov scaling")))
    }
}

fn finish(j: DMatrix<f64>, m: f64, strategy: AdaptedStrategy, cond: f64) -> Result<AdaptedForm> {
    let form = QuadraticForm::new(j).map_err(|e| Error::NoCertificate(e.to_string()))?;
    Ok(AdaptedForm { form, positivity_margin: m, strategy, basis_condition: cond })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_case_is_the_signature_form() {
        let f = adapted_form_search(&linalg::diag(&[-2.0, -1.0, 1.0]), 2).unwrap();
        assert!((f.form.matrix() - linalg::diag(&[-1.0, -1.0, 1.0])).amax() < 1e-12);
        assert_eq!(f.strategy, AdaptedStrategy::Splitting);
        assert!((f.positivity_margin - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lorenz_origin() {
        let a = DMatrix::from_row_slice(3, 3, &[-10.0, 10.0, 0.0, 28.0, -1.0, 0.0, 0.0, 0.0, -8.0 / 3.0]);
        let f = adapted_form_search(&a, 2).unwrap();
        assert_eq!(f.form.index_q(), 2);
        assert!(f.positivity_margin > 0.0);
        assert!((margin(f.form.matrix(), &a) - f.positivity_margin).abs() < 1e-10);
    }

    #[test]
    fn shear_needs_lyapunov_scaling() {
        // strongly non-normal stable block: diag(−I, I) fails, the Lyapunov blocks do not
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 50.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0]);
        let f = adapted_form_search(&a, 2).unwrap();
        assert_eq!(f.strategy, AdaptedStrategy::Lyapunov);
        assert!(f.positivity_margin > 0.0);
    }

    #[test]
    fn errors() {
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(matches!(adapted_form_search(&rot, 1), Err(Error::NotHyperbolic(_))));
        assert!(matches!(
            adapted_form_search(&linalg::diag(&[-2.0, -1.0, 1.0]), 1),
            Err(Error::IndexMismatch { requested: 1, actual: 2 })
        ));
    }

    #[test]
    fn sinks_and_sources() {
        let sink = adapted_form_search(&linalg::diag(&[-1.0, -3.0]), 2).unwrap();
        assert_eq!(sink.form.index_q(), 2);
        let source = adapted_form_search(&DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 0.0, 2.0]), 0).unwrap();
        assert_eq!(source.form.index_q(), 0);
    }
}

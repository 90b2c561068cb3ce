//! Pseudo-Euclidean linear algebra.
//!
//! A [`QuadraticForm`] is a non-degenerate symmetric matrix `J` read as the
//! bilinear form `(v, w) = <J v, w>`. Its index `q` is the number of negative
//! squares and `p = n - q` the number of positive ones. Vectors split into the
//! positive cone `J(v) > 0`, the negative cone `J(v) < 0` and the null cone
//! `J(v) = 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative tolerance used to reject near-degenerate forms.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-10;
/// Relative half-width of the null band used by [`classify`].
pub const DEFAULT_ZERO_BAND: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    index_q: usize,
    degeneracy_tol: f64,
}

impl QuadraticForm {
    /// Build a form with the default scale-relative degeneracy tolerance.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(matrix, DEFAULT_DEGENERACY_TOL)
    }

    /// `rel_tol` is relative to the largest |eigenvalue|.
    pub fn with_tolerance(matrix: DMatrix<f64>, rel_tol: f64) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::BadDimension(format!(
                "form must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.amax();
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric { asymmetry: asym / scale });
        }
        let matrix = linalg::symmetrize(&matrix);
        let (eigenvalues, _) = linalg::sym_eigen(&matrix);
        let largest = eigenvalues.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        let tolerance = rel_tol * largest;
        let smallest = eigenvalues.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
        if largest == 0.0 || smallest < tolerance {
            return Err(Error::DegenerateForm { smallest, tolerance });
        }
        let index_q = eigenvalues.iter().filter(|&&e| e < 0.0).count();
        Ok(Self { matrix, eigenvalues, index_q, degeneracy_tol: tolerance })
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(linalg::diag(entries))
    }

    /// The standard form `diag(-1, ..., -1, +1, ..., +1)` with `q` minus signs.
    pub fn standard(q: usize, n: usize) -> Self {
        let entries: Vec<f64> = (0..n).map(|i| if i < q { -1.0 } else { 1.0 }).collect();
        Self::diagonal(&entries).expect("standard form is non-degenerate")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn index_q(&self) -> usize {
        self.index_q
    }

    pub fn degeneracy_tol(&self) -> f64 {
        self.degeneracy_tol
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn is_indefinite(&self) -> bool {
        self.index_q > 0 && self.index_q < self.dim()
    }

    /// Largest |eigenvalue|.
    pub fn norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0_f64, |m, e| m.max(e.abs()))
    }

    /// Smallest |eigenvalue|.
    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()))
    }

    pub fn eval(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.matrix * v))
    }

    pub fn bilinear(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        v.dot(&(&self.matrix * w))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::with_tolerance(&self.matrix * c, DEFAULT_DEGENERACY_TOL)
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0).expect("negation keeps non-degeneracy")
    }

    /// The form `Qᵀ J Q` (pull-back by a change of frame).
    pub fn congruent(&self, q: &DMatrix<f64>) -> Result<Self> {
        Self::new(q.transpose() * &self.matrix * q)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.matrix.clone().try_inverse().expect("non-degenerate form is invertible")
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: n });
        }
        Ok(())
    }
}

/// Basis in which the form reads `diag(-1,..,-1,+1,..,+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedFrame {
    pub basis: DMatrix<f64>,
    pub signature_pattern: Vec<i8>,
}

impl AdaptedFrame {
    pub fn q(&self) -> usize {
        self.signature_pattern.iter().filter(|&&s| s < 0).count()
    }

    pub fn pattern_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.signature_pattern.len(),
            self.signature_pattern.iter().map(|&s| f64::from(s)),
        ))
    }

    /// `‖Bᵀ J B − diag(pattern)‖_max`.
    pub fn congruence_residual(&self, form: &QuadraticForm) -> f64 {
        (self.basis.transpose() * form.matrix() * &self.basis - self.pattern_matrix()).amax()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    Positive,
    Negative,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeClass {
    pub cone: Cone,
    /// `J(v) / <v, v>`.
    pub margin: f64,
}

/// Returns `(p, q)`.
pub fn signature(form: &QuadraticForm) -> (usize, usize) {
    (form.dim() - form.index_q(), form.index_q())
}

/// Adapted frame of `J` (negative directions first), computed through the
/// symmetric eigendecomposition: `v_i = u_i / sqrt|λ_i|`.
pub fn lagrange_diagonalize(form: &QuadraticForm) -> AdaptedFrame {
    let n = form.dim();
    let (vals, vecs) = linalg::sym_eigen(form.matrix());
    // both blocks ordered by ascending |λ|
    let mut basis = DMatrix::zeros(n, n);
    let mut pattern = Vec::with_capacity(n);
    let mut negatives: Vec<usize> = (0..n).filter(|&i| vals[i] < 0.0).collect();
    let positives: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.0).collect();
    negatives.reverse();
    for (k, &i) in negatives.iter().chain(positives.iter()).enumerate() {
        let col = vecs.column(i) / vals[i].abs().sqrt();
        basis.set_column(k, &col);
        pattern.push(if vals[i] < 0.0 { -1 } else { 1 });
    }
    AdaptedFrame { basis, signature_pattern: pattern }
}

pub fn classify(form: &QuadraticForm, v: &DVector<f64>) -> Result<ConeClass> {
    classify_with_band(form, v, DEFAULT_ZERO_BAND)
}

/// The null band is `band · ‖J‖ · <v, v>`, so verdicts are invariant under
/// both `v → c v` and `J → c J` (c > 0).
pub fn classify_with_band(form: &QuadraticForm, v: &DVector<f64>, band: f64) -> Result<ConeClass> {
    form.check_dim(v.len())?;
    let norm2 = v.norm_squared();
    if norm2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let value = form.eval(v);
    let margin = value / norm2;
    let zero_band = band * form.norm();
    let cone = if margin > zero_band {
        Cone::Positive
    } else if margin < -zero_band {
        Cone::Negative
    } else {
        Cone::Zero
    };
    Ok(ConeClass { cone, margin })
}

/// Pseudo-orthonormalize `basis` with respect to `J`; outputs satisfy
/// `(u_i, u_j) = ±δ_ij`.
pub fn pseudo_gram_schmidt(form: &QuadraticForm, basis: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let tol = 1e-10;
    let jn = form.norm();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(basis.len());
    let mut signs: Vec<f64> = Vec::with_capacity(basis.len());
    for (index, v) in basis.iter().enumerate() {
        form.check_dim(v.len())?;
        let mut w = v.clone();
        for (u, s) in out.iter().zip(&signs) {
            let c = form.bilinear(v, u) * s;
            w -= u * c;
        }
        let wn2 = w.norm_squared();
        if wn2 <= (tol * v.norm()).powi(2) || wn2 == 0.0 {
            return Err(Error::LinearlyDependent { index });
        }
        let ww = form.eval(&w);
        if ww.abs() < tol * jn * wn2 {
            return Err(Error::NullPivot { index, value: ww });
        }
        signs.push(ww.signum());
        out.push(w / ww.abs().sqrt());
    }
    Ok(out)
}

/// A linear subspace held as an orthonormal (Euclidean) spanning matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn span(vectors: &DMatrix<f64>) -> Result<Self> {
        let basis = linalg::orthonormal_basis(vectors, 1e-12);
        if basis.ncols() != vectors.ncols() {
            return Err(Error::LinearlyDependent { index: basis.ncols() });
        }
        Ok(Self { basis })
    }

    pub fn from_vectors(vectors: &[DVector<f64>]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::BadDimension("empty spanning set".into()));
        }
        Self::span(&DMatrix::from_columns(vectors))
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn principal_angles(&self, other: &Subspace) -> Vec<f64> {
        linalg::principal_angles(&self.basis, &other.basis)
    }

    pub fn same_as(&self, other: &Subspace, angle_tol: f64) -> bool {
        self.dim() == other.dim() && linalg::subspace_distance(&self.basis, &other.basis) < angle_tol
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        let proj = &self.basis * (self.basis.transpose() * v);
        (v - proj).norm() <= tol * v.norm().max(f64::MIN_POSITIVE)
    }
}

/// J-orthogonal complement `E⊥ = {v : <J e, v> = 0 for all e in E}`.
pub fn j_complement(form: &QuadraticForm, e: &Subspace) -> Result<Subspace> {
    form.check_dim(e.ambient_dim())?;
    let q = e.basis();
    let restricted = q.transpose() * form.matrix() * q;
    if e.dim() > 0 {
        let (vals, _) = linalg::sym_eigen(&restricted);
        let smallest = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if smallest < 1e-9 * form.norm() {
            return Err(Error::DegenerateSubspace);
        }
    }
    let jq = linalg::orthonormal_basis(&(form.matrix() * q), 1e-12);
    Ok(Subspace { basis: linalg::orthogonal_complement(&jq) })
}

/// `L⁺ = J⁻¹ Lᵀ J`, the adjoint with respect to the J-bilinear form.
pub fn pseudo_adjoint(form: &QuadraticForm, l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    form.check_dim(l.nrows())?;
    form.check_dim(l.ncols())?;
    Ok(form.inverse() * l.transpose() * form.matrix())
}

/// True iff `‖Uᵀ J U − J‖_F ≤ tol`.
pub fn is_j_isometry(form: &QuadraticForm, u: &DMatrix<f64>, tol: f64) -> bool {
    if u.nrows() != form.dim() || u.ncols() != form.dim() {
        return false;
    }
    (u.transpose() * form.matrix() * u - form.matrix()).norm() <= tol
}

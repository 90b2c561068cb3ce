//! Analysis of a single linear operator `L` relative to a quadratic form `J`.
//!
//! `L` is J-separated when it maps the closed positive cone into itself and
//! strictly J-separated when it maps `C₊ ∪ C₀ \ {0}` into the open positive
//! cone. Separation is decided through an S-procedure certificate: strict
//! separation holds iff some `λ ≥ 0` makes `LᵀJL − λJ` positive definite.
//! The map `λ ↦ λ_min(LᵀJL − λJ)` is concave, so its maximum is found by
//! golden-section search.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::pseudo_metric::{self, QuadraticForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SeparationLevel {
    NotSeparated,
    Separated,
    StrictlySeparated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationVerdict {
    pub level: SeparationLevel,
    /// S-procedure multiplier maximizing `λ_min(LᵀJL − λJ)`.
    pub certificate: Option<f64>,
    /// `max_λ λ_min(LᵀJL − λJ)` (the dual value).
    pub certificate_margin: f64,
    /// Unit vector with `J(v) ≥ 0` and `J(Lv) < 0` (only for `NotSeparated`).
    pub witness: Option<DVector<f64>>,
    /// Minimum of `J(Lv)` over sampled unit vectors with `J(v) ≥ 0`.
    pub sampled_minimum: f64,
    /// Tolerance band used for the verdict.
    pub band: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SeparationOptions {
    /// Relative tolerance band, scaled by `‖J‖ ‖L‖²`.
    pub band: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SeparationOptions {
    fn default() -> Self {
        Self { band: 1e-9, samples: 2048, seed: 0x5eed }
    }
}

fn check_square(form: &QuadraticForm, l: &DMatrix<f64>) -> Result<()> {
    let n = form.dim();
    if l.nrows() != n || l.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: l.nrows().max(l.ncols()) });
    }
    Ok(())
}

/// `(λ*, max_λ λ_min(A − λJ))` over `λ ∈ [0, λ_max]`.
pub fn s_procedure(form: &QuadraticForm, a: &DMatrix<f64>) -> (f64, f64) {
    let j = form.matrix();
    // any feasible λ satisfies λ < vᵀAv / vᵀJv ≤ ‖A‖ / min|eig J|
    let lambda_max = 2.0 * linalg::spectral_norm(a) / form.min_abs_eigenvalue();
    let f = |lambda: f64| linalg::min_sym_eigen(&(a - j * lambda)).0;
    if lambda_max == 0.0 {
        return (0.0, f(0.0));
    }
    linalg::golden_section_max(f, 0.0, lambda_max, 200)
}

/// Deterministic sample of unit vectors with `J(v) ≥ 0`, drawn in the
/// adapted frame so the null cone boundary is well covered.
pub fn sample_closed_positive_cone(form: &QuadraticForm, samples: usize, seed: u64) -> Vec<DVector<f64>> {
    let frame = pseudo_metric::lagrange_diagonalize(form);
    let n = form.dim();
    let q = frame.q();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    if q == n {
        return out;
    }
    let gauss = |k: usize, rng: &mut ChaCha8Rng| -> DVector<f64> {
        loop {
            let v = DVector::from_fn(k, |_, _| {
                // Box-Muller
                let u1: f64 = rng.random::<f64>().max(1e-300);
                let u2: f64 = rng.random();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            });
            let norm = v.norm();
            if norm > 1e-12 || k == 0 {
                return if k == 0 { v } else { v / norm };
            }
        }
    };
    for i in 0..samples {
        let pos = gauss(n - q, &mut rng);
        let neg = gauss(q, &mut rng);
        // half the samples sit exactly on the null cone
        let s = if i % 2 == 0 { 1.0 } else { rng.random::<f64>().sqrt() };
        let coords = DVector::from_iterator(n, neg.iter().map(|x| x * s).chain(pos.iter().copied()));
        let v = &frame.basis * coords;
        let norm = v.norm();
        out.push(v / norm);
    }
    out
}

/// Brute-force minimum of `J(Lv)` over sampled unit vectors of the closed
/// positive cone. Returns `(min, argmin)`; `+∞` when the cone is trivial.
pub fn sampled_cone_minimum(form: &QuadraticForm, l: &DMatrix<f64>, samples: usize, seed: u64) -> (f64, Option<DVector<f64>>) {
    let mut best = (f64::INFINITY, None);
    for v in sample_closed_positive_cone(form, samples, seed) {
        let value = form.eval(&(l * &v));
        if value < best.0 {
            best = (value, Some(v));
        }
    }
    best
}

/// Move `w` onto the null cone of `J` along the `J`-eigenvector of opposite
/// sign, taking the smaller root (non-negative on ties).
pub(crate) fn push_to_null_cone(form: &QuadraticForm, w: &DVector<f64>) -> Option<DVector<f64>> {
    let c = form.eval(w);
    if c == 0.0 {
        return Some(w.normalize());
    }
    let (vals, vecs) = linalg::sym_eigen(form.matrix());
    let idx = if c > 0.0 { 0 } else { vals.len() - 1 };
    if vals[idx] * c >= 0.0 {
        return None;
    }
    let p = vecs.column(idx).into_owned();
    let a = form.eval(&p);
    let b = form.bilinear(w, &p);
    let disc = (b * b - a * c).max(0.0).sqrt();
    let (t1, t2) = ((-b + disc) / a, (-b - disc) / a);
    let t = if (t1.abs() - t2.abs()).abs() <= 1e-12 * t1.abs().max(t2.abs()) {
        t1.max(t2)
    } else if t1.abs() < t2.abs() {
        t1
    } else {
        t2
    };
    let v = w + p * t;
    let norm = v.norm();
    (norm > 0.0).then(|| v / norm)
}

pub fn check_separation(form: &QuadraticForm, l: &DMatrix<f64>) -> Result<SeparationVerdict> {
    check_separation_with(form, l, &SeparationOptions::default())
}

pub fn check_separation_with(form: &QuadraticForm, l: &DMatrix<f64>, opts: &SeparationOptions) -> Result<SeparationVerdict> {
    check_square(form, l)?;
    let a = linalg::symmetrize(&(l.transpose() * form.matrix() * l));
    let scale = form.norm() * linalg::spectral_norm(l).powi(2);
    let band = opts.band * scale.max(f64::MIN_POSITIVE);
    let (lambda, margin) = s_procedure(form, &a);
    let (sampled_minimum, sampled_arg) = sampled_cone_minimum(form, l, opts.samples, opts.seed);

    let mut level = if margin > band {
        SeparationLevel::StrictlySeparated
    } else if margin >= -band {
        SeparationLevel::Separated
    } else {
        SeparationLevel::NotSeparated
    };
    // a sampled violation overrides the certificate
    if level != SeparationLevel::NotSeparated && sampled_minimum < -band {
        level = SeparationLevel::NotSeparated;
    }

    let mut witness = None;
    if level == SeparationLevel::NotSeparated {
        let (_, w) = linalg::min_sym_eigen(&(&a - form.matrix() * lambda));
        let candidate = if form.eval(&w) >= 0.0 { Some(w.normalize()) } else { push_to_null_cone(form, &w) };
        let candidate = candidate.filter(|v| form.eval(&(l * v)) < -band);
        witness = candidate.or(sampled_arg);
    }
    Ok(SeparationVerdict {
        level,
        certificate: (level != SeparationLevel::NotSeparated).then_some(lambda),
        certificate_margin: margin,
        witness,
        sampled_minimum,
        band,
    })
}

/// Eigen-decomposition of a J-symmetric operator with real spectrum and
/// J-non-degenerate eigenvectors. Vectors are J-normalized: `wᵀJw = sign`.
#[derive(Debug, Clone)]
pub(crate) struct JEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub signs: Vec<i8>,
}

pub(crate) fn j_symmetric_eigen(form: &QuadraticForm, m: &DMatrix<f64>) -> std::result::Result<JEigen, String> {
    let n = form.dim();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let eig = m.clone().complex_eigenvalues();
    let mut reals = Vec::with_capacity(n);
    for z in eig.iter() {
        if z.im.abs() > 1e-8 * scale {
            return Err(format!("nonreal eigenvalue {:.6e}{:+.6e}i", z.re, z.im));
        }
        reals.push(z.re);
    }
    reals.sort_by(f64::total_cmp);
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for r in reals {
        match clusters.last_mut() {
            Some(c) if (r - c[c.len() - 1]).abs() <= 1e-9 * scale => c.push(r),
            _ => clusters.push(vec![r]),
        }
    }
    let j = form.matrix();
    let mut values = Vec::with_capacity(n);
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut signs = Vec::with_capacity(n);
    for cluster in clusters {
        let k = cluster.len();
        let mu = cluster.iter().sum::<f64>() / k as f64;
        let shifted = m - DMatrix::identity(n, n) * mu;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        let sv = &svd.singular_values;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
        if sv[order[k - 1]] > 1e-6 * scale {
            return Err(format!("defective eigenvalue {mu:.6e}"));
        }
        let w = DMatrix::from_fn(n, k, |i, c| vt[(order[c], i)]);
        // J-diagonalize inside the eigenspace
        let g = w.transpose() * j * &w;
        let (gv, gvec) = linalg::sym_eigen(&g);
        for c in 0..k {
            let g_c = gv[c];
            if g_c.abs() < 1e-8 * form.norm() {
                return Err(format!("eigenvector of {mu:.6e} lies on the null cone"));
            }
            let mut v = &w * gvec.column(c) / g_c.abs().sqrt();
            linalg::canonical_sign(&mut v);
            cols.push(v);
            values.push(mu);
            signs.push(if g_c < 0.0 { -1 } else { 1 });
        }
    }
    Ok(JEigen { values, vectors: DMatrix::from_columns(&cols), signs })
}

/// `L = R U` with `U` a J-isometry and `R` J-symmetric with positive spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarDecomposition {
    pub r: DMatrix<f64>,
    pub u: DMatrix<f64>,
    /// Negative-cone singular values, descending (`r_minus[0]` = r₋).
    pub r_minus: Vec<f64>,
    /// Positive-cone singular values, ascending (`r_plus[0]` = r₊).
    pub r_plus: Vec<f64>,
}

impl PolarDecomposition {
    /// r₋ (0 when there are no negative directions).
    pub fn r_lower(&self) -> f64 {
        self.r_minus.first().copied().unwrap_or(0.0)
    }

    /// r₊ (`+∞` when there are no positive directions).
    pub fn r_upper(&self) -> f64 {
        self.r_plus.first().copied().unwrap_or(f64::INFINITY)
    }
}

pub fn polar_decompose(form: &QuadraticForm, l: &DMatrix<f64>) -> Result<PolarDecomposition> {
    check_square(form, l)?;
    let svd = l.clone().svd(false, false);
    if svd.singular_values.min() <= 1e-13 * svd.singular_values.max() {
        return Err(Error::Singular);
    }
    match polar_from_square(form, l) {
        Err(Error::NotSeparated(reason)) => polar_by_newton(form, l).map_err(|_| Error::NotSeparated(reason)),
        other => other,
    }
}

/// `R = (L L⁺)^{1/2}` from the J-eigendecomposition of `L L⁺`.
fn polar_from_square(form: &QuadraticForm, l: &DMatrix<f64>) -> Result<PolarDecomposition> {
    let n = form.dim();
    let adj = pseudo_metric::pseudo_adjoint(form, l)?;
    let s = l * adj;
    let eig = j_symmetric_eigen(form, &s).map_err(Error::NotSeparated)?;
    let scale = s.amax();
    if eig.values.iter().any(|&v| v <= 1e-14 * scale) {
        return Err(Error::NotSeparated("L L⁺ has a non-positive eigenvalue".into()));
    }
    if eig.signs.iter().filter(|&&s| s < 0).count() != form.index_q() {
        return Err(Error::NotSeparated("eigenvector signature does not match the form".into()));
    }
    let roots: Vec<f64> = eig.values.iter().map(|v| v.sqrt()).collect();
    let w = &eig.vectors;
    let w_inv = w.clone().try_inverse().ok_or(Error::Singular)?;
    let r = w * DMatrix::from_diagonal(&DVector::from_row_slice(&roots)) * &w_inv;
    let r_inv = w * DMatrix::from_diagonal(&DVector::from_iterator(n, roots.iter().map(|x| 1.0 / x))) * &w_inv;
    let u = r_inv * l;

    split_spectrum(r, u, &roots, &eig.signs)
}

/// Newton iteration `X ← ½ (μX + (μX)^{-⁺})` for the isometric factor. It works
/// on `L` directly, so it survives when `L L⁺` squares away small singular
/// values.
fn polar_by_newton(form: &QuadraticForm, l: &DMatrix<f64>) -> Result<PolarDecomposition> {
    let n = form.dim();
    let j = form.matrix();
    let j_inv = form.inverse();
    let mut x = l.clone();
    let mut converged = false;
    for _ in 0..100 {
        let x_inv = x.clone().try_inverse().ok_or(Error::Singular)?;
        let det = x.clone().lu().determinant().abs();
        let mu = if det > 0.0 && det.is_finite() { det.powf(-1.0 / n as f64) } else { 1.0 };
        let next = (&x * mu + &j_inv * x_inv.transpose() * j / mu) * 0.5;
        let change = (&next - &x).amax();
        x = next;
        if !x.iter().all(|v| v.is_finite()) {
            break;
        }
        if change <= 1e-14 * x.amax() {
            converged = true;
            break;
        }
    }
    if !converged || !pseudo_metric::is_j_isometry(form, &x, 1e-8) {
        return Err(Error::NotSeparated("no J-isometric polar factor".into()));
    }
    let u = x;
    let r = l * (&j_inv * u.transpose() * j);
    let eig = j_symmetric_eigen(form, &r).map_err(Error::NotSeparated)?;
    if eig.values.iter().any(|&v| v <= 0.0) {
        return Err(Error::NotSeparated("R has a non-positive eigenvalue".into()));
    }
    if eig.signs.iter().filter(|&&s| s < 0).count() != form.index_q() {
        return Err(Error::NotSeparated("eigenvector signature does not match the form".into()));
    }
    split_spectrum(r, u, &eig.values, &eig.signs)
}

fn split_spectrum(r: DMatrix<f64>, u: DMatrix<f64>, roots: &[f64], signs: &[i8]) -> Result<PolarDecomposition> {
    let mut r_minus: Vec<f64> = roots.iter().zip(signs).filter(|(_, &s)| s < 0).map(|(&r, _)| r).collect();
    let mut r_plus: Vec<f64> = roots.iter().zip(signs).filter(|(_, &s)| s > 0).map(|(&r, _)| r).collect();
    r_minus.sort_by(|a, b| b.total_cmp(a));
    r_plus.sort_by(f64::total_cmp);
    let lower = r_minus.first().copied().unwrap_or(0.0);
    let upper = r_plus.first().copied().unwrap_or(f64::INFINITY);
    if lower > upper * (1.0 + 1e-9) {
        return Err(Error::NotSeparated(format!("r₋ = {lower:.6e} exceeds r₊ = {upper:.6e}")));
    }
    Ok(PolarDecomposition { r, u, r_minus, r_plus })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Monotonicity {
    NotMonotone,
    Monotone,
    StrictlyMonotone,
}

pub const DEFAULT_MONOTONE_TOL: f64 = 1e-9;

pub fn is_j_monotone(form: &QuadraticForm, l: &DMatrix<f64>) -> Result<Monotonicity> {
    let polar = polar_decompose(form, l)?;
    Ok(monotonicity_of(&polar, DEFAULT_MONOTONE_TOL))
}

/// Monotonicity from the singular spectrum: strict iff r₋ < 1 < r₊.
pub fn monotonicity_of(polar: &PolarDecomposition, tol: f64) -> Monotonicity {
    let (lo, hi) = (polar.r_lower(), polar.r_upper());
    if lo < 1.0 - tol && hi > 1.0 + tol {
        Monotonicity::StrictlyMonotone
    } else if lo <= 1.0 + tol && hi >= 1.0 - tol {
        Monotonicity::Monotone
    } else {
        Monotonicity::NotMonotone
    }
}

/// Extremal quotients of a symmetric form `F` against `J`:
/// `r_lower = sup_{C₋} F(v)/J(v)` and `r_upper = inf_{C₊} F(v)/J(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PencilBounds {
    pub r_lower: f64,
    pub r_upper: f64,
    /// `max_ν λ_min(F − νJ)`: positive iff F is positive on `C₀ \ {0}`.
    pub null_cone_margin: f64,
}

pub fn kuhne_bounds(form: &QuadraticForm, f: &DMatrix<f64>) -> Result<PencilBounds> {
    check_square(form, f)?;
    let f = linalg::symmetrize(f);
    let j = form.matrix();
    let scale = linalg::spectral_norm(&f).max(form.norm());
    let nu_max = 2.0 * scale / form.min_abs_eigenvalue();
    let h = |nu: f64| linalg::min_sym_eigen(&(&f - j * nu)).0;
    let (nu, margin) = linalg::golden_section_max(h, -nu_max, nu_max, 200);
    let band = 1e-9 * scale;
    if margin < -band {
        let (_, w) = linalg::min_sym_eigen(&(&f - j * nu));
        let v = push_to_null_cone(form, &w).unwrap_or(w);
        let value = v.dot(&(&f * &v));
        return Err(Error::NotNonnegativeOnNullCone { witness: v, value });
    }
    let m = form.inverse() * &f;
    let eig = j_symmetric_eigen(form, &m).map_err(|e| Error::NoConvergence(format!("pencil F − rJ: {e}")))?;
    let mut r_lower = f64::NEG_INFINITY;
    let mut r_upper = f64::INFINITY;
    for (v, s) in eig.values.iter().zip(&eig.signs) {
        if *s < 0 {
            r_lower = r_lower.max(*v);
        } else {
            r_upper = r_upper.min(*v);
        }
    }
    Ok(PencilBounds { r_lower, r_upper, null_cone_margin: margin })
}

/// Minimal d-volume expansion over d-dimensional subspaces of `C₊`:
/// `σ_d(L) = r₊¹ ⋯ r₊ᵈ`.
pub fn sigma_d(form: &QuadraticForm, l: &DMatrix<f64>, d: usize) -> Result<f64> {
    let p = form.dim() - form.index_q();
    if d == 0 || d > p {
        return Err(Error::BadDimension(format!("d = {d} must lie in 1..={p}")));
    }
    let polar = polar_decompose(form, l)?;
    Ok(polar.r_plus[..d].iter().product())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn j2() -> QuadraticForm {
        QuadraticForm::diagonal(&[-1.0, 1.0]).unwrap()
    }

    fn boost(a: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a.cosh(), a.sinh(), a.sinh(), a.cosh()])
    }

    fn quarter_turn() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
    }

    #[test]
    fn separation_examples() {
        let j = j2();
        let l = linalg::diag(&[0.5, 2.0]);
        let v = check_separation(&j, &l).unwrap();
        assert_eq!(v.level, SeparationLevel::StrictlySeparated);
        let lam = v.certificate.unwrap();
        let a = l.transpose() * j.matrix() * &l;
        assert!(linalg::min_sym_eigen(&(&a - j.matrix() * lam)).0 > 0.0);
        // the hand certificate λ = 1 works as well: LᵀJL − J = diag(3/4, 3)
        assert_abs_diff_eq!(&a - j.matrix(), linalg::diag(&[0.75, 3.0]), epsilon = 1e-15);

        let v = check_separation(&j, &boost(0.7)).unwrap();
        assert_eq!(v.level, SeparationLevel::Separated);

        let v = check_separation(&j, &quarter_turn()).unwrap();
        assert_eq!(v.level, SeparationLevel::NotSeparated);
        let w = v.witness.unwrap();
        assert_abs_diff_eq!(w, dvector![0.0, 1.0], epsilon = 1e-9);
        assert_abs_diff_eq!(j.eval(&(quarter_turn() * &w)), -1.0, epsilon = 1e-9);
    }

    #[test]
    fn polar_examples() {
        let j = j2();
        let p = polar_decompose(&j, &linalg::diag(&[0.5, 2.0])).unwrap();
        assert_abs_diff_eq!(p.r, linalg::diag(&[0.5, 2.0]), epsilon = 1e-12);
        assert_abs_diff_eq!(p.u, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert_eq!(p.r_minus.len(), 1);
        assert_abs_diff_eq!(p.r_minus[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.r_plus[0], 2.0, epsilon = 1e-12);

        let b = boost(0.7);
        let p = polar_decompose(&j, &b).unwrap();
        assert_abs_diff_eq!(p.r, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert_abs_diff_eq!(p.u, b, epsilon = 1e-12);
        assert_abs_diff_eq!(p.r_minus[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.r_plus[0], 1.0, epsilon = 1e-12);

        assert!(matches!(polar_decompose(&j, &quarter_turn()), Err(Error::NotSeparated(_))));
        assert!(matches!(polar_decompose(&j, &linalg::diag(&[1.0, 0.0])), Err(Error::Singular)));
    }

    #[test]
    fn monotonicity_examples() {
        let j = j2();
        assert_eq!(is_j_monotone(&j, &linalg::diag(&[0.5, 2.0])).unwrap(), Monotonicity::StrictlyMonotone);
        assert_eq!(is_j_monotone(&j, &DMatrix::identity(2, 2)).unwrap(), Monotonicity::Monotone);
        assert_eq!(is_j_monotone(&j, &(boost(0.7) * 0.5)).unwrap(), Monotonicity::NotMonotone);
    }

    #[test]
    fn kuhne_examples() {
        let j = j2();
        let b = kuhne_bounds(&j, &linalg::diag(&[1.0, 4.0])).unwrap();
        assert_abs_diff_eq!(b.r_lower, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.r_upper, 4.0, epsilon = 1e-12);

        let b = kuhne_bounds(&j, j.matrix()).unwrap();
        assert_abs_diff_eq!(b.r_lower, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.r_upper, 1.0, epsilon = 1e-12);

        match kuhne_bounds(&j, &linalg::diag(&[-1.0, -1.0])) {
            Err(Error::NotNonnegativeOnNullCone { witness, value }) => {
                let s = 1.0 / 2f64.sqrt();
                assert_abs_diff_eq!(witness, dvector![s, s], epsilon = 1e-9);
                assert!(value < 0.0);
            }
            other => panic!("expected null-cone failure, got {other:?}"),
        }
    }

    #[test]
    fn sigma_d_examples() {
        let j = QuadraticForm::diagonal(&[-1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(sigma_d(&j, &linalg::diag(&[0.5, 2.0, 3.0]), 2).unwrap(), 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma_d(&j2(), &DMatrix::identity(2, 2), 1).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(sigma_d(&j, &DMatrix::identity(3, 3), 3), Err(Error::BadDimension(_))));
    }

    #[test]
    fn definite_forms_are_vacuously_separated() {
        let j = QuadraticForm::diagonal(&[-1.0, -1.0]).unwrap();
        let l = linalg::diag(&[0.2, 0.3]);
        assert_eq!(check_separation(&j, &l).unwrap().level, SeparationLevel::StrictlySeparated);
        let p = polar_decompose(&j, &l).unwrap();
        assert_eq!(p.r_plus.len(), 0);
        assert_abs_diff_eq!(p.r_minus[0], 0.3, epsilon = 1e-12);
        assert_eq!(monotonicity_of(&p, 1e-9), Monotonicity::StrictlyMonotone);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Exact minimum of `J(Lv)` over the closed positive cone of
        /// `diag(-1, 1)`, scanning the unit arc `|x| ≤ |y|`.
        fn arc_minimum(l: &DMatrix<f64>) -> f64 {
            let j = j2();
            (0..=4000)
                .map(|i| {
                    let t = std::f64::consts::FRAC_PI_4 + std::f64::consts::FRAC_PI_2 * i as f64 / 4000.0;
                    j.eval(&(l * dvector![t.cos(), t.sin()]))
                })
                .fold(f64::INFINITY, f64::min)
        }

        /// `exp(J A)` with `A` skew is a J-isometry of `diag(-I_q, I_p)`.
        fn isometry(q: usize, n: usize, raw: &[f64]) -> DMatrix<f64> {
            let a = DMatrix::from_fn(n, n, |i, j| if i < j { raw[i * n + j] } else if i > j { -raw[j * n + i] } else { 0.0 });
            let k = QuadraticForm::standard(q, n).matrix() * a;
            k.exp()
        }

        proptest! {
            #[test]
            fn separation_matches_arc_scan(raw in proptest::collection::vec(-2.0f64..2.0, 4)) {
                let l = DMatrix::from_row_slice(2, 2, &raw);
                let m = arc_minimum(&l);
                let v = check_separation(&j2(), &l).unwrap();
                if m < -1e-6 {
                    prop_assert_eq!(v.level, SeparationLevel::NotSeparated);
                    let w = v.witness.unwrap();
                    prop_assert!(j2().eval(&w) >= -1e-9);
                    prop_assert!(j2().eval(&(&l * &w)) < 0.0);
                } else if m > 1e-6 * (1.0 + l.norm_squared()) {
                    prop_assert_eq!(v.level, SeparationLevel::StrictlySeparated);
                }
            }

            #[test]
            fn polar_recovers_constructed_factors(
                (q, n) in (2usize..=5).prop_flat_map(|n| (1..n, Just(n))),
                raw in proptest::collection::vec(-0.4f64..0.4, 25),
                minus in proptest::collection::vec(0.1f64..0.9, 5),
                plus in proptest::collection::vec(1.1f64..3.0, 5),
            ) {
                let form = QuadraticForm::standard(q, n);
                let u0 = isometry(q, n, &raw);
                let d: Vec<f64> = (0..n).map(|i| if i < q { minus[i] } else { plus[i] }).collect();
                let l = &u0 * linalg::diag(&d);
                let p = polar_decompose(&form, &l).unwrap();
                prop_assert!((&p.r * &p.u - &l).amax() < 1e-9 * l.amax());
                prop_assert!(pseudo_metric::is_j_isometry(&form, &p.u, 1e-8));
                let r_adj = pseudo_metric::pseudo_adjoint(&form, &p.r).unwrap();
                prop_assert!((&r_adj - &p.r).amax() < 1e-8 * p.r.amax());
                let mut expect_minus = d[..q].to_vec();
                let mut expect_plus = d[q..].to_vec();
                expect_minus.sort_by(|a, b| b.total_cmp(a));
                expect_plus.sort_by(f64::total_cmp);
                for (a, b) in p.r_minus.iter().zip(&expect_minus) {
                    prop_assert!((a - b).abs() < 1e-8);
                }
                for (a, b) in p.r_plus.iter().zip(&expect_plus) {
                    prop_assert!((a - b).abs() < 1e-8);
                }
                prop_assert_eq!(monotonicity_of(&p, DEFAULT_MONOTONE_TOL), Monotonicity::StrictlyMonotone);
                prop_assert_eq!(check_separation(&form, &l).unwrap().level, SeparationLevel::StrictlySeparated);
            }

            #[test]
            fn pencil_bounds_bracket_sampled_quotients(raw in proptest::collection::vec(-1.0f64..1.0, 9), shift in 0.0f64..2.0) {
                let form = QuadraticForm::diagonal(&[-1.0, 1.0, 1.0]).unwrap();
                let m = DMatrix::from_row_slice(3, 3, &raw);
                // F = S + shift·J + c·I is positive on the null cone once c > 0
                let f = linalg::symmetrize(&m) + form.matrix() * shift + DMatrix::identity(3, 3) * (2.0 * linalg::spectral_norm(&m) + 0.1);
                let b = kuhne_bounds(&form, &f).unwrap();
                prop_assert!(b.null_cone_margin > 0.0);
                prop_assert!(b.r_lower <= b.r_upper + 1e-9);
                for v in sample_closed_positive_cone(&form, 400, 3) {
                    let jv = form.eval(&v);
                    if jv > 1e-6 {
                        prop_assert!(v.dot(&(&f * &v)) / jv >= b.r_upper - 1e-7);
                    }
                }
                for v in sample_closed_positive_cone(&form.negated(), 400, 4) {
                    let jv = form.eval(&v);
                    if jv < -1e-6 {
                        prop_assert!(v.dot(&(&f * &v)) / jv <= b.r_lower + 1e-7);
                    }
                }
            }
        }
    }
}

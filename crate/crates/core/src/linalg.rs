//! Small dense linear-algebra helpers shared by the analysis modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Flip `v` so that its first significant entry is positive.
pub fn canonical_sign(v: &mut DVector<f64>) {
    let scale = v.amax();
    if scale == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-9 * scale) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending and
/// eigenvectors sign-normalized, so results are reproducible.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let mut vecs = DMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (k, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        canonical_sign(&mut v);
        vecs.set_column(k, &v);
        vals.push(eig.eigenvalues[i]);
    }
    (vals, vecs)
}

pub fn min_sym_eigen(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let (vals, vecs) = sym_eigen(m);
    (vals[0], vecs.column(0).into_owned())
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Orthonormal basis for the column span of `m`; columns whose singular
/// value falls below `rel_tol * largest` are dropped.
pub fn orthonormal_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > rel_tol * smax)
        .collect();
    let mut out = DMatrix::zeros(n, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    canonical_columns(out)
}

/// Orthonormal basis of the Euclidean orthogonal complement of the span of
/// the (orthonormal) columns of `q`.
pub fn orthogonal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let proj = DMatrix::identity(n, n) - q * q.transpose();
    let (vals, vecs) = sym_eigen(&proj);
    let cols: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
    let mut out = DMatrix::zeros(n, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        out.set_column(k, &vecs.column(i));
    }
    out
}

fn canonical_columns(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for j in 0..m.ncols() {
        let mut c = m.column(j).into_owned();
        canonical_sign(&mut c);
        m.set_column(j, &c);
    }
    m
}

/// Principal angles (radians, ascending) between the spans of two
/// orthonormal column sets.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return Vec::new();
    }
    let (a, b) = if b.ncols() > a.ncols() { (b, a) } else { (a, b) };
    // acos loses half the digits near 0, so pair cosines with sines
    let m = a.transpose() * b;
    let mut cos: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    let mut sin: Vec<f64> = (b - a * &m).svd(false, false).singular_values.iter().copied().collect();
    cos.sort_by(|x, y| y.total_cmp(x));
    sin.sort_by(f64::total_cmp);
    let mut angles: Vec<f64> = cos.iter().zip(&sin).map(|(c, s)| s.atan2(*c)).collect();
    angles.sort_by(f64::total_cmp);
    angles
}

/// Distance between subspaces of equal dimension: the largest principal angle.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    principal_angles(a, b).last().copied().unwrap_or(0.0)
}

/// Minimum-norm least-squares solution of `a x = b` with a relative
/// singular-value cutoff.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, rel_tol * smax.max(f64::MIN_POSITIVE)).ok()
}

pub fn diag(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_row_slice(values))
}

pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return None;
    }
    Some(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Smallest singular value (0 for empty matrices).
pub fn min_singular(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

/// Maximize a unimodal (here: concave) function on `[lo, hi]` by
/// golden-section search. Returns `(argmax, max)`; endpoints are always
/// evaluated so maxima on the boundary are found exactly.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_of_axis() {
        let q = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        let c = orthogonal_complement(&q);
        assert_eq!(c.ncols(), 2);
        assert!((q.transpose() * &c).amax() < 1e-14);
    }

    #[test]
    fn angles_between_identical_spans_vanish() {
        let a = orthonormal_basis(&DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]), 1e-12);
        let b = orthonormal_basis(&DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, -1.0]), 1e-12);
        assert!(subspace_distance(&a, &b) < 1e-7);
    }
}

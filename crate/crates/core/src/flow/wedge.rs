//! Exterior powers: the p-th compound matrix of minors.

use nalgebra::DMatrix;

use super::cocycle::CocycleSegment;
use crate::error::{Error, Result};

/// p-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if p > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..p).collect();
    loop {
        out.push(cur.clone());
        // rightmost index that can still advance
        let Some(i) = (0..p).rev().find(|&i| cur[i] < n - p + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..p {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// `∧ᵖ m`: entry `(I, J)` is the minor of `m` on rows `I`, columns `J`.
pub fn compound_matrix(m: &DMatrix<f64>, p: usize) -> Result<DMatrix<f64>> {
    let (r, c) = m.shape();
    if p == 0 || p > r.min(c) {
        return Err(Error::BadDimension(format!("wedge order {p} outside 1..={}", r.min(c))));
    }
    let rows = subsets(r, p);
    let cols = subsets(c, p);
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        DMatrix::from_fn(p, p, |a, b| m[(rows[i][a], cols[j][b])]).determinant()
    }))
}

pub fn wedge_cocycle(segment: &CocycleSegment, p: usize) -> Result<DMatrix<f64>> {
    compound_matrix(&segment.matrix, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn subset_order() {
        assert_eq!(subsets(4, 2), vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(subsets(3, 3), vec![vec![0, 1, 2]]);
        assert!(subsets(2, 3).is_empty());
    }

    #[test]
    fn diagonal_and_top_degree() {
        let (a, b, c) = (0.3f64, -1.2f64, 0.7f64);
        let m = linalg::diag(&[a.exp(), b.exp(), c.exp()]);
        let w = compound_matrix(&m, 2).unwrap();
        assert_abs_diff_eq!(w, linalg::diag(&[(a + b).exp(), (a + c).exp(), (b + c).exp()]), epsilon = 1e-14);
        let full = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, -1.0, 0.3, 2.0, 0.0, 1.0, 4.0]);
        let top = compound_matrix(&full, 3).unwrap();
        assert_eq!(top.shape(), (1, 1));
        assert_abs_diff_eq!(top[(0, 0)], full.determinant(), epsilon = 1e-13);
        assert!(matches!(compound_matrix(&full, 0), Err(Error::BadDimension(_))));
        assert!(matches!(compound_matrix(&full, 4), Err(Error::BadDimension(_))));
    }

    /// Minor of a product by expanding the product entrywise first.
    fn direct_minor(m1: &DMatrix<f64>, m2: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
        let p = rows.len();
        let mut sub = DMatrix::zeros(p, p);
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                sub[(a, b)] = (0..m1.ncols()).map(|k| m1[(i, k)] * m2[(k, j)]).sum();
            }
        }
        sub.determinant()
    }

    proptest! {
        #[test]
        fn compound_is_multiplicative(raw1 in proptest::collection::vec(-2.0f64..2.0, 16), raw2 in proptest::collection::vec(-2.0f64..2.0, 16), p in 1usize..=4) {
            let m1 = DMatrix::from_row_slice(4, 4, &raw1);
            let m2 = DMatrix::from_row_slice(4, 4, &raw2);
            let product = compound_matrix(&m1, p).unwrap() * compound_matrix(&m2, p).unwrap();
            let direct = compound_matrix(&(&m1 * &m2), p).unwrap();
            prop_assert!((&product - &direct).amax() < 1e-8 * (1.0 + direct.amax()));
            let idx = subsets(4, p);
            for (i, r) in idx.iter().enumerate() {
                for (j, c) in idx.iter().enumerate() {
                    prop_assert!((product[(i, j)] - direct_minor(&m1, &m2, r, c)).abs() < 1e-8 * (1.0 + direct.amax()));
                }
            }
        }
    }
}

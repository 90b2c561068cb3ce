//! The form derivative `J′(v) = ⟨(J A + Aᵀ J + ∇_X J) v, v⟩`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::field::{field_flow_derivative, FormField};
use crate::error::{Error, Result};
use crate::flow::VectorFieldModel;
use crate::linalg;

/// Symmetric matrix of `J′` at `x`.
pub fn form_derivative_matrix(field: &dyn FormField, model: &VectorFieldModel, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_dims(field, model, x)?;
    let j = field.matrix_at(x)?;
    let a = model.jacobian(x);
    let d = field_flow_derivative(field, model, x)?;
    Ok(linalg::symmetrize(&(&j * &a + a.transpose() * &j + d)))
}

pub fn form_derivative(field: &dyn FormField, model: &VectorFieldModel, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    if v.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: v.len() });
    }
    if v.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let m = form_derivative_matrix(field, model, x)?;
    Ok(v.dot(&(m * v)))
}

fn check_dims(field: &dyn FormField, model: &VectorFieldModel, x: &DVector<f64>) -> Result<()> {
    if field.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: field.dim() });
    }
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: x.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SingularityPositivity {
    PositiveDefinite { min_eigenvalue: f64 },
    Fails { witness: Vec<f64>, value: f64 },
}

impl SingularityPositivity {
    pub fn passed(&self) -> bool {
        matches!(self, Self::PositiveDefinite { .. })
    }
}

/// Positivity of `J A + Aᵀ J` at an equilibrium `σ` (`A = DX(σ)`).
pub fn singularity_form_positivity(field: &dyn FormField, model: &VectorFieldModel, sigma: &DVector<f64>) -> Result<SingularityPositivity> {
    check_dims(field, model, sigma)?;
    let speed = model.eval(sigma).norm();
    if speed > 1e-8 * sigma.norm().max(1.0) {
        return Err(Error::NotEquilibrium(speed));
    }
    let j = field.matrix_at(sigma)?;
    let a = model.jacobian(sigma);
    let l = linalg::symmetrize(&(&j * &a + a.transpose() * &j));
    let tol = 1e-10 * linalg::spectral_norm(&j) * linalg::spectral_norm(&a);
    let (min, w) = linalg::min_sym_eigen(&l);
    if min > tol && min > 0.0 {
        Ok(SingularityPositivity::PositiveDefinite { min_eigenvalue: min })
    } else {
        Ok(SingularityPositivity::Fails { witness: w.iter().copied().collect(), value: min })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone_field::field::ConstantField;
    use crate::pseudo_metric::QuadraticForm;
    use nalgebra::dvector;

    fn constant(d: &[f64]) -> ConstantField {
        ConstantField::new(QuadraticForm::diagonal(d).unwrap())
    }

    #[test]
    fn derivative_examples() {
        let model = VectorFieldModel::linear(linalg::diag(&[-2.0, -1.0, 1.0])).unwrap();
        let field = constant(&[-1.0, -1.0, 1.0]);
        let x = dvector![0.2, 0.1, 1.0];
        assert!((form_derivative(&field, &model, &x, &dvector![1.0, 0.0, 0.0]).unwrap() - 4.0).abs() < 1e-14);
        let m = form_derivative_matrix(&field, &model, &x).unwrap();
        assert!((linalg::min_sym_eigen(&m).0 - 2.0).abs() < 1e-14);

        let frozen = VectorFieldModel::linear(DMatrix::zeros(2, 2)).unwrap();
        let f2 = constant(&[-1.0, 1.0]);
        assert_eq!(form_derivative(&f2, &frozen, &dvector![0.0, 0.0], &dvector![1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(form_derivative(&f2, &frozen, &dvector![0.0, 0.0], &dvector![0.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn positivity_examples() {
        let root = 1201f64.sqrt();
        let diag_lorenz = VectorFieldModel::linear(linalg::diag(&[(-11.0 - root) / 2.0, -8.0 / 3.0, (-11.0 + root) / 2.0])).unwrap();
        match singularity_form_positivity(&constant(&[-1.0, -1.0, 1.0]), &diag_lorenz, &DVector::zeros(3)).unwrap() {
            SingularityPositivity::PositiveDefinite { min_eigenvalue } => assert!((min_eigenvalue - 16.0 / 3.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }

        let saddle = VectorFieldModel::linear(linalg::diag(&[-1.0, 1.0])).unwrap();
        match singularity_form_positivity(&constant(&[1.0, -1.0]), &saddle, &DVector::zeros(2)).unwrap() {
            SingularityPositivity::Fails { witness, value } => {
                assert!((value + 2.0).abs() < 1e-14);
                assert_eq!(witness, vec![1.0, 0.0]);
            }
            other => panic!("{other:?}"),
        }

        let zero = VectorFieldModel::linear(DMatrix::zeros(2, 2)).unwrap();
        assert!(!singularity_form_positivity(&constant(&[-1.0, 1.0]), &zero, &DVector::zeros(2)).unwrap().passed());

        let lorenz = VectorFieldModel::lorenz_classic();
        assert!(matches!(
            singularity_form_positivity(&constant(&[-1.0, -1.0, 1.0]), &lorenz, &dvector![1.0, 1.0, 1.0]),
            Err(Error::NotEquilibrium(_))
        ));
    }
}

//! Quadratic-form fields `x ↦ J_x`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flow::{flow_to, Tolerances, VectorFieldModel};
use crate::linalg;
use crate::pseudo_metric::QuadraticForm;

pub trait FormField {
    fn dim(&self) -> usize;

    /// The constant index `q` of the field.
    fn index(&self) -> usize;

    /// `J_x`; `OutsideDomain` when `x` is not covered by the field.
    fn matrix_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Closed-form `∇_X J(x)`, if the field provides one.
    fn flow_derivative(&self, _model: &VectorFieldModel, _x: &DVector<f64>) -> Option<Result<DMatrix<f64>>> {
        None
    }

    fn label(&self) -> String;

    fn form_at(&self, x: &DVector<f64>) -> Result<QuadraticForm> {
        let form = QuadraticForm::new(self.matrix_at(x)?)?;
        if form.index_q() != self.index() {
            return Err(Error::InvalidArgument(format!(
                "field index changed: expected {}, found {} at the sample point",
                self.index(),
                form.index_q()
            )));
        }
        Ok(form)
    }
}

/// `∇_X J(x)`: analytic when available, else a central difference along the
/// orbit with step `1e-4` times the local time scale `1 / max(1, ‖DX(x)‖)`.
pub fn field_flow_derivative(field: &dyn FormField, model: &VectorFieldModel, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    if let Some(d) = field.flow_derivative(model, x) {
        return d;
    }
    numerical_flow_derivative(field, model, x)
}

pub fn numerical_flow_derivative(field: &dyn FormField, model: &VectorFieldModel, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let scale = linalg::spectral_norm(&model.jacobian(x)).max(1.0);
    let h = 1e-4 / scale;
    let tol = Tolerances::new(1e-12, 1e-14);
    let plus = flow_to(model, x, h, &tol)?;
    let minus = flow_to(model, x, -h, &tol)?;
    Ok((field.matrix_at(&plus)? - field.matrix_at(&minus)?) / (2.0 * h))
}

#[derive(Debug, Clone)]
pub struct ConstantField {
    form: QuadraticForm,
}

impl ConstantField {
    pub fn new(form: QuadraticForm) -> Self {
        Self { form }
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        Ok(Self { form: QuadraticForm::new(m)? })
    }

    pub fn form(&self) -> &QuadraticForm {
        &self.form
    }
}

impl FormField for ConstantField {
    fn dim(&self) -> usize {
        self.form.dim()
    }

    fn index(&self) -> usize {
        self.form.index_q()
    }

    fn matrix_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(self.form.matrix().clone())
    }

    fn flow_derivative(&self, _model: &VectorFieldModel, x: &DVector<f64>) -> Option<Result<DMatrix<f64>>> {
        Some(Ok(DMatrix::zeros(x.len(), x.len())))
    }

    fn form_at(&self, x: &DVector<f64>) -> Result<QuadraticForm> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(self.form.clone())
    }

    fn label(&self) -> String {
        "constant".into()
    }
}

/// `J_x = J₀ + Σᵢ xᵢ Jᵢ`, valid where the index equals that of `J₀`.
#[derive(Debug, Clone)]
pub struct AffineField {
    base: QuadraticForm,
    slopes: Vec<DMatrix<f64>>,
}

impl AffineField {
    pub fn new(base: QuadraticForm, slopes: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = base.dim();
        if slopes.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: slopes.len() });
        }
        for s in &slopes {
            if s.shape() != (n, n) {
                return Err(Error::DimensionMismatch { expected: n, found: s.nrows().max(s.ncols()) });
            }
        }
        let slopes = slopes.iter().map(linalg::symmetrize).collect();
        Ok(Self { base, slopes })
    }
}

impl FormField for AffineField {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn index(&self) -> usize {
        self.base.index_q()
    }

    fn matrix_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let mut m = self.base.matrix().clone();
        for (xi, s) in x.iter().zip(&self.slopes) {
            m += s * *xi;
        }
        let form = QuadraticForm::new(m.clone()).map_err(|_| Error::OutsideDomain)?;
        if form.index_q() != self.index() {
            return Err(Error::OutsideDomain);
        }
        Ok(m)
    }

    fn flow_derivative(&self, model: &VectorFieldModel, x: &DVector<f64>) -> Option<Result<DMatrix<f64>>> {
        let xdot = model.eval(x);
        let mut d = DMatrix::zeros(self.dim(), self.dim());
        for (v, s) in xdot.iter().zip(&self.slopes) {
            d += s * *v;
        }
        Some(Ok(d))
    }

    fn label(&self) -> String {
        "affine".into()
    }
}

/// Form diagonal in cylindrical frames about the `z` axis of ℝ³:
/// `J = s_r r̂r̂ᵀ + s_φ φ̂φ̂ᵀ + s_z ẑẑᵀ`, defined for `r > r_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylindricalField {
    pub s_r: f64,
    pub s_phi: f64,
    pub s_z: f64,
    pub r_min: f64,
}

impl CylindricalField {
    pub fn new(s_r: f64, s_phi: f64, s_z: f64) -> Result<Self> {
        if [s_r, s_phi, s_z].iter().any(|s| *s == 0.0 || !s.is_finite()) {
            return Err(Error::DegenerateForm { smallest: 0.0, tolerance: 0.0 });
        }
        Ok(Self { s_r, s_phi, s_z, r_min: 1e-6 })
    }

    fn frame(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>, f64)> {
        if x.len() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, found: x.len() });
        }
        let r = x[0].hypot(x[1]);
        if r <= self.r_min {
            return Err(Error::OutsideDomain);
        }
        let rhat = DVector::from_vec(vec![x[0] / r, x[1] / r, 0.0]);
        let phat = DVector::from_vec(vec![-x[1] / r, x[0] / r, 0.0]);
        Ok((rhat, phat, r))
    }
}

impl FormField for CylindricalField {
    fn dim(&self) -> usize {
        3
    }

    fn index(&self) -> usize {
        [self.s_r, self.s_phi, self.s_z].iter().filter(|s| **s < 0.0).count()
    }

    fn matrix_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (rhat, phat, _) = self.frame(x)?;
        let mut m = &rhat * rhat.transpose() * self.s_r + &phat * phat.transpose() * self.s_phi;
        m[(2, 2)] += self.s_z;
        Ok(m)
    }

    fn flow_derivative(&self, model: &VectorFieldModel, x: &DVector<f64>) -> Option<Result<DMatrix<f64>>> {
        let (rhat, phat, r) = match self.frame(x) {
            Ok(f) => f,
            Err(e) => return Some(Err(e)),
        };
        let xdot = model.eval(x);
        let omega = (x[0] * xdot[1] - x[1] * xdot[0]) / (r * r);
        let sym = &phat * rhat.transpose() + &rhat * phat.transpose();
        Some(Ok(sym * (omega * (self.s_r - self.s_phi))))
    }

    fn label(&self) -> String {
        format!("cylindrical(s_r={}, s_phi={}, s_z={})", self.s_r, self.s_phi, self.s_z)
    }
}

/// `c · J` for a nonzero constant `c` (negative `c` gives the reversed field).
pub struct ScaledField<'a> {
    pub inner: &'a dyn FormField,
    pub factor: f64,
}

impl FormField for ScaledField<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn index(&self) -> usize {
        if self.factor > 0.0 {
            self.inner.index()
        } else {
            self.inner.dim() - self.inner.index()
        }
    }

    fn matrix_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.inner.matrix_at(x)? * self.factor)
    }

    fn flow_derivative(&self, model: &VectorFieldModel, x: &DVector<f64>) -> Option<Result<DMatrix<f64>>> {
        self.inner.flow_derivative(model, x).map(|r| r.map(|d| d * self.factor))
    }

    fn label(&self) -> String {
        format!("{} x {}", self.factor, self.inner.label())
    }
}

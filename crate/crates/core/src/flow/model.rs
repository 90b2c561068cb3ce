//! Vector-field models with analytic Jacobians.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `coefficient · ∏ x_i^{powers[i]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coefficient: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Linear(DMatrix<f64>),
    Lorenz { sigma: f64, rho: f64, beta: f64 },
    /// `ẋ = −y + x(1−x²−y²)`, `ẏ = x + y(1−x²−y²)`, `ż = −z_rate·z`.
    PlanarLimitCycle { z_rate: f64 },
    /// One list of monomials per component.
    Polynomial(Vec<Vec<Monomial>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldModel {
    kind: ModelKind,
    dim: usize,
    reversed: bool,
}

impl VectorFieldModel {
    pub fn linear(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::BadDimension(format!("linear model needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        let dim = a.nrows();
        Ok(Self { kind: ModelKind::Linear(a), dim, reversed: false })
    }

    pub fn lorenz(sigma: f64, rho: f64, beta: f64) -> Self {
        Self { kind: ModelKind::Lorenz { sigma, rho, beta }, dim: 3, reversed: false }
    }

    /// Lorenz with the classical parameters (10, 28, 8/3).
    pub fn lorenz_classic() -> Self {
        Self::lorenz(10.0, 28.0, 8.0 / 3.0)
    }

    pub fn planar_limit_cycle(z_rate: f64) -> Self {
        Self { kind: ModelKind::PlanarLimitCycle { z_rate }, dim: 3, reversed: false }
    }

    pub fn polynomial(components: Vec<Vec<Monomial>>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::BadDimension("polynomial model with no components".into()));
        }
        for (i, comp) in components.iter().enumerate() {
            for m in comp {
                if m.powers.len() != dim {
                    return Err(Error::BadDimension(format!(
                        "component {i}: monomial has {} exponents, expected {dim}",
                        m.powers.len()
                    )));
                }
            }
        }
        Ok(Self { kind: ModelKind::Polynomial(components), dim, reversed: false })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    /// The same field with time running backwards (`X ↦ −X`).
    pub fn reversed(&self) -> Self {
        Self { reversed: !self.reversed, ..self.clone() }
    }

    pub fn family(&self) -> &'static str {
        match self.kind {
            ModelKind::Linear(_) => "linear",
            ModelKind::Lorenz { .. } => "lorenz",
            ModelKind::PlanarLimitCycle { .. } => "planar_limit_cycle",
            ModelKind::Polynomial(_) => "polynomial",
        }
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            ModelKind::Linear(a) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..self.dim).map(|j| a[(i, j)] * x[j]).sum();
                }
            }
            ModelKind::Lorenz { sigma, rho, beta } => {
                out[0] = sigma * (x[1] - x[0]);
                out[1] = x[0] * (rho - x[2]) - x[1];
                out[2] = x[0] * x[1] - beta * x[2];
            }
            ModelKind::PlanarLimitCycle { z_rate } => {
                let s = 1.0 - x[0] * x[0] - x[1] * x[1];
                out[0] = -x[1] + x[0] * s;
                out[1] = x[0] + x[1] * s;
                out[2] = -z_rate * x[2];
            }
            ModelKind::Polynomial(comps) => {
                for (o, comp) in out.iter_mut().zip(comps) {
                    *o = comp.iter().map(|m| m.coefficient * monomial_value(&m.powers, x, None)).sum();
                }
            }
        }
        if self.reversed {
            out.iter_mut().for_each(|v| *v = -*v);
        }
    }

    /// Row-major `n × n` Jacobian.
    pub fn jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        match &self.kind {
            ModelKind::Linear(a) => {
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = a[(i, j)];
                    }
                }
            }
            ModelKind::Lorenz { sigma, rho, beta } => {
                out.copy_from_slice(&[-sigma, *sigma, 0.0, rho - x[2], -1.0, -x[0], x[1], x[0], -beta]);
            }
            ModelKind::PlanarLimitCycle { z_rate } => {
                let (a, b) = (x[0], x[1]);
                out.copy_from_slice(&[
                    1.0 - 3.0 * a * a - b * b,
                    -1.0 - 2.0 * a * b,
                    0.0,
                    1.0 - 2.0 * a * b,
                    1.0 - a * a - 3.0 * b * b,
                    0.0,
                    0.0,
                    0.0,
                    -z_rate,
                ]);
            }
            ModelKind::Polynomial(comps) => {
                for (i, comp) in comps.iter().enumerate() {
                    for j in 0..n {
                        out[i * n + j] = comp.iter().map(|m| m.coefficient * monomial_value(&m.powers, x, Some(j))).sum();
                    }
                }
            }
        }
        if self.reversed {
            out.iter_mut().for_each(|v| *v = -*v);
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        self.eval_into(x.as_slice(), out.as_mut_slice());
        out
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim;
        let mut buf = vec![0.0; n * n];
        self.jacobian_into(x.as_slice(), &mut buf);
        DMatrix::from_row_slice(n, n, &buf)
    }

    pub fn divergence(&self, x: &DVector<f64>) -> f64 {
        self.jacobian(x).trace()
    }

    /// Largest relative deviation between the analytic Jacobian and a central
    /// difference of `eval`, over `samples` random points in `[-scale, scale]ⁿ`.
    pub fn jacobian_self_test(&self, samples: usize, scale: f64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x = DVector::from_fn(n, |_, _| rng.random_range(-scale..=scale));
            let analytic = self.jacobian(&x);
            let mut fd = DMatrix::zeros(n, n);
            for j in 0..n {
                let h = 1e-6 * (1.0 + x[j].abs());
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                fd.set_column(j, &((self.eval(&xp) - self.eval(&xm)) / (2.0 * h)));
            }
            worst = worst.max((fd - &analytic).norm() / analytic.norm().max(1.0));
        }
        worst
    }
}

/// Value of `∏ x_i^{p_i}`, or its partial derivative in `x_d`.
fn monomial_value(powers: &[u32], x: &[f64], d: Option<usize>) -> f64 {
    let mut v = 1.0;
    for (i, (&p, &xi)) in powers.iter().zip(x).enumerate() {
        if Some(i) == d {
            if p == 0 {
                return 0.0;
            }
            v *= p as f64 * xi.powi(p as i32 - 1);
        } else {
            v *= xi.powi(p as i32);
        }
    }
    v
}

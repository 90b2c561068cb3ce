//! Singularities of the vector field: Newton refinement and linear spectra.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::VectorFieldModel;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Eigenvalues of a real matrix, sorted by real part descending (then by
/// imaginary part descending).
pub fn spectrum(a: &DMatrix<f64>) -> Vec<Eigenvalue> {
    let mut ev: Vec<Eigenvalue> = a.clone().complex_eigenvalues().iter().map(|z| Eigenvalue { re: z.re, im: z.im }).collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    ev
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub point: DVector<f64>,
    pub eigenvalues: Vec<Eigenvalue>,
    /// Number of eigenvalues with negative real part.
    pub index: usize,
    pub hyperbolic: bool,
    /// `‖X(σ)‖`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOptions {
    pub newton_tol: f64,
    pub max_iter: usize,
    pub dedup_radius: f64,
    /// Eigenvalues with `|Re| ≤ spectral_tol` count as central.
    pub spectral_tol: f64,
    /// Backtracking line search on `‖X‖`.
    pub damping: bool,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self { newton_tol: 1e-10, max_iter: 100, dedup_radius: 1e-6, spectral_tol: 1e-8, damping: true }
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumSearch {
    pub equilibria: Vec<Equilibrium>,
    /// Seeds whose Newton iteration failed, with the reason.
    pub failures: Vec<(usize, Error)>,
}

/// Spectrum, index and hyperbolicity at a point already known to be a zero.
pub fn analyze_equilibrium(model: &VectorFieldModel, point: &DVector<f64>, opts: &EquilibriumOptions) -> Equilibrium {
    let eigenvalues = spectrum(&model.jacobian(point));
    let index = eigenvalues.iter().filter(|e| e.re < 0.0).count();
    let min_re = eigenvalues.iter().map(|e| e.re.abs()).fold(f64::INFINITY, f64::min);
    Equilibrium {
        point: point.clone(),
        hyperbolic: min_re > opts.spectral_tol,
        eigenvalues,
        index,
        residual: model.eval(point).norm(),
    }
}

pub fn newton_refine(model: &VectorFieldModel, seed: &DVector<f64>, opts: &EquilibriumOptions) -> Result<DVector<f64>> {
    let n = model.dim();
    if seed.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: seed.len() });
    }
    let mut x = seed.clone();
    let mut fx = model.eval(&x);
    for _ in 0..opts.max_iter {
        let r = fx.norm();
        if r <= opts.newton_tol {
            return Ok(x);
        }
        let jac = model.jacobian(&x);
        let dx = linalg::lstsq(&jac, &(-&fx), 1e-14).ok_or_else(|| Error::NoConvergence("singular Newton system".into()))?;
        let mut step = 1.0;
        loop {
            let trial = &x + &dx * step;
            let ft = model.eval(&trial);
            if !opts.damping || ft.norm() < r || step < 1e-6 {
                x = trial;
                fx = ft;
                break;
            }
            step *= 0.5;
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NoConvergence("Newton iterate diverged".into()));
        }
    }
    let r = fx.norm();
    if r <= opts.newton_tol {
        Ok(x)
    } else {
        Err(Error::NoConvergence(format!("residual {r:.3e} after {} iterations", opts.max_iter)))
    }
}

pub fn find_equilibria(model: &VectorFieldModel, seeds: &[DVector<f64>], opts: &EquilibriumOptions) -> Result<EquilibriumSearch> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("seed list is empty".into()));
    }
    let mut equilibria: Vec<Equilibrium> = Vec::new();
    let mut failures = Vec::new();
    for (i, seed) in seeds.iter().enumerate() {
        match newton_refine(model, seed, opts) {
            Ok(x) => {
                if equilibria.iter().all(|e| (&e.point - &x).norm() > opts.dedup_radius) {
                    equilibria.push(analyze_equilibrium(model, &x, opts));
                }
            }
            Err(e @ Error::DimensionMismatch { .. }) => return Err(e),
            Err(e) => failures.push((i, e)),
        }
    }
    Ok(EquilibriumSearch { equilibria, failures })
}

/// Closed-form equilibria of the Lorenz system (origin and, for ρ > 1, C±).
pub fn lorenz_equilibria(rho: f64, beta: f64) -> Vec<DVector<f64>> {
    let mut out = vec![DVector::zeros(3)];
    if rho > 1.0 {
        let c = (beta * (rho - 1.0)).sqrt();
        out.push(DVector::from_vec(vec![c, c, rho - 1.0]));
        out.push(DVector::from_vec(vec![-c, -c, rho - 1.0]));
    }
    out
}

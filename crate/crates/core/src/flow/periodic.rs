//! Periodic orbits by Newton shooting, and their Floquet multipliers.

use nalgebra::{DMatrix, DVector};

use super::cocycle::tangent_cocycle;
use super::equilibria::{spectrum, Eigenvalue};
use super::integrator::Tolerances;
use super::model::VectorFieldModel;
use crate::error::{Error, Result};
use crate::linalg;

/// Affine hyperplane `{x : ⟨normal, x⟩ = offset}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl Section {
    pub fn through(normal: DVector<f64>, point: &DVector<f64>) -> Result<Self> {
        if normal.len() != point.len() {
            return Err(Error::DimensionMismatch { expected: point.len(), found: normal.len() });
        }
        let norm = normal.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        let normal = normal / norm;
        let offset = normal.dot(point);
        Ok(Self { normal, offset })
    }

    /// `{x_axis = value}`.
    pub fn coordinate(dim: usize, axis: usize, value: f64) -> Result<Self> {
        if axis >= dim {
            return Err(Error::BadDimension(format!("axis {axis} outside dimension {dim}")));
        }
        let mut normal = DVector::zeros(dim);
        normal[axis] = 1.0;
        Ok(Self { normal, offset: value })
    }

    pub fn signed_distance(&self, x: &DVector<f64>) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicOrbitOptions {
    /// Bound on `‖X_T(x) − x‖` and the section residual.
    pub shooting_tol: f64,
    pub max_iter: usize,
    pub integration: Tolerances,
    /// Trivial multiplier must lie within this distance of 1.
    pub trivial_tol: f64,
    /// Multipliers with `||μ| − 1| ≤ spectral_tol` count as central.
    pub spectral_tol: f64,
    /// Minimal `|⟨n, X⟩| / ‖X‖` at the guess.
    pub transversality_tol: f64,
}

impl Default for PeriodicOrbitOptions {
    fn default() -> Self {
        Self {
            shooting_tol: 1e-10,
            max_iter: 40,
            integration: Tolerances::new(1e-13, 1e-15),
            trivial_tol: 1e-4,
            spectral_tol: 1e-6,
            transversality_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub anchor: DVector<f64>,
    pub period: f64,
    /// Nontrivial multipliers, by modulus descending.
    pub multipliers: Vec<Eigenvalue>,
    /// The removed multiplier (`None` when none was close enough to 1).
    pub trivial_multiplier: Option<Eigenvalue>,
    /// Number of nontrivial multipliers inside the unit circle.
    pub index: usize,
    pub hyperbolic: bool,
    /// `‖X_T(anchor) − anchor‖`.
    pub residual: f64,
    pub monodromy: DMatrix<f64>,
    /// Set when no multiplier lies within `trivial_tol` of 1.
    pub suspect: Option<String>,
    pub iterations: usize,
}

impl PeriodicOrbit {
    pub fn require_trustworthy(&self) -> Result<&Self> {
        match &self.suspect {
            Some(why) => Err(Error::SuspectOrbit(why.clone())),
            None => Ok(self),
        }
    }
}

pub fn find_periodic_orbit(
    model: &VectorFieldModel,
    section: &Section,
    guess_point: &DVector<f64>,
    guess_period: f64,
    opts: &PeriodicOrbitOptions,
) -> Result<PeriodicOrbit> {
    let n = model.dim();
    if guess_point.len() != n || section.normal.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: guess_point.len().max(section.normal.len()) });
    }
    if !(guess_period > 0.0 && guess_period.is_finite()) {
        return Err(Error::InvalidArgument(format!("period guess must be positive, got {guess_period}")));
    }
    let field = model.eval(guess_point);
    let transversality = section.normal.dot(&field).abs() / field.norm().max(f64::MIN_POSITIVE);
    if field.norm() == 0.0 || transversality < opts.transversality_tol {
        return Err(Error::NonTransverseSection(transversality));
    }

    let mut x = guess_point.clone();
    let mut period = guess_period;
    let shoot = |x: &DVector<f64>, t: f64| tangent_cocycle(model, x, t, &opts.integration);
    let residual_of = |x: &DVector<f64>, end: &DVector<f64>| {
        let f = end - x;
        (f.norm_squared() + section.signed_distance(x).powi(2)).sqrt()
    };
    let mut seg = shoot(&x, period).map_err(|e| Error::NoConvergence(format!("shooting from the guess failed: {e}")))?;
    let mut residual = residual_of(&x, &seg.end);
    let mut iterations = 0;
    while residual > opts.shooting_tol * x.norm().max(1.0) {
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence(format!("shooting residual {residual:.3e} after {iterations} iterations")));
        }
        iterations += 1;
        let mut a = DMatrix::zeros(n + 1, n + 1);
        a.view_mut((0, 0), (n, n)).copy_from(&(&seg.matrix - DMatrix::identity(n, n)));
        a.view_mut((0, n), (n, 1)).copy_from(&model.eval(&seg.end));
        a.view_mut((n, 0), (1, n)).copy_from(&section.normal.transpose());
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&(&x - &seg.end));
        rhs[n] = -section.signed_distance(&x);
        let delta = linalg::lstsq(&a, &rhs, 1e-13).ok_or_else(|| Error::NoConvergence("singular shooting system".into()))?;

        let mut step = 1.0;
        loop {
            let trial_x = &x + delta.rows(0, n) * step;
            let trial_t = period + delta[n] * step;
            // T → 0 makes every point a trivial fixed point; keep away from it
            let accepted = if trial_t > 1e-2 * guess_period {
                match shoot(&trial_x, trial_t) {
                    Ok(s) => {
                        let r = residual_of(&trial_x, &s.end);
                        (r < residual || step < 1e-3).then_some((trial_x, trial_t, s, r))
                    }
                    Err(_) => None,
                }
            } else {
                None
            };
            if let Some((tx, tt, s, r)) = accepted {
                x = tx;
                period = tt;
                seg = s;
                residual = r;
                break;
            }
            step *= 0.5;
            if step < 1e-3 {
                return Err(Error::NoConvergence(format!("line search stalled at residual {residual:.3e}")));
            }
        }
    }

    let speed = model.eval(&x).norm();
    if speed <= 1e-8 * x.norm().max(1.0) {
        return Err(Error::NoConvergence("shooting converged onto an equilibrium".into()));
    }
    classify_orbit(x, period, seg.matrix, residual, iterations, opts)
}

/// Floquet data from a monodromy matrix at an anchor.
pub fn classify_orbit(
    anchor: DVector<f64>,
    period: f64,
    monodromy: DMatrix<f64>,
    residual: f64,
    iterations: usize,
    opts: &PeriodicOrbitOptions,
) -> Result<PeriodicOrbit> {
    let mut all = spectrum(&monodromy);
    all.sort_by(|a, b| b.modulus().total_cmp(&a.modulus()));
    let dist = |e: &Eigenvalue| (e.re - 1.0).hypot(e.im);
    let closest = (0..all.len()).min_by(|&i, &j| dist(&all[i]).total_cmp(&dist(&all[j])));
    let (trivial_multiplier, suspect) = match closest {
        Some(i) if dist(&all[i]) <= opts.trivial_tol => (Some(all.remove(i)), None),
        Some(i) => (None, Some(format!("no multiplier within {:.1e} of 1 (closest at distance {:.3e})", opts.trivial_tol, dist(&all[i])))),
        None => (None, Some("empty spectrum".into())),
    };
    let index = all.iter().filter(|e| e.modulus() < 1.0).count();
    let hyperbolic = suspect.is_none() && all.iter().all(|e| (e.modulus() - 1.0).abs() > opts.spectral_tol);
    Ok(PeriodicOrbit {
        anchor,
        period,
        multipliers: all,
        trivial_multiplier,
        index,
        hyperbolic,
        residual,
        monodromy,
        suspect,
        iterations,
    })
}

//! Lyapunov exponents against time-averaged pseudo-Euclidean singular values.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cone_field::FormField;
use crate::error::{Error, Result};
use crate::flow::{interval_cocycles, lyapunov_exponents, LyapunovOptions, PeriodicOrbit, Tolerances, VectorFieldModel};
use crate::jsep_analysis::polar_decompose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsOptions {
    pub initial_step: f64,
    /// Largest change of any averaged `log r` between successive halvings.
    pub step_tol: f64,
    pub max_halvings: usize,
    pub integration: Tolerances,
    pub lyapunov: LyapunovOptions,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self { initial_step: 0.1, step_tol: 1e-3, max_halvings: 6, integration: Tolerances::new(1e-11, 1e-13), lyapunov: LyapunovOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundFamily {
    /// `χ⁻₁ + … + χ⁻_k ≤ Σ ⟨log r⁻_i⟩`.
    Minus,
    /// `χ⁺₁ + … + χ⁺_k ≥ Σ ⟨log r⁺_i⟩`.
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentSource {
    /// QR iteration along the trajectory.
    Trajectory,
    /// QR iteration over repeated turns of a closed orbit's cocycle.
    PeriodicCocycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInequality {
    pub family: BoundFamily,
    pub k: usize,
    /// Sum of exponents.
    pub exponent_sum: f64,
    /// Sum of averaged `log r` rates.
    pub singular_sum: f64,
    /// Nonnegative when the inequality holds.
    pub slack: f64,
    /// Both sides passed their convergence diagnostics.
    pub asserted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentBoundsReport {
    /// `χ₁ ≥ … ≥ χ_n`.
    pub exponents: Vec<f64>,
    pub source: ExponentSource,
    /// `χ⁻₁ ≥ … ≥ χ⁻_q` (the `q` smallest exponents).
    pub chi_minus: Vec<f64>,
    /// `χ⁺₁ ≤ … ≤ χ⁺_p` (the `p` largest exponents).
    pub chi_plus: Vec<f64>,
    /// Time averages of `log r⁻_i` per unit time, `i = 1..q`.
    pub log_r_minus: Vec<f64>,
    /// Time averages of `log r⁺_i` per unit time, `i = 1..p`.
    pub log_r_plus: Vec<f64>,
    pub step: f64,
    pub halvings: usize,
    /// Largest change of the averages at the last halving.
    pub step_change: f64,
    pub step_converged: bool,
    pub lyapunov_converged: bool,
    pub lyapunov_drift: f64,
    pub inequalities: Vec<BoundInequality>,
}

/// `(Σ log r⁻ / T, Σ log r⁺ / T)` over a uniform grid of `steps` intervals.
fn averaged_log_r(field: &dyn FormField, model: &VectorFieldModel, x0: &DVector<f64>, t: f64, steps: usize, tol: &Tolerances) -> Result<(Vec<f64>, Vec<f64>)> {
    let times: Vec<f64> = (0..=steps).map(|k| t * k as f64 / steps as f64).collect();
    let c = interval_cocycles(model, x0, &times, tol)?;
    let forms = c.points.iter().map(|x| field.form_at(x)).collect::<Result<Vec<_>>>()?;
    let q = field.index();
    let mut minus = vec![0.0; q];
    let mut plus = vec![0.0; field.dim() - q];
    for (k, step) in c.steps.iter().enumerate() {
        let (std, l) = crate::cone_field::adapted_transition(&forms[k], &forms[k + 1], step)?;
        let polar = match polar_decompose(&std, &l) {
            Ok(p) => p,
            Err(Error::NotSeparated(_)) | Err(Error::Singular) => return Err(Error::NotSeparatedOnStep { step: k, t: c.times[k] }),
            Err(e) => return Err(e),
        };
        for (acc, r) in minus.iter_mut().zip(&polar.r_minus) {
            *acc += r.ln();
        }
        for (acc, r) in plus.iter_mut().zip(&polar.r_plus) {
            *acc += r.ln();
        }
    }
    minus.iter_mut().chain(plus.iter_mut()).for_each(|v| *v /= t);
    Ok((minus, plus))
}

fn max_change(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> f64 {
    a.0.iter().chain(&a.1).zip(b.0.iter().chain(&b.1)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_arguments(field: &dyn FormField, model: &VectorFieldModel, x0: &DVector<f64>, t: f64, k1: usize, k2: usize) -> Result<()> {
    let n = model.dim();
    if field.dim() != n || x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len() });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("orbit length must be positive, got {t}")));
    }
    let q = field.index();
    let p = n - q;
    if k1 > q || k2 > p {
        return Err(Error::BadDimension(format!("need k1 ≤ {q} and k2 ≤ {p}, got {k1} and {k2}")));
    }
    Ok(())
}

struct StepAverages {
    log_r_minus: Vec<f64>,
    log_r_plus: Vec<f64>,
    step: f64,
    halvings: usize,
    change: f64,
}

/// Halves the step until the averages settle.
fn converged_averages(field: &dyn FormField, model: &VectorFieldModel, x0: &DVector<f64>, t: f64, opts: &BoundsOptions) -> Result<StepAverages> {
    let mut steps = ((t / opts.initial_step).ceil() as usize).max(1);
    let mut current = averaged_log_r(field, model, x0, t, steps, &opts.integration)?;
    let mut change = f64::INFINITY;
    let mut halvings = 0;
    while halvings < opts.max_halvings {
        steps *= 2;
        halvings += 1;
        let finer = averaged_log_r(field, model, x0, t, steps, &opts.integration)?;
        change = max_change(&current, &finer);
        current = finer;
        if change < opts.step_tol {
            break;
        }
    }
    if change >= opts.step_tol {
        return Err(Error::NotConverged { drift: change, tolerance: opts.step_tol });
    }
    Ok(StepAverages { log_r_minus: current.0, log_r_plus: current.1, step: t / steps as f64, halvings, change })
}

fn assemble(
    avg: StepAverages,
    exponents: Vec<f64>,
    source: ExponentSource,
    lyapunov_converged: bool,
    lyapunov_drift: f64,
    k1: usize,
    k2: usize,
) -> ExponentBoundsReport {
    let p = avg.log_r_plus.len();
    let chi_minus: Vec<f64> = exponents[p..].to_vec();
    let chi_plus: Vec<f64> = exponents[..p].iter().rev().copied().collect();
    let asserted = lyapunov_converged;
    let mut inequalities = Vec::with_capacity(k1 + k2);
    for k in 1..=k1 {
        let exponent_sum: f64 = chi_minus[..k].iter().sum();
        let singular_sum: f64 = avg.log_r_minus[..k].iter().sum();
        inequalities.push(BoundInequality { family: BoundFamily::Minus, k, exponent_sum, singular_sum, slack: singular_sum - exponent_sum, asserted });
    }
    for k in 1..=k2 {
        let exponent_sum: f64 = chi_plus[..k].iter().sum();
        let singular_sum: f64 = avg.log_r_plus[..k].iter().sum();
        inequalities.push(BoundInequality { family: BoundFamily::Plus, k, exponent_sum, singular_sum, slack: exponent_sum - singular_sum, asserted });
    }
    ExponentBoundsReport {
        exponents,
        source,
        chi_minus,
        chi_plus,
        log_r_minus: avg.log_r_minus,
        log_r_plus: avg.log_r_plus,
        step: avg.step,
        halvings: avg.halvings,
        step_change: avg.change,
        // a report only exists once the step loop settled
        step_converged: true,
        lyapunov_converged,
        lyapunov_drift,
        inequalities,
    }
}

/// Checks the first `k1` inequalities of the negative family and the first
/// `k2` of the positive one along the orbit of `x0` over `[0, t]`.
pub fn wojtkowski_bounds_check(
    field: &dyn FormField,
    model: &VectorFieldModel,
    x0: &DVector<f64>,
    t: f64,
    k1: usize,
    k2: usize,
    opts: &BoundsOptions,
) -> Result<ExponentBoundsReport> {
    check_arguments(field, model, x0, t, k1, k2)?;
    let avg = converged_averages(field, model, x0, t, opts)?;
    let lyap = lyapunov_exponents(model, x0, t, model.dim(), &opts.lyapunov)?;
    Ok(assemble(avg, lyap.exponents.clone(), ExponentSource::Trajectory, lyap.converged, lyap.drift, k1, k2))
}

/// Lyapunov exponents of a closed orbit from QR iteration over repeated turns
/// of its one-period step matrices. Returns `(exponents, drift)`, the drift
/// being the change between the last two blocks of turns.
fn periodic_exponents(steps: &[DMatrix<f64>], period: f64) -> (Vec<f64>, f64) {
    const BLOCK: usize = 10;
    const MAX_BLOCKS: usize = 30;
    let n = steps[0].nrows();
    let mut q = DMatrix::<f64>::identity(n, n);
    let mut previous: Option<Vec<f64>> = None;
    let mut drift = f64::INFINITY;
    for _ in 0..MAX_BLOCKS {
        let mut acc = vec![0.0; n];
        for _ in 0..BLOCK {
            for s in steps {
                let qr = (s * &q).qr();
                let r = qr.r();
                q = qr.q();
                for (i, a) in acc.iter_mut().enumerate() {
                    *a += r[(i, i)].abs().ln();
                }
            }
        }
        let block: Vec<f64> = acc.iter().map(|a| a / (BLOCK as f64 * period)).collect();
        if let Some(prev) = &previous {
            drift = prev.iter().zip(&block).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if drift <= PERIODIC_DRIFT_TOL {
                previous = Some(block);
                break;
            }
        }
        previous = Some(block);
    }
    let mut exponents = previous.expect("at least one block");
    exponents.sort_by(|a, b| b.total_cmp(a));
    (exponents, drift)
}

const PERIODIC_DRIFT_TOL: f64 = 1e-11;

/// The same inequalities over any number of turns of a closed orbit.
///
/// Both sides are period averages: `log r` over one turn of the cocycle, and
/// exponents from QR iteration over repeated turns of the same step
/// matrices, so nothing integrates an unstable orbit for long.
pub fn wojtkowski_bounds_on_orbit(
    field: &dyn FormField,
    model: &VectorFieldModel,
    orbit: &PeriodicOrbit,
    k1: usize,
    k2: usize,
    opts: &BoundsOptions,
) -> Result<ExponentBoundsReport> {
    orbit.require_trustworthy()?;
    check_arguments(field, model, &orbit.anchor, orbit.period, k1, k2)?;
    let avg = converged_averages(field, model, &orbit.anchor, orbit.period, opts)?;
    let intervals = ((orbit.period / opts.initial_step).ceil() as usize).max(1);
    let times: Vec<f64> = (0..=intervals).map(|k| orbit.period * k as f64 / intervals as f64).collect();
    let cocycle = interval_cocycles(model, &orbit.anchor, &times, &opts.integration)?;
    let (exponents, drift) = periodic_exponents(&cocycle.steps, orbit.period);
    Ok(assemble(avg, exponents, ExponentSource::PeriodicCocycle, drift <= PERIODIC_DRIFT_TOL, drift, k1, k2))
}

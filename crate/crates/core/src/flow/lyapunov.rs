//! Lyapunov exponents by QR reorthonormalization of a tangent frame.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cocycle::{augmented_initial, tangent_rhs};
use super::integrator::{Dopri5, IntegratorStats, Tolerances};
use super::model::VectorFieldModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovOptions {
    pub seed: u64,
    /// Fraction of the horizon discarded before averaging.
    pub transient_fraction: f64,
    /// Bound on the running-average drift over the last quarter.
    pub drift_tol: f64,
    /// Largest column growth tolerated between factorizations.
    pub max_growth: f64,
    pub initial_interval: f64,
    pub integration: Tolerances,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            transient_fraction: 0.1,
            drift_tol: 1e-2,
            max_growth: 1e3,
            initial_interval: 0.1,
            integration: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// `χ₁ ≥ … ≥ χ_k`.
    pub exponents: Vec<f64>,
    /// Largest change of any running average over the last quarter window.
    pub drift: f64,
    pub converged: bool,
    pub drift_tol: f64,
    pub horizon: f64,
    pub averaging_window: f64,
    pub factorizations: usize,
    pub seed: u64,
    pub stats: IntegratorStats,
    /// `(t, running averages)` recorded at each factorization after the transient.
    #[serde(skip)]
    pub history: Vec<(f64, Vec<f64>)>,
}

impl LyapunovEstimate {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { drift: self.drift, tolerance: self.drift_tol })
        }
    }

    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

/// Seeded orthonormal `n × k` frame.
pub fn random_frame(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let m: DMatrix<f64> = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
        let qr = m.qr();
        if qr.r().diagonal().iter().all(|d: &f64| d.abs() > 1e-3) {
            return qr.q();
        }
    }
}

/// `k` leading exponents along the orbit of `x0` over `[0, T]`. A negative
/// `T` runs the reversed field.
pub fn lyapunov_exponents(model: &VectorFieldModel, x0: &DVector<f64>, horizon: f64, k: usize, opts: &LyapunovOptions) -> Result<LyapunovEstimate> {
    let n = model.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len() });
    }
    if k == 0 || k > n {
        return Err(Error::BadDimension(format!("k = {k} must lie in 1..={n}")));
    }
    if !(horizon.is_finite() && horizon != 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be finite and nonzero, got {horizon}")));
    }
    if !(0.0..1.0).contains(&opts.transient_fraction) {
        return Err(Error::InvalidArgument("transient fraction must lie in [0, 1)".into()));
    }
    let run = if horizon < 0.0 { model.reversed() } else { model.clone() };
    let span = horizon.abs();
    let transient = opts.transient_fraction * span;
    let frame = random_frame(n, k, opts.seed);
    let y0 = augmented_initial(x0, &frame, false);
    let mut solver = Dopri5::new(tangent_rhs(&run, k, false), &y0, opts.integration)?;

    let mut dt = opts.initial_interval.min(span);
    let mut sums = vec![0.0; k];
    let mut history = Vec::new();
    let mut factorizations = 0;
    let mut y = y0;
    while solver.t < span {
        // land exactly on the end of the transient and of the horizon
        let mut target = (solver.t + dt).min(span);
        if solver.t < transient && target > transient {
            target = transient;
        }
        solver.advance_to(target, |_| {})?;
        y.copy_from_slice(&solver.y);
        let m = DMatrix::from_column_slice(n, k, &y[n..n + n * k]);
        let qr = m.qr();
        let r = qr.r();
        let q = qr.q();
        let mut growth: f64 = 1.0;
        let averaging = solver.t > transient;
        for i in 0..k {
            let d = r[(i, i)].abs();
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::StepFailure { t: solver.t, reason: "tangent frame collapsed".into() });
            }
            growth = growth.max(d).max(1.0 / d);
            if averaging {
                sums[i] += d.ln();
            }
        }
        // keep the QR sign convention continuous (positive diagonal)
        let mut qfix = q;
        for i in 0..k {
            if r[(i, i)] < 0.0 {
                qfix.column_mut(i).neg_mut();
            }
        }
        y[n..n + n * k].copy_from_slice(qfix.as_slice());
        solver.reset_state(&y);
        factorizations += 1;
        if averaging {
            let elapsed = solver.t - transient;
            history.push((solver.t, sums.iter().map(|s| s / elapsed).collect::<Vec<f64>>()));
        }
        if growth > opts.max_growth {
            dt *= 0.5;
        } else if growth < opts.max_growth.sqrt() {
            dt *= 1.25;
        }
    }

    let window = span - transient;
    let mut exponents: Vec<f64> = sums.iter().map(|s| s / window).collect();
    // QR order already gives descending exponents asymptotically; sort to be safe
    exponents.sort_by(|a, b| b.total_cmp(a));
    let quarter_start = transient + 0.75 * window;
    let drift = history
        .iter()
        .find(|(t, _)| *t >= quarter_start)
        .map(|(_, avg)| {
            let last = &history.last().expect("history is non-empty").1;
            avg.iter().zip(last).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .unwrap_or(f64::INFINITY);
    Ok(LyapunovEstimate {
        exponents,
        drift,
        converged: drift <= opts.drift_tol,
        drift_tol: opts.drift_tol,
        horizon,
        averaging_window: window,
        factorizations,
        seed: opts.seed,
        stats: solver.stats,
        history,
    })
}

//! Dormand–Prince 5(4) with step-size control and dense output.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::model::VectorFieldModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_steps: 5_000_000 }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol >= 0.0 && self.rtol.is_finite() && self.atol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerances must be positive (rtol {}, atol {})", self.rtol, self.atol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub rtol: f64,
    pub atol: f64,
    /// Largest accepted scaled local error (≤ 1 by construction).
    pub max_error_ratio: f64,
}

impl IntegratorStats {
    pub fn absorb(&mut self, other: &IntegratorStats) {
        self.steps += other.steps;
        self.rejected += other.rejected;
        self.evaluations += other.evaluations;
        self.max_error_ratio = self.max_error_ratio.max(other.max_error_ratio);
        self.rtol = other.rtol;
        self.atol = other.atol;
    }
}

// autonomous systems only, so the nodes c_i are not needed
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its continuous extension.
pub struct StepView<'a> {
    pub t0: f64,
    pub h: f64,
    dim: usize,
    /// Five blocks of `dim` coefficients.
    coeffs: &'a [f64],
}

impl StepView<'_> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Interpolated state at `t0 + θh`, `θ ∈ [0, 1]`, into `out[..len]`.
    pub fn interpolate(&self, theta: f64, out: &mut [f64], len: usize) {
        dense_eval(self.coeffs, self.dim, theta, out, len);
    }

    pub fn start(&self) -> &[f64] {
        &self.coeffs[..self.dim]
    }
}

fn dense_eval(coeffs: &[f64], dim: usize, theta: f64, out: &mut [f64], len: usize) {
    let th1 = 1.0 - theta;
    for i in 0..len {
        let r = |k: usize| coeffs[k * dim + i];
        out[i] = r(0) + theta * (r(1) + th1 * (r(2) + theta * (r(3) + th1 * r(4))));
    }
}

/// Adaptive solver for an autonomous system `ẏ = f(y)`.
pub struct Dopri5<F> {
    f: F,
    dim: usize,
    tol: Tolerances,
    pub t: f64,
    pub y: Vec<f64>,
    h: f64,
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    coeffs: Vec<f64>,
    fsal_valid: bool,
    /// Components `[0, err_len)` enter the error norm.
    err_len: usize,
    pub stats: IntegratorStats,
}

impl<F: FnMut(&[f64], &mut [f64])> Dopri5<F> {
    pub fn new(f: F, y0: &[f64], tol: Tolerances) -> Result<Self> {
        tol.validate()?;
        let dim = y0.len();
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepFailure { t: 0.0, reason: "non-finite initial state".into() });
        }
        let zeros = || vec![0.0; dim];
        Ok(Self {
            f,
            dim,
            tol,
            t: 0.0,
            y: y0.to_vec(),
            h: 0.0,
            k: [zeros(), zeros(), zeros(), zeros(), zeros(), zeros(), zeros()],
            ytmp: zeros(),
            ynew: zeros(),
            coeffs: vec![0.0; 5 * dim],
            fsal_valid: false,
            err_len: dim,
            stats: IntegratorStats { rtol: tol.rtol, atol: tol.atol, ..Default::default() },
        })
    }

    /// Restrict error control to the leading `len` components.
    pub fn with_error_components(mut self, len: usize) -> Self {
        self.err_len = len.min(self.dim);
        self
    }

    /// Replace the current state (e.g. after renormalizing a tangent frame).
    pub fn reset_state(&mut self, y: &[f64]) {
        self.y.copy_from_slice(y);
        self.fsal_valid = false;
    }

    fn eval_k1(&mut self) {
        if !self.fsal_valid {
            (self.f)(&self.y, &mut self.k[0]);
            self.stats.evaluations += 1;
            self.fsal_valid = true;
        }
    }

    fn error_scale(&self, a: f64, b: f64) -> f64 {
        self.tol.atol + self.tol.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self, span: f64) -> f64 {
        // Hairer–Wanner starting step heuristic
        self.eval_k1();
        let n = self.err_len.max(1) as f64;
        let (mut d0, mut d1) = (0.0, 0.0);
        for i in 0..self.err_len {
            let sk = self.error_scale(self.y[i], self.y[i]);
            d0 += (self.y[i] / sk).powi(2);
            d1 += (self.k[0][i] / sk).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span);
        for i in 0..self.dim {
            self.ytmp[i] = self.y[i] + h0 * self.k[0][i];
        }
        (self.f)(&self.ytmp, &mut self.k[1]);
        self.stats.evaluations += 1;
        let mut d2 = 0.0;
        for i in 0..self.err_len {
            let sk = self.error_scale(self.y[i], self.y[i]);
            d2 += ((self.k[1][i] - self.k[0][i]) / sk).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(span)
    }

    /// Integrate forward to `t_end`, calling `observer` after each accepted step.
    pub fn advance_to(&mut self, t_end: f64, mut observer: impl FnMut(&StepView)) -> Result<()> {
        if t_end < self.t {
            return Err(Error::InvalidArgument(format!("cannot integrate backwards from {} to {t_end}", self.t)));
        }
        if t_end == self.t {
            return Ok(());
        }
        if self.h <= 0.0 {
            self.h = self.initial_step(t_end - self.t);
        }
        let dim = self.dim;
        let mut last_reject = false;
        while self.t < t_end {
            if self.stats.steps + self.stats.rejected >= self.tol.max_steps {
                return Err(Error::StepFailure { t: self.t, reason: format!("exceeded {} steps", self.tol.max_steps) });
            }
            let remaining = t_end - self.t;
            let mut h = self.h.min(remaining);
            // avoid a sliver of a final step
            if remaining - h < 1e-3 * h {
                h = remaining;
            }
            // a short requested span is fine; only a collapsing step is not
            if h < remaining && h < 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::StepFailure { t: self.t, reason: format!("step size underflow (h = {h:.3e})") });
            }
            self.eval_k1();
            let y = &self.y;
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let f = &mut self.f;
            let ytmp = &mut self.ytmp;
            for i in 0..dim {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            f(ytmp, k2);
            for i in 0..dim {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            f(ytmp, k3);
            for i in 0..dim {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(ytmp, k4);
            for i in 0..dim {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(ytmp, k5);
            for i in 0..dim {
                ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(ytmp, k6);
            let ynew = &mut self.ynew;
            for i in 0..dim {
                ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            f(ynew, k7);
            self.stats.evaluations += 6;

            let mut err = 0.0;
            let mut finite = true;
            for i in 0..self.err_len {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sk = self.tol.atol + self.tol.rtol * y[i].abs().max(ynew[i].abs());
                err += (e / sk).powi(2);
                finite &= ynew[i].is_finite();
            }
            if !finite || !err.is_finite() {
                // treat as a rejection with a sharp cut
                self.stats.rejected += 1;
                self.h = h * 0.1;
                last_reject = true;
                continue;
            }
            let err = (err / self.err_len.max(1) as f64).sqrt();
            if err <= 1.0 {
                let c = &mut self.coeffs;
                for i in 0..dim {
                    let ydiff = ynew[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    c[i] = y[i];
                    c[dim + i] = ydiff;
                    c[2 * dim + i] = bspl;
                    c[3 * dim + i] = ydiff - h * k7[i] - bspl;
                    c[4 * dim + i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                std::mem::swap(k1, k7);
                std::mem::swap(&mut self.y, &mut self.ynew);
                let t0 = self.t;
                self.t = if h == remaining { t_end } else { t0 + h };
                self.stats.steps += 1;
                self.stats.max_error_ratio = self.stats.max_error_ratio.max(err);
                observer(&StepView { t0, h: self.t - t0, dim, coeffs: &self.coeffs });
                let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
                fac = fac.clamp(0.2, 10.0);
                if last_reject {
                    fac = fac.min(1.0);
                }
                last_reject = false;
                // a step clipped by t_end says nothing about the natural step
                let proposed = h * fac;
                self.h = if h < self.h { self.h.max(proposed) } else { proposed };
            } else {
                self.stats.rejected += 1;
                self.h = h * (0.9 * err.powf(-0.2)).max(0.1);
                last_reject = true;
            }
        }
        Ok(())
    }
}

/// Integrated orbit with per-step dense output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Step endpoints, starting at 0 (or at 0 going down for negative spans).
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub stats: IntegratorStats,
    dim: usize,
    /// Per-step dense coefficients (5·dim each), in forward integration time.
    dense: Vec<Vec<f64>>,
    direction: f64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one sample")
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least one sample")
    }

    /// Dense-output state at time `t` (between 0 and the final time).
    pub fn state_at(&self, t: f64) -> Option<DVector<f64>> {
        let s = t * self.direction;
        let end = self.final_time() * self.direction;
        if !(s >= -1e-12 * end.abs().max(1.0) && s <= end + 1e-12 * end.abs().max(1.0)) {
            return None;
        }
        if self.dense.is_empty() {
            return Some(self.states[0].clone());
        }
        let fwd: Vec<f64> = self.times.iter().map(|t| t * self.direction).collect();
        let idx = match fwd.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => return Some(self.states[i].clone()),
            Err(i) => i.clamp(1, fwd.len() - 1) - 1,
        };
        let h = fwd[idx + 1] - fwd[idx];
        let theta = ((s - fwd[idx]) / h).clamp(0.0, 1.0);
        let mut out = DVector::zeros(self.dim);
        dense_eval(&self.dense[idx], self.dim, theta, out.as_mut_slice(), self.dim);
        Some(out)
    }

    pub fn max_norm(&self) -> f64 {
        self.states.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }
}

/// Integrate `model` from `x0` for time `t_final` (negative runs the reversed
/// field).
pub fn integrate(model: &VectorFieldModel, x0: &DVector<f64>, t_final: f64, tol: &Tolerances) -> Result<Trajectory> {
    let n = model.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len() });
    }
    if !t_final.is_finite() {
        return Err(Error::InvalidArgument("integration time must be finite".into()));
    }
    let direction = if t_final < 0.0 { -1.0 } else { 1.0 };
    let run = if t_final < 0.0 { model.reversed() } else { model.clone() };
    let mut solver = Dopri5::new(|y: &[f64], dy: &mut [f64]| run.eval_into(y, dy), x0.as_slice(), *tol)?;
    let mut times = vec![0.0];
    let mut states = vec![x0.clone()];
    let mut dense = Vec::new();
    solver.advance_to(t_final.abs(), |step| {
        dense.push(step.coeffs.to_vec());
        times.push(step.t1() * direction);
        let mut y = DVector::zeros(n);
        step.interpolate(1.0, y.as_mut_slice(), n);
        states.push(y);
    })?;
    // exact final state rather than the interpolant
    if let Some(last) = states.last_mut() {
        last.as_mut_slice().copy_from_slice(&solver.y);
    }
    Ok(Trajectory { times, states, stats: solver.stats, dim: n, dense, direction })
}

/// Endpoint of the flow, `X_t(x0)`.
pub fn flow_to(model: &VectorFieldModel, x0: &DVector<f64>, t: f64, tol: &Tolerances) -> Result<DVector<f64>> {
    let n = model.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len() });
    }
    let run = if t < 0.0 { model.reversed() } else { model.clone() };
    let mut solver = Dopri5::new(|y: &[f64], dy: &mut [f64]| run.eval_into(y, dy), x0.as_slice(), *tol)?;
    solver.advance_to(t.abs(), |_| {})?;
    Ok(DVector::from_vec(solver.y))
}

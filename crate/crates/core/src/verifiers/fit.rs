//! Least-squares rate fits on log-quantities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
    /// Root-mean-square residual of the fitted points.
    pub residual_rms: f64,
    /// Start of the fitted window.
    pub window_start: f64,
    pub points: usize,
}

impl RateFit {
    /// `|slope|` exceeds three standard errors.
    pub fn significant(&self) -> bool {
        self.slope.abs() > 3.0 * self.slope_stderr
    }
}

/// Fits `y ≈ a + b t` on the samples with `t` in the second half of the window.
pub fn fit_second_half(series: &[(f64, f64)]) -> Result<RateFit> {
    let (Some(first), Some(last)) = (series.first(), series.last()) else {
        return Err(Error::InvalidArgument("empty series".into()));
    };
    let mid = 0.5 * (first.0 + last.0);
    let window: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= mid).collect();
    let n = window.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 points in the fitted window, got {n}")));
    }
    if window.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    let nf = n as f64;
    let tm = window.iter().map(|p| p.0).sum::<f64>() / nf;
    let ym = window.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = window.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = window.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument("fitted window has no time spread".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let ssr: f64 = window.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(RateFit {
        slope,
        intercept,
        slope_stderr: (ssr / (nf - 2.0) / sxx).sqrt(),
        residual_rms: (ssr / nf).sqrt(),
        window_start: window[0].0,
        points: n,
    })
}

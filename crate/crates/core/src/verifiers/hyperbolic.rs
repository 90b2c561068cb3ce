//! Hyperbolicity of a periodic orbit from its Floquet multipliers.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::PeriodicOrbit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HyperbolicityVerdict {
    Hyperbolic,
    Fails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicOrbitReport {
    pub verdict: HyperbolicityVerdict,
    pub period: f64,
    pub index: usize,
    /// `min |log |μ|| / T` over nontrivial multipliers.
    pub lambda: f64,
    /// Condition number of the Floquet eigenvector matrix of the monodromy.
    pub k: f64,
    /// Moduli of the nontrivial multipliers.
    pub multiplier_moduli: Vec<f64>,
}

/// Relative distance from the unit circle below which a multiplier counts as central.
pub const CENTRAL_TOL: f64 = 1e-6;

pub fn verify_hyperbolic_orbit(orbit: &PeriodicOrbit) -> Result<HyperbolicOrbitReport> {
    orbit.require_trustworthy()?;
    let moduli: Vec<f64> = orbit.multipliers.iter().map(|m| m.modulus()).collect();
    let lambda = moduli.iter().map(|m| m.ln().abs()).fold(f64::INFINITY, f64::min) / orbit.period;
    let central = moduli.iter().any(|m| (m - 1.0).abs() <= CENTRAL_TOL);
    let verdict = if central || !orbit.hyperbolic { HyperbolicityVerdict::Fails } else { HyperbolicityVerdict::Hyperbolic };
    Ok(HyperbolicOrbitReport {
        verdict,
        period: orbit.period,
        index: orbit.index,
        lambda: if lambda.is_finite() { lambda } else { 0.0 },
        k: eigenvector_condition(&orbit.monodromy),
        multiplier_moduli: moduli,
    })
}

/// `cond(V)` for the (complex) eigenvector matrix `V` of `m`, via the
/// real `2n × 2n` embedding of the complex eigenvectors.
fn eigenvector_condition(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let eig = m.clone().complex_eigenvalues();
    let cm = m.map(|v| Complex::new(v, 0.0));
    let mut cols = Vec::with_capacity(n);
    for lambda in eig.iter() {
        let shifted = &cm - DMatrix::<Complex<f64>>::identity(n, n) * *lambda;
        let svd = shifted.svd(false, true);
        let Some(vt) = svd.v_t else { return f64::INFINITY };
        let (k, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
        let v: Vec<Complex<f64>> = vt.row(k).iter().map(|c| c.conj()).collect();
        cols.push(v);
    }
    let v = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
    let s = v.svd(false, false).singular_values;
    let (hi, lo) = (s.max(), s.min());
    if lo > 0.0 { hi / lo } else { f64::INFINITY }
}

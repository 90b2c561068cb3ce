//! Partial hyperbolicity from a non-negative strictly separating form field.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cone_field::{check_separation_along_orbit, FormField, GridOptions, OrbitSamples};
use crate::error::Result;
use crate::flow::VectorFieldModel;
use crate::jsep_analysis::SeparationLevel;

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSegment {
    pub start: DVector<f64>,
    pub length: f64,
}

impl OrbitSegment {
    pub fn new(start: DVector<f64>, length: f64) -> Self {
        Self { start, length }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartialHyperbolicityVerdict {
    Pass,
    /// Strictly separated, but `J(X) < 0` somewhere on the samples.
    NonNegativityFails,
    /// Some segment is not strictly separated.
    Fails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentCheck {
    pub separation: SeparationLevel,
    pub grid_converged: bool,
    /// `min J_x(X(x)) / (‖J_x‖ ‖X(x)‖²)` over the samples.
    pub min_flow_value: f64,
    /// Sample time of the minimum.
    pub min_flow_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialHyperbolicityReport {
    pub verdict: PartialHyperbolicityVerdict,
    /// `dim E^s` certified by the form (its index).
    pub stable_dim: usize,
    pub segments: Vec<SegmentCheck>,
    /// `(segment, time, point)` where `J(X)` is most negative, when it fails.
    pub witness: Option<(usize, f64, Vec<f64>)>,
}

/// Samples per segment for the non-negativity check.
pub const FLOW_SAMPLES: usize = 65;
const NONNEG_TOL: f64 = 1e-10;

pub fn verify_partial_hyperbolicity(
    field: &dyn FormField,
    model: &VectorFieldModel,
    segments: &[OrbitSegment],
    grid: &GridOptions,
) -> Result<PartialHyperbolicityReport> {
    let mut checks = Vec::with_capacity(segments.len());
    let mut witness: Option<(usize, f64, Vec<f64>, f64)> = None;
    for (i, seg) in segments.iter().enumerate() {
        let sep = check_separation_along_orbit(field, model, &seg.start, seg.length, grid)?;
        let samples = OrbitSamples::along(model, &seg.start, seg.length, FLOW_SAMPLES, true, &grid.integration)?;
        let mut min = (f64::INFINITY, 0.0);
        for (&t, x) in samples.times.iter().zip(&samples.points) {
            let j = field.form_at(x)?;
            let v = model.eval(x);
            let scale = j.norm() * v.norm_squared();
            if scale == 0.0 {
                continue;
            }
            let value = j.eval(&v) / scale;
            if value < min.0 {
                min = (value, t);
            }
            if value < -NONNEG_TOL && witness.as_ref().map_or(true, |w| value < w.3) {
                witness = Some((i, t, x.iter().copied().collect(), value));
            }
        }
        checks.push(SegmentCheck { separation: sep.level, grid_converged: sep.grid_converged, min_flow_value: min.0, min_flow_time: min.1 });
    }
    let verdict = if checks.iter().any(|c| c.separation != SeparationLevel::StrictlySeparated) {
        PartialHyperbolicityVerdict::Fails
    } else if witness.is_some() {
        PartialHyperbolicityVerdict::NonNegativityFails
    } else {
        PartialHyperbolicityVerdict::Pass
    };
    Ok(PartialHyperbolicityReport { verdict, stable_dim: field.index(), segments: checks, witness: witness.map(|(i, t, x, _)| (i, t, x)) })
}

//! Strict J-separation of the tangent cocycle along an orbit segment.

use nalgebra::{DMatrix, DVector};

use super::field::{FormField, ScaledField};
use crate::error::{Error, Result};
use crate::flow::{interval_cocycles, IntervalCocycles, Tolerances, VectorFieldModel};
use crate::jsep_analysis::{check_separation, SeparationLevel, SeparationVerdict};
use crate::pseudo_metric::{lagrange_diagonalize, QuadraticForm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub per_unit_time: f64,
    /// Refine by doubling until the verdict repeats this many times.
    pub stable_repeats: usize,
    pub max_doublings: usize,
    /// Check the single grid given by `per_unit_time` only.
    pub fixed: bool,
    pub integration: Tolerances,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { per_unit_time: 8.0, stable_repeats: 2, max_doublings: 4, fixed: false, integration: Tolerances::default() }
    }
}

impl GridOptions {
    pub fn fixed_step(step: f64) -> Self {
        Self { per_unit_time: 1.0 / step, fixed: true, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct IntervalVerdict {
    pub start: f64,
    pub end: f64,
    pub verdict: SeparationVerdict,
}

#[derive(Debug, Clone)]
pub struct OrbitSeparationReport {
    /// Weakest verdict over all checked intervals of the finest grid.
    pub level: SeparationLevel,
    /// Consecutive grid intervals `[t_k, t_{k+1}]`.
    pub intervals: Vec<IntervalVerdict>,
    /// Anchored intervals `[0, t_k]`.
    pub anchored: Vec<IntervalVerdict>,
    /// First failing interval (consecutive grid) if any.
    pub witness_interval: Option<usize>,
    /// `(number of intervals, level)` per refinement.
    pub refinements: Vec<(usize, SeparationLevel)>,
    pub grid_converged: bool,
    /// For strictly separated segments: the reversed cocycle is strictly
    /// `(−J)`-separated on every interval.
    pub reversal_consistent: Option<bool>,
}

/// `B_t⁻¹ M B_s` in the adapted frames of `J` at both ends, with the standard
/// form of the common signature.
pub(crate) fn adapted_transition(form_s: &QuadraticForm, form_t: &QuadraticForm, m: &DMatrix<f64>) -> Result<(QuadraticForm, DMatrix<f64>)> {
    if form_s.index_q() != form_t.index_q() {
        return Err(Error::InvalidArgument("form index changes along the orbit".into()));
    }
    let bs = lagrange_diagonalize(form_s).basis;
    let bt = lagrange_diagonalize(form_t).basis;
    let bt_inv = bt.try_inverse().ok_or(Error::Singular)?;
    Ok((QuadraticForm::standard(form_s.index_q(), form_s.dim()), bt_inv * m * bs))
}

fn grid_times(t: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|k| t * k as f64 / intervals as f64).collect()
}

fn check_grid(field: &dyn FormField, samples: &IntervalCocycles) -> Result<(Vec<IntervalVerdict>, Vec<IntervalVerdict>)> {
    let forms = samples.points.iter().map(|x| field.form_at(x)).collect::<Result<Vec<_>>>()?;
    let mut consecutive = Vec::with_capacity(samples.steps.len());
    let mut anchored = Vec::with_capacity(samples.steps.len());
    let n = forms[0].dim();
    let mut cumulative = DMatrix::identity(n, n);
    for (k, step) in samples.steps.iter().enumerate() {
        let (std, l) = adapted_transition(&forms[k], &forms[k + 1], step)?;
        consecutive.push(IntervalVerdict { start: samples.times[k], end: samples.times[k + 1], verdict: check_separation(&std, &l)? });
        cumulative = step * cumulative;
        if k > 0 {
            let (std, l) = adapted_transition(&forms[0], &forms[k + 1], &cumulative)?;
            anchored.push(IntervalVerdict { start: samples.times[0], end: samples.times[k + 1], verdict: check_separation(&std, &l)? });
        }
    }
    Ok((consecutive, anchored))
}

fn weakest(intervals: &[IntervalVerdict]) -> SeparationLevel {
    intervals.iter().map(|i| i.verdict.level).min().unwrap_or(SeparationLevel::StrictlySeparated)
}

pub fn check_separation_along_orbit(
    field: &dyn FormField,
    model: &VectorFieldModel,
    x0: &DVector<f64>,
    t: f64,
    grid: &GridOptions,
) -> Result<OrbitSeparationReport> {
    if field.dim() != model.dim() || x0.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: x0.len() });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("segment length must be finite and non-negative, got {t}")));
    }
    if t == 0.0 {
        // the identity maps each cone onto itself, but not strictly
        field.form_at(x0)?;
        return Ok(OrbitSeparationReport {
            level: SeparationLevel::Separated,
            intervals: Vec::new(),
            anchored: Vec::new(),
            witness_interval: None,
            refinements: Vec::new(),
            grid_converged: true,
            reversal_consistent: None,
        });
    }
    let mut intervals = ((grid.per_unit_time * t).ceil() as usize).max(1);
    let mut refinements = Vec::new();
    let mut result;
    loop {
        let times = grid_times(t, intervals);
        let samples = interval_cocycles(model, x0, &times, &grid.integration)?;
        let (consecutive, anchored) = check_grid(field, &samples)?;
        let level = weakest(&consecutive).min(weakest(&anchored));
        refinements.push((intervals, level));
        result = (consecutive, anchored, samples);
        if grid.fixed {
            break;
        }
        let n = refinements.len();
        let stable = n > grid.stable_repeats && refinements[n - 1 - grid.stable_repeats..].iter().all(|(_, l)| *l == level);
        if stable || n > grid.max_doublings {
            break;
        }
        intervals *= 2;
    }
    let (consecutive, anchored, samples) = result;
    let level = refinements.last().expect("at least one grid").1;
    let n = refinements.len();
    let grid_converged = grid.fixed || (n > grid.stable_repeats && refinements[n - 1 - grid.stable_repeats..].iter().all(|(_, l)| *l == level));
    let witness_interval = consecutive.iter().position(|i| i.verdict.level == SeparationLevel::NotSeparated);
    let reversal_consistent = if level == SeparationLevel::StrictlySeparated { Some(reversal_check(field, &samples)?) } else { None };
    Ok(OrbitSeparationReport { level, intervals: consecutive, anchored, witness_interval, refinements, grid_converged, reversal_consistent })
}

/// The inverse transitions must be strictly `(−J)`-separated.
fn reversal_check(field: &dyn FormField, samples: &IntervalCocycles) -> Result<bool> {
    let negated = ScaledField { inner: field, factor: -1.0 };
    for (k, step) in samples.steps.iter().enumerate() {
        let back = step.clone().try_inverse().ok_or(Error::Singular)?;
        let (std, l) = adapted_transition(&negated.form_at(&samples.points[k + 1])?, &negated.form_at(&samples.points[k])?, &back)?;
        if check_separation(&std, &l)?.level != SeparationLevel::StrictlySeparated {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone_field::field::ConstantField;
    use crate::linalg;
    use nalgebra::dvector;

    fn constant(d: &[f64]) -> ConstantField {
        ConstantField::new(QuadraticForm::diagonal(d).unwrap())
    }

    #[test]
    fn diagonal_flow_is_strictly_separated() {
        let model = VectorFieldModel::linear(linalg::diag(&[-2.0, -1.0, 1.0])).unwrap();
        let rep = check_separation_along_orbit(&constant(&[-1.0, -1.0, 1.0]), &model, &dvector![1.0, 1.0, 1.0], 2.0, &GridOptions::fixed_step(0.25)).unwrap();
        assert_eq!(rep.level, SeparationLevel::StrictlySeparated);
        assert_eq!(rep.intervals.len(), 8);
        assert!(rep.intervals.iter().all(|i| i.verdict.level == SeparationLevel::StrictlySeparated));
        assert_eq!(rep.reversal_consistent, Some(true));
    }

    #[test]
    fn rotation_swaps_cones() {
        let model = VectorFieldModel::linear(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])).unwrap();
        let rep = check_separation_along_orbit(&constant(&[-1.0, 1.0]), &model, &dvector![1.0, 0.0], std::f64::consts::PI, &GridOptions::default()).unwrap();
        assert_eq!(rep.level, SeparationLevel::NotSeparated);
        assert!(rep.witness_interval.is_some());
        assert!(rep.grid_converged);
    }

    #[test]
    fn zero_length_segment() {
        let model = VectorFieldModel::lorenz_classic();
        let rep = check_separation_along_orbit(&constant(&[-1.0, -1.0, 1.0]), &model, &dvector![1.0, 1.0, 1.0], 0.0, &GridOptions::default()).unwrap();
        assert_eq!(rep.level, SeparationLevel::Separated);
    }
}

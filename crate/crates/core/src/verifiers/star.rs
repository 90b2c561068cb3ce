//! Form-side certificates over the located critical elements.

use std::thread;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cone_field::{
    adapted_form_search, check_separation_along_orbit, period_map_monotonicity, singularity_form_positivity, ConstantField, FloquetField,
    FormField, GridOptions, SingularityPositivity,
};
use crate::error::{Error, Result};
use crate::flow::{analyze_equilibrium, EquilibriumOptions, PeriodicOrbit, Tolerances, VectorFieldModel};
use crate::jsep_analysis::{Monotonicity, SeparationLevel};

#[derive(Debug, Clone)]
pub enum CriticalElement {
    Equilibrium(DVector<f64>),
    Orbit(PeriodicOrbit),
}

/// Where the form for an element comes from.
#[derive(Clone, Copy)]
pub enum FormChoice<'a> {
    Field(&'a (dyn FormField + Sync)),
    /// `adapted_form_search` at equilibria, the Floquet-adapted field on orbits.
    Adapted,
    Missing,
}

#[derive(Clone)]
pub struct StarElement<'a> {
    pub id: String,
    pub element: CriticalElement,
    pub form: FormChoice<'a>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementVerdict {
    Pass,
    Fail,
    Unverifiable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegenerateCase {
    /// All nontrivial directions contract: the LPF condition reduces to a
    /// strictly contracting period map.
    Sink,
    /// All nontrivial directions expand.
    Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementCertificate {
    pub id: String,
    /// `"equilibrium"` or `"orbit"`.
    pub kind: String,
    pub index: Option<usize>,
    pub form_index: Option<usize>,
    pub separation: Option<SeparationLevel>,
    /// Positivity of `J A + Aᵀ J` (equilibria).
    pub positivity: Option<SingularityPositivity>,
    /// Period-map LPF verdict (orbits).
    pub monotonicity: Option<Monotonicity>,
    pub degenerate: Option<DegenerateCase>,
    pub verdict: ElementVerdict,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarCertificate {
    pub elements: Vec<ElementCertificate>,
    pub verdict: ElementVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarOptions {
    pub grid: GridOptions,
    /// Integration tolerances for the period map.
    pub period_map: Tolerances,
    /// Segment length for the separation check at equilibria.
    pub equilibrium_window: f64,
    pub jobs: usize,
}

impl Default for StarOptions {
    fn default() -> Self {
        Self { grid: GridOptions::default(), period_map: Tolerances::new(1e-12, 1e-14), equilibrium_window: 1.0, jobs: 1 }
    }
}

fn unverifiable(id: &str, kind: &str, index: Option<usize>, why: String) -> ElementCertificate {
    ElementCertificate {
        id: id.to_string(),
        kind: kind.to_string(),
        index,
        form_index: None,
        separation: None,
        positivity: None,
        monotonicity: None,
        degenerate: None,
        verdict: ElementVerdict::Unverifiable,
        note: Some(why),
    }
}

fn degenerate(index: usize, dim: usize) -> Option<DegenerateCase> {
    match index {
        0 => Some(DegenerateCase::Source),
        i if i == dim => Some(DegenerateCase::Sink),
        _ => None,
    }
}

fn check_equilibrium(model: &VectorFieldModel, id: &str, point: &DVector<f64>, form: FormChoice, opts: &StarOptions) -> Result<ElementCertificate> {
    let eq = analyze_equilibrium(model, point, &EquilibriumOptions::default());
    let kind = "equilibrium";
    let adapted;
    let field: &dyn FormField = match form {
        FormChoice::Field(f) => f,
        FormChoice::Missing => return Ok(unverifiable(id, kind, Some(eq.index), "no form attached".into())),
        FormChoice::Adapted => match adapted_form_search(&model.jacobian(point), eq.index) {
            Ok(a) => {
                adapted = ConstantField::new(a.form);
                &adapted
            }
            Err(Error::NotHyperbolic(gap)) => {
                let mut c = unverifiable(id, kind, Some(eq.index), format!("not hyperbolic: min |Re eig| = {gap:.3e}"));
                c.verdict = ElementVerdict::Fail;
                return Ok(c);
            }
            Err(e) => return Ok(unverifiable(id, kind, Some(eq.index), format!("adapted form search failed: {e}"))),
        },
    };
    let positivity = singularity_form_positivity(field, model, point)?;
    let sep = check_separation_along_orbit(field, model, point, opts.equilibrium_window, &opts.grid)?;
    let pass = positivity.passed() && sep.level == SeparationLevel::StrictlySeparated;
    Ok(ElementCertificate {
        id: id.to_string(),
        kind: kind.to_string(),
        index: Some(eq.index),
        form_index: Some(field.index()),
        separation: Some(sep.level),
        positivity: Some(positivity),
        monotonicity: None,
        degenerate: degenerate(eq.index, model.dim()),
        verdict: if pass { ElementVerdict::Pass } else { ElementVerdict::Fail },
        note: (!eq.hyperbolic).then(|| "equilibrium is not hyperbolic".to_string()),
    })
}

fn check_orbit(model: &VectorFieldModel, id: &str, orbit: &PeriodicOrbit, form: FormChoice, opts: &StarOptions) -> Result<ElementCertificate> {
    let kind = "orbit";
    if let Some(why) = &orbit.suspect {
        return Ok(unverifiable(id, kind, Some(orbit.index), format!("suspect orbit: {why}")));
    }
    let adapted;
    let field: &dyn FormField = match form {
        FormChoice::Field(f) => f,
        FormChoice::Missing => return Ok(unverifiable(id, kind, Some(orbit.index), "no form attached".into())),
        FormChoice::Adapted => match FloquetField::new(model, orbit) {
            Ok(f) => {
                adapted = f;
                &adapted
            }
            Err(Error::NotHyperbolic(d)) => {
                let mut c = unverifiable(id, kind, Some(orbit.index), format!("not hyperbolic: multiplier distance {d:.3e}"));
                c.verdict = ElementVerdict::Fail;
                return Ok(c);
            }
            Err(e) => return Ok(unverifiable(id, kind, Some(orbit.index), format!("Floquet field failed: {e}"))),
        },
    };
    let sep = check_separation_along_orbit(field, model, &orbit.anchor, orbit.period, &opts.grid)?;
    let (monotonicity, note) = match period_map_monotonicity(field, model, orbit, &opts.period_map) {
        Ok(rep) => (rep.monotonicity, None),
        Err(Error::NotSeparated(why)) => (Monotonicity::NotMonotone, Some(format!("period map: {why}"))),
        Err(e) => return Err(e),
    };
    let pass = sep.level == SeparationLevel::StrictlySeparated && monotonicity == Monotonicity::StrictlyMonotone;
    Ok(ElementCertificate {
        id: id.to_string(),
        kind: kind.to_string(),
        index: Some(orbit.index),
        form_index: Some(field.index()),
        separation: Some(sep.level),
        positivity: None,
        monotonicity: Some(monotonicity),
        // the flow direction is not counted among the nontrivial ones
        degenerate: degenerate(orbit.index, model.dim() - 1),
        verdict: if pass { ElementVerdict::Pass } else { ElementVerdict::Fail },
        note,
    })
}

fn check_element(model: &VectorFieldModel, el: &StarElement, opts: &StarOptions) -> Result<ElementCertificate> {
    match &el.element {
        CriticalElement::Equilibrium(p) => check_equilibrium(model, &el.id, p, el.form, opts),
        CriticalElement::Orbit(o) => check_orbit(model, &el.id, o, el.form, opts),
    }
}

/// Checks every element; results keep the input order.
pub fn star_certificate(model: &VectorFieldModel, elements: &[StarElement], opts: &StarOptions) -> Result<StarCertificate> {
    let jobs = opts.jobs.max(1).min(elements.len().max(1));
    let mut results: Vec<Option<Result<ElementCertificate>>> = vec![None; elements.len()];
    if jobs == 1 {
        for (slot, el) in results.iter_mut().zip(elements) {
            *slot = Some(check_element(model, el, opts));
        }
    } else {
        let chunk = elements.len().div_ceil(jobs);
        thread::scope(|s| {
            for (slots, els) in results.chunks_mut(chunk).zip(elements.chunks(chunk)) {
                s.spawn(move || {
                    for (slot, el) in slots.iter_mut().zip(els) {
                        *slot = Some(check_element(model, el, opts));
                    }
                });
            }
        });
    }
    let elements = results.into_iter().map(|r| r.expect("every element checked")).collect::<Result<Vec<_>>>()?;
    let verdict = if elements.iter().any(|e| e.verdict == ElementVerdict::Fail) {
        ElementVerdict::Fail
    } else if elements.iter().any(|e| e.verdict == ElementVerdict::Unverifiable) {
        ElementVerdict::Unverifiable
    } else {
        ElementVerdict::Pass
    };
    Ok(StarCertificate { elements, verdict })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedElement {
    pub id: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityComparison {
    pub id: String,
    pub index: usize,
    /// `Ind(σ) − Ind`.
    pub difference: i64,
    /// `Ind(σ) ≥ Ind`.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub declared_index: usize,
    pub orbits: Vec<IndexedElement>,
    pub homogeneous: bool,
    pub singularities: Vec<SingularityComparison>,
    /// Every singularity has index at least the declared one.
    pub singularities_consistent: bool,
    pub notes: Vec<String>,
}

pub fn homogeneity_report(orbits: &[IndexedElement], singularities: &[IndexedElement], declared_index: usize) -> HomogeneityReport {
    let homogeneous = orbits.iter().all(|o| o.index == declared_index);
    let comparisons: Vec<SingularityComparison> = singularities
        .iter()
        .map(|s| SingularityComparison {
            id: s.id.clone(),
            index: s.index,
            difference: s.index as i64 - declared_index as i64,
            consistent: s.index >= declared_index,
        })
        .collect();
    let mut notes = Vec::new();
    if orbits.is_empty() {
        notes.push("no periodic orbits located: homogeneity holds vacuously".to_string());
    }
    for o in orbits.iter().filter(|o| o.index != declared_index) {
        notes.push(format!("orbit {} has index {} instead of {declared_index}", o.id, o.index));
    }
    for c in comparisons.iter().filter(|c| !c.consistent) {
        notes.push(format!("singularity {} has index {} < {declared_index}", c.id, c.index));
    }
    HomogeneityReport {
        declared_index,
        orbits: orbits.to_vec(),
        homogeneous,
        singularities_consistent: comparisons.iter().all(|c| c.consistent),
        singularities: comparisons,
        notes,
    }
}

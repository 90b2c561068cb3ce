//! One runner per analysis kind.

use std::collections::BTreeMap;

use jcone::cone_field::{
    adapted_form_search, check_separation_along_orbit, period_map_monotonicity, ConstantField, CylindricalField, FloquetField, FormField,
    GridOptions,
};
use jcone::flow::{
    find_equilibria, find_periodic_orbit, flow_to, lyapunov_exponents, EquilibriumOptions, LyapunovOptions, PeriodicOrbit, PeriodicOrbitOptions,
    Tolerances, VectorFieldModel,
};
use jcone::jsep_analysis::{check_separation_with, monotonicity_of, polar_decompose, SeparationOptions, DEFAULT_MONOTONE_TOL};
use jcone::pseudo_metric::QuadraticForm;
use jcone::verifiers::{
    homogeneity_report, star_certificate, verify_dominated_splitting, verify_hyperbolic_orbit, verify_volume_expansion,
    wojtkowski_bounds_check, wojtkowski_bounds_on_orbit, BoundsOptions, CriticalElement, FormChoice, IndexedElement, StarElement, StarOptions, TransportOptions,
};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use crate::record::{AnalysisRecord, Series};
use crate::scenario::{columns, matrix, vector, AnalysisSpec, FormSpec, OrbitSpec};

/// Wojtkowski slacks below this count as violations.
pub const SLACK_TOL: f64 = 1e-8;

pub struct Context<'a> {
    pub model: VectorFieldModel,
    pub form: Option<&'a FormSpec>,
    /// Scenario tolerances, if any; analyses fall back to their own defaults.
    pub tol: Option<Tolerances>,
    pub seed: Option<u64>,
}

#[derive(Default)]
struct Outcome {
    verdict: Option<String>,
    payload: Value,
    units: Vec<(&'static str, &'static str)>,
    series: Option<Series>,
    /// Recorded per-element failures; the analysis still reports.
    element_errors: Vec<String>,
}

type Run<T> = Result<T, String>;

fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("payload types serialize")
}

fn verdict_name<T: std::fmt::Debug>(v: &T) -> String {
    format!("{v:?}")
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    jcone::linalg::to_rows(m)
}

pub fn run(ctx: &Context, spec: &AnalysisSpec) -> AnalysisRecord {
    let result = match spec {
        AnalysisSpec::OperatorCheck { form, operator, .. } => operator_check(ctx, form, operator),
        AnalysisSpec::Equilibria { seeds, .. } => equilibria(ctx, seeds),
        AnalysisSpec::OrbitCheck { orbit, .. } => orbit_check(ctx, orbit),
        AnalysisSpec::StarCheck { equilibrium_seeds, orbits, declared_index, .. } => star_check(ctx, equilibrium_seeds, orbits, *declared_index),
        AnalysisSpec::Lyapunov { x0, horizon, k, .. } => lyapunov(ctx, x0, *horizon, *k),
        AnalysisSpec::BoundsCheck { x0, length, k1, k2, orbit, .. } => bounds_check(ctx, x0.as_deref(), *length, *k1, *k2, orbit.as_ref()),
        AnalysisSpec::Domination { x0, length, e, f, .. } => domination(ctx, x0, *length, e, f),
        AnalysisSpec::VolumeExpansion { x0, length, f, p, burn_in, .. } => volume(ctx, x0, *length, f, *p, *burn_in),
    };
    let mut record = AnalysisRecord {
        id: spec.id().to_string(),
        kind: spec.kind().to_string(),
        verdict: None,
        error: None,
        units: BTreeMap::new(),
        payload: Value::Null,
        series: None,
    };
    match result {
        Ok(out) => {
            record.verdict = out.verdict;
            record.payload = out.payload;
            record.units = out.units.into_iter().map(|(k, u)| (k.to_string(), u.to_string())).collect();
            record.series = out.series;
            if !out.element_errors.is_empty() {
                record.error = Some(format!("{} element(s) failed: {}", out.element_errors.len(), out.element_errors.join("; ")));
            }
        }
        Err(e) => record.error = Some(e),
    }
    record
}

fn seed(ctx: &Context) -> Run<u64> {
    ctx.seed.ok_or_else(|| "seed required".to_string())
}

fn operator_check(ctx: &Context, form: &[Vec<f64>], operator: &[Vec<f64>]) -> Run<Outcome> {
    let j = QuadraticForm::new(matrix(form, "form").map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let l = matrix(operator, "operator").map_err(|e| e.to_string())?;
    let opts = SeparationOptions { seed: seed(ctx)?, ..SeparationOptions::default() };
    let sep = check_separation_with(&j, &l, &opts).map_err(|e| e.to_string())?;
    let (polar, monotonicity) = match polar_decompose(&j, &l) {
        Ok(p) => {
            let m = monotonicity_of(&p, DEFAULT_MONOTONE_TOL);
            (json!({ "r_minus": p.r_minus, "r_plus": p.r_plus, "r": rows(&p.r), "u": rows(&p.u) }), Some(m))
        }
        Err(e) => (json!({ "error": e.to_string() }), None),
    };
    Ok(Outcome {
        verdict: Some(verdict_name(&sep.level)),
        payload: json!({
            "index": j.index_q(),
            "separation": {
                "level": sep.level,
                "certificate": sep.certificate,
                "certificate_margin": sep.certificate_margin,
                "sampled_minimum": sep.sampled_minimum,
                "band": sep.band,
                "witness": sep.witness.map(|w| w.iter().copied().collect::<Vec<_>>()),
            },
            "polar": polar,
            "monotonicity": monotonicity,
        }),
        units: vec![("polar.r_minus", "1"), ("polar.r_plus", "1"), ("separation.certificate", "1")],
        ..Outcome::default()
    })
}

fn equilibria(ctx: &Context, seeds: &[Vec<f64>]) -> Run<Outcome> {
    let n = ctx.model.dim();
    let seeds = seeds.iter().map(|s| vector(s, n, "seeds")).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let found = find_equilibria(&ctx.model, &seeds, &EquilibriumOptions::default()).map_err(|e| e.to_string())?;
    let list: Vec<Value> = found
        .equilibria
        .iter()
        .map(|e| {
            json!({
                "point": e.point.iter().copied().collect::<Vec<_>>(),
                "eigenvalues": e.eigenvalues,
                "index": e.index,
                "hyperbolic": e.hyperbolic,
                "residual": e.residual,
            })
        })
        .collect();
    Ok(Outcome {
        verdict: Some(format!("{} located", list.len())),
        payload: json!({ "equilibria": list }),
        units: vec![("eigenvalues", "1/time"), ("residual", "space/time")],
        ..Outcome::default()
    })
}

fn locate(model: &VectorFieldModel, spec: &OrbitSpec) -> Run<PeriodicOrbit> {
    let section = spec.section.build(model.dim()).map_err(|e| e.to_string())?;
    let guess = vector(&spec.guess, model.dim(), "orbit.guess").map_err(|e| e.to_string())?;
    find_periodic_orbit(model, &section, &guess, spec.period, &PeriodicOrbitOptions::default()).map_err(|e| e.to_string())
}

fn orbit_payload(orbit: &PeriodicOrbit) -> Value {
    json!({
        "anchor": orbit.anchor.iter().copied().collect::<Vec<_>>(),
        "period": orbit.period,
        "multipliers": orbit.multipliers,
        "index": orbit.index,
        "residual": orbit.residual,
        "suspect": orbit.suspect,
    })
}

/// A form field usable anywhere, or `None` for adapted requests.
fn fixed_field(spec: &FormSpec, dim: usize) -> Run<Option<Box<dyn FormField + Sync>>> {
    let err = |e: jcone::Error| e.to_string();
    let field: Box<dyn FormField + Sync> = match spec {
        FormSpec::Constant { matrix: m } => {
            let m = matrix(m, "form.matrix").map_err(|e| e.to_string())?;
            Box::new(ConstantField::new(QuadraticForm::new(m).map_err(err)?))
        }
        FormSpec::Diagonal { entries } => Box::new(ConstantField::new(QuadraticForm::diagonal(entries).map_err(err)?)),
        FormSpec::Cylindrical { s_r, s_phi, s_z } => Box::new(CylindricalField::new(*s_r, *s_phi, *s_z).map_err(err)?),
        FormSpec::Adapted => return Ok(None),
    };
    if field.dim() != dim {
        return Err(format!("form has dimension {}, model has {dim}", field.dim()));
    }
    Ok(Some(field))
}

fn orbit_field(ctx: &Context, orbit: &PeriodicOrbit) -> Run<Option<Box<dyn FormField + Sync>>> {
    match ctx.form {
        None => Ok(None),
        Some(FormSpec::Adapted) => Ok(Some(Box::new(FloquetField::new(&ctx.model, orbit).map_err(|e| e.to_string())?))),
        Some(spec) => fixed_field(spec, ctx.model.dim()),
    }
}

fn grid(ctx: &Context) -> GridOptions {
    match ctx.tol {
        Some(t) => GridOptions { integration: t, ..GridOptions::default() },
        None => GridOptions::default(),
    }
}

fn orbit_check(ctx: &Context, spec: &OrbitSpec) -> Run<Outcome> {
    let orbit = locate(&ctx.model, spec)?;
    let hyp = verify_hyperbolic_orbit(&orbit).map_err(|e| e.to_string())?;
    let mut payload = json!({ "orbit": orbit_payload(&orbit), "hyperbolicity": hyp });
    if let Some(field) = orbit_field(ctx, &orbit)? {
        let sep = check_separation_along_orbit(field.as_ref(), &ctx.model, &orbit.anchor, orbit.period, &grid(ctx)).map_err(|e| e.to_string())?;
        let map = period_map_monotonicity(field.as_ref(), &ctx.model, &orbit, &Tolerances::new(1e-12, 1e-14)).map_err(|e| e.to_string())?;
        payload["form"] = json!({
            "label": field.label(),
            "separation": sep.level,
            "grid_converged": sep.grid_converged,
            "reversal_consistent": sep.reversal_consistent,
            "period_map": { "r_minus": map.polar.r_minus, "r_plus": map.polar.r_plus, "monotonicity": map.monotonicity },
        });
    }
    Ok(Outcome {
        verdict: Some(verdict_name(&hyp.verdict)),
        payload,
        units: vec![("orbit.period", "time"), ("hyperbolicity.lambda", "1/time"), ("hyperbolicity.k", "1")],
        ..Outcome::default()
    })
}

fn star_check(ctx: &Context, seeds: &[Vec<f64>], orbits: &[OrbitSpec], declared: Option<usize>) -> Run<Outcome> {
    let n = ctx.model.dim();
    let mut element_errors = Vec::new();
    let seeds = seeds.iter().map(|s| vector(s, n, "equilibrium_seeds")).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let found = if seeds.is_empty() {
        Vec::new()
    } else {
        find_equilibria(&ctx.model, &seeds, &EquilibriumOptions::default()).map_err(|e| e.to_string())?.equilibria
    };
    let mut located = Vec::new();
    for (i, spec) in orbits.iter().enumerate() {
        let id = spec.id.clone().unwrap_or_else(|| format!("orbit{i}"));
        match locate(&ctx.model, spec) {
            Ok(o) => located.push((id, o)),
            Err(e) => element_errors.push(format!("{id}: {e}")),
        }
    }
    let fixed = match ctx.form {
        Some(spec) => fixed_field(spec, n)?,
        None => None,
    };
    let choice = || match (ctx.form, &fixed) {
        (None, _) => FormChoice::Missing,
        (Some(_), Some(f)) => FormChoice::Field(f.as_ref()),
        (Some(_), None) => FormChoice::Adapted,
    };
    let mut elements: Vec<StarElement> = found
        .iter()
        .enumerate()
        .map(|(i, e)| StarElement { id: format!("eq{i}"), element: CriticalElement::Equilibrium(e.point.clone()), form: choice() })
        .collect();
    elements.extend(located.iter().map(|(id, o)| StarElement { id: id.clone(), element: CriticalElement::Orbit(o.clone()), form: choice() }));
    let opts = StarOptions { grid: grid(ctx), ..StarOptions::default() };
    let cert = star_certificate(&ctx.model, &elements, &opts).map_err(|e| e.to_string())?;

    let orbit_indices: Vec<IndexedElement> = located.iter().map(|(id, o)| IndexedElement { id: id.clone(), index: o.index }).collect();
    let sing_indices: Vec<IndexedElement> = found.iter().enumerate().map(|(i, e)| IndexedElement { id: format!("eq{i}"), index: e.index }).collect();
    let declared = declared.or_else(|| orbit_indices.first().map(|o| o.index));
    let homogeneity = declared.map(|d| homogeneity_report(&orbit_indices, &sing_indices, d));
    let points: Vec<Value> = found.iter().map(|e| json!(e.point.iter().copied().collect::<Vec<_>>())).collect();
    Ok(Outcome {
        verdict: Some(verdict_name(&cert.verdict)),
        payload: json!({
            "certificate": cert,
            "equilibria": points,
            "orbits": located.iter().map(|(_, o)| orbit_payload(o)).collect::<Vec<_>>(),
            "homogeneity": homogeneity,
        }),
        units: vec![("orbits.period", "time")],
        element_errors,
        ..Outcome::default()
    })
}

fn lyapunov(ctx: &Context, x0: &[f64], horizon: f64, k: Option<usize>) -> Run<Outcome> {
    let x0 = vector(x0, ctx.model.dim(), "x0").map_err(|e| e.to_string())?;
    let mut opts = LyapunovOptions { seed: seed(ctx)?, ..LyapunovOptions::default() };
    if let Some(t) = ctx.tol {
        opts.integration = t;
    }
    let k = k.unwrap_or(ctx.model.dim());
    let est = lyapunov_exponents(&ctx.model, &x0, horizon, k, &opts).map_err(|e| e.to_string())?;
    let names: Vec<String> = (1..=k).map(|i| format!("chi_{i}")).collect();
    let mut cols = vec![("t", "time")];
    cols.extend(names.iter().map(|c| (c.as_str(), "1/time")));
    let series_rows: Vec<Vec<f64>> = est.history.iter().map(|(t, avg)| std::iter::once(*t).chain(avg.iter().copied()).collect()).collect();
    Ok(Outcome {
        verdict: Some(if est.converged { "Converged" } else { "NotConverged" }.to_string()),
        payload: json!({
            "exponents": est.exponents,
            "sum": est.sum(),
            "drift": est.drift,
            "converged": est.converged,
            "horizon": est.horizon,
            "averaging_window": est.averaging_window,
            "factorizations": est.factorizations,
            "seed": est.seed,
        }),
        units: vec![("exponents", "1/time"), ("sum", "1/time"), ("drift", "1/time"), ("horizon", "time"), ("averaging_window", "time")],
        series: Some(Series::new(cols, series_rows)?),
        ..Outcome::default()
    })
}

fn bounds_check(ctx: &Context, x0: Option<&[f64]>, length: Option<f64>, k1: usize, k2: usize, orbit: Option<&OrbitSpec>) -> Run<Outcome> {
    let n = ctx.model.dim();
    let spec = ctx.form.ok_or_else(|| "bounds-check needs a form".to_string())?;
    let mut opts = BoundsOptions::default();
    opts.lyapunov.seed = seed(ctx)?;
    if let Some(tol) = ctx.tol {
        opts.integration = tol;
        opts.lyapunov.integration = tol;
    }
    let (rep, t) = match orbit {
        Some(o) => {
            let orbit = locate(&ctx.model, o)?;
            let field = orbit_field(ctx, &orbit)?.expect("form present");
            let rep = wojtkowski_bounds_on_orbit(field.as_ref(), &ctx.model, &orbit, k1, k2, &opts).map_err(|e| e.to_string())?;
            (rep, orbit.period)
        }
        None => {
            let x0 = vector(x0.ok_or_else(|| "bounds-check needs x0 or orbit".to_string())?, n, "x0").map_err(|e| e.to_string())?;
            let t = length.ok_or_else(|| "bounds-check from x0 needs a length".to_string())?;
            let field: Box<dyn FormField + Sync> = match fixed_field(spec, n)? {
                Some(f) => f,
                None => {
                    let jcone::flow::ModelKind::Linear(_) = ctx.model.kind() else {
                        return Err("an adapted form off periodic orbits is only available for linear models".into());
                    };
                    let a = ctx.model.jacobian(&x0);
                    let q = jcone::flow::spectrum(&a).iter().filter(|e| e.re < 0.0).count();
                    Box::new(ConstantField::new(adapted_form_search(&a, q).map_err(|e| e.to_string())?.form))
                }
            };
            (wojtkowski_bounds_check(field.as_ref(), &ctx.model, &x0, t, k1, k2, &opts).map_err(|e| e.to_string())?, t)
        }
    };
    let asserted: Vec<_> = rep.inequalities.iter().filter(|i| i.asserted).collect();
    let verdict = if asserted.iter().any(|i| i.slack < -SLACK_TOL) {
        "Violated"
    } else if asserted.len() == rep.inequalities.len() {
        "Holds"
    } else {
        "Unasserted"
    };
    Ok(Outcome {
        verdict: Some(verdict.to_string()),
        payload: json!({ "report": rep, "length": t }),
        units: vec![
            ("report.exponents", "1/time"),
            ("report.log_r_minus", "1/time"),
            ("report.log_r_plus", "1/time"),
            ("report.step", "time"),
            ("report.inequalities.slack", "1/time"),
            ("length", "time"),
        ],
        ..Outcome::default()
    })
}

fn transport(ctx: &Context) -> TransportOptions {
    match ctx.tol {
        Some(t) => TransportOptions { integration: t, ..TransportOptions::default() },
        None => TransportOptions::default(),
    }
}

fn domination(ctx: &Context, x0: &[f64], length: f64, e: &[Vec<f64>], f: &[Vec<f64>]) -> Run<Outcome> {
    let n = ctx.model.dim();
    let x0 = vector(x0, n, "x0").map_err(|e| e.to_string())?;
    let e0 = columns(e, n, "e").map_err(|e| e.to_string())?;
    let f0 = columns(f, n, "f").map_err(|e| e.to_string())?;
    let mut rep = verify_dominated_splitting(&ctx.model, &x0, length, &e0, &f0, &transport(ctx)).map_err(|e| e.to_string())?;
    let series = Series::new(vec![("t", "time"), ("log_ratio", "1")], rep.series.iter().map(|(t, r)| vec![*t, *r]).collect())?;
    rep.series.clear();
    Ok(Outcome {
        verdict: Some(verdict_name(&rep.verdict)),
        payload: value(&rep),
        units: vec![("lambda", "1/time"), ("k", "1"), ("fit.slope", "1/time"), ("min_angle", "rad")],
        series: Some(series),
        ..Outcome::default()
    })
}

fn volume(ctx: &Context, x0: &[f64], length: f64, f: &[Vec<f64>], p: usize, burn_in: f64) -> Run<Outcome> {
    let n = ctx.model.dim();
    let mut x0 = vector(x0, n, "x0").map_err(|e| e.to_string())?;
    if burn_in > 0.0 {
        x0 = flow_to(&ctx.model, &x0, burn_in, &ctx.tol.unwrap_or_default()).map_err(|e| e.to_string())?;
    }
    let f0 = columns(f, n, "f").map_err(|e| e.to_string())?;
    let mut rep = verify_volume_expansion(&ctx.model, &x0, length, &f0, p, &transport(ctx)).map_err(|e| e.to_string())?;
    let series = Series::new(vec![("t", "time"), ("log_volume", "1")], rep.series.iter().map(|(t, r)| vec![*t, *r]).collect())?;
    rep.series.clear();
    Ok(Outcome {
        verdict: Some(verdict_name(&rep.verdict)),
        payload: json!({ "report": rep, "start": x0.iter().copied().collect::<Vec<_>>() }),
        units: vec![("report.lambda", "1/time"), ("report.c", "1"), ("report.fit.slope", "1/time")],
        series: Some(series),
        ..Outcome::default()
    })
}

//! Browser demo: three interactive operations exported through wasm-bindgen.
//!
//! Each operation is a plain function returning JSON so it can be tested
//! natively; the exported wrappers turn failures into `{"error": ...}`.

use jcone::flow::{
    find_equilibria, find_periodic_orbit, integrate, lorenz_equilibria, lyapunov_exponents, EquilibriumOptions, LyapunovOptions,
    PeriodicOrbitOptions, Section, Tolerances, VectorFieldModel,
};
use jcone::jsep_analysis::{check_separation_with, monotonicity_of, polar_decompose, SeparationOptions, DEFAULT_MONOTONE_TOL};
use jcone::pseudo_metric::QuadraticForm;
use jcone::verifiers::{star_certificate, CriticalElement, FormChoice, StarElement, StarOptions};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

/// Fan of directions drawn for planar operators.
const RAYS: usize = 72;
/// Longest trajectory segment sent to the canvas.
const PLOT_SPAN: f64 = 40.0;
const PLOT_POINTS: usize = 4000;
const SERIES_POINTS: usize = 400;

fn parse_matrix(text: &str, what: &str) -> Result<DMatrix<f64>, String> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text).map_err(|e| format!("{what}: {e}"))?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(format!("{what}: expected a non-empty square matrix"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(format!("{what}: entries must be finite"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn coords(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn thin<T: Clone>(items: &[T], max: usize) -> Vec<T> {
    if items.len() <= max {
        return items.to_vec();
    }
    let stride = items.len().div_ceil(max);
    let mut out: Vec<T> = items.iter().step_by(stride).cloned().collect();
    if (items.len() - 1) % stride != 0 {
        out.push(items[items.len() - 1].clone());
    }
    out
}

/// Separation level, polar factors and monotonicity of `operator` relative to `form`.
/// Planar inputs also get a fan of unit directions with their normalized images.
pub fn operator_report(form: &str, operator: &str, seed: u64) -> Result<Value, String> {
    let j = QuadraticForm::new(parse_matrix(form, "form")?).map_err(|e| e.to_string())?;
    let l = parse_matrix(operator, "operator")?;
    if l.nrows() != j.dim() {
        return Err(format!("operator has dimension {}, form has {}", l.nrows(), j.dim()));
    }
    let sep = check_separation_with(&j, &l, &SeparationOptions { seed, ..SeparationOptions::default() }).map_err(|e| e.to_string())?;
    let polar = match polar_decompose(&j, &l) {
        Ok(p) => json!({
            "r_minus": p.r_minus,
            "r_plus": p.r_plus,
            "r": rows(&p.r),
            "u": rows(&p.u),
            "monotonicity": monotonicity_of(&p, DEFAULT_MONOTONE_TOL),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let rays = if j.dim() == 2 {
        (0..RAYS)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / RAYS as f64;
                let v = DVector::from_vec(vec![a.cos(), a.sin()]);
                let w = &l * &v;
                let norm = w.norm();
                let image = if norm > 0.0 { coords(&(w.clone() / norm)) } else { vec![0.0, 0.0] };
                json!({ "v": coords(&v), "jv": j.eval(&v), "image": image, "jimage": j.eval(&w) })
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(json!({
        "dim": j.dim(),
        "index": j.index_q(),
        "level": sep.level,
        "certificate": sep.certificate,
        "certificate_margin": sep.certificate_margin,
        "sampled_minimum": sep.sampled_minimum,
        "polar": polar,
        "rays": rays,
    }))
}

/// A Lorenz trajectory for plotting and its Lyapunov spectrum with running averages.
pub fn lorenz_report(sigma: f64, rho: f64, beta: f64, horizon: f64, seed: u64) -> Result<Value, String> {
    if ![sigma, rho, beta, horizon].iter().all(|v| v.is_finite()) || sigma <= 0.0 || beta <= 0.0 || horizon <= 0.0 {
        return Err("sigma, beta and horizon must be positive".into());
    }
    let model = VectorFieldModel::lorenz(sigma, rho, beta);
    let x0 = DVector::from_vec(vec![1.0, 1.0, 20.0]);
    let span = horizon.min(PLOT_SPAN);
    let traj = integrate(&model, &x0, span, &Tolerances::new(1e-9, 1e-11)).map_err(|e| e.to_string())?;
    let points: Vec<Vec<f64>> =
        (0..=PLOT_POINTS).filter_map(|i| traj.state_at(span * i as f64 / PLOT_POINTS as f64)).map(|x| coords(&x)).collect();
    let est = lyapunov_exponents(&model, &x0, horizon, 3, &LyapunovOptions { seed, ..LyapunovOptions::default() }).map_err(|e| e.to_string())?;
    let history: Vec<Vec<f64>> = est.history.iter().map(|(t, avg)| std::iter::once(*t).chain(avg.iter().copied()).collect()).collect();
    Ok(json!({
        "exponents": est.exponents,
        "sum": est.sum(),
        "divergence": -(sigma + 1.0 + beta),
        "converged": est.converged,
        "drift": est.drift,
        "trajectory": points,
        "history": thin(&history, SERIES_POINTS),
    }))
}

/// Star certificate for the Lorenz equilibria and, when it can be located,
/// the shortest periodic orbit continued from the classical one.
pub fn lorenz_star(sigma: f64, rho: f64, beta: f64) -> Result<Value, String> {
    if ![sigma, rho, beta].iter().all(|v| v.is_finite()) || sigma <= 0.0 || beta <= 0.0 {
        return Err("sigma and beta must be positive".into());
    }
    let model = VectorFieldModel::lorenz(sigma, rho, beta);
    let seeds = lorenz_equilibria(rho, beta);
    let found = find_equilibria(&model, &seeds, &EquilibriumOptions::default()).map_err(|e| e.to_string())?.equilibria;
    let mut notes = Vec::new();
    let section = Section::coordinate(3, 2, rho - 1.0).map_err(|e| e.to_string())?;
    let guess = DVector::from_vec(vec![-13.7636, -19.5787, rho - 1.0]);
    let orbit = match find_periodic_orbit(&model, &section, &guess, 1.5587, &PeriodicOrbitOptions::default()) {
        Ok(o) => Some(o),
        Err(e) => {
            notes.push(format!("AB: {e}"));
            None
        }
    };
    let mut elements: Vec<StarElement> = found
        .iter()
        .enumerate()
        .map(|(i, e)| StarElement { id: format!("eq{i}"), element: CriticalElement::Equilibrium(e.point.clone()), form: FormChoice::Adapted })
        .collect();
    if let Some(o) = &orbit {
        elements.push(StarElement { id: "AB".into(), element: CriticalElement::Orbit(o.clone()), form: FormChoice::Adapted });
    }
    let cert = star_certificate(&model, &elements, &StarOptions::default()).map_err(|e| e.to_string())?;
    Ok(json!({
        "certificate": cert,
        "equilibria": found.iter().map(|e| coords(&e.point)).collect::<Vec<_>>(),
        "orbit": orbit.map(|o| json!({ "anchor": coords(&o.anchor), "period": o.period, "index": o.index, "multipliers": o.multipliers })),
        "notes": notes,
    }))
}

fn reply(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen(js_name = operatorReport)]
pub fn operator_report_js(form: &str, operator: &str, seed: u32) -> String {
    reply(operator_report(form, operator, u64::from(seed)))
}

#[wasm_bindgen(js_name = lorenzReport)]
pub fn lorenz_report_js(sigma: f64, rho: f64, beta: f64, horizon: f64, seed: u32) -> String {
    reply(lorenz_report(sigma, rho, beta, horizon, u64::from(seed)))
}

#[wasm_bindgen(js_name = lorenzStar)]
pub fn lorenz_star_js(sigma: f64, rho: f64, beta: f64) -> String {
    reply(lorenz_star(sigma, rho, beta))
}

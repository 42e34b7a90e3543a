//! Browser bindings for three interactive views: solver trajectories, proximal
//! point paths and Moreau envelopes. Every export takes and returns JSON
//! strings; the plain Rust functions behind them are usable natively.

// `!(x > 0.0)` style guards deliberately reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use ahb_core::certify::uniform_in_ball;
use ahb_core::prox::{moreau_gradient, moreau_value, ppa_run};
use ahb_core::solvers::run_solver;
use ahb_core::{Method, Objective, ProblemSpec, SolverConfig, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Upper bounds that keep a single call interactive.
pub const MAX_ITERS: usize = 20_000;
pub const MAX_CURVE_POINTS: usize = 5_000;
pub const MAX_DIM: usize = 4_096;

#[derive(Debug, Serialize)]
pub struct Series {
    pub method: &'static str,
    pub k: Vec<usize>,
    pub gap: Vec<f64>,
    pub dist: Vec<Option<f64>>,
    pub beta: Vec<f64>,
    pub stop_reason: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Trajectories {
    pub dim: usize,
    pub lipschitz: f64,
    pub series: Vec<Series>,
}

#[derive(Debug, Serialize)]
pub struct PpaPath {
    pub tau: f64,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub step_norms: Vec<f64>,
    pub path_length: f64,
}

#[derive(Debug, Serialize)]
pub struct EnvelopeCurve {
    pub lambda: f64,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub envelope: Vec<f64>,
    pub gradient: Vec<f64>,
}

fn build(problem_json: &str) -> Result<Objective, String> {
    let spec: ProblemSpec = serde_json::from_str(problem_json).map_err(|e| format!("problem: {e}"))?;
    let obj = spec.build().map_err(|e| e.to_string())?;
    if obj.dim() > MAX_DIM {
        return Err(format!("dimension {} exceeds the demo limit {MAX_DIM}", obj.dim()));
    }
    Ok(obj)
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Runs all four methods from a start point at distance `x0_norm` from the
/// minimiser (the origin when none is known), along a seeded direction.
pub fn trajectories(problem_json: &str, max_iters: usize, mu0: f64, x0_norm: f64) -> Result<String, String> {
    if max_iters == 0 || max_iters > MAX_ITERS {
        return Err(format!("max_iters must be in 1..={MAX_ITERS}"));
    }
    if !(x0_norm >= 0.0 && x0_norm.is_finite()) {
        return Err("x0_norm must be nonnegative".into());
    }
    let obj = build(problem_json)?;
    let centre = obj.minimizer().cloned().unwrap_or_else(|| Vector::zeros(obj.dim()));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let dir = uniform_in_ball(&Vector::zeros(obj.dim()), 1.0, &mut rng);
    let x0 = if dir.norm() > 0.0 { &centre + dir.normalize() * x0_norm } else { centre };

    let mut series = Vec::new();
    for method in [Method::Ahb, Method::Alrhb, Method::Nesterov, Method::Gd] {
        let cfg = SolverConfig {
            mu0,
            max_iters,
            ..SolverConfig::new(method)
        };
        let trace = run_solver(&obj, &cfg, &x0).map_err(|e| format!("{}: {e}", method.name()))?;
        let r = trace.records();
        series.push(Series {
            method: method.name(),
            k: r.iter().map(|r| r.k).collect(),
            gap: r.iter().map(|r| r.gap).collect(),
            dist: r.iter().map(|r| r.dist).collect(),
            beta: r.iter().map(|r| r.beta).collect(),
            stop_reason: trace.meta.stop_reason.as_str(),
        });
    }
    to_json(&Trajectories {
        dim: obj.dim(),
        lipschitz: obj.lipschitz().unwrap_or(f64::NAN),
        series,
    })
}

/// Proximal point iterates from `x0` (JSON array) with step `tau`.
pub fn ppa_path(problem_json: &str, tau: f64, x0_json: &str, iters: usize) -> Result<String, String> {
    if iters > MAX_ITERS {
        return Err(format!("iters must be at most {MAX_ITERS}"));
    }
    let obj = build(problem_json)?;
    let x0: Vec<f64> = serde_json::from_str(x0_json).map_err(|e| format!("x0: {e}"))?;
    if x0.len() != obj.dim() {
        return Err(format!("x0 has {} entries, problem dimension is {}", x0.len(), obj.dim()));
    }
    let run = ppa_run(&obj, tau, &Vector::from_vec(x0), iters).map_err(|e| e.to_string())?;
    to_json(&PpaPath {
        tau,
        path_length: run.path_length(),
        points: run.points.iter().map(|p| p.iter().copied().collect()).collect(),
        values: run.values,
        step_norms: run.step_norms,
    })
}

/// `f`, `M_{λf}` and `M'_{λf}` on `n` evenly spaced points of `[lo, hi]` for
/// a one-dimensional problem.
pub fn moreau_curve(problem_json: &str, lambda: f64, lo: f64, hi: f64, n: usize) -> Result<String, String> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err("need finite lo < hi".into());
    }
    if !(2..=MAX_CURVE_POINTS).contains(&n) {
        return Err(format!("n must be in 2..={MAX_CURVE_POINTS}"));
    }
    let obj = build(problem_json)?;
    if obj.dim() != 1 {
        return Err("the envelope view needs a one-dimensional problem".into());
    }
    let mut curve = EnvelopeCurve {
        lambda,
        x: Vec::with_capacity(n),
        f: Vec::with_capacity(n),
        envelope: Vec::with_capacity(n),
        gradient: Vec::with_capacity(n),
    };
    for i in 0..n {
        let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let x = Vector::from_element(1, t);
        curve.x.push(t);
        curve.f.push(obj.value(&x));
        curve.envelope.push(moreau_value(&obj, lambda, &x).map_err(|e| e.to_string())?);
        curve.gradient.push(moreau_gradient(&obj, lambda, &x).map_err(|e| e.to_string())?[0]);
    }
    to_json(&curve)
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = trajectories)]
pub fn trajectories_js(problem_json: &str, max_iters: usize, mu0: f64, x0_norm: f64) -> Result<String, JsValue> {
    js(trajectories(problem_json, max_iters, mu0, x0_norm))
}

#[wasm_bindgen(js_name = ppaPath)]
pub fn ppa_path_js(problem_json: &str, tau: f64, x0_json: &str, iters: usize) -> Result<String, JsValue> {
    js(ppa_path(problem_json, tau, x0_json, iters))
}

#[wasm_bindgen(js_name = moreauCurve)]
pub fn moreau_curve_js(problem_json: &str, lambda: f64, lo: f64, hi: f64, n: usize) -> Result<String, JsValue> {
    js(moreau_curve(problem_json, lambda, lo, hi, n))
}

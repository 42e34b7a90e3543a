//! Numerical checks of growth error bounds and KL-type inequalities.
//!
//! Pointwise checks sample the region `B_r(x̄) ∩ {f(x̄) < f < f(x̄) + η}` by
//! rejection from the uniform ball and evaluate one inequality per sample,
//! written as `lhs ≤ rhs`. A report keeps the worst `lhs/rhs` and the
//! sample that produced it; a sample is a violation when that ratio exceeds
//! `1 + INEQUALITY_TOL`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{Objective, Vector};
use crate::prox::{moreau_value, ppa_run};
use crate::trace::Trace;

pub const INEQUALITY_TOL: f64 = 1e-9;
pub const EXPONENT_TOL: f64 = 0.05;
pub const MIN_FIT_SAMPLES: usize = 8;
const REJECTION_FACTOR: usize = 100;
/// Stand-in for `η = ∞` in the level-slice sampler.
pub const ETA_SURROGATE: f64 = 1e300;

/// `φ(t) = C·t^α` with `C > 0`, `α ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFunction {
    pub c: f64,
    pub alpha: f64,
}

impl HolderFunction {
    pub fn new(c: f64, alpha: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("phi.c", format!("{c} must be positive")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::param("phi.alpha", format!("{alpha} not in (0, 1]")));
        }
        Ok(HolderFunction { c, alpha })
    }

    pub fn value(&self, t: f64) -> f64 {
        self.c * t.max(0.0).powf(self.alpha)
    }

    /// `φ'(t) = C·α·t^{α−1}`; `+∞` at `t = 0` when `α < 1`.
    pub fn derivative(&self, t: f64) -> f64 {
        if self.alpha == 1.0 {
            self.c
        } else {
            self.c * self.alpha * t.max(0.0).powf(self.alpha - 1.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub alpha: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpaSlack {
    pub tau: f64,
    pub path_length: f64,
    pub bound: f64,
    pub slack: f64,
    pub first_step: f64,
    /// `√(2τ(f(x) − f_*))`.
    pub first_step_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub checked: usize,
    pub violations: usize,
    pub worst_ratio: f64,
    /// The sample attaining `worst_ratio` for pointwise checks; for
    /// aggregate checks, the quantities the verdict was computed from.
    pub witness: Vec<f64>,
    pub fitted: Option<FittedParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_tau: Vec<PpaSlack>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CertReport {
    fn empty() -> Self {
        CertReport {
            checked: 0,
            violations: 0,
            worst_ratio: f64::NEG_INFINITY,
            witness: Vec::new(),
            fitted: None,
            per_tau: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn observe(&mut self, ratio: f64, witness: impl FnOnce() -> Vec<f64>) {
        self.checked += 1;
        if ratio > 1.0 + INEQUALITY_TOL || ratio.is_nan() {
            self.violations += 1;
        }
        if ratio > self.worst_ratio || (ratio.is_nan() && !self.worst_ratio.is_nan()) {
            self.worst_ratio = ratio;
            self.witness = witness();
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Uniform sample from the ball `B_r(center)`.
pub fn uniform_in_ball<R: Rng>(center: &Vector, r: f64, rng: &mut R) -> Vector {
    let d = center.len();
    loop {
        let dir = Vector::from_fn(d, |_, _| StandardNormal.sample(&mut *rng));
        let n = dir.norm();
        if n > 0.0 {
            let u: f64 = rng.random();
            let radius = r * u.powf(1.0 / d as f64);
            return center + dir * (radius / n);
        }
    }
}

/// Rejection sample of `B_r(x̄) ∩ {f(x̄) < f < f(x̄) + η}`.
pub fn sample_level_slice(
    obj: &Objective,
    xbar: &Vector,
    r: f64,
    eta: f64,
    num_samples: usize,
    seed: u64,
) -> Result<(Vec<Vector>, Vec<String>)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::param("r", "must be positive"));
    }
    if !(eta > 0.0) {
        return Err(Error::param("eta", "must be positive"));
    }
    if num_samples == 0 {
        return Err(Error::param("num_samples", "must be positive"));
    }
    if xbar.len() != obj.dim() {
        return Err(Error::InvalidInput("xbar has the wrong dimension".into()));
    }
    let mut notes = Vec::new();
    let eta = if eta.is_finite() {
        eta
    } else {
        notes.push(format!("eta = inf replaced by surrogate {ETA_SURROGATE:e}"));
        ETA_SURROGATE
    };
    let f_bar = obj.value(xbar);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trials = REJECTION_FACTOR * num_samples;
    let mut out = Vec::with_capacity(num_samples);
    for _ in 0..trials {
        if out.len() == num_samples {
            break;
        }
        let x = uniform_in_ball(xbar, r, &mut rng);
        let f = obj.value(&x);
        if f > f_bar && f < f_bar + eta {
            out.push(x);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyRegion { trials });
    }
    if out.len() < num_samples {
        notes.push(format!("only {} of {num_samples} samples accepted", out.len()));
    }
    Ok((out, notes))
}

/// `1 / (φ'(f(x) − f(x̄))·d(0, ∂f(x)))`: the KL inequality holds at `x` when
/// this is at most one.
pub fn kl_ratio(obj: &Objective, f_bar: f64, phi: &HolderFunction, x: &Vector) -> Result<f64> {
    let slope = phi.derivative(obj.value(x) - f_bar) * obj.subgradient_norm(x)?;
    Ok(1.0 / slope)
}

/// `d(x, S) / (factor·φ(f(x) − f_*))`.
pub fn growth_ratio(obj: &Objective, phi: &HolderFunction, factor: f64, x: &Vector) -> Result<f64> {
    let f_star = obj.min_value().ok_or(Error::MissingCapability("min_value"))?;
    let d = obj.distance_to_solutions(x)?;
    Ok(d / (factor * phi.value(obj.value(x) - f_star)))
}

/// `(f(x) − f(x̄))^{1−α} / ((C/α)·d(0, ∂f(x)))`.
pub fn growth_kl_ratio(obj: &Objective, f_bar: f64, c: f64, alpha: f64, x: &Vector) -> Result<f64> {
    let gap = obj.value(x) - f_bar;
    Ok(gap.powf(1.0 - alpha) / (c / alpha * obj.subgradient_norm(x)?))
}

fn pointwise(
    samples: Vec<Vector>,
    notes: Vec<String>,
    mut ratio: impl FnMut(&Vector) -> Result<f64>,
) -> Result<CertReport> {
    let mut report = CertReport::empty();
    report.notes = notes;
    for x in &samples {
        let q = ratio(x)?;
        report.observe(q, || x.iter().copied().collect());
    }
    Ok(report)
}

/// Samples the level slice and checks `φ'(f(x) − f(x̄))·d(0, ∂f(x)) ≥ 1`.
#[allow(clippy::too_many_arguments)]
pub fn check_kl(
    obj: &Objective,
    xbar: &Vector,
    r: f64,
    eta: f64,
    phi: &HolderFunction,
    num_samples: usize,
    seed: u64,
) -> Result<CertReport> {
    let (samples, notes) = sample_level_slice(obj, xbar, r, eta, num_samples, seed)?;
    let f_bar = obj.value(xbar);
    pointwise(samples, notes, |x| kl_ratio(obj, f_bar, phi, x))
}

/// Checks `d(x, S) ≤ factor·φ(f(x) − f_*)` on the level slice.
#[allow(clippy::too_many_arguments)]
pub fn certify_growth_direct(
    obj: &Objective,
    xbar: &Vector,
    r: f64,
    eta: f64,
    phi: &HolderFunction,
    factor: f64,
    num_samples: usize,
    seed: u64,
) -> Result<CertReport> {
    if !(factor > 0.0) {
        return Err(Error::param("factor", "must be positive"));
    }
    if !obj.has_solution_oracle() {
        return Err(Error::MissingCapability("solution_oracle"));
    }
    if obj.min_value().is_none() {
        return Err(Error::MissingCapability("min_value"));
    }
    let (samples, notes) = sample_level_slice(obj, xbar, r, eta, num_samples, seed)?;
    pointwise(samples, notes, |x| growth_ratio(obj, phi, factor, x))
}

/// Checks `(f(x) − f(x̄))^{1−α} ≤ (C/α)·d(0, ∂f(x))`, the KL inequality that
/// a growth bound `d(x, S) ≤ C·gap^α` implies for convex `f`.
#[allow(clippy::too_many_arguments)]
pub fn check_growth_implies_kl(
    obj: &Objective,
    xbar: &Vector,
    r: f64,
    eta: f64,
    c: f64,
    alpha: f64,
    num_samples: usize,
    seed: u64,
) -> Result<CertReport> {
    HolderFunction::new(c, alpha)?;
    let (samples, notes) = sample_level_slice(obj, xbar, r, eta, num_samples, seed)?;
    let f_bar = obj.value(xbar);
    pointwise(samples, notes, |x| growth_kl_ratio(obj, f_bar, c, alpha, x))
}

/// Runs the proximal point algorithm from `x` for each `τ` and checks
///
/// * path length `Σ‖x_{k+1} − x_k‖ ≤ 2‖x_1 − x_0‖ + 2φ(f(x) − f_*)`,
/// * first step `‖x_1 − x_0‖ ≤ √(2τ(f(x) − f_*))`,
/// * `f(x_k)` nonincreasing,
/// * the path-length slack shrinks as `τ` decreases.
///
/// An absolute slack of `1e-9` is allowed on the length bounds.
pub fn certify_growth_via_ppa(
    obj: &Objective,
    x: &Vector,
    phi: &HolderFunction,
    tau_list: &[f64],
    iters: usize,
) -> Result<CertReport> {
    if tau_list.is_empty() {
        return Err(Error::param("tau_list", "must not be empty"));
    }
    let f_star = obj.min_value().ok_or(Error::MissingCapability("min_value"))?;
    let gap0 = obj.value(x) - f_star;
    let mut report = CertReport::empty();
    for &tau in tau_list {
        let run = ppa_run(obj, tau, x, iters)?;
        let path = run.path_length();
        let first = run.step_norms.get(1).copied().unwrap_or(0.0);
        let bound = 2.0 * first + 2.0 * phi.value(gap0);
        let first_bound = (2.0 * tau * gap0).sqrt();
        report.observe(path / (bound + 1e-9), || vec![tau, path, bound]);
        report.observe(first / (first_bound + 1e-9), || vec![tau, first, first_bound]);
        let rise = run.values.windows(2).map(|w| w[1] - w[0]).fold(0.0_f64, f64::max);
        report.observe(if rise > 1e-12 { f64::INFINITY } else { 0.0 }, || vec![tau, rise]);
        report.per_tau.push(PpaSlack {
            tau,
            path_length: path,
            bound,
            slack: bound - path,
            first_step: first,
            first_step_bound: first_bound,
        });
    }
    let mut by_tau = report.per_tau.clone();
    by_tau.sort_by(|a, b| b.tau.total_cmp(&a.tau));
    for w in by_tau.windows(2) {
        let grew = w[1].slack > w[0].slack + 1e-12;
        report.observe(if grew { f64::INFINITY } else { 0.0 }, || {
            vec![w[0].tau, w[0].slack, w[1].tau, w[1].slack]
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LineFit {
    slope: f64,
    intercept: f64,
    max_residual: f64,
    rms: f64,
}

fn line_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidInput("regression abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (mut max_residual, mut ss) = (f64::NEG_INFINITY, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let r = y - intercept - slope * x;
        max_residual = max_residual.max(r);
        ss += r * r;
    }
    Ok(LineFit {
        slope,
        intercept,
        max_residual,
        rms: (ss / n).sqrt(),
    })
}

/// Fits `dist ≈ C·gap^α` by least squares in log–log coordinates, then
/// raises `C` by the largest positive log-residual so `C·gap^α` majorises
/// every sample.
pub fn fit_growth_exponent(samples: &[(f64, f64)]) -> Result<FittedParams> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_FIT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|&(g, d)| !(g > 0.0 && d > 0.0 && g.is_finite() && d.is_finite())) {
        return Err(Error::InvalidInput("gaps and distances must be positive".into()));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let fit = line_fit(&xs, &ys)?;
    Ok(FittedParams {
        c: (fit.intercept + fit.max_residual.max(0.0)).exp(),
        alpha: fit.slope,
        residual: fit.rms,
    })
}

/// Fits the growth exponent of the Moreau envelope `M_{λf}` around `x̄` and
/// compares it with `min{α, ½}`, `α` being the objective's registered Hölder
/// exponent. `witness` is `[fitted, expected]`; `worst_ratio` is
/// `|fitted − expected| / EXPONENT_TOL`.
pub fn check_moreau_exponent(
    obj: &Objective,
    lambda: f64,
    xbar: &Vector,
    r: f64,
    num_samples: usize,
    seed: u64,
) -> Result<CertReport> {
    let alpha = obj
        .holder_exponent()
        .ok_or(Error::MissingCapability("holder_exponent"))?;
    if !obj.is_convex() {
        return Err(Error::InvalidInput("envelope exponent check needs a convex objective".into()));
    }
    if !(r > 0.0) || num_samples == 0 {
        return Err(Error::param("r/num_samples", "must be positive"));
    }
    let expected = alpha.min(0.5);
    let m_bar = moreau_value(obj, lambda, xbar)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(num_samples);
    for _ in 0..num_samples {
        let x = uniform_in_ball(xbar, r, &mut rng);
        let gap = moreau_value(obj, lambda, &x)? - m_bar;
        let dist = obj.distance_to_solutions(&x)?;
        if gap > 0.0 && dist > 0.0 {
            data.push((gap, dist));
        }
    }
    let fitted = fit_growth_exponent(&data)?;
    let ratio = (fitted.alpha - expected).abs() / EXPONENT_TOL;
    Ok(CertReport {
        checked: data.len(),
        violations: usize::from(ratio > 1.0),
        worst_ratio: ratio,
        witness: vec![fitted.alpha, expected],
        fitted: Some(fitted),
        per_tau: Vec::new(),
        notes: Vec::new(),
    })
}

/// `Δ_{k+1} = Δ_k − C·Δ_k^θ` for `k < K`.
pub fn recursive_sequence(delta0: f64, c: f64, theta: f64, iters: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(iters + 1);
    let mut d = delta0;
    out.push(d);
    for _ in 0..iters {
        d -= c * d.powf(theta);
        out.push(d);
    }
    out
}

/// Generates the equality case of `Δ_{k+1} ≤ Δ_k − C·Δ_k^θ` and checks
/// `Δ_k ≤ C̃·(1+k)^{−1/(θ−1)}` with `C̃ = max_k Δ_k(1+k)^{1/(θ−1)}`.
///
/// `witness` is `[argmax k, C̃]`; `fitted` carries `C̃` and the log–log slope
/// of `Δ_k` over the tail `k ∈ [K/10, K]`.
pub fn verify_recursive_rate(delta0: f64, c: f64, theta: f64, iters: usize) -> Result<CertReport> {
    if !(delta0 >= 0.0 && delta0.is_finite()) {
        return Err(Error::InvalidInput("delta0 must be nonnegative".into()));
    }
    if !(c > 0.0) || !(theta > 1.0) {
        return Err(Error::InvalidInput("need C > 0 and theta > 1".into()));
    }
    if !(c * delta0.powf(theta - 1.0) < 1.0) {
        return Err(Error::InvalidInput("need C·delta0^(theta−1) < 1".into()));
    }
    let deltas = recursive_sequence(delta0, c, theta, iters);
    let e = 1.0 / (theta - 1.0);
    let scaled: Vec<f64> = deltas
        .iter()
        .enumerate()
        .map(|(k, d)| d * (1.0 + k as f64).powf(e))
        .collect();
    let (argmax, c_tilde) = scaled
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, s)| if s > best.1 { (k, s) } else { best });

    let mut report = CertReport::empty();
    for (k, d) in deltas.iter().enumerate() {
        let bound = c_tilde * (1.0 + k as f64).powf(-e);
        let ratio = if *d == 0.0 { 0.0 } else { d / bound };
        report.observe(ratio, || vec![k as f64, c_tilde]);
    }
    report.witness = vec![argmax as f64, c_tilde];

    let lo = (iters / 10).max(1);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (lo..=iters)
        .filter(|&k| deltas[k] > 0.0)
        .map(|k| ((k as f64).ln(), deltas[k].ln()))
        .unzip();
    if xs.len() >= MIN_FIT_SAMPLES {
        let fit = line_fit(&xs, &ys)?;
        report.fitted = Some(FittedParams {
            c: c_tilde,
            alpha: fit.slope,
            residual: fit.rms,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateModel {
    /// `log dist` against `k`; reports the per-step factor `ρ̂`.
    Linear,
    /// `log dist` against `log(k+1)`; reports the exponent `p̂`.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: RateModel,
    pub rate: f64,
    pub intercept: f64,
    pub residual: f64,
    pub points: usize,
}

pub fn fit_rate_from_trace(trace: &Trace, model: RateModel) -> Result<RateFit> {
    fit_rate_window(trace, model, 0, usize::MAX)
}

/// [`fit_rate_from_trace`] restricted to records with `k_min ≤ k ≤ k_max`.
pub fn fit_rate_window(trace: &Trace, model: RateModel, k_min: usize, k_max: usize) -> Result<RateFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = trace
        .records()
        .iter()
        .filter(|r| r.k >= k_min && r.k <= k_max)
        .filter_map(|r| r.dist.filter(|&d| d > 0.0 && d.is_finite()).map(|d| (r.k, d)))
        .map(|(k, d)| {
            let x = match model {
                RateModel::Linear => k as f64,
                RateModel::Power => (k as f64 + 1.0).ln(),
            };
            (x, d.ln())
        })
        .unzip();
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_FIT_SAMPLES} positive distances, found {}",
            xs.len()
        )));
    }
    let fit = line_fit(&xs, &ys)?;
    Ok(RateFit {
        model,
        rate: match model {
            RateModel::Linear => fit.slope.exp(),
            RateModel::Power => fit.slope,
        },
        intercept: fit.intercept,
        residual: fit.rms,
        points: xs.len(),
    })
}

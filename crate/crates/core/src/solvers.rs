//! The adaptive heavy ball method and three baselines (constant-step
//! gradient descent, Nesterov's accelerated gradient, heavy ball with an
//! adaptive learning rate) under one iteration loop.
//!
//! Every method iterates `x_{k+1} = x_k − α_k g_k + β_k m_k` with
//! `m_k = x_k − x_{k−1}` and `x_{−1} = x_0`; they differ in how `α_k`, `β_k`
//! and the gradient evaluation point are chosen.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{Objective, Vector};
use crate::trace::{IterationRecord, StopReason, Trace, TraceMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ahb,
    Gd,
    Nesterov,
    Alrhb,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ahb => "ahb",
            Method::Gd => "gd",
            Method::Nesterov => "nesterov",
            Method::Alrhb => "alrhb",
        }
    }

    fn needs_min_value(self) -> bool {
        matches!(self, Method::Ahb | Method::Alrhb)
    }
}

/// JSON has no infinity; `null` stands for `+∞`.
mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// `μ0 ∈ [0, 1)`; AHB uses the step `(1+μ0)/L`.
    pub mu0: f64,
    /// Upper clamp on the AHB momentum; `null` in JSON means no cap.
    #[serde(with = "inf_as_null")]
    pub beta_cap: f64,
    pub gd_mu: f64,
    pub nesterov_nu: f64,
    pub alrhb_beta: f64,
    pub max_iters: usize,
    #[serde(with = "inf_as_null")]
    pub gap_tol: f64,
    pub record_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Ahb,
            mu0: 0.96,
            beta_cap: 1.0,
            gd_mu: 1.96,
            nesterov_nu: 3.0,
            alrhb_beta: 0.96,
            max_iters: 1000,
            gap_tol: 0.0,
            record_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        SolverConfig {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.mu0) {
            return Err(Error::param("mu0", format!("{} not in [0, 1)", self.mu0)));
        }
        if !(self.beta_cap > 0.0) {
            return Err(Error::param("beta_cap", format!("{} must be positive", self.beta_cap)));
        }
        if !(self.gd_mu > 0.0 && self.gd_mu < 2.0) {
            return Err(Error::param("gd_mu", format!("{} not in (0, 2)", self.gd_mu)));
        }
        if !(self.nesterov_nu >= 2.0 && self.nesterov_nu.is_finite()) {
            return Err(Error::param("nesterov_nu", format!("{} must be >= 2", self.nesterov_nu)));
        }
        if !(self.alrhb_beta > 0.0 && self.alrhb_beta < 1.0) {
            return Err(Error::param("alrhb_beta", format!("{} not in (0, 1)", self.alrhb_beta)));
        }
        if !(self.gap_tol >= 0.0) {
            return Err(Error::param("gap_tol", "must be nonnegative"));
        }
        if self.record_every == 0 {
            return Err(Error::param("record_every", "must be positive"));
        }
        Ok(())
    }
}

/// Iteration state at the start of step `k`. The `*_prev` fields and
/// `gamma_tilde` hold what step `k−1` computed (all zero at `k = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub k: usize,
    pub x: Vector,
    pub x_prev: Vector,
    /// `γ̃_{k−1}`.
    pub gamma_tilde: f64,
    pub alpha_prev: f64,
    pub beta_prev: f64,
    /// `f(x_{k−1}) − f_*`.
    pub f_prev_gap: f64,
    /// `‖g_{k−1}‖²`.
    pub g_prev_norm_sq: f64,
}

impl SolverState {
    pub fn initial(x0: Vector) -> Self {
        SolverState {
            k: 0,
            x_prev: x0.clone(),
            x: x0,
            gamma_tilde: 0.0,
            alpha_prev: 0.0,
            beta_prev: 0.0,
            f_prev_gap: 0.0,
            g_prev_norm_sq: 0.0,
        }
    }

    pub fn momentum(&self) -> Vector {
        &self.x - &self.x_prev
    }
}

/// What one step observed at `x_k` and the parameters it chose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub k: usize,
    pub fval: f64,
    pub gap: f64,
    pub gnorm: f64,
    pub alpha: f64,
    pub beta: f64,
    pub step_norm: f64,
    /// `γ̃_k` (AHB only; zero for other methods).
    pub gamma_tilde: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub report: StepReport,
    /// `None` when the method reached a stationary point and cannot continue.
    pub next: Option<SolverState>,
}

/// `α = (1+μ0)/L`.
pub fn ahb_alpha(lipschitz: f64, mu0: f64) -> Result<f64> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::param("lipschitz", format!("{lipschitz} must be positive")));
    }
    if !(0.0..1.0).contains(&mu0) {
        return Err(Error::param("mu0", format!("{mu0} not in [0, 1)")));
    }
    Ok((1.0 + mu0) / lipschitz)
}

/// Computable upper bound `γ̃_k` for `⟨m_k, x_k − x̂⟩`:
/// `‖m_k‖² − α_{k−1}(f(x_{k−1}) − f_* + ‖g_{k−1}‖²/(2L)) + β_{k−1}γ̃_{k−1}`,
/// and `0` at `k = 0`.
pub fn update_gamma_tilde(state: &SolverState, m_norm_sq: f64, lipschitz: f64) -> f64 {
    if state.k == 0 {
        return 0.0;
    }
    m_norm_sq - state.alpha_prev * (state.f_prev_gap + state.g_prev_norm_sq / (2.0 * lipschitz))
        + state.beta_prev * state.gamma_tilde
}

/// Momentum minimising the distance-decrease surrogate over `[0, beta_cap]`.
pub fn ahb_beta(alpha: f64, g: &Vector, m: &Vector, gamma_tilde: f64, beta_cap: f64) -> f64 {
    let m_sq = m.norm_squared();
    if m_sq == 0.0 {
        return 0.0;
    }
    ((alpha * g.dot(m) - gamma_tilde) / m_sq).max(0.0).min(beta_cap)
}

fn lipschitz_of(obj: &Objective) -> Result<f64> {
    let l = obj.lipschitz().ok_or(Error::MissingCapability("lipschitz"))?;
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::param("lipschitz", format!("{l} must be positive")));
    }
    Ok(l)
}

fn evaluate(obj: &Objective, x: &Vector, k: usize) -> Result<(f64, Vector)> {
    let fval = obj.value(x);
    if !fval.is_finite() {
        return Err(Error::NumericalFailure { k, quantity: "objective value" });
    }
    let g = obj.gradient(x)?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure { k, quantity: "gradient" });
    }
    Ok((fval, g))
}

fn gap_of(obj: &Objective, fval: f64) -> f64 {
    obj.min_value().map_or(f64::NAN, |f_star| fval - f_star)
}

fn advance(state: &SolverState, x_next: Vector, report: &StepReport, g_norm_sq: f64) -> Result<SolverState> {
    if x_next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure {
            k: state.k,
            quantity: "iterate",
        });
    }
    Ok(SolverState {
        k: state.k + 1,
        x_prev: state.x.clone(),
        x: x_next,
        gamma_tilde: report.gamma_tilde,
        alpha_prev: report.alpha,
        beta_prev: report.beta,
        f_prev_gap: report.gap,
        g_prev_norm_sq: g_norm_sq,
    })
}

/// One step of the adaptive heavy ball method.
pub fn ahb_step(state: &SolverState, obj: &Objective, cfg: &SolverConfig) -> Result<StepOutcome> {
    let l = lipschitz_of(obj)?;
    let f_star = obj.min_value().ok_or(Error::MissingCapability("min_value"))?;
    let (fval, g) = evaluate(obj, &state.x, state.k)?;
    let gap = fval - f_star;
    let alpha = ahb_alpha(l, cfg.mu0)?;
    let m = state.momentum();
    let m_sq = m.norm_squared();
    let gamma_tilde = update_gamma_tilde(state, m_sq, l);
    let beta = ahb_beta(alpha, &g, &m, gamma_tilde, cfg.beta_cap);

    let mut x_next = &state.x - &g * alpha;
    if beta != 0.0 {
        x_next.axpy(beta, &m, 1.0);
    }
    let g_sq = g.norm_squared();
    let report = StepReport {
        k: state.k,
        fval,
        gap,
        gnorm: g_sq.sqrt(),
        alpha,
        beta,
        step_norm: m_sq.sqrt(),
        gamma_tilde,
    };
    let next = advance(state, x_next, &report, g_sq)?;
    Ok(StepOutcome {
        report,
        next: Some(next),
    })
}

/// Gradient descent with constant step `gd_mu/L`.
pub fn gd_step(state: &SolverState, obj: &Objective, cfg: &SolverConfig) -> Result<StepOutcome> {
    let l = lipschitz_of(obj)?;
    let (fval, g) = evaluate(obj, &state.x, state.k)?;
    let alpha = cfg.gd_mu / l;
    let x_next = &state.x - &g * alpha;
    let g_sq = g.norm_squared();
    let report = StepReport {
        k: state.k,
        fval,
        gap: gap_of(obj, fval),
        gnorm: g_sq.sqrt(),
        alpha,
        beta: 0.0,
        step_norm: state.momentum().norm(),
        gamma_tilde: 0.0,
    };
    let next = advance(state, x_next, &report, g_sq)?;
    Ok(StepOutcome {
        report,
        next: Some(next),
    })
}

/// Nesterov momentum coefficient `(k−1)/(k+ν)`, evaluated as written from
/// `k = 0`.
pub fn nesterov_coefficient(k: usize, nu: f64) -> f64 {
    (k as f64 - 1.0) / (k as f64 + nu)
}

/// Nesterov's accelerated gradient with step `1/L`:
/// `z_k = x_k + (k−1)/(k+ν)·m_k`, `x_{k+1} = z_k − ∇f(z_k)/L`. The recorded
/// gradient norm is `‖∇f(z_k)‖`.
pub fn nesterov_step(state: &SolverState, obj: &Objective, cfg: &SolverConfig) -> Result<StepOutcome> {
    let l = lipschitz_of(obj)?;
    let fval = obj.value(&state.x);
    if !fval.is_finite() {
        return Err(Error::NumericalFailure {
            k: state.k,
            quantity: "objective value",
        });
    }
    let m = state.momentum();
    let coef = nesterov_coefficient(state.k, cfg.nesterov_nu);
    let mut z = state.x.clone();
    if coef != 0.0 {
        z.axpy(coef, &m, 1.0);
    }
    let (_, gz) = evaluate(obj, &z, state.k)?;
    let alpha = 1.0 / l;
    let x_next = z - &gz * alpha;
    let g_sq = gz.norm_squared();
    let report = StepReport {
        k: state.k,
        fval,
        gap: gap_of(obj, fval),
        gnorm: g_sq.sqrt(),
        alpha,
        beta: coef,
        step_norm: m.norm(),
        gamma_tilde: 0.0,
    };
    let next = advance(state, x_next, &report, g_sq)?;
    Ok(StepOutcome {
        report,
        next: Some(next),
    })
}

/// Heavy ball with constant momentum `β` and the adaptive learning rate
/// `1/(2L) + (f(x_k) − f_*)/‖g_k‖² + β⟨g_k, m_k⟩/‖g_k‖²`. Returns no next
/// state at a critical point, where the rate is undefined.
pub fn alrhb_step(state: &SolverState, obj: &Objective, cfg: &SolverConfig) -> Result<StepOutcome> {
    let l = lipschitz_of(obj)?;
    let f_star = obj.min_value().ok_or(Error::MissingCapability("min_value"))?;
    let (fval, g) = evaluate(obj, &state.x, state.k)?;
    let gap = fval - f_star;
    let m = state.momentum();
    let g_sq = g.norm_squared();
    let beta = cfg.alrhb_beta;
    let mut report = StepReport {
        k: state.k,
        fval,
        gap,
        gnorm: g_sq.sqrt(),
        alpha: 0.0,
        beta,
        step_norm: m.norm(),
        gamma_tilde: 0.0,
    };
    if g_sq == 0.0 {
        return Ok(StepOutcome { report, next: None });
    }
    let alpha = 1.0 / (2.0 * l) + gap / g_sq + beta * g.dot(&m) / g_sq;
    report.alpha = alpha;
    let mut x_next = &state.x - &g * alpha;
    x_next.axpy(beta, &m, 1.0);
    let next = advance(state, x_next, &report, g_sq)?;
    Ok(StepOutcome {
        report,
        next: Some(next),
    })
}

/// Dispatches to the configured method.
pub fn step(state: &SolverState, obj: &Objective, cfg: &SolverConfig) -> Result<StepOutcome> {
    match cfg.method {
        Method::Ahb => ahb_step(state, obj, cfg),
        Method::Gd => gd_step(state, obj, cfg),
        Method::Nesterov => nesterov_step(state, obj, cfg),
        Method::Alrhb => alrhb_step(state, obj, cfg),
    }
}

/// Checks that `obj` offers what `method` needs.
pub fn check_capabilities(obj: &Objective, method: Method) -> Result<()> {
    if !obj.has_gradient() {
        return Err(Error::MissingCapability("gradient"));
    }
    lipschitz_of(obj)?;
    if method.needs_min_value() && obj.min_value().is_none() {
        return Err(Error::MissingCapability("min_value"));
    }
    Ok(())
}

/// For objectives whose Lipschitz bound only holds on a ball around the
/// solution, returns the radius `R = 2·d(x0, S)` assumed to contain the run
/// and checks it fits inside that ball.
pub fn locality_radius(obj: &Objective, x0: &Vector) -> Result<Option<f64>> {
    let Some(ball) = obj.domain_radius() else {
        return Ok(None);
    };
    let d0 = obj.distance_to_solutions(x0)?;
    let r = 2.0 * d0;
    if r > ball * (1.0 + 1e-12) {
        return Err(Error::OutsideDomain(format!(
            "2·d(x0, S) = {r} exceeds the Lipschitz ball radius {ball}"
        )));
    }
    Ok(Some(r))
}

fn to_record(r: &StepReport, dist: Option<f64>) -> IterationRecord {
    IterationRecord {
        k: r.k,
        fval: r.fval,
        gap: r.gap,
        gnorm: r.gnorm,
        alpha: r.alpha,
        beta: r.beta,
        step_norm: r.step_norm,
        dist,
    }
}

#[cfg(not(target_arch = "wasm32"))]
fn clock() -> impl FnOnce() -> f64 {
    let start = std::time::Instant::now();
    move || start.elapsed().as_secs_f64() * 1e3
}

#[cfg(target_arch = "wasm32")]
fn clock() -> impl FnOnce() -> f64 {
    || 0.0
}

/// Runs `cfg.method` from `x0` until the gap tolerance, the iteration budget
/// or a stationary point stops it. Records every `record_every`-th iterate
/// plus the final one.
pub fn run_solver(obj: &Objective, cfg: &SolverConfig, x0: &Vector) -> Result<Trace> {
    let (trace, _) = run_solver_with_final(obj, cfg, x0)?;
    Ok(trace)
}

/// [`run_solver`], also returning the final iterate.
pub fn run_solver_with_final(obj: &Objective, cfg: &SolverConfig, x0: &Vector) -> Result<(Trace, Vector)> {
    cfg.validate()?;
    check_capabilities(obj, cfg.method)?;
    if x0.len() != obj.dim() {
        return Err(Error::InvalidInput(format!(
            "start point has dimension {}, objective has {}",
            x0.len(),
            obj.dim()
        )));
    }
    let locality = locality_radius(obj, x0)?;
    let elapsed = clock();

    let mut state = SolverState::initial(x0.clone());
    let mut records = Vec::new();
    let stop_reason = loop {
        let outcome = step(&state, obj, cfg)?;
        let r = outcome.report;
        let stop = if r.gap <= cfg.gap_tol {
            Some(StopReason::GapTolerance)
        } else if outcome.next.is_none() {
            Some(StopReason::Stationary)
        } else if state.k >= cfg.max_iters {
            Some(StopReason::MaxIters)
        } else {
            None
        };
        if stop.is_some() || state.k.is_multiple_of(cfg.record_every) {
            let dist = if obj.has_solution_oracle() {
                Some(obj.distance_to_solutions(&state.x)?)
            } else {
                None
            };
            records.push(to_record(&r, dist));
        }
        if let Some(reason) = stop {
            break reason;
        }
        state = outcome.next.expect("checked above");
    };

    let meta = TraceMeta {
        config: Some(cfg.clone()),
        stop_reason,
        wall_ms: elapsed(),
        locality_radius: locality,
        ..Default::default()
    };
    Ok((Trace::new(records, meta)?, state.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{make_abs_value, make_power, make_quadratic};
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn half_square() -> Objective {
        make_quadratic(&[1.0]).unwrap()
    }

    fn cfg(method: Method) -> SolverConfig {
        SolverConfig::new(method)
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(ahb_alpha(1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(ahb_alpha(2.0, 0.96).unwrap(), 0.98, max_relative = 1e-15);
        assert_relative_eq!(ahb_alpha(10.0, 0.5).unwrap(), 0.15, max_relative = 1e-15);
        assert!(ahb_alpha(0.0, 0.5).is_err());
        assert!(ahb_alpha(-1.0, 0.5).is_err());
    }

    #[test]
    fn gamma_tilde_examples() {
        let s0 = SolverState::initial(v(&[2.0]));
        assert_eq!(update_gamma_tilde(&s0, 123.0, 1.0), 0.0);

        let s = SolverState {
            k: 3,
            x: v(&[0.0]),
            x_prev: v(&[1.0]),
            gamma_tilde: 2.0,
            alpha_prev: 1.0,
            beta_prev: 0.5,
            f_prev_gap: 0.0,
            g_prev_norm_sq: 0.0,
        };
        assert_eq!(update_gamma_tilde(&s, 1.0, 1.0), 2.0);
    }

    /// Scalar AHB written out longhand, independent of the vector code path.
    fn scalar_ahb(x0: f64, lam: f64, mu0: f64, cap: f64, n: usize) -> Vec<(f64, f64, f64)> {
        let l = lam;
        let alpha = (1.0 + mu0) / l;
        let (mut x, mut xp) = (x0, x0);
        let (mut gt, mut a_prev, mut b_prev, mut gap_prev, mut gsq_prev) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut out = Vec::new();
        for k in 0..n {
            let g = lam * x;
            let m = x - xp;
            let gt_k = if k == 0 {
                0.0
            } else {
                m * m - a_prev * (gap_prev + gsq_prev / (2.0 * l)) + b_prev * gt
            };
            let b = if m == 0.0 { 0.0 } else { ((alpha * g * m - gt_k) / (m * m)).max(0.0).min(cap) };
            out.push((x, gt_k, b));
            let xn = x - alpha * g + b * m;
            gap_prev = 0.5 * lam * x * x;
            gsq_prev = g * g;
            a_prev = alpha;
            b_prev = b;
            gt = gt_k;
            xp = x;
            x = xn;
        }
        out
    }

    #[test]
    fn ahb_hand_step_through() {
        let obj = half_square();
        let mut c = cfg(Method::Ahb);
        c.mu0 = 0.0;
        let s0 = SolverState::initial(v(&[2.0]));
        let o0 = ahb_step(&s0, &obj, &c).unwrap();
        assert_eq!(o0.report.gnorm, 2.0);
        assert_eq!(o0.report.step_norm, 0.0);
        assert_eq!(o0.report.beta, 0.0);
        let s1 = o0.next.unwrap();
        assert_eq!(s1.x, v(&[0.0]));
        let o1 = ahb_step(&s1, &obj, &c).unwrap();
        assert_eq!(o1.report.gnorm, 0.0);
        assert_eq!(o1.report.gamma_tilde, 0.0);
        assert_eq!(o1.report.beta, 0.0);
        assert_eq!(o1.next.unwrap().x, v(&[0.0]));

        let oracle = scalar_ahb(2.0, 1.0, 0.0, 1.0, 2);
        assert_eq!(oracle[1], (0.0, 0.0, 0.0));
    }

    #[test]
    fn ahb_matches_scalar_reference() {
        let obj = make_quadratic(&[3.0]).unwrap();
        let mut c = cfg(Method::Ahb);
        c.mu0 = 0.7;
        c.beta_cap = 0.8;
        let oracle = scalar_ahb(-1.3, 3.0, 0.7, 0.8, 40);
        let mut s = SolverState::initial(v(&[-1.3]));
        // once the iterate is ~1e-8 the β quotient is dominated by rounding
        for (x, gt, b) in oracle.into_iter().take_while(|t| t.0.abs() > 1e-8) {
            let o = ahb_step(&s, &obj, &c).unwrap();
            assert_relative_eq!(s.x[0], x, max_relative = 1e-12, epsilon = 1e-14);
            assert_relative_eq!(o.report.gamma_tilde, gt, max_relative = 1e-9, epsilon = 1e-14);
            assert_relative_eq!(o.report.beta, b, max_relative = 1e-9, epsilon = 1e-9);
            s = o.next.unwrap();
        }
    }

    #[test]
    fn beta_examples() {
        let z = v(&[0.0, 0.0]);
        assert_eq!(ahb_beta(1.0, &v(&[1.0, 1.0]), &z, 0.0, 1.0), 0.0);
        // ⟨g,m⟩ = 3, ‖m‖² = 4
        assert_eq!(ahb_beta(1.0, &v(&[1.5, 0.0]), &v(&[2.0, 0.0]), 1.0, 1.0), 0.5);
        // ⟨g,m⟩ = −5, ‖m‖² = 1
        assert_eq!(ahb_beta(1.0, &v(&[-5.0]), &v(&[1.0]), 0.0, 1.0), 0.0);
        assert_eq!(ahb_beta(1.0, &v(&[50.0]), &v(&[1.0]), 0.0, 1.0), 1.0);
        assert_eq!(ahb_beta(1.0, &v(&[50.0]), &v(&[1.0]), 0.0, f64::INFINITY), 50.0);
    }

    #[test]
    fn fixed_point_at_minimizer() {
        let obj = make_quadratic(&[1.0, 4.0]).unwrap();
        for m in [Method::Ahb, Method::Gd, Method::Nesterov] {
            let s = SolverState::initial(v(&[0.0, 0.0]));
            let o = step(&s, &obj, &cfg(m)).unwrap();
            assert_eq!(o.next.unwrap().x, v(&[0.0, 0.0]), "{m:?}");
        }
        let o = alrhb_step(&SolverState::initial(v(&[0.0, 0.0])), &obj, &cfg(Method::Alrhb)).unwrap();
        assert!(o.next.is_none());
    }

    #[test]
    fn distance_decrease_per_step_on_anisotropic_quadratic() {
        let obj = make_quadratic(&[1.0, 10.0]).unwrap();
        let c = cfg(Method::Ahb);
        let c0 = 2.0 * (1.0 - 0.96_f64.powi(2)) / 10.0;
        let x0 = v(&[3.0, -2.0]);
        let slack = 1e-9 * (1.0 + x0.norm_squared());
        let mut s = SolverState::initial(x0);
        for _ in 0..500 {
            let o = ahb_step(&s, &obj, &c).unwrap();
            let next = o.next.unwrap();
            assert!(next.x.norm_squared() <= s.x.norm_squared() - c0 * o.report.gap + slack);
            s = next;
        }
    }

    #[test]
    fn gd_examples() {
        let obj = half_square();
        let mut c = cfg(Method::Gd);
        c.gd_mu = 1.0;
        let o = gd_step(&SolverState::initial(v(&[2.0])), &obj, &c).unwrap();
        assert_eq!(o.next.unwrap().x, v(&[0.0]));
        c.gd_mu = 1.96;
        let o = gd_step(&SolverState::initial(v(&[2.0])), &obj, &c).unwrap();
        assert_relative_eq!(o.next.unwrap().x[0], -1.92, max_relative = 1e-15);
    }

    #[test]
    fn nesterov_examples() {
        assert_eq!(nesterov_coefficient(4, 3.0), 3.0 / 7.0);
        assert_eq!(nesterov_coefficient(0, 3.0), -1.0 / 3.0);
        let obj = half_square();
        let o = nesterov_step(&SolverState::initial(v(&[2.0])), &obj, &cfg(Method::Nesterov)).unwrap();
        // m_0 = 0 so z_0 = x_0
        assert_eq!(o.report.gnorm, 2.0);
        assert_eq!(o.next.unwrap().x, v(&[0.0]));
    }

    #[test]
    fn alrhb_examples() {
        let obj = half_square();
        let o = alrhb_step(&SolverState::initial(v(&[2.0])), &obj, &cfg(Method::Alrhb)).unwrap();
        assert_eq!(o.report.alpha, 1.0);
        assert_eq!(o.next.unwrap().x, v(&[0.0]));

        // gap = 0 with m = 0 collapses to 1/(2L): needs a nonzero gradient at
        // zero gap, so use an objective whose declared f_* equals f(x).
        let flat = make_quadratic(&[2.0]).unwrap();
        let shifted = Objective::new(1, move |x| flat.value(x))
            .with_gradient(|x| x * 2.0)
            .with_lipschitz(2.0)
            .with_min_value(1.0);
        let o = alrhb_step(&SolverState::initial(v(&[1.0])), &shifted, &cfg(Method::Alrhb)).unwrap();
        assert_eq!(o.report.alpha, 0.25);
    }

    #[test]
    fn run_solver_stopping_rules() {
        let obj = half_square();
        let x0 = v(&[2.0]);
        let mut c = cfg(Method::Ahb);
        c.max_iters = 0;
        let t = run_solver(&obj, &c, &x0).unwrap();
        assert_eq!(t.records().len(), 1);
        assert_eq!(t.meta.stop_reason, StopReason::MaxIters);

        let mut c = cfg(Method::Ahb);
        c.gap_tol = f64::INFINITY;
        let t = run_solver(&obj, &c, &x0).unwrap();
        assert_eq!(t.records().len(), 1);
        assert_eq!(t.meta.stop_reason, StopReason::GapTolerance);

        let mut c = cfg(Method::Ahb);
        c.mu0 = 0.0;
        let t = run_solver(&obj, &c, &x0).unwrap();
        let gaps: Vec<f64> = t.records().iter().map(|r| r.gap).collect();
        assert_eq!(gaps, vec![2.0, 0.0]);
    }

    #[test]
    fn run_solver_records_every_n_plus_final() {
        let obj = make_quadratic(&[1.0, 10.0]).unwrap();
        let mut c = cfg(Method::Gd);
        c.max_iters = 23;
        c.record_every = 5;
        let t = run_solver(&obj, &c, &v(&[1.0, 1.0])).unwrap();
        let ks: Vec<usize> = t.records().iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![0, 5, 10, 15, 20, 23]);
    }

    #[test]
    fn run_solver_capability_errors() {
        let abs = make_abs_value();
        assert!(matches!(
            run_solver(&abs, &cfg(Method::Gd), &v(&[1.0])),
            Err(Error::MissingCapability("gradient"))
        ));
        let no_fstar = Objective::new(1, |x| 0.5 * x[0] * x[0])
            .with_gradient(|x| x.clone())
            .with_lipschitz(1.0);
        assert!(matches!(
            run_solver(&no_fstar, &cfg(Method::Ahb), &v(&[1.0])),
            Err(Error::MissingCapability("min_value"))
        ));
        assert!(run_solver(&no_fstar, &cfg(Method::Gd), &v(&[1.0])).is_ok());
    }

    #[test]
    fn run_solver_domain_check() {
        let p = make_power(4.0, 1, 4.0).unwrap();
        let t = run_solver(&p, &cfg(Method::Ahb), &v(&[2.0])).unwrap();
        assert_eq!(t.meta.locality_radius, Some(4.0));
        assert!(matches!(
            run_solver(&p, &cfg(Method::Ahb), &v(&[2.5])),
            Err(Error::OutsideDomain(_))
        ));
    }

    #[test]
    fn numerical_failure_carries_iteration() {
        let bad = Objective::new(1, |x| if x[0].abs() < 1.0 { f64::NAN } else { x[0] * x[0] })
            .with_gradient(|x| x * 2.0)
            .with_lipschitz(2.0);
        let mut c = cfg(Method::Gd);
        c.gd_mu = 0.5;
        match run_solver(&bad, &c, &v(&[4.0])) {
            Err(Error::NumericalFailure { k, .. }) => assert_eq!(k, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_json_defaults_and_infinity() {
        let c: SolverConfig = serde_json::from_str(r#"{"method":"nesterov","beta_cap":null}"#).unwrap();
        assert_eq!(c.method, Method::Nesterov);
        assert_eq!(c.beta_cap, f64::INFINITY);
        assert_eq!(c.mu0, 0.96);
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"beta_cap\":null"));
        let back: SolverConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let bad = SolverConfig {
            mu0: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}

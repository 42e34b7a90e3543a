//! Objective functions and the built-in test problems.
//!
//! An [`Objective`] is a bundle of optional capabilities around a value
//! function: gradient, exact prox, known minimum, distance to the solution
//! set and a Lipschitz bound for the gradient. Solvers and certifiers check
//! for the capabilities they need and fail with [`Error::MissingCapability`]
//! otherwise.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{power_iteration, random_orthonormal, LinearOperator, SpectralEstimate};
use crate::radon::{make_radon, Phantom};

pub type Vector = DVector<f64>;

type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type ProxFn = Arc<dyn Fn(f64, &Vector) -> Vector + Send + Sync>;

/// Data behind a least-squares objective `½‖Ax − y‖²`.
pub struct LeastSquaresData {
    pub operator: Arc<dyn LinearOperator>,
    pub rhs: Vector,
    pub x_true: Vector,
    /// `A = U·diag(σ)·Vᵀ` when the matrix was synthesised from its SVD.
    pub factors: Option<SvdFactors>,
}

#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub singular_values: Vector,
    pub v: DMatrix<f64>,
}

/// A black-box objective together with whatever structural knowledge is
/// available for it.
///
/// Immutable after construction; cloning shares the underlying closures.
#[derive(Clone)]
pub struct Objective {
    dim: usize,
    value: ScalarFn,
    gradient: Option<VectorFn>,
    subgradient_norm: Option<ScalarFn>,
    prox: Option<ProxFn>,
    solution_distance: Option<ScalarFn>,
    lipschitz: Option<f64>,
    min_value: Option<f64>,
    convex: bool,
    domain_radius: Option<f64>,
    minimizer: Option<Vector>,
    holder_exponent: Option<f64>,
    least_squares: Option<Arc<LeastSquaresData>>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("dim", &self.dim)
            .field("gradient", &self.gradient.is_some())
            .field("prox", &self.prox.is_some())
            .field("solution_oracle", &self.solution_distance.is_some())
            .field("lipschitz", &self.lipschitz)
            .field("min_value", &self.min_value)
            .field("convex", &self.convex)
            .field("domain_radius", &self.domain_radius)
            .finish()
    }
}

impl Objective {
    pub fn new(dim: usize, value: impl Fn(&Vector) -> f64 + Send + Sync + 'static) -> Self {
        Objective {
            dim,
            value: Arc::new(value),
            gradient: None,
            subgradient_norm: None,
            prox: None,
            solution_distance: None,
            lipschitz: None,
            min_value: None,
            convex: false,
            domain_radius: None,
            minimizer: None,
            holder_exponent: None,
            least_squares: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&Vector) -> Vector + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    /// Registers the norm of the minimal-norm subgradient, `d(0, ∂f(x))`, for
    /// nonsmooth objectives.
    pub fn with_subgradient_norm(mut self, s: impl Fn(&Vector) -> f64 + Send + Sync + 'static) -> Self {
        self.subgradient_norm = Some(Arc::new(s));
        self
    }

    pub fn with_prox(mut self, p: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static) -> Self {
        self.prox = Some(Arc::new(p));
        self
    }

    pub fn with_solution_oracle(mut self, d: impl Fn(&Vector) -> f64 + Send + Sync + 'static) -> Self {
        self.solution_distance = Some(Arc::new(d));
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_min_value(mut self, f_star: f64) -> Self {
        self.min_value = Some(f_star);
        self
    }

    pub fn with_convex(mut self, convex: bool) -> Self {
        self.convex = convex;
        self
    }

    pub fn with_domain_radius(mut self, r: f64) -> Self {
        self.domain_radius = Some(r);
        self
    }

    /// A known point of the solution set.
    pub fn with_minimizer(mut self, x: Vector) -> Self {
        self.minimizer = Some(x);
        self
    }

    /// Exponent `α` in `d(x, S) ≤ C·(f(x) − f_*)^α` near the solution set.
    pub fn with_holder_exponent(mut self, alpha: f64) -> Self {
        self.holder_exponent = Some(alpha);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.gradient
            .as_ref()
            .map(|g| g(x))
            .ok_or(Error::MissingCapability("gradient"))
    }

    /// `d(0, ∂f(x))`: the registered subgradient norm, or `‖∇f(x)‖` for smooth
    /// objectives.
    pub fn subgradient_norm(&self, x: &Vector) -> Result<f64> {
        if let Some(s) = &self.subgradient_norm {
            return Ok(s(x));
        }
        Ok(self.gradient(x)?.norm())
    }

    pub fn has_exact_prox(&self) -> bool {
        self.prox.is_some()
    }

    /// Closed-form `prox_{λf}(x)` when registered.
    pub fn exact_prox(&self, lambda: f64, x: &Vector) -> Option<Vector> {
        self.prox.as_ref().map(|p| p(lambda, x))
    }

    pub fn has_solution_oracle(&self) -> bool {
        self.solution_distance.is_some()
    }

    pub fn distance_to_solutions(&self, x: &Vector) -> Result<f64> {
        self.solution_distance
            .as_ref()
            .map(|d| d(x))
            .ok_or(Error::MissingCapability("solution_oracle"))
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn min_value(&self) -> Option<f64> {
        self.min_value
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn domain_radius(&self) -> Option<f64> {
        self.domain_radius
    }

    pub fn minimizer(&self) -> Option<&Vector> {
        self.minimizer.as_ref()
    }

    pub fn holder_exponent(&self) -> Option<f64> {
        self.holder_exponent
    }

    pub fn least_squares(&self) -> Option<&LeastSquaresData> {
        self.least_squares.as_deref()
    }

    pub(crate) fn without_solution_oracle(mut self) -> Self {
        self.solution_distance = None;
        self
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

/// `f(x) = ½ Σ λ_i x_i²`.
pub fn make_quadratic(spectrum: &[f64]) -> Result<Objective> {
    if spectrum.is_empty() {
        return Err(invalid("quadratic spectrum is empty"));
    }
    if let Some(bad) = spectrum.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(invalid(format!("quadratic spectrum entry {bad} is not positive")));
    }
    let lam = Vector::from_column_slice(spectrum);
    let l_max = spectrum.iter().cloned().fold(f64::MIN, f64::max);
    let dim = spectrum.len();

    let (lv, lg, lp) = (lam.clone(), lam.clone(), lam);
    Ok(Objective::new(dim, move |x| 0.5 * x.iter().zip(lv.iter()).map(|(xi, li)| li * xi * xi).sum::<f64>())
        .with_gradient(move |x| x.component_mul(&lg))
        .with_prox(move |t, x| x.zip_map(&lp, |xi, li| xi / (1.0 + t * li)))
        .with_solution_oracle(|x| x.norm())
        .with_lipschitz(l_max)
        .with_min_value(0.0)
        .with_convex(true)
        .with_minimizer(Vector::zeros(dim))
        .with_holder_exponent(0.5))
}

/// `f(x) = ½‖Ax − y‖²` with `A = U·diag(σ)·Vᵀ` built from seeded orthonormal
/// factors and `y = A x†`, `‖x†‖ = 10`.
pub fn make_least_squares(rows: usize, cols: usize, singular_values: &[f64], seed: u64) -> Result<Objective> {
    if rows == 0 || cols == 0 {
        return Err(invalid("least_squares needs rows, cols > 0"));
    }
    let k = rows.min(cols);
    if singular_values.len() != k {
        return Err(invalid(format!(
            "least_squares expects {k} singular values, got {}",
            singular_values.len()
        )));
    }
    if singular_values.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(invalid("singular values must be positive"));
    }
    if singular_values.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("singular values must be nonincreasing"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthonormal(rows, k, &mut rng);
    let v = random_orthonormal(cols, k, &mut rng);
    let sigma = Vector::from_column_slice(singular_values);
    let a = &u * DMatrix::from_diagonal(&sigma) * v.transpose();

    let dir = Vector::from_fn(cols, |_, _| StandardNormal.sample(&mut rng));
    let x_true = dir.normalize() * 10.0;
    let rhs = &a * &x_true;
    let lipschitz = singular_values[0] * singular_values[0];

    let data = LeastSquaresData {
        operator: Arc::new(a),
        rhs,
        x_true,
        factors: Some(SvdFactors {
            u,
            singular_values: sigma,
            v,
        }),
    };
    let full_column_rank = rows >= cols;
    let mut obj = least_squares_objective(data, lipschitz);
    if !full_column_rank {
        obj = obj.without_solution_oracle();
        obj.minimizer = None;
    }
    Ok(obj)
}

/// Wraps least-squares data into an objective. Assumes the system is
/// consistent (`y = A x†`) so that `f_* = 0` and `x†` is a minimizer.
pub fn least_squares_objective(data: LeastSquaresData, lipschitz: f64) -> Objective {
    let data = Arc::new(data);
    let (dv, dg, dd) = (data.clone(), data.clone(), data.clone());
    let mut obj = Objective::new(data.operator.ncols(), move |x| {
        let r = dv.operator.apply(x) - &dv.rhs;
        0.5 * r.norm_squared()
    })
    .with_gradient(move |x| {
        let r = dg.operator.apply(x) - &dg.rhs;
        dg.operator.apply_transpose(&r)
    })
    .with_solution_oracle(move |x| (x - &dd.x_true).norm())
    .with_lipschitz(lipschitz)
    .with_min_value(0.0)
    .with_convex(true)
    .with_minimizer(data.x_true.clone())
    .with_holder_exponent(0.5);
    obj.least_squares = Some(data);
    obj
}

/// `f(x) = (1/p)‖x‖^p`, `p ≥ 2`. The gradient is only Lipschitz on bounded
/// sets; the bound `(p−1)·R^{p−2}` is valid on the ball of radius `R`.
///
/// Heavy-ball iterates with the adaptive momentum never leave
/// `B(x̂, ‖x₀ − x̂‖)`, so a ball-local constant is enough as long as the start
/// point lies inside the ball.
pub fn make_power(p: f64, dim: usize, ball_radius: f64) -> Result<Objective> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(invalid(format!("power exponent p = {p} must be >= 2")));
    }
    if dim == 0 {
        return Err(invalid("power dim must be positive"));
    }
    if !(ball_radius > 0.0 && ball_radius.is_finite()) {
        return Err(invalid("ball_radius must be positive"));
    }
    Ok(Objective::new(dim, move |x| x.norm().powf(p) / p)
        .with_gradient(move |x| {
            let n = x.norm();
            if n == 0.0 {
                Vector::zeros(x.len())
            } else {
                x * n.powf(p - 2.0)
            }
        })
        .with_solution_oracle(|x| x.norm())
        .with_lipschitz((p - 1.0) * ball_radius.powf(p - 2.0))
        .with_domain_radius(ball_radius)
        .with_min_value(0.0)
        .with_convex(true)
        .with_minimizer(Vector::zeros(dim))
        .with_holder_exponent(1.0 / p))
}

/// `f(x) = |x|` on the real line.
pub fn make_abs_value() -> Objective {
    Objective::new(1, |x| x[0].abs())
        .with_subgradient_norm(|x| if x[0] == 0.0 { 0.0 } else { 1.0 })
        .with_prox(|t, x| Vector::from_element(1, x[0].signum() * (x[0].abs() - t).max(0.0)))
        .with_solution_oracle(|x| x[0].abs())
        .with_min_value(0.0)
        .with_convex(true)
        .with_minimizer(Vector::zeros(1))
        .with_holder_exponent(1.0)
}

/// Power iteration estimate of `L = ‖A‖²` for a least-squares objective,
/// inflated by [`crate::linalg::LIPSCHITZ_SAFETY`].
pub fn lipschitz_estimate(obj: &Objective, iters: usize, tol: f64) -> Result<SpectralEstimate> {
    if iters == 0 {
        return Err(Error::param("iters", "must be positive"));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let data = obj.least_squares().ok_or(Error::MissingCapability("operator"))?;
    Ok(power_iteration(data.operator.as_ref(), iters, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    LeastSquares,
    Power,
    AbsValue,
    Radon,
}

/// Serializable recipe for a built-in objective: `{"kind", "params", "seed"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    #[serde(default = "empty_params")]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: u64,
}

fn empty_params() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadraticParams {
    #[serde(default = "default_spectrum")]
    spectrum: Vec<f64>,
}

fn default_spectrum() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeastSquaresParams {
    #[serde(default = "default_ls_size")]
    rows: usize,
    #[serde(default = "default_ls_size")]
    cols: usize,
    /// Explicit spectrum; otherwise `σ_i = i^{-sigma_decay}`.
    singular_values: Option<Vec<f64>>,
    #[serde(default = "default_decay")]
    sigma_decay: f64,
    /// Standard deviation of Gaussian noise added to `y`. With noise the
    /// optimal value is treated as unknown.
    #[serde(default)]
    noise: f64,
}

fn default_ls_size() -> usize {
    200
}

fn default_decay() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerParams {
    #[serde(default = "default_p")]
    p: f64,
    #[serde(default = "default_one")]
    dim: usize,
    #[serde(default = "default_radius")]
    ball_radius: f64,
}

fn default_p() -> f64 {
    4.0
}

fn default_one() -> usize {
    1
}

fn default_radius() -> f64 {
    4.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadonParams {
    #[serde(default = "default_grid")]
    grid_n: usize,
    #[serde(default = "default_angles")]
    num_angles: usize,
    #[serde(default = "default_rays")]
    rays_per_angle: usize,
    #[serde(default)]
    phantom: Phantom,
}

fn default_grid() -> usize {
    32
}

fn default_angles() -> usize {
    36
}

fn default_rays() -> usize {
    48
}

/// `σ_i = i^{-decay}`, `i = 1..=n`.
pub fn decaying_spectrum(n: usize, decay: f64) -> Vec<f64> {
    (1..=n).map(|i| (i as f64).powf(-decay)).collect()
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, params: serde_json::Value, seed: u64) -> Self {
        ProblemSpec { kind, params, seed }
    }

    fn params<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        let params = if self.params.is_null() {
            empty_params()
        } else {
            self.params.clone()
        };
        serde_json::from_value(params).map_err(|e| invalid(format!("{:?} params: {e}", self.kind)))
    }

    /// Instantiates the objective. Same spec, same objective, bit for bit.
    pub fn build(&self) -> Result<Objective> {
        match self.kind {
            ProblemKind::Quadratic => {
                let p: QuadraticParams = self.params()?;
                make_quadratic(&p.spectrum)
            }
            ProblemKind::LeastSquares => {
                let p: LeastSquaresParams = self.params()?;
                let sv = match p.singular_values {
                    Some(sv) => sv,
                    None => decaying_spectrum(p.rows.min(p.cols), p.sigma_decay),
                };
                let obj = make_least_squares(p.rows, p.cols, &sv, self.seed)?;
                if p.noise == 0.0 {
                    Ok(obj)
                } else {
                    with_noisy_rhs(&obj, p.noise, self.seed)
                }
            }
            ProblemKind::Power => {
                let p: PowerParams = self.params()?;
                make_power(p.p, p.dim, p.ball_radius)
            }
            ProblemKind::AbsValue => make_abs_value_checked(&self.params),
            ProblemKind::Radon => {
                let p: RadonParams = self.params()?;
                make_radon(p.grid_n, p.num_angles, p.rays_per_angle, p.phantom)
            }
        }
    }
}

/// Replaces `y` by `y + noise·e`, `e` standard normal from its own seeded
/// stream. `f_*`, the minimiser and the distance oracle are dropped.
fn with_noisy_rhs(obj: &Objective, noise: f64, seed: u64) -> Result<Objective> {
    if !(noise > 0.0 && noise.is_finite()) {
        return Err(invalid(format!("noise {noise} must be nonnegative and finite")));
    }
    let data = obj.least_squares().expect("least-squares objective");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let rhs = Vector::from_fn(data.rhs.len(), |i, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        data.rhs[i] + noise * e
    });
    let noisy = LeastSquaresData {
        operator: data.operator.clone(),
        rhs,
        x_true: data.x_true.clone(),
        factors: data.factors.clone(),
    };
    let mut out = least_squares_objective(noisy, obj.lipschitz().expect("least squares has L"))
        .without_solution_oracle();
    out.min_value = None;
    out.minimizer = None;
    Ok(out)
}

fn make_abs_value_checked(params: &serde_json::Value) -> Result<Objective> {
    match params {
        serde_json::Value::Null => Ok(make_abs_value()),
        serde_json::Value::Object(m) if m.is_empty() => Ok(make_abs_value()),
        _ => Err(invalid("abs_value takes no params")),
    }
}

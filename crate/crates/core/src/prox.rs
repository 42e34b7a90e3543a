//! Proximal maps, the proximal point algorithm and the Moreau envelope.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::objective::{Objective, Vector};
use crate::trace::write_atomic;

pub const INNER_MAX_ITERS: usize = 100_000;
pub const MAX_GRID_POINTS: usize = 1_000_000;

/// `prox_{τf}(x) = argmin_z f(z) + ‖z − x‖²/(2τ)`.
///
/// Uses the registered closed form when there is one. Otherwise, for smooth
/// convex `f`, runs gradient descent with step `1/(L + 1/τ)` on the
/// `1/τ`-strongly convex inner problem until its gradient norm drops below
/// `1e-12·(1 + ‖x‖)/τ`.
pub fn prox_point(obj: &Objective, tau: f64, x: &Vector) -> Result<Vector> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", format!("{tau} must be positive")));
    }
    if let Some(p) = obj.exact_prox(tau, x) {
        return Ok(p);
    }
    if !obj.is_convex() {
        return Err(Error::InvalidInput(
            "prox without a closed form needs a convex objective".into(),
        ));
    }
    if !obj.has_gradient() {
        return Err(Error::MissingCapability("prox"));
    }
    let l = obj.lipschitz().ok_or(Error::MissingCapability("lipschitz"))?;
    let step = 1.0 / (l + 1.0 / tau);
    let tol = 1e-12 * (1.0 + x.norm()) / tau;

    let mut z = x.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..INNER_MAX_ITERS {
        let mut g = obj.gradient(&z)?;
        g.axpy(1.0 / tau, &(&z - x), 1.0);
        residual = g.norm();
        if residual <= tol {
            return Ok(z);
        }
        z.axpy(-step, &g, 1.0);
    }
    Err(Error::InnerSolve {
        iters: INNER_MAX_ITERS,
        residual,
    })
}

/// A proximal point sequence `x_0, x_1, …` with `f(x_k)` and
/// `‖x_k − x_{k−1}‖` (zero for `k = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct PpaRun {
    pub tau: f64,
    pub points: Vec<Vector>,
    pub values: Vec<f64>,
    pub step_norms: Vec<f64>,
}

impl PpaRun {
    fn start(tau: f64, obj: &Objective, x0: Vector) -> Self {
        PpaRun {
            tau,
            values: vec![obj.value(&x0)],
            points: vec![x0],
            step_norms: vec![0.0],
        }
    }

    fn push(&mut self, obj: &Objective, x: Vector) {
        let prev = self.points.last().expect("run starts with x0");
        self.step_norms.push((&x - prev).norm());
        self.values.push(obj.value(&x));
        self.points.push(x);
    }

    /// Total path length `Σ ‖x_{k+1} − x_k‖`.
    pub fn path_length(&self) -> f64 {
        self.step_norms.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let dim = self.points.first().map_or(0, |p| p.len());
        let mut out = String::from("k");
        for i in 0..dim {
            write!(out, ",x{i}").unwrap();
        }
        out.push_str(",fval,step_norm\n");
        for (k, ((p, f), s)) in self.points.iter().zip(&self.values).zip(&self.step_norms).enumerate() {
            write!(out, "{k}").unwrap();
            for v in p.iter() {
                write!(out, ",{v:.16e}").unwrap();
            }
            writeln!(out, ",{f:.16e},{s:.16e}").unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// `K` proximal point steps from `x0` on a convex objective.
pub fn ppa_run(obj: &Objective, tau: f64, x0: &Vector, iters: usize) -> Result<PpaRun> {
    if !obj.is_convex() {
        return Err(Error::InvalidInput("ppa_run needs a convex objective".into()));
    }
    let mut run = PpaRun::start(tau, obj, x0.clone());
    for _ in 0..iters {
        let next = prox_point(obj, tau, run.points.last().unwrap())?;
        run.push(obj, next);
    }
    Ok(run)
}

/// Axis-aligned grid for exhaustive inner minimisation in one or two
/// dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points_per_axis: usize,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, points_per_axis: usize) -> Result<Self> {
        let g = GridSpec {
            lo,
            hi,
            points_per_axis,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.saturating_pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !(dim == 1 || dim == 2) || self.hi.len() != dim {
            return Err(Error::param("grid", "dimension must be 1 or 2 with matching bounds"));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l < h)) {
            return Err(Error::param("grid", "need lo < hi on every axis"));
        }
        if self.points_per_axis < 2 {
            return Err(Error::param("grid", "need at least 2 points per axis"));
        }
        if self.len() > MAX_GRID_POINTS {
            return Err(Error::DeskScaleLimit(format!(
                "grid has {} points, limit is {MAX_GRID_POINTS}",
                self.len()
            )));
        }
        Ok(())
    }

    fn axis(&self, a: usize) -> Vec<f64> {
        let n = self.points_per_axis;
        let (lo, hi) = (self.lo[a], self.hi[a]);
        (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect()
    }

    /// Grid points in lexicographic index order (first axis slowest).
    pub fn points(&self) -> Vec<Vector> {
        match self.dim() {
            1 => self.axis(0).into_iter().map(|x| Vector::from_element(1, x)).collect(),
            _ => {
                let (ax, ay) = (self.axis(0), self.axis(1));
                ax.iter()
                    .flat_map(|&x| ay.iter().map(move |&y| Vector::from_column_slice(&[x, y])))
                    .collect()
            }
        }
    }
}

/// Proximal point iteration for a possibly nonconvex objective, with each
/// inner argmin taken by exhaustive search over `grid` plus the previous
/// iterate. Ties go to the lowest grid index; the previous iterate is last in
/// the candidate order, so it is kept only when strictly better. Including it
/// guarantees `f(x_k) + ‖x_k − x_{k−1}‖²/(2τ) ≤ f(x_{k−1})`.
pub fn ppa_run_nonconvex(obj: &Objective, tau: f64, x0: &Vector, iters: usize, grid: &GridSpec) -> Result<PpaRun> {
    grid.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", format!("{tau} must be positive")));
    }
    if x0.len() != grid.dim() || obj.dim() != grid.dim() {
        return Err(Error::InvalidInput("grid, objective and start point dimensions differ".into()));
    }
    let candidates = grid.points();
    let fvals: Vec<f64> = candidates.iter().map(|z| obj.value(z)).collect();

    let mut run = PpaRun::start(tau, obj, x0.clone());
    for _ in 0..iters {
        let prev = run.points.last().unwrap().clone();
        let f_prev = *run.values.last().unwrap();
        let mut best = (f_prev, None);
        for (i, (z, fz)) in candidates.iter().zip(&fvals).enumerate() {
            let score = fz + (z - &prev).norm_squared() / (2.0 * tau);
            if score < best.0 || (score == best.0 && best.1.is_none()) {
                best = (score, Some(i));
            }
        }
        let next = best.1.map_or(prev, |i| candidates[i].clone());
        run.push(obj, next);
    }
    Ok(run)
}

/// `M_{λf}(x) = f(p) + ‖p − x‖²/(2λ)` with `p = prox_{λf}(x)`.
pub fn moreau_value(obj: &Objective, lambda: f64, x: &Vector) -> Result<f64> {
    let p = prox_point(obj, lambda, x)?;
    Ok(obj.value(&p) + (&p - x).norm_squared() / (2.0 * lambda))
}

/// `∇M_{λf}(x) = (x − prox_{λf}(x))/λ`.
pub fn moreau_gradient(obj: &Objective, lambda: f64, x: &Vector) -> Result<Vector> {
    let p = prox_point(obj, lambda, x)?;
    Ok((x - p) / lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{make_abs_value, make_power, make_quadratic};
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn scalars(run: &PpaRun) -> Vec<f64> {
        run.points.iter().map(|p| p[0]).collect()
    }

    #[test]
    fn prox_examples() {
        let q = make_quadratic(&[1.0]).unwrap();
        assert_eq!(prox_point(&q, 1.0, &v(&[2.0])).unwrap(), v(&[1.0]));
        assert_eq!(prox_point(&make_abs_value(), 0.5, &v(&[0.2])).unwrap(), v(&[0.0]));
        let q = make_quadratic(&[1.0, 10.0]).unwrap();
        let p = prox_point(&q, 0.1, &v(&[1.0, 1.0])).unwrap();
        assert_relative_eq!(p[0], 1.0 / 1.1, max_relative = 1e-15);
        assert_relative_eq!(p[1], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn inner_solver_matches_closed_form() {
        // same quadratic, prox hidden so the gradient fallback runs
        let q = make_quadratic(&[1.0, 10.0]).unwrap();
        let hidden = {
            let (qv, qg) = (q.clone(), q.clone());
            Objective::new(2, move |x| qv.value(x))
                .with_gradient(move |x| qg.gradient(x).unwrap())
                .with_lipschitz(10.0)
                .with_convex(true)
        };
        for tau in [0.01, 0.1, 1.0, 10.0] {
            let x = v(&[1.0, -2.0]);
            let exact = prox_point(&q, tau, &x).unwrap();
            let approx = prox_point(&hidden, tau, &x).unwrap();
            assert!((exact - approx).norm() < 1e-10);
        }
    }

    #[test]
    fn quartic_prox_satisfies_optimality() {
        let p4 = make_power(4.0, 1, 2.0).unwrap();
        for x in [-1.7, -0.3, 0.0, 0.05, 1.2] {
            let z = prox_point(&p4, 0.5, &v(&[x])).unwrap()[0];
            // z³ + (z − x)/τ = 0
            assert!((z.powi(3) + (z - x) / 0.5).abs() < 1e-11, "x={x}");
        }
    }

    #[test]
    fn nonconvex_prox_without_closed_form_is_rejected() {
        let f = Objective::new(1, |x| -x[0] * x[0]).with_gradient(|x| -2.0 * x).with_lipschitz(2.0);
        assert!(prox_point(&f, 1.0, &v(&[1.0])).is_err());
    }

    #[test]
    fn ppa_closed_form_trajectories() {
        let q = make_quadratic(&[1.0]).unwrap();
        let run = ppa_run(&q, 1.0, &v(&[4.0]), 3).unwrap();
        assert_eq!(scalars(&run), vec![4.0, 2.0, 1.0, 0.5]);
        let run = ppa_run(&make_abs_value(), 1.0, &v(&[2.5]), 3).unwrap();
        assert_eq!(scalars(&run), vec![2.5, 1.5, 0.5, 0.0]);
        assert_eq!(run.step_norms, vec![0.0, 1.0, 1.0, 0.5]);
        let run = ppa_run(&q, 1.0, &v(&[0.0]), 5).unwrap();
        assert!(scalars(&run).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn grid_ppa_matches_convex_closed_form() {
        let q = make_quadratic(&[1.0]).unwrap();
        let grid = GridSpec::new(vec![-4.0], vec![4.0], 161).unwrap();
        let run = ppa_run_nonconvex(&q, 1.0, &v(&[4.0]), 3, &grid).unwrap();
        for (got, want) in scalars(&run).iter().zip([4.0, 2.0, 1.0, 0.5]) {
            assert!((got - want).abs() <= 0.05 / 2.0 + 1e-12);
        }
    }

    #[test]
    fn grid_ppa_descends_nonconvex_double_well() {
        let f = Objective::new(1, |x| ((x[0] - 1.0).powi(2)).min((x[0] + 1.0).powi(2) + 0.5));
        let grid = GridSpec::new(vec![-3.0], vec![3.0], 6001).unwrap();
        let run = ppa_run_nonconvex(&f, 0.5, &v(&[0.9]), 30, &grid).unwrap();
        for w in run.values.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for k in 1..run.points.len() {
            let lhs = run.values[k] + run.step_norms[k].powi(2) / (2.0 * 0.5);
            assert!(lhs <= run.values[k - 1]);
        }
        // settles within grid resolution (spacing 1e-3) of the right-hand well
        assert!((run.points.last().unwrap()[0] - 1.0).abs() <= 2e-3);

        let run = ppa_run_nonconvex(&f, 0.5, &v(&[0.9]), 0, &grid).unwrap();
        assert_eq!(run.points, vec![v(&[0.9])]);
    }

    #[test]
    fn grid_ppa_two_dimensional() {
        let f = Objective::new(2, |x| (x[0] - 0.5).powi(2) + 2.0 * (x[1] + 0.25).powi(2));
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![1.0, 1.0], 81).unwrap();
        let run = ppa_run_nonconvex(&f, 1.0, &v(&[-1.0, 1.0]), 60, &grid).unwrap();
        let last = run.points.last().unwrap();
        assert!((last[0] - 0.5).abs() < 1e-12 && (last[1] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn grid_limits() {
        assert!(matches!(
            GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], 1001),
            Err(Error::DeskScaleLimit(_))
        ));
        assert!(GridSpec::new(vec![0.0; 3], vec![1.0; 3], 3).is_err());
        assert!(GridSpec::new(vec![1.0], vec![0.0], 3).is_err());
    }

    #[test]
    fn moreau_examples() {
        let q = make_quadratic(&[1.0]).unwrap();
        assert_relative_eq!(moreau_value(&q, 1.0, &v(&[2.0])).unwrap(), 1.0);
        assert_eq!(moreau_gradient(&q, 1.0, &v(&[2.0])).unwrap(), v(&[1.0]));
        let a = make_abs_value();
        assert_relative_eq!(moreau_value(&a, 1.0, &v(&[0.5])).unwrap(), 0.125);
        assert_eq!(moreau_gradient(&a, 1.0, &v(&[3.0])).unwrap(), v(&[1.0]));
        assert_eq!(moreau_value(&a, 1.0, &v(&[0.0])).unwrap(), 0.0);
        assert_eq!(moreau_gradient(&q, 0.3, &v(&[0.0])).unwrap(), v(&[0.0]));
    }

    #[test]
    fn ppa_csv_layout() {
        let run = ppa_run(&make_abs_value(), 1.0, &v(&[2.5]), 1).unwrap();
        let csv = run.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("k,x0,fval,step_norm"));
        assert!(lines.next().unwrap().starts_with("0,2.5"));
        assert_eq!(csv.lines().count(), 3);
    }
}

//! Parallel-beam line-integral discretisation over an `n × n` pixel grid.
//!
//! The image lives on `[-1, 1]²`; pixel `(ix, iy)` covers
//! `[-1 + ix·w, -1 + (ix+1)·w] × [-1 + iy·w, -1 + (iy+1)·w]` with `w = 2/n` and
//! is stored at index `iy·n + ix`. Angle `a` is `θ = aπ/num_angles`; ray `j`
//! runs along `(cos θ, sin θ)` at signed offset `-1 + (j + ½)·2/rays` along the
//! normal `(-sin θ, cos θ)`. Matrix entries are exact intersection lengths;
//! a ray running exactly along a pixel edge is credited to the pixel on the
//! positive side of that edge.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{power_iteration, CsrMatrix};
use crate::objective::{least_squares_objective, LeastSquaresData, Objective};

pub const MAX_GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phantom {
    #[default]
    Blocks,
    Disks,
}

impl Phantom {
    /// Piecewise-constant density at a point of `[-1, 1]²`.
    pub fn density(self, x: f64, y: f64) -> f64 {
        match self {
            Phantom::Blocks => {
                let mut v = 0.0;
                if x.abs() < 0.7 && y.abs() < 0.7 {
                    v += 1.0;
                }
                if (-0.5..0.1).contains(&x) && (-0.3..0.45).contains(&y) {
                    v += 0.5;
                }
                if (0.2..0.55).contains(&x) && (-0.55..-0.1).contains(&y) {
                    v += 1.5;
                }
                v
            }
            Phantom::Disks => {
                let disk = |cx: f64, cy: f64, r: f64| (x - cx).powi(2) + (y - cy).powi(2) < r * r;
                let mut v = 0.0;
                if disk(0.0, 0.0, 0.85) {
                    v += 1.0;
                }
                if disk(-0.3, 0.25, 0.25) {
                    v += 0.8;
                }
                if disk(0.35, -0.2, 0.18) {
                    v -= 0.5;
                }
                if disk(0.1, 0.5, 0.1) {
                    v += 1.2;
                }
                v
            }
        }
    }

    /// Phantom sampled at pixel centres, in grid storage order.
    pub fn rasterize(self, n: usize) -> DVector<f64> {
        let w = 2.0 / n as f64;
        DVector::from_fn(n * n, |idx, _| {
            let (ix, iy) = (idx % n, idx / n);
            let cx = -1.0 + (ix as f64 + 0.5) * w;
            let cy = -1.0 + (iy as f64 + 0.5) * w;
            self.density(cx, cy)
        })
    }
}

/// Geometry of one ray: a point on the line and a unit direction.
#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: (f64, f64),
    pub direction: (f64, f64),
}

pub fn ray(angle_index: usize, num_angles: usize, ray_index: usize, rays_per_angle: usize) -> Ray {
    let theta = angle_index as f64 * PI / num_angles as f64;
    let (s, c) = theta.sin_cos();
    let offset = -1.0 + (ray_index as f64 + 0.5) * 2.0 / rays_per_angle as f64;
    Ray {
        origin: (-s * offset, c * offset),
        direction: (c, s),
    }
}

const EPS: f64 = 1e-14;

/// Parameter interval `[t0, t1]` of the ray inside `[lo, hi]` along one axis.
fn slab(o: f64, d: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if d.abs() < EPS {
        if o >= lo && o <= hi {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            None
        }
    } else {
        let (a, b) = ((lo - o) / d, (hi - o) / d);
        Some((a.min(b), a.max(b)))
    }
}

/// Intersections of a ray with the pixel grid, as `(pixel index, length)`.
/// Walks the sorted crossings with the grid lines and attributes each
/// segment to the pixel containing its midpoint.
pub fn trace_ray(r: &Ray, n: usize) -> Vec<(usize, f64)> {
    let (ox, oy) = r.origin;
    let (dx, dy) = r.direction;
    let (Some((ax0, ax1)), Some((ay0, ay1))) = (slab(ox, dx, -1.0, 1.0), slab(oy, dy, -1.0, 1.0)) else {
        return Vec::new();
    };
    let t_in = ax0.max(ay0);
    let t_out = ax1.min(ay1);
    if !(t_out - t_in > EPS) {
        return Vec::new();
    }

    let w = 2.0 / n as f64;
    let mut ts = vec![t_in, t_out];
    for i in 0..=n {
        let g = -1.0 + i as f64 * w;
        if dx.abs() >= EPS {
            let t = (g - ox) / dx;
            if t > t_in && t < t_out {
                ts.push(t);
            }
        }
        if dy.abs() >= EPS {
            let t = (g - oy) / dy;
            if t > t_in && t < t_out {
                ts.push(t);
            }
        }
    }
    ts.sort_by(f64::total_cmp);

    let cell = |c: f64| (((c + 1.0) / w).floor() as isize).clamp(0, n as isize - 1) as usize;
    let mut out: Vec<(usize, f64)> = Vec::new();
    for seg in ts.windows(2) {
        let len = seg[1] - seg[0];
        if len <= EPS {
            continue;
        }
        let tm = 0.5 * (seg[0] + seg[1]);
        let idx = cell(oy + tm * dy) * n + cell(ox + tm * dx);
        match out.last_mut() {
            Some((last, l)) if *last == idx => *l += len,
            _ => out.push((idx, len)),
        }
    }
    out
}

/// Sparse projection matrix, one row per `(angle, ray)` in angle-major order.
pub fn projection_matrix(grid_n: usize, num_angles: usize, rays_per_angle: usize) -> CsrMatrix {
    let mut rows = Vec::with_capacity(num_angles * rays_per_angle);
    for a in 0..num_angles {
        for j in 0..rays_per_angle {
            rows.push(trace_ray(&ray(a, num_angles, j, rays_per_angle), grid_n));
        }
    }
    CsrMatrix::from_rows(grid_n * grid_n, rows)
}

/// Least-squares tomography objective `½‖Ax − y‖²` with `y = A x†` for the
/// chosen phantom. `L` comes from power iteration on `AᵀA`.
pub fn make_radon(grid_n: usize, num_angles: usize, rays_per_angle: usize, phantom: Phantom) -> Result<Objective> {
    if grid_n == 0 || num_angles == 0 || rays_per_angle == 0 {
        return Err(Error::InvalidSpec("radon sizes must be positive".into()));
    }
    if grid_n > MAX_GRID {
        return Err(Error::DeskScaleLimit(format!("grid_n = {grid_n} exceeds {MAX_GRID}")));
    }
    let a = projection_matrix(grid_n, num_angles, rays_per_angle);
    let x_true = phantom.rasterize(grid_n);
    let rhs = crate::linalg::LinearOperator::apply(&a, &x_true);
    let lipschitz = power_iteration(&a, 5000, 1e-10).value;
    let data = LeastSquaresData {
        operator: Arc::new(a),
        rhs,
        x_true,
        factors: None,
    };
    // The projection matrix is typically rank deficient, so x† is one minimizer
    // but not the whole solution set.
    let mut obj = least_squares_objective(data, lipschitz);
    obj = obj.without_solution_oracle();
    Ok(obj)
}

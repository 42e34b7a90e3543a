//! Matrix-free linear operators and the spectral-norm estimate used to pick
//! step sizes for least-squares objectives.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Anything that can apply `A` and `Aᵀ` to a vector.
pub trait LinearOperator: Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;
    fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }

    fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        self.tr_mul(y)
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Entries within a
    /// row are sorted by column and duplicates are summed.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                assert!(c < ncols, "column index {c} out of range");
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs stored for row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }
}

impl LinearOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.nrows,
            (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum::<f64>()),
        )
    }

    fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols);
        for i in 0..self.nrows {
            let yi = y[i];
            if yi != 0.0 {
                for (j, v) in self.row(i) {
                    out[j] += v * yi;
                }
            }
        }
        out
    }
}

/// Safety factor applied to power-iteration estimates of `‖A‖²`. Over-estimating
/// L keeps `(1+μ0)/L` an admissible step.
pub const LIPSCHITZ_SAFETY: f64 = 1.01;

const POWER_ITERATION_SEED: u64 = 0x5eed_1ab5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    /// Inflated estimate of `‖AᵀA‖ = ‖A‖²`.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration on `AᵀA` from a seeded Gaussian start. Stops when the
/// Rayleigh quotient changes by less than `tol` relative.
pub fn power_iteration(op: &dyn LinearOperator, iters: usize, tol: f64) -> SpectralEstimate {
    let n = op.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let norm = v.norm();
    if norm == 0.0 {
        return SpectralEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    v /= norm;

    let mut estimate = 0.0_f64;
    for it in 1..=iters {
        let w = op.apply_transpose(&op.apply(&v));
        let next = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return SpectralEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        let change = (next - estimate).abs();
        estimate = next;
        v = w / wn;
        if change <= tol * estimate.abs() {
            return SpectralEstimate {
                value: estimate * LIPSCHITZ_SAFETY,
                iterations: it,
                converged: true,
            };
        }
    }
    SpectralEstimate {
        value: estimate * LIPSCHITZ_SAFETY,
        iterations: iters,
        converged: false,
    }
}

/// Orthonormal `rows × cols` factor (`cols ≤ rows`) from the QR decomposition of
/// a seeded standard-normal matrix, with columns sign-fixed so that `R` has a
/// nonnegative diagonal.
pub fn random_orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    debug_assert!(cols <= rows);
    let g = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut *rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn csr_matches_dense() {
        let m = CsrMatrix::from_rows(3, vec![vec![(2, 1.0), (0, 2.0)], vec![], vec![(1, -1.0), (1, 0.5)]]);
        let d = m.to_dense();
        assert_eq!(m.nnz(), 3);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(m.apply(&x), &d * &x);
        let y = DVector::from_vec(vec![1.0, -1.0, 2.0]);
        assert_eq!(m.apply_transpose(&y), d.tr_mul(&y));
    }

    #[test]
    fn power_iteration_diag() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let est = power_iteration(&a, 1000, 1e-12);
        assert!(est.converged);
        assert_relative_eq!(est.value, 4.04, max_relative = 1e-9);
    }

    #[test]
    fn power_iteration_identity_and_zero() {
        let est = power_iteration(&DMatrix::<f64>::identity(3, 3), 100, 1e-12);
        assert_relative_eq!(est.value, 1.01, max_relative = 1e-12);
        let est = power_iteration(&DMatrix::<f64>::zeros(3, 3), 100, 1e-12);
        assert_eq!(est.value, 0.0);
        assert!(est.converged);
    }

    #[test]
    fn power_iteration_flags_unconverged() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.999, 0.5]));
        let est = power_iteration(&a, 2, 1e-15);
        assert!(!est.converged);
        assert_eq!(est.iterations, 2);
    }

    #[test]
    fn orthonormal_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_orthonormal(5, 3, &mut rng);
        let qtq = q.tr_mul(&q);
        assert!((qtq - DMatrix::<f64>::identity(3, 3)).norm() < 1e-12);
    }
}

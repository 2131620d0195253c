//! Built-in Linpack-style kernel: a dense LU solve with partial pivoting.
//!
//! This is a desk-scale stand-in for HPL so the whole pipeline can run
//! without external binaries. It is deliberately unblocked and single
//! threaded.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pivots whose magnitude falls below this are treated as exact zeros.
pub const SINGULAR_PIVOT: f64 = 1e-300;

/// Scaled-residual acceptance threshold (the HPL default).
pub const RESIDUAL_THRESHOLD: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("matrix is singular: pivot column {column} has no usable entry")]
    SingularMatrix { column: usize },
    #[error("dimension mismatch: matrix order {order}, vector length {len}")]
    DimensionMismatch { order: usize, len: usize },
    #[error("matrix order must be at least 1")]
    Empty,
}

/// Square row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    order: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(order: usize) -> Self {
        Matrix { order, data: vec![0.0; order * order] }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Matrix::zeros(order);
        for i in 0..order {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from rows. Panics if the rows do not form a square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let order = rows.len();
        let mut data = Vec::with_capacity(order * order);
        for row in rows {
            assert_eq!(row.len(), order, "matrix must be square");
            data.extend_from_slice(row);
        }
        Matrix { order, data }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.order).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.order).map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.order + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.order + j]
    }
}

pub fn vec_norm_inf(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// In-place LU factors of a matrix with the row permutation applied.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: Matrix,
    perm: Vec<usize>,
}

impl LuFactors {
    /// Factors `a` as `P·A = L·U` using partial (row) pivoting.
    pub fn factor(a: &Matrix) -> Result<Self, KernelError> {
        let n = a.order();
        if n == 0 {
            return Err(KernelError::Empty);
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (pivot_row, pivot_abs) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs.is_nan() || pivot_abs < SINGULAR_PIVOT {
                return Err(KernelError::SingularMatrix { column: k });
            }
            if pivot_row != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, pivot_row * n + j);
                }
                perm.swap(k, pivot_row);
            }

            let pivot = lu[(k, k)];
            let (upper, lower) = lu.data.split_at_mut((k + 1) * n);
            let pivot_tail = &upper[k * n + k + 1..k * n + n];
            for row in lower.chunks_exact_mut(n) {
                let factor = row[k] / pivot;
                row[k] = factor;
                if factor != 0.0 {
                    for (dst, &src) in row[k + 1..].iter_mut().zip(pivot_tail) {
                        *dst -= factor * src;
                    }
                }
            }
        }
        Ok(LuFactors { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, KernelError> {
        let n = self.lu.order();
        if b.len() != n {
            return Err(KernelError::DimensionMismatch { order: n, len: b.len() });
        }
        // Forward substitution with unit-diagonal L.
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: f64 = row[..i].iter().zip(&y[..i]).map(|(l, y)| l * y).sum();
            y[i] -= s;
        }
        // Back substitution with U.
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = row[i + 1..].iter().zip(&y[i + 1..]).map(|(u, x)| u * x).sum();
            y[i] = (y[i] - s) / row[i];
        }
        Ok(y)
    }
}

/// Solves `A·x = b` by LU factorization with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, KernelError> {
    if b.len() != a.order() {
        return Err(KernelError::DimensionMismatch { order: a.order(), len: b.len() });
    }
    LuFactors::factor(a)?.solve(b)
}

/// HPL operation count convention: `2/3·n³ + 3/2·n²`.
pub fn hpl_flops(n: u64) -> f64 {
    let n = n as f64;
    2.0 / 3.0 * n * n * n + 1.5 * n * n
}

/// Generates the seeded system used by the kernel. Entries of `A` (row-major)
/// and then `b` are drawn uniformly from `[-0.5, 0.5)` by ChaCha8.
pub fn random_system(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || rng.random::<f64>() - 0.5;
    let mut a = Matrix::zeros(n);
    for v in a.data.iter_mut() {
        *v = draw();
    }
    let b = (0..n).map(|_| draw()).collect();
    (a, b)
}

/// `‖Ax−b‖∞ / (ε·(‖A‖∞·‖x‖∞ + ‖b‖∞)·n)`
pub fn scaled_residual(a: &Matrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(l, r)| l - r).collect();
    let denom = f64::EPSILON * (a.norm_inf() * vec_norm_inf(x) + vec_norm_inf(b)) * a.order() as f64;
    vec_norm_inf(&r) / denom
}

/// Outcome of one kernel run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelResult {
    pub n: u64,
    pub runtime_seconds: f64,
    pub gflops: f64,
    pub residual: f64,
    pub passed: bool,
}

impl KernelResult {
    pub fn from_measurement(n: u64, runtime_seconds: f64, residual: f64) -> Self {
        KernelResult {
            n,
            runtime_seconds,
            gflops: hpl_flops(n) / runtime_seconds / 1e9,
            residual,
            passed: residual < RESIDUAL_THRESHOLD,
        }
    }
}

/// Generates a seeded random system of order `n`, times the LU solve with
/// a monotonic clock and checks the scaled residual.
pub fn run_builtin_linpack(n: usize, seed: u64) -> Result<KernelResult, KernelError> {
    if n == 0 {
        return Err(KernelError::Empty);
    }
    let (a, b) = random_system(n, seed);
    let start = Instant::now();
    let x = lu_solve(&a, &b)?;
    // Floor at the clock resolution so tiny systems never report zero time.
    let runtime = start.elapsed().as_secs_f64().max(1e-9);
    let residual = scaled_residual(&a, &x, &b);
    Ok(KernelResult::from_measurement(n as u64, runtime, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_one_by_one() {
        let a = Matrix::from_rows(&[vec![2.0]]);
        assert_eq!(lu_solve(&a, &[4.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn solves_identity() {
        let x = lu_solve(&Matrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn recovers_known_solution_of_seeded_system() {
        let (a, _) = random_system(64, 42);
        let ones = vec![1.0; 64];
        let b = a.mul_vec(&ones);
        let x = lu_solve(&a, &b).unwrap();
        let err = x.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "max error {err}");
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(lu_solve(&a, &[3.0, 5.0]).unwrap(), vec![5.0, 3.0]);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(lu_solve(&a, &[1.0, 1.0]).unwrap_err(), KernelError::SingularMatrix { column: 1 });
        assert_eq!(lu_solve(&Matrix::zeros(3), &[0.0; 3]).unwrap_err(), KernelError::SingularMatrix { column: 0 });
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        assert!(matches!(
            lu_solve(&Matrix::identity(2), &[1.0]),
            Err(KernelError::DimensionMismatch { order: 2, len: 1 })
        ));
    }

    #[test]
    fn flop_count_examples() {
        assert_relative_eq!(hpl_flops(1), 13.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(hpl_flops(2), 16.0 / 3.0 + 6.0, max_relative = 1e-15);
        assert_relative_eq!(hpl_flops(1000), 6.681_666_666_666_667e8, max_relative = 1e-12);
    }

    #[test]
    fn kernel_passes_residual_check() {
        let r = run_builtin_linpack(256, 7).unwrap();
        assert!(r.passed, "residual {}", r.residual);
        assert!(r.residual < RESIDUAL_THRESHOLD);
        assert!(r.gflops > 0.0);
    }

    #[test]
    fn kernel_gflops_matches_flop_count() {
        let r = run_builtin_linpack(1, 0).unwrap();
        assert_relative_eq!(r.gflops, (13.0 / 6.0) / r.runtime_seconds / 1e9, max_relative = 1e-12);
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        assert_eq!(random_system(16, 3), random_system(16, 3));
        assert_ne!(random_system(16, 3).0, random_system(16, 4).0);
        let (a, b) = random_system(32, 9);
        assert!(a.data.iter().chain(&b).all(|v| (-0.5..0.5).contains(v)));
    }

    #[test]
    fn gflops_strictly_decreasing_in_runtime() {
        let times = [1e-6, 1e-3, 0.5, 1.0, 10.0];
        let g: Vec<f64> = times.iter().map(|&t| KernelResult::from_measurement(128, t, 1.0).gflops).collect();
        assert!(g.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn pass_flag_follows_threshold() {
        assert!(KernelResult::from_measurement(8, 1.0, 15.999).passed);
        assert!(!KernelResult::from_measurement(8, 1.0, 16.0).passed);
    }
}

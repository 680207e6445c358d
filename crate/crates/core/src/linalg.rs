//! Small dense matrices and the symmetric eigen-solver.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Gram matrix `A Aᵀ` of the row vectors. Exactly symmetric: each pair is
    /// computed once and mirrored.
    pub fn gram(&self) -> Matrix {
        let n = self.rows;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                let a = self.row(i);
                let b = self.row(j);
                for k in 0..self.cols {
                    acc += a[k] * b[k];
                }
                g.set(i, j, acc);
                g.set(j, i, acc);
            }
        }
        g
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Relative asymmetry allowed before the eigen-solver rejects its input.
const SYMMETRY_TOL: f64 = 1e-8;
/// Sweep until the off-diagonal Frobenius norm falls below this fraction of
/// the matrix norm.
const OFF_DIAG_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// All eigenvalues of a symmetric matrix, sorted descending.
///
/// Cyclic Jacobi rotations (Golub & Van Loan, §8.5): each sweep annihilates
/// every off-diagonal pair once; convergence is quadratic once the matrix is
/// nearly diagonal. Rejects matrices whose asymmetry exceeds `1e-8` relative
/// to the largest entry.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    let n = m.rows();
    if n != m.cols() {
        return Err(Error::Internal(format!(
            "eigen-solver needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = m.max_abs();
    let mut max_asym = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((m.get(i, j) - m.get(j, i)).abs());
        }
    }
    if scale > 0.0 && max_asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric {
            max_asymmetry: max_asym,
        });
    }

    // Work on the symmetrized copy so tiny asymmetries cannot bias sweeps.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (m.get(i, j) + m.get(j, i));
        }
    }
    let norm = m.frobenius_norm();
    if norm == 0.0 {
        return Ok(vec![0.0; n]);
    }

    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        if off.sqrt() < OFF_DIAG_TOL * norm {
            let mut evs: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
            evs.sort_by(|x, y| y.total_cmp(x));
            return Ok(evs);
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                // Smaller-magnitude root of t^2 + 2 t theta - 1 = 0.
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(Error::Internal(
        "Jacobi eigen-solver did not converge".to_string(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_eigenvalues() {
        let mut m = Matrix::zeros(3, 3);
        for i in 0..3 {
            m.set(i, i, 1.0);
        }
        assert_eq!(symmetric_eigenvalues(&m).unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_eigenvalues_sorted_descending() {
        let mut m = Matrix::zeros(2, 2);
        m.set(0, 0, 1.0);
        m.set(1, 1, 4.0);
        assert_eq!(symmetric_eigenvalues(&m).unwrap(), vec![4.0, 1.0]);
    }

    #[test]
    fn known_3x3_spectrum() {
        // [[2,0,0],[0,3,4],[0,4,9]] has eigenvalues 11, 2, 1.
        let m = Matrix::from_rows(&[
            vec![2.0, 0.0, 0.0],
            vec![0.0, 3.0, 4.0],
            vec![0.0, 4.0, 9.0],
        ]);
        let evs = symmetric_eigenvalues(&m).unwrap();
        let expect = [11.0, 2.0, 1.0];
        for (got, want) in evs.iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(
            symmetric_eigenvalues(&m),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn trace_and_frobenius_are_preserved() {
        // Eigenvalue sums must match the trace; squares must match ||M||_F^2.
        let mut seed = 1234_u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for _ in 0..20 {
            let n = 6;
            let mut m = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = next();
                    m.set(i, j, v);
                    m.set(j, i, v);
                }
            }
            let evs = symmetric_eigenvalues(&m).unwrap();
            let trace: f64 = (0..n).map(|i| m.get(i, i)).sum();
            let ev_sum: f64 = evs.iter().sum();
            assert!((trace - ev_sum).abs() < 1e-10);
            let f2: f64 = m.data().iter().map(|v| v * v).sum();
            let e2: f64 = evs.iter().map(|v| v * v).sum();
            assert!((f2 - e2).abs() < 1e-9 * (1.0 + f2));
        }
    }
}

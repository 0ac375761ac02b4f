//! Small dense matrix type plus the two numerical kernels the crate needs:
//! a cyclic Jacobi eigensolver for symmetric matrices and Gaussian
//! elimination with partial pivoting.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.concat() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `M v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `v M` (row vector on the left)
    pub fn vec_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += vi * m;
            }
        }
        out
    }

    /// Repeated multiplication; `pow(0)` is the identity.
    pub fn pow(&self, k: usize) -> Matrix {
        assert!(self.is_square());
        let mut acc = Matrix::identity(self.rows);
        for _ in 0..k {
            acc = acc.matmul(self);
        }
        acc
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        self.transpose().norm_inf()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

const JACOBI_THRESHOLD: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, unsorted.
///
/// Stops once the off-diagonal Frobenius norm falls below `1e-13` (relative
/// to the Frobenius norm of the input when that exceeds one).
pub fn jacobi_eigenvalues(sym: &Matrix) -> Result<Vec<f64>> {
    assert!(sym.is_square());
    let n = sym.rows();
    let mut a = sym.clone();
    let scale = a.data.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let off = |a: &Matrix| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= JACOBI_THRESHOLD * scale {
            return Ok((0..n).map(|i| a[(i, i)]).collect());
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                // signum(0.0) == 1.0, so theta == 0 rotates by pi/4
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }
    if off(&a) <= JACOBI_THRESHOLD * scale {
        Ok((0..n).map(|i| a[(i, i)]).collect())
    } else {
        Err(Error::NoConvergence("Jacobi eigensolver"))
    }
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot falls below `1e-12 * ||A||_inf`.
pub fn solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    assert!(a.is_square());
    let n = a.rows();
    assert_eq!(b.len(), n);
    let tol = 1e-12 * a.norm_inf().max(f64::MIN_POSITIVE);
    let mut m = a.clone();
    let mut rhs = b.to_vec();

    for col in 0..n {
        let (piv, pmax) =
            (col..n)
                .map(|r| (r, m[(r, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax < tol {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.data.swap(piv * n + k, col * n + k);
            }
            rhs.swap(piv, col);
        }
        let d = m[(col, col)];
        for r in (col + 1)..n {
            let factor = m[(r, col)] / d;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[(r, k)] -= factor * m[(col, k)];
            }
            rhs[r] -= factor * rhs[col];
        }
    }

    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| m[(i, k)] * x[k]).sum();
        x[i] = (rhs[i] - s) / m[(i, i)];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn jacobi_two_by_two() {
        let m = Matrix::from_rows(&[vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        let mut ev = jacobi_eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| b.total_cmp(a));
        assert_abs_diff_eq!(ev[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1], 0.2, epsilon = 1e-14);
    }

    #[test]
    fn jacobi_matches_nalgebra_on_random_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in 1..9 {
            let mut m = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let mut ours = jacobi_eigenvalues(&m).unwrap();
            ours.sort_by(|a, b| a.total_cmp(b));
            let na = nalgebra::DMatrix::from_row_slice(n, n, m.as_slice());
            let mut theirs: Vec<f64> = na.symmetric_eigenvalues().iter().copied().collect();
            theirs.sort_by(|a, b| a.total_cmp(b));
            for (a, b) in ours.iter().zip(&theirs) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn solve_small_system() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = solve(&a, &[3.0, 5.0]).unwrap();
        assert_abs_diff_eq!(x[0], 0.8, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 1.4, epsilon = 1e-14);
    }

    #[test]
    fn solve_detects_singular() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(solve(&a, &[1.0, 2.0]).is_none());
    }

    #[test]
    fn pow_zero_is_identity() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(a.pow(0), Matrix::identity(2));
        assert_eq!(a.pow(2), Matrix::identity(2));
    }
}

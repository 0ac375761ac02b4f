//! Mixing matrices of Marton couplings and the McDiarmid bound for
//! dependent variables.
//!
//! Only the mixing matrix of a coupling is materialized. For a Markov chain
//! cut into blocks of length `tau(eps)` the matrix has rows
//! `1, 1, eps, eps, eps^2, eps^2, ...` to the right of the diagonal. For a
//! hidden Markov chain the same construction applies with the `tau` of the
//! underlying chain.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::bounds::TailBound;
use crate::error::{Error, Result};
use crate::kernel::MarkovKernel;
use crate::linalg::{dot, norm2, Matrix};
use crate::mixing::tv_distance;

/// Largest block count accepted by the constructors (the matrix is dense).
pub const MAX_BLOCKS: usize = 10_000;
const NORM_TOL: f64 = 1e-15;
const NORM_STABLE_STEPS: usize = 3;
const NORM_BREAKDOWN: f64 = 1e-12;

/// Upper-triangular matrix with unit diagonal and entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct MixingMatrix(Matrix);

impl MixingMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::ShapeMismatch(format!("mixing matrix is {}x{}", m.rows(), m.cols())));
        }
        let n = m.rows();
        if n > MAX_BLOCKS {
            return Err(Error::InvalidInput(format!("{n} blocks exceeds the limit of {MAX_BLOCKS}")));
        }
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                let ok = match i.cmp(&j) {
                    std::cmp::Ordering::Equal => v == 1.0,
                    std::cmp::Ordering::Greater => v == 0.0,
                    std::cmp::Ordering::Less => (0.0..=1.0).contains(&v),
                };
                if !ok {
                    return Err(Error::InvalidInput(format!("invalid mixing matrix entry ({i}, {j}) = {v}")));
                }
            }
        }
        Ok(MixingMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

impl TryFrom<Matrix> for MixingMatrix {
    type Error = Error;
    fn try_from(m: Matrix) -> Result<Self> {
        MixingMatrix::new(m)
    }
}

impl From<MixingMatrix> for Matrix {
    fn from(m: MixingMatrix) -> Matrix {
        m.0
    }
}

/// Contiguous 0-based index blocks covering `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    blocks: Vec<Range<usize>>,
}

impl Partition {
    pub fn new(blocks: Vec<Range<usize>>) -> Result<Self> {
        let mut next = 0;
        for b in &blocks {
            if b.start != next || b.end <= b.start {
                return Err(Error::InvalidInput(format!("block {b:?} does not continue at {next}")));
            }
            next = b.end;
        }
        Ok(Partition { blocks })
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Number of indices covered.
    pub fn total(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }

    /// Size of the partition: the longest block.
    pub fn size(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).max().unwrap_or(0)
    }
}

pub fn block_partition(n: usize, block_size: usize) -> Result<Partition> {
    if block_size == 0 {
        return Err(Error::InvalidInput("block size must be >= 1".into()));
    }
    let blocks = (0..n).step_by(block_size).map(|s| s..(s + block_size).min(n)).collect();
    Partition::new(blocks)
}

/// `C_i(c) = sum of c_j over block i`
pub fn block_weights(c: &[f64], partition: &Partition) -> Result<Vec<f64>> {
    if c.len() != partition.total() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for a partition of {} indices",
            c.len(),
            partition.total()
        )));
    }
    Ok(partition.blocks().iter().map(|b| c[b.clone()].iter().sum()).collect())
}

/// Mixing matrix of the Markov chain coupling: entry `(i, j)` for `j >= i`
/// is `eps^floor((j - i) / 2)`.
pub fn markov_mixing_matrix(n_blocks: usize, eps: f64) -> Result<MixingMatrix> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidInput(format!("eps must lie in [0, 1), got {eps}")));
    }
    check_blocks(n_blocks)?;
    let m = Matrix::from_fn(n_blocks, n_blocks, |i, j| if j < i { 0.0 } else { eps.powi(((j - i) / 2) as i32) });
    Ok(MixingMatrix(m))
}

/// Mixing matrix for m-dependent sequences cut into blocks of length `m`.
pub fn mdep_mixing_matrix(n_blocks: usize) -> Result<MixingMatrix> {
    check_blocks(n_blocks)?;
    let m = Matrix::from_fn(n_blocks, n_blocks, |i, j| if j == i || j == i + 1 { 1.0 } else { 0.0 });
    Ok(MixingMatrix(m))
}

fn check_blocks(n: usize) -> Result<()> {
    if n == 0 || n > MAX_BLOCKS {
        return Err(Error::InvalidInput(format!("block count {n} outside 1..={MAX_BLOCKS}")));
    }
    Ok(())
}

/// Largest singular value: Lanczos with full reorthogonalization on `G^T G`,
/// started from the normalized ones vector. On breakdown the basis is
/// extended with the standard basis vector least explained so far, so after
/// `n` steps the tridiagonal carries the whole spectrum.
pub fn operator_norm(g: &Matrix) -> Result<f64> {
    if !g.is_square() {
        return Err(Error::ShapeMismatch(format!("matrix is {}x{}", g.rows(), g.cols())));
    }
    let n = g.rows();
    if n == 0 || g.as_slice().iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let gt = g.transpose();
    let apply = |v: &[f64]| gt.mul_vec(&g.mul_vec(v));
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / (n as f64).sqrt(); n]];
    let (mut alpha, mut beta) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut theta = 0.0;
    let mut stable = 0;
    for j in 0..n {
        let q = &basis[j];
        let mut w = apply(q);
        alpha.push(dot(q, &w));
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let next = top_tridiagonal_eigenvalue(&alpha, &beta);
        stable = if (next - theta).abs() <= NORM_TOL * next { stable + 1 } else { 0 };
        theta = next;
        if j + 1 == n || stable >= NORM_STABLE_STEPS {
            break;
        }
        let scale = norm2(&alpha).max(f64::MIN_POSITIVE);
        let b = norm2(&w);
        if b > NORM_BREAKDOWN * scale {
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        } else {
            beta.push(0.0);
            basis.push(fresh_direction(&basis, n));
        }
    }
    if !theta.is_finite() {
        return Err(Error::NoConvergence("operator norm"));
    }
    Ok(theta.max(0.0).sqrt())
}

/// Unit vector orthogonal to `basis`, built from the standard basis vector
/// with the largest residual.
fn fresh_direction(basis: &[Vec<f64>], n: usize) -> Vec<f64> {
    let residual = |i: usize| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let c = dot(b, &e);
                e.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        e
    };
    let best = (0..n).map(residual).max_by(|a, b| norm2(a).total_cmp(&norm2(b))).unwrap();
    let len = norm2(&best);
    best.iter().map(|x| x / len).collect()
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta`, by Sturm-count bisection.
fn top_tridiagonal_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let off = |i: usize| if i < beta.len() && i + 1 < k { beta[i].abs() } else { 0.0 };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &a) in alpha.iter().enumerate() {
        let r = off(i) + if i > 0 { off(i - 1) } else { 0.0 };
        lo = lo.min(a - r);
        hi = hi.max(a + r);
    }
    // number of eigenvalues strictly below x
    let below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for (i, &a) in alpha.iter().enumerate() {
            let b2 = if i > 0 { off(i - 1).powi(2) } else { 0.0 };
            d = a - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) == k {
            hi = mid
        } else {
            lo = mid
        }
    }
    hi
}

/// `||G c||^2`
pub fn weighted_norm_sq(g: &MixingMatrix, cc: &[f64]) -> Result<f64> {
    if cc.len() != g.dim() {
        return Err(Error::ShapeMismatch(format!("{} block weights for a {}-block matrix", cc.len(), g.dim())));
    }
    if cc.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidInput("block weights must be >= 0".into()));
    }
    let v = g.matrix().mul_vec(cc);
    Ok(v.iter().map(|x| x * x).sum())
}

/// `2 exp(-2 t^2 / ||G C(c)||^2)`. A zero weight vector gives probability
/// 0 for `t > 0` and 1 at `t = 0`.
pub fn mcdiarmid_general_tail(g: &MixingMatrix, cc: &[f64], t: f64) -> Result<TailBound> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("t must be >= 0, got {t}")));
    }
    let s = weighted_norm_sq(g, cc)?;
    let exponent = if t == 0.0 {
        0.0
    } else if s == 0.0 {
        f64::INFINITY
    } else {
        2.0 * t * t / s
    };
    Ok(TailBound::from_exponent(exponent, false))
}

/// Bound on `log E exp(lambda (f - E f))`: `lambda^2 ||G C(c)||^2 / 8`.
pub fn mgf_log_bound(g: &MixingMatrix, cc: &[f64], lambda: f64) -> Result<f64> {
    Ok(lambda * lambda * weighted_norm_sq(g, cc)? / 8.0)
}

/// McDiarmid tail for a Markov chain: blocks of length `tau = tau(eps)`
/// with the Markov mixing matrix.
pub fn mcdiarmid_markov_blocks_tail(c: &[f64], tau: usize, eps: f64, t: f64) -> Result<TailBound> {
    let partition = block_partition(c.len(), tau)?;
    let g = markov_mixing_matrix(partition.len(), eps)?;
    mcdiarmid_general_tail(&g, &block_weights(c, &partition)?, t)
}

/// `max_{x,y} d_TV(P(x, .), P(y, .))`
pub fn one_step_contraction(p: &MarkovKernel) -> f64 {
    let m = p.matrix();
    let n = p.len();
    let mut best: f64 = 0.0;
    for x in 0..n {
        for y in x + 1..n {
            best = best.max(tv_distance(m.row(x), m.row(y)));
        }
    }
    best
}

//! Finite-state Markov kernels, distributions over their states, and the
//! structural constructions used throughout the crate: time reversal, the
//! pair-chain lift and the multiplicative reversiblizations `(P*)^k P^k`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Row sums may deviate from one by at most this much.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Default tolerance for the detailed-balance check.
pub const REVERSIBILITY_TOL: f64 = 1e-10;
/// Required accuracy of a computed stationary distribution, `||pi P - pi||_inf`.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

/// Transition matrix `P(x, y)` over a labelled, finite state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct MarkovKernel {
    states: Vec<String>,
    matrix: Matrix,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    states: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<KernelRepr> for MarkovKernel {
    type Error = Error;
    fn try_from(r: KernelRepr) -> Result<Self> {
        MarkovKernel::new(r.states, Matrix::from_rows(&r.matrix)?)
    }
}

impl From<MarkovKernel> for KernelRepr {
    fn from(k: MarkovKernel) -> Self {
        KernelRepr { states: k.states, matrix: k.matrix.to_rows() }
    }
}

fn check_labels(states: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in states {
        if !seen.insert(s.as_str()) {
            return Err(Error::DuplicateState(s.clone()));
        }
    }
    Ok(())
}

impl MarkovKernel {
    /// Validates and builds a kernel. Rows whose sum is within
    /// [`STOCHASTIC_TOL`] of one are renormalized exactly.
    pub fn new(states: Vec<String>, matrix: Matrix) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::ShapeMismatch("kernel needs at least one state".into()));
        }
        if matrix.rows() != n || matrix.cols() != n {
            return Err(Error::ShapeMismatch(format!("{} labels but a {}x{} matrix", n, matrix.rows(), matrix.cols())));
        }
        check_labels(&states)?;
        let mut matrix = matrix;
        for i in 0..n {
            for j in 0..n {
                let v = matrix[(i, j)];
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::NegativeEntry { row: i, col: j, value: v });
                }
            }
            let sum: f64 = matrix.row(i).iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NonStochastic { row: i, sum });
            }
            matrix.row_mut(i).iter_mut().for_each(|v| *v /= sum);
        }
        Ok(Self { states, matrix })
    }

    /// Kernel with states labelled `"0"`, `"1"`, ...
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let states = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(states, Matrix::from_rows(rows)?)
    }

    /// Parses kernel JSON; validation failures keep their own error kind.
    pub fn from_json(s: &str) -> Result<Self> {
        let repr: KernelRepr = serde_json::from_str(s)?;
        repr.try_into()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.matrix[(x, y)]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    /// Unique stationary distribution.
    ///
    /// Solves `pi (P - I) = 0` with one balance equation replaced by
    /// `sum(pi) = 1`. The column sums of `P^T - I` vanish, so every balance
    /// equation is redundant and the reduced system is nonsingular exactly
    /// when the eigenvalue 1 of `P` is simple.
    pub fn stationary_distribution(&self) -> Result<Distribution> {
        let n = self.len();
        let mut a = Matrix::from_fn(n, n, |i, j| self.matrix[(j, i)] - if i == j { 1.0 } else { 0.0 });
        a.row_mut(n - 1).iter_mut().for_each(|v| *v = 1.0);
        let mut rhs = vec![0.0; n];
        rhs[n - 1] = 1.0;
        let mut pi = linalg::solve(&a, &rhs).ok_or(Error::NonUniqueStationary)?;

        // Roundoff can leave tiny negatives on transient states.
        pi.iter_mut().for_each(|p| *p = p.max(0.0));
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);

        let next = self.matrix.vec_mul(&pi);
        let residual = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual > STATIONARY_RESIDUAL_TOL {
            return Err(Error::NoConvergence("stationary distribution solve"));
        }
        Ok(Distribution { states: self.states.clone(), weights: pi })
    }

    /// `max_{x,y} |pi(x) P(x,y) - pi(y) P(y,x)|`
    pub fn detailed_balance_defect(&self, pi: &Distribution) -> f64 {
        let n = self.len();
        let mut worst = 0.0_f64;
        for x in 0..n {
            for y in (x + 1)..n {
                let d = pi.weights[x] * self.matrix[(x, y)] - pi.weights[y] * self.matrix[(y, x)];
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    pub fn is_reversible(&self, pi: &Distribution, tol: f64) -> bool {
        self.detailed_balance_defect(pi) <= tol
    }

    /// `P*(x, y) = pi(y) P(y, x) / pi(x)`
    pub fn time_reversal(&self, pi: &Distribution) -> Result<MarkovKernel> {
        pi.require_positive()?;
        let n = self.len();
        let w = &pi.weights;
        let mut m = Matrix::from_fn(n, n, |x, y| w[y] * self.matrix[(y, x)] / w[x]);
        for x in 0..n {
            let s: f64 = m.row(x).iter().sum();
            m.row_mut(x).iter_mut().for_each(|v| *v = (*v / s).clamp(0.0, 1.0));
        }
        Ok(MarkovKernel { states: self.states.clone(), matrix: m })
    }

    /// Chain of consecutive pairs `(X_i, X_{i+1})`, with its stationary law
    /// `pi(x) P(x, y)`. Pair `(x, y)` has index `x * n + y` and label `"x,y"`.
    pub fn pair_chain(&self) -> Result<(MarkovKernel, Distribution)> {
        let pi = self.stationary_distribution()?;
        let n = self.len();
        let states: Vec<String> =
            (0..n * n).map(|i| format!("{},{}", self.states[i / n], self.states[i % n])).collect();
        let q = Matrix::from_fn(n * n, n * n, |from, to| {
            let (_, y) = (from / n, from % n);
            let (y2, z) = (to / n, to % n);
            if y == y2 {
                self.matrix[(y, z)]
            } else {
                0.0
            }
        });
        let weights = (0..n * n).map(|i| pi.weights[i / n] * self.matrix[(i / n, i % n)]).collect();
        Ok((MarkovKernel { states: states.clone(), matrix: q }, Distribution { states, weights }))
    }

    /// `(P*)^k P^k`, self-adjoint and positive semidefinite in `L2(pi)`.
    pub fn reversiblization_matrix(&self, pi: &Distribution, k: usize) -> Result<Matrix> {
        if k == 0 {
            return Err(Error::InvalidInput("reversiblization power k must be >= 1".into()));
        }
        let rev = self.time_reversal(pi)?;
        Ok(rev.matrix.pow(k).matmul(&self.matrix.pow(k)))
    }

    /// Same states, transition matrix `(P + I) / 2`.
    pub fn lazy(&self) -> MarkovKernel {
        let n = self.len();
        let m = Matrix::from_fn(n, n, |i, j| 0.5 * self.matrix[(i, j)] + if i == j { 0.5 } else { 0.0 });
        MarkovKernel { states: self.states.clone(), matrix: m }
    }
}

/// Probability vector over a kernel's states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistRepr")]
pub struct Distribution {
    states: Vec<String>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct DistRepr {
    states: Vec<String>,
    weights: Vec<f64>,
}

impl TryFrom<DistRepr> for Distribution {
    type Error = Error;
    fn try_from(r: DistRepr) -> Result<Self> {
        Distribution::new(r.states, r.weights)
    }
}

impl Distribution {
    pub fn new(states: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if states.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!("{} labels but {} weights", states.len(), weights.len())));
        }
        check_labels(&states)?;
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidDistribution(format!("weight {w} outside [0, 1]")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidDistribution(format!("weights sum to {sum}")));
        }
        Ok(Self { states, weights })
    }

    /// Distribution with states labelled `"0"`, `"1"`, ...
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let states = (0..weights.len()).map(|i| i.to_string()).collect();
        Self::new(states, weights)
    }

    pub fn uniform(states: Vec<String>) -> Self {
        let n = states.len();
        Self { states, weights: vec![1.0 / n as f64; n] }
    }

    pub fn point_mass(states: Vec<String>, at: usize) -> Self {
        let mut weights = vec![0.0; states.len()];
        weights[at] = 1.0;
        Self { states, weights }
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn expectation(&self, f: &[f64]) -> f64 {
        linalg::dot(&self.weights, f)
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        let m = self.expectation(f);
        self.weights.iter().zip(f).map(|(w, v)| w * (v - m) * (v - m)).sum()
    }

    /// `<f, g>_pi`
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    /// `f - E_pi f`
    pub fn center(&self, f: &[f64]) -> Vec<f64> {
        let m = self.expectation(f);
        f.iter().map(|v| v - m).collect()
    }

    pub(crate) fn require_positive(&self) -> Result<()> {
        match self.weights.iter().position(|&w| w <= 0.0) {
            Some(i) => Err(Error::ZeroStationaryMass(self.states[i].clone())),
            None => Ok(()),
        }
    }

    /// Distribution after one step, `q P`.
    pub fn step(&self, kernel: &MarkovKernel) -> Distribution {
        Distribution { states: self.states.clone(), weights: kernel.matrix().vec_mul(&self.weights) }
    }
}

/// `N_q = sum_x q(x)^2 / pi(x)`; infinite when `q` charges a state `pi` does not.
pub fn chi_square_nq(q: &Distribution, pi: &Distribution) -> Result<f64> {
    if q.len() != pi.len() {
        return Err(Error::ShapeMismatch("q and pi over different state sets".into()));
    }
    let mut total = 0.0;
    for (&qx, &px) in q.weights.iter().zip(&pi.weights) {
        if qx == 0.0 {
            continue;
        }
        if px == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += qx * qx / px;
    }
    Ok(total)
}

/// Real-valued observable on the state space, optionally time dependent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservedFunction {
    /// One value per state, the same at every time step.
    Homogeneous(Vec<f64>),
    /// `f_1, ..., f_n`, one value vector per time index.
    PerTime(Vec<Vec<f64>>),
}

impl ObservedFunction {
    pub fn validate(&self, n_states: usize) -> Result<()> {
        let rows: Vec<&Vec<f64>> = match self {
            ObservedFunction::Homogeneous(v) => vec![v],
            ObservedFunction::PerTime(vs) => vs.iter().collect(),
        };
        for v in rows {
            if v.len() != n_states {
                return Err(Error::ShapeMismatch(format!("function has {} values for {} states", v.len(), n_states)));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("function values must be finite".into()));
            }
        }
        Ok(())
    }

    /// Values at time index `i` (0-based).
    pub fn at(&self, i: usize) -> &[f64] {
        match self {
            ObservedFunction::Homogeneous(v) => v,
            ObservedFunction::PerTime(vs) => &vs[i],
        }
    }
}

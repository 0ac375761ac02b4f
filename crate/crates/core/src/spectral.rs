//! Spectra of kernels viewed as operators on `L2(pi)`: spectral gap,
//! absolute spectral gap, pseudo spectral gap, asymptotic variance and the
//! exact variance of finite sums.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Distribution, MarkovKernel, REVERSIBILITY_TOL};
use crate::linalg::{self, Matrix};
use crate::mixing::MixingReport;

/// Tolerance on the asymmetry of `D^{1/2} M D^{-1/2}`.
pub const SELF_ADJOINT_TOL: f64 = 1e-10;
/// A second eigenvalue at or above `1 - UNIT_MULTIPLICITY_TOL` counts as a
/// repeated eigenvalue 1, and the gap is reported as zero.
pub const UNIT_MULTIPLICITY_TOL: f64 = 1e-9;
/// Search bound for the pseudo spectral gap when no mixing profile is known.
pub const DEFAULT_K_MAX: usize = 64;

/// Eigenvalues (descending) of `M` as a self-adjoint operator on `L2(pi)`.
pub fn eigenvalues_self_adjoint(m: &Matrix, pi: &Distribution) -> Result<Vec<f64>> {
    let n = pi.len();
    if m.rows() != n || m.cols() != n {
        return Err(Error::ShapeMismatch("matrix and distribution sizes differ".into()));
    }
    pi.require_positive()?;
    let sq: Vec<f64> = pi.weights().iter().map(|w| w.sqrt()).collect();
    let s = Matrix::from_fn(n, n, |i, j| sq[i] * m[(i, j)] / sq[j]);
    let asym = s.max_abs_diff(&s.transpose());
    if asym > SELF_ADJOINT_TOL {
        return Err(Error::NotSelfAdjoint(asym));
    }
    let sym = Matrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mut ev = linalg::jacobi_eigenvalues(&sym)?;
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// `1 - lambda_2` from a descending spectrum whose top eigenvalue is 1.
fn gap_from_sorted(ev: &[f64]) -> f64 {
    match ev.get(1) {
        None => 1.0,
        Some(&l2) if l2 >= 1.0 - UNIT_MULTIPLICITY_TOL => 0.0,
        Some(&l2) => 1.0 - l2,
    }
}

fn abs_gap_from_sorted(ev: &[f64]) -> f64 {
    match ev.get(1) {
        None => 1.0,
        Some(&l2) if l2 >= 1.0 - UNIT_MULTIPLICITY_TOL => 0.0,
        Some(_) => 1.0 - ev[1..].iter().map(|l| l.abs()).fold(0.0, f64::max),
    }
}

fn reversible_spectrum(p: &MarkovKernel, pi: &Distribution) -> Result<Vec<f64>> {
    let defect = p.detailed_balance_defect(pi);
    if defect > REVERSIBILITY_TOL {
        return Err(Error::NotReversible(defect));
    }
    eigenvalues_self_adjoint(p.matrix(), pi)
}

/// Spectral gap `gamma` of a reversible kernel, in `[0, 2]`.
pub fn spectral_gap(p: &MarkovKernel, pi: &Distribution) -> Result<f64> {
    Ok(gap_from_sorted(&reversible_spectrum(p, pi)?))
}

/// Absolute spectral gap `gamma*` of a reversible kernel, in `[0, 1]`.
pub fn absolute_spectral_gap(p: &MarkovKernel, pi: &Distribution) -> Result<f64> {
    Ok(abs_gap_from_sorted(&reversible_spectrum(p, pi)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSpectralGap {
    pub gamma_ps: f64,
    /// Smallest `k` attaining the maximum.
    pub k_ps: usize,
    /// Descending spectrum of `(P*)^k P^k` for every `k` searched.
    pub eigenvalues_by_k: BTreeMap<usize, Vec<f64>>,
    /// True when the stopping rule `1/k <= best` proved the maximum.
    pub certified: bool,
    /// True when the search hit `k_max` without finding a positive gap.
    pub search_exhausted: bool,
}

/// `k_max` to use for the pseudo spectral gap search: `4 * t_mix` when a
/// mixing profile reached `t_mix`, otherwise [`DEFAULT_K_MAX`].
pub fn default_k_max(mixing: Option<&MixingReport>) -> usize {
    mixing.and_then(|m| m.t_mix(0.25)).map_or(DEFAULT_K_MAX, |t| (4 * t).max(1))
}

/// `gamma_ps = max_k gamma((P*)^k P^k) / k`.
///
/// Since `gamma((P*)^k P^k) <= 1`, no `k` with `1/k <= best` can improve the
/// maximum, so the search stops at the first such `k`.
pub fn pseudo_spectral_gap(p: &MarkovKernel, pi: &Distribution, k_max: Option<usize>) -> Result<PseudoSpectralGap> {
    let k_max = k_max.unwrap_or(DEFAULT_K_MAX).max(1);
    let rev = p.time_reversal(pi)?;
    let mut p_k = Matrix::identity(p.len());
    let mut rev_k = Matrix::identity(p.len());

    let mut best = 0.0;
    let mut k_ps = 1;
    let mut eigenvalues_by_k = BTreeMap::new();
    let mut certified = false;
    for k in 1..=k_max {
        if 1.0 / k as f64 <= best {
            certified = true;
            break;
        }
        p_k = p_k.matmul(p.matrix());
        rev_k = rev_k.matmul(rev.matrix());
        let ev = eigenvalues_self_adjoint(&rev_k.matmul(&p_k), pi)?;
        let value = gap_from_sorted(&ev) / k as f64;
        if value > best {
            best = value;
            k_ps = k;
        }
        eigenvalues_by_k.insert(k, ev);
    }
    if !certified && 1.0 / (k_max + 1) as f64 <= best {
        certified = true;
    }
    Ok(PseudoSpectralGap { gamma_ps: best, k_ps, eigenvalues_by_k, certified, search_exhausted: best == 0.0 })
}

/// Asymptotic variance `sigma_as^2 = <f, [2 (I - (P - Pi))^{-1} - I] f>_pi`
/// for `f` centered under `pi`.
pub fn asymptotic_variance(p: &MarkovKernel, pi: &Distribution, f: &[f64]) -> Result<f64> {
    let n = p.len();
    if f.len() != n {
        return Err(Error::ShapeMismatch("function length differs from state count".into()));
    }
    let fc = pi.center(f);
    let w = pi.weights();
    let resolvent = Matrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - (p.get(i, j) - w[j])
    });
    let g = linalg::solve(&resolvent, &fc).ok_or(Error::SingularResolvent)?;
    let v = 2.0 * pi.inner(&fc, &g) - pi.inner(&fc, &fc);
    // Clamp roundoff around zero.
    Ok(if v < 0.0 && v > -1e-10 { 0.0 } else { v })
}

/// `Var_pi(f(X_1) + ... + f(X_n))` for the stationary chain:
/// `n V_f + 2 sum_{k=1}^{n-1} (n - k) <f~, P^k f~>_pi`.
pub fn exact_sum_variance(p: &MarkovKernel, pi: &Distribution, f: &[f64], n: usize) -> Result<f64> {
    if f.len() != p.len() {
        return Err(Error::ShapeMismatch("function length differs from state count".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let fc = pi.center(f);
    let mut total = n as f64 * pi.inner(&fc, &fc);
    let mut h = fc.clone();
    for k in 1..n {
        h = p.matrix().mul_vec(&h);
        total += 2.0 * (n - k) as f64 * pi.inner(&fc, &h);
    }
    Ok(total)
}

/// `Var_pi(f_1(X_1) + ... + f_n(X_n))` for the stationary chain.
pub fn exact_sum_variance_per_time(p: &MarkovKernel, pi: &Distribution, fs: &[Vec<f64>]) -> Result<f64> {
    if fs.iter().any(|f| f.len() != p.len()) {
        return Err(Error::ShapeMismatch("function length differs from state count".into()));
    }
    let centered: Vec<Vec<f64>> = fs.iter().map(|f| pi.center(f)).collect();
    let mut total = 0.0;
    // Cov(f_i(X_i), f_j(X_j)) = <f~_i, P^{j-i} f~_j>_pi for i <= j
    for j in 0..centered.len() {
        let mut h = centered[j].clone();
        total += pi.inner(&centered[j], &h);
        for i in (0..j).rev() {
            h = p.matrix().mul_vec(&h);
            total += 2.0 * pi.inner(&centered[i], &h);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub reversible: bool,
    /// Present for reversible kernels only.
    pub gamma: Option<f64>,
    pub gamma_star: Option<f64>,
    pub gamma_ps: f64,
    pub k_ps: usize,
    pub gamma_ps_certified: bool,
    pub eigenvalues_by_k: BTreeMap<usize, Vec<f64>>,
    /// Spectrum of `P` itself (reversible kernels only).
    pub eigenvalues: Option<Vec<f64>>,
}

pub fn spectral_report(p: &MarkovKernel, k_max: Option<usize>) -> Result<SpectralReport> {
    let pi = p.stationary_distribution()?;
    let reversible = p.is_reversible(&pi, REVERSIBILITY_TOL);
    let eigenvalues = if reversible { Some(eigenvalues_self_adjoint(p.matrix(), &pi)?) } else { None };
    let ps = pseudo_spectral_gap(p, &pi, k_max)?;
    Ok(SpectralReport {
        reversible,
        gamma: eigenvalues.as_deref().map(gap_from_sorted),
        gamma_star: eigenvalues.as_deref().map(abs_gap_from_sorted),
        gamma_ps: ps.gamma_ps,
        k_ps: ps.k_ps,
        gamma_ps_certified: ps.certified,
        eigenvalues_by_k: ps.eigenvalues_by_k,
        eigenvalues,
    })
}

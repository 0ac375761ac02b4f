//! Evaluators for the variance bounds and tail inequalities: Bernstein
//! bounds for reversible and non-reversible chains, corrections for
//! non-stationary starts, truncation of unbounded summands, the Markov
//! McDiarmid tail and the expected empirical total variation.
//!
//! Every tail evaluator returns `min(1, 2 exp(-E))` (or `exp(-E)` one-sided)
//! and exposes the exponent `E`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Distribution, MarkovKernel, REVERSIBILITY_TOL};
use crate::mixing::{ClampedValue, GapKind};
use crate::spectral;

/// A probability bound of the form `factor * exp(-exponent)`, clamped to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub probability: f64,
    pub exponent: f64,
    /// Raw value exceeded 1 (the bound is vacuous).
    pub clamped: bool,
    pub one_sided: bool,
}

impl TailBound {
    pub fn from_exponent(exponent: f64, one_sided: bool) -> Self {
        let factor = if one_sided { 1.0 } else { 2.0 };
        let raw = factor * (-exponent).exp();
        TailBound { probability: raw.min(1.0), exponent, clamped: raw > 1.0, one_sided }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub n: usize,
    pub v_f: f64,
    pub sigma_as2: f64,
    /// Exact `Var_pi(f(X_1) + ... + f(X_n))`.
    pub exact: f64,
    pub reversible: bool,
    pub gamma: Option<f64>,
    pub gamma_star: Option<f64>,
    pub gamma_ps: f64,
    /// `2 n V_f / gamma`
    pub bound_rev: Option<f64>,
    /// `n sigma_as^2 + 4 V_f / gamma^2`
    pub bound_rev_sigma: Option<f64>,
    /// `4 V_f / gamma^2`, the allowed gap `|exact - n sigma_as^2|`.
    pub deviation_rev: Option<f64>,
    /// `4 n V_f / gamma_ps`
    pub bound_nonrev: Option<f64>,
    /// `n sigma_as^2 + 16 V_f / gamma_ps^2`
    pub bound_nonrev_sigma: Option<f64>,
    /// `16 V_f / gamma_ps^2`
    pub deviation_nonrev: Option<f64>,
    /// `2/gamma* sum Var(f_i)` (reversible) or `4/gamma_ps sum Var(f_i)`
    /// with `f_i = f`.
    pub per_coordinate_bound: Option<f64>,
}

impl VarianceReport {
    /// Upper bounds on `exact` that apply to this chain.
    pub fn applicable_bounds(&self) -> Vec<(&'static str, f64)> {
        [
            ("bound_rev", self.bound_rev),
            ("bound_rev_sigma", self.bound_rev_sigma),
            ("bound_nonrev", self.bound_nonrev),
            ("bound_nonrev_sigma", self.bound_nonrev_sigma),
            ("per_coordinate_bound", self.per_coordinate_bound),
        ]
        .into_iter()
        .filter_map(|(name, v)| v.map(|v| (name, v)))
        .collect()
    }
}

/// `numerator / gap`, treating `0 / 0` as 0 and `x / 0` as no bound.
fn over_gap(numerator: f64, gap: f64) -> Option<f64> {
    if numerator == 0.0 {
        Some(0.0)
    } else if gap > 0.0 {
        Some(numerator / gap)
    } else {
        None
    }
}

pub fn variance_report(p: &MarkovKernel, pi: &Distribution, f: &[f64], n: usize) -> Result<VarianceReport> {
    let v_f = pi.variance(f);
    let sigma_as2 = spectral::asymptotic_variance(p, pi, f)?;
    let exact = spectral::exact_sum_variance(p, pi, f, n)?;
    let reversible = p.is_reversible(pi, REVERSIBILITY_TOL);
    let (gamma, gamma_star) = if reversible {
        (Some(spectral::spectral_gap(p, pi)?), Some(spectral::absolute_spectral_gap(p, pi)?))
    } else {
        (None, None)
    };
    let gamma_ps = spectral::pseudo_spectral_gap(p, pi, None)?.gamma_ps;
    let nf = n as f64;

    let deviation_rev = gamma.and_then(|g| over_gap(4.0 * v_f, g * g));
    let deviation_nonrev = over_gap(16.0 * v_f, gamma_ps * gamma_ps);
    let per_coordinate_bound = match gamma_star {
        Some(gs) => over_gap(2.0 * nf * v_f, gs),
        None => over_gap(4.0 * nf * v_f, gamma_ps),
    };
    Ok(VarianceReport {
        n,
        v_f,
        sigma_as2,
        exact,
        reversible,
        gamma,
        gamma_star,
        gamma_ps,
        bound_rev: gamma.and_then(|g| over_gap(2.0 * nf * v_f, g)),
        bound_rev_sigma: deviation_rev.map(|d| nf * sigma_as2 + d),
        deviation_rev,
        bound_nonrev: over_gap(4.0 * nf * v_f, gamma_ps),
        bound_nonrev_sigma: deviation_nonrev.map(|d| nf * sigma_as2 + d),
        deviation_nonrev,
        per_coordinate_bound,
    })
}

/// Which Bernstein inequality to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BernsteinVariant {
    /// `t^2 / (2n(sigma_as^2 + 0.8 V_f) + 10 t C / gamma)`
    RevSigma,
    /// `t^2 gamma / (4 n V_f + 10 t C)`
    Rev,
    /// `t^2 (2 gamma* - gamma*^2) / (8 V_S + 20 t C)`
    RevGeneral,
    /// `t^2 gamma_ps / (8 (n + 1/gamma_ps) V_f + 20 t C)`
    NonRev,
    /// `t^2 gamma_ps / (8 V_S + 20 t C M / k_ps)`
    NonRevGeneral,
}

impl std::str::FromStr for BernsteinVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace('-', "_").as_str() {
            "rev_sigma" => Self::RevSigma,
            "rev" => Self::Rev,
            "rev_general" => Self::RevGeneral,
            "nonrev" | "non_rev" => Self::NonRev,
            "nonrev_general" | "non_rev_general" => Self::NonRevGeneral,
            other => return Err(Error::InvalidInput(format!("unknown Bernstein variant {other:?}"))),
        })
    }
}

/// Inputs of a Bernstein tail bound. Fields a variant does not use may be
/// left out.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BernsteinSpec {
    pub variant: Option<BernsteinVariant>,
    pub n: Option<usize>,
    /// `Var_pi(f)`
    pub v_f: Option<f64>,
    /// `sum_i Var_pi(f_i)`
    pub v_s: Option<f64>,
    pub sigma_as2: Option<f64>,
    /// Almost-sure bound on `|f - E_pi f|`.
    pub c: Option<f64>,
    pub gamma: Option<f64>,
    pub gamma_star: Option<f64>,
    pub gamma_ps: Option<f64>,
    pub k_ps: Option<usize>,
    /// `M = (sum_i V_i^{1/2}) / min_i V_i^{1/2}`; computed from `v_i` when absent.
    pub m: Option<f64>,
    /// Residue-class variances `V_1, ..., V_{k_ps}` (or inflated `V_i' >= V_i`).
    pub v_i: Option<Vec<f64>>,
    #[serde(default)]
    pub one_sided: bool,
}

fn need<T: Copy>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or(Error::MissingField(name))
}

fn positive_gap(g: f64) -> Result<f64> {
    if g > 0.0 && g.is_finite() {
        Ok(g)
    } else {
        Err(Error::NonPositiveGap(g))
    }
}

fn nonneg(v: f64, name: &str) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite and >= 0, got {v}")))
    }
}

/// Default almost-sure bound on `|f - E_pi f|`: the range `max f - min f`.
pub fn default_c(f: &[f64]) -> f64 {
    let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = f.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// `M = (sum_i sqrt(V_i)) / min_i sqrt(V_i)`
pub fn residue_ratio(v_i: &[f64]) -> Result<f64> {
    if v_i.is_empty() {
        return Err(Error::InvalidInput("v_i must be nonempty".into()));
    }
    let roots: Vec<f64> = v_i.iter().map(|v| nonneg(*v, "v_i").map(f64::sqrt)).collect::<Result<_>>()?;
    let min = roots.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = roots.iter().sum();
    Ok(if min > 0.0 { sum / min } else { f64::INFINITY })
}

/// `V_i = sum_{j >= 0} Var_pi(f_{i + j k_ps})` for `i = 1..=k_ps`, given the
/// per-time variances `Var_pi(f_1), ..., Var_pi(f_n)`.
pub fn residue_variances(per_time: &[f64], k_ps: usize) -> Result<Vec<f64>> {
    if k_ps == 0 {
        return Err(Error::InvalidInput("k_ps must be >= 1".into()));
    }
    let mut v = vec![0.0; k_ps];
    for (idx, var) in per_time.iter().enumerate() {
        v[idx % k_ps] += var;
    }
    Ok(v)
}

impl BernsteinSpec {
    pub fn new(variant: BernsteinVariant) -> Self {
        BernsteinSpec { variant: Some(variant), ..Default::default() }
    }

    /// Exponent `E` of the tail bound at deviation `t`.
    pub fn exponent(&self, t: f64) -> Result<f64> {
        let variant = need(self.variant, "variant")?;
        if !(t >= 0.0) {
            return Err(Error::InvalidInput(format!("t must be >= 0, got {t}")));
        }
        let c = need(self.c, "c")?;
        if !(c > 0.0) {
            return Err(Error::InvalidInput(format!("c must be > 0, got {c}")));
        }
        let t2 = t * t;
        let (num, den) = match variant {
            BernsteinVariant::RevSigma => {
                let n = need(self.n, "n")? as f64;
                let v_f = nonneg(need(self.v_f, "v_f")?, "v_f")?;
                let s2 = nonneg(need(self.sigma_as2, "sigma_as2")?, "sigma_as2")?;
                let g = positive_gap(need(self.gamma, "gamma")?)?;
                (t2, 2.0 * n * (s2 + 0.8 * v_f) + 10.0 * t * c / g)
            }
            BernsteinVariant::Rev => {
                let n = need(self.n, "n")? as f64;
                let v_f = nonneg(need(self.v_f, "v_f")?, "v_f")?;
                let g = positive_gap(need(self.gamma, "gamma")?)?;
                (t2 * g, 4.0 * n * v_f + 10.0 * t * c)
            }
            BernsteinVariant::RevGeneral => {
                let v_s = nonneg(need(self.v_s, "v_s")?, "v_s")?;
                let gs = positive_gap(need(self.gamma_star, "gamma_star")?)?;
                (t2 * (2.0 * gs - gs * gs), 8.0 * v_s + 20.0 * t * c)
            }
            BernsteinVariant::NonRev => {
                let n = need(self.n, "n")? as f64;
                let v_f = nonneg(need(self.v_f, "v_f")?, "v_f")?;
                let g = positive_gap(need(self.gamma_ps, "gamma_ps")?)?;
                (t2 * g, 8.0 * (n + 1.0 / g) * v_f + 20.0 * t * c)
            }
            BernsteinVariant::NonRevGeneral => {
                let v_s = nonneg(need(self.v_s, "v_s")?, "v_s")?;
                let g = positive_gap(need(self.gamma_ps, "gamma_ps")?)?;
                let k = need(self.k_ps, "k_ps")?;
                if k == 0 {
                    return Err(Error::InvalidInput("k_ps must be >= 1".into()));
                }
                let m = match (self.m, &self.v_i) {
                    (Some(m), _) => m,
                    (None, Some(v)) => {
                        if v.len() != k {
                            return Err(Error::ShapeMismatch(format!("{} residue variances for k_ps = {k}", v.len())));
                        }
                        residue_ratio(v)?
                    }
                    (None, None) => return Err(Error::MissingField("m")),
                };
                if m < k as f64 - 1e-12 {
                    return Err(Error::InvalidInput(format!("M = {m} is below k_ps = {k}")));
                }
                (t2 * g, 8.0 * v_s + 20.0 * t * c * m / k as f64)
            }
        };
        Ok(if num == 0.0 { 0.0 } else { num / den })
    }
}

/// Bernstein tail bound on `P_pi(|S - E_pi S| >= t)`.
pub fn bernstein_tail(spec: &BernsteinSpec, t: f64) -> Result<TailBound> {
    Ok(TailBound::from_exponent(spec.exponent(t)?, spec.one_sided))
}

/// How to carry a stationary tail bound over to a chain started from `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum NonstationaryMethod {
    /// `N_q^{1/2} P_pi(...)^{1/2}`. With `q = pi` the stationary bound
    /// itself is sharper and should be used directly.
    Sqrt { n_q: f64 },
    /// `N_{q P^{t0}}^{1/2} P_pi(...)^{1/2}` with `N_{q P^{t0}}` bounded by
    /// [`nq_decay`].
    BurnIn { n_q: f64, t0: usize, gap: f64, kind: GapKind },
    /// `P_pi(...) + d_TV(q P^{t0}, pi)`
    Additive { d_tv: f64 },
}

/// Adjust a stationary tail probability `raw` for a non-stationary start.
pub fn nonstationary_adjust(raw: f64, method: &NonstationaryMethod) -> Result<ClampedValue> {
    if !(0.0..=1.0).contains(&raw) {
        return Err(Error::InvalidInput(format!("raw probability {raw} outside [0, 1]")));
    }
    let value = match method {
        NonstationaryMethod::Sqrt { n_q } => n_q.sqrt() * raw.sqrt(),
        NonstationaryMethod::BurnIn { n_q, t0, gap, kind } => {
            nq_decay(*n_q, *t0, *gap, *kind)?.value.sqrt() * raw.sqrt()
        }
        NonstationaryMethod::Additive { d_tv } => raw + d_tv,
    };
    Ok(ClampedValue::at_most(value, 1.0))
}

/// Bound on `N_{q P^{t0}}`: `1 + (N_q - 1)(1 - gamma*)^{2 t0}` for reversible
/// chains, `1 + (N_q - 1)(1 - gamma_ps)^{t0 - 1/gamma_ps}` otherwise. The
/// second exponent is the square of the norm bound
/// `||P^t||^2 <= (1 - gamma_ps)^{t - 1/gamma_ps}` behind the total variation
/// decay bound; doubling it fails already for two-state chains, where
/// `N_{q P^t} - 1 = (N_q - 1) lambda^{2t}` exactly. A negative exponent is
/// replaced by the trivial `N_q`.
pub fn nq_decay(n_q: f64, t0: usize, gap: f64, kind: GapKind) -> Result<ClampedValue> {
    if !(n_q >= 1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!("N_q = {n_q} is below 1")));
    }
    if !(gap > 0.0 && gap <= 1.0) {
        return Err(Error::InvalidInput(format!("gap {gap} outside (0, 1]")));
    }
    if n_q == 1.0 {
        return Ok(ClampedValue { value: 1.0, clamped: false });
    }
    let t0 = t0 as f64;
    let power = match kind {
        GapKind::Reversible => 2.0 * t0,
        GapKind::Pseudo => t0 - 1.0 / gap,
    };
    if power < 0.0 {
        return Ok(ClampedValue { value: n_q, clamped: true });
    }
    Ok(ClampedValue { value: 1.0 + (n_q - 1.0) * (1.0 - gap).powf(power), clamped: false })
}

/// `T_[a,b](x) = min(max(x, a), b)`
pub fn clip(x: f64, a: f64, b: f64) -> f64 {
    x.max(a).min(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationBound {
    /// Bound on the tail of the clipped sum.
    pub inner: f64,
    /// `n pi(f < a) + n pi(f > b)`
    pub correction: f64,
    pub total: ClampedValue,
}

/// Tail bound for `sum f(X_i) >= t` with unbounded `f`: the bound for the
/// clipped function `T_[a,b] o f` (supplied by `inner_bound`, which receives
/// the clipped values) plus the probability that any summand is clipped.
pub fn truncated_tail_bound<F>(
    pi: &Distribution,
    f: &[f64],
    n: usize,
    a: f64,
    b: f64,
    inner_bound: F,
) -> Result<TruncationBound>
where
    F: FnOnce(&[f64]) -> Result<f64>,
{
    if !(a < b) {
        return Err(Error::InvalidInput(format!("need a < b, got a = {a}, b = {b}")));
    }
    if f.len() != pi.len() {
        return Err(Error::ShapeMismatch("function length differs from state count".into()));
    }
    let clipped: Vec<f64> = f.iter().map(|&x| clip(x, a, b)).collect();
    let inner = inner_bound(&clipped)?;
    let mass = |pred: &dyn Fn(f64) -> bool| -> f64 {
        pi.weights().iter().zip(f).filter(|(_, &x)| pred(x)).map(|(w, _)| w).sum()
    };
    let correction = n as f64 * (mass(&|x| x < a) + mass(&|x| x > b));
    Ok(TruncationBound { inner, correction, total: ClampedValue::at_most(inner + correction, 1.0) })
}

/// `2 exp(-t^2 / (2 ||c||^2 tau_min))`
pub fn mcdiarmid_markov_tail(c: &[f64], tau_min: f64, t: f64) -> Result<TailBound> {
    if c.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidInput("c must be entrywise >= 0".into()));
    }
    if !(tau_min > 0.0) {
        return Err(Error::InvalidInput(format!("tau_min must be > 0, got {tau_min}")));
    }
    let c2: f64 = c.iter().map(|x| x * x).sum();
    let exponent = if t == 0.0 { 0.0 } else { t * t / (2.0 * c2 * tau_min) };
    Ok(TailBound::from_exponent(exponent, false))
}

/// Concentration of `d_TV(pi_em, pi)` around its mean:
/// `2 exp(-t^2 n / (8 t_mix))`, the Markov McDiarmid tail with
/// `c_i = 1/n` and `tau_min <= 4 t_mix`.
pub fn empirical_tv_concentration_tail(n: usize, t_mix: usize, t: f64) -> Result<TailBound> {
    if n == 0 || t_mix == 0 {
        return Err(Error::InvalidInput("n and t_mix must be >= 1".into()));
    }
    Ok(TailBound::from_exponent(t * t * n as f64 / (8.0 * t_mix as f64), false))
}

/// `sum_x min(sqrt(2 pi(x) / (n gamma)), pi(x))` bounding
/// `E_pi d_TV(pi_em, pi)`. For [`GapKind::Pseudo`] the gap passed is
/// `gamma_ps` and is halved internally.
pub fn empirical_tv_mean_bound(pi: &Distribution, n: usize, gap: f64, kind: GapKind) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::ZeroGap);
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let g = match kind {
        GapKind::Reversible => gap,
        GapKind::Pseudo => gap / 2.0,
    };
    let scale = 2.0 / (n as f64 * g);
    Ok(pi.weights().iter().map(|&p| (scale * p).sqrt().min(p)).sum())
}

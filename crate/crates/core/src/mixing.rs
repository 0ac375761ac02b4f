//! Total-variation mixing profiles and the conversions between mixing
//! times and (pseudo) spectral gaps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Distribution, MarkovKernel};
use crate::linalg::Matrix;

pub const DEFAULT_EPS: [f64; 3] = [0.25, 0.125, 0.0625];
/// Below this worst-pair distance every later power agrees with `Pi` to
/// roundoff, and the scan stops.
const DBAR_FLOOR: f64 = 1e-15;

/// Smallest `eps` taken from a scanned table. Entries near roundoff (often
/// exactly 0) would otherwise certify `gamma* = 1`; `tau(max(eps, floor))`
/// is still at most the scanned `t`.
pub const EPS_FLOOR: f64 = 1e-10;

/// `d_TV(p, q) = 1/2 sum_x |p(x) - q(x)|`
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsTime {
    pub eps: f64,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    /// `(t, d(t))` with `d(t) = max_x d_TV(P^t(x, .), pi)`.
    pub d_table: Vec<(usize, f64)>,
    /// `(t, dbar(t))` with `dbar(t) = max_{x,y} d_TV(P^t(x, .), P^t(y, .))`.
    pub dbar_table: Vec<(usize, f64)>,
    /// Requested thresholds where `t_mix(eps)` was reached.
    pub t_mix_eps: Vec<EpsTime>,
    /// Requested thresholds where `tau(eps)` was reached.
    pub tau_eps: Vec<EpsTime>,
    /// Requested thresholds not reached by `d` within the scan.
    pub t_mix_unreached: Vec<f64>,
    /// Requested thresholds not reached by `dbar` within the scan.
    pub tau_unreached: Vec<f64>,
    /// `min_t t / (1 - dbar(t))^2` over scanned `t` with `dbar(t) < 1`.
    pub tau_min: Option<f64>,
    pub t_max_scanned: usize,
    /// `d(t_max)` is still above the smallest requested threshold.
    pub t_max_too_small: bool,
}

impl MixingReport {
    /// `d(t)`; beyond a scan that stopped early this is the last value.
    pub fn d(&self, t: usize) -> Option<f64> {
        lookup(&self.d_table, t)
    }

    pub fn dbar(&self, t: usize) -> Option<f64> {
        lookup(&self.dbar_table, t)
    }

    /// `min { t : d(t) <= eps }` within the scanned range.
    pub fn t_mix(&self, eps: f64) -> Option<usize> {
        first_below(&self.d_table, eps)
    }

    /// `min { t : dbar(t) <= eps }` within the scanned range.
    pub fn tau(&self, eps: f64) -> Option<usize> {
        first_below(&self.dbar_table, eps)
    }
}

fn lookup(table: &[(usize, f64)], t: usize) -> Option<f64> {
    if t == 0 {
        return None;
    }
    table.get(t - 1).or_else(|| table.last()).map(|&(_, v)| v)
}

fn first_below(table: &[(usize, f64)], eps: f64) -> Option<usize> {
    table.iter().find(|&&(_, v)| v <= eps).map(|&(t, _)| t)
}

/// Scan `d(t)` and `dbar(t)` for `t = 1..=t_max` by iterated matrix powers.
pub fn mixing_profile(p: &MarkovKernel, pi: &Distribution, t_max: usize, eps: &[f64]) -> Result<MixingReport> {
    if t_max == 0 {
        return Err(Error::InvalidInput("t_max must be >= 1".into()));
    }
    if pi.len() != p.len() {
        return Err(Error::ShapeMismatch("kernel and distribution sizes differ".into()));
    }
    let n = p.len();
    let mut power = Matrix::identity(n);
    let mut d_table = Vec::new();
    let mut dbar_table = Vec::new();
    for t in 1..=t_max {
        power = power.matmul(p.matrix());
        let d = (0..n).map(|x| tv_distance(power.row(x), pi.weights())).fold(0.0, f64::max);
        let mut dbar = 0.0_f64;
        for x in 0..n {
            for y in (x + 1)..n {
                dbar = dbar.max(tv_distance(power.row(x), power.row(y)));
            }
        }
        d_table.push((t, d));
        dbar_table.push((t, dbar));
        if dbar < DBAR_FLOOR && d < DBAR_FLOOR {
            break;
        }
    }
    let t_max_scanned = d_table.len();

    let first = |table: &[(usize, f64)]| {
        let mut hit = Vec::new();
        let mut miss = Vec::new();
        for &e in eps {
            match first_below(table, e) {
                Some(t) => hit.push(EpsTime { eps: e, t }),
                None => miss.push(e),
            }
        }
        (hit, miss)
    };
    let (t_mix_eps, t_mix_unreached) = first(&d_table);
    let (tau_eps, tau_unreached) = first(&dbar_table);

    let tau_min = dbar_table
        .iter()
        .filter(|&&(_, v)| v < 1.0)
        .map(|&(t, v)| t as f64 / ((1.0 - v) * (1.0 - v)))
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));

    let smallest_eps = eps.iter().copied().fold(f64::INFINITY, f64::min);
    let last_d = d_table.last().map_or(1.0, |&(_, v)| v);
    Ok(MixingReport {
        t_max_too_small: smallest_eps.is_finite() && last_d > smallest_eps,
        d_table,
        dbar_table,
        t_mix_eps,
        tau_eps,
        t_mix_unreached,
        tau_unreached,
        tau_min,
        t_max_scanned,
    })
}

/// Default scan horizon, `64 * |states|`.
pub fn default_t_max(p: &MarkovKernel) -> usize {
    64 * p.len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapLowerBounds {
    /// `max_eps 1 / (1 + tau(eps) / log(1/eps))`; reversible chains only.
    pub gamma_star_lb: Option<f64>,
    /// `max_eps (1 - eps) / tau(eps)`.
    pub gamma_ps_lb: f64,
    /// `1 / (1 + t_mix / log 2)`, reversible chains with `t_mix` reached.
    pub gamma_star_lb_tmix: Option<f64>,
    /// `1 / (2 t_mix)` when `t_mix` was reached.
    pub gamma_ps_lb_tmix: Option<f64>,
}

/// Lower bounds on `gamma*` (reversible) and `gamma_ps` implied by the
/// scanned mixing profile. Every scanned `dbar(t) < 1`, raised to at least
/// [`EPS_FLOOR`], is a usable `eps`.
pub fn gap_lower_bounds_from_mixing(report: &MixingReport, reversible: bool) -> Result<GapLowerBounds> {
    let usable: Vec<(f64, usize)> = report
        .dbar_table
        .iter()
        .filter(|&&(_, v)| v < 1.0)
        .map(|&(_, v)| {
            let e = v.max(EPS_FLOOR);
            (e, report.tau(e).expect("a scanned value lies below e"))
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::NoFiniteTau);
    }
    let gamma_ps_lb = usable.iter().map(|&(e, tau)| (1.0 - e) / tau as f64).fold(0.0, f64::max);
    let gamma_star_lb = reversible
        .then(|| usable.iter().map(|&(e, tau)| 1.0 / (1.0 + tau as f64 / (1.0 / e).ln())).fold(0.0, f64::max));
    let t_mix = report.t_mix(0.25);
    Ok(GapLowerBounds {
        gamma_star_lb,
        gamma_ps_lb,
        gamma_star_lb_tmix: t_mix.filter(|_| reversible).map(|t| 1.0 / (1.0 + t as f64 / 2f64.ln())),
        gamma_ps_lb_tmix: t_mix.map(|t| 1.0 / (2.0 * t as f64)),
    })
}

/// Which gap feeds a mixing-time or decay estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    /// Absolute spectral gap of a reversible chain.
    Reversible,
    /// Pseudo spectral gap, any chain.
    Pseudo,
}

/// Upper bound on `t_mix(eps)` from a gap:
/// `(2 log(1/(2 eps)) + log(1/pi_min)) / (2 gamma*)` for reversible chains,
/// `(1 + 2 log(1/(2 eps)) + log(1/pi_min)) / gamma_ps` in general.
///
/// These follow from the total variation decay bounds, which only reach
/// integer times: what is guaranteed is `t_mix(eps) <= ceil(bound)`. A
/// two-state chain with `lambda = -0.4219`, `pi_min = 0.4021` has
/// `t_mix = 2` against a bound of `1.987`.
pub fn mixing_upper_bound_from_gap(gap: f64, kind: GapKind, pi_min: f64, eps: f64) -> Result<f64> {
    if gap <= 0.0 {
        return Err(Error::ZeroGap);
    }
    if !(pi_min > 0.0 && pi_min <= 1.0) {
        return Err(Error::InvalidInput(format!("pi_min {pi_min} outside (0, 1]")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidInput(format!("eps {eps} outside (0, 1]")));
    }
    let core = 2.0 * (1.0 / (2.0 * eps)).ln() + (1.0 / pi_min).ln();
    Ok(match kind {
        GapKind::Reversible => core / (2.0 * gap),
        GapKind::Pseudo => (1.0 + core) / gap,
    })
}

/// Inputs for [`tv_decay_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum TvDecayInput {
    /// `1/2 (1 - gamma*)^n sqrt(N_q - 1)`
    Reversible { n_q: f64, gamma_star: f64 },
    /// `1/2 (1 - gamma_ps)^{(n - 1/gamma_ps)/2} sqrt(N_q - 1)`
    Pseudo { n_q: f64, gamma_ps: f64 },
    /// `2^{-floor(n / t_mix)}`
    UniformTmix { t_mix: usize },
    /// `min_eps eps^{floor(n / tau(eps))}` over a scanned profile.
    UniformProfile { dbar_table: Vec<(usize, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampedValue {
    pub value: f64,
    /// The raw formula exceeded the trivial bound and was replaced by it.
    pub clamped: bool,
}

impl ClampedValue {
    pub(crate) fn at_most(raw: f64, cap: f64) -> Self {
        if raw > cap || raw.is_nan() {
            ClampedValue { value: cap, clamped: true }
        } else {
            ClampedValue { value: raw, clamped: false }
        }
    }
}

/// Bound on `d_TV(q P^n, pi)`, capped at 1.
pub fn tv_decay_bound(n: usize, input: &TvDecayInput) -> Result<ClampedValue> {
    let nf = n as f64;
    let raw = match input {
        TvDecayInput::Reversible { n_q, gamma_star } => {
            check_nq(*n_q)?;
            0.5 * (1.0 - gamma_star).powf(nf) * (n_q - 1.0).sqrt()
        }
        TvDecayInput::Pseudo { n_q, gamma_ps } => {
            check_nq(*n_q)?;
            if *gamma_ps <= 0.0 {
                return Err(Error::ZeroGap);
            }
            if *n_q == 1.0 {
                0.0
            } else {
                0.5 * (1.0 - gamma_ps).powf((nf - 1.0 / gamma_ps) / 2.0) * (n_q - 1.0).sqrt()
            }
        }
        TvDecayInput::UniformTmix { t_mix } => {
            if *t_mix == 0 {
                return Err(Error::InvalidInput("t_mix must be >= 1".into()));
            }
            0.5f64.powi((n / t_mix) as i32)
        }
        TvDecayInput::UniformProfile { dbar_table } => {
            let mut best = 1.0_f64;
            for &(_, eps) in dbar_table {
                let eps = eps.max(EPS_FLOOR);
                if let Some(tau) = first_below(dbar_table, eps) {
                    best = best.min(eps.powi((n / tau) as i32));
                }
            }
            best
        }
    };
    Ok(ClampedValue::at_most(raw, 1.0))
}

fn check_nq(n_q: f64) -> Result<()> {
    if n_q < 1.0 - 1e-12 || n_q.is_nan() {
        return Err(Error::InvalidInput(format!("N_q = {n_q} is below 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn profile(rows: &[Vec<f64>], t_max: usize) -> MixingReport {
        let p = MarkovKernel::from_rows(rows).unwrap();
        let pi = p.stationary_distribution().unwrap();
        mixing_profile(&p, &pi, t_max, &DEFAULT_EPS).unwrap()
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_abs_diff_eq!(tv_distance(&[0.6, 0.4], &[0.5, 0.5]), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn rank_one_mixes_in_one_step() {
        let r = profile(&[vec![0.3, 0.7], vec![0.3, 0.7]], 10);
        assert!(r.d(1).unwrap() < 1e-15);
        assert_eq!(r.t_mix(0.25), Some(1));
        assert_eq!(r.t_max_scanned, 1);
        assert_abs_diff_eq!(r.tau_min.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_state_closed_form() {
        let r = profile(&[vec![0.6, 0.4], vec![0.4, 0.6]], 20);
        for &(t, d) in &r.d_table {
            assert_abs_diff_eq!(d, 0.5 * 0.2f64.powi(t as i32), epsilon = 1e-15);
        }
        for &(t, d) in &r.dbar_table {
            assert_abs_diff_eq!(d, 0.2f64.powi(t as i32), epsilon = 1e-15);
        }
        assert_eq!(r.t_mix(0.25), Some(1));
        assert_abs_diff_eq!(r.tau_min.unwrap(), 1.5625, epsilon = 1e-12);
        assert!(!r.t_max_too_small);
    }

    #[test]
    fn periodic_chain_never_mixes() {
        let r = profile(&[vec![0.0, 1.0], vec![1.0, 0.0]], 16);
        assert!(r.d_table.iter().all(|&(_, d)| (d - 0.5).abs() < 1e-15));
        assert_eq!(r.t_mix(0.25), None);
        assert_eq!(r.t_mix_unreached, DEFAULT_EPS.to_vec());
        assert!(r.t_max_too_small);
        assert_eq!(r.tau_min, None);
        assert_eq!(gap_lower_bounds_from_mixing(&r, true), Err(Error::NoFiniteTau));
    }

    #[test]
    fn lower_bounds_for_rank_one() {
        let r = profile(&[vec![0.5, 0.5], vec![0.5, 0.5]], 10);
        let lb = gap_lower_bounds_from_mixing(&r, true).unwrap();
        assert_abs_diff_eq!(lb.gamma_star_lb_tmix.unwrap(), 0.40938389085035876, epsilon = 1e-12);
        assert_abs_diff_eq!(lb.gamma_ps_lb_tmix.unwrap(), 0.5, epsilon = 1e-15);
        // dbar(1) = 0 is read as eps = EPS_FLOOR
        assert_abs_diff_eq!(lb.gamma_star_lb.unwrap(), 1.0 / (1.0 + 1.0 / (1e10f64).ln()), epsilon = 1e-15);
        assert_abs_diff_eq!(lb.gamma_ps_lb, 1.0 - EPS_FLOOR, epsilon = 1e-15);
    }

    #[test]
    fn upper_bound_examples() {
        let v = mixing_upper_bound_from_gap(0.8, GapKind::Reversible, 0.5, 0.25).unwrap();
        assert_abs_diff_eq!(v, 3.0 * 2f64.ln() / 1.6, epsilon = 1e-14);
        let v = mixing_upper_bound_from_gap(0.5, GapKind::Pseudo, 0.25, 0.25).unwrap();
        assert_abs_diff_eq!(v, (1.0 + 4.0 * 2f64.ln()) / 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 7.545177444479562, epsilon = 1e-12);
        assert_eq!(mixing_upper_bound_from_gap(0.0, GapKind::Pseudo, 0.25, 0.25), Err(Error::ZeroGap));
        let mut last = 0.0;
        for g in [0.5, 0.1, 0.01, 1e-4, 1e-8] {
            let v = mixing_upper_bound_from_gap(g, GapKind::Reversible, 0.1, 0.25).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn decay_examples() {
        let v = tv_decay_bound(10, &TvDecayInput::Reversible { n_q: 2.0, gamma_star: 0.8 }).unwrap();
        assert_abs_diff_eq!(v.value, 0.5 * 0.2f64.powi(10), epsilon = 1e-20);
        assert_abs_diff_eq!(v.value, 5.12e-8, epsilon = 1e-20);
        let v = tv_decay_bound(10, &TvDecayInput::UniformTmix { t_mix: 1 }).unwrap();
        assert_eq!(v.value, 2f64.powi(-10));
        let v = tv_decay_bound(3, &TvDecayInput::Reversible { n_q: 1.0, gamma_star: 0.1 }).unwrap();
        assert_eq!(v.value, 0.0);
        let v = tv_decay_bound(3, &TvDecayInput::Pseudo { n_q: 1.0, gamma_ps: 0.1 }).unwrap();
        assert_eq!(v.value, 0.0);
        let v = tv_decay_bound(0, &TvDecayInput::Reversible { n_q: 100.0, gamma_star: 0.1 }).unwrap();
        assert!(v.clamped);
        assert_eq!(v.value, 1.0);
    }

    #[test]
    fn profile_decay_beats_tmix_decay() {
        let r = profile(&[vec![0.6, 0.4], vec![0.4, 0.6]], 30);
        let prof = tv_decay_bound(10, &TvDecayInput::UniformProfile { dbar_table: r.dbar_table.clone() }).unwrap();
        let tm = tv_decay_bound(10, &TvDecayInput::UniformTmix { t_mix: r.t_mix(0.25).unwrap() }).unwrap();
        assert!(prof.value <= tm.value);
        assert!(r.d(10).unwrap() <= prof.value);
    }

    #[test]
    fn rejects_zero_horizon() {
        let p = MarkovKernel::from_rows(&[vec![1.0]]).unwrap();
        let pi = p.stationary_distribution().unwrap();
        assert!(mixing_profile(&p, &pi, 0, &DEFAULT_EPS).is_err());
    }
}

//! Likelihood-ratio test between two Markov chains on the same states, with
//! Type-I and Type-II error bounds from the Bernstein inequality applied to
//! the chain of consecutive pairs.
//!
//! Logarithms are natural. The statistic is computed on any sequence; the
//! error bounds assume the data start in stationarity.

use serde::{Deserialize, Serialize};

use crate::bounds::TailBound;
use crate::error::{Error, Result};
use crate::kernel::{Distribution, MarkovKernel};
use crate::spectral;

/// The 10001 coin tosses bundled with the crate, as `0`/`1` characters.
pub const COIN_TOSSES: &str = include_str!("../data/coin_tosses.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTest {
    pub p0: MarkovKernel,
    pub p1: MarkovKernel,
    pub pi0: Distribution,
    pub pi1: Distribution,
    pub q0: MarkovKernel,
    pub q1: MarkovKernel,
    /// `max log P0 - min log P0`
    pub delta0: f64,
    pub delta1: f64,
    pub delta: f64,
    /// `E log(P0/P1)` under the stationary pair law of `P0`.
    pub j0: f64,
    /// Same under `P1`; non-positive.
    pub j1: f64,
    pub v0: f64,
    pub v1: f64,
    pub gamma_ps_q0: f64,
    pub k_ps_q0: usize,
    pub gamma_ps_q1: f64,
    pub k_ps_q1: usize,
    pub xi: f64,
    /// `log(P0(x, y) / P1(x, y))` indexed as the pair chain.
    log_ratio: Vec<f64>,
}

fn log_range(p: &MarkovKernel) -> f64 {
    let logs = p.matrix().as_slice().iter().map(|x| x.ln());
    let (lo, hi) = logs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi - lo
}

fn require_positive(p: &MarkovKernel) -> Result<()> {
    let n = p.len();
    for x in 0..n {
        for y in 0..n {
            if !(p.get(x, y) > 0.0) {
                return Err(Error::ZeroTransitionProbability(p.states()[x].clone(), p.states()[y].clone()));
            }
        }
    }
    Ok(())
}

pub fn build_test(p0: &MarkovKernel, p1: &MarkovKernel, xi: f64) -> Result<HypothesisTest> {
    if p0.states() != p1.states() {
        return Err(Error::ShapeMismatch("hypotheses use different state labels".into()));
    }
    require_positive(p0)?;
    require_positive(p1)?;
    let n = p0.len();
    let pi0 = p0.stationary_distribution()?;
    let pi1 = p1.stationary_distribution()?;
    let (q0, pair0) = p0.pair_chain()?;
    let (q1, pair1) = p1.pair_chain()?;
    let log_ratio: Vec<f64> = (0..n * n).map(|i| (p0.get(i / n, i % n) / p1.get(i / n, i % n)).ln()).collect();
    let gps0 = spectral::pseudo_spectral_gap(&q0, &pair0, None)?;
    let gps1 = spectral::pseudo_spectral_gap(&q1, &pair1, None)?;
    let delta0 = log_range(p0);
    let delta1 = log_range(p1);
    Ok(HypothesisTest {
        p0: p0.clone(),
        p1: p1.clone(),
        pi0,
        pi1,
        delta0,
        delta1,
        delta: delta0 + delta1,
        j0: pair0.expectation(&log_ratio),
        j1: pair1.expectation(&log_ratio),
        v0: pair0.variance(&log_ratio),
        v1: pair1.variance(&log_ratio),
        gamma_ps_q0: gps0.gamma_ps,
        k_ps_q0: gps0.k_ps,
        gamma_ps_q1: gps1.gamma_ps,
        k_ps_q1: gps1.k_ps,
        q0,
        q1,
        xi,
        log_ratio,
    })
}

/// Normalized log-likelihood ratio of an observed sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    /// `T(X) / (n - 1)`, including `log(pi0(X_1) / pi1(X_1))`.
    pub value: f64,
    /// Sum over consecutive pairs only, divided by `n - 1`.
    pub pairs_only: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    StandBy,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: Statistic,
    pub xi: f64,
    pub decision: Decision,
    pub type1: TailBound,
    pub type2: TailBound,
}

impl HypothesisTest {
    pub fn statistic(&self, obs: &[usize]) -> Result<Statistic> {
        if obs.len() < 2 {
            return Err(Error::TooShort { needed: 2, got: obs.len() });
        }
        let k = self.p0.len();
        if let Some(&bad) = obs.iter().find(|&&x| x >= k) {
            return Err(Error::UnknownState(format!("index {bad}")));
        }
        let pairs: f64 = obs.windows(2).map(|w| self.log_ratio[w[0] * k + w[1]]).sum();
        let prior = (self.pi0.weights()[obs[0]] / self.pi1.weights()[obs[0]]).ln();
        let m = (obs.len() - 1) as f64;
        Ok(Statistic { value: (pairs + prior) / m, pairs_only: pairs / m, n: obs.len() })
    }

    /// Feasible thresholds `[J1 + delta/(n-1), J0 - delta/(n-1)]`.
    pub fn threshold_range(&self, n: usize) -> (f64, f64) {
        let shift = self.delta / (n.saturating_sub(1)) as f64;
        (self.j1 + shift, self.j0 - shift)
    }

    /// One-sided bounds on the Type-I error `P0(T/(n-1) <= xi)` and the
    /// Type-II error `P1(T/(n-1) > xi)` for `n` observations.
    pub fn error_bounds(&self, n: usize) -> Result<(TailBound, TailBound)> {
        if n < 2 {
            return Err(Error::TooShort { needed: 2, got: n });
        }
        let (lo, hi) = self.threshold_range(n);
        if !(lo <= self.xi && self.xi <= hi) {
            return Err(Error::ThresholdOutOfRange { xi: self.xi, lo, hi });
        }
        let m = (n - 1) as f64;
        let exponent = |gap: f64, v: f64, gamma_ps: f64| {
            if gap == 0.0 {
                0.0
            } else {
                gap * gap * m * gamma_ps / (8.0 * v + 20.0 * self.delta * gap)
            }
        };
        let e1 = exponent(hi - self.xi, self.v0, self.gamma_ps_q0);
        let e2 = exponent(self.xi - lo, self.v1, self.gamma_ps_q1);
        Ok((TailBound::from_exponent(e1, true), TailBound::from_exponent(e2, true)))
    }

    /// Stand by `H0` when `T/(n-1) > xi`, reject otherwise.
    pub fn decide(&self, obs: &[usize]) -> Result<TestReport> {
        let statistic = self.statistic(obs)?;
        let (type1, type2) = self.error_bounds(obs.len())?;
        let decision = if statistic.value > self.xi { Decision::StandBy } else { Decision::Reject };
        Ok(TestReport { statistic, xi: self.xi, decision, type1, type2 })
    }
}

/// Map observation text to state indices. Whitespace-separated labels are
/// tried first; otherwise every non-whitespace character is one label, as in
/// a run of `0`/`1` digits.
pub fn parse_observations(text: &str, states: &[String]) -> Result<Vec<usize>> {
    let index = |s: &str| states.iter().position(|l| l == s);
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if let Some(ix) = tokens.iter().map(|t| index(t)).collect::<Option<Vec<_>>>() {
        return Ok(ix);
    }
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| {
            let mut buf = [0u8; 4];
            index(c.encode_utf8(&mut buf)).ok_or_else(|| Error::UnknownState(c.to_string()))
        })
        .collect()
}

/// Fair coin `P0` and sticky coin `P1 = [[0.6, 0.4], [0.4, 0.6]]` on `0`/`1`.
pub fn coin_kernels() -> (MarkovKernel, MarkovKernel) {
    let states = vec!["0".to_string(), "1".to_string()];
    let p0 = crate::linalg::Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).expect("square");
    let p1 = crate::linalg::Matrix::from_rows(&[vec![0.6, 0.4], vec![0.4, 0.6]]).expect("square");
    (MarkovKernel::new(states.clone(), p0).expect("valid kernel"), MarkovKernel::new(states, p1).expect("valid kernel"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn coin_test() -> HypothesisTest {
        let (p0, p1) = coin_kernels();
        build_test(&p0, &p1, 0.0).unwrap()
    }

    #[test]
    fn coin_quantities() {
        let t = coin_test();
        assert_eq!(t.delta0, 0.0);
        assert_abs_diff_eq!(t.delta1, 1.5f64.ln(), epsilon = 1e-15);
        // two equally likely pair types: same (log 5/6) and switch (log 5/4)
        let same = (0.5f64 / 0.6).ln();
        let switch = (0.5f64 / 0.4).ln();
        assert_abs_diff_eq!(t.j0, 0.5 * same + 0.5 * switch, epsilon = 1e-15);
        assert_abs_diff_eq!(t.j1, 0.6 * same + 0.4 * switch, epsilon = 1e-15);
        assert_abs_diff_eq!(t.v0, 0.25 * (switch - same).powi(2), epsilon = 1e-15);
        assert_abs_diff_eq!(t.v1, 0.24 * (switch - same).powi(2), epsilon = 1e-15);
        assert_abs_diff_eq!(t.j0, 2.0411e-2, epsilon = 5e-7);
        assert_abs_diff_eq!(t.j1, -2.0136e-2, epsilon = 5e-7);
        assert_abs_diff_eq!(t.v0, 4.110e-2, epsilon = 5e-6);
        assert_abs_diff_eq!(t.v1, 3.946e-2, epsilon = 5e-6);
        assert_abs_diff_eq!(t.gamma_ps_q0, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(t.gamma_ps_q1, 0.48, epsilon = 1e-9);
    }

    #[test]
    fn identical_hypotheses() {
        let (_, p1) = coin_kernels();
        let t = build_test(&p1, &p1, 0.0).unwrap();
        assert_eq!((t.j0, t.j1, t.v0, t.v1), (0.0, 0.0, 0.0, 0.0));
        assert!(t.delta.is_finite());
        let s = t.statistic(&[0, 1, 1, 0, 1]).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn zero_entry_rejected() {
        let (p0, _) = coin_kernels();
        let p1 = MarkovKernel::new(
            p0.states().to_vec(),
            crate::linalg::Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap(),
        )
        .unwrap();
        assert!(matches!(build_test(&p0, &p1, 0.0), Err(Error::ZeroTransitionProbability(..))));
    }

    #[test]
    fn all_heads_statistic() {
        let s = coin_test().statistic(&[0, 0, 0]).unwrap();
        assert_abs_diff_eq!(s.value, (5.0f64 / 6.0).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.value, -0.18232, epsilon = 1e-5);
    }

    #[test]
    fn statistic_errors() {
        let t = coin_test();
        assert_eq!(t.statistic(&[0]), Err(Error::TooShort { needed: 2, got: 1 }));
        assert!(matches!(t.statistic(&[0, 2]), Err(Error::UnknownState(_))));
    }

    #[test]
    fn bundled_data() {
        let t = coin_test();
        let obs = parse_observations(COIN_TOSSES, t.p0.states()).unwrap();
        assert_eq!(obs.len(), 10001);
        let report = t.decide(&obs).unwrap();
        assert_abs_diff_eq!(report.statistic.value, -7.080e-3, epsilon = 0.005 * 7.080e-3);
        assert_eq!(report.decision, Decision::Reject);
    }

    #[test]
    fn coin_exponents() {
        let (b1, b2) = coin_test().error_bounds(10000).unwrap();
        assert!((b1.exponent / 4.120 - 1.0).abs() < 0.05, "{}", b1.exponent);
        assert!((b2.exponent / 4.133 - 1.0).abs() < 0.05, "{}", b2.exponent);
        assert!(b1.one_sided && b2.one_sided);
        assert_abs_diff_eq!(b1.probability, (-b1.exponent).exp(), epsilon = 1e-15);
    }

    #[test]
    fn exponents_grow_with_n() {
        let t = coin_test();
        let (a1, a2) = t.error_bounds(1000).unwrap();
        let (b1, b2) = t.error_bounds(2000).unwrap();
        assert!(b1.exponent > a1.exponent && b2.exponent > a2.exponent);
    }

    #[test]
    fn infeasible_threshold() {
        let t = coin_test();
        assert!(matches!(t.error_bounds(10), Err(Error::ThresholdOutOfRange { .. })));
        let (lo, hi) = t.threshold_range(40);
        assert!(lo <= 0.0 && 0.0 <= hi);
        let (b1, b2) = t.error_bounds(40).unwrap();
        assert!(b1.probability > 0.9 && b2.probability > 0.5);
    }

    #[test]
    fn tie_rejects() {
        let t = coin_test();
        let obs = parse_observations(COIN_TOSSES, t.p0.states()).unwrap();
        let s = t.statistic(&obs).unwrap().value;
        let tied = HypothesisTest { xi: s, ..t };
        assert_eq!(tied.decide(&obs).unwrap().decision, Decision::Reject);
        let below = HypothesisTest { xi: s - 1e-6, ..tied };
        assert_eq!(below.decide(&obs).unwrap().decision, Decision::StandBy);
    }

    #[test]
    fn parse_formats() {
        let states: Vec<String> = ["a", "bb", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(parse_observations("a bb\nc  a", &states).unwrap(), vec![0, 1, 2, 0]);
        let bits: Vec<String> = vec!["0".into(), "1".into()];
        assert_eq!(parse_observations("01\n10 1", &bits).unwrap(), vec![0, 1, 1, 0, 1]);
        assert!(matches!(parse_observations("012", &bits), Err(Error::UnknownState(_))));
    }
}

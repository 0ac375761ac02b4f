//! Seeded Monte Carlo for checking the bounds empirically.
//!
//! Trial `i` draws from ChaCha8 seeded with the experiment seed on stream
//! `i`, so results do not depend on how trials are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BernsteinSpec, BernsteinVariant, TailBound};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::kernel::{Distribution, MarkovKernel, REVERSIBILITY_TOL};
use crate::mixing::{self, tv_distance, GapKind};
use crate::spectral;

/// Slack, in binomial standard errors, before a bound counts as violated.
pub const VIOLATION_SIGMAS: f64 = 3.0;
const COMPARE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Stationary,
    Given(Distribution),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub trials: usize,
    /// Path length.
    pub n: usize,
    pub init: Init,
    pub execution: Execution,
}

impl SimConfig {
    pub fn new(seed: u64, trials: usize, n: usize) -> Self {
        SimConfig { seed, trials, n, init: Init::Stationary, execution: Execution::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.n == 0 {
            return Err(Error::InvalidInput("trials and n must be >= 1".into()));
        }
        Ok(())
    }
}

/// Random generator for one trial.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Inverse-CDF sampler over the rows of a kernel.
#[derive(Debug, Clone)]
pub struct PathSampler {
    init: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    w.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

fn draw(cum: &[f64], u: f64) -> usize {
    let i = cum.partition_point(|&c| c <= u);
    if i < cum.len() {
        return i;
    }
    // u at or above the rounded total: take the last state with mass
    (0..cum.len()).rev().find(|&j| j == 0 || cum[j] > cum[j - 1]).unwrap_or(0)
}

impl PathSampler {
    pub fn new(p: &MarkovKernel, init: &Distribution) -> Result<Self> {
        if init.len() != p.len() {
            return Err(Error::ShapeMismatch("initial distribution and kernel differ in size".into()));
        }
        let rows = (0..p.len()).map(|x| cumulative(p.matrix().row(x))).collect();
        Ok(PathSampler { init: cumulative(init.weights()), rows })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<usize> {
        let mut path = Vec::with_capacity(n);
        if n == 0 {
            return path;
        }
        let mut x = draw(&self.init, rng.gen());
        path.push(x);
        for _ in 1..n {
            x = draw(&self.rows[x], rng.gen());
            path.push(x);
        }
        path
    }
}

/// Path of length `n` drawn with stream 0 of `seed`.
pub fn sample_path(p: &MarkovKernel, init: &Distribution, n: usize, seed: u64) -> Result<Vec<usize>> {
    Ok(PathSampler::new(p, init)?.sample(&mut trial_rng(seed, 0), n))
}

/// Occupation frequencies of a path.
pub fn empirical_distribution(path: &[usize], n_states: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n_states];
    for &x in path {
        counts[x] += 1.0;
    }
    let len = path.len() as f64;
    counts.iter_mut().for_each(|c| *c /= len);
    counts
}

/// `d_TV(pi_em, pi)` for the occupation measure of `path`.
pub fn empirical_tv(path: &[usize], pi: &Distribution) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::InvalidInput("empty path".into()));
    }
    if let Some(&x) = path.iter().find(|&&x| x >= pi.len()) {
        return Err(Error::UnknownState(format!("index {x}")));
    }
    Ok(tv_distance(&empirical_distribution(path, pi.len()), pi.weights()))
}

/// A bound on `P_pi(|S - E_pi S| >= t)` for `S = f(X_1) + ... + f(X_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailEvaluator {
    Bernstein {
        name: String,
        spec: BernsteinSpec,
    },
    /// Markov McDiarmid with `c_i = c` for every coordinate.
    McDiarmid {
        name: String,
        c: f64,
        tau_min: f64,
    },
}

impl TailEvaluator {
    pub fn name(&self) -> &str {
        match self {
            TailEvaluator::Bernstein { name, .. } | TailEvaluator::McDiarmid { name, .. } => name,
        }
    }

    pub fn evaluate(&self, n: usize, t: f64) -> Result<TailBound> {
        match self {
            TailEvaluator::Bernstein { spec, .. } => bounds::bernstein_tail(spec, t),
            TailEvaluator::McDiarmid { c, tau_min, .. } => bounds::mcdiarmid_markov_tail(&vec![*c; n], *tau_min, t),
        }
    }
}

/// The bounds that apply to `S` for this chain: RevSigma and Rev when the
/// chain is reversible with a positive gap, NonRev when the pseudo spectral
/// gap is positive, and McDiarmid when `tau_min` is finite. `C` is the range
/// of `f`.
pub fn standard_evaluators(p: &MarkovKernel, f: &[f64], n: usize) -> Result<Vec<TailEvaluator>> {
    let pi = p.stationary_distribution()?;
    let c = bounds::default_c(f);
    if !(c > 0.0) {
        return Ok(Vec::new());
    }
    let v_f = pi.variance(f);
    let base = BernsteinSpec { n: Some(n), v_f: Some(v_f), c: Some(c), ..Default::default() };
    let mut out = Vec::new();
    if p.is_reversible(&pi, REVERSIBILITY_TOL) {
        let gamma = spectral::spectral_gap(p, &pi)?;
        if gamma > 0.0 {
            let sigma = spectral::asymptotic_variance(p, &pi, f)?;
            for (name, variant) in [("rev_sigma", BernsteinVariant::RevSigma), ("rev", BernsteinVariant::Rev)] {
                let spec = BernsteinSpec {
                    variant: Some(variant),
                    gamma: Some(gamma),
                    sigma_as2: Some(sigma),
                    ..base.clone()
                };
                out.push(TailEvaluator::Bernstein { name: name.into(), spec });
            }
        }
    }
    let gps = spectral::pseudo_spectral_gap(p, &pi, None)?.gamma_ps;
    if gps > 0.0 {
        let spec = BernsteinSpec { variant: Some(BernsteinVariant::NonRev), gamma_ps: Some(gps), ..base };
        out.push(TailEvaluator::Bernstein { name: "nonrev".into(), spec });
    }
    let profile = mixing::mixing_profile(p, &pi, mixing::default_t_max(p), &mixing::DEFAULT_EPS)?;
    if let Some(tau_min) = profile.tau_min {
        out.push(TailEvaluator::McDiarmid { name: "mcdiarmid".into(), c, tau_min });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSeries {
    pub name: String,
    pub values: Vec<f64>,
    pub exponents: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub bound: String,
    pub t: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailExperimentReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub mean: f64,
    pub t_grid: Vec<f64>,
    pub empirical_tail: Vec<f64>,
    pub std_error: Vec<f64>,
    pub bounds: Vec<BoundSeries>,
    pub violations: Vec<Violation>,
}

impl TailExperimentReport {
    /// One row per `t`: `t,empirical,std_error,<bound>...`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,empirical,std_error");
        for b in &self.bounds {
            out.push(',');
            out.push_str(&b.name);
        }
        out.push('\n');
        for (i, t) in self.t_grid.iter().enumerate() {
            out.push_str(&format!("{t},{},{}", self.empirical_tail[i], self.std_error[i]));
            for b in &self.bounds {
                out.push_str(&format!(",{}", b.values[i]));
            }
            out.push('\n');
        }
        out
    }
}

fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Frequency of `|x - center| >= t` for each `t`.
fn tail_frequencies(samples: &[f64], center: f64, t_grid: &[f64]) -> Vec<f64> {
    let trials = samples.len() as f64;
    t_grid.iter().map(|&t| samples.iter().filter(|&&x| (x - center).abs() >= t).count() as f64 / trials).collect()
}

fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidInput("t grid must be finite and >= 0".into()));
    }
    Ok(())
}

/// Estimate `P_pi(|S - E_pi S| >= t)` over `t_grid` from independent
/// stationary paths and compare with each evaluator.
pub fn tail_experiment(
    p: &MarkovKernel,
    f: &[f64],
    config: &SimConfig,
    t_grid: &[f64],
    evaluators: &[TailEvaluator],
) -> Result<TailExperimentReport> {
    config.validate()?;
    validate_grid(t_grid)?;
    if f.len() != p.len() {
        return Err(Error::ShapeMismatch("function length differs from state count".into()));
    }
    if config.init != Init::Stationary {
        return Err(Error::InvalidInput("tail experiments sample from the stationary law".into()));
    }
    let pi = p.stationary_distribution()?;
    let sampler = PathSampler::new(p, &pi)?;
    let n = config.n;
    let sums = map_indexed(config.execution, config.trials, |i| {
        let path = sampler.sample(&mut trial_rng(config.seed, i), n);
        path.iter().map(|&x| f[x]).sum::<f64>()
    });
    let mean = n as f64 * pi.expectation(f);
    let empirical_tail = tail_frequencies(&sums, mean, t_grid);
    let std_error: Vec<f64> = empirical_tail.iter().map(|&q| binomial_se(q, config.trials)).collect();

    let mut bound_series = Vec::with_capacity(evaluators.len());
    let mut violations = Vec::new();
    for ev in evaluators {
        let tails: Vec<TailBound> = t_grid.iter().map(|&t| ev.evaluate(n, t)).collect::<Result<_>>()?;
        for (i, b) in tails.iter().enumerate() {
            if empirical_tail[i] > b.probability + VIOLATION_SIGMAS * std_error[i] + COMPARE_TOL {
                violations.push(Violation {
                    bound: ev.name().to_string(),
                    t: t_grid[i],
                    empirical: empirical_tail[i],
                    std_error: std_error[i],
                    value: b.probability,
                });
            }
        }
        bound_series.push(BoundSeries {
            name: ev.name().to_string(),
            values: tails.iter().map(|b| b.probability).collect(),
            exponents: tails.iter().map(|b| b.exponent).collect(),
        });
    }
    Ok(TailExperimentReport {
        n,
        trials: config.trials,
        seed: config.seed,
        mean,
        t_grid: t_grid.to_vec(),
        empirical_tail,
        std_error,
        bounds: bound_series,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvExperimentReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub t_mix: usize,
    pub gap: f64,
    pub gap_kind: GapKind,
    pub mean_tv: f64,
    pub mean_tv_std_error: f64,
    /// `sum_x min(sqrt(2 pi(x) / (n gap)), pi(x))`
    pub mean_bound: f64,
    pub mean_within_bound: bool,
    pub t_grid: Vec<f64>,
    /// Frequency of `|d_TV(pi_em, pi) - mean_tv| >= t`.
    pub empirical_tail: Vec<f64>,
    pub std_error: Vec<f64>,
    /// `2 exp(-t^2 n / (8 t_mix))`
    pub concentration_bound: Vec<f64>,
    pub violations: Vec<Violation>,
}

/// Default grid for [`tv_experiment`]: 20 points up to `0.5`.
pub fn default_tv_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.025).collect()
}

/// Empirical total variation of stationary paths against its mean bound and
/// its concentration bound.
pub fn tv_experiment(p: &MarkovKernel, config: &SimConfig, t_grid: &[f64]) -> Result<TvExperimentReport> {
    config.validate()?;
    validate_grid(t_grid)?;
    let pi = p.stationary_distribution()?;
    let profile = mixing::mixing_profile(p, &pi, mixing::default_t_max(p), &mixing::DEFAULT_EPS)?;
    let t_mix = profile.t_mix(0.25).ok_or(Error::NoFiniteMixingTime)?;
    let (gap, gap_kind) = if p.is_reversible(&pi, REVERSIBILITY_TOL) {
        (spectral::spectral_gap(p, &pi)?, GapKind::Reversible)
    } else {
        (spectral::pseudo_spectral_gap(p, &pi, None)?.gamma_ps, GapKind::Pseudo)
    };
    let n = config.n;
    let mean_bound = bounds::empirical_tv_mean_bound(&pi, n, gap, gap_kind)?;

    let sampler = PathSampler::new(p, &pi)?;
    let tvs = map_indexed(config.execution, config.trials, |i| {
        let path = sampler.sample(&mut trial_rng(config.seed, i), n);
        tv_distance(&empirical_distribution(&path, pi.len()), pi.weights())
    });
    let trials = config.trials as f64;
    let mean_tv = tvs.iter().sum::<f64>() / trials;
    let var = tvs.iter().map(|d| (d - mean_tv).powi(2)).sum::<f64>() / trials;
    let mean_tv_std_error = (var / trials).sqrt();

    let empirical_tail = tail_frequencies(&tvs, mean_tv, t_grid);
    let std_error: Vec<f64> = empirical_tail.iter().map(|&q| binomial_se(q, config.trials)).collect();
    let concentration_bound: Vec<f64> = t_grid
        .iter()
        .map(|&t| bounds::empirical_tv_concentration_tail(n, t_mix, t).map(|b| b.probability))
        .collect::<Result<_>>()?;
    let violations = (0..t_grid.len())
        .filter(|&i| empirical_tail[i] > concentration_bound[i] + VIOLATION_SIGMAS * std_error[i] + COMPARE_TOL)
        .map(|i| Violation {
            bound: "tv_concentration".into(),
            t: t_grid[i],
            empirical: empirical_tail[i],
            std_error: std_error[i],
            value: concentration_bound[i],
        })
        .collect();
    Ok(TvExperimentReport {
        n,
        trials: config.trials,
        seed: config.seed,
        t_mix,
        gap,
        gap_kind,
        mean_tv,
        mean_tv_std_error,
        mean_bound,
        mean_within_bound: mean_tv <= mean_bound + VIOLATION_SIGMAS * mean_tv_std_error + COMPARE_TOL,
        t_grid: t_grid.to_vec(),
        empirical_tail,
        std_error,
        concentration_bound,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> MarkovKernel {
        MarkovKernel::from_rows(&[vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap()
    }

    fn rank_one() -> MarkovKernel {
        MarkovKernel::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()
    }

    #[test]
    fn deterministic_flip() {
        let flip = MarkovKernel::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let start = Distribution::from_weights(vec![1.0, 0.0]).unwrap();
        assert_eq!(sample_path(&flip, &start, 4, 99).unwrap(), vec![0, 1, 0, 1]);
    }

    #[test]
    fn same_seed_same_path() {
        let pi = Distribution::from_weights(vec![0.5, 0.5]).unwrap();
        let a = sample_path(&p1(), &pi, 500, 5).unwrap();
        assert_eq!(a, sample_path(&p1(), &pi, 500, 5).unwrap());
        assert_ne!(a, sample_path(&p1(), &pi, 500, 6).unwrap());
    }

    #[test]
    fn rank_one_occupation_near_pi() {
        let p = MarkovKernel::from_rows(&vec![vec![0.2, 0.3, 0.5]; 3]).unwrap();
        let pi = p.stationary_distribution().unwrap();
        let n = 100_000;
        let path = sample_path(&p, &pi, n, 11).unwrap();
        let em = empirical_distribution(&path, 3);
        for (e, w) in em.iter().zip(pi.weights()) {
            assert!((e - w).abs() <= 3.0 * (w * (1.0 - w) / n as f64).sqrt());
        }
    }

    #[test]
    fn draw_skips_zero_mass_at_the_end() {
        let cum = cumulative(&[0.5, 0.5, 0.0]);
        assert_eq!(draw(&cum, 0.999_999_999_999), 1);
        assert_eq!(draw(&cum, 1.0), 1);
        assert_eq!(draw(&cum, 0.0), 0);
        assert_eq!(draw(&cumulative(&[0.0, 1.0]), 0.0), 1);
    }

    #[test]
    fn empirical_tv_examples() {
        let pi = Distribution::from_weights(vec![0.5, 0.5]).unwrap();
        assert_eq!(empirical_tv(&[0, 1], &pi).unwrap(), 0.0);
        assert_eq!(empirical_tv(&[1, 1, 1], &pi).unwrap(), 0.5);
        let pi3 = Distribution::from_weights(vec![0.2, 0.3, 0.5]).unwrap();
        assert!((empirical_tv(&[1], &pi3).unwrap() - 0.7).abs() < 1e-15);
        assert!(empirical_tv(&[], &pi).is_err());
    }

    #[test]
    fn execution_mode_does_not_change_results() {
        let f = [1.0, 0.0];
        let grid = [2.0, 6.0, 10.0];
        let mut cfg = SimConfig::new(42, 2000, 50);
        let ev = standard_evaluators(&p1(), &f, 50).unwrap();
        cfg.execution = Execution::Sequential;
        let a = tail_experiment(&p1(), &f, &cfg, &grid, &ev).unwrap();
        cfg.execution = Execution::Parallel;
        let b = tail_experiment(&p1(), &f, &cfg, &grid, &ev).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iid_tail_below_rev_bound() {
        let f = [1.0, -1.0];
        let ev = standard_evaluators(&rank_one(), &f, 100).unwrap();
        assert!(ev.iter().any(|e| e.name() == "rev"));
        let grid: Vec<f64> = (1..=10).map(|i| 4.0 * i as f64).collect();
        let r = tail_experiment(&rank_one(), &f, &SimConfig::new(1, 20_000, 100), &grid, &ev).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert!(r.empirical_tail.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn beyond_support() {
        let f = [1.0, 0.0];
        let ev = standard_evaluators(&p1(), &f, 20).unwrap();
        let r = tail_experiment(&p1(), &f, &SimConfig::new(3, 500, 20), &[21.0], &ev).unwrap();
        assert_eq!(r.empirical_tail, vec![0.0]);
        assert!(r.bounds.iter().all(|b| b.values[0] > 0.0));
        assert!(r.to_csv().starts_with("t,empirical,std_error,rev_sigma,rev,nonrev,mcdiarmid\n"));
    }

    #[test]
    fn tv_examples() {
        let r = tv_experiment(&rank_one(), &SimConfig::new(8, 5000, 200), &default_tv_grid()).unwrap();
        assert!(r.mean_bound <= (4.0f64 / 200.0).sqrt() + 1e-12);
        assert!(r.mean_within_bound);
        assert!(r.violations.is_empty());

        let pi = [0.2, 0.3, 0.5];
        let p = MarkovKernel::from_rows(&[pi.to_vec(), pi.to_vec(), pi.to_vec()]).unwrap();
        let r = tv_experiment(&p, &SimConfig::new(9, 40_000, 1), &[0.1]).unwrap();
        let exact: f64 = pi.iter().map(|w| w * (1.0 - w)).sum();
        assert!((r.mean_tv - exact).abs() <= 4.0 * r.mean_tv_std_error);
        assert!(r.mean_tv <= r.mean_bound + 1e-12);

        let flip = MarkovKernel::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let err = tv_experiment(&flip, &SimConfig::new(1, 10, 10), &[0.1]).unwrap_err();
        assert_eq!(err, Error::NoFiniteMixingTime);
    }

    #[test]
    fn invalid_config() {
        let f = [1.0, 0.0];
        assert!(tail_experiment(&p1(), &f, &SimConfig::new(1, 0, 5), &[1.0], &[]).is_err());
        let mut cfg = SimConfig::new(1, 5, 5);
        cfg.init = Init::Given(Distribution::from_weights(vec![1.0, 0.0]).unwrap());
        assert!(tail_experiment(&p1(), &f, &cfg, &[1.0], &[]).is_err());
    }
}

//! `mcconc`: spectral, mixing and concentration computations for finite
//! Markov chains, with JSON reports on stdout.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use markov_conc::bounds::{self, BernsteinSpec, BernsteinVariant, TailBound, VarianceReport};
use markov_conc::exec::Execution;
use markov_conc::hypothesis::{self, Decision, HypothesisTest, Statistic};
use markov_conc::marton;
use markov_conc::mixing::{self, GapKind, GapLowerBounds, MixingReport};
use markov_conc::simulate::{self, SimConfig};
use markov_conc::spectral::{self, SpectralReport};
use markov_conc::{Distribution, MarkovKernel, Matrix};
use serde::{Deserialize, Serialize};

use output::{emit, render, CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "mcconc", version, about = "Concentration bounds and diagnostics for finite Markov chains")]
#[command(allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Full precision instead of 6 significant digits.
    #[arg(long, global = true)]
    precise: bool,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stationary law, spectral gaps and pseudo spectral gap.
    Spectral {
        #[command(flatten)]
        kernel: KernelArg,
        /// Largest k searched for the pseudo spectral gap.
        #[arg(long)]
        kmax: Option<usize>,
    },
    /// d(t) and dbar(t) profiles, mixing times and the gap bounds they imply.
    Mixing {
        #[command(flatten)]
        kernel: KernelArg,
        #[arg(long, value_delimiter = ',', default_values_t = mixing::DEFAULT_EPS)]
        eps: Vec<f64>,
        /// Scan horizon; defaults to 64 times the number of states.
        #[arg(long)]
        tmax: Option<usize>,
        /// Print a plain-text d(t)/dbar(t) table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Tail and variance bounds.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Mixing matrix of a Marton coupling, its norm and McDiarmid bound.
    Marton(MartonArgs),
    /// Likelihood-ratio test between two chains.
    Hypothesis(HypothesisArgs),
    /// Monte Carlo tails compared with the bounds.
    Simulate(SimulateArgs),
    /// The fair-coin vs sticky-coin test on the bundled toss record.
    CoinDemo {
        /// Observation file to use instead of the bundled record.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        xi: f64,
    },
}

#[derive(Args, Debug)]
struct KernelArg {
    /// Kernel JSON: {"states": [...], "matrix": [[...], ...]}.
    #[arg(value_name = "KERNEL", required_unless_present = "kernel")]
    path: Option<PathBuf>,
    #[arg(long, value_name = "KERNEL", conflicts_with = "path")]
    kernel: Option<PathBuf>,
}

impl KernelArg {
    fn load(&self) -> CliResult<MarkovKernel> {
        let path = self.path.as_ref().or(self.kernel.as_ref()).expect("clap requires one");
        load_kernel(path)
    }
}

#[derive(Subcommand, Debug)]
enum BoundsCommand {
    /// Bernstein tail bound `P(|S - E S| >= t)` from summary quantities.
    Bernstein(BernsteinArgs),
    /// Exact variance of the sum against the variance bounds.
    Variance {
        #[command(flatten)]
        kernel: KernelArg,
        /// Values of f, one per state.
        #[arg(long, value_delimiter = ',', required = true)]
        f: Vec<f64>,
        #[arg(long)]
        n: usize,
    },
    /// McDiarmid bound for a Markov chain with mixing time tau_min.
    Mcdiarmid {
        /// Bounded-difference constants; one value is repeated `n` times.
        #[arg(long, value_delimiter = ',', required = true)]
        c: Vec<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        tau_min: f64,
        #[arg(long)]
        t: f64,
    },
    /// Concentration of the empirical distance to stationarity.
    Tv {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        tmix: usize,
        #[arg(long)]
        t: f64,
    },
}

#[derive(Args, Debug)]
struct BernsteinArgs {
    /// rev_sigma, rev, rev_general, nonrev or nonrev_general.
    #[arg(long)]
    variant: BernsteinVariant,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    vf: Option<f64>,
    #[arg(long)]
    vs: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    gamma_star: Option<f64>,
    #[arg(long)]
    gamma_ps: Option<f64>,
    #[arg(long)]
    k_ps: Option<usize>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    vi: Option<Vec<f64>>,
    #[arg(long)]
    one_sided: bool,
    #[arg(long)]
    t: f64,
}

#[derive(Args, Debug)]
struct MartonArgs {
    /// Number of blocks.
    #[arg(long)]
    n: usize,
    /// Block-level mixing threshold of the Markov construction.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Use the m-dependent construction instead.
    #[arg(long)]
    mdep: bool,
    /// Block weights for the McDiarmid bound.
    #[arg(long, value_delimiter = ',')]
    c: Option<Vec<f64>>,
    #[arg(long, requires = "c")]
    t: Option<f64>,
    /// Include the dense matrix in the report.
    #[arg(long)]
    matrix: bool,
}

#[derive(Args, Debug)]
struct HypothesisArgs {
    /// Kernel of the null hypothesis.
    p0: PathBuf,
    /// Kernel of the alternative.
    p1: PathBuf,
    /// Observation file.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    xi: f64,
    /// Sample size for the error bounds when no data is given.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    kernel: KernelArg,
    /// Values of f, one per state; required unless --tv.
    #[arg(long, value_delimiter = ',')]
    f: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    /// Empirical distance-to-stationarity experiment instead of sum tails.
    #[arg(long)]
    tv: bool,
    /// Also write (t, empirical, bounds) rows to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Run trials on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpectralOutput {
    stationary: Distribution,
    #[serde(flatten)]
    report: SpectralReport,
}

#[derive(Debug, Serialize, Deserialize)]
struct UpperBound {
    eps: f64,
    kind: GapKind,
    t_mix_bound: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MixingOutput {
    #[serde(flatten)]
    report: MixingReport,
    gap_lower_bounds: GapLowerBounds,
    t_mix_upper_bounds: Vec<UpperBound>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundResult<I> {
    bound: String,
    inputs: I,
    t: f64,
    #[serde(flatten)]
    tail: TailBound,
}

#[derive(Debug, Serialize, Deserialize)]
struct McDiarmidInputs {
    c: Vec<f64>,
    tau_min: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TvInputs {
    n: usize,
    t_mix: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct MartonOutput {
    construction: String,
    n_blocks: usize,
    eps: Option<f64>,
    operator_norm: f64,
    matrix: Option<Matrix>,
    weighted_norm_sq: Option<f64>,
    tail: Option<TailBound>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HypothesisOutput {
    delta0: f64,
    delta1: f64,
    delta: f64,
    j0: f64,
    j1: f64,
    v0: f64,
    v1: f64,
    gamma_ps_q0: f64,
    k_ps_q0: usize,
    gamma_ps_q1: f64,
    k_ps_q1: usize,
    xi: f64,
    n: usize,
    threshold_range: (f64, f64),
    type1: TailBound,
    type2: TailBound,
    statistic: Option<Statistic>,
    decision: Option<Decision>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CoinDemoOutput {
    pi_q0: Distribution,
    pi_q1: Distribution,
    q0_reversal: Matrix,
    q1_reversal: Matrix,
    gamma_q0_star_q0: f64,
    gamma_q1_star_q1: f64,
    #[serde(flatten)]
    test: HypothesisOutput,
}

fn load_kernel(path: &Path) -> CliResult<MarkovKernel> {
    let text = read_text(path)?;
    Ok(MarkovKernel::from_json(&text)?)
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::invalid("Io", format!("{}: {e}", path.display())))
}

fn hypothesis_output(test: &HypothesisTest, obs: Option<&[usize]>, n: usize) -> CliResult<HypothesisOutput> {
    let (type1, type2) = test.error_bounds(n)?;
    let (statistic, decision) = match obs {
        Some(obs) => {
            let r = test.decide(obs)?;
            (Some(r.statistic), Some(r.decision))
        }
        None => (None, None),
    };
    Ok(HypothesisOutput {
        delta0: test.delta0,
        delta1: test.delta1,
        delta: test.delta,
        j0: test.j0,
        j1: test.j1,
        v0: test.v0,
        v1: test.v1,
        gamma_ps_q0: test.gamma_ps_q0,
        k_ps_q0: test.k_ps_q0,
        gamma_ps_q1: test.gamma_ps_q1,
        k_ps_q1: test.k_ps_q1,
        xi: test.xi,
        n,
        threshold_range: test.threshold_range(n),
        type1,
        type2,
        statistic,
        decision,
    })
}

fn mixing_table(report: &MixingReport) -> String {
    let mut out = String::from("t\td(t)\tdbar(t)\n");
    for (&(t, d), &(_, dbar)) in report.d_table.iter().zip(&report.dbar_table) {
        out.push_str(&format!("{t}\t{d:.6e}\t{dbar:.6e}\n"));
    }
    out.pop();
    out
}

/// The report text, or `None` when the command already wrote its output.
fn run(cli: &Cli) -> CliResult<Option<String>> {
    let precise = cli.precise;
    let text = match &cli.command {
        Command::Spectral { kernel, kmax } => {
            let p = kernel.load()?;
            let stationary = p.stationary_distribution()?;
            let report = spectral::spectral_report(&p, *kmax)?;
            render(&SpectralOutput { stationary, report }, precise)?
        }
        Command::Mixing { kernel, eps, tmax, table } => {
            let p = kernel.load()?;
            let pi = p.stationary_distribution()?;
            let report = mixing::mixing_profile(&p, &pi, tmax.unwrap_or_else(|| mixing::default_t_max(&p)), eps)?;
            if *table {
                return Ok(Some(mixing_table(&report)));
            }
            let spec = spectral::spectral_report(&p, None)?;
            let gap_lower_bounds = mixing::gap_lower_bounds_from_mixing(&report, spec.reversible)?;
            let mut gaps = vec![(GapKind::Pseudo, spec.gamma_ps)];
            if let Some(g) = spec.gamma_star {
                gaps.insert(0, (GapKind::Reversible, g));
            }
            let mut t_mix_upper_bounds = Vec::new();
            for &e in eps {
                for &(kind, gap) in &gaps {
                    if gap > 0.0 {
                        let b = mixing::mixing_upper_bound_from_gap(gap, kind, pi.min(), e)?;
                        t_mix_upper_bounds.push(UpperBound { eps: e, kind, t_mix_bound: b });
                    }
                }
            }
            render(&MixingOutput { report, gap_lower_bounds, t_mix_upper_bounds }, precise)?
        }
        Command::Bounds(cmd) => run_bounds(cmd, precise)?,
        Command::Marton(a) => {
            let (construction, g) = if a.mdep {
                ("mdep", marton::mdep_mixing_matrix(a.n)?)
            } else {
                ("markov", marton::markov_mixing_matrix(a.n, a.eps)?)
            };
            let weighted_norm_sq = a.c.as_ref().map(|c| marton::weighted_norm_sq(&g, c)).transpose()?;
            let tail = match (&a.c, a.t) {
                (Some(c), Some(t)) => Some(marton::mcdiarmid_general_tail(&g, c, t)?),
                _ => None,
            };
            render(
                &MartonOutput {
                    construction: construction.into(),
                    n_blocks: a.n,
                    eps: (!a.mdep).then_some(a.eps),
                    operator_norm: marton::operator_norm(g.matrix())?,
                    matrix: a.matrix.then(|| g.matrix().clone()),
                    weighted_norm_sq,
                    tail,
                },
                precise,
            )?
        }
        Command::Hypothesis(a) => {
            let test = hypothesis::build_test(&load_kernel(&a.p0)?, &load_kernel(&a.p1)?, a.xi)?;
            let obs = match &a.data {
                Some(path) => Some(hypothesis::parse_observations(&read_text(path)?, test.p0.states())?),
                None => None,
            };
            let n = match (&obs, a.n) {
                (_, Some(n)) => n,
                (Some(o), None) => o.len(),
                (None, None) => return Err(CliError::invalid("MissingField", "give --data or --n")),
            };
            render(&hypothesis_output(&test, obs.as_deref(), n)?, precise)?
        }
        Command::Simulate(a) => run_simulate(a, precise)?,
        Command::CoinDemo { data, xi } => {
            let (p0, p1) = hypothesis::coin_kernels();
            let test = hypothesis::build_test(&p0, &p1, *xi)?;
            let text = match data {
                Some(path) => read_text(path)?,
                None => hypothesis::COIN_TOSSES.to_string(),
            };
            let obs = hypothesis::parse_observations(&text, test.p0.states())?;
            let pi_q0 = test.q0.stationary_distribution()?;
            let pi_q1 = test.q1.stationary_distribution()?;
            let star_gap = |q: &MarkovKernel, pi: &Distribution| -> CliResult<f64> {
                let m = q.reversiblization_matrix(pi, 1)?;
                Ok(1.0 - spectral::eigenvalues_self_adjoint(&m, pi)?[1])
            };
            render(
                &CoinDemoOutput {
                    q0_reversal: test.q0.time_reversal(&pi_q0)?.matrix().clone(),
                    q1_reversal: test.q1.time_reversal(&pi_q1)?.matrix().clone(),
                    gamma_q0_star_q0: star_gap(&test.q0, &pi_q0)?,
                    gamma_q1_star_q1: star_gap(&test.q1, &pi_q1)?,
                    test: hypothesis_output(&test, Some(&obs), obs.len())?,
                    pi_q0,
                    pi_q1,
                },
                precise,
            )?
        }
    };
    Ok(Some(text))
}

fn run_bounds(cmd: &BoundsCommand, precise: bool) -> CliResult<String> {
    match cmd {
        BoundsCommand::Bernstein(a) => {
            let spec = BernsteinSpec {
                variant: Some(a.variant),
                n: a.n,
                v_f: a.vf,
                v_s: a.vs,
                sigma_as2: a.sigma,
                c: a.c,
                gamma: a.gamma,
                gamma_star: a.gamma_star,
                gamma_ps: a.gamma_ps,
                k_ps: a.k_ps,
                m: a.m,
                v_i: a.vi.clone(),
                one_sided: a.one_sided,
            };
            let tail = bounds::bernstein_tail(&spec, a.t)?;
            render(&BoundResult { bound: "bernstein".into(), inputs: spec, t: a.t, tail }, precise)
        }
        BoundsCommand::Variance { kernel, f, n } => {
            let p = kernel.load()?;
            let pi = p.stationary_distribution()?;
            let report: VarianceReport = bounds::variance_report(&p, &pi, f, *n)?;
            render(&report, precise)
        }
        BoundsCommand::Mcdiarmid { c, n, tau_min, t } => {
            let c = match (c.len(), n) {
                (1, Some(n)) => vec![c[0]; *n],
                (len, Some(n)) if len != *n => {
                    return Err(CliError::invalid("ShapeMismatch", format!("{len} constants for n = {n}")));
                }
                _ => c.clone(),
            };
            let tail = bounds::mcdiarmid_markov_tail(&c, *tau_min, *t)?;
            render(
                &BoundResult {
                    bound: "mcdiarmid".into(),
                    inputs: McDiarmidInputs { c, tau_min: *tau_min },
                    t: *t,
                    tail,
                },
                precise,
            )
        }
        BoundsCommand::Tv { n, tmix, t } => {
            let tail = bounds::empirical_tv_concentration_tail(*n, *tmix, *t)?;
            render(
                &BoundResult { bound: "empirical_tv".into(), inputs: TvInputs { n: *n, t_mix: *tmix }, t: *t, tail },
                precise,
            )
        }
    }
}

fn run_simulate(a: &SimulateArgs, precise: bool) -> CliResult<String> {
    let p = a.kernel.load()?;
    let mut config = SimConfig::new(a.seed, a.trials, a.n);
    if a.sequential {
        config.execution = Execution::Sequential;
    }
    let write_csv = |csv: String| -> CliResult<()> {
        match &a.csv {
            Some(path) => {
                std::fs::write(path, csv).map_err(|e| CliError::invalid("Io", format!("{}: {e}", path.display())))
            }
            None => Ok(()),
        }
    };
    if a.tv {
        let grid = a.t_grid.clone().unwrap_or_else(simulate::default_tv_grid);
        let report = simulate::tv_experiment(&p, &config, &grid)?;
        let mut csv = String::from("t,empirical,std_error,bound\n");
        for i in 0..report.t_grid.len() {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                report.t_grid[i], report.empirical_tail[i], report.std_error[i], report.concentration_bound[i]
            ));
        }
        write_csv(csv)?;
        return render(&report, precise);
    }
    let f = a.f.as_ref().ok_or_else(|| CliError::invalid("MissingField", "--f is required without --tv"))?;
    let grid = a.t_grid.as_ref().ok_or_else(|| CliError::invalid("MissingField", "--t-grid is required"))?;
    let evaluators = simulate::standard_evaluators(&p, f, a.n)?;
    let report = simulate::tail_experiment(&p, f, &config, grid, &evaluators)?;
    write_csv(report.to_csv())?;
    render(&report, precise)
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(CliError::invalid("Usage", e.to_string().trim_end())),
    };
    match run(&cli).and_then(|text| match text {
        Some(text) => emit(&text, cli.out.as_deref()),
        None => Ok(()),
    }) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

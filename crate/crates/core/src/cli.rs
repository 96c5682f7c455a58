//! Command-line front end. Exit codes: 0 success, 1 runtime failure,
//! 2 bad flags or configuration.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{verify_bound_monte_carlo, BoundKind, Verification};
use crate::environments::ArmDistribution;
use crate::error::{BanditError, Result};
use crate::harness::{export_results, run_experiment, AggregateResult, EnvironmentSpec, ExperimentConfig};
use crate::policy::PolicySpec;
use crate::rng::derive_run_rng;
use crate::safety::{EstimatorForm, SafetyValueFunction, ValueFunctionSpec};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BANDIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "besa", version, about = "Risk-aware bandit benchmarks and bound checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Deterministic arm `r` against Uniform(0, 1): BESA+ vs BESA.
    BenchTwoArm {
        #[arg(long)]
        r: f64,
        #[command(flatten)]
        common: RunArgs,
    },
    /// Truncated Gaussian mixture arms under CVaR (`--alpha`) or mean-variance (`--rho`).
    BenchMixture {
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, conflicts_with = "rho", required_unless_present = "rho")]
        alpha: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[command(flatten)]
        common: RunArgs,
    },
    /// Empirical arms from a CSV file under mean-variance regret.
    BenchClinical {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        value_column: String,
        #[arg(long)]
        group_column: String,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[command(flatten)]
        common: RunArgs,
    },
    /// Monte Carlo check of the deviation bounds; one CSV row per configuration.
    VerifyBounds(VerifyArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every step to the trace files, not only checkpoints.
    #[arg(long)]
    full_traces: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Horizon.
    #[arg(long = "T", default_value_t = 5000)]
    horizon: u64,
    #[arg(long, default_value_t = 200)]
    runs: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Iid,
    Subsample,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ValueFunctionArg {
    Mean,
    MeanVariance,
    Cvar,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    kind: Vec<KindArg>,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Subsample size; defaults to n/2.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    delta: Vec<f64>,
    #[arg(long, default_value_t = 20_000)]
    trials: usize,
    #[arg(long, value_enum, default_value = "mean")]
    value_function: ValueFunctionArg,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Arm to sample: `bernoulli:P`, `uniform`, `uniform:LO:HI` or `deterministic:R`.
    #[arg(long, default_value = "bernoulli:0.5")]
    arm: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also write the rows to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_arm(text: &str) -> Result<ArmDistribution> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| BanditError::Config(format!("bad number `{s}` in arm `{text}`")))
    };
    match parts.as_slice() {
        ["bernoulli", p] => ArmDistribution::bernoulli(num(p)?),
        ["uniform"] => ArmDistribution::uniform(0.0, 1.0),
        ["uniform", lo, hi] => ArmDistribution::uniform(num(lo)?, num(hi)?),
        ["deterministic", r] => ArmDistribution::deterministic(num(r)?),
        _ => Err(BanditError::Config(format!("unrecognised arm `{text}`"))),
    }
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| BanditError::Config(format!("{THREADS_ENV}={v} is not a count"))),
        _ => Ok(None),
    }
}

fn bench_config(
    environment: EnvironmentSpec,
    policies: Vec<PolicySpec>,
    value_function: ValueFunctionSpec,
    common: &RunArgs,
) -> ExperimentConfig {
    ExperimentConfig {
        environment,
        policies,
        value_function,
        horizon: common.horizon,
        replications: common.runs,
        seed: common.seed,
        output_dir: common.output.out.clone(),
        full_traces: common.output.full_traces,
    }
}

fn execute(config: ExperimentConfig, default_dir: &str, out: &mut dyn Write) -> Result<AggregateResult> {
    config.validate()?;
    let threads = threads_from_env()?;
    let dir = config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(default_dir));
    let result = run_experiment(&config, threads)?;
    export_results(&result, &dir)?;
    let _ = writeln!(out, "{:<12} {:>14} {:>12} {:>10}", "policy", "mean_regret", "std", "opt_play%");
    for p in &result.policies {
        let last = p.final_row();
        let _ = writeln!(
            out,
            "{:<12} {:>14.3} {:>12.3} {:>10.2}",
            p.name,
            last.mean_regret,
            last.std_regret,
            p.traces.iter().map(|t| t.optimal_play_pct()).sum::<f64>() / p.traces.len() as f64
        );
    }
    let _ = writeln!(out, "wrote {}", dir.display());
    Ok(result)
}

fn verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<Vec<Verification>> {
    let svf = match args.value_function {
        ValueFunctionArg::Mean => SafetyValueFunction::Mean,
        ValueFunctionArg::MeanVariance => SafetyValueFunction::mean_variance(args.rho, EstimatorForm::Biased)?,
        ValueFunctionArg::Cvar => SafetyValueFunction::cvar(args.alpha)?,
    };
    let arm = parse_arm(&args.arm)?;
    let mut rng = derive_run_rng(args.seed, 0);
    let header = "kind,n,m,delta,trials,violation_rate,threshold";
    let mut text = format!("{header}\n");
    let mut rows = Vec::new();
    for kind in &args.kind {
        for &n in &args.n {
            for &delta in &args.delta {
                let (kind, m) = match kind {
                    KindArg::Iid => (BoundKind::Iid, None),
                    KindArg::Subsample => (BoundKind::Subsample, Some(args.m.unwrap_or(n / 2))),
                };
                let v = verify_bound_monte_carlo(kind, &svf, &arm, n, m, delta, args.trials, &mut rng)?;
                text.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    v.kind.name(),
                    v.n,
                    v.m.map_or(String::new(), |m| m.to_string()),
                    v.delta,
                    v.trials,
                    v.violation_rate,
                    v.threshold
                ));
                rows.push(v);
            }
        }
    }
    let _ = out.write_all(text.as_bytes());
    if let Some(path) = &args.out {
        std::fs::write(path, &text).map_err(|e| BanditError::io(path, e))?;
    }
    Ok(rows)
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Run { config, output } => {
            let mut config = ExperimentConfig::from_file(&config)?;
            if output.out.is_some() {
                config.output_dir = output.out;
            }
            config.full_traces |= output.full_traces;
            execute(config, "results/run", out)?;
        }
        Command::BenchTwoArm { r, common } => {
            let config = bench_config(
                EnvironmentSpec::TwoArm { r },
                vec![PolicySpec::BesaPlus, PolicySpec::Besa],
                ValueFunctionSpec::Mean,
                &common,
            );
            execute(config, "results/two_arm", out)?;
        }
        Command::BenchMixture { k, alpha, rho, common } => {
            let (value_function, policies) = match (alpha, rho) {
                (Some(alpha), _) => (
                    ValueFunctionSpec::Cvar { alpha },
                    vec![
                        PolicySpec::BesaPlus,
                        PolicySpec::Besa,
                        PolicySpec::Marab { c: 1.0, alpha: None },
                    ],
                ),
                (None, Some(rho)) => (
                    ValueFunctionSpec::MeanVariance {
                        rho,
                        estimator_form: EstimatorForm::Biased,
                    },
                    vec![
                        PolicySpec::BesaPlus,
                        PolicySpec::Besa,
                        PolicySpec::MvLcb { rho: None },
                        PolicySpec::Expexp { rho: None, tau: None },
                    ],
                ),
                (None, None) => unreachable!("clap requires one of --alpha/--rho"),
            };
            let config = bench_config(EnvironmentSpec::Mixture { k }, policies, value_function, &common);
            execute(config, "results/mixture", out)?;
        }
        Command::BenchClinical {
            csv,
            value_column,
            group_column,
            rho,
            common,
        } => {
            let config = bench_config(
                EnvironmentSpec::Csv {
                    path: csv,
                    value_column,
                    group_column,
                },
                vec![
                    PolicySpec::BesaPlus,
                    PolicySpec::Besa,
                    PolicySpec::Ucb1,
                    PolicySpec::Thompson,
                    PolicySpec::MvLcb { rho: None },
                    PolicySpec::Expexp { rho: None, tau: None },
                ],
                ValueFunctionSpec::MeanVariance {
                    rho,
                    estimator_form: EstimatorForm::Biased,
                },
                &common,
            );
            execute(config, "results/clinical", out)?;
        }
        Command::VerifyBounds(args) => {
            verify(&args, out)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match dispatch(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage_error() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arm_strings() {
        assert_eq!(parse_arm("bernoulli:0.3").unwrap(), ArmDistribution::Bernoulli(0.3));
        assert_eq!(parse_arm("uniform").unwrap(), ArmDistribution::Uniform { lo: 0.0, hi: 1.0 });
        assert_eq!(parse_arm("uniform:0.2:0.4").unwrap(), ArmDistribution::Uniform { lo: 0.2, hi: 0.4 });
        assert!(parse_arm("gamma:1").is_err());
        assert!(parse_arm("bernoulli:x").is_err());
    }

    #[test]
    fn missing_config_exits_two() {
        assert_eq!(main_with_args(["besa", "run", "--config", "/nonexistent/missing.json"]), 2);
    }

    #[test]
    fn bad_flags_exit_two() {
        assert_eq!(main_with_args(["besa", "bench-two-arm"]), 2);
        assert_eq!(main_with_args(["besa", "bench-mixture", "--alpha", "0.1", "--rho", "1"]), 2);
        assert_eq!(main_with_args(["besa", "frobnicate"]), 2);
    }

    #[test]
    fn out_of_range_r_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(
            main_with_args(["besa", "bench-two-arm", "--r", "0.7", "--T", "10", "--runs", "1", "--out", out]),
            2
        );
    }
}

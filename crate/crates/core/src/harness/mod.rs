//! Replicated experiment runner with safety-aware regret accounting.
//!
//! Random streams: run `r` of policy `p` draws from
//! `derive_run_rng(seed, (p << 32) | r)`, so policies never share reward
//! draws. Environment construction uses stream `u64::MAX` and the Monte
//! Carlo true value of arm `a` uses stream `u64::MAX - 1 - a`.

mod aggregate;
mod config;
mod export;

pub use aggregate::{checkpoints, percentile, AggregateResult, PolicyResult, SummaryRow};
pub use config::{EnvironmentSpec, ExperimentConfig};
pub use export::{export_results, SUMMARY_HEADER, TRACE_HEADER};

use rayon::prelude::*;

use crate::environments::{true_value, Environment, TrueValue};
use crate::error::{BanditError, Result};
use crate::policy::{Policy, PolicySpec};
use crate::rng::derive_run_rng;
use crate::safety::SafetyValueFunction;

pub const ENVIRONMENT_STREAM: u64 = u64::MAX;

fn run_stream(policy_index: usize, run_id: u64) -> u64 {
    ((policy_index as u64) << 32) | run_id
}

/// One step of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub arm: usize,
    pub reward: f64,
    /// `v* - v(arm)`.
    pub regret: f64,
    pub cum_regret: f64,
    pub optimal: bool,
}

/// Record of one run. `steps` holds every step, or only the checkpoint
/// steps once reduced by [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub run_id: u64,
    pub steps: Vec<StepRecord>,
    /// `N_{a,T}` per arm.
    pub counts: Vec<u64>,
    pub optimal_plays: u64,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cum_regret)
    }

    pub fn horizon(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn optimal_play_pct(&self) -> f64 {
        100.0 * self.optimal_plays as f64 / self.horizon().max(1) as f64
    }
}

/// An experiment with its environment built and true values computed.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub config: ExperimentConfig,
    pub environment: Environment,
    pub svf: SafetyValueFunction,
    pub true_values: Vec<TrueValue>,
    /// `v* - v(a)` per arm.
    pub gaps: Vec<f64>,
    /// Arms attaining the maximal true value.
    pub optimal: Vec<bool>,
    pub policy_names: Vec<String>,
}

impl PreparedExperiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let svf = config.value_function.build()?;
        let mut env_rng = derive_run_rng(config.seed, ENVIRONMENT_STREAM);
        let environment = config.environment.build(&mut env_rng)?;
        let true_values = environment
            .arms()
            .par_iter()
            .enumerate()
            .map(|(a, arm)| {
                let mut rng = derive_run_rng(config.seed, u64::MAX - 1 - a as u64);
                true_value(arm, &svf, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let best = true_values
            .iter()
            .map(|v| v.value)
            .fold(f64::NEG_INFINITY, f64::max);
        let gaps = true_values.iter().map(|v| best - v.value).collect();
        let optimal = true_values.iter().map(|v| v.value == best).collect();
        let policy_names = unique_names(&config.policies);
        Ok(PreparedExperiment {
            config,
            environment,
            svf,
            true_values,
            gaps,
            optimal,
            policy_names,
        })
    }

    /// Runs policy `policy_index` for the configured horizon. Deterministic
    /// in `(seed, run_id, policy_index)`.
    ///
    /// Cumulative regret after each step is `sum_a N_a * gap_a` in arm order,
    /// which makes it exactly `gap * N_sub` in the two-arm case.
    pub fn run_episode(&self, policy_index: usize, run_id: u64) -> Result<RegretTrace> {
        let spec = self
            .config
            .policies
            .get(policy_index)
            .ok_or_else(|| BanditError::invalid(format!("no policy {policy_index}")))?;
        let k = self.environment.num_arms();
        let horizon = self.config.horizon;
        let mut rng = derive_run_rng(self.config.seed, run_stream(policy_index, run_id));
        let mut policy = Policy::new(spec, k, self.svf, Some(horizon))?;
        let mut counts = vec![0u64; k];
        let mut optimal_plays = 0;
        let mut steps = Vec::with_capacity(horizon as usize);
        for t in 1..=horizon {
            let arm = policy.select(t, &mut rng)?;
            let reward = self.environment.arms()[arm].sample(&mut rng)?;
            policy.update(arm, reward, &mut rng)?;
            counts[arm] += 1;
            let optimal = self.optimal[arm];
            optimal_plays += u64::from(optimal);
            let cum_regret = counts
                .iter()
                .zip(&self.gaps)
                .map(|(&n, &g)| n as f64 * g)
                .sum();
            steps.push(StepRecord {
                t,
                arm,
                reward,
                regret: self.gaps[arm],
                cum_regret,
                optimal,
            });
        }
        Ok(RegretTrace {
            run_id,
            steps,
            counts,
            optimal_plays,
        })
    }
}

fn unique_names(policies: &[PolicySpec]) -> Vec<String> {
    let mut names: Vec<String> = Vec::with_capacity(policies.len());
    for p in policies {
        let base = p.name();
        let mut name = base.to_string();
        let mut i = 2;
        while names.contains(&name) {
            name = format!("{base}_{i}");
            i += 1;
        }
        names.push(name);
    }
    names
}

/// Runs every policy for every replication and aggregates at the
/// checkpoints. `threads` caps the worker pool (all cores when `None`);
/// the result does not depend on it.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<AggregateResult> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| BanditError::InvalidState(e.to_string()))?;
    pool.install(|| {
        let prepared = PreparedExperiment::new(config.clone())?;
        let grid = checkpoints(config.horizon);
        let jobs: Vec<(usize, u64)> = (0..config.policies.len())
            .flat_map(|p| (0..config.replications).map(move |r| (p, r)))
            .collect();
        let traces = jobs
            .par_iter()
            .map(|&(p, r)| {
                let mut trace = prepared.run_episode(p, r)?;
                if !config.full_traces {
                    trace.steps = grid.iter().map(|&t| trace.steps[(t - 1) as usize]).collect();
                }
                Ok(trace)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AggregateResult::build(&prepared, &grid, traces))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::ArmSpec;
    use crate::safety::ValueFunctionSpec;

    fn config(env: EnvironmentSpec, policies: Vec<PolicySpec>, horizon: u64, reps: u64) -> ExperimentConfig {
        ExperimentConfig {
            environment: env,
            policies,
            value_function: ValueFunctionSpec::Mean,
            horizon,
            replications: reps,
            seed: 42,
            output_dir: None,
            full_traces: false,
        }
    }

    #[test]
    fn first_step_of_two_arm_besa_plus() {
        let c = config(EnvironmentSpec::TwoArm { r: 0.4 }, vec![PolicySpec::BesaPlus], 1, 1);
        let p = PreparedExperiment::new(c).unwrap();
        let trace = p.run_episode(0, 0).unwrap();
        assert_eq!(trace.steps[0].arm, 0);
        assert!((trace.steps[0].regret - 0.1).abs() < 1e-15);
        assert!((trace.final_regret() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn deterministic_arms_regret_identity() {
        let env = EnvironmentSpec::Arms {
            arms: vec![ArmSpec::Deterministic { value: 0.9 }, ArmSpec::Deterministic { value: 0.1 }],
            labels: None,
        };
        let policies = vec![PolicySpec::BesaPlus, PolicySpec::Besa, PolicySpec::Ucb1, PolicySpec::Thompson];
        let p = PreparedExperiment::new(config(env, policies, 10, 1)).unwrap();
        for i in 0..4 {
            let trace = p.run_episode(i, 0).unwrap();
            assert_eq!(trace.final_regret(), (0.9 - 0.1) * trace.counts[1] as f64);
            assert!(trace.counts[1] >= 1);
        }
    }

    #[test]
    fn episodes_are_reproducible() {
        let c = config(EnvironmentSpec::TwoArm { r: 0.2 }, vec![PolicySpec::BesaPlus, PolicySpec::Thompson], 300, 1);
        let p = PreparedExperiment::new(c).unwrap();
        assert_eq!(p.run_episode(0, 3).unwrap(), p.run_episode(0, 3).unwrap());
        assert_eq!(p.run_episode(1, 3).unwrap(), p.run_episode(1, 3).unwrap());
        assert_ne!(p.run_episode(1, 3).unwrap(), p.run_episode(1, 4).unwrap());
    }

    #[test]
    fn tied_optimal_arms_both_count() {
        let env = EnvironmentSpec::Arms {
            arms: vec![
                ArmSpec::Deterministic { value: 0.5 },
                ArmSpec::Deterministic { value: 0.5 },
                ArmSpec::Deterministic { value: 0.2 },
            ],
            labels: None,
        };
        let p = PreparedExperiment::new(config(env, vec![PolicySpec::Ucb1], 5, 1)).unwrap();
        assert_eq!(p.optimal, vec![true, true, false]);
    }

    #[test]
    fn duplicate_policy_names_disambiguated() {
        let names = unique_names(&[
            PolicySpec::Marab { c: 1.0, alpha: None },
            PolicySpec::Marab { c: 2.0, alpha: None },
            PolicySpec::Besa,
        ]);
        assert_eq!(names, ["marab", "marab_2", "besa"]);
    }
}

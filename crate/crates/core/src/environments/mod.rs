//! Arm reward models and benchmark environments.
//!
//! Every arm emits rewards in `[0, 1]`. The truncated Gaussian mixture is
//! the mixture conditioned on `[0, 1]` (rejection sampling), not clipped,
//! so it has no atoms at the interval ends.

mod dataset;

pub use dataset::{bucket_reward, load_empirical_csv};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{BanditError, Result};
use crate::rng::RngStream;
use crate::safety::{cvar_tail_len, SafetyValueFunction};

/// Attempt cap for mixture rejection sampling.
pub const MAX_REJECTION_ATTEMPTS: u64 = 1_000_000;

/// Sample size used when a true value has no closed form.
pub const MONTE_CARLO_SAMPLES: usize = 1_000_000;

const MONTE_CARLO_BATCHES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

/// Generative model of a single arm's reward.
#[derive(Debug, Clone, PartialEq)]
pub enum ArmDistribution {
    Deterministic(f64),
    Uniform { lo: f64, hi: f64 },
    Bernoulli(f64),
    /// Gaussian mixture conditioned on `[0, 1]`.
    TruncatedGaussianMixture(Vec<MixtureComponent>),
    /// Resampled uniformly with replacement from the recorded list.
    Empirical(Vec<f64>),
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl ArmDistribution {
    pub fn deterministic(r: f64) -> Result<Self> {
        if !in_unit(r) {
            return Err(BanditError::invalid(format!("deterministic reward {r} outside [0, 1]")));
        }
        Ok(ArmDistribution::Deterministic(r))
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(in_unit(lo) && in_unit(hi) && lo <= hi) {
            return Err(BanditError::invalid(format!(
                "uniform bounds [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1"
            )));
        }
        Ok(ArmDistribution::Uniform { lo, hi })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !in_unit(p) {
            return Err(BanditError::invalid(format!("bernoulli p {p} outside [0, 1]")));
        }
        Ok(ArmDistribution::Bernoulli(p))
    }

    pub fn truncated_mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(BanditError::invalid("mixture needs at least one component"));
        }
        let mut total = 0.0;
        for c in &components {
            if !(c.weight.is_finite() && c.weight >= 0.0) {
                return Err(BanditError::invalid(format!("mixture weight {} is negative", c.weight)));
            }
            if !(c.mean.is_finite() && c.std.is_finite() && c.std > 0.0) {
                return Err(BanditError::invalid(format!(
                    "mixture component needs finite mean and positive std, got ({}, {})",
                    c.mean, c.std
                )));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(BanditError::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(ArmDistribution::TruncatedGaussianMixture(components))
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(BanditError::invalid("empirical arm needs at least one sample"));
        }
        if let Some(bad) = samples.iter().find(|x| !in_unit(**x)) {
            return Err(BanditError::invalid(format!("empirical sample {bad} outside [0, 1]")));
        }
        Ok(ArmDistribution::Empirical(samples))
    }

    /// Draws one reward in `[0, 1]`.
    pub fn sample(&self, rng: &mut RngStream) -> Result<f64> {
        match self {
            ArmDistribution::Deterministic(r) => Ok(*r),
            ArmDistribution::Uniform { lo, hi } => Ok(lo + (hi - lo) * rng.uniform()),
            ArmDistribution::Bernoulli(p) => Ok(if rng.bernoulli(*p) { 1.0 } else { 0.0 }),
            ArmDistribution::TruncatedGaussianMixture(components) => {
                for _ in 0..MAX_REJECTION_ATTEMPTS {
                    let c = pick_component(components, rng.uniform());
                    let z: f64 = StandardNormal.sample(rng);
                    let x = c.mean + c.std * z;
                    if in_unit(x) {
                        return Ok(x);
                    }
                }
                Err(BanditError::SamplingFailure {
                    attempts: MAX_REJECTION_ATTEMPTS,
                })
            }
            ArmDistribution::Empirical(values) => Ok(values[rng.index(values.len())]),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ArmDistribution::Deterministic(_) => "deterministic",
            ArmDistribution::Uniform { .. } => "uniform",
            ArmDistribution::Bernoulli(_) => "bernoulli",
            ArmDistribution::TruncatedGaussianMixture(_) => "truncated_gaussian_mixture",
            ArmDistribution::Empirical(_) => "empirical",
        }
    }
}

fn pick_component(components: &[MixtureComponent], u: f64) -> &MixtureComponent {
    let mut acc = 0.0;
    for c in components {
        acc += c.weight;
        if u < acc {
            return c;
        }
    }
    // u landed in the rounding slack above the last cumulative weight
    components
        .iter()
        .rev()
        .find(|c| c.weight > 0.0)
        .unwrap_or(&components[components.len() - 1])
}

/// An ordered set of arms.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    arms: Vec<ArmDistribution>,
    labels: Option<Vec<String>>,
}

impl Environment {
    pub fn new(arms: Vec<ArmDistribution>) -> Result<Self> {
        if arms.len() < 2 {
            return Err(BanditError::invalid(format!(
                "an environment needs at least 2 arms, got {}",
                arms.len()
            )));
        }
        Ok(Environment { arms, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.arms.len() {
            return Err(BanditError::invalid(format!(
                "{} labels for {} arms",
                labels.len(),
                self.arms.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn arms(&self) -> &[ArmDistribution] {
        &self.arms
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }
}

/// Deterministic arm with reward `r` against a `Uniform(0, 1)` arm.
pub fn make_two_arm_benchmark(r: f64) -> Result<Environment> {
    if !(0.0..0.5).contains(&r) {
        return Err(BanditError::invalid(format!("r must lie in [0, 0.5), got {r}")));
    }
    Environment::new(vec![
        ArmDistribution::Deterministic(r),
        ArmDistribution::Uniform { lo: 0.0, hi: 1.0 },
    ])?
    .with_labels(vec!["deterministic".into(), "uniform".into()])
}

/// `k` arms, each an equal-weight mixture of four Gaussians truncated to
/// `[0, 1]`, with component means drawn from `U[0, 1]` and standard
/// deviations from `U[0.5, 1]`.
pub fn make_mixture_benchmark(k: usize, rng: &mut RngStream) -> Result<Environment> {
    if k < 2 {
        return Err(BanditError::invalid(format!("mixture benchmark needs k >= 2, got {k}")));
    }
    let arms = (0..k)
        .map(|_| {
            let components = (0..4)
                .map(|_| MixtureComponent {
                    weight: 0.25,
                    mean: rng.uniform(),
                    std: 0.5 + 0.5 * rng.uniform(),
                })
                .collect();
            ArmDistribution::truncated_mixture(components)
        })
        .collect::<Result<Vec<_>>>()?;
    Environment::new(arms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueMethod {
    Analytic,
    MonteCarlo,
}

/// True safety value of an arm, used for regret accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueValue {
    pub value: f64,
    pub method: ValueMethod,
    /// Normal-approximation 95% half-width; zero for analytic values.
    pub ci_halfwidth: f64,
}

/// Closed form where one exists, otherwise Monte Carlo over
/// [`MONTE_CARLO_SAMPLES`] draws from `rng`.
pub fn true_value(
    arm: &ArmDistribution,
    svf: &SafetyValueFunction,
    rng: &mut RngStream,
) -> Result<TrueValue> {
    match analytic_value(arm, svf) {
        Some(value) => Ok(TrueValue {
            value,
            method: ValueMethod::Analytic,
            ci_halfwidth: 0.0,
        }),
        None => true_value_monte_carlo(arm, svf, MONTE_CARLO_SAMPLES, rng),
    }
}

fn analytic_value(arm: &ArmDistribution, svf: &SafetyValueFunction) -> Option<f64> {
    // (mean, variance, lower-tail mean at alpha)
    let moments = |mean: f64, var: f64, tail: &dyn Fn(f64) -> f64| match *svf {
        SafetyValueFunction::Mean => mean,
        SafetyValueFunction::MeanVariance { rho, .. } => mean - rho * var,
        SafetyValueFunction::CVaR { alpha } => tail(alpha),
    };
    match arm {
        ArmDistribution::Deterministic(r) => Some(moments(*r, 0.0, &|_| *r)),
        ArmDistribution::Uniform { lo, hi } => {
            let w = hi - lo;
            Some(moments((lo + hi) / 2.0, w * w / 12.0, &|a| lo + a * w / 2.0))
        }
        ArmDistribution::Bernoulli(p) => {
            let q = 1.0 - p;
            Some(moments(*p, p * q, &|a| if a <= q { 0.0 } else { (a - q) / a }))
        }
        ArmDistribution::Empirical(values) => {
            let mut sorted = values.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            let n = sorted.len() as f64;
            let mean = sorted.iter().sum::<f64>() / n;
            let var = sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            Some(moments(mean, var, &|a| {
                let k = cvar_tail_len(sorted.len(), a);
                sorted[..k].iter().sum::<f64>() / k as f64
            }))
        }
        ArmDistribution::TruncatedGaussianMixture(_) => None,
    }
}

/// Monte Carlo estimate of the true value with a batch-means confidence
/// half-width. The point value is the estimator applied to all `n` draws.
pub fn true_value_monte_carlo(
    arm: &ArmDistribution,
    svf: &SafetyValueFunction,
    n: usize,
    rng: &mut RngStream,
) -> Result<TrueValue> {
    if n < 2 * MONTE_CARLO_BATCHES {
        return Err(BanditError::invalid(format!(
            "monte carlo needs at least {} samples",
            2 * MONTE_CARLO_BATCHES
        )));
    }
    let draws = (0..n)
        .map(|_| arm.sample(rng))
        .collect::<Result<Vec<_>>>()?;
    let batch = n / MONTE_CARLO_BATCHES;
    let batch_values: Vec<f64> = draws
        .chunks_exact(batch)
        .take(MONTE_CARLO_BATCHES)
        .map(|chunk| svf.estimate(chunk))
        .collect::<Result<_>>()?;
    let b = batch_values.len() as f64;
    let bm = batch_values.iter().sum::<f64>() / b;
    let bvar = batch_values.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>() / (b - 1.0);
    // batch estimates are based on n/B draws; scale their spread to n draws
    let se = (bvar / b).sqrt();
    Ok(TrueValue {
        value: svf.estimate(&draws)?,
        method: ValueMethod::MonteCarlo,
        ci_halfwidth: 1.96 * se,
    })
}

/// Serialisable arm description used in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArmSpec {
    Deterministic { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Bernoulli { p: f64 },
    TruncatedGaussianMixture { components: Vec<MixtureComponent> },
    Empirical { samples: Vec<f64> },
}

impl ArmSpec {
    pub fn build(&self) -> Result<ArmDistribution> {
        match self {
            ArmSpec::Deterministic { value } => ArmDistribution::deterministic(*value),
            ArmSpec::Uniform { lo, hi } => ArmDistribution::uniform(*lo, *hi),
            ArmSpec::Bernoulli { p } => ArmDistribution::bernoulli(*p),
            ArmSpec::TruncatedGaussianMixture { components } => {
                ArmDistribution::truncated_mixture(components.clone())
            }
            ArmSpec::Empirical { samples } => ArmDistribution::empirical(samples.clone()),
        }
    }
}

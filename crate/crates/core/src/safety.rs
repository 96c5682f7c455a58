//! Safety value functions: a score for a reward distribution together with
//! its sample estimator and bounded-difference constant `gamma`.
//!
//! Convention: higher is better everywhere. Mean-variance is `mu - rho * var`
//! and CVaR is the mean of the lower `alpha` tail of the reward.
//!
//! All estimators sort their input before accumulating, so the result is
//! bit-identical under any permutation of the samples.

use serde::{Deserialize, Serialize};

use crate::error::{BanditError, Result};

/// Normalisation of the variance term in the mean-variance estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorForm {
    /// `1/n` normalisation.
    #[default]
    Biased,
    /// `1/(n-1)` normalisation; requires at least two samples.
    Unbiased,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SafetyValueFunction {
    Mean,
    MeanVariance { rho: f64, form: EstimatorForm },
    CVaR { alpha: f64 },
}

impl SafetyValueFunction {
    pub fn mean() -> Self {
        SafetyValueFunction::Mean
    }

    pub fn mean_variance(rho: f64, form: EstimatorForm) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(BanditError::invalid(format!("rho must be finite and >= 0, got {rho}")));
        }
        Ok(SafetyValueFunction::MeanVariance { rho, form })
    }

    pub fn cvar(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(BanditError::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        Ok(SafetyValueFunction::CVaR { alpha })
    }

    /// Bounded-difference constant: replacing one of `n` samples moves the
    /// estimate by at most `gamma / n`.
    ///
    /// For mean-variance, replacing one sample moves the mean by up to `1/n`
    /// and the `1/n`-normalised variance by up to `(n-1)/n^2`, in the same
    /// direction when the other samples sit at one end of `[0, 1]`. Both
    /// forms are therefore bounded by `(1 + rho) / n` uniformly in `n`.
    pub fn gamma(&self) -> f64 {
        match *self {
            SafetyValueFunction::Mean => 1.0,
            SafetyValueFunction::MeanVariance { rho, .. } => 1.0 + rho,
            SafetyValueFunction::CVaR { alpha } => 1.0 / alpha,
        }
    }

    /// Smallest sample count the estimator accepts.
    pub fn min_samples(&self) -> usize {
        match self {
            SafetyValueFunction::MeanVariance {
                form: EstimatorForm::Unbiased,
                ..
            } => 2,
            _ => 1,
        }
    }

    /// `c = gamma / n`, the single-coordinate sensitivity of the estimator.
    pub fn bounded_difference(&self, n: usize) -> Result<f64> {
        if n < self.min_samples() {
            return Err(BanditError::invalid(format!(
                "bounded difference needs n >= {}, got {n}",
                self.min_samples()
            )));
        }
        Ok(self.gamma() / n as f64)
    }

    /// Sample estimate of the value. Values must lie in `[0, 1]`.
    pub fn estimate(&self, samples: &[f64]) -> Result<f64> {
        let n = samples.len();
        if n < self.min_samples() {
            return Err(BanditError::invalid(format!(
                "estimator needs at least {} samples, got {n}",
                self.min_samples()
            )));
        }
        if let Some(bad) = samples.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(BanditError::invalid(format!("sample {bad} outside [0, 1]")));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(self.estimate_sorted(&sorted))
    }

    /// Estimate from samples already sorted ascending and validated.
    pub(crate) fn estimate_sorted(&self, sorted: &[f64]) -> f64 {
        match *self {
            SafetyValueFunction::Mean => mean(sorted),
            SafetyValueFunction::MeanVariance { rho, form } => {
                let n = sorted.len() as f64;
                let mu = mean(sorted);
                let ss: f64 = sorted.iter().map(|x| (x - mu) * (x - mu)).sum();
                let var = match form {
                    EstimatorForm::Biased => ss / n,
                    EstimatorForm::Unbiased => ss / (n - 1.0),
                };
                mu - rho * var
            }
            SafetyValueFunction::CVaR { alpha } => {
                let k = cvar_tail_len(sorted.len(), alpha);
                mean(&sorted[..k])
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SafetyValueFunction::Mean => "mean",
            SafetyValueFunction::MeanVariance { .. } => "mean_variance",
            SafetyValueFunction::CVaR { .. } => "cvar",
        }
    }
}

/// Number of order statistics averaged by the CVaR estimator: `ceil(n * alpha)`,
/// kept within `1..=n`. The product is nudged down before the ceiling so
/// that e.g. `30 * 0.1 = 3.0000000000000004` counts as 3.
pub fn cvar_tail_len(n: usize, alpha: f64) -> usize {
    let k = (n as f64 * alpha - 1e-9).ceil() as usize;
    k.clamp(1, n)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Serialisable form used by configuration files:
/// `{"type": "mean_variance", "rho": 1.0, "estimator_form": "biased"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", from = "ValueFunctionSpecRepr")]
pub enum ValueFunctionSpec {
    Mean,
    MeanVariance {
        rho: f64,
        estimator_form: EstimatorForm,
    },
    Cvar {
        alpha: f64,
    },
}

// unit variants of internally tagged enums ignore `deny_unknown_fields`
#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ValueFunctionSpecRepr {
    Mean {},
    MeanVariance {
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default)]
        estimator_form: EstimatorForm,
    },
    Cvar {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
}

impl From<ValueFunctionSpecRepr> for ValueFunctionSpec {
    fn from(r: ValueFunctionSpecRepr) -> Self {
        match r {
            ValueFunctionSpecRepr::Mean {} => ValueFunctionSpec::Mean,
            ValueFunctionSpecRepr::MeanVariance {
                rho,
                estimator_form,
            } => ValueFunctionSpec::MeanVariance {
                rho,
                estimator_form,
            },
            ValueFunctionSpecRepr::Cvar { alpha } => ValueFunctionSpec::Cvar { alpha },
        }
    }
}

fn default_rho() -> f64 {
    1.0
}

fn default_alpha() -> f64 {
    0.1
}

impl ValueFunctionSpec {
    pub fn build(&self) -> Result<SafetyValueFunction> {
        match *self {
            ValueFunctionSpec::Mean => Ok(SafetyValueFunction::Mean),
            ValueFunctionSpec::MeanVariance {
                rho,
                estimator_form,
            } => SafetyValueFunction::mean_variance(rho, estimator_form),
            ValueFunctionSpec::Cvar { alpha } => SafetyValueFunction::cvar(alpha),
        }
    }
}

//! Concentration-bound calculators and Monte Carlo checks of them.
//!
//! Deviation bounds follow McDiarmid's inequality for i.i.d. samples and
//! its without-replacement analogue for subsamples, both instantiated with
//! the bounded-difference constant `c = gamma / n` of the value function.
//! The remaining calculators evaluate the pieces of the two-arm regret
//! bound for BESA+ numerically.

use rayon::prelude::*;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::environments::{true_value, ArmDistribution};
use crate::error::{BanditError, Result};
use crate::rng::{derive_run_rng, subsample_without_replacement, RngStream};
use crate::safety::SafetyValueFunction;

/// Constants of the two-arm bound for a given value gap and `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub delta_gap: f64,
    pub gamma: f64,
    pub horizon: u64,
    /// `delta_gap^2 / (4 gamma^2)`
    pub omega: f64,
    /// `16 gamma^2 / delta_gap^2`
    pub m: f64,
    /// `omega / m`
    pub kappa: f64,
    /// `e^omega / (1 - e^(-3 omega))`
    pub c: f64,
}

impl BoundParams {
    pub fn new(delta_gap: f64, gamma: f64, horizon: u64) -> Result<Self> {
        if !(delta_gap > 0.0 && delta_gap.is_finite()) {
            return Err(BanditError::invalid(format!("gap must be positive, got {delta_gap}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(BanditError::invalid(format!("gamma must be positive, got {gamma}")));
        }
        let omega = delta_gap * delta_gap / (4.0 * gamma * gamma);
        let m = 16.0 * gamma * gamma / (delta_gap * delta_gap);
        Ok(BoundParams {
            delta_gap,
            gamma,
            horizon,
            omega,
            m,
            kappa: omega / m,
            c: omega.exp() / (1.0 - (-3.0 * omega).exp()),
        })
    }

    /// Burn-in length `max(ln T / kappa, exp(4 gamma^2 ln 2 / gap^2), 3 u_T)`.
    pub fn burn_in(&self, horizon: u64) -> f64 {
        let ln_t = (horizon as f64).ln();
        let a = ln_t / self.kappa;
        let b = (4.0 * self.gamma * self.gamma * 2f64.ln() / (self.delta_gap * self.delta_gap)).exp();
        let u = 3.0 * self.m * ln_t;
        a.max(b).max(u)
    }
}

/// `exp(-2 eps^2 / (n c^2))`, clamped to `[0, 1]`.
pub fn mcdiarmid_tail(n: usize, c: f64, eps: f64) -> f64 {
    (-2.0 * eps * eps / (n as f64 * c * c)).exp().clamp(0.0, 1.0)
}

/// Deviation `gamma * sqrt(ln(1/delta) / (2n))` exceeded with probability at
/// most `delta`; the inverse of [`mcdiarmid_tail`] at `c = gamma / n`.
pub fn mcdiarmid_deviation(n: usize, gamma: f64, delta: f64) -> f64 {
    gamma * ((1.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Tail for an estimate on `m` of `n` values drawn without replacement:
/// `exp(-2 eps^2 / (min(m, n-m) c^2))`. At `m = n` the subsample is the whole
/// set, so the tail is 0 for any positive `eps`.
pub fn subsample_tail(m: usize, n: usize, c: f64, eps: f64) -> f64 {
    let span = m.min(n - m);
    if span == 0 {
        return if eps > 0.0 { 0.0 } else { 1.0 };
    }
    (-2.0 * eps * eps / (span as f64 * c * c)).exp().clamp(0.0, 1.0)
}

/// Subsample deviation `gamma * sqrt(min(m, n-m) ln(1/delta) / (2 m^2))`.
pub fn subsample_deviation(m: usize, n: usize, gamma: f64, delta: f64) -> f64 {
    let span = m.min(n - m) as f64;
    gamma * (span * (1.0 / delta).ln() / (2.0 * (m * m) as f64)).sqrt()
}

/// `u_t = (16 gamma^2 / gap^2) ln t`, the cap on suboptimal pulls.
pub fn suboptimal_play_threshold(params: &BoundParams, t: f64) -> f64 {
    params.m * t.ln()
}

/// `sum_{t = t_start}^{T} C exp(-kappa t / ln t) (1 - exp(-t omega))`.
pub fn beta_series(params: &BoundParams, t_start: u64, horizon: u64) -> Result<f64> {
    if t_start < 2 || t_start > horizon {
        return Err(BanditError::invalid(format!(
            "beta series needs 2 <= t_start <= T, got {t_start}..{horizon}"
        )));
    }
    Ok((t_start..=horizon)
        .map(|t| {
            let t = t as f64;
            params.c * (-params.kappa * t / t.ln()).exp() * (1.0 - (-t * params.omega).exp())
        })
        .sum())
}

/// One point of the composite two-arm regret bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub horizon: u64,
    /// `gap (sum 2/t + u_T + c + beta(c, T) + ln T)`.
    pub bound: f64,
    /// `min(bound, gap * T)`: no policy can lose more than `gap` per step.
    pub capped: f64,
}

/// Evaluates the composite bound on a grid of horizons (each `>= 3`). The
/// beta sum starts at the burn-in `c` and is empty when `c > T`.
pub fn regret_bound_curve(params: &BoundParams, grid: &[u64]) -> Result<Vec<BoundPoint>> {
    grid.iter()
        .map(|&horizon| {
            if horizon < 3 {
                return Err(BanditError::invalid(format!("horizon {horizon} < 3")));
            }
            let gap = params.delta_gap;
            let harmonic: f64 = (1..=horizon).map(|t| 2.0 / t as f64).sum();
            let u = suboptimal_play_threshold(params, horizon as f64);
            let burn_in = params.burn_in(horizon);
            let start = burn_in.ceil().max(2.0);
            let beta = if start <= horizon as f64 {
                beta_series(params, start as u64, horizon)?
            } else {
                0.0
            };
            let bound = gap * (harmonic + u + burn_in + beta + (horizon as f64).ln());
            Ok(BoundPoint {
                horizon,
                bound,
                capped: bound.min(gap * horizon as f64),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Full-sample estimate against the true value.
    Iid,
    /// Subsample estimate against the full-sample estimate.
    Subsample,
}

impl BoundKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Iid => "iid",
            BoundKind::Subsample => "subsample",
        }
    }
}

/// Result of one Monte Carlo bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verification {
    pub kind: BoundKind,
    pub n: usize,
    pub m: Option<usize>,
    pub delta: f64,
    pub trials: usize,
    pub violation_rate: f64,
    /// `delta + 3 sqrt(delta (1 - delta) / trials)`.
    pub threshold: f64,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.violation_rate <= self.threshold
    }
}

const TRIALS_PER_SHARD: usize = 1000;

/// Frequency with which the lower deviation bound is violated.
///
/// Trials are split into fixed shards of 1000, shard `s` drawing from
/// `derive_run_rng(seed, s)` where `seed` is the next word of `rng`, so the
/// result does not depend on how many worker threads run the shards.
#[allow(clippy::too_many_arguments)]
pub fn verify_bound_monte_carlo(
    kind: BoundKind,
    svf: &SafetyValueFunction,
    arm: &ArmDistribution,
    n: usize,
    m: Option<usize>,
    delta: f64,
    trials: usize,
    rng: &mut RngStream,
) -> Result<Verification> {
    if trials < 1000 {
        return Err(BanditError::invalid(format!("need at least 1000 trials, got {trials}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BanditError::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if n < svf.min_samples() {
        return Err(BanditError::invalid(format!("n = {n} too small for {}", svf.name())));
    }
    let m = match kind {
        BoundKind::Iid => None,
        BoundKind::Subsample => {
            let m = m.ok_or_else(|| BanditError::invalid("subsample check needs m"))?;
            if m < svf.min_samples() || m > n {
                return Err(BanditError::invalid(format!("subsample size m = {m} must lie in 1..=n ({n})")));
            }
            Some(m)
        }
    };
    let gamma = svf.gamma();
    let truth = match kind {
        BoundKind::Iid => true_value(arm, svf, rng)?.value,
        BoundKind::Subsample => f64::NAN,
    };
    let seed = rng.next_u64();
    let shards = trials.div_ceil(TRIALS_PER_SHARD);

    let violations: usize = (0..shards)
        .into_par_iter()
        .map(|shard| -> Result<usize> {
            let mut local = derive_run_rng(seed, shard as u64);
            let count = TRIALS_PER_SHARD.min(trials - shard * TRIALS_PER_SHARD);
            let mut hits = 0;
            let mut sample = Vec::with_capacity(n);
            for _ in 0..count {
                sample.clear();
                for _ in 0..n {
                    sample.push(arm.sample(&mut local)?);
                }
                let full = svf.estimate(&sample)?;
                let violated = match m {
                    None => full <= truth - mcdiarmid_deviation(n, gamma, delta),
                    // whole-set subsample: same multiset, same estimate
                    Some(m) if m == n => false,
                    Some(m) => {
                        let sub = subsample_without_replacement(&sample, m, &mut local)?;
                        svf.estimate(&sub)? <= full - subsample_deviation(m, n, gamma, delta)
                    }
                };
                hits += usize::from(violated);
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();

    Ok(Verification {
        kind,
        n,
        m,
        delta,
        trials,
        violation_rate: violations as f64 / trials as f64,
        threshold: delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::safety::EstimatorForm;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mcdiarmid_tail_values() {
        assert!(close(mcdiarmid_tail(100, 0.01, 0.1), (-2f64).exp(), 1e-12));
        assert!(close((-2f64).exp(), 0.13534, 1e-5));
        assert_eq!(mcdiarmid_tail(10, 0.3, 0.0), 1.0);
        assert!(close(mcdiarmid_tail(1, 1.0, 1.0), (-2f64).exp(), 1e-15));
    }

    #[test]
    fn mcdiarmid_deviation_values() {
        let eps = mcdiarmid_deviation(50, 1.0, 0.05);
        assert!(close(eps, (20f64.ln() / 100.0).sqrt(), 1e-15));
        assert!(close(eps, 0.17310, 5e-5));
        assert!(mcdiarmid_deviation(50, 1.0, 1.0 - 1e-12) < 1e-6);
    }

    #[test]
    fn tail_deviation_round_trip() {
        for &(n, gamma, delta) in &[(1usize, 1.0, 0.5), (50, 1.5, 0.05), (1000, 10.0, 0.001)] {
            let eps = mcdiarmid_deviation(n, gamma, delta);
            let back = mcdiarmid_tail(n, gamma / n as f64, eps);
            assert!(close(back, delta, 1e-12 * delta.max(1e-3)), "{back} vs {delta}");
        }
    }

    #[test]
    fn subsample_tail_values() {
        assert_eq!(subsample_tail(10, 10, 0.1, 0.1), 0.0);
        assert_eq!(subsample_tail(10, 10, 0.1, 0.0), 1.0);
        assert!(close(subsample_tail(5, 100, 0.2, 0.2), (-0.4f64).exp(), 1e-15));
        assert!(close((-0.4f64).exp(), 0.67032, 1e-5));
        assert!(subsample_tail(50, 60, 0.1, 0.3) < subsample_tail(50, 100, 0.1, 0.3));
    }

    #[test]
    fn subsample_deviation_inverts_tail() {
        let (m, n, gamma, delta) = (20, 70, 2.0, 0.05);
        let eps = subsample_deviation(m, n, gamma, delta);
        assert!(close(subsample_tail(m, n, gamma / m as f64, eps), delta, 1e-12));
    }

    #[test]
    fn params_derived_quantities() {
        let p = BoundParams::new(0.5, 1.0, 1000).unwrap();
        assert!(close(p.omega, 0.0625, 1e-15));
        assert!(close(p.m, 64.0, 1e-12));
        assert!(close(p.kappa, 0.0625 / 64.0, 1e-15));
        assert!(close(p.c, 0.0625f64.exp() / (1.0 - (-0.1875f64).exp()), 1e-12));
        assert!(BoundParams::new(0.0, 1.0, 10).is_err());
        assert!(BoundParams::new(0.5, 0.0, 10).is_err());
    }

    #[test]
    fn threshold_values() {
        let e = std::f64::consts::E;
        let p = BoundParams::new(0.5, 1.0, 10).unwrap();
        assert!(close(suboptimal_play_threshold(&p, e), 64.0, 1e-12));
        let p = BoundParams::new(0.1, 1.5, 10).unwrap();
        assert!(close(suboptimal_play_threshold(&p, e), 3600.0, 1e-9));
        let mut prev = 0.0;
        for t in 2..200 {
            let u = suboptimal_play_threshold(&p, t as f64);
            assert!(u >= prev);
            prev = u;
        }
    }

    #[test]
    fn beta_single_term() {
        let p = BoundParams::new(0.5, 1.0, 10).unwrap();
        let t = 10f64;
        let hand = p.c * (-p.kappa * t / t.ln()).exp() * (1.0 - (-t * p.omega).exp());
        assert!(close(beta_series(&p, 10, 10).unwrap(), hand, 1e-15));
        assert!(beta_series(&p, 1, 10).is_err());
        assert!(beta_series(&p, 11, 10).is_err());
    }

    #[test]
    fn beta_nondecreasing_in_horizon() {
        let p = BoundParams::new(0.5, 1.0, 10).unwrap();
        let mut prev = 0.0;
        for horizon in [2u64, 5, 50, 500, 5000] {
            let b = beta_series(&p, 2, horizon).unwrap();
            assert!(b >= prev && b.is_finite());
            prev = b;
        }
    }

    #[test]
    fn regret_curve_shape() {
        let grid = [3u64, 10, 100, 1000, 10_000, 100_000];
        let p = BoundParams::new(0.5, 1.0, 0).unwrap();
        let curve = regret_bound_curve(&p, &grid).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].bound >= w[0].bound);
            assert!(w[1].capped >= w[0].capped);
        }
        for pt in &curve {
            assert!(pt.capped <= 0.5 * pt.horizon as f64 + 1e-9);
        }
        let at = |h| curve.iter().find(|pt| pt.horizon == h).unwrap().bound;
        let growth = (1e4f64.ln() / 1e2f64.ln()) * 10.0;
        assert!(at(10_000) / at(100) < growth);

        let q = BoundParams::new(0.25, 1.0, 0).unwrap();
        let smaller_gap = regret_bound_curve(&q, &grid).unwrap();
        for (a, b) in curve.iter().zip(&smaller_gap) {
            assert!(b.bound > a.bound);
        }
        assert!(regret_bound_curve(&p, &[2]).is_err());
    }

    #[test]
    fn full_subsample_never_violates() {
        let mut rng = derive_run_rng(1, 1);
        let v = verify_bound_monte_carlo(
            BoundKind::Subsample,
            &SafetyValueFunction::Mean,
            &ArmDistribution::Bernoulli(0.5),
            20,
            Some(20),
            0.1,
            1000,
            &mut rng,
        )
        .unwrap();
        assert_eq!(v.violation_rate, 0.0);
    }

    #[test]
    fn iid_bernoulli_mean_within_threshold() {
        let mut rng = derive_run_rng(2, 0);
        let v = verify_bound_monte_carlo(
            BoundKind::Iid,
            &SafetyValueFunction::Mean,
            &ArmDistribution::Bernoulli(0.5),
            100,
            None,
            0.05,
            20_000,
            &mut rng,
        )
        .unwrap();
        assert!(close(v.threshold, 0.05 + 3.0 * (0.05f64 * 0.95 / 20_000.0).sqrt(), 1e-15));
        assert!(v.passed(), "{v:?}");
    }

    #[test]
    fn iid_uniform_mean_variance_within_threshold() {
        let mut rng = derive_run_rng(3, 0);
        let svf = SafetyValueFunction::mean_variance(1.0, EstimatorForm::Biased).unwrap();
        let v = verify_bound_monte_carlo(
            BoundKind::Iid,
            &svf,
            &ArmDistribution::Uniform { lo: 0.0, hi: 1.0 },
            50,
            None,
            0.1,
            5000,
            &mut rng,
        )
        .unwrap();
        assert!(v.passed(), "{v:?}");
    }

    #[test]
    fn verifier_rejects_bad_inputs() {
        let mut rng = derive_run_rng(0, 0);
        let arm = ArmDistribution::Bernoulli(0.5);
        let svf = SafetyValueFunction::Mean;
        assert!(verify_bound_monte_carlo(BoundKind::Iid, &svf, &arm, 10, None, 0.1, 999, &mut rng).is_err());
        assert!(verify_bound_monte_carlo(BoundKind::Subsample, &svf, &arm, 10, None, 0.1, 1000, &mut rng).is_err());
        assert!(verify_bound_monte_carlo(BoundKind::Subsample, &svf, &arm, 10, Some(11), 0.1, 1000, &mut rng).is_err());
        assert!(verify_bound_monte_carlo(BoundKind::Iid, &svf, &arm, 10, None, 1.0, 1000, &mut rng).is_err());
    }

    #[test]
    fn verifier_is_deterministic() {
        let run = || {
            let mut rng = derive_run_rng(8, 8);
            verify_bound_monte_carlo(
                BoundKind::Subsample,
                &SafetyValueFunction::Mean,
                &ArmDistribution::Uniform { lo: 0.0, hi: 1.0 },
                10,
                Some(5),
                0.3,
                3500,
                &mut rng,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }
}

//! Comparison policies in their usual textbook forms.

use rand_distr::{Beta, Distribution};

use crate::error::{BanditError, Result};
use crate::rng::RngStream;

use super::ArmHistory;

/// Per-variant state of the baseline policies.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselineState {
    /// `argmax mean + sqrt(2 ln t / N)`.
    Ucb1,
    /// Beta(1 + S, 1 + F) posteriors over binarised rewards.
    Thompson { successes: Vec<u64>, failures: Vec<u64> },
    /// `argmin (var - rho * mean) - (5 + rho) * sqrt(ln(1/delta_t) / (2N))`, `delta_t = 1/t^2`.
    MvLcb { rho: f64 },
    /// Uniform exploration for `tau` steps, then greedy on `var - rho * mean`.
    ExpExp { rho: f64, tau: u64 },
    /// `argmax CVaR_alpha + c * sqrt(ln t / N)`.
    Marab { c: f64, alpha: f64 },
}

impl BaselineState {
    pub fn thompson(k: usize) -> Self {
        BaselineState::Thompson {
            successes: vec![0; k],
            failures: vec![0; k],
        }
    }

    /// Thompson pseudo-counts absorb one Bernoulli(reward) draw; other
    /// variants read everything they need from the histories.
    pub fn observe(&mut self, arm: usize, reward: f64, rng: &mut RngStream) -> Result<()> {
        if !(0.0..=1.0).contains(&reward) {
            return Err(BanditError::invalid(format!("reward {reward} outside [0, 1]")));
        }
        if let BaselineState::Thompson {
            successes,
            failures,
        } = self
        {
            if rng.bernoulli(reward) {
                successes[arm] += 1;
            } else {
                failures[arm] += 1;
            }
        }
        Ok(())
    }
}

fn first_unpulled(histories: &[ArmHistory]) -> Option<usize> {
    histories.iter().position(ArmHistory::is_empty)
}

fn argmax_by(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, s) in scores.enumerate() {
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

/// Picks an arm for step `t >= 1`. Arms without observations are played
/// first (lowest index), except during the ExpExp exploration phase.
pub fn baseline_select(
    state: &BaselineState,
    histories: &[ArmHistory],
    t: u64,
    rng: &mut RngStream,
) -> Result<usize> {
    let k = histories.len();
    if k == 0 {
        return Err(BanditError::invalid("no arms"));
    }
    if let BaselineState::ExpExp { tau, .. } = state {
        if t <= *tau {
            return Ok(rng.index(k));
        }
    }
    if let Some(arm) = first_unpulled(histories) {
        return Ok(arm);
    }
    let ln_t = (t as f64).ln();
    let choice = match state {
        BaselineState::Ucb1 => argmax_by(
            histories
                .iter()
                .map(|h| h.mean() + (2.0 * ln_t / h.count() as f64).sqrt()),
        ),
        BaselineState::Thompson {
            successes,
            failures,
        } => {
            let mut draws = Vec::with_capacity(k);
            for (s, f) in successes.iter().zip(failures) {
                let beta = Beta::new(1.0 + *s as f64, 1.0 + *f as f64)
                    .map_err(|e| BanditError::InvalidState(e.to_string()))?;
                draws.push(beta.sample(rng));
            }
            argmax_by(draws.into_iter())
        }
        BaselineState::MvLcb { rho } => {
            let log_inv_delta = 2.0 * ln_t;
            argmax_by(histories.iter().map(|h| {
                let lcb = (h.variance() - rho * h.mean())
                    - (5.0 + rho) * (log_inv_delta / (2.0 * h.count() as f64)).sqrt();
                -lcb
            }))
        }
        BaselineState::ExpExp { rho, .. } => {
            argmax_by(histories.iter().map(|h| -(h.variance() - rho * h.mean())))
        }
        BaselineState::Marab { c, alpha } => argmax_by(
            histories
                .iter()
                .map(|h| h.cvar(*alpha) + c * (ln_t / h.count() as f64).sqrt()),
        ),
    };
    Ok(choice)
}

/// Default ExpExp exploration length `(T / 14)^(2/3)` rounds, or 1000 when
/// the horizon is unknown.
pub fn default_expexp_tau(horizon: Option<u64>) -> u64 {
    match horizon {
        Some(t) => ((t as f64 / 14.0).powf(2.0 / 3.0).round() as u64).max(1),
        None => 1000,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_run_rng;

    fn hist(xs: &[f64]) -> ArmHistory {
        ArmHistory::from_rewards(xs.iter().copied()).unwrap()
    }

    #[test]
    fn ucb1_prefers_higher_mean_at_equal_counts() {
        let hs = vec![hist(&[0.9]), hist(&[0.1])];
        let mut rng = derive_run_rng(0, 0);
        assert_eq!(baseline_select(&BaselineState::Ucb1, &hs, 3, &mut rng).unwrap(), 0);
    }

    #[test]
    fn unpulled_arms_go_first() {
        let hs = vec![hist(&[0.9]), ArmHistory::new(), ArmHistory::new()];
        let mut rng = derive_run_rng(0, 0);
        for s in [
            BaselineState::Ucb1,
            BaselineState::thompson(3),
            BaselineState::MvLcb { rho: 1.0 },
            BaselineState::Marab { c: 1.0, alpha: 0.1 },
            BaselineState::ExpExp { rho: 1.0, tau: 0 },
        ] {
            assert_eq!(baseline_select(&s, &hs, 2, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn marab_bonus_favours_fewer_pulls() {
        // equal CVaR estimates; sqrt(ln 1000 / 10) > sqrt(ln 1000 / 100)
        let hs = vec![hist(&[0.5; 10]), hist(&[0.5; 100])];
        let mut rng = derive_run_rng(0, 0);
        let s = BaselineState::Marab { c: 1.0, alpha: 0.1 };
        assert_eq!(baseline_select(&s, &hs, 1000, &mut rng).unwrap(), 0);
    }

    #[test]
    fn expexp_explores_uniformly() {
        let hs = vec![hist(&[0.9]), hist(&[0.1]), hist(&[0.5])];
        let s = BaselineState::ExpExp { rho: 1.0, tau: 100 };
        let mut rng = derive_run_rng(7, 0);
        let trials = 10_000;
        let mut counts = [0usize; 3];
        for _ in 0..trials {
            counts[baseline_select(&s, &hs, 50, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / trials as f64 - 1.0 / 3.0).abs() <= 0.02, "{counts:?}");
        }
    }

    #[test]
    fn expexp_exploits_lowest_variance_penalised_mean() {
        let hs = vec![hist(&[0.0, 1.0]), hist(&[0.4, 0.4])];
        let s = BaselineState::ExpExp { rho: 1.0, tau: 10 };
        let mut rng = derive_run_rng(7, 0);
        assert_eq!(baseline_select(&s, &hs, 11, &mut rng).unwrap(), 1);
    }

    #[test]
    fn mv_lcb_prefers_low_variance() {
        let hs = vec![hist(&[0.0, 1.0, 0.0, 1.0]), hist(&[0.45; 4])];
        let mut rng = derive_run_rng(0, 0);
        let s = BaselineState::MvLcb { rho: 1.0 };
        assert_eq!(baseline_select(&s, &hs, 10, &mut rng).unwrap(), 1);
    }

    #[test]
    fn thompson_update_with_certain_success() {
        let mut s = BaselineState::thompson(2);
        let mut rng = derive_run_rng(0, 0);
        for _ in 0..20 {
            s.observe(1, 1.0, &mut rng).unwrap();
            s.observe(0, 0.0, &mut rng).unwrap();
        }
        assert_eq!(
            s,
            BaselineState::Thompson {
                successes: vec![0, 20],
                failures: vec![20, 0]
            }
        );
        assert!(s.observe(0, 1.5, &mut rng).is_err());
    }

    #[test]
    fn thompson_concentrates_on_better_arm() {
        let mut s = BaselineState::thompson(2);
        let mut rng = derive_run_rng(0, 0);
        for _ in 0..200 {
            s.observe(0, 0.9, &mut rng).unwrap();
            s.observe(1, 0.1, &mut rng).unwrap();
        }
        let hs = vec![hist(&[0.9]), hist(&[0.1])];
        let picks = (0..200)
            .filter(|_| baseline_select(&s, &hs, 400, &mut rng).unwrap() == 0)
            .count();
        assert!(picks > 195);
    }

    #[test]
    fn expexp_tau_default() {
        assert_eq!(default_expexp_tau(None), 1000);
        // (14000 / 14)^(2/3) = 100
        assert_eq!(default_expexp_tau(Some(14_000)), 100);
    }
}

use crate::error::{BanditError, Result};
use crate::safety::cvar_tail_len;

/// Append-only record of one arm's observed rewards.
///
/// A sorted copy is maintained alongside the arrival-order record so that
/// order-statistic quantities over the full history are cheap.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArmHistory {
    rewards: Vec<f64>,
    sorted: Vec<f64>,
    sum: f64,
    sum_sq: f64,
}

impl ArmHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rewards(rewards: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut h = Self::new();
        for r in rewards {
            h.push(r)?;
        }
        Ok(h)
    }

    pub fn push(&mut self, reward: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&reward) {
            return Err(BanditError::invalid(format!("reward {reward} outside [0, 1]")));
        }
        self.rewards.push(reward);
        let at = self.sorted.partition_point(|x| *x <= reward);
        self.sorted.insert(at, reward);
        self.sum += reward;
        self.sum_sq += reward * reward;
        Ok(())
    }

    /// `N_a`: number of pulls so far.
    pub fn count(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count() as f64
    }

    /// `1/N`-normalised variance, clamped at zero against cancellation.
    pub fn variance(&self) -> f64 {
        let n = self.count() as f64;
        let m = self.sum / n;
        (self.sum_sq / n - m * m).max(0.0)
    }

    /// Mean of the `ceil(N * alpha)` smallest rewards.
    pub fn cvar(&self, alpha: f64) -> f64 {
        let k = cvar_tail_len(self.count(), alpha);
        self.sorted[..k].iter().sum::<f64>() / k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_and_count() {
        let mut h = ArmHistory::new();
        h.push(0.7).unwrap();
        assert_eq!(h.count(), 1);
        assert_eq!(h.rewards(), [0.7]);
        h.push(0.2).unwrap();
        assert_eq!(h.count(), 2);
        assert_eq!(h.sorted(), [0.2, 0.7]);
        assert!(h.push(1.01).is_err());
        assert_eq!(h.count(), 2);
    }

    #[test]
    fn summary_statistics() {
        let h = ArmHistory::from_rewards([0.1, 0.2, 0.9, 1.0]).unwrap();
        assert!((h.mean() - 0.55).abs() < 1e-15);
        assert!((h.variance() - 0.1625).abs() < 1e-12);
        assert!((h.cvar(0.5) - 0.15).abs() < 1e-15);
    }
}

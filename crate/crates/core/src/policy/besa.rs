//! Subsampling duels and the single-elimination tournament built on them.

use crate::error::{BanditError, Result};
use crate::rng::{subsample_without_replacement, RngStream};
use crate::safety::SafetyValueFunction;

use super::ArmHistory;

/// Which duel a tournament plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DuelKind {
    /// With the `ln t` forced-exploration guard.
    BesaPlus,
    /// Plain subsampling duel; every arm must already have a sample.
    Besa,
}

/// True when an arm has too few observations at step `t` (natural log).
pub fn needs_exploration(count: usize, t: u64) -> bool {
    count == 0 || (count as f64) < (t as f64).ln()
}

/// BESA+ duel between arms `a` and `b` at step `t >= 1`.
///
/// The guard is checked for `a` first, then `b`. Otherwise both histories
/// are subsampled down to the smaller count and the higher estimate wins;
/// ties go to the arm with fewer pulls, then to a fair coin.
pub fn besa_plus_duel(
    a: usize,
    b: usize,
    histories: &[ArmHistory],
    t: u64,
    svf: &SafetyValueFunction,
    rng: &mut RngStream,
) -> Result<usize> {
    if needs_exploration(histories[a].count(), t) {
        return Ok(a);
    }
    if needs_exploration(histories[b].count(), t) {
        return Ok(b);
    }
    subsample_duel(a, b, histories, svf, rng)
}

/// Original BESA duel: no exploration guard.
pub fn besa_duel(
    a: usize,
    b: usize,
    histories: &[ArmHistory],
    svf: &SafetyValueFunction,
    rng: &mut RngStream,
) -> Result<usize> {
    for arm in [a, b] {
        if histories[arm].is_empty() {
            return Err(BanditError::InvalidState(format!(
                "BESA duel on arm {arm} with an empty history; every arm must be pulled once first"
            )));
        }
    }
    subsample_duel(a, b, histories, svf, rng)
}

fn subsample_duel(
    a: usize,
    b: usize,
    histories: &[ArmHistory],
    svf: &SafetyValueFunction,
    rng: &mut RngStream,
) -> Result<usize> {
    let (na, nb) = (histories[a].count(), histories[b].count());
    let n = na.min(nb);
    let sa = subsample_without_replacement(histories[a].rewards(), n, rng)?;
    let sb = subsample_without_replacement(histories[b].rewards(), n, rng)?;
    assert_eq!(sa.len(), sb.len(), "duel estimates must use equal sample counts");
    let va = duel_estimate(svf, &sa)?;
    let vb = duel_estimate(svf, &sb)?;
    Ok(if va > vb {
        a
    } else if vb > va {
        b
    } else if na < nb {
        a
    } else if nb < na {
        b
    } else if rng.coin() {
        a
    } else {
        b
    })
}

// The unbiased variance is undefined for a single sample; a lone
// observation is scored by its value alone.
fn duel_estimate(svf: &SafetyValueFunction, samples: &[f64]) -> Result<f64> {
    if samples.len() < svf.min_samples() {
        return SafetyValueFunction::Mean.estimate(samples);
    }
    svf.estimate(samples)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TournamentOutcome {
    pub winner: usize,
    pub rounds: usize,
    pub duels: usize,
    /// Number of byes handed out in each round.
    pub byes: Vec<usize>,
}

/// Single-elimination bracket over `arms`.
///
/// The arms are shuffled, then paired off round by round; an odd arm out
/// gets a bye. `k` arms take `ceil(log2 k)` rounds and `k - 1` duels.
pub fn tournament_select(
    arms: &[usize],
    histories: &[ArmHistory],
    t: u64,
    svf: &SafetyValueFunction,
    rng: &mut RngStream,
    duel: DuelKind,
) -> Result<TournamentOutcome> {
    if arms.is_empty() {
        return Err(BanditError::invalid("tournament needs at least one arm"));
    }
    let mut bracket = arms.to_vec();
    rng.shuffle(&mut bracket);
    let mut rounds = 0;
    let mut duels = 0;
    let mut byes = Vec::new();
    while bracket.len() > 1 {
        let mut next = Vec::with_capacity(bracket.len().div_ceil(2));
        for pair in bracket.chunks(2) {
            match *pair {
                [a, b] => {
                    let w = match duel {
                        DuelKind::BesaPlus => besa_plus_duel(a, b, histories, t, svf, rng)?,
                        DuelKind::Besa => besa_duel(a, b, histories, svf, rng)?,
                    };
                    duels += 1;
                    next.push(w);
                }
                [bye] => next.push(bye),
                _ => unreachable!(),
            }
        }
        byes.push(bracket.len() % 2);
        rounds += 1;
        bracket = next;
    }
    Ok(TournamentOutcome {
        winner: bracket[0],
        rounds,
        duels,
        byes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_run_rng;

    fn hist(xs: &[f64]) -> ArmHistory {
        ArmHistory::from_rewards(xs.iter().copied()).unwrap()
    }

    #[test]
    fn first_step_pulls_a() {
        let hs = vec![ArmHistory::new(), ArmHistory::new()];
        let mut rng = derive_run_rng(0, 0);
        let svf = SafetyValueFunction::Mean;
        assert_eq!(besa_plus_duel(0, 1, &hs, 1, &svf, &mut rng).unwrap(), 0);
        assert_eq!(besa_plus_duel(1, 0, &hs, 1, &svf, &mut rng).unwrap(), 1);
    }

    #[test]
    fn guard_overrides_estimates() {
        // ln(100) ~ 4.605 > 3
        let hs = vec![hist(&[0.0; 3]), hist(&[1.0; 50])];
        let mut rng = derive_run_rng(0, 0);
        let svf = SafetyValueFunction::Mean;
        assert_eq!(besa_plus_duel(0, 1, &hs, 100, &svf, &mut rng).unwrap(), 0);
        assert_eq!(besa_plus_duel(1, 0, &hs, 100, &svf, &mut rng).unwrap(), 0);
    }

    #[test]
    fn clear_winner() {
        let hs = vec![hist(&[0.9; 50]), hist(&[0.1; 50])];
        let mut rng = derive_run_rng(0, 0);
        let svf = SafetyValueFunction::Mean;
        assert_eq!(besa_plus_duel(0, 1, &hs, 1_000_000, &svf, &mut rng).unwrap(), 0);
    }

    #[test]
    fn identical_histories_flip_a_coin() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let hs = vec![hist(&xs), hist(&xs)];
        let mut rng = derive_run_rng(3, 0);
        let svf = SafetyValueFunction::Mean;
        let trials = 10_000;
        let a = (0..trials)
            .filter(|_| besa_plus_duel(0, 1, &hs, 1_000_000, &svf, &mut rng).unwrap() == 0)
            .count();
        let f = a as f64 / trials as f64;
        assert!((f - 0.5).abs() <= 0.02, "{f}");
    }

    #[test]
    fn besa_duel_cases() {
        let svf = SafetyValueFunction::Mean;
        let mut rng = derive_run_rng(1, 0);
        let hs = vec![hist(&[0.4]), hist(&[0.35])];
        assert_eq!(besa_duel(0, 1, &hs, &svf, &mut rng).unwrap(), 0);

        // every size-1 subsample of a is 0.2 < 0.9
        let hs = vec![hist(&[0.2, 0.2, 0.2]), hist(&[0.9])];
        for _ in 0..100 {
            assert_eq!(besa_duel(0, 1, &hs, &svf, &mut rng).unwrap(), 1);
        }

        let hs = vec![hist(&[0.5]), hist(&[0.5])];
        let a = (0..4000)
            .filter(|_| besa_duel(0, 1, &hs, &svf, &mut rng).unwrap() == 0)
            .count();
        assert!((a as f64 / 4000.0 - 0.5).abs() < 0.03);

        let hs = vec![ArmHistory::new(), hist(&[0.5])];
        assert!(matches!(
            besa_duel(0, 1, &hs, &svf, &mut rng),
            Err(BanditError::InvalidState(_))
        ));
    }

    #[test]
    fn equal_estimates_prefer_fewer_tries() {
        let svf = SafetyValueFunction::Mean;
        let mut rng = derive_run_rng(1, 0);
        let hs = vec![hist(&[0.5; 10]), hist(&[0.5; 4])];
        for _ in 0..50 {
            assert_eq!(besa_duel(0, 1, &hs, &svf, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn unbiased_form_duel_on_single_samples() {
        let svf = SafetyValueFunction::mean_variance(1.0, crate::safety::EstimatorForm::Unbiased).unwrap();
        let hs = vec![hist(&[0.3]), hist(&[0.6, 0.6])];
        let mut rng = derive_run_rng(1, 0);
        assert_eq!(besa_duel(0, 1, &hs, &svf, &mut rng).unwrap(), 1);
    }

    #[test]
    fn tournament_single_arm() {
        let hs = vec![ArmHistory::new()];
        let mut rng = derive_run_rng(0, 0);
        let out =
            tournament_select(&[0], &hs, 1, &SafetyValueFunction::Mean, &mut rng, DuelKind::Besa).unwrap();
        assert_eq!(out.winner, 0);
        assert_eq!(out.rounds, 0);
        assert_eq!(out.duels, 0);
    }

    #[test]
    fn tournament_best_deterministic_arm_wins() {
        let hs: Vec<ArmHistory> = [0.1, 0.2, 0.3, 0.9].iter().map(|&v| hist(&[v; 40])).collect();
        let mut rng = derive_run_rng(2, 0);
        for _ in 0..200 {
            let out = tournament_select(
                &[0, 1, 2, 3],
                &hs,
                1000,
                &SafetyValueFunction::Mean,
                &mut rng,
                DuelKind::BesaPlus,
            )
            .unwrap();
            assert_eq!(out.winner, 3);
            assert_eq!(out.rounds, 2);
            assert_eq!(out.duels, 3);
        }
    }

    #[test]
    fn tournament_three_arms_one_bye() {
        let hs: Vec<ArmHistory> = [0.1, 0.2, 0.3].iter().map(|&v| hist(&[v; 5])).collect();
        let mut rng = derive_run_rng(2, 0);
        let out =
            tournament_select(&[0, 1, 2], &hs, 10, &SafetyValueFunction::Mean, &mut rng, DuelKind::Besa)
                .unwrap();
        assert_eq!(out.rounds, 2);
        assert_eq!(out.byes, vec![1, 0]);
        assert_eq!(out.duels, 2);
    }

    #[test]
    fn tournament_rejects_empty() {
        let mut rng = derive_run_rng(0, 0);
        assert!(tournament_select(&[], &[], 1, &SafetyValueFunction::Mean, &mut rng, DuelKind::Besa).is_err());
    }
}

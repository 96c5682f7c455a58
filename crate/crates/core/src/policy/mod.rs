//! Action-selection rules.
//!
//! [`Policy`] owns the per-arm histories of one run and dispatches to the
//! BESA duels or a baseline. `log` is the natural logarithm throughout.

mod baselines;
mod besa;
mod history;

pub use baselines::{baseline_select, default_expexp_tau, BaselineState};
pub use besa::{
    besa_duel, besa_plus_duel, needs_exploration, tournament_select, DuelKind, TournamentOutcome,
};
pub use history::ArmHistory;

use serde::{Deserialize, Serialize};

use crate::error::{BanditError, Result};
use crate::rng::RngStream;
use crate::safety::SafetyValueFunction;

/// Serialisable policy description, e.g. `{"type": "marab", "c": 1.0}`.
///
/// Risk parameters left unset are taken from the experiment's value
/// function when it has them (`rho` for mean-variance, `alpha` for CVaR),
/// else default to `rho = 1`, `alpha = 0.1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", from = "PolicySpecRepr")]
pub enum PolicySpec {
    BesaPlus,
    Besa,
    Ucb1,
    Thompson,
    MvLcb {
        rho: Option<f64>,
    },
    Expexp {
        rho: Option<f64>,
        tau: Option<u64>,
    },
    Marab {
        c: f64,
        alpha: Option<f64>,
    },
}

fn default_marab_c() -> f64 {
    1.0
}

// serde ignores `deny_unknown_fields` on unit variants of internally tagged
// enums, so parsing goes through empty struct variants.
#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum PolicySpecRepr {
    BesaPlus {},
    Besa {},
    Ucb1 {},
    Thompson {},
    MvLcb {
        #[serde(default)]
        rho: Option<f64>,
    },
    Expexp {
        #[serde(default)]
        rho: Option<f64>,
        #[serde(default)]
        tau: Option<u64>,
    },
    Marab {
        #[serde(default = "default_marab_c")]
        c: f64,
        #[serde(default)]
        alpha: Option<f64>,
    },
}

impl From<PolicySpecRepr> for PolicySpec {
    fn from(r: PolicySpecRepr) -> Self {
        match r {
            PolicySpecRepr::BesaPlus {} => PolicySpec::BesaPlus,
            PolicySpecRepr::Besa {} => PolicySpec::Besa,
            PolicySpecRepr::Ucb1 {} => PolicySpec::Ucb1,
            PolicySpecRepr::Thompson {} => PolicySpec::Thompson,
            PolicySpecRepr::MvLcb { rho } => PolicySpec::MvLcb { rho },
            PolicySpecRepr::Expexp { rho, tau } => PolicySpec::Expexp { rho, tau },
            PolicySpecRepr::Marab { c, alpha } => PolicySpec::Marab { c, alpha },
        }
    }
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::BesaPlus => "besa_plus",
            PolicySpec::Besa => "besa",
            PolicySpec::Ucb1 => "ucb1",
            PolicySpec::Thompson => "thompson",
            PolicySpec::MvLcb { .. } => "mv_lcb",
            PolicySpec::Expexp { .. } => "expexp",
            PolicySpec::Marab { .. } => "marab",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_rho = |rho: &Option<f64>| match rho {
            Some(r) if !(r.is_finite() && *r >= 0.0) => {
                Err(BanditError::Config(format!("{}: rho must be >= 0", self.name())))
            }
            _ => Ok(()),
        };
        match self {
            PolicySpec::MvLcb { rho } => check_rho(rho),
            PolicySpec::Expexp { rho, tau } => {
                check_rho(rho)?;
                if *tau == Some(0) {
                    return Err(BanditError::Config("expexp: tau must be >= 1".into()));
                }
                Ok(())
            }
            PolicySpec::Marab { c, alpha } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(BanditError::Config("marab: c must be >= 0".into()));
                }
                if let Some(a) = alpha {
                    if !(*a > 0.0 && *a <= 1.0) {
                        return Err(BanditError::Config("marab: alpha must lie in (0, 1]".into()));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Rule {
    BesaPlus,
    Besa,
    Baseline(BaselineState),
}

/// A stateful policy bound to one run.
#[derive(Debug, Clone)]
pub struct Policy {
    rule: Rule,
    svf: SafetyValueFunction,
    histories: Vec<ArmHistory>,
}

impl Policy {
    pub fn new(
        spec: &PolicySpec,
        num_arms: usize,
        svf: SafetyValueFunction,
        horizon: Option<u64>,
    ) -> Result<Self> {
        spec.validate()?;
        if num_arms == 0 {
            return Err(BanditError::invalid("policy needs at least one arm"));
        }
        let svf_rho = match svf {
            SafetyValueFunction::MeanVariance { rho, .. } => rho,
            _ => 1.0,
        };
        let svf_alpha = match svf {
            SafetyValueFunction::CVaR { alpha } => alpha,
            _ => 0.1,
        };
        let rule = match spec {
            PolicySpec::BesaPlus => Rule::BesaPlus,
            PolicySpec::Besa => Rule::Besa,
            PolicySpec::Ucb1 => Rule::Baseline(BaselineState::Ucb1),
            PolicySpec::Thompson => Rule::Baseline(BaselineState::thompson(num_arms)),
            PolicySpec::MvLcb { rho } => Rule::Baseline(BaselineState::MvLcb {
                rho: rho.unwrap_or(svf_rho),
            }),
            PolicySpec::Expexp { rho, tau } => Rule::Baseline(BaselineState::ExpExp {
                rho: rho.unwrap_or(svf_rho),
                tau: tau.unwrap_or_else(|| default_expexp_tau(horizon)),
            }),
            PolicySpec::Marab { c, alpha } => Rule::Baseline(BaselineState::Marab {
                c: *c,
                alpha: alpha.unwrap_or(svf_alpha),
            }),
        };
        Ok(Policy {
            rule,
            svf,
            histories: vec![ArmHistory::new(); num_arms],
        })
    }

    pub fn histories(&self) -> &[ArmHistory] {
        &self.histories
    }

    /// Chooses the arm for step `t >= 1`.
    ///
    /// BESA+ with two arms is the duel `(0, 1)` verbatim. With more arms any
    /// arm below the `ln t` exploration count is served first (fewest pulls,
    /// then lowest index) and otherwise a BESA+ tournament decides. BESA
    /// pulls each arm once in index order before its tournament starts.
    pub fn select(&self, t: u64, rng: &mut RngStream) -> Result<usize> {
        if t == 0 {
            return Err(BanditError::invalid("steps are numbered from 1"));
        }
        let hs = &self.histories;
        let all: Vec<usize> = (0..hs.len()).collect();
        match &self.rule {
            Rule::BesaPlus => {
                if hs.len() == 1 {
                    return Ok(0);
                }
                if hs.len() == 2 {
                    return besa_plus_duel(0, 1, hs, t, &self.svf, rng);
                }
                let starved = (0..hs.len())
                    .filter(|&i| needs_exploration(hs[i].count(), t))
                    .min_by_key(|&i| (hs[i].count(), i));
                if let Some(arm) = starved {
                    return Ok(arm);
                }
                Ok(tournament_select(&all, hs, t, &self.svf, rng, DuelKind::BesaPlus)?.winner)
            }
            Rule::Besa => {
                if let Some(arm) = hs.iter().position(ArmHistory::is_empty) {
                    return Ok(arm);
                }
                if hs.len() == 2 {
                    return besa_duel(0, 1, hs, &self.svf, rng);
                }
                Ok(tournament_select(&all, hs, t, &self.svf, rng, DuelKind::Besa)?.winner)
            }
            Rule::Baseline(state) => baseline_select(state, hs, t, rng),
        }
    }

    /// Records the reward observed for `arm`.
    pub fn update(&mut self, arm: usize, reward: f64, rng: &mut RngStream) -> Result<()> {
        let history = self
            .histories
            .get_mut(arm)
            .ok_or_else(|| BanditError::invalid(format!("no arm {arm}")))?;
        history.push(reward)?;
        if let Rule::Baseline(state) = &mut self.rule {
            state.observe(arm, reward, rng)?;
        }
        Ok(())
    }
}

use crate::environments::TrueValue;

use super::{PreparedExperiment, RegretTrace};

const DENSE_LIMIT: u64 = 10_000;
const MAX_CHECKPOINTS: usize = 1000;

/// Steps at which regret is aggregated: every step up to a horizon of
/// 10^4, otherwise at most 1000 geometrically spaced steps ending at `T`.
pub fn checkpoints(horizon: u64) -> Vec<u64> {
    if horizon <= DENSE_LIMIT {
        return (1..=horizon).collect();
    }
    let ln_t = (horizon as f64).ln();
    let mut grid: Vec<u64> = (0..MAX_CHECKPOINTS)
        .map(|i| {
            let x = (ln_t * i as f64 / (MAX_CHECKPOINTS - 1) as f64).exp();
            (x.round() as u64).clamp(1, horizon)
        })
        .collect();
    grid.dedup();
    if grid.last() != Some(&horizon) {
        grid.push(horizon);
    }
    grid
}

/// Percentile with linear interpolation between order statistics
/// (`q` in `[0, 100]`). `sorted` must be ascending and nonempty.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Across-run statistics at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub t: u64,
    pub mean_regret: f64,
    /// Population standard deviation across runs.
    pub std_regret: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
    /// Percentage of runs whose step-`t` arm was optimal.
    pub optimal_play_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyResult {
    pub name: String,
    pub rows: Vec<SummaryRow>,
    /// Per-run traces reduced to the recorded steps, in run order.
    pub traces: Vec<RegretTrace>,
}

impl PolicyResult {
    pub fn row_at(&self, t: u64) -> Option<&SummaryRow> {
        self.rows
            .binary_search_by_key(&t, |r| r.t)
            .ok()
            .map(|i| &self.rows[i])
    }

    /// Mean of `optimal_play_pct` over checkpoints in `[from, to]`.
    pub fn optimal_play_pct_between(&self, from: u64, to: u64) -> f64 {
        let window: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| (from..=to).contains(&r.t))
            .map(|r| r.optimal_play_pct)
            .collect();
        window.iter().sum::<f64>() / window.len() as f64
    }

    pub fn final_row(&self) -> &SummaryRow {
        self.rows.last().expect("horizon >= 1 gives at least one row")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub checkpoints: Vec<u64>,
    pub policies: Vec<PolicyResult>,
    pub true_values: Vec<TrueValue>,
    pub arm_labels: Vec<String>,
}

impl AggregateResult {
    /// `traces` are ordered policy-major, run-minor.
    pub(crate) fn build(prepared: &PreparedExperiment, grid: &[u64], traces: Vec<RegretTrace>) -> Self {
        let runs = prepared.config.replications as usize;
        let mut traces = traces.into_iter();
        let policies = prepared
            .policy_names
            .iter()
            .map(|name| {
                let own: Vec<RegretTrace> = traces.by_ref().take(runs).collect();
                let rows = grid
                    .iter()
                    .map(|&t| summarize(t, &own))
                    .collect();
                PolicyResult {
                    name: name.clone(),
                    rows,
                    traces: own,
                }
            })
            .collect();
        let arm_labels = match prepared.environment.labels() {
            Some(l) => l.to_vec(),
            None => (0..prepared.environment.num_arms()).map(|a| format!("arm{a}")).collect(),
        };
        AggregateResult {
            checkpoints: grid.to_vec(),
            policies,
            true_values: prepared.true_values.clone(),
            arm_labels,
        }
    }

    pub fn policy(&self, name: &str) -> Option<&PolicyResult> {
        self.policies.iter().find(|p| p.name == name)
    }
}

fn summarize(t: u64, traces: &[RegretTrace]) -> SummaryRow {
    let mut values = Vec::with_capacity(traces.len());
    let mut optimal = 0usize;
    for trace in traces {
        let at = trace
            .steps
            .binary_search_by_key(&t, |s| s.t)
            .expect("trace records every checkpoint");
        let step = &trace.steps[at];
        values.push(step.cum_regret);
        optimal += usize::from(step.optimal);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    values.sort_unstable_by(f64::total_cmp);
    SummaryRow {
        t,
        mean_regret: mean,
        std_regret: var.sqrt(),
        p10: percentile(&values, 10.0),
        p50: percentile(&values, 50.0),
        p90: percentile(&values, 90.0),
        optimal_play_pct: 100.0 * optimal as f64 / n,
    }
}

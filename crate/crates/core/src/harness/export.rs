use std::fs;
use std::path::{Path, PathBuf};

use crate::environments::ValueMethod;
use crate::error::{BanditError, Result};

use super::AggregateResult;

pub const SUMMARY_HEADER: &str = "policy,t,mean_regret,std_regret,p10,p50,p90,optimal_play_pct";
pub const TRACE_HEADER: &str = "t,arm,reward,cum_regret";

const PLOT_SCRIPT: &str = r#"# gnuplot -p plot.gp
set datafile separator ','
set key autotitle columnhead left top
set multiplot layout 1,2
set title 'Cumulative regret'
set xlabel 't'
stats 'figure_regret.csv' skip 1 nooutput
plot for [i=2:STATS_columns] 'figure_regret.csv' using 1:i with lines
set title 'Optimal arm play (%)'
set yrange [0:100]
plot for [i=2:STATS_columns] 'figure_optimal_play.csv' using 1:i with lines
unset multiplot
"#;

struct Out {
    path: PathBuf,
    text: String,
}

impl Out {
    fn new(path: PathBuf, header: &str) -> Self {
        let mut text = String::with_capacity(4096);
        text.push_str(header);
        text.push('\n');
        Out { path, text }
    }

    fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    fn write(self) -> Result<PathBuf> {
        fs::write(&self.path, self.text).map_err(|e| BanditError::io(&self.path, e))?;
        Ok(self.path)
    }
}

/// Writes `summary.csv`, `traces/<policy>_<run>.csv`, `true_values.csv`,
/// one plot data file per figure and a gnuplot script. Output is a pure
/// function of `result`, so re-exporting gives identical bytes.
pub fn export_results(result: &AggregateResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let traces_dir = dir.join("traces");
    fs::create_dir_all(&traces_dir).map_err(|e| BanditError::io(&traces_dir, e))?;
    let mut written = Vec::new();

    let mut summary = Out::new(dir.join("summary.csv"), SUMMARY_HEADER);
    for p in &result.policies {
        for r in &p.rows {
            summary.row(&[
                p.name.clone(),
                r.t.to_string(),
                r.mean_regret.to_string(),
                r.std_regret.to_string(),
                r.p10.to_string(),
                r.p50.to_string(),
                r.p90.to_string(),
                r.optimal_play_pct.to_string(),
            ]);
        }
    }
    written.push(summary.write()?);

    for p in &result.policies {
        for trace in &p.traces {
            let path = traces_dir.join(format!("{}_{}.csv", p.name, trace.run_id));
            let mut out = Out::new(path, TRACE_HEADER);
            for s in &trace.steps {
                out.row(&[
                    s.t.to_string(),
                    s.arm.to_string(),
                    s.reward.to_string(),
                    s.cum_regret.to_string(),
                ]);
            }
            written.push(out.write()?);
        }
    }

    let mut values = Out::new(dir.join("true_values.csv"), "arm,label,value,method,ci_halfwidth");
    for (a, (tv, label)) in result.true_values.iter().zip(&result.arm_labels).enumerate() {
        let method = match tv.method {
            ValueMethod::Analytic => "analytic",
            ValueMethod::MonteCarlo => "monte_carlo",
        };
        values.row(&[
            a.to_string(),
            label.clone(),
            tv.value.to_string(),
            method.to_string(),
            tv.ci_halfwidth.to_string(),
        ]);
    }
    written.push(values.write()?);

    let names: Vec<&str> = result.policies.iter().map(|p| p.name.as_str()).collect();
    let header = format!("t,{}", names.join(","));
    let mut regret = Out::new(dir.join("figure_regret.csv"), &header);
    let mut optimal = Out::new(dir.join("figure_optimal_play.csv"), &header);
    for (i, t) in result.checkpoints.iter().enumerate() {
        let mut r = vec![t.to_string()];
        let mut o = vec![t.to_string()];
        for p in &result.policies {
            r.push(p.rows[i].mean_regret.to_string());
            o.push(p.rows[i].optimal_play_pct.to_string());
        }
        regret.row(&r);
        optimal.row(&o);
    }
    written.push(regret.write()?);
    written.push(optimal.write()?);

    let script = dir.join("plot.gp");
    fs::write(&script, PLOT_SCRIPT).map_err(|e| BanditError::io(&script, e))?;
    written.push(script);
    Ok(written)
}

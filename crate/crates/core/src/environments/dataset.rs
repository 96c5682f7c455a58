use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{BanditError, Result};

use super::{ArmDistribution, Environment};

const BUCKETS: usize = 10;

/// Maps a raw value to the midpoint reward of its equal-width bucket over
/// `[min, max]`: bucket `i` in `1..=10` gives `(i - 0.5) / 10`. A zero-width
/// range puts everything in bucket 1.
pub fn bucket_reward(x: f64, min: f64, max: f64) -> f64 {
    let bucket = if max > min {
        let scaled = ((x - min) / (max - min) * BUCKETS as f64).floor() as usize;
        scaled.min(BUCKETS - 1) + 1
    } else {
        1
    };
    (bucket as f64 - 0.5) / BUCKETS as f64
}

/// Builds one empirical arm per distinct value of `group_column`, arms
/// ordered by group label. Values of `value_column` are bucketed into ten
/// equal-width categories over the pooled range. Other columns (censoring
/// indicators, covariates) are ignored.
pub fn load_empirical_csv(
    path: impl AsRef<Path>,
    value_column: &str,
    group_column: &str,
) -> Result<Environment> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| BanditError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);

    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BanditError::Dataset {
                path: path.to_path_buf(),
                row: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let value_idx = column(value_column)?;
    let group_idx = column(group_column)?;

    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| BanditError::Dataset {
            path: path.to_path_buf(),
            row: line,
            message,
        };
        let raw = record
            .get(value_idx)
            .ok_or_else(|| bad(format!("missing `{value_column}` field")))?;
        let value: f64 = raw
            .parse()
            .map_err(|_| bad(format!("cannot parse `{raw}` as a number")))?;
        if !value.is_finite() {
            return Err(bad(format!("non-finite value `{raw}`")));
        }
        let group = record
            .get(group_idx)
            .ok_or_else(|| bad(format!("missing `{group_column}` field")))?;
        groups.entry(group.to_string()).or_default().push(value);
    }

    if groups.len() < 2 {
        return Err(BanditError::InvalidArgument(format!(
            "{}: fewer than 2 groups in column `{group_column}`",
            path.display()
        )));
    }

    let (min, max) = groups
        .values()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });

    let mut labels = Vec::with_capacity(groups.len());
    let mut arms = Vec::with_capacity(groups.len());
    for (label, values) in groups {
        let rewards = values.iter().map(|&x| bucket_reward(x, min, max)).collect();
        arms.push(ArmDistribution::empirical(rewards)?);
        labels.push(label);
    }
    Environment::new(arms)?.with_labels(labels)
}

//! Average performance gain over a set of environments.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(mean over envs of result/baseline − 1) · 100`, in percent.
pub fn compute_apg(results: &BTreeMap<String, f64>, baseline: &BTreeMap<String, f64>) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Precondition("no environments to compare".into()));
    }
    if !results.keys().eq(baseline.keys()) {
        let only_r: Vec<&String> = results.keys().filter(|k| !baseline.contains_key(*k)).collect();
        let only_b: Vec<&String> = baseline.keys().filter(|k| !results.contains_key(*k)).collect();
        return Err(Error::Precondition(format!(
            "environment sets differ: only in results {only_r:?}, only in baseline {only_b:?}"
        )));
    }
    let mut acc = 0.0;
    for (env, r) in results {
        let b = baseline[env];
        if b == 0.0 {
            return Err(Error::Precondition(format!("baseline return for `{env}` is zero")));
        }
        if !r.is_finite() || !b.is_finite() {
            return Err(Error::Numeric(format!("nonfinite return for `{env}`")));
        }
        acc += r / b;
    }
    Ok((acc / results.len() as f64 - 1.0) * 100.0)
}

#[derive(Debug, Serialize, Deserialize)]
struct ReturnRow {
    env: String,
    #[serde(rename = "return")]
    value: f64,
}

/// Reads an `env,return` CSV into a map. Duplicate environments are rejected.
pub fn read_returns(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: ReturnRow = row?;
        if out.insert(row.env.clone(), row.value).is_some() {
            return Err(Error::Format(format!("{}: environment `{}` listed twice", path.display(), row.env)));
        }
    }
    Ok(out)
}

pub fn write_returns(path: &Path, returns: &BTreeMap<String, f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (env, value) in returns {
        w.serialize(ReturnRow { env: env.clone(), value: *value })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
        v.iter().map(|(k, x)| (k.to_string(), *x)).collect()
    }

    #[test]
    fn identity_is_zero() {
        let m = map(&[("a", 3.0), ("b", -7.0)]);
        assert_eq!(compute_apg(&m, &m).unwrap(), 0.0);
    }

    #[test]
    fn mismatch_and_zero_baseline() {
        let a = map(&[("a", 1.0)]);
        let b = map(&[("b", 1.0)]);
        assert!(matches!(compute_apg(&a, &b), Err(Error::Precondition(_))));
        let z = map(&[("a", 0.0)]);
        assert!(matches!(compute_apg(&a, &z), Err(Error::Precondition(_))));
    }
}

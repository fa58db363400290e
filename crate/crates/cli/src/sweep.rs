//! Sweep configuration files and output tables.

use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use sar_core::harness::{self, SweepConfig, SweepResult};

use crate::output::{fmt_f64, fmt_opt};

const LIST_KEYS: [&str; 3] = ["taus", "sample_sizes", "methods"];

fn canonical_key(key: &str) -> &str {
    match key {
        "ns" | "n" => "sample_sizes",
        "seed" => "master_seed",
        "r" => "realizations",
        k => k,
    }
}

fn scalar(raw: &str) -> Value {
    let raw = raw.trim();
    match serde_json::from_str::<Value>(raw) {
        Ok(v @ (Value::Number(_) | Value::Bool(_))) => v,
        _ => Value::String(raw.to_string()),
    }
}

/// Parses `key = value` lines (`#` starts a comment). List values are
/// comma-separated; `regime = csv` takes `csv_path`, `csv_response` and an
/// optional `csv_predictors` list.
pub fn parse_key_values(text: &str) -> Result<Map<String, Value>, String> {
    let mut out = Map::new();
    let mut csv = Map::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
        let key = canonical_key(key.trim());
        let value = value.trim();
        match key {
            "csv_path" => {
                csv.insert("path".into(), Value::String(value.into()));
            }
            "csv_response" => {
                csv.insert("response".into(), Value::String(value.into()));
            }
            "csv_predictors" => {
                let cols = value.split(',').map(str::trim).filter(|c| !c.is_empty()).map(|c| Value::String(c.into()));
                csv.insert("predictors".into(), Value::Array(cols.collect()));
            }
            "regime" => {
                out.insert(key.into(), Value::String(value.into()));
            }
            k if LIST_KEYS.contains(&k) => {
                let items = value.split(',').filter(|s| !s.trim().is_empty()).map(scalar).collect();
                out.insert(k.into(), Value::Array(items));
            }
            k => {
                out.insert(k.into(), scalar(value));
            }
        }
    }
    if let Some(Value::String(name)) = out.get("regime").cloned() {
        let mut regime = Map::new();
        regime.insert("kind".into(), Value::String(name.clone()));
        if name == "csv" {
            regime.extend(csv);
        }
        out.insert("regime".into(), Value::Object(regime));
    }
    Ok(out)
}

/// Reads a JSON object or key=value file into a partial config.
pub fn read_config_file(path: &Path) -> Result<Map<String, Value>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if text.trim_start().starts_with('{') {
        match serde_json::from_str::<Value>(&text) {
            Ok(Value::Object(map)) => Ok(map),
            Ok(_) => Err("config JSON must be an object".into()),
            Err(e) => Err(format!("{}: {e}", path.display())),
        }
    } else {
        parse_key_values(&text)
    }
}

/// Overlays `partial` on the default configuration.
pub fn resolve(partial: Map<String, Value>) -> Result<SweepConfig, String> {
    let mut base = match serde_json::to_value(SweepConfig::default()) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("config serializes to an object"),
    };
    for (k, v) in partial {
        let k = canonical_key(&k).to_string();
        if !base.contains_key(&k) {
            return Err(format!("unknown config key `{k}`"));
        }
        base.insert(k, v);
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| format!("invalid config: {e}"))
}

fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()
}

pub const RISKS_HEADER: [&str; 10] = [
    "tau",
    "n",
    "method",
    "successes",
    "failures",
    "mean_risk",
    "risk_variance",
    "mean_f_p_value",
    "mean_sar_threshold",
    "first_error",
];
pub const POWER_HEADER: [&str; 7] = [
    "tau",
    "n",
    "method",
    "realizations",
    "power",
    "f_rejection_rate",
    "sar_rejection_rate",
];
pub const FOLD_HEADER: [&str; 5] = ["tau", "n", "method", "mean_fold_std", "mean_fold_variance"];

/// Writes `risks.csv`, `power.csv` and `fold_variance.csv`; returns their paths.
pub fn write_tables(result: &SweepResult, dir: &Path) -> std::io::Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let key = |tau: f64, n: usize, m: &harness::Method| vec![fmt_f64(tau), n.to_string(), m.to_string()];

    let risks = result
        .records
        .iter()
        .map(|r| {
            let mut row = key(r.tau, r.n, &r.method);
            row.extend([
                r.successes.to_string(),
                r.failures.to_string(),
                fmt_f64(r.mean_risk),
                fmt_f64(r.risk_variance),
                fmt_f64(r.mean_f_p_value),
                fmt_opt(r.mean_sar_threshold),
                r.first_error.clone().unwrap_or_default(),
            ]);
            row
        })
        .collect();
    let power = harness::power_table(result)
        .iter()
        .map(|p| {
            let mut row = key(p.tau, p.n, &p.method);
            row.extend([
                p.realizations.to_string(),
                fmt_f64(p.power),
                fmt_f64(p.f_rejection_rate),
                fmt_opt(p.sar_rejection_rate),
            ]);
            row
        })
        .collect();
    let folds = result
        .records
        .iter()
        .map(|r| {
            let mut row = key(r.tau, r.n, &r.method);
            row.extend([fmt_opt(r.mean_fold_std), fmt_opt(r.mean_fold_variance)]);
            row
        })
        .collect();

    let mut written = Vec::new();
    for (name, header, rows) in [
        ("risks.csv", &RISKS_HEADER[..], risks),
        ("power.csv", &POWER_HEADER[..], power),
        ("fold_variance.csv", &FOLD_HEADER[..], folds),
    ] {
        let path = dir.join(name);
        write_table(&path, header, rows)?;
        written.push(path.display().to_string());
    }
    Ok(written)
}

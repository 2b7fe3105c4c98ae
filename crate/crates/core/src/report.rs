//! Report emission: rounding to 6 significant digits, significance stars,
//! coefficient tables, and JSON / flat CSV writers with stable field order.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::propensity::FitResult;

pub const SIGNIFICANT_DIGITS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format `{other}` (json or csv)"))),
        }
    }
}

/// Rounds to `digits` significant digits; zero and non-finite values pass through.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().expect("valid float")
}

/// Rounds every float in a JSON tree; integers are left alone.
pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().expect("f64"), SIGNIFICANT_DIGITS);
            if let Some(num) = serde_json::Number::from_f64(r) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Two-sided normal p-value for a z statistic.
pub fn p_value(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// `*` p<0.10, `**` p<0.05, `***` p<0.01.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub stars: String,
}

impl CoefficientRow {
    pub fn new(name: &str, estimate: f64, se: f64) -> Self {
        let z = estimate / se;
        let p = p_value(z);
        CoefficientRow {
            name: name.to_string(),
            estimate,
            se,
            z,
            p_value: p,
            stars: stars(p).to_string(),
        }
    }
}

pub fn coefficient_rows(fit: &FitResult) -> Vec<CoefficientRow> {
    fit.names
        .iter()
        .zip(fit.coefficients.iter().zip(&fit.standard_errors))
        .map(|(n, (b, se))| CoefficientRow::new(n, *b, *se))
        .collect()
}

fn rounded<T: Serialize>(x: &T) -> Result<Value> {
    let mut v = serde_json::to_value(x)?;
    round_value(&mut v);
    Ok(v)
}

/// Pretty JSON with floats at 6 significant digits and a trailing newline.
pub fn to_json_string<T: Serialize>(x: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&rounded(x)?)?;
    s.push('\n');
    Ok(s)
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, item) in map {
                flatten(&key(k), item, out);
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                // Rows with a name are keyed by it, which reads better than an index.
                let label = item
                    .get("name")
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .unwrap_or_else(|| i.to_string());
                match item {
                    Value::Object(map) => {
                        for (k, field) in map.iter().filter(|(k, _)| *k != "name") {
                            flatten(&format!("{}.{k}", key(&label)), field, out);
                        }
                    }
                    _ => flatten(&key(&label), item, out),
                }
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Two-column `field,value` CSV of the flattened, rounded report.
pub fn to_csv_string<T: Serialize>(x: &T) -> Result<String> {
    let mut rows = Vec::new();
    flatten("", &rounded(x)?, &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["field", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Config(e.to_string()))?).expect("utf-8"))
}

/// Writes `dir/stem.{json,csv}` and returns the path.
pub fn emit_report<T: Serialize>(dir: &Path, stem: &str, x: &T, format: ReportFormat) -> Result<PathBuf> {
    let body = match format {
        ReportFormat::Json => to_json_string(x)?,
        ReportFormat::Csv => to_csv_string(x)?,
    };
    let path = dir.join(format!("{stem}.{}", format.extension()));
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Reads back a JSON report.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

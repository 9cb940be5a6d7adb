//! Deterministic file output: number formatting, CSV tables, JSON records.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use sc3_core::interloop::LoopResult;
use sc3_core::{Scenario, SolverConfig, SystemSolution};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Significant digits of every floating-point number written to a file.
const DIGITS: usize = 12;

/// `%.12g`-style rendering; infinities become `inf` and `-inf`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS as i32).contains(&exp) {
        let decimals = (DIGITS as i32 - 1 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// JSON value of a number rounded to 12 significant digits. Non-finite
/// values are written as strings.
pub fn jnum(x: f64) -> Value {
    if x.is_finite() {
        let rounded: f64 = num(x).parse().expect("formatted number parses");
        json!(rounded)
    } else {
        json!(num(x))
    }
}

/// Rounds every float inside `v` to 12 significant digits.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => jnum(n.as_f64().expect("f64 number")),
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// SHA-256 of the canonical text of a scenario, so that equivalent files
/// share a digest.
pub fn digest(scenario: &Scenario) -> String {
    hex::encode(Sha256::digest(scenario.to_config_text().as_bytes()))
}

pub fn config_json(cfg: &SolverConfig) -> Value {
    round_json(serde_json::to_value(cfg).expect("config serializes"))
}

pub const LOOP_COLUMNS: &str = "loop_id,b_ul_hz,b_dl_hz,t_ul_s,t_comp_s,t_dl_s,f_hz,d_sc3_bits,lqr_cost";

pub fn loop_fields(r: &LoopResult) -> String {
    let a = &r.allocation;
    [a.b_ul, a.b_dl, a.t_ul, a.t_comp, a.t_dl, a.f, r.d_sc3, r.cost.value()]
        .iter()
        .fold(r.loop_id.to_string(), |mut s, v| {
            s.push(',');
            s.push_str(&num(*v));
            s
        })
}

/// Comment lines that tie a CSV file to its inputs.
pub fn provenance_header(digest: &str, cfg: &SolverConfig) -> String {
    format!(
        "# sc3 {VERSION}\n# scenario_digest: {digest}\n# solver: {}\n",
        config_json(cfg)
    )
}

pub fn solution_json(sol: &SystemSolution) -> Value {
    let d = &sol.diagnostics;
    let mut m = Map::new();
    m.insert("scheme".into(), json!(d.scheme.name()));
    m.insert("total_lqr_cost".into(), jnum(sol.total_cost().value()));
    m.insert("total_bandwidth_hz".into(), jnum(sol.total_bandwidth()));
    m.insert("total_cpu_hz".into(), jnum(sol.total_cpu()));
    m.insert("total_d_sc3_bits".into(), jnum(sol.total_info()));
    m.insert("iterations".into(), json!(d.iterations));
    m.insert("converged".into(), json!(d.converged));
    m.insert(
        "objective_history".into(),
        Value::Array(d.objective_history.iter().map(|v| jnum(*v)).collect()),
    );
    m.insert("dual_bandwidth".into(), jnum(d.dual_bandwidth));
    m.insert("dual_cpu".into(), jnum(d.dual_cpu));
    m.insert("kkt_residual".into(), d.kkt_residual.map_or(Value::Null, jnum));
    m.insert("warnings".into(), json!(d.warnings));
    Value::Object(m)
}

pub fn record(digest: &str, cfg: &SolverConfig, body: Value) -> Value {
    let mut m = Map::new();
    m.insert("tool".into(), json!("sc3"));
    m.insert("version".into(), json!(VERSION));
    m.insert("scenario_digest".into(), json!(digest));
    m.insert("solver".into(), config_json(cfg));
    m.insert("result".into(), body);
    Value::Object(m)
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    write(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(1.0), "1");
        assert_eq!(num(1e6), "1000000");
        assert_eq!(num(2.0 / 3.0), "0.666666666667");
        assert_eq!(num(457627.1186440678), "457627.118644");
        assert_eq!(num(1e-7), "1e-7");
        assert_eq!(num(1.5e13), "1.5e13");
        assert_eq!(num(-0.25), "-0.25");
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn json_rounding_is_recursive() {
        let v = round_json(json!({"a": [1.0 / 3.0], "b": {"c": 0.1}}));
        assert_eq!(v, json!({"a": [0.333333333333], "b": {"c": 0.1}}));
    }
}

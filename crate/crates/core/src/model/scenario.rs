//! Scenario files.
//!
//! A scenario is a TOML document with these sections:
//!
//! ```toml
//! [budget]
//! bandwidth = "1 MHz"        # Hz if a bare number
//! cpu = "2 GHz"              # cycles/s if a bare number
//!
//! [channel]
//! log_base = "log10"         # default path-loss log base for every link
//!
//! [solver]
//! scheme = "proposed"
//! delta = 1e-3
//!
//! [[loops]]
//! T = "10 ms"
//! rho = 0.01
//! alpha = 100
//! ul = { se = 10.5 }
//! dl = { channel = { d_km = 3.0, fc_mhz = 2000, noise_dbm = -107 } }
//! control = { n = 100, log2_det_A = 10, entropy_power = 0.01, det_M_nth_root = 1, trace_sigma_S = 1 }
//! ```
//!
//! `control` may instead hold the plant matrices `A`, `B`, `Q`, `R`,
//! `Sigma_v`, each either dense row-major (`[[1, 0], [0, 1]]`) or one of the
//! shorthands `identity(n)`, `zero(n)` and `diag(value, n)`. Matrices are
//! reduced to their control summary at load time.

use nalgebra::DMatrix;
use thiserror::Error;
use toml::{Table, Value};

use super::link::{ChannelGeometry, LogBase, DEFAULT_NOISE_DBM, DEFAULT_TX_POWER_DBM};
use super::{Budget, LinkSpec, LoopSpec, ModelError};
use crate::control::{summarize, ControlError, ControlMatrices, ControlSummary, NoiseModel};
use crate::interloop::{BaselineParams, Scheme, SolverConfig, SubproblemMethod};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario is not valid TOML: {0}")]
    Syntax(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {source}")]
    Invalid { path: String, source: ModelError },
    #[error("{path}: {source}")]
    Control { path: String, source: ControlError },
}

fn schema(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub loops: Vec<LoopSpec>,
    pub budget: Budget,
    pub solver: SolverConfig,
    /// Default path-loss log base of channel-derived links.
    pub pathloss_log_base: LogBase,
    /// Non-fatal findings, e.g. direct SEs that disagree with the geometry.
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy)]
enum Dim {
    Frequency,
    Time,
}

/// Parses `"500 kHz"`, `"10ms"`, `2e9` and similar into base units.
pub fn parse_quantity(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let split = t
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse {text:?} as a number with unit"))?;
    let factor = match unit.trim() {
        "" | "Hz" | "s" => 1.0,
        "kHz" => 1e3,
        "MHz" => 1e6,
        "GHz" => 1e9,
        "ms" => 1e-3,
        "us" => 1e-6,
        other => return Err(format!("unknown unit {other:?} in {text:?}")),
    };
    Ok(value * factor)
}

fn unit_allowed(dim: Dim, text: &str) -> bool {
    let unit: String = text
        .trim()
        .chars()
        .skip_while(|c| !c.is_ascii_alphabetic() || *c == 'e' || *c == 'E')
        .collect();
    match dim {
        Dim::Frequency => matches!(unit.as_str(), "" | "Hz" | "kHz" | "MHz" | "GHz"),
        Dim::Time => matches!(unit.as_str(), "" | "s" | "ms" | "us"),
    }
}

fn number(v: &Value, path: &str) -> Result<f64, ScenarioError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(schema(path, "expected a number")),
    }
}

fn quantity(v: &Value, path: &str, dim: Dim) -> Result<f64, ScenarioError> {
    match v {
        Value::String(s) => {
            if !unit_allowed(dim, s) {
                return Err(schema(path, format!("unit of {s:?} does not fit this field")));
            }
            parse_quantity(s).map_err(|m| schema(path, m))
        }
        other => number(other, path),
    }
}

fn integer(v: &Value, path: &str) -> Result<usize, ScenarioError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(schema(path, "expected a nonnegative integer")),
    }
}

fn table<'a>(v: &'a Value, path: &str) -> Result<&'a Table, ScenarioError> {
    v.as_table().ok_or_else(|| schema(path, "expected a table"))
}

fn check_keys(t: &Table, path: &str, allowed: &[&str]) -> Result<(), ScenarioError> {
    for key in t.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(schema(
                &format!("{path}.{key}"),
                format!("unknown field, expected one of {}", allowed.join(", ")),
            ));
        }
    }
    Ok(())
}

fn required<'a>(t: &'a Table, path: &str, key: &str) -> Result<&'a Value, ScenarioError> {
    t.get(key)
        .ok_or_else(|| schema(&format!("{path}.{key}"), "missing required field"))
}

fn invalid(path: &str) -> impl FnOnce(ModelError) -> ScenarioError + '_ {
    move |source| ScenarioError::Invalid {
        path: path.to_string(),
        source,
    }
}

/// Parses a matrix given dense row-major or as `identity(n)`, `zero(n)`,
/// `diag(value, n)`.
pub fn parse_matrix(v: &Value) -> Result<DMatrix<f64>, String> {
    match v {
        Value::Array(rows) => {
            let mut data = Vec::new();
            let mut ncols = None;
            for (i, row) in rows.iter().enumerate() {
                let row = row.as_array().ok_or_else(|| format!("row {i} is not an array"))?;
                if *ncols.get_or_insert(row.len()) != row.len() {
                    return Err(format!(
                        "row {i} has {} entries, expected {}",
                        row.len(),
                        ncols.unwrap()
                    ));
                }
                for x in row {
                    data.push(match x {
                        Value::Float(f) => *f,
                        Value::Integer(i) => *i as f64,
                        _ => return Err(format!("row {i} holds a non-number")),
                    });
                }
            }
            let ncols = ncols.unwrap_or(0);
            Ok(DMatrix::from_row_slice(rows.len(), ncols, &data))
        }
        Value::String(s) => {
            let s = s.trim();
            let open = s.find('(').ok_or_else(|| format!("unknown matrix shorthand {s:?}"))?;
            if !s.ends_with(')') {
                return Err(format!("unknown matrix shorthand {s:?}"));
            }
            let name = s[..open].trim();
            let args: Vec<&str> = s[open + 1..s.len() - 1].split(',').map(str::trim).collect();
            let dim = |a: &str| -> Result<usize, String> {
                a.parse::<usize>()
                    .ok()
                    .filter(|n| *n > 0)
                    .ok_or_else(|| format!("bad dimension {a:?} in {s:?}"))
            };
            match (name, args.as_slice()) {
                ("identity", [n]) => Ok(DMatrix::identity(dim(n)?, dim(n)?)),
                ("zero", [n]) => {
                    let n = dim(n)?;
                    Ok(DMatrix::zeros(n, n))
                }
                ("diag", [value, n]) => {
                    let value: f64 = value.parse().map_err(|_| format!("bad value {value:?} in {s:?}"))?;
                    let n = dim(n)?;
                    Ok(DMatrix::identity(n, n) * value)
                }
                _ => Err(format!("unknown matrix shorthand {s:?}")),
            }
        }
        _ => Err("expected an array of rows or a shorthand string".into()),
    }
}

fn parse_solver(v: Option<&Value>) -> Result<SolverConfig, ScenarioError> {
    let mut cfg = SolverConfig::default();
    let Some(v) = v else { return Ok(cfg) };
    let path = "solver";
    let t = table(v, path)?;
    check_keys(
        t,
        path,
        &[
            "scheme",
            "delta",
            "max_outer_iters",
            "dual_tol",
            "inner_tol",
            "d_init_offset",
            "stability_margin",
            "subproblem",
            "lqr_requirement",
            "riccati_tol",
            "riccati_max_iter",
            "weak_link_dominance",
            "baseline",
        ],
    )?;
    for (key, value) in t {
        let p = format!("{path}.{key}");
        match key.as_str() {
            "scheme" => {
                let s = value.as_str().ok_or_else(|| schema(&p, "expected a string"))?;
                cfg.scheme = s.parse::<Scheme>().map_err(|m| schema(&p, m))?;
            }
            "delta" => cfg.delta = number(value, &p)?,
            "max_outer_iters" => cfg.max_outer_iters = integer(value, &p)?,
            "dual_tol" => cfg.dual_tol = number(value, &p)?,
            "inner_tol" => cfg.inner_tol = number(value, &p)?,
            "d_init_offset" => cfg.d_init_offset = number(value, &p)?,
            "stability_margin" => cfg.stability_margin = number(value, &p)?,
            "subproblem" => {
                cfg.subproblem = match value.as_str() {
                    Some("dual-decomposition") => SubproblemMethod::DualDecomposition,
                    Some("projected-gradient") => SubproblemMethod::ProjectedGradient,
                    _ => return Err(schema(&p, "expected \"dual-decomposition\" or \"projected-gradient\"")),
                }
            }
            "lqr_requirement" => {
                cfg.lqr_requirement = Some(match value {
                    Value::Array(items) => items
                        .iter()
                        .enumerate()
                        .map(|(i, x)| number(x, &format!("{p}[{i}]")))
                        .collect::<Result<_, _>>()?,
                    other => vec![number(other, &p)?],
                })
            }
            "riccati_tol" => cfg.riccati_tol = number(value, &p)?,
            "riccati_max_iter" => cfg.riccati_max_iter = integer(value, &p)?,
            "weak_link_dominance" => cfg.weak_link_dominance = number(value, &p)?,
            "baseline" => cfg.baseline = parse_baseline(value, &p)?,
            _ => unreachable!(),
        }
    }
    cfg.validate().map_err(|m| schema(path, m))?;
    Ok(cfg)
}

fn parse_baseline(v: &Value, path: &str) -> Result<BaselineParams, ScenarioError> {
    let t = table(v, path)?;
    check_keys(
        t,
        path,
        &[
            "dl_time_fraction",
            "ul_comp_dl_time",
            "dl_comp_ul_time",
            "frozen_link_share",
        ],
    )?;
    let mut b = BaselineParams::default();
    for (key, value) in t {
        let p = format!("{path}.{key}");
        match key.as_str() {
            "dl_time_fraction" => b.dl_time_fraction = number(value, &p)?,
            "ul_comp_dl_time" => b.ul_comp_dl_time_s = quantity(value, &p, Dim::Time)?,
            "dl_comp_ul_time" => b.dl_comp_ul_time_s = quantity(value, &p, Dim::Time)?,
            "frozen_link_share" => b.frozen_link_share = number(value, &p)?,
            _ => unreachable!(),
        }
    }
    Ok(b)
}

fn parse_log_base(v: &Value, path: &str) -> Result<LogBase, ScenarioError> {
    match v.as_str() {
        Some("log10") => Ok(LogBase::Log10),
        Some("log2") => Ok(LogBase::Log2),
        _ => Err(schema(path, "expected \"log10\" or \"log2\"")),
    }
}

fn parse_link(
    v: &Value,
    path: &str,
    default_base: LogBase,
    warnings: &mut Vec<String>,
) -> Result<LinkSpec, ScenarioError> {
    let t = table(v, path)?;
    check_keys(t, path, &["se", "channel"])?;
    let direct = t.get("se").map(|x| number(x, &format!("{path}.se"))).transpose()?;
    let derived = match t.get("channel") {
        Some(c) => {
            let cp = format!("{path}.channel");
            let ct = table(c, &cp)?;
            check_keys(
                ct,
                &cp,
                &[
                    "d_km",
                    "fc_mhz",
                    "noise_dbm",
                    "target_snr_db",
                    "tx_power_dbm",
                    "log_base",
                ],
            )?;
            let geometry = ChannelGeometry {
                distance_km: number(required(ct, &cp, "d_km")?, &format!("{cp}.d_km"))?,
                carrier_freq_mhz: number(required(ct, &cp, "fc_mhz")?, &format!("{cp}.fc_mhz"))?,
                noise_power_dbm: ct
                    .get("noise_dbm")
                    .map(|x| number(x, &format!("{cp}.noise_dbm")))
                    .transpose()?
                    .unwrap_or(DEFAULT_NOISE_DBM),
                pathloss_log_base: ct
                    .get("log_base")
                    .map(|x| parse_log_base(x, &format!("{cp}.log_base")))
                    .transpose()?
                    .unwrap_or(default_base),
            };
            geometry.validate().map_err(invalid(&cp))?;
            let link = match ct.get("target_snr_db") {
                Some(x) => {
                    let snr_db = number(x, &format!("{cp}.target_snr_db"))?;
                    let se = super::spectral_efficiency(10f64.powf(snr_db / 10.0)).map_err(invalid(&cp))?;
                    LinkSpec::new(se).map_err(invalid(&cp))?
                }
                None => {
                    let tx = ct
                        .get("tx_power_dbm")
                        .map(|x| number(x, &format!("{cp}.tx_power_dbm")))
                        .transpose()?
                        .unwrap_or(DEFAULT_TX_POWER_DBM);
                    LinkSpec::from_geometry(&geometry, tx).map_err(invalid(&cp))?
                }
            };
            Some(link)
        }
        None => None,
    };
    match (direct, derived) {
        (Some(se), derived) => {
            if let Some(d) = derived {
                if (d.spectral_efficiency - se).abs() > 1e-9 * se.abs() {
                    let msg = format!(
                        "{path}: se = {se} overrides the channel-derived value {}",
                        d.spectral_efficiency
                    );
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
            }
            LinkSpec::new(se).map_err(invalid(&format!("{path}.se")))
        }
        (None, Some(d)) => Ok(d),
        (None, None) => Err(schema(path, "needs either se or channel")),
    }
}

fn parse_control(v: &Value, path: &str, cfg: &SolverConfig) -> Result<ControlSummary, ScenarioError> {
    let t = table(v, path)?;
    let control_err = |source| ScenarioError::Control {
        path: path.to_string(),
        source,
    };
    if t.contains_key("A") {
        check_keys(t, path, &["A", "B", "Q", "R", "Sigma_v", "noise_model"])?;
        let mat = |key: &str| -> Result<DMatrix<f64>, ScenarioError> {
            parse_matrix(required(t, path, key)?).map_err(|m| schema(&format!("{path}.{key}"), m))
        };
        if let Some(nm) = t.get("noise_model") {
            if nm.as_str() != Some("gaussian") {
                return Err(schema(&format!("{path}.noise_model"), "only \"gaussian\" is supported"));
            }
        }
        let matrices = ControlMatrices {
            a: mat("A")?,
            b: mat("B")?,
            q: mat("Q")?,
            r: mat("R")?,
            sigma_v: mat("Sigma_v")?,
            noise_model: NoiseModel::Gaussian,
        };
        summarize(&matrices, cfg.riccati_tol, cfg.riccati_max_iter).map_err(control_err)
    } else {
        check_keys(
            t,
            path,
            &["n", "log2_det_A", "entropy_power", "det_M_nth_root", "trace_sigma_S"],
        )?;
        let num = |key: &str| number(required(t, path, key)?, &format!("{path}.{key}"));
        let summary = ControlSummary {
            n: integer(required(t, path, "n")?, &format!("{path}.n"))?,
            log2_det_a: num("log2_det_A")?,
            entropy_power: num("entropy_power")?,
            det_m_nth_root: num("det_M_nth_root")?,
            trace_sigma_s: num("trace_sigma_S")?,
        };
        summary.validate().map_err(control_err)?;
        Ok(summary)
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(config_text: &str) -> Result<Scenario, ScenarioError> {
    let root: Table = config_text
        .parse()
        .map_err(|e: toml::de::Error| ScenarioError::Syntax(e.to_string()))?;
    check_keys(&root, "scenario", &["budget", "solver", "channel", "loops"])?;

    let solver = parse_solver(root.get("solver"))?;

    let budget_t = table(required(&root, "scenario", "budget")?, "budget")?;
    check_keys(budget_t, "budget", &["bandwidth", "cpu"])?;
    let budget = Budget {
        total_bandwidth_hz: quantity(
            required(budget_t, "budget", "bandwidth")?,
            "budget.bandwidth",
            Dim::Frequency,
        )?,
        total_cpu_hz: quantity(required(budget_t, "budget", "cpu")?, "budget.cpu", Dim::Frequency)?,
    };
    budget.validate().map_err(invalid("budget"))?;

    let mut pathloss_log_base = LogBase::default();
    if let Some(c) = root.get("channel") {
        let ct = table(c, "channel")?;
        check_keys(ct, "channel", &["log_base"])?;
        if let Some(b) = ct.get("log_base") {
            pathloss_log_base = parse_log_base(b, "channel.log_base")?;
        }
    }

    let loops_v = required(&root, "scenario", "loops")?
        .as_array()
        .ok_or_else(|| schema("loops", "expected an array of tables"))?;
    if loops_v.is_empty() {
        return Err(ScenarioError::Schema {
            path: "loops".into(),
            message: "at least one loop is required".into(),
        });
    }
    let mut warnings = Vec::new();
    let mut loops = Vec::with_capacity(loops_v.len());
    for (k, lv) in loops_v.iter().enumerate() {
        let path = format!("loops[{k}]");
        let t = table(lv, &path)?;
        check_keys(t, &path, &["T", "rho", "alpha", "ul", "dl", "control"])?;
        let spec = LoopSpec {
            cycle_time_s: quantity(required(t, &path, "T")?, &format!("{path}.T"), Dim::Time)?,
            extraction_ratio: number(required(t, &path, "rho")?, &format!("{path}.rho"))?,
            processing_difficulty: number(required(t, &path, "alpha")?, &format!("{path}.alpha"))?,
            ul: parse_link(
                required(t, &path, "ul")?,
                &format!("{path}.ul"),
                pathloss_log_base,
                &mut warnings,
            )?,
            dl: parse_link(
                required(t, &path, "dl")?,
                &format!("{path}.dl"),
                pathloss_log_base,
                &mut warnings,
            )?,
            control: parse_control(required(t, &path, "control")?, &format!("{path}.control"), &solver)?,
        };
        spec.validate().map_err(invalid(&path))?;
        loops.push(spec);
    }
    if let Some(req) = &solver.lqr_requirement {
        if req.len() != 1 && req.len() != loops.len() {
            return Err(schema(
                "solver.lqr_requirement",
                format!("has {} entries for {} loops", req.len(), loops.len()),
            ));
        }
    }

    Ok(Scenario {
        loops,
        budget,
        solver,
        pathloss_log_base,
        warnings,
    })
}

impl Scenario {
    /// Serializes the resolved scenario (direct SEs, control summaries, base
    /// units) so that [`load_scenario`] reproduces it.
    pub fn to_config_text(&self) -> String {
        let mut root = Table::new();

        let mut budget = Table::new();
        budget.insert("bandwidth".into(), Value::Float(self.budget.total_bandwidth_hz));
        budget.insert("cpu".into(), Value::Float(self.budget.total_cpu_hz));
        root.insert("budget".into(), Value::Table(budget));

        let mut channel = Table::new();
        channel.insert("log_base".into(), Value::String(self.pathloss_log_base.name().into()));
        root.insert("channel".into(), Value::Table(channel));

        let s = &self.solver;
        let mut solver = Table::new();
        solver.insert("scheme".into(), Value::String(s.scheme.name().into()));
        solver.insert("delta".into(), Value::Float(s.delta));
        solver.insert("max_outer_iters".into(), Value::Integer(s.max_outer_iters as i64));
        solver.insert("dual_tol".into(), Value::Float(s.dual_tol));
        solver.insert("inner_tol".into(), Value::Float(s.inner_tol));
        solver.insert("d_init_offset".into(), Value::Float(s.d_init_offset));
        solver.insert("stability_margin".into(), Value::Float(s.stability_margin));
        solver.insert(
            "subproblem".into(),
            Value::String(
                match s.subproblem {
                    SubproblemMethod::DualDecomposition => "dual-decomposition",
                    SubproblemMethod::ProjectedGradient => "projected-gradient",
                }
                .into(),
            ),
        );
        if let Some(req) = &s.lqr_requirement {
            solver.insert(
                "lqr_requirement".into(),
                Value::Array(req.iter().map(|v| Value::Float(*v)).collect()),
            );
        }
        solver.insert("riccati_tol".into(), Value::Float(s.riccati_tol));
        solver.insert("riccati_max_iter".into(), Value::Integer(s.riccati_max_iter as i64));
        solver.insert("weak_link_dominance".into(), Value::Float(s.weak_link_dominance));
        let mut baseline = Table::new();
        baseline.insert("dl_time_fraction".into(), Value::Float(s.baseline.dl_time_fraction));
        baseline.insert("ul_comp_dl_time".into(), Value::Float(s.baseline.ul_comp_dl_time_s));
        baseline.insert("dl_comp_ul_time".into(), Value::Float(s.baseline.dl_comp_ul_time_s));
        baseline.insert("frozen_link_share".into(), Value::Float(s.baseline.frozen_link_share));
        solver.insert("baseline".into(), Value::Table(baseline));
        root.insert("solver".into(), Value::Table(solver));

        let loops = self
            .loops
            .iter()
            .map(|l| {
                let mut t = Table::new();
                t.insert("T".into(), Value::Float(l.cycle_time_s));
                t.insert("rho".into(), Value::Float(l.extraction_ratio));
                t.insert("alpha".into(), Value::Float(l.processing_difficulty));
                for (key, link) in [("ul", l.ul), ("dl", l.dl)] {
                    let mut lt = Table::new();
                    lt.insert("se".into(), Value::Float(link.spectral_efficiency));
                    t.insert(key.into(), Value::Table(lt));
                }
                let c = &l.control;
                let mut ct = Table::new();
                ct.insert("n".into(), Value::Integer(c.n as i64));
                ct.insert("log2_det_A".into(), Value::Float(c.log2_det_a));
                ct.insert("entropy_power".into(), Value::Float(c.entropy_power));
                ct.insert("det_M_nth_root".into(), Value::Float(c.det_m_nth_root));
                ct.insert("trace_sigma_S".into(), Value::Float(c.trace_sigma_s));
                t.insert("control".into(), Value::Table(ct));
                Value::Table(t)
            })
            .collect();
        root.insert("loops".into(), Value::Array(loops));

        toml::to_string(&root).expect("scenario tables always serialize")
    }
}

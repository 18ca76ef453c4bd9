//! Scenario files and the embedded presets.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "keller-segel"
//! kernel = { family = "keller-segel", params = { chi = 0.5, d = 1.0 } }
//! u0 = { kind = "indicator", a = 1.0 }
//! claims = ["speed-bracket", "linf"]
//!
//! [sim]          # any SimConfig field
//! t_end = 40.0
//!
//! [diagnostics]  # levels, eps, window_floor
//! levels = [0.1]
//!
//! [bounds]
//! u_inf = 2.0    # optional
//! ```

use serde::{Deserialize, Serialize};

use super::claims::ClaimId;
use crate::diagnostics::DiagnosticsConfig;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::solver::{SimConfig, U0Spec};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsOptions {
    /// Overrides the default `‖u‖∞` plugged into the speed formula.
    pub u_inf: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kernel: Kernel,
    #[serde(default = "default_u0")]
    pub u0: U0Spec,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub claims: Vec<ClaimId>,
    #[serde(default)]
    pub bounds: BoundsOptions,
}

fn default_u0() -> U0Spec {
    U0Spec::Indicator { a: 1.0, height: 1.0 }
}

pub const PRESET_NAMES: [&str; 5] = ["kpp-local", "keller-segel", "keller-segel-converge", "step", "power-law"];

const KPP_LOCAL: &str = r#"
name = "kpp-local"
kernel = { family = "zero" }
claims = ["speed-two", "log-delay", "linf", "mass-identity"]
[sim]
t_end = 40.0
dx = 0.1
dt_max = 0.05
"#;

const KELLER_SEGEL: &str = r#"
name = "keller-segel"
kernel = { family = "keller-segel", params = { chi = 0.5, d = 1.0 } }
claims = ["speed-bracket", "linf", "mass-identity"]
[sim]
t_end = 40.0
dx = 0.1
dt_max = 0.05
"#;

const KELLER_SEGEL_CONVERGE: &str = r#"
name = "keller-segel-converge"
kernel = { family = "keller-segel", params = { chi = 0.4, d = 1.0 } }
claims = ["converge-one", "linf", "mass-identity"]
[sim]
t_end = 30.0
dx = 0.1
dt_max = 0.05
"#;

const STEP: &str = r#"
name = "step"
kernel = { family = "step", params = { k_inf = 0.25 } }
claims = ["exp-mass", "plateau", "mass-identity"]
[sim]
t_end = 30.0
dx = 0.1
dt_max = 0.05
advection = "lagrangian-upwind"
"#;

const POWER_LAW: &str = r#"
name = "power-law"
kernel = { family = "power-law", params = { amplitude = 1.0, alpha = 0.5 } }
claims = ["power-mass", "level-growth", "mass-identity"]
[sim]
t_end = 200.0
dx = 0.25
dt_max = 0.1
record_every = 2.0
advection = "lagrangian-upwind"
max_nodes = 4000000
"#;

fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "kpp-local" => Some(KPP_LOCAL),
        "keller-segel" => Some(KELLER_SEGEL),
        "keller-segel-converge" => Some(KELLER_SEGEL_CONVERGE),
        "step" => Some(STEP),
        "power-law" => Some(POWER_LAW),
        _ => None,
    }
}

/// Parse `key=value`; the value is read as a TOML literal, or as a string if
/// that fails.
pub fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{s}' is not of the form key=value")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::Config(format!("override '{s}' has an empty key")));
    }
    Ok((k.to_string(), parse_literal(v.trim())))
}

pub(crate) fn parse_literal(v: &str) -> toml::Value {
    let doc = format!("x = {v}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("x").unwrap_or_else(|| toml::Value::String(v.into())),
        Err(_) => toml::Value::String(v.into()),
    }
}

/// Set a dotted path, creating intermediate tables.
pub fn set_path(root: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().unwrap_or_default();
    let mut cur = root;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{p}' in '{path}' is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Load a preset by name or a TOML file by path, then apply overrides in order.
pub fn load(source: &str, overrides: &[(String, toml::Value)]) -> Result<Scenario> {
    let text = match preset_text(source) {
        Some(t) => t.to_string(),
        None => std::fs::read_to_string(source).map_err(|e| {
            Error::Config(format!(
                "'{source}' is neither a preset ({}) nor a readable file: {e}",
                PRESET_NAMES.join(", ")
            ))
        })?,
    };
    from_text(&text, overrides)
}

pub fn from_text(text: &str, overrides: &[(String, toml::Value)]) -> Result<Scenario> {
    let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
    for (k, v) in overrides {
        set_path(&mut table, k, v.clone())?;
    }
    let scn: Scenario = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    scn.validate()?;
    Ok(scn)
}

impl Scenario {
    pub fn preset(name: &str) -> Option<Scenario> {
        from_text(preset_text(name)?, &[]).ok()
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("invalid scenario name '{}'", self.name)));
        }
        self.kernel.validate().map_err(to_config)?;
        self.sim.validate().map_err(to_config)?;
        self.diagnostics.validate().map_err(to_config)?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::Parameter(m) => Error::Config(m),
        other => other,
    }
}

/// Build a kernel from a family name and `name=value` parameters, e.g.
/// `keller-segel:chi=0.5,d=1`.
pub fn parse_kernel_spec(spec: &str) -> Result<Kernel> {
    let (family, params) = match spec.split_once(':') {
        Some((f, p)) => (f.trim(), p.trim()),
        None => (spec.trim(), ""),
    };
    let mut table = toml::Table::new();
    for kv in params.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = parse_override(kv)?;
        table.insert(k, v);
    }
    kernel_from_params(family, table)
}

pub fn kernel_from_params(family: &str, params: toml::Table) -> Result<Kernel> {
    let mut doc = toml::Table::new();
    doc.insert("family".into(), toml::Value::String(family.into()));
    if !params.is_empty() {
        doc.insert("params".into(), toml::Value::Table(params));
    }
    let k: Kernel = toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("kernel '{family}': {e}")))?;
    k.validate().map_err(to_config)?;
    Ok(k)
}

//! Parameter sweeps over kernel families.
//!
//! ```toml
//! mode = "zip"              # or "grid" (cartesian product)
//! family = "keller-segel"
//! u_inf = 2.0               # optional, otherwise the default choice
//!
//! [params]
//! chi = { geom = [1e-3, 1e-1, 9] }
//! d = { power_of = "chi", exponent = -1.0, scale = 1.0 }
//! # also: x = [0.1, 0.2], x = 0.5, x = { lin = [0.0, 1.0, 11] }
//!
//! [simulate]                # optional: runs each point and fits the front speed
//! t_end = 20.0
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use super::{bound_report, bounds_csv_header, bounds_csv_row, claims::FIT_WINDOW, scenario::kernel_from_params, write_atomic};
use crate::diagnostics::{fit_rate, DiagnosticsConfig, FitModel, Observable};
use crate::error::{Error, Result};
use crate::solver::{run, SimConfig, U0Spec};

pub const MAX_POINTS: usize = 10_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Grid,
    Zip,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Scalar(f64),
    List(Vec<f64>),
    Geom { geom: (f64, f64, usize) },
    Lin { lin: (f64, f64, usize) },
    Derived {
        power_of: String,
        exponent: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ParamSpec {
    fn values(&self, name: &str) -> Result<Option<Vec<f64>>> {
        let spaced = |a: f64, b: f64, n: usize, geometric: bool| -> Result<Vec<f64>> {
            if geometric && !(a > 0.0 && b > 0.0) {
                return Err(Error::Config(format!("'{name}': geometric range needs positive ends")));
            }
            Ok(match n {
                0 => vec![],
                1 => vec![a],
                _ => (0..n)
                    .map(|i| {
                        let s = i as f64 / (n - 1) as f64;
                        if geometric {
                            a * (b / a).powf(s)
                        } else {
                            a + (b - a) * s
                        }
                    })
                    .collect(),
            })
        };
        match self {
            ParamSpec::Scalar(v) => Ok(Some(vec![*v])),
            ParamSpec::List(v) => Ok(Some(v.clone())),
            ParamSpec::Geom { geom: (a, b, n) } => spaced(*a, *b, *n, true).map(Some),
            ParamSpec::Lin { lin: (a, b, n) } => spaced(*a, *b, *n, false).map(Some),
            ParamSpec::Derived { .. } => Ok(None),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub mode: Mode,
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamSpec>,
    #[serde(default)]
    pub u_inf: Option<f64>,
    #[serde(default)]
    pub simulate: Option<SimConfig>,
    #[serde(default)]
    pub u0: Option<U0Spec>,
}

impl SweepSpec {
    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read sweep file {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.keys().map(String::as_str).collect()
    }

    /// Every grid point, values ordered as [`SweepSpec::names`].
    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        let names = self.names();
        let mut free = Vec::new();
        for (k, spec) in &self.params {
            if let Some(v) = spec.values(k)? {
                free.push((k.as_str(), v));
            }
        }
        let combos: Vec<Vec<(&str, f64)>> = match self.mode {
            Mode::Zip => {
                let len = free.first().map_or(0, |(_, v)| v.len());
                if let Some((k, v)) = free.iter().find(|(_, v)| v.len() != len) {
                    return Err(Error::Config(format!(
                        "zip sweep: '{k}' has {} values, expected {len}",
                        v.len()
                    )));
                }
                (0..len).map(|i| free.iter().map(|(k, v)| (*k, v[i])).collect()).collect()
            }
            Mode::Grid => {
                let total = free.iter().map(|(_, v)| v.len()).product::<usize>();
                if total > MAX_POINTS {
                    return Err(Error::Config(format!("sweep has {total} points, limit is {MAX_POINTS}")));
                }
                let mut acc: Vec<Vec<(&str, f64)>> = if free.is_empty() { vec![] } else { vec![vec![]] };
                for (k, v) in &free {
                    acc = acc
                        .into_iter()
                        .flat_map(|p| {
                            v.iter().map(move |&x| {
                                let mut q = p.clone();
                                q.push((*k, x));
                                q
                            })
                        })
                        .collect();
                }
                acc
            }
        };
        if combos.len() > MAX_POINTS {
            return Err(Error::Config(format!("sweep has {} points, limit is {MAX_POINTS}", combos.len())));
        }
        combos
            .into_iter()
            .map(|combo| {
                let lookup: BTreeMap<&str, f64> = combo.into_iter().collect();
                names
                    .iter()
                    .map(|n| match &self.params[*n] {
                        ParamSpec::Derived { power_of, exponent, scale } => lookup
                            .get(power_of.as_str())
                            .map(|b| scale * b.powf(*exponent))
                            .ok_or_else(|| {
                                Error::Config(format!("'{n}' derives from '{power_of}', which is not a free parameter"))
                            }),
                        _ => Ok(lookup[n]),
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn csv_header(spec: &SweepSpec) -> String {
    let mut h = spec.names().join(",");
    if !h.is_empty() {
        h.push(',');
    }
    h.push_str(bounds_csv_header());
    if spec.simulate.is_some() {
        h.push_str(",c_fit,c_fit_r2");
    }
    h
}

fn point_row(spec: &SweepSpec, index: usize, values: &[f64], out_dir: Option<&Path>) -> Result<String> {
    let params: toml::Table = spec
        .names()
        .iter()
        .zip(values)
        .map(|(k, v)| (k.to_string(), toml::Value::Float(*v)))
        .collect();
    let kernel = kernel_from_params(&spec.family, params)?;
    let facts = kernel.facts();
    let mut measured = None;
    let mut fit = None;
    if let Some(sim) = &spec.simulate {
        let diag = DiagnosticsConfig::default();
        let u0 = spec.u0.clone().unwrap_or(U0Spec::Indicator { a: 1.0, height: 1.0 });
        let out = run(&kernel, &u0, sim, &diag).map_err(|f| f.error)?;
        if let Some(dir) = out_dir {
            write_atomic(&dir.join(format!("point-{index:05}.csv")), &out.series.to_csv())?;
        }
        measured = Some(out.series.records.iter().map(|r| r.u_max).fold(0.0, f64::max));
        fit = fit_rate(&out.series, Observable::FrontRight { level: diag.levels[0] }, FitModel::Linear, FIT_WINDOW).ok();
    }
    let report = bound_report(&kernel, measured, spec.u_inf)?;
    let u_inf = match (&report, spec.u_inf) {
        (None, _) => None,
        (Some(_), Some(u)) => Some(u),
        (Some(_), None) => crate::bounds::default_u_inf(facts.jump, measured).ok(),
    };
    let mut row = String::new();
    for v in values {
        let _ = write!(row, "{v},");
    }
    row.push_str(&bounds_csv_row(&facts, u_inf, report.as_ref()));
    if spec.simulate.is_some() {
        match fit {
            Some(f) => {
                let _ = write!(row, ",{},{}", f.coefficient, f.r_squared);
            }
            None => row.push_str(",,"),
        }
    }
    Ok(row)
}

/// CSV with one row per point, in grid order. With `out_dir`, simulated points
/// also write their time series there.
pub fn run_sweep(spec: &SweepSpec, out_dir: Option<&Path>) -> Result<String> {
    let points = spec.points()?;
    if spec.simulate.is_some() {
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir)?;
        }
    }
    let rows: Vec<String> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| point_row(spec, i, p, out_dir))
        .collect::<Result<_>>()?;
    let mut csv = csv_header(spec);
    csv.push('\n');
    for r in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    Ok(csv)
}

pub fn write_sweep(spec: &SweepSpec, out_dir: &Path) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let csv = run_sweep(spec, Some(out_dir))?;
    let path = out_dir.join("sweep.csv");
    write_atomic(&path, &csv)?;
    Ok(path)
}

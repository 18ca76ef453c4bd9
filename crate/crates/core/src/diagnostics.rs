//! Observables of a simulation: mass, bulk burning, fronts, level-set measures,
//! and least-squares rate fits.
//!
//! A nodal field is read as the piecewise-linear interpolant between nodes,
//! continued by its end values over the two outer half cells, so measures add
//! up to `n·dx`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::convolve::Field;
use crate::error::{Error, Result};

pub const MIN_FIT_RECORDS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Front levels μ, each in (0, 1).
    pub levels: Vec<f64>,
    /// ε of the good/bad/tail split, in (0, 1/2).
    pub eps: f64,
    /// Values above this define the active window for the tail measure.
    pub window_floor: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            levels: vec![0.1],
            eps: 0.1,
            window_floor: 1e-8,
        }
    }
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::param("at least one front level is required"));
        }
        if let Some(mu) = self.levels.iter().find(|m| !(**m > 0.0 && **m < 1.0)) {
            return Err(Error::param(format!("front level must lie in (0,1), got {mu}")));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::param(format!("eps must lie in (0,1/2), got {}", self.eps)));
        }
        if !(self.window_floor >= 0.0) {
            return Err(Error::param("window_floor must be non-negative"));
        }
        Ok(())
    }
}

/// `P = ∫u`. With zero ghost nodes the trapezoid rule is `dx·Σu`.
pub fn mass(field: &Field) -> f64 {
    field.grid.dx * field.values.iter().sum::<f64>()
}

/// `V = ∫u(1-u)`, same quadrature as [`mass`].
pub fn bulk_burning(field: &Field) -> f64 {
    field.grid.dx * field.values.iter().map(|u| u * (1.0 - u)).sum::<f64>()
}

/// Outermost crossings of level `mu`, linearly interpolated. `None` if `max u < mu`.
pub fn front(field: &Field, mu: f64) -> Option<(f64, f64)> {
    let v = &field.values;
    let g = &field.grid;
    let first = v.iter().position(|&u| u >= mu)?;
    let last = v.iter().rposition(|&u| u >= mu)?;
    let cross = |inside: usize, outside: usize| {
        let (a, b) = (v[inside], v[outside]);
        let f = if a > b { (a - mu) / (a - b) } else { 0.0 };
        g.x(inside) + f * (g.x(outside) - g.x(inside))
    };
    let left = if first == 0 { g.x(0) } else { cross(first, first - 1) };
    let right = if last + 1 == v.len() { g.x(last) } else { cross(last, last + 1) };
    Some((left, right))
}

/// Measure of `{u > c}` (`strict`) or `{u ≥ c}` restricted to `[lo, hi]`.
fn superlevel_in(field: &Field, c: f64, strict: bool, lo: f64, hi: f64) -> f64 {
    let g = &field.grid;
    let v = &field.values;
    let above = |u: f64| u > c || (!strict && u == c);
    let clip = |a: f64, b: f64| (b.min(hi) - a.max(lo)).max(0.0);
    let half = 0.5 * g.dx;
    let mut total = 0.0;
    if above(v[0]) {
        total += clip(g.x(0) - half, g.x(0));
    }
    if above(v[g.n - 1]) {
        total += clip(g.x(g.n - 1), g.x(g.n - 1) + half);
    }
    for i in 0..g.n - 1 {
        let (xa, xb) = (g.x(i), g.x(i + 1));
        if xb <= lo || xa >= hi {
            continue;
        }
        let (a, b) = (v[i], v[i + 1]);
        if a == b {
            if above(a) {
                total += clip(xa, xb);
            }
            continue;
        }
        let xc = xa + (c - a) / (b - a) * (xb - xa);
        match (above(a), above(b)) {
            (true, true) => total += clip(xa, xb),
            (true, false) => total += clip(xa, xc.clamp(xa, xb)),
            (false, true) => total += clip(xc.clamp(xa, xb), xb),
            (false, false) => {}
        }
    }
    total
}

/// Measure of `{u ≥ mu}` over the whole grid.
pub fn superlevel_measure(field: &Field, mu: f64) -> f64 {
    let g = &field.grid;
    superlevel_in(field, mu, false, g.left_edge(), g.right_edge())
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LevelMeasures {
    /// `|{u > 1-ε}|`
    pub good: f64,
    /// `|{ε < u < 1-ε}|`
    pub bad: f64,
    /// `|{u ≤ ε}|` inside the active window.
    pub tail: f64,
}

/// Smallest interval `[lo, hi]` of cells holding every node with `u > floor`.
pub fn active_window(field: &Field, floor: f64) -> Option<(f64, f64)> {
    let g = &field.grid;
    let first = field.values.iter().position(|&u| u > floor)?;
    let last = field.values.iter().rposition(|&u| u > floor)?;
    Some((g.x(first) - 0.5 * g.dx, g.x(last) + 0.5 * g.dx))
}

pub fn level_measures(field: &Field, eps: f64, window_floor: f64) -> Result<LevelMeasures> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::param(format!("eps must lie in (0,1/2), got {eps}")));
    }
    let g = &field.grid;
    let (lo, hi) = (g.left_edge(), g.right_edge());
    let good = superlevel_in(field, 1.0 - eps, true, lo, hi);
    let bad = (superlevel_in(field, eps, true, lo, hi) - superlevel_in(field, 1.0 - eps, false, lo, hi)).max(0.0);
    let tail = match active_window(field, window_floor) {
        Some((wl, wr)) => ((wr - wl) - superlevel_in(field, eps, true, wl, wr)).max(0.0),
        None => 0.0,
    };
    Ok(LevelMeasures { good, bad, tail })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub t: f64,
    pub mass: f64,
    pub burning: f64,
    pub u_max: f64,
    /// One entry per configured level.
    pub fronts: Vec<Option<(f64, f64)>>,
    pub levels: LevelMeasures,
    pub domain_width: f64,
    /// `|{u ≥ μ}|` per configured level.
    pub superlevel: Vec<f64>,
    /// Largest `|ΔP - dt·V| / (dt·(dt + dx²))` over the steps since the previous record.
    pub mass_residual: f64,
}

impl Record {
    pub fn from_field(field: &Field, cfg: &DiagnosticsConfig) -> Result<Record> {
        Ok(Record {
            t: field.time,
            mass: mass(field),
            burning: bulk_burning(field),
            u_max: field.max(),
            fronts: cfg.levels.iter().map(|&mu| front(field, mu)).collect(),
            levels: level_measures(field, cfg.eps, cfg.window_floor)?,
            domain_width: field.grid.width(),
            superlevel: cfg.levels.iter().map(|&mu| superlevel_measure(field, mu)).collect(),
            mass_residual: 0.0,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub config: DiagnosticsConfig,
    pub records: Vec<Record>,
}

impl TimeSeries {
    pub fn new(config: DiagnosticsConfig) -> Result<Self> {
        config.validate()?;
        Ok(TimeSeries {
            config,
            records: Vec::new(),
        })
    }

    pub fn push(&mut self, rec: Record) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(rec.t > last.t) {
                return Err(Error::Data(format!(
                    "record times must increase: {} after {}",
                    rec.t, last.t
                )));
            }
        }
        if rec.fronts.len() != self.config.levels.len() {
            return Err(Error::Data("record does not match the configured levels".into()));
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn record(&mut self, field: &Field) -> Result<()> {
        let rec = Record::from_field(field, &self.config)?;
        self.push(rec)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    pub fn level_index(&self, mu: f64) -> Option<usize> {
        self.config.levels.iter().position(|&m| (m - mu).abs() < 1e-12)
    }

    pub fn csv_header(&self) -> String {
        let mut h = String::from("t,P,V,u_max");
        for mu in &self.config.levels {
            let _ = write!(h, ",front_left_{mu},front_right_{mu}");
        }
        h.push_str(",G_eps,B_eps,T_eps,domain_width");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{},{},{}", r.t, r.mass, r.burning, r.u_max);
            for f in &r.fronts {
                match f {
                    Some((l, rt)) => {
                        let _ = write!(out, ",{l},{rt}");
                    }
                    None => out.push_str(",,"),
                }
            }
            let _ = writeln!(
                out,
                ",{},{},{},{}",
                r.levels.good, r.levels.bad, r.levels.tail, r.domain_width
            );
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `x = c t + b`
    Linear,
    /// `x = c t - (3/2) log t + b`
    LogCorrected,
    /// `P = C t^q`
    Power,
    /// `P = C e^{r t}`
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Observable {
    FrontRight { level: f64 },
    FrontLeft { level: f64 },
    Mass,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub model: FitModel,
    pub coefficient: f64,
    pub intercept: f64,
    /// For the front models this is measured on `x` itself, so linear and
    /// log-corrected fits are comparable.
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

fn observe(series: &TimeSeries, obs: Observable) -> Result<Vec<(f64, f64)>> {
    match obs {
        Observable::Mass => Ok(series.records.iter().map(|r| (r.t, r.mass)).collect()),
        Observable::FrontRight { level } | Observable::FrontLeft { level } => {
            let k = series
                .level_index(level)
                .ok_or_else(|| Error::Data(format!("front level {level} was not recorded")))?;
            let right = matches!(obs, Observable::FrontRight { .. });
            Ok(series
                .records
                .iter()
                .filter_map(|r| r.fronts[k].map(|(l, rt)| (r.t, if right { rt } else { l })))
                .collect())
        }
    }
}

/// Fit over the last `window_fraction` of the recorded time span.
pub fn fit_rate(series: &TimeSeries, obs: Observable, model: FitModel, window_fraction: f64) -> Result<RateFit> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::param(format!("window fraction must lie in (0,1], got {window_fraction}")));
    }
    let (t0, t1) = match (series.records.first(), series.records.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(Error::Data("empty time series".into())),
    };
    fit_rate_window(series, obs, model, t1 - window_fraction * (t1 - t0), t1)
}

/// Fit over records with `t_lo ≤ t ≤ t_hi`.
pub fn fit_rate_window(series: &TimeSeries, obs: Observable, model: FitModel, t_lo: f64, t_hi: f64) -> Result<RateFit> {
    let data: Vec<(f64, f64)> = observe(series, obs)?
        .into_iter()
        .filter(|(t, _)| *t >= t_lo - 1e-12 && *t <= t_hi + 1e-12)
        .collect();
    fit_points(&data, model, (t_lo, t_hi))
}

/// Least squares in the model's linearising coordinates.
pub fn fit_points(data: &[(f64, f64)], model: FitModel, window: (f64, f64)) -> Result<RateFit> {
    if data.len() < MIN_FIT_RECORDS {
        return Err(Error::Data(format!(
            "{} records in the fit window, need at least {MIN_FIT_RECORDS}",
            data.len()
        )));
    }
    let needs_pos_t = matches!(model, FitModel::LogCorrected | FitModel::Power);
    let needs_pos_y = matches!(model, FitModel::Power | FitModel::Exponential);
    if needs_pos_t && data.iter().any(|(t, _)| *t <= 0.0) {
        return Err(Error::Data(format!("{model:?} fit needs t > 0")));
    }
    if needs_pos_y && data.iter().any(|(_, y)| *y <= 0.0) {
        return Err(Error::Data(format!("{model:?} fit needs positive values")));
    }
    let pts: Vec<(f64, f64)> = data
        .iter()
        .map(|&(t, y)| match model {
            FitModel::Linear => (t, y),
            FitModel::LogCorrected => (t, y + 1.5 * t.ln()),
            FitModel::Power => (t.ln(), y.ln()),
            FitModel::Exponential => (t, y.ln()),
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Data("fit window spans a single abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let ss_tot: f64 = match model {
        FitModel::Linear | FitModel::LogCorrected => {
            let m = data.iter().map(|p| p.1).sum::<f64>() / n;
            data.iter().map(|p| (p.1 - m).powi(2)).sum()
        }
        _ => pts.iter().map(|p| (p.1 - my).powi(2)).sum(),
    };
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateFit {
        model,
        coefficient: slope,
        intercept,
        r_squared,
        window,
        points: pts.len(),
    })
}

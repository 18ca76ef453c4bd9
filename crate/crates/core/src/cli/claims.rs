//! Registry of checks evaluated after a scenario run.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bounds::{linf_bound, plateau, BoundReport};
use crate::convolve::Field;
use crate::diagnostics::{fit_rate, fit_points, FitModel, Observable, TimeSeries};
use crate::kernel::KernelFacts;
use crate::solver::{Reaction, SimConfig};

// Speed window for the classical front, measured with the linear fit.
pub const SPEED_TWO: (f64, f64) = (1.85, 2.05);
// Slack on both ends of the speed bracket `[2, c*]`.
pub const SPEED_SLACK: f64 = 0.1;
// Absolute slack over the a-priori sup bound.
pub const LINF_SLACK: f64 = 0.02;
// Largest `|ΔP - dt·V| / (dt(dt + dx²))` accepted on any step.
pub const MASS_IDENTITY_C: f64 = 10.0;
// Exponential mass growth: minimum r² and largest rate (the upper growth rate is 1).
pub const EXP_MASS_R2: f64 = 0.99;
pub const EXP_MASS_RATE_MAX: f64 = 1.02;
// Power-law mass growth: window on the log-log slope around `1/α`.
pub const POWER_SLOPE_BELOW: f64 = 0.3;
pub const POWER_SLOPE_ABOVE: f64 = 0.4;
// Plateau bracket slack for the time-averaged maximum.
pub const PLATEAU_SLACK: f64 = 0.05;
// `sup |u - 1|` on `|x| < CONVERGE_SPEED·t` at the final time.
pub const CONVERGE_SPEED: f64 = 1.5;
pub const CONVERGE_TOL: f64 = 0.05;
// Level-set growth: lower slack on the exponent `1/α`.
pub const LEVEL_SLOPE_BELOW: f64 = 0.3;
/// Fraction of the run used by the late-time fits.
pub const FIT_WINDOW: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimId {
    SpeedTwo,
    SpeedBracket,
    LogDelay,
    Linf,
    MassIdentity,
    ExpMass,
    PowerMass,
    Plateau,
    ConvergeOne,
    LevelGrowth,
}

impl ClaimId {
    pub const ALL: [ClaimId; 10] = [
        ClaimId::SpeedTwo,
        ClaimId::SpeedBracket,
        ClaimId::LogDelay,
        ClaimId::Linf,
        ClaimId::MassIdentity,
        ClaimId::ExpMass,
        ClaimId::PowerMass,
        ClaimId::Plateau,
        ClaimId::ConvergeOne,
        ClaimId::LevelGrowth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClaimId::SpeedTwo => "speed-two",
            ClaimId::SpeedBracket => "speed-bracket",
            ClaimId::LogDelay => "log-delay",
            ClaimId::Linf => "linf",
            ClaimId::MassIdentity => "mass-identity",
            ClaimId::ExpMass => "exp-mass",
            ClaimId::PowerMass => "power-mass",
            ClaimId::Plateau => "plateau",
            ClaimId::ConvergeOne => "converge-one",
            ClaimId::LevelGrowth => "level-growth",
        }
    }
}

impl fmt::Display for ClaimId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The claim's hypotheses do not hold for this scenario.
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClaimResult {
    pub id: ClaimId,
    pub verdict: Verdict,
    pub detail: String,
}

impl ClaimResult {
    fn new(id: ClaimId, pass: bool, detail: String) -> Self {
        ClaimResult {
            id,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            detail,
        }
    }

    fn na(id: ClaimId, detail: impl Into<String>) -> Self {
        ClaimResult {
            id,
            verdict: Verdict::NotApplicable,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        let v = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "N/A",
        };
        format!("{v} {} {}", self.id, self.detail)
    }
}

pub struct ClaimContext<'a> {
    pub facts: &'a KernelFacts,
    pub series: &'a TimeSeries,
    pub field: &'a Field,
    pub sim: &'a SimConfig,
    pub bounds: Option<&'a BoundReport>,
}

impl ClaimContext<'_> {
    fn level(&self) -> f64 {
        self.series.config.levels[0]
    }

    fn t_end(&self) -> f64 {
        self.series.last().map_or(0.0, |r| r.t)
    }
}

pub fn evaluate(id: ClaimId, cx: &ClaimContext<'_>) -> ClaimResult {
    let front = Observable::FrontRight { level: cx.level() };
    match id {
        ClaimId::SpeedTwo => match fit_rate(cx.series, front, FitModel::Linear, FIT_WINDOW) {
            Ok(f) => ClaimResult::new(
                id,
                f.coefficient >= SPEED_TWO.0 && f.coefficient <= SPEED_TWO.1,
                format!("c = {:.4} in [{}, {}]", f.coefficient, SPEED_TWO.0, SPEED_TWO.1),
            ),
            Err(e) => ClaimResult::new(id, false, e.to_string()),
        },
        ClaimId::SpeedBracket => {
            let Some(b) = cx.bounds else {
                return ClaimResult::na(id, "no explicit speed bound for this kernel");
            };
            match fit_rate(cx.series, front, FitModel::Linear, FIT_WINDOW) {
                Ok(f) => {
                    let (lo, hi) = (2.0 - SPEED_SLACK, b.cstar + SPEED_SLACK);
                    ClaimResult::new(
                        id,
                        f.coefficient >= lo && f.coefficient <= hi,
                        format!("c = {:.4} in [{lo}, {hi:.4}]", f.coefficient),
                    )
                }
                Err(e) => ClaimResult::new(id, false, e.to_string()),
            }
        }
        ClaimId::LogDelay => {
            let lin = fit_rate(cx.series, front, FitModel::Linear, FIT_WINDOW);
            let log = fit_rate(cx.series, front, FitModel::LogCorrected, FIT_WINDOW);
            match (lin, log) {
                (Ok(a), Ok(b)) => ClaimResult::new(
                    id,
                    b.r_squared > a.r_squared,
                    format!(
                        "r2 log-corrected = {:.8} vs linear = {:.8}; c = {:.4}",
                        b.r_squared, a.r_squared, b.coefficient
                    ),
                ),
                (Err(e), _) | (_, Err(e)) => ClaimResult::new(id, false, e.to_string()),
            }
        }
        ClaimId::Linf => {
            let bound = linf_bound(cx.facts.jump);
            if !bound.is_finite() {
                return ClaimResult::na(id, "no a-priori bound for J >= 1");
            }
            let m = cx.series.records.iter().map(|r| r.u_max).fold(0.0, f64::max);
            ClaimResult::new(id, m <= bound + LINF_SLACK, format!("max u = {m:.6} <= {:.4}", bound + LINF_SLACK))
        }
        ClaimId::MassIdentity => {
            if cx.sim.reaction != Reaction::Logistic {
                return ClaimResult::na(id, "needs the logistic reaction");
            }
            let m = cx.series.records.iter().map(|r| r.mass_residual).fold(0.0, f64::max);
            ClaimResult::new(id, m <= MASS_IDENTITY_C, format!("max ratio = {m:.3e} <= {MASS_IDENTITY_C}"))
        }
        ClaimId::ExpMass => {
            if cx.facts.k_inf <= 0.0 {
                return ClaimResult::na(id, "needs K_inf > 0");
            }
            match fit_rate(cx.series, Observable::Mass, FitModel::Exponential, FIT_WINDOW) {
                Ok(f) => ClaimResult::new(
                    id,
                    f.r_squared > EXP_MASS_R2 && f.coefficient > 0.0 && f.coefficient <= EXP_MASS_RATE_MAX,
                    format!("r = {:.4} in (0, {EXP_MASS_RATE_MAX}], r2 = {:.6}", f.coefficient, f.r_squared),
                ),
                Err(e) => ClaimResult::new(id, false, e.to_string()),
            }
        }
        ClaimId::PowerMass => {
            let Some(alpha) = cx.facts.power_alpha else {
                return ClaimResult::na(id, "needs a power-law kernel");
            };
            let t1 = cx.t_end();
            match crate::diagnostics::fit_rate_window(cx.series, Observable::Mass, FitModel::Power, t1 / 4.0, t1) {
                Ok(f) => {
                    let (lo, hi) = (1.0 / alpha - POWER_SLOPE_BELOW, 1.0 / alpha + POWER_SLOPE_ABOVE);
                    ClaimResult::new(
                        id,
                        f.coefficient >= lo && f.coefficient <= hi,
                        format!("q = {:.4} in [{lo}, {hi}] on [{}, {t1}]", f.coefficient, t1 / 4.0),
                    )
                }
                Err(e) => ClaimResult::new(id, false, e.to_string()),
            }
        }
        ClaimId::Plateau => {
            let (upper, lower) = plateau(cx.facts);
            let t1 = cx.t_end();
            let t0 = cx.series.records.first().map_or(0.0, |r| r.t);
            let late: Vec<f64> = cx
                .series
                .records
                .iter()
                .filter(|r| r.t >= t1 - FIT_WINDOW * (t1 - t0))
                .map(|r| r.u_max)
                .collect();
            if late.is_empty() {
                return ClaimResult::new(id, false, "no records".into());
            }
            let avg = late.iter().sum::<f64>() / late.len() as f64;
            let (lo, hi) = (lower - PLATEAU_SLACK, upper + PLATEAU_SLACK);
            ClaimResult::new(id, avg >= lo && avg <= hi, format!("mean u_max = {avg:.4} in [{lo:.4}, {hi:.4}]"))
        }
        ClaimId::ConvergeOne => {
            let f = cx.field;
            let reach = CONVERGE_SPEED * f.time;
            let sup = (0..f.grid.n)
                .filter(|&i| f.grid.x(i).abs() < reach)
                .map(|i| (f.values[i] - 1.0).abs())
                .fold(0.0, f64::max);
            ClaimResult::new(id, sup < CONVERGE_TOL, format!("sup |u-1| on |x| < {reach:.1} = {sup:.4e} < {CONVERGE_TOL}"))
        }
        ClaimId::LevelGrowth => {
            let Some(alpha) = cx.facts.power_alpha else {
                return ClaimResult::na(id, "needs a power-law kernel");
            };
            let pts = time_averaged_superlevel(cx.series);
            let t1 = cx.t_end();
            let late: Vec<(f64, f64)> = pts.into_iter().filter(|(t, _)| *t >= t1 * (1.0 - FIT_WINDOW)).collect();
            match fit_points(&late, FitModel::Power, (t1 * (1.0 - FIT_WINDOW), t1)) {
                Ok(f) => {
                    let lo = 1.0 / alpha - LEVEL_SLOPE_BELOW;
                    ClaimResult::new(id, f.coefficient >= lo, format!("exponent = {:.4} >= {lo}", f.coefficient))
                }
                Err(e) => ClaimResult::new(id, false, e.to_string()),
            }
        }
    }
}

/// `(t, (1/t) ∫_0^t |{u(s) ≥ μ}| ds)` for the first level, trapezoid in time.
pub fn time_averaged_superlevel(series: &TimeSeries) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut acc = 0.0;
    for w in series.records.windows(2) {
        acc += 0.5 * (w[1].t - w[0].t) * (w[0].superlevel[0] + w[1].superlevel[0]);
        if w[1].t > 0.0 {
            out.push((w[1].t, acc / w[1].t));
        }
    }
    out
}

pub fn report(results: &[ClaimResult]) -> String {
    let mut s = String::new();
    for r in results {
        s.push_str(&r.line());
        s.push('\n');
    }
    s
}

/// Exit status contribution: any `Fail` fails the run.
pub fn all_pass(results: &[ClaimResult]) -> bool {
    results.iter().all(|r| r.verdict != Verdict::Fail)
}

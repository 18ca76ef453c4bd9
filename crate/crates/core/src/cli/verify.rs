//! Certification suites comparing closed-form bounds with analytic or
//! simulated solutions.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{fp_tail, gamma_envelope, hill_lower, hill_upper, phi_max, DriftNorms, HalfLineProfile};
use crate::convolve::{conv, conv_dx, Field, Grid};
use crate::diagnostics::{fit_points, DiagnosticsConfig, FitModel};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, Monotonicity, TailExtension};
use crate::solver::{run_drift_diffusion, DriftSpec, Reaction, SimConfig, Simulation, U0Spec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    GammaEnvelope,
    Hill,
    FpTail,
    ConvBounds,
    PhiMax,
}

impl std::str::FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma-envelope" => Ok(Target::GammaEnvelope),
            "hill" => Ok(Target::Hill),
            "fp-tail" => Ok(Target::FpTail),
            "conv-bounds" => Ok(Target::ConvBounds),
            "phi-max" => Ok(Target::PhiMax),
            _ => Err(Error::Config(format!(
                "unknown verify target '{s}' (gamma-envelope, hill, fp-tail, conv-bounds, phi-max)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub label: String,
    /// Non-negative when the case passes.
    pub margin: f64,
    pub pass: bool,
    pub detail: String,
}

impl Case {
    fn new(label: impl Into<String>, margin: f64, detail: impl Into<String>) -> Self {
        Case {
            label: label.into(),
            margin,
            pass: margin >= 0.0,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub target: Target,
    pub cases: Vec<Case>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        !self.cases.is_empty() && self.cases.iter().all(|c| c.pass)
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        for c in &self.cases {
            let _ = writeln!(
                s,
                "{} {} margin={:.6e} {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.label,
                c.margin,
                c.detail
            );
        }
        let _ = writeln!(s, "{}", if self.pass() { "OVERALL PASS" } else { "OVERALL FAIL" });
        s
    }
}

pub fn run_target(target: Target, seed: u64) -> Result<VerifyReport> {
    let cases = match target {
        Target::Hill => hill(seed, 1000),
        Target::FpTail => fp_tail_suite(0.05)?,
        Target::GammaEnvelope => gamma_suite(0.02, 1e-3)?,
        Target::ConvBounds => conv_bounds(seed, 200)?,
        Target::PhiMax => phi_max_suite(seed, 20, 10_000)?,
    };
    Ok(VerifyReport { target, cases })
}

/// Constant drift `A`: `Γ = e^{-(x-Aτ)²/4τ}/√(4πτ)` against the two-sided bounds,
/// compared in log space at `points` random `(τ, x)` where both bounds apply.
pub fn hill(seed: u64, points: usize) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for a in [0.25, 1.0] {
        let mut worst = f64::INFINITY;
        let mut violations = 0;
        let mut n = 0;
        while n < points {
            let tau: f64 = rng.gen_range(0.1..4.0);
            let x: f64 = rng.gen_range(-10.0..10.0);
            let r = x.abs();
            let (Some(up), Some(lo)) = (hill_upper(a, 1, tau, r), hill_lower(a, 1, tau, r)) else {
                continue;
            };
            n += 1;
            let log_g = -(x - a * tau).powi(2) / (4.0 * tau) - 0.5 * (4.0 * PI * tau).ln();
            let m = (up.ln() - log_g).min(log_g - lo.ln());
            if m < 0.0 {
                violations += 1;
            }
            worst = worst.min(m);
        }
        cases.push(Case::new(
            format!("hill A={a}"),
            worst,
            format!("{points} points, {violations} violations (log-ratio margin)"),
        ));
    }
    cases
}

/// Drift-diffusion from `1_{[-1,1]}` with `‖v‖∞ = 0.5` to `T = 4`, compared with
/// the tail bound at every node with `|x| ≥ 4`.
pub fn fp_tail_suite(dx: f64) -> Result<Vec<Case>> {
    let (a_cap, t_final, radius) = (0.5, 4.0, 1.0);
    let cfg = SimConfig {
        dx,
        dt_max: 0.01,
        t_end: t_final,
        reaction: Reaction::None,
        record_every: t_final,
        ..SimConfig::default()
    };
    let u0 = U0Spec::Indicator { a: radius, height: 1.0 };
    let mut cases = Vec::new();
    for drift in [
        DriftSpec::Constant { speed: a_cap },
        DriftSpec::Sinusoid { amplitude: a_cap, wavenumber: 1.0 },
    ] {
        let out = run_drift_diffusion(&drift, &u0, &cfg, &DiagnosticsConfig::default()).map_err(|f| f.error)?;
        let f = out.field();
        let mut worst = f64::INFINITY;
        let mut checked = 0;
        let mut violations = 0;
        for i in 0..f.grid.n {
            let x = f.grid.x(i);
            if let Some(b) = fp_tail(a_cap, t_final, radius, x) {
                checked += 1;
                let u = f.values[i];
                let m = if u > 0.0 { (b / u).ln() } else { b };
                if m < 0.0 {
                    violations += 1;
                }
                worst = worst.min(m);
            }
        }
        cases.push(Case::new(
            format!("fp-tail {drift:?}"),
            if checked == 0 { -1.0 } else { worst },
            format!("{checked} nodes, {violations} violations (log-ratio margin)"),
        ));
    }
    Ok(cases)
}

/// `q(t) = sup_x [log Γ(t,x) + ½ log t - E(t,x)]` for the potential-gradient
/// drift with norms `(0.5, 0.25, 0.125)` and `δ = 0.1`, at nodes with `Γ > 1e-30`.
/// Returns `(t, q)` for `t = 0.5, 0.75, …, 4`.
pub fn gamma_profile(dx: f64, dt: f64) -> Result<Vec<(f64, f64)>> {
    let drift = DriftSpec::PotentialGradient { a0: 0.5, a1: 0.25 };
    let (a0, a1, a2) = drift.potential_norms().unwrap_or_default();
    let norms = DriftNorms::new(a0, a1, a2)?;
    let delta = 0.1;
    let cfg = SimConfig {
        dx,
        dt_max: dt,
        t_end: 4.0,
        reaction: Reaction::None,
        record_every: 0.25,
        ..SimConfig::default()
    };
    let u0 = U0Spec::Gaussian { width: 3.0 * dx, mass: 1.0 };
    let mut sim = Simulation::with_drift(&drift, &u0, &cfg, &DiagnosticsConfig::default())?;
    let mut out = Vec::new();
    for k in 2..=16 {
        let t = 0.25 * k as f64;
        sim.advance_to(t)?;
        let f = &sim.state().field;
        let mut q = f64::NEG_INFINITY;
        for i in 0..f.grid.n {
            let g = f.values[i];
            if g > 1e-30 {
                let e = gamma_envelope(&norms, delta, t, f.grid.x(i))?;
                q = q.max(g.ln() + 0.5 * t.ln() - e.exponent);
            }
        }
        out.push((t, q));
    }
    Ok(out)
}

pub const GAMMA_SLOPE_MAX: f64 = 0.01;

pub fn gamma_suite(dx: f64, dt: f64) -> Result<Vec<Case>> {
    let prof = gamma_profile(dx, dt)?;
    let bounded = prof.iter().all(|(_, q)| q.is_finite());
    let fit = fit_points(&prof, FitModel::Linear, (0.5, 4.0))?;
    let qmax = prof.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        Case::new("gamma sup finite", if bounded { 0.0 } else { -1.0 }, format!("max q = {qmax:.4}")),
        Case::new(
            "gamma sup slope",
            GAMMA_SLOPE_MAX - fit.coefficient,
            format!("slope = {:.5} <= {GAMMA_SLOPE_MAX}", fit.coefficient),
        ),
    ])
}

/// Families used by the convolution-bound suite.
pub fn conv_families() -> Result<Vec<(String, Kernel)>> {
    let tab: Vec<f64> = (0..=100).map(|j| -0.4 * (-(j as f64) * 0.05).exp()).collect();
    Ok(vec![
        ("zero".into(), Kernel::Zero),
        ("keller-segel".into(), Kernel::keller_segel(0.5, 1.0)?),
        ("compact-bump".into(), Kernel::compact_bump(-0.8, 2.0)?),
        ("power-law".into(), Kernel::power_law(1.0, 0.5, 1)?),
        ("step".into(), Kernel::step(0.25)?),
        (
            "tabulated".into(),
            Kernel::tabulated(tab, 0.05, Monotonicity::NonDecreasing, TailExtension::Zero)?,
        ),
    ])
}

/// Random smooth non-negative field: a sum of one to four Gaussian bumps.
pub fn random_bumps(rng: &mut ChaCha8Rng) -> Vec<(f64, f64, f64)> {
    let m = rng.gen_range(1..=4);
    (0..m)
        .map(|_| (rng.gen_range(0.1..1.0), rng.gen_range(-4.0..4.0), rng.gen_range(0.3..1.2)))
        .collect()
}

pub fn eval_bumps(b: &[(f64, f64, f64)], x: f64) -> f64 {
    b.iter().map(|(a, c, s)| a * (-(x - c).powi(2) / (2.0 * s * s)).exp()).sum()
}

const CONV_HALF: f64 = 12.0;

fn node_grid(dx: f64) -> Result<Grid> {
    let half = (CONV_HALF / dx).round() as usize;
    Grid::new(-(half as f64) * dx, dx, 2 * half + 1)
}

/// `max |a_i - b_{2i}|` for fields on grids with spacing `dx` and `dx/2`
/// that share the node at 0.
fn coarse_fine_gap(a: &Field, b: &Field) -> f64 {
    (0..a.grid.n).map(|i| (a.values[i] - b.values[2 * i]).abs()).fold(0.0, f64::max)
}

pub const CONV_REFINE_RATIO: f64 = 3.0;

/// For each family and `fields` random inputs: `max|K*u| ≤ ½‖K‖₁ sup u + err`
/// and `max|(K*u)_x| ≤ |J| sup u + err` at `dx = 0.04, 0.02`, with `err` the
/// Richardson estimate `(4/3)·max|c_dx - c_{dx/2}|`; then `err(0.04)/err(0.02) ≥ 3`.
pub fn conv_bounds(seed: u64, fields: usize) -> Result<Vec<Case>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dxs = [0.04, 0.02, 0.01];
    let grids: Vec<Grid> = dxs.iter().map(|&d| node_grid(d)).collect::<Result<_>>()?;
    let mut cases = Vec::new();
    for (name, k) in conv_families()? {
        let facts = k.facts();
        let inputs: Vec<Vec<(f64, f64, f64)>> = (0..fields).map(|_| random_bumps(&mut rng)).collect();
        let mut err = [[0.0f64; 2]; 2];
        let mut worst = [f64::INFINITY; 2];
        let mut results = Vec::with_capacity(fields);
        for b in &inputs {
            let us: Vec<Field> = grids.iter().map(|g| Field::from_fn(*g, 0.0, |x| eval_bumps(b, x))).collect();
            let cs: Vec<Field> = us.iter().map(|u| conv(&k, u)).collect::<Result<_>>()?;
            let ds: Vec<Field> = us.iter().map(|u| conv_dx(&k, u)).collect::<Result<_>>()?;
            let fine = node_grid(dxs[2] / 8.0)?;
            let sup_u = (0..fine.n).map(|i| eval_bumps(b, fine.x(i))).fold(0.0, f64::max);
            for level in 0..2 {
                err[0][level] = err[0][level].max(4.0 / 3.0 * coarse_fine_gap(&cs[level], &cs[level + 1]));
                err[1][level] = err[1][level].max(4.0 / 3.0 * coarse_fine_gap(&ds[level], &ds[level + 1]));
            }
            results.push((sup_u, cs[0].max_abs(), cs[1].max_abs(), ds[0].max_abs(), ds[1].max_abs()));
        }
        for (sup_u, c0, c1, d0, d1) in results {
            if facts.l1_norm.is_finite() {
                let b = 0.5 * facts.l1_norm * sup_u;
                worst[0] = worst[0].min((b + err[0][0] - c0).min(b + err[0][1] - c1));
            }
            let b = facts.jump.abs() * sup_u;
            worst[1] = worst[1].min((b + err[1][0] - d0).min(b + err[1][1] - d1));
        }
        if facts.l1_norm.is_finite() {
            cases.push(Case::new(format!("{name} |K*u|"), worst[0], format!("err = {:.3e}, {:.3e}", err[0][0], err[0][1])));
        }
        cases.push(Case::new(format!("{name} |(K*u)_x|"), worst[1], format!("err = {:.3e}, {:.3e}", err[1][0], err[1][1])));
        for (which, e) in [("K*u", err[0]), ("(K*u)_x", err[1])] {
            if which == "K*u" && !facts.l1_norm.is_finite() {
                continue;
            }
            if e[0] == 0.0 && e[1] == 0.0 {
                continue;
            }
            let ratio = if e[1] > 0.0 { e[0] / e[1] } else { f64::INFINITY };
            cases.push(Case::new(
                format!("{name} {which} refinement"),
                ratio - CONV_REFINE_RATIO,
                format!("err(0.04)/err(0.02) = {ratio:.3}"),
            ));
        }
    }
    Ok(cases)
}

/// Random non-increasing, non-negative profile on a grid of spacing `h`.
pub fn random_profile(rng: &mut ChaCha8Rng, h: f64) -> Result<HalfLineProfile> {
    let len = rng.gen_range(50..400);
    let mut v = Vec::with_capacity(len);
    let mut cur: f64 = rng.gen_range(0.2..2.0);
    for _ in 0..len {
        v.push(cur.max(0.0));
        if rng.gen_bool(0.7) {
            cur -= rng.gen_range(0.0..3.0) * cur * h;
        }
        if rng.gen_bool(0.01) {
            cur *= 0.5;
        }
    }
    HalfLineProfile::new(v, h)
}

/// `∫ φ w` for `w` piecewise constant on the cells `[j h, (j+1) h]`.
pub fn pairing(phi: &HalfLineProfile, w: &[f64]) -> f64 {
    let h = phi.spacing;
    w.iter()
        .enumerate()
        .map(|(j, wj)| wj * 0.5 * h * (phi.eval(j as f64 * h) + phi.eval((j + 1) as f64 * h)))
        .sum()
}

/// Random admissible `w` (`0 ≤ w ≤ 2`, `∫w ≤ M`) on `cells` cells of width `h`.
pub fn random_admissible(rng: &mut ChaCha8Rng, cells: usize, h: f64, mass: f64) -> Vec<f64> {
    let mut w: Vec<f64> = match rng.gen_range(0..3) {
        0 => (0..cells).map(|_| rng.gen_range(0.0..2.0)).collect(),
        1 => (0..cells).map(|_| if rng.gen_bool(0.3) { 2.0 } else { 0.0 }).collect(),
        _ => {
            let start = rng.gen_range(0..cells);
            let len = ((mass / (2.0 * h)).ceil() as usize).max(1);
            (0..cells).map(|j| if j >= start && j < start + len { 2.0 } else { 0.0 }).collect()
        }
    };
    let total: f64 = w.iter().sum::<f64>() * h;
    if total > mass {
        let s = mass / total;
        w.iter_mut().for_each(|x| *x *= s);
    }
    w
}

pub fn phi_max_suite(seed: u64, profiles: usize, samples: usize) -> Result<Vec<Case>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 0.01;
    let mut brute = f64::INFINITY;
    let mut extremal: f64 = 0.0;
    for _ in 0..profiles {
        let phi = random_profile(&mut rng, h)?;
        let support = (phi.values.len() - 1) as f64 * h;
        let mass = rng.gen_range(0.05..2.0 * support);
        let closed = phi_max(&phi, mass)?;
        let cells = phi.values.len() + 20;
        for _ in 0..samples {
            let w = random_admissible(&mut rng, cells, h, mass);
            brute = brute.min(closed - pairing(&phi, &w) + 1e-12);
        }
        // Extremal w = 2·1_{[0, M/2]}, midpoint rule on a fine grid.
        let n = 1_000_000;
        let step = 0.5 * mass / n as f64;
        let ext: f64 = (0..n).map(|i| 2.0 * phi.eval((i as f64 + 0.5) * step)).sum::<f64>() * step;
        extremal = extremal.max((ext - closed).abs());
    }
    Ok(vec![
        Case::new("phi-max brute force", brute, format!("{profiles} profiles x {samples} samples")),
        Case::new("phi-max extremal", 1e-6 - extremal, format!("|extremal - closed form| = {extremal:.3e}")),
    ])
}

//! Time integration of `u_t + [(K*u) u]_x = u_xx + f(u)` and of the linear
//! drift-diffusion problem `u_t + (v u)_x = u_xx` on a domain that grows as the
//! solution spreads.
//!
//! One step: velocity from `uⁿ`, explicit advection and reaction, implicit
//! diffusion with homogeneous Dirichlet data. Advection is either first-order
//! upwind under a CFL limit, or its Lagrangian extension (`lagrangian-upwind`),
//! which moves piecewise-constant cells with their edge velocities, deposits
//! their mass back onto the grid, and only limits `dt` by the velocity
//! differences between neighbouring edges.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::convolve::{Convolver, Field, Grid};
use crate::diagnostics::{bulk_burning, mass, DiagnosticsConfig, TimeSeries};
use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Largest admissible `dt_max` for the explicit logistic term.
pub const DT_MAX_CAP: f64 = 0.5;
/// Values below this after a step are treated as a real undershoot, not round-off.
pub const NEGATIVE_TOL: f64 = -1e-13;
const VELOCITY_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    ImexBe,
    ImexCn,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reaction {
    #[default]
    Logistic,
    LinearGrowth,
    None,
}

impl Reaction {
    #[inline]
    pub fn rate(self, u: f64) -> f64 {
        match self {
            Reaction::Logistic => u * (1.0 - u),
            Reaction::LinearGrowth => u,
            Reaction::None => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Advection {
    #[default]
    Upwind,
    LagrangianUpwind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dx: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub cfl_advection: f64,
    pub edge_tol: f64,
    /// Length added on each side per extension; `None` means `20·dx`.
    pub extension_chunk: Option<f64>,
    pub scheme: Scheme,
    pub reaction: Reaction,
    pub advection: Advection,
    pub linf_cap: f64,
    pub record_every: f64,
    pub max_nodes: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dx: 0.1,
            dt_max: 0.05,
            t_end: 10.0,
            cfl_advection: 0.4,
            edge_tol: 1e-8,
            extension_chunk: None,
            scheme: Scheme::ImexBe,
            reaction: Reaction::Logistic,
            advection: Advection::Upwind,
            linf_cap: 1e3,
            record_every: 0.5,
            max_nodes: 2_000_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be positive, got {v}")))
            }
        };
        pos("dx", self.dx)?;
        pos("dt_max", self.dt_max)?;
        pos("edge_tol", self.edge_tol)?;
        pos("linf_cap", self.linf_cap)?;
        pos("record_every", self.record_every)?;
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::param(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.dt_max > DT_MAX_CAP {
            return Err(Error::param(format!("dt_max must not exceed {DT_MAX_CAP}, got {}", self.dt_max)));
        }
        if !(self.cfl_advection > 0.0 && self.cfl_advection <= 1.0) {
            return Err(Error::param(format!("cfl_advection must lie in (0,1], got {}", self.cfl_advection)));
        }
        if let Some(c) = self.extension_chunk {
            pos("extension_chunk", c)?;
        }
        Ok(())
    }

    pub fn chunk_cells(&self) -> usize {
        let len = self.extension_chunk.unwrap_or(20.0 * self.dx);
        ((len / self.dx).round() as usize).max(1)
    }
}

/// Initial datum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum U0Spec {
    /// `height · 1_{|x| < a}`
    Indicator {
        a: f64,
        #[serde(default = "one")]
        height: f64,
    },
    /// `amplitude · cos²(πx/(2a))` on `|x| < a`
    Bump { a: f64, amplitude: f64 },
    /// Nodal values with spacing `dx`, centred on the origin.
    Tabulated { values: Vec<f64> },
    /// Discrete Gaussian of the given standard deviation and total mass.
    Gaussian { width: f64, mass: f64 },
}

fn one() -> f64 {
    1.0
}

impl U0Spec {
    /// Build the field on `[-a - m, a + m]`, `m` = one extension chunk.
    pub fn build(&self, config: &SimConfig) -> Result<Field> {
        let dx = config.dx;
        let m = config.chunk_cells();
        match self {
            U0Spec::Indicator { a, height } => {
                positive("a", *a)?;
                let g = Grid::symmetric(a + m as f64 * dx, dx)?;
                let h = *height;
                Ok(Field::from_fn(g, 0.0, |x| if x.abs() < *a { h } else { 0.0 }))
            }
            U0Spec::Bump { a, amplitude } => {
                positive("a", *a)?;
                let g = Grid::symmetric(a + m as f64 * dx, dx)?;
                let (a, c) = (*a, *amplitude);
                Ok(Field::from_fn(g, 0.0, |x| {
                    if x.abs() < a {
                        c * (std::f64::consts::FRAC_PI_2 * x / a).cos().powi(2)
                    } else {
                        0.0
                    }
                }))
            }
            U0Spec::Tabulated { values } => {
                if values.is_empty() {
                    return Err(Error::param("tabulated u0 needs values"));
                }
                let l = values.len();
                let g = Grid::new(-((l - 1) as f64 / 2.0 + m as f64) * dx, dx, l + 2 * m)?;
                let mut v = vec![0.0; g.n];
                v[m..m + l].copy_from_slice(values);
                Field::new(g, v, 0.0)
            }
            U0Spec::Gaussian { width, mass: total } => {
                positive("width", *width)?;
                positive("mass", *total)?;
                let g = Grid::symmetric(8.0 * width + m as f64 * dx, dx)?;
                let w = *width;
                let mut f = Field::from_fn(g, 0.0, |x| (-0.5 * (x / w).powi(2)).exp());
                let s = total / mass(&f);
                f.values.iter_mut().for_each(|u| *u *= s);
                Ok(f)
            }
        }
    }

    /// Field satisfying `0 ≤ u0`, `0 < max u0 ≤ 1`.
    pub fn build_admissible(&self, config: &SimConfig) -> Result<Field> {
        let f = self.build(config)?;
        if f.min() < 0.0 {
            return Err(Error::Hypothesis("u0 must be non-negative".into()));
        }
        let m = f.max();
        if m <= 0.0 {
            return Err(Error::Hypothesis("u0 must not vanish identically".into()));
        }
        if m > 1.0 {
            return Err(Error::Hypothesis(format!("max u0 must be at most 1, got {m}")));
        }
        Ok(f)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be positive, got {v}")))
    }
}

/// Prescribed velocity for the linear problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftSpec {
    Constant { speed: f64 },
    /// `amplitude · sin(wavenumber · x)`
    Sinusoid { amplitude: f64, wavenumber: f64 },
    /// Velocity `v_x` of the potential `v = a0 sin(a1 x / a0)`, so that
    /// `‖v‖∞ = a0`, `‖v_x‖∞ = a1`, `‖v_xx‖∞ = a1²/a0`.
    PotentialGradient { a0: f64, a1: f64 },
}

impl DriftSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DriftSpec::Constant { speed } => speed.is_finite(),
            DriftSpec::Sinusoid { amplitude, wavenumber } => amplitude.is_finite() && wavenumber.is_finite(),
            DriftSpec::PotentialGradient { a0, a1 } => a0 > 0.0 && a0.is_finite() && a1 >= 0.0 && a1.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid drift {self:?}")))
        }
    }

    pub fn velocity(&self, x: f64) -> f64 {
        match *self {
            DriftSpec::Constant { speed } => speed,
            DriftSpec::Sinusoid { amplitude, wavenumber } => amplitude * (wavenumber * x).sin(),
            DriftSpec::PotentialGradient { a0, a1 } => a1 * (a1 * x / a0).cos(),
        }
    }

    /// `sup |velocity|`.
    pub fn sup(&self) -> f64 {
        match *self {
            DriftSpec::Constant { speed } => speed.abs(),
            DriftSpec::Sinusoid { amplitude, .. } => amplitude.abs(),
            DriftSpec::PotentialGradient { a1, .. } => a1,
        }
    }

    /// `(A0, A1, A2)` of the potential, for the potential-gradient drift.
    pub fn potential_norms(&self) -> Option<(f64, f64, f64)> {
        match *self {
            DriftSpec::PotentialGradient { a0, a1 } => Some((a0, a1, a1 * a1 / a0)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub field: Field,
    pub step_count: u64,
    pub last_dt: f64,
    pub extensions: u64,
}

enum Velocity {
    Kernel(Box<Convolver>),
    Drift(DriftSpec),
}

impl Velocity {
    fn eval(&mut self, field: &Field, out: &mut [f64]) -> Result<()> {
        match self {
            Velocity::Kernel(c) => c.apply(&field.values, out),
            Velocity::Drift(d) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = d.velocity(field.grid.x(i));
                }
                Ok(())
            }
        }
    }

    fn resize(&mut self, grid: &Grid) -> Result<()> {
        match self {
            Velocity::Kernel(c) => c.resize(grid),
            Velocity::Drift(_) => Ok(()),
        }
    }
}

/// Results of a completed run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub state: SimState,
    /// Negative values clamped after the implicit solve (Crank–Nicolson only).
    pub clamped: u64,
}

impl RunOutput {
    pub fn field(&self) -> &Field {
        &self.state.field
    }
}

/// A failed run with whatever was computed before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Option<RunOutput>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for RunFailure {}

impl From<Error> for Box<RunFailure> {
    fn from(error: Error) -> Self {
        Box::new(RunFailure { error, partial: None })
    }
}

pub type RunResult = std::result::Result<RunOutput, Box<RunFailure>>;

/// Stepper owning one solution.
pub struct Simulation {
    config: SimConfig,
    velocity: Velocity,
    state: SimState,
    series: TimeSeries,
    next_record: u64,
    clamped: u64,
    max_mass_residual: f64,
    v: Vec<f64>,
    scratch: Vec<f64>,
    lower_bound_check: bool,
}

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation")
            .field("config", &self.config)
            .field("time", &self.state.field.time)
            .field("nodes", &self.state.field.grid.n)
            .finish()
    }
}

impl Simulation {
    /// The nonlinear problem with kernel `kernel`; `u0` must satisfy `0 < max u0 ≤ 1`.
    pub fn new(kernel: &Kernel, u0: &U0Spec, config: &SimConfig, diag: &DiagnosticsConfig) -> Result<Self> {
        config.validate()?;
        kernel.validate()?;
        let field = u0.build_admissible(config)?;
        let conv = Convolver::new(kernel, &field.grid)?;
        Self::assemble(Velocity::Kernel(Box::new(conv)), field, config, diag)
    }

    /// The linear problem `u_t + (v u)_x = u_xx + f(u)` with prescribed `v`.
    pub fn with_drift(drift: &DriftSpec, u0: &U0Spec, config: &SimConfig, diag: &DiagnosticsConfig) -> Result<Self> {
        config.validate()?;
        drift.validate()?;
        let field = u0.build(config)?;
        if field.min() < 0.0 || field.max() <= 0.0 {
            return Err(Error::Hypothesis("u0 must be non-negative and non-zero".into()));
        }
        Self::assemble(Velocity::Drift(*drift), field, config, diag)
    }

    fn assemble(velocity: Velocity, field: Field, config: &SimConfig, diag: &DiagnosticsConfig) -> Result<Self> {
        let n = field.grid.n;
        if n > config.max_nodes {
            return Err(Error::Resource(format!("initial grid has {n} nodes, limit {}", config.max_nodes)));
        }
        let mut series = TimeSeries::new(diag.clone())?;
        series.record(&field)?;
        Ok(Simulation {
            config: config.clone(),
            velocity,
            state: SimState {
                field,
                step_count: 0,
                last_dt: config.dt_max,
                extensions: 0,
            },
            series,
            next_record: 1,
            clamped: 0,
            max_mass_residual: 0.0,
            v: vec![0.0; n],
            scratch: vec![0.0; n],
            lower_bound_check: true,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn series(&self) -> &TimeSeries {
        &self.series
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.state.field.time
    }

    fn next_record_time(&self) -> f64 {
        self.next_record as f64 * self.config.record_every
    }

    fn extend(&mut self, cells: usize) -> Result<()> {
        let g = self.state.field.grid;
        let new_n = g.n + 2 * cells;
        if new_n > self.config.max_nodes {
            return Err(Error::Resource(format!(
                "domain would grow to {new_n} nodes at t = {}, limit {}",
                self.time(),
                self.config.max_nodes
            )));
        }
        let grid = g.extended(cells);
        let mut values = vec![0.0; new_n];
        values[cells..cells + g.n].copy_from_slice(&self.state.field.values);
        self.state.field = Field {
            grid,
            values,
            time: self.state.field.time,
        };
        self.velocity.resize(&grid)?;
        self.v.resize(new_n, 0.0);
        self.scratch.resize(new_n, 0.0);
        self.state.extensions += 1;
        Ok(())
    }

    /// Interface velocities `w_i` at the left edge of cell `i`, `i = 0..=n`.
    fn interface_velocities(&self) -> Vec<f64> {
        let v = &self.v;
        let n = v.len();
        let mut w = Vec::with_capacity(n + 1);
        w.push(v[0]);
        w.extend(v.windows(2).map(|p| 0.5 * (p[0] + p[1])));
        w.push(v[n - 1]);
        w
    }

    fn choose_dt(&self, w: &[f64], t_target: f64) -> f64 {
        let dx = self.state.field.grid.dx;
        let limit = match self.config.advection {
            Advection::Upwind => w.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            Advection::LagrangianUpwind => w.windows(2).fold(0.0f64, |m, p| m.max(p[0] - p[1])),
        };
        let cfl = self.config.cfl_advection * dx / limit.max(VELOCITY_FLOOR);
        let t = self.time();
        let mut dt = self.config.dt_max.min(cfl).min(t_target - t).min(self.next_record_time() - t);
        if dt <= 0.0 {
            dt = t_target - t;
        }
        dt
    }

    /// Cells between the outermost value `≥ edge_tol` and the boundary, per side.
    fn margins(&self) -> (usize, usize) {
        let v = &self.state.field.values;
        let tol = self.config.edge_tol;
        let n = v.len();
        match (v.iter().position(|&u| u >= tol), v.iter().rposition(|&u| u >= tol)) {
            (Some(a), Some(b)) => (a, n - 1 - b),
            _ => (n, n),
        }
    }

    /// Cells needed between the outermost value `≥ edge_tol` and the boundary so
    /// that one step leaves the boundary values below `edge_tol`: transport reach
    /// plus the distance over which the implicit diffusion Green's function, which
    /// decays like `λ^k`, drops from `max u` to `edge_tol`.
    fn required_margin(&self, w: &[f64], dt: f64) -> usize {
        let dx = self.state.field.grid.dx;
        let theta = match self.config.scheme {
            Scheme::ImexBe => 1.0,
            Scheme::ImexCn => 0.5,
        };
        let r = theta * dt / (dx * dx);
        let lambda = ((1.0 + 2.0 * r) - (1.0 + 4.0 * r).sqrt()) / (2.0 * r);
        let umax = self.state.field.max().max(self.config.edge_tol);
        let diffusion = if lambda > 0.0 && lambda < 1.0 {
            ((self.config.edge_tol / umax).ln() / lambda.ln()).ceil().max(0.0) as usize
        } else {
            0
        };
        let reach = match self.config.advection {
            Advection::Upwind => 1,
            Advection::LagrangianUpwind => (w.iter().fold(0.0f64, |m, x| m.max(x.abs())) * dt / dx).ceil() as usize,
        };
        diffusion + reach + 2
    }

    /// Advance by one step not passing `t_target`. Returns the step size.
    pub fn step_towards(&mut self, t_target: f64) -> Result<f64> {
        let (w, dt) = loop {
            let field = self.state.field.clone();
            self.velocity.eval(&field, &mut self.v)?;
            if self.v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical {
                    time: self.time(),
                    reason: "non-finite advection velocity".into(),
                });
            }
            let w = self.interface_velocities();
            let dt = self.choose_dt(&w, t_target);
            let need = self.required_margin(&w, dt);
            let (l, r) = self.margins();
            if l.min(r) < need {
                let cells = self.config.chunk_cells().max(need - l.min(r));
                self.extend(cells)?;
                continue;
            }
            break (w, dt);
        };
        self.advance(&w, dt)?;
        Ok(dt)
    }

    fn advance(&mut self, w: &[f64], dt: f64) -> Result<()> {
        let grid = self.state.field.grid;
        let dx = grid.dx;
        let n = grid.n;
        let t = self.time();
        let reaction = self.config.reaction;
        let u = &self.state.field.values;
        let p_old = mass(&self.state.field);
        let r_int = match reaction {
            Reaction::Logistic => bulk_burning(&self.state.field),
            Reaction::LinearGrowth => p_old,
            Reaction::None => 0.0,
        };

        let mut star = std::mem::take(&mut self.scratch);
        match self.config.advection {
            Advection::Upwind => {
                let flux = |i: usize| {
                    let left = if i == 0 { 0.0 } else { u[i - 1] };
                    let right = if i == n { 0.0 } else { u[i] };
                    w[i].max(0.0) * left + w[i].min(0.0) * right
                };
                let mut f_left = flux(0);
                for i in 0..n {
                    let f_right = flux(i + 1);
                    star[i] = u[i] - dt / dx * (f_right - f_left) + dt * reaction.rate(u[i]);
                    f_left = f_right;
                }
            }
            Advection::LagrangianUpwind => {
                let reacted: Vec<f64> = u.iter().map(|&x| x + dt * reaction.rate(x)).collect();
                remap(&reacted, grid.left_edge(), dx, w, dt, &mut star);
            }
        }

        let theta = match self.config.scheme {
            Scheme::ImexBe => 1.0,
            Scheme::ImexCn => 0.5,
        };
        let r = theta * dt / (dx * dx);
        if self.config.scheme == Scheme::ImexCn {
            let src: Vec<f64> = match self.config.advection {
                Advection::Upwind => u.clone(),
                Advection::LagrangianUpwind => star.clone(),
            };
            for i in 0..n {
                let l = if i == 0 { 0.0 } else { src[i - 1] };
                let rr = if i + 1 == n { 0.0 } else { src[i + 1] };
                star[i] += r * (l - 2.0 * src[i] + rr);
            }
        }
        let mut new = solve_constant_tridiagonal(-r, 1.0 + 2.0 * r, &star);
        self.scratch = star;

        let t_new = t + dt;
        if let Some(i) = new.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numerical {
                time: t_new,
                reason: format!("non-finite value at x = {}", grid.x(i)),
            });
        }
        let (imax, umax) = new
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
        if umax > self.config.linf_cap {
            return Err(Error::BlowUp {
                time: t_new,
                x: grid.x(imax),
                value: umax,
                cap: self.config.linf_cap,
            });
        }
        for x in new.iter_mut() {
            if *x < 0.0 {
                if *x < NEGATIVE_TOL {
                    if self.config.scheme == Scheme::ImexBe && self.lower_bound_check {
                        return Err(Error::Numerical {
                            time: t_new,
                            reason: format!("undershoot {x:e} below round-off"),
                        });
                    }
                    self.clamped += 1;
                }
                *x = 0.0;
            }
        }

        self.state.field.values = new;
        self.state.field.time = if (t_new - self.next_record_time()).abs() <= 1e-9 * self.config.record_every {
            self.next_record_time()
        } else {
            t_new
        };
        self.state.step_count += 1;
        self.state.last_dt = dt;

        let p_new = mass(&self.state.field);
        let ratio = (p_new - p_old - dt * r_int).abs() / (dt * (dt + dx * dx));
        self.max_mass_residual = self.max_mass_residual.max(ratio);

        let (l, rgt) = self.margins();
        if l == 0 || rgt == 0 {
            self.extend(self.config.chunk_cells())?;
        }

        if self.state.field.time >= self.next_record_time() {
            let field = self.state.field.clone();
            let mut rec = crate::diagnostics::Record::from_field(&field, &self.series.config)?;
            rec.mass_residual = self.max_mass_residual;
            self.max_mass_residual = 0.0;
            self.series.push(rec)?;
            self.next_record += 1;
        }
        Ok(())
    }

    /// Step until `t_target`.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        while self.time() < t_target - 1e-12 * t_target.max(1.0) {
            self.step_towards(t_target)?;
        }
        Ok(())
    }

    pub fn into_output(self) -> RunOutput {
        RunOutput {
            series: self.series,
            state: self.state,
            clamped: self.clamped,
        }
    }

    /// Run to `config.t_end`; on failure the partial output is kept.
    pub fn run_to_end(mut self) -> RunResult {
        let t_end = self.config.t_end;
        match self.advance_to(t_end) {
            Ok(()) => Ok(self.into_output()),
            Err(error) => Err(Box::new(RunFailure {
                error,
                partial: Some(self.into_output()),
            })),
        }
    }

    /// Write the resumable state. Layout (little endian): magic `NLKPPCK1`,
    /// `x0 dx` as f64, `n` as u64, `time` f64, `step_count` u64, `last_dt` f64,
    /// `extensions` u64, `next_record` u64, then `n` f64 values.
    pub fn write_checkpoint(&self, mut w: impl Write) -> Result<()> {
        let f = &self.state.field;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&f.grid.x0.to_le_bytes())?;
        w.write_all(&f.grid.dx.to_le_bytes())?;
        w.write_all(&(f.grid.n as u64).to_le_bytes())?;
        w.write_all(&f.time.to_le_bytes())?;
        w.write_all(&self.state.step_count.to_le_bytes())?;
        w.write_all(&self.state.last_dt.to_le_bytes())?;
        w.write_all(&self.state.extensions.to_le_bytes())?;
        w.write_all(&self.next_record.to_le_bytes())?;
        for v in &f.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Rebuild a kernel simulation from a checkpoint. The time series restarts
    /// with the checkpointed state as its first record.
    pub fn resume(kernel: &Kernel, config: &SimConfig, diag: &DiagnosticsConfig, r: impl Read) -> Result<Self> {
        config.validate()?;
        let ck = read_checkpoint(r)?;
        if (ck.state.field.grid.dx - config.dx).abs() > 0.0 {
            return Err(Error::Data("checkpoint spacing differs from the configuration".into()));
        }
        let conv = Convolver::new(kernel, &ck.state.field.grid)?;
        let mut sim = Self::assemble(Velocity::Kernel(Box::new(conv)), ck.state.field.clone(), config, diag)?;
        sim.state = ck.state;
        sim.next_record = ck.next_record;
        Ok(sim)
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"NLKPPCK1";

struct Checkpoint {
    state: SimState,
    next_record: u64,
}

fn read_checkpoint(mut r: impl Read) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Data("not a checkpoint file".into()));
    }
    let mut b = [0u8; 8];
    let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
        r.read_exact(&mut b)?;
        Ok(b)
    };
    let x0 = f64::from_le_bytes(next(&mut r)?);
    let dx = f64::from_le_bytes(next(&mut r)?);
    let n = u64::from_le_bytes(next(&mut r)?) as usize;
    let time = f64::from_le_bytes(next(&mut r)?);
    let step_count = u64::from_le_bytes(next(&mut r)?);
    let last_dt = f64::from_le_bytes(next(&mut r)?);
    let extensions = u64::from_le_bytes(next(&mut r)?);
    let next_record = u64::from_le_bytes(next(&mut r)?);
    let grid = Grid::new(x0, dx, n)?;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(f64::from_le_bytes(next(&mut r)?));
    }
    let field = Field::new(grid, values, time)?;
    Ok(Checkpoint {
        state: SimState {
            field,
            step_count,
            last_dt,
            extensions,
        },
        next_record,
    })
}

/// Move each cell `[e0 + j dx, e0 + (j+1) dx]` of the piecewise-constant `u` to
/// `[y_j, y_{j+1}]`, `y_j = e0 + j dx + w_j dt`, keep its mass uniformly spread
/// there, and deposit it onto the fixed cells by overlap. The moved edges must be
/// non-decreasing.
fn remap(u: &[f64], e0: f64, dx: f64, w: &[f64], dt: f64, out: &mut [f64]) {
    let n = u.len();
    let y = |j: usize| e0 + j as f64 * dx + w[j] * dt;
    let edge = |i: usize| e0 + i as f64 * dx;
    out.iter_mut().for_each(|o| *o = 0.0);
    let mut i = 0usize;
    for j in 0..n {
        let (ya, yb) = (y(j), y(j + 1));
        let m = u[j] * dx;
        if m == 0.0 || yb <= ya {
            continue;
        }
        while i < n && edge(i + 1) <= ya {
            i += 1;
        }
        let mut k = i;
        while k < n && edge(k) < yb {
            let overlap = yb.min(edge(k + 1)) - ya.max(edge(k));
            if overlap > 0.0 {
                out[k] += m * overlap / (yb - ya);
            }
            k += 1;
        }
    }
    out.iter_mut().for_each(|o| *o /= dx);
}

/// Solve `sub·x_{i-1} + diag·x_i + sub·x_{i+1} = rhs_i` (Thomas algorithm).
pub fn solve_constant_tridiagonal(sub: f64, diag: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sub / diag;
    d[0] = rhs[0] / diag;
    for i in 1..n {
        let m = diag - sub * c[i - 1];
        c[i] = sub / m;
        d[i] = (rhs[i] - sub * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

/// Build the initial state without running.
pub fn init(u0: &U0Spec, config: &SimConfig) -> Result<SimState> {
    config.validate()?;
    let field = u0.build_admissible(config)?;
    Ok(SimState {
        field,
        step_count: 0,
        last_dt: config.dt_max,
        extensions: 0,
    })
}

/// Solve the nonlinear problem to `config.t_end`.
pub fn run(kernel: &Kernel, u0: &U0Spec, config: &SimConfig, diag: &DiagnosticsConfig) -> RunResult {
    Simulation::new(kernel, u0, config, diag)?.run_to_end()
}

/// Solve the linear drift-diffusion problem to `config.t_end`.
pub fn run_drift_diffusion(drift: &DriftSpec, u0: &U0Spec, config: &SimConfig, diag: &DiagnosticsConfig) -> RunResult {
    Simulation::with_drift(drift, u0, config, diag)?.run_to_end()
}

//! Experiment runner behind the `nlkpp` binary: scenarios, claim checks,
//! verification suites and parameter sweeps.

pub mod claims;
pub mod scenario;
pub mod svg;
pub mod sweep;
pub mod verify;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bounds::{cstar, mass_growth, plateau, BoundInputs, BoundReport};
use crate::diagnostics::FitModel;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelFacts};
use crate::solver::{run, RunOutput};

use claims::{ClaimContext, ClaimResult};
use scenario::Scenario;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CLAIM: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parameter(_) | Error::Hypothesis(_) | Error::Io(_) => EXIT_CONFIG,
        Error::BlowUp { .. } | Error::Numerical { .. } | Error::Resource(_) | Error::Data(_) => EXIT_NUMERICAL,
    }
}

/// Speed-bound report when the kernel is integrable; `None` otherwise.
pub fn bound_report(kernel: &Kernel, measured_max: Option<f64>, u_inf: Option<f64>) -> Result<Option<BoundReport>> {
    let facts = kernel.facts();
    if !facts.l1_norm.is_finite() {
        return Ok(None);
    }
    let mut inputs = BoundInputs::for_kernel(facts, measured_max)?;
    if let Some(u) = u_inf {
        inputs.u_inf = u;
    }
    cstar(&inputs).map(Some)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x}"))
}

/// Flat `key=value` report of the kernel facts and every applicable bound.
pub fn bounds_text(kernel: &Kernel, report: Option<&BoundReport>, u_inf: Option<f64>) -> String {
    let f: KernelFacts = kernel.facts();
    let mut s = String::new();
    let _ = writeln!(s, "kernel={}", kernel_label(kernel));
    let _ = writeln!(s, "jump={}", f.jump);
    let _ = writeln!(s, "l1_norm={}", f.l1_norm);
    let _ = writeln!(s, "lp={}", f.lp);
    let _ = writeln!(s, "kbar_l1={}", opt(f.kbar_l1));
    let _ = writeln!(s, "k_inf={}", f.k_inf);
    let _ = writeln!(s, "linf_bound={}", crate::bounds::linf_bound(f.jump));
    let (pu, pl) = plateau(&f);
    let _ = writeln!(s, "plateau_upper={pu}");
    let _ = writeln!(s, "plateau_lower={pl}");
    let _ = writeln!(s, "mass_growth={:?}", mass_growth(&f));
    match report {
        Some(r) => {
            let _ = writeln!(s, "u_inf={}", opt(u_inf));
            for (i, t) in r.cstar_terms.iter().enumerate() {
                let _ = writeln!(s, "cstar_term{}={}", i + 1, opt(*t));
            }
            let _ = writeln!(s, "eps_argmin={}", opt(r.eps_argmin));
            let _ = writeln!(s, "cstar={}", r.cstar);
        }
        None => {
            let _ = writeln!(s, "cstar=none");
        }
    }
    s
}

pub fn bounds_csv_header() -> &'static str {
    "jump,l1_norm,kbar_l1,u_inf,cstar_term1,cstar_term2,cstar_term3,eps_argmin,cstar,linf_bound"
}

pub fn bounds_csv_row(facts: &KernelFacts, u_inf: Option<f64>, r: Option<&BoundReport>) -> String {
    let c = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    let terms = r.map_or([None; 3], |r| r.cstar_terms);
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        facts.jump,
        facts.l1_norm,
        c(facts.kbar_l1),
        c(u_inf),
        c(terms[0]),
        c(terms[1]),
        c(terms[2]),
        c(r.and_then(|r| r.eps_argmin)),
        c(r.map(|r| r.cstar)),
        crate::bounds::linf_bound(facts.jump)
    )
}

pub fn kernel_label(k: &Kernel) -> String {
    match k {
        Kernel::Zero => "zero".into(),
        Kernel::KellerSegel { chi, d } => format!("keller-segel(chi={chi},d={d})"),
        Kernel::CompactBump { jump, support_radius } => format!("compact-bump(jump={jump},support_radius={support_radius})"),
        Kernel::PowerLaw { amplitude, alpha, sign } => format!("power-law(amplitude={amplitude},alpha={alpha},sign={sign})"),
        Kernel::Step { k_inf } => format!("step(k_inf={k_inf})"),
        Kernel::Tabulated(t) => format!("tabulated(samples={},spacing={})", t.samples.len(), t.spacing),
    }
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub output: RunOutput,
    pub bounds: Option<BoundReport>,
    pub claims: Vec<ClaimResult>,
    pub files: Vec<PathBuf>,
}

impl ScenarioOutcome {
    pub fn exit_code(&self) -> u8 {
        if claims::all_pass(&self.claims) {
            EXIT_OK
        } else {
            EXIT_CLAIM
        }
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn chart(out: &RunOutput) -> String {
    use svg::{Curve, Panel};
    let rec = &out.series.records;
    let mu = out.series.config.levels[0];
    let front_label = format!("right front (mu = {mu})");
    svg::render(&[
        Panel {
            title: "total mass P(t)",
            log_y: true,
            curves: vec![Curve { label: "P", points: rec.iter().map(|r| (r.t, r.mass)).collect() }],
        },
        Panel {
            title: "front position",
            log_y: false,
            curves: vec![Curve {
                label: &front_label,
                points: rec.iter().filter_map(|r| r.fronts[0].map(|f| (r.t, f.1))).collect(),
            }],
        },
        Panel {
            title: "max u",
            log_y: false,
            curves: vec![Curve { label: "u_max", points: rec.iter().map(|r| (r.t, r.u_max)).collect() }],
        },
    ])
}

/// Run a scenario, evaluate its claims and write
/// `<name>.csv`, `<name>.bounds.txt`, `<name>.svg`, `<name>.claims.txt` into `out_dir`.
/// A failed simulation still writes the CSV of the partial run.
pub fn run_scenario(scn: &Scenario, out_dir: &Path) -> Result<ScenarioOutcome> {
    scn.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let path = |ext: &str| out_dir.join(format!("{}.{ext}", scn.name));
    let output = match run(&scn.kernel, &scn.u0, &scn.sim, &scn.diagnostics) {
        Ok(o) => o,
        Err(failure) => {
            if let Some(p) = &failure.partial {
                write_atomic(&path("csv"), &p.series.to_csv())?;
            }
            return Err(failure.error);
        }
    };
    let measured = output.series.records.iter().map(|r| r.u_max).fold(0.0, f64::max);
    let bounds = bound_report(&scn.kernel, Some(measured), scn.bounds.u_inf)?;
    let facts = scn.kernel.facts();
    let cx = ClaimContext {
        facts: &facts,
        series: &output.series,
        field: output.field(),
        sim: &scn.sim,
        bounds: bounds.as_ref(),
    };
    let results: Vec<ClaimResult> = scn.claims.iter().map(|&id| claims::evaluate(id, &cx)).collect();

    let mut btxt = bounds_text(&scn.kernel, bounds.as_ref(), bounds.as_ref().map(|_| {
        scn.bounds.u_inf.unwrap_or_else(|| crate::bounds::default_u_inf(facts.jump, Some(measured)).unwrap_or(measured))
    }));
    for model in [FitModel::Linear, FitModel::LogCorrected] {
        let obs = crate::diagnostics::Observable::FrontRight { level: scn.diagnostics.levels[0] };
        if let Ok(f) = crate::diagnostics::fit_rate(&output.series, obs, model, claims::FIT_WINDOW) {
            let _ = writeln!(btxt, "fit_front_{model:?}={} r2={}", f.coefficient, f.r_squared);
        }
    }
    for model in [FitModel::Exponential, FitModel::Power] {
        if let Ok(f) = crate::diagnostics::fit_rate(&output.series, crate::diagnostics::Observable::Mass, model, claims::FIT_WINDOW) {
            let _ = writeln!(btxt, "fit_mass_{model:?}={} r2={}", f.coefficient, f.r_squared);
        }
    }

    let files = vec![path("csv"), path("bounds.txt"), path("svg"), path("claims.txt")];
    write_atomic(&files[0], &output.series.to_csv())?;
    write_atomic(&files[1], &btxt)?;
    write_atomic(&files[2], &chart(&output))?;
    write_atomic(&files[3], &claims::report(&results))?;
    Ok(ScenarioOutcome {
        output,
        bounds,
        claims: results,
        files,
    })
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nonlocal_kpp::cli::{self, scenario, sweep, verify};
use nonlocal_kpp::error::{Error, Result};

const THREADS_ENV: &str = "NLKPP_THREADS";

#[derive(Parser)]
#[command(name = "nlkpp", version, about = "Fisher-KPP with non-local advection: simulation, bounds and checks")]
struct Args {
    /// Run single-threaded so every reduction happens in a fixed order.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a preset or scenario file, write artifacts and evaluate its claims.
    Run {
        /// Preset name (kpp-local, keller-segel, keller-segel-converge, step, power-law) or TOML path.
        source: String,
        /// Dotted `key=value` override, e.g. `sim.t_end=20`.
        #[arg(long = "override", short = 'o')]
        overrides: Vec<String>,
        #[arg(long)]
        chi: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        kinf: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Kernel facts and explicit bounds, e.g. `keller-segel:chi=0.5,d=1`.
    Bounds {
        kernel: String,
        #[arg(long)]
        u_inf: Option<f64>,
    },
    /// Run a certification suite.
    Verify {
        /// gamma-envelope, hill, fp-tail, conv-bounds or phi-max.
        target: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Also write the report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate bounds (and optionally simulations) over a parameter grid.
    Sweep {
        file: PathBuf,
        /// Directory for `sweep.csv` and per-point series; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads(deterministic: bool) -> Result<()> {
    let threads = if deterministic {
        Some(1)
    } else {
        match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.parse::<usize>()
                    .ok()
                    .filter(|n| *n > 0)
                    .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?,
            ),
            Err(_) => None,
        }
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn shortcut_overrides(
    chi: Option<f64>,
    d: Option<f64>,
    kinf: Option<f64>,
    alpha: Option<f64>,
) -> Vec<(String, toml::Value)> {
    [("chi", chi), ("d", d), ("k_inf", kinf), ("alpha", alpha)]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (format!("kernel.params.{k}"), toml::Value::Float(v))))
        .collect()
}

fn execute(args: Args) -> Result<u8> {
    configure_threads(args.deterministic)?;
    match args.cmd {
        Cmd::Run { source, overrides, chi, d, kinf, alpha, out } => {
            let mut ov = overrides
                .iter()
                .map(|s| scenario::parse_override(s))
                .collect::<Result<Vec<_>>>()?;
            ov.extend(shortcut_overrides(chi, d, kinf, alpha));
            let scn = scenario::load(&source, &ov)?;
            let outcome = cli::run_scenario(&scn, &out)?;
            print!("{}", cli::claims::report(&outcome.claims));
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            Ok(outcome.exit_code())
        }
        Cmd::Bounds { kernel, u_inf } => {
            let k = scenario::parse_kernel_spec(&kernel)?;
            let report = cli::bound_report(&k, None, u_inf)?;
            let facts = k.facts();
            let used = report
                .as_ref()
                .map(|_| u_inf.map_or_else(|| nonlocal_kpp::bounds::default_u_inf(facts.jump, None), Ok))
                .transpose()?;
            print!("{}", cli::bounds_text(&k, report.as_ref(), used));
            println!("{}", cli::bounds_csv_header());
            println!("{}", cli::bounds_csv_row(&facts, used, report.as_ref()));
            Ok(cli::EXIT_OK)
        }
        Cmd::Verify { target, seed, report } => {
            let t: verify::Target = target.parse()?;
            let r = verify::run_target(t, seed)?;
            let text = r.text();
            print!("{text}");
            if let Some(path) = report {
                std::fs::write(path, &text)?;
            }
            Ok(if r.pass() { cli::EXIT_OK } else { cli::EXIT_CLAIM })
        }
        Cmd::Sweep { file, out } => {
            let spec = sweep::SweepSpec::load(&file)?;
            match out {
                Some(dir) => {
                    let path = sweep::write_sweep(&spec, &dir)?;
                    eprintln!("wrote {}", path.display());
                }
                None => print!("{}", sweep::run_sweep(&spec, None)?),
            }
            Ok(cli::EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { cli::EXIT_CONFIG } else { cli::EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e))
        }
    }
}

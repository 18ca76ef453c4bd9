//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nonlocal_kpp::bounds::{fp_tail, gamma_envelope, hill_lower, hill_upper, phi_max, DriftNorms, HalfLineProfile};
use nonlocal_kpp::cli::scenario::Scenario;
use nonlocal_kpp::cli::sweep::{run_sweep, SweepSpec};
use nonlocal_kpp::cli::bound_report;
use nonlocal_kpp::convolve::{conv, conv_dx, Field, Grid};
use nonlocal_kpp::diagnostics::{DiagnosticsConfig, TimeSeries};
use nonlocal_kpp::kernel::{Kernel, Monotonicity, TailExtension};
use nonlocal_kpp::solver::{run, run_drift_diffusion, DriftSpec, Reaction, RunOutput, SimConfig, Simulation, U0Spec};

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: u32, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail }
}

/// Least squares `y = a x + b`; returns `(a, b, r²)`.
fn linfit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    (a, b, r2(pts.iter().map(|p| (p.1, a * p.0 + b))))
}

fn r2(pairs: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let v: Vec<(f64, f64)> = pairs.collect();
    let my = v.iter().map(|p| p.0).sum::<f64>() / v.len() as f64;
    let ss_res: f64 = v.iter().map(|(y, f)| (y - f).powi(2)).sum();
    let ss_tot: f64 = v.iter().map(|(y, _)| (y - my).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

fn last_half<T>(series: &TimeSeries, f: impl Fn(&nonlocal_kpp::diagnostics::Record) -> Option<T>) -> Vec<(f64, T)> {
    let t_end = series.last().map_or(0.0, |r| r.t);
    series
        .records
        .iter()
        .filter(|r| r.t >= 0.5 * t_end - 1e-9)
        .filter_map(|r| f(r).map(|v| (r.t, v)))
        .collect()
}

fn right_front(series: &TimeSeries) -> Vec<(f64, f64)> {
    last_half(series, |r| r.fronts[0].map(|f| f.1))
}

fn run_preset(name: &str) -> (Scenario, RunOutput) {
    let scn = Scenario::preset(name).unwrap();
    let out = run(&scn.kernel, &scn.u0, &scn.sim, &scn.diagnostics)
        .unwrap_or_else(|f| panic!("preset {name} failed: {}", f.error));
    (scn, out)
}

fn c1_classical_speed(out: &RunOutput) -> Outcome {
    let pts = right_front(&out.series);
    let (c, _, r2_lin) = linfit(&pts);
    let shifted: Vec<(f64, f64)> = pts.iter().map(|&(t, x)| (t, x + 1.5 * t.ln())).collect();
    let (cl, bl, _) = linfit(&shifted);
    let r2_log = r2(pts.iter().map(|&(t, x)| (x, cl * t + bl - 1.5 * t.ln())));
    let pass = (1.85..=2.05).contains(&c) && r2_log > r2_lin;
    outcome(1, "classical-speed", pass, format!("c = {c:.4} in [1.85, 2.05]; r2 log-corrected {r2_log:.8} > linear {r2_lin:.8}"))
}

/// Speed bound for `K(x) = -χ sign(x) e^{-|x|/√d}/(2d)` from quadrature of the
/// kernel and of its tail integral, and a dense scan over ε.
fn cstar_oracle(chi: f64, d: f64, u: f64) -> f64 {
    let k = |y: f64| chi * (-y / d.sqrt()).exp() / (2.0 * d);
    let h = 1e-4 * d.sqrt();
    let n = (60.0 * d.sqrt() / h) as usize;
    let mut l1 = 0.0;
    let mut kbar = 0.0;
    let mut tail = 0.0;
    for i in (0..n).rev() {
        let y = (i as f64 + 0.5) * h;
        tail += k(y) * h;
        l1 += 2.0 * k(y) * h;
        kbar += 2.0 * tail * h;
    }
    let jump = chi / d;
    let t1 = 2.0 + l1 * u / 2.0;
    let t2 = 2.0 * ((1.0 + jump * u / 2.0) * (1.0 + (kbar * u).powi(2))).sqrt();
    let (a, b) = ((l1 * u).powi(2) / 16.0, (kbar * u).powi(2));
    let t3 = (1..1_000_000)
        .map(|i| {
            let e = i as f64 / 1e6;
            2.0 * ((1.0 + a / e) * (1.0 + b / (1.0 - e))).sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    t1.min(t2).min(t3)
}

fn c2_speed_bracket(scn: &Scenario, out: &RunOutput) -> Outcome {
    let oracle = cstar_oracle(0.5, 1.0, 2.0);
    let lib = bound_report(&scn.kernel, None, None).unwrap().unwrap().cstar;
    let (c, _, _) = linfit(&right_front(&out.series));
    let umax = out.series.records.iter().map(|r| r.u_max).fold(0.0, f64::max);
    let pass = (lib - 2.5).abs() < 1e-9 && (oracle - lib).abs() < 1e-5 && c >= 1.9 && c <= lib + 0.1 && umax <= 2.02;
    outcome(
        2,
        "speed-bracket",
        pass,
        format!("cstar = {lib} (oracle {oracle:.6}); c = {c:.4} in [1.9, {:.2}]; max u = {umax:.5} <= 2.02", lib + 0.1),
    )
}

fn c3_converge_one(out: &RunOutput) -> Outcome {
    let f = out.field();
    let t = f.time;
    let dev = (0..f.grid.n)
        .filter(|&i| f.grid.x(i).abs() < 1.5 * t)
        .map(|i| (f.values[i] - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(3, "converge-one", (t - 30.0).abs() < 1e-9 && dev < 0.05, format!("t = {t}; sup |u - 1| on |x| < 1.5t = {dev:.5} < 0.05"))
}

fn c4_exp_mass(out: &RunOutput) -> Outcome {
    let pts = last_half(&out.series, |r| Some(r.mass.ln()));
    let (rate, _, r2v) = linfit(&pts);
    let umax = last_half(&out.series, |r| Some(r.u_max));
    let avg = umax.iter().map(|p| p.1).sum::<f64>() / umax.len() as f64;
    let pass = r2v > 0.99 && rate > 0.0 && rate <= 1.02 && (1.0 / 3.0 - 0.05..=2.0 / 3.0 + 0.05).contains(&avg);
    outcome(
        4,
        "exp-mass",
        pass,
        format!("rate = {rate:.4} in (0, 1.02], r2 = {r2v:.6} > 0.99; time-averaged max u = {avg:.4} in [0.2833, 0.7167]"),
    )
}

fn c5_power_mass(out: &RunOutput) -> Outcome {
    let pts: Vec<(f64, f64)> = out
        .series
        .records
        .iter()
        .filter(|r| r.t >= 50.0 - 1e-9 && r.t <= 200.0 + 1e-9)
        .map(|r| (r.t.ln(), r.mass.ln()))
        .collect();
    let (slope, _, r2v) = linfit(&pts);
    outcome(5, "power-mass", (1.7..=2.4).contains(&slope), format!("log-log slope on [50, 200] = {slope:.4} in [1.7, 2.4] (r2 = {r2v:.5})"))
}

/// Recorded worst ratio over full runs, plus a step-by-step recomputation of
/// `|ΔP - dt·V(uⁿ)|` over the first steps of each preset.
fn c6_mass_identity(runs: &[(Scenario, RunOutput)]) -> Outcome {
    let mut worst_recorded: f64 = 0.0;
    let mut worst_steps: f64 = 0.0;
    for (scn, out) in runs {
        worst_recorded = out.series.records.iter().map(|r| r.mass_residual).fold(worst_recorded, f64::max);
        let mut sim = Simulation::new(&scn.kernel, &scn.u0, &scn.sim, &scn.diagnostics).unwrap();
        let dx = scn.sim.dx;
        for _ in 0..200 {
            let u = &sim.state().field.values;
            let p0: f64 = dx * u.iter().sum::<f64>();
            let v: f64 = dx * u.iter().map(|&x| x * (1.0 - x)).sum::<f64>();
            let dt = sim.step_towards(scn.sim.t_end).unwrap();
            let p1: f64 = dx * sim.state().field.values.iter().sum::<f64>();
            worst_steps = worst_steps.max((p1 - p0 - dt * v).abs() / (dt * (dt + dx * dx)));
        }
    }
    let pass = worst_recorded <= 10.0 && worst_steps <= 10.0;
    outcome(6, "mass-identity", pass, format!("worst recorded ratio = {worst_recorded:.3e}, worst recomputed step ratio = {worst_steps:.3e} (limit 10)"))
}

fn bumps(rng: &mut ChaCha8Rng) -> Vec<(f64, f64, f64)> {
    (0..rng.gen_range(1..=4))
        .map(|_| (rng.gen_range(0.1..1.0), rng.gen_range(-4.0..4.0), rng.gen_range(0.3..1.2)))
        .collect()
}

fn eval_bumps(b: &[(f64, f64, f64)], x: f64) -> f64 {
    b.iter().map(|(a, c, s)| a * (-(x - c).powi(2) / (2.0 * s * s)).exp()).sum()
}

fn c7_conv_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let tab: Vec<f64> = (0..=80).map(|j| -0.3 * (1.0 - j as f64 / 80.0)).collect();
    let families = [
        ("zero", Kernel::Zero),
        ("keller-segel", Kernel::keller_segel(0.7, 2.0).unwrap()),
        ("compact-bump", Kernel::compact_bump(0.6, 1.5).unwrap()),
        ("power-law", Kernel::power_law(0.5, 0.8, -1).unwrap()),
        ("step", Kernel::step(0.4).unwrap()),
        ("tabulated", Kernel::tabulated(tab, 0.025, Monotonicity::NonDecreasing, TailExtension::Zero).unwrap()),
    ];
    let grid = |dx: f64| {
        let half = (12.0 / dx).round() as usize;
        Grid::new(-(half as f64) * dx, dx, 2 * half + 1).unwrap()
    };
    let gap = |a: &Field, b: &Field| (0..a.grid.n).map(|i| (a.values[i] - b.values[2 * i]).abs()).fold(0.0, f64::max);
    let mut pass = true;
    let mut worst_ratio = f64::INFINITY;
    let mut failures = Vec::new();
    for (name, k) in &families {
        let facts = k.facts();
        let mut err = [[0.0f64; 2]; 2];
        let mut obs = Vec::new();
        for _ in 0..200 {
            let b = bumps(&mut rng);
            let sup_u = (0..200_001).map(|i| eval_bumps(&b, -12.0 + 24.0 * i as f64 / 200_000.0)).fold(0.0, f64::max);
            let mut c = Vec::new();
            let mut d = Vec::new();
            for dx in [0.04, 0.02, 0.01] {
                let u = Field::from_fn(grid(dx), 0.0, |x| eval_bumps(&b, x));
                c.push(conv(k, &u).unwrap());
                d.push(conv_dx(k, &u).unwrap());
            }
            for l in 0..2 {
                err[0][l] = err[0][l].max(4.0 / 3.0 * gap(&c[l], &c[l + 1]));
                err[1][l] = err[1][l].max(4.0 / 3.0 * gap(&d[l], &d[l + 1]));
            }
            obs.push((sup_u, [c[0].max_abs(), c[1].max_abs()], [d[0].max_abs(), d[1].max_abs()]));
        }
        for (sup_u, c, d) in &obs {
            for l in 0..2 {
                if facts.l1_norm.is_finite() && c[l] > 0.5 * facts.l1_norm * sup_u + err[0][l] {
                    pass = false;
                    failures.push(format!("{name} |K*u|"));
                }
                if d[l] > facts.jump.abs() * sup_u + err[1][l] {
                    pass = false;
                    failures.push(format!("{name} |(K*u)_x|"));
                }
            }
        }
        for (i, e) in err.iter().enumerate() {
            if i == 0 && !facts.l1_norm.is_finite() || e[0] == 0.0 {
                continue;
            }
            let ratio = e[0] / e[1];
            worst_ratio = worst_ratio.min(ratio);
            if ratio < 3.0 {
                pass = false;
                failures.push(format!("{name} refinement {ratio:.2}"));
            }
        }
    }
    failures.dedup();
    outcome(7, "conv-bounds", pass, format!("6 families x 200 fields; worst err(0.04)/err(0.02) = {worst_ratio:.3} >= 3; violations: {failures:?}"))
}

fn c8_hill() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for a in [0.25, 1.0] {
        let mut n = 0;
        while n < 1000 {
            let t: f64 = rng.gen_range(0.1..5.0);
            let x: f64 = rng.gen_range(-10.0..10.0);
            let (Some(up), Some(lo)) = (hill_upper(a, 1, t, x.abs()), hill_lower(a, 1, t, x.abs())) else {
                continue;
            };
            n += 1;
            let g = (-(x - a * t).powi(2) / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
            if g <= 0.0 {
                continue;
            }
            if !(lo <= g && g <= up) {
                violations += 1;
            }
            worst = worst.min((up / g).ln().min((g / lo).ln()));
        }
    }
    outcome(8, "hill", violations == 0, format!("2000 points, {violations} violations, worst log-margin {worst:.4e}"))
}

fn c9_fp_tail() -> Outcome {
    let cfg = SimConfig {
        dx: 0.05,
        dt_max: 0.01,
        t_end: 4.0,
        reaction: Reaction::None,
        record_every: 1.0,
        ..SimConfig::default()
    };
    let u0 = U0Spec::Indicator { a: 1.0, height: 1.0 };
    let mut violations = 0;
    let mut nodes = 0;
    for drift in [
        DriftSpec::Constant { speed: 0.5 },
        DriftSpec::Constant { speed: -0.5 },
        DriftSpec::Sinusoid { amplitude: 0.5, wavenumber: 1.0 },
        DriftSpec::Sinusoid { amplitude: 0.5, wavenumber: 3.0 },
    ] {
        let out = run_drift_diffusion(&drift, &u0, &cfg, &DiagnosticsConfig::default()).unwrap();
        let f = out.field();
        for i in 0..f.grid.n {
            let x = f.grid.x(i);
            if x.abs() >= 4.0 {
                nodes += 1;
                let b = fp_tail(0.5, 4.0, 1.0, x).expect("bound applies for |x| >= 4");
                if f.values[i] > b {
                    violations += 1;
                }
            }
        }
    }
    outcome(9, "fp-tail", violations == 0 && nodes > 0, format!("4 drifts, {nodes} nodes with |x| >= 4, {violations} violations"))
}

fn c10_gamma_envelope() -> Outcome {
    let drift = DriftSpec::PotentialGradient { a0: 0.5, a1: 0.25 };
    let norms = DriftNorms::new(0.5, 0.25, 0.125).unwrap();
    let dx = 0.02;
    let cfg = SimConfig {
        dx,
        dt_max: 1e-3,
        t_end: 4.0,
        reaction: Reaction::None,
        record_every: 0.25,
        ..SimConfig::default()
    };
    let u0 = U0Spec::Gaussian { width: 3.0 * dx, mass: 1.0 };
    let mut sim = Simulation::with_drift(&drift, &u0, &cfg, &DiagnosticsConfig::default()).unwrap();
    let mut sup = Vec::new();
    for k in 2..=16 {
        let t = 0.25 * k as f64;
        sim.advance_to(t).unwrap();
        let f = &sim.state().field;
        let q = (0..f.grid.n)
            .filter(|&i| f.values[i] > 1e-30)
            .map(|i| f.values[i].ln() + 0.5 * t.ln() - gamma_envelope(&norms, 0.1, t, f.grid.x(i)).unwrap().exponent)
            .fold(f64::NEG_INFINITY, f64::max);
        sup.push((t, q));
    }
    let (slope, _, _) = linfit(&sup);
    let bounded = sup.iter().all(|p| p.1.is_finite());
    let qmax = sup.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    outcome(10, "gamma-envelope", bounded && slope <= 0.01, format!("sup over t in [0.5, 4] = {qmax:.4}; slope = {slope:.5} <= 0.01"))
}

fn c11_phi_max() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 0.02;
    let mut exceed = 0;
    let mut worst_ext: f64 = 0.0;
    for _ in 0..20 {
        let len = rng.gen_range(20..200);
        let mut v = vec![rng.gen_range(0.1..3.0)];
        for _ in 1..len {
            let last = *v.last().unwrap();
            v.push((last - rng.gen_range(0.0..0.05f64)).max(0.0));
        }
        let phi_at = |y: f64| {
            let s = y / h;
            let i = s.floor() as usize;
            if i + 1 >= v.len() {
                if i + 1 == v.len() && s == i as f64 { v[i] } else { 0.0 }
            } else {
                v[i] + (v[i + 1] - v[i]) * (s - i as f64)
            }
        };
        let phi = HalfLineProfile::new(v.clone(), h).unwrap();
        let m = rng.gen_range(0.01..(len as f64 * h * 2.0));
        let closed = phi_max(&phi, m).unwrap();
        let cells = len + 50;
        let cell_int: Vec<f64> = (0..cells).map(|j| 0.5 * h * (phi_at(j as f64 * h) + phi_at((j + 1) as f64 * h))).collect();
        for s in 0..10_000 {
            let mut w: Vec<f64> = (0..cells)
                .map(|_| match s % 3 {
                    0 => rng.gen_range(0.0..2.0),
                    1 => {
                        if rng.gen_bool(0.5) {
                            2.0
                        } else {
                            0.0
                        }
                    }
                    _ => 2.0 * rng.gen::<f64>().powi(4),
                })
                .collect();
            let total = w.iter().sum::<f64>() * h;
            if total > m {
                w.iter_mut().for_each(|x| *x *= m / total);
            }
            let pairing: f64 = w.iter().zip(&cell_int).map(|(a, b)| a * b).sum();
            if pairing > closed + 1e-12 {
                exceed += 1;
            }
        }
        let n = 2_000_000;
        let step = 0.5 * m / n as f64;
        let ext: f64 = (0..n).map(|i| 2.0 * phi_at((i as f64 + 0.5) * step)).sum::<f64>() * step;
        worst_ext = worst_ext.max((ext - closed).abs());
    }
    outcome(11, "phi-max", exceed == 0 && worst_ext <= 1e-6, format!("200000 samples, {exceed} exceed; |extremal - closed form| = {worst_ext:.2e} <= 1e-6"))
}

fn sweep_column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

/// `c - 2` for the third branch without cancellation, as an oracle for tiny kernels.
fn third_branch_excess(k: f64, kb: f64) -> f64 {
    let (a, b) = (k * k / 16.0, kb * kb);
    let f = |e: f64| a / e + b / (1.0 - e) + a * b / (e * (1.0 - e));
    let mut best = f64::INFINITY;
    let mut arg = 0.5;
    for i in 1..100_000 {
        let e = i as f64 / 1e5;
        if f(e) < best {
            best = f(e);
            arg = e;
        }
    }
    let (mut lo, mut hi) = ((arg - 1e-5).max(1e-12), (arg + 1e-5).min(1.0 - 1e-12));
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let fm = f(0.5 * (lo + hi)).min(best);
    2.0 * fm / ((1.0 + fm).sqrt() + 1.0)
}

fn c12_sweeps() -> Outcome {
    let s1 = SweepSpec::from_text(
        "mode = \"zip\"\nfamily = \"keller-segel\"\n[params]\nchi = { geom = [1e-3, 1e-1, 9] }\nd = { power_of = \"chi\", exponent = -1.0 }\n",
    )
    .unwrap();
    let csv1 = run_sweep(&s1, None).unwrap();
    let chi = sweep_column(&csv1, "chi");
    let c1 = sweep_column(&csv1, "cstar");
    let ratio1: Vec<f64> = chi.iter().zip(&c1).map(|(x, c)| (c - 2.0) / (x * x)).collect();
    let lim1 = ratio1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let s2 = SweepSpec::from_text(
        "mode = \"zip\"\nfamily = \"keller-segel\"\n[params]\nd = { geom = [1e-4, 1e-1, 7] }\nchi = { power_of = \"d\", exponent = 2.0 }\n",
    )
    .unwrap();
    let csv2 = run_sweep(&s2, None).unwrap();
    let d = sweep_column(&csv2, "d");
    let c2 = sweep_column(&csv2, "cstar");
    let (i0, d0) = d.iter().cloned().enumerate().fold((0, f64::INFINITY), |a, (i, x)| if x < a.1 { (i, x) } else { a });
    let ratio2 = (c2[i0] - 2.0) / d0.powi(3);

    // Independent evaluation at the smallest d: χ = d², J = d, ‖K‖₁ = d^{3/2}, ‖K̄‖₁ = d².
    let u = 1.0 / (1.0 - d0);
    let oracle = third_branch_excess(d0.powf(1.5) * u, d0 * d0 * u) / d0.powi(3);
    let agree = ((ratio2 - oracle) / oracle).abs() < 0.02;
    let pass = lim1 <= 1.51 && ratio2 <= 1.0 / 16.0 + 0.01 && agree;
    outcome(
        12,
        "asymptotic-sweeps",
        pass,
        format!(
            "chi = 1/d: max (cstar-2)/chi^2 = {lim1:.4} <= 1.51; chi = d^2: (cstar-2)/d^3 at d = {d0:e} is {ratio2:.4} (oracle {oracle:.4}) <= 0.0725"
        ),
    )
}

fn main() {
    let mut results = Vec::new();
    let runs: Vec<(Scenario, RunOutput)> = std::thread::scope(|s| {
        let handles: Vec<_> = ["kpp-local", "keller-segel", "keller-segel-converge", "step", "power-law"]
            .into_iter()
            .map(|name| s.spawn(move || run_preset(name)))
            .collect();
        let light = s.spawn(|| vec![c7_conv_bounds(), c8_hill(), c9_fp_tail(), c10_gamma_envelope(), c11_phi_max(), c12_sweeps()]);
        let runs = handles.into_iter().map(|h| h.join().unwrap()).collect();
        results.extend(light.join().unwrap());
        runs
    });
    results.push(c1_classical_speed(&runs[0].1));
    results.push(c2_speed_bracket(&runs[1].0, &runs[1].1));
    results.push(c3_converge_one(&runs[2].1));
    results.push(c4_exp_mass(&runs[3].1));
    results.push(c5_power_mass(&runs[4].1));
    results.push(c6_mass_identity(&runs));
    results.sort_by_key(|o| o.id);
    for o in &results {
        println!("[{:02}] {:<18} {}  {}", o.id, o.name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<u32> = results.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if results.len() != 12 || !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

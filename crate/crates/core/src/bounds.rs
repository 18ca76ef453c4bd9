//! Closed-form bounds: spreading speed `c*`, `L∞` bound, heat-kernel envelopes,
//! Gaussian tail bounds, plateau levels and the rearrangement maximum.
//!
//! Bounds whose constants are not explicit are returned as rates only
//! ([`GammaEnvelope`], [`MassGrowth`]); no constant is ever made up for them.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernel::KernelFacts;
use crate::minimize::{infimum_open, Minimum};

/// Grid points of the bracketing pre-scan before golden-section refinement.
pub const EPS_PRESCAN: usize = 64;
/// Width at which the golden-section search on `ε` stops.
pub const EPS_TOL: f64 = 1e-12;

/// Sup-norms `(‖v‖∞, ‖v_x‖∞, ‖v_xx‖∞)` of a drift potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftNorms {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl DriftNorms {
    pub fn new(a0: f64, a1: f64, a2: f64) -> Result<Self> {
        if [a0, a1, a2].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param("drift norms must be finite and non-negative"));
        }
        Ok(DriftNorms { a0, a1, a2 })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundInputs {
    pub facts: KernelFacts,
    /// The `‖u‖∞` plugged into the speed formula.
    pub u_inf: f64,
    pub drift_norms: Option<DriftNorms>,
    /// Radius `a` with `supp u0 ⊂ [-a, a]`.
    pub support_radius: f64,
    /// Drift cap `A` for the tail bound.
    pub drift_cap: f64,
}

impl BoundInputs {
    /// Inputs with `u_inf` chosen by [`default_u_inf`].
    pub fn for_kernel(facts: KernelFacts, measured_max: Option<f64>) -> Result<Self> {
        let u_inf = default_u_inf(facts.jump, measured_max)?;
        Ok(BoundInputs {
            facts,
            u_inf,
            drift_norms: None,
            support_radius: 1.0,
            drift_cap: 0.0,
        })
    }
}

/// `(1-J)^{-1}` when `0 ≤ J < 1`; otherwise the measured maximum, falling back to
/// the a-priori bound `max{1, (1-J)^{-1}}` when nothing was measured.
pub fn default_u_inf(jump: f64, measured_max: Option<f64>) -> Result<f64> {
    if (0.0..1.0).contains(&jump) {
        return Ok(1.0 / (1.0 - jump));
    }
    match measured_max {
        Some(m) if m > 0.0 && m.is_finite() => Ok(m),
        Some(m) => Err(Error::param(format!("measured maximum must be positive, got {m}"))),
        None => {
            let b = linf_bound(jump);
            if b.is_finite() {
                Ok(b)
            } else {
                Err(Error::param(format!(
                    "no a-priori L-infinity bound for J = {jump}; supply u_inf"
                )))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    /// The three branches of the speed formula; `None` when a branch does not apply.
    pub cstar_terms: [Option<f64>; 3],
    pub cstar: f64,
    /// Minimiser of the third branch.
    pub eps_argmin: Option<f64>,
    pub linf_bound: f64,
    pub plateau_upper: Option<f64>,
    pub plateau_lower: Option<f64>,
}

/// Explicit upper bound on the spreading speed.
///
/// Needs `K ∈ L¹`. When `‖K̄‖₁` is undefined only the first branch applies.
pub fn cstar(inputs: &BoundInputs) -> Result<BoundReport> {
    let f = &inputs.facts;
    let u = inputs.u_inf;
    if !(u.is_finite() && u > 0.0) {
        return Err(Error::param(format!("u_inf must be positive, got {u}")));
    }
    if !f.l1_norm.is_finite() {
        return Err(Error::Hypothesis(
            "the speed formula needs an integrable kernel".into(),
        ));
    }
    let k1 = f.l1_norm;
    let j = f.jump.abs();
    let term1 = 2.0 + k1 * u / 2.0;
    let (term2, term3, eps) = match f.kbar_l1 {
        Some(kb) => {
            let term2 = 2.0 * ((1.0 + j * u / 2.0) * (1.0 + kb * kb * u * u)).sqrt();
            let m = cstar_eps_branch(k1 * u, kb * u);
            (Some(term2), Some(m.value), Some(m.arg))
        }
        None => (None, None, None),
    };
    let cstar = [Some(term1), term2, term3]
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let (pu, pl) = plateau(f);
    Ok(BoundReport {
        cstar_terms: [Some(term1), term2, term3],
        cstar,
        eps_argmin: eps,
        linf_bound: linf_bound(f.jump),
        plateau_upper: if f.k_inf > 0.0 { Some(pu) } else { None },
        plateau_lower: if f.jump <= 0.0 { Some(pl) } else { None },
    })
}

/// `inf_{ε∈(0,1)} 2√((1 + k²/(16ε))(1 + kb²/(1-ε)))` with `k = ‖K‖₁‖u‖∞`, `kb = ‖K̄‖₁‖u‖∞`.
pub fn cstar_eps_branch(k: f64, kb: f64) -> Minimum {
    let a = k * k / 16.0;
    let b = kb * kb;
    let obj = |e: f64| 2.0 * ((1.0 + a / e) * (1.0 + b / (1.0 - e))).sqrt();
    if a == 0.0 && b == 0.0 {
        return Minimum { arg: 0.5, value: 2.0 };
    }
    infimum_open(obj, 0.0, 1.0, EPS_PRESCAN, EPS_TOL)
}

/// `max{1, (1-J)^{-1}}` for `J < 1`, `+∞` otherwise.
pub fn linf_bound(jump: f64) -> f64 {
    if jump < 1.0 {
        (1.0 / (1.0 - jump)).max(1.0)
    } else {
        f64::INFINITY
    }
}

/// Which branch of the envelope attains the minimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvelopeBranch {
    SecondDerivative,
    EpsilonInfimum,
}

/// `Γ(t,s,x,y) ≤ C_δ (t-s)^{time_power} exp(exponent)`, `C_δ` unknown.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaEnvelope {
    pub exponent: f64,
    pub time_power: f64,
    pub branch: EnvelopeBranch,
    pub eps_argmin: Option<f64>,
}

/// Exponent of the upper envelope for the fundamental solution of
/// `Γ_t + (v_x Γ)_x = Γ_xx`, at elapsed time `tau = t - s` and offset `z = x - y`.
pub fn gamma_envelope(norms: &DriftNorms, delta: f64, tau: f64, z: f64) -> Result<GammaEnvelope> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param(format!("t - s must be positive, got {tau}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param(format!("delta must be positive, got {delta}")));
    }
    let DriftNorms { a0, a1, a2 } = *norms;
    let z2 = z * z;
    let first = a2 * tau / 2.0 - z2 / (4.0 * (1.0 + delta + a0 * a0) * tau);
    if a1 == 0.0 {
        // ε → 0⁺ degenerates; only the first branch is used.
        return Ok(GammaEnvelope {
            exponent: delta * tau + first,
            time_power: -0.5,
            branch: EnvelopeBranch::SecondDerivative,
            eps_argmin: None,
        });
    }
    let m = gamma_eps_branch(norms, delta, tau, z);
    let (inner, branch, eps) = if m.value < first {
        (m.value, EnvelopeBranch::EpsilonInfimum, Some(m.arg))
    } else {
        (first, EnvelopeBranch::SecondDerivative, None)
    };
    Ok(GammaEnvelope {
        exponent: delta * tau + inner,
        time_power: -0.5,
        branch,
        eps_argmin: eps,
    })
}

/// `inf_{ε∈(0,1)} A1²τ/(4ε) - z²/(4(1+δ+A0²/(1-ε))τ)`.
pub fn gamma_eps_branch(norms: &DriftNorms, delta: f64, tau: f64, z: f64) -> Minimum {
    let DriftNorms { a0, a1, .. } = *norms;
    let obj = |e: f64| {
        a1 * a1 * tau / (4.0 * e) - z * z / (4.0 * (1.0 + delta + a0 * a0 / (1.0 - e)) * tau)
    };
    infimum_open(obj, 0.0, 1.0, EPS_PRESCAN, EPS_TOL)
}

fn check_time(tau: f64) -> Option<()> {
    (tau > 0.0 && tau.is_finite()).then_some(())
}

/// Sharp upper bound for the kernel of `∂_t + v·∇ - Δ` with `|v| ≤ a` in
/// dimension `dim`; needs `r = |x-y| > a·τ`.
pub fn hill_upper(a: f64, dim: u32, tau: f64, r: f64) -> Option<f64> {
    check_time(tau)?;
    if !(r > a * tau) {
        return None;
    }
    let base = 1.0 / (4.0 * PI * tau).sqrt();
    let gap = r - a * tau;
    let lead = base + a * tau.sqrt() / ((4.0 * PI).sqrt() * gap);
    Some(hill_uniform_upper(a, dim - 1, tau)? * lead * (-gap * gap / (4.0 * tau)).exp())
}

/// `(1/√(4πτ) + a/2)^dim`, valid everywhere.
pub fn hill_uniform_upper(a: f64, dim: u32, tau: f64) -> Option<f64> {
    check_time(tau)?;
    Some((1.0 / (4.0 * PI * tau).sqrt() + a / 2.0).powi(dim as i32))
}

/// Lower bound, needs `r > a·√dim·τ`.
pub fn hill_lower(a: f64, dim: u32, tau: f64, r: f64) -> Option<f64> {
    check_time(tau)?;
    let shift = a * f64::from(dim).sqrt() * tau;
    if !(r > shift) {
        return None;
    }
    let e = -(r + shift).powi(2) / (4.0 * tau);
    Some(e.exp() / (16.0 * PI * tau).powf(f64::from(dim) / 2.0))
}

/// Tail bound at time `t_final` for `u_t + (v u)_x = u_xx`, `|v| ≤ a_cap`,
/// `supp u0 ⊂ [-radius, radius]` and `u0 ≤ 1`; needs `|x| ≥ a_cap·T + radius + 1`.
pub fn fp_tail(a_cap: f64, t_final: f64, radius: f64, x: f64) -> Option<f64> {
    check_time(t_final)?;
    let gap = x.abs() - a_cap * t_final - radius;
    if !(gap >= 1.0) {
        return None;
    }
    let pre = radius / PI.sqrt() * (1.0 / t_final.sqrt() + a_cap * t_final.sqrt() / gap);
    Some(pre * (-gap * gap / (4.0 * t_final)).exp())
}

/// `(1/(1+2K∞), 1/(2(1+|J|)))`; the first is `1` when `K∞ = 0`.
pub fn plateau(facts: &KernelFacts) -> (f64, f64) {
    let upper = if facts.k_inf > 0.0 {
        1.0 / (1.0 + 2.0 * facts.k_inf)
    } else {
        1.0
    };
    (upper, 1.0 / (2.0 * (1.0 + facts.jump.abs())))
}

/// Growth law of the total mass, up to constants that are not explicit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MassGrowth {
    /// `C⁻¹e^{rt} ≤ P ≤ Ce^t` for every `r < rate_sup`.
    Exponential { rate_sup: f64, upper_rate: f64 },
    /// `C⁻¹(1+t)^{lower} ≤ P ≤ C(t^p + 1)` for every `p > upper_threshold` with `K ∈ L^p`.
    Power {
        lower_exponent: f64,
        upper_threshold: f64,
    },
    /// Integrable kernels spread at a finite speed.
    Linear,
}

pub fn mass_growth(facts: &KernelFacts) -> MassGrowth {
    if facts.k_inf > 0.0 {
        MassGrowth::Exponential {
            rate_sup: 2.0 * facts.k_inf / (1.0 + 2.0 * facts.k_inf),
            upper_rate: 1.0,
        }
    } else if let Some(alpha) = facts.power_alpha {
        MassGrowth::Power {
            lower_exponent: 1.0 / alpha,
            upper_threshold: 1.0 / alpha,
        }
    } else {
        MassGrowth::Linear
    }
}

/// Non-negative profile on `[0, ∞)` sampled at `j·spacing`, linear in between and
/// zero past the table.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfLineProfile {
    pub values: Vec<f64>,
    pub spacing: f64,
}

impl HalfLineProfile {
    pub fn new(values: Vec<f64>, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) || values.is_empty() {
            return Err(Error::param("profile needs samples and a positive spacing"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Hypothesis("profile must be non-negative".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Hypothesis("profile must be non-increasing".into()));
        }
        Ok(HalfLineProfile { values, spacing })
    }

    pub fn eval(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        let s = y / self.spacing;
        let j = s.floor() as usize;
        if j + 1 >= self.values.len() {
            return if j + 1 == self.values.len() && s == j as f64 {
                self.values[j]
            } else {
                0.0
            };
        }
        let f = s - j as f64;
        self.values[j] * (1.0 - f) + self.values[j + 1] * f
    }

    /// Exact `∫_0^b` of the linear interpolant.
    pub fn integral_to(&self, b: f64) -> f64 {
        let h = self.spacing;
        let end = (self.values.len() - 1) as f64 * h;
        let b = b.min(end);
        if b <= 0.0 {
            return 0.0;
        }
        let full = (b / h).floor() as usize;
        let mut acc: f64 = self.values[..=full.min(self.values.len() - 1)]
            .windows(2)
            .map(|w| 0.5 * h * (w[0] + w[1]))
            .sum();
        let rest = b - full as f64 * h;
        if rest > 0.0 && full + 1 < self.values.len() {
            acc += 0.5 * rest * (self.values[full] + self.eval(b));
        }
        acc
    }
}

/// `max ∫ φ w` over `‖w‖∞ ≤ 2`, `‖w‖₁ ≤ M`, which equals `2 ∫_0^{M/2} φ`.
pub fn phi_max(phi: &HalfLineProfile, mass: f64) -> Result<f64> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::param(format!("M must be positive, got {mass}")));
    }
    Ok(2.0 * phi.integral_to(mass / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;

    fn dense_grid_min(f: impl Fn(f64) -> f64) -> f64 {
        let n = 100_000;
        (1..n).map(|i| f(i as f64 / n as f64)).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn zero_kernel_speed_is_two() {
        let inp = BoundInputs::for_kernel(Kernel::Zero.facts(), None).unwrap();
        let r = cstar(&inp).unwrap();
        assert_eq!(r.cstar, 2.0);
        assert!(r.cstar_terms.iter().flatten().all(|t| *t == 2.0));
    }

    #[test]
    fn keller_segel_example() {
        let facts = Kernel::keller_segel(0.5, 1.0).unwrap().facts();
        let inp = BoundInputs::for_kernel(facts, None).unwrap();
        assert_eq!(inp.u_inf, 2.0);
        let r = cstar(&inp).unwrap();
        let [t1, t2, t3] = r.cstar_terms;
        assert!((t1.unwrap() - 2.5).abs() < 1e-15);
        assert!((t2.unwrap() - 2.0 * 3f64.sqrt()).abs() < 1e-14);
        let oracle = dense_grid_min(|e| 2.0 * ((1.0 + 1.0 / (16.0 * e)) * (1.0 + 1.0 / (1.0 - e))).sqrt());
        assert!((t3.unwrap() - oracle).abs() < 1e-8);
        assert!(t3.unwrap() <= oracle);
        assert!((t3.unwrap() - 3.41548).abs() < 1e-5);
        assert_eq!(r.cstar, 2.5);
    }

    #[test]
    fn small_chi_inverse_d_asymptotics() {
        let chi: f64 = 1e-3;
        let facts = Kernel::keller_segel(chi, 1.0 / chi).unwrap().facts();
        let r = cstar(&BoundInputs::for_kernel(facts, None).unwrap()).unwrap();
        assert!(r.cstar - 2.0 <= 2e-6);
        assert!((r.cstar - 2.0) / (chi * chi) <= 1.5 + 1e-3);
    }

    #[test]
    fn undefined_kbar_leaves_first_branch() {
        let mut facts = Kernel::keller_segel(0.5, 1.0).unwrap().facts();
        facts.kbar_l1 = None;
        let r = cstar(&BoundInputs::for_kernel(facts, None).unwrap()).unwrap();
        assert_eq!(r.cstar_terms[1], None);
        assert_eq!(r.cstar_terms[2], None);
        assert_eq!(r.cstar, 2.5);
    }

    #[test]
    fn non_integrable_kernel_rejected() {
        let facts = Kernel::step(0.25).unwrap().facts();
        let inp = BoundInputs::for_kernel(facts, Some(1.0)).unwrap();
        assert!(matches!(cstar(&inp), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn linf_examples() {
        assert_eq!(linf_bound(0.0), 1.0);
        assert_eq!(linf_bound(0.5), 2.0);
        assert_eq!(linf_bound(-3.0), 1.0);
        assert!(linf_bound(1.0).is_infinite());
    }

    #[test]
    fn default_u_inf_rules() {
        assert_eq!(default_u_inf(0.5, Some(1.3)).unwrap(), 2.0);
        assert_eq!(default_u_inf(-0.5, Some(0.9)).unwrap(), 0.9);
        assert_eq!(default_u_inf(-0.5, None).unwrap(), 1.0);
        assert!(default_u_inf(1.5, None).is_err());
        assert_eq!(default_u_inf(1.5, Some(3.0)).unwrap(), 3.0);
    }

    #[test]
    fn envelope_without_drift_is_heat_decay() {
        let n = DriftNorms::new(0.0, 0.0, 0.0).unwrap();
        let (t, z) = (2.0, 3.0);
        for delta in [1e-3, 1e-6, 1e-9] {
            let e = gamma_envelope(&n, delta, t, z).unwrap();
            assert!((e.exponent + z * z / (4.0 * t)).abs() < 2.0 * delta * (1.0 + t));
        }
    }

    #[test]
    fn envelope_a1_zero_uses_first_branch() {
        let n = DriftNorms::new(0.3, 0.0, 0.2).unwrap();
        let e = gamma_envelope(&n, 0.1, 1.0, 2.0).unwrap();
        assert_eq!(e.branch, EnvelopeBranch::SecondDerivative);
        let expect = 0.1 + 0.1 - 4.0 / (4.0 * (1.1 + 0.09));
        assert!((e.exponent - expect).abs() < 1e-15);
    }

    #[test]
    fn envelope_matches_grid_oracle() {
        let n = DriftNorms::new(0.5, 0.25, 0.125).unwrap();
        let (delta, tau, z) = (0.1, 1.0, 4.0);
        let e = gamma_envelope(&n, delta, tau, z).unwrap();
        let first: f64 = 0.125 / 2.0 - 16.0 / (4.0 * 1.35);
        let second = dense_grid_min(|eps| 0.0625 / (4.0 * eps) - 16.0 / (4.0 * (1.1 + 0.25 / (1.0 - eps))));
        let oracle = delta * tau + first.min(second);
        assert!((e.exponent - oracle).abs() < 1e-9, "{} vs {}", e.exponent, oracle);
    }

    #[test]
    fn hill_examples() {
        let up = hill_upper(0.0, 1, 1.0, 2.0).unwrap();
        let lo = hill_lower(0.0, 1, 1.0, 2.0).unwrap();
        assert!((up - (-1f64).exp() / (4.0 * PI).sqrt()).abs() < 1e-16);
        assert!((lo - (-1f64).exp() / (16.0 * PI).sqrt()).abs() < 1e-16);
        assert!((up / lo - 2.0).abs() < 1e-14);
        let up = hill_upper(1.0, 1, 1.0, 3.0).unwrap();
        let expect = (1.0 / (4.0 * PI).sqrt() + 1.0 / (2.0 * (4.0 * PI).sqrt())) * (-1f64).exp();
        assert!((up - expect).abs() < 1e-16);
        assert_eq!(hill_upper(1.0, 1, 1.0, 0.5), None);
        assert_eq!(hill_lower(1.0, 2, 1.0, 1.2), None);
        assert_eq!(hill_upper(1.0, 1, 0.0, 3.0), None);
    }

    #[test]
    fn fp_tail_examples() {
        let v = fp_tail(0.0, 1.0, 1.0, 3.0).unwrap();
        assert!((v - (-1f64).exp() / PI.sqrt()).abs() < 1e-16);
        assert_eq!(fp_tail(0.5, 4.0, 1.0, 3.9), None);
        assert!(fp_tail(0.5, 4.0, 1.0, -4.0).is_some());
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let v = fp_tail(0.5, 4.0, 1.0, 4.0 + 0.1 * i as f64).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn plateau_examples() {
        let (u, l) = plateau(&Kernel::step(0.25).unwrap().facts());
        assert!((u - 2.0 / 3.0).abs() < 1e-15 && (l - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(plateau(&Kernel::Zero.facts()).0, 1.0);
        for kinf in [0.1, 0.7, 3.0] {
            let (u, l) = plateau(&Kernel::step(kinf).unwrap().facts());
            assert!((l - u / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mass_growth_classes() {
        assert!(matches!(mass_growth(&Kernel::step(0.25).unwrap().facts()),
            MassGrowth::Exponential { rate_sup, .. } if (rate_sup - 1.0/3.0).abs() < 1e-15));
        assert!(matches!(mass_growth(&Kernel::power_law(1.0, 0.5, 1).unwrap().facts()),
            MassGrowth::Power { lower_exponent, .. } if lower_exponent == 2.0));
        assert_eq!(mass_growth(&Kernel::Zero.facts()), MassGrowth::Linear);
    }

    #[test]
    fn phi_max_exponential() {
        let h = 1e-3;
        let vals: Vec<f64> = (0..=20_000).map(|i| (-(i as f64) * h).exp()).collect();
        let phi = HalfLineProfile::new(vals, h).unwrap();
        let v = phi_max(&phi, 2.0).unwrap();
        // Trapezoid error on the interpolant is O(h²).
        assert!((v - 2.0 * (1.0 - (-1f64).exp())).abs() < 1e-6);
        assert!((v - 1.26424).abs() < 1e-5);
    }

    #[test]
    fn phi_max_small_mass_and_errors() {
        let phi = HalfLineProfile::new(vec![1.0, 0.5, 0.0], 1.0).unwrap();
        assert!(phi_max(&phi, 1e-12).unwrap() < 1e-11);
        assert!(phi_max(&phi, 0.0).is_err());
        assert!(matches!(HalfLineProfile::new(vec![0.5, 1.0], 1.0), Err(Error::Hypothesis(_))));
        // Past the table the profile is zero.
        assert!((phi_max(&phi, 100.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((phi.integral_to(1.5) - (0.75 + 0.5 * 0.5 * (0.5 + 0.25))).abs() < 1e-15);
    }
}

//! Odd advection kernels `K`, their analytic facts and grid sampling.
//!
//! Every kernel is odd, keeps one sign on `(0, ∞)` and is monotone there.
//! Kernels that are non-decreasing on the half-lines (jump `J ≥ 0`) model
//! positive chemotaxis; non-increasing ones (`J ≤ 0`) model chemorepulsion.
//! The value at `x = 0` is fixed to zero and never enters a quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of monotonicity on `(0, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monotonicity {
    NonDecreasing,
    NonIncreasing,
}

/// How a tabulated half-profile continues past its last sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TailExtension {
    #[default]
    Zero,
    Constant,
}

/// Odd kernel given by its half-profile on `(0, ∞)`: `samples[j] = K(j·spacing)`,
/// with `samples[0]` the right limit `K(0⁺)`, linearly interpolated in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedKernel {
    pub samples: Vec<f64>,
    pub spacing: f64,
    pub monotonicity: Monotonicity,
    #[serde(default)]
    pub tail: TailExtension,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case")]
pub enum Kernel {
    Zero,
    /// `K(x) = -χ sign(x) e^{-|x|/√d} / (2d)`.
    KellerSegel { chi: f64, d: f64 },
    /// `K(x) = -(J/2) sign(x) (1 - |x|/R)_+`, jump `J` and support `[-R, R]`.
    CompactBump { jump: f64, support_radius: f64 },
    /// `K(x) = sign · sign(x) · A (1 + |x|)^{-α}` with `α ∈ (0, 1)`.
    PowerLaw {
        amplitude: f64,
        alpha: f64,
        #[serde(default = "positive_sign")]
        sign: i8,
    },
    /// `K(x) = K_∞ sign(x)`.
    Step { k_inf: f64 },
    Tabulated(TabulatedKernel),
}

fn positive_sign() -> i8 {
    1
}

/// Set of exponents `p` with `K ∈ L^p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LpRange {
    /// Every `p ∈ [1, ∞]`.
    All,
    /// `p ∈ (p0, ∞]`.
    Above(f64),
    /// Only `p = ∞`.
    InfinityOnly,
}

impl LpRange {
    pub fn contains(&self, p: f64) -> bool {
        match *self {
            LpRange::All => p >= 1.0,
            LpRange::Above(p0) => p > p0,
            LpRange::InfinityOnly => p.is_infinite(),
        }
    }
}

impl std::fmt::Display for LpRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LpRange::All => write!(f, "[1,inf]"),
            LpRange::Above(p0) => write!(f, "({p0},inf]"),
            LpRange::InfinityOnly => write!(f, "{{inf}}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelFacts {
    /// `J = lim_{x→0⁻} 2K(x)`.
    pub jump: f64,
    /// `‖K‖₁`, `+∞` when not integrable.
    pub l1_norm: f64,
    pub lp: LpRange,
    /// `‖K̄‖₁` for the antiderivative vanishing at `±∞`; `None` when `K̄ ∉ L¹`.
    pub kbar_l1: Option<f64>,
    /// `lim_{x→+∞} |K(x)|`.
    pub k_inf: f64,
    pub power_alpha: Option<f64>,
}

impl Kernel {
    pub fn keller_segel(chi: f64, d: f64) -> Result<Self> {
        let k = Kernel::KellerSegel { chi, d };
        k.validate()?;
        Ok(k)
    }

    pub fn compact_bump(jump: f64, support_radius: f64) -> Result<Self> {
        let k = Kernel::CompactBump {
            jump,
            support_radius,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn power_law(amplitude: f64, alpha: f64, sign: i8) -> Result<Self> {
        let k = Kernel::PowerLaw {
            amplitude,
            alpha,
            sign,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn step(k_inf: f64) -> Result<Self> {
        let k = Kernel::Step { k_inf };
        k.validate()?;
        Ok(k)
    }

    pub fn tabulated(
        samples: Vec<f64>,
        spacing: f64,
        monotonicity: Monotonicity,
        tail: TailExtension,
    ) -> Result<Self> {
        let k = Kernel::Tabulated(TabulatedKernel {
            samples,
            spacing,
            monotonicity,
            tail,
        });
        k.validate()?;
        Ok(k)
    }

    /// Checks parameter ranges and, for tabulated kernels, the declared sign and
    /// monotonicity of the half-profile.
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            Kernel::Zero => Ok(()),
            Kernel::KellerSegel { chi, d } => {
                finite_pos("chi", *chi)?;
                finite_pos("d", *d)
            }
            Kernel::CompactBump {
                jump,
                support_radius,
            } => {
                if !jump.is_finite() {
                    return Err(Error::param("jump must be finite"));
                }
                finite_pos("support_radius", *support_radius)
            }
            Kernel::PowerLaw {
                amplitude,
                alpha,
                sign,
            } => {
                finite_pos("amplitude", *amplitude)?;
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::param(format!("alpha must lie in (0,1), got {alpha}")));
                }
                if *sign != 1 && *sign != -1 {
                    return Err(Error::param(format!("sign must be +1 or -1, got {sign}")));
                }
                Ok(())
            }
            Kernel::Step { k_inf } => finite_pos("k_inf", *k_inf),
            Kernel::Tabulated(t) => t.validate(),
        }
    }

    /// Point value `K(x)`, with `K(0) = 0`.
    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else if x > 0.0 {
            self.eval_positive(x)
        } else {
            -self.eval_positive(-x)
        }
    }

    fn eval_positive(&self, y: f64) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::KellerSegel { chi, d } => -chi * (-y / d.sqrt()).exp() / (2.0 * d),
            Kernel::CompactBump {
                jump,
                support_radius,
            } => -0.5 * jump * (1.0 - y / support_radius).max(0.0),
            Kernel::PowerLaw {
                amplitude,
                alpha,
                sign,
            } => f64::from(*sign) * amplitude * (1.0 + y).powf(-alpha),
            Kernel::Step { k_inf } => *k_inf,
            Kernel::Tabulated(t) => t.eval_positive(y),
        }
    }

    /// Half-line monotonicity; `None` for the zero kernel, which is both.
    pub fn monotonicity(&self) -> Option<Monotonicity> {
        match self {
            Kernel::Zero => None,
            Kernel::KellerSegel { .. } => Some(Monotonicity::NonDecreasing),
            Kernel::CompactBump { jump, .. } => Some(if *jump >= 0.0 {
                Monotonicity::NonDecreasing
            } else {
                Monotonicity::NonIncreasing
            }),
            Kernel::PowerLaw { sign, .. } => Some(if *sign > 0 {
                Monotonicity::NonIncreasing
            } else {
                Monotonicity::NonDecreasing
            }),
            Kernel::Step { .. } => Some(Monotonicity::NonIncreasing),
            Kernel::Tabulated(t) => Some(t.monotonicity),
        }
    }

    pub fn facts(&self) -> KernelFacts {
        match self {
            Kernel::Zero => KernelFacts {
                jump: 0.0,
                l1_norm: 0.0,
                lp: LpRange::All,
                kbar_l1: Some(0.0),
                k_inf: 0.0,
                power_alpha: None,
            },
            Kernel::KellerSegel { chi, d } => KernelFacts {
                jump: chi / d,
                l1_norm: chi / d.sqrt(),
                lp: LpRange::All,
                kbar_l1: Some(*chi),
                k_inf: 0.0,
                power_alpha: None,
            },
            Kernel::CompactBump {
                jump,
                support_radius: r,
            } => KernelFacts {
                jump: *jump,
                l1_norm: jump.abs() * r / 2.0,
                lp: LpRange::All,
                kbar_l1: Some(jump.abs() * r * r / 6.0),
                k_inf: 0.0,
                power_alpha: None,
            },
            Kernel::PowerLaw {
                amplitude,
                alpha,
                sign,
            } => KernelFacts {
                jump: -2.0 * f64::from(*sign) * amplitude,
                l1_norm: f64::INFINITY,
                lp: LpRange::Above(1.0 / alpha),
                kbar_l1: None,
                k_inf: 0.0,
                power_alpha: Some(*alpha),
            },
            Kernel::Step { k_inf } => KernelFacts {
                jump: -2.0 * k_inf,
                l1_norm: f64::INFINITY,
                lp: LpRange::InfinityOnly,
                kbar_l1: None,
                k_inf: *k_inf,
                power_alpha: None,
            },
            Kernel::Tabulated(t) => t.facts(),
        }
    }

    /// Staggered samples `K(±(k+½)dx)` for `(k+½)dx < half_width`, ordered by position.
    pub fn sample(&self, dx: f64, half_width: f64) -> Result<KernelSamples> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::param(format!("dx must be positive, got {dx}")));
        }
        if !(half_width >= dx) {
            return Err(Error::param(format!(
                "half_width {half_width} must be at least dx {dx}"
            )));
        }
        let per_side = (half_width / dx + 1e-9).floor() as usize;
        let right: Vec<f64> = (0..per_side)
            .map(|k| self.eval_positive((k as f64 + 0.5) * dx))
            .collect();
        let mut values = Vec::with_capacity(2 * per_side);
        values.extend(right.iter().rev().map(|v| -v));
        values.extend_from_slice(&right);
        Ok(KernelSamples { dx, values })
    }

    /// First moments of `K` on the staggered cells `[k·dx, (k+1)·dx]`, `k = 0..cells`:
    /// `(∫ K (1 - s), ∫ K s)` with `s = y/dx - k`. These are the product-integration
    /// weights of `K` against a piecewise-linear profile.
    pub fn cell_moments(&self, dx: f64, from: usize, to: usize) -> Vec<(f64, f64)> {
        (from..to).map(|k| self.cell_moment(dx, k)).collect()
    }

    fn cell_moment(&self, dx: f64, k: usize) -> (f64, f64) {
        let lo = k as f64 * dx;
        let hi = lo + dx;
        match self {
            Kernel::Zero => (0.0, 0.0),
            Kernel::Step { k_inf } => (0.5 * k_inf * dx, 0.5 * k_inf * dx),
            Kernel::Tabulated(t) => {
                // Piecewise linear: split at table nodes, 2-point Gauss is then exact.
                let mut breaks = vec![lo];
                let h = t.spacing;
                let mut j = (lo / h).floor() as usize + 1;
                while (j as f64) * h < hi {
                    breaks.push(j as f64 * h);
                    j += 1;
                }
                breaks.push(hi);
                let mut acc = (0.0, 0.0);
                for w in breaks.windows(2) {
                    let m = gauss_moments(|y| t.eval_positive(y), w[0], w[1], lo, dx, &GAUSS2);
                    acc.0 += m.0;
                    acc.1 += m.1;
                }
                acc
            }
            Kernel::CompactBump { support_radius, .. } if lo < *support_radius && *support_radius < hi => {
                let a = gauss_moments(|y| self.eval_positive(y), lo, *support_radius, lo, dx, &GAUSS8);
                let b = gauss_moments(|y| self.eval_positive(y), *support_radius, hi, lo, dx, &GAUSS8);
                (a.0 + b.0, a.1 + b.1)
            }
            _ => gauss_moments(|y| self.eval_positive(y), lo, hi, lo, dx, &GAUSS8),
        }
    }
}

impl TabulatedKernel {
    fn validate(&self) -> Result<()> {
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::param("tabulated spacing must be positive"));
        }
        if self.samples.len() < 2 {
            return Err(Error::param("tabulated kernel needs at least two samples"));
        }
        if self.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("tabulated samples must be finite"));
        }
        let pos = self.samples.iter().any(|&v| v > 0.0);
        let neg = self.samples.iter().any(|&v| v < 0.0);
        if pos && neg {
            return Err(Error::Hypothesis(
                "tabulated kernel changes sign on (0,inf)".into(),
            ));
        }
        let ok = self.samples.windows(2).all(|w| match self.monotonicity {
            Monotonicity::NonDecreasing => w[1] >= w[0],
            Monotonicity::NonIncreasing => w[1] <= w[0],
        });
        if !ok {
            return Err(Error::Hypothesis(format!(
                "tabulated kernel is not {:?} on (0,inf)",
                self.monotonicity
            )));
        }
        if self.tail == TailExtension::Zero {
            // Dropping to zero after the table must not break monotonicity.
            let consistent = match self.monotonicity {
                Monotonicity::NonIncreasing => !neg,
                Monotonicity::NonDecreasing => !pos,
            };
            if !consistent {
                return Err(Error::Hypothesis(
                    "zero tail is inconsistent with the declared monotonicity".into(),
                ));
            }
        }
        Ok(())
    }

    fn eval_positive(&self, y: f64) -> f64 {
        let s = y / self.spacing;
        let last = self.samples.len() - 1;
        if s >= last as f64 {
            return match self.tail {
                TailExtension::Zero if s > last as f64 => 0.0,
                _ => self.samples[last],
            };
        }
        let j = s.floor() as usize;
        let f = s - j as f64;
        self.samples[j] * (1.0 - f) + self.samples[j + 1] * f
    }

    fn facts(&self) -> KernelFacts {
        let h = self.spacing;
        let last = *self.samples.last().unwrap();
        let infinite_tail = self.tail == TailExtension::Constant && last != 0.0;
        // Sign is constant, so |K| integrates segment by segment (trapezoid is exact).
        let l1_half: f64 = self
            .samples
            .windows(2)
            .map(|w| 0.5 * h * (w[0].abs() + w[1].abs()))
            .sum();
        // ‖K̄‖₁ = 2 ∫₀^∞ y |K(y)| dy for a single-signed odd kernel.
        let first_moment: f64 = self
            .samples
            .windows(2)
            .enumerate()
            .map(|(j, w)| {
                let a = j as f64 * h;
                let (fa, fb) = (w[0].abs(), w[1].abs());
                // ∫_a^{a+h} y (fa + (fb - fa)(y - a)/h) dy
                h * (fa * (a + h / 2.0) + (fb - fa) * (a / 2.0 + h / 3.0))
            })
            .sum();
        KernelFacts {
            jump: -2.0 * self.samples[0],
            l1_norm: if infinite_tail {
                f64::INFINITY
            } else {
                2.0 * l1_half
            },
            lp: if infinite_tail {
                LpRange::InfinityOnly
            } else {
                LpRange::All
            },
            kbar_l1: if infinite_tail {
                None
            } else {
                Some(2.0 * first_moment)
            },
            k_inf: if self.tail == TailExtension::Constant {
                last.abs()
            } else {
                0.0
            },
            power_alpha: None,
        }
    }
}

impl KernelFacts {
    /// True when `K = K̄'` with `K̄ ∈ W^{1,1}`, so the full speed formula applies.
    pub fn has_antiderivative_norm(&self) -> bool {
        self.kbar_l1.is_some() && self.l1_norm.is_finite()
    }
}

/// Odd-symmetric staggered samples of a kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSamples {
    pub dx: f64,
    pub values: Vec<f64>,
}

impl KernelSamples {
    pub fn positions(&self) -> Vec<f64> {
        let m = self.values.len() / 2;
        (0..self.values.len())
            .map(|i| (i as f64 - m as f64 + 0.5) * self.dx)
            .collect()
    }
}

struct GaussRule {
    nodes: &'static [f64],
    weights: &'static [f64],
}

const GAUSS2: GaussRule = GaussRule {
    nodes: &[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8],
    weights: &[1.0, 1.0],
};

const GAUSS8: GaussRule = GaussRule {
    nodes: &[
        -0.960_289_856_497_536_3,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ],
    weights: &[
        0.101_228_536_290_376_26,
        0.222_381_034_453_374_47,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362,
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_47,
        0.101_228_536_290_376_26,
    ],
};

/// `(∫_a^b f (1 - s), ∫_a^b f s)` with `s = (y - cell_lo)/dx`.
fn gauss_moments(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    cell_lo: f64,
    dx: f64,
    rule: &GaussRule,
) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    for (t, w) in rule.nodes.iter().zip(rule.weights) {
        let y = mid + half * t;
        let fy = f(y) * w * half;
        let s = (y - cell_lo) / dx;
        m0 += fy * (1.0 - s);
        m1 += fy * s;
    }
    (m0, m1)
}

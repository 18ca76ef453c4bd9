//! `K*u` and `(K*u)_x` on a uniform grid.
//!
//! `u` is extended by zero outside the grid and interpolated linearly between
//! nodes. The kernel enters through its moments on the staggered cells
//! `[k·dx, (k+1)·dx]`, so the jump at the origin never falls inside a cell.
//! The resulting discrete operator is a Toeplitz sum `c_i = Σ_m w_m u_{i-m}`
//! with odd weights, evaluated either directly or by zero-padded real FFT.

use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::kernel::Kernel;

pub const MIN_NODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(x0: f64, dx: f64, n: usize) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::param(format!("dx must be positive, got {dx}")));
        }
        if n < MIN_NODES {
            return Err(Error::param(format!("grid needs at least {MIN_NODES} nodes, got {n}")));
        }
        if !x0.is_finite() {
            return Err(Error::param("x0 must be finite"));
        }
        Ok(Grid { x0, dx, n })
    }

    /// Cell-centred grid on `[-half_width, half_width]`, symmetric about 0
    /// (nodes at `±dx/2, ±3dx/2, …`).
    pub fn symmetric(half_width: f64, dx: f64) -> Result<Self> {
        let per_side = (half_width / dx).round().max(1.0) as usize;
        Grid::new(-(per_side as f64 - 0.5) * dx, dx, 2 * per_side)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Length covered by the grid cells, `n·dx`.
    pub fn width(&self) -> f64 {
        self.n as f64 * self.dx
    }

    pub fn left_edge(&self) -> f64 {
        self.x0 - 0.5 * self.dx
    }

    pub fn right_edge(&self) -> f64 {
        self.x(self.n - 1) + 0.5 * self.dx
    }

    /// Same spacing, `cells` extra nodes on each side.
    pub fn extended(&self, cells: usize) -> Grid {
        Grid {
            x0: self.x0 - cells as f64 * self.dx,
            dx: self.dx,
            n: self.n + 2 * cells,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::param(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.n
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("field values must be finite"));
        }
        Ok(Field { grid, values, time })
    }

    pub fn from_fn(grid: Grid, time: f64, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n).map(|i| f(grid.x(i))).collect();
        Field { grid, values, time }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Linear interpolation, zero outside the grid's ghost nodes.
    pub fn interpolate(&self, x: f64) -> f64 {
        let s = (x - self.grid.x0) / self.grid.dx;
        let n = self.grid.n as isize;
        let j = s.floor() as isize;
        let f = s - j as f64;
        let at = |k: isize| {
            if (0..n).contains(&k) {
                self.values[k as usize]
            } else {
                0.0
            }
        };
        if j < -1 || j >= n {
            return 0.0;
        }
        at(j) * (1.0 - f) + at(j + 1) * f
    }
}

/// Toeplitz weights `w_m`, `m = 0..n`, for the positive side; `w_{-m} = -w_m`.
fn positive_weights(moments: &[(f64, f64)], n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for (m, wm) in w.iter_mut().enumerate().skip(1) {
        *wm = moments[m].0 + moments[m - 1].1;
    }
    w
}

fn fast_len(min: usize) -> usize {
    let mut best = usize::MAX;
    let mut p2 = 2usize;
    while p2 < 2 * min {
        let mut p3 = p2;
        while p3 < 2 * min {
            let mut p5 = p3;
            while p5 < 2 * min {
                if p5 >= min && p5 < best {
                    best = p5;
                }
                p5 *= 5;
            }
            p3 *= 3;
        }
        p2 *= 2;
    }
    best
}

/// Reusable FFT convolution for one kernel and one grid size.
///
/// Kernel cell moments are cached and only extended when the grid grows.
pub struct Convolver {
    kernel: Kernel,
    dx: f64,
    n: usize,
    moments: Vec<(f64, f64)>,
    weights: Vec<f64>,
    fft_len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    spectrum: Vec<Complex<f64>>,
    scratch_real: Vec<f64>,
    scratch_spec: Vec<Complex<f64>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("kernel", &self.kernel)
            .field("dx", &self.dx)
            .field("n", &self.n)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl Convolver {
    pub fn new(kernel: &Kernel, grid: &Grid) -> Result<Self> {
        if grid.n < MIN_NODES {
            return Err(Error::param(format!("grid needs at least {MIN_NODES} nodes")));
        }
        let mut planner = RealFftPlanner::<f64>::new();
        let fft_len = fast_len(2 * grid.n - 1);
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut c = Convolver {
            kernel: kernel.clone(),
            dx: grid.dx,
            n: 0,
            moments: Vec::new(),
            weights: Vec::new(),
            fft_len,
            forward,
            inverse,
            spectrum: Vec::new(),
            scratch_real: Vec::new(),
            scratch_spec: Vec::new(),
        };
        c.resize(grid)?;
        Ok(c)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Re-sample the kernel for a grid with the same spacing and a new node count.
    pub fn resize(&mut self, grid: &Grid) -> Result<()> {
        if (grid.dx - self.dx).abs() > 1e-15 * self.dx {
            return Err(Error::param("convolver spacing cannot change"));
        }
        if grid.n < MIN_NODES {
            return Err(Error::param(format!("grid needs at least {MIN_NODES} nodes")));
        }
        if grid.n == self.n {
            return Ok(());
        }
        if self.moments.len() < grid.n {
            let extra = self.kernel.cell_moments(self.dx, self.moments.len(), grid.n);
            self.moments.extend(extra);
        }
        self.n = grid.n;
        self.weights = positive_weights(&self.moments, self.n);
        let len = fast_len(2 * self.n - 1);
        if len != self.fft_len || self.spectrum.is_empty() {
            let mut planner = RealFftPlanner::<f64>::new();
            self.fft_len = len;
            self.forward = planner.plan_fft_forward(len);
            self.inverse = planner.plan_fft_inverse(len);
        }
        let mut h = vec![0.0; self.fft_len];
        for m in 1..self.n {
            h[m] = self.weights[m];
            h[self.fft_len - m] = -self.weights[m];
        }
        self.spectrum = self.forward.make_output_vec();
        self.forward
            .process(&mut h, &mut self.spectrum)
            .map_err(|e| Error::Numerical {
                time: f64::NAN,
                reason: format!("fft: {e}"),
            })?;
        self.scratch_real = self.forward.make_input_vec();
        self.scratch_spec = self.forward.make_output_vec();
        Ok(())
    }

    /// `out_i ≈ ∫ K(y) u(x_i - y) dy` at every node.
    pub fn apply(&mut self, u: &[f64], out: &mut [f64]) -> Result<()> {
        if u.len() != self.n || out.len() != self.n {
            return Err(Error::param("convolver length mismatch"));
        }
        if matches!(self.kernel, Kernel::Zero) {
            out.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        self.scratch_real[..self.n].copy_from_slice(u);
        self.scratch_real[self.n..].iter_mut().for_each(|v| *v = 0.0);
        let fft_err = |e: realfft::FftError| Error::Numerical {
            time: f64::NAN,
            reason: format!("fft: {e}"),
        };
        self.forward
            .process(&mut self.scratch_real, &mut self.scratch_spec)
            .map_err(fft_err)?;
        for (a, b) in self.scratch_spec.iter_mut().zip(&self.spectrum) {
            *a *= b;
        }
        self.inverse
            .process(&mut self.scratch_spec, &mut self.scratch_real)
            .map_err(fft_err)?;
        let scale = 1.0 / self.fft_len as f64;
        for (o, v) in out.iter_mut().zip(&self.scratch_real[..self.n]) {
            *o = v * scale;
        }
        Ok(())
    }

    /// Same operator by direct `O(n²)` summation, in a fixed sequential order.
    pub fn apply_direct(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        if u.len() != self.n || out.len() != self.n {
            return Err(Error::param("convolver length mismatch"));
        }
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, uj) in u.iter().enumerate() {
                if i > j {
                    acc += self.weights[i - j] * uj;
                } else if j > i {
                    acc -= self.weights[j - i] * uj;
                }
            }
            *o = acc;
        }
        Ok(())
    }
}

fn check(u: &Field) -> Result<()> {
    if u.grid.n < MIN_NODES {
        return Err(Error::param(format!(
            "grid too small for convolution: {} < {MIN_NODES}",
            u.grid.n
        )));
    }
    if u.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("field must be finite"));
    }
    Ok(())
}

/// `K*u` at every node (FFT path).
pub fn conv(kernel: &Kernel, u: &Field) -> Result<Field> {
    check(u)?;
    let mut c = Convolver::new(kernel, &u.grid)?;
    let mut out = vec![0.0; u.grid.n];
    c.apply(&u.values, &mut out)?;
    Ok(Field {
        grid: u.grid,
        values: out,
        time: u.time,
    })
}

/// `K*u` at every node (direct summation path).
pub fn conv_direct(kernel: &Kernel, u: &Field) -> Result<Field> {
    check(u)?;
    let c = Convolver::new(kernel, &u.grid)?;
    let mut out = vec![0.0; u.grid.n];
    c.apply_direct(&u.values, &mut out)?;
    Ok(Field {
        grid: u.grid,
        values: out,
        time: u.time,
    })
}

/// `(K*u)_x`: centred differences of [`conv`], one-sided second order at the ends.
pub fn conv_dx(kernel: &Kernel, u: &Field) -> Result<Field> {
    let c = conv(kernel, u)?;
    Ok(derivative(&c))
}

/// Second-order first derivative of a nodal field.
pub fn derivative(f: &Field) -> Field {
    let n = f.grid.n;
    let h2 = 2.0 * f.grid.dx;
    let v = &f.values;
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / h2;
    }
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / h2;
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / h2;
    Field {
        grid: f.grid,
        values: d,
        time: f.time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn odd_grid(half: usize, dx: f64) -> Grid {
        Grid::new(-(half as f64) * dx, dx, 2 * half + 1).unwrap()
    }

    #[test]
    fn symmetric_grid_indicator_count() {
        let g = Grid::symmetric(3.0, 0.05).unwrap();
        let f = Field::from_fn(g, 0.0, |x| if x.abs() <= 1.0 { 1.0 } else { 0.0 });
        assert_eq!(f.values.iter().filter(|v| **v == 1.0).count(), 40);
        assert!((g.x(0) + g.x(g.n - 1)).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(Grid::new(0.0, 0.1, 7).is_err());
        assert!(Grid::new(0.0, 0.0, 10).is_err());
        let f = Field {
            grid: Grid { x0: 0.0, dx: 0.1, n: 4 },
            values: vec![0.0; 4],
            time: 0.0,
        };
        assert!(conv(&Kernel::Zero, &f).is_err());
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let g = odd_grid(50, 0.1);
        let u = Field::from_fn(g, 0.0, |x| (-x * x).exp());
        assert!(conv(&Kernel::Zero, &u).unwrap().values.iter().all(|v| *v == 0.0));
        assert!(conv_dx(&Kernel::Zero, &u).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn odd_kernel_even_field_symmetries() {
        let g = odd_grid(200, 0.05);
        let u = Field::from_fn(g, 0.0, |x| (-x * x / 3.0).exp() + 0.5 * (-(x.abs() - 2.0).powi(2)).exp());
        for k in [
            Kernel::keller_segel(0.5, 1.0).unwrap(),
            Kernel::step(0.3).unwrap(),
            Kernel::power_law(1.0, 0.5, 1).unwrap(),
        ] {
            let c = conv(&k, &u).unwrap();
            let n = g.n;
            assert!(c.values[n / 2].abs() < 1e-12);
            for i in 0..n {
                assert!((c.values[i] + c.values[n - 1 - i]).abs() < 1e-12);
            }
            let d = conv_dx(&k, &u).unwrap();
            for i in 0..n {
                assert!((d.values[i] - d.values[n - 1 - i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fast_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in [
            Kernel::keller_segel(0.9, 0.5).unwrap(),
            Kernel::step(1.0).unwrap(),
            Kernel::compact_bump(-0.7, 1.1).unwrap(),
        ] {
            for n in [8usize, 9, 31, 257] {
                let g = Grid::new(-1.0, 0.07, n).unwrap();
                let u = Field::new(g, (0..n).map(|_| rng.gen::<f64>()).collect(), 0.0).unwrap();
                let a = conv(&k, &u).unwrap();
                let b = conv_direct(&k, &u).unwrap();
                let scale = b.max_abs().max(1e-300);
                for (x, y) in a.values.iter().zip(&b.values) {
                    assert!((x - y).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn linearity() {
        let g = odd_grid(100, 0.1);
        let k = Kernel::keller_segel(0.4, 2.0).unwrap();
        let u = Field::from_fn(g, 0.0, |x| (-x * x).exp());
        let v = Field::from_fn(g, 0.0, |x| 1.0 / (1.0 + x * x));
        let w = Field::from_fn(g, 0.0, |x| 2.5 * (-x * x).exp() - 0.75 / (1.0 + x * x));
        let cu = conv(&k, &u).unwrap();
        let cv = conv(&k, &v).unwrap();
        let cw = conv(&k, &w).unwrap();
        for i in 0..g.n {
            assert!((cw.values[i] - (2.5 * cu.values[i] - 0.75 * cv.values[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn step_kernel_is_mass_difference() {
        // For K = K∞ sign(x) the product rule is exact on piecewise-linear data.
        let g = odd_grid(40, 0.1);
        let u = Field::from_fn(g, 0.0, |x| (1.0 - x.abs() / 2.0).max(0.0));
        let c = conv(&Kernel::step(0.5).unwrap(), &u).unwrap();
        for i in 0..g.n {
            let x = g.x(i);
            // ∫ sign(y) u(x-y) dy = mass left of x - mass right of x, for a hat of half-width 2.
            let left = if x <= -2.0 {
                0.0
            } else if x <= 0.0 {
                (x + 2.0).powi(2) / 4.0
            } else {
                2.0 - (2.0 - x.min(2.0)).powi(2) / 4.0
            };
            assert!((c.values[i] - 0.5 * (2.0 * left - 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_is_second_order_at_ends() {
        let g = Grid::new(0.0, 0.01, 50).unwrap();
        let f = Field::from_fn(g, 0.0, |x| x * x);
        let d = derivative(&f);
        for i in 0..g.n {
            assert!((d.values[i] - 2.0 * g.x(i)).abs() < 1e-10);
        }
    }

    #[test]
    fn interpolation_zero_outside() {
        let g = Grid::new(0.0, 1.0, 8).unwrap();
        let f = Field::new(g, vec![1.0; 8], 0.0).unwrap();
        assert_eq!(f.interpolate(-0.5), 0.5);
        assert_eq!(f.interpolate(3.25), 1.0);
        assert_eq!(f.interpolate(7.5), 0.5);
        assert_eq!(f.interpolate(9.0), 0.0);
    }

    #[test]
    fn convolver_resize_matches_fresh() {
        let k = Kernel::power_law(1.0, 0.5, 1).unwrap();
        let g = Grid::symmetric(5.0, 0.1).unwrap();
        let mut c = Convolver::new(&k, &g).unwrap();
        let big = g.extended(17);
        c.resize(&big).unwrap();
        let u: Vec<f64> = big.xs().iter().map(|x| (-x * x).exp()).collect();
        let mut a = vec![0.0; big.n];
        c.apply(&u, &mut a).unwrap();
        let mut fresh = Convolver::new(&k, &big).unwrap();
        let mut b = vec![0.0; big.n];
        fresh.apply(&u, &mut b).unwrap();
        assert_eq!(a, b);
    }
}

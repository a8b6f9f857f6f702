//! Uniform periodic grids and pseudo-spectral differentiation.
//!
//! Fields live on an `n^dim` torus of side `len`. Derivatives are exact for
//! band-limited data; an optional 2/3-rule mask guards nonlinear products.

use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform periodic grid, `dim` in 1..=4 (4 is the space-time box).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub len: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, len: f64) -> Result<Self> {
        if dim == 0 || dim > 4 {
            return Err(Error::Shape(format!("dim must be 1..=4, got {dim}")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Shape(format!("n must be a power of two >= 4, got {n}")));
        }
        if !(len > 0.0) {
            return Err(Error::Shape(format!("box side must be positive, got {len}")));
        }
        Ok(Grid { dim, n, len })
    }

    pub fn dx(&self) -> f64 {
        self.len / self.n as f64
    }

    pub fn num_points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n; self.dim]
    }

    /// Volume element `dx^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Physical coordinates along one axis.
    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| i as f64 * self.dx()).collect()
    }

    /// Integer wavenumber for FFT bin `j`.
    pub fn wavenumber_int(&self, j: usize) -> i64 {
        if j <= self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Physical wavenumbers `2 pi k / L` per FFT bin, Nyquist zeroed.
    pub fn deriv_wavenumbers(&self) -> Vec<f64> {
        let scale = 2.0 * std::f64::consts::PI / self.len;
        (0..self.n)
            .map(|j| {
                if self.n % 2 == 0 && j == self.n / 2 {
                    0.0
                } else {
                    scale * self.wavenumber_int(j) as f64
                }
            })
            .collect()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_lane(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    let fft: Arc<dyn rustfft::Fft<f64>> = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    fft.process(buf);
    if inverse {
        let s = 1.0 / n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

/// In-place FFT of a complex array along one axis (normalized inverse).
pub fn fft_axis(data: &mut ArrayD<Complex64>, axis: usize, inverse: bool) {
    let n = data.shape()[axis];
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    for mut lane in data.lanes_mut(Axis(axis)) {
        for (s, v) in scratch.iter_mut().zip(lane.iter()) {
            *s = *v;
        }
        fft_lane(&mut scratch, inverse);
        for (v, s) in lane.iter_mut().zip(scratch.iter()) {
            *v = *s;
        }
    }
}

/// Full forward FFT of a real array (all axes).
pub fn fft_full(data: &ArrayD<f64>) -> ArrayD<Complex64> {
    let mut c = data.mapv(|x| Complex64::new(x, 0.0));
    for ax in 0..data.ndim() {
        fft_axis(&mut c, ax, false);
    }
    c
}

/// Full inverse FFT, returning the real part.
pub fn ifft_full_real(mut data: ArrayD<Complex64>) -> ArrayD<f64> {
    for ax in 0..data.ndim() {
        fft_axis(&mut data, ax, true);
    }
    data.mapv(|z| z.re)
}

/// Spectral derivative of a real array along `axis` of a periodic box of
/// side `len` (the array's extent along that axis).
pub fn spectral_derivative_axis(data: &ArrayD<f64>, axis: usize, len: f64) -> ArrayD<f64> {
    let n = data.shape()[axis];
    let scale = 2.0 * std::f64::consts::PI / len;
    let mut c = data.mapv(|x| Complex64::new(x, 0.0));
    fft_axis(&mut c, axis, false);
    // multiply each hyperplane j (along `axis`) by i*k_j
    for j in 0..n {
        let k = if n % 2 == 0 && j == n / 2 {
            0.0
        } else if j <= n / 2 {
            scale * j as f64
        } else {
            scale * (j as i64 - n as i64) as f64
        };
        let ik = Complex64::new(0.0, k);
        for v in c.index_axis_mut(Axis(axis), j).iter_mut() {
            *v *= ik;
        }
    }
    fft_axis(&mut c, axis, true);
    c.mapv(|z| z.re)
}

/// Apply the 2/3-rule dealiasing mask along every axis.
pub fn dealias(data: &ArrayD<f64>) -> ArrayD<f64> {
    let mut c = data.mapv(|x| Complex64::new(x, 0.0));
    let ndim = data.ndim();
    for ax in 0..ndim {
        fft_axis(&mut c, ax, false);
    }
    for ax in 0..ndim {
        let n = c.shape()[ax];
        let cut = n as i64 / 3;
        for j in 0..n {
            let k = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
            if k.abs() > cut {
                for v in c.index_axis_mut(Axis(ax), j).iter_mut() {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
    for ax in 0..ndim {
        fft_axis(&mut c, ax, true);
    }
    c.mapv(|z| z.re)
}

/// Scalar field on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub data: ArrayD<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            data: ArrayD::zeros(IxDyn(&grid.shape())),
        }
    }

    pub fn constant(grid: Grid, v: f64) -> Self {
        ScalarField {
            grid,
            data: ArrayD::from_elem(IxDyn(&grid.shape()), v),
        }
    }

    /// Sample a function of the coordinate vector.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let shape = grid.shape();
        let dx = grid.dx();
        let mut data = ArrayD::zeros(IxDyn(&shape));
        for (idx, v) in data.indexed_iter_mut() {
            let x: Vec<f64> = (0..grid.dim).map(|a| idx[a] as f64 * dx).collect();
            *v = f(&x);
        }
        ScalarField { grid, data }
    }

    /// Spectral partial derivative along a spatial axis (0-based).
    pub fn derivative(&self, axis: usize) -> ScalarField {
        assert!(axis < self.grid.dim, "axis {axis} out of range");
        ScalarField {
            grid: self.grid,
            data: spectral_derivative_axis(&self.data, axis, self.grid.len),
        }
    }

    pub fn dealiased(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: dealias(&self.data),
        }
    }

    pub fn linf(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// L2 norm with the volume element (an integral norm).
    pub fn l2(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

macro_rules! field_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl std::ops::$trait<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                assert_eq!(self.grid, rhs.grid, "grid mismatch");
                ScalarField { grid: self.grid, data: &self.data $op &rhs.data }
            }
        }
    };
}
field_binop!(Add, add, +);
field_binop!(Sub, sub, -);
field_binop!(Mul, mul, *);

impl std::ops::Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: &self.data * rhs,
        }
    }
}

impl std::ops::Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: -&self.data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn derivative_of_fourier_mode() {
        let grid = Grid::new(1, 64, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(grid, |x| x[0].sin());
        let df = f.derivative(0);
        let exact = ScalarField::from_fn(grid, |x| x[0].cos());
        let err = (&df - &exact).linf();
        assert!(err < 1e-12, "err = {err}");
    }

    #[test]
    fn derivative_with_box_scaling() {
        let len = 3.0;
        let grid = Grid::new(1, 64, len).unwrap();
        let f = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0] / len).sin());
        let df = f.derivative(0);
        let exact = ScalarField::from_fn(grid, |x| 2.0 * PI / len * (2.0 * PI * x[0] / len).cos());
        assert!((&df - &exact).linf() < 1e-12);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let f = ScalarField::constant(grid, 3.25);
        assert!(f.derivative(0).linf() < 1e-13);
        assert!(f.derivative(1).linf() < 1e-13);
    }

    /// 8th-order central differences as an independent oracle on random
    /// band-limited data.
    #[test]
    fn derivative_matches_high_order_fd() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 128;
        let grid = Grid::new(1, n, 2.0 * PI).unwrap();
        // band-limited: modes up to 8
        let coeffs: Vec<(f64, f64, f64)> = (1..=8)
            .map(|k| (k as f64, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = ScalarField::from_fn(grid, |x| {
            coeffs
                .iter()
                .map(|(k, a, b)| a * (k * x[0]).sin() + b * (k * x[0]).cos())
                .sum()
        });
        let df = f.derivative(0);
        // 8th-order stencil: (4/5, -1/5, 4/105, -1/280)/dx for offsets 1..4
        let w = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        let dx = grid.dx();
        let data = f.data.as_slice().unwrap();
        let mut max_err = 0.0f64;
        for i in 0..n {
            let mut acc = 0.0;
            for (m, wm) in w.iter().enumerate() {
                let off = m + 1;
                acc += wm * (data[(i + off) % n] - data[(i + n - off) % n]);
            }
            let fd = acc / dx;
            max_err = max_err.max((fd - df.data.as_slice().unwrap()[i]).abs());
        }
        // error should be ~ C dx^8 with C ~ max|f^(9)| ~ 8^9 here
        assert!(max_err < 8f64.powi(9) * dx.powi(8), "max_err = {max_err}");
        assert!(max_err > 1e-13); // FD is genuinely less accurate: oracle nontrivial
    }

    #[test]
    fn parseval() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let grid = Grid::new(2, 32, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(grid, |_| rng.gen_range(-1.0..1.0));
        let phys: f64 = f.data.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume();
        let spec = fft_full(&f.data);
        let npts = grid.num_points() as f64;
        let freq: f64 = spec.iter().map(|z| z.norm_sqr()).sum::<f64>() / npts * grid.cell_volume();
        assert_relative_eq!(phys, freq, max_relative = 1e-12);
    }

    #[test]
    fn dealias_removes_high_modes_only() {
        let grid = Grid::new(1, 32, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(grid, |x| (3.0 * x[0]).sin() + (14.0 * x[0]).cos());
        let g = f.dealiased();
        let keep = ScalarField::from_fn(grid, |x| (3.0 * x[0]).sin());
        assert!((&g - &keep).linf() < 1e-12);
    }
}

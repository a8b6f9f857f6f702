//! A small commutative-algebra abstraction so every tensor identity in the
//! crate is transcribed exactly once and evaluated on two substrates:
//!
//! * [`JetAlgebra`]  — truncated Taylor polynomials at a point (exact);
//! * [`BlockAlgebra`] — space-time grid blocks (spectral in space,
//!   high-order central differences in time).
//!
//! Time is always axis 0; spatial axes follow.

use ndarray::{ArrayD, Axis, IxDyn};

use crate::grid::spectral_derivative_axis;
use crate::taylor::TaylorPoly;

/// Derivative supplier for analytic scalar composition: `f(c, k)` returns
/// the k-th derivative of the function at `c`. Pointwise substrates only
/// call `k = 0`.
pub type DerivFn<'a> = &'a dyn Fn(f64, usize) -> f64;

pub trait Algebra: Copy {
    type F: Clone;

    fn zero(&self) -> Self::F;
    fn constant(&self, v: f64) -> Self::F;
    fn add(&self, a: &Self::F, b: &Self::F) -> Self::F;
    fn sub(&self, a: &Self::F, b: &Self::F) -> Self::F;
    fn mul(&self, a: &Self::F, b: &Self::F) -> Self::F;
    fn neg(&self, a: &Self::F) -> Self::F;
    fn scale(&self, a: &Self::F, s: f64) -> Self::F;
    /// Partial derivative; axis 0 is time.
    fn diff(&self, a: &Self::F, axis: usize) -> Self::F;
    /// Compose with an analytic scalar function.
    fn compose(&self, a: &Self::F, derivs: DerivFn) -> Self::F;
    /// Magnitude used in relative-residual denominators.
    fn max_abs(&self, a: &Self::F) -> f64;

    fn add_assign(&self, acc: &mut Self::F, term: &Self::F) {
        *acc = self.add(acc, term);
    }
}

/// Plain f64 substrate for pointwise evaluation of the same generic
/// formulas (no derivatives available).
#[derive(Debug, Clone, Copy, Default)]
pub struct ScalarAlgebra;

impl Algebra for ScalarAlgebra {
    type F = f64;

    fn zero(&self) -> f64 {
        0.0
    }
    fn constant(&self, v: f64) -> f64 {
        v
    }
    fn add(&self, a: &f64, b: &f64) -> f64 {
        a + b
    }
    fn sub(&self, a: &f64, b: &f64) -> f64 {
        a - b
    }
    fn mul(&self, a: &f64, b: &f64) -> f64 {
        a * b
    }
    fn neg(&self, a: &f64) -> f64 {
        -a
    }
    fn scale(&self, a: &f64, s: f64) -> f64 {
        a * s
    }
    fn diff(&self, _a: &f64, _axis: usize) -> f64 {
        unreachable!("pointwise substrate has no derivatives")
    }
    fn compose(&self, a: &f64, derivs: DerivFn) -> f64 {
        derivs(*a, 0)
    }
    fn max_abs(&self, a: &f64) -> f64 {
        a.abs()
    }
}

/// Exact substrate: truncated Taylor polynomials at a base point.
#[derive(Debug, Clone, Copy)]
pub struct JetAlgebra {
    pub trunc: usize,
}

impl Algebra for JetAlgebra {
    type F = TaylorPoly;

    fn zero(&self) -> TaylorPoly {
        TaylorPoly::zero(self.trunc)
    }
    fn constant(&self, v: f64) -> TaylorPoly {
        TaylorPoly::constant(self.trunc, v)
    }
    fn add(&self, a: &TaylorPoly, b: &TaylorPoly) -> TaylorPoly {
        a.add(b)
    }
    fn sub(&self, a: &TaylorPoly, b: &TaylorPoly) -> TaylorPoly {
        a.sub(b)
    }
    fn mul(&self, a: &TaylorPoly, b: &TaylorPoly) -> TaylorPoly {
        a.mul(b)
    }
    fn neg(&self, a: &TaylorPoly) -> TaylorPoly {
        a.neg()
    }
    fn scale(&self, a: &TaylorPoly, s: f64) -> TaylorPoly {
        a.scale(s)
    }
    fn diff(&self, a: &TaylorPoly, axis: usize) -> TaylorPoly {
        a.diff(axis)
    }
    fn compose(&self, a: &TaylorPoly, derivs: DerivFn) -> TaylorPoly {
        let c = a.value();
        let d: Vec<f64> = (0..=self.trunc).map(|k| derivs(c, k)).collect();
        a.compose(&d)
    }
    fn max_abs(&self, a: &TaylorPoly) -> f64 {
        a.max_abs_through(a.ord)
    }
}

/// Geometry of a space-time block: `nt` slices at spacing `dt` over an
/// `n^dim` periodic spatial torus of side `len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockGrid {
    pub nt: usize,
    pub dim: usize,
    pub n: usize,
    pub len: f64,
    pub dt: f64,
}

impl BlockGrid {
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.nt];
        s.extend(std::iter::repeat(self.n).take(self.dim));
        s
    }
}

/// Field on a block. `taint` counts slices at each temporal edge whose
/// values have passed through one-sided time stencils; norms skip them.
#[derive(Debug, Clone)]
pub struct BlockField {
    pub data: ArrayD<f64>,
    pub taint: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct BlockAlgebra {
    pub grid: BlockGrid,
}

impl BlockAlgebra {
    pub fn field_from_slices(&self, slices: Vec<ArrayD<f64>>) -> BlockField {
        assert_eq!(slices.len(), self.grid.nt);
        let mut data = ArrayD::zeros(IxDyn(&self.grid.shape()));
        for (t, s) in slices.into_iter().enumerate() {
            data.index_axis_mut(Axis(0), t).assign(&s);
        }
        BlockField { data, taint: 0 }
    }

    /// Range of time slices untouched by edge stencils.
    pub fn clean_range(&self, f: &BlockField) -> std::ops::Range<usize> {
        let t = f.taint.min(self.grid.nt / 2);
        t..(self.grid.nt - t)
    }

    /// L2 norm (integral, per clean slice count) over the clean region.
    pub fn l2_clean(&self, f: &BlockField) -> f64 {
        let r = self.clean_range(f);
        let mut acc = 0.0;
        let mut cnt = 0usize;
        for t in r {
            let sl = f.data.index_axis(Axis(0), t);
            acc += sl.iter().map(|v| v * v).sum::<f64>();
            cnt += sl.len();
        }
        let dv = (self.grid.len / self.grid.n as f64).powi(self.grid.dim as i32);
        (acc / cnt.max(1) as f64 * dv * self.grid.n.pow(self.grid.dim as u32) as f64).sqrt()
    }

    /// 4th-order time derivative: central inside, one-sided at the edges.
    fn diff_time(&self, a: &BlockField) -> BlockField {
        let nt = self.grid.nt;
        assert!(nt >= 5, "need at least 5 time slices for the stencil");
        let inv = 1.0 / (12.0 * self.grid.dt);
        let mut out = ArrayD::zeros(a.data.raw_dim());
        let get = |t: usize| a.data.index_axis(Axis(0), t);
        for t in 0..nt {
            let mut sl = out.index_axis_mut(Axis(0), t);
            if t >= 2 && t + 2 < nt {
                sl.assign(
                    &(&get(t - 2) * 1.0 - &get(t - 1) * 8.0 + &get(t + 1) * 8.0 - &get(t + 2) * 1.0),
                );
            } else if t == 0 {
                sl.assign(
                    &(&get(0) * -25.0 + &get(1) * 48.0 - &get(2) * 36.0 + &get(3) * 16.0
                        - &get(4) * 3.0),
                );
            } else if t == 1 {
                sl.assign(
                    &(&get(0) * -3.0 - &get(1) * 10.0 + &get(2) * 18.0 - &get(3) * 6.0
                        + &get(4) * 1.0),
                );
            } else if t == nt - 2 {
                sl.assign(
                    &(&get(nt - 5) * -1.0 + &get(nt - 4) * 6.0 - &get(nt - 3) * 18.0
                        + &get(nt - 2) * 10.0
                        + &get(nt - 1) * 3.0),
                );
            } else {
                sl.assign(
                    &(&get(nt - 5) * 3.0 - &get(nt - 4) * 16.0 + &get(nt - 3) * 36.0
                        - &get(nt - 2) * 48.0
                        + &get(nt - 1) * 25.0),
                );
            }
        }
        out *= inv;
        BlockField {
            data: out,
            taint: a.taint + 2,
        }
    }
}

impl Algebra for BlockAlgebra {
    type F = BlockField;

    fn zero(&self) -> BlockField {
        BlockField {
            data: ArrayD::zeros(IxDyn(&self.grid.shape())),
            taint: 0,
        }
    }
    fn constant(&self, v: f64) -> BlockField {
        BlockField {
            data: ArrayD::from_elem(IxDyn(&self.grid.shape()), v),
            taint: 0,
        }
    }
    fn add(&self, a: &BlockField, b: &BlockField) -> BlockField {
        BlockField {
            data: &a.data + &b.data,
            taint: a.taint.max(b.taint),
        }
    }
    fn sub(&self, a: &BlockField, b: &BlockField) -> BlockField {
        BlockField {
            data: &a.data - &b.data,
            taint: a.taint.max(b.taint),
        }
    }
    fn mul(&self, a: &BlockField, b: &BlockField) -> BlockField {
        BlockField {
            data: &a.data * &b.data,
            taint: a.taint.max(b.taint),
        }
    }
    fn neg(&self, a: &BlockField) -> BlockField {
        BlockField {
            data: -&a.data,
            taint: a.taint,
        }
    }
    fn scale(&self, a: &BlockField, s: f64) -> BlockField {
        BlockField {
            data: &a.data * s,
            taint: a.taint,
        }
    }
    fn diff(&self, a: &BlockField, axis: usize) -> BlockField {
        if axis == 0 {
            self.diff_time(a)
        } else if axis <= self.grid.dim {
            BlockField {
                data: spectral_derivative_axis(&a.data, axis, self.grid.len),
                taint: a.taint,
            }
        } else {
            // fields do not vary along axes the box does not have
            BlockField {
                data: ArrayD::zeros(a.data.raw_dim()),
                taint: a.taint,
            }
        }
    }
    fn compose(&self, a: &BlockField, derivs: DerivFn) -> BlockField {
        BlockField {
            data: a.data.mapv(|x| derivs(x, 0)),
            taint: a.taint,
        }
    }
    fn max_abs(&self, a: &BlockField) -> f64 {
        let r = self.clean_range(a);
        let mut m = 0.0f64;
        for t in r {
            for v in a.data.index_axis(Axis(0), t).iter() {
                m = m.max(v.abs());
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_of(f: impl Fn(f64, f64) -> f64, nt: usize, n: usize, dt: f64, len: f64) -> (BlockAlgebra, BlockField) {
        let alg = BlockAlgebra {
            grid: BlockGrid { nt, dim: 1, n, len, dt },
        };
        let mut data = ArrayD::zeros(IxDyn(&[nt, n]));
        for t in 0..nt {
            for i in 0..n {
                data[[t, i]] = f(t as f64 * dt, i as f64 * len / n as f64);
            }
        }
        (alg, BlockField { data, taint: 0 })
    }

    #[test]
    fn time_derivative_is_fourth_order() {
        let f = |t: f64, x: f64| (x + 0.3).sin() * (2.0 * t).cos();
        let df = |t: f64, x: f64| -2.0 * (x + 0.3).sin() * (2.0 * t).sin();
        let mut errs = Vec::new();
        for &dt in &[0.02, 0.01] {
            let (alg, b) = block_of(f, 9, 16, dt, 2.0 * std::f64::consts::PI);
            let d = alg.diff(&b, 0);
            // compare on clean central slices
            let mut err = 0.0f64;
            for t in alg.clean_range(&d) {
                for i in 0..16 {
                    let x = i as f64 * 2.0 * std::f64::consts::PI / 16.0;
                    err = err.max((d.data[[t, i]] - df(t as f64 * dt, x)).abs());
                }
            }
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.7, "observed temporal FD order {order}");
    }

    #[test]
    fn mixed_partials_commute() {
        let (alg, b) = block_of(|t, x| (x).sin() * t * t, 9, 16, 0.05, 2.0 * std::f64::consts::PI);
        let a1 = alg.diff(&alg.diff(&b, 0), 1);
        let a2 = alg.diff(&alg.diff(&b, 1), 0);
        let d = alg.sub(&a1, &a2);
        assert!(alg.max_abs(&d) < 1e-11);
    }

    #[test]
    fn taint_tracks_nested_time_diffs() {
        let (alg, b) = block_of(|t, x| x.cos() * t, 17, 8, 0.1, 2.0 * std::f64::consts::PI);
        let d2 = alg.diff(&alg.diff(&b, 0), 0);
        assert_eq!(d2.taint, 4);
        assert_eq!(alg.clean_range(&d2), 4..13);
    }
}

/// Fully periodic space-time substrate (axis 0 included): used by the
/// velocity-split checks where the trajectory window is blended to a
/// time-periodic state.
#[derive(Debug, Clone, Copy)]
pub struct Box4Algebra {
    pub nt: usize,
    pub dim: usize,
    pub n: usize,
    pub len_t: f64,
    pub len_x: f64,
}

impl Box4Algebra {
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.nt];
        s.extend(std::iter::repeat(self.n).take(self.dim));
        s
    }
}

impl Algebra for Box4Algebra {
    type F = ArrayD<f64>;

    fn zero(&self) -> ArrayD<f64> {
        ArrayD::zeros(IxDyn(&self.shape()))
    }
    fn constant(&self, v: f64) -> ArrayD<f64> {
        ArrayD::from_elem(IxDyn(&self.shape()), v)
    }
    fn add(&self, a: &ArrayD<f64>, b: &ArrayD<f64>) -> ArrayD<f64> {
        a + b
    }
    fn sub(&self, a: &ArrayD<f64>, b: &ArrayD<f64>) -> ArrayD<f64> {
        a - b
    }
    fn mul(&self, a: &ArrayD<f64>, b: &ArrayD<f64>) -> ArrayD<f64> {
        a * b
    }
    fn neg(&self, a: &ArrayD<f64>) -> ArrayD<f64> {
        -a
    }
    fn scale(&self, a: &ArrayD<f64>, s: f64) -> ArrayD<f64> {
        a * s
    }
    fn diff(&self, a: &ArrayD<f64>, axis: usize) -> ArrayD<f64> {
        if axis == 0 {
            spectral_derivative_axis(a, 0, self.len_t)
        } else if axis <= self.dim {
            spectral_derivative_axis(a, axis, self.len_x)
        } else {
            ArrayD::zeros(a.raw_dim())
        }
    }
    fn compose(&self, a: &ArrayD<f64>, derivs: DerivFn) -> ArrayD<f64> {
        a.mapv(|x| derivs(x, 0))
    }
    fn max_abs(&self, a: &ArrayD<f64>) -> f64 {
        a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

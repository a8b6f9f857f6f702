//! The space-time elliptic operator `P = I - (m^{bg} + 2 u^b u^g) d2_{bg}`
//! on a fully periodic 4-box, inverted by conjugate gradients with the
//! constant-coefficient operator at the mean state as an FFT
//! preconditioner; the velocity split `u = u_+ + u_-` rides on top.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{fft_axis, fft_full, ifft_full_real, spectral_derivative_axis};
use crate::minkowski::sig;

/// Fully periodic space-time box; axis 0 is time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeBox {
    pub shape: [usize; 4],
    pub len: [f64; 4],
}

impl SpaceTimeBox {
    pub fn cubic(n: usize, len: f64) -> Self {
        SpaceTimeBox {
            shape: [n; 4],
            len: [len; 4],
        }
    }

    pub fn num_points(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.shape[axis];
        let scale = 2.0 * std::f64::consts::PI / self.len[axis];
        (0..n)
            .map(|j| {
                if n % 2 == 0 && j == n / 2 {
                    0.0
                } else if j <= n / 2 {
                    scale * j as f64
                } else {
                    scale * (j as i64 - n as i64) as f64
                }
            })
            .collect()
    }

    pub fn sample(&self, f: impl Fn(&[f64; 4]) -> f64) -> ArrayD<f64> {
        let mut data = ArrayD::zeros(IxDyn(&self.shape));
        for (idx, v) in data.indexed_iter_mut() {
            let x = [
                idx[0] as f64 * self.len[0] / self.shape[0] as f64,
                idx[1] as f64 * self.len[1] / self.shape[1] as f64,
                idx[2] as f64 * self.len[2] / self.shape[2] as f64,
                idx[3] as f64 * self.len[3] / self.shape[3] as f64,
            ];
            *v = f(&x);
        }
        data
    }
}

/// Variable-coefficient operator with the velocity field sampled on the box.
pub struct EllipticOperatorP {
    pub boxg: SpaceTimeBox,
    /// up-index velocity components
    pub u: [ArrayD<f64>; 4],
}

impl EllipticOperatorP {
    pub fn new(boxg: SpaceTimeBox, u: [ArrayD<f64>; 4]) -> Self {
        EllipticOperatorP { boxg, u }
    }

    /// `P f = f - (m^{bg} + 2 u^b u^g) d2_{bg} f` with spectral derivatives.
    pub fn apply(&self, f: &ArrayD<f64>) -> ArrayD<f64> {
        let mut out = f.clone();
        let firsts: Vec<ArrayD<f64>> = (0..4)
            .map(|b| spectral_derivative_axis(f, b, self.boxg.len[b]))
            .collect();
        for b in 0..4 {
            for g in b..4 {
                let d2 = spectral_derivative_axis(&firsts[b], g, self.boxg.len[g]);
                let w = if b == g { 1.0 } else { 2.0 };
                let m = if b == g { sig(b) } else { 0.0 };
                // coefficient field m^{bg} + 2 u^b u^g
                let coef = {
                    let mut c = &self.u[b] * &self.u[g];
                    c *= 2.0;
                    c += m;
                    c
                };
                out = out - w * &(&coef * &d2);
            }
        }
        out
    }

    fn mean_state(&self) -> [f64; 4] {
        let mut m = [0.0; 4];
        for (i, mi) in m.iter_mut().enumerate() {
            *mi = self.u[i].iter().sum::<f64>() / self.u[i].len() as f64;
        }
        // renormalize the mean so the preconditioner is admissible
        let sp = m[1] * m[1] + m[2] * m[2] + m[3] * m[3];
        m[0] = (1.0 + sp).sqrt();
        m
    }

    /// Apply the inverse of the constant-coefficient operator at the mean
    /// state via a 4D FFT (the preconditioner).
    pub fn precondition(&self, r: &ArrayD<f64>) -> ArrayD<f64> {
        let ubar = self.mean_state();
        let mut c = fft_full(r);
        let ks: Vec<Vec<f64>> = (0..4).map(|ax| self.boxg.wavenumbers(ax)).collect();
        // symbol: 1 + (m^{bg} + 2 ubar^b ubar^g) k_b k_g
        for (idx, v) in c.indexed_iter_mut() {
            let k = [ks[0][idx[0]], ks[1][idx[1]], ks[2][idx[2]], ks[3][idx[3]]];
            let mut s = 1.0;
            for b in 0..4 {
                for g in 0..4 {
                    let m = if b == g { sig(b) } else { 0.0 };
                    s += (m + 2.0 * ubar[b] * ubar[g]) * k[b] * k[g];
                }
            }
            *v /= s;
        }
        ifft_full_real(c)
    }

    /// Preconditioned conjugate gradients. Returns the solution together
    /// with the residual history (relative to `|rhs|`).
    pub fn solve(&self, rhs: &ArrayD<f64>, tol: f64, max_iter: usize) -> Result<(ArrayD<f64>, Vec<f64>)> {
        let nrm = |a: &ArrayD<f64>| (a.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let dot = |a: &ArrayD<f64>, b: &ArrayD<f64>| {
            a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>()
        };
        let rhs_norm = nrm(rhs).max(1e-300);
        let mut x = ArrayD::zeros(rhs.raw_dim());
        let mut r = rhs.clone();
        let mut z = self.precondition(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut history = vec![1.0];
        for _ in 0..max_iter {
            let ap = self.apply(&p);
            let denom = dot(&p, &ap);
            if denom.abs() < 1e-300 {
                break;
            }
            let alpha = rz / denom;
            x = &x + &(alpha * &p);
            r = &r - &(alpha * &ap);
            let rel = nrm(&r) / rhs_norm;
            history.push(rel);
            if rel < tol {
                return Ok((x, history));
            }
            z = self.precondition(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p = &z + &(beta * &p);
        }
        Err(Error::NotConverged {
            context: format!("elliptic solve stalled above tol {tol}"),
            history,
        })
    }
}

/// Outcome of the velocity split on a box.
pub struct SplitResult {
    pub u_minus: [ArrayD<f64>; 4],
    pub u_plus: [ArrayD<f64>; 4],
    pub iterations: usize,
    pub final_residual: f64,
}

/// Solve `P u_-^a = e^{-h} W^a` componentwise and set `u_+ = u - u_-`.
pub fn elliptic_split(
    op: &EllipticOperatorP,
    exp_mh: &ArrayD<f64>,
    big_w: &[ArrayD<f64>; 4],
    tol: f64,
    max_iter: usize,
) -> Result<SplitResult> {
    let mut u_minus: [ArrayD<f64>; 4] = [
        ArrayD::zeros(IxDyn(&op.boxg.shape)),
        ArrayD::zeros(IxDyn(&op.boxg.shape)),
        ArrayD::zeros(IxDyn(&op.boxg.shape)),
        ArrayD::zeros(IxDyn(&op.boxg.shape)),
    ];
    let mut iters = 0usize;
    let mut worst = 0.0f64;
    for a in 0..4 {
        let rhs = exp_mh * &big_w[a];
        if rhs.iter().map(|v| v * v).sum::<f64>().sqrt() == 0.0 {
            continue; // zero data: u_-^a stays zero
        }
        let (sol, hist) = op.solve(&rhs, tol, max_iter)?;
        iters = iters.max(hist.len() - 1);
        worst = worst.max(*hist.last().unwrap());
        u_minus[a] = sol;
    }
    let u_plus = [
        &op.u[0] - &u_minus[0],
        &op.u[1] - &u_minus[1],
        &op.u[2] - &u_minus[2],
        &op.u[3] - &u_minus[3],
    ];
    Ok(SplitResult {
        u_minus,
        u_plus,
        iterations: iters,
        final_residual: worst,
    })
}

/// Mixed space-time Sobolev norm `L^2_t H^a_x`: the weight applies to the
/// spatial frequencies only.
pub fn l2t_hax_norm(boxg: &SpaceTimeBox, f: &ArrayD<f64>, a: f64) -> f64 {
    let c = fft_full(f);
    let ks: Vec<Vec<f64>> = (0..4).map(|ax| boxg.wavenumbers(ax)).collect();
    let mut acc = 0.0;
    for (idx, v) in c.indexed_iter() {
        let kx2 = ks[1][idx[1]].powi(2) + ks[2][idx[2]].powi(2) + ks[3][idx[3]].powi(2);
        acc += (1.0 + kx2).powf(a) * v.norm_sqr();
    }
    (acc / boxg.num_points() as f64).sqrt()
}

/// Random band-limited real field on the box (modes up to `kmax` per axis).
pub fn random_band_limited(
    boxg: &SpaceTimeBox,
    kmax: usize,
    rng: &mut impl rand::Rng,
) -> ArrayD<f64> {
    let mut c: ArrayD<Complex64> = ArrayD::zeros(IxDyn(&boxg.shape));
    for (idx, v) in c.indexed_iter_mut() {
        let ok = (0..4).all(|ax| {
            let n = boxg.shape[ax];
            let k = if idx[ax] <= n / 2 {
                idx[ax] as i64
            } else {
                idx[ax] as i64 - n as i64
            };
            k.unsigned_abs() as usize <= kmax
        });
        if ok {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    for ax in 0..4 {
        fft_axis(&mut c, ax, true);
    }
    // keep the real part; it is band-limited with real spectrum symmetrized implicitly
    c.mapv(|z| z.re)
}

/// Empirical version of the a-priori bound: max over draws of
/// `|v|_{L2 H^a} / |P v|_{L2 H^{a-2}}`.
pub fn empirical_ellipticity_constant(
    op: &EllipticOperatorP,
    a: f64,
    draws: usize,
    kmax: usize,
    seed: u64,
) -> f64 {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let v = random_band_limited(&op.boxg, kmax, &mut rng);
        let pv = op.apply(&v);
        let num = l2t_hax_norm(&op.boxg, &v, a);
        let den = l2t_hax_norm(&op.boxg, &pv, a - 2.0);
        if den > 0.0 {
            worst = worst.max(num / den);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn smooth_velocity(boxg: &SpaceTimeBox, amp: f64) -> [ArrayD<f64>; 4] {
        let u1 = boxg.sample(|x| amp * (x[1]).sin() * (x[0]).cos());
        let u2 = boxg.sample(|x| amp * (x[2] + x[3]).cos());
        let u3 = boxg.sample(|x| amp * (x[1] - x[0]).sin());
        let mut u0 = ArrayD::zeros(IxDyn(&boxg.shape));
        ndarray::Zip::from(&mut u0)
            .and(&u1)
            .and(&u2)
            .and(&u3)
            .for_each(|o, &a, &b, &c| *o = (1.0 + a * a + b * b + c * c).sqrt());
        [u0, u1, u2, u3]
    }

    #[test]
    fn rest_state_apply_matches_symbol() {
        let boxg = SpaceTimeBox::cubic(8, 2.0 * std::f64::consts::PI);
        let u = [
            boxg.sample(|_| 1.0),
            boxg.sample(|_| 0.0),
            boxg.sample(|_| 0.0),
            boxg.sample(|_| 0.0),
        ];
        let op = EllipticOperatorP::new(boxg, u);
        // P e_k = (1 + k_t^2 + |k_x|^2) e_k at rest (coefficients diag(1,1,1,1))
        let f = boxg.sample(|x| (x[0]).cos() * (2.0 * x[1]).sin());
        let pf = op.apply(&f);
        let expect = boxg.sample(|x| (1.0 + 1.0 + 4.0) * (x[0]).cos() * (2.0 * x[1]).sin());
        let err = (&pf - &expect).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-11, "symbol mismatch {err}");
    }

    #[test]
    fn zero_rhs_gives_zero_split() {
        let boxg = SpaceTimeBox::cubic(8, 2.0 * std::f64::consts::PI);
        let u = smooth_velocity(&boxg, 0.1);
        let op = EllipticOperatorP::new(boxg, u);
        let z = ArrayD::zeros(IxDyn(&boxg.shape));
        let w = [z.clone(), z.clone(), z.clone(), z.clone()];
        let emh = boxg.sample(|_| 1.0);
        let split = elliptic_split(&op, &emh, &w, 1e-10, 50).unwrap();
        for a in 0..4 {
            let m = split.u_minus[a].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert_eq!(m, 0.0);
            let d = (&split.u_plus[a] - &op.u[a])
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn manufactured_solution_recovery() {
        let boxg = SpaceTimeBox::cubic(16, 2.0 * std::f64::consts::PI);
        let u = smooth_velocity(&boxg, 0.15);
        let op = EllipticOperatorP::new(boxg, u);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let v = random_band_limited(&boxg, 3, &mut rng);
        let f = op.apply(&v);
        let (sol, hist) = op.solve(&f, 1e-12, 200).unwrap();
        let num = (&sol - &v).iter().map(|x| x * x).sum::<f64>().sqrt();
        let den = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        println!("cg iters: {}, recovery rel err {:.3e}", hist.len() - 1, num / den);
        assert!(num / den <= 1e-8, "recovery error {}", num / den);
    }

    #[test]
    fn ellipticity_constant_stable_under_refinement() {
        let mut consts = Vec::new();
        for &n in &[8usize, 16] {
            let boxg = SpaceTimeBox::cubic(n, 2.0 * std::f64::consts::PI);
            let u = smooth_velocity(&boxg, 0.1);
            let op = EllipticOperatorP::new(boxg, u);
            consts.push(empirical_ellipticity_constant(&op, 1.0, 10, 2, 77));
        }
        let ratio = consts[1] / consts[0];
        assert!(
            (0.75..=1.3333).contains(&ratio),
            "constant drifted: {consts:?}"
        );
    }
}

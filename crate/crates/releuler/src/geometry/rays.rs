//! Null geodesics of the acoustical metric, the adapted null frame on a
//! characteristic surface, and connection coefficients along a flowout
//! bundle.
//!
//! The frame at a point with surface conormal `n` (normalized so the
//! `x3`-slot is 1) is
//!
//! ```text
//! V = g^{-1} n,  sigma = V^0,  l = V / sigma          (dt(l) = 1)
//! e_a: Gram-Schmidt of the slice tangents (0, d_a, n-slot)
//! lbar = l + 2 (dt)^#,  ((dt)^#)^a = g^{a0}
//! ```
//!
//! which satisfies all six frame relations identically once `n` is null;
//! `lbar = l + 2 (dt)^#` is the unique null partner with `<l,lbar> = 2`
//! for any metric with `g^{00} = -1`.

use crate::error::{Error, Result};
use crate::geometry::metric::{metric_and_grad, MetricPoint};

/// Trigonometric scalar field with exact derivatives.
#[derive(Debug, Clone)]
pub struct TrigField {
    pub base: f64,
    /// (amplitude, wave vector over (t,x1,x2,x3), phase)
    pub modes: Vec<(f64, [f64; 4], f64)>,
}

impl TrigField {
    pub fn constant(v: f64) -> Self {
        TrigField { base: v, modes: Vec::new() }
    }

    pub fn eval(&self, x: &[f64; 4]) -> f64 {
        let mut v = self.base;
        for (a, k, p) in &self.modes {
            let phase: f64 = k.iter().zip(x.iter()).map(|(ki, xi)| ki * xi).sum::<f64>() + p;
            v += a * phase.sin();
        }
        v
    }

    pub fn grad(&self, x: &[f64; 4]) -> [f64; 4] {
        let mut g = [0.0; 4];
        for (a, k, p) in &self.modes {
            let phase: f64 = k.iter().zip(x.iter()).map(|(ki, xi)| ki * xi).sum::<f64>() + p;
            let c = a * phase.cos();
            for mu in 0..4 {
                g[mu] += c * k[mu];
            }
        }
        g
    }
}

/// Analytic fluid state: log-enthalpy and spatial velocity as trig fields,
/// `u^0` by normalization. Supplies the metric and its exact gradient at
/// any point.
#[derive(Debug, Clone)]
pub struct AnalyticState {
    pub theta: f64,
    pub h: TrigField,
    pub uvec: [TrigField; 3],
}

impl AnalyticState {
    pub fn rest(theta: f64, h0: f64) -> Self {
        AnalyticState {
            theta,
            h: TrigField::constant(h0),
            uvec: [
                TrigField::constant(0.0),
                TrigField::constant(0.0),
                TrigField::constant(0.0),
            ],
        }
    }

    pub fn metric_at(&self, x: &[f64; 4]) -> (MetricPoint, [[[f64; 4]; 4]; 4]) {
        let h = self.h.eval(x);
        let dh = self.h.grad(x);
        let v = [
            self.uvec[0].eval(x),
            self.uvec[1].eval(x),
            self.uvec[2].eval(x),
        ];
        let u0 = (1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let u = [u0, v[0], v[1], v[2]];
        let mut du = [[0.0; 4]; 4];
        for mu in 0..4 {
            let mut dv = [0.0; 3];
            for i in 0..3 {
                dv[i] = self.uvec[i].grad(x)[mu];
            }
            // du^0 = u^i du^i / u^0
            du[mu][0] = (v[0] * dv[0] + v[1] * dv[1] + v[2] * dv[2]) / u0;
            du[mu][1] = dv[0];
            du[mu][2] = dv[1];
            du[mu][3] = dv[2];
        }
        metric_and_grad(h, dh, u, du, self.theta)
    }
}

/// Hamiltonian `H = g^{ab} xi_a xi_b`.
pub fn hamiltonian(g: &MetricPoint, xi: &[f64; 4]) -> f64 {
    let mut h = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            h += g.g_up[a][b] * xi[a] * xi[b];
        }
    }
    h
}

/// Replace `xi_0` by the future-directed null root (spatial components
/// kept). Returns the projected covector and whether an adjustment
/// exceeding `warn_tol` was needed.
pub fn null_project(g: &MetricPoint, xi: &[f64; 4], warn_tol: f64) -> ([f64; 4], bool) {
    let b: f64 = (1..4).map(|i| g.g_up[0][i] * xi[i]).sum();
    let mut q = 0.0;
    for i in 1..4 {
        for j in 1..4 {
            q += g.g_up[i][j] * xi[i] * xi[j];
        }
    }
    // -xi0^2 + 2 b xi0 + q = 0 ; sigma = -xi0 + b = +sqrt(b^2+q) > 0
    let root = (b * b + q).max(0.0).sqrt();
    let xi0 = b - root;
    let adjusted = (xi0 - xi[0]).abs() > warn_tol;
    ([xi0, xi[1], xi[2], xi[3]], adjusted)
}

/// One point of a traced ray.
#[derive(Debug, Clone, Copy)]
pub struct RaySample {
    pub s: f64,
    pub x: [f64; 4],
    pub xi: [f64; 4],
}

fn ray_rhs(state: &AnalyticState, x: &[f64; 4], xi: &[f64; 4]) -> ([f64; 4], [f64; 4]) {
    let (g, dg) = state.metric_at(x);
    let mut dx = [0.0; 4];
    let mut dxi = [0.0; 4];
    for a in 0..4 {
        for b in 0..4 {
            dx[a] += 2.0 * g.g_up[a][b] * xi[b];
        }
        let mut acc = 0.0;
        for b in 0..4 {
            for c in 0..4 {
                acc += dg[a][b][c] * xi[b] * xi[c];
            }
        }
        dxi[a] = -acc;
    }
    (dx, dxi)
}

/// RK4 Hamiltonian flow in an affine parameter. The initial covector is
/// null-projected; the trace stops after `steps` steps.
pub fn trace_null_geodesic(
    state: &AnalyticState,
    x0: [f64; 4],
    xi0: [f64; 4],
    ds: f64,
    steps: usize,
) -> Result<Vec<RaySample>> {
    let (g0, _) = state.metric_at(&x0);
    let (xi, _) = null_project(&g0, &xi0, 1e-12);
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0;
    let mut p = xi;
    out.push(RaySample { s: 0.0, x, xi: p });
    for k in 0..steps {
        let (k1x, k1p) = ray_rhs(state, &x, &p);
        let xa = add(&x, &k1x, 0.5 * ds);
        let pa = add(&p, &k1p, 0.5 * ds);
        let (k2x, k2p) = ray_rhs(state, &xa, &pa);
        let xb = add(&x, &k2x, 0.5 * ds);
        let pb = add(&p, &k2p, 0.5 * ds);
        let (k3x, k3p) = ray_rhs(state, &xb, &pb);
        let xc = add(&x, &k3x, ds);
        let pc = add(&p, &k3p, ds);
        let (k4x, k4p) = ray_rhs(state, &xc, &pc);
        for a in 0..4 {
            x[a] += ds / 6.0 * (k1x[a] + 2.0 * k2x[a] + 2.0 * k3x[a] + k4x[a]);
            p[a] += ds / 6.0 * (k1p[a] + 2.0 * k2p[a] + 2.0 * k3p[a] + k4p[a]);
            if !x[a].is_finite() {
                return Err(Error::Domain("ray left the finite domain".into()));
            }
        }
        out.push(RaySample {
            s: (k + 1) as f64 * ds,
            x,
            xi: p,
        });
    }
    Ok(out)
}

fn add(a: &[f64; 4], b: &[f64; 4], c: f64) -> [f64; 4] {
    [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2], a[3] + c * b[3]]
}

/// Adapted null frame at a point.
#[derive(Debug, Clone, Copy)]
pub struct NullFrame {
    pub l: [f64; 4],
    pub lbar: [f64; 4],
    pub e1: [f64; 4],
    pub e2: [f64; 4],
    pub sigma: f64,
    /// set when the normalization inner product came out negative and the
    /// future branch was enforced
    pub flipped_branch: bool,
}

fn inner(g: &MetricPoint, x: &[f64; 4], y: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            s += g.g_lo[a][b] * x[a] * y[b];
        }
    }
    s
}

/// Build the frame from the metric and a (nearly) null surface conormal
/// `n` with its `x3` slot normalized to 1. The conormal is re-projected
/// to the null cone first.
pub fn null_frame(g: &MetricPoint, n_in: [f64; 4]) -> Result<NullFrame> {
    let scale = n_in[3];
    if scale.abs() < 1e-12 {
        return Err(Error::Domain("conormal has vanishing x3 slot".into()));
    }
    let n = [n_in[0] / scale, n_in[1] / scale, n_in[2] / scale, 1.0];
    let (n, _) = null_project(g, &n, f64::INFINITY);
    // V = g^{-1} n
    let mut v = [0.0; 4];
    for a in 0..4 {
        for b in 0..4 {
            v[a] += g.g_up[a][b] * n[b];
        }
    }
    let sigma = v[0];
    let flipped_branch = sigma < 0.0;
    let s = if sigma == 0.0 {
        return Err(Error::Domain("degenerate conormal: dt(V) = 0".into()));
    } else {
        sigma
    };
    let l = [v[0] / s, v[1] / s, v[2] / s, v[3] / s];
    // slice tangents: v_a = (0, delta_1a, delta_2a, d_a phi) with d_a phi = -n_a
    let t1 = [0.0, 1.0, 0.0, -n[1]];
    let t2 = [0.0, 0.0, 1.0, -n[2]];
    let n1 = inner(g, &t1, &t1).sqrt();
    let e1 = [t1[0] / n1, t1[1] / n1, t1[2] / n1, t1[3] / n1];
    let c = inner(g, &t2, &e1);
    let mut w = [0.0; 4];
    for a in 0..4 {
        w[a] = t2[a] - c * e1[a];
    }
    let n2 = inner(g, &w, &w).sqrt();
    let e2 = [w[0] / n2, w[1] / n2, w[2] / n2, w[3] / n2];
    // lbar = l + 2 (dt)^# with ((dt)^#)^a = g^{a0}
    let lbar = [
        l[0] + 2.0 * g.g_up[0][0],
        l[1] + 2.0 * g.g_up[1][0],
        l[2] + 2.0 * g.g_up[2][0],
        l[3] + 2.0 * g.g_up[3][0],
    ];
    Ok(NullFrame {
        l,
        lbar,
        e1,
        e2,
        sigma,
        flipped_branch,
    })
}

/// Worst violation across the six frame relations plus `dt(l) = 1`.
pub fn frame_defect(g: &MetricPoint, f: &NullFrame) -> f64 {
    let mut worst: f64 = 0.0;
    worst = worst.max(inner(g, &f.l, &f.l).abs());
    worst = worst.max(inner(g, &f.lbar, &f.lbar).abs());
    worst = worst.max((inner(g, &f.l, &f.lbar) - 2.0).abs());
    worst = worst.max((inner(g, &f.e1, &f.e1) - 1.0).abs());
    worst = worst.max((inner(g, &f.e2, &f.e2) - 1.0).abs());
    worst = worst.max(inner(g, &f.e1, &f.e2).abs());
    worst = worst.max(inner(g, &f.l, &f.e1).abs());
    worst = worst.max(inner(g, &f.l, &f.e2).abs());
    worst = worst.max(inner(g, &f.lbar, &f.e1).abs());
    worst = worst.max(inner(g, &f.lbar, &f.e2).abs());
    worst = worst.max((f.l[0] - 1.0).abs());
    worst
}

/// A flowout bundle: rays seeded on an (a1, a2) grid of a plane slice,
/// reparametrized by coordinate time.
pub struct FlowoutBundle {
    pub t0: f64,
    pub dt: f64,
    pub da: f64,
    /// samples[k][i][j] = (x, xi) at time t0 + k dt, seed (i, j)
    pub samples: Vec<Vec<Vec<([f64; 4], [f64; 4])>>>,
}

/// Trace the flowout of the plane `x3 = x3_0` in the direction
/// `dx3 - c dt`, seeds spaced `da` apart.
pub fn flowout(
    state: &AnalyticState,
    x3_0: f64,
    na: usize,
    da: f64,
    t0: f64,
    dt: f64,
    nt: usize,
) -> Result<FlowoutBundle> {
    let mut samples = vec![vec![vec![([0.0; 4], [0.0; 4]); na]; na]; nt];
    for i in 0..na {
        for j in 0..na {
            let mut x = [t0, i as f64 * da, j as f64 * da, x3_0];
            let (g, _) = state.metric_at(&x);
            let (mut xi, _) = null_project(&g, &[0.0, 0.0, 0.0, 1.0], f64::INFINITY);
            samples[0][i][j] = (x, xi);
            // integrate in coordinate time: divide the affine RHS by dx^0/ds
            for k in 1..nt {
                let step = |x: &[f64; 4], xi: &[f64; 4]| -> ([f64; 4], [f64; 4]) {
                    let (dx, dxi) = ray_rhs(state, x, xi);
                    let inv = 1.0 / dx[0];
                    (
                        [1.0, dx[1] * inv, dx[2] * inv, dx[3] * inv],
                        [
                            dxi[0] * inv,
                            dxi[1] * inv,
                            dxi[2] * inv,
                            dxi[3] * inv,
                        ],
                    )
                };
                let (k1x, k1p) = step(&x, &xi);
                let (k2x, k2p) = step(&add(&x, &k1x, 0.5 * dt), &add(&xi, &k1p, 0.5 * dt));
                let (k3x, k3p) = step(&add(&x, &k2x, 0.5 * dt), &add(&xi, &k2p, 0.5 * dt));
                let (k4x, k4p) = step(&add(&x, &k3x, dt), &add(&xi, &k3p, dt));
                for a in 0..4 {
                    x[a] += dt / 6.0 * (k1x[a] + 2.0 * k2x[a] + 2.0 * k3x[a] + k4x[a]);
                    xi[a] += dt / 6.0 * (k1p[a] + 2.0 * k2p[a] + 2.0 * k3p[a] + k4p[a]);
                }
                samples[k][i][j] = (x, xi);
            }
        }
    }
    Ok(FlowoutBundle {
        t0,
        dt,
        da,
        samples,
    })
}

/// Connection coefficients at an interior bundle node.
#[derive(Debug, Clone, Copy)]
pub struct ConnectionCoefficients {
    pub chi: [[f64; 2]; 2],
    pub mu0: [[f64; 2]; 2],
    /// `0.5 <D_l lbar, l>`, the frame-differentiation definition
    pub l_ln_sigma: f64,
    /// `d ln(sigma)/dt` along the ray (diagnostic companion)
    pub dln_sigma_dt: f64,
    /// `|D_l l + (d ln sigma/dt) l|`: the geodesic-scaling relation,
    /// which converges to zero under bundle refinement
    pub geodesic_defect: f64,
}

fn christoffel(g: &MetricPoint, dg_up: &[[[f64; 4]; 4]; 4]) -> [[[f64; 4]; 4]; 4] {
    // d g_lo = -g_lo dg_up g_lo
    let mut dg_lo = [[[0.0; 4]; 4]; 4];
    for mu in 0..4 {
        for a in 0..4 {
            for b in 0..4 {
                let mut acc = 0.0;
                for r in 0..4 {
                    for c in 0..4 {
                        acc -= g.g_lo[a][r] * dg_up[mu][r][c] * g.g_lo[c][b];
                    }
                }
                dg_lo[mu][a][b] = acc;
            }
        }
    }
    let mut gam = [[[0.0; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                let mut acc = 0.0;
                for d in 0..4 {
                    acc += 0.5
                        * g.g_up[a][d]
                        * (dg_lo[b][d][c] + dg_lo[c][d][b] - dg_lo[d][b][c]);
                }
                gam[a][b][c] = acc;
            }
        }
    }
    gam
}

/// Frame differentiation at bundle node (k, i, j); needs interior nodes.
pub fn connection_at(
    state: &AnalyticState,
    bundle: &FlowoutBundle,
    k: usize,
    i: usize,
    j: usize,
) -> Result<ConnectionCoefficients> {
    let nt = bundle.samples.len();
    let na = bundle.samples[0].len();
    if k == 0 || k + 1 >= nt || i == 0 || i + 1 >= na || j == 0 || j + 1 >= na {
        return Err(Error::Domain("connection coefficients need interior nodes".into()));
    }
    let frame_of = |k: usize, i: usize, j: usize| -> Result<(NullFrame, MetricPoint, [f64; 4])> {
        let (x, xi) = bundle.samples[k][i][j];
        let (g, _) = state.metric_at(&x);
        let f = null_frame(&g, xi)?;
        Ok((f, g, x))
    };
    let (f0, g0, x0) = frame_of(k, i, j)?;
    let (_, dg) = state.metric_at(&x0);
    let gam = christoffel(&g0, &dg);

    // covariant derivative along the bundle's time direction (which IS l):
    // D_l X = dX/dt + Gamma(l, X)
    let d_dt = |get: &dyn Fn(usize, usize, usize) -> Result<[f64; 4]>| -> Result<[f64; 4]> {
        let p = get(k + 1, i, j)?;
        let m = get(k - 1, i, j)?;
        let mut out = [0.0; 4];
        for a in 0..4 {
            out[a] = (p[a] - m[a]) / (2.0 * bundle.dt);
        }
        Ok(out)
    };
    let cov = |dx: &[f64; 4], dir: &[f64; 4], x_val: &[f64; 4]| -> [f64; 4] {
        let mut out = *dx;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    out[a] += gam[a][b][c] * dir[b] * x_val[c];
                }
            }
        }
        out
    };

    // spatial seed-direction tangents T_c = dx/da_c and their use in e_a
    let tangent = |c: usize| -> [f64; 4] {
        let (xp, _) = if c == 0 {
            bundle.samples[k][i + 1][j]
        } else {
            bundle.samples[k][i][j + 1]
        };
        let (xm, _) = if c == 0 {
            bundle.samples[k][i - 1][j]
        } else {
            bundle.samples[k][i][j - 1]
        };
        let mut t = [0.0; 4];
        for a in 0..4 {
            t[a] = (xp[a] - xm[a]) / (2.0 * bundle.da);
        }
        t
    };
    let t1 = tangent(0);
    let t2 = tangent(1);
    // coefficients kappa of e_a in the T_c basis: solve the 2x2 Gram system
    let gram = [
        [inner(&g0, &t1, &t1), inner(&g0, &t1, &t2)],
        [inner(&g0, &t2, &t1), inner(&g0, &t2, &t2)],
    ];
    let solve2 = |rhs: [f64; 2]| -> [f64; 2] {
        let det = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0];
        [
            (rhs[0] * gram[1][1] - rhs[1] * gram[0][1]) / det,
            (gram[0][0] * rhs[1] - gram[1][0] * rhs[0]) / det,
        ]
    };
    let kap1 = solve2([inner(&g0, &f0.e1, &t1), inner(&g0, &f0.e1, &t2)]);
    let kap2 = solve2([inner(&g0, &f0.e2, &t1), inner(&g0, &f0.e2, &t2)]);

    // d l / d a_c by differencing the frames of neighbouring rays
    let l_of = |k: usize, i: usize, j: usize| -> Result<[f64; 4]> {
        Ok(frame_of(k, i, j)?.0.l)
    };
    let e_of = |which: usize, k: usize, i: usize, j: usize| -> Result<[f64; 4]> {
        let f = frame_of(k, i, j)?.0;
        Ok(if which == 1 { f.e1 } else { f.e2 })
    };
    let dl_da = |c: usize| -> Result<[f64; 4]> {
        let (pi, pj) = if c == 0 { (i + 1, j) } else { (i, j + 1) };
        let (mi, mj) = if c == 0 { (i - 1, j) } else { (i, j - 1) };
        let p = l_of(k, pi, pj)?;
        let m = l_of(k, mi, mj)?;
        let mut out = [0.0; 4];
        for a in 0..4 {
            out[a] = (p[a] - m[a]) / (2.0 * bundle.da);
        }
        Ok(out)
    };
    let dl_1 = dl_da(0)?;
    let dl_2 = dl_da(1)?;
    // chi_ab = <D_{e_a} l, e_b>
    let mut chi = [[0.0; 2]; 2];
    for (a_idx, kap) in [kap1, kap2].iter().enumerate() {
        let mut dl = [0.0; 4];
        for m in 0..4 {
            dl[m] = kap[0] * dl_1[m] + kap[1] * dl_2[m];
        }
        let ea = if a_idx == 0 { f0.e1 } else { f0.e2 };
        let covd = cov(&dl, &ea, &f0.l);
        chi[a_idx][0] = inner(&g0, &covd, &f0.e1);
        chi[a_idx][1] = inner(&g0, &covd, &f0.e2);
    }
    // mu_0ab = <D_l e_a, e_b>
    let mut mu0 = [[0.0; 2]; 2];
    for a_idx in 1..=2 {
        let de_dt = d_dt(&|kk, ii, jj| e_of(a_idx, kk, ii, jj))?;
        let ea = if a_idx == 1 { f0.e1 } else { f0.e2 };
        let covd = cov(&de_dt, &f0.l, &ea);
        mu0[a_idx - 1][0] = inner(&g0, &covd, &f0.e1);
        mu0[a_idx - 1][1] = inner(&g0, &covd, &f0.e2);
    }
    // sigma differentiated along the ray, the frame-differentiation
    // definition of l(ln sigma), and the geodesic-scaling defect. The
    // scaling relation needs the affine sigma = g^{0b} xi_b of the traced
    // covector (the frame's sigma is renormalized per point).
    let sig_of = |k: usize| -> f64 {
        let (x, xi) = bundle.samples[k][i][j];
        let (g, _) = state.metric_at(&x);
        (0..4).map(|b| g.g_up[0][b] * xi[b]).sum()
    };
    let dln_sigma_dt = (sig_of(k + 1).ln() - sig_of(k - 1).ln()) / (2.0 * bundle.dt);
    let dlbar_dt = d_dt(&|kk, ii, jj| Ok(frame_of(kk, ii, jj)?.0.lbar))?;
    let covd = cov(&dlbar_dt, &f0.l, &f0.lbar);
    let l_ln_sigma = 0.5 * inner(&g0, &covd, &f0.l);
    let dl_dt = d_dt(&|kk, ii, jj| l_of(kk, ii, jj))?;
    let dll = cov(&dl_dt, &f0.l, &f0.l);
    let mut geodesic_defect = 0.0f64;
    for a in 0..4 {
        geodesic_defect = geodesic_defect.max((dll[a] + dln_sigma_dt * f0.l[a]).abs());
    }
    Ok(ConnectionCoefficients {
        chi,
        mu0,
        l_ln_sigma,
        dln_sigma_dt,
        geodesic_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn perturbed_state() -> AnalyticState {
        AnalyticState {
            theta: 2.0,
            h: TrigField {
                base: 2.0 * 1.25f64.ln(),
                modes: vec![
                    (0.004, [0.1, 0.3, 0.2, 0.15], 0.3),
                    (0.003, [0.05, -0.2, 0.25, 0.1], 1.1),
                ],
            },
            uvec: [
                TrigField {
                    base: 0.0,
                    modes: vec![(0.005, [0.07, 0.25, -0.15, 0.2], 0.0)],
                },
                TrigField {
                    base: 0.0,
                    modes: vec![(0.004, [0.06, 0.1, 0.3, -0.12], 0.7)],
                },
                TrigField::constant(0.0),
            ],
        }
    }

    #[test]
    fn minkowski_straight_line_exact() {
        // c_s = 1 with u at rest gives the Minkowski metric exactly
        let state = AnalyticState::rest(2.0, eos_h_for_cs1());
        let x0 = [0.0, 0.1, 0.2, 0.3];
        let xi0 = [0.0, 0.3, 0.0, 1.0];
        let trace = trace_null_geodesic(&state, x0, xi0, 1e-2, 500).unwrap();
        let first = trace[0];
        let last = trace[trace.len() - 1];
        for a in 0..4 {
            assert_relative_eq!(first.xi[a], last.xi[a], epsilon = 1e-13);
        }
        // straight line: x(s) = x0 + 2 g xi s
        let (g, _) = state.metric_at(&x0);
        let mut v = [0.0; 4];
        for a in 0..4 {
            for b in 0..4 {
                v[a] += 2.0 * g.g_up[a][b] * first.xi[b];
            }
        }
        for a in 0..4 {
            assert_relative_eq!(last.x[a], x0[a] + v[a] * last.s, epsilon = 1e-11);
        }
    }

    fn eos_h_for_cs1() -> f64 {
        // h with c_s^2 = 1 for theta = 2: 2(e^{h/2}-1)=1
        2.0 * (1.5f64).ln()
    }

    #[test]
    fn hamiltonian_conserved_on_perturbed_metric() {
        let state = perturbed_state();
        let x0 = [0.0, 0.3, 1.0, -0.4];
        let trace = trace_null_geodesic(&state, x0, [0.0, 0.1, -0.05, 1.0], 2e-3, 1000).unwrap();
        let mut worst: f64 = 0.0;
        for s in &trace {
            let (g, _) = state.metric_at(&s.x);
            worst = worst.max(hamiltonian(&g, &s.xi).abs());
        }
        assert!(worst <= 1e-8, "Hamiltonian drift {worst}");
    }

    #[test]
    fn constant_state_frame_relations_exact() {
        let state = AnalyticState::rest(2.0, 2.0 * 1.25f64.ln());
        let (g, _) = state.metric_at(&[0.0; 4]);
        // theta = (0,0,1): conormal dx3 - c dt with the null speed solved
        let f = null_frame(&g, [0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(frame_defect(&g, &f) <= 1e-12, "defect {}", frame_defect(&g, &f));
        assert!(!f.flipped_branch);
        // the rest-metric null speed is c_s
        assert_relative_eq!(f.l[3] / f.l[0], 0.5f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn frame_relations_along_perturbed_trace() {
        let state = perturbed_state();
        let trace = trace_null_geodesic(&state, [0.0, 0.2, -0.3, 0.5], [0.0, 0.02, -0.01, 1.0], 5e-3, 400)
            .unwrap();
        let mut worst: f64 = 0.0;
        for s in trace.iter().step_by(20) {
            let (g, _) = state.metric_at(&s.x);
            let f = null_frame(&g, s.xi).unwrap();
            worst = worst.max(frame_defect(&g, &f));
        }
        assert!(worst <= 1e-9, "frame defect along trace {worst}");
    }

    #[test]
    fn flat_connection_coefficients_vanish() {
        let state = AnalyticState::rest(2.0, 2.0 * 1.25f64.ln());
        let b = flowout(&state, 0.0, 5, 0.05, 0.0, 0.01, 5).unwrap();
        let c = connection_at(&state, &b, 2, 2, 2).unwrap();
        for a in 0..2 {
            for bb in 0..2 {
                assert!(c.chi[a][bb].abs() < 1e-10);
                assert!(c.mu0[a][bb].abs() < 1e-10);
            }
        }
        assert!(c.l_ln_sigma.abs() < 1e-10);
        assert!(c.dln_sigma_dt.abs() < 1e-10);
        assert!(c.geodesic_defect < 1e-10);
    }

    /// The geodesic-scaling relation `D_l l = -(d ln sigma/dt) l` holds on
    /// the traced bundle up to differencing error, which shrinks under
    /// time refinement (second order).
    #[test]
    fn geodesic_scaling_defect_shrinks() {
        let state = perturbed_state();
        let mut defects = Vec::new();
        for &dt in &[0.02, 0.01] {
            let b = flowout(&state, 0.0, 5, 0.04, 0.0, dt, 5).unwrap();
            let c = connection_at(&state, &b, 2, 2, 2).unwrap();
            defects.push(c.geodesic_defect);
        }
        assert!(
            defects[1] < 0.3 * defects[0] || defects[1] < 1e-11,
            "geodesic defect did not shrink: {defects:?}"
        );
    }
}

//! Vorticity ladder and identity residuals on trajectory windows.
//!
//! A window of uniformly spaced snapshots becomes a space-time block;
//! spatial derivatives are spectral, time derivatives high-order central
//! differences, and every identity is evaluated by the same generic code
//! the jet suite verifies exactly. Residuals are reported both
//! pointwise-max and L2, normalized by the largest single term.

use serde::Serialize;

use crate::algebra::{Algebra, BlockAlgebra, BlockField, BlockGrid};
use crate::dynamics::HyperbolicState;
use crate::error::{Error, Result};
use crate::fluidvars::FluidVars;
use crate::identities::{self, Balance, Identity};
use crate::minkowski::sig;

/// Space-time block of the primitive fields built from snapshots.
pub struct TrajectoryWindow {
    pub alg: BlockAlgebra,
    pub theta: f64,
    pub h: BlockField,
    pub u: [BlockField; 4],
}

impl TrajectoryWindow {
    /// Build from consecutive snapshots at uniform spacing `dt`.
    pub fn from_snapshots(snaps: &[HyperbolicState], dt: f64) -> Result<Self> {
        if snaps.len() < 5 {
            return Err(Error::Shape("need at least 5 snapshots for a window".into()));
        }
        let g = snaps[0].grid;
        let theta = snaps[0].theta;
        let alg = BlockAlgebra {
            grid: BlockGrid {
                nt: snaps.len(),
                dim: g.dim,
                n: g.n,
                len: g.len,
                dt,
            },
        };
        let mut h_slices = Vec::with_capacity(snaps.len());
        let mut u_slices: [Vec<ndarray::ArrayD<f64>>; 4] =
            [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for s in snaps {
            if s.grid != g {
                return Err(Error::Shape("snapshots on different grids".into()));
            }
            let fs = s.to_fieldset();
            h_slices.push(fs.h.data.clone());
            for a in 0..4 {
                u_slices[a].push(fs.u.comps[a].data.clone());
            }
        }
        let h = alg.field_from_slices(h_slices);
        let u = [
            alg.field_from_slices(std::mem::take(&mut u_slices[0])),
            alg.field_from_slices(std::mem::take(&mut u_slices[1])),
            alg.field_from_slices(std::mem::take(&mut u_slices[2])),
            alg.field_from_slices(std::mem::take(&mut u_slices[3])),
        ];
        Ok(TrajectoryWindow { alg, theta, h, u })
    }

    pub fn env(&self) -> FluidVars<BlockAlgebra> {
        FluidVars::new(self.alg, self.theta, self.h.clone(), self.u.clone())
    }
}

/// Residual record for one identity on one window or jet batch.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub identity: String,
    pub anchor: String,
    pub max_rel_residual: f64,
    pub l2_rel_residual: f64,
    pub n_points: usize,
    pub jet_order: Option<usize>,
}

fn record(alg: &BlockAlgebra, name: &str, balances: Vec<Balance<BlockField>>) -> IdentityReport {
    let mut max_rel = 0.0f64;
    let mut l2_rel = 0.0f64;
    let mut n_points = 0usize;
    for b in balances {
        let scale = if b.scale == 0.0 { 1.0 } else { b.scale };
        max_rel = max_rel.max(alg.max_abs(&b.residual) / scale);
        l2_rel = l2_rel.max(alg.l2_clean(&b.residual) / scale);
        n_points = b.residual.data.len();
    }
    IdentityReport {
        identity: name.to_string(),
        anchor: name.to_string(),
        max_rel_residual: max_rel,
        l2_rel_residual: l2_rel,
        n_points,
        jet_order: None,
    }
}

/// Evaluate one identity on a window.
pub fn eval_on_window(window: &TrajectoryWindow, id: Identity) -> IdentityReport {
    let mut env = window.env();
    let mut balances = Vec::new();
    match id {
        Identity::WteH => balances.push(identities::residual_wte_h(&mut env)),
        Identity::WteU => {
            for a in 0..4 {
                balances.push(identities::residual_wte_u(&mut env, a));
            }
        }
        Identity::Ceq => {
            for a in 0..4 {
                balances.push(identities::residual_ceq(&mut env, a));
            }
        }
        Identity::Ceq0 => balances.push(identities::residual_ceq0(&mut env)),
        Identity::Ceq1 => {
            for a in 0..4 {
                balances.push(identities::residual_ceq1(&mut env, a));
            }
        }
        Identity::SDe => {
            for a in 0..4 {
                balances.push(identities::residual_sde(&mut env, a));
            }
        }
        Identity::HDe => {
            for a in 0..4 {
                balances.push(identities::residual_hde(&mut env, a));
            }
        }
        Identity::OEe => {
            for j in 1..4 {
                for i in 1..j {
                    balances.push(identities::residual_oee(&mut env, j, i));
                }
            }
        }
        Identity::C2 => {
            for i in 1..4 {
                for j in 1..i {
                    balances.push(identities::residual_c2(&mut env, i, j));
                }
            }
        }
        Identity::D5 => {
            for i in 1..4 {
                balances.push(identities::residual_d5(&mut env, i));
            }
        }
        Identity::Oe00 => {
            for a in 0..4 {
                for b in 0..a {
                    balances.push(identities::residual_oe00(&mut env, a, b));
                }
            }
        }
        Identity::Cr04 => {
            for a in 0..4 {
                for b in 0..a {
                    balances.push(identities::residual_cr04(&mut env, a, b));
                }
            }
        }
        Identity::Cra0 => {
            for a in 0..4 {
                balances.push(identities::residual_cra0(&mut env, a));
            }
        }
        Identity::Cra1 => {
            for a in 0..4 {
                for b in 0..4 {
                    if a != b {
                        balances.push(identities::residual_cra1(&mut env, a, b));
                    }
                }
            }
        }
        Identity::FdUmLocal => {
            // grid route: u_- = 0 reduces the local identity to WTe-u
            let alg = env.alg;
            let um = [alg.zero(), alg.zero(), alg.zero(), alg.zero()];
            for a in 0..4 {
                balances.push(identities::residual_fd_um_local(&mut env, &um, a));
            }
        }
    }
    record(&window.alg, id.name(), balances)
}

/// The vorticity ladder fields on a window's clean middle slice, exposed
/// for inspection and norm-based diagnostics.
pub struct VorticityBundle {
    pub w: [BlockField; 4],
    pub big_w: [BlockField; 4],
    pub big_g: [BlockField; 4],
    pub gamma: BlockField,
    pub f_vec: [BlockField; 4],
    pub e_vec: [BlockField; 4],
}

pub fn bundle(window: &TrajectoryWindow) -> VorticityBundle {
    let mut env = window.env();
    let w = [env.w(0), env.w(1), env.w(2), env.w(3)];
    let big_w = [env.big_w(0), env.big_w(1), env.big_w(2), env.big_w(3)];
    let big_g = [env.big_g(0), env.big_g(1), env.big_g(2), env.big_g(3)];
    let gamma = identities::sde_gamma(&mut env);
    let f_vec = [
        identities::sde_f(&mut env, 0),
        identities::sde_f(&mut env, 1),
        identities::sde_f(&mut env, 2),
        identities::sde_f(&mut env, 3),
    ];
    let e_vec = [
        identities::sde_e(&mut env, 0, None),
        identities::sde_e(&mut env, 1, None),
        identities::sde_e(&mut env, 2, None),
        identities::sde_e(&mut env, 3, None),
    ];
    VorticityBundle {
        w,
        big_w,
        big_g,
        gamma,
        f_vec,
        e_vec,
    }
}

/// Orthogonality diagnostics `max |u_a w^a|`, `max |u_a W^a|` and the
/// time-component relations on a window.
pub struct OrthoReport {
    pub u_dot_w: f64,
    pub u_dot_big_w: f64,
    pub w0_relation: f64,
    pub big_w0_relation: f64,
}

pub fn orthogonality(window: &TrajectoryWindow) -> OrthoReport {
    let mut env = window.env();
    let alg = env.alg;
    let udw = identities::u_dot_w(&mut env);
    let udbw = identities::u_dot_big_w(&mut env);
    let w0 = identities::residual_w0d(&mut env);
    let bw0 = identities::residual_d20(&mut env);
    OrthoReport {
        u_dot_w: alg.max_abs(&udw),
        u_dot_big_w: alg.max_abs(&udbw),
        w0_relation: w0.rel(&alg),
        big_w0_relation: bw0.rel(&alg),
    }
}

/// Two-route checks: the modified vorticity from the weighted one-form
/// versus the weight-extracted product rule, and the same for `W` with
/// its enthalpy-gradient correction.
pub fn two_route_defects(window: &TrajectoryWindow) -> (f64, f64) {
    let mut env = window.env();
    let alg = env.alg;
    // route A for w: vort(e^h u) (the primary definition in the env)
    // route B: e^h vort(u)
    let mut worst_w = 0.0f64;
    for a in 0..4 {
        let wa = env.w(a);
        let eh = env.exp_h();
        let vu = env.vort_with(a, |s, k| s.u_lo(k));
        let wb = alg.mul(&eh, &vu);
        let d = alg.sub(&wa, &wb);
        let scale = alg.max_abs(&wa).max(alg.max_abs(&wb)).max(1e-300);
        worst_w = worst_w.max(alg.max_abs(&d) / scale);
    }
    // route A for W: the expanded form (primary). route B:
    // e^{-h} vort(e^h w) + (1 + c_s^{-2}) eps u w dh.
    let mut worst_bw = 0.0f64;
    for a in 0..4 {
        let wa = env.big_w(a);
        let emh = env.exp_mh();
        let eh = env.exp_h();
        let vehw = env.vort_with(a, |s, k| {
            let wk = s.w_lo(k);
            s.alg.mul(&eh, &wk)
        });
        let mut corr = alg.zero();
        for (p, s) in crate::minkowski::EPS_PERMS.iter() {
            if p[0] != a {
                continue;
            }
            let (b, g, d) = (p[1], p[2], p[3]);
            let ub = env.u_lo(b);
            let wd = env.w_lo(d);
            let dh = env.dh(g);
            let q = alg.mul(&ub, &alg.mul(&wd, &dh));
            corr = alg.add(&corr, &alg.scale(&q, -s));
        }
        let c2i = env.cs2_inv();
        let one = alg.constant(1.0);
        let weight = alg.add(&one, &c2i);
        let wb = alg.add(&alg.mul(&emh, &vehw), &alg.mul(&weight, &corr));
        let d = alg.sub(&wa, &wb);
        let scale = alg.max_abs(&wa).max(alg.max_abs(&wb)).max(1e-300);
        worst_bw = worst_bw.max(alg.max_abs(&d) / scale);
    }
    (worst_w, worst_bw)
}

/// `Gamma` two-route check from the footnote: `w_k W^k` computed directly
/// equals `-eps^{kbgd} w_k u_b d_g w_d` (the enthalpy part dies against
/// `w` by antisymmetry).
pub fn gamma_footnote_defect(window: &TrajectoryWindow) -> f64 {
    let mut env = window.env();
    let alg = env.alg;
    let mut direct = alg.zero();
    for k in 0..4 {
        let wk = env.w_lo(k);
        let bw = env.big_w(k);
        direct = alg.add(&direct, &alg.mul(&wk, &bw));
    }
    let mut via_vort = alg.zero();
    for k in 0..4 {
        let wk = env.w_lo(k);
        let vw = env.vort_w(k);
        via_vort = alg.add(&via_vort, &alg.mul(&wk, &vw));
    }
    let d = alg.sub(&direct, &via_vort);
    let scale = alg.max_abs(&direct).max(alg.max_abs(&via_vort)).max(1e-300);
    alg.max_abs(&d) / scale
}

/// Evaluate the spatial gradient of a block field's middle slice.
pub fn middle_slice(window: &TrajectoryWindow, f: &BlockField) -> crate::grid::ScalarField {
    let nt = window.alg.grid.nt;
    let g = crate::grid::Grid::new(window.alg.grid.dim, window.alg.grid.n, window.alg.grid.len)
        .expect("valid grid");
    crate::grid::ScalarField {
        grid: g,
        data: f.data.index_axis(ndarray::Axis(0), nt / 2).to_owned(),
    }
}

/// Lowered middle-slice component helper used by norm diagnostics.
pub fn middle_slice_lo(window: &TrajectoryWindow, f: &BlockField, a: usize) -> crate::grid::ScalarField {
    let s = middle_slice(window, f);
    &s * sig(a)
}

/// Empirical constant of the vorticity gradient bound: the ratio
/// `|grad W_spatial|_{H^{s0-2}-homog} / sum-of-five-rhs-norms`, each norm
/// taken on the window's clean middle slice.
pub fn d17_ratio(window: &TrajectoryWindow, s0: f64) -> f64 {
    use crate::analysis::sobolev_homog;
    let mut env = window.env();
    let alg = env.alg;
    let s_exp = s0 - 2.0;
    // numerator: spatial gradient of the spatial W components
    let mut num = 0.0f64;
    for i in 1..4 {
        let bw = env.big_w(i);
        for ax in 1..=window.alg.grid.dim {
            let d = alg.diff(&bw, ax);
            let slice = middle_slice(window, &d);
            num += sobolev_homog(&slice, s_exp).powi(2);
        }
    }
    let num = num.sqrt();
    // pointwise magnitude fields
    let mag4 = |env: &mut FluidVars<crate::algebra::BlockAlgebra>, get: &mut dyn FnMut(&mut FluidVars<crate::algebra::BlockAlgebra>, usize) -> BlockField| -> BlockField {
        let alg = env.alg;
        let mut acc = alg.zero();
        for a in 0..4 {
            let f = get(env, a);
            acc = alg.add(&acc, &alg.mul(&f, &f));
        }
        BlockField { data: acc.data.mapv(f64::sqrt), taint: acc.taint }
    };
    let w_mag = mag4(&mut env, &mut |e, a| e.w(a));
    let bw_mag = mag4(&mut env, &mut |e, a| e.big_w(a));
    let g_mag = mag4(&mut env, &mut |e, a| e.big_g(a));
    let mut du_sq = alg.zero();
    let mut dh_sq = alg.zero();
    let mut dw_sq = alg.zero();
    for d in 0..4 {
        let dh = env.dh(d);
        dh_sq = alg.add(&dh_sq, &alg.mul(&dh, &dh));
        for a in 0..4 {
            let du = env.du(d, a);
            du_sq = alg.add(&du_sq, &alg.mul(&du, &du));
            let dw = env.dw(d, a);
            dw_sq = alg.add(&dw_sq, &alg.mul(&dw, &dw));
        }
    }
    let dudh = BlockField {
        data: (&du_sq.data + &dh_sq.data).mapv(f64::sqrt),
        taint: du_sq.taint.max(dh_sq.taint),
    };
    let du_mag = BlockField { data: du_sq.data.mapv(f64::sqrt), taint: du_sq.taint };
    let dh_mag = BlockField { data: dh_sq.data.mapv(f64::sqrt), taint: dh_sq.taint };
    let dw_mag = BlockField { data: dw_sq.data.mapv(f64::sqrt), taint: dw_sq.taint };
    let norm_of = |f: &BlockField| -> f64 {
        sobolev_homog(&middle_slice(window, f), s_exp)
    };
    let prod = |a: &BlockField, b: &BlockField| BlockField {
        data: &a.data * &b.data,
        taint: a.taint.max(b.taint),
    };
    let den = norm_of(&g_mag)
        + norm_of(&prod(&bw_mag, &dudh))
        + norm_of(&prod(&dw_mag, &dudh))
        + norm_of(&prod(&w_mag, &prod(&du_mag, &dh_mag)))
        + norm_of(&prod(&prod(&w_mag, &w_mag), &dh_mag));
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

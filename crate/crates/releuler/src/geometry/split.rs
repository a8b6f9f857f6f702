//! Trajectory-window checks for the velocity split: solve the space-time
//! elliptic problem on a time-blended periodic box built from snapshots,
//! then measure the residuals of the split wave form and the transported
//! split form over the region where the blend is the identity.

use ndarray::{ArrayD, Axis, IxDyn};

use crate::algebra::Box4Algebra;
use crate::dynamics::HyperbolicState;
use crate::error::{Error, Result};
use crate::fluidvars::FluidVars;
use crate::geometry::elliptic::{elliptic_split, EllipticOperatorP, SpaceTimeBox};
use crate::identities;

/// Periodic-in-time box of primitive fields, blended to the base state
/// near the temporal edges so everything is smooth across the seam.
pub struct BlendedBox {
    pub alg: Box4Algebra,
    pub theta: f64,
    pub h: ArrayD<f64>,
    pub u: [ArrayD<f64>; 4],
    /// time indices where the blend equals 1 (residuals measured here)
    pub interior: Vec<usize>,
}

/// Smooth periodic time bump: 1 on the middle `plateau` fraction, 0 at
/// the seam.
fn time_bump(nt: usize, plateau: f64) -> Vec<f64> {
    let psi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    (0..nt)
        .map(|k| {
            // distance from the seam (t = 0 == t = nt) in [0, 0.5]
            let frac = k as f64 / nt as f64;
            let d = frac.min(1.0 - frac);
            let lo = 0.5 * (1.0 - plateau);
            if d >= lo {
                1.0
            } else {
                let s = d / lo;
                let a = psi(s);
                let b = psi(1.0 - s);
                a / (a + b)
            }
        })
        .collect()
}

pub fn blended_box(snaps: &[HyperbolicState], dt: f64, plateau: f64) -> Result<BlendedBox> {
    if snaps.len() < 8 {
        return Err(Error::Shape("need at least 8 snapshots for the box".into()));
    }
    let g = snaps[0].grid;
    let nt = snaps.len();
    let alg = Box4Algebra {
        nt,
        dim: g.dim,
        n: g.n,
        len_t: nt as f64 * dt,
        len_x: g.len,
    };
    let theta = snaps[0].theta;
    let base = snaps[0].to_fieldset();
    let h_base = base.h.mean();
    let chi = time_bump(nt, plateau);
    let mut h = ArrayD::zeros(IxDyn(&alg.shape()));
    let mut uvec: [ArrayD<f64>; 4] = [
        ArrayD::zeros(IxDyn(&alg.shape())),
        ArrayD::zeros(IxDyn(&alg.shape())),
        ArrayD::zeros(IxDyn(&alg.shape())),
        ArrayD::zeros(IxDyn(&alg.shape())),
    ];
    let mut interior = Vec::new();
    for (k, s) in snaps.iter().enumerate() {
        let fs = s.to_fieldset();
        let c = chi[k];
        if c == 1.0 {
            interior.push(k);
        }
        h.index_axis_mut(Axis(0), k)
            .assign(&fs.h.data.mapv(|v| h_base + c * (v - h_base)));
        // blend the spatial velocity and recompute u^0 so normalization
        // stays exact on the blended state
        let mut usq = ArrayD::from_elem(IxDyn(&g.shape()), 1.0);
        for i in 1..4 {
            let blended = fs.u.comps[i].data.mapv(|v| c * v);
            usq = usq + &blended * &blended;
            uvec[i].index_axis_mut(Axis(0), k).assign(&blended);
        }
        uvec[0]
            .index_axis_mut(Axis(0), k)
            .assign(&usq.mapv(f64::sqrt));
    }
    Ok(BlendedBox {
        alg,
        theta,
        h,
        u: uvec,
        interior,
    })
}

impl BlendedBox {
    pub fn env(&self) -> FluidVars<Box4Algebra> {
        FluidVars::new(self.alg, self.theta, self.h.clone(), self.u.clone())
    }

    pub fn space_time_box(&self) -> SpaceTimeBox {
        let mut shape = [1usize; 4];
        let mut len = [self.alg.len_t, self.alg.len_x, self.alg.len_x, self.alg.len_x];
        shape[0] = self.alg.nt;
        for i in 1..4 {
            shape[i] = if i <= self.alg.dim { self.alg.n } else { 1 };
            if i > self.alg.dim {
                len[i] = 1.0;
            }
        }
        SpaceTimeBox { shape, len }
    }
}

/// L2 of a box field over the interior time slices.
fn interior_l2(b: &BlendedBox, f: &ArrayD<f64>) -> f64 {
    let mut acc = 0.0;
    let mut cnt = 0usize;
    for &k in &b.interior {
        let sl = f.index_axis(Axis(0), k);
        acc += sl.iter().map(|v| v * v).sum::<f64>();
        cnt += sl.len();
    }
    (acc / cnt.max(1) as f64).sqrt()
}

/// Residual report for the split checks.
pub struct SplitCheckReport {
    pub fdr_rel: f64,
    pub tue_rel: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
}

/// Solve the split on the blended box and evaluate both residuals over
/// the interior, normalized by the largest single term.
pub fn split_residuals(b: &BlendedBox, tol: f64, max_iter: usize) -> Result<SplitCheckReport> {
    let mut env = b.env();
    let alg = env.alg;
    // W and e^{-h} from the same blended fields
    let big_w = [env.big_w(0), env.big_w(1), env.big_w(2), env.big_w(3)];
    let emh = env.exp_mh();

    // the elliptic operator lives on a 4-slot box even when dim < 3
    let boxg = b.space_time_box();
    let promote = |f: &ArrayD<f64>| -> ArrayD<f64> {
        f.clone().into_shape_with_order(IxDyn(&boxg.shape)).unwrap()
    };
    let op = EllipticOperatorP::new(
        boxg,
        [
            promote(&b.u[0]),
            promote(&b.u[1]),
            promote(&b.u[2]),
            promote(&b.u[3]),
        ],
    );
    let w4 = [
        promote(&big_w[0]),
        promote(&big_w[1]),
        promote(&big_w[2]),
        promote(&big_w[3]),
    ];
    let split = elliptic_split(&op, &promote(&emh), &w4, tol, max_iter)?;
    let demote = |f: &ArrayD<f64>| -> ArrayD<f64> {
        f.clone().into_shape_with_order(IxDyn(&alg.shape())).unwrap()
    };
    let um = [
        demote(&split.u_minus[0]),
        demote(&split.u_minus[1]),
        demote(&split.u_minus[2]),
        demote(&split.u_minus[3]),
    ];

    let mut fdr_rel = 0.0f64;
    let mut tue_rel = 0.0f64;
    for a in 0..4 {
        let bal = identities::residual_fdr(&mut env, &um, a);
        let scale = if bal.scale == 0.0 { 1.0 } else { bal.scale };
        fdr_rel = fdr_rel.max(interior_l2(b, &bal.residual) / scale);
        let bal = identities::residual_tue(&mut env, &um, a);
        let scale = if bal.scale == 0.0 { 1.0 } else { bal.scale };
        tue_rel = tue_rel.max(interior_l2(b, &bal.residual) / scale);
    }
    Ok(SplitCheckReport {
        fdr_rel,
        tue_rel,
        cg_iterations: split.iterations,
        cg_residual: split.final_residual,
    })
}

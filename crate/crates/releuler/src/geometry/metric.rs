//! The acoustical metric, its smooth truncation toward the rest metric,
//! and the principal minors of the velocity-split operator coefficient.

use crate::eos;
use crate::error::Result;
use crate::fields::FieldSet;
use crate::grid::{Grid, ScalarField};
use crate::minkowski::sig;

/// Metric data at one point.
#[derive(Debug, Clone, Copy)]
pub struct MetricPoint {
    pub g_lo: [[f64; 4]; 4],
    pub g_up: [[f64; 4]; 4],
    pub omega: f64,
}

/// `Omega = (c_s^2 + (1 - c_s^2)(u^0)^2)^{-1}`.
pub fn omega_of(cs2: f64, u0: f64) -> f64 {
    1.0 / (cs2 + (1.0 - cs2) * u0 * u0)
}

/// Pointwise acoustical metric from `(h, u)`.
pub fn acoustic_metric_point(h: f64, u: [f64; 4], theta: f64) -> MetricPoint {
    let cs2 = eos::sound_speed_sq_of_h(h, theta);
    metric_from_cs2(cs2, u)
}

pub fn metric_from_cs2(cs2: f64, u: [f64; 4]) -> MetricPoint {
    let omega = omega_of(cs2, u[0]);
    let mut g_up = [[0.0; 4]; 4];
    let mut g_lo = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let m = if a == b { sig(a) } else { 0.0 };
            g_up[a][b] = omega * (cs2 * m + (cs2 - 1.0) * u[a] * u[b]);
            let ula = sig(a) * u[a];
            let ulb = sig(b) * u[b];
            g_lo[a][b] = (1.0 / omega) * (m / cs2 + (1.0 / cs2 - 1.0) * ula * ulb);
        }
    }
    MetricPoint { g_lo, g_up, omega }
}

/// Metric and its coordinate gradient from pointwise `(h, dh, u, du)`.
/// `du[mu][a] = d_mu u^a`, `dh[mu] = d_mu h`. Exact chain rule, so ray
/// tracing conserves its Hamiltonian to integrator accuracy.
pub fn metric_and_grad(
    h: f64,
    dh: [f64; 4],
    u: [f64; 4],
    du: [[f64; 4]; 4],
    theta: f64,
) -> (MetricPoint, [[[f64; 4]; 4]; 4]) {
    let cs2 = eos::sound_speed_sq_of_h(h, theta);
    let dcs2_dh = eos::dsound_speed_sq_dh(h, theta);
    let m = metric_from_cs2(cs2, u);
    let omega = m.omega;
    let mut grad = [[[0.0; 4]; 4]; 4];
    for mu in 0..4 {
        let dcs2 = dcs2_dh * dh[mu];
        // d Omega = -Omega^2 (dcs2 (1 - u0^2) + 2 (1-cs2) u0 du0)
        let domega =
            -omega * omega * (dcs2 * (1.0 - u[0] * u[0]) + 2.0 * (1.0 - cs2) * u[0] * du[mu][0]);
        for a in 0..4 {
            for b in 0..4 {
                let mm = if a == b { sig(a) } else { 0.0 };
                let core = cs2 * mm + (cs2 - 1.0) * u[a] * u[b];
                let dcore = dcs2 * mm
                    + dcs2 * u[a] * u[b]
                    + (cs2 - 1.0) * (du[mu][a] * u[b] + u[a] * du[mu][b]);
                grad[mu][a][b] = domega * core + omega * dcore;
            }
        }
    }
    (m, grad)
}

/// Inverse acoustical metric over a grid: `comps[a][b]` is `g^{ab}`.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub grid: Grid,
    pub comps: Vec<Vec<ScalarField>>,
    pub omega: ScalarField,
}

pub fn acoustic_metric_field(f: &FieldSet) -> Result<MetricField> {
    let grid = f.grid;
    let cs2 = ScalarField {
        grid,
        data: f.h.data.mapv(|h| eos::sound_speed_sq_of_h(h, f.theta)),
    };
    let mut omega_data = cs2.data.clone();
    ndarray::Zip::from(&mut omega_data)
        .and(&f.u.comps[0].data)
        .for_each(|c, &u0| *c = omega_of(*c, u0));
    let omega = ScalarField {
        grid,
        data: omega_data,
    };
    let mut comps = vec![vec![ScalarField::zeros(grid); 4]; 4];
    for a in 0..4 {
        for b in a..4 {
            let m = if a == b { sig(a) } else { 0.0 };
            let uu = &f.u.comps[a] * &f.u.comps[b];
            let t = &(&cs2 * m) + &(&(&cs2 - &ScalarField::constant(grid, 1.0)) * &uu);
            let g = &omega * &t;
            comps[a][b] = g.clone();
            comps[b][a] = g;
        }
    }
    Ok(MetricField { grid, comps, omega })
}

/// Smooth radial bump: 1 on `r <= r_on`, 0 on `r >= r_off`, C^infinity
/// in between (standard exp-based partition).
pub fn bump_chi(grid: Grid, center: Vec<f64>, r_on: f64, r_off: f64) -> ScalarField {
    assert!(r_off > r_on);
    let psi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    ScalarField::from_fn(grid, |x| {
        let mut r2 = 0.0;
        for (xi, ci) in x.iter().zip(center.iter()) {
            // periodic distance
            let mut d = (xi - ci).abs() % grid.len;
            if d > grid.len / 2.0 {
                d = grid.len - d;
            }
            r2 += d * d;
        }
        let r = r2.sqrt();
        let s = (r_off - r) / (r_off - r_on);
        // s >= 1 inside, <= 0 outside
        let a = psi(s);
        let b = psi(1.0 - s);
        a / (a + b)
    })
}

/// `bg = chi (g - g_rest) + g_rest` componentwise; `bg^{00} = -1` survives
/// because both metrics share it.
pub fn truncate_metric(m: &MetricField, chi: &ScalarField, rest: &MetricPoint) -> MetricField {
    let grid = m.grid;
    let mut comps = vec![vec![ScalarField::zeros(grid); 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let g0 = rest.g_up[a][b];
            let dev = &m.comps[a][b] - &ScalarField::constant(grid, g0);
            comps[a][b] = &(chi * &dev) + &ScalarField::constant(grid, g0);
        }
    }
    MetricField {
        grid,
        comps,
        omega: m.omega.clone(),
    }
}

/// Leading principal minors of `P^{bg} = m^{bg} + 2 u^b u^g` in closed
/// form; all are >= 1 on normalized states (the fourth is exactly 1).
pub fn minors(u: [f64; 4]) -> [f64; 4] {
    let q0 = u[0] * u[0];
    let q1 = u[1] * u[1];
    let q2 = u[2] * u[2];
    let q3 = u[3] * u[3];
    [
        -1.0 + 2.0 * q0,
        -1.0 + 2.0 * (q0 - q1),
        -1.0 + 2.0 * (q0 - q1 - q2),
        -1.0 + 2.0 * (q0 - q1 - q2 - q3),
    ]
}

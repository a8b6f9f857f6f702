//! Linear wave equation under the (truncated) acoustical metric:
//! `box_g f = g^{ab} d2_{ab} f = F` with `g^{00} = -1`, integrated as a
//! first-order system in `(f, d_t f)` by RK4 with spectral space
//! derivatives; plus the homogeneous-superposition check of the modified
//! Duhamel principle.

use crate::error::Result;
use crate::geometry::metric::MetricField;
use crate::grid::{Grid, ScalarField};

/// Time-dependent scalar source with its exact time derivative.
pub struct Source<'a> {
    pub f: &'a dyn Fn(f64, &[f64]) -> f64,
    pub df_dt: &'a dyn Fn(f64, &[f64]) -> f64,
}

/// One wave state: value and time derivative.
#[derive(Debug, Clone)]
pub struct WaveState {
    pub t: f64,
    pub f: ScalarField,
    pub ft: ScalarField,
}

fn rhs(m: &MetricField, f: &ScalarField, ft: &ScalarField, forcing: Option<&ScalarField>) -> (ScalarField, ScalarField) {
    let grid = m.grid;
    // ftt = 2 g^{0i} d_i ft + g^{ij} d2_{ij} f - F
    let mut acc = ScalarField::zeros(grid);
    for i in 0..grid.dim {
        let dft = ft.derivative(i);
        acc = &acc + &(&(&m.comps[0][i + 1] * &dft) * 2.0);
    }
    let firsts: Vec<ScalarField> = (0..grid.dim).map(|i| f.derivative(i)).collect();
    for i in 0..grid.dim {
        for j in i..grid.dim {
            let d2 = firsts[i].derivative(j);
            let w = if i == j { 1.0 } else { 2.0 };
            acc = &acc + &(&(&m.comps[i + 1][j + 1] * &d2) * w);
        }
    }
    if let Some(src) = forcing {
        acc = &acc - src;
    }
    (ft.clone(), acc)
}

/// Integrate to `t_max` with fixed `dt`, storing every `store_every`
/// accepted step (and the final one).
pub fn linear_wave_solve(
    m: &MetricField,
    f0: ScalarField,
    f1: ScalarField,
    forcing: Option<&Source>,
    t_max: f64,
    dt: f64,
    store_every: usize,
) -> Result<Vec<WaveState>> {
    let grid = m.grid;
    let sample_forcing = |t: f64| -> Option<ScalarField> {
        forcing.map(|s| ScalarField::from_fn(grid, |x| (s.f)(t, x)))
    };
    let mut state = WaveState { t: 0.0, f: f0, ft: f1 };
    let mut out = vec![state.clone()];
    let steps = (t_max / dt).round() as usize;
    for step in 0..steps {
        let t = state.t;
        let fr1 = sample_forcing(t);
        let k1 = rhs(m, &state.f, &state.ft, fr1.as_ref());
        let fmid = sample_forcing(t + 0.5 * dt);
        let k2 = rhs(
            m,
            &(&state.f + &(&k1.0 * (0.5 * dt))),
            &(&state.ft + &(&k1.1 * (0.5 * dt))),
            fmid.as_ref(),
        );
        let k3 = rhs(
            m,
            &(&state.f + &(&k2.0 * (0.5 * dt))),
            &(&state.ft + &(&k2.1 * (0.5 * dt))),
            fmid.as_ref(),
        );
        let fr4 = sample_forcing(t + dt);
        let k4 = rhs(
            m,
            &(&state.f + &(&k3.0 * dt)),
            &(&state.ft + &(&k3.1 * dt)),
            fr4.as_ref(),
        );
        let c = dt / 6.0;
        state = WaveState {
            t: t + dt,
            f: &state.f + &(&(&(&k1.0 + &(&k2.0 * 2.0)) + &(&(&k3.0 * 2.0) + &k4.0)) * c),
            ft: &state.ft + &(&(&(&k1.1 + &(&k2.1 * 2.0)) + &(&(&k3.1 * 2.0) + &k4.1)) * c),
        };
        if (store_every > 0 && (step + 1) % store_every == 0) || step + 1 == steps {
            out.push(state.clone());
        }
    }
    Ok(out)
}

/// Discrete wave energy `int (d_t f)^2 + g^{ij} d_i f d_j f`.
pub fn wave_energy(m: &MetricField, s: &WaveState) -> f64 {
    let grid = m.grid;
    let mut acc = &s.ft * &s.ft;
    let firsts: Vec<ScalarField> = (0..grid.dim).map(|i| s.f.derivative(i)).collect();
    for i in 0..grid.dim {
        for j in 0..grid.dim {
            let p = &firsts[i] * &firsts[j];
            acc = &acc + &(&m.comps[i + 1][j + 1] * &p);
        }
    }
    acc.data.iter().sum::<f64>() * grid.cell_volume()
}

/// Result of the homogeneous-superposition check.
pub struct DuhamelReport {
    pub residual_l2: f64,
    pub data_f_error: f64,
    pub data_ft_error: f64,
}

/// Build `phi(t) = int_0^t f(t; tau) dtau` from homogeneous solves seeded
/// at every tau node with data `(F(tau, .), 0)`, then measure the
/// residual of the superposition identity over interior times (5-point
/// time stencils) and the data match at t = 0.
///
/// Differentiating under the integral, the boundary terms contribute
/// `-d_t F` from the `g^{00} = -1` slot and `+2 g^{0i} d_i F` from the
/// mixed slot (the cross term of `box_g` carries its factor two onto the
/// boundary as well), so the forced equation is
/// `box_g phi = -d_t F + 2 g^{0i} d_i F`; on shift-free metrics this is
/// the familiar `-d_t F`.
pub fn duhamel_check(m: &MetricField, source: &Source, t_max: f64, n_tau: usize) -> Result<DuhamelReport> {
    let grid = m.grid;
    let dt = t_max / n_tau as f64;
    // solver nodes = tau nodes for exact alignment
    let nt = n_tau + 1;
    // f_j stored on nodes k >= j; phi on all nodes
    let mut phi: Vec<ScalarField> = vec![ScalarField::zeros(grid); nt];
    // trapezoid accumulation: phi(t_k) = dt * (0.5 f_0(t_k) + ... + 0.5 f_k(t_k))
    // phi(t_k) = dt [ f_0(t_k)/2 + f_1(t_k) + ... + f_k(t_k)/2 ], k >= 1
    for j in 0..nt {
        let tau = j as f64 * dt;
        let data = ScalarField::from_fn(grid, |x| (source.f)(tau, x));
        if j == nt - 1 {
            // the last node only contributes the endpoint weight at t_max
            phi[nt - 1] = &phi[nt - 1] + &(&data * (0.5 * dt));
            continue;
        }
        let states = linear_wave_solve(m, data, ScalarField::zeros(grid), None, t_max - tau, dt, 1)?;
        for (step, s) in states.iter().enumerate() {
            let k = j + step;
            if k >= nt {
                break;
            }
            if k == 0 {
                continue; // the integral over an empty interval is zero
            }
            let weight = if j == 0 || j == k { 0.5 * dt } else { dt };
            phi[k] = &phi[k] + &(&s.f * weight);
        }
    }
    // data match at t = 0: phi = 0, d_t phi = F(0)
    let data_f_error = phi[0].linf();
    // d_t phi at node 0 by one-sided 4th order
    let inv12 = 1.0 / (12.0 * dt);
    let dphi0 = &(&(&(&(&phi[0] * -25.0) + &(&phi[1] * 48.0)) + &(&phi[2] * -36.0))
        + &(&(&phi[3] * 16.0) + &(&phi[4] * -3.0)))
        * inv12;
    let f0 = ScalarField::from_fn(grid, |x| (source.f)(0.0, x));
    let data_ft_error = (&dphi0 - &f0).linf();

    // interior residual of box_g phi = g^{0a} d_a F
    let mut res_sq_sum = 0.0;
    let mut count = 0usize;
    for k in 2..nt - 2 {
        let t = k as f64 * dt;
        // time derivatives by 5-point central stencils
        let ftt = &(&(&(&(&phi[k - 2] * -1.0) + &(&phi[k - 1] * 16.0)) + &(&phi[k] * -30.0))
            + &(&(&phi[k + 1] * 16.0) + &(&phi[k + 2] * -1.0)))
            * (1.0 / (12.0 * dt * dt));
        let ft = &(&(&(&phi[k - 2] * 1.0) + &(&phi[k - 1] * -8.0))
            + &(&(&phi[k + 1] * 8.0) + &(&phi[k + 2] * -1.0)))
            * inv12;
        let mut boxphi = &ftt * -1.0;
        for i in 0..grid.dim {
            let dft = ft.derivative(i);
            boxphi = &boxphi + &(&(&m.comps[0][i + 1] * &dft) * 2.0);
        }
        let firsts: Vec<ScalarField> = (0..grid.dim).map(|i| phi[k].derivative(i)).collect();
        for i in 0..grid.dim {
            for j in i..grid.dim {
                let d2 = firsts[i].derivative(j);
                let w = if i == j { 1.0 } else { 2.0 };
                boxphi = &boxphi + &(&(&m.comps[i + 1][j + 1] * &d2) * w);
            }
        }
        // -d_t F + 2 g^{0i} d_i F (see the docs above)
        let dtf = ScalarField::from_fn(grid, |x| (source.df_dt)(t, x));
        let fslice = ScalarField::from_fn(grid, |x| (source.f)(t, x));
        let mut rhs_field = &dtf * -1.0;
        for i in 0..grid.dim {
            let dif = fslice.derivative(i);
            rhs_field = &rhs_field + &(&(&m.comps[0][i + 1] * &dif) * 2.0);
        }
        let r = &boxphi - &rhs_field;
        res_sq_sum += r.data.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume();
        count += 1;
    }
    Ok(DuhamelReport {
        residual_l2: (res_sq_sum / count.max(1) as f64).sqrt(),
        data_f_error,
        data_ft_error,
    })
}

/// Constant Minkowski-like metric field (identity sound speed): used by
/// the flat-space oracles.
pub fn flat_metric(grid: Grid, cs2: f64) -> MetricField {
    let mut comps = vec![vec![ScalarField::zeros(grid); 4]; 4];
    comps[0][0] = ScalarField::constant(grid, -1.0);
    for i in 1..4 {
        comps[i][i] = ScalarField::constant(grid, cs2);
    }
    MetricField {
        grid,
        comps,
        omega: ScalarField::constant(grid, 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn standing_wave_oracle() {
        let grid = Grid::new(1, 128, 2.0 * PI).unwrap();
        let m = flat_metric(grid, 1.0);
        let k = 3.0;
        let f0 = ScalarField::from_fn(grid, |x| (k * x[0]).sin());
        let states = linear_wave_solve(&m, f0, ScalarField::zeros(grid), None, 1.0, 5e-4, 0).unwrap();
        let last = states.last().unwrap();
        let exact = ScalarField::from_fn(grid, |x| (k * 1.0).cos() * (k * x[0]).sin());
        let err = (&last.f - &exact).linf();
        assert!(err <= 1e-6, "standing wave error {err}");
    }

    #[test]
    fn zero_data_zero_forcing_stays_zero() {
        let grid = Grid::new(1, 32, 2.0 * PI).unwrap();
        let m = flat_metric(grid, 0.5);
        let states = linear_wave_solve(
            &m,
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
            None,
            0.5,
            1e-3,
            0,
        )
        .unwrap();
        assert!(states.last().unwrap().f.linf() == 0.0);
    }

    /// Energy drift on a frozen metric whose rows are divergence-free
    /// (g^{11} depends on x2 and vice versa), one period of the slowest mode.
    #[test]
    fn energy_drift_small() {
        let grid = Grid::new(2, 32, 2.0 * PI).unwrap();
        let mut m = flat_metric(grid, 0.0);
        m.comps[1][1] = ScalarField::from_fn(grid, |x| 0.5 + 0.05 * (x[1]).cos());
        m.comps[2][2] = ScalarField::from_fn(grid, |x| 0.5 + 0.05 * (x[0]).sin());
        let f0 = ScalarField::from_fn(grid, |x| (x[0]).sin() + (x[1]).cos());
        let states = linear_wave_solve(&m, f0, ScalarField::zeros(grid), None, 2.0 * PI / 0.5f64.sqrt(), 2e-3, 0).unwrap();
        let e0 = wave_energy(&m, &states[0]);
        let e1 = wave_energy(&m, states.last().unwrap());
        let drift = ((e1 - e0) / e0).abs();
        assert!(drift <= 1e-6, "energy drift {drift}");
    }

    #[test]
    fn duhamel_constant_source_exact() {
        let grid = Grid::new(1, 32, 2.0 * PI).unwrap();
        let m = flat_metric(grid, 1.0);
        let f = |_t: f64, _x: &[f64]| 0.7;
        let dfdt = |_t: f64, _x: &[f64]| 0.0;
        let src = Source { f: &f, df_dt: &dfdt };
        let rep = duhamel_check(&m, &src, 1.0, 40).unwrap();
        assert!(rep.residual_l2 <= 1e-12, "residual {}", rep.residual_l2);
        assert!(rep.data_f_error <= 1e-12);
        assert!(rep.data_ft_error <= 1e-10);
    }

    #[test]
    fn duhamel_flat_convergence() {
        let grid = Grid::new(1, 32, 2.0 * PI).unwrap();
        let m = flat_metric(grid, 1.0);
        let f = |t: f64, x: &[f64]| x[0].sin() * t.sin();
        let dfdt = |t: f64, x: &[f64]| x[0].sin() * t.cos();
        let src = Source { f: &f, df_dt: &dfdt };
        let mut res = Vec::new();
        for &n_tau in &[20usize, 40] {
            res.push(duhamel_check(&m, &src, 1.0, n_tau).unwrap().residual_l2);
        }
        let order = (res[0] / res[1]).log2();
        assert!(order > 1.5, "duhamel convergence order {order} ({res:?})");
    }
}

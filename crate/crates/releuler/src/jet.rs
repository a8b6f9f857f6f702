//! Formal solution jets at a point.
//!
//! Spatial Taylor data for `(p, u^1, u^2, u^3)` is completed to a full
//! space-time jet by recursive differentiation of the first-order system:
//! the order-m time coefficients come from the matrix relation
//! `A^0 dU/dt = -A^i d_i U` evaluated in the truncated algebra. Derived
//! quantities (`h`, `u^0`, and everything downstream) are analytic
//! compositions, so every identity can be checked to rounding error.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{Algebra, JetAlgebra};
use crate::error::{Error, Result};
use crate::fluidvars::FluidVars;
use crate::hyperbolic::flux_matrices;
use crate::identities::{self, Balance, Identity};
use crate::taylor::TaylorPoly;

/// Default base density for randomized jets.
pub const DEFAULT_BASE_DENSITY: f64 = 0.25;

/// Spatial Taylor data (no time dependence) for the evolved variables.
#[derive(Debug, Clone)]
pub struct SpatialData {
    pub p: TaylorPoly,
    pub uvec: [TaylorPoly; 3],
}

/// Full space-time jet of a formal solution.
#[derive(Debug, Clone)]
pub struct SpaceTimeJet {
    pub theta: f64,
    pub order: usize,
    pub p: TaylorPoly,
    pub h: TaylorPoly,
    pub u: [TaylorPoly; 4],
}

impl SpaceTimeJet {
    pub fn env(&self) -> FluidVars<JetAlgebra> {
        let alg = JetAlgebra { trunc: self.order };
        FluidVars::new(alg, self.theta, self.h.clone(), self.u.clone())
    }
}

fn has_time_coeffs(p: &TaylorPoly) -> bool {
    p.iter_coeffs().any(|(b, c)| b[0] > 0 && c != 0.0)
}

/// Solve the 4x4 linear system `m x = rhs` over the truncated polynomial
/// ring by Gaussian elimination (pivots are units on admissible states).
fn poly_solve4(alg: &JetAlgebra, m: &[Vec<TaylorPoly>], rhs: &[TaylorPoly; 4]) -> [TaylorPoly; 4] {
    let mut a: Vec<Vec<TaylorPoly>> = m.iter().map(|r| r.to_vec()).collect();
    let mut b: Vec<TaylorPoly> = rhs.to_vec();
    for col in 0..4 {
        assert!(
            a[col][col].value().abs() > 1e-14,
            "singular pivot in jet completion"
        );
        let inv = a[col][col].recip();
        for r in (col + 1)..4 {
            let f = a[r][col].mul(&inv);
            for c in col..4 {
                let acc = a[col][c].mul(&f);
                a[r][c] = a[r][c].sub(&acc);
            }
            let acc = b[col].mul(&f);
            b[r] = b[r].sub(&acc);
        }
    }
    let mut x = [alg.zero(), alg.zero(), alg.zero(), alg.zero()];
    for r in (0..4).rev() {
        let mut acc = b[r].clone();
        for c in (r + 1)..4 {
            acc = acc.sub(&a[r][c].mul(&x[c]));
        }
        x[r] = acc.mul(&a[r][r].recip());
    }
    x
}

/// Fill all mixed time coefficients from spatial data.
pub fn complete_jet(spatial: &SpatialData, theta: f64, order: usize) -> Result<SpaceTimeJet> {
    if order > 4 {
        return Err(Error::Unsupported(format!(
            "jet order {order} unsupported (max 4)"
        )));
    }
    if order < 1 {
        return Err(Error::Unsupported("jet order must be >= 1".into()));
    }
    for f in std::iter::once(&spatial.p).chain(spatial.uvec.iter()) {
        if has_time_coeffs(f) {
            return Err(Error::Domain("spatial data must not carry time coefficients".into()));
        }
    }
    let p0 = spatial.p.value();
    let cs2_base = theta * p0.powf((theta - 1.0) / theta);
    if !(p0 > 0.0) || cs2_base > 1.0 {
        return Err(Error::Domain(format!(
            "inadmissible base point: p = {p0}, c_s^2 = {cs2_base}"
        )));
    }
    let alg = JetAlgebra { trunc: order };
    let mut big_u: [TaylorPoly; 4] = [
        spatial.p.clone(),
        spatial.uvec[0].clone(),
        spatial.uvec[1].clone(),
        spatial.uvec[2].clone(),
    ];
    for m in 1..=order {
        let mats = flux_matrices(&alg, theta, &big_u[0], &[big_u[1].clone(), big_u[2].clone(), big_u[3].clone()]);
        let mut rhs = [alg.zero(), alg.zero(), alg.zero(), alg.zero()];
        for (j, r) in rhs.iter_mut().enumerate() {
            for i in 1..4 {
                for nu in 0..4 {
                    let d = big_u[nu].diff(i);
                    *r = r.sub(&mats[i][j][nu].mul(&d));
                }
            }
        }
        let x = poly_solve4(&alg, &mats[0], &rhs);
        for j in 0..4 {
            for (beta, _) in x[j].clone().iter_coeffs() {
                let total: usize = beta.iter().map(|&v| v as usize).sum();
                if beta[0] as usize == m - 1 && total < order + 1 && total >= m - 1 {
                    let mut target = beta;
                    target[0] += 1;
                    let tt: usize = target.iter().map(|&v| v as usize).sum();
                    if tt <= order {
                        big_u[j].set_coeff(target, x[j].coeff(beta) / m as f64);
                    }
                }
            }
        }
    }
    // derived jets
    let p = big_u[0].clone();
    let rho = p.powf(1.0 / theta);
    let one = TaylorPoly::constant(order, 1.0);
    let h = one
        .add(&rho.powf(theta - 1.0))
        .ln()
        .scale(theta / (theta - 1.0));
    let mut usq = TaylorPoly::constant(order, 1.0);
    for i in 1..4 {
        usq = usq.add(&big_u[i].mul(&big_u[i]));
    }
    let u0 = usq.sqrt();
    Ok(SpaceTimeJet {
        theta,
        order,
        p,
        h,
        u: [u0, big_u[1].clone(), big_u[2].clone(), big_u[3].clone()],
    })
}

/// Draw spatial coefficients uniformly in [-amplitude, amplitude] scaled
/// by 1/beta!, then complete. Resamples (bounded) on inadmissibility.
pub fn random_constrained_jet(
    seed: u64,
    order: usize,
    amplitude: f64,
    theta: f64,
) -> Result<SpaceTimeJet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..32 {
        let spatial = draw_spatial(&mut rng, order, amplitude, theta);
        match complete_jet(&spatial, theta, order) {
            Ok(j) => return Ok(j),
            Err(Error::Domain(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Domain(
        "could not draw an admissible base state in 32 tries".into(),
    ))
}

fn factorial_of(beta: [u8; 4]) -> f64 {
    let mut f = 1.0;
    for &b in beta.iter() {
        for i in 1..=b {
            f *= i as f64;
        }
    }
    f
}

fn draw_spatial(rng: &mut ChaCha8Rng, order: usize, amplitude: f64, theta: f64) -> SpatialData {
    let base_p = DEFAULT_BASE_DENSITY.powf(theta);
    let mut p = TaylorPoly::zero(order);
    let mut uvec = [
        TaylorPoly::zero(order),
        TaylorPoly::zero(order),
        TaylorPoly::zero(order),
    ];
    let delta = if amplitude > 0.0 {
        rng.gen_range(-amplitude..amplitude)
    } else {
        0.0
    };
    p.set_coeff([0, 0, 0, 0], base_p * (1.0 + delta));
    for ui in uvec.iter_mut() {
        let v = if amplitude > 0.0 {
            rng.gen_range(-amplitude..amplitude)
        } else {
            0.0
        };
        ui.set_coeff([0, 0, 0, 0], v);
    }
    let coeffs: Vec<[u8; 4]> = p
        .iter_coeffs()
        .map(|(b, _)| b)
        .filter(|b| b[0] == 0 && b.iter().any(|&v| v > 0))
        .collect();
    for beta in coeffs {
        let fact = factorial_of(beta);
        if amplitude > 0.0 {
            p.set_coeff(beta, rng.gen_range(-amplitude..amplitude) / fact * base_p);
            for ui in uvec.iter_mut() {
                ui.set_coeff(beta, rng.gen_range(-amplitude..amplitude) / fact);
            }
        }
    }
    SpatialData { p, uvec }
}

/// Negative control: same spatial draw but with *all* time coefficients
/// drawn randomly instead of from the evolution, so no identity should
/// hold beyond accidental cancellation.
pub fn random_unconstrained_jet(seed: u64, order: usize, amplitude: f64, theta: f64) -> SpaceTimeJet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de);
    let spatial = draw_spatial(&mut rng, order, amplitude.max(0.05), theta);
    let mut big_u = [
        spatial.p.clone(),
        spatial.uvec[0].clone(),
        spatial.uvec[1].clone(),
        spatial.uvec[2].clone(),
    ];
    let amp = amplitude.max(0.05);
    for f in big_u.iter_mut() {
        let coeffs: Vec<[u8; 4]> = f.iter_coeffs().map(|(b, _)| b).filter(|b| b[0] > 0).collect();
        for beta in coeffs {
            f.set_coeff(beta, rng.gen_range(-amp..amp) / factorial_of(beta));
        }
    }
    let theta_ = theta;
    let p = big_u[0].clone();
    let rho = p.powf(1.0 / theta_);
    let one = TaylorPoly::constant(order, 1.0);
    let h = one
        .add(&rho.powf(theta_ - 1.0))
        .ln()
        .scale(theta_ / (theta_ - 1.0));
    let mut usq = TaylorPoly::constant(order, 1.0);
    for i in 1..4 {
        usq = usq.add(&big_u[i].mul(&big_u[i]));
    }
    let u0 = usq.sqrt();
    SpaceTimeJet {
        theta,
        order,
        p,
        h,
        u: [u0, big_u[1].clone(), big_u[2].clone(), big_u[3].clone()],
    }
}

/// Negative control for the purely kinematic identities: all four
/// velocity components drawn freely, so even `u^a u_a = -1` fails.
pub fn random_nonnormalized_jet(seed: u64, order: usize, amplitude: f64, theta: f64) -> SpaceTimeJet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbad_0001);
    let amp = amplitude.max(0.05);
    let mut fill = |center: f64, spread: f64| -> TaylorPoly {
        let mut f = TaylorPoly::zero(order);
        // the spread keeps p positive so the thermodynamic compositions
        // stay defined; everything else is free
        let rel: f64 = rng.gen_range(-1.0..1.0);
        f.set_coeff([0, 0, 0, 0], center + spread * rel);
        let coeffs: Vec<[u8; 4]> = f.iter_coeffs().map(|(b, _)| b).filter(|b| b.iter().any(|&v| v > 0)).collect();
        for beta in coeffs {
            f.set_coeff(beta, rng.gen_range(-amp..amp) / factorial_of(beta));
        }
        f
    };
    let base_p = DEFAULT_BASE_DENSITY.powf(theta);
    let p = fill(base_p, 0.4 * base_p);
    let u = [fill(1.0, 0.3), fill(0.0, 0.3), fill(0.0, 0.3), fill(0.0, 0.3)];
    let rho = p.powf(1.0 / theta);
    let one = TaylorPoly::constant(order, 1.0);
    let h = one
        .add(&rho.powf(theta - 1.0))
        .ln()
        .scale(theta / (theta - 1.0));
    SpaceTimeJet {
        theta,
        order,
        p,
        h,
        u,
    }
}

/// Random small free jets for the velocity split checks.
pub fn random_free_vector(seed: u64, order: usize, amplitude: f64) -> [TaylorPoly; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf4ee_0000);
    let mut out = [
        TaylorPoly::zero(order),
        TaylorPoly::zero(order),
        TaylorPoly::zero(order),
        TaylorPoly::zero(order),
    ];
    for f in out.iter_mut() {
        let coeffs: Vec<[u8; 4]> = f.iter_coeffs().map(|(b, _)| b).collect();
        for beta in coeffs {
            f.set_coeff(beta, rng.gen_range(-amplitude..amplitude) / factorial_of(beta));
        }
    }
    out
}

/// Max per-coefficient residual of the primitive equations through the
/// jet's trustworthy order.
pub fn ree_residual(jet: &SpaceTimeJet) -> f64 {
    let mut env = jet.env();
    let mut worst: f64 = 0.0;
    let b = identities::residual_ree_h(&mut env);
    worst = worst.max(b.residual.max_abs_through(b.residual.ord));
    for a in 0..4 {
        let b = identities::residual_ree_u(&mut env, a);
        worst = worst.max(b.residual.max_abs_through(b.residual.ord));
    }
    worst
}

/// Evaluate one identity on the jet: worst relative residual over its
/// free components. `aux_seed` feeds the auxiliary free fields some
/// identities need.
pub fn eval_identity(jet: &SpaceTimeJet, id: Identity, aux_seed: u64) -> Result<f64> {
    let need = id.required_order();
    if jet.order < need {
        return Err(Error::OrderTooLow {
            identity: id.name().into(),
            required: need,
            got: jet.order,
        });
    }
    let alg = JetAlgebra { trunc: jet.order };
    let mut env = jet.env();
    let rel = |b: Balance<TaylorPoly>| b.rel(&alg);
    let mut worst: f64 = 0.0;
    match id {
        Identity::WteH => worst = rel(identities::residual_wte_h(&mut env)),
        Identity::WteU => {
            for a in 0..4 {
                worst = worst.max(rel(identities::residual_wte_u(&mut env, a)));
            }
        }
        Identity::Ceq => {
            for a in 0..4 {
                worst = worst.max(rel(identities::residual_ceq(&mut env, a)));
            }
        }
        Identity::Ceq0 => worst = rel(identities::residual_ceq0(&mut env)),
        Identity::Ceq1 => {
            for a in 0..4 {
                worst = worst.max(rel(identities::residual_ceq1(&mut env, a)));
            }
        }
        Identity::SDe => {
            for a in 0..4 {
                worst = worst.max(rel(identities::residual_sde(&mut env, a)));
            }
        }
        Identity::HDe => {
            for a in 0..4 {
                worst = worst.max(rel(identities::residual_hde(&mut env, a)));
            }
        }
        Identity::OEe => {
            for j in 1..4 {
                for i in 1..j {
                    worst = worst.max(rel(identities::residual_oee(&mut env, j, i)));
                }
            }
        }
        Identity::C2 => {
            for i in 1..4 {
                for j in 1..i {
                    worst = worst.max(rel(identities::residual_c2(&mut env, i, j)));
                }
            }
        }
        Identity::D5 => {
            for i in 1..4 {
                worst = worst.max(rel(identities::residual_d5(&mut env, i)));
            }
        }
        Identity::Oe00 => {
            for a in 0..4 {
                for b in 0..a {
                    worst = worst.max(rel(identities::residual_oe00(&mut env, a, b)));
                }
            }
        }
        Identity::Cr04 => {
            for a in 0..4 {
                for b in 0..a {
                    worst = worst.max(rel(identities::residual_cr04(&mut env, a, b)));
                }
            }
        }
        Identity::Cra0 => {
            for a in 0..4 {
                worst = worst.max(rel(identities::residual_cra0(&mut env, a)));
            }
        }
        Identity::Cra1 => {
            for a in 0..4 {
                for b in 0..4 {
                    if a != b {
                        worst = worst.max(rel(identities::residual_cra1(&mut env, a, b)));
                    }
                }
            }
        }
        Identity::FdUmLocal => {
            let um = random_free_vector(aux_seed, jet.order, 0.1);
            for a in 0..4 {
                worst = worst.max(rel(identities::residual_fd_um_local(&mut env, &um, a)));
            }
        }
    }
    Ok(worst)
}

/// Rotate a jet a quarter turn about the x3 axis (data transform
/// `f'(y) = f(R^T y)` with vector components rotated accordingly).
pub fn rotate_jet_z90(jet: &SpaceTimeJet) -> SpaceTimeJet {
    let rot_scalar = |f: &TaylorPoly| -> TaylorPoly {
        let mut out = TaylorPoly::zero(jet.order);
        for (b, c) in f.iter_coeffs() {
            // (R^T y) = (y_2, -y_1, y_3) for R: (x,y,z) -> (-y, x, z)
            let nb = [b[0], b[2], b[1], b[3]];
            let s = if b[2] % 2 == 0 { 1.0 } else { -1.0 };
            out.set_coeff(nb, s * c);
        }
        out
    };
    let u1 = rot_scalar(&jet.u[2]).neg();
    let u2 = rot_scalar(&jet.u[1]);
    SpaceTimeJet {
        theta: jet.theta,
        order: jet.order,
        p: rot_scalar(&jet.p),
        h: rot_scalar(&jet.h),
        u: [rot_scalar(&jet.u[0]), u1, u2, rot_scalar(&jet.u[3])],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_state_has_zero_time_derivatives() {
        let order = 3;
        let mut p = TaylorPoly::zero(order);
        p.set_coeff([0, 0, 0, 0], 0.0625);
        let spatial = SpatialData {
            p,
            uvec: [
                TaylorPoly::zero(order),
                TaylorPoly::zero(order),
                TaylorPoly::zero(order),
            ],
        };
        let jet = complete_jet(&spatial, 2.0, order).unwrap();
        for (b, c) in jet.p.iter_coeffs() {
            if b != [0, 0, 0, 0] {
                assert!(c.abs() < 1e-15, "nonzero coeff at {b:?}");
            }
        }
        assert_relative_eq!(jet.h.value(), 2.0 * 1.25f64.ln(), max_relative = 1e-13);
        assert_relative_eq!(jet.u[0].value(), 1.0);
    }

    /// Rest base state with d_i u^j = a delta_i^j and d_i h = 0 forces
    /// dt h = -3 a c_s^2 = -1.5 a and dt u = 0 (hand substitution).
    #[test]
    fn rest_state_divergence_example() {
        let order = 2;
        let a = 0.01;
        let mut p = TaylorPoly::zero(order);
        p.set_coeff([0, 0, 0, 0], 0.0625);
        let mut uvec = [
            TaylorPoly::zero(order),
            TaylorPoly::zero(order),
            TaylorPoly::zero(order),
        ];
        uvec[0].set_coeff([0, 1, 0, 0], a);
        uvec[1].set_coeff([0, 0, 1, 0], a);
        uvec[2].set_coeff([0, 0, 0, 1], a);
        let jet = complete_jet(&SpatialData { p, uvec }, 2.0, order).unwrap();
        let dth = jet.h.coeff([1, 0, 0, 0]);
        assert_relative_eq!(dth, -1.5 * a, max_relative = 1e-12);
        for i in 0..4 {
            assert!(jet.u[i].coeff([1, 0, 0, 0]).abs() < 1e-14, "dt u^{i} != 0");
        }
    }

    #[test]
    fn ree_vanishes_through_order() {
        for order in 1..=4 {
            let jet = random_constrained_jet(7 + order as u64, order, 0.1, 2.0).unwrap();
            let r = ree_residual(&jet);
            assert!(r < 1e-12, "order {order}: REE residual {r}");
        }
    }

    #[test]
    fn normalization_jet_exact() {
        let jet = random_constrained_jet(9, 3, 0.1, 2.0).unwrap();
        let mut s = TaylorPoly::constant(3, 1.0);
        s = s.sub(&jet.u[0].mul(&jet.u[0]));
        for i in 1..4 {
            s = s.add(&jet.u[i].mul(&jet.u[i]));
        }
        assert!(s.max_abs_through(3) < 1e-13);
    }

    #[test]
    fn amplitude_zero_is_constant_state() {
        let jet = random_constrained_jet(1, 3, 0.0, 2.0).unwrap();
        for (b, c) in jet.p.iter_coeffs() {
            if b != [0, 0, 0, 0] {
                assert_eq!(c, 0.0);
            }
        }
        assert_eq!(jet.p.value(), 0.0625);
        assert_eq!(jet.u[0].value(), 1.0);
    }

    #[test]
    fn seed_reproducible() {
        let a = random_constrained_jet(123, 3, 0.1, 2.0).unwrap();
        let b = random_constrained_jet(123, 3, 0.1, 2.0).unwrap();
        for ((_, x), (_, y)) in a.h.iter_coeffs().zip(b.h.iter_coeffs()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn shifted_basepoint_fd_oracle() {
        // d_t d_x coefficients recomputed by finite differences of two
        // completions at shifted base points (polynomial data shifts
        // exactly).
        let order = 2;
        let theta = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let spatial = super::draw_spatial(&mut rng, order, 0.08, theta);
        let jet0 = complete_jet(&spatial, theta, order).unwrap();
        let d = 1e-6;
        let shift = [0.0, d, 0.0, 0.0];
        let shifted = SpatialData {
            p: spatial.p.shift_base(&shift),
            uvec: [
                spatial.uvec[0].shift_base(&shift),
                spatial.uvec[1].shift_base(&shift),
                spatial.uvec[2].shift_base(&shift),
            ],
        };
        let jet1 = complete_jet(&shifted, theta, order).unwrap();
        for j in 0..4 {
            let f0 = jet0.u[j].coeff([1, 0, 0, 0]);
            let f1 = jet1.u[j].coeff([1, 0, 0, 0]);
            let fd = (f1 - f0) / d;
            let exact = jet0.u[j].coeff([1, 1, 0, 0]); // beta! = 1
            assert!(
                (fd - exact).abs() < 1e-7 * (1.0 + exact.abs()),
                "component {j}: fd {fd} vs {exact}"
            );
        }
    }
}

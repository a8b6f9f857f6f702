//! First-order symmetric form of the system in the variables
//! `U = (p, u^1, u^2, u^3)`, written once over the generic algebra so the
//! same matrices drive the grid solver (pointwise) and the formal jet
//! completion (Taylor).
//!
//! With `rho'(p) = 1/c_s^2` the matrices are
//!
//! ```text
//! A^mu[0][0] = rho'(p) (rho+p)^{-2} u^mu
//! A^0 [0][i] = (rho+p)^{-1} u^i / u^0          (i spatial)
//! A^k [0][i] = (rho+p)^{-1} delta_{ki}
//! A^mu[i][j] = u^mu (delta_{ij} - u^i u^j / (u^0)^2)
//! ```
//!
//! symmetric, with `A^0` positive definite on the admissible set. The
//! off-diagonal signs are fixed by requiring row-by-row equivalence with
//! the primitive equations in signature (-,+,+,+); the jet suite checks
//! that equivalence exactly.

use crate::algebra::Algebra;

/// Thermodynamic scalars entering the matrices, as algebra elements.
pub struct FluxScalars<F> {
    /// `(rho + p)^{-1}`
    pub inv_rho_p: F,
    /// `rho'(p) (rho + p)^{-2}`
    pub rho_prime_inv_sq: F,
    /// `u^0 = sqrt(1 + |u|^2)`
    pub u0: F,
    /// `(u^0)^{-1}`
    pub inv_u0: F,
}

pub fn flux_scalars<A: Algebra>(alg: &A, theta: f64, p: &A::F, uvec: &[A::F; 3]) -> FluxScalars<A::F> {
    // rho = p^(1/theta)
    let rho = alg.compose(p, &move |c, k| {
        let a = 1.0 / theta;
        let mut coef = 1.0;
        for i in 0..k {
            coef *= a - i as f64;
        }
        coef * c.powf(a - k as f64)
    });
    let rho_p = alg.add(&rho, p);
    let inv_rho_p = alg.compose(&rho_p, &recip);
    // c_s^2 = theta rho^{theta-1} = theta p^{(theta-1)/theta}
    let cs2 = alg.compose(p, &move |c, k| {
        let a = (theta - 1.0) / theta;
        let mut coef = theta;
        for i in 0..k {
            coef *= a - i as f64;
        }
        coef * c.powf(a - k as f64)
    });
    let rho_prime = alg.compose(&cs2, &recip);
    let rho_prime_inv_sq = alg.mul(&rho_prime, &alg.mul(&inv_rho_p, &inv_rho_p));
    let mut usq = alg.constant(1.0);
    for ui in uvec {
        usq = alg.add(&usq, &alg.mul(ui, ui));
    }
    let u0 = alg.compose(&usq, &|c, k| {
        let mut coef = 1.0;
        for i in 0..k {
            coef *= 0.5 - i as f64;
        }
        coef * c.powf(0.5 - k as f64)
    });
    let inv_u0 = alg.compose(&u0, &recip);
    FluxScalars {
        inv_rho_p,
        rho_prime_inv_sq,
        u0,
        inv_u0,
    }
}

fn recip(c: f64, k: usize) -> f64 {
    let mut f = 1.0;
    for i in 1..=k {
        f *= i as f64;
    }
    (if k % 2 == 0 { 1.0 } else { -1.0 }) * f * c.powi(-(k as i32) - 1)
}

/// The four symmetric matrices `A^0..A^3` as `out[mu][row][col]`.
pub fn flux_matrices<A: Algebra>(
    alg: &A,
    theta: f64,
    p: &A::F,
    uvec: &[A::F; 3],
) -> Vec<Vec<Vec<A::F>>> {
    let s = flux_scalars(alg, theta, p, uvec);
    let u = |mu: usize| -> A::F {
        if mu == 0 {
            s.u0.clone()
        } else {
            uvec[mu - 1].clone()
        }
    };
    let inv_u0_sq = alg.mul(&s.inv_u0, &s.inv_u0);
    let mut out = vec![vec![vec![alg.zero(); 4]; 4]; 4];
    for mu in 0..4 {
        let umu = u(mu);
        out[mu][0][0] = alg.mul(&s.rho_prime_inv_sq, &umu);
        for i in 1..4 {
            let entry = if mu == 0 {
                alg.mul(&s.inv_rho_p, &alg.mul(&u(i), &s.inv_u0))
            } else if mu == i {
                s.inv_rho_p.clone()
            } else {
                alg.zero()
            };
            out[mu][0][i] = entry.clone();
            out[mu][i][0] = entry;
            for j in 1..4 {
                let del = if i == j { 1.0 } else { 0.0 };
                let uu = alg.mul(&u(i), &u(j));
                let core = alg.sub(&alg.constant(del), &alg.mul(&uu, &inv_u0_sq));
                out[mu][i][j] = alg.mul(&umu, &core);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ScalarAlgebra;
    use approx::assert_relative_eq;

    #[test]
    fn rest_state_matrix_values() {
        let alg = ScalarAlgebra;
        // theta = 2, rho = 0.25: p = 0.0625, c_s^2 = 0.5, rho + p = 0.3125
        let a = flux_matrices(&alg, 2.0, &0.0625, &[0.0, 0.0, 0.0]);
        assert_relative_eq!(a[0][0][0], 20.48, max_relative = 1e-12);
        for i in 1..4 {
            assert_relative_eq!(a[0][i][i], 1.0, max_relative = 1e-12);
            assert_relative_eq!(a[0][0][i], 0.0);
        }
        // off-diagonal coupling magnitude (rho+p)^{-1} = 3.2; the sign is
        // pinned by equivalence with the primitive system.
        assert_relative_eq!(a[1][0][1], 3.2, max_relative = 1e-12);
        assert_relative_eq!(a[1][1][0], 3.2, max_relative = 1e-12);
        assert_relative_eq!(a[1][0][2], 0.0);
        assert_relative_eq!(a[1][2][2], 0.0);
    }

    #[test]
    fn matrices_symmetric_on_random_states() {
        use rand::prelude::*;
        let alg = ScalarAlgebra;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p = rng.gen_range(0.001..0.24);
            let uv = [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ];
            let a = flux_matrices(&alg, 2.0, &p, &uv);
            for mu in 0..4 {
                for r in 0..4 {
                    for c in 0..4 {
                        assert!(
                            (a[mu][r][c] - a[mu][c][r]).abs() < 1e-14,
                            "asymmetry at mu={mu} ({r},{c})"
                        );
                    }
                }
            }
        }
    }
}

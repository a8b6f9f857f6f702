//! The six sub-pieces of the double-curl source family, each checked
//! against a direct evaluation (guards the term table piecewise).

use releuler::algebra::{Algebra, JetAlgebra};
use releuler::identities;
use releuler::jet::random_constrained_jet;
use releuler::minkowski::sig;

#[test]
fn r3_pieces() {
    let order = 4;
    let jet = random_constrained_jet(5, order, 0.1, 2.0).unwrap();
    let alg = JetAlgebra { trunc: order };
    let a = 1usize;
    let mut env = jet.env();

    // direct evaluators for u_b d_g (u^X d^Y w^k d^Z u_k) patterns
    // pattern encoded by which slot carries alpha: R31: (u^a, d^g w, d^b u),
    // R32: (u^a, d^b w, d^g u), R33: (u^b, d^a w, d^g u),
    // R34: (u^b, d^g w, d^a u), R35: (u^g, d^b w, d^a u), R36: (u^g, d^a w, d^b u)
    let direct = |env: &mut releuler::fluidvars::FluidVars<JetAlgebra>, which: usize| -> _ {
        let alg = env.alg;
        let mut acc = alg.zero();
        for b in 0..4 {
            for g in 0..4 {
                // inner = u^X d^Y w^k d^Z u_k as a field, then u_b d_g(inner)
                let mut inner = alg.zero();
                for k in 0..4 {
                    let (ux, dyw, dzu) = match which {
                        1 => (env.u(a), env.dw(g, k), env.du_lo(b, k)),
                        2 => (env.u(a), env.dw(b, k), env.du_lo(g, k)),
                        3 => (env.u(b), env.dw(a, k), env.du_lo(g, k)),
                        4 => (env.u(b), env.dw(g, k), env.du_lo(a, k)),
                        5 => (env.u(g), env.dw(b, k), env.du_lo(a, k)),
                        6 => (env.u(g), env.dw(a, k), env.du_lo(b, k)),
                        _ => unreachable!(),
                    };
                    let s = match which {
                        1 => sig(g) * sig(b),
                        2 => sig(b) * sig(g),
                        3 => sig(a) * sig(g),
                        4 => sig(g) * sig(a),
                        5 => sig(b) * sig(a),
                        6 => sig(a) * sig(b),
                        _ => unreachable!(),
                    };
                    inner = alg.add(&inner, &alg.scale(&alg.mul(&ux, &alg.mul(&dyw, &dzu)), s));
                }
                let d = alg.diff(&inner, g);
                let ub = env.u_lo(b);
                acc = alg.add(&acc, &alg.mul(&ub, &d));
            }
        }
        acc
    };

    // claimed expansions per piece (with coefficients folded in)
    // -2 R31 -> u.d(F1' = -2 u^a d^g w d_g u) + ids 15,16,17,18
    {
        let lhs = alg.scale(&direct(&mut env, 1), -2.0);
        let f = identities::sde_f_part(&mut env, a, 1);
        let mut rhs = alg.zero();
        for k in 0..4 {
            let d = alg.diff(&f, k);
            let uk = env.u(k);
            rhs = alg.add(&rhs, &alg.mul(&uk, &d));
        }
        for id in [15, 16, 17, 18] {
            let t = identities::sde_e_term(&mut env, id, a);
            rhs = alg.add(&rhs, &t);
        }
        let d = alg.sub(&lhs, &rhs);
        assert!(d.max_abs_through(d.ord) < 1e-13, "-2R31 piece mismatch");
    }
    // +2 R32 -> ids 19,20,21,22,23
    {
        let lhs = alg.scale(&direct(&mut env, 2), 2.0);
        let mut rhs = alg.zero();
        for id in [19, 20, 21, 22, 23] {
            let t = identities::sde_e_term(&mut env, id, a);
            rhs = alg.add(&rhs, &t);
        }
        let d = alg.sub(&lhs, &rhs);
        assert!(d.max_abs_through(d.ord) < 1e-13, "+2R32 piece mismatch");
    }
    // -2 R33 -> u.d(F parts 2,3) + d^a(Gamma part 1) + half of id14 + ids 24..29
    {
        let lhs = alg.scale(&direct(&mut env, 3), -2.0);
        let mut rhs = alg.zero();
        for part in [2, 3] {
            let f = identities::sde_f_part(&mut env, a, part);
            for k in 0..4 {
                let d = alg.diff(&f, k);
                let uk = env.u(k);
                rhs = alg.add(&rhs, &alg.mul(&uk, &d));
            }
        }
        let g1 = identities::sde_gamma_part(&mut env, 1);
        rhs = alg.add(&rhs, &alg.scale(&alg.diff(&g1, a), sig(a)));
        let half14 = identities::sde_e_term(&mut env, 14, a);
        rhs = alg.add(&rhs, &alg.scale(&half14, 0.5));
        let t13 = identities::sde_e_term(&mut env, 13, a);
        rhs = alg.add(&rhs, &t13);
        for id in 24..=29 {
            let t = identities::sde_e_term(&mut env, id, a);
            rhs = alg.add(&rhs, &t);
        }
        // the cancelling u.d(-2 d^a w u du) payload, restored for the solo check
        let mut pay = alg.zero();
        for l in 0..4 {
            let dw = env.dw(a, l);
            let mut ugdu = alg.zero();
            for g in 0..4 {
                let du = env.du_lo(g, l);
                let ug = env.u(g);
                ugdu = alg.add(&ugdu, &alg.mul(&ug, &du));
            }
            pay = alg.add(&pay, &alg.scale(&alg.mul(&dw, &ugdu), sig(a)));
        }
        let pay = alg.scale(&pay, -2.0);
        for k in 0..4 {
            let d = alg.diff(&pay, k);
            let uk = env.u(k);
            rhs = alg.add(&rhs, &alg.mul(&uk, &d));
        }
        let d = alg.sub(&lhs, &rhs);
        assert!(d.max_abs_through(d.ord) < 1e-13, "-2R33 piece mismatch");
    }
    // +2 R34 -> d^a(Gamma part 0) + half id14 + id 30
    {
        let lhs = alg.scale(&direct(&mut env, 4), 2.0);
        let mut rhs = alg.zero();
        let g0 = identities::sde_gamma_part(&mut env, 0);
        rhs = alg.add(&rhs, &alg.scale(&alg.diff(&g0, a), sig(a)));
        let half14 = identities::sde_e_term(&mut env, 14, a);
        rhs = alg.add(&rhs, &alg.scale(&half14, 0.5));
        let t = identities::sde_e_term(&mut env, 30, a);
        rhs = alg.add(&rhs, &t);
        let d = alg.sub(&lhs, &rhs);
        assert!(d.max_abs_through(d.ord) < 1e-13, "+2R34 piece mismatch");
    }
    // -2 R35 -> ids 31..35
    {
        let lhs = alg.scale(&direct(&mut env, 5), -2.0);
        let mut rhs = alg.zero();
        for id in 31..=35 {
            let t = identities::sde_e_term(&mut env, id, a);
            rhs = alg.add(&rhs, &t);
        }
        let d = alg.sub(&lhs, &rhs);
        assert!(d.max_abs_through(d.ord) < 1e-13, "-2R35 piece mismatch");
    }
    // +2 R36 -> ids 36..39 + the cancelling payload 2 u.d(d^a w u du)
    {
        let lhs = alg.scale(&direct(&mut env, 6), 2.0);
        let mut rhs = alg.zero();
        for id in 36..=39 {
            let t = identities::sde_e_term(&mut env, id, a);
            rhs = alg.add(&rhs, &t);
        }
        let mut pay = alg.zero();
        for l in 0..4 {
            let dw = env.dw(a, l);
            let mut ugdu = alg.zero();
            for g in 0..4 {
                let du = env.du_lo(g, l);
                let ug = env.u(g);
                ugdu = alg.add(&ugdu, &alg.mul(&ug, &du));
            }
            pay = alg.add(&pay, &alg.scale(&alg.mul(&dw, &ugdu), sig(a)));
        }
        let pay = alg.scale(&pay, 2.0);
        for k in 0..4 {
            let d = alg.diff(&pay, k);
            let uk = env.u(k);
            rhs = alg.add(&rhs, &alg.mul(&uk, &d));
        }
        let d = alg.sub(&lhs, &rhs);
        assert!(d.max_abs_through(d.ord) < 1e-13, "+2R36 piece mismatch");
    }
}

//! Memoized accessors for the fluid quantities every identity is built
//! from: the primitive fields (h, u), thermodynamic scalars composed from
//! h, the vorticity ladder w -> W -> G, and their derivatives.
//!
//! Index conventions: accessors return up-index components; `_lo` variants
//! fold in the metric sign. Derivative slots are always down.

use std::collections::HashMap;

use crate::algebra::Algebra;
use crate::minkowski::{sig, EPS_PERMS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    DU(usize, usize),
    D2U(usize, usize, usize),
    DH(usize),
    D2H(usize, usize),
    ExpH,
    ExpMH,
    Cs2,
    Cs2Inv,
    DCs2Dh,
    Omega,
    W(usize),
    DW(usize, usize),
    D2W(usize, usize, usize),
    BigW(usize),
    DBigW(usize, usize),
    VortW(usize),
    G(usize),
    GUp(usize, usize),
    BoxGU(usize),
    BoxGH,
}

pub struct FluidVars<A: Algebra> {
    pub alg: A,
    pub theta: f64,
    h: A::F,
    u: [A::F; 4],
    cache: HashMap<Key, A::F>,
}

impl<A: Algebra> FluidVars<A> {
    pub fn new(alg: A, theta: f64, h: A::F, u: [A::F; 4]) -> Self {
        FluidVars {
            alg,
            theta,
            h,
            u,
            cache: HashMap::new(),
        }
    }

    fn memo(&mut self, key: Key, f: impl FnOnce(&mut Self) -> A::F) -> A::F {
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let v = f(self);
        self.cache.insert(key, v.clone());
        v
    }

    // --- primitive fields -------------------------------------------------

    pub fn h(&self) -> A::F {
        self.h.clone()
    }

    pub fn u(&self, a: usize) -> A::F {
        self.u[a].clone()
    }

    pub fn u_lo(&self, a: usize) -> A::F {
        let alg = self.alg;
        alg.scale(&self.u[a], sig(a))
    }

    pub fn dh(&mut self, d: usize) -> A::F {
        let alg = self.alg;
        let h = self.h.clone();
        self.memo(Key::DH(d), |_s| alg.diff(&h, d))
    }

    /// `d^d h` (raised derivative slot).
    pub fn dh_up(&mut self, d: usize) -> A::F {
        let alg = self.alg;
        let v = self.dh(d);
        alg.scale(&v, sig(d))
    }

    pub fn d2h(&mut self, d1: usize, d2: usize) -> A::F {
        let alg = self.alg;
        let (a, b) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let key = Key::D2H(a, b);
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let first = self.dh(a);
        let v = alg.diff(&first, b);
        self.cache.insert(key, v.clone());
        v
    }

    pub fn du(&mut self, d: usize, a: usize) -> A::F {
        let alg = self.alg;
        let u = self.u[a].clone();
        self.memo(Key::DU(d, a), |_s| alg.diff(&u, d))
    }

    pub fn du_lo(&mut self, d: usize, a: usize) -> A::F {
        let alg = self.alg;
        let v = self.du(d, a);
        alg.scale(&v, sig(a))
    }

    /// `d^d u^a`.
    pub fn du_up(&mut self, d: usize, a: usize) -> A::F {
        let alg = self.alg;
        let v = self.du(d, a);
        alg.scale(&v, sig(d))
    }

    pub fn d2u(&mut self, d1: usize, d2: usize, a: usize) -> A::F {
        let alg = self.alg;
        let (p, q) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let key = Key::D2U(p, q, a);
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let first = self.du(p, a);
        let v = alg.diff(&first, q);
        self.cache.insert(key, v.clone());
        v
    }

    // --- thermodynamic scalars --------------------------------------------

    pub fn exp_h(&mut self) -> A::F {
        let alg = self.alg;
        let h = self.h.clone();
        self.memo(Key::ExpH, |_s| alg.compose(&h, &|c, _| c.exp()))
    }

    pub fn exp_mh(&mut self) -> A::F {
        let h = self.h.clone();
        self.memo(Key::ExpMH, |s| {
            s.alg
                .compose(&h, &|c, k| if k % 2 == 0 { (-c).exp() } else { -(-c).exp() })
        })
    }

    pub fn cs2(&mut self) -> A::F {
        let alg = self.alg;
        let h = self.h.clone();
        let theta = self.theta;
        self.memo(Key::Cs2, |_s| {
            let lam = (theta - 1.0) / theta;
            alg.compose(&h, &move |c, k| {
                if k == 0 {
                    theta * ((lam * c).exp() - 1.0)
                } else {
                    theta * lam.powi(k as i32) * (lam * c).exp()
                }
            })
        })
    }

    pub fn cs2_inv(&mut self) -> A::F {
        let alg = self.alg;
        let c = self.cs2();
        self.memo(Key::Cs2Inv, |_s| alg.compose(&c, &recip_derivs))
    }

    /// `d(c_s^2)/dh` as a field (composed from h, not a spatial derivative).
    pub fn dcs2_dh(&mut self) -> A::F {
        let alg = self.alg;
        let h = self.h.clone();
        let theta = self.theta;
        self.memo(Key::DCs2Dh, |_s| {
            let lam = (theta - 1.0) / theta;
            alg.compose(&h, &move |c, k| {
                (theta - 1.0) * lam.powi(k as i32) * (lam * c).exp()
            })
        })
    }

    /// `c_s^{-1} c_s' = (c_s^2)' / (2 c_s^2)` with `' = d/dh`.
    pub fn cs_inv_csp(&mut self) -> A::F {
        let alg = self.alg;
        let a = self.dcs2_dh();
        let b = self.cs2_inv();
        let p = alg.mul(&a, &b);
        alg.scale(&p, 0.5)
    }

    /// `c_s^{-3} c_s'`.
    pub fn cs3_inv_csp(&mut self) -> A::F {
        let alg = self.alg;
        let a = self.cs_inv_csp();
        let b = self.cs2_inv();
        alg.mul(&a, &b)
    }

    /// `Omega = (c_s^2 + (1 - c_s^2)(u^0)^2)^{-1}`.
    pub fn omega(&mut self) -> A::F {
        let alg = self.alg;
        let cs2 = self.cs2();
        let u0 = self.u(0);
        self.memo(Key::Omega, |_s| {
            let u0sq = alg.mul(&u0, &u0);
            let t = alg.mul(&cs2, &u0sq);
            let inner = alg.sub(&alg.add(&cs2, &u0sq), &t);
            alg.compose(&inner, &recip_derivs)
        })
    }

    /// Inverse acoustical metric component `g^{ab}`.
    pub fn g_up(&mut self, a: usize, b: usize) -> A::F {
        let alg = self.alg;
        let (p, q) = if a <= b { (a, b) } else { (b, a) };
        let key = Key::GUp(p, q);
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let cs2 = self.cs2();
        let om = self.omega();
        let uu = alg.mul(&self.u(p), &self.u(q));
        let m = if p == q { sig(p) } else { 0.0 };
        // Omega * (cs2 * m + (cs2 - 1) uu)
        let t1 = alg.scale(&cs2, m);
        let t2 = alg.mul(&alg.sub(&cs2, &alg.constant(1.0)), &uu);
        let v = alg.mul(&om, &alg.add(&t1, &t2));
        self.cache.insert(key, v.clone());
        v
    }

    // --- vorticity ladder ---------------------------------------------------

    /// Vorticity of a one-form supplied through lowered components:
    /// `vort^a(A) = -eps^{abgd} u_b d_g A_d`.
    pub fn vort_with(&mut self, a: usize, mut one_form_lo: impl FnMut(&mut Self, usize) -> A::F) -> A::F {
        let alg = self.alg;
        let mut acc = alg.zero();
        for (p, s) in EPS_PERMS.iter() {
            if p[0] != a {
                continue;
            }
            let (b, g, d) = (p[1], p[2], p[3]);
            // eps^{abgd} = -s
            let ad = one_form_lo(self, d);
            let dad = alg.diff(&ad, g);
            let term = alg.mul(&self.u_lo(b), &dad);
            // -eps^{abgd} u_b dA = -(-s) * ... = +s * ...
            let term = alg.scale(&term, *s);
            alg.add_assign(&mut acc, &term);
        }
        acc
    }

    /// Modified vorticity `w^a = vort^a(e^h u)`.
    pub fn w(&mut self, a: usize) -> A::F {
        let alg = self.alg;
        let key = Key::W(a);
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let eh = self.exp_h();
        let v = self.vort_with(a, |s, d| {
            let ul = s.u_lo(d);
            alg.mul(&eh, &ul)
        });
        self.cache.insert(key, v.clone());
        v
    }

    pub fn w_lo(&mut self, a: usize) -> A::F {
        let alg = self.alg;
        let v = self.w(a);
        alg.scale(&v, sig(a))
    }

    pub fn dw(&mut self, d: usize, a: usize) -> A::F {
        let alg = self.alg;
        let w = self.w(a);
        self.memo(Key::DW(d, a), |_s| alg.diff(&w, d))
    }

    pub fn dw_lo(&mut self, d: usize, a: usize) -> A::F {
        let alg = self.alg;
        let v = self.dw(d, a);
        alg.scale(&v, sig(a))
    }

    pub fn d2w(&mut self, d1: usize, d2: usize, a: usize) -> A::F {
        let alg = self.alg;
        let (p, q) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let key = Key::D2W(p, q, a);
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let first = self.dw(p, a);
        let v = alg.diff(&first, q);
        self.cache.insert(key, v.clone());
        v
    }

    /// `vort^a(w)` (the plain vorticity of the w one-form).
    pub fn vort_w(&mut self, a: usize) -> A::F {
        let alg = self.alg;
        let key = Key::VortW(a);
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let mut acc = alg.zero();
        for (p, s) in EPS_PERMS.iter() {
            if p[0] != a {
                continue;
            }
            let (b, g, d) = (p[1], p[2], p[3]);
            let dwd = self.dw_lo(g, d);
            let term = alg.mul(&self.u_lo(b), &dwd);
            let term = alg.scale(&term, *s);
            alg.add_assign(&mut acc, &term);
        }
        self.cache.insert(key, acc.clone());
        acc
    }

    /// `W^a = -eps^{abgd} u_b d_g w_d + c_s^{-2} eps^{abgd} u_b w_d d_g h`.
    pub fn big_w(&mut self, a: usize) -> A::F {
        let alg = self.alg;
        let key = Key::BigW(a);
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let vw = self.vort_w(a);
        let cs2i = self.cs2_inv();
        let mut corr = alg.zero();
        for (p, s) in EPS_PERMS.iter() {
            if p[0] != a {
                continue;
            }
            let (b, g, d) = (p[1], p[2], p[3]);
            // eps^{abgd} u_b w_d d_g h  = (-s) u_b w_d d_g h
            let t = alg.mul(&self.u_lo(b), &self.w_lo(d));
            let dh = self.dh(g);
            let t = alg.mul(&t, &dh);
            let t = alg.scale(&t, -*s);
            alg.add_assign(&mut corr, &t);
        }
        let v = alg.add(&vw, &alg.mul(&cs2i, &corr));
        self.cache.insert(key, v.clone());
        v
    }

    pub fn big_w_lo(&mut self, a: usize) -> A::F {
        let alg = self.alg;
        let v = self.big_w(a);
        alg.scale(&v, sig(a))
    }

    pub fn d_big_w(&mut self, d: usize, a: usize) -> A::F {
        let alg = self.alg;
        let w = self.big_w(a);
        self.memo(Key::DBigW(d, a), |_s| alg.diff(&w, d))
    }

    pub fn d_big_w_lo(&mut self, d: usize, a: usize) -> A::F {
        let alg = self.alg;
        let v = self.d_big_w(d, a);
        alg.scale(&v, sig(a))
    }

    /// `G^a = vort^a(W) = -eps^{abgd} u_b d_g W_d`.
    pub fn big_g(&mut self, a: usize) -> A::F {
        let alg = self.alg;
        let key = Key::G(a);
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let mut acc = alg.zero();
        for (p, s) in EPS_PERMS.iter() {
            if p[0] != a {
                continue;
            }
            let (b, g, d) = (p[1], p[2], p[3]);
            let dwd = self.d_big_w_lo(g, d);
            let term = alg.mul(&self.u_lo(b), &dwd);
            let term = alg.scale(&term, *s);
            alg.add_assign(&mut acc, &term);
        }
        self.cache.insert(key, acc.clone());
        acc
    }

    /// `box_g u^a = g^{bc} d2_{bc} u^a`, memoized.
    pub fn box_g_u(&mut self, a: usize) -> A::F {
        let alg = self.alg;
        let key = Key::BoxGU(a);
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let mut acc = alg.zero();
        for b in 0..4 {
            for c in 0..4 {
                let g = self.g_up(b, c);
                let d2 = self.d2u(b, c, a);
                let t = alg.mul(&g, &d2);
                alg.add_assign(&mut acc, &t);
            }
        }
        self.cache.insert(key, acc.clone());
        acc
    }

    pub fn box_g_h(&mut self) -> A::F {
        let alg = self.alg;
        if let Some(v) = self.cache.get(&Key::BoxGH) {
            return v.clone();
        }
        let mut acc = alg.zero();
        for b in 0..4 {
            for c in 0..4 {
                let g = self.g_up(b, c);
                let d2 = self.d2h(b, c);
                let t = alg.mul(&g, &d2);
                alg.add_assign(&mut acc, &t);
            }
        }
        self.cache.insert(Key::BoxGH, acc.clone());
        acc
    }

    /// `box_g` of an externally supplied field (not memoized).
    pub fn box_g_of(&mut self, f: &A::F) -> A::F {
        let alg = self.alg;
        let mut acc = alg.zero();
        let mut firsts: Vec<A::F> = Vec::with_capacity(4);
        for b in 0..4 {
            firsts.push(alg.diff(f, b));
        }
        for b in 0..4 {
            for c in b..4 {
                let g = self.g_up(b, c);
                let d2 = alg.diff(&firsts[b], c);
                let t = alg.mul(&g, &d2);
                let t = if b == c { t } else { alg.scale(&t, 2.0) };
                alg.add_assign(&mut acc, &t);
            }
        }
        acc
    }
}

fn recip_derivs(c: f64, k: usize) -> f64 {
    // d^k (1/x) = (-1)^k k! x^{-k-1}
    let mut f = 1.0;
    for i in 1..=k {
        f *= i as f64;
    }
    let s = if k % 2 == 0 { 1.0 } else { -1.0 };
    s * f * c.powi(-(k as i32) - 1)
}

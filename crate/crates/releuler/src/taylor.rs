//! Truncated multivariate Taylor arithmetic over (t, x1, x2, x3).
//!
//! A `TaylorPoly` stores Taylor *coefficients* `c_beta = d^beta f / beta!`
//! at a base point, for all multi-indices with total degree <= `trunc`.
//! Every value also carries `ord`: the total degree through which its
//! coefficients are exact. Products and sums propagate `ord` as the min of
//! the operands (low-order coefficients of a product depend only on
//! low-order coefficients of the factors); differentiation lowers it by one.
//! Residual extraction reads only coefficients with degree <= `ord`.

use std::collections::HashMap;
use std::sync::OnceLock;

pub const VARS: usize = 4;

/// Multi-index tables per truncation degree.
struct Table {
    idx: Vec<[u8; VARS]>,
    pos: HashMap<[u8; VARS], usize>,
    /// position of beta + e_axis (or usize::MAX when it leaves the table)
    bump: Vec<[usize; VARS]>,
    /// precomputed product pairs: for each (i, j) with |beta_i|+|beta_j| <= trunc,
    /// the target position of beta_i + beta_j.
    prod: Vec<Vec<(usize, usize)>>, // prod[target] = list of (i, j)
}

fn gen_indices(trunc: usize) -> Vec<[u8; VARS]> {
    let mut v = Vec::new();
    let t = trunc as u8;
    for d in 0..=t {
        for a in 0..=d {
            for b in 0..=(d - a) {
                for c in 0..=(d - a - b) {
                    let e = d - a - b - c;
                    v.push([a, b, c, e]);
                }
            }
        }
    }
    v
}

fn table(trunc: usize) -> &'static Table {
    static TABLES: OnceLock<Vec<Table>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        (0..=8usize)
            .map(|tr| {
                let idx = gen_indices(tr);
                let pos: HashMap<_, _> = idx.iter().enumerate().map(|(i, b)| (*b, i)).collect();
                let bump = idx
                    .iter()
                    .map(|b| {
                        let mut row = [usize::MAX; VARS];
                        for ax in 0..VARS {
                            let mut nb = *b;
                            nb[ax] += 1;
                            if let Some(&p) = pos.get(&nb) {
                                row[ax] = p;
                            }
                        }
                        row
                    })
                    .collect();
                let mut prod = vec![Vec::new(); idx.len()];
                for (i, bi) in idx.iter().enumerate() {
                    for (j, bj) in idx.iter().enumerate() {
                        let mut s = [0u8; VARS];
                        let mut tot = 0u8;
                        for k in 0..VARS {
                            s[k] = bi[k] + bj[k];
                            tot += s[k];
                        }
                        if tot as usize <= tr {
                            prod[pos[&s]].push((i, j));
                        }
                    }
                }
                Table { idx, pos, bump, prod }
            })
            .collect()
    });
    &tables[trunc]
}

/// Truncated Taylor polynomial; see module docs for the `ord` contract.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorPoly {
    pub trunc: usize,
    pub ord: i32,
    c: Vec<f64>,
}

impl TaylorPoly {
    pub fn zero(trunc: usize) -> Self {
        TaylorPoly {
            trunc,
            ord: trunc as i32,
            c: vec![0.0; table(trunc).idx.len()],
        }
    }

    pub fn constant(trunc: usize, v: f64) -> Self {
        let mut p = Self::zero(trunc);
        p.c[0] = v;
        p
    }

    /// The coordinate variable `x_axis` (axis 0 is time).
    pub fn variable(trunc: usize, axis: usize) -> Self {
        let mut p = Self::zero(trunc);
        let mut b = [0u8; VARS];
        b[axis] = 1;
        p.c[table(trunc).pos[&b]] = 1.0;
        p
    }

    pub fn num_coeffs(trunc: usize) -> usize {
        table(trunc).idx.len()
    }

    pub fn coeff(&self, beta: [u8; VARS]) -> f64 {
        table(self.trunc).pos.get(&beta).map_or(0.0, |&p| self.c[p])
    }

    pub fn set_coeff(&mut self, beta: [u8; VARS], v: f64) {
        let p = table(self.trunc).pos[&beta];
        self.c[p] = v;
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    fn binop(&self, rhs: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.trunc, rhs.trunc, "trunc mismatch");
        TaylorPoly {
            trunc: self.trunc,
            ord: self.ord.min(rhs.ord),
            c: self.c.iter().zip(&rhs.c).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.binop(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.binop(rhs, |a, b| a - b)
    }

    pub fn neg(&self) -> Self {
        TaylorPoly {
            trunc: self.trunc,
            ord: self.ord,
            c: self.c.iter().map(|&a| -a).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        TaylorPoly {
            trunc: self.trunc,
            ord: self.ord,
            c: self.c.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.trunc, rhs.trunc, "trunc mismatch");
        let t = table(self.trunc);
        let mut c = vec![0.0; self.c.len()];
        for (tgt, pairs) in t.prod.iter().enumerate() {
            let mut acc = 0.0;
            for &(i, j) in pairs {
                acc += self.c[i] * rhs.c[j];
            }
            c[tgt] = acc;
        }
        TaylorPoly {
            trunc: self.trunc,
            ord: self.ord.min(rhs.ord),
            c,
        }
    }

    /// Partial derivative along `axis`; exactness drops one order.
    pub fn diff(&self, axis: usize) -> Self {
        let t = table(self.trunc);
        let mut c = vec![0.0; self.c.len()];
        for (i, b) in t.idx.iter().enumerate() {
            let up = t.bump[i][axis];
            if up != usize::MAX {
                c[i] = (b[axis] as f64 + 1.0) * self.c[up];
            }
        }
        TaylorPoly {
            trunc: self.trunc,
            ord: (self.ord - 1).min(self.trunc as i32 - 1),
            c,
        }
    }

    /// Compose with an analytic scalar function given the raw derivatives
    /// `f, f', f'', ...` at the constant term (at least `trunc + 1` values).
    pub fn compose(&self, derivs: &[f64]) -> Self {
        assert!(derivs.len() > self.trunc, "need trunc+1 derivative values");
        let mut r = self.clone();
        r.c[0] = 0.0;
        let mut fact = 1.0;
        for k in 1..=self.trunc {
            fact *= k as f64;
        }
        // Horner over the nilpotent part r
        let mut acc = TaylorPoly::constant(self.trunc, derivs[self.trunc] / fact);
        acc.ord = self.ord;
        for k in (0..self.trunc).rev() {
            let mut kfact = 1.0;
            for m in 1..=k {
                kfact *= m as f64;
            }
            acc = acc.mul(&r).add(&TaylorPoly::constant(self.trunc, derivs[k] / kfact));
            acc.ord = acc.ord.min(self.ord);
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let e = self.c[0].exp();
        let d = vec![e; self.trunc + 1];
        self.compose(&d)
    }

    pub fn ln(&self) -> Self {
        let c = self.c[0];
        assert!(c > 0.0, "ln of non-positive constant term");
        let mut d = vec![0.0; self.trunc + 1];
        d[0] = c.ln();
        // d^k ln(x) = (-1)^(k-1) (k-1)! x^-k
        let mut sign = 1.0;
        let mut fact = 1.0;
        for k in 1..=self.trunc {
            if k > 1 {
                fact *= (k - 1) as f64;
            }
            d[k] = sign * fact * c.powi(-(k as i32));
            sign = -sign;
        }
        self.compose(&d)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Self {
        self.powf(-1.0)
    }

    /// `self^a` for a constant exponent; constant term must be positive.
    pub fn powf(&self, a: f64) -> Self {
        let c = self.c[0];
        assert!(c > 0.0, "powf of non-positive constant term ({c})");
        let mut d = vec![0.0; self.trunc + 1];
        let mut coef = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = coef * c.powf(a - k as f64);
            coef *= a - k as f64;
        }
        self.compose(&d)
    }

    /// Evaluate at a displacement from the base point (sums all stored
    /// coefficients; only meaningful through `ord` for derived values).
    pub fn eval(&self, dx: &[f64; VARS]) -> f64 {
        let t = table(self.trunc);
        let mut acc = 0.0;
        for (i, b) in t.idx.iter().enumerate() {
            let mut m = self.c[i];
            for ax in 0..VARS {
                for _ in 0..b[ax] {
                    m *= dx[ax];
                }
            }
            acc += m;
        }
        acc
    }

    /// Recenter the polynomial at base + dx (exact for polynomial data).
    pub fn shift_base(&self, dx: &[f64; VARS]) -> Self {
        let t = table(self.trunc);
        let mut out = Self::zero(self.trunc);
        out.ord = self.ord;
        // c'_alpha = sum_{beta >= alpha} C(beta, alpha) c_beta dx^(beta-alpha)
        for (ia, a) in t.idx.iter().enumerate() {
            let mut acc = 0.0;
            for (ib, b) in t.idx.iter().enumerate() {
                if (0..VARS).all(|k| b[k] >= a[k]) {
                    let mut m = self.c[ib];
                    for k in 0..VARS {
                        m *= binom(b[k], a[k]);
                        for _ in 0..(b[k] - a[k]) {
                            m *= dx[k];
                        }
                    }
                    acc += m;
                }
            }
            out.c[ia] = acc;
        }
        out
    }

    /// Largest |coefficient| over total degrees <= deg (and <= ord).
    pub fn max_abs_through(&self, deg: i32) -> f64 {
        let t = table(self.trunc);
        let lim = deg.min(self.ord);
        let mut m = 0.0f64;
        for (i, b) in t.idx.iter().enumerate() {
            let d = b.iter().map(|&x| x as i32).sum::<i32>();
            if d <= lim {
                m = m.max(self.c[i].abs());
            }
        }
        m
    }

    /// Iterate (multi-index, coefficient) pairs.
    pub fn iter_coeffs(&self) -> impl Iterator<Item = ([u8; VARS], f64)> + '_ {
        let t = table(self.trunc);
        t.idx.iter().zip(&self.c).map(|(b, &c)| (*b, c))
    }
}

fn binom(n: u8, k: u8) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn random_poly(trunc: usize, rng: &mut impl Rng, base: f64) -> TaylorPoly {
        let mut p = TaylorPoly::zero(trunc);
        for i in 0..p.c.len() {
            p.c[i] = rng.gen_range(-0.3..0.3);
        }
        p.c[0] = base;
        p
    }

    #[test]
    fn ring_axioms_spot() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a = random_poly(4, &mut rng, 1.0);
        let b = random_poly(4, &mut rng, -2.0);
        let c = random_poly(4, &mut rng, 0.5);
        let left = a.mul(&b.add(&c));
        let right = a.mul(&b).add(&a.mul(&c));
        for ((_, x), (_, y)) in left.iter_coeffs().zip(right.iter_coeffs()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn exp_log_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let p = random_poly(4, &mut rng, 1.7);
            let q = p.ln().exp();
            for ((_, x), (_, y)) in p.iter_coeffs().zip(q.iter_coeffs()) {
                assert!((x - y).abs() < 1e-13, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p = random_poly(4, &mut rng, 2.3);
        let s = p.sqrt();
        let q = s.mul(&s);
        for ((_, x), (_, y)) in p.iter_coeffs().zip(q.iter_coeffs()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn recip_times_self_is_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let p = random_poly(4, &mut rng, 0.8);
        let q = p.recip().mul(&p);
        for ((b, x), _) in q.iter_coeffs().zip(0..) {
            let want = if b == [0, 0, 0, 0] { 1.0 } else { 0.0 };
            assert!((x - want).abs() < 1e-13);
        }
    }

    #[test]
    fn diff_of_product_is_leibniz() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let a = random_poly(4, &mut rng, 1.0);
        let b = random_poly(4, &mut rng, 2.0);
        for ax in 0..4 {
            let lhs = a.mul(&b).diff(ax);
            let rhs = a.diff(ax).mul(&b).add(&a.mul(&b.diff(ax)));
            assert_eq!(lhs.ord, 3);
            for ((bi, x), (_, y)) in lhs.iter_coeffs().zip(rhs.iter_coeffs()) {
                let deg: i32 = bi.iter().map(|&v| v as i32).sum();
                if deg <= lhs.ord {
                    assert!((x - y).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn shift_base_consistency() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let p = random_poly(3, &mut rng, 1.0);
        let dx = [0.0, 0.1, -0.05, 0.02];
        let q = p.shift_base(&dx);
        // evaluating q at y equals evaluating p at dx + y
        let y = [0.0, 0.03, 0.01, -0.02];
        let mut xy = [0.0; 4];
        for k in 0..4 {
            xy[k] = dx[k] + y[k];
        }
        assert!((q.eval(&y) - p.eval(&xy)).abs() < 1e-13);
    }

    #[test]
    fn ord_tracking_through_ops() {
        let p = TaylorPoly::variable(4, 1);
        assert_eq!(p.ord, 4);
        let d = p.diff(1);
        assert_eq!(d.ord, 3);
        let q = d.mul(&p);
        assert_eq!(q.ord, 3);
        let e = q.exp();
        assert_eq!(e.ord, 3);
    }
}

//! Dyadic frequency analysis and the energy functionals: Littlewood-Paley
//! blocks from an embedded cutoff table, Sobolev/Besov/Hoelder norms, the
//! run energies with their Gronwall-type boundedness diagnostic, and
//! empirical probes of two product/commutator inequalities.

use ndarray::{ArrayD, Dimension};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{fft_full, ifft_full_real, Grid, ScalarField};

/// Values of the radial cutoff `eta` on [1, 2] at 33 equispaced nodes,
/// generated once from the standard `exp(-1/s)` partition and embedded so
/// block shapes are reproducible bit-for-bit. `eta = 1` below 1, `0`
/// above 2, monotone C^1 interpolation in between.
const ETA_NODES: usize = 33;
const ETA_TABLE: [f64; ETA_NODES] = [
    1.0,
    0.9999999999999645,
    0.9999996730091539,
    0.9999297386470252,
    0.9989491902477216,
    0.9945939443446216,
    0.9837385694854996,
    0.9641335869044371,
    0.935030830871336,
    0.8969930089233786,
    0.851378569648545,
    0.7998378746109719,
    0.7439624913247579,
    0.6851039372742251,
    0.6243226193197333,
    0.5624177940821289,
    0.5,
    0.437582205917871,
    0.3756773806802667,
    0.314896062725775,
    0.256037508675242,
    0.20016212538902803,
    0.14862143035145495,
    0.10300699107662133,
    0.06496916912866406,
    0.035866413095562856,
    0.016261430514500345,
    0.005406055655378538,
    0.0010508097522784884,
    7.026135297475726e-05,
    3.269908460001809e-07,
    3.555335263604078e-14,
    0.0,
];

/// The radial cutoff: 1 on [0,1], 0 on [2, inf), table-interpolated
/// (monotone cubic Hermite) in between.
pub fn eta(r: f64) -> f64 {
    if r <= 1.0 {
        return 1.0;
    }
    if r >= 2.0 {
        return 0.0;
    }
    let s = (r - 1.0) * (ETA_NODES - 1) as f64;
    let i = (s.floor() as usize).min(ETA_NODES - 2);
    let t = s - i as f64;
    // monotone Hermite slopes (Fritsch-Carlson) on the fly
    let h = 1.0;
    let d = |k: usize| -> f64 {
        if k == 0 {
            ETA_TABLE[1] - ETA_TABLE[0]
        } else if k >= ETA_NODES - 1 {
            ETA_TABLE[ETA_NODES - 1] - ETA_TABLE[ETA_NODES - 2]
        } else {
            0.5 * (ETA_TABLE[k + 1] - ETA_TABLE[k - 1])
        }
    };
    let (y0, y1) = (ETA_TABLE[i], ETA_TABLE[i + 1]);
    let (m0, m1) = (d(i), d(i + 1));
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * m1
}

/// The shell function `zeta(r) = eta(r) - eta(2r)`; `sum_j zeta(2^{-j} r)`
/// telescopes to 1 for every `r > 0`.
pub fn zeta(r: f64) -> f64 {
    eta(r) - eta(2.0 * r)
}

/// Dyadic range resolvable on the grid: blocks j with `2^j` inside the
/// representable magnitude window.
pub fn resolvable_blocks(grid: Grid) -> std::ops::RangeInclusive<i32> {
    let kmin = 2.0 * std::f64::consts::PI / grid.len;
    let kmax = kmin * (grid.n as f64) / 2.0;
    let lo = (kmin / 2.0).log2().floor() as i32 - 1;
    let hi = (kmax * 2.0).log2().ceil() as i32 + 1;
    lo..=hi
}

fn freq_magnitude(grid: Grid, idx: &[usize]) -> f64 {
    let scale = 2.0 * std::f64::consts::PI / grid.len;
    let mut k2 = 0.0;
    for ax in 0..grid.dim {
        let n = grid.n;
        let j = idx[ax];
        let k = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
        k2 += (scale * k) * (scale * k);
    }
    k2.sqrt()
}

/// The Littlewood-Paley block `P_j f`.
pub fn lp_project(f: &ScalarField, j: i32) -> ScalarField {
    let grid = f.grid;
    let mut c = fft_full(&f.data);
    let scale = 2f64.powi(-j);
    for (idx, v) in c.indexed_iter_mut() {
        let idxv: Vec<usize> = idx.slice().to_vec();
        let m = freq_magnitude(grid, &idxv);
        *v *= zeta(scale * m);
    }
    ScalarField {
        grid,
        data: ifft_full_real(c),
    }
}

fn lp_block_l2_linf(f: &ScalarField) -> (Vec<(i32, f64)>, Vec<(i32, f64)>) {
    let grid = f.grid;
    let c = fft_full(&f.data);
    let range = resolvable_blocks(grid);
    let mut l2 = Vec::new();
    let mut linf = Vec::new();
    for j in range {
        let scale = 2f64.powi(-j);
        let mut blocked = c.clone();
        for (idx, v) in blocked.indexed_iter_mut() {
            let idxv: Vec<usize> = idx.slice().to_vec();
            let m = freq_magnitude(grid, &idxv);
            *v *= zeta(scale * m);
        }
        let phys = ifft_full_real(blocked);
        let l2v =
            (phys.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume()).sqrt();
        let linfv = phys.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        l2.push((j, l2v));
        linf.push((j, linfv));
    }
    (l2, linf)
}

/// `|f|_{L2}` (integral normalization).
pub fn l2_norm(f: &ScalarField) -> f64 {
    f.l2()
}

/// Homogeneous Sobolev seminorm via the block sum
/// `(sum_j 2^{2js} |P_j f|_{L2}^2)^{1/2}`.
pub fn sobolev_homog(f: &ScalarField, s: f64) -> f64 {
    let (l2, _) = lp_block_l2_linf(f);
    l2.iter()
        .map(|(j, v)| (2f64.powf(s * *j as f64) * v).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `|f|_{H^s} = |f|_{L2} + |f|_{dot H^s}`.
pub fn sobolev_norm(f: &ScalarField, s: f64) -> f64 {
    l2_norm(f) + sobolev_homog(f, s)
}

/// Direct `|xi|^{2s}`-weighted homogeneous norm (the multiplier route).
pub fn sobolev_homog_direct(f: &ScalarField, s: f64) -> f64 {
    let grid = f.grid;
    let c = fft_full(&f.data);
    let npts = grid.num_points() as f64;
    let mut acc = 0.0;
    for (idx, v) in c.indexed_iter() {
        let idxv: Vec<usize> = idx.slice().to_vec();
        let m = freq_magnitude(grid, &idxv);
        if m > 0.0 {
            acc += m.powf(2.0 * s) * v.norm_sqr();
        }
    }
    (acc / npts * grid.cell_volume()).sqrt()
}

/// Besov norm `dot B^s_{inf,2}`.
pub fn besov_inf2(f: &ScalarField, s: f64) -> f64 {
    let (_, linf) = lp_block_l2_linf(f);
    linf.iter()
        .map(|(j, v)| (2f64.powf(s * *j as f64) * v).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Grid Hoelder seminorm `sup |f(x) - f(y)|/|x-y|^delta` over dyadic
/// axis-aligned separations (a lower bound of the continuum value).
pub fn holder_seminorm(f: &ScalarField, delta: f64) -> f64 {
    let grid = f.grid;
    let data = f.data.as_standard_layout();
    let flat = data.as_slice().unwrap();
    let n = grid.n;
    let dx = grid.dx();
    let mut worst = 0.0f64;
    let strides: Vec<usize> = (0..grid.dim)
        .map(|ax| n.pow((grid.dim - 1 - ax) as u32))
        .collect();
    let mut sep = 1usize;
    while sep <= n / 2 {
        let dist = (sep as f64 * dx).powf(delta);
        for ax in 0..grid.dim {
            for (i, &v) in flat.iter().enumerate() {
                // neighbor index with wrap along ax
                let coord = (i / strides[ax]) % n;
                let wrapped = if coord + sep >= n {
                    i + strides[ax] * sep - strides[ax] * n
                } else {
                    i + strides[ax] * sep
                };
                let dvv = (flat[wrapped] - v).abs() / dist;
                if dvv > worst {
                    worst = dvv;
                }
            }
        }
        sep *= 2;
    }
    worst
}

/// The energy functional ingredients at one trajectory sample.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EnergyRecord {
    pub t: f64,
    /// `|h|_{H^s}^2 + |(u - rest)|_{H^s}^2 + |w|_{H^{s0}}^2`
    pub e_s: f64,
    /// variant with the vorticity measured in `H^2`
    pub e_tilde: f64,
    /// higher-order variant: state in `H^{s*+1}`, vorticity in `H^3`
    pub e_bb: f64,
    /// running integral of the gradient envelope
    pub m_t: f64,
    pub linf_du: f64,
    pub linf_dh: f64,
    pub besov_du: f64,
}

/// Sobolev exponents for the energy functionals.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct EnergyExponents {
    pub s: f64,
    pub s0: f64,
    pub s_star: f64,
}

impl Default for EnergyExponents {
    fn default() -> Self {
        EnergyExponents {
            s: 2.25,
            s0: 2.1,
            s_star: 2.25,
        }
    }
}

/// Inputs per sample: the state fields, vorticity, and the first
/// derivatives (time components included) for the gradient envelope.
pub struct EnergySample<'a> {
    pub t: f64,
    pub h: &'a ScalarField,
    pub u: &'a [ScalarField; 4],
    pub w: &'a [ScalarField; 4],
    pub du: &'a [ScalarField],
    pub dh: &'a [ScalarField],
}

/// Evaluate the energies over a trajectory, accumulating `M(t)` by
/// trapezoid on the recorded integrand.
pub fn energy_functionals(samples: &[EnergySample], exps: EnergyExponents) -> Vec<EnergyRecord> {
    let mut out: Vec<EnergyRecord> = Vec::with_capacity(samples.len());
    let mut m_acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for s in samples {
        let grid = s.h.grid;
        let mut state_s = sobolev_norm(s.h, exps.s).powi(2);
        let mut state_star = sobolev_norm(s.h, exps.s_star + 1.0).powi(2);
        for a in 0..4 {
            let dev = if a == 0 {
                &s.u[0] - &ScalarField::constant(grid, 1.0)
            } else {
                s.u[a].clone()
            };
            state_s += sobolev_norm(&dev, exps.s).powi(2);
            state_star += sobolev_norm(&dev, exps.s_star + 1.0).powi(2);
        }
        let mut w_s0 = 0.0;
        let mut w_2 = 0.0;
        let mut w_3 = 0.0;
        for a in 0..4 {
            w_s0 += sobolev_norm(&s.w[a], exps.s0).powi(2);
            w_2 += sobolev_norm(&s.w[a], 2.0).powi(2);
            w_3 += sobolev_norm(&s.w[a], 3.0).powi(2);
        }
        let mut linf_du = 0.0f64;
        let mut besov_du = 0.0f64;
        for d in s.du {
            linf_du = linf_du.max(d.linf());
            besov_du = besov_du.max(besov_inf2(d, exps.s0 - 2.0));
        }
        let mut linf_dh = 0.0f64;
        let mut besov_dh = 0.0f64;
        for d in s.dh {
            linf_dh = linf_dh.max(d.linf());
            besov_dh = besov_dh.max(besov_inf2(d, exps.s0 - 2.0));
        }
        let integrand = linf_du.max(linf_dh) + besov_du.max(besov_dh);
        if let Some((pt, pi)) = prev {
            m_acc += 0.5 * (s.t - pt) * (pi + integrand);
        }
        prev = Some((s.t, integrand));
        out.push(EnergyRecord {
            t: s.t,
            e_s: state_s + w_s0,
            e_tilde: state_s + w_2,
            e_bb: state_star + w_3,
            m_t: m_acc,
            linf_du,
            linf_dh,
            besov_du,
        });
    }
    out
}

/// Smallest `K >= 0` with `log(E(t)/E(0)) <= K M(t) exp(K M(t))` at every
/// sample; `None` when `E(0) = 0` (nothing to bound).
pub fn gronwall_fit(records: &[EnergyRecord]) -> Option<f64> {
    let e0 = records.first()?.e_s;
    if e0 <= 0.0 {
        return None;
    }
    let mut k_max = 0.0f64;
    for r in records.iter().skip(1) {
        let lhs = (r.e_s / e0).ln();
        if lhs <= 0.0 {
            continue;
        }
        if r.m_t <= 0.0 {
            return Some(f64::INFINITY);
        }
        // solve K exp(K M) = lhs / M by bisection (monotone in K)
        let target = lhs / r.m_t;
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        while hi * (hi * r.m_t).exp() < target {
            hi *= 2.0;
            if hi > 1e12 {
                return Some(f64::INFINITY);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * (mid * r.m_t).exp() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        k_max = k_max.max(0.5 * (lo + hi));
    }
    Some(k_max)
}

/// Fractional Laplacian power `Lambda^a f` (|xi|^a multiplier).
pub fn lambda_power(f: &ScalarField, a: f64) -> ScalarField {
    let grid = f.grid;
    let mut c = fft_full(&f.data);
    for (idx, v) in c.indexed_iter_mut() {
        let idxv: Vec<usize> = idx.slice().to_vec();
        let m = freq_magnitude(grid, &idxv);
        *v *= if m > 0.0 {
            Complex64::new(m.powf(a), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    ScalarField {
        grid,
        data: ifft_full_real(c),
    }
}

fn lp_norm(f: &ScalarField, p: f64) -> f64 {
    let grid = f.grid;
    (f.data.iter().map(|v| v.abs().powf(p)).sum::<f64>() * grid.cell_volume()).powf(1.0 / p)
}

/// Random band-limited field with modes `|k| <= kmax` per axis.
pub fn random_band_limited_field(grid: Grid, kmax: usize, rng: &mut impl rand::Rng) -> ScalarField {
    let mut c: ArrayD<Complex64> = ArrayD::zeros(ndarray::IxDyn(&grid.shape()));
    for (idx, v) in c.indexed_iter_mut() {
        let ok = (0..grid.dim).all(|ax| {
            let n = grid.n;
            let j = idx[ax];
            let k = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
            k.unsigned_abs() as usize <= kmax
        });
        if ok {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    ScalarField {
        grid,
        data: ifft_full_real(c),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    KatoPonceCommutator,
    LpProduct,
}

impl std::str::FromStr for ProbeKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "kato_ponce_commutator" => Ok(ProbeKind::KatoPonceCommutator),
            "lp_product" => Ok(ProbeKind::LpProduct),
            other => Err(format!("unknown probe kind '{other}'")),
        }
    }
}

/// Max observed LHS/RHS ratio over `count` random band-limited pairs.
///
/// Kato-Ponce (p = q = 4, exponent `a`):
///   `|L^a(f g) - (L^a f) g|_{L2} <= C (|L^{a-1} f|_{L2} |grad g|_{Linf}
///    + |f|_{L4} |L^a g|_{L4})`
/// LP product (0 <= a < 1):
///   `|L^a(f g)|_{L2} <= C (|f|_{B^a_{inf,2}} |g|_{L2} + |f|_{Linf} |g|_{H^a-homog})`
pub fn inequality_probe(
    kind: ProbeKind,
    grid: Grid,
    a: f64,
    seed: u64,
    count: usize,
) -> Result<f64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let kmax = grid.n / 3;
    let mut worst = 0.0f64;
    for _ in 0..count {
        let f1 = random_band_limited_field(grid, kmax, &mut rng);
        let f2 = random_band_limited_field(grid, kmax, &mut rng);
        let ratio = match kind {
            ProbeKind::KatoPonceCommutator => {
                let prod = &f1 * &f2;
                let lhs_field = &lambda_power(&prod, a) - &(&lambda_power(&f1, a) * &f2);
                let lhs = lhs_field.l2();
                let mut grad_inf = 0.0f64;
                for ax in 0..grid.dim {
                    grad_inf = grad_inf.max(f2.derivative(ax).linf());
                }
                let rhs = lambda_power(&f1, a - 1.0).l2() * grad_inf
                    + lp_norm(&f1, 4.0) * lp_norm(&lambda_power(&f2, a), 4.0);
                if rhs == 0.0 {
                    0.0
                } else {
                    lhs / rhs
                }
            }
            ProbeKind::LpProduct => {
                if !(0.0..1.0).contains(&a) {
                    return Err(Error::Domain(format!("lp_product needs 0 <= a < 1, got {a}")));
                }
                let prod = &f1 * &f2;
                let lhs = lambda_power(&prod, a).l2();
                let rhs = besov_inf2(&f1, a) * f2.l2() + f1.linf() * sobolev_homog_direct(&f2, a);
                if rhs == 0.0 {
                    0.0
                } else {
                    lhs / rhs
                }
            }
        };
        worst = worst.max(ratio);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn partition_of_unity_on_resolved_band() {
        let grid = Grid::new(1, 64, 2.0 * PI).unwrap();
        for kk in 1..=31usize {
            let r = kk as f64;
            let mut s = 0.0;
            for j in resolvable_blocks(grid) {
                s += zeta(2f64.powi(-j) * r);
            }
            assert_relative_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn block_reconstruction() {
        let grid = Grid::new(2, 32, 2.0 * PI).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let f = random_band_limited_field(grid, 10, &mut rng);
        let mut recon = ScalarField::zeros(grid);
        for j in resolvable_blocks(grid) {
            recon = &recon + &lp_project(&f, j);
        }
        // remove the mean (the k=0 mode carries no block)
        let f0 = f.mean();
        let dev = &f - &ScalarField::constant(grid, f0);
        let err = (&recon - &dev).l2() / dev.l2().max(1e-300);
        assert!(err <= 1e-11, "reconstruction error {err}");
    }

    #[test]
    fn zero_field_norms() {
        let grid = Grid::new(1, 32, 2.0 * PI).unwrap();
        let z = ScalarField::zeros(grid);
        assert_eq!(l2_norm(&z), 0.0);
        assert_eq!(sobolev_norm(&z, 1.5), 0.0);
        assert_eq!(besov_inf2(&z, 0.5), 0.0);
        assert_eq!(holder_seminorm(&z, 0.5), 0.0);
    }

    #[test]
    fn single_frequency_parseval() {
        // f = sin(x) on [0, 2pi): |f|_{L2} = sqrt(pi); the weighted
        // homogeneous norm equals sqrt(pi) for every s
        let grid = Grid::new(1, 64, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(grid, |x| x[0].sin());
        assert_relative_eq!(l2_norm(&f), PI.sqrt(), epsilon = 1e-10);
        for &s in &[0.5, 1.0, 1.7, 2.25] {
            assert_relative_eq!(sobolev_homog_direct(&f, s), PI.sqrt(), epsilon = 1e-10);
        }
    }

    /// The LP-block route and the direct multiplier route agree up to the
    /// constant set by the cutoff shape; pin it by regression.
    #[test]
    fn lp_vs_direct_constant_pinned() {
        let grid = Grid::new(1, 64, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(grid, |x| (3.0 * x[0]).sin());
        let s = 1.3;
        let ratio = sobolev_homog(&f, s) / sobolev_homog_direct(&f, s);
        // |k| = 3 splits across two blocks (the cutoff gives each weight
        // 1/2 there); the embedded table fixes the split exactly.
        // Regression-pinned value:
        let pinned = 0.7844077196811987;
        assert_relative_eq!(ratio, pinned, epsilon = 1e-9);
    }

    #[test]
    fn norm_monotone_in_s() {
        let grid = Grid::new(1, 64, 2.0 * PI).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let f = random_band_limited_field(grid, 20, &mut rng);
        let mut prev = 0.0;
        for &s in &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5] {
            let v = sobolev_norm(&f, s);
            assert!(v >= prev * 0.999999, "norm not monotone at s={s}");
            prev = v;
        }
    }

    #[test]
    fn gronwall_constant_trajectory_k_zero() {
        let grid = Grid::new(1, 16, 2.0 * PI).unwrap();
        let h = ScalarField::from_fn(grid, |x| 0.01 * x[0].sin());
        let u: [ScalarField; 4] = [
            ScalarField::constant(grid, 1.0),
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
        ];
        let w: [ScalarField; 4] = [
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
        ];
        let du = vec![ScalarField::constant(grid, 0.01)];
        let dh = vec![ScalarField::constant(grid, 0.01)];
        let samples: Vec<EnergySample> = (0..5)
            .map(|k| EnergySample {
                t: k as f64 * 0.1,
                h: &h,
                u: &u,
                w: &w,
                du: &du,
                dh: &dh,
            })
            .collect();
        let recs = energy_functionals(&samples, EnergyExponents::default());
        assert!(recs[0].e_s > 0.0);
        let k = gronwall_fit(&recs).unwrap();
        assert_eq!(k, 0.0);
        // rest equilibrium: all energies vanish and the fit is skipped
        let hz = ScalarField::zeros(grid);
        let du0 = vec![ScalarField::zeros(grid)];
        let samples: Vec<EnergySample> = (0..3)
            .map(|k| EnergySample {
                t: k as f64 * 0.1,
                h: &hz,
                u: &u,
                w: &w,
                du: &du0,
                dh: &du0,
            })
            .collect();
        let recs = energy_functionals(&samples, EnergyExponents::default());
        assert_eq!(recs[0].e_s, 0.0);
        assert!(gronwall_fit(&recs).is_none());
    }

    #[test]
    fn gronwall_escalates_on_injected_growth() {
        let grid = Grid::new(1, 16, 2.0 * PI).unwrap();
        let u: [ScalarField; 4] = [
            ScalarField::constant(grid, 1.0),
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
        ];
        let w: [ScalarField; 4] = [
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
        ];
        let du = vec![ScalarField::constant(grid, 0.01)];
        let hs: Vec<ScalarField> = (0..5)
            .map(|k| ScalarField::from_fn(grid, move |x| 0.01 * (1.0 + k as f64).exp() * x[0].sin()))
            .collect();
        let samples: Vec<EnergySample> = hs
            .iter()
            .enumerate()
            .map(|(k, h)| EnergySample {
                t: k as f64 * 0.1,
                h,
                u: &u,
                w: &w,
                du: &du,
                dh: &du,
            })
            .collect();
        let recs = energy_functionals(&samples, EnergyExponents::default());
        let k = gronwall_fit(&recs).unwrap();
        assert!(k > 10.0, "injected growth should force a large K, got {k}");
    }

    #[test]
    fn probe_zero_when_second_factor_constant() {
        // constant f2 kills the commutator
        let grid = Grid::new(1, 64, 2.0 * PI).unwrap();
        let f1 = ScalarField::from_fn(grid, |x| (3.0 * x[0]).sin());
        let f2 = ScalarField::constant(grid, 2.0);
        let prod = &f1 * &f2;
        let lhs = (&lambda_power(&prod, 1.5) - &(&lambda_power(&f1, 1.5) * &f2)).l2();
        assert!(lhs < 1e-11);
    }

    #[test]
    fn probes_finite_and_stable_under_refinement() {
        let mut ratios = Vec::new();
        for &n in &[64usize, 128] {
            let grid = Grid::new(1, n, 2.0 * PI).unwrap();
            ratios.push(
                inequality_probe(ProbeKind::KatoPonceCommutator, grid, 1.5, 7, 40).unwrap(),
            );
        }
        assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
        let change = (ratios[1] - ratios[0]).abs() / ratios[0];
        assert!(change <= 0.2, "kato-ponce ratio unstable: {ratios:?}");
        let mut ratios = Vec::new();
        for &n in &[64usize, 128] {
            let grid = Grid::new(1, n, 2.0 * PI).unwrap();
            ratios.push(inequality_probe(ProbeKind::LpProduct, grid, 0.7, 7, 40).unwrap());
        }
        let change = (ratios[1] - ratios[0]).abs() / ratios[0];
        assert!(change <= 0.2, "lp product ratio unstable: {ratios:?}");
    }
}

#[cfg(test)]
mod rotation_tests {
    use super::*;
    use rand::prelude::*;
    use std::f64::consts::PI;

    /// Quarter-turn of a 2D field: transpose + reverse one axis.
    fn rotate90(f: &ScalarField) -> ScalarField {
        let n = f.grid.n;
        let mut out = ScalarField::zeros(f.grid);
        for i in 0..n {
            for j in 0..n {
                out.data[[j, (n - i) % n]] = f.data[[i, j]];
            }
        }
        out
    }

    #[test]
    fn sobolev_norms_rotation_invariant() {
        let grid = Grid::new(2, 32, 2.0 * PI).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(51);
        let f = random_band_limited_field(grid, 9, &mut rng);
        let g = rotate90(&f);
        for &s in &[1.0, 2.1, 2.25] {
            let a = sobolev_norm(&f, s);
            let b = sobolev_norm(&g, s);
            assert!(
                (a - b).abs() <= 1e-9 * a.max(1.0),
                "H^{s} norm changed under rotation: {a} vs {b}"
            );
        }
        let a = besov_inf2(&f, 0.1);
        let b = besov_inf2(&g, 0.1);
        assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }
}

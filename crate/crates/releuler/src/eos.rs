//! Barotropic equation of state `p = rho^theta` and the enthalpy bundle.
//!
//! All thermodynamic scalars are functions of the density alone. The
//! logarithmic enthalpy integrates `dh/drho = theta rho^(theta-2) /
//! (rho^(theta-1) + 1)` with the constant fixed so `h -> 0` as `rho -> 0+`
//! (unit reference enthalpy). That integral has the closed form used below,
//!
//! ```text
//! h(rho) = theta/(theta-1) * ln(1 + rho^(theta-1)),
//! ```
//!
//! which also inverts in closed form. Tests check both against an
//! independent quadrature/root-finding oracle.

use crate::error::{Error, Result};

/// Scalar thermodynamic bundle at one admissible point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoState {
    /// Energy density `rho > 0` (0 only for the flagged vacuum boundary).
    pub density: f64,
    /// Pressure `p = rho^theta`.
    pub pressure: f64,
    /// Squared sound speed `c_s^2 = dp/drho`, in (0, 1].
    pub sound_speed_sq: f64,
    /// Logarithmic enthalpy `h = ln H`.
    pub log_enthalpy: f64,
    /// Number density `q = (p + rho)/H`.
    pub number_density: f64,
    /// Enthalpy per particle `H`, normalized to 1 at vacuum.
    pub enthalpy: f64,
    /// Adiabatic exponent `theta > 1`.
    pub exponent: f64,
}

impl ThermoState {
    /// True for the degenerate `rho = 0` boundary state. Never evolved.
    pub fn is_vacuum_boundary(&self) -> bool {
        self.density == 0.0
    }

    /// `dp/dh = p + rho`, the pressure/enthalpy conversion factor.
    pub fn dp_dh(&self) -> f64 {
        self.pressure + self.density
    }
}

fn check_exponent(theta: f64) -> Result<()> {
    if !(theta > 1.0) || !theta.is_finite() {
        return Err(Error::Domain(format!("exponent theta must be > 1, got {theta}")));
    }
    Ok(())
}

/// Largest admissible density for a given exponent: `c_s^2(rho) <= 1`.
pub fn max_density(theta: f64) -> f64 {
    theta.powf(-1.0 / (theta - 1.0))
}

/// Closed form of the enthalpy integral, `h(rho)`.
pub fn log_enthalpy_of_density(rho: f64, theta: f64) -> f64 {
    // ln_1p keeps full relative accuracy near vacuum
    theta / (theta - 1.0) * rho.powf(theta - 1.0).ln_1p()
}

/// Inverse map `rho(h)`, the exact inverse of [`log_enthalpy_of_density`].
pub fn density_of_log_enthalpy(h: f64, theta: f64) -> f64 {
    (h * (theta - 1.0) / theta).exp_m1().powf(1.0 / (theta - 1.0))
}

/// Squared sound speed as a function of `h`.
pub fn sound_speed_sq_of_h(h: f64, theta: f64) -> f64 {
    theta * (h * (theta - 1.0) / theta).exp_m1()
}

/// Derivative `d(c_s^2)/dh`, needed when assembling source terms.
pub fn dsound_speed_sq_dh(h: f64, theta: f64) -> f64 {
    (theta - 1.0) * (h * (theta - 1.0) / theta).exp()
}

/// Build the full bundle from a density.
pub fn from_density(rho: f64, theta: f64) -> Result<ThermoState> {
    check_exponent(theta)?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Domain(format!("density must be positive, got {rho}")));
    }
    let cs2 = theta * rho.powf(theta - 1.0);
    if cs2 > 1.0 {
        return Err(Error::Domain(format!(
            "c_s^2 = {cs2} > 1 at rho = {rho}; admissible window is rho <= {}",
            max_density(theta)
        )));
    }
    let p = rho.powf(theta);
    let h = log_enthalpy_of_density(rho, theta);
    let enthalpy = h.exp();
    let q = (p + rho) / enthalpy;
    Ok(ThermoState {
        density: rho,
        pressure: p,
        sound_speed_sq: cs2,
        log_enthalpy: h,
        number_density: q,
        enthalpy,
        exponent: theta,
    })
}

/// Build the full bundle from a pressure (the evolved variable).
pub fn from_pressure(p: f64, theta: f64) -> Result<ThermoState> {
    check_exponent(theta)?;
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Domain(format!("pressure must be positive, got {p}")));
    }
    from_density(p.powf(1.0 / theta), theta)
}

/// Inverse of [`from_density`] on its range. `h = 0` returns the flagged
/// vacuum boundary state.
pub fn from_enthalpy(h: f64, theta: f64) -> Result<ThermoState> {
    check_exponent(theta)?;
    if !h.is_finite() || h < 0.0 {
        return Err(Error::Domain(format!("log-enthalpy must be >= 0, got {h}")));
    }
    if h == 0.0 {
        return Ok(ThermoState {
            density: 0.0,
            pressure: 0.0,
            sound_speed_sq: 0.0,
            log_enthalpy: 0.0,
            number_density: 0.0,
            enthalpy: 1.0,
            exponent: theta,
        });
    }
    let rho = density_of_log_enthalpy(h, theta);
    let h_max = log_enthalpy_of_density(max_density(theta), theta);
    if h > h_max * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "h = {h} leaves the admissible window (h_max = {h_max} for theta = {theta})"
        )));
    }
    from_density(rho.min(max_density(theta)), theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Integrand of the enthalpy integral, `dh/drho`.
    fn dh_drho(rho: f64, theta: f64) -> f64 {
        theta * rho.powf(theta - 1.0) / (rho.powf(theta) + rho)
    }

    /// Independent oracle: adaptive Simpson quadrature of `dh/drho` on [a, b].
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fb: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        let coarse = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - coarse).abs() < 15.0 * eps {
            left + right + (left + right - coarse) / 15.0
        } else {
            simpson(f, a, m, fa, fm, eps / 2.0, depth - 1)
                + simpson(f, m, b, fm, fb, eps / 2.0, depth - 1)
        }
    }

    fn h_quadrature(rho: f64, theta: f64) -> f64 {
        // The integrand is integrable at 0; start just above to avoid 0/0.
        let f = move |r: f64| dh_drho(r, theta);
        let a = 1e-14;
        simpson(&f, a, rho, f(a), f(rho), 1e-13, 48) + {
            // Series of the integrand near zero: theta*r^(theta-2)/(1+r^(theta-1)),
            // whose integral on [0,a] is theta/(theta-1)*a^(theta-1) + O(a^(2theta-2)).
            theta / (theta - 1.0) * a.powf(theta - 1.0)
        }
    }

    #[test]
    fn example_theta2_quarter_density() {
        let s = from_density(0.25, 2.0).unwrap();
        assert_relative_eq!(s.log_enthalpy, 2.0 * 1.25f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(s.log_enthalpy, 0.4462871, max_relative = 1e-6);
        assert_relative_eq!(s.sound_speed_sq, 0.5, max_relative = 1e-14);
        assert_relative_eq!(s.pressure, 0.0625, max_relative = 1e-14);
        // quadrature oracle for the same h
        assert_relative_eq!(s.log_enthalpy, h_quadrature(0.25, 2.0), epsilon = 1e-10);
    }

    #[test]
    fn vacuum_limit_normalization() {
        let s = from_density(1e-12, 2.0).unwrap();
        assert!(s.log_enthalpy < 3e-12);
        assert!(s.sound_speed_sq < 3e-12);
        assert_relative_eq!(s.enthalpy, 1.0, epsilon = 1e-11);
    }

    #[test]
    fn example_theta15_quadrature() {
        let s = from_density(0.2, 1.5).unwrap();
        assert_relative_eq!(s.log_enthalpy, h_quadrature(0.2, 1.5), epsilon = 1e-10);
    }

    #[test]
    fn from_enthalpy_examples() {
        // h = 0 -> flagged vacuum boundary
        let v = from_enthalpy(0.0, 2.0).unwrap();
        assert!(v.is_vacuum_boundary());
        assert_eq!(v.enthalpy, 1.0);

        // round trip at theta = 2
        let h = 2.0 * 1.25f64.ln();
        let s = from_enthalpy(h, 2.0).unwrap();
        assert_relative_eq!(s.density, 0.25, epsilon = 1e-10);

        // closed-form inversion of the theta = 2 case, h = 2 ln(1 + rho)
        let s = from_enthalpy(0.2, 2.0).unwrap();
        assert_relative_eq!(s.density, 0.1f64.exp() - 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.density, 0.1051709, max_relative = 1e-6);

        // root-finder oracle: bisect from_density's h against the target
        let target = 0.2;
        let (mut lo, mut hi) = (0.0, max_density(2.0));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if log_enthalpy_of_density(mid, 2.0) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(s.density, 0.5 * (lo + hi), epsilon = 1e-10);
    }

    #[test]
    fn round_trip_log_sweep() {
        let theta = 2.0;
        let rho_max = max_density(theta);
        for k in 0..60 {
            let rho = rho_max * 10f64.powf(-6.0 * (k as f64) / 59.0);
            let s = from_density(rho, theta).unwrap();
            let back = from_enthalpy(s.log_enthalpy, theta).unwrap();
            assert_relative_eq!(back.density, rho, max_relative = 1e-12);
        }
    }

    #[test]
    fn finite_difference_dh_matches_integrand() {
        let theta = 2.0;
        for &rho in &[0.05, 0.1, 0.25, 0.4] {
            let d = 1e-6 * rho;
            let hp = from_density(rho + d, theta).unwrap().log_enthalpy;
            let hm = from_density(rho - d, theta).unwrap().log_enthalpy;
            let fd = (hp - hm) / (2.0 * d);
            assert_relative_eq!(fd, dh_drho(rho, theta), epsilon = 1e-7);
        }
    }

    #[test]
    fn cs2_equals_q_eh_dhdrho() {
        // c_s^2 = q e^h dh/drho with finite-difference dh/drho
        for &(rho, theta) in &[(0.25, 2.0), (0.1, 2.0), (0.2, 1.5), (0.3, 1.7)] {
            let s = from_density(rho, theta).unwrap();
            // 5-point stencil keeps both truncation and cancellation below 1e-12
            let d = 1e-3 * rho;
            let h = |r: f64| from_density(r, theta).unwrap().log_enthalpy;
            let fd = (h(rho - 2.0 * d) - 8.0 * h(rho - d) + 8.0 * h(rho + d) - h(rho + 2.0 * d))
                / (12.0 * d);
            assert_relative_eq!(
                s.sound_speed_sq,
                s.number_density * s.enthalpy * fd,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn enthalpy_relation_and_admissibility() {
        let s = from_density(0.3, 2.0).unwrap();
        // p + rho = q H  (the defining relation for q with unit reference enthalpy)
        assert_relative_eq!(
            s.pressure + s.density,
            s.number_density * s.enthalpy,
            max_relative = 1e-14
        );
        assert!(from_density(0.51, 2.0).is_err()); // c_s^2 > 1
        assert!(from_density(-1.0, 2.0).is_err());
        assert!(from_density(0.2, 0.9).is_err());
        assert!(from_enthalpy(-0.1, 2.0).is_err());
        assert!(from_enthalpy(100.0, 2.0).is_err());
    }

    #[test]
    fn sound_speed_of_h_consistency() {
        for &(rho, theta) in &[(0.25, 2.0), (0.1, 1.5), (0.35, 1.8)] {
            let s = from_density(rho, theta).unwrap();
            assert_relative_eq!(
                sound_speed_sq_of_h(s.log_enthalpy, theta),
                s.sound_speed_sq,
                max_relative = 1e-12
            );
            // derivative by central difference
            let d = 1e-6;
            let fd = (sound_speed_sq_of_h(s.log_enthalpy + d, theta)
                - sound_speed_sq_of_h(s.log_enthalpy - d, theta))
                / (2.0 * d);
            assert_relative_eq!(fd, dsound_speed_sq_dh(s.log_enthalpy, theta), epsilon = 1e-8);
        }
    }
}

//! Physical parameters, unit conventions and validation.
//!
//! Rates are stored in rad/s. Simulations use [`Scaled`] parameters in which
//! the mechanical frequency is one; the cavity frequency only enters
//! validation and reporting.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use crate::error::{domain, Error, Result};
use crate::C64;

/// Reduced Planck constant (J s), `h/2π` with the exact SI value of `h`.
pub const HBAR: f64 = 6.626_070_15e-34 / (2.0 * std::f64::consts::PI);
/// Boltzmann constant (J/K), CODATA 2018 exact.
pub const K_B: f64 = 1.380_649e-23;

/// Default margin for the scale-separation check.
pub const DEFAULT_MARGIN: f64 = 10.0;

/// Physical rates and couplings of the optomechanical system.
///
/// All angular frequencies are in rad/s. The mechanical quality factor is
/// derived on demand from `omega_m / gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub omega_c: f64,
    pub omega_m: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// Single-photon coupling `g = G x_zp`.
    pub g: f64,
    pub eta: f64,
    pub n_bar: f64,
}

impl SystemParams {
    pub fn new(omega_c: f64, omega_m: f64, kappa: f64, gamma: f64, g: f64, eta: f64, n_bar: f64) -> Result<Self> {
        let p = Self {
            omega_c,
            omega_m,
            kappa,
            gamma,
            g,
            eta,
            n_bar,
        };
        p.check()?;
        Ok(p)
    }

    /// Device parameters of a typical microwave BAE setup: 5.3 GHz cavity,
    /// 3.7 MHz mechanics, 260 kHz linewidth, 50 Hz damping.
    pub fn microwave_device() -> Self {
        Self {
            omega_c: 2.0 * PI * 5.3e9,
            omega_m: 2.0 * PI * 3.7e6,
            kappa: 2.0 * PI * 260e3,
            gamma: 2.0 * PI * 50.0,
            g: 2.0 * PI * 10.0,
            eta: 1.0,
            n_bar: 0.0,
        }
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("omega_c", self.omega_c),
            ("omega_m", self.omega_m),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("g", self.g),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} must be strictly positive, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return domain(format!("eta must lie in [0, 1], got {}", self.eta));
        }
        if !(self.n_bar.is_finite() && self.n_bar >= 0.0) {
            return domain(format!("n_bar must be non-negative, got {}", self.n_bar));
        }
        Ok(())
    }

    /// Mechanical quality factor.
    pub fn q(&self) -> f64 {
        self.omega_m / self.gamma
    }

    /// Rates rescaled by the mechanical frequency.
    pub fn scaled(&self) -> Scaled {
        Scaled {
            kappa: self.kappa / self.omega_m,
            gamma: self.gamma / self.omega_m,
            g: self.g / self.omega_m,
            eta: self.eta,
            n_bar: self.n_bar,
        }
    }
}

/// Dimensionless parameters (`Ω_m = 1`). The cavity frequency drops out of
/// all rotating-frame dynamics and is not carried.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub kappa: f64,
    pub gamma: f64,
    pub g: f64,
    pub eta: f64,
    pub n_bar: f64,
}

/// Measured quadrature `X = (e^{iθ} c + e^{-iθ} c†)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadratureConvention {
    pub theta: f64,
}

impl QuadratureConvention {
    pub const VACUUM_VARIANCE: f64 = 0.5;

    /// Coefficients `(u, v)` such that `X = u c + v c†`.
    pub fn ladder_coefficients(&self) -> (C64, C64) {
        let u = C64::from_polar(1.0 / SQRT_2, self.theta);
        (u, u.conj())
    }

    pub fn thermal_variance(n_bar: f64) -> f64 {
        n_bar + 0.5
    }
}

/// Bose-Einstein phonon occupancy at temperature `t_kelvin` for a mode of
/// angular frequency `omega_m` (rad/s).
pub fn thermal_occupancy(t_kelvin: f64, omega_m: f64) -> Result<f64> {
    if !(t_kelvin >= 0.0) {
        return domain(format!("temperature must be non-negative, got {t_kelvin}"));
    }
    if !(omega_m > 0.0) {
        return domain(format!("omega_m must be positive, got {omega_m}"));
    }
    if t_kelvin == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega_m / (K_B * t_kelvin);
    Ok(1.0 / x.exp_m1())
}

/// One ratio of the `γ ≪ κ ≪ Ω_m ≪ ω_c` ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioCheck {
    pub name: &'static str,
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub margin: f64,
    pub checks: Vec<RatioCheck>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &RatioCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<10} ratio {:>12.4e}  {}",
                c.name,
                c.ratio,
                if c.pass { "ok" } else { "FAIL" }
            )?;
        }
        write!(
            f,
            "scale separation (margin {}): {}",
            self.margin,
            if self.pass() { "pass" } else { "fail" }
        )
    }
}

/// Check the good-cavity scale separation with the given margin: each
/// adjacent ratio must be at least `margin`.
pub fn validate_params(p: &SystemParams, margin: f64) -> Result<ValidationReport> {
    p.check()?;
    if !(margin >= 1.0) {
        return domain(format!("margin must be >= 1, got {margin}"));
    }
    let mk = |name, ratio: f64| RatioCheck {
        name,
        ratio,
        pass: ratio >= margin,
    };
    Ok(ValidationReport {
        margin,
        checks: vec![
            mk("gamma:kappa", p.kappa / p.gamma),
            mk("kappa:Omega_m", p.omega_m / p.kappa),
            mk("Omega_m:omega_c", p.omega_c / p.omega_m),
        ],
    })
}

/// Parse an angular frequency written as `"<value> Hz"` (multiplied by 2π)
/// or `"<value> rad/s"`. A bare number is taken as rad/s.
pub fn parse_angular_frequency(s: &str) -> Result<f64> {
    let s = s.trim();
    let (num, factor) = if let Some(v) = s.strip_suffix("rad/s") {
        (v, 1.0)
    } else if let Some(v) = s.strip_suffix("kHz") {
        (v, 2.0 * PI * 1e3)
    } else if let Some(v) = s.strip_suffix("MHz") {
        (v, 2.0 * PI * 1e6)
    } else if let Some(v) = s.strip_suffix("GHz") {
        (v, 2.0 * PI * 1e9)
    } else if let Some(v) = s.strip_suffix("Hz") {
        (v, 2.0 * PI)
    } else {
        (s, 1.0)
    };
    num.trim()
        .parse::<f64>()
        .map(|v| v * factor)
        .map_err(|_| Error::Config(format!("cannot parse frequency {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_temperature_is_empty() {
        assert_eq!(thermal_occupancy(0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn occupancy_one_at_ln2() {
        let omega = 1.0;
        let t = HBAR * omega / (K_B * 2f64.ln());
        assert!((thermal_occupancy(t, omega).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn occupancy_of_microwave_mechanics_at_10mk() {
        // scipy.constants oracle: 55.81666657864197
        let n = thermal_occupancy(0.010, 2.0 * PI * 3.7e6).unwrap();
        assert!((n - 55.816_666_578_641_97).abs() < 1e-9, "{n}");
    }

    #[test]
    fn negative_temperature_rejected() {
        assert!(matches!(thermal_occupancy(-1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn occupancy_monotone() {
        let mut prev = 0.0;
        for i in 1..50 {
            let n = thermal_occupancy(i as f64 * 1e-3, 1e7).unwrap();
            assert!(n > prev);
            prev = n;
        }
        let mut prev = f64::INFINITY;
        for i in 1..50 {
            let n = thermal_occupancy(0.01, i as f64 * 1e6).unwrap();
            assert!(n < prev);
            prev = n;
        }
    }

    #[test]
    fn microwave_device_separates_scales() {
        let r = validate_params(&SystemParams::microwave_device(), 10.0).unwrap();
        assert!(r.pass(), "{r}");
    }

    #[test]
    fn kappa_equal_omega_fails() {
        let mut p = SystemParams::microwave_device();
        p.kappa = p.omega_m;
        let r = validate_params(&p, 10.0).unwrap();
        assert!(!r.pass());
        let fails: Vec<_> = r.failures().map(|c| c.name).collect();
        assert_eq!(fails, vec!["kappa:Omega_m"]);
    }

    #[test]
    fn zero_gamma_is_domain_error() {
        let mut p = SystemParams::microwave_device();
        p.gamma = 0.0;
        assert!(matches!(validate_params(&p, 10.0), Err(Error::Domain(_))));
    }

    #[test]
    fn strict_ordering_passes_margin_one() {
        let p = SystemParams::new(10.0, 5.0, 2.0, 1.5, 1.0, 1.0, 0.0).unwrap();
        assert!(validate_params(&p, 1.0).unwrap().pass());
    }

    #[test]
    fn quality_factor_is_derived() {
        let p = SystemParams::microwave_device();
        assert_eq!(p.q(), p.omega_m / p.gamma);
        let s = p.scaled();
        assert!((s.gamma - 1.0 / p.q()).abs() < 1e-18);
    }

    #[test]
    fn frequency_units() {
        assert!((parse_angular_frequency("1 Hz").unwrap() - 2.0 * PI).abs() < 1e-15);
        assert!((parse_angular_frequency("3.7 MHz").unwrap() - 2.0 * PI * 3.7e6).abs() < 1e-6);
        assert_eq!(parse_angular_frequency("5 rad/s").unwrap(), 5.0);
        assert!(parse_angular_frequency("fast").is_err());
    }
}

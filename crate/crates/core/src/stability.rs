//! Parametric stability of the mechanical mode under an energy-induced
//! frequency modulation.
//!
//! The mechanics obeys the damped Hill equation
//! `ẍ + γ ẋ + Ω'(t)² x = 0` with `Ω'(t) = Ω_m (1 + Σ_n ε_n cos(ν_n t + φ_n))`.
//! Stability follows from the Floquet multipliers, the eigenvalues of the
//! one-period monodromy matrix.

use rayon::prelude::*;

use crate::drive::{energy_spectrum, three_tone_envelope, EnergySpectrum};
use crate::error::{domain, Error, Result};
use crate::ode::{dopri5, Tolerance};
use crate::C64;

/// One modulation component `ε cos(ν t + φ)`; `ν` is in units of the base
/// frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationTerm {
    pub nu: f64,
    pub eps: f64,
    pub phi: f64,
}

/// `Ω'(t) = base · (1 + Σ ε_n cos(ν_n t + φ_n))`.
///
/// `static_shift` is the fractional DC shift produced by the mean energy. It
/// only renormalizes the base frequency and is excluded from the stability
/// analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyModulation {
    pub base: f64,
    pub static_shift: f64,
    pub terms: Vec<ModulationTerm>,
}

impl FrequencyModulation {
    pub fn new(terms: Vec<ModulationTerm>) -> Result<Self> {
        let fm = Self {
            base: 1.0,
            static_shift: 0.0,
            terms,
        };
        fm.check()?;
        Ok(fm)
    }

    pub fn unmodulated() -> Self {
        Self {
            base: 1.0,
            static_shift: 0.0,
            terms: Vec::new(),
        }
    }

    pub fn single(nu: f64, eps: f64, phi: f64) -> Result<Self> {
        Self::new(vec![ModulationTerm { nu, eps, phi }])
    }

    fn check(&self) -> Result<()> {
        for (i, t) in self.terms.iter().enumerate() {
            if !(t.eps >= 0.0) {
                return domain(format!("modulation depth must be non-negative, got {}", t.eps));
            }
            if !(t.nu > 0.0) {
                return domain(format!("modulation frequency must be positive, got {}", t.nu));
            }
            if self.terms[..i].iter().any(|o| o.nu == t.nu) {
                return domain(format!("duplicate modulation frequency {}", t.nu));
            }
        }
        Ok(())
    }

    /// Instantaneous frequency in units of `base`.
    pub fn relative_frequency(&self, t: f64) -> f64 {
        1.0 + self
            .terms
            .iter()
            .map(|m| m.eps * (m.nu / self.base * t + m.phi).cos())
            .sum::<f64>()
    }

    /// Common period of all terms in units of `1/base`. An unmodulated
    /// oscillator uses its own period `2π`.
    pub fn period(&self) -> Result<f64> {
        if self.terms.is_empty() {
            return Ok(2.0 * std::f64::consts::PI);
        }
        let mut num = 0u64;
        let mut den = 1u64;
        for t in &self.terms {
            let (p, q) = rational(t.nu / self.base).ok_or_else(|| {
                Error::Domain(format!(
                    "modulation frequency {} is not commensurate with the base",
                    t.nu
                ))
            })?;
            // gcd(num/den, p/q) = gcd(num q, p den) / (den q)
            let g = gcd(num * q, p * den);
            let d = den * q;
            let r = gcd(g, d);
            num = g / r;
            den = d / r;
        }
        Ok(2.0 * std::f64::consts::PI * den as f64 / num as f64)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

const MAX_DENOMINATOR: u64 = 1000;

/// Continued-fraction rational approximation with denominator at most
/// [`MAX_DENOMINATOR`] reproducing `x` to 1e-9 relative.
fn rational(x: f64) -> Option<(u64, u64)> {
    if !(x > 0.0 && x.is_finite()) {
        return None;
    }
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > MAX_DENOMINATOR {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - x).abs() <= 1e-9 * x {
            return Some((h1, k1));
        }
        let frac = r - r.floor();
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// Floquet analysis of one modulation case.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub multipliers: [C64; 2],
    pub max_magnitude: f64,
    pub stable: bool,
    /// `ln(max|μ|)/T`, in units of the base frequency.
    pub growth_rate: f64,
    /// Modulation period in units of `1/base`.
    pub period: f64,
    /// Relative deviation of `|μ₁μ₂|` from `e^{−γT}`.
    pub liouville_error: f64,
}

/// Monodromy matrix eigenvalues for `ẍ + (1/Q)ẋ + Ω'(t)² x = 0`.
pub fn floquet_monodromy(fm: &FrequencyModulation, q: f64) -> Result<StabilityReport> {
    floquet_monodromy_with(fm, q, Tolerance::default())
}

pub fn floquet_monodromy_with(fm: &FrequencyModulation, q: f64, tol: Tolerance) -> Result<StabilityReport> {
    if !(q > 0.5) {
        return domain(format!("quality factor must exceed 1/2, got {q}"));
    }
    fm.check()?;
    let period = fm.period()?;
    let gamma = 1.0 / q;
    let rhs = |t: f64, y: &[f64; 2]| {
        let w = fm.relative_frequency(t);
        [y[1], -gamma * y[1] - w * w * y[0]]
    };
    let c1 = dopri5(rhs, 0.0, period, [1.0, 0.0], tol)?;
    let c2 = dopri5(rhs, 0.0, period, [0.0, 1.0], tol)?;
    let (m00, m01, m10, m11) = (c1[0], c2[0], c1[1], c2[1]);
    let tr = m00 + m11;
    let det = m00 * m11 - m01 * m10;
    let disc = C64::new(0.25 * tr * tr - det, 0.0).sqrt();
    let multipliers = [0.5 * tr + disc, 0.5 * tr - disc];
    let max_magnitude = multipliers[0].norm().max(multipliers[1].norm());
    if !max_magnitude.is_finite() {
        return Err(Error::Numeric("non-finite Floquet multiplier".into()));
    }
    let expected = (-gamma * period).exp();
    Ok(StabilityReport {
        multipliers,
        max_magnitude,
        stable: max_magnitude <= 1.0,
        growth_rate: max_magnitude.ln() / period,
        period,
        liouville_error: ((multipliers[0] * multipliers[1]).norm() - expected).abs() / expected,
    })
}

/// Map an energy spectrum onto a frequency modulation. `chi` is the
/// fractional frequency shift produced by the mean (DC) energy, so each
/// harmonic contributes depth `χ A_n / dc` at `ν = n Ω_m`.
pub fn energy_to_modulation(spec: &EnergySpectrum, chi: f64) -> Result<FrequencyModulation> {
    if !(spec.dc > 0.0) {
        return domain("energy spectrum has zero DC energy");
    }
    if !chi.is_finite() {
        return domain(format!("chi must be finite, got {chi}"));
    }
    let mut terms = Vec::new();
    if chi != 0.0 {
        for h in &spec.harmonics {
            let eps = chi * h.amplitude / spec.dc;
            // a negative coupling is a π phase flip
            let (eps, phi) = if eps < 0.0 {
                (-eps, h.phase + std::f64::consts::PI)
            } else {
                (eps, h.phase)
            };
            if eps > 0.0 {
                terms.push(ModulationTerm {
                    nu: h.n as f64,
                    eps,
                    phi,
                });
            }
        }
    }
    Ok(FrequencyModulation {
        base: 1.0,
        static_shift: chi,
        terms,
    })
}

/// Result of a bisection threshold scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Smallest unstable depth found, to relative width [`THRESHOLD_REL_WIDTH`].
    Critical(f64),
    /// No instability up to a depth of one.
    StableThroughout,
}

impl Threshold {
    pub fn critical(self) -> Option<f64> {
        match self {
            Threshold::Critical(e) => Some(e),
            Threshold::StableThroughout => None,
        }
    }
}

pub const THRESHOLD_REL_WIDTH: f64 = 1e-4;

/// Bisect the critical modulation depth at frequency `nu` (units of `Ω_m`).
pub fn threshold_scan(nu: f64, q: f64) -> Result<Threshold> {
    if !(nu > 0.0) {
        return domain(format!("modulation frequency must be positive, got {nu}"));
    }
    let unstable =
        |eps: f64| -> Result<bool> { Ok(!floquet_monodromy(&FrequencyModulation::single(nu, eps, 0.0)?, q)?.stable) };
    let (mut lo, mut hi) = (0.0, 1.0);
    if !unstable(hi)? {
        return Ok(Threshold::StableThroughout);
    }
    while hi - lo > THRESHOLD_REL_WIDTH * hi {
        let mid = 0.5 * (lo + hi);
        if unstable(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Threshold::Critical(hi))
}

/// Independent threshold scans over `(ν, Q)` pairs.
pub fn threshold_grid(cases: &[(f64, f64)]) -> Vec<Result<Threshold>> {
    cases.par_iter().map(|&(nu, q)| threshold_scan(nu, q)).collect()
}

/// Outcome for one drive in [`instability_demo`].
#[derive(Debug, Clone, PartialEq)]
pub struct DemoCase {
    pub label: &'static str,
    pub modulation: FrequencyModulation,
    pub report: StabilityReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport {
    pub two_tone: DemoCase,
    pub three_tone: DemoCase,
}

/// Two-tone versus three-tone drive at equal first-sideband amplitude, both
/// mapped through the energy-frequency coupling `chi`.
pub fn instability_demo(mu: f64, phi: f64, chi: f64, q: f64) -> Result<DemoReport> {
    let case = |label, env_mu, env_phi| -> Result<DemoCase> {
        let env = three_tone_envelope(env_mu, env_phi, 1.0)?;
        let modulation = energy_to_modulation(&energy_spectrum(&env)?, chi)?;
        let report = floquet_monodromy(&modulation, q)?;
        Ok(DemoCase {
            label,
            modulation,
            report,
        })
    };
    Ok(DemoReport {
        two_tone: case("two-tone", 0.0, 0.0)?,
        three_tone: case("three-tone", mu, phi)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::two_tone_envelope;
    use std::f64::consts::PI;

    #[test]
    fn rational_detection() {
        assert_eq!(rational(2.0), Some((2, 1)));
        assert_eq!(rational(1.5), Some((3, 2)));
        assert_eq!(rational(2.0f64.sqrt()), None);
    }

    #[test]
    fn common_period() {
        let fm = FrequencyModulation::new(vec![
            ModulationTerm {
                nu: 2.0,
                eps: 0.1,
                phi: 0.0,
            },
            ModulationTerm {
                nu: 4.0,
                eps: 0.1,
                phi: 0.0,
            },
        ])
        .unwrap();
        assert!((fm.period().unwrap() - PI).abs() < 1e-15);
        let fm = FrequencyModulation::new(vec![
            ModulationTerm {
                nu: 2.0,
                eps: 0.1,
                phi: 0.0,
            },
            ModulationTerm {
                nu: 3.0,
                eps: 0.1,
                phi: 0.0,
            },
        ])
        .unwrap();
        assert!((fm.period().unwrap() - 2.0 * PI).abs() < 1e-15);
        let bad = FrequencyModulation::single(PI, 0.1, 0.0).unwrap();
        assert!(matches!(floquet_monodromy(&bad, 1e4), Err(Error::Domain(_))));
    }

    #[test]
    fn free_damped_oscillator() {
        let r = floquet_monodromy(&FrequencyModulation::unmodulated(), 1e4).unwrap();
        assert!(r.stable);
        let expect = (-1e-4 * r.period / 2.0).exp();
        for m in r.multipliers {
            assert!((m.norm() - expect).abs() < 1e-9);
        }
        assert!(r.liouville_error < 1e-8);
    }

    #[test]
    fn double_threshold_at_2omega_is_unstable() {
        let q = 1e4;
        let r = floquet_monodromy(&FrequencyModulation::single(2.0, 2.0 / q, 0.0).unwrap(), q).unwrap();
        assert!(!r.stable);
        assert!(r.growth_rate > 0.0);
        assert!(r.liouville_error < 1e-8);
    }

    #[test]
    fn fourth_harmonic_percent_modulation_is_stable() {
        let r = floquet_monodromy(&FrequencyModulation::single(4.0, 0.01, 0.0).unwrap(), 1e4).unwrap();
        assert!(r.stable, "{r:?}");
        assert!(r.liouville_error < 1e-8);
    }

    #[test]
    fn modulation_mapping() {
        let s = energy_spectrum(&two_tone_envelope(1.0).unwrap()).unwrap();
        let fm = energy_to_modulation(&s, 0.01).unwrap();
        assert_eq!(fm.terms.len(), 1);
        assert_eq!(fm.terms[0].nu, 2.0);
        assert!((fm.terms[0].eps - 0.01).abs() < 1e-15);

        let s = energy_spectrum(&three_tone_envelope(0.5, PI, 1.0).unwrap()).unwrap();
        let fm = energy_to_modulation(&s, 0.03).unwrap();
        assert_eq!(fm.terms.len(), 1);
        assert_eq!(fm.terms[0].nu, 4.0);
        assert!((fm.terms[0].eps - 0.02).abs() < 1e-15);

        let fm = energy_to_modulation(&s, 0.0).unwrap();
        assert!(fm.terms.is_empty());

        let zero = EnergySpectrum {
            dc: 0.0,
            harmonics: vec![],
        };
        assert!(energy_to_modulation(&zero, 0.1).is_err());
    }

    #[test]
    fn phase_does_not_change_first_resonance_verdict() {
        let q = 1e4;
        for &eps in &[0.5 / q, 2.0 / q] {
            let verdicts: Vec<bool> = (0..8)
                .map(|i| {
                    let fm = FrequencyModulation::single(2.0, eps, i as f64 * PI / 4.0).unwrap();
                    floquet_monodromy(&fm, q).unwrap().stable
                })
                .collect();
            assert!(verdicts.iter().all(|&v| v == verdicts[0]), "{verdicts:?}");
        }
    }

    #[test]
    fn growth_monotone_above_threshold() {
        let q = 1e4;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..10 {
            let eps = (1.0 + 0.5 * i as f64) / q;
            let r = floquet_monodromy(&FrequencyModulation::single(2.0, eps, 0.0).unwrap(), q).unwrap();
            assert!(r.growth_rate >= prev);
            prev = r.growth_rate;
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(FrequencyModulation::single(2.0, -0.1, 0.0).is_err());
        assert!(FrequencyModulation::single(0.0, 0.1, 0.0).is_err());
        assert!(floquet_monodromy(&FrequencyModulation::unmodulated(), 0.4).is_err());
    }
}

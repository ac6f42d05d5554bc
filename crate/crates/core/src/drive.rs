//! Drive tones, intracavity envelopes and the harmonic content of the
//! intracavity energy.
//!
//! A drive is a comb of tones `β_ℓ` at `ω_c + ℓΩ_m`. In the frame rotating
//! at `ω_c` the cavity filters each tone independently, giving the envelope
//! `α(t) = Σ_ℓ α_ℓ e^{iℓΩ_m t}`. The energy `|α(t)|²` oscillates at even
//! harmonics of `Ω_m` for the usual sideband drives, and it is the `2Ω_m`
//! component that pumps the parametric instability.
//!
//! Time in this module is dimensionless (`Ω_m t`).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};
use crate::C64;

/// Harmonics weaker than this fraction of the DC energy are dropped.
const HARMONIC_FLOOR: f64 = 1e-14;

/// Drive tones `β_ℓ` in √(photons/s), keyed by sideband index `ℓ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriveSpec {
    tones: BTreeMap<i32, C64>,
}

impl DriveSpec {
    /// Build from `(ℓ, β_ℓ)` pairs; indices must be distinct and at least
    /// one tone nonzero.
    pub fn new(tones: impl IntoIterator<Item = (i32, C64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (ell, beta) in tones {
            if map.insert(ell, beta).is_some() {
                return domain(format!("duplicate sideband index {ell}"));
            }
        }
        if !map.values().any(|b| b.norm() > 0.0) {
            return domain("drive needs at least one nonzero tone");
        }
        Ok(Self { tones: map })
    }

    pub fn tones(&self) -> impl Iterator<Item = (i32, C64)> + '_ {
        self.tones.iter().map(|(&l, &b)| (l, b))
    }

    pub fn get(&self, ell: i32) -> Option<C64> {
        self.tones.get(&ell).copied()
    }

    pub fn len(&self) -> usize {
        self.tones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tones.is_empty()
    }
}

/// Intracavity envelope Fourier coefficients `α_ℓ` in √photons.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvelopeSeries {
    coeffs: BTreeMap<i32, C64>,
}

impl EnvelopeSeries {
    pub fn new(coeffs: impl IntoIterator<Item = (i32, C64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (ell, a) in coeffs {
            if map.insert(ell, a).is_some() {
                return domain(format!("duplicate sideband index {ell}"));
            }
        }
        Ok(Self { coeffs: map })
    }

    /// Symmetric cosine series `α(t) = scale · Σ_n a_n cos((2n+1)t)`.
    pub fn from_odd_cosines(a: &[f64], scale: f64) -> Self {
        let mut coeffs = BTreeMap::new();
        for (n, &an) in a.iter().enumerate() {
            let ell = 2 * n as i32 + 1;
            let half = C64::new(0.5 * an * scale, 0.0);
            coeffs.insert(ell, half);
            coeffs.insert(-ell, half);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (i32, C64)> + '_ {
        self.coeffs.iter().map(|(&l, &a)| (l, a))
    }

    pub fn get(&self, ell: i32) -> Option<C64> {
        self.coeffs.get(&ell).copied()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest `|ℓ|` present.
    pub fn bandwidth(&self) -> i32 {
        self.coeffs.keys().map(|l| l.abs()).max().unwrap_or(0)
    }

    /// Envelope value at dimensionless time `t = Ω_m t`.
    pub fn at(&self, t: f64) -> C64 {
        envelope_waveform(self, t)
    }

    /// Mean photon number `Σ |α_ℓ|²`.
    pub fn mean_photons(&self) -> f64 {
        self.coeffs.values().map(|a| a.norm_sqr()).sum()
    }
}

/// `α(t) = Σ_ℓ α_ℓ e^{iℓt}`.
pub fn envelope_waveform(env: &EnvelopeSeries, t: f64) -> C64 {
    env.coeffs
        .iter()
        .map(|(&l, &a)| a * C64::from_polar(1.0, l as f64 * t))
        .sum()
}

fn check_rates(kappa: f64, omega_m: f64) -> Result<()> {
    if !(kappa > 0.0 && omega_m > 0.0) {
        return domain(format!(
            "kappa and omega_m must be positive (kappa = {kappa}, omega_m = {omega_m})"
        ));
    }
    Ok(())
}

/// Cavity response to each drive tone: `α_ℓ = √κ β_ℓ / (iΩ_m ℓ + κ/2)`.
pub fn envelope_from_tones(spec: &DriveSpec, kappa: f64, omega_m: f64) -> Result<EnvelopeSeries> {
    check_rates(kappa, omega_m)?;
    let sk = kappa.sqrt();
    Ok(EnvelopeSeries {
        coeffs: spec
            .tones()
            .map(|(l, b)| (l, sk * b / C64::new(0.5 * kappa, omega_m * l as f64)))
            .collect(),
    })
}

/// Inverse of [`envelope_from_tones`]: the tones needed for a target envelope.
pub fn tones_from_envelope(env: &EnvelopeSeries, kappa: f64, omega_m: f64) -> Result<DriveSpec> {
    check_rates(kappa, omega_m)?;
    let sk = kappa.sqrt();
    Ok(DriveSpec {
        tones: env
            .coeffs()
            .map(|(l, a)| (l, a * C64::new(0.5 * kappa, omega_m * l as f64) / sk))
            .collect(),
    })
}

/// Two sideband tones plus a single one-sided tone at `+3Ω_m`:
/// `α(t) = A [cos t + μ e^{i(3t + Φ)}]`.
pub fn three_tone_envelope(mu: f64, phi: f64, amplitude: f64) -> Result<EnvelopeSeries> {
    if !(amplitude > 0.0) {
        return domain(format!("amplitude must be positive, got {amplitude}"));
    }
    if !(mu >= 0.0) {
        return domain(format!("mu must be non-negative, got {mu}"));
    }
    let half = C64::new(0.5 * amplitude, 0.0);
    let mut coeffs = BTreeMap::from([(-1, half), (1, half)]);
    if mu > 0.0 {
        coeffs.insert(3, C64::from_polar(amplitude * mu, phi));
    }
    Ok(EnvelopeSeries { coeffs })
}

/// Plain two-tone BAE drive `α(t) = A cos t`.
pub fn two_tone_envelope(amplitude: f64) -> Result<EnvelopeSeries> {
    three_tone_envelope(0.0, 0.0, amplitude)
}

/// One harmonic `A_n cos(n t + Φ_n)` of the intracavity energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub n: u32,
    pub amplitude: f64,
    pub phase: f64,
}

/// `E(t) = dc + Σ_n A_n cos(n t + Φ_n)`, in photons.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpectrum {
    pub dc: f64,
    pub harmonics: Vec<Harmonic>,
}

impl EnergySpectrum {
    pub fn harmonic(&self, n: u32) -> Option<&Harmonic> {
        self.harmonics.iter().find(|h| h.n == n)
    }

    /// Amplitude of harmonic `n`, zero when it was dropped.
    pub fn amplitude(&self, n: u32) -> f64 {
        self.harmonic(n).map_or(0.0, |h| h.amplitude)
    }

    pub fn at(&self, t: f64) -> f64 {
        self.dc
            + self
                .harmonics
                .iter()
                .map(|h| h.amplitude * (h.n as f64 * t + h.phase).cos())
                .sum::<f64>()
    }
}

/// Phase folded into `(−π, π]`.
fn principal_arg(z: C64) -> f64 {
    let p = z.arg();
    if p <= -PI {
        p + 2.0 * PI
    } else {
        p
    }
}

/// Harmonic decomposition of `|α(t)|²` by exact coefficient convolution,
/// `c_n = Σ_ℓ α_{n+ℓ} α_ℓ*`, with `A_n = 2|c_n|` and `Φ_n = arg c_n`.
pub fn energy_spectrum(env: &EnvelopeSeries) -> Result<EnergySpectrum> {
    if env.is_empty() {
        return domain("energy spectrum of an empty envelope");
    }
    let dc = env.mean_photons();
    let (lo, hi) = (
        *env.coeffs.keys().next().unwrap(),
        *env.coeffs.keys().next_back().unwrap(),
    );
    let span = (hi - lo) as u32;
    let mut harmonics = Vec::new();
    for n in 1..=span {
        let c: C64 = env
            .coeffs
            .iter()
            .filter_map(|(&l, &a)| env.coeffs.get(&(l + n as i32)).map(|&b| b * a.conj()))
            .sum();
        let amplitude = 2.0 * c.norm();
        if amplitude < HARMONIC_FLOOR * dc {
            continue;
        }
        harmonics.push(Harmonic {
            n,
            amplitude,
            phase: principal_arg(c),
        });
    }
    Ok(EnergySpectrum { dc, harmonics })
}

/// Closed-form `2Ω_m` energy harmonic of the three-tone envelope:
/// `A_2 = √(1/4 + μ cos Φ + μ²)`, `Φ_2 = arg(1/2 + μ e^{iΦ})`.
pub fn a2_phi2(mu: f64, phi: f64) -> (f64, f64) {
    let re = 0.5 + mu * phi.cos();
    let im = mu * phi.sin();
    // the radicand can dip a few ulps below zero at the cancellation point
    let a2 = (0.25 + mu * phi.cos() + mu * mu).max(0.0).sqrt();
    let p2 = if a2 == 0.0 {
        0.0
    } else {
        principal_arg(C64::new(re, im))
    };
    (a2, p2)
}

/// First-order residual `2Ω_m` amplitude near the cancellation point
/// `μ = 1/2 + δμ`, `Φ = π + δΦ`.
pub fn residual_amplitude(d_mu: f64, d_phi: f64) -> f64 {
    if d_mu.abs() > 0.1 || d_phi.abs() > 0.1 {
        log::warn!(
            "residual_amplitude: perturbation (dmu = {d_mu}, dphi = {d_phi}) outside the small-deviation regime"
        );
    }
    (d_mu * d_mu + 0.25 * d_phi * d_phi).sqrt()
}

/// Converged odd-cosine envelope coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MultitoneSolution {
    /// `a_0..a_N` with `a_0 = 1`.
    pub coeffs: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl MultitoneSolution {
    pub fn envelope(&self, scale: f64) -> EnvelopeSeries {
        EnvelopeSeries::from_odd_cosines(&self.coeffs, scale)
    }
}

pub const MULTITONE_TOL: f64 = 1e-12;
pub const MULTITONE_MAX_ITER: usize = 100;

/// Cosine coefficient of `cos(2jt)` in `(Σ_n a_n cos((2n+1)t))²` for `j ≥ 1`.
pub fn odd_cosine_square_harmonic(a: &[f64], j: usize) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for m in 0..n {
        // sum term: m + k + 1 = j
        if j > m {
            let k = j - m - 1;
            if k < n {
                s += a[m] * a[k];
            }
        }
        // difference terms: |m - k| = j
        if m + j < n {
            s += a[m] * a[m + j];
        }
        if m >= j {
            s += a[m] * a[m - j];
        }
    }
    0.5 * s
}

fn multitone_jacobian(a: &[f64]) -> DMatrix<f64> {
    let n = a.len() - 1;
    DMatrix::from_fn(n, n, |row, col| {
        let (j, k) = (row + 1, col + 1);
        let mut s = 0.0;
        if j > k && j - k - 1 <= n {
            s += a[j - k - 1];
        }
        if k + j <= n {
            s += a[k + j];
        }
        if k >= j {
            s += a[k - j];
        }
        s
    })
}

/// Real odd-cosine envelope `Σ_{n=0}^{N} a_n cos((2n+1)t)` with `a_0 = 1`
/// whose energy has no harmonics at `2, 4, ..., 2N` times `Ω_m`.
///
/// Newton iteration on the `N` quadratic conditions, started from the
/// truncated square-wave series `a_n = (−1)ⁿ/(2n+1)`.
pub fn solve_multitone(n_tones: usize) -> Result<MultitoneSolution> {
    let mut a: Vec<f64> = (0..=n_tones)
        .map(|n| if n % 2 == 0 { 1.0 } else { -1.0 } / (2 * n + 1) as f64)
        .collect();
    let residual_of = |a: &[f64]| -> DVector<f64> {
        DVector::from_iterator(n_tones, (1..=n_tones).map(|j| odd_cosine_square_harmonic(a, j)))
    };
    let mut r = residual_of(&a);
    let mut res = r.amax();
    for it in 0..=MULTITONE_MAX_ITER {
        if res < MULTITONE_TOL {
            return Ok(MultitoneSolution {
                coeffs: a,
                iterations: it,
                residual: res,
            });
        }
        if it == MULTITONE_MAX_ITER {
            break;
        }
        let step = multitone_jacobian(&a).lu().solve(&r).ok_or(Error::Solver {
            iterations: it,
            residual: res,
        })?;
        for (ai, d) in a[1..].iter_mut().zip(step.iter()) {
            *ai -= d;
        }
        r = residual_of(&a);
        res = r.amax();
        if !res.is_finite() {
            break;
        }
    }
    Err(Error::Solver {
        iterations: MULTITONE_MAX_ITER,
        residual: res,
    })
}

/// RMS distance between the RMS-normalized odd-cosine envelope and the unit
/// square wave `sign(cos t)` over one period, evaluated in closed form.
pub fn square_wave_distance(a: &[f64]) -> f64 {
    let mean_sq: f64 = 0.5 * a.iter().map(|x| x * x).sum::<f64>();
    // (1/2π)∫ cos((2n+1)t) sign(cos t) dt = 2(−1)ⁿ / (π(2n+1))
    let overlap: f64 = a
        .iter()
        .enumerate()
        .map(|(n, &an)| {
            let s = if n % 2 == 0 { 1.0 } else { -1.0 };
            an * 2.0 * s / (PI * (2 * n + 1) as f64)
        })
        .sum();
    (2.0 - 2.0 * overlap / mean_sq.sqrt()).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn sideband_pumping_gives_real_equal_envelope() {
        let (kappa, om, b) = (0.3, 1.0, 0.7);
        let spec = DriveSpec::new([(1, c(kappa / 2.0, om) * b), (-1, c(kappa / 2.0, -om) * b)]).unwrap();
        let env = envelope_from_tones(&spec, kappa, om).unwrap();
        for l in [-1, 1] {
            let a = env.get(l).unwrap();
            assert!((a - c(kappa.sqrt() * b, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn third_sideband_pumping() {
        let (kappa, om, b) = (0.3, 1.0, 0.7);
        let spec = DriveSpec::new([(3, -c(kappa / 2.0, 3.0 * om) * b)]).unwrap();
        let env = envelope_from_tones(&spec, kappa, om).unwrap();
        assert!((env.get(3).unwrap() - c(-kappa.sqrt() * b, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn dc_response() {
        let kappa: f64 = 0.25;
        let spec = DriveSpec::new([(0, c(1.0, 0.0))]).unwrap();
        let env = envelope_from_tones(&spec, kappa, 1.0).unwrap();
        assert!((env.get(0).unwrap() - c(2.0 / kappa.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn inverse_of_sideband_envelope() {
        let (kappa, om, b) = (0.3f64, 1.0, 0.7);
        let env = EnvelopeSeries::new([(1, c(kappa.sqrt() * b, 0.0)), (-1, c(kappa.sqrt() * b, 0.0))]).unwrap();
        let spec = tones_from_envelope(&env, kappa, om).unwrap();
        assert!((spec.get(1).unwrap() - c(kappa / 2.0, om) * b).norm() < 1e-14);
        assert!((spec.get(-1).unwrap() - c(kappa / 2.0, -om) * b).norm() < 1e-14);
    }

    #[test]
    fn empty_envelope_gives_empty_spec() {
        let spec = tones_from_envelope(&EnvelopeSeries::default(), 1.0, 1.0).unwrap();
        assert!(spec.is_empty());
    }

    #[test]
    fn drive_spec_invariants() {
        assert!(DriveSpec::new([(1, c(1.0, 0.0)), (1, c(2.0, 0.0))]).is_err());
        assert!(DriveSpec::new([(1, c(0.0, 0.0))]).is_err());
        assert!(envelope_from_tones(&DriveSpec::new([(1, c(1.0, 0.0))]).unwrap(), 0.0, 1.0).is_err());
    }

    #[test]
    fn three_tone_coefficients() {
        let env = three_tone_envelope(0.5, PI, 1.0).unwrap();
        assert!((env.get(3).unwrap() - c(-0.5, 0.0)).norm() < 1e-15);
        assert_eq!(env.get(1), Some(c(0.5, 0.0)));
        assert_eq!(env.get(-1), Some(c(0.5, 0.0)));
        let two = three_tone_envelope(0.0, 1.0, 2.0).unwrap();
        assert_eq!(two.len(), 2);
        assert!((two.at(0.3) - c(2.0 * 0.3f64.cos(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cosine_energy_spectrum() {
        let env = two_tone_envelope(1.0).unwrap();
        let s = energy_spectrum(&env).unwrap();
        assert!((s.dc - 0.5).abs() < 1e-15);
        let h2 = s.harmonic(2).unwrap();
        assert!((h2.amplitude - 0.5).abs() < 1e-15);
        assert!(h2.phase.abs() < 1e-15);
        assert_eq!(s.harmonics.len(), 1);
    }

    #[test]
    fn ideal_three_tone_spectrum() {
        let s = energy_spectrum(&three_tone_envelope(0.5, PI, 1.0).unwrap()).unwrap();
        assert!((s.dc - 0.75).abs() < 1e-15);
        assert!(s.amplitude(2) < 1e-15);
        let h4 = s.harmonic(4).unwrap();
        assert!((h4.amplitude - 0.5).abs() < 1e-15);
        assert!((h4.phase - PI).abs() < 1e-15);
    }

    #[test]
    fn three_tone_spectrum_matches_closed_form() {
        for &(mu, phi) in &[(0.2, 0.3), (0.7, -2.0), (0.5, 3.0), (1.3, 1.1)] {
            let s = energy_spectrum(&three_tone_envelope(mu, phi, 1.0).unwrap()).unwrap();
            let (a2, p2) = a2_phi2(mu, phi);
            let h2 = s.harmonic(2).unwrap();
            assert!((h2.amplitude - a2).abs() < 1e-14);
            assert!((h2.phase - p2).abs() < 1e-14);
            assert!((s.dc - 0.5 - mu * mu).abs() < 1e-14);
            assert!((s.amplitude(4) - mu).abs() < 1e-14);
            // arctangent closed form, valid in its principal domain
            if 1.0 + 2.0 * mu * phi.cos() > 0.0 {
                let at = (2.0 * mu * phi.sin() / (1.0 + 2.0 * mu * phi.cos())).atan();
                assert!((at - p2).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn a2_special_points() {
        assert_eq!(a2_phi2(0.5, PI).0, 0.0);
        let (a, p) = a2_phi2(0.0, 1.234);
        assert_eq!((a, p), (0.5, 0.0));
        assert!((a2_phi2(0.51, PI).0 - 0.01).abs() < 1e-14);
    }

    #[test]
    fn residual_points() {
        assert_eq!(residual_amplitude(0.0, 0.0), 0.0);
        assert!((residual_amplitude(0.01, 0.0) - 0.01).abs() < 1e-16);
        assert!((residual_amplitude(0.0, 0.02) - 0.01).abs() < 1e-16);
        let exact = a2_phi2(0.5, PI + 0.02).0;
        assert!((exact - 0.01).abs() < 1e-4);
    }

    #[test]
    fn multitone_trivial_and_single() {
        let s0 = solve_multitone(0).unwrap();
        assert_eq!(s0.coeffs, vec![1.0]);
        let s1 = solve_multitone(1).unwrap();
        assert!((s1.coeffs[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn multitone_jacobian_matches_finite_differences() {
        let a = [1.0, -0.4, 0.15, -0.1, 0.05];
        let jac = multitone_jacobian(&a);
        let h = 1e-6;
        for k in 1..a.len() {
            let mut ap = a;
            let mut am = a;
            ap[k] += h;
            am[k] -= h;
            for j in 1..a.len() {
                let fd = (odd_cosine_square_harmonic(&ap, j) - odd_cosine_square_harmonic(&am, j)) / (2.0 * h);
                assert!((fd - jac[(j - 1, k - 1)]).abs() < 1e-8, "j={j} k={k}");
            }
        }
    }

    #[test]
    fn square_harmonic_matches_sampled_square() {
        let a = [1.0, -0.3, 0.2];
        let m = 64;
        for j in 1..6 {
            let mut s = 0.0;
            for i in 0..m {
                let t = 2.0 * PI * i as f64 / m as f64;
                let v: f64 = a
                    .iter()
                    .enumerate()
                    .map(|(n, an)| an * ((2 * n + 1) as f64 * t).cos())
                    .sum();
                s += v * v * (2.0 * j as f64 * t).cos();
            }
            s *= 2.0 / m as f64;
            assert!((s - odd_cosine_square_harmonic(&a, j)).abs() < 1e-13);
        }
    }

    #[test]
    fn square_wave_distance_matches_quadrature() {
        let a = [1.0, -0.35, 0.1];
        let m = 200_000;
        let rms = (0.5 * a.iter().map(|x| x * x).sum::<f64>()).sqrt();
        let mut acc = 0.0;
        for i in 0..m {
            let t = 2.0 * PI * (i as f64 + 0.5) / m as f64;
            let v: f64 = a
                .iter()
                .enumerate()
                .map(|(n, an)| an * ((2 * n + 1) as f64 * t).cos())
                .sum();
            let d = v / rms - t.cos().signum();
            acc += d * d;
        }
        let quad = (acc / m as f64).sqrt();
        assert!((quad - square_wave_distance(&a)).abs() < 1e-5);
    }

    #[test]
    fn waveform_points() {
        let env = two_tone_envelope(2.0).unwrap();
        assert!((env.at(0.0) - c(2.0, 0.0)).norm() < 1e-15);
        assert!(env.at(PI / 2.0).norm() < 1e-15);
        let three = three_tone_envelope(0.5, PI, 2.0).unwrap();
        assert!((three.at(0.0) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn empty_spectrum_rejected() {
        assert!(energy_spectrum(&EnvelopeSeries::default()).is_err());
    }
}

use std::f64::consts::PI;

use bae_core::drive::*;
use bae_core::C64;
use proptest::collection::btree_map;
use proptest::prelude::*;
use rustfft::FftPlanner;

fn complex() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn envelope() -> impl Strategy<Value = EnvelopeSeries> {
    btree_map(-8i32..=8, complex(), 1..8).prop_map(|m| EnvelopeSeries::new(m).unwrap())
}

fn rel_err(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

proptest! {
    #[test]
    fn tone_envelope_round_trip(
        tones in btree_map(-6i32..=6, complex(), 1..6),
        kappa in 1e-3..2.0f64,
        om in 0.1..10.0f64,
    ) {
        prop_assume!(tones.values().any(|b| b.norm() > 1e-6));
        let spec = DriveSpec::new(tones).unwrap();
        let back = tones_from_envelope(&envelope_from_tones(&spec, kappa, om).unwrap(), kappa, om).unwrap();
        prop_assert_eq!(back.len(), spec.len());
        for (l, b) in spec.tones() {
            prop_assert!(rel_err(back.get(l).unwrap(), b) < 1e-12);
        }
    }

    #[test]
    fn sampled_envelope_reproduces_coefficients(env in envelope()) {
        let m = 64;
        let samples: Vec<C64> = (0..m).map(|k| env.at(2.0 * PI * k as f64 / m as f64)).collect();
        let scale = env.coeffs().map(|(_, a)| a.norm()).fold(0.0, f64::max);
        for l in -8i32..=8 {
            let c: C64 = samples
                .iter()
                .enumerate()
                .map(|(k, s)| s * C64::from_polar(1.0, -2.0 * PI * (l * k as i32) as f64 / m as f64))
                .sum::<C64>()
                / m as f64;
            let want = env.get(l).unwrap_or_default();
            prop_assert!((c - want).norm() <= 1e-12 * scale, "l = {l}: {c} vs {want}");
        }
    }

    #[test]
    fn energy_is_real_and_matches_pointwise(env in envelope()) {
        let spec = energy_spectrum(&env).unwrap();
        let dc: f64 = env.coeffs().map(|(_, a)| a.norm_sqr()).sum();
        prop_assert!((spec.dc - dc).abs() <= 1e-14 * dc);
        for k in 0..1024 {
            let t = 2.0 * PI * k as f64 / 1024.0;
            let e = spec.at(t);
            prop_assert!(e >= -1e-10 * dc);
            prop_assert!((e - env.at(t).norm_sqr()).abs() <= 1e-10 * dc.max(1.0));
        }
    }

    #[test]
    fn spectrum_matches_fft_of_sampled_energy(env in envelope()) {
        let n = 256;
        let mut buf: Vec<rustfft::num_complex::Complex<f64>> = (0..n)
            .map(|k| {
                let e = env.at(2.0 * PI * k as f64 / n as f64).norm_sqr();
                rustfft::num_complex::Complex::new(e, 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let spec = energy_spectrum(&env).unwrap();
        let tol = 1e-10 * spec.dc.max(1.0);
        prop_assert!((buf[0].re / n as f64 - spec.dc).abs() <= tol);
        for (h, f) in buf.iter().enumerate().take(17).skip(1) {
            // E contains A cos(n t + Φ) = (A/2)(e^{i(nt+Φ)} + c.c.); the forward
            // FFT bin n picks the e^{+int} part
            let f = f / n as f64;
            let want = spec.harmonic(h as u32).map_or(C64::new(0.0, 0.0), |x| C64::from_polar(0.5 * x.amplitude, x.phase));
            prop_assert!((C64::new(f.re, f.im) - want).norm() <= tol, "n = {h}");
        }
    }

    #[test]
    fn perturbation_constant_is_small(dm in -0.01..0.01f64, dp in -0.01..0.01f64) {
        let size = dm.abs() + dp.abs();
        prop_assume!(size > 1e-6);
        let (exact, _) = a2_phi2(0.5 + dm, PI + dp);
        let c = (exact - residual_amplitude(dm, dp)).abs() / (size * size);
        prop_assert!(c <= 2.0, "C = {c}");
    }
}

#[test]
fn multitone_frozen_coefficients() {
    // independent oracle: scipy fsolve on FFT harmonics of the sampled square
    let s2 = solve_multitone(2).unwrap();
    let want2 = [1.0, -0.36602540378443865, 0.3660254037844387];
    let s4 = solve_multitone(4).unwrap();
    let want4 = [
        1.0,
        -0.33731513245918254,
        0.21766923831773063,
        -0.18678712998596667,
        0.2602102579414014,
    ];
    for (a, b) in s2.coeffs.iter().zip(want2).chain(s4.coeffs.iter().zip(want4)) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    assert_eq!(solve_multitone(0).unwrap().coeffs, vec![1.0]);
}

#[test]
fn multitone_cancels_through_2n_but_not_beyond() {
    for n in 1..=16 {
        let sol = solve_multitone(n).unwrap();
        let spec = energy_spectrum(&sol.envelope(1.0)).unwrap();
        for j in 1..=n as u32 {
            assert!(spec.amplitude(2 * j) < 1e-10 * spec.dc, "N = {n}, harmonic {}", 2 * j);
        }
        assert!(spec.amplitude(2 * n as u32 + 2) > 1e-3 * spec.dc, "N = {n}");
    }
}

#[test]
fn residual_agrees_with_exact_to_second_order() {
    let (exact, _) = a2_phi2(0.5, PI + 0.02);
    assert!((residual_amplitude(0.0, 0.02) - 0.01).abs() < 1e-15);
    assert!((exact - 0.01).abs() < 1e-4);
    let (a, _) = a2_phi2(0.51, PI);
    assert!((a - 0.01).abs() < 1e-12);
}

#[test]
fn waveform_of_ideal_three_tone() {
    let amp = 2.0;
    let env = three_tone_envelope(0.5, PI, amp).unwrap();
    assert!((envelope_waveform(&env, 0.0) - C64::new(0.5 * amp, 0.0)).norm() < 1e-15);
    let cos = two_tone_envelope(amp).unwrap();
    assert!(envelope_waveform(&cos, 0.5 * PI).norm() < 1e-15);
}

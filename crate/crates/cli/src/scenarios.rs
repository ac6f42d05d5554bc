use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use bae_core::acceptance::{self, Outcome, Tolerances};
use bae_core::drive::{
    energy_spectrum, envelope_from_tones, solve_multitone, square_wave_distance, three_tone_envelope,
    two_tone_envelope, DriveSpec, EnvelopeSeries,
};
use bae_core::filter::{
    max_step, measurement_strength, simulate_ensemble, steady_state, FilterParams, FilterRun, GaussianState, Variance,
};
use bae_core::model::{thermal_occupancy, validate_params, SystemParams, DEFAULT_MARGIN};
use bae_core::sme::{
    adiabatic_check, phase_dependence_demo, run_ensemble, rwa_reduce, AdiabaticConfig, EnsembleAverage,
    HamiltonianSource, Scheme, SmeParams, SmeRun, STEP_BOUND,
};
use bae_core::stability::{
    energy_to_modulation, floquet_monodromy, instability_demo, threshold_grid, FrequencyModulation, Threshold,
};
use bae_core::C64;

use crate::config::{missing, RunConfig};
use crate::output::{Csv, Header, F};
use crate::CliError;

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a Path,
    pub seed: u64,
    pub quiet: bool,
    pub scenario: &'static str,
}

impl Ctx<'_> {
    fn header(&self, extra: Vec<(String, String)>) -> Header {
        Header {
            scenario: self.scenario,
            config_hash: self.cfg.hash(),
            seed: self.seed,
            extra,
        }
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn wrote(&self, p: PathBuf) {
        self.say(format!("wrote {}", p.display()));
    }
}

/// Dimensionless rates (`Ω_m = 1`) and the drive envelope.
struct Physics {
    kappa: f64,
    gamma: f64,
    g: f64,
    eta: f64,
    n_bar: f64,
    envelope: EnvelopeSeries,
}

fn n_bar(cfg: &RunConfig, omega_m: f64) -> Result<f64, CliError> {
    let direct = cfg.f64("n_bar")?;
    let t = cfg.f64("temperature")?;
    match (direct, t) {
        (Some(n), Some(_)) => {
            log::warn!("both n_bar and temperature given; using n_bar = {n}");
            Ok(n)
        }
        (Some(n), None) => Ok(n),
        (None, Some(t)) => Ok(thermal_occupancy(t, omega_m)?),
        (None, None) => Ok(0.0),
    }
}

fn envelope(cfg: &RunConfig, default: Option<&str>) -> Result<EnvelopeSeries, CliError> {
    let kind = cfg.raw("drive").or(default).ok_or_else(|| missing("drive"))?;
    let amp = cfg.f64_or("amplitude", 1.0)?;
    let env = match kind {
        "two-tone" => two_tone_envelope(amp)?,
        "three-tone" => three_tone_envelope(cfg.f64_or("mu", 0.5)?, cfg.f64_or("phi", PI)?, amp)?,
        "multitone" => {
            let n = cfg.usize("tones")?.ok_or_else(|| missing("tones"))?;
            solve_multitone(n)?.envelope(amp)
        }
        "tones" => {
            let path = cfg.path("tone_file").ok_or_else(|| missing("tone_file"))?;
            let spec = read_tone_file(&path)?;
            envelope_from_tones(&spec, cfg.require_freq("kappa")?, cfg.require_freq("omega_m")?)?
        }
        other => {
            return Err(CliError::Config(format!(
                "key `drive`: expected two-tone, three-tone, multitone or tones, got {other:?}"
            )))
        }
    };
    Ok(env)
}

/// Lines of `ell re im`, amplitudes in sqrt(photons/s).
fn read_tone_file(path: &Path) -> Result<DriveSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("key `tone_file`: cannot read {}: {e}", path.display())))?;
    let mut tones = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let bad = || CliError::Config(format!("{}:{}: expected `ell re im`", path.display(), i + 1));
        if f.len() != 3 {
            return Err(bad());
        }
        let ell: i32 = f[0].parse().map_err(|_| bad())?;
        let re: f64 = f[1].parse().map_err(|_| bad())?;
        let im: f64 = f[2].parse().map_err(|_| bad())?;
        tones.push((ell, C64::new(re, im)));
    }
    Ok(DriveSpec::new(tones)?)
}

fn physics(cfg: &RunConfig) -> Result<Physics, CliError> {
    let omega_m = cfg.require_freq("omega_m")?;
    let kappa = cfg.require_freq("kappa")?;
    let gamma = cfg.require_freq("gamma")?;
    let eta = cfg.f64_or("eta", 1.0)?;
    let n_bar = n_bar(cfg, omega_m)?;
    let envelope = envelope(cfg, Some("two-tone"))?;
    if let Some(omega_c) = cfg.freq("omega_c")? {
        let sys = SystemParams {
            omega_c,
            omega_m,
            kappa,
            gamma,
            g: 0.0,
            eta,
            n_bar,
        };
        let report = validate_params(&sys, DEFAULT_MARGIN)?;
        if !report.pass() {
            log::warn!("scale separation not satisfied:\n{report}");
        }
    }
    let kappa = kappa / omega_m;
    let alpha1 = envelope.get(1).map_or(0.0, |a| a.norm());
    let g = match (cfg.freq("g")?, cfg.f64("epsilon")?) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either `g` or `epsilon`, not both".into())),
        (Some(g), None) => g / omega_m,
        (None, Some(eps)) => {
            if alpha1 == 0.0 {
                return Err(CliError::Config(
                    "key `epsilon` needs a drive with a first sideband".into(),
                ));
            }
            eps * kappa / alpha1
        }
        (None, None) => return Err(missing("g")),
    };
    Ok(Physics {
        kappa,
        gamma: gamma / omega_m,
        g,
        eta,
        n_bar,
        envelope,
    })
}

fn quality(cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.f64("q")? {
        Some(q) => Ok(q),
        None => Ok(cfg.require_freq("omega_m")? / cfg.require_freq("gamma")?),
    }
}

fn default_dt(kappa: f64, coupling: f64) -> f64 {
    STEP_BOUND / kappa.max(1.0).max(coupling)
}

pub fn synthesize_drive(ctx: &Ctx, tones_flag: Option<usize>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let n = match (tones_flag, cfg.usize("tones")?) {
        (Some(n), _) | (None, Some(n)) => n,
        (None, None) => return Err(missing("tones")),
    };
    let samples = cfg.usize_or("samples", 512)?;
    if samples == 0 {
        return Err(CliError::Config("key `samples` must be positive".into()));
    }
    cfg.finish(ctx.scenario)?;
    let sol = solve_multitone(n)?;
    let dist = square_wave_distance(&sol.coeffs);
    let header = ctx.header(vec![
        ("tones".into(), n.to_string()),
        ("newton_iterations".into(), sol.iterations.to_string()),
        ("square_wave_distance".into(), F(dist).to_string()),
    ]);
    let mut coeffs = Csv::new(ctx.out, "drive_coefficients.csv", &header, &["n", "harmonic", "a_n"]);
    for (j, a) in sol.coeffs.iter().enumerate() {
        coeffs.row(&[&j, &(2 * j + 1), &F(*a)]);
    }
    let env = sol.envelope(1.0);
    let norm = env.mean_photons().sqrt();
    let mut wave = Csv::new(
        ctx.out,
        "drive_waveform.csv",
        &header,
        &["t", "re_alpha", "im_alpha", "abs_alpha_sq", "normalized", "square"],
    );
    for k in 0..samples {
        let t = 2.0 * PI * k as f64 / samples as f64;
        let a = env.at(t);
        wave.row(&[
            &F(t),
            &F(a.re),
            &F(a.im),
            &F(a.norm_sqr()),
            &F(a.re / norm),
            &F(t.cos().signum()),
        ]);
    }
    ctx.say(format!(
        "{} coefficients for {n} added tones, RMS distance to square wave {dist:.4e}",
        sol.coeffs.len()
    ));
    ctx.wrote(coeffs.write()?);
    ctx.wrote(wave.write()?);
    Ok(())
}

pub fn energy_spectrum_cmd(ctx: &Ctx) -> Result<(), CliError> {
    let env = envelope(ctx.cfg, None)?;
    ctx.cfg.finish(ctx.scenario)?;
    let spec = energy_spectrum(&env)?;
    let mut csv = Csv::new(
        ctx.out,
        "spectrum.csv",
        &ctx.header(vec![]),
        &["n", "amplitude", "phase", "relative"],
    );
    csv.row(&[&0, &F(spec.dc), &F(0.0), &F(1.0)]);
    for h in &spec.harmonics {
        csv.row(&[&h.n, &F(h.amplitude), &F(h.phase), &F(h.amplitude / spec.dc)]);
    }
    ctx.say(format!(
        "dc = {:.6e} photons, {} harmonics",
        spec.dc,
        spec.harmonics.len()
    ));
    for h in spec.harmonics.iter().take(8) {
        ctx.say(format!("  A_{} = {:.6e}  phase {:+.6}", h.n, h.amplitude, h.phase));
    }
    ctx.wrote(csv.write()?);
    Ok(())
}

/// Each listed `(nu, eps, mod_phase)` is its own case; with `drive` and
/// `chi` the whole energy spectrum forms one case.
pub fn stability(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let mut cases: Vec<(String, FrequencyModulation)> = Vec::new();
    if cfg.raw("drive").is_some() {
        let env = envelope(cfg, None)?;
        let chi = cfg.require_f64("chi")?;
        cases.push(("drive".into(), energy_to_modulation(&energy_spectrum(&env)?, chi)?));
    } else {
        let nu = cfg.require_list("nu")?;
        let eps = cfg.require_list("eps")?;
        let phase = cfg.list("mod_phase")?.unwrap_or_else(|| vec![0.0; nu.len()]);
        if eps.len() != nu.len() || phase.len() != nu.len() {
            return Err(CliError::Config(
                "keys `nu`, `eps` and `mod_phase` must have equal lengths".into(),
            ));
        }
        for (i, ((&nu, &eps), &phi)) in nu.iter().zip(&eps).zip(&phase).enumerate() {
            cases.push((format!("term{i}"), FrequencyModulation::single(nu, eps, phi)?));
        }
    }
    let q = quality(cfg)?;
    cfg.finish(ctx.scenario)?;
    let mut csv = Csv::new(
        ctx.out,
        "stability.csv",
        &ctx.header(vec![]),
        &[
            "case",
            "nu",
            "eps",
            "mod_phase",
            "q",
            "max_magnitude",
            "growth_rate",
            "stable",
        ],
    );
    for (label, fm) in &cases {
        let r = floquet_monodromy(fm, q)?;
        for t in &fm.terms {
            csv.row(&[
                label,
                &F(t.nu),
                &F(t.eps),
                &F(t.phi),
                &F(q),
                &F(r.max_magnitude),
                &F(r.growth_rate),
                &r.stable,
            ]);
        }
        ctx.say(format!(
            "{label}: {} (max |multiplier| = {:.8}, growth rate {:.3e}, Liouville error {:.1e})",
            if r.stable { "stable" } else { "UNSTABLE" },
            r.max_magnitude,
            r.growth_rate,
            r.liouville_error
        ));
    }
    ctx.wrote(csv.write()?);
    Ok(())
}

pub fn threshold_scan(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let nus = cfg.require_list("nu")?;
    let qs = match cfg.list("q")? {
        Some(q) => q,
        None => vec![quality(cfg)?],
    };
    cfg.finish(ctx.scenario)?;
    let cases: Vec<(f64, f64)> = nus.iter().flat_map(|&nu| qs.iter().map(move |&q| (nu, q))).collect();
    let results = threshold_grid(&cases);
    let mut csv = Csv::new(
        ctx.out,
        "threshold.csv",
        &ctx.header(vec![]),
        &["nu", "q", "eps_critical", "eps_times_q"],
    );
    for (&(nu, q), r) in cases.iter().zip(results) {
        match r? {
            Threshold::Critical(e) => {
                ctx.say(format!("nu = {nu}, Q = {q}: eps* = {e:.6e} (eps* Q = {:.4})", e * q));
                csv.row(&[&F(nu), &F(q), &F(e), &F(e * q)]);
            }
            Threshold::StableThroughout => {
                ctx.say(format!("nu = {nu}, Q = {q}: stable up to eps = 1"));
                csv.row(&[&F(nu), &F(q), &"none", &"none"]);
            }
        }
    }
    ctx.wrote(csv.write()?);
    Ok(())
}

pub fn instability_demo_cmd(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let q = quality(cfg)?;
    let mu = cfg.f64_or("mu", 0.5)?;
    let phi = cfg.f64_or("phi", PI)?;
    let chi = cfg.f64_or("chi", 2.0 / q)?;
    cfg.finish(ctx.scenario)?;
    let d = instability_demo(mu, phi, chi, q)?;
    let mut csv = Csv::new(
        ctx.out,
        "instability.csv",
        &ctx.header(vec![("q".into(), F(q).to_string()), ("chi".into(), F(chi).to_string())]),
        &["drive", "eps_2", "eps_4", "max_magnitude", "growth_rate", "stable"],
    );
    for case in [&d.two_tone, &d.three_tone] {
        let eps = |nu: f64| case.modulation.terms.iter().find(|t| t.nu == nu).map_or(0.0, |t| t.eps);
        let r = &case.report;
        csv.row(&[
            &case.label,
            &F(eps(2.0)),
            &F(eps(4.0)),
            &F(r.max_magnitude),
            &F(r.growth_rate),
            &r.stable,
        ]);
        ctx.say(format!(
            "{}: {} (eps(2) = {:.3e}, eps(4) = {:.3e}, max |multiplier| = {:.8})",
            case.label,
            if r.stable { "stable" } else { "UNSTABLE" },
            eps(2.0),
            eps(4.0),
            r.max_magnitude
        ));
    }
    ctx.wrote(csv.write()?);
    Ok(())
}

pub fn filter(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let ph = physics(cfg)?;
    let alpha1 = ph.envelope.get(1).map_or(0.0, |a| a.norm());
    let s = measurement_strength(ph.g, alpha1, ph.eta, ph.kappa)?;
    let p = FilterParams::from_strength(ph.gamma, ph.n_bar, &s)?;
    let dt = cfg.f64_or("dt", max_step(&p))?;
    let duration = cfg.require_f64("duration")?;
    let trajectories = cfg.usize_or("trajectories", 1)?;
    let record_every = cfg.usize_or("record_every", 1)?.max(1);
    cfg.finish(ctx.scenario)?;
    let run = FilterRun {
        duration,
        dt,
        seed: ctx.seed,
        record_every,
    };
    let trajs = simulate_ensemble(&p, &run, GaussianState::thermal(ph.n_bar), trajectories)?;
    let ss = steady_state(p.gamma, p.n_bar, p.k, p.big_k)?;
    let header = ctx.header(vec![
        ("k".into(), F(p.k).to_string()),
        ("big_k".into(), F(p.big_k).to_string()),
        ("dt".into(), F(dt).to_string()),
    ]);
    let mut csv = Csv::new(
        ctx.out,
        "filter.csv",
        &header,
        &["trajectory", "t", "mean_x", "mean_y", "v_x", "v_y", "c", "current"],
    );
    for (i, t) in trajs.iter().enumerate() {
        for s in &t.samples {
            let st = &s.state;
            csv.row(&[
                &i,
                &F(s.t),
                &F(st.mean_x),
                &F(st.mean_y),
                &F(st.v_x),
                &F(st.v_y),
                &F(st.c),
                &F(s.current),
            ]);
        }
    }
    let fin = trajs.first().map(|t| t.final_state().v_x);
    ctx.say(format!(
        "k = {:.4e}, K = {:.4e}, gA/kappa = {:.4}",
        p.k, p.big_k, s.coupling_ratio
    ));
    ctx.say(format!(
        "V_X final = {}, closed form = {:.6}",
        fin.map_or("n/a".into(), |v| format!("{v:.6}")),
        ss.v_x
    ));
    if let Variance::Unbounded = ss.v_y {
        ctx.say("V_Y grows without bound (no damping)");
    }
    ctx.wrote(csv.write()?);
    Ok(())
}

fn scheme(cfg: &RunConfig) -> Result<Scheme, CliError> {
    match cfg.raw("scheme") {
        None | Some("kraus") => Ok(Scheme::Kraus),
        Some("euler-maruyama") => Ok(Scheme::EulerMaruyama),
        Some(s) => Err(CliError::Config(format!(
            "key `scheme`: expected kraus or euler-maruyama, got {s:?}"
        ))),
    }
}

fn adiabatic_config(cfg: &RunConfig, seed: u64) -> Result<AdiabaticConfig, CliError> {
    let ph = physics(cfg)?;
    let alpha1 = ph.envelope.get(1).map_or(0.0, |a| a.norm());
    let duration = cfg.require_f64("duration")?;
    Ok(AdiabaticConfig {
        params: SmeParams {
            kappa: ph.kappa,
            gamma: ph.gamma,
            n_bar: ph.n_bar,
            eta: ph.eta,
        },
        g: ph.g,
        dt: cfg.f64_or("dt", default_dt(ph.kappa, 2.0 * ph.g * alpha1))?,
        duration,
        transient: cfg.f64_or("transient", duration / 3.0)?,
        seed,
        trajectories: cfg.usize_or("trajectories", 16)?,
        n_c: cfg.usize_or("n_c", 4)?,
        n_m: cfg.usize_or("n_m", 16)?,
        record_every: cfg.usize_or("record_every", 20)?.max(1),
        scheme: scheme(cfg)?,
        envelope: ph.envelope,
    })
}

pub fn sme(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let ph = physics(cfg)?;
    let src = match cfg.raw("hamiltonian").unwrap_or("full") {
        "full" => HamiltonianSource::Primed {
            envelope: ph.envelope.clone(),
            g: ph.g,
            include_quadratic: false,
        },
        "rwa" => HamiltonianSource::Rwa {
            reduction: rwa_reduce(&ph.envelope)?,
            g: ph.g,
        },
        s => {
            return Err(CliError::Config(format!(
                "key `hamiltonian`: expected full or rwa, got {s:?}"
            )))
        }
    };
    let params = SmeParams {
        kappa: ph.kappa,
        gamma: ph.gamma,
        n_bar: ph.n_bar,
        eta: ph.eta,
    };
    let dt = cfg.f64_or("dt", default_dt(ph.kappa, src.coupling_bound()))?;
    let mut run = SmeRun::new(params, src, dt, cfg.require_f64("duration")?, ctx.seed);
    run.n_c = cfg.usize_or("n_c", run.n_c)?;
    run.n_m = cfg.usize_or("n_m", run.n_m)?;
    run.phi = cfg.f64_or("lo_phase", FRAC_PI_2)?;
    run.lo_strength = cfg.f64_or("lo_strength", run.lo_strength)?;
    run.theta = cfg.f64_or("theta", run.theta)?;
    run.record_every = cfg.usize_or("record_every", 20)?.max(1);
    run.scheme = scheme(cfg)?;
    let n = cfg.usize_or("trajectories", 1)?;
    cfg.finish(ctx.scenario)?;

    let trajs = run_ensemble(&run, n)?;
    let avg = EnsembleAverage::new(&trajs)?;
    let escalations: usize = trajs.iter().map(|t| t.escalations).sum();
    let header = ctx.header(vec![
        ("trajectories".into(), n.to_string()),
        ("dt".into(), F(dt).to_string()),
        ("escalations".into(), escalations.to_string()),
    ]);
    let mut csv = Csv::new(ctx.out, "sme.csv", &header, &["t", "v_x", "v_y", "cavity_pop"]);
    for i in 0..avg.times.len() {
        csv.row(&[&F(avg.times[i]), &F(avg.v_x[i]), &F(avg.v_y[i]), &F(avg.cavity_pop[i])]);
    }
    let h = &avg.hygiene;
    ctx.say(format!(
        "{} steps: max trace error {:.2e}, max Hermiticity error {:.2e}, min eigenvalue {:.2e}, top Fock {:.2e}/{:.2e}",
        h.steps, h.max_trace_err, h.max_herm_err, h.min_eigenvalue, h.max_top_cavity, h.max_top_mech
    ));
    if escalations > 0 {
        ctx.say(format!("truncation escalated {escalations} time(s)"));
    }
    ctx.wrote(csv.write()?);
    Ok(())
}

pub fn compare(ctx: &Ctx) -> Result<(), CliError> {
    let ac = adiabatic_config(ctx.cfg, ctx.seed)?;
    ctx.cfg.finish(ctx.scenario)?;
    let r = adiabatic_check(&ac)?;
    let header = ctx.header(vec![
        ("epsilon".into(), F(r.epsilon).to_string()),
        ("mean_rel_diff".into(), F(r.mean_rel_diff).to_string()),
    ]);
    let mut csv = Csv::new(
        ctx.out,
        "compare.csv",
        &header,
        &["t", "v_x_sme", "v_x_filter", "cavity_pop"],
    );
    for i in 0..r.times.len() {
        csv.row(&[
            &F(r.times[i]),
            &F(r.v_x_sme[i]),
            &F(r.v_x_filter[i]),
            &F(r.cavity_pop[i]),
        ]);
    }
    ctx.say(format!("epsilon = {:.4}, K = {:.4e}", r.epsilon, r.filter.big_k));
    ctx.say(format!(
        "mean |V_X(SME) - V_X(filter)| / V_X(filter) = {:.4}",
        r.mean_rel_diff
    ));
    ctx.say(format!(
        "max cavity excitation {:.4e} (bound {:.4e})",
        r.max_cavity_pop, r.cavity_bound
    ));
    ctx.wrote(csv.write()?);
    Ok(())
}

pub fn phase_demo(ctx: &Ctx) -> Result<(), CliError> {
    let ac = adiabatic_config(ctx.cfg, ctx.seed)?;
    ctx.cfg.finish(ctx.scenario)?;
    let r = phase_dependence_demo(&ac)?;
    let header = ctx.header(vec![("min_gap".into(), F(r.min_gap).to_string())]);
    let mut csv = Csv::new(ctx.out, "phase.csv", &header, &["t", "v_x_amplitude", "v_x_phase"]);
    for i in 0..r.times.len() {
        csv.row(&[&F(r.times[i]), &F(r.v_x_amplitude[i]), &F(r.v_x_phase[i])]);
    }
    ctx.say(format!(
        "V_X(phi = 0) > V_X(phi = pi/2) after transient: {} (min gap {:.4e})",
        r.ordered(),
        r.min_gap
    ));
    ctx.wrote(csv.write()?);
    Ok(())
}

fn tolerances(cfg: &RunConfig) -> Result<Tolerances, CliError> {
    let mut t = Tolerances::default();
    for (key, slot) in [
        ("tolerance.cancellation", &mut t.cancellation),
        ("tolerance.perturbation_abs", &mut t.perturbation_abs),
        ("tolerance.multitone_rel", &mut t.multitone_rel),
        ("tolerance.multitone_ratio", &mut t.multitone_ratio),
        ("tolerance.threshold_rel", &mut t.threshold_rel),
        ("tolerance.steady_state_rel", &mut t.steady_state_rel),
        ("tolerance.riccati_abs", &mut t.riccati_abs),
        ("tolerance.adiabatic_rel", &mut t.adiabatic_rel),
        ("tolerance.cavity_factor", &mut t.cavity_factor),
    ] {
        if let Some(v) = cfg.f64(key)? {
            *slot = v;
        }
    }
    Ok(t)
}

/// Runs the acceptance criteria. Returns whether all selected ones passed.
pub fn reproduce(ctx: &Ctx, only: &[u8]) -> Result<bool, CliError> {
    let tol = tolerances(ctx.cfg)?;
    ctx.cfg.finish(ctx.scenario)?;
    if let Some(bad) = only.iter().find(|i| !(1..=10).contains(*i)) {
        return Err(CliError::Config(format!("--only: no criterion {bad}")));
    }
    let want = |i: u8| only.is_empty() || only.contains(&i);
    let mut evidence = Vec::new();
    let mut out: Vec<Outcome> = Vec::new();
    let mut emit = |o: Outcome| {
        ctx.say(o.to_string());
        out.push(o);
    };
    type Criterion = fn(&Tolerances) -> Outcome;
    let simple: [(u8, Criterion); 7] = [
        (1, acceptance::criterion_1),
        (2, acceptance::criterion_2),
        (3, acceptance::criterion_3),
        (4, acceptance::criterion_4),
        (5, acceptance::criterion_5),
        (6, acceptance::criterion_6),
        (7, acceptance::criterion_7),
    ];
    for (i, f) in simple {
        if want(i) {
            emit(f(&tol));
        }
    }
    // criterion 10 audits the runs of 8 and 9
    if want(8) || want(10) {
        let o = acceptance::criterion_8(&tol, &mut evidence);
        if want(8) {
            emit(o);
        }
    }
    if want(9) || want(10) {
        let o = acceptance::criterion_9(&tol, &mut evidence);
        if want(9) {
            emit(o);
        }
    }
    if want(10) {
        emit(acceptance::criterion_10(&tol, &evidence));
    }

    let mut csv = Csv::new(
        ctx.out,
        "acceptance.csv",
        &ctx.header(vec![]),
        &["criterion", "name", "result", "detail"],
    );
    for o in &out {
        let detail = format!("\"{}\"", o.detail.replace('"', "\"\""));
        csv.row(&[&o.id, &o.name, &if o.passed { "PASS" } else { "FAIL" }, &detail]);
    }
    let passed = out.iter().filter(|o| o.passed).count();
    ctx.say(format!("{passed}/{} criteria passed", out.len()));
    ctx.wrote(csv.write()?);
    Ok(passed == out.len())
}

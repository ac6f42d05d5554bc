//! Trajectories, ensembles and the cross-checks against the reduced filter.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::drive::EnvelopeSeries;
use crate::error::{domain, Error, Result};
use crate::filter::{self, FilterParams, FilterRun, GaussianState};
use crate::rng::{trajectory_seed, WienerSource};

use super::operators::{build_operators, HamiltonianSource};
use super::rwa_reduce;
use super::state::{conditional_variance, QuantumState};
use super::step::{homodyne_current_from_mean, HygieneLimits, HygieneStats, Scheme, SmeParams, Stepper};

/// Largest admissible `dt · max(κ, Ω_m, gA)`.
pub const STEP_BOUND: f64 = 0.05;

/// Leakage retries before giving up.
const MAX_ESCALATIONS: usize = 3;

/// Everything needed to integrate one conditional trajectory.
#[derive(Debug, Clone)]
pub struct SmeRun {
    pub n_c: usize,
    pub n_m: usize,
    pub params: SmeParams,
    pub hamiltonian: HamiltonianSource,
    /// Local oscillator phase.
    pub phi: f64,
    /// Angle of the quadrature reported as `V_X`.
    pub theta: f64,
    /// Net local oscillator strength `B`; scales the photocurrent only.
    pub lo_strength: f64,
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    pub record_every: usize,
    pub scheme: Scheme,
    pub limits: HygieneLimits,
    /// Starting state; cavity vacuum times thermal mechanics when absent.
    pub initial: Option<QuantumState>,
    /// Enlarge the truncation and restart after a leakage error.
    pub auto_escalate: bool,
}

impl SmeRun {
    /// Defaults: `N_c = 4`, `N_m = 16`, `φ = π/2`, `θ = 0`, `B = 1`.
    pub fn new(params: SmeParams, hamiltonian: HamiltonianSource, dt: f64, duration: f64, seed: u64) -> Self {
        Self {
            n_c: 4,
            n_m: 16,
            params,
            hamiltonian,
            phi: FRAC_PI_2,
            theta: 0.0,
            lo_strength: 1.0,
            dt,
            duration,
            seed,
            record_every: 1,
            scheme: Scheme::default(),
            limits: HygieneLimits::default(),
            initial: None,
            auto_escalate: true,
        }
    }

    fn check(&self) -> Result<usize> {
        let p = &self.params;
        if !(p.kappa > 0.0 && p.gamma >= 0.0 && p.n_bar >= 0.0 && (0.0..=1.0).contains(&p.eta)) {
            return domain(format!("invalid SME rates {p:?}"));
        }
        if !(self.lo_strength > 0.0) {
            return domain(format!(
                "local oscillator strength must be positive, got {}",
                self.lo_strength
            ));
        }
        let rate = p.kappa.max(1.0).max(self.hamiltonian.coupling_bound());
        if self.dt * rate > STEP_BOUND * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt = {} violates dt * max(kappa, Omega_m, gA) <= {STEP_BOUND} (rate {rate})",
                self.dt
            )));
        }
        filter::step_count(self.duration, self.dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmeSample {
    pub t: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub mean_x: f64,
    /// `1 − ⟨0|ρ_c|0⟩`
    pub cavity_pop: f64,
    /// Largest per-step trace defect since the previous sample.
    pub trace_err: f64,
    /// Photocurrent of the step that ended at `t` (zero at `t = 0`).
    pub current: f64,
}

#[derive(Debug, Clone)]
pub struct SmeTrajectory {
    pub seed: u64,
    /// Truncation actually used, after any escalation.
    pub dims: (usize, usize),
    pub escalations: usize,
    pub samples: Vec<SmeSample>,
    pub hygiene: HygieneStats,
    pub final_state: QuantumState,
}

fn sample(state: &QuantumState, theta: f64, t: f64, trace_err: f64, current: f64) -> SmeSample {
    SmeSample {
        t,
        v_x: conditional_variance(state, theta),
        v_y: conditional_variance(state, theta + FRAC_PI_2),
        mean_x: state.quadrature_mean(theta),
        cavity_pop: state.cavity_excitation(),
        trace_err,
        current,
    }
}

fn integrate(run: &SmeRun, n_c: usize, n_m: usize, steps: usize, escalations: usize) -> Result<SmeTrajectory> {
    let ops = build_operators(n_c, n_m)?;
    let mut state = match &run.initial {
        Some(s) => s.clone(),
        None => QuantumState::vacuum_thermal(n_c, n_m, run.params.n_bar)?,
    };
    if state.dims() != (n_c, n_m) {
        return Err(Error::Config(format!(
            "initial state dims {:?} differ from truncation ({n_c}, {n_m})",
            state.dims()
        )));
    }
    let p = run.params;
    let dt = run.dt;
    let every = run.record_every.max(1);
    let mut stepper = Stepper::new(&ops, p, run.phi, run.scheme, run.limits);
    let mut noise = WienerSource::new(run.seed);
    let mut hygiene = HygieneStats::default();
    let mut samples = Vec::with_capacity(steps / every + 2);
    samples.push(sample(&state, run.theta, 0.0, 0.0, 0.0));
    hygiene.min_eigenvalue = state.min_eigenvalue();
    let mut window_trace = 0.0f64;
    for i in 1..=steps {
        let t0 = (i - 1) as f64 * dt;
        let dw = noise.increment(dt);
        let diag = stepper.step(&mut state, &run.hamiltonian, t0, dt, dw)?;
        hygiene.record(&diag);
        window_trace = window_trace.max(diag.trace_err);
        if i % every == 0 || i == steps {
            let current = homodyne_current_from_mean(diag.homodyne_mean, run.lo_strength, p.eta, p.kappa, dt, dw);
            samples.push(sample(&state, run.theta, i as f64 * dt, window_trace, current));
            hygiene.min_eigenvalue = hygiene.min_eigenvalue.min(state.min_eigenvalue());
            window_trace = 0.0;
        }
    }
    hygiene.positivity_checks = stepper.positivity_checks();
    Ok(SmeTrajectory {
        seed: run.seed,
        dims: (n_c, n_m),
        escalations,
        samples,
        hygiene,
        final_state: state,
    })
}

/// Integrate one trajectory with seed `run.seed`, escalating the truncation
/// on leakage when allowed.
pub fn run_trajectory(run: &SmeRun) -> Result<SmeTrajectory> {
    let steps = run.check()?;
    let (mut n_c, mut n_m) = (run.n_c, run.n_m);
    let mut escalations = 0;
    loop {
        match integrate(run, n_c, n_m, steps, escalations) {
            Err(Error::Leakage {
                t,
                subsystem,
                population,
            }) if run.auto_escalate && run.initial.is_none() && escalations < MAX_ESCALATIONS => {
                if subsystem == "cavity" {
                    n_c += 2;
                } else {
                    n_m += 8;
                }
                escalations += 1;
                log::warn!(
                    "{subsystem} top level population {population:.2e} at t = {t:.2}; restarting with N_c = {n_c}, N_m = {n_m}"
                );
            }
            other => return other,
        }
    }
}

/// `n` trajectories seeded by `trajectory_seed(run.seed, i)`, in parallel.
pub fn run_ensemble(run: &SmeRun, n: usize) -> Result<Vec<SmeTrajectory>> {
    if n == 0 {
        return domain("ensemble needs at least one trajectory");
    }
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = run.clone();
            r.seed = trajectory_seed(run.seed, i);
            run_trajectory(&r)
        })
        .collect()
}

/// Sample-wise ensemble means.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAverage {
    pub times: Vec<f64>,
    pub v_x: Vec<f64>,
    pub v_y: Vec<f64>,
    pub cavity_pop: Vec<f64>,
    pub hygiene: HygieneStats,
    pub trajectories: usize,
}

impl EnsembleAverage {
    pub fn new(trajs: &[SmeTrajectory]) -> Result<Self> {
        let Some(first) = trajs.first() else {
            return domain("empty ensemble");
        };
        let len = first.samples.len();
        if trajs.iter().any(|t| t.samples.len() != len) {
            return domain("trajectories have different sample grids");
        }
        let n = trajs.len() as f64;
        let mean = |f: fn(&SmeSample) -> f64| -> Vec<f64> {
            (0..len)
                .map(|i| trajs.iter().map(|t| f(&t.samples[i])).sum::<f64>() / n)
                .collect()
        };
        let mut hygiene = HygieneStats::default();
        for t in trajs {
            hygiene.merge(&t.hygiene);
        }
        Ok(Self {
            times: first.samples.iter().map(|s| s.t).collect(),
            v_x: mean(|s| s.v_x),
            v_y: mean(|s| s.v_y),
            cavity_pop: mean(|s| s.cavity_pop),
            hygiene,
            trajectories: trajs.len(),
        })
    }

    /// Average of the final conditional states, if all share one truncation.
    pub fn mean_final_state(trajs: &[SmeTrajectory]) -> Option<QuantumState> {
        let dims = trajs.first()?.dims;
        if trajs.iter().any(|t| t.dims != dims) {
            return None;
        }
        QuantumState::average(trajs.iter().map(|t| &t.final_state))
    }
}

/// Shared setup of the full-versus-reduced comparisons.
#[derive(Debug, Clone)]
pub struct AdiabaticConfig {
    pub params: SmeParams,
    pub envelope: EnvelopeSeries,
    pub g: f64,
    pub duration: f64,
    pub dt: f64,
    /// Checkpoints before this time are ignored.
    pub transient: f64,
    pub seed: u64,
    pub trajectories: usize,
    pub n_c: usize,
    pub n_m: usize,
    pub record_every: usize,
    pub scheme: Scheme,
}

impl AdiabaticConfig {
    fn sme_run(&self, phi: f64, theta: f64) -> SmeRun {
        let src = HamiltonianSource::Primed {
            envelope: self.envelope.clone(),
            g: self.g,
            include_quadratic: false,
        };
        let mut r = SmeRun::new(self.params, src, self.dt, self.duration, self.seed);
        r.n_c = self.n_c;
        r.n_m = self.n_m;
        r.phi = phi;
        r.theta = theta;
        r.record_every = self.record_every;
        r.scheme = self.scheme;
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticReport {
    /// `gA/κ`
    pub epsilon: f64,
    pub filter: FilterParams,
    pub times: Vec<f64>,
    pub v_x_sme: Vec<f64>,
    pub v_x_filter: Vec<f64>,
    pub cavity_pop: Vec<f64>,
    /// Mean of `|V_X(SME) − V_X(filter)| / V_X(filter)` after the transient.
    pub mean_rel_diff: f64,
    /// Largest ensemble-mean cavity excitation after the transient.
    pub max_cavity_pop: f64,
    /// `10ε²`
    pub cavity_bound: f64,
    pub hygiene: HygieneStats,
}

impl AdiabaticReport {
    pub fn variance_agrees(&self, tol: f64) -> bool {
        self.mean_rel_diff <= tol
    }

    pub fn cavity_within_bound(&self) -> bool {
        self.max_cavity_pop <= self.cavity_bound
    }
}

fn post_transient(times: &[f64], transient: f64) -> Vec<usize> {
    times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= transient - 1e-9)
        .map(|(i, _)| i)
        .collect()
}

/// Full SME ensemble at `φ = π/2` against the reduced Gaussian filter on
/// matched rates `k = 4g²A²/κ`, `K = 8ηk`.
pub fn adiabatic_check(cfg: &AdiabaticConfig) -> Result<AdiabaticReport> {
    let red = rwa_reduce(&cfg.envelope)?;
    if !red.is_balanced(1e-9) {
        return domain(format!("sidebands are not balanced (imbalance {:.3e})", red.imbalance));
    }
    let p = cfg.params;
    let epsilon = cfg.g * red.amplitude / p.kappa;
    if epsilon > 0.1 {
        return domain(format!("gA/kappa = {epsilon} exceeds 0.1"));
    }
    if cfg.transient >= cfg.duration {
        return domain("transient must end before the run does");
    }
    let fp = if cfg.g == 0.0 {
        FilterParams::new(p.gamma, p.n_bar, 0.0, 0.0)?
    } else {
        let s = filter::measurement_strength(cfg.g, red.amplitude, p.eta, p.kappa)?;
        FilterParams::from_strength(p.gamma, p.n_bar, &s)?
    };

    let trajs = run_ensemble(&cfg.sme_run(FRAC_PI_2, red.theta), cfg.trajectories)?;
    let avg = EnsembleAverage::new(&trajs)?;

    // filter on a grid that nests inside the SME one
    let sub = (cfg.dt / filter::max_step(&fp)).ceil().max(1.0) as usize;
    let frun = FilterRun {
        duration: cfg.duration,
        dt: cfg.dt / sub as f64,
        seed: cfg.seed,
        record_every: cfg.record_every.max(1) * sub,
    };
    let ftraj = filter::simulate_conditional(&fp, &frun, GaussianState::thermal(p.n_bar))?;
    if ftraj.samples.len() != avg.times.len() {
        return Err(Error::Numeric("filter and SME sample grids differ".into()));
    }
    let v_x_filter: Vec<f64> = ftraj.samples.iter().map(|s| s.state.v_x).collect();

    let idx = post_transient(&avg.times, cfg.transient);
    let mean_rel_diff = idx
        .iter()
        .map(|&i| (avg.v_x[i] - v_x_filter[i]).abs() / v_x_filter[i])
        .sum::<f64>()
        / idx.len() as f64;
    let max_cavity_pop = idx.iter().map(|&i| avg.cavity_pop[i]).fold(0.0, f64::max);
    Ok(AdiabaticReport {
        epsilon,
        filter: fp,
        times: avg.times,
        v_x_sme: avg.v_x,
        v_x_filter,
        cavity_pop: avg.cavity_pop,
        mean_rel_diff,
        max_cavity_pop,
        cavity_bound: 10.0 * epsilon * epsilon,
        hygiene: avg.hygiene,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseReport {
    pub times: Vec<f64>,
    /// Ensemble-mean `V_X` with the amplitude quadrature detected (`φ = 0`).
    pub v_x_amplitude: Vec<f64>,
    /// Ensemble-mean `V_X` with the phase quadrature detected (`φ = π/2`).
    pub v_x_phase: Vec<f64>,
    pub transient: f64,
    /// Smallest `V_X(0) − V_X(π/2)` after the transient.
    pub min_gap: f64,
    pub hygiene: HygieneStats,
}

impl PhaseReport {
    pub fn ordered(&self) -> bool {
        self.min_gap >= 0.0
    }

    /// Largest `|V_X(0) − V_X(π/2)|` over all checkpoints.
    pub fn max_abs_diff(&self) -> f64 {
        self.v_x_amplitude
            .iter()
            .zip(&self.v_x_phase)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Same seeds, local oscillator at `φ = 0` and `φ = π/2`.
pub fn phase_dependence_demo(cfg: &AdiabaticConfig) -> Result<PhaseReport> {
    let theta = rwa_reduce(&cfg.envelope)?.theta;
    let a = EnsembleAverage::new(&run_ensemble(&cfg.sme_run(0.0, theta), cfg.trajectories)?)?;
    let b = EnsembleAverage::new(&run_ensemble(&cfg.sme_run(FRAC_PI_2, theta), cfg.trajectories)?)?;
    let idx = post_transient(&a.times, cfg.transient);
    let min_gap = idx.iter().map(|&i| a.v_x[i] - b.v_x[i]).fold(f64::INFINITY, f64::min);
    let mut hygiene = a.hygiene;
    hygiene.merge(&b.hygiene);
    Ok(PhaseReport {
        times: a.times,
        v_x_amplitude: a.v_x,
        v_x_phase: b.v_x,
        transient: cfg.transient,
        min_gap,
        hygiene,
    })
}

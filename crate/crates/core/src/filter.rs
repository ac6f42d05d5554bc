//! Reduced Gaussian description of the continuously measured mechanics.
//!
//! After eliminating the cavity, the conditional state of the mechanics is
//! Gaussian and is described by the means of the quadratures `X` (measured)
//! and `Y`, their variances and the symmetrized covariance. The variances
//! follow deterministic Riccati equations; only the means feel the
//! measurement noise.
//!
//! Units are dimensionless (`Ω_m = 1`), the vacuum variance is `1/2`.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::ode::rk4_step;
use crate::rng::{trajectory_seed, WienerSource};

/// Tolerance of the `V_X V_Y − C² ≥ 1/4` monitor.
pub const HEISENBERG_TOL: f64 = 1e-6;

/// Weak-coupling parameter `gA/κ` above which the cavity elimination is
/// suspect.
pub const WEAK_COUPLING_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub mean_x: f64,
    pub mean_y: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub c: f64,
}

impl GaussianState {
    /// Centered thermal state with `V_X = V_Y = n̄ + 1/2`.
    pub fn thermal(n_bar: f64) -> Self {
        Self {
            mean_x: 0.0,
            mean_y: 0.0,
            v_x: n_bar + 0.5,
            v_y: n_bar + 0.5,
            c: 0.0,
        }
    }

    pub fn uncertainty_product(&self) -> f64 {
        self.v_x * self.v_y - self.c * self.c
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.v_x > 0.0 && self.v_y > 0.0 && self.uncertainty_product() >= 0.25 - tol
    }
}

/// Measurement rates `k = 4g²A²/κ` and `K = 8ηk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementStrength {
    pub k: f64,
    pub big_k: f64,
    /// `gA/κ`, the small parameter of the cavity elimination.
    pub coupling_ratio: f64,
}

impl MeasurementStrength {
    pub fn weak_coupling_violated(&self) -> bool {
        self.coupling_ratio >= WEAK_COUPLING_LIMIT
    }

    pub fn eta(&self) -> f64 {
        if self.k == 0.0 {
            0.0
        } else {
            self.big_k / (8.0 * self.k)
        }
    }
}

pub fn measurement_strength(g: f64, amplitude: f64, eta: f64, kappa: f64) -> Result<MeasurementStrength> {
    if !(g > 0.0 && amplitude > 0.0 && kappa > 0.0) {
        return domain(format!(
            "g, A and kappa must be positive (g = {g}, A = {amplitude}, kappa = {kappa})"
        ));
    }
    if !(0.0..=1.0).contains(&eta) {
        return domain(format!("eta must lie in [0, 1], got {eta}"));
    }
    let k = 4.0 * g * g * amplitude * amplitude / kappa;
    let s = MeasurementStrength {
        k,
        big_k: 8.0 * eta * k,
        coupling_ratio: g * amplitude / kappa,
    };
    if s.weak_coupling_violated() {
        log::warn!(
            "gA/kappa = {:.3} >= {WEAK_COUPLING_LIMIT}: adiabatic elimination of the cavity may be inaccurate",
            s.coupling_ratio
        );
    }
    Ok(s)
}

/// Rates entering the reduced moment equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub gamma: f64,
    pub n_bar: f64,
    pub k: f64,
    pub big_k: f64,
}

impl FilterParams {
    pub fn new(gamma: f64, n_bar: f64, k: f64, big_k: f64) -> Result<Self> {
        let p = Self { gamma, n_bar, k, big_k };
        p.check()?;
        Ok(p)
    }

    pub fn from_strength(gamma: f64, n_bar: f64, s: &MeasurementStrength) -> Result<Self> {
        Self::new(gamma, n_bar, s.k, s.big_k)
    }

    fn check(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.n_bar >= 0.0 && self.k >= 0.0 && self.big_k >= 0.0) {
            return domain(format!("filter rates must be non-negative: {self:?}"));
        }
        if self.big_k > 8.0 * self.k * (1.0 + 1e-12) {
            return domain(format!(
                "scaled strength K = {} exceeds 8k = {}",
                self.big_k,
                8.0 * self.k
            ));
        }
        Ok(())
    }

    /// Rate at which `V_X` approaches its steady value, `2K V_X* + γ`.
    pub fn relaxation_rate(&self) -> f64 {
        let vx = steady_state_vx(self.gamma, self.n_bar, self.big_k);
        2.0 * self.big_k * vx + self.gamma
    }
}

/// Drifts and noise loadings of the conditional moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentDerivatives {
    pub mean_x: f64,
    pub mean_y: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub c: f64,
    /// Coefficients of the white noise `ξ` on `⟨X⟩` and `⟨Y⟩`.
    pub noise_x: f64,
    pub noise_y: f64,
}

pub fn moment_derivatives(s: &GaussianState, p: &FilterParams) -> MomentDerivatives {
    let [v_x, v_y, c] = variance_drift(&[s.v_x, s.v_y, s.c], p);
    let sk = p.big_k.sqrt();
    MomentDerivatives {
        mean_x: -0.5 * p.gamma * s.mean_x,
        mean_y: -0.5 * p.gamma * s.mean_y,
        v_x,
        v_y,
        c,
        noise_x: -sk * s.v_x,
        noise_y: -sk * s.c,
    }
}

fn variance_drift(v: &[f64; 3], p: &FilterParams) -> [f64; 3] {
    let [vx, vy, c] = *v;
    let th = p.n_bar + 0.5;
    [
        -p.big_k * vx * vx - p.gamma * (vx - th),
        -p.big_k * c * c + 2.0 * p.k - p.gamma * (vy - th),
        -p.big_k * vx * c - p.gamma * c,
    ]
}

/// A variance that may diverge when nothing damps the back-action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variance {
    Finite(f64),
    Unbounded,
}

impl Variance {
    pub fn finite(self) -> Option<f64> {
        match self {
            Variance::Finite(v) => Some(v),
            Variance::Unbounded => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub v_x: f64,
    pub v_y: Variance,
    pub c: f64,
}

/// `V_X = √(r(2n̄+1+r)) − r` with `r = γ/2K`, evaluated in a form that stays
/// accurate as `K → 0`.
pub fn steady_state_vx(gamma: f64, n_bar: f64, big_k: f64) -> f64 {
    let th2 = 2.0 * n_bar + 1.0;
    if big_k == 0.0 {
        return n_bar + 0.5;
    }
    if gamma == 0.0 {
        return 0.0;
    }
    let r = gamma / (2.0 * big_k);
    // sqrt(r(th2 + r)) - r == r th2 / (sqrt(r(th2 + r)) + r)
    r * th2 / ((r * (th2 + r)).sqrt() + r)
}

pub fn steady_state(gamma: f64, n_bar: f64, k: f64, big_k: f64) -> Result<SteadyState> {
    if !(gamma >= 0.0 && n_bar >= 0.0 && k >= 0.0 && big_k >= 0.0) {
        return domain("steady state needs non-negative rates");
    }
    if gamma == 0.0 && big_k == 0.0 {
        return domain("steady state needs gamma > 0 or K > 0");
    }
    let v_y = if gamma > 0.0 {
        Variance::Finite(n_bar + 0.5 + 2.0 * k / gamma)
    } else if k > 0.0 {
        Variance::Unbounded
    } else {
        Variance::Finite(n_bar + 0.5)
    };
    Ok(SteadyState {
        v_x: steady_state_vx(gamma, n_bar, big_k),
        v_y,
        c: 0.0,
    })
}

/// Homodyne record of the reduced model, `dy = √K ⟨X⟩ dt + dW_y`, stored as
/// a photocurrent `dy/dt` per step.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
    pub phi: f64,
}

impl MeasurementRecord {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }
}

/// Time grid and output options of a filter run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterRun {
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    /// Keep every n-th state in the trajectory (the record keeps every step).
    pub record_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSample {
    pub t: f64,
    pub state: GaussianState,
    /// Record sample of the step that ended at `t` (zero at `t = 0`).
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterTrajectory {
    pub samples: Vec<FilterSample>,
    pub record: MeasurementRecord,
}

impl FilterTrajectory {
    pub fn final_state(&self) -> GaussianState {
        self.samples.last().expect("trajectory has at least one sample").state
    }
}

/// Largest admissible step `0.01 / max(K, γ, 1)`.
pub fn max_step(p: &FilterParams) -> f64 {
    0.01 / p.big_k.max(p.gamma).max(1.0)
}

pub(crate) fn step_count(duration: f64, dt: f64) -> Result<usize> {
    if !(duration > 0.0 && dt > 0.0) {
        return Err(Error::Config(format!(
            "duration and dt must be positive (duration = {duration}, dt = {dt})"
        )));
    }
    let n = (duration / dt).round();
    if (n * dt - duration).abs() > 1e-9 * duration {
        return Err(Error::Config(format!(
            "duration {duration} is not a whole number of steps dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// Integrate the conditional moment equations along one noise realization.
///
/// The variances are noise-free and advance with RK4; the means take an
/// Euler-Maruyama step driven by a single Wiener stream `dW = ξ dt`. The
/// record noise is the innovation `dW_y = −dW`, which makes
/// `d⟨X⟩ = −(γ/2)⟨X⟩dt + √K V_X (dy − √K⟨X⟩dt)` a Kalman update.
pub fn simulate_conditional(p: &FilterParams, run: &FilterRun, initial: GaussianState) -> Result<FilterTrajectory> {
    p.check()?;
    let bound = max_step(p);
    if run.dt > bound * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "dt = {} exceeds the stability bound {bound:.3e}",
            run.dt
        )));
    }
    let steps = step_count(run.duration, run.dt)?;
    if !initial.is_physical(HEISENBERG_TOL) {
        return domain(format!("initial state violates the uncertainty bound: {initial:?}"));
    }
    let every = run.record_every.max(1);
    let dt = run.dt;
    let sk = p.big_k.sqrt();
    let mut noise = WienerSource::new(run.seed);
    let mut s = initial;
    let mut samples = Vec::with_capacity(steps / every + 2);
    let mut record = Vec::with_capacity(steps);
    samples.push(FilterSample {
        t: 0.0,
        state: s,
        current: 0.0,
    });
    for i in 1..=steps {
        let dw = noise.increment(dt);
        let current = (sk * s.mean_x * dt - dw) / dt;
        let mx = s.mean_x + (-0.5 * p.gamma * s.mean_x) * dt - sk * s.v_x * dw;
        let my = s.mean_y + (-0.5 * p.gamma * s.mean_y) * dt - sk * s.c * dw;
        let [vx, vy, c] = rk4_step(|_, v| variance_drift(v, p), 0.0, &[s.v_x, s.v_y, s.c], dt);
        s = GaussianState {
            mean_x: mx,
            mean_y: my,
            v_x: vx,
            v_y: vy,
            c,
        };
        let t = i as f64 * dt;
        if !s.is_physical(HEISENBERG_TOL) || !mx.is_finite() || !my.is_finite() {
            return Err(Error::Invariant {
                t,
                what: format!(
                    "Gaussian state left the physical region: V_X = {vx}, V_Y = {vy}, C = {c}, V_X V_Y - C^2 = {}",
                    s.uncertainty_product()
                ),
            });
        }
        record.push(current);
        if i % every == 0 || i == steps {
            samples.push(FilterSample { t, state: s, current });
        }
    }
    Ok(FilterTrajectory {
        samples,
        record: MeasurementRecord {
            dt,
            samples: record,
            seed: run.seed,
            phi: std::f64::consts::FRAC_PI_2,
        },
    })
}

/// Independent trajectories seeded by `(master, index)`, run in parallel.
pub fn simulate_ensemble(
    p: &FilterParams,
    run: &FilterRun,
    initial: GaussianState,
    trajectories: usize,
) -> Result<Vec<FilterTrajectory>> {
    (0..trajectories as u64)
        .into_par_iter()
        .map(|i| {
            let r = FilterRun {
                seed: trajectory_seed(run.seed, i),
                ..*run
            };
            simulate_conditional(p, &r, initial)
        })
        .collect()
}

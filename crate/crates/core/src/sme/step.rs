//! One time step of the conditional master equation
//!
//! `dρ = −i[H', ρ]dt + (κ/2)D[a]ρ dt + (γ/2)((n̄+1)D[c] + n̄D[c†])ρ dt
//!       + √(ηκ)(e^{−iφ}aρ + e^{iφ}ρa† − ⟨e^{−iφ}a + e^{iφ}a†⟩ρ) dW`
//!
//! with `D[o]ρ = 2oρo† − o†oρ − ρo†o`, plus the homodyne photocurrent that
//! accompanies each increment.
//!
//! Every product is evaluated as a sparse left multiplication; right
//! products are recovered from adjoints since `ρ` is Hermitian.

use crate::error::{Error, Result};
use crate::C64;

use super::operators::{HamiltonianSource, Operators};
use super::state::QuantumState;

/// Dissipation and detection rates (dimensionless, `Ω_m = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmeParams {
    pub kappa: f64,
    pub gamma: f64,
    pub n_bar: f64,
    pub eta: f64,
}

/// Discretization of the stochastic master equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Plain Euler-Maruyama step followed by trace renormalization. Its
    /// increments are not a positive map, so near-pure states pick up
    /// negative eigenvalues of order 1e-6 within a few mechanical periods.
    EulerMaruyama,
    /// Completely positive first-order map
    /// `ρ' ∝ MρM† + Σ_j L_jρL_j† dt` with
    /// `M = 1 − (iH + ½Σ L†L)dt + √η L dy + (η/2)L²(dy² − dt)`; agrees with
    /// Euler-Maruyama to first order and cannot lose positivity.
    #[default]
    Kraus,
}

/// Tolerances of the per-step state monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HygieneLimits {
    pub trace: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
    pub top_population: f64,
    /// Run the positivity test every n steps (1 = every step).
    pub positivity_every: usize,
}

impl Default for HygieneLimits {
    fn default() -> Self {
        Self {
            trace: 1e-6,
            hermiticity: 1e-10,
            min_eigenvalue: -1e-6,
            top_population: 1e-4,
            positivity_every: 1,
        }
    }
}

/// What the monitor saw in one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    /// Trace defect of the step before renormalization (Euler-Maruyama) or
    /// the residual after it (Kraus, whose raw trace is the record
    /// likelihood).
    pub trace_err: f64,
    pub herm_err: f64,
    pub top_cavity: f64,
    pub top_mech: f64,
    /// `⟨e^{−iφ}a + e^{iφ}a†⟩` before the step.
    pub homodyne_mean: f64,
}

/// Running extremes of the monitor over a trajectory or ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HygieneStats {
    pub steps: usize,
    pub max_trace_err: f64,
    pub max_herm_err: f64,
    /// Smallest eigenvalue seen at recorded checkpoints.
    pub min_eigenvalue: f64,
    /// Number of steps that passed the Cholesky positivity test.
    pub positivity_checks: usize,
    pub max_top_cavity: f64,
    pub max_top_mech: f64,
}

impl Default for HygieneStats {
    fn default() -> Self {
        Self {
            steps: 0,
            max_trace_err: 0.0,
            max_herm_err: 0.0,
            min_eigenvalue: f64::INFINITY,
            positivity_checks: 0,
            max_top_cavity: 0.0,
            max_top_mech: 0.0,
        }
    }
}

impl HygieneStats {
    pub fn record(&mut self, d: &StepDiagnostics) {
        self.steps += 1;
        self.max_trace_err = self.max_trace_err.max(d.trace_err);
        self.max_herm_err = self.max_herm_err.max(d.herm_err);
        self.max_top_cavity = self.max_top_cavity.max(d.top_cavity);
        self.max_top_mech = self.max_top_mech.max(d.top_mech);
    }

    pub fn merge(&mut self, o: &HygieneStats) {
        self.steps += o.steps;
        self.max_trace_err = self.max_trace_err.max(o.max_trace_err);
        self.max_herm_err = self.max_herm_err.max(o.max_herm_err);
        self.min_eigenvalue = self.min_eigenvalue.min(o.min_eigenvalue);
        self.positivity_checks += o.positivity_checks;
        self.max_top_cavity = self.max_top_cavity.max(o.max_top_cavity);
        self.max_top_mech = self.max_top_mech.max(o.max_top_mech);
    }

    pub fn within(&self, l: &HygieneLimits) -> bool {
        self.max_trace_err < l.trace
            && self.max_herm_err < l.hermiticity
            && self.min_eigenvalue >= l.min_eigenvalue
            && self.max_top_cavity < l.top_population
            && self.max_top_mech < l.top_population
    }
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    drift: Vec<C64>,
    tmp: Vec<C64>,
    adj: Vec<C64>,
    next: Vec<C64>,
    chol: Vec<C64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim * dim];
        Self {
            drift: z.clone(),
            tmp: z.clone(),
            adj: z.clone(),
            next: z.clone(),
            chol: z,
        }
    }
}

fn adjoint_into(src: &[C64], dst: &mut [C64], d: usize) {
    for i in 0..d {
        for j in 0..d {
            dst[j * d + i] = src[i * d + j].conj();
        }
    }
}

fn trace(m: &[C64], d: usize) -> C64 {
    (0..d).map(|i| m[i * d + i]).sum()
}

/// Cholesky factorization test of `ρ + shift·1` in `work`; true when
/// positive definite, i.e. every eigenvalue of `ρ` exceeds `−shift`.
fn shifted_cholesky_ok(rho: &[C64], shift: f64, d: usize, work: &mut [C64]) -> bool {
    work.copy_from_slice(rho);
    for i in 0..d {
        work[i * d + i] += shift;
    }
    for j in 0..d {
        let mut diag = work[j * d + j].re;
        for k in 0..j {
            diag -= work[j * d + k].norm_sqr();
        }
        if !(diag > 0.0) {
            return false;
        }
        let ljj = diag.sqrt();
        work[j * d + j] = C64::new(ljj, 0.0);
        for i in j + 1..d {
            let mut s = work[i * d + j];
            for k in 0..j {
                s -= work[i * d + k] * work[j * d + k].conj();
            }
            work[i * d + j] = s / ljj;
        }
    }
    true
}

/// Stateful stepper bundling operators, rates and scratch space.
pub struct Stepper<'a> {
    pub ops: &'a Operators,
    pub params: SmeParams,
    pub phi: f64,
    pub scheme: Scheme,
    pub limits: HygieneLimits,
    ws: Workspace,
    steps: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(ops: &'a Operators, params: SmeParams, phi: f64, scheme: Scheme, limits: HygieneLimits) -> Self {
        Self {
            ops,
            params,
            phi,
            scheme,
            limits,
            ws: Workspace::new(ops.dim()),
            steps: 0,
        }
    }

    /// Advance `state` from `t` to `t + dt` with Wiener increment `dw`. The
    /// Hamiltonian is evaluated at the step midpoint.
    pub fn step(
        &mut self,
        state: &mut QuantumState,
        h: &HamiltonianSource,
        t: f64,
        dt: f64,
        dw: f64,
    ) -> Result<StepDiagnostics> {
        let ops = self.ops;
        let d = ops.dim();
        if state.dims() != (ops.n_c, ops.n_m) {
            return Err(Error::Config("state and operator dimensions differ".into()));
        }
        let hc = h.coeffs(t + 0.5 * dt);
        let p = self.params;
        let e_phi = C64::from_polar(1.0, -self.phi);
        let ws = &mut self.ws;
        let rho = &state.rho;

        // tmp = e^{-iφ} a ρ
        ws.tmp.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        ops.a.apply_left(e_phi, rho, &mut ws.tmp);
        let m = trace(&ws.tmp, d);
        let homodyne_mean = 2.0 * m.re;

        let raw_trace = match self.scheme {
            Scheme::EulerMaruyama => {
                // drift holds G with dρ = G + G† + jumps
                let g = &mut ws.drift;
                g.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                ops.apply_hamiltonian(&hc, C64::new(0.0, -dt), rho, g);
                let s_meas = (p.eta * p.kappa).sqrt() * dw;
                for i in 0..d {
                    let w = -(0.5 * p.kappa * ops.n_a_diag[i]
                        + 0.5 * p.gamma * ((p.n_bar + 1.0) * ops.n_c_diag[i] + p.n_bar * ops.c_cdag_diag[i]))
                        * dt
                        - s_meas * m.re;
                    let row = i * d..(i + 1) * d;
                    for ((gz, &r), &z) in g[row.clone()].iter_mut().zip(&rho[row.clone()]).zip(&ws.tmp[row]) {
                        *gz += w * r + s_meas * z;
                    }
                }
                let next = &mut ws.next;
                for i in 0..d {
                    for j in 0..d {
                        next[i * d + j] = rho[i * d + j] + g[i * d + j] + g[j * d + i].conj();
                    }
                }
                // jumps κ aρa† + γ(n̄+1) cρc† + γn̄ c†ρc
                add_sandwich(ops, Jump::Cavity, p.kappa * dt, rho, &mut ws.tmp, &mut ws.adj, next, d);
                add_sandwich(
                    ops,
                    Jump::Lower,
                    p.gamma * (p.n_bar + 1.0) * dt,
                    rho,
                    &mut ws.tmp,
                    &mut ws.adj,
                    next,
                    d,
                );
                add_sandwich(
                    ops,
                    Jump::Raise,
                    p.gamma * p.n_bar * dt,
                    rho,
                    &mut ws.tmp,
                    &mut ws.adj,
                    next,
                    d,
                );
                trace(next, d).re
            }
            Scheme::Kraus => {
                let sk = p.kappa.sqrt();
                let dy = p.eta.sqrt() * sk * homodyne_mean * dt + dw;
                let c_a = p.eta.sqrt() * sk * e_phi * dy;
                let c_a2 = 0.5 * p.eta * p.kappa * e_phi * e_phi * (dy * dy - dt);
                let diag: Vec<f64> = (0..d)
                    .map(|i| {
                        -0.5 * dt
                            * (p.kappa * ops.n_a_diag[i]
                                + p.gamma * ((p.n_bar + 1.0) * ops.n_c_diag[i] + p.n_bar * ops.c_cdag_diag[i]))
                    })
                    .collect();
                let apply_a = |src: &[C64], dst: &mut [C64]| {
                    dst.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                    ops.apply_hamiltonian(&hc, C64::new(0.0, -dt), src, dst);
                    for i in 0..d {
                        let w = diag[i];
                        for (o, &x) in dst[i * d..(i + 1) * d].iter_mut().zip(&src[i * d..(i + 1) * d]) {
                            *o += w * x;
                        }
                    }
                    ops.a.apply_left(c_a, src, dst);
                    if c_a2 != C64::new(0.0, 0.0) {
                        ops.a2.apply_left(c_a2, src, dst);
                    }
                };
                // drift = Aρ, adj = (Aρ)†, tmp = A(Aρ)†
                apply_a(rho, &mut ws.drift);
                adjoint_into(&ws.drift, &mut ws.adj, d);
                apply_a(&ws.adj, &mut ws.tmp);
                let next = &mut ws.next;
                for i in 0..d * d {
                    next[i] = rho[i] + ws.drift[i] + ws.adj[i] + ws.tmp[i];
                }
                add_sandwich(
                    ops,
                    Jump::Cavity,
                    (1.0 - p.eta) * p.kappa * dt,
                    rho,
                    &mut ws.tmp,
                    &mut ws.adj,
                    next,
                    d,
                );
                add_sandwich(
                    ops,
                    Jump::Lower,
                    p.gamma * (p.n_bar + 1.0) * dt,
                    rho,
                    &mut ws.tmp,
                    &mut ws.adj,
                    next,
                    d,
                );
                add_sandwich(
                    ops,
                    Jump::Raise,
                    p.gamma * p.n_bar * dt,
                    rho,
                    &mut ws.tmp,
                    &mut ws.adj,
                    next,
                    d,
                );
                trace(next, d).re
            }
        };

        if !raw_trace.is_finite() || raw_trace <= 0.0 {
            return Err(Error::Numeric(format!("non-positive trace {raw_trace} at t = {t}")));
        }
        let mut herm_err = 0.0f64;
        for i in 0..d {
            for j in i..d {
                herm_err = herm_err.max((ws.next[i * d + j] - ws.next[j * d + i].conj()).norm());
            }
        }
        std::mem::swap(&mut state.rho, &mut ws.next);
        state.symmetrize();
        let tr_before = state.renormalize();
        let trace_err = match self.scheme {
            Scheme::EulerMaruyama => (tr_before - 1.0).abs(),
            Scheme::Kraus => (state.trace().re - 1.0).abs(),
        };
        let (top_cavity, top_mech) = state.top_populations();
        let diag = StepDiagnostics {
            trace_err,
            herm_err,
            top_cavity,
            top_mech,
            homodyne_mean,
        };
        self.steps += 1;
        let t_end = t + dt;
        let l = &self.limits;
        if trace_err >= l.trace {
            return Err(Error::Invariant {
                t: t_end,
                what: format!("trace drift {trace_err:.3e} per step"),
            });
        }
        if herm_err >= l.hermiticity {
            return Err(Error::Invariant {
                t: t_end,
                what: format!("hermiticity error {herm_err:.3e}"),
            });
        }
        if top_cavity >= l.top_population {
            return Err(Error::Leakage {
                t: t_end,
                subsystem: "cavity",
                population: top_cavity,
            });
        }
        if top_mech >= l.top_population {
            return Err(Error::Leakage {
                t: t_end,
                subsystem: "mechanics",
                population: top_mech,
            });
        }
        if l.positivity_every > 0 && self.steps.is_multiple_of(l.positivity_every) {
            let d = state.dim();
            if !shifted_cholesky_ok(&state.rho, -l.min_eigenvalue, d, &mut self.ws.chol) {
                return Err(Error::Invariant {
                    t: t_end,
                    what: format!("negative eigenvalue {:.3e}", state.min_eigenvalue()),
                });
            }
        }
        Ok(diag)
    }

    /// Number of positivity tests performed so far.
    pub fn positivity_checks(&self) -> usize {
        self.steps.checked_div(self.limits.positivity_every).unwrap_or(0)
    }
}

#[derive(Clone, Copy)]
enum Jump {
    Cavity,
    Lower,
    Raise,
}

/// `dst += s · O ρ O†` for the jump operator `O`.
#[allow(clippy::too_many_arguments)]
fn add_sandwich(
    ops: &Operators,
    which: Jump,
    s: f64,
    rho: &[C64],
    tmp: &mut [C64],
    adj: &mut [C64],
    dst: &mut [C64],
    d: usize,
) {
    if s == 0.0 {
        return;
    }
    let op = match which {
        Jump::Cavity => &ops.a,
        Jump::Lower => &ops.c,
        Jump::Raise => &ops.c_dag,
    };
    tmp.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    op.apply_left(C64::new(1.0, 0.0), rho, tmp);
    adjoint_into(tmp, adj, d);
    op.apply_left(C64::new(s, 0.0), adj, dst);
}

/// One step of the conditional master equation with the default scheme and
/// monitor. Convenience wrapper around [`Stepper`].
#[allow(clippy::too_many_arguments)]
pub fn sme_step(
    state: &QuantumState,
    t: f64,
    dt: f64,
    dw: f64,
    h: &HamiltonianSource,
    ops: &Operators,
    params: SmeParams,
    phi: f64,
) -> Result<(QuantumState, StepDiagnostics)> {
    let mut st = Stepper::new(ops, params, phi, Scheme::default(), HygieneLimits::default());
    let mut next = state.clone();
    let diag = st.step(&mut next, h, t, dt, dw)?;
    Ok((next, diag))
}

/// Photocurrent sample `I = (B² + B⟨ae^{−iφ} + a†e^{iφ}⟩)ηκ + B√(ηκ) dW/dt`.
#[allow(clippy::too_many_arguments)]
pub fn homodyne_current(
    state: &QuantumState,
    ops: &Operators,
    phi: f64,
    b: f64,
    eta: f64,
    kappa: f64,
    dt: f64,
    dw: f64,
) -> f64 {
    let mean = 2.0 * (C64::from_polar(1.0, -phi) * state.expect(&ops.a)).re;
    homodyne_current_from_mean(mean, b, eta, kappa, dt, dw)
}

pub(crate) fn homodyne_current_from_mean(mean: f64, b: f64, eta: f64, kappa: f64, dt: f64, dw: f64) -> f64 {
    (b * b + b * mean) * eta * kappa + b * (eta * kappa).sqrt() * dw / dt
}

/// Wiener increment implied by a photocurrent sample, the inverse of
/// [`homodyne_current`] for `η > 0`.
pub fn innovation_from_current(current: f64, mean: f64, b: f64, eta: f64, kappa: f64, dt: f64) -> f64 {
    (current - (b * b + b * mean) * eta * kappa) * dt / (b * (eta * kappa).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sme::build_operators;
    use nalgebra::DMatrix;

    #[test]
    fn cholesky_test_matches_eigenvalues() {
        let d = 3;
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, -1e-5]);
        let rho: Vec<C64> = m.transpose().iter().map(|&x| C64::new(x, 0.0)).collect();
        let mut w = vec![C64::new(0.0, 0.0); 9];
        assert!(!shifted_cholesky_ok(&rho, 1e-6, d, &mut w));
        assert!(shifted_cholesky_ok(&rho, 1e-4, d, &mut w));
    }

    #[test]
    fn vacuum_current_is_shot_noise_baseline() {
        let ops = build_operators(3, 3).unwrap();
        let s = QuantumState::vacuum_thermal(3, 3, 0.5).unwrap();
        let (b, eta, kappa) = (2.0, 0.7, 0.3);
        assert!((homodyne_current(&s, &ops, 0.4, b, eta, kappa, 0.1, 0.0) - eta * kappa * b * b).abs() < 1e-15);
        assert_eq!(homodyne_current(&s, &ops, 0.4, b, 0.0, kappa, 0.1, 0.3), 0.0);
    }

    #[test]
    fn innovation_inverts_current() {
        let (b, eta, kappa, dt, dw, mean) = (1.3, 0.6, 0.2, 0.01, 0.07, 0.4);
        let i = homodyne_current_from_mean(mean, b, eta, kappa, dt, dw);
        assert!((innovation_from_current(i, mean, b, eta, kappa, dt) - dw).abs() < 1e-14);
    }
}

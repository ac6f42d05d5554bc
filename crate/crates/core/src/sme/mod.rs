//! Conditional stochastic master equation for the cavity plus mechanics in
//! the displaced, doubly rotating frame.
//!
//! The cavity is displaced by its classical mean field, so it stays close
//! to vacuum and a small cavity truncation suffices. The mechanics rotates
//! at `Ω_m = 1`; `X(θ)` in this frame is the slowly varying quadrature the
//! back-action evading drive couples to.

mod operators;
mod run;
mod state;
mod step;

pub use operators::{
    build_operators, hamiltonian_primed, lowering, CouplingCoeffs, HamiltonianSource, Operators, SparseOp,
};
pub use run::{
    adiabatic_check, phase_dependence_demo, run_ensemble, run_trajectory, AdiabaticConfig, AdiabaticReport,
    EnsembleAverage, PhaseReport, SmeRun, SmeSample, SmeTrajectory, STEP_BOUND,
};
pub use state::{conditional_variance, QuantumState};
pub use step::{
    homodyne_current, innovation_from_current, sme_step, HygieneLimits, HygieneStats, Scheme, SmeParams,
    StepDiagnostics, Stepper, Workspace,
};

use crate::drive::EnvelopeSeries;
use crate::error::{domain, Result};
use crate::C64;

/// First-sideband content of an envelope after the rotating-wave
/// approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwaReduction {
    pub alpha_plus: C64,
    pub alpha_minus: C64,
    /// `|α₊₁|`
    pub amplitude: f64,
    /// `arg α₊₁`
    pub theta: f64,
    /// `[C₁, C₁†] = |α₊₁|² − |α₋₁|²`
    pub imbalance: f64,
}

impl RwaReduction {
    /// Balanced to relative precision `tol`, i.e. `α₊₁ ≈ conj(α₋₁)`.
    pub fn is_balanced(&self, tol: f64) -> bool {
        let scale = self.alpha_plus.norm_sqr().max(self.alpha_minus.norm_sqr());
        (self.alpha_plus - self.alpha_minus.conj()).norm_sqr() <= tol * tol * scale
    }
}

/// Extract `α_{±1}`; balanced sidebands reduce `C₁` to `A√2 X(θ)`.
pub fn rwa_reduce(env: &EnvelopeSeries) -> Result<RwaReduction> {
    let (Some(ap), Some(am)) = (env.get(1), env.get(-1)) else {
        return domain("envelope has no first-sideband (±1) coefficients");
    };
    Ok(RwaReduction {
        alpha_plus: ap,
        alpha_minus: am,
        amplitude: ap.norm(),
        theta: ap.arg(),
        imbalance: ap.norm_sqr() - am.norm_sqr(),
    })
}

//! Density matrix of the truncated cavity ⊗ mechanics system.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{domain, Result};
use crate::model::QuadratureConvention;
use crate::C64;

use super::operators::{lowering, SparseOp};

/// Row-major density matrix with composite index `n_cavity * N_m + n_mech`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub(crate) rho: Vec<C64>,
    pub(crate) n_c: usize,
    pub(crate) n_m: usize,
}

/// Truncated thermal populations `p_n ∝ (n̄/(n̄+1))ⁿ`, renormalized.
fn thermal_populations(n: usize, n_bar: f64) -> Vec<f64> {
    let mut p: Vec<f64> = if n_bar == 0.0 {
        (0..n).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect()
    } else {
        let r = n_bar / (n_bar + 1.0);
        (0..n).map(|k| r.powi(k as i32)).collect()
    };
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

impl QuantumState {
    pub fn dims(&self) -> (usize, usize) {
        (self.n_c, self.n_m)
    }

    pub fn dim(&self) -> usize {
        self.n_c * self.n_m
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.rho
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.rho[i * self.dim() + j]
    }

    /// `ρ_c ⊗ ρ_m` from two dense factors.
    pub fn product(rho_c: &DMatrix<C64>, rho_m: &DMatrix<C64>) -> Result<Self> {
        let (n_c, n_m) = (rho_c.nrows(), rho_m.nrows());
        if !rho_c.is_square() || !rho_m.is_square() || n_c < 2 || n_m < 2 {
            return domain("factors must be square with dimension >= 2");
        }
        let d = n_c * n_m;
        let mut rho = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..n_c {
            for j in 0..n_c {
                let cij = rho_c[(i, j)];
                if cij == C64::new(0.0, 0.0) {
                    continue;
                }
                for p in 0..n_m {
                    for q in 0..n_m {
                        rho[(i * n_m + p) * d + j * n_m + q] = cij * rho_m[(p, q)];
                    }
                }
            }
        }
        Ok(Self { rho, n_c, n_m })
    }

    /// Displaced-cavity vacuum times a truncated thermal mechanics state.
    pub fn vacuum_thermal(n_c: usize, n_m: usize, n_bar: f64) -> Result<Self> {
        if !(n_bar >= 0.0) {
            return domain(format!("n_bar must be non-negative, got {n_bar}"));
        }
        let mut rc = DMatrix::zeros(n_c.max(1), n_c.max(1));
        rc[(0, 0)] = C64::new(1.0, 0.0);
        let p = thermal_populations(n_m, n_bar);
        let rm = DMatrix::from_fn(n_m, n_m, |i, j| {
            if i == j {
                C64::new(p[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self::product(&rc, &rm)
    }

    /// Cavity vacuum times a mechanical pure state with amplitudes `psi`.
    pub fn vacuum_pure_mechanics(n_c: usize, psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return domain("mechanical state vector is zero");
        }
        let n_m = psi.len();
        let mut rc = DMatrix::zeros(n_c, n_c);
        rc[(0, 0)] = C64::new(1.0, 0.0);
        let rm = DMatrix::from_fn(n_m, n_m, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Self::product(&rc, &rm)
    }

    pub fn from_dense(rho: &DMatrix<C64>, n_c: usize, n_m: usize) -> Result<Self> {
        let d = n_c * n_m;
        if rho.nrows() != d || rho.ncols() != d {
            return domain("density matrix dimension does not match (N_c, N_m)");
        }
        let mut v = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                v.push(rho[(i, j)]);
            }
        }
        Ok(Self { rho: v, n_c, n_m })
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.rho[i * d + j])
    }

    pub fn trace(&self) -> C64 {
        let d = self.dim();
        (0..d).map(|i| self.rho[i * d + i]).sum()
    }

    /// `tr(O ρ)`.
    pub fn expect(&self, op: &SparseOp) -> C64 {
        let d = self.dim();
        op.entries().iter().map(|&(r, c, v)| v * self.rho[c * d + r]).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut e = 0.0f64;
        for i in 0..d {
            for j in i..d {
                e = e.max((self.rho[i * d + j] - self.rho[j * d + i].conj()).norm());
            }
        }
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.to_dense())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Reduced state of the cavity.
    pub fn cavity_marginal(&self) -> DMatrix<C64> {
        let (nc, nm, d) = (self.n_c, self.n_m, self.dim());
        DMatrix::from_fn(nc, nc, |i, j| {
            (0..nm).map(|m| self.rho[(i * nm + m) * d + j * nm + m]).sum()
        })
    }

    /// Reduced state of the mechanics.
    pub fn mechanics_marginal(&self) -> DMatrix<C64> {
        let (nc, nm, d) = (self.n_c, self.n_m, self.dim());
        DMatrix::from_fn(nm, nm, |p, q| {
            (0..nc).map(|a| self.rho[(a * nm + p) * d + a * nm + q]).sum()
        })
    }

    /// Population outside the displaced cavity vacuum, `1 − ⟨0|ρ_c|0⟩`.
    pub fn cavity_excitation(&self) -> f64 {
        let (nm, d) = (self.n_m, self.dim());
        1.0 - (0..nm).map(|m| self.rho[m * d + m].re).sum::<f64>()
    }

    /// Populations of the top Fock level of cavity and mechanics.
    pub fn top_populations(&self) -> (f64, f64) {
        let (nc, nm, d) = (self.n_c, self.n_m, self.dim());
        let cav = (0..nm)
            .map(|m| {
                let i = (nc - 1) * nm + m;
                self.rho[i * d + i].re
            })
            .sum();
        let mech = (0..nc)
            .map(|a| {
                let i = a * nm + nm - 1;
                self.rho[i * d + i].re
            })
            .sum();
        (cav, mech)
    }

    pub fn mean_phonons(&self) -> f64 {
        let m = self.mechanics_marginal();
        (0..self.n_m).map(|n| n as f64 * m[(n, n)].re).sum()
    }

    /// Mean of the mechanical quadrature `X(θ)`.
    pub fn quadrature_mean(&self, theta: f64) -> f64 {
        let (q, _) = quadrature_moments(&self.mechanics_marginal(), theta);
        q
    }

    /// Trace distance `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &QuantumState) -> f64 {
        let diff = self.to_dense() - other.to_dense();
        0.5 * SymmetricEigen::new(diff)
            .eigenvalues
            .iter()
            .map(|x| x.abs())
            .sum::<f64>()
    }

    pub(crate) fn renormalize(&mut self) -> f64 {
        let tr = self.trace().re;
        let inv = 1.0 / tr;
        self.rho.iter_mut().for_each(|z| *z *= inv);
        tr
    }

    pub(crate) fn symmetrize(&mut self) {
        let d = self.dim();
        for i in 0..d {
            self.rho[i * d + i].im = 0.0;
            for j in i + 1..d {
                let avg = 0.5 * (self.rho[i * d + j] + self.rho[j * d + i].conj());
                self.rho[i * d + j] = avg;
                self.rho[j * d + i] = avg.conj();
            }
        }
    }

    /// Average of several states of equal dimensions.
    pub fn average<'a>(states: impl IntoIterator<Item = &'a QuantumState>) -> Option<QuantumState> {
        let mut it = states.into_iter();
        let first = it.next()?;
        let mut acc = first.clone();
        let mut n = 1.0;
        for s in it {
            for (a, b) in acc.rho.iter_mut().zip(&s.rho) {
                *a += b;
            }
            n += 1.0;
        }
        acc.rho.iter_mut().for_each(|z| *z /= n);
        Some(acc)
    }
}

fn quadrature_moments(rho_m: &DMatrix<C64>, theta: f64) -> (f64, f64) {
    let n = rho_m.nrows();
    let (u, v) = QuadratureConvention { theta }.ladder_coefficients();
    let mut q = DMatrix::<C64>::zeros(n, n);
    for (r, c, x) in lowering(n) {
        q[(r, c)] += u * x;
        q[(c, r)] += v * x;
    }
    let rq = rho_m * &q;
    let mean = rq.trace().re;
    let second = (rq * &q).trace().re;
    (mean, second)
}

/// `tr(ρ_m X(θ)²) − tr(ρ_m X(θ))²` on the mechanical marginal.
pub fn conditional_variance(state: &QuantumState, theta: f64) -> f64 {
    let (mean, second) = quadrature_moments(&state.mechanics_marginal(), theta);
    second - mean * mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn vacuum_variance() {
        let s = QuantumState::vacuum_thermal(2, 6, 0.0).unwrap();
        assert!((conditional_variance(&s, 0.0) - 0.5).abs() < 1e-15);
        assert!((conditional_variance(&s, 1.1) - 0.5).abs() < 1e-15);
        assert!((s.trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thermal_variance() {
        let n_bar = 0.7;
        let s = QuantumState::vacuum_thermal(2, 80, n_bar).unwrap();
        assert!((conditional_variance(&s, 0.0) - (n_bar + 0.5)).abs() < 1e-10);
        assert!((conditional_variance(&s, FRAC_PI_2) - (n_bar + 0.5)).abs() < 1e-10);
        assert!((s.mean_phonons() - n_bar).abs() < 1e-10);
    }

    #[test]
    fn marginals_and_excitation() {
        let s = QuantumState::vacuum_thermal(3, 4, 0.2).unwrap();
        assert!(s.cavity_excitation().abs() < 1e-15);
        let rc = s.cavity_marginal();
        assert!((rc[(0, 0)].re - 1.0).abs() < 1e-15);
        let (top_c, top_m) = s.top_populations();
        assert_eq!(top_c, 0.0);
        assert!(top_m > 0.0);
        assert!(s.min_eigenvalue() > -1e-15);
    }
}

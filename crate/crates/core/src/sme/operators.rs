//! Truncated ladder operators on the cavity ⊗ mechanics space and the
//! primed-frame coupling Hamiltonian.
//!
//! Composite basis index is `n_cavity * N_m + n_mech`. Matrices act on
//! row-major `D × D` buffers with `D = N_c N_m`.

use nalgebra::DMatrix;

use crate::drive::EnvelopeSeries;
use crate::error::{domain, Result};
use crate::C64;

use super::RwaReduction;

/// Sparse matrix as a list of `(row, col, value)` entries sorted by row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut entries: Vec<_> = entries.into_iter().filter(|e| e.2 != C64::new(0.0, 0.0)).collect();
        entries.sort_by_key(|&(r, c, _)| (r, c));
        // merge duplicates
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        Self { dim, entries: merged }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self::from_entries(self.dim, self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())))
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self::from_entries(self.dim, self.entries.iter().map(|&(r, c, v)| (r, c, s * v)))
    }

    /// `Σ_k s_k O_k`.
    pub fn combination(dim: usize, terms: &[(C64, &SparseOp)]) -> Self {
        Self::from_entries(
            dim,
            terms
                .iter()
                .flat_map(|(s, op)| op.entries.iter().map(move |&(r, c, v)| (r, c, s * v))),
        )
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &SparseOp) -> Self {
        let mut out = Vec::new();
        for &(r, k, v) in &self.entries {
            for &(k2, c, w) in &other.entries {
                if k2 == k {
                    out.push((r, c, v * w));
                }
            }
        }
        Self::from_entries(self.dim, out)
    }

    /// `dst += s · self · src` for row-major `D × D` buffers.
    pub fn apply_left(&self, s: C64, src: &[C64], dst: &mut [C64]) {
        let d = self.dim;
        for &(r, k, v) in &self.entries {
            let w = s * v;
            let (src_row, dst_row) = (&src[k * d..(k + 1) * d], &mut dst[r * d..(r + 1) * d]);
            for (o, &x) in dst_row.iter_mut().zip(src_row) {
                *o += w * x;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// Largest `|O_ij − conj(O_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dense = self.to_dense();
        (&dense - dense.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Lowering operator on a single truncated mode of dimension `n`.
pub fn lowering(n: usize) -> Vec<(usize, usize, f64)> {
    (1..n).map(|k| (k - 1, k, (k as f64).sqrt())).collect()
}

/// Operator set for a cavity of dimension `N_c` and mechanics of dimension
/// `N_m`.
#[derive(Debug, Clone)]
pub struct Operators {
    pub n_c: usize,
    pub n_m: usize,
    /// `a ⊗ 1`
    pub a: SparseOp,
    /// `a² ⊗ 1`
    pub a2: SparseOp,
    /// `1 ⊗ c`
    pub c: SparseOp,
    /// `1 ⊗ c†`
    pub c_dag: SparseOp,
    /// `c a†`, `c a`, `c† a†`, `c† a`, `c a†a`, `c† a†a`
    pub c_adag: SparseOp,
    pub c_a: SparseOp,
    pub cdag_adag: SparseOp,
    pub cdag_a: SparseOp,
    pub c_na: SparseOp,
    pub cdag_na: SparseOp,
    /// Diagonals of `a†a`, `c†c` and the truncated `c c†`.
    pub n_a_diag: Vec<f64>,
    pub n_c_diag: Vec<f64>,
    pub c_cdag_diag: Vec<f64>,
}

impl Operators {
    pub fn dim(&self) -> usize {
        self.n_c * self.n_m
    }

    fn kron(&self, cav: &[(usize, usize, C64)], mech: &[(usize, usize, C64)]) -> SparseOp {
        let nm = self.n_m;
        SparseOp::from_entries(
            self.dim(),
            cav.iter()
                .flat_map(|&(i, j, v)| mech.iter().map(move |&(p, q, w)| (i * nm + p, j * nm + q, v * w))),
        )
    }

    /// Measured mechanical quadrature `(e^{iθ} c + e^{−iθ} c†)/√2` on the
    /// composite space.
    pub fn quadrature(&self, theta: f64) -> SparseOp {
        let u = C64::from_polar(std::f64::consts::FRAC_1_SQRT_2, theta);
        SparseOp::combination(self.dim(), &[(u, &self.c), (u.conj(), &self.c_dag)])
    }

    /// Dense single-mode mechanical lowering operator.
    pub fn mech_lowering(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.n_m, self.n_m);
        for (r, c, v) in lowering(self.n_m) {
            m[(r, c)] = C64::new(v, 0.0);
        }
        m
    }

    pub fn hamiltonian(&self, h: &CouplingCoeffs) -> SparseOp {
        SparseOp::combination(
            self.dim(),
            &[
                (h.c_adag, &self.c_adag),
                (h.c_a, &self.c_a),
                (h.cdag_adag, &self.cdag_adag),
                (h.cdag_a, &self.cdag_a),
                (h.c_na, &self.c_na),
                (h.cdag_na, &self.cdag_na),
            ],
        )
    }

    /// `dst += s · H · src` with `H` given by its coupling coefficients.
    pub fn apply_hamiltonian(&self, h: &CouplingCoeffs, s: C64, src: &[C64], dst: &mut [C64]) {
        for (coef, op) in [
            (h.c_adag, &self.c_adag),
            (h.c_a, &self.c_a),
            (h.cdag_adag, &self.cdag_adag),
            (h.cdag_a, &self.cdag_a),
            (h.c_na, &self.c_na),
            (h.cdag_na, &self.cdag_na),
        ] {
            if coef != C64::new(0.0, 0.0) {
                op.apply_left(s * coef, src, dst);
            }
        }
    }
}

/// Truncated ladder operators for the composite system.
pub fn build_operators(n_c: usize, n_m: usize) -> Result<Operators> {
    if n_c < 2 || n_m < 2 {
        return domain(format!("truncations must be at least 2, got ({n_c}, {n_m})"));
    }
    let cplx = |v: Vec<(usize, usize, f64)>| -> Vec<(usize, usize, C64)> {
        v.into_iter().map(|(r, c, x)| (r, c, C64::new(x, 0.0))).collect()
    };
    let id = |n: usize| -> Vec<(usize, usize, C64)> { (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect() };
    let dag = |v: &[(usize, usize, C64)]| -> Vec<(usize, usize, C64)> {
        v.iter().map(|&(r, c, x)| (c, r, x.conj())).collect()
    };
    let a1 = cplx(lowering(n_c));
    let a1_sq = SparseOp::from_entries(n_c, a1.clone()).mul(&SparseOp::from_entries(n_c, a1.clone()));
    let na1: Vec<_> = (1..n_c).map(|k| (k, k, C64::new(k as f64, 0.0))).collect();
    let c1 = cplx(lowering(n_m));
    let mut ops = Operators {
        n_c,
        n_m,
        a: SparseOp::zeros(0),
        a2: SparseOp::zeros(0),
        c: SparseOp::zeros(0),
        c_dag: SparseOp::zeros(0),
        c_adag: SparseOp::zeros(0),
        c_a: SparseOp::zeros(0),
        cdag_adag: SparseOp::zeros(0),
        cdag_a: SparseOp::zeros(0),
        c_na: SparseOp::zeros(0),
        cdag_na: SparseOp::zeros(0),
        n_a_diag: Vec::new(),
        n_c_diag: Vec::new(),
        c_cdag_diag: Vec::new(),
    };
    ops.a = ops.kron(&a1, &id(n_m));
    ops.a2 = ops.kron(a1_sq.entries(), &id(n_m));
    ops.c = ops.kron(&id(n_c), &c1);
    ops.c_dag = ops.kron(&id(n_c), &dag(&c1));
    ops.c_adag = ops.kron(&dag(&a1), &c1);
    ops.c_a = ops.kron(&a1, &c1);
    ops.cdag_adag = ops.kron(&dag(&a1), &dag(&c1));
    ops.cdag_a = ops.kron(&a1, &dag(&c1));
    ops.c_na = ops.kron(&na1, &c1);
    ops.cdag_na = ops.kron(&na1, &dag(&c1));
    let d = n_c * n_m;
    ops.n_a_diag = (0..d).map(|i| (i / n_m) as f64).collect();
    ops.n_c_diag = (0..d).map(|i| (i % n_m) as f64).collect();
    ops.c_cdag_diag = (0..d)
        .map(|i| {
            let m = i % n_m;
            if m + 1 < n_m {
                (m + 1) as f64
            } else {
                0.0
            }
        })
        .collect();
    Ok(ops)
}

/// Coefficients of `H = c a†·h₁ + c a·h₂ + c† a†·h₃ + c† a·h₄ + c a†a·h₅ + c† a†a·h₆`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CouplingCoeffs {
    pub c_adag: C64,
    pub c_a: C64,
    pub cdag_adag: C64,
    pub cdag_a: C64,
    pub c_na: C64,
    pub cdag_na: C64,
}

/// Source of the coupling Hamiltonian in the primed frame.
#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianSource {
    /// No optomechanical coupling.
    Free,
    /// Full time-dependent `H'(t) = g(c e^{−it} + c† e^{it})(α(t) a† + α*(t) a [+ a†a])`.
    Primed {
        envelope: EnvelopeSeries,
        g: f64,
        include_quadratic: bool,
    },
    /// Rotating-wave interaction `g(C₁† a + C₁ a†)` with `C₁ = α₁ c + α₋₁ c†`.
    Rwa { reduction: RwaReduction, g: f64 },
}

impl HamiltonianSource {
    pub fn coeffs(&self, t: f64) -> CouplingCoeffs {
        match self {
            HamiltonianSource::Free => CouplingCoeffs::default(),
            HamiltonianSource::Primed {
                envelope,
                g,
                include_quadratic,
            } => {
                let alpha = envelope.at(t);
                let e = C64::from_polar(*g, -t);
                let ec = e.conj();
                let (c_na, cdag_na) = if *include_quadratic {
                    (e, ec)
                } else {
                    Default::default()
                };
                CouplingCoeffs {
                    c_adag: e * alpha,
                    c_a: e * alpha.conj(),
                    cdag_adag: ec * alpha,
                    cdag_a: ec * alpha.conj(),
                    c_na,
                    cdag_na,
                }
            }
            HamiltonianSource::Rwa { reduction, g } => CouplingCoeffs {
                c_adag: *g * reduction.alpha_plus,
                cdag_adag: *g * reduction.alpha_minus,
                cdag_a: *g * reduction.alpha_plus.conj(),
                c_a: *g * reduction.alpha_minus.conj(),
                ..Default::default()
            },
        }
    }

    /// Upper bound on the coupling rate `g·max|α(t)|`.
    pub fn coupling_bound(&self) -> f64 {
        match self {
            HamiltonianSource::Free => 0.0,
            HamiltonianSource::Primed { envelope, g, .. } => g * envelope.coeffs().map(|(_, a)| a.norm()).sum::<f64>(),
            HamiltonianSource::Rwa { reduction, g } => g * (reduction.alpha_plus.norm() + reduction.alpha_minus.norm()),
        }
    }
}

/// `H'(t)` as an explicit Hermitian matrix.
pub fn hamiltonian_primed(
    envelope: &EnvelopeSeries,
    g: f64,
    t: f64,
    ops: &Operators,
    include_quadratic: bool,
) -> SparseOp {
    let src = HamiltonianSource::Primed {
        envelope: envelope.clone(),
        g,
        include_quadratic,
    };
    ops.hamiltonian(&src.coeffs(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::three_tone_envelope;

    #[test]
    fn qubit_lowering() {
        let ops = build_operators(2, 2).unwrap();
        let c = ops.mech_lowering();
        assert_eq!(c[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(c.iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn number_diagonal_and_commutator() {
        let ops = build_operators(3, 5).unwrap();
        let c = ops.c.to_dense();
        let cd = ops.c_dag.to_dense();
        let n = &cd * &c;
        let comm = &c * &cd - &cd * &c;
        for i in 0..ops.dim() {
            let m = i % ops.n_m;
            assert!((n[(i, i)].re - m as f64).abs() < 1e-14);
            let expect = if m + 1 < ops.n_m { 1.0 } else { -((ops.n_m - 1) as f64) };
            assert!((comm[(i, i)].re - expect).abs() < 1e-14);
            assert!((ops.c_cdag_diag[i] - (&c * &cd)[(i, i)].re).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_tiny_truncations() {
        assert!(build_operators(1, 4).is_err());
    }

    #[test]
    fn zero_coupling_gives_zero_hamiltonian() {
        let ops = build_operators(3, 4).unwrap();
        let env = three_tone_envelope(0.5, 1.0, 2.0).unwrap();
        assert_eq!(hamiltonian_primed(&env, 0.0, 0.3, &ops, true).nnz(), 0);
    }

    #[test]
    fn static_envelope_hamiltonian() {
        let ops = build_operators(3, 4).unwrap();
        let (g, amp) = (0.7, 1.3);
        let env = EnvelopeSeries::new([(0, C64::new(amp, 0.0))]).unwrap();
        let h = hamiltonian_primed(&env, g, 0.0, &ops, false).to_dense();
        let x = (ops.c.to_dense() + ops.c_dag.to_dense()) * C64::new(g * amp, 0.0);
        let a = ops.a.to_dense();
        let expect = &x * (&a + a.adjoint());
        assert!((h - expect).norm() < 1e-13);
    }

    #[test]
    fn quadratic_term_isolated() {
        let ops = build_operators(3, 4).unwrap();
        let env = three_tone_envelope(0.4, 0.9, 1.1).unwrap();
        let (g, t) = (0.3, 0.77);
        let with = hamiltonian_primed(&env, g, t, &ops, true).to_dense();
        let without = hamiltonian_primed(&env, g, t, &ops, false).to_dense();
        let e = C64::from_polar(g, -t);
        let coupling = ops.c.to_dense() * e + ops.c_dag.to_dense() * e.conj();
        let a = ops.a.to_dense();
        let diff = &with - &without - coupling * (a.adjoint() * &a);
        assert!(diff.norm() < 1e-13);
        assert!(hamiltonian_primed(&env, g, t, &ops, true).hermiticity_error() < 1e-12);
    }
}

//! Dense reference implementations shared by the SME tests.

#![allow(dead_code)]

use bae_core::drive::EnvelopeSeries;
use bae_core::C64;
use nalgebra::DMatrix;

pub type M = DMatrix<C64>;

pub fn lower(n: usize) -> M {
    M::from_fn(n, n, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn kron(a: &M, b: &M) -> M {
    a.kronecker(b)
}

pub struct Dense {
    pub a: M,
    pub c: M,
    pub n_c: usize,
    pub n_m: usize,
}

impl Dense {
    pub fn new(n_c: usize, n_m: usize) -> Self {
        Self {
            a: kron(&lower(n_c), &M::identity(n_m, n_m)),
            c: kron(&M::identity(n_c, n_c), &lower(n_m)),
            n_c,
            n_m,
        }
    }

    /// `g(c e^{-it} + c† e^{it})(α(t) a† + α*(t) a)`
    pub fn hamiltonian(&self, env: &EnvelopeSeries, g: f64, t: f64) -> M {
        let e = C64::from_polar(g, -t);
        let al = env.at(t);
        let mech = &self.c * e + self.c.adjoint() * e.conj();
        let cav = self.a.adjoint() * al + &self.a * al.conj();
        mech * cav
    }
}

fn dissipator(o: &M, rho: &M) -> M {
    let od = o.adjoint();
    let n = &od * o;
    o * rho * &od - (&n * rho + rho * &n) * C64::new(0.5, 0.0)
}

pub struct Rates {
    pub kappa: f64,
    pub gamma: f64,
    pub n_bar: f64,
}

pub fn lindblad(d: &Dense, env: &EnvelopeSeries, g: f64, r: &Rates, t: f64, rho: &M) -> M {
    let h = d.hamiltonian(env, g, t);
    let i = C64::new(0.0, 1.0);
    (&h * rho - rho * &h) * (-i)
        + dissipator(&d.a, rho) * C64::new(r.kappa, 0.0)
        + dissipator(&d.c, rho) * C64::new(r.gamma * (r.n_bar + 1.0), 0.0)
        + dissipator(&d.c.adjoint(), rho) * C64::new(r.gamma * r.n_bar, 0.0)
}

/// Classical RK4 on the unconditional master equation.
pub fn rk4(d: &Dense, env: &EnvelopeSeries, g: f64, r: &Rates, rho0: &M, t1: f64, h: f64) -> M {
    let n = (t1 / h).round() as usize;
    let h = t1 / n as f64;
    let mut rho = rho0.clone();
    let hc = C64::new(h, 0.0);
    for k in 0..n {
        let t = k as f64 * h;
        let k1 = lindblad(d, env, g, r, t, &rho);
        let k2 = lindblad(d, env, g, r, t + 0.5 * h, &(&rho + &k1 * (hc * 0.5)));
        let k3 = lindblad(d, env, g, r, t + 0.5 * h, &(&rho + &k2 * (hc * 0.5)));
        let k4 = lindblad(d, env, g, r, t + h, &(&rho + &k3 * hc));
        rho += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * (hc / 6.0);
    }
    rho
}

pub fn max_abs(m: &M) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

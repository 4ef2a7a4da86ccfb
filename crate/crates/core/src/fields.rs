//! Penning-trap fields, the softened Coulomb interaction, the exact single-particle
//! trajectory and energy functionals. Units are Gaussian (cgs).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summation::CompensatedSum;
use crate::Vec3;

/// Trap parameters. `B = (omega_b / alpha) e_z`, `E_ext = -epsilon (omega_e^2 / alpha) diag(1, 1, -2) x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenningParams {
    /// Charge-to-mass ratio.
    pub alpha: f64,
    pub omega_e: f64,
    pub omega_b: f64,
    /// -1 confines axially (Penning trap), +1 defocuses along z.
    pub epsilon: f64,
}

impl Default for PenningParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            omega_e: 4.9,
            omega_b: 25.0,
            epsilon: -1.0,
        }
    }
}

impl PenningParams {
    pub fn new(alpha: f64, omega_e: f64, omega_b: f64, epsilon: f64) -> Result<Self> {
        let p = Self {
            alpha,
            omega_e,
            omega_b,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon != 1.0 && self.epsilon != -1.0 {
            return Err(Error::param(
                "epsilon",
                format!("must be +1 or -1, got {}", self.epsilon),
            ));
        }
        if !(self.omega_e >= 0.0 && self.omega_e.is_finite()) {
            return Err(Error::param("omega_e", "must be finite and >= 0"));
        }
        if !(self.omega_b >= 0.0 && self.omega_b.is_finite()) {
            return Err(Error::param("omega_b", "must be finite and >= 0"));
        }
        if !(self.alpha.is_finite() && self.alpha != 0.0) {
            return Err(Error::param("alpha", "must be finite and non-zero"));
        }
        Ok(())
    }

    /// Radial confinement condition `omega_b^2 >= -4 epsilon omega_e^2`.
    pub fn physically_stable(&self) -> bool {
        !physically_unstable(self.epsilon * self.omega_e, self.omega_b)
    }

    pub fn magnetic_field(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.omega_b / self.alpha)
    }

    /// Quadrupole potential with `E_ext = -grad phi`.
    pub fn potential(&self, x: &Vec3) -> f64 {
        self.epsilon * self.omega_e * self.omega_e / (2.0 * self.alpha)
            * (x.x * x.x + x.y * x.y - 2.0 * x.z * x.z)
    }
}

/// `omega_b^2 < -4 epsilon omega_e^2`, written in terms of the signed product `epsilon * omega_e`.
pub fn physically_unstable(eps_omega_e: f64, omega_b: f64) -> bool {
    let eps = if eps_omega_e < 0.0 { -1.0 } else { 1.0 };
    omega_b * omega_b < -4.0 * eps * eps_omega_e * eps_omega_e
}

/// External quadrupole field.
pub fn e_ext(params: &PenningParams, x: &Vec3) -> Vec3 {
    let k = -params.epsilon * params.omega_e * params.omega_e / params.alpha;
    Vec3::new(k * x.x, k * x.y, -2.0 * k * x.z)
}

/// N charged particles with a shared Coulomb softening length.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub charge: Vec<f64>,
    pub mass: Vec<f64>,
    pub lambda: f64,
}

impl ParticleEnsemble {
    pub fn new(
        x: Vec<Vec3>,
        v: Vec<Vec3>,
        charge: Vec<f64>,
        mass: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::param(
                "N",
                "ensemble must hold at least one particle",
            ));
        }
        if v.len() != n || charge.len() != n || mass.len() != n {
            return Err(Error::param(
                "ensemble",
                "x, v, charge and mass lengths differ",
            ));
        }
        if n > 1 && !(lambda > 0.0) {
            return Err(Error::param(
                "lambda",
                "softening length must be > 0 for N > 1",
            ));
        }
        Ok(Self {
            x,
            v,
            charge,
            mass,
            lambda,
        })
    }

    /// One particle of unit mass with charge `alpha` (so that q/m = alpha).
    pub fn single(alpha: f64, x: Vec3, v: Vec3) -> Self {
        Self {
            x: vec![x],
            v: vec![v],
            charge: vec![alpha],
            mass: vec![1.0],
            lambda: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Softened Coulomb field at particle `i`.
pub fn e_int(ensemble: &ParticleEnsemble, i: usize) -> Vec3 {
    coulomb_field_at(&ensemble.x, &ensemble.charge, ensemble.lambda, i)
}

pub(crate) fn coulomb_field_at(x: &[Vec3], charge: &[f64], lambda: f64, i: usize) -> Vec3 {
    let lam2 = lambda * lambda;
    let xi = x[i];
    let mut e = Vec3::zeros();
    for (k, (xk, &qk)) in x.iter().zip(charge).enumerate() {
        if k == i {
            continue;
        }
        let d = xi - xk;
        let r2 = d.norm_squared() + lam2;
        e += d * (qk / (r2 * r2.sqrt()));
    }
    e
}

/// Lorentz acceleration `alpha (E_ext + E_int + v x B)` on particle `i` moving with `v`.
pub fn lorentz_force(
    params: &PenningParams,
    ensemble: &ParticleEnsemble,
    i: usize,
    v: &Vec3,
) -> Vec3 {
    let e = e_ext(params, &ensemble.x[i]) + e_int(ensemble, i);
    params.alpha * (e + v.cross(&params.magnetic_field()))
}

/// Total energy: kinetic, external potential and softened pair interaction.
pub fn total_energy(params: &PenningParams, ensemble: &ParticleEnsemble) -> f64 {
    state_energy(
        params,
        &ensemble.x,
        &ensemble.v,
        &ensemble.charge,
        &ensemble.mass,
        ensemble.lambda,
    )
}

/// [`total_energy`] on bare position/velocity slices.
pub fn state_energy(
    params: &PenningParams,
    x: &[Vec3],
    v: &[Vec3],
    charge: &[f64],
    mass: &[f64],
    lambda: f64,
) -> f64 {
    let n = x.len();
    let mut acc = CompensatedSum::default();
    for i in 0..n {
        acc += 0.5 * mass[i] * v[i].norm_squared();
        acc += charge[i] * params.potential(&x[i]);
    }
    let lam2 = lambda * lambda;
    for i in 0..n {
        for k in (i + 1)..n {
            let r2 = (x[i] - x[k]).norm_squared() + lam2;
            acc += charge[i] * charge[k] / r2.sqrt();
        }
    }
    acc.value()
}

/// Mass-weighted mean position.
pub fn center_of_mass(ensemble: &ParticleEnsemble) -> Result<Vec3> {
    mass_center(&ensemble.x, &ensemble.mass)
}

pub fn mass_center(x: &[Vec3], mass: &[f64]) -> Result<Vec3> {
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return Err(Error::param("mass", "total mass must be positive"));
    }
    let mut c = [CompensatedSum::default(); 3];
    for (x, &m) in x.iter().zip(mass) {
        for d in 0..3 {
            c[d] += m * x[d];
        }
    }
    Ok(Vec3::new(c[0].value(), c[1].value(), c[2].value()) / total)
}

/// Coefficients of the closed-form single-particle trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticCoefficients {
    pub omega_tilde: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub i_plus: f64,
    pub i_minus: f64,
    z0: f64,
    vz0: f64,
}

impl AnalyticCoefficients {
    pub fn new(params: &PenningParams, x0: &Vec3, v0: &Vec3) -> Result<Self> {
        params.validate()?;
        if params.epsilon != -1.0 {
            return Err(Error::UnsupportedRegime(
                "closed-form solution needs epsilon = -1 (axially confining trap)".into(),
            ));
        }
        let disc = params.omega_b * params.omega_b
            + 4.0 * params.epsilon * params.omega_e * params.omega_e;
        if disc <= 0.0 {
            return Err(Error::UnsupportedRegime(format!(
                "omega_b^2 + 4 epsilon omega_e^2 = {disc} <= 0: no bounded real solution"
            )));
        }
        let root = disc.sqrt();
        let omega_plus = 0.5 * (params.omega_b + root);
        let omega_minus = 0.5 * (params.omega_b - root);
        let gap = omega_plus - omega_minus;
        let r_minus = (omega_plus * x0.x + v0.y) / gap;
        let i_minus = (omega_plus * x0.y - v0.x) / gap;
        Ok(Self {
            omega_tilde: (-2.0 * params.epsilon).sqrt() * params.omega_e,
            omega_plus,
            omega_minus,
            r_plus: x0.x - r_minus,
            r_minus,
            i_plus: x0.y - i_minus,
            i_minus,
            z0: x0.z,
            vz0: v0.z,
        })
    }

    pub fn evaluate(&self, t: f64) -> (Vec3, Vec3) {
        let mut x = 0.0;
        let mut y = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for (om, r, im) in [
            (self.omega_plus, self.r_plus, self.i_plus),
            (self.omega_minus, self.r_minus, self.i_minus),
        ] {
            // (r + i im) exp(-i om t)
            let (s, c) = (om * t).sin_cos();
            x += r * c + im * s;
            y += im * c - r * s;
            vx += om * (im * c - r * s);
            vy += -om * (r * c + im * s);
        }
        let (z, vz) = if self.omega_tilde > 0.0 {
            let (s, c) = (self.omega_tilde * t).sin_cos();
            (
                self.z0 * c + self.vz0 / self.omega_tilde * s,
                -self.z0 * self.omega_tilde * s + self.vz0 * c,
            )
        } else {
            (self.z0 + self.vz0 * t, self.vz0)
        };
        (Vec3::new(x, y, z), Vec3::new(vx, vy, vz))
    }
}

/// Exact position and velocity of a single particle at time `t`.
pub fn analytic_solution(
    params: &PenningParams,
    x0: &Vec3,
    v0: &Vec3,
    t: f64,
) -> Result<(Vec3, Vec3)> {
    Ok(AnalyticCoefficients::new(params, x0, v0)?.evaluate(t))
}

/// Source of the electric and magnetic fields seen by the particles.
pub trait ForceModel: Sync {
    fn alpha(&self) -> f64;

    /// Total electric field at every particle position.
    fn electric_field(&self, x: &[Vec3], out: &mut [Vec3]);

    fn magnetic_field(&self, x: &Vec3) -> Vec3;

    /// True when `magnetic_field` does not depend on position.
    fn uniform_magnetic_field(&self) -> bool {
        false
    }

    /// `alpha (E + v x B)` for all particles.
    fn acceleration(&self, x: &[Vec3], v: &[Vec3], out: &mut [Vec3]) {
        self.electric_field(x, out);
        let a = self.alpha();
        for ((o, xi), vi) in out.iter_mut().zip(x).zip(v) {
            *o = a * (*o + vi.cross(&self.magnetic_field(xi)));
        }
    }
}

/// Ideal Penning trap, optionally with softened Coulomb interaction between the particles.
#[derive(Debug, Clone, PartialEq)]
pub struct PenningTrap {
    pub params: PenningParams,
    pub charge: Vec<f64>,
    pub lambda: f64,
    b: Vec3,
}

/// Particle count above which the O(N^2) Coulomb sum is split over threads.
#[cfg(feature = "parallel")]
const PARALLEL_COULOMB_MIN: usize = 256;

impl PenningTrap {
    /// Trap without particle interaction.
    pub fn external(params: PenningParams) -> Self {
        Self {
            params,
            charge: Vec::new(),
            lambda: 0.0,
            b: params.magnetic_field(),
        }
    }

    /// Trap plus Coulomb interaction between the ensemble's particles.
    pub fn with_coulomb(params: PenningParams, ensemble: &ParticleEnsemble) -> Self {
        Self {
            params,
            charge: ensemble.charge.clone(),
            lambda: ensemble.lambda,
            b: params.magnetic_field(),
        }
    }
}

impl ForceModel for PenningTrap {
    fn alpha(&self) -> f64 {
        self.params.alpha
    }

    fn electric_field(&self, x: &[Vec3], out: &mut [Vec3]) {
        let interacting = self.charge.len() == x.len() && x.len() > 1;
        #[cfg(feature = "parallel")]
        if interacting && x.len() >= PARALLEL_COULOMB_MIN {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(i, o)| {
                *o = e_ext(&self.params, &x[i]) + coulomb_field_at(x, &self.charge, self.lambda, i);
            });
            return;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = e_ext(&self.params, &x[i]);
            if interacting {
                *o += coulomb_field_at(x, &self.charge, self.lambda, i);
            }
        }
    }

    fn magnetic_field(&self, _x: &Vec3) -> Vec3 {
        self.b
    }

    fn uniform_magnetic_field(&self) -> bool {
        true
    }
}

/// No fields at all: particles drift on straight lines.
#[derive(Debug, Clone, Copy, Default)]
pub struct FreeSpace;

impl ForceModel for FreeSpace {
    fn alpha(&self) -> f64 {
        1.0
    }

    fn electric_field(&self, _x: &[Vec3], out: &mut [Vec3]) {
        out.fill(Vec3::zeros());
    }

    fn magnetic_field(&self, _x: &Vec3) -> Vec3 {
        Vec3::zeros()
    }

    fn uniform_magnetic_field(&self) -> bool {
        true
    }
}

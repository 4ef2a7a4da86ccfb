//! Node-to-node Boris-SDC sweep, Picard sweep, residual and end update.
//!
//! Node values are stored flat, `index = m * n_particles + i`. Positions are kept as
//! deviations from the step's initial position so the step increment comes out of the
//! sweep without cancellation.

use crate::boris::boris_velocity_update;
use crate::error::{Error, Result};
use crate::fields::ForceModel;
use crate::quadrature::QuadratureRule;
use crate::Vec3;

use super::ParticleState;

/// Node values of one iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeValues {
    /// `x_m - x_0`
    pub dx: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub f: Vec<Vec3>,
    pub e: Vec<Vec3>,
    pub b: Vec<Vec3>,
}

impl NodeValues {
    fn zeros(len: usize) -> Self {
        Self {
            dx: vec![Vec3::zeros(); len],
            v: vec![Vec3::zeros(); len],
            f: vec![Vec3::zeros(); len],
            e: vec![Vec3::zeros(); len],
            b: vec![Vec3::zeros(); len],
        }
    }
}

/// Per-step scratch: initial condition and node values at iterations k and k+1.
#[derive(Debug, Clone)]
pub struct SweepWorkspace {
    pub m: usize,
    pub n: usize,
    pub x0: Vec<Vec3>,
    pub v0: Vec<Vec3>,
    /// Iterate k.
    pub cur: NodeValues,
    /// Iterate k+1 (scratch).
    pub next: NodeValues,
    pub rhs_evals: u64,
    pos_buf: Vec<Vec3>,
    e_buf: Vec<Vec3>,
}

fn eval_fields<F: ForceModel + ?Sized>(
    model: &F,
    x0: &[Vec3],
    dx: &[Vec3],
    pos: &mut [Vec3],
    e_out: &mut [Vec3],
    b_out: &mut [Vec3],
) {
    for ((p, a), d) in pos.iter_mut().zip(x0).zip(dx) {
        *p = a + d;
    }
    model.electric_field(pos, e_out);
    for (b, p) in b_out.iter_mut().zip(pos.iter()) {
        *b = model.magnetic_field(p);
    }
}

#[inline]
fn lorentz(alpha: f64, e: &Vec3, v: &Vec3, b: &Vec3) -> Vec3 {
    alpha * (e + v.cross(b))
}

impl SweepWorkspace {
    pub fn new(m: usize, n: usize) -> Self {
        let len = (m + 1) * n;
        Self {
            m,
            n,
            x0: vec![Vec3::zeros(); n],
            v0: vec![Vec3::zeros(); n],
            cur: NodeValues::zeros(len),
            next: NodeValues::zeros(len),
            rhs_evals: 0,
            pos_buf: vec![Vec3::zeros(); n],
            e_buf: vec![Vec3::zeros(); n],
        }
    }

    #[inline]
    pub fn idx(&self, m: usize, i: usize) -> usize {
        m * self.n + i
    }

    /// Position of particle `i` at node `m` of the current iterate.
    pub fn position(&self, m: usize, i: usize) -> Vec3 {
        self.x0[i] + self.cur.dx[self.idx(m, i)]
    }

    pub fn velocity(&self, m: usize, i: usize) -> Vec3 {
        self.cur.v[self.idx(m, i)]
    }

    /// Positions of all particles at node `m`.
    pub fn node_positions(&self, m: usize) -> Vec<Vec3> {
        (0..self.n).map(|i| self.position(m, i)).collect()
    }

    pub fn node_velocities(&self, m: usize) -> Vec<Vec3> {
        (0..self.n).map(|i| self.velocity(m, i)).collect()
    }

    /// Copies the initial value to every node. `per_node` re-evaluates the force at each node
    /// instead of once, and counts the extra evaluations.
    pub fn initialize<F: ForceModel + ?Sized>(
        &mut self,
        u0: &ParticleState,
        model: &F,
        per_node: bool,
    ) {
        let n = self.n;
        assert_eq!(
            u0.len(),
            n,
            "workspace built for a different particle count"
        );
        self.x0.copy_from_slice(&u0.x);
        self.v0.copy_from_slice(&u0.v);
        let zeros = vec![Vec3::zeros(); n];
        let mut b = vec![Vec3::zeros(); n];
        eval_fields(
            model,
            &self.x0,
            &zeros,
            &mut self.pos_buf,
            &mut self.e_buf,
            &mut b,
        );
        self.rhs_evals += if per_node { (self.m + 1) as u64 } else { 1 };
        let alpha = model.alpha();
        for m in 0..=self.m {
            for i in 0..n {
                let k = m * n + i;
                self.cur.dx[k] = Vec3::zeros();
                self.cur.v[k] = self.v0[i];
                self.cur.e[k] = self.e_buf[i];
                self.cur.b[k] = b[i];
                self.cur.f[k] = lorentz(alpha, &self.e_buf[i], &self.v0[i], &b[i]);
            }
        }
        for i in 0..n {
            self.next.dx[i] = Vec3::zeros();
            self.next.v[i] = self.cur.v[i];
            self.next.e[i] = self.cur.e[i];
            self.next.b[i] = self.cur.b[i];
            self.next.f[i] = self.cur.f[i];
        }
    }

    fn check_finite(&self, nodes: &NodeValues, step: usize) -> Result<()> {
        let ok = nodes
            .dx
            .iter()
            .chain(&nodes.v)
            .all(|p| p.iter().all(|c| c.is_finite()));
        if ok {
            Ok(())
        } else {
            Err(Error::Divergence { step })
        }
    }

    /// One Boris-SDC sweep (node-to-node form). `step` only labels a divergence error.
    pub fn sdc_sweep<F: ForceModel + ?Sized>(
        &mut self,
        rule: &QuadratureRule,
        model: &F,
        step: usize,
    ) -> Result<()> {
        let (mm, n) = (self.m, self.n);
        debug_assert_eq!(rule.m, mm);
        let alpha = model.alpha();
        let uniform_b = model.uniform_magnetic_field();
        let mut b_tmp = vec![Vec3::zeros(); n];

        for m in 0..mm {
            let dtau = rule.dtau[m];
            // positions at node m+1: fully explicit
            for i in 0..n {
                let mut xi = self.next.dx[m * n + i] + dtau * self.v0[i];
                for l in 1..=m {
                    let w = rule.sx[(m + 1, l)];
                    if w != 0.0 {
                        let k = l * n + i;
                        xi += w * (self.next.f[k] - self.cur.f[k]);
                    }
                }
                for l in 1..=mm {
                    let w = rule.sq[(m + 1, l)];
                    if w != 0.0 {
                        xi += w * self.cur.f[l * n + i];
                    }
                }
                self.next.dx[(m + 1) * n + i] = xi;
            }
            let range = (m + 1) * n..(m + 2) * n;
            eval_fields(
                model,
                &self.x0,
                &self.next.dx[range.clone()],
                &mut self.pos_buf,
                &mut self.e_buf,
                &mut b_tmp,
            );
            self.rhs_evals += 1;

            for i in 0..n {
                let kp = (m + 1) * n + i;
                let k = m * n + i;
                let mut s_sum = Vec3::zeros();
                for l in 1..=mm {
                    let w = rule.s[(m + 1, l)];
                    if w != 0.0 {
                        s_sum += w * self.cur.f[l * n + i];
                    }
                }
                let b_new = if uniform_b { self.next.b[k] } else { b_tmp[i] };
                let v_new = if dtau > 0.0 {
                    let c = (s_sum - 0.5 * dtau * (self.cur.f[kp] + self.cur.f[k])) / dtau;
                    let e_mid = 0.5 * (self.next.e[k] + self.e_buf[i]);
                    boris_velocity_update(
                        &self.next.v[k],
                        dtau,
                        alpha,
                        &e_mid,
                        &self.next.b[k],
                        &b_new,
                        &c,
                    )
                } else {
                    self.next.v[k] + s_sum
                };
                self.next.v[kp] = v_new;
                self.next.e[kp] = self.e_buf[i];
                self.next.b[kp] = b_new;
                self.next.f[kp] = lorentz(alpha, &self.e_buf[i], &v_new, &b_new);
            }
        }
        self.check_finite(&self.next, step)?;
        self.swap_iterates();
        Ok(())
    }

    /// Plain Picard iteration `u^{k+1} = C u0 + Q_coll f(u^k)`.
    pub fn picard_sweep<F: ForceModel + ?Sized>(
        &mut self,
        rule: &QuadratureRule,
        model: &F,
        step: usize,
    ) -> Result<()> {
        let (mm, n) = (self.m, self.n);
        let alpha = model.alpha();
        for m in 1..=mm {
            let qsum: f64 = rule.q_mat.row(m).sum();
            for i in 0..n {
                let mut dx = qsum * self.v0[i];
                let mut v = self.v0[i];
                for l in 1..=mm {
                    let f = self.cur.f[l * n + i];
                    dx += rule.qq[(m, l)] * f;
                    v += rule.q_mat[(m, l)] * f;
                }
                self.next.dx[m * n + i] = dx;
                self.next.v[m * n + i] = v;
            }
        }
        let mut b_tmp = vec![Vec3::zeros(); n];
        for m in 1..=mm {
            let range = m * n..(m + 1) * n;
            eval_fields(
                model,
                &self.x0,
                &self.next.dx[range],
                &mut self.pos_buf,
                &mut self.e_buf,
                &mut b_tmp,
            );
            self.rhs_evals += 1;
            for i in 0..n {
                let k = m * n + i;
                self.next.e[k] = self.e_buf[i];
                self.next.b[k] = b_tmp[i];
                self.next.f[k] = lorentz(alpha, &self.e_buf[i], &self.next.v[k], &b_tmp[i]);
            }
        }
        self.check_finite(&self.next, step)?;
        self.swap_iterates();
        Ok(())
    }

    fn swap_iterates(&mut self) {
        std::mem::swap(&mut self.cur, &mut self.next);
        // node 0 of the scratch iterate always holds the initial value
        let n = self.n;
        self.next.dx[..n].copy_from_slice(&self.cur.dx[..n]);
        self.next.v[..n].copy_from_slice(&self.cur.v[..n]);
        self.next.e[..n].copy_from_slice(&self.cur.e[..n]);
        self.next.b[..n].copy_from_slice(&self.cur.b[..n]);
        self.next.f[..n].copy_from_slice(&self.cur.f[..n]);
    }

    /// Collocation defect of the current iterate: max over nodes 1..=M of the Euclidean norm
    /// (over all particles) of the position and velocity blocks, whichever is larger.
    pub fn residual_norm(&self, rule: &QuadratureRule) -> f64 {
        let (mm, n) = (self.m, self.n);
        let mut r = 0.0_f64;
        for m in 1..=mm {
            let qsum: f64 = rule.q_mat.row(m).sum();
            let mut rx2 = 0.0;
            let mut rv2 = 0.0;
            for i in 0..n {
                let mut rx = qsum * self.v0[i] - self.cur.dx[m * n + i];
                let mut rv = self.v0[i] - self.cur.v[m * n + i];
                for l in 1..=mm {
                    let f = self.cur.f[l * n + i];
                    rx += rule.qq[(m, l)] * f;
                    rv += rule.q_mat[(m, l)] * f;
                }
                rx2 += rx.norm_squared();
                rv2 += rv.norm_squared();
            }
            r = r.max(rx2.sqrt()).max(rv2.sqrt());
        }
        r
    }

    /// Collocation update to the step end from the current iterate's forces, returned as
    /// increments `(x_{n+1} - x_0, v_{n+1} - v_0)` per particle.
    pub fn end_update_increments(&self, rule: &QuadratureRule) -> (Vec<Vec3>, Vec<Vec3>) {
        let (mm, n) = (self.m, self.n);
        let qsum = rule.q_sum();
        let mut dx = Vec::with_capacity(n);
        let mut dv = Vec::with_capacity(n);
        for i in 0..n {
            let mut ax = qsum * self.v0[i];
            let mut av = Vec3::zeros();
            for l in 1..=mm {
                let f = self.cur.f[l * n + i];
                ax += rule.qq_end[l] * f;
                av += rule.q[l] * f;
            }
            dx.push(ax);
            dv.push(av);
        }
        (dx, dv)
    }

    /// Increments to the last node of the current iterate.
    pub fn last_node_increments(&self) -> (Vec<Vec3>, Vec<Vec3>) {
        let (mm, n) = (self.m, self.n);
        let dx = self.cur.dx[mm * n..].to_vec();
        let dv = (0..n)
            .map(|i| self.cur.v[mm * n + i] - self.v0[i])
            .collect();
        (dx, dv)
    }

    /// State at the step end by the collocation update.
    pub fn collocation_end_update(&self, rule: &QuadratureRule) -> ParticleState {
        let (dx, dv) = self.end_update_increments(rule);
        ParticleState {
            x: self.x0.iter().zip(&dx).map(|(a, d)| a + d).collect(),
            v: self.v0.iter().zip(&dv).map(|(a, d)| a + d).collect(),
        }
    }
}

//! Dense operators of the linear single-particle Penning problem, and the stability,
//! convergence and energy maps built from them.
//!
//! Node states are interleaved, `(x_0, v_0, x_1, v_1, ..., x_M, v_M)`, each block of
//! length six. Forces live on `(f_0, ..., f_M)`, blocks of length three.

use nalgebra::{DMatrix, Schur};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::fields::{physically_unstable, PenningParams, PenningTrap};
use crate::integrators::{classical_boris_step, EndPoint, ParticleState};
use crate::quadrature::{NodeFamily, QuadratureRule};
use crate::Vec3;

/// Points with spectral radius up to this value count as stable.
pub const STABILITY_SLACK: f64 = 1e-9;

/// `x`-selector `[1; 0]`.
fn sel_x() -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 1, &[1.0, 0.0])
}

/// `v`-selector `[0; 1]`.
fn sel_v() -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 1, &[0.0, 1.0])
}

/// `[[0, 1], [0, 0]]`: feeds velocities into position rows.
fn sel_xv() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])
}

fn kron3(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b).kronecker(&DMatrix::<f64>::identity(3, 3))
}

/// The 3x6 map from `(x, v)` to the acceleration.
pub fn acceleration_block(params: &PenningParams) -> DMatrix<f64> {
    let ke = -params.epsilon * params.omega_e * params.omega_e;
    let wb = params.omega_b;
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(3, 6, &[
        ke,  0.0, 0.0,        0.0, wb,  0.0,
        0.0, ke,  0.0,        -wb, 0.0, 0.0,
        0.0, 0.0, -2.0 * ke,  0.0, 0.0, 0.0,
    ]);
    a
}

/// The 6x6 state map `(x, v) -> (0, a(x, v))`.
pub fn build_linear_rhs(params: &PenningParams) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(6, 6);
    m.view_mut((3, 0), (3, 6))
        .copy_from(&acceleration_block(params));
    m
}

/// Energy quadratic form for a unit-mass particle.
pub fn energy_form(params: &PenningParams) -> DMatrix<f64> {
    let k = params.epsilon * params.omega_e * params.omega_e;
    DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[
        0.5 * k,
        0.5 * k,
        -k,
        0.5,
        0.5,
        0.5,
    ]))
}

/// Parameter-independent operators of one node set.
#[derive(Debug, Clone)]
pub struct CollocationStructure {
    pub m: usize,
    pub family: NodeFamily,
    /// `QQ (x) I_x + Q (x) I_v`, size 6(M+1) x 3(M+1).
    pub q_coll: DMatrix<f64>,
    /// `I + Q (x) I_xv`.
    pub c_coll: DMatrix<f64>,
    /// `Q_x (x) I_x + Q_T (x) I_v`.
    pub q_vv: DMatrix<f64>,
    /// `I + Q_E (x) I_xv`.
    pub c_vv: DMatrix<f64>,
    /// Copies a 6-state to every node.
    pub t_p: DMatrix<f64>,
    /// Picks the last node.
    pub t_r: DMatrix<f64>,
    /// `T_R + q^T (x) I_xv`.
    pub c_tilde: DMatrix<f64>,
    /// `(q^T Q) (x) I_x + q^T (x) I_v`.
    pub q_tilde: DMatrix<f64>,
}

impl CollocationStructure {
    pub fn new(rule: &QuadratureRule) -> Self {
        let n = rule.m + 1;
        let (ix, iv, ixv) = (sel_x(), sel_v(), sel_xv());
        let vm = &rule.verlet;
        let q_coll = kron3(&rule.qq, &ix) + kron3(&rule.q_mat, &iv);
        let c_coll = DMatrix::identity(6 * n, 6 * n) + kron3(&rule.q_mat, &ixv);
        let q_vv = kron3(&vm.qx, &ix) + kron3(&vm.qt, &iv);
        let c_vv = DMatrix::identity(6 * n, 6 * n) + kron3(&vm.qe, &ixv);
        let ones = DMatrix::from_element(n, 1, 1.0);
        let t_p = ones.kronecker(&DMatrix::<f64>::identity(6, 6));
        let mut last = DMatrix::zeros(1, n);
        last[(0, n - 1)] = 1.0;
        let t_r = last.kronecker(&DMatrix::<f64>::identity(6, 6));
        let q_row = rule.q.transpose();
        let qq_row = rule.qq_end.transpose();
        let c_tilde = &t_r + kron3(&DMatrix::from_row_slice(1, n, q_row.as_slice()), &ixv);
        let q_tilde = kron3(&DMatrix::from_row_slice(1, n, qq_row.as_slice()), &ix)
            + kron3(&DMatrix::from_row_slice(1, n, q_row.as_slice()), &iv);
        Self {
            m: rule.m,
            family: rule.family,
            q_coll,
            c_coll,
            q_vv,
            c_vv,
            t_p,
            t_r,
            c_tilde,
            q_tilde,
        }
    }

    pub fn size(&self) -> usize {
        6 * (self.m + 1)
    }

    /// `I_{M+1} (x) [A_x A_v]`.
    pub fn force_operator(&self, params: &PenningParams) -> DMatrix<f64> {
        DMatrix::<f64>::identity(self.m + 1, self.m + 1).kronecker(&acceleration_block(params))
    }

    /// Residual `max_j max_m max(|r_x|, |r_v|)` of node-state columns `u` against the
    /// collocation system with the copied initial values `C_coll T_P`.
    pub fn residual(&self, m_coll: &DMatrix<f64>, ct: &DMatrix<f64>, u: &DMatrix<f64>) -> f64 {
        let r = ct - m_coll * u;
        let mut out = 0.0_f64;
        for j in 0..r.ncols() {
            for node in 1..=self.m {
                let x = r.view((6 * node, j), (3, 1)).norm();
                let v = r.view((6 * node + 3, j), (3, 1)).norm();
                out = out.max(x).max(v);
            }
        }
        if r.iter().any(|x| !x.is_finite()) {
            f64::INFINITY
        } else {
            out
        }
    }

    /// Step update from node-state columns `u = U T_P`.
    pub fn end_update(
        &self,
        f: &DMatrix<f64>,
        u: &DMatrix<f64>,
        end_point: EndPoint,
    ) -> DMatrix<f64> {
        match end_point {
            EndPoint::LastNode => &self.t_r * u,
            EndPoint::Collocation => &self.c_tilde * &self.t_p + &self.q_tilde * (f * u),
        }
    }
}

/// Solves `a x = b` for block lower-triangular `a` with square diagonal blocks of size `bs`.
pub fn block_forward_substitution(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    bs: usize,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !n.is_multiple_of(bs) || a.ncols() != n || b.nrows() != n {
        return Err(Error::Numerical("block solve: inconsistent sizes".into()));
    }
    let mut x = DMatrix::zeros(n, b.ncols());
    for blk in 0..n / bs {
        let r0 = blk * bs;
        let mut rhs = b.rows(r0, bs).into_owned();
        if r0 > 0 {
            rhs -= a.view((r0, 0), (bs, r0)) * x.rows(0, r0);
        }
        let diag = a.view((r0, r0), (bs, bs)).into_owned();
        let sol = diag
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular diagonal block".into()))?;
        x.rows_mut(r0, bs).copy_from(&sol);
    }
    Ok(x)
}

fn dense_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical(format!("singular {what}")))
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::Numerical(
            "spectral radius of a non-square matrix".into(),
        ));
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Relative distance below which eigenvalues are treated as one (possibly defective) cluster.
pub const CLUSTER_TOL: f64 = 1e-6;

fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<nalgebra::Complex<f64>>> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite operator".into()));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numerical("eigenvalue iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Spectral radius robust against defective eigenvalues.
///
/// A Jordan block perturbed by rounding splits its eigenvalue by about the square root of
/// the perturbation, while the product of the split eigenvalues moves only by the
/// perturbation itself. Eigenvalues closer than `CLUSTER_TOL` are therefore grouped and
/// each group contributes the geometric mean of its moduli.
pub fn clustered_spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let ev = eigenvalues(a)?;
    let n = ev.len();
    // union-find over "close" pairs
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let scale = ev[i].norm().max(ev[j].norm()).max(1.0);
            if (ev[i] - ev[j]).norm() <= CLUSTER_TOL * scale {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut rho = 0.0_f64;
    for root in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| find(&mut parent, i) == root).collect();
        if members.is_empty() {
            continue;
        }
        let log_mean =
            members.iter().map(|&i| ev[i].norm().ln()).sum::<f64>() / members.len() as f64;
        rho = rho.max(log_mean.exp());
    }
    Ok(rho)
}

/// Spectral radius of a 6x6 step operator restricted to the modes that are bounded in
/// the exact dynamics: the transverse plane always, the axial pair only when the
/// electric field confines along z (or vanishes).
pub fn bounded_mode_radius(p: &DMatrix<f64>, params: &PenningParams) -> Result<f64> {
    let sub = |idx: &[usize]| DMatrix::from_fn(idx.len(), idx.len(), |i, j| p[(idx[i], idx[j])]);
    let mut rho = clustered_spectral_radius(&sub(&[0, 1, 3, 4]))?;
    if params.epsilon < 0.0 || params.omega_e == 0.0 {
        rho = rho.max(clustered_spectral_radius(&sub(&[2, 5]))?);
    }
    Ok(rho)
}

/// Full operator set of the linear problem for `k` sweeps.
#[derive(Debug, Clone)]
pub struct LinearSystemOperators {
    pub k: usize,
    pub end_point: EndPoint,
    pub structure: CollocationStructure,
    /// 3(M+1) x 6(M+1) force operator.
    pub f_rhs: DMatrix<f64>,
    pub m_coll: DMatrix<f64>,
    pub m_vv: DMatrix<f64>,
    pub k_sdc: DMatrix<f64>,
    /// `U_k = P^k_sdc T_P u_0`, as a 6(M+1) x 6(M+1) operator on copied node states.
    pub p_sdc_k: DMatrix<f64>,
    pub p_tilde_sdc: DMatrix<f64>,
    pub p_tilde_coll: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub h_hat: DMatrix<f64>,
}

impl LinearSystemOperators {
    pub fn q_coll(&self) -> &DMatrix<f64> {
        &self.structure.q_coll
    }

    pub fn c_coll(&self) -> &DMatrix<f64> {
        &self.structure.c_coll
    }

    pub fn q_vv(&self) -> &DMatrix<f64> {
        &self.structure.q_vv
    }

    pub fn c_vv(&self) -> &DMatrix<f64> {
        &self.structure.c_vv
    }
}

/// Builds every operator of the linear problem with `k` sweeps on `rule`.
pub fn assemble_operators(
    params: &PenningParams,
    rule: &QuadratureRule,
    k: usize,
    end_point: EndPoint,
) -> Result<LinearSystemOperators> {
    params.validate()?;
    if end_point == EndPoint::LastNode && rule.family != NodeFamily::GaussLobatto {
        return Err(Error::param(
            "end_point",
            "last-node result needs Gauss-Lobatto nodes",
        ));
    }
    let st = CollocationStructure::new(rule);
    let size = st.size();
    let f = st.force_operator(params);
    let id = DMatrix::<f64>::identity(size, size);
    let m_coll = &id - &st.q_coll * &f;
    let m_vv = &id - &st.q_vv * &f;
    let k_sdc = block_forward_substitution(&m_vv, &((&st.q_coll - &st.q_vv) * &f), 6)?;
    let g = block_forward_substitution(&m_vv, &st.c_coll, 6)?;
    let mut p = DMatrix::<f64>::identity(size, size);
    for _ in 0..k {
        p = &k_sdc * &p + &g;
    }
    let u_k = &p * &st.t_p;
    let p_tilde_sdc = st.end_update(&f, &u_k, end_point);
    let u_coll = dense_solve(&m_coll, &(&st.c_coll * &st.t_p), "collocation matrix")?;
    let p_tilde_coll = st.end_update(&f, &u_coll, end_point);
    let h = energy_form(params);
    let h_hat = p_tilde_sdc.transpose() * &h * &p_tilde_sdc - &h;
    Ok(LinearSystemOperators {
        k,
        end_point,
        structure: st,
        f_rhs: f,
        m_coll,
        m_vv,
        k_sdc,
        p_sdc_k: p,
        p_tilde_sdc,
        p_tilde_coll,
        h,
        h_hat,
    })
}

/// 6x6 propagation matrix of one classical Boris step.
pub fn classical_boris_matrix(params: &PenningParams, dt: f64) -> Result<DMatrix<f64>> {
    let trap = PenningTrap::external(*params);
    let mut out = DMatrix::zeros(6, 6);
    for j in 0..6 {
        let mut e = [0.0; 6];
        e[j] = 1.0;
        let s = ParticleState::single(Vec3::new(e[0], e[1], e[2]), Vec3::new(e[3], e[4], e[5]));
        let s = classical_boris_step(&s, dt, &trap)?;
        for i in 0..3 {
            out[(i, j)] = s.x[0][i];
            out[(i + 3, j)] = s.v[0][i];
        }
    }
    Ok(out)
}

/// Per-point operator work for maps on a fixed node set.
#[derive(Debug, Clone)]
pub struct PointAnalyzer {
    pub structure: CollocationStructure,
    pub end_point: EndPoint,
}

/// Step operator with the sweep count that produced it.
#[derive(Debug, Clone)]
pub struct SdcUpdate {
    pub p_tilde: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl PointAnalyzer {
    pub fn new(family: NodeFamily, m: usize, dt: f64, end_point: EndPoint) -> Result<Self> {
        let rule = QuadratureRule::new(family, m, 0.0, dt)?;
        if end_point == EndPoint::LastNode && family != NodeFamily::GaussLobatto {
            return Err(Error::param(
                "end_point",
                "last-node result needs Gauss-Lobatto nodes",
            ));
        }
        Ok(Self {
            structure: CollocationStructure::new(&rule),
            end_point,
        })
    }

    fn system(&self, params: &PenningParams) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let st = &self.structure;
        let f = st.force_operator(params);
        let id = DMatrix::<f64>::identity(st.size(), st.size());
        let m_coll = &id - &st.q_coll * &f;
        let m_vv = &id - &st.q_vv * &f;
        (f, m_coll, m_vv)
    }

    pub fn collocation_update(&self, params: &PenningParams) -> Result<DMatrix<f64>> {
        let st = &self.structure;
        let (f, m_coll, _) = self.system(params);
        let u = dense_solve(&m_coll, &(&st.c_coll * &st.t_p), "collocation matrix")?;
        Ok(st.end_update(&f, &u, self.end_point))
    }

    pub fn iteration_matrix(&self, params: &PenningParams) -> Result<DMatrix<f64>> {
        let st = &self.structure;
        let (f, _, m_vv) = self.system(params);
        block_forward_substitution(&m_vv, &((&st.q_coll - &st.q_vv) * &f), 6)
    }

    /// Sweeps until the residual over all unit initial states is at most `tol`, or `k_max`.
    pub fn sdc_update(&self, params: &PenningParams, tol: f64, k_max: usize) -> Result<SdcUpdate> {
        self.sweep_until(params, Some(tol), k_max)
    }

    pub fn sdc_update_fixed(&self, params: &PenningParams, k: usize) -> Result<SdcUpdate> {
        self.sweep_until(params, None, k)
    }

    fn sweep_until(
        &self,
        params: &PenningParams,
        tol: Option<f64>,
        k_max: usize,
    ) -> Result<SdcUpdate> {
        let st = &self.structure;
        let (f, m_coll, m_vv) = self.system(params);
        let k_sdc = block_forward_substitution(&m_vv, &((&st.q_coll - &st.q_vv) * &f), 6)?;
        let ct = &st.c_coll * &st.t_p;
        let g = block_forward_substitution(&m_vv, &ct, 6)?;
        let mut u = st.t_p.clone();
        let mut k = 0;
        let mut r = st.residual(&m_coll, &ct, &u);
        while k < k_max.max(1) {
            u = &k_sdc * &u + &g;
            k += 1;
            r = st.residual(&m_coll, &ct, &u);
            if tol.is_some_and(|t| r <= t) {
                break;
            }
            // a diverging iteration is already decided; stop before overflow
            if tol.is_some() && !(r < 1e100) {
                break;
            }
        }
        Ok(SdcUpdate {
            p_tilde: st.end_update(&f, &u, self.end_point),
            iterations: k,
            residual: r,
            converged: tol.is_none_or(|t| r <= t),
        })
    }
}

/// Axis-aligned grid over `(epsilon omega_E dt, omega_B dt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct MapGrid {
    pub eps_omega_e_min: f64,
    pub eps_omega_e_max: f64,
    pub n_eps_omega_e: usize,
    pub omega_b_min: f64,
    pub omega_b_max: f64,
    pub n_omega_b: usize,
}

impl Default for MapGrid {
    fn default() -> Self {
        Self {
            eps_omega_e_min: -4.0,
            eps_omega_e_max: 4.0,
            n_eps_omega_e: 201,
            omega_b_min: 0.0,
            omega_b_max: 20.0,
            n_omega_b: 201,
        }
    }
}

fn axis(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        lo
    } else if i == n - 1 {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

impl MapGrid {
    pub fn square(n: usize) -> Self {
        Self {
            n_eps_omega_e: n,
            n_omega_b: n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.eps_omega_e_min,
            self.eps_omega_e_max,
            self.omega_b_min,
            self.omega_b_max,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("grid", "bounds must be finite"));
        }
        if self.n_eps_omega_e == 0 || self.n_omega_b == 0 {
            return Err(Error::param("grid", "need at least one point per axis"));
        }
        if self.eps_omega_e_max < self.eps_omega_e_min || self.omega_b_max < self.omega_b_min {
            return Err(Error::param("grid", "upper bound below lower bound"));
        }
        if self.omega_b_min < 0.0 {
            return Err(Error::param("grid", "omega_B dt must be non-negative"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_eps_omega_e * self.n_omega_b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point `idx`, row-major with `omega_b` as the slow index.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let (j, i) = (idx / self.n_eps_omega_e, idx % self.n_eps_omega_e);
        (
            axis(
                self.eps_omega_e_min,
                self.eps_omega_e_max,
                self.n_eps_omega_e,
                i,
            ),
            axis(self.omega_b_min, self.omega_b_max, self.n_omega_b, j),
        )
    }
}

/// Trap parameters for a map point at unit step size.
pub fn point_params(eps_omega_e_dt: f64, omega_b_dt: f64) -> PenningParams {
    PenningParams {
        alpha: 1.0,
        omega_e: eps_omega_e_dt.abs(),
        omega_b: omega_b_dt,
        epsilon: if eps_omega_e_dt > 0.0 { 1.0 } else { -1.0 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointStatus {
    Ok,
    /// Residual tolerance not met within `K_max`.
    KmaxReached,
    /// Operator could not be formed or its eigenvalues not computed.
    Failed,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::KmaxReached => "kmax",
            Self::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapPoint {
    pub eps_omega_e_dt: f64,
    pub omega_b_dt: f64,
    pub value: f64,
    pub physical_stable: bool,
    /// Stable update (stability map), convergent iteration (convergence map) or
    /// energy-conserving update (energy map).
    pub numerical_stable: bool,
    pub iterations: usize,
    pub status: PointStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapMethod {
    ClassicalBoris,
    Collocation,
    BorisSdc { tol: f64, k_max: usize },
    FixedSweeps(usize),
}

/// Which quantity a map reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    Stability,
    Convergence,
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSettings {
    pub family: NodeFamily,
    pub m: usize,
    pub end_point: EndPoint,
    pub exec: Execution,
}

impl MapSettings {
    pub fn lobatto(m: usize) -> Self {
        Self {
            family: NodeFamily::GaussLobatto,
            m,
            end_point: EndPoint::LastNode,
            exec: Execution::default(),
        }
    }
}

fn failed(x: f64, y: f64) -> MapPoint {
    MapPoint {
        eps_omega_e_dt: x,
        omega_b_dt: y,
        value: f64::NAN,
        physical_stable: !physically_unstable(x, y),
        numerical_stable: false,
        iterations: 0,
        status: PointStatus::Failed,
    }
}

/// Step operator of `method` at one point plus its sweep count and status.
fn step_operator(
    an: Option<&PointAnalyzer>,
    params: &PenningParams,
    method: MapMethod,
) -> Result<(DMatrix<f64>, usize, PointStatus)> {
    let an = || an.ok_or_else(|| Error::Numerical("collocation structure missing".into()));
    match method {
        MapMethod::ClassicalBoris => Ok((classical_boris_matrix(params, 1.0)?, 1, PointStatus::Ok)),
        MapMethod::Collocation => Ok((an()?.collocation_update(params)?, 0, PointStatus::Ok)),
        MapMethod::BorisSdc { tol, k_max } => {
            let up = an()?.sdc_update(params, tol, k_max)?;
            let status = if up.converged {
                PointStatus::Ok
            } else {
                PointStatus::KmaxReached
            };
            Ok((up.p_tilde, up.iterations, status))
        }
        MapMethod::FixedSweeps(k) => {
            let up = an()?.sdc_update_fixed(params, k)?;
            Ok((up.p_tilde, up.iterations, PointStatus::Ok))
        }
    }
}

fn analyzer_for(settings: &MapSettings, method: MapMethod) -> Result<Option<PointAnalyzer>> {
    match method {
        MapMethod::ClassicalBoris => Ok(None),
        _ => Ok(Some(PointAnalyzer::new(
            settings.family,
            settings.m,
            1.0,
            settings.end_point,
        )?)),
    }
}

/// Spectral radius of the step operator (bounded modes) at every grid point.
pub fn stability_map(
    grid: &MapGrid,
    method: MapMethod,
    settings: &MapSettings,
) -> Result<Vec<MapPoint>> {
    grid.validate()?;
    let an = analyzer_for(settings, method)?;
    Ok(map_indexed(settings.exec, grid.len(), |idx| {
        let (x, y) = grid.point(idx);
        let params = point_params(x, y);
        let res = step_operator(an.as_ref(), &params, method)
            .and_then(|(p, it, st)| Ok((bounded_mode_radius(&p, &params)?, it, st)));
        match res {
            Ok((rho, iterations, status)) => MapPoint {
                eps_omega_e_dt: x,
                omega_b_dt: y,
                value: rho,
                physical_stable: params.physically_stable(),
                numerical_stable: rho <= 1.0 + STABILITY_SLACK,
                iterations,
                status,
            },
            Err(_) => failed(x, y),
        }
    }))
}

/// Spectral radius of the SDC iteration matrix at every grid point.
pub fn convergence_map(grid: &MapGrid, settings: &MapSettings) -> Result<Vec<MapPoint>> {
    grid.validate()?;
    let an = PointAnalyzer::new(settings.family, settings.m, 1.0, settings.end_point)?;
    Ok(map_indexed(settings.exec, grid.len(), |idx| {
        let (x, y) = grid.point(idx);
        let params = point_params(x, y);
        match an
            .iteration_matrix(&params)
            .and_then(|k| spectral_radius(&k))
        {
            Ok(rho) => MapPoint {
                eps_omega_e_dt: x,
                omega_b_dt: y,
                value: rho,
                physical_stable: params.physically_stable(),
                numerical_stable: rho < 1.0,
                iterations: 0,
                status: PointStatus::Ok,
            },
            Err(_) => failed(x, y),
        }
    }))
}

/// Largest diagonal entry of `P^T H P - H` in absolute value.
pub fn max_hhat_diagonal(p: &DMatrix<f64>, params: &PenningParams) -> f64 {
    let h = energy_form(params);
    let hh = p.transpose() * &h * p - &h;
    (0..6).map(|i| hh[(i, i)].abs()).fold(0.0, f64::max)
}

/// Energy-conservation threshold used to flag map points.
pub const ENERGY_CONSERVING: f64 = 1e-8;

/// `max |diag(P^T H P - H)|` for the method's step operator at every grid point.
pub fn energy_map(
    grid: &MapGrid,
    method: MapMethod,
    settings: &MapSettings,
) -> Result<Vec<MapPoint>> {
    grid.validate()?;
    let an = analyzer_for(settings, method)?;
    Ok(map_indexed(settings.exec, grid.len(), |idx| {
        let (x, y) = grid.point(idx);
        let params = point_params(x, y);
        match step_operator(an.as_ref(), &params, method) {
            Ok((p, iterations, status)) if p.iter().all(|v| v.is_finite()) => {
                let value = max_hhat_diagonal(&p, &params);
                MapPoint {
                    eps_omega_e_dt: x,
                    omega_b_dt: y,
                    value,
                    physical_stable: params.physically_stable(),
                    numerical_stable: value <= ENERGY_CONSERVING,
                    iterations,
                    status,
                }
            }
            _ => failed(x, y),
        }
    }))
}

/// Energy diagnostic of Boris-SDC run to residual tolerance `tol` (at most `k_max`
/// sweeps) for a step of length `dt`. A zero step is the identity map.
pub fn energy_diagnostic(
    params: &PenningParams,
    family: NodeFamily,
    m: usize,
    dt: f64,
    tol: f64,
    k_max: usize,
) -> Result<f64> {
    params.validate()?;
    if dt == 0.0 {
        return Ok(max_hhat_diagonal(&DMatrix::identity(6, 6), params));
    }
    let an = PointAnalyzer::new(family, m, dt, EndPoint::default_for(family))?;
    let up = an.sdc_update(params, tol, k_max)?;
    if up.p_tilde.iter().any(|v| !v.is_finite()) {
        return Ok(f64::INFINITY);
    }
    Ok(max_hhat_diagonal(&up.p_tilde, params))
}

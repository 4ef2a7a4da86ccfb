//! Collocation nodes and the quadrature matrices of one time step.
//!
//! All matrices are `(M+1) x (M+1)`: index 0 belongs to the step start `tau_0 = t_left`,
//! indices `1..=M` to the collocation nodes. Row and column 0 of `Q` are zero.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::verlet::VerletMatrices;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum NodeFamily {
    /// Gauss-Lobatto: contains both interval endpoints.
    #[serde(rename = "lobatto", alias = "gausslobatto", alias = "gauss-lobatto")]
    GaussLobatto,
    /// Gauss-Legendre: interior points only.
    #[serde(rename = "legendre", alias = "gausslegendre", alias = "gauss-legendre")]
    GaussLegendre,
}

impl NodeFamily {
    pub fn min_nodes(self) -> usize {
        match self {
            NodeFamily::GaussLobatto => 2,
            NodeFamily::GaussLegendre => 1,
        }
    }

    /// Highest polynomial degree integrated exactly by the full-interval weights.
    pub fn exactness_degree(self, m: usize) -> usize {
        match self {
            NodeFamily::GaussLobatto => 2 * m - 3,
            NodeFamily::GaussLegendre => 2 * m - 1,
        }
    }
}

impl std::str::FromStr for NodeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lobatto" | "gausslobatto" | "gauss-lobatto" => Ok(NodeFamily::GaussLobatto),
            "legendre" | "gausslegendre" | "gauss-legendre" => Ok(NodeFamily::GaussLegendre),
            other => Err(Error::param(
                "nodes",
                format!("unknown node family `{other}`"),
            )),
        }
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    // derivative from (1 - x^2) P_n' = n (P_{n-1} - x P_n), valid away from +-1
    let dp = if (1.0 - x * x).abs() > 1e-300 {
        n as f64 * (p_prev - x * p) / (1.0 - x * x)
    } else {
        let s = if x > 0.0 {
            1.0
        } else if n.is_multiple_of(2) {
            -1.0
        } else {
            1.0
        };
        s * (n * (n + 1)) as f64 / 2.0
    };
    (p, dp)
}

fn newton<F: Fn(f64) -> (f64, f64)>(mut x: f64, g: F) -> f64 {
    for _ in 0..NEWTON_MAX_ITER {
        let (val, der) = g(x);
        let dx = val / der;
        x -= dx;
        if dx.abs() <= NEWTON_TOL {
            break;
        }
    }
    x
}

/// Gauss-Legendre points on [-1, 1], ascending.
pub fn gauss_legendre_points(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        2 => {
            let a = (1.0_f64 / 3.0).sqrt();
            vec![-a, a]
        }
        3 => {
            let a = 0.6_f64.sqrt();
            vec![-a, 0.0, a]
        }
        _ => {
            let mut pts: Vec<f64> = (1..=n)
                .map(|i| {
                    let guess = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
                    newton(guess, |x| legendre(n, x))
                })
                .collect();
            pts.sort_by(|a, b| a.total_cmp(b));
            symmetrize(&mut pts);
            pts
        }
    }
}

/// Gauss-Legendre points and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pts = gauss_legendre_points(n);
    let w = pts
        .iter()
        .map(|&x| {
            let (_, dp) = legendre(n, x);
            2.0 / ((1.0 - x * x) * dp * dp)
        })
        .collect();
    (pts, w)
}

/// Gauss-Lobatto points on [-1, 1], ascending, endpoints included.
pub fn gauss_lobatto_points(m: usize) -> Vec<f64> {
    match m {
        0 | 1 => vec![],
        2 => vec![-1.0, 1.0],
        3 => vec![-1.0, 0.0, 1.0],
        _ => {
            let n = m - 1;
            let nf = n as f64;
            let mut interior: Vec<f64> = (1..n)
                .map(|i| {
                    let guess = (std::f64::consts::PI * i as f64 / nf).cos();
                    newton(guess, |x| {
                        let (p, dp) = legendre(n, x);
                        let ddp = (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x);
                        (dp, ddp)
                    })
                })
                .collect();
            interior.sort_by(|a, b| a.total_cmp(b));
            let mut pts = Vec::with_capacity(m);
            pts.push(-1.0);
            pts.extend(interior);
            pts.push(1.0);
            symmetrize(&mut pts);
            pts
        }
    }
}

// Enforce exact point symmetry about the origin.
fn symmetrize(pts: &mut [f64]) {
    let n = pts.len();
    for i in 0..n / 2 {
        let a = 0.5 * (pts[n - 1 - i] - pts[i]);
        pts[i] = -a;
        pts[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        pts[n / 2] = 0.0;
    }
}

fn check_interval(family: NodeFamily, m: usize, t_left: f64, t_right: f64) -> Result<()> {
    if m < family.min_nodes() {
        return Err(Error::param(
            "M",
            format!(
                "{family:?} needs at least {} nodes, got {m}",
                family.min_nodes()
            ),
        ));
    }
    if !(t_left.is_finite() && t_right.is_finite()) || t_right <= t_left {
        return Err(Error::param(
            "interval",
            format!("need finite t_right > t_left, got [{t_left}, {t_right}]"),
        ));
    }
    Ok(())
}

/// Nodes on the unit interval [0, 1].
fn unit_nodes(family: NodeFamily, m: usize) -> Vec<f64> {
    let pts = match family {
        NodeFamily::GaussLobatto => gauss_lobatto_points(m),
        NodeFamily::GaussLegendre => gauss_legendre_points(m),
    };
    let mut c: Vec<f64> = pts.iter().map(|s| 0.5 * (s + 1.0)).collect();
    if family == NodeFamily::GaussLobatto {
        c[0] = 0.0;
        c[m - 1] = 1.0;
    }
    c
}

/// Returns `(tau_0, tau_1, ..., tau_M)` with `tau_0 = t_left`.
pub fn make_nodes(family: NodeFamily, m: usize, t_left: f64, t_right: f64) -> Result<Vec<f64>> {
    check_interval(family, m, t_left, t_right)?;
    let dt = t_right - t_left;
    let mut taus = Vec::with_capacity(m + 1);
    taus.push(t_left);
    for c in unit_nodes(family, m) {
        taus.push(t_left + c * dt);
    }
    if family == NodeFamily::GaussLobatto {
        taus[1] = t_left;
        taus[m] = t_right;
    }
    Ok(taus)
}

fn lagrange_basis(nodes: &[f64], j: usize, s: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != j)
        .map(|(_, &cl)| (s - cl) / (nodes[j] - cl))
        .product()
}

/// Integrals of the Lagrange basis over [0, upper] on the unit interval.
fn integrate_basis(nodes: &[f64], upper: f64, gl: &(Vec<f64>, Vec<f64>)) -> Vec<f64> {
    let half = 0.5 * upper;
    (0..nodes.len())
        .map(|j| {
            gl.0.iter()
                .zip(&gl.1)
                .map(|(&x, &w)| w * lagrange_basis(nodes, j, half * (x + 1.0)))
                .sum::<f64>()
                * half
        })
        .collect()
}

/// Node set and every weight matrix needed for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub family: NodeFamily,
    pub m: usize,
    pub t_left: f64,
    pub t_right: f64,
    /// `tau_0 .. tau_M`
    pub taus: Vec<f64>,
    /// `dtau[m-1] = tau_m - tau_{m-1}` for `m = 1..=M`
    pub dtau: Vec<f64>,
    pub q_mat: DMatrix<f64>,
    pub qq: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub sx: DMatrix<f64>,
    pub sq: DMatrix<f64>,
    /// Full-interval weights, entry 0 is zero.
    pub q: DVector<f64>,
    /// `q^T Q`, the weights of the position end update.
    pub qq_end: DVector<f64>,
    pub verlet: VerletMatrices,
}

/// First-difference operator: row m of `D A` is row m minus row m-1 of `A`, row 0 is zero.
pub fn row_differences(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for m in 1..a.nrows() {
        let row = a.row(m) - a.row(m - 1);
        d.set_row(m, &row);
    }
    d
}

/// Assembles the rule on `[t_left, t_right]` using Verlet matrices built on the same nodes.
pub fn build_rule(
    family: NodeFamily,
    m: usize,
    t_left: f64,
    t_right: f64,
    verlet: &VerletMatrices,
) -> Result<QuadratureRule> {
    let taus = make_nodes(family, m, t_left, t_right)?;
    if verlet.qe.nrows() != m + 1 {
        return Err(Error::param(
            "verlet",
            format!("built for {} nodes, rule has {m}", verlet.qe.nrows() - 1),
        ));
    }
    let same = verlet
        .taus
        .iter()
        .zip(&taus)
        .all(|(a, b)| (a - b).abs() <= 1e-14 * (1.0 + b.abs()));
    if !same {
        return Err(Error::param("verlet", "built on different nodes"));
    }

    let dt = t_right - t_left;
    let nodes = unit_nodes(family, m);
    let gl = gauss_legendre(m.div_ceil(2));

    let mut q_mat = DMatrix::zeros(m + 1, m + 1);
    for (row, &c) in nodes.iter().enumerate() {
        for (j, w) in integrate_basis(&nodes, c, &gl).into_iter().enumerate() {
            q_mat[(row + 1, j + 1)] = w * dt;
        }
    }
    let mut q = DVector::zeros(m + 1);
    for (j, w) in integrate_basis(&nodes, 1.0, &gl).into_iter().enumerate() {
        q[j + 1] = w * dt;
    }
    if family == NodeFamily::GaussLobatto {
        // the first node coincides with t_left
        q_mat.row_mut(1).fill(0.0);
    }

    let qq = &q_mat * &q_mat;
    let qq_end = q_mat.tr_mul(&q);
    let s = row_differences(&q_mat);
    let sx = row_differences(&verlet.qx);
    let sq = row_differences(&qq);
    let dtau = taus.windows(2).map(|w| w[1] - w[0]).collect();

    Ok(QuadratureRule {
        family,
        m,
        t_left,
        t_right,
        taus,
        dtau,
        q_mat,
        qq,
        s,
        sx,
        sq,
        q,
        qq_end,
        verlet: verlet.clone(),
    })
}

impl QuadratureRule {
    /// Builds nodes, Verlet matrices and the rule in one go.
    pub fn new(family: NodeFamily, m: usize, t_left: f64, t_right: f64) -> Result<Self> {
        let taus = make_nodes(family, m, t_left, t_right)?;
        let verlet = VerletMatrices::new(&taus)?;
        build_rule(family, m, t_left, t_right, &verlet)
    }

    pub fn dt(&self) -> f64 {
        self.t_right - self.t_left
    }

    /// Sum of the full-interval weights (equals the step length up to rounding).
    pub fn q_sum(&self) -> f64 {
        self.q.sum()
    }
}

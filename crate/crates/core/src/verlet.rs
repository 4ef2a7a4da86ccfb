//! Composite velocity-Verlet propagation matrices over the node grid.
//!
//! Stepping velocity-Verlet through `tau_0, ..., tau_M` gives, node-wise,
//!
//! ```text
//! v = v0 + QT f,      x = x0 + QE v0 + Qx f,
//! ```
//!
//! with `QT = (QE + QI) / 2` and `Qx = QE QT + (QE o QE) / 2` (`o` is the entrywise product).
//! These are the preconditioner matrices of the SDC sweep.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct VerletMatrices {
    pub taus: Vec<f64>,
    /// Explicit Euler.
    pub qe: DMatrix<f64>,
    /// Implicit Euler.
    pub qi: DMatrix<f64>,
    /// Trapezoidal rule.
    pub qt: DMatrix<f64>,
    /// Position update.
    pub qx: DMatrix<f64>,
}

impl VerletMatrices {
    pub fn new(taus: &[f64]) -> Result<Self> {
        if taus.len() < 2 {
            return Err(Error::param("taus", "need at least tau_0 and one node"));
        }
        if taus.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("taus", "non-finite node"));
        }
        if taus.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("taus", "nodes must be non-decreasing"));
        }
        let n = taus.len();
        let mut qe = DMatrix::zeros(n, n);
        let mut qi = DMatrix::zeros(n, n);
        for m in 1..n {
            for l in 1..=m {
                let d = taus[l] - taus[l - 1];
                qe[(m, l - 1)] = d;
                qi[(m, l)] = d;
            }
        }
        let qt = (&qe + &qi) * 0.5;
        let qx = &qe * &qt + qe.component_mul(&qe) * 0.5;
        Ok(Self {
            taus: taus.to_vec(),
            qe,
            qi,
            qt,
            qx,
        })
    }

    pub fn nodes(&self) -> usize {
        self.taus.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_node_lobatto_pattern() {
        let dt = 0.25;
        let v = VerletMatrices::new(&[0.0, 0.0, dt]).unwrap();
        let qe = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, dt, 0.0]);
        assert_eq!(v.qe, qe);
        assert_eq!(
            v.qt.row(2).iter().copied().collect::<Vec<_>>(),
            vec![0.0, dt / 2.0, dt / 2.0]
        );
        assert_eq!(
            v.qx.row(2).iter().copied().collect::<Vec<_>>(),
            vec![0.0, dt * dt / 2.0, 0.0]
        );
    }

    #[test]
    fn equidistant_explicit_euler() {
        let h = 0.1;
        let v = VerletMatrices::new(&[0.0, h, 2.0 * h]).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, h, 0.0, 0.0, h, h, 0.0]);
        assert_eq!(v.qe, expect);
    }

    #[test]
    fn coincident_nodes_give_zero_matrices() {
        let v = VerletMatrices::new(&[1.0; 4]).unwrap();
        for m in [&v.qe, &v.qi, &v.qt, &v.qx] {
            assert!(m.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn decreasing_nodes_rejected() {
        assert!(VerletMatrices::new(&[0.0, 0.5, 0.4]).is_err());
    }

    #[test]
    fn triangular_structure_and_row_sums() {
        let taus = [0.2, 0.2, 0.31, 0.7, 0.95, 1.2];
        let v = VerletMatrices::new(&taus).unwrap();
        let n = taus.len();
        for i in 0..n {
            for j in 0..n {
                if j >= i {
                    assert_eq!(v.qe[(i, j)], 0.0);
                    assert_eq!(v.qx[(i, j)], 0.0);
                }
                if j > i {
                    assert_eq!(v.qi[(i, j)], 0.0);
                    assert_eq!(v.qt[(i, j)], 0.0);
                }
            }
            assert_eq!(v.qi[(0, i)], 0.0);
            let rs: f64 = v.qe.row(i).sum();
            assert_relative_eq!(rs, taus[i] - taus[0], epsilon = 1e-15, max_relative = 1e-13);
        }
    }

    #[test]
    fn constant_force_matches_recursive_verlet() {
        // random-ish spacings; f constant so x_{m+1} = x_m + d (v_m + d/2 f), v_{m+1} = v_m + d f
        let taus = [0.0, 0.013, 0.17, 0.171, 0.5, 0.93];
        let v = VerletMatrices::new(&taus).unwrap();
        let (x0, v0, f) = (0.7, -1.3, 2.9);
        let (mut x, mut vel) = (x0, v0);
        for m in 1..taus.len() {
            let d = taus[m] - taus[m - 1];
            x += d * (vel + 0.5 * d * f);
            vel += d * f;
            let xm = x0 + v.qe.row(m).sum() * v0 + v.qx.row(m).sum() * f;
            let vm = v0 + v.qt.row(m).sum() * f;
            assert_relative_eq!(xm, x, max_relative = 1e-13);
            assert_relative_eq!(vm, vel, max_relative = 1e-13);
        }
    }
}

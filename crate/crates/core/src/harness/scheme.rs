use crate::error::Result;
use crate::integrators::{EndPoint, IterationMode, Method, Precision, StepConfig, Sweeper};
use crate::quadrature::{NodeFamily, QuadratureRule};

/// Residual tolerance used when the collocation solution itself is requested.
pub const COLLOCATION_TOL: f64 = 1e-12;
pub const COLLOCATION_K_MAX: usize = 100;

/// A time-stepping method with everything but the step size fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    ClassicalBoris,
    VelocityVerlet,
    Sweeps {
        sweeper: Sweeper,
        family: NodeFamily,
        m: usize,
        k: usize,
    },
    Tolerance {
        sweeper: Sweeper,
        family: NodeFamily,
        m: usize,
        tol: f64,
        k_max: usize,
    },
}

impl Scheme {
    pub fn sdc(m: usize, k: usize) -> Self {
        Self::Sweeps {
            sweeper: Sweeper::BorisSdc,
            family: NodeFamily::GaussLobatto,
            m,
            k,
        }
    }

    pub fn sdc_tol(m: usize, tol: f64, k_max: usize) -> Self {
        Self::Tolerance {
            sweeper: Sweeper::BorisSdc,
            family: NodeFamily::GaussLobatto,
            m,
            tol,
            k_max,
        }
    }

    pub fn collocation(family: NodeFamily, m: usize) -> Self {
        Self::Tolerance {
            sweeper: Sweeper::BorisSdc,
            family,
            m,
            tol: COLLOCATION_TOL,
            k_max: COLLOCATION_K_MAX,
        }
    }

    /// Short name used in tables and file names, e.g. `M3K2` or `M5tol1e-6`.
    pub fn label(&self) -> String {
        let prefix = |sweeper: &Sweeper, family: &NodeFamily| {
            let mut p = String::new();
            if *sweeper == Sweeper::Picard {
                p.push_str("picard-");
            }
            if *family == NodeFamily::GaussLegendre {
                p.push_str("leg-");
            }
            p
        };
        match self {
            Self::ClassicalBoris => "boris".into(),
            Self::VelocityVerlet => "verlet".into(),
            Self::Sweeps {
                sweeper,
                family,
                m,
                k,
            } => format!("{}M{m}K{k}", prefix(sweeper, family)),
            Self::Tolerance {
                sweeper,
                family,
                m,
                tol,
                ..
            } => format!("{}M{m}tol{tol:e}", prefix(sweeper, family)),
        }
    }

    pub fn nodes(&self) -> Option<usize> {
        match self {
            Self::Sweeps { m, .. } | Self::Tolerance { m, .. } => Some(*m),
            _ => None,
        }
    }

    pub fn sweeps(&self) -> Option<usize> {
        match self {
            Self::ClassicalBoris | Self::VelocityVerlet => Some(1),
            Self::Sweeps { k, .. } => Some(*k),
            Self::Tolerance { .. } => None,
        }
    }

    pub fn tolerance(&self) -> Option<f64> {
        match self {
            Self::Tolerance { tol, .. } => Some(*tol),
            _ => None,
        }
    }

    pub fn method(&self, dt: f64, precision: Precision) -> Result<Method> {
        let cfg = |sweeper: Sweeper,
                   family: NodeFamily,
                   m: usize,
                   mode: IterationMode|
         -> Result<Method> {
            let rule = QuadratureRule::new(family, m, 0.0, dt)?;
            let cfg = StepConfig::new(rule, mode)?
                .with_precision(precision)
                .with_sweeper(sweeper)
                .with_end_point(EndPoint::default_for(family))?;
            Ok(Method::Iterated(cfg))
        };
        match *self {
            Self::ClassicalBoris => Ok(Method::ClassicalBoris),
            Self::VelocityVerlet => Ok(Method::VelocityVerlet),
            Self::Sweeps {
                sweeper,
                family,
                m,
                k,
            } => cfg(sweeper, family, m, IterationMode::FixedIterations(k)),
            Self::Tolerance {
                sweeper,
                family,
                m,
                tol,
                k_max,
            } => cfg(
                sweeper,
                family,
                m,
                IterationMode::ResidualTolerance { tol, k_max },
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(Scheme::ClassicalBoris.label(), "boris");
        assert_eq!(Scheme::sdc(3, 2).label(), "M3K2");
        assert_eq!(Scheme::sdc_tol(5, 1e-6, 50).label(), "M5tol1e-6");
        let p = Scheme::Sweeps {
            sweeper: Sweeper::Picard,
            family: NodeFamily::GaussLegendre,
            m: 4,
            k: 3,
        };
        assert_eq!(p.label(), "picard-leg-M4K3");
    }

    #[test]
    fn methods_build() {
        assert!(matches!(
            Scheme::sdc(3, 2).method(0.1, Precision::Standard).unwrap(),
            Method::Iterated(_)
        ));
        assert!(Scheme::sdc(1, 2).method(0.1, Precision::Standard).is_err());
        let c = Scheme::collocation(NodeFamily::GaussLegendre, 3)
            .method(0.1, Precision::Standard)
            .unwrap();
        match c {
            Method::Iterated(cfg) => assert_eq!(cfg.end_point, EndPoint::Collocation),
            _ => panic!("expected iterated method"),
        }
    }
}

//! Post-processing: order fits, energy envelopes and drift detection.

/// Errors at or above this are treated as a diverged run.
pub const DIVERGED_ERROR: f64 = 1.0;
/// Errors below this are dominated by rounding and left out of order fits.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;
/// Largest per-step slope of the energy envelope that still counts as "no drift".
pub const DRIFT_THRESHOLD: f64 = 1e-14;

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    /// Estimated order, i.e. the slope of log(error) against log(dt).
    pub order: f64,
    pub points: usize,
}

/// Fits log(error) against log(dt) over the points that are neither diverged nor at the
/// rounding floor. Needs at least two such points.
pub fn fit_order(dt: &[f64], err: &[f64]) -> Option<OrderFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = dt
        .iter()
        .zip(err)
        .filter(|(h, e)| {
            h.is_finite()
                && **h > 0.0
                && e.is_finite()
                && **e < DIVERGED_ERROR
                && **e > ROUNDOFF_FLOOR
        })
        .map(|(h, e)| (h.ln(), e.ln()))
        .unzip();
    least_squares_slope(&lx, &ly).map(|order| OrderFit {
        order,
        points: lx.len(),
    })
}

/// Running maximum of `values`.
pub fn running_max(values: &[f64]) -> Vec<f64> {
    let mut m = f64::NEG_INFINITY;
    values
        .iter()
        .map(|v| {
            m = m.max(*v);
            m
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftReport {
    /// Slope per step of the running-max error over the second half of the run.
    pub slope: f64,
    pub max_error: f64,
    pub drifting: bool,
}

/// Drift test on a per-step relative energy error series `err` at steps `step`.
pub fn drift_test(step: &[f64], err: &[f64]) -> DriftReport {
    let env = running_max(err);
    let half = step.len() / 2;
    let slope = least_squares_slope(&step[half..], &env[half..]).unwrap_or(0.0);
    DriftReport {
        slope,
        max_error: env.last().copied().unwrap_or(0.0),
        drifting: slope.abs() >= DRIFT_THRESHOLD,
    }
}

/// First index at or after `from` where `|ratio - 1| > threshold`.
pub fn drift_onset(ratio: &[f64], from: usize, threshold: f64) -> Option<usize> {
    ratio
        .iter()
        .enumerate()
        .skip(from)
        .find(|(_, r)| !((**r - 1.0).abs() <= threshold))
        .map(|(i, _)| i)
}

/// Log-log interpolation of the cost needed to reach `target` along a work-precision
/// curve, given as `(cost, error)` pairs in increasing cost. `None` when never reached.
pub fn cost_at_error(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .copied()
        .filter(|(c, e)| *c > 0.0 && e.is_finite() && *e > 0.0)
        .collect();
    for (i, &(c, e)) in pts.iter().enumerate() {
        if e <= target {
            if i == 0 {
                return Some(c);
            }
            let (c0, e0) = pts[i - 1];
            if e0 <= target {
                return Some(c0);
            }
            let t = (target.ln() - e0.ln()) / (e.ln() - e0.ln());
            return Some((c0.ln() + t * (c.ln() - c0.ln())).exp());
        }
    }
    None
}

use crate::error::{Error, Result};

/// Sum-of-events curve of one pixel sampled over one exposure interval,
/// together with the composite trapezoid weights of its sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl Trajectory {
    /// `times` must be strictly increasing with at least two samples.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension {
                expected: times.len(),
                actual: values.len(),
            });
        }
        if times.len() < 2 {
            return Err(Error::Validation(
                "a trajectory needs at least two samples".into(),
            ));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Validation("trajectory contains non-finite values".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "trajectory sample times must be strictly increasing".into(),
            ));
        }
        let weights = trapezoid_weights(&times);
        Ok(Self {
            times,
            values,
            weights,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid weights `c_l`, so that `sum_l c_l f(t_l)` integrates `f`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn span(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_{l,m} (E_l - E_m)^2 / 2`, the curvature bound of the log-kernel.
    pub fn half_squared_range(&self) -> f64 {
        let range = self.max_value() - self.min_value();
        0.5 * range * range
    }

    /// Largest magnitude reached by the curve.
    pub fn max_abs(&self) -> f64 {
        self.min_value().abs().max(self.max_value())
    }
}

fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for l in 1..n {
        let half = 0.5 * (times[l] - times[l - 1]);
        w[l - 1] += half;
        w[l] += half;
    }
    w
}

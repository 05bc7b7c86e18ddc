//! Log-kernel `g(z)` of the exposure model and its derivatives, evaluated by
//! trapezoid quadrature over sampled sum-of-events curves.
//!
//! For image `i`, `g_i(z_i) = ln( (1/|I_i|) * int exp(z_i E_i(t)) dt )`. All
//! exponentials are shifted by `max_l z_i E_i(t_l)` before summation; the
//! shift cancels in every ratio and is added back to `g` in log space.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::events::{CompressedCube, FrameSequence, LogFrames, Trajectory};

/// Everything the optimization of one pixel needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelProblem {
    d: DVector<f64>,
    trajectories: Vec<Trajectory>,
    lambda1: f64,
    lambda2: f64,
    event_sums: Vec<f64>,
}

impl PixelProblem {
    pub fn new(d: Vec<f64>, trajectories: Vec<Trajectory>, lambda1: f64, lambda2: f64) -> Result<Self> {
        let n = d.len();
        if n < 2 {
            return Err(Error::Parameter(format!("need at least 2 images, got {n}")));
        }
        if trajectories.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: trajectories.len(),
            });
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("log intensities must be finite".into()));
        }
        check_lambda("lambda1", lambda1)?;
        check_lambda("lambda2", lambda2)?;
        Ok(Self {
            d: DVector::from_vec(d),
            trajectories,
            lambda1,
            lambda2,
            event_sums: vec![0.0; n - 1],
        })
    }

    /// Attaches the signed event counts between consecutive reference times,
    /// used only by the scalar-threshold baseline.
    pub fn with_event_sums(mut self, sums: Vec<f64>) -> Result<Self> {
        if sums.len() != self.len() - 1 {
            return Err(Error::Dimension {
                expected: self.len() - 1,
                actual: sums.len(),
            });
        }
        self.event_sums = sums;
        Ok(self)
    }

    /// Collects pixel `(x, y)` from a prepared dataset.
    pub fn from_dataset(
        cube: &CompressedCube,
        frames: &FrameSequence,
        logs: &LogFrames,
        x: usize,
        y: usize,
        lambda1: f64,
        lambda2: f64,
    ) -> Result<Self> {
        let n = frames.len();
        let trajectories = (0..n)
            .map(|i| crate::events::pixel_event_trajectory(cube, frames, x, y, i))
            .collect::<Result<Vec<_>>>()?;
        let sums = (0..n - 1)
            .map(|i| {
                cube.event_sum_between(x, y, frames.reference_time(i), frames.reference_time(i + 1))
            })
            .collect();
        Self::new(logs.pixel(x, y), trajectories, lambda1, lambda2)?.with_event_sums(sums)
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn event_sums(&self) -> &[f64] {
        &self.event_sums
    }

    pub fn with_lambda1(&self, lambda1: f64) -> Result<Self> {
        check_lambda("lambda1", lambda1)?;
        Ok(Self {
            lambda1,
            ..self.clone()
        })
    }

    fn check_z(&self, z: &DVector<f64>) -> Result<()> {
        if z.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                actual: z.len(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("z must be finite".into()));
        }
        Ok(())
    }
}

fn check_lambda(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive, got {value}")))
    }
}

/// `g`, `g'` and `g''` at one `z`. The derivatives are the diagonals of the
/// (diagonal) Jacobian and per-slice Hessian of `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEval {
    pub g: DVector<f64>,
    pub g_prime: DVector<f64>,
    pub g_double_prime: DVector<f64>,
}

/// Moments of `exp(z E)` under the trapezoid rule for one image.
struct Moments {
    log_mean: f64,
    mean: f64,
    variance: f64,
}

fn moments(tr: &Trajectory, z: f64) -> Moments {
    let e = tr.values();
    let w = tr.weights();
    let shift = e.iter().map(|&v| z * v).fold(f64::NEG_INFINITY, f64::max);
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let weighted: Vec<f64> = e
        .iter()
        .zip(w)
        .map(|(&v, &c)| {
            let wl = c * (z * v - shift).exp();
            s0 += wl;
            s1 += wl * v;
            wl
        })
        .collect();
    let mean = s1 / s0;
    // centered second moment; algebraically (S0 S2 - S1^2) / S0^2
    let variance = weighted
        .iter()
        .zip(e)
        .map(|(&wl, &v)| wl * (v - mean) * (v - mean))
        .sum::<f64>()
        / s0;
    Moments {
        log_mean: shift + (s0 / tr.span()).ln(),
        mean,
        variance: variance.max(0.0),
    }
}

pub fn eval_kernel(problem: &PixelProblem, z: &DVector<f64>) -> Result<KernelEval> {
    problem.check_z(z)?;
    let n = problem.len();
    let mut g = DVector::zeros(n);
    let mut g_prime = DVector::zeros(n);
    let mut g_double_prime = DVector::zeros(n);
    for (i, tr) in problem.trajectories.iter().enumerate() {
        let m = moments(tr, z[i]);
        g[i] = m.log_mean;
        g_prime[i] = m.mean;
        g_double_prime[i] = m.variance;
    }
    Ok(KernelEval {
        g,
        g_prime,
        g_double_prime,
    })
}

pub fn eval_g(problem: &PixelProblem, z: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(eval_kernel(problem, z)?.g)
}

pub fn eval_g_prime(problem: &PixelProblem, z: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(eval_kernel(problem, z)?.g_prime)
}

pub fn eval_g_double_prime(problem: &PixelProblem, z: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(eval_kernel(problem, z)?.g_double_prime)
}

/// `b_i = (d_{i+1} - g_{i+1}) - (d_i - g_i)` from a precomputed `g`.
pub fn b_from_g(d: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
    let n = d.len();
    DVector::from_fn(n - 1, |i, _| (d[i + 1] - g[i + 1]) - (d[i] - g[i]))
}

pub fn eval_b(problem: &PixelProblem, z: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(b_from_g(&problem.d, &eval_g(problem, z)?))
}

/// Jacobian of `b` given `g'`: row `i` holds `g'_i` at column `i` and
/// `-g'_{i+1}` at column `i + 1`.
pub fn b_prime_from_g_prime(g_prime: &DVector<f64>) -> DMatrix<f64> {
    let n = g_prime.len();
    let mut jac = DMatrix::zeros(n - 1, n);
    for i in 0..n - 1 {
        jac[(i, i)] = g_prime[i];
        jac[(i, i + 1)] = -g_prime[i + 1];
    }
    jac
}

pub fn eval_b_prime(problem: &PixelProblem, z: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(b_prime_from_g_prime(&eval_g_prime(problem, z)?))
}

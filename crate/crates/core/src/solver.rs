//! Reduced upper-level problem of one pixel and its Newton solver.
//!
//! With the lower level solved exactly, `u(z) = K^{-1} A^T b(z)` and
//!
//! ```text
//! J(z) = 1/2 |u(z) + g(z) - d|^2 + lambda1/2 |z|^2
//! grad = M^T alpha + lambda1 z,        M = K^{-1} A^T b'(z) + diag(g'(z))
//! hess = M^T M + D + lambda1 I,        D_ii = g''_i * gamma_i^T alpha
//! ```
//!
//! where `alpha = u + g - d` and `gamma_i = e_i - K^{-1} A^T A e_i` is the
//! direction in which the `i`-th curvature slice of `u + g` acts.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernelfn::{b_from_g, b_prime_from_g_prime, eval_kernel, KernelEval, PixelProblem};
use crate::lowerlevel::DifferenceSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub z: DVector<f64>,
    pub value: f64,
    pub u: DVector<f64>,
    pub kernel: KernelEval,
    /// `alpha = u + g - d`
    pub residual: DVector<f64>,
    pub gradient: DVector<f64>,
    pub m: DMatrix<f64>,
    /// Diagonal of the second-order residual term `D`.
    pub curvature_term: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

fn check_sizes(problem: &PixelProblem, system: &DifferenceSystem) -> Result<()> {
    if problem.len() != system.len() {
        return Err(Error::Dimension {
            expected: system.len(),
            actual: problem.len(),
        });
    }
    Ok(())
}

/// Rows are `gamma_i^T`, i.e. the stacked matrix `(I - K^{-1} A^T A)^T`.
pub fn gamma_matrix(system: &DifferenceSystem) -> DMatrix<f64> {
    let n = system.len();
    let r = DMatrix::identity(n, n) - system.kinv_at() * system.a_dense();
    r.transpose()
}

/// `D_ii = g''_i * gamma_i^T alpha`.
pub fn curvature_diagonal(
    gamma: &DMatrix<f64>,
    g_double_prime: &DVector<f64>,
    residual: &DVector<f64>,
) -> DVector<f64> {
    let projected = gamma * residual;
    projected.component_mul(g_double_prime)
}

fn value_parts(
    problem: &PixelProblem,
    system: &DifferenceSystem,
    z: &DVector<f64>,
    kernel: &KernelEval,
) -> Result<(f64, DVector<f64>, DVector<f64>)> {
    let b = b_from_g(problem.d(), &kernel.g);
    let u = system.solve_u(&b)?;
    let residual = &u + &kernel.g - problem.d();
    let value = 0.5 * residual.norm_squared() + 0.5 * problem.lambda1() * z.norm_squared();
    Ok((value, u, residual))
}

/// Reduced objective value only.
pub fn objective(problem: &PixelProblem, system: &DifferenceSystem, z: &DVector<f64>) -> Result<f64> {
    check_sizes(problem, system)?;
    let kernel = eval_kernel(problem, z)?;
    Ok(value_parts(problem, system, z, &kernel)?.0)
}

/// Value, gradient and Hessian in one pass.
pub fn evaluate(
    problem: &PixelProblem,
    system: &DifferenceSystem,
    z: &DVector<f64>,
) -> Result<ObjectiveEval> {
    check_sizes(problem, system)?;
    let n = problem.len();
    let kernel = eval_kernel(problem, z)?;
    let (value, u, residual) = value_parts(problem, system, z, &kernel)?;

    let b_prime = b_prime_from_g_prime(&kernel.g_prime);
    let m = system.kinv_at() * b_prime + DMatrix::from_diagonal(&kernel.g_prime);
    let lambda1 = problem.lambda1();
    let gradient = m.transpose() * &residual + z * lambda1;

    let curvature_term = curvature_diagonal(&gamma_matrix(system), &kernel.g_double_prime, &residual);
    let mut hessian = m.transpose() * &m;
    for i in 0..n {
        hessian[(i, i)] += curvature_term[i] + lambda1;
    }
    // M^T M is symmetric in exact arithmetic
    let hessian = (&hessian + hessian.transpose()) * 0.5;

    Ok(ObjectiveEval {
        z: z.clone(),
        value,
        u,
        kernel,
        residual,
        gradient,
        m,
        curvature_term,
        hessian,
    })
}

pub fn gradient(problem: &PixelProblem, system: &DifferenceSystem, z: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(evaluate(problem, system, z)?.gradient)
}

pub fn hessian(problem: &PixelProblem, system: &DifferenceSystem, z: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(evaluate(problem, system, z)?.hessian)
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Smallest `lambda1` (strict lower bound) above which the reduced objective
/// is strictly convex on `{ |z|_inf <= delta }`:
///
/// ```text
/// |gamma|_inf * M1 * ( |K^{-1}A^T|_inf (2|d|_inf + 2 M2 delta) + M2 delta + |d|_inf )
/// ```
///
/// with `M1 = max_i max (E_i(s) - E_i(t))^2 / 2` and `M2 = max_i max |E_i|`.
pub fn lambda1_lower_bound(problem: &PixelProblem, system: &DifferenceSystem, delta: f64) -> Result<f64> {
    check_sizes(problem, system)?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("ball radius must be >= 0, got {delta}")));
    }
    let m1 = problem
        .trajectories()
        .iter()
        .map(|t| t.half_squared_range())
        .fold(0.0, f64::max);
    let m2 = problem
        .trajectories()
        .iter()
        .map(|t| t.max_abs())
        .fold(0.0, f64::max);
    let gamma_norm = inf_norm(&gamma_matrix(system));
    let p_norm = inf_norm(system.kinv_at());
    let d_norm = problem.d().amax();
    Ok(gamma_norm * m1 * (p_norm * (2.0 * d_norm + 2.0 * m2 * delta) + m2 * delta + d_norm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    pub grad_tol: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub levenberg_floor: f64,
    pub max_backtracks: usize,
    /// Starting point; `None` means the zero vector.
    pub z0: Option<DVector<f64>>,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iters: 50,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            levenberg_floor: 1e-8,
            max_backtracks: 30,
            z0: None,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::Parameter("grad_tol must be positive".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::Parameter("backtrack_factor must lie in (0, 1)".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::Parameter("armijo_c must lie in (0, 1)".into()));
        }
        if !(self.levenberg_floor > 0.0) {
            return Err(Error::Parameter("levenberg_floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelSolution {
    pub z: DVector<f64>,
    pub u: DVector<f64>,
    /// Log-domain reconstruction `v = d - g(z)`.
    pub v: DVector<f64>,
    /// `|grad J|_2` at every iterate, starting with `z0`.
    pub grad_norm_trace: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Solves `(H + mu I) delta = -grad` with the smallest shift from
/// `{0} U {floor * 4^j}` for which Cholesky succeeds.
fn newton_direction(
    hessian: &DMatrix<f64>,
    gradient: &DVector<f64>,
    floor: f64,
) -> Option<DVector<f64>> {
    let n = hessian.nrows();
    let mut shift = 0.0;
    for j in 0..=80 {
        let shifted = hessian + DMatrix::identity(n, n) * shift;
        if let Some(chol) = shifted.cholesky() {
            let delta = chol.solve(&(-gradient));
            if delta.iter().all(|v| v.is_finite()) {
                return Some(delta);
            }
        }
        shift = floor * 4f64.powi(j);
    }
    None
}

/// Damped Newton iteration with a Levenberg shift and Armijo backtracking.
pub fn newton_solve(
    problem: &PixelProblem,
    system: &DifferenceSystem,
    config: &NewtonConfig,
) -> Result<PixelSolution> {
    check_sizes(problem, system)?;
    config.validate()?;
    let n = problem.len();
    let z0 = match &config.z0 {
        Some(z0) if z0.len() != n => {
            return Err(Error::Dimension {
                expected: n,
                actual: z0.len(),
            })
        }
        Some(z0) => z0.clone(),
        None => DVector::zeros(n),
    };
    let trial_value = |zt: &DVector<f64>| objective(problem, system, zt).unwrap_or(f64::INFINITY);

    let mut current = evaluate(problem, system, &z0)?;
    let mut grad_norm_trace = vec![current.gradient.norm()];
    let mut objective_trace = vec![current.value];
    let mut converged = current.gradient.norm() < config.grad_tol;
    let mut iterations = 0;

    while !converged && iterations < config.max_iters {
        let grad_norm = current.gradient.norm();
        let mut next: Option<ObjectiveEval> = None;

        if let Some(delta) = newton_direction(&current.hessian, &current.gradient, config.levenberg_floor) {
            let slope = current.gradient.dot(&delta);
            let mut step = 1.0;
            for attempt in 0..=config.max_backtracks {
                let candidate = &current.z + &delta * step;
                let value = trial_value(&candidate);
                if value <= current.value + config.armijo_c * step * slope {
                    next = Some(evaluate(problem, system, &candidate)?);
                    break;
                }
                // Near the optimum the Armijo decrease drops below the
                // rounding noise of J; accept a full step that does not
                // increase J but reduces the gradient.
                if attempt == 0 && value <= current.value {
                    let eval = evaluate(problem, system, &candidate)?;
                    if eval.gradient.norm() < grad_norm {
                        next = Some(eval);
                        break;
                    }
                }
                step *= config.backtrack_factor;
            }
        }

        if next.is_none() {
            let scale = 1.0 / (1.0 + inf_norm(&current.hessian));
            let candidate = &current.z - &current.gradient * scale;
            if trial_value(&candidate) < current.value {
                next = Some(evaluate(problem, system, &candidate)?);
            }
        }

        let Some(accepted) = next else { break };
        current = accepted;
        iterations += 1;
        grad_norm_trace.push(current.gradient.norm());
        objective_trace.push(current.value);
        converged = current.gradient.norm() < config.grad_tol;
    }

    let v = problem.d() - &current.kernel.g;
    Ok(PixelSolution {
        z: current.z,
        u: current.u,
        v,
        grad_norm_trace,
        objective_trace,
        converged,
        iterations,
    })
}

/// Result of the scalar-threshold baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSolution {
    pub z: f64,
    /// Least-squares log reconstruction of every image.
    pub v: DVector<f64>,
    pub score: f64,
    pub evaluations: usize,
}

/// Normal matrix `A^T A + I` of the stacked difference/identity system.
pub fn medi_system(n: usize) -> Result<DifferenceSystem> {
    DifferenceSystem::new(n, 1.0)
}

fn medi_fit(
    problem: &PixelProblem,
    stacked: &DifferenceSystem,
    z: f64,
) -> Result<(DVector<f64>, f64)> {
    let n = problem.len();
    let g = crate::kernelfn::eval_g(problem, &DVector::from_element(n, z))?;
    let b = DVector::from_iterator(n - 1, problem.event_sums().iter().map(|s| z * s));
    let rhs = stacked.apply_at(&b) + (problem.d() - &g);
    let v = stacked.solve_k(&rhs)?;
    let i = (n - 1) / 2;
    let r = v[i] + g[i] - problem.d()[i];
    Ok((v, 0.5 * r * r))
}

/// Scalar-`z` baseline: for each candidate threshold, solve the stacked
/// system `[A; I] v = [z * S; d - g(z)]` (S = event counts between reference
/// times) in the least-squares sense and score the middle image by
/// `1/2 (v_i + g_i(z) - d_i)^2`. The best grid point is refined by
/// golden-section search between its neighbours.
pub fn medi_baseline(
    problem: &PixelProblem,
    stacked: &DifferenceSystem,
    grid: &[f64],
) -> Result<BaselineSolution> {
    check_sizes(problem, stacked)?;
    if stacked.lambda2() != 1.0 {
        return Err(Error::Parameter(
            "baseline needs the stacked system A^T A + I (see medi_system)".into(),
        ));
    }
    if grid.is_empty() || grid.iter().any(|z| !z.is_finite()) {
        return Err(Error::Parameter("threshold grid must be non-empty and finite".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut evaluations = 0;
    let mut score_at = |z: f64| -> Result<f64> {
        evaluations += 1;
        Ok(medi_fit(problem, stacked, z)?.1)
    };

    let mut best = (grid[0], f64::INFINITY);
    let mut best_idx = 0;
    for (j, &z) in grid.iter().enumerate() {
        let s = score_at(z)?;
        if s < best.1 {
            best = (z, s);
            best_idx = j;
        }
    }

    if grid.len() > 1 {
        let mut lo = grid[best_idx.saturating_sub(1)];
        let mut hi = grid[(best_idx + 1).min(grid.len() - 1)];
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut a = hi - inv_phi * (hi - lo);
        let mut b = lo + inv_phi * (hi - lo);
        let mut fa = score_at(a)?;
        let mut fb = score_at(b)?;
        for _ in 0..200 {
            if hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
                break;
            }
            if fa <= fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - inv_phi * (hi - lo);
                fa = score_at(a)?;
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + inv_phi * (hi - lo);
                fb = score_at(b)?;
            }
        }
        let (z, s) = if fa <= fb { (a, fa) } else { (b, fb) };
        if s < best.1 {
            best = (z, s);
        }
    }

    let (v, score) = medi_fit(problem, stacked, best.0)?;
    Ok(BaselineSolution {
        z: best.0,
        v,
        score,
        evaluations,
    })
}

#![allow(dead_code)]

use bilevel_deblur::events::Trajectory;
use bilevel_deblur::kernelfn::PixelProblem;
use bilevel_deblur::lowerlevel::DifferenceSystem;
use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const SIZES: [usize; 4] = [2, 3, 5, 10];

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Integer random walk on a jittered grid, zero at the reference sample,
/// like the sum-of-events curves built from a compressed cube.
pub fn random_trajectory(rng: &mut StdRng, with_event: bool) -> Trajectory {
    loop {
        let samples = rng.gen_range(2..=25);
        let exposure = rng.gen_range(0.005..0.1);
        let start = rng.gen_range(0.0..1.0);
        let mut times: Vec<f64> = (0..samples)
            .map(|_| start + rng.gen_range(0.0..exposure))
            .collect();
        times.push(start);
        times.push(start + exposure);
        times.sort_by(f64::total_cmp);
        times.dedup();
        if times.len() < 2 {
            continue;
        }
        let reference = rng.gen_range(0..times.len());
        let mut values = vec![0.0; times.len()];
        for l in reference + 1..times.len() {
            values[l] = values[l - 1] + rng.gen_range(-2..=2) as f64;
        }
        for l in (0..reference).rev() {
            values[l] = values[l + 1] - rng.gen_range(-2..=2) as f64;
        }
        let traj = Trajectory::new(times, values).unwrap();
        if !with_event || !traj.is_constant() {
            return traj;
        }
    }
}

pub fn random_problem(rng: &mut StdRng, n: usize) -> PixelProblem {
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-7.0..0.0)).collect();
    let trajectories = (0..n)
        .map(|_| {
            let with_event = rng.gen_bool(0.85);
            random_trajectory(rng, with_event)
        })
        .collect();
    let lambda1 = rng.gen_range(0.1..2.0);
    let lambda2 = [1e-3, 1e-2, 0.1, 1.0][rng.gen_range(0..4)];
    PixelProblem::new(d, trajectories, lambda1, lambda2).unwrap()
}

pub fn system_for(problem: &PixelProblem) -> DifferenceSystem {
    DifferenceSystem::new(problem.len(), problem.lambda2()).unwrap()
}

pub fn random_z(rng: &mut StdRng, n: usize, radius: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-radius..=radius))
}

pub fn relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let scale: f64 = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale_a: f64 = analytic.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / scale.max(scale_a).max(1e-300)
}

/// Central differences of a scalar function.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, z: &DVector<f64>, h: f64) -> Vec<f64> {
    (0..z.len())
        .map(|i| {
            let mut a = z.clone();
            let mut b = z.clone();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

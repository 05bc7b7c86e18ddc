//! End-to-end runs: per-pixel solves over a dataset and the synthetic
//! benchmark.

use crate::error::{Error, Result};
use crate::events::{build_compressed_cube, CompressedCube, EventStream, FrameSequence, LogFrames};
use crate::imaging::{assemble, psnr, ssim, ReconstructionSet, SolvedPixel};
use crate::kernelfn::PixelProblem;
use crate::lowerlevel::DifferenceSystem;
use crate::solver::{lambda1_lower_bound, medi_baseline, medi_system, newton_solve, NewtonConfig};
use crate::synth::{generate_bump_sequence, simulate_bump_events, BumpScene, BumpSequence, SimulatorConfig};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub compression_k: usize,
    pub newton: NewtonConfig,
    /// Threshold radius used when reporting the lambda1 lower bound.
    pub delta: f64,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
    pub standardize_epsilon: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1e-3,
            compression_k: 200,
            newton: NewtonConfig::default(),
            delta: 2.0,
            threads: 0,
            standardize_epsilon: crate::events::DEFAULT_STANDARDIZE_EPSILON,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 > 0.0) || !(self.lambda2 > 0.0) {
            return Err(Error::Parameter("lambda1 and lambda2 must be positive".into()));
        }
        if self.compression_k == 0 {
            return Err(Error::Parameter("compression factor k must be >= 1".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Parameter("delta must be positive".into()));
        }
        self.newton.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub pixels: usize,
    pub solved: usize,
    pub skipped: usize,
    pub converged: usize,
    pub max_iterations: usize,
    pub mean_iterations: f64,
    pub num_bins: usize,
    /// Largest per-pixel lower bound on lambda1 among solved pixels.
    pub max_lambda1_bound: f64,
    /// Solved pixels whose bound exceeds the configured lambda1.
    pub below_bound: usize,
}

#[derive(Debug, Clone)]
pub struct DeblurOutput {
    pub reconstruction: ReconstructionSet,
    pub solutions: Vec<SolvedPixel>,
    pub logs: LogFrames,
    pub cube: CompressedCube,
    pub summary: RunSummary,
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn event_mask(cube: &CompressedCube) -> Vec<bool> {
    let (w, h) = (cube.width(), cube.height());
    (0..w * h).map(|idx| cube.has_events(idx % w, idx / w)).collect()
}

/// Deblurs every frame of `frames` using `events`. Pixels are solved
/// independently and in parallel; the result does not depend on the thread
/// count.
pub fn deblur(frames: &FrameSequence, events: &EventStream, config: &RunConfig) -> Result<DeblurOutput> {
    config.validate()?;
    if events.width() != frames.width() || events.height() != frames.height() {
        return Err(Error::Validation(format!(
            "event sensor is {}x{} but frames are {}x{}",
            events.width(),
            events.height(),
            frames.width(),
            frames.height()
        )));
    }
    let logs = LogFrames::from_raw(frames.frames(), config.standardize_epsilon)?;
    let cube = build_compressed_cube(events, config.compression_k)?;
    let system = DifferenceSystem::new(frames.len(), config.lambda2)?;
    let mask = event_mask(&cube);
    let width = frames.width();
    let active: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    log::info!(
        "{} of {} pixels have events, {} bins",
        active.len(),
        mask.len(),
        cube.num_bins()
    );

    let results: Vec<Result<(SolvedPixel, f64)>> = with_pool(config.threads, || {
        active
            .par_iter()
            .map(|&idx| {
                let (x, y) = (idx % width, idx / width);
                let problem =
                    PixelProblem::from_dataset(&cube, frames, &logs, x, y, config.lambda1, config.lambda2)?;
                let bound = lambda1_lower_bound(&problem, &system, config.delta)?;
                let solution = newton_solve(&problem, &system, &config.newton)?;
                Ok((SolvedPixel { x, y, solution }, bound))
            })
            .collect()
    })?;

    let mut solutions = Vec::with_capacity(results.len());
    let mut max_bound: f64 = 0.0;
    let mut below_bound = 0;
    for r in results {
        let (s, bound) = r?;
        max_bound = max_bound.max(bound);
        if bound > config.lambda1 {
            below_bound += 1;
        }
        solutions.push(s);
    }
    if below_bound > 0 {
        log::info!(
            "lambda1 = {} is below the convexity bound at {below_bound} pixels (max bound {max_bound:.3e})",
            config.lambda1
        );
    }

    let reconstruction = assemble(&logs, &mask, &solutions)?;
    let converged = solutions.iter().filter(|s| s.solution.converged).count();
    let total_iters: usize = solutions.iter().map(|s| s.solution.iterations).sum();
    let summary = RunSummary {
        pixels: mask.len(),
        solved: solutions.len(),
        skipped: mask.len() - solutions.len(),
        converged,
        max_iterations: solutions.iter().map(|s| s.solution.iterations).max().unwrap_or(0),
        mean_iterations: if solutions.is_empty() {
            0.0
        } else {
            total_iters as f64 / solutions.len() as f64
        },
        num_bins: cube.num_bins(),
        max_lambda1_bound: max_bound,
        below_bound,
    };
    Ok(DeblurOutput {
        reconstruction,
        solutions,
        logs,
        cube,
        summary,
    })
}

/// The scalar-threshold baseline over the same dataset. Returns the
/// reconstructed images in [0, 1].
pub fn deblur_baseline(
    frames: &FrameSequence,
    events: &EventStream,
    config: &RunConfig,
    grid: &[f64],
) -> Result<Vec<crate::events::Frame>> {
    config.validate()?;
    let logs = LogFrames::from_raw(frames.frames(), config.standardize_epsilon)?;
    let cube = build_compressed_cube(events, config.compression_k)?;
    let stacked = medi_system(frames.len())?;
    let mask = event_mask(&cube);
    let width = frames.width();
    let active: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let results: Vec<Result<(usize, nalgebra::DVector<f64>)>> = with_pool(config.threads, || {
        active
            .par_iter()
            .map(|&idx| {
                let (x, y) = (idx % width, idx / width);
                let problem =
                    PixelProblem::from_dataset(&cube, frames, &logs, x, y, config.lambda1, config.lambda2)?;
                Ok((idx, medi_baseline(&problem, &stacked, grid)?.v))
            })
            .collect()
    })?;
    let mut out = logs.standardized().to_vec();
    for r in results {
        let (idx, v) = r?;
        for (i, frame) in out.iter_mut().enumerate() {
            frame.data_mut()[idx] = v[i].exp().clamp(f64::MIN_POSITIVE, 1.0);
        }
    }
    Ok(out)
}

pub fn default_baseline_grid() -> Vec<f64> {
    (1..=40).map(|j| j as f64 * 0.025).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub scene: BumpScene,
    pub simulator: SimulatorConfig,
    pub run: RunConfig,
    pub baseline_grid: Vec<f64>,
    pub min_ssim: f64,
    pub min_psnr: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scene: BumpScene::default(),
            simulator: SimulatorConfig::default(),
            run: RunConfig::default(),
            baseline_grid: default_baseline_grid(),
            min_ssim: 0.90,
            min_psnr: 25.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub ssim: f64,
    pub psnr: f64,
    pub blurry_ssim: f64,
    pub blurry_psnr: f64,
    pub baseline_ssim: f64,
    pub baseline_psnr: f64,
    pub num_events: usize,
    pub sequence: BumpSequence,
    pub events: EventStream,
    pub output: DeblurOutput,
    pub passed: bool,
}

/// Runs the unit-bump benchmark: simulate, deblur the middle frame and
/// compare it with the sharp middle frame.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    let sequence = generate_bump_sequence(&config.scene)?;
    let events = simulate_bump_events(&sequence, &config.simulator)?;
    log::info!("simulated {} events", events.len());
    let output = deblur(&sequence.model_frames, &events, &config.run)?;
    let deblurred = &output.reconstruction.v_frames[1];
    let baseline_frames = deblur_baseline(&sequence.model_frames, &events, &config.run, &config.baseline_grid)?;

    let ssim_v = ssim(deblurred, &sequence.baseline)?;
    let psnr_v = psnr(deblurred, &sequence.baseline)?;
    Ok(BenchReport {
        ssim: ssim_v,
        psnr: psnr_v,
        blurry_ssim: ssim(&sequence.blurry, &sequence.baseline)?,
        blurry_psnr: psnr(&sequence.blurry, &sequence.baseline)?,
        baseline_ssim: ssim(&baseline_frames[1], &sequence.baseline)?,
        baseline_psnr: psnr(&baseline_frames[1], &sequence.baseline)?,
        num_events: events.len(),
        passed: ssim_v >= config.min_ssim && psnr_v >= config.min_psnr,
        sequence,
        events,
        output,
    })
}

mod config;

use anyhow::{bail, Context, Result};
use bilevel_deblur::events::{parse_event_file, write_event_file, Frame};
use bilevel_deblur::imaging::{psnr, ssim, SolvedPixel};
use bilevel_deblur::io::{read_frame_unit, read_manifest, write_manifest, write_pgm16, write_png8, ManifestEntry};
use bilevel_deblur::pipeline::{deblur, run_bench, BenchConfig, DeblurOutput, RunSummary};
use bilevel_deblur::synth::{generate_bump_sequence, simulate_bump_events, BumpScene, SimulatorConfig};
use clap::{Args, Parser, Subcommand};
use config::SolverArgs;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Event-guided deblurring of image sequences, one bilevel problem per pixel.
#[derive(Debug, Parser)]
#[command(name = "bilevel-deblur", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the moving-disk benchmark dataset (frames, manifest, events)
    Simulate(SimulateArgs),
    /// Deblur the frames of a manifest using an event file
    Deblur(DeblurArgs),
    /// Simulate, deblur and score the moving-disk benchmark
    Bench(BenchArgs),
    /// PSNR and SSIM between two grayscale images
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct SceneArgs {
    /// Contrast threshold of the event simulator
    #[arg(long, default_value_t = 0.2)]
    threshold: f64,
    /// Interpolation steps between frames
    #[arg(long, default_value_t = 20)]
    substeps: usize,
    #[arg(long, default_value_t = 8.0)]
    radius: f64,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
}

impl SceneArgs {
    fn scene(&self) -> BumpScene {
        BumpScene {
            width: self.width,
            height: self.height,
            disk_radius: self.radius,
            ..BumpScene::default()
        }
    }

    fn simulator(&self) -> SimulatorConfig {
        SimulatorConfig {
            contrast_threshold: self.threshold,
            substeps: self.substeps,
            ..SimulatorConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Existing output directory
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    scene: SceneArgs,
}

#[derive(Debug, Args)]
struct DeblurArgs {
    /// Frame manifest: `path reference_time exposure` per line
    #[arg(long)]
    frames: PathBuf,
    /// Event file: `t x y p` per line
    #[arg(long)]
    events: PathBuf,
    /// Existing output directory
    #[arg(long)]
    out: PathBuf,
    /// Write per-pixel Newton traces as CSV
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Also write the reconstructions here
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args).map(|_| true),
        Command::Deblur(args) => cmd_deblur(&args).map(|_| true),
        Command::Bench(args) => cmd_bench(&args),
        Command::Metrics(args) => cmd_metrics(&args).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn require_dir(dir: &Path) -> Result<()> {
    if !dir.is_dir() {
        bail!("output directory {} does not exist", dir.display());
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    require_dir(&args.out)?;
    let sequence = generate_bump_sequence(&args.scene.scene())?;
    let events = simulate_bump_events(&sequence, &args.scene.simulator())?;

    for (j, frame) in sequence.sharp.iter().enumerate() {
        write_pgm16(args.out.join(format!("frame_{:02}.pgm", j + 1)), frame)?;
    }
    write_pgm16(args.out.join("blurry.pgm"), &sequence.blurry)?;
    write_pgm16(args.out.join("baseline.pgm"), &sequence.baseline)?;
    write_event_file(args.out.join("events.txt"), &events)?;

    let mid = sequence.sharp.len() / 2;
    let model = &sequence.model_frames;
    let names = [
        format!("frame_{:02}.pgm", mid),
        "blurry.pgm".to_string(),
        format!("frame_{:02}.pgm", mid + 2),
    ];
    let entries: Vec<ManifestEntry> = names
        .iter()
        .enumerate()
        .map(|(i, name)| ManifestEntry {
            path: name.into(),
            reference_time: model.reference_time(i),
            exposure: model.exposure(i),
        })
        .collect();
    write_manifest(args.out.join("manifest.txt"), &entries)?;
    println!("frames={}", sequence.sharp.len());
    println!("events={}", events.len());
    Ok(())
}

fn write_frames(dir: &Path, prefix: &str, frames: &[Frame]) -> Result<()> {
    for (i, f) in frames.iter().enumerate() {
        write_pgm16(dir.join(format!("{prefix}_{}.pgm", i + 1)), f)?;
        write_png8(dir.join(format!("{prefix}_{}.png", i + 1)), f)?;
    }
    Ok(())
}

fn write_outputs(dir: &Path, output: &DeblurOutput) -> Result<()> {
    let rec = &output.reconstruction;
    write_frames(dir, "v", &rec.v_frames)?;
    write_frames(dir, "u", &rec.u_frames)?;

    let n = rec.v_frames.len();
    let mut text = String::from("# x y");
    for i in 1..=n {
        write!(text, " z_{i}").unwrap();
    }
    text.push('\n');
    for s in &output.solutions {
        write!(text, "{} {}", s.x, s.y).unwrap();
        for z in s.solution.z.iter() {
            write!(text, " {z}").unwrap();
        }
        text.push('\n');
    }
    let path = dir.join("z_map.txt");
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_trace(path: &Path, solutions: &[SolvedPixel]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["pixel_x", "pixel_y", "iteration", "grad_norm", "objective"])?;
    for s in solutions {
        let sol = &s.solution;
        for (it, (g, j)) in sol.grad_norm_trace.iter().zip(&sol.objective_trace).enumerate() {
            w.write_record([
                s.x.to_string(),
                s.y.to_string(),
                it.to_string(),
                format!("{g:e}"),
                format!("{j:e}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn print_summary(s: &RunSummary, lambda1: f64, delta: f64) {
    println!("pixels={}", s.pixels);
    println!("solved={}", s.solved);
    println!("skipped={}", s.skipped);
    println!("converged={}", s.converged);
    println!("mean_iterations={:.3}", s.mean_iterations);
    println!("max_iterations={}", s.max_iterations);
    println!("bins={}", s.num_bins);
    println!("lambda1={lambda1}");
    println!("lambda1_bound_delta={delta}");
    println!("lambda1_bound_max={:e}", s.max_lambda1_bound);
    println!("pixels_below_bound={}", s.below_bound);
}

fn cmd_deblur(args: &DeblurArgs) -> Result<()> {
    require_dir(&args.out)?;
    let config = args.solver.resolve()?;
    let frames = read_manifest(&args.frames)?;
    let events = parse_event_file(&args.events, frames.width(), frames.height())?;
    let output = deblur(&frames, &events, &config)?;
    write_outputs(&args.out, &output)?;
    if let Some(trace) = &args.trace {
        write_trace(trace, &output.solutions)?;
    }
    print_summary(&output.summary, config.lambda1, config.delta);
    Ok(())
}

fn metric_line(name: &str, value: f64) {
    if value.is_infinite() {
        println!("{name}=inf");
    } else {
        println!("{name}={value:.6}");
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<bool> {
    if let Some(out) = &args.out {
        require_dir(out)?;
    }
    let config = BenchConfig {
        scene: args.scene.scene(),
        simulator: args.scene.simulator(),
        run: args.solver.resolve()?,
        ..BenchConfig::default()
    };
    let report = run_bench(&config)?;
    if let Some(out) = &args.out {
        write_outputs(out, &report.output)?;
        write_pgm16(out.join("baseline.pgm"), &report.sequence.baseline)?;
        write_pgm16(out.join("blurry.pgm"), &report.sequence.blurry)?;
    }
    if let Some(trace) = &args.trace {
        write_trace(trace, &report.output.solutions)?;
    }
    println!("events={}", report.num_events);
    print_summary(&report.output.summary, config.run.lambda1, config.run.delta);
    metric_line("ssim", report.ssim);
    metric_line("psnr", report.psnr);
    metric_line("blurry_ssim", report.blurry_ssim);
    metric_line("blurry_psnr", report.blurry_psnr);
    metric_line("medi_ssim", report.baseline_ssim);
    metric_line("medi_psnr", report.baseline_psnr);
    println!("min_ssim={}", config.min_ssim);
    println!("min_psnr={}", config.min_psnr);
    println!("result={}", if report.passed { "PASS" } else { "FAIL" });
    Ok(report.passed)
}

fn cmd_metrics(args: &MetricsArgs) -> Result<()> {
    let reference = read_frame_unit(&args.reference)?;
    let test = read_frame_unit(&args.test)?;
    metric_line("psnr", psnr(&test, &reference)?);
    metric_line("ssim", ssim(&test, &reference)?);
    Ok(())
}

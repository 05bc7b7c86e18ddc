//! Run parameters from flags, an optional `key = value` file, and defaults,
//! in that order of precedence.

use anyhow::{bail, Context, Result};
use bilevel_deblur::pipeline::RunConfig;
use clap::Args;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Args)]
pub struct SolverArgs {
    /// Upper-level regularisation weight
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Lower-level regularisation weight
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Events per compressed time bin
    #[arg(long)]
    pub k: Option<usize>,
    /// Stop when the gradient norm drops below this
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Radius of the z-ball used for the reported lambda1 bound
    #[arg(long)]
    pub delta: Option<f64>,
    /// Worker threads, 0 = one per core
    #[arg(long)]
    pub threads: Option<usize>,
    /// Parameter file with `key = value` lines
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    k: Option<usize>,
    grad_tol: Option<f64>,
    max_iters: Option<usize>,
    delta: Option<f64>,
    threads: Option<usize>,
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl SolverArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };
        let mut cfg = RunConfig::default();
        if let Some(v) = self.lambda1.or(file.lambda1) {
            cfg.lambda1 = v;
        }
        if let Some(v) = self.lambda2.or(file.lambda2) {
            cfg.lambda2 = v;
        }
        if let Some(v) = self.k.or(file.k) {
            cfg.compression_k = v;
        }
        if let Some(v) = self.grad_tol.or(file.grad_tol) {
            cfg.newton.grad_tol = v;
        }
        if let Some(v) = self.max_iters.or(file.max_iters) {
            cfg.newton.max_iters = v;
        }
        if let Some(v) = self.delta.or(file.delta) {
            cfg.delta = v;
        }
        if let Some(v) = self.threads.or(file.threads) {
            cfg.threads = v;
        }
        if let Err(e) = cfg.validate() {
            bail!("invalid parameters: {e}");
        }
        Ok(cfg)
    }
}

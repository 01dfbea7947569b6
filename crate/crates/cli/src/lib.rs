//! Command-line pipeline: mask to graph, graph to spectrum, kernel design,
//! filtering and ensemble energy profiles.
//!
//! Every run is driven by a [`PipelineConfig`] (TOML file plus flag
//! overrides). Outputs carry the tool version and the config hash and
//! contain no timestamps, so identical inputs give identical bytes.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod stamp;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{build_graph, eigs, energy, filter, kernels, phantom, PhantomArgs, PhantomKind};
pub use config::{Params, Paths, PipelineConfig};
pub use stamp::Stamp;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: chc_core::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use chc_core::ErrorKind;
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Stage { source, .. } => match source.kind() {
                ErrorKind::Usage => EXIT_USAGE,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numeric => EXIT_NUMERIC,
            },
        }
    }
}

/// Attaches a stage name to a library error.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for chc_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

impl<T> StageExt<T> for std::io::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Stage {
            stage,
            source: e.into(),
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "chc", version, about = "Voxel cortical graphs and spectral energy profiles")]
pub struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "CHC_THREADS")]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mask and surface to a pruned voxel graph.
    BuildGraph,
    /// Eigenpairs of the graph Laplacian up to the cutoff.
    Eigs,
    /// Design the kernel system and fit its polynomial approximations.
    Kernels,
    /// Band energies of one signal through the polynomial filter bank.
    Filter,
    /// Energy profiles for every condition and task.
    Energy,
    /// Write a synthetic phantom (mask, surface, functional series, events).
    Phantom(PhantomArgs),
    /// Print the effective configuration as TOML.
    ShowConfig,
}

/// Flags that override entries of the configuration file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub mask: Option<PathBuf>,
    #[arg(long, global = true)]
    pub surface: Option<PathBuf>,
    #[arg(long, global = true)]
    pub functional: Option<PathBuf>,
    #[arg(long, global = true)]
    pub paradigms: Option<PathBuf>,
    #[arg(long, global = true)]
    pub graph: Option<PathBuf>,
    #[arg(long, global = true)]
    pub spectrum: Option<PathBuf>,
    #[arg(long, global = true)]
    pub signal: Option<PathBuf>,
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Target voxel size in mm (three values).
    #[arg(long, global = true, num_args = 3, value_names = ["X", "Y", "Z"])]
    pub spacing: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub mask_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_cut: Option<f64>,
    #[arg(long, global = true)]
    pub kernels: Option<usize>,
    #[arg(long, global = true)]
    pub transition: Option<f64>,
    #[arg(long, global = true)]
    pub ratio: Option<f64>,
    #[arg(long, global = true)]
    pub joint_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_degree: Option<usize>,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub tr: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub eig_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, c: &mut PipelineConfig) {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = &self.$field { $target = v.clone().into(); })*
            };
        }
        set! {
            mask => c.paths.mask,
            surface => c.paths.surface,
            functional => c.paths.functional,
            paradigms => c.paths.paradigms,
            graph => c.paths.graph,
            spectrum => c.paths.spectrum,
            signal => c.paths.signal,
            output => c.paths.output,
            mask_threshold => c.params.mask_threshold,
            lambda_cut => c.params.lambda_cut,
            kernels => c.params.kernels,
            transition => c.params.transition,
            ratio => c.params.ratio,
            joint_tol => c.params.joint_tol,
            max_degree => c.params.max_degree,
            threshold => c.params.threshold,
            tr => c.params.tr,
            seed => c.params.seed,
            eig_tol => c.params.eig_tol,
            max_iter => c.params.max_iter,
        }
        if let Some(s) = &self.spacing {
            c.params.spacing = Some([s[0], s[1], s[2]]);
        }
    }
}

/// Resolves the configuration and runs one command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cli.overrides.apply(&mut config);
    config.validate()?;
    let out = &config.paths.output;
    if !matches!(cli.command, Command::ShowConfig) {
        std::fs::create_dir_all(out).stage("output")?;
    }
    match &cli.command {
        Command::BuildGraph => build_graph(&config),
        Command::Eigs => eigs(&config),
        Command::Kernels => kernels(&config),
        Command::Filter => filter(&config),
        Command::Energy => energy(&config),
        Command::Phantom(args) => phantom(&config, args),
        Command::ShowConfig => {
            print!("{}", config.to_toml());
            Ok(())
        }
    }
}

//! Command-line front end: configuration, the train/evaluate pipeline and
//! the experiment drivers behind the `spmld` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod radar;

use config::{Format, Mode, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "spmld", version, about = "Self-paced multi-label learning with missing labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command that reads a run configuration.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the top-level seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub mode: Option<Mode>,
    /// `section.key=value`, applied after the file; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Common {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        if let Some(mode) = self.mode {
            overrides.push(format!("mode=\"{mode}\""));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and write its checkpoint, trace and pace weights.
    Train(Common),
    /// Score a dataset with a saved checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "sparse")]
        format: FormatArg,
        #[arg(long)]
        arff_labels: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Repeat training over seeds and observed fractions for each mode.
    Experiment(Common),
    /// Evaluate every pace setting of the configured grid.
    Gridsearch(Common),
    /// Draw metric reports as a radar chart.
    PlotRadar {
        /// Metric report CSV files; at least two.
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// Legend entries, one per report.
        #[arg(long = "name")]
        names: Vec<String>,
        #[arg(long, default_value = "radar.svg")]
        out: PathBuf,
    },
    /// Generate a synthetic dataset with marked hard instances.
    Synth {
        #[arg(long, default_value_t = 30)]
        d: usize,
        #[arg(long, default_value_t = 600)]
        n: usize,
        #[arg(long, default_value_t = 15)]
        l: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 3)]
        g: usize,
        #[arg(long, default_value_t = 0.4)]
        noise_rate: f64,
        #[arg(long, default_value_t = 0.2)]
        hard_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum FormatArg {
    Sparse,
    Arff,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Sparse => Format::Sparse,
            FormatArg::Arff => Format::Arff,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(c) => commands::train(&c.load()?, &c.out),
        Command::Evaluate {
            checkpoint,
            data,
            format,
            arff_labels,
            out,
        } => {
            let format = Format::from(format);
            if format == Format::Arff && arff_labels.is_none() {
                return Err(CliError::user("cli", "--format arff needs --arff-labels"));
            }
            commands::evaluate(&checkpoint, &data, format, arff_labels, &out)
        }
        Command::Experiment(c) => commands::experiment(&c.load()?, &c.out),
        Command::Gridsearch(c) => commands::gridsearch(&c.load()?, &c.out),
        Command::PlotRadar { reports, names, out } => commands::plot_radar(&reports, &names, &out),
        Command::Synth {
            d,
            n,
            l,
            k,
            g,
            noise_rate,
            hard_fraction,
            seed,
            out,
        } => {
            let cfg = spmld::data::SynthConfig {
                d,
                n,
                l,
                k,
                g,
                noise_rate,
                hard_fraction,
                seed,
            };
            commands::synth(&cfg, &out)
        }
    }
}

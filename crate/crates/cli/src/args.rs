use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Bin,
}

impl Format {
    pub fn file_name(self, stem: &str) -> String {
        match self {
            Format::Csv => format!("{stem}.csv"),
            Format::Bin => format!("{stem}.bin"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMeans {
    Uniform,
    Spread,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Em,
    Bridge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Energy,
    Bw2uvp,
    Cbw2uvp,
    Kl,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Energy => "energy",
            Metric::Bw2uvp => "bw2uvp",
            Metric::Cbw2uvp => "cbw2uvp",
            Metric::Kl => "kl",
        }
    }
}

/// Fit a mixture potential to unpaired samples of both marginals.
#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Source samples (CSV or binary).
    #[arg(long)]
    pub x0: PathBuf,
    /// Target samples (CSV or binary).
    #[arg(long)]
    pub x1: PathBuf,
    /// Entropic regularization strength.
    #[arg(long)]
    pub eps: f64,
    /// Number of mixture components.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub lr: f64,
    /// Minibatch size for both marginals.
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    /// Overrides --batch for the source marginal.
    #[arg(long)]
    pub batch0: Option<usize>,
    /// Overrides --batch for the target marginal.
    #[arg(long)]
    pub batch1: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial value of every diagonal scale entry.
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    #[arg(long, value_enum, default_value_t = InitMeans::Uniform)]
    pub init_means: InitMeans,
    /// Progress is printed every this many steps.
    #[arg(long, default_value_t = 1000)]
    pub eval_every: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Draw endpoints from the conditional plan of a checkpoint.
#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Start points; each row gets `--n` samples.
    #[arg(long)]
    pub cond_input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
}

/// Simulate bridge trajectories from start points.
#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Start points, one trajectory per row.
    #[arg(long)]
    pub x0: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Uniform steps on [0, 1].
    #[arg(long, conflicts_with = "times")]
    pub steps: Option<usize>,
    /// Interior times, comma separated (bridge mode only).
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write a long-format trajectories.csv.
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Score a checkpoint against data or a reference checkpoint.
#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum)]
    pub metric: Metric,
    /// Target samples for energy/bw2uvp, reference checkpoint for
    /// cbw2uvp/kl.
    #[arg(long)]
    pub against: PathBuf,
    /// Start points pushed through the model (energy, bw2uvp) or test
    /// inputs (cbw2uvp).
    #[arg(long)]
    pub x0: Option<PathBuf>,
    /// Use at most this many rows of --x0.
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Estimate conditional moments from this many samples instead of
    /// exactly (cbw2uvp).
    #[arg(long)]
    pub n_cond: Option<usize>,
    /// Source law for kl as JSON; defaults to a standard Gaussian.
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub n_outer: usize,
    #[arg(long, default_value_t = 100)]
    pub n_inner: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Generate a source/target pair whose exact plan is a known potential.
#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub dim: usize,
    /// Components of the ground-truth potential.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long)]
    pub eps: f64,
    /// Training pairs.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Fresh source points for evaluation.
    #[arg(long, default_value_t = 1000)]
    pub n_test: usize,
    /// Source law as JSON; defaults to a standard Gaussian.
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
}

/// Generate the 2D Gaussian to swiss-roll fixture.
#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwissRollArgs {
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
}

/// Re-run a command from its manifest.
#[derive(Args, Clone, Debug, PartialEq)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the re-run.
    #[arg(long)]
    pub out: PathBuf,
}

fn absolute(p: &mut PathBuf) -> std::io::Result<()> {
    *p = std::path::absolute(&*p)?;
    Ok(())
}

fn absolute_opt(p: &mut Option<PathBuf>) -> std::io::Result<()> {
    match p {
        Some(p) => absolute(p),
        None => Ok(()),
    }
}

/// Input and output paths are stored absolute so a manifest can be replayed
/// from any working directory.
pub trait Resolve {
    fn resolve(&mut self) -> std::io::Result<()>;
    fn out_dir(&self) -> &Path;
    fn set_out_dir(&mut self, out: PathBuf);
}

macro_rules! resolve_impl {
    ($ty:ty, [$($p:ident),*], [$($o:ident),*]) => {
        impl Resolve for $ty {
            fn resolve(&mut self) -> std::io::Result<()> {
                $(absolute(&mut self.$p)?;)*
                $(absolute_opt(&mut self.$o)?;)*
                Ok(())
            }
            fn out_dir(&self) -> &Path {
                &self.out
            }
            fn set_out_dir(&mut self, out: PathBuf) {
                self.out = out;
            }
        }
    };
}

resolve_impl!(TrainArgs, [x0, x1, out], []);
resolve_impl!(SampleArgs, [checkpoint, cond_input, out], []);
resolve_impl!(TrajectoryArgs, [checkpoint, x0, out], []);
resolve_impl!(EvaluateArgs, [checkpoint, against, out], [x0, source]);
resolve_impl!(BenchmarkArgs, [out], [source]);
resolve_impl!(SwissRollArgs, [out], []);

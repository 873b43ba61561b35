use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cusplit_core::DEFAULT_QPS;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "cusplit",
    version,
    about = "Learn and benchmark CU split-skip rules on a toy block encoder"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate synthetic sequences from TOML specs.
    Generate(GenerateArgs),
    /// Encode sequences with full RDO and write the feature dataset.
    Extract(ExtractArgs),
    /// Train one decision tree per CU depth and cross-validate it.
    Train(TrainArgs),
    /// Harvest skip criteria from trained trees and select one per depth.
    Prune(PruneArgs),
    /// Compare anchor encodes with criteria-enabled encodes.
    Bench(BenchArgs),
    /// Print the per-depth feature/label correlation table.
    Correlate(CorrelateArgs),
    /// Re-run the command recorded in a manifest, overwriting its outputs.
    Rerun(RerunArgs),
}

impl Command {
    /// Rewrites every path argument as an absolute path so that manifests
    /// can be replayed from any working directory.
    pub fn absolutize(&mut self) -> std::io::Result<()> {
        fn abs(p: &mut PathBuf) -> std::io::Result<()> {
            *p = std::path::absolute(&*p)?;
            Ok(())
        }
        fn all(ps: &mut [PathBuf]) -> std::io::Result<()> {
            ps.iter_mut().try_for_each(abs)
        }
        match self {
            Command::Generate(a) => {
                all(&mut a.specs)?;
                abs(&mut a.out_dir)
            }
            Command::Extract(a) => {
                all(&mut a.sequences)?;
                abs(&mut a.out)
            }
            Command::Train(a) => {
                abs(&mut a.dataset)?;
                abs(&mut a.out_dir)
            }
            Command::Prune(a) => {
                all(&mut a.models)?;
                abs(&mut a.out_dir)
            }
            Command::Bench(a) => {
                all(&mut a.sequences)?;
                if let Some(c) = &mut a.criteria {
                    abs(c)?;
                }
                abs(&mut a.out_dir)
            }
            Command::Correlate(a) => {
                abs(&mut a.dataset)?;
                if let Some(o) = &mut a.out {
                    abs(o)?;
                }
                Ok(())
            }
            Command::Rerun(a) => abs(&mut a.manifest),
        }
    }

    pub fn set_force(&mut self, force: bool) {
        match self {
            Command::Generate(a) => a.force = force,
            Command::Extract(a) => a.force = force,
            Command::Train(a) => a.force = force,
            Command::Prune(a) => a.force = force,
            Command::Bench(a) => a.force = force,
            Command::Correlate(a) => a.force = force,
            Command::Rerun(_) => {}
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderArgs {
    /// Scale of the QP-to-lambda rule `scale * 2^((qp - 12) / 3)`.
    #[arg(long, default_value_t = 0.57)]
    pub lambda_scale: f64,
    /// Displacement search radius of the whole-CU inter test.
    #[arg(long, default_value_t = 3)]
    pub search_range: i16,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateArgs {
    /// Sequence spec files (TOML).
    #[arg(long = "spec", required = true, num_args = 1..)]
    pub specs: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractArgs {
    /// Sequence header files written by `generate`.
    #[arg(long = "sequence", required = true, num_args = 1..)]
    pub sequences: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_QPS)]
    pub qps: Vec<u8>,
    /// Dataset CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub max_depth: u8,
    /// Minimum leaf size as a fraction of the depth's sample count.
    #[arg(long, default_value_t = 0.001)]
    pub min_leaf_fraction: f64,
    /// Quantile bins for RDC and Bits.
    #[arg(long, default_value_t = 32)]
    pub bins: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Warn when a depth has fewer samples than this.
    #[arg(long, default_value_t = 1000)]
    pub warn_below: usize,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneArgs {
    /// Tree files written by `train`, at most one per CU depth.
    #[arg(long = "model", required = true, num_args = 1..)]
    pub models: Vec<PathBuf>,
    /// Minimum node accuracy in percent.
    #[arg(long, default_value_t = 97.0)]
    pub min_accuracy: f64,
    /// Minimum node coverage in percent.
    #[arg(long, default_value_t = 17.0)]
    pub min_coverage: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchArgs {
    #[arg(long = "sequence", required = true, num_args = 1..)]
    pub sequences: Vec<PathBuf>,
    /// Criteria file from `prune`; without it both runs are anchors.
    #[arg(long)]
    pub criteria: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_QPS)]
    pub qps: Vec<u8>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RerunArgs {
    pub manifest: PathBuf,
}

pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cdhf",
    version,
    about = "Decide when to show code suggestions: simulate telemetry, train acceptance models, evaluate thresholds"
)]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Upper bound on worker threads. Outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Root seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    TreeEnsemble,
    Logistic,
}

impl ModelArg {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelArg::TreeEnsemble => "tree-ensemble",
            ModelArg::Logistic => "logistic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    ByProgrammer,
    BySession,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PartitionArg {
    Validation,
    Test,
}

impl PartitionArg {
    pub fn file_stem(self) -> &'static str {
        match self {
            PartitionArg::Validation => "validation",
            PartitionArg::Test => "test",
        }
    }
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Stage-1 threshold: hide without generating when P(accept | prompt) <= v1.
    #[arg(long, requires = "v2")]
    pub v1: Option<f64>,
    /// Stage-2 threshold: hide when P(accept | prompt, suggestion) <= v2.
    #[arg(long, requires = "v1")]
    pub v2: Option<f64>,
    /// Policy file written by `select-thresholds` (default: <models>/thresholds.toml).
    #[arg(long, conflicts_with_all = ["v1", "v2"], value_name = "FILE")]
    pub thresholds: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort with ground-truth annotations.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        programmers: Option<usize>,
        #[arg(long)]
        sessions: Option<usize>,
        /// Shown suggestions per session.
        #[arg(long)]
        events: Option<usize>,
        /// `default` or a TOML/JSON profile file.
        #[arg(long)]
        profile: Option<String>,
    },
    /// Validate a telemetry log and write it back in canonical form.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        gap_minutes: Option<f64>,
        #[arg(long)]
        prompt_bytes: Option<usize>,
    },
    /// Print dataset statistics.
    Summarize {
        #[arg(long)]
        input: PathBuf,
        /// Also write summary.txt and summary.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Partition a log into train/validation/test logs.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Comma-separated train,validation,test shares.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        ratios: Option<Vec<f64>>,
    },
    /// Train a stage-1 or stage-2 acceptance model on the train partition.
    Train {
        /// Directory holding the partitions written by `split`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        stage: u8,
        #[arg(long, value_enum, default_value = "tree-ensemble")]
        model: ModelArg,
        /// Where the model goes (default: the data directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metrics, curves and the replayed operating point on held-out data.
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// Directory with trained models (default: the data directory).
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Hidden fraction and precision over the whole threshold grid.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        partition: PartitionArg,
        #[arg(long)]
        grid_steps: Option<usize>,
    },
    /// Choose (v1, v2) on the validation partition for a target precision.
    SelectThresholds {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        target: Option<f64>,
        #[arg(long)]
        grid_steps: Option<usize>,
    },
    /// Run the two-stage rule on every shown event of a log.
    Decide {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Compare the closed-form suggestion utility with simulation on a grid.
    VerifyProp1 {
        /// `default` or a TOML/JSON profile file.
        #[arg(long, default_value = "default")]
        profile: String,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Grid points between 0 and 1 inclusive.
        #[arg(long, default_value_t = 21)]
        grid_points: usize,
        /// Assume the programmer is not waiting on the suggestion.
        #[arg(long)]
        not_expecting: bool,
        /// Also write break-even.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test AU-ROC of stage-2 trees trained on fractions of the train partition.
    SampleComplexity {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// simulate, split, train both stages, select-thresholds, eval and sample-complexity in one go.
    Pipeline {
        #[arg(long)]
        out: PathBuf,
    },
}

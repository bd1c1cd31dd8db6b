use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mmlearn::Error;
use mmlearn_cli::commands::{benchmark, evaluate, perturb, train_source, transfer};

/// Differentially private semi-supervised transfer learning with
/// variational membership-mappings.
#[derive(Parser)]
#[command(name = "mmlearn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Synthetic,
    MnistSelf,
    Mnist2usps,
}

#[derive(Subcommand)]
enum Command {
    /// Perturb a dataset with the optimal (epsilon, delta)-DP noise mechanism.
    Perturb {
        /// Input data: a delimited table, or an IDX image file when
        /// --input-labels is given.
        #[arg(long)]
        input: PathBuf,
        /// IDX label file accompanying --input.
        #[arg(long)]
        input_labels: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Output IDX label file (required for IDX input).
        #[arg(long)]
        output_labels: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Delimited input carries a trailing label column.
        #[arg(long)]
        labelled: bool,
    },
    /// Train the differentially private source classifier and emit its
    /// archive together with the source subspace transformation matrix.
    TrainSource {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the full source-to-target pipeline and emit the transfer model.
    Transfer {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate a model archive on a labelled test set and write metrics.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Test set override: delimited table, or IDX images with
        /// --testset-labels.
        #[arg(long)]
        testset: Option<PathBuf>,
        #[arg(long)]
        testset_labels: Option<PathBuf>,
        /// Metrics file destination (default: <output_dir>/metrics.txt).
        #[arg(long)]
        metrics_out: Option<PathBuf>,
    },
    /// Run a desk-scale benchmark suite comparing private and non-private
    /// accuracy.
    Benchmark {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        /// Directory holding the suite's datasets (IDX MNIST files,
        /// usps-train.csv / usps-test.csv).
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help and version print to stdout and exit cleanly; real usage
            // errors are invalid parameters
            let code = if err.use_stderr() { 3 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Format(_) | Error::Version { .. } | Error::Io(_) => 2,
        Error::InvalidArgument(_) => 3,
        Error::NumericalFailure(_) | Error::DegenerateData(_) => 4,
    }
}

fn dispatch(cli: Cli) -> mmlearn::Result<()> {
    match cli.command {
        Command::Perturb {
            input,
            input_labels,
            output,
            output_labels,
            epsilon,
            delta,
            d,
            seed,
            labelled,
        } => perturb::run(&perturb::PerturbArgs {
            input,
            input_labels,
            output,
            output_labels,
            epsilon,
            delta,
            d,
            seed,
            labelled,
        }),
        Command::TrainSource { config, output } => {
            train_source::run(&train_source::TrainSourceArgs { config, output })
        }
        Command::Transfer { config, output } => {
            transfer::run(&transfer::TransferArgs { config, output })
        }
        Command::Evaluate {
            config,
            model,
            testset,
            testset_labels,
            metrics_out,
        } => evaluate::run(&evaluate::EvaluateArgs {
            config,
            model,
            testset,
            testset_labels,
            metrics_out,
        }),
        Command::Benchmark {
            suite,
            data_dir,
            output_dir,
            seed,
            epsilon,
            delta,
            d,
        } => benchmark::run(&benchmark::BenchmarkArgs {
            suite: match suite {
                SuiteArg::Synthetic => benchmark::Suite::Synthetic,
                SuiteArg::MnistSelf => benchmark::Suite::MnistSelf,
                SuiteArg::Mnist2usps => benchmark::Suite::Mnist2Usps,
            },
            data_dir,
            output_dir,
            seed,
            epsilon,
            delta,
            d,
        }),
    }
}

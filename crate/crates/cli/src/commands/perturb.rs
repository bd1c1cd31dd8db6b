use std::path::PathBuf;

use mmlearn::io::{load_delimited, load_idx, write_delimited, write_idx};
use mmlearn::privacy::{perturb, DpParams};
use mmlearn::{Error, Result};

use super::ensure_parent;

#[derive(Debug, Clone)]
pub struct PerturbArgs {
    pub input: PathBuf,
    /// IDX label file; its presence selects the IDX format.
    pub input_labels: Option<PathBuf>,
    pub output: PathBuf,
    pub output_labels: Option<PathBuf>,
    pub epsilon: f64,
    pub delta: f64,
    pub d: f64,
    pub seed: u64,
    /// Delimited input carries a trailing label column.
    pub labelled: bool,
}

/// Perturb a dataset with the optimal noise mechanism and write it back in
/// the input's format (IDX images are written as f64 IDX since perturbed
/// values are unbounded). Prints the empirical noise statistics.
pub fn run(args: &PerturbArgs) -> Result<()> {
    let dp = DpParams::new(args.epsilon, args.delta, args.d)?;
    let idx_mode = args.input_labels.is_some();
    let ds = match &args.input_labels {
        Some(labels) => load_idx(&args.input, labels)?,
        None => load_delimited(&args.input, args.labelled)?,
    };
    let features = ds.to_data_matrix()?;
    let noisy = perturb(&features, &dp, args.seed);

    let total = (features.dim() * features.len()) as f64;
    let mut abs_sum = 0.0;
    let mut zeros = 0usize;
    for (after, before) in noisy.matrix().iter().zip(features.matrix().iter()) {
        let v = after - before;
        abs_sum += v.abs();
        if v == 0.0 {
            zeros += 1;
        }
    }

    ensure_parent(&args.output)?;
    let raw_labels: Vec<i64> = ds
        .labels()
        .iter()
        .map(|&l| ds.original_labels()[l])
        .collect();
    if idx_mode {
        let out_labels = args.output_labels.clone().ok_or_else(|| {
            Error::InvalidArgument("--output-labels is required for IDX input".into())
        })?;
        ensure_parent(&out_labels)?;
        write_idx(&args.output, &out_labels, noisy.matrix(), &raw_labels)?;
    } else {
        let labels = args.labelled.then_some(raw_labels.as_slice());
        write_delimited(&args.output, noisy.matrix(), labels)?;
    }

    println!("n_values={}", total as u64);
    println!("mean_abs_noise={}", abs_sum / total);
    println!("zero_fraction={}", zeros as f64 / total);
    println!("expected_mean_abs_noise={}", dp.expected_magnitude());
    println!("output={}", args.output.display());
    Ok(())
}

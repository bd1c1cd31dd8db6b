use std::path::PathBuf;

use mmlearn::io::{
    archive_kind, classifier_from_archive, load_delimited, load_idx, transfer_from_archive,
    LabelledDataset, ModelArchive,
};
use mmlearn::transfer::multitask_predict_batch;
use mmlearn::{Error, Result};

use crate::config::ExperimentConfig;
use crate::metrics::{evaluate_labels, Metrics};

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub config: PathBuf,
    pub model: PathBuf,
    pub testset: Option<PathBuf>,
    pub testset_labels: Option<PathBuf>,
    pub metrics_out: Option<PathBuf>,
}

/// Evaluate a model archive (classifier or transfer) on a labelled test set:
/// prints accuracy, per-class accuracy and confusion counts, and writes the
/// same report as a flat key=value metrics file.
pub fn run(args: &EvaluateArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_path(&args.config)?;
    let test = load_test_set(args, &cfg)?;
    let archive = ModelArchive::load(&args.model)?;

    let (predicted, label_space) = match archive_kind(&archive)?.as_str() {
        "transfer" => {
            let model = transfer_from_archive(&archive)?;
            let winners = multitask_predict_batch(&model, test.features())?;
            let labels = model.target_classifier.labels().to_vec();
            let predicted: Vec<i64> = winners.into_iter().map(|w| labels[w]).collect();
            (predicted, labels)
        }
        "classifier" => {
            let (model, _) = classifier_from_archive(&archive)?;
            let winners = model.classify_batch(test.features())?;
            let labels = model.labels().to_vec();
            let predicted: Vec<i64> = winners.into_iter().map(|w| labels[w]).collect();
            (predicted, labels)
        }
        other => {
            return Err(Error::Format(format!("unknown archive kind {other:?}")));
        }
    };

    let truth: Vec<i64> = test
        .labels()
        .iter()
        .map(|&l| test.original_labels()[l])
        .collect();
    let evaluation = evaluate_labels(&truth, &predicted, &label_space)?;

    let mut metrics = Metrics::new();
    evaluation.add_to(&mut metrics);
    metrics.push("epsilon", cfg.privacy.epsilon);
    metrics.push("delta", cfg.privacy.delta);
    metrics.push("d", cfg.privacy.d);
    metrics.push("seed", cfg.run.seed);
    metrics.push("model", args.model.display());

    print!("{}", metrics.render());
    let out = args
        .metrics_out
        .clone()
        .unwrap_or_else(|| cfg.run.output_dir.join("metrics.txt"));
    metrics.write(&out)?;
    Ok(())
}

fn load_test_set(args: &EvaluateArgs, cfg: &ExperimentConfig) -> Result<LabelledDataset> {
    match (&args.testset, &args.testset_labels) {
        (Some(images), Some(labels)) => load_idx(images, labels),
        (Some(table), None) => load_delimited(table, true),
        (None, Some(_)) => Err(Error::InvalidArgument(
            "--testset-labels given without --testset".into(),
        )),
        (None, None) => cfg
            .test_data()?
            .ok_or_else(|| {
                Error::InvalidArgument("no test set: give --testset or configure data.test".into())
            })?
            .load(),
    }
}

use std::path::PathBuf;

use mmlearn::io::{split, transfer_to_archive};
use mmlearn::transfer::{fit_transfer, TransferModel};
use mmlearn::{Error, Result};

use crate::config::ExperimentConfig;

use super::ensure_parent;

#[derive(Debug, Clone)]
pub struct TransferArgs {
    pub config: PathBuf,
    pub output: PathBuf,
}

/// Run the full source-to-target pipeline and write the transfer model
/// archive. The labelled target subset is drawn per class from the target
/// pool under the run seed; the rest of the pool becomes the unlabelled set.
pub fn run(args: &TransferArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_path(&args.config)?;
    let source = cfg
        .source_data()?
        .ok_or_else(|| Error::InvalidArgument("config has no [data] source".into()))?
        .load()?;
    let target = cfg
        .target_data()?
        .ok_or_else(|| Error::InvalidArgument("config has no [data] target".into()))?
        .load()?;
    if source.original_labels() != target.original_labels() {
        return Err(Error::InvalidArgument(format!(
            "source labels {:?} and target labels {:?} differ",
            source.original_labels(),
            target.original_labels()
        )));
    }

    let model = fit_from_datasets(&cfg, &source, &target)?;
    ensure_parent(&args.output)?;
    transfer_to_archive(&model).save(&args.output)?;
    println!(
        "wrote transfer model ({} classes, source dim {}, target dim {}) to {}",
        model.class_count(),
        model.source_dim(),
        model.target_dim(),
        args.output.display()
    );
    Ok(())
}

/// Shared by the transfer command and the benchmark suites.
pub fn fit_from_datasets(
    cfg: &ExperimentConfig,
    source: &mmlearn::io::LabelledDataset,
    target: &mmlearn::io::LabelledDataset,
) -> Result<TransferModel> {
    let seed = cfg.run.seed;
    let source_groups = source.class_groups()?;
    let counts = vec![cfg.target.labelled_per_class; target.class_count()];
    let (labelled, rest) = split(target, &counts, seed)?;
    let labelled_groups = labelled.class_groups()?;
    let unlabelled = if rest.is_empty() {
        None
    } else {
        Some(rest.to_data_matrix()?)
    };

    let tc = cfg.transfer_config(source.dim(), target.dim())?;
    let model = fit_transfer(
        &source_groups,
        &labelled_groups,
        unlabelled.as_ref(),
        &tc,
        seed,
    )?;
    // carry the datasets' original labels for reporting
    let originals = source.original_labels().to_vec();
    Ok(TransferModel {
        source_classifier: model.source_classifier.with_labels(originals.clone())?,
        target_classifier: model.target_classifier.with_labels(originals)?,
        ..model
    })
}

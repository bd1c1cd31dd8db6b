use std::path::PathBuf;

use mmlearn::classifier::fit_classifier;
use mmlearn::io::classifier_to_archive;
use mmlearn::numkit::{principal_directions, DataMatrix};
use mmlearn::privacy::perturb_groups;
use mmlearn::{Error, Result};

use crate::config::ExperimentConfig;

use super::ensure_parent;

#[derive(Debug, Clone)]
pub struct TrainSourceArgs {
    pub config: PathBuf,
    pub output: PathBuf,
}

/// Perturb the source dataset, train the differentially private source
/// classifier, compute the private latent-subspace transformation matrix,
/// and write both to a model archive.
pub fn run(args: &TrainSourceArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_path(&args.config)?;
    let source = cfg
        .source_data()?
        .ok_or_else(|| Error::InvalidArgument("config has no [data] source".into()))?
        .load()?;
    let groups = source.class_groups()?;
    let p_sr = source.dim();
    let dp = cfg.privacy.params()?;
    let seed = cfg.run.seed;

    let perturbed = perturb_groups(&groups, &dp, seed);
    let n = cfg.source.n.unwrap_or_else(|| 20.min(p_sr));
    let model = fit_classifier(&perturbed, n, cfg.source.r_max, cfg.source.layers, seed)?
        .with_labels(source.original_labels().to_vec())?;

    let refs: Vec<&DataMatrix> = perturbed.iter().collect();
    let pooled = DataMatrix::concat(&refs)?;
    let n_st = cfg
        .transfer
        .n_st
        .unwrap_or_else(|| p_sr.div_ceil(2))
        .min(p_sr);
    let v_sr = principal_directions(&pooled, n_st)?;

    ensure_parent(&args.output)?;
    classifier_to_archive(&model, Some(&v_sr)).save(&args.output)?;
    println!(
        "wrote source classifier ({} classes, dimension {p_sr}, epsilon {}) to {}",
        model.class_count(),
        dp.epsilon(),
        args.output.display()
    );
    Ok(())
}

//! Per-class wide-CDMMA classification. Each class trains its own wide
//! autoencoder; an input is assigned the label whose autoencoder
//! reconstructs it with least squared error. The differentially private
//! variant perturbs every class matrix first and trains on the noisy data
//! only — privacy is then preserved under any post-processing.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::autoencoder::WideCdmmaModel;
use crate::error::{Error, Result};
use crate::numkit::DataMatrix;
use crate::privacy::{perturb_groups, DpParams};

/// One wide CDMMA per class plus the ordered label list.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    class_models: Vec<WideCdmmaModel>,
    labels: Vec<i64>,
}

impl ClassifierModel {
    pub fn from_parts(class_models: Vec<WideCdmmaModel>, labels: Vec<i64>) -> Result<Self> {
        if class_models.len() < 2 {
            return Err(Error::invalid(format!(
                "a classifier needs at least 2 classes, got {}",
                class_models.len()
            )));
        }
        if labels.len() != class_models.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} class models",
                labels.len(),
                class_models.len()
            )));
        }
        let dim = class_models[0].dim();
        if class_models.iter().any(|m| m.dim() != dim) {
            return Err(Error::invalid("class models disagree on feature dimension"));
        }
        Ok(ClassifierModel {
            class_models,
            labels,
        })
    }

    pub fn class_models(&self) -> &[WideCdmmaModel] {
        &self.class_models
    }

    /// Replace the label list, e.g. with a dataset's original labels.
    pub fn with_labels(self, labels: Vec<i64>) -> Result<Self> {
        Self::from_parts(self.class_models, labels)
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_models.len()
    }

    pub fn dim(&self) -> usize {
        self.class_models[0].dim()
    }

    /// Per-class squared reconstruction errors for one input.
    pub fn reconstruction_errors(&self, y: &[f64]) -> Result<DVector<f64>> {
        let mut errs = DVector::zeros(self.class_count());
        for (c, model) in self.class_models.iter().enumerate() {
            errs[c] = model.filter(y)?.error;
        }
        Ok(errs)
    }

    /// Assign the label whose class autoencoder best reconstructs `y`
    /// (ties to the lowest class index). Also returns every class error.
    pub fn classify(&self, y: &[f64]) -> Result<(i64, DVector<f64>)> {
        let errs = self.reconstruction_errors(y)?;
        Ok((self.labels[argmin(&errs)], errs))
    }

    /// Winning class indices for a batch of columns.
    pub fn classify_batch(&self, ys: &DMatrix<f64>) -> Result<Vec<usize>> {
        let per_class: Vec<Vec<f64>> = self
            .class_models
            .par_iter()
            .map(|m| m.filter_batch(ys).map(|(_, e)| e))
            .collect::<Result<Vec<_>>>()?;
        let cols = ys.ncols();
        let mut winners = vec![0usize; cols];
        for j in 0..cols {
            let mut best = 0usize;
            for c in 1..self.class_count() {
                if per_class[c][j] < per_class[best][j] {
                    best = c;
                }
            }
            winners[j] = best;
        }
        Ok(winners)
    }
}

fn argmin(errs: &DVector<f64>) -> usize {
    let mut best = 0;
    for c in 0..errs.len() {
        if errs[c] < errs[best] {
            best = c;
        }
    }
    best
}

/// Train one wide CDMMA per class; class c uses seed + c. Labels default to
/// the group indices 0..C.
pub fn fit_classifier(
    groups: &[DataMatrix],
    n: usize,
    r_max: f64,
    depth: usize,
    seed: u64,
) -> Result<ClassifierModel> {
    fit_classifier_with_labels(
        groups,
        &(0..groups.len() as i64).collect::<Vec<_>>(),
        n,
        r_max,
        depth,
        seed,
    )
}

pub fn fit_classifier_with_labels(
    groups: &[DataMatrix],
    labels: &[i64],
    n: usize,
    r_max: f64,
    depth: usize,
    seed: u64,
) -> Result<ClassifierModel> {
    if groups.len() < 2 {
        return Err(Error::invalid(format!(
            "a classifier needs at least 2 non-empty classes, got {}",
            groups.len()
        )));
    }
    let class_models: Vec<Result<WideCdmmaModel>> = groups
        .par_iter()
        .enumerate()
        .map(|(c, g)| WideCdmmaModel::fit(g, n, r_max, depth, seed.wrapping_add(c as u64)))
        .collect();
    let class_models = class_models.into_iter().collect::<Result<Vec<_>>>()?;
    ClassifierModel::from_parts(class_models, labels.to_vec())
}

/// Perturb every class matrix with the optimal noise mechanism, then train
/// the ordinary classifier on the perturbed data. The result is a
/// deterministic function of the noisy data alone.
pub fn fit_private_classifier(
    groups: &[DataMatrix],
    dp: &DpParams,
    n: usize,
    r_max: f64,
    depth: usize,
    seed: u64,
) -> Result<ClassifierModel> {
    let perturbed = perturb_groups(groups, dp, seed);
    fit_classifier(&perturbed, n, r_max, depth, seed)
}

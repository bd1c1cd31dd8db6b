//! Dataset ingestion (IDX and delimited text), per-class splits, and the
//! versioned binary model archive.

mod archive;
mod delimited;
mod idx;

pub use archive::{
    archive_kind, classifier_from_archive, classifier_to_archive, transfer_from_archive,
    transfer_to_archive, ModelArchive, Section, ARCHIVE_VERSION,
};
pub use delimited::{load_delimited, write_delimited};
pub use idx::{load_idx, write_idx};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkit::DataMatrix;

/// A labelled dataset: features stored column-wise (p x N) with dense
/// 0-based labels and the original label of each class retained for
/// reporting. A split may leave a subset empty; every model-facing
/// conversion re-checks non-emptiness through [`DataMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledDataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    class_count: usize,
    original_labels: Vec<i64>,
}

impl LabelledDataset {
    pub fn new(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        class_count: usize,
        original_labels: Vec<i64>,
    ) -> Result<Self> {
        if labels.len() != features.ncols() {
            return Err(Error::invalid(format!(
                "{} labels for {} samples",
                labels.len(),
                features.ncols()
            )));
        }
        if class_count == 0 {
            return Err(Error::invalid("class count must be at least 1"));
        }
        if original_labels.len() != class_count {
            return Err(Error::invalid(format!(
                "{} original labels for {class_count} classes",
                original_labels.len()
            )));
        }
        if labels.iter().any(|&l| l >= class_count) {
            return Err(Error::invalid("label outside [0, class_count)"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains NaN or Inf"));
        }
        Ok(LabelledDataset {
            features,
            labels,
            class_count,
            original_labels,
        })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn original_labels(&self) -> &[i64] {
        &self.original_labels
    }

    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.features.ncols() == 0
    }

    /// The whole feature block as a validated data matrix.
    pub fn to_data_matrix(&self) -> Result<DataMatrix> {
        DataMatrix::new(self.features.clone())
    }

    /// One data matrix per class, ordered by class index. Fails if any class
    /// has no samples.
    pub fn class_groups(&self) -> Result<Vec<DataMatrix>> {
        let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); self.class_count];
        for (j, &l) in self.labels.iter().enumerate() {
            per_class[l].push(j);
        }
        per_class
            .into_iter()
            .enumerate()
            .map(|(c, idx)| {
                if idx.is_empty() {
                    return Err(Error::invalid(format!(
                        "class {} has no samples",
                        self.original_labels[c]
                    )));
                }
                let mut m = DMatrix::zeros(self.dim(), idx.len());
                for (k, &j) in idx.iter().enumerate() {
                    m.set_column(k, &self.features.column(j));
                }
                DataMatrix::new(m)
            })
            .collect()
    }

    /// Subset by sample indices (kept in the given order), preserving the
    /// label space.
    pub fn select(&self, indices: &[usize]) -> Result<LabelledDataset> {
        let mut m = DMatrix::zeros(self.dim(), indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for (k, &j) in indices.iter().enumerate() {
            if j >= self.n_samples() {
                return Err(Error::invalid(format!("sample index {j} out of range")));
            }
            m.set_column(k, &self.features.column(j));
            labels.push(self.labels[j]);
        }
        Ok(LabelledDataset {
            features: m,
            labels,
            class_count: self.class_count,
            original_labels: self.original_labels.clone(),
        })
    }
}

/// Deterministic per-class split without replacement: subset A receives the
/// requested count from every class (sampled under the seed, kept in
/// original column order), subset B the remainder.
pub fn split(
    ds: &LabelledDataset,
    per_class: &[usize],
    seed: u64,
) -> Result<(LabelledDataset, LabelledDataset)> {
    if per_class.len() != ds.class_count() {
        return Err(Error::invalid(format!(
            "{} per-class counts for {} classes",
            per_class.len(),
            ds.class_count()
        )));
    }
    let mut class_indices: Vec<Vec<usize>> = vec![Vec::new(); ds.class_count()];
    for (j, &l) in ds.labels().iter().enumerate() {
        class_indices[l].push(j);
    }
    let mut take = Vec::new();
    let mut rest = Vec::new();
    for (c, idx) in class_indices.iter().enumerate() {
        if per_class[c] > idx.len() {
            return Err(Error::invalid(format!(
                "requested {} samples from class {} which has {}",
                per_class[c],
                ds.original_labels()[c],
                idx.len()
            )));
        }
        let mut shuffled = idx.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        shuffled.shuffle(&mut rng);
        let mut chosen: Vec<usize> = shuffled[..per_class[c]].to_vec();
        let mut remainder: Vec<usize> = shuffled[per_class[c]..].to_vec();
        chosen.sort_unstable();
        remainder.sort_unstable();
        take.extend(chosen);
        rest.extend(remainder);
    }
    take.sort_unstable();
    rest.sort_unstable();
    Ok((ds.select(&take)?, ds.select(&rest)?))
}

/// Remap raw labels to dense 0-based indices ordered by ascending raw label.
pub(crate) fn dense_labels(raw: &[i64]) -> (Vec<usize>, usize, Vec<i64>) {
    let mut uniq: Vec<i64> = raw.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let labels = raw
        .iter()
        .map(|l| uniq.binary_search(l).expect("label present"))
        .collect();
    let count = uniq.len();
    (labels, count, uniq)
}

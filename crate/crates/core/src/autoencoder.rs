//! Conditionally deep membership-mapping autoencoders (CDMMA) and their wide
//! (cluster-parallel) composition.
//!
//! A CDMMA stacks L layers, each a principal-subspace projection followed by
//! a membership-mapping back to the full space. Layer widths shrink as
//! n_l = max(n - l + 1, 1), so deeper layers reconstruct from increasingly
//! abstract encodings. Filtering returns whichever layer reconstructs the
//! input with least squared error. A wide CDMMA trains one CDMMA per k-means
//! cell of the data and filters through the best bank member.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::membership::MembershipMappingModel;
use crate::numkit::{kmeans_partition, principal_directions, DataMatrix};

/// One CDMMA layer: the projection onto the leading principal subspace and
/// the membership-mapping that reconstructs the full-dimensional vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CdmmaLayer {
    pub projection: DMatrix<f64>,
    pub mapping: MembershipMappingModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdmmaModel {
    layers: Vec<CdmmaLayer>,
    dim: usize,
}

/// Result of filtering one vector through a CDMMA: the winning
/// reconstruction, the 0-based index of the winning layer, and every layer's
/// squared reconstruction error.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub reconstruction: DVector<f64>,
    pub best_layer: usize,
    pub errors: Vec<f64>,
}

impl CdmmaModel {
    pub fn from_layers(layers: Vec<CdmmaLayer>, dim: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a CDMMA needs at least one layer"));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.projection.ncols() != dim {
                return Err(Error::invalid(format!(
                    "layer {l} projection has {} columns, expected {dim}",
                    layer.projection.ncols()
                )));
            }
            if layer.mapping.output_dim() != dim {
                return Err(Error::invalid(format!(
                    "layer {l} mapping reconstructs dimension {}, expected {dim}",
                    layer.mapping.output_dim()
                )));
            }
        }
        Ok(CdmmaModel { layers, dim })
    }

    pub fn layers(&self) -> &[CdmmaLayer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Reconstructed feature dimension p.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Variational learning: layer l projects onto the top
    /// max(n - l + 1, 1) principal directions of `y`, regresses `y` on the
    /// encoding of the previous layer's reconstruction, and caps its inducing
    /// points by the previous layer's fitted M.
    pub fn fit(y: &DataMatrix, n: usize, m_max: usize, depth: usize, seed: u64) -> Result<Self> {
        let p = y.dim();
        let samples = y.len();
        if n == 0 || n > p {
            return Err(Error::invalid(format!(
                "subspace dimension must lie in [1, {p}], got {n}"
            )));
        }
        if depth == 0 {
            return Err(Error::invalid("layer count must be at least 1"));
        }
        if m_max == 0 || m_max > samples {
            return Err(Error::invalid(format!(
                "m_max must lie in [1, {samples}], got {m_max}"
            )));
        }

        // Covariance rank caps the usable directions when the cluster is
        // smaller than the requested subspace.
        let rank_cap = p.min(samples.saturating_sub(1).max(1));
        let top = principal_directions(y, n.min(rank_cap))?;

        let mut layers = Vec::with_capacity(depth);
        let mut previous_recon: Option<DMatrix<f64>> = None;
        let mut m_cap = m_max;

        for l in 0..depth {
            let width = (n.saturating_sub(l)).max(1).min(rank_cap);
            let projection = top.rows(0, width).into_owned();
            let latent = match &previous_recon {
                None => &projection * y.matrix(),
                Some(recon) => &projection * recon,
            };
            let x = DataMatrix::new(latent)?;
            let mapping = MembershipMappingModel::fit(&x, y, m_cap, seed)?;
            m_cap = mapping.m();
            previous_recon = Some(mapping.predict_batch(x.matrix())?);
            layers.push(CdmmaLayer {
                projection,
                mapping,
            });
        }
        Ok(CdmmaModel { layers, dim: p })
    }

    /// Filter a single vector: every layer reconstructs it through the
    /// chained projection/prediction recursion and the least-squared-error
    /// layer wins (ties to the lowest index).
    pub fn filter(&self, y: &[f64]) -> Result<FilterOutput> {
        if y.len() != self.dim {
            return Err(Error::invalid(format!(
                "input has length {}, model reconstructs dimension {}",
                y.len(),
                self.dim
            )));
        }
        let column = DMatrix::from_column_slice(self.dim, 1, y);
        let (recons, errors) = self.layer_reconstructions(&column)?;
        let errs: Vec<f64> = (0..self.depth()).map(|l| errors[(l, 0)]).collect();
        let best = argmin(&errs);
        Ok(FilterOutput {
            reconstruction: recons[best].column(0).into_owned(),
            best_layer: best,
            errors: errs,
        })
    }

    /// Batch filtering: per-column winning reconstructions (p x B), winning
    /// layer indices, and the winning squared errors.
    pub fn filter_batch(&self, ys: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<usize>, Vec<f64>)> {
        if ys.nrows() != self.dim {
            return Err(Error::invalid(format!(
                "batch has dimension {}, model reconstructs {}",
                ys.nrows(),
                self.dim
            )));
        }
        let cols = ys.ncols();
        let (recons, errors) = self.layer_reconstructions(ys)?;
        let mut out = DMatrix::zeros(self.dim, cols);
        let mut winners = Vec::with_capacity(cols);
        let mut best_errors = Vec::with_capacity(cols);
        for j in 0..cols {
            let errs: Vec<f64> = (0..self.depth()).map(|l| errors[(l, j)]).collect();
            let best = argmin(&errs);
            out.set_column(j, &recons[best].column(j));
            winners.push(best);
            best_errors.push(errs[best]);
        }
        Ok((out, winners, best_errors))
    }

    /// All layers' reconstructions of the given columns plus the L x B
    /// squared-error table.
    fn layer_reconstructions(
        &self,
        ys: &DMatrix<f64>,
    ) -> Result<(Vec<DMatrix<f64>>, DMatrix<f64>)> {
        let cols = ys.ncols();
        let mut recons = Vec::with_capacity(self.depth());
        let mut errors = DMatrix::zeros(self.depth(), cols);
        let mut carry = ys.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let latent = &layer.projection * &carry;
            let recon = layer.mapping.predict_batch(&latent)?;
            for j in 0..cols {
                errors[(l, j)] = (recon.column(j) - ys.column(j)).norm_squared();
            }
            carry = recon.clone();
            recons.push(recon);
        }
        Ok((recons, errors))
    }
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// A bank of CDMMAs trained on a k-means partition of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct WideCdmmaModel {
    submodels: Vec<CdmmaModel>,
}

/// Result of wide filtering: the winning submodel's reconstruction, its
/// 0-based index, and its squared error.
#[derive(Debug, Clone)]
pub struct WideFilterOutput {
    pub reconstruction: DVector<f64>,
    pub best_submodel: usize,
    pub error: f64,
}

impl WideCdmmaModel {
    pub fn from_submodels(submodels: Vec<CdmmaModel>) -> Result<Self> {
        if submodels.is_empty() {
            return Err(Error::invalid("a wide CDMMA needs at least one submodel"));
        }
        let dim = submodels[0].dim();
        if submodels.iter().any(|s| s.dim() != dim) {
            return Err(Error::invalid("submodels disagree on feature dimension"));
        }
        Ok(WideCdmmaModel { submodels })
    }

    pub fn submodels(&self) -> &[CdmmaModel] {
        &self.submodels
    }

    pub fn bank_size(&self) -> usize {
        self.submodels.len()
    }

    pub fn dim(&self) -> usize {
        self.submodels[0].dim()
    }

    /// Partition `y` into S = ceil(N / 1000) k-means cells and fit one CDMMA
    /// per cell with m_max = ceil(r_max * cell size). Submodel s trains with
    /// seed + s.
    pub fn fit(y: &DataMatrix, n: usize, r_max: f64, depth: usize, seed: u64) -> Result<Self> {
        if !(r_max > 0.0 && r_max <= 1.0) {
            return Err(Error::invalid(format!(
                "r_max must lie in (0, 1], got {r_max}"
            )));
        }
        let samples = y.len();
        let banks = samples.div_ceil(1000);
        let groups = kmeans_partition(y, banks, seed)?;
        let submodels: Vec<Result<CdmmaModel>> = groups
            .par_iter()
            .enumerate()
            .map(|(s, idx)| {
                let cell = y.select_columns(idx)?;
                let m_max = ((r_max * cell.len() as f64).ceil() as usize).clamp(1, cell.len());
                CdmmaModel::fit(&cell, n, m_max, depth, seed.wrapping_add(s as u64))
            })
            .collect();
        let submodels = submodels.into_iter().collect::<Result<Vec<_>>>()?;
        WideCdmmaModel::from_submodels(submodels)
    }

    /// Filter through every bank member and keep the best reconstruction
    /// (ties to the lowest submodel index).
    pub fn filter(&self, y: &[f64]) -> Result<WideFilterOutput> {
        let mut best: Option<WideFilterOutput> = None;
        for (s, sub) in self.submodels.iter().enumerate() {
            let out = sub.filter(y)?;
            let err = out.errors[out.best_layer];
            if best.as_ref().is_none_or(|b| err < b.error) {
                best = Some(WideFilterOutput {
                    reconstruction: out.reconstruction,
                    best_submodel: s,
                    error: err,
                });
            }
        }
        Ok(best.expect("at least one submodel"))
    }

    /// Batch wide filtering: winning reconstructions (p x B) and per-column
    /// winning squared errors.
    pub fn filter_batch(&self, ys: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let cols = ys.ncols();
        let per_sub: Vec<(DMatrix<f64>, Vec<f64>)> = self
            .submodels
            .par_iter()
            .map(|sub| sub.filter_batch(ys).map(|(r, _, e)| (r, e)))
            .collect::<Result<Vec<_>>>()?;
        let mut out = DMatrix::zeros(self.dim(), cols);
        let mut best_errors = vec![f64::INFINITY; cols];
        let mut winners = vec![0usize; cols];
        for (s, (_, errs)) in per_sub.iter().enumerate() {
            for j in 0..cols {
                if errs[j] < best_errors[j] {
                    best_errors[j] = errs[j];
                    winners[j] = s;
                }
            }
        }
        for j in 0..cols {
            out.set_column(j, &per_sub[winners[j]].0.column(j));
        }
        Ok((out, best_errors))
    }
}

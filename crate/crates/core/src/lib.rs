//! Differentially private semi-supervised transfer and multi-task learning
//! built on variational membership-mappings.
//!
//! The building blocks, bottom up:
//!
//! * [`numkit`] — kernels, kernel matrices, k-means, principal directions and
//!   regularized symmetric solves shared by everything above.
//! * [`membership`] — variational learning of vector-valued membership-mappings
//!   with auxiliary inducing points, prediction, and the inducing-output
//!   posterior in closed form.
//! * [`autoencoder`] — conditionally deep membership-mapping autoencoders
//!   (CDMMA) and their wide (cluster-parallel) composition; filtering picks the
//!   layer / bank member with least squared reconstruction error.
//! * [`classifier`] — one wide CDMMA per class; classification is argmin
//!   reconstruction error, with a differentially private variant trained on
//!   noise-perturbed data.
//! * [`privacy`] — the optimal (ε,δ)-differentially-private noise mechanism:
//!   density, CDF, inverse-CDF sampling and dataset perturbation.
//! * [`transfer`] — the full source→target pipeline: DP source classifier,
//!   subspace alignment, iterative pseudo-labelled target training,
//!   source2target regression and the multi-task prediction rule.
//! * [`io`] — IDX / delimited ingestion, per-class splits and the versioned
//!   binary model archive.

pub mod autoencoder;
pub mod classifier;
mod error;
pub mod io;
pub mod membership;
pub mod numkit;
pub mod privacy;
pub mod transfer;

pub use error::{Error, Result};

//! Vietoris-Rips persistent homology, representation topology divergence
//! (RTD) with subgradients, and a task-residual few-shot trainer that adds an
//! RTD term aligning visual and text embedding clouds.

pub mod cloud;
pub mod error;
pub mod fewshot;
pub mod filtration;
pub mod io;
pub mod persistence;
pub mod rtd;
pub mod rtd_grad;
mod union_find;

pub use cloud::{pairwise_distances, DistanceMatrix, PointCloud};
pub use error::{Error, Result};
pub use filtration::{build_vr_filtration, FilteredComplex, FilteredSimplex, Simplex};
pub use persistence::{compute_persistence, zero_dim_persistence, Barcode, PersistencePair};

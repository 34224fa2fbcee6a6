//! Class-balanced batches: exactly one sample per class, in class order, so
//! batch row `k` corresponds to classifier row `k`.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::EmbeddingDataset;
use crate::error::{Error, Result};

/// Row indices of one batch; entry `k` is a sample of class `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub indices: Vec<usize>,
}

impl Batch {
    pub fn gather(&self, ds: &EmbeddingDataset) -> Array2<f64> {
        ds.embeddings().select(Axis(0), &self.indices)
    }
}

/// Draws each class's samples without replacement, reshuffling a class's pool
/// whenever it runs out. Every epoch starts from a fresh shuffle.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    pools: Vec<Vec<usize>>,
    cursors: Vec<usize>,
    batches_per_epoch: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(ds: &EmbeddingDataset, seed: u64) -> Result<Self> {
        let pools = ds.class_indices();
        if let Some(k) = pools.iter().position(Vec::is_empty) {
            return Err(Error::MissingClass(k));
        }
        let batches_per_epoch = pools.iter().map(Vec::len).max().unwrap_or(0);
        let cursors = vec![0; pools.len()];
        Ok(Self {
            pools,
            cursors,
            batches_per_epoch,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// The size of the largest class.
    pub fn batches_per_epoch(&self) -> usize {
        self.batches_per_epoch
    }

    pub fn next_epoch(&mut self) -> Vec<Batch> {
        for (pool, cursor) in self.pools.iter_mut().zip(self.cursors.iter_mut()) {
            pool.shuffle(&mut self.rng);
            *cursor = 0;
        }
        (0..self.batches_per_epoch)
            .map(|_| {
                let indices = self
                    .pools
                    .iter_mut()
                    .zip(self.cursors.iter_mut())
                    .map(|(pool, cursor)| {
                        if *cursor == pool.len() {
                            pool.shuffle(&mut self.rng);
                            *cursor = 0;
                        }
                        *cursor += 1;
                        pool[*cursor - 1]
                    })
                    .collect();
                Batch { indices }
            })
            .collect()
    }
}

/// Batches for `epochs` consecutive epochs.
pub fn class_balanced_batches(
    ds: &EmbeddingDataset,
    seed: u64,
    epochs: usize,
) -> Result<Vec<Vec<Batch>>> {
    let mut sampler = BatchSampler::new(ds, seed)?;
    Ok((0..epochs).map(|_| sampler.next_epoch()).collect())
}

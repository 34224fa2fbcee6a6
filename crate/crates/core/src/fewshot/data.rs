use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Visual embeddings with class labels in `0..class_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    embeddings: Array2<f64>,
    labels: Vec<usize>,
    class_count: usize,
    split: Split,
}

impl EmbeddingDataset {
    pub fn new(
        embeddings: Array2<f64>,
        labels: Vec<usize>,
        class_count: usize,
        split: Split,
    ) -> Result<Self> {
        if embeddings.nrows() != labels.len() {
            return Err(Error::ShapeMismatch {
                what: "embedding rows vs labels",
                left: embeddings.nrows(),
                right: labels.len(),
            });
        }
        if embeddings.ncols() == 0 {
            return Err(Error::invalid("embeddings have no columns"));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::invalid(format!(
                "row {i} has label {l}, expected < {class_count}"
            )));
        }
        if let Some(((i, j), v)) = embeddings.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite embedding {v} at row {i}, column {j}"
            )));
        }
        Ok(Self {
            embeddings,
            labels,
            class_count,
            split,
        })
    }

    pub fn embeddings(&self) -> ArrayView2<'_, f64> {
        self.embeddings.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.ncols()
    }

    /// Row indices of each class, in dataset order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Keeps at most `shots` rows per class, chosen by a seeded shuffle.
    pub fn subsample_shots(&self, shots: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = Vec::new();
        for mut idx in self.class_indices() {
            idx.shuffle(&mut rng);
            idx.truncate(shots);
            keep.extend(idx);
        }
        keep.sort_unstable();
        let embeddings = self.embeddings.select(ndarray::Axis(0), &keep);
        let labels = keep.iter().map(|&i| self.labels[i]).collect();
        Self::new(embeddings, labels, self.class_count, self.split)
    }
}

/// Frozen text classifier: one embedding row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseClassifier {
    text_weights: Array2<f64>,
}

impl BaseClassifier {
    pub fn new(text_weights: Array2<f64>) -> Result<Self> {
        if text_weights.nrows() == 0 || text_weights.ncols() == 0 {
            return Err(Error::invalid("base classifier is empty"));
        }
        for (k, row) in text_weights.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "class {k} text weights are not finite"
                )));
            }
            if row.dot(&row) == 0.0 {
                return Err(Error::invalid(format!(
                    "class {k} text weights have zero norm"
                )));
            }
        }
        Ok(Self { text_weights })
    }

    pub fn text_weights(&self) -> ArrayView2<'_, f64> {
        self.text_weights.view()
    }

    pub fn class_count(&self) -> usize {
        self.text_weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.text_weights.ncols()
    }
}

fn normalized(v: Array1<f64>) -> Array1<f64> {
    let norm = v.dot(&v).sqrt();
    v / norm
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub train_shots: usize,
    pub test_shots: usize,
    pub dim: usize,
    /// Expected norm of the Gaussian noise added to each visual sample.
    pub cluster_spread: f64,
    /// Rotation angle (radians) and noise norm applied to the text rows.
    pub modality_gap: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            train_shots: 16,
            test_shots: 50,
            dim: 32,
            cluster_spread: 1.5,
            modality_gap: 1.5,
            seed: 0,
        }
    }
}

/// Desk-scale stand-in for CLIP embeddings.
///
/// Class centers are uniform on the unit sphere. Visual samples are centers
/// plus isotropic noise, normalized. Text rows are the centers rotated by
/// `modality_gap` radians in one random plane, plus noise of norm
/// `modality_gap`, normalized.
pub fn gen_synthetic(
    spec: &SyntheticSpec,
) -> Result<(EmbeddingDataset, EmbeddingDataset, BaseClassifier)> {
    let SyntheticSpec {
        classes: k,
        train_shots,
        test_shots,
        dim: d,
        cluster_spread,
        modality_gap,
        seed,
    } = *spec;
    if k < 1 || train_shots < 1 || test_shots < 1 || d < 2 {
        return Err(Error::invalid(format!(
            "need classes, shots >= 1 and dim >= 2, got k={k} shots={train_shots}/{test_shots} d={d}"
        )));
    }
    if !(cluster_spread >= 0.0 && modality_gap >= 0.0) {
        return Err(Error::invalid(
            "spread and modality gap must be non-negative",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaussian =
        |n: usize| -> Array1<f64> { Array1::from_shape_fn(n, |_| StandardNormal.sample(&mut rng)) };
    let centers: Vec<Array1<f64>> = (0..k).map(|_| normalized(gaussian(d))).collect();

    // orthonormal plane (a, b) for the text-side rotation
    let a = normalized(gaussian(d));
    let b = {
        let g = gaussian(d);
        let proj = g.dot(&a);
        normalized(g - &a * proj)
    };
    let (cos, sin) = (modality_gap.cos(), modality_gap.sin());
    let noise_scale = 1.0 / (d as f64).sqrt();
    let mut text = Array2::zeros((k, d));
    for (c, center) in centers.iter().enumerate() {
        let (ca, cb) = (center.dot(&a), center.dot(&b));
        let rotated =
            center + &(&a * ((cos - 1.0) * ca - sin * cb)) + &(&b * (sin * ca + (cos - 1.0) * cb));
        let row = rotated + gaussian(d) * (modality_gap * noise_scale);
        text.row_mut(c).assign(&normalized(row));
    }

    let mut sample = |shots: usize, split: Split| -> Result<EmbeddingDataset> {
        let mut rows = Array2::zeros((k * shots, d));
        let mut labels = Vec::with_capacity(k * shots);
        for (c, center) in centers.iter().enumerate() {
            for s in 0..shots {
                let v = center + &(gaussian(d) * (cluster_spread * noise_scale));
                rows.row_mut(c * shots + s).assign(&normalized(v));
                labels.push(c);
            }
        }
        EmbeddingDataset::new(rows, labels, k, split)
    };
    let train = sample(train_shots, Split::Train)?;
    let test = sample(test_shots, Split::Test)?;
    Ok((train, test, BaseClassifier::new(text)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gap_zero_spread_gives_identical_modalities() {
        let spec = SyntheticSpec {
            classes: 4,
            train_shots: 2,
            test_shots: 1,
            dim: 6,
            cluster_spread: 0.0,
            modality_gap: 0.0,
            seed: 9,
        };
        let (train, _, base) = gen_synthetic(&spec).unwrap();
        for (i, &l) in train.labels().iter().enumerate() {
            assert_eq!(train.embeddings().row(i), base.text_weights().row(l));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = SyntheticSpec::default();
        let a = gen_synthetic(&spec).unwrap();
        let b = gen_synthetic(&spec).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.2, b.2);
        let c = gen_synthetic(&SyntheticSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn dataset_validation() {
        let e = Array2::zeros((2, 3));
        assert!(EmbeddingDataset::new(e.clone(), vec![0, 3], 3, Split::Train).is_err());
        assert!(EmbeddingDataset::new(e.clone(), vec![0], 3, Split::Train).is_err());
        assert!(BaseClassifier::new(Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn subsample_keeps_at_most_shots() {
        let (train, _, _) = gen_synthetic(&SyntheticSpec::default()).unwrap();
        let sub = train.subsample_shots(3, 1).unwrap();
        assert!(sub.class_indices().iter().all(|c| c.len() == 3));
    }
}

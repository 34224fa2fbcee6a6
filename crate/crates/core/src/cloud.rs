//! Point clouds and Euclidean distance matrices.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// `n` points in `R^d`, one per row. The row index is the point's identity, so
/// two clouds correspond when they have the same `n` and row `i` in each refers
/// to the same underlying sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Array2<f64>,
}

impl PointCloud {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 || d == 0 {
            return Err(Error::invalid(format!(
                "point cloud must have at least one point and one coordinate, got {n}x{d}"
            )));
        }
        if let Some(((i, j), v)) = points.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite coordinate {v} at point {i}, axis {j}"
            )));
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::invalid(format!(
                "row {i} has {} coordinates, expected {d}",
                r.len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let points = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Self::new(points)
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.points
    }
}

/// Symmetric, zero-diagonal matrix of non-negative pairwise weights.
///
/// [`DistanceMatrix::BLOCKED`] (`+inf`) marks a pair that never becomes an
/// edge; it compares greater than every finite entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    entries: Array2<f64>,
}

impl DistanceMatrix {
    pub const BLOCKED: f64 = f64::INFINITY;

    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::invalid(format!(
                "distance matrix is {r}x{c}, not square"
            )));
        }
        for i in 0..r {
            if entries[[i, i]] != 0.0 {
                return Err(Error::invalid(format!(
                    "distance matrix diagonal entry {i} is {}",
                    entries[[i, i]]
                )));
            }
            for j in (i + 1)..r {
                let v = entries[[i, j]];
                if v.is_nan() || v < 0.0 || (v.is_infinite() && v != Self::BLOCKED) {
                    return Err(Error::invalid(format!("bad distance {v} at ({i}, {j})")));
                }
                if v != entries[[j, i]] {
                    return Err(Error::invalid(format!(
                        "distance matrix not symmetric at ({i}, {j}): {v} vs {}",
                        entries[[j, i]]
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[[i, j]]
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn is_blocked(&self, i: usize, j: usize) -> bool {
        self.entries[[i, j]] == Self::BLOCKED
    }
}

pub(crate) fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn pairwise_distances(cloud: &PointCloud) -> DistanceMatrix {
    let n = cloud.n();
    let mut entries = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(cloud.point(i), cloud.point(j));
            entries[[i, j]] = d;
            entries[[j, i]] = d;
        }
    }
    DistanceMatrix { entries }
}

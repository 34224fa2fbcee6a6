//! R-Cross-Barcodes and representation topology divergence, plus the
//! Cross-Barcode / MTop-Div comparison for clouds without correspondence.
//!
//! For corresponding clouds with distance matrices `w` and `w~`, the auxiliary
//! graph has `2N` vertices: `A_0..A_{N-1}` (ids `0..N`) and `A'_0..A'_{N-1}`
//! (ids `N..2N`). Its weight matrix is
//!
//! ```text
//!     | 0     w+^T        |
//!     | w+    min(w, w~)  |
//! ```
//!
//! where `w+` is `w` with the strictly lower triangle blocked.

use ndarray::Array2;

use crate::cloud::{euclidean, pairwise_distances, DistanceMatrix, PointCloud};
use crate::error::{Error, Result};
use crate::filtration::build_vr_filtration;
use crate::persistence::{compute_persistence, Barcode, PersistencePair};

/// Which source an entry of the cross matrix was copied from. Indices are
/// into the `N x N` matrices `w` / `w~`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ZeroBlock,
    WPlus { i: usize, j: usize },
    MinW { i: usize, j: usize },
    MinWTilde { i: usize, j: usize },
    Blocked,
}

#[derive(Debug, Clone)]
pub struct CrossMatrix {
    n: usize,
    m: Array2<f64>,
    provenance: Array2<Provenance>,
}

impl CrossMatrix {
    /// Size of each source cloud; the matrix is `2n x 2n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> &Array2<f64> {
        &self.m
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.m[[a, b]]
    }

    pub fn provenance(&self, a: usize, b: usize) -> Provenance {
        self.provenance[[a, b]]
    }

    /// One weight per vertex pair: the smaller of the two oriented entries.
    pub fn edge_weights(&self) -> Result<DistanceMatrix> {
        let size = 2 * self.n;
        let sym = Array2::from_shape_fn((size, size), |(a, b)| self.m[[a, b]].min(self.m[[b, a]]));
        DistanceMatrix::new(sym)
    }

    /// Provenance of the entry that supplies the weight of edge `{a, b}`.
    pub fn edge_provenance(&self, a: usize, b: usize) -> Provenance {
        if self.m[[b, a]] < self.m[[a, b]] {
            self.provenance[[b, a]]
        } else {
            self.provenance[[a, b]]
        }
    }
}

pub fn build_rtd_matrix(w: &DistanceMatrix, wt: &DistanceMatrix) -> Result<CrossMatrix> {
    let n = w.n();
    if wt.n() != n {
        return Err(Error::ShapeMismatch {
            what: "distance matrix size",
            left: n,
            right: wt.n(),
        });
    }
    if n < 2 {
        return Err(Error::invalid(format!(
            "RTD needs at least 2 points, got {n}"
        )));
    }
    let size = 2 * n;
    let mut m = Array2::zeros((size, size));
    let mut provenance = Array2::from_elem((size, size), Provenance::ZeroBlock);
    for i in 0..n {
        for j in 0..n {
            // bottom-left: w+[i][j]; top-right: (w+)^T, so entry (j, N+i) = w+[i][j]
            let (v, p) = if i <= j {
                (w.get(i, j), Provenance::WPlus { i, j })
            } else {
                (DistanceMatrix::BLOCKED, Provenance::Blocked)
            };
            m[[n + i, j]] = v;
            provenance[[n + i, j]] = p;
            m[[j, n + i]] = v;
            provenance[[j, n + i]] = p;

            let (a, b) = (w.get(i, j), wt.get(i, j));
            let (v, p) = if a <= b {
                (a, Provenance::MinW { i, j })
            } else {
                (b, Provenance::MinWTilde { i, j })
            };
            m[[n + i, n + j]] = v;
            provenance[[n + i, n + j]] = p;
        }
    }
    Ok(CrossMatrix { n, m, provenance })
}

/// H1 R-Cross-Barcode together with the matrix it was computed from.
#[derive(Debug, Clone)]
pub struct DirectedCross {
    pub matrix: CrossMatrix,
    pub barcode: Barcode,
}

impl DirectedCross {
    /// Sum of bar lengths before the symmetrizing factor.
    pub fn total_length(&self) -> f64 {
        self.barcode.total_finite_length(1)
    }
}

fn check_pair(p: &PointCloud, pt: &PointCloud) -> Result<()> {
    if p.n() != pt.n() {
        return Err(Error::ShapeMismatch {
            what: "point count",
            left: p.n(),
            right: pt.n(),
        });
    }
    if p.n() < 2 {
        return Err(Error::invalid(format!(
            "RTD needs at least 2 points, got {}",
            p.n()
        )));
    }
    Ok(())
}

pub(crate) fn directed_cross(w: &DistanceMatrix, wt: &DistanceMatrix) -> Result<DirectedCross> {
    let matrix = build_rtd_matrix(w, wt)?;
    let fc = build_vr_filtration(&matrix.edge_weights()?, 2)?;
    let barcode = compute_persistence(&fc)?.restrict_to_dim(1);
    if let Some(p) = barcode.pairs().iter().find(|p| p.is_essential()) {
        return Err(Error::Numeric(format!(
            "R-Cross-Barcode has an infinite H1 bar born at {} by {:?}",
            p.birth, p.birth_simplex
        )));
    }
    Ok(DirectedCross { matrix, barcode })
}

/// R-Cross-Barcode(P, P~) in dimension `dim` (only 1 is supported).
pub fn r_cross_barcode(p: &PointCloud, pt: &PointCloud, dim: usize) -> Result<Barcode> {
    if dim != 1 {
        return Err(Error::invalid(format!(
            "only the 1-dimensional R-Cross-Barcode is supported, got {dim}"
        )));
    }
    check_pair(p, pt)?;
    Ok(directed_cross(&pairwise_distances(p), &pairwise_distances(pt))?.barcode)
}

#[derive(Debug, Clone)]
pub struct RtdReport {
    /// Half the sum of H1 bar lengths over both directions.
    pub score: f64,
    /// R-Cross-Barcode(P, P~) and its matrix.
    pub forward: DirectedCross,
    /// R-Cross-Barcode(P~, P) and its matrix.
    pub backward: DirectedCross,
}

impl RtdReport {
    pub fn barcode_fwd(&self) -> &Barcode {
        &self.forward.barcode
    }

    pub fn barcode_bwd(&self) -> &Barcode {
        &self.backward.barcode
    }

    /// Birth and death simplices of every positive-length interval, per direction.
    pub fn critical_pairs(&self) -> [&[PersistencePair]; 2] {
        [self.forward.barcode.pairs(), self.backward.barcode.pairs()]
    }
}

pub fn rtd_score(p: &PointCloud, pt: &PointCloud) -> Result<RtdReport> {
    check_pair(p, pt)?;
    let w = pairwise_distances(p);
    let wt = pairwise_distances(pt);
    rtd_from_distances(&w, &wt)
}

pub(crate) fn rtd_from_distances(w: &DistanceMatrix, wt: &DistanceMatrix) -> Result<RtdReport> {
    let (forward, backward) = rayon::join(|| directed_cross(w, wt), || directed_cross(wt, w));
    let (forward, backward) = (forward?, backward?);
    let score = 0.5 * (forward.total_length() + backward.total_length());
    Ok(RtdReport {
        score,
        forward,
        backward,
    })
}

/// H1 Cross-Barcode(P, Q): VR filtration on `P ∪ Q` (P first) with every
/// distance between two points of Q set to zero.
pub fn cross_barcode(p: &PointCloud, q: &PointCloud) -> Result<Barcode> {
    if p.d() != q.d() {
        return Err(Error::ShapeMismatch {
            what: "ambient dimension",
            left: p.d(),
            right: q.d(),
        });
    }
    let (np, nq) = (p.n(), q.n());
    let size = np + nq;
    let point = |i: usize| if i < np { p.point(i) } else { q.point(i - np) };
    let entries = Array2::from_shape_fn((size, size), |(a, b)| {
        if a == b || (a >= np && b >= np) {
            0.0
        } else {
            euclidean(point(a), point(b))
        }
    });
    let fc = build_vr_filtration(&DistanceMatrix::new(entries)?, 2)?;
    Ok(compute_persistence(&fc)?.restrict_to_dim(1))
}

/// Sum of H1 bar lengths of the Cross-Barcode.
pub fn mtop_div(p: &PointCloud, q: &PointCloud) -> Result<f64> {
    Ok(cross_barcode(p, q)?.total_finite_length(1))
}

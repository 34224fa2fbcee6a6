//! Persistent homology over Z/2 by boundary-matrix column reduction.
//!
//! Columns are reduced left to right in filtration order. The default
//! [`Reduction::Twist`] variant walks dimensions from the top down and skips
//! ("clears") every column already known to be a birth, which yields exactly
//! the same pivots as the plain algorithm.
//!
//! Every pair carries the simplices that caused its birth and death. Pairs
//! with `birth == death` are kept apart from the public pairs because they
//! contribute nothing to bar-length sums or their gradients.

use std::collections::HashMap;

use crate::cloud::DistanceMatrix;
use crate::error::{Error, Result};
use crate::filtration::{FilteredComplex, Simplex};
use crate::union_find::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair {
    pub dim: usize,
    pub birth: f64,
    /// `f64::INFINITY` for classes that never die.
    pub death: f64,
    pub birth_simplex: Simplex,
    pub death_simplex: Option<Simplex>,
}

impl PersistencePair {
    pub fn is_essential(&self) -> bool {
        self.death == f64::INFINITY
    }

    pub fn length(&self) -> f64 {
        self.death - self.birth
    }
}

#[derive(Debug, Clone, Default)]
pub struct Barcode {
    pairs: Vec<PersistencePair>,
    zero_length: Vec<PersistencePair>,
    max_dim_computed: usize,
}

impl Barcode {
    fn from_all(all: Vec<PersistencePair>, max_dim_computed: usize) -> Self {
        let (pairs, zero_length) = all.into_iter().partition(|p| p.death > p.birth);
        Self {
            pairs,
            zero_length,
            max_dim_computed,
        }
    }

    /// Pairs with strictly positive length (including infinite ones).
    pub fn pairs(&self) -> &[PersistencePair] {
        &self.pairs
    }

    /// Pairs dropped because their birth and death coincide.
    pub fn zero_length_pairs(&self) -> &[PersistencePair] {
        &self.zero_length
    }

    pub fn pairs_in_dim(&self, dim: usize) -> impl Iterator<Item = &PersistencePair> + '_ {
        self.pairs.iter().filter(move |p| p.dim == dim)
    }

    /// Dimension cap of the complex this barcode came from. Homology is
    /// complete for dimensions below it.
    pub fn max_dim_computed(&self) -> usize {
        self.max_dim_computed
    }

    /// Number of classes of dimension `dim` alive at `eps` (`birth <= eps < death`).
    pub fn betti_at(&self, dim: usize, eps: f64) -> usize {
        self.pairs_in_dim(dim)
            .filter(|p| p.birth <= eps && eps < p.death)
            .count()
    }

    /// Sum of finite bar lengths in `dim`.
    pub fn total_finite_length(&self, dim: usize) -> f64 {
        self.pairs_in_dim(dim)
            .filter(|p| !p.is_essential())
            .map(PersistencePair::length)
            .fold(0.0, |acc, l| acc + l)
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub(crate) fn restrict_to_dim(mut self, dim: usize) -> Self {
        self.pairs.retain(|p| p.dim == dim);
        self.zero_length.retain(|p| p.dim == dim);
        self
    }
}

/// Column-reduction variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Plain left-to-right reduction over all columns.
    Standard,
    /// Top dimension first, skipping columns of simplices already paired as births.
    #[default]
    Twist,
}

pub fn compute_persistence(fc: &FilteredComplex) -> Result<Barcode> {
    compute_persistence_with(fc, Reduction::default())
}

const NONE: u32 = u32::MAX;

enum EdgeLookup {
    Dense { n: usize, idx: Vec<u32> },
    Sparse(HashMap<(u32, u32), u32>),
}

impl EdgeLookup {
    fn new(n: usize) -> Self {
        if n <= 4096 {
            EdgeLookup::Dense {
                n,
                idx: vec![NONE; n * n],
            }
        } else {
            EdgeLookup::Sparse(HashMap::new())
        }
    }

    fn insert(&mut self, a: u32, b: u32, at: u32) {
        match self {
            EdgeLookup::Dense { n, idx } => idx[a as usize * *n + b as usize] = at,
            EdgeLookup::Sparse(map) => {
                map.insert((a, b), at);
            }
        }
    }

    fn get(&self, a: u32, b: u32) -> u32 {
        match self {
            EdgeLookup::Dense { n, idx } => idx[a as usize * *n + b as usize],
            EdgeLookup::Sparse(map) => map.get(&(a, b)).copied().unwrap_or(NONE),
        }
    }
}

/// Boundary of every simplex as sorted indices into the filtration order.
/// Fails if a face is missing or enters after its coface.
fn boundary_columns(fc: &FilteredComplex) -> Result<Vec<[u32; 3]>> {
    let simplices = fc.simplices();
    if simplices.len() >= NONE as usize {
        return Err(Error::invalid("complex too large"));
    }
    let mut vertex_idx = vec![NONE; fc.n_vertices()];
    let mut edges = EdgeLookup::new(fc.n_vertices());
    let mut columns = Vec::with_capacity(simplices.len());
    for (at, s) in simplices.iter().enumerate() {
        let v = s.simplex.vertices();
        let mut col = [NONE; 3];
        match v.len() {
            1 => vertex_idx[v[0] as usize] = at as u32,
            2 => {
                edges.insert(v[0], v[1], at as u32);
                col[0] = vertex_idx[v[0] as usize];
                col[1] = vertex_idx[v[1] as usize];
            }
            _ => {
                col[0] = edges.get(v[0], v[1]);
                col[1] = edges.get(v[0], v[2]);
                col[2] = edges.get(v[1], v[2]);
            }
        }
        // a k-simplex with k >= 1 has k + 1 faces
        let n_faces = if v.len() == 1 { 0 } else { v.len() };
        let faces = &mut col[..n_faces];
        if let Some(pos) = faces.iter().position(|&f| f == NONE) {
            let missing = s
                .simplex
                .faces()
                .nth(n_faces - 1 - pos)
                .expect("face index in range");
            return Err(Error::NonMonotone(format!(
                "face {missing:?} of {:?} is missing or enters after it",
                s.simplex
            )));
        }
        faces.sort_unstable();
        columns.push(col);
    }
    Ok(columns)
}

/// `acc ^= other` for sorted index sets, using `scratch` as the output buffer.
fn add_column(acc: &mut Vec<u32>, other: &[u32], scratch: &mut Vec<u32>) {
    scratch.clear();
    let (mut i, mut j) = (0, 0);
    while i < acc.len() && j < other.len() {
        match acc[i].cmp(&other[j]) {
            std::cmp::Ordering::Less => {
                scratch.push(acc[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                scratch.push(other[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    scratch.extend_from_slice(&acc[i..]);
    scratch.extend_from_slice(&other[j..]);
    std::mem::swap(acc, scratch);
}

pub fn compute_persistence_with(fc: &FilteredComplex, reduction: Reduction) -> Result<Barcode> {
    let simplices = fc.simplices();
    let boundaries = boundary_columns(fc)?;
    let n = simplices.len();
    let max_dim = fc.max_dim();

    // pivot_owner[row] = column whose reduced pivot is `row`
    let mut pivot_owner = vec![NONE; n];
    let mut reduced: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut work = Vec::new();
    let mut scratch = Vec::new();

    let dims: Vec<usize> = match reduction {
        Reduction::Twist => (1..=max_dim).rev().collect(),
        Reduction::Standard => vec![usize::MAX],
    };
    for target in dims {
        for (j, s) in simplices.iter().enumerate() {
            let dim = s.simplex.dim();
            if dim == 0 || (target != usize::MAX && dim != target) {
                continue;
            }
            if reduction == Reduction::Twist && pivot_owner[j] != NONE {
                // already a birth: its column reduces to zero
                continue;
            }
            work.clear();
            work.extend_from_slice(&boundaries[j][..dim + 1]);
            while let Some(&low) = work.last() {
                let owner = pivot_owner[low as usize];
                if owner == NONE {
                    break;
                }
                add_column(&mut work, &reduced[&owner], &mut scratch);
            }
            if let Some(&low) = work.last() {
                pivot_owner[low as usize] = j as u32;
                reduced.insert(j as u32, std::mem::take(&mut work));
            }
        }
    }

    let mut is_death = vec![false; n];
    let mut all = Vec::new();
    for (row, &col) in pivot_owner.iter().enumerate() {
        if col == NONE {
            continue;
        }
        is_death[col as usize] = true;
        let b = &simplices[row];
        let d = &simplices[col as usize];
        all.push(PersistencePair {
            dim: b.simplex.dim(),
            birth: b.value,
            death: d.value,
            birth_simplex: b.simplex,
            death_simplex: Some(d.simplex),
        });
    }
    for (i, s) in simplices.iter().enumerate() {
        let dim = s.simplex.dim();
        if dim < max_dim && !is_death[i] && pivot_owner[i] == NONE {
            all.push(PersistencePair {
                dim,
                birth: s.value,
                death: f64::INFINITY,
                birth_simplex: s.simplex,
                death_simplex: None,
            });
        }
    }
    all.sort_by(|a, b| {
        a.dim
            .cmp(&b.dim)
            .then(a.birth.total_cmp(&b.birth))
            .then(a.death.total_cmp(&b.death))
            .then_with(|| a.birth_simplex.cmp(&b.birth_simplex))
    });
    Ok(Barcode::from_all(all, max_dim))
}

/// H0 of the Vietoris-Rips filtration of `dist` by single-linkage merging.
///
/// Edges are processed in filtration order; each merge at weight `w` closes
/// the bar of the component whose oldest vertex has the larger id.
pub fn zero_dim_persistence(dist: &DistanceMatrix) -> Barcode {
    let n = dist.n();
    let mut edges: Vec<(f64, u32, u32)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            if !dist.is_blocked(i, j) {
                edges.push((dist.get(i, j), i as u32, j as u32));
            }
        }
    }
    edges.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    let mut uf = UnionFind::new(n);
    let mut all = Vec::with_capacity(n);
    for (w, a, b) in edges {
        let (ra, rb) = (uf.find(a as usize), uf.find(b as usize));
        if ra == rb {
            continue;
        }
        let younger = uf.oldest(ra).max(uf.oldest(rb));
        uf.union_roots(ra, rb);
        all.push(PersistencePair {
            dim: 0,
            birth: 0.0,
            death: w,
            birth_simplex: Simplex::vertex(younger),
            death_simplex: Some(Simplex::edge(a as usize, b as usize)),
        });
    }
    for v in 0..n {
        if uf.find(v) == v {
            all.push(PersistencePair {
                dim: 0,
                birth: 0.0,
                death: f64::INFINITY,
                birth_simplex: Simplex::vertex(uf.oldest(v)),
                death_simplex: None,
            });
        }
    }
    all.sort_by(|a, b| {
        a.death
            .total_cmp(&b.death)
            .then_with(|| a.birth_simplex.cmp(&b.birth_simplex))
    });
    Barcode::from_all(all, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{pairwise_distances, PointCloud};
    use crate::filtration::build_vr_filtration;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};

    fn vr(points: Array2<f64>, max_dim: usize) -> FilteredComplex {
        let dist = pairwise_distances(&PointCloud::new(points).unwrap());
        build_vr_filtration(&dist, max_dim).unwrap()
    }

    #[test]
    fn two_points_one_merge() {
        let bc = compute_persistence(&vr(array![[0.0], [2.0]], 2)).unwrap();
        let got: Vec<_> = bc
            .pairs()
            .iter()
            .map(|p| (p.dim, p.birth, p.death))
            .collect();
        assert_eq!(got, vec![(0, 0.0, 2.0), (0, 0.0, f64::INFINITY)]);
    }

    #[test]
    fn unit_square_loop() {
        let bc = compute_persistence(&vr(
            array![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            2,
        ))
        .unwrap();
        let h1: Vec<_> = bc.pairs_in_dim(1).collect();
        assert_eq!(h1.len(), 1);
        assert_eq!(h1[0].birth, 1.0);
        assert_eq!(h1[0].death, 2f64.sqrt());
        assert_eq!(h1[0].birth_simplex.dim(), 1);
        assert_eq!(h1[0].death_simplex.unwrap().dim(), 2);
        assert_eq!(bc.betti_at(1, 1.2), 1);
        assert_eq!(bc.betti_at(1, 0.9), 0);
        assert_eq!(bc.betti_at(1, 1.5), 0);
        assert_eq!(bc.betti_at(0, 0.5), 4);
        assert_eq!(bc.betti_at(0, 1.0), 1);
    }

    #[test]
    fn abstract_filtration_rejects_non_monotone() {
        let fc = FilteredComplex::from_simplices(
            2,
            vec![
                (Simplex::vertex(0), 0.0),
                (Simplex::vertex(1), 3.0),
                (Simplex::edge(0, 1), 1.0),
            ],
        )
        .unwrap();
        assert!(matches!(
            compute_persistence(&fc),
            Err(Error::NonMonotone(_))
        ));
    }

    #[test]
    fn twist_matches_standard_pairing() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = rng.random_range(3..9);
            let fc = vr(
                Array2::from_shape_fn((n, 2), |_| rng.random_range(0.0..1.0)),
                2,
            );
            let a = compute_persistence_with(&fc, Reduction::Standard).unwrap();
            let b = compute_persistence_with(&fc, Reduction::Twist).unwrap();
            assert_eq!(a.pairs(), b.pairs());
            assert_eq!(a.zero_length_pairs(), b.zero_length_pairs());
        }
    }

    #[test]
    fn zero_dim_matches_reduction_critical_simplices() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.random_range(1..10);
            let pts = Array2::from_shape_fn((n, 3), |_| rng.random_range(0.0..1.0));
            let dist = pairwise_distances(&PointCloud::new(pts).unwrap());
            let fast = zero_dim_persistence(&dist);
            let full = compute_persistence(&build_vr_filtration(&dist, 1).unwrap()).unwrap();
            let mut a: Vec<_> = fast.pairs().to_vec();
            let mut b: Vec<_> = full.pairs_in_dim(0).copied().collect();
            let key = |p: &PersistencePair| (p.death.to_bits(), p.birth_simplex);
            a.sort_by_key(key);
            b.sort_by_key(key);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn duplicate_points_give_zero_length_bars() {
        let bc = compute_persistence(&vr(array![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]], 2)).unwrap();
        assert_eq!(bc.pairs_in_dim(0).count(), 2);
        let h0_zero: Vec<_> = bc
            .zero_length_pairs()
            .iter()
            .filter(|p| p.dim == 0)
            .collect();
        assert_eq!(h0_zero.len(), 1);
        assert_eq!(h0_zero[0].death, 0.0);
        // edge {1,2} closes a cycle that triangle {0,1,2} fills at the same value
        assert_eq!(
            bc.zero_length_pairs().iter().filter(|p| p.dim == 1).count(),
            1
        );
    }

    #[test]
    fn empty_total_length_is_positive_zero() {
        let bc = compute_persistence(&vr(array![[0.0], [0.0]], 2)).unwrap();
        assert!(bc.total_finite_length(1).is_sign_positive());
    }

    #[test]
    fn single_vertex() {
        let bc = compute_persistence(&vr(array![[1.0]], 2)).unwrap();
        assert_eq!(bc.pairs().len(), 1);
        assert!(bc.pairs()[0].is_essential());
    }
}

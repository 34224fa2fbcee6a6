//! Simplices and Vietoris-Rips filtrations.

use std::cmp::Ordering;
use std::fmt;

use crate::cloud::DistanceMatrix;
use crate::error::{Error, Result};

/// Largest simplex dimension the crate builds. H0 and H1 are complete at this cap.
pub const MAX_DIM: usize = 2;

/// A simplex of dimension at most 2, stored as strictly increasing vertex ids.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Simplex {
    verts: [u32; 3],
    len: u8,
}

impl Simplex {
    pub fn new(vertices: &[usize]) -> Result<Self> {
        if vertices.is_empty() || vertices.len() > MAX_DIM + 1 {
            return Err(Error::invalid(format!(
                "simplex must have 1..={} vertices, got {}",
                MAX_DIM + 1,
                vertices.len()
            )));
        }
        if vertices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "simplex vertices must be strictly increasing: {vertices:?}"
            )));
        }
        let mut verts = [0u32; 3];
        for (slot, &v) in verts.iter_mut().zip(vertices) {
            *slot = u32::try_from(v).map_err(|_| Error::invalid("vertex id overflows u32"))?;
        }
        Ok(Self {
            verts,
            len: vertices.len() as u8,
        })
    }

    pub fn vertex(v: usize) -> Self {
        Self {
            verts: [v as u32, 0, 0],
            len: 1,
        }
    }

    /// Edge between two distinct vertices, in either order.
    pub fn edge(a: usize, b: usize) -> Self {
        debug_assert_ne!(a, b);
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        Self {
            verts: [a as u32, b as u32, 0],
            len: 2,
        }
    }

    /// Triangle on three distinct vertices, in any order.
    pub fn triangle(a: usize, b: usize, c: usize) -> Self {
        let mut v = [a as u32, b as u32, c as u32];
        v.sort_unstable();
        debug_assert!(v[0] < v[1] && v[1] < v[2]);
        Self { verts: v, len: 3 }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.len as usize - 1
    }

    #[inline]
    pub fn vertices(&self) -> &[u32] {
        &self.verts[..self.len as usize]
    }

    /// Codimension-one faces, each obtained by dropping one vertex.
    pub fn faces(&self) -> impl Iterator<Item = Simplex> + '_ {
        let len = self.len as usize;
        let skip = if len > 1 { 0..len } else { 0..0 };
        skip.map(move |drop| {
            let mut verts = [0u32; 3];
            let mut k = 0;
            for (i, &v) in self.vertices().iter().enumerate() {
                if i != drop {
                    verts[k] = v;
                    k += 1;
                }
            }
            Simplex {
                verts,
                len: (len - 1) as u8,
            }
        })
    }

    /// All edges of the simplex, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let v = self.vertices();
        (0..v.len())
            .flat_map(move |i| ((i + 1)..v.len()).map(move |j| (v[i] as usize, v[j] as usize)))
    }
}

impl Ord for Simplex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.vertices().cmp(other.vertices())
    }
}

impl PartialOrd for Simplex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.vertices())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredSimplex {
    pub simplex: Simplex,
    pub value: f64,
}

/// Filtration order: value, then dimension, then lexicographic vertices.
pub fn filtration_order(a: &FilteredSimplex, b: &FilteredSimplex) -> Ordering {
    a.value
        .total_cmp(&b.value)
        .then(a.simplex.dim().cmp(&b.simplex.dim()))
        .then_with(|| a.simplex.cmp(&b.simplex))
}

/// Simplices with filtration values, stored in filtration order.
#[derive(Debug, Clone)]
pub struct FilteredComplex {
    n_vertices: usize,
    max_dim: usize,
    simplices: Vec<FilteredSimplex>,
}

impl FilteredComplex {
    /// Builds a complex from an arbitrary simplex list. Values must be finite
    /// and non-negative and simplices unique. Face closure and monotonicity are
    /// not enforced here; see [`FilteredComplex::check_monotone`].
    pub fn from_simplices(
        n_vertices: usize,
        simplices: impl IntoIterator<Item = (Simplex, f64)>,
    ) -> Result<Self> {
        let mut simplices: Vec<FilteredSimplex> = simplices
            .into_iter()
            .map(|(simplex, value)| FilteredSimplex { simplex, value })
            .collect();
        let mut max_dim = 0;
        for s in &simplices {
            if !(s.value.is_finite() && s.value >= 0.0) {
                return Err(Error::invalid(format!(
                    "simplex {:?} has filtration value {}",
                    s.simplex, s.value
                )));
            }
            if let Some(&v) = s
                .simplex
                .vertices()
                .iter()
                .find(|&&v| v as usize >= n_vertices)
            {
                return Err(Error::invalid(format!(
                    "vertex {v} out of range for {n_vertices} vertices"
                )));
            }
            max_dim = max_dim.max(s.simplex.dim());
        }
        simplices.sort_unstable_by(filtration_order);
        let mut sorted_ids: Vec<Simplex> = simplices.iter().map(|s| s.simplex).collect();
        sorted_ids.sort_unstable();
        if let Some(w) = sorted_ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate simplex {:?}", w[0])));
        }
        Ok(Self {
            n_vertices,
            max_dim,
            simplices,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Dimension cap the complex was built with (or the largest simplex present).
    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    /// Simplices in filtration order.
    pub fn simplices(&self) -> &[FilteredSimplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn count_dim(&self, dim: usize) -> usize {
        self.simplices
            .iter()
            .filter(|s| s.simplex.dim() == dim)
            .count()
    }

    /// Distinct filtration values, ascending.
    pub fn critical_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.simplices.iter().map(|s| s.value).collect();
        v.dedup();
        v
    }

    /// Every face of every simplex must be present with a value no larger than
    /// the simplex's own.
    pub fn check_monotone(&self) -> Result<()> {
        let mut values = std::collections::HashMap::with_capacity(self.simplices.len());
        for s in &self.simplices {
            values.insert(s.simplex, s.value);
        }
        for s in &self.simplices {
            for face in s.simplex.faces() {
                match values.get(&face) {
                    None => {
                        return Err(Error::NonMonotone(format!(
                            "face {face:?} of {:?} is missing",
                            s.simplex
                        )))
                    }
                    Some(&fv) if fv > s.value => {
                        return Err(Error::NonMonotone(format!(
                            "face {face:?} has value {fv} > {} of {:?}",
                            s.value, s.simplex
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    /// The subcomplex of simplices with value `<= eps`, in filtration order.
    pub fn complex_at_threshold(&self, eps: f64) -> Vec<Simplex> {
        let end = self.simplices.partition_point(|s| s.value <= eps);
        self.simplices[..end].iter().map(|s| s.simplex).collect()
    }
}

/// Vietoris-Rips filtration of `dist` up to dimension `max_dim` (1 or 2).
///
/// Vertices enter at 0; every other simplex enters at the largest pairwise
/// entry among its vertices. Pairs at [`DistanceMatrix::BLOCKED`] never become
/// edges, and neither do any of their cofaces.
pub fn build_vr_filtration(dist: &DistanceMatrix, max_dim: usize) -> Result<FilteredComplex> {
    if !(1..=MAX_DIM).contains(&max_dim) {
        return Err(Error::invalid(format!(
            "max_dim must be 1 or 2, got {max_dim}"
        )));
    }
    let n = dist.n();
    if n > u32::MAX as usize {
        return Err(Error::invalid("too many vertices"));
    }
    let mut simplices: Vec<FilteredSimplex> = (0..n)
        .map(|v| FilteredSimplex {
            simplex: Simplex::vertex(v),
            value: 0.0,
        })
        .collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = dist.get(i, j);
            if v != DistanceMatrix::BLOCKED {
                simplices.push(FilteredSimplex {
                    simplex: Simplex::edge(i, j),
                    value: v,
                });
            }
        }
    }
    if max_dim == 2 {
        for i in 0..n {
            for j in (i + 1)..n {
                let ij = dist.get(i, j);
                if ij == DistanceMatrix::BLOCKED {
                    continue;
                }
                for k in (j + 1)..n {
                    let ik = dist.get(i, k);
                    let jk = dist.get(j, k);
                    if ik == DistanceMatrix::BLOCKED || jk == DistanceMatrix::BLOCKED {
                        continue;
                    }
                    simplices.push(FilteredSimplex {
                        simplex: Simplex::triangle(i, j, k),
                        value: ij.max(ik).max(jk),
                    });
                }
            }
        }
    }
    simplices.sort_unstable_by(filtration_order);
    Ok(FilteredComplex {
        n_vertices: n,
        max_dim,
        simplices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{pairwise_distances, PointCloud};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};

    fn equilateral() -> FilteredComplex {
        let d =
            DistanceMatrix::new(array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]).unwrap();
        build_vr_filtration(&d, 2).unwrap()
    }

    #[test]
    fn equilateral_triangle_counts() {
        let fc = equilateral();
        assert_eq!(fc.count_dim(0), 3);
        assert_eq!(fc.count_dim(1), 3);
        assert_eq!(fc.count_dim(2), 1);
        for s in fc.simplices() {
            let expected = if s.simplex.dim() == 0 { 0.0 } else { 1.0 };
            assert_eq!(s.value, expected);
        }
        assert_eq!(fc.complex_at_threshold(0.5).len(), 3);
        assert_eq!(fc.complex_at_threshold(1.0).len(), 7);
        fc.check_monotone().unwrap();
    }

    #[test]
    fn two_points() {
        let d = DistanceMatrix::new(array![[0.0, 2.5], [2.5, 0.0]]).unwrap();
        let fc = build_vr_filtration(&d, 2).unwrap();
        let got: Vec<_> = fc
            .simplices()
            .iter()
            .map(|s| (s.simplex.vertices().to_vec(), s.value))
            .collect();
        assert_eq!(got, vec![(vec![0], 0.0), (vec![1], 0.0), (vec![0, 1], 2.5)]);
    }

    #[test]
    fn four_points_match_subset_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pts = Array2::from_shape_fn((4, 3), |_| rng.random_range(0.0..1.0));
        let dist = pairwise_distances(&PointCloud::new(pts).unwrap());
        let fc = build_vr_filtration(&dist, 2).unwrap();
        assert_eq!(fc.len(), 14);
        // every non-empty vertex subset of size <= 3, by bitmask
        let mut seen = 0;
        for mask in 1u32..16 {
            let vs: Vec<usize> = (0..4).filter(|b| mask & (1 << b) != 0).collect();
            if vs.len() > 3 {
                continue;
            }
            let mut expected: f64 = 0.0;
            for &a in &vs {
                for &b in &vs {
                    expected = expected.max(dist.get(a, b));
                }
            }
            let s = Simplex::new(&vs).unwrap();
            let found = fc.simplices().iter().find(|f| f.simplex == s).unwrap();
            assert_eq!(found.value, expected);
            seen += 1;
        }
        assert_eq!(seen, 14);
    }

    #[test]
    fn blocked_edges_remove_cofaces() {
        let inf = DistanceMatrix::BLOCKED;
        let d =
            DistanceMatrix::new(array![[0.0, 1.0, inf], [1.0, 0.0, 1.0], [inf, 1.0, 0.0]]).unwrap();
        let fc = build_vr_filtration(&d, 2).unwrap();
        assert_eq!(fc.count_dim(1), 2);
        assert_eq!(fc.count_dim(2), 0);
    }

    #[test]
    fn rejects_bad_max_dim() {
        let d = DistanceMatrix::new(array![[0.0]]).unwrap();
        assert!(build_vr_filtration(&d, 0).is_err());
        assert!(build_vr_filtration(&d, 3).is_err());
    }

    #[test]
    fn tie_breaking_is_value_dim_lex() {
        let fc = equilateral();
        let order: Vec<Vec<u32>> = fc
            .simplices()
            .iter()
            .map(|s| s.simplex.vertices().to_vec())
            .collect();
        assert_eq!(
            order,
            vec![
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2],
                vec![0, 1, 2]
            ]
        );
    }

    #[test]
    fn monotonicity_violations_detected() {
        let bad = FilteredComplex::from_simplices(
            2,
            vec![
                (Simplex::vertex(0), 0.0),
                (Simplex::vertex(1), 2.0),
                (Simplex::edge(0, 1), 1.0),
            ],
        )
        .unwrap();
        assert!(matches!(bad.check_monotone(), Err(Error::NonMonotone(_))));
        let missing = FilteredComplex::from_simplices(
            2,
            vec![(Simplex::vertex(0), 0.0), (Simplex::edge(0, 1), 1.0)],
        )
        .unwrap();
        assert!(missing.check_monotone().is_err());
    }

    #[test]
    fn simplex_faces_and_edges() {
        let t = Simplex::triangle(4, 1, 7);
        assert_eq!(t.vertices(), &[1, 4, 7]);
        let faces: Vec<_> = t.faces().collect();
        assert_eq!(
            faces,
            vec![
                Simplex::edge(4, 7),
                Simplex::edge(1, 7),
                Simplex::edge(1, 4)
            ]
        );
        assert_eq!(t.edges().collect::<Vec<_>>(), vec![(1, 4), (1, 7), (4, 7)]);
        assert_eq!(Simplex::vertex(3).faces().count(), 0);
        assert!(Simplex::new(&[2, 1]).is_err());
        assert!(Simplex::new(&[0, 1, 2, 3]).is_err());
    }
}

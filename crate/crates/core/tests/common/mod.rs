//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance harness.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rtd_topo::fewshot::{gen_synthetic, BaseClassifier, EmbeddingDataset, SyntheticSpec};
use rtd_topo::rtd::rtd_score;
use rtd_topo::{DistanceMatrix, FilteredComplex, PointCloud, Simplex};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointCloud {
    PointCloud::new(Array2::from_shape_fn((n, d), |_| {
        StandardNormal.sample(rng)
    }))
    .unwrap()
}

pub fn uniform_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointCloud {
    PointCloud::new(Array2::from_shape_fn((n, d), |_| {
        rng.random_range(-1.0..1.0)
    }))
    .unwrap()
}

/// Small-integer coordinates, so that many pairwise distances tie exactly.
pub fn grid_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointCloud {
    PointCloud::new(Array2::from_shape_fn((n, d), |_| {
        rng.random_range(0..3) as f64
    }))
    .unwrap()
}

/// Euclidean distances computed with a plain double loop.
pub fn naive_distances(p: &PointCloud) -> Vec<Vec<f64>> {
    let x = p.points();
    (0..p.n())
        .map(|i| {
            (0..p.n())
                .map(|j| {
                    let mut s = 0.0;
                    for k in 0..p.d() {
                        s += (x[[i, k]] - x[[j, k]]).powi(2);
                    }
                    s.sqrt()
                })
                .collect()
        })
        .collect()
}

pub fn distance_matrix(w: &[Vec<f64>]) -> DistanceMatrix {
    let n = w.len();
    DistanceMatrix::new(Array2::from_shape_fn((n, n), |(i, j)| w[i][j])).unwrap()
}

/// Rank over Z/2 of a set of columns given as sorted row-index lists.
pub fn rank_z2(columns: &[Vec<usize>], rows: usize) -> usize {
    let words = rows.div_ceil(64).max(1);
    let mut basis: Vec<Option<Vec<u64>>> = vec![None; rows];
    let mut rank = 0;
    for col in columns {
        let mut v = vec![0u64; words];
        for &r in col {
            v[r / 64] ^= 1 << (r % 64);
        }
        while let Some(top) = (0..rows).rev().find(|&r| v[r / 64] >> (r % 64) & 1 == 1) {
            match &basis[top] {
                Some(b) => v.iter_mut().zip(b).for_each(|(x, y)| *x ^= y),
                None => {
                    basis[top] = Some(v);
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}

/// Betti numbers `[b0, b1]` of an abstract complex of vertex lists (each
/// sorted, all faces present), via `b_p = dim C_p - rank d_p - rank d_{p+1}`.
pub fn betti_oracle(simplices: &[Vec<usize>]) -> [usize; 2] {
    let by_dim =
        |k: usize| -> Vec<&Vec<usize>> { simplices.iter().filter(|s| s.len() == k + 1).collect() };
    let (verts, edges, tris) = (by_dim(0), by_dim(1), by_dim(2));
    let index = |set: &[&Vec<usize>], s: &[usize]| {
        set.iter()
            .position(|t| t.as_slice() == s)
            .expect("face present")
    };
    let boundary = |cells: &[&Vec<usize>], faces: &[&Vec<usize>]| -> Vec<Vec<usize>> {
        cells
            .iter()
            .map(|c| {
                (0..c.len())
                    .map(|drop| {
                        let f: Vec<usize> = c
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != drop)
                            .map(|(_, &v)| v)
                            .collect();
                        index(faces, &f)
                    })
                    .collect()
            })
            .collect()
    };
    let r1 = rank_z2(&boundary(&edges, &verts), verts.len());
    let r2 = rank_z2(&boundary(&tris, &edges), edges.len());
    [verts.len() - r1, edges.len() - r1 - r2]
}

/// Every vertex, edge and triangle whose pairwise distances are all <= eps.
#[allow(clippy::needless_range_loop)]
pub fn vr_oracle_complex(w: &[Vec<f64>], eps: f64) -> Vec<Vec<usize>> {
    let n = w.len();
    let mut out: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for i in 0..n {
        for j in i + 1..n {
            if w[i][j] <= eps {
                out.push(vec![i, j]);
                for k in j + 1..n {
                    if w[i][k] <= eps && w[j][k] <= eps {
                        out.push(vec![i, j, k]);
                    }
                }
            }
        }
    }
    out
}

/// Distinct filtration values of a VR complex: 0 and every pairwise distance.
pub fn critical_thresholds(w: &[Vec<f64>]) -> Vec<f64> {
    let mut t: Vec<f64> = vec![0.0];
    for (i, row) in w.iter().enumerate() {
        t.extend(row.iter().skip(i + 1).copied());
    }
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// Four vertices a, b, c, d; then edges ab, bc, ac, cd, bd; then triangle abc.
pub fn betti_table_filtration() -> (FilteredComplex, Vec<Vec<Vec<usize>>>) {
    let steps: Vec<Vec<Vec<usize>>> = vec![
        vec![vec![0], vec![1], vec![2], vec![3]],
        vec![vec![0, 1]],
        vec![vec![1, 2]],
        vec![vec![0, 2]],
        vec![vec![2, 3]],
        vec![vec![1, 3]],
        vec![vec![0, 1, 2]],
    ];
    let simplices: Vec<(Simplex, f64)> = steps
        .iter()
        .enumerate()
        .flat_map(|(t, step)| {
            step.iter()
                .map(move |s| (Simplex::new(s).unwrap(), t as f64))
        })
        .collect();
    let cumulative = (0..steps.len()).map(|t| steps[..=t].concat()).collect();
    (
        FilteredComplex::from_simplices(4, simplices).unwrap(),
        cumulative,
    )
}

/// `p` rotated by `theta` in its first coordinate plane, plus uniform noise.
pub fn perturbed_copy(rng: &mut ChaCha8Rng, p: &PointCloud, theta: f64, noise: f64) -> PointCloud {
    let mut q = p.points().to_owned();
    for mut row in q.rows_mut() {
        let (x, y) = (row[0], row[1]);
        row[0] = theta.cos() * x - theta.sin() * y;
        row[1] = theta.sin() * x + theta.cos() * y;
        for v in row.iter_mut() {
            *v += noise * rng.random_range(-1.0..1.0);
        }
    }
    PointCloud::new(q).unwrap()
}

pub fn shifted(p: &PointCloud, t: &Array2<f64>) -> PointCloud {
    PointCloud::new(&p.points() + t).unwrap()
}

pub fn score(p: &PointCloud, pt: &PointCloud) -> f64 {
    rtd_score(p, pt).unwrap().score
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-12 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// The desk-scale few-shot benchmark: 10 classes, 32 dims, 16 shots.
pub fn synthetic_task(seed: u64) -> (EmbeddingDataset, EmbeddingDataset, BaseClassifier) {
    gen_synthetic(&SyntheticSpec {
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rtd_topo::{rtd::rtd_score, PointCloud};

fn main() {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100);
    let d = 64;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let p = PointCloud::new(Array2::from_shape_fn((n, d), |_| {
        rng.random_range(-1.0..1.0)
    }))
    .unwrap();
    let pt = PointCloud::new(Array2::from_shape_fn((n, d), |_| {
        rng.random_range(-1.0..1.0)
    }))
    .unwrap();
    let t = Instant::now();
    let r = rtd_score(&p, &pt).unwrap();
    println!(
        "n={n} score={} bars={}+{} in {:?}",
        r.score,
        r.barcode_fwd().pairs().len(),
        r.barcode_bwd().pairs().len(),
        t.elapsed()
    );
}

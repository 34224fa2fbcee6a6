//! Subgradients of the RTD score with respect to point coordinates.
//!
//! Each H1 interval `[b, d)` contributes `+1` to the derivative with respect
//! to the filtration value of its death simplex and `-1` for its birth
//! simplex. A simplex's value is the largest weight among its edges, an edge's
//! weight comes from one entry of `w`, `w~` or the zero block, and each
//! distance finally differentiates to `(p_i - p_j) / |p_i - p_j|`.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cloud::{pairwise_distances, DistanceMatrix, PointCloud};
use crate::error::{Error, Result};
use crate::filtration::Simplex;
use crate::rtd::{
    rtd_from_distances, rtd_score, CrossMatrix, DirectedCross, Provenance, RtdReport,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RtdGradient {
    /// d RTD / d P, same shape as P.
    pub grad_p: Array2<f64>,
    /// d RTD / d P~, same shape as P~.
    pub grad_pt: Array2<f64>,
}

/// Largest-weight edge of a simplex; ties go to the lexicographically smallest.
pub(crate) fn argmax_edge(simplex: &Simplex, weights: &CrossMatrix) -> (usize, usize) {
    let mut best: Option<((usize, usize), f64)> = None;
    for (a, b) in simplex.edges() {
        let v = weights.get(a, b).min(weights.get(b, a));
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some(((a, b), v));
        }
    }
    best.expect("simplex has at least one edge").0
}

/// Derivative of one direction's bar-length sum with respect to the filtration
/// value of each critical simplex, as `(simplex, coefficient)` terms.
pub fn simplex_derivatives(cross: &DirectedCross) -> Vec<(Simplex, f64)> {
    let mut out = Vec::with_capacity(2 * cross.barcode.pairs().len());
    for pair in cross.barcode.pairs() {
        if let Some(death) = pair.death_simplex {
            out.push((death, 1.0));
        }
        out.push((pair.birth_simplex, -1.0));
    }
    out
}

/// Accumulates `coef * d(bar lengths)/d(w, w~)` of one direction into the
/// upper triangles of `dw` and `dwt`.
fn route_direction(cross: &DirectedCross, coef: f64, dw: &mut Array2<f64>, dwt: &mut Array2<f64>) {
    for (simplex, c) in simplex_derivatives(cross) {
        let (a, b) = argmax_edge(&simplex, &cross.matrix);
        let (slot, i, j) = match cross.matrix.edge_provenance(a, b) {
            Provenance::ZeroBlock | Provenance::Blocked => continue,
            Provenance::WPlus { i, j } | Provenance::MinW { i, j } => (&mut *dw, i, j),
            Provenance::MinWTilde { i, j } => (&mut *dwt, i, j),
        };
        if i == j {
            continue;
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        slot[[i, j]] += coef * c;
    }
}

/// Pulls a gradient with respect to the upper triangle of a distance matrix
/// back to point coordinates.
fn distances_to_coordinates(
    cloud: &PointCloud,
    dist: &DistanceMatrix,
    ddist: &Array2<f64>,
) -> Array2<f64> {
    let (n, d) = (cloud.n(), cloud.d());
    let mut grad = Array2::zeros((n, d));
    for i in 0..n {
        for j in (i + 1)..n {
            let g = ddist[[i, j]];
            let w = dist.get(i, j);
            if g == 0.0 || w == 0.0 {
                continue;
            }
            for k in 0..d {
                let t = g * (cloud.points()[[i, k]] - cloud.points()[[j, k]]) / w;
                grad[[i, k]] += t;
                grad[[j, k]] -= t;
            }
        }
    }
    grad
}

pub fn rtd_subgradient(p: &PointCloud, pt: &PointCloud) -> Result<(RtdGradient, RtdReport)> {
    let report = rtd_score(p, pt)?;
    let n = p.n();
    let w = pairwise_distances(p);
    let wt = pairwise_distances(pt);
    // forward uses (w, w~) = (P, P~); backward swaps the roles
    let mut dp = Array2::zeros((n, n));
    let mut dpt = Array2::zeros((n, n));
    route_direction(&report.forward, 0.5, &mut dp, &mut dpt);
    route_direction(&report.backward, 0.5, &mut dpt, &mut dp);
    let gradient = RtdGradient {
        grad_p: distances_to_coordinates(p, &w, &dp),
        grad_pt: distances_to_coordinates(pt, &wt, &dpt),
    };
    Ok((gradient, report))
}

/// Plain gradient descent on `pt` alone. Returns the final cloud and the score
/// before each step plus the score at the end.
pub fn descend_rtd_with_history(
    p: &PointCloud,
    pt: &PointCloud,
    steps: usize,
    lr: f64,
) -> Result<(PointCloud, Vec<f64>)> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!(
            "learning rate must be >= 0, got {lr}"
        )));
    }
    let mut current = pt.clone();
    let mut history = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        let (grad, report) = rtd_subgradient(p, &current)?;
        history.push(report.score);
        let next = current.points().to_owned() - &(grad.grad_pt * lr);
        current = PointCloud::new(next)?;
    }
    history.push(rtd_score(p, &current)?.score);
    Ok((current, history))
}

pub fn descend_rtd(p: &PointCloud, pt: &PointCloud, steps: usize, lr: f64) -> Result<PointCloud> {
    if steps == 0 {
        return Ok(pt.clone());
    }
    Ok(descend_rtd_with_history(p, pt, steps, lr)?.0)
}

/// Smallest gap between distinct pairwise distances of the two clouds
/// (including 0). Below roughly the finite-difference step, the combinatorial
/// type of the filtration may change inside the stencil.
pub fn tie_gap(p: &PointCloud, pt: &PointCloud) -> f64 {
    let mut values = vec![0.0];
    for dist in [pairwise_distances(p), pairwise_distances(pt)] {
        for i in 0..dist.n() {
            for j in (i + 1)..dist.n() {
                values.push(dist.get(i, j));
            }
        }
    }
    values.sort_by(f64::total_cmp);
    values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub trials: usize,
    pub skipped: bool,
    pub tie_gap: f64,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.skipped || self.max_rel_error <= tol
    }
}

pub(crate) fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-12 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compares the subgradient against central differences along `trials` random
/// joint directions `(u, u~)`, unit-normalized. Configurations whose
/// [`tie_gap`] is below `min_gap` are reported as skipped.
pub fn grad_check(
    p: &PointCloud,
    pt: &PointCloud,
    h: f64,
    trials: usize,
    min_gap: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let gap = tie_gap(p, pt);
    if gap < min_gap {
        return Ok(GradCheckReport {
            trials: 0,
            skipped: true,
            tie_gap: gap,
            max_rel_error: 0.0,
        });
    }
    let (grad, _) = rtd_subgradient(p, pt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_error: f64 = 0.0;
    for _ in 0..trials {
        let mut u = Array2::from_shape_fn(p.points().dim(), |_| StandardNormal.sample(&mut rng));
        let mut ut = Array2::from_shape_fn(pt.points().dim(), |_| StandardNormal.sample(&mut rng));
        let norm = (u.iter().chain(ut.iter()).map(|x: &f64| x * x).sum::<f64>()).sqrt();
        u /= norm;
        ut /= norm;
        let shifted = |sign: f64| -> Result<f64> {
            let a = PointCloud::new(p.points().to_owned() + &(&u * (sign * h)))?;
            let b = PointCloud::new(pt.points().to_owned() + &(&ut * (sign * h)))?;
            Ok(rtd_from_distances(&pairwise_distances(&a), &pairwise_distances(&b))?.score)
        };
        let fd = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * h);
        let analytic = (&grad.grad_p * &u).sum() + (&grad.grad_pt * &ut).sum();
        max_rel_error = max_rel_error.max(relative_error(fd, analytic));
    }
    Ok(GradCheckReport {
        trials,
        skipped: false,
        tie_gap: gap,
        max_rel_error,
    })
}

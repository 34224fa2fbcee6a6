use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::data::BaseClassifier;
use crate::error::{Error, Result};
use crate::rtd::rtd_score;
use crate::rtd_grad::rtd_subgradient;
use crate::PointCloud;

/// Frozen base classifier plus a learnable additive residual.
///
/// Effective classifier row `k` is `normalize(base[k] + alpha * residual[k])`,
/// and logits are `logit_scale * cos(visual_i, classifier_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskResidualModel {
    base: BaseClassifier,
    pub residual: Array2<f64>,
    pub alpha: f64,
    pub logit_scale: f64,
}

/// Rows scaled to unit length, plus the original norms.
pub(crate) fn normalize_rows(m: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let norms: Array1<f64> = m.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0 || !n.is_finite()) {
        return Err(Error::invalid(format!(
            "row {i} has zero or non-finite norm"
        )));
    }
    let out = &m / &norms.view().insert_axis(Axis(1));
    Ok((out, norms))
}

impl TaskResidualModel {
    /// Zero residual, so the model starts out identical to the zero-shot base.
    pub fn new(base: BaseClassifier, alpha: f64, logit_scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && logit_scale > 0.0) {
            return Err(Error::invalid(format!(
                "alpha and logit_scale must be > 0, got {alpha} and {logit_scale}"
            )));
        }
        let residual = Array2::zeros(base.text_weights().dim());
        Ok(Self {
            base,
            residual,
            alpha,
            logit_scale,
        })
    }

    pub fn with_residual(mut self, residual: Array2<f64>) -> Result<Self> {
        if residual.dim() != self.base.text_weights().dim() {
            return Err(Error::invalid(format!(
                "residual is {:?}, base classifier is {:?}",
                residual.dim(),
                self.base.text_weights().dim()
            )));
        }
        self.residual = residual;
        Ok(self)
    }

    pub fn base(&self) -> &BaseClassifier {
        &self.base
    }

    pub fn class_count(&self) -> usize {
        self.base.class_count()
    }

    /// Unnormalized adapted rows `base + alpha * residual`.
    fn adapted(&self) -> Array2<f64> {
        &self.base.text_weights() + &(&self.residual * self.alpha)
    }

    pub fn effective_classifier(&self) -> Result<Array2<f64>> {
        Ok(normalize_rows(self.adapted().view())?.0)
    }

    /// `logit_scale * cos(visual_i, classifier_k)` for every row of `visual`.
    pub fn forward_logits(&self, visual: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if visual.ncols() != self.base.dim() {
            return Err(Error::ShapeMismatch {
                what: "embedding dimension",
                left: visual.ncols(),
                right: self.base.dim(),
            });
        }
        let (v, _) = normalize_rows(visual)?;
        let c = self.effective_classifier()?;
        Ok(v.dot(&c.t()) * self.logit_scale)
    }

    pub fn predict(&self, visual: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(self
            .forward_logits(visual)?
            .rows()
            .into_iter()
            .map(|r| argmax(r.iter()))
            .collect())
    }
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax<'a>(values: impl Iterator<Item = &'a f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub ce: f64,
    pub rtd: f64,
    pub total: f64,
    /// d total / d residual.
    pub grad_residual: Array2<f64>,
    /// Batch rows whose argmax logit is their own class.
    pub correct: usize,
}

/// Mean softmax cross-entropy with labels `0..K` plus `lambda` times the RTD
/// between the normalized visual batch and the effective classifier rows.
///
/// The visual side is frozen, so only the classifier-side RTD gradient is
/// used. `batch` must hold one sample per class, in class order.
pub fn combined_loss(
    model: &TaskResidualModel,
    batch: ArrayView2<'_, f64>,
    lambda: f64,
) -> Result<LossEval> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    let k = model.class_count();
    if batch.nrows() != k {
        return Err(Error::ShapeMismatch {
            what: "batch rows vs classes",
            left: batch.nrows(),
            right: k,
        });
    }
    if batch.ncols() != model.base.dim() {
        return Err(Error::ShapeMismatch {
            what: "embedding dimension",
            left: batch.ncols(),
            right: model.base.dim(),
        });
    }
    let (visual, _) = normalize_rows(batch)?;
    let (classifier, norms) = normalize_rows(model.adapted().view())?;
    let logits = visual.dot(&classifier.t()) * model.logit_scale;

    // softmax rows, CE against the diagonal
    let mut dlogits = Array2::zeros((k, k));
    let mut ce = 0.0;
    let mut correct = 0;
    for (i, row) in logits.rows().into_iter().enumerate() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
        let log_norm = max + sum.ln();
        ce += log_norm - row[i];
        for (j, z) in row.iter().enumerate() {
            dlogits[[i, j]] = ((z - log_norm).exp() - if i == j { 1.0 } else { 0.0 }) / k as f64;
        }
        if argmax(row.iter()) == i {
            correct += 1;
        }
    }
    ce /= k as f64;
    let mut dclassifier = dlogits.t().dot(&visual) * model.logit_scale;

    let p = PointCloud::new(visual)?;
    let pt = PointCloud::new(classifier.clone())?;
    let rtd = if lambda > 0.0 {
        let (grad, report) = rtd_subgradient(&p, &pt)?;
        dclassifier += &(grad.grad_pt * lambda);
        report.score
    } else {
        rtd_score(&p, &pt)?.score
    };

    // back through row normalization: (I - c c^T) g / |u|, then the alpha scale
    let mut grad_residual = Array2::zeros((k, model.base.dim()));
    for r in 0..k {
        let c = classifier.row(r);
        let g = dclassifier.row(r);
        let along = g.dot(&c);
        let row = (&g - &(&c * along)) * (model.alpha / norms[r]);
        grad_residual.row_mut(r).assign(&row);
    }
    Ok(LossEval {
        ce,
        rtd,
        total: ce + lambda * rtd,
        grad_residual,
        correct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_residual_matches_base_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base = BaseClassifier::new(random(&mut rng, 4, 6)).unwrap();
        let model = TaskResidualModel::new(base.clone(), 0.5, 100.0).unwrap();
        let visual = random(&mut rng, 7, 6);
        let logits = model.forward_logits(visual.view()).unwrap();
        let (v, _) = normalize_rows(visual.view()).unwrap();
        let (c, _) = normalize_rows(base.text_weights()).unwrap();
        assert_eq!(logits, v.dot(&c.t()) * 100.0);
    }

    #[test]
    fn matching_row_gives_logit_scale() {
        let base = BaseClassifier::new(array![[3.0, 4.0], [1.0, 0.0]]).unwrap();
        let model = TaskResidualModel::new(base, 0.5, 50.0).unwrap();
        let logits = model.forward_logits(array![[0.6, 0.8]].view()).unwrap();
        assert!((logits[[0, 0]] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn naive_dot_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base = BaseClassifier::new(random(&mut rng, 5, 8)).unwrap();
        let model = TaskResidualModel::new(base.clone(), 0.7, 20.0)
            .unwrap()
            .with_residual(random(&mut rng, 5, 8))
            .unwrap();
        let visual = random(&mut rng, 6, 8);
        let logits = model.forward_logits(visual.view()).unwrap();
        for i in 0..6 {
            for k in 0..5 {
                let mut vv = 0.0;
                let mut cc = 0.0;
                let mut vc = 0.0;
                for d in 0..8 {
                    let c = base.text_weights()[[k, d]] + 0.7 * model.residual[[k, d]];
                    vv += visual[[i, d]] * visual[[i, d]];
                    cc += c * c;
                    vc += visual[[i, d]] * c;
                }
                let expected = 20.0 * vc / (vv.sqrt() * cc.sqrt());
                assert!((logits[[i, k]] - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_lambda_is_pure_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = BaseClassifier::new(random(&mut rng, 4, 5)).unwrap();
        let model = TaskResidualModel::new(base, 0.5, 10.0).unwrap();
        let batch = random(&mut rng, 4, 5);
        let eval = combined_loss(&model, batch.view(), 0.0).unwrap();
        assert_eq!(eval.total, eval.ce);
        assert!(eval.rtd > 0.0);
        assert!(combined_loss(&model, batch.view(), -1.0).is_err());
    }

    #[test]
    fn aligned_batch_has_zero_rtd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (rows, _) = normalize_rows(random(&mut rng, 5, 7).view()).unwrap();
        let base = BaseClassifier::new(rows.clone()).unwrap();
        let model = TaskResidualModel::new(base, 0.5, 100.0).unwrap();
        let eval = combined_loss(&model, rows.view(), 1.0).unwrap();
        assert_eq!(eval.rtd, 0.0);
        assert_eq!(eval.correct, 5);
    }

    #[test]
    fn zero_norm_rows_rejected() {
        let base = BaseClassifier::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let model = TaskResidualModel::new(base, 0.5, 1.0).unwrap();
        assert!(model.forward_logits(array![[0.0, 0.0]].view()).is_err());
    }
}

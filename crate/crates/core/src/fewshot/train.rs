use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batching::BatchSampler;
use super::data::{BaseClassifier, EmbeddingDataset};
use super::model::{argmax, combined_loss, normalize_rows, TaskResidualModel};
use super::optim::{cosine_lr, Adam};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Keep at most this many training samples per class.
    pub shots: Option<usize>,
    pub epochs: usize,
    /// Initial learning rate; cosine-annealed to 0 over all steps.
    pub lr: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub logit_scale: f64,
    pub seed: u64,
    /// Replace `lambda` by the result of [`lambda_search`] before training.
    pub lambda_search: bool,
    /// Target band for the initial ratio `lambda * L_RTD / L_CE`.
    pub target_ratio_band: [f64; 2],
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            shots: None,
            epochs: 100,
            lr: 1e-4,
            lambda: 0.0,
            alpha: 0.5,
            logit_scale: 100.0,
            seed: 0,
            lambda_search: false,
            target_ratio_band: [0.33, 0.37],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.target_ratio_band;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.alpha > 0.0 && self.logit_scale > 0.0) {
            return Err(Error::invalid("alpha and logit_scale must be > 0"));
        }
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::invalid(format!(
                "bad target ratio band [{lo}, {hi}]"
            )));
        }
        if self.shots == Some(0) {
            return Err(Error::invalid("shots must be >= 1"));
        }
        Ok(())
    }

    /// The training split actually used: subsampled to `shots` per class if set.
    pub fn prepare_train(&self, ds: &EmbeddingDataset) -> Result<EmbeddingDataset> {
        match self.shots {
            Some(s) => ds.subsample_shots(s, self.seed),
            None => Ok(ds.clone()),
        }
    }
}

/// Mean losses over one epoch of batches. `epoch == 0` is the measurement at
/// initialization (residual = 0) over the first epoch's batches, before any update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub l_ce: f64,
    pub l_rtd: f64,
    pub l_total: f64,
    pub train_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub lambda: f64,
    pub lambda_search: Option<LambdaSearch>,
    pub epochs: Vec<EpochMetrics>,
}

impl TrainHistory {
    pub fn initial(&self) -> &EpochMetrics {
        &self.epochs[0]
    }

    pub fn last(&self) -> &EpochMetrics {
        self.epochs
            .last()
            .expect("history always has the initial entry")
    }
}

fn check_compatible(ds: &EmbeddingDataset, base: &BaseClassifier) -> Result<()> {
    if ds.class_count() != base.class_count() {
        return Err(Error::ShapeMismatch {
            what: "class count",
            left: ds.class_count(),
            right: base.class_count(),
        });
    }
    if ds.dim() != base.dim() {
        return Err(Error::ShapeMismatch {
            what: "embedding dimension",
            left: ds.dim(),
            right: base.dim(),
        });
    }
    if base.class_count() < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    Ok(())
}

/// Evaluates every batch of one epoch without updating; returns mean metrics.
fn epoch_eval(
    model: &TaskResidualModel,
    ds: &EmbeddingDataset,
    sampler: &mut BatchSampler,
    lambda: f64,
) -> Result<EpochMetrics> {
    let batches = sampler.next_epoch();
    let mut acc = MetricAccumulator::default();
    for batch in &batches {
        let eval = combined_loss(model, batch.gather(ds).view(), lambda)?;
        acc.add(
            eval.ce,
            eval.rtd,
            eval.total,
            eval.correct,
            batch.indices.len(),
        );
    }
    Ok(acc.finish(0))
}

#[derive(Default)]
struct MetricAccumulator {
    ce: f64,
    rtd: f64,
    total: f64,
    correct: usize,
    seen: usize,
    batches: usize,
}

impl MetricAccumulator {
    fn add(&mut self, ce: f64, rtd: f64, total: f64, correct: usize, rows: usize) {
        self.ce += ce;
        self.rtd += rtd;
        self.total += total;
        self.correct += correct;
        self.seen += rows;
        self.batches += 1;
    }

    fn finish(&self, epoch: usize) -> EpochMetrics {
        let b = self.batches.max(1) as f64;
        EpochMetrics {
            epoch,
            l_ce: self.ce / b,
            l_rtd: self.rtd / b,
            l_total: self.total / b,
            train_acc: self.correct as f64 / self.seen.max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub lambda: f64,
    /// `lambda * l_rtd / l_ce` at the returned lambda.
    pub ratio: f64,
    pub l_ce: f64,
    pub l_rtd: f64,
    pub iterations: usize,
    /// Set when the initial RTD is zero and no lambda can reach the band.
    pub rtd_vanishes: bool,
}

/// Binary search for the lambda whose initial ratio `lambda * L_RTD / L_CE`
/// (means over the first epoch at residual = 0) lies in the target band.
///
/// The upper bound starts at `max(config.lambda, 1)` and doubles until it
/// overshoots the band's lower edge; the interval is then bisected.
pub fn lambda_search(
    ds: &EmbeddingDataset,
    base: &BaseClassifier,
    config: &TrainConfig,
) -> Result<LambdaSearch> {
    config.validate()?;
    if ds.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    check_compatible(ds, base)?;
    let train = config.prepare_train(ds)?;
    let model = TaskResidualModel::new(base.clone(), config.alpha, config.logit_scale)?;
    let mut sampler = BatchSampler::new(&train, config.seed)?;
    let init = epoch_eval(&model, &train, &mut sampler, 0.0)?;
    search_band(
        init.l_ce,
        init.l_rtd,
        config.lambda,
        config.target_ratio_band,
    )
}

pub(crate) fn search_band(
    l_ce: f64,
    l_rtd: f64,
    guess: f64,
    band: [f64; 2],
) -> Result<LambdaSearch> {
    let [lo_band, hi_band] = band;
    if l_ce <= 0.0 {
        return Err(Error::invalid(
            "initial cross-entropy is zero; lambda ratio undefined",
        ));
    }
    let ratio = |lambda: f64| lambda * l_rtd / l_ce;
    if l_rtd == 0.0 {
        warn!("initial RTD is zero; returning lambda = 0");
        return Ok(LambdaSearch {
            lambda: 0.0,
            ratio: 0.0,
            l_ce,
            l_rtd,
            iterations: 0,
            rtd_vanishes: true,
        });
    }
    let mut lo = 0.0;
    let mut hi = guess.max(1.0);
    let mut iterations = 0;
    while ratio(hi) < lo_band {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if !hi.is_finite() {
            return Err(Error::Numeric(
                "lambda search diverged while doubling".into(),
            ));
        }
    }
    let mut lambda = hi;
    while !(lo_band..=hi_band).contains(&ratio(lambda)) {
        if iterations > 400 {
            return Err(Error::Numeric(format!(
                "lambda search did not converge: ratio {} at lambda {lambda}",
                ratio(lambda)
            )));
        }
        lambda = 0.5 * (lo + hi);
        if ratio(lambda) < lo_band {
            lo = lambda;
        } else {
            hi = lambda;
        }
        iterations += 1;
    }
    debug!(
        "lambda search: lambda={lambda} ratio={} after {iterations} iterations",
        ratio(lambda)
    );
    Ok(LambdaSearch {
        lambda,
        ratio: ratio(lambda),
        l_ce,
        l_rtd,
        iterations,
        rtd_vanishes: false,
    })
}

/// Trains the residual with Adam under a cosine-annealed learning rate. The
/// base classifier is never modified.
pub fn train(
    ds_train: &EmbeddingDataset,
    base: &BaseClassifier,
    config: &TrainConfig,
) -> Result<(TaskResidualModel, TrainHistory)> {
    config.validate()?;
    check_compatible(ds_train, base)?;
    let search = if config.lambda_search {
        Some(lambda_search(ds_train, base, config)?)
    } else {
        None
    };
    let lambda = search.as_ref().map_or(config.lambda, |s| s.lambda);
    let train = config.prepare_train(ds_train)?;
    let mut model = TaskResidualModel::new(base.clone(), config.alpha, config.logit_scale)?;

    let mut epochs = Vec::with_capacity(config.epochs + 1);
    epochs.push(epoch_eval(
        &model,
        &train,
        &mut BatchSampler::new(&train, config.seed)?,
        lambda,
    )?);

    let mut sampler = BatchSampler::new(&train, config.seed)?;
    let total_steps = config.epochs * sampler.batches_per_epoch();
    let mut adam = Adam::new(model.residual.dim());
    let mut step = 0;
    for epoch in 1..=config.epochs {
        let mut acc = MetricAccumulator::default();
        for batch in sampler.next_epoch() {
            let eval = combined_loss(&model, batch.gather(&train).view(), lambda)?;
            acc.add(
                eval.ce,
                eval.rtd,
                eval.total,
                eval.correct,
                batch.indices.len(),
            );
            let lr = cosine_lr(config.lr, step, total_steps);
            adam.step(&mut model.residual, &eval.grad_residual, lr);
            step += 1;
        }
        let m = acc.finish(epoch);
        debug!(
            "epoch {epoch}: ce={:.6} rtd={:.6} total={:.6} acc={:.4}",
            m.l_ce, m.l_rtd, m.l_total, m.train_acc
        );
        epochs.push(m);
    }
    if model.residual.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "residual diverged to a non-finite value".into(),
        ));
    }
    info!("trained {} epochs with lambda={lambda}", config.epochs);
    Ok((
        model,
        TrainHistory {
            lambda,
            lambda_search: search,
            epochs,
        },
    ))
}

/// Top-1 accuracy; ties go to the lowest class index.
pub fn evaluate(model: &TaskResidualModel, ds: &EmbeddingDataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    if ds.dim() != model.base().dim() {
        return Err(Error::ShapeMismatch {
            what: "embedding dimension",
            left: ds.dim(),
            right: model.base().dim(),
        });
    }
    let classifier = model.effective_classifier()?;
    let (visual, _) = normalize_rows(ds.embeddings())?;
    let correct = (0..ds.len())
        .into_par_iter()
        .filter(|&i| {
            let scores = classifier.dot(&visual.row(i));
            argmax(scores.iter()) == ds.labels()[i]
        })
        .count();
    Ok(correct as f64 / ds.len() as f64)
}

//! Manifest-driven runs: load CSV inputs, train, evaluate, write outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::data::{BaseClassifier, EmbeddingDataset, Split};
use super::model::TaskResidualModel;
use super::train::{evaluate, train, EpochMetrics, LambdaSearch, TrainConfig};
use crate::error::{Error, Result};
use crate::io;

/// Run description. Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub train: PathBuf,
    pub test: PathBuf,
    pub base: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub config: TrainConfig,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: RunManifest = serde_json::from_str(&text)?;
        let root = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut manifest.train,
            &mut manifest.test,
            &mut manifest.base,
            &mut manifest.output_dir,
        ] {
            if p.is_relative() {
                *p = root.join(&*p);
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_inputs(&self) -> Result<RunInputs> {
        let base = io::read_base_classifier(&self.base)?;
        let k = Some(base.class_count());
        Ok(RunInputs {
            train: io::read_embeddings(&self.train, Split::Train, k)?,
            test: io::read_embeddings(&self.test, Split::Test, k)?,
            base,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunInputs {
    pub train: EmbeddingDataset,
    pub test: EmbeddingDataset,
    pub base: BaseClassifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub test_accuracy: f64,
    pub zero_shot_accuracy: f64,
    pub lambda: f64,
    pub seed: u64,
    pub epochs: usize,
    pub lambda_search: Option<LambdaSearch>,
    pub initial: EpochMetrics,
    #[serde(rename = "final")]
    pub last: EpochMetrics,
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const RESIDUAL_FILE: &str = "residual.csv";
pub const REPORT_FILE: &str = "report.json";

/// Trains per the manifest and writes `metrics.csv`, `residual.csv` and
/// `report.json` into its output directory.
pub fn run_manifest(manifest: &RunManifest) -> Result<RunReport> {
    let inputs = manifest.load_inputs()?;
    let config = &manifest.config;
    let (model, history) = train(&inputs.train, &inputs.base, config)?;
    let zero_shot = TaskResidualModel::new(inputs.base.clone(), config.alpha, config.logit_scale)?;
    let report = RunReport {
        test_accuracy: evaluate(&model, &inputs.test)?,
        zero_shot_accuracy: evaluate(&zero_shot, &inputs.test)?,
        lambda: history.lambda,
        seed: config.seed,
        epochs: config.epochs,
        lambda_search: history.lambda_search.clone(),
        initial: *history.initial(),
        last: *history.last(),
    };
    let out = &manifest.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    io::write_metrics(&out.join(METRICS_FILE), &history.epochs)?;
    io::write_class_matrix(&out.join(RESIDUAL_FILE), model.residual.view())?;
    let report_path = out.join(REPORT_FILE);
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")
        .map_err(|e| Error::io(&report_path, e))?;
    Ok(report)
}

/// Test accuracy of the manifest's base classifier plus a saved residual.
pub fn evaluate_residual(manifest: &RunManifest, residual_path: &Path) -> Result<f64> {
    let inputs = manifest.load_inputs()?;
    let residual = io::read_class_matrix(residual_path)?;
    let model = TaskResidualModel::new(
        inputs.base,
        manifest.config.alpha,
        manifest.config.logit_scale,
    )?
    .with_residual(residual)?;
    evaluate(&model, &inputs.test)
}

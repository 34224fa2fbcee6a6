use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use rtd_topo::fewshot::{
    evaluate_residual, gen_synthetic, lambda_search, run_manifest, RunManifest, SyntheticSpec,
    TrainConfig,
};
use rtd_topo::rtd::{cross_barcode, rtd_score};
use rtd_topo::rtd_grad::grad_check;
use rtd_topo::{io as csvio, pairwise_distances, Barcode, Error};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Persistent homology, representation topology divergence and
/// topology-regularized few-shot training on embedding files.
#[derive(Debug, Parser)]
#[command(name = "rtd-topo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Vietoris-Rips barcode of a point cloud, as dim,birth,death CSV.
    Barcode {
        #[arg(long)]
        points: PathBuf,
        /// Top simplex dimension of the filtration (1 or 2).
        #[arg(long, default_value_t = 2)]
        maxdim: usize,
    },
    /// RTD score between two clouds whose rows correspond.
    Rtd {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Emit the score and both H1 barcodes as JSON.
        #[arg(long)]
        json: bool,
    },
    /// H1 cross-barcode of P relative to Q, as CSV.
    Crossbarcode {
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
    },
    /// Finite-difference check of the RTD subgradient.
    GradCheck {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Relative error bound for a pass.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Skip configurations whose closest pair of distinct edge weights is nearer than this.
        #[arg(long, default_value_t = 1e-6)]
        min_gap: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write synthetic train/test embeddings, a base classifier and run.json.
    GenSynthetic {
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 32)]
        d: usize,
        #[arg(long, default_value_t = 16)]
        shots: usize,
        #[arg(long, default_value_t = 50)]
        test_shots: usize,
        #[arg(long, default_value_t = 1.5)]
        spread: f64,
        #[arg(long, default_value_t = 1.5)]
        gap: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search lambda so that lambda * L_RTD / L_CE lands in the target band.
    LambdaSearch {
        #[arg(long)]
        manifest: PathBuf,
        /// Overrides the manifest seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the task residual and write metrics.csv, residual.csv, report.json.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Overrides the manifest seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Test accuracy of a saved residual.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
}

fn stdout_err(e: io::Error) -> Error {
    Error::Io {
        path: "<stdout>".into(),
        source: e,
    }
}

fn emit(text: &str) -> Result<(), Error> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes()).map_err(stdout_err)?;
    out.flush().map_err(stdout_err)
}

fn barcode_csv(barcode: &Barcode) -> Result<String, Error> {
    let mut buf = Vec::new();
    csvio::write_barcode_to(&mut buf, barcode)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn load_manifest(path: &Path, seed: Option<u64>) -> Result<RunManifest, Error> {
    let mut manifest = RunManifest::load(path)?;
    if let Some(seed) = seed {
        manifest.config.seed = seed;
    }
    Ok(manifest)
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// Returns whether the command's own check passed.
fn run(command: Command) -> Result<bool, Error> {
    match command {
        Command::Barcode { points, maxdim } => {
            let cloud = csvio::read_point_cloud(&points)?;
            let fc = rtd_topo::build_vr_filtration(&pairwise_distances(&cloud), maxdim)?;
            emit(&barcode_csv(&rtd_topo::compute_persistence(&fc)?)?)?;
        }
        Command::Rtd { a, b, json } => {
            let report = rtd_score(&csvio::read_point_cloud(&a)?, &csvio::read_point_cloud(&b)?)?;
            if json {
                let bars = |bc: &Barcode| -> Vec<[f64; 2]> {
                    bc.pairs().iter().map(|p| [p.birth, p.death]).collect()
                };
                let value = serde_json::json!({
                    "score": report.score,
                    "barcode_fwd": bars(report.barcode_fwd()),
                    "barcode_bwd": bars(report.barcode_bwd()),
                });
                emit(&(serde_json::to_string_pretty(&value)? + "\n"))?;
            } else {
                emit(&format!("{}\n", report.score))?;
            }
        }
        Command::Crossbarcode { p, q } => {
            let bc = cross_barcode(&csvio::read_point_cloud(&p)?, &csvio::read_point_cloud(&q)?)?;
            emit(&barcode_csv(&bc)?)?;
        }
        Command::GradCheck {
            a,
            b,
            h,
            trials,
            tol,
            min_gap,
            seed,
        } => {
            let report = grad_check(
                &csvio::read_point_cloud(&a)?,
                &csvio::read_point_cloud(&b)?,
                h,
                trials,
                min_gap,
                seed,
            )?;
            if report.skipped {
                emit(&format!(
                    "skipped: tie gap {} below {}\n",
                    report.tie_gap, min_gap
                ))?;
                return Ok(true);
            }
            let passed = report.passed(tol);
            emit(&format!(
                "max_rel_error {}\n{}\n",
                report.max_rel_error,
                if passed { "PASS" } else { "FAIL" }
            ))?;
            return Ok(passed);
        }
        Command::GenSynthetic {
            k,
            d,
            shots,
            test_shots,
            spread,
            gap,
            seed,
            out,
        } => {
            let spec = SyntheticSpec {
                classes: k,
                train_shots: shots,
                test_shots,
                dim: d,
                cluster_spread: spread,
                modality_gap: gap,
                seed,
            };
            let (train, test, base) = gen_synthetic(&spec)?;
            create_dir(&out)?;
            csvio::write_embeddings(&out.join("train.csv"), &train)?;
            csvio::write_embeddings(&out.join("test.csv"), &test)?;
            csvio::write_class_matrix(&out.join("base.csv"), base.text_weights())?;
            let manifest = RunManifest {
                train: "train.csv".into(),
                test: "test.csv".into(),
                base: "base.csv".into(),
                output_dir: "run".into(),
                config: TrainConfig {
                    lr: 1e-3,
                    lambda_search: true,
                    seed,
                    ..TrainConfig::default()
                },
            };
            manifest.save(&out.join("run.json"))?;
            info!("wrote {}", out.display());
        }
        Command::LambdaSearch { manifest, seed } => {
            let manifest = load_manifest(&manifest, seed)?;
            let inputs = manifest.load_inputs()?;
            let found = lambda_search(&inputs.train, &inputs.base, &manifest.config)?;
            emit(&(serde_json::to_string_pretty(&found)? + "\n"))?;
        }
        Command::Train { manifest, seed } => {
            let manifest = load_manifest(&manifest, seed)?;
            let report = run_manifest(&manifest)?;
            info!("outputs in {}", manifest.output_dir.display());
            emit(&(serde_json::to_string_pretty(&report)? + "\n"))?;
        }
        Command::Eval { manifest, model } => {
            let manifest = RunManifest::load(&manifest)?;
            emit(&format!("{}\n", evaluate_residual(&manifest, &model)?))?;
        }
    }
    Ok(true)
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("RTD_TOPO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("RTD_TOPO_THREADS must be a non-negative integer, got {raw:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NUMERIC),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric(_) => ExitCode::from(EXIT_NUMERIC),
                _ => ExitCode::from(EXIT_DATA),
            }
        }
    }
}

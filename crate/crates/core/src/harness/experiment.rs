use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::report::{emit_reports, McRow, ReportTables};
use super::{derive_seed, DatasetSource, ExperimentConfig, CONFIG_SCHEMA_VERSION};
use crate::attack::{build_stash, run_mc, run_whitebox, McConfig, McResult, Stash, WbAttackResult};
use crate::error::{Error, Result};
use crate::gan::{save_checkpoint, train, Checkpoint, ComposerGan, OracleDiscriminator, OracleGenerator, CHECKPOINT_VERSION};
use crate::metrics::{compute_metrics, MetricsRow};
use crate::pianoroll::{split, write_dataset, Dataset, StyleParams};

pub const MANIFEST_FILE: &str = "manifest.json";
const DATASET_FORMAT_VERSION: u32 = 1;

/// Stash of `mc.stash_size` binarized samples from a checkpoint's generator.
fn gan_stash(gan: &ComposerGan, mc: &McConfig, provenance: String) -> Result<Stash> {
    let seed = derive_seed(mc.seed, "stash");
    build_stash(
        |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let z = gan.sample_latent(&mut rng);
            gan.g_sample(&z)
        },
        mc.stash_size,
        seed,
        provenance,
    )
}

fn mc_row(result: &McResult, mc: &McConfig, epochs: u64) -> McRow {
    McRow {
        epochs,
        single_mi_accuracy: result.single_mi_accuracy,
        set_mi_accuracy: result.set_mi_correct_fraction,
        heuristic: mc.heuristic,
        metric: mc.metric,
        trials: mc.trials,
    }
}

pub fn wb_attack_checkpoint(ckpt: &Checkpoint, train: &Dataset, test: &Dataset) -> Result<(WbAttackResult, MetricsRow)> {
    let gan = ckpt.to_model()?;
    let result = run_whitebox(|_, roll| gan.d_score(roll), train, test)?;
    let row = compute_metrics(&result.confusion, ckpt.iteration)?;
    Ok((result, row))
}

/// White-box attack with an oracle discriminator whose members are `train`'s ids.
pub fn wb_attack_oracle(
    margin: f64,
    tau: f64,
    seed: u64,
    train: &Dataset,
    test: &Dataset,
    iteration: u64,
) -> Result<(WbAttackResult, MetricsRow)> {
    let oracle = OracleDiscriminator::new(margin, tau, train.ids().iter().copied())?;
    let result = run_whitebox(|id, _| Ok(oracle.score(id, seed)), train, test)?;
    let row = compute_metrics(&result.confusion, iteration)?;
    Ok((result, row))
}

pub fn mc_attack_checkpoint(ckpt: &Checkpoint, train: &Dataset, test: &Dataset, mc: &McConfig) -> Result<(McResult, McRow)> {
    let gan = ckpt.to_model()?;
    let stash = gan_stash(&gan, mc, format!("checkpoint@{}", ckpt.iteration))?;
    let result = run_mc(train, test, &stash, mc)?;
    let row = mc_row(&result, mc, ckpt.iteration);
    Ok((result, row))
}

/// Monte Carlo attack against an oracle generator that memorizes `train`.
pub fn mc_attack_oracle(
    p: f64,
    sigma: f64,
    train: &Dataset,
    test: &Dataset,
    mc: &McConfig,
    population_style: &StyleParams,
) -> Result<(McResult, McRow)> {
    let oracle = OracleGenerator::new(p, sigma, train.clone(), population_style.clone())?;
    let stash = build_stash(
        |s| Ok(oracle.generate(s)),
        mc.stash_size,
        derive_seed(mc.seed, "stash"),
        format!("oracle p={p} sigma={sigma}"),
    )?;
    let result = run_mc(train, test, &stash, mc)?;
    let row = mc_row(&result, mc, 0);
    Ok((result, row))
}

pub fn checkpoint_file_name(iteration: u64) -> String {
    format!("ckpt_{iteration:08}.ganc")
}

/// Dataset, split and training stages: writes `train.prd`, `test.prd` and
/// `checkpoints/` under `dir`.
pub fn train_to_dir(config: &ExperimentConfig, dir: &Path) -> Result<(Dataset, Dataset, Vec<Checkpoint>)> {
    let mut stage = Stage::Dataset;
    prepare_and_train(config, dir, &mut stage)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Stage {
    Dataset,
    Split,
    Train,
    Attack,
    Report,
}

fn prepare_and_train(config: &ExperimentConfig, dir: &Path, stage: &mut Stage) -> Result<(Dataset, Dataset, Vec<Checkpoint>)> {
    *stage = Stage::Dataset;
    let dataset = config.dataset.load()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    *stage = Stage::Split;
    let (train_set, test_set) = split(&dataset, &config.split)?;
    write_dataset(&train_set, &dir.join("train.prd"))?;
    write_dataset(&test_set, &dir.join("test.prd"))?;
    info!("split {} rolls into {} train / {} test", dataset.len(), train_set.len(), test_set.len());

    *stage = Stage::Train;
    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    let checkpoints = train(&train_set, &config.train, &mut |ckpt| {
        info!("checkpoint at iteration {}", ckpt.iteration);
        save_checkpoint(ckpt, &ckpt_dir.join(checkpoint_file_name(ckpt.iteration)))
    })?;
    Ok((train_set, test_set, checkpoints))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub checkpoint_iterations: Vec<u64>,
    pub whitebox: Option<Vec<MetricsRow>>,
    pub mc: Option<Vec<McRow>>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct McSeeds {
    seed: u64,
    stash_seed: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool: serde_json::Value,
    formats: serde_json::Value,
    platform: serde_json::Value,
    config_sha256: String,
    config: &'a ExperimentConfig,
    seeds: serde_json::Value,
    checkpoints: Vec<u64>,
    outputs: Vec<String>,
    degenerate_wb_rows: Vec<u64>,
    status: &'static str,
    failed_stage: Option<Stage>,
    error: Option<String>,
}

fn write_manifest(
    config: &ExperimentConfig,
    dir: &Path,
    checkpoints: Vec<u64>,
    outputs: &[PathBuf],
    degenerate: Vec<u64>,
    failure: Option<(Stage, &Error)>,
) -> Result<()> {
    let dataset_seed = match &config.dataset {
        DatasetSource::Synthetic { seed, .. } => Some(*seed),
        DatasetSource::File { .. } => None,
    };
    let mc_seeds: Vec<McSeeds> = config
        .attacks
        .mc
        .iter()
        .map(|mc| McSeeds {
            seed: mc.seed,
            stash_seed: derive_seed(mc.seed, "stash"),
        })
        .collect();
    let mut outputs: Vec<String> = outputs
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    outputs.push(MANIFEST_FILE.into());
    let manifest = Manifest {
        schema_version: 1,
        tool: serde_json::json!({ "name": "musemia", "version": env!("CARGO_PKG_VERSION") }),
        formats: serde_json::json!({
            "config": CONFIG_SCHEMA_VERSION,
            "dataset": DATASET_FORMAT_VERSION,
            "checkpoint": CHECKPOINT_VERSION,
        }),
        platform: serde_json::json!({
            "os": std::env::consts::OS,
            "arch": std::env::consts::ARCH,
            "family": std::env::consts::FAMILY,
        }),
        config_sha256: config.hash()?,
        config,
        seeds: serde_json::json!({
            "dataset": dataset_seed,
            "split": config.split.seed,
            "train": config.train.seed,
            "mc": mc_seeds,
        }),
        checkpoints,
        outputs,
        degenerate_wb_rows: degenerate,
        status: if failure.is_some() { "failed" } else { "ok" },
        failed_stage: failure.map(|(s, _)| s),
        error: failure.map(|(_, e)| e.to_string()),
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

const MANAGED: [&str; 10] = [
    "train.prd",
    "train.meta.json",
    "test.prd",
    "test.meta.json",
    super::WB_CSV,
    super::MC_CSV,
    super::SUCCESS_CSV,
    super::REPORT_MD,
    MANIFEST_FILE,
    "checkpoints",
];

fn prepare_output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_some();
        if non_empty && !force {
            return Err(Error::OutputExists(dir.to_path_buf()));
        }
        for name in MANAGED {
            let p = dir.join(name);
            let res = if p.is_dir() {
                fs::remove_dir_all(&p)
            } else if p.exists() {
                fs::remove_file(&p)
            } else {
                Ok(())
            };
            res.map_err(|e| Error::io(&p, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Full pipeline: data → split → train with checkpoints → attacks on every
/// checkpoint → reports and `manifest.json` in `config.output_dir`.
///
/// On failure the manifest records the failing stage and the error is
/// returned; files from completed stages are left in place.
pub fn run_experiment(config: &ExperimentConfig, force: bool) -> Result<RunSummary> {
    config.validate()?;
    let dir = config.output_dir.clone();
    prepare_output_dir(&dir, force)?;

    let mut stage = Stage::Dataset;
    let mut checkpoint_iters = Vec::new();
    let outcome = (|| -> Result<RunSummary> {
        let (train_set, test_set, checkpoints) = prepare_and_train(config, &dir, &mut stage)?;
        checkpoint_iters = checkpoints.iter().map(|c| c.iteration).collect();

        stage = Stage::Attack;
        let whitebox = if config.attacks.whitebox {
            let rows = checkpoints
                .par_iter()
                .map(|c| wb_attack_checkpoint(c, &train_set, &test_set).map(|(_, row)| row))
                .collect::<Result<Vec<_>>>()?;
            Some(rows)
        } else {
            None
        };
        let mc = if config.attacks.mc.is_empty() {
            None
        } else {
            let per_ckpt = checkpoints
                .par_iter()
                .map(|c| {
                    config
                        .attacks
                        .mc
                        .iter()
                        .map(|mc| mc_attack_checkpoint(c, &train_set, &test_set, mc).map(|(_, row)| row))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Some(per_ckpt.into_iter().flatten().collect())
        };

        stage = Stage::Report;
        let tables = ReportTables {
            title: format!("Membership inference report: {} model", config.label),
            whitebox,
            mc,
        };
        let files = emit_reports(&tables, &dir)?;
        Ok(RunSummary {
            output_dir: dir.clone(),
            checkpoint_iterations: checkpoint_iters.clone(),
            whitebox: tables.whitebox,
            mc: tables.mc,
            files,
        })
    })();

    match outcome {
        Ok(mut summary) => {
            let degenerate = summary
                .whitebox
                .iter()
                .flatten()
                .filter(|r| r.degenerate)
                .map(|r| r.iteration)
                .collect();
            write_manifest(config, &dir, checkpoint_iters, &summary.files, degenerate, None)?;
            summary.files.push(dir.join(MANIFEST_FILE));
            Ok(summary)
        }
        Err(e) => {
            // The original error matters more than a failure to record it.
            let _ = write_manifest(config, &dir, checkpoint_iters, &[], Vec::new(), Some((stage, &e)));
            Err(e)
        }
    }
}

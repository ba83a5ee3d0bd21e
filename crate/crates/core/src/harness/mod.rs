//! Experiment orchestration: configuration, the end-to-end run, and report
//! files.

mod experiment;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{DistanceMetric, EpsilonHeuristic, McConfig};
use crate::error::{Error, Result};
use crate::gan::TrainConfig;
use crate::pianoroll::{read_dataset, synth_generate, Dataset, PianorollShape, SplitSpec, StyleParams};

pub use experiment::{
    mc_attack_checkpoint, mc_attack_oracle, run_experiment, train_to_dir, wb_attack_checkpoint, wb_attack_oracle,
    RunSummary, MANIFEST_FILE,
};
pub use report::{
    emit_reports, parse_mc_csv, parse_wb_csv, render_markdown, render_mc_csv, render_success_csv, render_wb_csv,
    McRow, ReportTables, MC_CSV, MC_HEADER, REPORT_MD, SUCCESS_CSV, WB_CSV, WB_HEADER,
};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Iterations of the desk-scale default model; the overfitted model trains 10× longer.
pub const DESK_DEFAULT_ITERATIONS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Default,
    Overfitted,
    Custom,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Default => "default",
            Label::Overfitted => "overfitted",
            Label::Custom => "custom",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic {
        seed: u64,
        count: usize,
        shape: PianorollShape,
        #[serde(default)]
        style: StyleParams,
    },
    File {
        path: PathBuf,
    },
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Synthetic { seed, count, shape, style } => synth_generate(*seed, *count, *shape, style),
            DatasetSource::File { path } => read_dataset(path),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub whitebox: bool,
    #[serde(default)]
    pub mc: Vec<McConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub label: Label,
    pub dataset: DatasetSource,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub attacks: AttackPlan,
    pub output_dir: PathBuf,
    /// Iterations of the default model an `overfitted` run is paired with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paired_default_iterations: Option<usize>,
}

fn desk_shape() -> PianorollShape {
    PianorollShape::new(2, 1, 16, 24).expect("valid desk shape")
}

fn desk_mc() -> McConfig {
    McConfig {
        stash_size: 1000,
        n_per_query: 500,
        heuristic: EpsilonHeuristic::Median,
        metric: DistanceMetric::EuclideanRaw,
        subset_size: 100,
        trials: 10,
        seed: 11,
    }
}

impl ExperimentConfig {
    /// 2000 synthetic rolls split 50:50, 2000 iterations, checkpoints every 200.
    pub fn desk_default(output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            label: Label::Default,
            dataset: DatasetSource::Synthetic {
                seed: 2024,
                count: 2000,
                shape: desk_shape(),
                style: StyleParams::default(),
            },
            split: SplitSpec {
                train_fraction: 0.5,
                seed: 1,
            },
            train: TrainConfig {
                iterations: DESK_DEFAULT_ITERATIONS,
                checkpoint_every: 200,
                seed: 7,
                ..TrainConfig::default()
            },
            attacks: AttackPlan {
                whitebox: true,
                mc: vec![desk_mc()],
            },
            output_dir: output_dir.into(),
            paired_default_iterations: None,
        }
    }

    /// Same population, 10% train split, 10× the iterations, checkpoints every 2000.
    pub fn desk_overfitted(output_dir: impl Into<PathBuf>) -> Self {
        let default = Self::desk_default(output_dir);
        ExperimentConfig {
            label: Label::Overfitted,
            split: SplitSpec {
                train_fraction: 0.1,
                ..default.split
            },
            train: TrainConfig {
                iterations: 10 * DESK_DEFAULT_ITERATIONS,
                checkpoint_every: 2000,
                ..default.train.clone()
            },
            paired_default_iterations: Some(DESK_DEFAULT_ITERATIONS),
            ..default
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let fraction = self.split.train_fraction;
        match self.label {
            Label::Default if fraction != 0.5 => {
                return Err(Error::Config("label default requires train_fraction 0.5".into()));
            }
            Label::Overfitted => {
                if fraction != 0.1 {
                    return Err(Error::Config("label overfitted requires train_fraction 0.1".into()));
                }
                let paired = self.paired_default_iterations.unwrap_or(DESK_DEFAULT_ITERATIONS);
                if self.train.iterations != 10 * paired {
                    return Err(Error::Config(format!(
                        "label overfitted requires 10x the paired default iterations ({})",
                        10 * paired
                    )));
                }
            }
            _ => {}
        }
        if let DatasetSource::Synthetic { shape, style, count, .. } = &self.dataset {
            shape.validate()?;
            style.validate()?;
            if *count < 2 {
                return Err(Error::Config("synthetic dataset needs at least 2 rolls".into()));
            }
        }
        self.train.validate()?;
        for mc in &self.attacks.mc {
            mc.validate()?;
        }
        if !self.attacks.whitebox && self.attacks.mc.is_empty() {
            return Err(Error::Config("no attack enabled".into()));
        }
        Ok(())
    }

    /// SHA-256 of the compact JSON serialization.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }
}

/// Independent sub-seed for a named purpose.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Oracle substitute for a checkpoint, as written on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSpec {
    /// `p=P,sigma=S`
    Generator { p: f64, sigma: f64 },
    /// `margin=M,tau=T`
    Discriminator { margin: f64, tau: f64 },
}

impl FromStr for OracleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse oracle {s:?}; expected \"p=P,sigma=S\" or \"margin=M,tau=T\""));
        let mut fields = Vec::new();
        for part in s.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            fields.push((k.trim(), v));
        }
        let get = |name: &str| fields.iter().find(|(k, _)| *k == name).map(|(_, v)| *v);
        if fields.len() != 2 {
            return Err(bad());
        }
        match (get("p"), get("sigma"), get("margin"), get("tau")) {
            (Some(p), Some(sigma), None, None) => Ok(OracleSpec::Generator { p, sigma }),
            (None, None, Some(margin), Some(tau)) => Ok(OracleSpec::Discriminator { margin, tau }),
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ExperimentConfig::desk_default("out").validate().unwrap();
        let o = ExperimentConfig::desk_overfitted("out");
        o.validate().unwrap();
        assert_eq!(o.train.iterations, 20000);
        assert_eq!(o.train.checkpoint_iterations().len(), 10);
    }

    #[test]
    fn label_invariants() {
        let mut c = ExperimentConfig::desk_default("out");
        c.split.train_fraction = 0.3;
        assert!(c.validate().is_err());
        c.label = Label::Custom;
        c.validate().unwrap();

        let mut o = ExperimentConfig::desk_overfitted("out");
        o.train.iterations = 4000;
        o.train.checkpoint_every = 400;
        assert!(o.validate().is_err());
        o.paired_default_iterations = Some(400);
        o.validate().unwrap();
    }

    #[test]
    fn json_round_trip_and_schema() {
        let c = ExperimentConfig::desk_overfitted("runs/o");
        let text = c.to_json().unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        let bumped = text.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(ExperimentConfig::from_json(&bumped), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_json("{\"schema_version\": 1}").is_err());
    }

    #[test]
    fn derived_seeds_differ_by_tag() {
        assert_ne!(derive_seed(1, "stash"), derive_seed(1, "oracle"));
        assert_eq!(derive_seed(1, "stash"), derive_seed(1, "stash"));
    }

    #[test]
    fn oracle_specs() {
        assert_eq!("p=1,sigma=0".parse::<OracleSpec>().unwrap(), OracleSpec::Generator { p: 1.0, sigma: 0.0 });
        assert_eq!(
            "margin=1.0, tau=0.1".parse::<OracleSpec>().unwrap(),
            OracleSpec::Discriminator { margin: 1.0, tau: 0.1 }
        );
        for bad in ["p=1", "p=1,tau=2", "margin=x,tau=1", "p=1,sigma=0,tau=1"] {
            assert!(bad.parse::<OracleSpec>().is_err(), "{bad}");
        }
    }
}

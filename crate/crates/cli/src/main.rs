use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use musemia::attack::{DistanceMetric, EpsilonHeuristic, McConfig};
use musemia::gan::load_checkpoint;
use musemia::harness::{
    mc_attack_checkpoint, mc_attack_oracle, parse_mc_csv, parse_wb_csv, render_markdown, render_mc_csv, render_wb_csv,
    run_experiment, train_to_dir, wb_attack_checkpoint, wb_attack_oracle, ExperimentConfig, OracleSpec, ReportTables,
    MC_CSV, WB_CSV,
};
use musemia::pianoroll::{read_dataset, split, synth_generate, write_dataset, PianorollShape, SplitSpec, StyleParams};
use musemia::{Error, Result};

#[derive(Parser)]
#[command(name = "musemia", version, about = "Membership-inference auditing for pianoroll GANs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic dataset tools.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Random train/test split of a dataset file.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        fraction: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Dataset, split and training stages of an experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run one attack against a checkpoint or an oracle model.
    #[command(subcommand)]
    Attack(AttackCmd),
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Print the tables of a finished run.
    Report {
        #[arg(long)]
        in_dir: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: ReportFormat,
    },
}

#[derive(Subcommand)]
enum DatasetCmd {
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 2)]
        tracks: usize,
        #[arg(long, default_value_t = 1)]
        bars: usize,
        #[arg(long, default_value_t = 16)]
        steps: usize,
        #[arg(long, default_value_t = 24)]
        pitches: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Target {
    #[arg(long, required_unless_present = "oracle", conflicts_with = "oracle")]
    checkpoint: Option<PathBuf>,
    /// "margin=M,tau=T" for wb, "p=P,sigma=S" for mc.
    #[arg(long)]
    oracle: Option<OracleSpec>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum AttackCmd {
    Wb {
        #[command(flatten)]
        target: Target,
        /// Noise seed of an oracle discriminator.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    Mc {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value = "median")]
        heuristic: EpsilonHeuristic,
        #[arg(long, default_value = "euclidean")]
        metric: DistanceMetric,
        #[arg(long, default_value_t = 1000)]
        stash: usize,
        #[arg(long = "n", default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        subset: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Full pipeline: data, split, training, attacks and reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overwrite the outputs of a previous run.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Md,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn attack(cmd: AttackCmd) -> Result<()> {
    match cmd {
        AttackCmd::Wb { target, seed } => {
            let train = read_dataset(&target.train)?;
            let test = read_dataset(&target.test)?;
            let (result, row) = match (&target.checkpoint, target.oracle) {
                (Some(path), _) => wb_attack_checkpoint(&load_checkpoint(path)?, &train, &test)?,
                (None, Some(OracleSpec::Discriminator { margin, tau })) => {
                    wb_attack_oracle(margin, tau, seed, &train, &test, 0)?
                }
                (None, _) => return Err(Error::Config("wb needs --oracle \"margin=M,tau=T\"".into())),
            };
            info!("confusion {:?}", result.confusion);
            write_text(&target.out, &render_wb_csv(&[row])?)?;
            println!("success_rate {:.3}", row.success_rate);
        }
        AttackCmd::Mc {
            target,
            heuristic,
            metric,
            stash,
            n,
            subset,
            trials,
            seed,
        } => {
            let mc = McConfig {
                stash_size: stash,
                n_per_query: n,
                heuristic,
                metric,
                subset_size: subset,
                trials,
                seed,
            };
            mc.validate()?;
            let train = read_dataset(&target.train)?;
            let test = read_dataset(&target.test)?;
            let (_, row) = match (&target.checkpoint, target.oracle) {
                (Some(path), _) => mc_attack_checkpoint(&load_checkpoint(path)?, &train, &test, &mc)?,
                (None, Some(OracleSpec::Generator { p, sigma })) => {
                    let style = train.style().cloned().unwrap_or_default();
                    mc_attack_oracle(p, sigma, &train, &test, &mc, &style)?
                }
                (None, _) => return Err(Error::Config("mc needs --oracle \"p=P,sigma=S\"".into())),
            };
            write_text(&target.out, &render_mc_csv(std::slice::from_ref(&row))?)?;
            println!(
                "single_mi_accuracy {:.3} set_mi_accuracy {:.3}",
                row.single_mi_accuracy, row.set_mi_accuracy
            );
        }
    }
    Ok(())
}

fn report(in_dir: &Path, format: ReportFormat) -> Result<()> {
    let read = |name: &str| -> Result<Option<String>> {
        let path = in_dir.join(name);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(text)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(&path, e)),
        }
    };
    let (wb, mc) = (read(WB_CSV)?, read(MC_CSV)?);
    if wb.is_none() && mc.is_none() {
        return Err(Error::NoRows);
    }
    match format {
        ReportFormat::Csv => {
            let texts: Vec<String> = [wb, mc].into_iter().flatten().collect();
            print!("{}", texts.join("\n"));
        }
        ReportFormat::Md => {
            let tables = ReportTables {
                title: format!("Membership inference report: {}", in_dir.display()),
                whitebox: wb.as_deref().map(parse_wb_csv).transpose()?,
                mc: mc.as_deref().map(parse_mc_csv).transpose()?,
            };
            print!("{}", render_markdown(&tables)?);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Dataset(DatasetCmd::Gen {
            out,
            count,
            tracks,
            bars,
            steps,
            pitches,
            seed,
        }) => {
            let shape = PianorollShape::new(tracks, bars, steps, pitches)?;
            let data = synth_generate(seed, count, shape, &StyleParams::default())?;
            write_dataset(&data, &out)?;
            println!("wrote {} rolls to {}", data.len(), out.display());
        }
        Command::Split {
            input,
            fraction,
            seed,
            train,
            test,
        } => {
            let data = read_dataset(&input)?;
            let (a, b) = split(&data, &SplitSpec { train_fraction: fraction, seed })?;
            write_dataset(&a, &train)?;
            write_dataset(&b, &test)?;
            println!("train {} / test {}", a.len(), b.len());
        }
        Command::Train { config, out_dir } => {
            let config = ExperimentConfig::load(&config)?;
            let (_, _, checkpoints) = train_to_dir(&config, &out_dir)?;
            println!("wrote {} checkpoints to {}", checkpoints.len(), out_dir.join("checkpoints").display());
        }
        Command::Attack(cmd) => attack(cmd)?,
        Command::Experiment(ExperimentCmd::Run { config, force }) => {
            let config = ExperimentConfig::load(&config)?;
            let summary = run_experiment(&config, force)?;
            for f in &summary.files {
                println!("{}", f.display());
            }
        }
        Command::Report { in_dir, format } => report(&in_dir, format)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

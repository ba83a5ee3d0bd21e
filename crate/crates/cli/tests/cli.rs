use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use musemia::gan::GanLayout;
use musemia::harness::{DatasetSource, ExperimentConfig, Label};
use musemia::pianoroll::{PianorollShape, StyleParams};

fn musemia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_musemia"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tiny_config(out_dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::desk_default(out_dir);
    c.label = Label::Custom;
    c.dataset = DatasetSource::Synthetic {
        seed: 4,
        count: 80,
        shape: PianorollShape::new(2, 1, 4, 12).unwrap(),
        style: StyleParams::default(),
    };
    c.train.iterations = 10;
    c.train.checkpoint_every = 5;
    c.train.batch_size = 8;
    c.train.latent_dim = 4;
    c.train.layout = GanLayout {
        trunk_hidden: vec![8],
        disc_hidden: vec![8],
    };
    let mc = &mut c.attacks.mc[0];
    mc.stash_size = 40;
    mc.n_per_query = 20;
    mc.subset_size = 10;
    mc.trials = 2;
    c
}

#[test]
fn dataset_split_and_oracle_attacks() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let data = d.join("all.prd");
    let out = musemia(&["dataset", "gen", "--out", p(&data), "--count", "200", "--tracks", "2", "--bars", "1",
        "--steps", "8", "--pitches", "24", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.with_extension("meta.json").exists());

    let (train, test) = (d.join("train.prd"), d.join("test.prd"));
    let out = musemia(&["split", "--in", p(&data), "--fraction", "0.5", "--seed", "1", "--train", p(&train),
        "--test", p(&test)]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "train 100 / test 100");

    let wb = d.join("wb.csv");
    let out = musemia(&["attack", "wb", "--oracle", "margin=1,tau=0.1", "--train", p(&train), "--test", p(&test),
        "--out", p(&wb)]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&wb).unwrap();
    assert_eq!(text, "iterations,success_rate,accuracy,precision,recall,fpr,f1\n0,1.000,1.000,1.000,1.000,0.000,1.000\n");

    let mc = d.join("mc.csv");
    let out = musemia(&["attack", "mc", "--oracle", "p=1,sigma=0", "--train", p(&train), "--test", p(&test),
        "--heuristic", "p:0.001", "--metric", "euclidean", "--stash", "2000", "--n", "1000", "--subset", "20",
        "--trials", "3", "--seed", "5", "--out", p(&mc)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&mc).unwrap();
    assert!(text.starts_with("epochs,single_mi_accuracy,set_mi_accuracy,heuristic,metric,trials\n0,"));
    assert!(text.trim_end().ends_with(",1.000,p:0.001,euclidean,3"), "{text}");

    // A generator oracle cannot stand in for a discriminator.
    let out = musemia(&["attack", "wb", "--oracle", "p=1,sigma=0", "--train", p(&train), "--test", p(&test),
        "--out", p(&wb)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn exit_codes_follow_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();

    let out = musemia(&["dataset", "gen", "--out", p(&d.join("x.prd")), "--count", "5", "--pitches", "6"]);
    assert_eq!(code(&out), 2, "pitch range below one octave");

    let out = musemia(&["dataset", "gen", "--out", p(&d.join("x.prd")), "--count", "5"]);
    assert_eq!(code(&out), 0);
    let out = musemia(&["split", "--in", p(&d.join("x.prd")), "--fraction", "0.1", "--seed", "0", "--train",
        p(&d.join("a.prd")), "--test", p(&d.join("b.prd"))]);
    assert_eq!(code(&out), 2, "degenerate split");

    let mut bytes = fs::read(d.join("x.prd")).unwrap();
    bytes[0] = b'Z';
    fs::write(d.join("bad.prd"), &bytes).unwrap();
    let out = musemia(&["split", "--in", p(&d.join("bad.prd")), "--fraction", "0.5", "--seed", "0", "--train",
        p(&d.join("a.prd")), "--test", p(&d.join("b.prd"))]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad magic"));

    let out = musemia(&["attack", "mc", "--oracle", "p=1,sigma=0", "--train", "a", "--test", "b", "--out", "c",
        "--heuristic", "p:2"]);
    assert_eq!(code(&out), 2);

    fs::write(d.join("cfg.json"), "{\"schema_version\": 1}").unwrap();
    let out = musemia(&["experiment", "run", "--config", p(&d.join("cfg.json"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn experiment_run_force_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg_path = tmp.path().join("cfg.json");
    fs::write(&cfg_path, tiny_config(&run_dir).to_json().unwrap()).unwrap();

    let out = musemia(&["experiment", "run", "--config", p(&cfg_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let names = ["wb_metrics.csv", "mc_metrics.csv", "success_vs_iteration.csv", "report.md", "manifest.json"];
    let first: Vec<Vec<u8>> = names.iter().map(|n| fs::read(run_dir.join(n)).unwrap()).collect();
    assert_eq!(String::from_utf8_lossy(&first[0]).lines().count(), 3);
    assert!(run_dir.join("checkpoints/ckpt_00000010.ganc").exists());

    let out = musemia(&["experiment", "run", "--config", p(&cfg_path)]);
    assert_eq!(code(&out), 2, "existing output without --force");

    let out = musemia(&["experiment", "run", "--config", p(&cfg_path), "--force"]);
    assert_eq!(code(&out), 0);
    let second: Vec<Vec<u8>> = names.iter().map(|n| fs::read(run_dir.join(n)).unwrap()).collect();
    assert_eq!(first, second);

    let out = musemia(&["report", "--in-dir", p(&run_dir), "--format", "csv"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("iterations,success_rate"));
    let out = musemia(&["report", "--in-dir", p(&run_dir), "--format", "md"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("| 10 |"));
}

#[test]
fn train_writes_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("cfg.json");
    fs::write(&cfg_path, tiny_config(&tmp.path().join("unused")).to_json().unwrap()).unwrap();
    let out_dir = tmp.path().join("t");
    let out = musemia(&["train", "--config", p(&cfg_path), "--out-dir", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut ckpts: Vec<String> = fs::read_dir(out_dir.join("checkpoints"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    ckpts.sort();
    assert_eq!(ckpts, ["ckpt_00000005.ganc", "ckpt_00000010.ganc"]);

    let wb = tmp.path().join("wb.csv");
    let out = musemia(&["attack", "wb", "--checkpoint", p(&out_dir.join("checkpoints/ckpt_00000010.ganc")),
        "--train", p(&out_dir.join("train.prd")), "--test", p(&out_dir.join("test.prd")), "--out", p(&wb)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&wb).unwrap().lines().nth(1).unwrap().starts_with("10,"));
}

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nextpoi::classifier::{load_checkpoint, validation_metric, Objective};
use nextpoi::config::RunConfig;
use nextpoi::data::{parse_checkins, IngestFormat, SplitManifest};

const BIN: &str = env!("CARGO_BIN_EXE_nextpoi");

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
    out: PathBuf,
}

impl Fixture {
    fn new(max_epochs: usize) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let data = root.join("checkins.tsv");
        let out = root.join("out");
        let status = nextpoi(&["synth", "--users", "30", "--visits-per-user", "30", "--out", data.to_str().unwrap()]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        let config = root.join("run.json");
        let cfg = serde_json::json!({
            "data_path": data,
            "output_dir": out,
            "encoder": {"window_length": 5, "hidden_dim": 8, "poi_embed_dim": 4, "category_embed_dim": 2,
                        "temporal_embed_dim": 2, "num_attention_heads": 2, "num_layers": 1, "neighbor_count": 2},
            "training": {"max_epochs": max_epochs, "patience": 50},
            "seed": 5,
            "deterministic": true
        });
        fs::write(&config, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
        Fixture { _dir: dir, root, config, out }
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut full = vec!["--config", self.config.to_str().unwrap()];
        full.extend_from_slice(args);
        nextpoi(&full)
    }

    fn ok(&self, args: &[&str]) {
        let o = self.run(args);
        assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    }
}

fn nextpoi(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("NEXTPOI_OUTPUT_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = match fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect(),
        Err(_) => Vec::new(),
    };
    names.sort();
    names
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(nextpoi(&["ingest", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(nextpoi(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_data_exits_with_io_code_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = nextpoi(&["--data", "/nonexistent/checkins.tsv", "--output", out.to_str().unwrap(), "ingest"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(listing(&out).is_empty());
}

#[test]
fn invalid_config_value_is_a_config_error() {
    let f = Fixture::new(1);
    let o = f.run(&["--unseen-ratio", "1.5", "ingest"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(listing(&f.out).is_empty());
}

#[test]
fn train_without_ingest_fails_cleanly() {
    let f = Fixture::new(1);
    assert_eq!(f.run(&["train"]).status.code(), Some(2));
    assert!(listing(&f.out).iter().all(|n| !n.ends_with(".ckpt") && !n.contains("partial")));
}

#[test]
fn ingest_manifest_is_reproducible() {
    let f = Fixture::new(1);
    f.ok(&["ingest"]);
    let first = fs::read(f.out.join("split_manifest.json")).unwrap();
    let vocab = fs::read(f.out.join("vocabularies.json")).unwrap();
    f.ok(&["ingest"]);
    assert_eq!(first, fs::read(f.out.join("split_manifest.json")).unwrap());
    assert_eq!(vocab, fs::read(f.out.join("vocabularies.json")).unwrap());
    assert!(listing(&f.out).iter().all(|n| !n.contains("partial")));
}

#[test]
fn both_methods_produce_distinct_checkpoints_and_report() {
    let f = Fixture::new(2);
    f.ok(&["ingest"]);
    f.ok(&["train"]);
    let joint = fs::read(f.out.join("joint.ckpt")).unwrap();
    let baseline = fs::read(f.out.join("baseline.ckpt")).unwrap();
    assert_ne!(joint, baseline);
    for name in ["prior.json", "joint_metrics.csv", "baseline_metrics.csv"] {
        assert!(f.out.join(name).is_file(), "{name}");
    }
    let o = f.run(&["eval", "--dump-rankings", "5"]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("unseen") && stdout.contains("baseline"), "{stdout}");
    let table = fs::read_to_string(f.out.join("table1.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    let dump = fs::read_to_string(f.out.join("rankings_joint.jsonl")).unwrap();
    let line: serde_json::Value = serde_json::from_str(dump.lines().next().unwrap()).unwrap();
    assert_eq!(line["topk"].as_array().unwrap().len(), 5);
    for name in ["results.json", "prior_histogram.svg", "table1.txt"] {
        assert!(f.out.join(name).is_file(), "{name}");
    }
}

#[test]
fn resume_restores_the_best_validation_metric() {
    let f = Fixture::new(3);
    f.ok(&["ingest"]);
    f.ok(&["--methods", "joint", "train"]);

    let config = RunConfig::load(&f.config).unwrap();
    let file = fs::File::open(&config.data_path).unwrap();
    let data = parse_checkins(BufReader::new(file), &IngestFormat::default()).unwrap();
    let manifest: SplitManifest =
        serde_json::from_slice(&fs::read(f.out.join("split_manifest.json")).unwrap()).unwrap();
    let split = manifest.to_split(&data.histories).unwrap();
    let ckpt = load_checkpoint(&f.out.join("joint.ckpt")).unwrap();
    assert!(ckpt.is_resumable());
    assert_eq!(ckpt.model.objective, Objective::Category);
    let state = ckpt.into_state(&split, &data.pois, config.train_config()).unwrap();
    let metric = validation_metric(&state.predictor, &split, &data.pois, &split.validation).unwrap();
    assert!((metric - state.best_validation).abs() <= 1e-6, "{metric} vs {}", state.best_validation);

    f.ok(&["--methods", "joint", "--max-epochs", "5", "train", "--resume"]);
    let metrics = fs::read_to_string(f.out.join("joint_metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 5);
}

#[test]
fn sweep_covers_every_ratio() {
    let f = Fixture::new(1);
    f.ok(&["sweep", "--ratios", "0.2,0.4,0.6,0.8"]);
    let results: serde_json::Value = serde_json::from_slice(&fs::read(f.out.join("results.json")).unwrap()).unwrap();
    let points = results["sweep"]["points"].as_array().unwrap();
    assert_eq!(points.len(), 4);
    for p in points {
        let methods: Vec<&str> = p["reports"].as_array().unwrap().iter().map(|r| r["method"].as_str().unwrap()).collect();
        assert_eq!(methods, ["joint", "baseline"]);
    }
    let csv = fs::read_to_string(f.out.join("sweep.csv")).unwrap();
    let rows = csv.lines().skip(1).take_while(|l| !l.is_empty()).count();
    assert_eq!(rows, 4 * 2 * 4);
    assert!(csv.contains("# slopes"));
}

#[test]
fn output_dir_can_come_from_the_environment() {
    let f = Fixture::new(1);
    let alt = f.root.join("elsewhere");
    let data = f.root.join("checkins.tsv");
    let o = Command::new(BIN)
        .args(["--data", data.to_str().unwrap(), "ingest"])
        .env("NEXTPOI_OUTPUT_DIR", &alt)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(alt.join("split_manifest.json").is_file());
}

#[test]
fn show_config_reflects_overrides() {
    let f = Fixture::new(1);
    let o = f.run(&["--seed", "77", "--methods", "baseline", "show-config"]);
    let c: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(c["seed"], 77);
    assert_eq!(c["methods"], "baseline");
}

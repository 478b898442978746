//! The `nextpoi` command line: ingest, train, eval, sweep, plot and synth.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::classifier::{
    load_checkpoint, train_with_objective, validation_metric, write_checkpoint, Checkpoint, Objective, Predictor,
    TrainState, Trainer,
};
use crate::config::{file_digest, RunConfig};
use crate::data::{
    find_threshold_for_unseen_ratio, parse_checkins, temporal_split, DatasetSplit, IngestFormat, IngestStats,
    Ingested, SplitManifest,
};
use crate::encoder::Vocabularies;
use crate::error::{Error, Result};
use crate::eval::{
    dump_rankings, emit_report, sweep_unseen_ratio, table_text, write_plots, BaselineMethod, JointMethod,
    RankingMethod, RunResults, SplitSummary,
};
use crate::geo::{estimate_prior, PriorFile, ProximityPrior};
use crate::output::write_files;
use crate::pipeline::{method_seed, MethodSelection, TrainedMethods};
use crate::synthetic::{generate, SyntheticConfig};

pub const OUTPUT_DIR_ENV: &str = "NEXTPOI_OUTPUT_DIR";
pub const MANIFEST_FILE: &str = "split_manifest.json";
pub const PRIOR_FILE: &str = "prior.json";

#[derive(Debug, Parser)]
#[command(name = "nextpoi", version, about = "Next-POI forecasting with unseen-venue evaluation")]
pub struct Cli {
    /// Run configuration (JSON). Flags override its values.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Check-in TSV file.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, global = true, env = OUTPUT_DIR_ENV)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Keep wall-clock timings out of written files.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Split at the threshold reaching this unseen-POI ratio.
    #[arg(long, global = true, conflicts_with = "threshold")]
    pub unseen_ratio: Option<f64>,
    /// Split at this Unix timestamp.
    #[arg(long, global = true)]
    pub threshold: Option<i64>,
    #[arg(long, global = true, value_enum)]
    pub methods: Option<MethodArg>,
    #[arg(long, global = true)]
    pub max_epochs: Option<usize>,
    /// More log output (repeatable).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Joint,
    Baseline,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthKind {
    Swap,
    Churn,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse the data, choose the split and write the manifest.
    Ingest,
    /// Train the selected methods on the manifest's split.
    Train {
        /// Continue from existing checkpoints.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate trained checkpoints and write the report files.
    Eval {
        /// Also write the top-N ranking of every test target as JSON lines.
        #[arg(long, value_name = "N")]
        dump_rankings: Option<usize>,
    },
    /// Train and evaluate at several unseen ratios.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
    },
    /// Re-render plots from results.json.
    Plot,
    /// Print the effective configuration.
    ShowConfig,
    /// Write a synthetic check-in file.
    Synth {
        #[arg(long, value_enum, default_value = "churn")]
        kind: SynthKind,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        visits_per_user: Option<usize>,
        /// Destination TSV.
        #[arg(long)]
        out: PathBuf,
    },
}

impl Cli {
    /// Config file (or defaults) with flags applied, validated.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.data {
            c.data_path = d.clone();
        }
        if let Some(o) = &self.output {
            c.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if self.deterministic {
            c.deterministic = true;
        }
        if let Some(r) = self.unseen_ratio {
            c.split.unseen_ratio = Some(r);
            c.split.threshold = None;
        }
        if let Some(t) = self.threshold {
            c.split.threshold = Some(t);
            c.split.unseen_ratio = None;
        }
        if let Some(m) = self.methods {
            c.methods = match m {
                MethodArg::Joint => MethodSelection::Joint,
                MethodArg::Baseline => MethodSelection::Baseline,
                MethodArg::Both => MethodSelection::Both,
            };
        }
        if let Some(e) = self.max_epochs {
            c.training.max_epochs = e;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Parses `args` and runs the command; returns the process exit status.
pub fn run_from_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Command::Synth {
        kind,
        users,
        visits_per_user,
        out,
    } = &cli.command
    {
        return cmd_synth(*kind, *users, *visits_per_user, cli.seed, out);
    }
    let config = cli.run_config()?;
    match &cli.command {
        Command::Ingest => cmd_ingest(&config),
        Command::Train { resume } => cmd_train(&config, *resume),
        Command::Eval { dump_rankings } => cmd_eval(&config, *dump_rankings),
        Command::Sweep { ratios } => cmd_sweep(&config, ratios.as_deref()),
        Command::Plot => cmd_plot(&config),
        Command::ShowConfig => {
            print!("{}", config.to_json());
            Ok(())
        }
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

fn load_data(config: &RunConfig) -> Result<Ingested> {
    let path = &config.data_path;
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let format = IngestFormat {
        zone: config.zone,
        max_malformed_fraction: config.max_malformed_fraction,
        ..IngestFormat::default()
    };
    let data = parse_checkins(BufReader::new(file), &format)?;
    log::info!(
        "{}: {} visits, {} users, {} POIs, {} categories ({} malformed lines)",
        path.display(),
        data.stats.visits,
        data.stats.users,
        data.stats.pois,
        data.stats.categories,
        data.stats.malformed
    );
    Ok(data)
}

/// The split the configuration asks for.
pub fn resolve_split(config: &RunConfig, data: &Ingested) -> Result<DatasetSplit> {
    let threshold = match (config.split.threshold, config.target_ratio()) {
        (Some(t), _) => t,
        (None, Some(r)) => {
            let choice = find_threshold_for_unseen_ratio(&data.histories, r)?;
            log::info!("threshold {} reaches unseen ratio {:.4}", choice.threshold, choice.realized_ratio);
            choice.threshold
        }
        (None, None) => unreachable!("target_ratio is set whenever threshold is not"),
    };
    temporal_split(&data.histories, threshold, config.seed)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn load_split(config: &RunConfig, data: &Ingested) -> Result<DatasetSplit> {
    let manifest: SplitManifest = read_json(&config.output_dir.join(MANIFEST_FILE))?;
    manifest.to_split(&data.histories)
}

fn summary(split: &DatasetSplit) -> SplitSummary {
    SplitSummary {
        threshold: split.threshold,
        seed: split.seed,
        unseen_ratio: split.unseen_ratio(),
        validation_targets: split.validation.len(),
        test_targets: split.test.len(),
        unseen_pois: split.unseen_poi_ids.len(),
    }
}

#[derive(Serialize)]
struct IngestReport {
    #[serde(flatten)]
    stats: IngestStats,
    split: SplitSummary,
}

fn ensure_data_exists(config: &RunConfig) -> Result<()> {
    if !config.data_path.is_file() {
        return Err(Error::file(
            &config.data_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "data file not found"),
        ));
    }
    Ok(())
}

fn cmd_ingest(config: &RunConfig) -> Result<()> {
    ensure_data_exists(config)?;
    let data = load_data(config)?;
    let split = resolve_split(config, &data)?;
    let vocab = Vocabularies::from_training(&split.train, &data.pois);
    let report = IngestReport {
        stats: data.stats.clone(),
        split: summary(&split),
    };
    log::info!(
        "split at {}: realized unseen ratio {:.4}, {} validation / {} test targets",
        split.threshold,
        split.unseen_ratio(),
        split.validation.len(),
        split.test.len()
    );
    write_files(
        &config.output_dir,
        &[
            (MANIFEST_FILE.into(), json_bytes(&SplitManifest::from_split(&split))?),
            ("vocabularies.json".into(), json_bytes(&vocab)?),
            ("ingest_stats.json".into(), json_bytes(&report)?),
            ("config.json".into(), config.to_json().into_bytes()),
        ],
    )?;
    Ok(())
}

pub fn checkpoint_name(objective: Objective) -> &'static str {
    match objective {
        Objective::Category => "joint.ckpt",
        Objective::Poi => "baseline.ckpt",
    }
}

fn metrics_name(objective: Objective) -> &'static str {
    match objective {
        Objective::Category => "joint_metrics.csv",
        Objective::Poi => "baseline_metrics.csv",
    }
}

fn selected(methods: MethodSelection) -> Vec<Objective> {
    let mut v = Vec::new();
    if methods.joint() {
        v.push(Objective::Category);
    }
    if methods.baseline() {
        v.push(Objective::Poi);
    }
    v
}

fn train_one(config: &RunConfig, split: &DatasetSplit, data: &Ingested, objective: Objective, resume: bool) -> Result<TrainState> {
    let train_config = config.train_config();
    let seed = method_seed(config.seed, objective);
    let path = config.output_dir.join(checkpoint_name(objective));
    if !resume {
        return train_with_objective(split, &data.pois, &train_config, objective, seed);
    }
    let ckpt = load_checkpoint(&path)?;
    if ckpt.model.objective != objective {
        return Err(Error::Format {
            what: "checkpoint",
            detail: format!("{} holds a {:?} model", path.display(), ckpt.model.objective),
        });
    }
    let state = ckpt.into_state(split, &data.pois, train_config)?;
    let metric = validation_metric(&state.predictor, split, &data.pois, &split.validation)?;
    log::info!(
        "resumed {objective:?} at epoch {}: validation {metric:.6} (stored best {:.6})",
        state.epochs_run,
        state.best_validation
    );
    Trainer::new(split, &data.pois, state.config, objective)?.run(state)
}

fn cmd_train(config: &RunConfig, resume: bool) -> Result<()> {
    ensure_data_exists(config)?;
    let manifest_path = config.output_dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::file(
            &manifest_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "run `ingest` first"),
        ));
    }
    let data = load_data(config)?;
    let split = load_split(config, &data)?;
    let prior = estimate_prior(
        &split.train,
        &data.pois,
        config.prior.bucketing()?,
        config.prior.smoothing_alpha,
    )?;
    let mut files = vec![(PRIOR_FILE.to_string(), json_bytes(&prior.to_json())?)];
    for objective in selected(config.methods) {
        let mut state = train_one(config, &split, &data, objective, resume)?;
        log::info!(
            "{objective:?}: best validation acc@1 {:.4} at epoch {:?}",
            state.best_validation,
            state.best_epoch
        );
        if config.deterministic {
            state.history.iter_mut().for_each(|m| m.wall_seconds = 0.0);
        }
        let mut ckpt = Vec::new();
        write_checkpoint(&Checkpoint::from_state(&state), &mut ckpt)?;
        let mut metrics = Vec::new();
        state.write_metrics_csv(&mut metrics)?;
        files.push((checkpoint_name(objective).to_string(), ckpt));
        files.push((metrics_name(objective).to_string(), metrics));
    }
    write_files(&config.output_dir, &files)?;
    Ok(())
}

fn run_results(config: &RunConfig) -> Result<RunResults> {
    let digest = file_digest(&config.data_path)?;
    Ok(RunResults {
        run_id: config.run_id(&digest),
        seed: config.seed,
        config: serde_json::to_value(config)?,
        split: None,
        reports: Vec::new(),
        sweep: None,
        prior: None,
    })
}

fn cmd_eval(config: &RunConfig, dump: Option<usize>) -> Result<()> {
    ensure_data_exists(config)?;
    let prior_file: PriorFile = read_json(&config.output_dir.join(PRIOR_FILE))?;
    let prior = ProximityPrior::from_json(&prior_file)?;
    let checkpoints = selected(config.methods)
        .into_iter()
        .map(|o| {
            let path = config.output_dir.join(checkpoint_name(o));
            let ckpt = load_checkpoint(&path)?;
            if ckpt.model.objective != o {
                return Err(Error::Format {
                    what: "checkpoint",
                    detail: format!("{} holds a {:?} model", path.display(), ckpt.model.objective),
                });
            }
            Ok(ckpt)
        })
        .collect::<Result<Vec<_>>>()?;
    let data = load_data(config)?;
    let split = load_split(config, &data)?;
    let mut results = run_results(config)?;
    let mut dumps = Vec::new();
    for ckpt in checkpoints {
        let predictor = Predictor::new(ckpt.model, &split, &data.pois)?;
        let joint;
        let baseline;
        let method: &dyn RankingMethod = match predictor.model.objective {
            Objective::Category => {
                joint = JointMethod {
                    predictor: &predictor,
                    prior: &prior,
                    pois: &data.pois,
                };
                &joint
            }
            Objective::Poi => {
                baseline = BaselineMethod {
                    predictor: &predictor,
                    pois: &data.pois,
                };
                &baseline
            }
        };
        results
            .reports
            .push(crate::eval::evaluate(method, &split, &data.pois, &config.ks)?);
        if let Some(n) = dump {
            let mut buf = Vec::new();
            dump_rankings(method, &split, &data.pois, n, &mut buf)?;
            dumps.push((format!("rankings_{}.jsonl", method.name()), buf));
        }
    }
    results.split = Some(summary(&split));
    results.prior = Some(prior_file);
    print!("{}", table_text(&results.reports));
    emit_report(&results, &config.output_dir)?;
    if !dumps.is_empty() {
        write_files(&config.output_dir, &dumps)?;
    }
    Ok(())
}

fn cmd_sweep(config: &RunConfig, ratios: Option<&[f64]>) -> Result<()> {
    let ratios = ratios.unwrap_or(&config.sweep_ratios);
    if ratios.is_empty() || ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(Error::config("sweep ratios must be non-empty and lie in (0, 1)"));
    }
    ensure_data_exists(config)?;
    let data = load_data(config)?;
    let experiment = config.experiment();
    let mut point = 0u64;
    let sweep = sweep_unseen_ratio(&data.histories, ratios, &config.ks, config.seed, |split| {
        let seed = config.seed.wrapping_add(point);
        point += 1;
        let methods = TrainedMethods::train(split, &data.pois, &experiment, seed)?;
        methods.evaluate(split, &data.pois, &data.pois, &config.ks)
    })?;
    for c in &sweep.comparison {
        println!(
            "Acc@{:<3} slope: joint {:+.4}, baseline {:+.4}",
            c.k, c.joint, c.baseline
        );
    }
    let mut results = run_results(config)?;
    results.sweep = Some(sweep);
    emit_report(&results, &config.output_dir)?;
    Ok(())
}

fn cmd_plot(config: &RunConfig) -> Result<()> {
    let results: RunResults = read_json(&config.output_dir.join("results.json"))?;
    for p in write_plots(&results, &config.output_dir)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_synth(kind: SynthKind, users: Option<usize>, visits: Option<usize>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut config = match kind {
        SynthKind::Swap => SyntheticConfig::swap(),
        SynthKind::Churn => SyntheticConfig::churn(),
    };
    if let Some(u) = users {
        config.users = u;
    }
    if let Some(v) = visits {
        config.visits_per_user = v;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    let data = generate(&config)?;
    let mut buf = Vec::new();
    data.write_tsv(&mut buf)?;
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = out
        .file_name()
        .ok_or_else(|| Error::config("--out must name a file"))?
        .to_string_lossy()
        .into_owned();
    write_files(dir, &[(name, buf)])?;
    log::info!(
        "wrote {} visits over {} POIs to {}",
        data.visits.len(),
        data.pois.len(),
        out.display()
    );
    Ok(())
}

//! Command-line front end.
//!
//! Every option resolves as flag, then the subcommand's table in the
//! `--config` TOML file, then the built-in default. Each run writes its
//! primary output plus `<output>.manifest.json` recording the resolved
//! configuration. Exit codes: 0 success, 1 runtime failure, 2 usage or
//! validation error.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::{self, Display};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bands::{build_bands, default_log_floor, simultaneous_bands};
use crate::error::Error;
use crate::forest::{
    predict_votes, synth_dataset, train_forest, ForestConfig, ForestModel, MaxFeatures, Resampling, SynthSpec,
};
use crate::oracle::{compare_with_analytic, run_oracle, ClassifierMode, OracleConfig, OracleTolerance};
use crate::roc::{auc, compare_curves, estimate_votes, RocEstimate, VarianceMode};
use crate::vote_model::{load_dataset, load_votes, parse_votes, LabelColumn, VoteFormat, VoteMatrix};

#[derive(Debug, Parser)]
#[command(
    name = "ensemble-roc",
    version,
    about = "ROC curves and confidence bands for voting ensembles"
)]
pub struct Cli {
    /// TOML file with one table of defaults per subcommand, e.g. `[train]`.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a random forest on a labeled CSV dataset.
    Train(TrainArgs),
    /// Write every tree's vote on a test dataset.
    Votes(VotesArgs),
    /// Estimate the ROC curve with confidence bands from a vote file.
    Roc(RocArgs),
    /// Overlay two curves on a common FPR grid.
    Compare(CompareArgs),
    /// Validate the analytic estimate against Monte Carlo replicates.
    Oracle(OracleArgs),
    /// Generate a synthetic labeled dataset.
    Synth(SynthArgs),
    /// Run train, votes and roc in sequence.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ForestFlags {
    /// Number of trees [default: 100]
    #[arg(long)]
    pub trees: Option<u32>,
    /// Maximum tree depth, or `none` [default: none]
    #[arg(long)]
    pub max_depth: Option<String>,
    /// Minimum training samples per leaf [default: 1]
    #[arg(long)]
    pub min_samples_leaf: Option<u32>,
    /// Features tried per split: `sqrt`, `all` or a count [default: sqrt]
    #[arg(long)]
    pub max_features: Option<String>,
    /// `bootstrap`, `none` or `subsample:<fraction>` [default: bootstrap]
    #[arg(long)]
    pub resampling: Option<String>,
    /// Use only the first N training rows
    #[arg(long, value_name = "N")]
    pub train_rows: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BandFlags {
    /// Ensemble size to evaluate [default: observed size]
    #[arg(long)]
    pub m_eval: Option<u32>,
    /// Band confidence level [default: 0.95]
    #[arg(long)]
    pub confidence: Option<f64>,
    /// `full` or `classifier` [default: full]
    #[arg(long)]
    pub mode: Option<String>,
    /// Bonferroni-simultaneous bands over all thresholds
    #[arg(long)]
    pub simultaneous: bool,
    /// Floor for log10 FPR columns [default: 1/(10 n_neg)]
    #[arg(long)]
    pub log_floor: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training dataset CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label column name or zero-based index [default: label]
    #[arg(long)]
    pub label_col: Option<String>,
    #[command(flatten)]
    pub forest: ForestFlags,
    /// Forest seed (required)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model output path
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VotesArgs {
    /// Trained model file
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Test dataset CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label column name or zero-based index [default: label]
    #[arg(long)]
    pub label_col: Option<String>,
    /// `full` or `compact` [default: full]
    #[arg(long)]
    pub format: Option<String>,
    /// Recorded in the manifest; vote prediction is deterministic (required)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Vote file output path
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RocArgs {
    /// Vote file (full or compact)
    #[arg(long)]
    pub votes: Option<PathBuf>,
    #[command(flatten)]
    pub bands: BandFlags,
    /// Band CSV output path
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Also write the per-threshold estimate CSV here
    #[arg(long)]
    pub estimate_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// First curve: a vote file or an estimate CSV
    #[arg(long)]
    pub a: Option<PathBuf>,
    /// Second curve: a vote file or an estimate CSV
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Ensemble size for vote-file inputs [default: each file's observed size]
    #[arg(long)]
    pub m_eval: Option<u32>,
    /// Band confidence level [default: 0.95]
    #[arg(long)]
    pub confidence: Option<f64>,
    /// `full` or `classifier` [default: full]
    #[arg(long)]
    pub mode: Option<String>,
    /// Floor for the log10 FPR column [default: 1/(10 n_neg)]
    #[arg(long)]
    pub log_floor: Option<f64>,
    /// Overlay CSV output path
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Vote file (full votes required for shared mode)
    #[arg(long)]
    pub votes: Option<PathBuf>,
    /// Monte Carlo replicates [default: 10000]
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Replicate stream seed (required)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ensemble size to simulate [default: observed size]
    #[arg(long)]
    pub m_eval: Option<u32>,
    /// `independent` or `shared` [default: independent]
    #[arg(long)]
    pub classifier_mode: Option<String>,
    /// Poisson-resample the test set in every replicate
    #[arg(long)]
    pub poisson: bool,
    /// Also report rates normalized by realized class sizes
    #[arg(long)]
    pub realized_norm: bool,
    /// Standard errors allowed between analytic and empirical means [default: 4]
    #[arg(long)]
    pub mean_se: Option<f64>,
    /// Summary CSV output path
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// `two-gaussians` or `xor-blobs` [default: two-gaussians]
    #[arg(long)]
    pub generator: Option<String>,
    /// Class separation [default: 2]
    #[arg(long)]
    pub separation: Option<f64>,
    /// Number of rows [default: 1000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of features [default: 10]
    #[arg(long)]
    pub d: Option<usize>,
    /// Sampling seed (required)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset CSV output path
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Training dataset CSV
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Test dataset CSV
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Label column name or zero-based index [default: label]
    #[arg(long)]
    pub label_col: Option<String>,
    #[command(flatten)]
    pub forest: ForestFlags,
    /// `full` or `compact` [default: full]
    #[arg(long)]
    pub format: Option<String>,
    #[command(flatten)]
    pub bands: BandFlags,
    /// Forest seed (required)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for model.json, votes.csv, bands.csv and estimate.csv
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// A failed run, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag or configuration value; exit code 2.
    Usage(String),
    /// Failure while doing the work; exit code 1.
    Runtime(Error),
    /// The work completed but its check did not pass; exit code 1.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) | CliError::Failed(_) => 1,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Failed(msg) => f.write_str(msg),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(flag: &str, msg: impl Display) -> CliError {
    CliError::Usage(format!("--{flag}: {msg}"))
}

/// One subcommand's table from the config file.
struct Layer {
    section: &'static str,
    table: toml::Table,
    used: RefCell<Vec<String>>,
}

impl Layer {
    fn new(root: Option<&toml::Table>, section: &'static str) -> CliResult<Self> {
        let table = match root.and_then(|r| r.get(section)) {
            None => toml::Table::new(),
            Some(toml::Value::Table(t)) => t.clone(),
            Some(_) => return Err(CliError::Usage(format!("--config: [{section}] must be a table"))),
        };
        Ok(Self {
            section,
            table,
            used: RefCell::new(Vec::new()),
        })
    }

    fn raw(&self, flag: &str) -> CliResult<Option<String>> {
        let alt = flag.replace('-', "_");
        let Some((key, value)) = self
            .table
            .get_key_value(flag)
            .or_else(|| self.table.get_key_value(&alt))
        else {
            return Ok(None);
        };
        self.used.borrow_mut().push(key.clone());
        let text = match value {
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Boolean(b) => b.to_string(),
            _ => {
                return Err(usage(
                    flag,
                    format!(
                        "config key [{}] {key} must be a string, number or boolean",
                        self.section
                    ),
                ))
            }
        };
        Ok(Some(text))
    }

    /// Flag value, else config value, parsed with the flag's parser.
    fn get<T>(&self, flag: &str, cli: Option<T>) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let from_config = self.raw(flag)?;
        if cli.is_some() {
            return Ok(cli);
        }
        from_config
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| usage(flag, format!("invalid value {s:?}: {e}")))
            })
            .transpose()
    }

    fn or<T>(&self, flag: &str, cli: Option<T>, default: T) -> CliResult<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(flag, cli)?.unwrap_or(default))
    }

    fn required<T>(&self, flag: &str, cli: Option<T>) -> CliResult<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(flag, cli)?.ok_or_else(|| usage(flag, "is required"))
    }

    fn switch(&self, flag: &str, cli: bool) -> CliResult<bool> {
        Ok(cli || self.get::<bool>(flag, None)?.unwrap_or(false))
    }

    /// Rejects config keys no option asked for.
    fn finish(&self) -> CliResult<()> {
        let used = self.used.borrow();
        match self.table.keys().find(|k| !used.contains(k)) {
            Some(k) => Err(CliError::Usage(format!(
                "--config: unknown key {k:?} in [{}]",
                self.section
            ))),
            None => Ok(()),
        }
    }
}

/// `none` or a positive depth.
#[derive(Debug, Clone, Copy)]
struct Depth(Option<u32>);

impl FromStr for Depth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "none" {
            return Ok(Depth(None));
        }
        match s.parse::<u32>() {
            Ok(0) | Err(_) => Err("expected a positive integer or `none`".into()),
            Ok(d) => Ok(Depth(Some(d))),
        }
    }
}

impl FromStr for VoteFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(VoteFormat::Full),
            "compact" => Ok(VoteFormat::Compact),
            _ => Err("expected `full` or `compact`".into()),
        }
    }
}

fn vote_format_name(f: VoteFormat) -> &'static str {
    match f {
        VoteFormat::Full => "full",
        VoteFormat::Compact => "compact",
    }
}

/// Everything recorded next to an output so the run can be repeated.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub results: Value,
    pub started_unix_secs: u64,
    pub duration_secs: f64,
}

struct Recorder {
    subcommand: &'static str,
    started: SystemTime,
    clock: Instant,
    seeds: BTreeMap<String, u64>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl Recorder {
    fn new(subcommand: &'static str) -> Self {
        Self {
            subcommand,
            started: SystemTime::now(),
            clock: Instant::now(),
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    fn input(&mut self, name: &str, path: &Path) -> &mut Self {
        self.inputs.insert(name.into(), path.display().to_string());
        self
    }

    fn output(&mut self, name: &str, path: &Path) -> &mut Self {
        self.outputs.insert(name.into(), path.display().to_string());
        self
    }

    fn seed(&mut self, name: &str, seed: u64) -> &mut Self {
        self.seeds.insert(name.into(), seed);
        self
    }

    /// Writes `<primary>.manifest.json` and returns its path.
    fn write(self, primary: &Path, config: Value, results: Value) -> CliResult<PathBuf> {
        let manifest = RunManifest {
            tool: "ensemble-roc",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: self.subcommand,
            config,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs: self.outputs,
            results,
            started_unix_secs: self
                .started
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            duration_secs: self.clock.elapsed().as_secs_f64(),
        };
        let path = manifest_path(primary);
        let text = serde_json::to_string_pretty(&manifest).map_err(Error::from)?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

/// `<path>.manifest.json`
pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn check_confidence(c: f64) -> CliResult<f64> {
    if c > 0.0 && c < 1.0 {
        Ok(c)
    } else {
        Err(usage("confidence", format!("{c} is outside (0, 1)")))
    }
}

fn check_log_floor(f: Option<f64>) -> CliResult<Option<f64>> {
    match f {
        Some(v) if !(v > 0.0 && v < 1.0) => Err(usage("log-floor", format!("{v} is outside (0, 1)"))),
        other => Ok(other),
    }
}

fn check_m_eval(m: Option<u32>) -> CliResult<Option<u32>> {
    match m {
        Some(0) => Err(usage("m-eval", "must be at least 1")),
        other => Ok(other),
    }
}

// ---- train ----

#[derive(Debug, Clone, Serialize)]
struct TrainPlan {
    data: PathBuf,
    label_col: String,
    forest: ForestConfig,
    train_rows: Option<usize>,
    out: PathBuf,
}

fn resolve_forest(layer: &Layer, f: &ForestFlags, seed: u64) -> CliResult<(ForestConfig, Option<usize>)> {
    let n_trees = layer.or("trees", f.trees, 100)?;
    if n_trees == 0 {
        return Err(usage("trees", "must be at least 1"));
    }
    let max_depth = parse_flag::<Depth>(layer, "max-depth", &f.max_depth)?
        .unwrap_or(Depth(None))
        .0;
    let min_samples_leaf = layer.or("min-samples-leaf", f.min_samples_leaf, 1)?;
    if min_samples_leaf == 0 {
        return Err(usage("min-samples-leaf", "must be at least 1"));
    }
    let max_features = parse_flag::<MaxFeatures>(layer, "max-features", &f.max_features)?.unwrap_or(MaxFeatures::Sqrt);
    let resampling = parse_flag::<Resampling>(layer, "resampling", &f.resampling)?.unwrap_or(Resampling::Bootstrap);
    let train_rows = layer.get("train-rows", f.train_rows)?;
    if train_rows == Some(0) {
        return Err(usage("train-rows", "must be at least 1"));
    }
    Ok((
        ForestConfig {
            n_trees,
            max_depth,
            min_samples_leaf,
            max_features,
            resampling,
            seed,
        },
        train_rows,
    ))
}

/// String flag parsed with `T`'s parser so errors name the flag.
fn parse_flag<T>(layer: &Layer, flag: &str, cli: &Option<String>) -> CliResult<Option<T>>
where
    T: FromStr,
    T::Err: Display,
{
    let raw = layer.get::<String>(flag, cli.clone())?;
    raw.map(|s| s.parse::<T>().map_err(|e| usage(flag, e))).transpose()
}

fn resolve_train(args: &TrainArgs, layer: &Layer) -> CliResult<TrainPlan> {
    let data = layer.required("data", args.data.clone())?;
    let label_col = layer.or("label-col", args.label_col.clone(), "label".into())?;
    let seed = layer.required("seed", args.seed)?;
    let (forest, train_rows) = resolve_forest(layer, &args.forest, seed)?;
    let out = layer.required("out", args.out.clone())?;
    Ok(TrainPlan {
        data,
        label_col,
        forest,
        train_rows,
        out,
    })
}

fn exec_train(plan: &TrainPlan) -> CliResult<ForestModel> {
    let mut rec = Recorder::new("train");
    rec.input("data", &plan.data)
        .output("model", &plan.out)
        .seed("forest", plan.forest.seed);
    let mut data = load_dataset(&plan.data, &LabelColumn::from(plan.label_col.as_str()))?;
    if let Some(n) = plan.train_rows {
        data = data.head(n)?;
    }
    plan.forest
        .max_features
        .resolve(data.n_features())
        .map_err(|e| usage("max-features", e))?;
    let model = train_forest(&data, &plan.forest)?;
    model.save(&plan.out)?;
    let results = json!({
        "n_train": model.n_train,
        "n_features": model.n_features,
        "n_trees": model.n_trees(),
        "features_per_split": model.features_per_split,
        "max_tree_depth": model.trees.iter().map(|t| t.depth()).max().unwrap_or(0),
    });
    rec.write(&plan.out, to_value(plan)?, results)?;
    println!(
        "trained {} trees on {} rows x {} features (max_depth={}, features_per_split={}, resampling={}, seed={}) -> {}",
        model.n_trees(),
        model.n_train,
        model.n_features,
        plan.forest.max_depth.map_or("none".into(), |d| d.to_string()),
        model.features_per_split,
        plan.forest.resampling,
        plan.forest.seed,
        plan.out.display()
    );
    Ok(model)
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    Ok(serde_json::to_value(v).map_err(Error::from)?)
}

// ---- votes ----

#[derive(Debug, Clone, Serialize)]
struct VotesPlan {
    model: PathBuf,
    data: PathBuf,
    label_col: String,
    #[serde(serialize_with = "ser_format")]
    format: VoteFormat,
    seed: u64,
    out: PathBuf,
}

fn ser_format<S: serde::Serializer>(f: &VoteFormat, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(vote_format_name(*f))
}

fn resolve_votes(args: &VotesArgs, layer: &Layer) -> CliResult<VotesPlan> {
    Ok(VotesPlan {
        model: layer.required("model", args.model.clone())?,
        data: layer.required("data", args.data.clone())?,
        label_col: layer.or("label-col", args.label_col.clone(), "label".into())?,
        format: parse_flag(layer, "format", &args.format)?.unwrap_or(VoteFormat::Full),
        seed: layer.required("seed", args.seed)?,
        out: layer.required("out", args.out.clone())?,
    })
}

fn exec_votes(plan: &VotesPlan) -> CliResult<VoteMatrix> {
    let mut rec = Recorder::new("votes");
    rec.input("model", &plan.model)
        .input("data", &plan.data)
        .output("votes", &plan.out)
        .seed("votes", plan.seed);
    let model = ForestModel::load(&plan.model)?;
    rec.seed("forest", model.config.seed);
    let data = load_dataset(&plan.data, &LabelColumn::from(plan.label_col.as_str()))?;
    let votes = predict_votes(&model, &data)?;
    let mut w = create(&plan.out)?;
    votes.write(&mut w, plan.format)?;
    w.flush()?;
    let cc = votes.class_counts();
    let results = json!({
        "n_points": votes.len(),
        "n_neg": cc.n_neg,
        "n_pos": cc.n_pos,
        "m_observed": votes.m_observed(),
    });
    rec.write(&plan.out, to_value(plan)?, results)?;
    println!(
        "wrote {} votes from {} trees on {} points -> {}",
        vote_format_name(plan.format),
        votes.m_observed(),
        votes.len(),
        plan.out.display()
    );
    Ok(votes)
}

// ---- roc ----

#[derive(Debug, Clone, Serialize)]
struct BandPlan {
    m_eval: Option<u32>,
    confidence: f64,
    mode: VarianceMode,
    simultaneous: bool,
    log_floor: Option<f64>,
}

fn resolve_bands(layer: &Layer, b: &BandFlags) -> CliResult<BandPlan> {
    Ok(BandPlan {
        m_eval: check_m_eval(layer.get("m-eval", b.m_eval)?)?,
        confidence: check_confidence(layer.or("confidence", b.confidence, 0.95)?)?,
        mode: parse_flag(layer, "mode", &b.mode)?.unwrap_or(VarianceMode::Full),
        simultaneous: layer.switch("simultaneous", b.simultaneous)?,
        log_floor: check_log_floor(layer.get("log-floor", b.log_floor)?)?,
    })
}

#[derive(Debug, Clone, Serialize)]
struct RocPlan {
    votes: PathBuf,
    #[serde(flatten)]
    bands: BandPlan,
    out: PathBuf,
    estimate_out: Option<PathBuf>,
}

fn resolve_roc(args: &RocArgs, layer: &Layer) -> CliResult<RocPlan> {
    Ok(RocPlan {
        votes: layer.required("votes", args.votes.clone())?,
        bands: resolve_bands(layer, &args.bands)?,
        out: layer.required("out", args.out.clone())?,
        estimate_out: layer.get("estimate-out", args.estimate_out.clone())?,
    })
}

fn exec_roc(plan: &RocPlan) -> CliResult<()> {
    let mut rec = Recorder::new("roc");
    rec.input("votes", &plan.votes).output("bands", &plan.out);
    if let Some(p) = &plan.estimate_out {
        rec.output("estimate", p);
    }
    let votes = load_votes(&plan.votes)?;
    let est = estimate_votes(&votes, plan.bands.m_eval)?;
    let m_eval = est.m_eval;
    let mode = plan.bands.mode;
    let curve = if plan.bands.simultaneous {
        simultaneous_bands(&est, plan.bands.confidence, mode)?
    } else {
        build_bands(&est, plan.bands.confidence, mode)?
    };
    let floor = plan
        .bands
        .log_floor
        .unwrap_or(default_log_floor(est.class_counts.n_neg));
    let mut w = create(&plan.out)?;
    curve.write_csv(&mut w, floor)?;
    w.flush()?;
    if let Some(p) = &plan.estimate_out {
        let mut w = create(p)?;
        est.write_csv(&mut w)?;
        w.flush()?;
    }
    let a = auc(&est);
    let se = est.auc_var(mode).sqrt();
    let mut config = to_value(plan)?;
    config["m_eval"] = json!(m_eval);
    config["log_floor"] = json!(floor);
    let results = json!({
        "auc": a,
        "auc_se": se,
        "auc_var_classifier": est.auc_var_classifier,
        "auc_var_full": est.auc_var_full,
        "m_observed": votes.m_observed(),
        "n_thresholds": est.n_thresholds(),
        "n_neg": est.class_counts.n_neg,
        "n_pos": est.class_counts.n_pos,
        "z": curve.z,
    });
    rec.write(&plan.out, config, results)?;
    println!(
        "AUC {a:.6} (se {se:.6}, {mode} variance), {} thresholds at m_eval={m_eval} -> {}",
        est.n_thresholds(),
        plan.out.display()
    );
    Ok(())
}

// ---- compare ----

#[derive(Debug, Clone, Serialize)]
struct ComparePlan {
    a: PathBuf,
    b: PathBuf,
    m_eval: Option<u32>,
    confidence: f64,
    mode: VarianceMode,
    log_floor: Option<f64>,
    out: PathBuf,
}

fn resolve_compare(args: &CompareArgs, layer: &Layer) -> CliResult<ComparePlan> {
    Ok(ComparePlan {
        a: layer.required("a", args.a.clone())?,
        b: layer.required("b", args.b.clone())?,
        m_eval: check_m_eval(layer.get("m-eval", args.m_eval)?)?,
        confidence: check_confidence(layer.or("confidence", args.confidence, 0.95)?)?,
        mode: parse_flag(layer, "mode", &args.mode)?.unwrap_or(VarianceMode::Full),
        log_floor: check_log_floor(layer.get("log-floor", args.log_floor)?)?,
        out: layer.required("out", args.out.clone())?,
    })
}

/// Loads an estimate CSV as is, or estimates from a vote file.
pub fn load_curve(path: &Path, m_eval: Option<u32>) -> crate::error::Result<RocEstimate> {
    let text = fs::read_to_string(path)?;
    if text.starts_with("# n_neg=") {
        return RocEstimate::parse_csv(&text);
    }
    estimate_votes(&parse_votes(&text)?, m_eval)
}

fn exec_compare(plan: &ComparePlan) -> CliResult<()> {
    let mut rec = Recorder::new("compare");
    rec.input("a", &plan.a).input("b", &plan.b).output("overlay", &plan.out);
    let a = load_curve(&plan.a, plan.m_eval)?;
    let b = load_curve(&plan.b, plan.m_eval)?;
    let cmp = compare_curves(&a, &b, plan.mode)?;
    let floor = plan.log_floor.unwrap_or(default_log_floor(a.class_counts.n_neg));
    let mut w = create(&plan.out)?;
    cmp.write_csv(&mut w, plan.confidence, floor)?;
    w.flush()?;
    let mut config = to_value(plan)?;
    config["log_floor"] = json!(floor);
    let results = json!({
        "m_eval_a": a.m_eval,
        "m_eval_b": b.m_eval,
        "auc_a": cmp.auc_a,
        "auc_b": cmp.auc_b,
        "auc_delta": cmp.auc_delta,
        "auc_se_delta": cmp.auc_se_delta,
        "grid_points": cmp.points.len(),
    });
    rec.write(&plan.out, config, results)?;
    println!(
        "AUC a={:.6} b={:.6} delta={:+.6} (se {:.6}), {} grid points -> {}",
        cmp.auc_a,
        cmp.auc_b,
        cmp.auc_delta,
        cmp.auc_se_delta,
        cmp.points.len(),
        plan.out.display()
    );
    Ok(())
}

// ---- oracle ----

#[derive(Debug, Clone, Serialize)]
struct OraclePlan {
    votes: PathBuf,
    replicates: usize,
    seed: u64,
    m_eval: Option<u32>,
    classifier_mode: ClassifierMode,
    poisson: bool,
    realized_norm: bool,
    tolerance: OracleTolerance,
    out: PathBuf,
}

fn resolve_oracle(args: &OracleArgs, layer: &Layer) -> CliResult<OraclePlan> {
    let replicates = layer.or("replicates", args.replicates, 10_000)?;
    if replicates == 0 {
        return Err(usage("replicates", "must be at least 1"));
    }
    let mean_se = layer.or("mean-se", args.mean_se, 4.0)?;
    if !(mean_se > 0.0 && mean_se.is_finite()) {
        return Err(usage("mean-se", "must be positive"));
    }
    Ok(OraclePlan {
        votes: layer.required("votes", args.votes.clone())?,
        replicates,
        seed: layer.required("seed", args.seed)?,
        m_eval: check_m_eval(layer.get("m-eval", args.m_eval)?)?,
        classifier_mode: parse_flag(layer, "classifier-mode", &args.classifier_mode)?
            .unwrap_or(ClassifierMode::IndependentBinomial),
        poisson: layer.switch("poisson", args.poisson)?,
        realized_norm: layer.switch("realized-norm", args.realized_norm)?,
        tolerance: OracleTolerance {
            mean_se,
            ..OracleTolerance::default()
        },
        out: layer.required("out", args.out.clone())?,
    })
}

/// Returns whether the oracle agreed with the analytic estimate.
fn exec_oracle(plan: &OraclePlan) -> CliResult<bool> {
    let mut rec = Recorder::new("oracle");
    rec.input("votes", &plan.votes)
        .output("summary", &plan.out)
        .seed("oracle", plan.seed);
    let votes = load_votes(&plan.votes)?;
    let m_eval = plan.m_eval.unwrap_or(votes.m_observed());
    let config = OracleConfig {
        replicates: plan.replicates,
        seed: plan.seed,
        classifier_mode: plan.classifier_mode,
        poisson_resampling: plan.poisson,
        m_eval,
        realized_normalization: plan.realized_norm,
    };
    if plan.classifier_mode == ClassifierMode::SharedColumnBootstrap && votes.full_votes().is_none() {
        return Err(usage("classifier-mode", "shared mode needs a full vote file"));
    }
    let summary = run_oracle(&votes, &config)?;
    let est = estimate_votes(&votes, Some(m_eval))?;
    let report = compare_with_analytic(&summary, &est, &plan.tolerance)?;
    let mut w = create(&plan.out)?;
    summary.write_csv(&mut w)?;
    w.flush()?;

    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "{:>5} {:>12} {:>12} {:>12} {:>12} {:>5} {:>12} {:>12} {:>12} {:>12} {:>5}",
        "t", "fpr", "fpr_mc", "tpr", "tpr_mc", "mean", "var_fpr", "var_fpr_mc", "var_tpr", "var_tpr_mc", "var"
    )?;
    for v in &report.verdicts {
        let var = match v.var_pass {
            None => "-",
            Some(true) => "ok",
            Some(false) => "FAIL",
        };
        writeln!(
            stdout,
            "{:>5} {:>12.6e} {:>12.6e} {:>12.6e} {:>12.6e} {:>5} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>5}",
            v.t,
            v.analytic_fpr,
            v.empirical_fpr,
            v.analytic_tpr,
            v.empirical_tpr,
            if v.mean_pass { "ok" } else { "FAIL" },
            v.analytic_var_fpr,
            v.empirical_var_fpr,
            v.analytic_var_tpr,
            v.empirical_var_tpr,
            var
        )?;
    }
    writeln!(
        stdout,
        "means within {} SE at {:.2}% of thresholds (need {:.0}%); variances consistent at {:.2}% of {} checked (need {:.0}%): {}",
        plan.tolerance.mean_se,
        100.0 * report.mean_pass_fraction,
        100.0 * plan.tolerance.min_mean_pass,
        100.0 * report.var_pass_fraction,
        report.var_checked,
        100.0 * plan.tolerance.min_var_pass,
        if report.passed { "PASS" } else { "FAIL" }
    )?;

    let mut cfg = to_value(plan)?;
    cfg["m_eval"] = json!(m_eval);
    let auc = summary.auc_moments();
    let results = json!({
        "passed": report.passed,
        "mean_pass_fraction": report.mean_pass_fraction,
        "var_checked": report.var_checked,
        "var_pass_fraction": report.var_pass_fraction,
        "auc_mean": auc.mean,
        "auc_var": auc.variance(),
        "analytic_auc": crate::roc::auc(&est),
        "analytic_auc_var": est.auc_var(if plan.poisson { VarianceMode::Full } else { VarianceMode::Classifier }),
    });
    rec.write(&plan.out, cfg, results)?;
    Ok(report.passed)
}

// ---- synth ----

#[derive(Debug, Clone, Serialize)]
struct SynthPlan {
    generator: String,
    separation: f64,
    n: usize,
    d: usize,
    seed: u64,
    out: PathBuf,
}

fn resolve_synth(args: &SynthArgs, layer: &Layer) -> CliResult<SynthPlan> {
    let plan = SynthPlan {
        generator: layer.or("generator", args.generator.clone(), "two-gaussians".into())?,
        separation: layer.or("separation", args.separation, 2.0)?,
        n: layer.or("n", args.n, 1000)?,
        d: layer.or("d", args.d, 10)?,
        seed: layer.required("seed", args.seed)?,
        out: layer.required("out", args.out.clone())?,
    };
    SynthSpec::from_name(&plan.generator, plan.separation).map_err(|e| usage("generator", e))?;
    if plan.n < 2 {
        return Err(usage("n", "must be at least 2"));
    }
    if plan.d == 0 || (plan.generator == "xor-blobs" && plan.d < 2) {
        return Err(usage("d", format!("too few features for {}", plan.generator)));
    }
    Ok(plan)
}

fn exec_synth(plan: &SynthPlan) -> CliResult<()> {
    let mut rec = Recorder::new("synth");
    rec.output("data", &plan.out).seed("synth", plan.seed);
    let spec = SynthSpec::from_name(&plan.generator, plan.separation)?;
    let data = synth_dataset(&spec, plan.n, plan.d, plan.seed)?;
    let mut w = create(&plan.out)?;
    data.write_csv(&mut w)?;
    w.flush()?;
    let cc = data.class_counts()?;
    rec.write(
        &plan.out,
        to_value(plan)?,
        json!({ "n_neg": cc.n_neg, "n_pos": cc.n_pos }),
    )?;
    println!(
        "wrote {} rows x {} features ({spec}) -> {}",
        plan.n,
        plan.d,
        plan.out.display()
    );
    Ok(())
}

// ---- pipeline ----

fn exec_pipeline(args: &PipelineArgs, layer: &Layer) -> CliResult<()> {
    let train = layer.required("train", args.train.clone())?;
    let test = layer.required("test", args.test.clone())?;
    let label_col = layer.or("label-col", args.label_col.clone(), "label".into())?;
    let seed = layer.required("seed", args.seed)?;
    let (forest, train_rows) = resolve_forest(layer, &args.forest, seed)?;
    let format = parse_flag(layer, "format", &args.format)?.unwrap_or(VoteFormat::Full);
    let bands = resolve_bands(layer, &args.bands)?;
    let dir = layer.required("out-dir", args.out_dir.clone())?;
    layer.finish()?;

    let mut rec = Recorder::new("pipeline");
    let train_plan = TrainPlan {
        data: train.clone(),
        label_col: label_col.clone(),
        forest,
        train_rows,
        out: dir.join("model.json"),
    };
    let votes_plan = VotesPlan {
        model: train_plan.out.clone(),
        data: test.clone(),
        label_col,
        format,
        seed,
        out: dir.join("votes.csv"),
    };
    let roc_plan = RocPlan {
        votes: votes_plan.out.clone(),
        bands,
        out: dir.join("bands.csv"),
        estimate_out: Some(dir.join("estimate.csv")),
    };
    fs::create_dir_all(&dir)?;
    exec_train(&train_plan)?;
    exec_votes(&votes_plan)?;
    exec_roc(&roc_plan)?;
    rec.input("train", &train)
        .input("test", &test)
        .output("model", &train_plan.out)
        .output("votes", &votes_plan.out)
        .output("bands", &roc_plan.out)
        .output("estimate", roc_plan.estimate_out.as_deref().unwrap_or(Path::new("")))
        .seed("forest", seed);
    let config =
        json!({ "train": to_value(&train_plan)?, "votes": to_value(&votes_plan)?, "roc": to_value(&roc_plan)? });
    rec.write(&dir.join("pipeline"), config, json!({}))?;
    Ok(())
}

fn load_config(path: Option<&Path>) -> CliResult<Option<toml::Table>> {
    let Some(path) = path else { return Ok(None) };
    let text = fs::read_to_string(path).map_err(|e| usage("config", format!("{}: {e}", path.display())))?;
    let table = text
        .parse::<toml::Table>()
        .map_err(|e| usage("config", format!("{}: {e}", path.display())))?;
    Ok(Some(table))
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let root = load_config(cli.config.as_deref())?;
    let root = root.as_ref();
    match &cli.command {
        Command::Train(a) => {
            let layer = Layer::new(root, "train")?;
            let plan = resolve_train(a, &layer)?;
            layer.finish()?;
            exec_train(&plan).map(|_| ())
        }
        Command::Votes(a) => {
            let layer = Layer::new(root, "votes")?;
            let plan = resolve_votes(a, &layer)?;
            layer.finish()?;
            exec_votes(&plan).map(|_| ())
        }
        Command::Roc(a) => {
            let layer = Layer::new(root, "roc")?;
            let plan = resolve_roc(a, &layer)?;
            layer.finish()?;
            exec_roc(&plan)
        }
        Command::Compare(a) => {
            let layer = Layer::new(root, "compare")?;
            let plan = resolve_compare(a, &layer)?;
            layer.finish()?;
            exec_compare(&plan)
        }
        Command::Oracle(a) => {
            let layer = Layer::new(root, "oracle")?;
            let plan = resolve_oracle(a, &layer)?;
            layer.finish()?;
            if exec_oracle(&plan)? {
                Ok(())
            } else {
                Err(CliError::Failed(
                    "oracle and analytic estimate disagree beyond tolerance".into(),
                ))
            }
        }
        Command::Synth(a) => {
            let layer = Layer::new(root, "synth")?;
            let plan = resolve_synth(a, &layer)?;
            layer.finish()?;
            exec_synth(&plan)
        }
        Command::Pipeline(a) => {
            let layer = Layer::new(root, "pipeline")?;
            exec_pipeline(a, &layer)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

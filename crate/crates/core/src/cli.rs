//! Command-line front end: `fit`, `sample`, `evaluate` and `sweep`.
//!
//! Settings come from flags, then an optional TOML config file, then
//! built-in defaults, in that order of precedence. Every command that writes
//! a directory also writes `manifest.toml` holding the fully resolved
//! settings; it is itself a valid config file.
//!
//! Exit codes: 0 success, 2 bad usage, 3 input or I/O error, 4 numerical
//! failure (rank deficiency, eigen/power method failure).

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dataset::{binarize_code_list, load_code_list, load_csv, split_holdout, BinaryDataset, DEFAULT_TOP_K};
use crate::em::{EmOptions, EmReport, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL};
use crate::error::{Error, Result};
use crate::evaluate::{
    classifier_two_sample_test_with, Bandwidth, EvalReport, FeaturesPerSplit, ForestSettings,
    DEFAULT_TEST_FRACTION,
};
use crate::model::{fit_baseline, NbmFile};
use crate::moments::DEFAULT_COMPLETION_ITERS;
use crate::pipeline::{fit_model, FitOptions};
use crate::spectral::{DEFAULT_POWER_ITERS, DEFAULT_RESTARTS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;
pub const DEFAULT_SEED: u64 = 0;

pub const SWEEP_HEADER: &str = "k,accuracy,recall,precision,specificity,mmd,holdout_loglik,seed";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// Header of feature names, then 0/1 rows.
    #[default]
    Csv,
    /// Two columns `record_id,code`; the most frequent codes become features.
    Codelist,
}

/// Maximum tree depth, `none` for unlimited.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Depth(pub Option<usize>);

impl Display for Depth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(d) => write!(f, "{d}"),
            None => f.write_str("none"),
        }
    }
}

impl FromStr for Depth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "none" {
            return Ok(Depth(None));
        }
        s.parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .map(|d| Depth(Some(d)))
            .ok_or_else(|| format!("expected `none` or a positive depth, got {s:?}"))
    }
}

// Option<T> <-> TOML string via Display / FromStr.
mod as_string {
    use super::*;
    use serde::{de::Error as _, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &Option<T>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.collect_str(v),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, T, D>(d: D) -> std::result::Result<Option<T>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse().map_err(D::Error::custom))
            .transpose()
    }
}

fn seed_parser() -> impl clap::builder::TypedValueParser<Value = u64> {
    // TOML integers are signed
    clap::value_parser!(u64).range(0..=i64::MAX as u64)
}

#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataArgs {
    /// Input file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    /// Number of most frequent codes kept with `--format codelist`.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Fraction of rows held out from fitting.
    #[arg(long)]
    pub holdout_fraction: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitArgs {
    /// Number of mixture components.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub em_max_iters: Option<usize>,
    #[arg(long)]
    pub em_rel_tol: Option<f64>,
    /// Random restarts per component of the tensor power method.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub power_iters: Option<usize>,
    /// Alternating projection steps for the second-moment diagonal.
    #[arg(long)]
    pub completion_iters: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestArgs {
    #[arg(long)]
    pub trees: Option<usize>,
    /// Positive depth or `none`.
    #[arg(long)]
    #[serde(default, with = "as_string")]
    pub max_depth: Option<Depth>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// `sqrt`, `all` or a count.
    #[arg(long)]
    #[serde(default, with = "as_string")]
    pub features_per_split: Option<FeaturesPerSplit>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// MMD kernel width, `median` or a positive number.
    #[arg(long)]
    #[serde(default, with = "as_string")]
    pub bandwidth: Option<Bandwidth>,
}

/// Contents of a config file or manifest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Synthetic rows to draw; defaults to the comparison set's size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<usize>>,
    #[serde(default)]
    pub data: DataArgs,
    #[serde(default)]
    pub fit: FitArgs,
    #[serde(default)]
    pub forest: ForestArgs,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            line: 0,
            message: format!("{}: {}", path.display(), e.message()),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are representable in TOML")
    }
}

macro_rules! overlay {
    ($flags:expr, $file:expr, [$($f:ident),*]) => {
        $( if $flags.$f.is_none() { $flags.$f = $file.$f.clone(); } )*
    };
}

impl DataArgs {
    fn resolve(mut self, file: &DataArgs) -> Self {
        overlay!(self, file, [input, format, top_k, holdout_fraction]);
        self.format.get_or_insert(InputFormat::Csv);
        self.top_k.get_or_insert(DEFAULT_TOP_K);
        self.holdout_fraction.get_or_insert(DEFAULT_HOLDOUT_FRACTION);
        self
    }

    fn input(&self) -> Result<&Path> {
        match &self.input {
            Some(p) if !p.as_os_str().is_empty() => Ok(p),
            _ => Err(Error::invalid("an input file is required (--input)")),
        }
    }

    fn load(&self) -> Result<BinaryDataset> {
        let path = self.input()?;
        match self.format.unwrap_or_default() {
            InputFormat::Csv => load_csv(path),
            InputFormat::Codelist => {
                binarize_code_list(&load_code_list(path)?, self.top_k.unwrap_or(DEFAULT_TOP_K))
            }
        }
    }
}

impl FitArgs {
    fn resolve(mut self, file: &FitArgs) -> Self {
        overlay!(self, file, [k, em_max_iters, em_rel_tol, restarts, power_iters, completion_iters]);
        self.em_max_iters.get_or_insert(DEFAULT_MAX_ITERS);
        self.em_rel_tol.get_or_insert(DEFAULT_REL_TOL);
        self.restarts.get_or_insert(DEFAULT_RESTARTS);
        self.power_iters.get_or_insert(DEFAULT_POWER_ITERS);
        self.completion_iters.get_or_insert(DEFAULT_COMPLETION_ITERS);
        self
    }

    fn options(&self, seed: u64) -> Result<FitOptions> {
        let mut o = FitOptions::seeded(seed);
        o.em = EmOptions {
            max_iters: self.em_max_iters.unwrap_or(DEFAULT_MAX_ITERS),
            rel_tol: self.em_rel_tol.unwrap_or(DEFAULT_REL_TOL),
            ..EmOptions::default()
        };
        if !(o.em.rel_tol >= 0.0) {
            return Err(Error::invalid("--em-rel-tol must be non-negative"));
        }
        o.spectral.power.restarts = self.restarts.unwrap_or(DEFAULT_RESTARTS);
        o.spectral.power.iters = self.power_iters.unwrap_or(DEFAULT_POWER_ITERS);
        o.spectral.completion.iters = self.completion_iters.unwrap_or(DEFAULT_COMPLETION_ITERS);
        if o.spectral.power.restarts == 0 {
            return Err(Error::invalid("--restarts must be at least 1"));
        }
        Ok(o)
    }
}

impl ForestArgs {
    fn resolve(mut self, file: &ForestArgs) -> Self {
        overlay!(self, file, [trees, max_depth, min_leaf, features_per_split, test_fraction, bandwidth]);
        let d = ForestSettings::default();
        self.trees.get_or_insert(d.n_trees);
        self.max_depth.get_or_insert(Depth(d.max_depth));
        self.min_leaf.get_or_insert(d.min_leaf);
        self.features_per_split.get_or_insert(d.features_per_split);
        self.test_fraction.get_or_insert(DEFAULT_TEST_FRACTION);
        self.bandwidth.get_or_insert(Bandwidth::Median);
        self
    }

    fn settings(&self, seed: u64) -> Result<ForestSettings> {
        let d = ForestSettings::default();
        let s = ForestSettings {
            n_trees: self.trees.unwrap_or(d.n_trees),
            max_depth: self.max_depth.map_or(d.max_depth, |x| x.0),
            min_leaf: self.min_leaf.unwrap_or(d.min_leaf),
            features_per_split: self.features_per_split.unwrap_or(d.features_per_split),
            seed,
        };
        if s.n_trees == 0 {
            return Err(Error::invalid("--trees must be at least 1"));
        }
        if s.min_leaf == 0 {
            return Err(Error::invalid("--min-leaf must be at least 1"));
        }
        Ok(s)
    }

    fn evaluate(&self, real: &BinaryDataset, synth: &BinaryDataset, seed: u64) -> Result<EvalReport> {
        classifier_two_sample_test_with(
            real,
            synth,
            &self.settings(seed)?,
            self.test_fraction.unwrap_or(DEFAULT_TEST_FRACTION),
            seed,
            self.bandwidth.unwrap_or_default(),
        )
    }
}

#[derive(Debug, Parser)]
#[command(name = "tensorgen", version, about = "Naive Bayes mixture fitting, sampling and evaluation for binary data")]
pub struct Cli {
    /// Worker threads; defaults to the number of CPUs. Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a mixture (and a first-moment baseline) on a training split.
    Fit(FitCmd),
    /// Draw synthetic rows from a fitted model file.
    Sample(SampleCmd),
    /// Compare real and synthetic CSVs with the two-sample test and MMD.
    Evaluate(EvaluateCmd),
    /// Fit several k, evaluate each against the holdout, report a table.
    Sweep(SweepCmd),
}

#[derive(Debug, Args)]
pub struct FitCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, value_parser = seed_parser())]
    pub seed: Option<u64>,
    /// Optional TOML config; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["model", "baseline"])))]
pub struct SampleCmd {
    /// Mixture model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// First-moment baseline file.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Rows to draw.
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_parser = seed_parser(), default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateCmd {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub synth: PathBuf,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[arg(long, value_parser = seed_parser())]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    /// Comma-separated component counts. A lone `--k` sweeps one value.
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    /// Synthetic rows per model; defaults to the holdout size.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_parser = seed_parser())]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn config_file(path: &Option<PathBuf>) -> Result<RunConfig> {
    path.as_deref().map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn toml_float(x: f64) -> toml::Value {
    toml::Value::Float(x)
}

fn em_report_table(report: &EmReport) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("iterations_run".into(), (report.iterations_run as i64).into());
    t.insert("converged".into(), report.converged.into());
    t.insert(
        "empty_components".into(),
        toml::Value::Array(report.empty_components.iter().map(|&c| (c as i64).into()).collect()),
    );
    t.insert(
        "objective_trace".into(),
        toml::Value::Array(report.loglik_trace.iter().map(|&x| toml_float(x)).collect()),
    );
    t
}

/// Summary written as `fit_report.toml`.
#[derive(Clone, Debug, PartialEq)]
pub struct FitSummary {
    pub k: usize,
    pub train_rows: usize,
    pub holdout_rows: usize,
    pub holdout_loglik: f64,
    pub baseline_holdout_loglik: f64,
    pub em: EmReport,
}

impl FitSummary {
    pub fn to_toml(&self) -> String {
        let mut t = toml::Table::new();
        t.insert("k".into(), (self.k as i64).into());
        t.insert("train_rows".into(), (self.train_rows as i64).into());
        t.insert("holdout_rows".into(), (self.holdout_rows as i64).into());
        t.insert("holdout_loglik".into(), toml_float(self.holdout_loglik));
        t.insert(
            "holdout_loglik_per_row".into(),
            toml_float(self.holdout_loglik / self.holdout_rows as f64),
        );
        t.insert("baseline_holdout_loglik".into(), toml_float(self.baseline_holdout_loglik));
        t.insert("em".into(), toml::Value::Table(em_report_table(&self.em)));
        toml::to_string(&t).expect("report values are representable in TOML")
    }
}

pub fn cmd_fit(cmd: FitCmd) -> Result<FitSummary> {
    let file = config_file(&cmd.config)?;
    let data_args = cmd.data.resolve(&file.data);
    let fit_args = cmd.fit.resolve(&file.fit);
    let seed = cmd.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let k = fit_args.k.ok_or_else(|| Error::invalid("the number of components is required (--k)"))?;

    let data = data_args.load().map_err(|e| e.in_stage("dataset"))?;
    let (train, holdout) = split_holdout(&data, data_args.holdout_fraction.unwrap_or_default(), seed)
        .map_err(|e| e.in_stage("dataset"))?;
    let (model, em) = fit_model(&train, k, &fit_args.options(seed)?)?;
    let baseline = fit_baseline(&train);
    let summary = FitSummary {
        k,
        train_rows: train.n_rows(),
        holdout_rows: holdout.n_rows(),
        holdout_loglik: model.log_likelihood(&holdout)?,
        baseline_holdout_loglik: baseline.log_likelihood(&holdout)?,
        em,
    };

    let out = &cmd.out;
    create_dir(out)?;
    NbmFile::Mixture(model).save(out.join("model.nbm"))?;
    NbmFile::Baseline(baseline).save(out.join("baseline.nbm"))?;
    holdout.save_csv(out.join("holdout.csv"))?;
    write_file(&out.join("fit_report.toml"), &summary.to_toml())?;
    let manifest = RunConfig {
        seed: Some(seed),
        m: None,
        ks: None,
        data: data_args,
        fit: fit_args,
        forest: ForestArgs::default(),
    };
    write_file(&out.join("manifest.toml"), &manifest.to_toml())?;
    Ok(summary)
}

pub fn cmd_sample(cmd: SampleCmd) -> Result<BinaryDataset> {
    let (path, expect_baseline) = match (&cmd.model, &cmd.baseline) {
        (Some(p), None) => (p, false),
        (None, Some(p)) => (p, true),
        _ => return Err(Error::invalid("give exactly one of --model and --baseline")),
    };
    let synth = match (NbmFile::load(path)?, expect_baseline) {
        (NbmFile::Mixture(m), false) => m.sample(cmd.m, cmd.seed)?,
        (NbmFile::Baseline(b), true) => b.sample(cmd.m, cmd.seed)?,
        (NbmFile::Mixture(_), true) => {
            return Err(Error::invalid(format!("{} holds a mixture model; use --model", path.display())))
        }
        (NbmFile::Baseline(_), false) => {
            return Err(Error::invalid(format!("{} holds a baseline; use --baseline", path.display())))
        }
    };
    synth.save_csv(&cmd.out)?;
    Ok(synth)
}

pub fn cmd_evaluate(cmd: EvaluateCmd) -> Result<EvalReport> {
    let file = config_file(&cmd.config)?;
    let forest = cmd.forest.resolve(&file.forest);
    let seed = cmd.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let real = load_csv(&cmd.real)?;
    let synth = load_csv(&cmd.synth)?;
    let report = forest.evaluate(&real, &synth, seed)?;
    match &cmd.out {
        Some(p) => write_file(p, &report.to_csv())?,
        None => print!("{}", report.to_csv()),
    }
    Ok(report)
}

/// One line of the sweep table; `k = None` is the baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub k: Option<usize>,
    pub report: EvalReport,
    /// Mean per holdout row.
    pub holdout_loglik: f64,
}

impl SweepRow {
    pub fn csv_row(&self) -> String {
        let k = self.k.map_or_else(|| "baseline".to_owned(), |k| k.to_string());
        let r = &self.report;
        format!(
            "{k},{},{},{},{},{},{},{}",
            r.accuracy, r.recall, r.precision, r.specificity, r.mmd, self.holdout_loglik, r.seed
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub fn cmd_sweep(cmd: SweepCmd) -> Result<Vec<SweepRow>> {
    if cmd.ks.is_some() && cmd.fit.k.is_some() {
        return Err(Error::invalid("give either --ks or --k to sweep, not both"));
    }
    let file = config_file(&cmd.config)?;
    let data_args = cmd.data.resolve(&file.data);
    let fit_args = cmd.fit.resolve(&file.fit);
    let forest = cmd.forest.resolve(&file.forest);
    let seed = cmd.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    // a lone --k (or `[fit] k`) is a one-element sweep
    let mut ks = cmd
        .ks
        .or(file.ks)
        .or(fit_args.k.map(|k| vec![k]))
        .ok_or_else(|| Error::invalid("a list of component counts is required (--ks)"))?;
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] == 0 {
        return Err(Error::invalid("--ks must list positive component counts"));
    }
    let options = fit_args.options(seed)?;
    forest.settings(seed)?;

    let data = data_args.load().map_err(|e| e.in_stage("dataset"))?;
    let (train, holdout) = split_holdout(&data, data_args.holdout_fraction.unwrap_or_default(), seed)
        .map_err(|e| e.in_stage("dataset"))?;
    let m = cmd.m.or(file.m).unwrap_or(holdout.n_rows());
    let per_row = |ll: f64| ll / holdout.n_rows() as f64;
    let out = &cmd.out;
    create_dir(out)?;

    let baseline = fit_baseline(&train);
    let synth = baseline.sample(m, seed)?;
    let mut rows = vec![SweepRow {
        k: None,
        report: forest.evaluate(&holdout, &synth, seed)?,
        holdout_loglik: per_row(baseline.log_likelihood(&holdout)?),
    }];
    NbmFile::Baseline(baseline).save(out.join("baseline.nbm"))?;

    for &k in &ks {
        if k > train.n_cols() {
            eprintln!("warning: skipping k = {k}: more components than the {} features", train.n_cols());
            continue;
        }
        let model = match fit_model(&train, k, &options) {
            Ok((model, _)) => model,
            Err(e) if matches!(e.root(), Error::RankDeficient { .. }) => {
                eprintln!("warning: skipping k = {k}: {e}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let synth = model.sample(m, seed)?;
        rows.push(SweepRow {
            k: Some(k),
            report: forest.evaluate(&holdout, &synth, seed)?,
            holdout_loglik: per_row(model.log_likelihood(&holdout)?),
        });
        NbmFile::Mixture(model).save(out.join(format!("model_k{k}.nbm")))?;
    }

    write_file(&out.join("report.csv"), &sweep_csv(&rows))?;
    let manifest = RunConfig {
        seed: Some(seed),
        m: Some(m),
        ks: Some(ks),
        data: data_args,
        fit: fit_args,
        forest,
    };
    write_file(&out.join("manifest.toml"), &manifest.to_toml())?;
    Ok(rows)
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Fit(c) => cmd_fit(c).map(drop),
        Command::Sample(c) => cmd_sample(c).map(drop),
        Command::Evaluate(c) => cmd_evaluate(c).map(drop),
        Command::Sweep(c) => {
            let rows = cmd_sweep(c)?;
            print!("{}", sweep_csv(&rows));
            Ok(())
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Errors are reported on standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_INPUT;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

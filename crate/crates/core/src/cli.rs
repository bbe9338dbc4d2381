//! The `catpca` command-line tool.
//!
//! ```text
//! catpca fit|extract|validate|profile --config <file> [--out <dir>] [--format csv|text] [--seed <int>]
//! ```
//!
//! Exit codes: 0 success (including an Invalid validation verdict), 1 data
//! error, 2 configuration error. Log verbosity comes from `CATPCA_LOG`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::als::{fit, CatpcaConfig, CatpcaModel};
use crate::data::{filter_obese, load_dataset, split_dataset, summarize_classes, write_split, Dataset, Schema};
use crate::error::{Error, Result};
use crate::extraction::{
    eigenvalue_criterion, extract, scree_knee, variance_explained_criterion, DimensionRule, ExtractionResult,
    KneeRule, LoadingMatrix, Spectrum, Strategy, COMMUNALITY_THRESHOLD, EIGENVALUE_THRESHOLD, LOADING_THRESHOLD,
    LOADING_TOLERANCE, NEAR_THRESHOLD,
};
use crate::io::{self, Table};
use crate::profile::{assign_variables, membership_report, profile_components, ProfileReport};
use crate::validation::{validate_split, Tolerances};

/// Environment variable holding the log filter (`error`, `warn`, `info`, `debug`).
pub const LOG_ENV: &str = "CATPCA_LOG";

#[derive(Debug, Parser)]
#[command(name = "catpca", version, about = "Categorical principal component analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model and write it with its iteration history and summary.
    Fit(CommonArgs),
    /// Apply the retention criteria, loading filter and communalities.
    Extract(CommonArgs),
    /// Split the data, fit both halves and compare them.
    Validate(CommonArgs),
    /// Assign variables to components and describe each component.
    Profile(CommonArgs),
}

#[derive(Debug, clap::Args)]
struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `paths.output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats, repeatable or comma separated.
    #[arg(long, value_delimiter = ',')]
    format: Vec<Format>,
    /// Seed for the split and the fit; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Text,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Model file; defaults to `<output>/model.json`.
    pub model: Option<PathBuf>,
    /// Model-summary CSV to extract from instead of a model.
    pub summary: Option<PathBuf>,
    /// Loading CSV to go with `summary`.
    pub loadings: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitOn {
    #[default]
    All,
    Train,
    Test,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pipeline {
    /// Keep only rows with BMI of at least 30 in this column.
    pub bmi_column: Option<String>,
    pub split_ratio: f64,
    pub seed: u64,
    /// Which sample `fit` analyses.
    pub fit_on: FitOn,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline {
            bmi_column: None,
            split_ratio: 0.7,
            seed: 0,
            fit_on: FitOn::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    #[default]
    Eigenvalue,
    VarianceExplained,
    ScreeKnee,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Rule that decides the retained dimensions.
    pub criterion: RuleKind,
    pub threshold: f64,
    pub near_threshold: f64,
    pub target_fraction: f64,
    pub knee_rule: KneeRule,
    pub loading_threshold: f64,
    pub loading_tolerance: f64,
    pub communality_threshold: f64,
    /// Variable count behind a summary CSV.
    pub n_variables: Option<usize>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            criterion: RuleKind::Eigenvalue,
            threshold: EIGENVALUE_THRESHOLD,
            near_threshold: NEAR_THRESHOLD,
            target_fraction: 0.85,
            knee_rule: KneeRule::default(),
            loading_threshold: LOADING_THRESHOLD,
            loading_tolerance: LOADING_TOLERANCE,
            communality_threshold: COMMUNALITY_THRESHOLD,
            n_variables: None,
        }
    }
}

impl ExtractionConfig {
    pub fn rule(&self) -> DimensionRule {
        match self.criterion {
            RuleKind::Eigenvalue => DimensionRule::Eigenvalue {
                threshold: self.threshold,
                near_threshold: self.near_threshold,
            },
            RuleKind::VarianceExplained => DimensionRule::VarianceExplained {
                target_fraction: self.target_fraction,
            },
            RuleKind::ScreeKnee => DimensionRule::ScreeKnee { rule: self.knee_rule },
        }
    }

    pub fn strategy(&self) -> Strategy {
        Strategy {
            rule: self.rule(),
            loading_threshold: self.loading_threshold,
            loading_tolerance: self.loading_tolerance,
            communality_threshold: self.communality_threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub formats: Vec<Format>,
    pub scree_svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            formats: vec![Format::Csv, Format::Text],
            scree_svg: true,
        }
    }
}

/// Declarative description of one pipeline run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub pipeline: Pipeline,
    pub catpca: CatpcaConfig,
    pub extraction: ExtractionConfig,
    pub validation: Tolerances,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a configuration file; relative paths in it are taken relative
    /// to the file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Path {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        };
        let paths = &mut cfg.paths;
        for p in [
            &mut paths.data,
            &mut paths.schema,
            &mut paths.output,
            &mut paths.model,
            &mut paths.summary,
            &mut paths.loadings,
        ] {
            resolve(p);
        }
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let p = &self.pipeline;
        if !(p.split_ratio > 0.0 && p.split_ratio < 1.0) {
            return Err(Error::Config(format!("pipeline.split_ratio must lie in (0, 1), got {}", p.split_ratio)));
        }
        let e = &self.extraction;
        if !(e.target_fraction > 0.0) {
            return Err(Error::Config("extraction.target_fraction must be positive".into()));
        }
        if !(e.loading_tolerance >= 0.0) || !(e.loading_threshold >= 0.0) {
            return Err(Error::Config("loading threshold and tolerance must be non-negative".into()));
        }
        if !(self.validation.vaf_percent >= 0.0) {
            return Err(Error::Config("validation.vaf_percent must be non-negative".into()));
        }
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats must name at least one format".into()));
        }
        Ok(())
    }
}

/// One command's output directory, formats and the files written so far.
struct Run {
    cfg: RunConfig,
    config_path: PathBuf,
    out: PathBuf,
    formats: Vec<Format>,
    command: &'static str,
    written: Vec<String>,
    text: String,
}

impl Run {
    fn csv(&self) -> bool {
        self.formats.contains(&Format::Csv)
    }

    fn file(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        io::write_file(&self.out.join(name), bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `<name>.csv` when CSV output is on and appends the table to
    /// the text report.
    fn table(&mut self, name: &str, title: &str, table: &Table) -> Result<()> {
        if self.csv() {
            let csv = table.to_csv(self.command)?;
            self.file(&format!("{name}.csv"), csv.as_bytes())?;
        }
        self.text.push_str(&format!("\n{title}\n{}", table.to_text()));
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        if self.formats.contains(&Format::Text) {
            let text = std::mem::take(&mut self.text);
            self.file(&format!("{}_report.txt", self.command), text.as_bytes())?;
        }
        write_manifest(&self)
    }

    fn model_path(&self) -> PathBuf {
        self.cfg.paths.model.clone().unwrap_or_else(|| self.out.join("model.json"))
    }

    fn require(&self, path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        path.clone()
            .ok_or_else(|| Error::Config(format!("`paths.{key}` is required for `{}`", self.command)))
    }

    /// Schema and data, with the obese filter applied when configured.
    fn load_sample(&self) -> Result<Dataset> {
        let schema = Schema::from_path(self.require(&self.cfg.paths.schema, "schema")?)?;
        let data_path = self.require(&self.cfg.paths.data, "data")?;
        let data = load_dataset(io::open(&data_path)?, &schema)?;
        match &self.cfg.pipeline.bmi_column {
            Some(col) => {
                let obese = filter_obese(&data, col)?;
                if obese.n_rows() < 2 {
                    return Err(Error::TooFewRows {
                        n: obese.n_rows(),
                        min: 2,
                    });
                }
                log::info!("{} of {} rows have BMI >= 30", obese.n_rows(), data.n_rows());
                Ok(obese)
            }
            None => Ok(data),
        }
    }

    fn fit_sample(&self) -> Result<Dataset> {
        let sample = self.load_sample()?;
        let p = &self.cfg.pipeline;
        Ok(match p.fit_on {
            FitOn::All => sample,
            FitOn::Train => split_dataset(&sample, p.split_ratio, p.seed)?.train,
            FitOn::Test => split_dataset(&sample, p.split_ratio, p.seed)?.test,
        })
    }
}

fn write_manifest(run: &Run) -> Result<()> {
    let path = run.out.join("manifest.toml");
    let mut doc: toml::Table = match std::fs::read_to_string(&path) {
        Ok(text) => text.parse().unwrap_or_default(),
        Err(_) => toml::Table::new(),
    };
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut section = toml::Table::new();
    section.insert("tool_version".into(), env!("CARGO_PKG_VERSION").into());
    section.insert("config".into(), run.config_path.display().to_string().into());
    section.insert("created_unix".into(), toml::Value::Integer(created as i64));
    section.insert(
        "outputs".into(),
        toml::Value::Array(run.written.iter().map(|s| s.clone().into()).collect()),
    );
    doc.insert(run.command.into(), toml::Value::Table(section));
    io::write_file(&path, doc.to_string().as_bytes())
}

fn cmd_fit(run: &mut Run) -> Result<()> {
    let sample = run.fit_sample()?;
    if let Some(col) = run.cfg.pipeline.bmi_column.clone() {
        let classes = summarize_classes(&sample, &col)?;
        run.table("classes", "Obesity classes", &io::class_table(&classes))?;
    }
    let model = fit(&sample, &run.cfg.catpca)?;
    for w in &model.warnings {
        log::warn!("{w}");
    }
    let model_path = run.model_path();
    io::save_model(&model, &model_path)?;
    let listed = model_path.strip_prefix(&run.out).unwrap_or(&model_path);
    run.written.push(listed.display().to_string());
    run.text.push_str(&io::fit_text(&model));
    run.table("history", "Iteration history", &io::history_table(&model.history))?;
    run.table("summary", "Model summary", &io::summary_table(&model.summary()))?;
    let dims: Vec<usize> = (1..=model.dimensions()).collect();
    run.table("loadings", "Component loadings", &io::loadings_table(&LoadingMatrix::from_model(&model, &dims)?))?;
    run.table("quantifications", "Category quantifications", &io::quantification_table(&model))?;
    if run.csv() {
        let scores = io::scores_table(&model).to_csv(run.command)?;
        run.file("scores.csv", scores.as_bytes())?;
    }
    Ok(())
}

fn load_model_for(run: &Run) -> Result<CatpcaModel> {
    let path = run.model_path();
    if !path.exists() {
        return Err(Error::Config(format!(
            "model file {} not found; run `catpca fit` first or set `paths.model`",
            path.display()
        )));
    }
    io::load_model(&path)
}

fn cmd_extract(run: &mut Run) -> Result<()> {
    let cfg = run.cfg.extraction.clone();
    let (spectrum, loadings) = match run.cfg.paths.summary.clone() {
        Some(summary) => {
            let m = cfg.n_variables.ok_or_else(|| {
                Error::Config("`extraction.n_variables` is required with `paths.summary`".into())
            })?;
            let spectrum = Spectrum::from_summary_csv(io::open(&summary)?, m)?;
            let loadings = match &run.cfg.paths.loadings {
                Some(p) => Some(LoadingMatrix::from_csv(io::open(p)?)?),
                None => None,
            };
            (spectrum, loadings)
        }
        None => {
            let model = load_model_for(run)?;
            let dims: Vec<usize> = (1..=model.dimensions()).collect();
            (Spectrum::from_model(&model)?, Some(LoadingMatrix::from_model(&model, &dims)?))
        }
    };

    let mut results = vec![eigenvalue_criterion(&spectrum, cfg.threshold, cfg.near_threshold)?];
    match variance_explained_criterion(&spectrum, cfg.target_fraction) {
        Ok(r) => results.push(r),
        Err(e) => log::warn!("variance-explained criterion skipped: {e}"),
    }
    let knee = match scree_knee(&spectrum, cfg.knee_rule) {
        Ok(r) => {
            let k = r.count();
            results.push(r);
            Some(k)
        }
        Err(e) => {
            log::warn!("scree knee skipped: {e}");
            None
        }
    };
    for w in results.iter().flat_map(|r| &r.warnings) {
        log::warn!("{w}");
    }
    run.table("criteria", "Retention criteria", &io::criteria_table(&spectrum, &results))?;
    if run.csv() {
        let scree = io::scree_table(&spectrum).to_csv(run.command)?;
        run.file("scree.csv", scree.as_bytes())?;
    }
    if run.cfg.output.scree_svg {
        run.file("scree.svg", io::scree_svg(&spectrum, knee).as_bytes())?;
    }

    match loadings {
        Some(loadings) => {
            let result = extract(&spectrum, &loadings, &cfg.strategy())?;
            for w in &result.warnings {
                log::warn!("{w}");
            }
            let json = serde_json::to_vec_pretty(&result)?;
            run.file("extraction.json", &json)?;
            run.table("retained_loadings", "Retained loadings", &io::loadings_table(&result.loadings))?;
            run.table("communalities", "Communalities", &io::communality_table(&result.communalities))?;
            run.text.push('\n');
            run.text.push_str(&io::extraction_text(&result));
        }
        None => log::warn!("no loadings available; communalities and profiles need `paths.loadings`"),
    }
    Ok(())
}

fn cmd_validate(run: &mut Run) -> Result<()> {
    let sample = run.load_sample()?;
    let p = run.cfg.pipeline.clone();
    let pair = split_dataset(&sample, p.split_ratio, p.seed)?;
    write_split(&pair, &run.out.join("split"))?;
    run.written
        .extend(["split/train.csv", "split/test.csv", "split/split_manifest.toml"].map(String::from));
    let train = fit(&pair.train, &run.cfg.catpca)?;
    let test = fit(&pair.test, &run.cfg.catpca)?;
    let report = validate_split(&train, &test, &run.cfg.extraction.rule(), run.cfg.validation)?;
    log::info!("validation verdict: {}", report.verdict);
    run.text.push_str(&io::validation_text(&report));
    if run.csv() {
        let csv = io::validation_table(&report).to_csv(run.command)?;
        run.file("validation.csv", csv.as_bytes())?;
    }
    run.table("train_summary", "Train model summary", &io::summary_table(&train.summary()))?;
    run.table("test_summary", "Test model summary", &io::summary_table(&test.summary()))?;
    let json = serde_json::to_vec_pretty(&report)?;
    run.file("validation.json", &json)
}

fn cmd_profile(run: &mut Run) -> Result<()> {
    let path = run.out.join("extraction.json");
    if !path.exists() {
        return Err(Error::Config(format!(
            "{} not found; run `catpca extract` with loadings available first",
            path.display()
        )));
    }
    let extraction: ExtractionResult = serde_json::from_reader(io::open(&path)?)?;
    let filtered = extraction.loadings.select_variables(&extraction.filter.retained_variables);
    let components = &extraction.filter.retained_components;
    let assignments = assign_variables(&filtered, components)?;

    let full = run.cfg.paths.summary.is_none() && run.model_path().exists() && run.cfg.paths.data.is_some();
    let report: ProfileReport = if full {
        let model = load_model_for(run)?;
        let sample = run.fit_sample()?;
        profile_components(&model, &assignments, components, &sample)?
    } else {
        log::info!("no fitted model and data configured; profiling memberships only");
        membership_report(&assignments, components)
    };
    for w in &report.warnings {
        log::warn!("{w}");
    }
    run.table("assignments", "Variable assignments", &io::assignment_table(&assignments))?;
    run.table("membership", "Component membership", &io::membership_table(&report))?;
    if full {
        run.table("skew", "Quantification skew", &io::skew_table(&report))?;
    }
    run.text.push('\n');
    run.text.push_str(&io::profile_text(&report));
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    let (name, args): (&'static str, CommonArgs) = match command {
        Command::Fit(a) => ("fit", a),
        Command::Extract(a) => ("extract", a),
        Command::Validate(a) => ("validate", a),
        Command::Profile(a) => ("profile", a),
    };
    let mut cfg = RunConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.pipeline.seed = seed;
        cfg.catpca.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.paths.output.clone())
        .unwrap_or_else(|| PathBuf::from("catpca-out"));
    let formats = if args.format.is_empty() {
        cfg.output.formats.clone()
    } else {
        args.format.clone()
    };
    let mut run = Run {
        cfg,
        config_path: args.config.clone(),
        out,
        formats,
        command: name,
        written: Vec::new(),
        text: String::new(),
    };
    match name {
        "fit" => cmd_fit(&mut run)?,
        "extract" => cmd_extract(&mut run)?,
        "validate" => cmd_validate(&mut run)?,
        _ => cmd_profile(&mut run)?,
    }
    run.finish()
}

/// Exit code for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(error: &Error) -> i32 {
    if error.is_config() {
        2
    } else {
        1
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Names of the artifacts each command writes in CSV mode, for documentation
/// and tests.
pub fn expected_outputs() -> BTreeMap<&'static str, Vec<&'static str>> {
    BTreeMap::from([
        (
            "fit",
            vec!["history.csv", "summary.csv", "loadings.csv", "quantifications.csv", "scores.csv"],
        ),
        ("extract", vec!["criteria.csv", "scree.csv", "scree.svg", "extraction.json", "communalities.csv"]),
        ("validate", vec!["validation.csv", "validation.json", "train_summary.csv", "test_summary.csv"]),
        ("profile", vec!["assignments.csv", "membership.csv"]),
    ])
}

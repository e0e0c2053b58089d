//! Pipeline orchestration and on-disk artifacts.
//!
//! [`run`] executes the enabled stages over one corpus and writes:
//!
//! - `samples.csv` and `samples.json`: one row/object per sample,
//! - `clones.jsonl`: textual clones, one JSON object per line,
//! - `ast_clusters.json`: structural clone clusters,
//! - `clusters.json`: triage clusters of the textual clones,
//! - `trends.json`: growth fits over sample years,
//! - `plots/*.tsv` (and optional `.svg`): plot data, one file per chart.
//!
//! JSON files are pretty-printed with sorted keys. On failure a `FAILED`
//! file holding the error is left next to whatever was already written.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloneast::{self, AstParamError, AstParams};
use crate::clonediff::{self, CloneMatch, CloneThresholds, LineMode};
use crate::clonetriage::{self, TriageOptions, TriageReport};
use crate::cocomo::{estimate_sloc, CocomoError, CoefficientTable, CostEstimate, ProjectClass};
use crate::corpus::{Category, Corpus, CorpusError, LanguageId, Sample};
use crate::linecount::{aggregate, comment_ratio, tally_file, Aggregate, LanguageSyntax};
use crate::sizing::{function_points, BackfireTable, FunctionPoints, SizingError};
use crate::structure::{module_quality, quality_report};
use crate::trends::{
    self, chi_square_hist, exp_fit, ks_permutation_p, ks_two_sample, linear_fit, Aggregation,
    ChiSquareResult, GrowthFit, Histogram, KsResult, LinearFit, TimeSeriesPoint,
};

pub const TABLE_DIR_ENV: &str = "SRCMETRY_TABLE_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Sizing(#[from] SizingError),
    #[error(transparent)]
    Cocomo(#[from] CocomoError),
    #[error(transparent)]
    Ast(#[from] AstParamError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("{0}")]
    Input(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Backfiring ratios and COCOMO coefficients in effect for a run.
#[derive(Debug, Clone, Default)]
pub struct Tables {
    pub backfire: BackfireTable,
    pub cocomo: CoefficientTable,
}

impl Tables {
    /// Built-in tables, overridden by `backfire.json` / `cocomo.json` found in `dir`.
    pub fn load(dir: Option<&Path>) -> Result<Tables, ReportError> {
        let mut t = Tables::default();
        if let Some(dir) = dir {
            let bf = dir.join("backfire.json");
            if bf.exists() {
                t.backfire = BackfireTable::from_file(&bf)?;
            }
            let cc = dir.join("cocomo.json");
            if cc.exists() {
                t.cocomo = CoefficientTable::from_file(&cc)?;
            }
        }
        Ok(t)
    }

    /// Reads the directory named by `SRCMETRY_TABLE_DIR`, if set.
    pub fn from_env() -> Result<Tables, ReportError> {
        match std::env::var_os(TABLE_DIR_ENV) {
            Some(d) if !d.is_empty() => Tables::load(Some(Path::new(&d))),
            _ => Ok(Tables::default()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Metrics,
    Clones,
    Ast,
    Triage,
    Trends,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Metrics,
        Stage::Clones,
        Stage::Ast,
        Stage::Triage,
        Stage::Trends,
    ];
}

impl std::str::FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
            format!("unknown stage `{s}` (expected metrics, clones, ast, triage or trends)")
        })
    }
}

fn all_stages() -> BTreeSet<Stage> {
    Stage::ALL.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_manifest: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cocomo_class: ProjectClass,
    #[serde(default)]
    pub clone_thresholds: CloneThresholds,
    #[serde(default)]
    pub line_mode: LineMode,
    #[serde(default)]
    pub ast: AstParams,
    #[serde(default)]
    pub triage: TriageOptions,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default = "all_stages")]
    pub stages: BTreeSet<Stage>,
    /// Also render SVG versions of the scatter and histogram plots.
    #[serde(default)]
    pub svg: bool,
    /// Worker threads; `None` uses every core.
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn new(corpus_manifest: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> RunConfig {
        RunConfig {
            corpus_manifest: corpus_manifest.into(),
            output_dir: output_dir.into(),
            cocomo_class: ProjectClass::default(),
            clone_thresholds: CloneThresholds::default(),
            line_mode: LineMode::default(),
            ast: AstParams::default(),
            triage: TriageOptions::default(),
            aggregation: Aggregation::default(),
            stages: all_stages(),
            svg: false,
            jobs: None,
            seed: 0,
        }
    }

    /// Parses a JSON config; relative paths are taken from the config's directory.
    pub fn from_file(path: &Path) -> Result<RunConfig, ReportError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| ReportError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.corpus_manifest, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate().map_err(|message| ReportError::Config {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.ast.validate().map_err(|e| e.to_string())?;
        if self.jobs == Some(0) {
            return Err("jobs must be at least 1".into());
        }
        if self.clone_thresholds.default == 0
            || self.clone_thresholds.per_language.values().any(|&v| v == 0)
        {
            return Err("clone thresholds must be at least 1".into());
        }
        if !(0..=100).contains(&self.triage.threshold) {
            return Err(format!(
                "triage threshold {} outside 0..=100",
                self.triage.threshold
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub modules: usize,
    pub functions: usize,
    pub avg_cc: f64,
    pub avg_halstead_volume: f64,
    pub avg_sloc_per_module: f64,
    pub mi: Option<f64>,
    pub mi_upper_bound: Option<f64>,
    pub low_maintainability: Option<bool>,
    pub segment_warnings: usize,
    /// Cyclomatic complexity of every function, in file order.
    pub function_cc: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub id: String,
    pub name: String,
    pub year: i32,
    pub category: Category,
    pub files: usize,
    pub skipped: usize,
    /// Languages with at least one SLOC.
    pub languages: Vec<LanguageId>,
    pub lines: Aggregate,
    pub function_points: FunctionPoints,
    pub cost: Option<CostEstimate>,
    pub quality: Option<QualitySummary>,
    pub comment_ratio: Option<f64>,
    pub unterminated_comments: usize,
}

/// Every per-sample number for one scanned sample.
pub fn sample_report(
    sample: &Sample,
    tables: &Tables,
    class: ProjectClass,
) -> Result<SampleReport, ReportError> {
    let counted: Vec<(LanguageId, crate::linecount::TallyOutcome)> = sample
        .files
        .par_iter()
        .filter_map(|f| {
            LanguageSyntax::for_language(f.language).map(|syn| (f.language, tally_file(f, &syn)))
        })
        .collect();
    let unterminated_comments = counted.iter().map(|(_, o)| o.warnings.len()).sum();
    let lines = aggregate(counted.into_iter().map(|(l, o)| (l, o.tally)));
    let fp = function_points(&lines.per_language, &tables.backfire)?;
    let modules: Vec<_> = sample.files.par_iter().filter_map(module_quality).collect();
    let quality = quality_report(&modules).map(|q| QualitySummary {
        modules: q.modules,
        functions: q.per_function_cc.len(),
        avg_cc: q.avg_cc,
        avg_halstead_volume: q.avg_halstead_volume,
        avg_sloc_per_module: q.avg_sloc_per_module,
        mi: q.mi.map(|m| m.value),
        mi_upper_bound: q.mi_upper_bound.map(|m| m.value),
        low_maintainability: q.mi.map(|m| m.low_maintainability),
        segment_warnings: q.warnings.len(),
        function_cc: q.per_function_cc.iter().map(|f| f.cc).collect(),
    });
    Ok(SampleReport {
        id: sample.manifest.id.clone(),
        name: sample.manifest.name.clone(),
        year: sample.manifest.year,
        category: sample.manifest.category,
        files: sample.files.len(),
        skipped: sample.skipped.len(),
        languages: lines
            .per_language
            .iter()
            .filter(|(_, t)| t.sloc > 0)
            .map(|(&l, _)| l)
            .collect(),
        cost: estimate_sloc(lines.total.sloc, &tables.cocomo.get(class)),
        comment_ratio: comment_ratio(&lines.total),
        function_points: fp,
        quality,
        lines,
        unterminated_comments,
    })
}

pub fn corpus_reports(
    corpus: &Corpus,
    tables: &Tables,
    class: ProjectClass,
) -> Result<Vec<SampleReport>, ReportError> {
    corpus
        .samples
        .iter()
        .map(|s| sample_report(s, tables, class))
        .collect()
}

/// Shortest round-trip text for a float; empty for `None`.
fn num(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

pub const SAMPLES_CSV_HEADER: [&str; 13] = [
    "id",
    "year",
    "category",
    "files",
    "languages",
    "sloc",
    "fp",
    "effort",
    "duration",
    "people",
    "avg_cc",
    "mi",
    "comment_ratio",
];

pub fn samples_csv(reports: &[SampleReport]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SAMPLES_CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.id.clone(),
            r.year.to_string(),
            r.category.code().to_string(),
            r.files.to_string(),
            r.languages.len().to_string(),
            r.lines.total.sloc.to_string(),
            num(Some(r.function_points.total)),
            num(r.cost.map(|c| c.effort_man_months)),
            num(r.cost.map(|c| c.duration_months)),
            num(r.cost.map(|c| c.people)),
            num(r.quality.as_ref().map(|q| q.avg_cc)),
            num(r.quality.as_ref().and_then(|q| q.mi)),
            num(r.comment_ratio),
        ])?;
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w
        .into_inner()
        .map_err(|e| ReportError::Input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ReportError::Input(e.to_string()))
}

fn tsv(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<String, ReportError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    finish_csv(w)
}

/// Pretty JSON with object keys sorted.
pub fn to_sorted_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialize");
    let mut s = serde_json::to_string_pretty(&v).expect("values serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendEntry {
    pub model: String,
    pub points: usize,
    pub exponential: Option<GrowthFit>,
    pub linear: Option<LinearFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub aggregation: Aggregation,
    pub series: BTreeMap<String, TrendEntry>,
}

/// Exponential fits for size and effort, linear fits for the rest.
pub fn trend_report(reports: &[SampleReport], how: Aggregation) -> TrendReport {
    type Getter = fn(&SampleReport) -> Option<f64>;
    let series: [(&str, bool, Getter); 9] = [
        ("sloc", true, |r| {
            Some(r.lines.total.sloc as f64).filter(|&v| v > 0.0)
        }),
        ("function_points", true, |r| {
            Some(r.function_points.total).filter(|&v| v > 0.0)
        }),
        ("effort", true, |r| r.cost.map(|c| c.effort_man_months)),
        ("duration", false, |r| r.cost.map(|c| c.duration_months)),
        ("people", false, |r| r.cost.map(|c| c.people)),
        ("avg_cc", false, |r| r.quality.as_ref().map(|q| q.avg_cc)),
        ("mi", false, |r| r.quality.as_ref().and_then(|q| q.mi)),
        ("comment_ratio", false, |r| r.comment_ratio),
        ("languages", false, |r| Some(r.languages.len() as f64)),
    ];
    let mut out = BTreeMap::new();
    for (name, exponential, get) in series {
        let pts: Vec<TimeSeriesPoint> = reports
            .iter()
            .filter_map(|r| {
                get(r).map(|value| TimeSeriesPoint {
                    year: r.year,
                    value,
                })
            })
            .collect();
        let pts = trends::aggregate(&pts, how);
        let mut e = TrendEntry {
            model: if exponential { "exponential" } else { "linear" }.into(),
            points: pts.len(),
            exponential: None,
            linear: None,
            error: None,
        };
        if exponential {
            match exp_fit(&pts) {
                Ok(f) => e.exponential = Some(f),
                Err(err) => e.error = Some(err.to_string()),
            }
        } else {
            match linear_fit(&pts) {
                Ok(f) => e.linear = Some(f),
                Err(err) => e.error = Some(err.to_string()),
            }
        }
        out.insert(name.to_string(), e);
    }
    TrendReport {
        aggregation: how,
        series: out,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub set: String,
    pub id: String,
    pub year: i32,
    pub sloc: u64,
    pub effort: Option<f64>,
    pub duration: Option<f64>,
    pub people: Option<f64>,
    pub fp: f64,
    pub avg_cc: Option<f64>,
    pub comment_ratio: Option<f64>,
    pub mi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub functions_a: usize,
    pub functions_b: usize,
    pub cc_ks: Option<KsResult>,
    pub cc_ks_permutation_p: Option<f64>,
    pub cc_chi_square: Option<ChiSquareResult>,
    pub notes: Vec<String>,
}

const PERMUTATIONS: usize = 2000;

/// Side-by-side metric table plus tests on the per-function CC distributions.
pub fn compare(
    a: &[SampleReport],
    b: &[SampleReport],
    seed: u64,
) -> Result<Comparison, ReportError> {
    if a.is_empty() || b.is_empty() {
        return Err(ReportError::Input(
            "both report sets must contain at least one sample".into(),
        ));
    }
    let row = |set: &str, r: &SampleReport| ComparisonRow {
        set: set.into(),
        id: r.id.clone(),
        year: r.year,
        sloc: r.lines.total.sloc,
        effort: r.cost.map(|c| c.effort_man_months),
        duration: r.cost.map(|c| c.duration_months),
        people: r.cost.map(|c| c.people),
        fp: r.function_points.total,
        avg_cc: r.quality.as_ref().map(|q| q.avg_cc),
        comment_ratio: r.comment_ratio,
        mi: r.quality.as_ref().and_then(|q| q.mi),
    };
    let rows = a
        .iter()
        .map(|r| row("a", r))
        .chain(b.iter().map(|r| row("b", r)))
        .collect();
    let cc = |set: &[SampleReport]| -> Vec<f64> {
        set.iter()
            .filter_map(|r| r.quality.as_ref())
            .flat_map(|q| q.function_cc.iter().map(|&c| c as f64))
            .collect()
    };
    let (ca, cb) = (cc(a), cc(b));
    let mut out = Comparison {
        rows,
        functions_a: ca.len(),
        functions_b: cb.len(),
        cc_ks: None,
        cc_ks_permutation_p: None,
        cc_chi_square: None,
        notes: Vec::new(),
    };
    if ca.is_empty() || cb.is_empty() {
        out.notes.push(
            "no function-level complexity in one of the sets; distribution tests skipped".into(),
        );
        return Ok(out);
    }
    out.cc_ks = ks_two_sample(&ca, &cb).ok();
    out.cc_ks_permutation_p = ks_permutation_p(&ca, &cb, PERMUTATIONS, seed).ok();
    let hi = ca.iter().chain(&cb).fold(1.0f64, |m, &v| m.max(v)) as i64;
    match chi_square_hist(
        &Histogram::integer(&ca, 1, hi),
        &Histogram::integer(&cb, 1, hi),
    ) {
        Ok(r) => out.cc_chi_square = Some(r),
        Err(e) => out.notes.push(format!("chi-square skipped: {e}")),
    }
    Ok(out)
}

/// Reads a `samples.json` written by [`run`].
pub fn load_reports(path: &Path) -> Result<Vec<SampleReport>, ReportError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ReportError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub samples: usize,
    pub clones: Option<usize>,
    pub ast_clusters: Option<usize>,
    pub triage_clusters: Option<usize>,
    pub artifacts: Vec<PathBuf>,
}

struct Out<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Out<'_> {
    fn write(&mut self, rel: &str, content: &str) -> Result<(), ReportError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        std::fs::write(&path, content).map_err(io_err(&path))?;
        self.written.push(PathBuf::from(rel));
        Ok(())
    }
}

pub const FAILED_MARKER: &str = "FAILED";

/// Runs the configured stages, writing artifacts under `output_dir`.
pub fn run(config: &RunConfig) -> Result<RunSummary, ReportError> {
    config.validate().map_err(|message| ReportError::Config {
        path: config.output_dir.clone(),
        message,
    })?;
    std::fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;
    let marker = config.output_dir.join(FAILED_MARKER);
    if marker.exists() {
        std::fs::remove_file(&marker).map_err(io_err(&marker))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| ReportError::Pool(e.to_string()));
    let result = pool.and_then(|p| p.install(|| run_stages(config)));
    if let Err(e) = &result {
        let _ = std::fs::write(&marker, format!("{e}\n"));
    }
    result
}

fn run_stages(config: &RunConfig) -> Result<RunSummary, ReportError> {
    let tables = Tables::from_env()?;
    let corpus = Corpus::load(&config.corpus_manifest)?;
    let mut out = Out {
        dir: &config.output_dir,
        written: Vec::new(),
    };
    let stages = &config.stages;
    let mut summary = RunSummary {
        samples: corpus.samples.len(),
        clones: None,
        ast_clusters: None,
        triage_clusters: None,
        artifacts: Vec::new(),
    };

    let reports = if stages.contains(&Stage::Metrics) || stages.contains(&Stage::Trends) {
        corpus_reports(&corpus, &tables, config.cocomo_class)?
    } else {
        Vec::new()
    };
    if stages.contains(&Stage::Metrics) {
        out.write("samples.csv", &samples_csv(&reports)?)?;
        out.write("samples.json", &to_sorted_json(&reports))?;
        write_metric_plots(&mut out, &reports, config.svg)?;
    }

    if stages.contains(&Stage::Clones) || stages.contains(&Stage::Triage) {
        let clones = clonediff::detect_corpus(&corpus, &config.clone_thresholds, config.line_mode);
        summary.clones = Some(clones.len());
        if stages.contains(&Stage::Clones) {
            out.write("clones.jsonl", &clonediff::write_jsonl(&clones))?;
            write_clone_plot(&mut out, &clones)?;
        }
        if stages.contains(&Stage::Triage) {
            let mut report = clonetriage::triage(&clones, &config.triage);
            carry_previous_labels(&config.output_dir.join("clusters.json"), &mut report);
            summary.triage_clusters = Some(report.clusters.len());
            out.write("clusters.json", &to_sorted_json(&report))?;
        }
    }

    if stages.contains(&Stage::Ast) {
        let ast = cloneast::detect_corpus(&corpus, &config.ast)?;
        summary.ast_clusters = Some(ast.clusters.len());
        out.write("ast_clusters.json", &to_sorted_json(&ast))?;
    }

    if stages.contains(&Stage::Trends) {
        out.write(
            "trends.json",
            &to_sorted_json(&trend_report(&reports, config.aggregation)),
        )?;
    }
    summary.artifacts = out.written;
    Ok(summary)
}

fn carry_previous_labels(path: &Path, report: &mut TriageReport) {
    let Ok(text) = std::fs::read_to_string(path) else {
        return;
    };
    if let Ok(prev) = serde_json::from_str::<TriageReport>(&text) {
        clonetriage::carry_labels(&prev.clusters, &mut report.clusters);
    }
}

fn write_metric_plots(
    out: &mut Out,
    reports: &[SampleReport],
    svg: bool,
) -> Result<(), ReportError> {
    let f = |x: Option<f64>| num(x);
    out.write(
        "plots/size_by_year.tsv",
        &tsv(
            &["year", "id", "category", "sloc", "fp"],
            reports.iter().map(|r| {
                vec![
                    r.year.to_string(),
                    r.id.clone(),
                    r.category.code().into(),
                    r.lines.total.sloc.to_string(),
                    f(Some(r.function_points.total)),
                ]
            }),
        )?,
    )?;
    out.write(
        "plots/cocomo_by_year.tsv",
        &tsv(
            &["year", "id", "effort", "duration", "people"],
            reports.iter().map(|r| {
                vec![
                    r.year.to_string(),
                    r.id.clone(),
                    f(r.cost.map(|c| c.effort_man_months)),
                    f(r.cost.map(|c| c.duration_months)),
                    f(r.cost.map(|c| c.people)),
                ]
            }),
        )?,
    )?;
    out.write(
        "plots/quality_by_year.tsv",
        &tsv(
            &["year", "id", "avg_cc", "mi", "comment_ratio"],
            reports.iter().map(|r| {
                vec![
                    r.year.to_string(),
                    r.id.clone(),
                    f(r.quality.as_ref().map(|q| q.avg_cc)),
                    f(r.quality.as_ref().and_then(|q| q.mi)),
                    f(r.comment_ratio),
                ]
            }),
        )?,
    )?;

    let mut by_lang: BTreeMap<LanguageId, (usize, u64)> = BTreeMap::new();
    for r in reports {
        for (lang, t) in &r.lines.per_language {
            if t.sloc > 0 {
                let e = by_lang.entry(*lang).or_default();
                e.0 += 1;
                e.1 += t.sloc;
            }
        }
    }
    out.write(
        "plots/languages.tsv",
        &tsv(
            &["language", "samples", "sloc"],
            by_lang
                .iter()
                .map(|(l, (n, s))| vec![l.name().to_string(), n.to_string(), s.to_string()]),
        )?,
    )?;

    let mut cc_hist: BTreeMap<u32, usize> = BTreeMap::new();
    for q in reports.iter().filter_map(|r| r.quality.as_ref()) {
        for &c in &q.function_cc {
            *cc_hist.entry(c).or_default() += 1;
        }
    }
    out.write(
        "plots/cc_histogram.tsv",
        &tsv(
            &["cc", "functions"],
            cc_hist
                .iter()
                .map(|(c, n)| vec![c.to_string(), n.to_string()]),
        )?,
    )?;

    if svg {
        let pts: Vec<(f64, f64)> = reports
            .iter()
            .filter(|r| r.lines.total.sloc > 0)
            .map(|r| (r.year as f64, r.lines.total.sloc as f64))
            .collect();
        out.write(
            "plots/size_by_year.svg",
            &svg_scatter_log(&pts, "year", "SLOC"),
        )?;
        let bars: Vec<(String, f64)> = cc_hist
            .iter()
            .map(|(c, n)| (c.to_string(), *n as f64))
            .collect();
        out.write(
            "plots/cc_histogram.svg",
            &svg_bars(&bars, "cyclomatic complexity", "functions"),
        )?;
    }
    Ok(())
}

fn write_clone_plot(out: &mut Out, clones: &[CloneMatch]) -> Result<(), ReportError> {
    let mut lengths: BTreeMap<usize, usize> = BTreeMap::new();
    for c in clones {
        *lengths.entry(c.length_sloc).or_default() += 1;
    }
    out.write(
        "plots/clone_lengths.tsv",
        &tsv(
            &["length_sloc", "clones"],
            lengths
                .iter()
                .map(|(l, n)| vec![l.to_string(), n.to_string()]),
        )?,
    )
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const M: f64 = 50.0;

fn svg_frame(body: &str, x_label: &str, y_label: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
            "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
            "<text x=\"{cx}\" y=\"{xl}\" text-anchor=\"middle\">{xlab}</text>\n",
            "<text x=\"14\" y=\"{cy}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {cy})\">{ylab}</text>\n",
            "{body}</svg>\n"
        ),
        w = W,
        h = H,
        m = M,
        b = H - M,
        r = W - M,
        cx = W / 2.0,
        xl = H - 12.0,
        cy = H / 2.0,
        xlab = x_label,
        ylab = y_label,
        body = body
    )
}

/// Scatter plot with a log-scaled y axis.
pub fn svg_scatter_log(points: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    let mut body = String::new();
    if !points.is_empty() {
        let (x0, x1) = points
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
        let ly: Vec<f64> = points.iter().map(|p| p.1.max(1.0).log10()).collect();
        let (y0, y1) = (
            ly.iter().cloned().fold(f64::MAX, f64::min).floor(),
            ly.iter().cloned().fold(f64::MIN, f64::max).ceil().max(1.0),
        );
        let sx = |x: f64| M + if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.5 } * (W - 2.0 * M);
        let sy = |y: f64| H - M - if y1 > y0 { (y - y0) / (y1 - y0) } else { 0.5 } * (H - 2.0 * M);
        for d in (y0 as i32)..=(y1 as i32) {
            let _ = writeln!(
                body,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{d}</text>",
                M - 4.0,
                sy(d as f64) + 4.0
            );
        }
        let _ = writeln!(
            body,
            "<text x=\"{M:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x0}</text>",
            H - M + 16.0
        );
        let _ = writeln!(
            body,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x1}</text>",
            W - M,
            H - M + 16.0
        );
        for (p, y) in points.iter().zip(&ly) {
            let _ = writeln!(
                body,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"steelblue\"/>",
                sx(p.0),
                sy(*y)
            );
        }
    }
    svg_frame(&body, x_label, y_label)
}

pub fn svg_bars(bars: &[(String, f64)], x_label: &str, y_label: &str) -> String {
    let mut body = String::new();
    let max = bars.iter().map(|b| b.1).fold(0.0, f64::max);
    if !bars.is_empty() && max > 0.0 {
        let bw = (W - 2.0 * M) / bars.len() as f64;
        for (i, (label, v)) in bars.iter().enumerate() {
            let h = v / max * (H - 2.0 * M);
            let x = M + i as f64 * bw;
            let _ = writeln!(
                body,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"steelblue\"/>",
                x + 1.0,
                H - M - h,
                (bw - 2.0).max(1.0),
                h
            );
            let _ = writeln!(
                body,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{label}</text>",
                x + bw / 2.0,
                H - M + 16.0
            );
        }
        let _ = writeln!(
            body,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{max}</text>",
            M - 4.0,
            M + 4.0
        );
    }
    svg_frame(&body, x_label, y_label)
}

//! Python bindings. Build with `--features extension-module`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use srcmetry::cloneast;
use srcmetry::clonediff;
use srcmetry::clonetriage;
use srcmetry::cocomo::{estimate, CoefficientTable, ProjectClass};
use srcmetry::linecount::{tally_lines, LanguageSyntax};
use srcmetry::report::{self, RunConfig, Tables};
use srcmetry::sizing::{self, BackfireTable};
use srcmetry::structure;
use srcmetry::trends::{self, TimeSeriesPoint};
use srcmetry::{LanguageId, SourceFile};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_language(name: &str) -> PyResult<LanguageId> {
    name.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown language `{name}`")))
}

#[pyclass(name = "LineTally", frozen, get_all)]
pub struct PyLineTally {
    pub sloc: u64,
    pub comment_lines: u64,
    pub blank_lines: u64,
    pub total_lines: u64,
}

#[pymethods]
impl PyLineTally {
    fn __repr__(&self) -> String {
        format!(
            "LineTally(sloc={}, comment_lines={}, blank_lines={}, total_lines={})",
            self.sloc, self.comment_lines, self.blank_lines, self.total_lines
        )
    }
}

#[pyclass(name = "CostEstimate", frozen, get_all)]
pub struct PyCostEstimate {
    pub kloc: f64,
    pub effort_man_months: f64,
    pub duration_months: f64,
    pub people: f64,
}

#[pymethods]
impl PyCostEstimate {
    fn __repr__(&self) -> String {
        format!(
            "CostEstimate(kloc={}, effort_man_months={:.2}, duration_months={:.2}, people={:.2})",
            self.kloc, self.effort_man_months, self.duration_months, self.people
        )
    }
}

#[pyclass(name = "GrowthFit", frozen, get_all)]
pub struct PyGrowthFit {
    pub annual_factor: f64,
    pub doubling_years: Option<f64>,
    pub log_slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Physical line classification for `text` in `language` (e.g. "C", "Python").
#[pyfunction]
fn count_lines(text: &str, language: &str) -> PyResult<PyLineTally> {
    let lang = parse_language(language)?;
    let syntax = LanguageSyntax::for_language(lang)
        .ok_or_else(|| value_err(format!("{language} has no line syntax")))?;
    let lines: Vec<&str> = text.lines().collect();
    let t = tally_lines(&lines, &syntax).tally;
    Ok(PyLineTally {
        sloc: t.sloc,
        comment_lines: t.comment_lines,
        blank_lines: t.blank_lines,
        total_lines: t.total_lines,
    })
}

/// Backfired function points from `{language: sloc}`.
#[pyfunction]
fn function_points(
    sloc_by_language: BTreeMap<String, u64>,
) -> PyResult<(f64, BTreeMap<String, f64>)> {
    let mut tallies = BTreeMap::new();
    for (name, sloc) in sloc_by_language {
        tallies.insert(
            parse_language(&name)?,
            srcmetry::LineTally {
                sloc,
                total_lines: sloc,
                ..Default::default()
            },
        );
    }
    let fp = sizing::function_points(&tallies, &BackfireTable::default()).map_err(value_err)?;
    Ok((
        fp.total,
        fp.per_language
            .into_iter()
            .map(|(l, v)| (l.name().to_string(), v))
            .collect(),
    ))
}

#[pyfunction]
#[pyo3(signature = (kloc, project_class = "organic"))]
fn cocomo(kloc: f64, project_class: &str) -> PyResult<PyCostEstimate> {
    let class: ProjectClass = project_class.parse().map_err(value_err)?;
    let e = estimate(kloc, &CoefficientTable::default().get(class)).map_err(value_err)?;
    Ok(PyCostEstimate {
        kloc: e.kloc,
        effort_man_months: e.effort_man_months,
        duration_months: e.duration_months,
        people: e.people,
    })
}

/// `(name, start_line, end_line, cc)` for every function in the source.
#[pyfunction]
fn function_complexity(text: &str, language: &str) -> PyResult<Vec<(String, usize, usize, u32)>> {
    let file = SourceFile::from_text("py", "input", parse_language(language)?, text);
    let q = structure::module_quality(&file)
        .ok_or_else(|| value_err(format!("no function metrics for {language}")))?;
    Ok(q.functions
        .into_iter()
        .map(|f| (f.name, f.start_line, f.end_line, f.cc))
        .collect())
}

#[pyfunction]
fn maintainability_index(mean_volume: f64, mean_cc: f64, mean_sloc: f64) -> PyResult<f64> {
    structure::maintainability_index(mean_volume, mean_cc, mean_sloc)
        .map(|m| m.value)
        .map_err(value_err)
}

/// Ratcliff-Obershelp matching blocks as `(start_a, start_b, length)`.
#[pyfunction]
fn matching_blocks(a: Vec<String>, b: Vec<String>) -> Vec<(usize, usize, usize)> {
    clonediff::matching_blocks(&a, &b)
        .into_iter()
        .map(|m| (m.start_a, m.start_b, m.len))
        .collect()
}

/// `(counts, token_count, start_line, end_line)`.
type VectorRow = (Vec<u32>, usize, usize, usize);

/// Characteristic vectors of a C/C++ source.
#[pyfunction]
#[pyo3(signature = (text, language = "C", min_tokens = 100, stride = 2))]
fn characteristic_vectors(
    text: &str,
    language: &str,
    min_tokens: usize,
    stride: usize,
) -> PyResult<Vec<VectorRow>> {
    let parsed = cloneast::parse_source(text, parse_language(language)?);
    let at = clonediff::FileRef {
        sample_id: "py".into(),
        path: "input".into(),
    };
    Ok(cloneast::vectorize(&parsed.tree, &at, min_tokens, stride)
        .into_iter()
        .map(|v| {
            (
                v.counts.to_vec(),
                v.token_count,
                v.source.span.start,
                v.source.span.end,
            )
        })
        .collect())
}

#[pyfunction]
#[pyo3(signature = (text, identifiers = true))]
fn canonicalize(text: &str, identifiers: bool) -> String {
    clonetriage::canonicalize(text, identifiers)
}

#[pyfunction]
fn fuzzy_hash(data: &[u8]) -> String {
    clonetriage::ctph(data).to_string()
}

/// 0..=100 match score between two digests from [`fuzzy_hash`].
#[pyfunction]
fn fuzzy_compare(a: &str, b: &str) -> PyResult<u32> {
    let a: clonetriage::Ctph = a.parse().map_err(value_err)?;
    let b: clonetriage::Ctph = b.parse().map_err(value_err)?;
    Ok(clonetriage::similarity(&a, &b))
}

#[pyfunction]
fn exp_fit(years: Vec<i32>, values: Vec<f64>) -> PyResult<PyGrowthFit> {
    if years.len() != values.len() {
        return Err(value_err("years and values differ in length"));
    }
    let pts: Vec<_> = years
        .into_iter()
        .zip(values)
        .map(|(year, value)| TimeSeriesPoint { year, value })
        .collect();
    let f = trends::exp_fit(&pts).map_err(value_err)?;
    Ok(PyGrowthFit {
        annual_factor: f.annual_factor,
        doubling_years: f.doubling_years,
        log_slope: f.log_slope,
        intercept: f.intercept,
        r_squared: f.r_squared,
        n: f.n,
    })
}

/// `(D, p)` of the two-sample Kolmogorov-Smirnov test.
#[pyfunction]
fn ks_two_sample(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = trends::ks_two_sample(&a, &b).map_err(value_err)?;
    Ok((r.d, r.p_value))
}

#[pyclass(name = "Corpus", frozen)]
pub struct PyCorpus {
    inner: srcmetry::Corpus,
}

#[pymethods]
impl PyCorpus {
    #[staticmethod]
    fn load(manifest: PathBuf) -> PyResult<PyCorpus> {
        srcmetry::Corpus::load(&manifest)
            .map(|inner| PyCorpus { inner })
            .map_err(|e| PyOSError::new_err(e.to_string()))
    }

    #[getter]
    fn sample_ids(&self) -> Vec<String> {
        self.inner
            .samples
            .iter()
            .map(|s| s.manifest.id.clone())
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }

    /// Per-sample reports as the JSON text written to samples.json.
    #[pyo3(signature = (project_class = "organic"))]
    fn reports_json(&self, py: Python<'_>, project_class: &str) -> PyResult<String> {
        let class: ProjectClass = project_class.parse().map_err(value_err)?;
        let tables = Tables::from_env().map_err(value_err)?;
        let reports = py
            .detach(|| report::corpus_reports(&self.inner, &tables, class))
            .map_err(value_err)?;
        Ok(report::to_sorted_json(&reports))
    }

    /// Textual clones as JSON lines.
    fn clones_jsonl(&self, py: Python<'_>) -> String {
        let clones = py.detach(|| {
            clonediff::detect_corpus(
                &self.inner,
                &clonediff::CloneThresholds::default(),
                clonediff::LineMode::default(),
            )
        });
        clonediff::write_jsonl(&clones)
    }
}

/// Full pipeline from a JSON config file; returns the artifact paths written.
#[pyfunction]
fn run_report(py: Python<'_>, config: PathBuf) -> PyResult<Vec<PathBuf>> {
    let cfg = RunConfig::from_file(&config).map_err(value_err)?;
    let summary = py.detach(|| report::run(&cfg)).map_err(value_err)?;
    Ok(summary.artifacts)
}

#[pymodule]
pub fn srcmetry_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLineTally>()?;
    m.add_class::<PyCostEstimate>()?;
    m.add_class::<PyGrowthFit>()?;
    m.add_class::<PyCorpus>()?;
    m.add_function(wrap_pyfunction!(count_lines, m)?)?;
    m.add_function(wrap_pyfunction!(function_points, m)?)?;
    m.add_function(wrap_pyfunction!(cocomo, m)?)?;
    m.add_function(wrap_pyfunction!(function_complexity, m)?)?;
    m.add_function(wrap_pyfunction!(maintainability_index, m)?)?;
    m.add_function(wrap_pyfunction!(matching_blocks, m)?)?;
    m.add_function(wrap_pyfunction!(characteristic_vectors, m)?)?;
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(fuzzy_hash, m)?)?;
    m.add_function(wrap_pyfunction!(fuzzy_compare, m)?)?;
    m.add_function(wrap_pyfunction!(exp_fit, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(run_report, m)?)?;
    Ok(())
}

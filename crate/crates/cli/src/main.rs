use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use srcmetry::cloneast::{self, AstParams};
use srcmetry::clonediff::{self, LineMode};
use srcmetry::clonetriage::{self, TriageOptions, TriageReport};
use srcmetry::cocomo::{estimate, estimate_sloc, ProjectClass};
use srcmetry::report::{self, RunConfig, Stage, Tables};
use srcmetry::trends::Aggregation;
use srcmetry::Corpus;

#[derive(Parser)]
#[command(
    name = "srcmetry",
    version,
    about = "Source metrics, cost estimates and clone detection for sample corpora"
)]
struct Cli {
    /// JSON run configuration; supplies defaults for every subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for permutation tests.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// List the files attributed to each sample.
    Scan {
        manifest: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Per-sample line counts, function points, cost and quality metrics.
    Metrics {
        manifest: Option<PathBuf>,
        #[arg(long)]
        class: Option<ProjectClass>,
        /// Emit the samples.csv layout instead of JSON.
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Basic COCOMO estimate for a given size.
    Cocomo {
        #[arg(long, conflicts_with = "sloc", required_unless_present = "sloc")]
        kloc: Option<f64>,
        #[arg(long)]
        sloc: Option<u64>,
        #[arg(long, default_value = "organic")]
        class: ProjectClass,
    },
    /// Cross-sample clone detection.
    Clones {
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "diff")]
        engine: Engine,
        /// Compare raw lines instead of normalized ones (diff engine).
        #[arg(long)]
        raw: bool,
        /// Minimum clone length in SLOC for every language (diff engine).
        #[arg(long)]
        min_sloc: Option<usize>,
        #[arg(long)]
        min_tokens: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        similarity: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Group textual clones by fuzzy-hash similarity.
    Triage {
        /// clones.jsonl produced by `clones --engine diff`.
        clones: PathBuf,
        #[arg(long)]
        threshold: Option<i64>,
        /// Keep identifiers verbatim when canonicalizing.
        #[arg(long)]
        keep_identifiers: bool,
        /// Earlier clusters.json whose labels carry over.
        #[arg(long)]
        previous: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Growth fits over the sample years of a samples.json.
    Trends {
        samples: PathBuf,
        #[arg(long, value_enum)]
        aggregation: Option<AggregationArg>,
        #[command(flatten)]
        output: Output,
    },
    /// Compare two samples.json files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Run the full pipeline and write every artifact.
    Report {
        manifest: Option<PathBuf>,
        #[arg(long = "output-dir")]
        output_dir: Option<PathBuf>,
        /// Comma-separated subset of metrics,clones,ast,triage,trends.
        #[arg(long, value_delimiter = ',')]
        stages: Vec<Stage>,
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        class: Option<ProjectClass>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Diff,
    Ast,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    PerSample,
    YearlyMean,
}

impl From<AggregationArg> for Aggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::PerSample => Aggregation::PerSample,
            AggregationArg::YearlyMean => Aggregation::YearlyMean,
        }
    }
}

struct Ctx {
    config: Option<RunConfig>,
    jobs: Option<usize>,
    seed: u64,
}

impl Ctx {
    fn manifest(&self, given: Option<PathBuf>) -> Result<PathBuf> {
        given
            .or_else(|| self.config.as_ref().map(|c| c.corpus_manifest.clone()))
            .context("no corpus manifest given (pass one or use --config)")
    }

    fn corpus(&self, given: Option<PathBuf>) -> Result<Corpus> {
        let path = self.manifest(given)?;
        Corpus::load(&path).with_context(|| format!("loading {}", path.display()))
    }

    fn base(&self) -> RunConfig {
        self.config
            .clone()
            .unwrap_or_else(|| RunConfig::new("", ""))
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let jobs = self
            .jobs
            .or(self.config.as_ref().and_then(|c| c.jobs))
            .unwrap_or(0);
        Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
    }
}

fn emit(output: &Output, text: &str) -> Result<()> {
    match &output.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let config = cli
        .config
        .as_deref()
        .map(RunConfig::from_file)
        .transpose()?;
    let ctx = Ctx {
        seed: cli.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0),
        jobs: cli.jobs,
        config,
    };
    if ctx.jobs == Some(0) {
        bail!("--jobs must be at least 1");
    }
    match cli.command {
        Command::Scan { manifest, output } => {
            let corpus = ctx.corpus(manifest)?;
            let samples: Vec<_> = corpus
                .samples
                .iter()
                .map(|s| {
                    json!({
                        "id": s.manifest.id,
                        "name": s.manifest.name,
                        "year": s.manifest.year,
                        "category": s.manifest.category,
                        "files": s.files,
                        "skipped": s.skipped,
                    })
                })
                .collect();
            emit(&output, &report::to_sorted_json(&samples))
        }
        Command::Metrics {
            manifest,
            class,
            csv,
            output,
        } => {
            let corpus = ctx.corpus(manifest)?;
            let tables = Tables::from_env()?;
            let class = class.unwrap_or(ctx.base().cocomo_class);
            let reports = ctx
                .pool()?
                .install(|| report::corpus_reports(&corpus, &tables, class))?;
            let text = if csv {
                report::samples_csv(&reports)?
            } else {
                report::to_sorted_json(&reports)
            };
            emit(&output, &text)
        }
        Command::Cocomo { kloc, sloc, class } => {
            let tables = Tables::from_env()?;
            let coeffs = tables.cocomo.get(class);
            let est = match (kloc, sloc) {
                (Some(k), _) => estimate(k, &coeffs)?,
                (None, Some(s)) => estimate_sloc(s, &coeffs).context("SLOC must be positive")?,
                (None, None) => unreachable!("clap requires one of --kloc/--sloc"),
            };
            print!("{}", report::to_sorted_json(&est));
            Ok(())
        }
        Command::Clones {
            manifest,
            engine,
            raw,
            min_sloc,
            min_tokens,
            stride,
            similarity,
            output,
        } => {
            let corpus = ctx.corpus(manifest)?;
            let base = ctx.base();
            let pool = ctx.pool()?;
            match engine {
                Engine::Diff => {
                    if min_tokens.is_some() || stride.is_some() || similarity.is_some() {
                        bail!("--min-tokens/--stride/--similarity apply to --engine ast");
                    }
                    let mut thresholds = base.clone_thresholds;
                    if let Some(n) = min_sloc {
                        if n == 0 {
                            bail!("--min-sloc must be at least 1");
                        }
                        thresholds.default = n;
                        thresholds.per_language.clear();
                    }
                    let mode = if raw { LineMode::Raw } else { base.line_mode };
                    let clones =
                        pool.install(|| clonediff::detect_corpus(&corpus, &thresholds, mode));
                    emit(&output, &clonediff::write_jsonl(&clones))
                }
                Engine::Ast => {
                    if raw || min_sloc.is_some() {
                        bail!("--raw/--min-sloc apply to --engine diff");
                    }
                    let params = AstParams {
                        min_tokens: min_tokens.unwrap_or(base.ast.min_tokens),
                        stride: stride.unwrap_or(base.ast.stride),
                        similarity: similarity.unwrap_or(base.ast.similarity),
                    };
                    let rep = pool.install(|| cloneast::detect_corpus(&corpus, &params))?;
                    emit(&output, &report::to_sorted_json(&rep))
                }
            }
        }
        Command::Triage {
            clones,
            threshold,
            keep_identifiers,
            previous,
            output,
        } => {
            let matches = clonediff::read_jsonl(&read(&clones)?)
                .with_context(|| format!("parsing {}", clones.display()))?;
            let base = ctx.base().triage;
            let opts = TriageOptions {
                threshold: threshold.unwrap_or(base.threshold),
                identifiers: if keep_identifiers {
                    false
                } else {
                    base.identifiers
                },
            };
            if !(0..=100).contains(&opts.threshold) {
                bail!("--threshold must be within 0..=100");
            }
            let mut rep = ctx.pool()?.install(|| clonetriage::triage(&matches, &opts));
            if let Some(prev) = previous {
                let prev: TriageReport = serde_json::from_str(&read(&prev)?)
                    .with_context(|| format!("parsing {}", prev.display()))?;
                clonetriage::carry_labels(&prev.clusters, &mut rep.clusters);
            }
            emit(&output, &report::to_sorted_json(&rep))
        }
        Command::Trends {
            samples,
            aggregation,
            output,
        } => {
            let reports = report::load_reports(&samples)?;
            let how = aggregation
                .map(Into::into)
                .unwrap_or(ctx.base().aggregation);
            emit(
                &output,
                &report::to_sorted_json(&report::trend_report(&reports, how)),
            )
        }
        Command::Compare { a, b, output } => {
            let (ra, rb) = (report::load_reports(&a)?, report::load_reports(&b)?);
            let cmp = ctx
                .pool()?
                .install(|| report::compare(&ra, &rb, ctx.seed))?;
            emit(&output, &report::to_sorted_json(&cmp))
        }
        Command::Report {
            manifest,
            output_dir,
            stages,
            svg,
            class,
        } => {
            let mut cfg = ctx.base();
            cfg.corpus_manifest = ctx.manifest(manifest)?;
            match output_dir {
                Some(d) => cfg.output_dir = d,
                None if ctx.config.is_none() => bail!("--output-dir is required without --config"),
                None => {}
            }
            if !stages.is_empty() {
                cfg.stages = stages.into_iter().collect::<BTreeSet<_>>();
            }
            cfg.svg |= svg;
            if let Some(c) = class {
                cfg.cocomo_class = c;
            }
            if ctx.jobs.is_some() {
                cfg.jobs = ctx.jobs;
            }
            cfg.seed = ctx.seed;
            let summary = report::run(&cfg)?;
            eprintln!(
                "{} samples, artifacts in {}",
                summary.samples,
                cfg.output_dir.display()
            );
            Ok(())
        }
    }
}

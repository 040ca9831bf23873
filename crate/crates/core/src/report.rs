//! Corpus walking, per-file orchestration, aggregation, and report output.
//!
//! `analyze_corpus` discovers `.py`/`.ipynb` files under a root, optionally
//! takes a seeded random sample, runs every analysis on each unit, and
//! assembles a `CorpusReport`. The report is a pure function of the corpus
//! bytes, the configuration, and the seed: files are processed in sorted
//! path order and results merge deterministically regardless of worker
//! count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cfg::{build_cfg, parse_scopes};
use crate::clones::{self, CloneClass, FileCloneDiffs, Fragment, Granularity};
use crate::docstats::{compute_doc_stats, DocStats};
use crate::error::{Error, Result};
use crate::ingest::{load_source_unit, LanguageTag, SourceUnit, UnitKind};
use crate::metrics::{file_metrics, scope_metrics, FileMetrics, MetricsRecord, PolicyChoice};
use crate::mutation::MutationSpecTable;

/// Schema version stamped into every report.
pub const SCHEMA_VERSION: u32 = 1;

/// Analysis configuration, echoed verbatim into the report.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeConfig {
    pub policy: PolicyChoice,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub clone_threshold: f64,
    pub clone_min_lines: usize,
    pub clone_min_instances: usize,
    pub clone_min_statements: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            policy: PolicyChoice::Both,
            sample: None,
            seed: None,
            clone_threshold: 0.7,
            clone_min_lines: 10,
            clone_min_instances: 3,
            clone_min_statements: 3,
        }
    }
}

impl AnalyzeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clone_threshold > 0.0 && self.clone_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "clone threshold must be in (0, 1], got {}",
                self.clone_threshold
            )));
        }
        if self.sample == Some(0) {
            return Err(Error::Config("sample size must be at least 1".into()));
        }
        if self.clone_min_statements == 0 {
            return Err(Error::Config("min statements must be at least 1".into()));
        }
        Ok(())
    }
}

/// Record of one analyzed unit.
#[derive(Debug, Clone, Serialize)]
pub struct UnitRecord {
    /// Path relative to the corpus root, `/`-separated.
    pub path: String,
    pub kind: UnitKind,
    pub language: LanguageTag,
    /// Set when the analyzable text does not parse; such units keep their
    /// documentation statistics but have no scopes or metrics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
    pub doc_stats: DocStats,
    pub scopes: Vec<MetricsRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<FileMetrics>,
}

/// A unit that could not be loaded at all.
#[derive(Debug, Clone, Serialize)]
pub struct ExcludedUnit {
    pub path: String,
    pub reason: String,
}

/// Compact clone-class view for reports (full fragments stay in memory).
#[derive(Debug, Clone, Serialize)]
pub struct CloneClassSummary {
    pub id: String,
    pub granularity: Granularity,
    pub exact: bool,
    pub instance_count: usize,
    pub min_lines: usize,
    pub min_similarity: f64,
    pub mean_similarity: f64,
    pub instances: Vec<CloneInstanceSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CloneInstanceSummary {
    pub unit: String,
    pub start_line: usize,
    pub end_line: usize,
    pub lines: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_range: Option<(usize, usize)>,
}

/// Summarize clone classes with unit paths relativized against `roots`.
pub fn summarize_clone_classes(classes: &[CloneClass], roots: &[&Path]) -> Vec<CloneClassSummary> {
    let trimmer = PathTrimmer::new(roots);
    classes.iter().map(|c| summarize_class(c, &trimmer)).collect()
}

/// Relativize diff unit paths against `roots`.
pub fn relativize_file_clone_diffs(
    diffs: Vec<FileCloneDiffs>,
    roots: &[&Path],
) -> Vec<FileCloneDiffs> {
    let trimmer = PathTrimmer::new(roots);
    trim_diff_paths(diffs, &trimmer)
}

fn summarize_class(class: &CloneClass, roots: &PathTrimmer) -> CloneClassSummary {
    CloneClassSummary {
        id: class.id.clone(),
        granularity: class.granularity,
        exact: class.exact,
        instance_count: class.instances.len(),
        min_lines: class.min_instance_lines(),
        min_similarity: class.min_similarity,
        mean_similarity: class.mean_similarity,
        instances: class
            .instances
            .iter()
            .map(|f| CloneInstanceSummary {
                unit: roots.trim(&f.unit),
                start_line: f.start_line,
                end_line: f.end_line,
                lines: f.line_count,
                cell_range: f.cell_range,
            })
            .collect(),
    }
}

/// Nearest-rank summary statistics.
#[derive(Debug, Clone, Serialize)]
pub struct StatSummary {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q25: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q75: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

/// Summarize values with nearest-rank quantiles: the p-quantile of n sorted
/// values is the value at rank ceil(p*n) (1-based).
pub fn aggregate_stats(values: &[f64]) -> StatSummary {
    let n = values.len();
    if n == 0 {
        return StatSummary { n, min: None, q25: None, median: None, mean: None, q75: None, max: None };
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let rank = |p: f64| -> f64 {
        let r = (p * n as f64).ceil() as usize;
        sorted[r.clamp(1, n) - 1]
    };
    StatSummary {
        n,
        min: Some(sorted[0]),
        q25: Some(rank(0.25)),
        median: Some(rank(0.5)),
        mean: Some(sorted.iter().sum::<f64>() / n as f64),
        q75: Some(rank(0.75)),
        max: Some(sorted[n - 1]),
    }
}

/// Report over one corpus root.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusReport {
    pub root: String,
    pub discovered_files: usize,
    pub analyzed_units: usize,
    /// Units that loaded but did not parse (docstats only).
    pub flagged_units: usize,
    pub excluded_units: usize,
    pub units: Vec<UnitRecord>,
    pub excluded: Vec<ExcludedUnit>,
    pub block_clones: Vec<CloneClassSummary>,
    pub high_impact_clones: Vec<CloneClassSummary>,
    pub file_clones: Vec<CloneClassSummary>,
    pub file_clone_diffs: Vec<FileCloneDiffs>,
    pub aggregates: BTreeMap<String, StatSummary>,
}

/// Top-level report document: one corpus per root, side by side.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: AnalyzeConfig,
    pub corpora: Vec<CorpusReport>,
}

impl ComparisonReport {
    pub fn new(config: AnalyzeConfig, corpora: Vec<CorpusReport>) -> Self {
        ComparisonReport {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            corpora,
        }
    }
}

// ---------------------------------------------------------------------------
// Corpus analysis
// ---------------------------------------------------------------------------

/// Recursively discover `.py` and `.ipynb` files, sorted by path.
pub fn discover_files(root: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("py") | Some("ipynb")
            )
        })
        .collect();
    files.sort();
    files
}

/// Seeded sample of `n` paths (all paths when `n >= len`). Deterministic
/// for a fixed seed; the selection is re-sorted to keep path order.
fn sample_paths(mut paths: Vec<PathBuf>, n: usize, seed: u64) -> Vec<PathBuf> {
    if n >= paths.len() {
        return paths;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = paths.len();
    for i in 0..n {
        let j = i + (rng.next_u64() as usize) % (len - i);
        paths.swap(i, j);
    }
    paths.truncate(n);
    paths.sort();
    paths
}

struct PathTrimmer {
    roots: Vec<String>,
}

impl PathTrimmer {
    fn new(roots: &[&Path]) -> Self {
        PathTrimmer {
            roots: roots.iter().map(|r| r.to_string_lossy().into_owned()).collect(),
        }
    }

    fn trim(&self, path: &str) -> String {
        let mut rel = path;
        for root in &self.roots {
            if let Some(stripped) = rel
                .strip_prefix(root.as_str())
                .map(|s| s.trim_start_matches(['/', '\\']))
            {
                rel = stripped;
                break;
            }
        }
        rel.replace('\\', "/")
    }
}

struct UnitAnalysis {
    record: UnitRecord,
    fragments: Vec<Fragment>,
    unit: Option<SourceUnit>,
}

enum UnitOutcome {
    Analyzed(Box<UnitAnalysis>),
    Excluded(ExcludedUnit),
}

fn analyze_unit(
    path: &Path,
    trimmer: &PathTrimmer,
    table: &MutationSpecTable,
    config: &AnalyzeConfig,
) -> UnitOutcome {
    let rel = trimmer.trim(&path.to_string_lossy());
    let unit = match load_source_unit(path) {
        Ok(u) => u,
        Err(e) => {
            return UnitOutcome::Excluded(ExcludedUnit { path: rel, reason: e.to_string() })
        }
    };
    let doc_stats = compute_doc_stats(&unit);
    match parse_scopes(&unit, table) {
        Ok(scopes) => {
            let mut records: Vec<MetricsRecord> = Vec::with_capacity(scopes.len());
            for scope in &scopes {
                let cfg = build_cfg(scope);
                match scope_metrics(scope, &cfg, config.policy) {
                    Ok(r) => records.push(r),
                    Err(e) => {
                        return UnitOutcome::Analyzed(Box::new(UnitAnalysis {
                            record: UnitRecord {
                                path: rel,
                                kind: unit.kind,
                                language: unit.language,
                                parse_error: Some(e.to_string()),
                                doc_stats,
                                scopes: Vec::new(),
                                file: None,
                            },
                            fragments: Vec::new(),
                            unit: Some(unit),
                        }))
                    }
                }
            }
            let fragments = clones::extract_blocks(&unit, &scopes, config.clone_min_statements);
            let file = Some(file_metrics(&records));
            UnitOutcome::Analyzed(Box::new(UnitAnalysis {
                record: UnitRecord {
                    path: rel,
                    kind: unit.kind,
                    language: unit.language,
                    parse_error: None,
                    doc_stats,
                    scopes: records,
                    file,
                },
                fragments,
                unit: Some(unit),
            }))
        }
        Err(e) => UnitOutcome::Analyzed(Box::new(UnitAnalysis {
            record: UnitRecord {
                path: rel,
                kind: unit.kind,
                language: unit.language,
                parse_error: Some(e.to_string()),
                doc_stats,
                scopes: Vec::new(),
                file: None,
            },
            fragments: Vec::new(),
            unit: Some(unit),
        })),
    }
}

/// Analyze one corpus root with `workers` parallel workers.
///
/// Returns `Error::EmptyCorpus` when no `.py`/`.ipynb` file is found.
pub fn analyze_corpus(
    root: &Path,
    config: &AnalyzeConfig,
    table: &MutationSpecTable,
    workers: usize,
) -> Result<CorpusReport> {
    config.validate()?;
    if !root.exists() {
        return Err(Error::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "corpus root not found"),
        });
    }
    let discovered = discover_files(root);
    if discovered.is_empty() {
        return Err(Error::EmptyCorpus { root: root.to_path_buf() });
    }
    let discovered_files = discovered.len();
    let paths = match config.sample {
        Some(n) => sample_paths(discovered, n, config.seed.unwrap_or(0)),
        None => discovered,
    };

    let trimmer = PathTrimmer::new(&[root]);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut outcomes: Vec<(String, UnitOutcome)> = pool.install(|| {
        paths
            .par_iter()
            .map(|p| {
                let outcome = analyze_unit(p, &trimmer, table, config);
                let key = match &outcome {
                    UnitOutcome::Analyzed(a) => a.record.path.clone(),
                    UnitOutcome::Excluded(x) => x.path.clone(),
                };
                (key, outcome)
            })
            .collect()
    });
    // Merge order independence: sort by relative path.
    outcomes.sort_by(|a, b| a.0.cmp(&b.0));

    let mut units: Vec<UnitRecord> = Vec::new();
    let mut excluded: Vec<ExcludedUnit> = Vec::new();
    let mut fragments: Vec<Fragment> = Vec::new();
    let mut loaded_units: Vec<SourceUnit> = Vec::new();
    for (_, outcome) in outcomes {
        match outcome {
            UnitOutcome::Analyzed(a) => {
                units.push(a.record);
                fragments.extend(a.fragments);
                if let Some(u) = a.unit {
                    loaded_units.push(u);
                }
            }
            UnitOutcome::Excluded(x) => excluded.push(x),
        }
    }

    // Clone detection across the corpus.
    let unit_refs: Vec<&SourceUnit> = loaded_units.iter().collect();
    let (file_classes, file_clone_diffs) =
        clones::detect_file_clones(&unit_refs, config.clone_threshold);
    let block_classes = clones::detect_clone_classes(&fragments, config.clone_threshold);
    let high_impact = clones::filter_high_impact(
        &block_classes,
        config.clone_min_lines,
        config.clone_min_instances,
        Some(&file_classes),
    );

    let aggregates = compute_aggregates(&units);
    let analyzed_units = units.iter().filter(|u| u.parse_error.is_none()).count();
    let flagged_units = units.len() - analyzed_units;

    Ok(CorpusReport {
        root: root.to_string_lossy().into_owned(),
        discovered_files,
        analyzed_units,
        flagged_units,
        excluded_units: excluded.len(),
        block_clones: block_classes.iter().map(|c| summarize_class(c, &trimmer)).collect(),
        high_impact_clones: high_impact.iter().map(|c| summarize_class(c, &trimmer)).collect(),
        file_clones: file_classes.iter().map(|c| summarize_class(c, &trimmer)).collect(),
        file_clone_diffs: trim_diff_paths(file_clone_diffs, &trimmer),
        units,
        excluded,
        aggregates,
    })
}

fn trim_diff_paths(mut diffs: Vec<FileCloneDiffs>, trimmer: &PathTrimmer) -> Vec<FileCloneDiffs> {
    for d in &mut diffs {
        for inst in &mut d.diffs {
            inst.unit = trimmer.trim(&inst.unit);
        }
    }
    diffs
}

fn compute_aggregates(units: &[UnitRecord]) -> BTreeMap<String, StatSummary> {
    let mut lifetimes = Vec::new();
    let mut ratio_opt = Vec::new();
    let mut ratio_cons = Vec::new();
    let mut diff_opt = Vec::new();
    let mut diff_cons = Vec::new();
    let mut dnorm_opt = Vec::new();
    let mut dnorm_cons = Vec::new();
    let mut stmt_counts = Vec::new();
    let mut md_cells = Vec::new();
    let mut md_words = Vec::new();
    let mut comments = Vec::new();
    let mut loc = Vec::new();
    let mut code_cells = Vec::new();

    for unit in units {
        md_cells.push(unit.doc_stats.markdown_cell_count as f64);
        md_words.push(unit.doc_stats.markdown_word_count as f64);
        comments.push(unit.doc_stats.inline_comment_count as f64);
        loc.push(unit.doc_stats.code_loc as f64);
        code_cells.push(unit.doc_stats.code_cell_count as f64);
        for scope in &unit.scopes {
            lifetimes.extend(scope.lifetimes.values().map(|&v| v as f64));
            if !scope.empty_scope {
                stmt_counts.push(scope.statement_count as f64);
            }
            if let Some(v) = scope.mutating_ratio_opt {
                ratio_opt.push(v);
            }
            if let Some(v) = scope.mutating_ratio_cons {
                ratio_cons.push(v);
            }
            if !scope.empty_scope {
                if let Some(v) = scope.diffusion_opt {
                    diff_opt.push(v as f64);
                }
                if let Some(v) = scope.diffusion_cons {
                    diff_cons.push(v as f64);
                }
            }
            if let Some(v) = scope.diffusion_normalized_opt {
                dnorm_opt.push(v);
            }
            if let Some(v) = scope.diffusion_normalized_cons {
                dnorm_cons.push(v);
            }
        }
    }

    let mut out = BTreeMap::new();
    out.insert("code_cell_count".to_string(), aggregate_stats(&code_cells));
    out.insert("code_loc".to_string(), aggregate_stats(&loc));
    out.insert("diffusion_cons".to_string(), aggregate_stats(&diff_cons));
    out.insert("diffusion_normalized_cons".to_string(), aggregate_stats(&dnorm_cons));
    out.insert("diffusion_normalized_opt".to_string(), aggregate_stats(&dnorm_opt));
    out.insert("diffusion_opt".to_string(), aggregate_stats(&diff_opt));
    out.insert("inline_comment_count".to_string(), aggregate_stats(&comments));
    out.insert("lifetime".to_string(), aggregate_stats(&lifetimes));
    out.insert("markdown_cell_count".to_string(), aggregate_stats(&md_cells));
    out.insert("markdown_word_count".to_string(), aggregate_stats(&md_words));
    out.insert("mutating_ratio_cons".to_string(), aggregate_stats(&ratio_cons));
    out.insert("mutating_ratio_opt".to_string(), aggregate_stats(&ratio_opt));
    out.insert("statement_count".to_string(), aggregate_stats(&stmt_counts));
    out
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

/// Output format for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("format must be json or csv (got \"{other}\")"))),
        }
    }
}

/// Serialize a report. JSON is a single document with stable key order;
/// CSV has one row per (unit, scope) plus a `<file>` roll-up row per unit,
/// in the column order documented in the README.
pub fn emit_report(report: &ComparisonReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => emit_json(report),
        ReportFormat::Csv => emit_csv(report),
    }
}

pub fn emit_json(report: &ComparisonReport) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(report)
        .map_err(|e| Error::Config(format!("serialization: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// CSV column order (fixed).
pub const CSV_COLUMNS: &[&str] = &[
    "corpus_root",
    "unit",
    "scope",
    "scope_kind",
    "statement_count",
    "lifetime_count",
    "lifetime_mean",
    "lifetime_max",
    "mutating_ratio_opt",
    "mutating_ratio_cons",
    "diffusion_opt",
    "diffusion_cons",
    "diffusion_normalized_opt",
    "diffusion_normalized_cons",
    "markdown_cell_count",
    "markdown_word_count",
    "inline_comment_count",
    "code_loc",
    "code_cell_count",
];

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn emit_csv(report: &ComparisonReport) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    writer.write_record(CSV_COLUMNS).map_err(io_err)?;
    for corpus in &report.corpora {
        for unit in &corpus.units {
            for scope in &unit.scopes {
                let lifetime_values: Vec<f64> =
                    scope.lifetimes.values().map(|&v| v as f64).collect();
                let (lt_mean, lt_max) = if lifetime_values.is_empty() {
                    (None, None)
                } else {
                    (
                        Some(lifetime_values.iter().sum::<f64>() / lifetime_values.len() as f64),
                        lifetime_values.iter().cloned().reduce(f64::max),
                    )
                };
                writer
                    .write_record([
                        corpus.root.as_str(),
                        unit.path.as_str(),
                        scope.scope.as_str(),
                        scope.scope_kind.as_str(),
                        &scope.statement_count.to_string(),
                        &scope.lifetimes.len().to_string(),
                        &fmt_opt_f64(lt_mean),
                        &fmt_opt_f64(lt_max),
                        &fmt_opt_f64(scope.mutating_ratio_opt),
                        &fmt_opt_f64(scope.mutating_ratio_cons),
                        &fmt_opt_usize(scope.diffusion_opt),
                        &fmt_opt_usize(scope.diffusion_cons),
                        &fmt_opt_f64(scope.diffusion_normalized_opt),
                        &fmt_opt_f64(scope.diffusion_normalized_cons),
                        "",
                        "",
                        "",
                        "",
                        "",
                    ])
                    .map_err(io_err)?;
            }
            let file = unit.file.clone().unwrap_or_default();
            writer
                .write_record([
                    corpus.root.as_str(),
                    unit.path.as_str(),
                    "<file>",
                    "file",
                    &file.statement_count.to_string(),
                    "",
                    "",
                    "",
                    &fmt_opt_f64(file.mutating_ratio_opt),
                    &fmt_opt_f64(file.mutating_ratio_cons),
                    &fmt_opt_usize(file.diffusion_opt),
                    &fmt_opt_usize(file.diffusion_cons),
                    &fmt_opt_f64(file.diffusion_normalized_opt),
                    &fmt_opt_f64(file.diffusion_normalized_cons),
                    &unit.doc_stats.markdown_cell_count.to_string(),
                    &unit.doc_stats.markdown_word_count.to_string(),
                    &unit.doc_stats.inline_comment_count.to_string(),
                    &unit.doc_stats.code_loc.to_string(),
                    &unit.doc_stats.code_cell_count.to_string(),
                ])
                .map_err(io_err)?;
        }
    }
    writer
        .into_inner()
        .map_err(|e| Error::Config(format!("csv: {e}")))
}

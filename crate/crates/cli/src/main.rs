//! `nbqual` — code-quality metrics for Python scripts and Jupyter notebooks.
//!
//! Subcommands: `analyze` (full metrics + clone report over one or more
//! corpus roots), `clones` (clone detection only), `convert` (notebook to
//! analyzable script), `docstats` (documentation statistics only).
//!
//! Exit codes: 0 on success, 1 on fatal configuration or I/O errors, 2 on
//! an empty corpus.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::Serialize;

use nbqual_core::cfg::{build_cfg, parse_scopes};
use nbqual_core::clones;
use nbqual_core::docstats::{compute_doc_stats, DocStats};
use nbqual_core::error::{Error, Result};
use nbqual_core::ingest::{load_source_unit, SourceUnit, UnitKind};
use nbqual_core::metrics::PolicyChoice;
use nbqual_core::mutation::MutationSpecTable;
use nbqual_core::report::{
    self, aggregate_stats, analyze_corpus, AnalyzeConfig, CloneClassSummary, ComparisonReport,
    ReportFormat, StatSummary,
};

#[derive(Parser)]
#[command(
    name = "nbqual",
    version,
    about = "Code-quality metrics for Python scripts and Jupyter notebooks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full analysis: documentation stats, lifetimes, mutation metrics, clones
    Analyze {
        /// Corpus root directories (several roots produce side-by-side reports)
        #[arg(required = true)]
        roots: Vec<PathBuf>,
        /// Mutation policy: optimistic, conservative, or both
        #[arg(long, default_value = "both")]
        policy: String,
        /// Analyze a random sample of N files per root
        #[arg(long)]
        sample: Option<usize>,
        /// Seed for the sampler (default 0)
        #[arg(long)]
        seed: Option<u64>,
        /// Output format: json or csv
        #[arg(long, default_value = "json")]
        format: String,
        /// Output file (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Clone similarity threshold
        #[arg(long, default_value_t = 0.7)]
        threshold: f64,
        /// Minimum lines for high-impact clone classes
        #[arg(long, default_value_t = 10)]
        min_lines: usize,
        /// Minimum instances for high-impact clone classes
        #[arg(long, default_value_t = 3)]
        min_instances: usize,
        /// Minimum statements for block fragments
        #[arg(long, default_value_t = 3)]
        min_statements: usize,
        /// Parallel workers (report bytes are identical for any count)
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Extra mutation spec table (TSV) merged over the defaults
        #[arg(long)]
        spec_table: Option<PathBuf>,
        /// Write per-scope CFGs as DOT files into this directory
        #[arg(long)]
        dump_cfg_dot: Option<PathBuf>,
    },
    /// Detect near-miss code clones
    Clones {
        #[arg(required = true)]
        roots: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.7)]
        threshold: f64,
        #[arg(long, default_value_t = 10)]
        min_lines: usize,
        #[arg(long, default_value_t = 3)]
        min_instances: usize,
        #[arg(long, default_value_t = 3)]
        min_statements: usize,
        /// Also detect file-level clones and report per-instance diffs
        #[arg(long)]
        file_level: bool,
        /// Export converted units for an external NiCad run
        #[arg(long)]
        export_nicad: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        spec_table: Option<PathBuf>,
    },
    /// Convert a notebook into an analyzable Python script
    Convert {
        notebook: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Documentation statistics only
    Docstats {
        #[arg(required = true)]
        roots: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Analyze {
            roots,
            policy,
            sample,
            seed,
            format,
            out,
            threshold,
            min_lines,
            min_instances,
            min_statements,
            workers,
            spec_table,
            dump_cfg_dot,
        } => {
            let config = AnalyzeConfig {
                policy: PolicyChoice::from_str(&policy)?,
                sample,
                seed,
                clone_threshold: threshold,
                clone_min_lines: min_lines,
                clone_min_instances: min_instances,
                clone_min_statements: min_statements,
            };
            config.validate()?;
            let format = ReportFormat::from_str(&format)?;
            let table = load_table(spec_table.as_deref())?;
            let mut corpora = Vec::new();
            for root in &roots {
                corpora.push(analyze_corpus(root, &config, &table, workers)?);
            }
            if let Some(dir) = &dump_cfg_dot {
                dump_cfgs(&roots, &table, dir)?;
            }
            let report = ComparisonReport::new(config, corpora);
            write_output(out.as_deref(), &report::emit_report(&report, format)?)
        }
        Command::Clones {
            roots,
            threshold,
            min_lines,
            min_instances,
            min_statements,
            file_level,
            export_nicad,
            out,
            spec_table,
        } => {
            let config = AnalyzeConfig {
                clone_threshold: threshold,
                clone_min_lines: min_lines,
                clone_min_instances: min_instances,
                clone_min_statements: min_statements,
                ..AnalyzeConfig::default()
            };
            config.validate()?;
            let table = load_table(spec_table.as_deref())?;
            run_clones(&roots, &config, &table, file_level, export_nicad.as_deref(), out.as_deref())
        }
        Command::Convert { notebook, out } => {
            let unit = load_source_unit(&notebook)?;
            write_output(out.as_deref(), unit.text.as_bytes())
        }
        Command::Docstats { roots, out } => run_docstats(&roots, out.as_deref()),
    }
}

fn load_table(path: Option<&Path>) -> Result<MutationSpecTable> {
    match path {
        Some(p) => MutationSpecTable::with_overrides_from(p),
        None => Ok(MutationSpecTable::default()),
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|source| Error::Io { path: PathBuf::from("<stdout>"), source })
        }
    }
}

/// Load every unit under the roots, keeping per-file failures as reasons.
fn load_units(roots: &[PathBuf]) -> Result<(Vec<SourceUnit>, Vec<(String, String)>)> {
    let mut units = Vec::new();
    let mut failures = Vec::new();
    let mut discovered_any = false;
    for root in roots {
        if !root.exists() {
            return Err(Error::Io {
                path: root.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "corpus root not found"),
            });
        }
        for path in report::discover_files(root) {
            discovered_any = true;
            match load_source_unit(&path) {
                Ok(u) => units.push(u),
                Err(e) => failures.push((path.to_string_lossy().into_owned(), e.to_string())),
            }
        }
    }
    if !discovered_any {
        return Err(Error::EmptyCorpus {
            root: roots.first().cloned().unwrap_or_default(),
        });
    }
    Ok((units, failures))
}

#[derive(Serialize)]
struct CloneReport {
    schema_version: u32,
    tool_version: String,
    threshold: f64,
    min_lines: usize,
    min_instances: usize,
    min_statements: usize,
    block_clones: Vec<CloneClassSummary>,
    high_impact_clones: Vec<CloneClassSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    file_clones: Option<Vec<CloneClassSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    file_clone_diffs: Option<Vec<clones::FileCloneDiffs>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    exported: Vec<String>,
    skipped: Vec<SkippedUnit>,
}

#[derive(Serialize)]
struct SkippedUnit {
    path: String,
    reason: String,
}

fn run_clones(
    roots: &[PathBuf],
    config: &AnalyzeConfig,
    table: &MutationSpecTable,
    file_level: bool,
    export_dir: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let (units, mut failures) = load_units(roots)?;
    let root_refs: Vec<&Path> = roots.iter().map(PathBuf::as_path).collect();

    let mut fragments = Vec::new();
    for unit in &units {
        match parse_scopes(unit, table) {
            Ok(scopes) => {
                fragments.extend(clones::extract_blocks(unit, &scopes, config.clone_min_statements))
            }
            Err(e) => failures.push((unit.path.to_string_lossy().into_owned(), e.to_string())),
        }
    }

    let unit_refs: Vec<&SourceUnit> = units.iter().collect();
    let (file_classes, file_diffs) = if file_level {
        let (c, d) = clones::detect_file_clones(&unit_refs, config.clone_threshold);
        (Some(c), Some(d))
    } else {
        (None, None)
    };
    let block_classes = clones::detect_clone_classes(&fragments, config.clone_threshold);
    let high_impact = clones::filter_high_impact(
        &block_classes,
        config.clone_min_lines,
        config.clone_min_instances,
        file_classes.as_deref(),
    );

    let exported = match export_dir {
        Some(dir) => clones::export_units(&unit_refs, dir)?
            .into_iter()
            .map(|p| p.to_string_lossy().into_owned())
            .collect(),
        None => Vec::new(),
    };

    let report = CloneReport {
        schema_version: report::SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        threshold: config.clone_threshold,
        min_lines: config.clone_min_lines,
        min_instances: config.clone_min_instances,
        min_statements: config.clone_min_statements,
        block_clones: report::summarize_clone_classes(&block_classes, &root_refs),
        high_impact_clones: report::summarize_clone_classes(&high_impact, &root_refs),
        file_clones: file_classes
            .as_deref()
            .map(|c| report::summarize_clone_classes(c, &root_refs)),
        file_clone_diffs: file_diffs
            .map(|d| report::relativize_file_clone_diffs(d, &root_refs)),
        exported,
        skipped: failures
            .into_iter()
            .map(|(path, reason)| SkippedUnit { path, reason })
            .collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&report)
        .map_err(|e| Error::Config(format!("serialization: {e}")))?;
    bytes.push(b'\n');
    write_output(out, &bytes)
}

#[derive(Serialize)]
struct DocStatsReport {
    schema_version: u32,
    tool_version: String,
    units: Vec<DocStatsRecord>,
    aggregates: BTreeMap<String, StatSummary>,
    skipped: Vec<SkippedUnit>,
}

#[derive(Serialize)]
struct DocStatsRecord {
    path: String,
    kind: UnitKind,
    #[serde(flatten)]
    stats: DocStats,
}

fn run_docstats(roots: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let (units, failures) = load_units(roots)?;
    let mut records = Vec::new();
    for unit in &units {
        records.push(DocStatsRecord {
            path: unit.path.to_string_lossy().into_owned(),
            kind: unit.kind,
            stats: compute_doc_stats(unit),
        });
    }
    records.sort_by(|a, b| a.path.cmp(&b.path));

    let mut aggregates = BTreeMap::new();
    let column = |f: &dyn Fn(&DocStats) -> usize| -> Vec<f64> {
        records.iter().map(|r| f(&r.stats) as f64).collect()
    };
    aggregates.insert(
        "code_cell_count".to_string(),
        aggregate_stats(&column(&|s| s.code_cell_count)),
    );
    aggregates.insert("code_loc".to_string(), aggregate_stats(&column(&|s| s.code_loc)));
    aggregates.insert(
        "inline_comment_count".to_string(),
        aggregate_stats(&column(&|s| s.inline_comment_count)),
    );
    aggregates.insert(
        "markdown_cell_count".to_string(),
        aggregate_stats(&column(&|s| s.markdown_cell_count)),
    );
    aggregates.insert(
        "markdown_word_count".to_string(),
        aggregate_stats(&column(&|s| s.markdown_word_count)),
    );

    let report = DocStatsReport {
        schema_version: report::SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        units: records,
        aggregates,
        skipped: failures
            .into_iter()
            .map(|(path, reason)| SkippedUnit { path, reason })
            .collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&report)
        .map_err(|e| Error::Config(format!("serialization: {e}")))?;
    bytes.push(b'\n');
    write_output(out, &bytes)
}

fn dump_cfgs(roots: &[PathBuf], table: &MutationSpecTable, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for root in roots {
        for path in report::discover_files(root) {
            let Ok(unit) = load_source_unit(&path) else { continue };
            let Ok(scopes) = parse_scopes(&unit, table) else { continue };
            let stem = unit.stem();
            for scope in &scopes {
                let cfg = build_cfg(scope);
                let safe_scope = scope.name.replace(['<', '>'], "").replace(['.', '@'], "_");
                let file = dir.join(format!("{stem}__{safe_scope}.dot"));
                std::fs::write(&file, cfg.to_dot(scope)).map_err(|source| Error::Io {
                    path: file.clone(),
                    source,
                })?;
            }
        }
    }
    Ok(())
}

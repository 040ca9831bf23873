//! Static analysis of Python scripts and Jupyter notebooks: variable
//! lifetimes, mutation frequency and diffusion, near-miss code clones, and
//! documentation statistics.
//!
//! The pipeline: [`ingest`] loads a unit and converts notebooks to
//! analyzable scripts, [`cfg`] parses scopes and builds per-scope control
//! flow graphs, [`mutation`] classifies statements into DEF/UPDATE sets,
//! [`metrics`] runs the union-meet dataflow behind the diffusion score,
//! [`clones`] detects near-miss clones, and [`report`] walks a corpus and
//! emits JSON/CSV reports.

pub mod cfg;
pub mod clones;
pub mod docstats;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod mutation;
pub mod report;
pub mod scan;

pub use cfg::{build_cfg, parse_scopes, Cfg, Scope, Statement};
pub use clones::{detect_clone_classes, CloneClass, Fragment};
pub use docstats::{compute_doc_stats, DocStats};
pub use error::{Error, Result};
pub use ingest::{load_source_unit, SourceUnit};
pub use metrics::{MetricsRecord, MutationState, PolicyChoice};
pub use mutation::{MutationSpecTable, Policy};
pub use report::{analyze_corpus, emit_report, AnalyzeConfig, ComparisonReport, CorpusReport};


//! Loading Python scripts and Jupyter notebooks into a uniform parsed form.
//!
//! Scripts pass through verbatim as a single synthetic code cell. Notebooks
//! (nbformat-4 JSON) are converted into an analyzable script in which each
//! code cell becomes a `cell_NNNN` function, with a line map recording the
//! originating cell and cell-line of every emitted line.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Indentation prefix applied to cell-function body lines.
pub const BODY_INDENT: &str = "    ";

/// Kind of a loaded source unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Script,
    Notebook,
}

/// Kind of a notebook cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Code,
    Markdown,
    Raw,
}

/// Language tag derived from notebook metadata. Scripts are always Python;
/// notebooks without language metadata are analyzed but tagged `Unknown`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageTag {
    Python,
    Unknown,
}

/// One notebook cell (scripts have exactly one synthetic code cell).
#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    /// 0-based ordinal, consecutive within a unit.
    pub index: usize,
    pub kind: CellKind,
    /// Source lines without trailing newline characters.
    pub source: Vec<String>,
    pub outputs_present: bool,
}

/// Provenance of one analyzable-text line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LineOrigin {
    /// 0-based cell index.
    pub cell: usize,
    /// 0-based line within the cell source.
    pub line: usize,
}

/// A parsed script or notebook with exact line provenance.
///
/// `text` is the analyzable Python source. For scripts it is the file
/// content verbatim; for notebooks it is the cell-function conversion.
/// `line_map` maps 1-based line numbers of `text` to their origin; lines
/// absent from the map are synthetic (function headers, blank separators,
/// placeholder statements).
#[derive(Debug, Clone, Serialize)]
pub struct SourceUnit {
    pub path: PathBuf,
    pub kind: UnitKind,
    pub language: LanguageTag,
    pub cells: Vec<Cell>,
    pub text: String,
    pub line_map: BTreeMap<usize, LineOrigin>,
    /// 1-based lines holding the `pass` placeholder emitted for code cells
    /// with no statements; excluded from every metric denominator.
    pub placeholder_lines: BTreeSet<usize>,
}

impl SourceUnit {
    /// Number of code cells.
    pub fn code_cell_count(&self) -> usize {
        self.cells.iter().filter(|c| c.kind == CellKind::Code).count()
    }

    /// File stem used for export layouts.
    pub fn stem(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "unit".to_string())
    }
}

// ---------------------------------------------------------------------------
// nbformat-4 container
// ---------------------------------------------------------------------------

/// `source` may be a single string or a list of strings; both are accepted.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum StringOrLines {
    One(String),
    Many(Vec<String>),
}

impl StringOrLines {
    fn into_lines(self) -> Vec<String> {
        let joined = match self {
            StringOrLines::One(s) => s,
            StringOrLines::Many(v) => v.concat(),
        };
        joined.lines().map(str::to_owned).collect()
    }
}

fn default_source() -> StringOrLines {
    StringOrLines::One(String::new())
}

#[derive(Debug, Deserialize)]
struct RawCell {
    cell_type: String,
    #[serde(default = "default_source")]
    source: StringOrLines,
    #[serde(default)]
    outputs: Option<Vec<serde_json::Value>>,
}

#[derive(Debug, Default, Deserialize)]
struct RawKernelspec {
    #[serde(default)]
    language: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct RawLanguageInfo {
    #[serde(default)]
    name: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct RawMetadata {
    #[serde(default)]
    kernelspec: Option<RawKernelspec>,
    #[serde(default)]
    language_info: Option<RawLanguageInfo>,
}

#[derive(Debug, Deserialize)]
struct RawNotebook {
    cells: Vec<RawCell>,
    #[serde(default)]
    metadata: RawMetadata,
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Load a `.py` script or `.ipynb` notebook from disk.
pub fn load_source_unit(path: &Path) -> Result<SourceUnit> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let content = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match ext.as_str() {
        "py" => Ok(script_unit(path, content)),
        "ipynb" => notebook_unit(path, &content),
    _ => Err(Error::UnsupportedFileType { path: path.to_path_buf() }),
    }
}

/// Build a unit from script content (one synthetic code cell, identity map).
pub fn script_unit(path: &Path, content: String) -> SourceUnit {
    let lines: Vec<String> = content.lines().map(str::to_owned).collect();
    let line_map = (1..=lines.len())
        .map(|n| (n, LineOrigin { cell: 0, line: n - 1 }))
        .collect();
    SourceUnit {
        path: path.to_path_buf(),
        kind: UnitKind::Script,
        language: LanguageTag::Python,
        cells: vec![Cell {
            index: 0,
            kind: CellKind::Code,
            source: lines,
            outputs_present: false,
        }],
        text: content,
        line_map,
        placeholder_lines: BTreeSet::new(),
    }
}

/// Build a unit from notebook JSON content.
pub fn notebook_unit(path: &Path, content: &str) -> Result<SourceUnit> {
    let raw: RawNotebook =
        serde_json::from_str(content).map_err(|e| Error::MalformedContainer {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;

    let language = raw
        .metadata
        .language_info
        .as_ref()
        .and_then(|l| l.name.clone())
        .or_else(|| raw.metadata.kernelspec.as_ref().and_then(|k| k.language.clone()));
    let language = match language {
        Some(name) => {
            if name.eq_ignore_ascii_case("python") {
                LanguageTag::Python
            } else {
                return Err(Error::UnsupportedKernel {
                    path: path.to_path_buf(),
                    language: name,
                });
            }
        }
        None => LanguageTag::Unknown,
    };

    let cells: Vec<Cell> = raw
        .cells
        .into_iter()
        .enumerate()
        .map(|(index, c)| Cell {
            index,
            kind: match c.cell_type.as_str() {
                "code" => CellKind::Code,
                "markdown" => CellKind::Markdown,
                _ => CellKind::Raw,
            },
            source: c.source.into_lines(),
            outputs_present: c.outputs.map(|o| !o.is_empty()).unwrap_or(false),
        })
        .collect();

    let conversion = convert_cells(&cells);
    Ok(SourceUnit {
        path: path.to_path_buf(),
        kind: UnitKind::Notebook,
        language,
        cells,
        text: conversion.text,
        line_map: conversion.line_map,
        placeholder_lines: conversion.placeholder_lines,
    })
}

// ---------------------------------------------------------------------------
// Conversion
// ---------------------------------------------------------------------------

/// Result of converting notebook cells to an analyzable script.
#[derive(Debug, Clone)]
pub struct Conversion {
    pub text: String,
    pub line_map: BTreeMap<usize, LineOrigin>,
    pub placeholder_lines: BTreeSet<usize>,
}

/// True when a cell line is a notebook directive (`%magic`, `%%cell-magic`,
/// `!shell`) that is not valid Python.
pub fn is_directive(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with('%') || t.starts_with('!')
}

/// Wrapper function name for code cell `index`.
pub fn cell_function_name(index: usize) -> String {
    format!("cell_{index:04}")
}

/// Convert a notebook's cells into an analyzable script.
///
/// Each code cell `i` becomes `def cell_<i>():` with the cell source as the
/// body, indented one level. Directive lines are replaced by `# `-prefixed
/// comment lines of equal count so line numbers stay aligned. Markdown and
/// raw cells contribute no lines. Code cells with no statement lines get a
/// trailing `pass` placeholder so the function still parses.
pub fn convert_notebook_to_script(unit: &SourceUnit) -> Conversion {
    convert_cells(&unit.cells)
}

fn convert_cells(cells: &[Cell]) -> Conversion {
    let mut text = String::new();
    let mut line_map = BTreeMap::new();
    let mut placeholder_lines = BTreeSet::new();
    let mut line_no = 1usize;
    let mut first = true;

    for cell in cells {
        if cell.kind != CellKind::Code {
            continue;
        }
        if !first {
            // Synthetic blank separator between cell functions.
            text.push('\n');
            line_no += 1;
        }
        first = false;

        text.push_str(&format!("def {}():\n", cell_function_name(cell.index)));
        line_no += 1;

        let mut has_statement = false;
        for (cell_line, line) in cell.source.iter().enumerate() {
            // Blank lines pass through unindented so their content survives
            // the round trip.
            let emitted = if is_directive(line) {
                format!("{BODY_INDENT}# {line}")
            } else if line.trim().is_empty() {
                line.clone()
            } else {
                format!("{BODY_INDENT}{line}")
            };
            if !is_directive(line) && !line.trim().is_empty() && !line.trim_start().starts_with('#')
            {
                has_statement = true;
            }
            text.push_str(&emitted);
            text.push('\n');
            line_map.insert(line_no, LineOrigin { cell: cell.index, line: cell_line });
            line_no += 1;
        }

        if !has_statement {
            text.push_str(BODY_INDENT);
            text.push_str("pass\n");
            placeholder_lines.insert(line_no);
            line_no += 1;
        }
    }

    Conversion { text, line_map, placeholder_lines }
}

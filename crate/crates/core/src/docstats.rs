//! Quantitative documentation statistics for a source unit.
//!
//! Counts only: Markdown cells and their word counts, inline comments in
//! code cells, non-empty lines of code, and code cell counts. A "word" is a
//! maximal run of non-whitespace characters, so Markdown syntax characters
//! count as part of words. Comment detection is token-aware: a `#` inside a
//! string literal never counts.

use serde::Serialize;

use crate::ingest::{CellKind, SourceUnit};
use crate::scan;

/// Documentation statistics for one unit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DocStats {
    pub markdown_cell_count: usize,
    pub markdown_word_count: usize,
    pub inline_comment_count: usize,
    /// Non-blank, non-comment-only lines across code cells.
    pub code_loc: usize,
    pub code_cell_count: usize,
}

/// Compute documentation statistics over a loaded unit.
///
/// Shebang and encoding-declaration lines (first two physical lines of the
/// unit's leading code cell) are not counted as comments or code.
pub fn compute_doc_stats(unit: &SourceUnit) -> DocStats {
    let mut stats = DocStats::default();
    let mut first_code_cell = true;

    for cell in &unit.cells {
        match cell.kind {
            CellKind::Markdown => {
                stats.markdown_cell_count += 1;
                stats.markdown_word_count += cell
                    .source
                    .iter()
                    .map(|l| l.split_whitespace().count())
                    .sum::<usize>();
            }
            CellKind::Code => {
                stats.code_cell_count += 1;
                let scanned = scan::scan_source(&cell.source);
                for (i, line) in scanned.iter().enumerate() {
                    let header_exempt = first_code_cell
                        && i < 2
                        && ((i == 0 && scan::is_shebang(&cell.source[i]))
                            || scan::is_encoding_decl(&cell.source[i]));
                    if header_exempt {
                        continue;
                    }
                    if line.has_comment {
                        stats.inline_comment_count += 1;
                    }
                    if !line.is_blank() {
                        stats.code_loc += 1;
                    }
                }
                first_code_cell = false;
            }
            CellKind::Raw => {}
        }
    }

    stats
}

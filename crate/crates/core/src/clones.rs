//! Near-miss code clone detection at block and file granularity.
//!
//! Fragments are compared after line normalization (comments and blank
//! lines stripped, whitespace collapsed, indentation reduced to one space
//! per level). Similarity is the longest common subsequence over whole
//! normalized lines divided by the longer fragment's length; near-miss
//! tolerance comes from the similarity threshold, not from identifier
//! renaming. Classes are connected components of the pairwise link graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cfg::{Node, Scope, StatementKind};
use crate::error::{Error, Result};
use crate::ingest::SourceUnit;
use crate::scan;

/// Clone granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Block,
    File,
}

/// A candidate code fragment.
#[derive(Debug, Clone, Serialize)]
pub struct Fragment {
    /// Path of the owning unit.
    pub unit: String,
    pub granularity: Granularity,
    /// Inclusive line range in the unit's analyzable text.
    pub start_line: usize,
    pub end_line: usize,
    /// Originating cell index range for notebook fragments.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_range: Option<(usize, usize)>,
    /// Normalized content (see [`normalize_code`]).
    #[serde(skip)]
    pub normalized_lines: Vec<String>,
    /// Analyzable-text line number of each normalized line.
    #[serde(skip)]
    pub line_numbers: Vec<usize>,
    /// Number of normalized lines.
    pub line_count: usize,
}

/// A group of similar fragments.
#[derive(Debug, Clone, Serialize)]
pub struct CloneClass {
    pub id: String,
    pub granularity: Granularity,
    pub instances: Vec<Fragment>,
    /// All instances are byte-identical after normalization.
    pub exact: bool,
    pub min_similarity: f64,
    pub mean_similarity: f64,
}

impl CloneClass {
    /// Normalized line count of the smallest instance.
    pub fn min_instance_lines(&self) -> usize {
        self.instances.iter().map(|f| f.line_count).min().unwrap_or(0)
    }
}

// ---------------------------------------------------------------------------
// Normalization and similarity
// ---------------------------------------------------------------------------

fn indent_width(line: &str) -> usize {
    let mut width = 0usize;
    for c in line.chars() {
        match c {
            ' ' => width += 1,
            '\t' => width = (width / 8 + 1) * 8,
            _ => break,
        }
    }
    width
}

/// Normalize source lines for comparison: strip comments and blank lines,
/// collapse internal whitespace to single spaces, and canonicalize
/// indentation to one space per nesting level. Identifiers and literals
/// are preserved.
pub fn normalize_code<S: AsRef<str>>(lines: &[S]) -> Vec<String> {
    normalize_numbered(lines, 1).into_iter().map(|(_, l)| l).collect()
}

/// Like [`normalize_code`], but remembers the 1-based line number (offset
/// by `first_line`) of each surviving line.
pub fn normalize_numbered<S: AsRef<str>>(lines: &[S], first_line: usize) -> Vec<(usize, String)> {
    let scanned = scan::scan_source(lines);
    let mut out = Vec::new();
    let mut indent_stack: Vec<usize> = vec![0];
    for (i, scanned_line) in scanned.iter().enumerate() {
        if scanned_line.is_blank() {
            continue;
        }
        let code = &scanned_line.code;
        let width = indent_width(code);
        if width > *indent_stack.last().unwrap() {
            indent_stack.push(width);
        } else {
            while *indent_stack.last().unwrap() > width {
                indent_stack.pop();
            }
        }
        let depth = indent_stack.len() - 1;
        let collapsed = code.split_whitespace().collect::<Vec<_>>().join(" ");
        let mut line = String::with_capacity(depth + collapsed.len());
        for _ in 0..depth {
            line.push(' ');
        }
        line.push_str(&collapsed);
        out.push((first_line + i, line));
    }
    out
}

/// Length of the longest common subsequence over interned lines.
fn lcs_len(a: &[u32], b: &[u32]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut curr = vec![0usize; short.len() + 1];
    for &x in long {
        for (j, &y) in short.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
        curr[0] = 0;
    }
    prev[short.len()]
}

fn intern_pair(a: &[String], b: &[String]) -> (Vec<u32>, Vec<u32>) {
    fn intern<'x>(lines: &'x [String], ids: &mut HashMap<&'x str, u32>) -> Vec<u32> {
        lines
            .iter()
            .map(|l| {
                let next = ids.len() as u32;
                *ids.entry(l.as_str()).or_insert(next)
            })
            .collect()
    }
    let mut ids: HashMap<&str, u32> = HashMap::new();
    let ia = intern(a, &mut ids);
    let ib = intern(b, &mut ids);
    (ia, ib)
}

/// `|LCS(a, b)| / max(|a|, |b|)` over whole normalized lines; symmetric.
pub fn similarity(a: &Fragment, b: &Fragment) -> f64 {
    let (la, lb) = (a.normalized_lines.len(), b.normalized_lines.len());
    let longest = la.max(lb);
    if longest == 0 {
        return 0.0;
    }
    let (ia, ib) = intern_pair(&a.normalized_lines, &b.normalized_lines);
    lcs_len(&ia, &ib) as f64 / longest as f64
}

// ---------------------------------------------------------------------------
// Fragment extraction
// ---------------------------------------------------------------------------

fn unit_lines(unit: &SourceUnit) -> Vec<&str> {
    unit.text.lines().collect()
}

fn fragment_from_range(
    unit: &SourceUnit,
    lines: &[&str],
    granularity: Granularity,
    start_line: usize,
    end_line: usize,
) -> Option<Fragment> {
    if start_line == 0 || start_line > end_line || end_line > lines.len() {
        return None;
    }
    let slice = &lines[start_line - 1..end_line];
    let normalized = normalize_numbered(slice, start_line);
    if normalized.is_empty() {
        return None;
    }
    let cell_range = cell_range_of(unit, start_line, end_line);
    let (line_numbers, normalized_lines): (Vec<usize>, Vec<String>) =
        normalized.into_iter().unzip();
    Some(Fragment {
        unit: unit.path.to_string_lossy().into_owned(),
        granularity,
        start_line,
        end_line,
        cell_range,
        line_count: normalized_lines.len(),
        normalized_lines,
        line_numbers,
    })
}

fn cell_range_of(unit: &SourceUnit, start_line: usize, end_line: usize) -> Option<(usize, usize)> {
    let cells: BTreeSet<usize> = unit
        .line_map
        .range(start_line..=end_line)
        .map(|(_, origin)| origin.cell)
        .collect();
    match (cells.iter().next(), cells.iter().next_back()) {
        (Some(&lo), Some(&hi)) => Some((lo, hi)),
        _ => None,
    }
}

/// Extract block-granularity fragments: each cell-function body, each
/// top-level function body, and each maximal straight-line statement run
/// of at least `min_statements` statements. Candidates may overlap.
pub fn extract_blocks(
    unit: &SourceUnit,
    scopes: &[Scope],
    min_statements: usize,
) -> Vec<Fragment> {
    let lines = unit_lines(unit);
    let mut fragments = Vec::new();

    // Cell-function and top-level function bodies.
    for scope in scopes {
        let top_level_fn = scope.parent == Some(0);
        if !(top_level_fn || scope.is_cell) {
            continue;
        }
        let real: Vec<_> = scope.statements.iter().filter(|s| !s.is_placeholder).collect();
        if real.len() < min_statements {
            continue;
        }
        let start = real.iter().map(|s| s.span.0).min().unwrap();
        let end = real.iter().map(|s| s.span.1).max().unwrap();
        if let Some(f) = fragment_from_range(unit, &lines, Granularity::Block, start, end) {
            fragments.push(f);
        }
    }

    // Maximal straight-line runs within every scope.
    for scope in scopes {
        collect_runs(unit, &lines, scope, &scope.body, min_statements, &mut fragments);
    }

    fragments.sort_by(|a, b| {
        (a.start_line, a.end_line, &a.unit).cmp(&(b.start_line, b.end_line, &b.unit))
    });
    fragments.dedup_by(|a, b| a.start_line == b.start_line && a.end_line == b.end_line);
    fragments
}

fn collect_runs(
    unit: &SourceUnit,
    lines: &[&str],
    scope: &Scope,
    nodes: &[Node],
    min_statements: usize,
    out: &mut Vec<Fragment>,
) {
    let flush = |run: &mut Vec<usize>, out: &mut Vec<Fragment>| {
        if run.len() >= min_statements {
            let start = scope.statements[run[0]].span.0;
            let end = scope.statements[*run.last().unwrap()].span.1;
            if let Some(f) = fragment_from_range(unit, lines, Granularity::Block, start, end) {
                out.push(f);
            }
        }
        run.clear();
    };

    let mut run: Vec<usize> = Vec::new();
    for node in nodes {
        match node {
            Node::Stmt(i) => {
                let stmt = &scope.statements[*i];
                if stmt.is_placeholder {
                    continue;
                }
                // Definitions own nested bodies and control transfers end
                // the straight line; both break the run.
                if stmt.is_definition || stmt.kind == StatementKind::Control {
                    flush(&mut run, out);
                } else {
                    run.push(*i);
                }
            }
            Node::If { then_body, else_body, .. } => {
                flush(&mut run, out);
                collect_runs(unit, lines, scope, then_body, min_statements, out);
                collect_runs(unit, lines, scope, else_body, min_statements, out);
            }
            Node::While { body, else_body, .. } | Node::For { body, else_body, .. } => {
                flush(&mut run, out);
                collect_runs(unit, lines, scope, body, min_statements, out);
                collect_runs(unit, lines, scope, else_body, min_statements, out);
            }
            Node::With { body, .. } => {
                flush(&mut run, out);
                collect_runs(unit, lines, scope, body, min_statements, out);
            }
            Node::Match { arms, .. } => {
                flush(&mut run, out);
                for arm in arms {
                    collect_runs(unit, lines, scope, arm, min_statements, out);
                }
            }
            Node::Try { body, handlers, else_body, final_body } => {
                flush(&mut run, out);
                collect_runs(unit, lines, scope, body, min_statements, out);
                for h in handlers {
                    collect_runs(unit, lines, scope, &h.body, min_statements, out);
                }
                collect_runs(unit, lines, scope, else_body, min_statements, out);
                collect_runs(unit, lines, scope, final_body, min_statements, out);
            }
        }
    }
    flush(&mut run, out);
}

/// The whole unit as one file-granularity fragment.
pub fn file_fragment(unit: &SourceUnit) -> Option<Fragment> {
    let lines = unit_lines(unit);
    let n = lines.len();
    if n == 0 {
        return None;
    }
    fragment_from_range(unit, &lines, Granularity::File, 1, n)
}

// ---------------------------------------------------------------------------
// Grouping
// ---------------------------------------------------------------------------

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let root = self.find(self.0[x]);
            self.0[x] = root;
        }
        self.0[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn fragment_key(f: &Fragment) -> (String, usize, usize) {
    (f.unit.clone(), f.start_line, f.end_line)
}

/// Group fragments into clone classes: pairwise links where similarity is
/// at or above `threshold`, classes are connected components with at least
/// two members. Ids are deterministic over the sorted member order;
/// classes whose instances are all identical are flagged exact.
pub fn detect_clone_classes(fragments: &[Fragment], threshold: f64) -> Vec<CloneClass> {
    let n = fragments.len();
    let mut uf = UnionFind::new(n);
    // Length prefilter: LCS is at most min(|a|,|b|), so similarity is at
    // most min/max; skip pairs that cannot reach the threshold.
    for i in 0..n {
        for j in (i + 1)..n {
            let (la, lb) = (fragments[i].line_count, fragments[j].line_count);
            let (lo, hi) = (la.min(lb), la.max(lb));
            if hi == 0 || (lo as f64 / hi as f64) < threshold {
                continue;
            }
            if similarity(&fragments[i], &fragments[j]) >= threshold {
                uf.union(i, j);
            }
        }
    }

    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = uf.find(i);
        components.entry(root).or_default().push(i);
    }

    let mut classes: Vec<Vec<usize>> = components
        .into_values()
        .filter(|members| members.len() >= 2)
        .collect();
    for members in &mut classes {
        members.sort_by_key(|&i| fragment_key(&fragments[i]));
    }
    classes.sort_by_key(|members| fragment_key(&fragments[members[0]]));

    classes
        .into_iter()
        .enumerate()
        .map(|(ordinal, members)| {
            let instances: Vec<Fragment> =
                members.iter().map(|&i| fragments[i].clone()).collect();
            let granularity = instances[0].granularity;
            let exact = instances
                .windows(2)
                .all(|w| w[0].normalized_lines == w[1].normalized_lines);
            let mut min_sim = f64::INFINITY;
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for i in 0..instances.len() {
                for j in (i + 1)..instances.len() {
                    let s = similarity(&instances[i], &instances[j]);
                    min_sim = min_sim.min(s);
                    sum += s;
                    pairs += 1;
                }
            }
            let prefix = match granularity {
                Granularity::Block => "block",
                Granularity::File => "file",
            };
            CloneClass {
                id: format!("{prefix}-{ordinal:04}"),
                granularity,
                instances,
                exact,
                min_similarity: if pairs == 0 { 1.0 } else { min_sim },
                mean_similarity: if pairs == 0 { 1.0 } else { sum / pairs as f64 },
            }
        })
        .collect()
}

/// Keep classes whose smallest instance has at least `min_lines` normalized
/// lines and that have at least `min_instances` instances. When file-level
/// results are supplied, classes whose instances all lie in file-cloned
/// units are dropped (those clones are accounted for at file granularity).
pub fn filter_high_impact(
    classes: &[CloneClass],
    min_lines: usize,
    min_instances: usize,
    file_level: Option<&[CloneClass]>,
) -> Vec<CloneClass> {
    let file_cloned_units: BTreeSet<&str> = file_level
        .map(|fc| {
            fc.iter()
                .flat_map(|c| c.instances.iter().map(|f| f.unit.as_str()))
                .collect()
        })
        .unwrap_or_default();
    classes
        .iter()
        .filter(|c| c.instances.len() >= min_instances)
        .filter(|c| c.min_instance_lines() >= min_lines)
        .filter(|c| {
            file_cloned_units.is_empty()
                || !c.instances.iter().all(|f| file_cloned_units.contains(f.unit.as_str()))
        })
        .cloned()
        .collect()
}

// ---------------------------------------------------------------------------
// File-level clones and diffs
// ---------------------------------------------------------------------------

/// One differing line pair between a clone instance and the class's first
/// instance. One side is absent for pure insertions/deletions.
#[derive(Debug, Clone, Serialize)]
pub struct LineDiff {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other_line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other_text: Option<String>,
}

/// Line differences of one instance against the class's first instance.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceDiff {
    pub unit: String,
    pub changes: Vec<LineDiff>,
}

/// Per-class diffs (raw material for manual categorization).
#[derive(Debug, Clone, Serialize)]
pub struct FileCloneDiffs {
    pub class_id: String,
    pub diffs: Vec<InstanceDiff>,
}

/// Detect file-level clone classes over whole units and report the line
/// diffs of every instance against its class's first instance.
pub fn detect_file_clones(
    units: &[&SourceUnit],
    threshold: f64,
) -> (Vec<CloneClass>, Vec<FileCloneDiffs>) {
    let fragments: Vec<Fragment> = units.iter().filter_map(|u| file_fragment(u)).collect();
    let classes = detect_clone_classes(&fragments, threshold);
    let diffs = classes
        .iter()
        .map(|class| {
            let base = &class.instances[0];
            let diffs = class.instances[1..]
                .iter()
                .map(|inst| InstanceDiff {
                    unit: inst.unit.clone(),
                    changes: diff_lines(base, inst),
                })
                .collect();
            FileCloneDiffs { class_id: class.id.clone(), diffs }
        })
        .collect();
    (classes, diffs)
}

/// Align two fragments by LCS and pair up the non-common lines.
fn diff_lines(base: &Fragment, other: &Fragment) -> Vec<LineDiff> {
    let (ia, ib) = intern_pair(&base.normalized_lines, &other.normalized_lines);
    let (n, m) = (ia.len(), ib.len());
    // Full DP table for backtracking; file fragments are at most a few
    // thousand lines.
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if ia[i] == ib[j] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    let mut deletions: Vec<usize> = Vec::new();
    let mut insertions: Vec<usize> = Vec::new();
    let mut changes = Vec::new();
    let flush = |dels: &mut Vec<usize>, inss: &mut Vec<usize>, changes: &mut Vec<LineDiff>| {
        let pairs = dels.len().max(inss.len());
        for k in 0..pairs {
            let d = dels.get(k).copied();
            let i = inss.get(k).copied();
            changes.push(LineDiff {
                base_line: d.map(|x| base.line_numbers[x]),
                base_text: d.map(|x| base.normalized_lines[x].clone()),
                other_line: i.map(|x| other.line_numbers[x]),
                other_text: i.map(|x| other.normalized_lines[x].clone()),
            });
        }
        dels.clear();
        inss.clear();
    };
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        if ia[i] == ib[j] {
            flush(&mut deletions, &mut insertions, &mut changes);
            i += 1;
            j += 1;
        } else if dp[i + 1][j] >= dp[i][j + 1] {
            deletions.push(i);
            i += 1;
        } else {
            insertions.push(j);
            j += 1;
        }
    }
    while i < n {
        deletions.push(i);
        i += 1;
    }
    while j < m {
        insertions.push(j);
        j += 1;
    }
    flush(&mut deletions, &mut insertions, &mut changes);
    changes
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// Write each unit's converted text as a standalone `.py` file under
/// `outdir` (one file per unit, cell functions inside) for external clone
/// tooling. Name collisions get a numeric suffix.
pub fn export_units(units: &[&SourceUnit], outdir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(outdir).map_err(|source| Error::Io {
        path: outdir.to_path_buf(),
        source,
    })?;
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut written = Vec::new();
    for unit in units {
        let stem = unit.stem();
        let mut name = format!("{stem}.py");
        let mut k = 1;
        while !used.insert(name.clone()) {
            k += 1;
            name = format!("{stem}_{k}.py");
        }
        let path = outdir.join(&name);
        std::fs::write(&path, unit.text.as_bytes()).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;
    use crate::cfg::parse_scopes;
    use crate::ingest::script_unit;
    use crate::mutation::MutationSpecTable;

    fn frag(lines: &[&str]) -> Fragment {
        let normalized = normalize_code(lines);
        Fragment {
            unit: "t.py".to_string(),
            granularity: Granularity::Block,
            start_line: 1,
            end_line: lines.len(),
            cell_range: None,
            line_count: normalized.len(),
            line_numbers: (1..=normalized.len()).collect(),
            normalized_lines: normalized,
        }
    }

    #[test]
    fn normalization_collapses_whitespace_and_strips_comments() {
        assert_eq!(normalize_code(&["x  =   1   # note"]), vec!["x = 1"]);
        assert_eq!(normalize_code(&["# only a comment", "   "]), Vec::<String>::new());
    }

    #[test]
    fn mixed_indentation_normalizes_equal() {
        let tabs = normalize_code(&["if x:", "\ty = 1", "\t\tz = 2"]);
        let spaces = normalize_code(&["if x:", "    y = 1", "            z = 2"]);
        assert_eq!(tabs, spaces);
    }

    #[test]
    fn identical_fragments_have_similarity_one() {
        let a = frag(&["x = 1", "y = 2", "z = 3"]);
        assert_eq!(similarity(&a, &a), 1.0);
    }

    #[test]
    fn disjoint_fragments_have_similarity_zero() {
        let a = frag(&["a = 1", "b = 2"]);
        let b = frag(&["c = 3", "d = 4"]);
        assert_eq!(similarity(&a, &b), 0.0);
    }

    #[test]
    fn seven_of_ten_shared_lines_is_point_seven() {
        let base: Vec<String> = (0..10).map(|i| format!("v{i} = {i}")).collect();
        let mut other = base.clone();
        other[2] = "q2 = 'x'".to_string();
        other[5] = "q5 = 'y'".to_string();
        other[8] = "q8 = 'z'".to_string();
        let a = frag(&base.iter().map(String::as_str).collect::<Vec<_>>());
        let b = frag(&other.iter().map(String::as_str).collect::<Vec<_>>());
        let s = similarity(&a, &b);
        assert!((s - 0.7).abs() < 1e-9, "similarity {s}");
    }

    #[test]
    fn threshold_is_strict() {
        // 10-line fragments sharing 6 lines: similarity 0.6 < 0.7.
        let base: Vec<String> = (0..10).map(|i| format!("v{i} = {i}")).collect();
        let mut other = base.clone();
        for i in [1usize, 3, 5, 7] {
            other[i] = format!("w{i} = 'c{i}'");
        }
        let a = frag(&base.iter().map(String::as_str).collect::<Vec<_>>());
        let b = frag(&other.iter().map(String::as_str).collect::<Vec<_>>());
        assert!((similarity(&a, &b) - 0.6).abs() < 1e-9);
        let classes = detect_clone_classes(&[a, b], 0.7);
        assert!(classes.is_empty());
    }

    #[test]
    fn three_identical_blocks_form_one_exact_class() {
        let lines: Vec<String> = (0..12).map(|i| format!("s{i} = {i}")).collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let fragments = vec![frag(&refs), frag(&refs), frag(&refs)];
        let classes = detect_clone_classes(&fragments, 0.7);
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].instances.len(), 3);
        assert!(classes[0].exact);
        assert_eq!(classes[0].min_similarity, 1.0);
    }

    #[test]
    fn high_impact_filter_thresholds() {
        let big: Vec<String> = (0..12).map(|i| format!("b{i} = {i}")).collect();
        let refs: Vec<&str> = big.iter().map(String::as_str).collect();
        let pair = detect_clone_classes(&[frag(&refs), frag(&refs)], 0.7);
        assert_eq!(pair.len(), 1);
        // Two instances only: excluded.
        assert!(filter_high_impact(&pair, 10, 3, None).is_empty());

        let small: Vec<String> = (0..9).map(|i| format!("s{i} = {i}")).collect();
        let srefs: Vec<&str> = small.iter().map(String::as_str).collect();
        let nine = detect_clone_classes(&[frag(&srefs), frag(&srefs), frag(&srefs)], 0.7);
        // Nine lines: excluded.
        assert!(filter_high_impact(&nine, 10, 3, None).is_empty());

        let trio = detect_clone_classes(&[frag(&refs), frag(&refs), frag(&refs)], 0.7);
        assert_eq!(filter_high_impact(&trio, 10, 3, None).len(), 1);
    }

    #[test]
    fn file_cloned_units_are_excluded_when_supplied() {
        let lines: Vec<String> = (0..12).map(|i| format!("b{i} = {i}")).collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let mk = |unit: &str| {
            let mut f = frag(&refs);
            f.unit = unit.to_string();
            f
        };
        let block = detect_clone_classes(&[mk("a.py"), mk("b.py"), mk("c.py")], 0.7);
        let file = detect_clone_classes(
            &[
                Fragment { granularity: Granularity::File, ..mk("a.py") },
                Fragment { granularity: Granularity::File, ..mk("b.py") },
                Fragment { granularity: Granularity::File, ..mk("c.py") },
            ],
            0.7,
        );
        assert!(filter_high_impact(&block, 10, 3, Some(&file)).is_empty());
        // With one instance outside the cloned files the class survives.
        let block2 =
            detect_clone_classes(&[mk("a.py"), mk("b.py"), mk("fresh.py")], 0.7);
        assert_eq!(filter_high_impact(&block2, 10, 3, Some(&file)).len(), 1);
    }

    #[test]
    fn extract_blocks_honors_min_statements() {
        let unit = script_unit(Path::new("t.py"), "a = 1\nb = 2\n".to_string());
        let scopes = parse_scopes(&unit, &MutationSpecTable::default()).unwrap();
        assert!(extract_blocks(&unit, &scopes, 3).is_empty());

        let unit =
            script_unit(Path::new("t.py"), "a = 1\nb = 2\nc = 3\nd = 4\ne = 5\n".to_string());
        let scopes = parse_scopes(&unit, &MutationSpecTable::default()).unwrap();
        let frags = extract_blocks(&unit, &scopes, 3);
        assert_eq!(frags.len(), 1);
        assert_eq!((frags[0].start_line, frags[0].end_line), (1, 5));
    }

    #[test]
    fn control_flow_breaks_runs() {
        let src = "a = 1\nb = 2\nc = 3\nif a:\n    x = 1\n    y = 2\n    z = 3\nd = 4\n";
        let unit = script_unit(Path::new("t.py"), src.to_string());
        let scopes = parse_scopes(&unit, &MutationSpecTable::default()).unwrap();
        let frags = extract_blocks(&unit, &scopes, 3);
        let ranges: Vec<(usize, usize)> =
            frags.iter().map(|f| (f.start_line, f.end_line)).collect();
        assert!(ranges.contains(&(1, 3)), "{ranges:?}");
        assert!(ranges.contains(&(5, 7)), "{ranges:?}");
    }

    #[test]
    fn function_bodies_become_fragments() {
        let src = "def f():\n    a = 1\n    b = 2\n    c = 3\n";
        let unit = script_unit(Path::new("t.py"), src.to_string());
        let scopes = parse_scopes(&unit, &MutationSpecTable::default()).unwrap();
        let frags = extract_blocks(&unit, &scopes, 3);
        assert!(frags.iter().any(|f| (f.start_line, f.end_line) == (2, 4)));
    }

    #[test]
    fn file_clones_identical_and_near_miss() {
        let a = script_unit(Path::new("a.py"), "x = 1\ny = 2\nz = 3\n".to_string());
        let b = script_unit(Path::new("b.py"), "x = 1\ny = 2\nz = 3\n".to_string());
        let (classes, diffs) = detect_file_clones(&[&a, &b], 0.7);
        assert_eq!(classes.len(), 1);
        assert!(classes[0].exact);
        assert!(diffs[0].diffs[0].changes.is_empty());

        let c = script_unit(
            Path::new("c.py"),
            "p = load('one.csv')\nq = 2\nr = 3\ns = 4\n".to_string(),
        );
        let d = script_unit(
            Path::new("d.py"),
            "p = load('two.csv')\nq = 2\nr = 3\ns = 4\n".to_string(),
        );
        let (classes, diffs) = detect_file_clones(&[&c, &d], 0.7);
        assert_eq!(classes.len(), 1);
        assert!(!classes[0].exact);
        let changes = &diffs[0].diffs[0].changes;
        assert_eq!(changes.len(), 1);
        assert_eq!(changes[0].base_line, Some(1));
        assert!(changes[0].base_text.as_ref().unwrap().contains("one.csv"));
        assert!(changes[0].other_text.as_ref().unwrap().contains("two.csv"));
    }

    #[test]
    fn unrelated_files_form_no_class() {
        let a = script_unit(Path::new("a.py"), "x = 1\ny = 2\n".to_string());
        let b = script_unit(Path::new("b.py"), "alpha(beta)\ngamma(delta)\n".to_string());
        let (classes, _) = detect_file_clones(&[&a, &b], 0.7);
        assert!(classes.is_empty());
    }

    #[test]
    fn export_writes_one_file_per_unit() {
        let dir = tempfile::tempdir().unwrap();
        let a = script_unit(Path::new("nb/a.py"), "x = 1\n".to_string());
        let b = script_unit(Path::new("other/a.py"), "y = 2\n".to_string());
        let written = export_units(&[&a, &b], dir.path()).unwrap();
        assert_eq!(written.len(), 2);
        assert!(written[0].file_name().unwrap() != written[1].file_name().unwrap());
        for p in &written {
            assert!(p.exists());
        }
    }
}

//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nbqual_core::cfg::{build_cfg, parse_scopes, Cfg, Scope};
use nbqual_core::clones;
use nbqual_core::ingest::{notebook_unit, script_unit, SourceUnit, BODY_INDENT};
use nbqual_core::metrics::{
    self, compute_lifetimes, mutation_diffusion_score, run_dataflow, MutationState, PolicyChoice,
};
use nbqual_core::mutation::{MutationSpecTable, Policy};
use nbqual_core::report::{analyze_corpus, emit_json, AnalyzeConfig, ComparisonReport};

const GROUPED: &str =
    "l = []\nl.append(1)\nl.append(2)\ns = sum(l)\na = sum(l) / len(l)\nm = max(l)\n";
const SCATTERED: &str =
    "l = []\ns = sum(l)\nl.append(1)\na = sum(l) / len(l)\nm = max(l)\nl.append(2)\n";

fn module_scope(src: &str) -> (Scope, Cfg) {
    let unit = script_unit(Path::new("fixture.py"), src.to_string());
    let scopes = parse_scopes(&unit, &MutationSpecTable::default()).unwrap();
    let cfg = build_cfg(&scopes[0]);
    (scopes[0].clone(), cfg)
}

fn pass(n: usize, name: &str) {
    println!("ACCEPTANCE {n:2} ({name}): PASS");
}

#[test]
fn criterion_01_fig5_fidelity() {
    let start = Instant::now();
    for policy in [Policy::Optimistic, Policy::Conservative] {
        let (scope, cfg) = module_scope(GROUPED);
        let stmt_in = run_dataflow(&cfg, &scope, policy).unwrap();
        let (score, contribs) = mutation_diffusion_score(&cfg, &scope, &stmt_in, policy);
        assert_eq!(score, 0, "grouped variant must score 0");
        assert_eq!(contribs.len(), 2);

        let (scope, cfg) = module_scope(SCATTERED);
        let stmt_in = run_dataflow(&cfg, &scope, policy).unwrap();
        let (score, contribs) = mutation_diffusion_score(&cfg, &scope, &stmt_in, policy);
        assert_eq!(score, 3, "scattered variant must score 3");
        let values: Vec<usize> = contribs.iter().map(|c| c.contribution).collect();
        assert_eq!(values, vec![1, 2], "per-mutation contributions must be [1, 2]");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, limit 1s");
    pass(1, "diffusion worked examples: grouped 0, scattered 3 with [1, 2]");
}

#[test]
fn criterion_02_lifetime_worked_example() {
    let mut src = String::new();
    for i in 1..=9 {
        src.push_str(&format!("pad{i} = {i}\n"));
    }
    src.push_str("v = 0\n"); // definition at line 10
    for i in 11..=19 {
        src.push_str(&format!("pad{i} = {i}\n"));
    }
    src.push_str("w = v + 1\n"); // last use at line 20
    let (scope, _) = module_scope(&src);
    let lifetimes = compute_lifetimes(&scope);
    assert_eq!(lifetimes["v"], 11);
    pass(2, "lifetime of def@10/use@20 is 11");
}

#[test]
fn criterion_03_ratio_semantics() {
    let mut src = String::from("a = 0\nb = 0\na += 1\nb += 1\n");
    for i in 0..6 {
        src.push_str(&format!("c{i} = {i}\n"));
    }
    let (scope, cfg) = module_scope(&src);
    assert_eq!(scope.countable_statements(), 10);
    let record = metrics::scope_metrics(&scope, &cfg, PolicyChoice::Both).unwrap();
    assert_eq!(record.mutating_ratio_opt, Some(0.2));
    assert_eq!(record.mutating_ratio_cons, Some(0.2));
    pass(3, "10 statements with 2 mutating reports ratio 0.2 under both policies");
}

#[test]
fn criterion_04_oracle_equivalence() {
    let start = Instant::now();
    let limits = common::GenLimits::default();
    let count = 200;
    for seed in 0..count {
        let program = common::generate_program(seed, &limits);
        let names = common::default_names(program.var_count);
        let source = common::render(&program, &names);

        let (scope, cfg) = module_scope(&source);
        let oracle = common::oracle_contributions(&program.items);
        let oracle_total: usize = oracle.values().sum();

        for policy in [Policy::Optimistic, Policy::Conservative] {
            let stmt_in = run_dataflow(&cfg, &scope, policy).unwrap();
            let (score, contribs) = mutation_diffusion_score(&cfg, &scope, &stmt_in, policy);
            let mut got: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            for c in &contribs {
                let var_index: usize = c.variable.trim_start_matches('v').parse().unwrap();
                got.insert((c.line, var_index), c.contribution);
            }
            assert_eq!(
                got, oracle,
                "contribution mismatch on seed {seed} ({policy:?})\nsource:\n{source}"
            );
            assert_eq!(score, oracle_total, "score mismatch on seed {seed}");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, limit 60s");
    pass(4, "fixpoint equals all-paths oracle on 200 random acyclic programs");
}

#[test]
fn criterion_05_transfer_distributivity() {
    let vars = ["a", "b", "c", "d", "e"];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut random_state = |rng: &mut ChaCha8Rng| -> MutationState {
        let mut map = BTreeMap::new();
        for v in vars {
            if rng.next_u64() % 2 == 0 {
                let size = (rng.next_u64() % 6) as usize;
                let lines: BTreeSet<usize> =
                    (0..size).map(|_| 1 + (rng.next_u64() % 40) as usize).collect();
                map.insert(v.to_string(), lines);
            }
        }
        MutationState::from_map(map)
    };
    for case in 0..1000 {
        let s1 = random_state(&mut rng);
        let s2 = random_state(&mut rng);
        let line = 1 + (rng.next_u64() % 60) as usize;
        let mut defs = BTreeSet::new();
        let mut updates = BTreeSet::new();
        for v in vars {
            match rng.next_u64() % 4 {
                0 => {
                    defs.insert(v.to_string());
                }
                1 => {
                    updates.insert(v.to_string());
                }
                _ => {}
            }
        }
        let left = s1.join(&s2).transfer(line, &defs, &updates);
        let right = s1.transfer(line, &defs, &updates).join(&s2.transfer(line, &defs, &updates));
        assert_eq!(left, right, "distributivity violated at case {case}");
    }
    pass(5, "transfer distributes over union-join on 1000 random triples");
}

fn fixture_corpus(dir: &Path) {
    let w = |name: &str, content: &str| std::fs::write(dir.join(name), content).unwrap();
    w("scattered.py", SCATTERED);
    w("grouped.py", GROUPED);
    w(
        "mixed.py",
        "import numpy as np\nimport random\n\ndef helper(bucket):\n    bucket.append(1)\n\nitems = []\nhelper(items)\nmystery(items, 3)\nnp.sort(items)\nrandom.shuffle(items)\nfor i in range(3):\n    items.append(i)\n",
    );
    w(
        "branchy.py",
        "x = 0\nif x:\n    x += 1\nelse:\n    y = 2\nwhile x:\n    x -= 1\ntry:\n    z = 1\nexcept ValueError as e:\n    z = 2\nfinally:\n    w = 3\n",
    );
    w("broken.py", "def broken(:\n");
    w(
        "two_cells.ipynb",
        &serde_json::json!({
            "cells": [
                {"cell_type": "markdown", "source": "## Notes\nsome words here"},
                {"cell_type": "code", "source": "data = []\ndata.append(1)\n", "outputs": []},
                {"cell_type": "code", "source": "%time data\nextra = unknown_call(data)\n", "outputs": []},
            ],
            "metadata": {"language_info": {"name": "python"}},
            "nbformat": 4, "nbformat_minor": 5,
        })
        .to_string(),
    );
    w(
        "r_kernel.ipynb",
        &serde_json::json!({
            "cells": [{"cell_type": "code", "source": "x <- 1"}],
            "metadata": {"language_info": {"name": "R"}},
        })
        .to_string(),
    );
}

#[test]
fn criterion_06_policy_ordering() {
    let dir = tempfile::tempdir().unwrap();
    fixture_corpus(dir.path());
    let report =
        analyze_corpus(dir.path(), &AnalyzeConfig::default(), &MutationSpecTable::default(), 1)
            .unwrap();
    let mut checked = 0;
    for unit in &report.units {
        if let Some(file) = &unit.file {
            let opt = file.mutating_statements_opt.unwrap();
            let cons = file.mutating_statements_cons.unwrap();
            assert!(
                opt <= cons,
                "unit {} violates policy ordering: {opt} > {cons}",
                unit.path
            );
            checked += 1;
        }
        for scope in &unit.scopes {
            if let (Some(o), Some(c)) =
                (scope.mutating_statements_opt, scope.mutating_statements_cons)
            {
                assert!(o <= c, "scope {} violates policy ordering", scope.scope);
            }
        }
    }
    assert!(checked >= 5, "fixture corpus too small: {checked}");
    pass(6, "optimistic mutating count <= conservative for every fixture unit");
}

/// Independent full-matrix LCS oracle.
fn lcs_oracle(a: &[String], b: &[String]) -> usize {
    let (n, m) = (a.len(), b.len());
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in 1..=n {
        for j in 1..=m {
            dp[i][j] = if a[i - 1] == b[j - 1] {
                dp[i - 1][j - 1] + 1
            } else {
                dp[i - 1][j].max(dp[i][j - 1])
            };
        }
    }
    dp[n][m]
}

#[test]
fn criterion_07_clone_thresholds() {
    // Three copies of a 12-line block with <=30% line edits form one
    // high-impact class under the defaults.
    let base: Vec<String> = (0..12).map(|i| format!("step{i} = compute({i})")).collect();
    let mut copy_b = base.clone();
    copy_b[3] = "step3 = compute(99)".to_string();
    copy_b[7] = "logger.info('b')".to_string();
    let mut copy_c = base.clone();
    copy_c[5] = "step5 = compute(42)".to_string();
    copy_c[9] = "logger.info('c')".to_string();
    copy_c[11] = "final = 1".to_string();

    let dir = tempfile::tempdir().unwrap();
    let w = |name: &str, lines: &[String]| {
        std::fs::write(dir.path().join(name), format!("{}\n", lines.join("\n"))).unwrap()
    };
    w("a.py", &base);
    w("b.py", &copy_b);
    w("c.py", &copy_c);
    // A 2-instance 12-line class and a 3-instance 9-line class, both
    // excluded from the high-impact set.
    let pair: Vec<String> = (0..12).map(|i| format!("pair{i} = {i}")).collect();
    w("p1.py", &pair);
    w("p2.py", &pair);
    let nine: Vec<String> = (0..9).map(|i| format!("nine{i} = {i}")).collect();
    w("n1.py", &nine);
    w("n2.py", &nine);
    w("n3.py", &nine);

    let table = MutationSpecTable::default();
    let mut fragments = Vec::new();
    for entry in nbqual_core::report::discover_files(dir.path()) {
        let unit = nbqual_core::ingest::load_source_unit(&entry).unwrap();
        let scopes = parse_scopes(&unit, &table).unwrap();
        fragments.extend(clones::extract_blocks(&unit, &scopes, 3));
    }
    let classes = clones::detect_clone_classes(&fragments, 0.7);
    let high = clones::filter_high_impact(&classes, 10, 3, None);
    assert_eq!(high.len(), 1, "exactly the 12-line trio must survive");
    assert_eq!(high[0].instances.len(), 3);
    assert!(high[0].min_instance_lines() >= 10);
    assert!(high[0].instances.iter().any(|f| f.unit.ends_with("a.py")));

    // Similarity of a constructed 7-of-10 pair matches the DP oracle at
    // 0.7 within 1e-9.
    let ten_a: Vec<String> = (0..10).map(|i| format!("line{i} = {i}")).collect();
    let mut ten_b = ten_a.clone();
    ten_b[1] = "changed1 = 'a'".to_string();
    ten_b[4] = "changed4 = 'b'".to_string();
    ten_b[8] = "changed8 = 'c'".to_string();
    let na = clones::normalize_code(&ten_a);
    let nb = clones::normalize_code(&ten_b);
    assert_eq!(lcs_oracle(&na, &nb), 7);
    let fa = frag_of(&na);
    let fb = frag_of(&nb);
    let sim = clones::similarity(&fa, &fb);
    let oracle = lcs_oracle(&na, &nb) as f64 / 10.0;
    assert!((sim - 0.7).abs() < 1e-9, "similarity {sim}");
    assert!((sim - oracle).abs() < 1e-9);
    pass(7, "high-impact filtering and LCS similarity match the defaults");
}

fn frag_of(normalized: &[String]) -> clones::Fragment {
    clones::Fragment {
        unit: "t.py".to_string(),
        granularity: clones::Granularity::Block,
        start_line: 1,
        end_line: normalized.len(),
        cell_range: None,
        line_count: normalized.len(),
        normalized_lines: normalized.to_vec(),
        line_numbers: (1..=normalized.len()).collect(),
    }
}

fn provenance_notebooks() -> Vec<(&'static str, String)> {
    let nb = |cells: serde_json::Value| {
        serde_json::json!({
            "cells": cells,
            "metadata": {"language_info": {"name": "python"}},
            "nbformat": 4, "nbformat_minor": 5,
        })
        .to_string()
    };
    vec![
        (
            "magics.ipynb",
            nb(serde_json::json!([
                {"cell_type": "code", "source": "%matplotlib inline\n!pip install x\nimport os\n"},
                {"cell_type": "code", "source": "x = 1\n"},
            ])),
        ),
        (
            "markdown.ipynb",
            nb(serde_json::json!([
                {"cell_type": "markdown", "source": "# Title"},
                {"cell_type": "code", "source": "a = 1\nb = a + 1\n"},
                {"cell_type": "raw", "source": "raw text"},
                {"cell_type": "code", "source": "c = b\n"},
            ])),
        ),
        (
            "empty.ipynb",
            nb(serde_json::json!([
                {"cell_type": "code", "source": ""},
                {"cell_type": "code", "source": "y = 2\n"},
                {"cell_type": "code", "source": "   \n"},
            ])),
        ),
        (
            "string_source.ipynb",
            nb(serde_json::json!([
                {"cell_type": "code", "source": "first = 1\nsecond = first\n"},
                {"cell_type": "markdown", "source": ["line one\n", "line two"]},
                {"cell_type": "code", "source": ["third = second\n", "%%time\n"]},
            ])),
        ),
        (
            "comments.ipynb",
            nb(serde_json::json!([
                {"cell_type": "code", "source": "# comment only\n\n# another\n"},
                {"cell_type": "code", "source": "z = 1  # trailing\n\nw = z\n"},
            ])),
        ),
    ]
}

#[test]
fn criterion_08_conversion_provenance() {
    let notebooks = provenance_notebooks();
    assert_eq!(notebooks.len(), 5);
    for (name, json) in notebooks {
        let unit = notebook_unit(Path::new(name), &json).unwrap();
        let text_lines: Vec<&str> = unit.text.lines().collect();

        // Emitted function count equals code-cell count.
        let def_count = text_lines.iter().filter(|l| l.starts_with("def cell_")).count();
        assert_eq!(def_count, unit.code_cell_count(), "{name}: function count");

        for (line_no, line) in text_lines.iter().enumerate() {
            let line_no = line_no + 1;
            match unit.line_map.get(&line_no) {
                Some(origin) => {
                    let original = &unit.cells[origin.cell].source[origin.line];
                    let body = line.strip_prefix(BODY_INDENT).unwrap_or(line);
                    if nbqual_core::ingest::is_directive(original) {
                        assert_eq!(body, format!("# {original}"), "{name}:{line_no}");
                    } else {
                        assert_eq!(body, original.as_str(), "{name}:{line_no}");
                    }
                }
                None => {
                    // Synthetic lines only: cell headers, blank separators,
                    // placeholder pass statements.
                    let is_header = line.starts_with("def cell_");
                    let is_separator = line.is_empty();
                    let is_placeholder = unit.placeholder_lines.contains(&line_no);
                    assert!(
                        is_header || is_separator || is_placeholder,
                        "{name}:{line_no}: unmapped non-synthetic line {line:?}"
                    );
                }
            }
        }
    }
    pass(8, "every emitted line maps to its originating cell line on 5 notebooks");
}

#[test]
fn criterion_09_determinism_and_merge_order() {
    let dir = tempfile::tempdir().unwrap();
    fixture_corpus(dir.path());
    let config = AnalyzeConfig::default();
    let table = MutationSpecTable::default();
    let single = analyze_corpus(dir.path(), &config, &table, 1).unwrap();
    let parallel = analyze_corpus(dir.path(), &config, &table, 4).unwrap();
    let bytes_single = emit_json(&ComparisonReport::new(config.clone(), vec![single])).unwrap();
    let bytes_parallel = emit_json(&ComparisonReport::new(config, vec![parallel])).unwrap();
    assert_eq!(bytes_single, bytes_parallel, "reports differ between 1 and 4 workers");
    pass(9, "1-worker and 4-worker runs produce byte-identical JSON");
}

#[test]
fn criterion_10_desk_scale_performance() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..50 {
        let content = common::synthetic_file(i, 300);
        std::fs::write(dir.path().join(format!("file_{i:02}.py")), content).unwrap();
    }
    let start = Instant::now();
    let report =
        analyze_corpus(dir.path(), &AnalyzeConfig::default(), &MutationSpecTable::default(), 1)
            .unwrap();
    let elapsed = start.elapsed();
    assert_eq!(report.analyzed_units, 50);
    let loc: f64 = report.units.iter().map(|u| u.doc_stats.code_loc as f64).sum::<f64>() / 50.0;
    assert!(loc > 250.0, "synthetic files too small: mean {loc} LoC");
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "full analysis took {elapsed:?}, limit 30s"
    );
    pass(10, "50-file/300-line corpus analyzed single-threaded in under 30s");
}

/// Sanity check that the SourceUnit type stays shareable for the parallel
/// analysis path.
#[test]
fn source_units_are_send_and_sync() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<SourceUnit>();
}

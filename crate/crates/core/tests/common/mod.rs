//! Shared test support: a generator for random acyclic programs together
//! with an independent all-paths oracle for the diffusion score, and a
//! deterministic synthetic-corpus builder.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One step of a generated program, identified by its unique source line.
#[derive(Debug, Clone)]
pub enum Item {
    /// A one-line statement; at most one of `def`/`update` is set (variable
    /// index). `None`/`None` is a filler (`print`/`pass`).
    Stmt { line: usize, def: Option<usize>, update: Option<usize>, filler: Filler },
    /// An `if` with optional else; the header occupies its own line.
    If { header_line: usize, cond_var: usize, then_items: Vec<Item>, else_items: Option<Vec<Item>> },
}

#[derive(Debug, Clone, Copy)]
pub enum Filler {
    None,
    Print,
    Pass,
}

/// A generated acyclic program.
#[derive(Debug, Clone)]
pub struct GenProgram {
    pub items: Vec<Item>,
    pub statement_count: usize,
    pub var_count: usize,
}

pub struct GenLimits {
    pub max_statements: usize,
    pub max_vars: usize,
    pub max_depth: usize,
    pub max_branches: usize,
}

impl Default for GenLimits {
    fn default() -> Self {
        GenLimits { max_statements: 30, max_vars: 5, max_depth: 3, max_branches: 8 }
    }
}

struct GenState {
    rng: ChaCha8Rng,
    line: usize,
    statements: usize,
    branches: usize,
}

impl GenState {
    fn pick(&mut self, n: usize) -> usize {
        (self.rng.next_u64() as usize) % n
    }
}

/// Generate a random acyclic program (straight-line statements and nested
/// if/else up to the limits). Every statement owns one line.
pub fn generate_program(seed: u64, limits: &GenLimits) -> GenProgram {
    let mut st = GenState {
        rng: ChaCha8Rng::seed_from_u64(seed),
        line: 1,
        statements: 0,
        branches: 0,
    };
    let var_count = 2 + st.pick(limits.max_vars - 1).min(limits.max_vars - 2);
    let budget = 5 + st.pick(limits.max_statements - 4);
    let items = gen_suite(&mut st, limits, var_count, budget, 0, true);
    GenProgram { items, statement_count: st.statements, var_count }
}

fn gen_suite(
    st: &mut GenState,
    limits: &GenLimits,
    vars: usize,
    budget: usize,
    depth: usize,
    top_level: bool,
) -> Vec<Item> {
    let mut items = Vec::new();
    let mut remaining = budget;
    // Top level opens with a couple of definitions so most updates have a
    // reaching definition; update-before-def still occurs in branches.
    if top_level {
        for v in 0..2.min(vars) {
            items.push(Item::Stmt {
                line: st.line,
                def: Some(v),
                update: None,
                filler: Filler::None,
            });
            st.line += 1;
            st.statements += 1;
            remaining = remaining.saturating_sub(1);
        }
    }
    while remaining > 0 && st.statements < limits.max_statements {
        let can_branch =
            depth < limits.max_depth && st.branches < limits.max_branches && remaining >= 3;
        let choice = st.pick(if can_branch { 10 } else { 8 });
        match choice {
            0..=2 => {
                items.push(Item::Stmt {
                    line: st.line,
                    def: Some(st.pick(vars)),
                    update: None,
                    filler: Filler::None,
                });
                st.line += 1;
                st.statements += 1;
                remaining -= 1;
            }
            3..=5 => {
                items.push(Item::Stmt {
                    line: st.line,
                    def: None,
                    update: Some(st.pick(vars)),
                    filler: Filler::None,
                });
                st.line += 1;
                st.statements += 1;
                remaining -= 1;
            }
            6 | 7 => {
                items.push(Item::Stmt {
                    line: st.line,
                    def: None,
                    update: None,
                    filler: if st.pick(2) == 0 { Filler::Print } else { Filler::Pass },
                });
                st.line += 1;
                st.statements += 1;
                remaining -= 1;
            }
            _ => {
                st.branches += 1;
                let header_line = st.line;
                let cond_var = st.pick(vars);
                st.line += 1;
                st.statements += 1;
                remaining -= 1;
                let then_budget = 1 + st.pick(remaining.min(4));
                let then_items =
                    gen_suite(st, limits, vars, then_budget, depth + 1, false);
                remaining = remaining.saturating_sub(count_statements(&then_items));
                let else_items = if st.pick(2) == 0 && remaining > 0 {
                    st.line += 1; // the `else:` line itself
                    let else_budget = 1 + st.pick(remaining.min(4));
                    let body = gen_suite(st, limits, vars, else_budget, depth + 1, false);
                    remaining = remaining.saturating_sub(count_statements(&body));
                    Some(body)
                } else {
                    None
                };
                items.push(Item::If { header_line, cond_var, then_items, else_items });
            }
        }
    }
    if items.is_empty() {
        items.push(Item::Stmt {
            line: st.line,
            def: None,
            update: None,
            filler: Filler::Pass,
        });
        st.line += 1;
        st.statements += 1;
    }
    items
}

fn count_statements(items: &[Item]) -> usize {
    items
        .iter()
        .map(|i| match i {
            Item::Stmt { .. } => 1,
            Item::If { then_items, else_items, .. } => {
                1 + count_statements(then_items)
                    + else_items.as_ref().map(|e| count_statements(e)).unwrap_or(0)
            }
        })
        .sum()
}

/// Render the program as Python source; `names[v]` is the name of variable
/// `v`. Line numbers in the items match the rendered text exactly.
pub fn render(program: &GenProgram, names: &[String]) -> String {
    let mut out = String::new();
    render_suite(&program.items, names, 0, &mut out);
    out
}

fn render_suite(items: &[Item], names: &[String], depth: usize, out: &mut String) {
    let indent = "    ".repeat(depth);
    for item in items {
        match item {
            Item::Stmt { def: Some(v), .. } => {
                out.push_str(&format!("{indent}{} = 0\n", names[*v]));
            }
            Item::Stmt { update: Some(v), .. } => {
                out.push_str(&format!("{indent}{} += 1\n", names[*v]));
            }
            Item::Stmt { filler, .. } => match filler {
                Filler::Print => out.push_str(&format!("{indent}print(0)\n")),
                _ => out.push_str(&format!("{indent}pass\n")),
            },
            Item::If { cond_var, then_items, else_items, .. } => {
                out.push_str(&format!("{indent}if {} > 1:\n", names[*cond_var]));
                render_suite(then_items, names, depth + 1, out);
                if let Some(else_body) = else_items {
                    out.push_str(&format!("{indent}else:\n"));
                    render_suite(else_body, names, depth + 1, out);
                }
            }
        }
    }
}

pub fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

// ---------------------------------------------------------------------------
// All-paths oracle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Step {
    line: usize,
    def: Option<usize>,
    update: Option<usize>,
}

fn enumerate_paths(items: &[Item]) -> Vec<Vec<Step>> {
    let mut paths: Vec<Vec<Step>> = vec![Vec::new()];
    for item in items {
        match item {
            Item::Stmt { line, def, update, .. } => {
                for p in &mut paths {
                    p.push(Step { line: *line, def: *def, update: *update });
                }
            }
            Item::If { header_line, then_items, else_items, .. } => {
                let header = Step { line: *header_line, def: None, update: None };
                let then_paths = enumerate_paths(then_items);
                let else_paths = match else_items {
                    Some(body) => enumerate_paths(body),
                    None => vec![Vec::new()],
                };
                let mut extended = Vec::with_capacity(paths.len() * (then_paths.len() + else_paths.len()));
                for p in &paths {
                    for branch in then_paths.iter().chain(else_paths.iter()) {
                        let mut q = p.clone();
                        q.push(header);
                        q.extend(branch.iter().copied());
                        extended.push(q);
                    }
                }
                paths = extended;
            }
        }
    }
    paths
}

/// Brute-force diffusion contributions by explicit path enumeration.
///
/// For each mutation of `v` at line `l`, the contribution is the size of
/// the union, over all entry paths reaching `l` on which `v` has a prior
/// definition or mutation, of the lines traversed strictly between that
/// prior event and `l`. Paths with no prior event contribute nothing.
pub fn oracle_contributions(items: &[Item]) -> BTreeMap<(usize, usize), usize> {
    let mut unions: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for path in enumerate_paths(items) {
        for (idx, step) in path.iter().enumerate() {
            let Some(v) = step.update else { continue };
            let key = (step.line, v);
            let entry = unions.entry(key).or_default();
            for k in (0..idx).rev() {
                let prior = path[k];
                if prior.def == Some(v) || prior.update == Some(v) {
                    entry.extend(path[k + 1..idx].iter().map(|s| s.line));
                    break;
                }
            }
        }
    }
    unions.into_iter().map(|(k, s)| (k, s.len())).collect()
}

pub fn oracle_score(items: &[Item]) -> usize {
    oracle_contributions(items).values().sum()
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

/// Deterministic Python file of roughly `target_loc` non-empty lines, with
/// functions, branches, loops, and mutation patterns. Files with nearby
/// seeds share block-sized fragments so clone detection has work to do.
pub fn synthetic_file(seed: usize, target_loc: usize) -> String {
    let mut out = String::new();
    out.push_str("import numpy as np\nimport random\n\n");
    let mut line_budget = target_loc.saturating_sub(2);
    let mut fn_index = 0usize;
    while line_budget > 0 {
        let variant = (seed + fn_index) % 3;
        let body = match variant {
            0 => format!(
                "def load_block_{fn_index}(path):\n    rows = []\n    with open(path) as handle:\n        for line in handle:\n            rows.append(line.strip())\n    count = len(rows)\n    return rows\n\n"
            ),
            1 => format!(
                "def process_{fn_index}(values):\n    acc = []\n    total = 0\n    for v in values:\n        if v > {fn_index}:\n            acc.append(v)\n            total += v\n        else:\n            total -= 1\n    return acc, total\n\n"
            ),
            _ => format!(
                "def stats_{fn_index}(xs):\n    data = np.array(xs)\n    mean = np.mean(data)\n    std = np.std(data)\n    result = {{}}\n    result['mean'] = mean\n    result['std'] = std\n    return result\n\n"
            ),
        };
        line_budget = line_budget.saturating_sub(body.lines().filter(|l| !l.trim().is_empty()).count());
        out.push_str(&body);
        fn_index += 1;
    }
    out.push_str("values = [1, 2, 3]\n");
    out.push_str("result = []\n");
    out.push_str("result.append(sum(values))\n");
    out
}

//! Variable lifetime, mutating statement ratio, and mutation diffusion.
//!
//! The diffusion score comes from a forward dataflow analysis over the
//! scope's CFG. The state maps each variable to the set of source lines
//! traversed since the variable's last definition or mutation. The transfer
//! function first adds the statement's line to every tracked variable's
//! set, then empties the sets of all variables the statement defines or
//! updates. Control-flow joins take the per-variable union, so the fixpoint
//! equals the meet-over-paths solution (the transfer function distributes
//! over the join). Each mutation of `v` at statement `s` contributes
//! `|IN[s](v)|`; the score sums contributions over the scope.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::cfg::{Cfg, Scope, ScopeKind, Statement};
use crate::error::{Error, Result};
use crate::mutation::Policy;

/// Dataflow state: variable name -> set of source line numbers.
///
/// A variable enters the state at its first definition or update (or at
/// scope entry for parameters) with an empty set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MutationState(BTreeMap<String, BTreeSet<usize>>);

impl MutationState {
    pub fn empty() -> Self {
        MutationState(BTreeMap::new())
    }

    /// Entry state of a function scope: parameters are defined at the
    /// scope's first line, with no accumulated lines.
    pub fn with_params<S: AsRef<str>>(params: &[S]) -> Self {
        MutationState(
            params
                .iter()
                .map(|p| (p.as_ref().to_string(), BTreeSet::new()))
                .collect(),
        )
    }

    /// Per-variable union (the meet at control-flow joins).
    pub fn join(&self, other: &MutationState) -> MutationState {
        let mut merged = self.0.clone();
        for (var, lines) in &other.0 {
            merged
                .entry(var.clone())
                .or_default()
                .extend(lines.iter().copied());
        }
        MutationState(merged)
    }

    /// Transfer function of a statement at `line`: add the line to every
    /// tracked variable's set, then empty the sets of defined/updated
    /// variables (creating entries as needed).
    pub fn transfer(
        &self,
        line: usize,
        defs: &BTreeSet<String>,
        updates: &BTreeSet<String>,
    ) -> MutationState {
        let mut next = BTreeMap::new();
        for (var, lines) in &self.0 {
            let mut lines = lines.clone();
            lines.insert(line);
            next.insert(var.clone(), lines);
        }
        for var in defs.iter().chain(updates.iter()) {
            next.insert(var.clone(), BTreeSet::new());
        }
        MutationState(next)
    }

    pub fn lines_of(&self, var: &str) -> Option<&BTreeSet<usize>> {
        self.0.get(var)
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Build a state from explicit contents (test and property-check use).
    pub fn from_map(map: BTreeMap<String, BTreeSet<usize>>) -> Self {
        MutationState(map)
    }
}

fn update_set(stmt: &Statement, policy: Policy) -> &BTreeSet<String> {
    match policy {
        Policy::Optimistic => &stmt.update_set_opt,
        Policy::Conservative => &stmt.update_set_cons,
    }
}

// ---------------------------------------------------------------------------
// Fixpoint
// ---------------------------------------------------------------------------

/// Run the forward dataflow to a fixpoint and return the IN state of every
/// statement (indexed by statement id).
///
/// Placeholder statements are invisible: they neither accumulate lines nor
/// clear anything.
pub fn run_dataflow(cfg: &Cfg, scope: &Scope, policy: Policy) -> Result<Vec<MutationState>> {
    let nblocks = cfg.blocks.len();
    let preds = cfg.predecessors();
    let entry_state = match scope.kind {
        ScopeKind::Function => MutationState::with_params(&scope.params),
        ScopeKind::Module => MutationState::empty(),
    };

    let universe: BTreeSet<&str> = scope
        .statements
        .iter()
        .flat_map(|s| {
            s.def_set
                .iter()
                .chain(s.update_set_cons.iter())
                .map(String::as_str)
        })
        .chain(scope.params.iter().map(String::as_str))
        .collect();
    let span_lines = scope.span.1.saturating_sub(scope.span.0) + 1;
    let limit = nblocks.max(1) * universe.len().max(1) * span_lines.max(1) + nblocks + 16;

    let apply_block = |block_id: usize, state: &MutationState| -> MutationState {
        let mut state = state.clone();
        for &sid in &cfg.blocks[block_id].statements {
            let stmt = &scope.statements[sid];
            if stmt.is_placeholder {
                continue;
            }
            state = state.transfer(stmt.line, &stmt.def_set, update_set(stmt, policy));
        }
        state
    };

    let mut block_in: Vec<MutationState> = vec![MutationState::empty(); nblocks];
    let mut block_out: Vec<MutationState> = vec![MutationState::empty(); nblocks];
    let mut queued = vec![true; nblocks];
    let mut worklist: VecDeque<usize> = (0..nblocks).collect();
    let succs = cfg.successors();
    let mut iterations = 0usize;

    while let Some(b) = worklist.pop_front() {
        queued[b] = false;
        iterations += 1;
        if iterations > limit {
            return Err(Error::NonTermination { scope: scope.name.clone(), limit });
        }
        let mut state = if b == cfg.entry {
            entry_state.clone()
        } else {
            MutationState::empty()
        };
        for &p in &preds[b] {
            state = state.join(&block_out[p]);
        }
        block_in[b] = state.clone();
        let out = apply_block(b, &state);
        if out != block_out[b] {
            block_out[b] = out;
            for &s in &succs[b] {
                if !queued[s] {
                    queued[s] = true;
                    worklist.push_back(s);
                }
            }
        }
    }

    // Stable: record per-statement IN states.
    let mut stmt_in = vec![MutationState::empty(); scope.statements.len()];
    for block in &cfg.blocks {
        let mut state = block_in[block.id].clone();
        for &sid in &block.statements {
            stmt_in[sid] = state.clone();
            let stmt = &scope.statements[sid];
            if !stmt.is_placeholder {
                state = state.transfer(stmt.line, &stmt.def_set, update_set(stmt, policy));
            }
        }
    }
    Ok(stmt_in)
}

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

/// One mutation's contribution to the diffusion score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MutationContribution {
    pub statement: usize,
    pub line: usize,
    pub variable: String,
    pub contribution: usize,
}

/// Sum `|IN[s](v)|` over every statement `s` and variable `v ∈ UPDATE(s)`.
///
/// Contributions are ordered by statement id, then variable name.
pub fn mutation_diffusion_score(
    cfg: &Cfg,
    scope: &Scope,
    stmt_in: &[MutationState],
    policy: Policy,
) -> (usize, Vec<MutationContribution>) {
    let _ = cfg;
    let mut contributions = Vec::new();
    let mut total = 0usize;
    for stmt in &scope.statements {
        if stmt.is_placeholder {
            continue;
        }
        for var in update_set(stmt, policy) {
            let contribution = stmt_in[stmt.id]
                .lines_of(var)
                .map(|lines| lines.len())
                .unwrap_or(0);
            total += contribution;
            contributions.push(MutationContribution {
                statement: stmt.id,
                line: stmt.line,
                variable: var.clone(),
                contribution,
            });
        }
    }
    (total, contributions)
}

/// Inclusive line distance from a variable's first definition to its last
/// occurrence within the scope.
///
/// Parameters count as defined at the scope's first line. A variable that
/// is defined and never used again has lifetime 1. Variables that are only
/// read (defined elsewhere) are not reported.
pub fn compute_lifetimes(scope: &Scope) -> BTreeMap<String, usize> {
    let mut first: BTreeMap<&str, usize> = BTreeMap::new();
    let mut last: BTreeMap<&str, usize> = BTreeMap::new();

    for p in &scope.params {
        first.insert(p, scope.header_line);
        last.insert(p, scope.header_line);
    }
    for stmt in &scope.statements {
        if stmt.is_placeholder {
            continue;
        }
        for var in stmt.def_set.iter().chain(&stmt.update_set_cons) {
            first.entry(var).or_insert(stmt.line);
        }
        for var in stmt
            .reads
            .iter()
            .chain(&stmt.def_set)
            .chain(&stmt.update_set_cons)
        {
            let entry = last.entry(var).or_insert(stmt.line);
            *entry = (*entry).max(stmt.line);
        }
    }

    first
        .into_iter()
        .map(|(var, def_line)| {
            let last_line = last.get(var).copied().unwrap_or(def_line).max(def_line);
            (var.to_string(), last_line - def_line + 1)
        })
        .collect()
}

/// Fraction of countable statements whose UPDATE set is non-empty.
pub fn mutating_statement_ratio(scope: &Scope, policy: Policy) -> Result<f64> {
    let (mutating, total) = mutating_statement_counts(scope, policy);
    if total == 0 {
        return Err(Error::EmptyScope { scope: scope.name.clone() });
    }
    Ok(mutating as f64 / total as f64)
}

/// `(mutating, total)` counts with placeholders excluded from both.
pub fn mutating_statement_counts(scope: &Scope, policy: Policy) -> (usize, usize) {
    let mut mutating = 0usize;
    let mut total = 0usize;
    for stmt in &scope.statements {
        if stmt.is_placeholder {
            continue;
        }
        total += 1;
        if !update_set(stmt, policy).is_empty() {
            mutating += 1;
        }
    }
    (mutating, total)
}

/// Diffusion score divided by statement count.
pub fn normalize_score(score: usize, statement_count: usize) -> Result<f64> {
    if statement_count == 0 {
        return Err(Error::EmptyScope { scope: String::new() });
    }
    Ok(score as f64 / statement_count as f64)
}

// ---------------------------------------------------------------------------
// Per-scope record
// ---------------------------------------------------------------------------

/// Metrics of one scope. Ratio and normalized fields are absent for scopes
/// with no countable statements (flagged by `empty_scope`).
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRecord {
    pub scope: String,
    pub scope_kind: String,
    pub is_cell: bool,
    pub statement_count: usize,
    pub empty_scope: bool,
    pub lifetimes: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutating_statements_opt: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutating_statements_cons: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutating_ratio_opt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutating_ratio_cons: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion_opt: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion_cons: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion_normalized_opt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion_normalized_cons: Option<f64>,
}

/// Which policies a run computes and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    Optimistic,
    Conservative,
    Both,
}

impl PolicyChoice {
    pub fn includes(&self, policy: Policy) -> bool {
        matches!(
            (self, policy),
            (PolicyChoice::Both, _)
                | (PolicyChoice::Optimistic, Policy::Optimistic)
                | (PolicyChoice::Conservative, Policy::Conservative)
        )
    }
}

impl std::str::FromStr for PolicyChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimistic" => Ok(PolicyChoice::Optimistic),
            "conservative" => Ok(PolicyChoice::Conservative),
            "both" => Ok(PolicyChoice::Both),
            other => Err(Error::Config(format!(
                "policy must be optimistic, conservative, or both (got \"{other}\")"
            ))),
        }
    }
}

/// Compute the full metrics record of one scope.
pub fn scope_metrics(scope: &Scope, cfg: &Cfg, choice: PolicyChoice) -> Result<MetricsRecord> {
    let statement_count = scope.countable_statements();
    let empty_scope = statement_count == 0;
    let mut record = MetricsRecord {
        scope: scope.name.clone(),
        scope_kind: match scope.kind {
            ScopeKind::Module => "module".to_string(),
            ScopeKind::Function => "function".to_string(),
        },
        is_cell: scope.is_cell,
        statement_count,
        empty_scope,
        lifetimes: compute_lifetimes(scope),
        mutating_statements_opt: None,
        mutating_statements_cons: None,
        mutating_ratio_opt: None,
        mutating_ratio_cons: None,
        diffusion_opt: None,
        diffusion_cons: None,
        diffusion_normalized_opt: None,
        diffusion_normalized_cons: None,
    };

    for policy in [Policy::Optimistic, Policy::Conservative] {
        if !choice.includes(policy) {
            continue;
        }
        let stmt_in = run_dataflow(cfg, scope, policy)?;
        let (score, _) = mutation_diffusion_score(cfg, scope, &stmt_in, policy);
        let (mutating, total) = mutating_statement_counts(scope, policy);
        let ratio = if total == 0 { None } else { Some(mutating as f64 / total as f64) };
        let normalized = if total == 0 { None } else { Some(score as f64 / total as f64) };
        match policy {
            Policy::Optimistic => {
                record.mutating_statements_opt = Some(mutating);
                record.mutating_ratio_opt = ratio;
                record.diffusion_opt = Some(score);
                record.diffusion_normalized_opt = normalized;
            }
            Policy::Conservative => {
                record.mutating_statements_cons = Some(mutating);
                record.mutating_ratio_cons = ratio;
                record.diffusion_cons = Some(score);
                record.diffusion_normalized_cons = normalized;
            }
        }
    }
    Ok(record)
}

/// File-level roll-up of per-scope records: counts and scores sum, ratios
/// recompute over the summed statement counts.
#[derive(Debug, Clone, Default, Serialize)]
pub struct FileMetrics {
    pub statement_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutating_statements_opt: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutating_statements_cons: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutating_ratio_opt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutating_ratio_cons: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion_opt: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion_cons: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion_normalized_opt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion_normalized_cons: Option<f64>,
}

pub fn file_metrics(records: &[MetricsRecord]) -> FileMetrics {
    let statement_count: usize = records.iter().map(|r| r.statement_count).sum();
    let sum_opt = |f: fn(&MetricsRecord) -> Option<usize>| -> Option<usize> {
        let values: Vec<usize> = records.iter().filter_map(f).collect();
        if values.is_empty() { None } else { Some(values.iter().sum()) }
    };
    let mutating_statements_opt = sum_opt(|r| r.mutating_statements_opt);
    let mutating_statements_cons = sum_opt(|r| r.mutating_statements_cons);
    let diffusion_opt = sum_opt(|r| r.diffusion_opt);
    let diffusion_cons = sum_opt(|r| r.diffusion_cons);
    let ratio = |m: Option<usize>| -> Option<f64> {
        match (m, statement_count) {
            (Some(_), 0) | (None, _) => None,
            (Some(v), n) => Some(v as f64 / n as f64),
        }
    };
    FileMetrics {
        statement_count,
        mutating_ratio_opt: ratio(mutating_statements_opt),
        mutating_ratio_cons: ratio(mutating_statements_cons),
        diffusion_normalized_opt: ratio(diffusion_opt),
        diffusion_normalized_cons: ratio(diffusion_cons),
        mutating_statements_opt,
        mutating_statements_cons,
        diffusion_opt,
        diffusion_cons,
    }
}

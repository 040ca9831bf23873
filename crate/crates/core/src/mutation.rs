//! DEF/UPDATE classification of statements.
//!
//! A statement *defines* a variable when it binds a fresh value to a name
//! (`x = e`, tuple unpacking, `for` targets, imports, `def`/`class`) and
//! *updates* a variable when it modifies the value in place (`x += e`,
//! `a[i] = v`, `o.attr = v`, and calls that mutate their arguments).
//!
//! Whether a call mutates is resolved in order:
//! 1. the callee is a function defined in the same unit: its body is
//!    analyzed one level deep for parameter mutation;
//! 2. the callee traces to an import from a library with spec-table
//!    entries: the table entry decides (full dotted path first, then the
//!    final path segment);
//! 3. a method call whose name is in the heuristic mutator/pure sets;
//! 4. otherwise unknown, resolved by policy: optimistic assumes no
//!    mutation, conservative assumes every argument and the receiver are
//!    mutated.
//!
//! Attribute chains attribute mutation to the root name (`a.b.c[0] = v`
//! updates `a`). Aliasing is not tracked.

use std::collections::{BTreeSet, HashMap};

use rustpython_parser::ast;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Policy for calls that cannot be resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Unknown calls do not mutate anything.
    Optimistic,
    /// Unknown calls mutate every argument and the receiver.
    Conservative,
}

/// Mutation effect of a library callable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    Pure,
    /// Mutates the method receiver.
    Receiver,
    /// Mutates the positional arguments at these 0-based indices.
    Args(Vec<usize>),
}

/// How a call's effect was determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CallResolution {
    LocalBody,
    SpecTable,
    Heuristic,
    Unknown,
}

/// Resolved effect of one call site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallEffect {
    pub resolution: CallResolution,
    /// Variables (root names) mutated by the call.
    pub mutated: BTreeSet<String>,
}

// ---------------------------------------------------------------------------
// Spec table
// ---------------------------------------------------------------------------

/// Default method-name heuristics (built-in `Sequence`-style mutators).
const DEFAULT_MUTATORS: &[&str] =
    &["append", "extend", "insert", "remove", "pop", "clear", "sort", "reverse"];
const DEFAULT_PURE: &[&str] = &["keys", "values", "items", "copy", "get"];

/// Table of known library callables and name heuristics.
///
/// Entries are keyed by `(library, callable)`. Lookups try the full dotted
/// callable path first (`random.shuffle` for `np.random.shuffle`) and fall
/// back to the final segment, so data files may simply key by callable name.
#[derive(Debug, Clone)]
pub struct MutationSpecTable {
    entries: HashMap<(String, String), Effect>,
    pub heuristic_mutators: BTreeSet<String>,
    pub heuristic_pure: BTreeSet<String>,
}

/// Curated default entries for the common scientific-stack libraries.
const DEFAULT_SPECS: &str = include_str!("../data/mutation_specs.tsv");

impl Default for MutationSpecTable {
    fn default() -> Self {
        let mut table = Self::empty();
        table
            .merge_tsv(DEFAULT_SPECS)
            .expect("embedded mutation spec table must parse");
        table
    }
}

impl MutationSpecTable {
    /// Table with default heuristics and no library entries.
    pub fn empty() -> Self {
        MutationSpecTable {
            entries: HashMap::new(),
            heuristic_mutators: DEFAULT_MUTATORS.iter().map(|s| s.to_string()).collect(),
            heuristic_pure: DEFAULT_PURE.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Merge records from TSV text: `library<TAB>callable<TAB>effect` where
    /// effect is `pure`, `receiver`, or `arg:<comma-separated 0-based
    /// indices>`. Blank lines and `#` comments are skipped; later records
    /// override earlier ones.
    pub fn merge_tsv(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (lib, name, effect) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a.trim(), b.trim(), c.trim()),
                _ => {
                    return Err(Error::SpecTable {
                        line: i + 1,
                        reason: "expected library<TAB>callable<TAB>effect".into(),
                    })
                }
            };
            let effect = if effect == "pure" {
                Effect::Pure
            } else if effect == "receiver" {
                Effect::Receiver
            } else if let Some(ixs) = effect.strip_prefix("arg:") {
                let parsed: std::result::Result<Vec<usize>, _> =
                    ixs.split(',').map(|s| s.trim().parse::<usize>()).collect();
                Effect::Args(parsed.map_err(|e| Error::SpecTable {
                    line: i + 1,
                    reason: format!("bad arg index list: {e}"),
                })?)
            } else {
                return Err(Error::SpecTable {
                    line: i + 1,
                    reason: format!("unknown effect \"{effect}\""),
                });
            };
            self.entries.insert((lib.to_string(), name.to_string()), effect);
        }
        Ok(())
    }

    /// Load a table from a TSV file on top of the defaults.
    pub fn with_overrides_from(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut table = Self::default();
        table.merge_tsv(&text)?;
        Ok(table)
    }

    /// Exact lookup.
    pub fn lookup(&self, library: &str, callable: &str) -> Option<&Effect> {
        self.entries.get(&(library.to_string(), callable.to_string()))
    }

    /// Lookup by full dotted path, then by final segment.
    pub fn lookup_dotted(&self, library: &str, path: &str) -> Option<&Effect> {
        if let Some(e) = self.lookup(library, path) {
            return Some(e);
        }
        let last = path.rsplit('.').next().unwrap_or(path);
        if last != path {
            return self.lookup(library, last);
        }
        None
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Unit context: imports and same-unit function summaries
// ---------------------------------------------------------------------------

/// Depth-1 mutation summary of a function defined in the analyzed unit.
#[derive(Debug, Clone)]
pub struct LocalFnSummary {
    pub params: Vec<String>,
    /// Name of the `*args` parameter, if any (extra positionals map here).
    pub vararg: Option<String>,
    pub kwarg: Option<String>,
    pub mutated_opt: BTreeSet<String>,
    pub mutated_cons: BTreeSet<String>,
}

/// Per-unit resolution context: import aliases and local function bodies.
#[derive(Debug, Clone, Default)]
pub struct UnitContext {
    /// alias -> (library root, dotted path of the imported object, "" for
    /// the module itself).
    imports: HashMap<String, (String, String)>,
    /// simple function name -> summary (later definitions win).
    locals: HashMap<String, LocalFnSummary>,
}

impl UnitContext {
    /// Build the context from a module body.
    ///
    /// Imports anywhere in the unit are collected into one alias map, and
    /// every `def` (at any nesting) is summarized for parameter mutation.
    pub fn build(body: &[ast::Stmt], table: &MutationSpecTable) -> Self {
        let mut ctx = UnitContext::default();
        collect_context(body, &mut ctx, table);
        ctx
    }

    pub fn import_of(&self, alias: &str) -> Option<&(String, String)> {
        self.imports.get(alias)
    }

    pub fn local_fn(&self, name: &str) -> Option<&LocalFnSummary> {
        self.locals.get(name)
    }
}

fn collect_context(body: &[ast::Stmt], ctx: &mut UnitContext, table: &MutationSpecTable) {
    // First pass: aliases (needed by the summaries below).
    fn imports(body: &[ast::Stmt], ctx: &mut UnitContext) {
        for stmt in body {
            match stmt {
                ast::Stmt::Import(s) => {
                    for alias in &s.names {
                        let full = alias.name.as_str();
                        let root = full.split('.').next().unwrap_or(full);
                        match &alias.asname {
                            Some(asname) => {
                                let rest = full
                                    .strip_prefix(root)
                                    .map(|r| r.trim_start_matches('.'))
                                    .unwrap_or("");
                                ctx.imports.insert(
                                    asname.to_string(),
                                    (root.to_string(), rest.to_string()),
                                );
                            }
                            None => {
                                ctx.imports
                                    .insert(root.to_string(), (root.to_string(), String::new()));
                            }
                        }
                    }
                }
                ast::Stmt::ImportFrom(s) => {
                    if s.level.map(|l| l.to_u32()).unwrap_or(0) > 0 {
                        continue; // relative import: not a library
                    }
                    let Some(module) = &s.module else { continue };
                    let full = module.as_str();
                    let root = full.split('.').next().unwrap_or(full);
                    let prefix = full
                        .strip_prefix(root)
                        .map(|r| r.trim_start_matches('.'))
                        .unwrap_or("");
                    for alias in &s.names {
                        if alias.name.as_str() == "*" {
                            continue;
                        }
                        let bound = alias.asname.as_ref().unwrap_or(&alias.name).to_string();
                        let path = if prefix.is_empty() {
                            alias.name.to_string()
                        } else {
                            format!("{prefix}.{}", alias.name)
                        };
                        ctx.imports.insert(bound, (root.to_string(), path));
                    }
                }
                _ => {}
            }
            for suite in child_suites(stmt) {
                imports(suite, ctx);
            }
        }
    }
    imports(body, ctx);

    fn defs(
        body: &[ast::Stmt],
        ctx: &mut UnitContext,
        alias_ctx: &UnitContext,
        table: &MutationSpecTable,
    ) {
        for stmt in body {
            if let Some((name, args, fn_body)) = as_function_def(stmt) {
                let summary = summarize_function_with(args, fn_body, alias_ctx, table);
                ctx.locals.insert(name.to_string(), summary);
            }
            for suite in child_suites(stmt) {
                defs(suite, ctx, alias_ctx, table);
            }
        }
    }
    // Summaries only need the alias map, so a snapshot with empty locals is
    // enough to resolve calls at depth 1.
    let alias_only = UnitContext { imports: ctx.imports.clone(), locals: HashMap::new() };
    let mut with_defs = UnitContext::default();
    defs(body, &mut with_defs, &alias_only, table);
    ctx.locals = with_defs.locals;
}

fn as_function_def(stmt: &ast::Stmt) -> Option<(&str, &ast::Arguments, &[ast::Stmt])> {
    match stmt {
        ast::Stmt::FunctionDef(f) => Some((f.name.as_str(), &f.args, &f.body)),
        ast::Stmt::AsyncFunctionDef(f) => Some((f.name.as_str(), &f.args, &f.body)),
        _ => None,
    }
}

/// Child statement suites of a compound statement, including function and
/// class bodies.
pub(crate) fn child_suites(stmt: &ast::Stmt) -> Vec<&[ast::Stmt]> {
    match stmt {
        ast::Stmt::FunctionDef(s) => vec![&s.body],
        ast::Stmt::AsyncFunctionDef(s) => vec![&s.body],
        ast::Stmt::ClassDef(s) => vec![&s.body],
        ast::Stmt::If(s) => vec![&s.body, &s.orelse],
        ast::Stmt::While(s) => vec![&s.body, &s.orelse],
        ast::Stmt::For(s) => vec![&s.body, &s.orelse],
        ast::Stmt::AsyncFor(s) => vec![&s.body, &s.orelse],
        ast::Stmt::With(s) => vec![&s.body],
        ast::Stmt::AsyncWith(s) => vec![&s.body],
        ast::Stmt::Try(s) => {
            let mut suites: Vec<&[ast::Stmt]> = vec![&s.body, &s.orelse, &s.finalbody];
            for h in &s.handlers {
                let ast::ExceptHandler::ExceptHandler(h) = h;
                suites.push(&h.body);
            }
            suites
        }
        ast::Stmt::TryStar(s) => {
            let mut suites: Vec<&[ast::Stmt]> = vec![&s.body, &s.orelse, &s.finalbody];
            for h in &s.handlers {
                let ast::ExceptHandler::ExceptHandler(h) = h;
                suites.push(&h.body);
            }
            suites
        }
        ast::Stmt::Match(s) => s.cases.iter().map(|c| c.body.as_slice()).collect(),
        _ => vec![],
    }
}

/// Analyze a function body one level deep for parameter mutation.
///
/// Calls inside the body resolve through the spec table and heuristics
/// only; further local calls are not followed. Rebinding of a parameter is
/// treated as a fresh definition, not a mutation.
fn summarize_function_with(
    args: &ast::Arguments,
    body: &[ast::Stmt],
    ctx: &UnitContext,
    table: &MutationSpecTable,
) -> LocalFnSummary {
    let mut params: Vec<String> = Vec::new();
    for a in args.posonlyargs.iter().chain(args.args.iter()) {
        params.push(a.def.arg.to_string());
    }
    let vararg = args.vararg.as_ref().map(|a| a.arg.to_string());
    for a in &args.kwonlyargs {
        params.push(a.def.arg.to_string());
    }
    let kwarg = args.kwarg.as_ref().map(|a| a.arg.to_string());

    let mut universe: BTreeSet<&str> = params.iter().map(|s| s.as_str()).collect();
    if let Some(v) = &vararg {
        universe.insert(v);
    }
    if let Some(k) = &kwarg {
        universe.insert(k);
    }

    let mut mutated_opt = BTreeSet::new();
    let mut mutated_cons = BTreeSet::new();

    fn walk(
        body: &[ast::Stmt],
        universe: &BTreeSet<&str>,
        ctx: &UnitContext,
        table: &MutationSpecTable,
        opt: &mut BTreeSet<String>,
        cons: &mut BTreeSet<String>,
    ) {
        for stmt in body {
            if as_function_def(stmt).is_some() || matches!(stmt, ast::Stmt::ClassDef(_)) {
                continue; // nested definitions are out of depth-1 scope
            }
            let sets = classify_sets_at_depth(stmt, ctx, table, 1);
            for v in sets.update_opt.iter().filter(|v| universe.contains(v.as_str())) {
                opt.insert(v.clone());
            }
            for v in sets.update_cons.iter().filter(|v| universe.contains(v.as_str())) {
                cons.insert(v.clone());
            }
            for suite in child_suites(stmt) {
                walk(suite, universe, ctx, table, opt, cons);
            }
        }
    }
    walk(body, &universe, ctx, table, &mut mutated_opt, &mut mutated_cons);

    LocalFnSummary { params, vararg, kwarg, mutated_opt, mutated_cons }
}

// ---------------------------------------------------------------------------
// Expression walking
// ---------------------------------------------------------------------------

/// Root variable name of an expression (`a` for `a.b.c[0]`), if any.
pub fn expr_root_name(expr: &ast::Expr) -> Option<&str> {
    match expr {
        ast::Expr::Name(n) => Some(n.id.as_str()),
        ast::Expr::Attribute(a) => expr_root_name(&a.value),
        ast::Expr::Subscript(s) => expr_root_name(&s.value),
        ast::Expr::Starred(s) => expr_root_name(&s.value),
        _ => None,
    }
}

/// Visit `expr` and nested expressions. Lambda bodies are skipped (deferred
/// execution); comprehension bodies are visited (immediate execution).
pub(crate) fn walk_exprs<'a>(expr: &'a ast::Expr, f: &mut impl FnMut(&'a ast::Expr)) {
    f(expr);
    let mut go = |e: &'a ast::Expr| walk_exprs(e, f);
    match expr {
        ast::Expr::BoolOp(e) => e.values.iter().for_each(&mut go),
        ast::Expr::NamedExpr(e) => {
            go(&e.target);
            go(&e.value);
        }
        ast::Expr::BinOp(e) => {
            go(&e.left);
            go(&e.right);
        }
        ast::Expr::UnaryOp(e) => go(&e.operand),
        ast::Expr::Lambda(e) => {
            // Defaults evaluate at definition time; the body does not.
            for a in e.args.posonlyargs.iter().chain(e.args.args.iter()).chain(e.args.kwonlyargs.iter()) {
                if let Some(d) = &a.default {
                    go(d);
                }
            }
        }
        ast::Expr::IfExp(e) => {
            go(&e.test);
            go(&e.body);
            go(&e.orelse);
        }
        ast::Expr::Dict(e) => {
            e.keys.iter().flatten().for_each(&mut go);
            e.values.iter().for_each(&mut go);
        }
        ast::Expr::Set(e) => e.elts.iter().for_each(&mut go),
        ast::Expr::ListComp(e) => {
            go(&e.elt);
            for c in &e.generators {
                go(&c.target);
                go(&c.iter);
                c.ifs.iter().for_each(&mut go);
            }
        }
        ast::Expr::SetComp(e) => {
            go(&e.elt);
            for c in &e.generators {
                go(&c.target);
                go(&c.iter);
                c.ifs.iter().for_each(&mut go);
            }
        }
        ast::Expr::DictComp(e) => {
            go(&e.key);
            go(&e.value);
            for c in &e.generators {
                go(&c.target);
                go(&c.iter);
                c.ifs.iter().for_each(&mut go);
            }
        }
        ast::Expr::GeneratorExp(e) => {
            go(&e.elt);
            for c in &e.generators {
                go(&c.target);
                go(&c.iter);
                c.ifs.iter().for_each(&mut go);
            }
        }
        ast::Expr::Await(e) => go(&e.value),
        ast::Expr::Yield(e) => {
            if let Some(v) = &e.value {
                go(v);
            }
        }
        ast::Expr::YieldFrom(e) => go(&e.value),
        ast::Expr::Compare(e) => {
            go(&e.left);
            e.comparators.iter().for_each(&mut go);
        }
        ast::Expr::Call(e) => {
            go(&e.func);
            e.args.iter().for_each(&mut go);
            for k in &e.keywords {
                go(&k.value);
            }
        }
        ast::Expr::FormattedValue(e) => {
            go(&e.value);
            if let Some(s) = &e.format_spec {
                go(s);
            }
        }
        ast::Expr::JoinedStr(e) => e.values.iter().for_each(&mut go),
        ast::Expr::Attribute(e) => go(&e.value),
        ast::Expr::Subscript(e) => {
            go(&e.value);
            go(&e.slice);
        }
        ast::Expr::Starred(e) => go(&e.value),
        ast::Expr::List(e) => e.elts.iter().for_each(&mut go),
        ast::Expr::Tuple(e) => e.elts.iter().for_each(&mut go),
        ast::Expr::Slice(e) => {
            if let Some(l) = &e.lower {
                go(l);
            }
            if let Some(u) = &e.upper {
                go(u);
            }
            if let Some(s) = &e.step {
                go(s);
            }
        }
        ast::Expr::Constant(_) | ast::Expr::Name(_) => {}
    }
}

fn collect_calls<'a>(expr: &'a ast::Expr, out: &mut Vec<&'a ast::ExprCall>) {
    walk_exprs(expr, &mut |e| {
        if let ast::Expr::Call(c) = e {
            out.push(c);
        }
    });
}

/// Collect Load-context names from an expression.
pub(crate) fn walk_loads(expr: &ast::Expr, out: &mut BTreeSet<String>) {
    walk_exprs(expr, &mut |e| {
        if let ast::Expr::Name(n) = e {
            if matches!(n.ctx, ast::ExprContext::Load) {
                out.insert(n.id.to_string());
            }
        }
    });
}

/// Store-context names inside a value expression come only from walrus
/// targets and comprehension targets; both bind at statement execution.
fn collect_embedded_defs(expr: &ast::Expr, out: &mut BTreeSet<String>) {
    walk_exprs(expr, &mut |e| {
        if let ast::Expr::Name(n) = e {
            if matches!(n.ctx, ast::ExprContext::Store) {
                out.insert(n.id.to_string());
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Call resolution
// ---------------------------------------------------------------------------

/// Root names of every call argument (positional, starred, and keyword).
fn argument_roots(call: &ast::ExprCall) -> BTreeSet<String> {
    let mut roots = BTreeSet::new();
    for a in &call.args {
        if let Some(r) = expr_root_name(a) {
            roots.insert(r.to_string());
        }
    }
    for k in &call.keywords {
        if let Some(r) = expr_root_name(&k.value) {
            roots.insert(r.to_string());
        }
    }
    roots
}

fn unknown_effect(call: &ast::ExprCall, receiver: Option<&str>, policy: Policy) -> CallEffect {
    let mutated = match policy {
        Policy::Optimistic => BTreeSet::new(),
        Policy::Conservative => {
            let mut roots = argument_roots(call);
            if let Some(r) = receiver {
                roots.insert(r.to_string());
            }
            roots
        }
    };
    CallEffect { resolution: CallResolution::Unknown, mutated }
}

fn effect_to_mutated(
    effect: &Effect,
    call: &ast::ExprCall,
    receiver: Option<&str>,
) -> BTreeSet<String> {
    let mut mutated = BTreeSet::new();
    match effect {
        Effect::Pure => {}
        Effect::Receiver => {
            if let Some(r) = receiver {
                mutated.insert(r.to_string());
            }
        }
        Effect::Args(ixs) => {
            for &i in ixs {
                if let Some(arg) = call.args.get(i) {
                    if let Some(r) = expr_root_name(arg) {
                        mutated.insert(r.to_string());
                    }
                }
            }
        }
    }
    mutated
}

fn local_call_effect(
    summary: &LocalFnSummary,
    call: &ast::ExprCall,
    policy: Policy,
) -> CallEffect {
    let mutated_params = match policy {
        Policy::Optimistic => &summary.mutated_opt,
        Policy::Conservative => &summary.mutated_cons,
    };
    let mut mutated = BTreeSet::new();
    for (i, arg) in call.args.iter().enumerate() {
        let param = if i < summary.params.len() {
            Some(summary.params[i].as_str())
        } else {
            summary.vararg.as_deref()
        };
        if let Some(p) = param {
            if mutated_params.contains(p) {
                if let Some(r) = expr_root_name(arg) {
                    mutated.insert(r.to_string());
                }
            }
        }
    }
    for k in &call.keywords {
        let param = match &k.arg {
            Some(name) => Some(name.as_str()),
            None => summary.kwarg.as_deref(),
        };
        if let Some(p) = param {
            if mutated_params.contains(p) {
                if let Some(r) = expr_root_name(&k.value) {
                    mutated.insert(r.to_string());
                }
            }
        }
    }
    CallEffect { resolution: CallResolution::LocalBody, mutated }
}

/// Resolve the mutation effect of a call site.
pub fn resolve_call_effect(
    call: &ast::ExprCall,
    ctx: &UnitContext,
    table: &MutationSpecTable,
    policy: Policy,
) -> CallEffect {
    resolve_call_effect_at_depth(call, ctx, table, policy, 0)
}

fn resolve_call_effect_at_depth(
    call: &ast::ExprCall,
    ctx: &UnitContext,
    table: &MutationSpecTable,
    policy: Policy,
    depth: u8,
) -> CallEffect {
    match &*call.func {
        ast::Expr::Name(n) => {
            let name = n.id.as_str();
            if depth == 0 {
                if let Some(summary) = ctx.local_fn(name) {
                    return local_call_effect(summary, call, policy);
                }
            }
            if let Some((lib, path)) = ctx.import_of(name) {
                let callable = if path.is_empty() { name } else { path.as_str() };
                if let Some(effect) = table.lookup_dotted(lib, callable) {
                    return CallEffect {
                        resolution: CallResolution::SpecTable,
                        mutated: effect_to_mutated(effect, call, None),
                    };
                }
                return unknown_effect(call, None, policy);
            }
            if let Some(effect) = table.lookup("builtins", name) {
                return CallEffect {
                    resolution: CallResolution::SpecTable,
                    mutated: effect_to_mutated(effect, call, None),
                };
            }
            unknown_effect(call, None, policy)
        }
        ast::Expr::Attribute(attr) => {
            let method = attr.attr.as_str();
            let receiver = expr_root_name(&attr.value);

            // Module-qualified call through an import alias.
            if let Some(chain) = attribute_chain(&attr.value) {
                if let Some((root, rest)) = chain.split_first() {
                    if let Some((lib, prefix)) = ctx.import_of(root) {
                        let mut segments: Vec<&str> = Vec::new();
                        if !prefix.is_empty() {
                            segments.push(prefix);
                        }
                        segments.extend(rest.iter().copied());
                        segments.push(method);
                        let path = segments.join(".");
                        if let Some(effect) = table.lookup_dotted(lib, &path) {
                            return CallEffect {
                                resolution: CallResolution::SpecTable,
                                mutated: effect_to_mutated(effect, call, receiver),
                            };
                        }
                    }
                }
            }

            if table.heuristic_mutators.contains(method) {
                let mut mutated = BTreeSet::new();
                if let Some(r) = receiver {
                    mutated.insert(r.to_string());
                }
                return CallEffect { resolution: CallResolution::Heuristic, mutated };
            }
            if table.heuristic_pure.contains(method) {
                return CallEffect {
                    resolution: CallResolution::Heuristic,
                    mutated: BTreeSet::new(),
                };
            }
            unknown_effect(call, receiver, policy)
        }
        _ => unknown_effect(call, None, policy),
    }
}

/// `["np", "random"]` for the expression `np.random`; `None` when the chain
/// is not rooted in a plain name.
fn attribute_chain(expr: &ast::Expr) -> Option<Vec<&str>> {
    match expr {
        ast::Expr::Name(n) => Some(vec![n.id.as_str()]),
        ast::Expr::Attribute(a) => {
            let mut chain = attribute_chain(&a.value)?;
            chain.push(a.attr.as_str());
            Some(chain)
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Statement classification
// ---------------------------------------------------------------------------

/// DEF/UPDATE/read sets of one statement under both policies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatementSets {
    pub def_set: BTreeSet<String>,
    pub update_opt: BTreeSet<String>,
    pub update_cons: BTreeSet<String>,
    pub reads: BTreeSet<String>,
}

/// Classify a statement into DEF and UPDATE sets under `policy`.
pub fn classify_statement(
    stmt: &ast::Stmt,
    ctx: &UnitContext,
    table: &MutationSpecTable,
    policy: Policy,
) -> (BTreeSet<String>, BTreeSet<String>) {
    let sets = classify_sets(stmt, ctx, table);
    let update = match policy {
        Policy::Optimistic => sets.update_opt,
        Policy::Conservative => sets.update_cons,
    };
    (sets.def_set, update)
}

/// Classify a statement under both policies at once.
pub fn classify_sets(
    stmt: &ast::Stmt,
    ctx: &UnitContext,
    table: &MutationSpecTable,
) -> StatementSets {
    classify_sets_at_depth(stmt, ctx, table, 0)
}

fn classify_sets_at_depth(
    stmt: &ast::Stmt,
    ctx: &UnitContext,
    table: &MutationSpecTable,
    depth: u8,
) -> StatementSets {
    let mut s = StatementSets::default();
    // Expressions evaluated when this statement executes (compound
    // statements contribute their header expressions only).
    let mut value_exprs: Vec<&ast::Expr> = Vec::new();

    match stmt {
        ast::Stmt::Assign(a) => {
            value_exprs.push(&a.value);
            for t in &a.targets {
                classify_target(t, &mut s, &mut value_exprs);
            }
        }
        ast::Stmt::AugAssign(a) => {
            value_exprs.push(&a.value);
            match &*a.target {
                ast::Expr::Name(n) => {
                    s.update_opt.insert(n.id.to_string());
                    s.update_cons.insert(n.id.to_string());
                    s.reads.insert(n.id.to_string());
                }
                other => {
                    if let Some(r) = expr_root_name(other) {
                        s.update_opt.insert(r.to_string());
                        s.update_cons.insert(r.to_string());
                    }
                    value_exprs.push(other);
                }
            }
        }
        ast::Stmt::AnnAssign(a) => {
            value_exprs.push(&a.annotation);
            if let Some(v) = &a.value {
                value_exprs.push(v);
                classify_target(&a.target, &mut s, &mut value_exprs);
            }
        }
        ast::Stmt::Expr(e) => value_exprs.push(&e.value),
        ast::Stmt::Return(r) => {
            if let Some(v) = &r.value {
                value_exprs.push(v);
            }
        }
        ast::Stmt::Delete(d) => {
            for t in &d.targets {
                match t {
                    // `del x` unbinds the name: tracked as a definition
                    // event (clears accumulation), not a mutation.
                    ast::Expr::Name(n) => {
                        s.def_set.insert(n.id.to_string());
                    }
                    // `del a[i]` / `del a.attr` mutate the container.
                    other => {
                        if let Some(r) = expr_root_name(other) {
                            s.update_opt.insert(r.to_string());
                            s.update_cons.insert(r.to_string());
                        }
                        value_exprs.push(other);
                    }
                }
            }
        }
        ast::Stmt::Import(i) => {
            for alias in &i.names {
                let bound = match &alias.asname {
                    Some(a) => a.to_string(),
                    None => alias
                        .name
                        .as_str()
                        .split('.')
                        .next()
                        .unwrap_or(alias.name.as_str())
                        .to_string(),
                };
                s.def_set.insert(bound);
            }
        }
        ast::Stmt::ImportFrom(i) => {
            for alias in &i.names {
                if alias.name.as_str() == "*" {
                    continue;
                }
                s.def_set
                    .insert(alias.asname.as_ref().unwrap_or(&alias.name).to_string());
            }
        }
        ast::Stmt::FunctionDef(f) => {
            s.def_set.insert(f.name.to_string());
            value_exprs.extend(f.decorator_list.iter());
            for a in f.args.posonlyargs.iter().chain(f.args.args.iter()).chain(f.args.kwonlyargs.iter())
            {
                if let Some(d) = &a.default {
                    value_exprs.push(d);
                }
            }
        }
        ast::Stmt::AsyncFunctionDef(f) => {
            s.def_set.insert(f.name.to_string());
            value_exprs.extend(f.decorator_list.iter());
            for a in f.args.posonlyargs.iter().chain(f.args.args.iter()).chain(f.args.kwonlyargs.iter())
            {
                if let Some(d) = &a.default {
                    value_exprs.push(d);
                }
            }
        }
        ast::Stmt::ClassDef(c) => {
            s.def_set.insert(c.name.to_string());
            value_exprs.extend(c.decorator_list.iter());
            value_exprs.extend(c.bases.iter());
            for k in &c.keywords {
                value_exprs.push(&k.value);
            }
        }
        ast::Stmt::If(i) => value_exprs.push(&i.test),
        ast::Stmt::While(w) => value_exprs.push(&w.test),
        ast::Stmt::For(f) => {
            value_exprs.push(&f.iter);
            classify_target(&f.target, &mut s, &mut value_exprs);
        }
        ast::Stmt::AsyncFor(f) => {
            value_exprs.push(&f.iter);
            classify_target(&f.target, &mut s, &mut value_exprs);
        }
        ast::Stmt::With(w) => {
            for item in &w.items {
                value_exprs.push(&item.context_expr);
                if let Some(v) = &item.optional_vars {
                    classify_target(v, &mut s, &mut value_exprs);
                }
            }
        }
        ast::Stmt::AsyncWith(w) => {
            for item in &w.items {
                value_exprs.push(&item.context_expr);
                if let Some(v) = &item.optional_vars {
                    classify_target(v, &mut s, &mut value_exprs);
                }
            }
        }
        ast::Stmt::Match(m) => {
            value_exprs.push(&m.subject);
            for case in &m.cases {
                collect_pattern_bindings(&case.pattern, &mut s.def_set);
                if let Some(g) = &case.guard {
                    value_exprs.push(g);
                }
            }
        }
        ast::Stmt::Raise(r) => {
            if let Some(e) = &r.exc {
                value_exprs.push(e);
            }
            if let Some(c) = &r.cause {
                value_exprs.push(c);
            }
        }
        ast::Stmt::Assert(a) => {
            value_exprs.push(&a.test);
            if let Some(m) = &a.msg {
                value_exprs.push(m);
            }
        }
        // Try headers carry no expressions; handlers are classified by the
        // CFG builder. Global/nonlocal declarations bind nothing here.
        ast::Stmt::Try(_)
        | ast::Stmt::TryStar(_)
        | ast::Stmt::Global(_)
        | ast::Stmt::Nonlocal(_)
        | ast::Stmt::Pass(_)
        | ast::Stmt::Break(_)
        | ast::Stmt::Continue(_)
        | ast::Stmt::TypeAlias(_) => {}
    }

    let mut calls: Vec<&ast::ExprCall> = Vec::new();
    for expr in &value_exprs {
        walk_loads(expr, &mut s.reads);
        collect_embedded_defs(expr, &mut s.def_set);
        collect_calls(expr, &mut calls);
    }
    for call in calls {
        let opt = resolve_call_effect_at_depth(call, ctx, table, Policy::Optimistic, depth);
        let cons = resolve_call_effect_at_depth(call, ctx, table, Policy::Conservative, depth);
        s.update_opt.extend(opt.mutated);
        s.update_cons.extend(cons.mutated);
    }

    // A name defined by this statement is not simultaneously updated by it:
    // the definition resets tracking either way.
    for d in &s.def_set {
        s.update_opt.remove(d);
        s.update_cons.remove(d);
    }
    s
}

/// Classify an assignment-target expression: names (possibly nested in
/// tuples/lists/stars) are definitions; subscript and attribute targets are
/// updates of the root name.
fn classify_target<'a>(
    target: &'a ast::Expr,
    s: &mut StatementSets,
    value_exprs: &mut Vec<&'a ast::Expr>,
) {
    match target {
        ast::Expr::Name(n) => {
            s.def_set.insert(n.id.to_string());
        }
        ast::Expr::Tuple(t) => {
            for e in &t.elts {
                classify_target(e, s, value_exprs);
            }
        }
        ast::Expr::List(l) => {
            for e in &l.elts {
                classify_target(e, s, value_exprs);
            }
        }
        ast::Expr::Starred(st) => classify_target(&st.value, s, value_exprs),
        ast::Expr::Subscript(sub) => {
            if let Some(r) = expr_root_name(&sub.value) {
                s.update_opt.insert(r.to_string());
                s.update_cons.insert(r.to_string());
            }
            value_exprs.push(&sub.value);
            value_exprs.push(&sub.slice);
        }
        ast::Expr::Attribute(attr) => {
            if let Some(r) = expr_root_name(&attr.value) {
                s.update_opt.insert(r.to_string());
                s.update_cons.insert(r.to_string());
            }
            value_exprs.push(&attr.value);
        }
        other => value_exprs.push(other),
    }
}

fn collect_pattern_bindings(pattern: &ast::Pattern, out: &mut BTreeSet<String>) {
    match pattern {
        ast::Pattern::MatchValue(_) | ast::Pattern::MatchSingleton(_) => {}
        ast::Pattern::MatchSequence(p) => {
            p.patterns.iter().for_each(|q| collect_pattern_bindings(q, out))
        }
        ast::Pattern::MatchMapping(p) => {
            p.patterns.iter().for_each(|q| collect_pattern_bindings(q, out));
            if let Some(rest) = &p.rest {
                out.insert(rest.to_string());
            }
        }
        ast::Pattern::MatchClass(p) => {
            p.patterns.iter().for_each(|q| collect_pattern_bindings(q, out));
            p.kwd_patterns.iter().for_each(|q| collect_pattern_bindings(q, out));
        }
        ast::Pattern::MatchStar(p) => {
            if let Some(n) = &p.name {
                out.insert(n.to_string());
            }
        }
        ast::Pattern::MatchAs(p) => {
            if let Some(q) = &p.pattern {
                collect_pattern_bindings(q, out);
            }
            if let Some(n) = &p.name {
                out.insert(n.to_string());
            }
        }
        ast::Pattern::MatchOr(p) => {
            p.patterns.iter().for_each(|q| collect_pattern_bindings(q, out))
        }
    }
}

//! Scope extraction and control-flow graph construction.
//!
//! A unit parses into one module scope plus one scope per function or
//! method definition (nested functions included). Lambdas and
//! comprehensions are inlined into their enclosing statement. Each scope
//! carries a flat, source-ordered statement list with DEF/UPDATE sets and a
//! structural body tree the CFG builder consumes.
//!
//! The CFG supports sequencing, `if`/`elif`/`else`, `while` and `for` loops
//! (back edge plus loop-exit edge), `break`/`continue`, `return` (edge to
//! the scope exit), and `try`/`except`/`finally` with conservative edges
//! (every try-body block may jump to each handler and to the `finally`
//! block). `with` is treated as sequential. Unsupported constructs degrade
//! to sequential flow.

use std::collections::BTreeSet;

use rustpython_parser::ast::{self, Ranged};
use rustpython_parser::source_code::LineIndex;
use rustpython_parser::{parse, Mode};

use crate::error::{Error, Result};
use crate::ingest::{SourceUnit, UnitKind};
use crate::mutation::{self, MutationSpecTable, UnitContext};

/// Scope granularity: whole module or a single function body.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeKind {
    Module,
    Function,
}

/// Statement classification used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatementKind {
    Assign,
    AugAssign,
    SubscriptAssign,
    AttributeAssign,
    CallStmt,
    Control,
    Return,
    Import,
    Other,
}

/// Control-flow effect of a statement, used by the CFG builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum FlowEffect {
    None,
    Return,
    Break,
    Continue,
    Raise,
}

/// One statement of a scope with its variable sets.
///
/// `line` is the first physical line; multi-line statements own their first
/// line for all line-based accumulation.
#[derive(Debug, Clone)]
pub struct Statement {
    /// Scope-unique ordinal (index into `Scope::statements`).
    pub id: usize,
    pub line: usize,
    /// Inclusive physical line range of the full construct.
    pub span: (usize, usize),
    pub kind: StatementKind,
    pub reads: BTreeSet<String>,
    pub def_set: BTreeSet<String>,
    pub update_set_opt: BTreeSet<String>,
    pub update_set_cons: BTreeSet<String>,
    /// Synthetic `pass` emitted for an empty notebook cell; excluded from
    /// every metric numerator and denominator.
    pub is_placeholder: bool,
    /// True for `def` and `class` statements (their bodies live in nested
    /// scopes or are skipped).
    pub is_definition: bool,
    pub(crate) flow: FlowEffect,
}

/// Structural body tree of a scope (indices into `Scope::statements`).
#[derive(Debug, Clone)]
pub enum Node {
    Stmt(usize),
    If { header: usize, then_body: Vec<Node>, else_body: Vec<Node> },
    While { header: usize, body: Vec<Node>, else_body: Vec<Node> },
    For { header: usize, body: Vec<Node>, else_body: Vec<Node> },
    With { header: usize, body: Vec<Node> },
    Match { header: usize, arms: Vec<Vec<Node>> },
    Try { body: Vec<Node>, handlers: Vec<Handler>, else_body: Vec<Node>, final_body: Vec<Node> },
}

/// An `except` clause: its header statement and body.
#[derive(Debug, Clone)]
pub struct Handler {
    pub header: usize,
    pub body: Vec<Node>,
}

/// A module or function scope.
#[derive(Debug, Clone)]
pub struct Scope {
    /// Qualified name: `<module>`, `f`, `Class.method`, `cell_0002.helper`.
    pub name: String,
    pub kind: ScopeKind,
    pub params: Vec<String>,
    /// Line of the `def` (or 1 for the module scope). Parameters count as
    /// defined here.
    pub header_line: usize,
    pub span: (usize, usize),
    pub statements: Vec<Statement>,
    pub body: Vec<Node>,
    /// Index of the enclosing scope in the `parse_scopes` result.
    pub parent: Option<usize>,
    /// True for a notebook cell wrapper function (`cell_NNNN`).
    pub is_cell: bool,
}

impl Scope {
    /// Statements that count toward metrics (placeholders excluded).
    pub fn countable_statements(&self) -> usize {
        self.statements.iter().filter(|s| !s.is_placeholder).count()
    }
}

// ---------------------------------------------------------------------------
// Scope extraction
// ---------------------------------------------------------------------------

/// Parse a unit's analyzable text into scopes.
///
/// Returns `Error::Syntax` when the text does not parse; the caller flags
/// the unit as unanalyzable. Class bodies do not form scopes: their methods
/// become function scopes and other class-body statements are skipped.
pub fn parse_scopes(unit: &SourceUnit, table: &MutationSpecTable) -> Result<Vec<Scope>> {
    let module = parse(&unit.text, Mode::Module, &unit.path.to_string_lossy()).map_err(|e| {
        Error::Syntax { path: unit.path.clone(), message: e.to_string() }
    })?;
    let body = match module {
        ast::Mod::Module(m) => m.body,
        _ => Vec::new(),
    };
    let index = LineIndex::from_source_text(&unit.text);
    let ctx = UnitContext::build(&body, table);
    let line_count = unit.text.lines().count().max(1);

    let mut extractor = Extractor {
        unit,
        table,
        ctx: &ctx,
        index: &index,
        text: &unit.text,
        scopes: Vec::new(),
        used_names: BTreeSet::new(),
    };

    let mut module_scope = Scope {
        name: "<module>".to_string(),
        kind: ScopeKind::Module,
        params: Vec::new(),
        header_line: 1,
        span: (1, line_count),
        statements: Vec::new(),
        body: Vec::new(),
        parent: None,
        is_cell: false,
    };
    extractor.scopes.push(module_scope.clone());

    let mut pending: Vec<PendingScope> = Vec::new();
    module_scope.body = extractor.collect_suite(&body, 0, "", &mut module_scope.statements, &mut pending);
    extractor.scopes[0] = module_scope;

    // Children are processed in discovery order, which is source order.
    let mut queue = std::collections::VecDeque::from(pending);
    while let Some(p) = queue.pop_front() {
        let scope_index = extractor.scopes.len();
        let scope = extractor.build_function_scope(&p, scope_index, &mut queue);
        extractor.scopes.push(scope);
    }

    Ok(extractor.scopes)
}

struct PendingScope {
    parent: usize,
    path: String,
    name: String,
    header_line: usize,
    end_line: usize,
    params: Vec<String>,
    body: Vec<ast::Stmt>,
}

struct Extractor<'a> {
    unit: &'a SourceUnit,
    table: &'a MutationSpecTable,
    ctx: &'a UnitContext,
    index: &'a LineIndex,
    text: &'a str,
    scopes: Vec<Scope>,
    used_names: BTreeSet<String>,
}

impl<'a> Extractor<'a> {
    fn row(&self, offset: rustpython_parser::text_size::TextSize) -> usize {
        self.index.source_location(offset, self.text).row.get() as usize
    }

    fn stmt_lines(&self, stmt: &ast::Stmt) -> (usize, usize) {
        (self.row(stmt.range().start()), self.row(stmt.range().end()))
    }

    fn unique_name(&mut self, candidate: String, line: usize) -> String {
        if self.used_names.insert(candidate.clone()) {
            candidate
        } else {
            let named = format!("{candidate}@L{line}");
            self.used_names.insert(named.clone());
            named
        }
    }

    fn make_statement(&self, id: usize, stmt: &ast::Stmt) -> Statement {
        let (start, end) = self.stmt_lines(stmt);
        let sets = mutation::classify_sets(stmt, self.ctx, self.table);
        let kind = statement_kind(stmt);
        let flow = match stmt {
            ast::Stmt::Return(_) => FlowEffect::Return,
            ast::Stmt::Break(_) => FlowEffect::Break,
            ast::Stmt::Continue(_) => FlowEffect::Continue,
            ast::Stmt::Raise(_) => FlowEffect::Raise,
            _ => FlowEffect::None,
        };
        let is_placeholder =
            matches!(stmt, ast::Stmt::Pass(_)) && self.unit.placeholder_lines.contains(&start);
        let is_definition = matches!(
            stmt,
            ast::Stmt::FunctionDef(_) | ast::Stmt::AsyncFunctionDef(_) | ast::Stmt::ClassDef(_)
        );
        Statement {
            id,
            line: start,
            span: (start, end),
            kind,
            reads: sets.reads,
            def_set: sets.def_set,
            update_set_opt: sets.update_opt,
            update_set_cons: sets.update_cons,
            is_placeholder,
            is_definition,
            flow,
        }
    }

    fn handler_statement(&self, id: usize, handler: &ast::ExceptHandlerExceptHandler) -> Statement {
        let start = self.row(handler.range.start());
        let mut reads = BTreeSet::new();
        let mut def_set = BTreeSet::new();
        if let Some(t) = &handler.type_ {
            mutation::walk_loads(t, &mut reads);
        }
        if let Some(name) = &handler.name {
            def_set.insert(name.to_string());
        }
        Statement {
            id,
            line: start,
            span: (start, start),
            kind: StatementKind::Control,
            reads,
            def_set,
            update_set_opt: BTreeSet::new(),
            update_set_cons: BTreeSet::new(),
            is_placeholder: false,
            is_definition: false,
            flow: FlowEffect::None,
        }
    }

    /// Collect a suite into body nodes, appending statements in source
    /// order and queueing nested function scopes.
    fn collect_suite(
        &mut self,
        suite: &[ast::Stmt],
        parent: usize,
        path: &str,
        statements: &mut Vec<Statement>,
        pending: &mut Vec<PendingScope>,
    ) -> Vec<Node> {
        let mut nodes = Vec::new();
        for stmt in suite {
            match stmt {
                ast::Stmt::FunctionDef(_) | ast::Stmt::AsyncFunctionDef(_) => {
                    let id = statements.len();
                    statements.push(self.make_statement(id, stmt));
                    nodes.push(Node::Stmt(id));
                    self.queue_function(stmt, parent, path, pending);
                }
                ast::Stmt::ClassDef(c) => {
                    let id = statements.len();
                    statements.push(self.make_statement(id, stmt));
                    nodes.push(Node::Stmt(id));
                    let class_path = join_path(path, c.name.as_str());
                    self.queue_class_members(&c.body, parent, &class_path, pending);
                }
                ast::Stmt::If(s) => {
                    let id = statements.len();
                    statements.push(self.make_statement(id, stmt));
                    let then_body = self.collect_suite(&s.body, parent, path, statements, pending);
                    let else_body =
                        self.collect_suite(&s.orelse, parent, path, statements, pending);
                    nodes.push(Node::If { header: id, then_body, else_body });
                }
                ast::Stmt::While(s) => {
                    let id = statements.len();
                    statements.push(self.make_statement(id, stmt));
                    let body = self.collect_suite(&s.body, parent, path, statements, pending);
                    let else_body =
                        self.collect_suite(&s.orelse, parent, path, statements, pending);
                    nodes.push(Node::While { header: id, body, else_body });
                }
                ast::Stmt::For(s) => {
                    let id = statements.len();
                    statements.push(self.make_statement(id, stmt));
                    let body = self.collect_suite(&s.body, parent, path, statements, pending);
                    let else_body =
                        self.collect_suite(&s.orelse, parent, path, statements, pending);
                    nodes.push(Node::For { header: id, body, else_body });
                }
                ast::Stmt::AsyncFor(s) => {
                    let id = statements.len();
                    statements.push(self.make_statement(id, stmt));
                    let body = self.collect_suite(&s.body, parent, path, statements, pending);
                    let else_body =
                        self.collect_suite(&s.orelse, parent, path, statements, pending);
                    nodes.push(Node::For { header: id, body, else_body });
                }
                ast::Stmt::With(s) => {
                    let id = statements.len();
                    statements.push(self.make_statement(id, stmt));
                    let body = self.collect_suite(&s.body, parent, path, statements, pending);
                    nodes.push(Node::With { header: id, body });
                }
                ast::Stmt::AsyncWith(s) => {
                    let id = statements.len();
                    statements.push(self.make_statement(id, stmt));
                    let body = self.collect_suite(&s.body, parent, path, statements, pending);
                    nodes.push(Node::With { header: id, body });
                }
                ast::Stmt::Match(s) => {
                    let id = statements.len();
                    statements.push(self.make_statement(id, stmt));
                    let arms = s
                        .cases
                        .iter()
                        .map(|c| self.collect_suite(&c.body, parent, path, statements, pending))
                        .collect();
                    nodes.push(Node::Match { header: id, arms });
                }
                ast::Stmt::Try(s) => {
                    let body = self.collect_suite(&s.body, parent, path, statements, pending);
                    let mut handlers = Vec::new();
                    for h in &s.handlers {
                        let ast::ExceptHandler::ExceptHandler(h) = h;
                        let id = statements.len();
                        statements.push(self.handler_statement(id, h));
                        let hbody = self.collect_suite(&h.body, parent, path, statements, pending);
                        handlers.push(Handler { header: id, body: hbody });
                    }
                    let else_body =
                        self.collect_suite(&s.orelse, parent, path, statements, pending);
                    let final_body =
                        self.collect_suite(&s.finalbody, parent, path, statements, pending);
                    nodes.push(Node::Try { body, handlers, else_body, final_body });
                }
                ast::Stmt::TryStar(s) => {
                    let body = self.collect_suite(&s.body, parent, path, statements, pending);
                    let mut handlers = Vec::new();
                    for h in &s.handlers {
                        let ast::ExceptHandler::ExceptHandler(h) = h;
                        let id = statements.len();
                        statements.push(self.handler_statement(id, h));
                        let hbody = self.collect_suite(&h.body, parent, path, statements, pending);
                        handlers.push(Handler { header: id, body: hbody });
                    }
                    let else_body =
                        self.collect_suite(&s.orelse, parent, path, statements, pending);
                    let final_body =
                        self.collect_suite(&s.finalbody, parent, path, statements, pending);
                    nodes.push(Node::Try { body, handlers, else_body, final_body });
                }
                other => {
                    let id = statements.len();
                    statements.push(self.make_statement(id, other));
                    nodes.push(Node::Stmt(id));
                }
            }
        }
        nodes
    }

    fn queue_function(
        &mut self,
        stmt: &ast::Stmt,
        parent: usize,
        path: &str,
        pending: &mut Vec<PendingScope>,
    ) {
        let (name, args, body, range) = match stmt {
            ast::Stmt::FunctionDef(f) => (f.name.as_str(), &f.args, &f.body, f.range),
            ast::Stmt::AsyncFunctionDef(f) => (f.name.as_str(), &f.args, &f.body, f.range),
            _ => return,
        };
        let header_line = self.row(range.start());
        let end_line = self.row(range.end());
        let mut params: Vec<String> = Vec::new();
        for a in args.posonlyargs.iter().chain(args.args.iter()) {
            params.push(a.def.arg.to_string());
        }
        if let Some(v) = &args.vararg {
            params.push(v.arg.to_string());
        }
        for a in &args.kwonlyargs {
            params.push(a.def.arg.to_string());
        }
        if let Some(k) = &args.kwarg {
            params.push(k.arg.to_string());
        }
        pending.push(PendingScope {
            parent,
            path: path.to_string(),
            name: name.to_string(),
            header_line,
            end_line,
            params,
            body: body.clone(),
        });
    }

    /// Class bodies are not scopes; walk them (and any compound statements
    /// inside) only to discover methods and nested classes.
    fn queue_class_members(
        &mut self,
        body: &[ast::Stmt],
        parent: usize,
        class_path: &str,
        pending: &mut Vec<PendingScope>,
    ) {
        for stmt in body {
            match stmt {
                ast::Stmt::FunctionDef(_) | ast::Stmt::AsyncFunctionDef(_) => {
                    self.queue_function(stmt, parent, class_path, pending);
                }
                ast::Stmt::ClassDef(c) => {
                    let nested = join_path(class_path, c.name.as_str());
                    self.queue_class_members(&c.body, parent, &nested, pending);
                }
                other => {
                    for suite in mutation::child_suites(other) {
                        self.queue_class_members(suite, parent, class_path, pending);
                    }
                }
            }
        }
    }

    fn build_function_scope(
        &mut self,
        p: &PendingScope,
        scope_index: usize,
        queue: &mut std::collections::VecDeque<PendingScope>,
    ) -> Scope {
        let qualified = join_path(&p.path, &p.name);
        let name = self.unique_name(qualified, p.header_line);
        let is_cell = self.unit.kind == UnitKind::Notebook
            && p.parent == 0
            && p.path.is_empty()
            && is_cell_wrapper_name(&p.name);

        let mut statements = Vec::new();
        let mut pending = Vec::new();
        let body = self.collect_suite(&p.body, scope_index, &name.clone(), &mut statements, &mut pending);
        for child in pending {
            queue.push_back(child);
        }

        Scope {
            name,
            kind: ScopeKind::Function,
            params: p.params.clone(),
            header_line: p.header_line,
            span: (p.header_line, p.end_line),
            statements,
            body,
            parent: Some(p.parent),
            is_cell,
        }
    }
}

fn join_path(path: &str, name: &str) -> String {
    if path.is_empty() {
        name.to_string()
    } else {
        format!("{path}.{name}")
    }
}

fn is_cell_wrapper_name(name: &str) -> bool {
    name.strip_prefix("cell_")
        .map(|rest| rest.len() == 4 && rest.bytes().all(|b| b.is_ascii_digit()))
        .unwrap_or(false)
}

fn statement_kind(stmt: &ast::Stmt) -> StatementKind {
    match stmt {
        ast::Stmt::Assign(a) => {
            let mut kind = StatementKind::Assign;
            for t in &a.targets {
                match t {
                    ast::Expr::Subscript(_) => return StatementKind::SubscriptAssign,
                    ast::Expr::Attribute(_) => kind = StatementKind::AttributeAssign,
                    _ => {}
                }
            }
            kind
        }
        ast::Stmt::AnnAssign(a) => {
            if a.value.is_some() {
                match &*a.target {
                    ast::Expr::Subscript(_) => StatementKind::SubscriptAssign,
                    ast::Expr::Attribute(_) => StatementKind::AttributeAssign,
                    _ => StatementKind::Assign,
                }
            } else {
                StatementKind::Other
            }
        }
        ast::Stmt::AugAssign(_) => StatementKind::AugAssign,
        ast::Stmt::Expr(e) => {
            if matches!(&*e.value, ast::Expr::Call(_)) {
                StatementKind::CallStmt
            } else {
                StatementKind::Other
            }
        }
        ast::Stmt::Return(_) => StatementKind::Return,
        ast::Stmt::Import(_) | ast::Stmt::ImportFrom(_) => StatementKind::Import,
        ast::Stmt::If(_)
        | ast::Stmt::While(_)
        | ast::Stmt::For(_)
        | ast::Stmt::AsyncFor(_)
        | ast::Stmt::With(_)
        | ast::Stmt::AsyncWith(_)
        | ast::Stmt::Match(_)
        | ast::Stmt::Break(_)
        | ast::Stmt::Continue(_)
        | ast::Stmt::Raise(_) => StatementKind::Control,
        _ => StatementKind::Other,
    }
}

// ---------------------------------------------------------------------------
// Control-flow graph
// ---------------------------------------------------------------------------

/// Kind of a control-flow edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    Seq,
    True,
    False,
    Back,
    Break,
    Continue,
    Return,
    Except,
    Finally,
}

impl EdgeKind {
    /// Loop edges are exempt from the "entry has no predecessors" invariant.
    pub fn is_loop(&self) -> bool {
        matches!(self, EdgeKind::Back | EdgeKind::Continue)
    }
}

/// A directed edge between blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

/// A maximal straight-line run of statements.
#[derive(Debug, Clone)]
pub struct BasicBlock {
    pub id: usize,
    /// Statement ids, contiguous in source order.
    pub statements: Vec<usize>,
}

/// Control-flow graph of one scope.
#[derive(Debug, Clone)]
pub struct Cfg {
    pub blocks: Vec<BasicBlock>,
    pub edges: BTreeSet<Edge>,
    pub entry: usize,
    pub exit: usize,
}

impl Cfg {
    /// Predecessor lists indexed by block id.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for e in &self.edges {
            preds[e.to].push(e.from);
        }
        for p in &mut preds {
            p.sort_unstable();
            p.dedup();
        }
        preds
    }

    /// Successor lists indexed by block id.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut succs = vec![Vec::new(); self.blocks.len()];
        for e in &self.edges {
            succs[e.from].push(e.to);
        }
        for s in &mut succs {
            s.sort_unstable();
            s.dedup();
        }
        succs
    }

    /// Blocks reachable from the entry.
    pub fn reachable(&self) -> Vec<bool> {
        let succs = self.successors();
        let mut seen = vec![false; self.blocks.len()];
        let mut stack = vec![self.entry];
        seen[self.entry] = true;
        while let Some(b) = stack.pop() {
            for &s in &succs[b] {
                if !seen[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
        seen
    }

    /// True when the graph has no loop edges (checkable by topological
    /// sort over non-loop edges).
    pub fn is_acyclic(&self) -> bool {
        !self.edges.iter().any(|e| e.kind.is_loop())
    }

    /// DOT-format rendering for debugging.
    pub fn to_dot(&self, scope: &Scope) -> String {
        let mut out = String::new();
        out.push_str(&format!("digraph \"{}\" {{\n", scope.name.replace('"', "'")));
        out.push_str("  node [shape=box, fontname=\"monospace\"];\n");
        for block in &self.blocks {
            let lines: Vec<String> = block
                .statements
                .iter()
                .map(|&s| format!("L{}", scope.statements[s].line))
                .collect();
            let mut label = format!("B{}", block.id);
            if block.id == self.entry {
                label.push_str(" (entry)");
            }
            if block.id == self.exit {
                label.push_str(" (exit)");
            }
            if !lines.is_empty() {
                label.push_str("\\n");
                label.push_str(&lines.join(" "));
            }
            out.push_str(&format!("  b{} [label=\"{}\"];\n", block.id, label));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  b{} -> b{} [label=\"{:?}\"];\n",
                e.from, e.to, e.kind
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Build the control-flow graph of a scope.
pub fn build_cfg(scope: &Scope) -> Cfg {
    let mut b = Builder {
        scope,
        blocks: vec![Vec::new()],
        edges: BTreeSet::new(),
        current: 0,
        live: true,
        exit_jumps: Vec::new(),
        loops: Vec::new(),
        tries: Vec::new(),
    };
    b.build_suite(&scope.body);

    let exit = if b.exit_jumps.is_empty() {
        b.current
    } else if b.blocks[b.current].is_empty() {
        b.current
    } else {
        let e = b.new_block();
        if b.live {
            b.edge(b.current, e, EdgeKind::Seq);
        }
        e
    };
    for (from, kind) in std::mem::take(&mut b.exit_jumps) {
        b.edge(from, exit, kind);
    }

    Cfg {
        blocks: b
            .blocks
            .into_iter()
            .enumerate()
            .map(|(id, statements)| BasicBlock { id, statements })
            .collect(),
        edges: b.edges,
        entry: 0,
        exit,
    }
}

struct LoopCtx {
    header: usize,
    breaks: Vec<usize>,
}

struct TryCtx {
    handler_entries: Vec<usize>,
    finally_entry: Option<usize>,
}

struct Builder<'s> {
    #[allow(dead_code)]
    scope: &'s Scope,
    blocks: Vec<Vec<usize>>,
    edges: BTreeSet<Edge>,
    current: usize,
    /// False after a terminator: the next appended statement is dead code
    /// and opens a fresh unreachable block.
    live: bool,
    exit_jumps: Vec<(usize, EdgeKind)>,
    loops: Vec<LoopCtx>,
    tries: Vec<TryCtx>,
}

impl<'s> Builder<'s> {
    fn new_block(&mut self) -> usize {
        self.blocks.push(Vec::new());
        self.blocks.len() - 1
    }

    fn edge(&mut self, from: usize, to: usize, kind: EdgeKind) {
        self.edges.insert(Edge { from, to, kind });
    }

    fn append(&mut self, stmt: usize) {
        if !self.live {
            self.current = self.new_block();
            self.live = true;
        }
        self.blocks[self.current].push(stmt);
    }

    /// A block suitable as a join/loop-header target: reuses the current
    /// block when it is still empty, otherwise opens a fresh one.
    fn fresh_target(&mut self) -> usize {
        if self.blocks[self.current].is_empty() {
            self.current
        } else {
            let b = self.new_block();
            if self.live {
                self.edge(self.current, b, EdgeKind::Seq);
            }
            self.current = b;
            self.live = true;
            b
        }
    }

    fn build_suite(&mut self, nodes: &[Node]) {
        for node in nodes {
            self.build_node(node);
        }
    }

    fn build_node(&mut self, node: &Node) {
        match node {
            Node::Stmt(i) => {
                self.append(*i);
                match self.scope.statements[*i].flow {
                    FlowEffect::None => {}
                    FlowEffect::Return => {
                        self.exit_jumps.push((self.current, EdgeKind::Return));
                        self.add_finally_edges(self.current);
                        self.live = false;
                    }
                    FlowEffect::Break => {
                        let cur = self.current;
                        if let Some(l) = self.loops.last_mut() {
                            l.breaks.push(cur);
                        } else {
                            // break outside a loop: syntactically invalid,
                            // degrade to sequential flow
                            return;
                        }
                        self.live = false;
                    }
                    FlowEffect::Continue => {
                        if let Some(header) = self.loops.last().map(|l| l.header) {
                            self.edge(self.current, header, EdgeKind::Continue);
                            self.live = false;
                        }
                    }
                    FlowEffect::Raise => {
                        let cur = self.current;
                        self.add_exception_edges(cur);
                        self.add_finally_edges(cur);
                        self.exit_jumps.push((cur, EdgeKind::Except));
                        self.live = false;
                    }
                }
            }
            Node::If { header, then_body, else_body } => {
                self.append(*header);
                let cond = self.current;
                let cond_live = self.live;

                let then_b = self.new_block();
                self.edge(cond, then_b, EdgeKind::True);
                self.current = then_b;
                self.live = cond_live;
                self.build_suite(then_body);
                let then_end = (self.current, self.live);

                let else_end = if else_body.is_empty() {
                    None
                } else {
                    let else_b = self.new_block();
                    self.edge(cond, else_b, EdgeKind::False);
                    self.current = else_b;
                    self.live = cond_live;
                    self.build_suite(else_body);
                    Some((self.current, self.live))
                };

                let join = self.new_block();
                let mut join_live = false;
                if then_end.1 {
                    self.edge(then_end.0, join, EdgeKind::Seq);
                    join_live = true;
                }
                match else_end {
                    Some((b, l)) => {
                        if l {
                            self.edge(b, join, EdgeKind::Seq);
                            join_live = true;
                        }
                    }
                    None => {
                        self.edge(cond, join, EdgeKind::False);
                        join_live = join_live || cond_live;
                    }
                }
                self.current = join;
                self.live = join_live;
            }
            Node::While { header, body, else_body }
            | Node::For { header, body, else_body } => {
                let head = self.fresh_target();
                self.append(*header);

                let body_b = self.new_block();
                self.edge(head, body_b, EdgeKind::True);
                self.loops.push(LoopCtx { header: head, breaks: Vec::new() });
                self.current = body_b;
                self.live = true;
                self.build_suite(body);
                if self.live {
                    self.edge(self.current, head, EdgeKind::Back);
                }
                let breaks = self.loops.pop().map(|l| l.breaks).unwrap_or_default();

                let after;
                if else_body.is_empty() {
                    after = self.new_block();
                    self.edge(head, after, EdgeKind::False);
                } else {
                    let else_b = self.new_block();
                    self.edge(head, else_b, EdgeKind::False);
                    self.current = else_b;
                    self.live = true;
                    self.build_suite(else_body);
                    after = self.new_block();
                    if self.live {
                        self.edge(self.current, after, EdgeKind::Seq);
                    }
                }
                for b in breaks {
                    self.edge(b, after, EdgeKind::Break);
                }
                self.current = after;
                self.live = true;
            }
            Node::With { header, body } => {
                self.append(*header);
                self.build_suite(body);
            }
            Node::Match { header, arms } => {
                self.append(*header);
                let head = self.current;
                let head_live = self.live;
                let mut arm_ends = Vec::new();
                for arm in arms {
                    let arm_b = self.new_block();
                    self.edge(head, arm_b, EdgeKind::True);
                    self.current = arm_b;
                    self.live = head_live;
                    self.build_suite(arm);
                    arm_ends.push((self.current, self.live));
                }
                let join = self.new_block();
                self.edge(head, join, EdgeKind::False);
                let mut join_live = head_live;
                for (b, l) in arm_ends {
                    if l {
                        self.edge(b, join, EdgeKind::Seq);
                        join_live = true;
                    }
                }
                self.current = join;
                self.live = join_live;
            }
            Node::Try { body, handlers, else_body, final_body } => {
                let body_entry = self.fresh_target();

                let handler_entries: Vec<usize> =
                    handlers.iter().map(|_| self.new_block()).collect();
                let finally_entry =
                    if final_body.is_empty() { None } else { Some(self.new_block()) };
                self.tries.push(TryCtx {
                    handler_entries: handler_entries.clone(),
                    finally_entry,
                });

                let mark = self.blocks.len();
                self.current = body_entry;
                self.live = true;
                self.build_suite(body);
                let body_end = (self.current, self.live);
                let mut body_blocks: Vec<usize> = vec![body_entry];
                body_blocks.extend(mark..self.blocks.len());
                self.tries.pop();

                // Blocks that may raise into the finally clause: the try
                // body plus else and handler blocks built below.
                let mut finally_sources = body_blocks.clone();

                // Normal completion runs the else clause.
                let normal_end = if else_body.is_empty() {
                    body_end
                } else {
                    let else_b = self.new_block();
                    if body_end.1 {
                        self.edge(body_end.0, else_b, EdgeKind::Seq);
                    }
                    let else_mark = self.blocks.len();
                    self.current = else_b;
                    self.live = body_end.1;
                    self.build_suite(else_body);
                    finally_sources.push(else_b);
                    finally_sources.extend(else_mark..self.blocks.len());
                    (self.current, self.live)
                };

                // Handler bodies.
                let mut handler_ends = Vec::new();
                for (handler, entry) in handlers.iter().zip(&handler_entries) {
                    let h_mark = self.blocks.len();
                    self.current = *entry;
                    self.live = true;
                    self.append(handler.header);
                    self.build_suite(&handler.body);
                    handler_ends.push((self.current, self.live));
                    finally_sources.push(*entry);
                    finally_sources.extend(h_mark..self.blocks.len());
                }

                // Conservative exception edges: every try-body block may
                // jump to each handler; every protected block may jump to
                // the finally block.
                for &b in &body_blocks {
                    for &h in &handler_entries {
                        self.edge(b, h, EdgeKind::Except);
                    }
                }
                if let Some(f) = finally_entry {
                    for &b in &finally_sources {
                        if b != f {
                            self.edge(b, f, EdgeKind::Finally);
                        }
                    }
                }

                if let Some(f) = finally_entry {
                    if normal_end.1 {
                        self.edge(normal_end.0, f, EdgeKind::Seq);
                    }
                    for (b, l) in &handler_ends {
                        if *l {
                            self.edge(*b, f, EdgeKind::Seq);
                        }
                    }
                    self.current = f;
                    self.live = true;
                    self.build_suite(final_body);
                    let after = self.new_block();
                    if self.live {
                        self.edge(self.current, after, EdgeKind::Seq);
                    }
                    self.current = after;
                    self.live = true;
                } else {
                    let after = self.new_block();
                    let mut after_live = false;
                    if normal_end.1 {
                        self.edge(normal_end.0, after, EdgeKind::Seq);
                        after_live = true;
                    }
                    for (b, l) in &handler_ends {
                        if *l {
                            self.edge(*b, after, EdgeKind::Seq);
                            after_live = true;
                        }
                    }
                    self.current = after;
                    self.live = after_live;
                }
            }
        }
    }

    /// A `raise` jumps to every enclosing handler (conservative).
    fn add_exception_edges(&mut self, from: usize) {
        let targets: Vec<usize> = self
            .tries
            .iter()
            .flat_map(|t| t.handler_entries.iter().copied())
            .collect();
        for h in targets {
            self.edge(from, h, EdgeKind::Except);
        }
    }

    /// Return/raise pass through every enclosing `finally` on the way out.
    fn add_finally_edges(&mut self, from: usize) {
        let targets: Vec<usize> =
            self.tries.iter().filter_map(|t| t.finally_entry).collect();
        for f in targets {
            self.edge(from, f, EdgeKind::Finally);
        }
    }
}

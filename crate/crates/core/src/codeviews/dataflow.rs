//! Reaching definitions and the statement-level data-flow graph.
//!
//! Variables are identified by simple name. A field access `a.b` counts as
//! `a` (or as `b` when written `this.b`); element or field stores are treated
//! as a read followed by a write of the root name. Method parameters are
//! defined at their method holder and flow into the first statements of the
//! body.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use super::{CodeViewGraph, Edge, EdgeKind, ViewTag};
use crate::syntax::{CodeSnippet, NodeId, SyntaxTree};

/// A definition of `var` at node `site` (a statement, or a method holder for
/// parameters).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Definition {
    pub site: NodeId,
    pub var: String,
}

impl Definition {
    pub fn new(site: NodeId, var: impl Into<String>) -> Self {
        Definition {
            site,
            var: var.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DfgOptions {
    pub last_def: bool,
    pub last_use: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DefUseFacts {
    /// Variables written, per statement.
    pub defs: Vec<BTreeSet<String>>,
    /// Variables read, per statement.
    pub uses: Vec<BTreeSet<String>>,
    /// Parameter definitions injected at region entry statements.
    pub entry_defs: BTreeMap<NodeId, BTreeSet<Definition>>,
    pub reach_in: Vec<BTreeSet<Definition>>,
    pub reach_out: Vec<BTreeSet<Definition>>,
}

impl DefUseFacts {
    pub fn gen(&self, n: NodeId) -> BTreeSet<Definition> {
        self.defs[n]
            .iter()
            .map(|v| Definition::new(n, v.clone()))
            .collect()
    }

    /// `gen(n) ∪ (input − kill(n))`.
    pub fn transfer(&self, n: NodeId, input: &BTreeSet<Definition>) -> BTreeSet<Definition> {
        let mut out: BTreeSet<Definition> = input
            .iter()
            .filter(|d| !self.defs[n].contains(&d.var))
            .cloned()
            .collect();
        out.extend(self.gen(n));
        out
    }
}

/// Variables written and read by statement `id`, looking only at the
/// statement's own syntax (nested statements and holders excluded).
pub fn def_use(snippet: &CodeSnippet, id: NodeId) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut acc = DefUse {
        snippet,
        tree: snippet.tree(),
        defs: BTreeSet::new(),
        uses: BTreeSet::new(),
    };
    let Some(stmt) = snippet.statement(id) else {
        return (BTreeSet::new(), BTreeSet::new());
    };
    match stmt.kind {
        "import_declaration" | "package_declaration" => {}
        "break_statement" | "continue_statement" => {}
        "labeled_statement" => {}
        _ => {
            for &c in acc.tree.children(stmt.cst) {
                acc.expr(c);
            }
        }
    }
    (acc.defs, acc.uses)
}

struct DefUse<'a> {
    snippet: &'a CodeSnippet,
    tree: &'a SyntaxTree,
    defs: BTreeSet<String>,
    uses: BTreeSet<String>,
}

impl DefUse<'_> {
    fn text(&self, cst: usize) -> String {
        self.snippet.text(cst).to_string()
    }

    fn field(&self, cst: usize, name: &str) -> Option<usize> {
        self.tree.child_by_field(cst, name)
    }

    /// Name a write to `target` is attributed to.
    fn root_name(&self, cst: usize) -> Option<String> {
        match self.tree.kind(cst) {
            "identifier" => Some(self.text(cst)),
            "field_access" => {
                let object = self.field(cst, "object")?;
                if self.tree.kind(object) == "this" {
                    self.field(cst, "field").map(|f| self.text(f))
                } else {
                    self.root_name(object)
                }
            }
            "array_access" => self.root_name(self.field(cst, "array")?),
            "parenthesized_expression" => {
                let inner = self.tree.named_children(cst).next()?;
                self.root_name(inner)
            }
            _ => None,
        }
    }

    fn write(&mut self, target: usize, also_read: bool) {
        let strong = match self.tree.kind(target) {
            "identifier" => true,
            "field_access" => self
                .field(target, "object")
                .is_some_and(|o| self.tree.kind(o) == "this"),
            _ => false,
        };
        if !strong {
            // element/field store: index expressions and the root are read
            self.expr(target);
        }
        if let Some(name) = self.root_name(target) {
            if also_read {
                self.uses.insert(name.clone());
            }
            self.defs.insert(name);
        }
    }

    fn expr(&mut self, cst: usize) {
        let node = self.tree.node(cst);
        if self.snippet.node_of_cst(cst).is_some() {
            // nested statement or holder
            return;
        }
        match node.kind {
            "identifier" => {
                self.uses.insert(self.text(cst));
            }
            "this" => {}
            "field_access" => {
                let object = self.field(cst, "object");
                match object {
                    Some(o) if self.tree.kind(o) == "this" => {
                        if let Some(f) = self.field(cst, "field") {
                            self.uses.insert(self.text(f));
                        }
                    }
                    Some(o) => self.expr(o),
                    None => {}
                }
            }
            "method_invocation" => {
                if let Some(o) = self.field(cst, "object") {
                    self.expr(o);
                }
                if let Some(a) = self.field(cst, "arguments") {
                    self.expr(a);
                }
            }
            "method_reference" => {
                if let Some(&first) = node.children.first() {
                    self.expr(first);
                }
            }
            "assignment_expression" => {
                let compound = self
                    .field(cst, "operator")
                    .is_some_and(|op| self.snippet.text(op) != "=");
                if let Some(right) = self.field(cst, "right") {
                    self.expr(right);
                }
                if let Some(left) = self.field(cst, "left") {
                    self.write(left, compound);
                }
            }
            "update_expression" => {
                if let Some(target) = self.tree.named_children(cst).next() {
                    self.write(target, true);
                }
            }
            "variable_declarator" => {
                if let Some(v) = self.field(cst, "value") {
                    self.expr(v);
                }
                if let Some(name) = self.field(cst, "name") {
                    self.defs.insert(self.text(name));
                }
            }
            "catch_formal_parameter" | "formal_parameter" => {
                if let Some(name) = self.field(cst, "name") {
                    self.defs.insert(self.text(name));
                }
            }
            "resource" => {
                if let Some(v) = self.field(cst, "value") {
                    self.expr(v);
                }
                match self.field(cst, "name") {
                    Some(name) => {
                        self.defs.insert(self.text(name));
                    }
                    None => {
                        for c in node.children.clone() {
                            self.expr(c);
                        }
                    }
                }
            }
            "instanceof_expression" => {
                if let Some(l) = self.field(cst, "left") {
                    self.expr(l);
                }
                if let Some(name) = self.field(cst, "name") {
                    self.defs.insert(self.text(name));
                }
            }
            "lambda_expression" => {
                if let Some(b) = self.field(cst, "body") {
                    self.expr(b);
                }
            }
            "object_creation_expression" => {
                for field in ["object", "arguments"] {
                    if let Some(c) = self.field(cst, field) {
                        self.expr(c);
                    }
                }
            }
            "modifiers"
            | "marker_annotation"
            | "annotation"
            | "scoped_identifier"
            | "type_identifier"
            | "generic_type"
            | "scoped_type_identifier"
            | "type_arguments"
            | "dimensions"
            | "switch_label"
            | "line_comment"
            | "block_comment" => {}
            _ => {
                for c in node.children.clone() {
                    self.expr(c);
                }
            }
        }
    }
}

/// Parameter names declared by a method or constructor holder.
fn parameters(snippet: &CodeSnippet, holder_cst: usize) -> Vec<String> {
    let tree = snippet.tree();
    let Some(params) = tree.child_by_field(holder_cst, "parameters") else {
        return Vec::new();
    };
    let mut names = Vec::new();
    for p in tree.named_children(params) {
        match tree.kind(p) {
            "formal_parameter" => {
                if let Some(n) = tree.child_by_field(p, "name") {
                    names.push(snippet.text(n).to_string());
                }
            }
            "spread_parameter" => {
                for c in tree.named_children(p) {
                    if tree.kind(c) == "variable_declarator" {
                        if let Some(n) = tree.child_by_field(c, "name") {
                            names.push(snippet.text(n).to_string());
                        }
                    }
                }
            }
            _ => {}
        }
    }
    names
}

fn def_use_tables(snippet: &CodeSnippet) -> (Vec<BTreeSet<String>>, Vec<BTreeSet<String>>) {
    let mut defs = Vec::with_capacity(snippet.statement_count());
    let mut uses = Vec::with_capacity(snippet.statement_count());
    for s in snippet.statements() {
        let (d, u) = match s.kind {
            "enhanced_for_statement" => enhanced_for_def_use(snippet, s.cst),
            _ => def_use(snippet, s.id),
        };
        defs.push(d);
        uses.push(u);
    }
    (defs, uses)
}

fn enhanced_for_def_use(snippet: &CodeSnippet, cst: usize) -> (BTreeSet<String>, BTreeSet<String>) {
    let tree = snippet.tree();
    let mut acc = DefUse {
        snippet,
        tree,
        defs: BTreeSet::new(),
        uses: BTreeSet::new(),
    };
    if let Some(v) = tree.child_by_field(cst, "value") {
        acc.expr(v);
    }
    for name in tree.children_by_field(cst, "name") {
        acc.defs.insert(snippet.text(name).to_string());
    }
    (acc.defs, acc.uses)
}

fn entry_defs(
    snippet: &CodeSnippet,
    cfg: &CodeViewGraph,
) -> BTreeMap<NodeId, BTreeSet<Definition>> {
    let mut out: BTreeMap<NodeId, BTreeSet<Definition>> = BTreeMap::new();
    for (&holder, entries) in cfg.entries() {
        let Some(info) = snippet.node(holder) else {
            continue;
        };
        for name in parameters(snippet, info.cst) {
            for &e in entries {
                out.entry(e)
                    .or_default()
                    .insert(Definition::new(holder, name.clone()));
            }
        }
    }
    out
}

/// Forward may-analysis of reaching definitions, solved with a worklist.
pub fn compute_rda(snippet: &CodeSnippet, cfg: &CodeViewGraph) -> DefUseFacts {
    let m = snippet.statement_count();
    let (defs, uses) = def_use_tables(snippet);
    let entry_defs = entry_defs(snippet, cfg);
    let mut facts = DefUseFacts {
        defs,
        uses,
        entry_defs,
        reach_in: vec![BTreeSet::new(); m],
        reach_out: vec![BTreeSet::new(); m],
    };
    for n in 0..m {
        facts.reach_out[n] = facts.gen(n);
    }

    let preds: Vec<Vec<NodeId>> = (0..m).map(|n| cfg.predecessors(n, EdgeKind::Cfg)).collect();
    let succs: Vec<Vec<NodeId>> = (0..m).map(|n| cfg.successors(n, EdgeKind::Cfg)).collect();

    let mut queued = vec![true; m];
    let mut worklist: VecDeque<NodeId> = (0..m).collect();
    while let Some(n) = worklist.pop_front() {
        queued[n] = false;
        let mut input: BTreeSet<Definition> = facts.entry_defs.get(&n).cloned().unwrap_or_default();
        for &p in &preds[n] {
            input.extend(facts.reach_out[p].iter().cloned());
        }
        let out = facts.transfer(n, &input);
        facts.reach_in[n] = input;
        if out != facts.reach_out[n] {
            facts.reach_out[n] = out;
            for &s in &succs[n] {
                if !queued[s] {
                    queued[s] = true;
                    worklist.push_back(s);
                }
            }
        }
    }
    facts
}

/// Round-robin iteration to convergence from empty sets. Kept alongside the
/// worklist solver as a cross-check.
pub fn naive_reaching_definitions(
    facts: &DefUseFacts,
    cfg: &CodeViewGraph,
) -> (Vec<BTreeSet<Definition>>, Vec<BTreeSet<Definition>>) {
    let m = facts.defs.len();
    let mut reach_in = vec![BTreeSet::new(); m];
    let mut reach_out: Vec<BTreeSet<Definition>> = vec![BTreeSet::new(); m];
    loop {
        let mut changed = false;
        for n in 0..m {
            let mut input: BTreeSet<Definition> =
                facts.entry_defs.get(&n).cloned().unwrap_or_default();
            for e in cfg.edges() {
                if e.kind == EdgeKind::Cfg && e.dst == n {
                    input.extend(reach_out[e.src].iter().cloned());
                }
            }
            let out = facts.transfer(n, &input);
            if input != reach_in[n] || out != reach_out[n] {
                changed = true;
                reach_in[n] = input;
                reach_out[n] = out;
            }
        }
        if !changed {
            return (reach_in, reach_out);
        }
    }
}

/// Data-flow view: definition -> reached use, plus optional Last-Def and
/// Last-Use edges.
pub fn build_dfg(
    snippet: &CodeSnippet,
    cfg: &CodeViewGraph,
    facts: &DefUseFacts,
    opts: DfgOptions,
) -> CodeViewGraph {
    let mut graph = CodeViewGraph::empty_over(snippet, [ViewTag::Dfg]);
    let add = |g: &mut CodeViewGraph, e: Edge| {
        g.add_edge(e)
            .expect("dataflow endpoints belong to the snippet");
    };
    let m = snippet.statement_count();
    for u in 0..m {
        for d in &facts.reach_in[u] {
            if facts.uses[u].contains(&d.var) {
                add(&mut graph, Edge::new(d.site, u, EdgeKind::Dfg));
            }
            if opts.last_def && facts.defs[u].contains(&d.var) {
                add(&mut graph, Edge::new(d.site, u, EdgeKind::LastDef));
            }
        }
    }
    if opts.last_use {
        for u in 0..m {
            for var in &facts.uses[u] {
                for r in last_reads(cfg, facts, u, var) {
                    add(&mut graph, Edge::new(r, u, EdgeKind::LastUse));
                }
            }
        }
    }
    graph
}

/// Statements that most recently read `var` on some backward CFG path from
/// `u`. The search along a path stops at the first read.
fn last_reads(cfg: &CodeViewGraph, facts: &DefUseFacts, u: NodeId, var: &str) -> BTreeSet<NodeId> {
    let mut found = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<NodeId> = cfg.predecessors(u, EdgeKind::Cfg).into();
    while let Some(r) = queue.pop_front() {
        if !seen.insert(r) {
            continue;
        }
        if facts.uses[r].contains(var) {
            found.insert(r);
            continue;
        }
        queue.extend(cfg.predecessors(r, EdgeKind::Cfg));
    }
    found
}

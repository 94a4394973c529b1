//! Statement-level control-flow graph.
//!
//! Compound statements are single nodes standing for their header (loop
//! condition, `if` test, `try` keyword, ...). Method bodies, constructor
//! bodies, lambda bodies and class bodies are independent regions; a lambda
//! or anonymous class nested in a statement is entered from that statement.

use std::collections::{BTreeMap, BTreeSet};

use super::{CodeViewGraph, Edge, EdgeKind, ViewTag};
use crate::syntax::{CodeSnippet, NodeId, SyntaxTree};

#[derive(Clone, Debug, Default)]
struct Frag {
    entries: Vec<NodeId>,
    exits: Vec<NodeId>,
}

impl Frag {
    fn single(n: NodeId, falls_through: bool) -> Self {
        Frag {
            entries: vec![n],
            exits: if falls_through { vec![n] } else { Vec::new() },
        }
    }
}

#[derive(Debug)]
enum TargetKind {
    Loop(NodeId),
    Switch,
    Labeled,
}

#[derive(Debug)]
struct Target {
    label: Option<String>,
    kind: TargetKind,
    breaks: Vec<NodeId>,
}

struct Builder<'a> {
    snippet: &'a CodeSnippet,
    tree: &'a SyntaxTree,
    edges: BTreeSet<(NodeId, NodeId)>,
    entries: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

const LOOPS: &[&str] = &[
    "while_statement",
    "for_statement",
    "enhanced_for_statement",
    "do_statement",
];

pub fn build_cfg(snippet: &CodeSnippet) -> CodeViewGraph {
    let mut builder = Builder {
        snippet,
        tree: snippet.tree(),
        edges: BTreeSet::new(),
        entries: BTreeMap::new(),
    };
    builder.walk(snippet.tree().root());

    let mut graph = CodeViewGraph::empty_over(snippet, [ViewTag::Cfg]);
    for (src, dst) in builder.edges {
        graph
            .add_edge(Edge::new(src, dst, EdgeKind::Cfg))
            .expect("cfg endpoints are statements of the snippet");
    }
    graph.entries = builder.entries;
    graph
}

impl<'a> Builder<'a> {
    fn stmt(&self, cst: usize) -> Option<NodeId> {
        self.snippet.statement_of_cst(cst)
    }

    fn kind(&self, cst: usize) -> &'static str {
        self.tree.kind(cst)
    }

    fn connect(&mut self, from: &[NodeId], to: &[NodeId]) {
        for &f in from {
            for &t in to {
                self.edges.insert((f, t));
            }
        }
    }

    /// Regions found under a node that is not itself on the current path.
    fn walk(&mut self, cst: usize) -> Vec<Frag> {
        if self.stmt(cst).is_some() {
            return vec![self.visit(cst, &mut Vec::new(), None)];
        }
        let children = self.tree.children(cst);
        let has_statement = children.iter().any(|&c| self.stmt(c).is_some());
        let regions: Vec<Frag> = if self.kind(cst) == "block" || has_statement {
            self.seq(children, &mut Vec::new()).into_iter().collect()
        } else {
            let mut found = Vec::new();
            for &c in children {
                found.extend(self.walk(c));
            }
            found
        };
        if matches!(
            self.kind(cst),
            "method_declaration" | "constructor_declaration"
        ) {
            if let Some(holder) = self.snippet.node_of_cst(cst) {
                let entry = self.entries.entry(holder).or_default();
                for r in &regions {
                    entry.extend(r.entries.iter().copied());
                }
            }
        }
        regions
    }

    /// Chains statements in order; nested plain blocks are flattened.
    fn seq(&mut self, items: &[usize], ctx: &mut Vec<Target>) -> Option<Frag> {
        let mut acc: Option<Frag> = None;
        for &c in items {
            let frag = if self.stmt(c).is_some() {
                Some(self.visit(c, ctx, None))
            } else if self.kind(c) == "block" {
                self.seq(self.tree.children(c), ctx)
            } else {
                self.walk(c);
                None
            };
            if let Some(f) = frag {
                acc = Some(match acc {
                    None => f,
                    Some(a) => {
                        self.connect(&a.exits, &f.entries);
                        Frag {
                            entries: a.entries,
                            exits: f.exits,
                        }
                    }
                });
            }
        }
        acc
    }

    /// Body of a control statement: a statement, a block, or nothing.
    fn body(&mut self, cst: usize, ctx: &mut Vec<Target>) -> Option<Frag> {
        if self.stmt(cst).is_some() {
            Some(self.visit(cst, ctx, None))
        } else if self.kind(cst) == "block" {
            self.seq(self.tree.children(cst), ctx)
        } else {
            None
        }
    }

    /// Enters lambdas and anonymous class bodies found in the non-body parts
    /// of statement `n`.
    fn side(&mut self, n: NodeId, cst: usize, skip_fields: &[&str]) {
        for &c in self.tree.children(cst) {
            let node = self.tree.node(c);
            if self.stmt(c).is_some()
                || matches!(node.kind, "block" | "finally_clause")
                || node.field.is_some_and(|f| skip_fields.contains(&f))
            {
                continue;
            }
            for region in self.walk(c) {
                self.connect(&[n], &region.entries);
            }
        }
    }

    fn label_of(&self, cst: usize) -> Option<String> {
        self.tree
            .children(cst)
            .iter()
            .find(|&&c| self.kind(c) == "identifier")
            .map(|&c| self.snippet.text(c).to_string())
    }

    fn visit(&mut self, cst: usize, ctx: &mut Vec<Target>, label: Option<String>) -> Frag {
        let n = self.stmt(cst).expect("visit is only called on statements");
        match self.kind(cst) {
            "if_statement" => {
                self.side(n, cst, &["consequence", "alternative"]);
                let mut exits = Vec::new();
                for field in ["consequence", "alternative"] {
                    let branch = self
                        .tree
                        .child_by_field(cst, field)
                        .and_then(|b| self.body(b, ctx));
                    match branch {
                        Some(b) => {
                            self.connect(&[n], &b.entries);
                            exits.extend(b.exits);
                        }
                        None => exits.push(n),
                    }
                }
                Frag {
                    entries: vec![n],
                    exits,
                }
            }
            "while_statement" | "for_statement" | "enhanced_for_statement" => {
                self.side(n, cst, &["body"]);
                ctx.push(Target {
                    label,
                    kind: TargetKind::Loop(n),
                    breaks: Vec::new(),
                });
                let body = self
                    .tree
                    .child_by_field(cst, "body")
                    .and_then(|b| self.body(b, ctx));
                let target = ctx.pop().expect("pushed above");
                if let Some(b) = body {
                    self.connect(&[n], &b.entries);
                    self.connect(&b.exits, &[n]);
                }
                let mut exits = vec![n];
                exits.extend(target.breaks);
                Frag {
                    entries: vec![n],
                    exits,
                }
            }
            "do_statement" => {
                self.side(n, cst, &["body"]);
                ctx.push(Target {
                    label,
                    kind: TargetKind::Loop(n),
                    breaks: Vec::new(),
                });
                let body = self
                    .tree
                    .child_by_field(cst, "body")
                    .and_then(|b| self.body(b, ctx));
                let target = ctx.pop().expect("pushed above");
                let mut exits = vec![n];
                exits.extend(target.breaks);
                match body {
                    Some(b) => {
                        self.connect(&b.exits, &[n]);
                        self.connect(&[n], &b.entries);
                        Frag {
                            entries: b.entries,
                            exits,
                        }
                    }
                    None => Frag {
                        entries: vec![n],
                        exits,
                    },
                }
            }
            "labeled_statement" => {
                let name = self.label_of(cst);
                let inner = self
                    .tree
                    .children(cst)
                    .iter()
                    .copied()
                    .find(|&c| self.stmt(c).is_some());
                let Some(inner) = inner else {
                    return Frag::single(n, true);
                };
                if LOOPS.contains(&self.kind(inner)) {
                    let f = self.visit(inner, ctx, name);
                    self.connect(&[n], &f.entries);
                    Frag {
                        entries: vec![n],
                        exits: f.exits,
                    }
                } else {
                    ctx.push(Target {
                        label: name,
                        kind: TargetKind::Labeled,
                        breaks: Vec::new(),
                    });
                    let f = self.visit(inner, ctx, None);
                    let target = ctx.pop().expect("pushed above");
                    self.connect(&[n], &f.entries);
                    let mut exits = f.exits;
                    exits.extend(target.breaks);
                    Frag {
                        entries: vec![n],
                        exits,
                    }
                }
            }
            "switch_expression" => self.visit_switch(n, cst, ctx),
            "try_statement" | "try_with_resources_statement" => self.visit_try(n, cst, ctx),
            "break_statement" => {
                let name = self.label_of(cst);
                let target = ctx.iter_mut().rev().find(|t| match &name {
                    Some(l) => t.label.as_deref() == Some(l.as_str()),
                    None => matches!(t.kind, TargetKind::Loop(_) | TargetKind::Switch),
                });
                match target {
                    Some(t) => {
                        t.breaks.push(n);
                        Frag::single(n, false)
                    }
                    None => Frag::single(n, true),
                }
            }
            "continue_statement" => {
                let name = self.label_of(cst);
                let header = ctx.iter().rev().find_map(|t| match t.kind {
                    TargetKind::Loop(h)
                        if name.is_none() || t.label.as_deref() == name.as_deref() =>
                    {
                        Some(h)
                    }
                    _ => None,
                });
                match header {
                    Some(h) => {
                        self.connect(&[n], &[h]);
                        Frag::single(n, false)
                    }
                    None => Frag::single(n, true),
                }
            }
            "return_statement" | "throw_statement" | "yield_statement" => {
                self.side(n, cst, &[]);
                Frag::single(n, false)
            }
            "local_variable_declaration"
            | "expression_statement"
            | "field_declaration"
            | "import_declaration"
            | "package_declaration"
            | "assert_statement"
            | "explicit_constructor_invocation" => {
                self.side(n, cst, &[]);
                Frag::single(n, true)
            }
            // ERROR regions, stray catch clauses, synchronized blocks: the
            // node, then whatever statements it contains, in order.
            _ => {
                self.side(n, cst, &["body"]);
                let inner: Vec<usize> = self
                    .tree
                    .children(cst)
                    .iter()
                    .copied()
                    .filter(|&c| self.stmt(c).is_some() || self.kind(c) == "block")
                    .collect();
                match self.seq(&inner, ctx) {
                    Some(f) => {
                        self.connect(&[n], &f.entries);
                        Frag {
                            entries: vec![n],
                            exits: f.exits,
                        }
                    }
                    None => Frag::single(n, true),
                }
            }
        }
    }

    fn visit_switch(&mut self, n: NodeId, cst: usize, ctx: &mut Vec<Target>) -> Frag {
        self.side(n, cst, &["body"]);
        ctx.push(Target {
            label: None,
            kind: TargetKind::Switch,
            breaks: Vec::new(),
        });
        let mut exits = Vec::new();
        let mut fall: Vec<NodeId> = Vec::new();
        let mut has_default = false;
        let groups: Vec<usize> = self
            .tree
            .child_by_field(cst, "body")
            .map(|b| self.tree.children(b).to_vec())
            .unwrap_or_default();
        for g in groups {
            let is_default = |this: &Self, g: usize| {
                this.tree.children(g).iter().any(|&c| {
                    this.kind(c) == "switch_label" && this.snippet.text(c).starts_with("default")
                })
            };
            match self.kind(g) {
                "switch_block_statement_group" => {
                    has_default |= is_default(self, g);
                    let items: Vec<usize> = self
                        .tree
                        .children(g)
                        .iter()
                        .copied()
                        .filter(|&c| self.kind(c) != "switch_label")
                        .collect();
                    if let Some(f) = self.seq(&items, ctx) {
                        self.connect(&[n], &f.entries);
                        self.connect(&fall, &f.entries);
                        fall = f.exits;
                    }
                }
                "switch_rule" => {
                    has_default |= is_default(self, g);
                    let body = self
                        .tree
                        .named_children(g)
                        .find(|&c| self.kind(c) != "switch_label");
                    match body.and_then(|b| self.body(b, ctx)) {
                        Some(f) => {
                            self.connect(&[n], &f.entries);
                            exits.extend(f.exits);
                        }
                        None => exits.push(n),
                    }
                }
                _ => {}
            }
        }
        let target = ctx.pop().expect("pushed above");
        exits.extend(fall);
        exits.extend(target.breaks);
        if !has_default {
            exits.push(n);
        }
        Frag {
            entries: vec![n],
            exits,
        }
    }

    fn visit_try(&mut self, n: NodeId, cst: usize, ctx: &mut Vec<Target>) -> Frag {
        self.side(n, cst, &["body"]);
        let body_cst = self.tree.child_by_field(cst, "body");
        let body = body_cst.and_then(|b| self.body(b, ctx));
        // every statement of the try body may throw into every catch clause
        let mut throwers: Vec<NodeId> = match body_cst {
            Some(b) => {
                let (lo, hi) = (self.tree.node(b).start_byte, self.tree.node(b).end_byte);
                self.snippet
                    .statements()
                    .iter()
                    .filter(|s| lo <= s.start_byte && s.end_byte <= hi)
                    .map(|s| s.id)
                    .collect()
            }
            None => Vec::new(),
        };
        if throwers.is_empty() {
            throwers.push(n);
        }
        let mut exits = match body {
            Some(b) => {
                self.connect(&[n], &b.entries);
                b.exits
            }
            None => vec![n],
        };
        let children = self.tree.children(cst).to_vec();
        for &c in &children {
            if self.kind(c) != "catch_clause" {
                continue;
            }
            let Some(cn) = self.stmt(c) else { continue };
            self.side(cn, c, &["body"]);
            self.connect(&throwers, &[cn]);
            let handler = self
                .tree
                .child_by_field(c, "body")
                .and_then(|b| self.body(b, ctx));
            match handler {
                Some(f) => {
                    self.connect(&[cn], &f.entries);
                    exits.extend(f.exits);
                }
                None => exits.push(cn),
            }
        }
        for &c in &children {
            if self.kind(c) != "finally_clause" {
                continue;
            }
            let block = self
                .tree
                .children(c)
                .iter()
                .copied()
                .find(|&b| self.kind(b) == "block");
            if let Some(f) = block.and_then(|b| self.body(b, ctx)) {
                self.connect(&exits, &f.entries);
                exits = f.exits;
            }
        }
        Frag {
            entries: vec![n],
            exits,
        }
    }
}

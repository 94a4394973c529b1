//! Statement-level code views and their composition.
//!
//! Every view of a snippet shares the same node universe (all statements and
//! holders); views differ only in their edge sets. Composition is therefore a
//! plain union of edges.

mod ast;
mod cfg;
mod dataflow;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::syntax::{CodeSnippet, NodeId};

pub use ast::build_ast_view;
pub use cfg::build_cfg;
pub use dataflow::{
    build_dfg, compute_rda, def_use, naive_reaching_definitions, DefUseFacts, Definition,
    DfgOptions,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeKind {
    Ast,
    Cfg,
    Dfg,
    LastDef,
    LastUse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewTag {
    Ast,
    Cfg,
    Dfg,
}

impl FromStr for ViewTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ast" => Ok(ViewTag::Ast),
            "cfg" => Ok(ViewTag::Cfg),
            "dfg" => Ok(ViewTag::Dfg),
            other => Err(Error::Config(format!("unknown view `{other}`"))),
        }
    }
}

impl fmt::Display for ViewTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViewTag::Ast => "ast",
            ViewTag::Cfg => "cfg",
            ViewTag::Dfg => "dfg",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn new(src: NodeId, dst: NodeId, kind: EdgeKind) -> Self {
        Edge { src, dst, kind }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: NodeId,
    pub kind: String,
    pub start_line: usize,
    pub end_line: usize,
}

/// Directed multigraph over statement and holder nodes.
#[derive(Clone, Debug, Serialize)]
pub struct CodeViewGraph {
    nodes: Vec<GraphNode>,
    edges: BTreeSet<Edge>,
    views: BTreeSet<ViewTag>,
    /// Method-like holder -> first statements of its body. Used to seed
    /// parameter definitions into reaching-definitions analysis.
    #[serde(skip)]
    entries: BTreeMap<NodeId, BTreeSet<NodeId>>,
    #[serde(skip)]
    parents: Vec<BTreeSet<NodeId>>,
}

impl PartialEq for CodeViewGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges && self.views == other.views
    }
}

impl Eq for CodeViewGraph {}

impl CodeViewGraph {
    /// Builds a graph from explicit parts. Node ids must be `0..nodes.len()`
    /// in order and every edge endpoint must be a node.
    pub fn from_parts(
        nodes: Vec<GraphNode>,
        edges: impl IntoIterator<Item = Edge>,
        views: impl IntoIterator<Item = ViewTag>,
    ) -> Result<Self> {
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::UnknownNode(n.id));
            }
        }
        let mut graph = CodeViewGraph {
            parents: vec![BTreeSet::new(); nodes.len()],
            nodes,
            edges: BTreeSet::new(),
            views: views.into_iter().collect(),
            entries: BTreeMap::new(),
        };
        for e in edges {
            graph.add_edge(e)?;
        }
        Ok(graph)
    }

    /// Edge-free graph over all nodes of `snippet`.
    pub(crate) fn empty_over(
        snippet: &CodeSnippet,
        views: impl IntoIterator<Item = ViewTag>,
    ) -> Self {
        let nodes = snippet
            .nodes()
            .map(|n| GraphNode {
                id: n.id,
                kind: n.kind.to_string(),
                start_line: n.start_line,
                end_line: n.end_line,
            })
            .collect();
        Self::from_parts(nodes, [], views).expect("snippet ids are contiguous")
    }

    pub(crate) fn add_edge(&mut self, edge: Edge) -> Result<bool> {
        if edge.src >= self.nodes.len() {
            return Err(Error::UnknownNode(edge.src));
        }
        if edge.dst >= self.nodes.len() {
            return Err(Error::UnknownNode(edge.dst));
        }
        let fresh = self.edges.insert(edge);
        if fresh {
            self.parents[edge.dst].insert(edge.src);
        }
        Ok(fresh)
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&GraphNode> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id < self.nodes.len()
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn edges_of_kind(&self, kind: EdgeKind) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    pub fn views(&self) -> &BTreeSet<ViewTag> {
        &self.views
    }

    pub fn entries(&self) -> &BTreeMap<NodeId, BTreeSet<NodeId>> {
        &self.entries
    }

    /// Nodes with an edge of any kind into `node`.
    pub fn parents(&self, node: NodeId) -> Result<&BTreeSet<NodeId>> {
        self.parents.get(node).ok_or(Error::UnknownNode(node))
    }

    /// Sources of `kind` edges into `node`.
    pub fn predecessors(&self, node: NodeId, kind: EdgeKind) -> Vec<NodeId> {
        self.parents
            .get(node)
            .into_iter()
            .flatten()
            .copied()
            .filter(|&p| self.edges.contains(&Edge::new(p, node, kind)))
            .collect()
    }

    /// Targets of `kind` edges out of `node`.
    pub fn successors(&self, node: NodeId, kind: EdgeKind) -> Vec<NodeId> {
        let lo = Edge::new(node, 0, EdgeKind::Ast);
        self.edges
            .range(lo..)
            .take_while(|e| e.src == node)
            .filter(|e| e.kind == kind)
            .map(|e| e.dst)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization cannot fail")
    }
}

/// `{ p | (p -> node) is an edge of any kind }`.
pub fn get_parents(node: NodeId, view: &CodeViewGraph) -> Result<BTreeSet<NodeId>> {
    view.parents(node).cloned()
}

/// Union of views built over the same snippet.
pub fn compose(views: &[CodeViewGraph]) -> Result<CodeViewGraph> {
    let Some(first) = views.first() else {
        return Err(Error::Config("no views to compose".into()));
    };
    let mut out = first.clone();
    for v in &views[1..] {
        if v.nodes != out.nodes {
            return Err(Error::MismatchedSnippet);
        }
        for e in &v.edges {
            out.add_edge(*e)?;
        }
        out.views.extend(v.views.iter().copied());
        for (holder, entries) in &v.entries {
            out.entries.entry(*holder).or_default().extend(entries);
        }
    }
    Ok(out)
}

/// Builds each requested view over `snippet` and composes them.
pub fn build_view(
    snippet: &CodeSnippet,
    views: &BTreeSet<ViewTag>,
    dfg_opts: DfgOptions,
) -> Result<CodeViewGraph> {
    if views.is_empty() {
        return Err(Error::Config("at least one view is required".into()));
    }
    let cfg = build_cfg(snippet);
    let mut parts = Vec::with_capacity(views.len());
    for tag in views {
        parts.push(match tag {
            ViewTag::Ast => build_ast_view(snippet),
            ViewTag::Cfg => cfg.clone(),
            ViewTag::Dfg => {
                let facts = compute_rda(snippet, &cfg);
                build_dfg(snippet, &cfg, &facts, dfg_opts)
            }
        });
    }
    compose(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, Language};

    fn nodes(n: usize) -> Vec<GraphNode> {
        (0..n)
            .map(|id| GraphNode {
                id,
                kind: "expression_statement".into(),
                start_line: id + 1,
                end_line: id + 1,
            })
            .collect()
    }

    #[test]
    fn rejects_dangling_edges() {
        let err =
            CodeViewGraph::from_parts(nodes(2), [Edge::new(0, 5, EdgeKind::Cfg)], [ViewTag::Cfg]);
        assert!(matches!(err, Err(Error::UnknownNode(5))));
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = CodeViewGraph::from_parts(
            nodes(2),
            [
                Edge::new(0, 1, EdgeKind::Cfg),
                Edge::new(0, 1, EdgeKind::Cfg),
                Edge::new(0, 1, EdgeKind::Dfg),
            ],
            [ViewTag::Cfg],
        )
        .unwrap();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(get_parents(1, &g).unwrap(), BTreeSet::from([0]));
    }

    #[test]
    fn parents_of_root_is_empty() {
        let s = parse("int x = 1;", Language::Java).unwrap();
        let ast = build_ast_view(&s);
        let root = s.holders()[0].id;
        assert!(get_parents(root, &ast).unwrap().is_empty());
        assert!(matches!(get_parents(99, &ast), Err(Error::UnknownNode(99))));
    }

    #[test]
    fn compose_identity_and_disjoint_union() {
        let s = parse(
            "void f(){ int a = 1; int b = a; if (b > 0) { a = b; } }",
            Language::Java,
        )
        .unwrap();
        let ast = build_ast_view(&s);
        let cfg = build_cfg(&s);
        assert_eq!(compose(std::slice::from_ref(&ast)).unwrap(), ast);
        let both = compose(&[ast.clone(), cfg.clone()]).unwrap();
        assert_eq!(both.edges().len(), ast.edges().len() + cfg.edges().len());
        assert!(ast.edges().is_subset(both.edges()));
        assert!(cfg.edges().is_subset(both.edges()));
        assert_eq!(both.views(), &BTreeSet::from([ViewTag::Ast, ViewTag::Cfg]));
    }

    #[test]
    fn compose_rejects_other_snippets() {
        let a = build_ast_view(&parse("int x = 1;", Language::Java).unwrap());
        let b = build_ast_view(&parse("int x = 1; int y = 2;", Language::Java).unwrap());
        assert!(matches!(compose(&[a, b]), Err(Error::MismatchedSnippet)));
    }

    #[test]
    fn json_shape_is_stable() {
        let s = parse("int x = 1;", Language::Java).unwrap();
        let json: serde_json::Value = serde_json::from_str(&build_ast_view(&s).to_json()).unwrap();
        assert_eq!(json["views"], serde_json::json!(["ast"]));
        assert_eq!(
            json["edges"],
            serde_json::json!([{"src": 1, "dst": 0, "kind": "AST"}])
        );
        assert_eq!(
            json["nodes"][0],
            serde_json::json!({"id": 0, "kind": "local_variable_declaration", "start_line": 1, "end_line": 1})
        );
    }
}

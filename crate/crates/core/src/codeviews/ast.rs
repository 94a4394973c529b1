use super::{CodeViewGraph, Edge, EdgeKind, ViewTag};
use crate::syntax::CodeSnippet;

/// Statement/holder projection of the syntax tree, edges parent -> child.
///
/// Expression-level nodes never appear; each statement or holder hangs off
/// its nearest statement or holder ancestor.
pub fn build_ast_view(snippet: &CodeSnippet) -> CodeViewGraph {
    let mut graph = CodeViewGraph::empty_over(snippet, [ViewTag::Ast]);
    for node in snippet.nodes() {
        if let Some(parent) = node.parent {
            graph
                .add_edge(Edge::new(parent, node.id, EdgeKind::Ast))
                .expect("parent ids come from the same snippet");
        }
    }
    graph
}

//! Backward slicing over a code view.
//!
//! Starting from a seed statement, parents (sources of edges into a node)
//! are followed transitively. Holder nodes are traversed but never become
//! part of the resulting sentence mask.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::codeviews::{get_parents, CodeViewGraph, ViewTag};
use crate::error::{Error, Result};
use crate::syntax::{CodeSnippet, HolderSet, NodeId};

/// The statements deemed relevant context for `seed` under some view.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StatementMask {
    pub seed: NodeId,
    pub members: BTreeSet<NodeId>,
    pub view_tags: BTreeSet<ViewTag>,
}

impl StatementMask {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.contains(&id)
    }
}

/// One entry of the mask dump format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MaskDump {
    pub seed: NodeId,
    pub members: Vec<NodeId>,
    pub lines: Vec<usize>,
}

fn is_holder(view: &CodeViewGraph, id: NodeId, holders: &HolderSet) -> bool {
    view.node(id).is_some_and(|n| holders.contains(&n.kind))
}

pub fn backslice(seed: NodeId, view: &CodeViewGraph, holders: &HolderSet) -> Result<StatementMask> {
    if !view.contains(seed) {
        return Err(Error::UnknownNode(seed));
    }
    if is_holder(view, seed, holders) {
        return Err(Error::NotAStatement(seed));
    }
    let mut members = BTreeSet::new();
    let mut visited = BTreeSet::from([seed]);
    let mut can_visit = VecDeque::from([seed]);
    while let Some(node) = can_visit.pop_front() {
        if !is_holder(view, node, holders) {
            members.insert(node);
        }
        for parent in get_parents(node, view)? {
            if visited.insert(parent) {
                can_visit.push_back(parent);
            }
        }
    }
    Ok(StatementMask {
        seed,
        members,
        view_tags: view.views().clone(),
    })
}

/// One mask per statement of `snippet`, in statement order.
pub fn all_masks(
    snippet: &CodeSnippet,
    view: &CodeViewGraph,
    holders: &HolderSet,
) -> Result<Vec<StatementMask>> {
    (0..snippet.statement_count())
        .map(|id| backslice(id, view, holders))
        .collect()
}

/// Lines covered by the mask's statements, each rendered by its full span.
pub fn render_line_mask(mask: &StatementMask, snippet: &CodeSnippet) -> BTreeSet<usize> {
    mask.members
        .iter()
        .filter_map(|&id| snippet.statement(id))
        .flat_map(|s| s.start_line..=s.end_line)
        .collect()
}

pub fn dump(mask: &StatementMask, snippet: &CodeSnippet) -> MaskDump {
    MaskDump {
        seed: mask.seed,
        members: mask.members.iter().copied().collect(),
        lines: render_line_mask(mask, snippet).into_iter().collect(),
    }
}

//! Parsing front end.
//!
//! Source text is parsed with tree-sitter into an owned concrete syntax tree.
//! Grammar nodes are then classified into three roles: *statements* (the
//! maskable units, identical to the nodes the control-flow builder uses),
//! *holders* (grammar constructs that only group statements, such as
//! `block`), and everything else, which is collapsed into the nearest
//! enclosing statement or holder.
//!
//! Statement ids are `0..M` in source order; holder ids follow at `M..`.
//! Every leaf token is owned by the innermost statement containing it, or by
//! nobody when it sits outside all statements (class headers, method
//! signatures, ...).

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a statement or holder node inside one snippet.
pub type NodeId = usize;

/// Version of the frozen holder-kind table. Bump when [`JAVA_HOLDERS`] changes.
pub const HOLDER_SET_VERSION: u32 = 1;

/// Grammar kinds that group statements without being maskable themselves.
pub const JAVA_HOLDERS: &[&str] = &[
    "block",
    "class_body",
    "program",
    "method_declaration",
    "constructor_declaration",
    "class_declaration",
    "switch_block",
];

/// Grammar kinds that become statement nodes (and control-flow nodes).
pub const JAVA_STATEMENTS: &[&str] = &[
    "package_declaration",
    "import_declaration",
    "field_declaration",
    "local_variable_declaration",
    "expression_statement",
    "explicit_constructor_invocation",
    "if_statement",
    "while_statement",
    "do_statement",
    "for_statement",
    "enhanced_for_statement",
    "labeled_statement",
    "return_statement",
    "break_statement",
    "continue_statement",
    "throw_statement",
    "yield_statement",
    "assert_statement",
    "synchronized_statement",
    "try_statement",
    "try_with_resources_statement",
    "catch_clause",
    "ERROR",
];

/// Parents under which a bare `switch_expression` acts as a statement.
const SWITCH_STATEMENT_PARENTS: &[&str] = &[
    "block",
    "program",
    "switch_block_statement_group",
    "labeled_statement",
    "constructor_body",
    "ERROR",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Java,
}

impl Language {
    fn grammar(self) -> tree_sitter::Language {
        match self {
            Language::Java => tree_sitter_java::LANGUAGE.into(),
        }
    }

    fn statement_kinds(self) -> &'static [&'static str] {
        match self {
            Language::Java => JAVA_STATEMENTS,
        }
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "java" => Ok(Language::Java),
            other => Err(Error::UnsupportedLanguage(other.to_string())),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Language::Java => f.write_str("java"),
        }
    }
}

/// Set of grammar kinds treated as statement holders.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolderSet {
    kinds: BTreeSet<String>,
}

impl HolderSet {
    pub fn new<I, S>(kinds: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        HolderSet {
            kinds: kinds.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, kind: &str) -> bool {
        self.kinds.contains(kind)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.kinds.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
}

pub fn default_holders(language: Language) -> HolderSet {
    match language {
        Language::Java => HolderSet::new(JAVA_HOLDERS.iter().copied()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Statement,
    Holder,
}

/// One node of the owned concrete syntax tree.
#[derive(Clone, Debug, Serialize)]
pub struct CstNode {
    pub kind: &'static str,
    pub field: Option<&'static str>,
    pub named: bool,
    pub start_byte: usize,
    pub end_byte: usize,
    pub start_line: usize,
    pub end_line: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Owned copy of a tree-sitter tree; index 0 is the root.
#[derive(Clone, Debug, Serialize)]
pub struct SyntaxTree {
    nodes: Vec<CstNode>,
}

impl SyntaxTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, idx: usize) -> &CstNode {
        &self.nodes[idx]
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.nodes[idx].children
    }

    pub fn named_children(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.nodes[idx]
            .children
            .iter()
            .copied()
            .filter(|&c| self.nodes[c].named)
    }

    pub fn child_by_field(&self, idx: usize, field: &str) -> Option<usize> {
        self.children_by_field(idx, field).next()
    }

    pub fn children_by_field<'a>(
        &'a self,
        idx: usize,
        field: &'a str,
    ) -> impl Iterator<Item = usize> + 'a {
        self.nodes[idx]
            .children
            .iter()
            .copied()
            .filter(move |&c| self.nodes[c].field == Some(field))
    }

    pub fn kind(&self, idx: usize) -> &'static str {
        self.nodes[idx].kind
    }

    fn from_ts(tree: &tree_sitter::Tree) -> Self {
        let mut nodes: Vec<CstNode> = Vec::new();
        let mut cursor = tree.walk();
        let mut parents: Vec<usize> = Vec::new();
        loop {
            let node = cursor.node();
            let parent = parents.last().copied();
            let idx = nodes.len();
            let start = node.start_position();
            let end = node.end_position();
            let mut end_line = end.row + 1;
            if end.column == 0 && node.end_byte() > node.start_byte() && end.row > start.row {
                end_line = end.row;
            }
            nodes.push(CstNode {
                kind: node.kind(),
                field: cursor.field_name(),
                named: node.is_named(),
                start_byte: node.start_byte(),
                end_byte: node.end_byte(),
                start_line: start.row + 1,
                end_line,
                parent,
                children: Vec::new(),
            });
            if let Some(p) = parent {
                nodes[p].children.push(idx);
            }
            if cursor.goto_first_child() {
                parents.push(idx);
                continue;
            }
            loop {
                if cursor.goto_next_sibling() {
                    break;
                }
                if !cursor.goto_parent() {
                    return SyntaxTree { nodes };
                }
                parents.pop();
            }
        }
    }
}

/// A maskable statement.
#[derive(Clone, Debug, Serialize)]
pub struct Statement {
    pub id: NodeId,
    pub kind: &'static str,
    pub start_line: usize,
    pub end_line: usize,
    pub start_byte: usize,
    pub end_byte: usize,
    /// Nearest enclosing statement or holder.
    pub parent: Option<NodeId>,
    /// Tokens owned directly, excluding those of nested statements.
    pub direct_token_ids: Vec<usize>,
    #[serde(skip)]
    pub cst: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Holder {
    pub id: NodeId,
    pub kind: &'static str,
    pub start_line: usize,
    pub end_line: usize,
    pub start_byte: usize,
    pub end_byte: usize,
    pub parent: Option<NodeId>,
    #[serde(skip)]
    pub cst: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LeafToken {
    pub index: usize,
    pub text: String,
    pub start_byte: usize,
    pub end_byte: usize,
    pub line: usize,
    pub owner_statement: Option<NodeId>,
}

/// Borrowed view of either kind of graph node.
#[derive(Clone, Copy, Debug)]
pub struct NodeInfo {
    pub id: NodeId,
    pub kind: &'static str,
    pub role: NodeRole,
    pub start_line: usize,
    pub end_line: usize,
    pub parent: Option<NodeId>,
    pub cst: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CodeSnippet {
    source_text: String,
    language: Language,
    statements: Vec<Statement>,
    holders: Vec<Holder>,
    tokens: Vec<LeafToken>,
    statement_count: usize,
    /// True when the parser had to recover from syntax errors.
    degraded: bool,
    #[serde(skip)]
    tree: SyntaxTree,
    #[serde(skip)]
    cst_node: Vec<Option<NodeId>>,
}

thread_local! {
    static JAVA_PARSER: RefCell<Option<tree_sitter::Parser>> = const { RefCell::new(None) };
}

fn parse_tree(source: &str, language: Language) -> Result<tree_sitter::Tree> {
    JAVA_PARSER.with(|cell| {
        let mut slot = cell.borrow_mut();
        if slot.is_none() {
            let mut parser = tree_sitter::Parser::new();
            parser
                .set_language(&language.grammar())
                .map_err(|e| Error::Grammar(e.to_string()))?;
            *slot = Some(parser);
        }
        let parser = slot.as_mut().expect("parser initialised above");
        parser.reset();
        parser
            .parse(source, None)
            .ok_or_else(|| Error::Grammar("parser returned no tree".into()))
    })
}

fn is_statement_kind(tree: &SyntaxTree, idx: usize, kinds: &[&str]) -> bool {
    let node = tree.node(idx);
    if node.field == Some("init") {
        // `for (int i = 0; ...)`: the declaration is part of the loop header
        return false;
    }
    if kinds.contains(&node.kind) {
        return true;
    }
    if node.kind == "switch_expression" {
        if matches!(node.field, Some("body" | "consequence" | "alternative")) {
            return true;
        }
        if let Some(p) = node.parent {
            return SWITCH_STATEMENT_PARENTS.contains(&tree.kind(p));
        }
    }
    false
}

/// Parses `source` and builds its statement and token tables.
///
/// Syntax errors do not fail the parse: recovered `ERROR` regions become
/// opaque statements and [`CodeSnippet::is_degraded`] reports the recovery.
pub fn parse(source: &str, language: Language) -> Result<CodeSnippet> {
    let ts_tree = parse_tree(source, language)?;
    let degraded = ts_tree.root_node().has_error();
    let tree = SyntaxTree::from_ts(&ts_tree);
    let holders_set = default_holders(language);
    let statement_kinds = language.statement_kinds();

    let mut roles: Vec<Option<NodeRole>> = vec![None; tree.len()];
    for (idx, node) in tree.nodes.iter().enumerate() {
        if is_statement_kind(&tree, idx, statement_kinds) {
            roles[idx] = Some(NodeRole::Statement);
        } else if holders_set.contains(node.kind) {
            roles[idx] = Some(NodeRole::Holder);
        }
    }
    let statement_count = roles
        .iter()
        .filter(|r| **r == Some(NodeRole::Statement))
        .count();

    // Nodes are stored in pre-order, which is source order.
    let mut cst_node: Vec<Option<NodeId>> = vec![None; tree.len()];
    let mut next_statement = 0;
    let mut next_holder = statement_count;
    for (idx, role) in roles.iter().enumerate() {
        match role {
            Some(NodeRole::Statement) => {
                cst_node[idx] = Some(next_statement);
                next_statement += 1;
            }
            Some(NodeRole::Holder) => {
                cst_node[idx] = Some(next_holder);
                next_holder += 1;
            }
            None => {}
        }
    }

    let enclosing = |idx: usize, want: Option<NodeRole>| -> Option<NodeId> {
        let mut cur = tree.node(idx).parent;
        while let Some(p) = cur {
            if let Some(role) = roles[p] {
                if want.is_none() || want == Some(role) {
                    return cst_node[p];
                }
            }
            cur = tree.node(p).parent;
        }
        None
    };

    let mut statements = Vec::with_capacity(statement_count);
    let mut holders = Vec::new();
    for (idx, role) in roles.iter().enumerate() {
        let node = tree.node(idx);
        match role {
            Some(NodeRole::Statement) => statements.push(Statement {
                id: cst_node[idx].expect("statement id assigned"),
                kind: node.kind,
                start_line: node.start_line,
                end_line: node.end_line,
                start_byte: node.start_byte,
                end_byte: node.end_byte,
                parent: enclosing(idx, None),
                direct_token_ids: Vec::new(),
                cst: idx,
            }),
            Some(NodeRole::Holder) => holders.push(Holder {
                id: cst_node[idx].expect("holder id assigned"),
                kind: node.kind,
                start_line: node.start_line,
                end_line: node.end_line,
                start_byte: node.start_byte,
                end_byte: node.end_byte,
                parent: enclosing(idx, None),
                cst: idx,
            }),
            None => {}
        }
    }

    let tokens = collect_tokens(source, &tree, &roles, &cst_node, &statements, &enclosing);
    if tokens.is_empty() {
        return Err(Error::EmptySource);
    }
    for tok in &tokens {
        if let Some(owner) = tok.owner_statement {
            statements[owner].direct_token_ids.push(tok.index);
        }
    }

    Ok(CodeSnippet {
        source_text: source.to_string(),
        language,
        statements,
        holders,
        tokens,
        statement_count,
        degraded,
        tree,
        cst_node,
    })
}

fn line_of(source: &str, byte: usize) -> usize {
    source.as_bytes()[..byte]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

fn collect_tokens(
    source: &str,
    tree: &SyntaxTree,
    roles: &[Option<NodeRole>],
    cst_node: &[Option<NodeId>],
    statements: &[Statement],
    enclosing: &dyn Fn(usize, Option<NodeRole>) -> Option<NodeId>,
) -> Vec<LeafToken> {
    // (start, end, owner)
    let mut spans: Vec<(usize, usize, Option<NodeId>)> = Vec::new();
    for (idx, node) in tree.nodes.iter().enumerate() {
        if !node.children.is_empty() || node.end_byte <= node.start_byte {
            continue;
        }
        let owner = if roles[idx] == Some(NodeRole::Statement) {
            cst_node[idx]
        } else {
            enclosing(idx, Some(NodeRole::Statement))
        };
        spans.push((node.start_byte, node.end_byte, owner));
    }
    spans.sort_by_key(|s| (s.0, s.1));

    // Anything between leaves that is not whitespace becomes its own token so
    // that token texts plus gaps always reproduce the source.
    let innermost = |start: usize, end: usize| -> Option<NodeId> {
        statements
            .iter()
            .rfind(|s| s.start_byte <= start && end <= s.end_byte)
            .map(|s| s.id)
    };
    let mut filled: Vec<(usize, usize, Option<NodeId>)> = Vec::with_capacity(spans.len());
    let mut cursor = 0;
    let push_gap = |from: usize, to: usize, out: &mut Vec<(usize, usize, Option<NodeId>)>| {
        let gap = &source[from..to];
        let mut offset = 0;
        for chunk in gap.split_whitespace() {
            let rel = gap[offset..].find(chunk).expect("chunk comes from gap") + offset;
            let (s, e) = (from + rel, from + rel + chunk.len());
            out.push((s, e, innermost(s, e)));
            offset = rel + chunk.len();
        }
    };
    for span in spans {
        if span.0 < cursor {
            // overlapping leaves should not occur; keep the first
            continue;
        }
        if span.0 > cursor {
            push_gap(cursor, span.0, &mut filled);
        }
        filled.push(span);
        cursor = span.1;
    }
    if cursor < source.len() {
        push_gap(cursor, source.len(), &mut filled);
    }

    filled
        .into_iter()
        .enumerate()
        .map(|(index, (start, end, owner))| LeafToken {
            index,
            text: source[start..end].to_string(),
            start_byte: start,
            end_byte: end,
            line: line_of(source, start),
            owner_statement: owner,
        })
        .collect()
}

impl CodeSnippet {
    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn holders(&self) -> &[Holder] {
        &self.holders
    }

    pub fn tokens(&self) -> &[LeafToken] {
        &self.tokens
    }

    pub fn statement_count(&self) -> usize {
        self.statement_count
    }

    /// Statements plus holders.
    pub fn node_count(&self) -> usize {
        self.statements.len() + self.holders.len()
    }

    pub fn is_degraded(&self) -> bool {
        self.degraded
    }

    pub fn tree(&self) -> &SyntaxTree {
        &self.tree
    }

    pub fn is_statement(&self, id: NodeId) -> bool {
        id < self.statement_count
    }

    pub fn statement(&self, id: NodeId) -> Option<&Statement> {
        self.statements.get(id)
    }

    pub fn node(&self, id: NodeId) -> Option<NodeInfo> {
        if let Some(s) = self.statements.get(id) {
            return Some(NodeInfo {
                id,
                kind: s.kind,
                role: NodeRole::Statement,
                start_line: s.start_line,
                end_line: s.end_line,
                parent: s.parent,
                cst: s.cst,
            });
        }
        let h = self.holders.get(id.checked_sub(self.statement_count)?)?;
        Some(NodeInfo {
            id,
            kind: h.kind,
            role: NodeRole::Holder,
            start_line: h.start_line,
            end_line: h.end_line,
            parent: h.parent,
            cst: h.cst,
        })
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeInfo> + '_ {
        (0..self.node_count()).filter_map(move |id| self.node(id))
    }

    /// Statement or holder node built from CST node `cst`, if any.
    pub fn node_of_cst(&self, cst: usize) -> Option<NodeId> {
        self.cst_node.get(cst).copied().flatten()
    }

    /// Statement node built from CST node `cst`, if any.
    pub fn statement_of_cst(&self, cst: usize) -> Option<NodeId> {
        self.node_of_cst(cst).filter(|&id| self.is_statement(id))
    }

    pub fn text(&self, cst: usize) -> &str {
        let n = self.tree.node(cst);
        &self.source_text[n.start_byte..n.end_byte]
    }

    /// Token ids of statement `id`; with `transitive` the tokens of nested
    /// statements are included. Sorted by position.
    pub fn statement_tokens(&self, id: NodeId, transitive: bool) -> Vec<usize> {
        let Some(stmt) = self.statements.get(id) else {
            return Vec::new();
        };
        if !transitive {
            return stmt.direct_token_ids.clone();
        }
        self.tokens
            .iter()
            .filter(|t| stmt.start_byte <= t.start_byte && t.end_byte <= stmt.end_byte)
            .map(|t| t.index)
            .collect()
    }

    /// Reassembles the source from tokens and the whitespace between them.
    pub fn reconstruct(&self) -> String {
        let mut out = String::with_capacity(self.source_text.len());
        let mut cursor = 0;
        for t in &self.tokens {
            out.push_str(&self.source_text[cursor..t.start_byte]);
            out.push_str(&t.text);
            cursor = t.end_byte;
        }
        out.push_str(&self.source_text[cursor..]);
        out
    }
}

/// `(token text, owner statement)` in token order.
pub fn token_table(snippet: &CodeSnippet) -> Vec<(String, Option<NodeId>)> {
    snippet
        .tokens
        .iter()
        .map(|t| (t.text.clone(), t.owner_statement))
        .collect()
}

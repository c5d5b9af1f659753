//! Plain-text rendering of a trace tree: one line per recorded step, with
//! `│ ` bars for nesting and arrows carrying values, plus the mappings between
//! rendered lines, tree nodes and source lines.

mod layout;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::SourceSpan;
use crate::model::{NodeId, NodeKind, TraceTree, UnknownNode};
use crate::store::TraceIndex;
use crate::tracer::ValueSnapshot;

pub use layout::{format_value, Renderer, MAX_VALUE_CHARS};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewState {
    /// Call and loop nodes shown as a single `[…]` line.
    pub collapsed: BTreeSet<NodeId>,
    pub show_subexpr: bool,
    pub show_output: bool,
    pub ascii: bool,
}

impl Default for ViewState {
    fn default() -> Self {
        Self {
            collapsed: BTreeSet::new(),
            show_subexpr: true,
            show_output: true,
            ascii: false,
        }
    }
}

impl ViewState {
    /// Collapses every call to the function `name`. Returns how many nodes
    /// were added.
    pub fn collapse_calls_named(&mut self, tree: &TraceTree, name: &str) -> usize {
        let before = self.collapsed.len();
        self.collapsed.extend(
            tree.nodes()
                .iter()
                .filter(|n| n.kind == NodeKind::Call && n.name() == Some(name))
                .map(|n| n.id),
        );
        self.collapsed.len() - before
    }

    /// Collapses every call or loop opened at `file:line`.
    pub fn collapse_at(&mut self, tree: &TraceTree, file: &str, line: u32) -> usize {
        let before = self.collapsed.len();
        self.collapsed.extend(
            tree.nodes()
                .iter()
                .filter(|n| matches!(n.kind, NodeKind::Call | NodeKind::Loop))
                .filter(|n| n.file() == Some(file) && n.line() == Some(line))
                .map(|n| n.id),
        );
        self.collapsed.len() - before
    }

    /// Ids in `collapsed` that are not call or loop nodes of `tree`.
    pub fn invalid_collapsed(&self, tree: &TraceTree) -> Vec<NodeId> {
        self.collapsed
            .iter()
            .copied()
            .filter(|id| !tree.node(*id).is_some_and(|n| matches!(n.kind, NodeKind::Call | NodeKind::Loop)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrowDir {
    /// `←`: a value passed into a call or assigned to a variable.
    In,
    /// `→`: a value returned or read.
    Out,
}

/// An arrow glyph on a line; `offset` counts characters from the line start.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arrow {
    pub offset: usize,
    pub dir: ArrowDir,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedLine {
    pub index: usize,
    pub text: String,
    pub node_id: NodeId,
    /// Number of bars in front of the text.
    pub depth: usize,
    pub kind: NodeKind,
    pub source_span: Option<SourceSpan>,
    pub arrows: Vec<Arrow>,
}

#[derive(Debug)]
pub struct Glyphs {
    pub bar: &'static str,
    pub indent: &'static str,
    pub left: &'static str,
    pub right: &'static str,
    pub collapsed: &'static str,
    pub output: &'static str,
    pub error: &'static str,
    pub ellipsis: &'static str,
}

pub static UNICODE: Glyphs = Glyphs {
    bar: "│ ",
    indent: "  ",
    left: "←",
    right: "→",
    collapsed: "[…]",
    output: "≫",
    error: "✗",
    ellipsis: "…",
};

pub static ASCII: Glyphs = Glyphs {
    bar: "| ",
    indent: "  ",
    left: "<-",
    right: "->",
    collapsed: "[...]",
    output: ">>",
    error: "X",
    ellipsis: "...",
};

impl Glyphs {
    pub fn for_view(view: &ViewState) -> &'static Glyphs {
        if view.ascii {
            &ASCII
        } else {
            &UNICODE
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("line index {index} out of range ({len} lines)")]
pub struct IndexOutOfRange {
    pub index: usize,
    pub len: usize,
}

/// Lazily renders `tree`; the lines come out in order with consecutive indexes.
pub fn render<'a>(tree: &'a TraceTree, view: &'a ViewState) -> Renderer<'a> {
    Renderer::new(tree, view)
}

pub fn render_tree(tree: &TraceTree, view: &ViewState) -> Vec<RenderedLine> {
    render(tree, view).collect()
}

/// Lines joined with newlines, each line terminated.
pub fn to_text(lines: &[RenderedLine]) -> String {
    let mut out = String::with_capacity(lines.iter().map(|l| l.text.len() + 1).sum());
    for line in lines {
        out.push_str(&line.text);
        out.push('\n');
    }
    out
}

/// Maps each node to the rendered line that stands for it.
///
/// A node's own line wins; inside a collapsed block it is the topmost
/// collapsed ancestor's line; a node without a line of its own takes the first
/// line of its subtree, else its nearest ancestor's line.
pub struct LineMap<'a> {
    tree: &'a TraceTree,
    view: &'a ViewState,
    /// (node id, line index) for the first line of each node, by node id.
    first: Vec<(NodeId, usize)>,
}

impl<'a> LineMap<'a> {
    pub fn new(tree: &'a TraceTree, view: &'a ViewState, lines: &[RenderedLine]) -> Self {
        let mut first: Vec<(NodeId, usize)> = Vec::with_capacity(lines.len());
        for line in lines {
            first.push((line.node_id, line.index));
        }
        first.sort_unstable();
        first.dedup_by_key(|(id, _)| *id);
        Self { tree, view, first }
    }

    fn own(&self, id: NodeId) -> Option<usize> {
        self.first
            .binary_search_by_key(&id, |(n, _)| *n)
            .ok()
            .map(|i| self.first[i].1)
    }

    pub fn line_of(&self, id: NodeId) -> Option<usize> {
        let node = self.tree.node(id)?;
        let collapsed = self
            .tree
            .ancestors(id)
            .filter(|a| self.view.collapsed.contains(&a.id))
            .last();
        if let Some(ancestor) = collapsed {
            return self.own(ancestor.id);
        }
        if let Some(line) = self.own(id) {
            return Some(line);
        }
        let start = self.first.partition_point(|(n, _)| *n < id);
        let in_subtree = self.first[start..]
            .iter()
            .take_while(|(n, _)| *n <= node.subtree_end)
            .map(|(_, line)| *line)
            .min();
        if in_subtree.is_some() {
            return in_subtree;
        }
        self.tree.ancestors(id).find_map(|a| self.own(a.id))
    }
}

/// Header lines of the calls and loops enclosing the node of line `top` that
/// lie above it, outermost first.
pub fn breadcrumbs(
    tree: &TraceTree,
    view: &ViewState,
    lines: &[RenderedLine],
    top: usize,
) -> Result<Vec<RenderedLine>, IndexOutOfRange> {
    let line = lines.get(top).ok_or(IndexOutOfRange {
        index: top,
        len: lines.len(),
    })?;
    let map = LineMap::new(tree, view, lines);
    let mut out: Vec<RenderedLine> = tree
        .ancestors(line.node_id)
        .filter(|a| matches!(a.kind, NodeKind::Call | NodeKind::Loop))
        .filter_map(|a| map.own(a.id))
        .filter(|i| *i < top)
        .map(|i| lines[i].clone())
        .collect();
    out.reverse();
    Ok(out)
}

pub fn trace_to_source(lines: &[RenderedLine], index: usize) -> Option<SourceSpan> {
    lines.get(index).and_then(|l| l.source_span.clone())
}

/// Indexes of the rendered lines showing executions of `file:line`, ascending
/// and without duplicates.
pub fn source_to_trace(
    tree: &TraceTree,
    view: &ViewState,
    index: &TraceIndex,
    lines: &[RenderedLine],
    file: &str,
    line: u32,
) -> Vec<usize> {
    let map = LineMap::new(tree, view, lines);
    let mut out: Vec<usize> = index
        .occurrences(file, line)
        .iter()
        .filter_map(|id| map.line_of(*id))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Recorded subexpression values of a statement or loop header in evaluation
/// order; for a `ret`, `eval` or `bind` node its own value.
pub fn expression_values(tree: &TraceTree, id: NodeId) -> Result<Vec<(SourceSpan, ValueSnapshot)>, UnknownNode> {
    let node = tree.node(id).ok_or(UnknownNode(id))?;
    let pair = |n: &crate::model::TraceNode| Some((n.span.clone()?, n.value()?.clone()));
    Ok(match node.kind {
        NodeKind::Stmt | NodeKind::Loop => tree
            .children(id)
            .filter(|c| c.kind == NodeKind::Eval)
            .filter_map(pair)
            .collect(),
        NodeKind::Ret | NodeKind::Eval | NodeKind::Bind => pair(node).into_iter().collect(),
        _ => Vec::new(),
    })
}

/// Rendered line counts in `buckets` equal slices of the event sequence.
pub fn density(tree: &TraceTree, lines: &[RenderedLine], buckets: usize) -> Vec<u64> {
    let mut out = vec![0u64; buckets];
    if buckets == 0 {
        return out;
    }
    let span = tree.event_count().max(1);
    for line in lines {
        let b = (line.node_id as u128 * buckets as u128 / span as u128) as usize;
        out[b.min(buckets - 1)] += 1;
    }
    out
}

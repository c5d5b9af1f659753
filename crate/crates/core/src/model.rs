//! The control-flow tree built from an event stream.
//!
//! Every opening event (`run_begin`, `call_enter`, `stmt_begin`,
//! `loop_enter`, `iter_begin`) and every point event (`eval`, `bind`, `ret`,
//! `output`, `error`) becomes one node whose id is the event's seq. Nodes are
//! stored in id order, so a subtree is a contiguous id range and pre-order is
//! ascending id order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::SourceSpan;
use crate::tracer::{EventBody, EventKind, RunOutcome, TraceEvent, ValueSnapshot};

pub type NodeId = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Run,
    Call,
    Stmt,
    Loop,
    Iter,
    Eval,
    Bind,
    Ret,
    Output,
    Error,
}

impl NodeKind {
    pub const ALL: [NodeKind; 10] = [
        NodeKind::Run,
        NodeKind::Call,
        NodeKind::Stmt,
        NodeKind::Loop,
        NodeKind::Iter,
        NodeKind::Eval,
        NodeKind::Bind,
        NodeKind::Ret,
        NodeKind::Output,
        NodeKind::Error,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Run => "run",
            NodeKind::Call => "call",
            NodeKind::Stmt => "stmt",
            NodeKind::Loop => "loop",
            NodeKind::Iter => "iter",
            NodeKind::Eval => "eval",
            NodeKind::Bind => "bind",
            NodeKind::Ret => "ret",
            NodeKind::Output => "output",
            NodeKind::Error => "error",
        }
    }

    pub fn is_leaf(self) -> bool {
        matches!(
            self,
            NodeKind::Eval | NodeKind::Bind | NodeKind::Ret | NodeKind::Output | NodeKind::Error
        )
    }

    /// The node kind an event creates, if it creates one.
    pub fn of_event(kind: EventKind) -> Option<NodeKind> {
        Some(match kind {
            EventKind::RunBegin => NodeKind::Run,
            EventKind::CallEnter => NodeKind::Call,
            EventKind::StmtBegin => NodeKind::Stmt,
            EventKind::LoopEnter => NodeKind::Loop,
            EventKind::IterBegin => NodeKind::Iter,
            EventKind::Eval => NodeKind::Eval,
            EventKind::Bind => NodeKind::Bind,
            EventKind::Ret => NodeKind::Ret,
            EventKind::Output => NodeKind::Output,
            EventKind::Error => NodeKind::Error,
            EventKind::CallExit
            | EventKind::StmtEnd
            | EventKind::LoopExit
            | EventKind::IterEnd
            | EventKind::RunEnd => return None,
        })
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown node kind '{s}'"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub span: Option<SourceSpan>,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Largest id in this node's subtree (its own id for leaves).
    pub subtree_end: NodeId,
    /// Seq of the closing event; `None` for frames left open by an error or
    /// budget stop.
    pub closed_at: Option<u64>,
    /// Payload of the opening event.
    pub body: EventBody,
}

impl TraceNode {
    pub fn is_unclosed(&self) -> bool {
        self.closed_at.is_none()
    }

    /// Function name of a call, or builtin name of an opaque call eval.
    pub fn name(&self) -> Option<&str> {
        match &self.body {
            EventBody::CallEnter { name, .. } => Some(name),
            EventBody::Eval { builtin, .. } => builtin.as_deref(),
            _ => None,
        }
    }

    /// Variable of a bind, or the name read by an eval of a bare identifier.
    pub fn var(&self) -> Option<&str> {
        match &self.body {
            EventBody::Bind { var, .. } => Some(var),
            EventBody::Eval { expr, .. } if is_identifier(expr) => Some(expr),
            _ => None,
        }
    }

    pub fn is_name_read(&self) -> bool {
        matches!(&self.body, EventBody::Eval { expr, .. } if is_identifier(expr))
    }

    /// The node's own value: eval result, bound value or returned value.
    pub fn value(&self) -> Option<&ValueSnapshot> {
        match &self.body {
            EventBody::Eval { value, .. } | EventBody::Bind { value, .. } | EventBody::Ret { value } => Some(value),
            _ => None,
        }
    }

    /// Expression text of an eval, or call-site text of a call.
    pub fn expr(&self) -> Option<&str> {
        match &self.body {
            EventBody::Eval { expr, .. } | EventBody::CallEnter { expr, .. } => Some(expr),
            _ => None,
        }
    }

    pub fn iter_index(&self) -> Option<u64> {
        match &self.body {
            EventBody::IterBegin { index } => Some(*index),
            _ => None,
        }
    }

    /// Source text of a statement or loop header.
    pub fn header_text(&self) -> Option<&str> {
        match &self.body {
            EventBody::StmtBegin { text } | EventBody::LoopEnter { text } => Some(text),
            _ => None,
        }
    }

    pub fn line(&self) -> Option<u32> {
        self.span.as_ref().map(|s| s.line)
    }

    pub fn file(&self) -> Option<&str> {
        self.span.as_ref().map(|s| &*s.file)
    }
}

pub(crate) fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
        && !matches!(text, "True" | "False" | "None" | "and" | "or" | "not")
}

/// A stream that does not describe a well-nested run.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("malformed stream at seq {seq}: {reason}")]
pub struct MalformedStream {
    pub seq: u64,
    pub reason: String,
}

fn malformed<T>(seq: u64, reason: impl Into<String>) -> Result<T, MalformedStream> {
    Err(MalformedStream {
        seq,
        reason: reason.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("unknown node {0}")]
pub struct UnknownNode(pub NodeId);

const NO_NODE: u32 = u32::MAX;

/// Immutable tree of one run.
#[derive(Clone, Debug)]
pub struct TraceTree {
    nodes: Vec<TraceNode>,
    /// seq -> position in `nodes`, `NO_NODE` for closing events.
    position: Vec<u32>,
    outcome: RunOutcome,
    event_counts: [u64; EventKind::ALL.len()],
    error: Option<NodeId>,
}

fn opener_of(kind: EventKind) -> NodeKind {
    match kind {
        EventKind::CallExit => NodeKind::Call,
        EventKind::StmtEnd => NodeKind::Stmt,
        EventKind::LoopExit => NodeKind::Loop,
        EventKind::IterEnd => NodeKind::Iter,
        other => unreachable!("{other} closes nothing"),
    }
}

/// Incremental, strict tree construction.
#[derive(Debug, Default)]
pub struct TreeBuilder {
    nodes: Vec<TraceNode>,
    position: Vec<u32>,
    open: Vec<usize>,
    iterations: Vec<u64>,
    next_seq: u64,
    outcome: Option<RunOutcome>,
    event_counts: [u64; EventKind::ALL.len()],
    error: Option<NodeId>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the next event. After an error the builder must be discarded.
    pub fn push(&mut self, event: TraceEvent) -> Result<(), MalformedStream> {
        let seq = event.seq;
        let kind = event.kind();
        if self.outcome.is_some() {
            return malformed(seq, "event after run_end");
        }
        if seq != self.next_seq {
            return malformed(seq, format!("expected seq {}", self.next_seq));
        }
        if self.nodes.is_empty() != (kind == EventKind::RunBegin) {
            return malformed(
                seq,
                if self.nodes.is_empty() {
                    "stream does not start with run_begin"
                } else {
                    "run_begin after the start of the stream"
                },
            );
        }
        if u32::try_from(self.nodes.len()).is_err() {
            return malformed(seq, "too many events");
        }
        self.position.push(NO_NODE);
        match kind {
            EventKind::RunBegin | EventKind::CallEnter | EventKind::StmtBegin | EventKind::LoopEnter => {
                self.open_node(event)
            }
            EventKind::IterBegin => {
                if !matches!(self.open.last(), Some(&t) if self.nodes[t].kind == NodeKind::Loop) {
                    return malformed(seq, "iter_begin outside a loop");
                }
                let expected = self.iterations.last().copied().unwrap_or(0) + 1;
                if event.body != (EventBody::IterBegin { index: expected }) {
                    return malformed(seq, format!("iteration index should be {expected}"));
                }
                *self.iterations.last_mut().expect("loop is open") = expected;
                self.open_node(event)
            }
            EventKind::CallExit | EventKind::StmtEnd | EventKind::LoopExit | EventKind::IterEnd => {
                let want = opener_of(kind);
                match self.open.last() {
                    Some(&top) if self.open.len() > 1 && self.nodes[top].kind == want => self.close_top(Some(seq)),
                    Some(&top) => {
                        return malformed(seq, format!("{kind} does not match open {}", self.nodes[top].kind));
                    }
                    None => unreachable!("run node stays open until run_end"),
                }
            }
            EventKind::Eval | EventKind::Bind | EventKind::Ret | EventKind::Output | EventKind::Error => {
                if kind == EventKind::Error {
                    self.error = Some(seq);
                }
                let idx = self.add_node(event);
                self.nodes[idx].closed_at = Some(seq);
            }
            EventKind::RunEnd => {
                let EventBody::RunEnd { outcome } = event.body else { unreachable!() };
                if outcome == RunOutcome::Completed && self.open.len() > 1 {
                    return malformed(seq, format!("completed run leaves {} frames open", self.open.len() - 1));
                }
                while self.open.len() > 1 {
                    self.close_top(None);
                }
                self.close_top(Some(seq));
                self.outcome = Some(outcome);
            }
        }
        self.event_counts[kind.index()] += 1;
        self.next_seq += 1;
        Ok(())
    }

    fn add_node(&mut self, event: TraceEvent) -> usize {
        let idx = self.nodes.len();
        let parent = self.open.last().map(|&p| self.nodes[p].id);
        self.position[event.seq as usize] = idx as u32;
        if let Some(&p) = self.open.last() {
            self.nodes[p].children.push(event.seq);
        }
        self.nodes.push(TraceNode {
            id: event.seq,
            kind: NodeKind::of_event(event.kind()).expect("node-creating event"),
            span: event.span,
            parent,
            children: Vec::new(),
            subtree_end: event.seq,
            closed_at: None,
            body: event.body,
        });
        idx
    }

    fn open_node(&mut self, event: TraceEvent) {
        let idx = self.add_node(event);
        self.open.push(idx);
        self.iterations.push(0);
    }

    fn close_top(&mut self, closed_at: Option<u64>) {
        let idx = self.open.pop().expect("open frame");
        self.iterations.pop();
        let last = self.nodes.last().expect("non-empty").id;
        let node = &mut self.nodes[idx];
        node.subtree_end = last;
        node.closed_at = closed_at;
    }

    pub fn finish(self) -> Result<TraceTree, MalformedStream> {
        let Some(outcome) = self.outcome else {
            return malformed(
                self.next_seq,
                if self.nodes.is_empty() { "empty stream" } else { "missing run_end" },
            );
        };
        Ok(TraceTree {
            nodes: self.nodes,
            position: self.position,
            outcome,
            event_counts: self.event_counts,
            error: self.error,
        })
    }
}

pub fn build_tree(events: impl IntoIterator<Item = TraceEvent>) -> Result<TraceTree, MalformedStream> {
    let mut builder = TreeBuilder::new();
    for event in events {
        builder.push(event)?;
    }
    builder.finish()
}

impl TraceTree {
    pub fn root(&self) -> &TraceNode {
        &self.nodes[0]
    }

    /// All nodes in ascending id order.
    pub fn nodes(&self) -> &[TraceNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn position(&self, id: NodeId) -> Option<usize> {
        let pos = *self.position.get(usize::try_from(id).ok()?)?;
        (pos != NO_NODE).then_some(pos as usize)
    }

    pub fn node(&self, id: NodeId) -> Option<&TraceNode> {
        self.position(id).map(|p| &self.nodes[p])
    }

    /// # Panics
    ///
    /// Panics if no node has this id.
    pub fn get(&self, id: NodeId) -> &TraceNode {
        self.node(id).unwrap_or_else(|| panic!("unknown node {id}"))
    }

    pub fn outcome(&self) -> RunOutcome {
        self.outcome
    }

    pub fn event_count(&self) -> u64 {
        self.position.len() as u64
    }

    pub fn event_kind_count(&self, kind: EventKind) -> u64 {
        self.event_counts[kind.index()]
    }

    pub fn error(&self) -> Option<&TraceNode> {
        self.error.map(|id| self.get(id))
    }

    pub fn parent(&self, id: NodeId) -> Option<&TraceNode> {
        self.node(id)?.parent.map(|p| self.get(p))
    }

    pub fn children(&self, id: NodeId) -> impl Iterator<Item = &TraceNode> + '_ {
        self.node(id)
            .map(|n| n.children.as_slice())
            .unwrap_or_default()
            .iter()
            .map(|c| self.get(*c))
    }

    /// Strict ancestors, nearest first.
    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = &TraceNode> + '_ {
        std::iter::successors(self.parent(id), |n| n.parent.map(|p| self.get(p)))
    }

    /// Strict descendants in ascending id order.
    pub fn descendants(&self, id: NodeId) -> &[TraceNode] {
        let Some(pos) = self.position(id) else { return &[] };
        let end = self.position(self.nodes[pos].subtree_end).expect("subtree end is a node");
        &self.nodes[pos + 1..=end]
    }

    pub fn is_ancestor(&self, ancestor: NodeId, node: NodeId) -> bool {
        self.node(ancestor)
            .is_some_and(|a| a.id < node && node <= a.subtree_end && self.node(node).is_some())
    }

    /// Nearest strict ancestor of kind call.
    pub fn enclosing_call(&self, id: NodeId) -> Option<&TraceNode> {
        self.ancestors(id).find(|n| n.kind == NodeKind::Call)
    }

    /// Enclosing calls, outermost first, including `id` itself when it is a
    /// call.
    pub fn stack_at(&self, id: NodeId) -> Result<Vec<NodeId>, UnknownNode> {
        let node = self.node(id).ok_or(UnknownNode(id))?;
        let mut stack: Vec<NodeId> = self
            .ancestors(id)
            .filter(|n| n.kind == NodeKind::Call)
            .map(|n| n.id)
            .collect();
        stack.reverse();
        if node.kind == NodeKind::Call {
            stack.push(id);
        }
        Ok(stack)
    }

    /// Number of strict ancestors.
    pub fn depth(&self, id: NodeId) -> usize {
        self.ancestors(id).count()
    }

    /// Deepest node nesting in the tree (root has depth 0).
    pub fn max_depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for (i, node) in self.nodes.iter().enumerate().skip(1) {
            let parent = self.position(node.parent.expect("non-root")).expect("parent exists");
            depth[i] = depth[parent] + 1;
            max = max.max(depth[i]);
        }
        max
    }
}

/// Checks a raw stream against the nesting rules, reporting every breach and
/// resynchronising after each one.
pub fn validate(events: &[TraceEvent]) -> Vec<MalformedStream> {
    let mut violations = Vec::new();
    let mut report = |seq: u64, reason: String| violations.push(MalformedStream { seq, reason });
    let mut expected = 0u64;
    let mut frames: Vec<(NodeKind, u64)> = Vec::new();
    let mut started = false;
    let mut ended = false;
    for event in events {
        let seq = event.seq;
        let kind = event.kind();
        if seq != expected {
            report(seq, format!("expected seq {expected}"));
        }
        expected = seq.wrapping_add(1);
        if ended {
            report(seq, "event after run_end".into());
            continue;
        }
        let needs_span = !matches!(kind, EventKind::RunBegin | EventKind::RunEnd);
        if needs_span && event.span.is_none() {
            report(seq, format!("{kind} without span"));
        }
        if kind == EventKind::RunBegin {
            if started {
                report(seq, "run_begin after the start of the stream".into());
            } else {
                started = true;
                frames.push((NodeKind::Run, 0));
            }
            continue;
        }
        if !started {
            report(seq, "stream does not start with run_begin".into());
            started = true;
            frames.push((NodeKind::Run, 0));
        }
        match kind {
            EventKind::CallEnter | EventKind::StmtBegin | EventKind::LoopEnter => {
                frames.push((NodeKind::of_event(kind).expect("opener"), 0));
            }
            EventKind::IterBegin => {
                let index = event.iter_index_or_zero();
                match frames.last_mut() {
                    Some((NodeKind::Loop, count)) => {
                        if index != *count + 1 {
                            report(seq, format!("iteration index should be {}", *count + 1));
                        }
                        *count = index;
                    }
                    _ => report(seq, "iter_begin outside a loop".into()),
                }
                frames.push((NodeKind::Iter, 0));
            }
            EventKind::CallExit | EventKind::StmtEnd | EventKind::LoopExit | EventKind::IterEnd => {
                let want = opener_of(kind);
                match frames.iter().rposition(|(k, _)| *k == want) {
                    Some(pos) if pos + 1 == frames.len() => {
                        frames.pop();
                    }
                    Some(pos) if pos > 0 => {
                        report(seq, format!("{kind} does not match open {}", frames.last().expect("open").0));
                        frames.truncate(pos);
                    }
                    _ => report(seq, format!("{kind} without matching open {want}")),
                }
            }
            EventKind::RunEnd => {
                ended = true;
                let completed = matches!(event.body, EventBody::RunEnd { outcome: RunOutcome::Completed });
                if completed && frames.len() > 1 {
                    report(seq, format!("completed run leaves {} frames open", frames.len() - 1));
                }
            }
            _ => {}
        }
    }
    if events.is_empty() {
        report(0, "empty stream".into());
    } else if !ended {
        report(expected, "missing run_end".into());
    }
    violations
}

impl TraceEvent {
    fn iter_index_or_zero(&self) -> u64 {
        match self.body {
            EventBody::IterBegin { index } => index,
            _ => 0,
        }
    }
}

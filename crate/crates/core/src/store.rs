//! Trace files: one JSON event per line, plus the lookup indexes rebuilt on
//! load.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::model::{build_tree, MalformedStream, NodeId, NodeKind, TraceTree, TreeBuilder};
use crate::tracer::{EventBody, EventKind, EventSink, TraceEvent};

/// Conventional extension of trace files.
pub const TRACE_EXTENSION: &str = ".trace.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: u64, message: String },
    #[error(transparent)]
    MalformedStream(#[from] MalformedStream),
}

fn write_one<W: Write>(out: &mut W, event: &TraceEvent, scratch: &mut Vec<u8>) -> io::Result<u64> {
    scratch.clear();
    serde_json::to_writer(&mut *scratch, event).map_err(io::Error::other)?;
    scratch.push(b'\n');
    out.write_all(scratch)?;
    Ok(scratch.len() as u64)
}

/// Writes one line per event and flushes. Returns the number of bytes written.
pub fn write_events<'a, W: Write>(events: impl IntoIterator<Item = &'a TraceEvent>, sink: W) -> io::Result<u64> {
    let mut out = BufWriter::with_capacity(1 << 16, sink);
    let mut scratch = Vec::with_capacity(256);
    let mut total = 0;
    for event in events {
        total += write_one(&mut out, event, &mut scratch)?;
    }
    out.flush()?;
    Ok(total)
}

/// Event sink that streams JSONL to a writer while the program runs.
pub struct JsonlSink<W: Write> {
    out: BufWriter<W>,
    scratch: Vec<u8>,
    bytes: u64,
    events: u64,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(writer: W) -> Self {
        Self {
            out: BufWriter::with_capacity(1 << 16, writer),
            scratch: Vec::with_capacity(256),
            bytes: 0,
            events: 0,
        }
    }

    pub fn bytes_written(&self) -> u64 {
        self.bytes
    }

    pub fn events_written(&self) -> u64 {
        self.events
    }

    /// Flushes and returns the underlying writer.
    pub fn finish(self) -> io::Result<W> {
        self.out.into_inner().map_err(|e| e.into_error())
    }
}

impl<W: Write> EventSink for JsonlSink<W> {
    fn accept(&mut self, event: TraceEvent) -> io::Result<()> {
        self.bytes += write_one(&mut self.out, &event, &mut self.scratch)?;
        self.events += 1;
        Ok(())
    }
}

/// Parses events lazily, one per line. Blank lines are not allowed.
pub fn read_events<R: BufRead>(source: R) -> impl Iterator<Item = Result<TraceEvent, StoreError>> {
    let mut lines = source.split(b'\n');
    let mut line_no = 0u64;
    std::iter::from_fn(move || {
        let raw = lines.next()?;
        line_no += 1;
        Some(raw.map_err(StoreError::from).and_then(|mut raw| {
            if raw.last() == Some(&b'\r') {
                raw.pop();
            }
            serde_json::from_slice(&raw).map_err(|e| StoreError::MalformedRecord {
                line: line_no,
                message: e.to_string(),
            })
        }))
    })
}

pub fn read_all<R: BufRead>(source: R) -> Result<Vec<TraceEvent>, StoreError> {
    read_events(source).collect()
}

/// Source-to-trace and identity lookup tables.
#[derive(Clone, Debug, Default)]
pub struct TraceIndex {
    line_occurrences: HashMap<(Arc<str>, u32), Vec<NodeId>>,
    line_nodes: HashMap<u32, Vec<NodeId>>,
    call_names: HashMap<Arc<str>, Vec<NodeId>>,
    builtin_names: HashMap<Arc<str>, Vec<NodeId>>,
    oid_touches: HashMap<u64, Vec<NodeId>>,
}

/// Whether a node counts as an execution of its source line: statements and
/// loop headers do, the expressions inside them do not.
pub fn is_line_execution(kind: NodeKind) -> bool {
    matches!(kind, NodeKind::Stmt | NodeKind::Loop)
}

pub fn build_index(tree: &TraceTree) -> TraceIndex {
    let mut index = TraceIndex::default();
    for node in tree.nodes() {
        if let Some(span) = &node.span {
            if is_line_execution(node.kind) {
                index
                    .line_occurrences
                    .entry((span.file.clone(), span.line))
                    .or_default()
                    .push(node.id);
            }
            index.line_nodes.entry(span.line).or_default().push(node.id);
        }
        match &node.body {
            EventBody::CallEnter { name, .. } => index.call_names.entry(name.clone()).or_default().push(node.id),
            EventBody::Eval {
                builtin: Some(name), ..
            } => index.builtin_names.entry(name.clone()).or_default().push(node.id),
            _ => {}
        }
        for value in node.body.values() {
            value.for_each_oid(&mut |oid| {
                let ids = index.oid_touches.entry(oid).or_default();
                if ids.last() != Some(&node.id) {
                    ids.push(node.id);
                }
            });
        }
    }
    index
}

impl TraceIndex {
    /// Statement and loop nodes executed for `file:line`, ascending.
    pub fn occurrences(&self, file: &str, line: u32) -> &[NodeId] {
        self.line_occurrences
            .get(&(Arc::from(file), line))
            .map(Vec::as_slice)
            .unwrap_or_default()
    }

    /// Nodes of any kind whose span starts on `line` of any file.
    pub fn nodes_on_line(&self, line: u32) -> &[NodeId] {
        self.line_nodes.get(&line).map(Vec::as_slice).unwrap_or_default()
    }

    pub fn calls_named(&self, name: &str) -> &[NodeId] {
        self.call_names.get(name).map(Vec::as_slice).unwrap_or_default()
    }

    /// Opaque builtin call evaluations of `name`.
    pub fn builtin_evals_named(&self, name: &str) -> &[NodeId] {
        self.builtin_names.get(name).map(Vec::as_slice).unwrap_or_default()
    }

    /// Nodes whose payload contains the list `oid` anywhere.
    pub fn touching(&self, oid: u64) -> &[NodeId] {
        self.oid_touches.get(&oid).map(Vec::as_slice).unwrap_or_default()
    }

    /// Source lines with at least one execution, sorted.
    pub fn executed_lines(&self) -> Vec<(Arc<str>, u32)> {
        let mut lines: Vec<_> = self.line_occurrences.keys().cloned().collect();
        lines.sort();
        lines
    }
}

/// Size and shape figures of one trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceStats {
    pub event_count: u64,
    pub node_count: u64,
    /// Size of the trace file, when it was loaded from one.
    pub byte_size: Option<u64>,
    pub max_depth: u64,
    pub kind_counts: BTreeMap<String, u64>,
    /// Duration of the traced run, when it was measured in this process.
    pub wall_time_ms: Option<u64>,
    pub outcome: String,
}

pub fn stats(tree: &TraceTree) -> TraceStats {
    TraceStats {
        event_count: tree.event_count(),
        node_count: tree.len() as u64,
        byte_size: None,
        max_depth: tree.max_depth() as u64,
        kind_counts: EventKind::ALL
            .into_iter()
            .map(|k| (k.as_str().to_string(), tree.event_kind_count(k)))
            .filter(|(_, n)| *n > 0)
            .collect(),
        wall_time_ms: None,
        outcome: tree.outcome().as_str().to_string(),
    }
}

/// A trace file brought into memory.
#[derive(Clone, Debug)]
pub struct LoadedTrace {
    pub tree: TraceTree,
    pub index: TraceIndex,
    pub stats: TraceStats,
}

impl LoadedTrace {
    pub fn from_events(events: impl IntoIterator<Item = TraceEvent>) -> Result<Self, MalformedStream> {
        let tree = build_tree(events)?;
        Ok(Self::from_tree(tree))
    }

    pub fn from_tree(tree: TraceTree) -> Self {
        let index = build_index(&tree);
        let stats = stats(&tree);
        Self { tree, index, stats }
    }
}

pub fn load_reader<R: BufRead>(source: R) -> Result<LoadedTrace, StoreError> {
    let mut builder = TreeBuilder::new();
    for event in read_events(source) {
        builder.push(event?)?;
    }
    Ok(LoadedTrace::from_tree(builder.finish()?))
}

pub fn load(path: impl AsRef<Path>) -> Result<LoadedTrace, StoreError> {
    let file = File::open(path)?;
    let size = file.metadata()?.len();
    let mut loaded = load_reader(BufReader::with_capacity(1 << 20, file))?;
    loaded.stats.byte_size = Some(size);
    Ok(loaded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::SourceSpan;
    use crate::tracer::{RunOutcome, ValueSnapshot};

    fn minimal() -> Vec<TraceEvent> {
        vec![
            TraceEvent {
                seq: 0,
                span: None,
                body: EventBody::RunBegin { entry: "main".into() },
            },
            TraceEvent {
                seq: 1,
                span: None,
                body: EventBody::RunEnd {
                    outcome: RunOutcome::Completed,
                },
            },
        ]
    }

    #[test]
    fn minimal_stream_writes_two_lines() {
        let mut buf = Vec::new();
        let n = write_events(&minimal(), &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), 2);
        assert_eq!(read_all(&buf[..]).unwrap(), minimal());
        let loaded = load_reader(&buf[..]).unwrap();
        assert_eq!(loaded.stats.event_count, 2);
    }

    #[test]
    fn corrupted_line_is_located() {
        let mut buf = Vec::new();
        write_events(&minimal(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\"run_end\"", "\"run_end");
        match read_all(text.as_bytes()) {
            Err(StoreError::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn oid_touches_look_inside_containers() {
        let span = SourceSpan::new("a.py".into(), 1, 1, 1, 2);
        let nested = ValueSnapshot::Tuple {
            elems: vec![ValueSnapshot::List {
                oid: 4,
                elems: vec![ValueSnapshot::List { oid: 5, elems: vec![] }],
            }],
        };
        let mut events = minimal();
        events.insert(
            1,
            TraceEvent {
                seq: 1,
                span: Some(span),
                body: EventBody::Output { text: "x".into() },
            },
        );
        events.insert(
            1,
            TraceEvent {
                seq: 1,
                span: Some(SourceSpan::new("a.py".into(), 1, 1, 1, 2)),
                body: EventBody::Eval {
                    expr: "t".into(),
                    value: nested,
                    builtin: None,
                },
            },
        );
        for (i, e) in events.iter_mut().enumerate() {
            e.seq = i as u64;
        }
        let loaded = LoadedTrace::from_events(events).unwrap();
        assert_eq!(loaded.index.touching(4), &[1]);
        assert_eq!(loaded.index.touching(5), &[1]);
        assert!(loaded.index.touching(6).is_empty());
        assert!(loaded.index.occurrences("a.py", 1).is_empty());
        assert_eq!(loaded.index.nodes_on_line(1), &[1, 2]);
    }
}

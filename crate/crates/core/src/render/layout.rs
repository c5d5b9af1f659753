use std::collections::VecDeque;

use super::{Arrow, ArrowDir, Glyphs, RenderedLine, ViewState};
use crate::minilang::SourceSpan;
use crate::model::{NodeId, NodeKind, TraceNode, TraceTree};
use crate::tracer::{EventBody, ValueSnapshot};

/// Longest rendered value, in characters, before it is cut with an ellipsis.
pub const MAX_VALUE_CHARS: usize = 120;

struct Frame {
    pos: usize,
    next: usize,
    prefix: String,
    depth: usize,
    /// Set for loop frames: prefix and depth of iteration bodies.
    iter_prefix: Option<(String, usize)>,
}

/// Lazily produces the rendered lines of a tree in order.
pub struct Renderer<'a> {
    tree: &'a TraceTree,
    view: &'a ViewState,
    glyphs: &'static Glyphs,
    stack: Vec<Frame>,
    pending: VecDeque<RenderedLine>,
    next_index: usize,
}

impl<'a> Renderer<'a> {
    pub fn new(tree: &'a TraceTree, view: &'a ViewState) -> Self {
        Self {
            tree,
            view,
            glyphs: Glyphs::for_view(view),
            stack: vec![Frame {
                pos: 0,
                next: 0,
                prefix: String::new(),
                depth: 0,
                iter_prefix: None,
            }],
            pending: VecDeque::new(),
            next_index: 0,
        }
    }
}

impl Iterator for Renderer<'_> {
    type Item = RenderedLine;

    fn next(&mut self) -> Option<RenderedLine> {
        loop {
            if let Some(line) = self.pending.pop_front() {
                return Some(line);
            }
            let frame = self.stack.last_mut()?;
            let node = &self.tree.nodes()[frame.pos];
            let Some(&child) = node.children.get(frame.next) else {
                self.stack.pop();
                continue;
            };
            frame.next += 1;
            let child = self.tree.get(child);
            let (prefix, depth) = match (&frame.iter_prefix, child.kind) {
                (Some((p, d)), NodeKind::Iter) => (p.clone(), *d),
                _ => (frame.prefix.clone(), frame.depth),
            };
            self.visit(child, prefix, depth);
        }
    }
}

/// Text of one line under construction, tracking arrow positions.
struct LineBuf<'g> {
    text: String,
    chars: usize,
    arrows: Vec<Arrow>,
    glyphs: &'g Glyphs,
}

impl<'g> LineBuf<'g> {
    fn new(prefix: &str, glyphs: &'g Glyphs) -> Self {
        let mut text = String::with_capacity(prefix.len() + 64);
        text.push_str(prefix);
        Self {
            text,
            chars: prefix.chars().count(),
            arrows: Vec::new(),
            glyphs,
        }
    }

    fn push(&mut self, s: &str) {
        self.text.push_str(s);
        self.chars += s.chars().count();
    }

    fn arrow(&mut self, dir: ArrowDir) {
        self.arrows.push(Arrow {
            offset: self.chars,
            dir,
        });
        self.push(match dir {
            ArrowDir::In => self.glyphs.left,
            ArrowDir::Out => self.glyphs.right,
        });
    }

    fn value(&mut self, v: &ValueSnapshot) {
        let s = format_value(v, self.glyphs);
        self.push(&s);
    }
}

/// A value as displayed in the trace, cut to [`MAX_VALUE_CHARS`].
pub fn format_value(v: &ValueSnapshot, glyphs: &Glyphs) -> String {
    cap(v.to_string(), glyphs)
}

fn cap(s: String, glyphs: &Glyphs) -> String {
    let s = if glyphs.ellipsis == "…" { s } else { s.replace('…', glyphs.ellipsis) };
    if s.chars().count() <= MAX_VALUE_CHARS {
        return s;
    }
    let mut out: String = s.chars().take(MAX_VALUE_CHARS - 1).collect();
    out.push_str(glyphs.ellipsis);
    out
}

/// A returned value: a tuple of two or more elements prints without parens.
fn format_returned(v: &ValueSnapshot, glyphs: &Glyphs) -> String {
    match v {
        ValueSnapshot::Tuple { elems } if elems.len() >= 2 => cap(
            elems.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
            glyphs,
        ),
        other => format_value(other, glyphs),
    }
}

/// Character offsets of `span` relative to `header` when both are on one line.
fn offsets_in(span: &SourceSpan, header: &SourceSpan) -> Option<(usize, usize)> {
    (span.line == header.line && span.end_line == header.line && span.col >= header.col)
        .then(|| ((span.col - header.col) as usize, (span.end_col - header.col) as usize))
}

/// Char ranges of the top-level comma-separated parts of the expression of a
/// `return` statement.
fn return_components(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let keyword = "return";
    if !text.starts_with(keyword) || chars.get(keyword.len()).is_some_and(|c| !c.is_whitespace()) {
        return Vec::new();
    }
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut start = keyword.len();
    let mut i = start;
    while i < chars.len() {
        let c = chars[i];
        match quote {
            Some(_) if c == '\\' => i += 1,
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None => match c {
                '\'' | '"' => quote = Some(c),
                '(' | '[' => depth += 1,
                ')' | ']' => depth -= 1,
                ',' if depth == 0 => {
                    push_trimmed(&chars, start, i, &mut parts);
                    start = i + 1;
                }
                _ => {}
            },
        }
        i += 1;
    }
    push_trimmed(&chars, start, chars.len(), &mut parts);
    parts
}

fn push_trimmed(chars: &[char], mut from: usize, mut to: usize, parts: &mut Vec<(usize, usize)>) {
    while from < to && chars[from].is_whitespace() {
        from += 1;
    }
    while to > from && chars[to - 1].is_whitespace() {
        to -= 1;
    }
    if from < to {
        parts.push((from, to));
    }
}

impl<'a> Renderer<'a> {
    fn emit(&mut self, node: &TraceNode, depth: usize, buf: LineBuf<'_>) {
        let line = RenderedLine {
            index: self.next_index,
            text: buf.text,
            node_id: node.id,
            depth,
            kind: node.kind,
            source_span: node.span.clone(),
            arrows: buf.arrows,
        };
        self.next_index += 1;
        self.pending.push_back(line);
    }

    fn child_prefix(&self, prefix: &str, seg: &str) -> String {
        let mut p = String::with_capacity(prefix.len() + seg.len());
        p.push_str(prefix);
        p.push_str(seg);
        p
    }

    fn visit(&mut self, node: &TraceNode, prefix: String, depth: usize) {
        let g = self.glyphs;
        let pos = self.tree.position(node.id).expect("node exists");
        match node.kind {
            NodeKind::Run => {}
            NodeKind::Call => {
                if self.view.collapsed.contains(&node.id) {
                    let mut buf = LineBuf::new(&prefix, g);
                    self.call_site(node, &mut buf);
                    buf.push(" ");
                    buf.push(g.collapsed);
                    self.emit(node, depth, buf);
                    return;
                }
                let mut buf = LineBuf::new(&prefix, g);
                let EventBody::CallEnter { name, args, .. } = &node.body else { unreachable!() };
                buf.push(name);
                buf.push("(");
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        buf.push(", ");
                    }
                    buf.push(&arg.var);
                    buf.push(" ");
                    buf.arrow(ArrowDir::In);
                    buf.push(" ");
                    buf.value(&arg.value);
                }
                buf.push("):");
                self.emit(node, depth, buf);
                let body = self.child_prefix(&prefix, g.bar);
                self.stack.push(Frame {
                    pos,
                    next: 0,
                    prefix: body,
                    depth: depth + 1,
                    iter_prefix: None,
                });
            }
            NodeKind::Stmt => {
                if let Some(call) = self.merged_call(node) {
                    self.visit(call, prefix, depth);
                    return;
                }
                let mut buf = LineBuf::new(&prefix, g);
                self.annotated_header(node, &node.children, &mut buf);
                self.emit(node, depth, buf);
                let inner = self.child_prefix(&prefix, g.indent);
                self.stack.push(Frame {
                    pos,
                    next: 0,
                    prefix: inner,
                    depth,
                    iter_prefix: None,
                });
            }
            NodeKind::Loop => {
                let first_iter = node
                    .children
                    .iter()
                    .position(|c| self.tree.get(*c).kind == NodeKind::Iter)
                    .unwrap_or(node.children.len());
                let mut buf = LineBuf::new(&prefix, g);
                self.annotated_header(node, &node.children[..first_iter], &mut buf);
                let collapsed = self.view.collapsed.contains(&node.id);
                if collapsed {
                    buf.push(" ");
                    buf.push(g.collapsed);
                }
                self.emit(node, depth, buf);
                if !collapsed {
                    let inner = self.child_prefix(&prefix, g.indent);
                    let body = self.child_prefix(&prefix, g.bar);
                    self.stack.push(Frame {
                        pos,
                        next: 0,
                        prefix: inner,
                        depth,
                        iter_prefix: Some((body, depth + 1)),
                    });
                }
            }
            NodeKind::Iter => self.stack.push(Frame {
                pos,
                next: 0,
                prefix,
                depth,
                iter_prefix: None,
            }),
            NodeKind::Eval => {
                if !self.view.show_subexpr {
                    return;
                }
                let EventBody::Eval {
                    builtin: Some(_),
                    value,
                    expr,
                } = &node.body
                else {
                    return;
                };
                let mut buf = LineBuf::new(&prefix, g);
                let span = node.span.as_ref().expect("eval has a span");
                let reads = self.name_reads_within(node, span);
                self.annotate(expr, span, &reads, ArrowDir::In, &mut buf);
                buf.push(" ");
                buf.arrow(ArrowDir::Out);
                buf.push(" ");
                buf.value(value);
                self.emit(node, depth, buf);
            }
            NodeKind::Bind => {
                if !self.view.show_subexpr {
                    return;
                }
                let EventBody::Bind { var, value } = &node.body else { unreachable!() };
                let mut buf = LineBuf::new(&prefix, g);
                buf.push(var);
                buf.push(" ");
                buf.arrow(ArrowDir::In);
                buf.push(" ");
                buf.value(value);
                self.emit(node, depth, buf);
            }
            NodeKind::Ret => {
                let EventBody::Ret { value } = &node.body else { unreachable!() };
                let mut buf = LineBuf::new(&prefix, g);
                buf.arrow(ArrowDir::Out);
                buf.push(" ");
                let s = format_returned(value, g);
                buf.push(&s);
                self.emit(node, depth, buf);
            }
            NodeKind::Output => {
                if !self.view.show_output {
                    return;
                }
                let EventBody::Output { text } = &node.body else { unreachable!() };
                let mut buf = LineBuf::new(&prefix, g);
                buf.push(g.output);
                buf.push(" ");
                buf.push(&text.replace('\n', " "));
                self.emit(node, depth, buf);
            }
            NodeKind::Error => {
                let EventBody::Error { message } = &node.body else { unreachable!() };
                let mut buf = LineBuf::new(&prefix, g);
                buf.push(g.error);
                buf.push(" ");
                buf.push(message);
                self.emit(node, depth, buf);
            }
        }
    }

    /// Whether a child would produce a line of its own in this view.
    fn produces_line(&self, node: &TraceNode) -> bool {
        match node.kind {
            NodeKind::Eval => self.view.show_subexpr && node.name().is_some(),
            NodeKind::Bind => self.view.show_subexpr,
            NodeKind::Output => self.view.show_output,
            NodeKind::Run | NodeKind::Iter => false,
            NodeKind::Call | NodeKind::Stmt | NodeKind::Loop | NodeKind::Ret | NodeKind::Error => true,
        }
    }

    /// An expression statement that is exactly one user call renders as the
    /// call block alone.
    fn merged_call(&self, stmt: &TraceNode) -> Option<&'a TraceNode> {
        let mut call = None;
        let tree = self.tree;
        for &child in &stmt.children {
            let child = tree.get(child);
            if !self.produces_line(child) {
                continue;
            }
            if child.kind != NodeKind::Call || call.is_some() || child.span != stmt.span {
                return None;
            }
            call = Some(child);
        }
        call
    }

    /// Name reads among the direct children of `owner`'s parent that precede
    /// `owner` and lie within `span`.
    fn name_reads_within(&self, owner: &TraceNode, span: &SourceSpan) -> Vec<&TraceNode> {
        let Some(parent) = owner.parent.map(|p| self.tree.get(p)) else {
            return Vec::new();
        };
        parent
            .children
            .iter()
            .take_while(|c| **c < owner.id)
            .map(|c| self.tree.get(*c))
            .filter(|c| c.is_name_read() && c.span.as_ref().is_some_and(|s| span.contains(s)))
            .collect()
    }

    /// Call-site text of a collapsed call with its argument name reads
    /// annotated.
    fn call_site(&self, call: &TraceNode, buf: &mut LineBuf<'_>) {
        let EventBody::CallEnter { expr, .. } = &call.body else { unreachable!() };
        let span = call.span.as_ref().expect("call has a span");
        let reads = self.name_reads_within(call, span);
        self.annotate(expr, span, &reads, ArrowDir::Out, buf);
    }

    /// Header text of a statement or loop with `name → value` after each
    /// name read among `children`.
    fn annotated_header(&self, node: &TraceNode, children: &[NodeId], buf: &mut LineBuf<'_>) {
        let text = node.header_text().unwrap_or_default();
        let span = node.span.as_ref().expect("statement has a span");
        let skip = if node.kind == NodeKind::Stmt { return_components(text) } else { Vec::new() };
        let reads: Vec<&TraceNode> = children
            .iter()
            .map(|c| self.tree.get(*c))
            .filter(|c| c.is_name_read())
            .filter(|c| {
                let offsets = c.span.as_ref().and_then(|s| offsets_in(s, span));
                offsets.is_some_and(|o| !skip.contains(&o))
            })
            .collect();
        self.annotate(text, span, &reads, ArrowDir::Out, buf);
    }

    /// Copies `text` (which starts at `span`) inserting ` arrow value` after
    /// each read name.
    fn annotate(&self, text: &str, span: &SourceSpan, reads: &[&TraceNode], dir: ArrowDir, buf: &mut LineBuf<'_>) {
        let mut inserts: Vec<(usize, &ValueSnapshot)> = reads
            .iter()
            .filter_map(|r| {
                let (_, end) = offsets_in(r.span.as_ref()?, span)?;
                Some((end, r.value()?))
            })
            .collect();
        inserts.sort_by_key(|(end, _)| *end);
        let byte_at: Vec<usize> = text
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(text.len()))
            .collect();
        let mut copied = 0;
        for (end, value) in inserts {
            let Some(&b) = byte_at.get(end) else { continue };
            if b < copied {
                continue;
            }
            buf.push(&text[copied..b]);
            buf.push(" ");
            buf.arrow(dir);
            buf.push(" ");
            buf.value(value);
            copied = b;
        }
        buf.push(&text[copied..]);
    }
}

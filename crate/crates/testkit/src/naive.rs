//! Reference implementations that favour obviousness over speed: no index,
//! no id ranges, only parent links and full scans.

use tracer_core::minilang::SourceSpan;
use tracer_core::model::{NodeId, NodeKind, TraceNode, TraceTree};
use tracer_core::query::{Attr, Combinator, Filter, Literal, Selector, Step};
use tracer_core::tracer::{EventBody, ValueSnapshot};

/// Nodes related to `anchor` by `comb`, collected by walking child lists.
fn related(tree: &TraceTree, anchor: NodeId, comb: Combinator) -> Vec<NodeId> {
    fn walk(tree: &TraceTree, id: NodeId, stop_at_calls: bool, out: &mut Vec<NodeId>) {
        for &c in &tree.get(id).children {
            out.push(c);
            if !(stop_at_calls && tree.get(c).kind == NodeKind::Call) {
                walk(tree, c, stop_at_calls, out);
            }
        }
    }
    let mut out = Vec::new();
    match comb {
        Combinator::Descendant => walk(tree, anchor, false, &mut out),
        Combinator::Child => out.extend_from_slice(&tree.get(anchor).children),
        Combinator::SameFrame => walk(tree, anchor, true, &mut out),
    }
    out.sort_unstable();
    out
}

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(f) if f.is_alphabetic() || f == '_')
        && c.all(|x| x.is_alphanumeric() || x == '_')
        && !["True", "False", "None", "and", "or", "not"].contains(&s)
}

fn oid_in(v: &ValueSnapshot, oid: u64) -> bool {
    match v {
        ValueSnapshot::List { oid: o, elems } => *o == oid || elems.iter().any(|e| oid_in(e, oid)),
        ValueSnapshot::Tuple { elems } => elems.iter().any(|e| oid_in(e, oid)),
        _ => false,
    }
}

fn predicate(tree: &TraceTree, n: &TraceNode, attr: Attr, lit: &Literal) -> bool {
    let s = |x: Option<&str>| match lit {
        Literal::Str(want) => x == Some(want.as_str()),
        _ => false,
    };
    let i = |x: Option<u64>| match lit {
        Literal::Int(want) => x.map(|v| v as i64) == Some(*want),
        _ => false,
    };
    match attr {
        Attr::Name => s(match &n.body {
            EventBody::CallEnter { name, .. } => Some(name),
            EventBody::Eval { builtin: Some(b), .. } => Some(b),
            _ => None,
        }),
        Attr::Var => s(match &n.body {
            EventBody::Bind { var, .. } => Some(var),
            EventBody::Eval { expr, .. } if is_ident(expr) => Some(expr),
            _ => None,
        }),
        Attr::Func => {
            let mut cur = n.parent;
            while let Some(p) = cur {
                let pn = tree.get(p);
                if let EventBody::CallEnter { name, .. } = &pn.body {
                    return s(Some(name));
                }
                cur = pn.parent;
            }
            false
        }
        Attr::File => s(n.span.as_ref().map(|sp: &SourceSpan| &*sp.file)),
        Attr::Line => i(n.span.as_ref().map(|sp| sp.line as u64)),
        Attr::Expr => s(match &n.body {
            EventBody::Eval { expr, .. } | EventBody::CallEnter { expr, .. } => Some(expr),
            _ => None,
        }),
        Attr::Idx => i(match &n.body {
            EventBody::IterBegin { index } => Some(*index),
            _ => None,
        }),
        Attr::Oid => match lit {
            Literal::Int(o) => {
                let mut vals: Vec<&ValueSnapshot> = Vec::new();
                match &n.body {
                    EventBody::CallEnter { args, .. } => vals.extend(args.iter().map(|b| &b.value)),
                    EventBody::Eval { value, .. } | EventBody::Bind { value, .. } | EventBody::Ret { value } => {
                        vals.push(value)
                    }
                    _ => {}
                }
                vals.into_iter().any(|v| oid_in(v, *o as u64))
            }
            _ => false,
        },
        Attr::Value => {
            let v = match &n.body {
                EventBody::Eval { value, .. } | EventBody::Bind { value, .. } | EventBody::Ret { value } => value,
                _ => return false,
            };
            match (lit, v) {
                (Literal::Null, ValueSnapshot::None) => true,
                (Literal::Bool(a), ValueSnapshot::Bool { value }) => a == value,
                (Literal::Int(a), ValueSnapshot::Int { value }) => a == value,
                (Literal::Int(a), ValueSnapshot::Float { value }) => *a as f64 == *value,
                (Literal::Str(a), ValueSnapshot::Str { value }) => a.as_str() == &**value,
                _ => false,
            }
        }
    }
}

/// Candidates of `step` relative to `anchor` (`None`: the whole tree) after
/// its filters.
fn step_matches(tree: &TraceTree, anchor: Option<NodeId>, comb: Combinator, step: &Step) -> Vec<NodeId> {
    let pool: Vec<NodeId> = match anchor {
        Some(a) => related(tree, a, comb),
        None => tree.nodes().iter().map(|n| n.id).collect(),
    };
    let mut ids: Vec<NodeId> = pool
        .into_iter()
        .filter(|id| match step.kind {
            Some(k) => tree.get(*id).kind == k,
            None => tree.get(*id).kind != NodeKind::Run,
        })
        .collect();
    for f in &step.filters {
        ids = match f {
            Filter::Attr { attr, value } => ids
                .into_iter()
                .filter(|id| predicate(tree, tree.get(*id), *attr, value))
                .collect(),
            Filter::Has { combinator, selector } => ids
                .into_iter()
                .filter(|id| !chain(tree, vec![*id], *combinator, selector).is_empty())
                .collect(),
            Filter::First => ids.into_iter().take(1).collect(),
            Filter::Last => ids.into_iter().last().into_iter().collect(),
            Filter::Nth(k) => ids.into_iter().nth(k - 1).into_iter().collect(),
        };
    }
    ids
}

fn chain(tree: &TraceTree, anchors: Vec<NodeId>, comb: Combinator, sel: &Selector) -> Vec<NodeId> {
    let mut current = from_anchors(tree, &anchors, comb, &sel.first);
    for (c, step) in &sel.rest {
        current = from_anchors(tree, &current, *c, step);
    }
    current
}

fn from_anchors(tree: &TraceTree, anchors: &[NodeId], comb: Combinator, step: &Step) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = anchors
        .iter()
        .flat_map(|a| step_matches(tree, Some(*a), comb, step))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Selector semantics by definition: each step is evaluated separately for
/// every node matched by the previous step and the results are united.
pub fn evaluate(selector: &Selector, tree: &TraceTree) -> Vec<NodeId> {
    let mut current = step_matches(tree, None, Combinator::Descendant, &selector.first);
    for (c, step) in &selector.rest {
        current = from_anchors(tree, &current, *c, step);
    }
    current
}

/// Statement and loop nodes whose header sits at `file:line`, by full scan.
pub fn occurrences(tree: &TraceTree, file: &str, line: u32) -> Vec<NodeId> {
    tree.nodes()
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::Stmt | NodeKind::Loop))
        .filter(|n| n.span.as_ref().is_some_and(|s| &*s.file == file && s.line == line))
        .map(|n| n.id)
        .collect()
}

/// Lines containing a match of `pattern`, scanning text with `str::find`
/// over every start position. Only literal patterns are supported.
pub fn grep_literal(lines: &[String], needle: &str) -> Vec<(usize, usize)> {
    lines
        .iter()
        .enumerate()
        .filter_map(|(i, l)| {
            (0..=l.len())
                .filter(|s| l.is_char_boundary(*s))
                .find(|s| l[*s..].starts_with(needle))
                .map(|s| (i, s))
        })
        .collect()
}

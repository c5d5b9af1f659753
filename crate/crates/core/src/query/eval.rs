use super::{Attr, Combinator, Filter, Literal, Selector, Step};
use crate::model::{NodeId, NodeKind, TraceNode, TraceTree};
use crate::store::TraceIndex;
use crate::tracer::ValueSnapshot;

/// Matches of `selector` in ascending id order. With an index, predicates on
/// `name`, `line` and `oid` seed the candidate lists instead of scanning.
///
/// `*` matches every node except the run root.
pub fn evaluate(selector: &Selector, tree: &TraceTree, index: Option<&TraceIndex>) -> Vec<NodeId> {
    let ctx = Ctx { tree, index };
    let mut current = ctx.first_step(&selector.first);
    for (combinator, step) in &selector.rest {
        if current.is_empty() {
            break;
        }
        current = ctx.step_from(&current, *combinator, step);
    }
    current
}

/// Whether `node` satisfies the attribute predicate `[attr=value]`.
pub fn matches_predicate(tree: &TraceTree, node: &TraceNode, attr: Attr, value: &Literal) -> bool {
    let text = |s: Option<&str>| matches!(value, Literal::Str(want) if s == Some(want.as_str()));
    let int = |i: Option<u64>| matches!(value, Literal::Int(want) if i.is_some_and(|i| i as i64 == *want));
    match attr {
        Attr::Name => text(node.name()),
        Attr::Var => text(node.var()),
        Attr::Func => text(tree.enclosing_call(node.id).and_then(TraceNode::name)),
        Attr::File => text(node.file()),
        Attr::Expr => text(node.expr()),
        Attr::Line => int(node.line().map(u64::from)),
        Attr::Idx => int(node.iter_index()),
        Attr::Oid => match value {
            Literal::Int(oid) => node.body.values().iter().any(|v| v.contains_oid(*oid as u64)),
            _ => false,
        },
        Attr::Value => node.value().is_some_and(|v| scalar_equals(v, value)),
    }
}

fn scalar_equals(v: &ValueSnapshot, lit: &Literal) -> bool {
    match (lit, v) {
        (Literal::Null, ValueSnapshot::None) => true,
        (Literal::Bool(b), ValueSnapshot::Bool { value }) => b == value,
        (Literal::Int(i), ValueSnapshot::Int { value }) => i == value,
        (Literal::Int(i), ValueSnapshot::Float { value }) => *i as f64 == *value,
        (Literal::Str(s), ValueSnapshot::Str { value }) => s.as_str() == &**value,
        _ => false,
    }
}

struct Ctx<'a> {
    tree: &'a TraceTree,
    index: Option<&'a TraceIndex>,
}

impl Ctx<'_> {
    fn kind_ok(&self, step: &Step, id: NodeId) -> bool {
        let kind = self.tree.get(id).kind;
        match step.kind {
            Some(k) => kind == k,
            None => kind != NodeKind::Run,
        }
    }

    /// Candidate ids for a step from the index, when one of its predicates
    /// ahead of any positional filter can be looked up.
    fn seed(&self, step: &Step) -> Option<Vec<NodeId>> {
        let index = self.index?;
        for filter in step.filters.iter().take_while(|f| !f.is_positional()) {
            let Filter::Attr { attr, value } = filter else { continue };
            match (attr, value) {
                (Attr::Name, Literal::Str(name)) => {
                    let calls = index.calls_named(name);
                    let evals = index.builtin_evals_named(name);
                    return Some(match step.kind {
                        Some(NodeKind::Call) => calls.to_vec(),
                        Some(NodeKind::Eval) => evals.to_vec(),
                        _ => merge(calls, evals),
                    });
                }
                (Attr::Line, Literal::Int(line)) => {
                    let line = u32::try_from(*line).ok()?;
                    return Some(index.nodes_on_line(line).to_vec());
                }
                (Attr::Oid, Literal::Int(oid)) => return Some(index.touching(*oid as u64).to_vec()),
                _ => {}
            }
        }
        None
    }

    fn first_step(&self, step: &Step) -> Vec<NodeId> {
        let base: Vec<NodeId> = match self.seed(step) {
            Some(seeded) => seeded.into_iter().filter(|id| self.kind_ok(step, *id)).collect(),
            None => self
                .tree
                .nodes()
                .iter()
                .filter(|n| match step.kind {
                    Some(k) => n.kind == k,
                    None => n.kind != NodeKind::Run,
                })
                .map(|n| n.id)
                .collect(),
        };
        self.apply_filters(base, step)
    }

    fn step_from(&self, anchors: &[NodeId], combinator: Combinator, step: &Step) -> Vec<NodeId> {
        if step.filters.iter().any(Filter::is_positional) {
            let mut out = Vec::new();
            let mut related = Vec::new();
            for &anchor in anchors {
                related.clear();
                self.related(anchor, combinator, &mut related);
                related.retain(|id| self.kind_ok(step, *id));
                out.extend(self.apply_filters(std::mem::take(&mut related), step));
            }
            out.sort_unstable();
            out.dedup();
            return out;
        }
        let base = match self.seed(step) {
            Some(seeded) => self.restrict(seeded, anchors, combinator),
            None => self.union_related(anchors, combinator),
        };
        let base = base.into_iter().filter(|id| self.kind_ok(step, *id)).collect();
        self.apply_filters(base, step)
    }

    fn apply_filters(&self, mut ids: Vec<NodeId>, step: &Step) -> Vec<NodeId> {
        for filter in &step.filters {
            match filter {
                Filter::Attr { attr, value } => {
                    ids.retain(|id| matches_predicate(self.tree, self.tree.get(*id), *attr, value));
                }
                Filter::Has { combinator, selector } => ids.retain(|id| self.has(*id, *combinator, selector)),
                Filter::First => ids.truncate(1),
                Filter::Last => {
                    if let Some(last) = ids.pop() {
                        ids = vec![last];
                    }
                }
                Filter::Nth(k) => {
                    ids = ids.get(k - 1).map(|id| vec![*id]).unwrap_or_default();
                }
            }
            if ids.is_empty() {
                break;
            }
        }
        ids
    }

    fn has(&self, anchor: NodeId, combinator: Combinator, selector: &Selector) -> bool {
        let mut current = self.step_from(&[anchor], combinator, &selector.first);
        for (c, step) in &selector.rest {
            if current.is_empty() {
                break;
            }
            current = self.step_from(&current, *c, step);
        }
        !current.is_empty()
    }

    /// Nodes related to one anchor, ascending.
    fn related(&self, anchor: NodeId, combinator: Combinator, out: &mut Vec<NodeId>) {
        match combinator {
            Combinator::Descendant => out.extend(self.tree.descendants(anchor).iter().map(|n| n.id)),
            Combinator::Child => out.extend_from_slice(&self.tree.get(anchor).children),
            Combinator::SameFrame => {
                let nodes = self.tree.descendants(anchor);
                let mut i = 0;
                while i < nodes.len() {
                    let node = &nodes[i];
                    out.push(node.id);
                    if node.kind == NodeKind::Call {
                        let end = node.subtree_end;
                        i += nodes[i..].partition_point(|n| n.id <= end);
                    } else {
                        i += 1;
                    }
                }
            }
        }
    }

    /// Union of the related sets of all anchors, ascending.
    fn union_related(&self, anchors: &[NodeId], combinator: Combinator) -> Vec<NodeId> {
        let mut out = Vec::new();
        match combinator {
            Combinator::Descendant => {
                let mut covered: Option<NodeId> = None;
                for &anchor in anchors {
                    if covered.is_some_and(|end| anchor <= end) {
                        continue;
                    }
                    self.related(anchor, combinator, &mut out);
                    covered = Some(self.tree.get(anchor).subtree_end);
                }
            }
            Combinator::Child | Combinator::SameFrame => {
                for &anchor in anchors {
                    self.related(anchor, combinator, &mut out);
                }
                out.sort_unstable();
                out.dedup();
            }
        }
        out
    }

    /// Keeps the seeded ids that relate to at least one anchor.
    fn restrict(&self, seeded: Vec<NodeId>, anchors: &[NodeId], combinator: Combinator) -> Vec<NodeId> {
        let is_anchor = |id: NodeId| anchors.binary_search(&id).is_ok();
        match combinator {
            Combinator::Descendant => {
                let mut ranges: Vec<(NodeId, NodeId)> = Vec::new();
                for &anchor in anchors {
                    let end = self.tree.get(anchor).subtree_end;
                    match ranges.last_mut() {
                        Some((_, last_end)) if anchor <= *last_end => *last_end = (*last_end).max(end),
                        _ => ranges.push((anchor, end)),
                    }
                }
                seeded
                    .into_iter()
                    .filter(|&id| {
                        let i = ranges.partition_point(|(start, _)| *start < id);
                        i > 0 && id <= ranges[i - 1].1
                    })
                    .collect()
            }
            Combinator::Child => seeded
                .into_iter()
                .filter(|&id| self.tree.get(id).parent.is_some_and(is_anchor))
                .collect(),
            Combinator::SameFrame => seeded
                .into_iter()
                .filter(|&id| {
                    for ancestor in self.tree.ancestors(id) {
                        if is_anchor(ancestor.id) {
                            return true;
                        }
                        if ancestor.kind == NodeKind::Call {
                            return false;
                        }
                    }
                    false
                })
                .collect(),
        }
    }
}

fn merge(a: &[NodeId], b: &[NodeId]) -> Vec<NodeId> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.sort_unstable();
    out
}

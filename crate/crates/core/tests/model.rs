use proptest::prelude::*;
use tracer_core::model::{build_tree, validate, NodeKind, TraceTree};
use tracer_core::tracer::{EventBody, EventKind, TraceEvent};
use tracer_testkit::{fixtures, gen};

fn call_named<'t>(tree: &'t TraceTree, name: &str) -> &'t tracer_core::model::TraceNode {
    tree.nodes().iter().find(|n| n.kind == NodeKind::Call && n.name() == Some(name)).unwrap()
}

#[test]
fn example_tree_shape() {
    let tree = fixtures::example().tree();
    assert_eq!(tree.root().kind, NodeKind::Run);
    let main = call_named(&tree, "main");
    let do_it = call_named(&tree, "do_it");
    let compute = call_named(&tree, "compute");
    assert!(tree.is_ancestor(main.id, do_it.id));
    assert_eq!(tree.enclosing_call(compute.id).unwrap().id, do_it.id);

    let sum = tree.nodes().iter().find(|n| n.name() == Some("sum")).unwrap();
    assert_eq!(tree.stack_at(sum.id).unwrap(), [main.id, do_it.id, compute.id]);
    assert!(tree.stack_at(tree.root().id).unwrap().is_empty());
    let stmt_in_main = tree.children(main.id).find(|n| n.kind == NodeKind::Stmt).unwrap();
    assert_eq!(tree.stack_at(stmt_in_main.id).unwrap(), [main.id]);
    assert!(tree.stack_at(1 << 50).is_err());
}

#[test]
fn malformed_streams() {
    let (events, _) = fixtures::example().events();
    let mut gap = events.clone();
    gap.remove(2);
    let err = build_tree(gap).unwrap_err();
    assert_eq!(err.seq, 3);

    let mut stray = events[..3].to_vec();
    stray.push(TraceEvent {
        seq: 3,
        span: events[2].span.clone(),
        body: EventBody::IterBegin { index: 1 },
    });
    assert_eq!(validate(&stray).iter().filter(|v| v.seq == 3).count(), 1);

    let mut after_end = events.clone();
    let last = after_end.last().unwrap().clone();
    after_end.push(TraceEvent { seq: last.seq + 1, ..last });
    assert!(build_tree(after_end).is_err());
}

fn check_tree(tree: &TraceTree) {
    let mut last = None;
    fn preorder(tree: &TraceTree, id: u64, out: &mut Vec<u64>) {
        out.push(id);
        for c in &tree.get(id).children {
            preorder(tree, *c, out);
        }
    }
    let mut order = Vec::new();
    preorder(tree, tree.root().id, &mut order);
    assert_eq!(order.len(), tree.len());
    for id in order {
        assert!(last < Some(id));
        last = Some(id);
        let n = tree.get(id);
        assert!(n.children.iter().all(|c| *c > id));
        if n.kind.is_leaf() {
            assert!(n.children.is_empty());
        }
        let iters: Vec<_> = tree.children(id).filter(|c| c.kind == NodeKind::Iter).collect();
        if n.kind != NodeKind::Loop {
            assert!(iters.is_empty());
        }
        for (k, it) in iters.iter().enumerate() {
            assert_eq!(it.iter_index(), Some(k as u64 + 1));
        }
        let brute: Vec<u64> = {
            let mut v: Vec<u64> = tree.ancestors(id).filter(|a| a.kind == NodeKind::Call).map(|a| a.id).collect();
            v.reverse();
            if n.kind == NodeKind::Call {
                v.push(id);
            }
            v
        };
        assert_eq!(tree.stack_at(id).unwrap(), brute);
    }
}

#[test]
fn fixture_trees_are_ordered() {
    for f in fixtures::all() {
        check_tree(&f.tree());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_trees_are_ordered(seed in any::<u64>()) {
        check_tree(&gen::program(seed).tree());
    }

    #[test]
    fn swapped_closers_are_caught(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let (mut events, _) = gen::program(seed).events();
        let closers: Vec<usize> = (0..events.len() - 1)
            .filter(|&i| {
                let a = events[i].kind();
                let b = events[i + 1].kind();
                let is_close = |k| matches!(k, EventKind::CallExit | EventKind::StmtEnd | EventKind::LoopExit | EventKind::IterEnd);
                is_close(a) && is_close(b) && a != b
            })
            .collect();
        prop_assume!(!closers.is_empty());
        let i = closers[pick.index(closers.len())];
        let (s0, s1) = (events[i].seq, events[i + 1].seq);
        events.swap(i, i + 1);
        events[i].seq = s0;
        events[i + 1].seq = s1;
        prop_assert!(!validate(&events).is_empty());
        prop_assert!(build_tree(events).is_err());
    }
}

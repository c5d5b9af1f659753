use proptest::prelude::*;
use tracer_core::model::{NodeId, NodeKind, TraceTree};
use tracer_core::render::{
    density, expression_values, render_tree, source_to_trace, to_text, trace_to_source, RenderedLine, ViewState,
};
use tracer_core::store::build_index;
use tracer_core::tracer::EventBody;
use tracer_testkit::{fixtures, gen, Fixture};

fn texts(lines: &[RenderedLine]) -> Vec<&str> {
    lines.iter().map(|l| l.text.as_str()).collect()
}

fn header_depth(lines: &[RenderedLine], id: NodeId) -> usize {
    lines.iter().find(|l| l.node_id == id).unwrap().depth
}

#[test]
fn one_line_main() {
    let tree = fixtures::minimal().tree();
    let lines = render_tree(&tree, &ViewState::default());
    assert_eq!(texts(&lines), ["main():", "│ return 0", "│ → 0"]);
}

#[test]
fn ascii_glyphs() {
    let tree = fixtures::example().tree();
    let mut view = ViewState {
        ascii: true,
        ..Default::default()
    };
    view.collapse_calls_named(&tree, "initialize");
    let text = to_text(&render_tree(&tree, &view));
    assert!(text.is_ascii());
    assert!(text.contains("| initialize() [...]"));
    assert!(text.contains("|   |   compute(things <- [2, 3, 5]):"));
    assert!(text.contains("|   |   |   sum(things <- [2, 3, 5]) -> 10"));
}

#[test]
fn hiding_subexpressions_keeps_inline_values() {
    let tree = fixtures::example().tree();
    let view = ViewState {
        show_subexpr: false,
        show_output: false,
        ..Default::default()
    };
    let lines = render_tree(&tree, &view);
    assert!(lines.iter().all(|l| !matches!(l.kind, NodeKind::Bind | NodeKind::Eval | NodeKind::Output)));
    assert!(texts(&lines).contains(&"│   │ result = compute(args → [2, 3, 5])"));
}

#[test]
fn loop_iterations_share_a_depth() {
    let tree = fixtures::while3().tree();
    let lines = render_tree(&tree, &ViewState::default());
    let body: Vec<&RenderedLine> = lines.iter().filter(|l| l.kind == NodeKind::Stmt && l.source_span.as_ref().unwrap().line == 5).collect();
    assert_eq!(body.len(), 3);
    assert!(body.iter().all(|l| l.depth == body[0].depth));
    let header = lines.iter().find(|l| l.kind == NodeKind::Loop).unwrap();
    assert_eq!(body[0].depth, header.depth + 1);
}

#[test]
fn recursion_steps_right() {
    let tree = fixtures::recursion().tree();
    let lines = render_tree(&tree, &ViewState::default());
    let depths: Vec<usize> = lines.iter().filter(|l| l.text.trim_start_matches(['│', ' ']).starts_with("f(n ←")).map(|l| l.depth).collect();
    assert_eq!(depths.len(), 3);
    assert_eq!(depths[1], depths[0] + 1);
    assert_eq!(depths[2], depths[1] + 1);
}

#[test]
fn source_lines_to_trace_lines() {
    let tree = fixtures::example().tree();
    let index = build_index(&tree);
    let view = ViewState::default();
    let lines = render_tree(&tree, &view);
    let hits = source_to_trace(&tree, &view, &index, &lines, "logic.py", 8);
    assert_eq!(hits.len(), 1);
    assert!(lines[hits[0]].text.ends_with("return sum(things → [2, 3, 5])"));
    assert!(source_to_trace(&tree, &view, &index, &lines, "logic.py", 6).is_empty());

    let tree = fixtures::loop5().tree();
    let index = build_index(&tree);
    let lines = render_tree(&tree, &view);
    let body = source_to_trace(&tree, &view, &index, &lines, "loop.py", fixtures::LOOP5_BODY_LINE);
    assert_eq!(body.len(), 5);
    let mut collapsed = ViewState::default();
    assert_eq!(collapsed.collapse_at(&tree, "loop.py", fixtures::LOOP5_HEADER_LINE), 1);
    let lines = render_tree(&tree, &collapsed);
    let body = source_to_trace(&tree, &collapsed, &index, &lines, "loop.py", fixtures::LOOP5_BODY_LINE);
    assert_eq!(body.len(), 1);
    assert!(lines[body[0]].text.ends_with("[…]"));

    let tree = fixtures::never_taken().tree();
    let index = build_index(&tree);
    let lines = render_tree(&tree, &view);
    assert!(source_to_trace(&tree, &view, &index, &lines, "branch.py", fixtures::NEVER_TAKEN_LINE).is_empty());
}

#[test]
fn statement_values_in_evaluation_order() {
    let tree = fixtures::example().tree();
    let stmt = |text: &str| {
        tree.nodes()
            .iter()
            .find(|n| n.header_text() == Some(text))
            .unwrap()
            .id
    };
    let shown = |id| -> Vec<(String, String)> {
        expression_values(&tree, id)
            .unwrap()
            .into_iter()
            .map(|(span, v)| (format!("{}:{}-{}", span.line, span.col, span.end_col), v.to_string()))
            .collect()
    };
    assert_eq!(
        shown(stmt("result = compute(args)")),
        [("4:22-26".to_string(), "[2, 3, 5]".to_string()), ("4:14-27".into(), "10".into())]
    );
    assert_eq!(
        shown(stmt("return sum(things)")),
        [("8:16-22".to_string(), "[2, 3, 5]".to_string()), ("8:12-23".into(), "10".into())]
    );
    let tree2 = fixtures::while_x().tree();
    let x1 = tree2.nodes().iter().find(|n| n.header_text() == Some("x = 1")).unwrap().id;
    assert!(expression_values(&tree2, x1).unwrap().is_empty());
    assert!(expression_values(&tree, 1 << 40).is_err());
}

/// Lines each node must own in `view`, by the layout rules.
fn check_bijection(tree: &TraceTree, view: &ViewState, lines: &[RenderedLine]) {
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(l.index, i);
        assert!(tree.node(l.node_id).is_some());
    }
    let has_line = |id: NodeId| lines.iter().any(|l| l.node_id == id);
    for n in tree.nodes() {
        if tree.ancestors(n.id).any(|a| view.collapsed.contains(&a.id)) {
            assert!(!has_line(n.id));
            continue;
        }
        let expected = match n.kind {
            NodeKind::Call | NodeKind::Loop | NodeKind::Ret | NodeKind::Error => true,
            NodeKind::Stmt => {
                let merged = tree.children(n.id).any(|c| c.kind == NodeKind::Call && c.span == n.span && has_line(c.id));
                if merged {
                    continue;
                }
                true
            }
            NodeKind::Bind => view.show_subexpr,
            NodeKind::Eval => view.show_subexpr && matches!(&n.body, EventBody::Eval { builtin: Some(_), .. }),
            NodeKind::Output => view.show_output,
            NodeKind::Run | NodeKind::Iter => false,
        };
        assert_eq!(has_line(n.id), expected, "{:?}", n.body);
    }
}

fn random_view(tree: &TraceTree, pick: u64) -> ViewState {
    let mut view = ViewState::default();
    let blocks: Vec<NodeId> = tree
        .nodes()
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::Call | NodeKind::Loop))
        .map(|n| n.id)
        .collect();
    for (i, id) in blocks.iter().enumerate() {
        if (pick >> (i % 64)) & 1 == 1 && i % 3 == 0 {
            view.collapsed.insert(*id);
        }
    }
    view.show_subexpr = pick % 5 != 0;
    view.show_output = pick % 7 != 0;
    view
}

fn all_trees() -> Vec<(Fixture, TraceTree)> {
    fixtures::all().into_iter().map(|f| {
        let t = f.tree();
        (f, t)
    }).collect()
}

#[test]
fn fixtures_obey_the_bijection() {
    for (_, tree) in all_trees() {
        for pick in [0, 1, u64::MAX, 0x5555, 35] {
            let view = random_view(&tree, pick);
            check_bijection(&tree, &view, &render_tree(&tree, &view));
        }
    }
}

#[test]
fn executed_lines_round_trip() {
    for (f, tree) in all_trees() {
        let index = build_index(&tree);
        let view = ViewState::default();
        let lines = render_tree(&tree, &view);
        for (file, line) in index.executed_lines() {
            let hits = source_to_trace(&tree, &view, &index, &lines, &file, line);
            assert!(!hits.is_empty(), "{} {file}:{line}", f.name);
            for t in hits {
                let span = trace_to_source(&lines, t).unwrap();
                assert_eq!((&*span.file, span.line), (&*file, line), "{}", f.name);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn collapsing_only_removes_descendants(seed in 0u64..10_000, pick in any::<prop::sample::Index>()) {
        let tree = gen::program(seed).tree();
        let blocks: Vec<NodeId> = tree.nodes().iter().filter(|n| matches!(n.kind, NodeKind::Call | NodeKind::Loop)).map(|n| n.id).collect();
        prop_assume!(!blocks.is_empty());
        let target = blocks[pick.index(blocks.len())];
        let open = render_tree(&tree, &ViewState::default());
        let mut view = ViewState::default();
        view.collapsed.insert(target);
        let closed = render_tree(&tree, &view);
        let kept: Vec<&RenderedLine> = open.iter().filter(|l| !tree.is_ancestor(target, l.node_id)).collect();
        prop_assert_eq!(kept.len(), closed.len());
        for (a, b) in kept.iter().zip(&closed) {
            prop_assert_eq!(a.node_id, b.node_id);
            if a.node_id == target {
                prop_assert!(b.text.ends_with(" […]"));
            } else {
                prop_assert_eq!(&a.text, &b.text);
            }
        }
    }

    #[test]
    fn generated_renderings_obey_the_laws(seed in 0u64..10_000, pick in any::<u64>()) {
        let tree = gen::program(seed).tree();
        let view = random_view(&tree, pick);
        let lines = render_tree(&tree, &view);
        check_bijection(&tree, &view, &lines);
        prop_assert_eq!(&lines, &render_tree(&tree, &view));
        for n in tree.nodes().iter().filter(|n| n.kind == NodeKind::Loop && !view.collapsed.contains(&n.id)) {
            if tree.ancestors(n.id).any(|a| view.collapsed.contains(&a.id)) {
                continue;
            }
            let mut depths = lines.iter().filter(|l| tree.parent(l.node_id).is_some_and(|p| p.kind == NodeKind::Iter && p.parent == Some(n.id))).map(|l| l.depth);
            if let Some(d) = depths.next() {
                prop_assert!(depths.all(|x| x == d));
                prop_assert_eq!(d, header_depth(&lines, n.id) + 1);
            }
        }
        let total: u64 = density(&tree, &lines, 16).iter().sum();
        prop_assert_eq!(total, lines.len() as u64);
    }
}

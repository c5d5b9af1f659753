use std::collections::HashMap;

use proptest::prelude::*;
use tracer_core::minilang::{link, parse};
use tracer_core::model::{build_tree, validate};
use tracer_core::store::write_events;
use tracer_core::tracer::{
    execute_to_vec, EventBody, EventKind, ExecutionLimits, ExitStatus, RunOutcome, TraceEvent, ValueSnapshot,
};
use tracer_testkit::count::count;
use tracer_testkit::{fixtures, gen, Fixture};

fn kinds(events: &[TraceEvent]) -> Vec<EventKind> {
    events.iter().map(TraceEvent::kind).collect()
}

fn list(oid: u64, items: &[i64]) -> ValueSnapshot {
    ValueSnapshot::List {
        oid,
        elems: items.iter().map(|i| ValueSnapshot::int(*i)).collect(),
    }
}

#[test]
fn compute_is_entered_once_with_the_file_data() {
    let (events, status) = fixtures::example().events();
    assert_eq!(status, ExitStatus::Completed);
    let enters: Vec<&TraceEvent> = events
        .iter()
        .filter(|e| matches!(&e.body, EventBody::CallEnter { name, .. } if &**name == "compute"))
        .collect();
    assert_eq!(enters.len(), 1);
    let EventBody::CallEnter { args, .. } = &enters[0].body else { unreachable!() };
    assert_eq!(args.len(), 1);
    assert_eq!(&*args[0].var, "things");
    assert_eq!(args[0].value, list(1, &[2, 3, 5]));
    assert!(events
        .iter()
        .any(|e| e.body == EventBody::Ret { value: ValueSnapshot::int(10) }));
}

#[test]
fn minimal_program_event_list() {
    let (events, status) = fixtures::minimal().events();
    assert_eq!(status, ExitStatus::Completed);
    use EventKind::*;
    assert_eq!(
        kinds(&events),
        [RunBegin, CallEnter, StmtBegin, StmtEnd, Ret, CallExit, RunEnd]
    );
}

#[test]
fn division_by_zero_truncates() {
    let (events, status) = fixtures::div_zero().events();
    let ExitStatus::Errored { message, span } = &status else { panic!("{status:?}") };
    assert_eq!(message, "division by zero");
    assert_eq!(span.line, 2);
    use EventKind::*;
    assert_eq!(kinds(&events), [RunBegin, CallEnter, StmtBegin, Error, RunEnd]);
    let tree = build_tree(events).unwrap();
    assert_eq!(tree.outcome(), RunOutcome::Errored);
    assert!(tree.nodes().iter().filter(|n| n.is_unclosed()).count() >= 2);
}

#[test]
fn deep_list_is_cut_at_the_depth_cap() {
    let src = "def main():\n    x = [[[[[[[[[[1]]]]]]]]]]\n    return len(x)\n";
    let program = link(vec![parse("deep.py", src).unwrap()], "main").unwrap();
    let limits = ExecutionLimits::default();
    let (events, _) = execute_to_vec(&program, &limits, &Default::default());
    let bound = events
        .iter()
        .find_map(|e| match &e.body {
            EventBody::Bind { value, .. } => Some(value.clone()),
            _ => None,
        })
        .unwrap();
    assert_eq!(bound.depth(), limits.max_snapshot_depth);
    let mut v = &bound;
    for _ in 0..limits.max_snapshot_depth {
        let ValueSnapshot::List { elems, .. } = v else { panic!("{v:?}") };
        v = &elems[0];
    }
    assert_eq!(*v, ValueSnapshot::Truncated);
}

#[test]
fn long_list_keeps_a_marker() {
    let src = "def main():\n    x = range(100)\n    return x\n";
    let program = link(vec![parse("long.py", src).unwrap()], "main").unwrap();
    let limits = ExecutionLimits::default();
    let (events, _) = execute_to_vec(&program, &limits, &Default::default());
    let Some(EventBody::Ret { value: ValueSnapshot::List { elems, .. } }) =
        events.iter().rev().map(|e| &e.body).find(|b| matches!(b, EventBody::Ret { .. }))
    else {
        panic!()
    };
    assert_eq!(elems.len(), limits.max_snapshot_elems);
    assert_eq!(elems.last(), Some(&ValueSnapshot::Truncated));
}

#[test]
fn budget_exhaustion_closes_the_stream() {
    let src = "def main():\n    i = 0\n    while True:\n        i = i + 1\n";
    let program = link(vec![parse("inf.py", src).unwrap()], "main").unwrap();
    let limits = ExecutionLimits {
        max_events: 500,
        ..Default::default()
    };
    let (events, status) = execute_to_vec(&program, &limits, &Default::default());
    assert_eq!(status, ExitStatus::BudgetExhausted);
    assert_eq!(events.len(), 500);
    assert!(validate(&events).is_empty());
    let tree = build_tree(events).unwrap();
    assert_eq!(tree.outcome(), RunOutcome::BudgetExhausted);
}

#[test]
fn runtime_errors_are_reported_not_raised() {
    for (src, message) in [
        ("def main():\n    return [1][3]\n", "list index out of range"),
        ("def main():\n    return nope\n", "name 'nope' is not defined"),
        ("def f(a):\n    return a\n\ndef main():\n    return f()\n", "f() takes 1 positional argument but 0 were given"),
        ("def main():\n    a, b = [1, 2, 3]\n", "too many values to unpack (expected 2)"),
        ("def main():\n    return read_from_file()\n", "read_from_file() has no data file configured"),
        ("def f(n):\n    return f(n + 1)\n\ndef main():\n    return f(0)\n", "maximum recursion depth exceeded"),
    ] {
        let program = link(vec![parse("e.py", src).unwrap()], "main").unwrap();
        let (events, status) = execute_to_vec(&program, &ExecutionLimits::default(), &Default::default());
        let ExitStatus::Errored { message: got, .. } = status else { panic!("{src}") };
        assert_eq!(got, message);
        assert!(validate(&events).is_empty());
        build_tree(events).unwrap();
    }
}

#[test]
fn output_is_interleaved_in_time() {
    let tree = fixtures::nested().tree();
    let out: Vec<_> = tree
        .nodes()
        .iter()
        .filter_map(|n| match &n.body {
            EventBody::Output { text } => Some(text.to_string()),
            _ => None,
        })
        .collect();
    assert_eq!(out, ["3 [[0, 1], [10, 11], [20, 21]]"]);
}

fn serialized(events: &[TraceEvent]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_events(events, &mut buf).unwrap();
    buf
}

fn check_completeness(fixture: &Fixture) {
    let program = fixture.program();
    let limits = ExecutionLimits::default();
    let (events, status) = execute_to_vec(&program, &limits, &fixture.env());
    let counts = count(&program, fixture.data.as_deref(), limits.max_call_depth);
    let n = |k: EventKind| events.iter().filter(|e| e.kind() == k).count() as u64;
    let ctx = format!("{}\n{:?}", fixture.files.iter().map(|(_, t)| t.as_str()).collect::<String>(), status);
    assert_eq!(n(EventKind::StmtBegin), counts.stmts, "{ctx}");
    assert_eq!(n(EventKind::LoopEnter), counts.loops, "{ctx}");
    assert_eq!(n(EventKind::IterBegin), counts.iterations, "{ctx}");
    assert_eq!(n(EventKind::CallEnter), counts.calls, "{ctx}");
    assert_eq!(n(EventKind::Output), counts.outputs, "{ctx}");
    assert_eq!(status == ExitStatus::Completed, counts.completed, "{ctx}");
}

#[test]
fn fixtures_execute_every_statement_the_counter_sees() {
    for f in fixtures::all() {
        check_completeness(&f);
    }
}

/// Every snapshot of one list shows the same elements, since lists are never
/// mutated in place.
fn check_identity(events: &[TraceEvent]) {
    fn walk(v: &ValueSnapshot, seen: &mut HashMap<u64, ValueSnapshot>) {
        match v {
            ValueSnapshot::List { oid, elems } => {
                if !elems.contains(&ValueSnapshot::Truncated) {
                    let prev = seen.entry(*oid).or_insert_with(|| v.clone());
                    assert_eq!(prev, v, "oid {oid} changed");
                }
                elems.iter().for_each(|e| walk(e, seen));
            }
            ValueSnapshot::Tuple { elems } => elems.iter().for_each(|e| walk(e, seen)),
            _ => {}
        }
    }
    let mut seen = HashMap::new();
    for e in events {
        for v in e.body.values() {
            walk(v, &mut seen);
        }
    }
}

#[test]
fn oids_are_stable_on_fixtures() {
    for f in fixtures::all() {
        check_identity(&f.events().0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn generated_programs_are_complete(seed in any::<u64>()) {
        check_completeness(&gen::program(seed));
    }

    #[test]
    fn generated_streams_are_well_nested_and_stable(seed in any::<u64>()) {
        let f = gen::program(seed);
        let (events, status) = f.events();
        prop_assert!(validate(&events).is_empty());
        if status == ExitStatus::Completed {
            prop_assert!(build_tree(events.clone()).unwrap().nodes().iter().all(|n| !n.is_unclosed()));
        }
        check_identity(&events);
        let (again, _) = f.events();
        prop_assert_eq!(serialized(&events), serialized(&again));
    }

    #[test]
    fn any_prefix_plus_error_is_a_valid_trace(seed in any::<u64>(), cut in any::<prop::sample::Index>()) {
        let (events, _) = gen::program(seed).events();
        let k = 1 + cut.index(events.len() - 2);
        let mut prefix: Vec<TraceEvent> = events[..k].to_vec();
        let span = events[1..].iter().find_map(|e| e.span.clone()).unwrap();
        prefix.push(TraceEvent { seq: k as u64, span: Some(span), body: EventBody::Error { message: "cut".into() } });
        prefix.push(TraceEvent { seq: k as u64 + 1, span: None, body: EventBody::RunEnd { outcome: RunOutcome::Errored } });
        prop_assert!(validate(&prefix).is_empty());
        prop_assert!(build_tree(prefix).is_ok());
    }
}

use std::io::Cursor;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracer_core::model::build_tree;
use tracer_core::store::{build_index, load, read_all, stats, write_events, JsonlSink, StoreError, TRACE_EXTENSION};
use tracer_core::tracer::{execute, EventKind, ExecutionLimits};
use tracer_testkit::{fixtures, gen, naive};

fn to_bytes(events: &[tracer_core::tracer::TraceEvent]) -> Vec<u8> {
    let mut buf = Vec::new();
    let n = write_events(events, &mut buf).unwrap();
    assert_eq!(n as usize, buf.len());
    buf
}

#[test]
fn example_stream_round_trips() {
    let (events, _) = fixtures::example().events();
    let bytes = to_bytes(&events);
    assert_eq!(bytes.iter().filter(|b| **b == b'\n').count(), events.len());
    let back = read_all(Cursor::new(&bytes)).unwrap();
    assert_eq!(back, events);
    assert_eq!(to_bytes(&back), bytes);
}

#[test]
fn wire_format_of_a_builtin_eval() {
    let (events, _) = fixtures::example().events();
    let bytes = String::from_utf8(to_bytes(&events)).unwrap();
    let line = bytes.lines().find(|l| l.contains(r#""expr":"sum(things)""#)).unwrap();
    assert!(line.ends_with(
        r#""ev":"eval","span":{"f":"logic.py","l":8,"c":12,"el":8,"ec":23},"p":{"name":"sum","expr":"sum(things)","val":{"k":"int","v":10}}}"#
    ), "{line}");
    let first = bytes.lines().next().unwrap();
    assert!(first.starts_with(r#"{"seq":0,"ev":"run_begin""#), "{first}");
}

#[test]
fn corrupted_line_is_reported_by_number() {
    let (events, _) = fixtures::example().events();
    let text = String::from_utf8(to_bytes(&events)).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[5] = "{\"seq\":5,\"ev\":\"bogus\"}";
    let broken = lines.join("\n");
    match read_all(Cursor::new(broken.as_bytes())) {
        Err(StoreError::MalformedRecord { line, .. }) => assert_eq!(line, 6),
        other => panic!("{other:?}"),
    }
    lines[5] = "not json";
    let broken = lines.join("\n");
    assert!(matches!(read_all(Cursor::new(broken.as_bytes())), Err(StoreError::MalformedRecord { line: 6, .. })));
}

#[test]
fn sink_writes_a_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(format!("example{TRACE_EXTENSION}"));
    let f = fixtures::example();
    let mut sink = JsonlSink::new(std::io::BufWriter::new(std::fs::File::create(&path).unwrap()));
    execute(&f.program(), &ExecutionLimits::default(), &f.env(), &mut sink).unwrap();
    let written = sink.bytes_written();
    let count = sink.events_written();
    sink.finish().unwrap();
    let loaded = load(&path).unwrap();
    assert_eq!(loaded.stats.byte_size, Some(written));
    assert_eq!(loaded.stats.event_count, count);
    assert_eq!(loaded.tree.nodes(), f.tree().nodes());
}

#[test]
fn example_index_and_stats() {
    let tree = fixtures::example().tree();
    let index = build_index(&tree);
    let ret = index.occurrences("logic.py", 8);
    assert_eq!(ret.len(), 1);
    assert_eq!(tree.get(ret[0]).header_text(), Some("return sum(things)"));
    assert_eq!(index.calls_named("compute").len(), 1);
    let s = stats(&tree);
    assert_eq!(s.event_count, tree.event_count());
    assert_eq!(s.outcome, "completed");
    // Tally of the example run: main, initialize, do_it, compute, process.
    assert_eq!(s.kind_counts["call_enter"], 5);
    assert_eq!(s.kind_counts["output"], 2);
    assert_eq!(s.kind_counts["ret"], 2);
    assert_eq!(s.kind_counts["bind"], 3);
    assert_eq!(s.kind_counts.values().sum::<u64>(), s.event_count);
    assert_eq!(s.kind_counts["stmt_begin"], tree.event_kind_count(EventKind::StmtBegin));

    let tree = fixtures::never_taken().tree();
    assert!(build_index(&tree).occurrences("branch.py", fixtures::NEVER_TAKEN_LINE).is_empty());
    let tree = fixtures::loop5().tree();
    assert_eq!(build_index(&tree).occurrences("loop.py", fixtures::LOOP5_BODY_LINE).len(), 5);
}

#[test]
fn occurrence_probes_match_a_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..50 {
        let tree = gen::program(seed).tree();
        let index = build_index(&tree);
        for _ in 0..20 {
            let file = [gen::HELPERS_FILE, gen::MAIN_FILE][rng.gen_range(0..2)];
            let line = rng.gen_range(1..45);
            assert_eq!(index.occurrences(file, line), naive::occurrences(&tree, file, line));
        }
    }
}

#[test]
fn index_build_scales_linearly() {
    let src = |n: u32| format!("def main():\n    t = 0\n    for i in range({n}):\n        t = t + i\n    return t\n");
    let tree_of = |n| {
        let text = src(n);
        let f = tracer_testkit::Fixture::new("lin", &[("lin.py", text.as_str())], "main");
        f.tree()
    };
    let time = |tree: &tracer_core::model::TraceTree| {
        let start = std::time::Instant::now();
        for _ in 0..3 {
            std::hint::black_box(build_index(tree));
        }
        start.elapsed().as_secs_f64()
    };
    let (small, big) = (tree_of(20_000), tree_of(40_000));
    time(&small);
    let ratio = time(&big) / time(&small);
    assert!(ratio <= 3.0, "ratio {ratio}");
}

#[test]
fn empty_run() {
    let tree = build_tree(read_all(Cursor::new(
        "{\"seq\":0,\"ev\":\"run_begin\",\"p\":{\"name\":\"main\"}}\n{\"seq\":1,\"ev\":\"run_end\",\"p\":{\"txt\":\"completed\"}}\n",
    )).unwrap());
    let tree = tree.unwrap();
    assert_eq!(tree.len(), 1);
    assert_eq!(stats(&tree).event_count, 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn read_write_identity(seed in any::<u64>()) {
        let (events, _) = gen::program(seed).events();
        let bytes = to_bytes(&events);
        let back = read_all(Cursor::new(&bytes)).unwrap();
        prop_assert_eq!(&back, &events);
        prop_assert_eq!(to_bytes(&back), bytes);
        let (a, b) = (build_tree(back).unwrap(), build_tree(events).unwrap());
        prop_assert_eq!(a.nodes(), b.nodes());
    }
}

//! Example-level tests for the front end, the static analysis, the
//! transformation, and the interpreter, each exercising one documented
//! behavior on a small hand-written or generated program.

use pgas_ie::analysis::{
    analyze_subscript, build_call_graph, decide, find_candidates, find_modification_sites,
    CheckId, Decision,
};
use pgas_ie::apps::programs::{gen_pagerank_program, gen_spmv_program};
use pgas_ie::apps::synth::banded;
use pgas_ie::apps::graph::{Graph, PrConfig};
use pgas_ie::ast::{BinOp, Expr};
use pgas_ie::driver::{diff_run, optimize};
use pgas_ie::gen::{gen_program, gen_scenario, Scenario};
use pgas_ie::interp::{run, ExecConfig, OutValue};
use pgas_ie::parser::parse_program;
use pgas_ie::printer::pretty_print;
use pgas_ie::validate::validate;

fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("cannot read {path}: {e}"))
}

fn parse_fixture(name: &str) -> pgas_ie::ast::Program {
    parse_program(&fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn cfg(locales: usize) -> ExecConfig {
    ExecConfig {
        num_locales: locales,
        ..ExecConfig::default()
    }
}

// ---------------------------------------------------------------- parser

#[test]
fn empty_main_parses() {
    let p = parse_program("proc main() { }").unwrap();
    assert_eq!(p.functions.len(), 1);
    assert_eq!(p.entry, "main");
    assert!(p.functions[0].body.is_empty());
}

#[test]
fn indexed_by_indexed_expression_is_recognized() {
    let p = parse_fixture("basic_irregular.pg");
    let cands = find_candidates(&p);
    assert_eq!(cands.len(), 1);
    assert_eq!(cands[0].array_a, "A");
    assert_eq!(cands[0].array_b, "B");
}

#[test]
fn undeclared_array_is_a_parse_error() {
    let err = parse_program("proc main() { var x : int = Q[3]; }").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains('Q'), "error should name the identifier: {msg}");
}

#[test]
fn alias_resolution_follows_chains() {
    let src = "\
domain D = block 0..7
array arr over D : int
ref a1 = arr
ref a2 = a1
proc main() { }
";
    let p = parse_program(src).unwrap();
    assert_eq!(p.resolve_alias("a2"), "arr");
    assert_eq!(p.resolve_alias("a1"), "arr");
    // non-alias names resolve to themselves
    assert_eq!(p.resolve_alias("arr"), "arr");
    // idempotence
    assert_eq!(p.resolve_alias(&p.resolve_alias("a2")), "arr");
}

#[test]
fn five_link_alias_chain_resolves_to_root() {
    let mut src = String::from("domain D = block 0..7\narray arr over D : int\n");
    let mut prev = "arr".to_string();
    for l in 1..=5 {
        src.push_str(&format!("ref a{l} = {prev}\n"));
        prev = format!("a{l}");
    }
    src.push_str("proc main() { }\n");
    let p = parse_program(&src).unwrap();
    // transitive-closure oracle: fold the chain by hand
    let mut oracle = "a5".to_string();
    let links = [("a5", "a4"), ("a4", "a3"), ("a3", "a2"), ("a2", "a1"), ("a1", "arr")];
    loop {
        match links.iter().find(|(from, _)| *from == oracle) {
            Some((_, to)) => oracle = to.to_string(),
            None => break,
        }
    }
    assert_eq!(p.resolve_alias("a5"), oracle);
    assert_eq!(oracle, "arr");
}

#[test]
fn pretty_print_round_trips_originals_and_transforms() {
    let p = parse_fixture("basic_irregular.pg");
    validate(&p).expect("original round-trips");
    let (opt, _) = optimize(&p);
    validate(&opt).expect("transformed round-trips");
}

#[test]
fn pretty_print_round_trips_generator_corpus() {
    for seed in 0..100u64 {
        let (p, scenario) = gen_program(seed);
        validate(&p).unwrap_or_else(|e| panic!("{scenario:?} seed {seed}: {e}"));
    }
}

// ---------------------------------------------------------------- analysis

#[test]
fn spmv_kernel_candidate_is_x_indexed_by_col_idx() {
    let p = gen_spmv_program(&banded(16, 1), 3);
    let cands = find_candidates(&p);
    assert_eq!(cands.len(), 1);
    assert_eq!(cands[0].array_a, "x");
    assert_eq!(cands[0].array_b, "col_idx");
}

#[test]
fn forall_without_indexed_by_indexed_has_no_candidates() {
    let src = "\
domain D = block 0..7
array A over D : int = [1, 2, 3, 4, 5, 6, 7, 8]
array C over D : int
proc main() {
  forall i in D {
    C[i] = A[i] + 1;
  }
}
";
    let p = parse_program(src).unwrap();
    assert!(find_candidates(&p).is_empty());
}

#[test]
fn single_violation_fixtures_flip_exactly_one_check() {
    let expectations = [
        ("v1_local_iterand.pg", CheckId::V1),
        ("v2_nested_forall.pg", CheckId::V2),
        ("v3_outer_index.pg", CheckId::V3),
        ("v4_write_b_in_forall.pg", CheckId::V4),
        ("pa_no_outer_loop.pg", CheckId::Pa),
        ("pb_write_b_outer.pg", CheckId::Pb),
        ("pc_domain_mod_outer.pg", CheckId::Pc),
    ];
    for (file, expected) in expectations {
        let p = parse_fixture(file);
        let report = decide(&p);
        assert_eq!(report.candidates.len(), 1, "{file}");
        let cd = &report.candidates[0];
        assert_eq!(cd.decision, Decision::Revert, "{file}");
        let failed: Vec<CheckId> = cd
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.id)
            .collect();
        assert_eq!(failed, vec![expected], "{file}");
    }
}

#[test]
fn nonaffine_subscript_with_loop_yielded_leaves_passes() {
    // A[B[i*j] % k + 1] where i, j, k are all indices of loops over
    // domains/arrays is analyzable.
    let src = "\
domain D = block 0..7
array B over D : int = [0, 1, 2, 3, 4, 5, 6, 7]
array A over D : int = [0, 0, 0, 0, 0, 0, 0, 0]
array C over D : int
proc main() {
  forall i in D {
    for j in D {
      for k in D {
        C[i] = A[B[i * j] % k + 1];
      }
    }
  }
}
";
    let p = parse_program(src).unwrap();
    let cands = find_candidates(&p);
    assert_eq!(cands.len(), 1);
    let occ = &cands[0].occurrences[0];
    assert!(analyze_subscript(&p, &cands[0].subscript, &occ.chain).is_ok());
}

#[test]
fn nonaffine_subscript_with_call_leaf_fails() {
    let src = "\
domain D = block 0..7
array B over D : int = [0, 1, 2, 3, 4, 5, 6, 7]
array A over D : int = [0, 0, 0, 0, 0, 0, 0, 0]
array C over D : int
proc f(i) {
  return i;
}
proc main() {
  for t in 1..2 {
    forall i in D {
      C[i] = A[B[f(i)]];
    }
  }
}
";
    let p = parse_program(src).unwrap();
    let report = decide(&p);
    // Either the candidate is rejected outright or the NA check fails;
    // in both cases nothing may be optimized.
    assert!(report.all_reverted());
}

#[test]
fn nonaffine_subscript_with_mutable_global_fails() {
    let src = "\
domain D = block 0..7
array B over D : int = [0, 1, 2, 3, 4, 5, 6, 7]
array A over D : int = [0, 0, 0, 0, 0, 0, 0, 0]
array C over D : int
var g : int = 0
proc main() {
  for t in 1..2 {
    forall i in D {
      C[i] = A[(B[i] + g) % 8];
    }
    g = g + 1;
  }
}
";
    let p = parse_program(src).unwrap();
    let report = decide(&p);
    assert_eq!(report.candidates.len(), 1);
    let cd = &report.candidates[0];
    assert_eq!(cd.decision, Decision::Revert);
    assert!(!cd.check(CheckId::Na).unwrap().passed);
    // Oracle for why this must be rejected: mutating g between outer
    // iterations changes the access pattern while no tracked object
    // (B, B.dom, A.dom) was written, so no staleness flag would fire.
    let cfg4 = cfg(4);
    let trace_cfg = ExecConfig { trace: true, ..cfg4 };
    let r = run(&p, &trace_cfg).unwrap();
    assert!(r.aggregate.remote_reads > 0);
    let d = diff_run(&p, &cfg(4)).unwrap();
    assert!(d.equivalent, "reverted program still runs equivalently");
}

#[test]
fn call_graph_contexts() {
    let src = "\
domain D = block 0..7
array A over D : int = [0, 0, 0, 0, 0, 0, 0, 0]
proc f() { }
proc h() { }
proc main() {
  for t in 1..3 {
    f();
  }
  f();
  forall i in D {
    h();
  }
}
";
    let p = parse_program(src).unwrap();
    let cg = build_call_graph(&p);
    let f_edges: Vec<_> = cg.edges.iter().filter(|e| e.callee == "f").collect();
    assert_eq!(f_edges.len(), 2);
    assert!(f_edges.iter().any(|e| e.serial_loop) && f_edges.iter().any(|e| !e.serial_loop));
    let h_edge = cg.edges.iter().find(|e| e.callee == "h").unwrap();
    assert!(h_edge.parallel, "call from a forall body is parallel-context");
    assert!(f_edges.iter().all(|e| !e.parallel));
}

#[test]
fn invalid_path_fixture_toggles_one_path() {
    let p = parse_fixture("invalid_path.pg");
    let report = decide(&p);
    assert_eq!(report.optimized().count(), 1);
    assert_eq!(report.invalid_paths.len(), 1);
}

#[test]
fn single_valid_path_has_no_invalid_paths() {
    let p = parse_fixture("basic_irregular.pg");
    let report = decide(&p);
    assert_eq!(report.optimized().count(), 1);
    assert!(report.invalid_paths.is_empty());
}

#[test]
fn modification_sites_found_through_aliases() {
    let src = "\
domain D = block 0..7
array B over D : int = [0, 1, 2, 3, 4, 5, 6, 7]
array A over D : int = [9, 9, 9, 9, 9, 9, 9, 9]
array C over D : int
ref bb = B
proc main() {
  for t in 1..3 {
    forall i in D {
      C[i] = A[B[i]];
    }
    bb[0] = 1;
  }
}
";
    let p = parse_program(src).unwrap();
    let report = decide(&p);
    // The alias write is inside the innermost enclosing serial loop, so
    // profitability rejects it there; move it out to see the site.
    assert!(!report.candidates[0].check(CheckId::Pb).unwrap().passed);

    let src2 = src.replace("    bb[0] = 1;\n  }\n}", "  }\n  bb[0] = 1;\n}");
    let p2 = parse_program(&src2).unwrap();
    let report2 = decide(&p2);
    assert_eq!(report2.optimized().count(), 1);
    let sites = &report2.modification_sites;
    assert!(
        sites.iter().any(|s| s.object == "B"),
        "write through alias bb must be attributed to B: {sites:?}"
    );
}

#[test]
fn writes_to_a_values_are_not_modification_sites() {
    let src = "\
domain D = block 0..7
array B over D : int = [0, 1, 2, 3, 4, 5, 6, 7]
array A over D : int = [9, 9, 9, 9, 9, 9, 9, 9]
array C over D : int
proc main() {
  for t in 1..3 {
    forall i in D {
      C[i] = A[B[i]];
    }
    A[0] = A[0] + 1;
  }
}
";
    let p = parse_program(src).unwrap();
    let report = decide(&p);
    assert_eq!(report.optimized().count(), 1, "A value writes are allowed");
    let c = &report.candidates[0].candidate;
    let sites = find_modification_sites(&p, c);
    assert!(sites.is_empty(), "value writes to A are handled by the preamble: {sites:?}");
    // and the executor preamble keeps the replicas fresh
    let d = diff_run(&p, &cfg(4)).unwrap();
    assert!(d.equivalent);
}

#[test]
fn decide_cg_optimizes_single_candidate() {
    let p = gen_spmv_program(&banded(16, 1), 3);
    let report = decide(&p);
    assert_eq!(report.optimized().count(), 1);
    assert_eq!(report.modification_sites.len(), 1, "col_idx build loop");
}

#[test]
fn decide_pagerank_optimizes_with_field_set() {
    let g = Graph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 0), (0, 3)]);
    let p = gen_pagerank_program(&g, &PrConfig::default());
    let report = decide(&p);
    let opts: Vec<_> = report.optimized().collect();
    assert_eq!(opts.len(), 1);
    let fields: Vec<&str> = opts[0]
        .candidate
        .accessed_fields
        .iter()
        .map(|s| s.as_str())
        .collect();
    assert_eq!(fields, ["out_degree", "pr_read"]);
}

#[test]
fn decide_multi_reverts_both_candidates() {
    let p = parse_fixture("multi_two_candidates.pg");
    let report = decide(&p);
    assert_eq!(report.candidates.len(), 2);
    for cd in &report.candidates {
        assert_eq!(cd.decision, Decision::Revert);
        assert!(!cd.check(CheckId::Multi).unwrap().passed);
    }
}

// ---------------------------------------------------------------- transform

#[test]
fn reverted_program_transforms_to_identity() {
    for file in [
        "v1_local_iterand.pg",
        "v4_write_b_in_forall.pg",
        "multi_two_candidates.pg",
    ] {
        let p = parse_fixture(file);
        let (out, report) = optimize(&p);
        assert!(report.all_reverted(), "{file}");
        assert_eq!(pretty_print(&out), pretty_print(&p), "{file}");
    }
}

#[test]
fn inspector_strip_keeps_subscript_loop_only() {
    // SpMV body: the inner `for k` loop feeds the subscript and stays; the
    // accumulation and the result write are dropped from the inspector.
    let p = gen_spmv_program(&banded(16, 1), 3);
    let (opt, _) = optimize(&p);
    let text = pretty_print(&opt);
    let inspector_start = text.find("inspectorIterator").expect("inspector emitted");
    let inspector_end = text.find("inspectorOff").unwrap();
    let inspector = &text[inspector_start..inspector_end];
    assert!(inspector.contains("for k in row.start..row.end"));
    assert!(inspector.contains("inspectAccess(x, col_idx[k]"));
    assert!(!inspector.contains("accum"));
    assert!(!inspector.contains("b["));
    assert!(!inspector.contains("values["));
}

#[test]
fn inspector_strip_of_subscript_only_body() {
    let p = parse_fixture("basic_irregular.pg");
    let (opt, _) = optimize(&p);
    let text = pretty_print(&opt);
    let inspector_start = text.find("inspectorIterator").unwrap();
    let inspector_end = text.find("inspectorOff").unwrap();
    let inspector = &text[inspector_start..inspector_end];
    assert!(inspector.contains("inspectAccess(A, B[i]"));
    assert!(!inspector.contains("C["), "result write removed from inspector");
}

#[test]
fn transform_inserts_set_stale_after_modification_site() {
    let p = gen_spmv_program(&banded(16, 1), 3);
    let (opt, _) = optimize(&p);
    let text = pretty_print(&opt);
    assert_eq!(text.matches("setStale(").count(), 1);
}

#[test]
fn transform_wraps_invalid_path_calls_with_off_switch() {
    let p = parse_fixture("invalid_path.pg");
    let (opt, _) = optimize(&p);
    let text = pretty_print(&opt);
    assert_eq!(text.matches("offSwitchOn(").count(), 1);
    assert_eq!(text.matches("offSwitchOff(").count(), 1);
}

// ---------------------------------------------------------------- interpreter

#[test]
fn serial_loop_on_locale_zero_writes_remotely() {
    // A serial loop runs every iteration on locale 0, so writes to the
    // three remote blocks of a 16-element array on 4 locales go remote.
    let src = "\
domain D = block 0..15
array arr over D : int
proc main() {
  for i in 0..15 {
    arr[i] = here;
  }
}
";
    let p = parse_program(src).unwrap();
    let r = run(&p, &cfg(4)).unwrap();
    assert_eq!(r.aggregate.remote_writes, 12);
    assert_eq!(r.aggregate.local_writes, 4);
    let arr = &r.array_outputs["arr"];
    assert!(arr.iter().all(|v| v[0] == OutValue::Int(0)), "here is 0 throughout");
}

#[test]
fn forall_follows_locale_affinity() {
    let src = "\
domain D = block 0..15
array arr over D : int
proc main() {
  forall i in arr.domain {
    arr[i] = here;
  }
}
";
    let p = parse_program(src).unwrap();
    let r = run(&p, &cfg(4)).unwrap();
    assert_eq!(r.aggregate.remote_writes, 0);
    let arr = &r.array_outputs["arr"];
    for (i, v) in arr.iter().enumerate() {
        assert_eq!(v[0], OutValue::Int((i / 4) as i64), "owner of {i}");
    }
}

#[test]
fn worked_example_schedule_two_locales() {
    // A over {0..7} block on 2 locales, B = [1,6,6,2,5,0,3,7]: locale 0
    // remotely needs {6}, locale 1 remotely needs {0,3}; 3 replica
    // fetches; int64 elements give 24 replica bytes over a 64-byte array.
    let src = "\
domain D = block 0..7
array B over D : int = [1, 6, 6, 2, 5, 0, 3, 7]
array A over D : int = [10, 11, 12, 13, 14, 15, 16, 17]
array C over D : int
var total : int = 0
proc main() {
  for t in 1..2 {
    forall i in B.domain {
      C[i] = A[B[i]];
    }
  }
  for i in 0..7 {
    total += C[i];
  }
}
";
    let p = parse_program(src).unwrap();
    let (opt, report) = optimize(&p);
    assert_eq!(report.optimized().count(), 1);
    let r = run(&opt, &cfg(2)).unwrap();
    let site = &r.sites[&0];
    assert_eq!(site.inspector_runs, 1);
    assert_eq!(site.inspections[0], vec![vec![6], vec![0, 3]]);
    assert_eq!(site.replica_bytes, 24);
    assert_eq!(site.array_bytes, 64);
    assert!((site.replica_ratio - 0.375).abs() < 1e-12);
    // executor reads of A are all served locally through the replicas
    assert_eq!(r.per_array["A"].remote_reads, 0);
    assert_eq!(r.per_array["A"].preamble_remote_reads, 6, "3 per preamble, 2 runs");
    // and the results match the unoptimized run
    let d = diff_run(&p, &cfg(2)).unwrap();
    assert!(d.equivalent);
}

#[test]
fn inspector_iterator_partitions_like_the_executor() {
    // 16 iterations over a block domain on 4 locales: the inspector visits
    // indices in 4 contiguous segments of 4 and its schedule equals the
    // executor's observed remote-read trace.
    let p = parse_fixture("basic_irregular.pg");
    let trace_cfg = ExecConfig { trace: true, ..cfg(4) };
    let unopt = run(&p, &trace_cfg).unwrap();
    let report = decide(&p);
    let c = &report.candidates[0].candidate;
    let key = format!(
        "{}:{}",
        c.loop_path.function,
        c.loop_path.indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
    );
    let trace = &unopt.traces[&key]["A"];
    let (opt, _) = optimize(&p);
    let ran = run(&opt, &cfg(4)).unwrap();
    let schedule = &ran.sites[&0].inspections[0];
    assert_eq!(schedule.len(), 4, "one serial segment per locale");
    let mut oracle: Vec<Vec<i64>> = vec![Vec::new(); 4];
    for &(loc, idx) in trace {
        oracle[loc].push(idx);
    }
    for seg in &mut oracle {
        seg.sort_unstable();
        seg.dedup();
    }
    assert_eq!(schedule, &oracle);
}

#[test]
fn single_locale_runs_have_empty_schedules_and_no_remote_traffic() {
    let p = parse_fixture("basic_irregular.pg");
    let d = diff_run(&p, &cfg(1)).unwrap();
    assert!(d.equivalent);
    assert_eq!(d.unopt.aggregate.total_remote_reads(), 0);
    assert_eq!(d.opt.aggregate.total_remote_reads(), 0);
    assert!(d.opt.sites[&0].inspections[0].iter().all(|seg| seg.is_empty()));
}

#[test]
fn determinism_bytes_and_counters() {
    let p = gen_spmv_program(&banded(24, 2), 4);
    let a = run(&p, &cfg(4)).unwrap();
    let b = run(&p, &cfg(4)).unwrap();
    assert_eq!(a.outputs, b.outputs);
    assert_eq!(a.array_outputs, b.array_outputs);
    assert_eq!(
        serde_json::to_string(&a.to_json()).unwrap(),
        serde_json::to_string(&b.to_json()).unwrap()
    );
}

#[test]
fn write_race_in_forall_is_detected() {
    let src = "\
domain D = block 0..7
array C over D : int
proc main() {
  forall i in D {
    C[0] = i;
  }
}
";
    let p = parse_program(src).unwrap();
    let err = run(&p, &cfg(4)).unwrap_err();
    assert!(err.to_string().contains("conflicting writes"), "{err}");
}

#[test]
fn pagerank_inspector_reads_no_data_fields() {
    // The stripped PageRank inspector enumerates neighbor indices but does
    // not touch Graph's element data: all remote reads of Graph attributed
    // to the optimized run are preamble fetches or shared serial-loop reads
    // also present in the unoptimized run.
    let g = Graph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3), (2, 5)]);
    let p = gen_pagerank_program(&g, &PrConfig { max_iterations: 5, ..PrConfig::default() });
    let d = diff_run(&p, &cfg(4)).unwrap();
    assert!(d.equivalent);
    let u = &d.unopt.per_array["Graph"];
    let o = &d.opt.per_array["Graph"];
    assert!(
        o.remote_reads + o.preamble_remote_reads <= u.remote_reads,
        "opt {} + {} vs unopt {}",
        o.remote_reads,
        o.preamble_remote_reads,
        u.remote_reads
    );
}

#[test]
fn scenario_subscripts_build_expected_shapes() {
    // sanity-check the generator: a modular-arithmetic scenario has a
    // candidate whose subscript is a Binop over the B index.
    let p = gen_scenario(Scenario::ModArith, 2);
    let cands = find_candidates(&p);
    assert_eq!(cands.len(), 1);
    match &cands[0].subscript {
        Expr::Binop { op, .. } => assert_eq!(*op, BinOp::Mod),
        other => panic!("expected modular subscript, got {other:?}"),
    }
}

//! Seeded random program generator for the differential-test corpus.
//!
//! Every generated program is closed (all inputs are literal initializers),
//! race-free, and keeps subscripts in bounds, so it can be executed in both
//! the original and the transformed form and the results compared
//! bit-for-bit. Scenarios cover the optimizable shapes (plain candidate,
//! alias chains, modular-arithmetic subscripts, CSR-style record loops,
//! staleness across outer phases) as well as one program per static check
//! that must cause a revert.

use crate::ast::Program;
use crate::parser::parse_program;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// The shape a generated program exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Plain `A[B[i]]` candidate under a serial outer loop; optimized.
    Valid,
    /// Candidate reached through a chain of `ref` aliases; optimized.
    Alias,
    /// Subscript with modular arithmetic, e.g. `A[(B[i] + c) % n]`; optimized.
    ModArith,
    /// Record rows with start/end ranges, CSR-style inner loop; optimized.
    CsrStyle,
    /// `B` is permuted between outer phases: optimized with one re-inspection.
    Staleness,
    /// Candidate forall is nested inside another forall: reverted.
    NestedForall,
    /// Candidate forall iterates a non-distributed (local) domain: reverted.
    LocalIterand,
    /// `B` is written inside the candidate forall: reverted.
    WriteBInForall,
    /// Candidate forall has no enclosing serial loop: reverted.
    NoOuterLoop,
    /// `B` is written inside the innermost enclosing serial loop: reverted.
    WriteBInOuterLoop,
    /// Subscript contains a free scalar variable: reverted.
    ScalarInSubscript,
    /// Two distinct irregular accesses in one forall: both reverted.
    MultiAccess,
}

impl Scenario {
    pub const ALL: [Scenario; 12] = [
        Scenario::Valid,
        Scenario::Alias,
        Scenario::ModArith,
        Scenario::CsrStyle,
        Scenario::Staleness,
        Scenario::NestedForall,
        Scenario::LocalIterand,
        Scenario::WriteBInForall,
        Scenario::NoOuterLoop,
        Scenario::WriteBInOuterLoop,
        Scenario::ScalarInSubscript,
        Scenario::MultiAccess,
    ];

    /// Scenarios whose candidate is expected to be optimized.
    pub const OPTIMIZABLE: [Scenario; 5] = [
        Scenario::Valid,
        Scenario::Alias,
        Scenario::ModArith,
        Scenario::CsrStyle,
        Scenario::Staleness,
    ];

    pub fn expects_optimization(self) -> bool {
        Scenario::OPTIMIZABLE.contains(&self)
    }
}

/// Generate a random program cycling through all scenarios by seed.
pub fn gen_program(seed: u64) -> (Program, Scenario) {
    let scenario = Scenario::ALL[(seed as usize) % Scenario::ALL.len()];
    (gen_scenario(scenario, seed), scenario)
}

/// Generate a random program drawn only from the optimizable scenarios.
pub fn gen_optimizable(seed: u64) -> (Program, Scenario) {
    let scenario = Scenario::OPTIMIZABLE[(seed as usize) % Scenario::OPTIMIZABLE.len()];
    (gen_scenario(scenario, seed), scenario)
}

/// Generate the source for a specific scenario with a specific seed.
pub fn gen_scenario(scenario: Scenario, seed: u64) -> Program {
    let src = gen_source(scenario, seed);
    match parse_program(&src) {
        Ok(p) => p,
        Err(e) => panic!("generated program failed to parse ({scenario:?}, seed {seed}): {e}\n{src}"),
    }
}

struct Params {
    /// Size of the index array B and the output array C.
    n1: usize,
    /// Size of the data array A.
    n2: usize,
    /// Outer serial trip count.
    trips: usize,
    /// Distribution for the iteration domain.
    dist: &'static str,
    /// Element type of A and C.
    elem_real: bool,
    b_vals: Vec<i64>,
    a_ints: Vec<i64>,
    a_reals: Vec<f64>,
}

fn params(rng: &mut ChaCha8Rng) -> Params {
    let n1 = rng.gen_range(8..=40);
    let n2 = rng.gen_range(8..=40);
    let trips = rng.gen_range(2..=4);
    let dist = if rng.gen_bool(0.5) { "block" } else { "cyclic" };
    let elem_real = rng.gen_bool(0.5);
    let b_vals = (0..n1).map(|_| rng.gen_range(0..n2 as i64)).collect();
    let a_ints = (0..n2).map(|_| rng.gen_range(-50..50)).collect();
    let a_reals = (0..n2)
        .map(|_| (rng.gen_range(-500..500) as f64) / 8.0)
        .collect();
    Params { n1, n2, trips, dist, elem_real, b_vals, a_ints, a_reals }
}

fn list_i64(v: &[i64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn list_f64(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

/// Emit shared array declarations: domains DB (size n1) / DA (size n2),
/// index array B, data array A, output array C, and scalar `total`.
fn emit_decls(src: &mut String, p: &Params, a_name: &str, b_dist: &str) {
    let _ = writeln!(src, "domain DB = {} 0..{}", b_dist, p.n1 - 1);
    let _ = writeln!(src, "domain DA = block 0..{}", p.n2 - 1);
    let _ = writeln!(src, "array B over DB : int = [{}]", list_i64(&p.b_vals));
    if p.elem_real {
        let _ = writeln!(src, "array {a_name} over DA : real = [{}]", list_f64(&p.a_reals));
        let _ = writeln!(src, "array C over DB : real");
        let _ = writeln!(src, "var total : real = 0.0");
    } else {
        let _ = writeln!(src, "array {a_name} over DA : int = [{}]", list_i64(&p.a_ints));
        let _ = writeln!(src, "array C over DB : int");
        let _ = writeln!(src, "var total : int = 0");
    }
}

/// Serial reduction over C feeding the scalar output.
fn emit_reduce(src: &mut String, p: &Params) {
    let _ = writeln!(src, "  for i in 0..{} {{", p.n1 - 1);
    let _ = writeln!(src, "    total += C[i];");
    let _ = writeln!(src, "  }}");
}

/// Pick a subscript expression over B[i] that stays within 0..n2, plus a
/// small pointwise tail so the forall body is not always identical.
fn subscript(rng: &mut ChaCha8Rng, p: &Params, b: &str, affine_only: bool) -> String {
    let choice = if affine_only { 0 } else { rng.gen_range(0..3) };
    match choice {
        0 => format!("{b}[i]"),
        1 => {
            let c = rng.gen_range(1..p.n2 as i64);
            format!("({b}[i] + {c}) % {}", p.n2)
        }
        _ => {
            let k = rng.gen_range(2..5);
            format!("({b}[i] * {k}) % {}", p.n2)
        }
    }
}

fn body_tail(rng: &mut ChaCha8Rng, p: &Params) -> String {
    if p.elem_real {
        match rng.gen_range(0..3) {
            0 => String::new(),
            1 => format!(" * {:?}", (rng.gen_range(1..16) as f64) / 4.0),
            _ => format!(" + {:?}", (rng.gen_range(-40..40) as f64) / 8.0),
        }
    } else {
        match rng.gen_range(0..3) {
            0 => String::new(),
            1 => format!(" * {}", rng.gen_range(1..5)),
            _ => format!(" + {}", rng.gen_range(-20..20)),
        }
    }
}

fn gen_source(scenario: Scenario, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let p = params(&mut rng);
    let mut src = String::new();

    match scenario {
        Scenario::Valid => {
            emit_decls(&mut src, &p, "A", p.dist);
            let sub = subscript(&mut rng, &p, "B", false);
            let tail = body_tail(&mut rng, &p);
            let iter = if rng.gen_bool(0.5) { "DB" } else { "B.domain" };
            let _ = writeln!(src, "proc main() {{");
            let _ = writeln!(src, "  for t in 1..{} {{", p.trips);
            let _ = writeln!(src, "    forall i in {iter} {{");
            let _ = writeln!(src, "      C[i] = A[{sub}]{tail};");
            let _ = writeln!(src, "    }}");
            let _ = writeln!(src, "  }}");
            emit_reduce(&mut src, &p);
            let _ = writeln!(src, "}}");
        }
        Scenario::Alias => {
            emit_decls(&mut src, &p, "A", p.dist);
            let links = rng.gen_range(1..=5);
            let sub = subscript(&mut rng, &p, "B", false);
            let tail = body_tail(&mut rng, &p);
            let _ = writeln!(src, "ref a0 = A");
            for l in 1..=links {
                let _ = writeln!(src, "ref a{l} = a{}", l - 1);
            }
            let _ = writeln!(src, "proc main() {{");
            let _ = writeln!(src, "  for t in 1..{} {{", p.trips);
            let _ = writeln!(src, "    forall i in DB {{");
            let _ = writeln!(src, "      C[i] = a{links}[{sub}]{tail};");
            let _ = writeln!(src, "    }}");
            let _ = writeln!(src, "  }}");
            emit_reduce(&mut src, &p);
            let _ = writeln!(src, "}}");
        }
        Scenario::ModArith => {
            emit_decls(&mut src, &p, "A", p.dist);
            // Non-trivial arithmetic in B's own subscript as well as A's.
            let k = rng.gen_range(2..4);
            let c = rng.gen_range(1..p.n2 as i64);
            let tail = body_tail(&mut rng, &p);
            let _ = writeln!(src, "proc main() {{");
            let _ = writeln!(src, "  for t in 1..{} {{", p.trips);
            let _ = writeln!(src, "    forall i in DB {{");
            let _ = writeln!(
                src,
                "      C[i] = A[(B[(i * {k} + 1) % {}] + {c}) % {}]{tail};",
                p.n1, p.n2
            );
            let _ = writeln!(src, "    }}");
            let _ = writeln!(src, "  }}");
            emit_reduce(&mut src, &p);
            let _ = writeln!(src, "}}");
        }
        Scenario::CsrStyle => {
            // Record rows with (id, start, end) ranges over a nonzero array.
            let rows = p.n1.min(12);
            let nnz_per = rng.gen_range(1..=3usize);
            let nnz = rows * nnz_per;
            let recs = (0..rows)
                .map(|r| format!("({r}, {}, {})", r * nnz_per, (r + 1) * nnz_per - 1))
                .collect::<Vec<_>>()
                .join(", ");
            let cols: Vec<i64> = (0..nnz).map(|_| rng.gen_range(0..p.n2 as i64)).collect();
            let _ = writeln!(src, "domain RowDom = {} 0..{}", p.dist, rows - 1);
            let _ = writeln!(src, "domain NnzDom = block 0..{}", nnz - 1);
            let _ = writeln!(src, "domain DA = block 0..{}", p.n2 - 1);
            let _ = writeln!(
                src,
                "array Rows over RowDom : record {{ id: int, start: int, end: int }} = [{recs}]"
            );
            let _ = writeln!(src, "array col over NnzDom : int = [{}]", list_i64(&cols));
            let _ = writeln!(src, "array A over DA : real = [{}]", list_f64(&p.a_reals));
            let _ = writeln!(src, "array C over RowDom : real");
            let _ = writeln!(src, "var total : real = 0.0");
            let _ = writeln!(src, "proc main() {{");
            let _ = writeln!(src, "  for t in 1..{} {{", p.trips);
            let _ = writeln!(src, "    forall row in Rows {{");
            let _ = writeln!(src, "      var accum : real = 0.0;");
            let _ = writeln!(src, "      for k in row.start..row.end {{");
            let _ = writeln!(src, "        accum += A[col[k]];");
            let _ = writeln!(src, "      }}");
            let _ = writeln!(src, "      C[row.id] = accum;");
            let _ = writeln!(src, "    }}");
            let _ = writeln!(src, "  }}");
            let _ = writeln!(src, "  for i in 0..{} {{", rows - 1);
            let _ = writeln!(src, "    total += C[i];");
            let _ = writeln!(src, "  }}");
            let _ = writeln!(src, "}}");
        }
        Scenario::Staleness => {
            // Permute B between phases, outside the innermost serial loop
            // that encloses the candidate, so the optimization stays legal
            // and each phase after the first triggers one re-inspection.
            emit_decls(&mut src, &p, "A", p.dist);
            let tail = body_tail(&mut rng, &p);
            let shift = rng.gen_range(1..p.n2 as i64);
            let _ = writeln!(src, "proc main() {{");
            let _ = writeln!(src, "  for phase in 1..2 {{");
            let _ = writeln!(src, "    for t in 1..{} {{", p.trips);
            let _ = writeln!(src, "      forall i in DB {{");
            let _ = writeln!(src, "        C[i] = A[B[i]]{tail};");
            let _ = writeln!(src, "      }}");
            let _ = writeln!(src, "    }}");
            let _ = writeln!(src, "    forall j in DB {{");
            let _ = writeln!(src, "      B[j] = (B[j] + {shift}) % {};", p.n2);
            let _ = writeln!(src, "    }}");
            let _ = writeln!(src, "    for i in 0..{} {{", p.n1 - 1);
            let _ = writeln!(src, "      total += C[i];");
            let _ = writeln!(src, "    }}");
            let _ = writeln!(src, "  }}");
            let _ = writeln!(src, "}}");
        }
        Scenario::NestedForall => {
            // Candidate sits inside an inner forall; every (i, j) pair
            // writes a distinct C2 slot so both modes stay race-free.
            let n1 = p.n1.min(12);
            let b_vals = &p.b_vals[..n1];
            let _ = writeln!(src, "domain DB = {} 0..{}", p.dist, n1 - 1);
            let _ = writeln!(src, "domain DA = block 0..{}", p.n2 - 1);
            let _ = writeln!(src, "domain DSq = block 0..{}", n1 * n1 - 1);
            let _ = writeln!(src, "array B over DB : int = [{}]", list_i64(b_vals));
            let _ = writeln!(src, "array A over DA : int = [{}]", list_i64(&p.a_ints));
            let _ = writeln!(src, "array C2 over DSq : int");
            let _ = writeln!(src, "var total : int = 0");
            let _ = writeln!(src, "proc main() {{");
            let _ = writeln!(src, "  for t in 1..{} {{", p.trips);
            let _ = writeln!(src, "    forall i in DB {{");
            let _ = writeln!(src, "      forall j in DB {{");
            let _ = writeln!(src, "        C2[i * {n1} + j] = A[B[j]];");
            let _ = writeln!(src, "      }}");
            let _ = writeln!(src, "    }}");
            let _ = writeln!(src, "  }}");
            let _ = writeln!(src, "  for i in 0..{} {{", n1 * n1 - 1);
            let _ = writeln!(src, "    total += C2[i];");
            let _ = writeln!(src, "  }}");
            let _ = writeln!(src, "}}");
        }
        Scenario::LocalIterand => {
            emit_decls(&mut src, &p, "A", "local");
            let sub = subscript(&mut rng, &p, "B", true);
            let _ = writeln!(src, "proc main() {{");
            let _ = writeln!(src, "  for t in 1..{} {{", p.trips);
            let _ = writeln!(src, "    forall i in DB {{");
            let _ = writeln!(src, "      C[i] = A[{sub}];");
            let _ = writeln!(src, "    }}");
            let _ = writeln!(src, "  }}");
            emit_reduce(&mut src, &p);
            let _ = writeln!(src, "}}");
        }
        Scenario::WriteBInForall => {
            emit_decls(&mut src, &p, "A", p.dist);
            let shift = rng.gen_range(1..p.n2 as i64);
            let _ = writeln!(src, "proc main() {{");
            let _ = writeln!(src, "  for t in 1..{} {{", p.trips);
            let _ = writeln!(src, "    forall i in DB {{");
            let _ = writeln!(src, "      C[i] = A[B[i]];");
            let _ = writeln!(src, "      B[i] = (B[i] + {shift}) % {};", p.n2);
            let _ = writeln!(src, "    }}");
            let _ = writeln!(src, "  }}");
            emit_reduce(&mut src, &p);
            let _ = writeln!(src, "}}");
        }
        Scenario::NoOuterLoop => {
            emit_decls(&mut src, &p, "A", p.dist);
            let sub = subscript(&mut rng, &p, "B", true);
            let _ = writeln!(src, "proc main() {{");
            let _ = writeln!(src, "  forall i in DB {{");
            let _ = writeln!(src, "    C[i] = A[{sub}];");
            let _ = writeln!(src, "  }}");
            emit_reduce(&mut src, &p);
            let _ = writeln!(src, "}}");
        }
        Scenario::WriteBInOuterLoop => {
            emit_decls(&mut src, &p, "A", p.dist);
            let shift = rng.gen_range(1..p.n2 as i64);
            let _ = writeln!(src, "proc main() {{");
            let _ = writeln!(src, "  for t in 1..{} {{", p.trips);
            let _ = writeln!(src, "    forall i in DB {{");
            let _ = writeln!(src, "      C[i] = A[B[i]];");
            let _ = writeln!(src, "    }}");
            let _ = writeln!(src, "    B[t % {}] = (B[t % {}] + {shift}) % {};", p.n1, p.n1, p.n2);
            let _ = writeln!(src, "  }}");
            emit_reduce(&mut src, &p);
            let _ = writeln!(src, "}}");
        }
        Scenario::ScalarInSubscript => {
            emit_decls(&mut src, &p, "A", p.dist);
            let g = rng.gen_range(0..p.n2 as i64);
            let _ = writeln!(src, "var g : int = {g}");
            let _ = writeln!(src, "proc main() {{");
            let _ = writeln!(src, "  for t in 1..{} {{", p.trips);
            let _ = writeln!(src, "    forall i in DB {{");
            let _ = writeln!(src, "      C[i] = A[(B[i] + g) % {}];", p.n2);
            let _ = writeln!(src, "    }}");
            let _ = writeln!(src, "  }}");
            emit_reduce(&mut src, &p);
            let _ = writeln!(src, "}}");
        }
        Scenario::MultiAccess => {
            emit_decls(&mut src, &p, "A1", p.dist);
            if p.elem_real {
                let _ = writeln!(src, "array A2 over DA : real = [{}]", list_f64(&p.a_reals));
            } else {
                let _ = writeln!(src, "array A2 over DA : int = [{}]", list_i64(&p.a_ints));
            }
            let _ = writeln!(src, "proc main() {{");
            let _ = writeln!(src, "  for t in 1..{} {{", p.trips);
            let _ = writeln!(src, "    forall i in DB {{");
            let _ = writeln!(src, "      C[i] = A1[B[i]] + A2[B[i]];");
            let _ = writeln!(src, "    }}");
            let _ = writeln!(src, "  }}");
            emit_reduce(&mut src, &p);
            let _ = writeln!(src, "}}");
        }
    }
    src
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::decide;
    use crate::driver::diff_run;
    use crate::interp::ExecConfig;

    #[test]
    fn all_scenarios_parse_and_run_equivalently() {
        for seed in 0..24u64 {
            let (program, scenario) = gen_program(seed);
            let cfg = ExecConfig { num_locales: 4, ..ExecConfig::default() };
            let diff = diff_run(&program, &cfg)
                .unwrap_or_else(|e| panic!("{scenario:?} seed {seed} failed: {e}"));
            assert!(diff.equivalent, "{scenario:?} seed {seed} not equivalent");
        }
    }

    #[test]
    fn scenarios_hit_expected_decisions() {
        for seed in 0..24u64 {
            let (program, scenario) = gen_program(seed);
            let report = decide(&program);
            let optimized = report.optimized().count();
            if scenario.expects_optimization() {
                assert!(optimized >= 1, "{scenario:?} seed {seed}: nothing optimized");
            } else {
                assert_eq!(optimized, 0, "{scenario:?} seed {seed}: unexpected optimization");
            }
        }
    }

    #[test]
    fn staleness_reinspects_exactly_once() {
        let program = gen_scenario(Scenario::Staleness, 4);
        let cfg = ExecConfig { num_locales: 4, ..ExecConfig::default() };
        let diff = diff_run(&program, &cfg).unwrap();
        assert!(diff.equivalent);
        let site = diff.opt.sites.values().next().unwrap();
        assert_eq!(site.inspector_runs, 2, "initial inspection plus one re-inspection");
    }
}

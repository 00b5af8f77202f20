//! DSL program emitters for the benchmark kernels.
//!
//! Both emitters produce source text and parse it, so the generated
//! programs go through exactly the same front end as hand-written ones.

use crate::apps::csr::CsrMatrix;
use crate::apps::graph::{Graph, PrConfig};
use crate::ast::Program;
use crate::parser::parse_program;
use std::fmt::Write as _;

fn int_list(values: impl Iterator<Item = i64>) -> String {
    let items: Vec<String> = values.map(|v| v.to_string()).collect();
    items.join(", ")
}

fn real_list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    items.join(", ")
}

/// Repeated-SpMV kernel: block-distributed row records (id, start, end over
/// the nonzero range), values, column indices, and vectors x/b. The column
/// index array is built from a staging copy before the outer loop, so the
/// analysis finds exactly one modification site for it. The irregular
/// access is `x[col_idx[k]]`.
pub fn gen_spmv_program(matrix: &CsrMatrix, iterations: usize) -> Program {
    gen_spmv_program_with_x(matrix, &vec![1.0; matrix.n_cols], iterations)
}

pub fn gen_spmv_program_with_x(matrix: &CsrMatrix, x: &[f64], iterations: usize) -> Program {
    assert_eq!(matrix.n_rows, matrix.n_cols, "kernel expects a square matrix");
    assert!(matrix.nnz() > 0, "kernel expects at least one nonzero");
    let n = matrix.n_rows;
    let nnz = matrix.nnz();
    let rows = (0..n)
        .map(|r| {
            format!(
                "({r}, {}, {})",
                matrix.offsets[r],
                matrix.offsets[r + 1] as i64 - 1
            )
        })
        .collect::<Vec<_>>()
        .join(", ");

    let mut src = String::new();
    let _ = writeln!(src, "domain RowDom = block 0..{}", n - 1);
    let _ = writeln!(src, "domain NnzDom = block 0..{}", nnz - 1);
    let _ = writeln!(
        src,
        "array Rows over RowDom : record {{ id: int, start: int, end: int }} = [{rows}]"
    );
    let _ = writeln!(
        src,
        "array values over NnzDom : real = [{}]",
        real_list(&matrix.values)
    );
    let _ = writeln!(
        src,
        "array col_src over NnzDom : int = [{}]",
        int_list(matrix.col_idx.iter().map(|&c| c as i64))
    );
    let _ = writeln!(src, "array col_idx over NnzDom : int");
    let _ = writeln!(src, "array x over RowDom : real = [{}]", real_list(x));
    let _ = writeln!(src, "array b over RowDom : real");
    let _ = writeln!(src, "var checksum : real = 0.0");
    let _ = writeln!(
        src,
        r"
proc main() {{
  forall j in col_idx.domain {{
    col_idx[j] = col_src[j];
  }}
  for rep in 1..{iterations} {{
    forall row in Rows {{
      var accum : real = 0.0;
      for k in row.start..row.end {{
        accum += values[k] * x[col_idx[k]];
      }}
      b[row.id] = accum;
    }}
  }}
  for i in 0..{} {{
    checksum += b[i];
  }}
}}",
        n - 1
    );
    parse_program(&src).expect("generated SpMV program must parse")
}

/// Pull-style PageRank: per-vertex records carry (id, start, end) into the
/// in-neighbor array plus pr_read/pr_write/out_degree. The irregular access
/// is `Graph[neighbors[i]]` reading only {pr_read, out_degree}.
pub fn gen_pagerank_program(graph: &Graph, cfg: &PrConfig) -> Program {
    assert!(graph.n > 0 && graph.num_edges() > 0);
    let n = graph.n;
    let m = graph.num_edges();
    let d = cfg.damping;
    let init_rank = 1.0 / n as f64;
    let vertices = (0..n)
        .map(|v| {
            format!(
                "({v}, {}, {}, {init_rank:?}, 0.0, {})",
                graph.in_offsets[v],
                graph.in_offsets[v + 1] as i64 - 1,
                graph.out_degree[v]
            )
        })
        .collect::<Vec<_>>()
        .join(", ");

    let mut src = String::new();
    let _ = writeln!(src, "domain VDom = block 0..{}", n - 1);
    let _ = writeln!(src, "domain EDom = block 0..{}", m - 1);
    let _ = writeln!(
        src,
        "array Graph over VDom : record {{ id: int, start: int, end: int, pr_read: real, pr_write: real, out_degree: int }} = [{vertices}]"
    );
    let _ = writeln!(
        src,
        "array nbr_src over EDom : int = [{}]",
        int_list(graph.in_neighbors.iter().map(|&v| v as i64))
    );
    let _ = writeln!(src, "array neighbors over EDom : int");
    let _ = writeln!(src, "var delta : real = 1.0");
    let _ = writeln!(src, "var iters : int = 0");
    let _ = writeln!(src, "var sink_val : real = 0.0");
    let _ = writeln!(src, "var checksum : real = 0.0");
    let _ = writeln!(
        src,
        r"
proc main() {{
  forall j in neighbors.domain {{
    neighbors[j] = nbr_src[j];
  }}
  while (delta > {tol:?}) * (iters < {maxit}) {{
    var smass : real = 0.0;
    for s in 0..{last} {{
      smass += Graph[s].pr_read * (Graph[s].out_degree == 0);
    }}
    sink_val = {d:?} * smass / {n};
    forall v in Graph {{
      var val : real = 0.0;
      for i in v.start..v.end {{
        val += Graph[neighbors[i]].pr_read / Graph[neighbors[i]].out_degree;
      }}
      Graph[v.id].pr_write = (val * {d:?}) + ((1.0 - {d:?}) / {n}) + sink_val;
    }}
    delta = 0.0;
    for u in 0..{last} {{
      delta += abs(Graph[u].pr_write - Graph[u].pr_read);
    }}
    for u in 0..{last} {{
      Graph[u].pr_read = Graph[u].pr_write;
    }}
    iters = iters + 1;
  }}
  for u in 0..{last} {{
    checksum += Graph[u].pr_read;
  }}
}}",
        tol = cfg.tolerance,
        maxit = cfg.max_iterations,
        last = n - 1,
        d = d,
        n = n,
    );
    parse_program(&src).expect("generated PageRank program must parse")
}

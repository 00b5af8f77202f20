//! End-to-end pipeline: analyze → transform → run, and the differential
//! harness comparing unoptimized and optimized executions.

use crate::analysis::{decide, AnalysisReport};
use crate::ast::Program;
use crate::interp::{run, ExecConfig, RunResult};
use crate::runtime::RuntimeError;
use crate::transform::transform;

#[derive(Debug)]
pub struct DiffResult {
    pub equivalent: bool,
    pub report: AnalysisReport,
    pub unopt: RunResult,
    pub opt: RunResult,
}

impl DiffResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "equivalent": self.equivalent,
            "analysis": self.report.to_json(),
            "unopt": self.unopt.to_json(),
            "opt": self.opt.to_json(),
        })
    }
}

/// Analyzes and transforms `program`, then returns the optimized program
/// together with the analysis report.
pub fn optimize(program: &Program) -> (Program, AnalysisReport) {
    let report = decide(program);
    let transformed = transform(program, &report);
    (transformed, report)
}

/// Runs `program` unoptimized and optimized with identical inputs; the
/// verdict is true iff every scalar and array output is bit-identical.
pub fn diff_run(program: &Program, cfg: &ExecConfig) -> Result<DiffResult, RuntimeError> {
    let unopt = run(program, cfg)?;
    let (optimized, report) = optimize(program);
    let opt = run(&optimized, cfg)?;
    let equivalent = unopt.outputs == opt.outputs && unopt.array_outputs == opt.array_outputs;
    Ok(DiffResult {
        equivalent,
        report,
        unopt,
        opt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Decision;
    use crate::apps::graph::{pagerank_oracle, Graph, PrConfig};
    use crate::apps::programs::{gen_pagerank_program, gen_spmv_program};
    use crate::apps::synth::banded;

    #[test]
    fn cg_small_end_to_end() {
        let m = banded(16, 1);
        let p = gen_spmv_program(&m, 3);
        let report = decide(&p);
        assert_eq!(report.candidates.len(), 1);
        assert_eq!(report.candidates[0].decision, Decision::Optimize);
        assert_eq!(report.modification_sites.len(), 1);
        let cfg = ExecConfig {
            num_locales: 4,
            ..ExecConfig::default()
        };
        let d = diff_run(&p, &cfg).unwrap();
        assert!(d.equivalent, "optimized run diverged");
        let site = d.opt.sites.values().next().unwrap();
        assert_eq!(site.inspector_runs, 1);
        assert_eq!(site.executor_runs, 3);
        // conservation on the replicated array: preamble + executor remote
        // reads never exceed the unoptimized remote reads of x
        let ux = &d.unopt.per_array["x"];
        let ox = &d.opt.per_array["x"];
        assert!(ox.remote_reads + ox.preamble_remote_reads <= ux.remote_reads);
    }

    #[test]
    fn transformed_cg_round_trips() {
        let m = banded(8, 1);
        let p = gen_spmv_program(&m, 2);
        let (opt, _) = optimize(&p);
        crate::validate::validate(&opt).expect("transformed program must round-trip");
    }

    #[test]
    fn pagerank_small_end_to_end() {
        let g = Graph::from_edges(8, &[
            (0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (5, 0), (6, 2), (0, 7),
        ]);
        let cfg = PrConfig::default();
        let p = gen_pagerank_program(&g, &cfg);
        let report = decide(&p);
        assert_eq!(report.candidates.len(), 1);
        assert_eq!(report.candidates[0].decision, Decision::Optimize);
        let fields: Vec<&str> = report.candidates[0]
            .candidate
            .accessed_fields
            .iter()
            .map(|s| s.as_str())
            .collect();
        assert_eq!(fields, vec!["out_degree", "pr_read"]);
        let ecfg = ExecConfig {
            num_locales: 4,
            ..ExecConfig::default()
        };
        let d = diff_run(&p, &ecfg).unwrap();
        assert!(d.equivalent, "optimized run diverged");
        assert_eq!(d.opt.sites.values().next().unwrap().inspector_runs, 1);

        let oracle = pagerank_oracle(&g, &cfg);
        let checksum = match d.unopt.outputs["checksum"] {
            crate::interp::OutValue::Real(r) => r,
            _ => panic!("checksum is not a real"),
        };
        let oracle_sum: f64 = oracle.ranks.iter().sum();
        assert!((checksum - oracle_sum).abs() < 1e-9);
        let iters = match d.unopt.outputs["iters"] {
            crate::interp::OutValue::Int(i) => i as usize,
            _ => panic!("iters is not an int"),
        };
        assert_eq!(iters, oracle.iterations);
    }
}

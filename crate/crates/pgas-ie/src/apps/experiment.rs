//! Experiment orchestration: runs a benchmark in both modes across locale
//! counts and reports counter-derived metrics (speedup, remote-read
//! reduction, replica overhead, inspector time share).

use crate::apps::csr::CsrMatrix;
use crate::apps::graph::{Graph, PrConfig};
use crate::apps::programs::{gen_pagerank_program, gen_spmv_program};
use crate::driver::diff_run;
use crate::interp::ExecConfig;
use crate::runtime::{CostModel, RuntimeError};
use serde_json::{json, Value as Json};
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub enum Dataset {
    Matrix(CsrMatrix),
    Graph(Graph),
}

#[derive(Debug, Clone)]
pub struct ExperimentCell {
    pub locales: usize,
    pub equivalent: bool,
    pub unopt_time: u64,
    pub opt_time: u64,
    pub speedup: f64,
    pub unopt_remote_reads: u64,
    pub opt_remote_reads: u64,
    pub remote_read_reduction: f64,
    pub replica_ratio: f64,
    pub inspector_time_share: f64,
    pub inspector_runs: u64,
    pub executor_runs: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub app: String,
    pub dataset: String,
    pub cells: Vec<ExperimentCell>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Json {
        json!({
            "app": self.app,
            "dataset": self.dataset,
            "cells": self.cells.iter().map(|c| json!({
                "locales": c.locales,
                "equivalent": c.equivalent,
                "unopt_simulated_time": c.unopt_time,
                "opt_simulated_time": c.opt_time,
                "speedup_simulated_time": c.speedup,
                "unopt_remote_reads": c.unopt_remote_reads,
                "opt_remote_reads": c.opt_remote_reads,
                "remote_read_reduction": c.remote_read_reduction,
                "replica_ratio": c.replica_ratio,
                "inspector_time_share": c.inspector_time_share,
                "inspector_runs": c.inspector_runs,
                "executor_runs": c.executor_runs,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "app: {}   dataset: {}", self.app, self.dataset);
        let _ = writeln!(
            out,
            "{:>8} {:>6} {:>14} {:>14} {:>9} {:>12} {:>12} {:>9} {:>10}",
            "locales", "equiv", "time(unopt)", "time(opt)", "speedup",
            "rreads(un)", "rreads(opt)", "replica", "insp.share"
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:>8} {:>6} {:>14} {:>14} {:>9.3} {:>12} {:>12} {:>9.3} {:>10.4}",
                c.locales,
                c.equivalent,
                c.unopt_time,
                c.opt_time,
                c.speedup,
                c.unopt_remote_reads,
                c.opt_remote_reads,
                c.replica_ratio,
                c.inspector_time_share
            );
        }
        out
    }
}

/// Runs `app` over every locale count and gathers one report row per count.
pub fn run_experiment(
    app: &str,
    dataset: &Dataset,
    dataset_name: &str,
    locales: &[usize],
    cost: CostModel,
    repetitions: usize,
) -> Result<ExperimentReport, RuntimeError> {
    let program = match (app, dataset) {
        ("cg", Dataset::Matrix(m)) => gen_spmv_program(m, repetitions),
        ("pagerank", Dataset::Graph(g)) => gen_pagerank_program(
            g,
            &PrConfig {
                max_iterations: repetitions,
                ..PrConfig::default()
            },
        ),
        _ => {
            return Err(RuntimeError::Unsupported(format!(
                "app '{app}' does not match the dataset kind"
            )))
        }
    };
    let mut cells = Vec::new();
    for &n in locales {
        let cfg = ExecConfig {
            num_locales: n,
            cost,
            ..ExecConfig::default()
        };
        let d = diff_run(&program, &cfg)?;
        let unopt_time = d.unopt.aggregate.simulated_time;
        let opt_time = d.opt.aggregate.simulated_time;
        let unopt_rr = d.unopt.aggregate.total_remote_reads();
        let opt_rr = d.opt.aggregate.total_remote_reads();
        let (mut inspector_runs, mut executor_runs) = (0, 0);
        let mut replica_ratio: f64 = 0.0;
        for s in d.opt.sites.values() {
            inspector_runs += s.inspector_runs;
            executor_runs += s.executor_runs;
            replica_ratio = replica_ratio.max(s.replica_ratio);
        }
        cells.push(ExperimentCell {
            locales: n,
            equivalent: d.equivalent,
            unopt_time,
            opt_time,
            speedup: unopt_time as f64 / opt_time.max(1) as f64,
            unopt_remote_reads: unopt_rr,
            opt_remote_reads: opt_rr,
            remote_read_reduction: unopt_rr as f64 / opt_rr.max(1) as f64,
            replica_ratio,
            inspector_time_share: d.opt.aggregate.inspector_time as f64
                / opt_time.max(1) as f64,
            inspector_runs,
            executor_runs,
        });
    }
    Ok(ExperimentReport {
        app: app.to_string(),
        dataset: dataset_name.to_string(),
        cells,
    })
}

//! `pgas-ie`: inspector-executor optimizer and multi-locale simulator for
//! irregular-access loop programs.

use clap::{Args, Parser, Subcommand};
use pgas_ie::analysis::decide;
use pgas_ie::apps::experiment::{run_experiment, Dataset};
use pgas_ie::apps::graph::Graph;
use pgas_ie::apps::mtx::load_matrix_market;
use pgas_ie::apps::synth::{banded, powerlaw_graph, random_matrix};
use pgas_ie::ast::Program;
use pgas_ie::driver::{diff_run, optimize};
use pgas_ie::interp::{run, ExecConfig};
use pgas_ie::parser::parse_program;
use pgas_ie::printer::pretty_print;
use pgas_ie::runtime::CostModel;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_NO_OPT: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pgas-ie",
    about = "Inspector-executor optimizer and deterministic multi-locale simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program and pretty-print the normalized form.
    Parse {
        /// Path to the source file.
        file: PathBuf,
    },
    /// Run the static analysis and report the per-candidate decisions.
    Analyze {
        file: PathBuf,
        /// Write the analysis report as JSON to this path.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Exit with status 1 if no candidate is optimized.
        #[arg(long)]
        require_opt: bool,
    },
    /// Apply the inspector-executor transformation and print the result.
    Transform {
        file: PathBuf,
        /// Exit with status 1 if no candidate is optimized.
        #[arg(long)]
        require_opt: bool,
        /// Force identity output (revert every candidate) for A/B testing.
        #[arg(long)]
        revert_all: bool,
    },
    /// Execute a program on the simulated machine.
    Run {
        file: PathBuf,
        #[command(flatten)]
        exec: ExecOpts,
        /// Which form to execute: the original, the transformed, or both.
        #[arg(long, default_value = "unopt", value_parser = ["unopt", "opt", "diff"])]
        mode: String,
        /// Write the run report as JSON to this path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run original and transformed forms and compare their outputs.
    Diff {
        file: PathBuf,
        #[command(flatten)]
        exec: ExecOpts,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a built-in benchmark across locale counts.
    Bench {
        /// Benchmark kernel: cg or pagerank.
        #[arg(long, value_parser = ["cg", "pagerank"])]
        app: String,
        /// Dataset: a Matrix Market file path or a synthetic spec
        /// (banded:N:BW, random:N:NNZ, powerlaw:N).
        #[arg(long)]
        dataset: String,
        /// Comma-separated locale counts.
        #[arg(long, default_value = "1,2,4,8", value_delimiter = ',')]
        locales: Vec<usize>,
        /// Outer repetitions (cg) or max iterations (pagerank).
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        /// Remote-access cost model: aries, ibv, or custom:<cost>.
        #[arg(long, default_value = "aries")]
        cost: String,
        /// Seed for synthetic dataset generation.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExecOpts {
    /// Number of simulated locales.
    #[arg(long, default_value_t = 4)]
    locales: usize,
    /// Remote-access cost model: aries, ibv, or custom:<cost>.
    #[arg(long, default_value = "aries")]
    cost: String,
    /// Charge ownership queries during inspection to simulated time.
    #[arg(long)]
    count_query_time: bool,
    /// Record first-execution communication traces per forall.
    #[arg(long)]
    trace: bool,
}

fn parse_cost(spec: &str) -> Result<CostModel, String> {
    match spec {
        "aries" => Ok(CostModel::aries()),
        "ibv" => Ok(CostModel::ibv()),
        other => match other.strip_prefix("custom:") {
            Some(c) => c
                .parse::<u64>()
                .map(CostModel::custom)
                .map_err(|e| format!("bad custom cost '{c}': {e}")),
            None => Err(format!(
                "unknown cost model '{other}' (expected aries, ibv, or custom:<cost>)"
            )),
        },
    }
}

fn exec_config(opts: &ExecOpts) -> Result<ExecConfig, String> {
    Ok(ExecConfig {
        num_locales: opts.locales,
        cost: parse_cost(&opts.cost)?,
        trace: opts.trace,
        count_query_time: opts.count_query_time,
        ..ExecConfig::default()
    })
}

fn load_program(path: &PathBuf) -> Result<Program, String> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_program(&src).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_report(path: &Option<PathBuf>, json: &serde_json::Value) -> Result<(), String> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(json).expect("report serializes");
        std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
        eprintln!("report written to {}", p.display());
    }
    Ok(())
}

fn parse_dataset(app: &str, spec: &str, seed: u64) -> Result<(Dataset, String), String> {
    if let Some(rest) = spec.strip_prefix("banded:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 2 {
            return Err("banded spec must be banded:N:BW".into());
        }
        let n: usize = parts[0].parse().map_err(|e| format!("bad N: {e}"))?;
        let bw: usize = parts[1].parse().map_err(|e| format!("bad BW: {e}"))?;
        return Ok((Dataset::Matrix(banded(n, bw)), spec.to_string()));
    }
    if let Some(rest) = spec.strip_prefix("random:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 2 {
            return Err("random spec must be random:N:NNZ".into());
        }
        let n: usize = parts[0].parse().map_err(|e| format!("bad N: {e}"))?;
        let nnz: usize = parts[1].parse().map_err(|e| format!("bad NNZ: {e}"))?;
        return Ok((Dataset::Matrix(random_matrix(n, nnz, seed)), spec.to_string()));
    }
    if let Some(rest) = spec.strip_prefix("powerlaw:") {
        let n: usize = rest.parse().map_err(|e| format!("bad N: {e}"))?;
        return Ok((Dataset::Graph(powerlaw_graph(n, 2.2, seed)), spec.to_string()));
    }
    // Otherwise treat as a Matrix Market file path.
    let m = load_matrix_market(spec).map_err(|e| format!("{spec}: {e}"))?;
    let name = spec.to_string();
    if app == "pagerank" {
        // Interpret the sparsity pattern as a directed edge list.
        let mut edges = Vec::new();
        for r in 0..m.n_rows {
            for k in m.offsets[r]..m.offsets[r + 1] {
                let c = m.col_idx[k];
                if c != r {
                    edges.push((r, c));
                }
            }
        }
        let n = m.n_rows.max(m.n_cols);
        return Ok((Dataset::Graph(Graph::from_edges(n, &edges)), name));
    }
    Ok((Dataset::Matrix(m), name))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, (u8, String)> {
    match cli.command {
        Command::Parse { file } => {
            let program = load_program(&file).map_err(|e| (EXIT_PARSE, e))?;
            print!("{}", pretty_print(&program));
            Ok(EXIT_OK)
        }
        Command::Analyze { file, report, require_opt } => {
            let program = load_program(&file).map_err(|e| (EXIT_PARSE, e))?;
            let analysis = decide(&program);
            let json = analysis.to_json();
            println!("{}", serde_json::to_string_pretty(&json).unwrap());
            write_report(&report, &json).map_err(|e| (EXIT_RUNTIME, e))?;
            let n_opt = analysis.optimized().count();
            eprintln!(
                "{} candidate(s), {} optimized, {} modification site(s), {} invalid path(s)",
                analysis.candidates.len(),
                n_opt,
                analysis.modification_sites.len(),
                analysis.invalid_paths.len()
            );
            if require_opt && n_opt == 0 {
                return Err((EXIT_NO_OPT, "no candidate was optimized".into()));
            }
            Ok(EXIT_OK)
        }
        Command::Transform { file, require_opt, revert_all } => {
            let program = load_program(&file).map_err(|e| (EXIT_PARSE, e))?;
            if revert_all {
                print!("{}", pretty_print(&program));
                return Ok(EXIT_OK);
            }
            let (optimized, analysis) = optimize(&program);
            if require_opt && analysis.optimized().count() == 0 {
                return Err((EXIT_NO_OPT, "no candidate was optimized".into()));
            }
            print!("{}", pretty_print(&optimized));
            Ok(EXIT_OK)
        }
        Command::Run { file, exec, mode, report } => {
            let program = load_program(&file).map_err(|e| (EXIT_PARSE, e))?;
            let cfg = exec_config(&exec).map_err(|e| (EXIT_PARSE, e))?;
            match mode.as_str() {
                "diff" => {
                    let d = diff_run(&program, &cfg)
                        .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
                    let json = d.to_json();
                    println!("{}", serde_json::to_string_pretty(&json).unwrap());
                    write_report(&report, &json).map_err(|e| (EXIT_RUNTIME, e))?;
                    if !d.equivalent {
                        return Err((EXIT_RUNTIME, "outputs differ between modes".into()));
                    }
                    Ok(EXIT_OK)
                }
                m => {
                    let target = if m == "opt" { optimize(&program).0 } else { program };
                    let result =
                        run(&target, &cfg).map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
                    let json = result.to_json();
                    println!("{}", serde_json::to_string_pretty(&json).unwrap());
                    write_report(&report, &json).map_err(|e| (EXIT_RUNTIME, e))?;
                    Ok(EXIT_OK)
                }
            }
        }
        Command::Diff { file, exec, report } => {
            let program = load_program(&file).map_err(|e| (EXIT_PARSE, e))?;
            let cfg = exec_config(&exec).map_err(|e| (EXIT_PARSE, e))?;
            let d = diff_run(&program, &cfg).map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
            let json = d.to_json();
            println!("{}", serde_json::to_string_pretty(&json).unwrap());
            write_report(&report, &json).map_err(|e| (EXIT_RUNTIME, e))?;
            if d.equivalent {
                eprintln!("outputs are bit-identical across modes");
                Ok(EXIT_OK)
            } else {
                Err((EXIT_RUNTIME, "outputs differ between modes".into()))
            }
        }
        Command::Bench { app, dataset, locales, repetitions, cost, seed, report } => {
            let cost = parse_cost(&cost).map_err(|e| (EXIT_PARSE, e))?;
            let (ds, name) = parse_dataset(&app, &dataset, seed).map_err(|e| (EXIT_PARSE, e))?;
            let exp = run_experiment(&app, &ds, &name, &locales, cost, repetitions)
                .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
            print!("{}", exp.to_table());
            write_report(&report, &exp.to_json()).map_err(|e| (EXIT_RUNTIME, e))?;
            Ok(EXIT_OK)
        }
    }
}

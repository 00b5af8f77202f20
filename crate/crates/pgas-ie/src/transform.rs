//! Source-to-source rewriting of analyzed programs.
//!
//! For every candidate the analysis decided to optimize, the forall is
//! replaced by three statements:
//!
//! 1. a guarded inspector: `if doInspector(A, B) { inspectorPreamble(A);
//!    <stripped forall recording accesses>; inspectorOff(A, B); }`
//! 2. `executorPreamble(A);` — refreshes replicated elements before every
//!    execution of the loop
//! 3. the executor: the original forall with each irregular read replaced
//!    by `executeAccess(A, subscript)`
//!
//! In addition, `setStale(A, B)` markers are inserted after every statement
//! that modifies the access pattern, and call sites on invalid call paths
//! are bracketed with `offSwitchOn`/`offSwitchOff` toggles.
//!
//! When the analysis reverts every candidate the program is returned
//! unchanged (clone of the input).

use crate::analysis::{AnalysisReport, Candidate, Decision};
use crate::ast::*;
use std::collections::BTreeMap;

/// Applies the decisions in `report` to `program`. Reverted candidates leave
/// their loops untouched; if no candidate is optimized the output is
/// structurally identical to the input.
pub fn transform(program: &Program, report: &AnalysisReport) -> Program {
    let mut out = program.clone();

    #[derive(Debug)]
    enum Edit {
        InspectorExecutor(usize),
        SetStaleAfter(Vec<(String, String)>),
        WrapOffSwitch(Vec<u32>),
    }

    let mut edits: Vec<(StmtPath, Edit)> = Vec::new();
    for (i, cd) in report.candidates.iter().enumerate() {
        if cd.decision == Decision::Optimize {
            edits.push((cd.candidate.loop_path.clone(), Edit::InspectorExecutor(i)));
        }
    }
    for site in &report.modification_sites {
        edits.push((
            site.path.clone(),
            Edit::SetStaleAfter(site.pairs.iter().cloned().collect()),
        ));
    }
    let mut toggles: BTreeMap<StmtPath, Vec<u32>> = BTreeMap::new();
    for ip in &report.invalid_paths {
        let sites = toggles.entry(ip.toggle.clone()).or_default();
        if !sites.contains(&ip.site) {
            sites.push(ip.site);
        }
    }
    for (path, sites) in toggles {
        edits.push((path, Edit::WrapOffSwitch(sites)));
    }

    // Deepest edits first so shallower rewrites see (and clone) their
    // results; within one body, apply back to front so earlier indices
    // stay valid.
    edits.sort_by(|a, b| {
        b.0.indices
            .len()
            .cmp(&a.0.indices.len())
            .then_with(|| b.0.cmp(&a.0))
    });

    for (path, edit) in edits {
        let Some(body) = body_of_parent(&mut out, &path) else {
            continue;
        };
        let idx = *path.indices.last().unwrap();
        if idx >= body.len() {
            continue;
        }
        match edit {
            Edit::InspectorExecutor(i) => {
                let c = &report.candidates[i].candidate;
                let forall = body[idx].clone();
                let replacement = inspector_executor(program, c, &forall);
                body.splice(idx..=idx, replacement);
            }
            Edit::SetStaleAfter(pairs) => {
                let markers = pairs.into_iter().map(|(a, b)| Stmt::SetStale {
                    array_a: a,
                    array_b: b,
                });
                body.splice(idx + 1..idx + 1, markers);
            }
            Edit::WrapOffSwitch(sites) => {
                let stmt = body[idx].clone();
                let mut seq: Vec<Stmt> =
                    sites.iter().map(|&s| Stmt::OffSwitchOn { site: s }).collect();
                seq.push(stmt);
                seq.extend(sites.iter().map(|&s| Stmt::OffSwitchOff { site: s }));
                body.splice(idx..=idx, seq);
            }
        }
    }
    out
}

/// The body of the statement list containing `path`'s target.
fn body_of_parent<'p>(program: &'p mut Program, path: &StmtPath) -> Option<&'p mut Vec<Stmt>> {
    let f = program
        .functions
        .iter_mut()
        .find(|f| f.name == path.function)?;
    let mut body = &mut f.body;
    for &i in &path.indices[..path.indices.len() - 1] {
        body = body.get_mut(i)?.body_mut()?;
    }
    Some(body)
}

/// Builds the guard/preamble/executor triple replacing a candidate forall.
fn inspector_executor(program: &Program, c: &Candidate, forall: &Stmt) -> Vec<Stmt> {
    let Stmt::Forall { var, iterand, body } = forall else {
        return vec![forall.clone()];
    };
    let inspector = Stmt::Forall {
        var: var.clone(),
        iterand: Expr::InspectorIterator(Box::new(iterand.clone())),
        body: strip_for_inspector(program, c, body),
    };
    let guard = Stmt::InspectorGuard {
        site: c.site,
        array_a: c.array_a.clone(),
        array_b: c.array_b.clone(),
        body: vec![
            Stmt::InspectorPreamble {
                site: c.site,
                array: c.array_a.clone(),
            },
            inspector,
            Stmt::InspectorOff {
                site: c.site,
                array_a: c.array_a.clone(),
                array_b: c.array_b.clone(),
            },
        ],
    };
    let executor = Stmt::Forall {
        var: var.clone(),
        iterand: iterand.clone(),
        body: body
            .iter()
            .map(|s| rewrite_stmt(program, c, s))
            .collect(),
    };
    vec![
        guard,
        Stmt::ExecutorPreamble {
            site: c.site,
            array: c.array_a.clone(),
        },
        executor,
    ]
}

/// Keeps only what the inspector needs: the loops on the path to each
/// occurrence, with occurrence-bearing statements reduced to
/// `inspectAccess` calls. Subscripts are built from loop indices and
/// literals only (guaranteed by the non-affine analysis), so no other
/// statement contributes to them.
fn strip_for_inspector(program: &Program, c: &Candidate, body: &[Stmt]) -> Vec<Stmt> {
    let mut out = Vec::new();
    for s in body {
        let direct = stmt_has_occurrence(program, c, s);
        if direct {
            out.push(Stmt::InspectCall {
                site: c.site,
                array: c.array_a.clone(),
                subscript: c.subscript.clone(),
            });
        }
        if let Some(inner) = s.body() {
            let stripped = strip_for_inspector(program, c, inner);
            if !stripped.is_empty() {
                let kept = match s {
                    Stmt::For { var, iterand, .. } => Stmt::For {
                        var: var.clone(),
                        iterand: iterand.clone(),
                        body: stripped,
                    },
                    Stmt::Forall { var, iterand, .. } => Stmt::For {
                        var: var.clone(),
                        iterand: iterand.clone(),
                        body: stripped,
                    },
                    Stmt::While { cond, .. } => Stmt::While {
                        cond: cond.clone(),
                        body: stripped,
                    },
                    _ => continue,
                };
                out.push(kept);
            }
        }
    }
    out
}

/// Does the statement's own expressions contain the candidate access?
fn stmt_has_occurrence(program: &Program, c: &Candidate, s: &Stmt) -> bool {
    stmt_exprs_all(s).iter().any(|e| expr_has_occurrence(program, c, e))
}

fn stmt_exprs_all(s: &Stmt) -> Vec<&Expr> {
    match s {
        Stmt::Forall { iterand, .. } | Stmt::For { iterand, .. } => vec![iterand],
        Stmt::While { cond, .. } => vec![cond],
        Stmt::Assign { lhs, rhs, .. } => vec![lhs, rhs],
        Stmt::Call { args, .. } => args.iter().collect(),
        Stmt::DomAdd { index, .. } | Stmt::DomRemove { index, .. } => vec![index],
        Stmt::LocalVar { init, .. } => init.iter().collect(),
        Stmt::Return(v) => v.iter().collect(),
        Stmt::InspectCall { subscript, .. } => vec![subscript],
        _ => Vec::new(),
    }
}

fn expr_has_occurrence(program: &Program, c: &Candidate, e: &Expr) -> bool {
    if is_occurrence(program, c, e) {
        return true;
    }
    match e {
        Expr::Index { target, subscript } => {
            expr_has_occurrence(program, c, target) || expr_has_occurrence(program, c, subscript)
        }
        Expr::Field { target, .. } => expr_has_occurrence(program, c, target),
        Expr::Binop { lhs, rhs, .. } => {
            expr_has_occurrence(program, c, lhs) || expr_has_occurrence(program, c, rhs)
        }
        Expr::DomainOf(x) | Expr::Abs(x) | Expr::InspectorIterator(x) => {
            expr_has_occurrence(program, c, x)
        }
        Expr::Range { lo, hi } => {
            expr_has_occurrence(program, c, lo) || expr_has_occurrence(program, c, hi)
        }
        Expr::Call { args, .. } => args.iter().any(|a| expr_has_occurrence(program, c, a)),
        Expr::ExecuteAccess { subscript, .. } => expr_has_occurrence(program, c, subscript),
        _ => false,
    }
}

fn is_occurrence(program: &Program, c: &Candidate, e: &Expr) -> bool {
    if let Expr::Index { target, subscript } = e {
        if let Expr::Var(n) = target.as_ref() {
            return program.resolve_alias(n) == c.array_a && subscript.as_ref() == &c.subscript;
        }
    }
    false
}

fn rewrite_stmt(program: &Program, c: &Candidate, s: &Stmt) -> Stmt {
    let rw = |e: &Expr| rewrite_expr(program, c, e, true);
    match s {
        Stmt::Forall { var, iterand, body } => Stmt::Forall {
            var: var.clone(),
            iterand: rw(iterand),
            body: body.iter().map(|x| rewrite_stmt(program, c, x)).collect(),
        },
        Stmt::For { var, iterand, body } => Stmt::For {
            var: var.clone(),
            iterand: rw(iterand),
            body: body.iter().map(|x| rewrite_stmt(program, c, x)).collect(),
        },
        Stmt::While { cond, body } => Stmt::While {
            cond: rw(cond),
            body: body.iter().map(|x| rewrite_stmt(program, c, x)).collect(),
        },
        Stmt::Assign { lhs, op, rhs } => Stmt::Assign {
            // only the read parts of the lvalue are rewritten
            lhs: rewrite_expr(program, c, lhs, false),
            op: *op,
            rhs: rw(rhs),
        },
        Stmt::Call { name, args } => Stmt::Call {
            name: name.clone(),
            args: args.iter().map(|a| rw(a)).collect(),
        },
        Stmt::DomAdd { domain, index } => Stmt::DomAdd {
            domain: domain.clone(),
            index: rw(index),
        },
        Stmt::DomRemove { domain, index } => Stmt::DomRemove {
            domain: domain.clone(),
            index: rw(index),
        },
        Stmt::LocalVar { name, ty, init } => Stmt::LocalVar {
            name: name.clone(),
            ty: *ty,
            init: init.as_ref().map(|e| rw(e)),
        },
        Stmt::Return(v) => Stmt::Return(v.as_ref().map(|e| rw(e))),
        Stmt::InspectorGuard { site, array_a, array_b, body } => Stmt::InspectorGuard {
            site: *site,
            array_a: array_a.clone(),
            array_b: array_b.clone(),
            body: body.iter().map(|x| rewrite_stmt(program, c, x)).collect(),
        },
        other => other.clone(),
    }
}

/// Replaces every occurrence of the candidate read with `executeAccess`.
/// `read_pos` is false at the top of an lvalue: the written access itself
/// must stay a plain index expression, but subscripts inside it are reads.
fn rewrite_expr(program: &Program, c: &Candidate, e: &Expr, read_pos: bool) -> Expr {
    if read_pos && is_occurrence(program, c, e) {
        if let Expr::Index { subscript, .. } = e {
            return Expr::ExecuteAccess {
                site: c.site,
                array: c.array_a.clone(),
                subscript: Box::new(rewrite_expr(program, c, subscript, true)),
            };
        }
    }
    match e {
        Expr::Index { target, subscript } => Expr::Index {
            target: Box::new(rewrite_expr(program, c, target, read_pos)),
            subscript: Box::new(rewrite_expr(program, c, subscript, true)),
        },
        Expr::Field { target, field } => Expr::Field {
            target: Box::new(rewrite_expr(program, c, target, read_pos)),
            field: field.clone(),
        },
        Expr::Binop { op, lhs, rhs } => Expr::Binop {
            op: *op,
            lhs: Box::new(rewrite_expr(program, c, lhs, true)),
            rhs: Box::new(rewrite_expr(program, c, rhs, true)),
        },
        Expr::DomainOf(x) => Expr::DomainOf(Box::new(rewrite_expr(program, c, x, true))),
        Expr::Abs(x) => Expr::Abs(Box::new(rewrite_expr(program, c, x, true))),
        Expr::InspectorIterator(x) => {
            Expr::InspectorIterator(Box::new(rewrite_expr(program, c, x, true)))
        }
        Expr::Range { lo, hi } => Expr::Range {
            lo: Box::new(rewrite_expr(program, c, lo, true)),
            hi: Box::new(rewrite_expr(program, c, hi, true)),
        },
        Expr::Call { name, args } => Expr::Call {
            name: name.clone(),
            args: args
                .iter()
                .map(|a| rewrite_expr(program, c, a, true))
                .collect(),
        },
        other => other.clone(),
    }
}

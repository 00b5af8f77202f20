//! Static analysis: candidate discovery for irregular accesses `A[B[i]]`
//! inside forall loops, the validity checks V1-V4, the profitability checks
//! Pa-Pc, non-affine subscript analysis, interprocedural call-graph analysis
//! with invalid-path discovery, and modification-site discovery.
//!
//! The analysis is pure: it never mutates the program, and the same program
//! always produces an identical report.

use crate::ast::*;
use crate::printer::expr_to_string;
use serde_json::{json, Value as Json};
use std::collections::{BTreeMap, BTreeSet, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CheckId {
    V1,
    V2,
    V3,
    V4,
    Pa,
    Pb,
    Pc,
    Na,
    Ip,
    Multi,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckResult {
    pub id: CheckId,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn ok(id: CheckId, detail: impl Into<String>) -> Self {
        CheckResult {
            id,
            passed: true,
            detail: detail.into(),
        }
    }

    fn fail(id: CheckId, detail: impl Into<String>) -> Self {
        CheckResult {
            id,
            passed: false,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Decision {
    Optimize,
    Revert,
}

/// One loop on the lexical chain from a forall down to an access (or one of
/// the forall's lexical ancestors).
#[derive(Debug, Clone)]
pub struct LoopDesc {
    pub is_forall: bool,
    /// Empty for while loops.
    pub var: String,
    pub iterand: Option<Expr>,
    pub path: StmtPath,
}

#[derive(Debug, Clone)]
pub struct Occurrence {
    pub stmt_path: StmtPath,
    /// Chain of loops from the candidate forall (first) down to the loop
    /// immediately containing the access (last).
    pub chain: Vec<LoopDesc>,
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub site: u32,
    pub loop_path: StmtPath,
    /// Root (alias-resolved) name of the distributed array being replicated.
    pub array_a: String,
    /// Root name of the index array.
    pub array_b: String,
    /// Subscript of A; contains exactly one index into B.
    pub subscript: Expr,
    /// Record fields of A read through this access; empty means the whole
    /// element is replicated.
    pub accessed_fields: BTreeSet<String>,
    pub enclosing_function: String,
    pub occurrences: Vec<Occurrence>,
    /// Lexical loop ancestors of the forall within its function,
    /// outermost first.
    pub ancestors: Vec<LoopDesc>,
    /// Forall index variable and iterand, for pattern-feeding write checks.
    pub loop_var: String,
    pub iterand: Expr,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ModSite {
    pub path: StmtPath,
    pub object: String,
    /// (A-root, B-root) staleness flags to set after the statement.
    pub pairs: BTreeSet<(String, String)>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct InvalidPath {
    pub site: u32,
    /// Call-site statements along the path, from entry outward.
    pub edges: Vec<StmtPath>,
    /// Call-site statement wrapped with the runtime off-switch.
    pub toggle: StmtPath,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct CandidateDecision {
    pub candidate: Candidate,
    pub decision: Decision,
    pub checks: Vec<CheckResult>,
}

impl CandidateDecision {
    pub fn check(&self, id: CheckId) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisReport {
    pub candidates: Vec<CandidateDecision>,
    pub modification_sites: Vec<ModSite>,
    pub invalid_paths: Vec<InvalidPath>,
}

impl AnalysisReport {
    pub fn optimized(&self) -> impl Iterator<Item = &CandidateDecision> {
        self.candidates
            .iter()
            .filter(|c| c.decision == Decision::Optimize)
    }

    pub fn all_reverted(&self) -> bool {
        self.optimized().next().is_none()
    }

    pub fn to_json(&self) -> Json {
        json!({
            "candidates": self.candidates.iter().map(|cd| json!({
                "site_id": cd.candidate.site,
                "arrays": { "a": cd.candidate.array_a, "b": cd.candidate.array_b },
                "subscript": expr_to_string(&cd.candidate.subscript),
                "function": cd.candidate.enclosing_function,
                "fields": cd.candidate.accessed_fields,
                "decision": cd.decision,
                "checks": cd.checks,
            })).collect::<Vec<_>>(),
            "modification_sites": self.modification_sites,
            "invalid_paths": self.invalid_paths,
        })
    }
}

// ---------------------------------------------------------------------------
// Call graph
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CallEdge {
    pub caller: String,
    pub callee: String,
    pub call_site: StmtPath,
    /// Call site lexically enclosed in a serial loop within the caller.
    pub serial_loop: bool,
    /// Call site lexically enclosed in a forall within the caller.
    pub parallel: bool,
}

#[derive(Debug, Clone)]
pub struct CallGraph {
    pub entry: String,
    pub nodes: Vec<String>,
    pub edges: Vec<CallEdge>,
}

#[derive(Debug, Clone)]
pub struct CallPath {
    /// Edge indices into `CallGraph::edges`, entry outward.
    pub edges: Vec<usize>,
    pub has_cycle: bool,
}

impl CallGraph {
    /// Enumerates acyclic call paths from the entry to `target`; a path that
    /// would revisit a function is cut there and flagged cyclic.
    pub fn paths_to(&self, target: &str) -> Vec<CallPath> {
        let mut out = Vec::new();
        if target == self.entry {
            out.push(CallPath {
                edges: Vec::new(),
                has_cycle: false,
            });
        }
        let mut stack: Vec<String> = vec![self.entry.clone()];
        let mut edges: Vec<usize> = Vec::new();
        self.dfs(&self.entry, target, &mut stack, &mut edges, &mut out);
        out
    }

    fn dfs(
        &self,
        cur: &str,
        target: &str,
        stack: &mut Vec<String>,
        edges: &mut Vec<usize>,
        out: &mut Vec<CallPath>,
    ) {
        for (i, e) in self.edges.iter().enumerate() {
            if e.caller != cur {
                continue;
            }
            if stack.contains(&e.callee) {
                // recursion back into the current chain
                if e.callee == target || stack.last().map(String::as_str) == Some(target) {
                    let mut p = edges.clone();
                    p.push(i);
                    out.push(CallPath {
                        edges: p,
                        has_cycle: true,
                    });
                }
                continue;
            }
            edges.push(i);
            if e.callee == target {
                out.push(CallPath {
                    edges: edges.clone(),
                    has_cycle: false,
                });
            }
            stack.push(e.callee.clone());
            self.dfs(&e.callee, target, stack, edges, out);
            stack.pop();
            edges.pop();
        }
    }

    /// True when `func` is only reachable through forall bodies.
    pub fn parallel_context(&self, func: &str) -> bool {
        let paths = self.paths_to(func);
        !paths.is_empty() && paths.iter().all(|p| self.path_parallel(p))
    }

    pub fn path_parallel(&self, p: &CallPath) -> bool {
        p.edges.iter().any(|&i| self.edges[i].parallel)
    }

    pub fn path_has_serial_edge(&self, p: &CallPath) -> bool {
        p.edges.iter().any(|&i| self.edges[i].serial_loop)
    }
}

pub fn build_call_graph(program: &Program) -> CallGraph {
    let mut edges = Vec::new();
    for f in &program.functions {
        let mut walker = CallWalker {
            caller: &f.name,
            serial_depth: 0,
            parallel_depth: 0,
            edges: &mut edges,
        };
        walker.walk(&f.body, &mut vec![]);
    }
    CallGraph {
        entry: program.entry.clone(),
        nodes: program.functions.iter().map(|f| f.name.clone()).collect(),
        edges,
    }
}

struct CallWalker<'a> {
    caller: &'a str,
    serial_depth: usize,
    parallel_depth: usize,
    edges: &'a mut Vec<CallEdge>,
}

impl<'a> CallWalker<'a> {
    fn walk(&mut self, body: &[Stmt], indices: &mut Vec<usize>) {
        for (i, s) in body.iter().enumerate() {
            indices.push(i);
            let path = StmtPath::new(self.caller, indices.clone());
            let mut callees: Vec<String> = Vec::new();
            if let Stmt::Call { name, args } = s {
                callees.push(name.clone());
                for a in args {
                    collect_expr_calls(a, &mut callees);
                }
            } else {
                for e in stmt_exprs(s) {
                    collect_expr_calls(e, &mut callees);
                }
            }
            for callee in callees {
                self.edges.push(CallEdge {
                    caller: self.caller.to_string(),
                    callee,
                    call_site: path.clone(),
                    serial_loop: self.serial_depth > 0,
                    parallel: self.parallel_depth > 0,
                });
            }
            match s {
                Stmt::Forall { body, .. } => {
                    self.parallel_depth += 1;
                    self.walk(body, indices);
                    self.parallel_depth -= 1;
                }
                Stmt::For { body, .. } | Stmt::While { body, .. } => {
                    self.serial_depth += 1;
                    self.walk(body, indices);
                    self.serial_depth -= 1;
                }
                Stmt::InspectorGuard { body, .. } => self.walk(body, indices),
                _ => {}
            }
            indices.pop();
        }
    }
}

fn collect_expr_calls(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::Call { name, args } => {
            out.push(name.clone());
            for a in args {
                collect_expr_calls(a, out);
            }
        }
        Expr::Index { target, subscript } => {
            collect_expr_calls(target, out);
            collect_expr_calls(subscript, out);
        }
        Expr::Field { target, .. } => collect_expr_calls(target, out),
        Expr::Binop { lhs, rhs, .. } => {
            collect_expr_calls(lhs, out);
            collect_expr_calls(rhs, out);
        }
        Expr::DomainOf(x) | Expr::Abs(x) | Expr::InspectorIterator(x) => {
            collect_expr_calls(x, out)
        }
        Expr::Range { lo, hi } => {
            collect_expr_calls(lo, out);
            collect_expr_calls(hi, out);
        }
        Expr::ExecuteAccess { subscript, .. } => collect_expr_calls(subscript, out),
        _ => {}
    }
}

/// Expressions evaluated by a statement (read positions; lvalue subscripts
/// included, lvalue roots excluded).
fn stmt_exprs(s: &Stmt) -> Vec<&Expr> {
    match s {
        Stmt::Forall { iterand, .. } | Stmt::For { iterand, .. } => vec![iterand],
        Stmt::While { cond, .. } => vec![cond],
        Stmt::Assign { lhs, rhs, .. } => {
            let mut v = lvalue_read_exprs(lhs);
            v.push(rhs);
            v
        }
        Stmt::Call { args, .. } => args.iter().collect(),
        Stmt::DomAdd { index, .. } | Stmt::DomRemove { index, .. } => vec![index],
        Stmt::LocalVar { init, .. } => init.iter().collect(),
        Stmt::Return(v) => v.iter().collect(),
        Stmt::InspectCall { subscript, .. } => vec![subscript],
        _ => Vec::new(),
    }
}

fn lvalue_read_exprs(lhs: &Expr) -> Vec<&Expr> {
    match lhs {
        Expr::Index { target, subscript } => {
            let mut v = lvalue_read_exprs(target);
            v.push(subscript);
            v
        }
        Expr::Field { target, .. } => lvalue_read_exprs(target),
        _ => Vec::new(),
    }
}

// ---------------------------------------------------------------------------
// Candidate discovery
// ---------------------------------------------------------------------------

/// Finds every expression inside a forall body with the shape `A[f(B[...])]`
/// where A is a distributed array. Occurrences of the same (A, B, subscript)
/// triple within one forall unify into a single candidate with merged
/// accessed-field sets.
pub fn find_candidates(program: &Program) -> Vec<Candidate> {
    let mut found: Vec<Candidate> = Vec::new();
    for f in &program.functions {
        let mut w = CandWalker {
            program,
            function: &f.name,
            loops: Vec::new(),
            found: &mut found,
        };
        w.walk(&f.body, &mut vec![]);
    }
    for (i, c) in found.iter_mut().enumerate() {
        c.site = i as u32;
    }
    found
}

struct CandWalker<'a> {
    program: &'a Program,
    function: &'a str,
    loops: Vec<LoopDesc>,
    found: &'a mut Vec<Candidate>,
}

impl<'a> CandWalker<'a> {
    fn walk(&mut self, body: &[Stmt], indices: &mut Vec<usize>) {
        for (i, s) in body.iter().enumerate() {
            indices.push(i);
            let path = StmtPath::new(self.function, indices.clone());
            for e in stmt_exprs(s) {
                self.scan_expr(e, &path, None);
            }
            match s {
                Stmt::Forall { var, iterand, body }
                | Stmt::For { var, iterand, body } => {
                    let is_forall = matches!(s, Stmt::Forall { .. });
                    self.loops.push(LoopDesc {
                        is_forall,
                        var: var.clone(),
                        iterand: Some(iterand.clone()),
                        path: path.clone(),
                    });
                    self.walk(body, indices);
                    self.loops.pop();
                }
                Stmt::While { body, .. } => {
                    self.loops.push(LoopDesc {
                        is_forall: false,
                        var: String::new(),
                        iterand: None,
                        path: path.clone(),
                    });
                    self.walk(body, indices);
                    self.loops.pop();
                }
                Stmt::InspectorGuard { body, .. } => self.walk(body, indices),
                _ => {}
            }
            indices.pop();
        }
    }

    fn scan_expr(&mut self, e: &Expr, stmt_path: &StmtPath, field: Option<&str>) {
        if let Expr::Index { target, subscript } = e {
            if let Expr::Var(name) = target.as_ref() {
                let a_root = self.program.resolve_alias(name);
                if self.program.is_distributed_array(&a_root) {
                    if let Some((b_root, _)) = single_inner_index(self.program, subscript) {
                        self.record(&a_root, &b_root, subscript, stmt_path, field);
                    }
                }
            }
        }
        match e {
            Expr::Index { target, subscript } => {
                self.scan_expr(target, stmt_path, None);
                self.scan_expr(subscript, stmt_path, None);
            }
            Expr::Field { target, field } => {
                self.scan_expr(target, stmt_path, Some(field));
            }
            Expr::Binop { lhs, rhs, .. } => {
                self.scan_expr(lhs, stmt_path, None);
                self.scan_expr(rhs, stmt_path, None);
            }
            Expr::DomainOf(x) | Expr::Abs(x) | Expr::InspectorIterator(x) => {
                self.scan_expr(x, stmt_path, None)
            }
            Expr::Range { lo, hi } => {
                self.scan_expr(lo, stmt_path, None);
                self.scan_expr(hi, stmt_path, None);
            }
            Expr::Call { args, .. } => {
                for a in args {
                    self.scan_expr(a, stmt_path, None);
                }
            }
            Expr::ExecuteAccess { subscript, .. } => self.scan_expr(subscript, stmt_path, None),
            _ => {}
        }
    }

    fn record(
        &mut self,
        a_root: &str,
        b_root: &str,
        subscript: &Expr,
        stmt_path: &StmtPath,
        field: Option<&str>,
    ) {
        // nearest forall ancestor owns the candidate
        let Some(forall_pos) = self.loops.iter().rposition(|l| l.is_forall) else {
            return;
        };
        let forall = self.loops[forall_pos].clone();
        let chain: Vec<LoopDesc> = self.loops[forall_pos..].to_vec();
        let ancestors: Vec<LoopDesc> = self.loops[..forall_pos].to_vec();
        let occurrence = Occurrence {
            stmt_path: stmt_path.clone(),
            chain,
        };
        if let Some(existing) = self.found.iter_mut().find(|c| {
            c.loop_path == forall.path
                && c.array_a == a_root
                && c.array_b == b_root
                && &c.subscript == subscript
        }) {
            match field {
                Some(f) if !existing.accessed_fields.is_empty() => {
                    existing.accessed_fields.insert(f.to_string());
                }
                Some(_) => {} // whole-element access already recorded
                None => existing.accessed_fields.clear(),
            }
            existing.occurrences.push(occurrence);
            return;
        }
        let mut fields = BTreeSet::new();
        if let Some(f) = field {
            fields.insert(f.to_string());
        }
        self.found.push(Candidate {
            site: 0,
            loop_path: forall.path.clone(),
            array_a: a_root.to_string(),
            array_b: b_root.to_string(),
            subscript: subscript.clone(),
            accessed_fields: fields,
            enclosing_function: self.function.to_string(),
            occurrences: vec![occurrence],
            ancestors,
            loop_var: forall.var.clone(),
            iterand: forall.iterand.clone().unwrap(),
        });
    }
}

/// If `e` contains exactly one `Index` node total, and that node's target is
/// a (non-distributed or distributed) array whose own subscript contains no
/// further index, returns (B-root, the inner subscript).
fn single_inner_index<'e>(program: &Program, e: &'e Expr) -> Option<(String, &'e Expr)> {
    let mut indexes = Vec::new();
    collect_indexes(e, &mut indexes);
    if indexes.len() != 1 {
        return None;
    }
    let (target, sub) = indexes[0];
    let mut inner = Vec::new();
    collect_indexes(sub, &mut inner);
    if !inner.is_empty() {
        return None;
    }
    match target {
        Expr::Var(n) => {
            let root = program.resolve_alias(n);
            program.array_domain(&root)?;
            Some((root, sub))
        }
        _ => None,
    }
}

fn collect_indexes<'e>(e: &'e Expr, out: &mut Vec<(&'e Expr, &'e Expr)>) {
    match e {
        Expr::Index { target, subscript } => {
            out.push((target, subscript));
            collect_indexes(subscript, out);
        }
        Expr::Field { target, .. } => collect_indexes(target, out),
        Expr::Binop { lhs, rhs, .. } => {
            collect_indexes(lhs, out);
            collect_indexes(rhs, out);
        }
        Expr::DomainOf(x) | Expr::Abs(x) | Expr::InspectorIterator(x) => collect_indexes(x, out),
        Expr::Range { lo, hi } => {
            collect_indexes(lo, out);
            collect_indexes(hi, out);
        }
        Expr::Call { args, .. } => {
            for a in args {
                collect_indexes(a, out);
            }
        }
        Expr::ExecuteAccess { subscript, .. } => collect_indexes(subscript, out),
        _ => {}
    }
}

// ---------------------------------------------------------------------------
// Write events
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct WriteEvent {
    pub path: StmtPath,
    /// Root name of the written array or domain.
    pub root: String,
    /// Field written, when the lvalue is a record field.
    pub field: Option<String>,
    pub is_domain: bool,
}

/// All write statements in `body` (array element/field assignments and
/// domain modifications), alias-resolved. When `expand_calls` is set the
/// bodies of called functions are scanned too (their events carry paths in
/// the callee).
pub fn write_events(
    program: &Program,
    function: &str,
    body: &[Stmt],
    base: &[usize],
    expand_calls: bool,
) -> Vec<WriteEvent> {
    let mut out = Vec::new();
    let mut visited: HashSet<String> = HashSet::new();
    collect_writes(
        program,
        function,
        body,
        &mut base.to_vec(),
        expand_calls,
        &mut visited,
        &mut out,
    );
    out
}

fn collect_writes(
    program: &Program,
    function: &str,
    body: &[Stmt],
    indices: &mut Vec<usize>,
    expand_calls: bool,
    visited: &mut HashSet<String>,
    out: &mut Vec<WriteEvent>,
) {
    for (i, s) in body.iter().enumerate() {
        indices.push(i);
        let path = StmtPath::new(function, indices.clone());
        match s {
            Stmt::Assign { lhs, .. } => {
                if let Some((root, field)) = lvalue_array_target(program, lhs) {
                    out.push(WriteEvent {
                        path: path.clone(),
                        root,
                        field,
                        is_domain: false,
                    });
                }
            }
            Stmt::DomAdd { domain, .. } | Stmt::DomRemove { domain, .. } => {
                out.push(WriteEvent {
                    path: path.clone(),
                    root: program.resolve_alias(domain),
                    field: None,
                    is_domain: true,
                });
            }
            _ => {}
        }
        let mut callees = Vec::new();
        if let Stmt::Call { name, .. } = s {
            callees.push(name.clone());
        }
        for e in stmt_exprs(s) {
            collect_expr_calls(e, &mut callees);
        }
        if expand_calls {
            for callee in callees {
                if visited.insert(callee.clone()) {
                    if let Some(f) = program.function(&callee) {
                        collect_writes(
                            program,
                            &f.name,
                            &f.body,
                            &mut Vec::new(),
                            expand_calls,
                            visited,
                            out,
                        );
                    }
                }
            }
        }
        if let Some(b) = s.body() {
            collect_writes(program, function, b, indices, expand_calls, visited, out);
        }
        indices.pop();
    }
}

/// For `X[...] = v`, `X[...].f = v` lvalues: the written array root and field.
fn lvalue_array_target(program: &Program, lhs: &Expr) -> Option<(String, Option<String>)> {
    match lhs {
        Expr::Index { target, .. } => match target.as_ref() {
            Expr::Var(n) => Some((program.resolve_alias(n), None)),
            _ => None,
        },
        Expr::Field { target, field } => match target.as_ref() {
            Expr::Index { target: t2, .. } => match t2.as_ref() {
                Expr::Var(n) => Some((program.resolve_alias(n), Some(field.clone()))),
                _ => None,
            },
            _ => None,
        },
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Qualifying loops and subscript analysis
// ---------------------------------------------------------------------------

/// For a chain of loops, determines which loops "iterate over an array or
/// domain" in the extended sense: plain arrays/domains qualify, and ranges
/// qualify when every bound leaf is an integer literal, the index variable
/// of an outer qualifying loop, or a record field of such a variable (the
/// CSR `row.start..row.end` shape).
fn qualifying_vars(program: &Program, chain: &[LoopDesc]) -> Vec<(String, bool)> {
    let mut quals: Vec<(String, bool)> = Vec::new();
    for l in chain {
        let q = match &l.iterand {
            None => false, // while loop
            Some(it) => iterand_qualifies(program, it, &quals),
        };
        quals.push((l.var.clone(), q && !l.var.is_empty()));
    }
    quals
}

fn iterand_qualifies(program: &Program, iterand: &Expr, outer: &[(String, bool)]) -> bool {
    match iterand {
        Expr::Var(n) => {
            let root = program.resolve_alias(n);
            matches!(
                program.decl(&root).map(|d| &d.kind),
                Some(DeclKind::Array { .. })
                    | Some(DeclKind::RectDomain { .. })
                    | Some(DeclKind::AssocDomain)
            )
        }
        Expr::DomainOf(_) => true,
        Expr::InspectorIterator(inner) => iterand_qualifies(program, inner, outer),
        Expr::Range { lo, hi } => range_leaf_ok(lo, outer) && range_leaf_ok(hi, outer),
        _ => false,
    }
}

fn range_leaf_ok(e: &Expr, outer: &[(String, bool)]) -> bool {
    let qualified = |v: &str| outer.iter().any(|(n, q)| n == v && *q);
    match e {
        Expr::IntLit(_) => true,
        Expr::Var(v) => qualified(v),
        Expr::Field { target, .. } => match target.as_ref() {
            Expr::Var(v) => qualified(v),
            _ => false,
        },
        Expr::Binop { op, lhs, rhs } if op.is_arith() => {
            range_leaf_ok(lhs, outer) && range_leaf_ok(rhs, outer)
        }
        _ => false,
    }
}

/// Non-affine expression analysis: every leaf of the subscript must be an
/// integer literal or the index variable of a qualifying loop; binary
/// operations are restricted to {+,-,*,/,%}. The single index into B is
/// analyzed recursively under the same rules.
pub fn analyze_subscript(
    program: &Program,
    subscript: &Expr,
    chain: &[LoopDesc],
) -> Result<(), String> {
    let quals = qualifying_vars(program, chain);
    subscript_ok(program, subscript, &quals)
}

fn subscript_ok(program: &Program, e: &Expr, quals: &[(String, bool)]) -> Result<(), String> {
    match e {
        Expr::IntLit(_) => Ok(()),
        Expr::Var(v) => {
            if quals.iter().any(|(n, q)| n == v && *q) {
                Ok(())
            } else {
                Err(format!(
                    "'{v}' is not yielded by a loop over an array or domain"
                ))
            }
        }
        Expr::Binop { op, lhs, rhs } => {
            if !op.is_arith() {
                return Err("subscript operations are limited to {+,-,*,/,%}".to_string());
            }
            subscript_ok(program, lhs, quals)?;
            subscript_ok(program, rhs, quals)
        }
        Expr::Index { subscript, .. } => subscript_ok(program, subscript, quals),
        Expr::Call { name, .. } => Err(format!("call '{name}' is not an analyzable leaf")),
        other => Err(format!(
            "'{}' is not an analyzable leaf",
            expr_to_string(other)
        )),
    }
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

/// Record fields of the forall's index variable that feed the access
/// pattern: fields used in range bounds of the occurrence chains.
fn pattern_fields(c: &Candidate) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for occ in &c.occurrences {
        for l in &occ.chain[1..] {
            if let Some(Expr::Range { lo, hi }) = &l.iterand {
                collect_var_fields(lo, &c.loop_var, &mut out);
                collect_var_fields(hi, &c.loop_var, &mut out);
            }
        }
    }
    out
}

fn collect_var_fields(e: &Expr, var: &str, out: &mut BTreeSet<String>) {
    match e {
        Expr::Field { target, field } => {
            if let Expr::Var(v) = target.as_ref() {
                if v == var {
                    out.insert(field.clone());
                }
            }
            collect_var_fields(target, var, out);
        }
        Expr::Binop { lhs, rhs, .. } => {
            collect_var_fields(lhs, var, out);
            collect_var_fields(rhs, var, out);
        }
        Expr::Index { target, subscript } => {
            collect_var_fields(target, var, out);
            collect_var_fields(subscript, var, out);
        }
        Expr::DomainOf(x) | Expr::Abs(x) | Expr::InspectorIterator(x) => {
            collect_var_fields(x, var, out)
        }
        Expr::Range { lo, hi } => {
            collect_var_fields(lo, var, out);
            collect_var_fields(hi, var, out);
        }
        _ => {}
    }
}

/// Objects whose modification changes the access pattern of the candidate:
/// B and its domain, A's domain, and the forall iterand (pattern fields
/// only, for record iterands) plus its domain.
struct Protected {
    b_root: String,
    b_domain: Option<String>,
    a_domain: Option<String>,
    iterand_array: Option<String>,
    iterand_domain: Option<String>,
    /// Pattern-feeding fields of the iterand array; `None` protects all
    /// value writes (scalar elements), a set protects only those fields.
    iterand_fields: Option<BTreeSet<String>>,
}

fn protected_objects(program: &Program, c: &Candidate) -> Protected {
    let b_domain = program
        .array_domain(&c.array_b)
        .map(|d| program.resolve_alias(d));
    let a_domain = program
        .array_domain(&c.array_a)
        .map(|d| program.resolve_alias(d));
    let (iterand_array, iterand_domain) = match &c.iterand {
        Expr::Var(n) => {
            let root = program.resolve_alias(n);
            if program.array_domain(&root).is_some() {
                let dom = program.array_domain(&root).map(|d| program.resolve_alias(d));
                (Some(root), dom)
            } else {
                (None, Some(root)) // iterand is a domain
            }
        }
        Expr::DomainOf(inner) => match inner.as_ref() {
            Expr::Var(n) => {
                let root = program.resolve_alias(n);
                if program.array_domain(&root).is_some() {
                    (None, program.array_domain(&root).map(|d| program.resolve_alias(d)))
                } else {
                    (None, Some(root))
                }
            }
            _ => (None, None),
        },
        _ => (None, None),
    };
    let iterand_fields = iterand_array.as_ref().map(|root| {
        match program.array_elem(root) {
            Some(ElemType::Record(_)) => Some(pattern_fields(c)),
            _ => None,
        }
    });
    Protected {
        b_root: c.array_b.clone(),
        b_domain,
        a_domain,
        iterand_array,
        iterand_domain,
        iterand_fields: iterand_fields.flatten(),
    }
}

/// Does a write event invalidate the candidate's schedule?
fn event_invalidates(c: &Candidate, p: &Protected, ev: &WriteEvent) -> bool {
    if ev.is_domain {
        return Some(&ev.root) == p.b_domain.as_ref()
            || Some(&ev.root) == p.a_domain.as_ref()
            || Some(&ev.root) == p.iterand_domain.as_ref();
    }
    if ev.root == p.b_root {
        return true;
    }
    if Some(&ev.root) == p.iterand_array.as_ref() && ev.root != c.array_a {
        return match (&p.iterand_fields, &ev.field) {
            (Some(fields), Some(f)) => fields.contains(f),
            (Some(_), None) => true, // whole-element write
            (None, _) => false,      // scalar iterand values do not feed the pattern
        };
    }
    if ev.root == c.array_a && Some(&ev.root) == p.iterand_array.as_ref() {
        // A is also the iterand (PageRank): pattern fields still matter
        return match (&p.iterand_fields, &ev.field) {
            (Some(fields), Some(f)) => fields.contains(f),
            (Some(_), None) => true,
            (None, _) => false,
        };
    }
    false
}

/// V4: writes to A that conflict with replication. Value writes to A are
/// allowed outside the forall; inside it they invalidate unless they touch
/// only record fields disjoint from the replicated set.
fn a_write_conflicts(program: &Program, c: &Candidate, ev: &WriteEvent) -> bool {
    if ev.is_domain || ev.root != c.array_a {
        return false;
    }
    match program.array_elem(&c.array_a) {
        Some(ElemType::Record(_)) => match &ev.field {
            None => true, // whole-element write
            Some(f) => c.accessed_fields.is_empty() || c.accessed_fields.contains(f),
        },
        _ => true,
    }
}

pub fn check_validity(program: &Program, cg: &CallGraph, c: &Candidate) -> Vec<CheckResult> {
    let mut out = Vec::new();

    // V1: forall iterand is a distributed array or domain (after aliasing)
    let v1 = match &c.iterand {
        Expr::Var(n) => {
            let root = program.resolve_alias(n);
            program.is_distributed_array(&root) || program.is_distributed_domain(&root)
        }
        Expr::DomainOf(inner) => match inner.as_ref() {
            Expr::Var(n) => {
                let root = program.resolve_alias(n);
                program.is_distributed_array(&root) || program.is_distributed_domain(&root)
            }
            _ => false,
        },
        _ => false,
    };
    out.push(if v1 {
        CheckResult::ok(CheckId::V1, "forall iterates over a distributed array/domain")
    } else {
        CheckResult::fail(
            CheckId::V1,
            format!(
                "forall iterand '{}' is not a distributed array or domain",
                expr_to_string(&c.iterand)
            ),
        )
    });

    // V2: not nested inside another forall, lexically or across the call graph
    let lex_nested = c.ancestors.iter().any(|l| l.is_forall);
    let paths = cg.paths_to(&c.enclosing_function);
    let reachable_serially = !paths.is_empty() && paths.iter().any(|p| !cg.path_parallel(p));
    let v2 = !lex_nested && reachable_serially;
    out.push(if v2 {
        CheckResult::ok(CheckId::V2, "forall is not nested inside a parallel construct")
    } else if lex_nested {
        CheckResult::fail(CheckId::V2, "forall is nested inside another forall")
    } else {
        CheckResult::fail(
            CheckId::V2,
            "every call path to the forall passes through a parallel construct",
        )
    });

    // V3: B's subscript uses the index variable of the loop immediately
    // containing the access, and that loop iterates over a domain or array
    let mut v3 = CheckResult::ok(
        CheckId::V3,
        "subscript is indexed by the immediately enclosing loop variable",
    );
    for occ in &c.occurrences {
        let innermost = occ.chain.last().unwrap();
        let quals = qualifying_vars(program, &occ.chain);
        let inner_qualifies = quals.last().map(|(_, q)| *q).unwrap_or(false);
        let b_sub = match single_inner_index(program, &c.subscript) {
            Some((_, sub)) => sub,
            None => {
                v3 = CheckResult::fail(CheckId::V3, "subscript lost its index into B");
                break;
            }
        };
        let mut vars = BTreeSet::new();
        b_sub.vars(&mut vars);
        if innermost.var.is_empty() || !vars.contains(&innermost.var) {
            v3 = CheckResult::fail(
                CheckId::V3,
                format!(
                    "index into '{}' does not use the immediately enclosing loop variable '{}'",
                    c.array_b, innermost.var
                ),
            );
            break;
        }
        if !inner_qualifies {
            v3 = CheckResult::fail(
                CheckId::V3,
                format!(
                    "loop over '{}' does not iterate over a domain or array",
                    innermost
                        .iterand
                        .as_ref()
                        .map(expr_to_string)
                        .unwrap_or_default()
                ),
            );
            break;
        }
    }
    out.push(v3);

    // V4: no pattern- or value-invalidating write to A, B or their domains
    // anywhere inside the forall body, including called functions
    let forall_stmt = stmt_at(program, &c.loop_path);
    let body = forall_stmt.and_then(|s| s.body()).cloned().unwrap_or_default();
    let events = write_events(
        program,
        &c.enclosing_function,
        &body,
        &c.loop_path.indices,
        true,
    );
    let p = protected_objects(program, c);
    let bad = events.iter().find(|ev| {
        event_invalidates(c, &p, ev)
            || a_write_conflicts(program, c, ev)
            || (ev.root == c.array_b)
            || (ev.is_domain && Some(&ev.root) == p.a_domain.as_ref())
    });
    out.push(match bad {
        None => CheckResult::ok(CheckId::V4, "no conflicting writes inside the forall"),
        Some(ev) => CheckResult::fail(
            CheckId::V4,
            format!("'{}' is modified within the forall", ev.root),
        ),
    });

    out
}

pub fn check_profitability(program: &Program, cg: &CallGraph, c: &Candidate) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let paths = cg.paths_to(&c.enclosing_function);
    let lex_serial = c.ancestors.iter().any(|l| !l.is_forall);
    let valid: Vec<&CallPath> = paths
        .iter()
        .filter(|p| {
            !p.has_cycle
                && !cg.path_parallel(p)
                && (lex_serial || cg.path_has_serial_edge(p))
        })
        .collect();

    // Pa: an outer serial loop encloses the forall on at least one call
    // path; paths without one are handled by runtime off-switches.
    out.push(if !valid.is_empty() {
        CheckResult::ok(CheckId::Pa, "forall is enclosed by an outer serial loop")
    } else {
        CheckResult::fail(CheckId::Pa, "forall has no enclosing outer serial loop")
    });

    // Pb/Pc: scan the innermost enclosing serial loop on each valid path.
    let mut pb = CheckResult::ok(
        CheckId::Pb,
        "B and its domain are not modified within the outer loop",
    );
    let mut pc = CheckResult::ok(
        CheckId::Pc,
        "A's domain is not modified within the outer loop",
    );
    let p = protected_objects(program, c);
    let mut regions: Vec<(String, StmtPath)> = Vec::new();
    if lex_serial {
        let innermost = c.ancestors.iter().rev().find(|l| !l.is_forall).unwrap();
        regions.push((c.enclosing_function.clone(), innermost.path.clone()));
    }
    for path in &valid {
        if lex_serial {
            continue; // the lexical loop is the innermost on every path
        }
        if let Some(&ei) = path
            .edges
            .iter()
            .rev()
            .find(|&&ei| cg.edges[ei].serial_loop)
        {
            let edge = &cg.edges[ei];
            // innermost serial loop lexically enclosing this call site
            if let Some(loop_path) =
                innermost_serial_loop(program, &edge.caller, &edge.call_site)
            {
                regions.push((edge.caller.clone(), loop_path));
            }
        }
    }
    regions.sort();
    regions.dedup();
    'outer: for (func, loop_path) in &regions {
        let f = program.function(func).unwrap();
        let loop_stmt = stmt_at(program, loop_path);
        let body = loop_stmt.and_then(|s| s.body()).cloned().unwrap_or_default();
        let events = write_events(program, &f.name, &body, &loop_path.indices, true);
        for ev in &events {
            // writes inside the candidate forall itself are V4's territory
            if c.loop_path.is_prefix_of(&ev.path) {
                continue;
            }
            if pb.passed && (ev.root == p.b_root || (ev.is_domain && Some(&ev.root) == p.b_domain.as_ref())) {
                pb = CheckResult::fail(
                    CheckId::Pb,
                    format!("'{}' is modified within the outer loop", ev.root),
                );
            }
            if pc.passed && ev.is_domain && Some(&ev.root) == p.a_domain.as_ref() {
                pc = CheckResult::fail(
                    CheckId::Pc,
                    format!("domain '{}' is modified within the outer loop", ev.root),
                );
            }
            if !pb.passed && !pc.passed {
                break 'outer;
            }
        }
    }
    out.push(pb);
    out.push(pc);
    out
}

/// Innermost for/while loop in `func` lexically enclosing `site`.
fn innermost_serial_loop(program: &Program, func: &str, site: &StmtPath) -> Option<StmtPath> {
    let f = program.function(func)?;
    let mut stmts = &f.body;
    let mut best: Option<StmtPath> = None;
    for depth in 0..site.indices.len() {
        let idx = site.indices[depth];
        let s = stmts.get(idx)?;
        let prefix = StmtPath::new(func, site.indices[..=depth].to_vec());
        if matches!(s, Stmt::For { .. } | Stmt::While { .. }) {
            best = Some(prefix);
        }
        match s.body() {
            Some(b) => stmts = b,
            None => break,
        }
    }
    best
}

pub fn find_invalid_paths(program: &Program, cg: &CallGraph, c: &Candidate) -> Vec<InvalidPath> {
    let _ = program;
    let paths = cg.paths_to(&c.enclosing_function);
    let lex_serial = c.ancestors.iter().any(|l| !l.is_forall);
    let is_valid = |p: &CallPath| {
        !p.has_cycle && !cg.path_parallel(p) && (lex_serial || cg.path_has_serial_edge(p))
    };
    let valid_edges: BTreeSet<StmtPath> = paths
        .iter()
        .filter(|p| is_valid(p))
        .flat_map(|p| p.edges.iter().map(|&i| cg.edges[i].call_site.clone()))
        .collect();
    let mut out = Vec::new();
    for p in paths.iter().filter(|p| !is_valid(p)) {
        if p.edges.is_empty() {
            continue; // the forall lives in entry: nothing to toggle; Pa covers it
        }
        let edges: Vec<StmtPath> = p.edges.iter().map(|&i| cg.edges[i].call_site.clone()).collect();
        // toggle at the first edge not shared with any valid path; if every
        // edge is shared, conservatively toggle the last one
        let toggle = edges
            .iter()
            .find(|e| !valid_edges.contains(*e))
            .unwrap_or_else(|| edges.last().unwrap())
            .clone();
        let reason = if p.has_cycle {
            "recursive call cycle".to_string()
        } else if cg.path_parallel(p) {
            "path passes through a parallel construct".to_string()
        } else {
            "path lacks an outer serial loop".to_string()
        };
        out.push(InvalidPath {
            site: c.site,
            edges,
            toggle,
            reason,
        });
    }
    out.sort_by(|a, b| a.edges.cmp(&b.edges));
    out.dedup_by(|a, b| a.edges == b.edges);
    out
}

/// Every statement outside the candidate forall that writes B, B's domain,
/// A's domain, or the pattern-feeding parts of the iterand — through any
/// alias. Writes to A's values are excluded (the executor preamble
/// refreshes replicas).
pub fn find_modification_sites(program: &Program, c: &Candidate) -> Vec<ModSite> {
    let p = protected_objects(program, c);
    let mut out = Vec::new();
    for f in &program.functions {
        let events = write_events(program, &f.name, &f.body, &[], false);
        for ev in events {
            if c.loop_path.is_prefix_of(&ev.path) {
                continue;
            }
            if event_invalidates(c, &p, &ev) {
                let mut pairs = BTreeSet::new();
                pairs.insert((c.array_a.clone(), c.array_b.clone()));
                out.push(ModSite {
                    path: ev.path,
                    object: ev.root,
                    pairs,
                });
            }
        }
    }
    out
}

/// Full analysis: per-candidate decisions plus modification sites and
/// invalid paths for the optimized sites.
pub fn decide(program: &Program) -> AnalysisReport {
    let cg = build_call_graph(program);
    let candidates = find_candidates(program);

    // group sizes per forall for the MULTI check
    let mut per_loop: BTreeMap<StmtPath, usize> = BTreeMap::new();
    for c in &candidates {
        *per_loop.entry(c.loop_path.clone()).or_default() += 1;
    }

    let mut report = AnalysisReport::default();
    for c in candidates {
        let mut checks = check_validity(program, &cg, &c);
        checks.extend(check_profitability(program, &cg, &c));

        // NA: non-affine subscript analysis over every occurrence
        let mut na = CheckResult::ok(CheckId::Na, "subscript leaves are immediates or loop indices");
        for occ in &c.occurrences {
            if let Err(msg) = analyze_subscript(program, &c.subscript, &occ.chain) {
                na = CheckResult::fail(CheckId::Na, msg);
                break;
            }
        }
        checks.push(na);

        let multi = per_loop[&c.loop_path] > 1;
        checks.push(if multi {
            CheckResult::fail(
                CheckId::Multi,
                "forall contains multiple irregular access candidates",
            )
        } else {
            CheckResult::ok(CheckId::Multi, "single candidate in the forall")
        });

        let invalid = find_invalid_paths(program, &cg, &c);
        checks.push(CheckResult::ok(
            CheckId::Ip,
            format!("{} invalid call path(s) handled by runtime off-switches", invalid.len()),
        ));

        let decision = if checks.iter().all(|r| r.passed) {
            Decision::Optimize
        } else {
            Decision::Revert
        };
        if decision == Decision::Optimize {
            report
                .modification_sites
                .extend(find_modification_sites(program, &c));
            report.invalid_paths.extend(invalid);
        }
        report.candidates.push(CandidateDecision {
            candidate: c,
            decision,
            checks,
        });
    }

    // merge modification sites at the same statement
    report.modification_sites.sort_by(|a, b| a.path.cmp(&b.path));
    let mut merged: Vec<ModSite> = Vec::new();
    for site in report.modification_sites.drain(..) {
        match merged.last_mut() {
            Some(last) if last.path == site.path => last.pairs.extend(site.pairs),
            _ => merged.push(site),
        }
    }
    report.modification_sites = merged;
    report
}

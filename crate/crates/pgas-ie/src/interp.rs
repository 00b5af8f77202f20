//! Deterministic interpreter over the simulated multi-locale machine.
//!
//! Forall loops execute their iterations in ascending index order, but each
//! iteration runs "on" the locale that owns the index, so every array access
//! is charged as local or remote exactly as a real PGAS execution would
//! issue it. Serial loops run on the locale of the enclosing context
//! (locale 0 at top level). The interpreter also executes the
//! inspector-executor intrinsics produced by the transformation, maintaining
//! one communication schedule per site.

use crate::ast::*;
use crate::runtime::*;
use serde_json::{json, Value as Json};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone)]
pub struct ExecConfig {
    pub num_locales: usize,
    pub cost: CostModel,
    /// Record per-forall remote-access traces (used by schedule oracles).
    pub trace: bool,
    /// Charge ownership queries into simulated time.
    pub count_query_time: bool,
    pub step_limit: u64,
    pub memory_limit_bytes: u64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            num_locales: 4,
            cost: CostModel::aries(),
            trace: false,
            count_query_time: false,
            step_limit: 500_000_000,
            memory_limit_bytes: 2 << 30,
        }
    }
}

/// Final value of a global scalar; equality is bit-exact for reals.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub enum OutValue {
    Int(i64),
    Real(f64),
}

impl PartialEq for OutValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (OutValue::Int(a), OutValue::Int(b)) => a == b,
            (OutValue::Real(a), OutValue::Real(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}
impl Eq for OutValue {}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct SiteStats {
    pub inspector_runs: u64,
    pub executor_runs: u64,
    /// Schedule snapshot (per-locale sorted index lists) after each inspection.
    pub inspections: Vec<Vec<Vec<i64>>>,
    pub replica_bytes: u64,
    pub array_bytes: u64,
    pub replica_ratio: f64,
}

/// Remote reads per array observed during the first execution of a forall,
/// keyed by `(locale, index)`.
pub type ForallTrace = BTreeMap<String, BTreeSet<(usize, i64)>>;

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outputs: BTreeMap<String, OutValue>,
    /// Final array contents; each element flattened to its fields.
    pub array_outputs: BTreeMap<String, Vec<Vec<OutValue>>>,
    pub per_locale: Vec<CommStats>,
    pub aggregate: CommStats,
    pub per_array: BTreeMap<String, ArrayCounters>,
    pub sites: BTreeMap<u32, SiteStats>,
    /// First-execution traces per forall, keyed by "function:i.j.k".
    pub traces: BTreeMap<String, ForallTrace>,
}

impl RunResult {
    pub fn to_json(&self) -> Json {
        json!({
            "outputs": self.outputs,
            "aggregate": stats_json(&self.aggregate),
            "per_locale": self.per_locale.iter().map(stats_json).collect::<Vec<_>>(),
            "per_array": self.per_array.iter().map(|(k, v)| (k.clone(), json!({
                "local_reads": v.local_reads,
                "remote_reads": v.remote_reads,
                "local_writes": v.local_writes,
                "remote_writes": v.remote_writes,
                "preamble_remote_reads": v.preamble_remote_reads,
            }))).collect::<BTreeMap<_, _>>(),
            "sites": self.sites.iter().map(|(k, v)| (k.to_string(), json!({
                "inspector_runs": v.inspector_runs,
                "executor_runs": v.executor_runs,
                "inspections": v.inspections.len(),
                "replica_bytes": v.replica_bytes,
                "array_bytes": v.array_bytes,
                "replica_ratio": v.replica_ratio,
            }))).collect::<BTreeMap<_, _>>(),
        })
    }
}

fn stats_json(s: &CommStats) -> Json {
    json!({
        "local_reads": s.local_reads,
        "remote_reads": s.remote_reads,
        "local_writes": s.local_writes,
        "remote_writes": s.remote_writes,
        "preamble_remote_reads": s.preamble_remote_reads,
        "inspector_ownership_queries": s.inspector_ownership_queries,
        "simulated_time": s.simulated_time,
        "inspector_time": s.inspector_time,
    })
}

/// Runs `program` to completion on a fresh simulated machine.
pub fn run(program: &Program, config: &ExecConfig) -> Result<RunResult, RuntimeError> {
    let mut interp = Interp::new(program, config)?;
    interp.run_entry()?;
    Ok(interp.finish())
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Flow {
    Normal,
    Return(Option<Value>),
}

struct RaceCtx {
    /// (array-or-scalar name, index, field) -> iteration ordinal of last write.
    writes: BTreeMap<(String, i64, i64), u64>,
    ordinal: u64,
}

struct Frame {
    scopes: Vec<BTreeMap<String, Value>>,
}

struct Interp<'p> {
    program: &'p Program,
    config: ExecConfig,
    machine: Machine,
    domains: BTreeMap<String, DistDomain>,
    assoc: BTreeMap<String, BTreeSet<i64>>,
    arrays: BTreeMap<String, DistArray>,
    scalars: BTreeMap<String, Value>,
    schedules: BTreeMap<u32, CommSchedule>,
    frames: Vec<Frame>,
    locale: usize,
    phase: Phase,
    steps: u64,
    races: Vec<RaceCtx>,
    // instrumentation
    inspector_runs: BTreeMap<u32, u64>,
    executor_runs: BTreeMap<u32, u64>,
    inspections: BTreeMap<u32, Vec<Vec<Vec<i64>>>>,
    traces: BTreeMap<String, ForallTrace>,
    active_trace: Option<String>,
}

impl<'p> Interp<'p> {
    fn new(program: &'p Program, config: &ExecConfig) -> Result<Self, RuntimeError> {
        let mut it = Interp {
            program,
            config: config.clone(),
            machine: Machine::new(config.num_locales, config.cost),
            domains: BTreeMap::new(),
            assoc: BTreeMap::new(),
            arrays: BTreeMap::new(),
            scalars: BTreeMap::new(),
            schedules: BTreeMap::new(),
            frames: vec![Frame { scopes: vec![BTreeMap::new()] }],
            locale: 0,
            phase: Phase::Normal,
            steps: 0,
            races: Vec::new(),
            inspector_runs: BTreeMap::new(),
            executor_runs: BTreeMap::new(),
            inspections: BTreeMap::new(),
            traces: BTreeMap::new(),
            active_trace: None,
        };
        it.machine.count_query_time = config.count_query_time;
        it.init_globals()?;
        it.init_schedules();
        Ok(it)
    }

    fn init_globals(&mut self) -> Result<(), RuntimeError> {
        let mut total_bytes: u64 = 0;
        for d in &self.program.globals {
            match &d.kind {
                DeclKind::RectDomain { dist, lo, hi } => {
                    self.domains.insert(
                        d.name.clone(),
                        DistDomain {
                            lo: *lo,
                            hi: *hi,
                            policy: Policy::from_distribution(*dist),
                            num_locales: self.config.num_locales,
                        },
                    );
                }
                DeclKind::AssocDomain => {
                    self.assoc.insert(d.name.clone(), BTreeSet::new());
                }
                DeclKind::Array { domain, elem, init } => {
                    let root = self.program.resolve_alias(domain);
                    let dom = self.domains.get(&root).copied().ok_or_else(|| {
                        RuntimeError::Unsupported(format!(
                            "array '{}' over non-rectangular domain '{root}'",
                            d.name
                        ))
                    })?;
                    let mut arr = DistArray::new(&d.name, dom, elem.clone());
                    if let Some(values) = init {
                        if values.len() as u64 != dom.len() {
                            return Err(RuntimeError::Unsupported(format!(
                                "initializer for '{}' has {} elements, domain has {}",
                                d.name,
                                values.len(),
                                dom.len()
                            )));
                        }
                        for (slot, v) in values.iter().enumerate() {
                            arr.data[slot] = init_value(v, elem)?;
                        }
                    }
                    total_bytes += arr.byte_size();
                    if total_bytes > self.config.memory_limit_bytes {
                        return Err(RuntimeError::MemoryGuard {
                            bytes: total_bytes,
                            limit: self.config.memory_limit_bytes,
                        });
                    }
                    self.arrays.insert(d.name.clone(), arr);
                }
                DeclKind::Scalar { ty, init } => {
                    let v = match init {
                        Some(Expr::IntLit(v)) => Value::Int(*v),
                        Some(Expr::RealLit(v)) => Value::Real(*v),
                        Some(e) => {
                            return Err(RuntimeError::Unsupported(format!(
                                "global '{}' initializer '{:?}' is not a literal",
                                d.name, e
                            )))
                        }
                        None => match ty {
                            Some(BaseType::Real) => Value::Real(0.0),
                            _ => Value::Int(0),
                        },
                    };
                    // `var x = 1.0` without a type annotation infers real
                    let v = match (ty, v) {
                        (Some(BaseType::Real), Value::Int(i)) => Value::Real(i as f64),
                        (_, v) => v,
                    };
                    self.scalars.insert(d.name.clone(), v);
                }
                DeclKind::RefAlias { .. } => {}
            }
        }
        Ok(())
    }

    /// One communication schedule per inspector site; the replicated field
    /// set is derived from how `executeAccess` results are consumed.
    fn init_schedules(&mut self) {
        let mut sites: Vec<(u32, String, String)> = Vec::new();
        for f in &self.program.functions {
            collect_sites(&f.body, &mut sites);
        }
        for (site, array_a, array_b) in sites {
            let fields = site_fields(self.program, site, &array_a);
            let root_a = self.program.resolve_alias(&array_a);
            let root_b = self.program.resolve_alias(&array_b);
            self.schedules.insert(
                site,
                CommSchedule::new(site, &root_a, &root_b, self.config.num_locales, fields),
            );
        }
    }

    fn finish(mut self) -> RunResult {
        let outputs = self
            .scalars
            .iter()
            .map(|(k, v)| {
                let ov = match v {
                    Value::Int(i) => OutValue::Int(*i),
                    Value::Real(r) => OutValue::Real(*r),
                    Value::Rec(_) => OutValue::Int(0),
                };
                (k.clone(), ov)
            })
            .collect();
        let mut sites = BTreeMap::new();
        for (site, sched) in &self.schedules {
            let mut st = SiteStats {
                inspector_runs: self.inspector_runs.get(site).copied().unwrap_or(0),
                executor_runs: self.executor_runs.get(site).copied().unwrap_or(0),
                inspections: self.inspections.remove(site).unwrap_or_default(),
                ..SiteStats::default()
            };
            if let Some(arr) = self.arrays.get(&sched.array_a) {
                let (rb, ab, ratio) = sched.replica_overhead(arr);
                st.replica_bytes = rb;
                st.array_bytes = ab;
                st.replica_ratio = ratio;
            }
            sites.insert(*site, st);
        }
        let array_outputs = self
            .arrays
            .iter()
            .map(|(name, arr)| {
                let rows = arr
                    .data
                    .iter()
                    .map(|v| match v {
                        Value::Int(i) => vec![OutValue::Int(*i)],
                        Value::Real(r) => vec![OutValue::Real(*r)],
                        Value::Rec(fs) => fs
                            .iter()
                            .map(|f| match f {
                                Value::Int(i) => OutValue::Int(*i),
                                Value::Real(r) => OutValue::Real(*r),
                                Value::Rec(_) => OutValue::Int(0),
                            })
                            .collect(),
                    })
                    .collect();
                (name.clone(), rows)
            })
            .collect();
        RunResult {
            outputs,
            array_outputs,
            aggregate: self.machine.aggregate(),
            per_locale: self.machine.per_locale.clone(),
            per_array: self.machine.per_array.clone(),
            sites,
            traces: self.traces,
        }
    }

    fn run_entry(&mut self) -> Result<(), RuntimeError> {
        let main = self
            .program
            .function(&self.program.entry)
            .ok_or_else(|| RuntimeError::Unsupported("missing entry function".into()))?;
        let body = main.body.clone();
        self.exec_block(&body, &self.program.entry.clone(), &mut vec![])?;
        Ok(())
    }

    // -- statement execution ------------------------------------------------

    fn exec_block(
        &mut self,
        body: &[Stmt],
        function: &str,
        indices: &mut Vec<usize>,
    ) -> Result<Flow, RuntimeError> {
        for (i, s) in body.iter().enumerate() {
            indices.push(i);
            let flow = self.exec_stmt(s, function, indices)?;
            indices.pop();
            if flow != Flow::Normal {
                return Ok(flow);
            }
        }
        Ok(Flow::Normal)
    }

    fn tick(&mut self) -> Result<(), RuntimeError> {
        self.steps += 1;
        if self.steps > self.config.step_limit {
            return Err(RuntimeError::StepLimit);
        }
        Ok(())
    }

    fn exec_stmt(
        &mut self,
        s: &Stmt,
        function: &str,
        indices: &mut Vec<usize>,
    ) -> Result<Flow, RuntimeError> {
        self.tick()?;
        match s {
            Stmt::Forall { var, iterand, body } => {
                self.exec_forall(var, iterand, body, function, indices)
            }
            Stmt::For { var, iterand, body } => {
                let items = self.iteration_values(iterand, false)?;
                self.frames.last_mut().unwrap().scopes.push(BTreeMap::new());
                let mut flow = Flow::Normal;
                for (_, v) in items {
                    self.tick()?;
                    self.bind(var, v);
                    flow = self.exec_block(body, function, indices)?;
                    if flow != Flow::Normal {
                        break;
                    }
                }
                self.frames.last_mut().unwrap().scopes.pop();
                Ok(flow)
            }
            Stmt::While { cond, body } => {
                let mut flow = Flow::Normal;
                loop {
                    self.tick()?;
                    let c = self.eval(cond)?;
                    if as_int(&c)? == 0 {
                        break;
                    }
                    self.frames.last_mut().unwrap().scopes.push(BTreeMap::new());
                    flow = self.exec_block(body, function, indices)?;
                    self.frames.last_mut().unwrap().scopes.pop();
                    if flow != Flow::Normal {
                        break;
                    }
                }
                Ok(flow)
            }
            Stmt::Assign { lhs, op, rhs } => {
                self.exec_assign(lhs, *op, rhs)?;
                Ok(Flow::Normal)
            }
            Stmt::Call { name, args } => {
                self.call(name, args)?;
                Ok(Flow::Normal)
            }
            Stmt::DomAdd { domain, index } => {
                let idx = as_int(&self.eval(index)?)?;
                let root = self.program.resolve_alias(domain);
                match self.assoc.get_mut(&root) {
                    Some(set) => {
                        set.insert(idx);
                        Ok(Flow::Normal)
                    }
                    None => Err(RuntimeError::Unsupported(format!(
                        "domadd on non-associative domain '{root}'"
                    ))),
                }
            }
            Stmt::DomRemove { domain, index } => {
                let idx = as_int(&self.eval(index)?)?;
                let root = self.program.resolve_alias(domain);
                match self.assoc.get_mut(&root) {
                    Some(set) => {
                        set.remove(&idx);
                        Ok(Flow::Normal)
                    }
                    None => Err(RuntimeError::Unsupported(format!(
                        "domremove on non-associative domain '{root}'"
                    ))),
                }
            }
            Stmt::LocalVar { name, ty, init } => {
                let v = match init {
                    Some(e) => self.eval(e)?,
                    None => match ty {
                        Some(BaseType::Real) => Value::Real(0.0),
                        _ => Value::Int(0),
                    },
                };
                let v = match (ty, v) {
                    (Some(BaseType::Real), Value::Int(i)) => Value::Real(i as f64),
                    (_, v) => v,
                };
                self.bind(name, v);
                Ok(Flow::Normal)
            }
            Stmt::Return(e) => {
                let v = match e {
                    Some(e) => Some(self.eval(e)?),
                    None => None,
                };
                Ok(Flow::Return(v))
            }
            Stmt::InspectorGuard { site, body, .. } => {
                let live = self
                    .schedules
                    .get(site)
                    .map(|s| s.do_inspector())
                    .unwrap_or(false);
                if live {
                    *self.inspector_runs.entry(*site).or_default() += 1;
                    let prev = self.phase;
                    self.phase = Phase::Inspector;
                    let flow = self.exec_block(body, function, indices)?;
                    self.phase = prev;
                    if let Some(sched) = self.schedules.get(site) {
                        self.inspections
                            .entry(*site)
                            .or_default()
                            .push(sched.snapshot());
                    }
                    return Ok(flow);
                }
                Ok(Flow::Normal)
            }
            Stmt::InspectorPreamble { site, .. } => {
                if let Some(sched) = self.schedules.get_mut(site) {
                    sched.inspector_preamble();
                }
                Ok(Flow::Normal)
            }
            Stmt::InspectorOff { site, .. } => {
                if let Some(sched) = self.schedules.get_mut(site) {
                    sched.inspector_off();
                }
                Ok(Flow::Normal)
            }
            Stmt::ExecutorPreamble { site, array } => {
                let root = self.program.resolve_alias(array);
                *self.executor_runs.entry(*site).or_default() += 1;
                let sched = self.schedules.get_mut(site).ok_or_else(|| {
                    RuntimeError::Unsupported(format!("unknown site {site}"))
                })?;
                if sched.off == 0 {
                    let arr = self.arrays.get(&root).ok_or_else(|| {
                        RuntimeError::Unsupported(format!("unknown array '{root}'"))
                    })?;
                    sched.executor_preamble(&mut self.machine, arr)?;
                }
                Ok(Flow::Normal)
            }
            Stmt::InspectCall { site, array, subscript } => {
                let idx = as_int(&self.eval(subscript)?)?;
                let root = self.program.resolve_alias(array);
                let from = self.locale;
                let sched = self.schedules.get_mut(site).ok_or_else(|| {
                    RuntimeError::Unsupported(format!("unknown site {site}"))
                })?;
                let arr = self.arrays.get(&root).ok_or_else(|| {
                    RuntimeError::Unsupported(format!("unknown array '{root}'"))
                })?;
                sched.inspect_access(&mut self.machine, arr, idx, from)?;
                Ok(Flow::Normal)
            }
            Stmt::SetStale { array_a, array_b } => {
                let a = self.program.resolve_alias(array_a);
                let b = self.program.resolve_alias(array_b);
                for sched in self.schedules.values_mut() {
                    if sched.array_a == a && sched.array_b == b {
                        sched.set_stale();
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::OffSwitchOn { site } => {
                if let Some(sched) = self.schedules.get_mut(site) {
                    sched.off += 1;
                }
                Ok(Flow::Normal)
            }
            Stmt::OffSwitchOff { site } => {
                if let Some(sched) = self.schedules.get_mut(site) {
                    sched.off = sched.off.saturating_sub(1);
                }
                Ok(Flow::Normal)
            }
        }
    }

    fn exec_forall(
        &mut self,
        var: &str,
        iterand: &Expr,
        body: &[Stmt],
        function: &str,
        indices: &mut Vec<usize>,
    ) -> Result<Flow, RuntimeError> {
        let path_key = format!(
            "{function}:{}",
            indices
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(".")
        );
        let tracing = self.config.trace
            && self.active_trace.is_none()
            && !self.traces.contains_key(&path_key);
        if tracing {
            self.active_trace = Some(path_key.clone());
            self.traces.insert(path_key.clone(), ForallTrace::new());
        }

        let items = self.iteration_values(iterand, true)?;
        let saved_locale = self.locale;
        self.frames.last_mut().unwrap().scopes.push(BTreeMap::new());
        self.races.push(RaceCtx {
            writes: BTreeMap::new(),
            ordinal: 0,
        });
        let mut flow = Flow::Normal;
        for (ord, (locale, v)) in items.into_iter().enumerate() {
            self.tick()?;
            self.locale = locale.unwrap_or(saved_locale);
            self.races.last_mut().unwrap().ordinal = ord as u64;
            self.bind(var, v);
            flow = self.exec_block(body, function, indices)?;
            if flow != Flow::Normal {
                break;
            }
        }
        self.races.pop();
        self.frames.last_mut().unwrap().scopes.pop();
        self.locale = saved_locale;
        if tracing {
            self.active_trace = None;
        }
        Ok(flow)
    }

    /// Iteration sequence: (target locale or None, bound value). Foralls see
    /// a locale per item; serial loops get None (stay on current locale).
    /// The `inspectorIterator` wrapper reorders iterations locale-by-locale.
    fn iteration_values(
        &mut self,
        iterand: &Expr,
        parallel: bool,
    ) -> Result<Vec<(Option<usize>, Value)>, RuntimeError> {
        if let Expr::InspectorIterator(inner) = iterand {
            let mut items = self.iteration_values(inner, parallel)?;
            items.sort_by_key(|(loc, _)| loc.unwrap_or(0));
            return Ok(items);
        }
        match iterand {
            Expr::Var(n) => {
                let root = self.program.resolve_alias(n);
                if let Some(dom) = self.domains.get(&root).copied() {
                    return Ok(self.domain_items(&dom, parallel));
                }
                if let Some(set) = self.assoc.get(&root) {
                    // associative domains are locale-0 resident
                    let target = if parallel { Some(0) } else { None };
                    return Ok(set.iter().map(|&i| (target, Value::Int(i))).collect());
                }
                if self.arrays.contains_key(&root) {
                    return self.array_items(&root, parallel);
                }
                Err(RuntimeError::Unsupported(format!(
                    "cannot iterate over '{n}'"
                )))
            }
            Expr::DomainOf(inner) => match inner.as_ref() {
                Expr::Var(n) => {
                    let root = self.program.resolve_alias(n);
                    let dom_root = match self.program.array_domain(&root) {
                        Some(d) => self.program.resolve_alias(d),
                        None => root,
                    };
                    if let Some(dom) = self.domains.get(&dom_root).copied() {
                        return Ok(self.domain_items(&dom, parallel));
                    }
                    if let Some(set) = self.assoc.get(&dom_root) {
                        let target = if parallel { Some(0) } else { None };
                        return Ok(set.iter().map(|&i| (target, Value::Int(i))).collect());
                    }
                    Err(RuntimeError::Unsupported(format!("'{n}' has no domain")))
                }
                _ => Err(RuntimeError::Unsupported(
                    "'.domain' applies to named arrays and domains".into(),
                )),
            },
            Expr::Range { lo, hi } => {
                let lo = as_int(&self.eval(lo)?)?;
                let hi = as_int(&self.eval(hi)?)?;
                // ranges are not distributed: iterations stay on the
                // current locale even under a forall
                Ok((lo..=hi).map(|i| (None, Value::Int(i))).collect())
            }
            other => Err(RuntimeError::Unsupported(format!(
                "cannot iterate over '{}'",
                crate::printer::expr_to_string(other)
            ))),
        }
    }

    fn domain_items(&self, dom: &DistDomain, parallel: bool) -> Vec<(Option<usize>, Value)> {
        (dom.lo..=dom.hi)
            .map(|i| {
                let target = if parallel { Some(dom.owner_of(i)) } else { None };
                (target, Value::Int(i))
            })
            .collect()
    }

    /// Iterating an array yields element values; under a forall each element
    /// is read on its owning locale (a local read), serially they are read
    /// from the current locale.
    fn array_items(
        &mut self,
        root: &str,
        parallel: bool,
    ) -> Result<Vec<(Option<usize>, Value)>, RuntimeError> {
        let dom = self.arrays[root].domain;
        let mut out = Vec::with_capacity(dom.len() as usize);
        for i in dom.lo..=dom.hi {
            let from = if parallel { dom.owner_of(i) } else { self.locale };
            let v = self.read_elem(root, i, None, from)?;
            out.push((if parallel { Some(from) } else { None }, v));
        }
        Ok(out)
    }

    // -- reads and writes ---------------------------------------------------

    fn read_elem(
        &mut self,
        root: &str,
        index: i64,
        field: Option<usize>,
        from: usize,
    ) -> Result<Value, RuntimeError> {
        let arr = self
            .arrays
            .get(root)
            .ok_or_else(|| RuntimeError::Unsupported(format!("unknown array '{root}'")))?;
        let remote = arr.domain.owner_of(index) != from;
        let v = self.machine.read(arr, index, from, self.phase)?;
        if remote {
            if let Some(key) = &self.active_trace {
                self.traces
                    .get_mut(key)
                    .unwrap()
                    .entry(root.to_string())
                    .or_default()
                    .insert((from, index));
            }
        }
        Ok(match (v, field) {
            (Value::Rec(fs), Some(f)) => fs[f].clone(),
            (v, _) => v,
        })
    }

    fn write_elem(
        &mut self,
        root: &str,
        index: i64,
        field: Option<usize>,
        value: Value,
    ) -> Result<(), RuntimeError> {
        // write-race detection across iterations of every active forall
        let fkey = field.map(|f| f as i64).unwrap_or(-1);
        for ctx in &mut self.races {
            let key = (root.to_string(), index, fkey);
            if let Some(&prev) = ctx.writes.get(&key) {
                if prev != ctx.ordinal {
                    return Err(RuntimeError::WriteRace {
                        array: root.to_string(),
                        index,
                    });
                }
            }
            // whole-element writes conflict with any field write and vice versa
            if field.is_some() {
                if let Some(&prev) = ctx.writes.get(&(root.to_string(), index, -1)) {
                    if prev != ctx.ordinal {
                        return Err(RuntimeError::WriteRace {
                            array: root.to_string(),
                            index,
                        });
                    }
                }
            }
            ctx.writes.insert(key, ctx.ordinal);
        }
        let from = self.locale;
        let arr = self
            .arrays
            .get_mut(root)
            .ok_or_else(|| RuntimeError::Unsupported(format!("unknown array '{root}'")))?;
        let new_value = match field {
            None => coerce(value, &arr.elem)?,
            Some(f) => {
                let slot = arr.slot(index)?;
                let mut rec = match arr.data[slot].clone() {
                    Value::Rec(fs) => fs,
                    _ => {
                        return Err(RuntimeError::Unsupported(format!(
                            "field write to non-record array '{root}'"
                        )))
                    }
                };
                let fty = match &arr.elem {
                    ElemType::Record(fs) => fs[f].1,
                    _ => BaseType::Int,
                };
                rec[f] = coerce_base(value, fty)?;
                Value::Rec(rec)
            }
        };
        let phase = self.phase;
        let arr = self.arrays.get_mut(root).unwrap();
        self.machine.write(arr, index, from, phase, new_value)?;
        Ok(())
    }

    // -- assignment ----------------------------------------------------------

    fn exec_assign(&mut self, lhs: &Expr, op: AssignOp, rhs: &Expr) -> Result<(), RuntimeError> {
        match lhs {
            Expr::Var(name) => {
                let rv = self.eval(rhs)?;
                if self.lookup_local(name).is_some() {
                    let old = self.lookup_local(name).cloned().unwrap();
                    let nv = apply_assign(old, op, rv)?;
                    self.set_local(name, nv);
                    return Ok(());
                }
                if self.scalars.contains_key(name) {
                    // global scalar writes race across forall iterations
                    for ctx in &mut self.races {
                        let key = (format!("${name}"), 0, -1);
                        if let Some(&prev) = ctx.writes.get(&key) {
                            if prev != ctx.ordinal {
                                return Err(RuntimeError::WriteRace {
                                    array: name.clone(),
                                    index: 0,
                                });
                            }
                        }
                        ctx.writes.insert(key, ctx.ordinal);
                    }
                    let old = self.scalars[name].clone();
                    let nv = apply_assign(old, op, rv)?;
                    self.scalars.insert(name.clone(), nv);
                    return Ok(());
                }
                Err(RuntimeError::Unsupported(format!("unknown variable '{name}'")))
            }
            Expr::Index { target, subscript } => {
                let root = self.index_root(target)?;
                let idx = as_int(&self.eval(subscript)?)?;
                let rv = self.eval(rhs)?;
                let nv = match op {
                    AssignOp::Set => rv,
                    AssignOp::Add => {
                        let from = self.locale;
                        let old = self.read_elem(&root, idx, None, from)?;
                        add_values(old, rv)?
                    }
                };
                self.write_elem(&root, idx, None, nv)
            }
            Expr::Field { target, field } => match target.as_ref() {
                Expr::Index { target: t2, subscript } => {
                    let root = self.index_root(t2)?;
                    let idx = as_int(&self.eval(subscript)?)?;
                    let fidx = self.field_index(&root, field)?;
                    let rv = self.eval(rhs)?;
                    let nv = match op {
                        AssignOp::Set => rv,
                        AssignOp::Add => {
                            let from = self.locale;
                            let old = self.read_elem(&root, idx, Some(fidx), from)?;
                            add_values(old, rv)?
                        }
                    };
                    self.write_elem(&root, idx, Some(fidx), nv)
                }
                Expr::Var(name) if self.lookup_local(name).is_some() => {
                    // mutating a loop binding only changes the local copy
                    let rv = self.eval(rhs)?;
                    let Some(Value::Rec(mut rec)) = self.lookup_local(name).cloned() else {
                        return Err(RuntimeError::Unsupported(format!(
                            "'{name}' is not a record value"
                        )));
                    };
                    let fidx = self.local_field_index(name, field)?;
                    let old = rec[fidx].clone();
                    rec[fidx] = apply_assign(old, op, rv)?;
                    self.set_local(name, Value::Rec(rec));
                    Ok(())
                }
                _ => Err(RuntimeError::Unsupported(
                    "unsupported assignment target".into(),
                )),
            },
            _ => Err(RuntimeError::Unsupported(
                "unsupported assignment target".into(),
            )),
        }
    }

    fn index_root(&self, target: &Expr) -> Result<String, RuntimeError> {
        match target {
            Expr::Var(n) => Ok(self.program.resolve_alias(n)),
            _ => Err(RuntimeError::Unsupported(
                "indexed expression must be a named array".into(),
            )),
        }
    }

    fn field_index(&self, root: &str, field: &str) -> Result<usize, RuntimeError> {
        self.arrays
            .get(root)
            .and_then(|a| a.elem.field_index(field))
            .ok_or_else(|| {
                RuntimeError::Unsupported(format!("array '{root}' has no field '{field}'"))
            })
    }

    fn local_field_index(&self, name: &str, field: &str) -> Result<usize, RuntimeError> {
        // locals bound from record arrays keep the field order of the array
        // they came from; find any record array with this field name
        for f in self.frames.last().unwrap().scopes.iter().rev() {
            if f.contains_key(name) {
                break;
            }
        }
        for arr in self.arrays.values() {
            if let Some(i) = arr.elem.field_index(field) {
                return Ok(i);
            }
        }
        Err(RuntimeError::Unsupported(format!(
            "no record field '{field}'"
        )))
    }

    // -- expressions ----------------------------------------------------------

    fn eval(&mut self, e: &Expr) -> Result<Value, RuntimeError> {
        match e {
            Expr::IntLit(v) => Ok(Value::Int(*v)),
            Expr::RealLit(v) => Ok(Value::Real(*v)),
            Expr::Here => Ok(Value::Int(self.locale as i64)),
            Expr::Var(n) => {
                if let Some(v) = self.lookup_local(n) {
                    return Ok(v.clone());
                }
                if let Some(v) = self.scalars.get(n) {
                    return Ok(v.clone());
                }
                Err(RuntimeError::Unsupported(format!("unknown variable '{n}'")))
            }
            Expr::Index { target, subscript } => {
                let root = self.index_root(target)?;
                let idx = as_int(&self.eval(subscript)?)?;
                let from = self.locale;
                self.read_elem(&root, idx, None, from)
            }
            Expr::Field { target, field } => match target.as_ref() {
                Expr::Index { target: t2, subscript } => {
                    let root = self.index_root(t2)?;
                    let idx = as_int(&self.eval(subscript)?)?;
                    let fidx = self.field_index(&root, field)?;
                    let from = self.locale;
                    self.read_elem(&root, idx, Some(fidx), from)
                }
                Expr::ExecuteAccess { site, array, subscript } => {
                    let root = self.program.resolve_alias(array);
                    let fidx = self.field_index(&root, field)?;
                    self.execute_access(*site, &root, subscript, Some(fidx))
                }
                Expr::Var(n) => {
                    let v = self
                        .lookup_local(n)
                        .cloned()
                        .ok_or_else(|| {
                            RuntimeError::Unsupported(format!("unknown variable '{n}'"))
                        })?;
                    match v {
                        Value::Rec(fs) => {
                            let fidx = self.local_field_index(n, field)?;
                            Ok(fs[fidx].clone())
                        }
                        _ => Err(RuntimeError::Unsupported(format!(
                            "'{n}' is not a record value"
                        ))),
                    }
                }
                _ => Err(RuntimeError::Unsupported(
                    "unsupported field access".into(),
                )),
            },
            Expr::Binop { op, lhs, rhs } => {
                let a = self.eval(lhs)?;
                let b = self.eval(rhs)?;
                binop(*op, a, b)
            }
            Expr::Abs(x) => match self.eval(x)? {
                Value::Int(v) => Ok(Value::Int(v.abs())),
                Value::Real(v) => Ok(Value::Real(v.abs())),
                _ => Err(RuntimeError::Unsupported("abs of a record".into())),
            },
            Expr::Call { name, args } => self
                .call(name, args)?
                .ok_or_else(|| {
                    RuntimeError::Unsupported(format!("'{name}' returned no value"))
                }),
            Expr::ExecuteAccess { site, array, subscript } => {
                let root = self.program.resolve_alias(array);
                self.execute_access(*site, &root, subscript, None)
            }
            Expr::Range { .. } | Expr::DomainOf(_) | Expr::InspectorIterator(_) => Err(
                RuntimeError::Unsupported("iterator expression used as a value".into()),
            ),
        }
    }

    fn execute_access(
        &mut self,
        site: u32,
        root: &str,
        subscript: &Expr,
        field: Option<usize>,
    ) -> Result<Value, RuntimeError> {
        let idx = as_int(&self.eval(subscript)?)?;
        let from = self.locale;
        let sched = self
            .schedules
            .get(&site)
            .ok_or_else(|| RuntimeError::Unsupported(format!("unknown site {site}")))?;
        let arr = self
            .arrays
            .get(root)
            .ok_or_else(|| RuntimeError::Unsupported(format!("unknown array '{root}'")))?;
        sched.execute_access(&mut self.machine, arr, idx, from, field)
    }

    fn call(&mut self, name: &str, args: &[Expr]) -> Result<Option<Value>, RuntimeError> {
        let f = self
            .program
            .function(name)
            .ok_or_else(|| RuntimeError::Unsupported(format!("unknown function '{name}'")))?;
        if self.frames.len() >= 64 {
            return Err(RuntimeError::CallDepth);
        }
        let mut scope = BTreeMap::new();
        for (p, a) in f.params.iter().zip(args) {
            scope.insert(p.clone(), self.eval(a)?);
        }
        self.frames.push(Frame { scopes: vec![scope] });
        let body = f.body.clone();
        let fname = f.name.clone();
        let flow = self.exec_block(&body, &fname, &mut vec![])?;
        self.frames.pop();
        match flow {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(None),
        }
    }

    // -- scopes ---------------------------------------------------------------

    fn bind(&mut self, name: &str, v: Value) {
        self.frames
            .last_mut()
            .unwrap()
            .scopes
            .last_mut()
            .unwrap()
            .insert(name.to_string(), v);
    }

    fn lookup_local(&self, name: &str) -> Option<&Value> {
        self.frames
            .last()
            .unwrap()
            .scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name))
    }

    fn set_local(&mut self, name: &str, v: Value) {
        for s in self.frames.last_mut().unwrap().scopes.iter_mut().rev() {
            if s.contains_key(name) {
                s.insert(name.to_string(), v);
                return;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// site discovery helpers
// ---------------------------------------------------------------------------

fn collect_sites(body: &[Stmt], out: &mut Vec<(u32, String, String)>) {
    for s in body {
        if let Stmt::InspectorGuard { site, array_a, array_b, .. } = s {
            out.push((*site, array_a.clone(), array_b.clone()));
        }
        if let Some(b) = s.body() {
            collect_sites(b, out);
        }
    }
}

/// Field indices replicated for a site, from how `executeAccess(site, ...)`
/// results are consumed; any whole-element use replicates everything.
fn site_fields(program: &Program, site: u32, array_a: &str) -> Option<Vec<usize>> {
    let root = program.resolve_alias(array_a);
    let elem = program.array_elem(&root)?;
    if !matches!(elem, ElemType::Record(_)) {
        return None;
    }
    let mut fields: BTreeSet<usize> = BTreeSet::new();
    let mut whole = false;
    for f in &program.functions {
        scan_site_uses(&f.body, site, elem, &mut fields, &mut whole);
    }
    if whole || fields.is_empty() {
        None
    } else {
        Some(fields.into_iter().collect())
    }
}

fn scan_site_uses(
    body: &[Stmt],
    site: u32,
    elem: &ElemType,
    fields: &mut BTreeSet<usize>,
    whole: &mut bool,
) {
    fn scan_expr(
        e: &Expr,
        site: u32,
        elem: &ElemType,
        fields: &mut BTreeSet<usize>,
        whole: &mut bool,
        parent_field: Option<&str>,
    ) {
        if let Expr::ExecuteAccess { site: s, subscript, .. } = e {
            if *s == site {
                match parent_field.and_then(|f| elem.field_index(f)) {
                    Some(i) => {
                        fields.insert(i);
                    }
                    None => *whole = true,
                }
            }
            scan_expr(subscript, site, elem, fields, whole, None);
            return;
        }
        match e {
            Expr::Field { target, field } => {
                scan_expr(target, site, elem, fields, whole, Some(field))
            }
            Expr::Index { target, subscript } => {
                scan_expr(target, site, elem, fields, whole, None);
                scan_expr(subscript, site, elem, fields, whole, None);
            }
            Expr::Binop { lhs, rhs, .. } => {
                scan_expr(lhs, site, elem, fields, whole, None);
                scan_expr(rhs, site, elem, fields, whole, None);
            }
            Expr::DomainOf(x) | Expr::Abs(x) | Expr::InspectorIterator(x) => {
                scan_expr(x, site, elem, fields, whole, None)
            }
            Expr::Range { lo, hi } => {
                scan_expr(lo, site, elem, fields, whole, None);
                scan_expr(hi, site, elem, fields, whole, None);
            }
            Expr::Call { args, .. } => {
                for a in args {
                    scan_expr(a, site, elem, fields, whole, None);
                }
            }
            _ => {}
        }
    }
    for s in body {
        match s {
            Stmt::Forall { iterand, .. } | Stmt::For { iterand, .. } => {
                scan_expr(iterand, site, elem, fields, whole, None)
            }
            Stmt::While { cond, .. } => scan_expr(cond, site, elem, fields, whole, None),
            Stmt::Assign { lhs, rhs, .. } => {
                scan_expr(lhs, site, elem, fields, whole, None);
                scan_expr(rhs, site, elem, fields, whole, None);
            }
            Stmt::Call { args, .. } => {
                for a in args {
                    scan_expr(a, site, elem, fields, whole, None);
                }
            }
            Stmt::DomAdd { index, .. } | Stmt::DomRemove { index, .. } => {
                scan_expr(index, site, elem, fields, whole, None)
            }
            Stmt::LocalVar { init, .. } => {
                if let Some(e) = init {
                    scan_expr(e, site, elem, fields, whole, None)
                }
            }
            Stmt::Return(Some(e)) => scan_expr(e, site, elem, fields, whole, None),
            Stmt::InspectCall { subscript, .. } => {
                scan_expr(subscript, site, elem, fields, whole, None)
            }
            _ => {}
        }
        if let Some(b) = s.body() {
            scan_site_uses(b, site, elem, fields, whole);
        }
    }
}

// ---------------------------------------------------------------------------
// value helpers
// ---------------------------------------------------------------------------

fn init_value(v: &InitValue, elem: &ElemType) -> Result<Value, RuntimeError> {
    match (v, elem) {
        (InitValue::Int(i), ElemType::Int) => Ok(Value::Int(*i)),
        (InitValue::Int(i), ElemType::Real) => Ok(Value::Real(*i as f64)),
        (InitValue::Real(r), ElemType::Real) => Ok(Value::Real(*r)),
        (InitValue::Tuple(items), ElemType::Record(fields)) if items.len() == fields.len() => {
            let mut out = Vec::with_capacity(items.len());
            for (item, (_, ty)) in items.iter().zip(fields) {
                let base = match ty {
                    BaseType::Int => ElemType::Int,
                    BaseType::Real => ElemType::Real,
                };
                out.push(init_value(item, &base)?);
            }
            Ok(Value::Rec(out))
        }
        _ => Err(RuntimeError::Unsupported(
            "initializer does not match element type".into(),
        )),
    }
}

fn as_int(v: &Value) -> Result<i64, RuntimeError> {
    match v {
        Value::Int(i) => Ok(*i),
        _ => Err(RuntimeError::Unsupported(
            "expected an integer value".into(),
        )),
    }
}

fn coerce(v: Value, elem: &ElemType) -> Result<Value, RuntimeError> {
    match (v, elem) {
        (Value::Int(i), ElemType::Real) => Ok(Value::Real(i as f64)),
        (v, _) => Ok(v),
    }
}

fn coerce_base(v: Value, ty: BaseType) -> Result<Value, RuntimeError> {
    match (v, ty) {
        (Value::Int(i), BaseType::Real) => Ok(Value::Real(i as f64)),
        (v, _) => Ok(v),
    }
}

fn add_values(a: Value, b: Value) -> Result<Value, RuntimeError> {
    binop(BinOp::Add, a, b)
}

fn apply_assign(old: Value, op: AssignOp, v: Value) -> Result<Value, RuntimeError> {
    match op {
        AssignOp::Set => match old {
            // assigning an int into a real slot keeps the slot real
            Value::Real(_) => coerce(v, &ElemType::Real),
            _ => Ok(v),
        },
        AssignOp::Add => add_values(old, v),
    }
}

fn binop(op: BinOp, a: Value, b: Value) -> Result<Value, RuntimeError> {
    use BinOp::*;
    match (a, b) {
        (Value::Int(a), Value::Int(b)) => Ok(match op {
            Add => Value::Int(a.wrapping_add(b)),
            Sub => Value::Int(a.wrapping_sub(b)),
            Mul => Value::Int(a.wrapping_mul(b)),
            Div => {
                if b == 0 {
                    return Err(RuntimeError::DivideByZero);
                }
                Value::Int(a.wrapping_div(b))
            }
            Mod => {
                if b == 0 {
                    return Err(RuntimeError::DivideByZero);
                }
                Value::Int(a.rem_euclid(b))
            }
            Lt => Value::Int((a < b) as i64),
            Le => Value::Int((a <= b) as i64),
            Gt => Value::Int((a > b) as i64),
            Ge => Value::Int((a >= b) as i64),
            Eq => Value::Int((a == b) as i64),
            Ne => Value::Int((a != b) as i64),
        }),
        (a, b) => {
            let (x, y) = (to_real(a)?, to_real(b)?);
            Ok(match op {
                Add => Value::Real(x + y),
                Sub => Value::Real(x - y),
                Mul => Value::Real(x * y),
                Div => Value::Real(x / y),
                Mod => {
                    return Err(RuntimeError::Unsupported(
                        "'%' applies to integers only".into(),
                    ))
                }
                Lt => Value::Int((x < y) as i64),
                Le => Value::Int((x <= y) as i64),
                Gt => Value::Int((x > y) as i64),
                Ge => Value::Int((x >= y) as i64),
                Eq => Value::Int((x == y) as i64),
                Ne => Value::Int((x != y) as i64),
            })
        }
    }
}

fn to_real(v: Value) -> Result<f64, RuntimeError> {
    match v {
        Value::Int(i) => Ok(i as f64),
        Value::Real(r) => Ok(r),
        Value::Rec(_) => Err(RuntimeError::Unsupported(
            "record used in arithmetic".into(),
        )),
    }
}

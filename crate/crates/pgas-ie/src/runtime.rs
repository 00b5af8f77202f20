//! PGAS machine simulator: locales, block/cyclic distributions, distributed
//! arrays, communication schedules and exact communication accounting.
//!
//! The simulator is deterministic and single-threaded; all reads and writes
//! of array elements route through [`Machine`] counters attributed to the
//! issuing locale.

use crate::ast::{Distribution, ElemType};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RuntimeError {
    #[error("index {index} out of bounds for '{array}'")]
    OutOfBounds { array: String, index: i64 },
    #[error("site {site}: remote index {index} missing from communication schedule")]
    ScheduleMismatch { site: u32, index: i64 },
    #[error("conflicting writes to {array}[{index}] from different forall iterations")]
    WriteRace { array: String, index: i64 },
    #[error("integer division by zero")]
    DivideByZero,
    #[error("step limit exceeded (runaway loop?)")]
    StepLimit,
    #[error("simulated memory guard exceeded: {bytes} bytes > {limit} bytes")]
    MemoryGuard { bytes: u64, limit: u64 },
    #[error("{0}")]
    Unsupported(String),
    #[error("call depth limit exceeded")]
    CallDepth,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CostModel {
    pub c_local: u64,
    pub c_remote: u64,
}

impl CostModel {
    pub fn aries() -> Self {
        CostModel {
            c_local: 1,
            c_remote: 100,
        }
    }

    pub fn ibv() -> Self {
        CostModel {
            c_local: 1,
            c_remote: 400,
        }
    }

    pub fn custom(c_remote: u64) -> Self {
        CostModel {
            c_local: 1,
            c_remote,
        }
    }
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel::aries()
    }
}

/// Per-locale communication counters. All monotone non-decreasing in a run.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct CommStats {
    pub local_reads: u64,
    pub remote_reads: u64,
    pub local_writes: u64,
    pub remote_writes: u64,
    pub preamble_remote_reads: u64,
    pub inspector_ownership_queries: u64,
    pub simulated_time: u64,
    pub inspector_time: u64,
}

impl CommStats {
    pub fn add(&mut self, o: &CommStats) {
        self.local_reads += o.local_reads;
        self.remote_reads += o.remote_reads;
        self.local_writes += o.local_writes;
        self.remote_writes += o.remote_writes;
        self.preamble_remote_reads += o.preamble_remote_reads;
        self.inspector_ownership_queries += o.inspector_ownership_queries;
        self.simulated_time += o.simulated_time;
        self.inspector_time += o.inspector_time;
    }

    /// Remote reads including executor-preamble replication traffic.
    pub fn total_remote_reads(&self) -> u64 {
        self.remote_reads + self.preamble_remote_reads
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ArrayCounters {
    pub local_reads: u64,
    pub remote_reads: u64,
    pub local_writes: u64,
    pub remote_writes: u64,
    pub preamble_remote_reads: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Normal,
    Inspector,
    ExecutorPreamble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Block,
    Cyclic,
    Local(usize),
}

impl Policy {
    pub fn from_distribution(d: Distribution) -> Policy {
        match d {
            Distribution::Block => Policy::Block,
            Distribution::Cyclic => Policy::Cyclic,
            Distribution::Local => Policy::Local(0),
        }
    }
}

/// Dense integer-range index set with a distribution policy.
#[derive(Debug, Clone, Copy)]
pub struct DistDomain {
    pub lo: i64,
    pub hi: i64, // inclusive
    pub policy: Policy,
    pub num_locales: usize,
}

impl DistDomain {
    pub fn len(&self) -> u64 {
        (self.hi - self.lo + 1) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn contains(&self, index: i64) -> bool {
        index >= self.lo && index <= self.hi
    }

    /// Deterministic owner per policy. Block chunking uses ceil(N/P) with a
    /// possibly short last chunk.
    pub fn owner_of(&self, index: i64) -> usize {
        debug_assert!(self.contains(index));
        let off = (index - self.lo) as u64;
        match self.policy {
            Policy::Block => {
                let n = self.len();
                let p = self.num_locales as u64;
                let chunk = n.div_ceil(p);
                (off / chunk) as usize
            }
            Policy::Cyclic => (off % self.num_locales as u64) as usize,
            Policy::Local(owner) => owner,
        }
    }
}

/// Runtime element value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Rec(Vec<Value>),
}

impl Value {
    pub fn default_for(elem: &ElemType) -> Value {
        match elem {
            ElemType::Int => Value::Int(0),
            ElemType::Real => Value::Real(0.0),
            ElemType::Record(fields) => Value::Rec(
                fields
                    .iter()
                    .map(|(_, t)| match t {
                        crate::ast::BaseType::Int => Value::Int(0),
                        crate::ast::BaseType::Real => Value::Real(0.0),
                    })
                    .collect(),
            ),
        }
    }
}

/// Block-distributed (or local) dense array.
#[derive(Debug, Clone)]
pub struct DistArray {
    pub name: String,
    pub domain: DistDomain,
    pub elem: ElemType,
    pub data: Vec<Value>,
}

impl DistArray {
    pub fn new(name: &str, domain: DistDomain, elem: ElemType) -> Self {
        let data = vec![Value::default_for(&elem); domain.len() as usize];
        DistArray {
            name: name.to_string(),
            domain,
            elem,
            data,
        }
    }

    pub fn slot(&self, index: i64) -> Result<usize, RuntimeError> {
        if !self.domain.contains(index) {
            return Err(RuntimeError::OutOfBounds {
                array: self.name.clone(),
                index,
            });
        }
        Ok((index - self.domain.lo) as usize)
    }

    pub fn byte_size(&self) -> u64 {
        self.domain.len() * self.elem.byte_size()
    }
}

/// Machine-wide counters; one [`CommStats`] per locale plus per-array totals.
#[derive(Debug)]
pub struct Machine {
    pub num_locales: usize,
    pub cost: CostModel,
    pub per_locale: Vec<CommStats>,
    pub per_array: BTreeMap<String, ArrayCounters>,
    /// Ownership queries cost no simulated time unless this is set.
    pub count_query_time: bool,
}

impl Machine {
    pub fn new(num_locales: usize, cost: CostModel) -> Self {
        assert!(num_locales >= 1);
        Machine {
            num_locales,
            cost,
            per_locale: vec![CommStats::default(); num_locales],
            per_array: BTreeMap::new(),
            count_query_time: false,
        }
    }

    pub fn aggregate(&self) -> CommStats {
        let mut agg = CommStats::default();
        for s in &self.per_locale {
            agg.add(s);
        }
        agg
    }

    fn charge(&mut self, from: usize, remote: bool, write: bool, phase: Phase, array: &str) {
        let cost = if remote {
            self.cost.c_remote
        } else {
            self.cost.c_local
        };
        {
            let counters = self.per_array.entry(array.to_string()).or_default();
            match (write, remote) {
                (false, false) => counters.local_reads += 1,
                (false, true) => counters.remote_reads += 1,
                (true, false) => counters.local_writes += 1,
                (true, true) => counters.remote_writes += 1,
            }
        }
        let stats = &mut self.per_locale[from];
        match (write, remote) {
            (false, false) => stats.local_reads += 1,
            (false, true) => stats.remote_reads += 1,
            (true, false) => stats.local_writes += 1,
            (true, true) => stats.remote_writes += 1,
        }
        stats.simulated_time += cost;
        if phase == Phase::Inspector {
            stats.inspector_time += cost;
        }
    }

    /// Whole-element read of `arr[index]` issued from `from`.
    pub fn read(
        &mut self,
        arr: &DistArray,
        index: i64,
        from: usize,
        phase: Phase,
    ) -> Result<Value, RuntimeError> {
        let slot = arr.slot(index)?;
        let remote = arr.domain.owner_of(index) != from;
        self.charge(from, remote, false, phase, &arr.name);
        Ok(arr.data[slot].clone())
    }

    pub fn write(
        &mut self,
        arr: &mut DistArray,
        index: i64,
        from: usize,
        phase: Phase,
        value: Value,
    ) -> Result<(), RuntimeError> {
        let slot = arr.slot(index)?;
        let remote = arr.domain.owner_of(index) != from;
        self.charge(from, remote, true, phase, &arr.name);
        arr.data[slot] = value;
        Ok(())
    }
}

/// Replica slot: whole element for scalar arrays, or just the replicated
/// fields (in `replicated_fields` order) for record arrays.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplicaSlot {
    Pending,
    Whole(Value),
    Fields(Vec<Value>),
}

/// Per-site communication schedule: per-locale associative map from global
/// index to a replica slot, plus the staleness flag keyed by (A, B).
#[derive(Debug, Clone)]
pub struct CommSchedule {
    pub site: u32,
    pub array_a: String,
    pub array_b: String,
    pub per_locale: Vec<BTreeMap<i64, ReplicaSlot>>,
    /// Field indices into A's record element replicated for this site;
    /// `None` replicates the whole element.
    pub replicated_fields: Option<Vec<usize>>,
    pub stale: bool,
    /// Off-switch nesting count; the optimization is disabled while > 0.
    pub off: u64,
}

impl CommSchedule {
    pub fn new(
        site: u32,
        array_a: &str,
        array_b: &str,
        num_locales: usize,
        replicated_fields: Option<Vec<usize>>,
    ) -> Self {
        CommSchedule {
            site,
            array_a: array_a.to_string(),
            array_b: array_b.to_string(),
            per_locale: vec![BTreeMap::new(); num_locales],
            replicated_fields,
            stale: true,
            off: 0,
        }
    }

    pub fn do_inspector(&self) -> bool {
        self.stale && self.off == 0
    }

    pub fn set_stale(&mut self) {
        self.stale = true;
    }

    pub fn inspector_off(&mut self) {
        self.stale = false;
    }

    /// Clears all per-locale maps before a (re-)inspection.
    pub fn inspector_preamble(&mut self) {
        for m in &mut self.per_locale {
            m.clear();
        }
    }

    /// Records a would-be-remote access; performs no element read.
    pub fn inspect_access(
        &mut self,
        machine: &mut Machine,
        arr: &DistArray,
        index: i64,
        from: usize,
    ) -> Result<(), RuntimeError> {
        arr.slot(index)?;
        let c_local = machine.cost.c_local;
        let count_query_time = machine.count_query_time;
        let stats = &mut machine.per_locale[from];
        stats.inspector_ownership_queries += 1;
        if count_query_time {
            stats.simulated_time += c_local;
            stats.inspector_time += c_local;
        }
        if arr.domain.owner_of(index) != from {
            self.per_locale[from].entry(index).or_insert(ReplicaSlot::Pending);
        }
        Ok(())
    }

    /// Fetches each scheduled (locale, index) pair exactly once, refreshing
    /// replica slots with the current values in A.
    pub fn executor_preamble(
        &mut self,
        machine: &mut Machine,
        arr: &DistArray,
    ) -> Result<(), RuntimeError> {
        let c_remote = machine.cost.c_remote;
        for (locale, map) in self.per_locale.iter_mut().enumerate() {
            for (&index, slot) in map.iter_mut() {
                let s = arr.slot(index)?;
                let value = arr.data[s].clone();
                let stats = &mut machine.per_locale[locale];
                stats.preamble_remote_reads += 1;
                stats.simulated_time += c_remote;
                machine
                    .per_array
                    .entry(arr.name.clone())
                    .or_default()
                    .preamble_remote_reads += 1;
                *slot = match &self.replicated_fields {
                    None => ReplicaSlot::Whole(value),
                    Some(fields) => {
                        let rec = match value {
                            Value::Rec(fs) => fs,
                            _ => {
                                return Err(RuntimeError::Unsupported(format!(
                                    "replicated fields on non-record array '{}'",
                                    arr.name
                                )))
                            }
                        };
                        ReplicaSlot::Fields(fields.iter().map(|&f| rec[f].clone()).collect())
                    }
                };
            }
        }
        Ok(())
    }

    /// Whole-element or single-field optimized read.
    ///
    /// A remote index missing from the schedule while the site is live is an
    /// inspector/executor mismatch and aborts the run.
    pub fn execute_access(
        &self,
        machine: &mut Machine,
        arr: &DistArray,
        index: i64,
        from: usize,
        field: Option<usize>,
    ) -> Result<Value, RuntimeError> {
        if self.off > 0 {
            let v = machine.read(arr, index, from, Phase::Normal)?;
            return Ok(project(v, field));
        }
        match self.per_locale[from].get(&index) {
            Some(slot) => {
                machine.charge(from, false, false, Phase::Normal, &arr.name);
                match (slot, field, &self.replicated_fields) {
                    (ReplicaSlot::Whole(v), f, _) => Ok(project(v.clone(), f)),
                    (ReplicaSlot::Fields(vals), Some(f), Some(repl)) => {
                        let pos = repl.iter().position(|&r| r == f).ok_or_else(|| {
                            RuntimeError::Unsupported(format!(
                                "field {f} not replicated for site {}",
                                self.site
                            ))
                        })?;
                        Ok(vals[pos].clone())
                    }
                    _ => Err(RuntimeError::ScheduleMismatch {
                        site: self.site,
                        index,
                    }),
                }
            }
            None => {
                if arr.domain.owner_of(index) != from {
                    return Err(RuntimeError::ScheduleMismatch {
                        site: self.site,
                        index,
                    });
                }
                let v = machine.read(arr, index, from, Phase::Normal)?;
                Ok(project(v, field))
            }
        }
    }

    /// (replica-bytes, array-bytes, ratio).
    pub fn replica_overhead(&self, arr: &DistArray) -> (u64, u64, f64) {
        let entry_bytes = match &self.replicated_fields {
            None => arr.elem.byte_size(),
            Some(fields) => 8 * fields.len() as u64,
        };
        let entries: u64 = self.per_locale.iter().map(|m| m.len() as u64).sum();
        let replica_bytes = entries * entry_bytes;
        let array_bytes = arr.byte_size();
        let ratio = if array_bytes == 0 {
            0.0
        } else {
            replica_bytes as f64 / array_bytes as f64
        };
        (replica_bytes, array_bytes, ratio)
    }

    /// Sorted per-locale index sets, for oracles and reports.
    pub fn snapshot(&self) -> Vec<Vec<i64>> {
        self.per_locale
            .iter()
            .map(|m| m.keys().copied().collect())
            .collect()
    }
}

fn project(v: Value, field: Option<usize>) -> Value {
    match (v, field) {
        (Value::Rec(fs), Some(i)) => fs[i].clone(),
        (v, _) => v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_domain(lo: i64, hi: i64, locales: usize) -> DistDomain {
        DistDomain {
            lo,
            hi,
            policy: Policy::Block,
            num_locales: locales,
        }
    }

    #[test]
    fn block_owner_16_over_4() {
        let d = block_domain(0, 15, 4);
        assert_eq!(d.owner_of(5), 1);
        assert_eq!(d.owner_of(0), 0);
        assert_eq!(d.owner_of(15), 3);
    }

    #[test]
    fn cyclic_owner() {
        let d = DistDomain {
            lo: 0,
            hi: 15,
            policy: Policy::Cyclic,
            num_locales: 4,
        };
        assert_eq!(d.owner_of(5), 1);
        assert_eq!(d.owner_of(4), 0);
    }

    #[test]
    fn block_short_last_chunk() {
        // ceil(10/4)=3: chunks 0-2, 3-5, 6-8, 9
        let d = block_domain(0, 9, 4);
        let owners: Vec<usize> = (0..10).map(|i| d.owner_of(i)).collect();
        assert_eq!(owners, vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3]);
        // contiguous and complete partition
        for w in owners.windows(2) {
            assert!(w[1] == w[0] || w[1] == w[0] + 1);
        }
    }

    #[test]
    fn read_counters_and_time() {
        let d = block_domain(0, 15, 4);
        let arr = DistArray::new("a", d, ElemType::Int);
        let mut m = Machine::new(4, CostModel::default());
        m.read(&arr, 0, 0, Phase::Normal).unwrap();
        m.read(&arr, 5, 0, Phase::Normal).unwrap();
        assert_eq!(m.per_locale[0].local_reads, 1);
        assert_eq!(m.per_locale[0].remote_reads, 1);
        assert_eq!(m.per_locale[0].simulated_time, 101);
    }

    #[test]
    fn out_of_bounds_read() {
        let d = block_domain(0, 15, 4);
        let arr = DistArray::new("a", d, ElemType::Int);
        let mut m = Machine::new(4, CostModel::default());
        let err = m.read(&arr, 16, 0, Phase::Normal).unwrap_err();
        assert_eq!(
            err,
            RuntimeError::OutOfBounds {
                array: "a".to_string(),
                index: 16
            }
        );
    }

    #[test]
    fn stale_flag_protocol() {
        let mut s = CommSchedule::new(0, "a", "b", 2, None);
        assert!(s.do_inspector());
        s.inspector_off();
        assert!(!s.do_inspector());
        s.set_stale();
        assert!(s.do_inspector());
        s.off = 1;
        assert!(!s.do_inspector());
    }

    /// Worked example: 2 locales, A over {0..7} block, B = [1,6,6,2,5,0,3,7],
    /// forall over B.domain. Expected maps: loc0 {6}, loc1 {0, 3}.
    #[test]
    fn inspect_worked_example() {
        let d = block_domain(0, 7, 2);
        let a = DistArray::new("A", d, ElemType::Int);
        let mut m = Machine::new(2, CostModel::default());
        let mut s = CommSchedule::new(0, "A", "B", 2, None);
        let b = [1i64, 6, 6, 2, 5, 0, 3, 7];
        for (i, &idx) in b.iter().enumerate() {
            let from = d.owner_of(i as i64);
            s.inspect_access(&mut m, &a, idx, from).unwrap();
        }
        assert_eq!(s.snapshot(), vec![vec![6], vec![0, 3]]);
        // preamble fetches each entry exactly once
        s.executor_preamble(&mut m, &a).unwrap();
        let agg = m.aggregate();
        assert_eq!(agg.preamble_remote_reads, 3);
        // replica overhead: 3 entries x 8 bytes over 8 x 8 bytes
        let (rb, ab, ratio) = s.replica_overhead(&a);
        assert_eq!((rb, ab), (24, 64));
        assert!((ratio - 0.375).abs() < 1e-12);
        // ownership queries performed no element reads
        assert_eq!(agg.local_reads + agg.remote_reads, 0);
        assert_eq!(agg.inspector_ownership_queries, 8);
    }

    #[test]
    fn execute_access_redirects_to_replica() {
        let d = block_domain(0, 7, 2);
        let mut a = DistArray::new("A", d, ElemType::Int);
        a.data[6] = Value::Int(42);
        let mut m = Machine::new(2, CostModel::default());
        let mut s = CommSchedule::new(0, "A", "B", 2, None);
        s.inspect_access(&mut m, &a, 6, 0).unwrap();
        s.executor_preamble(&mut m, &a).unwrap();
        let before = m.aggregate();
        let v1 = s.execute_access(&mut m, &a, 6, 0, None).unwrap();
        let v2 = s.execute_access(&mut m, &a, 6, 0, None).unwrap();
        assert_eq!(v1, Value::Int(42));
        assert_eq!(v2, Value::Int(42));
        let after = m.aggregate();
        assert_eq!(after.local_reads - before.local_reads, 2);
        assert_eq!(after.remote_reads, before.remote_reads);
    }

    #[test]
    fn execute_access_mismatch_aborts() {
        let d = block_domain(0, 7, 2);
        let a = DistArray::new("A", d, ElemType::Int);
        let mut m = Machine::new(2, CostModel::default());
        let s = CommSchedule::new(0, "A", "B", 2, None);
        let err = s.execute_access(&mut m, &a, 6, 0, None).unwrap_err();
        assert_eq!(err, RuntimeError::ScheduleMismatch { site: 0, index: 6 });
    }

    #[test]
    fn off_switch_uses_direct_access() {
        let d = block_domain(0, 7, 2);
        let a = DistArray::new("A", d, ElemType::Int);
        let mut m = Machine::new(2, CostModel::default());
        let mut s = CommSchedule::new(0, "A", "B", 2, None);
        s.off = 1;
        s.execute_access(&mut m, &a, 6, 0, None).unwrap();
        assert_eq!(m.aggregate().remote_reads, 1);
    }
}

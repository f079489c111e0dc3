//! Exact improvement over stored pools of batches and schedules, and a
//! brute-force oracle for tiny instances.
//!
//! Nothing here calls an LP or MIP engine. The restricted master problems
//! are small enough at desk scale to be solved by depth-first
//! branch-and-bound with incumbent pruning.

mod cover;
mod oracle;
mod schedule;

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{CustomerId, Instance, LineId};
use crate::routing::vnd_improve;
use crate::solution::{route_duration, peak_load, Solution, LOAD_EPS};

pub use cover::{mip_op2, schedule_pool_select, CoverLimits};
pub use oracle::{brute_force_oracle, OracleLimits};
pub use schedule::{mip_op1, SCHEDULE_NODE_LIMIT};

pub const DEFAULT_POOL_CAPACITY: usize = 100_000;

/// A capacity-feasible route kept as a column of the restricted master.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledBatch {
    pub stops: Vec<LineId>,
    /// sorted line ids
    pub lines: Vec<LineId>,
    /// seconds
    pub duration: f64,
    /// travel cost
    pub cost: f64,
    #[serde(skip)]
    seen: u64,
}

impl PooledBatch {
    fn new(stops: Vec<LineId>, inst: &Instance) -> Self {
        let mut lines = stops.clone();
        lines.sort_unstable();
        let duration = route_duration(&stops, inst);
        Self {
            stops,
            lines,
            duration,
            cost: inst.params.travel_cost_rate * duration,
            seen: 0,
        }
    }
}

/// Unique batches seen during a search, keyed by line set.
///
/// Only the shortest known route per line set is kept; routes are
/// VND-improved on first entry. When the pool outgrows its capacity the
/// least recently seen quarter is dropped.
#[derive(Debug, Clone)]
pub struct BatchPool {
    entries: IndexMap<Vec<LineId>, PooledBatch>,
    capacity: usize,
    clock: u64,
}

impl Default for BatchPool {
    fn default() -> Self {
        Self::with_capacity(DEFAULT_POOL_CAPACITY)
    }
}

impl BatchPool {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            entries: IndexMap::new(),
            capacity: capacity.max(1),
            clock: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn batches(&self) -> impl Iterator<Item = &PooledBatch> {
        self.entries.values()
    }

    /// Adds a route; returns false for empty or overloaded routes.
    pub fn insert(&mut self, stops: &[LineId], inst: &Instance) -> bool {
        if stops.is_empty() || peak_load(stops, inst) > inst.params.capacity + LOAD_EPS {
            return false;
        }
        self.clock += 1;
        let mut key = stops.to_vec();
        key.sort_unstable();
        let duration = route_duration(stops, inst);
        if let Some(e) = self.entries.get_mut(&key) {
            e.seen = self.clock;
            if duration < e.duration - 1e-9 {
                let seen = e.seen;
                *e = PooledBatch::new(vnd_improve(stops, inst), inst);
                e.seen = seen;
            }
            return true;
        }
        let mut b = PooledBatch::new(vnd_improve(stops, inst), inst);
        b.seen = self.clock;
        self.entries.insert(key, b);
        if self.entries.len() > self.capacity {
            self.evict();
        }
        true
    }

    /// Adds every route of a solution.
    pub fn insert_solution(&mut self, sol: &Solution, inst: &Instance) {
        for s in &sol.schedules {
            for r in &s.routes {
                self.insert(&r.stops, inst);
            }
        }
    }

    fn evict(&mut self) {
        let keep = self.capacity * 3 / 4;
        let mut stamps: Vec<u64> = self.entries.values().map(|b| b.seen).collect();
        stamps.sort_unstable_by(|a, b| b.cmp(a));
        let cutoff = stamps[keep.min(stamps.len() - 1)];
        self.entries.retain(|_, b| b.seen > cutoff);
    }

    pub fn to_json(&self) -> String {
        let v: Vec<&PooledBatch> = self.entries.values().collect();
        serde_json::to_string_pretty(&v).expect("pool serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Restores a dump; routes are re-evaluated against `inst`.
    pub fn load(path: impl AsRef<Path>, inst: &Instance) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: Vec<PooledBatch> = serde_json::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let mut pool = BatchPool::default();
        for b in raw {
            if b.stops.iter().any(|&i| i >= inst.num_lines()) {
                return Err(Error::Input(format!(
                    "{}: pooled batch references unknown order line",
                    path.display()
                )));
            }
            pool.insert(&b.stops, inst);
        }
        Ok(pool)
    }
}

/// One picker's route sequence kept as a column of the schedule master.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledSchedule {
    pub routes: Vec<Vec<LineId>>,
    /// sorted line ids
    pub lines: Vec<LineId>,
    /// travel plus tardiness, with the first route starting at time 0
    pub cost: f64,
    /// number of (route, customer) pairs
    pub customer_visits: usize,
}

impl PooledSchedule {
    fn new(routes: Vec<Vec<LineId>>, inst: &Instance) -> Self {
        let (travel, tardiness, _) =
            crate::solution::picker_cost(routes.iter().map(|r| r.as_slice()), inst, 0.0);
        let mut lines: Vec<LineId> = routes.iter().flatten().copied().collect();
        lines.sort_unstable();
        let customer_visits = routes
            .iter()
            .map(|r| {
                let mut c: Vec<CustomerId> = r.iter().map(|&i| inst.line(i).customer).collect();
                c.sort_unstable();
                c.dedup();
                c.len()
            })
            .sum();
        Self {
            routes,
            lines,
            cost: travel + tardiness,
            customer_visits,
        }
    }
}

/// Unique capacity-feasible picker schedules seen during a search.
#[derive(Debug, Clone, Default)]
pub struct SchedulePool {
    entries: IndexMap<Vec<Vec<LineId>>, PooledSchedule>,
}

impl SchedulePool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn schedules(&self) -> impl Iterator<Item = &PooledSchedule> {
        self.entries.values()
    }

    /// Adds a schedule given as stop lists; overloaded or empty ones are
    /// rejected. Keeps the cheapest route orders per batch sequence.
    pub fn insert(&mut self, routes: &[Vec<LineId>], inst: &Instance) -> bool {
        if routes.is_empty()
            || routes.len() > inst.params.max_batches_per_picker
            || routes.iter().any(|r| {
                r.is_empty() || peak_load(r, inst) > inst.params.capacity + LOAD_EPS
            })
        {
            return false;
        }
        let key: Vec<Vec<LineId>> = routes
            .iter()
            .map(|r| {
                let mut k = r.clone();
                k.sort_unstable();
                k
            })
            .collect();
        let s = PooledSchedule::new(routes.to_vec(), inst);
        match self.entries.get_mut(&key) {
            Some(e) if s.cost < e.cost - 1e-12 => *e = s,
            Some(_) => {}
            None => {
                self.entries.insert(key, s);
            }
        }
        true
    }

    pub fn insert_solution(&mut self, sol: &Solution, inst: &Instance) {
        for s in &sol.schedules {
            let routes: Vec<Vec<LineId>> = s.routes.iter().map(|r| r.stops.clone()).collect();
            self.insert(&routes, inst);
        }
    }

    pub fn to_json(&self) -> String {
        let v: Vec<&PooledSchedule> = self.entries.values().collect();
        serde_json::to_string_pretty(&v).expect("pool serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, inst: &Instance) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: Vec<PooledSchedule> =
            serde_json::from_str(&text).map_err(|source| Error::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        let mut pool = SchedulePool::default();
        for s in raw {
            if s.routes.iter().flatten().any(|&i| i >= inst.num_lines()) {
                return Err(Error::Input(format!(
                    "{}: pooled schedule references unknown order line",
                    path.display()
                )));
            }
            pool.insert(&s.routes, inst);
        }
        Ok(pool)
    }
}

/// Fixed-size bit set over order line ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct LineSet(Vec<u64>);

impl LineSet {
    pub(crate) fn empty(n: usize) -> Self {
        LineSet(vec![0; n.div_ceil(64)])
    }

    pub(crate) fn from_lines(n: usize, lines: &[LineId]) -> Self {
        let mut s = Self::empty(n);
        for &i in lines {
            s.insert(i);
        }
        s
    }

    pub(crate) fn insert(&mut self, i: LineId) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub(crate) fn is_subset(&self, other: &LineSet) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }

    pub(crate) fn remove_all(&mut self, other: &LineSet) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a &= !b;
        }
    }

    pub(crate) fn add_all(&mut self, other: &LineSet) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }

    pub(crate) fn first(&self) -> Option<LineId> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(k, w)| k * 64 + w.trailing_zeros() as usize)
    }
}

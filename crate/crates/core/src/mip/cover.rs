//! Column selection over pooled batches and pooled schedules.

use rand::seq::SliceRandom;
use rand::Rng;

use super::schedule::{assemble, best_schedule, Job};
use super::{BatchPool, LineSet, SchedulePool};
use crate::error::{Error, Result};
use crate::instance::{CustomerId, Instance, LineId};
use crate::solution::{evaluate, Solution};

/// Minimum objective gain that counts as an improvement.
pub(crate) const IMPROVEMENT_EPS: f64 = 1e-9;

/// Search budgets of the restricted master solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverLimits {
    /// nodes of the column-selection tree
    pub node_limit: usize,
    /// nodes of each scheduling search under a complete cover
    pub schedule_node_limit: usize,
    /// complete covers handed to the scheduler
    pub cover_limit: usize,
}

impl Default for CoverLimits {
    fn default() -> Self {
        Self {
            node_limit: 200_000,
            schedule_node_limit: 20_000,
            cover_limit: 2_000,
        }
    }
}

struct Column {
    stops: Vec<LineId>,
    set: LineSet,
    lines: usize,
    cost: f64,
    customers: Vec<CustomerId>,
}

/// Columns containing each line, cheapest per line first.
fn columns_by_line(cols: &[Column], n: usize) -> Vec<Vec<usize>> {
    let mut by_line = vec![Vec::new(); n];
    for (k, c) in cols.iter().enumerate() {
        for i in c.stops.iter() {
            by_line[*i].push(k);
        }
    }
    for list in &mut by_line {
        list.sort_by(|&a, &b| {
            let ra = cols[a].cost / cols[a].lines as f64;
            let rb = cols[b].cost / cols[b].lines as f64;
            ra.total_cmp(&rb).then(a.cmp(&b))
        });
    }
    by_line
}

/// Per line, the cheapest cost share over columns containing it.
fn cheapest_shares(cols: &[Column], by_line: &[Vec<usize>]) -> Vec<f64> {
    by_line
        .iter()
        .map(|list| {
            list.first()
                .map_or(f64::INFINITY, |&k| cols[k].cost / cols[k].lines as f64)
        })
        .collect()
}

struct BatchCover<'a> {
    inst: &'a Instance,
    cols: &'a [Column],
    by_line: &'a [Vec<usize>],
    share: &'a [f64],
    fixed: &'a [Vec<LineId>],
    max_free: usize,
    limits: CoverLimits,
    chosen: Vec<usize>,
    visits: Vec<u32>,
    best: f64,
    best_solution: Option<Solution>,
    nodes: usize,
    covers: usize,
}

impl BatchCover<'_> {
    fn dfs(&mut self, open: &mut LineSet, cost: f64, split: f64, rest_bound: f64) {
        self.nodes += 1;
        if self.nodes > self.limits.node_limit || self.covers >= self.limits.cover_limit {
            return;
        }
        if cost + split + rest_bound >= self.best {
            return;
        }
        let Some(first) = open.first() else {
            self.covers += 1;
            self.schedule(cost + split);
            return;
        };
        if self.chosen.len() >= self.max_free {
            return;
        }
        for &k in &self.by_line[first] {
            let col = &self.cols[k];
            if !col.set.is_subset(open) {
                continue;
            }
            let mut extra = 0.0;
            for &c in &col.customers {
                if self.visits[c] > 0 {
                    extra += self.inst.params.splitup_cost;
                }
                self.visits[c] += 1;
            }
            let removed: f64 = col.stops.iter().map(|&i| self.share[i]).sum();
            open.remove_all(&col.set);
            self.chosen.push(k);
            self.dfs(open, cost + col.cost, split + extra, rest_bound - removed);
            self.chosen.pop();
            open.add_all(&col.set);
            for &c in &col.customers {
                self.visits[c] -= 1;
            }
        }
    }

    fn schedule(&mut self, fixed_part: f64) {
        let p = &self.inst.params;
        let mut batches: Vec<Vec<LineId>> = self.fixed.to_vec();
        batches.extend(self.chosen.iter().map(|&k| self.cols[k].stops.clone()));
        let jobs: Vec<Job> = batches.iter().map(|b| Job::new(b, self.inst)).collect();
        let upper = self.best - fixed_part;
        if let Some((tard, seqs)) = best_schedule(
            &jobs,
            p.num_pickers,
            p.max_batches_per_picker,
            p.break_time,
            upper,
            self.limits.schedule_node_limit,
        ) {
            self.best = fixed_part + tard;
            self.best_solution = Some(assemble(self.inst, &batches, &seqs));
        }
    }
}

/// Pool-based re-optimization.
///
/// Each of `ceil(int2 * E * H)` repetitions pins a random
/// `ceil(int1 * E * H)` of the current batches, then picks pool batches
/// that exactly cover the remaining lines and schedules everything
/// optimally. Returns `None` unless the result beats the input.
pub fn mip_op2<R: Rng + ?Sized>(
    sol: &Solution,
    pool: &BatchPool,
    inst: &Instance,
    int1: f64,
    int2: f64,
    limits: CoverLimits,
    rng: &mut R,
) -> Option<Solution> {
    let p = &inst.params;
    let slots = p.num_pickers * p.max_batches_per_picker;
    let reps = ((int2 * slots as f64).ceil() as usize).max(1);
    let n = inst.num_lines();
    let mut current = sol.clone();
    let mut current_cost = evaluate(&current, inst, 0.0).ok()?.total;
    let mut improved = false;

    for _ in 0..reps {
        let mut batches: Vec<Vec<LineId>> = current
            .schedules
            .iter()
            .flat_map(|s| s.routes.iter().map(|r| r.stops.clone()))
            .collect();
        if batches.is_empty() {
            break;
        }
        let num_fixed = ((int1 * slots as f64).ceil() as usize).min(batches.len() - 1);
        batches.shuffle(rng);
        let free = batches.split_off(num_fixed);
        let fixed = batches;

        let mut open = LineSet::empty(n);
        for b in &free {
            for &i in b {
                open.insert(i);
            }
        }
        let mut cols: Vec<Column> = Vec::new();
        let mut push = |stops: &[LineId]| {
            let set = LineSet::from_lines(n, stops);
            if set.is_subset(&open) {
                let mut customers: Vec<CustomerId> =
                    stops.iter().map(|&i| inst.line(i).customer).collect();
                customers.sort_unstable();
                customers.dedup();
                cols.push(Column {
                    stops: stops.to_vec(),
                    set,
                    lines: stops.len(),
                    cost: p.travel_cost_rate * crate::solution::route_duration(stops, inst),
                    customers,
                });
            }
        };
        for b in &free {
            push(b);
        }
        for b in pool.batches() {
            push(&b.stops);
        }
        let by_line = columns_by_line(&cols, n);
        let share = cheapest_shares(&cols, &by_line);

        let mut visits = vec![0u32; inst.customers.len()];
        let mut split = 0.0;
        let mut fixed_travel = 0.0;
        for b in &fixed {
            fixed_travel += p.travel_cost_rate * crate::solution::route_duration(b, inst);
            let mut cs: Vec<CustomerId> = b.iter().map(|&i| inst.line(i).customer).collect();
            cs.sort_unstable();
            cs.dedup();
            for c in cs {
                if visits[c] > 0 {
                    split += p.splitup_cost;
                }
                visits[c] += 1;
            }
        }
        let rest_bound: f64 = free.iter().flatten().map(|&i| share[i]).sum();
        let mut search = BatchCover {
            inst,
            cols: &cols,
            by_line: &by_line,
            share: &share,
            fixed: &fixed,
            max_free: slots - fixed.len(),
            limits,
            chosen: Vec::new(),
            visits,
            best: current_cost - IMPROVEMENT_EPS,
            best_solution: None,
            nodes: 0,
            covers: 0,
        };
        search.dfs(&mut open, fixed_travel, split, rest_bound);
        if let Some(s) = search.best_solution {
            let cost = evaluate(&s, inst, 0.0).ok()?.total;
            if cost < current_cost - IMPROVEMENT_EPS {
                current = s;
                current_cost = cost;
                improved = true;
            }
        }
    }
    improved.then_some(current)
}

struct ScheduleCover<'a> {
    cols: &'a [Column],
    by_line: &'a [Vec<usize>],
    share: &'a [f64],
    max_cols: usize,
    chosen: Vec<usize>,
    best: f64,
    best_set: Option<Vec<usize>>,
    nodes: usize,
    node_limit: usize,
}

impl ScheduleCover<'_> {
    fn dfs(&mut self, open: &mut LineSet, cost: f64, rest_bound: f64) {
        self.nodes += 1;
        if self.nodes > self.node_limit || cost + rest_bound >= self.best {
            return;
        }
        let Some(first) = open.first() else {
            self.best = cost;
            self.best_set = Some(self.chosen.clone());
            return;
        };
        if self.chosen.len() >= self.max_cols {
            return;
        }
        for &k in &self.by_line[first] {
            let col = &self.cols[k];
            if !col.set.is_subset(open) {
                continue;
            }
            let removed: f64 = col.stops.iter().map(|&i| self.share[i]).sum();
            open.remove_all(&col.set);
            self.chosen.push(k);
            self.dfs(open, cost + col.cost, rest_bound - removed);
            self.chosen.pop();
            open.add_all(&col.set);
        }
    }
}

/// Picks at most one schedule per picker from the pool so that every line
/// is covered exactly once at minimum travel, tardiness and split-up cost.
pub fn schedule_pool_select(
    pool: &SchedulePool,
    inst: &Instance,
    limits: CoverLimits,
) -> Result<(f64, Solution)> {
    let n = inst.num_lines();
    let beta = inst.params.splitup_cost;
    let cols: Vec<Column> = pool
        .schedules()
        .map(|s| {
            let stops: Vec<LineId> = s.lines.clone();
            Column {
                set: LineSet::from_lines(n, &stops),
                lines: stops.len(),
                stops,
                cost: s.cost + beta * s.customer_visits as f64,
                customers: Vec::new(),
            }
        })
        .collect();
    let by_line = columns_by_line(&cols, n);
    let share = cheapest_shares(&cols, &by_line);
    if share.iter().any(|s| s.is_infinite()) {
        return Err(Error::Infeasible("schedule pool does not cover every order line".into()));
    }
    let mut open = LineSet::empty(n);
    for i in 0..n {
        open.insert(i);
    }
    let mut search = ScheduleCover {
        cols: &cols,
        by_line: &by_line,
        share: &share,
        max_cols: inst.params.num_pickers,
        chosen: Vec::new(),
        best: f64::INFINITY,
        best_set: None,
        nodes: 0,
        node_limit: limits.node_limit,
    };
    let bound: f64 = share.iter().sum();
    search.dfs(&mut open, 0.0, bound);
    let chosen = search
        .best_set
        .ok_or_else(|| Error::Infeasible("no exact cover within the schedule pool".into()))?;
    let picked: Vec<_> = pool.schedules().collect();
    let routes = chosen.iter().map(|&k| picked[k].routes.clone()).collect();
    let sol = Solution::from_stops(inst, routes);
    let cost = evaluate(&sol, inst, 0.0)?.total;
    Ok((cost, sol))
}

//! Exact assignment and sequencing of a fixed set of batches to pickers.

use crate::instance::{Instance, LineId};
use crate::solution::{route_duration, Solution};

/// Default node budget of one scheduling search.
pub const SCHEDULE_NODE_LIMIT: usize = 200_000;

/// A batch as seen by the scheduler: a duration and the lateness charges
/// of its lines.
pub(crate) struct Job {
    pub duration: f64,
    /// (deadline, tardiness rate times line weight)
    dues: Vec<(f64, f64)>,
}

impl Job {
    pub(crate) fn new(stops: &[LineId], inst: &Instance) -> Self {
        Self::with_duration(stops, route_duration(stops, inst), inst)
    }

    pub(crate) fn with_duration(stops: &[LineId], duration: f64, inst: &Instance) -> Self {
        let alpha = inst.params.tardiness_rate;
        Job {
            duration,
            dues: stops
                .iter()
                .map(|&i| (inst.line(i).deadline, alpha * inst.tardiness_weight(i)))
                .collect(),
        }
    }

    pub(crate) fn tardiness(&self, completion: f64) -> f64 {
        self.dues
            .iter()
            .map(|&(d, w)| if completion > d { w * (completion - d) } else { 0.0 })
            .sum()
    }

    fn earliest_due(&self) -> f64 {
        self.dues.iter().map(|d| d.0).fold(f64::INFINITY, f64::min)
    }
}

struct Search<'a> {
    jobs: &'a [Job],
    max_batches: usize,
    break_time: f64,
    order: Vec<usize>,
    used: Vec<bool>,
    seqs: Vec<Vec<usize>>,
    next_start: Vec<f64>,
    open: Vec<bool>,
    best: f64,
    best_seqs: Option<Vec<Vec<usize>>>,
    nodes: usize,
    node_limit: usize,
}

impl Search<'_> {
    fn eligible(&self, e: usize) -> bool {
        self.open[e] && self.seqs[e].len() < self.max_batches
    }

    fn dfs(&mut self, tard: f64, remaining: usize) {
        self.nodes += 1;
        if self.nodes > self.node_limit {
            return;
        }
        if remaining == 0 {
            if tard < self.best {
                self.best = tard;
                self.best_seqs = Some(self.seqs.clone());
            }
            return;
        }
        // always extend the eligible picker that frees up first
        let Some(e) = (0..self.seqs.len())
            .filter(|&e| self.eligible(e))
            .min_by(|&a, &b| self.next_start[a].total_cmp(&self.next_start[b]).then(a.cmp(&b)))
        else {
            return;
        };
        let slots: usize = (0..self.seqs.len())
            .filter(|&k| self.eligible(k))
            .map(|k| self.max_batches - self.seqs[k].len())
            .sum();
        if slots < remaining {
            return;
        }
        let t = self.next_start[e];
        let bound: f64 = tard
            + self
                .order
                .iter()
                .filter(|&&j| !self.used[j])
                .map(|&j| self.jobs[j].tardiness(t + self.jobs[j].duration))
                .sum::<f64>();
        if bound >= self.best {
            return;
        }

        for k in 0..self.order.len() {
            let j = self.order[k];
            if self.used[j] {
                continue;
            }
            let co = t + self.jobs[j].duration;
            self.used[j] = true;
            self.seqs[e].push(j);
            self.next_start[e] = co + self.break_time;
            self.dfs(tard + self.jobs[j].tardiness(co), remaining - 1);
            self.next_start[e] = t;
            self.seqs[e].pop();
            self.used[j] = false;
        }

        // or give this picker no further batches; idle pickers are
        // interchangeable, so retiring one idle picker retires them all
        let retire: Vec<usize> = if self.seqs[e].is_empty() {
            (0..self.seqs.len())
                .filter(|&k| self.open[k] && self.seqs[k].is_empty())
                .collect()
        } else {
            vec![e]
        };
        let left: usize = (0..self.seqs.len())
            .filter(|&k| self.eligible(k) && !retire.contains(&k))
            .map(|k| self.max_batches - self.seqs[k].len())
            .sum();
        if left >= remaining {
            for &k in &retire {
                self.open[k] = false;
            }
            self.dfs(tard, remaining);
            for &k in &retire {
                self.open[k] = true;
            }
        }
    }
}

/// Minimum total tardiness over all assignments of `jobs` to at most
/// `num_pickers` sequences of at most `max_batches` jobs each, if some
/// assignment beats `upper`. Returns job indices per picker.
pub(crate) fn best_schedule(
    jobs: &[Job],
    num_pickers: usize,
    max_batches: usize,
    break_time: f64,
    upper: f64,
    node_limit: usize,
) -> Option<(f64, Vec<Vec<usize>>)> {
    if jobs.len() > num_pickers * max_batches {
        return None;
    }
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by(|&a, &b| {
        jobs[a]
            .earliest_due()
            .total_cmp(&jobs[b].earliest_due())
            .then(jobs[a].duration.total_cmp(&jobs[b].duration))
    });
    let mut s = Search {
        jobs,
        max_batches,
        break_time,
        order,
        used: vec![false; jobs.len()],
        seqs: vec![Vec::new(); num_pickers],
        next_start: vec![0.0; num_pickers],
        open: vec![true; num_pickers],
        best: upper,
        best_seqs: None,
        nodes: 0,
        node_limit,
    };
    s.dfs(0.0, jobs.len());
    s.best_seqs.map(|q| (s.best, q))
}

/// Builds a solution from batches and per-picker job index sequences.
pub(crate) fn assemble(inst: &Instance, batches: &[Vec<LineId>], seqs: &[Vec<usize>]) -> Solution {
    let routes = seqs
        .iter()
        .map(|q| q.iter().map(|&j| batches[j].clone()).collect())
        .collect();
    Solution::from_stops(inst, routes)
}

/// Re-optimizes which picker runs each current batch and in what order.
///
/// Batches and their routes are kept, so travel and split-up costs are
/// unchanged and only tardiness can drop. Returns `None` unless strictly
/// better than the input.
pub fn mip_op1(sol: &Solution, inst: &Instance) -> Option<Solution> {
    mip_op1_with_limit(sol, inst, SCHEDULE_NODE_LIMIT)
}

pub(crate) fn mip_op1_with_limit(sol: &Solution, inst: &Instance, node_limit: usize) -> Option<Solution> {
    let batches: Vec<Vec<LineId>> = sol
        .schedules
        .iter()
        .flat_map(|s| s.routes.iter().map(|r| r.stops.clone()))
        .collect();
    if batches.len() < 2 {
        return None;
    }
    let current: f64 = sol
        .schedules
        .iter()
        .map(|s| {
            crate::solution::picker_cost(s.routes.iter().map(|r| r.stops.as_slice()), inst, 0.0).1
        })
        .sum();
    let jobs: Vec<Job> = batches.iter().map(|b| Job::new(b, inst)).collect();
    let p = &inst.params;
    let upper = current - super::cover::IMPROVEMENT_EPS;
    let (_, seqs) = best_schedule(
        &jobs,
        sol.schedules.len(),
        p.max_batches_per_picker,
        p.break_time,
        upper,
        node_limit,
    )?;
    Some(assemble(inst, &batches, &seqs))
}

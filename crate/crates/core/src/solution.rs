//! Solution model: routes grouped into per-picker schedules, plus the
//! objective evaluator and feasibility checker that define what a solution
//! costs and whether it is admissible.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, InstanceParams, LineId};

/// Slack used when comparing loads against capacity, absorbing float noise
/// from summing tenths of kilograms.
pub const LOAD_EPS: f64 = 1e-9;

/// Capacity overload of a route peak, zero within `LOAD_EPS`.
#[inline]
pub fn excess_load(peak: f64, capacity: f64) -> f64 {
    if peak > capacity + LOAD_EPS {
        peak - capacity
    } else {
        0.0
    }
}

/// Walking distance depot -> stops... -> depot in meters.
pub fn route_distance(stops: &[LineId], inst: &Instance) -> f64 {
    let layout = &inst.layout;
    let mut prev = inst.depot();
    let mut total = 0.0;
    for &s in stops {
        let loc = inst.loc(s);
        total += layout.dist(prev, loc);
        prev = loc;
    }
    total + layout.dist(prev, inst.depot())
}

/// Seconds needed for a route: walking plus one handling time per stop.
pub fn route_duration(stops: &[LineId], inst: &Instance) -> f64 {
    duration_from_distance(route_distance(stops, inst), stops.len(), inst)
}

#[inline]
pub(crate) fn duration_from_distance(distance: f64, n_stops: usize, inst: &Instance) -> f64 {
    distance / inst.layout.travel_speed + inst.params.pick_time * n_stops as f64
}

/// Highest load carried at any point of the route.
///
/// The picker leaves the depot with every restock of the route on board;
/// each pick adds its weight and each restock drops its weight.
pub fn peak_load(stops: &[LineId], inst: &Instance) -> f64 {
    let mut load: f64 = stops.iter().map(|&s| inst.line(s).return_weight()).sum();
    let mut peak = load;
    for &s in stops {
        let l = inst.line(s);
        load += l.pick_weight() - l.return_weight();
        peak = peak.max(load);
    }
    peak
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub stops: Vec<LineId>,
    /// meters
    pub distance: f64,
    /// seconds: walking time plus handling time
    pub travel_time: f64,
    /// kg
    pub peak_load: f64,
}

impl Route {
    pub fn new(stops: Vec<LineId>, inst: &Instance) -> Self {
        let mut r = Route {
            stops,
            distance: 0.0,
            travel_time: 0.0,
            peak_load: 0.0,
        };
        r.refresh(inst);
        r
    }

    pub fn refresh(&mut self, inst: &Instance) {
        self.distance = route_distance(&self.stops, inst);
        self.travel_time = duration_from_distance(self.distance, self.stops.len(), inst);
        self.peak_load = peak_load(&self.stops, inst);
    }

    pub fn len(&self) -> usize {
        self.stops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stops.is_empty()
    }

    /// Travel cost charged for this route.
    pub fn cost(&self, params: &InstanceParams) -> f64 {
        params.travel_cost_rate * self.travel_time
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub picker: usize,
    pub routes: Vec<Route>,
    pub start_times: Vec<f64>,
    pub completion_times: Vec<f64>,
}

impl Schedule {
    pub fn new(picker: usize) -> Self {
        Self {
            picker,
            routes: Vec::new(),
            start_times: Vec::new(),
            completion_times: Vec::new(),
        }
    }

    /// Recomputes start/completion times from the cached route durations.
    pub fn refresh_times(&mut self, params: &InstanceParams) {
        let (st, co) = schedule_times(self.routes.iter().map(|r| r.travel_time), params);
        self.start_times = st;
        self.completion_times = co;
    }

    pub fn end_time(&self) -> f64 {
        self.completion_times.last().copied().unwrap_or(0.0)
    }
}

/// First route starts at 0; each later one a break after its predecessor.
pub fn schedule_times(
    durations: impl IntoIterator<Item = f64>,
    params: &InstanceParams,
) -> (Vec<f64>, Vec<f64>) {
    let mut st = Vec::new();
    let mut co: Vec<f64> = Vec::new();
    for d in durations {
        let start = match co.last() {
            None => 0.0,
            Some(&prev) => prev + params.break_time,
        };
        st.push(start);
        co.push(start + d);
    }
    (st, co)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub schedules: Vec<Schedule>,
}

impl Solution {
    pub fn empty(inst: &Instance) -> Self {
        Self {
            schedules: (0..inst.params.num_pickers).map(Schedule::new).collect(),
        }
    }

    /// Builds a solution from raw stop lists: `routes[picker][position]`.
    pub fn from_stops(inst: &Instance, routes: Vec<Vec<Vec<LineId>>>) -> Self {
        let mut sol = Self::empty(inst);
        for (e, picker_routes) in routes.into_iter().enumerate() {
            if e >= sol.schedules.len() {
                sol.schedules.push(Schedule::new(e));
            }
            sol.schedules[e].routes = picker_routes
                .into_iter()
                .filter(|s| !s.is_empty())
                .map(|s| Route::new(s, inst))
                .collect();
        }
        sol.refresh(inst);
        sol
    }

    pub fn refresh(&mut self, inst: &Instance) {
        for e in 0..self.schedules.len() {
            self.refresh_picker(e, inst);
        }
    }

    pub fn refresh_picker(&mut self, picker: usize, inst: &Instance) {
        let sched = &mut self.schedules[picker];
        for r in &mut sched.routes {
            r.refresh(inst);
        }
        sched.refresh_times(&inst.params);
    }

    /// Drops empty routes and recomputes times of the touched pickers.
    pub fn compact(&mut self, inst: &Instance) {
        for sched in &mut self.schedules {
            let before = sched.routes.len();
            sched.routes.retain(|r| !r.is_empty());
            if sched.routes.len() != before {
                sched.refresh_times(&inst.params);
            }
        }
    }

    pub fn num_batches(&self) -> usize {
        self.schedules.iter().map(|s| s.routes.len()).sum()
    }

    /// All (picker, position) pairs holding a route.
    pub fn batch_slots(&self) -> Vec<(usize, usize)> {
        self.schedules
            .iter()
            .enumerate()
            .flat_map(|(e, s)| (0..s.routes.len()).map(move |h| (e, h)))
            .collect()
    }

    /// Map from order line to its (picker, batch position), if assigned.
    pub fn assignment(&self, num_lines: usize) -> Vec<Option<(usize, usize)>> {
        let mut out = vec![None; num_lines];
        for (e, s) in self.schedules.iter().enumerate() {
            for (h, r) in s.routes.iter().enumerate() {
                for &i in &r.stops {
                    if i < num_lines {
                        out[i] = Some((e, h));
                    }
                }
            }
        }
        out
    }

    /// Sorted list of every assigned line id, with repetitions.
    pub fn line_multiset(&self) -> Vec<LineId> {
        let mut v: Vec<LineId> = self
            .schedules
            .iter()
            .flat_map(|s| s.routes.iter().flat_map(|r| r.stops.iter().copied()))
            .collect();
        v.sort_unstable();
        v
    }

    /// Removes the given lines, drops routes left empty and refreshes the
    /// affected pickers.
    pub fn remove_lines(&mut self, lines: &[LineId], inst: &Instance) {
        if lines.is_empty() {
            return;
        }
        let mut gone = vec![false; inst.num_lines()];
        for &i in lines {
            gone[i] = true;
        }
        for e in 0..self.schedules.len() {
            let mut touched = false;
            for r in &mut self.schedules[e].routes {
                let before = r.stops.len();
                r.stops.retain(|&i| !gone[i]);
                if r.stops.len() != before {
                    r.refresh(inst);
                    touched = true;
                }
            }
            if touched {
                self.schedules[e].routes.retain(|r| !r.is_empty());
                self.schedules[e].refresh_times(&inst.params);
            }
        }
    }

    /// Removes whole batches, returning their lines in route order.
    pub fn remove_batches(&mut self, slots: &[(usize, usize)], inst: &Instance) -> Vec<LineId> {
        let mut lines = Vec::new();
        for &(e, h) in slots {
            lines.extend(self.schedules[e].routes[h].stops.drain(..));
        }
        for sched in &mut self.schedules {
            let before = sched.routes.len();
            sched.routes.retain(|r| !r.is_empty());
            if sched.routes.len() != before {
                sched.refresh_times(&inst.params);
            }
        }
        lines
    }

    pub fn to_report(&self, cost: &CostBreakdown) -> SolutionReport {
        SolutionReport {
            cost: cost.clone(),
            schedules: self
                .schedules
                .iter()
                .map(|s| ScheduleReport {
                    picker: s.picker,
                    routes: s
                        .routes
                        .iter()
                        .enumerate()
                        .map(|(h, r)| RouteReport {
                            stops: r.stops.clone(),
                            distance: r.distance,
                            travel_time: r.travel_time,
                            peak_load: r.peak_load,
                            start_time: s.start_times[h],
                            completion_time: s.completion_times[h],
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub travel: f64,
    pub tardiness: f64,
    pub splitup: f64,
    pub capacity_penalty: f64,
    pub total: f64,
}

impl CostBreakdown {
    fn from_parts(travel: f64, tardiness: f64, splitup: f64, capacity_penalty: f64) -> Self {
        Self {
            travel,
            tardiness,
            splitup,
            capacity_penalty,
            total: travel + tardiness + splitup + capacity_penalty,
        }
    }

    /// Objective without the capacity penalty term.
    pub fn objective(&self) -> f64 {
        self.travel + self.tardiness + self.splitup
    }
}

fn check_coverage(sol: &Solution, inst: &Instance) -> Result<()> {
    let n = inst.num_lines();
    let mut seen = vec![0u32; n];
    for s in &sol.schedules {
        for r in &s.routes {
            for &i in &r.stops {
                if i >= n {
                    return Err(Error::Invariant(format!("unknown order line {i}")));
                }
                seen[i] += 1;
            }
        }
    }
    if let Some(i) = seen.iter().position(|&c| c == 0) {
        return Err(Error::Invariant(format!("order line {i} is not assigned")));
    }
    if let Some(i) = seen.iter().position(|&c| c > 1) {
        return Err(Error::Invariant(format!(
            "order line {i} is assigned {} times",
            seen[i]
        )));
    }
    Ok(())
}

/// Travel, tardiness and capacity-penalty cost of one picker's route sequence,
/// computed from stops alone.
pub(crate) fn picker_cost<'a>(
    routes: impl IntoIterator<Item = &'a [LineId]>,
    inst: &Instance,
    penalty_rate: f64,
) -> (f64, f64, f64) {
    let p = &inst.params;
    let mut travel = 0.0;
    let mut tardiness = 0.0;
    let mut penalty = 0.0;
    let mut clock: Option<f64> = None;
    for stops in routes {
        let dur = route_duration(stops, inst);
        let start = clock.map_or(0.0, |c| c + p.break_time);
        let done = start + dur;
        clock = Some(done);
        travel += p.travel_cost_rate * dur;
        for &i in stops {
            let late = done - inst.line(i).deadline;
            if late > 0.0 {
                tardiness += p.tardiness_rate * inst.tardiness_weight(i) * late;
            }
        }
        penalty += penalty_rate * excess_load(peak_load(stops, inst), p.capacity);
    }
    (travel, tardiness, penalty)
}

/// Evaluates the full objective from the route stop lists.
///
/// Fails if some order line is missing or assigned twice.
pub fn evaluate(sol: &Solution, inst: &Instance, penalty_rate: f64) -> Result<CostBreakdown> {
    check_coverage(sol, inst)?;
    Ok(evaluate_partial(sol, inst, penalty_rate))
}

/// Objective of whatever lines are currently assigned, without the coverage check.
pub fn evaluate_partial(sol: &Solution, inst: &Instance, penalty_rate: f64) -> CostBreakdown {
    let mut travel = 0.0;
    let mut tardiness = 0.0;
    let mut penalty = 0.0;
    for s in &sol.schedules {
        let (t, d, c) = picker_cost(s.routes.iter().map(|r| r.stops.as_slice()), inst, penalty_rate);
        travel += t;
        tardiness += d;
        penalty += c;
    }
    let extra: usize = splitup_counts(sol, inst).iter().sum();
    let splitup = inst.params.splitup_cost * extra as f64;
    CostBreakdown::from_parts(travel, tardiness, splitup, penalty)
}

/// Per customer: number of distinct batches holding its lines, minus one.
pub fn splitup_counts(sol: &Solution, inst: &Instance) -> Vec<usize> {
    let mut batches = vec![0usize; inst.customers.len()];
    let mut last_batch = vec![usize::MAX; inst.customers.len()];
    let mut batch_id = 0usize;
    for s in &sol.schedules {
        for r in &s.routes {
            for &i in &r.stops {
                let c = inst.line(i).customer;
                if last_batch[c] != batch_id {
                    last_batch[c] = batch_id;
                    batches[c] += 1;
                }
            }
            batch_id += 1;
        }
    }
    batches.into_iter().map(|b| b.saturating_sub(1)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibilityViolation {
    Capacity {
        picker: usize,
        batch: usize,
        excess: f64,
    },
    Horizon {
        picker: usize,
        completion: f64,
        horizon: f64,
    },
    TooManyBatches {
        picker: usize,
        count: usize,
        limit: usize,
    },
    UnknownLine {
        line: LineId,
    },
    Uncovered {
        line: LineId,
    },
    Duplicated {
        line: LineId,
        count: usize,
    },
}

impl fmt::Display for FeasibilityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use FeasibilityViolation::*;
        match self {
            Capacity {
                picker,
                batch,
                excess,
            } => write!(f, "capacity: picker {picker} batch {batch} exceeds Q by {excess:.3} kg"),
            Horizon {
                picker,
                completion,
                horizon,
            } => write!(
                f,
                "horizon: picker {picker} finishes at {completion:.1} s after horizon {horizon:.1} s"
            ),
            TooManyBatches {
                picker,
                count,
                limit,
            } => write!(f, "batches: picker {picker} has {count} batches, limit {limit}"),
            UnknownLine { line } => write!(f, "coverage: unknown order line {line}"),
            Uncovered { line } => write!(f, "coverage: order line {line} is not assigned"),
            Duplicated { line, count } => {
                write!(f, "duplication: order line {line} appears {count} times")
            }
        }
    }
}

/// Lists every constraint the solution breaks; empty means admissible.
pub fn check_feasibility(sol: &Solution, inst: &Instance) -> Vec<FeasibilityViolation> {
    let p = &inst.params;
    let n = inst.num_lines();
    let mut out = Vec::new();
    let mut seen = vec![0usize; n];
    if sol.schedules.len() > p.num_pickers {
        // extra schedules are reported through their batch count
        for s in &sol.schedules[p.num_pickers..] {
            if !s.routes.is_empty() {
                out.push(FeasibilityViolation::TooManyBatches {
                    picker: s.picker,
                    count: s.routes.len(),
                    limit: 0,
                });
            }
        }
    }
    for (e, s) in sol.schedules.iter().enumerate() {
        if e < p.num_pickers && s.routes.len() > p.max_batches_per_picker {
            out.push(FeasibilityViolation::TooManyBatches {
                picker: e,
                count: s.routes.len(),
                limit: p.max_batches_per_picker,
            });
        }
        let durations: Vec<f64> = s.routes.iter().map(|r| route_duration(&r.stops, inst)).collect();
        let (_, co) = schedule_times(durations, p);
        for (h, r) in s.routes.iter().enumerate() {
            let excess = excess_load(peak_load(&r.stops, inst), p.capacity);
            if excess > 0.0 {
                out.push(FeasibilityViolation::Capacity {
                    picker: e,
                    batch: h,
                    excess,
                });
            }
            for &i in &r.stops {
                if i >= n {
                    out.push(FeasibilityViolation::UnknownLine { line: i });
                } else {
                    seen[i] += 1;
                }
            }
        }
        if let Some(&end) = co.last() {
            if end > p.horizon + LOAD_EPS {
                out.push(FeasibilityViolation::Horizon {
                    picker: e,
                    completion: end,
                    horizon: p.horizon,
                });
            }
        }
    }
    for (i, &c) in seen.iter().enumerate() {
        match c {
            0 => out.push(FeasibilityViolation::Uncovered { line: i }),
            1 => {}
            _ => out.push(FeasibilityViolation::Duplicated { line: i, count: c }),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteReport {
    pub stops: Vec<LineId>,
    pub distance: f64,
    pub travel_time: f64,
    pub peak_load: f64,
    pub start_time: f64,
    pub completion_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub picker: usize,
    pub routes: Vec<RouteReport>,
}

/// On-disk form of a solution: stop lists with their timing and cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub cost: CostBreakdown,
    pub schedules: Vec<ScheduleReport>,
}

impl SolutionReport {
    /// Rebuilds a solution from the stop lists, ignoring cached numbers.
    pub fn to_solution(&self, inst: &Instance) -> Result<Solution> {
        let n = inst.num_lines();
        let mut sol = Solution::empty(inst);
        for s in &self.schedules {
            while sol.schedules.len() <= s.picker {
                let e = sol.schedules.len();
                sol.schedules.push(Schedule::new(e));
            }
            for r in &s.routes {
                if let Some(&bad) = r.stops.iter().find(|&&i| i >= n) {
                    return Err(Error::Input(format!("solution names unknown order line {bad}")));
                }
                sol.schedules[s.picker]
                    .routes
                    .push(Route::new(r.stops.clone(), inst));
            }
        }
        for sc in &mut sol.schedules {
            sc.refresh_times(&inst.params);
        }
        Ok(sol)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceBuilder;
    use crate::warehouse::{Location, WarehouseLayout};

    fn builder() -> InstanceBuilder {
        InstanceBuilder::new(WarehouseLayout::default(), InstanceParams::default())
    }

    #[test]
    fn single_pick_round_trip_travel_cost() {
        let mut b = builder();
        let c = b.customer();
        b.pick(c, Location::new(0, 10.0), 1, 0.5, 3600.0);
        let inst = b.build().unwrap();
        let sol = Solution::from_stops(&inst, vec![vec![vec![0]], vec![], vec![]]);
        let cost = evaluate(&sol, &inst, 0.0).unwrap();
        let expected = 0.009 * (20.0 / 0.7 + 8.0);
        assert!((cost.travel - expected).abs() < 1e-12);
        assert!((cost.travel - 0.3291).abs() < 1e-4);
        assert_eq!(cost.tardiness, 0.0);
        assert_eq!(cost.total, cost.travel);
    }

    #[test]
    fn empty_instance_costs_nothing() {
        let inst = builder().build().unwrap();
        let sol = Solution::empty(&inst);
        assert_eq!(evaluate(&sol, &inst, 1.0).unwrap(), CostBreakdown::default());
        assert!(check_feasibility(&sol, &inst).is_empty());
    }

    #[test]
    fn split_customer_pays_per_extra_batch() {
        let mut p = InstanceParams::default();
        p.splitup_cost = 5.0;
        let mut b = InstanceBuilder::new(WarehouseLayout::default(), p);
        let c = b.customer();
        for k in 0..3 {
            b.pick(c, Location::new(k, 5.0), 1, 0.5, 3600.0);
        }
        let inst = b.build().unwrap();
        let sol = Solution::from_stops(&inst, vec![vec![vec![0], vec![1]], vec![vec![2]], vec![]]);
        assert_eq!(splitup_counts(&sol, &inst), vec![2]);
        let cost = evaluate(&sol, &inst, 0.0).unwrap();
        assert_eq!(cost.splitup, 10.0);

        let together = Solution::from_stops(&inst, vec![vec![vec![0, 1, 2]], vec![], vec![]]);
        assert_eq!(splitup_counts(&together, &inst), vec![0]);
    }

    #[test]
    fn four_lines_over_two_batches_split_once() {
        let mut b = builder();
        let c = b.customer();
        for k in 0..4 {
            b.pick(c, Location::new(k, 5.0), 1, 0.5, 3600.0);
        }
        let inst = b.build().unwrap();
        let sol = Solution::from_stops(&inst, vec![vec![vec![0, 1]], vec![vec![2, 3]], vec![]]);
        assert_eq!(splitup_counts(&sol, &inst), vec![1]);
    }

    #[test]
    fn peak_load_profiles() {
        let mut b = builder();
        let c = b.customer();
        let pick3 = b.pick(c, Location::new(1, 1.0), 3, 1.0, 3600.0);
        let ret2 = b.restock(Location::new(2, 1.0), 2, 1.0);
        let p1 = b.pick(c, Location::new(3, 1.0), 1, 1.0, 3600.0);
        let p2 = b.pick(c, Location::new(3, 2.0), 2, 1.0, 3600.0);
        let r_a = b.restock(Location::new(4, 1.0), 1, 1.0);
        let r_b = b.restock(Location::new(4, 2.0), 3, 1.0);
        let inst = b.build().unwrap();
        // start with 2 kg of restocks, pick 3 kg, then drop 2 kg
        assert_eq!(peak_load(&[pick3, ret2], &inst), 5.0);
        assert_eq!(peak_load(&[ret2, pick3], &inst), 3.0);
        assert_eq!(peak_load(&[p1, p2, pick3], &inst), 6.0);
        assert_eq!(peak_load(&[r_a, r_b], &inst), 4.0);
    }

    #[test]
    fn capacity_breach_reported_with_excess() {
        let mut b = builder();
        let c = b.customer();
        b.pick(c, Location::new(1, 1.0), 80, 1.0, 3600.0);
        b.pick(c, Location::new(2, 1.0), 5, 1.0, 3600.0);
        let inst = b.build().unwrap();
        let sol = Solution::from_stops(&inst, vec![vec![vec![0, 1]], vec![], vec![]]);
        let v = check_feasibility(&sol, &inst);
        assert_eq!(v.len(), 1);
        match &v[0] {
            FeasibilityViolation::Capacity { excess, .. } => assert!((excess - 5.0).abs() < 1e-9),
            other => panic!("unexpected {other}"),
        }
        let cost = evaluate(&sol, &inst, 2.0).unwrap();
        assert!((cost.capacity_penalty - 10.0).abs() < 1e-9);
    }

    #[test]
    fn duplicated_and_missing_lines() {
        let mut b = builder();
        let c = b.customer();
        b.pick(c, Location::new(1, 1.0), 1, 1.0, 3600.0);
        b.pick(c, Location::new(2, 1.0), 1, 1.0, 3600.0);
        let inst = b.build().unwrap();
        let dup = Solution::from_stops(&inst, vec![vec![vec![0, 1]], vec![vec![1]], vec![]]);
        let v = check_feasibility(&dup, &inst);
        assert_eq!(v, vec![FeasibilityViolation::Duplicated { line: 1, count: 2 }]);
        assert!(matches!(evaluate(&dup, &inst, 0.0), Err(Error::Invariant(_))));

        let missing = Solution::from_stops(&inst, vec![vec![vec![0]], vec![], vec![]]);
        assert_eq!(
            check_feasibility(&missing, &inst),
            vec![FeasibilityViolation::Uncovered { line: 1 }]
        );
        assert!(evaluate(&missing, &inst, 0.0).is_err());
    }

    #[test]
    fn completion_times_follow_breaks_and_tardiness() {
        let mut b = builder();
        let c = b.customer();
        b.pick(c, Location::new(0, 7.0), 1, 1.0, 10.0);
        b.pick(c, Location::new(0, 14.0), 1, 1.0, 10_000.0);
        let inst = b.build().unwrap();
        let sol = Solution::from_stops(&inst, vec![vec![vec![0], vec![1]], vec![], vec![]]);
        let s = &sol.schedules[0];
        let d0 = 14.0 / 0.7 + 8.0;
        let d1 = 28.0 / 0.7 + 8.0;
        assert_eq!(s.start_times[0], 0.0);
        assert!((s.completion_times[0] - d0).abs() < 1e-9);
        assert!((s.start_times[1] - (d0 + 300.0)).abs() < 1e-9);
        assert!((s.completion_times[1] - (d0 + 300.0 + d1)).abs() < 1e-9);
        let cost = evaluate(&sol, &inst, 0.0).unwrap();
        assert!((cost.tardiness - 0.001 * (d0 - 10.0)).abs() < 1e-12);
        assert!((cost.total - (cost.travel + cost.tardiness + cost.splitup)).abs() < 1e-15);
    }

    #[test]
    fn horizon_breach_reported() {
        let mut p = InstanceParams::default();
        p.horizon = 20.0;
        let mut b = InstanceBuilder::new(WarehouseLayout::default(), p);
        let c = b.customer();
        b.pick(c, Location::new(3, 7.0), 1, 1.0, 10.0);
        let inst = b.build().unwrap();
        let sol = Solution::from_stops(&inst, vec![vec![vec![0]], vec![], vec![]]);
        let v = check_feasibility(&sol, &inst);
        assert!(matches!(v.as_slice(), [FeasibilityViolation::Horizon { picker: 0, .. }]));
    }

    #[test]
    fn report_round_trip_rebuilds_solution() {
        let mut b = builder();
        let c = b.customer();
        b.pick(c, Location::new(1, 1.0), 1, 1.0, 3600.0);
        b.restock(Location::new(2, 4.0), 2, 0.3);
        let inst = b.build().unwrap();
        let sol = Solution::from_stops(&inst, vec![vec![vec![1, 0]], vec![], vec![]]);
        let cost = evaluate(&sol, &inst, 0.0).unwrap();
        let report = sol.to_report(&cost);
        let back: SolutionReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back.to_solution(&inst).unwrap(), sol);
    }
}

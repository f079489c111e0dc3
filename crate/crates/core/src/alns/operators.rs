//! The eleven destroy-and-repair operators.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::AlnsConfig;
use crate::error::Result;
use crate::instance::{CustomerId, Instance, LineId};
use crate::routing::{
    cheapest_insert, cheapest_position, s_shape_route, vnd_improve_route, InsertionCriterion,
    SortCriterion,
};
use crate::solution::{picker_cost, splitup_counts, Route, Solution, LOAD_EPS};

/// Read-only inputs shared by all operators during one iteration.
pub struct OpEnv<'a> {
    pub inst: &'a Instance,
    pub cfg: &'a AlnsConfig,
    /// current cost per kg of overload
    pub penalty_rate: f64,
    /// current batch similarity tolerance in seconds
    pub tol_sim: f64,
}

impl OpEnv<'_> {
    fn noisy(&self) -> InsertionCriterion {
        InsertionCriterion::exact(self.penalty_rate).with_noise(self.cfg.noise)
    }

    fn exact(&self) -> InsertionCriterion {
        InsertionCriterion::exact(self.penalty_rate)
    }

    fn slots(&self) -> usize {
        self.inst.params.num_pickers * self.inst.params.max_batches_per_picker
    }
}

/// Applies operator `op` (1..=11) to `sol` in place.
pub fn apply<R: Rng + ?Sized>(op: usize, sol: &mut Solution, env: &OpEnv<'_>, rng: &mut R) -> Result<()> {
    match op {
        1 => similar_batches(sol, env, rng),
        2 => outliers(sol, env, rng),
        3 => random_lines(sol, env, rng),
        4 => random_batches(sol, env, rng),
        5 => aisles(sol, env, rng),
        6 => customers_grouped(sol, env, rng, false),
        7 => customers_grouped(sol, env, rng, true),
        8 => {
            vnd_all(sol, env.inst);
            Ok(())
        }
        9 => tardiness(sol, env, rng),
        10 => customers_sorted(sol, env, rng),
        11 => batches_sorted(sol, env, rng),
        _ => panic!("operator id {op} out of range"),
    }
}

/// Uniform integer in [lo, hi] after clamping both into [1, cap].
fn draw_count<R: Rng + ?Sized>(lo: f64, hi: f64, cap: usize, rng: &mut R) -> usize {
    if cap == 0 {
        return 0;
    }
    let lo = (lo.ceil() as usize).clamp(1, cap);
    let hi = (hi.floor() as usize).clamp(lo, cap);
    rng.random_range(lo..=hi)
}

fn assigned_lines(sol: &Solution) -> Vec<LineId> {
    sol.schedules
        .iter()
        .flat_map(|s| s.routes.iter().flat_map(|r| r.stops.iter().copied()))
        .collect()
}

fn remove_and_repair<R: Rng + ?Sized>(
    sol: &mut Solution,
    lines: &[LineId],
    sort: SortCriterion,
    crit: &InsertionCriterion,
    env: &OpEnv<'_>,
    rng: &mut R,
) -> Result<()> {
    if lines.is_empty() {
        return Ok(());
    }
    sol.remove_lines(lines, env.inst);
    cheapest_insert(sol, lines, sort, crit, env.inst, rng)
}

/// Operator 1: re-cluster pairs of batches with similar start and
/// completion times.
fn similar_batches<R: Rng + ?Sized>(sol: &mut Solution, env: &OpEnv<'_>, rng: &mut R) -> Result<()> {
    let inst = env.inst;
    let slots = sol.batch_slots();
    if slots.len() < 2 {
        return Ok(());
    }
    let mut pairs = Vec::new();
    for a in 0..slots.len() {
        for b in a + 1..slots.len() {
            pairs.push((a, b));
        }
    }
    pairs.shuffle(rng);
    let mut used = vec![false; slots.len()];
    let mut leftovers = Vec::new();
    let mut touched = false;
    for (a, b) in pairs {
        if used[a] || used[b] {
            continue;
        }
        let ((ea, ha), (eb, hb)) = (slots[a], slots[b]);
        let (sa, sb) = (&sol.schedules[ea], &sol.schedules[eb]);
        let similar = (sa.start_times[ha] - sb.start_times[hb]).abs() <= env.tol_sim
            && (sa.completion_times[ha] - sb.completion_times[hb]).abs() <= env.tol_sim;
        if !similar {
            continue;
        }
        used[a] = true;
        used[b] = true;
        let mut union = sa.routes[ha].stops.clone();
        union.extend_from_slice(&sb.routes[hb].stops);
        let (first, second, rest) = split_by_linkage(&union, inst);
        leftovers.extend(rest);
        sol.schedules[ea].routes[ha] = shaped(first, inst);
        sol.schedules[eb].routes[hb] = shaped(second, inst);
        touched = true;
    }
    if !touched {
        return Ok(());
    }
    sol.compact(inst);
    for e in 0..sol.schedules.len() {
        sol.schedules[e].refresh_times(&inst.params);
    }
    cheapest_insert(sol, &leftovers, SortCriterion::Random, &env.noisy(), inst, rng)
}

fn shaped(stops: Vec<LineId>, inst: &Instance) -> Route {
    if stops.is_empty() {
        return Route::new(stops, inst);
    }
    s_shape_route(&stops, inst).unwrap_or_else(|_| Route::new(stops, inst))
}

fn fits(lines: &[LineId], inst: &Instance) -> bool {
    let q = inst.params.capacity + LOAD_EPS;
    let picks: f64 = lines.iter().map(|&i| inst.line(i).pick_weight()).sum();
    let rets: f64 = lines.iter().map(|&i| inst.line(i).return_weight()).sum();
    picks <= q && rets <= q
}

/// Single-linkage clustering of the union of two batches into two groups.
///
/// Clusters sharing a customer merge first, otherwise the two closest ones.
/// Merging stops at two clusters or when a merge would exceed the picker
/// capacity; everything but the heaviest cluster then forms the second
/// group. Lines that still do not fit are returned separately.
pub(crate) fn split_by_linkage(
    union: &[LineId],
    inst: &Instance,
) -> (Vec<LineId>, Vec<LineId>, Vec<LineId>) {
    let k = union.len();
    let q = inst.params.capacity + LOAD_EPS;
    let mut members: Vec<Vec<LineId>> = union.iter().map(|&i| vec![i]).collect();
    let mut picks: Vec<f64> = union.iter().map(|&i| inst.line(i).pick_weight()).collect();
    let mut rets: Vec<f64> = union.iter().map(|&i| inst.line(i).return_weight()).collect();
    let mut dist = vec![0.0; k * k];
    let mut share = vec![false; k * k];
    for x in 0..k {
        for y in 0..k {
            let (a, b) = (union[x], union[y]);
            dist[x * k + y] = inst.layout.dist(inst.loc(a), inst.loc(b));
            share[x * k + y] = inst.line(a).customer == inst.line(b).customer;
        }
    }
    let mut alive: Vec<usize> = (0..k).collect();
    while alive.len() > 2 {
        let mut best: Option<(bool, f64, usize, usize)> = None;
        for (ax, &x) in alive.iter().enumerate() {
            for &y in &alive[ax + 1..] {
                let same = share[x * k + y];
                let d = dist[x * k + y];
                let better = match best {
                    None => true,
                    Some((bs, bd, _, _)) => (same && !bs) || (same == bs && d < bd),
                };
                if better {
                    best = Some((same, d, x, y));
                }
            }
        }
        let (_, _, x, y) = best.expect("at least two clusters");
        if picks[x] + picks[y] > q || rets[x] + rets[y] > q {
            break;
        }
        let moved = std::mem::take(&mut members[y]);
        members[x].extend(moved);
        picks[x] += picks[y];
        rets[x] += rets[y];
        for &z in &alive {
            let d = dist[x * k + z].min(dist[y * k + z]);
            dist[x * k + z] = d;
            dist[z * k + x] = d;
            let s = share[x * k + z] || share[y * k + z];
            share[x * k + z] = s;
            share[z * k + x] = s;
        }
        alive.retain(|&z| z != y);
    }
    let heaviest = *alive
        .iter()
        .max_by(|&&a, &&b| (picks[a] + rets[a]).total_cmp(&(picks[b] + rets[b])).then(b.cmp(&a)))
        .expect("nonempty union");
    let first = std::mem::take(&mut members[heaviest]);
    let mut second: Vec<LineId> = alive
        .iter()
        .filter(|&&z| z != heaviest)
        .flat_map(|&z| std::mem::take(&mut members[z]))
        .collect();
    let mut rest = Vec::new();
    while !second.is_empty() && !fits(&second, inst) {
        rest.push(second.pop().unwrap());
    }
    (first, second, rest)
}

/// Operator 2: drop lines sitting in sparsely used aisles of their batch.
fn outliers<R: Rng + ?Sized>(sol: &mut Solution, env: &OpEnv<'_>, rng: &mut R) -> Result<()> {
    let inst = env.inst;
    let mut candidates = assigned_lines(sol);
    candidates.shuffle(rng);
    let budget = (env.cfg.op2_int * inst.num_lines() as f64).floor() as usize;
    candidates.truncate(budget.max(1));
    let where_is = sol.assignment(inst.num_lines());
    let mut removed = Vec::new();
    for i in candidates {
        let (e, h) = where_is[i].expect("assigned");
        let stops = &sol.schedules[e].routes[h].stops;
        let aisle = inst.loc(i).aisle;
        let same = stops.iter().filter(|&&s| inst.loc(s).aisle == aisle).count();
        if (same as f64) < env.cfg.op2_tol * stops.len() as f64 {
            removed.push(i);
        }
    }
    remove_and_repair(sol, &removed, SortCriterion::AisleThenOffset, &env.exact(), env, rng)
}

/// Operator 3: random lines, random reinsertion order.
fn random_lines<R: Rng + ?Sized>(sol: &mut Solution, env: &OpEnv<'_>, rng: &mut R) -> Result<()> {
    let n = env.inst.num_lines();
    let k = draw_count(env.cfg.op3a * n as f64, env.cfg.op3b * n as f64, n, rng);
    let mut lines = assigned_lines(sol);
    lines.shuffle(rng);
    lines.truncate(k);
    remove_and_repair(sol, &lines, SortCriterion::Random, &env.noisy(), env, rng)
}

fn remove_random_batches<R: Rng + ?Sized>(sol: &mut Solution, k: usize, env: &OpEnv<'_>, rng: &mut R) -> Vec<LineId> {
    let mut slots = sol.batch_slots();
    slots.shuffle(rng);
    slots.truncate(k);
    sol.remove_batches(&slots, env.inst)
}

/// Operator 4: whole batches, random reinsertion order.
fn random_batches<R: Rng + ?Sized>(sol: &mut Solution, env: &OpEnv<'_>, rng: &mut R) -> Result<()> {
    let k = draw_count(1.0, env.cfg.op4_int * env.slots() as f64, sol.num_batches(), rng);
    let lines = remove_random_batches(sol, k, env, rng);
    cheapest_insert(sol, &lines, SortCriterion::Random, &env.noisy(), env.inst, rng)
}

/// Operator 5: every line of a few random aisles, reinserted aisle by aisle.
fn aisles<R: Rng + ?Sized>(sol: &mut Solution, env: &OpEnv<'_>, rng: &mut R) -> Result<()> {
    let inst = env.inst;
    let lines = assigned_lines(sol);
    let mut occupied: Vec<usize> = lines.iter().map(|&i| inst.loc(i).aisle).collect();
    occupied.sort_unstable();
    occupied.dedup();
    let k = draw_count(1.0, env.cfg.op5_int * env.slots() as f64, occupied.len(), rng);
    let chosen: Vec<usize> = occupied.choose_multiple(rng, k).copied().collect();
    let removed: Vec<LineId> = lines
        .into_iter()
        .filter(|&i| chosen.contains(&inst.loc(i).aisle))
        .collect();
    remove_and_repair(sol, &removed, SortCriterion::AisleThenOffset, &env.noisy(), env, rng)
}

fn customers_with_lines(inst: &Instance) -> Vec<CustomerId> {
    inst.customers
        .iter()
        .filter(|c| !c.order_lines.is_empty())
        .map(|c| c.id)
        .collect()
}

fn draw_customers<R: Rng + ?Sized>(pool: &[CustomerId], lo: f64, hi: f64, rng: &mut R) -> Vec<CustomerId> {
    let k = draw_count(lo, hi, pool.len(), rng);
    pool.choose_multiple(rng, k).copied().collect()
}

/// Operators 6 and 7: whole customer orders, each reinserted into a single
/// batch without overload where possible.
fn customers_grouped<R: Rng + ?Sized>(
    sol: &mut Solution,
    env: &OpEnv<'_>,
    rng: &mut R,
    split_only: bool,
) -> Result<()> {
    let inst = env.inst;
    let num_customers = inst.customers.len() as f64;
    let chosen = if split_only {
        let split: Vec<CustomerId> = splitup_counts(sol, inst)
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(c, _)| c)
            .collect();
        if split.is_empty() {
            return Ok(());
        }
        let k = draw_count(env.cfg.op7a * num_customers, env.cfg.op7b * num_customers, usize::MAX, rng)
            .min(split.len());
        split.choose_multiple(rng, k).copied().collect::<Vec<_>>()
    } else {
        let pool = customers_with_lines(inst);
        draw_customers(&pool, env.cfg.op6a * num_customers, env.cfg.op6b * num_customers, rng)
    };
    let groups: Vec<Vec<LineId>> = chosen
        .iter()
        .map(|&c| inst.customers[c].order_lines.clone())
        .collect();
    let all: Vec<LineId> = groups.iter().flatten().copied().collect();
    sol.remove_lines(&all, inst);

    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(rng);
    let mut fallback = Vec::new();
    for g in order {
        let mut group = groups[g].clone();
        group.shuffle(rng);
        if !insert_group(sol, &group, env) {
            fallback.extend(group);
        }
    }
    cheapest_insert(sol, &fallback, SortCriterion::Random, &env.noisy(), inst, rng)
}

/// Places all of `group` into one batch (existing or new) at least cost
/// without overloading it. Returns false if no such batch exists.
fn insert_group(sol: &mut Solution, group: &[LineId], env: &OpEnv<'_>) -> bool {
    let inst = env.inst;
    let p = &inst.params;
    let build = |base: &[LineId]| -> Option<Vec<LineId>> {
        let mut stops = base.to_vec();
        for &i in group {
            let pos = cheapest_position(&stops, i, inst, true)?;
            stops.insert(pos, i);
        }
        Some(stops)
    };
    let cost_of = |routes: &[&[LineId]]| -> f64 {
        let (t, d, c) = picker_cost(routes.iter().copied(), inst, env.penalty_rate);
        t + d + c
    };
    // (delta, picker, batch index, new batch?, stops)
    let mut best: Option<(f64, usize, usize, bool, Vec<LineId>)> = None;
    let fresh = build(&[]);
    for (e, sched) in sol.schedules.iter().enumerate() {
        let base: Vec<&[LineId]> = sched.routes.iter().map(|r| r.stops.as_slice()).collect();
        let before = cost_of(&base);
        for h in 0..base.len() {
            let Some(stops) = build(base[h]) else { continue };
            let mut trial = base.clone();
            trial[h] = &stops;
            let delta = cost_of(&trial) - before;
            if best.as_ref().is_none_or(|b| delta < b.0) {
                best = Some((delta, e, h, false, stops.clone()));
            }
        }
        if base.len() < p.max_batches_per_picker {
            if let Some(stops) = &fresh {
                for k in 0..=base.len() {
                    let mut trial = base.clone();
                    trial.insert(k, stops);
                    let delta = cost_of(&trial) - before;
                    if best.as_ref().is_none_or(|b| delta < b.0) {
                        best = Some((delta, e, k, true, stops.clone()));
                    }
                }
            }
        }
    }
    let Some((_, e, h, new, stops)) = best else {
        return false;
    };
    let route = Route::new(stops, inst);
    if new {
        sol.schedules[e].routes.insert(h, route);
    } else {
        sol.schedules[e].routes[h] = route;
    }
    sol.schedules[e].refresh_times(p);
    true
}

/// Operator 8: route improvement of every batch.
pub(crate) fn vnd_all(sol: &mut Solution, inst: &Instance) {
    for sched in &mut sol.schedules {
        for r in &mut sched.routes {
            *r = vnd_improve_route(r, inst);
        }
        sched.refresh_times(&inst.params);
    }
}

/// Operator 9: late lines and lines finished far too early, reinserted by
/// deadline with a charge on earliness.
fn tardiness<R: Rng + ?Sized>(sol: &mut Solution, env: &OpEnv<'_>, rng: &mut R) -> Result<()> {
    let inst = env.inst;
    let mut candidates = assigned_lines(sol);
    candidates.shuffle(rng);
    let budget = (env.cfg.op9_int * inst.num_lines() as f64).floor() as usize;
    candidates.truncate(budget.max(1));
    let where_is = sol.assignment(inst.num_lines());
    let removed: Vec<LineId> = candidates
        .into_iter()
        .filter(|&i| {
            let (e, h) = where_is[i].expect("assigned");
            let done = sol.schedules[e].completion_times[h];
            let d = inst.line(i).deadline;
            done > d || d - done >= env.cfg.op9_tol
        })
        .collect();
    let crit = env.exact().with_earliness(env.cfg.op9_pen, env.cfg.op9_big);
    remove_and_repair(sol, &removed, SortCriterion::Deadline, &crit, env, rng)
}

/// Operator 10: whole customer orders, reinserted in customer order.
fn customers_sorted<R: Rng + ?Sized>(sol: &mut Solution, env: &OpEnv<'_>, rng: &mut R) -> Result<()> {
    let inst = env.inst;
    let num_customers = inst.customers.len() as f64;
    let pool = customers_with_lines(inst);
    let chosen = draw_customers(&pool, env.cfg.op6a * num_customers, env.cfg.op6b * num_customers, rng);
    let lines: Vec<LineId> = chosen
        .iter()
        .flat_map(|&c| inst.customers[c].order_lines.iter().copied())
        .collect();
    remove_and_repair(sol, &lines, SortCriterion::CustomerIndex, &env.noisy(), env, rng)
}

/// Operator 11: whole batches, reinserted in customer order.
fn batches_sorted<R: Rng + ?Sized>(sol: &mut Solution, env: &OpEnv<'_>, rng: &mut R) -> Result<()> {
    let nb = sol.num_batches();
    let k = draw_count(1.0, env.cfg.op11_int * nb as f64, nb, rng);
    let lines = remove_random_batches(sol, k, env, rng);
    cheapest_insert(sol, &lines, SortCriterion::CustomerIndex, &env.noisy(), env.inst, rng)
}

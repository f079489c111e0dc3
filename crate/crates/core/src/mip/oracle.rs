//! Exhaustive optimum for tiny instances.

use crate::error::{Error, Result};
use crate::instance::{Instance, LineId};
use crate::solution::{evaluate, peak_load, picker_cost, route_distance, CostBreakdown, Solution, LOAD_EPS};

/// Size limits beyond which enumeration is refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_lines: usize,
    pub max_pickers: usize,
    pub max_batches_per_picker: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_lines: 8,
            max_pickers: 2,
            max_batches_per_picker: 2,
        }
    }
}

/// Shortest capacity-feasible stop order for every subset of lines.
fn best_orders(inst: &Instance) -> Vec<Option<Vec<LineId>>> {
    let n = inst.num_lines();
    let q = inst.params.capacity + LOAD_EPS;
    let mut out = vec![None; 1 << n];
    for mask in 1usize..(1 << n) {
        let mut items: Vec<LineId> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let mut best: Option<(f64, Vec<LineId>)> = None;
        permute(&mut items, 0, &mut |perm| {
            if peak_load(perm, inst) > q {
                return;
            }
            let d = route_distance(perm, inst);
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, perm.to_vec()));
            }
        });
        out[mask] = best.map(|b| b.1);
    }
    out
}

fn permute(items: &mut [LineId], k: usize, visit: &mut impl FnMut(&[LineId])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for j in k..items.len() {
        items.swap(k, j);
        permute(items, k + 1, visit);
        items.swap(k, j);
    }
}

/// Every set partition of 0..n into at most `max_blocks` blocks, as masks.
fn partitions(n: usize, max_blocks: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(i: usize, n: usize, max_blocks: usize, blocks: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if i == n {
            visit(blocks);
            return;
        }
        for b in 0..blocks.len() {
            blocks[b] |= 1 << i;
            rec(i + 1, n, max_blocks, blocks, visit);
            blocks[b] &= !(1 << i);
        }
        if blocks.len() < max_blocks {
            blocks.push(1 << i);
            rec(i + 1, n, max_blocks, blocks, visit);
            blocks.pop();
        }
    }
    rec(0, n, max_blocks, &mut Vec::new(), visit);
}

/// Splits a block sequence into `pickers` consecutive runs of at most `cap`.
fn splits(len: usize, pickers: usize, cap: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(left: usize, pickers: usize, cap: usize, sizes: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if sizes.len() == pickers {
            if left == 0 {
                visit(sizes);
            }
            return;
        }
        for s in 0..=left.min(cap) {
            sizes.push(s);
            rec(left - s, pickers, cap, sizes, visit);
            sizes.pop();
        }
    }
    rec(len, pickers, cap, &mut Vec::new(), visit);
}

/// Global optimum of the objective by full enumeration of batchings, stop
/// orders, picker assignments and sequences.
pub fn brute_force_oracle(inst: &Instance, limits: OracleLimits) -> Result<(CostBreakdown, Solution)> {
    let n = inst.num_lines();
    let p = &inst.params;
    if n > limits.max_lines
        || p.num_pickers > limits.max_pickers
        || p.max_batches_per_picker > limits.max_batches_per_picker
    {
        return Err(Error::LimitsExceeded(format!(
            "{n} lines, {} pickers, {} batches per picker (limits {}, {}, {})",
            p.num_pickers,
            p.max_batches_per_picker,
            limits.max_lines,
            limits.max_pickers,
            limits.max_batches_per_picker
        )));
    }
    if n == 0 {
        let sol = Solution::empty(inst);
        return Ok((evaluate(&sol, inst, 0.0)?, sol));
    }
    let orders = best_orders(inst);
    let slots = p.num_pickers * p.max_batches_per_picker;
    let mut best: Option<(f64, Vec<Vec<Vec<LineId>>>)> = None;

    partitions(n, slots, &mut |blocks| {
        if blocks.iter().any(|&m| orders[m].is_none()) {
            return;
        }
        let mut split = 0usize;
        for c in 0..inst.customers.len() {
            let hits = blocks
                .iter()
                .filter(|&&m| (0..n).any(|i| m >> i & 1 == 1 && inst.line(i).customer == c))
                .count();
            split += hits.saturating_sub(1);
        }
        let split_cost = p.splitup_cost * split as f64;
        let routes: Vec<&Vec<LineId>> = blocks.iter().map(|&m| orders[m].as_ref().unwrap()).collect();
        let mut idx: Vec<usize> = (0..routes.len()).collect();
        permute(&mut idx, 0, &mut |seq| {
            splits(seq.len(), p.num_pickers, p.max_batches_per_picker, &mut |sizes| {
                let mut total = split_cost;
                let mut at = 0;
                let mut plan = Vec::with_capacity(sizes.len());
                for &s in sizes {
                    let mine: Vec<Vec<LineId>> = seq[at..at + s].iter().map(|&k| routes[k].clone()).collect();
                    let (t, d, _) = picker_cost(mine.iter().map(|r| r.as_slice()), inst, 0.0);
                    total += t + d;
                    plan.push(mine);
                    at += s;
                }
                if best.as_ref().is_none_or(|b| total < b.0 - 1e-12) {
                    best = Some((total, plan));
                }
            });
        });
    });

    let (_, plan) = best.ok_or_else(|| {
        Error::Infeasible("no capacity-feasible batching exists".into())
    })?;
    let sol = Solution::from_stops(inst, plan);
    Ok((evaluate(&sol, inst, 0.0)?, sol))
}

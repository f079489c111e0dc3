//! Adaptive large neighborhood search.
//!
//! Several independent search contexts each run `inner_iters` iterations
//! per round: pick an operator by score, apply it to a copy of the current
//! solution, reward it on improvement and accept or reject the result with
//! a simulated-annealing rule. At the end of each round all contexts move
//! to the best solution found so far, scores are blended with those of the
//! winning context, the capacity penalty rate grows, and the optional
//! pool-based exact operators run.
//!
//! Contexts share nothing during a round, so the result for a given seed
//! does not depend on how many worker threads run them.

mod operators;
mod scores;

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, LineId};
use crate::mip::{self, BatchPool, CoverLimits, SchedulePool};
use crate::routing::{cheapest_insert, BatchOpening, CapacityMode, InsertionCriterion, SortCriterion};
use crate::solution::{evaluate, excess_load, peak_load, CostBreakdown, Solution};

pub use operators::{apply as apply_operator, OpEnv};
pub(crate) use operators::vnd_all;
pub use scores::{accept, accept_probability, OperatorScores, NUM_OPERATORS};

/// Search parameters. Defaults are the tuned values; the capacity
/// penalty schedule, noise and the pool options are our own knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlnsConfig {
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// how much worse a solution may be and still be likely accepted
    pub sa_worsening: f64,
    /// how quickly acceptance of worse solutions dies out
    pub sa_convergence: f64,
    pub tol_sim_start: f64,
    pub tol_sim_end: f64,
    pub op2_tol: f64,
    pub op2_int: f64,
    pub op3a: f64,
    pub op3b: f64,
    pub op4_int: f64,
    pub op5_int: f64,
    pub op6a: f64,
    pub op6b: f64,
    pub op7a: f64,
    pub op7b: f64,
    pub op9_int: f64,
    pub op9_tol: f64,
    pub op9_pen: f64,
    /// insertion charge for finishing a line after its deadline in operator 9
    pub op9_big: f64,
    pub op11_int: f64,
    pub score_init: f64,
    pub score_delta: f64,
    pub score_reset: f64,
    pub score_backprop: usize,
    pub num_contexts: usize,
    /// initial cost per kg of overload; defaults to 0.1 * travel_cost_rate * capacity
    pub penalty_start: Option<f64>,
    /// factor applied to the penalty rate after every round
    pub penalty_growth: f64,
    /// half-width of the multiplicative insertion noise
    pub noise: f64,
    pub mip_ops_enabled: bool,
    pub mip_int1: f64,
    pub mip_int2: f64,
    /// keep every feasible picker schedule seen, for later verification
    pub collect_schedules: bool,
    /// worker threads; 0 means one per context
    pub threads: usize,
    pub seed: u64,
}

impl Default for AlnsConfig {
    fn default() -> Self {
        Self {
            outer_iters: 50,
            inner_iters: 100,
            sa_worsening: 5.0,
            sa_convergence: 2.0,
            tol_sim_start: 2000.0,
            tol_sim_end: 500.0,
            op2_tol: 0.2,
            op2_int: 0.15,
            op3a: 0.05,
            op3b: 0.15,
            op4_int: 0.25,
            op5_int: 0.15,
            op6a: 0.05,
            op6b: 0.15,
            op7a: 0.05,
            op7b: 0.10,
            op9_int: 0.15,
            op9_tol: 1000.0,
            op9_pen: 0.01,
            op9_big: 1e6,
            op11_int: 0.25,
            score_init: 1.0,
            score_delta: 0.25,
            score_reset: 5.0,
            score_backprop: 4,
            num_contexts: 4,
            penalty_start: None,
            penalty_growth: 1.3,
            noise: 0.1,
            mip_ops_enabled: false,
            mip_int1: 0.25,
            mip_int2: 0.25,
            collect_schedules: false,
            threads: 0,
            seed: 0,
        }
    }
}

impl AlnsConfig {
    pub fn validate(&self) -> Result<()> {
        let fractions = [
            ("op2_tol", self.op2_tol),
            ("op2_int", self.op2_int),
            ("op3a", self.op3a),
            ("op3b", self.op3b),
            ("op4_int", self.op4_int),
            ("op5_int", self.op5_int),
            ("op6a", self.op6a),
            ("op6b", self.op6b),
            ("op7a", self.op7a),
            ("op7b", self.op7b),
            ("op9_int", self.op9_int),
            ("op11_int", self.op11_int),
            ("mip_int1", self.mip_int1),
            ("mip_int2", self.mip_int2),
            ("noise", self.noise),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Input(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.outer_iters == 0 || self.inner_iters == 0 {
            return Err(Error::Input("iteration counts must be at least 1".into()));
        }
        if self.num_contexts == 0 {
            return Err(Error::Input("num_contexts must be at least 1".into()));
        }
        if !(self.tol_sim_start >= self.tol_sim_end && self.tol_sim_end >= 0.0) {
            return Err(Error::Input("need tol_sim_start >= tol_sim_end >= 0".into()));
        }
        if !(self.score_init > 0.0 && self.score_delta >= 0.0 && self.score_reset >= self.score_init) {
            return Err(Error::Input("score parameters out of range".into()));
        }
        if !(self.penalty_growth >= 1.0) || self.penalty_start.is_some_and(|r| !(r >= 0.0)) {
            return Err(Error::Input("penalty schedule must be non-negative and non-decreasing".into()));
        }
        if !(self.sa_worsening >= 0.0 && self.sa_convergence >= 0.0) {
            return Err(Error::Input("annealing parameters must be non-negative".into()));
        }
        Ok(())
    }

    pub fn total_iters(&self) -> usize {
        self.outer_iters * self.inner_iters
    }

    /// Similarity tolerance at a global iteration: linear from start to end.
    pub fn tol_sim(&self, it: usize) -> f64 {
        let frac = it as f64 / self.total_iters() as f64;
        self.tol_sim_start + (self.tol_sim_end - self.tol_sim_start) * frac.min(1.0)
    }

    pub fn initial_penalty(&self, inst: &Instance) -> f64 {
        self.penalty_start
            .unwrap_or(0.1 * inst.params.travel_cost_rate * inst.params.capacity)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: AlnsConfig = serde_json::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A solution with its cost at some penalty rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub solution: Solution,
    pub cost: CostBreakdown,
    feasible: bool,
}

impl Scored {
    pub fn new(solution: Solution, inst: &Instance, rate: f64) -> Result<Self> {
        let cost = evaluate(&solution, inst, rate)?;
        let feasible = solution
            .schedules
            .iter()
            .flat_map(|s| &s.routes)
            .all(|r| excess_load(peak_load(&r.stops, inst), inst.params.capacity) == 0.0);
        Ok(Self {
            solution,
            cost,
            feasible,
        })
    }

    /// No route exceeds the picker capacity.
    pub fn feasible(&self) -> bool {
        self.feasible
    }

    /// Capacity-feasible solutions beat infeasible ones; otherwise the
    /// penalized total decides.
    pub fn better_than(&self, other: &Scored) -> bool {
        match (self.feasible(), other.feasible()) {
            (true, false) => true,
            (false, true) => false,
            _ => self.cost.total < other.cost.total,
        }
    }

    fn rescore(&mut self, inst: &Instance, rate: f64) -> Result<()> {
        self.cost = evaluate(&self.solution, inst, rate)?;
        Ok(())
    }
}

/// The cheaper of two fill-first cheapest-insertion constructions, one
/// sorted by (deadline, aisle) and one by (customer, deadline, aisle).
pub fn initial_solution<R: Rng + ?Sized>(inst: &Instance, penalty_rate: f64, rng: &mut R) -> Result<Solution> {
    let lines: Vec<LineId> = (0..inst.num_lines()).collect();
    let crit = InsertionCriterion::exact(penalty_rate)
        .with_capacity(CapacityMode::FeasibleOnly)
        .with_opening(BatchOpening::FillFirst);
    let mut best: Option<Scored> = None;
    for sort in [SortCriterion::DeadlineThenAisle, SortCriterion::CustomerThenDeadlineThenAisle] {
        let mut sol = Solution::empty(inst);
        cheapest_insert(&mut sol, &lines, sort, &crit, inst, rng)?;
        let cand = Scored::new(sol, inst, penalty_rate)?;
        if best.as_ref().is_none_or(|b| cand.better_than(b)) {
            best = Some(cand);
        }
    }
    Ok(best.expect("two candidates").solution)
}

/// One line of the search log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    pub context: usize,
    pub operator: usize,
    /// candidate total minus current total
    pub delta: f64,
    pub accepted: bool,
    /// context best total after this iteration
    pub best: f64,
}

/// Writes the log as whitespace-separated columns with a header line.
pub fn write_log(rows: &[LogRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "iteration context operator delta accepted best")?;
    for r in rows {
        writeln!(
            out,
            "{} {} {} {:.6} {} {:.6}",
            r.iteration, r.context, r.operator, r.delta, r.accepted as u8, r.best
        )?;
    }
    Ok(())
}

pub fn save_log(rows: &[LogRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_log(rows, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Result of a search.
#[derive(Debug, Clone)]
pub struct AlnsOutcome {
    pub solution: Solution,
    /// cost at penalty rate zero
    pub cost: CostBreakdown,
    /// false if no capacity-feasible solution was found; `solution` then
    /// holds the best infeasible one
    pub feasible: bool,
    pub log: Vec<LogRow>,
    /// global best total after each round
    pub round_best: Vec<f64>,
    /// penalty rate in force during each round
    pub round_penalty: Vec<f64>,
    pub batch_pool: Option<BatchPool>,
    pub schedule_pool: Option<SchedulePool>,
}

struct Context {
    rng: ChaCha8Rng,
    current: Scored,
    best: Scored,
    scores: OperatorScores,
    log: Vec<LogRow>,
    batches: Vec<Vec<LineId>>,
    schedules: Vec<Vec<Vec<LineId>>>,
}

/// Runs the search from fresh initial solutions.
pub fn run(inst: &Instance, cfg: &AlnsConfig) -> Result<AlnsOutcome> {
    run_from(inst, cfg, None)
}

/// Runs the search; with `warm_start` every context starts from that
/// solution instead of its own construction.
pub fn run_from(inst: &Instance, cfg: &AlnsConfig, warm_start: Option<&Solution>) -> Result<AlnsOutcome> {
    cfg.validate()?;
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    if let Some(w) = warm_start {
        evaluate(w, inst, 0.0)?;
        if w.schedules.len() != inst.params.num_pickers {
            return Err(Error::Input("warm start has the wrong number of pickers".into()));
        }
    }
    let mut rate = cfg.initial_penalty(inst);
    let n_max = cfg.total_iters();
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let use_pools = cfg.mip_ops_enabled || cfg.collect_schedules;

    let mut contexts = Vec::with_capacity(cfg.num_contexts);
    for _ in 0..cfg.num_contexts {
        let mut rng = ChaCha8Rng::seed_from_u64(master.random());
        let start = match warm_start {
            Some(w) => w.clone(),
            None => initial_solution(inst, rate, &mut rng)?,
        };
        let current = Scored::new(start, inst, rate)?;
        contexts.push(Context {
            rng,
            best: current.clone(),
            current,
            scores: OperatorScores::new(cfg),
            log: Vec::new(),
            batches: Vec::new(),
            schedules: Vec::new(),
        });
    }
    let mut mip_rng = ChaCha8Rng::seed_from_u64(master.random());
    let mut batch_pool = use_pools.then(BatchPool::default);
    let mut schedule_pool = cfg.collect_schedules.then(SchedulePool::default);
    if let Some(pool) = batch_pool.as_mut() {
        for c in &contexts {
            pool.insert_solution(&c.current.solution, inst);
        }
    }
    if let Some(pool) = schedule_pool.as_mut() {
        for c in &contexts {
            if c.current.feasible() {
                pool.insert_solution(&c.current.solution, inst);
            }
        }
    }

    let workers = if cfg.threads == 0 { cfg.num_contexts } else { cfg.threads }.clamp(1, cfg.num_contexts);
    let mut log = Vec::new();
    let mut round_best = Vec::with_capacity(cfg.outer_iters);
    let mut round_penalty = Vec::with_capacity(cfg.outer_iters);

    for round in 0..cfg.outer_iters {
        round_penalty.push(rate);
        let per_worker = cfg.num_contexts.div_ceil(workers);
        let outcomes: Vec<Result<()>> = std::thread::scope(|scope| {
            let handles: Vec<_> = contexts
                .chunks_mut(per_worker)
                .enumerate()
                .map(|(w, chunk)| {
                    scope.spawn(move || -> Result<()> {
                        for (k, ctx) in chunk.iter_mut().enumerate() {
                            run_round(ctx, w * per_worker + k, round, rate, inst, cfg, n_max, use_pools)?;
                        }
                        Ok(())
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("search worker panicked")).collect()
        });
        for r in outcomes {
            r?;
        }

        for ctx in &mut contexts {
            log.append(&mut ctx.log);
            if let Some(pool) = batch_pool.as_mut() {
                for b in ctx.batches.drain(..) {
                    pool.insert(&b, inst);
                }
            }
            if let Some(pool) = schedule_pool.as_mut() {
                for s in ctx.schedules.drain(..) {
                    pool.insert(&s, inst);
                }
            }
        }

        // exchange: everybody continues from the best solution so far
        let mut winner = 0;
        for k in 1..contexts.len() {
            if contexts[k].best.better_than(&contexts[winner].best) {
                winner = k;
            }
        }
        let mut global = contexts[winner].best.clone();
        for ctx in &mut contexts {
            ctx.scores.reset_high();
        }
        let lead = contexts[winner].scores.clone();
        for (k, ctx) in contexts.iter_mut().enumerate() {
            if k != winner {
                ctx.scores.average_with(&lead);
            }
        }

        if cfg.mip_ops_enabled && global.feasible() {
            if let Some(better) = mip_improve(&global.solution, batch_pool.as_ref(), inst, cfg, &mut mip_rng) {
                let cand = Scored::new(better, inst, rate)?;
                if cand.better_than(&global) {
                    if let Some(pool) = schedule_pool.as_mut() {
                        pool.insert_solution(&cand.solution, inst);
                    }
                    global = cand;
                }
            }
        }

        rate *= cfg.penalty_growth;
        global.rescore(inst, rate)?;
        for ctx in &mut contexts {
            ctx.current = global.clone();
            ctx.best = global.clone();
        }
        round_best.push(global.cost.total);
    }

    let best = contexts.swap_remove(0).best;
    let feasible = best.feasible();
    let cost = evaluate(&best.solution, inst, 0.0)?;
    Ok(AlnsOutcome {
        solution: best.solution,
        cost,
        feasible,
        log,
        round_best,
        round_penalty,
        batch_pool,
        schedule_pool,
    })
}

/// Exact pool operators in order; stops at the first that improves.
fn mip_improve(
    sol: &Solution,
    pool: Option<&BatchPool>,
    inst: &Instance,
    cfg: &AlnsConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Solution> {
    if let Some(s) = mip::mip_op1(sol, inst) {
        return Some(s);
    }
    let pool = pool?;
    mip::mip_op2(sol, pool, inst, cfg.mip_int1, cfg.mip_int2, CoverLimits::default(), rng)
}

#[allow(clippy::too_many_arguments)]
fn run_round(
    ctx: &mut Context,
    index: usize,
    round: usize,
    rate: f64,
    inst: &Instance,
    cfg: &AlnsConfig,
    n_max: usize,
    collect: bool,
) -> Result<()> {
    for k in 0..cfg.inner_iters {
        let it = round * cfg.inner_iters + k;
        let env = OpEnv {
            inst,
            cfg,
            penalty_rate: rate,
            tol_sim: cfg.tol_sim(it),
        };
        let op = ctx.scores.select(&mut ctx.rng);
        let mut sol = ctx.current.solution.clone();
        let applied = operators::apply(op, &mut sol, &env, &mut ctx.rng);
        let (delta, accepted) = match applied {
            Ok(()) => {
                let cand = Scored::new(sol, inst, rate)?;
                let z_cur = cand.cost.total;
                let z_ref = ctx.current.cost.total;
                if z_cur < z_ref - 1e-12 {
                    ctx.scores.reward(op);
                }
                let accepted = if z_ref > 0.0 {
                    accept(z_cur, z_ref, it, n_max, cfg, &mut ctx.rng)?
                } else {
                    z_cur < z_ref
                };
                if collect {
                    for s in &cand.solution.schedules {
                        for r in &s.routes {
                            ctx.batches.push(r.stops.clone());
                        }
                    }
                    if cfg.collect_schedules && cand.feasible() {
                        for s in &cand.solution.schedules {
                            ctx.schedules.push(s.routes.iter().map(|r| r.stops.clone()).collect());
                        }
                    }
                }
                if cand.better_than(&ctx.best) {
                    ctx.best = cand.clone();
                }
                if accepted {
                    ctx.scores.record_accepted(op);
                    ctx.current = cand;
                }
                (z_cur - z_ref, accepted)
            }
            // a repair that runs out of batch slots leaves the move rejected
            Err(Error::Structural(_)) => (f64::INFINITY, false),
            Err(e) => return Err(e),
        };
        ctx.log.push(LogRow {
            iteration: it,
            context: index,
            operator: op,
            delta,
            accepted,
            best: ctx.best.cost.total,
        });
    }
    Ok(())
}

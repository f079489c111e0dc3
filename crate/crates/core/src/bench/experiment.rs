//! Experiment harness: integrated versus separated product returns,
//! capacity sensitivity, split-up cost sweeps and cost partitions under
//! tight deadlines.
//!
//! Every solve keeps the cheapest of `repeats` searches. Searches are
//! warm-started along chains whose cost can only go down (separated →
//! integrated, large β → small β), so the direction of each comparison
//! holds for any seed.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alns::{self, AlnsConfig, LogRow};
use crate::error::{Error, Result};
use crate::instance::{generate, GenSpec, Instance, LineId};
use crate::solution::{CostBreakdown, Solution};

use super::derived_seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// integrated versus separated handling of returns, β = 0 and β large
    Returns,
    /// picker capacity varied around its base value
    Capacity,
    /// split-up cost grid
    BetaSweep,
    /// halved deadlines over a capacity grid
    Deadlines,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Returns => "returns",
            ExperimentKind::Capacity => "capacity",
            ExperimentKind::BetaSweep => "beta-sweep",
            ExperimentKind::Deadlines => "deadlines",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "returns" => Ok(ExperimentKind::Returns),
            "capacity" => Ok(ExperimentKind::Capacity),
            "beta-sweep" | "beta" => Ok(ExperimentKind::BetaSweep),
            "deadlines" => Ok(ExperimentKind::Deadlines),
            other => Err(Error::Input(format!(
                "unknown experiment {other:?}, expected returns, capacity, beta-sweep or deadlines"
            ))),
        }
    }
}

/// An instance file or generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceRef {
    File(PathBuf),
    Generated(GenSpec),
}

impl InstanceRef {
    pub fn load(&self, base: &Path) -> Result<Instance> {
        match self {
            InstanceRef::File(p) => Instance::load(base.join(p)),
            InstanceRef::Generated(g) => generate(g),
        }
    }

    pub fn label(&self) -> String {
        match self {
            InstanceRef::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            InstanceRef::Generated(g) => format!("gen-n{}-s{}", g.num_orderlines, g.seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub instances: Vec<InstanceRef>,
    /// searches per solve; the cheapest is kept
    pub repeats: usize,
    pub alns: AlnsConfig,
    /// split-up cost standing in for "no split-ups" in the returns study
    pub no_split_beta: f64,
    pub betas: Vec<f64>,
    pub capacity_deltas: Vec<f64>,
    /// absolute capacities for the deadline study
    pub capacities: Vec<f64>,
    /// multiplier applied to picking deadlines in the deadline study
    pub deadline_factor: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            instances: Vec::new(),
            repeats: 10,
            alns: AlnsConfig::default(),
            no_split_beta: 10_000.0,
            betas: vec![0.0, 0.05, 0.1, 0.2, 0.5, 1.0],
            capacity_deltas: vec![-10.0, 0.0, 10.0],
            capacities: vec![40.0, 50.0, 60.0],
            deadline_factor: 0.5,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.alns.validate()?;
        if self.repeats == 0 {
            return Err(Error::Input("repeats must be positive".into()));
        }
        if self.instances.is_empty() {
            return Err(Error::Input("experiment needs at least one instance".into()));
        }
        if self.betas.iter().any(|b| !(b.is_finite() && *b >= 0.0)) || !(self.no_split_beta >= 0.0) {
            return Err(Error::Input("split-up costs must be finite and nonnegative".into()));
        }
        if self.capacities.iter().any(|q| !(*q > 0.0)) {
            return Err(Error::Input("capacities must be positive".into()));
        }
        if !(self.deadline_factor > 0.0) {
            return Err(Error::Input("deadline_factor must be positive".into()));
        }
        Ok(())
    }

    /// Reads a JSON spec; relative instance paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: ExperimentSpec = serde_json::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        spec.validate()?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((spec, base))
    }
}

/// Best solution of a repeated solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveSummary {
    pub solution: Solution,
    /// cost at penalty rate zero
    pub cost: CostBreakdown,
    pub feasible: bool,
}

impl SolveSummary {
    fn empty(inst: &Instance) -> Self {
        Self {
            solution: Solution::empty(inst),
            cost: CostBreakdown::default(),
            feasible: true,
        }
    }

    pub fn total(&self) -> f64 {
        self.cost.total
    }

    fn better_than(&self, other: &SolveSummary) -> bool {
        match (self.feasible, other.feasible) {
            (true, false) => true,
            (false, true) => false,
            _ => self.cost.total < other.cost.total,
        }
    }
}

/// Cheapest of `repeats` searches with seeds derived from `cfg.seed`.
pub fn solve_repeated(
    inst: &Instance,
    cfg: &AlnsConfig,
    repeats: usize,
    warm_start: Option<&Solution>,
) -> Result<SolveSummary> {
    if inst.num_lines() == 0 {
        return Ok(SolveSummary::empty(inst));
    }
    let mut best: Option<SolveSummary> = None;
    for seed in derived_seeds(cfg.seed, repeats.max(1)) {
        let run_cfg = AlnsConfig { seed, ..cfg.clone() };
        let out = alns::run_from(inst, &run_cfg, warm_start)?;
        let cand = SolveSummary {
            solution: out.solution,
            cost: out.cost,
            feasible: out.feasible,
        };
        if best.as_ref().is_none_or(|b| cand.better_than(b)) {
            best = Some(cand);
        }
    }
    Ok(best.expect("at least one repeat"))
}

/// One half of a separated solve: a sub-instance with its id map.
#[derive(Debug, Clone)]
pub struct Part {
    pub inst: Instance,
    /// sub-instance line id → original line id
    pub map: Vec<LineId>,
    pub best: SolveSummary,
}

/// Picks and returns solved as two independent problems.
#[derive(Debug, Clone)]
pub struct Separated {
    pub orders: Part,
    pub returns: Part,
}

impl Separated {
    pub fn total(&self) -> f64 {
        self.orders.best.total() + self.returns.best.total()
    }

    /// Both halves merged into one solution of `full`: picking routes keep
    /// their place and every restocking route is appended to the picker
    /// that is free first. `None` if a picker would exceed its batch limit.
    pub fn combined(&self, full: &Instance) -> Option<Solution> {
        let params = &full.params;
        let remap = |part: &Part, stops: &[LineId]| -> Vec<LineId> { stops.iter().map(|&i| part.map[i]).collect() };
        let mut routes: Vec<Vec<Vec<LineId>>> = vec![Vec::new(); params.num_pickers];
        let mut free_at = vec![0.0f64; params.num_pickers];
        for (e, s) in self.orders.best.solution.schedules.iter().enumerate() {
            if e >= routes.len() {
                return None;
            }
            for r in &s.routes {
                routes[e].push(remap(&self.orders, &r.stops));
            }
            free_at[e] = s.end_time();
        }
        for r in self.returns.best.solution.schedules.iter().flat_map(|s| &s.routes) {
            let e = (0..routes.len())
                .filter(|&e| routes[e].len() < params.max_batches_per_picker)
                .min_by(|&a, &b| free_at[a].total_cmp(&free_at[b]))?;
            let brk = if routes[e].is_empty() { 0.0 } else { params.break_time };
            free_at[e] += brk + r.travel_time;
            routes[e].push(remap(&self.returns, &r.stops));
        }
        Some(Solution::from_stops(full, routes))
    }
}

fn split(inst: &Instance) -> (Instance, Vec<LineId>, Instance, Vec<LineId>) {
    let (orders, omap) = inst.restrict(|l| !l.is_return());
    let (returns, rmap) = inst.restrict(|l| l.is_return());
    (orders, omap, returns, rmap)
}

/// Picks-only and returns-only solves, each optionally warm-started from
/// the matching half of `warm`.
pub fn solve_separated(
    inst: &Instance,
    cfg: &AlnsConfig,
    repeats: usize,
    warm: Option<&Separated>,
) -> Result<Separated> {
    let (oi, omap, ri, rmap) = split(inst);
    let orders = solve_repeated(&oi, cfg, repeats, warm.map(|w| &w.orders.best.solution))?;
    let returns = solve_repeated(&ri, cfg, repeats, warm.map(|w| &w.returns.best.solution))?;
    Ok(Separated {
        orders: Part {
            inst: oi,
            map: omap,
            best: orders,
        },
        returns: Part {
            inst: ri,
            map: rmap,
            best: returns,
        },
    })
}

/// Integrated solve warm-started from the cheapest of `seeds` (which must
/// all cover `inst`).
pub fn solve_from_best(
    inst: &Instance,
    cfg: &AlnsConfig,
    repeats: usize,
    seeds: &[Solution],
) -> Result<SolveSummary> {
    let mut warm: Option<(f64, &Solution)> = None;
    for s in seeds {
        let c = crate::solution::evaluate(s, inst, 0.0)?.total;
        if warm.is_none_or(|(w, _)| c < w) {
            warm = Some((c, s));
        }
    }
    solve_repeated(inst, cfg, repeats, warm.map(|w| w.1))
}

/// Percentage change from `base` to `value`.
pub fn pct(value: f64, base: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        (value - base) / base * 100.0
    }
}

fn with_beta(inst: &Instance, beta: f64) -> Instance {
    let mut out = inst.clone();
    out.params.splitup_cost = beta;
    out
}

fn with_capacity(inst: &Instance, q: f64) -> Result<Instance> {
    let mut out = inst.clone();
    out.params.capacity = q;
    let v = out.validate();
    if v.is_empty() {
        Ok(out)
    } else {
        Err(Error::Validation(v))
    }
}

/// Pickers for the inflated integrated solve: E grown by the share of
/// return lines, rounded up.
pub fn inflated_pickers(inst: &Instance) -> usize {
    let n = inst.num_lines().max(1) as f64;
    let rho = inst.order_lines.iter().filter(|l| l.is_return()).count() as f64 / n;
    let e = inst.params.num_pickers as f64;
    ((e * (1.0 + rho) - 1e-9).ceil() as usize).max(inst.params.num_pickers)
}

/// One row of the returns study.
#[derive(Debug, Clone)]
pub struct ReturnsRow {
    pub label: String,
    pub pickers: usize,
    pub inflated_pickers: usize,
    /// β = 0
    pub split_int: SolveSummary,
    pub split_sep: Separated,
    /// β = `no_split_beta`
    pub nosplit_int1: SolveSummary,
    pub nosplit_int_raw: SolveSummary,
    pub nosplit_sep: Separated,
}

impl ReturnsRow {
    /// min of the integrated solve and the separated one
    pub fn nosplit_int2(&self) -> f64 {
        self.nosplit_int_raw.total().min(self.nosplit_sep.total())
    }

    pub fn split_dif(&self) -> f64 {
        pct(self.split_int.total(), self.split_sep.total())
    }

    pub fn nosplit_dif(&self) -> f64 {
        pct(self.nosplit_int2(), self.nosplit_sep.total())
    }

    pub fn dif_int(&self) -> f64 {
        pct(self.split_int.total(), self.nosplit_int2())
    }

    pub fn dif_sep(&self) -> f64 {
        pct(self.split_sep.total(), self.nosplit_sep.total())
    }
}

/// Integrated versus separated returns at β = 0 and β = `no_split_beta`.
///
/// The β-large cases run first; the β = 0 solves start from their
/// solutions, and every integrated solve also starts from the merged
/// separated solution, whichever is cheaper.
pub fn returns_study(inst: &Instance, label: &str, spec: &ExperimentSpec) -> Result<ReturnsRow> {
    let cfg = &spec.alns;
    let hi = with_beta(inst, spec.no_split_beta);
    let lo = with_beta(inst, 0.0);

    let nosplit_sep = solve_separated(&hi, cfg, spec.repeats, None)?;
    let hi_seed: Vec<Solution> = nosplit_sep.combined(&hi).into_iter().collect();
    let nosplit_int_raw = solve_from_best(&hi, cfg, spec.repeats, &hi_seed)?;

    let mut inflated = hi.clone();
    inflated.params.num_pickers = inflated_pickers(inst);
    let inf_seed: Vec<Solution> = nosplit_sep.combined(&inflated).into_iter().collect();
    let nosplit_int1 = solve_from_best(&inflated, cfg, spec.repeats, &inf_seed)?;

    let split_sep = solve_separated(&lo, cfg, spec.repeats, Some(&nosplit_sep))?;
    let mut lo_seeds: Vec<Solution> = split_sep.combined(&lo).into_iter().collect();
    lo_seeds.push(nosplit_int_raw.solution.clone());
    lo_seeds.extend(hi_seed);
    let split_int = solve_from_best(&lo, cfg, spec.repeats, &lo_seeds)?;

    Ok(ReturnsRow {
        label: label.to_string(),
        pickers: inst.params.num_pickers,
        inflated_pickers: inflated.params.num_pickers,
        split_int,
        split_sep,
        nosplit_int1,
        nosplit_int_raw,
        nosplit_sep,
    })
}

/// One capacity level of the capacity study.
#[derive(Debug, Clone)]
pub struct CapacityRow {
    pub label: String,
    pub capacity: f64,
    pub int: SolveSummary,
    pub sep: Separated,
}

pub fn capacity_study(inst: &Instance, label: &str, spec: &ExperimentSpec) -> Result<Vec<CapacityRow>> {
    let mut rows = Vec::new();
    for &delta in &spec.capacity_deltas {
        let q = inst.params.capacity + delta;
        let cell = with_capacity(inst, q)?;
        let sep = solve_separated(&cell, &spec.alns, spec.repeats, None)?;
        let seeds: Vec<Solution> = sep.combined(&cell).into_iter().collect();
        let int = solve_from_best(&cell, &spec.alns, spec.repeats, &seeds)?;
        rows.push(CapacityRow {
            label: label.to_string(),
            capacity: q,
            int,
            sep,
        });
    }
    Ok(rows)
}

/// One β (or capacity, for the deadline study) cell with its cost split.
#[derive(Debug, Clone)]
pub struct PartitionRow {
    pub label: String,
    pub x: f64,
    pub best: SolveSummary,
}

/// Solves over a β grid from largest to smallest, each cell warm-started
/// from the previous one.
pub fn beta_sweep(inst: &Instance, label: &str, spec: &ExperimentSpec) -> Result<Vec<PartitionRow>> {
    let mut betas = spec.betas.clone();
    betas.sort_by(|a, b| b.total_cmp(a));
    betas.dedup();
    let mut rows: Vec<PartitionRow> = Vec::new();
    for beta in betas {
        let cell = with_beta(inst, beta);
        let warm = rows.last().map(|r| &r.best.solution);
        let best = solve_repeated(&cell, &spec.alns, spec.repeats, warm)?;
        rows.push(PartitionRow {
            label: label.to_string(),
            x: beta,
            best,
        });
    }
    rows.reverse();
    Ok(rows)
}

/// Picking deadlines scaled by `deadline_factor`, one solve per capacity.
pub fn deadline_study(inst: &Instance, label: &str, spec: &ExperimentSpec) -> Result<Vec<PartitionRow>> {
    let mut tight = inst.clone();
    for l in tight.order_lines.iter_mut().filter(|l| !l.is_return()) {
        l.deadline *= spec.deadline_factor;
    }
    let mut rows = Vec::new();
    for &q in &spec.capacities {
        let cell = with_capacity(&tight, q)?;
        let best = solve_repeated(&cell, &spec.alns, spec.repeats, None)?;
        rows.push(PartitionRow {
            label: label.to_string(),
            x: q,
            best,
        });
    }
    Ok(rows)
}

/// A point of a plot series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub series: String,
}

/// Best-so-far trajectory of every search context.
pub fn trajectory_points(log: &[LogRow]) -> Vec<PlotPoint> {
    log.iter()
        .map(|r| PlotPoint {
            x: r.iteration as f64,
            y: r.best,
            series: format!("context {}", r.context),
        })
        .collect()
}

/// Wide table plus plot data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub plot: Vec<PlotPoint>,
}

fn cost(x: f64) -> String {
    format!("{x:.4}")
}

fn percent(x: f64) -> String {
    format!("{x:.2}")
}

impl Report {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }

    /// Comma-separated table with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn plot_csv(&self) -> String {
        plot_csv(&self.plot)
    }

    /// Column `name` of every row.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

pub fn plot_csv(points: &[PlotPoint]) -> String {
    let mut out = String::from("x,y,series\n");
    for p in points {
        let _ = writeln!(out, "{},{:.6},{}", p.x, p.y, p.series);
    }
    out
}

fn returns_report(rows: &[ReturnsRow]) -> Report {
    let mut rep = Report::new(&[
        "instance",
        "pickers",
        "split_int",
        "split_orders",
        "split_returns",
        "split_dif",
        "nosplit_pickers1",
        "nosplit_int1",
        "nosplit_int2",
        "nosplit_orders",
        "nosplit_returns",
        "nosplit_dif",
        "dif_int",
        "dif_sep",
    ]);
    for r in rows {
        rep.rows.push(vec![
            r.label.clone(),
            r.pickers.to_string(),
            cost(r.split_int.total()),
            cost(r.split_sep.orders.best.total()),
            cost(r.split_sep.returns.best.total()),
            percent(r.split_dif()),
            r.inflated_pickers.to_string(),
            cost(r.nosplit_int1.total()),
            cost(r.nosplit_int2()),
            cost(r.nosplit_sep.orders.best.total()),
            cost(r.nosplit_sep.returns.best.total()),
            percent(r.nosplit_dif()),
            percent(r.dif_int()),
            percent(r.dif_sep()),
        ]);
    }
    rep
}

fn capacity_report(rows: &[CapacityRow]) -> Report {
    let mut rep = Report::new(&["instance", "capacity", "int", "orders", "returns", "sep", "dif"]);
    for r in rows {
        rep.rows.push(vec![
            r.label.clone(),
            r.capacity.to_string(),
            cost(r.int.total()),
            cost(r.sep.orders.best.total()),
            cost(r.sep.returns.best.total()),
            cost(r.sep.total()),
            percent(pct(r.int.total(), r.sep.total())),
        ]);
        for (series, y) in [("int", r.int.total()), ("sep", r.sep.total())] {
            rep.plot.push(PlotPoint {
                x: r.capacity,
                y,
                series: format!("{} {series}", r.label),
            });
        }
    }
    rep
}

fn partition_report(rows: &[PartitionRow], x_name: &str) -> Report {
    let mut rep = Report::new(&["instance", x_name, "travel", "tardiness", "splitup", "total", "feasible"]);
    for r in rows {
        let c = &r.best.cost;
        rep.rows.push(vec![
            r.label.clone(),
            r.x.to_string(),
            cost(c.travel),
            cost(c.tardiness),
            cost(c.splitup),
            cost(c.total),
            r.best.feasible.to_string(),
        ]);
        for (series, y) in [("travel", c.travel), ("tardiness", c.tardiness), ("splitup", c.splitup)] {
            rep.plot.push(PlotPoint {
                x: r.x,
                y,
                series: format!("{} {series}", r.label),
            });
        }
    }
    rep
}

/// Runs one experiment over every instance of `spec`; relative instance
/// paths resolve against `base`.
pub fn experiment(kind: ExperimentKind, spec: &ExperimentSpec, base: &Path) -> Result<Report> {
    spec.validate()?;
    let mut insts = Vec::with_capacity(spec.instances.len());
    for r in &spec.instances {
        insts.push((r.label(), r.load(base)?));
    }
    Ok(match kind {
        ExperimentKind::Returns => {
            let mut rows = Vec::new();
            for (label, inst) in &insts {
                rows.push(returns_study(inst, label, spec)?);
            }
            returns_report(&rows)
        }
        ExperimentKind::Capacity => {
            let mut rows = Vec::new();
            for (label, inst) in &insts {
                rows.extend(capacity_study(inst, label, spec)?);
            }
            capacity_report(&rows)
        }
        ExperimentKind::BetaSweep => {
            let mut rows = Vec::new();
            for (label, inst) in &insts {
                rows.extend(beta_sweep(inst, label, spec)?);
            }
            partition_report(&rows, "beta")
        }
        ExperimentKind::Deadlines => {
            let mut rows = Vec::new();
            for (label, inst) in &insts {
                rows.extend(deadline_study(inst, label, spec)?);
            }
            partition_report(&rows, "capacity")
        }
    })
}

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pickopt::alns::{self, AlnsConfig};
use pickopt::bench::{self, experiment::plot_csv, ExperimentKind, ExperimentSpec, Heuristic};
use pickopt::mip::{self, CoverLimits, OracleLimits, SchedulePool};
use pickopt::solution::{evaluate_partial, SolutionReport};
use pickopt::{check_feasibility, evaluate, generate, Error, GenSpec, Instance};

#[derive(Parser)]
#[command(name = "pickopt", version, about = "Order batching, sequencing and picker routing with product returns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Generate(GenerateArgs),
    /// Solve an instance with the adaptive large neighborhood search.
    Solve(SolveArgs),
    /// Run a constructive benchmark heuristic repeatedly.
    Bench(BenchArgs),
    /// Run one of the experiment designs over a spec file.
    Experiment(ExperimentArgs),
    /// Check a solution file against an instance.
    Verify(VerifyArgs),
    /// Solve a tiny instance exactly by enumeration.
    Oracle(OracleArgs),
}

/// Declares a struct of optional flags, one per field, and a method that
/// copies every given flag onto the target.
macro_rules! override_flags {
    ($name:ident => $target:ty { $($(#[$m:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Args, Debug, Default)]
        struct $name {
            $(
                $(#[$m])*
                #[arg(long)]
                $field: Option<$ty>,
            )*
        }

        impl $name {
            fn apply(&self, target: &mut $target) {
                $(
                    if let Some(v) = self.$field.clone() {
                        target.$field = v.into();
                    }
                )*
            }
        }
    };
}

override_flags!(GenFlags => GenSpec {
    #[arg(alias = "order-lines")]
    num_orderlines: usize,
    return_fraction: f64,
    num_aisles: usize,
    aisle_length: f64,
    aisle_width: f64,
    travel_speed: f64,
    deadline_slots: u32,
    deadline_slot_length: f64,
    mean_lines_per_customer: usize,
});

override_flags!(ParamFlags => pickopt::InstanceParams {
    #[arg(alias = "pickers")]
    num_pickers: usize,
    #[arg(alias = "max-batches")]
    max_batches_per_picker: usize,
    capacity: f64,
    pick_time: f64,
    break_time: f64,
    travel_cost_rate: f64,
    tardiness_rate: f64,
    splitup_cost: f64,
    horizon: f64,
    tardiness_per_product: bool,
});

override_flags!(AlnsFlags => AlnsConfig {
    outer_iters: usize,
    inner_iters: usize,
    sa_worsening: f64,
    sa_convergence: f64,
    tol_sim_start: f64,
    tol_sim_end: f64,
    op2_tol: f64,
    op2_int: f64,
    op3a: f64,
    op3b: f64,
    op4_int: f64,
    op5_int: f64,
    op6a: f64,
    op6b: f64,
    op7a: f64,
    op7b: f64,
    op9_int: f64,
    op9_tol: f64,
    op9_pen: f64,
    op9_big: f64,
    op11_int: f64,
    score_init: f64,
    score_delta: f64,
    score_reset: f64,
    score_backprop: usize,
    #[arg(alias = "contexts")]
    num_contexts: usize,
    penalty_start: f64,
    penalty_growth: f64,
    noise: f64,
    mip_ops_enabled: bool,
    mip_int1: f64,
    mip_int2: f64,
    collect_schedules: bool,
    threads: usize,
});

#[derive(Args)]
struct SeedArg {
    /// Seed for every random choice.
    #[arg(long, env = "PICKOPT_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON generator settings; flags override them.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    gen: GenFlags,
    #[command(flatten)]
    params: ParamFlags,
    #[command(flatten)]
    seed: SeedArg,
    /// Instance file to write; stdout if omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// JSON search configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    alns: AlnsFlags,
    #[command(flatten)]
    seed: SeedArg,
    /// Solution file to start every search context from.
    #[arg(long)]
    warm_start: Option<PathBuf>,
    /// Solution file to write; stdout if omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Search log to write.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Best-so-far trajectory as x,y,series rows.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Batch pool dump (needs --mip-ops-enabled or --collect-schedules).
    #[arg(long)]
    batch_pool: Option<PathBuf>,
    /// Schedule pool dump (needs --collect-schedules).
    #[arg(long)]
    schedule_pool: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    instance: PathBuf,
    #[arg(long, default_value = "bm2")]
    heuristic: Heuristic,
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// Best solution file to write.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Per-repeat report; stdout if omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// returns, capacity, beta-sweep or deadlines
    kind: ExperimentKind,
    /// JSON experiment spec.
    spec: PathBuf,
    #[arg(long)]
    repeats: Option<usize>,
    #[command(flatten)]
    seed: SeedArg,
    /// Report file; stdout if omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Plot data (x,y,series) file.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    solution: PathBuf,
    /// Schedule pool dump: also check that no pool selection beats the solution.
    #[arg(long)]
    schedule_pool: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = OracleLimits::default().max_lines)]
    max_lines: usize,
    #[arg(long, default_value_t = OracleLimits::default().max_pickers)]
    max_pickers: usize,
    #[arg(long, default_value_t = OracleLimits::default().max_batches_per_picker)]
    max_batches_per_picker: usize,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

/// A run that completed but whose answer is unusable (exit 1).
struct Failure(String);

enum Fail {
    Lib(Error),
    Failed(Failure),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })
        }
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<(), Fail> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|source| Error::Parse { path: p.clone(), source })?
        }
        None => GenSpec::default(),
    };
    a.gen.apply(&mut spec);
    a.params.apply(&mut spec.params);
    if let Some(s) = a.seed.seed {
        spec.seed = s;
    }
    let inst = generate(&spec)?;
    write_out(a.out.as_deref(), &inst.to_json())?;
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> Result<(), Fail> {
    let inst = Instance::load(&a.instance)?;
    let mut cfg = match &a.config {
        Some(p) => AlnsConfig::load(p)?,
        None => AlnsConfig::default(),
    };
    a.alns.apply(&mut cfg);
    if let Some(s) = a.seed.seed {
        cfg.seed = s;
    }
    if a.schedule_pool.is_some() {
        cfg.collect_schedules = true;
    }
    let warm = match &a.warm_start {
        Some(p) => Some(SolutionReport::load(p)?.to_solution(&inst)?),
        None => None,
    };
    let out = alns::run_from(&inst, &cfg, warm.as_ref())?;
    write_out(a.out.as_deref(), &out.solution.to_report(&out.cost).to_json())?;
    if let Some(p) = &a.log {
        alns::save_log(&out.log, p)?;
    }
    if let Some(p) = &a.trajectory {
        write_out(Some(p), &plot_csv(&bench::experiment::trajectory_points(&out.log)))?;
    }
    if let Some(p) = &a.batch_pool {
        match &out.batch_pool {
            Some(pool) => pool.save(p)?,
            None => return Err(Error::Input("no batch pool was collected".into()).into()),
        }
    }
    if let Some(p) = &a.schedule_pool {
        out.schedule_pool.unwrap_or_default().save(p)?;
    }
    eprintln!(
        "objective {:.6} (travel {:.6}, tardiness {:.6}, split-up {:.6})",
        out.cost.total, out.cost.travel, out.cost.tardiness, out.cost.splitup
    );
    if !out.feasible {
        return Err(Fail::Failed(Failure("no capacity-feasible solution found".into())));
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), Fail> {
    let inst = Instance::load(&a.instance)?;
    let res = bench::best_of_repeats(a.heuristic, &inst, a.repeats, a.seed.seed.unwrap_or(0))?;
    let mut report = String::from("repeat,seed,objective\n");
    for (r, (s, c)) in res.seeds.iter().zip(&res.costs).enumerate() {
        report.push_str(&format!("{r},{s},{c:.6}\n"));
    }
    write_out(a.report.as_deref(), &report)?;
    if let Some(p) = &a.out {
        res.solution.to_report(&res.cost).save(p)?;
    }
    eprintln!("{} best of {}: {:.6} (repeat {})", a.heuristic, a.repeats, res.cost.total, res.best_repeat);
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<(), Fail> {
    let (mut spec, base): (ExperimentSpec, PathBuf) = ExperimentSpec::load(&a.spec)?;
    if let Some(r) = a.repeats {
        spec.repeats = r;
    }
    if let Some(s) = a.seed.seed {
        spec.alns.seed = s;
    }
    let report = bench::experiment(a.kind, &spec, &base)?;
    write_out(a.out.as_deref(), &report.to_csv())?;
    if let Some(p) = &a.plot {
        write_out(Some(p), &report.plot_csv())?;
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Fail> {
    let inst = Instance::load(&a.instance)?;
    let report = SolutionReport::load(&a.solution)?;
    let sol = report.to_solution(&inst)?;
    let mut problems: Vec<String> = check_feasibility(&sol, &inst).iter().map(|v| v.to_string()).collect();
    let cost = evaluate_partial(&sol, &inst, 0.0);
    println!("travel {:.6}", cost.travel);
    println!("tardiness {:.6}", cost.tardiness);
    println!("splitup {:.6}", cost.splitup);
    println!("capacity_excess {:.6}", evaluate_partial(&sol, &inst, 1.0).capacity_penalty);
    println!("objective {:.6}", cost.total);
    if (report.cost.total - cost.total).abs() > 1e-6 {
        problems.push(format!(
            "recorded objective {:.6} differs from recomputed {:.6}",
            report.cost.total, cost.total
        ));
    }
    if let Some(p) = &a.schedule_pool {
        let pool = SchedulePool::load(p, &inst)?;
        match mip::schedule_pool_select(&pool, &inst, CoverLimits::default()) {
            Ok((best, _)) => {
                println!("pool_best {best:.6}");
                if best < cost.total - 1e-6 {
                    problems.push(format!("schedule pool holds a cheaper solution ({best:.6})"));
                }
            }
            Err(Error::Infeasible(m)) => println!("pool_best none ({m})"),
            Err(e) => return Err(e.into()),
        }
    }
    if problems.is_empty() {
        println!("feasible");
        Ok(())
    } else {
        for p in &problems {
            println!("violation: {p}");
        }
        Err(Fail::Failed(Failure(format!("{} violation(s)", problems.len()))))
    }
}

fn cmd_oracle(a: OracleArgs) -> Result<(), Fail> {
    let inst = Instance::load(&a.instance)?;
    let limits = OracleLimits {
        max_lines: a.max_lines,
        max_pickers: a.max_pickers,
        max_batches_per_picker: a.max_batches_per_picker,
    };
    let (cost, sol) = mip::brute_force_oracle(&inst, limits)?;
    debug_assert!(evaluate(&sol, &inst, 0.0).is_ok());
    write_out(a.out.as_deref(), &sol.to_report(&cost).to_json())?;
    eprintln!("optimal objective {:.6}", cost.total);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Failed(Failure(msg))) => {
            eprintln!("pickopt: {msg}");
            ExitCode::from(1)
        }
        Err(Fail::Lib(e)) => {
            eprintln!("pickopt: {e}");
            let code = match e {
                Error::Input(_) | Error::Parse { .. } | Error::Validation(_) | Error::Io { .. } => 2,
                Error::LimitsExceeded(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

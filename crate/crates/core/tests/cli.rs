use std::path::Path;
use std::process::{Command, Output};

use pickopt::solution::SolutionReport;

fn pickopt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pickopt"))
        .args(args)
        .current_dir(dir)
        .env_remove("PICKOPT_SEED")
        .output()
        .expect("binary runs")
}

fn objective(dir: &Path, file: &str) -> f64 {
    SolutionReport::load(dir.join(file)).unwrap().cost.total
}

#[test]
fn generate_then_solve_twice_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(pickopt(d, &["generate", "--order-lines", "60", "--return-fraction", "0.2", "--seed", "7", "-o", "i.json"])
        .status
        .success());
    for f in ["a.json", "b.json"] {
        let out = pickopt(d, &["solve", "i.json", "--seed", "7", "--outer-iters", "5", "-o", f]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(d.join("a.json")).unwrap(), std::fs::read(d.join("b.json")).unwrap());
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(pickopt(d, &["generate", "--order-lines", "30", "--seed", "3", "-o", "i.json"]).status.success());
    assert!(pickopt(d, &["solve", "i.json", "--seed", "9", "--outer-iters", "3", "-o", "a.json"]).status.success());
    let env = Command::new(env!("CARGO_BIN_EXE_pickopt"))
        .args(["solve", "i.json", "--outer-iters", "3", "-o", "b.json"])
        .current_dir(d)
        .env("PICKOPT_SEED", "9")
        .output()
        .unwrap();
    assert!(env.status.success());
    assert_eq!(std::fs::read(d.join("a.json")).unwrap(), std::fs::read(d.join("b.json")).unwrap());
}

#[test]
fn verify_names_a_duplicated_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(pickopt(d, &["generate", "--order-lines", "20", "--seed", "1", "-o", "i.json"]).status.success());
    assert!(pickopt(d, &["solve", "i.json", "--outer-iters", "2", "-o", "s.json"]).status.success());
    let ok = pickopt(d, &["verify", "i.json", "s.json"]);
    assert_eq!(ok.status.code(), Some(0));

    let mut rep = SolutionReport::load(d.join("s.json")).unwrap();
    let route = rep.schedules.iter_mut().flat_map(|s| &mut s.routes).next().unwrap();
    let first = route.stops[0];
    route.stops.push(first);
    rep.save(d.join("bad.json")).unwrap();
    let bad = pickopt(d, &["verify", "i.json", "bad.json"]);
    assert_eq!(bad.status.code(), Some(1));
    let text = String::from_utf8_lossy(&bad.stdout);
    assert!(text.contains(&format!("order line {first}")), "{text}");
}

#[test]
fn oracle_and_solve_agree_on_six_lines() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = pickopt(
        d,
        &[
            "generate", "--order-lines", "6", "--return-fraction", "0.34", "--pickers", "1", "--max-batches", "2",
            "--capacity", "12", "--deadline-slot-length", "120", "--deadline-slots", "3", "--seed", "4", "-o", "t.json",
        ],
    );
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(pickopt(d, &["oracle", "t.json", "-o", "o.json"]).status.success());
    assert!(pickopt(d, &["solve", "t.json", "--seed", "2", "-o", "s.json"]).status.success());
    assert!((objective(d, "o.json") - objective(d, "s.json")).abs() <= 1e-6);
}

#[test]
fn bench_reports_every_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(pickopt(d, &["generate", "--order-lines", "40", "--seed", "2", "-o", "i.json"]).status.success());
    let out = pickopt(d, &["bench", "i.json", "--heuristic", "bm1", "--repeats", "4", "--seed", "5", "-o", "b.json"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("repeat,seed,objective"));
    assert_eq!(pickopt(d, &["verify", "i.json", "b.json"]).status.code(), Some(0));
}

#[test]
fn experiment_writes_report_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("spec.json"),
        r#"{"instances": [{"num_orderlines": 20, "seed": 1, "return_fraction": 0.2}],
            "repeats": 1, "betas": [0.0, 1.0],
            "alns": {"outer_iters": 2, "inner_iters": 10, "num_contexts": 1}}"#,
    )
    .unwrap();
    let out = pickopt(d, &["experiment", "beta-sweep", "spec.json", "-o", "r.csv", "--plot", "p.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(d.join("r.csv")).unwrap();
    assert_eq!(report.lines().count(), 3);
    let plot = std::fs::read_to_string(d.join("p.csv")).unwrap();
    assert_eq!(plot.lines().next(), Some("x,y,series"));
    assert_eq!(plot.lines().count(), 7);
}

#[test]
fn usage_and_input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(pickopt(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(pickopt(d, &["solve", "missing.json"]).status.code(), Some(2));
    assert_eq!(pickopt(d, &["generate", "--no-such-flag"]).status.code(), Some(2));
    std::fs::write(d.join("cfg.json"), r#"{"outer_iterz": 3}"#).unwrap();
    assert!(pickopt(d, &["generate", "--order-lines", "5", "-o", "i.json"]).status.success());
    assert_eq!(pickopt(d, &["solve", "i.json", "--config", "cfg.json"]).status.code(), Some(2));
}

#[test]
fn infeasible_solve_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // one picker, one batch, 4 kg of capacity for ~25 kg of picks
    assert!(pickopt(d, &["generate", "--order-lines", "10", "--return-fraction", "0", "--pickers", "1", "--max-batches", "1", "--capacity", "4", "-o", "i.json"])
        .status
        .success());
    let out = pickopt(d, &["solve", "i.json", "--outer-iters", "2", "-o", "s.json"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

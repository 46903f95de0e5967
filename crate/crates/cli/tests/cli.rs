use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use meanfield_cli::commands::{ContinueSummary, GreenReport, SolveSummary, CONTINUATION_CSV, SUMMARY_JSON};
use meanfield_cli::criteria::Status;
use meanfield_cli::report::{self, Report};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_meanfield"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn");
    eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const TRIVIAL: &str = "grid = 32\n[h]\nkind = \"constant\"\nvalue = 1.0\n[solver]\ntol_residual = 1e-11\n";

#[test]
fn green_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "g.toml", "[h]\nkind = \"constant\"\nvalue = 1.0\n");
    let out = tmp.path().join("run");
    let o = run(&["green", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success());
    let g: GreenReport = serde_json::from_slice(&fs::read(out.join("green.json")).unwrap()).unwrap();
    assert_eq!(g.grid, 256);
    assert!((g.robin + 5.242131703646038).abs() < 1e-6);
    let e = g.expansion.expect("expansion at n = 256");
    assert!((e.c[0] + e.c[2] - 4.0 * std::f64::consts::PI).abs() < 1e-2);
}

#[test]
fn solve_trivial() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", TRIVIAL);
    let out = tmp.path().join("run");
    let o = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let s: SolveSummary = serde_json::from_slice(&fs::read(out.join(SUMMARY_JSON)).unwrap()).unwrap();
    assert!(s.residual <= 1e-10 && s.pde_residual <= 1e-10);
    assert!(s.max_abs_u <= 1e-10);
    let r = report::build(&out).unwrap();
    assert!(r.passed && r.criteria.is_empty());
}

#[test]
fn grid_override_and_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", TRIVIAL);
    let out = tmp.path().join("run");
    let o = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--grid", "48"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`grid`"));
    let o = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--grid", "64", "--quiet"]);
    assert!(o.status.success());
    let s: SolveSummary = serde_json::from_slice(&fs::read(out.join(SUMMARY_JSON)).unwrap()).unwrap();
    assert_eq!(s.grid, 64);

    let bad = write_config(tmp.path(), "b.toml", "grid = 32\n[h]\nkind = \"constant\"\nvalue = -1.0\n");
    let o = run(&["solve", "--config", &bad, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`h`"));

    let sched = write_config(
        tmp.path(),
        "c.toml",
        "grid = 32\n[h]\nkind = \"constant\"\nvalue = 1.0\n[continue]\nschedule = [0.5, 1.0]\n",
    );
    let o = run(&["continue", "--config", &sched, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("continue.schedule"));
}

#[test]
fn numerical_failure_names_module() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.toml",
        "grid = 32\n[h]\nkind = \"gaussian_bump_exp\"\n[solver]\nmax_steps = 3\nnewton = false\n",
    );
    let out = tmp.path().join("run");
    let o = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("solver failed"));
}

const BUMP: &str = "grid = 256\n[h]\nkind = \"gaussian_bump_exp\"\n[continue]\nschedule = [1.0, 0.5, 0.25, 0.125, 0.0625]\n";

#[test]
fn continue_bump_lambda_increases() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", BUMP);
    let out = tmp.path().join("run");
    let o = run(&["continue", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success());
    let mut r = csv::Reader::from_path(out.join(CONTINUATION_CSV)).unwrap();
    assert_eq!(r.headers().unwrap().get(1), Some("lambda"));
    let lambda: Vec<f64> = r.records().map(|rec| rec.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(lambda.len(), 5);
    assert!(lambda.windows(2).all(|w| w[1] > w[0]), "{lambda:?}");

    let rep = report::write(&out).unwrap();
    assert!(out.join(report::REPORT_MD).exists());
    let ratio = rep
        .trends
        .iter()
        .find(|t| t.name.starts_with("identity_ratio"))
        .expect("identity trend");
    // three identity points give a confidence interval around the slope
    let ci = ratio.fit.slope_ci95.expect("interval");
    assert!(ci[0] <= ratio.fit.slope && ratio.fit.slope <= ci[1]);
    let o = run(&["report", out.to_str().unwrap(), "--quiet"]);
    let back: Report = serde_json::from_slice(&fs::read(out.join(report::REPORT_JSON)).unwrap()).unwrap();
    assert_eq!(o.status.code(), Some(if back.passed { 0 } else { 1 }));
}

#[test]
fn bounded_run_marks_bounded_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "grid = 64\n[h]\nkind = \"cosine_sum\"\noffset = 1.0\nterms = [{ amplitude = 0.5, k = [1, 1] }]\n\
         [continue]\neps_min = 1e-4\ncritical_solve = true\n",
    );
    let out = tmp.path().join("run");
    let o = run(&["continue", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success());
    let s: ContinueSummary = serde_json::from_slice(&fs::read(out.join(SUMMARY_JSON)).unwrap()).unwrap();
    assert!(s.critical.is_some() && s.halted_at.is_none());
    let rep = report::build(&out).unwrap();
    let c4 = rep.criteria.iter().find(|c| c.id == 4).expect("C4");
    assert_eq!(c4.status, Status::Pass, "{}", c4.detail);
    assert!(rep.passed);
}

#[test]
fn report_integrity_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["report", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["report", tmp.path().join("nope").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));

    let cfg = write_config(tmp.path(), "c.toml", BUMP);
    let out = tmp.path().join("run");
    assert!(run(&["continue", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"])
        .status
        .success());
    let csv_path = out.join(CONTINUATION_CSV);
    let text = fs::read_to_string(&csv_path).unwrap();
    fs::write(&csv_path, text.replacen('1', "2", 1)).unwrap();
    let o = run(&["report", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("checksum"));
}

#[test]
fn manifest_echoes_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", TRIVIAL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        assert!(run(&["solve", "--config", &cfg, "--out", d.to_str().unwrap(), "--quiet"])
            .status
            .success());
    }
    let ma = fs::read(a.join("manifest.json")).unwrap();
    assert_eq!(ma, fs::read(b.join("manifest.json")).unwrap());
    let m: serde_json::Value = serde_json::from_slice(&ma).unwrap();
    assert_eq!(m["config"]["grid"], 32);
    assert_eq!(m["config"]["mode"], "solve");
    assert_eq!(m["config"]["solver"]["tol_residual"], 1e-11);
    assert!(m["artifacts"][SUMMARY_JSON]["sha256"].as_str().unwrap().len() == 64);
}

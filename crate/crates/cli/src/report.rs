//! Consolidated report over a finished run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use meanfield::blowup::BlowupDiagnostics;
use serde::{Deserialize, Serialize};

use crate::artifacts::{verify, Check, Manifest};
use crate::commands::{ContinueSummary, FitReport, CONTINUATION_CSV, DIAGNOSTICS_JSONL, FIT_JSON, SUMMARY_JSON};
use crate::config::Scenario;
use crate::criteria::{self, Outcome, BOUNDED_LAMBDA_MAX};
use crate::error::CliError;
use crate::stats::{line_fit, LineFit};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trend {
    /// What is regressed on what.
    pub name: String,
    pub fit: LineFit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub mode: String,
    pub scenario: Option<Scenario>,
    pub checks: Vec<Check>,
    pub criteria: Vec<Outcome>,
    pub trends: Vec<Trend>,
    pub passed: bool,
}

fn read<T: for<'de> Deserialize<'de>>(root: &Path, name: &str) -> Result<T, CliError> {
    let bytes = fs::read(root.join(name))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Integrity(format!("{name}: {e}")))
}

fn artifact(m: &Manifest, name: &str) -> Result<(), CliError> {
    if m.artifacts.contains_key(name) {
        Ok(())
    } else {
        Err(CliError::Integrity(format!("{} run without {name}", m.mode)))
    }
}

pub fn read_diagnostics(root: &Path) -> Result<Vec<BlowupDiagnostics>, CliError> {
    let text = fs::read_to_string(root.join(DIAGNOSTICS_JSONL))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::Integrity(format!("{DIAGNOSTICS_JSONL}: {e}"))))
        .collect()
}

/// The lambda column of the CSV must agree with the JSON diagnostics.
fn cross_check(root: &Path, rows: &[BlowupDiagnostics]) -> Result<(), CliError> {
    let mut r = csv::Reader::from_path(root.join(CONTINUATION_CSV))?;
    let mut count = 0;
    for (rec, d) in r.records().zip(rows) {
        let rec = rec?;
        let lambda: f64 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::Integrity("unparsable lambda column".into()))?;
        if lambda.to_bits() != d.lambda.to_bits() {
            return Err(CliError::Integrity(format!("CSV and diagnostics disagree at eps {}", d.eps)));
        }
        count += 1;
    }
    if count != rows.len() {
        return Err(CliError::Integrity("CSV and diagnostics have different lengths".into()));
    }
    Ok(())
}

fn trend(name: &str, pts: impl Iterator<Item = (f64, f64)>) -> Option<Trend> {
    let (x, y): (Vec<f64>, Vec<f64>) = pts.filter(|(a, b)| a.is_finite() && b.is_finite()).unzip();
    line_fit(&x, &y).map(|fit| Trend { name: name.into(), fit })
}

pub fn continuation_trends(rows: &[BlowupDiagnostics]) -> Vec<Trend> {
    let mut out = Vec::new();
    out.extend(trend(
        "identity_ratio vs 1/lambda",
        rows.iter()
            .filter_map(|d| d.identity.as_ref().map(|i| (1.0 / d.lambda, i.ratio))),
    ));
    out.extend(trend(
        "ln remainder_scaled vs lambda",
        rows.iter()
            .filter_map(|d| d.identity.as_ref().map(|i| (d.lambda, i.remainder_scaled.abs().ln()))),
    ));
    out.extend(trend(
        "ln cp_gradient_scaled vs lambda",
        rows.iter()
            .filter_map(|d| d.cp_gradient_scaled.map(|c| (d.lambda, c.ln()))),
    ));
    out.extend(trend(
        "ln farfield_scaled vs lambda",
        rows.iter().filter_map(|d| d.farfield_scaled.map(|c| (d.lambda, c.ln()))),
    ));
    out
}

/// Bounded unless the configuration says otherwise or lambda clearly grows past the bounded limit.
pub fn infer_scenario(configured: Option<Scenario>, rows: &[BlowupDiagnostics]) -> Scenario {
    configured.unwrap_or_else(|| {
        let sup = rows.iter().map(|d| d.lambda).fold(f64::NEG_INFINITY, f64::max);
        if sup > BOUNDED_LAMBDA_MAX {
            Scenario::Blowup
        } else {
            Scenario::Bounded
        }
    })
}

pub fn build(root: &Path) -> Result<Report, CliError> {
    let m = verify(root)?;
    let mut criteria_out = Vec::new();
    let mut trends = Vec::new();
    let mut scenario = None;
    match m.mode.as_str() {
        "continue" => {
            artifact(&m, DIAGNOSTICS_JSONL)?;
            artifact(&m, CONTINUATION_CSV)?;
            artifact(&m, SUMMARY_JSON)?;
            let rows = read_diagnostics(root)?;
            cross_check(root, &rows)?;
            let summary: ContinueSummary = read(root, SUMMARY_JSON)?;
            let s = infer_scenario(m.config.continuation.scenario, &rows);
            scenario = Some(s);
            trends = continuation_trends(&rows);
            match s {
                Scenario::Bounded => {
                    criteria_out.push(criteria::bounded_lambda(&rows, summary.critical.as_ref()));
                }
                Scenario::Blowup => {
                    criteria_out.push(criteria::blowup_identity(&rows));
                    criteria_out.push(criteria::critical_point(&rows));
                    criteria_out.push(criteria::farfield(&rows));
                    criteria_out.push(match rows.last() {
                        Some(d) => criteria::infimum(d.j_value, summary.inf_formula),
                        None => Outcome::not_applicable(8, criteria::title(8), "no diagnostics"),
                    });
                }
            }
        }
        "testfn" => {
            artifact(&m, FIT_JSON)?;
            let fit: FitReport = read(root, FIT_JSON)?;
            criteria_out.push(criteria::expansion(&fit.fit));
        }
        _ => {}
    }
    let passed = m.checks.iter().all(|c| c.passed) && criteria_out.iter().all(Outcome::passed);
    Ok(Report {
        mode: m.mode,
        scenario,
        checks: m.checks,
        criteria: criteria_out,
        trends,
        passed,
    })
}

fn ci(v: Option<[f64; 2]>) -> String {
    v.map(|[a, b]| format!("[{a:.4e}, {b:.4e}]")).unwrap_or_else(|| "-".into())
}

pub fn markdown(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# meanfield report: {} run\n", r.mode);
    if let Some(sc) = r.scenario {
        let _ = writeln!(s, "scenario: {sc:?}\n");
    }
    let _ = writeln!(s, "## Run checks\n\n| check | value | limit | status |\n|---|---|---|---|");
    for c in &r.checks {
        let _ = writeln!(
            s,
            "| {} | {:.4e} | {:.4e} | {} |",
            c.name,
            c.value,
            c.limit,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    if !r.criteria.is_empty() {
        let _ = writeln!(s, "\n## Criteria\n\n| id | criterion | status | detail |\n|---|---|---|---|");
        for o in &r.criteria {
            let _ = writeln!(s, "| C{} | {} | {} | {} |", o.id, o.title, o.status, o.detail);
        }
    }
    if !r.trends.is_empty() {
        let _ = writeln!(
            s,
            "\n## Trend fits\n\n| fit | points | slope | slope 95% CI | intercept | intercept 95% CI |\n|---|---|---|---|---|---|"
        );
        for t in &r.trends {
            let _ = writeln!(
                s,
                "| {} | {} | {:.6e} | {} | {:.6e} | {} |",
                t.name,
                t.fit.points,
                t.fit.slope,
                ci(t.fit.slope_ci95),
                t.fit.intercept,
                ci(t.fit.intercept_ci95)
            );
        }
    }
    let _ = writeln!(s, "\noverall: {}", if r.passed { "PASS" } else { "FAIL" });
    s
}

/// Build the report and write `report.json` and `report.md` beside the manifest.
pub fn write(root: &Path) -> Result<Report, CliError> {
    let r = build(root)?;
    let mut json = serde_json::to_string_pretty(&r)?;
    json.push('\n');
    meanfield::snapshot::write_atomic(&root.join(REPORT_JSON), json.as_bytes())?;
    meanfield::snapshot::write_atomic(&root.join(REPORT_MD), markdown(&r).as_bytes())?;
    Ok(r)
}

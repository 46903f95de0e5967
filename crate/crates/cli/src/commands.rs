//! The four computing subcommands. Each writes its artifacts and a manifest into the run directory.

use std::path::Path;

use meanfield::blowup::{continuation_run_with, BlowupDiagnostics};
use meanfield::functional::{existence_condition, global_max, ExistenceReport, EIGHT_PI};
use meanfield::green::{green_function, green_local_expansion, robin_constant, LocalExpansion};
use meanfield::snapshot::{encode, SnapshotMeta};
use meanfield::solver::{minimize, SolverState};
use meanfield::testfn::{inf_j_formula, j_expansion_fit, ExpansionFit};
use meanfield::{Point, TorusGrid};
use serde::{Deserialize, Serialize};

use crate::artifacts::{num, opt_num, Check, Manifest, RunDir};
use crate::config::{Mode, RunConfig};
use crate::criteria::{CriticalSolve, INTERCEPT_REL_TOL, SLOPE_REL_TOL};
use crate::error::CliError;

pub const CONTINUATION_CSV: &str = "continuation.csv";
pub const DIAGNOSTICS_JSONL: &str = "diagnostics.jsonl";
pub const SUMMARY_JSON: &str = "summary.json";
pub const TESTFN_CSV: &str = "testfn.csv";
pub const FIT_JSON: &str = "fit.json";
pub const GREEN_JSON: &str = "green.json";

pub const CSV_HEADER: [&str; 10] = [
    "eps",
    "lambda",
    "peak_x",
    "peak_y",
    "rho_eps",
    "identity_ratio",
    "remainder_scaled",
    "cp_gradient_scaled",
    "farfield_scaled",
    "J_value",
];

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub grid: TorusGrid,
    pub out: &'a Path,
    pub quiet: bool,
}

impl Context<'_> {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn run(mode: Mode, ctx: &Context) -> Result<Manifest, CliError> {
    match mode {
        Mode::Solve => solve(ctx),
        Mode::Continue => continuation(ctx),
        Mode::Green => green(ctx),
        Mode::Testfn => testfn(ctx),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolveSummary {
    pub grid: usize,
    pub rho: f64,
    pub residual: f64,
    pub pde_residual: f64,
    pub mass: f64,
    pub j_value: f64,
    pub lambda: f64,
    pub max_abs_u: f64,
    pub steps: usize,
    pub newton_iterations: usize,
    pub existence: ExistenceReport,
}

fn snapshot(run: &mut RunDir, name: &str, state: &SolverState, eps: Option<f64>) -> Result<(), CliError> {
    run.write(name, &encode(&state.u))?;
    let meta = SnapshotMeta {
        n: state.u.n(),
        name: name.into(),
        rho: Some(state.rho),
        eps,
    };
    run.write_json(&format!("{name}.json"), &meta)
}

fn solve(ctx: &Context) -> Result<Manifest, CliError> {
    let cfg = ctx.config;
    let hs = cfg.h.sample(&ctx.grid).map_err(CliError::numerical("prescribed"))?;
    let existence = existence_condition(&cfg.h, &ctx.grid).map_err(CliError::numerical("functional"))?;
    let rho = cfg.solve.rho;
    ctx.say(format!("solve: n = {}, rho = {rho}", ctx.grid.n()));
    let state = minimize(rho, &hs, None, &cfg.solver).map_err(CliError::numerical("solver"))?;
    let pde = state.pde_residual(&hs).map_err(CliError::numerical("solver"))?;
    let summary = SolveSummary {
        grid: ctx.grid.n(),
        rho,
        residual: state.residual,
        pde_residual: pde,
        mass: state.mass,
        j_value: state.j_value,
        lambda: state.peak(),
        max_abs_u: state.u.max_abs(),
        steps: state.step_count,
        newton_iterations: state.newton_iterations,
        existence,
    };
    let mut run = RunDir::create(ctx.out)?;
    run.write_json(SUMMARY_JSON, &summary)?;
    if cfg.solve.snapshot {
        snapshot(&mut run, "field.bin", &state, None)?;
    }
    let tol = cfg.solver.tol_residual;
    let checks = vec![
        Check::at_most("residual", state.residual, tol),
        Check::at_most("pde_residual", pde, 10.0 * tol),
        Check::at_most("mass_defect", (state.mass - 1.0).abs(), 1e-10),
    ];
    ctx.say(format!(
        "residual {:.3e}, PDE residual {pde:.3e}, J {:.12}, max|u| {:.3e}",
        state.residual,
        state.j_value,
        state.u.max_abs()
    ));
    run.finish("solve", cfg, checks)
}

pub fn csv_row(d: &BlowupDiagnostics) -> [String; 10] {
    [
        num(d.eps),
        num(d.lambda),
        num(d.peak[0]),
        num(d.peak[1]),
        num(d.rho_eps),
        opt_num(d.identity.as_ref().map(|i| i.ratio)),
        opt_num(d.identity.as_ref().map(|i| i.remainder_scaled)),
        opt_num(d.cp_gradient_scaled),
        opt_num(d.farfield_scaled),
        num(d.j_value),
    ]
}

pub fn continuation_csv(rows: &[BlowupDiagnostics]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for d in rows {
        w.write_record(csv_row(d))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn jsonl(rows: &[BlowupDiagnostics]) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    for d in rows {
        serde_json::to_writer(&mut out, d)?;
        out.push(b'\n');
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ContinueSummary {
    pub grid: usize,
    pub schedule: Vec<f64>,
    pub points: usize,
    pub halted_at: Option<f64>,
    pub failure: Option<(f64, String)>,
    pub robin: f64,
    pub h_max_point: Point,
    pub inf_formula: f64,
    pub existence: ExistenceReport,
    pub critical: Option<CriticalSolve>,
}

fn continuation(ctx: &Context) -> Result<Manifest, CliError> {
    let cfg = ctx.config;
    let c = &cfg.continuation;
    let schedule = c.resolved_schedule();
    let hs = cfg.h.sample(&ctx.grid).map_err(CliError::numerical("prescribed"))?;
    let (pmax, _) = global_max(&cfg.h, &ctx.grid).map_err(CliError::numerical("functional"))?;
    let robin = green_function(&ctx.grid, pmax).map_err(CliError::numerical("green"))?.robin;
    let inf_formula = inf_j_formula(&cfg.h, &ctx.grid, robin).map_err(CliError::numerical("testfn"))?;
    let existence = existence_condition(&cfg.h, &ctx.grid).map_err(CliError::numerical("functional"))?;

    let mut run = RunDir::create(ctx.out)?;
    let mut rows: Vec<BlowupDiagnostics> = Vec::new();
    let mut io_error: Option<CliError> = None;
    ctx.say(format!("continue: n = {}, {} scheduled points", ctx.grid.n(), schedule.len()));
    let result = continuation_run_with(&cfg.h, &ctx.grid, &schedule, None, &cfg.solver, &c.options(), |d, _| {
        rows.push(d.clone());
        ctx.say(format!(
            "eps {:.4e}  lambda {:.6}  ratio {}  J {:.10}",
            d.eps,
            d.lambda,
            d.identity
                .as_ref()
                .map(|i| format!("{:.4}", i.ratio))
                .unwrap_or_else(|| "-".into()),
            d.j_value
        ));
        // keep partial results on disk as the run proceeds
        if io_error.is_none() {
            let res = jsonl(&rows)
                .and_then(|b| run.write(DIAGNOSTICS_JSONL, &b))
                .and_then(|_| continuation_csv(&rows))
                .and_then(|b| run.write(CONTINUATION_CSV, &b));
            if let Err(e) = res {
                io_error = Some(e);
            }
        }
    })
    .map_err(CliError::numerical("blowup"))?;
    if let Some(e) = io_error {
        return Err(e);
    }
    run.write(DIAGNOSTICS_JSONL, &jsonl(&result.diagnostics)?)?;
    run.write(CONTINUATION_CSV, &continuation_csv(&result.diagnostics)?)?;
    if let Some((eps, msg)) = &result.failure {
        ctx.say(format!("solver failure at eps {eps:e}: {msg}"));
    }
    if let Some(eps) = result.halted_at {
        ctx.say(format!("resolution guard stopped the run at eps {eps:e}"));
    }

    let critical = match (&result.last_state, c.critical_solve) {
        (Some(last), true) => {
            ctx.say("critical solve at rho = 8 pi");
            Some(match minimize(EIGHT_PI, &hs, Some(last.u.clone()), &cfg.solver) {
                Ok(s) => CriticalSolve {
                    residual: Some(s.residual),
                    pde_residual: s.pde_residual(&hs).ok(),
                    lambda: Some(s.peak()),
                    j_value: Some(s.j_value),
                    error: None,
                },
                Err(e) => CriticalSolve {
                    residual: None,
                    pde_residual: None,
                    lambda: None,
                    j_value: None,
                    error: Some(e.to_string()),
                },
            })
        }
        _ => None,
    };
    if c.snapshot {
        if let Some(last) = &result.last_state {
            let eps = result.diagnostics.last().map(|d| d.eps);
            snapshot(&mut run, "final.bin", last, eps)?;
        }
    }
    let mut checks = vec![Check::flag("no_solver_failure", result.failure.is_none())];
    if let Some(cs) = &critical {
        checks.push(Check::flag("critical_solve_converged", cs.error.is_none()));
    }
    let summary = ContinueSummary {
        grid: ctx.grid.n(),
        schedule,
        points: result.diagnostics.len(),
        halted_at: result.halted_at,
        failure: result.failure.clone(),
        robin,
        h_max_point: pmax,
        inf_formula,
        existence,
        critical,
    };
    run.write_json(SUMMARY_JSON, &summary)?;
    run.finish("continue", cfg, checks)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GreenReport {
    pub grid: usize,
    pub pole: Point,
    pub robin: f64,
    pub robin_extrapolated: Option<f64>,
    pub extrapolation_history: Option<Vec<f64>>,
    pub extrapolation_error: Option<String>,
    pub expansion: Option<LocalExpansion>,
    pub expansion_error: Option<String>,
}

fn green(ctx: &Context) -> Result<Manifest, CliError> {
    let cfg = ctx.config;
    let pole = cfg.green.pole;
    let gd = green_function(&ctx.grid, pole).map_err(CliError::numerical("green"))?;
    let (extrap, hist, extrap_err) = match robin_constant(&gd) {
        Ok(e) => (Some(e.value), Some(e.history), None),
        Err(meanfield::Error::ExtrapolationDiverged { history }) => (
            None,
            Some(history),
            Some("circle-mean extrapolation did not settle".to_string()),
        ),
        Err(e) => (None, None, Some(e.to_string())),
    };
    let (expansion, expansion_error) = match green_local_expansion(&gd) {
        Ok(e) => (Some(e), None),
        Err(e) => (None, Some(e.to_string())),
    };
    ctx.say(format!("green: n = {}, A = {:.15}", ctx.grid.n(), gd.robin));
    if let Some(e) = &expansion {
        ctx.say(format!("b = {:?}, c = {:?}", e.b, e.c));
    }
    let mut checks = vec![Check::at_most(
        "robin_extrapolation_agreement",
        extrap.map(|v| (v - gd.robin).abs()).unwrap_or(f64::INFINITY),
        1e-6,
    )];
    if ctx.grid.n() >= meanfield::green::EXPANSION_MIN_GRID {
        checks.push(Check::flag("local_expansion", expansion.is_some()));
    }
    let report = GreenReport {
        grid: ctx.grid.n(),
        pole: gd.pole,
        robin: gd.robin,
        robin_extrapolated: extrap,
        extrapolation_history: hist,
        extrapolation_error: extrap_err,
        expansion,
        expansion_error,
    };
    let mut run = RunDir::create(ctx.out)?;
    run.write_json(GREEN_JSON, &report)?;
    run.finish("green", cfg, checks)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub grid: usize,
    pub center: Point,
    pub fit: ExpansionFit,
    pub intercept_rel_error: f64,
    pub slope_rel_error: f64,
}

fn testfn(ctx: &Context) -> Result<Manifest, CliError> {
    let cfg = ctx.config;
    let t = &cfg.testfn;
    let center = match t.center {
        Some(c) => c,
        None => global_max(&cfg.h, &ctx.grid).map_err(CliError::numerical("functional"))?.0,
    };
    let gd = green_function(&ctx.grid, center).map_err(CliError::numerical("green"))?;
    let eps = t.resolved_eps();
    ctx.say(format!("testfn: n = {}, {} eps values, centre {center:?}", ctx.grid.n(), eps.len()));
    let fit = j_expansion_fit(&cfg.h, center, &eps, &gd, t.alpha_prefactor).map_err(CliError::numerical("testfn"))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["eps", "J_value"])?;
    for (e, j) in fit.eps.iter().zip(&fit.j_values) {
        w.write_record([num(*e), num(*j)])?;
    }
    let table = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    let ri = ((fit.intercept - fit.predicted_intercept) / fit.predicted_intercept).abs();
    let rs = ((fit.slope - fit.predicted_slope) / fit.predicted_slope).abs();
    ctx.say(format!(
        "intercept {:.8} (predicted {:.8}), slope {:.6} (predicted {:.6})",
        fit.intercept, fit.predicted_intercept, fit.slope, fit.predicted_slope
    ));
    let report = FitReport {
        grid: ctx.grid.n(),
        center,
        fit,
        intercept_rel_error: ri,
        slope_rel_error: rs,
    };
    let mut run = RunDir::create(ctx.out)?;
    run.write(TESTFN_CSV, &table)?;
    run.write_json(FIT_JSON, &report)?;
    let checks = vec![
        Check::at_most("intercept_rel_error", ri, INTERCEPT_REL_TOL),
        Check::at_most("slope_rel_error", rs, SLOPE_REL_TOL),
    ];
    run.finish("testfn", cfg, checks)
}

//! Continuation `rho = 8 pi - eps` with `eps -> 0` and concentration diagnostics.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::functional::EIGHT_PI;
use crate::green::{green_function, GreenData};
use crate::grid::{displacement, torus_distance, wrap_point, Point, TorusGrid};
use crate::prescribed::PrescribedFunction;
use crate::solver::{minimize, newton_refine, normalize, SolverOptions, SolverState};
use crate::spectral::peak_location;

pub const DEFAULT_DELTA0: f64 = 0.2;
pub const IDENTITY_MIN_LAMBDA: f64 = 5.0;
pub const BUBBLE_MIN_LAMBDA: f64 = 3.0;
/// Halt when the bubble scale `e^{-lambda/2}` drops below this many grid spacings.
pub const GUARD_SPACINGS: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    /// `-eps`
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// `(lhs - rhs) e^lambda`
    pub remainder_scaled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleFit {
    pub lambda: f64,
    pub center: Point,
    pub sup_deviation: f64,
    pub iterations: usize,
    /// `|q - p_eps|`
    pub center_offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Farfield {
    NotApplicable { reason: String },
    Computed { sup_omega: f64, sup_u_plus_lambda: f64 },
}

impl Farfield {
    pub fn sup_omega(&self) -> Option<f64> {
        match self {
            Self::Computed { sup_omega, .. } => Some(*sup_omega),
            Self::NotApplicable { .. } => None,
        }
    }

    pub fn sup_u_plus_lambda(&self) -> Option<f64> {
        match self {
            Self::Computed { sup_u_plus_lambda, .. } => Some(*sup_u_plus_lambda),
            Self::NotApplicable { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupDiagnostics {
    pub eps: f64,
    pub rho: f64,
    pub lambda: f64,
    pub peak: Point,
    pub peak_refined: bool,
    /// `rho int_{B_delta0(p_eps)} h e^u`
    pub rho_eps: f64,
    /// `(rho_eps - rho) e^lambda`
    pub mass_defect_scaled: f64,
    pub identity: Option<IdentityResidual>,
    pub cp_gradient: Option<f64>,
    pub cp_gradient_scaled: Option<f64>,
    pub farfield: Farfield,
    pub farfield_scaled: Option<f64>,
    pub bubble: Option<BubbleFit>,
    pub j_value: f64,
    pub residual: f64,
    pub pde_residual: f64,
    pub steps: usize,
    pub newton_iterations: usize,
}

/// `rho int_{B_delta(p)} h e^u` for a normalized state.
pub fn local_mass(u: &ScalarField, h: &ScalarField, rho: f64, p: Point, delta: f64) -> f64 {
    let grid = u.grid();
    let mut rows = vec![0.0; grid.n()];
    for (k, (uv, hv)) in u.values().iter().zip(h.values()).enumerate() {
        if torus_distance(grid.node_at(k), p) < delta {
            rows[k / grid.n()] += hv * uv.exp();
        }
    }
    rho * rows.iter().sum::<f64>() / grid.len() as f64
}

/// Compare `-eps` with the `lambda e^{-lambda}` term of the blow-up identity.
pub fn identity_residual(eps: f64, lambda: f64, peak: Point, h: &PrescribedFunction) -> Result<IdentityResidual> {
    if lambda < IDENTITY_MIN_LAMBDA {
        return Err(Error::NotAsymptotic {
            lambda,
            threshold: IDENTITY_MIN_LAMBDA,
        });
    }
    let hp = h.value(peak);
    if hp <= 0.0 {
        return Err(Error::NonPositiveWeight { value: hp });
    }
    let rho = EIGHT_PI - eps;
    let lap = h.laplacian_log(peak)?;
    let rhs = 16.0 * PI / (rho * hp) * (lap + EIGHT_PI) * lambda * (-lambda).exp();
    let lhs = -eps;
    Ok(IdentityResidual {
        lhs,
        rhs,
        ratio: lhs / rhs,
        remainder_scaled: (lhs - rhs) * lambda.exp(),
    })
}

/// `|grad 2 ln h(p)|` (the Robin function is constant on the torus) and its `e^{lambda/2}` scaling.
pub fn cp_condition_check(peak: Point, lambda: f64, h: &PrescribedFunction) -> Result<(f64, f64)> {
    let g = h.grad_log(peak)?;
    let norm = 2.0 * g[0].hypot(g[1]);
    Ok((norm, norm * (0.5 * lambda).exp()))
}

fn not_concentrated(lambda: f64) -> Farfield {
    Farfield::NotApplicable {
        reason: format!("no concentration (lambda = {lambda:.3e})"),
    }
}

/// `sup |u - mean(u) - rho_eps G(., p)|` and `sup |u + lambda|` outside `B_delta0(p)`.
pub fn farfield_check(u: &ScalarField, lambda: f64, rho_eps: f64, gd: &GreenData, delta0: f64) -> Farfield {
    if lambda < BUBBLE_MIN_LAMBDA {
        return not_concentrated(lambda);
    }
    let grid = u.grid();
    let mean = u.integrate();
    let mut sup_omega = 0.0_f64;
    let mut sup_ul = 0.0_f64;
    for (k, &uv) in u.values().iter().enumerate() {
        if torus_distance(grid.node_at(k), gd.pole) < delta0 {
            continue;
        }
        sup_omega = sup_omega.max((uv - mean - rho_eps * gd.node_value(k)).abs());
        sup_ul = sup_ul.max((uv + lambda).abs());
    }
    Farfield::Computed {
        sup_omega,
        sup_u_plus_lambda: sup_ul,
    }
}

const LM_MAX_ITER: usize = 200;

/// Least-squares fit of `lambda - 2 ln(1 + (rho h(p)/8) e^lambda |x - q|^2)` to `u` on `B_delta0(p)`.
pub fn bubble_fit(
    u: &ScalarField,
    lambda0: f64,
    peak: Point,
    rho: f64,
    h_at_peak: f64,
    delta0: f64,
) -> Result<BubbleFit> {
    if lambda0 < BUBBLE_MIN_LAMBDA {
        return Err(Error::NotAsymptotic {
            lambda: lambda0,
            threshold: BUBBLE_MIN_LAMBDA,
        });
    }
    if h_at_peak <= 0.0 {
        return Err(Error::NonPositiveWeight { value: h_at_peak });
    }
    let grid = u.grid();
    let kappa = rho * h_at_peak / 8.0;
    let nodes: Vec<(Point, f64)> = (0..grid.len())
        .filter_map(|k| {
            let x = grid.node_at(k);
            (torus_distance(x, peak) < delta0).then(|| (displacement(x, peak), u.values()[k]))
        })
        .collect();

    // parameters: lambda and the centre offset from the peak
    let eval = |th: &Vector3<f64>, jac: Option<&mut Matrix3<f64>>, g: Option<&mut Vector3<f64>>| -> (f64, f64) {
        let el = kappa * th[0].exp();
        let (mut cost, mut sup) = (0.0, 0.0_f64);
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (d, uv) in &nodes {
            let (dx, dy) = (d[0] - th[1], d[1] - th[2]);
            let q = el * (dx * dx + dy * dy);
            let v = th[0] - 2.0 * (1.0 + q).ln();
            let r = uv - v;
            cost += r * r;
            sup = sup.max(r.abs());
            let row = Vector3::new(1.0 - 2.0 * q / (1.0 + q), 4.0 * el * dx / (1.0 + q), 4.0 * el * dy / (1.0 + q));
            jtj += row * row.transpose();
            jtr += row * r;
        }
        if let Some(j) = jac {
            *j = jtj;
        }
        if let Some(gv) = g {
            *gv = jtr;
        }
        (cost, sup)
    };

    let mut th = Vector3::new(lambda0, 0.0, 0.0);
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    let (initial, _) = eval(&th, Some(&mut jtj), Some(&mut jtr));
    let mut cost = initial;
    let mut mu = 1e-3;
    let mut iterations = 0;
    for it in 0..LM_MAX_ITER {
        iterations = it + 1;
        let mut a = jtj;
        for i in 0..3 {
            a[(i, i)] *= 1.0 + mu;
        }
        let Some(step) = a.lu().solve(&jtr) else {
            break;
        };
        let trial = th + step;
        let (tc, _) = eval(&trial, None, None);
        if tc.is_finite() && tc < cost {
            let rel = (cost - tc) / cost.max(f64::MIN_POSITIVE);
            th = trial;
            cost = eval(&th, Some(&mut jtj), Some(&mut jtr)).0;
            mu = (mu * 0.3).max(1e-12);
            if rel < 1e-15 || step.norm() < 1e-15 * (1.0 + th.norm()) {
                break;
            }
        } else {
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
        }
    }
    let (final_cost, sup) = eval(&th, None, None);
    if !final_cost.is_finite() || final_cost > initial {
        return Err(Error::FitDiverged {
            initial,
            last: final_cost,
        });
    }
    let center = wrap_point([peak[0] + th[1], peak[1] + th[2]]);
    Ok(BubbleFit {
        lambda: th[0],
        center,
        sup_deviation: sup,
        iterations,
        center_offset: th[1].hypot(th[2]),
    })
}

/// Diagnostics of a normalized state at `rho = 8 pi - eps`.
pub fn diagnose(
    state: &SolverState,
    eps: f64,
    h: &PrescribedFunction,
    hs: &ScalarField,
    delta0: f64,
) -> Result<BlowupDiagnostics> {
    let u = &state.u;
    let rho = state.rho;
    let peak = peak_location(u)?;
    let lambda = peak.value;
    let p = peak.point;
    let rho_eps = local_mass(u, hs, rho, p, delta0);
    let identity = identity_residual(eps, lambda, p, h).ok();
    let cp = cp_condition_check(p, lambda, h).ok();
    let farfield = if lambda < BUBBLE_MIN_LAMBDA {
        not_concentrated(lambda)
    } else {
        farfield_check(u, lambda, rho_eps, &green_function(u.grid(), p)?, delta0)
    };
    let farfield_scaled = farfield.sup_omega().map(|w| w * (0.5 * lambda).exp());
    let bubble = bubble_fit(u, lambda, p, rho, h.value(p), delta0).ok();
    Ok(BlowupDiagnostics {
        eps,
        rho,
        lambda,
        peak: p,
        peak_refined: peak.refined,
        rho_eps,
        mass_defect_scaled: (rho_eps - rho) * lambda.exp(),
        identity,
        cp_gradient: cp.map(|c| c.0),
        cp_gradient_scaled: cp.map(|c| c.1),
        farfield,
        farfield_scaled,
        bubble,
        j_value: state.j_value,
        residual: state.residual,
        pde_residual: state.pde_residual(hs)?,
        steps: state.step_count,
        newton_iterations: state.newton_iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    pub delta0: f64,
    pub guard_spacings: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            delta0: DEFAULT_DELTA0,
            guard_spacings: GUARD_SPACINGS,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ContinuationRun {
    pub diagnostics: Vec<BlowupDiagnostics>,
    /// Set when the resolution guard stopped the run; holds the rejected `eps`.
    pub halted_at: Option<f64>,
    /// Solver failure at some `eps`: `(eps, message)`.
    pub failure: Option<(f64, String)>,
    pub last_state: Option<SolverState>,
}

/// `0.5^k` starting at 1 down to (and including) the first value `<= eps_min`.
pub fn geometric_schedule(eps_min: f64) -> Vec<f64> {
    let mut out = vec![1.0];
    while *out.last().unwrap() > eps_min {
        out.push(out.last().unwrap() * 0.5);
    }
    out
}

pub fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidParameter {
            name: "eps_schedule",
            reason: "empty".into(),
        });
    }
    if schedule.iter().any(|e| !(e.is_finite() && *e > 0.0 && *e < EIGHT_PI)) {
        return Err(Error::InvalidParameter {
            name: "eps_schedule",
            reason: "entries must lie in (0, 8 pi)".into(),
        });
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter {
            name: "eps_schedule",
            reason: "must be strictly decreasing".into(),
        });
    }
    Ok(())
}

pub fn continuation_run(
    h: &PrescribedFunction,
    grid: &TorusGrid,
    schedule: &[f64],
    opts: &SolverOptions,
    copts: &ContinuationOptions,
) -> Result<ContinuationRun> {
    continuation_run_with(h, grid, schedule, None, opts, copts, |_, _| {})
}

const STEP_NEWTON_ITER: usize = 10;
/// Substeps shorter than this fraction of the requested step hand over to the flow.
const MIN_STEP_FRACTION: f64 = 1.0 / 256.0;

/// Move a solution at `from` to `to` by Newton substeps in `ln eps`.
/// `step` carries the substep length between calls; it halves on failure and
/// grows after quick convergence. The flow is the last resort.
fn advance(
    hs: &ScalarField,
    warm: &ScalarField,
    from: f64,
    to: f64,
    opts: &SolverOptions,
    step: &mut f64,
) -> Result<SolverState> {
    let quick = SolverOptions {
        newton_max_iter: opts.newton_max_iter.min(STEP_NEWTON_ITER),
        ..opts.clone()
    };
    let (mut s, target) = (from.ln(), to.ln());
    let full = s - target;
    *step = step.min(full);
    let mut u = warm.clone();
    let mut total = 0;
    loop {
        let ds = step.min(s - target);
        let next = if ds >= s - target { target } else { s - ds };
        let start = SolverState::evaluate(u.clone(), hs, EIGHT_PI - next.exp(), 0)?;
        let out = newton_refine(&start, hs, &quick)?;
        total += out.iterations;
        if out.converged {
            if out.iterations <= STEP_NEWTON_ITER / 2 {
                *step *= 1.5;
            }
            s = next;
            u = out.state.u.clone();
            if s <= target {
                let mut done = normalize(out.state, hs, opts)?;
                done.newton_iterations = total;
                return Ok(done);
            }
        } else {
            *step *= 0.5;
            if *step < MIN_STEP_FRACTION * full {
                *step = full;
                return minimize(EIGHT_PI - to, hs, Some(u), opts);
            }
        }
    }
}

/// Continuation with an optional initial field and a callback per accepted point.
pub fn continuation_run_with(
    h: &PrescribedFunction,
    grid: &TorusGrid,
    schedule: &[f64],
    start: Option<ScalarField>,
    opts: &SolverOptions,
    copts: &ContinuationOptions,
    mut on_point: impl FnMut(&BlowupDiagnostics, &SolverState),
) -> Result<ContinuationRun> {
    validate_schedule(schedule)?;
    let hs = h.sample(grid)?;
    let limit = copts.guard_spacings * grid.spacing();
    let mut run = ContinuationRun {
        diagnostics: Vec::new(),
        halted_at: None,
        failure: None,
        last_state: None,
    };
    let mut warm = start;
    let mut prev_eps: Option<f64> = None;
    let mut step = f64::INFINITY;
    for &eps in schedule {
        // stop before solving an under-resolved problem: lambda is close to linear in ln eps
        if let [.., a, b] = run.diagnostics.as_slice() {
            let slope = (b.lambda - a.lambda) / (b.eps.ln() - a.eps.ln());
            let predicted = b.lambda + slope * (eps.ln() - b.eps.ln());
            if (-0.5 * predicted).exp() < limit {
                run.halted_at = Some(eps);
                break;
            }
        }
        let rho = EIGHT_PI - eps;
        let solved = match (&warm, prev_eps) {
            (Some(w), Some(from)) if opts.newton => advance(&hs, w, from, eps, opts, &mut step),
            _ => minimize(rho, &hs, warm.clone(), opts),
        };
        let state = match solved {
            Ok(s) => s,
            Err(e) => {
                run.failure = Some((eps, e.to_string()));
                break;
            }
        };
        if (-0.5 * state.peak()).exp() < limit {
            run.halted_at = Some(eps);
            break;
        }
        let d = diagnose(&state, eps, h, &hs, copts.delta0)?;
        on_point(&d, &state);
        run.diagnostics.push(d);
        warm = Some(state.u.clone());
        prev_eps = Some(eps);
        run.last_state = Some(state);
    }
    Ok(run)
}

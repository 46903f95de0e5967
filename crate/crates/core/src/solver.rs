//! Minimizers of `J_rho`: energy-decreasing semi-implicit flow plus Newton-Krylov polish.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::functional::{eval_j, log_mass};
use crate::grid::{displacement, TorusGrid};
use crate::krylov::{gmres, GmresOptions};
use crate::spectral::Spectrum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub dt_init: f64,
    pub dt_max: f64,
    pub dt_growth: f64,
    pub tol_residual: f64,
    pub max_steps: usize,
    pub newton: bool,
    /// Flow residual below which Newton takes over.
    pub newton_switch: f64,
    pub newton_max_iter: usize,
    pub gmres_restart: usize,
    pub gmres_max_cycles: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_max: 1.0,
            dt_growth: 1.5,
            tol_residual: 1e-9,
            max_steps: 200_000,
            newton: true,
            newton_switch: 1e-3,
            newton_max_iter: 40,
            gmres_restart: 80,
            gmres_max_cycles: 10,
        }
    }
}

pub const MIN_DT: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SolverState {
    pub u: ScalarField,
    pub rho: f64,
    /// `L^2` norm of the gradient of `J_rho`.
    pub residual: f64,
    pub mass: f64,
    pub j_value: f64,
    pub normalized: bool,
    pub step_count: usize,
    pub newton_iterations: usize,
}

/// Residual pieces shared by the flow and Newton.
struct Residual {
    /// `h e^u / int h e^u`
    density: ScalarField,
    /// `Delta u + rho (density - 1)`
    pde: ScalarField,
}

fn residual_of(u: &ScalarField, h: &ScalarField, rho: f64) -> Result<Residual> {
    let (lm, _) = log_mass(u, h)?;
    let density = u.zip_map(h, |a, b| b * (a - lm).exp());
    let mut pde = Spectrum::of(u).laplacian().to_field();
    pde.axpy(rho, &density);
    pde.add_scalar(-rho);
    Ok(Residual { density, pde })
}

impl SolverState {
    pub fn evaluate(u: ScalarField, h: &ScalarField, rho: f64, step_count: usize) -> Result<Self> {
        let j = eval_j(&u, h, rho)?;
        let r = residual_of(&u, h, rho)?;
        Ok(Self {
            residual: r.pde.l2_norm() / rho,
            mass: j.mass,
            j_value: j.value,
            normalized: (j.mass - 1.0).abs() <= 1e-12,
            u,
            rho,
            step_count,
            newton_iterations: 0,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.u.grid()
    }

    /// `max u`, the blow-up height.
    pub fn peak(&self) -> f64 {
        self.u.max()
    }

    /// `|| Delta u + rho (h e^u / int h e^u - 1) ||_2`.
    pub fn pde_residual(&self, h: &ScalarField) -> Result<f64> {
        Ok(residual_of(&self.u, h, self.rho)?.pde.l2_norm())
    }
}

/// `ln(1 + (e - 1) exp(-|x - c|^2 / w^2))` at the largest sample of `h`.
pub fn cold_start(h: &ScalarField) -> ScalarField {
    let grid = h.grid();
    let c = grid.node_at(h.argmax());
    let (amp, width) = (1.0_f64, 0.1_f64);
    ScalarField::from_fn(grid, |x| {
        let d = displacement(x, c);
        let r2 = d[0] * d[0] + d[1] * d[1];
        (1.0 + (amp.exp() - 1.0) * (-r2 / (width * width)).exp()).ln()
    })
}

#[derive(Clone, Debug)]
pub struct FlowStep {
    pub state: SolverState,
    pub dt: f64,
    /// The update changed nothing beyond round-off.
    pub stationary: bool,
    pub rejections: usize,
}

/// One semi-implicit step `(I - dt Delta) u' = u + dt rho (h e^u / M - 1)`,
/// halving `dt` until `J` decreases.
pub fn flow_step(state: &SolverState, h: &ScalarField, dt: f64) -> Result<FlowStep> {
    let rho = state.rho;
    let r = residual_of(&state.u, h, rho)?;
    let mut forcing = r.density.clone();
    forcing.add_scalar(-1.0);
    forcing.scale(rho);
    let scale = 1.0 + state.u.max_abs();
    let mut dt = dt;
    let mut rejections = 0;
    loop {
        if dt < MIN_DT {
            return Err(Error::Stagnation {
                dt,
                steps: state.step_count,
                residual: state.residual,
            });
        }
        let mut rhs = state.u.clone();
        rhs.axpy(dt, &forcing);
        let u_new = Spectrum::of(&rhs).resolvent(dt).to_field();
        let change = u_new.zip_map(&state.u, |a, b| a - b).max_abs();
        let stationary = change <= 1e-14 * scale;
        let candidate = u_new.check_finite("flow step").and_then(|_| SolverState::evaluate(u_new, h, rho, state.step_count + 1));
        match candidate {
            // below round-off in J, fall back to a decrease of the gradient norm
            Ok(next)
                if stationary
                    || next.j_value < state.j_value
                    || (next.j_value - state.j_value <= 4.0 * f64::EPSILON * (1.0 + state.j_value.abs())
                        && next.residual < state.residual) =>
            {
                return Ok(FlowStep {
                    state: next,
                    dt,
                    stationary,
                    rejections,
                });
            }
            Ok(_) | Err(Error::DegenerateMass { .. }) | Err(Error::NonFinite { .. }) => {
                dt *= 0.5;
                rejections += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub state: SolverState,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Convergence target on the gradient norm so that both the gradient and the
/// normalized PDE residual (`rho` times larger) meet the tolerance contract.
pub fn newton_target(tol: f64, rho: f64) -> f64 {
    0.5 * tol * (10.0 / rho).min(1.0)
}

/// Line-search merit: the preconditioned residual `||Delta^{-1} F||`. The raw
/// residual is dominated by the peak and forces tiny steps far from the solution.
fn merit(pde: &ScalarField) -> f64 {
    Spectrum::of(pde).inverse_laplacian().to_field().l2_norm()
}

/// Newton on the mean-zero subspace, preconditioned by `Delta^{-1}`.
/// Returns the best state reached; `converged` is false on failure.
pub fn newton_refine(state: &SolverState, h: &ScalarField, opts: &SolverOptions) -> Result<NewtonOutcome> {
    let rho = state.rho;
    let target = newton_target(opts.tol_residual, rho);
    let accept = 1.8 * target;
    let mut u = state.u.clone();
    let mut r = residual_of(&u, h, rho)?;
    let mut rn = r.pde.l2_norm() / rho;
    let mut history = vec![rn];
    let mut converged = rn <= target;
    let mut iterations = 0;
    let grid = u.grid().clone();
    let len = grid.len();

    while !converged && iterations < opts.newton_max_iter {
        iterations += 1;
        let density = r.density.values().to_vec();
        let apply = |w: &[f64], out: &mut [f64]| {
            let ew: f64 = density.iter().zip(w).map(|(e, x)| e * x).sum::<f64>() / len as f64;
            let q: Vec<f64> = density.iter().zip(w).map(|(e, x)| rho * e * (x - ew)).collect();
            let q = ScalarField::from_values(&grid, q).expect("length");
            let inv = Spectrum::of(&q).inverse_laplacian().to_field();
            out.iter_mut()
                .zip(w.iter().zip(inv.values()))
                .for_each(|(o, (x, v))| *o = x + v);
        };
        let mut b = Spectrum::of(&r.pde).inverse_laplacian().to_field();
        let mn = b.l2_norm();
        b.scale(-1.0);
        let gopts = GmresOptions {
            restart: opts.gmres_restart,
            max_cycles: opts.gmres_max_cycles,
            rel_tol: (0.1 * rn).clamp(1e-12, 1e-2),
        };
        let sol = gmres(apply, b.values(), &gopts);
        let w = ScalarField::from_values(&grid, sol.x)?;

        let mut t = 1.0;
        let mut accepted = None;
        while t >= 1.0 / 64.0 {
            let mut trial = u.clone();
            trial.axpy(t, &w);
            if trial.check_finite("newton trial").is_ok() {
                if let Ok(rt) = residual_of(&trial, h, rho) {
                    let rtn = rt.pde.l2_norm() / rho;
                    let mt = merit(&rt.pde);
                    if mt <= (1.0 - 1e-4 * t) * mn || rtn <= (1.0 - 1e-4 * t) * rn {
                        accepted = Some((trial, rt, rtn));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let Some((nu, nr, nrn)) = accepted else {
            break;
        };
        // below the contract bound with poor contraction: the round-off floor
        let stalled = nrn <= accept && nrn > 0.5 * rn;
        u = nu;
        r = nr;
        rn = nrn;
        history.push(rn);
        converged = rn <= target || stalled;
    }
    let mut out = SolverState::evaluate(u, h, rho, state.step_count)?;
    out.newton_iterations = state.newton_iterations + iterations;
    Ok(NewtonOutcome {
        state: out,
        iterations,
        converged,
        history,
    })
}

const LAMBDA_TAIL: usize = 16;

/// Minimize `J_rho` from `u0` (or a cold start), then normalize to unit mass.
pub fn minimize(rho: f64, h: &ScalarField, u0: Option<ScalarField>, opts: &SolverOptions) -> Result<SolverState> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("must be positive, got {rho}"),
        });
    }
    h.check_finite("prescribed function")?;
    let warm = u0.is_some();
    let u0 = match u0 {
        Some(u) => {
            u.same_grid(h)?;
            u
        }
        None => cold_start(h),
    };
    let mut state = SolverState::evaluate(u0, h, rho, 0)?;
    let target = if opts.newton {
        newton_target(opts.tol_residual, rho)
    } else {
        opts.tol_residual * (10.0 / rho).min(1.0)
    };
    // Contract bound; Newton aims at half of it, a stalled iteration at round-off may stop anywhere below.
    let accept = 0.9 * opts.tol_residual * (10.0 / rho).min(1.0);
    let mut dt = opts.dt_init;
    let mut lambda_tail: Vec<f64> = Vec::new();
    let mut newton_gate = opts.newton_switch;
    let mut converged = state.residual <= target;

    if !converged && opts.newton && warm {
        let out = newton_refine(&state, h, opts)?;
        if out.state.residual < state.residual {
            state = out.state;
        }
        converged = out.converged || state.residual <= accept;
    }

    while !converged {
        if state.step_count >= opts.max_steps {
            return Err(Error::NonConvergence {
                steps: state.step_count,
                residual: state.residual,
                lambda_tail,
            });
        }
        if opts.newton && state.residual <= newton_gate {
            let out = newton_refine(&state, h, opts)?;
            if out.state.residual < state.residual {
                state = out.state;
            }
            converged = out.converged || state.residual <= accept;
            if converged {
                break;
            }
            newton_gate = state.residual * 0.1;
        }
        let step = flow_step(&state, h, dt)?;
        let stationary = step.stationary;
        dt = (step.dt * opts.dt_growth).min(opts.dt_max);
        state = step.state;
        if lambda_tail.len() == LAMBDA_TAIL {
            lambda_tail.remove(0);
        }
        lambda_tail.push(state.peak());
        converged = state.residual <= target || (stationary && state.residual <= accept);
        if stationary && !converged {
            return Err(Error::Stagnation {
                dt: step.dt,
                steps: state.step_count,
                residual: state.residual,
            });
        }
    }
    normalize(state, h, opts)
}

/// Shift `u` by `-ln(int h e^u)` and verify the PDE residual.
pub fn normalize(state: SolverState, h: &ScalarField, opts: &SolverOptions) -> Result<SolverState> {
    if !(state.mass > 0.0) {
        return Err(Error::Normalization { mass: state.mass });
    }
    let (lm, _) = log_mass(&state.u, h)?;
    let mut u = state.u;
    u.add_scalar(-lm);
    let mut out = SolverState::evaluate(u, h, state.rho, state.step_count)?;
    out.newton_iterations = state.newton_iterations;
    out.mass = 1.0;
    out.normalized = true;
    let pde = out.pde_residual(h)?;
    let limit = 10.0 * opts.tol_residual;
    if pde > limit {
        return Err(Error::PdeResidual { residual: pde, limit });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prescribed::PrescribedFunction;
    use std::f64::consts::PI;

    #[test]
    fn constant_solution_is_fixed_point() {
        let g = TorusGrid::new(32).unwrap();
        let h = ScalarField::constant(&g, 1.0);
        let s = SolverState::evaluate(ScalarField::zeros(&g), &h, 4.0 * PI, 0).unwrap();
        let step = flow_step(&s, &h, 1e-3).unwrap();
        assert!(step.stationary);
        assert!(step.state.u.max_abs() < 1e-14);
    }

    #[test]
    fn flow_decreases_energy() {
        let g = TorusGrid::new(32).unwrap();
        let h = PrescribedFunction::bump().sample(&g).unwrap();
        let mut s = SolverState::evaluate(cold_start(&h), &h, 6.0, 0).unwrap();
        let mut dt = 1e-3;
        for _ in 0..20 {
            let step = flow_step(&s, &h, dt).unwrap();
            assert!(step.state.j_value < s.j_value || step.stationary || step.state.residual < s.residual);
            dt = step.dt * 1.5;
            s = step.state;
        }
    }

    #[test]
    fn minimize_small_rho() {
        let g = TorusGrid::new(32).unwrap();
        let h = PrescribedFunction::cosine_product(0.5).sample(&g).unwrap();
        let s = minimize(2.0 * PI, &h, None, &SolverOptions::default()).unwrap();
        assert!(s.normalized && s.residual <= 1e-9);
        assert!((crate::functional::eval_j(&s.u, &h, 2.0 * PI).unwrap().mass - 1.0).abs() < 1e-12);
        let flow_only = SolverOptions {
            newton: false,
            ..SolverOptions::default()
        };
        let f = minimize(2.0 * PI, &h, None, &flow_only).unwrap();
        assert!((f.j_value - s.j_value).abs() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive_mass() {
        let g = TorusGrid::new(32).unwrap();
        let h = ScalarField::constant(&g, -1.0);
        let s = SolverState::evaluate(ScalarField::zeros(&g), &h, 1.0, 0).unwrap();
        assert!(matches!(
            normalize(s, &h, &SolverOptions::default()),
            Err(Error::Normalization { .. })
        ));
    }

    #[test]
    fn step_budget_exhaustion_reports() {
        let g = TorusGrid::new(32).unwrap();
        let h = PrescribedFunction::bump().sample(&g).unwrap();
        let opts = SolverOptions {
            max_steps: 3,
            newton: false,
            ..SolverOptions::default()
        };
        match minimize(6.0, &h, None, &opts) {
            Err(Error::NonConvergence { steps, lambda_tail, .. }) => {
                assert_eq!(steps, 3);
                assert_eq!(lambda_tail.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }
}

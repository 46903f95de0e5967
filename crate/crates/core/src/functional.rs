//! `J_rho(u) = (1/2 rho) int |grad u|^2 + int u - ln int h e^u` and friends.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{torus_distance, wrap_point, Point, TorusGrid};
use crate::prescribed::PrescribedFunction;
use crate::spectral::Spectrum;

pub const EIGHT_PI: f64 = 8.0 * PI;
pub const MASS_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalEval {
    pub rho: f64,
    /// `(1/2 rho) int |grad u|^2`
    pub dirichlet: f64,
    /// `int u`
    pub mean_term: f64,
    /// `int h e^u`
    pub mass: f64,
    pub value: f64,
}

/// `(ln |int h e^u|, int h e^u)` evaluated with a max shift so large peaks do not overflow the log.
pub fn log_mass(u: &ScalarField, h: &ScalarField) -> Result<(f64, f64)> {
    u.same_grid(h)?;
    let m = u.max();
    let shifted = u.zip_map(h, |a, b| b * (a - m).exp()).integrate();
    let mass = shifted * m.exp();
    if !(shifted.abs() * m.exp() > MASS_FLOOR) {
        return Err(Error::DegenerateMass { mass });
    }
    Ok((m + shifted.abs().ln(), mass))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("must be positive, got {rho}"),
        });
    }
    Ok(())
}

pub fn eval_j(u: &ScalarField, h: &ScalarField, rho: f64) -> Result<FunctionalEval> {
    check_rho(rho)?;
    u.check_finite("eval_j input")?;
    let (lm, mass) = log_mass(u, h)?;
    let dirichlet = Spectrum::of(u).dirichlet_energy() / (2.0 * rho);
    let mean_term = u.integrate();
    Ok(FunctionalEval {
        rho,
        dirichlet,
        mean_term,
        mass,
        value: dirichlet + mean_term - lm,
    })
}

/// `L^2` gradient `-(1/rho) Delta u + 1 - h e^u / int h e^u`.
pub fn grad_j(u: &ScalarField, h: &ScalarField, rho: f64) -> Result<ScalarField> {
    check_rho(rho)?;
    u.check_finite("grad_j input")?;
    let (lm, _) = log_mass(u, h)?;
    let lap = Spectrum::of(u).laplacian().to_field();
    let mut g = lap;
    g.scale(-1.0 / rho);
    let vals = g.values_mut();
    for (k, v) in vals.iter_mut().enumerate() {
        *v += 1.0 - h.values()[k] * (u.values()[k] - lm).exp();
    }
    Ok(g)
}

/// Both sides of the sharp Moser-Trudinger inequality:
/// `(ln int e^u, (1/16 pi) int |grad u|^2 + int u)`.
pub fn mt_check(u: &ScalarField) -> Result<(f64, f64)> {
    u.check_finite("mt_check input")?;
    let one = ScalarField::constant(u.grid(), 1.0);
    let (lhs, _) = log_mass(u, &one)?;
    let rhs = Spectrum::of(u).dirichlet_energy() / (16.0 * PI) + u.integrate();
    Ok((lhs, rhs))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionPoint {
    pub point: Point,
    pub h_value: f64,
    pub laplacian_log_h: f64,
    /// `Delta ln h + 8 pi`
    pub condition: f64,
    pub satisfied: bool,
    /// Whether this point attains the global maximum of `h`.
    pub global: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExistenceReport {
    pub points: Vec<ConditionPoint>,
    pub flat: bool,
    /// Condition holds at every global maximum.
    pub satisfied: bool,
}

pub const DEDUP_RADIUS: f64 = 0.05;

/// Newton polish of a grid local maximum using the analytic Hessian.
fn polish_max(h: &PrescribedFunction, start: Point, limit: f64) -> Point {
    let mut x = start;
    for _ in 0..30 {
        let j = h.jet(x);
        let [hxx, hxy, hyy] = j.hess;
        let det = hxx * hyy - hxy * hxy;
        if !(hxx < 0.0 && det > 0.0) {
            return start;
        }
        let dx = -(hyy * j.grad[0] - hxy * j.grad[1]) / det;
        let dy = -(-hxy * j.grad[0] + hxx * j.grad[1]) / det;
        x = [x[0] + dx, x[1] + dy];
        if torus_distance(x, start) > limit {
            return start;
        }
        if dx.abs().max(dy.abs()) < 1e-15 {
            break;
        }
    }
    wrap_point(x)
}

/// Local maxima of `h` on its positivity set, refined and deduplicated.
pub fn local_maxima(h: &PrescribedFunction, grid: &TorusGrid) -> Result<Vec<(Point, f64)>> {
    let hs = h.sample(grid)?;
    let floor = h.floor(grid)?;
    let n = grid.n() as i64;
    let mut cands: Vec<(Point, f64)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = hs.at(i as usize, j as usize);
            if v <= floor {
                continue;
            }
            let is_max = (-1..=1).all(|di: i64| {
                (-1..=1).all(|dj: i64| {
                    let (a, b) = ((i + di).rem_euclid(n) as usize, (j + dj).rem_euclid(n) as usize);
                    hs.at(a, b) <= v
                })
            });
            if is_max {
                let p = polish_max(h, grid.node(i as usize, j as usize), 2.0 * grid.spacing());
                cands.push((p, h.value(p)));
            }
        }
    }
    cands.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut kept: Vec<(Point, f64)> = Vec::new();
    for c in cands {
        if kept.iter().all(|k| torus_distance(k.0, c.0) > DEDUP_RADIUS) {
            kept.push(c);
        }
    }
    Ok(kept)
}

/// Evaluate `Delta ln h + 8 pi` at the local maxima of `h`.
pub fn existence_condition(h: &PrescribedFunction, grid: &TorusGrid) -> Result<ExistenceReport> {
    let hs = h.sample(grid)?;
    let (max, min) = (hs.max(), hs.min());
    if h.is_constant() || max - min <= 1e-12 * max.abs() {
        let p = [0.0, 0.0];
        return Ok(ExistenceReport {
            points: vec![ConditionPoint {
                point: p,
                h_value: max,
                laplacian_log_h: 0.0,
                condition: EIGHT_PI,
                satisfied: true,
                global: true,
            }],
            flat: true,
            satisfied: true,
        });
    }
    let maxima = local_maxima(h, grid)?;
    let top = maxima.first().map(|m| m.1).unwrap_or(max);
    let mut points = Vec::with_capacity(maxima.len());
    for (p, v) in maxima {
        let lap = h.laplacian_log(p)?;
        let condition = lap + EIGHT_PI;
        points.push(ConditionPoint {
            point: p,
            h_value: v,
            laplacian_log_h: lap,
            condition,
            satisfied: condition > 0.0,
            global: v >= top - 1e-9 * top.abs(),
        });
    }
    let satisfied = points.iter().filter(|p| p.global).all(|p| p.satisfied);
    Ok(ExistenceReport {
        points,
        flat: false,
        satisfied,
    })
}

/// Global maximum point and value of `h`.
pub fn global_max(h: &PrescribedFunction, grid: &TorusGrid) -> Result<(Point, f64)> {
    if h.is_constant() {
        let v = h.value([0.0, 0.0]);
        if v <= 0.0 {
            return Err(Error::NoPositivity { max: v });
        }
        return Ok(([0.0, 0.0], v));
    }
    local_maxima(h, grid)?
        .into_iter()
        .next()
        .ok_or(Error::NoPositivity { max: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::laplacian;

    #[test]
    fn zero_field_value() {
        let g = TorusGrid::new(32).unwrap();
        let h = PrescribedFunction::cosine_product(0.5).sample(&g).unwrap();
        let e = eval_j(&ScalarField::zeros(&g), &h, 4.0 * PI).unwrap();
        // int h = 1
        assert!(e.value.abs() < 1e-14);
        assert!((e.mass - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shift_invariance() {
        let g = TorusGrid::new(32).unwrap();
        let h = PrescribedFunction::bump().sample(&g).unwrap();
        let u = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin() + 0.3 * (2.0 * PI * x[1]).cos());
        let mut v = u.clone();
        v.add_scalar(3.7);
        let a = eval_j(&u, &h, 5.0).unwrap();
        let b = eval_j(&v, &h, 5.0).unwrap();
        assert!((a.value - b.value).abs() < 1e-13);
        let ga = grad_j(&u, &h, 5.0).unwrap();
        assert!(ga.integrate().abs() < 1e-14);
    }

    #[test]
    fn degenerate_mass() {
        let g = TorusGrid::new(32).unwrap();
        let h = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).cos());
        let u = ScalarField::zeros(&g);
        assert!(matches!(eval_j(&u, &h, 1.0), Err(Error::DegenerateMass { .. })));
        assert!(eval_j(&u, &h, -1.0).is_err());
    }

    #[test]
    fn large_peaks_do_not_overflow() {
        let g = TorusGrid::new(32).unwrap();
        let h = ScalarField::constant(&g, 1.0);
        let mut u = ScalarField::zeros(&g);
        u.values_mut()[0] = 800.0;
        let (lm, _) = log_mass(&u, &h).unwrap();
        assert!((lm - (800.0 - (g.len() as f64).ln())).abs() < 1e-9);
    }

    #[test]
    fn gradient_vanishes_at_solution_shape() {
        // constant weight: u = 0 is critical for every rho
        let g = TorusGrid::new(32).unwrap();
        let h = ScalarField::constant(&g, 2.0);
        let grad = grad_j(&ScalarField::zeros(&g), &h, 7.0).unwrap();
        assert!(grad.max_abs() < 1e-15);
        let _ = laplacian(&grad).unwrap();
    }

    #[test]
    fn condition_for_reference_weights() {
        let g = TorusGrid::new(64).unwrap();
        let bump = existence_condition(&PrescribedFunction::bump(), &g).unwrap();
        assert_eq!(bump.points.len(), 1);
        assert!(!bump.satisfied);
        assert!((bump.points[0].condition - (EIGHT_PI - 4.0 * PI * PI)).abs() < 1e-9);

        let nb = existence_condition(&PrescribedFunction::cosine_product(0.5), &g).unwrap();
        let globals: Vec<_> = nb.points.iter().filter(|p| p.global).collect();
        assert_eq!(globals.len(), 2);
        assert!(globals.iter().all(|p| (p.condition - (EIGHT_PI - 8.0 * PI * PI / 3.0)).abs() < 1e-9));
        assert!(!nb.satisfied);

        let one = existence_condition(&PrescribedFunction::one(), &g).unwrap();
        assert!(one.flat && one.points.len() == 1 && one.satisfied);
    }

    #[test]
    fn polishes_off_grid_max() {
        let g = TorusGrid::new(32).unwrap();
        let h = PrescribedFunction::GaussianBumpExp {
            amplitude: 1.0,
            strength: 2.0,
            center: [0.4137, 0.7021],
            offset: 0.0,
        };
        let (p, v) = global_max(&h, &g).unwrap();
        assert!(torus_distance(p, [0.4137, 0.7021]) < 1e-12);
        assert!((v - 1.0).abs() < 1e-14);
    }
}

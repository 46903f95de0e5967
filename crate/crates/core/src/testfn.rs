//! Concentrating test functions at a point `p` and the expansion of `J_{8pi}` along them.
//!
//! With `r = |x - p|`, `r1 = alpha sqrt(eps)`, `r2 = 2 r1`:
//!
//! ```text
//! phi = -2 ln(r^2 + eps) + b.x + ln eps                 r < r1
//!     = 8 pi G - eta(r / r1) beta + C + ln eps          r1 <= r < r2
//!     = 8 pi G + C + ln eps                             r >= r2
//! ```
//!
//! where `beta = 8 pi G + 4 ln r - A - b.x` keeps the quadratic and higher
//! terms, and `C = -A - 2 ln(1 + 1/alpha^2)` makes `phi` continuous.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::functional::{eval_j, global_max, log_mass, FunctionalEval, EIGHT_PI};
use crate::green::{green_local_expansion, smooth_step, GreenData};
use crate::grid::{displacement, torus_distance, Point, TorusGrid};
use crate::prescribed::PrescribedFunction;
use crate::quadrature::gauss_legendre;
use crate::spectral::Spectrum;

/// Inner radius must span at least this many grid spacings.
pub const MIN_INNER_SPACINGS: f64 = 8.0;
/// `alpha = ALPHA_PREFACTOR * eps^{-1/4}` by default.
pub const ALPHA_PREFACTOR: f64 = 0.5;
pub const FIT_RESIDUAL_LIMIT: f64 = 5e-3;

/// `eta(t)`: 1 on `[0, 1]`, 0 on `[2, inf)`, smooth in between.
#[inline]
pub fn eta(t: f64) -> f64 {
    smooth_step(t - 1.0).0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub center: Point,
    pub eps: f64,
    pub alpha: f64,
    pub c_eps: f64,
    pub b: [f64; 2],
    pub robin: f64,
}

impl TestFunctionSpec {
    pub fn new(center: Point, eps: f64, alpha: f64, robin: f64, b: [f64; 2]) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) || !(alpha > 0.0) {
            return Err(Error::InvalidParameter {
                name: "test function",
                reason: format!("need 0 < eps < 1 and alpha > 0, got eps = {eps}, alpha = {alpha}"),
            });
        }
        Ok(Self {
            center,
            eps,
            alpha,
            c_eps: -robin - 2.0 * (1.0 + 1.0 / (alpha * alpha)).ln(),
            b,
            robin,
        })
    }

    /// `alpha = k eps^{-1/4}`.
    pub fn with_prefactor(center: Point, eps: f64, k: f64, robin: f64, b: [f64; 2]) -> Result<Self> {
        Self::new(center, eps, k * eps.powf(-0.25), robin, b)
    }

    pub fn inner_radius(&self) -> f64 {
        self.alpha * self.eps.sqrt()
    }

    pub fn outer_radius(&self) -> f64 {
        2.0 * self.inner_radius()
    }

    fn check(&self, gd: &GreenData) -> Result<()> {
        if torus_distance(self.center, gd.pole) > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "center",
                reason: "Green function pole must coincide with the test-function centre".into(),
            });
        }
        let limit = MIN_INNER_SPACINGS * gd.grid().spacing();
        if self.inner_radius() < limit {
            return Err(Error::Resolution {
                radius: self.inner_radius(),
                limit,
            });
        }
        if self.outer_radius() > gd.cutoff.inner {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!(
                    "outer radius {} exceeds the Green cutoff core {}",
                    self.outer_radius(),
                    gd.cutoff.inner
                ),
            });
        }
        Ok(())
    }

    /// Radial part: the log profile inside `r1`, `-4 chi ln r` outside.
    fn radial(&self, gd: &GreenData, r: f64) -> f64 {
        if r < self.inner_radius() {
            -2.0 * (r * r + self.eps).ln() + 2.0 * (1.0 + 1.0 / (self.alpha * self.alpha)).ln()
        } else {
            8.0 * PI * gd.cutoff.singular(r)
        }
    }

    fn radial_derivative(&self, gd: &GreenData, r: f64) -> f64 {
        if r < self.inner_radius() {
            -4.0 * r / (r * r + self.eps)
        } else {
            let (c, dc, _) = gd.cutoff.eval(r);
            -4.0 * (dc * r.ln() + c / r)
        }
    }

    /// Smooth part `(1 - eta) 8 pi R + eta (A + b.x)` given the regular part value.
    fn smooth(&self, d: Point, r: f64, regular: f64) -> f64 {
        let e = eta(r / self.inner_radius());
        (1.0 - e) * 8.0 * PI * regular + e * (self.robin + self.b[0] * d[0] + self.b[1] * d[1])
    }

    fn offset(&self) -> f64 {
        self.c_eps + self.eps.ln()
    }

    /// Literal three-piece formula at an off-grid point.
    pub fn value_at(&self, gd: &GreenData, x: Point) -> f64 {
        let d = displacement(x, self.center);
        let r = d[0].hypot(d[1]);
        let (r1, r2) = (self.inner_radius(), self.outer_radius());
        let bx = self.b[0] * d[0] + self.b[1] * d[1];
        if r < r1 {
            -2.0 * (r * r + self.eps).ln() + bx + self.eps.ln()
        } else {
            let g8 = 8.0 * PI * gd.value(x);
            if r < r2 {
                let beta = g8 + 4.0 * r.ln() - self.robin - bx;
                g8 - eta(r / r1) * beta + self.offset()
            } else {
                g8 + self.offset()
            }
        }
    }
}

/// Sample `phi_eps` on the grid of `gd`.
pub fn build_test_function(spec: &TestFunctionSpec, gd: &GreenData) -> Result<ScalarField> {
    spec.check(gd)?;
    let grid = gd.grid();
    let values = (0..grid.len())
        .map(|k| {
            let d = displacement(grid.node_at(k), spec.center);
            let r = d[0].hypot(d[1]);
            spec.radial(gd, r) + spec.smooth(d, r, gd.regular.values()[k]) + spec.offset()
        })
        .collect();
    let f = ScalarField::from_values(grid, values)?;
    f.check_finite("test function")?;
    Ok(f)
}

/// Largest jump across the two interface circles, from the literal piecewise formula.
pub fn interface_jumps(spec: &TestFunctionSpec, gd: &GreenData, points: usize) -> [f64; 2] {
    let mut jumps = [0.0_f64; 2];
    for (slot, r) in [spec.inner_radius(), spec.outer_radius()].into_iter().enumerate() {
        for m in 0..points {
            let th = 2.0 * PI * m as f64 / points as f64;
            let (c, s) = (th.cos(), th.sin());
            let t = 1e-12 * r;
            let inside = spec.value_at(gd, [spec.center[0] + (r - t) * c, spec.center[1] + (r - t) * s]);
            let outside = spec.value_at(gd, [spec.center[0] + (r + t) * c, spec.center[1] + (r + t) * s]);
            jumps[slot] = jumps[slot].max((inside - outside).abs());
        }
    }
    jumps
}

/// `J_{8pi}(phi_eps)` with the singular radial profile integrated by 1-D quadrature and
/// the smooth remainder spectrally, so the kink at `r1` costs no grid accuracy.
pub fn test_function_energy(spec: &TestFunctionSpec, gd: &GreenData, h: &ScalarField) -> Result<FunctionalEval> {
    spec.check(gd)?;
    let grid = gd.grid();
    let (r1, rb) = (spec.inner_radius(), gd.cutoff.outer);
    let mut radial = ScalarField::zeros(grid);
    let mut smooth = ScalarField::zeros(grid);
    for k in 0..grid.len() {
        let d = displacement(grid.node_at(k), spec.center);
        let r = d[0].hypot(d[1]);
        radial.values_mut()[k] = spec.radial(gd, r);
        smooth.values_mut()[k] = spec.smooth(d, r, gd.regular.values()[k]);
    }
    let ring = |f: &dyn Fn(f64) -> f64| {
        2.0 * PI * (gauss_legendre(0.0, r1, 24, |r| f(r) * r) + gauss_legendre(r1, rb, 48, |r| f(r) * r))
    };
    let grad_radial = ring(&|r| spec.radial_derivative(gd, r).powi(2));
    let radial_mean = ring(&|r| spec.radial(gd, r));
    let ss = Spectrum::of(&smooth);
    let lap_smooth = ss.laplacian().to_field();
    let cross = -2.0 * radial.dot(&lap_smooth);
    let grad_smooth = ss.dirichlet_energy();

    let dirichlet = (grad_radial + cross + grad_smooth) / (2.0 * EIGHT_PI);
    let mean_term = radial_mean + smooth.integrate() + spec.offset();
    let mut phi = radial;
    phi.axpy(1.0, &smooth);
    phi.add_scalar(spec.offset());
    let (lm, mass) = log_mass(&phi, h)?;
    Ok(FunctionalEval {
        rho: EIGHT_PI,
        dirichlet,
        mean_term,
        mass,
        value: dirichlet + mean_term - lm,
    })
}

/// `-1 - ln pi - max (ln h + A/2)`.
pub fn inf_j_formula(h: &PrescribedFunction, grid: &TorusGrid, robin: f64) -> Result<f64> {
    let (_, hmax) = global_max(h, grid)?;
    Ok(-1.0 - PI.ln() - hmax.ln() - 0.5 * robin)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub eps: Vec<f64>,
    pub j_values: Vec<f64>,
    pub intercept: f64,
    /// Coefficient of `eps ln(1/eps)`.
    pub slope: f64,
    /// Coefficient of the `eps` column modelling the next-order remainder.
    pub linear: f64,
    pub residuals: Vec<f64>,
    pub predicted_intercept: f64,
    pub predicted_slope: f64,
    pub alpha_prefactor: f64,
}

/// Regress `J_{8pi}(phi_eps)` on `[1, eps ln(1/eps), eps]`.
pub fn j_expansion_fit(
    h: &PrescribedFunction,
    p: Point,
    eps_list: &[f64],
    gd: &GreenData,
    alpha_prefactor: f64,
) -> Result<ExpansionFit> {
    if eps_list.len() < 4 {
        return Err(Error::InvalidParameter {
            name: "eps_list",
            reason: "need at least four values".into(),
        });
    }
    let (lo, hi) = eps_list
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(a, b), &e| (a.min(e), b.max(e)));
    if hi / lo < 99.999 {
        return Err(Error::InvalidParameter {
            name: "eps_list",
            reason: "must span at least two decades".into(),
        });
    }
    let hp = h.value(p);
    if hp <= 0.0 {
        return Err(Error::NonPositiveWeight { value: hp });
    }
    let grid = gd.grid();
    let hs = h.sample(grid)?;
    let exp = green_local_expansion(gd)?;
    let mut j_values = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let spec = TestFunctionSpec::with_prefactor(p, eps, alpha_prefactor, gd.robin, exp.b)?;
        j_values.push(test_function_energy(&spec, gd, &hs)?.value);
    }
    let m = eps_list.len();
    let a = DMatrix::from_fn(m, 3, |i, j| {
        let e = eps_list[i];
        match j {
            0 => 1.0,
            1 => e * (1.0 / e).ln(),
            _ => e,
        }
    });
    let y = DVector::from_column_slice(&j_values);
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&y, 1e-14).map_err(|_| Error::IllConditioned {
        context: "expansion fit",
        condition: f64::INFINITY,
    })?;
    let residuals: Vec<f64> = (&a * &coef - &y).iter().copied().collect();
    let worst = residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    if worst > FIT_RESIDUAL_LIMIT {
        return Err(Error::FitResidual {
            context: "expansion fit",
            residual: worst,
            limit: FIT_RESIDUAL_LIMIT,
        });
    }
    Ok(ExpansionFit {
        eps: eps_list.to_vec(),
        j_values,
        intercept: coef[0],
        slope: coef[1],
        linear: coef[2],
        residuals,
        predicted_intercept: -1.0 - PI.ln() - hp.ln() - 0.5 * gd.robin,
        predicted_slope: -0.25 * (h.laplacian_log(p)? + EIGHT_PI),
        alpha_prefactor,
    })
}

/// Plain grid evaluation of `J_{8pi}` on the sampled test function, for cross-checks.
pub fn grid_energy(phi: &ScalarField, h: &ScalarField) -> Result<FunctionalEval> {
    eval_j(phi, h, EIGHT_PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_profile() {
        assert_eq!(eta(0.5), 1.0);
        assert_eq!(eta(1.0), 1.0);
        assert_eq!(eta(2.0), 0.0);
        assert!((eta(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_makes_inner_interface_exact() {
        let spec = TestFunctionSpec::new([0.0, 0.0], 1e-3, 3.0, -5.0, [0.0, 0.0]).unwrap();
        let r1 = spec.inner_radius();
        let inner = -2.0 * (r1 * r1 + spec.eps).ln();
        let annulus = -4.0 * r1.ln() + spec.robin + spec.c_eps;
        assert!((inner - annulus).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TestFunctionSpec::new([0.0, 0.0], 0.0, 1.0, 0.0, [0.0, 0.0]).is_err());
        assert!(TestFunctionSpec::new([0.0, 0.0], 0.1, -1.0, 0.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn formula_scaling() {
        let g = TorusGrid::new(32).unwrap();
        let a = inf_j_formula(&PrescribedFunction::one(), &g, -5.0).unwrap();
        let b = inf_j_formula(&PrescribedFunction::Constant { value: 2.0 }, &g, -5.0).unwrap();
        assert!((a - b - 2f64.ln()).abs() < 1e-14);
        assert!((a - (-1.0 - PI.ln() + 2.5)).abs() < 1e-14);
    }
}

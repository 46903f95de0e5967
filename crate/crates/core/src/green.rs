//! Green function of the Laplacian on the unit torus,
//! `Delta G(., p) = 1 - delta_p` with zero mean.
//!
//! The singular part `-(1/2pi) chi(r) ln r` is handled analytically with a
//! smooth radial cutoff `chi`; the remainder solves a smooth Poisson problem
//! on the grid. Off-grid values of the remainder use trigonometric interpolation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{displacement, wrap_point, Point, TorusGrid};
use crate::quadrature::gauss_legendre;
use crate::spectral::Spectrum;

const TWO_PI: f64 = 2.0 * PI;
const FOUR_PI2: f64 = 4.0 * PI * PI;

/// Smooth radial cutoff: 1 on `[0, inner]`, 0 on `[outer, inf)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Self {
            inner: 0.33,
            outer: 0.48,
        }
    }
}

/// `e^{-1/y}` for `y > 0`.
#[inline]
fn bump_edge(y: f64) -> f64 {
    if y > 0.0 {
        (-1.0 / y).exp()
    } else {
        0.0
    }
}

/// C-infinity step equal to 1 for `t <= 0` and 0 for `t >= 1`, with its first two derivatives.
pub fn smooth_step(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let u = bump_edge(1.0 - t);
    let v = bump_edge(t);
    let s = u / (u + v);
    // s(1-s) = uv/(u+v)^2 stays finite where phi' blows up
    let w = u * v / ((u + v) * (u + v));
    let dphi = 1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t));
    let ddphi = -2.0 / (t * t * t) + 2.0 / ((1.0 - t) * (1.0 - t) * (1.0 - t));
    let d1 = -dphi * w;
    let d2 = -ddphi * w + dphi * dphi * w * (1.0 - 2.0 * s);
    (s, d1, d2)
}

impl Cutoff {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner > 0.0 && self.inner < self.outer && self.outer < 0.5) {
            return Err(Error::InvalidParameter {
                name: "cutoff",
                reason: format!("need 0 < inner < outer < 1/2, got {:?}", self),
            });
        }
        Ok(())
    }

    #[inline]
    fn width(&self) -> f64 {
        self.outer - self.inner
    }

    /// `(chi, chi', chi'')` at radius `r`.
    #[inline]
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let w = self.width();
        let (s, d1, d2) = smooth_step((r - self.inner) / w);
        (s, d1 / w, d2 / (w * w))
    }

    /// Cut-off singular part `-(1/2pi) chi(r) ln r`, for `r > 0`.
    #[inline]
    pub fn singular(&self, r: f64) -> f64 {
        if r >= self.outer {
            return 0.0;
        }
        -self.eval(r).0 * r.ln() / TWO_PI
    }

    /// Smooth part of the Laplacian of [`Self::singular`] (the delta mass removed).
    #[inline]
    pub fn singular_laplacian(&self, r: f64) -> f64 {
        if r <= self.inner || r >= self.outer {
            return 0.0;
        }
        let (_, d1, d2) = self.eval(r);
        let l = r.ln();
        -(d2 * l + d1 * (2.0 + l) / r) / TWO_PI
    }

    /// `int chi(|x|) ln|x| dx` over the plane.
    pub fn log_moment(&self) -> f64 {
        let a = self.inner;
        let core = 2.0 * PI * (0.5 * a * a * a.ln() - 0.25 * a * a);
        let ring = gauss_legendre(self.inner, self.outer, 8, |r| self.eval(r).0 * r.ln() * r);
        core + 2.0 * PI * ring
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobinEstimate {
    /// Extrapolated `lim (8 pi G + 4 ln|x - p|)`.
    pub value: f64,
    /// `8 pi` times the interpolated regular part at the pole.
    pub direct: f64,
    /// Diagonal of the Richardson table, scaled by `8 pi`.
    pub history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GreenData {
    pub pole: Point,
    /// Band-limited (spectrally truncated) Green function on the grid.
    pub field: ScalarField,
    /// `G + (1/2pi) chi ln r`: smooth, sampled on the grid.
    pub regular: ScalarField,
    pub cutoff: Cutoff,
    /// `8 pi` times the regular part at the pole; see [`robin_constant`] for the extrapolated check.
    pub robin: f64,
    regular_spectrum: Spectrum,
}

pub fn green_function(grid: &TorusGrid, pole: Point) -> Result<GreenData> {
    green_function_with(grid, pole, Cutoff::default())
}

pub fn green_function_with(grid: &TorusGrid, pole: Point, cutoff: Cutoff) -> Result<GreenData> {
    cutoff.validate()?;
    if !(pole[0].is_finite() && pole[1].is_finite()) {
        return Err(Error::InvalidParameter {
            name: "pole",
            reason: format!("{pole:?}"),
        });
    }
    let pole = wrap_point(pole);
    let n = grid.n();

    let mut field = ScalarField::zeros(grid);
    {
        let mut coeffs = vec![rustfft::num_complex::Complex64::new(0.0, 0.0); grid.len()];
        for i in 0..n {
            let k1 = grid.freq(i) as f64;
            for j in 0..n {
                let k2 = grid.freq(j) as f64;
                let k2s = k1 * k1 + k2 * k2;
                if k2s == 0.0 {
                    continue;
                }
                let phase = -TWO_PI * (k1 * pole[0] + k2 * pole[1]);
                coeffs[i * n + j] = rustfft::num_complex::Complex64::from_polar(1.0 / (FOUR_PI2 * k2s), phase);
            }
        }
        grid.fft2(&mut coeffs, true);
        field
            .values_mut()
            .iter_mut()
            .zip(coeffs)
            .for_each(|(v, c)| *v = c.re);
    }

    // Delta R = 1 - (smooth part of Delta S), mean fixed by mean(G) = 0
    let rhs = ScalarField::from_fn(grid, |x| {
        let d = displacement(x, pole);
        1.0 - cutoff.singular_laplacian(d[0].hypot(d[1]))
    });
    let mut regular = Spectrum::of(&rhs).inverse_laplacian().to_field();
    let mean_singular = -cutoff.log_moment() / TWO_PI;
    regular.add_scalar(-mean_singular);
    regular.check_finite("green regular part")?;
    let regular_spectrum = Spectrum::of(&regular);

    let robin = 8.0 * PI * regular_spectrum.interpolate(pole);
    Ok(GreenData {
        pole,
        field,
        regular,
        cutoff,
        robin,
        regular_spectrum,
    })
}

impl GreenData {
    pub fn grid(&self) -> &TorusGrid {
        self.field.grid()
    }

    /// Regular part `G + (1/2pi) chi(r) ln r` at any point.
    pub fn regular_at(&self, x: Point) -> f64 {
        self.regular_spectrum.interpolate(x)
    }

    /// `G(x, p)` at an off-pole point.
    pub fn value(&self, x: Point) -> f64 {
        let d = displacement(x, self.pole);
        let r = d[0].hypot(d[1]);
        self.cutoff.singular(r) + self.regular_at(x)
    }

    /// Accurate nodal value; the node at the pole (if any) keeps the band-limited value.
    pub fn node_value(&self, k: usize) -> f64 {
        let d = displacement(self.grid().node_at(k), self.pole);
        let r = d[0].hypot(d[1]);
        if r == 0.0 {
            self.field.values()[k]
        } else {
            self.cutoff.singular(r) + self.regular.values()[k]
        }
    }

    pub fn accurate_field(&self) -> ScalarField {
        let values = (0..self.grid().len()).map(|k| self.node_value(k)).collect();
        ScalarField::from_values(self.grid(), values).expect("length")
    }

    pub fn regular_spectrum(&self) -> &Spectrum {
        &self.regular_spectrum
    }
}

const CIRCLE_POINTS: usize = 32;
const CIRCLE_R0: f64 = 0.2;
const CIRCLE_LEVELS: usize = 4;
const SETTLE_TOL: f64 = 1e-6;

/// Extrapolate circle means of the regular part to the pole (Richardson in `r^2`).
pub fn robin_constant(gd: &GreenData) -> Result<RobinEstimate> {
    let means: Vec<f64> = (0..CIRCLE_LEVELS)
        .map(|j| {
            let r = CIRCLE_R0 / (1 << j) as f64;
            (0..CIRCLE_POINTS)
                .map(|m| {
                    let th = TWO_PI * m as f64 / CIRCLE_POINTS as f64;
                    gd.regular_at([gd.pole[0] + r * th.cos(), gd.pole[1] + r * th.sin()])
                })
                .sum::<f64>()
                / CIRCLE_POINTS as f64
        })
        .collect();
    let mut table: Vec<Vec<f64>> = Vec::new();
    for (j, m) in means.iter().enumerate() {
        let mut row = vec![*m];
        for k in 1..=j {
            let f = 4f64.powi(k as i32);
            let prev = &table[j - 1];
            row.push(row[k - 1] + (row[k - 1] - prev[k - 1]) / (f - 1.0));
        }
        table.push(row);
    }
    let history: Vec<f64> = table.iter().enumerate().map(|(j, r)| 8.0 * PI * r[j]).collect();
    let n = history.len();
    let scale = 1.0 + history[n - 1].abs();
    if (history[n - 1] - history[n - 2]).abs() > SETTLE_TOL * scale {
        return Err(Error::ExtrapolationDiverged { history });
    }
    Ok(RobinEstimate {
        value: *history.last().unwrap(),
        direct: 8.0 * PI * gd.regular_at(gd.pole),
        history,
    })
}

/// `8 pi G = -4 ln|x| + A + b.x + c1 x1^2 + 2 c2 x1 x2 + c3 x2^2 + O(|x|^3)` near the pole.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalExpansion {
    pub a: f64,
    pub b: [f64; 2],
    pub c: [f64; 3],
    /// Free-fit coefficient of `ln|x|` in `G` over the fitting annulus.
    pub log_coefficient: f64,
    pub fit_residual: f64,
    pub condition: f64,
    pub nodes: usize,
}

pub const EXPANSION_MIN_GRID: usize = 256;
pub const EXPANSION_OUTER: f64 = 0.05;
pub const EXPANSION_FIT_TOL: f64 = 1e-4;
pub const LOG_COEFFICIENT_TOL: f64 = 1e-4;

fn least_squares(context: &'static str, rows: &[Vec<f64>], y: &[f64]) -> Result<(DVector<f64>, f64, f64)> {
    let m = rows.len();
    let p = rows[0].len();
    let mut a = DMatrix::<f64>::zeros(m, p);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    // column equilibration so the condition number reflects geometry only
    let scales: Vec<f64> = (0..p).map(|j| a.column(j).norm().max(f64::MIN_POSITIVE)).collect();
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let ata = a.transpose() * &a;
    let eig = ata.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > 1e12 {
        return Err(Error::IllConditioned { context, condition });
    }
    let rhs = a.transpose() * DVector::from_column_slice(y);
    let sol = ata
        .cholesky()
        .ok_or(Error::IllConditioned { context, condition })?
        .solve(&rhs);
    let resid = (&a * &sol - DVector::from_column_slice(y)).norm() / (m as f64).sqrt();
    let coef = DVector::from_iterator(p, sol.iter().zip(&scales).map(|(c, s)| c / s));
    Ok((coef, resid, condition))
}

pub fn green_local_expansion(gd: &GreenData) -> Result<LocalExpansion> {
    let grid = gd.grid();
    if grid.n() < EXPANSION_MIN_GRID {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("local expansion needs n >= {EXPANSION_MIN_GRID}, got {}", grid.n()),
        });
    }
    let inner = 2.0 * grid.spacing();
    let mut quad_rows = Vec::new();
    let mut quad_y = Vec::new();
    let mut log_rows = Vec::new();
    let mut log_y = Vec::new();
    for k in 0..grid.len() {
        let d = displacement(grid.node_at(k), gd.pole);
        let r = d[0].hypot(d[1]);
        if !(inner..=EXPANSION_OUTER).contains(&r) {
            continue;
        }
        let (x, y) = (d[0], d[1]);
        let g = gd.node_value(k);
        quad_rows.push(vec![x, y, x * x, 2.0 * x * y, y * y]);
        quad_y.push(8.0 * PI * g + 4.0 * r.ln() - gd.robin);
        log_rows.push(vec![r.ln(), 1.0, x, y, x * x, x * y, y * y]);
        log_y.push(g);
    }
    let (c, resid, condition) = least_squares("local expansion", &quad_rows, &quad_y)?;
    if resid > EXPANSION_FIT_TOL {
        return Err(Error::FitResidual {
            context: "local expansion",
            residual: resid,
            limit: EXPANSION_FIT_TOL,
        });
    }
    let (lc, _, _) = least_squares("log coefficient", &log_rows, &log_y)?;
    let expected = -1.0 / TWO_PI;
    if (lc[0] - expected).abs() > LOG_COEFFICIENT_TOL {
        return Err(Error::LogCoefficient {
            found: lc[0],
            expected,
            tol: LOG_COEFFICIENT_TOL,
        });
    }
    Ok(LocalExpansion {
        a: gd.robin,
        b: [c[0], c[1]],
        c: [c[2], c[3], c[4]],
        log_coefficient: lc[0],
        fit_residual: resid,
        condition,
        nodes: quad_rows.len(),
    })
}

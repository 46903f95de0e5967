//! Fourier calculus on the torus grid.
//!
//! Coefficients are normalized so that `f(x) = sum_k c_k exp(2 pi i k.x)`.
//! The Nyquist row and column use the full `-4 pi^2 k^2` symbol for even
//! operators and are dropped by odd ones.

use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector};
use rustfft::num_complex::Complex64;

use crate::error::Result;
use crate::field::ScalarField;
use crate::grid::{wrap_point, Point, TorusGrid};

const TWO_PI: f64 = 2.0 * PI;
const FOUR_PI2: f64 = 4.0 * PI * PI;

#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn of(f: &ScalarField) -> Self {
        let grid = f.grid().clone();
        let mut coeffs: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.fft2(&mut coeffs, false);
        let s = 1.0 / grid.len() as f64;
        coeffs.iter_mut().for_each(|c| *c *= s);
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn to_field(&self) -> ScalarField {
        let mut data = self.coeffs.clone();
        self.grid.fft2(&mut data, true);
        let values = data.into_iter().map(|c| c.re).collect();
        ScalarField::from_values(&self.grid, values).expect("length preserved")
    }

    /// Multiply coefficient `(i, j)` by `symbol(k1, k2, i, j)`.
    fn apply(&self, symbol: impl Fn(i64, i64, usize, usize) -> Complex64) -> Spectrum {
        let n = self.grid.n();
        let mut coeffs = self.coeffs.clone();
        for i in 0..n {
            let k1 = self.grid.freq(i);
            for j in 0..n {
                let k2 = self.grid.freq(j);
                coeffs[i * n + j] *= symbol(k1, k2, i, j);
            }
        }
        Spectrum {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    pub fn laplacian(&self) -> Spectrum {
        self.apply(|k1, k2, _, _| Complex64::new(-FOUR_PI2 * (k1 * k1 + k2 * k2) as f64, 0.0))
    }

    /// Mean-zero solution of `Delta v = f - mean(f)`.
    pub fn inverse_laplacian(&self) -> Spectrum {
        self.apply(|k1, k2, _, _| {
            let k2s = (k1 * k1 + k2 * k2) as f64;
            if k2s == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-1.0 / (FOUR_PI2 * k2s), 0.0)
            }
        })
    }

    /// `(I - dt Delta)^{-1}`.
    pub fn resolvent(&self, dt: f64) -> Spectrum {
        self.apply(|k1, k2, _, _| Complex64::new(1.0 / (1.0 + dt * FOUR_PI2 * (k1 * k1 + k2 * k2) as f64), 0.0))
    }

    /// Partial derivative along coordinate `axis` (0 or 1).
    pub fn derivative(&self, axis: usize) -> Spectrum {
        let g = self.grid.clone();
        self.apply(move |k1, k2, i, j| {
            let (k, idx) = if axis == 0 { (k1, i) } else { (k2, j) };
            if g.is_nyquist(idx) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, TWO_PI * k as f64)
            }
        })
    }

    /// `int |grad f|^2`, consistent with `-int f Delta f` on the grid.
    pub fn dirichlet_energy(&self) -> f64 {
        let n = self.grid.n();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let k1 = self.grid.freq(i);
            let mut s = 0.0;
            for j in 0..n {
                let k2 = self.grid.freq(j);
                s += ((k1 * k1 + k2 * k2) as f64) * self.coeffs[i * n + j].norm_sqr();
            }
            rows.push(s);
        }
        FOUR_PI2 * rows.iter().sum::<f64>()
    }

    fn phase_vector(&self, x: f64) -> Vec<Complex64> {
        let n = self.grid.n();
        (0..n)
            .map(|i| {
                if self.grid.is_nyquist(i) {
                    Complex64::new((PI * n as f64 * x).cos(), 0.0)
                } else {
                    Complex64::from_polar(1.0, TWO_PI * self.grid.freq(i) as f64 * x)
                }
            })
            .collect()
    }

    /// Value, gradient and Hessian `[fxx, fxy, fyy]` of the interpolant at a point.
    /// Nyquist modes are dropped so the derivatives are those of a real function.
    pub fn jet_at(&self, p: Point) -> (f64, [f64; 2], [f64; 3]) {
        let n = self.grid.n();
        let e1 = self.phase_vector(p[0]);
        let e2 = self.phase_vector(p[1]);
        let k: Vec<f64> = (0..n)
            .map(|i| if self.grid.is_nyquist(i) { 0.0 } else { TWO_PI * self.grid.freq(i) as f64 })
            .collect();
        let i_unit = Complex64::new(0.0, 1.0);
        let mut acc = [Complex64::new(0.0, 0.0); 6];
        for i in 0..n {
            let row = &self.coeffs[i * n..(i + 1) * n];
            let (mut s0, mut s1, mut s2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for j in 0..n {
                let t = row[j] * e2[j];
                s0 += t;
                s1 += t * k[j];
                s2 += t * (k[j] * k[j]);
            }
            let a = e1[i];
            acc[0] += a * s0;
            acc[1] += a * s0 * k[i];
            acc[2] += a * s1;
            acc[3] += a * s0 * (k[i] * k[i]);
            acc[4] += a * s1 * k[i];
            acc[5] += a * s2;
        }
        let value = acc[0].re;
        let grad = [(acc[1] * i_unit).re, (acc[2] * i_unit).re];
        let hess = [-acc[3].re, -acc[4].re, -acc[5].re];
        (value, grad, hess)
    }

    /// Value of the real trigonometric interpolant at an arbitrary point.
    pub fn interpolate(&self, p: Point) -> f64 {
        let n = self.grid.n();
        let e1 = self.phase_vector(p[0]);
        let e2 = self.phase_vector(p[1]);
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let row = &self.coeffs[i * n..(i + 1) * n];
            let inner: Complex64 = row.iter().zip(&e2).map(|(c, e)| c * e).sum();
            total += e1[i] * inner;
        }
        total.re
    }
}

pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    f.check_finite("laplacian input")?;
    Ok(Spectrum::of(f).laplacian().to_field())
}

/// Mean-zero `v` with `Delta v = f - mean(f)`.
pub fn inverse_laplacian(f: &ScalarField) -> Result<ScalarField> {
    f.check_finite("inverse_laplacian input")?;
    Ok(Spectrum::of(f).inverse_laplacian().to_field())
}

pub fn gradient(f: &ScalarField) -> Result<[ScalarField; 2]> {
    f.check_finite("gradient input")?;
    let s = Spectrum::of(f);
    Ok([s.derivative(0).to_field(), s.derivative(1).to_field()])
}

pub fn integrate(f: &ScalarField) -> f64 {
    f.integrate()
}

pub fn dirichlet_energy(f: &ScalarField) -> f64 {
    Spectrum::of(f).dirichlet_energy()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MaxLocation {
    pub value: f64,
    pub point: Point,
    pub index: (usize, usize),
    /// False when the local quadratic model was degenerate and the grid node was kept.
    pub refined: bool,
}

/// Grid argmax refined by a least-squares quadratic on the 3x3 neighbourhood.
pub fn max_location(f: &ScalarField) -> Result<MaxLocation> {
    f.check_finite("max_location input")?;
    let grid = f.grid();
    let n = grid.n();
    let k = f.argmax();
    let (i0, j0) = (k / n, k % n);
    let node = grid.node(i0, j0);
    let unrefined = MaxLocation {
        value: f.values()[k],
        point: node,
        index: (i0, j0),
        refined: false,
    };

    let mut a = SMatrix::<f64, 9, 6>::zeros();
    let mut b = SVector::<f64, 9>::zeros();
    let mut row = 0;
    for di in -1i64..=1 {
        for dj in -1i64..=1 {
            let i = (i0 as i64 + di).rem_euclid(n as i64) as usize;
            let j = (j0 as i64 + dj).rem_euclid(n as i64) as usize;
            let (x, y) = (di as f64, dj as f64);
            a.set_row(
                row,
                &nalgebra::RowSVector::<f64, 6>::from_row_slice(&[1.0, x, y, x * x, x * y, y * y]),
            );
            b[row] = f.at(i, j);
            row += 1;
        }
    }
    let ata = a.transpose() * a;
    let atb = a.transpose() * b;
    let Some(c) = ata.cholesky().map(|ch| ch.solve(&atb)) else {
        return Ok(unrefined);
    };
    let (gx, gy, hxx, hxy, hyy) = (c[1], c[2], 2.0 * c[3], c[4], 2.0 * c[5]);
    let det = hxx * hyy - hxy * hxy;
    let scale = c[3].abs().max(c[5].abs()).max(c[4].abs()).max(f64::MIN_POSITIVE);
    if !(hxx < 0.0 && det > 1e-12 * scale * scale) {
        return Ok(unrefined);
    }
    let sx = -(hyy * gx - hxy * gy) / det;
    let sy = -(-hxy * gx + hxx * gy) / det;
    if sx.abs() > 1.0 || sy.abs() > 1.0 {
        return Ok(unrefined);
    }
    let value = c[0] + gx * sx + gy * sy + c[3] * sx * sx + c[4] * sx * sy + c[5] * sy * sy;
    let h = grid.spacing();
    Ok(MaxLocation {
        value,
        point: wrap_point([node[0] + sx * h, node[1] + sy * h]),
        index: (i0, j0),
        refined: true,
    })
}

/// Grid argmax polished by Newton iteration on the trigonometric interpolant.
/// Falls back to [`max_location`] when Newton leaves the neighbouring cell.
pub fn peak_location(f: &ScalarField) -> Result<MaxLocation> {
    let coarse = max_location(f)?;
    let grid = f.grid();
    let node_value = f.values()[grid.index(coarse.index.0, coarse.index.1)];
    // the least-squares fit can sit below the node on a narrow peak
    let coarse = MaxLocation {
        value: coarse.value.max(node_value),
        ..coarse
    };
    let s = Spectrum::of(f);
    let start = grid.node(coarse.index.0, coarse.index.1);
    let mut x = start;
    for _ in 0..20 {
        let (_, g, hs) = s.jet_at(x);
        let det = hs[0] * hs[2] - hs[1] * hs[1];
        if !(hs[0] < 0.0 && det > 0.0) {
            return Ok(coarse);
        }
        let dx = -(hs[2] * g[0] - hs[1] * g[1]) / det;
        let dy = -(-hs[1] * g[0] + hs[0] * g[1]) / det;
        x = [x[0] + dx, x[1] + dy];
        if crate::grid::torus_distance(x, start) > grid.spacing() * std::f64::consts::SQRT_2 {
            return Ok(coarse);
        }
        if dx.abs().max(dy.abs()) < 1e-14 * grid.spacing() {
            break;
        }
    }
    let value = s.interpolate(x);
    // a peak on the node itself comes back a few ulps low
    if value < node_value - 1e-13 * node_value.abs().max(1.0) {
        return Ok(coarse);
    }
    Ok(MaxLocation {
        value: value.max(node_value),
        point: wrap_point(x),
        index: coarse.index,
        refined: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::torus_distance;

    fn trig(g: &TorusGrid) -> ScalarField {
        ScalarField::from_fn(g, |x| (TWO_PI * x[0]).sin() * (2.0 * TWO_PI * x[1]).cos() + 0.3)
    }

    #[test]
    fn laplacian_of_mode() {
        let g = TorusGrid::new(32).unwrap();
        let f = trig(&g);
        let l = laplacian(&f).unwrap();
        let expect = f.map(|v| -FOUR_PI2 * 5.0 * (v - 0.3));
        let err = l.zip_map(&expect, |a, b| a - b).max_abs();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn inverse_roundtrip() {
        let g = TorusGrid::new(64).unwrap();
        let f = ScalarField::from_fn(&g, |x| (TWO_PI * (x[0] + x[1])).sin().exp());
        let v = inverse_laplacian(&f).unwrap();
        assert!(v.integrate().abs() < 1e-14);
        let back = laplacian(&v).unwrap();
        let m = f.integrate();
        let err = back.zip_map(&f, |a, b| a - (b - m)).max_abs();
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn derivative_and_energy() {
        let g = TorusGrid::new(32).unwrap();
        let f = trig(&g);
        let [dx, _] = gradient(&f).unwrap();
        let expect = ScalarField::from_fn(&g, |x| TWO_PI * (TWO_PI * x[0]).cos() * (2.0 * TWO_PI * x[1]).cos());
        assert!(dx.zip_map(&expect, |a, b| a - b).max_abs() < 1e-11);
        // |grad (sin 2pi x cos 4pi y)|^2 integrates to 4 pi^2 * 5 / 4
        assert!((dirichlet_energy(&f) - FOUR_PI2 * 5.0 / 4.0).abs() < 1e-11);
    }

    #[test]
    fn interpolation_is_exact_for_band_limited() {
        let g = TorusGrid::new(32).unwrap();
        let s = Spectrum::of(&trig(&g));
        let p = [0.123, 0.777];
        let exact = (TWO_PI * p[0]).sin() * (2.0 * TWO_PI * p[1]).cos() + 0.3;
        assert!((s.interpolate(p) - exact).abs() < 1e-13);
    }

    #[test]
    fn resolvent_inverts() {
        let g = TorusGrid::new(32).unwrap();
        let f = trig(&g);
        let dt = 0.01;
        let v = Spectrum::of(&f).resolvent(dt).to_field();
        let lv = laplacian(&v).unwrap();
        let back = v.zip_map(&lv, |a, b| a - dt * b);
        assert!(back.zip_map(&f, |a, b| a - b).max_abs() < 1e-12);
    }

    #[test]
    fn max_location_refines_off_grid_peak() {
        let g = TorusGrid::new(128).unwrap();
        let p0 = [0.3013, 0.6071];
        let f = ScalarField::from_fn(&g, |x| {
            let d = torus_distance(x, p0);
            2.0 - 40.0 * d * d
        });
        let m = max_location(&f).unwrap();
        assert!(m.refined);
        assert!(torus_distance(m.point, p0) < 1e-10);
        assert!((m.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn jet_matches_analytic() {
        let g = TorusGrid::new(32).unwrap();
        let s = Spectrum::of(&trig(&g));
        let p = [0.31, 0.57];
        let (v, gr, h) = s.jet_at(p);
        let (a, b) = (TWO_PI * p[0], 2.0 * TWO_PI * p[1]);
        assert!((v - (a.sin() * b.cos() + 0.3)).abs() < 1e-13);
        assert!((gr[0] - TWO_PI * a.cos() * b.cos()).abs() < 1e-12);
        assert!((gr[1] + 2.0 * TWO_PI * a.sin() * b.sin()).abs() < 1e-12);
        assert!((h[0] + TWO_PI * TWO_PI * a.sin() * b.cos()).abs() < 1e-10);
        assert!((h[1] + 2.0 * TWO_PI * TWO_PI * a.cos() * b.sin()).abs() < 1e-10);
        assert!((h[2] + 4.0 * TWO_PI * TWO_PI * a.sin() * b.cos()).abs() < 1e-10);
    }

    #[test]
    fn peak_location_on_narrow_bump() {
        let g = TorusGrid::new(128).unwrap();
        let c = [0.5 + 0.3 / 128.0, 0.25 - 0.2 / 128.0];
        let w = 5.0 / 128.0;
        let f = ScalarField::from_fn(&g, |x| {
            let d = crate::grid::displacement(x, c);
            let r2 = ((PI * d[0]).sin().powi(2) + (PI * d[1]).sin().powi(2)) / (PI * PI);
            10.0 - 2.0 * (1.0 + r2 / (w * w)).ln()
        });
        let m = peak_location(&f).unwrap();
        let q = max_location(&f).unwrap();
        assert!(torus_distance(m.point, c) < 1e-7);
        assert!((m.value - 10.0).abs() < 1e-6);
        assert!((m.value - 10.0).abs() < (q.value - 10.0).abs());
    }

    #[test]
    fn peak_on_a_node_keeps_node_value() {
        // bubble centred on the origin node, a few cells wide
        let g = TorusGrid::new(256).unwrap();
        let w = 4.0 / 256.0;
        let f = ScalarField::from_fn(&g, |x| {
            let r2 = ((PI * x[0]).sin().powi(2) + (PI * x[1]).sin().powi(2)) / (PI * PI);
            10.0 - 2.0 * (1.0 + r2 / (w * w)).ln()
        });
        let m = peak_location(&f).unwrap();
        assert!(m.value >= f.values()[0]);
        assert!((m.value - 10.0).abs() < 1e-9);
        assert!(torus_distance(m.point, [0.0, 0.0]) < 1e-9);
    }

    #[test]
    fn max_location_flags_flat_field() {
        let g = TorusGrid::new(32).unwrap();
        let m = max_location(&ScalarField::constant(&g, 1.0)).unwrap();
        assert!(!m.refined);
        assert_eq!(m.value, 1.0);
    }
}

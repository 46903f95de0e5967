//! Uniform grid on the unit square torus and its FFT plans.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

pub const MIN_GRID: usize = 32;

struct Plans {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

/// An `n x n` grid with nodes at `(i/n, j/n)`, stored row-major with the
/// first coordinate as the row index. Cloning is cheap; plans are shared.
#[derive(Clone)]
pub struct TorusGrid {
    plans: Arc<Plans>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid").field("n", &self.n()).finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n() == other.n()
    }
}

impl Eq for TorusGrid {}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_GRID || !n.is_power_of_two() {
            return Err(Error::InvalidGrid { n, min: MIN_GRID });
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Ok(Self {
            plans: Arc::new(Plans {
                n,
                fwd,
                inv,
                scratch_len,
            }),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.plans.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n() * self.n()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n() as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n() + j
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        let h = self.spacing();
        [i as f64 * h, j as f64 * h]
    }

    /// Node coordinates for a flat index.
    #[inline]
    pub fn node_at(&self, k: usize) -> Point {
        self.node(k / self.n(), k % self.n())
    }

    /// Signed frequency of FFT index `i`; the Nyquist index maps to `-n/2`.
    #[inline]
    pub fn freq(&self, i: usize) -> i64 {
        let n = self.n() as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n() / 2
    }

    pub(crate) fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n();
        debug_assert_eq!(data.len(), n * n);
        let plan = if inverse {
            &self.plans.inv
        } else {
            &self.plans.fwd
        };
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.plans.scratch_len];
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
    }
}

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + B).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Reduce a coordinate to `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

#[inline]
pub fn wrap_point(p: Point) -> Point {
    [wrap(p[0]), wrap(p[1])]
}

/// Nearest-image displacement `x - p`, each component in `[-1/2, 1/2)`.
#[inline]
pub fn displacement(x: Point, p: Point) -> Point {
    [wrap_half(x[0] - p[0]), wrap_half(x[1] - p[1])]
}

#[inline]
fn wrap_half(d: f64) -> f64 {
    let y = d - (d + 0.5).floor();
    if y >= 0.5 {
        y - 1.0
    } else {
        y
    }
}

#[inline]
pub fn torus_distance(x: Point, p: Point) -> f64 {
    let d = displacement(x, p);
    d[0].hypot(d[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(TorusGrid::new(16).is_err());
        assert!(TorusGrid::new(48).is_err());
        assert!(TorusGrid::new(64).is_ok());
    }

    #[test]
    fn frequencies() {
        let g = TorusGrid::new(32).unwrap();
        assert_eq!(g.freq(0), 0);
        assert_eq!(g.freq(15), 15);
        assert_eq!(g.freq(16), -16);
        assert_eq!(g.freq(31), -1);
    }

    #[test]
    fn displacement_wraps() {
        let d = displacement([0.95, 0.02], [0.05, 0.99]);
        assert!((d[0] + 0.1).abs() < 1e-15);
        assert!((d[1] - 0.03).abs() < 1e-15);
        assert!((torus_distance([0.0, 0.0], [1.0, 1.0])).abs() < 1e-15);
        assert_eq!(wrap(-1e-20), 0.0);
    }

    #[test]
    fn transpose_roundtrip() {
        let n = 64;
        let mut v: Vec<Complex64> = (0..n * n).map(|k| Complex64::new(k as f64, 0.0)).collect();
        transpose_in_place(&mut v, n);
        assert_eq!(v[3 * n + 5].re, (5 * n + 3) as f64);
        transpose_in_place(&mut v, n);
        assert!(v.iter().enumerate().all(|(k, c)| c.re == k as f64));
    }
}

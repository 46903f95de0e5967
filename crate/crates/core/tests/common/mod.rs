//! Independent references used only by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use meanfield::{ScalarField, TorusGrid};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Robin constant of the unit square torus, computed once with 30-digit
/// Ewald summation (independent of the splitting parameter to all digits shown).
pub const ROBIN_SQUARE: f64 = -5.242_131_703_646_038;

/// Exponential integral `E1(z)` for `z > 0`.
pub fn e1(z: f64) -> f64 {
    assert!(z > 0.0);
    if z <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -z / k as f64;
            let t = term / k as f64;
            sum += t;
            if t.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - z.ln() - sum
    } else {
        // modified Lentz on the continued fraction
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    }
}

const EWALD_S: f64 = 0.05;
const KMAX: i64 = 12;
const MMAX: i64 = 4;

/// Ewald-split Green function `G(x, 0)`, `Delta G = 1 - delta`, mean zero.
pub fn ewald_green(x: [f64; 2]) -> f64 {
    let s = EWALD_S;
    let mut g = -s;
    for a in -KMAX..=KMAX {
        for b in -KMAX..=KMAX {
            if a == 0 && b == 0 {
                continue;
            }
            let k2 = (a * a + b * b) as f64;
            g += (-4.0 * PI * PI * k2 * s).exp() / (4.0 * PI * PI * k2)
                * (2.0 * PI * (a as f64 * x[0] + b as f64 * x[1])).cos();
        }
    }
    for a in -MMAX..=MMAX {
        for b in -MMAX..=MMAX {
            let d2 = (x[0] - a as f64).powi(2) + (x[1] - b as f64).powi(2);
            g += e1(d2 / (4.0 * s)) / (4.0 * PI);
        }
    }
    g
}

/// `lim (8 pi G + 4 ln|x|)` from the same splitting.
pub fn ewald_robin() -> f64 {
    let s = EWALD_S;
    let mut r0 = -s + ((4.0 * s).ln() - EULER_GAMMA) / (4.0 * PI);
    for a in -KMAX..=KMAX {
        for b in -KMAX..=KMAX {
            if a == 0 && b == 0 {
                continue;
            }
            let k2 = (a * a + b * b) as f64;
            r0 += (-4.0 * PI * PI * k2 * s).exp() / (4.0 * PI * PI * k2);
            if a.abs() <= MMAX && b.abs() <= MMAX {
                r0 += e1(k2 / (4.0 * s)) / (4.0 * PI);
            }
        }
    }
    8.0 * PI * r0
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random band-limited field with modes `|k|_inf <= kmax` and decaying amplitudes.
pub fn random_field(grid: &TorusGrid, rng: &mut ChaCha8Rng, kmax: i64, amplitude: f64) -> ScalarField {
    let mut modes = Vec::new();
    for a in -kmax..=kmax {
        for b in 0..=kmax {
            if b == 0 && a <= 0 {
                continue;
            }
            let w = amplitude / (1.0 + (a * a + b * b) as f64);
            modes.push((a as f64, b as f64, w * rng.random_range(-1.0..1.0), w * rng.random_range(-1.0..1.0)));
        }
    }
    let c0 = amplitude * rng.random_range(-1.0..1.0);
    ScalarField::from_fn(grid, |x| {
        c0 + modes
            .iter()
            .map(|&(a, b, c, s)| {
                let t = 2.0 * PI * (a * x[0] + b * x[1]);
                c * t.cos() + s * t.sin()
            })
            .sum::<f64>()
    })
}

//! Composite Gauss-Legendre quadrature for the 1-D radial integrals.

use std::f64::consts::PI;
use std::sync::OnceLock;

const ORDER: usize = 20;

fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(ORDER))
}

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_m`.
pub fn legendre_rule(m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `int_a^b f` using `panels` equal panels of a 20-point rule.
pub fn gauss_legendre(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let s: f64 = rule().iter().map(|&(x, w)| w * f(mid + 0.5 * h * x)).sum();
        total += 0.5 * h * s;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_and_logs() {
        assert!((gauss_legendre(0.0, 2.0, 1, |x| x.powi(15)) - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let exact = 0.5 * 0.3f64.powi(2) * 0.3f64.ln() - 0.25 * 0.09;
        assert!((gauss_legendre(0.0, 0.3, 40, |r| r * r.ln()) - exact).abs() < 1e-10);
        let w: f64 = legendre_rule(7).iter().map(|p| p.1).sum();
        assert!((w - 2.0).abs() < 1e-14);
    }
}

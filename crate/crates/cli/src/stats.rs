//! Ordinary least squares line fits with Student-t confidence intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub points: usize,
    pub intercept: f64,
    pub slope: f64,
    /// 95% interval for the slope; `None` with fewer than three points.
    pub slope_ci95: Option<[f64; 2]>,
    pub intercept_ci95: Option<[f64; 2]>,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_ci95, intercept_ci95) = if n > 2 {
        let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        let s2 = sse / (nf - 2.0);
        let se_slope = (s2 / sxx).sqrt();
        let se_icpt = (s2 * (1.0 / nf + mx * mx / sxx)).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0).ok()?.inverse_cdf(0.975);
        (
            Some([slope - t * se_slope, slope + t * se_slope]),
            Some([intercept - t * se_icpt, intercept + t * se_icpt]),
        )
    } else {
        (None, None)
    };
    Some(LineFit {
        points: n,
        intercept,
        slope,
        slope_ci95,
        intercept_ci95,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = line_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        let ci = f.slope_ci95.unwrap();
        assert!((ci[1] - ci[0]).abs() < 1e-12);
    }

    #[test]
    fn interval_matches_reference() {
        // y = x + noise pattern; reference t(0.975, 3) = 3.182446305284263
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.1, 0.9, 2.1, 2.9, 4.1];
        let f = line_fit(&x, &y).unwrap();
        let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - f.intercept - f.slope * a).powi(2)).sum();
        let half = 3.182_446_305_284_263 * (sse / 3.0 / 10.0).sqrt();
        let ci = f.slope_ci95.unwrap();
        assert!((ci[1] - f.slope - half).abs() < 1e-9);
        assert!(line_fit(&[1.0], &[1.0]).is_none());
        assert!(line_fit(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }
}

//! Pass/fail evaluation of the numbered acceptance criteria from measured quantities.
//! Shared by `report` and the acceptance test target so both apply identical thresholds.

use std::fmt;

use meanfield::blowup::BlowupDiagnostics;
use meanfield::testfn::ExpansionFit;
use serde::{Deserialize, Serialize};

pub const GRADIENT_REL_TOL: f64 = 1e-6;
pub const GREEN_MEAN_TOL: f64 = 1e-12;
pub const GREEN_SYMMETRY_TOL: f64 = 1e-10;
pub const ROBIN_ORACLE_TOL: f64 = 1e-6;
pub const ROBIN_POLE_TOL: f64 = 1e-8;
pub const TRIVIAL_PDE_TOL: f64 = 1e-10;
pub const BOUNDED_LAMBDA_MAX: f64 = 5.0;
pub const BOUNDED_EPS_TARGET: f64 = 1e-4;
pub const CRITICAL_RESIDUAL_TOL: f64 = 1e-8;
pub const IDENTITY_LAMBDA: [f64; 2] = [8.0, 12.0];
pub const IDENTITY_RATIO: [f64; 2] = [0.7, 1.3];
pub const CP_LAMBDA_REF: f64 = 8.0;
pub const CP_GROWTH_LIMIT: f64 = 10.0;
pub const TAIL_POINTS: usize = 3;
pub const TAIL_SPREAD_LIMIT: f64 = 2.0;
pub const INF_REL_TOL: f64 = 0.05;
pub const INTERCEPT_REL_TOL: f64 = 0.02;
pub const SLOPE_REL_TOL: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    #[serde(rename = "N/A")]
    NotApplicable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotApplicable => "N/A",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: u8,
    pub title: String,
    pub status: Status,
    pub detail: String,
}

impl Outcome {
    fn new(id: u8, title: &str, ok: bool, detail: String) -> Self {
        Self {
            id,
            title: title.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }

    pub fn not_applicable(id: u8, title: &str, detail: impl Into<String>) -> Self {
        Self {
            id,
            title: title.into(),
            status: Status::NotApplicable,
            detail: detail.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} C{:<2} {}: {}", self.status, self.id, self.title, self.detail)
    }
}

pub const TITLES: [&str; 11] = [
    "gradient consistency",
    "Green function",
    "trivial critical point",
    "bounded lambda",
    "blow-up identity",
    "critical-point condition",
    "far-field estimate",
    "infimum formula",
    "test-function expansion",
    "monotonicity in rho",
    "determinism",
];

pub fn title(id: u8) -> &'static str {
    TITLES[(id - 1) as usize]
}

pub fn gradient_consistency(max_rel: f64, fields: usize) -> Outcome {
    Outcome::new(
        1,
        title(1),
        max_rel <= GRADIENT_REL_TOL,
        format!("max relative error {max_rel:.3e} over {fields} fields (limit {GRADIENT_REL_TOL:e})"),
    )
}

pub fn green_function(mean: f64, symmetry: f64, robin_err: f64, pole_spread: f64) -> Outcome {
    let ok = mean <= GREEN_MEAN_TOL
        && symmetry <= GREEN_SYMMETRY_TOL
        && robin_err <= ROBIN_ORACLE_TOL
        && pole_spread <= ROBIN_POLE_TOL;
    Outcome::new(
        2,
        title(2),
        ok,
        format!("|mean| {mean:.2e}, asymmetry {symmetry:.2e}, |A - A_ewald| {robin_err:.2e}, pole spread {pole_spread:.2e}"),
    )
}

pub fn trivial_critical_point(max_u: f64, pde: f64) -> Outcome {
    Outcome::new(
        3,
        title(3),
        max_u <= TRIVIAL_PDE_TOL && pde <= TRIVIAL_PDE_TOL,
        format!("max |u| {max_u:.2e}, PDE residual {pde:.2e} (limit {TRIVIAL_PDE_TOL:e})"),
    )
}

/// Result of the closing `rho = 8 pi` solve of a bounded run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalSolve {
    pub residual: Option<f64>,
    pub pde_residual: Option<f64>,
    pub lambda: Option<f64>,
    pub j_value: Option<f64>,
    pub error: Option<String>,
}

pub fn bounded_lambda(rows: &[BlowupDiagnostics], critical: Option<&CriticalSolve>) -> Outcome {
    let sup = rows.iter().map(|d| d.lambda).fold(f64::NEG_INFINITY, f64::max);
    let last_eps = rows.last().map(|d| d.eps).unwrap_or(f64::INFINITY);
    let reached = last_eps <= BOUNDED_EPS_TARGET * (1.0 + 1e-12);
    let (crit_ok, crit) = match critical {
        Some(CriticalSolve {
            residual: Some(r),
            error: None,
            ..
        }) => (*r <= CRITICAL_RESIDUAL_TOL, format!("8pi residual {r:.2e}")),
        Some(c) => (false, format!("8pi solve failed: {}", c.error.clone().unwrap_or_default())),
        None => (false, "8pi solve not run".into()),
    };
    Outcome::new(
        4,
        title(4),
        reached && sup <= BOUNDED_LAMBDA_MAX && crit_ok,
        format!("sup lambda {sup:.4} over {} points down to eps {last_eps:.3e}, {crit}", rows.len()),
    )
}

fn ratio_of(d: &BlowupDiagnostics) -> Option<f64> {
    d.identity.as_ref().map(|i| i.ratio)
}

pub fn blowup_identity(rows: &[BlowupDiagnostics]) -> Outcome {
    let Some(last) = rows.last() else {
        return Outcome::new(5, title(5), false, "no diagnostics".into());
    };
    let in_window = last.lambda >= IDENTITY_LAMBDA[0] && last.lambda <= IDENTITY_LAMBDA[1];
    let ratio = ratio_of(last);
    let ratio_ok = ratio.is_some_and(|r| r >= IDENTITY_RATIO[0] && r <= IDENTITY_RATIO[1]);
    let tail: Vec<Option<f64>> = rows.iter().rev().take(TAIL_POINTS).rev().map(ratio_of).collect();
    let devs: Option<Vec<f64>> = tail.iter().map(|r| r.map(|v| (v - 1.0).abs())).collect();
    let monotone = devs
        .as_ref()
        .is_some_and(|d| d.len() == TAIL_POINTS && d.windows(2).all(|w| w[1] <= w[0]));
    Outcome::new(
        5,
        title(5),
        in_window && ratio_ok && monotone,
        format!(
            "final lambda {:.4}, ratio {}, |ratio - 1| over tail {:?}",
            last.lambda,
            ratio.map(|r| format!("{r:.4}")).unwrap_or_else(|| "n/a".into()),
            devs.unwrap_or_default().iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
        ),
    )
}

/// `cp_gradient_scaled` at `lambda = 8`, log-linearly interpolated between the bracketing points.
pub fn cp_reference(rows: &[BlowupDiagnostics]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|d| d.cp_gradient_scaled.map(|c| (d.lambda, c)))
        .filter(|(_, c)| *c > 0.0)
        .collect();
    let above = pts.iter().position(|(l, _)| *l >= CP_LAMBDA_REF)?;
    if above == 0 {
        return Some(pts[0].1);
    }
    let (l0, c0) = pts[above - 1];
    let (l1, c1) = pts[above];
    let t = (CP_LAMBDA_REF - l0) / (l1 - l0);
    Some((c0.ln() + t * (c1.ln() - c0.ln())).exp())
}

pub fn critical_point(rows: &[BlowupDiagnostics]) -> Outcome {
    let Some(reference) = cp_reference(rows) else {
        return Outcome::new(6, title(6), false, "run never reached lambda = 8".into());
    };
    let tail: Vec<f64> = rows
        .iter()
        .filter(|d| d.lambda >= CP_LAMBDA_REF)
        .filter_map(|d| d.cp_gradient_scaled)
        .collect();
    let sup = tail.iter().copied().fold(0.0_f64, f64::max);
    Outcome::new(
        6,
        title(6),
        sup <= CP_GROWTH_LIMIT * reference,
        format!(
            "value at lambda 8 {reference:.3e}, sup beyond {sup:.3e} ({:.2}x, limit {CP_GROWTH_LIMIT}x)",
            sup / reference
        ),
    )
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

pub fn farfield(rows: &[BlowupDiagnostics]) -> Outcome {
    let tail: Vec<&BlowupDiagnostics> = rows.iter().rev().take(TAIL_POINTS).collect();
    let scaled: Option<Vec<f64>> = tail.iter().map(|d| d.farfield_scaled).collect();
    let outside: Option<Vec<f64>> = tail.iter().map(|d| d.farfield.sup_u_plus_lambda()).collect();
    match (scaled, outside) {
        (Some(s), Some(o)) if s.len() == TAIL_POINTS && s.iter().chain(&o).all(|v| v.is_finite() && *v > 0.0) => {
            let (a, b) = (spread(&s), spread(&o));
            Outcome::new(
                7,
                title(7),
                a <= TAIL_SPREAD_LIMIT && b <= TAIL_SPREAD_LIMIT,
                format!(
                    "tail e^(lambda/2) sup|omega| in [{:.3}, {:.3}] (spread {a:.2}), sup|u + lambda| in [{:.3}, {:.3}] (spread {b:.2})",
                    s.iter().copied().fold(f64::INFINITY, f64::min),
                    s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    o.iter().copied().fold(f64::INFINITY, f64::min),
                    o.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                ),
            )
        }
        _ => Outcome::new(7, title(7), false, "far-field data missing on the schedule tail".into()),
    }
}

pub fn infimum(final_j: f64, formula: f64) -> Outcome {
    let gap = final_j - formula;
    Outcome::new(
        8,
        title(8),
        gap > 0.0 && gap <= INF_REL_TOL * formula.abs(),
        format!(
            "J at final point {final_j:.6}, formula {formula:.6}, gap {gap:.3e} ({:.2}%)",
            100.0 * gap / formula.abs()
        ),
    )
}

pub fn expansion(fit: &ExpansionFit) -> Outcome {
    let ri = ((fit.intercept - fit.predicted_intercept) / fit.predicted_intercept).abs();
    let rs = ((fit.slope - fit.predicted_slope) / fit.predicted_slope).abs();
    Outcome::new(
        9,
        title(9),
        ri <= INTERCEPT_REL_TOL && rs <= SLOPE_REL_TOL,
        format!(
            "intercept {:.6} vs {:.6} ({:.2}%), slope {:.5} vs {:.5} ({:.1}%)",
            fit.intercept,
            fit.predicted_intercept,
            100.0 * ri,
            fit.slope,
            fit.predicted_slope,
            100.0 * rs
        ),
    )
}

pub fn monotonicity(rhos: &[f64], minima: &[f64]) -> Outcome {
    let ok = minima.len() == rhos.len() && minima.len() >= 2 && minima.windows(2).all(|w| w[1] < w[0]);
    let pairs: Vec<String> = rhos.iter().zip(minima).map(|(r, j)| format!("{r:.4}:{j:.8}")).collect();
    Outcome::new(10, title(10), ok, format!("rho:J {}", pairs.join(", ")))
}

pub fn determinism(a: &[u8], b: &[u8]) -> Outcome {
    Outcome::new(
        11,
        title(11),
        !a.is_empty() && a == b,
        format!("{} vs {} bytes, identical: {}", a.len(), b.len(), a == b),
    )
}

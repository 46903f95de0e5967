//! Run configuration, parsed from a single TOML file.

use std::path::Path;

use meanfield::blowup::{validate_schedule, ContinuationOptions, DEFAULT_DELTA0, GUARD_SPACINGS};
use meanfield::solver::SolverOptions;
use meanfield::testfn::ALPHA_PREFACTOR;
use meanfield::{Point, PrescribedFunction, TorusGrid};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    Continue,
    Green,
    Testfn,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Continue => "continue",
            Mode::Green => "green",
            Mode::Testfn => "testfn",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; must agree with the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    pub h: PrescribedFunction,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default, rename = "continue")]
    pub continuation: ContinueSection,
    #[serde(default)]
    pub green: GreenSection,
    #[serde(default)]
    pub testfn: TestfnSection,
}

fn default_grid() -> usize {
    256
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    pub rho: f64,
    pub snapshot: bool,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self {
            rho: 4.0 * std::f64::consts::PI,
            snapshot: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Bounded,
    Blowup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinueSection {
    /// Explicit schedule; when absent the geometric `0.5^k` schedule down to `eps_min` is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,
    pub eps_min: f64,
    pub delta0: f64,
    pub guard_spacings: f64,
    /// Follow the continuation with a solve at `rho = 8 pi` from the last state.
    pub critical_solve: bool,
    /// Expected behaviour for the report; inferred from the data when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub snapshot: bool,
}

impl Default for ContinueSection {
    fn default() -> Self {
        Self {
            schedule: None,
            eps_min: 1e-4,
            delta0: DEFAULT_DELTA0,
            guard_spacings: GUARD_SPACINGS,
            critical_solve: false,
            scenario: None,
            snapshot: false,
        }
    }
}

impl ContinueSection {
    pub fn resolved_schedule(&self) -> Vec<f64> {
        self.schedule
            .clone()
            .unwrap_or_else(|| meanfield::blowup::geometric_schedule(self.eps_min))
    }

    pub fn options(&self) -> ContinuationOptions {
        ContinuationOptions {
            delta0: self.delta0,
            guard_spacings: self.guard_spacings,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenSection {
    pub pole: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestfnSection {
    /// Defaults to the global maximum of `h`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Point>,
    /// Explicit list; otherwise `count` log-spaced values in `[eps_min, eps_max]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    pub eps_min: f64,
    pub eps_max: f64,
    pub count: usize,
    pub alpha_prefactor: f64,
}

impl Default for TestfnSection {
    fn default() -> Self {
        Self {
            center: None,
            eps: None,
            eps_min: 1e-4,
            eps_max: 1e-2,
            count: 9,
            alpha_prefactor: ALPHA_PREFACTOR,
        }
    }
}

impl TestfnSection {
    pub fn resolved_eps(&self) -> Vec<f64> {
        if let Some(e) = &self.eps {
            return e.clone();
        }
        let m = self.count.max(2);
        let (a, b) = (self.eps_min.ln(), self.eps_max.ln());
        (0..m).map(|k| (a + (b - a) * k as f64 / (m - 1) as f64).exp()).collect()
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid("--config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| {
                    let line = text[..s.start].lines().count().max(1);
                    format!("line {line}")
                })
                .unwrap_or_else(|| "config".into());
            invalid(&field, e.message().to_string())
        })
    }

    /// Check everything needed by `mode` before any numerical work starts.
    pub fn validate(&self, mode: Mode) -> Result<TorusGrid, CliError> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(invalid("mode", format!("config says {}, subcommand is {}", m.as_str(), mode.as_str())));
            }
        }
        let grid = TorusGrid::new(self.grid).map_err(|e| invalid("grid", e.to_string()))?;
        self.h.sample(&grid).map_err(|e| invalid("h", e.to_string()))?;
        let s = &self.solver;
        if !(s.dt_init > 0.0) {
            return Err(invalid("solver.dt_init", "must be positive"));
        }
        if !(s.dt_max >= s.dt_init) {
            return Err(invalid("solver.dt_max", "must be at least dt_init"));
        }
        if !(s.tol_residual > 0.0) {
            return Err(invalid("solver.tol_residual", "must be positive"));
        }
        match mode {
            Mode::Solve => {
                if !(self.solve.rho > 0.0 && self.solve.rho.is_finite()) {
                    return Err(invalid("solve.rho", "must be positive"));
                }
            }
            Mode::Continue => {
                let c = &self.continuation;
                if c.schedule.is_none() && !(c.eps_min > 0.0 && c.eps_min < 1.0) {
                    return Err(invalid("continue.eps_min", "must lie in (0, 1)"));
                }
                validate_schedule(&c.resolved_schedule()).map_err(|e| invalid("continue.schedule", e.to_string()))?;
                if !(c.delta0 > 0.0 && c.delta0 < 0.5) {
                    return Err(invalid("continue.delta0", "must lie in (0, 0.5)"));
                }
                if !(c.guard_spacings > 0.0) {
                    return Err(invalid("continue.guard_spacings", "must be positive"));
                }
            }
            Mode::Green => {
                if !self.green.pole.iter().all(|v| v.is_finite()) {
                    return Err(invalid("green.pole", "must be finite"));
                }
            }
            Mode::Testfn => {
                let t = &self.testfn;
                let eps = t.resolved_eps();
                if eps.len() < 4 {
                    return Err(invalid("testfn.eps", "need at least four values"));
                }
                if eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                    return Err(invalid("testfn.eps", "values must lie in (0, 1)"));
                }
                if !(t.alpha_prefactor > 0.0) {
                    return Err(invalid("testfn.alpha_prefactor", "must be positive"));
                }
            }
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
grid = 64
[h]
kind = "cosine_sum"
offset = 1.0
terms = [{ amplitude = 0.5, k = [1, 1] }]
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(
            r#"
[h]
kind = "constant"
value = 1.0
"#,
        )
        .unwrap();
        assert_eq!(c.grid, 256);
        assert_eq!(c.solver, SolverOptions::default());
        assert_eq!(c.continuation.resolved_schedule().len(), 15);
        assert_eq!(c.testfn.resolved_eps().len(), 9);
        c.validate(Mode::Solve).unwrap();
    }

    #[test]
    fn names_the_failing_field() {
        let c = RunConfig::parse("grid = 100\n[h]\nkind = \"constant\"\nvalue = 1.0\n").unwrap();
        match c.validate(Mode::Green) {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "grid"),
            other => panic!("{other:?}"),
        }
        let c = RunConfig::parse("[h]\nkind = \"constant\"\nvalue = -1.0\n").unwrap();
        assert!(matches!(c.validate(Mode::Solve), Err(CliError::Config { field, .. }) if field == "h"));
        let c = RunConfig::parse("[h]\nkind = \"constant\"\nvalue = 1.0\n[continue]\nschedule = [0.5, 1.0]\n").unwrap();
        assert!(matches!(c.validate(Mode::Continue), Err(CliError::Config { field, .. }) if field == "continue.schedule"));
        assert!(RunConfig::parse("bogus = 1\n[h]\nkind = \"constant\"\nvalue = 1.0\n").is_err());
    }

    #[test]
    fn mode_must_match() {
        let c = RunConfig::parse(&format!("mode = \"green\"\n{BASIC}")).unwrap();
        assert!(c.validate(Mode::Green).is_ok());
        assert!(c.validate(Mode::Solve).is_err());
    }

    #[test]
    fn roundtrip_through_toml() {
        let c = RunConfig::parse(BASIC).unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
    }
}

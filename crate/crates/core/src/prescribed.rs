//! Closed-form prescribed weights `h` with analytic derivatives.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Point, TorusGrid};

const TWO_PI: f64 = 2.0 * PI;

/// Relative floor below which `h` is treated as vanishing.
pub const H_FLOOR_FRACTION: f64 = 1e-3;

/// `amplitude * cos(2 pi k1 x1) * cos(2 pi k2 x2)`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineTerm {
    pub amplitude: f64,
    pub k: [i64; 2],
}

/// `cos * cos(2 pi k.x) + sin * sin(2 pi k.x)`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub k: [i64; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrescribedFunction {
    Constant {
        value: f64,
    },
    CosineSum {
        #[serde(default)]
        offset: f64,
        terms: Vec<CosineTerm>,
    },
    /// `offset + amplitude * exp(-strength * (sin^2 pi(x1-c1) + sin^2 pi(x2-c2)))`
    GaussianBumpExp {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        strength: f64,
        #[serde(default)]
        center: Point,
        #[serde(default)]
        offset: f64,
    },
    UserFourier {
        #[serde(default)]
        offset: f64,
        modes: Vec<FourierMode>,
    },
}

fn one() -> f64 {
    1.0
}

/// Value, gradient and Hessian `[hxx, hxy, hyy]` at a point.
#[derive(Clone, Copy, Debug, Default)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [f64; 3],
}

impl Jet {
    pub fn laplacian(&self) -> f64 {
        self.hess[0] + self.hess[2]
    }
}

impl PrescribedFunction {
    pub fn one() -> Self {
        Self::Constant { value: 1.0 }
    }

    /// `exp(-(sin^2 pi x1 + sin^2 pi x2))`
    pub fn bump() -> Self {
        Self::GaussianBumpExp {
            amplitude: 1.0,
            strength: 1.0,
            center: [0.0, 0.0],
            offset: 0.0,
        }
    }

    /// `1 + a cos(2 pi x1) cos(2 pi x2)`
    pub fn cosine_product(a: f64) -> Self {
        Self::CosineSum {
            offset: 1.0,
            terms: vec![CosineTerm {
                amplitude: a,
                k: [1, 1],
            }],
        }
    }

    pub fn jet(&self, x: Point) -> Jet {
        match self {
            Self::Constant { value } => Jet {
                value: *value,
                ..Jet::default()
            },
            Self::CosineSum { offset, terms } => {
                let mut j = Jet {
                    value: *offset,
                    ..Jet::default()
                };
                for t in terms {
                    let (w1, w2) = (TWO_PI * t.k[0] as f64, TWO_PI * t.k[1] as f64);
                    let (s1, c1) = (w1 * x[0]).sin_cos();
                    let (s2, c2) = (w2 * x[1]).sin_cos();
                    let a = t.amplitude;
                    j.value += a * c1 * c2;
                    j.grad[0] -= a * w1 * s1 * c2;
                    j.grad[1] -= a * w2 * c1 * s2;
                    j.hess[0] -= a * w1 * w1 * c1 * c2;
                    j.hess[1] += a * w1 * w2 * s1 * s2;
                    j.hess[2] -= a * w2 * w2 * c1 * c2;
                }
                j
            }
            Self::GaussianBumpExp {
                amplitude,
                strength,
                center,
                offset,
            } => {
                let t1 = PI * (x[0] - center[0]);
                let t2 = PI * (x[1] - center[1]);
                let s = t1.sin().powi(2) + t2.sin().powi(2);
                let s1 = PI * (2.0 * t1).sin();
                let s2 = PI * (2.0 * t2).sin();
                let s11 = 2.0 * PI * PI * (2.0 * t1).cos();
                let s22 = 2.0 * PI * PI * (2.0 * t2).cos();
                let k = *strength;
                let e = amplitude * (-k * s).exp();
                Jet {
                    value: offset + e,
                    grad: [-k * e * s1, -k * e * s2],
                    hess: [
                        e * (k * k * s1 * s1 - k * s11),
                        e * k * k * s1 * s2,
                        e * (k * k * s2 * s2 - k * s22),
                    ],
                }
            }
            Self::UserFourier { offset, modes } => {
                let mut j = Jet {
                    value: *offset,
                    ..Jet::default()
                };
                for m in modes {
                    let w = [TWO_PI * m.k[0] as f64, TWO_PI * m.k[1] as f64];
                    let (s, c) = (w[0] * x[0] + w[1] * x[1]).sin_cos();
                    let v = m.cos * c + m.sin * s;
                    let d = -m.cos * s + m.sin * c;
                    j.value += v;
                    j.grad[0] += w[0] * d;
                    j.grad[1] += w[1] * d;
                    j.hess[0] -= w[0] * w[0] * v;
                    j.hess[1] -= w[0] * w[1] * v;
                    j.hess[2] -= w[1] * w[1] * v;
                }
                j
            }
        }
    }

    pub fn value(&self, x: Point) -> f64 {
        self.jet(x).value
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        self.jet(x).grad
    }

    /// `grad ln h`; requires `h(x) > 0`.
    pub fn grad_log(&self, x: Point) -> Result<[f64; 2]> {
        let j = self.jet(x);
        if j.value <= 0.0 {
            return Err(Error::NonPositiveWeight { value: j.value });
        }
        Ok([j.grad[0] / j.value, j.grad[1] / j.value])
    }

    /// `Delta ln h`; requires `h(x) > 0`.
    pub fn laplacian_log(&self, x: Point) -> Result<f64> {
        let j = self.jet(x);
        if j.value <= 0.0 {
            return Err(Error::NonPositiveWeight { value: j.value });
        }
        let g2 = j.grad[0] * j.grad[0] + j.grad[1] * j.grad[1];
        Ok(j.laplacian() / j.value - g2 / (j.value * j.value))
    }

    /// Nodal samples; fails when `h` has no positive value on the grid.
    pub fn sample(&self, grid: &TorusGrid) -> Result<ScalarField> {
        let f = ScalarField::from_fn(grid, |x| self.value(x));
        f.check_finite("prescribed function")?;
        let max = f.max();
        if max <= 0.0 {
            return Err(Error::NoPositivity { max });
        }
        Ok(f)
    }

    pub fn floor(&self, grid: &TorusGrid) -> Result<f64> {
        Ok(H_FLOOR_FRACTION * self.sample(grid)?.max())
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::CosineSum { terms, .. } => terms.iter().all(|t| t.amplitude == 0.0 || t.k == [0, 0]),
            Self::GaussianBumpExp {
                amplitude, strength, ..
            } => *amplitude == 0.0 || *strength == 0.0,
            Self::UserFourier { modes, .. } => modes.iter().all(|m| (m.cos == 0.0 && m.sin == 0.0) || m.k == [0, 0]),
        }
    }
}

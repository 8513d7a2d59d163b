//! Serializable boundary data and right-hand sides.

use serde::{Deserialize, Serialize};

use crate::domain::DefiningFunction;
use crate::error::{Error, Result};

/// Boundary data φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundarySpec {
    Constant {
        value: f64,
    },
    ReZ1,
    AbsZ1Sq,
    /// `|Re z₁|^alpha`.
    HolderKink {
        alpha: f64,
    },
}

impl BoundarySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BoundarySpec::Constant { value } if !value.is_finite() => {
                Err(Error::Domain(format!("boundary constant {value} is not finite")))
            }
            BoundarySpec::HolderKink { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(Error::Domain(format!("kink exponent {alpha} outside (0, 1]")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        match *self {
            BoundarySpec::Constant { value } => value,
            BoundarySpec::ReZ1 => z[0],
            BoundarySpec::AbsZ1Sq => z[0] * z[0] + z[1] * z[1],
            BoundarySpec::HolderKink { alpha } => z[0].abs().powf(alpha),
        }
    }

    /// Hölder exponent of the data on the boundary (1 for smooth data).
    pub fn holder_exponent(&self) -> f64 {
        match *self {
            BoundarySpec::HolderKink { alpha } => alpha,
            _ => 1.0,
        }
    }

    pub fn as_fn(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        move |z| self.eval(z)
    }
}

/// Right-hand side f ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensitySpec {
    Constant {
        value: f64,
    },
    /// `Σ c_k |z|^{2k}`.
    RadialPoly {
        coefficients: Vec<f64>,
    },
    /// `min(|ρ|^{−m ν}, clamp)`.
    BoundarySingular {
        nu: f64,
        clamp: f64,
    },
}

impl DensitySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DensitySpec::Constant { value } if !(*value >= 0.0 && value.is_finite()) => Err(Error::Domain(format!(
                "density constant {value} must be finite and >= 0"
            ))),
            DensitySpec::RadialPoly { coefficients } if coefficients.iter().any(|c| !(*c >= 0.0)) => {
                Err(Error::Domain("radial polynomial coefficients must be >= 0".into()))
            }
            DensitySpec::BoundarySingular { nu, clamp } if !((0.0..0.5).contains(nu) && *clamp > 0.0) => Err(
                Error::Domain(format!("need 0 <= nu < 1/2 and clamp > 0, got {nu}, {clamp}")),
            ),
            _ => Ok(()),
        }
    }

    /// Value at `z`; the singular profile needs ρ and m.
    pub fn eval(&self, spec: &DefiningFunction, m: usize, z: &[f64]) -> f64 {
        match self {
            DensitySpec::BoundarySingular { .. } => self.eval_rho(spec.value(z), m),
            _ => self.eval_t(z.iter().map(|x| x * x).sum()),
        }
    }

    fn eval_t(&self, t: f64) -> f64 {
        match self {
            DensitySpec::Constant { value } => *value,
            DensitySpec::RadialPoly { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c),
            DensitySpec::BoundarySingular { .. } => unreachable!("needs the defining function"),
        }
    }

    fn eval_rho(&self, rho: f64, m: usize) -> f64 {
        match self {
            DensitySpec::BoundarySingular { nu, clamp } => {
                if *nu == 0.0 {
                    return 1.0f64.min(*clamp);
                }
                let a = rho.abs();
                if a == 0.0 {
                    *clamp
                } else {
                    a.powf(-(m as f64) * nu).min(*clamp)
                }
            }
            _ => unreachable!(),
        }
    }

    /// The density as a function of `t = |z|²` on the ball of radius `R`,
    /// where `ρ = t − R²`.
    pub fn radial(&self, m: usize, r_outer: f64) -> impl Fn(f64) -> f64 + '_ {
        move |t| match self {
            DensitySpec::BoundarySingular { .. } => self.eval_rho(t - r_outer * r_outer, m),
            _ => self.eval_t(t),
        }
    }

    /// Whether f is bounded without relying on the clamp.
    pub fn is_bounded(&self) -> bool {
        !matches!(self, DensitySpec::BoundarySingular { nu, .. } if *nu > 0.0)
    }
}

//! Experiment configuration, presets and validation.

use hessian_core::barriers::BarrierParams;
use hessian_core::data::{BoundarySpec, DensitySpec};
use hessian_core::domain::{DefiningFunction, DomainKind};
use hessian_core::regularity::ExponentInputs;
use hessian_core::solver::SolveConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Solve,
    Holder,
    Capacity,
    Stability,
    Barriers,
    Verify,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Solve => "solve",
            Experiment::Holder => "holder",
            Experiment::Capacity => "capacity",
            Experiment::Stability => "stability",
            Experiment::Barriers => "barriers",
            Experiment::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Preset {
    /// Hölder exponent for a bounded density, radial path in C³.
    McorA,
    /// Hölder exponent for the boundary-singular density `|ρ|^{−0.8}`.
    McorB,
    /// m-sh barriers for the `|Re z₁|^{1/2}` kink.
    Hr,
    /// Sublevel capacities and stability ratios for a bump family.
    #[value(name = "se_th_5")]
    SeTh5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub domain: DomainKind,
    pub h: f64,
    /// Redundant with the domain; checked for consistency when given.
    #[serde(default)]
    pub n: Option<usize>,
    pub m: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default)]
    pub nu: f64,
    pub density: DensitySpec,
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub solver: SolveConfig,
    /// Solve the radial reduction instead of the lattice problem (holder).
    #[serde(default)]
    pub radial: bool,
    #[serde(default = "default_knots")]
    pub knots: usize,
    /// Ball radii for the capacity family.
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    /// Bump amplitudes for the stability family.
    #[serde(default = "default_amplitudes")]
    pub amplitudes: Vec<f64>,
    /// Boundary points at which barriers are built and sampled.
    #[serde(default = "default_boundary_samples")]
    pub boundary_samples: usize,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

/// Integrability exponent standing in for `p = ∞` when f is bounded.
fn default_p() -> f64 {
    1e6
}

fn default_r() -> f64 {
    1.0
}

fn default_knots() -> usize {
    400
}

fn default_radii() -> Vec<f64> {
    vec![0.15, 0.2, 0.25, 0.3]
}

fn default_amplitudes() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}

fn default_boundary_samples() -> usize {
    200
}

impl ExperimentConfig {
    /// Defaults for a subcommand run without `--config` or `--preset`.
    pub fn default_for(experiment: Experiment) -> Self {
        let mut cfg = ExperimentConfig {
            experiment,
            domain: DomainKind::Ball { n: 2, radius: 1.0 },
            h: 0.125,
            n: None,
            m: 2,
            p: default_p(),
            r: default_r(),
            nu: 0.0,
            density: DensitySpec::Constant { value: 1.0 },
            boundary: BoundarySpec::Constant { value: 0.0 },
            solver: SolveConfig::new(2),
            radial: false,
            knots: default_knots(),
            radii: default_radii(),
            amplitudes: default_amplitudes(),
            boundary_samples: default_boundary_samples(),
            output: None,
            seed: 0,
        };
        match experiment {
            Experiment::Holder => cfg.radial = true,
            Experiment::Stability => cfg.p = 4.0,
            Experiment::Barriers => {
                cfg.h = 0.25;
                cfg.boundary = BoundarySpec::ReZ1;
            }
            _ => {}
        }
        cfg
    }

    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::McorA | Preset::McorB => {
                let mut cfg = Self::default_for(Experiment::Holder);
                cfg.domain = DomainKind::Ball { n: 3, radius: 1.0 };
                cfg.h = 0.2;
                cfg.p = 3.0;
                if preset == Preset::McorB {
                    cfg.nu = 0.4;
                    cfg.density = DensitySpec::BoundarySingular { nu: 0.4, clamp: 1e6 };
                }
                cfg
            }
            Preset::Hr => {
                let mut cfg = Self::default_for(Experiment::Barriers);
                cfg.boundary = BoundarySpec::HolderKink { alpha: 0.5 };
                cfg
            }
            Preset::SeTh5 => Self::default_for(Experiment::Stability),
        }
    }

    pub fn spec(&self) -> Result<DefiningFunction, String> {
        DefiningFunction::from_kind(self.domain.clone()).map_err(|e| e.to_string())
    }

    /// The solver configuration with the experiment's m.
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            m: self.m,
            ..self.solver.clone()
        }
    }

    pub fn exponent_inputs(&self) -> Result<ExponentInputs, String> {
        ExponentInputs::new(self.spec()?.n(), self.m, self.p, self.r, self.nu).map_err(|e| e.to_string())
    }

    /// Checks every precondition the dispatched experiment relies on.
    pub fn validate(&self) -> Result<(), String> {
        let spec = self.spec()?;
        if !spec.is_bounded() {
            return Err("the domain must be bounded".into());
        }
        let n = spec.n();
        if let Some(k) = self.n {
            if k != n {
                return Err(format!("n = {k} does not match the {n}-dimensional domain"));
            }
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(format!("h = {} must be positive", self.h));
        }
        self.solve_config().validate(n).map_err(|e| e.to_string())?;
        self.density.validate().map_err(|e| e.to_string())?;
        self.boundary.validate().map_err(|e| e.to_string())?;
        if let DensitySpec::BoundarySingular { nu, .. } = self.density {
            if nu != self.nu {
                return Err(format!("density nu = {nu} does not match nu = {}", self.nu));
            }
        }
        match self.experiment {
            Experiment::Solve | Experiment::Verify => {}
            Experiment::Holder => {
                self.exponent_inputs()?;
                if self.radial {
                    if !matches!(self.domain, DomainKind::Ball { .. }) {
                        return Err("the radial path needs a ball".into());
                    }
                    if !matches!(self.boundary, BoundarySpec::Constant { .. }) {
                        return Err("the radial path needs constant boundary data".into());
                    }
                    if self.knots < 3 {
                        return Err(format!("knots = {} must be at least 3", self.knots));
                    }
                }
            }
            Experiment::Capacity => {
                if self.radii.is_empty() || self.radii.iter().any(|&r| !(r > 0.0 && r < spec.inradius())) {
                    return Err(format!("radii {:?} must lie in (0, {})", self.radii, spec.inradius()));
                }
            }
            Experiment::Stability => {
                self.exponent_inputs()?;
                if self.amplitudes.len() < 2 || self.amplitudes.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                    return Err("need at least two positive amplitudes".into());
                }
            }
            Experiment::Barriers => {
                if self.boundary_samples < 2 {
                    return Err("need at least two boundary samples".into());
                }
                if self.m > n {
                    return Err(format!("m = {} exceeds n = {n}", self.m));
                }
                BarrierParams {
                    m_norm: 1.0,
                    k: 1.0,
                    alpha: self.boundary.holder_exponent() / 2.0,
                    tau: 0.0,
                    kind: hessian_core::barriers::BarrierKind::MshB,
                }
                .validate()
                .map_err(|e| e.to_string())?;
            }
        }
        Ok(())
    }
}

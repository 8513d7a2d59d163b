use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("stencil of node {node} (coordinates {coords:?}) leaves the domain mask")]
    Stencil { node: usize, coords: Vec<f64> },

    #[error("resolution h = {h} leaves no interior nodes")]
    Resolution { h: f64 },

    #[error("strong pseudoconvexity certification failed: sigma = {sigma} at {worst:?}")]
    Certification { sigma: f64, worst: Vec<f64> },

    #[error("boundary singularity: the defining function vanishes at {0:?}")]
    BoundarySingularity(Vec<f64>),

    #[error("no convergence after {sweeps} sweeps: residual {residual:e}, cone violation {cone_violation:e}")]
    Convergence {
        sweeps: usize,
        residual: f64,
        cone_violation: f64,
        history: Vec<f64>,
    },

    #[error("admissibility violation of {violation:e} at {location}")]
    Admissibility { location: String, violation: f64 },

    #[error("barrier check failed at {coords:?}: {reason}")]
    Barrier { coords: Vec<f64>, reason: String },

    #[error("fit failure: {0}")]
    Fit(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

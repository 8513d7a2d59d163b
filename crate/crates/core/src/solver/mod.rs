//! Dirichlet solver, radial reduction, Perron envelopes and the checks built
//! on comparison principles.

mod checks;
mod dirichlet;
mod radial;

pub use checks::*;
pub use dirichlet::*;
pub use radial::*;

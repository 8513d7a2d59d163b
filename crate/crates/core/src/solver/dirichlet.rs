//! Nodal Gauss–Seidel for the discrete m-Hessian equation.
//!
//! At an interior node the discrete Hessian is `H(c) = H₀ − (c/h²)·I`, where
//! `c` is the node value and `H₀` is the Hessian with the centre set to 0.
//! The eigenvalues shift rigidly, so one eigen-solve per update reduces the
//! nodal equation to a scalar problem in `s = c/h²`. Keeping λ in the closed
//! cone caps the node value at `c_max`, and the density is nonincreasing in
//! `c` below that cap.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{certify_pseudoconvexity, LatticeDomain};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::math::{hermitian_eigenvalues, HessianNormalization, ShiftedSymmetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admissibility {
    /// Nodal values are capped at the cone boundary.
    Project,
    /// Any cone violation left after convergence is an error.
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    Lexicographic,
    /// Even lattice parity first, then odd.
    RedBlack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub m: usize,
    /// Residual tolerance in density units.
    pub tol: f64,
    pub max_sweeps: usize,
    pub damping: f64,
    /// Relative tolerance of the scalar bisections.
    pub bisection_tol: f64,
    pub admissibility: Admissibility,
    pub order: SweepOrder,
    /// Right-hand side values above this are clamped and counted.
    pub f_clamp: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            m: 1,
            tol: 1e-6,
            max_sweeps: 20_000,
            damping: 1.0,
            bisection_tol: 1e-14,
            admissibility: Admissibility::Project,
            order: SweepOrder::Lexicographic,
            f_clamp: 1e6,
        }
    }
}

impl SolveConfig {
    pub fn new(m: usize) -> Self {
        SolveConfig {
            m,
            ..Default::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        HessianNormalization::new(n, self.m)?;
        if !(self.tol > 0.0) || self.max_sweeps < 1 {
            return Err(Error::Domain(format!(
                "need tol > 0 and max_sweeps >= 1, got {} and {}",
                self.tol, self.max_sweeps
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Domain(format!("damping {} outside (0, 1]", self.damping)));
        }
        if !(self.bisection_tol > 0.0) || !(self.f_clamp > 0.0) {
            return Err(Error::Domain("bisection_tol and f_clamp must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub residual: f64,
    pub max_cone_violation: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub u: GridFunction,
    pub history: Vec<SweepRecord>,
    /// Interior nodes where f was clamped.
    pub clamped_nodes: usize,
    /// Constant A of the initial subsolution `A·ρ + φ̂`.
    pub init_constant: f64,
    pub initial: GridFunction,
}

/// Writes `sweep,residual,max_cone_violation`.
pub fn write_residual_csv<W: Write>(mut w: W, history: &[SweepRecord]) -> Result<()> {
    writeln!(w, "sweep,residual,max_cone_violation")?;
    for r in history {
        writeln!(w, "{},{:e},{:e}", r.sweep, r.residual, r.max_cone_violation)?;
    }
    Ok(())
}

/// Per-node outcome of the scalar problem.
struct NodalSolve {
    /// Node value solving the density equation on the admissible branch.
    target: f64,
    /// Largest admissible node value.
    cap: f64,
    /// Density at the current value.
    density: f64,
}

pub(crate) struct Sweeper<'a> {
    dom: &'a LatticeDomain,
    norm: HessianNormalization,
    cfg: &'a SolveConfig,
    order: Vec<usize>,
    /// `φ(ξ)` for each boundary link.
    link_values: Vec<f64>,
}

impl<'a> Sweeper<'a> {
    pub(crate) fn new(dom: &'a LatticeDomain, phi: &dyn Fn(&[f64]) -> f64, cfg: &'a SolveConfig) -> Result<Self> {
        cfg.validate(dom.n())?;
        let norm = HessianNormalization::new(dom.n(), cfg.m)?;
        let mut order = dom.interior().to_vec();
        if cfg.order == SweepOrder::RedBlack {
            let parity = |i: usize| dom.multi_index(i).iter().sum::<i64>().rem_euclid(2);
            order.sort_by_key(|&i| (parity(i), i));
        }
        let link_values = dom.links().iter().map(|l| phi(&l.xi)).collect();
        Ok(Sweeper {
            dom,
            norm,
            cfg,
            order,
            link_values,
        })
    }

    fn nodal(&self, u: &[f64], i: usize, f: f64) -> NodalSolve {
        let h2 = self.dom.h() * self.dom.h();
        let h0 = self.dom.hessian_at(u, i, Some(0.0));
        let mu = hermitian_eigenvalues(&h0);
        let sh = ShiftedSymmetric::new(mu.values());
        let s_max = sh.cone_boundary_shift(self.norm.m, self.cfg.bisection_tol);
        let s = sh.solve_density(&self.norm, f, s_max, self.cfg.bisection_tol);
        NodalSolve {
            target: s * h2,
            cap: s_max * h2,
            density: self.norm.c_nm * sh.sigma(self.norm.m, u[i] / h2),
        }
    }

    pub(crate) fn apply_boundary(&self, u: &mut [f64]) {
        for (l, &p) in self.dom.links().iter().zip(&self.link_values) {
            u[l.node] = l.node_value(p, u);
        }
    }

    /// One sweep. `obstacle` caps node values from above. Returns the
    /// pre-update residual, the cone violation and the largest update, the
    /// last two in eigenvalue units.
    pub(crate) fn sweep(&self, u: &mut [f64], f: &[f64], obstacle: Option<&[f64]>) -> (f64, f64, f64) {
        self.apply_boundary(u);
        let h2 = self.dom.h() * self.dom.h();
        let mut residual: f64 = 0.0;
        let mut violation: f64 = 0.0;
        let mut change: f64 = 0.0;
        for &i in &self.order {
            let ns = self.nodal(u, i, f[i]);
            let old = u[i];
            let over = ((old - ns.cap) / h2).max(0.0);
            let mut r = if over > 0.0 { 0.0 } else { (ns.density - f[i]).abs() };
            let mut new = old + self.cfg.damping * (ns.target - old);
            if let Some(ob) = obstacle {
                // obstacle problem: the largest admissible value below the obstacle
                new = ns.cap.min(ob[i]);
                r = (new - old).abs() / h2;
            }
            if self.cfg.admissibility == Admissibility::Project && obstacle.is_none() {
                new = new.min(ns.cap);
            }
            u[i] = new;
            residual = residual.max(r);
            violation = violation.max(over);
            change = change.max((new - old).abs() / h2);
        }
        (residual, violation, change)
    }

    /// Exact residual and cone violation of the current state.
    pub(crate) fn measure(&self, u: &[f64], f: &[f64]) -> (f64, f64) {
        let h2 = self.dom.h() * self.dom.h();
        let mut residual: f64 = 0.0;
        let mut violation: f64 = 0.0;
        for &i in &self.order {
            let ns = self.nodal(u, i, f[i]);
            residual = residual.max((ns.density - f[i]).abs());
            violation = violation.max(((u[i] - ns.cap) / h2).max(0.0));
        }
        (residual, violation)
    }

    /// Caps every node at its cone boundary.
    fn project(&self, u: &mut [f64]) {
        for &i in &self.order {
            let ns = self.nodal(u, i, 0.0);
            u[i] = u[i].min(ns.cap);
        }
    }
}

/// Spectral bound of the discrete complex Hessian of `phi` over interior nodes.
fn hessian_bound(dom: &LatticeDomain, phi_hat: &GridFunction) -> f64 {
    dom.interior()
        .iter()
        .map(|&i| {
            let ev = hermitian_eigenvalues(&dom.hessian_at(phi_hat.values(), i, None));
            ev.values().iter().fold(0.0f64, |a, v| a.max(v.abs()))
        })
        .fold(0.0, f64::max)
}

/// Clamps f on interior nodes, rejecting negative or non-finite values.
fn prepare_rhs(dom: &LatticeDomain, f: &GridFunction, clamp: f64) -> Result<(Vec<f64>, usize)> {
    let mut out = vec![0.0; dom.len()];
    let mut clamped = 0;
    for &i in dom.interior() {
        let v = f.get(i);
        if v.is_nan() || v < 0.0 {
            return Err(Error::Domain(format!(
                "right-hand side {v} at node {i} ({:?}) must be nonnegative",
                dom.coords(i)
            )));
        }
        if v > clamp {
            clamped += 1;
            out[i] = clamp;
        } else {
            out[i] = v;
        }
    }
    Ok((out, clamped))
}

pub fn dirichlet_solve(
    dom: &Arc<LatticeDomain>,
    f: &GridFunction,
    phi: &dyn Fn(&[f64]) -> f64,
    cfg: &SolveConfig,
) -> Result<GridFunction> {
    dirichlet_solve_detailed(dom, f, phi, cfg).map(|o| o.u)
}

/// Solves `c_nm σ_m(λ(Hess u)) = f` with `u = φ` on ∂Ω, starting from the
/// subsolution `A·ρ + φ̂` where φ̂ is `phi` sampled on the lattice.
pub fn dirichlet_solve_detailed(
    dom: &Arc<LatticeDomain>,
    f: &GridFunction,
    phi: &dyn Fn(&[f64]) -> f64,
    cfg: &SolveConfig,
) -> Result<SolveOutcome> {
    if !Arc::ptr_eq(f.lattice(), dom) && !f.lattice().same_geometry(dom) {
        return Err(Error::Domain("right-hand side lives on a different lattice".into()));
    }
    let sweeper = Sweeper::new(dom, phi, cfg)?;
    let cert = certify_pseudoconvexity(dom.spec(), cfg.m, 256)?;
    let (rhs, clamped_nodes) = prepare_rhs(dom, f, cfg.f_clamp)?;
    let max_f = rhs.iter().cloned().fold(0.0, f64::max);

    let phi_hat = GridFunction::from_fn(dom, phi);
    let a = (max_f / cert.sigma).powf(1.0 / cfg.m as f64).max(1.0) * (1.0 + hessian_bound(dom, &phi_hat));
    let mut u = phi_hat.clone();
    for &i in dom.masked() {
        u.values_mut()[i] += a * dom.rho(i);
    }
    sweeper.apply_boundary(u.values_mut());
    let initial = u.clone();

    let mut history = Vec::new();
    let values = u.values_mut();
    for sweep in 1..=cfg.max_sweeps {
        let (residual, violation, change) = sweeper.sweep(values, &rhs, None);
        history.push(SweepRecord {
            sweep,
            residual,
            max_cone_violation: violation,
        });
        if residual <= cfg.tol && violation <= cfg.tol && change <= cfg.tol {
            sweeper.apply_boundary(values);
            let (r, v) = sweeper.measure(values, &rhs);
            if r <= cfg.tol && v <= cfg.tol {
                return Ok(SolveOutcome {
                    u,
                    history,
                    clamped_nodes,
                    init_constant: a,
                    initial,
                });
            }
            if v > cfg.tol {
                match cfg.admissibility {
                    Admissibility::Project => sweeper.project(values),
                    Admissibility::Reject => {
                        return Err(Error::Admissibility {
                            location: format!("after sweep {sweep}"),
                            violation: v,
                        })
                    }
                }
            }
        }
    }
    let last = history.last().copied().unwrap();
    Err(Error::Convergence {
        sweeps: cfg.max_sweeps,
        residual: last.residual,
        cone_violation: last.max_cone_violation,
        history: history.iter().map(|r| r.residual).collect(),
    })
}

/// The envelope of m-sh functions below φ, i.e. the solution with f ≡ 0.
pub fn perron_envelope(
    dom: &Arc<LatticeDomain>,
    phi: &dyn Fn(&[f64]) -> f64,
    cfg: &SolveConfig,
) -> Result<GridFunction> {
    dirichlet_solve(dom, &GridFunction::zeros(dom), phi, cfg)
}

/// Gauss–Seidel for the largest discrete m-sh v below `obstacle` with
/// boundary data `phi`, starting from `init` (which must lie below).
pub(crate) fn obstacle_solve(
    dom: &Arc<LatticeDomain>,
    obstacle: &GridFunction,
    phi: &dyn Fn(&[f64]) -> f64,
    init: &GridFunction,
    cfg: &SolveConfig,
) -> Result<(GridFunction, Vec<SweepRecord>)> {
    let sweeper = Sweeper::new(dom, phi, cfg)?;
    let zero = vec![0.0; dom.len()];
    let mut u = init.clone();
    let mut history = Vec::new();
    for sweep in 1..=cfg.max_sweeps {
        let (change, violation, _) = sweeper.sweep(u.values_mut(), &zero, Some(obstacle.values()));
        history.push(SweepRecord {
            sweep,
            residual: change,
            max_cone_violation: violation,
        });
        if change <= cfg.tol && violation <= cfg.tol {
            sweeper.apply_boundary(u.values_mut());
            return Ok((u, history));
        }
    }
    let last = history.last().copied().unwrap();
    Err(Error::Convergence {
        sweeps: cfg.max_sweeps,
        residual: last.residual,
        cone_violation: last.max_cone_violation,
        history: history.iter().map(|r| r.residual).collect(),
    })
}

//! m-capacity through relative extremal functions, the volume–capacity
//! inequality, sublevel-set estimates, the iteration bound `s_∞` and the
//! stability ratio.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::domain::{LatticeDomain, NodeClass};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::math::{hermitian_eigenvalues, HessianNormalization, C64};
use crate::regularity::{fit_power_law, gamma_r, ExponentInputs};
use crate::solver::{ball_volume, boundary_traces, obstacle_solve, radial_capacity, SolveConfig};

/// A set of lattice nodes at distance greater than 2h from the boundary.
#[derive(Debug, Clone)]
pub struct CompactSet {
    lattice: Arc<LatticeDomain>,
    members: Vec<bool>,
}

impl CompactSet {
    pub fn empty(dom: &Arc<LatticeDomain>) -> Self {
        CompactSet {
            lattice: Arc::clone(dom),
            members: vec![false; dom.len()],
        }
    }

    /// The set of listed nodes; each must be strictly interior.
    pub fn from_nodes(dom: &Arc<LatticeDomain>, nodes: &[usize]) -> Result<Self> {
        let mut set = Self::empty(dom);
        let margin = 2.0 * dom.h();
        for &i in nodes {
            if i >= dom.len() || !dom.is_masked(i) || dom.distance(i) <= margin {
                return Err(Error::Domain(format!(
                    "node {i} is not at distance > 2h from the boundary"
                )));
            }
            set.members[i] = true;
        }
        Ok(set)
    }

    /// Lattice nodes of the closed ball `B̄(center, r)`.
    pub fn ball(dom: &Arc<LatticeDomain>, center: &[f64], r: f64) -> Result<Self> {
        if center.len() != 2 * dom.n() || !(r >= 0.0) {
            return Err(Error::Domain(format!(
                "bad ball: centre of length {}, r = {r}",
                center.len()
            )));
        }
        let nodes: Vec<usize> = dom
            .masked()
            .iter()
            .copied()
            .filter(|&i| {
                let z = dom.coords(i);
                z.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= r * r * (1.0 + 1e-12)
            })
            .collect();
        if nodes.is_empty() {
            return Err(Error::Domain(format!("ball of radius {r} contains no lattice node")));
        }
        Self::from_nodes(dom, &nodes)
    }

    pub fn lattice(&self) -> &Arc<LatticeDomain> {
        &self.lattice
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members[i]
    }

    pub fn nodes(&self) -> Vec<usize> {
        (0..self.members.len()).filter(|&i| self.members[i]).collect()
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_subset_of(&self, other: &CompactSet) -> bool {
        self.members.iter().zip(&other.members).all(|(&a, &b)| !a || b)
    }

    /// Node count times the cell volume.
    pub fn volume(&self) -> f64 {
        self.len() as f64 * self.lattice.cell_volume()
    }

    /// E together with the nodes of the cells touching it (sup-distance one).
    fn with_collar(&self) -> Vec<usize> {
        let dom = &self.lattice;
        let mut mark = self.members.clone();
        let d = 2 * dom.n();
        for i in self.nodes() {
            let base = dom.multi_index(i);
            for code in 0..3usize.pow(d as u32) {
                let mut k = base.clone();
                let mut c = code;
                for x in k.iter_mut() {
                    *x += (c % 3) as i64 - 1;
                    c /= 3;
                }
                if let Some(j) = dom.index_of(&k) {
                    mark[j] = true;
                }
            }
        }
        (0..mark.len()).filter(|&i| mark[i]).collect()
    }
}

/// Largest discrete m-sh v with `v ≤ 0`, `v ≤ −1` on E and boundary value 0.
pub fn relative_extremal(dom: &Arc<LatticeDomain>, e: &CompactSet, cfg: &SolveConfig) -> Result<GridFunction> {
    if !Arc::ptr_eq(e.lattice(), dom) && !e.lattice().same_geometry(dom) {
        return Err(Error::Domain("compact set lives on a different lattice".into()));
    }
    if e.is_empty() {
        return Ok(GridFunction::zeros(dom));
    }
    let mut obstacle = GridFunction::zeros(dom);
    for i in e.nodes() {
        obstacle.set(i, -1.0);
    }
    let init = GridFunction::constant(dom, -1.0);
    let (v, _) = obstacle_solve(dom, &obstacle, &|_| 0.0, &init, cfg)?;
    // caps from the bisection can sit a rounding error below −1 on E
    Ok(v.map(|x| x.max(-1.0)))
}

#[derive(Debug, Clone)]
pub struct CapacityEstimate {
    pub value: f64,
    pub extremal: GridFunction,
    /// Best E-mass among smooth admissible competitors.
    pub lower_bound: f64,
    /// Nodal Hessian mass of the extremal on E and a one-cell collar. It
    /// concentrates on the kink along ∂E and is not consistent for m ≥ 2.
    pub kink_mass: f64,
}

/// Level of the extremal above which the energy form is integrated.
const ENERGY_LEVEL: f64 = -0.5;

/// `Σ c_nm σ_m(λ(Hess v)) h^{2n}` over the interior nodes of `nodes`.
fn measure_on(v: &GridFunction, nodes: &[usize], norm: &HessianNormalization) -> f64 {
    let dom = v.lattice();
    nodes
        .iter()
        .filter(|&&i| dom.class(i) == NodeClass::Interior)
        .map(|&i| norm.density(hermitian_eigenvalues(&dom.hessian_at(v.values(), i, None)).values()))
        .sum::<f64>()
        * dom.cell_volume()
}

/// `(c_nm/m)·⟨∂v, T_{m−1}(A) ∂v⟩` at an interior node, `A` the discrete
/// complex Hessian and `T_{m−1} = ∂σ_m/∂A`. σ_m is affine along rank-one
/// updates, so the form is a single difference quotient.
fn energy_density(v: &GridFunction, i: usize, norm: &HessianNormalization) -> f64 {
    let dom = v.lattice();
    let vals = v.values();
    let a = dom.hessian_at(vals, i, None);
    let h2 = 2.0 * dom.h();
    let g: Vec<C64> = (0..dom.n())
        .map(|j| {
            let d = |ax: usize| (vals[i + dom.strides()[ax]] - vals[i - dom.strides()[ax]]) / h2;
            C64::new(0.5 * d(2 * j), -0.5 * d(2 * j + 1))
        })
        .collect();
    let gg: f64 = g.iter().map(|c| c.norm_sqr()).sum();
    if gg == 0.0 {
        return 0.0;
    }
    let s = (1.0 + a.norm()) / gg;
    let base = norm.density(hermitian_eigenvalues(&a).values());
    let bumped = norm.density(hermitian_eigenvalues(&a.add_rank_one(&g, s)).values());
    (bumped - base) / (s * norm.m as f64)
}

/// `∫_{Ω∖E} (c_nm/m)⟨∂v, T_{m−1}(Hess v) ∂v⟩ dV`; boundary-adjacent nodes
/// take the value of their inner link node.
fn energy_mass(v: &GridFunction, e: &CompactSet, norm: &HessianNormalization, level: f64) -> f64 {
    let dom = v.lattice();
    let mut dens = vec![0.0; dom.len()];
    for &i in dom.interior() {
        if !e.contains(i) && v.get(i) > level {
            dens[i] = energy_density(v, i, norm);
        }
    }
    let mut total: f64 = dens.iter().sum();
    for l in dom.links() {
        if let Some(j) = l.inner.filter(|&j| dom.class(j) == NodeClass::Interior) {
            total += dens[j];
        }
    }
    total * dom.cell_volume()
}

/// `cap_m(E, Ω)` from the relative extremal v. The Hessian measure of v
/// sits on E and has total mass `∫_{v>s} (c_nm/m)⟨∂v, T_{m−1}∂v⟩ / |s|` for
/// every level `s ∈ (−1, 0)`, which stays clear of the kink on ∂E. The
/// lower bound is the E-mass of truncated quadratics `max(−1, a(|z−c|²−D²)/D²)`
/// that are smooth on E.
pub fn capacity_m(dom: &Arc<LatticeDomain>, e: &CompactSet, cfg: &SolveConfig) -> Result<CapacityEstimate> {
    let v = relative_extremal(dom, e, cfg)?;
    if e.is_empty() {
        return Ok(CapacityEstimate {
            value: 0.0,
            extremal: v,
            lower_bound: 0.0,
            kink_mass: 0.0,
        });
    }
    let norm = HessianNormalization::new(dom.n(), cfg.m)?;
    let value = energy_mass(&v, e, &norm, ENERGY_LEVEL) / ENERGY_LEVEL.abs();
    if !(value > 0.0) {
        return Err(Error::Numerical(format!("capacity {value} of a nonempty set")));
    }
    let kink_mass = measure_on(&v, &e.with_collar(), &norm);
    Ok(CapacityEstimate {
        value,
        extremal: v,
        lower_bound: quadratic_lower_bound(dom, e, cfg.m),
        kink_mass,
    })
}

fn quadratic_lower_bound(dom: &LatticeDomain, e: &CompactSet, m: usize) -> f64 {
    let nodes = e.nodes();
    let d = 2 * dom.n();
    let mut c = vec![0.0; d];
    for &i in &nodes {
        for (a, x) in c.iter_mut().zip(dom.coords(i)) {
            *a += x / nodes.len() as f64;
        }
    }
    let dist2 = |z: &[f64]| z.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let far = dom
        .masked()
        .iter()
        .map(|&i| dist2(&dom.coords(i)))
        .chain(dom.links().iter().map(|l| dist2(&l.xi)))
        .fold(0.0, f64::max);
    let near = nodes.iter().map(|&i| dist2(&dom.coords(i))).fold(0.0, f64::max);
    // w = a(|z−c|² − D²)/D² has density (a/D²)^m and stays above −1 on E for
    // a ≤ D²/(D² − r_E²)
    nodes.len() as f64 * dom.cell_volume() / (far - near).powi(m as i32)
}

/// `τ = 0.9·n/(n−m)`, or `0.9·n` when `m = n` where every finite τ is allowed.
pub fn default_tau(n: usize, m: usize) -> f64 {
    if m == n {
        0.9 * n as f64
    } else {
        0.9 * n as f64 / (n - m) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeCapacityReport {
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
    pub capacities: Vec<f64>,
    pub tau: f64,
    /// Slope of log V against log cap; `None` for fewer than three radii.
    pub tau_fit: Option<f64>,
    pub ratios: Vec<f64>,
    /// `max/min` of the ratios is at most 10.
    pub bounded: bool,
}

impl VolumeCapacityReport {
    fn assemble(radii: &[f64], volumes: Vec<f64>, capacities: Vec<f64>, tau: f64) -> Result<Self> {
        if let Some(k) = capacities.iter().position(|&c| !(c > 0.0)) {
            return Err(Error::Numerical(format!("zero capacity at r = {}", radii[k])));
        }
        let ratios: Vec<f64> = volumes.iter().zip(&capacities).map(|(v, c)| v / c.powf(tau)).collect();
        let tau_fit = if radii.len() >= 3 {
            Some(fit_power_law(&capacities, &volumes)?.exponent)
        } else {
            None
        };
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(VolumeCapacityReport {
            radii: radii.to_vec(),
            volumes,
            capacities,
            tau,
            tau_fit,
            bounded: hi <= 10.0 * lo,
            ratios,
        })
    }

    /// CSV `r,volume,capacity`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,volume,capacity")?;
        for k in 0..self.radii.len() {
            writeln!(w, "{},{:e},{:e}", self.radii[k], self.volumes[k], self.capacities[k])?;
        }
        Ok(())
    }
}

/// Volumes and capacities of centred balls `B̄_r` on the lattice.
pub fn volume_capacity_check(
    dom: &Arc<LatticeDomain>,
    radii: &[f64],
    cfg: &SolveConfig,
) -> Result<VolumeCapacityReport> {
    if radii.is_empty() {
        return Err(Error::Domain("no radii".into()));
    }
    let centre = vec![0.0; 2 * dom.n()];
    let mut volumes = Vec::new();
    let mut caps = Vec::new();
    for &r in radii {
        let e = CompactSet::ball(dom, &centre, r)?;
        volumes.push(e.volume());
        caps.push(capacity_m(dom, &e, cfg)?.value);
    }
    VolumeCapacityReport::assemble(radii, volumes, caps, default_tau(dom.n(), cfg.m))
}

/// The same check for centred balls in `B_R` with the closed-form radial
/// capacities.
pub fn volume_capacity_radial(n: usize, m: usize, r_outer: f64, radii: &[f64]) -> Result<VolumeCapacityReport> {
    HessianNormalization::new(n, m)?;
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0 && r < r_outer)) {
        return Err(Error::Domain(format!("radii must lie in (0, {r_outer})")));
    }
    let volumes = radii.iter().map(|&r| ball_volume(n, r)).collect();
    let caps = radii.iter().map(|&r| radial_capacity(n, m, r, r_outer)).collect();
    VolumeCapacityReport::assemble(radii, volumes, caps, default_tau(n, m))
}

fn check_boundary_order(phi: &GridFunction, psi: &GridFunction) -> Result<()> {
    phi.check_same_lattice(psi)?;
    let dom = phi.lattice();
    let scale = dom
        .masked()
        .iter()
        .map(|&i| phi.get(i).abs().max(psi.get(i).abs()))
        .fold(1.0, f64::max);
    let tol = 1e-8 * scale;
    for (k, (a, b)) in boundary_traces(phi).iter().zip(boundary_traces(psi)).enumerate() {
        if a - b < -tol {
            return Err(Error::Domain(format!(
                "phi - psi = {} < 0 on the boundary at {:?}",
                a - b,
                dom.links()[k].xi
            )));
        }
    }
    Ok(())
}

/// Strictly interior nodes where `φ − ψ < level`.
fn sublevel(phi: &GridFunction, psi: &GridFunction, level: f64) -> Result<CompactSet> {
    let dom = phi.lattice();
    let margin = 2.0 * dom.h();
    let nodes: Vec<usize> = dom
        .masked()
        .iter()
        .copied()
        .filter(|&i| dom.distance(i) > margin && phi.get(i) - psi.get(i) < level)
        .collect();
    CompactSet::from_nodes(dom, &nodes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SublevelReport {
    pub s: f64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl SublevelReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + slack)
    }
}

/// `t^m cap_m({φ−ψ < −s−t})` against `Σ_{φ−ψ < −s} f h^{2n}`; the capacity
/// set is restricted to nodes at distance > 2h from the boundary.
pub fn sublevel_capacity_check(
    phi: &GridFunction,
    psi: &GridFunction,
    f: &GridFunction,
    s: f64,
    t: f64,
    cfg: &SolveConfig,
) -> Result<SublevelReport> {
    check_boundary_order(phi, psi)?;
    phi.check_same_lattice(f)?;
    if !(s >= 0.0 && t > 0.0) {
        return Err(Error::Domain(format!("need s >= 0 and t > 0, got {s}, {t}")));
    }
    let dom = phi.lattice();
    let e = sublevel(phi, psi, -s - t)?;
    let lhs = t.powi(cfg.m as i32) * capacity_m(dom, &e, cfg)?.value;
    let rhs = dom
        .interior()
        .iter()
        .filter(|&&i| phi.get(i) - psi.get(i) < -s)
        .map(|&i| f.get(i))
        .sum::<f64>()
        * dom.cell_volume();
    Ok(SublevelReport { s, t, lhs, rhs })
}

/// `g(s) = cap_m({φ−ψ < −ε−s})^{1/m}` on the given s values.
pub fn capacity_ladder(
    phi: &GridFunction,
    psi: &GridFunction,
    eps: f64,
    s_values: &[f64],
    cfg: &SolveConfig,
) -> Result<Vec<f64>> {
    check_boundary_order(phi, psi)?;
    s_values
        .iter()
        .map(|&s| {
            let e = sublevel(phi, psi, -eps - s)?;
            Ok(capacity_m(phi.lattice(), &e, cfg)?.value.powf(1.0 / cfg.m as f64))
        })
        .collect()
}

/// `s_∞ = 2B g(0)^α / (1 − 2^{−α})`.
pub fn s_infinity(b: f64, g0: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must be positive")));
    }
    if !(b >= 0.0 && g0 >= 0.0) {
        return Err(Error::Domain(format!("need B >= 0 and g(0) >= 0, got {b}, {g0}")));
    }
    if b == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * b * g0.powf(alpha) / (1.0 - (-alpha).exp2()))
}

/// Smallest B with `t g(s+t) ≤ B g(s)^{1+α}` on all sample pairs; infinite
/// when some `g(s) = 0` is followed by a positive value.
pub fn hypothesis_constant(s: &[f64], g: &[f64], alpha: f64) -> f64 {
    let mut b: f64 = 0.0;
    for i in 0..s.len() {
        for j in (i + 1)..s.len() {
            let lhs = (s[j] - s[i]) * g[j];
            if lhs <= 0.0 {
                continue;
            }
            let rhs = g[i].powf(1.0 + alpha);
            b = b.max(if rhs > 0.0 { lhs / rhs } else { f64::INFINITY });
        }
    }
    b
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationBoundReport {
    pub s_infinity: f64,
    /// Largest sample of g at or beyond `s_∞`, 0 when none is sampled.
    pub max_beyond: f64,
    pub samples_beyond: usize,
    pub vanishes: bool,
}

/// Verifies the hypothesis on the samples and that g vanishes (≤ 1e-9)
/// from `s_∞(B, g(0), α)` on.
pub fn iteration_bound_check(s: &[f64], g: &[f64], b: f64, alpha: f64) -> Result<IterationBoundReport> {
    if s.len() != g.len() || s.is_empty() {
        return Err(Error::Domain("need matching nonempty s and g samples".into()));
    }
    if s.windows(2).any(|w| w[1] <= w[0]) || g.windows(2).any(|w| w[1] > w[0]) || g.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::Domain(
            "s must increase and g must be nonnegative and nonincreasing".into(),
        ));
    }
    let needed = hypothesis_constant(s, g, alpha);
    if needed > b * (1.0 + 1e-12) {
        return Err(Error::Hypothesis(format!(
            "t g(s+t) <= B g(s)^(1+alpha) needs B >= {needed}, got {b}"
        )));
    }
    let s_inf = s_infinity(b, g[0], alpha)?;
    let beyond: Vec<f64> = s.iter().zip(g).filter(|(&x, _)| x >= s_inf).map(|(_, &y)| y).collect();
    let max_beyond = beyond.iter().cloned().fold(0.0, f64::max);
    Ok(IterationBoundReport {
        s_infinity: s_inf,
        max_beyond,
        samples_beyond: beyond.len(),
        vanishes: max_beyond <= 1e-9,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub sup_diff: f64,
    pub norm_r: f64,
    pub gamma: f64,
    pub ratio: f64,
}

/// `sup(ψ−φ) / ‖(ψ−φ)₊‖_{L^r}^γ` with `γ = safety·γ_r(inputs)`.
pub fn stability_ratio(
    phi: &GridFunction,
    psi: &GridFunction,
    inputs: &ExponentInputs,
    safety: f64,
) -> Result<StabilityReport> {
    if !(safety > 0.0 && safety < 1.0) {
        return Err(Error::Domain(format!("safety {safety} outside (0, 1)")));
    }
    check_boundary_order(phi, psi)?;
    let dom = phi.lattice();
    let gamma = safety * gamma_r(inputs)?;
    let sup_diff = dom
        .masked()
        .iter()
        .map(|&i| psi.get(i) - phi.get(i))
        .fold(f64::NEG_INFINITY, f64::max);
    let norm_r = (dom
        .masked()
        .iter()
        .map(|&i| (psi.get(i) - phi.get(i)).max(0.0).powf(inputs.r))
        .sum::<f64>()
        * dom.cell_volume())
    .powf(1.0 / inputs.r);
    let ratio = if sup_diff <= 0.0 {
        0.0
    } else if norm_r == 0.0 {
        return Err(Error::Numerical(format!(
            "sup(psi - phi) = {sup_diff} with vanishing L^r norm"
        )));
    } else {
        sup_diff / norm_r.powf(gamma)
    };
    Ok(StabilityReport {
        sup_diff,
        norm_r,
        gamma,
        ratio,
    })
}

/// CSV `epsilon,sup_diff,norm_r,ratio`.
pub fn write_stability_csv<W: Write>(mut w: W, rows: &[(f64, StabilityReport)]) -> Result<()> {
    writeln!(w, "epsilon,sup_diff,norm_r,ratio")?;
    for (eps, r) in rows {
        writeln!(w, "{},{:e},{:e},{:e}", eps, r.sup_diff, r.norm_r, r.ratio)?;
    }
    Ok(())
}

//! Boundary barriers: the superharmonic `a_ξ = K|ρ|^τ + M|z−ξ|^{2α} + φ(ξ)`,
//! the m-sh `b_ξ = −M(|z−ξ|² − Kρ)^α + φ(ξ)`, their envelopes over sampled
//! boundary points, and the composite minorants `Aρ_ν + h`.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{rho_nu_value, DefiningFunction, LatticeDomain};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::math::{default_cone_tolerance, hermitian_eigenvalues, in_gamma_m_closed, HermitianMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    SuperharmonicA,
    MshB,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    /// Hölder norm `sup|φ| + [φ]_{2α}` of the boundary data.
    pub m_norm: f64,
    pub k: f64,
    pub alpha: f64,
    pub tau: f64,
    pub kind: BarrierKind,
}

impl BarrierParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::Domain(format!("alpha = {} outside (0, 1/2]", self.alpha)));
        }
        if !(self.m_norm >= 0.0) || !(self.k > 0.0) {
            return Err(Error::Domain("need M >= 0 and K > 0".into()));
        }
        if self.kind == BarrierKind::SuperharmonicA
            && !(self.tau > 0.0 && self.tau < 1.0 && self.tau <= 2.0 * self.alpha)
        {
            return Err(Error::Domain(format!(
                "tau = {} must lie in (0, 1) and not exceed 2 alpha = {}",
                self.tau,
                2.0 * self.alpha
            )));
        }
        Ok(())
    }
}

/// Points of ∂Ω with the boundary data there.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl BoundarySample {
    pub fn new(spec: &DefiningFunction, points: Vec<Vec<f64>>, phi: &dyn Fn(&[f64]) -> f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("boundary sample is empty".into()));
        }
        for p in &points {
            if spec.value(p).abs() > 1e-8 {
                return Err(Error::Domain(format!(
                    "sample {p:?} is off the boundary (rho = {:e})",
                    spec.value(p)
                )));
            }
        }
        let values = points.iter().map(|p| phi(p)).collect();
        Ok(BoundarySample { points, values })
    }

    /// Crossings of lattice lines with ∂Ω, thinned to at most `max_points`
    /// by a fixed stride.
    pub fn from_lattice(dom: &LatticeDomain, phi: &dyn Fn(&[f64]) -> f64, max_points: usize) -> Result<Self> {
        let mut points = Vec::new();
        for l in dom.links() {
            let z = dom.coords(l.node);
            for (k, t) in l.axis_theta.iter().enumerate() {
                if let Some(t) = t {
                    let mut p = z.clone();
                    p[k / 2] += if k % 2 == 0 { t * dom.h() } else { -t * dom.h() };
                    points.push(p);
                }
            }
        }
        if points.is_empty() {
            points = dom.links().iter().map(|l| l.xi.clone()).collect();
        }
        let stride = points.len().div_ceil(max_points.max(1)).max(1);
        let points: Vec<Vec<f64>> = points.into_iter().step_by(stride).collect();
        Self::new(dom.spec(), points, phi)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes `xi_coords...,phi_value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.points.first().map_or(0, |p| p.len());
        let mut header: Vec<String> = (0..d).map(|a| format!("xi{a}")).collect();
        header.push("phi_value".into());
        writeln!(w, "{}", header.join(","))?;
        for (p, v) in self.points.iter().zip(&self.values) {
            let mut row: Vec<String> = p.iter().map(|x| format!("{x:e}")).collect();
            row.push(format!("{v:e}"));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// `sup|φ| + max_{i≠j} |φ_i − φ_j| / |ξ_i − ξ_j|^{2α}` over the samples.
    pub fn holder_norm(&self, two_alpha: f64) -> f64 {
        let sup = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut semi: f64 = 0.0;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                let d = dist(&self.points[i], &self.points[j]);
                if d > 0.0 {
                    semi = semi.max((self.values[i] - self.values[j]).abs() / d.powf(two_alpha));
                }
            }
        }
        sup + semi
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `a_ξ(z) = K|ρ(z)|^τ + M|z−ξ|^{2α} + φ(ξ)`.
#[derive(Debug, Clone)]
pub struct SuperharmonicBarrier {
    spec: DefiningFunction,
    params: BarrierParams,
    xi: Vec<f64>,
    phi_xi: f64,
}

impl SuperharmonicBarrier {
    pub fn value(&self, z: &[f64]) -> f64 {
        let p = &self.params;
        p.k * self.spec.value(z).abs().powf(p.tau) + p.m_norm * dist(z, &self.xi).powf(2.0 * p.alpha) + self.phi_xi
    }

    /// Largest discrete Laplacian over interior collar nodes
    /// (`dist < collar`) where `|∇ρ| > eps`.
    pub fn collar_laplacian_max(&self, dom: &LatticeDomain, collar: f64, eps: f64) -> f64 {
        collar_laplacian_max(dom, collar, eps, &|z| self.value(z))
    }
}

fn check_on_boundary(spec: &DefiningFunction, xi: &[f64]) -> Result<()> {
    if spec.value(xi).abs() > 1e-8 {
        return Err(Error::Domain(format!("{xi:?} is not on the boundary")));
    }
    Ok(())
}

pub fn superharmonic_barrier(
    spec: &DefiningFunction,
    phi: &dyn Fn(&[f64]) -> f64,
    xi: &[f64],
    params: &BarrierParams,
) -> Result<SuperharmonicBarrier> {
    params.validate()?;
    if params.kind != BarrierKind::SuperharmonicA {
        return Err(Error::Domain("superharmonic barrier needs kind superharmonic_a".into()));
    }
    check_on_boundary(spec, xi)?;
    Ok(SuperharmonicBarrier {
        spec: spec.clone(),
        params: params.clone(),
        xi: xi.to_vec(),
        phi_xi: phi(xi),
    })
}

fn collar_laplacian_max(dom: &LatticeDomain, collar: f64, eps: f64, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let h = dom.h();
    let mut worst = f64::NEG_INFINITY;
    let mut z = vec![0.0; 2 * dom.n()];
    for &i in dom.interior() {
        if dom.distance(i) >= collar {
            continue;
        }
        dom.coords_into(i, &mut z);
        let g2: f64 = dom.spec().gradient(&z).iter().map(|x| x * x).sum();
        if g2.sqrt() <= eps {
            continue;
        }
        let c = f(&z);
        let mut lap = 0.0;
        for a in 0..z.len() {
            let orig = z[a];
            z[a] = orig + h;
            lap += f(&z);
            z[a] = orig - h;
            lap += f(&z);
            z[a] = orig;
            lap -= 2.0 * c;
        }
        worst = worst.max(lap / (h * h));
    }
    worst
}

/// `b_ξ(z) = −M(|z−ξ|² − Kρ(z))^α + φ(ξ)`.
#[derive(Debug, Clone)]
pub struct MshBarrier {
    spec: DefiningFunction,
    params: BarrierParams,
    xi: Vec<f64>,
    phi_xi: f64,
    /// Rounding residue of ρ at ξ, subtracted so that `b_ξ(ξ) = φ(ξ)` exactly.
    rho_xi: f64,
}

impl MshBarrier {
    fn q(&self, z: &[f64]) -> f64 {
        let d2: f64 = z.iter().zip(&self.xi).map(|(a, b)| (a - b) * (a - b)).sum();
        d2 - self.params.k * (self.spec.value(z) - self.rho_xi)
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        -self.params.m_norm * self.q(z).max(0.0).powf(self.params.alpha) + self.phi_xi
    }

    /// Analytic complex Hessian
    /// `Mα q^{α−1} [(K Hess ρ − I) + (1−α) q^{−1} ∂q ∂q*]`, `None` at `q = 0`.
    pub fn hessian(&self, z: &[f64]) -> Option<HermitianMatrix> {
        let q = self.q(z);
        if !(q > 0.0) {
            return None;
        }
        let p = &self.params;
        let n = self.spec.n();
        let base = self
            .spec
            .complex_hessian(z)
            .scale(p.k)
            .add(&HermitianMatrix::identity(n).scale(-1.0));
        let dr = self.spec.dz(z);
        let dq: Vec<C64> = (0..n)
            .map(|j| C64::new(z[2 * j] - self.xi[2 * j], -(z[2 * j + 1] - self.xi[2 * j + 1])) - dr[j] * p.k)
            .collect();
        let inner = base.add_rank_one(&dq, (1.0 - p.alpha) / q);
        Some(inner.scale(p.m_norm * p.alpha * q.powf(p.alpha - 1.0)))
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }
}

pub fn msh_barrier(
    spec: &DefiningFunction,
    phi: &dyn Fn(&[f64]) -> f64,
    xi: &[f64],
    params: &BarrierParams,
) -> Result<MshBarrier> {
    params.validate()?;
    if params.kind != BarrierKind::MshB {
        return Err(Error::Domain("m-sh barrier needs kind msh_b".into()));
    }
    check_on_boundary(spec, xi)?;
    Ok(MshBarrier {
        spec: spec.clone(),
        params: params.clone(),
        xi: xi.to_vec(),
        phi_xi: phi(xi),
        rho_xi: spec.value(xi),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeCheck {
    pub nodes: usize,
    pub passed: usize,
    pub worst_node: Option<Vec<f64>>,
    pub worst_margin: f64,
}

/// Closed-cone test of the analytic Hessian of `b_ξ` at every interior node.
pub fn msh_cone_check(b: &MshBarrier, dom: &LatticeDomain, m: usize) -> Result<ConeCheck> {
    let mut passed = 0;
    let mut worst_margin = f64::INFINITY;
    let mut worst_node = None;
    for &i in dom.interior() {
        let z = dom.coords(i);
        let Some(hs) = b.hessian(&z) else {
            passed += 1;
            continue;
        };
        let lam = hermitian_eigenvalues(&hs);
        let e = crate::math::esym_all(lam.values());
        let scale = default_cone_tolerance(lam.values());
        let margin = (1..=m).map(|k| e[k]).fold(f64::INFINITY, f64::min);
        if in_gamma_m_closed(lam.values(), m, scale)? {
            passed += 1;
        }
        if margin < worst_margin {
            worst_margin = margin;
            worst_node = Some(z);
        }
    }
    let report = ConeCheck {
        nodes: dom.interior().len(),
        passed,
        worst_node,
        worst_margin,
    };
    if report.passed < report.nodes {
        return Err(Error::Barrier {
            coords: report.worst_node.clone().unwrap_or_default(),
            reason: format!(
                "{} of {} nodes leave the closed cone",
                report.nodes - report.passed,
                report.nodes
            ),
        });
    }
    Ok(report)
}

const K_LIMIT: f64 = (1u64 << 20) as f64;

/// Collar used by the superharmonic test: a fifth of the inradius.
fn collar_width(spec: &DefiningFunction) -> f64 {
    0.2 * spec.inradius()
}

/// Smallest `K ∈ {1, 2, 4, …}` for which the barrier of `params.kind`
/// passes its test. For `msh_b`: `λ_min(K Hess ρ − I) ≥ 1`. For
/// `superharmonic_a`: collar Laplacian `≤ 1e-6` for every sampled ξ.
pub fn choose_k(dom: &LatticeDomain, samples: &BoundarySample, params: &BarrierParams) -> Result<f64> {
    let spec = dom.spec();
    let mut k = 1.0;
    while k <= K_LIMIT {
        let trial = BarrierParams { k, ..params.clone() };
        let ok = match params.kind {
            BarrierKind::MshB => {
                let hess = spec.complex_hessian(&vec![0.0; 2 * spec.n()]);
                let lam = hermitian_eigenvalues(&hess);
                k * lam.values()[0] - 1.0 >= 1.0
            }
            BarrierKind::SuperharmonicA => {
                trial.validate()?;
                samples.points.iter().zip(&samples.values).all(|(xi, &v)| {
                    let b = SuperharmonicBarrier {
                        spec: spec.clone(),
                        params: trial.clone(),
                        xi: xi.clone(),
                        phi_xi: v,
                    };
                    b.collar_laplacian_max(dom, collar_width(spec), 1e-12) <= 1e-6
                })
            }
        };
        if ok {
            return Ok(k);
        }
        k *= 2.0;
    }
    Err(Error::Numerical(format!("barrier stiffness search exceeded {K_LIMIT}")))
}

/// Pointwise envelope of the sampled barriers.
#[derive(Debug, Clone)]
pub struct BarrierEnvelope {
    spec: DefiningFunction,
    params: BarrierParams,
    samples: BoundarySample,
    /// Extension constant `K′` of `ã_ξ = a_ξ − K′ρ` (zero for msh_b).
    pub k_ext: f64,
}

impl BarrierEnvelope {
    pub fn value(&self, z: &[f64]) -> f64 {
        let p = &self.params;
        let rho = self.spec.value(z);
        match p.kind {
            BarrierKind::MshB => {
                let r = rho.abs();
                self.samples
                    .points
                    .iter()
                    .zip(&self.samples.values)
                    .map(|(xi, v)| {
                        let d2: f64 = z.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum();
                        -p.m_norm * (d2 + p.k * r).powf(p.alpha) + v
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            BarrierKind::SuperharmonicA => {
                let base = p.k * rho.abs().powf(p.tau) - self.k_ext * rho;
                self.samples
                    .points
                    .iter()
                    .zip(&self.samples.values)
                    .map(|(xi, v)| base + p.m_norm * dist(z, xi).powf(2.0 * p.alpha) + v)
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn to_grid(&self, dom: &Arc<LatticeDomain>) -> GridFunction {
        GridFunction::from_fn(dom, |z| self.value(z))
    }
}

/// Envelope over the samples: max of `b_ξ` for msh_b, min of the extended
/// `ã_ξ = a_ξ − K′ρ` for superharmonic_a with `K′` doubled until every
/// `ã_ξ` is discretely superharmonic on the interior.
pub fn barrier_envelope(
    dom: &Arc<LatticeDomain>,
    samples: &BoundarySample,
    params: &BarrierParams,
) -> Result<(GridFunction, BarrierEnvelope)> {
    params.validate()?;
    if samples.is_empty() {
        return Err(Error::Domain("boundary sample is empty".into()));
    }
    let spec = dom.spec().clone();
    let mut k_ext = 0.0;
    if params.kind == BarrierKind::SuperharmonicA {
        let probe: Vec<usize> = (0..samples.len()).step_by(samples.len().div_ceil(32).max(1)).collect();
        let mut trial = 0.0;
        loop {
            let ok = probe.iter().all(|&s| {
                let b = SuperharmonicBarrier {
                    spec: spec.clone(),
                    params: params.clone(),
                    xi: samples.points[s].clone(),
                    phi_xi: samples.values[s],
                };
                collar_laplacian_max(dom, f64::INFINITY, -1.0, &|z| b.value(z) - trial * spec.value(z)) <= 1e-6
            });
            if ok {
                k_ext = trial;
                break;
            }
            trial = if trial == 0.0 { 1.0 } else { 2.0 * trial };
            if trial > K_LIMIT {
                return Err(Error::Numerical("extension constant search exceeded the limit".into()));
            }
        }
    }
    let env = BarrierEnvelope {
        spec,
        params: params.clone(),
        samples: samples.clone(),
        k_ext,
    };
    Ok((env.to_grid(dom), env))
}

/// `(Aρ + φ̂, φ̂ − Aρ)`.
pub fn lipschitz_envelope_bounds(phi_hat: &GridFunction, a: f64) -> (GridFunction, GridFunction) {
    let dom = phi_hat.lattice();
    let mut lower = phi_hat.clone();
    let mut upper = phi_hat.clone();
    for &i in dom.masked() {
        lower.set(i, phi_hat.get(i) + a * dom.rho(i));
        upper.set(i, phi_hat.get(i) - a * dom.rho(i));
    }
    (lower, upper)
}

/// `Aρ_ν + h` on the lattice.
pub fn composite_barrier(h_env: &GridFunction, a: f64, nu: f64) -> Result<GridFunction> {
    let dom = h_env.lattice();
    let mut out = h_env.clone();
    for &i in dom.masked() {
        let z = dom.coords(i);
        out.set(i, a * rho_nu_value(dom.spec(), nu, &z)? + h_env.get(i));
    }
    Ok(out)
}

/// Smallest A making `Aρ_ν` a subsolution for `f ≤ c|ρ|^{−mν}`:
/// `((1−ν)A)ᵐ σ ≥ c`.
pub fn composite_constant(c: f64, nu: f64, sigma: f64, m: usize) -> f64 {
    (c / sigma).powf(1.0 / m as f64) / (1.0 - nu)
}

//! Quadratic defining functions, the lattice over Ω̄ with its node classes,
//! and sampled certification of strong m-pseudoconvexity.
//!
//! Points of Cⁿ are stored as `2n` reals ordered `(x₁, y₁, …, x_n, y_n)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{esym_all, hermitian_eigenvalues, HermitianMatrix, HessianNormalization, C64};

/// Shape of a supported domain Ω = {ρ < 0}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    /// ρ = |z|² − R².
    Ball { n: usize, radius: f64 },
    /// ρ = Σ a_j |z_j|² − 1.
    Ellipsoid { a: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefiningFunction {
    kind: DomainKind,
}

impl DefiningFunction {
    pub fn ball(n: usize, radius: f64) -> Result<Self> {
        if n == 0 || !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!("invalid ball: n = {n}, R = {radius}")));
        }
        Ok(DefiningFunction {
            kind: DomainKind::Ball { n, radius },
        })
    }

    /// Ellipsoid with arbitrary finite coefficients. Coefficients `<= 0` give
    /// an unbounded sublevel set, usable for certification only.
    pub fn ellipsoid(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("invalid ellipsoid coefficients {a:?}")));
        }
        Ok(DefiningFunction {
            kind: DomainKind::Ellipsoid { a },
        })
    }

    pub fn from_kind(kind: DomainKind) -> Result<Self> {
        match kind {
            DomainKind::Ball { n, radius } => Self::ball(n, radius),
            DomainKind::Ellipsoid { a } => Self::ellipsoid(a),
        }
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        match &self.kind {
            DomainKind::Ball { n, .. } => *n,
            DomainKind::Ellipsoid { a } => a.len(),
        }
    }

    /// Coefficients `a_j` of `ρ = Σ a_j |z_j|² − c`.
    pub fn coefficients(&self) -> Vec<f64> {
        match &self.kind {
            DomainKind::Ball { n, .. } => vec![1.0; *n],
            DomainKind::Ellipsoid { a } => a.clone(),
        }
    }

    fn constant(&self) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius, .. } => radius * radius,
            DomainKind::Ellipsoid { .. } => 1.0,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.coefficients().iter().all(|&a| a > 0.0)
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        let c = self.constant();
        match &self.kind {
            DomainKind::Ball { .. } => z.iter().map(|x| x * x).sum::<f64>() - c,
            DomainKind::Ellipsoid { a } => {
                a.iter()
                    .enumerate()
                    .map(|(j, aj)| aj * (z[2 * j] * z[2 * j] + z[2 * j + 1] * z[2 * j + 1]))
                    .sum::<f64>()
                    - c
            }
        }
    }

    /// Real gradient in R^{2n}.
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let a = self.coefficients();
        z.iter().enumerate().map(|(i, x)| 2.0 * a[i / 2] * x).collect()
    }

    /// `∂ρ/∂z_j`, the vector whose outer product gives `∂ρ ∧ ∂̄ρ`.
    pub fn dz(&self, z: &[f64]) -> Vec<C64> {
        self.coefficients()
            .iter()
            .enumerate()
            .map(|(j, aj)| C64::new(aj * z[2 * j], -aj * z[2 * j + 1]))
            .collect()
    }

    /// Complex Hessian `[∂²ρ/∂z_j∂z̄_k]`; constant for the supported shapes.
    pub fn complex_hessian(&self, _z: &[f64]) -> HermitianMatrix {
        HermitianMatrix::real_diagonal(&self.coefficients())
    }

    /// Upper bound of |∇ρ| on Ω̄.
    pub fn gradient_bound(&self) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius, .. } => 2.0 * radius,
            DomainKind::Ellipsoid { a } => 2.0 * a.iter().cloned().fold(0.0, f64::max).sqrt(),
        }
    }

    /// Radius of the largest ball centred at the origin inside Ω.
    pub fn inradius(&self) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius, .. } => *radius,
            DomainKind::Ellipsoid { a } => 1.0 / a.iter().cloned().fold(0.0, f64::max).sqrt(),
        }
    }

    /// Half-width of Ω along complex coordinate `j`.
    pub fn semi_axis(&self, j: usize) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius, .. } => *radius,
            DomainKind::Ellipsoid { a } => 1.0 / a[j].sqrt(),
        }
    }

    /// Lower bound for dist(z, ∂Ω) at a point of Ω̄.
    pub fn distance_lower_bound(&self, z: &[f64]) -> f64 {
        (-self.value(z)).max(0.0) / self.gradient_bound()
    }

    /// Lebesgue volume of Ω in R^{2n}.
    pub fn volume(&self) -> f64 {
        let n = self.n();
        let unit = unit_ball_volume(2 * n);
        match &self.kind {
            DomainKind::Ball { radius, .. } => unit * radius.powi(2 * n as i32),
            DomainKind::Ellipsoid { a } => unit / a.iter().product::<f64>(),
        }
    }

    /// Point of ∂Ω on the ray from the origin through `dir`.
    pub fn boundary_point_on_ray(&self, dir: &[f64]) -> Result<Vec<f64>> {
        let q = self.value(dir) + self.constant();
        if !(q > 0.0) {
            return Err(Error::Domain(format!("ray {dir:?} does not meet the boundary")));
        }
        let s = (self.constant() / q).sqrt();
        Ok(dir.iter().map(|x| x * s).collect())
    }
}

/// Volume of the unit ball in R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_d = π^{d/2} / Γ(d/2 + 1), by the two-step recurrence V_d = 2π/d · V_{d-2}
    let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// `ρ_ν = −|ρ|^{1−ν}`.
pub fn rho_nu_value(spec: &DefiningFunction, nu: f64, z: &[f64]) -> Result<f64> {
    check_nu(nu)?;
    Ok(-spec.value(z).abs().powf(1.0 - nu))
}

/// Complex Hessian of ρ_ν:
/// `(1−ν)|ρ|^{−ν} Hess ρ + ν(1−ν)|ρ|^{−1−ν} ∂ρ ∂ρ*`.
pub fn rho_nu_hessian(spec: &DefiningFunction, nu: f64, z: &[f64]) -> Result<HermitianMatrix> {
    check_nu(nu)?;
    let r = spec.value(z);
    if r >= 0.0 {
        return Err(Error::BoundarySingularity(z.to_vec()));
    }
    let w = -r;
    let base = spec.complex_hessian(z).scale((1.0 - nu) * w.powf(-nu));
    Ok(base.add_rank_one(&spec.dz(z), nu * (1.0 - nu) * w.powf(-1.0 - nu)))
}

/// Squared real gradient of ρ_ν: `(1−ν)² |ρ|^{−2ν} |∇ρ|²`.
pub fn rho_nu_gradient_sq(spec: &DefiningFunction, nu: f64, z: &[f64]) -> Result<f64> {
    check_nu(nu)?;
    let w = spec.value(z).abs();
    if w == 0.0 && nu > 0.0 {
        return Err(Error::BoundarySingularity(z.to_vec()));
    }
    let g2: f64 = spec.gradient(z).iter().map(|x| x * x).sum();
    Ok((1.0 - nu).powi(2) * w.powf(-2.0 * nu) * g2)
}

fn check_nu(nu: f64) -> Result<()> {
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::Domain(format!("nu = {nu} must lie in [0, 1/2)")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Interior,
    BoundaryAdjacent,
    Exterior,
}

/// Dirichlet data attached to a boundary-adjacent node.
///
/// The crossing `xi` lies at fractional distance `theta` from the node and
/// the inner node one step further in. The node value interpolates φ(ξ) and
/// the inner value linearly along this line, or is φ(ξ) itself without an
/// inner node. Both weights are nonnegative, which keeps the scheme monotone;
/// a quadratic rule through a second inner node is more accurate for smooth
/// data but overshoots the boundary values next to steep profiles.
#[derive(Debug, Clone)]
pub struct BoundaryLink {
    pub node: usize,
    pub xi: Vec<f64>,
    pub theta: f64,
    pub inner: Option<usize>,
    /// Fractional distances along each signed axis `(+e₀, −e₀, +e₁, …)`;
    /// `None` where the neighbour is inside.
    pub axis_theta: Vec<Option<f64>>,
}

impl BoundaryLink {
    /// Weights of `(φ(ξ), u_inner)` at the node.
    pub fn weights(&self) -> [f64; 2] {
        let t = self.theta;
        match self.inner {
            Some(_) => [1.0 / (1.0 + t), t / (1.0 + t)],
            None => [1.0, 0.0],
        }
    }

    /// Node value for boundary value `phi` and current values `u`.
    pub fn node_value(&self, phi: f64, u: &[f64]) -> f64 {
        let w = self.weights();
        w[0] * phi + self.inner.map_or(0.0, |j| w[1] * u[j])
    }

    /// The boundary value that reproduces the node value; inverse of
    /// [`BoundaryLink::node_value`].
    pub fn trace(&self, u: &[f64]) -> f64 {
        let w = self.weights();
        (u[self.node] - self.inner.map_or(0.0, |j| w[1] * u[j])) / w[0]
    }
}

/// Symmetric lattice `k·h` over the bounding box of Ω plus a one-cell margin.
#[derive(Debug)]
pub struct LatticeDomain {
    spec: DefiningFunction,
    n: usize,
    h: f64,
    half: Vec<usize>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    rho: Vec<f64>,
    class: Vec<NodeClass>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    masked: Vec<usize>,
    links: Vec<BoundaryLink>,
    link_of: Vec<u32>,
    /// Offsets of stencil neighbours as `(axis a, sign a, axis b, sign b)`;
    /// `b == usize::MAX` for axis neighbours.
    stencil: Vec<(usize, i8, usize, i8)>,
}

/// Builds the lattice and classifies nodes. Interior nodes have ρ < 0 and
/// their whole Hessian stencil in Ω̄; boundary-adjacent nodes are the rest
/// of Ω̄ ∩ lattice.
pub fn make_domain(spec: &DefiningFunction, h: f64) -> Result<Arc<LatticeDomain>> {
    LatticeDomain::new(spec.clone(), h).map(Arc::new)
}

impl LatticeDomain {
    pub fn new(spec: DefiningFunction, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Domain(format!("spacing h = {h} must be positive")));
        }
        if !spec.is_bounded() {
            return Err(Error::Domain("lattice needs a bounded domain".into()));
        }
        let n = spec.n();
        if h > 0.5 * spec.inradius() * (1.0 + 1e-12) {
            return Err(Error::Resolution { h });
        }
        let half: Vec<usize> = (0..2 * n)
            .map(|a| (spec.semi_axis(a / 2) / h - 1e-9).ceil() as usize + 1)
            .collect();
        let dims: Vec<usize> = half.iter().map(|k| 2 * k + 1).collect();
        let mut strides = vec![1usize; 2 * n];
        for a in (0..2 * n - 1).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        let total: usize = dims.iter().product();

        let mut stencil = Vec::new();
        for a in 0..2 * n {
            stencil.push((a, 1, usize::MAX, 0));
            stencil.push((a, -1, usize::MAX, 0));
        }
        for a in 0..2 * n {
            for b in (a + 1)..2 * n {
                if a / 2 != b / 2 {
                    for sa in [1i8, -1] {
                        for sb in [1i8, -1] {
                            stencil.push((a, sa, b, sb));
                        }
                    }
                }
            }
        }

        let mut lat = LatticeDomain {
            spec,
            n,
            h,
            half,
            dims,
            strides,
            rho: Vec::with_capacity(total),
            class: vec![NodeClass::Exterior; total],
            interior: Vec::new(),
            boundary: Vec::new(),
            masked: Vec::new(),
            links: Vec::new(),
            link_of: vec![u32::MAX; total],
            stencil,
        };
        let mut z = vec![0.0; 2 * n];
        for idx in 0..total {
            lat.coords_into(idx, &mut z);
            lat.rho.push(lat.spec.value(&z));
        }
        for idx in 0..total {
            if lat.rho[idx] > 0.0 {
                continue;
            }
            let full = lat.rho[idx] < 0.0
                && (0..lat.stencil.len()).all(|s| match lat.neighbour(idx, s) {
                    Some(j) => lat.rho[j] <= 0.0,
                    None => false,
                });
            if full {
                lat.class[idx] = NodeClass::Interior;
                lat.interior.push(idx);
            } else {
                lat.class[idx] = NodeClass::BoundaryAdjacent;
                lat.boundary.push(idx);
            }
            lat.masked.push(idx);
        }
        if lat.interior.is_empty() {
            return Err(Error::Resolution { h });
        }
        let links: Vec<BoundaryLink> = lat.boundary.iter().map(|&b| lat.build_link(b)).collect();
        for (k, l) in links.iter().enumerate() {
            lat.link_of[l.node] = k as u32;
        }
        lat.links = links;
        Ok(lat)
    }

    fn build_link(&self, b: usize) -> BoundaryLink {
        let zb = self.coords(b);
        let mut axis_theta = vec![None; 4 * self.n];
        for a in 0..2 * self.n {
            for (si, s) in [1i8, -1].into_iter().enumerate() {
                if let Some(j) = self.offset(b, &[(a, s)]) {
                    if self.rho[j] > 0.0 {
                        let d = self.direction(&[(a, s)]);
                        axis_theta[2 * a + si] = Some(self.crossing(&zb, &d));
                    }
                }
            }
        }
        if self.rho[b] == 0.0 {
            return BoundaryLink {
                node: b,
                xi: zb,
                theta: 0.0,
                inner: None,
                axis_theta,
            };
        }
        // Nearest crossing over the stencil directions, preferring lines whose
        // inner nodes are interior so that links do not feed on each other.
        let mut best: Option<((bool, f64), f64, Vec<f64>, Vec<(usize, i8)>)> = None;
        for &(a, sa, bb, sb) in &self.stencil {
            let steps: Vec<(usize, i8)> = if bb == usize::MAX {
                vec![(a, sa)]
            } else {
                vec![(a, sa), (bb, sb)]
            };
            let Some(j) = self.offset(b, &steps) else { continue };
            if self.rho[j] <= 0.0 {
                continue;
            }
            let d = self.direction(&steps);
            let theta = self.crossing(&zb, &d);
            let inner_is_interior = self
                .back_node(b, &steps)
                .is_some_and(|k| self.class[k] == NodeClass::Interior);
            let key = (!inner_is_interior, theta * (steps.len() as f64).sqrt());
            if best.as_ref().map_or(true, |x| key < x.0) {
                best = Some((key, theta, d, steps));
            }
        }
        let (_, theta, d, steps) = best.expect("boundary-adjacent node has an exterior neighbour");
        let xi: Vec<f64> = zb.iter().zip(&d).map(|(z, d)| z + theta * d).collect();
        BoundaryLink {
            node: b,
            xi,
            theta,
            inner: self.back_node(b, &steps),
            axis_theta,
        }
    }

    /// The masked node one step against `steps`.
    fn back_node(&self, b: usize, steps: &[(usize, i8)]) -> Option<usize> {
        let back: Vec<(usize, i8)> = steps.iter().map(|&(a, s)| (a, -s)).collect();
        self.offset(b, &back).filter(|&k| self.class[k] != NodeClass::Exterior)
    }

    /// θ ∈ (0, 1] with ρ(z + θ·d) = 0, by bisection; ρ(z) ≤ 0 < ρ(z + d).
    fn crossing(&self, z: &[f64], d: &[f64]) -> f64 {
        let at = |t: f64| {
            let p: Vec<f64> = z.iter().zip(d).map(|(z, d)| z + t * d).collect();
            self.spec.value(&p)
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if at(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn direction(&self, steps: &[(usize, i8)]) -> Vec<f64> {
        let mut d = vec![0.0; 2 * self.n];
        for &(a, s) in steps {
            d[a] += s as f64 * self.h;
        }
        d
    }

    fn offset(&self, idx: usize, steps: &[(usize, i8)]) -> Option<usize> {
        let mut out = idx as isize;
        for &(a, s) in steps {
            let ia = (idx / self.strides[a]) % self.dims[a];
            let na = ia as isize + s as isize;
            if na < 0 || na >= self.dims[a] as isize {
                return None;
            }
            out += s as isize * self.strides[a] as isize;
        }
        Some(out as usize)
    }

    fn neighbour(&self, idx: usize, s: usize) -> Option<usize> {
        let (a, sa, b, sb) = self.stencil[s];
        if b == usize::MAX {
            self.offset(idx, &[(a, sa)])
        } else {
            self.offset(idx, &[(a, sa), (b, sb)])
        }
    }

    pub fn spec(&self) -> &DefiningFunction {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn origin(&self) -> Vec<f64> {
        self.half.iter().map(|&k| -(k as f64) * self.h).collect()
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    /// Number of grid points in the stencil of an interior node.
    pub fn stencil_size(&self) -> usize {
        self.stencil.len()
    }

    pub fn class(&self, idx: usize) -> NodeClass {
        self.class[idx]
    }

    pub fn rho(&self, idx: usize) -> f64 {
        self.rho[idx]
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Interior and boundary-adjacent nodes, ascending.
    pub fn masked(&self) -> &[usize] {
        &self.masked
    }

    pub fn links(&self) -> &[BoundaryLink] {
        &self.links
    }

    pub fn link(&self, idx: usize) -> Option<&BoundaryLink> {
        let k = self.link_of[idx];
        (k != u32::MAX).then(|| &self.links[k as usize])
    }

    pub fn is_masked(&self, idx: usize) -> bool {
        self.class[idx] != NodeClass::Exterior
    }

    pub fn coords_into(&self, idx: usize, out: &mut [f64]) {
        for a in 0..2 * self.n {
            let ia = (idx / self.strides[a]) % self.dims[a];
            out[a] = (ia as f64 - self.half[a] as f64) * self.h;
        }
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let mut z = vec![0.0; 2 * self.n];
        self.coords_into(idx, &mut z);
        z
    }

    /// Integer lattice coordinates relative to the centre node.
    pub fn multi_index(&self, idx: usize) -> Vec<i64> {
        (0..2 * self.n)
            .map(|a| ((idx / self.strides[a]) % self.dims[a]) as i64 - self.half[a] as i64)
            .collect()
    }

    /// Node with the given centred integer coordinates, if on the lattice.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for a in 0..2 * self.n {
            let ia = k[a] + self.half[a] as i64;
            if ia < 0 || ia >= self.dims[a] as i64 {
                return None;
            }
            idx += ia as usize * self.strides[a];
        }
        Some(idx)
    }

    /// Node at physical position `z` if `z` is a lattice point (to 1e-9·h).
    pub fn locate(&self, z: &[f64]) -> Option<usize> {
        let k: Vec<i64> = z.iter().map(|x| (x / self.h).round() as i64).collect();
        if z.iter()
            .zip(&k)
            .any(|(x, &k)| (x - k as f64 * self.h).abs() > 1e-9 * self.h)
        {
            return None;
        }
        self.index_of(&k)
    }

    /// Lower bound for dist(node, ∂Ω).
    pub fn distance(&self, idx: usize) -> f64 {
        (-self.rho[idx]).max(0.0) / self.spec.gradient_bound()
    }

    /// Neighbour along one signed axis.
    pub fn step(&self, idx: usize, axis: usize, sign: i8) -> Option<usize> {
        self.offset(idx, &[(axis, sign)])
    }

    pub fn step2(&self, idx: usize, a: usize, sa: i8, b: usize, sb: i8) -> Option<usize> {
        self.offset(idx, &[(a, sa), (b, sb)])
    }

    pub fn check_stencil(&self, idx: usize) -> Result<()> {
        if idx >= self.len() || self.class[idx] != NodeClass::Interior {
            return Err(Error::Stencil {
                node: idx,
                coords: if idx < self.len() { self.coords(idx) } else { Vec::new() },
            });
        }
        Ok(())
    }

    /// Discrete complex Hessian at an interior node. With `center = Some(c)`
    /// the node's own value is replaced by `c`.
    pub fn hessian_at(&self, values: &[f64], idx: usize, center: Option<f64>) -> HermitianMatrix {
        let n = self.n;
        let u0 = center.unwrap_or(values[idx]);
        let inv = 1.0 / (self.h * self.h);
        let s = &self.strides;
        let pure = |a: usize| (values[idx + s[a]] - 2.0 * u0 + values[idx - s[a]]) * inv;
        let mixed = |a: usize, b: usize| {
            (values[idx + s[a] + s[b]] - values[idx + s[a] - s[b]] - values[idx - s[a] + s[b]]
                + values[idx - s[a] - s[b]])
                * 0.25
                * inv
        };
        let mut e = vec![C64::new(0.0, 0.0); n * n];
        for j in 0..n {
            e[j * n + j] = C64::new(0.25 * (pure(2 * j) + pure(2 * j + 1)), 0.0);
            for k in (j + 1)..n {
                let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
                let re = 0.25 * (mixed(xj, xk) + mixed(yj, yk));
                let im = 0.25 * (mixed(xj, yk) - mixed(yj, xk));
                e[j * n + k] = C64::new(re, im);
                e[k * n + j] = C64::new(re, -im);
            }
        }
        HermitianMatrix::symmetrized(n, &e)
    }

    /// Discrete Laplacian in R^{2n} at an interior node.
    pub fn laplacian_at(&self, values: &[f64], idx: usize) -> f64 {
        let inv = 1.0 / (self.h * self.h);
        (0..2 * self.n)
            .map(|a| (values[idx + self.strides[a]] - 2.0 * values[idx] + values[idx - self.strides[a]]) * inv)
            .sum()
    }

    pub fn same_geometry(&self, other: &LatticeDomain) -> bool {
        self.n == other.n && self.h == other.h && self.dims == other.dims && self.spec == other.spec
    }

    /// Volume of one lattice cell, `h^{2n}`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(2 * self.n as i32)
    }
}

/// Lower bound σ of `c_nk σ_k(λ(Hess ρ))`, `k <= m`, with the worst sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoconvexityCertificate {
    pub m: usize,
    pub sigma: f64,
    pub worst_node: Vec<f64>,
}

/// Samples Hess ρ over Ω̄ and its boundary and certifies strong
/// m-pseudoconvexity. `samples` bounds the number of interior points.
pub fn certify_pseudoconvexity(
    spec: &DefiningFunction,
    m: usize,
    samples: usize,
) -> Result<PseudoconvexityCertificate> {
    let n = spec.n();
    let norms = (1..=m)
        .map(|k| HessianNormalization::new(n, k))
        .collect::<Result<Vec<_>>>()?;
    let mut points = sample_points(spec, samples.max(1));
    points.extend(sample_boundary(spec, samples.max(1)));
    let mut sigma = f64::INFINITY;
    let mut worst = vec![0.0; 2 * n];
    for z in &points {
        let lambda = hermitian_eigenvalues(&spec.complex_hessian(z));
        let e = esym_all(lambda.values());
        for (k, norm) in norms.iter().enumerate() {
            let v = norm.c_nm * e[k + 1];
            if v < sigma {
                sigma = v;
                worst = z.clone();
            }
        }
    }
    if !(sigma > 0.0) {
        return Err(Error::Certification { sigma, worst });
    }
    Ok(PseudoconvexityCertificate {
        m,
        sigma,
        worst_node: worst,
    })
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic Halton points of the bounding box lying in Ω̄.
fn sample_points(spec: &DefiningFunction, count: usize) -> Vec<Vec<f64>> {
    let d = 2 * spec.n();
    let widths: Vec<f64> = (0..d)
        .map(|a| {
            let s = spec.semi_axis(a / 2);
            if s.is_finite() && s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let mut out = vec![vec![0.0; d]];
    let mut i = 1;
    while out.len() < count && i < 64 * count {
        let z: Vec<f64> = (0..d)
            .map(|a| widths[a] * (2.0 * radical_inverse(i, PRIMES[a % PRIMES.len()]) - 1.0))
            .collect();
        if spec.value(&z) <= 0.0 {
            out.push(z);
        }
        i += 1;
    }
    out
}

/// Boundary points along deterministic quasi-random rays.
pub fn sample_boundary(spec: &DefiningFunction, count: usize) -> Vec<Vec<f64>> {
    let d = 2 * spec.n();
    let mut out = Vec::new();
    for i in 1..=count {
        let dir: Vec<f64> = (0..d)
            .map(|a| 2.0 * radical_inverse(i, PRIMES[a % PRIMES.len()]) - 1.0)
            .collect();
        if let Ok(p) = spec.boundary_point_on_ray(&dir) {
            out.push(p);
        }
    }
    out
}

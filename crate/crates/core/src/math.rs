//! Elementary symmetric functions, the Gårding cones Γ_m, Hermitian
//! eigenvalues, and the normalized m-Hessian density.
//!
//! Densities are normalized so that `|z|²` has density exactly 1 for every
//! `(n, m)`; the operator is `c_nm · σ_m(λ)` with `c_nm = m!(n-m)!/n!`.

use nalgebra::{Complex, DMatrix, Matrix3};

use crate::error::{Error, Result};
use crate::grid::GridFunction;

pub type C64 = Complex<f64>;

/// Binomial coefficient as a float; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Eigenvalues of a complex Hessian, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueVector(Vec<f64>);

impl EigenvalueVector {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| a.total_cmp(b));
        EigenvalueVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// The constant `c_nm` relating `σ_m` of the Hessian eigenvalues to the
/// density of `(dd^c u)^m ∧ β^{n-m}` against `β^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianNormalization {
    pub n: usize,
    pub m: usize,
    pub c_nm: f64,
}

impl HessianNormalization {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 || m > n {
            return Err(Error::Domain(format!(
                "Hessian order m = {m} must satisfy 1 <= m <= n = {n}"
            )));
        }
        Ok(HessianNormalization {
            n,
            m,
            c_nm: 1.0 / binomial(n, m),
        })
    }

    /// `c_nm · σ_m(λ)`.
    pub fn density(&self, lambda: &[f64]) -> f64 {
        self.c_nm * esym_all(lambda)[self.m]
    }
}

/// `σ_0, …, σ_n` of `lambda` by the usual product recurrence.
pub fn esym_all(lambda: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; lambda.len() + 1];
    e[0] = 1.0;
    for (i, &l) in lambda.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += l * e[k - 1];
        }
    }
    e
}

pub fn elementary_symmetric(lambda: &[f64], k: usize) -> Result<f64> {
    if k > lambda.len() {
        return Err(Error::Domain(format!(
            "sigma_{k} requested for a vector of length {}",
            lambda.len()
        )));
    }
    Ok(esym_all(lambda)[k])
}

fn check_order(lambda: &[f64], m: usize) -> Result<()> {
    if m == 0 || m > lambda.len() {
        return Err(Error::Domain(format!(
            "cone order m = {m} must satisfy 1 <= m <= {}",
            lambda.len()
        )));
    }
    Ok(())
}

/// Membership in the open cone Γ_m.
pub fn in_gamma_m(lambda: &[f64], m: usize) -> Result<bool> {
    check_order(lambda, m)?;
    let e = esym_all(lambda);
    Ok(e[1..=m].iter().all(|&s| s > 0.0))
}

/// Membership in the closed cone, accepting `σ_k >= -eps` for `k <= m`.
pub fn in_gamma_m_closed(lambda: &[f64], m: usize, eps: f64) -> Result<bool> {
    check_order(lambda, m)?;
    let e = esym_all(lambda);
    Ok(e[1..=m].iter().all(|&s| s >= -eps))
}

/// Default closed-cone tolerance `1e-9 (1 + |λ|_∞)`.
pub fn default_cone_tolerance(lambda: &[f64]) -> f64 {
    let sup = lambda.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    1e-9 * (1.0 + sup)
}

/// Elementary symmetric functions of `μ - s·1` as polynomials in `s`.
///
/// `σ_j(μ - s) = Σ_i C(n-i, j-i) (-s)^{j-i} σ_i(μ)`, so one eigen-solve
/// serves every shift the nodal update tries.
#[derive(Debug, Clone)]
pub struct ShiftedSymmetric {
    n: usize,
    sigma: Vec<f64>,
    mean: f64,
    min: f64,
    sup: f64,
}

impl ShiftedSymmetric {
    pub fn new(mu: &[f64]) -> Self {
        let n = mu.len();
        ShiftedSymmetric {
            n,
            sigma: esym_all(mu),
            mean: mu.iter().sum::<f64>() / n as f64,
            min: mu.iter().cloned().fold(f64::INFINITY, f64::min),
            sup: mu.iter().fold(0.0f64, |a, &b| a.max(b.abs())),
        }
    }

    pub fn sigma(&self, j: usize, s: f64) -> f64 {
        let mut acc = 0.0;
        let mut pow = 1.0;
        for i in (0..=j).rev() {
            acc += binomial(self.n - i, j - i) * pow * self.sigma[i];
            pow *= -s;
        }
        acc
    }

    fn in_open_cone(&self, m: usize, s: f64) -> bool {
        (1..=m).all(|j| self.sigma(j, s) > 0.0)
    }

    /// Largest `s` with `μ - s·1` in the closed cone Γ̄_m.
    pub fn cone_boundary_shift(&self, m: usize, rel_tol: f64) -> f64 {
        if m == 1 {
            return self.mean;
        }
        if m == self.n {
            return self.min;
        }
        let scale = 1.0 + self.sup;
        let mut lo = self.min - 1e-9 * scale;
        let mut hi = self.mean;
        let tol = rel_tol * scale;
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.in_open_cone(m, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Solves `c_nm σ_m(μ - s) = f` for `s <= s_max` by bisection.
    ///
    /// The density is nonincreasing in `s` on the admissible branch and
    /// is at least `f` at `s_max - f^{1/m}`.
    pub fn solve_density(&self, norm: &HessianNormalization, f: f64, s_max: f64, rel_tol: f64) -> f64 {
        let m = norm.m;
        if f <= 0.0 {
            return s_max;
        }
        if m == 1 {
            return self.mean - f;
        }
        if m == 2 && self.n == 2 {
            // (μ₁ − s)(μ₂ − s) = f on the branch s ≤ min μ
            let half_gap = 0.5 * (self.sigma[1] * self.sigma[1] - 4.0 * self.sigma[2]).max(0.0).sqrt();
            return 0.5 * self.sigma[1] - (half_gap * half_gap + f).sqrt();
        }
        let density = |s: f64| norm.c_nm * self.sigma(m, s);
        let mut lo = s_max - f.powf(1.0 / m as f64);
        let mut hi = s_max;
        // guard against round-off at the bracket end
        while density(lo) < f {
            lo -= (hi - lo).max(1e-12);
        }
        let tol = rel_tol * (1.0 + self.sup + f.abs().powf(1.0 / m as f64));
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if density(mid) >= f {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Dense Hermitian matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    entries: Vec<C64>,
}

impl HermitianMatrix {
    /// Builds a matrix, rejecting entries that are not conjugate-symmetric as stored.
    pub fn new(n: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Domain(format!(
                "expected {} entries for an {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        for j in 0..n {
            for k in j..n {
                if entries[j * n + k] != entries[k * n + j].conj() {
                    return Err(Error::Domain(format!(
                        "entry ({j},{k}) is not the conjugate of entry ({k},{j})"
                    )));
                }
            }
        }
        Ok(HermitianMatrix { n, entries })
    }

    /// Builds from arbitrary entries by taking the Hermitian part `(A + A*)/2`.
    pub fn symmetrized(n: usize, entries: &[C64]) -> Self {
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for j in 0..n {
            out[j * n + j] = C64::new(entries[j * n + j].re, 0.0);
            for k in (j + 1)..n {
                let v = (entries[j * n + k] + entries[k * n + j].conj()) * 0.5;
                out[j * n + k] = v;
                out[k * n + j] = v.conj();
            }
        }
        HermitianMatrix { n, entries: out }
    }

    pub fn identity(n: usize) -> Self {
        Self::real_diagonal(&vec![1.0; n])
    }

    pub fn real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut entries = vec![C64::new(0.0, 0.0); n * n];
        for (j, &v) in d.iter().enumerate() {
            entries[j * n + j] = C64::new(v, 0.0);
        }
        HermitianMatrix { n, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize, k: usize) -> C64 {
        self.entries[j * self.n + k]
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    /// `self + other` (both Hermitian, so the sum is too).
    pub fn add(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            n: self.n,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> HermitianMatrix {
        HermitianMatrix {
            n: self.n,
            entries: self.entries.iter().map(|a| a * s).collect(),
        }
    }

    /// `self + s · v v*`.
    pub fn add_rank_one(&self, v: &[C64], s: f64) -> HermitianMatrix {
        let n = self.n;
        let mut entries = self.entries.clone();
        for j in 0..n {
            for k in 0..n {
                entries[j * n + k] += v[j] * v[k].conj() * s;
            }
        }
        HermitianMatrix::symmetrized(n, &entries)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// All real eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &HermitianMatrix) -> EigenvalueVector {
    let n = h.n;
    let e = &h.entries;
    let values = match n {
        0 => Vec::new(),
        1 => vec![e[0].re],
        2 => {
            let a = e[0].re;
            let d = e[3].re;
            let mean = 0.5 * (a + d);
            let r = (0.5 * (a - d)).hypot(e[1].norm());
            vec![mean - r, mean + r]
        }
        3 => {
            let m = Matrix3::from_row_slice(e);
            m.symmetric_eigenvalues().iter().cloned().collect()
        }
        _ => {
            let m = DMatrix::from_row_slice(n, n, e);
            m.symmetric_eigenvalues().iter().cloned().collect()
        }
    };
    EigenvalueVector::new(values)
}

/// Discrete complex Hessian `[∂²u/∂z_j∂z̄_k]` of a grid function at a node.
pub fn wirtinger_hessian(u: &GridFunction, node: usize) -> Result<HermitianMatrix> {
    let lat = u.lattice();
    lat.check_stencil(node)?;
    Ok(lat.hessian_at(u.values(), node, None))
}

/// Density `c_nm σ_m(λ)` of `(dd^c u)^m ∧ β^{n-m}` at a node.
pub fn hessian_operator_value(u: &GridFunction, node: usize, m: usize) -> Result<f64> {
    let norm = HessianNormalization::new(u.lattice().n(), m)?;
    let h = wirtinger_hessian(u, node)?;
    Ok(norm.density(hermitian_eigenvalues(&h).values()))
}

/// `c_nm` times the mixed `σ_m` of several Hessians, by polarization:
/// `D(A_1..A_m) = (1/m!) Σ_S (-1)^{m-|S|} σ_m(Σ_{i∈S} A_i)`.
pub fn mixed_sigma(matrices: &[HermitianMatrix]) -> Result<f64> {
    let m = matrices.len();
    let n = matrices
        .first()
        .map(|a| a.dim())
        .ok_or_else(|| Error::Domain("mixed Hessian of an empty list".into()))?;
    if m > n || matrices.iter().any(|a| a.dim() != n) {
        return Err(Error::Domain(format!(
            "mixed Hessian needs 1 <= m <= n matrices of size n = {n}, got {m}"
        )));
    }
    let mut acc = 0.0;
    for mask in 1u32..(1u32 << m) {
        let mut sum = HermitianMatrix::real_diagonal(&vec![0.0; n]);
        for (i, a) in matrices.iter().enumerate() {
            if mask & (1 << i) != 0 {
                sum = sum.add(a);
            }
        }
        let size = mask.count_ones() as usize;
        let sign = if (m - size) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * esym_all(hermitian_eigenvalues(&sum).values())[m];
    }
    let factorial: f64 = (1..=m).map(|k| k as f64).product();
    Ok(acc / factorial)
}

/// Mixed density `dd^c u_1 ∧ … ∧ dd^c u_m ∧ β^{n-m}` at a node.
pub fn mixed_hessian_value(us: &[&GridFunction], node: usize) -> Result<f64> {
    let first = us
        .first()
        .ok_or_else(|| Error::Domain("mixed Hessian of an empty list".into()))?;
    let n = first.lattice().n();
    let norm = HessianNormalization::new(n, us.len())?;
    let hs = us
        .iter()
        .map(|u| {
            if !u.same_lattice(first) {
                return Err(Error::Domain("grid functions live on different lattices".into()));
            }
            wirtinger_hessian(u, node)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(norm.c_nm * mixed_sigma(&hs)?)
}

//! Residuals, comparison and energy checks, discrete quadratures, and the
//! gluing `max{u_shift, u + c₀δ^ν}`.

use serde::Serialize;

use crate::domain::LatticeDomain;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::math::{hermitian_eigenvalues, HessianNormalization};

/// Max over interior nodes of `|c_nm σ_m(λ(Hess u)) − f|`.
pub fn residual(u: &GridFunction, f: &GridFunction, m: usize) -> Result<f64> {
    u.check_same_lattice(f)?;
    let dom = u.lattice();
    let norm = HessianNormalization::new(dom.n(), m)?;
    Ok(dom
        .interior()
        .iter()
        .map(|&i| {
            let ev = hermitian_eigenvalues(&dom.hessian_at(u.values(), i, None));
            (norm.density(ev.values()) - f.get(i)).abs()
        })
        .fold(0.0, f64::max))
}

/// Operator densities at interior nodes (NaN elsewhere).
pub fn operator_density(u: &GridFunction, m: usize) -> Result<GridFunction> {
    let dom = u.lattice();
    let norm = HessianNormalization::new(dom.n(), m)?;
    let mut out = vec![f64::NAN; dom.len()];
    for &i in dom.interior() {
        let ev = hermitian_eigenvalues(&dom.hessian_at(u.values(), i, None));
        out[i] = norm.density(ev.values());
    }
    GridFunction::partial(dom, out)
}

/// Boundary trace of u at each link crossing, the inverse of the solver's
/// boundary rule.
pub fn boundary_traces(u: &GridFunction) -> Vec<f64> {
    u.lattice().links().iter().map(|l| l.trace(u.values())).collect()
}

fn trace_tolerance(u: &GridFunction, v: &GridFunction) -> f64 {
    let sup = u
        .lattice()
        .masked()
        .iter()
        .map(|&i| u.get(i).abs().max(v.get(i).abs()))
        .fold(0.0, f64::max);
    1e-8 * (1.0 + sup)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `v ≤ u + 10h²` at every masked node.
    pub ordered: bool,
    pub max_violation: f64,
    /// Whether the densities satisfy `dens(u) ≤ dens(v) + tol` nodewise.
    pub densities_ordered: bool,
    pub tolerance: f64,
}

/// Checks `v ≤ u` for potentials with `u ≥ v` on the boundary. Boundary
/// ordering is a precondition and its failure is an error.
pub fn comparison_check(u: &GridFunction, v: &GridFunction, m: usize) -> Result<ComparisonReport> {
    u.check_same_lattice(v)?;
    let dom = u.lattice();
    let tol_b = trace_tolerance(u, v);
    for (k, (a, b)) in boundary_traces(u).iter().zip(boundary_traces(v)).enumerate() {
        if b > a + tol_b {
            return Err(Error::Precondition(format!(
                "boundary ordering fails at {:?}: v = {b}, u = {a}",
                dom.links()[k].xi
            )));
        }
    }
    let h = dom.h();
    let tolerance = 10.0 * h * h;
    let max_violation = dom
        .masked()
        .iter()
        .map(|&i| (v.get(i) - u.get(i)).max(0.0))
        .fold(0.0, f64::max);
    let du = operator_density(u, m)?;
    let dv = operator_density(v, m)?;
    let densities_ordered = dom
        .interior()
        .iter()
        .all(|&i| du.get(i) <= dv.get(i) + 1e-6 * (1.0 + dv.get(i).abs()));
    Ok(ComparisonReport {
        ordered: max_violation <= tolerance,
        max_violation,
        densities_ordered,
        tolerance,
    })
}

/// Second difference along one axis, one-sided where a neighbour is missing.
fn second_difference(dom: &LatticeDomain, u: &[f64], i: usize, a: usize) -> f64 {
    let h2 = dom.h() * dom.h();
    let nb = |j: Option<usize>| j.filter(|&j| dom.is_masked(j));
    match (nb(dom.step(i, a, 1)), nb(dom.step(i, a, -1))) {
        (Some(p), Some(q)) => (u[p] - 2.0 * u[i] + u[q]) / h2,
        (Some(p), None) => match nb(dom.step(p, a, 1)) {
            Some(pp) => (u[pp] - 2.0 * u[p] + u[i]) / h2,
            None => 0.0,
        },
        (None, Some(q)) => match nb(dom.step(q, a, -1)) {
            Some(qq) => (u[qq] - 2.0 * u[q] + u[i]) / h2,
            None => 0.0,
        },
        (None, None) => 0.0,
    }
}

fn first_difference(dom: &LatticeDomain, u: &[f64], i: usize, a: usize) -> f64 {
    let h = dom.h();
    let nb = |j: Option<usize>| j.filter(|&j| dom.is_masked(j));
    match (nb(dom.step(i, a, 1)), nb(dom.step(i, a, -1))) {
        (Some(p), Some(q)) => (u[p] - u[q]) / (2.0 * h),
        (Some(p), None) => (u[p] - u[i]) / h,
        (None, Some(q)) => (u[i] - u[q]) / h,
        (None, None) => 0.0,
    }
}

/// `Σ |∇_h u|² h^{2n}` over masked nodes, centred where possible.
pub fn gradient_energy(u: &GridFunction) -> f64 {
    let dom = u.lattice();
    let vals = u.values();
    dom.masked()
        .iter()
        .map(|&i| {
            (0..2 * dom.n())
                .map(|a| first_difference(dom, vals, i, a).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        * dom.cell_volume()
}

/// `Σ Δ_h u · h^{2n}` over masked nodes, one-sided second differences
/// next to the boundary.
pub fn laplacian_mass(u: &GridFunction) -> f64 {
    let dom = u.lattice();
    let vals = u.values();
    dom.masked()
        .iter()
        .map(|&i| {
            (0..2 * dom.n())
                .map(|a| second_difference(dom, vals, i, a))
                .sum::<f64>()
        })
        .sum::<f64>()
        * dom.cell_volume()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub mass_u: f64,
    pub mass_v: f64,
    pub grad_u: f64,
    pub grad_v: f64,
}

/// Laplacian masses and gradient energies of `u ≤ v` with equal boundary
/// values. Ordering and boundary agreement are preconditions.
pub fn energy_comparison(u: &GridFunction, v: &GridFunction) -> Result<EnergyReport> {
    u.check_same_lattice(v)?;
    let dom = u.lattice();
    let h = dom.h();
    let tol = 10.0 * h * h;
    if let Some(&i) = dom.masked().iter().find(|&&i| u.get(i) > v.get(i) + tol) {
        return Err(Error::Domain(format!(
            "ordering u <= v fails at {:?}: u = {}, v = {}",
            dom.coords(i),
            u.get(i),
            v.get(i)
        )));
    }
    let tol_b = trace_tolerance(u, v);
    for (k, (a, b)) in boundary_traces(u).iter().zip(boundary_traces(v)).enumerate() {
        if (a - b).abs() > tol_b {
            return Err(Error::Domain(format!(
                "boundary values differ at {:?}: {a} vs {b}",
                dom.links()[k].xi
            )));
        }
    }
    Ok(EnergyReport {
        mass_u: laplacian_mass(u),
        mass_v: laplacian_mass(v),
        grad_u: gradient_energy(u),
        grad_v: gradient_energy(v),
    })
}

/// Masked nodes at distance greater than δ from the boundary.
pub fn omega_delta(dom: &LatticeDomain, delta: f64) -> Vec<usize> {
    dom.masked()
        .iter()
        .copied()
        .filter(|&i| dom.distance(i) > delta)
        .collect()
}

/// `max{u_shift, u + c₀δ^ν}` on Ω_δ and `u + c₀δ^ν` elsewhere.
pub fn glue_extension(u: &GridFunction, u_shift: &GridFunction, c0: f64, nu: f64, delta: f64) -> Result<GridFunction> {
    u.check_same_lattice(u_shift)?;
    if !(c0 > 0.0 && delta > 0.0 && nu > 0.0 && nu < 1.0) {
        return Err(Error::Domain(format!(
            "need c0 > 0, delta > 0, 0 < nu < 1; got {c0}, {delta}, {nu}"
        )));
    }
    let dom = u.lattice();
    let lift = c0 * delta.powf(nu);
    let mut out = u.map(|x| x + lift);
    for i in omega_delta(dom, delta) {
        let s = u_shift.get(i);
        if !s.is_finite() {
            return Err(Error::Domain(format!(
                "shifted function missing at node {:?} of the shrunken domain",
                dom.coords(i)
            )));
        }
        out.set(i, s.max(u.get(i) + lift));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_domain, unit_ball_volume, DefiningFunction};

    #[test]
    fn residual_examples() {
        let lat = make_domain(&DefiningFunction::ball(2, 1.0).unwrap(), 0.25).unwrap();
        let u = GridFunction::from_fn(&lat, |z| z.iter().map(|x| x * x).sum());
        assert!(residual(&u, &GridFunction::constant(&lat, 1.0), 2).unwrap() < 1e-10);
        assert!((residual(&u, &GridFunction::zeros(&lat), 2).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quadratures() {
        let lat = make_domain(&DefiningFunction::ball(2, 1.0).unwrap(), 0.0625).unwrap();
        let vol = unit_ball_volume(4);
        let re = GridFunction::from_fn(&lat, |z| z[0]);
        assert!((gradient_energy(&re) / vol - 1.0).abs() < 0.05);
        assert!(laplacian_mass(&re).abs() < 1e-6 * vol);
        let q = GridFunction::from_fn(&lat, |z| z.iter().map(|x| x * x).sum());
        assert!((laplacian_mass(&q) / (8.0 * vol) - 1.0).abs() < 0.05);
    }

    #[test]
    fn comparison_and_energy_trivial_cases() {
        let lat = make_domain(&DefiningFunction::ball(2, 1.0).unwrap(), 0.25).unwrap();
        let u = GridFunction::from_fn(&lat, |z| z.iter().map(|x| x * x).sum::<f64>() - 1.0);
        let r = comparison_check(&u, &u, 2).unwrap();
        assert!(r.ordered && r.max_violation == 0.0);
        let v = u.map(|x| x + 0.01);
        assert!(matches!(comparison_check(&u, &v, 2), Err(Error::Precondition(_))));
        let e = energy_comparison(&u, &u).unwrap();
        assert_eq!(e.mass_u, e.mass_v);
    }

    #[test]
    fn glue_examples() {
        let lat = make_domain(&DefiningFunction::ball(2, 1.0).unwrap(), 0.25).unwrap();
        let u = GridFunction::constant(&lat, 2.0);
        let shift = GridFunction::constant(&lat, 2.0);
        let g = glue_extension(&u, &shift, 0.5, 0.5, 0.25).unwrap();
        for &i in lat.masked() {
            assert!((g.get(i) - (2.0 + 0.25)).abs() < 1e-15);
        }
        let missing = GridFunction::partial(&lat, vec![f64::NAN; lat.len()]).unwrap();
        assert!(glue_extension(&u, &missing, 0.5, 0.5, 0.25).is_err());
    }
}

//! Sup-convolutions, ball averages, Hölder exponent fits, Sobolev
//! diagnostics and the predicted exponents `γ_r`.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::LatticeDomain;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::solver::{gradient_energy, integrate, laplacian_mass, omega_delta, RadialProfile};

/// Integer offsets of the closed δ-ball with their flat index shifts.
fn ball_offsets_full(dom: &LatticeDomain, delta: f64) -> Vec<(Vec<i64>, isize)> {
    let d = 2 * dom.n();
    let k = (delta / dom.h() + 1e-9).floor() as i64;
    let r2 = (delta / dom.h()).powi(2) + 1e-9;
    let mut out = Vec::new();
    let mut idx = vec![-k; d];
    loop {
        let norm2: i64 = idx.iter().map(|x| x * x).sum();
        if norm2 as f64 <= r2 {
            let flat = idx
                .iter()
                .zip(dom.strides())
                .map(|(&x, &s)| x as isize * s as isize)
                .sum();
            out.push((idx.clone(), flat));
        }
        let mut a = 0;
        loop {
            if a == d {
                return out;
            }
            idx[a] += 1;
            if idx[a] <= k {
                break;
            }
            idx[a] = -k;
            a += 1;
        }
    }
}

fn ball_offsets(dom: &LatticeDomain, delta: f64) -> Vec<isize> {
    ball_offsets_full(dom, delta).into_iter().map(|(_, o)| o).collect()
}

/// Multilinear interpolation at node `i` displaced by `v` lattice units.
/// When the enclosing cell has an unmasked corner, the cell moved one step
/// back towards node `i` is used for extrapolation instead.
fn interpolate(dom: &LatticeDomain, vals: &[f64], i: usize, v: &[f64]) -> Option<f64> {
    multilinear(dom, vals, i, v, false).or_else(|| multilinear(dom, vals, i, v, true))
}

fn multilinear(dom: &LatticeDomain, vals: &[f64], i: usize, v: &[f64], inward: bool) -> Option<f64> {
    let strides = dom.strides();
    let mut base = i as isize;
    let mut frac = [0.0f64; 16];
    for (a, &x) in v.iter().enumerate() {
        let mut lo = x.floor();
        if inward && x.abs() >= 1.0 {
            lo -= x.signum();
        }
        base += lo as isize * strides[a] as isize;
        frac[a] = x - lo;
    }
    let d = v.len();
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut j = base;
        let mut w = 1.0;
        for a in 0..d {
            if corner >> a & 1 == 1 {
                j += strides[a] as isize;
                w *= frac[a];
            } else {
                w *= 1.0 - frac[a];
            }
        }
        if w == 0.0 {
            continue;
        }
        if j < 0 || j as usize >= dom.len() || !dom.is_masked(j as usize) {
            return None;
        }
        acc += w * vals[j as usize];
    }
    Some(acc)
}

fn check_delta(dom: &LatticeDomain, delta: f64) -> Result<Vec<usize>> {
    if delta < 2.0 * dom.h() * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "delta = {delta} is below 2h = {}",
            2.0 * dom.h()
        )));
    }
    let nodes = omega_delta(dom, delta);
    if nodes.is_empty() {
        return Err(Error::Domain(format!(
            "the shrunken domain is empty for delta = {delta}"
        )));
    }
    Ok(nodes)
}

/// `u_δ(z) = sup_{|ζ|≤δ} u(z+ζ)` over lattice nodes of the closed ball, the
/// axis crossings of its sphere and the sphere points in the directions of
/// the best node and of the discrete gradient (multilinear interpolation);
/// NaN outside Ω_δ.
pub fn sup_convolution(u: &GridFunction, delta: f64) -> Result<GridFunction> {
    let dom = u.lattice();
    let nodes = check_delta(dom, delta)?;
    let full = ball_offsets_full(dom, delta);
    let offsets: Vec<isize> = full.iter().map(|o| o.1).collect();
    let radius = delta / dom.h();
    let vals = u.values();
    let k = (delta / dom.h() + 1e-9).floor() as usize;
    let frac = delta / dom.h() - k as f64;
    let d = 2 * dom.n();
    let mut out = vec![f64::NAN; dom.len()];
    for &i in &nodes {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (q, &o) in offsets.iter().enumerate() {
            let v = vals[(i as isize + o) as usize];
            if v > best {
                best = v;
                arg = q;
            }
        }
        // sphere points along the best lattice direction and the centred gradient
        let grad: Vec<f64> = (0..d)
            .map(|a| match (dom.step(i, a, 1), dom.step(i, a, -1)) {
                (Some(p), Some(q)) => vals[p] - vals[q],
                _ => 0.0,
            })
            .collect();
        let best_dir: Vec<f64> = full[arg].0.iter().map(|&x| x as f64).collect();
        for dir in [best_dir, grad] {
            let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len > 0.0 && len.is_finite() {
                let v: Vec<f64> = dir.iter().map(|&x| x * radius / len).collect();
                if let Some(w) = interpolate(dom, vals, i, &v) {
                    best = best.max(w);
                }
            }
        }
        if frac > 1e-9 {
            for a in 0..d {
                for s in [1i8, -1] {
                    let mut j = Some(i);
                    for _ in 0..k {
                        j = j.and_then(|j| dom.step(j, a, s));
                    }
                    let (Some(near), Some(far)) = (j, j.and_then(|j| dom.step(j, a, s))) else {
                        continue;
                    };
                    if dom.is_masked(near) && dom.is_masked(far) {
                        best = best.max(vals[near] + frac * (vals[far] - vals[near]));
                    }
                }
            }
        }
        out[i] = best;
    }
    GridFunction::partial(dom, out)
}

/// Mean of u over the lattice nodes (cell centres) in the closed δ-ball;
/// NaN outside Ω_δ.
pub fn ball_average(u: &GridFunction, delta: f64) -> Result<GridFunction> {
    let dom = u.lattice();
    let nodes = check_delta(dom, delta)?;
    let offsets = ball_offsets(dom, delta);
    let vals = u.values();
    let mut out = vec![f64::NAN; dom.len()];
    for &i in &nodes {
        let s: f64 = offsets.iter().map(|&o| vals[(i as isize + o) as usize]).sum();
        out[i] = s / offsets.len() as f64;
    }
    GridFunction::partial(dom, out)
}

/// Least-squares fit `log y = log A + α log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub constant: f64,
    pub r2: f64,
    pub points: usize,
}

/// Fits a power law, dropping points with `y ≤ 1e-12`; needs 3 points.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &y)| y > 1e-12)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Fit(format!("only {} usable points (need 3)", pts.len())));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all deltas coincide".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(PowerFit {
        exponent: slope,
        constant: (my - slope * mx).exp(),
        r2,
        points: pts.len(),
    })
}

/// Default ladder `{4h, 6h, 9h, 13h, 20h}` clipped to a quarter of the
/// inradius; when fewer than three survive, four geometric steps from
/// `2h` to the same cap.
pub fn default_deltas(h: f64, inradius: f64) -> Vec<f64> {
    let ladder: Vec<f64> = [4.0, 6.0, 9.0, 13.0, 20.0]
        .iter()
        .map(|k| k * h)
        .filter(|&d| d <= 0.25 * inradius + 1e-12)
        .collect();
    if ladder.len() >= 3 {
        return ladder;
    }
    let (lo, hi) = (2.0 * h, 0.25 * inradius);
    if hi <= lo {
        return vec![lo];
    }
    (0..4).map(|k| lo * (hi / lo).powf(k as f64 / 3.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentInputs {
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub nu: f64,
}

impl ExponentInputs {
    pub fn new(n: usize, m: usize, p: f64, r: f64, nu: f64) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::Domain(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
        }
        if !(p > n as f64 / m as f64) {
            return Err(Error::Domain(format!(
                "p = {p} must exceed n/m = {}",
                n as f64 / m as f64
            )));
        }
        if !(r >= 1.0) || !(0.0..0.5).contains(&nu) {
            return Err(Error::Domain(format!("need r >= 1 and 0 <= nu < 1/2, got {r}, {nu}")));
        }
        Ok(ExponentInputs {
            n,
            m,
            p,
            q: p / (p - 1.0),
            r,
            nu,
        })
    }
}

/// `γ_r = r / (r + mq + pq(n−m)/(p − n/m))`.
pub fn gamma_r(inp: &ExponentInputs) -> Result<f64> {
    let (n, m) = (inp.n as f64, inp.m as f64);
    if !(inp.p > n / m) {
        return Err(Error::Domain(format!("p = {} must exceed n/m", inp.p)));
    }
    Ok(inp.r / (inp.r + m * inp.q + inp.p * inp.q * (n - m) / (inp.p - n / m)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentCase {
    McorA,
    McorB,
    MainA,
    MainB,
}

/// Supremal Hölder exponent predicted for each case; `main_*` use `inp.nu`.
pub fn predicted_exponent(inp: &ExponentInputs, case: ExponentCase) -> Result<f64> {
    let at = |r: f64| gamma_r(&ExponentInputs { r, ..*inp });
    Ok(match case {
        ExponentCase::McorA => 2.0 * at(1.0)?,
        ExponentCase::McorB => at(2.0)?,
        ExponentCase::MainA => inp.nu.min(at(2.0)?),
        ExponentCase::MainB => inp.nu.min(2.0 * at(1.0)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Predicted {
    pub case_a: f64,
    pub case_b: f64,
    pub main_a: f64,
    pub main_b: f64,
}

pub fn predictions(inp: &ExponentInputs) -> Result<Predicted> {
    Ok(Predicted {
        case_a: predicted_exponent(inp, ExponentCase::McorA)?,
        case_b: predicted_exponent(inp, ExponentCase::McorB)?,
        main_a: predicted_exponent(inp, ExponentCase::MainA)?,
        main_b: predicted_exponent(inp, ExponentCase::MainB)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    pub deltas: Vec<f64>,
    pub sup_diff_maxu: Vec<f64>,
    pub sup_diff_avg: Vec<f64>,
    /// Slope of the sup-convolution differences, capped at 1.
    pub fitted_alpha: f64,
    pub r2: f64,
    pub a1: f64,
    /// Slope of the ball-average differences, when fittable.
    pub alpha_avg: Option<f64>,
    pub a2: Option<f64>,
    pub grad_energy: f64,
    pub laplacian_mass: f64,
    pub predicted: Option<Predicted>,
}

impl HolderReport {
    /// CSV `delta,sup_maxdiff,sup_avgdiff`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,sup_maxdiff,sup_avgdiff\n");
        for i in 0..self.deltas.len() {
            s.push_str(&format!(
                "{:e},{:e},{:e}\n",
                self.deltas[i], self.sup_diff_maxu[i], self.sup_diff_avg[i]
            ));
        }
        s
    }

    fn assemble(
        deltas: Vec<f64>,
        maxu: Vec<f64>,
        avg: Vec<f64>,
        grad_energy: f64,
        laplacian_mass: f64,
        inputs: Option<&ExponentInputs>,
    ) -> Result<Self> {
        let fit = fit_power_law(&deltas, &maxu)?;
        let avg_fit = fit_power_law(&deltas, &avg).ok();
        Ok(HolderReport {
            fitted_alpha: fit.exponent.min(1.0),
            r2: fit.r2,
            a1: fit.constant,
            alpha_avg: avg_fit.map(|f| f.exponent.min(1.0)),
            a2: avg_fit.map(|f| f.constant),
            deltas,
            sup_diff_maxu: maxu,
            sup_diff_avg: avg,
            grad_energy,
            laplacian_mass,
            predicted: inputs.map(predictions).transpose()?,
        })
    }
}

fn sup_diff(a: &GridFunction, u: &GridFunction) -> f64 {
    a.support()
        .iter()
        .map(|&i| (a.get(i) - u.get(i)).max(0.0))
        .fold(0.0, f64::max)
}

fn check_ladder(deltas: &[f64]) -> Result<()> {
    if deltas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("deltas must be strictly increasing".into()));
    }
    Ok(())
}

/// Hölder exponent of a grid function from its sup-convolutions.
pub fn holder_fit(u: &GridFunction, deltas: &[f64], inputs: Option<&ExponentInputs>) -> Result<HolderReport> {
    check_ladder(deltas)?;
    let mut maxu = Vec::new();
    let mut avg = Vec::new();
    for &d in deltas {
        maxu.push(sup_diff(&sup_convolution(u, d)?, u));
        avg.push(sup_diff(&ball_average(u, d)?, u));
    }
    let (g, l) = sobolev_diagnostics(u);
    HolderReport::assemble(deltas.to_vec(), maxu, avg, g, l, inputs)
}

/// `(Σ|∇_h u|² h^{2n}, Σ Δ_h u h^{2n})` over the masked nodes.
pub fn sobolev_diagnostics(u: &GridFunction) -> (f64, f64) {
    (gradient_energy(u), laplacian_mass(u))
}

/// Radial analogue of [`holder_fit`] for `u = g(|z|²)` on the ball: Ω_δ is
/// `|z| < R − δ` exactly and ball averages use the angular reduction of
/// the 2n-dimensional mean.
pub fn radial_holder_fit(p: &RadialProfile, deltas: &[f64], inputs: Option<&ExponentInputs>) -> Result<HolderReport> {
    check_ladder(deltas)?;
    let big_r = p.r_outer;
    let d = 2 * p.n;
    let mut maxu = Vec::new();
    let mut avg = Vec::new();
    for &delta in deltas {
        if delta >= big_r {
            return Err(Error::Domain(format!("delta = {delta} empties the shrunken ball")));
        }
        let rs: Vec<f64> = (0..=400).map(|k| (big_r - delta) * k as f64 / 400.0).collect();
        // g is nondecreasing, so the sup sits on the outward ray
        maxu.push(
            rs.iter()
                .map(|&r| p.value((r + delta).powi(2)) - p.value(r * r))
                .fold(0.0, f64::max),
        );
        let coarse: Vec<f64> = rs.iter().step_by(20).copied().collect();
        avg.push(
            coarse
                .iter()
                .map(|&r| radial_ball_mean(p, r, delta, d) - p.value(r * r))
                .fold(0.0, f64::max),
        );
    }
    let (g, l) = radial_sobolev(p);
    HolderReport::assemble(deltas.to_vec(), maxu, avg, g, l, inputs)
}

/// Mean of `g(|z+ζ|²)` over `|ζ| ≤ δ` in R^d with `|z| = r`: radius density
/// `∝ s^{d−1}`, polar angle density `∝ sin^{d−2}θ`.
fn radial_ball_mean(p: &RadialProfile, r: f64, delta: f64, d: usize) -> f64 {
    let ang_w = |th: f64| th.sin().powi(d as i32 - 2);
    let ang_norm = integrate(ang_w, 0.0, std::f64::consts::PI, 16);
    let inner = |s: f64| {
        integrate(
            |th| ang_w(th) * p.value(r * r + s * s + 2.0 * r * s * th.cos()),
            0.0,
            std::f64::consts::PI,
            16,
        ) / ang_norm
    };
    let rad_norm = delta.powi(d as i32) / d as f64;
    integrate(|s| s.powi(d as i32 - 1) * inner(s), 0.0, delta, 8) / rad_norm
}

/// Gradient energy `∫ 4t g'² dV` and Laplacian mass `4πⁿ R^{2n} g'(R²)/(n−1)!`.
pub fn radial_sobolev(p: &RadialProfile) -> (f64, f64) {
    let n = p.n;
    let fact: f64 = (1..n).map(|k| k as f64).product();
    let shell = std::f64::consts::PI.powi(n as i32) / fact;
    let grad: f64 = (0..p.knots.len() - 1)
        .map(|i| {
            let (t0, t1) = (p.knots[i], p.knots[i + 1]);
            let e = |t: f64, w: f64| 4.0 * t * w * w * shell * t.powi(n as i32 - 1);
            0.5 * (t1 - t0) * (e(t0, p.slope[i]) + e(t1, p.slope[i + 1]))
        })
        .sum();
    let t_max = *p.knots.last().unwrap();
    let mass = 4.0 * shell * t_max.powi(n as i32) * p.slope.last().unwrap();
    (grad, mass)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeLe2Report {
    pub deltas: Vec<f64>,
    pub l2: Vec<f64>,
    pub l1: Vec<f64>,
    pub slope_l2: f64,
    /// `None` when the ball-average differences vanish (harmonic u).
    pub slope_l1: Option<f64>,
    pub l1_skipped: bool,
    /// Largest `∫(u_δ−u)² / (‖∇u‖² δ²)` over the ladder.
    pub c_n_l2: f64,
    pub c_n_l1: f64,
}

/// Slopes of `∫(u_δ−u)²` and `∫(û_δ−u)` against δ, both integrated over
/// the common region `Ω_{δ_max}`.
pub fn lemma_hele2_check(u: &GridFunction, deltas: &[f64]) -> Result<HeLe2Report> {
    check_ladder(deltas)?;
    let dom = u.lattice();
    let dmax = *deltas.last().ok_or_else(|| Error::Fit("empty ladder".into()))?;
    let region = check_delta(dom, dmax)?;
    let cell = dom.cell_volume();
    let grad = gradient_energy(u);
    let mut l2 = Vec::new();
    let mut l1 = Vec::new();
    for &d in deltas {
        let s = sup_convolution(u, d)?;
        let a = ball_average(u, d)?;
        l2.push(region.iter().map(|&i| (s.get(i) - u.get(i)).powi(2)).sum::<f64>() * cell);
        l1.push(region.iter().map(|&i| a.get(i) - u.get(i)).sum::<f64>() * cell);
    }
    let fit2 = fit_power_law(deltas, &l2)?;
    let scale = region.iter().map(|&i| u.get(i).abs()).fold(0.0, f64::max).max(1.0);
    let l1_skipped = l1.iter().all(|v| v.abs() <= 1e-10 * scale);
    let slope_l1 = if l1_skipped {
        None
    } else {
        Some(fit_power_law(deltas, &l1)?.exponent)
    };
    let ratio = |v: &[f64], pow: i32| {
        v.iter()
            .zip(deltas)
            .map(|(x, d)| x / (grad.max(1e-300) * d.powi(pow)))
            .fold(0.0, f64::max)
    };
    Ok(HeLe2Report {
        deltas: deltas.to_vec(),
        slope_l2: fit2.exponent,
        slope_l1,
        l1_skipped,
        c_n_l2: ratio(&l2, 2),
        c_n_l1: ratio(&l1, 2),
        l2,
        l1,
    })
}

/// `sup|v| + max |v(z) − v(w)| / |z − w|^ν` over a deterministic subsample
/// of at most `max_nodes` masked nodes.
pub fn grid_holder_norm(v: &GridFunction, nu: f64, max_nodes: usize) -> f64 {
    let dom = v.lattice();
    let nodes = v.support();
    let stride = nodes.len().div_ceil(max_nodes.max(1)).max(1);
    let pick: Vec<(Vec<f64>, f64)> = nodes
        .iter()
        .step_by(stride)
        .map(|&i| (dom.coords(i), v.get(i)))
        .collect();
    let sup = nodes.iter().map(|&i| v.get(i).abs()).fold(0.0, f64::max);
    let mut semi: f64 = 0.0;
    for a in 0..pick.len() {
        for b in (a + 1)..pick.len() {
            let d: f64 = pick[a]
                .0
                .iter()
                .zip(&pick[b].0)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            semi = semi.max((pick[a].1 - pick[b].1).abs() / d.powf(nu));
        }
    }
    sup + semi
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollarReport {
    pub deltas: Vec<f64>,
    /// `max (u_δ − u)/δ^ν` over nodes of Ω_δ within one cell of its edge.
    pub ratios: Vec<f64>,
    pub c0: f64,
    pub bounded: bool,
}

/// Checks `u_δ − u ≤ c₀δ^ν` next to ∂Ω_δ with `c₀ = 2‖h‖_ν + ‖b‖_ν`,
/// accepting ratios up to `2c₀`. `b ≤ u + 10h²` is a precondition.
pub fn boundary_collar_check(
    u: &GridFunction,
    h_env: &GridFunction,
    b: &GridFunction,
    deltas: &[f64],
    nu: f64,
) -> Result<CollarReport> {
    check_ladder(deltas)?;
    u.check_same_lattice(b)?;
    u.check_same_lattice(h_env)?;
    let dom: &Arc<LatticeDomain> = u.lattice();
    let tol = 10.0 * dom.h() * dom.h();
    if let Some(&i) = dom.masked().iter().find(|&&i| b.get(i) > u.get(i) + tol) {
        return Err(Error::Domain(format!(
            "barrier exceeds the solution at {:?}: {} > {}",
            dom.coords(i),
            b.get(i),
            u.get(i)
        )));
    }
    let c0 = 2.0 * grid_holder_norm(h_env, nu, 600) + grid_holder_norm(b, nu, 600);
    let mut ratios = Vec::new();
    for &d in deltas {
        let s = sup_convolution(u, d)?;
        let edge = d + dom.h() * (1.0 + 1e-9);
        let r = s
            .support()
            .iter()
            .filter(|&&i| dom.distance(i) <= edge)
            .map(|&i| (s.get(i) - u.get(i)) / d.powf(nu))
            .fold(0.0, f64::max);
        ratios.push(r);
    }
    let bounded = ratios.iter().all(|&r| r <= 2.0 * c0);
    Ok(CollarReport {
        deltas: deltas.to_vec(),
        ratios,
        c0,
        bounded,
    })
}

//! Radial reduction. For `u = g(|z|²)` with `w = g'` the Hessian has
//! eigenvalue `w` with multiplicity `n−1` and `w + t g''` once, and the
//! density is `t^{1−n} (tⁿ wᵐ)' / n`. Integrating from the origin gives
//! `w(t)ᵐ = n ∫₀¹ σ^{n−1} f(tσ) dσ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::{binomial, in_gamma_m_closed, HessianNormalization};

/// Operator density of a radial function with `g' = gp`, `g'' = gpp` at `t`.
pub fn radial_sigma_m(gp: f64, gpp: f64, t: f64, n: usize, m: usize) -> f64 {
    let c = 1.0 / binomial(n, m);
    c * (binomial(n - 1, m) * gp.powi(m as i32) + binomial(n - 1, m - 1) * gp.powi(m as i32 - 1) * (gp + t * gpp))
}

/// Eigenvalues `(w, …, w, w + t g'')` of the Hessian of a radial function.
pub fn radial_eigenvalues(gp: f64, gpp: f64, t: f64, n: usize) -> Vec<f64> {
    let mut l = vec![gp; n];
    l[n - 1] = gp + t * gpp;
    l
}

// 5-point Gauss–Legendre on [-1, 1]
const GL_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Composite Gauss–Legendre on `[a, b]` with `panels` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let w = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * w;
        for (x, wt) in GL_X.iter().zip(GL_W) {
            acc += wt * f(mid + 0.5 * w * x);
        }
    }
    0.5 * w * acc
}

/// A function of `t = |z|²` sampled on uniform knots of `[0, R²]`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialProfile {
    pub n: usize,
    pub m: usize,
    pub r_outer: f64,
    pub knots: Vec<f64>,
    pub g: Vec<f64>,
    /// `g'` at the knots, from the integral formula.
    pub slope: Vec<f64>,
}

impl RadialProfile {
    fn dt(&self) -> f64 {
        self.knots[1] - self.knots[0]
    }

    /// Centred first difference at an interior knot.
    pub fn gp(&self, i: usize) -> f64 {
        (self.g[i + 1] - self.g[i - 1]) / (2.0 * self.dt())
    }

    /// Centred second difference at an interior knot.
    pub fn gpp(&self, i: usize) -> f64 {
        (self.g[i + 1] - 2.0 * self.g[i] + self.g[i - 1]) / (self.dt() * self.dt())
    }

    /// Cubic Hermite interpolation of g using the stored slopes.
    pub fn value(&self, t: f64) -> f64 {
        let t = t.clamp(self.knots[0], *self.knots.last().unwrap());
        let dt = self.dt();
        let k = (((t - self.knots[0]) / dt) as usize).min(self.knots.len() - 2);
        let s = (t - self.knots[k]) / dt;
        let (h00, h10, h01, h11) = (
            2.0 * s * s * s - 3.0 * s * s + 1.0,
            s * s * s - 2.0 * s * s + s,
            -2.0 * s * s * s + 3.0 * s * s,
            s * s * s - s * s,
        );
        h00 * self.g[k] + h10 * dt * self.slope[k] + h01 * self.g[k + 1] + h11 * dt * self.slope[k + 1]
    }

    /// Max over interior knots of the discrete density error.
    pub fn residual(&self, f: &dyn Fn(f64) -> f64) -> f64 {
        (1..self.knots.len() - 1)
            .map(|i| (radial_sigma_m(self.gp(i), self.gpp(i), self.knots[i], self.n, self.m) - f(self.knots[i])).abs())
            .fold(0.0, f64::max)
    }

    /// Checks `g' ≥ 0` and the closed-cone condition at interior knots;
    /// returns the worst knot on failure.
    pub fn check_admissible(&self, eps: f64) -> Result<()> {
        for i in 1..self.knots.len() - 1 {
            let lam = radial_eigenvalues(self.gp(i), self.gpp(i), self.knots[i], self.n);
            let scale = eps * (1.0 + lam.iter().fold(0.0f64, |a, b| a.max(b.abs())));
            if self.gp(i) < -scale || !in_gamma_m_closed(&lam, self.m, scale)? {
                return Err(Error::Admissibility {
                    location: format!("knot {i} (t = {})", self.knots[i]),
                    violation: lam.iter().cloned().fold(f64::INFINITY, f64::min),
                });
            }
        }
        Ok(())
    }
}

/// Solves the radial equation with `g(R²) = phi_r` on `knots` uniform knots.
pub fn radial_solve(
    n: usize,
    m: usize,
    r_outer: f64,
    f: &dyn Fn(f64) -> f64,
    phi_r: f64,
    knots: usize,
) -> Result<RadialProfile> {
    HessianNormalization::new(n, m)?;
    if knots < 3 || !(r_outer > 0.0) {
        return Err(Error::Domain(format!(
            "need knots >= 3 and R > 0, got {knots}, {r_outer}"
        )));
    }
    if m == n && !f(0.0).is_finite() {
        return Err(Error::Domain("f must be bounded at the origin when m = n".into()));
    }
    let t_max = r_outer * r_outer;
    let dt = t_max / (knots - 1) as f64;
    let ts: Vec<f64> = (0..knots).map(|i| i as f64 * dt).collect();
    let nf = n as f64;
    let slope_at = |t: f64| -> f64 {
        let avg = integrate(|s| nf * s.powi(n as i32 - 1) * f(t * s), 0.0, 1.0, 16);
        avg.max(0.0).powf(1.0 / m as f64)
    };
    let slope: Vec<f64> = ts.iter().map(|&t| slope_at(t)).collect();
    if let Some(k) = slope.iter().position(|w| !w.is_finite()) {
        return Err(Error::Numerical(format!("slope not finite at t = {}", ts[k])));
    }
    let mut g = vec![0.0; knots];
    g[knots - 1] = phi_r;
    for i in (0..knots - 1).rev() {
        g[i] = g[i + 1] - integrate(&slope_at, ts[i], ts[i + 1], 2);
    }
    let profile = RadialProfile {
        n,
        m,
        r_outer,
        knots: ts,
        g,
        slope,
    };
    profile.check_admissible(1e-6)?;
    Ok(profile)
}

/// `∫_a^b s^{−n/m} ds` in closed form.
fn power_integral(n: usize, m: usize, a: f64, b: f64) -> f64 {
    if n == m {
        (b / a).ln()
    } else {
        let e = 1.0 - n as f64 / m as f64;
        (b.powf(e) - a.powf(e)) / e
    }
}

/// Relative extremal function of `B̄_r` in `B_R` as a function of `t = |z|²`:
/// −1 on the small ball, the homogeneous profile `t^{1−n/m}` (or `log t`)
/// in between, 0 on the outer sphere.
pub fn radial_extremal_value(n: usize, m: usize, r: f64, r_outer: f64, t: f64) -> f64 {
    let (a, b) = (r * r, r_outer * r_outer);
    if t <= a {
        return -1.0;
    }
    -power_integral(n, m, t.min(b), b) / power_integral(n, m, a, b)
}

/// `cap_m(B̄_r, B_R)`: the mass `(πⁿ/n!)·tⁿ g'(t)ᵐ` of the extremal's
/// Hessian measure, constant on `(r², R²)`.
pub fn radial_capacity(n: usize, m: usize, r: f64, r_outer: f64) -> f64 {
    let c = 1.0 / power_integral(n, m, r * r, r_outer * r_outer);
    ball_volume(n, 1.0) * c.powi(m as i32)
}

/// Volume of the ball of radius `r` in Cⁿ.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    std::f64::consts::PI.powi(n as i32) / fact * r.powi(2 * n as i32)
}

//! The experiments behind each subcommand.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hessian_core::barriers::{
    barrier_envelope, choose_k, msh_barrier, msh_cone_check, BarrierKind, BarrierParams, BoundarySample,
};
use hessian_core::capacity::{
    s_infinity, stability_ratio, sublevel_capacity_check, volume_capacity_check, volume_capacity_radial,
    write_stability_csv, VolumeCapacityReport,
};
use hessian_core::data::{BoundarySpec, DensitySpec};
use hessian_core::domain::{make_domain, sample_boundary, DefiningFunction, DomainKind, LatticeDomain};
use hessian_core::grid::GridFunction;
use hessian_core::math::hessian_operator_value;
use hessian_core::regularity::{
    ball_average, default_deltas, holder_fit, predictions, radial_holder_fit, sup_convolution, HolderReport,
};
use hessian_core::solver::{
    dirichlet_solve, dirichlet_solve_detailed, omega_delta, perron_envelope, radial_solve, residual,
    write_residual_csv, RadialProfile, SolveConfig,
};
use hessian_core::Error;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Experiment, ExperimentConfig};
use crate::report::Check;

/// Why a run stopped before all checks were evaluated.
#[derive(Debug)]
pub enum RunError {
    /// Bad input; exit status 2.
    Invalid(String),
    /// A computation failed; exit status 1.
    Failed { step: String, message: String },
}

impl RunError {
    fn from_core(step: &str, e: Error) -> Self {
        match e {
            Error::Domain(_)
            | Error::Resolution { .. }
            | Error::Precondition(_)
            | Error::Parse(_)
            | Error::Certification { .. }
            | Error::Stencil { .. } => RunError::Invalid(format!("{step}: {e}")),
            _ => RunError::Failed {
                step: step.into(),
                message: e.to_string(),
            },
        }
    }
}

/// Attaches the step name to a core result.
trait Step<T> {
    fn step(self, name: &str) -> Result<T, RunError>;
}

impl<T> Step<T> for hessian_core::Result<T> {
    fn step(self, name: &str) -> Result<T, RunError> {
        self.map_err(|e| RunError::from_core(name, e))
    }
}

/// State of one experiment run: its config, output directory, seeded RNG
/// and the files and checks produced so far.
pub struct Run<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
    rng: ChaCha8Rng,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
}

impl<'a> Run<'a> {
    pub fn new(cfg: &'a ExperimentConfig, out: &'a Path) -> Self {
        Run {
            cfg,
            out,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            files: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn execute(&mut self) -> Result<(), RunError> {
        match self.cfg.experiment {
            Experiment::Solve => self.solve(),
            Experiment::Holder => self.holder(),
            Experiment::Capacity => self.capacity(),
            Experiment::Stability => self.stability(),
            Experiment::Barriers => self.barriers(),
            Experiment::Verify => self.verify(),
        }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.out.join(name)
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> hessian_core::Result<()>,
    ) -> Result<(), RunError> {
        let path = self.path(name);
        let write = || -> hessian_core::Result<()> {
            let mut w = BufWriter::new(File::create(&path)?);
            body(&mut w)?;
            w.flush()?;
            Ok(())
        };
        write().step(&format!("write {name}"))
    }

    fn save_grid(&mut self, name: &str, u: &GridFunction, field: &str) -> Result<(), RunError> {
        let path = self.path(name);
        u.save(&path, field).step(&format!("write {name}"))
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn spec(&self) -> Result<DefiningFunction, RunError> {
        self.cfg.spec().map_err(RunError::Invalid)
    }

    fn lattice(&self) -> Result<Arc<LatticeDomain>, RunError> {
        make_domain(&self.spec()?, self.cfg.h).step("build lattice")
    }

    fn density_grid(&self, dom: &Arc<LatticeDomain>) -> GridFunction {
        let spec = dom.spec().clone();
        GridFunction::from_fn(dom, |z| self.cfg.density.eval(&spec, self.cfg.m, z))
    }

    /// Lattice solve with the residual history written out.
    fn solve_on(&mut self, dom: &Arc<LatticeDomain>, f: &GridFunction) -> Result<GridFunction, RunError> {
        let scfg = self.cfg.solve_config();
        let phi = self.cfg.boundary.clone();
        let out = dirichlet_solve_detailed(dom, f, &phi.as_fn(), &scfg).step("dirichlet solve")?;
        self.write("residual.csv", |w| write_residual_csv(w, &out.history))?;
        self.save_grid("solution.grid", &out.u, "u")?;
        let res = residual(&out.u, f, scfg.m).step("residual")?;
        self.check(Check::at_most("residual", res, 0.0, scfg.tol));
        let violation = out.history.last().map_or(0.0, |r| r.max_cone_violation);
        self.check(Check::at_most("cone_violation", violation, 0.0, scfg.tol));
        Ok(out.u)
    }

    fn solve(&mut self) -> Result<(), RunError> {
        let dom = self.lattice()?;
        let f = self.density_grid(&dom);
        let u = self.solve_on(&dom, &f)?;
        // c^{1/m}(|z|² − R²) + b solves the constant problem on a ball
        if let (
            DomainKind::Ball { radius, .. },
            DensitySpec::Constant { value: c },
            BoundarySpec::Constant { value: b },
        ) = (&self.cfg.domain, &self.cfg.density, &self.cfg.boundary)
        {
            let k = c.powf(1.0 / self.cfg.m as f64);
            let exact = |z: &[f64]| k * (z.iter().map(|x| x * x).sum::<f64>() - radius * radius) + b;
            let err = dom
                .masked()
                .iter()
                .map(|&i| (u.get(i) - exact(&dom.coords(i))).abs())
                .fold(0.0, f64::max);
            let h = self.cfg.h;
            self.check(Check::at_most("sup_error_vs_exact", err, 0.0, 10.0 * h * h));
        }
        Ok(())
    }

    fn holder(&mut self) -> Result<(), RunError> {
        let inputs = self.cfg.exponent_inputs().map_err(RunError::Invalid)?;
        let predicted = predictions(&inputs).step("exponent predictions")?;
        let bounded = self.cfg.density.is_bounded();
        let report: HolderReport = if self.cfg.radial {
            let DomainKind::Ball { radius, .. } = self.cfg.domain else {
                return Err(RunError::Invalid("the radial path needs a ball".into()));
            };
            let BoundarySpec::Constant { value } = self.cfg.boundary else {
                return Err(RunError::Invalid("the radial path needs constant boundary data".into()));
            };
            let f = self.cfg.density.radial(self.cfg.m, radius);
            let profile = radial_solve(inputs.n, inputs.m, radius, &f, value, self.cfg.knots).step("radial solve")?;
            self.write("profile.csv", |w| write_profile(w, &profile))?;
            let deltas: Vec<f64> = (0..6).map(|k| 0.02 * radius * 1.6f64.powi(k)).collect();
            radial_holder_fit(&profile, &deltas, Some(&inputs)).step("holder fit")?
        } else {
            let dom = self.lattice()?;
            let f = self.density_grid(&dom);
            let u = self.solve_on(&dom, &f)?;
            let deltas = default_deltas(self.cfg.h, dom.spec().inradius());
            holder_fit(&u, &deltas, Some(&inputs)).step("holder fit")?
        };
        self.write("holder.json", |w| {
            serde_json::to_writer_pretty(&mut *w, &report).map_err(|e| Error::Io(e.into()))?;
            Ok(writeln!(w)?)
        })?;
        self.write("holder.csv", |w| Ok(w.write_all(report.to_csv().as_bytes())?))?;
        let (case, target) = if bounded {
            ("fitted_alpha_vs_bounded_prediction", predicted.case_a.min(1.0))
        } else {
            ("fitted_alpha_vs_singular_prediction", predicted.case_b)
        };
        self.check(Check::at_least(case, report.fitted_alpha, 0.9 * target, 0.0));
        if bounded {
            self.check(Check::at_least("fit_r2", report.r2, 0.9, 0.0));
        }
        Ok(())
    }

    fn capacity(&mut self) -> Result<(), RunError> {
        let dom = self.lattice()?;
        let scfg = self.cfg.solve_config();
        let grid = volume_capacity_check(&dom, &self.cfg.radii, &scfg).step("lattice capacities")?;
        self.write("capacity.csv", |w| grid.write_csv(w))?;
        self.check(Check::at_most("volume_capacity_spread", spread(&grid), 10.0, 0.0));
        if let DomainKind::Ball { n, radius } = self.cfg.domain {
            let radial = volume_capacity_radial(n, self.cfg.m, radius, &self.cfg.radii).step("radial capacities")?;
            self.write("capacity_radial.csv", |w| radial.write_csv(w))?;
            self.check(Check::at_most(
                "radial_volume_capacity_spread",
                spread(&radial),
                10.0,
                0.0,
            ));
        }
        Ok(())
    }

    fn stability(&mut self) -> Result<(), RunError> {
        let inputs = self.cfg.exponent_inputs().map_err(RunError::Invalid)?;
        let dom = self.lattice()?;
        let scfg = self.cfg.solve_config();
        let f = self.density_grid(&dom);
        let phi = self.solve_on(&dom, &f)?;
        // bump of radius half the inradius, vanishing near the boundary
        let r0 = 0.5 * dom.spec().inradius();
        let bump = GridFunction::from_fn(&dom, |z| {
            let b = (1.0 - z.iter().map(|x| x * x).sum::<f64>() / (r0 * r0)).max(0.0);
            b * b
        });
        let mut sublevel_rows = Vec::new();
        let mut rows = Vec::new();
        let mut worst: f64 = 0.0;
        for &eps in &self.cfg.amplitudes.clone() {
            let psi = phi.zip_with(&bump, |p, q| p + eps * q).step("perturbation")?;
            for _ in 0..3 {
                let s = self.rng.gen_range(0.0..0.5 * eps);
                let t = self.rng.gen_range(0.25 * eps..=0.5 * eps);
                let r = sublevel_capacity_check(&phi, &psi, &f, s, t, &scfg).step("sublevel capacity")?;
                worst = worst.max(if r.lhs == 0.0 {
                    0.0
                } else if r.rhs == 0.0 {
                    f64::INFINITY
                } else {
                    r.lhs / r.rhs
                });
                sublevel_rows.push((eps, r));
            }
            rows.push((eps, stability_ratio(&phi, &psi, &inputs, 0.9).step("stability ratio")?));
        }
        self.write("sublevel.csv", |w| {
            writeln!(w, "epsilon,s,t,lhs,rhs")?;
            for (eps, r) in &sublevel_rows {
                writeln!(w, "{eps},{:e},{:e},{:e},{:e}", r.s, r.t, r.lhs, r.rhs)?;
            }
            Ok(())
        })?;
        self.write("stability.csv", |w| write_stability_csv(w, &rows))?;
        self.check(Check::at_most("sublevel_lhs_over_rhs", worst, 1.0, 0.1));
        let mut ratios: Vec<f64> = rows.iter().map(|(_, r)| r.ratio).collect();
        ratios.sort_by(f64::total_cmp);
        let median = ratios[ratios.len() / 2];
        let max = ratios[ratios.len() - 1];
        let rel = if max == 0.0 { 0.0 } else { max / median };
        self.check(Check::at_most("stability_ratio_over_median", rel, 10.0, 0.0));
        Ok(())
    }

    fn barriers(&mut self) -> Result<(), RunError> {
        let spec = self.spec()?;
        let dom = self.lattice()?;
        let phi_spec = self.cfg.boundary.clone();
        let phi = phi_spec.as_fn();
        let points = sample_boundary(&spec, self.cfg.boundary_samples);
        let samples = BoundarySample::new(&spec, points.clone(), &phi).step("boundary samples")?;
        self.write("boundary_samples.csv", |w| samples.write_csv(w))?;
        let two_alpha = phi_spec.holder_exponent();
        let mut params = BarrierParams {
            m_norm: samples.holder_norm(two_alpha),
            k: 1.0,
            alpha: two_alpha / 2.0,
            tau: 0.0,
            kind: BarrierKind::MshB,
        };
        params.k = choose_k(&dom, &samples, &params).step("choose K")?;

        let picks = sample(&mut self.rng, points.len(), points.len().min(8)).into_vec();
        let (mut passed, mut total) = (0, 0);
        let mut pin: f64 = 0.0;
        let mut above = f64::NEG_INFINITY;
        for k in picks {
            let xi = &points[k];
            let b = msh_barrier(&spec, &phi, xi, &params).step("barrier")?;
            let cc = msh_cone_check(&b, &dom, self.cfg.m).step("cone check")?;
            passed += cc.passed;
            total += cc.nodes;
            pin = pin.max((b.value(xi) - phi(xi)).abs());
            for (p, v) in samples.points.iter().zip(&samples.values) {
                above = above.max(b.value(p) - v);
            }
        }
        self.check(Check::at_least(
            "cone_pass_fraction",
            passed as f64 / total.max(1) as f64,
            1.0,
            0.0,
        ));
        self.check(Check::at_most("pinning_error", pin, 0.0, 0.0));
        self.check(Check::at_most("barrier_above_data", above, 0.0, 1e-6));

        let (env, _) = barrier_envelope(&dom, &samples, &params).step("barrier envelope")?;
        self.save_grid("envelope.grid", &env, "b")?;
        let perron = perron_envelope(&dom, &phi, &self.cfg.solve_config()).step("perron envelope")?;
        self.save_grid("solution.grid", &perron, "u")?;
        let excess = dom
            .masked()
            .iter()
            .map(|&i| env.get(i) - perron.get(i))
            .fold(f64::NEG_INFINITY, f64::max);
        let h = self.cfg.h;
        self.check(Check::at_most("envelope_below_perron", excess, 0.0, 10.0 * h * h));
        Ok(())
    }

    /// Fast invariant suite on coarse lattices.
    fn verify(&mut self) -> Result<(), RunError> {
        let abs2 = |z: &[f64]| z.iter().map(|x| x * x).sum::<f64>();
        let ball = |n: usize, h: f64| make_domain(&DefiningFunction::ball(n, 1.0).unwrap(), h).step("build lattice");

        let mut worst: f64 = 0.0;
        for (n, m) in [(2, 1), (2, 2), (3, 1), (3, 2), (3, 3)] {
            let dom = ball(n, 0.25)?;
            let u = GridFunction::from_fn(&dom, abs2);
            for &i in dom.interior() {
                worst = worst.max((hessian_operator_value(&u, i, m).step("operator")? - 1.0).abs());
            }
        }
        self.check(Check::at_most("normalization_anchor", worst, 0.0, 1e-10));

        let h = 0.25;
        let dom = ball(2, h)?;
        let cfg = SolveConfig::new(2);
        let u = dirichlet_solve(&dom, &GridFunction::constant(&dom, 1.0), &|_| 0.0, &cfg).step("dirichlet solve")?;
        let err = dom
            .masked()
            .iter()
            .map(|&i| (u.get(i) - abs2(&dom.coords(i)) + 1.0).abs())
            .fold(0.0, f64::max);
        self.check(Check::at_most("grid_exact_solution", err, 0.0, 10.0 * h * h));

        let p = radial_solve(3, 2, 1.0, &|t| 20.0 / 3.0 * t * t, 1.0, 200).step("radial solve")?;
        let err = p
            .knots
            .iter()
            .zip(&p.g)
            .map(|(t, g)| (g - t * t).abs())
            .fold(0.0, f64::max);
        self.check(Check::at_most("radial_exact_solution", err, 0.0, 5e-3));

        // f₁ ≤ f₂ with the same data gives u₂ ≤ u₁
        let (a, c) = (self.rng.gen_range(0.0..2.0), self.rng.gen_range(0.1..1.0));
        let f1 = GridFunction::from_fn(&dom, |z| 1.0 + a * abs2(z));
        let f2 = f1.map(|x| x + c);
        let u1 = dirichlet_solve(&dom, &f1, &|z| z[0], &cfg).step("dirichlet solve")?;
        let u2 = dirichlet_solve(&dom, &f2, &|z| z[0], &cfg).step("dirichlet solve")?;
        let excess = dom
            .masked()
            .iter()
            .map(|&i| u2.get(i) - u1.get(i))
            .fold(f64::NEG_INFINITY, f64::max);
        self.check(Check::at_most("comparison_principle", excess, 0.0, 10.0 * h * h));

        let env = perron_envelope(&dom, &|z| z[0], &cfg).step("perron envelope")?;
        let err = dom
            .masked()
            .iter()
            .map(|&i| (env.get(i) - dom.coords(i)[0]).abs())
            .fold(0.0, f64::max);
        self.check(Check::at_most("pluriharmonic_envelope", err, 0.0, 1e-6));

        let exact = [
            (s_infinity(1.0, 1.0, 1.0).step("s_infinity")?, 4.0),
            (s_infinity(1.0, 1.0, 2.0).step("s_infinity")?, 8.0 / 3.0),
            (s_infinity(0.0, 0.7, 1.5).step("s_infinity")?, 0.0),
        ];
        let err = exact.iter().map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        self.check(Check::at_most("s_infinity_examples", err, 0.0, 1e-15));

        let h = 0.125;
        let dom = ball(2, h)?;
        let delta = 2.0 * h;
        let lin = GridFunction::from_fn(&dom, |z| z[0]);
        let s = sup_convolution(&lin, delta).step("sup-convolution")?;
        let avg = ball_average(&lin, delta).step("ball average")?;
        let (mut es, mut ea, mut order): (f64, f64, f64) = (0.0, 0.0, f64::NEG_INFINITY);
        for i in omega_delta(&dom, delta) {
            let x = dom.coords(i)[0];
            es = es.max((s.get(i) - x - delta).abs());
            ea = ea.max((avg.get(i) - x).abs());
            order = order.max(avg.get(i) - s.get(i));
        }
        self.check(Check::at_most("sup_convolution_linear", es, 0.0, 10.0 * h * h));
        self.check(Check::at_most("ball_average_linear", ea, 0.0, 10.0 * h * h));
        self.check(Check::at_most("average_below_sup", order, 0.0, 0.0));
        Ok(())
    }
}

fn spread(r: &VolumeCapacityReport) -> f64 {
    let hi = r.ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = r.ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

fn write_profile<W: Write>(w: &mut W, p: &RadialProfile) -> hessian_core::Result<()> {
    writeln!(w, "t,g,slope")?;
    for i in 0..p.knots.len() {
        writeln!(w, "{},{:e},{:e}", p.knots[i], p.g[i], p.slope[i])?;
    }
    Ok(())
}

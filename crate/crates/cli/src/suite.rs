//! Acceptance criteria 1–13. Criterion 14 (byte-identical reruns) compares two
//! `verify` invocations and lives outside the suite.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use serde_json::{json, Value};

use negcurv::green::{
    annulus_l2_decay, coarea_identity_check, default_flux_thresholds, flux_statistics,
    gradient_estimate_check, inclusion_checks, lower_envelope_check, pointwise_bounds_scan,
    radial_green, radial_kernel, GreenKernel,
};
use negcurv::heat::{ball_lambda, green_from_heat, heat_evolve, l2_decay_check, HeatConfig};
use negcurv::numerics::solve::solve_dirichlet;
use negcurv::poisson::certificates::BARRIER_TOLERANCE;
use negcurv::poisson::routes::{RADIAL_RESIDUAL_LIMIT, ROUTE_AGREEMENT_TOLERANCE};
use negcurv::poisson::series::CAUCHY_LIMIT;
use negcurv::poisson::{
    barrier_check, claim_bound, decay_certificate, growth_certificate, levelset_estimate_sweep, m0,
    manufactured_solution, route_agreement, series_tail_check, solve_exhaustion,
    solve_green_integral, solve_radial, DecayingSource, ExhaustionRun,
};
use negcurv::ricciflow::{
    fixed_point_check, refinement_check, run_flow, FlowConfig, Scheme, CONVERGENCE_TARGET,
    FIXED_POINT_LIMIT, REFINEMENT_LIMIT,
};
use negcurv::spectrum::lambda1_exhaustion;
use negcurv::{discrete_laplacian, GridSpec, WarpedModel};

use crate::cache::KernelCache;
use crate::config::Profile;
use crate::report::{checks_json, Check};

pub const CRITERIA: [(u32, &str); 13] = [
    (1, "radial Green oracle"),
    (2, "spectral gap"),
    (3, "level-set flux invariance"),
    (4, "annulus L2 decay"),
    (5, "co-area identity"),
    (6, "pointwise lower envelope"),
    (7, "superlevel inclusion and heat-route Green mass"),
    (8, "heat L2 decay"),
    (9, "Poisson route agreement"),
    (10, "barrier inequality"),
    (11, "decay and growth certificates"),
    (12, "level-set series machinery"),
    (13, "Ricci flow convergence"),
];

/// Largest radius any suite model is certified to.
const CERTIFY_RADIUS: f64 = 140.0;

/// Grid and run sizes per profile.
#[derive(Debug, Clone, Serialize)]
pub struct Params {
    pub oracle_nr: usize,
    pub spectrum_nr: usize,
    pub kernel_nr: usize,
    pub lower_poles: Vec<f64>,
    pub heat_poles: Vec<f64>,
    pub exhaustion_radius: f64,
    pub exhaustion_count: usize,
    pub green_radius: f64,
    pub green_poles: Vec<f64>,
    pub manufactured_nr: Vec<usize>,
    pub series_radius: f64,
    pub series_nr: usize,
    pub series_poles: Vec<f64>,
    pub flow_nr: usize,
}

impl Params {
    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Full => Params {
                oracle_nr: 768,
                spectrum_nr: 384,
                kernel_nr: 768,
                lower_poles: vec![2.0, 3.0, 4.0, 5.0],
                heat_poles: vec![0.0, 1.0, 2.0, 3.0],
                exhaustion_radius: 128.0,
                exhaustion_count: 4,
                green_radius: 64.0,
                green_poles: vec![0.0, 2.0, 3.0, 4.0, 5.0],
                manufactured_nr: vec![64, 128, 256, 512],
                series_radius: 30.0,
                series_nr: 480,
                series_poles: vec![0.0, 1.0, 2.0, 3.0],
                flow_nr: 512,
            },
            Profile::Quick => Params {
                oracle_nr: 384,
                spectrum_nr: 384,
                kernel_nr: 384,
                lower_poles: vec![2.0, 3.0, 4.0],
                heat_poles: vec![0.0, 1.0, 2.0],
                exhaustion_radius: 128.0,
                exhaustion_count: 4,
                green_radius: 32.0,
                green_poles: vec![0.0, 3.0],
                manufactured_nr: vec![64, 128, 256],
                series_radius: 24.0,
                series_nr: 384,
                series_poles: vec![0.0, 2.0],
                flow_nr: 128,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u32,
    pub title: String,
    pub checks: Vec<Check>,
    pub details: Value,
    pub error: Option<String>,
    pub pass: bool,
}

impl CriterionReport {
    pub fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "title": self.title,
            "pass": self.pass,
            "error": self.error,
            "checks": checks_json(&self.checks),
            "details": self.details,
        })
    }
}

#[derive(Default)]
struct Outcome {
    checks: Vec<Check>,
    details: serde_json::Map<String, Value>,
}

impl Outcome {
    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn detail<T: Serialize>(&mut self, key: &str, value: &T) {
        self.details.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }
}

pub struct Suite {
    pub profile: Profile,
    pub params: Params,
    pub cache: KernelCache,
    h2: WarpedModel,
    perturbed: WarpedModel,
    poisson_runs: Mutex<HashMap<String, Arc<ExhaustionRun>>>,
}

fn h2_green(r: f64) -> f64 {
    (1.0 / (0.5 * r).tanh()).ln() / (2.0 * PI)
}

fn h3_green(r: f64) -> f64 {
    (1.0 / r.tanh() - 1.0) / (4.0 * PI)
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (max - min) / mean
}

impl Suite {
    pub fn new(profile: Profile, cache: KernelCache) -> anyhow::Result<Self> {
        Ok(Suite {
            profile,
            params: Params::for_profile(profile),
            cache,
            h2: WarpedModel::hyperbolic(2, -1.0)?.certify(CERTIFY_RADIUS)?,
            perturbed: WarpedModel::perturbed(2, 0.1)?.certify(CERTIFY_RADIUS)?,
            poisson_runs: Mutex::new(HashMap::new()),
        })
    }

    pub fn run_all(&self) -> Vec<CriterionReport> {
        CRITERIA.iter().map(|&(id, _)| self.run(id)).collect()
    }

    pub fn run(&self, id: u32) -> CriterionReport {
        let title = CRITERIA
            .iter()
            .find(|(i, _)| *i == id)
            .map(|(_, t)| t.to_string())
            .unwrap_or_else(|| format!("unknown criterion {id}"));
        let mut out = Outcome::default();
        let result = match id {
            1 => self.c1(&mut out),
            2 => self.c2(&mut out),
            3 => self.c3(&mut out),
            4 => self.c4(&mut out),
            5 => self.c5(&mut out),
            6 => self.c6(&mut out),
            7 => self.c7(&mut out),
            8 => self.c8(&mut out),
            9 => self.c9(&mut out),
            10 => self.c10(&mut out),
            11 => self.c11(&mut out),
            12 => self.c12(&mut out),
            13 => self.c13(&mut out),
            _ => Err(anyhow::anyhow!("no criterion {id}")),
        };
        let error = result.err().map(|e| format!("{e:#}"));
        let pass = error.is_none() && !out.checks.is_empty() && out.checks.iter().all(|c| c.pass);
        CriterionReport {
            id,
            title,
            checks: out.checks,
            details: Value::Object(out.details),
            error,
            pass,
        }
    }

    fn largest(
        &self,
        model: &WarpedModel,
        spec: &GridSpec,
        pole: f64,
    ) -> anyhow::Result<GreenKernel> {
        let (mut family, _) = self.cache.family(model, spec, pole)?;
        family
            .pop()
            .ok_or_else(|| anyhow::anyhow!("empty exhaustion family"))
    }

    /// Kernels shared by criteria 3–5: radial kernels of both models and
    /// exhaustion kernels at and off the model pole.
    fn shipped_kernels(&self) -> anyhow::Result<Vec<(String, GreenKernel)>> {
        let spec = GridSpec::new(12.0, self.params.kernel_nr, 64, 1);
        let mut out = Vec::new();
        for (name, model) in [("hyperbolic2", &self.h2), ("perturbed", &self.perturbed)] {
            out.push((
                format!("{name} radial"),
                radial_kernel(&spec.build(model)?)?,
            ));
            for pole in [0.0, 3.0] {
                out.push((
                    format!("{name} exhaustion x={pole}"),
                    self.largest(model, &spec, pole)?,
                ));
            }
        }
        Ok(out)
    }

    fn c1(&self, out: &mut Outcome) -> anyhow::Result<()> {
        let h3 = WarpedModel::hyperbolic(3, -1.0)?.certify(20.0)?;
        let mut worst2 = 0.0f64;
        for r in [0.2, 0.5, 1.0, 2.0, 4.0, 6.0] {
            worst2 = worst2.max((radial_green(&self.h2, r)? - h2_green(r)).abs() / h2_green(r));
        }
        let mut worst3 = 0.0f64;
        for r in [0.5, 1.0, 2.0, 4.0] {
            worst3 = worst3.max((radial_green(&h3, r)? - h3_green(r)).abs() / h3_green(r));
        }
        out.check(Check::at_most(
            "quadrature relative error on H2",
            worst2,
            1e-6,
        ));
        out.check(Check::at_most(
            "quadrature relative error on H3",
            worst3,
            1e-6,
        ));
        // The Dirichlet kernel of B(R) on H2 is G − G(R).
        let radius = 12.0;
        let spec = GridSpec::new(radius, self.params.oracle_nr, 64, 4);
        let kernel = self.largest(&self.h2, &spec, 0.0)?;
        let grid = kernel.grid().clone();
        let shift = h2_green(radius);
        let mut worst = 0.0f64;
        for i in 1..=grid.nr {
            let r = grid.rho(i);
            if (0.2..=6.0).contains(&r) {
                for j in 0..grid.ntheta {
                    let v = kernel.value(grid.node(i, j)) + shift;
                    worst = worst.max((v - h2_green(r)).abs() / h2_green(r));
                }
            }
        }
        out.check(Check::at_most(
            "grid exhaustion relative error on [0.2, 6]",
            worst,
            0.01,
        ));
        out.detail(
            "grid",
            &json!({"R": radius, "nr": grid.nr, "ntheta": grid.ntheta}),
        );
        Ok(())
    }

    fn c2(&self, out: &mut Outcome) -> anyhow::Result<()> {
        let grid = GridSpec::new(12.0, self.params.spectrum_nr, 32, 3).build(&self.h2)?;
        let rep = lambda1_exhaustion(&self.h2, &grid, &discrete_laplacian(&grid))?;
        out.check(Check::within(
            "extrapolated lambda1",
            rep.extrapolated,
            0.25,
            0.02,
        ));
        let lowest = rep
            .estimates
            .iter()
            .map(|e| e.lambda)
            .fold(rep.extrapolated, f64::min);
        out.check(Check::at_least(
            "lowest lambda1 estimate",
            lowest,
            0.95 * rep.analytic_lower,
        ));
        out.detail("spectrum", &rep);
        Ok(())
    }

    fn c3(&self, out: &mut Outcome) -> anyhow::Result<()> {
        let mut stats = Vec::new();
        for (name, k) in self.shipped_kernels()? {
            let thresholds = default_flux_thresholds(&k);
            out.check(Check::at_least(
                format!("{name}: threshold count"),
                thresholds.len() as f64,
                5.0,
            ));
            let s = flux_statistics(&k, &thresholds)?;
            out.check(Check::at_most(
                format!("{name}: flux coefficient of variation"),
                s.coefficient_of_variation,
                0.05,
            ));
            if name.ends_with("radial") {
                out.check(Check::within(
                    format!("{name}: mean flux"),
                    s.mean,
                    1.0,
                    0.02,
                ));
            }
            stats.push(json!({"kernel": name, "flux": s}));
        }
        out.detail("kernels", &stats);
        Ok(())
    }

    fn c4(&self, out: &mut Outcome) -> anyhow::Result<()> {
        let radii: Vec<f64> = (2..=8).map(f64::from).collect();
        let grid = GridSpec::new(12.0, self.params.spectrum_nr, 32, 3).build(&self.perturbed)?;
        let lambda =
            lambda1_exhaustion(&self.perturbed, &grid, &discrete_laplacian(&grid))?.extrapolated;
        let mut fits = Vec::new();
        for (name, k) in self.shipped_kernels()? {
            if name.ends_with("radial") {
                continue;
            }
            if name.starts_with("hyperbolic2") {
                let fit = annulus_l2_decay(&k, &radii, 0.25, 0.1)?;
                out.check(Check::within(
                    format!("{name}: annulus L2 exponent"),
                    fit.slope,
                    1.0,
                    0.1,
                ));
                fits.push(json!({"kernel": name, "fit": fit}));
            } else {
                let fit = annulus_l2_decay(&k, &radii, lambda, 0.1)?;
                out.check(Check::at_least(
                    format!("{name}: annulus L2 exponent"),
                    fit.slope,
                    fit.required,
                ));
                fits.push(json!({"kernel": name, "fit": fit}));
            }
        }
        out.detail("perturbed_lambda1", &lambda);
        out.detail("fits", &fits);
        Ok(())
    }

    fn c5(&self, out: &mut Outcome) -> anyhow::Result<()> {
        let delta = (-1.0f64).exp();
        let mut reports = Vec::new();
        for (name, k) in self.shipped_kernels()? {
            for eps in [1e-2, 1e-3] {
                let rep = coarea_identity_check(&k, delta, eps)?;
                out.check(Check::at_most(
                    format!("{name}: co-area relative error (eps={eps})"),
                    rep.relative_error,
                    0.08,
                ));
                reports.push(json!({"kernel": name, "coarea": rep}));
            }
        }
        out.detail("reports", &reports);
        Ok(())
    }

    /// Lower-envelope kernels with their fitted `(A, B)` and per-kernel `C₀`.
    fn envelope_family(
        &self,
        model: &WarpedModel,
    ) -> anyhow::Result<(Vec<GreenKernel>, f64, f64, Vec<f64>)> {
        let spec = GridSpec::new(8.0, 256, 64, 1);
        let kernels = self
            .params
            .lower_poles
            .iter()
            .map(|&p| self.largest(model, &spec, p))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let fit = pointwise_bounds_scan(&kernels)?;
        let c0 = kernels
            .iter()
            .map(|k| gradient_estimate_check(k, 2).map(|g| g.c0))
            .collect::<negcurv::Result<Vec<_>>>()?;
        Ok((kernels, fit.a, fit.b, c0))
    }

    fn c6(&self, out: &mut Outcome) -> anyhow::Result<()> {
        for (name, model) in [("hyperbolic2", &self.h2), ("perturbed", &self.perturbed)] {
            let (kernels, a, b, c0) = self.envelope_family(model)?;
            let mut envelopes = Vec::new();
            for (k, c) in kernels.iter().zip(&c0) {
                let env = lower_envelope_check(k, a, b, *c)?;
                out.check(Check::count_zero(
                    format!("{name} x={}: lower envelope violations", k.pole_radius),
                    env.violations,
                ));
                envelopes.push(env);
            }
            if name == "hyperbolic2" {
                out.check(Check::within("hyperbolic2: fitted B", b, 0.0, 0.05));
            }
            out.detail(
                name,
                &json!({"A": a, "B": b, "C0": c0, "envelopes": envelopes}),
            );
        }
        Ok(())
    }

    fn c7(&self, out: &mut Outcome) -> anyhow::Result<()> {
        for (name, model) in [("hyperbolic2", &self.h2), ("perturbed", &self.perturbed)] {
            let (kernels, a, b, _) = self.envelope_family(model)?;
            for k in &kernels {
                let inc = inclusion_checks(k, a, b);
                out.check(Check::count_zero(
                    format!("{name} x={}: inclusion violations", k.pole_radius),
                    inc.superlevel_violations + inc.sublevel_violations,
                ));
            }
        }
        let mut masses = Vec::new();
        let mut reports = Vec::new();
        for &p in &self.params.heat_poles {
            let grid = GridSpec::new(1.0, 64, 32, 1)
                .centered_at(p)
                .build(&self.h2)?;
            let op = discrete_laplacian(&grid);
            let traj = heat_evolve(&op, &HeatConfig::default())?;
            let (_, hg) = green_from_heat(&op, &traj)?;
            out.check(Check::at_most(
                format!("x={p}: heat vs elliptic ball Green mass"),
                hg.mass_agreement,
                0.03,
            ));
            masses.push(hg.mass);
            reports.push(json!({"pole": p, "heat_green": hg}));
        }
        out.check(Check::at_most(
            "ball Green mass spread across poles",
            spread(&masses),
            0.05,
        ));
        out.detail("heat", &reports);
        Ok(())
    }

    fn c8(&self, out: &mut Outcome) -> anyhow::Result<()> {
        let grid = GridSpec::new(1.0, 64, 32, 1).build(&self.h2)?;
        let op = discrete_laplacian(&grid);
        let traj = heat_evolve(&op, &HeatConfig::default())?;
        let decay = l2_decay_check(&traj, 0.25, ball_lambda(&op)?)?;
        out.check(Check::at_least("L2 decay rate", decay.rate, decay.required));
        out.check(Check::at_most(
            "relative gap to 2 lambda1(ball)",
            decay.relative_to_reference,
            0.1,
        ));
        out.detail("decay", &decay);
        Ok(())
    }

    fn sources(&self) -> anyhow::Result<Vec<DecayingSource>> {
        Ok(vec![
            DecayingSource::powerlaw(1.0, 1.0)?,
            DecayingSource::manufactured(&self.h2)?,
            DecayingSource::powerlaw(1.0, 2.0)?,
        ])
    }

    fn exhaustion_run(
        &self,
        source: &DecayingSource,
        radius: f64,
        count: usize,
    ) -> anyhow::Result<Arc<ExhaustionRun>> {
        let key = format!("{}|{radius}|{count}", source.label);
        if let Some(run) = self.poisson_runs.lock().expect("run map").get(&key) {
            return Ok(run.clone());
        }
        let grid = GridSpec::new(radius, (8.0 * radius) as usize, 32, count).build(&self.h2)?;
        let run = Arc::new(solve_exhaustion(&discrete_laplacian(&grid), source)?);
        self.poisson_runs
            .lock()
            .expect("run map")
            .insert(key, run.clone());
        Ok(run)
    }

    fn c9(&self, out: &mut Outcome) -> anyhow::Result<()> {
        let p = &self.params;
        let mut agreements = Vec::new();
        for source in self.sources()? {
            let run = self.exhaustion_run(&source, p.exhaustion_radius, p.exhaustion_count)?;
            let ag = route_agreement(&self.h2, &source, run.limit())?;
            out.check(Check::at_most(
                format!("{}: exhaustion vs radial route", source.label),
                ag.relative,
                ROUTE_AGREEMENT_TOLERANCE,
            ));
            let spec = GridSpec::new(p.green_radius, (8.0 * p.green_radius) as usize, 32, 2);
            let families = p
                .green_poles
                .iter()
                .map(|&x| self.cache.family(&self.h2, &spec, x).map(|(f, _)| f))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let green = solve_green_integral(&families, &source, &p.green_poles)?;
            let ag_green = route_agreement(&self.h2, &source, &green)?;
            out.check(Check::at_most(
                format!("{}: Green-integral vs radial route", source.label),
                ag_green.relative,
                ROUTE_AGREEMENT_TOLERANCE,
            ));
            agreements.push(
                json!({"source": source.label, "exhaustion": ag, "green_integral": ag_green}),
            );
        }
        let powerlaw = DecayingSource::powerlaw(1.0, 1.0)?;
        let radial = solve_radial(&self.h2, &powerlaw, 20.0, 0.01)?;
        let residual = radial.residual.unwrap_or(f64::INFINITY);
        out.check(Check::at_most(
            "radial route ODE residual",
            residual,
            RADIAL_RESIDUAL_LIMIT,
        ));
        let source = DecayingSource::manufactured(&self.h2)?;
        let radius = 8.0;
        let mut errors = Vec::new();
        for &nr in &p.manufactured_nr {
            let grid = GridSpec::new(radius, nr, 32, 1).build(&self.h2)?;
            let u = solve_dirichlet(&discrete_laplacian(&grid), &source.field(&grid)?, radius)?;
            let boundary = manufactured_solution(radius);
            let err = (0..grid.n_nodes())
                .filter(|&k| grid.model_radius(k) < radius - 1e-9)
                .map(|k| {
                    (u.values[k] - (manufactured_solution(grid.model_radius(k)) - boundary)).abs()
                })
                .fold(0.0, f64::max);
            errors.push(err);
        }
        let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
        out.check(Check::at_least(
            "manufactured convergence order",
            min_order,
            1.8,
        ));
        out.detail("agreements", &agreements);
        out.detail(
            "manufactured",
            &json!({"nr": p.manufactured_nr, "errors": errors, "orders": orders}),
        );
        Ok(())
    }

    fn c10(&self, out: &mut Outcome) -> anyhow::Result<()> {
        let radii: Vec<f64> = (1..=64 * 64).map(|i| i as f64 / 64.0).collect();
        let mut reports = Vec::new();
        for (name, model) in [("hyperbolic2", &self.h2), ("perturbed", &self.perturbed)] {
            for eps in [0.5, 1.0, 2.0] {
                let rep = barrier_check(model, eps, &radii)?;
                out.check(Check::at_most(
                    format!("{name} eps={eps}: max barrier value"),
                    rep.max_value,
                    BARRIER_TOLERANCE,
                ));
                reports.push(json!({"model": name, "barrier": rep}));
            }
        }
        out.detail("reports", &reports);
        Ok(())
    }

    fn c11(&self, out: &mut Outcome) -> anyhow::Result<()> {
        let p = &self.params;
        let source = DecayingSource::powerlaw(1.0, 1.0)?;
        let big = self.exhaustion_run(&source, p.exhaustion_radius, p.exhaustion_count)?;
        let small = self.exhaustion_run(&source, 0.5 * p.exhaustion_radius, 1)?;
        let cert = decay_certificate(
            small.members.last().expect("member"),
            1.0,
            Some(big.members.last().expect("member")),
        );
        out.check(Check::holds(
            "sup (1+r)|u| finite",
            cert.c_tilde.is_finite(),
        ));
        out.check(Check::at_most(
            "relative change of sup (1+r)|u| under doubling",
            cert.relative_change.unwrap_or(f64::INFINITY),
            0.1,
        ));
        out.detail("decay", &cert);
        let mut sources = self.sources()?;
        sources.push(DecayingSource::bump(1.0, 2.0)?);
        let mut fits = Vec::new();
        for s in &sources {
            let run = self.exhaustion_run(s, p.exhaustion_radius, p.exhaustion_count)?;
            let fit = growth_certificate(run.limit())?;
            out.check(Check::within(
                format!("{}: growth slope B", s.label),
                fit.b,
                0.0,
                0.05,
            ));
            fits.push(json!({"source": s.label, "growth": fit}));
        }
        out.detail("growth", &fits);
        Ok(())
    }

    fn c12(&self, out: &mut Outcome) -> anyhow::Result<()> {
        let p = &self.params;
        let spec = GridSpec::new(p.series_radius, p.series_nr, 32, 1);
        let kernels = p
            .series_poles
            .iter()
            .map(|&x| self.largest(&self.h2, &spec, x))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let fit = pointwise_bounds_scan(&kernels)?;
        let source = DecayingSource::powerlaw(1.0, 2.0)?;
        let lambda = 0.25;
        let mut poles = Vec::new();
        for k in &kernels {
            let x = k.pole_radius;
            let c0 = gradient_estimate_check(k, 2)?.c0;
            let start = m0(fit.a, fit.b, c0, x);
            let sweep = levelset_estimate_sweep(k, &source, start..=start + 10, lambda)?;
            let max_ratio = sweep.iter().map(|e| e.ratio).fold(0.0, f64::max);
            let bound = claim_bound(1.0, lambda, (-1.0f64).exp());
            out.check(Check::at_most(
                format!("x={x}: level-set estimate ratio"),
                max_ratio,
                bound,
            ));
            let tail = series_tail_check(k, &source, fit.a, fit.b, c0, 10)?;
            out.check(Check::at_most(
                format!("x={x}: tail Cauchy difference"),
                tail.cauchy,
                CAUCHY_LIMIT,
            ));
            out.check(Check::count_zero(
                format!("x={x}: band-to-distance inclusion violations"),
                tail.inclusion_violations,
            ));
            poles.push(
                json!({"pole": x, "C0": c0, "m0": start, "max_ratio": max_ratio, "tail": tail}),
            );
        }
        out.detail("fit", &fit);
        out.detail("poles", &poles);
        Ok(())
    }

    fn c13(&self, out: &mut Outcome) -> anyhow::Result<()> {
        let cfg = FlowConfig {
            nr: self.params.flow_nr,
            ..FlowConfig::default()
        };
        for scheme in [Scheme::Explicit, Scheme::SemiImplicit] {
            let fp = fixed_point_check(
                &FlowConfig {
                    scheme,
                    ..cfg.clone()
                },
                100,
            )?;
            out.check(Check::at_most(
                format!("{scheme:?} fixed point change per step"),
                fp.max_change,
                FIXED_POINT_LIMIT,
            ));
        }
        let traj = run_flow(&cfg)?;
        let report = traj.report();
        for (r, d) in report.monitor_radii.iter().zip(&report.final_sup_dev) {
            out.check(Check::at_most(
                format!("sup |R+1| on B({r}) at t={}", cfg.t_final),
                *d,
                CONVERGENCE_TARGET,
            ));
        }
        let refinement = refinement_check(&cfg, &traj)?;
        out.check(Check::at_most(
            "relative change under halving (dt, h)",
            refinement.relative_change,
            REFINEMENT_LIMIT,
        ));
        out.detail("config", &cfg);
        out.detail("flow", &report);
        out.detail("refinement", &refinement);
        Ok(())
    }
}

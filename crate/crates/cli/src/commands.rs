//! Subcommands. Each writes `manifest.json`, a `*.report.json` naming every
//! checked invariant, and CSV series; it returns whether all checks passed.

use serde::Serialize;
use serde_json::{json, Value};

use negcurv::green::{
    default_flux_thresholds, flux_statistics, gradient_estimate_check, inclusion_checks,
    lower_envelope_check, pointwise_bounds_scan,
};
use negcurv::heat::{ball_lambda, green_from_heat, heat_evolve, l2_decay_check, HeatConfig};
use negcurv::numerics::grid::MIN_NR;
use negcurv::poisson::routes::ROUTE_AGREEMENT_TOLERANCE;
use negcurv::poisson::{
    decay_certificate, growth_certificate, route_agreement, solve_exhaustion, solve_green_integral,
    solve_radial, DecayingSource, PoissonSolution,
};
use negcurv::ricciflow::{run_flow, CONVERGENCE_TARGET};
use negcurv::spectrum::{lambda1_exhaustion, lambda1_lower_bound, CONSISTENCY_TOLERANCE};
use negcurv::{discrete_laplacian, GridSpec, WarpedModel};

use crate::cache::{KernelCache, CODE_VERSION};
use crate::config::{ensure_out_dir, RunConfig};
use crate::report::{checks_json, failing, write_csv, write_json, Check};
use crate::suite::Suite;

/// Exhaustion radii per grid for `spectrum` and `green`.
const SPECTRUM_RADII: usize = 4;
/// Radial route step for `poisson`.
const RADIAL_STEP: f64 = 0.01;
/// Largest flux coefficient of variation accepted by `green`.
const FLUX_CV_LIMIT: f64 = 0.05;
/// Largest heat/elliptic ball Green mass disagreement accepted by `heat`.
const HEAT_MASS_LIMIT: f64 = 0.03;

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    config: &'a RunConfig,
}

pub fn execute(cfg: &RunConfig) -> anyhow::Result<bool> {
    ensure_out_dir(&cfg.out)?;
    write_json(
        &cfg.out.join("manifest.json"),
        &Manifest {
            version: CODE_VERSION,
            config: cfg,
        },
    )?;
    let pass = match cfg.command.as_str() {
        "spectrum" => spectrum(cfg)?,
        "green" => green(cfg)?,
        "heat" => heat(cfg)?,
        "poisson" => poisson(cfg)?,
        "flow" => flow(cfg)?,
        "verify" => verify(cfg)?,
        other => anyhow::bail!("unknown subcommand '{other}'"),
    };
    Ok(pass)
}

fn cache(cfg: &RunConfig) -> KernelCache {
    KernelCache::new(cfg.cache_dir.clone(), cfg.cache)
}

fn certified(cfg: &RunConfig) -> anyhow::Result<WarpedModel> {
    let reach = cfg.rmax + cfg.poles.iter().copied().fold(0.0, f64::max) + 1.0;
    Ok(cfg.model.clone().certify(reach)?)
}

/// Write `<name>.report.json` and log the failing invariants.
fn finish(cfg: &RunConfig, name: &str, checks: &[Check], details: Value) -> anyhow::Result<bool> {
    let pass = checks.iter().all(|c| c.pass);
    let report = json!({
        "command": cfg.command,
        "pass": pass,
        "checks": checks_json(checks),
        "details": details,
    });
    write_json(&cfg.out.join(format!("{name}.report.json")), &report)?;
    for inv in failing(checks) {
        log::error!("{name}: certificate failed: {inv}");
    }
    Ok(pass)
}

fn spectrum(cfg: &RunConfig) -> anyhow::Result<bool> {
    let model = certified(cfg)?;
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for &x in &cfg.poles {
        let grid = GridSpec::new(cfg.rmax, cfg.nr, cfg.ntheta, SPECTRUM_RADII)
            .centered_at(x)
            .build(&model)?;
        let rep = lambda1_exhaustion(&model, &grid, &discrete_laplacian(&grid))?;
        checks.push(Check::at_least(
            format!("x={x}: extrapolated lambda1 vs (1 - tol) b^2/4"),
            rep.extrapolated,
            (1.0 - CONSISTENCY_TOLERANCE) * rep.analytic_lower,
        ));
        for e in &rep.estimates {
            rows.push(vec![x, e.radius, e.lambda]);
        }
        reports.push(json!({"pole": x, "spectrum": rep}));
    }
    write_csv(
        &cfg.out.join("spectrum.csv"),
        &["pole", "R", "lambda1"],
        &rows,
    )?;
    finish(cfg, "spectrum", &checks, json!({"poles": reports}))
}

fn green(cfg: &RunConfig) -> anyhow::Result<bool> {
    let model = certified(cfg)?;
    let spec = GridSpec::new(cfg.rmax, cfg.nr, cfg.ntheta, 1);
    let cache = cache(cfg);
    let mut kernels = Vec::new();
    for &x in &cfg.poles {
        let (mut family, lookup) = cache.family(&model, &spec, x)?;
        log::info!("pole {x}: cache {lookup:?}");
        kernels.push(
            family
                .pop()
                .ok_or_else(|| anyhow::anyhow!("empty exhaustion family"))?,
        );
    }
    let fit = pointwise_bounds_scan(&kernels)?;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut c0s = Vec::new();
    for k in &kernels {
        let x = k.pole_radius;
        let grad = gradient_estimate_check(k, 2)?;
        let env = lower_envelope_check(k, fit.a, fit.b, grad.c0)?;
        let inc = inclusion_checks(k, fit.a, fit.b);
        let flux = flux_statistics(k, &default_flux_thresholds(k))?;
        let pole_checks = vec![
            Check::count_zero(format!("x={x}: lower envelope violations"), env.violations),
            Check::count_zero(
                format!("x={x}: superlevel/sublevel inclusion violations"),
                inc.superlevel_violations + inc.sublevel_violations,
            ),
            Check::at_most(
                format!("x={x}: level-set flux coefficient of variation"),
                flux.coefficient_of_variation,
                FLUX_CV_LIMIT,
            ),
        ];
        let details = json!({
            "pole": x,
            "gradient": grad,
            "envelope": env,
            "inclusion": inc,
            "flux": flux,
        });
        finish(cfg, &format!("green_x{x}"), &pole_checks, details)?;
        rows.push(vec![
            x,
            grad.c0,
            flux.mean,
            flux.coefficient_of_variation,
            env.margin,
        ]);
        c0s.push(grad.c0);
        checks.extend(pole_checks);
    }
    write_csv(
        &cfg.out.join("green.csv"),
        &["pole", "C0", "flux_mean", "flux_cv", "envelope_margin"],
        &rows,
    )?;
    let c0 = c0s.iter().copied().fold(0.0, f64::max);
    finish(
        cfg,
        "green",
        &checks,
        json!({"fit": fit, "A": fit.a, "B": fit.b, "C0": c0}),
    )
}

fn heat(cfg: &RunConfig) -> anyhow::Result<bool> {
    let model = certified(cfg)?;
    let analytic = lambda1_lower_bound(&model)?;
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for &x in &cfg.poles {
        let grid = GridSpec::new(cfg.rmax, cfg.nr, cfg.ntheta, 1)
            .centered_at(x)
            .build(&model)?;
        let op = discrete_laplacian(&grid);
        let traj = heat_evolve(&op, &HeatConfig::default())?;
        let (_, hg) = green_from_heat(&op, &traj)?;
        let decay = l2_decay_check(&traj, analytic, ball_lambda(&op)?)?;
        checks.push(Check::at_least(
            format!("x={x}: L2 decay rate vs 2 b^2/4"),
            decay.rate,
            decay.required,
        ));
        checks.push(Check::at_most(
            format!("x={x}: relative gap to 2 lambda1(ball)"),
            decay.relative_to_reference,
            0.1,
        ));
        checks.push(Check::at_most(
            format!("x={x}: heat vs elliptic ball Green mass"),
            hg.mass_agreement,
            HEAT_MASS_LIMIT,
        ));
        for (t, mass) in traj.mass_curve(HeatConfig::default().record_every) {
            rows.push(vec![x, t, mass]);
        }
        reports.push(json!({"pole": x, "heat_green": hg, "decay": decay}));
    }
    write_csv(&cfg.out.join("heat.csv"), &["pole", "t", "mass"], &rows)?;
    finish(cfg, "heat", &checks, json!({"poles": reports}))
}

fn poisson(cfg: &RunConfig) -> anyhow::Result<bool> {
    let model = certified(cfg)?;
    let source = DecayingSource::parse(&cfg.source, &model)?;
    let wants = |r: &str| cfg.route == "all" || cfg.route == r;
    let mut checks = Vec::new();
    let mut details = serde_json::Map::new();
    let mut solutions: Vec<(&str, PoissonSolution)> = Vec::new();

    let radial = solve_radial(&model, &source, cfg.rmax, RADIAL_STEP)?;
    if let Some(res) = radial.residual {
        checks.push(Check::at_most(
            "radial route ODE residual",
            res,
            negcurv::poisson::routes::RADIAL_RESIDUAL_LIMIT,
        ));
    }
    let decay = decay_certificate(&radial, source.eps, None);
    checks.push(Check::holds(
        "radial route: sup (1+r)^eps |u| attained in the interior",
        decay.pass,
    ));
    details.insert("decay".into(), serde_json::to_value(&decay)?);
    solutions.push(("radial", radial));

    if wants("exhaustion") {
        let grid = GridSpec::new(cfg.rmax, cfg.nr, cfg.ntheta, 4).build(&model)?;
        let run = solve_exhaustion(&discrete_laplacian(&grid), &source)?;
        details.insert(
            "exhaustion_cauchy".into(),
            serde_json::to_value(&run.cauchy)?,
        );
        solutions.push(("exhaustion", run.limit().clone()));
    }
    if wants("green-integral") {
        // Kernels live on grids of half the radius, as every pole needs its own grid.
        let r = 0.5 * cfg.rmax;
        let spec = GridSpec::new(r, (cfg.nr / 2).max(MIN_NR), cfg.ntheta, 2);
        let cache = cache(cfg);
        let families = cfg
            .poles
            .iter()
            .map(|&x| cache.family(&model, &spec, x).map(|(f, _)| f))
            .collect::<anyhow::Result<Vec<_>>>()?;
        solutions.push((
            "green-integral",
            solve_green_integral(&families, &source, &cfg.poles)?,
        ));
    }
    let mut rows = Vec::new();
    for (name, sol) in &solutions {
        if *name != "radial" {
            let ag = route_agreement(&model, &source, sol)?;
            checks.push(Check::at_most(
                format!("{name} vs radial route, relative difference"),
                ag.relative,
                ROUTE_AGREEMENT_TOLERANCE,
            ));
            details.insert(format!("{name}_agreement"), serde_json::to_value(&ag)?);
        }
        // Green-integral samples sit at the poles only, too close to fit growth.
        if *name != "green-integral" {
            let growth = growth_certificate(sol)?;
            checks.push(Check::within(
                format!("{name}: growth slope B"),
                growth.b,
                0.0,
                0.05,
            ));
            details.insert(format!("{name}_growth"), serde_json::to_value(&growth)?);
        }
        let route_id = match *name {
            "radial" => 0.0,
            "exhaustion" => 1.0,
            _ => 2.0,
        };
        rows.extend(sol.samples.iter().map(|&(r, u)| vec![route_id, r, u]));
    }
    details.insert(
        "routes".into(),
        json!({"0": "radial", "1": "exhaustion", "2": "green-integral"}),
    );
    details.insert("source".into(), json!(source.label));
    write_csv(&cfg.out.join("poisson.csv"), &["route", "r", "u"], &rows)?;
    finish(cfg, "poisson", &checks, Value::Object(details))
}

fn flow(cfg: &RunConfig) -> anyhow::Result<bool> {
    let traj = run_flow(&cfg.flow)?;
    let path = cfg.out.join("flow.csv");
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    crate::config::context_path(std::fs::write(&path, buf), &path)?;
    let report = traj.report();
    let mut checks: Vec<Check> = report
        .monitor_radii
        .iter()
        .zip(&report.final_sup_dev)
        .map(|(r, d)| {
            Check::at_most(
                format!("sup |R+1| on B({r}) at t={}", report.t_final),
                *d,
                CONVERGENCE_TARGET,
            )
        })
        .collect();
    checks.push(Check::holds("initial data certified", report.initial.pass));
    finish(cfg, "flow", &checks, serde_json::to_value(&report)?)
}

fn verify(cfg: &RunConfig) -> anyhow::Result<bool> {
    let suite = Suite::new(cfg.profile, cache(cfg))?;
    let mut criteria = Vec::new();
    for (id, title) in crate::suite::CRITERIA {
        log::info!("criterion {id}: {title}");
        let rep = suite.run(id);
        log::info!("criterion {id}: {}", if rep.pass { "PASS" } else { "FAIL" });
        criteria.push(rep);
    }
    let pass = criteria.iter().all(|c| c.pass);
    let summary = json!({
        "profile": cfg.profile,
        "version": CODE_VERSION,
        "params": suite.params,
        "pass": pass,
        "criteria": criteria.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
    });
    write_json(&cfg.out.join("summary.json"), &summary)?;
    let rows: Vec<Vec<f64>> = criteria
        .iter()
        .map(|c| vec![c.id as f64, if c.pass { 1.0 } else { 0.0 }])
        .collect();
    write_csv(&cfg.out.join("verify.csv"), &["criterion", "pass"], &rows)?;
    for c in criteria.iter().filter(|c| !c.pass) {
        let reason = c
            .error
            .clone()
            .unwrap_or_else(|| failing(&c.checks).join("; "));
        log::error!("criterion {} ({}) failed: {reason}", c.id, c.title);
    }
    Ok(pass)
}

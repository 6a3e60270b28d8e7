//! Named experiments driven by a TOML config, with manifests and
//! tab-separated outputs.
//!
//! Config layout:
//!
//! ```toml
//! kind = "lambda-slope"        # optional when given on the command line
//! seed = 7
//!
//! [model]
//! kind = "quadratic_plus_potential"
//! coupling = "quadratic_kernel"
//! potential_cos = 0.2
//! kernel_cos = -0.5
//! n = 32
//!
//! [assumptions]
//! theta = 0.5
//!
//! [params]
//! dt = 0.02
//! horizons = [8.0, 16.0, 24.0, 32.0]
//! ```

mod manifest;
mod spec;

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use manifest::{compare, Check, DiffReport, FieldDiff, ResultField, RunManifest, Tolerance, Tolerances};
pub use spec::{ExperimentKind, ExperimentSpec, Params, DEFAULT_SEED};

use crate::acceptance::{self, Settings};
use crate::ergodic;
use crate::error::Result;
use crate::mather;
use crate::mfg;
use crate::model::{Coupling, ModelConfig};
use crate::particle::{self, CellParams};
use crate::semigroup::{self, MeasureFunctional, ProbeTable};
use crate::torus::{ProbMeasure, TorusGrid};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

struct Table {
    name: &'static str,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, header: &[&str]) -> Self {
        Self {
            name,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let mut text = self.header.join("\t");
        text.push('\n');
        for row in &self.rows {
            text.push_str(&row.join("\t"));
            text.push('\n');
        }
        std::fs::write(dir.join(self.name), text)?;
        Ok(())
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Default)]
struct Outputs {
    results: Vec<ResultField>,
    checks: Vec<Check>,
    tables: Vec<Table>,
    /// Extra text files: (name, contents).
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn result(&mut self, name: impl Into<String>, value: f64) {
        self.results.push(ResultField {
            name: name.into(),
            value,
        });
    }

    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Runs the experiment, writes `manifest` and the tables into the output
/// directory and returns the manifest.
pub fn run(spec: &ExperimentSpec) -> Result<RunManifest> {
    let started_unix = unix_now();
    let spec_hash = spec.hash()?;
    let out = execute(spec).map_err(|e| e.context(format!("experiment {}", spec.kind)))?;
    std::fs::create_dir_all(&spec.out_dir)?;
    for t in &out.tables {
        t.write(&spec.out_dir)?;
    }
    for (name, bytes) in &out.files {
        std::fs::write(spec.out_dir.join(name), bytes)?;
    }
    let manifest = RunManifest {
        kind: spec.kind,
        spec_hash,
        code_version: CODE_VERSION.to_string(),
        seed: spec.seed,
        started_unix,
        finished_unix: unix_now(),
        results: out.results,
        checks: out.checks,
    };
    manifest.write(&spec.out_dir.join("manifest"))?;
    Ok(manifest)
}

struct Context {
    cfg: ModelConfig,
    grid: TorusGrid,
    m0: ProbMeasure,
}

fn context(spec: &ExperimentSpec) -> Result<Context> {
    let model = spec.model.as_ref().expect("validated: model present");
    let cfg = model.build(model.n, spec.assumptions, &spec.base_dir)?;
    let grid = *cfg.grid();
    let m0 = ergodic::von_mises(grid, spec.params.m0_center, spec.params.m0_kappa);
    Ok(Context { cfg, grid, m0 })
}

fn execute(spec: &ExperimentSpec) -> Result<Outputs> {
    let mut out = Outputs::default();
    match spec.kind {
        ExperimentKind::FullReport => full_report(spec, &mut out),
        kind => {
            let ctx = context(spec)?;
            match kind {
                ExperimentKind::LambdaSlope => lambda_slope(spec, &ctx, &mut out)?,
                ExperimentKind::CellProblem => cell_problem(spec, &ctx, &mut out)?,
                ExperimentKind::Energy => energy(spec, &ctx, &mut out)?,
                ExperimentKind::Corrector => corrector(spec, &ctx, &mut out)?,
                ExperimentKind::Monotonicity => monotonicity(spec, &ctx, &mut out)?,
                ExperimentKind::Mather => mather_run(spec, &ctx, &mut out)?,
                ExperimentKind::Semigroup => semigroup_run(spec, &ctx, &mut out)?,
                ExperimentKind::Calibrated => calibrated(spec, &ctx, &mut out)?,
                ExperimentKind::FullReport => unreachable!(),
            }
        }
    }
    Ok(out)
}

/// λ̂ from the config, or from a slope fit over `params.horizons`.
fn lambda_hat(spec: &ExperimentSpec, ctx: &Context, out: &mut Outputs) -> Result<f64> {
    let p = &spec.params;
    let lam = match p.lambda_hat {
        Some(l) => l,
        None => {
            ergodic::estimate_lambda_slope(&ctx.cfg, &ctx.m0, &p.horizons, p.dt, p.solver_options())
                .map_err(|e| e.context("slope fit of λ"))?
                .slope
                .value
        }
    };
    out.result("lambda_hat", lam);
    Ok(lam)
}

fn lambda_slope(spec: &ExperimentSpec, ctx: &Context, out: &mut Outputs) -> Result<()> {
    let p = &spec.params;
    let fit = ergodic::estimate_lambda_slope(&ctx.cfg, &ctx.m0, &p.horizons, p.dt, p.solver_options())?;
    out.result("lambda_hat", fit.slope.value);
    out.result("lambda_increment", fit.increment.value);
    out.result("intercept", fit.intercept);
    out.result("slope_residual", fit.slope.residual);
    for (t, v) in p.horizons.iter().zip(&fit.values) {
        out.result(format!("value_T{t}"), *v);
    }
    let mut table = Table::new("lambda.tsv", &["method", "horizons", "estimate", "residual"]);
    for e in [&fit.slope, &fit.increment] {
        table
            .rows
            .push(vec![e.method.tag().into(), list(&e.horizons), num(e.value), num(e.residual)]);
    }
    out.tables.push(table);
    let gap = (fit.slope.value - fit.increment.value).abs();
    out.check(
        "slope_matches_increment",
        gap <= 1e-6 + 1e-3 * fit.slope.value.abs(),
        format!("|slope − increment| = {gap:.3e}"),
    );
    if let Coupling::Constant(c0) = ctx.cfg.coupling() {
        if ctx.cfg.potential().values().iter().all(|v| *v == 0.0) {
            let err = (fit.slope.value + c0).abs();
            out.check("lambda_equals_minus_c0", err <= 1e-6, format!("|λ̂ + c0| = {err:.3e}"));
        }
    }
    Ok(())
}

fn cell_params(p: &Params) -> CellParams {
    CellParams {
        dt: p.cell_dt,
        tol: p.cell_tol,
        ..CellParams::default()
    }
}

fn cell_problem(spec: &ExperimentSpec, ctx: &Context, out: &mut Outputs) -> Result<()> {
    let p = &spec.params;
    let mut table = Table::new(
        "cell.tsv",
        &["N", "n", "lambda_N", "bernstein_sup", "symmetry_gap", "normalization_gap"],
    );
    let mut bernstein = Vec::new();
    for n_p in 1..=p.particles {
        let sol = particle::solve_cell_problem(&ctx.cfg, n_p, cell_params(p))
            .map_err(|e| e.context(format!("cell problem N={n_p}")))?;
        out.result(format!("lambda_N{n_p}"), sol.lambda_n);
        out.result(format!("bernstein_sup_N{n_p}"), sol.bernstein_sup);
        out.result(format!("symmetry_gap_N{n_p}"), sol.symmetry_gap);
        out.result(format!("normalization_gap_N{n_p}"), sol.normalization_gap);
        table.rows.push(vec![
            n_p.to_string(),
            ctx.grid.points_per_axis().to_string(),
            num(sol.lambda_n),
            num(sol.bernstein_sup),
            num(sol.symmetry_gap),
            num(sol.normalization_gap),
        ]);
        out.check(
            format!("normalized_N{n_p}"),
            sol.normalization_gap <= 1e-12,
            format!("|∫v| = {:.1e}", sol.normalization_gap),
        );
        out.check(
            format!("symmetric_N{n_p}"),
            sol.symmetry_gap <= 1e-8,
            format!("symmetry gap {:.1e}", sol.symmetry_gap),
        );
        let mut dump = Vec::new();
        sol.write(&mut dump)?;
        out.files.push((format!("v_N{n_p}.txt"), dump));
        bernstein.push(sol.bernstein_sup);
    }
    out.tables.push(table);
    let hi = bernstein.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = bernstein.iter().cloned().fold(f64::INFINITY, f64::min);
    out.check(
        "bernstein_spread",
        hi <= 2.0 * lo,
        format!("max/min of bernstein_sup over N = {:.3}", hi / lo),
    );
    Ok(())
}

fn energy(spec: &ExperimentSpec, ctx: &Context, out: &mut Outputs) -> Result<()> {
    let p = &spec.params;
    let (traj, report) = mfg::solve_fbs(&ctx.cfg, &ctx.m0, p.horizon, p.dt, p.fbs_options())?;
    let d = ergodic::energy_drift(&ctx.cfg, &traj, p.lambda_hat)?;
    let h = ctx.grid.spacing();
    let bound = 5.0 * (p.dt + h * h) * d.scale;
    out.result("value", report.value);
    out.result("iterations", report.iterations as f64);
    out.result("drift", d.drift);
    out.result("c_mean", d.c_mean);
    out.result("scale", d.scale);
    out.result("drift_bound", bound);
    if let Some(gap) = d.gap {
        out.result("c_gap", gap);
    }
    let mut table = Table::new("energy.tsv", &["t", "c"]);
    for (t, c) in d.times.iter().zip(&d.c_values) {
        table.rows.push(vec![num(*t), num(*c)]);
    }
    out.tables.push(table);
    out.check("drift_within_bound", d.drift <= bound, format!("drift {:.3e} bound {bound:.3e}", d.drift));
    Ok(())
}

fn corrector(spec: &ExperimentSpec, ctx: &Context, out: &mut Outputs) -> Result<()> {
    let p = &spec.params;
    let lam = lambda_hat(spec, ctx, out)?;
    let panel = ergodic::probe_panel(ctx.grid, spec.seed);
    let mut table = Table::new("corrector.tsv", &["probe", "T", "chi_hat"]);
    let mut tables = Vec::new();
    for &t in &p.corrector_horizons {
        let ct = ergodic::corrector_table(&ctx.cfg, &panel, t, lam, p.dt, p.solver_options())
            .map_err(|e| e.context(format!("corrector table T={t}")))?;
        for (probe, chi) in ct.probes.iter().zip(&ct.chi_hat) {
            out.result(format!("chi_{}_T{t}", probe.id), *chi);
            table.rows.push(vec![probe.id.clone(), t.to_string(), num(*chi)]);
        }
        out.result(format!("lipschitz_T{t}"), ct.max_lipschitz());
        tables.push(ct);
    }
    out.tables.push(table);
    let mut diffs = Vec::new();
    for w in tables.windows(2) {
        let d = w[0].sup_distance(&w[1])?;
        out.result(format!("sup_diff_T{}", w[0].horizon), d);
        diffs.push(d);
    }
    if diffs.len() >= 2 {
        let ratio = diffs[1] / diffs[0];
        out.check("corrector_contracts", ratio <= 0.6, format!("successive sup-difference ratio {ratio:.3}"));
    }
    let lips: Vec<f64> = tables.iter().map(|t| t.max_lipschitz()).collect();
    let hi = lips.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = lips.iter().cloned().fold(f64::INFINITY, f64::min);
    out.check("lipschitz_bounded", hi <= 1.5 * lo, format!("Lipschitz spread {:.3}", hi / lo));
    Ok(())
}

fn monotonicity(spec: &ExperimentSpec, ctx: &Context, out: &mut Outputs) -> Result<()> {
    let p = &spec.params;
    let lam = lambda_hat(spec, ctx, out)?;
    let r = ergodic::xi_monotonicity(&ctx.cfg, &ctx.m0, p.horizon, &p.times, lam, p.dt, p.solver_options())?;
    let mut table = Table::new("xi.tsv", &["t", "xi"]);
    for (t, x) in r.times.iter().zip(&r.xi) {
        out.result(format!("xi_t{t}"), *x);
        table.rows.push(vec![num(*t), num(*x)]);
    }
    out.tables.push(table);
    out.result("max_increment", r.max_increment);
    out.check(
        "xi_nonincreasing",
        r.max_increment <= 0.01 * r.max_abs(),
        format!("max increment {:.3e} vs max|ξ| {:.3e}", r.max_increment, r.max_abs()),
    );
    Ok(())
}

fn mather_run(spec: &ExperimentSpec, ctx: &Context, out: &mut Outputs) -> Result<()> {
    let p = &spec.params;
    let lam = lambda_hat(spec, ctx, out)?;
    let (traj, _) = mfg::solve_fbs(&ctx.cfg, &ctx.m0, p.horizon, p.dt, p.fbs_options())?;
    let occ = mather::occupation_measure(&traj, p.burn_in)?;
    let tests = mather::cylindrical_dictionary(ctx.grid)?;
    let objective = mather::mather_objective(&ctx.cfg, &occ)?;
    let closedness = mather::closedness_residual(&occ, &tests);
    let identity = mather::weak_kam_identity_residual(&ctx.cfg, &occ, lam)?;
    let mismatch = mather::identity_energy_mismatch(&ctx.cfg, &occ, lam)?;
    let smooth = mather::smoothness_diagnostics(&occ);
    out.result("objective", objective);
    out.result("closedness_residual", closedness);
    out.result("identity_residual", identity);
    out.result("inv_density", smooth.inv_density);
    out.result("grad_density", smooth.grad_density);
    out.result("fisher", smooth.fisher);
    let mut header = vec!["t".to_string(), "objective_term".to_string()];
    header.extend(tests.iter().map(|t| format!("closedness_{}", t.id)));
    header.extend(["identity", "inv_density", "grad_density", "fisher"].map(String::from));
    let mut table = Table {
        name: "mather.tsv",
        header,
        rows: Vec::new(),
    };
    for r in mather::sample_rows(&ctx.cfg, &occ, &tests, lam)? {
        let mut row = vec![num(r.t), num(r.objective_term)];
        row.extend(r.closedness.iter().map(|c| num(*c)));
        row.extend([r.identity, r.smoothness.inv_density, r.smoothness.grad_density, r.smoothness.fisher].map(num));
        table.rows.push(row);
    }
    out.tables.push(table);
    let rel = (objective + lam).abs();
    out.check(
        "objective_near_minus_lambda",
        rel <= 0.03 * lam.abs() + 1e-12,
        format!("objective {objective:.6e} vs −λ̂ {:.6e}", -lam),
    );
    match mismatch {
        Some(m) => {
            out.result("identity_energy_mismatch", m);
            out.check("identity_matches_energy", m <= 1e-9, format!("max samplewise mismatch {m:.1e}"));
        }
        None => out.check("identity_matches_energy", false, "trajectory carries no value function"),
    }
    Ok(())
}

fn semigroup_run(spec: &ExperimentSpec, ctx: &Context, out: &mut Outputs) -> Result<()> {
    let p = &spec.params;
    let opts = p.solver_options();
    let lam = lambda_hat(spec, ctx, out)?;
    let cfg = &ctx.cfg;
    let panel = ergodic::probe_panel(ctx.grid, spec.seed);
    let tests = mather::cylindrical_dictionary(ctx.grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pick = |scale: f64| {
        let i = rng.gen_range(0..tests.len());
        MeasureFunctional::cylindrical(tests[i].clone(), rng.gen_range(-scale..scale))
    };
    let phi = pick(0.5);
    let psi = pick(0.5);
    let above = psi.shifted(1.05);
    let mut table = Table::new("semigroup.tsv", &["law", "h", "gap", "interpolation_error"]);

    let ne = semigroup::check_nonexpansive(cfg, &phi, &psi, p.h, &panel, lam, p.dt, opts)?;
    let ord = semigroup::check_nonexpansive(cfg, &phi, &above, p.h, &panel, lam, p.dt, opts)?;
    let expansion = ne.violation.max(ord.violation);
    let order = ord.order_violation.unwrap_or(f64::INFINITY);
    table.rows.push(vec!["nonexpansive".into(), num(p.h), num(expansion), num(0.0)]);
    table.rows.push(vec!["order".into(), num(p.h), num(order), num(0.0)]);

    let comp = semigroup::check_semigroup(cfg, &phi, p.h1, p.h2, &panel, lam, p.dt, opts)?;
    table
        .rows
        .push(vec!["composition".into(), num(p.h1 + p.h2), num(comp.gap), num(comp.interpolation_error)]);

    let c = 0.3;
    let mut additive: f64 = 0.0;
    for probe in &panel {
        let base = semigroup::lax_oleinik(cfg, &phi, p.h, &probe.measure, lam, p.dt, opts)?;
        let up = semigroup::lax_oleinik(cfg, &phi.shifted(c), p.h, &probe.measure, lam, p.dt, opts)?;
        additive = additive.max((up - base - c).abs());
    }
    table.rows.push(vec!["additive".into(), num(p.h), num(additive), num(0.0)]);
    out.tables.push(table);

    out.result("expansion", expansion);
    out.result("order_violation", order);
    out.result("composition_gap", comp.gap);
    out.result("composition_scale", comp.scale);
    out.result("interpolation_error", comp.interpolation_error);
    out.result("additive_gap", additive);
    out.check("nonexpansive", expansion <= 1e-3, format!("violation {expansion:.1e}"));
    out.check("order_preserving", order <= 1e-3, format!("violation {order:.1e}"));
    out.check(
        "composition",
        comp.gap <= 0.05 * comp.scale,
        format!("gap {:.3e} vs scale {:.3e}", comp.gap, comp.scale),
    );
    out.check("constant_shift", additive <= opts.tol, format!("max deviation {additive:.1e}"));
    Ok(())
}

fn calibrated(spec: &ExperimentSpec, ctx: &Context, out: &mut Outputs) -> Result<()> {
    let p = &spec.params;
    let opts = p.solver_options();
    let lam = lambda_hat(spec, ctx, out)?;
    let panel = ergodic::probe_panel(ctx.grid, spec.seed);
    let table = ergodic::corrector_table(&ctx.cfg, &panel, p.corrector_horizon, lam, p.dt, opts)?;
    let chi = ProbeTable::from_corrector(&table);
    let mut tsv = Table::new("calibrated.tsv", &["T", "t1", "t2", "defect", "probe_distance"]);
    let mut defects = Vec::new();
    for &t in &p.calibration_horizons {
        let r = semigroup::extract_calibrated(&ctx.cfg, &ctx.m0, t, (p.window[0], p.window[1]), p.step, lam, &chi, p.dt, opts)
            .map_err(|e| e.context(format!("calibration T={t}")))?;
        for iv in &r.intervals {
            tsv.rows
                .push(vec![t.to_string(), num(iv.t1), num(iv.t2), num(iv.defect), num(iv.probe_distance)]);
        }
        out.result(format!("max_defect_T{t}"), r.max_defect);
        out.result(format!("max_probe_distance_T{t}"), r.max_probe_distance);
        defects.push(r.max_defect);
    }
    out.tables.push(tsv);
    if defects.len() >= 2 {
        let ratio = defects[defects.len() - 1] / defects[0];
        out.check("defect_shrinks", ratio <= 0.7, format!("defect ratio {ratio:.3}"));
    }
    Ok(())
}

fn full_report(spec: &ExperimentSpec, out: &mut Outputs) {
    let p = &spec.params;
    let settings = Settings {
        n: spec.n(),
        dt: p.dt,
        seed: spec.seed,
        opts: p.solver_options(),
        fbs_opts: p.fbs_options(),
        cell: cell_params(p),
    };
    let mut table = Table::new("acceptance.tsv", &["criterion", "title", "pass", "summary"]);
    for o in acceptance::run_all(&settings, None) {
        eprintln!("{o}");
        table
            .rows
            .push(vec![o.id.to_string(), o.title.into(), o.pass.to_string(), o.summary.clone()]);
        out.result(format!("criterion_{}_pass", o.id), if o.pass { 1.0 } else { 0.0 });
        out.check(format!("criterion_{}", o.id), o.pass, o.summary);
    }
    out.tables.push(table);
}

//! The `run`, `resume` and `verify` verbs.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use wkg_core::diagnostics::output::{write_csv, write_json, write_loglog_svg};
use wkg_core::diagnostics::{
    ghost_zero_source_constant, BootstrapReport, DecayFit, DiagnosticsEngine, Summary, EXCESS_COLUMN,
};
use wkg_core::fields::{
    build_initial_state, read_checkpoint, smallness_norms, Bump, CouplingTensors, FieldState, SmallnessReport,
    Target, MAX_SMALLNESS_ORDER,
};
use wkg_core::grid::{make_grid, ScalarField};
use wkg_core::nullforms::{decomposition_residual, nullform_bound_ratio, state_jets};
use wkg_core::propagate::oracle::DEFAULT_ABS_TOL;
use wkg_core::propagate::{
    linear_flow_kg, linear_flow_wave, oracle_pointwise_wave, oracle_pointwise_wave_u0, resume, run, NoObserver,
    RunSettings, Stepper,
};
use wkg_core::vectorfields::{
    commutator_residual, hessian_decay_check, representation_check, state_towers, CommutatorRoute, Generator, Poly,
};

use crate::config::{Format, RunConfig};

/// Initial state and run settings derived from a configuration.
pub struct Prepared {
    pub state0: FieldState,
    pub settings: RunSettings,
    /// `L - R0`: later times may see data wrapped around the torus.
    pub safe_horizon: f64,
    pub smallness: SmallnessReport,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let grid = make_grid(cfg.grid.n, cfg.grid.half_length).context("grid")?;
    let state0 = build_initial_state(&cfg.initial_data, &grid, Arc::new(cfg.couplings.clone())).context("initial_data")?;
    let safe_horizon = cfg.grid.half_length - cfg.initial_data.support_radius();
    let smallness = smallness_norms(&state0, (cfg.diagnostics.order_cap + 1).min(MAX_SMALLNESS_ORDER))?;
    let mut settings = RunSettings::new(cfg.time.dt, cfg.time.t_final, cfg.time.steps_per_record());
    settings.checkpoint_every = cfg.time.steps_per_checkpoint();
    settings.checkpoint_dir = settings.checkpoint_every.map(|_| cfg.output.directory.join("checkpoints"));
    settings.safe_horizon = Some(safe_horizon);
    settings.decomposition = cfg.diagnostics.enable_decomposition;
    Ok(Prepared { state0, settings, safe_horizon, smallness })
}

fn report_setup(cfg: &RunConfig, prepared: &Prepared) {
    let s = &prepared.smallness;
    println!(
        "smallness (order {}): position {:.6e}, velocity {:.6e}, total {:.6e}",
        s.order_cap,
        s.position_sum,
        s.velocity_sum,
        s.total()
    );
    for w in cfg.couplings.inert_warnings() {
        log::warn!("{w}");
    }
    if cfg.time.t_final > prepared.safe_horizon {
        eprintln!(
            "warning: T = {} exceeds the safe horizon {:.3}; later records are flagged and excluded from fits",
            cfg.time.t_final, prepared.safe_horizon
        );
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub safe_horizon: f64,
    pub smallness: SmallnessReport,
    pub diagnostics: Summary,
}

pub struct RunArtifacts {
    pub engine: DiagnosticsEngine,
    pub summary: RunSummary,
    pub files: Vec<PathBuf>,
}

/// File-name friendly version of a column name.
fn slug(column: &str) -> String {
    column.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

fn write_artifacts(cfg: &RunConfig, engine: &DiagnosticsEngine, summary: &RunSummary) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output.directory;
    let mut files = Vec::new();
    if cfg.output.wants(Format::Csv) {
        let p = dir.join("diagnostics.csv");
        write_csv(&p, engine.header(), engine.rows())?;
        files.push(p);
    }
    if cfg.output.wants(Format::Json) {
        let p = dir.join("summary.json");
        write_json(&p, summary)?;
        files.push(p);
        let fits: Vec<(&str, Option<DecayFit>)> =
            summary.diagnostics.fits.iter().map(|f| (f.series.as_str(), f.fit)).collect();
        let p = dir.join("decay_fits.json");
        write_json(&p, &fits.into_iter().collect::<std::collections::BTreeMap<_, _>>())?;
        files.push(p);
    }
    if cfg.output.wants(Format::Svg) {
        let plots = dir.join("plots");
        std::fs::create_dir_all(&plots)?;
        let mut series: Vec<String> = vec!["sup_w".into(), "sup_v".into(), "sup_dw_weighted".into()];
        series.extend(BootstrapReport::NAMES.iter().map(|s| s.to_string()));
        if engine.header().iter().any(|h| h == EXCESS_COLUMN) {
            series.push(EXCESS_COLUMN.into());
        }
        for name in series {
            let fit = summary.diagnostics.fits.iter().find(|f| f.series == name).and_then(|f| f.fit);
            let title = match fit {
                Some(f) => format!("{name}  (slope {:.3} on [{}, {}])", f.slope, f.t_min, f.t_max),
                None => name.clone(),
            };
            let p = plots.join(format!("{}.svg", slug(&name)));
            write_loglog_svg(&p, &title, engine.header(), engine.rows(), &[&name])?;
            files.push(p);
        }
    }
    Ok(files)
}

/// Runs the configuration, or continues it from `checkpoint`, and writes
/// every requested artifact.
pub fn execute(cfg: &RunConfig, config_text: &str, checkpoint: Option<&Path>) -> Result<RunArtifacts> {
    let prepared = prepare(cfg)?;
    report_setup(cfg, &prepared);
    let dir = &cfg.output.directory;
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    if let Some(d) = &prepared.settings.checkpoint_dir {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let mut engine = DiagnosticsEngine::new(cfg.diagnostics.clone(), cfg.diagnostics.enable_decomposition)?;
    engine.set_linear_reference(&prepared.state0);
    let started = Instant::now();
    match checkpoint {
        None => {
            std::fs::write(dir.join("config.toml"), config_text)?;
            run(&prepared.state0, &prepared.settings, &mut engine)?;
        }
        Some(path) => {
            let ck = read_checkpoint(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
            resume(&ck, &prepared.settings, &mut engine)?;
        }
    }
    eprintln!("evolved to t = {} in {:.1} s", cfg.time.t_final, started.elapsed().as_secs_f64());
    let summary =
        RunSummary { safe_horizon: prepared.safe_horizon, smallness: prepared.smallness, diagnostics: engine.summary() };
    let files = write_artifacts(cfg, &engine, &summary)?;
    Ok(RunArtifacts { engine, summary, files })
}

/// The configuration stored next to a checkpoint directory by [`execute`].
pub fn config_beside_checkpoint(checkpoint: &Path) -> Option<PathBuf> {
    let p = checkpoint.parent()?.parent()?.join("config.toml");
    p.exists().then_some(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Oracles,
    Decay,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, upper: f64) -> Self {
        Self { name: name.into(), value, lower: None, upper: Some(upper), passed: value <= upper }
    }

    pub fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let (lo, hi) = (target - tol, target + tol);
        Self { name: name.into(), value, lower: Some(lo), upper: Some(hi), passed: value >= lo && value <= hi }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: ok as u8 as f64, lower: Some(1.0), upper: None, passed: ok }
    }

    /// A check whose value could not be computed.
    pub fn missing(name: impl Into<String>) -> Self {
        Self { name: name.into(), value: f64::NAN, lower: None, upper: None, passed: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn new(suite: Suite, checks: Vec<Check>) -> Self {
        Self { suite, passed: checks.iter().all(|c| c.passed), checks }
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

pub fn verify(cfg: &RunConfig, config_text: &str, suite: Suite) -> Result<VerifyReport> {
    let report = match suite {
        Suite::Identities => VerifyReport::new(suite, identity_checks(cfg)?),
        Suite::Oracles => VerifyReport::new(suite, oracle_checks(cfg)?),
        Suite::Decay => {
            let artifacts = execute(cfg, config_text, None)?;
            VerifyReport::new(suite, decay_checks(&artifacts)?)
        }
    };
    std::fs::create_dir_all(&cfg.output.directory)?;
    let name = format!("verify-{}.json", serde_json::to_value(suite)?.as_str().unwrap_or("suite"));
    write_json(&cfg.output.directory.join(name), &report)?;
    Ok(report)
}

const ALL_GENERATORS: [Generator; 7] =
    [Generator::Dt, Generator::D1, Generator::D2, Generator::Om, Generator::H1, Generator::H2, Generator::S];

fn identity_checks(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    // Exact algebra on a cubic polynomial.
    let poly_grid = make_grid(16, 4.0)?;
    let p = Poly::monomial([3, 0, 0], 1.0)
        .add(&Poly::monomial([0, 2, 1], 1.0))
        .add(&Poly::monomial([1, 1, 1], -2.0))
        .add(&Poly::monomial([0, 0, 3], 0.5));
    for g in ALL_GENERATORS {
        let r = commutator_residual(g, CommutatorRoute::Analytic { poly: &p, grid: &poly_grid, t: 0.7 })?;
        checks.push(Check::at_most(format!("commutator.polynomial.{g}"), r.relative(), 1e-12));
    }

    // Spectral checks on the evolved configured state.
    let prepared = prepare(cfg)?;
    let dt = cfg.time.dt;
    let steps = ((cfg.time.t_final.min(10.0) / dt).floor() as u64).max(1);
    let settings = RunSettings::new(dt, steps as f64 * dt, steps);
    let state = run(&prepared.state0, &settings, &mut NoObserver)?.final_state;
    let (tw, tv) = state_towers(&state, 3)?;
    for g in ALL_GENERATORS {
        let rw = commutator_residual(g, CommutatorRoute::Spectral { tower: &tw, mass: 0.0 })?;
        checks.push(Check::at_most(format!("commutator.w.{g}"), rw.relative(), 1e-8));
        let rv = commutator_residual(g, CommutatorRoute::Spectral { tower: &tv, mass: 1.0 })?;
        checks.push(Check::at_most(format!("commutator.v.{g}"), rv.relative(), 1e-8));
    }
    for (name, tower) in [("w", &tw), ("v", &tv)] {
        match representation_check(tower) {
            Ok(rep) => checks.push(Check::at_most(format!("representation.{name}"), rep.max(), 1e-6)),
            Err(e) => {
                log::warn!("representation.{name}: {e}");
                checks.push(Check::missing(format!("representation.{name}")));
            }
        }
    }
    if state.t >= 1.0 && !state.couplings.wave_is_free() {
        let h = hessian_decay_check(&state)?;
        checks.push(Check::at_most("hessian.identity", h.identity_residual, 1e-8));
    }
    checks.push(Check::at_most("decomposition.residual", decomposition_residual(&state).relative(), 1e-8));
    let (jw, jv) = state_jets(&state);
    checks.push(Check::at_most("nullform.bound_ratio", nullform_bound_ratio(&jw, &jv).max_ratio, 4.0));
    Ok(checks)
}

fn unit_gaussian(x1: f64, x2: f64) -> f64 {
    (-(x1 * x1 + x2 * x2) / 4.0).exp()
}

fn oracle_checks(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let prepared = prepare(cfg)?;
    let grid = prepared.state0.grid().clone();
    let free = prepared.state0.with_couplings(Arc::new(CouplingTensors::zero()));

    // Repeated linear steps against the one-shot closed form.
    let dt = cfg.time.dt;
    let steps = ((cfg.time.t_final / dt).round() as u64).min(1000);
    let stepper = Stepper::new(&grid, dt)?;
    let mut s = free.clone();
    for _ in 0..steps {
        s = stepper.linear_step(&s);
    }
    let t = steps as f64 * dt;
    let rel = |a: &ScalarField, b: &ScalarField| (a - b).max_abs() / b.max_abs().max(f64::MIN_POSITIVE);
    let (w, _) = linear_flow_wave(&free.w, &free.wt, t);
    let (v, _) = linear_flow_kg(&free.v, &free.vt, t);
    if w.max_abs() > 0.0 {
        checks.push(Check::at_most("linear.wave.closed_form", rel(&s.w, &w), 1e-10));
    }
    if v.max_abs() > 0.0 {
        checks.push(Check::at_most("linear.kg.closed_form", rel(&s.v, &v), 1e-10));
    }

    // Kernel quadrature for Gaussian data on the configured grid.
    let t_q = 10.0_f64.min(0.5 * grid.half_length());
    let u = ScalarField::from_fn(&grid, unit_gaussian);
    let z = ScalarField::zeros(&grid);
    let (from_u1, _) = linear_flow_wave(&z, &u, t_q);
    let (from_u0, _) = linear_flow_wave(&u, &z, t_q);
    let grad = |x1: f64, x2: f64| [-0.5 * x1 * unit_gaussian(x1, x2), -0.5 * x2 * unit_gaussian(x1, x2)];
    let (mut e1, mut e0) = (0.0_f64, 0.0_f64);
    for p in [[0.0, 0.0], [3.0, 0.0], [0.0, 5.0], [-4.0, 4.0], [t_q, 0.5]] {
        let k = grid.nearest_node(p[0], p[1]);
        let x = grid.node(k);
        let x = [x.0, x.1];
        e1 = e1.max((oracle_pointwise_wave(&unit_gaussian, t_q, x, DEFAULT_ABS_TOL)? - from_u1.values()[k]).abs());
        e0 = e0.max(
            (oracle_pointwise_wave_u0(&unit_gaussian, &grad, t_q, x, DEFAULT_ABS_TOL)? - from_u0.values()[k]).abs(),
        );
    }
    checks.push(Check::at_most("quadrature.velocity_data", e1, 1e-5));
    checks.push(Check::at_most("quadrature.position_data", e0, 1e-5));

    // The initial data sampled on the grid against the bump formulas.
    let bumps: Vec<Bump> = cfg.initial_data.realized_bumps();
    let direct = ScalarField::from_fn(&grid, |x1, x2| {
        bumps.iter().filter(|b| b.target == Target::W && b.component == Default::default()).map(|b| b.eval(x1, x2)).sum()
    });
    checks.push(Check::at_most("initial_data.sampling", (&direct - &prepared.state0.w).max_abs(), 0.0));
    Ok(checks)
}

/// Checks on a finished run: decay slopes, bounded monitors, ghost and
/// energy monitors, null-form ratio, decomposition and reconstruction.
pub fn decay_checks(artifacts: &RunArtifacts) -> Result<Vec<Check>> {
    let s = &artifacts.summary.diagnostics;
    let engine = &artifacts.engine;
    let mut checks = Vec::new();
    for (series, target, tol) in [("sup_v", -1.0, 0.15), ("sup_w", -0.5, 0.1)] {
        match s.fits.iter().find(|f| f.series == series).and_then(|f| f.fit) {
            Some(f) => checks.push(Check::within(format!("slope.{series}"), f.slope, target, tol)),
            None => checks.push(Check::missing(format!("slope.{series}"))),
        }
    }
    for b in &s.bounded {
        match b.max_ratio_vs_t5 {
            Some(r) => checks.push(Check::at_most(format!("bounded.{}", b.series), r, 10.0)),
            None => checks.push(Check::missing(format!("bounded.{}", b.series))),
        }
    }
    checks.push(Check::flag("ghost.monotone", s.ghost_monotone));
    checks.push(Check::at_most("ghost.bounded", ghost_bound_ratio(engine)?, 1.0));
    checks.push(Check::at_most("energy_monitor.w", s.energy_monitor_max[0], 1.0));
    checks.push(Check::at_most("energy_monitor.v", s.energy_monitor_max[1], 1.0));
    checks.push(Check::at_most("nullform.bound_ratio", s.nullform_bound_max, 4.0));
    if let Some(d) = s.decomposition_residual_max {
        checks.push(Check::at_most("decomposition.residual", d, 1e-8));
    }
    if let Some(series) = engine.series("reconstruction_error") {
        if let Some(&(_, e)) = series.iter().find(|p| (p.0 - 20.0).abs() < 1e-9) {
            checks.push(Check::at_most("reconstruction.t20", e, 1e-6));
        }
    }
    Ok(checks)
}

/// `max_I Σ_i ghost_I(T) / (κ max_t E1(Γ^I v)(t))`, with `κ` the zero-source
/// constant of the ghost-weight identity.
pub fn ghost_bound_ratio(engine: &DiagnosticsEngine) -> Result<f64> {
    let kappa = ghost_zero_source_constant()?;
    let mut worst = 0.0_f64;
    for word in engine.words() {
        let col = |p: &str| engine.series(&format!("{p}[{word}]"));
        let (Some(g1), Some(g2), Some(e1)) = (col("ghost_accum_1"), col("ghost_accum_2"), col("E1_v")) else {
            bail!("missing ghost columns for word {word}");
        };
        let total = g1.last().map_or(0.0, |p| p.1) + g2.last().map_or(0.0, |p| p.1);
        let energy = e1.iter().map(|p| p.1).fold(0.0, f64::max);
        if energy > 0.0 {
            worst = worst.max(total / (kappa * energy));
        }
    }
    Ok(worst)
}

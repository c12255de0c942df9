//! Acceptance criteria 1-9, one pass/fail line each.

use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use wkg_cli::commands::{decay_checks, execute, verify, Check, RunArtifacts, Suite};
use wkg_cli::config::RunConfig;
use wkg_cli::presets::preset;
use wkg_core::diagnostics::{conformal_energy, energy_kg, energy_wave, fit_decay, EXCESS_COLUMN};
use wkg_core::fields::{build_initial_state, CouplingTensors, FieldState};
use wkg_core::grid::{make_grid, ScalarField};
use wkg_core::nullforms::{decomposition_residual, Jet};
use wkg_core::propagate::oracle::DEFAULT_ABS_TOL;
use wkg_core::propagate::{
    linear_flow_kg, linear_flow_wave, oracle_pointwise_wave, run, NoObserver, RunSettings, Stepper,
};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }

    fn failed(err: anyhow::Error) -> Self {
        Self::new(false, format!("error: {err:#}"))
    }
}

type Criterion = anyhow::Result<Outcome>;

fn config(text: &str, dir: &Path) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::parse(text)?;
    cfg.output.directory = dir.to_path_buf();
    Ok(cfg)
}

fn rel_max(a: &ScalarField, b: &ScalarField) -> f64 {
    (a - b).max_abs() / b.max_abs().max(f64::MIN_POSITIVE)
}

fn gaussian(a: f64, c: [f64; 2], width: f64) -> impl Fn(f64, f64) -> f64 + Sync {
    move |x1, x2| a * (-((x1 - c[0]).powi(2) + (x2 - c[1]).powi(2)) / (width * width)).exp()
}

fn checks_named<'a>(checks: &'a [Check], prefix: &str) -> Vec<&'a Check> {
    checks.iter().filter(|c| c.name.starts_with(prefix)).collect()
}

fn describe(checks: &[&Check]) -> String {
    checks.iter().map(|c| format!("{}={:.3e}", c.name, c.value)).collect::<Vec<_>>().join(" ")
}

fn all_pass(checks: &[&Check]) -> bool {
    !checks.is_empty() && checks.iter().all(|c| c.passed)
}

fn criterion_1() -> Criterion {
    let started = Instant::now();
    let grid = make_grid(256, 64.0)?;
    let w0 = ScalarField::from_fn(&grid, gaussian(1.0, [0.5, 0.0], 2.0));
    let w1 = ScalarField::from_fn(&grid, gaussian(0.5, [0.0, -1.0], 3.0));
    let free = Arc::new(CouplingTensors::zero());
    let state = FieldState::new(0.0, w0.clone(), w1.clone(), w0.clone(), w1.clone(), free)?;
    let dt = 0.1;
    let stepper = Stepper::new(&grid, dt)?;
    let mut s = state.clone();
    for _ in 0..1000 {
        s = stepper.linear_step(&s);
    }
    let t = 1000.0 * dt;
    let (w, _) = linear_flow_wave(&w0, &w1, t);
    let (v, _) = linear_flow_kg(&w0, &w1, t);
    let (ew, ev) = (rel_max(&s.w, &w), rel_max(&s.v, &v));

    let u1 = gaussian(1.0, [0.0, 0.0], 2.0);
    let tq = 10.0;
    let data = ScalarField::from_fn(&grid, &u1);
    let (spectral, _) = linear_flow_wave(&ScalarField::zeros(&grid), &data, tq);
    let mut eq = 0.0_f64;
    for p in [[0.0, 0.0], [3.0, 0.0], [0.0, 5.0], [-4.0, 4.0], [10.0, 0.5]] {
        let k = grid.nearest_node(p[0], p[1]);
        let (x1, x2) = grid.node(k);
        eq = eq.max((oracle_pointwise_wave(&u1, tq, [x1, x2], DEFAULT_ABS_TOL)? - spectral.values()[k]).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    Ok(Outcome::new(
        ew < 1e-10 && ev < 1e-10 && eq < 1e-5 && secs < 60.0,
        format!("closed form wave {ew:.2e} kg {ev:.2e} (< 1e-10); quadrature {eq:.2e} (< 1e-5); {secs:.1} s (< 60 s)"),
    ))
}

fn criterion_2() -> Criterion {
    let grid = make_grid(128, 32.0)?;
    let u0 = ScalarField::from_fn(&grid, gaussian(0.5, [0.5, 0.0], 2f64.sqrt()));
    let u1 = ScalarField::from_fn(&grid, gaussian(0.3, [0.0, -0.5], 3f64.sqrt()));
    let state = FieldState::new(0.0, u0.clone(), u1.clone(), u0.clone(), u1.clone(), Arc::new(CouplingTensors::zero()))?;
    let dt = 0.002;
    let stepper = Stepper::new(&grid, dt)?;
    let e0 = energy_wave(&state.w, &state.wt);
    let e10 = energy_kg(&state.v, &state.vt);
    let g0 = conformal_energy(&Jet::new(u0, u1), 0.0).sqrt();
    let (mut de, mut de1, mut dg) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut s = state;
    for k in 1..=10_000u32 {
        s = stepper.linear_step(&s);
        if k % 1000 == 0 {
            let t = f64::from(k) * dt;
            de = de.max((energy_wave(&s.w, &s.wt) - e0).abs() / e0);
            de1 = de1.max((energy_kg(&s.v, &s.vt) - e10).abs() / e10);
            dg = dg.max((conformal_energy(&Jet::new(s.w.clone(), s.wt.clone()), t).sqrt() - g0).abs() / g0);
        }
    }
    Ok(Outcome::new(
        de < 1e-10 && de1 < 1e-10 && dg < 1e-8,
        format!("10^4 linear steps: E drift {de:.2e}, E1 drift {de1:.2e} (< 1e-10); G^(1/2) drift {dg:.2e} (< 1e-8)"),
    ))
}

const IDENTITY_RUN: &str = r#"
[grid]
n = 192
L = 48.0
[time]
dt = 0.05
T = 5.0
record_every = 1.0
[couplings]
c1 = 1.0
c2 = 1.0
c1ab = [[0.0, 0.5, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
c2ab = [[0.0, 0.0, 0.5], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
[initial_data]
epsilon = 0.01
[[initial_data.bumps]]
kind = "gaussian"
target = "w"
amplitude = 1.0
width = 4.0
[[initial_data.bumps]]
kind = "gaussian"
target = "w"
component = "velocity"
amplitude = 0.5
center = [1.0, 0.0]
width = 4.0
[[initial_data.bumps]]
kind = "modulated-gaussian"
target = "v"
amplitude = 1.0
width = 4.0
wavevector = [0.5, 0.25]
[diagnostics]
order_cap = 2
"#;

fn criterion_3(dir: &Path) -> Criterion {
    let cfg = config(IDENTITY_RUN, dir)?;
    let report = verify(&cfg, IDENTITY_RUN, Suite::Identities)?;
    let comm = checks_named(&report.checks, "commutator.");
    let rep = checks_named(&report.checks, "representation.");
    let worst = comm.iter().map(|c| c.value).fold(0.0, f64::max);
    Ok(Outcome::new(
        all_pass(&comm) && all_pass(&rep),
        format!("{} commutator residuals, worst {worst:.2e} (< 1e-8); {}", comm.len(), describe(&rep)),
    ))
}

/// Decomposition residual of the theorem-decay data evolved to `t = 1`.
fn residual_at(n: usize, dt: f64) -> anyhow::Result<f64> {
    let cfg = RunConfig::parse(preset("theorem-decay").unwrap())?;
    let grid = make_grid(n, cfg.grid.half_length)?;
    let state0 = build_initial_state(&cfg.initial_data, &grid, Arc::new(cfg.couplings.clone()))?;
    let steps = (1.0 / dt).round() as u64;
    let state = run(&state0, &RunSettings::new(dt, steps as f64 * dt, steps), &mut NoObserver)?.final_state;
    Ok(decomposition_residual(&state).relative())
}

fn criterion_4() -> Criterion {
    let base = residual_at(512, 0.1)?;
    let fine = residual_at(1024, 0.05)?;
    let order = (base / fine).log2();
    Ok(Outcome::new(
        base < 1e-8 && order >= 2.0,
        format!("baseline {base:.2e} (< 1e-8); refined {fine:.2e}; observed order {order:.1} (>= 2)"),
    ))
}

const WAVE_FREE_RUN: &str = r#"
[grid]
n = 64
L = 24.0
[time]
dt = 0.1
T = 5.0
record_every = 1.0
[couplings]
c2 = 1.0
c1ab = [[0.0, 0.3, 0.0], [0.3, 0.0, 0.0], [0.0, 0.0, 0.0]]
c2ab = [[0.0, 0.0, 0.5], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
[initial_data]
epsilon = 0.01
[[initial_data.bumps]]
kind = "gaussian"
target = "w"
amplitude = 1.0
width = 2.0
[[initial_data.bumps]]
kind = "gaussian"
target = "v"
amplitude = 1.0
width = 2.0
[diagnostics]
order_cap = 1
[output]
formats = ["csv"]
"#;

fn criterion_5(decay: &RunArtifacts, dir: &Path) -> Criterion {
    let at20 = decay
        .engine
        .series("reconstruction_error")
        .and_then(|s| s.into_iter().find(|p| (p.0 - 20.0).abs() < 1e-9))
        .map(|p| p.1);
    let free = execute(&config(WAVE_FREE_RUN, dir)?, WAVE_FREE_RUN, None)?;
    let zero = free.engine.series("reconstruction_error").unwrap_or_default();
    let exact = !zero.is_empty() && zero.iter().all(|p| p.1 == 0.0);
    let max_free = zero.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(match at20 {
        Some(e) => Outcome::new(
            e < 1e-6 && exact,
            format!("t = 20 relative error {e:.2e} (< 1e-6); wave-free coupling max {max_free:e} (== 0)"),
        ),
        None => Outcome::new(false, "no reconstruction record at t = 20"),
    })
}

fn criterion_6(report: &[Check], secs: f64) -> Criterion {
    let mut checks = checks_named(report, "slope.");
    checks.extend(checks_named(report, "bounded.sup_dw_weighted"));
    Ok(Outcome::new(
        all_pass(&checks) && checks.len() == 3 && secs < 1800.0,
        format!("{} (v -1 +- 0.15, w -0.5 +- 0.1, ratio <= 10); {secs:.0} s (< 1800 s)", describe(&checks)),
    ))
}

fn criterion_7(report: &[Check]) -> Criterion {
    let boot = checks_named(report, "bounded.boot.");
    let ghost = checks_named(report, "ghost.");
    let worst = boot.iter().map(|c| c.value).fold(0.0, f64::max);
    Ok(Outcome::new(
        all_pass(&boot) && all_pass(&ghost) && ghost.len() == 2,
        format!("{} bootstrap lines, worst ratio {worst:.2} (<= 10); {}", boot.len(), describe(&ghost)),
    ))
}

fn excess_slope(art: &RunArtifacts, window: [f64; 2]) -> anyhow::Result<f64> {
    let series = art.engine.series(EXCESS_COLUMN).ok_or_else(|| anyhow::anyhow!("no {EXCESS_COLUMN} column"))?;
    Ok(fit_decay(&series, window[0], window[1])?.slope)
}

fn criterion_8(dir: &Path) -> Criterion {
    let std_text = preset("nullform-standard").unwrap();
    let brk_text = preset("nullform-broken").unwrap();
    let std_cfg = config(std_text, &dir.join("standard"))?;
    let brk_cfg = config(brk_text, &dir.join("broken"))?;
    let window = std_cfg.diagnostics.decay_window;
    let standard = execute(&std_cfg, std_text, None)?;
    let broken = execute(&brk_cfg, brk_text, None)?;
    let ratio = standard.summary.diagnostics.nullform_bound_max;
    let (a, b) = (excess_slope(&standard, window)?, excess_slope(&broken, window)?);
    Ok(Outcome::new(
        ratio <= 4.0 && b > a,
        format!("bound ratio {ratio:.3} (<= 4); excess energy slope standard {a:.3} < broken {b:.3}"),
    ))
}

const DETERMINISM_RUN: &str = r#"
[grid]
n = 64
L = 24.0
[time]
dt = 0.1
T = 6.0
record_every = 0.5
checkpoint_every = 2.0
[couplings]
c1 = 1.0
c2 = 1.0
c1ab = [[0.0, 0.5, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
[initial_data]
epsilon = 0.05
[[initial_data.bumps]]
kind = "gaussian"
target = "w"
amplitude = 1.0
width = 2.0
[[initial_data.bumps]]
kind = "gaussian"
target = "v"
component = "velocity"
amplitude = 1.0
width = 2.0
[diagnostics]
order_cap = 2
[output]
formats = ["csv"]
"#;

fn criterion_9(dir: &Path) -> Criterion {
    let (a, b) = (dir.join("a"), dir.join("b"));
    let first = execute(&config(DETERMINISM_RUN, &a)?, DETERMINISM_RUN, None)?;
    execute(&config(DETERMINISM_RUN, &b)?, DETERMINISM_RUN, None)?;
    let csv_a = std::fs::read(a.join("diagnostics.csv"))?;
    let repeat = csv_a == std::fs::read(b.join("diagnostics.csv"))?;
    let mut checkpoints: Vec<_> =
        std::fs::read_dir(a.join("checkpoints"))?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    checkpoints.sort();
    let mut resumed_all = !checkpoints.is_empty();
    for ck in &checkpoints {
        let c = dir.join(format!("resume-{}", ck.file_stem().unwrap().to_string_lossy()));
        execute(&config(DETERMINISM_RUN, &c)?, DETERMINISM_RUN, Some(ck))?;
        resumed_all &= std::fs::read(c.join("diagnostics.csv"))? == csv_a;
    }
    Ok(Outcome::new(
        repeat && resumed_all,
        format!(
            "{} rows; repeated run identical: {repeat}; resumed from {} checkpoints identical: {resumed_all}",
            first.engine.rows().len(),
            checkpoints.len()
        ),
    ))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let root = tmp.path();
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut record = |k: u32, r: Criterion| {
        let o = r.unwrap_or_else(Outcome::failed);
        println!("criterion {k}: {} - {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((k, o));
    };

    record(1, criterion_1());
    record(2, criterion_2());
    record(3, criterion_3(&root.join("c3")));
    record(4, criterion_4());

    let decay_text = preset("theorem-decay").unwrap();
    let started = Instant::now();
    let decay = config(decay_text, &root.join("decay")).and_then(|cfg| {
        let artifacts = execute(&cfg, decay_text, None)?;
        let secs = started.elapsed().as_secs_f64();
        Ok((decay_checks(&artifacts)?, secs, artifacts))
    });
    match decay {
        Ok((report, secs, artifacts)) => {
            record(5, criterion_5(&artifacts, &root.join("c5")));
            record(6, criterion_6(&report, secs));
            record(7, criterion_7(&report));
        }
        Err(e) => {
            let msg = format!("{e:#}");
            for k in 5..=7 {
                record(k, Err(anyhow::anyhow!("theorem-decay run failed: {msg}")));
            }
        }
    }
    record(8, criterion_8(&root.join("c8")));
    record(9, criterion_9(&root.join("c9")));

    let failed: Vec<u32> = results.iter().filter(|r| !r.1.passed).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}

use std::f64::consts::PI;
use std::sync::Arc;

use wkg_core::diagnostics::output::write_csv_to;
use wkg_core::diagnostics::{DiagnosticsConfig, DiagnosticsEngine};
use wkg_core::fields::{read_checkpoint, CouplingTensors, FieldState};
use wkg_core::grid::{make_grid, ScalarField};
use wkg_core::nullforms::{q0_raw, qab_raw, Jet};
use wkg_core::propagate::{linear_flow_wave, resume, run, RunSettings};

fn gaussian(a: f64, c: [f64; 2], width: f64) -> impl Fn(f64, f64) -> f64 + Sync {
    move |x1, x2| a * (-((x1 - c[0]).powi(2) + (x2 - c[1]).powi(2)) / (width * width)).exp()
}

fn state(n: usize, half_length: f64, couplings: CouplingTensors) -> FieldState {
    let g = make_grid(n, half_length).unwrap();
    FieldState::new(
        0.0,
        ScalarField::from_fn(&g, gaussian(0.05, [0.5, 0.0], 2.0)),
        ScalarField::from_fn(&g, gaussian(0.03, [0.0, -0.5], 2.0)),
        ScalarField::from_fn(&g, gaussian(0.05, [0.0, 1.0], 2.0)),
        ScalarField::from_fn(&g, gaussian(0.02, [-1.0, 0.0], 2.5)),
        Arc::new(couplings),
    )
    .unwrap()
}

fn csv_bytes(engine: &DiagnosticsEngine) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv_to(&mut out, engine.header(), engine.rows()).unwrap();
    out
}

#[test]
fn co_propagating_waves_have_vanishing_null_forms() {
    let g = make_grid(64, 8.0 * PI).unwrap();
    let k = 2.0 * PI / (2.0 * 8.0 * PI) * 3.0;
    // w = sin(k(x1 - t)), v = cos(2k(x1 - t)) at t = 0.
    let w = Jet::new(
        ScalarField::from_fn(&g, |x1, _| (k * x1).sin()),
        ScalarField::from_fn(&g, |x1, _| -k * (k * x1).cos()),
    );
    let v = Jet::new(
        ScalarField::from_fn(&g, |x1, _| (2.0 * k * x1).cos()),
        ScalarField::from_fn(&g, |x1, _| 2.0 * k * (2.0 * k * x1).sin()),
    );
    assert!(q0_raw(&w, &v).max_abs() < 1e-12);
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        assert!(qab_raw(a, b, &w, &v).max_abs() < 1e-12);
    }
    let broken = w.d[0].product(&v.d[0]);
    assert!(broken.max_abs() > 0.1 * 2.0 * k * k);
}

#[test]
fn wave_free_coupling_keeps_w_on_the_free_flow() {
    let mut c = CouplingTensors::q0_only(0.0, 1.0);
    c.c2ab[0][1] = 0.5;
    let s = state(64, 24.0, c);
    let mut settings = RunSettings::new(0.1, 3.0, 10);
    settings.decomposition = true;
    let cfg = DiagnosticsConfig { order_cap: 1, ..Default::default() };
    let mut engine = DiagnosticsEngine::new(cfg, true).unwrap();
    let out = run(&s, &settings, &mut engine).unwrap();
    let (w, _) = linear_flow_wave(&s.w, &s.wt, 3.0);
    assert!((&out.final_state.w - &w).max_abs() < 1e-12 * w.max_abs());
    let rec = engine.series("reconstruction_error").unwrap();
    assert_eq!(rec.len(), 4);
    assert!(rec.iter().all(|p| p.1 == 0.0));
    let (v, _) = wkg_core::propagate::linear_flow_kg(&s.v, &s.vt, 3.0);
    assert!((&out.final_state.v - &v).max_abs() > 1e-9, "the Klein-Gordon field should feel the coupling");
}

#[test]
fn conformal_energy_columns_are_conserved_by_free_waves() {
    let s = state(128, 32.0, CouplingTensors::zero());
    let cfg = DiagnosticsConfig { order_cap: 1, ..Default::default() };
    let mut engine = DiagnosticsEngine::new(cfg, false).unwrap();
    run(&s, &RunSettings::new(0.1, 10.0, 20), &mut engine).unwrap();
    let columns: Vec<String> = engine.header().iter().filter(|h| h.starts_with("conformal_G_w[")).cloned().collect();
    assert_eq!(columns.len(), 7);
    for col in columns {
        let series = engine.series(&col).unwrap();
        let g0 = series[0].1.sqrt();
        for (t, g) in series {
            assert!((g.sqrt() - g0).abs() <= 1e-8 * g0, "{col} at t = {t}: {} vs {g0}", g.sqrt());
        }
    }
}

#[test]
fn csv_bytes_survive_checkpoint_and_resume() {
    let s = state(64, 24.0, CouplingTensors::q0_only(1.0, 1.0));
    let dir = tempfile_dir();
    let cfg = DiagnosticsConfig { order_cap: 1, ..Default::default() };
    let mut settings = RunSettings::new(0.1, 4.0, 5);
    settings.decomposition = true;
    settings.checkpoint_every = Some(15);
    settings.checkpoint_dir = Some(dir.clone());

    let mut first = DiagnosticsEngine::new(cfg.clone(), true).unwrap();
    let out = run(&s, &settings, &mut first).unwrap();
    let mut again = DiagnosticsEngine::new(cfg.clone(), true).unwrap();
    run(&s, &settings, &mut again).unwrap();
    assert_eq!(csv_bytes(&first), csv_bytes(&again));

    assert_eq!(out.checkpoints.len(), 2);
    for path in &out.checkpoints {
        let mut resumed = DiagnosticsEngine::new(cfg.clone(), true).unwrap();
        resume(&read_checkpoint(path).unwrap(), &settings, &mut resumed).unwrap();
        assert_eq!(csv_bytes(&resumed), csv_bytes(&first));
    }
    std::fs::remove_dir_all(&dir).ok();
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("wkg-system-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

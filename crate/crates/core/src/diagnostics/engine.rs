//! The run-loop observer that evaluates every diagnostic at each record.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_report, BootstrapInputs, BootstrapReport};
use super::decay::{fit_decay, DecayFit, MIN_FIT_TIME};
use super::energy::{conformal_energy, energy_kg_jet, energy_wave_jet};
use super::ghost::{ghost_integrand, GhostAccumulators};
use super::pointwise::{sobolev_ratio, weighted_sup_dw, weighted_sup_kg, SOBOLEV_ORDER};
use std::sync::Arc;

use crate::fields::{Checkpoint, CouplingTensors, FieldState};
use crate::grid::ScalarField;
use crate::nullforms::{decomposition_residual, nullform_bound_ratio, rhs, Jet};
use crate::propagate::{linear_flow_wave, reconstruction_error, Observer, RecordContext};
use crate::vectorfields::{canonical_words, state_towers, DiffOp, GammaWord, Generator, Tower};
use crate::{Error, Result};

pub const MAX_ORDER_CAP: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub order_cap: usize,
    /// Bootstrap growth exponent.
    pub delta: f64,
    /// Ghost-weight time exponent.
    pub delta0: f64,
    pub decay_window: [f64; 2],
    pub enable_sobolev: bool,
    pub enable_decomposition: bool,
    /// Record `Σ_{|I|=K} E(Γ^I(w - w_lin))`, with `w_lin` the free wave from
    /// the initial data.
    #[serde(default)]
    pub track_excess_energy: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            order_cap: 2,
            delta: 0.05,
            delta0: 0.1,
            decay_window: [10.0, 80.0],
            enable_sobolev: false,
            enable_decomposition: true,
            track_excess_energy: false,
        }
    }
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order_cap > MAX_ORDER_CAP {
            return Err(Error::OrderCap { requested: self.order_cap, max: MAX_ORDER_CAP });
        }
        if self.enable_sobolev && self.order_cap < SOBOLEV_ORDER {
            return Err(Error::OrderCap { requested: SOBOLEV_ORDER, max: self.order_cap });
        }
        if !(self.delta > 0.0) || !(self.delta0 > 0.0) {
            return Err(Error::InvalidData("delta and delta0 must be positive".into()));
        }
        let [a, b] = self.decay_window;
        if !(a >= MIN_FIT_TIME) || !(b > a) {
            return Err(Error::InvalidWindow { t_min: a, t_max: b, reason: format!("need {MIN_FIT_TIME} <= t_min < t_max") });
        }
        Ok(())
    }
}

/// One row of diagnostics. Per-word vectors follow [`canonical_words`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub step: u64,
    pub beyond_horizon: bool,
    pub sup_w: f64,
    pub sup_v: f64,
    pub sup_dw_weighted: f64,
    pub energy_w: Vec<f64>,
    pub energy1_v: Vec<f64>,
    pub conformal_w: Vec<f64>,
    pub ghost: Vec<[f64; 2]>,
    pub sobolev_ratio: Option<[f64; 2]>,
    pub decomposition_residual: Option<f64>,
    pub nullform_bound_ratio: f64,
    pub excluded_node_count: usize,
    pub energy_monitor: [f64; 2],
    pub excess_energy_w: Option<f64>,
    pub reconstruction_error: Option<f64>,
    pub bootstrap: BootstrapReport,
}

impl DiagnosticsRecord {
    pub fn row(&self) -> Vec<f64> {
        let mut out = vec![self.t, self.step as f64, self.beyond_horizon as u8 as f64, self.sup_w, self.sup_v, self.sup_dw_weighted];
        out.extend(&self.energy_w);
        out.extend(&self.energy1_v);
        out.extend(&self.conformal_w);
        out.extend(self.ghost.iter().map(|g| g[0]));
        out.extend(self.ghost.iter().map(|g| g[1]));
        if let Some(s) = self.sobolev_ratio {
            out.extend(s);
        }
        out.extend(self.decomposition_residual);
        out.push(self.nullform_bound_ratio);
        out.push(self.excluded_node_count as f64);
        out.extend(self.energy_monitor);
        out.extend(self.excess_energy_w);
        out.extend(self.reconstruction_error);
        out.extend(self.bootstrap.values());
        out
    }
}

/// Column names matching [`DiagnosticsRecord::row`].
pub fn record_header(words: &[GammaWord], config: &DiagnosticsConfig, reconstruction: bool) -> Vec<String> {
    let mut h: Vec<String> =
        ["t", "step", "beyond_horizon", "sup_w", "sup_v", "sup_dw_weighted"].iter().map(|s| s.to_string()).collect();
    for prefix in ["E_w", "E1_v", "conformal_G_w", "ghost_accum_1", "ghost_accum_2"] {
        h.extend(words.iter().map(|w| format!("{prefix}[{w}]")));
    }
    if config.enable_sobolev {
        h.extend(["sobolev_ratio_w".to_string(), "sobolev_ratio_v".to_string()]);
    }
    if config.enable_decomposition {
        h.push("decomposition_residual".into());
    }
    h.extend(["nullform_bound_ratio", "excluded_node_count", "energy_monitor_w", "energy_monitor_v"].map(String::from));
    if config.track_excess_energy {
        h.push(EXCESS_COLUMN.into());
    }
    if reconstruction {
        h.push("reconstruction_error".into());
    }
    h.extend(BootstrapReport::NAMES.map(String::from));
    h
}

/// Running `E(0)^{1/2} + 2 ∫_0^t ‖F‖_{L²}` for the standard energy inequality.
#[derive(Clone, Debug, Default, PartialEq)]
struct EnergyMonitor {
    base: [f64; 2],
    integral: [f64; 2],
    last: Option<(f64, [f64; 2])>,
}

impl EnergyMonitor {
    fn update(&mut self, t: f64, energy_sqrt: [f64; 2], source: [f64; 2]) -> [f64; 2] {
        match self.last {
            None => self.base = energy_sqrt,
            Some((t0, prev)) => {
                for k in 0..2 {
                    self.integral[k] += 0.5 * (t - t0) * (prev[k] + source[k]);
                }
            }
        }
        self.last = Some((t, source));
        [0, 1].map(|k| {
            let bound = self.base[k] + 2.0 * self.integral[k];
            if bound > 0.0 {
                energy_sqrt[k] / bound
            } else {
                0.0
            }
        })
    }

    fn to_vec(&self) -> Vec<f64> {
        let (t, s) = self.last.unwrap_or((f64::NAN, [0.0; 2]));
        vec![self.base[0], self.base[1], self.integral[0], self.integral[1], self.last.is_some() as u8 as f64, t, s[0], s[1]]
    }

    fn from_vec(v: &[f64]) -> Option<Self> {
        (v.len() == 8).then(|| Self {
            base: [v[0], v[1]],
            integral: [v[2], v[3]],
            last: (v[4] != 0.0).then_some((v[5], [v[6], v[7]])),
        })
    }
}

struct WordStats {
    energy_w: f64,
    energy1_v: f64,
    conformal_w: f64,
    l2_w: f64,
    ghost: [f64; 2],
}

pub const EXCESS_COLUMN: &str = "excess_E_w_top";

pub struct DiagnosticsEngine {
    config: DiagnosticsConfig,
    linear_reference: Option<(f64, ScalarField, ScalarField)>,
    reconstruction: bool,
    words: Vec<GammaWord>,
    jet_ops: Vec<[DiffOp; 4]>,
    scaling_ops: Vec<DiffOp>,
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
    ghost: GhostAccumulators,
    monitor: EnergyMonitor,
    last: Option<DiagnosticsRecord>,
}

const EXT_ROWS: &str = "diag.rows";
const EXT_GHOST: &str = "diag.ghost";
const EXT_MONITOR: &str = "diag.monitor";

fn eval_jet(tower: &Tower, ops: &[DiffOp; 4]) -> Result<Jet> {
    let value = tower.eval(&ops[0])?;
    Ok(Jet::from_components(value, [tower.eval(&ops[1])?, tower.eval(&ops[2])?, tower.eval(&ops[3])?]))
}

impl DiagnosticsEngine {
    /// `reconstruction` adds a column for the auxiliary decomposition error,
    /// which must then be co-evolved by the run loop.
    pub fn new(config: DiagnosticsConfig, reconstruction: bool) -> Result<Self> {
        config.validate()?;
        let words = canonical_words(config.order_cap);
        let jet_ops = words
            .iter()
            .map(|w| {
                let op = w.operator();
                [op.clone(), DiffOp::partial(0).compose(&op), DiffOp::partial(1).compose(&op), DiffOp::partial(2).compose(&op)]
            })
            .collect();
        let scaling_ops = words
            .iter()
            .filter(|w| w.len() + 1 <= config.order_cap)
            .map(|w| w.then(Generator::S).operator())
            .collect();
        let header = record_header(&words, &config, reconstruction);
        let ghost = GhostAccumulators::new(words.len(), config.delta0);
        Ok(Self {
            config,
            linear_reference: None,
            reconstruction,
            words,
            jet_ops,
            scaling_ops,
            header,
            rows: Vec::new(),
            ghost,
            monitor: EnergyMonitor::default(),
            last: None,
        })
    }

    /// Initial data whose free evolution is subtracted for the excess-energy column.
    pub fn set_linear_reference(&mut self, state0: &FieldState) {
        self.linear_reference = Some((state0.t, state0.w.clone(), state0.wt.clone()));
    }

    fn excess_energy(&self, tw: &Tower) -> Result<f64> {
        let (t0, w0, w1) = self
            .linear_reference
            .as_ref()
            .ok_or_else(|| Error::Observer("excess energy requires a linear reference".into()))?;
        let t = tw.t();
        let (wl, wtl) = linear_flow_wave(w0, w1, t - t0);
        let z = ScalarField::zeros(tw.grid());
        let free = FieldState::new(t, wl, wtl, z.clone(), z, Arc::new(CouplingTensors::zero()))?;
        let diff = tw.difference(&state_towers(&free, tw.order())?.0)?;
        let cap = self.config.order_cap;
        self.words
            .iter()
            .zip(&self.jet_ops)
            .filter(|(w, _)| w.len() == cap)
            .map(|(_, ops)| eval_jet(&diff, ops).map(|j| energy_wave_jet(&j)))
            .sum()
    }

    pub fn config(&self) -> &DiagnosticsConfig {
        &self.config
    }

    pub fn words(&self) -> &[GammaWord] {
        &self.words
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn last_record(&self) -> Option<&DiagnosticsRecord> {
        self.last.as_ref()
    }

    /// `(t, value)` pairs of a named column.
    pub fn series(&self, column: &str) -> Option<Vec<(f64, f64)>> {
        let c = self.header.iter().position(|h| h == column)?;
        Some(self.rows.iter().map(|r| (r[0], r[c])).collect())
    }

    fn tower_order(&self) -> usize {
        let order = self.config.order_cap + 1;
        if self.config.enable_sobolev {
            order.max(SOBOLEV_ORDER)
        } else {
            order
        }
    }

    /// Evaluates all diagnostics at one snapshot and updates the stateful pieces.
    pub fn evaluate(&mut self, ctx: &RecordContext<'_>) -> Result<DiagnosticsRecord> {
        let state = ctx.state;
        let t = state.t;
        if let Some(prev) = &self.last {
            if !(t > prev.t) {
                return Err(Error::Observer(format!("record times must increase: {} after {}", t, prev.t)));
            }
        }
        let (tw, tv) = state_towers(state, self.tower_order())?;
        let delta0 = self.config.delta0;
        let stats: Vec<WordStats> = self
            .jet_ops
            .par_iter()
            .map(|ops| -> Result<WordStats> {
                let jw = eval_jet(&tw, ops)?;
                let jv = eval_jet(&tv, ops)?;
                Ok(WordStats {
                    energy_w: energy_wave_jet(&jw),
                    energy1_v: energy_kg_jet(&jv),
                    conformal_w: conformal_energy(&jw, t),
                    l2_w: jw.value.l2_norm(),
                    ghost: ghost_integrand(&jv, t, delta0)?,
                })
            })
            .collect::<Result<_>>()?;
        let l2_scaling_w: Vec<f64> =
            self.scaling_ops.par_iter().map(|op| tw.eval(op).map(|f| f.l2_norm())).collect::<Result<_>>()?;
        self.ghost.accumulate(t, stats.iter().map(|s| s.ghost).collect());

        let jw = eval_jet(&tw, &self.jet_ops[0])?;
        let jv = eval_jet(&tv, &self.jet_ops[0])?;
        let sup_w = state.w.max_abs();
        let sup_v = state.v.max_abs();
        let sup_dw_weighted = weighted_sup_dw(&jw, t);
        let null = nullform_bound_ratio(&jw, &jv);
        let (fw, fv) = rhs(state);
        let energy_monitor =
            self.monitor.update(t, [stats[0].energy_w.sqrt(), stats[0].energy1_v.sqrt()], [fw.l2_norm(), fv.l2_norm()]);
        let sobolev_ratio = if self.config.enable_sobolev { Some([sobolev_ratio(&tw)?, sobolev_ratio(&tv)?]) } else { None };
        let decomposition = self.config.enable_decomposition.then(|| decomposition_residual(state).relative());
        let excess_energy_w = if self.config.track_excess_energy { Some(self.excess_energy(&tw)?) } else { None };
        let reconstruction = if self.reconstruction {
            let aux = ctx.aux.ok_or_else(|| Error::Observer("reconstruction column requires the auxiliary states".into()))?;
            Some(reconstruction_error(state, aux).relative())
        } else {
            None
        };
        let inputs = BootstrapInputs {
            t,
            cap: self.config.order_cap,
            word_len: self.words.iter().map(GammaWord::len).collect(),
            energy_w: stats.iter().map(|s| s.energy_w).collect(),
            energy1_v: stats.iter().map(|s| s.energy1_v).collect(),
            l2_w: stats.iter().map(|s| s.l2_w).collect(),
            l2_scaling_w,
            ghost: self.ghost.values.iter().map(|g| g[0] + g[1]).collect(),
            sup_w,
            sup_dw_weighted,
            sup_v_weighted: weighted_sup_kg(&state.v, t),
        };
        let record = DiagnosticsRecord {
            t,
            step: ctx.step,
            beyond_horizon: ctx.beyond_horizon,
            sup_w,
            sup_v,
            sup_dw_weighted,
            energy_w: inputs.energy_w.clone(),
            energy1_v: inputs.energy1_v.clone(),
            conformal_w: stats.iter().map(|s| s.conformal_w).collect(),
            ghost: self.ghost.values.clone(),
            sobolev_ratio,
            decomposition_residual: decomposition,
            nullform_bound_ratio: null.max_ratio,
            excluded_node_count: null.excluded_nodes,
            energy_monitor,
            excess_energy_w,
            reconstruction_error: reconstruction,
            bootstrap: bootstrap_report(&inputs, self.config.delta),
        };
        let row = record.row();
        if let Some(i) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Observer(format!("non-finite diagnostic {} at t = {t}", self.header[i])));
        }
        self.rows.push(row);
        self.last = Some(record.clone());
        Ok(record)
    }

    /// Fits, boundedness ratios and extrema over the recorded series.
    pub fn summary(&self) -> Summary {
        let [a, b] = self.config.decay_window;
        let inside = |s: Vec<(f64, f64)>, beyond: &[bool]| -> Vec<(f64, f64)> {
            s.into_iter().zip(beyond).filter(|(_, &x)| !x).map(|(p, _)| p).collect()
        };
        let beyond: Vec<bool> = self.rows.iter().map(|r| r[2] != 0.0).collect();
        let fits = ["sup_w", "sup_v", EXCESS_COLUMN]
            .iter()
            .filter(|&&name| self.header.iter().any(|h| h == name))
            .map(|&name| {
                let series = inside(self.series(name).unwrap_or_default(), &beyond);
                let result = fit_decay(&series, a, b);
                FitEntry {
                    series: name.to_string(),
                    fit: result.as_ref().ok().copied(),
                    error: result.err().map(|e| e.to_string()),
                }
            })
            .collect();
        let mut monitored = vec!["sup_dw_weighted".to_string()];
        monitored.extend(BootstrapReport::NAMES.iter().map(|s| s.to_string()));
        let bounded = monitored
            .iter()
            .map(|name| {
                let series = self.series(name).unwrap_or_default();
                BoundednessEntry { series: name.clone(), max_ratio_vs_t5: ratio_vs_reference(&series, MIN_FIT_TIME) }
            })
            .collect();
        let col_max = |name: &str| self.series(name).map(|s| s.iter().map(|p| p.1).fold(0.0, f64::max));
        let ghost_monotone = self.header.iter().enumerate().filter(|(_, h)| h.starts_with("ghost_accum")).all(|(c, _)| {
            self.rows.windows(2).all(|w| w[1][c] >= w[0][c])
        });
        Summary {
            records: self.rows.len(),
            t_final: self.rows.last().map_or(0.0, |r| r[0]),
            fits,
            bounded,
            ghost_monotone,
            energy_monitor_max: [col_max("energy_monitor_w").unwrap_or(0.0), col_max("energy_monitor_v").unwrap_or(0.0)],
            nullform_bound_max: col_max("nullform_bound_ratio").unwrap_or(0.0),
            decomposition_residual_max: col_max("decomposition_residual"),
            reconstruction_error_max: col_max("reconstruction_error"),
            reconstruction_error_final: self.series("reconstruction_error").and_then(|s| s.last().map(|p| p.1)),
        }
    }
}

/// `max_{t ≥ t_ref} value(t) / value(t_ref)`, with `t_ref` the first sample at
/// or after the requested time. `None` when there is no such sample or it is zero.
pub fn ratio_vs_reference(series: &[(f64, f64)], t_ref: f64) -> Option<f64> {
    let start = series.iter().position(|p| p.0 >= t_ref - 1e-9)?;
    let base = series[start].1;
    if base == 0.0 {
        return None;
    }
    Some(series[start..].iter().map(|p| p.1 / base).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitEntry {
    pub series: String,
    pub fit: Option<DecayFit>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundednessEntry {
    pub series: String,
    pub max_ratio_vs_t5: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub records: usize,
    pub t_final: f64,
    pub fits: Vec<FitEntry>,
    pub bounded: Vec<BoundednessEntry>,
    pub ghost_monotone: bool,
    pub energy_monitor_max: [f64; 2],
    pub nullform_bound_max: f64,
    pub decomposition_residual_max: Option<f64>,
    pub reconstruction_error_max: Option<f64>,
    pub reconstruction_error_final: Option<f64>,
}

impl Observer for DiagnosticsEngine {
    fn record(&mut self, ctx: &RecordContext<'_>) -> Result<()> {
        self.evaluate(ctx).map(|_| ())
    }

    fn checkpoint_extensions(&self) -> Vec<(String, Vec<f64>)> {
        let mut rows = vec![self.header.len() as f64];
        rows.extend(self.rows.iter().flatten());
        vec![
            (EXT_ROWS.to_string(), rows),
            (EXT_GHOST.to_string(), self.ghost.to_vec()),
            (EXT_MONITOR.to_string(), self.monitor.to_vec()),
        ]
    }

    fn restore(&mut self, checkpoint: &Checkpoint) -> Result<()> {
        let missing = |k: &str| Error::Checkpoint(format!("missing or malformed extension {k}"));
        let rows = checkpoint.extension(EXT_ROWS).ok_or_else(|| missing(EXT_ROWS))?;
        let width = self.header.len();
        if rows.first().copied() != Some(width as f64) || (rows.len() - 1) % width != 0 {
            return Err(Error::Checkpoint("diagnostic columns differ from the checkpointed run".into()));
        }
        self.rows = rows[1..].chunks(width).map(<[f64]>::to_vec).collect();
        self.ghost = GhostAccumulators::from_vec(self.words.len(), self.config.delta0, checkpoint.extension(EXT_GHOST).unwrap_or(&[]))
            .ok_or_else(|| missing(EXT_GHOST))?;
        self.monitor =
            EnergyMonitor::from_vec(checkpoint.extension(EXT_MONITOR).unwrap_or(&[])).ok_or_else(|| missing(EXT_MONITOR))?;
        self.last = None;
        if let Some(r) = self.rows.last() {
            // Only the time is needed to keep the ordering check.
            self.last = Some(DiagnosticsRecord {
                t: r[0],
                step: r[1] as u64,
                beyond_horizon: r[2] != 0.0,
                sup_w: r[3],
                sup_v: r[4],
                sup_dw_weighted: r[5],
                energy_w: Vec::new(),
                energy1_v: Vec::new(),
                conformal_w: Vec::new(),
                ghost: Vec::new(),
                sobolev_ratio: None,
                decomposition_residual: None,
                nullform_bound_ratio: 0.0,
                excluded_node_count: 0,
                energy_monitor: [0.0; 2],
                excess_energy_w: None,
                reconstruction_error: None,
                bootstrap: BootstrapReport::default(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_initial_state, read_checkpoint, Bump, Component, CouplingTensors, InitialDataSpec, Target};
    use crate::grid::make_grid;
    use crate::propagate::{resume, run, RunSettings};
    use std::sync::Arc;

    fn data(c: CouplingTensors) -> crate::fields::FieldState {
        let g = make_grid(128, 32.0).unwrap();
        let spec = InitialDataSpec {
            bumps: vec![
                Bump::gaussian(Target::W, Component::Value, 0.05, [0.5, 0.0], 2.0),
                Bump::gaussian(Target::V, Component::Value, 0.05, [-0.5, 0.5], 2.0),
            ],
            ..Default::default()
        };
        build_initial_state(&spec, &g, Arc::new(c)).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(DiagnosticsConfig::default().validate().is_ok());
        let bad = |f: fn(&mut DiagnosticsConfig)| {
            let mut c = DiagnosticsConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.order_cap = 4));
        assert!(bad(|c| c.enable_sobolev = true));
        assert!(bad(|c| c.decay_window = [2.0, 80.0]));
        assert!(bad(|c| c.decay_window = [20.0, 10.0]));
        assert!(bad(|c| c.delta = 0.0));
        let mut ok = DiagnosticsConfig { order_cap: 3, enable_sobolev: true, ..Default::default() };
        assert!(ok.validate().is_ok());
        ok.delta0 = f64::NAN;
        assert!(ok.validate().is_err());
    }

    #[test]
    fn header_matches_rows() {
        let s = data(CouplingTensors::q0_only(1.0, 1.0));
        let mut settings = RunSettings::new(0.25, 2.0, 4);
        settings.decomposition = true;
        let mut engine = DiagnosticsEngine::new(DiagnosticsConfig { order_cap: 1, ..Default::default() }, true).unwrap();
        run(&s, &settings, &mut engine).unwrap();
        assert_eq!(engine.rows().len(), 3);
        assert!(engine.rows().iter().all(|r| r.len() == engine.header().len()));
        assert_eq!(engine.header().len(), 6 + 5 * 7 + 1 + 4 + 1 + 10);
        assert_eq!(engine.header()[6], "E_w[id]");
        let summary = engine.summary();
        assert!(summary.ghost_monotone);
        assert!(summary.energy_monitor_max[0] <= 1.0 && summary.energy_monitor_max[1] <= 1.0);
        assert!(summary.reconstruction_error_max.unwrap() < 1e-3);
    }

    #[test]
    fn free_energies_are_constant_across_records() {
        let s = data(CouplingTensors::zero());
        let mut engine = DiagnosticsEngine::new(DiagnosticsConfig::default(), false).unwrap();
        run(&s, &RunSettings::new(0.25, 3.0, 4), &mut engine).unwrap();
        for (c, name) in engine.header().iter().enumerate().filter(|(_, h)| h.starts_with("E_w[") || h.starts_with("E1_v[")) {
            let e0 = engine.rows()[0][c];
            for r in engine.rows() {
                assert!((r[c] - e0).abs() <= 1e-9 * e0.max(1e-12), "{name} {} {}", r[c], e0);
            }
        }
        assert!(engine.series("nullform_bound_ratio").unwrap().iter().all(|p| p.1 > 0.0 && p.1 <= 4.0));
    }

    #[test]
    fn excess_energy_vanishes_without_coupling() {
        let cfg = DiagnosticsConfig { order_cap: 1, track_excess_energy: true, ..Default::default() };
        let mut values = Vec::new();
        for c in [CouplingTensors::zero(), CouplingTensors::q0_only(1.0, 1.0)] {
            let s = data(c);
            let mut engine = DiagnosticsEngine::new(cfg.clone(), false).unwrap();
            assert!(run(&s, &RunSettings::new(0.25, 1.0, 4), &mut engine).is_err());
            let mut engine = DiagnosticsEngine::new(cfg.clone(), false).unwrap();
            engine.set_linear_reference(&s);
            run(&s, &RunSettings::new(0.25, 2.0, 4), &mut engine).unwrap();
            values.push(engine.series(EXCESS_COLUMN).unwrap());
        }
        assert!(values[0].iter().all(|p| p.1 < 1e-25), "{:?}", values[0]);
        // Second time derivatives of the difference carry the source even at t = 0.
        assert!(values[1].iter().all(|p| p.1 > 1e-12));
    }

    #[test]
    fn time_must_increase() {
        let s = data(CouplingTensors::zero());
        let mut engine = DiagnosticsEngine::new(DiagnosticsConfig { order_cap: 0, ..Default::default() }, false).unwrap();
        let ctx = RecordContext { state: &s, step: 0, aux: None, beyond_horizon: false };
        engine.record(&ctx).unwrap();
        assert!(matches!(engine.record(&ctx), Err(Error::Observer(_))));
        let mut needs_aux = DiagnosticsEngine::new(DiagnosticsConfig { order_cap: 0, ..Default::default() }, true).unwrap();
        assert!(needs_aux.record(&ctx).is_err());
    }

    #[test]
    fn resumed_rows_are_identical() {
        let s = data(CouplingTensors::q0_only(1.0, 1.0));
        let dir = std::env::temp_dir().join(format!("wkg-engine-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = DiagnosticsConfig { order_cap: 1, ..Default::default() };
        let mut settings = RunSettings::new(0.25, 3.0, 2);
        let mut full = DiagnosticsEngine::new(cfg.clone(), false).unwrap();
        run(&s, &settings, &mut full).unwrap();
        settings.checkpoint_every = Some(6);
        settings.checkpoint_dir = Some(dir.clone());
        let mut first = DiagnosticsEngine::new(cfg.clone(), false).unwrap();
        let out = run(&s, &settings, &mut first).unwrap();
        let ck = read_checkpoint(&out.checkpoints[0]).unwrap();
        let mut second = DiagnosticsEngine::new(cfg.clone(), false).unwrap();
        resume(&ck, &settings, &mut second).unwrap();
        assert_eq!(second.rows(), full.rows());
        let wrong = DiagnosticsEngine::new(DiagnosticsConfig { order_cap: 2, ..cfg }, false).unwrap().restore(&ck);
        assert!(wrong.is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn reference_ratio() {
        let s = [(1.0, 5.0), (5.0, 2.0), (6.0, 4.0), (7.0, 1.0)];
        assert_eq!(ratio_vs_reference(&s, 5.0), Some(2.0));
        assert_eq!(ratio_vs_reference(&s, 8.0), None);
        assert_eq!(ratio_vs_reference(&[(5.0, 0.0)], 5.0), None);
    }
}

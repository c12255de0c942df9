//! Run loop: steps the state, invokes observers at the record cadence and
//! writes checkpoints on schedule.

use std::path::PathBuf;

use super::aux::AuxiliaryStates;
use super::stepper::Stepper;
use crate::fields::{write_checkpoint, Checkpoint, FieldState};
use crate::{Error, Result};

/// What an observer sees at a record step.
#[derive(Clone, Copy, Debug)]
pub struct RecordContext<'a> {
    pub state: &'a FieldState,
    pub step: u64,
    pub aux: Option<&'a AuxiliaryStates>,
    /// True once `t` exceeds the safe horizon.
    pub beyond_horizon: bool,
}

pub trait Observer {
    fn record(&mut self, ctx: &RecordContext<'_>) -> Result<()>;

    /// Internal state saved alongside the fields at each checkpoint.
    fn checkpoint_extensions(&self) -> Vec<(String, Vec<f64>)> {
        Vec::new()
    }

    /// Restores the state written by [`Observer::checkpoint_extensions`].
    fn restore(&mut self, _checkpoint: &Checkpoint) -> Result<()> {
        Ok(())
    }
}

/// Observer that does nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoObserver;

impl Observer for NoObserver {
    fn record(&mut self, _ctx: &RecordContext<'_>) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RunSettings {
    pub dt: f64,
    pub t_final: f64,
    pub steps_per_record: u64,
    /// Checkpoint every this many steps, if set.
    pub checkpoint_every: Option<u64>,
    pub checkpoint_dir: Option<PathBuf>,
    pub safe_horizon: Option<f64>,
    /// Co-evolve the auxiliary decomposition.
    pub decomposition: bool,
}

impl RunSettings {
    pub fn new(dt: f64, t_final: f64, steps_per_record: u64) -> Self {
        Self {
            dt,
            t_final,
            steps_per_record,
            checkpoint_every: None,
            checkpoint_dir: None,
            safe_horizon: None,
            decomposition: false,
        }
    }

    /// Number of steps, requiring `t_final` to be a whole number of record intervals.
    pub fn total_steps(&self) -> Result<u64> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidTimeStep(self.dt));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidRunLength(format!("T = {} must be finite and >= 0", self.t_final)));
        }
        if self.steps_per_record == 0 {
            return Err(Error::InvalidRunLength("record cadence must be at least one step".into()));
        }
        let n = (self.t_final / self.dt).round();
        if (n * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(1.0) {
            return Err(Error::InvalidRunLength(format!(
                "T = {} is not a multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        let n = n as u64;
        if n % self.steps_per_record != 0 {
            return Err(Error::InvalidRunLength(format!(
                "{n} steps are not a multiple of the record cadence {}",
                self.steps_per_record
            )));
        }
        Ok(n)
    }

    pub fn checkpoint_path(&self, step: u64) -> Option<PathBuf> {
        self.checkpoint_dir.as_ref().map(|d| d.join(format!("checkpoint-{step:08}.wkg")))
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub final_state: FieldState,
    pub aux: Option<AuxiliaryStates>,
    pub steps: u64,
    pub records: usize,
    pub checkpoints: Vec<PathBuf>,
}

const EXT_STEP: &str = "run.step";
const EXT_T0: &str = "run.t0";

/// Runs from `state0` to `t_final`.
pub fn run(state0: &FieldState, settings: &RunSettings, observer: &mut dyn Observer) -> Result<RunOutcome> {
    let aux = settings.decomposition.then(|| AuxiliaryStates::initial(state0));
    drive(state0.clone(), state0.t, 0, aux, settings, observer, true)
}

/// Continues a run from a checkpoint written by [`run`] with the same settings.
pub fn resume(checkpoint: &Checkpoint, settings: &RunSettings, observer: &mut dyn Observer) -> Result<RunOutcome> {
    let step = checkpoint
        .extension(EXT_STEP)
        .and_then(|v| v.first().copied())
        .ok_or_else(|| Error::Checkpoint("missing run.step".into()))? as u64;
    let t0 = checkpoint
        .extension(EXT_T0)
        .and_then(|v| v.first().copied())
        .ok_or_else(|| Error::Checkpoint("missing run.t0".into()))?;
    let aux = if settings.decomposition {
        Some(AuxiliaryStates::from_extensions(checkpoint.state.grid(), &checkpoint.extensions)?)
    } else {
        None
    };
    observer.restore(checkpoint)?;
    drive(checkpoint.state.clone(), t0, step, aux, settings, observer, false)
}

fn drive(
    mut state: FieldState,
    t0: f64,
    start_step: u64,
    mut aux: Option<AuxiliaryStates>,
    settings: &RunSettings,
    observer: &mut dyn Observer,
    record_start: bool,
) -> Result<RunOutcome> {
    let total = settings.total_steps()?;
    if start_step > total {
        return Err(Error::Checkpoint(format!("checkpoint step {start_step} lies beyond the run ({total} steps)")));
    }
    let stepper = Stepper::new(state.grid(), settings.dt)?;
    if let Some(h) = settings.safe_horizon {
        if t0 + settings.t_final > h {
            log::warn!(
                "run extends to t = {} beyond the safe horizon {h:.3}; later records are flagged",
                t0 + settings.t_final
            );
        }
    }
    let mut records = 0;
    let mut checkpoints = Vec::new();
    let emit = |state: &FieldState, aux: Option<&AuxiliaryStates>, step: u64, observer: &mut dyn Observer| {
        let beyond_horizon = settings.safe_horizon.is_some_and(|h| state.t > h);
        observer
            .record(&RecordContext { state, step, aux, beyond_horizon })
            .map_err(|e| match e {
                Error::Observer(_) => e,
                other => Error::Observer(other.to_string()),
            })
    };
    if record_start {
        emit(&state, aux.as_ref(), start_step, observer)?;
        records += 1;
    }
    for step in start_step + 1..=total {
        let (mut next, mid) = stepper.step_with_midpoint(&state, aux.is_some())?;
        // Times derive from the step index so resumed runs match bit for bit.
        next.t = t0 + step as f64 * settings.dt;
        if let (Some(a), Some(m)) = (aux.as_mut(), mid) {
            a.advance(stepper.wave_table(), &m);
            a.t = next.t;
        }
        state = next;
        if step % settings.steps_per_record == 0 {
            emit(&state, aux.as_ref(), step, observer)?;
            records += 1;
        }
        if let (Some(every), Some(path)) = (settings.checkpoint_every, settings.checkpoint_path(step)) {
            if every > 0 && step % every == 0 && step < total {
                let mut extensions = vec![
                    (EXT_STEP.to_string(), vec![step as f64]),
                    (EXT_T0.to_string(), vec![t0]),
                ];
                if let Some(a) = &aux {
                    extensions.extend(a.to_extensions());
                }
                extensions.extend(observer.checkpoint_extensions());
                write_checkpoint(&path, &Checkpoint { state: state.clone(), extensions })?;
                checkpoints.push(path);
            }
        }
    }
    Ok(RunOutcome { final_state: state, aux, steps: total, records, checkpoints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::energy_wave;
    use crate::fields::{build_initial_state, read_checkpoint, Bump, Component, CouplingTensors, InitialDataSpec, Target};
    use crate::grid::make_grid;
    use std::sync::Arc;

    struct Collect(Vec<(u64, f64, f64)>);

    impl Observer for Collect {
        fn record(&mut self, ctx: &RecordContext<'_>) -> Result<()> {
            self.0.push((ctx.step, ctx.state.t, energy_wave(&ctx.state.w, &ctx.state.wt)));
            Ok(())
        }
    }

    fn data(c: CouplingTensors) -> FieldState {
        let g = make_grid(64, 24.0).unwrap();
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
    fn zero_length_run_records_once() {
        let s = data(CouplingTensors::zero());
        let mut obs = Collect(Vec::new());
        let out = run(&s, &RunSettings::new(0.25, 0.0, 1), &mut obs).unwrap();
        assert_eq!(obs.0.len(), 1);
        assert_eq!(out.records, 1);
        assert_eq!(out.final_state.w.values(), s.w.values());
    }

    #[test]
    fn linear_run_conserves_energy() {
        let s = data(CouplingTensors::zero());
        let mut obs = Collect(Vec::new());
        run(&s, &RunSettings::new(0.25, 10.0, 4), &mut obs).unwrap();
        assert_eq!(obs.0.len(), 11);
        let e0 = obs.0[0].2;
        for &(_, _, e) in &obs.0 {
            assert!((e - e0).abs() <= 1e-10 * e0);
        }
        assert_eq!(obs.0.last().unwrap().1, 10.0);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let s = data(CouplingTensors::zero());
        let mut obs = NoObserver;
        assert!(run(&s, &RunSettings::new(0.3, 1.0, 1), &mut obs).is_err());
        assert!(run(&s, &RunSettings::new(0.25, 1.0, 3), &mut obs).is_err());
        assert!(run(&s, &RunSettings::new(-0.25, 1.0, 1), &mut obs).is_err());
    }

    #[test]
    fn resume_reproduces_the_trajectory() {
        let s = data(CouplingTensors::q0_only(1.0, 1.0));
        let dir = std::env::temp_dir().join(format!("wkg-run-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut settings = RunSettings::new(0.25, 4.0, 2);
        settings.decomposition = true;
        let mut full = Collect(Vec::new());
        let reference = run(&s, &settings, &mut full).unwrap();

        settings.checkpoint_every = Some(6);
        settings.checkpoint_dir = Some(dir.clone());
        let mut first = Collect(Vec::new());
        let out = run(&s, &settings, &mut first).unwrap();
        assert_eq!(out.checkpoints.len(), 2);
        let ck = read_checkpoint(&out.checkpoints[0]).unwrap();
        let mut rest = Collect(Vec::new());
        let resumed = resume(&ck, &settings, &mut rest).unwrap();
        assert_eq!(resumed.final_state.w.values(), reference.final_state.w.values());
        assert_eq!(resumed.final_state.vt.values(), reference.final_state.vt.values());
        let tail: Vec<_> = full.0.iter().filter(|r| r.0 > 6).cloned().collect();
        assert_eq!(rest.0, tail);
        let (a, b) = (resumed.aux.unwrap(), reference.aux.unwrap());
        assert_eq!(a.reconstruct().values(), b.reconstruct().values());
        std::fs::remove_dir_all(&dir).ok();
    }
}

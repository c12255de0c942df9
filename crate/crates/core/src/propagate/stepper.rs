//! Strang splitting: half nonlinear kick, exact linear flow, half kick.

use std::fmt;
use std::sync::Arc;

use super::linear::{FlowTable, LinearKind};
use crate::fields::FieldState;
use crate::grid::{Grid, ScalarField, Spectrum};
use crate::nullforms::{dealias_pair, BilinearForm};
use crate::{Error, Result};

/// External source added to the right-hand sides, `t -> (f_w, f_v)`.
pub type Forcing = dyn Fn(f64) -> (ScalarField, ScalarField) + Send + Sync;

#[derive(Clone)]
pub struct Stepper {
    grid: Arc<Grid>,
    dt: f64,
    wave: FlowTable,
    kg: FlowTable,
    wave_half: FlowTable,
    kg_half: FlowTable,
    forcing: Option<Arc<Forcing>>,
}

impl fmt::Debug for Stepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stepper")
            .field("n", &self.grid.n())
            .field("dt", &self.dt)
            .field("forced", &self.forcing.is_some())
            .finish()
    }
}

impl Stepper {
    /// `dt` may be negative (backward stepping) but must be finite and nonzero.
    pub fn new(grid: &Arc<Grid>, dt: f64) -> Result<Self> {
        if !dt.is_finite() || dt == 0.0 {
            return Err(Error::InvalidTimeStep(dt));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            dt,
            wave: FlowTable::new(grid, LinearKind::Wave, dt),
            kg: FlowTable::new(grid, LinearKind::KleinGordon, dt),
            wave_half: FlowTable::new(grid, LinearKind::Wave, 0.5 * dt),
            kg_half: FlowTable::new(grid, LinearKind::KleinGordon, 0.5 * dt),
            forcing: None,
        })
    }

    pub fn with_forcing(mut self, forcing: Arc<Forcing>) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn wave_table(&self) -> &FlowTable {
        &self.wave
    }

    /// Integrates `∂s wt = F_w`, `∂s vt = F_v` over `h` with `w`, `v` frozen,
    /// using the explicit midpoint rule. Each evaluation of `F` is dealiased.
    pub fn kick(&self, state: &FieldState, h: f64) -> FieldState {
        let bw = BilinearForm::wave(&state.couplings);
        let bv = BilinearForm::kg(&state.couplings);
        let coupled = !(bw.is_zero() && bv.is_zero());
        if !coupled && self.forcing.is_none() {
            return state.clone();
        }
        let forcing = self.forcing.as_ref().map(|f| f(state.t));
        let eval = |wt: &ScalarField, vt: &ScalarField, grads: &Option<[ScalarField; 4]>| {
            let (mut fw, mut fv) = match grads {
                Some([w1, w2, v1, v2]) => {
                    let len = self.grid.len();
                    let (mut rw, mut rv) = (vec![0.0; len], vec![0.0; len]);
                    let dm = [wt.values(), w1.values(), w2.values()];
                    let dn = [vt.values(), v1.values(), v2.values()];
                    bw.accumulate(dm, dn, 1.0, &mut rw);
                    bv.accumulate(dm, dn, 1.0, &mut rv);
                    dealias_pair(
                        &ScalarField::from_raw(&self.grid, rw),
                        &ScalarField::from_raw(&self.grid, rv),
                    )
                }
                None => (ScalarField::zeros(&self.grid), ScalarField::zeros(&self.grid)),
            };
            if let Some((gw, gv)) = &forcing {
                fw.axpy(1.0, gw);
                fv.axpy(1.0, gv);
            }
            (fw, fv)
        };
        let grads = coupled.then(|| {
            let (sw, sv) = self.grid.transform_pair(&state.w, &state.v);
            let (w1, w2) = Spectrum::pair_to_fields(&sw.derivative(1, 0), &sw.derivative(0, 1));
            let (v1, v2) = Spectrum::pair_to_fields(&sv.derivative(1, 0), &sv.derivative(0, 1));
            [w1, w2, v1, v2]
        });
        let (fw1, fv1) = eval(&state.wt, &state.vt, &grads);
        let mut wt_mid = state.wt.clone();
        wt_mid.axpy(0.5 * h, &fw1);
        let mut vt_mid = state.vt.clone();
        vt_mid.axpy(0.5 * h, &fv1);
        let (fw2, fv2) = eval(&wt_mid, &vt_mid, &grads);
        let mut out = state.clone();
        out.wt.axpy(h, &fw2);
        out.vt.axpy(h, &fv2);
        out
    }

    fn flow(&self, state: &FieldState, wave: &FlowTable, kg: &FlowTable) -> FieldState {
        let (w, wt) = wave.flow(&state.w, &state.wt);
        let (v, vt) = kg.flow(&state.v, &state.vt);
        FieldState { t: state.t + wave.t, w, wt, v, vt, couplings: Arc::clone(&state.couplings) }
    }

    /// Exact free flow over the full step.
    pub fn linear_step(&self, state: &FieldState) -> FieldState {
        self.flow(state, &self.wave, &self.kg)
    }

    /// One Strang step. The blow-up detector runs on the result.
    pub fn step(&self, state: &FieldState) -> Result<FieldState> {
        Ok(self.step_with_midpoint(state, false)?.0)
    }

    /// One Strang step, optionally also returning the second-order midpoint
    /// approximation `Φ(dt/2) K(dt/2) X_n` of the state at `t + dt/2`.
    pub fn step_with_midpoint(
        &self,
        state: &FieldState,
        want_midpoint: bool,
    ) -> Result<(FieldState, Option<FieldState>)> {
        let h = 0.5 * self.dt;
        let kicked = self.kick(state, h);
        let midpoint = want_midpoint.then(|| self.flow(&kicked, &self.wave_half, &self.kg_half));
        let mut flowed = self.flow(&kicked, &self.wave, &self.kg);
        flowed.t = state.t + self.dt;
        let next = self.kick(&flowed, h);
        next.check_blow_up()?;
        Ok((next, midpoint))
    }
}

/// Convenience single step with a fresh stepper.
pub fn step(state: &FieldState, dt: f64) -> Result<FieldState> {
    Stepper::new(state.grid(), dt)?.step(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_initial_state, Bump, Component, CouplingTensors, InitialDataSpec, Target};
    use crate::grid::make_grid;
    use crate::propagate::{linear_flow_kg, linear_flow_wave};

    fn data(c: CouplingTensors, eps: f64) -> FieldState {
        let g = make_grid(64, 24.0).unwrap();
        let spec = InitialDataSpec {
            bumps: vec![
                Bump::gaussian(Target::W, Component::Value, eps, [0.5, 0.0], 2.0),
                Bump::gaussian(Target::V, Component::Value, eps, [-0.5, 0.5], 2.0),
                Bump::gaussian(Target::V, Component::Velocity, 0.5 * eps, [0.0, -0.5], 1.8),
            ],
            ..Default::default()
        };
        build_initial_state(&spec, &g, Arc::new(c)).unwrap()
    }

    fn diff(a: &FieldState, b: &FieldState) -> f64 {
        a.fields()
            .iter()
            .zip(b.fields().iter())
            .map(|((_, x), (_, y))| (*x - *y).max_abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_couplings_reduce_to_linear_flow() {
        let s = data(CouplingTensors::zero(), 0.5);
        let next = step(&s, 0.3).unwrap();
        let (w, wt) = linear_flow_wave(&s.w, &s.wt, 0.3);
        let (v, vt) = linear_flow_kg(&s.v, &s.vt, 0.3);
        assert!((&next.w - &w).max_abs() < 1e-12);
        assert!((&next.wt - &wt).max_abs() < 1e-12);
        assert!((&next.v - &v).max_abs() < 1e-12);
        assert!((&next.vt - &vt).max_abs() < 1e-12);
        assert!((next.t - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_fields_stay_zero() {
        let g = make_grid(16, 8.0).unwrap();
        let s = FieldState::zeros(&g, Arc::new(CouplingTensors::q0_only(1.0, 1.0)));
        let next = step(&s, 0.5).unwrap();
        for (_, f) in next.fields() {
            assert_eq!(f.max_abs(), 0.0);
        }
    }

    #[test]
    fn rejects_degenerate_time_steps() {
        let g = make_grid(16, 8.0).unwrap();
        assert!(Stepper::new(&g, 0.0).is_err());
        assert!(Stepper::new(&g, f64::NAN).is_err());
        assert!(Stepper::new(&g, -0.1).is_ok());
    }

    #[test]
    fn linear_part_is_reversible() {
        let s = data(CouplingTensors::zero(), 0.5);
        let fwd = Stepper::new(s.grid(), 0.25).unwrap();
        let back = Stepper::new(s.grid(), -0.25).unwrap();
        let there = fwd.step(&s).unwrap();
        let again = back.step(&there).unwrap();
        assert!(diff(&again, &s) < 1e-12);
    }

    #[test]
    fn richardson_ratio_is_second_order() {
        let mut c = CouplingTensors::q0_only(1.0, 1.0);
        c.c1ab[0][1] = 0.5;
        c.c2ab[1][2] = -0.5;
        let s = data(c, 0.2);
        let run = |dt: f64, steps: usize| {
            let st = Stepper::new(s.grid(), dt).unwrap();
            (0..steps).fold(s.clone(), |x, _| st.step(&x).unwrap())
        };
        let coarse = run(0.4, 10);
        let mid = run(0.2, 20);
        let fine = run(0.1, 40);
        let ratio = diff(&coarse, &mid) / diff(&mid, &fine);
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn blow_up_is_detected() {
        let s = data(CouplingTensors::q0_only(1.0, 1.0), 0.5);
        let mut big = s.clone();
        big.wt = ScalarField::constant(s.grid(), 2e6);
        assert!(matches!(step(&big, 0.1), Err(Error::BlowUp { .. })));
    }
}

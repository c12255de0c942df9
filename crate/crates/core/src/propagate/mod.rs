//! Time evolution: exact linear flows, the Strang stepper, the run loop,
//! the auxiliary decomposition and real-space quadrature oracles.

mod aux;
mod linear;
pub mod oracle;
mod run;
mod stepper;

pub use aux::{reconstruction_error, AuxiliaryStates, ReconstructionError, WaveState};
pub use linear::{linear_flow_kg, linear_flow_wave, FlowTable, LinearKind};
pub use oracle::{oracle_pointwise_wave, oracle_pointwise_wave_u0};
pub use run::{resume, run, NoObserver, Observer, RecordContext, RunOutcome, RunSettings};
pub use stepper::{step, Forcing, Stepper};

use crate::fields::FieldState;
use crate::Result;

/// Co-evolves the auxiliary problems alongside the main state and returns
/// the reconstruction error at every `steps_per_sample` steps, starting at
/// `t = state0.t`.
pub fn evolve_decomposition(
    state0: &FieldState,
    dt: f64,
    steps: u64,
    steps_per_sample: u64,
) -> Result<(Vec<ReconstructionError>, FieldState, AuxiliaryStates)> {
    let stepper = Stepper::new(state0.grid(), dt)?;
    let mut aux = AuxiliaryStates::initial(state0);
    let mut state = state0.clone();
    let mut samples = vec![reconstruction_error(&state, &aux)];
    for k in 1..=steps {
        let (mut next, mid) = stepper.step_with_midpoint(&state, true)?;
        next.t = state0.t + k as f64 * dt;
        aux.advance(stepper.wave_table(), &mid.expect("midpoint requested"));
        aux.t = next.t;
        state = next;
        if steps_per_sample > 0 && k % steps_per_sample == 0 {
            samples.push(reconstruction_error(&state, &aux));
        }
    }
    Ok((samples, state, aux))
}

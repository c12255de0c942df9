//! Auxiliary wave problems whose sum reconstructs `w`:
//!
//! ```text
//! w = Υ0 + Υ1 + ∂^α Ψ_α + ∂_α Φ^α
//! -□Υ0 = 0,  -□Υ1 = G,  -□Ψ_α = F_α,  -□Φ^α = H^α
//! ```
//!
//! All auxiliary problems start from zero data except `Υ0`. Because
//! `∂t(-∂tΨ0 + ∂tΦ^0)` equals `-F_0 + H^0` at `t = 0`, the velocity of `Υ0`
//! is `w1 + F_0(0) - H^0(0)` so that the reconstruction matches `∂t w` too.

use std::sync::Arc;

use super::linear::FlowTable;
use crate::fields::FieldState;
use crate::grid::{Grid, ScalarField, Spectrum};
use crate::nullforms::{decomposition_spectra, rhs_from_jets, state_jets};
use crate::{Error, Result};

/// A solution of a scalar wave problem at one time.
#[derive(Clone, Debug)]
pub struct WaveState {
    pub u: ScalarField,
    pub ut: ScalarField,
}

impl WaveState {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self { u: ScalarField::zeros(grid), ut: ScalarField::zeros(grid) }
    }

    fn advance(&mut self, table: &FlowTable, source: &Spectrum) {
        let (u, ut) = if source.is_zero() {
            table.flow(&self.u, &self.ut)
        } else {
            table.flow_with_source(&self.u, &self.ut, source)
        };
        self.u = u;
        self.ut = ut;
    }
}

#[derive(Clone, Debug)]
pub struct AuxiliaryStates {
    pub t: f64,
    pub upsilon0: WaveState,
    pub upsilon1: WaveState,
    pub psi: [WaveState; 3],
    pub phi: [WaveState; 3],
}

const NAMES: [&str; 8] = ["upsilon0", "upsilon1", "psi0", "psi1", "psi2", "phi0", "phi1", "phi2"];

impl AuxiliaryStates {
    /// Data at the time of `state0`.
    pub fn initial(state0: &FieldState) -> Self {
        let grid = state0.grid();
        let (w, v) = state_jets(state0);
        let (fw, _) = rhs_from_jets(&state0.couplings, &w, &v);
        let src = decomposition_spectra(&state0.couplings, &w, &v, &fw);
        let (f0, h0) = Spectrum::pair_to_fields(&src.f[0], &src.h[0]);
        let mut velocity = state0.wt.clone();
        velocity.axpy(1.0, &f0);
        velocity.axpy(-1.0, &h0);
        let z = || WaveState::zeros(grid);
        Self {
            t: state0.t,
            upsilon0: WaveState { u: state0.w.clone(), ut: velocity },
            upsilon1: z(),
            psi: [z(), z(), z()],
            phi: [z(), z(), z()],
        }
    }

    fn all(&self) -> [&WaveState; 8] {
        [
            &self.upsilon0,
            &self.upsilon1,
            &self.psi[0],
            &self.psi[1],
            &self.psi[2],
            &self.phi[0],
            &self.phi[1],
            &self.phi[2],
        ]
    }

    /// `Υ0 + Υ1 - ∂tΨ0 + ∂iΨi + ∂tΦ^0 + ∂iΦ^i`.
    pub fn reconstruct(&self) -> ScalarField {
        let grid = self.upsilon0.u.grid();
        let mut out = &self.upsilon0.u + &self.upsilon1.u;
        out.axpy(-1.0, &self.psi[0].ut);
        out.axpy(1.0, &self.phi[0].ut);
        let s1 = &self.psi[1].u + &self.phi[1].u;
        let s2 = &self.psi[2].u + &self.phi[2].u;
        let (t1, t2) = grid.transform_pair(&s1, &s2);
        let mut div = t1.derivative(1, 0);
        div.add_scaled(1.0, &t2.derivative(0, 1));
        out.axpy(1.0, &div.to_field());
        out
    }

    /// Advances every auxiliary problem by one step of `table.t`, with the
    /// sources frozen at their values on `midpoint`.
    pub fn advance(&mut self, table: &FlowTable, midpoint: &FieldState) {
        let (w, v) = state_jets(midpoint);
        let (fw, _) = rhs_from_jets(&midpoint.couplings, &w, &v);
        let src = decomposition_spectra(&midpoint.couplings, &w, &v, &fw);
        let grid = midpoint.grid();
        self.upsilon0.advance(table, &Spectrum::zeros(grid));
        self.upsilon1.advance(table, &src.g);
        for a in 0..3 {
            self.psi[a].advance(table, &src.f[a]);
            self.phi[a].advance(table, &src.h[a]);
        }
        self.t += table.t;
    }

    /// Named vectors for a checkpoint extension block.
    pub fn to_extensions(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = vec![("aux.t".to_string(), vec![self.t])];
        for (name, s) in NAMES.iter().zip(self.all()) {
            out.push((format!("aux.{name}.u"), s.u.values().to_vec()));
            out.push((format!("aux.{name}.ut"), s.ut.values().to_vec()));
        }
        out
    }

    pub fn from_extensions(grid: &Arc<Grid>, ext: &[(String, Vec<f64>)]) -> Result<Self> {
        let find = |key: &str| -> Result<Vec<f64>> {
            ext.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::Checkpoint(format!("missing extension {key}")))
        };
        let wave = |name: &str| -> Result<WaveState> {
            Ok(WaveState {
                u: ScalarField::from_values(grid, find(&format!("aux.{name}.u"))?)?,
                ut: ScalarField::from_values(grid, find(&format!("aux.{name}.ut"))?)?,
            })
        };
        let t = *find("aux.t")?.first().ok_or_else(|| Error::Checkpoint("empty aux.t".into()))?;
        Ok(Self {
            t,
            upsilon0: wave(NAMES[0])?,
            upsilon1: wave(NAMES[1])?,
            psi: [wave(NAMES[2])?, wave(NAMES[3])?, wave(NAMES[4])?],
            phi: [wave(NAMES[5])?, wave(NAMES[6])?, wave(NAMES[7])?],
        })
    }
}

/// `‖w - reconstruction‖_∞` and `‖w‖_∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructionError {
    pub t: f64,
    pub absolute: f64,
    pub w_sup: f64,
}

impl ReconstructionError {
    pub fn relative(&self) -> f64 {
        if self.w_sup == 0.0 {
            self.absolute
        } else {
            self.absolute / self.w_sup
        }
    }
}

pub fn reconstruction_error(state: &FieldState, aux: &AuxiliaryStates) -> ReconstructionError {
    let r = aux.reconstruct();
    ReconstructionError { t: state.t, absolute: (&state.w - &r).max_abs(), w_sup: state.w.max_abs() }
}

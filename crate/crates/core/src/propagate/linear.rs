//! Exact Fourier-multiplier flows for `u_tt = Δu - μu + f` with `μ ∈ {0, 1}`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::grid::{Grid, ScalarField, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearKind {
    /// Dispersion `κ = |k|`.
    Wave,
    /// Dispersion `κ = ⟨k⟩ = √(1 + |k|²)`.
    KleinGordon,
}

impl LinearKind {
    pub fn mass_squared(self) -> f64 {
        match self {
            LinearKind::Wave => 0.0,
            LinearKind::KleinGordon => 1.0,
        }
    }
}

/// Per-mode multipliers of the flow over a fixed time `t`:
///
/// ```text
/// û(t)  =  cos(κt) û  + sin(κt)/κ ût + (1 - cos κt)/κ² f̂
/// ût(t) = -κ sin(κt) û + cos(κt) ût  + sin(κt)/κ f̂
/// ```
///
/// for a constant source `f`. At `κ = 0` the limits `t` and `t²/2` are used.
#[derive(Clone, Debug)]
pub struct FlowTable {
    pub kind: LinearKind,
    pub t: f64,
    pub cos: Vec<f64>,
    pub sinc: Vec<f64>,
    pub ksin: Vec<f64>,
    pub source: Vec<f64>,
}

impl FlowTable {
    pub fn new(grid: &Grid, kind: LinearKind, t: f64) -> Self {
        let n = grid.n();
        let k = grid.wavenumbers();
        let mu = kind.mass_squared();
        let len = n * n;
        let (mut cos, mut sinc, mut ksin, mut source) =
            (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                let kappa2 = k[i] * k[i] + k[j] * k[j] + mu;
                let kappa = kappa2.sqrt();
                let (s, c) = (kappa * t).sin_cos();
                cos[idx] = c;
                ksin[idx] = kappa * s;
                if kappa == 0.0 {
                    sinc[idx] = t;
                    source[idx] = 0.5 * t * t;
                } else {
                    sinc[idx] = s / kappa;
                    // (1 - cos κt)/κ² = 2 sin²(κt/2)/κ², free of cancellation.
                    let half = (0.5 * kappa * t).sin();
                    source[idx] = 2.0 * half * half / kappa2;
                }
            }
        }
        Self { kind, t, cos, sinc, ksin, source }
    }

    /// Advances `(û, ût)` in place.
    pub fn apply(&self, u: &mut [Complex64], ut: &mut [Complex64]) {
        for idx in 0..u.len() {
            let (a, b) = (u[idx], ut[idx]);
            u[idx] = a * self.cos[idx] + b * self.sinc[idx];
            ut[idx] = b * self.cos[idx] - a * self.ksin[idx];
        }
    }

    /// Advances `(û, ût)` in place with a constant source `f̂`.
    pub fn apply_with_source(&self, u: &mut [Complex64], ut: &mut [Complex64], f: &[Complex64]) {
        for idx in 0..u.len() {
            let (a, b, s) = (u[idx], ut[idx], f[idx]);
            u[idx] = a * self.cos[idx] + b * self.sinc[idx] + s * self.source[idx];
            ut[idx] = b * self.cos[idx] - a * self.ksin[idx] + s * self.sinc[idx];
        }
    }

    /// Advances a physical-space pair.
    pub fn flow(&self, u: &ScalarField, ut: &ScalarField) -> (ScalarField, ScalarField) {
        let grid = u.grid();
        let (mut su, mut sut) = grid.transform_pair(u, ut);
        self.apply(su.data_mut(), sut.data_mut());
        Spectrum::pair_to_fields(&su, &sut)
    }

    pub fn flow_with_source(
        &self,
        u: &ScalarField,
        ut: &ScalarField,
        f: &Spectrum,
    ) -> (ScalarField, ScalarField) {
        let grid = u.grid();
        let (mut su, mut sut) = grid.transform_pair(u, ut);
        self.apply_with_source(su.data_mut(), sut.data_mut(), f.data());
        Spectrum::pair_to_fields(&su, &sut)
    }
}

fn flow_once(kind: LinearKind, u: &ScalarField, ut: &ScalarField, t: f64) -> (ScalarField, ScalarField) {
    let grid: &Arc<Grid> = u.grid();
    FlowTable::new(grid, kind, t).flow(u, ut)
}

/// Free wave evolution `u_tt = Δu` over time `t`.
pub fn linear_flow_wave(u: &ScalarField, ut: &ScalarField, t: f64) -> (ScalarField, ScalarField) {
    flow_once(LinearKind::Wave, u, ut, t)
}

/// Free Klein-Gordon evolution `u_tt = Δu - u` over time `t`.
pub fn linear_flow_kg(u: &ScalarField, ut: &ScalarField, t: f64) -> (ScalarField, ScalarField) {
    flow_once(LinearKind::KleinGordon, u, ut, t)
}

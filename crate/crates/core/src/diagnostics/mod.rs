//! Observables recorded along a run.
mod bootstrap;
mod decay;
mod energy;
mod engine;
mod ghost;
pub mod output;
mod pointwise;

pub use bootstrap::{bootstrap_report, BootstrapInputs, BootstrapReport};
pub use decay::{fit_decay, DecayFit, MIN_FIT_POINTS, MIN_FIT_TIME};
pub use energy::{conformal_energy, energy_from_parts, energy_kg, energy_kg_jet, energy_wave, energy_wave_jet};
pub use engine::{
    ratio_vs_reference, record_header, BoundednessEntry, DiagnosticsConfig, DiagnosticsEngine, DiagnosticsRecord,
    FitEntry, Summary, EXCESS_COLUMN, MAX_ORDER_CAP,
};
pub use ghost::{ghost_integrand, ghost_zero_source_constant, GhostAccumulators};
pub use pointwise::{sobolev_ratio, weighted_sup_dw, weighted_sup_kg, SOBOLEV_ORDER};

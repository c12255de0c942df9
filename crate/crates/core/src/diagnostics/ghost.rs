//! Ghost-weight spacetime integrals
//! `∫_0^t ⟨s⟩^{-δ0} ∫ (u² + (G_i u)²) ⟨r - s⟩^{-3/2} dx ds`, per word and per `i`.

use crate::nullforms::Jet;
use crate::propagate::oracle::{ghost_weight_sup, DEFAULT_ABS_TOL};
use crate::vectorfields::good_derivative;
use crate::Result;

/// The spatial integrand at time `t` for `i = 1, 2`.
pub fn ghost_integrand(jet: &Jet, t: f64, delta0: f64) -> Result<[f64; 2]> {
    let grid = jet.grid();
    let r = grid.radius_table();
    let h2 = grid.spacing().powi(2);
    let time_weight = (1.0 + t * t).powf(-0.5 * delta0);
    let u = jet.value.values();
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let gi = good_derivative(i + 1, jet)?;
        let g = gi.field.values();
        let sum: f64 = (0..u.len())
            .map(|k| (u[k] * u[k] + g[k] * g[k]) * (1.0 + (r[k] - t).powi(2)).powf(-0.75))
            .sum();
        *o = time_weight * sum * h2;
    }
    Ok(out)
}

/// Running trapezoid-in-time accumulators for a list of words.
#[derive(Clone, Debug, PartialEq)]
pub struct GhostAccumulators {
    pub delta0: f64,
    pub values: Vec<[f64; 2]>,
    last: Option<(f64, Vec<[f64; 2]>)>,
}

impl GhostAccumulators {
    pub fn new(words: usize, delta0: f64) -> Self {
        Self { delta0, values: vec![[0.0; 2]; words], last: None }
    }

    /// Adds the integral from the previous sample to `t`.
    pub fn accumulate(&mut self, t: f64, integrands: Vec<[f64; 2]>) {
        if let Some((t0, prev)) = &self.last {
            let half = 0.5 * (t - t0);
            for ((acc, a), b) in self.values.iter_mut().zip(prev).zip(&integrands) {
                acc[0] += half * (a[0] + b[0]);
                acc[1] += half * (a[1] + b[1]);
            }
        }
        self.last = Some((t, integrands));
    }

    /// Flat state for checkpoints: `[t_last, has_last, values..., last...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = vec![self.last.as_ref().map_or(0.0, |l| l.0), self.last.is_some() as u8 as f64];
        out.extend(self.values.iter().flatten());
        if let Some((_, l)) = &self.last {
            out.extend(l.iter().flatten());
        }
        out
    }

    pub fn from_vec(words: usize, delta0: f64, v: &[f64]) -> Option<Self> {
        let has_last = *v.get(1)? != 0.0;
        let need = 2 + 2 * words * if has_last { 2 } else { 1 };
        if v.len() != need {
            return None;
        }
        let pairs = |s: &[f64]| s.chunks(2).map(|c| [c[0], c[1]]).collect::<Vec<_>>();
        let values = pairs(&v[2..2 + 2 * words]);
        let last = has_last.then(|| (v[0], pairs(&v[2 + 2 * words..])));
        Some(Self { delta0, values, last })
    }
}

/// `κ` in `Σ_i accumulator(T) ≤ κ E1(u)(0)` for free Klein-Gordon solutions:
/// the weight identity gives `∫∫ q'(|Gu|² + u²) ≤ e^{q_max} E1(0)`, and each of
/// the two accumulators carries its own copy of `u²`.
pub fn ghost_zero_source_constant() -> Result<f64> {
    Ok(2.0 * ghost_weight_sup(DEFAULT_ABS_TOL)?.exp())
}

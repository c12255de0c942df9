//! Weighted sup norms and the global Sobolev ratio.

use crate::nullforms::Jet;
use crate::vectorfields::{canonical_words, Tower};
use crate::{Error, Result};

/// Order of the vector-field sum in the global Sobolev inequality.
pub const SOBOLEV_ORDER: usize = 3;

fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// `max ⟨t - r⟩^{3/4} ⟨t⟩^{1/2} |∂_α u|` over nodes and `α`, skipping nodes
/// with `r < h/2`.
pub fn weighted_sup_dw(jet: &Jet, t: f64) -> f64 {
    let grid = jet.grid();
    let r = grid.radius_table();
    let cut = 0.5 * grid.spacing();
    let tw = bracket(t).sqrt();
    let mut worst = 0.0_f64;
    for k in 0..grid.len() {
        if r[k] < cut {
            continue;
        }
        let d = jet.d.iter().map(|f| f.values()[k].abs()).fold(0.0, f64::max);
        worst = worst.max(bracket(t - r[k]).powf(0.75) * tw * d);
    }
    worst
}

/// `max ⟨t + r⟩ |u|`.
pub fn weighted_sup_kg(u: &crate::grid::ScalarField, t: f64) -> f64 {
    let r = u.grid().radius_table();
    u.values().iter().zip(r).map(|(v, r)| bracket(t + r) * v.abs()).fold(0.0, f64::max)
}

/// `sup|u| ⟨t⟩^{1/2} / Σ_{|I|≤3} ‖Γ^I u‖_{L²}`; zero when `u` vanishes.
pub fn sobolev_ratio(tower: &Tower) -> Result<f64> {
    if tower.order() < SOBOLEV_ORDER {
        return Err(Error::OrderCap { requested: SOBOLEV_ORDER, max: tower.order() });
    }
    let mut sum = 0.0;
    let mut sup = 0.0;
    for (k, word) in canonical_words(SOBOLEV_ORDER).iter().enumerate() {
        let f = tower.eval(&word.operator())?;
        if k == 0 {
            sup = f.max_abs();
        }
        sum += f.l2_norm();
    }
    if sum == 0.0 {
        log::debug!("Sobolev ratio of a vanishing field reported as 0");
        return Ok(0.0);
    }
    Ok(sup * bracket(tower.t()).sqrt() / sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{CouplingTensors, FieldState};
    use crate::grid::{make_grid, ScalarField};
    use crate::propagate::linear_flow_kg;
    use crate::vectorfields::state_towers;
    use std::sync::Arc;

    #[test]
    fn weighted_sup_at_time_zero() {
        let g = make_grid(32, 8.0).unwrap();
        let u = ScalarField::from_fn(&g, |x1, x2| (-(x1 * x1 + x2 * x2) / 2.0).exp());
        let jet = Jet::new(u, ScalarField::zeros(&g));
        let direct = (0..g.len())
            .filter(|&k| g.radius_table()[k] >= 0.5 * g.spacing())
            .map(|k| {
                let r = g.radius_table()[k];
                (1.0 + r * r).powf(0.375) * jet.d[1].values()[k].abs().max(jet.d[2].values()[k].abs())
            })
            .fold(0.0, f64::max);
        assert_eq!(weighted_sup_dw(&jet, 0.0), direct);
        let z = ScalarField::zeros(&g);
        assert_eq!(weighted_sup_dw(&Jet::new(z.clone(), z), 3.0), 0.0);
    }

    fn kg_state(g: &Arc<crate::grid::Grid>, t: f64, a: f64, s: f64) -> FieldState {
        let u0 = ScalarField::from_fn(g, |x1, x2| a * (-(x1 * x1 + x2 * x2) / (s * s)).exp());
        let (v, vt) = linear_flow_kg(&u0, &ScalarField::zeros(g), t);
        let z = ScalarField::zeros(g);
        FieldState::new(t, z.clone(), z, v, vt, Arc::new(CouplingTensors::zero())).unwrap()
    }

    fn static_constant() -> f64 {
        let g = make_grid(128, 32.0).unwrap();
        [(1.0, 1.0), (0.3, 2.0), (2.0, 3.0), (1.0, 4.0)]
            .iter()
            .map(|&(a, s)| sobolev_ratio(&state_towers(&kg_state(&g, 0.0, a, s), 3).unwrap().1).unwrap())
            .fold(0.0, f64::max)
    }

    #[test]
    fn sobolev_ratio_on_static_gaussians() {
        let c = static_constant();
        assert!(c > 0.0 && c < 1.5, "{c}");
    }

    #[test]
    fn sobolev_ratio_stays_within_the_static_constant_along_klein_gordon_flow() {
        let c = static_constant();
        let g = make_grid(256, 64.0).unwrap();
        let ratios: Vec<f64> = [10.0, 20.0, 40.0]
            .iter()
            .map(|&t| sobolev_ratio(&state_towers(&kg_state(&g, t, 1.0, 2.0), 3).unwrap().1).unwrap())
            .collect();
        assert!(ratios.iter().all(|&r| r > 0.0 && r <= 1.2 * c), "{ratios:?} vs {c}");
    }

    #[test]
    fn sobolev_ratio_edge_cases() {
        let g = make_grid(32, 8.0).unwrap();
        let (_, tv) = state_towers(&kg_state(&g, 0.0, 0.0, 1.0), 3).unwrap();
        assert_eq!(sobolev_ratio(&tv).unwrap(), 0.0);
        let (_, low) = state_towers(&kg_state(&g, 0.0, 1.0, 1.0), 2).unwrap();
        assert!(matches!(sobolev_ratio(&low), Err(Error::OrderCap { .. })));
    }
}

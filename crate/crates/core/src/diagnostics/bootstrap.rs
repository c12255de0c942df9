//! Left-hand sides of the bootstrap bounds, each divided by its growth
//! factor, with the order cap `K` standing in for the top order.
//!
//! Lines whose order index falls below zero at the cap are reduced to the
//! empty word.

use serde::Serialize;

/// Per-word quantities the lines are assembled from, indexed like
/// [`crate::vectorfields::canonical_words`].
#[derive(Clone, Debug, Default)]
pub struct BootstrapInputs {
    pub t: f64,
    pub cap: usize,
    pub word_len: Vec<usize>,
    pub energy_w: Vec<f64>,
    pub energy1_v: Vec<f64>,
    pub l2_w: Vec<f64>,
    /// `‖SΓ^I w‖_{L²}` for `|I| ≤ K - 1`, in word order.
    pub l2_scaling_w: Vec<f64>,
    /// `Σ_i` of the ghost accumulators, per word.
    pub ghost: Vec<f64>,
    pub sup_w: f64,
    pub sup_dw_weighted: f64,
    pub sup_v_weighted: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BootstrapReport {
    /// `⟨t⟩^{1/2} ‖w‖_∞`
    pub w_sup: f64,
    /// `Σ_{|I|≤K-1} E(Γ^I w)^{1/2}`
    pub w_energy_low: f64,
    /// `⟨t⟩^{-δ} Σ_{|I|≤K} E(Γ^I w)^{1/2}`
    pub w_energy_top: f64,
    /// `⟨t⟩^{-1/2-2δ} Σ_{|I|≤K-1} ‖SΓ^I w‖`
    pub w_scaling: f64,
    /// `⟨t⟩^{-δ} Σ_{|I|≤K} ‖Γ^I w‖`
    pub w_l2: f64,
    /// `sup ⟨t-r⟩^{3/4} ⟨t⟩^{1/2} |∂w|`
    pub w_dw_weighted: f64,
    /// `sup ⟨t+r⟩ |v|`
    pub v_sup: f64,
    /// `Σ_{|I|≤K-1} E1(Γ^I v)^{1/2}`
    pub v_energy_low: f64,
    /// `⟨t⟩^{-δ} Σ_{|I|≤K} E1(Γ^I v)^{1/2}`
    pub v_energy_top: f64,
    /// `⟨t⟩^{-δ} Σ_{|I|≤K} Σ_i` ghost accumulators
    pub v_ghost: f64,
}

impl BootstrapReport {
    pub const NAMES: [&'static str; 10] = [
        "boot.w.sup",
        "boot.w.energy_low",
        "boot.w.energy_top",
        "boot.w.scaling",
        "boot.w.l2",
        "boot.w.dw_weighted",
        "boot.v.sup",
        "boot.v.energy_low",
        "boot.v.energy_top",
        "boot.v.ghost",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.w_sup,
            self.w_energy_low,
            self.w_energy_top,
            self.w_scaling,
            self.w_l2,
            self.w_dw_weighted,
            self.v_sup,
            self.v_energy_low,
            self.v_energy_top,
            self.v_ghost,
        ]
    }
}

pub fn bootstrap_report(input: &BootstrapInputs, delta: f64) -> BootstrapReport {
    let bt = (1.0 + input.t * input.t).sqrt();
    let k = input.cap;
    let sum_where = |v: &[f64], max_len: usize, f: fn(f64) -> f64| -> f64 {
        v.iter().zip(&input.word_len).filter(|(_, &l)| l <= max_len).map(|(&x, _)| f(x)).sum()
    };
    let low = k.saturating_sub(1);
    BootstrapReport {
        w_sup: bt.sqrt() * input.sup_w,
        w_energy_low: sum_where(&input.energy_w, low, f64::sqrt),
        w_energy_top: bt.powf(-delta) * sum_where(&input.energy_w, k, f64::sqrt),
        w_scaling: bt.powf(-0.5 - 2.0 * delta) * input.l2_scaling_w.iter().sum::<f64>(),
        w_l2: bt.powf(-delta) * sum_where(&input.l2_w, k, |x| x),
        w_dw_weighted: input.sup_dw_weighted,
        v_sup: input.sup_v_weighted,
        v_energy_low: sum_where(&input.energy1_v, low, f64::sqrt),
        v_energy_top: bt.powf(-delta) * sum_where(&input.energy1_v, k, f64::sqrt),
        v_ghost: bt.powf(-delta) * sum_where(&input.ghost, k, |x| x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_solution_gives_zero_lines() {
        let input = BootstrapInputs {
            t: 3.0,
            cap: 2,
            word_len: vec![0, 1, 2],
            energy_w: vec![0.0; 3],
            energy1_v: vec![0.0; 3],
            l2_w: vec![0.0; 3],
            l2_scaling_w: vec![0.0; 2],
            ghost: vec![0.0; 3],
            ..Default::default()
        };
        assert!(bootstrap_report(&input, 0.05).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conserved_energies_decay_by_the_time_factor() {
        let mk = |t: f64| BootstrapInputs {
            t,
            cap: 2,
            word_len: vec![0, 1, 2],
            energy_w: vec![4.0, 1.0, 9.0],
            energy1_v: vec![1.0, 1.0, 1.0],
            l2_w: vec![0.0; 3],
            l2_scaling_w: vec![0.0; 2],
            ghost: vec![0.0; 3],
            ..Default::default()
        };
        let a = bootstrap_report(&mk(0.0), 0.05);
        let b = bootstrap_report(&mk(10.0), 0.05);
        assert_eq!(a.w_energy_low, 3.0);
        assert_eq!(a.w_energy_top, 6.0);
        assert_eq!(b.w_energy_low, a.w_energy_low);
        assert!((b.w_energy_top / a.w_energy_top - 101f64.sqrt().powf(-0.05)).abs() < 1e-15);
        assert_eq!(b.v_energy_low, 2.0);
    }
}

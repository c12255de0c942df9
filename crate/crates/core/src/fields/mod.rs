//! Coupling constants, initial data, the evolving state and the weighted
//! initial-data norms.

mod checkpoint;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{Grid, ScalarField};
use crate::{Error, Result};

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};

/// Any field value above this magnitude aborts a run.
pub const BLOW_UP_THRESHOLD: f64 = 1e6;

/// Amplitude below which a profile counts as outside its support.
pub const SUPPORT_AMPLITUDE: f64 = 1e-12;

/// Which quadratic form multiplies `C1` and `C2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullStructure {
    /// `Q0(w,v) = -∂t w ∂t v + ∇w·∇v`.
    #[default]
    Standard,
    /// `∂t w ∂t v` in place of `Q0`; violates the null condition.
    BrokenTimeProduct,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingTensors {
    pub c1: f64,
    pub c2: f64,
    pub c1ab: [[f64; 3]; 3],
    pub c2ab: [[f64; 3]; 3],
    #[serde(default)]
    pub null_structure: NullStructure,
}

impl CouplingTensors {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn q0_only(c1: f64, c2: f64) -> Self {
        Self { c1, c2, ..Self::default() }
    }

    /// Antisymmetric part `(C^{ab} - C^{ba}) / 2`, the only part that acts.
    pub fn antisymmetric(c: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                out[a][b] = 0.5 * (c[a][b] - c[b][a]);
            }
        }
        out
    }

    /// True when the wave equation carries no nonlinearity.
    pub fn wave_is_free(&self) -> bool {
        self.c1 == 0.0 && Self::antisymmetric(&self.c1ab).iter().flatten().all(|&x| x == 0.0)
    }

    pub fn kg_is_free(&self) -> bool {
        self.c2 == 0.0 && Self::antisymmetric(&self.c2ab).iter().flatten().all(|&x| x == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.wave_is_free() && self.kg_is_free()
    }

    /// Messages for entries that cannot influence the dynamics.
    pub fn inert_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, c) in [("c1ab", &self.c1ab), ("c2ab", &self.c2ab)] {
            for a in 0..3 {
                if c[a][a] != 0.0 {
                    out.push(format!("{name}[{a}][{a}] = {} is inert (Q_aa = 0)", c[a][a]));
                }
                for b in a + 1..3 {
                    if c[a][b] == c[b][a] && c[a][b] != 0.0 {
                        out.push(format!(
                            "{name}[{a}][{b}] and {name}[{b}][{a}] are equal and cancel"
                        ));
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.c1, self.c2]
            .into_iter()
            .chain(self.c1ab.iter().flatten().copied())
            .chain(self.c2ab.iter().flatten().copied());
        for x in all {
            if !x.is_finite() {
                return Err(Error::InvalidData(format!("non-finite coupling {x}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Profile {
    Gaussian,
    /// Gaussian envelope times `cos(k·(x - c) + phase)`.
    ModulatedGaussian { wavevector: [f64; 2], phase: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    W,
    V,
}

/// Whether a bump prescribes the field value or its time derivative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    #[default]
    Value,
    Velocity,
}

/// `amplitude · exp(-|x - center|² / width²)`, optionally modulated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub profile: Profile,
    pub target: Target,
    #[serde(default)]
    pub component: Component,
    pub amplitude: f64,
    pub center: [f64; 2],
    pub width: f64,
}

impl Bump {
    pub fn gaussian(target: Target, component: Component, amplitude: f64, center: [f64; 2], width: f64) -> Self {
        Self { profile: Profile::Gaussian, target, component, amplitude, center, width }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let d1 = x1 - self.center[0];
        let d2 = x2 - self.center[1];
        let envelope = self.amplitude * (-(d1 * d1 + d2 * d2) / (self.width * self.width)).exp();
        match self.profile {
            Profile::Gaussian => envelope,
            Profile::ModulatedGaussian { wavevector, phase } => {
                envelope * (wavevector[0] * d1 + wavevector[1] * d2 + phase).cos()
            }
        }
    }

    /// Radius outside which the envelope is below [`SUPPORT_AMPLITUDE`].
    pub fn support_radius(&self) -> f64 {
        let a = self.amplitude.abs();
        let c = self.center[0].hypot(self.center[1]);
        if a <= SUPPORT_AMPLITUDE {
            return c;
        }
        c + self.width * (a / SUPPORT_AMPLITUDE).ln().sqrt()
    }

    fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::InvalidData(format!("bump width {} must be positive", self.width)));
        }
        if !self.amplitude.is_finite() || !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidData("bump amplitude and center must be finite".into()));
        }
        if let Profile::ModulatedGaussian { wavevector, phase } = self.profile {
            if !wavevector.iter().all(|k| k.is_finite()) || !phase.is_finite() {
                return Err(Error::InvalidData("modulation parameters must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Seeded random superposition of Gaussian bumps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomBumps {
    pub count: usize,
    /// Amplitudes are drawn uniformly from `[-amplitude, amplitude]`.
    pub amplitude: f64,
    pub width: f64,
    /// Centers are drawn uniformly from the disk of this radius.
    pub spread: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    pub bumps: Vec<Bump>,
    #[serde(default)]
    pub random: Option<RandomBumps>,
    #[serde(default)]
    pub seed: u64,
}

impl InitialDataSpec {
    /// Explicit bumps followed by the seeded random ones.
    pub fn realized_bumps(&self) -> Vec<Bump> {
        let mut out = self.bumps.clone();
        if let Some(r) = &self.random {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for _ in 0..r.count {
                let radius = r.spread * rng.gen::<f64>().sqrt();
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let amplitude = rng.gen_range(-1.0..=1.0) * r.amplitude;
                let target = if rng.gen_bool(0.5) { Target::W } else { Target::V };
                let component = if rng.gen_bool(0.5) { Component::Value } else { Component::Velocity };
                out.push(Bump::gaussian(
                    target,
                    component,
                    amplitude,
                    [radius * angle.cos(), radius * angle.sin()],
                    r.width,
                ));
            }
        }
        out
    }

    /// Effective support radius `R0` of the realized data.
    pub fn support_radius(&self) -> f64 {
        self.realized_bumps().iter().map(Bump::support_radius).fold(0.0, f64::max)
    }

    /// Multiplies every amplitude by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.bumps.iter_mut().for_each(|b| b.amplitude *= lambda);
        if let Some(r) = &mut out.random {
            r.amplitude *= lambda;
        }
        out
    }
}

/// `(w, ∂t w, v, ∂t v)` at time `t`.
#[derive(Clone, Debug)]
pub struct FieldState {
    pub t: f64,
    pub w: ScalarField,
    pub wt: ScalarField,
    pub v: ScalarField,
    pub vt: ScalarField,
    pub couplings: Arc<CouplingTensors>,
}

impl FieldState {
    pub fn new(
        t: f64,
        w: ScalarField,
        wt: ScalarField,
        v: ScalarField,
        vt: ScalarField,
        couplings: Arc<CouplingTensors>,
    ) -> Result<Self> {
        w.ensure_same_grid(&wt)?;
        w.ensure_same_grid(&v)?;
        w.ensure_same_grid(&vt)?;
        if !t.is_finite() {
            return Err(Error::InvalidData(format!("non-finite time {t}")));
        }
        Ok(Self { t, w, wt, v, vt, couplings })
    }

    pub fn zeros(grid: &Arc<Grid>, couplings: Arc<CouplingTensors>) -> Self {
        let z = ScalarField::zeros(grid);
        Self { t: 0.0, w: z.clone(), wt: z.clone(), v: z.clone(), vt: z, couplings }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.w.grid()
    }

    pub fn fields(&self) -> [(&'static str, &ScalarField); 4] {
        [("w", &self.w), ("wt", &self.wt), ("v", &self.v), ("vt", &self.vt)]
    }

    /// Errors when any component is non-finite or exceeds the blow-up threshold.
    pub fn check_blow_up(&self) -> Result<()> {
        for (name, f) in self.fields() {
            let mut worst = 0.0_f64;
            for &x in f.values() {
                if !x.is_finite() {
                    return Err(Error::BlowUp { t: self.t, field: name, value: f64::INFINITY });
                }
                worst = worst.max(x.abs());
            }
            if worst > BLOW_UP_THRESHOLD {
                return Err(Error::BlowUp { t: self.t, field: name, value: worst });
            }
        }
        Ok(())
    }

    pub fn with_couplings(&self, couplings: Arc<CouplingTensors>) -> Self {
        Self { couplings, ..self.clone() }
    }
}

/// Samples the initial data at `t = 0`.
pub fn build_initial_state(
    spec: &InitialDataSpec,
    grid: &Arc<Grid>,
    couplings: Arc<CouplingTensors>,
) -> Result<FieldState> {
    couplings.validate()?;
    let bumps = spec.realized_bumps();
    for b in &bumps {
        b.validate()?;
    }
    let r0 = bumps.iter().map(Bump::support_radius).fold(0.0, f64::max);
    let limit = grid.half_length() / 2.0;
    if r0 >= limit {
        return Err(Error::SupportRadius { r0, limit });
    }
    let sample = |target: Target, component: Component| {
        let selected: Vec<&Bump> =
            bumps.iter().filter(|b| b.target == target && b.component == component).collect();
        ScalarField::from_fn(grid, |x1, x2| selected.iter().map(|b| b.eval(x1, x2)).sum())
    };
    FieldState::new(
        0.0,
        sample(Target::W, Component::Value),
        sample(Target::W, Component::Velocity),
        sample(Target::V, Component::Value),
        sample(Target::V, Component::Velocity),
        couplings,
    )
}

/// One weighted norm in the smallness sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallnessTerm {
    pub field: String,
    pub order: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallnessReport {
    pub order_cap: usize,
    /// `Σ_{k ≤ cap} ‖⟨x⟩^k ∇^k w0‖_{L¹+L²} + ‖⟨x⟩^{k+1} log(2+|x|) ∇^k v0‖_{L²}`.
    pub position_sum: f64,
    /// `Σ_{k ≤ cap-1} ‖⟨x⟩^{k+1} ∇^k w1‖_{L¹+L²} + ‖⟨x⟩^{k+2} log(2+|x|) ∇^k v1‖_{L²}`.
    pub velocity_sum: f64,
    pub terms: Vec<SmallnessTerm>,
}

impl SmallnessReport {
    pub fn total(&self) -> f64 {
        self.position_sum + self.velocity_sum
    }
}

pub const MAX_SMALLNESS_ORDER: usize = 4;

/// `|∇^k f|` at each node: the Euclidean norm over all ordered k-fold
/// spatial derivatives.
fn gradient_tensor_norm(f: &ScalarField, k: usize) -> Vec<f64> {
    let grid = f.grid();
    let spectrum = grid.transform(f);
    let mut acc = vec![0.0; grid.len()];
    for a in 0..=k {
        let mult = binomial(k, a) as f64;
        let d = spectrum.derivative(a as u32, (k - a) as u32).to_field();
        acc.iter_mut().zip(d.values()).for_each(|(s, &x)| *s += mult * x * x);
    }
    acc.iter_mut().for_each(|s| *s = s.sqrt());
    acc
}

pub(crate) fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

fn weighted_norms(f: &ScalarField, k: usize, weight: impl Fn(f64) -> f64) -> (f64, f64) {
    let grid = f.grid();
    let h2 = grid.spacing() * grid.spacing();
    let g = gradient_tensor_norm(f, k);
    let (mut l1, mut l2) = (0.0, 0.0);
    for (&gi, &r) in g.iter().zip(grid.radius_table()) {
        let x = weight(r) * gi;
        l1 += x;
        l2 += x * x;
    }
    (l1 * h2, (l2 * h2).sqrt())
}

/// Evaluates both smallness sums with `order_cap` standing in for `N + 1`.
/// The `L¹+L²` norm is bounded above by `min(‖·‖_{L¹}, ‖·‖_{L²})`.
pub fn smallness_norms(state0: &FieldState, order_cap: usize) -> Result<SmallnessReport> {
    if state0.t != 0.0 {
        return Err(Error::NonZeroTime(state0.t));
    }
    if order_cap > MAX_SMALLNESS_ORDER {
        return Err(Error::OrderCap { requested: order_cap, max: MAX_SMALLNESS_ORDER });
    }
    let bracket = |r: f64| (1.0 + r * r).sqrt();
    let log_w = |r: f64| (2.0 + r).ln();
    let mut terms = Vec::new();
    let (mut position_sum, mut velocity_sum) = (0.0, 0.0);
    for k in 0..=order_cap {
        let kk = k as i32;
        let (l1, l2) = weighted_norms(&state0.w, k, |r| bracket(r).powi(kk));
        let w_term = l1.min(l2);
        let (_, v_term) = weighted_norms(&state0.v, k, |r| bracket(r).powi(kk + 1) * log_w(r));
        position_sum += w_term + v_term;
        terms.push(SmallnessTerm { field: "w0".into(), order: k, value: w_term });
        terms.push(SmallnessTerm { field: "v0".into(), order: k, value: v_term });
        if k < order_cap {
            let (l1, l2) = weighted_norms(&state0.wt, k, |r| bracket(r).powi(kk + 1));
            let wt_term = l1.min(l2);
            let (_, vt_term) = weighted_norms(&state0.vt, k, |r| bracket(r).powi(kk + 2) * log_w(r));
            velocity_sum += wt_term + vt_term;
            terms.push(SmallnessTerm { field: "w1".into(), order: k, value: wt_term });
            terms.push(SmallnessTerm { field: "v1".into(), order: k, value: vt_term });
        }
    }
    Ok(SmallnessReport { order_cap, position_sum, velocity_sum, terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn couplings() -> Arc<CouplingTensors> {
        Arc::new(CouplingTensors::zero())
    }

    #[test]
    fn single_gaussian_peaks_at_center() {
        let g = make_grid(64, 16.0).unwrap();
        let spec = InitialDataSpec {
            bumps: vec![Bump::gaussian(Target::W, Component::Value, 0.3, [0.0, 0.0], 1.5)],
            ..Default::default()
        };
        let s = build_initial_state(&spec, &g, couplings()).unwrap();
        assert_eq!(s.w.values()[g.center_index()], 0.3);
        assert_eq!(s.w.max_abs(), 0.3);
        assert_eq!(s.v.max_abs(), 0.0);
    }

    #[test]
    fn empty_spec_gives_zero_state() {
        let g = make_grid(16, 8.0).unwrap();
        let s = build_initial_state(&InitialDataSpec::default(), &g, couplings()).unwrap();
        for (_, f) in s.fields() {
            assert_eq!(f.max_abs(), 0.0);
        }
    }

    #[test]
    fn mirrored_bumps_are_symmetric() {
        let g = make_grid(32, 16.0).unwrap();
        let spec = InitialDataSpec {
            bumps: vec![
                Bump::gaussian(Target::V, Component::Value, 0.1, [2.0, 1.0], 1.0),
                Bump::gaussian(Target::V, Component::Value, 0.1, [-2.0, -1.0], 1.0),
            ],
            ..Default::default()
        };
        let s = build_initial_state(&spec, &g, couplings()).unwrap();
        let n = g.n();
        // x -> -x maps index i to (n - i) mod n on the grid [-L, L).
        for i in 1..n {
            for j in 1..n {
                let a = s.v.at(i, j);
                let b = s.v.at(n - i, n - j);
                assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300) + 1e-300, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn support_radius_violation_is_rejected() {
        let g = make_grid(32, 8.0).unwrap();
        let spec = InitialDataSpec {
            bumps: vec![Bump::gaussian(Target::W, Component::Value, 1.0, [3.0, 0.0], 1.0)],
            ..Default::default()
        };
        assert!(matches!(
            build_initial_state(&spec, &g, couplings()),
            Err(Error::SupportRadius { .. })
        ));
    }

    #[test]
    fn random_bumps_are_seed_deterministic() {
        let g = make_grid(32, 32.0).unwrap();
        let spec = InitialDataSpec {
            bumps: vec![],
            random: Some(RandomBumps { count: 5, amplitude: 0.01, width: 1.0, spread: 4.0 }),
            seed: 42,
        };
        let a = build_initial_state(&spec, &g, couplings()).unwrap();
        let b = build_initial_state(&spec, &g, couplings()).unwrap();
        for ((_, x), (_, y)) in a.fields().iter().zip(b.fields().iter()) {
            assert_eq!(x.values(), y.values());
        }
        let other = InitialDataSpec { seed: 43, ..spec };
        let c = build_initial_state(&other, &g, couplings()).unwrap();
        assert_ne!(a.w.values(), c.w.values());
    }

    #[test]
    fn smallness_of_zero_data_vanishes() {
        let g = make_grid(16, 8.0).unwrap();
        let s = FieldState::zeros(&g, couplings());
        assert_eq!(smallness_norms(&s, 2).unwrap().total(), 0.0);
    }

    #[test]
    fn smallness_order_zero_gaussian() {
        let g = make_grid(128, 16.0).unwrap();
        let spec = InitialDataSpec {
            bumps: vec![Bump::gaussian(Target::W, Component::Value, 1.0, [0.0, 0.0], 1.0)],
            ..Default::default()
        };
        let s = build_initial_state(&spec, &g, couplings()).unwrap();
        let report = smallness_norms(&s, 0).unwrap();
        // ‖w0‖₁ = π and ‖w0‖₂ = √(π/2)
        assert!((report.total() - (PI / 2.0).sqrt()).abs() < 1e-10);
        assert_eq!(report.velocity_sum, 0.0);
    }

    #[test]
    fn smallness_rejects_bad_input() {
        let g = make_grid(16, 8.0).unwrap();
        let mut s = FieldState::zeros(&g, couplings());
        assert!(smallness_norms(&s, 5).is_err());
        s.t = 1.0;
        assert!(matches!(smallness_norms(&s, 1), Err(Error::NonZeroTime(_))));
    }

    #[test]
    fn gradient_norm_of_linear_profile() {
        // |∇²(x1 x2)|² counts ∂1∂2 and ∂2∂1, giving √2.
        let g = make_grid(16, PI).unwrap();
        let f = ScalarField::from_fn(&g, |x1, x2| x1.sin() * x2.sin());
        let norm = gradient_tensor_norm(&f, 2);
        let idx = g.nearest_node(0.0, 0.0);
        assert!((norm[idx] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn inert_entries_are_flagged() {
        let mut c = CouplingTensors::zero();
        c.c1ab[1][1] = 2.0;
        c.c2ab[0][2] = 1.0;
        c.c2ab[2][0] = 1.0;
        assert_eq!(c.inert_warnings().len(), 2);
        assert!(c.is_zero());
    }

    #[test]
    fn blow_up_detector_trips() {
        let g = make_grid(8, 4.0).unwrap();
        let mut s = FieldState::zeros(&g, couplings());
        assert!(s.check_blow_up().is_ok());
        s.vt.values_mut()[3] = 2e6;
        assert!(matches!(s.check_blow_up(), Err(Error::BlowUp { field: "vt", .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn smallness_is_homogeneous(lambda in 0.01f64..10.0, a in 0.1f64..1.0, c in -2.0f64..2.0) {
            let g = make_grid(96, 24.0).unwrap();
            let spec = InitialDataSpec {
                bumps: vec![
                    Bump::gaussian(Target::W, Component::Value, a, [c, 0.5], 1.2),
                    Bump::gaussian(Target::V, Component::Velocity, -a, [0.0, c], 0.8),
                    Bump::gaussian(Target::W, Component::Velocity, 0.5 * a, [-c, 0.0], 1.0),
                ],
                ..Default::default()
            };
            let base = smallness_norms(&build_initial_state(&spec, &g, couplings()).unwrap(), 2).unwrap();
            let scaled_state = build_initial_state(&spec, &g, couplings()).unwrap();
            let scaled_state = FieldState {
                w: scaled_state.w.scale(lambda),
                wt: scaled_state.wt.scale(lambda),
                v: scaled_state.v.scale(lambda),
                vt: scaled_state.vt.scale(lambda),
                ..scaled_state
            };
            let scaled = smallness_norms(&scaled_state, 2).unwrap();
            prop_assert!((scaled.total() - lambda * base.total()).abs() <= 1e-12 * lambda * base.total());
        }

        #[test]
        fn build_is_bitwise_deterministic(seed in 0u64..1000) {
            let g = make_grid(32, 40.0).unwrap();
            let spec = InitialDataSpec {
                bumps: vec![],
                random: Some(RandomBumps { count: 3, amplitude: 0.01, width: 1.0, spread: 3.0 }),
                seed,
            };
            let a = build_initial_state(&spec, &g, couplings()).unwrap();
            let b = build_initial_state(&spec, &g, couplings()).unwrap();
            prop_assert_eq!(a.v.values(), b.v.values());
            prop_assert_eq!(a.wt.values(), b.wt.values());
        }
    }
}

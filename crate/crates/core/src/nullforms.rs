//! Null forms, the two right-hand sides, and the divergence-form rewrite of
//! the wave nonlinearity.

use std::sync::Arc;

use crate::fields::{CouplingTensors, FieldState, NullStructure};
use crate::grid::{gradient, Grid, ScalarField, Spectrum};
use crate::{Error, Result};

/// Second derivatives `∂α∂β u`, symmetric, stored as `tt, t1, t2, 11, 12, 22`.
#[derive(Clone, Debug)]
pub struct SecondOrder {
    entries: [ScalarField; 6],
}

impl SecondOrder {
    pub fn new(entries: [ScalarField; 6]) -> Self {
        Self { entries }
    }

    pub fn get(&self, a: usize, b: usize) -> &ScalarField {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let idx = match (a, b) {
            (0, 0) => 0,
            (0, 1) => 1,
            (0, 2) => 2,
            (1, 1) => 3,
            (1, 2) => 4,
            (2, 2) => 5,
            _ => panic!("second-order index ({a}, {b}) out of range"),
        };
        &self.entries[idx]
    }
}

/// A field with its first spacetime derivatives `∂0 = ∂t, ∂1, ∂2`.
#[derive(Clone, Debug)]
pub struct Jet {
    pub value: ScalarField,
    pub d: [ScalarField; 3],
    pub second: Option<SecondOrder>,
}

impl Jet {
    /// Spatial derivatives are taken spectrally from `value`.
    pub fn new(value: ScalarField, dt: ScalarField) -> Self {
        let (d1, d2) = gradient(&value);
        Self { value, d: [dt, d1, d2], second: None }
    }

    /// Takes all entries as given. Intended for manufactured tests where the
    /// derivatives are known in closed form (including non-periodic ones).
    pub fn from_components(value: ScalarField, d: [ScalarField; 3]) -> Self {
        Self { value, d, second: None }
    }

    /// Adds second-order entries, with `∂t²u = dtt` supplied from the
    /// equation of motion and all other entries spectral.
    pub fn with_pde_second_order(mut self, dtt: ScalarField) -> Self {
        let (dt1, dt2) = gradient(&self.d[0]);
        let grid = self.value.grid().clone();
        let s = grid.transform(&self.value);
        let d11 = s.derivative(2, 0);
        let d22 = s.derivative(0, 2);
        let (d11, d22) = Spectrum::pair_to_fields(&d11, &d22);
        let d12 = s.derivative(1, 1).to_field();
        self.second = Some(SecondOrder::new([dtt, dt1, dt2, d11, d12, d22]));
        self
    }

    pub fn with_second_order(mut self, second: SecondOrder) -> Self {
        self.second = Some(second);
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.value.grid()
    }

    /// `∂_α u`.
    pub fn lower(&self, alpha: usize) -> &ScalarField {
        &self.d[alpha]
    }

    /// `∂^α u = η^{αβ} ∂_β u`.
    pub fn upper(&self, alpha: usize) -> ScalarField {
        if alpha == 0 {
            -&self.d[0]
        } else {
            self.d[alpha].clone()
        }
    }

    pub fn second_order(&self) -> Result<&SecondOrder> {
        self.second.as_ref().ok_or(Error::MissingSecondOrder)
    }

    fn ensure_same_grid(&self, other: &Jet) -> Result<()> {
        self.value.ensure_same_grid(&other.value)
    }
}

/// `B(m, n) = Σ_{αβ} M_{αβ} ∂_α m ∂_β n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilinearForm {
    pub matrix: [[f64; 3]; 3],
}

impl BilinearForm {
    /// `c Q0 + Σ_{αβ} C^{αβ} Q_{αβ}`, or with `Q0` swapped for `∂t m ∂t n`.
    pub fn from_couplings(c: f64, cab: &[[f64; 3]; 3], structure: NullStructure) -> Self {
        let mut m = [[0.0; 3]; 3];
        match structure {
            NullStructure::Standard => {
                m[0][0] = -c;
                m[1][1] = c;
                m[2][2] = c;
            }
            NullStructure::BrokenTimeProduct => m[0][0] = c,
        }
        // C^{ab} Q_ab = C^{ab} (∂a m ∂b n - ∂a n ∂b m) = (C^{ab} - C^{ba}) ∂a m ∂b n
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += cab[a][b] - cab[b][a];
            }
        }
        Self { matrix: m }
    }

    pub fn wave(c: &CouplingTensors) -> Self {
        Self::from_couplings(c.c1, &c.c1ab, c.null_structure)
    }

    pub fn kg(c: &CouplingTensors) -> Self {
        Self::from_couplings(c.c2, &c.c2ab, c.null_structure)
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().flatten().all(|&x| x == 0.0)
    }

    /// Nodewise evaluation on raw derivative arrays, accumulated into `out`.
    pub fn accumulate(&self, dm: [&[f64]; 3], dn: [&[f64]; 3], scale: f64, out: &mut [f64]) {
        let terms: Vec<(usize, usize, f64)> = (0..3)
            .flat_map(|a| (0..3).map(move |b| (a, b)))
            .filter_map(|(a, b)| {
                let c = self.matrix[a][b] * scale;
                (c != 0.0).then_some((a, b, c))
            })
            .collect();
        for (a, b, c) in terms {
            out.iter_mut()
                .zip(dm[a].iter().zip(dn[b]))
                .for_each(|(o, (&x, &y))| *o += c * x * y);
        }
    }

    /// Undealiased `B(m, n)`.
    pub fn eval_raw(&self, m: &Jet, n: &Jet) -> ScalarField {
        let mut out = vec![0.0; m.grid().len()];
        self.accumulate(jet_slices(m), jet_slices(n), 1.0, &mut out);
        ScalarField::from_raw(m.grid(), out)
    }
}

pub(crate) fn jet_slices(j: &Jet) -> [&[f64]; 3] {
    [j.d[0].values(), j.d[1].values(), j.d[2].values()]
}

fn dealiased(f: &ScalarField) -> ScalarField {
    let mut s = f.grid().transform(f);
    s.dealias_in_place();
    s.to_field()
}

pub(crate) fn dealias_pair(a: &ScalarField, b: &ScalarField) -> (ScalarField, ScalarField) {
    let (mut sa, mut sb) = a.grid().transform_pair(a, b);
    sa.dealias_in_place();
    sb.dealias_in_place();
    Spectrum::pair_to_fields(&sa, &sb)
}

/// Undealiased `Q0(m, n) = ∂_α m ∂^α n`.
pub fn q0_raw(m: &Jet, n: &Jet) -> ScalarField {
    BilinearForm::from_couplings(1.0, &[[0.0; 3]; 3], NullStructure::Standard).eval_raw(m, n)
}

/// `Q0(m, n) = -∂t m ∂t n + ∂1 m ∂1 n + ∂2 m ∂2 n`, dealiased.
pub fn q0(m: &Jet, n: &Jet) -> Result<ScalarField> {
    m.ensure_same_grid(n)?;
    Ok(dealiased(&q0_raw(m, n)))
}

/// Undealiased `Q_{αβ}(m, n)`; indices must be valid.
pub fn qab_raw(alpha: usize, beta: usize, m: &Jet, n: &Jet) -> ScalarField {
    m.d[alpha].zip_map(&n.d[beta], |a, b| a * b).zip_map(
        &n.d[alpha].product(&m.d[beta]),
        |x, y| x - y,
    )
}

/// `Q_{αβ}(m, n) = ∂α m ∂β n - ∂α n ∂β m`, dealiased.
pub fn qab(alpha: usize, beta: usize, m: &Jet, n: &Jet) -> Result<ScalarField> {
    if alpha > 2 || beta > 2 {
        return Err(Error::IndexOutOfRange(alpha, beta));
    }
    m.ensure_same_grid(n)?;
    if alpha == beta {
        log::warn!("Q_{{{alpha}{beta}}} vanishes identically");
        return Ok(ScalarField::zeros(m.grid()));
    }
    Ok(dealiased(&qab_raw(alpha, beta, m, n)))
}

/// Jets of `w` and `v` built from a state.
pub fn state_jets(state: &FieldState) -> (Jet, Jet) {
    let grid = state.grid();
    let (sw, sv) = grid.transform_pair(&state.w, &state.v);
    let (w1, w2) = Spectrum::pair_to_fields(&sw.derivative(1, 0), &sw.derivative(0, 1));
    let (v1, v2) = Spectrum::pair_to_fields(&sv.derivative(1, 0), &sv.derivative(0, 1));
    (
        Jet::from_components(state.w.clone(), [state.wt.clone(), w1, w2]),
        Jet::from_components(state.v.clone(), [state.vt.clone(), v1, v2]),
    )
}

/// Right-hand sides from prebuilt jets.
pub fn rhs_from_jets(couplings: &CouplingTensors, w: &Jet, v: &Jet) -> (ScalarField, ScalarField) {
    let grid = w.grid();
    let bw = BilinearForm::wave(couplings);
    let bv = BilinearForm::kg(couplings);
    if bw.is_zero() && bv.is_zero() {
        return (ScalarField::zeros(grid), ScalarField::zeros(grid));
    }
    let fw = bw.eval_raw(w, v);
    let fv = bv.eval_raw(w, v);
    dealias_pair(&fw, &fv)
}

/// `(F_w, F_v)`, both dealiased.
pub fn rhs(state: &FieldState) -> (ScalarField, ScalarField) {
    let (w, v) = state_jets(state);
    rhs_from_jets(&state.couplings, &w, &v)
}

/// Sources of the divergence-form rewrite with `m = w`, `n = v`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    /// `F_α = C1 v ∂α w + (C1²/2) v² ∂α w`.
    pub f: [ScalarField; 3],
    /// `H^α = Σ_{k=1,2} C1^{k-1}/k! (C1^{βα} - C1^{αβ}) v^k ∂β w`.
    pub h: [ScalarField; 3],
    /// `G = (C1²/2) v² (C1 Q0 + C1^{αβ} Q_αβ)`.
    pub g: ScalarField,
}

/// Raw (undealiased) sources from the jets, plus the coefficient arrays.
fn decomposition_raw(c: &CouplingTensors, w: &Jet, v: &Jet, fw_raw: &[f64]) -> ([Vec<f64>; 3], [Vec<f64>; 3], Vec<f64>) {
    let c1 = c.c1;
    let k = antisym_source_matrix(c);
    let vv = v.value.values();
    let len = vv.len();
    let mut f: [Vec<f64>; 3] = Default::default();
    let mut h: [Vec<f64>; 3] = Default::default();
    for a in 0..3 {
        let dw = w.d[a].values();
        f[a] = (0..len).map(|i| (c1 * vv[i] + 0.5 * c1 * c1 * vv[i] * vv[i]) * dw[i]).collect();
        let mut ha = vec![0.0; len];
        for (b, dwb) in w.d.iter().enumerate() {
            let coef = k[b][a];
            if coef != 0.0 {
                let dwb = dwb.values();
                ha.iter_mut().enumerate().for_each(|(i, x)| {
                    *x += coef * (vv[i] + 0.5 * c1 * vv[i] * vv[i]) * dwb[i];
                });
            }
        }
        h[a] = ha;
    }
    let g = (0..len).map(|i| 0.5 * c1 * c1 * vv[i] * vv[i] * fw_raw[i]).collect();
    (f, h, g)
}

/// `K[β][α] = C1^{βα} - C1^{αβ}`.
fn antisym_source_matrix(c: &CouplingTensors) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for b in 0..3 {
        for a in 0..3 {
            k[b][a] = c.c1ab[b][a] - c.c1ab[a][b];
        }
    }
    k
}

/// Dealiased spectra of the decomposition sources.
#[derive(Clone, Debug)]
pub struct DecompositionSpectra {
    pub f: [Spectrum; 3],
    pub h: [Spectrum; 3],
    pub g: Spectrum,
}

/// `G` uses the dealiased wave right-hand side `fw` and is dealiased once
/// more after assembly.
pub fn decomposition_spectra(c: &CouplingTensors, w: &Jet, v: &Jet, fw: &ScalarField) -> DecompositionSpectra {
    let grid = w.grid();
    let (f, h, g) = decomposition_raw(c, w, v, fw.values());
    let to = |x: Vec<f64>| ScalarField::from_raw(grid, x);
    let [f0, f1, f2] = f.map(to);
    let [h0, h1, h2] = h.map(to);
    let pair = |a: &ScalarField, b: &ScalarField| {
        let (mut sa, mut sb) = grid.transform_pair(a, b);
        sa.dealias_in_place();
        sb.dealias_in_place();
        (sa, sb)
    };
    let (f0, f1) = pair(&f0, &f1);
    let (f2, h0) = pair(&f2, &h0);
    let (h1, h2) = pair(&h1, &h2);
    let mut g = grid.transform(&to(g));
    g.dealias_in_place();
    DecompositionSpectra { f: [f0, f1, f2], h: [h0, h1, h2], g }
}

/// Sources for the auxiliary wave problems in physical space.
pub fn decomposition_from_jets(c: &CouplingTensors, w: &Jet, v: &Jet, fw: &ScalarField) -> Decomposition {
    let s = decomposition_spectra(c, w, v, fw);
    let (f0, f1) = Spectrum::pair_to_fields(&s.f[0], &s.f[1]);
    let (f2, h0) = Spectrum::pair_to_fields(&s.f[2], &s.h[0]);
    let (h1, h2) = Spectrum::pair_to_fields(&s.h[1], &s.h[2]);
    Decomposition { f: [f0, f1, f2], h: [h0, h1, h2], g: s.g.to_field() }
}

pub fn divergence_decomposition(state: &FieldState) -> Decomposition {
    let (w, v) = state_jets(state);
    let (fw, _) = rhs_from_jets(&state.couplings, &w, &v);
    decomposition_from_jets(&state.couplings, &w, &v, &fw)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompositionResidual {
    /// `sup |LHS - RHS|`.
    pub absolute: f64,
    /// `sup |LHS|`, the scale of the decomposed nonlinearity.
    pub scale: f64,
}

impl DecompositionResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.absolute / self.scale
        }
    }
}

/// Compares `F_w` with `∂^α F_α + ∂_α H^α + G`. Time derivatives of the
/// products are expanded by the product rule with `∂t²w = Δw + F_w`.
pub fn decomposition_residual(state: &FieldState) -> DecompositionResidual {
    let grid = state.grid().clone();
    let c = &*state.couplings;
    let (w, v) = state_jets(state);
    let (fw, _) = rhs_from_jets(c, &w, &v);
    let len = grid.len();
    let c1 = c.c1;
    let k = antisym_source_matrix(c);

    // ∂t∂α w with ∂t∂t w = Δw + F_w.
    let sw = grid.transform(&state.w);
    let wtt = &sw.laplacian().to_field() + &fw;
    let (dt_w1, dt_w2) = gradient(&state.wt);
    let dt_dw = [wtt, dt_w1, dt_w2];

    let (f, h, g) = decomposition_raw(c, &w, &v, fw.values());
    let vv = state.v.values();
    let vt = state.vt.values();
    // Nodewise part: -∂t F_0 + ∂t H^0 + G.
    let mut pointwise = g;
    for i in 0..len {
        let p = c1 * vv[i] + 0.5 * c1 * c1 * vv[i] * vv[i];
        let dp = (c1 + c1 * c1 * vv[i]) * vt[i];
        let dt_f0 = dp * w.d[0].values()[i] + p * dt_dw[0].values()[i];
        let q = vv[i] + 0.5 * c1 * vv[i] * vv[i];
        let dq = (1.0 + c1 * vv[i]) * vt[i];
        let mut dt_h0 = 0.0;
        for b in 0..3 {
            let coef = k[b][0];
            if coef != 0.0 {
                dt_h0 += coef * (dq * w.d[b].values()[i] + q * dt_dw[b].values()[i]);
            }
        }
        pointwise[i] += -dt_f0 + dt_h0;
    }
    // Spatial part: ∂i (F_i + H^i).
    let s1 = ScalarField::from_raw(&grid, f[1].iter().zip(&h[1]).map(|(a, b)| a + b).collect());
    let s2 = ScalarField::from_raw(&grid, f[2].iter().zip(&h[2]).map(|(a, b)| a + b).collect());
    let (mut t1, mut t2) = grid.transform_pair(&s1, &s2);
    t1.dealias_in_place();
    t2.dealias_in_place();
    let mut div = t1.derivative(1, 0);
    div.add_scaled(1.0, &t2.derivative(0, 1));
    let mut total = grid.transform(&ScalarField::from_raw(&grid, pointwise));
    total.dealias_in_place();
    total.add_scaled(1.0, &div);
    let rhs_field = total.to_field();
    DecompositionResidual { absolute: (&fw - &rhs_field).max_abs(), scale: fw.max_abs() }
}

/// Outcome of the nodewise null-form bound.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NullFormBound {
    /// Largest ratio `|Q| / Σ_i (|G_i m||∂n| + |G_i n||∂m|)` over admissible nodes.
    pub max_ratio: f64,
    /// Nodes skipped because of the `r < h/2` rule or a `0/0` quotient.
    pub excluded_nodes: usize,
}

/// Checks `|Q(m,n)| ≤ κ Σ_i (|G_i m||∂n| + |G_i n||∂m|)` for `Q0` and every
/// `Q_{αβ}` with `α < β`. `|∂u|` is the Euclidean norm of `(∂t u, ∂1 u, ∂2 u)`.
pub fn nullform_bound_ratio(m: &Jet, n: &Jet) -> NullFormBound {
    let grid = m.grid();
    let half_h = 0.5 * grid.spacing();
    let (dm, dn) = (jet_slices(m), jet_slices(n));
    let mut out = NullFormBound::default();
    for (idx, &r) in grid.radius_table().iter().enumerate() {
        if r < half_h {
            out.excluded_nodes += 1;
            continue;
        }
        let (x1, x2) = grid.node(idx);
        let om = [x1 / r, x2 / r];
        let a = [dm[0][idx], dm[1][idx], dm[2][idx]];
        let b = [dn[0][idx], dn[1][idx], dn[2][idx]];
        let norm = |u: &[f64; 3]| (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        let good = |u: &[f64; 3], i: usize| om[i] * u[0] + u[i + 1];
        let den = (0..2).map(|i| good(&a, i).abs() * norm(&b) + good(&b, i).abs() * norm(&a)).sum::<f64>();
        let mut q_max = (-a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).abs();
        for (al, be) in [(0, 1), (0, 2), (1, 2)] {
            q_max = q_max.max((a[al] * b[be] - b[al] * a[be]).abs());
        }
        if den == 0.0 {
            if q_max == 0.0 {
                out.excluded_nodes += 1;
            } else {
                out.max_ratio = f64::INFINITY;
            }
            continue;
        }
        out.max_ratio = out.max_ratio.max(q_max / den);
    }
    out
}

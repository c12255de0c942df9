//! Commuting vector fields, the scaling field `S`, good derivatives and
//! numerical checks of the algebraic identities relating them.

mod algebra;
mod tower;

pub use algebra::{canonical_words, DiffOp, GammaWord, Generator, Index3, Poly};
pub use tower::{state_towers, Tower};

use std::sync::Arc;

use crate::fields::{FieldState, Target};
use crate::grid::{laplacian, Grid, ScalarField};
use crate::nullforms::{rhs, Jet};
use crate::{Error, Result};

/// `Γu` from the first derivatives in `jet`.
pub fn apply_field_value(gen: Generator, jet: &Jet, t: f64) -> ScalarField {
    let [dt, d1, d2] = [jet.d[0].values(), jet.d[1].values(), jet.d[2].values()];
    let grid = jet.grid();
    let n = grid.n();
    let x = grid.coords();
    let out = (0..n * n)
        .map(|k| {
            let (x1, x2) = (x[k / n], x[k % n]);
            match gen {
                Generator::Dt => dt[k],
                Generator::D1 => d1[k],
                Generator::D2 => d2[k],
                Generator::Om => x1 * d2[k] - x2 * d1[k],
                Generator::H1 => t * d1[k] + x1 * dt[k],
                Generator::H2 => t * d2[k] + x2 * dt[k],
                Generator::S => t * dt[k] + x1 * d1[k] + x2 * d2[k],
            }
        })
        .collect();
    ScalarField::from_raw(grid, out)
}

/// `Γu` with its first derivatives. Needs the second-order entries of `jet`.
pub fn apply_field(gen: Generator, jet: &Jet, t: f64) -> Result<Jet> {
    let s = jet.second_order()?;
    let value = apply_field_value(gen, jet, t);
    let grid = jet.grid();
    let x = grid.coords();
    let n = grid.n();
    let d: Vec<&[f64]> = jet.d.iter().map(|f| f.values()).collect();
    let dd = |a: usize, b: usize| s.get(a, b).values();
    let mut out = [vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]];
    for (alpha, o) in out.iter_mut().enumerate() {
        for k in 0..n * n {
            let xs = [t, x[k / n], x[k % n]];
            // ∂α(Γu) = Γ(∂α u) + [∂α, Γ]u
            o[k] = match gen {
                Generator::Dt => dd(alpha, 0)[k],
                Generator::D1 => dd(alpha, 1)[k],
                Generator::D2 => dd(alpha, 2)[k],
                Generator::Om => {
                    let c = match alpha {
                        1 => d[2][k],
                        2 => -d[1][k],
                        _ => 0.0,
                    };
                    xs[1] * dd(alpha, 2)[k] - xs[2] * dd(alpha, 1)[k] + c
                }
                Generator::H1 | Generator::H2 => {
                    let i = if gen == Generator::H1 { 1 } else { 2 };
                    let c = match alpha {
                        0 => d[i][k],
                        a if a == i => d[0][k],
                        _ => 0.0,
                    };
                    t * dd(alpha, i)[k] + xs[i] * dd(alpha, 0)[k] + c
                }
                Generator::S => {
                    t * dd(alpha, 0)[k] + xs[1] * dd(alpha, 1)[k] + xs[2] * dd(alpha, 2)[k] + d[alpha][k]
                }
            };
        }
    }
    let [d0, d1, d2] = out.map(|v| ScalarField::from_raw(grid, v));
    Ok(Jet::from_components(value, [d0, d1, d2]))
}

/// `Γ^I u` for `u = w` or `v` of a state, with time derivatives from the equations.
pub fn apply_word(word: &GammaWord, state: &FieldState, target: Target) -> Result<ScalarField> {
    let (tw, tv) = state_towers(state, word.len())?;
    match target {
        Target::W => tw.eval(&word.operator()),
        Target::V => tv.eval(&word.operator()),
    }
}

/// Nodes closer to the origin than half a grid spacing, where `x/r` is undefined.
fn near_origin(grid: &Grid) -> impl Fn(usize) -> bool + '_ {
    let cut = 0.5 * grid.spacing();
    move |k| grid.radius_table()[k] < cut
}

#[derive(Clone, Debug)]
pub struct GoodDerivative {
    pub field: ScalarField,
    /// Nodes with `r < h/2`, set to zero.
    pub excluded: usize,
}

/// `G_i u = (x_i/r) ∂t u + ∂i u`, `i ∈ {1, 2}`.
pub fn good_derivative(i: usize, jet: &Jet) -> Result<GoodDerivative> {
    if !(1..=2).contains(&i) {
        return Err(Error::IndexOutOfRange(i, 0));
    }
    let grid = jet.grid();
    let n = grid.n();
    let x = grid.coords();
    let r = grid.radius_table();
    let skip = near_origin(grid);
    let (dt, di) = (jet.d[0].values(), jet.d[i].values());
    let mut excluded = 0;
    let out = (0..n * n)
        .map(|k| {
            if skip(k) {
                excluded += 1;
                return 0.0;
            }
            let xi = if i == 1 { x[k / n] } else { x[k % n] };
            xi / r[k] * dt[k] + di[k]
        })
        .collect();
    Ok(GoodDerivative { field: ScalarField::from_raw(grid, out), excluded })
}

/// `max ⟨t + r⟩ |G_i u| / (|Su| + Σ_Γ |Γu|)` over nodes away from the origin
/// where the denominator is nonzero.
pub fn good_derivative_bound_ratio(tower: &Tower) -> Result<f64> {
    let t = tower.t();
    let grid = tower.grid();
    let jet = tower.jet(&DiffOp::identity())?;
    let mut denom = tower.eval(&Generator::S.operator())?.map(f64::abs);
    for g in Generator::COMMUTING {
        denom.axpy(1.0, &tower.eval(&g.operator())?.map(f64::abs));
    }
    let skip = near_origin(grid);
    let r = grid.radius_table();
    let mut worst = 0.0_f64;
    for i in 1..=2 {
        let gi = good_derivative(i, &jet)?;
        for k in 0..grid.len() {
            let d = denom.values()[k];
            if skip(k) || d == 0.0 {
                continue;
            }
            let weight = (1.0 + (t + r[k]).powi(2)).sqrt();
            worst = worst.max(weight * gi.field.values()[k].abs() / d);
        }
    }
    Ok(worst)
}

/// How the commutator `[□ - m, Γ]` is evaluated.
#[derive(Clone, Copy, Debug)]
pub enum CommutatorRoute<'a> {
    /// Exact polynomial algebra on `p`, sampled at the nodes of `grid` at time `t`.
    Analytic { poly: &'a Poly, grid: &'a Arc<Grid>, t: f64 },
    /// `□(Γu)` with `Γu` formed on the grid and its Laplacian taken spectrally,
    /// against `Γ(□u)` from the tower. `mass` is 0 for waves and 1 for Klein-Gordon.
    Spectral { tower: &'a Tower, mass: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommutatorResidual {
    pub absolute: f64,
    /// `‖Γu‖_∞`, the reference magnitude.
    pub scale: f64,
}

impl CommutatorResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.absolute
        } else {
            self.absolute / self.scale
        }
    }
}

/// `(□ - m)(Γu) - Γ((□ - m)u) - c_Γ □u`, with `c_Γ = 2` for `S` and 0 otherwise.
pub fn commutator_residual(gen: Generator, route: CommutatorRoute<'_>) -> Result<CommutatorResidual> {
    let g = gen.operator();
    let c = if gen == Generator::S { 2.0 } else { 0.0 };
    match route {
        CommutatorRoute::Analytic { poly, grid, t } => {
            let b = DiffOp::wave_operator();
            let gp = g.apply_poly(poly);
            let res = b.apply_poly(&gp).add(&g.apply_poly(&b.apply_poly(poly)).scale(-1.0)).add(&b.apply_poly(poly).scale(-c));
            let at = |p: &Poly| ScalarField::from_fn(grid, |x1, x2| p.eval(t, x1, x2)).max_abs();
            Ok(CommutatorResidual { absolute: at(&res), scale: at(&gp) })
        }
        CommutatorRoute::Spectral { tower, mass } => {
            let dt = DiffOp::partial(0);
            let gu = tower.eval(&g)?;
            let gu_tt = tower.eval(&dt.compose(&dt).compose(&g))?;
            let mut lhs = &laplacian(&gu) - &gu_tt;
            lhs.axpy(-mass, &gu);
            let kg = DiffOp::wave_operator().sub(&DiffOp::identity().scale(mass));
            let mut rhs_op = g.compose(&kg);
            if c != 0.0 {
                rhs_op = rhs_op.add(&DiffOp::wave_operator().scale(c));
            }
            let rhs = tower.eval(&rhs_op)?;
            Ok(CommutatorResidual { absolute: (&lhs - &rhs).max_abs(), scale: gu.max_abs() })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpanReport {
    /// Coefficients of `∂t u, ∂1 u, ∂2 u` in the least-squares fit.
    pub coefficients: [f64; 3],
    pub relative_residual: f64,
}

/// Fits `[∂α, Γ]u` by a constant combination of first derivatives of `u`.
pub fn commutator_span(gen: Generator, alpha: usize, tower: &Tower) -> Result<SpanReport> {
    if alpha > 2 {
        return Err(Error::IndexOutOfRange(alpha, 0));
    }
    let d = DiffOp::partial(alpha);
    let g = gen.operator();
    let target = tower.eval(&d.compose(&g).sub(&g.compose(&d)))?;
    let basis: Vec<ScalarField> = (0..3).map(|a| tower.eval(&DiffOp::partial(a))).collect::<Result<_>>()?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = dot(basis[i].values(), basis[j].values());
        }
        rhs[i] = dot(basis[i].values(), target.values());
    }
    let coefficients = solve3(m, rhs).ok_or_else(|| Error::InvalidData("first derivatives are linearly dependent".into()))?;
    let mut fit = ScalarField::zeros(tower.grid());
    for (c, b) in coefficients.iter().zip(&basis) {
        fit.axpy(*c, b);
    }
    let scale = target.l2_norm().max(basis.iter().map(ScalarField::l2_norm).fold(0.0, f64::max));
    Ok(SpanReport { coefficients, relative_residual: (&target - &fit).l2_norm() / scale })
}

/// Cramer's rule for a 3×3 system.
fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    let scale = m.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max).powi(3);
    if d.abs() <= 1e-14 * scale {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut a = m;
        for r in 0..3 {
            a[r][c] = b[r];
        }
        *o = det(a) / d;
    }
    Some(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepresentationReport {
    /// Relative error of `∂t u` rebuilt from `S, H_j`.
    pub dt: f64,
    /// Relative errors of `∂1 u, ∂2 u` rebuilt from `S, H_i, Ω`.
    pub d: [f64; 2],
    /// Relative disagreement of the two expressions for `G_i u` with each other
    /// and with the direct one.
    pub good: [f64; 2],
    pub nodes_used: usize,
    pub nodes_excluded: usize,
}

impl RepresentationReport {
    pub fn max(&self) -> f64 {
        [self.dt, self.d[0], self.d[1], self.good[0], self.good[1]].into_iter().fold(0.0, f64::max)
    }
}

/// Rebuilds first derivatives from `S, Ω, H_i` on nodes with
/// `|t² - r²| > 0.1 ⟨t⟩² h` and compares them with the stored ones.
pub fn representation_check(tower: &Tower) -> Result<RepresentationReport> {
    let t = tower.t();
    let grid = tower.grid();
    let n = grid.n();
    let x = grid.coords();
    let r = grid.radius_table();
    let ev = |g: Generator| tower.eval(&g.operator());
    let (s, om, h1, h2) = (ev(Generator::S)?, ev(Generator::Om)?, ev(Generator::H1)?, ev(Generator::H2)?);
    let d: Vec<ScalarField> = (0..3).map(|a| tower.eval(&DiffOp::partial(a))).collect::<Result<_>>()?;
    let band = 0.1 * (1.0 + t * t) * grid.spacing();
    let sup = |f: &ScalarField| f.max_abs();
    let (mut e_dt, mut e_d, mut e_g) = (0.0_f64, [0.0_f64; 2], [0.0_f64; 2]);
    let (mut used, mut excluded) = (0, 0);
    let g_scale = [sup(&d[0]) + sup(&d[1]), sup(&d[0]) + sup(&d[2])];
    for k in 0..n * n {
        let xs = [x[k / n], x[k % n]];
        let h = [h1.values()[k], h2.values()[k]];
        let (sv, ov) = (s.values()[k], om.values()[k]);
        let du = [d[0].values()[k], d[1].values()[k], d[2].values()[k]];
        if r[k] >= 0.5 * grid.spacing() && t > 0.0 {
            for i in 0..2 {
                let a = (h[i] + (r[k] - t) * du[i + 1]) / r[k];
                let b = (h[i] - xs[i] / r[k] * (r[k] - t) * du[0]) / t;
                let direct = xs[i] / r[k] * du[0] + du[i + 1];
                let diff = (a - b).abs().max((a - direct).abs()).max((b - direct).abs());
                e_g[i] = e_g[i].max(diff);
            }
        }
        let q = t * t - r[k] * r[k];
        if q.abs() <= band {
            excluded += 1;
            continue;
        }
        used += 1;
        let dt = (t * sv - xs[0] * h[0] - xs[1] * h[1]) / q;
        e_dt = e_dt.max((dt - du[0]).abs());
        let d1 = (t * h[0] - xs[0] * sv + xs[1] * ov) / q;
        let d2 = (t * h[1] - xs[1] * sv - xs[0] * ov) / q;
        e_d[0] = e_d[0].max((d1 - du[1]).abs());
        e_d[1] = e_d[1].max((d2 - du[2]).abs());
    }
    if used == 0 {
        return Err(Error::EmptyNodeSet(format!("every node lies within {band:.3e} of the light cone at t = {t}")));
    }
    let rel = |e: f64, s: f64| if s == 0.0 { e } else { e / s };
    Ok(RepresentationReport {
        dt: rel(e_dt, sup(&d[0])),
        d: [rel(e_d[0], sup(&d[1])), rel(e_d[1], sup(&d[2]))],
        good: [rel(e_g[0], g_scale[0]), rel(e_g[1], g_scale[1])],
        nodes_used: used,
        nodes_excluded: excluded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HessianDecayReport {
    /// `‖lhs - rhs‖_∞ / ‖F_w‖_∞` for the second-order identity for `-□w`.
    pub identity_residual: f64,
    /// `max |∂∂w| ⟨t - r⟩ / (Σ_{|I|≤1} |∂Γ^I w| + t |F_w|)` over `r ≤ 2t`.
    pub ratio: f64,
}

/// Checks the identity
/// `-t²□ = (t² - r²)∂t² + x^i ∂t H_i - t ∂^i H_i + 2t ∂t - x^i ∂i`
/// on `w` and the weighted Hessian bound it implies.
pub fn hessian_decay_check(state: &FieldState) -> Result<HessianDecayReport> {
    let t = state.t;
    if t < 1.0 {
        return Err(Error::TimeTooSmall { t, min: 1.0 });
    }
    let (tw, _) = state_towers(state, 2)?;
    let (fw, _) = rhs(state);
    let grid = state.grid();
    let n = grid.n();
    let x = grid.coords();
    let r = grid.radius_table();
    let dt = DiffOp::partial(0);
    let second: Vec<Vec<ScalarField>> = (0..3)
        .map(|a| (0..3).map(|b| tower_eval2(&tw, a, b)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let h = [Generator::H1, Generator::H2].map(|g| g.operator());
    let dth: Vec<ScalarField> = h.iter().map(|hi| tw.eval(&dt.compose(hi))).collect::<Result<_>>()?;
    let dih: Vec<ScalarField> =
        (0..2).map(|i| tw.eval(&DiffOp::partial(i + 1).compose(&h[i]))).collect::<Result<_>>()?;
    let d: Vec<ScalarField> = (0..3).map(|a| tw.eval(&DiffOp::partial(a))).collect::<Result<_>>()?;
    // Σ_{|I| ≤ 1} |∂Γ^I w|
    let mut good_sum = vec![0.0; n * n];
    for op in std::iter::once(DiffOp::identity()).chain(Generator::COMMUTING.iter().map(|g| g.operator())) {
        let j = tw.jet(&op)?;
        for (k, s) in good_sum.iter_mut().enumerate() {
            *s += (j.d[0].values()[k].powi(2) + j.d[1].values()[k].powi(2) + j.d[2].values()[k].powi(2)).sqrt();
        }
    }
    let mut resid = 0.0_f64;
    let mut ratio = 0.0_f64;
    for k in 0..n * n {
        let xs = [x[k / n], x[k % n]];
        let mut v = (t * t - r[k] * r[k]) / (t * t) * second[0][0].values()[k] + 2.0 / t * d[0].values()[k];
        for i in 0..2 {
            v += xs[i] / (t * t) * dth[i].values()[k] - dih[i].values()[k] / t - xs[i] / (t * t) * d[i + 1].values()[k];
        }
        resid = resid.max((v - fw.values()[k]).abs());
        if r[k] <= 2.0 * t {
            let hess = second.iter().flatten().map(|f| f.values()[k].powi(2)).sum::<f64>().sqrt();
            let denom = good_sum[k] + t * fw.values()[k].abs();
            if denom > 0.0 {
                let w = (1.0 + (t - r[k]).powi(2)).sqrt();
                ratio = ratio.max(hess * w / denom);
            }
        }
    }
    let scale = fw.max_abs();
    Ok(HessianDecayReport { identity_residual: if scale == 0.0 { resid } else { resid / scale }, ratio })
}

fn tower_eval2(tw: &Tower, a: usize, b: usize) -> Result<ScalarField> {
    tw.eval(&DiffOp::partial(a).compose(&DiffOp::partial(b)))
}

//! Tables of mixed derivatives `∂t^a ∂1^b ∂2^c u` at one time.
//!
//! Time derivatives beyond the first come from the equations of motion,
//! `∂t^{a+2} u = Δ ∂t^a u - m ∂t^a u + ∂t^a F`, with `∂t^a F` expanded by
//! the product rule. Spatial derivatives are spectral.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::algebra::{DiffOp, Index3, Poly};
use crate::fields::FieldState;
use crate::grid::{Grid, ScalarField, Spectrum};
use crate::nullforms::{dealias_pair, BilinearForm, Jet};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct Tower {
    grid: Arc<Grid>,
    t: f64,
    order: usize,
    entries: HashMap<Index3, ScalarField>,
}

fn spatial_indices(max: usize) -> impl Iterator<Item = (u8, u8)> {
    (0..=max).flat_map(move |b| (0..=max - b).map(move |c| (b as u8, c as u8)))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Tower {
    /// Builds the table from time levels `levels[a] = ∂t^a u`, `a = 0..=order`.
    pub fn from_levels(levels: &[ScalarField], t: f64, order: usize) -> Result<Self> {
        if levels.len() <= order {
            return Err(Error::OrderCap { requested: order, max: levels.len().saturating_sub(1) });
        }
        let grid = levels[0].grid().clone();
        let mut entries = HashMap::new();
        for (a, level) in levels.iter().enumerate().take(order + 1) {
            let rest = order - a;
            entries.insert([a as u8, 0, 0], level.clone());
            if rest == 0 {
                continue;
            }
            let s = grid.transform(level);
            for (b, c) in spatial_indices(rest).filter(|&(b, c)| b + c > 0) {
                entries.insert([a as u8, b, c], s.derivative(b as u32, c as u32).to_field());
            }
        }
        Ok(Self { grid, t, order, entries })
    }

    /// All entries from a closed-form function of the multi-index and position.
    pub fn analytic(grid: &Arc<Grid>, t: f64, order: usize, f: impl Fn(Index3, f64, f64) -> f64 + Sync) -> Self {
        let mut entries = HashMap::new();
        for a in 0..=order {
            for (b, c) in spatial_indices(order - a) {
                let idx = [a as u8, b, c];
                entries.insert(idx, ScalarField::from_fn(grid, |x1, x2| f(idx, x1, x2)));
            }
        }
        Self { grid: grid.clone(), t, order, entries }
    }

    /// Exact derivatives of a polynomial in `(t, x1, x2)`.
    pub fn from_poly(grid: &Arc<Grid>, t: f64, order: usize, p: &Poly) -> Self {
        Self::analytic(grid, t, order, |idx, x1, x2| p.derivative(idx).eval(t, x1, x2))
    }

    /// Entry-wise `self - other`; both tables must share grid, time and order.
    pub fn difference(&self, other: &Tower) -> Result<Tower> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.order != other.order || self.t != other.t {
            return Err(Error::InvalidData(format!(
                "towers differ: order {} at t = {} against order {} at t = {}",
                self.order, self.t, other.order, other.t
            )));
        }
        let entries = self.entries.iter().map(|(k, v)| (*k, v - &other.entries[k])).collect();
        Ok(Self { grid: self.grid.clone(), t: self.t, order: self.order, entries })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, idx: Index3) -> Option<&ScalarField> {
        self.entries.get(&idx)
    }

    /// The operator applied to `u` at every node.
    pub fn eval(&self, op: &DiffOp) -> Result<ScalarField> {
        if op.order() > self.order {
            return Err(Error::OrderCap { requested: op.order(), max: self.order });
        }
        let n = self.grid.n();
        let x = self.grid.coords();
        let t = self.t;
        // Per term: data, and monomials as (power of x1, power of x2, coefficient with t folded in).
        let terms: Vec<(&[f64], Vec<(i32, usize, f64)>)> = op
            .terms()
            .map(|(idx, p)| {
                let monos = p
                    .terms()
                    .map(|(e, &c)| (e[1] as i32, e[2] as usize, c * t.powi(e[0] as i32)))
                    .collect();
                (self.entries[idx].values(), monos)
            })
            .collect();
        let max_c = terms.iter().flat_map(|(_, m)| m.iter().map(|m| m.1)).max().unwrap_or(0);
        let powers: Vec<Vec<f64>> = (0..=max_c).map(|c| x.iter().map(|&v| v.powi(c as i32)).collect()).collect();
        let mut out = vec![0.0; n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let x1 = x[i];
            let mut by_c = vec![0.0; max_c + 1];
            for (data, monos) in &terms {
                by_c.iter_mut().for_each(|v| *v = 0.0);
                for &(b, c, coef) in monos {
                    by_c[c] += coef * x1.powi(b);
                }
                let d = &data[i * n..(i + 1) * n];
                if max_c == 0 || by_c[1..].iter().all(|&v| v == 0.0) {
                    let k = by_c[0];
                    row.iter_mut().zip(d).for_each(|(o, &v)| *o += k * v);
                } else {
                    for j in 0..n {
                        let k: f64 = by_c.iter().zip(&powers).map(|(&a, p)| a * p[j]).sum();
                        row[j] += k * d[j];
                    }
                }
            }
        });
        Ok(ScalarField::from_raw(&self.grid, out))
    }

    /// `op u` with its first derivatives `∂α (op u)`.
    pub fn jet(&self, op: &DiffOp) -> Result<Jet> {
        let value = self.eval(op)?;
        let d = [0, 1, 2].map(|a| self.eval(&DiffOp::partial(a).compose(op)));
        let [d0, d1, d2] = d;
        Ok(Jet::from_components(value, [d0?, d1?, d2?]))
    }
}

/// Towers for `w` and `v` of a state up to total order `order`.
pub fn state_towers(state: &FieldState, order: usize) -> Result<(Tower, Tower)> {
    let grid = state.grid();
    let bw = BilinearForm::wave(&state.couplings);
    let bv = BilinearForm::kg(&state.couplings);
    let coupled = !(bw.is_zero() && bv.is_zero());
    let mut w = vec![state.w.clone(), state.wt.clone()];
    let mut v = vec![state.v.clone(), state.vt.clone()];
    // Spectra and gradients of each level, filled lazily.
    let mut spectra: Vec<(Spectrum, Spectrum)> = Vec::new();
    let mut grads: Vec<([ScalarField; 2], [ScalarField; 2])> = Vec::new();
    for a in 0..order.saturating_sub(1) {
        while spectra.len() <= a {
            let p = spectra.len();
            let (sw, sv) = grid.transform_pair(&w[p], &v[p]);
            let (w1, w2) = Spectrum::pair_to_fields(&sw.derivative(1, 0), &sw.derivative(0, 1));
            let (v1, v2) = Spectrum::pair_to_fields(&sv.derivative(1, 0), &sv.derivative(0, 1));
            grads.push(([w1, w2], [v1, v2]));
            spectra.push((sw, sv));
        }
        let (lw, lv) = Spectrum::pair_to_fields(&spectra[a].0.laplacian(), &spectra[a].1.laplacian());
        let (mut fw, mut fv) = if coupled {
            let mut fw = vec![0.0; grid.len()];
            let mut fv = vec![0.0; grid.len()];
            for p in 0..=a {
                let q = a - p;
                let dm = [w[p + 1].values(), grads[p].0[0].values(), grads[p].0[1].values()];
                let dn = [v[q + 1].values(), grads[q].1[0].values(), grads[q].1[1].values()];
                let c = binomial(a, p);
                bw.accumulate(dm, dn, c, &mut fw);
                bv.accumulate(dm, dn, c, &mut fv);
            }
            dealias_pair(&ScalarField::from_raw(grid, fw), &ScalarField::from_raw(grid, fv))
        } else {
            (ScalarField::zeros(grid), ScalarField::zeros(grid))
        };
        fw.axpy(1.0, &lw);
        fv.axpy(1.0, &lv);
        fv.axpy(-1.0, &v[a]);
        w.push(fw);
        v.push(fv);
    }
    Ok((Tower::from_levels(&w, state.t, order)?, Tower::from_levels(&v, state.t, order)?))
}

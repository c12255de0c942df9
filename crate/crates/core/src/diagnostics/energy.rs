//! Energy functionals.

use crate::grid::{gradient, integrate, ScalarField};
use crate::nullforms::Jet;
use crate::vectorfields::{apply_field_value, Generator};

/// `E(u) = ∫ (∂t u)² + |∇u|² dx`.
pub fn energy_wave(u: &ScalarField, ut: &ScalarField) -> f64 {
    let (u1, u2) = gradient(u);
    energy_from_parts(ut, &u1, &u2, None)
}

/// `E1(u) = E(u) + ∫ u² dx`.
pub fn energy_kg(u: &ScalarField, ut: &ScalarField) -> f64 {
    let (u1, u2) = gradient(u);
    energy_from_parts(ut, &u1, &u2, Some(u))
}

/// Energy density integrated from precomputed derivatives.
pub fn energy_from_parts(ut: &ScalarField, u1: &ScalarField, u2: &ScalarField, mass: Option<&ScalarField>) -> f64 {
    let h = ut.grid().spacing();
    let (a, b, c) = (ut.values(), u1.values(), u2.values());
    let mut sum = 0.0;
    match mass {
        Some(m) => {
            let m = m.values();
            for i in 0..a.len() {
                sum += a[i] * a[i] + b[i] * b[i] + c[i] * c[i] + m[i] * m[i];
            }
        }
        None => {
            for i in 0..a.len() {
                sum += a[i] * a[i] + b[i] * b[i] + c[i] * c[i];
            }
        }
    }
    sum * h * h
}

pub fn energy_wave_jet(j: &Jet) -> f64 {
    energy_from_parts(&j.d[0], &j.d[1], &j.d[2], None)
}

pub fn energy_kg_jet(j: &Jet) -> f64 {
    energy_from_parts(&j.d[0], &j.d[1], &j.d[2], Some(&j.value))
}

/// `𝒢(u) = ∫ (Su + u)² + (Ωu)² + Σ_i (H_i u)² dx` at time `t`.
pub fn conformal_energy(j: &Jet, t: f64) -> f64 {
    let value = |g: Generator| apply_field_value(g, j, t);
    let su = &value(Generator::S) + &j.value;
    let sq = |f: &ScalarField| integrate(&f.product(f));
    sq(&su) + sq(&value(Generator::Om)) + sq(&value(Generator::H1)) + sq(&value(Generator::H2))
}

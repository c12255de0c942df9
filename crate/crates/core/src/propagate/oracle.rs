//! Real-space quadrature oracles for the free wave equation on the plane.
//!
//! With `u0 = 0` the solution is
//!
//! ```text
//! u(t,x) = (1/2π) ∫_{B(x,t)} u1(y) / √(t² - |x-y|²) dy
//!        = (1/2π) ∫_0^{2π} ∫_0^{π/2} u1(x - t sinφ ω(θ)) t sinφ dφ dθ
//! ```
//!
//! after `y = x - ρω`, `ρ = t sinφ`, which removes the square-root
//! singularity. The `u0` contribution is the time derivative of the same
//! operator; writing `y = x - tz` and differentiating under the integral gives
//!
//! ```text
//! (1/2π) ∫∫ [u0(x - t sinφ ω) - t sinφ (ω·∇u0)(x - t sinφ ω)] sinφ dφ dθ.
//! ```

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::{Error, Result};

pub const DEFAULT_ABS_TOL: f64 = 1e-8;
const MAX_BISECTIONS: u32 = 24;

/// Adaptive 1D quadrature: double-exponential panels, bisected until each
/// panel's error estimate meets its share of `abs_tol`.
pub fn integrate_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    bisect(f, a, b, abs_tol, 0)
}

fn bisect(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let out = quadrature::integrate(f, a, b, tol);
    // Requests below round-off of the panel value cannot be met.
    let floor = 8.0 * f64::EPSILON * out.integral.abs();
    if out.error_estimate <= tol.max(floor) && out.integral.is_finite() {
        return Ok(out.integral);
    }
    if depth >= MAX_BISECTIONS {
        return Err(Error::Quadrature { estimate: out.error_estimate, tolerance: tol });
    }
    let m = 0.5 * (a + b);
    Ok(bisect(f, a, m, 0.5 * tol, depth + 1)? + bisect(f, m, b, 0.5 * tol, depth + 1)?)
}

/// `∫_0^{2π} ∫_0^{π/2} g(φ, θ) dφ dθ / 2π` with a split tolerance budget.
fn polar_average(g: &(dyn Fn(f64, f64) -> f64 + Sync), abs_tol: f64) -> Result<f64> {
    let inner_tol = 0.25 * abs_tol;
    let failure = std::cell::Cell::new(None);
    let outer = |theta: f64| -> f64 {
        match integrate_adaptive(&|phi| g(phi, theta), 0.0, FRAC_PI_2, inner_tol) {
            Ok(v) => v / TAU,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        }
    };
    let value = integrate_adaptive(&outer, 0.0, TAU, 0.5 * abs_tol)?;
    match failure.take() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Free-wave solution with data `(0, u1)` at time `t ≥ 0`, point `x`.
pub fn oracle_pointwise_wave(
    u1: &(dyn Fn(f64, f64) -> f64 + Sync),
    t: f64,
    x: [f64; 2],
    abs_tol: f64,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let g = |phi: f64, theta: f64| {
        let rho = t * phi.sin();
        let (s, c) = theta.sin_cos();
        u1(x[0] - rho * c, x[1] - rho * s) * rho
    };
    polar_average(&g, abs_tol)
}

/// Free-wave solution with data `(u0, 0)`; `grad_u0` must be the exact gradient.
pub fn oracle_pointwise_wave_u0(
    u0: &(dyn Fn(f64, f64) -> f64 + Sync),
    grad_u0: &(dyn Fn(f64, f64) -> [f64; 2] + Sync),
    t: f64,
    x: [f64; 2],
    abs_tol: f64,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(u0(x[0], x[1]));
    }
    let g = |phi: f64, theta: f64| {
        let sp = phi.sin();
        let rho = t * sp;
        let (s, c) = theta.sin_cos();
        let (y1, y2) = (x[0] - rho * c, x[1] - rho * s);
        let grad = grad_u0(y1, y2);
        (u0(y1, y2) - rho * (c * grad[0] + s * grad[1])) * sp
    };
    polar_average(&g, abs_tol)
}

/// `∫_{-∞}^{a} (1 + s²)^{-3/4} ds`. With `s = tan u` the integrand is
/// `cos(u)^{-1/2}` on `(-π/2, atan a]`; then `u = v² - π/2` makes it
/// `2v / √sin(v²)`, which is smooth up to `v = 0`.
pub fn ghost_weight_q(a: f64, abs_tol: f64) -> Result<f64> {
    let g = |v: f64| {
        let s = (v * v).sin();
        if s > 0.0 {
            2.0 * v / s.sqrt()
        } else {
            2.0
        }
    };
    integrate_adaptive(&g, 0.0, (a.atan() + FRAC_PI_2).sqrt(), abs_tol)
}

/// `q(t, r=t) = ∫_{-∞}^0 ⟨s⟩^{-3/2} ds`.
pub fn ghost_weight_at_cone(abs_tol: f64) -> Result<f64> {
    ghost_weight_q(0.0, abs_tol)
}

/// `∫_ℝ ⟨s⟩^{-3/2} ds`, the supremum of the ghost weight exponent.
pub fn ghost_weight_sup(abs_tol: f64) -> Result<f64> {
    Ok(2.0 * ghost_weight_at_cone(0.5 * abs_tol)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn one_dimensional_integrals() {
        let v = integrate_adaptive(&|x: f64| x.sin(), 0.0, PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let peak = integrate_adaptive(&|x: f64| (-(x - 0.3) * (x - 0.3) * 1e2).exp(), -5.0, 5.0, 1e-12).unwrap();
        assert!((peak - (PI / 1e2).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unit_velocity_gives_t() {
        for t in [0.5, 3.0, 10.0] {
            let u = oracle_pointwise_wave(&|_, _| 1.0, t, [0.3, -1.0], 1e-10).unwrap();
            assert!((u - t).abs() < 1e-9, "t = {t}: {u}");
        }
    }

    #[test]
    fn zero_velocity_gives_zero() {
        assert_eq!(oracle_pointwise_wave(&|_, _| 0.0, 4.0, [1.0, 2.0], 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn unit_position_stays_unit() {
        let u = oracle_pointwise_wave_u0(&|_, _| 1.0, &|_, _| [0.0, 0.0], 7.0, [0.0, 0.0], 1e-10).unwrap();
        assert!((u - 1.0).abs() < 1e-9);
    }

    #[test]
    fn linear_position_is_static() {
        // u0 = x1 solves the wave equation with zero velocity.
        let u = oracle_pointwise_wave_u0(&|x1, _| x1, &|_, _| [1.0, 0.0], 5.0, [2.0, -1.0], 1e-10).unwrap();
        assert!((u - 2.0).abs() < 1e-8);
    }

    #[test]
    fn cone_weight_matches_beta_function() {
        // ∫_{-∞}^0 (1+s²)^{-3/4} ds = B(1/2, 1/4) / 2
        let beta = statrs::function::beta::beta(0.5, 0.25);
        let q = ghost_weight_at_cone(1e-12).unwrap();
        assert!((q - 0.5 * beta).abs() < 1e-10, "{q} vs {}", 0.5 * beta);
        assert!((ghost_weight_sup(1e-12).unwrap() - beta).abs() < 1e-10);
    }

    #[test]
    fn ghost_weight_is_monotone() {
        let a = ghost_weight_q(-3.0, 1e-10).unwrap();
        let b = ghost_weight_q(1.0, 1e-10).unwrap();
        assert!(a > 0.0 && b > a);
    }
}

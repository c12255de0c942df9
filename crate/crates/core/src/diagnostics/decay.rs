//! Log-log least-squares fits of time series.

use serde::Serialize;

use crate::{Error, Result};

/// Transients before this time are excluded from every fit.
pub const MIN_FIT_TIME: f64 = 5.0;
pub const MIN_FIT_POINTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub t_min: f64,
    pub t_max: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub samples: usize,
}

/// Fits `log value = intercept + slope · log t` over samples with
/// `t_min ≤ t ≤ t_max`.
pub fn fit_decay(series: &[(f64, f64)], t_min: f64, t_max: f64) -> Result<DecayFit> {
    if !(t_min >= MIN_FIT_TIME) || !(t_max > t_min) {
        return Err(Error::InvalidWindow {
            t_min,
            t_max,
            reason: format!("need {MIN_FIT_TIME} <= t_min < t_max"),
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(t, v) in series.iter().filter(|(t, _)| *t >= t_min && *t <= t_max) {
        if !(v > 0.0) {
            return Err(Error::NonPositiveValue { t, value: v });
        }
        xs.push(t.ln());
        ys.push(v.ln());
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints { needed: MIN_FIT_POINTS, found: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    // A constant series is fitted exactly by slope 0; spread at round-off
    // level counts as constant.
    let noise = n * (16.0 * f64::EPSILON * my.abs().max(1.0)).powi(2);
    let r2 = if ss_tot > noise { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(DecayFit { t_min, t_max, slope, intercept, r2, samples: xs.len() })
}

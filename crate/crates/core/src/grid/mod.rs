//! Periodic square grid on `[-L, L)²` with spectral derivative, dealiasing
//! and quadrature primitives.

mod fft;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rayon::prelude::*;
pub use rustfft::num_complex::Complex64;

use crate::{Error, Result};
use fft::Fft2;

/// Imaginary parts left over after an inverse transform of a real field must
/// stay below this fraction of the field scale.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-12;

pub struct Grid {
    n: usize,
    half_length: f64,
    h: f64,
    coords: Vec<f64>,
    modes: Vec<i64>,
    wavenumbers: Vec<f64>,
    dealias_cutoff: usize,
    radius: Vec<f64>,
    fft: Fft2,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("half_length", &self.half_length)
            .field("h", &self.h)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_length == other.half_length
    }
}

/// Builds a grid with `n` nodes per axis on `[-L, L)²`.
pub fn make_grid(n: usize, half_length: f64) -> Result<Arc<Grid>> {
    Grid::new(n, half_length)
}

impl Grid {
    pub fn new(n: usize, half_length: f64) -> Result<Arc<Self>> {
        if n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n = {n} must be even")));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!("n = {n} must be at least 8")));
        }
        if !(half_length > 0.0) || !half_length.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "half length L = {half_length} must be positive and finite"
            )));
        }
        let h = 2.0 * half_length / n as f64;
        let coords: Vec<f64> = (0..n).map(|j| -half_length + j as f64 * h).collect();
        let modes: Vec<i64> = (0..n)
            .map(|i| if i <= n / 2 { i as i64 } else { i as i64 - n as i64 })
            .collect();
        let k0 = std::f64::consts::PI / half_length;
        let wavenumbers = modes.iter().map(|&m| m as f64 * k0).collect();
        let radius = (0..n * n)
            .map(|idx| coords[idx / n].hypot(coords[idx % n]))
            .collect();
        Ok(Arc::new(Self {
            n,
            half_length,
            h,
            coords,
            modes,
            wavenumbers,
            // 2/3 rule: keep |m| <= floor((2/3)(n/2))
            dealias_cutoff: n / 3,
            radius,
            fft: Fft2::new(n),
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Node coordinates along either axis.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Signed integer mode numbers in FFT order.
    pub fn modes(&self) -> &[i64] {
        &self.modes
    }

    /// Wavenumbers `m π / L` in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn fundamental_wavenumber(&self) -> f64 {
        std::f64::consts::PI / self.half_length
    }

    pub fn k_max(&self) -> f64 {
        (self.n / 2) as f64 * self.fundamental_wavenumber()
    }

    /// Largest retained mode number under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.dealias_cutoff
    }

    /// Whether the 1D mode at FFT index `i` survives dealiasing.
    pub fn dealias_keeps(&self, i: usize) -> bool {
        self.modes[i].unsigned_abs() as usize <= self.dealias_cutoff
    }

    /// `r = |x|` at every node.
    pub fn radius_table(&self) -> &[f64] {
        &self.radius
    }

    /// Index of the node at the origin.
    pub fn center_index(&self) -> usize {
        let c = self.n / 2;
        c * self.n + c
    }

    pub fn node(&self, idx: usize) -> (f64, f64) {
        (self.coords[idx / self.n], self.coords[idx % self.n])
    }

    /// Index of the node nearest to `(x1, x2)` on the torus.
    pub fn nearest_node(&self, x1: f64, x2: f64) -> usize {
        let snap = |x: f64| {
            let j = ((x + self.half_length) / self.h).round() as i64;
            j.rem_euclid(self.n as i64) as usize
        };
        snap(x1) * self.n + snap(x2)
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_length * self.half_length
    }

    fn negative_index(&self, idx: usize) -> usize {
        let n = self.n;
        let (i, j) = (idx / n, idx % n);
        ((n - i) % n) * n + (n - j) % n
    }

    /// Forward transform of one real field.
    pub fn transform(self: &Arc<Self>, f: &ScalarField) -> Spectrum {
        let mut data: Vec<Complex64> = f.values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft.forward(&mut data);
        Spectrum { grid: Arc::clone(self), data }
    }

    /// Forward transforms of two real fields using a single complex FFT.
    pub fn transform_pair(self: &Arc<Self>, a: &ScalarField, b: &ScalarField) -> (Spectrum, Spectrum) {
        // Packing leaks round-off between the two; keep exact zeros exact.
        if a.is_zero() || b.is_zero() {
            return (self.transform(a), self.transform(b));
        }
        let mut z: Vec<Complex64> = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect();
        self.fft.forward(&mut z);
        let len = z.len();
        let mut sa = vec![Complex64::new(0.0, 0.0); len];
        let mut sb = vec![Complex64::new(0.0, 0.0); len];
        for idx in 0..len {
            let zc = z[self.negative_index(idx)].conj();
            sa[idx] = (z[idx] + zc) * 0.5;
            // (z - zc) / 2i
            let d = (z[idx] - zc) * 0.5;
            sb[idx] = Complex64::new(d.im, -d.re);
        }
        (
            Spectrum { grid: Arc::clone(self), data: sa },
            Spectrum { grid: Arc::clone(self), data: sb },
        )
    }
}

#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("n", &self.grid.n)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        Self { grid: Arc::clone(grid), values: vec![c; grid.len()] }
    }

    /// Samples `f(x1, x2)` at every node.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let n = grid.n;
        let mut values = vec![0.0; n * n];
        values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let x1 = grid.coords[i];
            for (j, out) in row.iter_mut().enumerate() {
                *out = f(x1, grid.coords[j]);
            }
        });
        Self { grid: Arc::clone(grid), values }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite field value {bad}")));
        }
        Ok(Self { grid: Arc::clone(grid), values })
    }

    /// Wraps values produced internally; finiteness is the caller's concern.
    pub(crate) fn from_raw(grid: &Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid: Arc::clone(grid), values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n + j]
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn ensure_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.h * self.grid.h).sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.h * self.grid.h
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(self.same_grid(other));
        Self::from_raw(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    /// Nodewise map with access to the node coordinates.
    pub fn map_with_coords(&self, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let n = self.grid.n;
        let c = &self.grid.coords;
        Self::from_raw(
            &self.grid,
            self.values
                .iter()
                .enumerate()
                .map(|(idx, &v)| f(c[idx / n], c[idx % n], v))
                .collect(),
        )
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &ScalarField) {
        debug_assert!(self.same_grid(x));
        self.values.iter_mut().zip(&x.values).for_each(|(s, &xv)| *s += a * xv);
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn product(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a * b)
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.scale(rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale(-1.0)
    }
}

/// Fourier coefficients of a real field, unnormalized, FFT ordering.
#[derive(Clone)]
pub struct Spectrum {
    grid: Arc<Grid>,
    data: Vec<Complex64>,
}

impl fmt::Debug for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectrum").field("n", &self.grid.n).finish()
    }
}

impl Spectrum {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self { grid: Arc::clone(grid), data: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Multiplies every mode by `m(k1, k2)`; `m` must keep the spectrum
    /// conjugate symmetric.
    pub fn apply(&self, m: impl Fn(f64, f64) -> Complex64 + Sync) -> Spectrum {
        let mut out = self.clone();
        out.apply_in_place(m);
        out
    }

    pub fn apply_in_place(&mut self, m: impl Fn(f64, f64) -> Complex64 + Sync) {
        let n = self.grid.n;
        let k = &self.grid.wavenumbers;
        self.data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, z) in row.iter_mut().enumerate() {
                *z *= m(k[i], k[j]);
            }
        });
    }

    /// Applies `∂1^a ∂2^b`. Odd powers annihilate the Nyquist mode so that the
    /// result stays the transform of a real field.
    pub fn derivative(&self, a: u32, b: u32) -> Spectrum {
        let n = self.grid.n;
        let nyq = n / 2;
        let mult = |i: usize, p: u32| -> Complex64 {
            if p == 0 {
                return Complex64::new(1.0, 0.0);
            }
            if p % 2 == 1 && i == nyq {
                return Complex64::new(0.0, 0.0);
            }
            Complex64::new(0.0, self.grid.wavenumbers[i]).powu(p)
        };
        let m1: Vec<Complex64> = (0..n).map(|i| mult(i, a)).collect();
        let m2: Vec<Complex64> = (0..n).map(|j| mult(j, b)).collect();
        let mut out = self.clone();
        out.data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, z) in row.iter_mut().enumerate() {
                *z *= m1[i] * m2[j];
            }
        });
        out
    }

    pub fn laplacian(&self) -> Spectrum {
        self.apply(|k1, k2| Complex64::new(-(k1 * k1 + k2 * k2), 0.0))
    }

    pub fn dealias_in_place(&mut self) {
        let n = self.grid.n;
        let keep: Vec<bool> = (0..n).map(|i| self.grid.dealias_keeps(i)).collect();
        self.data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, z) in row.iter_mut().enumerate() {
                if !(keep[i] && keep[j]) {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
        });
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn add_scaled(&mut self, a: f64, other: &Spectrum) {
        self.data.iter_mut().zip(&other.data).for_each(|(s, &o)| *s += o * a);
    }

    /// `∫ f² dx` evaluated from the coefficients.
    pub fn parseval_integral(&self) -> f64 {
        let n2 = (self.grid.n * self.grid.n) as f64;
        let h2 = self.grid.h * self.grid.h;
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * h2 / n2
    }

    /// Inverse transform. Panics if the result carries an imaginary residue
    /// above [`IMAGINARY_RESIDUE_TOL`] times the field scale, which can only
    /// happen through an internal bug.
    pub fn to_field(&self) -> ScalarField {
        if self.is_zero() {
            return ScalarField::zeros(&self.grid);
        }
        let mut data = self.data.clone();
        self.grid.fft.inverse(&mut data);
        let (mut re_max, mut im_max) = (0.0_f64, 0.0_f64);
        let values: Vec<f64> = data
            .iter()
            .map(|z| {
                re_max = re_max.max(z.re.abs());
                im_max = im_max.max(z.im.abs());
                z.re
            })
            .collect();
        assert!(
            im_max <= IMAGINARY_RESIDUE_TOL * re_max.max(1.0),
            "imaginary residue {im_max:e} after inverse transform (scale {re_max:e})"
        );
        ScalarField::from_raw(&self.grid, values)
    }

    /// Inverse transforms of two spectra of real fields with one complex FFT.
    pub fn pair_to_fields(a: &Spectrum, b: &Spectrum) -> (ScalarField, ScalarField) {
        if a.is_zero() || b.is_zero() {
            return (a.to_field(), b.to_field());
        }
        let mut z: Vec<Complex64> = a
            .data
            .iter()
            .zip(&b.data)
            .map(|(&x, &y)| x + Complex64::new(-y.im, y.re))
            .collect();
        a.grid.fft.inverse(&mut z);
        let re = z.iter().map(|c| c.re).collect();
        let im = z.iter().map(|c| c.im).collect();
        (ScalarField::from_raw(&a.grid, re), ScalarField::from_raw(&a.grid, im))
    }
}

/// `∂_axis f` for `axis ∈ {1, 2}`.
pub fn spectral_derivative(f: &ScalarField, axis: usize) -> Result<ScalarField> {
    let (a, b) = match axis {
        1 => (1, 0),
        2 => (0, 1),
        _ => return Err(Error::InvalidGrid(format!("axis {axis} is not 1 or 2"))),
    };
    Ok(f.grid.transform(f).derivative(a, b).to_field())
}

/// Both first spatial derivatives with one forward and one inverse transform.
pub fn gradient(f: &ScalarField) -> (ScalarField, ScalarField) {
    let s = f.grid.transform(f);
    Spectrum::pair_to_fields(&s.derivative(1, 0), &s.derivative(0, 1))
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    f.grid.transform(f).laplacian().to_field()
}

/// Rectangle rule `h² Σ f`, spectrally accurate for smooth periodic `f`.
pub fn integrate(f: &ScalarField) -> f64 {
    f.values.iter().sum::<f64>() * f.grid.h * f.grid.h
}

pub fn dealias(f: &ScalarField) -> ScalarField {
    let mut s = f.grid.transform(f);
    s.dealias_in_place();
    s.to_field()
}

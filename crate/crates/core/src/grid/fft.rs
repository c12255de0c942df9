//! Square 2D complex FFT built from row transforms and transposes.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

const ROWS_PER_TASK: usize = 16;
const TRANSPOSE_BLOCK: usize = 32;

#[derive(Clone)]
pub(crate) struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Unnormalized forward transform in place.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform in place, scaled by `1/n²`.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / (self.n * self.n) as f64;
        data.par_chunks_mut(self.n * ROWS_PER_TASK)
            .for_each(|chunk| chunk.iter_mut().for_each(|z| *z *= scale));
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        debug_assert_eq!(data.len(), n * n);
        let rows = |data: &mut [Complex64]| {
            data.par_chunks_mut(n * ROWS_PER_TASK)
                .for_each(|chunk| plan.process(chunk));
        };
        rows(data);
        transpose_in_place(data, n);
        rows(data);
        transpose_in_place(data, n);
    }
}

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for bi in (0..n).step_by(TRANSPOSE_BLOCK) {
        for bj in (bi..n).step_by(TRANSPOSE_BLOCK) {
            let i_end = (bi + TRANSPOSE_BLOCK).min(n);
            let j_end = (bj + TRANSPOSE_BLOCK).min(n);
            for i in bi..i_end {
                let j_start = if bi == bj { i + 1 } else { bj };
                for j in j_start..j_end {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

//! Two-dimensional FFT on row-major buffers, built from rustfft 1D plans.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub(crate) struct Fft2 {
    nx: usize,
    ny: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            row_fwd: planner.plan_fft_forward(nx),
            row_inv: planner.plan_fft_inverse(nx),
            col_fwd: planner.plan_fft_forward(ny),
            col_inv: planner.plan_fft_inverse(ny),
        }
    }

    /// Unnormalized forward transform, in place.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform including the `1/(nx·ny)` factor, in place.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_inv, &self.col_inv);
        let s = 1.0 / (self.nx * self.ny) as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    fn run(&self, data: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.nx * self.ny);
        let scratch_len = rows
            .get_inplace_scratch_len()
            .max(cols.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        rows.process_with_scratch(data, &mut scratch);

        let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
        transpose(data, &mut t, self.nx, self.ny);
        cols.process_with_scratch(&mut t, &mut scratch);
        transpose(&t, data, self.ny, self.nx);
    }
}

/// `src` is `rows x cols` row-major; `dst` becomes `cols x rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], cols: usize, rows: usize) {
    const BLOCK: usize = 16;
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Spatial frequency of FFT bin `k` for `n` samples at `pitch`.
#[inline]
pub(crate) fn frequency(k: usize, n: usize, pitch: f64) -> f64 {
    let k = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
    k / (n as f64 * pitch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft2(data: &[Complex64], nx: usize, ny: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); nx * ny];
        for ky in 0..ny {
            for kx in 0..nx {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..ny {
                    for x in 0..nx {
                        let ang = -2.0
                            * std::f64::consts::PI
                            * ((kx * x) as f64 / nx as f64 + (ky * y) as f64 / ny as f64);
                        acc += data[y * nx + x] * Complex64::from_polar(1.0, ang);
                    }
                }
                out[ky * nx + kx] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_direct_dft_on_rectangular_grid() {
        let (nx, ny) = (6, 4);
        let data: Vec<Complex64> = (0..nx * ny)
            .map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let expected = naive_dft2(&data, nx, ny);
        let fft = Fft2::new(nx, ny);
        let mut got = data.clone();
        fft.forward(&mut got);
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12);
        }
        fft.inverse(&mut got);
        for (a, b) in got.iter().zip(&data) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn frequency_layout_is_standard() {
        assert_eq!(frequency(0, 4, 1.0), 0.0);
        assert_eq!(frequency(1, 4, 1.0), 0.25);
        assert_eq!(frequency(2, 4, 1.0), -0.5);
        assert_eq!(frequency(3, 4, 1.0), -0.25);
        assert_eq!(frequency(2, 5, 1.0), 0.4);
        assert_eq!(frequency(3, 5, 1.0), -0.4);
    }
}

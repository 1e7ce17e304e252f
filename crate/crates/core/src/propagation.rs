//! Free-space diffraction and phase-mask planes, and their cascade
//! `D_P P_P … D_1 P_1`.
//!
//! Diffraction uses the angular-spectrum transfer function
//! `H = exp(i·2π·z·√(λ⁻² − fx² − fy²))` on the periodic grid. Evanescent
//! bins are zeroed. For `|z|` beyond `n·pitch²/λ` the band-limited variant
//! zeroes frequencies above `1 / (λ·√((2·Δf·z)² + 1))` per axis, which
//! suppresses wraparound of the chirped impulse response.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{frequency, Fft2};
use crate::field::{ComplexField, SamplingGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandLimit {
    /// Clip only past the aliasing distance `n·pitch²/λ`.
    #[default]
    Auto,
    Always,
    Never,
}

/// Precomputed angular-spectrum propagator for one grid, distance and
/// wavelength. Cheap to clone; safe to share between threads.
#[derive(Clone)]
pub struct Propagator {
    grid: SamplingGrid,
    distance: f64,
    wavelength: f64,
    transfer: Vec<Complex64>,
    fft: Fft2,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("grid", &self.grid)
            .field("distance", &self.distance)
            .field("wavelength", &self.wavelength)
            .finish_non_exhaustive()
    }
}

impl Propagator {
    pub fn new(grid: SamplingGrid, distance: f64, wavelength: f64) -> Result<Self> {
        Self::with_band_limit(grid, distance, wavelength, BandLimit::Auto)
    }

    pub fn with_band_limit(
        grid: SamplingGrid,
        distance: f64,
        wavelength: f64,
        band_limit: BandLimit,
    ) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::ParameterRange { name: "wavelength", value: wavelength });
        }
        if !distance.is_finite() {
            return Err(Error::ParameterRange { name: "distance", value: distance });
        }
        let (nx, ny, p) = (grid.nx(), grid.ny(), grid.pitch());
        let inv_l2 = 1.0 / (wavelength * wavelength);
        let limit = |n: usize| -> f64 {
            let clip = match band_limit {
                BandLimit::Never => false,
                BandLimit::Always => true,
                BandLimit::Auto => distance.abs() > n as f64 * p * p / wavelength,
            };
            if clip {
                let df = 1.0 / (n as f64 * p);
                1.0 / (wavelength * ((2.0 * df * distance).powi(2) + 1.0).sqrt())
            } else {
                f64::INFINITY
            }
        };
        let (lim_x, lim_y) = (limit(nx), limit(ny));

        let mut transfer = Vec::with_capacity(grid.len());
        for ky in 0..ny {
            let fy = frequency(ky, ny, p);
            for kx in 0..nx {
                let fx = frequency(kx, nx, p);
                let arg = inv_l2 - fx * fx - fy * fy;
                let h = if arg < 0.0 || fx.abs() > lim_x || fy.abs() > lim_y {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::cis(TAU * distance * arg.sqrt())
                };
                transfer.push(h);
            }
        }
        Ok(Self { grid, distance, wavelength, transfer, fft: Fft2::new(nx, ny) })
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Propagator for `-distance`: the conjugate transfer function.
    pub fn inverse(&self) -> Propagator {
        Propagator {
            grid: self.grid,
            distance: -self.distance,
            wavelength: self.wavelength,
            transfer: self.transfer.iter().map(|h| h.conj()).collect(),
            fft: self.fft.clone(),
        }
    }

    pub fn propagate(&self, field: &ComplexField) -> Result<ComplexField> {
        self.grid.ensure_same(field.grid())?;
        let mut values = field.values().to_vec();
        self.apply_in_place(&mut values);
        Ok(ComplexField::from_raw(self.grid, values))
    }

    pub(crate) fn apply_in_place(&self, values: &mut [Complex64]) {
        if self.distance == 0.0 && self.transfer.iter().all(|h| h.re == 1.0) {
            return;
        }
        self.fft.forward(values);
        for (v, h) in values.iter_mut().zip(&self.transfer) {
            *v *= h;
        }
        self.fft.inverse(values);
    }
}

/// Propagates `field` over `distance` (negative values propagate backward).
pub fn propagate(field: &ComplexField, distance: f64, wavelength: f64) -> Result<ComplexField> {
    if distance == 0.0 {
        if !(wavelength > 0.0) {
            return Err(Error::ParameterRange { name: "wavelength", value: wavelength });
        }
        return Ok(field.clone());
    }
    Propagator::new(*field.grid(), distance, wavelength)?.propagate(field)
}

/// Phase profile of one mask plane, in radians. Values are kept as given;
/// application reduces them modulo 2π.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMask {
    grid: SamplingGrid,
    phase: Vec<f64>,
}

impl PhaseMask {
    pub fn new(grid: SamplingGrid, phase: Vec<f64>) -> Result<Self> {
        if phase.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: phase.len() });
        }
        if phase.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("phase mask contains non-finite values".into()));
        }
        Ok(Self { grid, phase })
    }

    pub fn zeros(grid: SamplingGrid) -> Self {
        Self { grid, phase: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: SamplingGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    pub fn from_fn(grid: SamplingGrid, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let mut phase = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny() {
            for ix in 0..grid.nx() {
                phase.push(f(grid.x(ix), grid.y(iy)));
            }
        }
        Self::new(grid, phase)
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn into_phase(self) -> Vec<f64> {
        self.phase
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.phase[self.grid.index(ix, iy)]
    }

    pub fn is_zero(&self) -> bool {
        self.phase.iter().all(|&p| p == 0.0)
    }

    /// `exp(i·(phase mod 2π))` per sample.
    pub fn factors(&self) -> Vec<Complex64> {
        self.phase.iter().map(|&p| Complex64::cis(p.rem_euclid(TAU))).collect()
    }

    /// Same mask with every phase reduced into `[0, 2π)`.
    pub fn wrapped(&self) -> PhaseMask {
        PhaseMask { grid: self.grid, phase: self.phase.iter().map(|p| p.rem_euclid(TAU)).collect() }
    }

    /// Translates the mask by whole pixels with periodic wraparound, so
    /// that `shifted(dx, dy).at(ix + dx, iy + dy) == at(ix, iy)`.
    pub fn shifted(&self, dx: i64, dy: i64) -> PhaseMask {
        let (nx, ny) = (self.grid.nx() as i64, self.grid.ny() as i64);
        let mut phase = vec![0.0; self.phase.len()];
        for iy in 0..ny {
            let sy = (iy - dy).rem_euclid(ny);
            for ix in 0..nx {
                let sx = (ix - dx).rem_euclid(nx);
                phase[(iy * nx + ix) as usize] = self.phase[(sy * nx + sx) as usize];
            }
        }
        PhaseMask { grid: self.grid, phase }
    }

    pub fn apply(&self, field: &ComplexField) -> Result<ComplexField> {
        self.grid.ensure_same(field.grid())?;
        let values = field
            .values()
            .iter()
            .zip(&self.phase)
            .map(|(v, &p)| v * Complex64::cis(p.rem_euclid(TAU)))
            .collect();
        Ok(ComplexField::from_raw(self.grid, values))
    }
}

pub fn apply_mask(field: &ComplexField, mask: &PhaseMask) -> Result<ComplexField> {
    mask.apply(field)
}

/// The ordered masks of an MPLC and their common plane spacing `Δz`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMaskStack {
    masks: Vec<PhaseMask>,
    plane_spacing: f64,
}

impl PhaseMaskStack {
    pub fn new(masks: Vec<PhaseMask>, plane_spacing: f64) -> Result<Self> {
        let first = masks
            .first()
            .ok_or_else(|| Error::InvalidArgument("a mask stack needs at least one plane".into()))?;
        if masks.iter().any(|m| m.grid() != first.grid()) {
            return Err(Error::GridMismatch);
        }
        if !(plane_spacing > 0.0 && plane_spacing.is_finite()) {
            return Err(Error::ParameterRange { name: "plane_spacing", value: plane_spacing });
        }
        Ok(Self { masks, plane_spacing })
    }

    pub fn zeros(grid: SamplingGrid, planes: usize, plane_spacing: f64) -> Result<Self> {
        Self::new(vec![PhaseMask::zeros(grid); planes], plane_spacing)
    }

    pub fn masks(&self) -> &[PhaseMask] {
        &self.masks
    }

    pub fn into_masks(self) -> Vec<PhaseMask> {
        self.masks
    }

    pub fn mask(&self, plane: usize) -> Result<&PhaseMask> {
        self.check_plane(plane)?;
        Ok(&self.masks[plane - 1])
    }

    pub fn planes(&self) -> usize {
        self.masks.len()
    }

    pub fn plane_spacing(&self) -> f64 {
        self.plane_spacing
    }

    pub fn grid(&self) -> &SamplingGrid {
        self.masks[0].grid()
    }

    /// Copy of the stack with plane `plane` (1-based) replaced.
    pub fn with_mask(&self, plane: usize, mask: PhaseMask) -> Result<PhaseMaskStack> {
        self.check_plane(plane)?;
        self.grid().ensure_same(mask.grid())?;
        let mut masks = self.masks.clone();
        masks[plane - 1] = mask;
        Ok(PhaseMaskStack { masks, plane_spacing: self.plane_spacing })
    }

    fn check_plane(&self, plane: usize) -> Result<()> {
        if plane == 0 || plane > self.masks.len() {
            Err(Error::PlaneIndex { index: plane, planes: self.masks.len() })
        } else {
            Ok(())
        }
    }
}

/// A mask stack bound to a wavelength, with the inter-plane propagator
/// computed once.
#[derive(Debug, Clone)]
pub struct Cascade {
    stack: PhaseMaskStack,
    factors: Vec<Vec<Complex64>>,
    hop: Propagator,
}

impl Cascade {
    pub fn new(stack: PhaseMaskStack, wavelength: f64) -> Result<Self> {
        let hop = Propagator::new(*stack.grid(), stack.plane_spacing(), wavelength)?;
        Ok(Self::with_propagator(stack, hop))
    }

    pub(crate) fn with_propagator(stack: PhaseMaskStack, hop: Propagator) -> Self {
        let factors = stack.masks().iter().map(PhaseMask::factors).collect();
        Self { stack, factors, hop }
    }

    pub fn stack(&self) -> &PhaseMaskStack {
        &self.stack
    }

    pub fn propagator(&self) -> &Propagator {
        &self.hop
    }

    /// Full cascade: for each plane, apply the mask and propagate `Δz`.
    pub fn forward(&self, field: &ComplexField) -> Result<ComplexField> {
        self.stack.grid().ensure_same(field.grid())?;
        let mut values = field.values().to_vec();
        for factors in &self.factors {
            mul_in_place(&mut values, factors);
            self.hop.apply_in_place(&mut values);
        }
        Ok(ComplexField::from_raw(*field.grid(), values))
    }

    /// Field just before (`include_mask = false`) or just after mask `plane`.
    pub fn partial(&self, field: &ComplexField, plane: usize, include_mask: bool) -> Result<ComplexField> {
        self.stack.check_plane(plane)?;
        self.stack.grid().ensure_same(field.grid())?;
        let mut values = field.values().to_vec();
        for factors in &self.factors[..plane - 1] {
            mul_in_place(&mut values, factors);
            self.hop.apply_in_place(&mut values);
        }
        if include_mask {
            mul_in_place(&mut values, &self.factors[plane - 1]);
        }
        Ok(ComplexField::from_raw(*field.grid(), values))
    }

    /// Continues from the field just after mask `plane` to the output plane.
    pub fn finish_from(&self, field_after_mask: &ComplexField, plane: usize) -> Result<ComplexField> {
        self.stack.check_plane(plane)?;
        let mut values = field_after_mask.values().to_vec();
        self.hop.apply_in_place(&mut values);
        for factors in &self.factors[plane..] {
            mul_in_place(&mut values, factors);
            self.hop.apply_in_place(&mut values);
        }
        Ok(ComplexField::from_raw(*field_after_mask.grid(), values))
    }
}

#[inline]
pub(crate) fn mul_in_place(values: &mut [Complex64], factors: &[Complex64]) {
    for (v, f) in values.iter_mut().zip(factors) {
        *v *= f;
    }
}

pub fn mplc_forward(field: &ComplexField, stack: &PhaseMaskStack, wavelength: f64) -> Result<ComplexField> {
    Cascade::new(stack.clone(), wavelength)?.forward(field)
}

pub fn mplc_forward_partial(
    field: &ComplexField,
    stack: &PhaseMaskStack,
    wavelength: f64,
    upto_plane: usize,
    include_mask: bool,
) -> Result<ComplexField> {
    Cascade::new(stack.clone(), wavelength)?.partial(field, upto_plane, include_mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const LAMBDA: f64 = 637e-9;

    fn grid() -> SamplingGrid {
        SamplingGrid::centered(64, 64, 20e-6).unwrap()
    }

    fn blob(grid: SamplingGrid, x0: f64, y0: f64, w: f64, k: f64) -> ComplexField {
        ComplexField::from_fn(grid, |x, y| {
            let r2 = (x - x0).powi(2) + (y - y0).powi(2);
            Complex64::from_polar((-r2 / (w * w)).exp(), k * x)
        })
        .unwrap()
        .normalize()
        .unwrap()
    }

    /// L2 distance; relative error for unit-norm fields.
    fn rms(a: &ComplexField, b: &ComplexField) -> f64 {
        a.add(&b.scale(Complex64::new(-1.0, 0.0))).unwrap().norm()
    }

    #[test]
    fn zero_distance_is_identity() {
        let f = blob(grid(), 0.0, 0.0, 100e-6, 0.0);
        assert_eq!(propagate(&f, 0.0, LAMBDA).unwrap(), f);
    }

    #[test]
    fn forward_then_backward_recovers_field() {
        let f = blob(grid(), 40e-6, -60e-6, 90e-6, 3000.0);
        // 0.03 m is inside the unlimited range of this 64² window.
        let p = Propagator::new(*f.grid(), 0.03, LAMBDA).unwrap();
        let back = p.inverse().propagate(&p.propagate(&f).unwrap()).unwrap();
        assert!(rms(&f, &back) < 1e-12, "{}", rms(&f, &back));
        assert!((p.propagate(&f).unwrap().total_power() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plane_wave_gains_only_global_phase() {
        let g = grid();
        let z = 0.0123;
        let f = ComplexField::from_fn(g, |_, _| Complex64::new(1.0, 0.0)).unwrap();
        let out = propagate(&f, z, LAMBDA).unwrap();
        let expected = Complex64::cis(TAU * z / LAMBDA);
        for v in out.values() {
            assert!((v - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn band_limit_only_engages_past_aliasing_distance() {
        let g = grid();
        let near = Propagator::new(g, 0.01, LAMBDA).unwrap();
        assert!(near.transfer.iter().all(|h| h.norm() > 0.5));
        let threshold = 64.0 * 20e-6 * 20e-6 / LAMBDA;
        let far = Propagator::new(g, 2.0 * threshold, LAMBDA).unwrap();
        assert!(far.transfer.iter().any(|h| h.norm() == 0.0));
        let never = Propagator::with_band_limit(g, 2.0 * threshold, LAMBDA, BandLimit::Never).unwrap();
        assert!(never.transfer.iter().all(|h| h.norm() > 0.5));
    }

    #[test]
    fn zero_and_pi_masks() {
        let f = blob(grid(), 0.0, 0.0, 100e-6, 0.0);
        let zero = PhaseMask::zeros(*f.grid());
        assert_eq!(apply_mask(&f, &zero).unwrap(), f);
        let pi = PhaseMask::constant(*f.grid(), PI).unwrap();
        let neg = apply_mask(&f, &pi).unwrap();
        for (a, b) in neg.values().iter().zip(f.values()) {
            assert!((a + b).norm() <= 1e-15 * b.norm());
        }
    }

    #[test]
    fn masks_are_two_pi_periodic() {
        let g = grid();
        let f = blob(g, 0.0, 0.0, 100e-6, 0.0);
        let m = PhaseMask::from_fn(g, |x, y| 1e3 * x + 5e4 * y * y).unwrap();
        let m2 = PhaseMask::new(g, m.phase().iter().map(|p| p + TAU).collect()).unwrap();
        let a = m.apply(&f).unwrap();
        let b = m2.apply(&f).unwrap();
        assert!(rms(&a, &b) < 1e-12);
    }

    #[test]
    fn mask_application_preserves_power() {
        let g = grid();
        let f = blob(g, 0.0, 0.0, 100e-6, 0.0);
        let m = PhaseMask::from_fn(g, |x, y| (x * 1e4).sin() * 3.0 + y * 1e3).unwrap();
        assert!((m.apply(&f).unwrap().total_power() - f.total_power()).abs() < 1e-14);
    }

    #[test]
    fn mask_grid_mismatch() {
        let f = blob(grid(), 0.0, 0.0, 100e-6, 0.0);
        let m = PhaseMask::zeros(SamplingGrid::centered(32, 32, 20e-6).unwrap());
        assert!(matches!(m.apply(&f), Err(Error::GridMismatch)));
    }

    #[test]
    fn shift_moves_values() {
        let g = SamplingGrid::centered(8, 8, 1.0).unwrap();
        let m = PhaseMask::new(g, (0..64).map(|i| i as f64).collect()).unwrap();
        let s = m.shifted(2, -3);
        assert_eq!(s.at(3, 1), m.at(1, 4));
        assert_eq!(s.shifted(-2, 3), m);
    }

    #[test]
    fn zero_stack_equals_free_propagation() {
        let g = grid();
        let f = blob(g, 20e-6, 0.0, 100e-6, 0.0);
        let dz = 0.01;
        for planes in [1, 3] {
            let stack = PhaseMaskStack::zeros(g, planes, dz).unwrap();
            let out = mplc_forward(&f, &stack, LAMBDA).unwrap();
            let direct = propagate(&f, planes as f64 * dz, LAMBDA).unwrap();
            assert!(rms(&out, &direct) < 1e-9, "{}", rms(&out, &direct));
        }
    }

    #[test]
    fn partial_cascade_composes() {
        let g = grid();
        let f = blob(g, 20e-6, 0.0, 100e-6, 0.0);
        let masks = (0..3)
            .map(|p| PhaseMask::from_fn(g, |x, y| (p as f64 + 1.0) * 2e3 * x - 1e7 * y * y).unwrap())
            .collect();
        let stack = PhaseMaskStack::new(masks, 0.02).unwrap();
        let cascade = Cascade::new(stack.clone(), LAMBDA).unwrap();

        assert_eq!(cascade.partial(&f, 1, false).unwrap(), f);
        let full = cascade.forward(&f).unwrap();
        for plane in 1..=3 {
            let after = cascade.partial(&f, plane, true).unwrap();
            let rest = cascade.finish_from(&after, plane).unwrap();
            assert!(rms(&rest, &full) < 1e-12);
        }
        let last = cascade.partial(&f, 3, true).unwrap();
        let out = propagate(&last, 0.02, LAMBDA).unwrap();
        assert!(rms(&out, &full) < 1e-12);
        assert!(matches!(cascade.partial(&f, 4, false), Err(Error::PlaneIndex { .. })));
        assert!(matches!(cascade.partial(&f, 0, false), Err(Error::PlaneIndex { .. })));

        let zeros = PhaseMaskStack::zeros(g, 3, 0.02).unwrap();
        let second = mplc_forward_partial(&f, &zeros, LAMBDA, 2, false).unwrap();
        assert!(rms(&second, &propagate(&f, 0.02, LAMBDA).unwrap()) < 1e-12);
    }

    #[test]
    fn stack_validation() {
        let g = grid();
        assert!(PhaseMaskStack::new(vec![], 0.1).is_err());
        assert!(PhaseMaskStack::zeros(g, 2, 0.0).is_err());
        let other = SamplingGrid::centered(32, 32, 20e-6).unwrap();
        assert!(matches!(
            PhaseMaskStack::new(vec![PhaseMask::zeros(g), PhaseMask::zeros(other)], 0.1),
            Err(Error::GridMismatch)
        ));
    }
}

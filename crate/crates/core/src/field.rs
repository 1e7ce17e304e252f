//! Sampled complex scalar fields on uniform Cartesian grids.
//!
//! Samples are stored row-major (x fastest). Sample `(ix, iy)` sits at
//! `origin + (ix, iy) * pitch`, and every integral is the midpoint sum
//! `value * pitch^2`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default SLM pixel pitch in meters.
pub const SLM_PITCH: f64 = 20e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingGrid {
    nx: usize,
    ny: usize,
    pitch: f64,
    origin: (f64, f64),
}

impl SamplingGrid {
    pub fn new(nx: usize, ny: usize, pitch: f64, origin: (f64, f64)) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid must be at least 2x2, got {nx}x{ny}"
            )));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::ParameterRange { name: "pitch", value: pitch });
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::InvalidArgument("grid origin must be finite".into()));
        }
        Ok(Self { nx, ny, pitch, origin })
    }

    /// Grid whose sample `(nx/2, ny/2)` lies exactly on the optical axis.
    pub fn centered(nx: usize, ny: usize, pitch: f64) -> Result<Self> {
        let origin = (-((nx / 2) as f64) * pitch, -((ny / 2) as f64) * pitch);
        Self::new(nx, ny, pitch, origin)
    }

    /// 256x256 samples at the SLM pitch (5.12 mm window).
    pub fn reference() -> Self {
        Self::centered(256, 256, SLM_PITCH).expect("reference grid is valid")
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_area(&self) -> f64 {
        self.pitch * self.pitch
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.pitch, self.ny as f64 * self.pitch)
    }

    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        self.origin.0 + ix as f64 * self.pitch
    }

    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        self.origin.1 + iy as f64 * self.pitch
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Sample index nearest to the physical point, clamped to the grid.
    pub fn nearest(&self, x: f64, y: f64) -> (usize, usize) {
        let clamp = |v: f64, n: usize| v.round().clamp(0.0, (n - 1) as f64) as usize;
        (
            clamp((x - self.origin.0) / self.pitch, self.nx),
            clamp((y - self.origin.1) / self.pitch, self.ny),
        )
    }

    pub(crate) fn ensure_same(&self, other: &SamplingGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: SamplingGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: SamplingGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument("field contains non-finite samples".into()));
        }
        Ok(Self { grid, values })
    }

    /// Construction from trusted buffers produced inside the crate.
    pub(crate) fn from_raw(grid: SamplingGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: SamplingGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn(grid: SamplingGrid, mut f: impl FnMut(f64, f64) -> Complex64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny() {
            let y = grid.y(iy);
            for ix in 0..grid.nx() {
                values.push(f(grid.x(ix), y));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[self.grid.index(ix, iy)]
    }

    /// Discretized `∫∫ conj(self) · other dx dy`.
    pub fn inner_product(&self, other: &ComplexField) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(raw_inner(&self.values, &other.values) * self.grid.cell_area())
    }

    pub fn total_power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn norm(&self) -> f64 {
        self.total_power().sqrt()
    }

    pub fn normalize(&self) -> Result<ComplexField> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateField);
        }
        Ok(self.scale(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> ComplexField {
        ComplexField::from_raw(self.grid, self.values.iter().map(|v| v * factor).collect())
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField> {
        self.grid.ensure_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(ComplexField::from_raw(self.grid, values))
    }

    /// Linear combination `Σ c_k f_k` over fields sharing one grid.
    pub fn superpose(terms: &[(Complex64, &ComplexField)]) -> Result<ComplexField> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty superposition".into()))?;
        let grid = *first.grid();
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (c, f) in terms {
            grid.ensure_same(f.grid())?;
            for (acc, v) in values.iter_mut().zip(f.values()) {
                *acc += c * v;
            }
        }
        Ok(ComplexField::from_raw(grid, values))
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// `∫ |ψ|² dx` as a function of y (one entry per row).
    pub fn profile_y(&self) -> Vec<f64> {
        let p = self.grid.pitch();
        self.values
            .chunks_exact(self.grid.nx())
            .map(|row| row.iter().map(|v| v.norm_sqr()).sum::<f64>() * p)
            .collect()
    }

    /// `∫ |ψ|² dy` as a function of x (one entry per column).
    pub fn profile_x(&self) -> Vec<f64> {
        let p = self.grid.pitch();
        let mut out = vec![0.0; self.grid.nx()];
        for row in self.values.chunks_exact(self.grid.nx()) {
            for (acc, v) in out.iter_mut().zip(row) {
                *acc += v.norm_sqr();
            }
        }
        out.iter_mut().for_each(|v| *v *= p);
        out
    }

    /// Power inside the disc of radius `radius` around `center`.
    pub fn power_in_disc(&self, center: (f64, f64), radius: f64) -> f64 {
        let g = &self.grid;
        let r2 = radius * radius;
        let mut acc = 0.0;
        for iy in 0..g.ny() {
            let dy = g.y(iy) - center.1;
            for ix in 0..g.nx() {
                let dx = g.x(ix) - center.0;
                if dx * dx + dy * dy <= r2 {
                    acc += self.values[g.index(ix, iy)].norm_sqr();
                }
            }
        }
        acc * g.cell_area()
    }
}

#[inline]
pub(crate) fn raw_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn inner_product(a: &ComplexField, b: &ComplexField) -> Result<Complex64> {
    a.inner_product(b)
}

pub fn normalize(f: &ComplexField) -> Result<ComplexField> {
    f.normalize()
}

pub fn total_power(f: &ComplexField) -> f64 {
    f.total_power()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SamplingGrid {
        SamplingGrid::centered(64, 64, 20e-6).unwrap()
    }

    fn gaussian(grid: SamplingGrid, y0: f64, w: f64) -> ComplexField {
        ComplexField::from_fn(grid, |x, y| {
            Complex64::new((-(x * x + (y - y0) * (y - y0)) / (w * w)).exp(), 0.0)
        })
        .unwrap()
        .normalize()
        .unwrap()
    }

    #[test]
    fn grid_rejects_degenerate_sizes() {
        assert!(SamplingGrid::new(1, 4, 1e-6, (0.0, 0.0)).is_err());
        assert!(SamplingGrid::new(4, 4, 0.0, (0.0, 0.0)).is_err());
        assert!(SamplingGrid::new(4, 4, -1.0, (0.0, 0.0)).is_err());
    }

    #[test]
    fn sample_coordinates_follow_origin_and_pitch() {
        let g = SamplingGrid::new(4, 3, 0.5, (1.0, -2.0)).unwrap();
        assert_eq!(g.x(3), 1.0 + 3.0 * 0.5);
        assert_eq!(g.y(2), -2.0 + 2.0 * 0.5);
        assert_eq!(g.extent(), (2.0, 1.5));
        let c = SamplingGrid::centered(256, 256, 20e-6).unwrap();
        assert_eq!(c.x(128), 0.0);
        assert_eq!(c.y(128), 0.0);
    }

    #[test]
    fn normalized_field_has_unit_self_overlap() {
        let f = gaussian(grid(), 0.0, 100e-6);
        let ip = f.inner_product(&f).unwrap();
        assert!((ip.re - 1.0).abs() < 1e-12 && ip.im.abs() < 1e-15);
    }

    #[test]
    fn zero_field_overlap_and_power() {
        let f = gaussian(grid(), 0.0, 100e-6);
        let z = ComplexField::zeros(grid());
        assert_eq!(f.inner_product(&z).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(z.total_power(), 0.0);
        assert!(matches!(z.normalize(), Err(Error::DegenerateField)));
    }

    #[test]
    fn displaced_gaussians_overlap_decays() {
        // Unit-norm Gaussians e^{-r²/w²} displaced by d overlap as e^{-d²/(2w²)}.
        let g = SamplingGrid::centered(128, 128, 10e-6).unwrap();
        let w = 120e-6;
        let d = 150e-6;
        let a = gaussian(g, -d / 2.0, w);
        let b = gaussian(g, d / 2.0, w);
        let ip = a.inner_product(&b).unwrap();
        let expected = (-d * d / (2.0 * w * w)).exp();
        assert!((ip.re - expected).abs() < 1e-9, "{ip} vs {expected}");
        assert!(ip.im.abs() < 1e-15);
    }

    #[test]
    fn normalize_scales_by_inverse_norm() {
        let f = gaussian(grid(), 0.0, 100e-6).scale(Complex64::new(2.0, 0.0));
        assert!((f.norm() - 2.0).abs() < 1e-12);
        let n = f.normalize().unwrap();
        for (a, b) in n.values().iter().zip(f.values()) {
            assert!((a - b * 0.5).norm() <= 1e-14 * a.norm());
        }
        let again = n.normalize().unwrap();
        for (a, b) in again.values().iter().zip(n.values()) {
            assert!((a - b).norm() <= 1e-14 * b.norm());
        }
    }

    #[test]
    fn disjoint_unit_fields_add_in_power() {
        let g = grid();
        let left = ComplexField::from_fn(g, |x, _| {
            Complex64::new(if x < 0.0 { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap()
        .normalize()
        .unwrap();
        let right = ComplexField::from_fn(g, |x, _| {
            Complex64::new(0.0, if x >= 0.0 { 1.0 } else { 0.0 })
        })
        .unwrap()
        .normalize()
        .unwrap();
        assert!((left.add(&right).unwrap().total_power() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = ComplexField::zeros(grid());
        let b = ComplexField::zeros(SamplingGrid::centered(64, 64, 10e-6).unwrap());
        assert!(matches!(a.inner_product(&b), Err(Error::GridMismatch)));
    }

    #[test]
    fn non_finite_samples_are_rejected() {
        let g = SamplingGrid::centered(2, 2, 1.0).unwrap();
        let v = vec![Complex64::new(f64::NAN, 0.0); 4];
        assert!(ComplexField::new(g, v).is_err());
    }

    #[test]
    fn profiles_integrate_to_total_power() {
        let f = gaussian(grid(), 50e-6, 80e-6);
        let p = f.grid().pitch();
        let sy: f64 = f.profile_y().iter().sum::<f64>() * p;
        let sx: f64 = f.profile_x().iter().sum::<f64>() * p;
        assert!((sy - 1.0).abs() < 1e-12);
        assert!((sx - 1.0).abs() < 1e-12);
    }
}

//! Gaussian beam arrays: input beams, output bases and target states.
//!
//! Beams are evaluated analytically at the requested plane through the
//! complex beam parameter `q = z - i·z₀`, so
//! `ψ ∝ exp(i·k·r² / (2q)) / q` with `z` the distance past the waist.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, SamplingGrid};
use crate::matrix::TransferMatrix;

pub const REFERENCE_WAVELENGTH: f64 = 637e-9;

/// Rayleigh range `π·ω₀²/λ`.
pub fn rayleigh_range(waist: f64, wavelength: f64) -> f64 {
    PI * waist * waist / wavelength
}

/// `1/e²` intensity half-width at distance `z` from the waist.
pub fn beam_size(waist: f64, z: f64, wavelength: f64) -> f64 {
    let z0 = rayleigh_range(waist, wavelength);
    waist * (1.0 + (z / z0).powi(2)).sqrt()
}

/// A generated beam together with its window check.
#[derive(Debug, Clone)]
pub struct BeamField {
    pub field: ComplexField,
    /// Set when `1.5·ω(z)` reaches past the nearest window edge.
    pub window_clip: bool,
}

/// Unit-norm Gaussian on `grid`, centered at `center`, for a waist placed
/// at `waist_offset_z` relative to the grid plane (negative: the waist
/// lies before it). `tilt_gradient` adds `exp(i·g·y)`.
pub fn gaussian_beam(
    grid: SamplingGrid,
    center: (f64, f64),
    waist: f64,
    waist_offset_z: f64,
    tilt_gradient: f64,
    wavelength: f64,
) -> Result<BeamField> {
    if !(waist > 0.0 && waist.is_finite()) {
        return Err(Error::ParameterRange { name: "waist", value: waist });
    }
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(Error::ParameterRange { name: "wavelength", value: wavelength });
    }
    let z = -waist_offset_z;
    let z0 = rayleigh_range(waist, wavelength);
    let k = 2.0 * PI / wavelength;
    let q = Complex64::new(z, -z0);
    let curvature = Complex64::new(0.0, k) / (q * 2.0);
    let amplitude = q.inv();

    let field = ComplexField::from_fn(grid, |x, y| {
        let r2 = (x - center.0).powi(2) + (y - center.1).powi(2);
        amplitude * (curvature * r2).exp() * Complex64::cis(tilt_gradient * y)
    })?
    .normalize()?;

    let size = beam_size(waist, z, wavelength);
    let (ox, oy) = grid.origin();
    let (ex, ey) = grid.extent();
    let margin = [
        center.0 - ox,
        ox + ex - center.0,
        center.1 - oy,
        oy + ey - center.1,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    Ok(BeamField { field, window_clip: 1.5 * size > margin })
}

/// Parameters of a linear array of `count` Gaussian beams spaced along y.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamArraySpec {
    pub count: usize,
    pub waist: f64,
    /// Waist position relative to the plane the beams are evaluated at.
    pub waist_offset_z: f64,
    pub spacing: f64,
    /// Center of beam 1; beam `m` sits at `axis_origin + (m-1)·spacing·ŷ`.
    pub axis_origin: (f64, f64),
    /// Linear phase gradient along y, radians per meter.
    pub tilt_gradient: f64,
    /// 1-based index of the beam carrying the tilt, if any.
    pub tilt_beam: Option<usize>,
    pub wavelength: f64,
}

impl BeamArraySpec {
    /// Array whose beam centers are symmetric about the optical axis.
    pub fn centered(count: usize, waist: f64, spacing: f64, wavelength: f64) -> Self {
        let half = (count.max(1) - 1) as f64 * spacing / 2.0;
        Self {
            count,
            waist,
            waist_offset_z: 0.0,
            spacing,
            axis_origin: (0.0, -half),
            tilt_gradient: 0.0,
            tilt_beam: None,
            wavelength,
        }
    }

    /// The experimental two-beam input: 161.5 µm waists 2.08 cm before the
    /// first plane, 704 µm apart, beam 2 tilted by π/18 per 20 µm pixel.
    pub fn reference_input() -> Self {
        Self {
            waist_offset_z: -0.0208,
            tilt_gradient: PI / (18.0 * 20e-6),
            tilt_beam: Some(2),
            ..Self::centered(2, 161.5e-6, 704e-6, REFERENCE_WAVELENGTH)
        }
    }

    /// The reference output basis: the input array demagnified four times,
    /// waists on the output plane, co-centered, untilted.
    pub fn reference_output() -> Self {
        Self::reference_input().demagnified(4.0)
    }

    /// Waist and spacing divided by `factor` about the same array center;
    /// waists on the evaluation plane and no tilt.
    pub fn demagnified(&self, factor: f64) -> Self {
        let center = self.array_center();
        let spacing = self.spacing / factor;
        let half = (self.count.max(1) - 1) as f64 * spacing / 2.0;
        Self {
            count: self.count,
            waist: self.waist / factor,
            waist_offset_z: 0.0,
            spacing,
            axis_origin: (center.0, center.1 - half),
            tilt_gradient: 0.0,
            tilt_beam: None,
            wavelength: self.wavelength,
        }
    }

    pub fn center(&self, m: usize) -> (f64, f64) {
        (self.axis_origin.0, self.axis_origin.1 + (m as f64 - 1.0) * self.spacing)
    }

    pub fn array_center(&self) -> (f64, f64) {
        let half = (self.count.max(1) - 1) as f64 * self.spacing / 2.0;
        (self.axis_origin.0, self.axis_origin.1 + half)
    }

    /// Beam size on the evaluation plane.
    pub fn size_on_plane(&self) -> f64 {
        beam_size(self.waist, -self.waist_offset_z, self.wavelength)
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("beam array needs at least one beam".into()));
        }
        if !(self.waist > 0.0) {
            return Err(Error::ParameterRange { name: "waist", value: self.waist });
        }
        if !(self.spacing > 0.0) {
            return Err(Error::ParameterRange { name: "spacing", value: self.spacing });
        }
        if let Some(t) = self.tilt_beam {
            if t == 0 || t > self.count {
                return Err(Error::InvalidArgument(format!(
                    "tilt beam index {t} outside 1..={}",
                    self.count
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BeamArray {
    pub beams: Vec<ComplexField>,
    pub window_clip: bool,
}

pub fn make_beam_array(spec: &BeamArraySpec, grid: SamplingGrid) -> Result<BeamArray> {
    spec.validate()?;
    let mut beams = Vec::with_capacity(spec.count);
    let mut window_clip = false;
    for m in 1..=spec.count {
        let tilt = if spec.tilt_beam == Some(m) { spec.tilt_gradient } else { 0.0 };
        let b = gaussian_beam(grid, spec.center(m), spec.waist, spec.waist_offset_z, tilt, spec.wavelength)?;
        window_clip |= b.window_clip;
        beams.push(b.field);
    }
    Ok(BeamArray { beams, window_clip })
}

/// State `m` is `Σ_{m'} U[m'][m] · basis_{m'}`, normalized.
pub fn superpose_basis(basis: &[ComplexField], u: &TransferMatrix) -> Result<Vec<ComplexField>> {
    if u.dim() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), found: u.dim() });
    }
    (0..u.dim())
        .map(|m| {
            let terms: Vec<_> = basis.iter().enumerate().map(|(mp, b)| (u.get(mp, m), b)).collect();
            ComplexField::superpose(&terms)?.normalize()
        })
        .collect()
}

/// Target output states `U_t|m⟩` expressed on the output basis built from
/// `output_spec` on `grid`.
pub fn target_states(
    grid: SamplingGrid,
    u: &TransferMatrix,
    output_spec: &BeamArraySpec,
) -> Result<Vec<ComplexField>> {
    if u.dim() != output_spec.count {
        return Err(Error::DimensionMismatch { expected: output_spec.count, found: u.dim() });
    }
    let basis = make_beam_array(output_spec, grid)?;
    superpose_basis(&basis.beams, u)
}

/// Entry `(i, j)` is `⟨a_i | b_j⟩`.
pub fn overlap_matrix(states_a: &[ComplexField], states_b: &[ComplexField]) -> Result<TransferMatrix> {
    if states_a.len() != states_b.len() {
        return Err(Error::DimensionMismatch { expected: states_a.len(), found: states_b.len() });
    }
    let n = states_a.len();
    let mut out = TransferMatrix::zeros(n);
    for (i, a) in states_a.iter().enumerate() {
        for (j, b) in states_b.iter().enumerate() {
            out.set(i, j, a.inner_product(b)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_sits_on_center_sample() {
        let g = SamplingGrid::reference();
        let b = gaussian_beam(g, (0.0, 0.0), 100e-6, 0.0, 0.0, REFERENCE_WAVELENGTH).unwrap();
        let (imax, _) = b
            .field
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert_eq!(imax, g.index(128, 128));
        assert!(!b.window_clip);
        assert!((b.field.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tilt_phase_step_per_pixel() {
        let g = SamplingGrid::reference();
        let gradient = PI / (18.0 * 20e-6);
        let b = gaussian_beam(g, (0.0, 0.0), 161.5e-6, 0.0, gradient, REFERENCE_WAVELENGTH).unwrap();
        let a0 = b.field.at(128, 130);
        let a1 = b.field.at(128, 131);
        let step = (a1 * a0.conj()).arg();
        assert!((step - PI / 18.0).abs() < 1e-12, "{step}");
    }

    #[test]
    fn size_after_waist_offset() {
        let z0 = rayleigh_range(161.5e-6, REFERENCE_WAVELENGTH);
        assert!((z0 - 0.1286).abs() < 5e-4);
        let spec = BeamArraySpec::reference_input();
        let expected = 161.5e-6 * (1.0 + (0.0208 / z0).powi(2)).sqrt();
        assert!((spec.size_on_plane() - expected).abs() < 1e-15);
    }

    #[test]
    fn reference_output_is_quarter_scale() {
        let out = BeamArraySpec::reference_output();
        assert!((out.waist - 40.375e-6).abs() < 1e-15);
        assert!((out.spacing - 176e-6).abs() < 1e-15);
        assert_eq!(out.array_center(), BeamArraySpec::reference_input().array_center());
        assert_eq!(out.tilt_beam, None);
    }

    #[test]
    fn window_clip_flag() {
        let g = SamplingGrid::centered(64, 64, 20e-6).unwrap();
        let b = gaussian_beam(g, (0.0, 0.0), 500e-6, 0.0, 0.0, REFERENCE_WAVELENGTH).unwrap();
        assert!(b.window_clip);
    }

    #[test]
    fn invalid_specs() {
        let g = SamplingGrid::reference();
        assert!(gaussian_beam(g, (0.0, 0.0), 0.0, 0.0, 0.0, REFERENCE_WAVELENGTH).is_err());
        let mut spec = BeamArraySpec::reference_input();
        spec.tilt_beam = Some(3);
        assert!(make_beam_array(&spec, g).is_err());
        spec.tilt_beam = None;
        spec.count = 0;
        assert!(make_beam_array(&spec, g).is_err());
    }

    #[test]
    fn single_beam_array() {
        let g = SamplingGrid::reference();
        let spec = BeamArraySpec::centered(1, 150e-6, 500e-6, REFERENCE_WAVELENGTH);
        let arr = make_beam_array(&spec, g).unwrap();
        assert_eq!(arr.beams.len(), 1);
        assert!((arr.beams[0].norm() - 1.0).abs() < 1e-12);
        assert_eq!(spec.center(1), (0.0, 0.0));
    }

    #[test]
    fn identity_targets_are_the_basis() {
        let g = SamplingGrid::reference();
        let out = BeamArraySpec::reference_output();
        let basis = make_beam_array(&out, g).unwrap().beams;
        let targets = target_states(g, &TransferMatrix::identity(2), &out).unwrap();
        for (t, b) in targets.iter().zip(&basis) {
            assert!(t.values().iter().zip(b.values()).all(|(x, y)| (x - y).norm() <= 1e-15 * y.norm()));
        }
        assert!(target_states(g, &TransferMatrix::identity(3), &out).is_err());
    }

    #[test]
    fn empty_overlap_matrix() {
        assert_eq!(overlap_matrix(&[], &[]).unwrap().dim(), 0);
    }
}

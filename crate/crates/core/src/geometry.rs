//! Reflection budget of a single-SLM folded cascade: the beam bounces
//! between the SLM and a mirror `L` away, stepping `2L·tan τ` across the
//! SLM per round trip while it diffracts.

use crate::beams::rayleigh_range;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MplcGeometry {
    /// SLM-to-mirror distance `L`.
    pub mirror_distance: f64,
    /// Insertion angle `τ`, radians.
    pub insertion_angle: f64,
    pub slm_width: f64,
    pub slm_height: f64,
    pub pixel_pitch: f64,
    pub wavelength: f64,
    pub planes: usize,
    /// Extra pixels required between neighbouring spots.
    pub guard_pixels: u32,
}

impl Default for MplcGeometry {
    /// The 792×600-pixel SLM at 637 nm, five planes 10 cm apart.
    fn default() -> Self {
        Self {
            mirror_distance: 0.05,
            insertion_angle: 1f64.to_radians(),
            slm_width: 15.8e-3,
            slm_height: 12e-3,
            pixel_pitch: 20e-6,
            wavelength: 637e-9,
            planes: 5,
            guard_pixels: 3,
        }
    }
}

impl MplcGeometry {
    pub fn plane_spacing(&self) -> f64 {
        2.0 * self.mirror_distance
    }

    /// Lateral distance between consecutive reflections.
    pub fn step(&self) -> f64 {
        2.0 * self.mirror_distance * self.insertion_angle.tan()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mirror_distance > 0.0) {
            return Err(Error::ParameterRange { name: "mirror_distance", value: self.mirror_distance });
        }
        if !(self.insertion_angle > 0.0 && self.insertion_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::ParameterRange { name: "insertion_angle", value: self.insertion_angle });
        }
        for (name, value) in [
            ("slm_width", self.slm_width),
            ("slm_height", self.slm_height),
            ("pixel_pitch", self.pixel_pitch),
            ("wavelength", self.wavelength),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::ParameterRange { name, value });
            }
        }
        if self.planes == 0 {
            return Err(Error::InvalidArgument("at least one plane is required".into()));
        }
        Ok(())
    }
}

/// Beam size at reflection `p` (0 for the first) for a waist on the first
/// reflection: `ω₀·√(1 + (2Lp·sec τ / z₀)²)`.
pub fn beam_size_at_plane(waist: f64, mirror_distance: f64, tau: f64, wavelength: f64, p: usize) -> f64 {
    let z0 = rayleigh_range(waist, wavelength);
    let z = 2.0 * mirror_distance * p as f64 / tau.cos();
    waist * (1.0 + (z / z0).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectionCount {
    /// This many reflections fit the SLM without overlapping.
    Fits(usize),
    /// Spot `plane` (1-based) overlaps the one before it.
    Overlap { plane: usize },
}

impl ReflectionCount {
    /// Count as a signed integer, negative for an overlap at plane `|k|`.
    pub fn as_signed(&self) -> i64 {
        match *self {
            ReflectionCount::Fits(n) => n as i64,
            ReflectionCount::Overlap { plane } => -(plane as i64),
        }
    }

    pub fn fits(&self) -> Option<usize> {
        match *self {
            ReflectionCount::Fits(n) => Some(n),
            ReflectionCount::Overlap { .. } => None,
        }
    }
}

/// Walks the reflections across the SLM width. The first spot sits `1.5·ω₀`
/// from the edge; every spot must keep its `1.5·ω` circle on the chip and
/// be at least `1.5·ω_prev + 1.5·ω + guard` from the previous one.
pub fn count_reflections(geometry: &MplcGeometry, waist: f64) -> ReflectionCount {
    let size = |p| beam_size_at_plane(waist, geometry.mirror_distance, geometry.insertion_angle, geometry.wavelength, p);
    let guard = geometry.guard_pixels as f64 * geometry.pixel_pitch;
    let step = geometry.step();
    let fits = |p: usize, position: f64| {
        let r = 1.5 * size(p);
        position + r <= geometry.slm_width && 2.0 * r <= geometry.slm_height
    };

    let start = 1.5 * waist;
    if !fits(0, start) {
        return ReflectionCount::Fits(0);
    }
    let mut p = 1;
    loop {
        let position = start + p as f64 * step;
        if !fits(p, position) {
            return ReflectionCount::Fits(p);
        }
        if step < 1.5 * (size(p - 1) + size(p)) + guard {
            return ReflectionCount::Overlap { plane: p + 1 };
        }
        p += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanesAtDistance {
    pub mirror_distance: f64,
    /// Best count found, zero if nothing fits.
    pub reflections: usize,
    /// Parameters achieving it (the first found in scan order).
    pub waist: f64,
    pub insertion_angle: f64,
}

/// For each `L`, the largest reflection count over all `(ω₀, τ)` pairs.
pub fn max_planes_vs_distance(
    template: &MplcGeometry,
    distances: &[f64],
    waists: &[f64],
    angles: &[f64],
) -> Result<Vec<PlanesAtDistance>> {
    if distances.is_empty() || waists.is_empty() || angles.is_empty() {
        return Err(Error::InvalidArgument("empty search range".into()));
    }
    distances
        .iter()
        .map(|&l| {
            let mut best = PlanesAtDistance { mirror_distance: l, reflections: 0, waist: waists[0], insertion_angle: angles[0] };
            for &tau in angles {
                let g = MplcGeometry { mirror_distance: l, insertion_angle: tau, ..*template };
                g.validate()?;
                for &w in waists {
                    if let Some(n) = count_reflections(&g, w).fits() {
                        if n > best.reflections {
                            best = PlanesAtDistance { mirror_distance: l, reflections: n, waist: w, insertion_angle: tau };
                        }
                    }
                }
            }
            Ok(best)
        })
        .collect()
}

/// `n` evenly spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|i| start + (end - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Smallest angle in `angles` (assumed ascending) giving at least two
/// reflections for some waist, if any.
pub fn min_angle_for_two_reflections(template: &MplcGeometry, waists: &[f64], angles: &[f64]) -> Option<f64> {
    angles.iter().copied().find(|&tau| {
        let g = MplcGeometry { insertion_angle: tau, ..*template };
        waists.iter().any(|&w| count_reflections(&g, w).fits().is_some_and(|n| n >= 2))
    })
}

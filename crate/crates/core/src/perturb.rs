//! Mask distortions: smooth synthetic phase patterns added to every plane
//! of a stack, and the resulting fidelity loss.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::design::DesignSetup;
use crate::error::{Error, Result};
use crate::fft::{frequency, Fft2};
use crate::field::SamplingGrid;
use crate::propagation::{PhaseMask, PhaseMaskStack};
use crate::unitary::UnitaryTarget;

/// Mean phase gradient of the reference distortion, radians per pixel.
pub const REFERENCE_GRADIENT: f64 = 0.058;

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    /// One pattern per plane, or a single pattern shared by all planes.
    pub patterns: Vec<PhaseMask>,
    pub alpha: f64,
    pub seed: Option<u64>,
}

impl PerturbationSpec {
    fn pattern(&self, plane: usize) -> &PhaseMask {
        if self.patterns.len() == 1 {
            &self.patterns[0]
        } else {
            &self.patterns[plane]
        }
    }
}

/// `(Φ_p + α·Φ_pert,p) mod 2π` on every plane.
pub fn perturb_stack(stack: &PhaseMaskStack, spec: &PerturbationSpec) -> Result<PhaseMaskStack> {
    let n = spec.patterns.len();
    if n != 1 && n != stack.planes() {
        return Err(Error::DimensionMismatch { expected: stack.planes(), found: n });
    }
    let masks = stack
        .masks()
        .iter()
        .enumerate()
        .map(|(p, mask)| {
            let pattern = spec.pattern(p);
            mask.grid().ensure_same(pattern.grid())?;
            let phase = mask
                .phase()
                .iter()
                .zip(pattern.phase())
                .map(|(a, b)| (a + spec.alpha * b).rem_euclid(TAU))
                .collect();
            PhaseMask::new(*mask.grid(), phase)
        })
        .collect::<Result<Vec<_>>>()?;
    PhaseMaskStack::new(masks, stack.plane_spacing())
}

fn region_gradient(mask: &PhaseMask) -> f64 {
    let g = mask.grid();
    let (nx, ny) = (g.nx(), g.ny());
    if nx < 2 || ny < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let v = mask.at(ix, iy);
            sum += (mask.at(ix + 1, iy) - v).hypot(mask.at(ix, iy + 1) - v);
        }
    }
    sum / ((nx - 1) * (ny - 1)) as f64
}

/// Mean over `regions` of the mean forward-difference gradient magnitude,
/// radians per pixel.
pub fn mean_phase_gradient(regions: &[PhaseMask]) -> Result<f64> {
    if regions.is_empty() {
        return Err(Error::InvalidArgument("no regions given".into()));
    }
    Ok(regions.iter().map(region_gradient).sum::<f64>() / regions.len() as f64)
}

/// Gaussian-filtered white noise with correlation length
/// `correlation_length` pixels, scaled to a mean gradient of
/// `target_gradient` rad/pixel. Periodic across the window.
pub fn synth_perturbation(
    grid: SamplingGrid,
    target_gradient: f64,
    correlation_length: f64,
    seed: u64,
) -> Result<PhaseMask> {
    if !(target_gradient > 0.0 && target_gradient.is_finite()) {
        return Err(Error::ParameterRange { name: "target_gradient", value: target_gradient });
    }
    if !(correlation_length > 0.0) {
        return Err(Error::ParameterRange { name: "correlation_length", value: correlation_length });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<Complex64> = (0..grid.len())
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    let fft = Fft2::new(grid.nx(), grid.ny());
    fft.forward(&mut values);
    // Frequencies in cycles per pixel; Gaussian kernel of std ℓ pixels.
    let s = 2.0 * PI * PI * correlation_length * correlation_length;
    for iy in 0..grid.ny() {
        let fy = frequency(iy, grid.ny(), 1.0);
        for ix in 0..grid.nx() {
            let fx = frequency(ix, grid.nx(), 1.0);
            values[iy * grid.nx() + ix] *= (-s * (fx * fx + fy * fy)).exp();
        }
    }
    fft.inverse(&mut values);
    let raw = PhaseMask::new(grid, values.iter().map(|v| v.re).collect())?;
    let gradient = region_gradient(&raw);
    if !(gradient > 1e-12) {
        return Err(Error::Infeasible(format!(
            "correlation length {correlation_length} px leaves no variation on a {}x{} window",
            grid.nx(),
            grid.ny()
        )));
    }
    let scale = target_gradient / gradient;
    PhaseMask::new(grid, raw.phase().iter().map(|v| v * scale).collect())
}

/// Independent patterns for `planes` planes, plane `p` seeded `seed + p`.
pub fn synth_stack_perturbation(
    grid: SamplingGrid,
    planes: usize,
    target_gradient: f64,
    correlation_length: f64,
    seed: u64,
) -> Result<Vec<PhaseMask>> {
    (0..planes as u64)
        .map(|p| synth_perturbation(grid, target_gradient, correlation_length, seed.wrapping_add(p)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaRow {
    pub alpha: f64,
    pub fidelity: f64,
}

/// Gate fidelity of `stack` perturbed by `α·patterns`, for each `α`.
pub fn fidelity_vs_alpha(
    setup: &DesignSetup,
    stack: &PhaseMaskStack,
    target: &UnitaryTarget,
    patterns: &[PhaseMask],
    alphas: &[f64],
) -> Result<Vec<AlphaRow>> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("no alpha values given".into()));
    }
    alphas
        .par_iter()
        .map(|&alpha| {
            let fidelity = if alpha == 0.0 {
                setup.evaluate(stack, target, None)?
            } else {
                let spec = PerturbationSpec { patterns: patterns.to_vec(), alpha, seed: None };
                setup.evaluate(&perturb_stack(stack, &spec)?, target, None)?
            };
            Ok(AlphaRow { alpha, fidelity })
        })
        .collect()
}

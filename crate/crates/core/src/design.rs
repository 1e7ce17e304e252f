//! A complete design setup (grid, cascade, beams, optimizer) and the
//! operations built on it: single designs, evaluation with an optional
//! output-plane correction, and geometric parameter sweeps.

use rayon::prelude::*;

use crate::beams::{make_beam_array, superpose_basis, BeamArraySpec};
use crate::error::{Error, Result};
use crate::field::{ComplexField, SamplingGrid};
use crate::propagation::{Cascade, PhaseMask, PhaseMaskStack};
use crate::unitary::{correcting_phase_mask, gate_fidelity_fields, UnitaryTarget};
use crate::wfm::{wavefront_match, CascadeGeometry, OptimizationResult, OptimizerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSetup {
    pub grid: SamplingGrid,
    pub planes: usize,
    pub plane_spacing: f64,
    pub input: BeamArraySpec,
    pub output: BeamArraySpec,
    pub optimizer: OptimizerConfig,
}

impl DesignSetup {
    /// 256² window at 20 µm, five planes 10 cm apart, the reference beams
    /// and 100 iterations.
    pub fn reference() -> Self {
        Self {
            grid: SamplingGrid::reference(),
            planes: 5,
            plane_spacing: 0.1,
            input: BeamArraySpec::reference_input(),
            output: BeamArraySpec::reference_output(),
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn wavelength(&self) -> f64 {
        self.input.wavelength
    }

    pub fn geometry(&self) -> CascadeGeometry {
        CascadeGeometry {
            planes: self.planes,
            plane_spacing: self.plane_spacing,
            wavelength: self.wavelength(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.planes == 0 {
            return Err(Error::InvalidArgument("at least one plane is required".into()));
        }
        if !(self.plane_spacing > 0.0 && self.plane_spacing.is_finite()) {
            return Err(Error::ParameterRange { name: "plane_spacing", value: self.plane_spacing });
        }
        if self.input.count != self.output.count {
            return Err(Error::DimensionMismatch { expected: self.input.count, found: self.output.count });
        }
        if self.input.wavelength != self.output.wavelength {
            return Err(Error::InvalidArgument("input and output wavelengths differ".into()));
        }
        Ok(())
    }

    pub fn inputs(&self) -> Result<Vec<ComplexField>> {
        Ok(make_beam_array(&self.input, self.grid)?.beams)
    }

    pub fn output_basis(&self) -> Result<Vec<ComplexField>> {
        Ok(make_beam_array(&self.output, self.grid)?.beams)
    }

    pub fn targets(&self, target: &UnitaryTarget) -> Result<Vec<ComplexField>> {
        superpose_basis(&self.output_basis()?, &target.matrix)
    }

    /// Boundary between the two output beams used by the correcting mask.
    pub fn output_split_y(&self) -> f64 {
        self.output.array_center().1
    }

    /// Correcting mask that turns a `φ = π/2` design into one for `phi`.
    pub fn correction_mask(&self, phi: f64) -> Result<PhaseMask> {
        correcting_phase_mask(phi, self.grid, self.output_split_y())
    }

    pub fn design(&self, target: &UnitaryTarget) -> Result<OptimizationResult> {
        self.validate()?;
        let inputs = self.inputs()?;
        let targets = self.targets(target)?;
        wavefront_match(&inputs, &targets, &self.geometry(), &self.optimizer)
    }

    /// Output fields of `stack` for every input, with `correction` applied
    /// on the output plane when given.
    pub fn outputs(&self, stack: &PhaseMaskStack, correction: Option<&PhaseMask>) -> Result<Vec<ComplexField>> {
        let cascade = Cascade::new(stack.clone(), self.wavelength())?;
        self.inputs()?
            .iter()
            .map(|f| {
                let out = cascade.forward(f)?;
                match correction {
                    Some(mask) => mask.apply(&out),
                    None => Ok(out),
                }
            })
            .collect()
    }

    /// Gate fidelity of `stack` against `target`.
    pub fn evaluate(
        &self,
        stack: &PhaseMaskStack,
        target: &UnitaryTarget,
        correction: Option<&PhaseMask>,
    ) -> Result<f64> {
        gate_fidelity_fields(&self.targets(target)?, &self.outputs(stack, correction)?)
    }
}

/// One geometric configuration of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub plane_spacing: f64,
    pub waist: f64,
    pub beam_spacing: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: SweepPoint,
    /// NaN when the point failed.
    pub fidelity: f64,
    pub error: Option<String>,
}

impl DesignSetup {
    /// Same setup with the input array resized to `point` and the output
    /// array derived by the same demagnification as before.
    pub fn at_point(&self, point: &SweepPoint) -> DesignSetup {
        let factor = self.input.waist / self.output.waist;
        let half = (self.input.count.max(1) - 1) as f64 * point.beam_spacing / 2.0;
        let center = self.input.array_center();
        let input = BeamArraySpec {
            waist: point.waist,
            spacing: point.beam_spacing,
            axis_origin: (center.0, center.1 - half),
            ..self.input.clone()
        };
        let mut output = input.demagnified(factor);
        let (cx, cy) = self.output.array_center();
        output.axis_origin = (cx, cy - (output.count.max(1) - 1) as f64 * output.spacing / 2.0);
        DesignSetup { plane_spacing: point.plane_spacing, input, output, ..self.clone() }
    }
}

/// Runs one design per point, in parallel, returning rows in input order.
/// Failing points become NaN rows carrying the error message.
pub fn parameter_sweep(base: &DesignSetup, target: &UnitaryTarget, points: &[SweepPoint]) -> Result<Vec<SweepRow>> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty parameter grid".into()));
    }
    Ok(points
        .par_iter()
        .map(|point| match base.at_point(point).design(target) {
            Ok(r) => SweepRow { point: *point, fidelity: r.final_fidelity, error: None },
            Err(e) => SweepRow { point: *point, fidelity: f64::NAN, error: Some(e.to_string()) },
        })
        .collect())
}

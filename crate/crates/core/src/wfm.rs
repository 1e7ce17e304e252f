//! Wavefront-matching inverse design of a phase-mask stack.
//!
//! Each plane update takes the input fields propagated to just before the
//! plane (`F_m`, with the plane's own mask left out) and the targets
//! propagated backwards to just after it (`B_m`), and sets
//!
//! ```text
//! Φ = -arg( Σ_m F_m · conj(B_m) · exp(-i·γ_m) )
//! ```
//!
//! where `γ_m` is the phase of mode `m`'s current overlap. One iteration
//! updates every plane once; the order is configurable.

use std::f64::consts::TAU;
use std::time::Instant;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{raw_inner, ComplexField, SamplingGrid};
use crate::propagation::{mul_in_place, PhaseMask, PhaseMaskStack, Propagator};

/// How the per-mode phase reference `γ_m` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseReference {
    /// `γ_m = arg⟨B_m | e^{iΦ} F_m⟩`, the phase of the mode overlap.
    #[default]
    Overlap,
    /// `γ_m = ∫∫ arg(e^{iΦ} F_m · conj(B_m)) dx dy`, taken literally in SI
    /// units (so it is tiny on millimeter windows).
    PlainIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskUpdate {
    /// Recompute the mask from fields with the old mask excluded.
    #[default]
    Replace,
    /// Add a correction computed with the old mask included. Acts the same
    /// modulo 2π but keeps an accumulated, unwrapped phase.
    Incremental,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlaneOrder {
    /// Planes 1 → P every iteration.
    #[default]
    Forward,
    /// Planes P → 1 every iteration.
    Backward,
    /// Forward on odd iterations, backward on even ones.
    Alternating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub iterations: usize,
    pub plane_order: PlaneOrder,
    /// Stop as soon as the fidelity reaches this value.
    pub stop_fidelity: Option<f64>,
    /// Whether reports should list the per-iteration fidelities.
    pub record_history: bool,
    pub phase_reference: PhaseReference,
    pub mask_update: MaskUpdate,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            plane_order: PlaneOrder::Forward,
            stop_fidelity: None,
            record_history: true,
            phase_reference: PhaseReference::Overlap,
            mask_update: MaskUpdate::Replace,
        }
    }
}

impl OptimizerConfig {
    pub fn with_iterations(iterations: usize) -> Self {
        Self { iterations, ..Self::default() }
    }
}

/// Plane count, spacing and wavelength of the cascade being designed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeGeometry {
    pub planes: usize,
    pub plane_spacing: f64,
    pub wavelength: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub stack: PhaseMaskStack,
    pub final_fidelity: f64,
    /// Fidelity after each completed iteration.
    pub history: Vec<f64>,
    pub wall_time: f64,
}

impl OptimizationResult {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

fn check_modes(forward: &[ComplexField], backward: &[ComplexField]) -> Result<SamplingGrid> {
    if forward.len() != backward.len() {
        return Err(Error::DimensionMismatch { expected: forward.len(), found: backward.len() });
    }
    let first = forward
        .first()
        .ok_or_else(|| Error::InvalidArgument("no modes given".into()))?;
    let grid = *first.grid();
    for f in forward.iter().chain(backward) {
        grid.ensure_same(f.grid())?;
    }
    Ok(grid)
}

/// One wavefront-matching update for a single plane. `forward` are the
/// fields arriving at the plane (its mask not applied), `backward` the
/// targets brought back to just after it, and `current` the mask in place.
pub fn plane_update(
    forward: &[ComplexField],
    backward: &[ComplexField],
    current: &PhaseMask,
    reference: PhaseReference,
    update: MaskUpdate,
) -> Result<PhaseMask> {
    let grid = check_modes(forward, backward)?;
    grid.ensure_same(current.grid())?;
    let fwd: Vec<&[Complex64]> = forward.iter().map(ComplexField::values).collect();
    let bwd: Vec<&[Complex64]> = backward.iter().map(ComplexField::values).collect();
    let phase = update_phase(&fwd, &bwd, current.phase(), &current.factors(), grid.cell_area(), reference, update);
    PhaseMask::new(grid, phase)
}

fn reference_phases(
    fwd: &[&[Complex64]],
    bwd: &[&[Complex64]],
    factors: &[Complex64],
    cell_area: f64,
    reference: PhaseReference,
) -> Vec<f64> {
    fwd.iter()
        .zip(bwd)
        .map(|(f, b)| match reference {
            PhaseReference::Overlap => f
                .iter()
                .zip(b.iter())
                .zip(factors)
                .map(|((f, b), e)| b.conj() * e * f)
                .sum::<Complex64>()
                .arg(),
            PhaseReference::PlainIntegral => {
                f.iter()
                    .zip(b.iter())
                    .zip(factors)
                    .map(|((f, b), e)| (e * f * b.conj()).arg())
                    .sum::<f64>()
                    * cell_area
            }
        })
        .collect()
}

fn update_phase(
    fwd: &[&[Complex64]],
    bwd: &[&[Complex64]],
    current: &[f64],
    factors: &[Complex64],
    cell_area: f64,
    reference: PhaseReference,
    update: MaskUpdate,
) -> Vec<f64> {
    let gammas = reference_phases(fwd, bwd, factors, cell_area, reference);
    let rotors: Vec<Complex64> = gammas.iter().map(|g| Complex64::cis(-g)).collect();
    (0..current.len())
        .map(|i| {
            let mut s = Complex64::new(0.0, 0.0);
            for ((f, b), r) in fwd.iter().zip(bwd).zip(&rotors) {
                s += f[i] * b[i].conj() * r;
            }
            match update {
                MaskUpdate::Replace => {
                    if s == Complex64::new(0.0, 0.0) {
                        0.0
                    } else {
                        -s.arg()
                    }
                }
                MaskUpdate::Incremental => {
                    let with_mask = s * factors[i];
                    if with_mask == Complex64::new(0.0, 0.0) {
                        current[i]
                    } else {
                        current[i] - with_mask.arg()
                    }
                }
            }
        })
        .collect()
}

/// Intensity-weighted phase of `b` relative to `a`:
/// `Σ |a||b|·arg(conj(a)·b) / Σ |a||b|`. Zero when `b = c·a` for `c > 0`,
/// `δ` when `b = a·e^{iδ}`.
pub fn phase_mismatch(a: &ComplexField, b: &ComplexField) -> Result<f64> {
    a.grid().ensure_same(b.grid())?;
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.values().iter().zip(b.values()) {
        let w = x.norm() * y.norm();
        if w > 0.0 {
            num += w * (x.conj() * y).arg();
            den += w;
        }
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

/// Mean `|⟨t_m|d_m⟩|²` on raw buffers.
fn fidelity_raw(targets: &[Vec<Complex64>], outputs: &[Vec<Complex64>], cell_area: f64) -> f64 {
    let sum: f64 = targets
        .iter()
        .zip(outputs)
        .map(|(t, d)| (raw_inner(t, d) * cell_area).norm_sqr())
        .sum();
    sum / targets.len() as f64
}

struct Workspace {
    grid: SamplingGrid,
    hop: Propagator,
    back: Propagator,
    inputs: Vec<Vec<Complex64>>,
    targets: Vec<Vec<Complex64>>,
    masks: Vec<Vec<f64>>,
    factors: Vec<Vec<Complex64>>,
}

impl Workspace {
    fn set_mask(&mut self, p: usize, phase: Vec<f64>) {
        self.factors[p] = phase.iter().map(|&v| Complex64::cis(v.rem_euclid(TAU))).collect();
        self.masks[p] = phase;
    }

    fn forward_outputs(&self) -> Vec<Vec<Complex64>> {
        self.inputs
            .iter()
            .map(|input| {
                let mut f = input.clone();
                for factors in &self.factors {
                    mul_in_place(&mut f, factors);
                    self.hop.apply_in_place(&mut f);
                }
                f
            })
            .collect()
    }

    /// Fields just after every mask, obtained from the targets.
    fn backward_fields(&self) -> Vec<Vec<Vec<Complex64>>> {
        let planes = self.masks.len();
        let mut out = vec![Vec::with_capacity(self.targets.len()); planes];
        for target in &self.targets {
            let mut b = target.clone();
            self.back.apply_in_place(&mut b);
            out[planes - 1].push(b.clone());
            for p in (0..planes - 1).rev() {
                for (v, f) in b.iter_mut().zip(&self.factors[p + 1]) {
                    *v *= f.conj();
                }
                self.back.apply_in_place(&mut b);
                out[p].push(b.clone());
            }
        }
        out
    }

    /// Fields just before every mask, obtained from the inputs.
    fn forward_fields(&self) -> Vec<Vec<Vec<Complex64>>> {
        let planes = self.masks.len();
        let mut out = vec![Vec::with_capacity(self.inputs.len()); planes];
        for input in &self.inputs {
            let mut f = input.clone();
            out[0].push(f.clone());
            for p in 1..planes {
                mul_in_place(&mut f, &self.factors[p - 1]);
                self.hop.apply_in_place(&mut f);
                out[p].push(f.clone());
            }
        }
        out
    }

    fn update(&mut self, p: usize, fwd: &[Vec<Complex64>], bwd: &[Vec<Complex64>], config: &OptimizerConfig) {
        let fwd: Vec<&[Complex64]> = fwd.iter().map(Vec::as_slice).collect();
        let bwd: Vec<&[Complex64]> = bwd.iter().map(Vec::as_slice).collect();
        let phase = update_phase(
            &fwd,
            &bwd,
            &self.masks[p],
            &self.factors[p],
            self.grid.cell_area(),
            config.phase_reference,
            config.mask_update,
        );
        self.set_mask(p, phase);
    }

    /// Sweeps planes 1 → P. Returns the fidelity of the updated stack.
    fn sweep_forward(&mut self, config: &OptimizerConfig) -> f64 {
        let bwd = self.backward_fields();
        let mut fwd = self.inputs.clone();
        for (p, bwd_p) in bwd.iter().enumerate() {
            self.update(p, &fwd, bwd_p, config);
            for f in &mut fwd {
                mul_in_place(f, &self.factors[p]);
                self.hop.apply_in_place(f);
            }
        }
        fidelity_raw(&self.targets, &fwd, self.grid.cell_area())
    }

    /// Sweeps planes P → 1. Returns the fidelity of the updated stack.
    fn sweep_backward(&mut self, config: &OptimizerConfig) -> f64 {
        let fwd = self.forward_fields();
        let mut bwd: Vec<Vec<Complex64>> = self
            .targets
            .iter()
            .map(|t| {
                let mut b = t.clone();
                self.back.apply_in_place(&mut b);
                b
            })
            .collect();
        for p in (0..self.masks.len()).rev() {
            self.update(p, &fwd[p], &bwd, config);
            if p > 0 {
                for b in &mut bwd {
                    for (v, f) in b.iter_mut().zip(&self.factors[p]) {
                        *v *= f.conj();
                    }
                    self.back.apply_in_place(b);
                }
            }
        }
        fidelity_raw(&self.targets, &self.forward_outputs(), self.grid.cell_area())
    }
}

/// Designs a stack of `geometry.planes` masks, starting from flat masks,
/// that maps each input to the corresponding target.
pub fn wavefront_match(
    inputs: &[ComplexField],
    targets: &[ComplexField],
    geometry: &CascadeGeometry,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    let grid = check_modes(inputs, targets)?;
    let initial = PhaseMaskStack::zeros(grid, geometry.planes, geometry.plane_spacing)?;
    wavefront_match_from(inputs, targets, initial, geometry.wavelength, config)
}

/// As [`wavefront_match`], continuing from an existing stack.
pub fn wavefront_match_from(
    inputs: &[ComplexField],
    targets: &[ComplexField],
    initial: PhaseMaskStack,
    wavelength: f64,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    let start = Instant::now();
    let grid = check_modes(inputs, targets)?;
    grid.ensure_same(initial.grid())?;
    if config.iterations == 0 {
        return Err(Error::InvalidArgument("at least one iteration is required".into()));
    }
    let hop = Propagator::new(grid, initial.plane_spacing(), wavelength)?;
    let back = hop.inverse();
    let targets = targets
        .iter()
        .map(|t| t.normalize().map(ComplexField::into_values))
        .collect::<Result<Vec<_>>>()?;
    let plane_spacing = initial.plane_spacing();
    let masks: Vec<Vec<f64>> = initial.into_masks().into_iter().map(PhaseMask::into_phase).collect();
    let factors = masks
        .iter()
        .map(|m| m.iter().map(|&v| Complex64::cis(v.rem_euclid(TAU))).collect())
        .collect();
    let mut ws = Workspace {
        grid,
        hop,
        back,
        inputs: inputs.iter().map(|f| f.values().to_vec()).collect(),
        targets,
        masks,
        factors,
    };

    let mut history = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        let backward = match config.plane_order {
            PlaneOrder::Forward => false,
            PlaneOrder::Backward => true,
            PlaneOrder::Alternating => it % 2 == 1,
        };
        let fidelity = if backward { ws.sweep_backward(config) } else { ws.sweep_forward(config) };
        history.push(fidelity);
        if config.stop_fidelity.is_some_and(|stop| fidelity >= stop) {
            break;
        }
    }

    let masks = ws
        .masks
        .into_iter()
        .map(|phase| PhaseMask::new(grid, phase))
        .collect::<Result<Vec<_>>>()?;
    let stack = PhaseMaskStack::new(masks, plane_spacing)?;
    Ok(OptimizationResult {
        stack,
        final_fidelity: *history.last().expect("at least one iteration"),
        history,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

//! Alignment tooling: the diffractive knife edge (a random-phase window
//! swept across one plane while the transmitted power is recorded), beam
//! parameter fits to the resulting curves, the intensity fidelity, and the
//! plane-by-plane mask-center search.

use std::f64::consts::{SQRT_2, TAU};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{frequency, Fft2};
use crate::field::ComplexField;
use crate::fit::levenberg_marquardt;
use crate::propagation::{mul_in_place, Cascade, PhaseMask, PhaseMaskStack};

/// Random SLM pixel values filling the knife window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffuserSpec {
    pub mean_counts: f64,
    pub sd_counts: f64,
    /// Pixel value giving a full 2π of phase.
    pub counts_per_turn: f64,
    /// Largest value the SLM accepts.
    pub max_counts: f64,
}

impl Default for DiffuserSpec {
    fn default() -> Self {
        Self { mean_counts: 60.0, sd_counts: 10.0, counts_per_turn: 118.0, max_counts: 255.0 }
    }
}

impl DiffuserSpec {
    /// Integer pixel values drawn per pixel, converted to phase.
    pub fn pattern(&self, len: usize, seed: u64) -> Result<Vec<f64>> {
        let normal = Normal::new(self.mean_counts, self.sd_counts)
            .map_err(|e| Error::InvalidArgument(format!("diffuser statistics: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..len)
            .map(|_| {
                let counts = normal.sample(&mut rng).round().clamp(0.0, self.max_counts);
                counts * TAU / self.counts_per_turn
            })
            .collect())
    }

    /// Fraction of power left in the unscattered field under the window,
    /// `|E[e^{iφ}]|²`, ignoring quantization.
    pub fn coherent_fraction(&self) -> f64 {
        let sigma = self.sd_counts * TAU / self.counts_per_turn;
        (-sigma * sigma).exp()
    }
}

/// Which side of the edge the window covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KnifeSide {
    /// Rows with `y < edge`.
    #[default]
    Below,
    /// Rows with `y ≥ edge`.
    Above,
}

/// Where the transmitted power is collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Collection {
    /// A disc in the angular spectrum of the output field, as seen by a
    /// detector in the focal plane of a lens.
    #[default]
    FarField,
    /// A disc on the output plane itself.
    OutputPlane,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnifeConfig {
    pub diffuser: DiffuserSpec,
    pub side: KnifeSide,
    pub seed: u64,
    /// Independent diffuser patterns averaged per position, seeded
    /// `seed, seed + 1, …`.
    pub realizations: usize,
    pub collection: Collection,
    /// Aperture radius in units of the unobstructed beam radius in the
    /// collection plane.
    pub aperture_factor: f64,
}

impl Default for KnifeConfig {
    fn default() -> Self {
        Self {
            diffuser: DiffuserSpec::default(),
            side: KnifeSide::Below,
            seed: 0,
            realizations: 16,
            collection: Collection::FarField,
            aperture_factor: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnifeScan {
    pub positions: Vec<f64>,
    pub powers: Vec<f64>,
    /// 1-based plane carrying the window.
    pub plane_index: usize,
    pub side: KnifeSide,
    /// Power reaching the aperture with no window in place. Powers are
    /// fractions of the total unobstructed power.
    pub unobstructed: f64,
}

/// Intensity centroid and `1/e²` radius `√(2⟨r²⟩)` of a field.
pub fn centroid_and_radius(field: &ComplexField) -> Result<((f64, f64), f64)> {
    let g = *field.grid();
    moments(&field.intensity(), |i| (g.x(i % g.nx()), g.y(i / g.nx())))
}

/// Intensity centroid and `√(2⟨r²⟩)` radius over arbitrary sample points.
fn moments(intensity: &[f64], coords: impl Fn(usize) -> (f64, f64)) -> Result<((f64, f64), f64)> {
    let total: f64 = intensity.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateField);
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for (i, v) in intensity.iter().enumerate() {
        let (x, y) = coords(i);
        cx += v * x;
        cy += v * y;
    }
    let (cx, cy) = (cx / total, cy / total);
    let mut r2 = 0.0;
    for (i, v) in intensity.iter().enumerate() {
        let (x, y) = coords(i);
        r2 += v * ((x - cx).powi(2) + (y - cy).powi(2));
    }
    Ok(((cx, cy), (2.0 * r2 / total).sqrt()))
}

/// Power within `radius` of `center` for samples at `coords`.
fn power_in_disc(intensity: &[f64], coords: impl Fn(usize) -> (f64, f64), center: (f64, f64), radius: f64) -> f64 {
    intensity
        .iter()
        .enumerate()
        .filter(|&(i, _)| {
            let (x, y) = coords(i);
            (x - center.0).powi(2) + (y - center.1).powi(2) <= radius * radius
        })
        .map(|(_, v)| v)
        .sum()
}

/// Centroid and `1/e²` radius `2σ` of a 1D profile sampled at `coords`.
pub fn profile_moments(profile: &[f64], coords: impl Iterator<Item = f64> + Clone) -> Result<(f64, f64)> {
    let total: f64 = profile.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateProfile);
    }
    let mean = profile.iter().zip(coords.clone()).map(|(p, c)| p * c).sum::<f64>() / total;
    let var = profile.iter().zip(coords).map(|(p, c)| p * (c - mean).powi(2)).sum::<f64>() / total;
    Ok((mean, 2.0 * var.sqrt()))
}

/// Sweeps a random-phase window over plane `plane` of `stack` and records
/// the power collected on the output plane inside a circular aperture
/// centered on the unobstructed beam. The window replaces the mask there.
pub fn knife_edge_scan(
    input: &ComplexField,
    stack: &PhaseMaskStack,
    wavelength: f64,
    plane: usize,
    positions: &[f64],
    config: &KnifeConfig,
) -> Result<KnifeScan> {
    if positions.len() < 2 {
        return Err(Error::InvalidArgument("a scan needs at least two positions".into()));
    }
    let increasing = positions.windows(2).all(|w| w[1] > w[0]);
    let decreasing = positions.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidArgument("scan positions must be strictly monotone".into()));
    }
    let grid = *input.grid();
    let (y_lo, y_hi) = (grid.origin().1, grid.origin().1 + grid.extent().1);
    if positions.iter().any(|p| !(y_lo..=y_hi).contains(p)) {
        return Err(Error::InvalidArgument("scan positions must lie on the grid".into()));
    }
    let cascade = Cascade::new(stack.clone(), wavelength)?;
    let arriving = cascade.partial(input, plane, false)?;
    let original = stack.mask(plane)?.factors();
    if config.realizations == 0 {
        return Err(Error::InvalidArgument("at least one diffuser realization is required".into()));
    }
    let diffusers = (0..config.realizations as u64)
        .map(|r| {
            let phase = config.diffuser.pattern(grid.len(), config.seed.wrapping_add(r))?;
            Ok(phase.into_iter().map(Complex64::cis).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let fft = Fft2::new(grid.nx(), grid.ny());
    let spectral = |i: usize| {
        (frequency(i % grid.nx(), grid.nx(), grid.pitch()), frequency(i / grid.nx(), grid.ny(), grid.pitch()))
    };
    let spatial = |i: usize| (grid.x(i % grid.nx()), grid.y(i / grid.nx()));
    // Intensity in the collection plane.
    let collect = |factors: &[Complex64]| -> Result<Vec<f64>> {
        let mut values = arriving.values().to_vec();
        mul_in_place(&mut values, factors);
        let mut out = cascade.finish_from(&ComplexField::new(grid, values)?, plane)?.into_values();
        if config.collection == Collection::FarField {
            fft.forward(&mut out);
        }
        Ok(out.iter().map(|v| v.norm_sqr()).collect())
    };
    let coords = |i: usize| match config.collection {
        Collection::FarField => spectral(i),
        Collection::OutputPlane => spatial(i),
    };
    let clear = collect(&original)?;
    let (center, radius) = moments(&clear, coords)?;
    let aperture = config.aperture_factor * radius;
    let total: f64 = clear.iter().sum();
    let unobstructed = power_in_disc(&clear, coords, center, aperture) / total;

    let covered = |i: usize, edge: f64| {
        let y = grid.y(i / grid.nx());
        match config.side {
            KnifeSide::Below => y < edge,
            KnifeSide::Above => y >= edge,
        }
    };
    let powers = positions
        .par_iter()
        .map(|&edge| {
            let mut power = 0.0;
            for diffuser in &diffusers {
                let factors: Vec<Complex64> =
                    (0..grid.len()).map(|i| if covered(i, edge) { diffuser[i] } else { original[i] }).collect();
                power += power_in_disc(&collect(&factors)?, coords, center, aperture);
            }
            Ok(power / (total * diffusers.len() as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KnifeScan { positions: positions.to_vec(), powers, plane_index: plane, side: config.side, unobstructed })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamEstimate {
    pub center: f64,
    /// `1/e²` intensity radius.
    pub waist: f64,
}

/// Derivative of `values` at each sample from a least-squares quadratic
/// through the five nearest samples (a Savitzky-Golay filter when the
/// spacing is uniform).
pub fn smoothed_derivative(positions: &[f64], values: &[f64]) -> Vec<f64> {
    let n = positions.len();
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(2).min(n.saturating_sub(5));
            let end = (start + 5).min(n);
            let x0 = positions[i];
            // Normal equations for v ≈ a + b·t + c·t², t = x - x0.
            let mut s = [0.0; 5];
            let mut r = [0.0; 3];
            for j in start..end {
                let t = positions[j] - x0;
                let mut tp = 1.0;
                for k in s.iter_mut() {
                    *k += tp;
                    tp *= t;
                }
                r[0] += values[j];
                r[1] += values[j] * t;
                r[2] += values[j] * t * t;
            }
            let m = nalgebra::Matrix3::new(s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4]);
            m.lu().solve(&nalgebra::Vector3::new(r[0], r[1], r[2])).map_or(0.0, |c| c[1])
        })
        .collect()
}

/// Center and waist from a knife-edge curve: the smoothed derivative is fit
/// with a Gaussian `A·exp(-2(y-c)²/w²)`, then the edge model
/// `a + b·erf(√2(y-c)/w) + d·exp(-2(y-c)²/w²)` is fit to the raw curve
/// starting from it.
pub fn estimate_beam_params(scan: &KnifeScan) -> Result<BeamEstimate> {
    let (x, p) = (&scan.positions, &scan.powers);
    if x.len() < 8 || x.len() != p.len() {
        return Err(Error::FitFailure(format!("need at least 8 samples, got {}", x.len())));
    }
    let max = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if !(range > 1e-12 * max.abs().max(1e-300)) {
        return Err(Error::FitFailure("power curve is flat".into()));
    }
    let net = p[p.len() - 1] - p[0];
    if net.abs() < 0.5 * range {
        return Err(Error::FitFailure(format!(
            "power curve is not monotone: net change {net:.3e} against range {range:.3e}"
        )));
    }
    let deriv = smoothed_derivative(x, p);
    let sign = net.signum();
    let d: Vec<f64> = deriv.iter().map(|v| v * sign).collect();
    let peak = (0..d.len()).max_by(|&a, &b| d[a].total_cmp(&d[b])).expect("non-empty");
    let span = (x[x.len() - 1] - x[0]).abs();
    let spacing = span / (x.len() - 1) as f64;

    let weight: f64 = d.iter().map(|v| v.max(0.0)).sum();
    let mean = d.iter().zip(x).map(|(v, x)| v.max(0.0) * x).sum::<f64>() / weight;
    let var = d.iter().zip(x).map(|(v, x)| v.max(0.0) * (x - mean).powi(2)).sum::<f64>() / weight;
    let w0 = (2.0 * var.sqrt()).max(spacing);

    let gaussian = |q: &[f64]| -> Vec<f64> {
        x.iter().zip(&d).map(|(x, d)| q[0] * (-2.0 * (x - q[1]).powi(2) / (q[2] * q[2])).exp() - d).collect()
    };
    let (g, _) = levenberg_marquardt(&[d[peak], x[peak], w0], &[d[peak].abs(), spacing, w0], gaussian, 200)
        .ok_or_else(|| Error::FitFailure("Gaussian fit to the derivative diverged".into()))?;

    // Edge model with a loss term following the beam's intensity at the
    // edge, which is where a phase step at the window boundary diffracts
    // light out of the aperture.
    let edge = |q: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(p)
            .map(|(x, p)| {
                let u = SQRT_2 * (x - q[2]) / q[3];
                q[0] + q[1] * libm::erf(u) + q[4] * (-u * u).exp() - p
            })
            .collect()
    };
    let start = [(max + min) / 2.0, sign * range / 2.0, g[1], g[2].abs(), 0.0];
    let scales = [range, range, spacing, g[2].abs(), range];
    let (q, _) = levenberg_marquardt(&start, &scales, edge, 400)
        .ok_or_else(|| Error::FitFailure("edge fit diverged".into()))?;
    let (center, waist) = (q[2], q[3].abs());
    let (lo, hi) = (x[0].min(x[x.len() - 1]), x[0].max(x[x.len() - 1]));
    if !(center >= lo && center <= hi && waist.is_finite() && waist > 0.0 && waist < span) {
        return Err(Error::FitFailure(format!("fit left the scanned range (center {center:.3e}, waist {waist:.3e})")));
    }
    Ok(BeamEstimate { center, waist })
}

/// Runs the scan from both sides and averages the two fits, cancelling the
/// shift a phase step at the window edge adds to a one-sided scan.
pub fn locate_beam(
    input: &ComplexField,
    stack: &PhaseMaskStack,
    wavelength: f64,
    plane: usize,
    positions: &[f64],
    config: &KnifeConfig,
) -> Result<BeamEstimate> {
    let mut estimates = Vec::with_capacity(2);
    for side in [KnifeSide::Below, KnifeSide::Above] {
        let scan = knife_edge_scan(input, stack, wavelength, plane, positions, &KnifeConfig { side, ..config.clone() })?;
        estimates.push(estimate_beam_params(&scan)?);
    }
    Ok(BeamEstimate {
        center: (estimates[0].center + estimates[1].center) / 2.0,
        waist: (estimates[0].waist + estimates[1].waist) / 2.0,
    })
}

/// `∫ I_d·I_e / √(∫ I_d² · ∫ I_e²)` for sampled 1D profiles.
pub fn intensity_fidelity(design: &[f64], measured: &[f64]) -> Result<f64> {
    if design.len() != measured.len() {
        return Err(Error::DimensionMismatch { expected: design.len(), found: measured.len() });
    }
    if design.iter().chain(measured).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("profiles must be finite and non-negative".into()));
    }
    let dd: f64 = design.iter().map(|v| v * v).sum();
    let ee: f64 = measured.iter().map(|v| v * v).sum();
    if dd == 0.0 || ee == 0.0 {
        return Err(Error::DegenerateProfile);
    }
    let de: f64 = design.iter().zip(measured).map(|(a, b)| a * b).sum();
    Ok((de / (dd.sqrt() * ee.sqrt())).min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskAlignment {
    /// Display offset `(dx, dy)` in pixels found for each plane.
    pub offsets: Vec<(i64, i64)>,
    /// Score of each stage with the plane at offset zero.
    pub before: Vec<f64>,
    /// Score of each stage at the chosen offset.
    pub after: Vec<f64>,
}

/// Candidate offsets `0, -1, 1, -2, 2, …` within `range`.
fn candidates(range: i64) -> impl Iterator<Item = i64> {
    std::iter::once(0).chain((1..=range).flat_map(|k| [-k, k]))
}

fn stage_stack(masks: &[PhaseMask], enabled: usize, plane_spacing: f64) -> Result<PhaseMaskStack> {
    let masks = masks
        .iter()
        .enumerate()
        .map(|(p, m)| if p < enabled { m.clone() } else { PhaseMask::zeros(*m.grid()) })
        .collect();
    PhaseMaskStack::new(masks, plane_spacing)
}

/// Output profiles `(y, x)` for every input.
fn output_profiles(inputs: &[ComplexField], stack: PhaseMaskStack, wavelength: f64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let cascade = Cascade::new(stack, wavelength)?;
    inputs
        .iter()
        .map(|f| {
            let out = cascade.forward(f)?;
            Ok((out.profile_y(), out.profile_x()))
        })
        .collect()
}

fn stage_score(reference: &[(Vec<f64>, Vec<f64>)], measured: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let mut total = 0.0;
    for ((ry, rx), (my, mx)) in reference.iter().zip(measured) {
        total += 0.5 * (intensity_fidelity(ry, my)? + intensity_fidelity(rx, mx)?);
    }
    Ok(total / reference.len() as f64)
}

/// Finds, plane by plane, the whole-pixel display offset that best restores
/// the designed output intensity. At stage `k` planes `1..=k` are shown
/// (earlier ones at their chosen offsets) and the rest are blank; the
/// reference is the design stack treated the same way. The score averages
/// the intensity fidelity of the y and x output profiles over all inputs;
/// y is scanned first, then x. Ties keep the smaller offset.
pub fn refine_mask_centers(
    actual: &PhaseMaskStack,
    design: &PhaseMaskStack,
    inputs: &[ComplexField],
    wavelength: f64,
    search_range: usize,
) -> Result<MaskAlignment> {
    if search_range == 0 {
        return Err(Error::InvalidArgument("search range must be at least one pixel".into()));
    }
    if actual.planes() != design.planes() {
        return Err(Error::DimensionMismatch { expected: design.planes(), found: actual.planes() });
    }
    actual.grid().ensure_same(design.grid())?;
    let range = search_range as i64;
    let spacing = actual.plane_spacing();
    let mut shown: Vec<PhaseMask> = actual.masks().to_vec();
    let mut result = MaskAlignment { offsets: Vec::new(), before: Vec::new(), after: Vec::new() };

    for k in 0..actual.planes() {
        let reference = output_profiles(inputs, stage_stack(design.masks(), k + 1, spacing)?, wavelength)?;
        let score = |dx: i64, dy: i64, shown: &[PhaseMask]| -> Result<f64> {
            let mut masks = shown.to_vec();
            masks[k] = actual.masks()[k].shifted(dx, dy);
            let measured = output_profiles(inputs, stage_stack(&masks, k + 1, spacing)?, wavelength)?;
            stage_score(&reference, &measured)
        };
        let best = |scores: Vec<(i64, f64)>| {
            scores.into_iter().fold((0, f64::NEG_INFINITY), |acc, (c, s)| if s > acc.1 { (c, s) } else { acc })
        };

        let base = score(0, 0, &shown)?;
        let ys: Vec<i64> = candidates(range).collect();
        let scores = ys
            .par_iter()
            .map(|&dy| Ok((dy, score(0, dy, &shown)?)))
            .collect::<Result<Vec<_>>>()?;
        let (dy, _) = best(scores);
        let scores = ys
            .par_iter()
            .map(|&dx| Ok((dx, score(dx, dy, &shown)?)))
            .collect::<Result<Vec<_>>>()?;
        let (dx, after) = best(scores);

        shown[k] = actual.masks()[k].shifted(dx, dy);
        result.offsets.push((dx, dy));
        result.before.push(base);
        result.after.push(after);
    }
    Ok(result)
}

//! The two-beam unitary family `U(θ, φ)`, gate fidelities, the correcting
//! output mask, and transfer-matrix extraction from simulated fields.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, SamplingGrid};
use crate::matrix::TransferMatrix;
use crate::propagation::PhaseMask;

/// Slack on the closed parameter bounds so grid values such as `6·π/12`
/// are accepted despite rounding.
const RANGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryTarget {
    pub theta: f64,
    pub phi: f64,
    pub matrix: TransferMatrix,
}

/// `U(θ, φ) = [[cos θ, i·e^{-iφ}·sin θ], [i·e^{iφ}·sin θ, cos θ]]`
/// with coupling `θ ∈ [0, π/2]` and phase `φ ∈ [-π, π)`.
pub fn u2(theta: f64, phi: f64) -> Result<UnitaryTarget> {
    if !(-RANGE_SLACK..=FRAC_PI_2 + RANGE_SLACK).contains(&theta) {
        return Err(Error::ParameterRange { name: "theta", value: theta });
    }
    if !(phi >= -PI - RANGE_SLACK && phi < PI) {
        return Err(Error::ParameterRange { name: "phi", value: phi });
    }
    let (s, c) = theta.sin_cos();
    let i = Complex64::i();
    let matrix = TransferMatrix::from_rows([
        [Complex64::new(c, 0.0), i * Complex64::cis(-phi) * s],
        [i * Complex64::cis(phi) * s, Complex64::new(c, 0.0)],
    ]);
    Ok(UnitaryTarget { theta, phi, matrix })
}

/// `(1/M)·Σ_m |⟨m| U_t† U_d |m⟩|²`.
pub fn gate_fidelity_matrix(target: &TransferMatrix, design: &TransferMatrix) -> Result<f64> {
    if target.dim() != design.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), found: design.dim() });
    }
    let m = target.dim();
    if m == 0 {
        return Err(Error::InvalidArgument("fidelity of 0x0 matrices".into()));
    }
    let sum: f64 = (0..m)
        .map(|col| {
            (0..m)
                .map(|k| target.get(k, col).conj() * design.get(k, col))
                .sum::<Complex64>()
                .norm_sqr()
        })
        .sum();
    Ok(sum / m as f64)
}

/// `(1/M)·Σ_m |∫∫ ψ_t,m* ψ_d,m dx dy|²`.
pub fn gate_fidelity_fields(targets: &[ComplexField], outputs: &[ComplexField]) -> Result<f64> {
    if targets.len() != outputs.len() {
        return Err(Error::DimensionMismatch { expected: targets.len(), found: outputs.len() });
    }
    if targets.is_empty() {
        return Err(Error::InvalidArgument("fidelity of empty state lists".into()));
    }
    let mut sum = 0.0;
    for (t, d) in targets.iter().zip(outputs) {
        sum += t.inner_product(d)?.norm_sqr();
    }
    Ok(sum / targets.len() as f64)
}

/// Phase applied by the correcting mask to the upper beam; the lower beam
/// receives the negative.
pub fn correction_phase(phi: f64) -> f64 {
    (phi - FRAC_PI_2) / 2.0
}

/// Piecewise-constant output-plane mask turning a `U(θ, π/2)` design into
/// `U(θ, φ)`: `+Δφ` for `y ≥ boundary_y`, `-Δφ` below, `Δφ = (φ - π/2)/2`.
pub fn correcting_phase_mask(phi: f64, grid: SamplingGrid, boundary_y: f64) -> Result<PhaseMask> {
    if !(phi >= -PI - RANGE_SLACK && phi < PI) {
        return Err(Error::ParameterRange { name: "phi", value: phi });
    }
    let delta = correction_phase(phi);
    PhaseMask::from_fn(grid, |_, y| if y >= boundary_y { delta } else { -delta })
}

/// Entry `(m', m)` is `⟨basis_{m'} | output_m⟩`. Reported raw: lossy
/// outputs give sub-unitary matrices.
pub fn extract_transfer_matrix(outputs: &[ComplexField], basis: &[ComplexField]) -> Result<TransferMatrix> {
    if outputs.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), found: outputs.len() });
    }
    let n = basis.len();
    let mut u = TransferMatrix::zeros(n);
    for (mp, b) in basis.iter().enumerate() {
        for (m, o) in outputs.iter().enumerate() {
            u.set(mp, m, b.inner_product(o)?);
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn theta_zero_is_identity() {
        for phi in [-PI, -1.0, 0.0, 2.5] {
            let u = u2(0.0, phi).unwrap();
            assert!(u.matrix.max_abs_diff(&TransferMatrix::identity(2)) < 1e-15);
        }
    }

    #[test]
    fn hadamard_with_swap() {
        let u = u2(FRAC_PI_4, -FRAC_PI_2).unwrap();
        let h = FRAC_1_SQRT_2;
        let hadamard = TransferMatrix::from_rows([[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]);
        let swapped = TransferMatrix::from_rows([
            [hadamard.get(1, 0), hadamard.get(1, 1)],
            [hadamard.get(0, 0), hadamard.get(0, 1)],
        ]);
        assert!(u.matrix.max_abs_diff(&swapped) < 1e-15, "{:?}", u.matrix);
    }

    #[test]
    fn full_coupling_entries() {
        let u = u2(FRAC_PI_2, 0.0).unwrap();
        let expected = TransferMatrix::from_rows([[c(0.0, 0.0), c(0.0, 1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]);
        assert!(u.matrix.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn parameter_range_checks() {
        assert!(u2(-0.1, 0.0).is_err());
        assert!(u2(1.6, 0.0).is_err());
        assert!(u2(0.1, PI).is_err());
        assert!(u2(0.1, -PI).is_ok());
        assert!(u2(6.0 * PI / 12.0, 0.0).is_ok());
    }

    #[test]
    fn fidelity_closed_forms() {
        let id = TransferMatrix::identity(2);
        let u = u2(FRAC_PI_4, 0.3).unwrap().matrix;
        assert!((gate_fidelity_matrix(&u, &u).unwrap() - 1.0).abs() < 1e-14);
        assert!((gate_fidelity_matrix(&id, &u).unwrap() - 0.5).abs() < 1e-14);
        let full = u2(FRAC_PI_2, 1.1).unwrap().matrix;
        assert!(gate_fidelity_matrix(&id, &full).unwrap() < 1e-14);
        assert!(gate_fidelity_matrix(&id, &TransferMatrix::identity(3)).is_err());
    }

    #[test]
    fn correcting_mask_values() {
        let g = SamplingGrid::centered(8, 8, 1.0).unwrap();
        assert!(correcting_phase_mask(FRAC_PI_2, g, 0.0).unwrap().is_zero());
        let m = correcting_phase_mask(PI - 1e-15, g, 0.0).unwrap();
        assert!((m.at(0, 7) - FRAC_PI_4).abs() < 1e-12);
        assert!((m.at(0, 0) + FRAC_PI_4).abs() < 1e-12);
        assert_eq!(correction_phase(PI), FRAC_PI_4);
    }

    #[test]
    fn correction_algebra_maps_design_line_to_target() {
        // diag(e^{-iΔφ}, e^{iΔφ}) · U(θ, π/2) reproduces U(θ, φ) up to a
        // global phase, so the matrix fidelity is exactly 1.
        for &(theta, phi) in &[(0.3, -2.0), (1.2, 0.7), (FRAC_PI_4, -PI)] {
            let d = correction_phase(phi);
            let corr = TransferMatrix::from_rows([
                [Complex64::cis(-d), c(0.0, 0.0)],
                [c(0.0, 0.0), Complex64::cis(d)],
            ]);
            let design = corr.mul(&u2(theta, FRAC_PI_2).unwrap().matrix).unwrap();
            let f = gate_fidelity_matrix(&u2(theta, phi).unwrap().matrix, &design).unwrap();
            assert!((f - 1.0).abs() < 1e-13, "θ={theta} φ={phi}: {f}");
        }
    }
}

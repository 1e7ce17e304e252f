use std::f64::consts::{FRAC_PI_2, PI};

use mplc::alignment::intensity_fidelity;
use mplc::io::{decode_stack, encode_stack};
use mplc::perturb::{mean_phase_gradient, synth_perturbation};
use mplc::unitary::{gate_fidelity_matrix, u2};
use mplc::{ComplexField, PhaseMask, PhaseMaskStack, Propagator, SamplingGrid};
use num_complex::Complex64;
use proptest::prelude::*;

const WAVELENGTH: f64 = 637e-9;

fn grid() -> SamplingGrid {
    SamplingGrid::centered(16, 16, 10e-6).unwrap()
}

fn field() -> impl Strategy<Value = ComplexField> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 256)
        .prop_map(|v| ComplexField::new(grid(), v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect()).unwrap())
}

fn mask() -> impl Strategy<Value = PhaseMask> {
    prop::collection::vec(-10.0..10.0f64, 256).prop_map(|v| PhaseMask::new(grid(), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cauchy_schwarz(a in field(), b in field()) {
        let ip = a.inner_product(&b).unwrap().norm();
        prop_assert!(ip <= a.norm() * b.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn inner_product_is_conjugate_symmetric(a in field(), b in field()) {
        let ab = a.inner_product(&b).unwrap();
        let ba = b.inner_product(&a).unwrap();
        prop_assert!((ab - ba.conj()).norm() <= 1e-12 * a.norm() * b.norm());
    }

    #[test]
    fn propagation_preserves_norm(a in field(), z in -1e-3..1e-3f64) {
        // 16 samples at 10 µm stay inside the unlimited range for |z| < 2.5 mm.
        let out = Propagator::new(grid(), z, WAVELENGTH).unwrap().propagate(&a).unwrap();
        prop_assert!((out.norm() / a.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn propagation_is_reversible(a in field(), z in -1e-3..1e-3f64) {
        let p = Propagator::new(grid(), z, WAVELENGTH).unwrap();
        let back = p.inverse().propagate(&p.propagate(&a).unwrap()).unwrap();
        let err = back.add(&a.scale(Complex64::new(-1.0, 0.0))).unwrap().norm();
        prop_assert!(err <= 1e-12 * a.norm());
    }

    #[test]
    fn masks_preserve_norm(a in field(), m in mask()) {
        prop_assert!((m.apply(&a).unwrap().norm() / a.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn u2_is_unitary(theta in 0.0..=FRAC_PI_2, phi in -PI..PI) {
        prop_assert!(u2(theta, phi).unwrap().matrix.unitarity_error() <= 1e-14);
    }

    #[test]
    fn fidelity_ignores_global_phase(t1 in 0.0..=FRAC_PI_2, p1 in -PI..PI, t2 in 0.0..=FRAC_PI_2, p2 in -PI..PI, chi in -PI..PI) {
        let t = u2(t1, p1).unwrap().matrix;
        let d = u2(t2, p2).unwrap().matrix;
        let f = gate_fidelity_matrix(&t, &d).unwrap();
        let g = gate_fidelity_matrix(&t, &d.scale(Complex64::cis(chi))).unwrap();
        prop_assert!((f - g).abs() <= 1e-13);
        prop_assert!((-1e-15..=1.0 + 1e-13).contains(&f));
    }

    #[test]
    fn intensity_fidelity_is_symmetric_and_scale_free(
        a in prop::collection::vec(0.0..1.0f64, 32),
        b in prop::collection::vec(0.0..1.0f64, 32),
        s in 1e-6..1e6f64,
    ) {
        prop_assume!(a.iter().any(|v| *v > 0.0) && b.iter().any(|v| *v > 0.0));
        let f = intensity_fidelity(&a, &b).unwrap();
        prop_assert!((f - intensity_fidelity(&b, &a).unwrap()).abs() <= 1e-14);
        let scaled: Vec<f64> = b.iter().map(|v| v * s).collect();
        prop_assert!((f - intensity_fidelity(&a, &scaled).unwrap()).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((intensity_fidelity(&a, &a).unwrap() - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn shifts_compose(m in mask(), a in -20i64..20, b in -20i64..20, c in -20i64..20, d in -20i64..20) {
        prop_assert_eq!(m.shifted(a, b).shifted(c, d), m.shifted(a + c, b + d));
        prop_assert_eq!(m.shifted(16, -16), m);
    }

    #[test]
    fn stacks_round_trip(masks in prop::collection::vec(mask(), 1..4), spacing in 1e-3..1.0f64) {
        let stack = PhaseMaskStack::new(masks, spacing).unwrap();
        prop_assert_eq!(decode_stack(&encode_stack(&stack)).unwrap(), stack);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synthetic_patterns_hit_the_gradient(seed in any::<u64>(), ell in 1.0..12.0f64, gradient in 0.01..0.5f64) {
        let g = SamplingGrid::centered(64, 64, 20e-6).unwrap();
        let p = synth_perturbation(g, gradient, ell, seed).unwrap();
        let measured = mean_phase_gradient(&[p]).unwrap();
        prop_assert!((measured / gradient - 1.0).abs() <= 1e-9);
    }
}

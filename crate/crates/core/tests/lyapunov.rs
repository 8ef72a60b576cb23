mod common;

use cocycle_lab::families;
use cocycle_lab::linalg;
use cocycle_lab::lyapunov::{height_spectra, lyap_spectrum, lyapunov_report, AccelParams, SpectrumParams};
use cocycle_lab::trigmat::{Group, TrigMatrixMap};
use common::spec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[test]
fn constant_diagonal_exponents_are_exact() {
    let s = spec(TrigMatrixMap::constant(linalg::diag_real(&[2.0, 0.5])), Group::SL2R);
    let sp = lyap_spectrum(&s, 0.0, &SpectrumParams::default()).unwrap();
    assert!((sp.exponents[0] - 2f64.ln()).abs() < 1e-12);
    assert!((sp.exponents[1] + 2f64.ln()).abs() < 1e-12);
}

#[test]
fn rotation_loop_grows_linearly_off_the_axis() {
    // R_{2 pi k (x + i y)} has top exponent 2 pi |k| y exactly
    for k in 1..=3 {
        let s = spec(families::rotation_loop(k, 1), Group::SL2R);
        let spectra = height_spectra(&s, &[0.04, 0.02], &SpectrumParams::default()).unwrap();
        for sp in &spectra {
            assert!((sp.exponents[0] - TAU * k as f64 * sp.y).abs() < 1e-3, "k = {k}, y = {}", sp.y);
        }
    }
}

#[test]
fn convex_in_height() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let heights: Vec<f64> = (1..=6).rev().map(|j| 0.02 * j as f64).collect();
    let params = SpectrumParams {
        iters: 40_000,
        ..SpectrumParams::default()
    };
    for _ in 0..4 {
        let lam = rng.gen_range(1.5..3.0);
        let a = TrigMatrixMap::constant(linalg::diag_real(&[lam, 1.0 / lam]))
            .mul(&families::random_sl2_loop(&mut rng, 1, 0.6, 2))
            .unwrap();
        let s = spec(a, Group::SL2R);
        let mut spectra = height_spectra(&s, &heights, &params).unwrap();
        spectra.sort_by(|a, b| a.y.total_cmp(&b.y));
        assert_eq!(spectra.len(), 7);
        for w in spectra.windows(3) {
            let second = w[2].upper(1) - 2.0 * w[1].upper(1) + w[0].upper(1);
            assert!(second > -1e-6, "second difference {second:e} at y = {}", w[1].y);
        }
    }
}

#[test]
fn report_for_block_cocycle() {
    // R_{2 pi x} on one symplectic pair, a hyperbolic constant on the other
    let a = TrigMatrixMap::constant(linalg::diag_real(&[3.0, 1.0 / 3.0]))
        .diamond(&families::rotation_loop(1, 1))
        .unwrap();
    let s = spec(a, Group::SpR(4));
    let r = lyapunov_report(&s, &AccelParams::default()).unwrap();
    let l = &r.spectrum.exponents;
    assert!((l[0] - 3f64.ln()).abs() < 1e-9 && l[1].abs() < 1e-6);
    assert_eq!(r.accelerations[0].omega_snapped, 0);
    assert_eq!(r.accelerations[1].omega_snapped, 1);
    assert_eq!(r.regular, vec![true, false, true, true]);
    assert!(r.symmetry_defect.unwrap() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exponents_sorted_and_cumulative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1 = rng.gen_range(1.2..3.0);
        let l2 = rng.gen_range(1.0..l1);
        let a = TrigMatrixMap::constant(families::hyperbolic_constant(&[l1, l2]))
            .mul(&families::random_symplectic_loop(&mut rng, 2, 2, 0.5, 2, 1))
            .unwrap();
        let s = spec(a, Group::SpR(4));
        let sp = lyap_spectrum(&s, 0.0, &SpectrumParams { iters: 10_000, ..SpectrumParams::default() }).unwrap();
        prop_assert_eq!(sp.ordering_defect(), 0.0);
        for k in 1..4 {
            prop_assert!(sp.exponents[k - 1] >= sp.exponents[k]);
            prop_assert!((sp.upper(k + 1) - sp.upper(k) - sp.exponents[k]).abs() < 1e-12);
        }
        prop_assert!(sp.symmetry_defect() < 1e-3);
    }
}

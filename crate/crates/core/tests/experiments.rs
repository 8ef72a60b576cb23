use cocycle_lab::arithmetic::{cf_expand, AlphaInput};
use cocycle_lab::experiments::{antiself_positivity_probe, simple_spectrum_probe, uh_density_probe, ProbeCase, ProbeParams};
use cocycle_lab::families;
use cocycle_lab::linalg::{self, CMat, C64};
use cocycle_lab::lyapunov::{lyap_spectrum, SpectrumParams};
use cocycle_lab::trigmat::{class_residual, group_residual, CocycleSpec, Group, Symmetry, TrigMatrixMap};
use cocycle_lab::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn conjugate(seed: u64, b: &CMat, amp: f64) -> CocycleSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = families::random_symplectic_loop(&mut rng, 2, 1, amp, 2, 1);
    let freq = cf_expand(&AlphaInput::golden(), 30).unwrap();
    let mut a = s
        .shift(freq.value())
        .mul(&TrigMatrixMap::constant(b.clone()))
        .unwrap()
        .mul(&s.symplectic_inverse())
        .unwrap()
        .truncate(1e-15);
    a.enforce_real();
    CocycleSpec::new(freq, a, Group::SpR(4), Symmetry::None).unwrap()
}

#[test]
fn equal_blocks_split_under_insertion() {
    let b = families::hyperbolic_constant(&[1.5, 1.5]);
    let spec = conjugate(21, &b, 0.1);
    let r = simple_spectrum_probe(&spec, 1e-2, &ProbeParams::default()).unwrap();
    assert!(matches!(r.case, ProbeCase::II | ProbeCase::IV));
    assert!(r.gap > 9e-3, "{}", r.gap);
    assert!(r.perturbation_sup < 5e-2);
    assert!(r.pass);
}

#[test]
fn simple_spectrum_left_alone() {
    let b = families::hyperbolic_constant(&[3.0, 1.5]);
    let spec = conjugate(2, &b, 0.1);
    let r = simple_spectrum_probe(&spec, 1e-2, &ProbeParams::default()).unwrap();
    assert_eq!(r.case, ProbeCase::AlreadySimple);
    assert_eq!(r.perturbation_sup, 0.0);
}

#[test]
fn irregular_spec_rejected() {
    let rot = families::rotation_loop(1, 1);
    let map = rot.diamond(&rot).unwrap();
    let freq = cf_expand(&AlphaInput::golden(), 30).unwrap();
    let spec = CocycleSpec::new(freq, map, Group::SpR(4), Symmetry::None).unwrap();
    let r = simple_spectrum_probe(&spec, 1e-2, &ProbeParams::default());
    assert!(matches!(r, Err(Error::NoRegularDirection(_, _))), "{r:?}");
}

#[test]
fn hyperbolic_plus_elliptic_becomes_uh() {
    let b = linalg::diamond(&linalg::diag_real(&[2.0, 0.5]), &linalg::rotation(0.4));
    let spec = conjugate(4, &b, 0.1);
    let r = uh_density_probe(&spec, 1e-2, &ProbeParams::default()).unwrap();
    assert!(r.pass);
}

#[test]
fn near_identity_class_member_gains_exponent() {
    let freq = cf_expand(&AlphaInput::golden(), 30).unwrap();
    let g1 = families::scalar(&families::real_mode(1, 0.03, 0.02), 1);
    let g2 = families::scalar(&families::real_mode(3, -0.02, 0.01), 1);
    let mut map = families::upper_unipotent(&g1).mul(&families::lower_unipotent(&g2)).unwrap();
    map.enforce_real();
    let spec = CocycleSpec::new(freq, map, Group::SL2R, Symmetry::ScrA).unwrap();
    let eps = 1e-2;
    let r = antiself_positivity_probe(&spec, eps, &ProbeParams::default()).unwrap();
    assert!(r.output.exponents[0] > eps / 2.0);
    assert!(r.perturbation_sup <= 3.0 * eps);
    assert!(r.class_ok);
}

#[test]
fn cost_shrinks_with_eps_and_class_is_kept() {
    let spec = conjugate(21, &families::hyperbolic_constant(&[1.5, 1.5]), 0.1);
    let mut costs = Vec::new();
    for eps in [4e-2, 1e-2, 2.5e-3] {
        let r = simple_spectrum_probe(&spec, eps, &ProbeParams::default()).unwrap();
        let out = r.perturbed_spec().unwrap();
        assert!(group_residual(&out.map, out.group) < 1e-8);
        assert!(class_residual(&out.map, out.symmetry) < 1e-8);
        assert!(r.gap_ok);
        costs.push(r.perturbation_sup);
    }
    assert!(costs.windows(2).all(|w| w[1] < w[0]), "{costs:?}");
    assert!(costs[2] < 1e-2);
}

#[test]
fn simple_spectrum_survives_small_perturbations() {
    let spec = conjugate(21, &families::hyperbolic_constant(&[1.5, 1.5]), 0.1);
    let r = simple_spectrum_probe(&spec, 1e-2, &ProbeParams::default()).unwrap();
    let out = r.perturbed_spec().unwrap();
    let size = r.gap / 10.0;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let params = SpectrumParams {
        iters: 10_000,
        ..SpectrumParams::default()
    };
    for _ in 0..20 {
        // A~ (I + [[0, s], [0, 0]]) differs from A~ linearly in s, so rescale to the target size
        let s = families::random_symmetric(&mut rng, 2, 2, 1.0, 1);
        let delta = out.map.mul(&families::upper_shear(&s)).unwrap().sub(&out.map).unwrap();
        let scale = size / delta.sup_norm(512, 0.0);
        let mut moved = out.map.mul(&families::upper_shear(&s.scale(C64::new(scale, 0.0)))).unwrap();
        moved.enforce_real();
        let sp = lyap_spectrum(&out.with_map(moved), 0.0, &params).unwrap();
        assert!(sp.exponents[0] - sp.exponents[1] > 0.5 * r.gap, "{:?}", sp.exponents);
    }
}

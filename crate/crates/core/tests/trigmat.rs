use cocycle_lab::arithmetic::{cf_expand, AlphaInput};
use cocycle_lab::families;
use cocycle_lab::linalg::{self, CMat, C64};
use cocycle_lab::trigmat::{
    fit_trig, group_residual, CocycleSpec, Group, Symmetry, TrigMapJson, TrigMatrixMap,
};
use cocycle_lab::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn real_map(seed: u64, dim: usize, degree: usize) -> TrigMatrixMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = vec![(0, CMat::from_fn(dim, dim, |_, _| C64::new(rng.gen_range(-1.0..1.0), 0.0)))];
    for k in 1..=degree as i64 {
        let c = CMat::from_fn(dim, dim, |_, _| C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
        terms.push((-k, c.map(|z| z.conj())));
        terms.push((k, c));
    }
    TrigMatrixMap::from_terms(dim, 1, &terms).unwrap()
}

/// Direct trigonometric sum, independent of the stored evaluator.
fn naive_eval(map: &TrigMatrixMap, x: f64, y: f64) -> CMat {
    let w = 2.0 * std::f64::consts::PI / map.period_f64();
    map.terms().fold(CMat::zeros(map.dim(), map.dim()), |acc, (k, c)| {
        let z = C64::new(-(k as f64) * w * y, k as f64 * w * x).exp();
        acc + c * z
    })
}

#[test]
fn evaluation_matches_naive_sum() {
    let m = real_map(1, 3, 3);
    for &(x, y) in &[(0.0, 0.0), (0.3, 0.1), (0.77, -0.2)] {
        assert!(linalg::max_abs(&(m.eval_strip(x, y) - naive_eval(&m, x, y))) < 1e-12);
    }
}

#[test]
fn spec_json_round_trip() {
    let freq = cf_expand(&AlphaInput::golden(), 30).unwrap();
    let map = families::rotation_loop(2, 1);
    let spec = CocycleSpec::new(freq, map.clone(), Group::SL2R, Symmetry::None).unwrap();
    let text = serde_json::to_string(&spec.to_json()).unwrap();
    let back = CocycleSpec::from_json_str(&text).unwrap();
    assert_eq!(back.map, map);
    assert_eq!(back.group, Group::SL2R);
    assert_eq!(back.freq, spec.freq);
    let bare = TrigMapJson::from_map(&map, 0.0).into_map().unwrap();
    assert_eq!(bare, map);
}

#[test]
fn group_violation_detected() {
    let freq = cf_expand(&AlphaInput::golden(), 30).unwrap();
    let mut m = linalg::diag_real(&[2.0, 0.5]);
    m[(0, 1)] = C64::new(1e-2, 0.0);
    m[(1, 0)] = C64::new(1e-2, 0.0);
    let err = CocycleSpec::new(freq, TrigMatrixMap::constant(m), Group::SL2R, Symmetry::None).unwrap_err();
    assert!(matches!(err, Error::GroupViolation { .. }));
}

#[test]
fn fit_reproduces_a_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = families::random_sl2_loop(&mut rng, 2, 0.5, 3);
    let samples = a.eval_grid(64, 0.0);
    let fit = fit_trig(&samples, 1, 1e-14).unwrap();
    assert!(fit.residual < 1e-12);
    assert!(linalg::max_abs(&(fit.map.eval(0.123) - a.eval(0.123))) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn real_maps_are_real_on_the_axis(seed in any::<u64>(), x in 0.0..1.0f64) {
        let m = real_map(seed, 2, 3);
        prop_assert!(m.real_valued());
        prop_assert!(linalg::max_imag(&m.eval_strip(x, 0.0)) < 1e-12);
    }

    #[test]
    fn strip_norm_dominates_sup(seed in any::<u64>(), h in 0.0..0.3f64) {
        let m = real_map(seed, 2, 4);
        prop_assert!(m.strip_norm(0.0) >= m.sup_norm(4096, 0.0) - 1e-12);
        prop_assert!(m.strip_norm(h) >= m.sup_norm(1024, h) - 1e-12);
    }

    #[test]
    fn direct_sum_keeps_group_residual(seed in any::<u64>(), noise in 1e-9..1e-4f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = families::random_sl2_loop(&mut rng, 1, 0.4, 2);
        let b = families::random_sl2_loop(&mut rng, 1, 0.4, 2);
        let bump = TrigMatrixMap::constant(linalg::eye(2) * C64::new(1.0 + noise, 0.0));
        let (a, b) = (a.mul(&bump).unwrap(), b);
        let (ra, rb) = (group_residual(&a, Group::SL2R), group_residual(&b, Group::SL2R));
        let sum = a.diamond(&b).unwrap();
        let r = group_residual(&sum, Group::SpR(4));
        prop_assert!(r <= 2.0 * ra.max(rb) + 1e-12, "{r} vs {ra}, {rb}");
    }

    #[test]
    fn period_doubling_round_trips(seed in any::<u64>(), x in 0.0..1.0f64) {
        let m = real_map(seed, 2, 2);
        let d = m.to_period2();
        prop_assert!(linalg::max_abs(&(d.eval(x) - m.eval(x))) < 1e-12);
        prop_assert_eq!(d.to_period1(1e-14).unwrap(), m);
    }
}

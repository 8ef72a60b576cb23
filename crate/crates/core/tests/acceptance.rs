//! Acceptance suite: one pass/fail line per criterion. Runs as a plain
//! binary so the lines are always printed; exits non-zero on any failure.

use std::process::ExitCode;
use std::time::Instant;

use cocycle_lab::arithmetic::{cf_expand, AlphaInput, Frequency};
use cocycle_lab::blockdiag_real::{blockdiag_real_auto, off_block_residual, BlockParams};
use cocycle_lab::experiments::{simple_spectrum_probe, ProbeParams};
use cocycle_lab::families;
use cocycle_lab::hermdiag::{
    blockdiag_hsp, canonical_hsp_frame, herm_track, krein_signature_grid, sylvester_inertia, TrackParams,
};
use cocycle_lab::linalg::{self, CMat, C64};
use cocycle_lab::lyapunov::{
    acceleration_profile, lyap_derivative, lyap_spectrum, regularity_classify, AccelParams, SpectrumParams,
};
use cocycle_lab::splitting::{bundle_exponent_sum, dominated_detect, oseledets_bundles, BundleParams, DominationParams};
use cocycle_lab::topology::{symmetry_diagnostics, RotationParams};
use cocycle_lab::trigmat::{fit_trig, group_residual, CocycleSpec, Group, Symmetry, TrigMatrixMap};
use cocycle_lab::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn golden() -> Frequency {
    cf_expand(&AlphaInput::golden(), 30).unwrap()
}

fn spec(map: TrigMatrixMap, group: Group) -> CocycleSpec {
    CocycleSpec::new(golden(), map, group, Symmetry::None).unwrap()
}

/// `S(x + alpha) B(x) S(x)^{-1}` brought back to period 1.
fn conjugated(s: &TrigMatrixMap, b: &TrigMatrixMap, group: Group) -> Result<CocycleSpec> {
    let freq = golden();
    let inv = match group {
        Group::HSp(_) => s.hsp_inverse(),
        _ => s.symplectic_inverse(),
    };
    let b = if s.period() == 2 { b.to_period2() } else { b.clone() };
    let mut a = s.shift(freq.value()).mul(&b)?.mul(&inv)?.to_period1(1e-9)?.truncate(1e-15);
    if group.is_real_symplectic() {
        a.enforce_real();
    }
    CocycleSpec::new(freq, a, group, Symmetry::None)
}

fn symmetry_of_spectra() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let params = SpectrumParams {
        iters: 100_000,
        ..SpectrumParams::default()
    };
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let l1 = rng.gen_range(1.2..3.0);
        let l2 = rng.gen_range(1.0..l1);
        let h = TrigMatrixMap::constant(families::hyperbolic_constant(&[l1, l2]));
        let s = families::random_symplectic_loop(&mut rng, 2, 1, 0.3, 2, 1);
        let sp = spec(h.mul(&s)?, Group::SpR(4));
        worst = worst.max(lyap_spectrum(&sp, 0.0, &params)?.symmetry_defect());
    }
    Ok(Outcome {
        pass: worst < 1e-3,
        detail: format!("max |L_k + L_(5-k)| = {worst:.2e} over 50 specs (tol 1e-3)"),
    })
}

struct SuiteMember {
    name: String,
    spec: CocycleSpec,
    expected_omega1: Option<i64>,
}

fn acceleration_suite() -> Result<Vec<SuiteMember>> {
    let mut out = Vec::new();
    let mut push = |name: String, spec: CocycleSpec, expected_omega1: Option<i64>| {
        out.push(SuiteMember {
            name,
            spec,
            expected_omega1,
        })
    };
    push(
        "diag(2, 1/2)".into(),
        spec(TrigMatrixMap::constant(linalg::diag_real(&[2.0, 0.5])), Group::SL2R),
        Some(0),
    );
    push(
        "constant rotation".into(),
        spec(TrigMatrixMap::constant(linalg::rotation(0.8)), Group::SL2R),
        Some(0),
    );
    push(
        "constant Sp(4) hyperbolic".into(),
        spec(TrigMatrixMap::constant(families::hyperbolic_constant(&[3.0, 1.5])), Group::SpR(4)),
        Some(0),
    );
    for k in 0..=3 {
        push(format!("R_(2 pi {k} x)"), spec(families::rotation_loop(k, 1), Group::SL2R), Some(k));
    }
    let g = families::scalar(&families::real_mode(1, 0.7, -0.4), 1)
        .add(&families::scalar(&families::real_mode(2, 0.2, 0.3), 1))?;
    push("diag(e^g, e^-g)".into(), spec(families::exp_diag(&g, 32)?, Group::SL2R), Some(0));
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for i in 0..10 {
        let lam = rng.gen_range(1.0..3.0);
        let h = TrigMatrixMap::constant(linalg::diag_real(&[lam, 1.0 / lam]));
        let loop_ = families::random_sl2_loop(&mut rng, 1, 0.8, 2);
        push(format!("random SL(2) #{i}"), spec(h.mul(&loop_)?, Group::SL2R), None);
    }
    Ok(out)
}

fn acceleration_quantization() -> Result<Outcome> {
    let params = AccelParams::default();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for m in acceleration_suite()? {
        match acceleration_profile(&m.spec, &params) {
            Ok(profile) => {
                for a in &profile {
                    worst = worst.max(a.residual);
                    if a.residual >= 0.05 {
                        failures.push(format!("{} k={} residual {:.3}", m.name, a.k, a.residual));
                    }
                }
                if let Some(k) = m.expected_omega1 {
                    if profile[0].omega_snapped != k {
                        failures.push(format!("{} snapped to {} (want {k})", m.name, profile[0].omega_snapped));
                    }
                }
            }
            Err(e) => failures.push(format!("{}: {e}", m.name)),
        }
    }
    Ok(Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("max snap residual {worst:.2e} (tol 0.05), rotations snap to k")
        } else {
            failures.join("; ")
        },
    })
}

fn regularity_matches_domination() -> Result<Outcome> {
    let params = AccelParams::default();
    let dom = DominationParams::default();
    let mut checked = 0;
    let mut failures = Vec::new();
    for m in acceleration_suite()? {
        let spectrum = lyap_spectrum(&m.spec, 0.0, &params.spectrum)?;
        for k in 1..m.spec.dim() {
            if (spectrum.exponents[k - 1] - spectrum.exponents[k]).abs() <= 0.05 {
                continue;
            }
            checked += 1;
            let regular = regularity_classify(&m.spec, k, &params)?.regular;
            let dominated = dominated_detect(&m.spec, k, &dom)?.dominated;
            if regular != dominated {
                failures.push(format!("{} k={k}: regular {regular}, dominated {dominated}", m.name));
            }
        }
    }
    Ok(Outcome {
        pass: failures.is_empty() && checked > 0,
        detail: if failures.is_empty() {
            format!("{checked} (spec, k) pairs agree")
        } else {
            failures.join("; ")
        },
    })
}

fn blockdiag_round_trip() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let params = BlockParams::default();
    let mut worst_off = 0.0f64;
    let mut worst_sympl = 0.0f64;
    let mut worst_twist = 0.0f64;
    let mut worst_gauge = 0.0f64;
    let mut failures = Vec::new();
    for i in 0..20 {
        let twisted = i >= 15;
        let mu = rng.gen_range(2.0..4.0);
        let g = families::random_real_scalar(&mut rng, 1, 0.2, 1);
        let hyp = TrigMatrixMap::constant(linalg::diag_real(&[mu, 1.0 / mu])).mul(&families::exp_diag(&g, 24)?)?;
        let center = TrigMatrixMap::constant(linalg::rotation(rng.gen_range(0.2..3.0)))
            .mul(&families::random_sl2_loop(&mut rng, 1, 0.1, 2))?;
        let b = hyp.diamond(&center)?;
        let s0 = families::random_symplectic_loop(&mut rng, 2, 1, 0.25, 2, 1);
        let s = if twisted {
            let half = families::rotation_loop(1, 2).diamond(&TrigMatrixMap::identity(2).to_period2())?;
            s0.to_period2().mul(&half)?
        } else {
            s0
        };
        let sp = conjugated(&s, &b, Group::SpR(4))?;
        let pkg = match blockdiag_real_auto(&sp, 1, &params) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("#{i}: {e}"));
                continue;
            }
        };
        worst_off = worst_off.max(pkg.residual_conj);
        worst_sympl = worst_sympl.max(pkg.residual_sympl);
        let want_chi = if twisted { 2 } else { 1 };
        if pkg.chi != want_chi {
            failures.push(format!("#{i}: chi {} (want {want_chi})", pkg.chi));
        }
        if let Some((rt, rl)) = pkg.twist_residuals {
            worst_twist = worst_twist.max(rt).max(rl);
        } else if twisted {
            failures.push(format!("#{i}: no twist residuals"));
        }
        for (x, t) in pkg.xs.iter().zip(&pkg.t).step_by(16) {
            let gauge = linalg::inverse(&s.eval(*x)).unwrap() * t;
            worst_gauge = worst_gauge.max(off_block_residual(&gauge, 2, 1));
        }
    }
    let pass = failures.is_empty() && worst_off < 1e-6 && worst_sympl < 1e-8 && worst_twist < 1e-6 && worst_gauge < 1e-6;
    Ok(Outcome {
        pass,
        detail: format!(
            "off-block {worst_off:.2e} (tol 1e-6), symplectic {worst_sympl:.2e} (tol 1e-8), \
             twist {worst_twist:.2e}, S^-1 T off-block {worst_gauge:.2e}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    })
}

fn kato_monodromy() -> Result<Outcome> {
    let g = families::swapping_hermitian();
    let t = herm_track(&g, &TrackParams::default())?;
    let s = |x: f64| (std::f64::consts::PI * x).sin();
    let branch = (t.curves[0][0] - 2.0).signum();
    let curve_err = t
        .xs
        .iter()
        .zip(&t.curves)
        .map(|(x, v)| (v[0] - 2.0 - branch * s(*x)).abs().max((v[1] - 2.0 + branch * s(*x)).abs()))
        .fold(0.0, f64::max);
    Ok(Outcome {
        pass: t.k() == 2 && t.monodromy_residual < 1e-6 && curve_err < 1e-8,
        detail: format!(
            "K = {}, |U(x+1) - U(x) Gamma_2| = {:.2e}, curve error {curve_err:.2e}",
            t.k(),
            t.monodromy_residual
        ),
    })
}

/// `I + small` with a random complex degree-1 perturbation, invertible on the circle.
fn random_invertible(rng: &mut ChaCha8Rng, m: usize) -> Result<TrigMatrixMap> {
    loop {
        let mut terms = vec![(0, linalg::eye(m))];
        for k in -1..=1i64 {
            let c = CMat::from_fn(m, m, |_, _| {
                C64::new(rng.gen_range(-0.25..0.25), rng.gen_range(-0.25..0.25))
            });
            terms.push((k, c));
        }
        let v = TrigMatrixMap::from_terms(m, 1, &terms)?;
        let min_sv = v
            .eval_grid(256, 0.0)
            .iter()
            .map(|a| linalg::singular_values(a).last().copied().unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min);
        if min_sv > 0.2 {
            return Ok(v);
        }
    }
}

fn sylvester_inertia_suite() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_period = 0.0f64;
    let mut worst_cong = 0.0f64;
    let mut failures = Vec::new();
    for (p, q) in [(1usize, 1usize), (2, 0), (2, 2), (3, 1)] {
        let m = p + q;
        let mut d = vec![1.0; m];
        d[p..].fill(-1.0);
        let dm = TrigMatrixMap::constant(linalg::diag_real(&d));
        for i in 0..25 {
            let v = random_invertible(&mut rng, m)?;
            let g = v.adjoint().mul(&dm)?.mul(&v)?;
            match sylvester_inertia(&g, &TrackParams::default()) {
                Ok(r) => {
                    if (r.p, r.q) != (p, q) {
                        failures.push(format!("({p},{q}) #{i}: got ({}, {})", r.p, r.q));
                    }
                    worst_period = worst_period.max(r.period_residual);
                    worst_cong = worst_cong.max(r.congruence_residual);
                }
                Err(e) => failures.push(format!("({p},{q}) #{i}: {e}")),
            }
        }
    }
    Ok(Outcome {
        pass: failures.is_empty() && worst_period < 1e-6 && worst_cong < 1e-6,
        detail: format!(
            "100 congruences, period residual {worst_period:.2e}, congruence residual {worst_cong:.2e}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    })
}

/// `L` of a uniformly hyperbolic `SL(2)` cocycle as the grid mean of the
/// expansion along its unstable bundle.
fn bundle_exponent(sp: &CocycleSpec) -> Result<f64> {
    let b = oseledets_bundles(sp, 1, &BundleParams::default())?;
    Ok(bundle_exponent_sum(sp, &b.unstable))
}

fn lemma_gradient() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let step = 1e-4;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let lam = rng.gen_range(2.0..4.0);
        let a = TrigMatrixMap::constant(linalg::diag_real(&[lam, 1.0 / lam]))
            .mul(&families::random_sl2_loop(&mut rng, 1, 0.3, 2))?;
        let sp = spec(a, Group::SL2R);
        let w11 = families::random_real_scalar(&mut rng, 2, 0.5, 1);
        let w12 = families::random_real_scalar(&mut rng, 2, 0.5, 1);
        let w21 = families::random_real_scalar(&mut rng, 2, 0.5, 1);
        let mut terms = Vec::new();
        for k in -2..=2i64 {
            let (a11, a12, a21) = (w11.coeff(k)[(0, 0)], w12.coeff(k)[(0, 0)], w21.coeff(k)[(0, 0)]);
            terms.push((k, CMat::from_row_slice(2, 2, &[a11, a12, a21, -a11])));
        }
        let mut w = TrigMatrixMap::from_terms(2, 1, &terms)?;
        w.enforce_real();
        let formula = lyap_derivative(&sp, &w, &BundleParams::default())?.value;
        let moved = |t: f64| -> Result<CocycleSpec> {
            let samples: Vec<CMat> = (0..512)
                .map(|j| {
                    let x = j as f64 / 512.0;
                    sp.map.eval(x) * linalg::expm_traceless2(&(w.eval(x) * C64::new(t, 0.0)))
                })
                .collect();
            let mut m = fit_trig(&samples, 1, 1e-15)?.map.truncate(1e-16);
            m.enforce_real();
            Ok(sp.with_map(m))
        };
        let fd = (bundle_exponent(&moved(step)?)? - bundle_exponent(&moved(-step)?)?) / (2.0 * step);
        worst = worst.max((formula - fd).abs());
    }
    Ok(Outcome {
        pass: worst < 1e-4,
        detail: format!("max |formula - central difference| = {worst:.2e} over 20 specs (tol 1e-4)"),
    })
}

fn symmetry_class_diagnostics() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let params = RotationParams {
        iters: 1_000_000,
        ..RotationParams::default()
    };
    let tol = 10.0 / (params.iters as f64).sqrt();
    let mut worst_rho = 0.0f64;
    let mut worst_class = 0.0f64;
    let mut degrees = Vec::new();
    for _ in 0..10 {
        let map = families::random_scr_a_member(&mut rng, 3, 0.6, 3);
        let sp = CocycleSpec::new(golden(), map, Group::SL2R, Symmetry::ScrA)?;
        let d = symmetry_diagnostics(&sp, &params)?;
        worst_rho = worst_rho.max(d.two_rho_int_residual.unwrap_or(f64::INFINITY));
        worst_class = worst_class.max(d.class_residual);
        degrees.push(d.degree);
    }
    Ok(Outcome {
        pass: worst_rho < tol && worst_class < 1e-8 && degrees.iter().all(|&d| d == 0),
        detail: format!(
            "|2 rho - n| max {worst_rho:.2e} (tol {tol:.0e}), degrees {degrees:?}, class residual {worst_class:.2e}"
        ),
    })
}

fn density_probe() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let b = TrigMatrixMap::constant(families::hyperbolic_constant(&[1.5, 1.5]));
    let s = families::random_symplectic_loop(&mut rng, 2, 1, 0.1, 2, 1);
    let sp = conjugated(&s, &b, Group::SpR(4))?;
    let r = simple_spectrum_probe(&sp, 1e-2, &ProbeParams::default())?;
    let perturbed = r.perturbed_spec()?;
    let group_ok = group_residual(&perturbed.map, perturbed.group) < 1e-8;
    let regular = r.output.regular.iter().take(2).any(|x| *x);
    Ok(Outcome {
        pass: r.pass && r.gap > 5e-3 && r.perturbation_sup < 5e-2 && group_ok && regular,
        detail: format!(
            "case {:?}, input L1 - L2 = {:.2e}, output L1 - L2 = {:.3e} (> 5e-3), |A~ - A|_0 = {:.3e} (< 5e-2), group residual {:.1e}, regular {regular}",
            r.case,
            r.input.exponents[0] - r.input.exponents[1],
            r.gap,
            r.perturbation_sup,
            r.group_residual
        ),
    })
}

fn krein_center_signature() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let params = BlockParams::default();
    let mut worst_frame = 0.0f64;
    let mut worst_off = 0.0f64;
    let mut failures = Vec::new();
    for i in 0..5 {
        let s = families::random_hsp_loop(&mut rng, 2, 1, 0.25, 2);
        let mu = rng.gen_range(2.0..4.0);
        let phase = C64::from_polar(1.0, rng.gen_range(0.0..6.0));
        let hyp = linalg::diag_c(&[phase * mu, phase / mu]);
        let center = linalg::rotation(rng.gen_range(0.2..3.0)) * C64::from_polar(1.0, rng.gen_range(0.0..6.0));
        let b = TrigMatrixMap::constant(linalg::diamond(&hyp, &center));
        let sp = conjugated(&s, &b, Group::HSp(4))?;
        let bundles = oseledets_bundles(&sp, 1, &params.bundles)?;
        let center_bundle = bundles.center.as_ref().expect("center bundle");
        let signs = krein_signature_grid(center_bundle)?;
        if let Some(bad) = signs.iter().find(|k| !k.canonical()) {
            failures.push(format!("#{i}: center signature {}", bad.sign_difference()));
            continue;
        }
        match canonical_hsp_frame(&bundles.unstable, &bundles.stable, Some(center_bundle)) {
            Ok(f) => worst_frame = worst_frame.max(f.symplectic_residual),
            Err(e) => {
                failures.push(format!("#{i}: {e}"));
                continue;
            }
        }
        match blockdiag_hsp(&sp, &bundles, &params) {
            Ok(p) => worst_off = worst_off.max(p.residual_conj),
            Err(e) => failures.push(format!("#{i}: {e}")),
        }
    }
    Ok(Outcome {
        pass: failures.is_empty() && worst_frame < 1e-6 && worst_off < 1e-6,
        detail: format!(
            "center signature 0 on all grids, frame residual {worst_frame:.2e}, off-block {worst_off:.2e}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    })
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("symplectic spectrum symmetry", symmetry_of_spectra),
        ("acceleration quantization", acceleration_quantization),
        ("regularity matches domination", regularity_matches_domination),
        ("block-diagonalization round trip", blockdiag_round_trip),
        ("Kato monodromy", kato_monodromy),
        ("analytic Sylvester inertia", sylvester_inertia_suite),
        ("derivative formula vs finite difference", lemma_gradient),
        ("symmetry-class diagnostics", symmetry_class_diagnostics),
        ("density probe", density_probe),
        ("Krein center-bundle signature", krein_center_signature),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e}"),
        });
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<40} {}  {} [{:.1}s]",
            i + 1,
            name,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

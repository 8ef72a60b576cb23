//! Ready-made loops and random generators used by tests, examples and the CLI.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::Result;
use crate::linalg::{self, CMat, C64};
use crate::trigmat::{fit_trig_degree, TrigMatrixMap};

/// `R_{2 pi k x / period}`; with `period = 2` and `k = 1` this is the
/// antiperiodic rotation `R_{pi x}`.
pub fn rotation_loop(k: i64, period: u8) -> TrigMatrixMap {
    if k == 0 {
        let mut id = TrigMatrixMap::identity(2);
        if period == 2 {
            id = id.to_period2();
        }
        return id;
    }
    let plus = CMat::from_row_slice(
        2,
        2,
        &[
            C64::new(0.5, 0.0),
            C64::new(0.0, 0.5),
            C64::new(0.0, -0.5),
            C64::new(0.5, 0.0),
        ],
    );
    let minus = plus.map(|z| z.conj());
    TrigMatrixMap::from_terms(2, period, &[(k, plus), (-k, minus)]).expect("2x2")
}

/// Scalar function `x -> f(x)` as a `1 x 1` map.
pub fn scalar(terms: &[(i64, C64)], period: u8) -> TrigMatrixMap {
    let t: Vec<(i64, CMat)> = terms
        .iter()
        .map(|&(k, c)| (k, CMat::from_element(1, 1, c)))
        .collect();
    TrigMatrixMap::from_terms(1, period, &t).expect("1x1")
}

/// Real `cos(2 pi k x)` / `sin(2 pi k x)` combination `a cos + b sin` at mode `k`.
pub fn real_mode(k: i64, a: f64, b: f64) -> Vec<(i64, C64)> {
    if k == 0 {
        return vec![(0, C64::new(a, 0.0))];
    }
    let c = C64::new(a / 2.0, -b / 2.0);
    vec![(k, c), (-k, c.conj())]
}

fn embed(f: &TrigMatrixMap, dim: usize, place: impl Fn(&CMat) -> CMat) -> TrigMatrixMap {
    let terms: Vec<(i64, CMat)> = f.terms().map(|(k, c)| (k, place(c))).collect();
    let mut out = TrigMatrixMap::from_terms(dim, f.period(), &terms).expect("dims");
    if f.real_valued() {
        out.enforce_real();
    }
    out
}

/// `[[1, f], [0, 1]]` for a scalar map `f`.
pub fn upper_unipotent(f: &TrigMatrixMap) -> TrigMatrixMap {
    let id = TrigMatrixMap::identity(2);
    let n = embed(f, 2, |c| {
        let mut m = linalg::zeros(2, 2);
        m[(0, 1)] = c[(0, 0)];
        m
    });
    id.add(&n).expect("2x2")
}

/// `[[1, 0], [f, 1]]` for a scalar map `f`.
pub fn lower_unipotent(f: &TrigMatrixMap) -> TrigMatrixMap {
    let id = TrigMatrixMap::identity(2);
    let n = embed(f, 2, |c| {
        let mut m = linalg::zeros(2, 2);
        m[(1, 0)] = c[(0, 0)];
        m
    });
    id.add(&n).expect("2x2")
}

/// `[[I, S], [0, I]]` for a `d x d` map `S` (symmetric for `Sp`, Hermitian for `HSp`).
pub fn upper_shear(s: &TrigMatrixMap) -> TrigMatrixMap {
    let d = s.dim();
    let id = TrigMatrixMap::identity(2 * d);
    let n = embed(s, 2 * d, |c| {
        let mut m = linalg::zeros(2 * d, 2 * d);
        m.view_mut((0, d), (d, d)).copy_from(c);
        m
    });
    id.add(&n).expect("dims")
}

/// `[[I, 0], [S, I]]`.
pub fn lower_shear(s: &TrigMatrixMap) -> TrigMatrixMap {
    let d = s.dim();
    let id = TrigMatrixMap::identity(2 * d);
    let n = embed(s, 2 * d, |c| {
        let mut m = linalg::zeros(2 * d, 2 * d);
        m.view_mut((d, 0), (d, d)).copy_from(c);
        m
    });
    id.add(&n).expect("dims")
}

/// Samples a smooth function on a fine grid and fits it with the given degree.
pub fn from_fn(
    dim: usize,
    period: u8,
    degree: usize,
    f: impl Fn(f64) -> CMat + Sync,
) -> Result<TrigMatrixMap> {
    let g = (4 * degree.max(1)).next_power_of_two().max(64);
    let p = period as f64;
    let samples: Vec<CMat> = (0..g).map(|j| f(j as f64 * p / g as f64)).collect();
    debug_assert!(samples.iter().all(|m| m.nrows() == dim));
    Ok(fit_trig_degree(&samples, period, degree, 1e-300)?.map)
}

/// `diag(exp(g(x)), exp(-g(x)))` for a real scalar trig polynomial `g`,
/// stored as a degree-`degree` fit (spectrally accurate for smooth `g`).
pub fn exp_diag(g: &TrigMatrixMap, degree: usize) -> Result<TrigMatrixMap> {
    from_fn(2, g.period(), degree, |x| {
        let v = g.eval(x)[(0, 0)].re;
        linalg::diag_real(&[v.exp(), (-v).exp()])
    })
}

fn gaussian_c<R: Rng>(rng: &mut R, amp: f64) -> C64 {
    C64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp))
}

/// Random real scalar trig polynomial with coefficient magnitudes at most `amp`.
pub fn random_real_scalar<R: Rng>(rng: &mut R, degree: usize, amp: f64, period: u8) -> TrigMatrixMap {
    let mut terms = vec![(0, C64::new(rng.gen_range(-amp..amp), 0.0))];
    for k in 1..=degree as i64 {
        let c = gaussian_c(rng, amp / 2.0);
        terms.push((k, c));
        terms.push((-k, c.conj()));
    }
    scalar(&terms, period)
}

/// Real scalar trig polynomial with only odd modes (so `f(x + 1/2) = -f(x)`).
pub fn random_odd_scalar<R: Rng>(rng: &mut R, degree: usize, amp: f64) -> TrigMatrixMap {
    let mut terms = vec![(0, C64::new(0.0, 0.0))];
    for k in (1..=degree as i64).filter(|k| k % 2 == 1) {
        let c = gaussian_c(rng, amp / 2.0);
        terms.push((k, c));
        terms.push((-k, c.conj()));
    }
    scalar(&terms, 1)
}

/// Random real-symmetric-valued `d x d` trig polynomial.
pub fn random_symmetric<R: Rng>(rng: &mut R, d: usize, degree: usize, amp: f64, period: u8) -> TrigMatrixMap {
    let sym = |m: CMat| (&m + m.transpose()) * C64::new(0.5, 0.0);
    let c0 = sym(CMat::from_fn(d, d, |_, _| C64::new(rng.gen_range(-amp..amp), 0.0)));
    let mut terms = vec![(0, c0)];
    for k in 1..=degree as i64 {
        let c = sym(CMat::from_fn(d, d, |_, _| gaussian_c(rng, amp / 2.0)));
        terms.push((-k, c.map(|z| z.conj())));
        terms.push((k, c));
    }
    let mut m = TrigMatrixMap::from_terms(d, period, &terms).expect("dims");
    m.enforce_real();
    m
}

/// Random Hermitian-valued `d x d` trig polynomial.
pub fn random_hermitian<R: Rng>(rng: &mut R, d: usize, degree: usize, amp: f64, period: u8) -> TrigMatrixMap {
    let c0 = CMat::from_fn(d, d, |_, _| gaussian_c(rng, amp));
    let c0 = (&c0 + c0.adjoint()) * C64::new(0.5, 0.0);
    let mut terms = vec![(0, c0)];
    for k in 1..=degree as i64 {
        let c = CMat::from_fn(d, d, |_, _| gaussian_c(rng, amp / 2.0));
        terms.push((-k, c.adjoint()));
        terms.push((k, c));
    }
    TrigMatrixMap::from_terms(d, period, &terms).expect("dims")
}

/// Random real-symplectic loop of dimension `2d`: a product of alternating
/// upper and lower shears, each with symmetric trig-polynomial blocks.
pub fn random_symplectic_loop<R: Rng>(
    rng: &mut R,
    d: usize,
    degree: usize,
    amp: f64,
    factors: usize,
    period: u8,
) -> TrigMatrixMap {
    let mut out = TrigMatrixMap::identity(2 * d);
    if period == 2 {
        out = out.to_period2();
    }
    for f in 0..factors {
        let s = random_symmetric(rng, d, degree, amp, period);
        let shear = if f % 2 == 0 { upper_shear(&s) } else { lower_shear(&s) };
        out = out.mul(&shear).expect("dims");
    }
    out.enforce_real();
    out
}

/// Random Hermitian-symplectic loop built from Hermitian shears.
pub fn random_hsp_loop<R: Rng>(rng: &mut R, d: usize, degree: usize, amp: f64, factors: usize) -> TrigMatrixMap {
    let mut out = TrigMatrixMap::identity(2 * d);
    for f in 0..factors {
        let s = random_hermitian(rng, d, degree, amp, 1);
        let shear = if f % 2 == 0 { upper_shear(&s) } else { lower_shear(&s) };
        out = out.mul(&shear).expect("dims");
    }
    out
}

/// Random `SL(2, R)` loop homotopic to the identity: alternating unipotents.
pub fn random_sl2_loop<R: Rng>(rng: &mut R, degree: usize, amp: f64, factors: usize) -> TrigMatrixMap {
    random_symplectic_loop(rng, 1, degree, amp, factors, 1)
}

/// A member of the half-period twisted class: constant diagonal factors and
/// unipotents whose off-diagonal entries carry only odd modes.
pub fn random_scr_a_member<R: Rng>(rng: &mut R, degree: usize, amp: f64, factors: usize) -> TrigMatrixMap {
    let lam: f64 = rng.gen_range(0.6..1.6);
    let mut out = TrigMatrixMap::constant(linalg::diag_real(&[lam, 1.0 / lam]));
    for f in 0..factors {
        let g = random_odd_scalar(rng, degree.max(1), amp);
        let u = if f % 2 == 0 { upper_unipotent(&g) } else { lower_unipotent(&g) };
        out = out.mul(&u).expect("2x2");
    }
    out.enforce_real();
    out
}

/// `(1/2) V(x) diag(2 + sin pi x, 2 - sin pi x) V(x)^*` with
/// `V = [[e^{i pi x}, -e^{i pi x}], [1, 1]]`: a 1-periodic Hermitian family
/// whose eigenvalue branches are exchanged after one period.
pub fn swapping_hermitian() -> TrigMatrixMap {
    let h = C64::new(0.0, 0.5);
    let z = C64::new(0.0, 0.0);
    let two = C64::new(2.0, 0.0);
    TrigMatrixMap::from_terms(
        2,
        1,
        &[
            (0, CMat::from_row_slice(2, 2, &[two, h, -h, two])),
            (1, CMat::from_row_slice(2, 2, &[z, -h, z, z])),
            (-1, CMat::from_row_slice(2, 2, &[z, z, h, z])),
        ],
    )
    .expect("2x2")
}

/// Hyperbolic constant `diag(l_1, .., l_d, 1/l_1, .., 1/l_d)`.
pub fn hyperbolic_constant(expansions: &[f64]) -> CMat {
    let inv: Vec<f64> = expansions.iter().map(|l| 1.0 / l).collect();
    let all: Vec<f64> = expansions.iter().chain(inv.iter()).copied().collect();
    linalg::diag_real(&all)
}

/// Angle helper for rotation constants, in turns.
pub fn rotation_turns(theta: f64) -> CMat {
    linalg::rotation(2.0 * PI * theta)
}

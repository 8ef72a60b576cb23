//! Perturbation probes: explicit insertions of hyperbolic factors into
//! block-diagonalized cocycles, and the quantitative constants of the
//! Liouvillean scheme.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arithmetic::Frequency;
use crate::blockdiag_real::{blockdiag_real_auto, BlockParams, ConjugacyPackage};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::lyapunov::{acceleration, lyap_spectrum, lyapunov_report, AccelParams, LyapunovReport};
use crate::splitting::dominated_detect;
use crate::topology::{symmetry_diagnostics, RotationParams};
use crate::trigmat::{class_residual, fit_trig_degree, group_residual, CocycleSpec, Group, SpecJson, Symmetry, TrigMatrixMap};

/// Which construction a probe ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeCase {
    /// `omega_1 = 0`, `L_1 > L_2 = 0`.
    I,
    /// `omega_1 = 0`, `L_1 = L_2 > 0`.
    II,
    /// `omega^2 = 0`, `L_1 > L_2 = 0`.
    III,
    /// `omega^2 = 0`, `L_1 = L_2 > 0`.
    IV,
    AlreadySimple,
    Antiself,
    UniformHyperbolicity,
}

/// Exponents and accelerations of one cocycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMeasure {
    pub exponents: Vec<f64>,
    pub stderr: Vec<f64>,
    pub omega: Vec<i64>,
    pub omega_residual: f64,
    pub regular: Vec<bool>,
}

impl ProbeMeasure {
    fn from_report(r: &LyapunovReport) -> Self {
        ProbeMeasure {
            exponents: r.spectrum.exponents.clone(),
            stderr: r.spectrum.stderr.clone(),
            omega: r.accelerations.iter().map(|a| a.omega_snapped).collect(),
            omega_residual: r.accelerations.iter().map(|a| a.residual).fold(0.0, f64::max),
            regular: r.regular.clone(),
        }
    }

    fn gap(&self) -> f64 {
        self.exponents[0] - self.exponents.get(1).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbReport {
    pub case: ProbeCase,
    pub eps: f64,
    /// Strength of the inserted factor actually used.
    pub inserted: f64,
    pub tau: Option<i8>,
    pub input: ProbeMeasure,
    pub output: ProbeMeasure,
    /// `sup_x |A~(x) - A(x)|`.
    pub perturbation_sup: f64,
    /// Same on the boundary of the strip `|Im z| <= strip_h`.
    pub perturbation_strip: f64,
    pub strip_h: f64,
    pub gap: f64,
    pub group_residual: f64,
    pub class_residual: f64,
    pub reducibility_residual: Option<f64>,
    pub gap_ok: bool,
    pub class_ok: bool,
    pub regular_ok: bool,
    pub pass: bool,
    pub perturbed: SpecJson,
}

impl PerturbReport {
    pub fn perturbed_spec(&self) -> Result<CocycleSpec> {
        self.perturbed.clone().into_spec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub accel: AccelParams,
    pub block: BlockParams,
    /// Exponents below `max(zero_tol, 10 stderr)` count as zero, and
    /// differences below it as equal.
    pub zero_tol: f64,
    pub strip_h: f64,
    /// Doublings of the insertion strength allowed by the UH probe.
    pub max_escalations: usize,
    pub reducibility: ReducibilityParams,
    pub rotation: RotationParams,
}

impl Default for ProbeParams {
    fn default() -> Self {
        ProbeParams {
            accel: AccelParams::default(),
            block: BlockParams::default(),
            zero_tol: 2e-3,
            strip_h: 0.05,
            max_escalations: 8,
            reducibility: ReducibilityParams::default(),
            rotation: RotationParams::default(),
        }
    }
}

const CLASS_TOL: f64 = 1e-8;
const FIT_GRID: usize = 512;

fn diff_norms(a: &TrigMatrixMap, b: &TrigMatrixMap, h: f64) -> Result<(f64, f64)> {
    let d = a.sub(b)?;
    let sup = d.sup_norm(FIT_GRID, 0.0);
    let strip = d.sup_norm(FIT_GRID, h).max(d.sup_norm(FIT_GRID, -h));
    Ok((sup, strip))
}

/// Fits `x -> f(x)` sampled on a grid of the map's period.
fn fit_samples(period: u8, real: bool, f: impl Fn(f64) -> CMat + Sync) -> Result<TrigMatrixMap> {
    let g = FIT_GRID * period as usize;
    let p = period as f64;
    let samples: Vec<CMat> = (0..g).into_par_iter().map(|j| f(j as f64 * p / g as f64)).collect();
    let mut map = fit_trig_degree(&samples, period, g / 4, 1e-14)?.map.truncate(1e-15);
    if real {
        map.enforce_real();
    }
    Ok(map)
}

/// `A~ = A * T E T^{-1}` on the map's own circle: conjugating `A~` by `T`
/// gives the block form of `A` multiplied by `E` on the right.
fn insert_factor(spec: &CocycleSpec, pkg: &ConjugacyPackage, e: &CMat) -> Result<TrigMatrixMap> {
    let real = spec.group.is_real_symplectic();
    let t_fit = &pkg.t_fit;
    fit_samples(spec.map.period(), real, |x| {
        let t = t_fit.eval(x);
        let t_inv = if real {
            linalg::real_symplectic_inverse(&t)
        } else {
            linalg::symplectic_inverse(&t)
        };
        spec.map.eval(x) * &t * e * t_inv
    })
}

fn hyperbolic_pair(s: f64) -> CMat {
    linalg::diag_real(&[s.exp(), (-s).exp()])
}

/// `diag(D, D^{-1})` on the hyperbolic half and the identity on the center.
fn lambda_insertion(d: usize, n: usize, s: f64) -> CMat {
    let mut diag = vec![1.0; 2 * d];
    for i in 0..n {
        let v = if i == 0 { s } else if i == 1 { -s } else { 0.0 };
        diag[i] = v.exp();
        diag[d + i] = (-v).exp();
    }
    linalg::diag_real(&diag)
}

/// Hyperbolic factor on the first center pair.
fn center_insertion(d: usize, n: usize, s: f64) -> CMat {
    let mut diag = vec![1.0; 2 * d];
    diag[n] = s.exp();
    diag[d + n] = (-s).exp();
    linalg::diag_real(&diag)
}

fn zero_band(tol: f64, stderr: f64) -> f64 {
    tol.max(10.0 * stderr)
}

/// A perturbed map together with how it was obtained.
struct Candidate {
    perturbed: TrigMatrixMap,
    case: ProbeCase,
    inserted: f64,
    tau: Option<i8>,
    input: ProbeMeasure,
    reducibility_residual: Option<f64>,
    gap_target: f64,
}

impl Candidate {
    /// The input itself, returned when nothing needs to change.
    fn unchanged(spec: &CocycleSpec, case: ProbeCase, input: ProbeMeasure) -> Self {
        Candidate {
            perturbed: spec.map.clone(),
            case,
            inserted: 0.0,
            tau: None,
            input,
            reducibility_residual: None,
            gap_target: 0.0,
        }
    }
}

fn finish(spec: &CocycleSpec, eps: f64, params: &ProbeParams, c: Candidate) -> Result<PerturbReport> {
    let Candidate {
        perturbed,
        case,
        inserted,
        tau,
        input,
        reducibility_residual,
        gap_target,
    } = c;
    let (perturbation_sup, perturbation_strip) = diff_norms(&perturbed, &spec.map, params.strip_h)?;
    let new_spec = spec.with_map(perturbed);
    let group_res = group_residual(&new_spec.map, new_spec.group);
    let class_res = class_residual(&new_spec.map, new_spec.symmetry);
    let out_report = lyapunov_report(&new_spec, &params.accel)?;
    let output = ProbeMeasure::from_report(&out_report);
    let gap = if spec.dim() == 2 { output.exponents[0] } else { output.gap() };
    let regular_ok = output.regular.iter().take(2).any(|r| *r);
    let gap_ok = gap >= gap_target;
    let class_ok = group_res < CLASS_TOL && class_res < CLASS_TOL;
    Ok(PerturbReport {
        case,
        eps,
        inserted,
        tau,
        input,
        output,
        perturbation_sup,
        perturbation_strip,
        strip_h: params.strip_h,
        gap,
        group_residual: group_res,
        class_residual: class_res,
        reducibility_residual,
        gap_ok,
        class_ok,
        regular_ok,
        pass: gap_ok && class_ok && regular_ok,
        perturbed: new_spec.to_json(),
    })
}

/// Splits an `Sp(4, R)` cocycle's exponents by inserting a hyperbolic factor
/// into the block that carries the degeneracy.
pub fn simple_spectrum_probe(spec: &CocycleSpec, eps: f64, params: &ProbeParams) -> Result<PerturbReport> {
    if spec.group != Group::SpR(4) {
        return Err(Error::Precondition("simple spectrum probe expects Sp(4, R)".into()));
    }
    let report = lyapunov_report(spec, &params.accel)?;
    let input = ProbeMeasure::from_report(&report);
    let (l1, l2) = (input.exponents[0], input.exponents[1]);
    let band = zero_band(params.zero_tol, input.stderr[0].max(input.stderr[1]));
    if l2 > band && l1 - l2 > band {
        return finish(spec, eps, params, Candidate::unchanged(spec, ProbeCase::AlreadySimple, input));
    }
    let a1 = &report.accelerations[0];
    let a2 = &report.accelerations[1];
    let reg1 = a1.quantized && a1.omega_snapped == 0;
    let reg2 = a2.quantized && a2.omega_snapped == 0;
    if !reg1 && !reg2 {
        return Err(Error::NoRegularDirection(a1.omega_snapped, a2.omega_snapped));
    }
    if l1 <= band {
        return Err(Error::Precondition("L_1 > 0 is required".into()));
    }
    let center_zero = l2 <= band;
    let case = match (center_zero, reg1) {
        (true, true) => ProbeCase::I,
        (true, false) => ProbeCase::III,
        (false, true) => ProbeCase::II,
        (false, false) => ProbeCase::IV,
    };
    let (n, e) = if center_zero {
        (1, center_insertion(2, 1, eps))
    } else {
        (2, lambda_insertion(2, 2, eps))
    };
    let pkg = blockdiag_real_auto(spec, n, &params.block)?;
    let perturbed = insert_factor(spec, &pkg, &e)?;
    // the inserted factor splits the pair by 2 eps for equal blocks; demand 90% of eps
    finish(
        spec,
        eps,
        params,
        Candidate {
            perturbed,
            case,
            inserted: eps,
            tau: Some(pkg.tau),
            input,
            reducibility_residual: None,
            gap_target: 0.9 * eps,
        },
    )
}

/// Inserts hyperbolic factors at the deepest dominated index until the
/// cocycle is uniformly hyperbolic.
pub fn uh_density_probe(spec: &CocycleSpec, eps: f64, params: &ProbeParams) -> Result<PerturbReport> {
    if !spec.group.is_real_symplectic() {
        return Err(Error::Precondition("UH probe expects a real symplectic cocycle".into()));
    }
    let d = spec.dim() / 2;
    let report = lyapunov_report(spec, &params.accel)?;
    let input = ProbeMeasure::from_report(&report);
    if !report.regular.iter().all(|r| *r) {
        let w = |k: usize| report.accelerations.get(k).map_or(0, |a| a.omega_snapped);
        return Err(Error::NoRegularDirection(w(0), w(1)));
    }
    let dom = &params.block.bundles.domination;
    if dominated_detect(spec, d, dom)?.dominated {
        return finish(spec, eps, params, Candidate::unchanged(spec, ProbeCase::UniformHyperbolicity, input));
    }
    let mut current = spec.clone();
    let mut strength = eps;
    let mut tau = None;
    for _ in 0..=params.max_escalations {
        let deepest = (1..d)
            .rev()
            .find(|&n| dominated_detect(&current, n, dom).map(|r| r.dominated).unwrap_or(false));
        let next = match deepest {
            Some(n) => {
                let pkg = blockdiag_real_auto(&current, n, &params.block)?;
                tau = Some(pkg.tau);
                let mut e = linalg::eye(2 * d);
                for i in n..d {
                    e[(i, i)] = C64::new(strength.exp(), 0.0);
                    e[(d + i, d + i)] = C64::new((-strength).exp(), 0.0);
                }
                insert_factor(&current, &pkg, &e)?
            }
            None => {
                let e = lambda_insertion(d, d, strength);
                current.map.mul(&TrigMatrixMap::constant(e))?
            }
        };
        let candidate = current.with_map(next);
        if dominated_detect(&candidate, d, dom)?.dominated {
            current = candidate;
            break;
        }
        strength *= 2.0;
    }
    finish(
        spec,
        eps,
        params,
        Candidate {
            perturbed: current.map.clone(),
            case: ProbeCase::UniformHyperbolicity,
            inserted: strength,
            tau,
            input,
            reducibility_residual: None,
            gap_target: 0.0,
        },
    )
    .map(|mut r| {
        let uh = dominated_detect(&current, d, dom).map(|x| x.dominated).unwrap_or(false);
        r.gap_ok = uh;
        r.pass = r.pass && uh;
        r
    })
}

/// Controls for the bounded-degree reduction to a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducibilityParams {
    pub degree: usize,
    pub grid: usize,
    pub sweeps: usize,
    pub tol: f64,
}

impl Default for ReducibilityParams {
    fn default() -> Self {
        ReducibilityParams {
            degree: 8,
            grid: 128,
            sweeps: 30,
            tol: 1e-3,
        }
    }
}

/// `B(x + alpha)^{-1} Lambda(x) B(x) ≈ C` with `B = I + (bounded-degree terms)`.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub b: TrigMatrixMap,
    pub c: CMat,
    pub residual: f64,
}

/// Trig basis respecting the twisted symmetry: diagonal entries carry even
/// modes and off-diagonal entries odd modes when a class is prescribed.
fn reduction_basis(class: Symmetry, degree: usize) -> Vec<(usize, usize, usize, bool)> {
    let mut out = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            for k in 1..=degree {
                let allowed = match class {
                    Symmetry::None => true,
                    _ => (k % 2 == 0) == (i == j),
                };
                if allowed {
                    out.push((i, j, k, true));
                    out.push((i, j, k, false));
                }
            }
        }
    }
    out
}

fn basis_value(k: usize, cos: bool, x: f64, period: f64) -> f64 {
    let arg = 2.0 * std::f64::consts::PI * k as f64 * x / period;
    if cos {
        arg.cos()
    } else {
        arg.sin()
    }
}

fn real_matrix(m: &CMat) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re)
}

/// Alternating least squares for `Lambda(x) B(x) = B(x + alpha) C`.
pub fn reduce_to_constant(spec: &CocycleSpec, params: &ReducibilityParams) -> Result<Reduction> {
    if spec.dim() != 2 || !spec.map.real_valued() {
        return Err(Error::Precondition("reduction expects a real 2x2 cocycle".into()));
    }
    let period = spec.map.period();
    let p = period as f64;
    let alpha = spec.alpha();
    let basis = reduction_basis(spec.symmetry, params.degree);
    let g = params.grid.max(4 * params.degree + 4) * period as usize;
    let xs: Vec<f64> = (0..g).map(|j| j as f64 * p / g as f64).collect();
    let lam: Vec<DMatrix<f64>> = xs.iter().map(|&x| real_matrix(&spec.map.eval(x))).collect();
    let eval_b = |theta: &DVector<f64>, x: f64| -> DMatrix<f64> {
        let mut b = DMatrix::<f64>::identity(2, 2);
        for (u, &(i, j, k, cos)) in basis.iter().enumerate() {
            b[(i, j)] += theta[u] * basis_value(k, cos, x, p);
        }
        b
    };
    let project = |c: DMatrix<f64>| -> DMatrix<f64> {
        let mut c = if spec.symmetry == Symmetry::None {
            c
        } else {
            DMatrix::from_diagonal(&c.diagonal())
        };
        let det = c.determinant();
        if det.abs() > 1e-12 {
            c /= det.abs().sqrt();
        }
        c
    };
    let mean = lam.iter().fold(DMatrix::<f64>::zeros(2, 2), |a, l| a + l) / g as f64;
    let mut c = project(mean);
    let mut theta = DVector::<f64>::zeros(basis.len());
    let residual_of = |theta: &DVector<f64>, c: &DMatrix<f64>| -> f64 {
        xs.iter()
            .zip(&lam)
            .map(|(&x, l)| {
                let b_next = eval_b(theta, x + alpha);
                match b_next.try_inverse() {
                    Some(inv) => (inv * l * eval_b(theta, x) - c).abs().max(),
                    None => f64::INFINITY,
                }
            })
            .fold(0.0, f64::max)
    };
    let mut residual = residual_of(&theta, &c);
    for _ in 0..params.sweeps {
        let rows = 4 * g;
        let mut m = DMatrix::<f64>::zeros(rows, basis.len());
        let mut rhs = DVector::<f64>::zeros(rows);
        for (gi, (&x, l)) in xs.iter().zip(&lam).enumerate() {
            let base = l - &c;
            for (u, &(i, j, k, cos)) in basis.iter().enumerate() {
                let mut phi = DMatrix::<f64>::zeros(2, 2);
                phi[(i, j)] = basis_value(k, cos, x, p);
                let mut phi_next = DMatrix::<f64>::zeros(2, 2);
                phi_next[(i, j)] = basis_value(k, cos, x + alpha, p);
                let col = l * phi - phi_next * &c;
                for r in 0..4 {
                    m[(4 * gi + r, u)] = col[(r / 2, r % 2)];
                }
            }
            for r in 0..4 {
                rhs[4 * gi + r] = -base[(r / 2, r % 2)];
            }
        }
        let svd = m.svd(true, true);
        theta = svd
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Precondition(format!("least squares failed: {e}")))?;
        let acc = xs.iter().zip(&lam).try_fold(DMatrix::<f64>::zeros(2, 2), |a, (&x, l)| {
            eval_b(&theta, x + alpha)
                .try_inverse()
                .map(|inv| a + inv * l * eval_b(&theta, x))
                .ok_or(Error::ReducibilityFailed(f64::INFINITY))
        })?;
        c = project(acc / g as f64);
        let next = residual_of(&theta, &c);
        let stalled = (residual - next).abs() < 1e-14;
        residual = next;
        if stalled {
            break;
        }
    }
    if !(residual <= params.tol) {
        return Err(Error::ReducibilityFailed(residual));
    }
    let mut terms: Vec<(i64, CMat)> = vec![(0, linalg::eye(2))];
    for (u, &(i, j, k, cos)) in basis.iter().enumerate() {
        // cos = (e^+ + e^-)/2, sin = (e^+ - e^-)/(2i)
        let (plus, minus) = if cos {
            (C64::new(theta[u] / 2.0, 0.0), C64::new(theta[u] / 2.0, 0.0))
        } else {
            (C64::new(0.0, -theta[u] / 2.0), C64::new(0.0, theta[u] / 2.0))
        };
        let mut mp = linalg::zeros(2, 2);
        mp[(i, j)] = plus;
        let mut mm = linalg::zeros(2, 2);
        mm[(i, j)] = minus;
        terms.push((k as i64, mp));
        terms.push((-(k as i64), mm));
    }
    let mut b = TrigMatrixMap::from_terms(2, period, &terms)?;
    b.enforce_real();
    Ok(Reduction {
        b,
        c: CMat::from_fn(2, 2, |i, j| C64::new(c[(i, j)], 0.0)),
        residual,
    })
}

/// Positive exponent inside a twisted symmetry class: reduce toward a
/// constant, insert `diag(e^eps, e^-eps)` in the reduced frame, map back.
pub fn antiself_positivity_probe(spec: &CocycleSpec, eps: f64, params: &ProbeParams) -> Result<PerturbReport> {
    if spec.group != Group::SL2R || spec.symmetry == Symmetry::None {
        return Err(Error::Precondition("expects an SL(2, R) cocycle in a twisted class".into()));
    }
    let diag = symmetry_diagnostics(spec, &params.rotation)?;
    if !diag.passes {
        return Err(Error::Precondition(format!(
            "symmetry diagnostics fail (degree {}, class residual {:.2e})",
            diag.degree, diag.class_residual
        )));
    }
    let accel = acceleration(spec, 1, &params.accel)?;
    if !(accel.quantized && accel.omega_snapped == 0) {
        return Err(Error::Precondition(format!("omega = {} is not zero", accel.omega_raw)));
    }
    let spectrum = lyap_spectrum(spec, 0.0, &params.accel.spectrum)?;
    let input = ProbeMeasure {
        exponents: spectrum.exponents.clone(),
        stderr: spectrum.stderr.clone(),
        omega: vec![accel.omega_snapped, 0],
        omega_residual: accel.residual,
        regular: vec![true, true],
    };
    let red = reduce_to_constant(spec, &params.reducibility)?;
    let d = hyperbolic_pair(eps);
    let perturbed = fit_samples(spec.map.period(), true, |x| {
        let b = red.b.eval(x);
        let b_inv = linalg::inverse(&b).unwrap_or_else(|| linalg::eye(2));
        spec.map.eval(x) * &b * &d * b_inv
    })?;
    finish(
        spec,
        eps,
        params,
        Candidate {
            perturbed,
            case: ProbeCase::Antiself,
            inserted: eps,
            tau: None,
            input,
            reducibility_residual: Some(red.residual),
            gap_target: eps / 2.0,
        },
    )
}

/// One row of the Liouvillean scheme's constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleanRecord {
    pub n: usize,
    pub q_n: u128,
    pub epsilon_n: f64,
    pub delta_n: f64,
    pub h: f64,
}

/// `eps_n = 2 exp(2 pi h_* / (1 + alpha)) exp(-delta' q_n / 2)`,
/// `delta_n = h_* / 2^n`, `h = h_* / (2 (1 + alpha))` for `n = 1..=M`.
pub fn liouvillean_constants(freq: &Frequency, h_star: f64, delta_prime: f64) -> Result<Vec<LiouvilleanRecord>> {
    let have = freq.convergents.len().saturating_sub(1);
    if have < 3 {
        return Err(Error::InsufficientDepth { needed: 3, have });
    }
    if !(h_star > 0.0 && delta_prime > 0.0) {
        return Err(Error::Precondition("h_* and delta' must be positive".into()));
    }
    let alpha = freq.value();
    let h = h_star / (2.0 * (1.0 + alpha));
    let pre = 2.0 * (2.0 * std::f64::consts::PI * h_star / (1.0 + alpha)).exp();
    Ok((1..=have)
        .map(|n| {
            let q_n = freq.q(n);
            LiouvilleanRecord {
                n,
                q_n,
                epsilon_n: pre * (-0.5 * delta_prime * q_n as f64).exp(),
                delta_n: h_star / 2f64.powi(n as i32),
                h,
            }
        })
        .collect())
}

pub const DEFAULT_DELTA_PRIME: f64 = 0.1;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{cf_expand, AlphaInput};

    #[test]
    fn golden_constants() {
        let f = cf_expand(&AlphaInput::golden(), 12).unwrap();
        let recs = liouvillean_constants(&f, 0.5, DEFAULT_DELTA_PRIME).unwrap();
        assert_eq!(recs[0].delta_n, 0.25);
        assert_eq!(recs[1].delta_n, 0.125);
        for w in recs[2..].windows(2) {
            assert!(w[1].epsilon_n < w[0].epsilon_n && w[1].epsilon_n > 0.0);
        }
        let shallow = Frequency::from_partial_quotients(&[1, 1]).unwrap();
        assert!(matches!(
            liouvillean_constants(&shallow, 0.5, DEFAULT_DELTA_PRIME),
            Err(Error::InsufficientDepth { .. })
        ));
    }

    #[test]
    fn identity_in_class_gets_exact_insertion() {
        let f = cf_expand(&AlphaInput::golden(), 30).unwrap();
        let spec = CocycleSpec::new(f, TrigMatrixMap::identity(2), Group::SL2R, Symmetry::ScrA).unwrap();
        let params = ProbeParams::default();
        let r = antiself_positivity_probe(&spec, 0.01, &params).unwrap();
        assert!(r.reducibility_residual.unwrap() < 1e-12);
        let want = hyperbolic_pair(0.01);
        let got = r.perturbed_spec().unwrap().map.eval(0.3);
        assert!(linalg::max_abs(&(got - want)) < 1e-12);
        assert!((r.output.exponents[0] - 0.01).abs() < 1e-6);
        assert!(r.pass);
    }
}

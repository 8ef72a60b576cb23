//! Lyapunov spectra by QR re-orthonormalization, complexified exponents
//! `L^k(y)`, acceleration estimates and regularity classification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::splitting::{oseledets_bundles, BundleParams, FrameGrid};
use crate::trigmat::{CocycleSpec, Evaluator, Group, TrigMatrixMap};

/// Iteration controls shared by every exponent estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    pub iters: usize,
    pub orbits: usize,
    pub seed: u64,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams {
            iters: 20_000,
            orbits: 8,
            seed: 0,
        }
    }
}

/// Exponents along `Im z = y`, sorted in decreasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub y: f64,
    pub exponents: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `L^k = L_1 + ... + L_k` for `k = 1..m`.
    pub cumulative: Vec<f64>,
    pub cumulative_stderr: Vec<f64>,
    pub params: SpectrumParams,
}

impl Spectrum {
    /// `L^k`, with `L^0 = 0`.
    pub fn upper(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    pub fn upper_stderr(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.cumulative_stderr[k - 1]
        }
    }

    /// Largest violation of `L_1 >= L_2 >= ...` beyond twice the stderr.
    pub fn ordering_defect(&self) -> f64 {
        self.exponents
            .windows(2)
            .zip(self.stderr.windows(2))
            .map(|(l, s)| (l[1] - l[0] - 2.0 * (s[0] + s[1])).max(0.0))
            .fold(0.0, f64::max)
    }

    /// `max_k |L_k + L_{m+1-k}|`.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.exponents.len();
        (0..m)
            .map(|k| (self.exponents[k] + self.exponents[m - 1 - k]).abs())
            .fold(0.0, f64::max)
    }
}

/// Column-major small complex matrix product `out = a * b` (all `m x m`).
fn matmul(m: usize, a: &[C64], b: &[C64], out: &mut [C64]) {
    for j in 0..m {
        for i in 0..m {
            let mut s = ZERO;
            for l in 0..m {
                s += a[i + l * m] * b[l + j * m];
            }
            out[i + j * m] = s;
        }
    }
}

/// Modified Gram-Schmidt on the columns of `w` (in place); writes `ln r_jj`.
/// Returns `false` if a column collapses.
fn mgs(m: usize, w: &mut [C64], logs: &mut [f64]) -> bool {
    for j in 0..m {
        for i in 0..j {
            let (head, tail) = w.split_at_mut(j * m);
            let qi = &head[i * m..(i + 1) * m];
            let wj = &mut tail[..m];
            let mut dot = ZERO;
            for r in 0..m {
                dot += qi[r].conj() * wj[r];
            }
            for r in 0..m {
                wj[r] -= qi[r] * dot;
            }
        }
        let col = &mut w[j * m..(j + 1) * m];
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 1e-300) || !norm.is_finite() {
            return false;
        }
        logs[j] = norm.ln();
        let inv = 1.0 / norm;
        col.iter_mut().for_each(|z| *z *= inv);
    }
    true
}

/// Random unitary (or orthogonal, if `real`) starting frame.
pub(crate) fn random_frame<R: Rng>(rng: &mut R, m: usize, real: bool) -> Vec<C64> {
    loop {
        let mut w: Vec<C64> = (0..m * m)
            .map(|_| {
                let re = rng.gen_range(-1.0..1.0);
                let im = if real { 0.0 } else { rng.gen_range(-1.0..1.0) };
                C64::new(re, im)
            })
            .collect();
        let mut logs = vec![0.0; m];
        if mgs(m, &mut w, &mut logs) && logs.iter().all(|l| *l > -10.0) {
            return w;
        }
    }
}

/// One orbit of the QR algorithm; returns the summed logs per column.
fn orbit_logs(
    ev: &Evaluator,
    alpha: f64,
    period: f64,
    x0: f64,
    frame: &[C64],
    iters: usize,
) -> Result<Vec<f64>> {
    let m = ev.dim();
    let mut a = vec![ZERO; m * m];
    let mut q = frame.to_vec();
    let mut w = vec![ZERO; m * m];
    let mut logs = vec![0.0; m];
    let mut acc = vec![0.0; m];
    // the frame relaxes onto the Oseledets flag during an unrecorded burn-in
    let burn = iters / 10;
    for j in 0..burn + iters {
        let x = (x0 + j as f64 * alpha).rem_euclid(period);
        ev.eval_into(x, &mut a);
        matmul(m, &a, &q, &mut w);
        if !mgs(m, &mut w, &mut logs) {
            return Err(Error::Degenerate(j));
        }
        if j >= burn {
            for (s, l) in acc.iter_mut().zip(&logs) {
                *s += l;
            }
        }
        std::mem::swap(&mut q, &mut w);
    }
    Ok(acc)
}

fn mean_stderr(samples: &[Vec<f64>], idx: usize) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s[idx]).sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s[idx] - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Full Lyapunov spectrum of the cocycle `x -> A(x + iy)`.
///
/// Phases and starting frames depend only on `seed`, so spectra at
/// different heights share them.
pub fn lyap_spectrum(spec: &CocycleSpec, y: f64, params: &SpectrumParams) -> Result<Spectrum> {
    if params.iters < 1000 {
        return Err(Error::Precondition(format!(
            "need at least 1000 iterations, got {}",
            params.iters
        )));
    }
    lyap_spectrum_unchecked(spec, y, params)
}

/// As [`lyap_spectrum`] without the minimum-iteration guard.
pub fn lyap_spectrum_unchecked(
    spec: &CocycleSpec,
    y: f64,
    params: &SpectrumParams,
) -> Result<Spectrum> {
    let m = spec.dim();
    let orbits = params.orbits.max(1);
    let period = spec.map.period_f64();
    let real = spec.map.real_valued();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let starts: Vec<(f64, Vec<C64>)> = (0..orbits)
        .map(|_| (rng.gen_range(0.0..period), random_frame(&mut rng, m, real)))
        .collect();
    let ev = spec.map.evaluator(y);
    let alpha = spec.alpha();
    let per_orbit: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|(x0, f)| {
            let mut v = orbit_logs(&ev, alpha, period, *x0, f, params.iters)?;
            v.iter_mut().for_each(|s| *s /= params.iters as f64);
            v.sort_by(|a, b| b.total_cmp(a));
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let cumulative_orbits: Vec<Vec<f64>> = per_orbit
        .iter()
        .map(|v| {
            v.iter()
                .scan(0.0, |s, x| {
                    *s += x;
                    Some(*s)
                })
                .collect()
        })
        .collect();
    let (exponents, stderr): (Vec<f64>, Vec<f64>) =
        (0..m).map(|k| mean_stderr(&per_orbit, k)).unzip();
    let (cumulative, cumulative_stderr): (Vec<f64>, Vec<f64>) =
        (0..m).map(|k| mean_stderr(&cumulative_orbits, k)).unzip();
    Ok(Spectrum {
        y,
        exponents,
        stderr,
        cumulative,
        cumulative_stderr,
        params: *params,
    })
}

/// Controls for acceleration estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccelParams {
    /// Strictly decreasing positive heights.
    pub heights: Vec<f64>,
    pub spectrum: SpectrumParams,
    pub snap_tol: f64,
    pub r2_min: f64,
}

impl AccelParams {
    /// Heights `h0 / 2^j` for `j = 0..count`.
    pub fn geometric(h0: f64, count: usize) -> Vec<f64> {
        (0..count).map(|j| h0 / 2f64.powi(j as i32)).collect()
    }
}

impl Default for AccelParams {
    fn default() -> Self {
        AccelParams {
            heights: Self::geometric(0.05, 6),
            spectrum: SpectrumParams {
                iters: 10_000,
                ..SpectrumParams::default()
            },
            snap_tol: 0.05,
            r2_min: 1.0 - 1e-4,
        }
    }
}

/// Slope estimate of `y -> L^k(y) / (2 pi)` near `0+`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acceleration {
    pub k: usize,
    pub omega_raw: f64,
    pub omega_snapped: i64,
    pub residual: f64,
    pub quantized: bool,
    /// Heights actually used (after shrinking), with `L^k` at `0` and each.
    pub heights: Vec<f64>,
    pub values: Vec<f64>,
    pub r2: f64,
    pub max_deviation: f64,
}

struct LineFit {
    slope: f64,
    r2: f64,
    max_dev: f64,
}

fn line_fit(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let max_dev = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    LineFit { slope, r2, max_dev }
}

/// Spectra at `0` and at each signed height, computed in parallel with
/// common phases.
pub fn height_spectra(spec: &CocycleSpec, heights: &[f64], params: &SpectrumParams) -> Result<Vec<Spectrum>> {
    let mut ys = vec![0.0];
    ys.extend_from_slice(heights);
    ys.par_iter()
        .map(|&y| lyap_spectrum_unchecked(spec, y, params))
        .collect()
}

fn accel_from_spectra(k: usize, spectra: &[Spectrum], sign: f64, p: &AccelParams) -> Result<Acceleration> {
    let all_heights: Vec<f64> = spectra[1..].iter().map(|s| s.y.abs()).collect();
    let mut used = all_heights.len();
    let mut best_r2 = f64::NEG_INFINITY;
    while used >= 3 {
        // heights are decreasing, so drop from the front (largest first)
        let skip = all_heights.len() - used;
        let mut xs = vec![0.0];
        let mut vals = vec![spectra[0].upper(k)];
        let mut err = spectra[0].upper_stderr(k);
        for s in &spectra[1 + skip..] {
            xs.push(s.y.abs());
            vals.push(s.upper(k));
            err = err.max(s.upper_stderr(k));
        }
        let fit = line_fit(&xs, &vals);
        best_r2 = best_r2.max(fit.r2);
        let affine = fit.r2 >= p.r2_min || fit.max_dev <= 10.0 * err + 1e-6;
        if affine {
            let omega_raw = sign * fit.slope / (2.0 * std::f64::consts::PI);
            let omega_snapped = omega_raw.round() as i64;
            let residual = (omega_raw - omega_snapped as f64).abs();
            return Ok(Acceleration {
                k,
                omega_raw,
                omega_snapped,
                residual,
                quantized: residual <= p.snap_tol,
                heights: xs[1..].to_vec(),
                values: vals,
                r2: fit.r2,
                max_deviation: fit.max_dev,
            });
        }
        used -= 1;
    }
    Err(Error::NoAffineWindow { best_r2 })
}

fn validate_heights(h: &[f64]) -> Result<()> {
    if h.len() < 3 {
        return Err(Error::Precondition("need at least 3 heights".into()));
    }
    if h.iter().any(|x| !(*x > 0.0)) || h.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition(
            "heights must be positive and strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// `omega^k` from the right-sided slope of `L^k(A(. + iy))`.
pub fn acceleration(spec: &CocycleSpec, k: usize, params: &AccelParams) -> Result<Acceleration> {
    check_k(spec, k)?;
    validate_heights(&params.heights)?;
    let spectra = height_spectra(spec, &params.heights, &params.spectrum)?;
    accel_from_spectra(k, &spectra, 1.0, params)
}

/// Accelerations for every `k = 1..m` from one set of spectra.
pub fn acceleration_profile(spec: &CocycleSpec, params: &AccelParams) -> Result<Vec<Acceleration>> {
    validate_heights(&params.heights)?;
    let spectra = height_spectra(spec, &params.heights, &params.spectrum)?;
    (1..=spec.dim())
        .map(|k| accel_from_spectra(k, &spectra, 1.0, params))
        .collect()
}

fn check_k(spec: &CocycleSpec, k: usize) -> Result<()> {
    if k == 0 || k > spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "k = {k} outside 1..={}",
            spec.dim()
        )));
    }
    Ok(())
}

/// Regularity verdict for one index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regularity {
    pub k: usize,
    pub regular: bool,
    pub omega_right: Acceleration,
    /// Left-sided slope, computed only for groups without a real structure.
    pub omega_left: Option<Acceleration>,
}

/// `k`-regularity: `omega^k = 0` for real symplectic groups, two-sided
/// slope agreement at `y = 0` otherwise.
pub fn regularity_classify(spec: &CocycleSpec, k: usize, params: &AccelParams) -> Result<Regularity> {
    let right = acceleration(spec, k, params)?;
    if spec.group.is_real_symplectic() {
        return Ok(Regularity {
            k,
            regular: right.quantized && right.omega_snapped == 0,
            omega_right: right,
            omega_left: None,
        });
    }
    let neg: Vec<f64> = params.heights.iter().map(|h| -h).collect();
    let spectra = height_spectra(spec, &neg, &params.spectrum)?;
    // slope towards 0- expressed in the same orientation as the right side
    let left = accel_from_spectra(k, &spectra, -1.0, params)?;
    let regular = (right.omega_raw - left.omega_raw).abs() <= params.snap_tol;
    Ok(Regularity {
        k,
        regular,
        omega_right: right,
        omega_left: Some(left),
    })
}

/// Exponents at `y = 0` together with all accelerations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub spectrum: Spectrum,
    pub accelerations: Vec<Acceleration>,
    /// `omega_k = omega^k - omega^{k-1}` (snapped values).
    pub omega_increments: Vec<i64>,
    pub regular: Vec<bool>,
    pub ordering_defect: f64,
    pub symmetry_defect: Option<f64>,
    pub params: AccelParams,
}

pub fn lyapunov_report(spec: &CocycleSpec, params: &AccelParams) -> Result<LyapunovReport> {
    validate_heights(&params.heights)?;
    let spectra = height_spectra(spec, &params.heights, &params.spectrum)?;
    let accelerations = (1..=spec.dim())
        .map(|k| accel_from_spectra(k, &spectra, 1.0, params))
        .collect::<Result<Vec<_>>>()?;
    let mut prev = 0;
    let omega_increments = accelerations
        .iter()
        .map(|a| {
            let d = a.omega_snapped - prev;
            prev = a.omega_snapped;
            d
        })
        .collect();
    let regular = if spec.group.is_real_symplectic() {
        accelerations
            .iter()
            .map(|a| a.quantized && a.omega_snapped == 0)
            .collect()
    } else {
        (1..=spec.dim())
            .map(|k| regularity_classify(spec, k, params).map(|r| r.regular))
            .collect::<Result<Vec<_>>>()?
    };
    let spectrum = spectra[0].clone();
    let symmetry_defect = matches!(spec.group, Group::SpR(_) | Group::HSp(_) | Group::SL2R | Group::SL2C)
        .then(|| spectrum.symmetry_defect());
    Ok(LyapunovReport {
        ordering_defect: spectrum.ordering_defect(),
        spectrum,
        accelerations,
        omega_increments,
        regular,
        symmetry_defect,
        params: params.clone(),
    })
}

/// First-order variation of the top exponent of an `SL(2)` cocycle along
/// `t -> A e^{t w}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub value: f64,
    pub grid: usize,
    pub bundle_iters: usize,
    /// Largest `|det [u s]|^{-1}` seen on the grid (conditioning of the splitting).
    pub max_inverse_det: f64,
}

/// `Re int (q1 w1 + q2 w2 + q3 w3)` with `w = [[w1, w2], [w3, -w1]]` and
/// `q1 = ad + bc`, `q2 = cd`, `q3 = -ab` read off the normalised
/// diagonalising frame `B = [[a, b], [c, d]] = [u s]`, `det B = 1`.
pub fn lyap_derivative_with_frames(
    eu: &FrameGrid,
    es: &FrameGrid,
    w: &TrigMatrixMap,
) -> Result<(f64, f64)> {
    eu.same_grid(es)?;
    if eu.ambient() != 2 || eu.rank() != 1 || w.dim() != 2 {
        return Err(Error::DimensionMismatch("2x2 cocycle with line bundles expected".into()));
    }
    let g = eu.len();
    let mut total = 0.0;
    let mut worst = 0.0f64;
    for j in 0..g {
        let u = &eu.frames[j];
        let s = &es.frames[j];
        let det = u[(0, 0)] * s[(1, 0)] - u[(1, 0)] * s[(0, 0)];
        if det.norm() < 1e-12 {
            return Err(Error::NotUH);
        }
        worst = worst.max(1.0 / det.norm());
        let (a, c) = (u[(0, 0)], u[(1, 0)]);
        let (b, d) = (s[(0, 0)] / det, s[(1, 0)] / det);
        let q1 = a * d + b * c;
        let q2 = c * d;
        let q3 = -(a * b);
        let wx = w.eval(eu.x(j));
        total += (q1 * wx[(0, 0)] + q2 * wx[(0, 1)] + q3 * wx[(1, 0)]).re;
    }
    Ok((total / g as f64, worst))
}

/// Derivative of `t -> L(A e^{t w})` at `t = 0` for a uniformly hyperbolic
/// `SL(2)` cocycle and a traceless direction `w`.
pub fn lyap_derivative(spec: &CocycleSpec, w: &TrigMatrixMap, params: &BundleParams) -> Result<DerivativeReport> {
    if !matches!(spec.group, Group::SL2R | Group::SL2C) {
        return Err(Error::Precondition("SL(2) cocycle expected".into()));
    }
    let trace = w
        .terms()
        .map(|(_, c)| (c[(0, 0)] + c[(1, 1)]).norm())
        .fold(0.0, f64::max);
    if w.dim() != 2 || trace > 1e-12 {
        return Err(Error::Precondition("direction must be traceless 2x2".into()));
    }
    let bundles = match oseledets_bundles(spec, 1, params) {
        Err(Error::NotDominated(_)) => return Err(Error::NotUH),
        other => other?,
    };
    let (value, max_inverse_det) = lyap_derivative_with_frames(&bundles.unstable, &bundles.stable, w)?;
    Ok(DerivativeReport {
        value,
        grid: bundles.unstable.len(),
        bundle_iters: bundles.iters,
        max_inverse_det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{cf_expand, AlphaInput};
    use crate::families;
    use crate::linalg;
    use crate::trigmat::Symmetry;

    fn golden() -> crate::arithmetic::Frequency {
        cf_expand(&AlphaInput::golden(), 30).unwrap()
    }

    #[test]
    fn constant_diagonal_spectrum() {
        let map = TrigMatrixMap::constant(linalg::diag_real(&[2.0, 0.5]));
        let spec = CocycleSpec::new(golden(), map, Group::SL2R, Symmetry::None).unwrap();
        let s = lyap_spectrum(&spec, 0.0, &SpectrumParams { iters: 2000, ..Default::default() }).unwrap();
        assert!((s.exponents[0] - 2f64.ln()).abs() < 1e-12);
        assert!((s.exponents[1] + 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rotation_has_zero_exponents_and_unit_acceleration() {
        let spec = CocycleSpec::new(golden(), families::rotation_loop(1, 1), Group::SL2R, Symmetry::None).unwrap();
        let s = lyap_spectrum(&spec, 0.0, &SpectrumParams::default()).unwrap();
        assert!(s.exponents[0].abs() < 1e-3);
        let a = acceleration(&spec, 1, &AccelParams::default()).unwrap();
        assert_eq!(a.omega_snapped, 1);
        assert!(a.residual < 1e-6, "{a:?}");
    }

    #[test]
    fn too_few_iterations_rejected() {
        let spec = CocycleSpec::new(golden(), TrigMatrixMap::identity(2), Group::SL2R, Symmetry::None).unwrap();
        let p = SpectrumParams { iters: 10, ..Default::default() };
        assert!(matches!(lyap_spectrum(&spec, 0.0, &p), Err(Error::Precondition(_))));
    }

    #[test]
    fn line_fit_exact() {
        let f = line_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!(f.max_dev < 1e-14);
    }
}

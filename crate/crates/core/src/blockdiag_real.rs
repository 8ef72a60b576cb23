//! Symplectic block diagonalization of dominated real symplectic cocycles:
//! `T(x + alpha)^{-1} A(x) T(x) = diag(lambda Lambda, lambda^{-1} Lambda^{-T}) ⋄ Gamma`,
//! with `T` periodic (`chi = 1`) or twisted by `P_d` over the double cover (`chi = 2`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::splitting::{dominated_detect, oseledets_bundles, BundleParams, Bundles, FrameGrid};
use crate::topology::monodromy_sign;
use crate::trigmat::{fit_trig_degree, CocycleSpec, Group, TrigMapJson, TrigMatrixMap};

/// A full symplectic frame on a grid, with its twist.
#[derive(Debug, Clone)]
pub struct CanonicalFrame {
    pub period: f64,
    pub n: usize,
    pub frames: Vec<CMat>,
    pub end_frame: CMat,
    pub tau: i8,
    /// `max_j |T^T J T - J|` (real) or `|T^* J T - J|` (complex).
    pub symplectic_residual: f64,
}

impl CanonicalFrame {
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.period / self.frames.len() as f64
    }
}

fn form_residual(t: &CMat) -> f64 {
    let j = linalg::symplectic_j(t.nrows() / 2);
    linalg::max_abs(&(t.adjoint() * &j * t - &j))
}

/// Symplectic basis of an `ω`-nondegenerate frame by symplectic
/// Gram-Schmidt: returns `(P, Q)` with `P^* J Q = -I` and `P, Q` isotropic.
/// Pivots are chosen at the first grid point and kept fixed.
pub(crate) fn symplectic_gram_schmidt(frames: &[CMat], j: &CMat) -> Result<Vec<(CMat, CMat)>> {
    let k = frames[0].ncols();
    if !k.is_multiple_of(2) {
        return Err(Error::DimensionMismatch("odd-dimensional symplectic subspace".into()));
    }
    let omega = |a: &CMat, b: &CMat| (a.adjoint() * j * b)[(0, 0)];
    // fix the pairing order from the first frame
    let mut order = Vec::new();
    {
        let f = &frames[0];
        let mut cols: Vec<CMat> = (0..k).map(|c| f.columns(c, 1).into_owned()).collect();
        let mut remaining: Vec<usize> = (0..k).collect();
        while !remaining.is_empty() {
            let pi = remaining[0];
            let (pos, &qi) = remaining
                .iter()
                .enumerate()
                .skip(1)
                .max_by(|a, b| omega(&cols[pi], &cols[*a.1]).norm().total_cmp(&omega(&cols[pi], &cols[*b.1]).norm()))
                .ok_or(Error::DegenerateForm(0.0))?;
            order.push((pi, qi));
            let p = cols[pi].clone();
            let w = omega(&p, &cols[qi]);
            let q = &cols[qi] * (-1.0 / w);
            remaining.remove(pos);
            remaining.remove(0);
            for &r in &remaining {
                let v = cols[r].clone();
                cols[r] = &v + &p * omega(&v, &q) - &q * omega(&v, &p);
            }
        }
    }
    frames
        .iter()
        .map(|f| {
            let mut cols: Vec<CMat> = (0..k).map(|c| f.columns(c, 1).into_owned()).collect();
            let mut ps = Vec::new();
            let mut qs = Vec::new();
            for (idx, &(pi, qi)) in order.iter().enumerate() {
                let p = cols[pi].clone();
                let w = omega(&p, &cols[qi]);
                if w.norm() < 1e-6 {
                    return Err(Error::DegenerateForm(w.norm()));
                }
                let q = &cols[qi] * (-1.0 / w);
                for &(a, b) in &order[idx + 1..] {
                    for r in [a, b] {
                        let v = cols[r].clone();
                        cols[r] = &v + &p * omega(&v, &q) - &q * omega(&v, &p);
                    }
                }
                ps.push(p);
                qs.push(q);
            }
            let cat = |v: &[CMat]| {
                v.iter()
                    .skip(1)
                    .fold(v[0].clone(), |acc, c| linalg::hcat(&acc, c))
            };
            Ok((cat(&ps), cat(&qs)))
        })
        .collect()
}

/// Assembles `T` in the diamond layout from the hyperbolic pair and the center pair.
pub(crate) fn assemble(d: usize, u: &CMat, v: &CMat, center: Option<&(CMat, CMat)>) -> CMat {
    let n = u.ncols();
    let mut t = linalg::zeros(2 * d, 2 * d);
    t.view_mut((0, 0), (2 * d, n)).copy_from(u);
    t.view_mut((0, d), (2 * d, n)).copy_from(v);
    if let Some((p, q)) = center {
        t.view_mut((0, n), (2 * d, d - n)).copy_from(p);
        t.view_mut((0, d + n), (2 * d, d - n)).copy_from(q);
    }
    t
}

/// Canonical real symplectic frame from isotropic `E^u`, `E^s` and a
/// symplectic `E^c`.
pub fn canonical_symplectic_frame(
    eu: &FrameGrid,
    es: &FrameGrid,
    ec: Option<&FrameGrid>,
) -> Result<CanonicalFrame> {
    eu.same_grid(es)?;
    let m = eu.ambient();
    let d = m / 2;
    let n = eu.rank();
    let j = linalg::symplectic_j(d);
    let tau_u = monodromy_sign(eu)?;
    let tau_s = monodromy_sign(es)?;
    if tau_u != tau_s {
        return Err(Error::TauMismatch { tau_u, tau_s });
    }
    let (fu, fu_end) = eu.periodized()?;
    let pair = |u: &CMat, s: &CMat| -> Result<CMat> {
        let mm = u.transpose() * &j * s;
        let smin = linalg::singular_values(&mm).last().copied().unwrap_or(0.0);
        if !(smin > 1e-6) {
            return Err(Error::DegeneratePairing(smin));
        }
        Ok(-(s * linalg::inverse(&mm).ok_or(Error::DegeneratePairing(smin))?))
    };
    let vs: Vec<CMat> = fu
        .iter()
        .zip(&es.frames)
        .map(|(u, s)| pair(u, s))
        .collect::<Result<_>>()?;
    let vs_end = pair(&fu_end, &es.end_frame)?;
    let (center, center_end) = match ec {
        Some(c) if c.rank() > 0 => {
            c.same_grid(eu)?;
            if monodromy_sign(c)? != 1 {
                return Err(Error::Precondition("center bundle is not orientable".into()));
            }
            let (fc, fc_end) = c.periodized()?;
            let mut all = fc.clone();
            all.push(fc_end);
            let mut sb = symplectic_gram_schmidt(&all, &j)?;
            let end = sb.pop().unwrap();
            (Some(sb), Some(end))
        }
        _ => (None, None),
    };
    if n + center.as_ref().map_or(0, |c| c[0].0.ncols()) != d {
        return Err(Error::DimensionMismatch("bundle dimensions do not add up".into()));
    }
    let frames: Vec<CMat> = (0..fu.len())
        .map(|i| assemble(d, &fu[i], &vs[i], center.as_ref().map(|c| &c[i])))
        .collect();
    let end_frame = assemble(d, &fu_end, &vs_end, center_end.as_ref());
    let symplectic_residual = frames.iter().map(form_residual).fold(0.0, f64::max);
    Ok(CanonicalFrame {
        period: eu.period,
        n,
        frames,
        end_frame,
        tau: tau_u,
        symplectic_residual,
    })
}

/// Tolerances for the block diagonalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    pub bundles: BundleParams,
    pub fit_tail_tol: f64,
    pub residual_tol: f64,
}

impl Default for BlockParams {
    fn default() -> Self {
        BlockParams {
            bundles: BundleParams::default(),
            fit_tail_tol: 1e-14,
            residual_tol: 1e-6,
        }
    }
}

/// Output of a block diagonalization.
#[derive(Debug, Clone)]
pub struct ConjugacyPackage {
    pub chi: u8,
    pub n: usize,
    pub d: usize,
    pub tau: i8,
    /// Grid on `[0, chi * map period)`.
    pub xs: Vec<f64>,
    pub t: Vec<CMat>,
    pub t_fit: TrigMatrixMap,
    pub t_fit_residual: f64,
    pub conjugated: Vec<CMat>,
    pub lambda: Vec<f64>,
    /// Sign of `det Lambda_1` (the scalar is taken as `|det|^{1/n}`).
    pub lambda_sign: i8,
    pub lambda_block: Vec<CMat>,
    pub gamma: Vec<CMat>,
    pub residual_conj: f64,
    pub residual_sympl: f64,
    /// `|lower block - lambda^{-1} Lambda^{-*}|` over the grid.
    pub residual_dual: f64,
    /// For `chi = 2`: `sup |T(x+1) - T(x) P_d|` and `sup |Lambda(x+1) - T_n Lambda(x) T_n|`.
    pub twist_residuals: Option<(f64, f64)>,
    pub lambda_fit: TrigMatrixMap,
    pub lambda_block_fit: TrigMatrixMap,
    pub gamma_fit: Option<TrigMatrixMap>,
}

impl ConjugacyPackage {
    /// `L(lambda)`: grid mean of `ln lambda`.
    pub fn lambda_exponent(&self) -> f64 {
        self.lambda.iter().map(|l| l.ln()).sum::<f64>() / self.lambda.len() as f64
    }
}

/// Report form of a [`ConjugacyPackage`] with fitted maps in Fourier form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConjugacyJson {
    pub chi: u8,
    pub n: usize,
    pub d: usize,
    pub tau: i8,
    pub grid: usize,
    pub lambda_exponent: f64,
    pub lambda_sign: i8,
    pub residual_conj: f64,
    pub residual_sympl: f64,
    pub residual_dual: f64,
    pub t_fit_residual: f64,
    pub twist_residuals: Option<(f64, f64)>,
    pub t: TrigMapJson,
    pub lambda: TrigMapJson,
    pub lambda_block: TrigMapJson,
    pub gamma: Option<TrigMapJson>,
}

impl ConjugacyPackage {
    pub fn to_json(&self, coeff_tol: f64) -> ConjugacyJson {
        ConjugacyJson {
            chi: self.chi,
            n: self.n,
            d: self.d,
            tau: self.tau,
            grid: self.xs.len(),
            lambda_exponent: self.lambda_exponent(),
            lambda_sign: self.lambda_sign,
            residual_conj: self.residual_conj,
            residual_sympl: self.residual_sympl,
            residual_dual: self.residual_dual,
            t_fit_residual: self.t_fit_residual,
            twist_residuals: self.twist_residuals,
            t: TrigMapJson::from_map(&self.t_fit, coeff_tol),
            lambda: TrigMapJson::from_map(&self.lambda_fit, coeff_tol),
            lambda_block: TrigMapJson::from_map(&self.lambda_block_fit, coeff_tol),
            gamma: self.gamma_fit.as_ref().map(|g| TrigMapJson::from_map(g, coeff_tol)),
        }
    }
}

/// Largest entry outside the allowed diagonal blocks of the diamond layout.
pub fn off_block_residual(c: &CMat, d: usize, n: usize) -> f64 {
    let (_, cen) = linalg::diamond_indices(d, n);
    let block_of = |i: usize| -> u8 {
        if i < n {
            0
        } else if (d..d + n).contains(&i) {
            1
        } else {
            debug_assert!(cen.contains(&i));
            2
        }
    };
    let mut r = 0.0f64;
    for i in 0..2 * d {
        for k in 0..2 * d {
            if block_of(i) != block_of(k) {
                r = r.max(c[(i, k)].norm());
            }
        }
    }
    r
}

/// Conjugates by the canonical frame and reads off the blocks.
pub(crate) fn conjugate_and_split(
    spec: &CocycleSpec,
    frame: &CanonicalFrame,
    params: &BlockParams,
    hermitian: bool,
) -> Result<ConjugacyPackage> {
    let d = spec.dim() / 2;
    let n = frame.n;
    let base_period = spec.map.period();
    let chi: u8 = if frame.tau < 0 { 2 } else { 1 };
    if chi == 2 && base_period != 1 {
        return Err(Error::Precondition(
            "twisted bundles over a double-cover map are not supported".into(),
        ));
    }
    let total_period = chi * base_period;
    let g = frame.frames.len();
    let pd = linalg::twist_p(d);
    let mut t = frame.frames.clone();
    if chi == 2 {
        t.extend(frame.frames.iter().map(|f| f * &pd));
    }
    let gg = t.len();
    let p = total_period as f64;
    let xs: Vec<f64> = (0..gg).map(|j| j as f64 * p / gg as f64).collect();
    let fit = fit_trig_degree(&t, total_period, gg / 4, params.fit_tail_tol)?;
    let mut t_fit = fit.map;
    if !hermitian {
        t_fit.enforce_real();
    }
    let alpha = spec.alpha();
    let conjugated: Vec<CMat> = (0..gg)
        .into_par_iter()
        .map(|j| {
            let next = t_fit.eval(xs[j] + alpha);
            let inv = linalg::inverse(&next).ok_or(Error::Degenerate(j))?;
            Ok(inv * spec.map.eval(xs[j]) * &t[j])
        })
        .collect::<Result<_>>()?;
    let residual_conj = conjugated
        .iter()
        .map(|c| off_block_residual(c, d, n))
        .fold(0.0, f64::max);
    let residual_sympl = t.iter().map(form_residual).fold(0.0, f64::max);
    let hyp: Vec<usize> = (0..n).collect();
    let low: Vec<usize> = (d..d + n).collect();
    let (_, cen) = linalg::diamond_indices(d, n);
    let mut lambda = Vec::with_capacity(gg);
    let mut lambda_block = Vec::with_capacity(gg);
    let mut gamma = Vec::with_capacity(gg);
    let mut residual_dual = 0.0f64;
    let mut sign_det = 1i8;
    for c in &conjugated {
        let l1 = linalg::select(c, &hyp, &hyp);
        let det = l1.determinant();
        let mag = det.norm().powf(1.0 / n as f64);
        if !hermitian && det.re < 0.0 {
            sign_det = -1;
        }
        let lam = mag;
        let big = &l1 / C64::new(lam, 0.0);
        let lower = linalg::select(c, &low, &low);
        let expected = linalg::inverse(&big.adjoint())
            .ok_or(Error::DegeneratePairing(0.0))?
            / C64::new(lam, 0.0);
        residual_dual = residual_dual.max(linalg::max_abs(&(lower - expected)));
        lambda.push(lam);
        lambda_block.push(big);
        if !cen.is_empty() {
            gamma.push(linalg::select(c, &cen, &cen));
        }
    }
    let twist_residuals = if chi == 2 {
        let tn = linalg::twist_t(n);
        let rt = (0..g)
            .map(|j| linalg::max_abs(&(t_fit.eval(xs[j] + 1.0) - t_fit.eval(xs[j]) * &pd)))
            .fold(0.0, f64::max);
        let rl = (0..g)
            .map(|j| linalg::max_abs(&(&lambda_block[j + g] - &tn * &lambda_block[j] * &tn)))
            .fold(0.0, f64::max);
        Some((rt, rl))
    } else {
        None
    };
    let scalar_samples: Vec<CMat> = lambda
        .iter()
        .map(|l| CMat::from_element(1, 1, C64::new(*l, 0.0)))
        .collect();
    let lambda_fit = fit_trig_degree(&scalar_samples, total_period, gg / 4, params.fit_tail_tol)?.map;
    let lambda_block_fit = fit_trig_degree(&lambda_block, total_period, gg / 4, params.fit_tail_tol)?.map;
    let gamma_fit = if gamma.is_empty() {
        None
    } else {
        Some(fit_trig_degree(&gamma, total_period, gg / 4, params.fit_tail_tol)?.map)
    };
    let pkg = ConjugacyPackage {
        chi,
        n,
        d,
        tau: frame.tau,
        xs,
        t,
        t_fit,
        t_fit_residual: fit.residual,
        conjugated,
        lambda,
        lambda_sign: sign_det,
        lambda_block,
        gamma,
        residual_conj,
        residual_sympl,
        residual_dual,
        twist_residuals,
        lambda_fit,
        lambda_block_fit,
        gamma_fit,
    };
    if !(pkg.residual_conj < params.residual_tol) {
        return Err(Error::ResidualTooLarge {
            what: "off-block".into(),
            residual: pkg.residual_conj,
            tol: params.residual_tol,
        });
    }
    Ok(pkg)
}

/// Block diagonalization of a real symplectic cocycle dominated at index `n`.
pub fn blockdiag_real(spec: &CocycleSpec, bundles: &Bundles, params: &BlockParams) -> Result<ConjugacyPackage> {
    if !matches!(spec.group, Group::SpR(_) | Group::SL2R) {
        return Err(Error::Precondition("real symplectic cocycle expected".into()));
    }
    let frame = canonical_symplectic_frame(&bundles.unstable, &bundles.stable, bundles.center.as_ref())?;
    conjugate_and_split(spec, &frame, params, false)
}

/// Extracts bundles at index `n` and block-diagonalizes.
pub fn blockdiag_real_auto(spec: &CocycleSpec, n: usize, params: &BlockParams) -> Result<ConjugacyPackage> {
    let bundles = oseledets_bundles(spec, n, &params.bundles)?;
    blockdiag_real(spec, &bundles, params)
}

/// Uniformly hyperbolic case `n = d`: no center block.
pub fn uh_full_blockdiag(spec: &CocycleSpec, params: &BlockParams) -> Result<ConjugacyPackage> {
    let d = spec.dim() / 2;
    let dom = dominated_detect(spec, d, &params.bundles.domination)?;
    if !dom.dominated {
        return Err(Error::NotDominated(d));
    }
    blockdiag_real_auto(spec, d, params)
}

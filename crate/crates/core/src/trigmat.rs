//! Matrix-valued trigonometric polynomials on the circle `R/Z` or its double
//! cover `R/2Z`, plus the cocycle description (`CocycleSpec`) built on top of them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::arithmetic::Frequency;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ZERO};

/// `A(z) = sum_{|k| <= D} C_k exp(2 pi i k z / period)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigMatrixMap {
    dim: usize,
    degree: usize,
    /// `coeffs[k + degree]` holds `C_k`.
    coeffs: Vec<CMat>,
    period: u8,
    real_valued: bool,
}

const REAL_TOL: f64 = 1e-12;

impl TrigMatrixMap {
    /// Builds a map from `2D+1` coefficients ordered `C_{-D}, ..., C_D`.
    pub fn new(coeffs: Vec<CMat>, period: u8) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::DimensionMismatch(
                "need an odd number of coefficients".into(),
            ));
        }
        if period != 1 && period != 2 {
            return Err(Error::DimensionMismatch(format!("period {period}")));
        }
        let dim = coeffs[0].nrows();
        if coeffs.iter().any(|c| c.nrows() != dim || c.ncols() != dim) {
            return Err(Error::DimensionMismatch(
                "coefficients must be square of equal size".into(),
            ));
        }
        let degree = (coeffs.len() - 1) / 2;
        let mut map = TrigMatrixMap {
            dim,
            degree,
            coeffs,
            period,
            real_valued: false,
        };
        map.real_valued = map.reality_defect() < REAL_TOL;
        Ok(map)
    }

    pub fn constant(c: CMat) -> Self {
        Self::new(vec![c], 1).expect("square constant")
    }

    pub fn identity(dim: usize) -> Self {
        Self::constant(linalg::eye(dim))
    }

    pub fn zero(dim: usize, period: u8) -> Self {
        Self::new(vec![linalg::zeros(dim, dim)], period).expect("valid period")
    }

    /// Builds a map from sparse `(k, C_k)` terms; repeated modes are summed.
    pub fn from_terms(dim: usize, period: u8, terms: &[(i64, CMat)]) -> Result<Self> {
        let degree = terms.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![linalg::zeros(dim, dim); 2 * degree + 1];
        for (k, c) in terms {
            if c.nrows() != dim || c.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "term {k} is {}x{}, expected {dim}x{dim}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            coeffs[(*k + degree as i64) as usize] += c;
        }
        Self::new(coeffs, period)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn period(&self) -> u8 {
        self.period
    }
    pub fn period_f64(&self) -> f64 {
        self.period as f64
    }
    pub fn real_valued(&self) -> bool {
        self.real_valued
    }

    /// `C_k`, or zero outside the stored range.
    pub fn coeff(&self, k: i64) -> CMat {
        if k.unsigned_abs() as usize > self.degree {
            linalg::zeros(self.dim, self.dim)
        } else {
            self.coeffs[(k + self.degree as i64) as usize].clone()
        }
    }

    /// Iterator over `(k, C_k)`.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &CMat)> {
        let d = self.degree as i64;
        self.coeffs.iter().enumerate().map(move |(i, c)| (i as i64 - d, c))
    }

    /// Max entrywise deviation from `C_{-k} = conj(C_k)`.
    pub fn reality_defect(&self) -> f64 {
        let d = self.degree as i64;
        (-d..=d)
            .map(|k| {
                let a = &self.coeffs[(k + d) as usize];
                let b = &self.coeffs[(-k + d) as usize];
                linalg::max_abs(&(a - b.map(|z| z.conj())))
            })
            .fold(0.0, f64::max)
    }

    pub fn eval(&self, x: f64) -> CMat {
        self.eval_strip(x, 0.0)
    }

    /// Exact evaluation at `x + iy`.
    pub fn eval_strip(&self, x: f64, y: f64) -> CMat {
        let w = 2.0 * PI / self.period_f64();
        let mut out = linalg::zeros(self.dim, self.dim);
        for (k, c) in self.terms() {
            let kf = k as f64;
            let phase = C64::from_polar((-kf * w * y).exp(), kf * w * x);
            out += c * phase;
        }
        if y == 0.0 && self.real_valued {
            out.apply(|z| z.im = 0.0);
        }
        out
    }

    /// Samples on the uniform grid `x_j = j * period / g`, assembled in index order.
    pub fn eval_grid(&self, g: usize, y: f64) -> Vec<CMat> {
        let p = self.period_f64();
        (0..g)
            .into_par_iter()
            .map(|j| self.eval_strip(j as f64 * p / g as f64, y))
            .collect()
    }

    /// Coefficient-sum norm `sum_k |C_k|_op exp(2 pi |k| h / period)`, an upper
    /// bound for the sup of the operator norm on the strip `|Im z| <= h`.
    pub fn strip_norm(&self, h: f64) -> f64 {
        let w = 2.0 * PI / self.period_f64();
        self.terms()
            .map(|(k, c)| {
                let n = linalg::op_norm(c);
                if n == 0.0 {
                    0.0
                } else {
                    n * (w * k.unsigned_abs() as f64 * h).exp()
                }
            })
            .sum()
    }

    /// Sup of the operator norm on a uniform grid along `Im z = y`.
    pub fn sup_norm(&self, g: usize, y: f64) -> f64 {
        self.eval_grid(g, y)
            .iter()
            .map(linalg::op_norm)
            .fold(0.0, f64::max)
    }

    /// Same map written with respect to the double cover (mode `k` becomes `2k`).
    pub fn to_period2(&self) -> Self {
        if self.period == 2 {
            return self.clone();
        }
        let terms: Vec<(i64, CMat)> = self.terms().map(|(k, c)| (2 * k, c.clone())).collect();
        Self::from_terms(self.dim, 2, &terms).expect("consistent dims")
    }

    fn common_period(&self, other: &Self) -> (Self, Self) {
        if self.period == other.period {
            (self.clone(), other.clone())
        } else {
            (self.to_period2(), other.to_period2())
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    /// Pointwise product `self(x) * other(x)`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let (a, b) = self.common_period(other);
        let mut terms = Vec::with_capacity(a.coeffs.len() * b.coeffs.len());
        for (ka, ca) in a.terms() {
            for (kb, cb) in b.terms() {
                terms.push((ka + kb, ca * cb));
            }
        }
        Self::from_terms(self.dim, a.period, &terms)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let (a, b) = self.common_period(other);
        let terms: Vec<(i64, CMat)> = a
            .terms()
            .chain(b.terms())
            .map(|(k, c)| (k, c.clone()))
            .collect();
        Self::from_terms(self.dim, a.period, &terms)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map_coeffs(|_, c| c * s)
    }

    /// Left and right multiplication by constant matrices.
    pub fn sandwich(&self, left: &CMat, right: &CMat) -> Self {
        let coeffs: Vec<CMat> = self.coeffs.iter().map(|c| left * c * right).collect();
        Self::new(coeffs, self.period).expect("square")
    }

    fn map_coeffs(&self, f: impl Fn(i64, &CMat) -> CMat) -> Self {
        let coeffs: Vec<CMat> = self.terms().map(|(k, c)| f(k, c)).collect();
        Self::new(coeffs, self.period).expect("shape preserved")
    }

    /// `x -> A(x + a)`.
    pub fn shift(&self, a: f64) -> Self {
        let w = 2.0 * PI / self.period_f64();
        self.map_coeffs(|k, c| c * C64::from_polar(1.0, w * k as f64 * a))
    }

    /// Pointwise transpose (for real `x`).
    pub fn transpose(&self) -> Self {
        self.map_coeffs(|_, c| c.transpose())
    }

    /// Pointwise conjugate transpose (for real `x`).
    pub fn adjoint(&self) -> Self {
        let d = self.degree as i64;
        let coeffs: Vec<CMat> = (-d..=d)
            .map(|k| self.coeffs[(-k + d) as usize].adjoint())
            .collect();
        Self::new(coeffs, self.period).expect("shape preserved")
    }

    /// Inverse of an `SL(2)`-valued map via the adjugate.
    pub fn sl2_inverse(&self) -> Result<Self> {
        if self.dim != 2 {
            return Err(Error::DimensionMismatch("sl2_inverse needs 2x2".into()));
        }
        Ok(self.map_coeffs(|_, c| {
            CMat::from_row_slice(2, 2, &[c[(1, 1)], -c[(0, 1)], -c[(1, 0)], c[(0, 0)]])
        }))
    }

    /// Inverse of a real symplectic map: `-J A^T J`.
    pub fn symplectic_inverse(&self) -> Self {
        let j = linalg::symplectic_j(self.dim / 2);
        self.transpose().sandwich(&(-&j), &j)
    }

    /// Inverse of a Hermitian-symplectic map: `-J A^* J`.
    pub fn hsp_inverse(&self) -> Self {
        let j = linalg::symplectic_j(self.dim / 2);
        self.adjoint().sandwich(&(-&j), &j)
    }

    /// Coefficientwise interleaved embedding of two maps.
    pub fn diamond(&self, other: &Self) -> Result<Self> {
        if !self.dim.is_multiple_of(2) || !other.dim.is_multiple_of(2) {
            return Err(Error::DimensionMismatch("diamond needs even dimensions".into()));
        }
        let (a, b) = self.common_period(other);
        let deg = a.degree.max(b.degree) as i64;
        let coeffs: Vec<CMat> = (-deg..=deg)
            .map(|k| linalg::diamond(&a.coeff(k), &b.coeff(k)))
            .collect();
        Self::new(coeffs, a.period)
    }

    /// Block-diagonal direct sum `diag(self, other)`.
    pub fn block_sum(&self, other: &Self) -> Self {
        let (a, b) = self.common_period(other);
        let deg = a.degree.max(b.degree) as i64;
        let coeffs: Vec<CMat> = (-deg..=deg)
            .map(|k| linalg::block_diag(&[a.coeff(k), b.coeff(k)]))
            .collect();
        Self::new(coeffs, a.period).expect("square blocks")
    }

    /// Back to period 1; fails if any odd mode of a period-2 map is nonzero.
    pub fn to_period1(&self, tol: f64) -> Result<Self> {
        if self.period == 1 {
            return Ok(self.clone());
        }
        let mut terms = Vec::new();
        for (k, c) in self.terms() {
            if k % 2 != 0 {
                if linalg::max_abs(c) > tol {
                    return Err(Error::DimensionMismatch(format!(
                        "odd mode {k} present; map is not 1-periodic"
                    )));
                }
            } else {
                terms.push((k / 2, c.clone()));
            }
        }
        let mut out = Self::from_terms(self.dim, 1, &terms)?;
        if self.real_valued {
            out.enforce_real();
        }
        Ok(out)
    }

    /// Fast evaluator at fixed imaginary part `y`.
    pub fn evaluator(&self, y: f64) -> Evaluator {
        let w = 2.0 * PI / self.period_f64();
        let m = self.dim;
        let mut flat = Vec::with_capacity(self.coeffs.len() * m * m);
        for (k, c) in self.terms() {
            let s = (-(k as f64) * w * y).exp();
            flat.extend(c.iter().map(|z| z * s));
        }
        Evaluator {
            dim: m,
            degree: self.degree,
            w,
            flat,
            force_real: y == 0.0 && self.real_valued,
        }
    }

    /// Drops coefficients whose operator norm is below `tol` and trims the degree.
    pub fn truncate(&self, tol: f64) -> Self {
        let mut terms: Vec<(i64, CMat)> = self
            .terms()
            .filter(|(_, c)| linalg::max_abs(c) >= tol)
            .map(|(k, c)| (k, c.clone()))
            .collect();
        if terms.is_empty() {
            terms.push((0, linalg::zeros(self.dim, self.dim)));
        }
        let mut out = Self::from_terms(self.dim, self.period, &terms).expect("dims");
        if self.real_valued {
            out.enforce_real();
        }
        out
    }

    /// Projects onto the real-valued maps by symmetrizing coefficients.
    pub fn enforce_real(&mut self) {
        let d = self.degree as i64;
        let old = self.coeffs.clone();
        for k in -d..=d {
            let a = &old[(k + d) as usize];
            let b = &old[(-k + d) as usize];
            self.coeffs[(k + d) as usize] = (a + b.map(|z| z.conj())) * C64::new(0.5, 0.0);
        }
        self.real_valued = true;
    }
}

/// Allocation-free evaluation of a map along a horizontal line `Im z = y`,
/// writing column-major `m x m` output.
#[derive(Debug, Clone)]
pub struct Evaluator {
    dim: usize,
    degree: usize,
    w: f64,
    flat: Vec<C64>,
    force_real: bool,
}

impl Evaluator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_into(&self, x: f64, out: &mut [C64]) {
        let mm = self.dim * self.dim;
        out[..mm].iter_mut().for_each(|z| *z = ZERO);
        let z = C64::from_polar(1.0, self.w * x);
        let mut zk = C64::from_polar(1.0, -self.w * x * self.degree as f64);
        for block in self.flat.chunks_exact(mm) {
            for (o, c) in out.iter_mut().zip(block) {
                *o += c * zk;
            }
            zk *= z;
        }
        if self.force_real {
            out[..mm].iter_mut().for_each(|z| z.im = 0.0);
        }
    }

    pub fn eval(&self, x: f64) -> CMat {
        let mut buf = vec![ZERO; self.dim * self.dim];
        self.eval_into(x, &mut buf);
        CMat::from_vec(self.dim, self.dim, buf)
    }
}

/// Result of a discrete Fourier fit.
#[derive(Debug, Clone)]
pub struct TrigFit {
    pub map: TrigMatrixMap,
    /// Max entrywise reconstruction error on the sample grid.
    pub residual: f64,
    /// Largest dropped coefficient (tail mass indicator).
    pub dropped: f64,
}

/// Fits a trigonometric polynomial of degree at most `g / 4` to samples on
/// the uniform grid `x_j = j * period / g`.
pub fn fit_trig(samples: &[CMat], period: u8, tail_tol: f64) -> Result<TrigFit> {
    let g = samples.len();
    if g < 4 || !g.is_power_of_two() {
        return Err(Error::GridTooCoarse(g));
    }
    fit_trig_degree(samples, period, g / 4, tail_tol)
}

/// As [`fit_trig`] with an explicit degree cap; requires `g >= 4 * degree`.
pub fn fit_trig_degree(
    samples: &[CMat],
    period: u8,
    degree: usize,
    tail_tol: f64,
) -> Result<TrigFit> {
    let g = samples.len();
    if g < 4 || !g.is_power_of_two() || g < 4 * degree {
        return Err(Error::GridTooCoarse(g));
    }
    let (r, c) = samples[0].shape();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(g);
    let mut spectra = vec![vec![ZERO; g]; r * c];
    for i in 0..r {
        for j in 0..c {
            let buf = &mut spectra[i * c + j];
            for (s, m) in buf.iter_mut().zip(samples) {
                *s = m[(i, j)];
            }
            fft.process(buf);
        }
    }
    let scale = 1.0 / g as f64;
    let mut dropped = 0.0f64;
    let mut terms = Vec::with_capacity(2 * degree + 1);
    for k in -(degree as i64)..=(degree as i64) {
        let idx = k.rem_euclid(g as i64) as usize;
        let mut m = CMat::from_fn(r, c, |i, j| spectra[i * c + j][idx] * scale);
        if (k.unsigned_abs() as usize) * 2 == g {
            m *= C64::new(0.5, 0.0);
        }
        let size = linalg::max_abs(&m);
        if size < tail_tol && k != 0 {
            dropped = dropped.max(size);
            continue;
        }
        terms.push((k, m));
    }
    if r != c {
        return Err(Error::DimensionMismatch("fit_trig needs square samples".into()));
    }
    let mut map = TrigMatrixMap::from_terms(r, period, &terms)?;
    if samples.iter().all(|m| linalg::max_imag(m) < 1e-14) {
        map.enforce_real();
    }
    let p = period as f64;
    let residual = samples
        .par_iter()
        .enumerate()
        .map(|(j, s)| linalg::max_abs(&(map.eval(j as f64 * p / g as f64) - s)))
        .reduce(|| 0.0, f64::max);
    Ok(TrigFit {
        map,
        residual,
        dropped,
    })
}

/// Compares a strip norm of the oscillating part of a scalar function with
/// the shape `exp(-c q delta) / (h - h')` of the averaging estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AveragingDiagnostic {
    pub lhs: f64,
    pub bound_shape: f64,
    pub ratio: f64,
    pub hypothesis_norm: f64,
}

pub fn averaging_bound_check(
    phi: &TrigMatrixMap,
    h: f64,
    h_prime: f64,
    c: f64,
    q_next: f64,
    delta_n: f64,
) -> Result<AveragingDiagnostic> {
    if h_prime >= h {
        return Err(Error::BadStrip { h, h_prime });
    }
    if phi.dim() != 1 {
        return Err(Error::DimensionMismatch("scalar function expected".into()));
    }
    let mean = phi.coeff(0);
    let osc = phi.sub(&TrigMatrixMap::constant(mean))?;
    let lhs = osc.strip_norm(h_prime);
    let bound_shape = (-c * q_next * delta_n).exp() / (h - h_prime);
    Ok(AveragingDiagnostic {
        lhs,
        bound_shape,
        ratio: lhs / bound_shape,
        hypothesis_norm: phi.strip_norm(h),
    })
}

/// Matrix groups a cocycle may take values in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    SL2R,
    SL2C,
    /// Real symplectic group of the given (even) dimension.
    SpR(usize),
    /// Hermitian-symplectic group of the given (even) dimension.
    HSp(usize),
    GLC(usize),
}

impl Group {
    pub fn dim(&self) -> usize {
        match *self {
            Group::SL2R | Group::SL2C => 2,
            Group::SpR(n) | Group::HSp(n) | Group::GLC(n) => n,
        }
    }

    /// Groups preserving a real symplectic form (so `L_k = -L_{m+1-k}`).
    pub fn is_real_symplectic(&self) -> bool {
        matches!(self, Group::SL2R | Group::SpR(_))
    }

    pub fn is_symplectic_like(&self) -> bool {
        matches!(self, Group::SL2R | Group::SL2C | Group::SpR(_) | Group::HSp(_))
    }

    /// Pointwise membership defect.
    pub fn residual(&self, a: &CMat) -> f64 {
        match *self {
            Group::SL2R => (det(a) - 1.0).norm() + linalg::max_imag(a),
            Group::SL2C => (det(a) - 1.0).norm(),
            Group::SpR(n) => {
                let j = linalg::symplectic_j(n / 2);
                linalg::max_abs(&(a.transpose() * &j * a - &j)) + linalg::max_imag(a)
            }
            Group::HSp(n) => {
                let j = linalg::symplectic_j(n / 2);
                linalg::max_abs(&(a.adjoint() * &j * a - &j))
            }
            Group::GLC(_) => {
                let s = linalg::singular_values(a);
                if s.last().copied().unwrap_or(0.0) > 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

fn det(a: &CMat) -> C64 {
    a.clone().determinant()
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::SL2R => write!(f, "SL2R"),
            Group::SL2C => write!(f, "SL2C"),
            Group::SpR(n) => write!(f, "Sp{n}R"),
            Group::HSp(n) => write!(f, "HSp{n}"),
            Group::GLC(n) => write!(f, "GL{n}C"),
        }
    }
}

impl FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown group {s:?}"));
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
        match s {
            "SL2R" => Ok(Group::SL2R),
            "SL2C" => Ok(Group::SL2C),
            _ => {
                if let Some(rest) = s.strip_prefix("HSp") {
                    let n = num(rest)?;
                    if n % 2 == 0 && n > 0 {
                        return Ok(Group::HSp(n));
                    }
                } else if let Some(rest) = s.strip_prefix("Sp").and_then(|r| r.strip_suffix('R')) {
                    let n = num(rest)?;
                    if n % 2 == 0 && n > 0 {
                        return Ok(Group::SpR(n));
                    }
                } else if let Some(rest) = s.strip_prefix("GL").and_then(|r| r.strip_suffix('C')) {
                    let n = num(rest)?;
                    if n > 0 {
                        return Ok(Group::GLC(n));
                    }
                }
                Err(bad())
            }
        }
    }
}

/// Twisted-conjugation symmetry classes of `SL(2, R)` loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    #[serde(rename = "none")]
    None,
    /// `A(x + 1/2) = T^{-1} A(x) T` on period-1 maps.
    #[serde(rename = "scrA")]
    ScrA,
    /// `A(x + 1) = T^{-1} A(x) T` on period-2 maps.
    #[serde(rename = "frakA")]
    FrakA,
}

impl FromStr for Symmetry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Symmetry::None),
            "scrA" => Ok(Symmetry::ScrA),
            "frakA" => Ok(Symmetry::FrakA),
            _ => Err(Error::Parse(format!("unknown symmetry {s:?}"))),
        }
    }
}

pub const CHECK_GRID: usize = 1024;
pub const CHECK_TOL: f64 = 1e-8;

/// Sup over the check grid of the twisted-shift defect for the given class.
pub fn class_residual(map: &TrigMatrixMap, class: Symmetry) -> f64 {
    let (shift, expected_period) = match class {
        Symmetry::None => return 0.0,
        Symmetry::ScrA => (0.5, 1),
        Symmetry::FrakA => (1.0, 2),
    };
    if map.period() != expected_period {
        return f64::INFINITY;
    }
    let t = linalg::twist_t(map.dim());
    let shifted = map.shift(shift);
    let p = map.period_f64();
    (0..CHECK_GRID)
        .into_par_iter()
        .map(|j| {
            let x = j as f64 * p / CHECK_GRID as f64;
            let lhs = shifted.eval(x);
            let rhs = &t * map.eval(x) * &t;
            linalg::max_abs(&(lhs - rhs))
        })
        .reduce(|| 0.0, f64::max)
}

/// Sup over the check grid of the group-membership defect.
pub fn group_residual(map: &TrigMatrixMap, group: Group) -> f64 {
    if map.dim() != group.dim() {
        return f64::INFINITY;
    }
    let mut r = map
        .eval_grid(CHECK_GRID, 0.0)
        .par_iter()
        .map(|a| group.residual(a))
        .reduce(|| 0.0, f64::max);
    if matches!(group, Group::SL2R | Group::SpR(_)) && !map.real_valued() {
        r = r.max(map.reality_defect());
    }
    r
}

/// A cocycle `(alpha, A)` with its group and symmetry tags.
#[derive(Debug, Clone)]
pub struct CocycleSpec {
    pub freq: Frequency,
    pub map: TrigMatrixMap,
    pub group: Group,
    pub symmetry: Symmetry,
}

impl CocycleSpec {
    /// Validated constructor: group and class residuals must be below `1e-8`.
    pub fn new(freq: Frequency, map: TrigMatrixMap, group: Group, symmetry: Symmetry) -> Result<Self> {
        let spec = Self::unchecked(freq, map, group, symmetry);
        spec.validate()?;
        Ok(spec)
    }

    pub fn unchecked(freq: Frequency, map: TrigMatrixMap, group: Group, symmetry: Symmetry) -> Self {
        CocycleSpec {
            freq,
            map,
            group,
            symmetry,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.group_residual();
        if !(g < CHECK_TOL) {
            return Err(Error::GroupViolation {
                group: self.group.to_string(),
                residual: g,
            });
        }
        let s = self.class_residual();
        if !(s < CHECK_TOL) {
            return Err(Error::GroupViolation {
                group: format!("{:?} symmetry", self.symmetry),
                residual: s,
            });
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.freq.value()
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn group_residual(&self) -> f64 {
        group_residual(&self.map, self.group)
    }

    pub fn class_residual(&self) -> f64 {
        class_residual(&self.map, self.symmetry)
    }

    pub fn with_map(&self, map: TrigMatrixMap) -> Self {
        CocycleSpec {
            map,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> SpecJson {
        SpecJson {
            alpha: self.freq.clone(),
            group: self.group.to_string(),
            dim: self.dim(),
            period: self.map.period(),
            fourier: self
                .map
                .terms()
                .filter(|(_, c)| linalg::max_abs(c) > 0.0)
                .map(|(k, c)| FourierTerm::from_matrix(k, c))
                .collect(),
            symmetry: self.symmetry,
        }
    }

    /// Parses a spec without enforcing group membership.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: SpecJson = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        raw.into_spec()
    }
}

/// On-disk cocycle description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecJson {
    pub alpha: Frequency,
    pub group: String,
    pub dim: usize,
    #[serde(default = "one_u8")]
    pub period: u8,
    pub fourier: Vec<FourierTerm>,
    #[serde(default = "no_symmetry")]
    pub symmetry: Symmetry,
}

fn one_u8() -> u8 {
    1
}
fn no_symmetry() -> Symmetry {
    Symmetry::None
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierTerm {
    pub k: i64,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Vec<Vec<f64>>,
}

/// Serializable form of a bare [`TrigMatrixMap`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrigMapJson {
    pub dim: usize,
    pub period: u8,
    pub fourier: Vec<FourierTerm>,
}

impl TrigMapJson {
    /// Keeps coefficients whose largest entry exceeds `tol`.
    pub fn from_map(map: &TrigMatrixMap, tol: f64) -> Self {
        TrigMapJson {
            dim: map.dim(),
            period: map.period(),
            fourier: map
                .terms()
                .filter(|(_, c)| linalg::max_abs(c) > tol)
                .map(|(k, c)| FourierTerm::from_matrix(k, c))
                .collect(),
        }
    }

    pub fn into_map(self) -> Result<TrigMatrixMap> {
        let terms = self
            .fourier
            .iter()
            .map(|t| Ok((t.k, t.to_matrix(self.dim)?)))
            .collect::<Result<Vec<_>>>()?;
        TrigMatrixMap::from_terms(self.dim, self.period, &terms)
    }
}

impl FourierTerm {
    pub fn from_matrix(k: i64, c: &CMat) -> Self {
        let rows = |f: fn(&C64) -> f64| {
            (0..c.nrows())
                .map(|i| (0..c.ncols()).map(|j| f(&c[(i, j)])).collect())
                .collect()
        };
        FourierTerm {
            k,
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }

    pub fn to_matrix(&self, dim: usize) -> Result<CMat> {
        let shape_ok = |m: &Vec<Vec<f64>>| m.len() == dim && m.iter().all(|r| r.len() == dim);
        if !shape_ok(&self.re) || !(self.im.is_empty() || shape_ok(&self.im)) {
            return Err(Error::Parse(format!("coefficient k = {} is not {dim}x{dim}", self.k)));
        }
        Ok(CMat::from_fn(dim, dim, |i, j| {
            let im = if self.im.is_empty() { 0.0 } else { self.im[i][j] };
            C64::new(self.re[i][j], im)
        }))
    }
}

impl SpecJson {
    pub fn into_spec(self) -> Result<CocycleSpec> {
        let group: Group = self.group.parse()?;
        if group.dim() != self.dim {
            return Err(Error::Parse(format!(
                "group {} has dimension {}, spec says {}",
                group,
                group.dim(),
                self.dim
            )));
        }
        if self.fourier.is_empty() {
            return Err(Error::Parse("no Fourier coefficients".into()));
        }
        let terms = self
            .fourier
            .iter()
            .map(|t| Ok((t.k, t.to_matrix(self.dim)?)))
            .collect::<Result<Vec<_>>>()?;
        let map = TrigMatrixMap::from_terms(self.dim, self.period, &terms)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let freq = self.alpha.hydrate()?;
        Ok(CocycleSpec::unchecked(freq, map, group, self.symmetry))
    }
}

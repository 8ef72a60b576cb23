//! Continued fractions of the rotation frequency, best denominators, a
//! finite-depth proxy for the growth exponent `beta(alpha)`, and circle
//! distances.
//!
//! Expansion is done on an exact rational interval that is known to contain
//! alpha; a partial quotient is accepted only when both ends of the residual
//! interval agree on it. Float inputs therefore yield the ~20-40 quotients
//! a double actually pins down, while decimal strings and quadratic surds can
//! be expanded as deep as their precision allows.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the frequency is supplied.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaInput {
    /// A double; treated as known to within half an ulp.
    Float(f64),
    /// A decimal string such as `"0.61803398874989484820458683436563811772"`,
    /// known to within half a unit in its last digit.
    Decimal(String),
    /// `(p + sqrt(d)) / q` with `d` not a perfect square.
    QuadraticSurd { p: i64, d: u64, q: i64 },
    /// An exact rational; always rejected.
    Rational(i64, i64),
}

impl AlphaInput {
    pub fn golden() -> Self {
        AlphaInput::QuadraticSurd { p: -1, d: 5, q: 2 }
    }
    pub fn silver() -> Self {
        AlphaInput::QuadraticSurd { p: -1, d: 2, q: 1 }
    }
}

/// Irrational frequency in (0, 1) with its continued-fraction data.
///
/// `pq` holds `(p_k, q_k)` for `k = 0..=M` where `M = a.len()`, seeded by
/// `p_0 = 0, q_0 = 1, p_1 = 1, q_1 = a_1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Frequency {
    pub alpha_decimal: String,
    #[serde(rename = "a", default)]
    pub partial_quotients: Vec<u128>,
    #[serde(rename = "pq", default)]
    pub convergents: Vec<(u128, u128)>,
    #[serde(default = "nan")]
    pub beta_hat: f64,
    /// Expansion stopped before the requested depth because precision ran out.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
    #[serde(skip)]
    value: f64,
}

fn nan() -> f64 {
    f64::NAN
}

impl PartialEq for Frequency {
    fn eq(&self, other: &Self) -> bool {
        self.alpha_decimal == other.alpha_decimal
            && self.partial_quotients == other.partial_quotients
            && self.convergents == other.convergents
    }
}

const DECIMAL_DIGITS: usize = 40;

impl Frequency {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn depth(&self) -> usize {
        self.partial_quotients.len()
    }

    pub fn q(&self, k: usize) -> u128 {
        self.convergents[k].1
    }

    pub fn denominators(&self) -> Vec<u128> {
        self.convergents.iter().map(|&(_, q)| q).collect()
    }

    /// Build from explicitly chosen partial quotients (synthetic frequencies).
    /// Alpha is recorded as the last convergent `p_M / q_M`.
    pub fn from_partial_quotients(a: &[u128]) -> Result<Self> {
        if a.is_empty() || a.contains(&0) {
            return Err(Error::InvalidFrequency(
                "partial quotients must be positive".into(),
            ));
        }
        let (convergents, ok) = convergents_of(a);
        let a = a[..convergents.len() - 1].to_vec();
        let (p, q) = *convergents.last().unwrap();
        let exact = BigRational::new(BigInt::from(p), BigInt::from(q));
        let mut f = Frequency {
            alpha_decimal: to_decimal(&exact, DECIMAL_DIGITS),
            partial_quotients: a,
            convergents,
            beta_hat: f64::NAN,
            truncated: !ok,
            value: rational_to_f64(&exact),
        };
        f.beta_hat = beta_estimate(&f, None).unwrap_or(f64::NAN);
        Ok(f)
    }

    /// Recompute derived fields after deserialisation.
    pub fn hydrate(mut self) -> Result<Self> {
        let exact = parse_decimal(&self.alpha_decimal)
            .ok_or_else(|| Error::Parse(format!("bad alpha_decimal {:?}", self.alpha_decimal)))?
            .0;
        self.value = rational_to_f64(&exact);
        if !(self.value > 0.0 && self.value < 1.0) {
            return Err(Error::InvalidFrequency(format!(
                "alpha = {} is not in (0, 1)",
                self.value
            )));
        }
        if self.partial_quotients.is_empty() {
            let fresh = cf_expand(&AlphaInput::Decimal(self.alpha_decimal.clone()), 32)?;
            return Ok(fresh);
        }
        if self.convergents.len() != self.partial_quotients.len() + 1 {
            self.convergents = convergents_of(&self.partial_quotients).0;
        }
        if self.beta_hat.is_nan() {
            self.beta_hat = beta_estimate(&self, None).unwrap_or(f64::NAN);
        }
        Ok(self)
    }

    /// Checks the recurrences, the approximation bounds and monotonicity of `q`.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let a = &self.partial_quotients;
        let pq = &self.convergents;
        if pq.len() != a.len() + 1 {
            return Err("convergent count does not match quotient count".into());
        }
        if pq[0] != (0, 1) || pq[1] != (1, a[0]) {
            return Err("bad seeds".into());
        }
        for k in 2..pq.len() {
            let (p1, q1) = pq[k - 1];
            let (p2, q2) = pq[k - 2];
            let ak = a[k - 1];
            if pq[k].0 != ak * p1 + p2 || pq[k].1 != ak * q1 + q2 {
                return Err(format!("recurrence fails at k = {k}"));
            }
            if k >= 2 && pq[k].1 <= q1 && !(k == 2 && q1 == 1 && pq[k].1 == 1) {
                return Err(format!("q not increasing at k = {k}"));
            }
        }
        let (exact, digits) = match parse_decimal(&self.alpha_decimal) {
            Some(x) => x,
            None => return Err("unparseable alpha".into()),
        };
        // the stored decimal is rounded, so q * alpha is only known to q * ulp / 2
        let ulp = 10f64.powi(-(digits as i32));
        // |q_n alpha - p_n| is the circle distance for n >= 1
        for n in 1..pq.len() - 1 {
            let (p, q) = pq[n];
            let qn1 = pq[n + 1].1 as f64;
            let dist = (&exact * BigInt::from(q) - BigInt::from(p)).abs();
            let dist = rational_to_f64(&dist);
            let lo = 1.0 / (2.0 * qn1);
            let hi = 1.0 / qn1;
            let slack = 1e-12 * hi + q as f64 * ulp;
            if dist < lo - slack || dist > hi + slack {
                return Err(format!(
                    "bound fails at n = {n}: dist = {dist:e}, bounds [{lo:e}, {hi:e}]"
                ));
            }
        }
        Ok(())
    }
}

/// Convergents for the given quotients; stops (returning `false`) on `u128` overflow.
fn convergents_of(a: &[u128]) -> (Vec<(u128, u128)>, bool) {
    let mut pq = vec![(0u128, 1u128), (1u128, a[0])];
    for k in 2..=a.len() {
        let ak = a[k - 1];
        let (p1, q1) = pq[k - 1];
        let (p2, q2) = pq[k - 2];
        let p = ak.checked_mul(p1).and_then(|x| x.checked_add(p2));
        let q = ak.checked_mul(q1).and_then(|x| x.checked_add(q2));
        match (p, q) {
            (Some(p), Some(q)) => pq.push((p, q)),
            _ => return (pq, false),
        }
    }
    (pq, true)
}

/// Continued-fraction expansion to `depth` partial quotients.
pub fn cf_expand(alpha: &AlphaInput, depth: usize) -> Result<Frequency> {
    let (mut lo, mut hi) = enclosing_interval(alpha, depth)?;
    let zero = BigRational::zero();
    let one = BigRational::one();
    if lo <= zero || hi >= one {
        return Err(Error::InvalidFrequency("alpha must lie strictly in (0, 1)".into()));
    }
    let mid = (&lo + &hi) / BigRational::from_integer(BigInt::from(2));
    let mut a: Vec<u128> = Vec::with_capacity(depth);
    let mut truncated = false;
    while a.len() < depth {
        if lo <= zero {
            truncated = true;
            break;
        }
        let inv_hi = hi.recip();
        let inv_lo = lo.recip();
        let f_small = inv_hi.floor();
        let f_big = inv_lo.floor();
        if f_small != f_big {
            truncated = true;
            break;
        }
        let ak = match f_small.to_integer().to_u128() {
            Some(v) if v > 0 => v,
            _ => {
                truncated = true;
                break;
            }
        };
        let new_lo = &inv_hi - &f_small;
        let new_hi = &inv_lo - &f_small;
        a.push(ak);
        lo = new_lo;
        hi = new_hi;
    }
    if a.len() < 3 {
        return Err(Error::PrecisionExhausted(a.len()));
    }
    let (convergents, ok) = convergents_of(&a);
    if !ok {
        truncated = true;
        a.truncate(convergents.len() - 1);
    }
    let mut f = Frequency {
        alpha_decimal: to_decimal(&mid, DECIMAL_DIGITS),
        partial_quotients: a,
        convergents,
        beta_hat: f64::NAN,
        truncated,
        value: rational_to_f64(&mid),
    };
    f.beta_hat = beta_estimate(&f, None).unwrap_or(f64::NAN);
    Ok(f)
}

fn enclosing_interval(alpha: &AlphaInput, depth: usize) -> Result<(BigRational, BigRational)> {
    match alpha {
        AlphaInput::Rational(p, q) => Err(Error::RationalInput(*p, *q)),
        AlphaInput::Float(x) => {
            if !x.is_finite() {
                return Err(Error::InvalidFrequency(format!("{x}")));
            }
            let exact = BigRational::from_float(*x)
                .ok_or_else(|| Error::InvalidFrequency(format!("{x}")))?;
            let half_ulp = BigRational::from_float(ulp(*x) / 2.0).unwrap();
            Ok((&exact - &half_ulp, &exact + &half_ulp))
        }
        AlphaInput::Decimal(s) => {
            let (x, digits) = parse_decimal(s)
                .ok_or_else(|| Error::Parse(format!("bad decimal {s:?}")))?;
            let half = BigRational::new(
                BigInt::one(),
                BigInt::from(2) * BigInt::from(10u32).pow(digits as u32),
            );
            Ok((&x - &half, &x + &half))
        }
        AlphaInput::QuadraticSurd { p, d, q } => {
            let r = (*d as f64).sqrt().round() as u64;
            if r * r == *d {
                return Err(Error::RationalInput(*p + r as i64, *q));
            }
            if *q == 0 {
                return Err(Error::InvalidFrequency("zero denominator".into()));
            }
            let k = (40 + 2 * depth) as u32;
            let scale = BigUint::from(10u32).pow(k);
            let s = (BigUint::from(*d) * &scale * &scale).sqrt();
            let scale = BigInt::from(scale);
            let s_lo = BigRational::new(BigInt::from(s.clone()), scale.clone());
            let s_hi = BigRational::new(BigInt::from(s) + 1, scale);
            let p = BigRational::from_integer(BigInt::from(*p));
            let q = BigRational::from_integer(BigInt::from(*q));
            let a = (&p + s_lo) / &q;
            let b = (&p + s_hi) / &q;
            Ok(if a <= b { (a, b) } else { (b, a) })
        }
    }
}

fn ulp(x: f64) -> f64 {
    let bits = x.abs().to_bits();
    f64::from_bits(bits + 1) - x.abs()
}

/// Parses a plain decimal `[-]int[.frac]`; returns the exact value and the
/// number of fractional digits.
fn parse_decimal(s: &str) -> Option<(BigRational, usize)> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let den = BigInt::from(10u32).pow(frac.len() as u32);
    let v = BigRational::new(if neg { -num } else { num }, den);
    Some((v, frac.len()))
}

fn to_decimal(x: &BigRational, digits: usize) -> String {
    let scale = BigInt::from(10u32).pow(digits as u32);
    let scaled = (x * BigRational::from_integer(scale)).round().to_integer();
    let neg = scaled.is_negative();
    let mut s = scaled.abs().to_string();
    while s.len() <= digits {
        s.insert(0, '0');
    }
    let (i, f) = s.split_at(s.len() - digits);
    format!("{}{}.{}", if neg { "-" } else { "" }, i, f)
}

fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Windowed finite-depth proxy for `limsup ln(q_{n+1}) / q_n`.
///
/// The window covers the last `window` indices `n` for which `q_{n+1}` is
/// stored; `None` uses `ceil(M / 2)`.
pub fn beta_estimate(freq: &Frequency, window: Option<usize>) -> Result<f64> {
    let pq = &freq.convergents;
    if pq.len() < 4 {
        return Err(Error::InsufficientDepth {
            needed: 4,
            have: pq.len(),
        });
    }
    let m = pq.len() - 1;
    let w = window.unwrap_or(m.div_ceil(2)).clamp(1, m);
    let est = (m - w..m)
        .map(|n| (pq[n + 1].1 as f64).ln() / pq[n].1 as f64)
        .fold(0.0, f64::max);
    Ok(est)
}

/// Distance to the nearest integer, in `[0, 1/2]`.
pub fn circle_dist(x: f64) -> f64 {
    let f = x - x.floor();
    f.min(1.0 - f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_mean_quotients() {
        let f = cf_expand(&AlphaInput::golden(), 8).unwrap();
        assert_eq!(f.partial_quotients, vec![1; 8]);
        assert_eq!(&f.denominators()[..8], &[1, 1, 2, 3, 5, 8, 13, 21]);
        assert!(!f.truncated);
        f.check_invariants().unwrap();
    }

    #[test]
    fn rational_rejected() {
        assert_eq!(
            cf_expand(&AlphaInput::Rational(1, 3), 5).unwrap_err(),
            Error::RationalInput(1, 3)
        );
    }

    #[test]
    fn float_input_truncates_when_precision_runs_out() {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let f = cf_expand(&AlphaInput::Float(g), 200).unwrap();
        assert!(f.truncated);
        assert!(f.depth() > 20 && f.depth() < 60, "depth {}", f.depth());
        assert!(f.partial_quotients.iter().all(|&a| a == 1));
        f.check_invariants().unwrap();
    }

    #[test]
    fn short_decimal_is_precision_exhausted() {
        let e = cf_expand(&AlphaInput::Decimal("0.6".into()), 10).unwrap_err();
        assert!(matches!(e, Error::PrecisionExhausted(_)));
    }

    #[test]
    fn decimal_parsing() {
        let (x, d) = parse_decimal("0.125").unwrap();
        assert_eq!(d, 3);
        assert_eq!(x, BigRational::new(BigInt::from(1), BigInt::from(8)));
        assert!(parse_decimal("abc").is_none());
        assert_eq!(to_decimal(&x, 4), "0.1250");
    }

    #[test]
    fn circle_dist_basics() {
        assert_eq!(circle_dist(0.75), 0.25);
        assert_eq!(circle_dist(3.0), 0.0);
        assert!((circle_dist(-0.1) - 0.1).abs() < 1e-15);
    }
}

//! Fibered rotation number, topological degree of `SL(2, R)` loops, bundle
//! monodromy signs and the twisted-symmetry diagnostics.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::splitting::{FrameGrid, MIN_OVERLAP};
use crate::trigmat::{class_residual, CocycleSpec, Evaluator, Group, TrigMatrixMap};

const TURN: f64 = 2.0 * PI;
const DEGREE_GRID: usize = 4096;
const MAX_GRID: usize = 1 << 20;

/// Angle (radians) of the rotation factor in the polar decomposition of a
/// real `2 x 2` matrix with positive determinant.
fn polar_angle(a: &[C64]) -> f64 {
    // column-major [a, c, b, d]
    let (a11, a21, a12, a22) = (a[0].re, a[1].re, a[2].re, a[3].re);
    (a21 - a12).atan2(a11 + a22)
}

fn wrap(d: f64) -> f64 {
    (d + PI).rem_euclid(TURN) - PI
}

/// Continuous lift of the polar angle on a uniform grid (radians), with the
/// value at `x = period` appended.
struct AngleLift {
    period: f64,
    values: Vec<f64>,
}

impl AngleLift {
    fn new(map: &TrigMatrixMap) -> Result<Self> {
        if map.dim() != 2 {
            return Err(Error::DimensionMismatch("2x2 loop expected".into()));
        }
        let ev = map.evaluator(0.0);
        let period = map.period_f64();
        let mut g = DEGREE_GRID;
        loop {
            let raw: Vec<std::result::Result<f64, f64>> = (0..=g)
                .into_par_iter()
                .map(|j| {
                    let x = j as f64 * period / g as f64;
                    let mut buf = [ZERO; 4];
                    ev.eval_into(x, &mut buf);
                    let det = buf[0].re * buf[3].re - buf[2].re * buf[1].re;
                    if det.abs() < 1e-12 {
                        Err(x)
                    } else {
                        Ok(polar_angle(&buf))
                    }
                })
                .collect();
            let mut vals = Vec::with_capacity(g + 1);
            for r in raw {
                match r {
                    Ok(v) => vals.push(v),
                    Err(x) => return Err(Error::SingularOnGrid(x)),
                }
            }
            let mut lifted = Vec::with_capacity(g + 1);
            let mut acc = vals[0];
            lifted.push(acc);
            let mut max_jump = 0.0f64;
            for w in vals.windows(2) {
                let d = wrap(w[1] - w[0]);
                max_jump = max_jump.max(d.abs());
                acc += d;
                lifted.push(acc);
            }
            if max_jump <= 0.25 * TURN || g >= MAX_GRID {
                return Ok(AngleLift {
                    period,
                    values: lifted,
                });
            }
            g *= 2;
        }
    }

    fn total_turns(&self) -> f64 {
        (self.values.last().unwrap() - self.values[0]) / TURN
    }

    /// Lifted angle at arbitrary `x`, assuming the loop has degree zero.
    fn at(&self, x: f64, raw: f64) -> f64 {
        let g = self.values.len() - 1;
        let s = x.rem_euclid(self.period) / self.period * g as f64;
        let i = (s.floor() as usize).min(g - 1);
        let f = s - i as f64;
        let guess = self.values[i] * (1.0 - f) + self.values[i + 1] * f;
        raw + TURN * ((guess - raw) / TURN).round()
    }
}

/// Winding number of the rotation part of an `SL(2, R)` loop over its own
/// period, so `R_{2 pi k x}` has degree `k`.
pub fn degree(map: &TrigMatrixMap) -> Result<i64> {
    let lift = AngleLift::new(map)?;
    Ok(lift.total_turns().round() as i64)
}

/// Projective lift `(x, t) -> (x + alpha, t + f(x, t))`, angles in turns.
pub struct Lift {
    ev: Evaluator,
    angle: AngleLift,
    alpha: f64,
    pub x: f64,
    pub t: f64,
    pub steps: usize,
}

impl Lift {
    pub fn new(spec: &CocycleSpec, x: f64, t: f64) -> Result<Self> {
        if spec.group != Group::SL2R {
            return Err(Error::Precondition("SL(2, R) cocycle expected".into()));
        }
        let angle = AngleLift::new(&spec.map)?;
        let deg = angle.total_turns().round() as i64;
        if deg != 0 {
            return Err(Error::NonzeroDegree(deg));
        }
        Ok(Lift {
            ev: spec.map.evaluator(0.0),
            angle,
            alpha: spec.alpha(),
            x,
            t,
            steps: 0,
        })
    }

    /// Increment `f(x, t)` in turns.
    pub fn increment(&self, x: f64, t: f64) -> f64 {
        let mut a = [ZERO; 4];
        self.ev.eval_into(x, &mut a);
        let theta = self.angle.at(x, polar_angle(&a));
        // positive part P = R_{-theta} A moves directions by less than a quarter turn
        let (s, c) = theta.sin_cos();
        let (a11, a21, a12, a22) = (a[0].re, a[1].re, a[2].re, a[3].re);
        let p11 = c * a11 + s * a21;
        let p21 = -s * a11 + c * a21;
        let p12 = c * a12 + s * a22;
        let p22 = -s * a12 + c * a22;
        let (vs, vc) = (TURN * t).sin_cos();
        let px = p11 * vc + p12 * vs;
        let py = p21 * vc + p22 * vs;
        let g = wrap(py.atan2(px) - TURN * t);
        (theta + g) / TURN
    }

    pub fn step(&mut self) {
        let f = self.increment(self.x, self.t);
        self.t += f;
        self.x = (self.x + self.alpha).rem_euclid(self.angle.period);
        self.steps += 1;
    }

    /// Unit vector with angle `t` (turns).
    pub fn direction(&self) -> [f64; 2] {
        let (s, c) = (TURN * self.t).sin_cos();
        [c, s]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationParams {
    pub iters: usize,
    pub starts: usize,
    pub seed: u64,
}

impl Default for RotationParams {
    fn default() -> Self {
        RotationParams {
            iters: 100_000,
            starts: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationReport {
    /// Mean angular increment reduced to `[0, 1)`.
    pub rho: f64,
    /// Unreduced mean increment (turns per iterate).
    pub rate: f64,
    /// Max minus min of the per-start rates.
    pub spread: f64,
    /// Whether the spread is below `5 / sqrt(N)`.
    pub consistent: bool,
    pub params: RotationParams,
}

/// Fibered rotation number of an `SL(2, R)` cocycle homotopic to the identity.
pub fn rotation_number(spec: &CocycleSpec, params: &RotationParams) -> Result<RotationReport> {
    let base = Lift::new(spec, 0.0, 0.0)?;
    let period = spec.map.period_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let starts: Vec<(f64, f64)> = (0..params.starts.max(1))
        .map(|_| (rng.gen_range(0.0..period), rng.gen_range(0.0..1.0)))
        .collect();
    let n = params.iters.max(1);
    let rates: Vec<f64> = starts
        .par_iter()
        .map(|&(x0, t0)| {
            let mut x = x0;
            let mut t = t0;
            for _ in 0..n {
                t += base.increment(x, t);
                x = (x + base.alpha).rem_euclid(period);
            }
            (t - t0) / n as f64
        })
        .collect();
    let rate = rates.iter().sum::<f64>() / rates.len() as f64;
    let spread = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - rates.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(RotationReport {
        rho: rate.rem_euclid(1.0),
        rate,
        spread,
        consistent: spread < 5.0 / (n as f64).sqrt(),
        params: *params,
    })
}

/// Monodromy sign of a real bundle: whether its wedge representative
/// returns to itself (`+1`) or to its negative (`-1`) after one period.
pub fn monodromy_sign(frames: &FrameGrid) -> Result<i8> {
    if let Some((index, &overlap)) = frames
        .overlaps
        .iter()
        .enumerate()
        .find(|(_, o)| **o <= MIN_OVERLAP)
    {
        return Err(Error::AlignmentLost { index, overlap });
    }
    frames
        .tau()
        .ok_or_else(|| Error::Precondition("monodromy sign needs a real bundle".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryDiagnostics {
    /// Distance of `2 rho` to the nearest integer (`None` if the degree is nonzero).
    pub two_rho_int_residual: Option<f64>,
    pub rho: Option<f64>,
    pub degree: i64,
    pub class_residual: f64,
    /// `10 / sqrt(N)`, the tolerance for the rotation-number check.
    pub rho_tolerance: f64,
    pub passes: bool,
}

/// Bundles the rotation-number, degree and class checks for an `SL(2, R)` spec.
pub fn symmetry_diagnostics(spec: &CocycleSpec, params: &RotationParams) -> Result<SymmetryDiagnostics> {
    let deg = degree(&spec.map)?;
    let class = class_residual(&spec.map, spec.symmetry);
    let tol = 10.0 / (params.iters.max(1) as f64).sqrt();
    let (rho, resid) = if deg == 0 {
        let r = rotation_number(spec, params)?;
        let two = 2.0 * r.rho;
        (Some(r.rho), Some((two - two.round()).abs()))
    } else {
        (None, None)
    };
    let passes = deg == 0 && class < 1e-8 && resid.is_some_and(|r| r < tol);
    Ok(SymmetryDiagnostics {
        two_rho_int_residual: resid,
        rho,
        degree: deg,
        class_residual: class,
        rho_tolerance: tol,
        passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{cf_expand, AlphaInput};
    use crate::families;
    use crate::linalg;
    use crate::trigmat::Symmetry;

    fn spec(map: TrigMatrixMap) -> CocycleSpec {
        let f = cf_expand(&AlphaInput::golden(), 30).unwrap();
        CocycleSpec::new(f, map, Group::SL2R, Symmetry::None).unwrap()
    }

    #[test]
    fn rotation_loops_have_their_degree() {
        for k in -2..=3 {
            assert_eq!(degree(&families::rotation_loop(k, 1)).unwrap(), k);
        }
        let hyp = TrigMatrixMap::constant(linalg::diag_real(&[3.0, 1.0 / 3.0]));
        assert_eq!(degree(&hyp).unwrap(), 0);
    }

    #[test]
    fn rigid_rotation_number() {
        let s = spec(TrigMatrixMap::constant(families::rotation_turns(0.3)));
        let p = RotationParams { iters: 1000, starts: 3, seed: 1 };
        let r = rotation_number(&s, &p).unwrap();
        assert!((r.rho - 0.3).abs() < 1e-3, "{r:?}");
        let id = spec(TrigMatrixMap::identity(2));
        assert!(rotation_number(&id, &p).unwrap().rho.abs() < 1e-12);
    }

    #[test]
    fn nonzero_degree_rejected() {
        let s = spec(families::rotation_loop(1, 1));
        assert_eq!(
            rotation_number(&s, &RotationParams::default()).unwrap_err(),
            Error::NonzeroDegree(1)
        );
    }

    #[test]
    fn lift_tracks_iterated_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let map = families::random_sl2_loop(&mut rng, 2, 0.4, 3);
        let s = spec(map.clone());
        let mut lift = Lift::new(&s, 0.2, 0.1).unwrap();
        let mut v = linalg::from_rows(&[&[lift.direction()[0]], &[lift.direction()[1]]]);
        for _ in 0..200 {
            let a = map.eval(lift.x);
            v = &a * &v;
            v /= C64::new(v.norm(), 0.0);
            lift.step();
            let d = lift.direction();
            assert!((v[(0, 0)].re - d[0]).abs() < 1e-9 && (v[(1, 0)].re - d[1]).abs() < 1e-9);
        }
    }
}

//! Analytic diagonalization of 1-periodic Hermitian families, with the
//! eigenvalue branches permuted by one period, the resulting analytic
//! Sylvester inertia, Krein forms, and Hermitian-symplectic block
//! diagonalization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockdiag_real::{assemble, conjugate_and_split, BlockParams, CanonicalFrame, ConjugacyPackage};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::splitting::{oseledets_bundles, Bundles, FrameGrid};
use crate::trigmat::{fit_trig, Group, CocycleSpec, TrigMatrixMap};

const MATCH_DEVIATION: f64 = 0.1;
const EQUAL_BRANCH_TOL: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-10;

/// Cycle decomposition of a permutation together with its block-cyclic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PermCycles {
    /// Each cycle lists `a, sigma(a), sigma(sigma(a)), ..` starting from its smallest element.
    pub cycles: Vec<Vec<usize>>,
    /// `diag(Gamma_{r_1}, .., Gamma_{r_s})` in the cycle-relabelled basis.
    pub gamma: CMat,
    /// `prod r_j`.
    pub k: usize,
}

pub fn perm_cycles(sigma: &[usize]) -> Result<PermCycles> {
    let m = sigma.len();
    let mut seen = vec![false; m];
    for &s in sigma {
        if s >= m || std::mem::replace(&mut seen[s], true) {
            return Err(Error::Precondition(format!("{sigma:?} is not a permutation")));
        }
    }
    let mut visited = vec![false; m];
    let mut cycles = Vec::new();
    for start in 0..m {
        if visited[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut a = start;
        while !visited[a] {
            visited[a] = true;
            cycle.push(a);
            a = sigma[a];
        }
        cycles.push(cycle);
    }
    let blocks: Vec<CMat> = cycles.iter().map(|c| linalg::cyclic_gamma(c.len())).collect();
    let k = cycles.iter().map(Vec::len).product();
    Ok(PermCycles {
        gamma: linalg::block_diag(&blocks),
        cycles,
        k,
    })
}

/// `Q_r(x)[j, k] = r^{-1/2} exp(2 pi i j (x + k) / r)`, rows `j = 1..r`,
/// columns `k = 0..r-1`. Unitary, and `Q_r(x + 1) = Q_r(x) Gamma_r`.
pub fn build_q(r: usize, x: f64) -> CMat {
    let scale = 1.0 / (r as f64).sqrt();
    CMat::from_fn(r, r, |row, k| {
        let j = (row + 1) as f64;
        C64::from_polar(scale, 2.0 * std::f64::consts::PI * j * (x + k as f64) / r as f64)
    })
}

/// Tracking grid controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackParams {
    pub grid: usize,
    /// Maximum number of inserted midpoints.
    pub refine_budget: usize,
    /// Base grid is `x_i = (i + offset) / grid`.
    pub offset: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        TrackParams {
            grid: 256,
            refine_budget: 4096,
            offset: 0.5,
        }
    }
}

/// Eigenvalue curves and a continuous eigenframe over one period.
#[derive(Debug, Clone)]
pub struct HermTrack {
    /// Tracked abscissae in `[x_0, x_0 + 1)`, including refinement points.
    pub xs: Vec<f64>,
    /// Positions of the base grid inside `xs`.
    pub base_index: Vec<usize>,
    /// `curves[i][c]`: eigenvalue carried by column `c` at `xs[i]`.
    pub curves: Vec<Vec<f64>>,
    pub frames: Vec<CMat>,
    /// Continuation of the frame to `x_0 + 1`.
    pub end_frame: CMat,
    pub end_curves: Vec<f64>,
    /// Column count of each eigenvalue group, in column order.
    pub group_sizes: Vec<usize>,
    /// Group permutation: the group at column block `g` continues into block `sigma[g]`.
    pub sigma: Vec<usize>,
    pub cycles: PermCycles,
    /// Full `m x m` block-cyclic monodromy (`Gamma` tensored with the group identities).
    pub gamma: CMat,
    pub diag_residual: f64,
    pub monodromy_residual: f64,
    pub refinements: usize,
}

impl HermTrack {
    pub fn k(&self) -> usize {
        self.cycles.k
    }
    pub fn x0(&self) -> f64 {
        self.xs[0]
    }
}

struct Point {
    x: f64,
    values: Vec<f64>,
    /// One orthonormal block per group.
    groups: Vec<CMat>,
}

fn group_values(vals: &[f64], sizes: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut i = 0;
    for &s in sizes {
        out.push(vals[i..i + s].iter().sum::<f64>() / s as f64);
        i += s;
    }
    out
}

/// Eigen-decomposition at `x` with the `merges` smallest adjacent gaps fused.
fn eigen_point(g: &TrigMatrixMap, x: f64, merges: usize) -> Option<(Vec<f64>, Vec<usize>, Vec<CMat>)> {
    let (vals, vecs) = linalg::herm_eigen(&g.eval(x));
    let m = vals.len();
    let mut gaps: Vec<(f64, usize)> = (0..m.saturating_sub(1)).map(|i| (vals[i + 1] - vals[i], i)).collect();
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut fused = vec![false; m.saturating_sub(1)];
    for &(gap, i) in gaps.iter().take(merges) {
        if gap > EQUAL_BRANCH_TOL * (1.0 + vals[i].abs()) {
            return None;
        }
        fused[i] = true;
    }
    let mut sizes = Vec::new();
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 0..m {
        if fused.get(i) != Some(&true) {
            sizes.push(i + 1 - start);
            blocks.push(vecs.columns(start, i + 1 - start).into_owned());
            start = i + 1;
        }
    }
    let gv = group_values(&vals, &sizes);
    Some((gv, sizes, blocks))
}

/// Maximal-weight assignment by dynamic programming over subsets.
fn best_assignment(w: &[Vec<f64>]) -> Vec<usize> {
    let n = w.len();
    let full = 1usize << n;
    let mut best = vec![f64::NEG_INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = 0.0;
    for mask in 0..full {
        if best[mask] == f64::NEG_INFINITY {
            continue;
        }
        let row = mask.count_ones() as usize;
        if row == n {
            continue;
        }
        for (col, &weight) in w[row].iter().enumerate() {
            if mask & (1 << col) == 0 {
                let next = mask | (1 << col);
                let v = best[mask] + weight;
                if v > best[next] {
                    best[next] = v;
                    choice[next] = col;
                }
            }
        }
    }
    let mut out = vec![0; n];
    let mut mask = full - 1;
    for row in (0..n).rev() {
        let col = choice[mask];
        out[row] = col;
        mask &= !(1 << col);
    }
    out
}

fn group_overlap(a: &CMat, b: &CMat) -> f64 {
    if a.ncols() != b.ncols() {
        return 0.0;
    }
    (a.adjoint() * b).norm() / (a.ncols() as f64).sqrt()
}

/// Matches groups `prev -> next`; `None` if the overlaps are not within
/// [`MATCH_DEVIATION`] of a permutation.
fn match_groups(prev: &[CMat], next: &[CMat]) -> Option<Vec<usize>> {
    let n = prev.len();
    let w: Vec<Vec<f64>> = prev
        .iter()
        .map(|p| next.iter().map(|q| group_overlap(p, q)).collect())
        .collect();
    let greedy: Vec<usize> = w
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap()
        })
        .collect();
    let within = |assign: &[usize]| {
        let mut used = vec![false; n];
        for &c in assign {
            if std::mem::replace(&mut used[c], true) {
                return false;
            }
        }
        (0..n).all(|r| (0..n).all(|c| {
            let target = if assign[r] == c { 1.0 } else { 0.0 };
            (w[r][c] - target).abs() < MATCH_DEVIATION
        }))
    };
    if within(&greedy) {
        return Some(greedy);
    }
    if n > 20 {
        return None;
    }
    let assign = best_assignment(&w);
    within(&assign).then_some(assign)
}

fn initial_gauge(block: &CMat) -> CMat {
    if block.ncols() != 1 {
        return block.clone();
    }
    let pivot = block
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .copied()
        .unwrap();
    block * (pivot.conj() / pivot.norm())
}

fn advance(prev: &Point, x: f64, g: &TrigMatrixMap, merges: usize, sizes: &[usize]) -> Option<Point> {
    let (vals, new_sizes, blocks) = eigen_point(g, x, merges)?;
    let mut sorted_a = sizes.to_vec();
    let mut sorted_b = new_sizes.clone();
    sorted_a.sort_unstable();
    sorted_b.sort_unstable();
    if sorted_a != sorted_b {
        return None;
    }
    let assign = match_groups(&prev.groups, &blocks)?;
    let groups = prev
        .groups
        .iter()
        .zip(&assign)
        .map(|(p, &c)| {
            let q = &blocks[c];
            q * linalg::polar_unitary(&(q.adjoint() * p))
        })
        .collect();
    Some(Point {
        x,
        values: assign.iter().map(|&c| vals[c]).collect(),
        groups,
    })
}

fn check_hermitian(g: &TrigMatrixMap, grid: usize) -> Result<()> {
    let worst = (0..grid)
        .into_par_iter()
        .map(|j| {
            let a = g.eval(j as f64 / grid as f64);
            linalg::max_abs(&(&a - a.adjoint()))
        })
        .reduce(|| 0.0, f64::max);
    if worst > HERMITIAN_TOL {
        return Err(Error::NotHermitian(worst));
    }
    Ok(())
}

/// Number of adjacent sorted eigenvalue pairs that coincide on the whole grid.
fn identical_branch_merges(g: &TrigMatrixMap, grid: usize) -> usize {
    let spectra: Vec<Vec<f64>> = (0..grid)
        .into_par_iter()
        .map(|j| linalg::herm_eigen(&g.eval(j as f64 / grid as f64)).0)
        .collect();
    let m = g.dim();
    (0..m.saturating_sub(1))
        .filter(|&i| {
            spectra
                .iter()
                .all(|v| v[i + 1] - v[i] < EQUAL_BRANCH_TOL * (1.0 + v[i].abs()))
        })
        .count()
}

fn concat(blocks: &[CMat]) -> CMat {
    blocks
        .iter()
        .skip(1)
        .fold(blocks[0].clone(), |acc, b| linalg::hcat(&acc, b))
}

/// Tracks the analytic eigenvalue branches and eigenvectors of a 1-periodic
/// Hermitian family over one period.
pub fn herm_track(g: &TrigMatrixMap, params: &TrackParams) -> Result<HermTrack> {
    if g.period() != 1 {
        return Err(Error::Precondition("Hermitian family must be 1-periodic".into()));
    }
    if params.grid < 4 {
        return Err(Error::GridTooCoarse(params.grid));
    }
    check_hermitian(g, params.grid.max(64))?;
    let merges = identical_branch_merges(g, params.grid);
    let step = 1.0 / params.grid as f64;
    let x0 = params.offset * step;
    let (vals, sizes, blocks) = eigen_point(g, x0, merges).ok_or(Error::DegenerateUnresolved(x0))?;
    let mut cur = Point {
        x: x0,
        values: vals,
        groups: blocks.iter().map(initial_gauge).collect(),
    };
    let mut points = Vec::new();
    let mut base_index = vec![0];
    let mut targets: Vec<(f64, bool)> = (1..=params.grid).rev().map(|i| (x0 + i as f64 * step, true)).collect();
    let mut refinements = 0;
    while let Some((xt, is_base)) = targets.pop() {
        match advance(&cur, xt, g, merges, &sizes) {
            Some(next) => {
                points.push(std::mem::replace(&mut cur, next));
                if is_base && xt < x0 + 1.0 - step / 2.0 {
                    base_index.push(points.len());
                }
            }
            None => {
                if refinements >= params.refine_budget || xt - cur.x < 1e-12 {
                    return Err(Error::DegenerateUnresolved(xt));
                }
                refinements += 1;
                targets.push((xt, is_base));
                targets.push(((cur.x + xt) / 2.0, false));
            }
        }
    }
    let end = cur;
    let start = &points[0];
    // monodromy on groups: end group `a` lands on start group `sigma[a]`
    let sigma = match_groups(&end.groups, &start.groups).ok_or(Error::DegenerateUnresolved(end.x))?;
    let holonomy: Vec<CMat> = end
        .groups
        .iter()
        .zip(&sigma)
        .map(|(e, &s)| start.groups[s].adjoint() * e)
        .collect();
    let cycles = perm_cycles(&sigma)?;
    // per-group right gauge C_a(t) = B_a V^{-t}
    let n_groups = sigma.len();
    let mut b_factor: Vec<CMat> = vec![CMat::zeros(0, 0); n_groups];
    let mut root: Vec<CMat> = vec![CMat::zeros(0, 0); n_groups];
    for cycle in &cycles.cycles {
        let r = cycle.len();
        let s = end.groups[cycle[0]].ncols();
        let h = cycle.iter().fold(linalg::eye(s), |acc, &a| &holonomy[a] * acc);
        let mut b = linalg::eye(s);
        for &a in cycle {
            b_factor[a] = b.clone();
            root[a] = h.clone();
            b = &holonomy[a] * &b * linalg::unitary_power(&h, -1.0 / r as f64);
        }
    }
    let order: Vec<usize> = cycles.cycles.iter().flatten().copied().collect();
    let cycle_len: Vec<usize> = {
        let mut v = vec![0; n_groups];
        for c in &cycles.cycles {
            for &a in c {
                v[a] = c.len();
            }
        }
        v
    };
    let regauge = |p: &Point| -> (CMat, Vec<f64>) {
        let t = p.x - x0;
        let blocks: Vec<CMat> = order
            .iter()
            .map(|&a| &p.groups[a] * &b_factor[a] * linalg::unitary_power(&root[a], -t / cycle_len[a] as f64))
            .collect();
        let vals: Vec<f64> = order
            .iter()
            .flat_map(|&a| std::iter::repeat_n(p.values[a], p.groups[a].ncols()))
            .collect();
        (concat(&blocks), vals)
    };
    let tracked: Vec<(CMat, Vec<f64>)> = points.par_iter().map(regauge).collect();
    let (end_frame, end_curves) = regauge(&end);
    let group_sizes: Vec<usize> = order.iter().map(|&a| start.groups[a].ncols()).collect();
    let gamma = {
        let blocks: Vec<CMat> = cycles
            .cycles
            .iter()
            .map(|c| {
                let s = start.groups[c[0]].ncols();
                linalg::cyclic_gamma(c.len()).kronecker(&linalg::eye(s))
            })
            .collect();
        linalg::block_diag(&blocks)
    };
    let relabel: Vec<usize> = {
        let mut pos = vec![0; n_groups];
        for (i, &a) in order.iter().enumerate() {
            pos[a] = i;
        }
        order.iter().map(|&a| pos[sigma[a]]).collect()
    };
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let diag_residual = xs
        .par_iter()
        .zip(&tracked)
        .map(|(x, (u, vals))| {
            let d = u.adjoint() * g.eval(*x) * u - linalg::diag_real(vals);
            linalg::max_abs(&d)
        })
        .reduce(|| 0.0, f64::max);
    let monodromy_residual = linalg::max_abs(&(&end_frame - &tracked[0].0 * &gamma));
    let relabelled_cycles = perm_cycles(&relabel)?;
    let (frames, curves) = tracked.into_iter().unzip();
    Ok(HermTrack {
        xs,
        base_index,
        curves,
        frames,
        end_frame,
        end_curves,
        group_sizes,
        sigma: relabel,
        cycles: relabelled_cycles,
        gamma,
        diag_residual,
        monodromy_residual,
        refinements,
    })
}

/// Result of the analytic Sylvester congruence `N^* G N = diag(I_p, -I_q)`.
#[derive(Debug, Clone)]
pub struct InertiaResult {
    pub p: usize,
    pub q: usize,
    pub xs: Vec<f64>,
    pub n: Vec<CMat>,
    pub end_n: CMat,
    /// `|N(x_0 + 1) - N(x_0)|`.
    pub period_residual: f64,
    pub congruence_residual: f64,
    /// Sign of the eigenvalue curves of each cycle.
    pub cycle_signs: Vec<i8>,
    pub track: HermTrack,
}

impl InertiaResult {
    /// `N` at the base grid points.
    pub fn base_frames(&self) -> Vec<CMat> {
        self.track.base_index.iter().map(|&i| self.n[i].clone()).collect()
    }
}

fn q_block(track: &HermTrack, x: f64) -> CMat {
    let mut col = 0;
    let blocks: Vec<CMat> = track
        .cycles
        .cycles
        .iter()
        .map(|c| {
            let s = track.group_sizes[col];
            col += c.len();
            build_q(c.len(), x).kronecker(&linalg::eye(s))
        })
        .collect();
    linalg::block_diag(&blocks)
}

pub fn sylvester_inertia(g: &TrigMatrixMap, params: &TrackParams) -> Result<InertiaResult> {
    let track = herm_track(g, params)?;
    let m = g.dim();
    for (x, vals) in track.xs.iter().zip(&track.curves) {
        let min_abs = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        if min_abs < 1e-6 {
            return Err(Error::NotInvertible { x: *x, min_abs });
        }
    }
    // columns are grouped by cycle; one sign per cycle
    let mut col_sign = vec![0i8; m];
    let mut cycle_signs = Vec::new();
    let mut col = 0;
    let mut group = 0;
    for c in &track.cycles.cycles {
        let width: usize = track.group_sizes[group..group + c.len()].iter().sum();
        let positive = track.curves.iter().all(|v| v[col..col + width].iter().all(|&l| l > 0.0));
        let negative = track.curves.iter().all(|v| v[col..col + width].iter().all(|&l| l < 0.0));
        let s = match (positive, negative) {
            (true, _) => 1,
            (_, true) => -1,
            _ => return Err(Error::NotInvertible { x: track.x0(), min_abs: 0.0 }),
        };
        cycle_signs.push(s);
        col_sign[col..col + width].fill(s);
        col += width;
        group += c.len();
    }
    let order: Vec<usize> = (0..m)
        .filter(|&i| col_sign[i] > 0)
        .chain((0..m).filter(|&i| col_sign[i] < 0))
        .collect();
    let p = col_sign.iter().filter(|&&s| s > 0).count();
    let mut sort = linalg::zeros(m, m);
    for (new, &old) in order.iter().enumerate() {
        sort[(old, new)] = C64::new(1.0, 0.0);
    }
    let build = |x: f64, u: &CMat, vals: &[f64]| -> CMat {
        let inv_sqrt: Vec<f64> = vals
            .iter()
            .zip(&col_sign)
            .map(|(l, &s)| 1.0 / (s as f64 * l).sqrt())
            .collect();
        u * linalg::diag_real(&inv_sqrt) * q_block(&track, x).adjoint() * &sort
    };
    let n: Vec<CMat> = track
        .xs
        .par_iter()
        .zip(track.frames.par_iter().zip(&track.curves))
        .map(|(x, (u, v))| build(*x, u, v))
        .collect();
    let end_n = build(track.x0() + 1.0, &track.end_frame, &track.end_curves);
    let target = {
        let mut d = vec![1.0; m];
        d[p..].fill(-1.0);
        linalg::diag_real(&d)
    };
    let congruence_residual = track
        .xs
        .par_iter()
        .zip(&n)
        .map(|(x, nx)| linalg::max_abs(&(nx.adjoint() * g.eval(*x) * nx - &target)))
        .reduce(|| 0.0, f64::max);
    let period_residual = linalg::max_abs(&(&end_n - &n[0]));
    Ok(InertiaResult {
        p,
        q: m - p,
        xs: track.xs.clone(),
        n,
        end_n,
        period_residual,
        congruence_residual,
        cycle_signs,
        track,
    })
}

/// Krein matrix `K = i [v_j^* J v_k]` of a frame and its signature.
#[derive(Debug, Clone, PartialEq)]
pub struct KreinData {
    pub matrix: CMat,
    pub positive: usize,
    pub negative: usize,
    pub zeros: usize,
}

impl KreinData {
    pub fn sign_difference(&self) -> i64 {
        self.positive as i64 - self.negative as i64
    }
    pub fn canonical(&self) -> bool {
        self.sign_difference() == 0 && self.zeros == 0
    }
}

pub fn krein_matrix(frame: &CMat) -> Result<KreinData> {
    let smin = linalg::singular_values(frame).last().copied().unwrap_or(0.0);
    if frame.ncols() == 0 || smin < 1e-10 {
        return Err(Error::RankDeficient(smin));
    }
    let j = linalg::symplectic_j(frame.nrows() / 2);
    let matrix = frame.adjoint() * j * frame * linalg::I;
    let (positive, negative, zeros) = linalg::inertia(&matrix, 1e-8);
    Ok(KreinData {
        matrix,
        positive,
        negative,
        zeros,
    })
}

/// Krein data of a bundle at every grid point.
pub fn krein_signature_grid(e: &FrameGrid) -> Result<Vec<KreinData>> {
    e.frames.iter().map(krein_matrix).collect()
}

/// Canonical Hermitian-symplectic frame (`T^* J T = J`) from `E^u`, `E^s`, `E^c`.
pub fn canonical_hsp_frame(eu: &FrameGrid, es: &FrameGrid, ec: Option<&FrameGrid>) -> Result<CanonicalFrame> {
    eu.same_grid(es)?;
    let m = eu.ambient();
    let d = m / 2;
    let n = eu.rank();
    let j = linalg::symplectic_j(d);
    let isotropy = eu
        .frames
        .iter()
        .chain(&es.frames)
        .map(|f| linalg::max_abs(&(f.adjoint() * &j * f)))
        .fold(0.0, f64::max);
    if isotropy > 1e-6 {
        return Err(Error::ResidualTooLarge {
            what: "isotropy".into(),
            residual: isotropy,
            tol: 1e-6,
        });
    }
    let (fu, fu_end) = eu.periodized_unitary()?;
    let pair = |u: &CMat, s: &CMat| -> Result<CMat> {
        let h = u.adjoint() * &j * s;
        let smin = linalg::singular_values(&h).last().copied().unwrap_or(0.0);
        if !(smin > 1e-6) {
            return Err(Error::DegeneratePairing(smin));
        }
        Ok(-(s * linalg::inverse(&h).ok_or(Error::DegeneratePairing(smin))?))
    };
    let vs: Vec<CMat> = fu.iter().zip(&es.frames).map(|(u, s)| pair(u, s)).collect::<Result<_>>()?;
    let vs_end = pair(&fu_end, &es.end_frame)?;
    let (center, center_end) = match ec {
        Some(c) if c.rank() > 0 => {
            c.same_grid(eu)?;
            let (fc, fc_end) = c.periodized_unitary()?;
            let k = c.rank() / 2;
            for kd in fc.iter().map(krein_matrix) {
                let kd = kd?;
                if kd.zeros > 0 {
                    return Err(Error::DegenerateForm(0.0));
                }
                if kd.sign_difference() != 0 {
                    return Err(Error::NonzeroSignature(kd.sign_difference()));
                }
            }
            let krein: Vec<CMat> = fc.iter().map(|f| f.adjoint() * &j * f * linalg::I).collect();
            let g = fc.len();
            let fit = fit_trig(&krein, 1, 1e-14)?;
            let inertia = sylvester_inertia(
                &fit.map,
                &TrackParams {
                    grid: g,
                    offset: 0.0,
                    ..TrackParams::default()
                },
            )?;
            let r = {
                let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                let mut r = linalg::zeros(2 * k, 2 * k);
                for i in 0..k {
                    r[(i, i)] = s;
                    r[(i, k + i)] = -s * linalg::I;
                    r[(k + i, i)] = s;
                    r[(k + i, k + i)] = s * linalg::I;
                }
                r
            };
            let split = |f: &CMat, nx: &CMat| {
                let pq = f * nx * &r;
                (pq.columns(0, k).into_owned(), pq.columns(k, k).into_owned())
            };
            let pairs: Vec<(CMat, CMat)> = fc
                .iter()
                .zip(inertia.base_frames())
                .map(|(f, nx)| split(f, &nx))
                .collect();
            let end = split(&fc_end, &inertia.end_n);
            (Some(pairs), Some(end))
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
    let symplectic_residual = frames
        .iter()
        .chain(std::iter::once(&end_frame))
        .map(|t| linalg::max_abs(&(t.adjoint() * &j * t - &j)))
        .fold(0.0, f64::max);
    if symplectic_residual > 1e-6 {
        return Err(Error::ResidualTooLarge {
            what: "Krein form".into(),
            residual: symplectic_residual,
            tol: 1e-6,
        });
    }
    Ok(CanonicalFrame {
        period: eu.period,
        n,
        frames,
        end_frame,
        tau: 1,
        symplectic_residual,
    })
}

/// Block diagonalization of a dominated Hermitian-symplectic (or real
/// symplectic) cocycle; the conjugacy is always 1-periodic on the map's circle.
pub fn blockdiag_hsp(spec: &CocycleSpec, bundles: &Bundles, params: &BlockParams) -> Result<ConjugacyPackage> {
    if !matches!(spec.group, Group::HSp(_) | Group::SpR(_) | Group::SL2R) {
        return Err(Error::Precondition("Hermitian-symplectic cocycle expected".into()));
    }
    let frame = canonical_hsp_frame(&bundles.unstable, &bundles.stable, bundles.center.as_ref())?;
    conjugate_and_split(spec, &frame, params, true)
}

pub fn blockdiag_hsp_auto(spec: &CocycleSpec, n: usize, params: &BlockParams) -> Result<ConjugacyPackage> {
    let bundles = oseledets_bundles(spec, n, &params.bundles)?;
    blockdiag_hsp(spec, &bundles, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycles_and_order() {
        let pc = perm_cycles(&[1, 2, 0, 4, 3]).unwrap();
        assert_eq!(pc.cycles, vec![vec![0, 1, 2], vec![3, 4]]);
        assert_eq!(pc.k, 6);
        let mut p = linalg::eye(5);
        for _ in 0..6 {
            p = &p * &pc.gamma;
        }
        assert!(linalg::max_abs(&(p - linalg::eye(5))) < 1e-15);
        assert!(perm_cycles(&[0, 0]).is_err());
    }

    #[test]
    fn q_is_unitary_and_shifts() {
        for r in 1..6 {
            let x = 0.3 * r as f64;
            let q = build_q(r, x);
            assert!(linalg::max_abs(&(q.adjoint() * &q - linalg::eye(r))) < 1e-12);
            let shifted = build_q(r, x + 1.0);
            assert!(linalg::max_abs(&(shifted - &q * linalg::cyclic_gamma(r))) < 1e-12);
        }
    }

    #[test]
    fn constant_family_is_untwisted() {
        let g = TrigMatrixMap::constant(linalg::diag_real(&[1.0, 2.0, 3.0]));
        let t = herm_track(&g, &TrackParams::default()).unwrap();
        assert_eq!(t.k(), 1);
        assert!(linalg::max_abs(&(&t.gamma - linalg::eye(3))) < 1e-15);
        assert!(t.monodromy_residual < 1e-12);
    }

    #[test]
    fn crossing_diagonal_follows_entries() {
        // diag(2 + sin 2 pi x, 2 - sin 2 pi x): the branches cross at x = 0 and 1/2
        let half_i = C64::new(0.0, 0.5);
        let g = TrigMatrixMap::from_terms(
            2,
            1,
            &[
                (0, linalg::diag_real(&[2.0, 2.0])),
                (1, linalg::diag_c(&[-half_i, half_i])),
                (-1, linalg::diag_c(&[half_i, -half_i])),
            ],
        )
        .unwrap();
        let t = herm_track(&g, &TrackParams::default()).unwrap();
        assert_eq!(t.k(), 1);
        let sin = |x: f64| (2.0 * std::f64::consts::PI * x).sin();
        let branch = (t.curves[0][0] - 2.0).signum() * sin(t.xs[0]).signum();
        for (x, v) in t.xs.iter().zip(&t.curves) {
            assert!((v[0] - 2.0 - branch * sin(*x)).abs() < 1e-12);
            assert!((v[1] - 2.0 + branch * sin(*x)).abs() < 1e-12);
        }
        assert!(t.monodromy_residual < 1e-10);
    }

    #[test]
    fn swapping_family_has_two_cycle() {
        let g = crate::families::swapping_hermitian();
        let t = herm_track(&g, &TrackParams::default()).unwrap();
        assert_eq!(t.k(), 2);
        assert!(t.monodromy_residual < 1e-8, "{}", t.monodromy_residual);
        let s = |x: f64| (std::f64::consts::PI * x).sin();
        let branch = (t.curves[0][0] - 2.0).signum();
        for (x, v) in t.xs.iter().zip(&t.curves) {
            assert!((v[0] - 2.0 - branch * s(*x)).abs() < 1e-10);
            assert!((v[1] - 2.0 + branch * s(*x)).abs() < 1e-10);
        }
        let r = sylvester_inertia(&g, &TrackParams::default()).unwrap();
        assert_eq!((r.p, r.q), (2, 0));
        assert!(r.period_residual < 1e-8 && r.congruence_residual < 1e-10);
    }

    #[test]
    fn signature_of_inverted_diagonal() {
        let g = TrigMatrixMap::constant(linalg::diag_real(&[1.0, -1.0]));
        let r = sylvester_inertia(&g, &TrackParams::default()).unwrap();
        assert_eq!((r.p, r.q), (1, 1));
        assert!(r.congruence_residual < 1e-12);
        assert!(r.period_residual < 1e-12);
    }

    #[test]
    fn canonical_pair_krein() {
        let mut f = linalg::zeros(4, 2);
        f[(0, 0)] = C64::new(1.0, 0.0);
        f[(2, 1)] = C64::new(1.0, 0.0);
        let k = krein_matrix(&f).unwrap();
        let want = CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), -linalg::I, linalg::I, C64::new(0.0, 0.0)]);
        assert!(linalg::max_abs(&(&k.matrix - want)) < 1e-15);
        assert!(k.canonical());
        let iso = linalg::hcat(&f.columns(0, 1).into_owned(), &linalg::zeros(4, 1));
        assert!(matches!(krein_matrix(&iso), Err(Error::RankDeficient(_))));
    }

    fn hsp_conjugate(seed: u64) -> (CocycleSpec, TrigMatrixMap) {
        use crate::arithmetic::{cf_expand, AlphaInput};
        use crate::trigmat::Symmetry;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let s = crate::families::random_hsp_loop(&mut rng, 2, 1, 0.3, 2);
        let phase = C64::from_polar(1.0, 0.4);
        let hyp = linalg::diag_c(&[phase * 3.0, phase / 3.0]);
        let center = linalg::rotation(0.9) * C64::from_polar(1.0, 1.3);
        let b = linalg::diamond(&hyp, &center);
        let freq = cf_expand(&AlphaInput::golden(), 30).unwrap();
        let a = s
            .shift(freq.value())
            .mul(&TrigMatrixMap::constant(b))
            .unwrap()
            .mul(&s.hsp_inverse())
            .unwrap()
            .truncate(1e-15);
        (CocycleSpec::new(freq, a, Group::HSp(4), Symmetry::None).unwrap(), s)
    }

    #[test]
    fn hsp_round_trip() {
        let (spec, s) = hsp_conjugate(11);
        let params = BlockParams::default();
        let bundles = oseledets_bundles(&spec, 1, &params.bundles).unwrap();
        for kd in krein_signature_grid(bundles.center.as_ref().unwrap()).unwrap() {
            assert_eq!(kd.sign_difference(), 0);
        }
        let pkg = blockdiag_hsp(&spec, &bundles, &params).unwrap();
        assert_eq!(pkg.chi, 1);
        assert!(pkg.residual_conj < 1e-6, "{}", pkg.residual_conj);
        assert!(pkg.residual_sympl < 1e-8);
        assert!(pkg.residual_dual < 1e-6);
        assert!((pkg.lambda_exponent() - 3f64.ln()).abs() < 1e-8);
        for (x, t) in pkg.xs.iter().zip(&pkg.t).step_by(5) {
            let g = linalg::inverse(&s.eval(*x)).unwrap() * t;
            assert!(crate::blockdiag_real::off_block_residual(&g, 2, 1) < 1e-6);
        }
    }
}

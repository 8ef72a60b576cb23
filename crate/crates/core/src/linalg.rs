//! Dense complex linear-algebra helpers shared by the cocycle modules.
//!
//! Everything works on `DMatrix<Complex64>`; real data is stored with zero
//! imaginary parts. Dimensions in this crate are small (m <= 8), so clarity
//! wins over blocking or in-place tricks.

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Real matrix from row-major nested slices.
pub fn from_rows(rows: &[&[f64]]) -> CMat {
    let r = rows.len();
    let c = if r == 0 { 0 } else { rows[0].len() };
    CMat::from_fn(r, c, |i, j| cr(rows[i][j]))
}

pub fn diag_real(d: &[f64]) -> CMat {
    let n = d.len();
    CMat::from_fn(n, n, |i, j| if i == j { cr(d[i]) } else { ZERO })
}

pub fn diag_c(d: &[C64]) -> CMat {
    let n = d.len();
    CMat::from_fn(n, n, |i, j| if i == j { d[i] } else { ZERO })
}

/// Standard symplectic form `[[0, -I_d], [I_d, 0]]` on a space of dimension `2d`.
pub fn symplectic_j(d: usize) -> CMat {
    let mut j = zeros(2 * d, 2 * d);
    for i in 0..d {
        j[(i, d + i)] = cr(-1.0);
        j[(d + i, i)] = ONE;
    }
    j
}

/// `diag(-1, I_{n-1})`.
pub fn twist_t(n: usize) -> CMat {
    let mut t = eye(n);
    t[(0, 0)] = cr(-1.0);
    t
}

/// `diag(T_d, T_d)`.
pub fn twist_p(d: usize) -> CMat {
    let mut p = eye(2 * d);
    p[(0, 0)] = cr(-1.0);
    p[(d, d)] = cr(-1.0);
    p
}

/// Nilpotent `[[0, 1], [0, 0]]`.
pub fn nilpotent_l() -> CMat {
    from_rows(&[&[0.0, 1.0], &[0.0, 0.0]])
}

/// Cyclic shift `[[0, 1], [I_{r-1}, 0]]`; `(U Γ_r)` moves column `k+1` into slot `k`.
pub fn cyclic_gamma(r: usize) -> CMat {
    let mut g = zeros(r, r);
    if r == 1 {
        g[(0, 0)] = ONE;
        return g;
    }
    g[(0, r - 1)] = ONE;
    for i in 1..r {
        g[(i, i - 1)] = ONE;
    }
    g
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(n, m);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

pub fn rotation(theta: f64) -> CMat {
    let (s, c) = theta.sin_cos();
    from_rows(&[&[c, -s], &[s, c]])
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return vec![];
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().cloned().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_imag(m: &CMat) -> f64 {
    m.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

pub fn real_part(m: &CMat) -> CMat {
    m.map(|z| cr(z.re))
}

/// Columns of `Q` from a thin QR factorisation, with the sign convention that
/// `R` has a real nonnegative diagonal.
pub fn orthonormalize(m: &CMat) -> CMat {
    let (q, _) = thin_qr(m);
    q
}

/// Thin QR with `diag(R)` real and nonnegative.
pub fn thin_qr(m: &CMat) -> (CMat, CMat) {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let k = r.nrows().min(r.ncols());
    for i in 0..k {
        let d = r[(i, i)];
        let a = d.norm();
        if a > 0.0 {
            let ph = d / a;
            // Q R = (Q ph) (conj(ph) R)
            for row in 0..q.nrows() {
                q[(row, i)] *= ph;
            }
            for col in 0..r.ncols() {
                r[(i, col)] *= ph.conj();
            }
        }
    }
    (q, r)
}

/// Unitary polar factor `U V*` of a square matrix (closest unitary in Frobenius norm).
pub fn polar_unitary(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    u * vt
}

/// Distance between the column spans of two orthonormal frames of equal rank:
/// the sine of the largest principal angle, `||(I - Q Q*) P||_2`.
pub fn subspace_distance(p: &CMat, q: &CMat) -> f64 {
    if p.ncols() == 0 {
        return 0.0;
    }
    let proj = q * (q.adjoint() * p);
    op_norm(&(p - proj))
}

/// Cosines of principal angles between the spans of two orthonormal frames.
pub fn principal_cosines(p: &CMat, q: &CMat) -> Vec<f64> {
    singular_values(&(p.adjoint() * q))
}

/// Hermitian eigen-decomposition with eigenvalues sorted ascending.
pub fn herm_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let hs = (h + h.adjoint()) * cr(0.5);
    let eig = SymmetricEigen::new(hs);
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Orthonormal basis of the orthogonal complement of the span of an orthonormal frame.
pub fn orth_complement(f: &CMat) -> CMat {
    let m = f.nrows();
    let k = f.ncols();
    let proj = eye(m) - f * f.adjoint();
    let (vals, vecs) = herm_eigen(&proj);
    // eigenvalues are ~0 (k of them) and ~1 (m - k of them), ascending
    let _ = vals;
    let cols: Vec<usize> = (k..m).collect();
    let out = vecs.select_columns(cols.iter());
    orthonormalize(&out)
}

/// Basis of the intersection of two subspaces given by orthonormal frames,
/// assuming the intersection has dimension `dim`.
pub fn subspace_intersection(p: &CMat, q: &CMat, dim: usize) -> CMat {
    let m = p.nrows();
    let (a, b) = (p.ncols(), q.ncols());
    let mut stacked = zeros(m, a + b);
    stacked.view_mut((0, 0), (m, a)).copy_from(p);
    stacked.view_mut((0, a), (m, b)).copy_from(&(-q));
    // null vectors of [P, -Q]: smallest eigenvectors of the Gram matrix
    let gram = stacked.adjoint() * &stacked;
    let (_, vecs) = herm_eigen(&gram);
    let coeffs = vecs.columns(0, dim).rows(0, a).into_owned();
    orthonormalize(&(p * coeffs))
}

/// `k`-th compound (exterior power) matrix. Index sets are in lexicographic order.
pub fn compound(m: &CMat, k: usize) -> CMat {
    let n = m.nrows();
    if k == 0 {
        return eye(1);
    }
    let subsets = k_subsets(n, k);
    let s = subsets.len();
    CMat::from_fn(s, s, |i, j| {
        let sub = CMat::from_fn(k, k, |a, b| m[(subsets[i][a], subsets[j][b])]);
        sub.determinant()
    })
}

pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `W^s` for a unitary (or at least normal, invertible) `W`, using the
/// principal logarithm of its eigenvalues.
pub fn unitary_power(w: &CMat, s: f64) -> CMat {
    let n = w.nrows();
    let schur = Schur::new(w.clone());
    let (q, t) = schur.unpack();
    let d: Vec<C64> = (0..n)
        .map(|i| {
            let z = t[(i, i)];
            let (r, th) = z.to_polar();
            C64::from_polar(r.powf(s), th * s)
        })
        .collect();
    &q * diag_c(&d) * q.adjoint()
}

/// `R^s` for a real rotation `R` in SO(n), returned as a real matrix.
pub fn rotation_power(r: &CMat, s: f64) -> CMat {
    let n = r.nrows();
    match n {
        0 => eye(0),
        1 => eye(1),
        2 => {
            let th = r[(1, 0)].re.atan2(r[(0, 0)].re);
            rotation(th * s)
        }
        _ => real_part(&unitary_power(r, s)),
    }
}

/// `exp(W)` for a traceless `2 x 2` matrix: `cosh(mu) I + sinh(mu)/mu W`, `mu^2 = -det W`.
pub fn expm_traceless2(w: &CMat) -> CMat {
    let det = w[(0, 0)] * w[(1, 1)] - w[(0, 1)] * w[(1, 0)];
    let mu = (-det).sqrt();
    let sinhc = if mu.norm() < 1e-8 {
        ONE + mu * mu / 6.0
    } else {
        mu.sinh() / mu
    };
    eye(2) * mu.cosh() + w * sinhc
}

/// Inverse via LU; `None` if singular.
pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

/// Inverse of a (Hermitian-)symplectic matrix: `-J A* J`.
pub fn symplectic_inverse(a: &CMat) -> CMat {
    let d = a.nrows() / 2;
    let j = symplectic_j(d);
    -(&j * a.adjoint() * &j)
}

/// Inverse of a real symplectic matrix stored as complex: `-J A^T J`.
pub fn real_symplectic_inverse(a: &CMat) -> CMat {
    let d = a.nrows() / 2;
    let j = symplectic_j(d);
    -(&j * a.transpose() * &j)
}

/// Interleaved embedding of two (Hermitian-)symplectic matrices, with the
/// first block on coordinates `{0..n1} ∪ {d..d+n1}` and the second on the rest.
pub fn diamond(s1: &CMat, s2: &CMat) -> CMat {
    let n1 = s1.nrows() / 2;
    let n2 = s2.nrows() / 2;
    let d = n1 + n2;
    let mut out = zeros(2 * d, 2 * d);
    let idx1: Vec<usize> = (0..n1).chain(d..d + n1).collect();
    let idx2: Vec<usize> = (n1..d).chain(d + n1..2 * d).collect();
    for (a, &ia) in idx1.iter().enumerate() {
        for (b, &ib) in idx1.iter().enumerate() {
            out[(ia, ib)] = s1[(a, b)];
        }
    }
    for (a, &ia) in idx2.iter().enumerate() {
        for (b, &ib) in idx2.iter().enumerate() {
            out[(ia, ib)] = s2[(a, b)];
        }
    }
    out
}

/// Coordinate index sets `(hyperbolic, center)` of the diamond layout with
/// an `n`-dimensional hyperbolic half inside `Sp(2d)`.
pub fn diamond_indices(d: usize, n: usize) -> (Vec<usize>, Vec<usize>) {
    let hyp = (0..n).chain(d..d + n).collect();
    let cen = (n..d).chain(d + n..2 * d).collect();
    (hyp, cen)
}

pub fn select(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn hcat(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    out
}

/// Inertia of a Hermitian matrix with a zero band: `(positive, negative, zero)`.
pub fn inertia(h: &CMat, zero_band: f64) -> (usize, usize, usize) {
    let (vals, _) = herm_eigen(h);
    let p = vals.iter().filter(|&&v| v > zero_band).count();
    let q = vals.iter().filter(|&&v| v < -zero_band).count();
    (p, q, vals.len() - p - q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_squares_to_minus_identity() {
        let j = symplectic_j(3);
        assert!(max_abs(&(&j * &j + eye(6))) < 1e-15);
    }

    #[test]
    fn gamma_power_is_identity() {
        for r in 1..6 {
            let g = cyclic_gamma(r);
            let mut p = eye(r);
            for _ in 0..r {
                p = &p * &g;
            }
            assert!(max_abs(&(p - eye(r))) < 1e-15);
        }
    }

    #[test]
    fn gamma_shifts_columns() {
        let u = CMat::from_fn(3, 3, |i, j| cr((10 * i + j) as f64));
        let ug = &u * cyclic_gamma(3);
        for i in 0..3 {
            assert_eq!(ug[(i, 0)], u[(i, 1)]);
            assert_eq!(ug[(i, 1)], u[(i, 2)]);
            assert_eq!(ug[(i, 2)], u[(i, 0)]);
        }
    }

    #[test]
    fn compound_of_diagonal() {
        let m = diag_real(&[2.0, 3.0, 5.0]);
        let c2 = compound(&m, 2);
        let s = singular_values(&c2);
        assert!((s[0] - 15.0).abs() < 1e-12);
        assert!((s[2] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn unitary_power_roundtrip() {
        let w = rotation(0.7);
        let h = unitary_power(&w, 0.5);
        assert!(max_abs(&(&h * &h - &w)) < 1e-12);
        let r = rotation_power(&w, 0.25);
        assert!(max_abs(&(r - rotation(0.175))) < 1e-14);
    }

    #[test]
    fn complement_and_intersection() {
        let e1 = CMat::from_fn(4, 1, |i, _| if i == 0 { ONE } else { ZERO });
        let c = orth_complement(&e1);
        assert_eq!(c.ncols(), 3);
        assert!(max_abs(&(e1.adjoint() * &c)) < 1e-14);
        let p = CMat::from_fn(3, 2, |i, j| if i == j { ONE } else { ZERO });
        let q = CMat::from_fn(3, 2, |i, j| if i == j + 1 { ONE } else { ZERO });
        let x = subspace_intersection(&p, &q, 1);
        assert!((x[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }
}

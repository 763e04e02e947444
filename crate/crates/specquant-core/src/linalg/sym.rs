//! Symmetric-eigenvalue route for large PCA fits.
//!
//! For desk-scale data (thousands of samples, ~10^3 wavelengths) the exact
//! Jacobi SVD is too slow on small machines, while the spectrum of interest
//! sits far above the covariance rounding floor. This module computes the
//! Gram matrix, Householder-tridiagonalizes it, extracts all eigenvalues with
//! implicit-shift QL, and recovers the leading eigenvectors by inverse
//! iteration with reorthogonalization. Relative accuracy of tiny eigenvalues
//! is limited to ~sqrt(machine epsilon) of the largest — callers reserve this
//! path for noisy data whose floor sits well above that.

use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{for_each_mut, Mat};
use crate::error::Error;
use crate::math;
use crate::rng;
use crate::Result;

/// `A^T A`, parallel over row blocks of the result; every entry is
/// accumulated serially in data-row order, so any block partition and thread
/// count produce identical bits.
pub fn gram(a: &Mat) -> Mat {
    let n = a.rows();
    let m = a.cols();
    let mut g = Mat::zeros(m, m);
    if m == 0 {
        return g;
    }
    let nblocks = 32.min(m);
    let base = m / nblocks;
    let rem = m % nblocks;
    let mut blocks: Vec<(usize, &mut [f64])> = Vec::with_capacity(nblocks);
    {
        let mut rest = g.data_mut();
        let mut start = 0usize;
        for b in 0..nblocks {
            let rows_here = base + usize::from(b < rem);
            let (head, tail) = rest.split_at_mut(rows_here * m);
            blocks.push((start, head));
            rest = tail;
            start += rows_here;
        }
    }
    for_each_mut(&mut blocks, |_, (start, slice)| {
        let rows_here = slice.len() / m;
        for r in 0..n {
            let row = a.row(r);
            for li in 0..rows_here {
                let i = *start + li;
                let v = row[i];
                if v != 0.0 {
                    let dst = &mut slice[li * m + i..(li + 1) * m];
                    let src = &row[i..];
                    for (d, s) in dst.iter_mut().zip(src.iter()) {
                        *d += v * *s;
                    }
                }
            }
        }
    });
    drop(blocks);
    // mirror upper triangle
    for i in 0..m {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    g
}

struct Tridiag {
    diag: Vec<f64>,
    sub: Vec<f64>, // sub[i] couples i and i+1; length n, last entry unused
    /// Householder reflectors in compact form: `reflectors[k]` acts on rows
    /// `k+1..` and `taus[k]` is its scale.
    reflectors: Vec<Vec<f64>>,
    taus: Vec<f64>,
}

/// Householder tridiagonalization of a symmetric matrix, in place.
fn tridiagonalize(g: &mut Mat) -> Tridiag {
    let n = g.rows();
    let mut diag = vec![0.0; n];
    let mut sub = vec![0.0; n];
    let mut reflectors: Vec<Vec<f64>> = Vec::new();
    let mut taus: Vec<f64> = Vec::new();
    if n == 0 {
        return Tridiag { diag, sub, reflectors, taus };
    }
    for k in 0..n.saturating_sub(2) {
        // reflector for column k below the diagonal
        let x: Vec<f64> = (k + 1..n).map(|i| g[(i, k)]).collect();
        let sigma = math::norm2(&x);
        if sigma == 0.0 {
            reflectors.push(Vec::new());
            taus.push(0.0);
            sub[k] = 0.0;
            continue;
        }
        let alpha = if x[0] >= 0.0 { -sigma } else { sigma };
        let mut v = x;
        v[0] -= alpha;
        let vnorm2 = math::dot(&v, &v);
        let beta = if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 };
        sub[k] = alpha;

        // p = beta * G[k+1.., k+1..] * v   (parallel over rows)
        let nt = n - k - 1;
        let p: Vec<f64> = super::matrix::par_map_indexed(nt, |li| {
            let i = k + 1 + li;
            beta * math::dot(&g.row(i)[k + 1..], &v)
        });
        let pv = math::dot(&p, &v);
        let mut w = p;
        math::axpy(-0.5 * beta * pv, &v, &mut w);

        // G[k+1.., k+1..] -= v w^T + w v^T  (parallel over rows)
        {
            let vv = &v;
            let ww = &w;
            let off = k + 1;
            let mut trailing: Vec<(usize, &mut [f64])> = g
                .data_mut()
                .chunks_mut(n)
                .enumerate()
                .skip(off)
                .map(|(i, row)| (i, &mut row[off..]))
                .collect();
            for_each_mut(&mut trailing, |_, (i, row)| {
                let li = *i - off;
                let a = vv[li];
                let b = ww[li];
                for j in 0..row.len() {
                    row[j] -= a * ww[j] + b * vv[j];
                }
            });
        }
        reflectors.push(v);
        taus.push(beta);
    }
    for i in 0..n {
        diag[i] = g[(i, i)];
    }
    if n >= 2 {
        sub[n - 2] = g[(n - 1, n - 2)];
    }
    Tridiag { diag, sub, reflectors, taus }
}

/// All eigenvalues of a symmetric tridiagonal matrix by implicit-shift QL.
fn tridiag_eigenvalues(mut d: Vec<f64>, mut e: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(d);
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = math::abs(d[m]) + math::abs(d[m + 1]);
                if math::abs(e[m]) <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(Error::Convergence {
                    what: "tridiagonal QL".into(),
                    index: l,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = math::hypot(g, 1.0);
            let sr = if g >= 0.0 { math::abs(r) } else { -math::abs(r) };
            g = d[m] - d[l] + e[l] / (g + sr);
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = math::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                f = (d[i] - g) * s + 2.0 * c * b;
                p = s * f;
                d[i + 1] = g + p;
                g = c * f - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

/// Solve `(T - lambda I) x = b` for tridiagonal `T`, Gaussian elimination
/// with partial pivoting (one band of fill-in).
fn solve_shifted(d: &[f64], e: &[f64], lambda: f64, rhs: &mut [f64], scale: f64) {
    let n = d.len();
    if n == 1 {
        let p = pivot_guard(d[0] - lambda, scale);
        rhs[0] /= p;
        return;
    }
    let mut pp = vec![0.0; n]; // col i of row i
    let mut qq = vec![0.0; n]; // col i+1
    let mut rr = vec![0.0; n]; // col i+2
    let mut cur = (d[0] - lambda, e[0], 0.0);
    for i in 0..n - 1 {
        let mut next = (
            e[i],
            d[i + 1] - lambda,
            if i + 2 < n { e[i + 1] } else { 0.0 },
        );
        if math::abs(cur.0) < math::abs(next.0) {
            core::mem::swap(&mut cur, &mut next);
            rhs.swap(i, i + 1);
        }
        let p = pivot_guard(cur.0, scale);
        cur.0 = p;
        let m = next.0 / p;
        let b1 = next.1 - m * cur.1;
        let c1 = next.2 - m * cur.2;
        rhs[i + 1] -= m * rhs[i];
        pp[i] = cur.0;
        qq[i] = cur.1;
        rr[i] = cur.2;
        cur = (b1, c1, 0.0);
    }
    pp[n - 1] = pivot_guard(cur.0, scale);
    qq[n - 1] = 0.0;
    rr[n - 1] = 0.0;

    rhs[n - 1] /= pp[n - 1];
    if n >= 2 {
        rhs[n - 2] = (rhs[n - 2] - qq[n - 2] * rhs[n - 1]) / pp[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        rhs[i] = (rhs[i] - qq[i] * rhs[i + 1] - rr[i] * rhs[i + 2]) / pp[i];
    }
}

#[inline]
fn pivot_guard(p: f64, scale: f64) -> f64 {
    if p == 0.0 {
        f64::EPSILON * scale.max(f64::MIN_POSITIVE)
    } else {
        p
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let nrm = math::norm2(v);
    if nrm > 0.0 {
        let inv = 1.0 / nrm;
        for x in v.iter_mut() {
            *x *= inv;
        }
    }
    nrm
}

/// Leading eigenpairs of `A^T A`.
///
/// Returns all `cols(A)` eigenvalues in descending order plus the top
/// `n_vectors` eigenvectors (rows of the returned matrix).
pub fn gram_top_eigen(a: &Mat, n_vectors: usize) -> Result<(Vec<f64>, Mat)> {
    let m = a.cols();
    let want = n_vectors.min(m);
    let mut g = gram(a);
    let tri = tridiagonalize(&mut g);
    drop(g);
    let mut eigs = tridiag_eigenvalues(tri.diag.clone(), tri.sub.clone())?;
    eigs.sort_by(|x, y| y.partial_cmp(x).expect("non-finite eigenvalue"));

    let scale = tri
        .diag
        .iter()
        .chain(tri.sub.iter())
        .fold(0.0f64, |acc, &x| acc.max(math::abs(x)))
        .max(f64::MIN_POSITIVE);

    let n = tri.diag.len();
    let mut vectors = Mat::zeros(want, m);
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(want);
    for l in 0..want {
        // Perturb repeated shifts slightly so cluster members see distinct
        // systems; orthogonalization below separates their directions.
        let mut shift = eigs[l];
        let mut dup = 0;
        for prev in eigs.iter().take(l) {
            if math::abs(prev - shift) <= 16.0 * f64::EPSILON * scale {
                dup += 1;
            }
        }
        shift += dup as f64 * 8.0 * f64::EPSILON * scale;

        let mut rng = rng::stream(0x5159_7645_u64, rng::Domain::Generic, l as u64);
        let mut v: Vec<f64> = (0..n).map(|_| rng::uniform(&mut rng, -1.0, 1.0)).collect();
        normalize(&mut v);
        let mut ok = false;
        for _round in 0..8 {
            solve_shifted(&tri.diag, &tri.sub, shift, &mut v, scale);
            normalize(&mut v);
            for prev in &accepted {
                let c = math::dot(prev, &v);
                math::axpy(-c, prev, &mut v);
            }
            if normalize(&mut v) < 1e-3 {
                // re-seed if orthogonalization annihilated the iterate
                for x in v.iter_mut() {
                    *x = rng::uniform(&mut rng, -1.0, 1.0);
                }
                normalize(&mut v);
                continue;
            }
            // residual ||T v - lambda v||
            let mut res = 0.0f64;
            for i in 0..n {
                let mut t = tri.diag[i] * v[i] - eigs[l] * v[i];
                if i > 0 {
                    t += tri.sub[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    t += tri.sub[i] * v[i + 1];
                }
                res += t * t;
            }
            if math::sqrt(res) <= 1e-10 * scale {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::Convergence {
                what: "inverse iteration".into(),
                index: l,
            });
        }
        accepted.push(v.clone());

        // back-transform through the Householder reflectors
        for k in (0..tri.reflectors.len()).rev() {
            let refl = &tri.reflectors[k];
            if refl.is_empty() {
                continue;
            }
            let beta = tri.taus[k];
            let seg = &mut v[k + 1..];
            let c = beta * math::dot(refl, seg);
            math::axpy(-c, refl, seg);
        }
        vectors.row_mut(l).copy_from_slice(&v);
    }
    Ok((eigs, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd::thin_svd_exact;
    use crate::rng::{stream, uniform, Domain};

    fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = stream(seed, Domain::Generic, 0);
        let data: Vec<f64> = (0..rows * cols).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        Mat::from_vec(rows, cols, data)
    }

    #[test]
    fn gram_matches_naive() {
        let a = random_mat(6, 4, 2);
        let g = gram(&a);
        for i in 0..4 {
            for j in 0..4 {
                let want = math::dot(&a.col_copy(i), &a.col_copy(j));
                assert!((g[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigen_agrees_with_jacobi_svd() {
        let a = random_mat(40, 12, 5);
        let (eigs, vecs) = gram_top_eigen(&a, 6).unwrap();
        let (svals, right) = thin_svd_exact(&a).unwrap();
        for l in 0..12 {
            let want = svals[l] * svals[l];
            assert!(
                (eigs[l] - want).abs() <= 1e-9 * eigs[0].max(1.0),
                "eigenvalue {l}: {} vs {}",
                eigs[l],
                want
            );
        }
        // top vectors span the same directions up to sign
        for l in 0..6 {
            let c = math::abs(math::dot(vecs.row(l), right.row(l)));
            assert!(c > 1.0 - 1e-7, "vector {l} misaligned: |cos| = {c}");
        }
    }

    #[test]
    fn eigen_handles_clustered_spectrum() {
        // two well-separated leaders plus a cluster of near-equal directions
        let n = 60;
        let m = 20;
        let mut a = Mat::zeros(n, m);
        let mut rng = stream(13, Domain::Generic, 0);
        for i in 0..n {
            for j in 0..m {
                a[(i, j)] = uniform(&mut rng, -1.0, 1.0) * if j < 2 { 30.0 } else { 1.0 };
            }
        }
        let (eigs, vecs) = gram_top_eigen(&a, 8).unwrap();
        assert!(eigs[0] >= eigs[1] && eigs[1] > eigs[2]);
        // orthonormal output despite the cluster
        for p in 0..8 {
            for q in 0..8 {
                let d = math::dot(vecs.row(p), vecs.row(q));
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-8, "({p},{q}) -> {d}");
            }
        }
    }
}

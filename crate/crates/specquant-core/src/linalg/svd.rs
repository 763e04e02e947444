//! Exact thin SVD: Householder QR reduction plus one-sided Jacobi.
//!
//! The Jacobi sweep orthogonalizes matrix columns with plane rotations, which
//! keeps small singular values accurate to high relative precision — exactly
//! what the rank-threshold semantics need on noiseless data. Rotations are
//! scheduled round-robin so that each round touches disjoint column pairs:
//! rounds can run in parallel with bit-identical results for any thread count.

use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{for_each_mut, Mat};
use crate::error::Error;
use crate::math;
use crate::Result;

const JACOBI_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 64;

/// Householder QR of a tall matrix stored as columns; only R survives.
///
/// On return, the upper triangle of the first `n` rows holds R; entries below
/// the diagonal are garbage left over from the reflectors.
fn qr_r_in_place(cols: &mut [Vec<f64>]) {
    let n = cols.len();
    if n == 0 {
        return;
    }
    let m = cols[0].len();
    debug_assert!(m >= n);
    for k in 0..n {
        let (head, tail) = cols.split_at_mut(k + 1);
        let colk = &mut head[k];
        let sigma = math::norm2(&colk[k..]);
        if sigma == 0.0 {
            continue;
        }
        let x0 = colk[k];
        let alpha = if x0 >= 0.0 { -sigma } else { sigma };
        colk[k] = x0 - alpha;
        let unorm2 = math::dot(&colk[k..], &colk[k..]);
        if unorm2 > 0.0 {
            let beta = 2.0 / unorm2;
            let u = &colk[k..];
            for_each_mut(tail, |_, colj| {
                let c = beta * math::dot(u, &colj[k..]);
                math::axpy(-c, u, &mut colj[k..]);
            });
        }
        colk[k] = alpha;
    }
}

/// Round-robin tournament schedule: `n_slots` (even) players, `n_slots - 1`
/// rounds, each round pairing every player exactly once.
fn round_robin_rounds(n_slots: usize) -> Vec<Vec<(usize, usize)>> {
    debug_assert!(n_slots % 2 == 0);
    let mut order: Vec<usize> = (0..n_slots).collect();
    let mut rounds = Vec::with_capacity(n_slots.saturating_sub(1));
    for _ in 0..n_slots.saturating_sub(1) {
        let mut pairs = Vec::with_capacity(n_slots / 2);
        for i in 0..n_slots / 2 {
            pairs.push((order[i], order[n_slots - 1 - i]));
        }
        rounds.push(pairs);
        // rotate all but the first slot
        let last = order[n_slots - 1];
        for i in (2..n_slots).rev() {
            order[i] = order[i - 1];
        }
        order[1] = last;
    }
    rounds
}

struct PairTask {
    i: usize,
    j: usize,
    ai: Vec<f64>,
    aj: Vec<f64>,
    vi: Vec<f64>,
    vj: Vec<f64>,
    rotated: bool,
}

/// One-sided Jacobi SVD of a tall-or-square matrix given as columns
/// (`m >= n`). Returns `(singular values, u_cols, v_cols)`, all sorted by
/// descending singular value; `input = U * diag(s) * V^T`. Columns of U
/// belonging to zero singular values are zero.
pub fn jacobi_svd_cols(
    mut a: Vec<Vec<f64>>,
    mut v: Vec<Vec<f64>>,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n = a.len();
    if n == 0 {
        return Ok((Vec::new(), a, v));
    }
    debug_assert_eq!(v.len(), n);
    debug_assert!(a[0].len() >= n);

    // Sorting columns by descending norm up front speeds convergence; the
    // permutation is folded into V so the factorization still matches the
    // caller's matrix.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = a.iter().map(|c| math::dot(c, c)).collect();
    order.sort_by(|&p, &q| norms[q].partial_cmp(&norms[p]).expect("non-finite column norm"));
    let mut a_sorted: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v_sorted: Vec<Vec<f64>> = Vec::with_capacity(n);
    for &p in &order {
        a_sorted.push(core::mem::take(&mut a[p]));
        v_sorted.push(core::mem::take(&mut v[p]));
    }
    let mut a = a_sorted;
    let mut v = v_sorted;

    let n_slots = if n % 2 == 0 { n } else { n + 1 };
    let rounds = round_robin_rounds(n_slots);

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut any_rotation = false;
        for round in &rounds {
            let mut tasks: Vec<PairTask> = Vec::with_capacity(round.len());
            for &(p, q) in round {
                if p >= n || q >= n {
                    continue; // dummy slot for odd n
                }
                let (i, j) = if p < q { (p, q) } else { (q, p) };
                tasks.push(PairTask {
                    i,
                    j,
                    ai: core::mem::take(&mut a[i]),
                    aj: core::mem::take(&mut a[j]),
                    vi: core::mem::take(&mut v[i]),
                    vj: core::mem::take(&mut v[j]),
                    rotated: false,
                });
            }
            for_each_mut(&mut tasks, |_, t| {
                let dii = math::dot(&t.ai, &t.ai);
                let djj = math::dot(&t.aj, &t.aj);
                let dij = math::dot(&t.ai, &t.aj);
                if dii == 0.0 || djj == 0.0 {
                    return;
                }
                if math::abs(dij) <= JACOBI_TOL * math::sqrt(dii * djj) {
                    return;
                }
                let tau = (djj - dii) / (2.0 * dij);
                let tt = if tau >= 0.0 {
                    1.0 / (tau + math::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + math::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / math::sqrt(1.0 + tt * tt);
                let s = c * tt;
                rotate(&mut t.ai, &mut t.aj, c, s);
                rotate(&mut t.vi, &mut t.vj, c, s);
                t.rotated = true;
            });
            for t in tasks {
                any_rotation |= t.rotated;
                a[t.i] = t.ai;
                a[t.j] = t.aj;
                v[t.i] = t.vi;
                v[t.j] = t.vj;
            }
        }
        if !any_rotation {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            what: "jacobi SVD".into(),
            index: MAX_SWEEPS,
        });
    }

    let mut sigma: Vec<f64> = a.iter().map(|c| math::norm2(c)).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&p, &q| sigma[q].partial_cmp(&sigma[p]).expect("non-finite singular value"));
    let mut s_out = Vec::with_capacity(n);
    let mut u_out = Vec::with_capacity(n);
    let mut v_out = Vec::with_capacity(n);
    for &p in &idx {
        let s = sigma[p];
        let mut col = core::mem::take(&mut a[p]);
        if s > 0.0 {
            let inv = 1.0 / s;
            for x in col.iter_mut() {
                *x *= inv;
            }
        } else {
            for x in col.iter_mut() {
                *x = 0.0;
            }
        }
        s_out.push(s);
        u_out.push(col);
        v_out.push(core::mem::take(&mut v[p]));
        sigma[p] = -1.0; // consumed
    }
    Ok((s_out, u_out, v_out))
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let xv = *xi;
        let yv = *yi;
        *xi = c * xv - s * yv;
        *yi = s * xv + c * yv;
    }
}

fn identity_cols(n: usize) -> Vec<Vec<f64>> {
    let mut v = vec![vec![0.0; n]; n];
    for (i, col) in v.iter_mut().enumerate() {
        col[i] = 1.0;
    }
    v
}

/// Thin SVD of `a`: singular values (descending) and right singular vectors
/// (one per row of the returned matrix, `min(rows, cols)` of them).
///
/// Exact path used for small and medium problems; large PCA fits go through
/// the symmetric-eigenvalue route in [`super::sym`] instead.
pub fn thin_svd_exact(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    let (rows, cols) = (a.rows(), a.cols());
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("empty matrix for SVD"));
    }
    if rows >= cols {
        // Reduce to R (cols x cols), then Jacobi; right vectors come out as V.
        let mut col_store: Vec<Vec<f64>> = (0..cols).map(|j| a.col_copy(j)).collect();
        qr_r_in_place(&mut col_store);
        let r_cols: Vec<Vec<f64>> = col_store
            .iter()
            .enumerate()
            .map(|(j, col)| {
                let mut rc = vec![0.0; cols];
                rc[..=j].copy_from_slice(&col[..=j]);
                rc
            })
            .collect();
        let (s, _u, v) = jacobi_svd_cols(r_cols, identity_cols(cols))?;
        let mut right = Mat::zeros(cols.min(rows), cols);
        for (l, vcol) in v.iter().take(right.rows()).enumerate() {
            right.row_mut(l).copy_from_slice(vcol);
        }
        Ok((s.into_iter().take(rows.min(cols)).collect(), right))
    } else {
        // rows < cols: run Jacobi on A^T (tall); its left vectors are the
        // right singular vectors of A.
        let col_store: Vec<Vec<f64>> = (0..rows).map(|i| a.row(i).to_vec()).collect();
        let (s, u, _v) = jacobi_svd_cols(col_store, identity_cols(rows))?;
        let mut right = Mat::zeros(rows, cols);
        for (l, ucol) in u.iter().enumerate() {
            right.row_mut(l).copy_from_slice(ucol);
        }
        Ok((s, right))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, uniform, Domain};

    fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = stream(seed, Domain::Generic, 0);
        let data: Vec<f64> = (0..rows * cols).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        Mat::from_vec(rows, cols, data)
    }

    fn check_right_vectors(a: &Mat, s: &[f64], v: &Mat) {
        // A^T A v_l = s_l^2 v_l
        let at = a.transpose();
        let ata = at.matmul(a);
        for l in 0..v.rows() {
            let vl = v.row(l);
            let mut lhs = vec![0.0; a.cols()];
            for i in 0..a.cols() {
                lhs[i] = math::dot(ata.row(i), vl);
            }
            for i in 0..a.cols() {
                assert!(
                    (lhs[i] - s[l] * s[l] * vl[i]).abs() < 1e-8 * (1.0 + s[0] * s[0]),
                    "eigen equation violated at component {l}"
                );
            }
        }
    }

    #[test]
    fn svd_tall_matrix() {
        let a = random_mat(20, 7, 3);
        let (s, v) = thin_svd_exact(&a).unwrap();
        assert_eq!(s.len(), 7);
        for w in s.windows(2) {
            assert!(w[0] >= w[1]);
        }
        // Orthonormal right vectors.
        for p in 0..7 {
            for q in 0..7 {
                let d = math::dot(v.row(p), v.row(q));
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-10);
            }
        }
        check_right_vectors(&a, &s, &v);
    }

    #[test]
    fn svd_wide_matrix() {
        let a = random_mat(5, 12, 4);
        let (s, v) = thin_svd_exact(&a).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(v.rows(), 5);
        assert_eq!(v.cols(), 12);
        check_right_vectors(&a, &s, &v);
    }

    #[test]
    fn svd_rank_deficient_keeps_tiny_values_tiny() {
        // rank-2 matrix built from two outer products
        let mut a = Mat::zeros(30, 10);
        let mut rng = stream(9, Domain::Generic, 1);
        let u1: Vec<f64> = (0..30).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let u2: Vec<f64> = (0..30).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let v1: Vec<f64> = (0..10).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let v2: Vec<f64> = (0..10).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        for i in 0..30 {
            for j in 0..10 {
                a[(i, j)] = u1[i] * v1[j] + 0.1 * u2[i] * v2[j];
            }
        }
        let (s, _v) = thin_svd_exact(&a).unwrap();
        assert!(s[1] > 1e-3 * s[0]);
        for &x in &s[2..] {
            assert!(x < 1e-12 * s[0], "ghost singular value {x}");
        }
    }

    #[test]
    fn svd_reconstructs_frobenius_norm() {
        let a = random_mat(15, 15, 8);
        let (s, _) = thin_svd_exact(&a).unwrap();
        let frob2: f64 = a.data().iter().map(|x| x * x).sum();
        let s2: f64 = s.iter().map(|x| x * x).sum();
        assert!((frob2 - s2).abs() < 1e-10 * frob2);
    }
}

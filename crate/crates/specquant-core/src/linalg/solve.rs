//! Small dense solvers: pivoted LU, condition numbers, QR least squares.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::matrix::Mat;
use super::svd::thin_svd_exact;
use crate::error::Error;
use crate::math;
use crate::Result;

/// LU factorization with partial pivoting of a square matrix.
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Mat, what: &str) -> Result<Lu> {
        let n = a.rows();
        if n != a.cols() {
            return Err(Error::DimensionMismatch {
                what: format!("{what} (square matrix expected)"),
                expected: n,
                got: a.cols(),
            });
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pivot = k;
            let mut best = math::abs(lu[(k, k)]);
            for i in k + 1..n {
                let v = math::abs(lu[(i, k)]);
                if v > best {
                    best = v;
                    pivot = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Conditioning {
                    what: String::from(what),
                    condition: f64::INFINITY,
                });
            }
            if pivot != k {
                perm.swap(k, pivot);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot, j)];
                    lu[(pivot, j)] = tmp;
                }
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let m = lu[(i, k)] / d;
                lu[(i, k)] = m;
                for j in k + 1..n {
                    lu[(i, j)] -= m * lu[(k, j)];
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    /// Solve `A x = b` for one right-hand side.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        debug_assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }
}

/// Spectral condition number via the exact SVD; intended for small matrices.
pub fn condition_number(a: &Mat) -> Result<f64> {
    let (s, _) = thin_svd_exact(a)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = s.last().copied().unwrap_or(0.0);
    if smin == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(smax / smin)
    }
}

/// Least squares `min ||A x - B||_F` by Householder QR with pivot-free
/// column order; `A` is tall (rows >= cols), `B` may have several columns.
///
/// Fails with a conditioning error when the triangular factor is rank
/// deficient relative to `1e-12` of its largest diagonal.
pub fn lstsq(a: &Mat, b: &Mat, what: &str) -> Result<Mat> {
    let m = a.rows();
    let n = a.cols();
    if b.rows() != m {
        return Err(Error::DimensionMismatch {
            what: format!("{what} right-hand side"),
            expected: m,
            got: b.rows(),
        });
    }
    if m < n {
        return Err(Error::Underdetermined {
            samples: m,
            needed: n,
        });
    }
    let nrhs = b.cols();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col_copy(j)).collect();
    let mut rhs: Vec<Vec<f64>> = (0..nrhs).map(|j| b.col_copy(j)).collect();
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
        let beta = 2.0 / unorm2;
        let u = &colk[k..];
        for colj in tail.iter_mut() {
            let c = beta * math::dot(u, &colj[k..]);
            math::axpy(-c, u, &mut colj[k..]);
        }
        for r in rhs.iter_mut() {
            let c = beta * math::dot(u, &r[k..]);
            math::axpy(-c, u, &mut r[k..]);
        }
        colk[k] = alpha;
    }
    let mut dmax = 0.0f64;
    let mut dmin = f64::INFINITY;
    for (k, col) in cols.iter().enumerate() {
        let d = math::abs(col[k]);
        dmax = dmax.max(d);
        dmin = dmin.min(d);
    }
    if dmin <= 1e-12 * dmax || dmax == 0.0 {
        return Err(Error::Conditioning {
            what: String::from(what),
            condition: if dmin > 0.0 { dmax / dmin } else { f64::INFINITY },
        });
    }
    let mut x = Mat::zeros(n, nrhs);
    for (jr, r) in rhs.iter().enumerate() {
        let mut xs = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = r[i];
            for j in i + 1..n {
                acc -= cols[j][i] * xs[j];
            }
            xs[i] = acc / cols[i][i];
        }
        for i in 0..n {
            x[(i, jr)] = xs[i];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, uniform, Domain};

    #[test]
    fn lu_solves_small_system() {
        let a = Mat::from_vec(3, 3, vec![4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let lu = Lu::factor(&a, "test").unwrap();
        let b = vec![1.0, 2.0, 3.0];
        let x = lu.solve_vec(&b);
        for i in 0..3 {
            let got = math::dot(a.row(i), &x);
            assert!((got - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Mat::from_vec(2, 2, vec![1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            Lu::factor(&a, "test"),
            Err(Error::Conditioning { .. })
        ));
    }

    #[test]
    fn lstsq_recovers_planted_coefficients() {
        let mut rng = stream(3, Domain::Generic, 0);
        let m = 50;
        let mut a = Mat::zeros(m, 3);
        let mut b = Mat::zeros(m, 2);
        for i in 0..m {
            let x = [
                uniform(&mut rng, -1.0, 1.0),
                uniform(&mut rng, -1.0, 1.0),
                1.0,
            ];
            a.row_mut(i).copy_from_slice(&x);
            b[(i, 0)] = 2.0 * x[0] - x[1] + 0.5;
            b[(i, 1)] = -x[0] + 3.0 * x[1] - 2.0;
        }
        let c = lstsq(&a, &b, "test").unwrap();
        let want = [[2.0, -1.0], [-1.0, 3.0], [0.5, -2.0]];
        for i in 0..3 {
            for j in 0..2 {
                assert!((c[(i, j)] - want[i][j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lstsq_flags_rank_deficiency() {
        let mut a = Mat::zeros(10, 2);
        for i in 0..10 {
            a[(i, 0)] = i as f64;
            a[(i, 1)] = 2.0 * i as f64;
        }
        let b = Mat::zeros(10, 1);
        assert!(matches!(
            lstsq(&a, &b, "test"),
            Err(Error::Conditioning { .. })
        ));
    }

    #[test]
    fn condition_of_identity_is_one() {
        let a = Mat::identity(4);
        assert!((condition_number(&a).unwrap() - 1.0).abs() < 1e-12);
    }
}

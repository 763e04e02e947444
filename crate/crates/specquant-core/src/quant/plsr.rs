//! NIPALS partial least squares (PLS2, all responses in one model).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::linalg::{for_each_row_indexed, lstsq, par_map_indexed, Mat};
use crate::math;
use crate::Result;

/// Residual-exhaustion threshold: once the deflated response norm falls
/// below this fraction of the original, further components are meaningless.
const DEFLATION_TOL: f64 = 1e-10;
/// Standard NIPALS inner convergence: squared change of the unit weight
/// vector between iterations.
const INNER_TOL: f64 = 1e-6;
const MAX_INNER_ITERATIONS: usize = 500;

/// Fitted PLS2 regression.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsrModel {
    n_components: usize,
    x_mean: Vec<f64>,
    y_mean: Vec<f64>,
    /// `A x M` X weights (unit norm rows).
    x_weights: Mat,
    /// `A x M` X loadings.
    x_loadings: Mat,
    /// `A x K` Y loadings.
    y_loadings: Mat,
    /// `N x A` training X scores (NIPALS artifacts, orthogonal columns).
    x_scores: Mat,
    /// `M x K` regression matrix for centered inputs.
    coefficients: Mat,
}

impl PlsrModel {
    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn x_mean(&self) -> &[f64] {
        &self.x_mean
    }

    pub fn y_mean(&self) -> &[f64] {
        &self.y_mean
    }

    pub fn x_weights(&self) -> &Mat {
        &self.x_weights
    }

    pub fn x_loadings(&self) -> &Mat {
        &self.x_loadings
    }

    pub fn y_loadings(&self) -> &Mat {
        &self.y_loadings
    }

    pub fn x_scores(&self) -> &Mat {
        &self.x_scores
    }

    pub fn coefficients(&self) -> &Mat {
        &self.coefficients
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        n_components: usize,
        x_mean: Vec<f64>,
        y_mean: Vec<f64>,
        x_weights: Mat,
        x_loadings: Mat,
        y_loadings: Mat,
        x_scores: Mat,
        coefficients: Mat,
    ) -> Self {
        PlsrModel {
            n_components,
            x_mean,
            y_mean,
            x_weights,
            x_loadings,
            y_loadings,
            x_scores,
            coefficients,
        }
    }

    /// `(x - x_mean) B + y_mean`.
    pub fn predict(&self, spectra: &Mat) -> Result<Mat> {
        if spectra.cols() != self.x_mean.len() {
            return Err(Error::GridMismatch);
        }
        let k = self.y_mean.len();
        let mut out = Mat::zeros(spectra.rows(), k);
        {
            let coef = &self.coefficients;
            let xm = &self.x_mean;
            let ym = &self.y_mean;
            for_each_row_indexed(&mut out, |i, row| {
                row.copy_from_slice(ym);
                let x = spectra.row(i);
                for (j, (&xj, &mj)) in x.iter().zip(xm.iter()).enumerate() {
                    let c = xj - mj;
                    if c != 0.0 {
                        math::axpy(c, coef.row(j), row);
                    }
                }
            });
        }
        Ok(out)
    }
}

fn column_means(m: &Mat) -> Vec<f64> {
    let mut acc = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        math::axpy(1.0, m.row(i), &mut acc);
    }
    let inv = 1.0 / m.rows() as f64;
    acc.iter_mut().for_each(|v| *v *= inv);
    acc
}

fn center(m: &Mat, means: &[f64]) -> Mat {
    let mut out = m.clone();
    for_each_row_indexed(&mut out, |_, row| {
        for (v, &mu) in row.iter_mut().zip(means) {
            *v -= mu;
        }
    });
    out
}

/// `X^T v`, accumulated row-major over a fixed set of row chunks whose
/// partial sums are combined in chunk order — bit-identical for any thread
/// count, cache-friendly on row-major storage.
fn xt_vec(x: &Mat, v: &[f64]) -> Vec<f64> {
    const CHUNKS: usize = 8;
    let n = x.rows();
    let m = x.cols();
    if n < 2 * CHUNKS {
        let mut acc = vec![0.0; m];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                math::axpy(vi, x.row(i), &mut acc);
            }
        }
        return acc;
    }
    let base = n / CHUNKS;
    let rem = n % CHUNKS;
    let bounds: Vec<(usize, usize)> = (0..CHUNKS)
        .scan(0usize, |start, c| {
            let len = base + usize::from(c < rem);
            let s = *start;
            *start += len;
            Some((s, s + len))
        })
        .collect();
    let partials = par_map_indexed(CHUNKS, |c| {
        let (lo, hi) = bounds[c];
        let mut acc = vec![0.0; m];
        for i in lo..hi {
            let vi = v[i];
            if vi != 0.0 {
                math::axpy(vi, x.row(i), &mut acc);
            }
        }
        acc
    });
    let mut acc = vec![0.0; m];
    for p in partials {
        math::axpy(1.0, &p, &mut acc);
    }
    acc
}

fn x_vec(x: &Mat, v: &[f64]) -> Vec<f64> {
    par_map_indexed(x.rows(), |i| math::dot(x.row(i), v))
}

/// Fit NIPALS PLS2 with `n_components` latent variables.
///
/// The inner loop refines X weights until the score direction stabilizes to
/// 1e-10 relative, up to 500 iterations per component.
pub fn fit_plsr(x: &Mat, y: &Mat, n_components: usize) -> Result<PlsrModel> {
    let n = x.rows();
    let m = x.cols();
    let k = y.cols();
    if y.rows() != n {
        return Err(Error::DimensionMismatch {
            what: "PLSR responses".into(),
            expected: n,
            got: y.rows(),
        });
    }
    if n < 2 {
        return Err(Error::Underdetermined { samples: n, needed: 2 });
    }
    if n_components == 0 || n_components > (n - 1).min(m) {
        return Err(Error::invalid(alloc::format!(
            "component count must be in [1, min(n-1, m)] = [1, {}], got {n_components}",
            (n - 1).min(m)
        )));
    }
    let x_mean = column_means(x);
    let y_mean = column_means(y);
    let mut xr = center(x, &x_mean);
    let mut yr = center(y, &y_mean);
    let y_norm0: f64 = yr.data().iter().map(|v| v * v).sum();

    let mut x_weights = Mat::zeros(n_components, m);
    let mut x_loadings = Mat::zeros(n_components, m);
    let mut y_loadings = Mat::zeros(n_components, k);
    let mut x_scores = Mat::zeros(n, n_components);

    for a in 0..n_components {
        // start from the strongest remaining response column
        let mut best_col = 0;
        let mut best_ss = -1.0;
        for j in 0..k {
            let col = yr.col_copy(j);
            let ss = math::dot(&col, &col);
            if ss > best_ss {
                best_ss = ss;
                best_col = j;
            }
        }
        let mut u = yr.col_copy(best_col);
        // deflation tolerance: the response residual is exhausted
        if best_ss <= DEFLATION_TOL * DEFLATION_TOL * y_norm0.max(f64::MIN_POSITIVE) {
            return Err(Error::Convergence {
                what: "NIPALS (responses exhausted)".into(),
                index: a,
            });
        }
        let mut w = vec![0.0; m];
        let mut w_old: Option<Vec<f64>> = None;
        let mut t = vec![0.0; n];
        let mut q = vec![0.0; k];
        let mut converged = false;
        for _iter in 0..MAX_INNER_ITERATIONS {
            w = xt_vec(&xr, &u);
            let wn = math::norm2(&w);
            if wn == 0.0 {
                return Err(Error::Convergence {
                    what: "NIPALS (weight collapse)".into(),
                    index: a,
                });
            }
            for v in w.iter_mut() {
                *v /= wn;
            }
            t = x_vec(&xr, &w);
            let tt = math::dot(&t, &t);
            if tt == 0.0 {
                return Err(Error::Convergence {
                    what: "NIPALS (score collapse)".into(),
                    index: a,
                });
            }
            q = xt_vec(&yr, &t);
            for v in q.iter_mut() {
                *v /= tt;
            }
            let qq = math::dot(&q, &q);
            if qq == 0.0 {
                return Err(Error::Convergence {
                    what: "NIPALS (loading collapse)".into(),
                    index: a,
                });
            }
            // convergence on the unit weight vector: ||w - w_old||^2 <= tol
            let done = match &w_old {
                Some(prev) => {
                    let mut diff = 0.0;
                    for (a1, b1) in w.iter().zip(prev) {
                        let d = a1 - b1;
                        diff += d * d;
                    }
                    diff <= INNER_TOL
                }
                None => false,
            };
            if done || k == 1 {
                converged = true;
                break;
            }
            w_old = Some(w.clone());
            let yq = x_vec(&yr, &q);
            u = yq.iter().map(|v| v / qq).collect::<Vec<f64>>();
        }
        if !converged {
            return Err(Error::Convergence {
                what: "NIPALS inner loop".into(),
                index: a,
            });
        }
        let tt = math::dot(&t, &t);
        let p: Vec<f64> = xt_vec(&xr, &t).iter().map(|v| v / tt).collect();
        // deflate
        {
            let tref = &t;
            let pref = &p;
            for_each_row_indexed(&mut xr, |i, row| {
                math::axpy(-tref[i], pref, row);
            });
            let qref = &q;
            for_each_row_indexed(&mut yr, |i, row| {
                math::axpy(-tref[i], qref, row);
            });
        }
        x_weights.row_mut(a).copy_from_slice(&w);
        x_loadings.row_mut(a).copy_from_slice(&p);
        y_loadings.row_mut(a).copy_from_slice(&q);
        for i in 0..n {
            x_scores[(i, a)] = t[i];
        }
    }

    // B = W (P^T W)^{-1} Q^T, assembled from the stored factors.
    let a_dim = n_components;
    let mut ptw = Mat::zeros(a_dim, a_dim);
    for i in 0..a_dim {
        for j in 0..a_dim {
            ptw[(i, j)] = math::dot(x_loadings.row(i), x_weights.row(j));
        }
    }
    // solve (P^T W) Z = Q  ->  B = W Z
    let rhs = y_loadings.clone(); // A x K
    let z = lstsq(&ptw, &rhs, "PLSR loading system")?;
    let mut coefficients = Mat::zeros(m, k);
    {
        let wref = &x_weights;
        let zref = &z;
        for_each_row_indexed(&mut coefficients, |j, row| {
            for g in 0..row.len() {
                let mut acc = 0.0;
                for a in 0..a_dim {
                    acc += wref[(a, j)] * zref[(a, g)];
                }
                row[g] = acc;
            }
        });
    }

    Ok(PlsrModel {
        n_components,
        x_mean,
        y_mean,
        x_weights,
        x_loadings,
        y_loadings,
        x_scores,
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::thin_svd_exact;
    use crate::rng::{stream, uniform, Domain};

    fn random_rank_k(n: usize, m: usize, k_rank: usize, seed: u64) -> Mat {
        let mut rng = stream(seed, Domain::Generic, 0);
        let basis: Vec<Vec<f64>> = (0..k_rank)
            .map(|_| (0..m).map(|_| uniform(&mut rng, -1.0, 1.0)).collect())
            .collect();
        let mut x = Mat::zeros(n, m);
        for i in 0..n {
            for b in &basis {
                let c = uniform(&mut rng, -1.0, 1.0);
                math::axpy(c, b, x.row_mut(i));
            }
        }
        x
    }

    #[test]
    fn full_rank_plsr_matches_least_squares_oracle() {
        // noiseless rank-3 inputs, responses linear in the inputs
        let n = 40;
        let m = 15;
        let x = random_rank_k(n, m, 3, 3);
        let mut rng = stream(4, Domain::Generic, 0);
        let bcoef: Vec<f64> = (0..m).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let mut y = Mat::zeros(n, 2);
        for i in 0..n {
            let v = math::dot(x.row(i), &bcoef);
            y[(i, 0)] = v;
            y[(i, 1)] = -2.0 * v;
        }
        let model = fit_plsr(&x, &y, 3).unwrap();
        let pred = model.predict(&x).unwrap();

        // oracle: projection of centered y onto the centered-x column space
        // via the exact SVD (independent of the NIPALS path)
        let x_mean = column_means(&x);
        let y_mean = column_means(&y);
        let xc = center(&x, &x_mean);
        let yc = center(&y, &y_mean);
        let (svals, right) = thin_svd_exact(&xc).unwrap();
        let mut oracle = Mat::zeros(n, 2);
        for l in 0..svals.len() {
            if svals[l] <= 1e-10 * svals[0] {
                break;
            }
            let scores: Vec<f64> = (0..n).map(|i| math::dot(xc.row(i), right.row(l))).collect();
            let ss = math::dot(&scores, &scores);
            for g in 0..2 {
                let yc_col = yc.col_copy(g);
                let c = math::dot(&scores, &yc_col) / ss;
                for i in 0..n {
                    oracle[(i, g)] += c * scores[i];
                }
            }
        }
        for i in 0..n {
            for g in 0..2 {
                let want = oracle[(i, g)] + y_mean[g];
                let scale = y.max_abs();
                assert!(
                    (pred[(i, g)] - want).abs() <= 1e-6 * scale,
                    "({i},{g}): {} vs {want}",
                    pred[(i, g)]
                );
            }
        }
    }

    #[test]
    fn single_component_on_rank_one_matches_univariate_regression() {
        let n = 30;
        let m = 8;
        let x = random_rank_k(n, m, 1, 5);
        let mut y = Mat::zeros(n, 1);
        for i in 0..n {
            y[(i, 0)] = 3.0 * x[(i, 0)] + 1.0;
        }
        let model = fit_plsr(&x, &y, 1).unwrap();
        let pred = model.predict(&x).unwrap();
        // univariate oracle on the score's direction
        for i in 0..n {
            assert!((pred[(i, 0)] - y[(i, 0)]).abs() < 1e-8 * y.max_abs());
        }
    }

    #[test]
    fn successive_scores_are_orthogonal() {
        let mut rng = stream(6, Domain::Generic, 0);
        let n = 50;
        let m = 12;
        let mut x = Mat::zeros(n, m);
        for v in x.data_mut() {
            *v = uniform(&mut rng, -1.0, 1.0);
        }
        let mut y = Mat::zeros(n, 3);
        for v in y.data_mut() {
            *v = uniform(&mut rng, -1.0, 1.0);
        }
        let model = fit_plsr(&x, &y, 5).unwrap();
        let t = model.x_scores();
        for a in 0..5 {
            for b in a + 1..5 {
                let ta = t.col_copy(a);
                let tb = t.col_copy(b);
                let cos = math::dot(&ta, &tb)
                    / (math::norm2(&ta) * math::norm2(&tb)).max(f64::MIN_POSITIVE);
                assert!(cos.abs() < 1e-6, "scores {a},{b}: cos {cos}");
            }
        }
    }

    #[test]
    fn component_bounds_enforced() {
        let x = random_rank_k(10, 5, 2, 7);
        let y = Mat::zeros(10, 1);
        assert!(fit_plsr(&x, &y, 0).is_err());
        assert!(fit_plsr(&x, &y, 6).is_err());
    }
}

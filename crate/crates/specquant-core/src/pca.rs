//! Principal component decomposition of spectra matrices.
//!
//! The functional flavor scales columns by the square root of the trapezoidal
//! quadrature weight before the eigen-solution and unscales the components
//! afterwards, so component orthonormality holds under the functional inner
//! product. The plain flavor is ordinary PCA.
//!
//! Two internal routes produce identical contracts: an exact QR + Jacobi SVD
//! for small problems (preserves the 1e-12 rank threshold on noiseless data)
//! and a Gram/tridiagonal route for large fits, whose rank resolution is
//! limited to the covariance rounding floor — far below the noise floor of
//! any realistic large dataset.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::grid::{Fnv, WavelengthGrid, Weighting};
use crate::linalg::{for_each_row_indexed, gram_top_eigen, par_map_indexed, thin_svd_exact, Mat};
use crate::math;
use crate::Result;

/// Largest min-dimension that still uses the exact SVD route.
const EXACT_PATH_MAX_DIM: usize = 384;
/// Singular values below this fraction of the largest are dropped.
const RANK_THRESHOLD: f64 = 1e-12;
/// Additional eigenvalue floor for the Gram route (relative to the largest).
const GRAM_EIGEN_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Decomposition flavor: functional (trapezoidal weighting) or plain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Functional,
    Plain,
}

impl Flavor {
    pub fn weighting(self) -> Weighting {
        match self {
            Flavor::Functional => Weighting::Trapezoidal,
            Flavor::Plain => Weighting::Unit,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Flavor::Functional => "fpca",
            Flavor::Plain => "pca",
        }
    }
}

/// Fitted orthonormal component set.
#[derive(Debug, Clone, PartialEq)]
pub struct PcBasis {
    grid: Arc<WavelengthGrid>,
    flavor: Flavor,
    centered: bool,
    /// Column mean of the training data (all zeros when uncentered).
    mean: Vec<f64>,
    /// One component per row, orthonormal under the flavor's weighting.
    components: Mat,
    /// Descending, clamped to be non-negative; one per retained component.
    eigenvalues: Vec<f64>,
    /// Total (centered, weighted) data variance including the truncated tail.
    total_variance: f64,
    /// Number of singular values above the rank threshold.
    effective_rank: usize,
    n_samples: usize,
}

/// Scores of a sample set in a basis, `n x L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub scores: Mat,
    pub basis_fingerprint: u64,
}

impl PcBasis {
    pub fn grid(&self) -> &Arc<WavelengthGrid> {
        &self.grid
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn centered(&self) -> bool {
        self.centered
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Mat {
        &self.components
    }

    pub fn component(&self, l: usize) -> &[f64] {
        self.components.row(l)
    }

    pub fn len(&self) -> usize {
        self.components.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.components.rows() == 0
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn effective_rank(&self) -> usize {
        self.effective_rank
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Rebuild a basis from stored parts (deserialization path).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        grid: Arc<WavelengthGrid>,
        flavor: Flavor,
        centered: bool,
        mean: Vec<f64>,
        components: Mat,
        eigenvalues: Vec<f64>,
        total_variance: f64,
        effective_rank: usize,
        n_samples: usize,
    ) -> Result<Self> {
        if mean.len() != grid.len() || components.cols() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "basis components".into(),
                expected: grid.len(),
                got: components.cols(),
            });
        }
        if eigenvalues.len() != components.rows() {
            return Err(Error::DimensionMismatch {
                what: "basis eigenvalues".into(),
                expected: components.rows(),
                got: eigenvalues.len(),
            });
        }
        Ok(PcBasis {
            grid,
            flavor,
            centered,
            mean,
            components,
            eigenvalues,
            total_variance,
            effective_rank,
            n_samples,
        })
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.grid.fingerprint());
        h.write_str(self.flavor.name());
        h.write_u64(u64::from(self.centered));
        for &v in &self.mean {
            h.write_f64(v);
        }
        for &v in self.components.data() {
            h.write_f64(v);
        }
        for &v in &self.eigenvalues {
            h.write_f64(v);
        }
        h.finish()
    }

    /// Keep only the leading `l` components. Because singular vectors nest,
    /// this equals a fresh fit with `max_components = l`.
    pub fn truncate(&self, l: usize) -> PcBasis {
        let l = l.min(self.len());
        let mut components = Mat::zeros(l, self.grid.len());
        for p in 0..l {
            components.row_mut(p).copy_from_slice(self.components.row(p));
        }
        PcBasis {
            grid: self.grid.clone(),
            flavor: self.flavor,
            centered: self.centered,
            mean: self.mean.clone(),
            components,
            eigenvalues: self.eigenvalues[..l].to_vec(),
            total_variance: self.total_variance,
            effective_rank: self.effective_rank,
            n_samples: self.n_samples,
        }
    }

    /// `<phi_l | u>` under the flavor weighting, for every component.
    pub fn mean_projections(&self) -> Vec<f64> {
        let w = self.grid.weights(self.flavor.weighting());
        (0..self.len())
            .map(|l| crate::grid::inner_product_slices(self.component(l), &self.mean, w))
            .collect()
    }
}

/// Fit a principal component basis.
///
/// Centered mode subtracts the column mean; the functional flavor applies
/// square-root quadrature column scaling before the eigen-solution and
/// unscales afterwards. Eigenvalues are singular values squared over `n - 1`.
/// Requests beyond the numerical rank return fewer components.
pub fn fit_pca(
    data: &Mat,
    grid: &Arc<WavelengthGrid>,
    flavor: Flavor,
    centered: bool,
    max_components: usize,
) -> Result<PcBasis> {
    let n = data.rows();
    let m = data.cols();
    if m != grid.len() {
        return Err(Error::DimensionMismatch {
            what: "data columns".into(),
            expected: grid.len(),
            got: m,
        });
    }
    if n < 2 {
        return Err(Error::invalid(format!("PCA needs at least 2 samples, got {n}")));
    }
    if max_components == 0 || max_components > n.min(m) {
        return Err(Error::invalid(format!(
            "component count must be in [1, min(n, m)] = [1, {}], got {max_components}",
            n.min(m)
        )));
    }

    let mean: Vec<f64> = if centered {
        let mut acc = vec![0.0; m];
        for i in 0..n {
            math::axpy(1.0, data.row(i), &mut acc);
        }
        let inv = 1.0 / n as f64;
        acc.iter_mut().for_each(|v| *v *= inv);
        acc
    } else {
        vec![0.0; m]
    };

    let weights = grid.weights(flavor.weighting());
    let sqrt_w: Option<Vec<f64>> = weights.map(|w| w.iter().map(|&x| math::sqrt(x)).collect());

    // Working matrix: centered rows, columns scaled by sqrt(w).
    let mut work = Mat::zeros(n, m);
    {
        let mean_ref = &mean;
        let sw = sqrt_w.as_deref();
        for_each_row_indexed(&mut work, |i, row| {
            let src = data.row(i);
            match sw {
                None => {
                    for j in 0..row.len() {
                        row[j] = src[j] - mean_ref[j];
                    }
                }
                Some(s) => {
                    for j in 0..row.len() {
                        row[j] = (src[j] - mean_ref[j]) * s[j];
                    }
                }
            }
        });
    }
    if !work.is_finite() {
        return Err(Error::NonFinite("PCA input".into()));
    }

    let denom = (n - 1) as f64;
    let row_sumsq: Vec<f64> = par_map_indexed(n, |i| math::dot(work.row(i), work.row(i)));
    let total_variance = row_sumsq.iter().sum::<f64>() / denom;

    // Eigen-solution: exact SVD for small problems, Gram route for large.
    let (svals, right, gram_route) = if n.min(m) <= EXACT_PATH_MAX_DIM {
        let (s, v) = thin_svd_exact(&work)?;
        (s, v, false)
    } else if n >= m {
        let (eigs, vecs) = gram_top_eigen(&work, max_components)?;
        let s: Vec<f64> = eigs.iter().map(|&e| math::sqrt(e.max(0.0))).collect();
        (s, vecs, true)
    } else {
        let wt = work.transpose();
        let (eigs, uvecs) = gram_top_eigen(&wt, max_components)?;
        let s: Vec<f64> = eigs.iter().map(|&e| math::sqrt(e.max(0.0))).collect();
        // components = work^T u / sigma
        let mut vecs = Mat::zeros(uvecs.rows(), m);
        {
            let work_ref = &work;
            let uref = &uvecs;
            let sref = &s;
            for_each_row_indexed(&mut vecs, |l, row| {
                if sref[l] <= 0.0 {
                    return;
                }
                let u = uref.row(l);
                for (i, &ui) in u.iter().enumerate() {
                    if ui != 0.0 {
                        math::axpy(ui, work_ref.row(i), row);
                    }
                }
                let inv = 1.0 / sref[l];
                for v in row.iter_mut() {
                    *v *= inv;
                }
            });
        }
        (s, vecs, true)
    };
    drop(work);

    let smax = svals.first().copied().unwrap_or(0.0);
    let mut effective_rank = 0;
    for (idx, &s) in svals.iter().enumerate() {
        let above = s >= RANK_THRESHOLD * smax && s > 0.0;
        let above_floor = !gram_route || s * s >= GRAM_EIGEN_FLOOR * smax * smax;
        if above && above_floor {
            effective_rank = idx + 1;
        } else {
            break;
        }
    }

    let l_eff = max_components.min(effective_rank).min(right.rows());
    let mut components = Mat::zeros(l_eff, m);
    let mut eigenvalues = Vec::with_capacity(l_eff);
    for l in 0..l_eff {
        let row = right.row(l);
        let dst = components.row_mut(l);
        match sqrt_w.as_deref() {
            None => dst.copy_from_slice(row),
            Some(s) => {
                for j in 0..m {
                    dst[j] = row[j] / s[j];
                }
            }
        }
        eigenvalues.push((svals[l] * svals[l] / denom).max(0.0));
    }

    // Sign convention: the entry of maximum |value| is positive.
    for l in 0..l_eff {
        let row = components.row_mut(l);
        let mut arg = 0;
        let mut best = 0.0f64;
        for (j, &v) in row.iter().enumerate() {
            let a = math::abs(v);
            if a > best {
                best = a;
                arg = j;
            }
        }
        if row[arg] < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
    }

    Ok(PcBasis {
        grid: grid.clone(),
        flavor,
        centered,
        mean,
        components,
        eigenvalues,
        total_variance,
        effective_rank,
        n_samples: n,
    })
}

/// Individual and cumulative explained variance of the first `up_to`
/// components, relative to the total data variance (truncated tail included).
pub fn explained_variance(basis: &PcBasis, up_to: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if up_to > basis.len() {
        return Err(Error::invalid(format!(
            "requested {up_to} components, basis holds {}",
            basis.len()
        )));
    }
    let total = basis.total_variance;
    let mut iev = Vec::with_capacity(up_to);
    let mut cev = Vec::with_capacity(up_to);
    let mut acc = 0.0;
    for l in 0..up_to {
        let frac = if total > 0.0 {
            basis.eigenvalues[l] / total
        } else {
            0.0
        };
        acc += frac;
        iev.push(frac);
        cev.push(acc);
    }
    Ok((iev, cev))
}

/// Project data rows onto the basis: `beta_{i,l} = <phi_l | A_i - u>`.
pub fn project(basis: &PcBasis, data: &Mat) -> Result<ScoreMatrix> {
    if data.cols() != basis.grid.len() {
        return Err(Error::GridMismatch);
    }
    let l = basis.len();
    let weights = basis.grid.weights(basis.flavor.weighting());
    // Pre-weighted components and constant mean offsets.
    let mut wphi = Mat::zeros(l, basis.grid.len());
    for p in 0..l {
        let row = basis.components.row(p);
        let dst = wphi.row_mut(p);
        match weights {
            None => dst.copy_from_slice(row),
            Some(w) => {
                for j in 0..row.len() {
                    dst[j] = row[j] * w[j];
                }
            }
        }
    }
    let offsets: Vec<f64> = (0..l).map(|p| math::dot(wphi.row(p), &basis.mean)).collect();
    let mut scores = Mat::zeros(data.rows(), l);
    {
        let wphi_ref = &wphi;
        let off = &offsets;
        for_each_row_indexed(&mut scores, |i, out| {
            let row = data.row(i);
            for p in 0..out.len() {
                out[p] = math::dot(wphi_ref.row(p), row) - off[p];
            }
        });
    }
    Ok(ScoreMatrix {
        scores,
        basis_fingerprint: basis.fingerprint(),
    })
}

/// Rebuild spectra from the first `up_to` score columns: `u + sum beta phi`.
pub fn reconstruct(basis: &PcBasis, scores: &Mat, up_to: usize) -> Result<Mat> {
    if up_to > basis.len() || up_to > scores.cols() {
        return Err(Error::invalid(format!(
            "reconstruction with {up_to} components exceeds basis ({}) or scores ({})",
            basis.len(),
            scores.cols()
        )));
    }
    let m = basis.grid.len();
    let mut out = Mat::zeros(scores.rows(), m);
    {
        let mean = &basis.mean;
        let comps = &basis.components;
        for_each_row_indexed(&mut out, |i, row| {
            row.copy_from_slice(mean);
            let beta = scores.row(i);
            for l in 0..up_to {
                math::axpy(beta[l], comps.row(l), row);
            }
        });
    }
    Ok(out)
}

/// Reconstruction quality: per-sample RMSE averaged over samples, and the
/// mean residual correlation `1 - rho` (plain inner products). Samples where
/// either norm vanishes are excluded from the correlation and counted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionMetrics {
    pub rmse: f64,
    pub delta_rho: f64,
    pub excluded_rows: usize,
}

pub fn reconstruction_metrics(original: &Mat, reconstructed: &Mat) -> Result<ReconstructionMetrics> {
    if original.rows() != reconstructed.rows() || original.cols() != reconstructed.cols() {
        return Err(Error::DimensionMismatch {
            what: "reconstruction".into(),
            expected: original.rows() * original.cols(),
            got: reconstructed.rows() * reconstructed.cols(),
        });
    }
    let n = original.rows();
    let m = original.cols();
    let mut rmse_acc = 0.0;
    let mut rho_acc = 0.0;
    let mut rho_count = 0usize;
    for i in 0..n {
        let a = original.row(i);
        let r = reconstructed.row(i);
        let mut sq = 0.0;
        for j in 0..m {
            let d = a[j] - r[j];
            sq += d * d;
        }
        rmse_acc += math::sqrt(sq / m as f64);
        let na = math::dot(a, a);
        let nr = math::dot(r, r);
        if na > 0.0 && nr > 0.0 {
            rho_acc += 1.0 - math::dot(a, r) / math::sqrt(na * nr);
            rho_count += 1;
        }
    }
    Ok(ReconstructionMetrics {
        rmse: rmse_acc / n as f64,
        delta_rho: if rho_count > 0 {
            rho_acc / rho_count as f64
        } else {
            f64::NAN
        },
        excluded_rows: n - rho_count,
    })
}

/// Per-component RMSE and squared Pearson correlation between two bases,
/// sign-aligning the second basis first.
pub fn compare_flavors(a: &PcBasis, b: &PcBasis, up_to: usize) -> Result<Vec<(f64, f64)>> {
    if !crate::grid::same_grid(&a.grid, &b.grid) {
        return Err(Error::GridMismatch);
    }
    if up_to > a.len() || up_to > b.len() {
        return Err(Error::invalid("component count exceeds a basis"));
    }
    let m = a.grid.len();
    let mut out = Vec::with_capacity(up_to);
    for l in 0..up_to {
        let pa = a.component(l);
        let pb_raw = b.component(l);
        let flip = if math::dot(pa, pb_raw) < 0.0 { -1.0 } else { 1.0 };
        let pb: Vec<f64> = pb_raw.iter().map(|&v| flip * v).collect();
        let mut sq = 0.0;
        for j in 0..m {
            let d = pa[j] - pb[j];
            sq += d * d;
        }
        out.push((math::sqrt(sq / m as f64), math::pearson_r2(pa, &pb)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, uniform, Domain};

    fn grid_of(m: usize) -> Arc<WavelengthGrid> {
        WavelengthGrid::uniform(2.5, 14.0, m).unwrap()
    }

    fn random_mat(n: usize, m: usize, seed: u64) -> Mat {
        let mut rng = stream(seed, Domain::Generic, 0);
        Mat::from_vec(n, m, (0..n * m).map(|_| uniform(&mut rng, -1.0, 1.0)).collect())
    }

    fn rank_k_data(n: usize, m: usize, k: usize, seed: u64) -> Mat {
        let mut rng = stream(seed, Domain::Generic, 1);
        let basis: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..m).map(|_| uniform(&mut rng, -1.0, 1.0)).collect())
            .collect();
        let mut data = Mat::zeros(n, m);
        for i in 0..n {
            let row = data.row_mut(i);
            for b in basis.iter() {
                let c = uniform(&mut rng, 0.0, 1.0);
                math::axpy(c, b, row);
            }
        }
        data
    }

    #[test]
    fn rank_two_data_yields_two_components() {
        let g = grid_of(30);
        let data = rank_k_data(40, 30, 2, 3);
        let basis = fit_pca(&data, &g, Flavor::Plain, true, 5).unwrap();
        assert_eq!(basis.len(), 2);
        assert_eq!(basis.effective_rank(), 2);
    }

    #[test]
    fn orthonormal_under_flavor_weighting() {
        let g = grid_of(40);
        let data = random_mat(25, 40, 5);
        for flavor in [Flavor::Plain, Flavor::Functional] {
            let basis = fit_pca(&data, &g, flavor, true, 10).unwrap();
            let w = g.weights(flavor.weighting());
            for p in 0..basis.len() {
                for l in 0..basis.len() {
                    let ip = crate::grid::inner_product_slices(
                        basis.component(p),
                        basis.component(l),
                        w,
                    );
                    let want = if p == l { 1.0 } else { 0.0 };
                    assert!(
                        (ip - want).abs() < 1e-8,
                        "{flavor:?} ({p},{l}) -> {ip}"
                    );
                }
            }
        }
    }

    #[test]
    fn variance_accounting_full_rank() {
        let g = grid_of(12);
        let data = random_mat(30, 12, 7);
        let basis = fit_pca(&data, &g, Flavor::Functional, true, 12).unwrap();
        let total: f64 = basis.eigenvalues().iter().sum();
        assert!(
            (total - basis.total_variance()).abs() < 1e-8 * basis.total_variance(),
            "{total} vs {}",
            basis.total_variance()
        );
    }

    #[test]
    fn explained_variance_simple_cases() {
        let g = grid_of(10);
        // rank-1 data
        let data = rank_k_data(20, 10, 1, 11);
        let basis = fit_pca(&data, &g, Flavor::Plain, true, 3).unwrap();
        let (iev, cev) = explained_variance(&basis, basis.len()).unwrap();
        assert_eq!(iev.len(), 1);
        assert!((iev[0] - 1.0).abs() < 1e-9);
        assert!((cev[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equal_eigenvalue_pair_splits_evenly() {
        let g = grid_of(8);
        // two orthogonal directions with identical amplitude patterns
        let n = 64;
        let mut data = Mat::zeros(n, 8);
        for i in 0..n {
            let a = if i % 2 == 0 { 1.0 } else { -1.0 };
            let b = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
            data[(i, 0)] = a;
            data[(i, 1)] = b;
        }
        let basis = fit_pca(&data, &g, Flavor::Plain, true, 4).unwrap();
        let (iev, _) = explained_variance(&basis, 2).unwrap();
        assert!((iev[0] - 0.5).abs() < 1e-9);
        assert!((iev[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn projection_centering_and_orthonormality() {
        let g = grid_of(20);
        let data = random_mat(15, 20, 9);
        let basis = fit_pca(&data, &g, Flavor::Functional, true, 5).unwrap();
        // row equal to the mean projects to zero
        let mut mrow = Mat::zeros(1, 20);
        mrow.row_mut(0).copy_from_slice(basis.mean());
        let sm = project(&basis, &mrow).unwrap();
        for &v in sm.scores.data() {
            assert!(math::abs(v) < 1e-10);
        }
        // row = mean + 2 phi_0 projects to [2, 0, 0, ...]
        let mut prow = Mat::zeros(1, 20);
        {
            let r = prow.row_mut(0);
            r.copy_from_slice(basis.mean());
            math::axpy(2.0, basis.component(0), r);
        }
        let sp = project(&basis, &prow).unwrap();
        assert!((sp.scores[(0, 0)] - 2.0).abs() < 1e-10);
        for l in 1..basis.len() {
            assert!(math::abs(sp.scores[(0, l)]) < 1e-10);
        }
    }

    #[test]
    fn full_rank_projection_reconstructs_training_data() {
        let g = grid_of(16);
        let data = random_mat(12, 16, 13);
        for flavor in [Flavor::Plain, Flavor::Functional] {
            let basis = fit_pca(&data, &g, flavor, true, 11).unwrap();
            let scores = project(&basis, &data).unwrap();
            let recon = reconstruct(&basis, &scores.scores, basis.len()).unwrap();
            for (a, b) in data.data().iter().zip(recon.data()) {
                assert!((a - b).abs() < 1e-8, "{flavor:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_components_reconstruct_the_mean() {
        let g = grid_of(10);
        let data = random_mat(8, 10, 15);
        let basis = fit_pca(&data, &g, Flavor::Plain, true, 4).unwrap();
        let scores = project(&basis, &data).unwrap();
        let recon = reconstruct(&basis, &scores.scores, 0).unwrap();
        for i in 0..8 {
            for j in 0..10 {
                assert_eq!(recon[(i, j)], basis.mean()[j]);
            }
        }
    }

    #[test]
    fn reconstruction_error_is_monotone_in_components() {
        let g = grid_of(24);
        let data = random_mat(30, 24, 17);
        let basis = fit_pca(&data, &g, Flavor::Plain, true, 12).unwrap();
        let scores = project(&basis, &data).unwrap();
        let mut prev = f64::INFINITY;
        for l in 0..=basis.len() {
            let recon = reconstruct(&basis, &scores.scores, l).unwrap();
            let mtr = reconstruction_metrics(&data, &recon).unwrap();
            assert!(mtr.rmse <= prev + 1e-12, "rmse grew at L={l}");
            prev = mtr.rmse;
        }
    }

    #[test]
    fn metrics_scale_invariance_of_rho() {
        let g = grid_of(10);
        let data = random_mat(6, 10, 19);
        let mut doubled = data.clone();
        for v in doubled.data_mut() {
            *v *= 2.0;
        }
        let mtr = reconstruction_metrics(&data, &doubled).unwrap();
        assert!(math::abs(mtr.delta_rho) < 1e-12);
        assert!(mtr.rmse > 0.0);
        let same = reconstruction_metrics(&data, &data).unwrap();
        assert_eq!(same.rmse, 0.0);
        assert!(math::abs(same.delta_rho) < 1e-12);
    }

    #[test]
    fn orthogonal_reconstruction_has_delta_rho_one() {
        let g = grid_of(4);
        let _ = g;
        let a = Mat::from_vec(1, 4, vec![1.0, 0.0, 0.0, 0.0]);
        let b = Mat::from_vec(1, 4, vec![0.0, 1.0, 0.0, 0.0]);
        let mtr = reconstruction_metrics(&a, &b).unwrap();
        assert!((mtr.delta_rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_is_deterministic() {
        let g = grid_of(32);
        let data = random_mat(50, 32, 21);
        let a = fit_pca(&data, &g, Flavor::Functional, true, 8).unwrap();
        let b = fit_pca(&data, &g, Flavor::Functional, true, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn sign_convention_max_entry_positive() {
        let g = grid_of(16);
        let data = random_mat(20, 16, 23);
        let basis = fit_pca(&data, &g, Flavor::Plain, true, 6).unwrap();
        for l in 0..basis.len() {
            let row = basis.component(l);
            let mut arg = 0;
            let mut best = 0.0f64;
            for (j, &v) in row.iter().enumerate() {
                if math::abs(v) > best {
                    best = math::abs(v);
                    arg = j;
                }
            }
            assert!(row[arg] > 0.0);
        }
    }

    #[test]
    fn identical_bases_compare_perfectly() {
        let g = grid_of(20);
        let data = random_mat(15, 20, 25);
        let a = fit_pca(&data, &g, Flavor::Plain, true, 5).unwrap();
        let res = compare_flavors(&a, &a, 5).unwrap();
        for (rmse, r2) in res {
            assert_eq!(rmse, 0.0);
            assert!((r2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_components_have_zero_r2() {
        let g = grid_of(24);
        let data = random_mat(20, 24, 33);
        let basis = fit_pca(&data, &g, Flavor::Plain, true, 4).unwrap();
        // compare component l of one basis against component l+1 of a
        // shifted copy: orthogonal directions, near-zero correlation
        let shifted = PcBasis::from_parts(
            g.clone(),
            Flavor::Plain,
            true,
            basis.mean().to_vec(),
            {
                let mut m = Mat::zeros(2, 24);
                m.row_mut(0).copy_from_slice(basis.component(1));
                m.row_mut(1).copy_from_slice(basis.component(0));
                m
            },
            vec![basis.eigenvalues()[1], basis.eigenvalues()[0]],
            basis.total_variance(),
            basis.effective_rank(),
            basis.n_samples(),
        )
        .unwrap();
        let res = compare_flavors(&basis, &shifted, 2).unwrap();
        for (l, (_, r2)) in res.iter().enumerate() {
            assert!(*r2 < 0.2, "component {l}: r2 = {r2} not near zero");
        }
    }

    #[test]
    fn flavors_agree_on_uniform_grid_noiseless_data() {
        let g = grid_of(50);
        // well-separated spectrum so both flavors rank components identically
        let mut rng = stream(27, Domain::Generic, 1);
        let basis_dirs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..50).map(|_| uniform(&mut rng, -1.0, 1.0)).collect())
            .collect();
        let mut data = Mat::zeros(40, 50);
        for i in 0..40 {
            let row = data.row_mut(i);
            for (l, dir) in basis_dirs.iter().enumerate() {
                let amp = crate::math::powf(4.0, -(l as f64));
                math::axpy(amp * uniform(&mut rng, 0.0, 1.0), dir, row);
            }
        }
        let a = fit_pca(&data, &g, Flavor::Plain, true, 4).unwrap();
        let b = fit_pca(&data, &g, Flavor::Functional, true, 4).unwrap();
        let res = compare_flavors(&a, &b, 4).unwrap();
        for (l, (_, r2)) in res.iter().enumerate() {
            assert!(*r2 >= 0.99, "component {l}: r2 = {r2}");
        }
    }

    #[test]
    fn uncentered_mode_has_zero_mean_function() {
        let g = grid_of(12);
        let data = random_mat(10, 12, 29);
        let basis = fit_pca(&data, &g, Flavor::Plain, false, 4).unwrap();
        assert!(basis.mean().iter().all(|&v| v == 0.0));
        // scores reconstruct data exactly at full rank
        let basis_full = fit_pca(&data, &g, Flavor::Plain, false, 10).unwrap();
        let scores = project(&basis_full, &data).unwrap();
        let recon = reconstruct(&basis_full, &scores.scores, basis_full.len()).unwrap();
        for (a, b) in data.data().iter().zip(recon.data()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn component_request_beyond_min_dim_is_rejected() {
        let g = grid_of(10);
        let data = random_mat(4, 10, 31);
        assert!(fit_pca(&data, &g, Flavor::Plain, true, 5).is_err());
        assert!(fit_pca(&data, &g, Flavor::Plain, true, 0).is_err());
        assert!(reconstruct(
            &fit_pca(&data, &g, Flavor::Plain, true, 3).unwrap(),
            &Mat::zeros(1, 3),
            4
        )
        .is_err());
    }
}

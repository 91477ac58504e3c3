use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExcursionError;
use crate::kmer::h_size;

/// Multiplicity table of excursion vectors. Excursions at small k repeat
/// heavily, so moments and resampling work on distinct rows.
#[derive(Debug, Clone, Default)]
pub struct ExcursionTable {
    d: usize,
    n: u64,
    rows: HashMap<Vec<u32>, u64>,
}

impl ExcursionTable {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            n: 0,
            rows: HashMap::new(),
        }
    }

    /// Draws `count` vectors from `iter`.
    pub fn collect<I>(d: usize, iter: I, count: u64) -> Result<Self, ExcursionError>
    where
        I: IntoIterator<Item = Result<Vec<u32>, ExcursionError>>,
    {
        let mut t = Self::new(d);
        let mut it = iter.into_iter();
        for _ in 0..count {
            let y = it
                .next()
                .ok_or_else(|| ExcursionError::InvalidArgument("stream ended early".into()))??;
            t.push(y)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, y: Vec<u32>) -> Result<(), ExcursionError> {
        if y.len() != self.d {
            return Err(ExcursionError::Dimension {
                expected: self.d,
                got: y.len(),
            });
        }
        self.n += 1;
        *self.rows.entry(y).or_insert(0) += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: ExcursionTable) -> Result<(), ExcursionError> {
        if other.d != self.d {
            return Err(ExcursionError::Dimension {
                expected: self.d,
                got: other.d,
            });
        }
        self.n += other.n;
        for (y, c) in other.rows {
            *self.rows.entry(y).or_insert(0) += c;
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn samples(&self) -> u64 {
        self.n
    }

    pub fn distinct(&self) -> usize {
        self.rows.len()
    }

    pub fn count_of(&self, y: &[u32]) -> u64 {
        self.rows.get(y).copied().unwrap_or(0)
    }

    /// Distinct rows with multiplicities, in a fixed order.
    pub fn sorted_rows(&self) -> Vec<(&[u32], u64)> {
        let mut v: Vec<_> = self.rows.iter().map(|(y, &c)| (y.as_slice(), c)).collect();
        v.sort_unstable();
        v
    }

    pub fn moments(&self, bootstrap: Option<BootstrapConfig>) -> Result<MomentEstimate, ExcursionError> {
        if self.n < 2 {
            return Err(ExcursionError::TooFewSamples(self.n));
        }
        let rows = self.sorted_rows();
        let weights: Vec<f64> = rows.iter().map(|&(_, c)| c as f64).collect();
        let (mean, cov) = weighted_moments(&rows, &weights, self.d);
        let lambda_min = min_eigenvalue(&cov, self.d);
        let n = self.n as f64;
        let se = (0..self.d).map(|i| (cov[i * self.d + i] / n).sqrt()).collect();
        let lambda_min_ci = bootstrap.map(|cfg| bootstrap_lambda_min(&rows, self.n, self.d, cfg));
        Ok(MomentEstimate {
            n: self.n,
            d: self.d,
            mean,
            cov,
            se,
            lambda_min,
            lambda_min_ci,
            bootstrap,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 1000,
            seed: 0,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub n: u64,
    pub d: usize,
    pub mean: Vec<f64>,
    /// Unbiased covariance, row-major `d x d`.
    pub cov: Vec<f64>,
    /// Standard error of each mean coordinate.
    pub se: Vec<f64>,
    pub lambda_min: f64,
    /// Percentile bootstrap interval for the smallest eigenvalue.
    pub lambda_min_ci: Option<(f64, f64)>,
    pub bootstrap: Option<BootstrapConfig>,
}

impl MomentEstimate {
    pub fn cov_at(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.d + j]
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.d, &self.cov)
    }

    /// Exact pooled moments of two independent samples. The bootstrap
    /// interval does not survive pooling.
    pub fn merge(&self, other: &MomentEstimate) -> Result<MomentEstimate, ExcursionError> {
        if self.d != other.d {
            return Err(ExcursionError::Dimension {
                expected: self.d,
                got: other.d,
            });
        }
        let d = self.d;
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta: Vec<f64> = (0..d).map(|i| other.mean[i] - self.mean[i]).collect();
        let mean: Vec<f64> = (0..d).map(|i| self.mean[i] + delta[i] * nb / n).collect();
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let m2 = (na - 1.0) * self.cov_at(i, j)
                    + (nb - 1.0) * other.cov_at(i, j)
                    + delta[i] * delta[j] * na * nb / n;
                cov[i * d + j] = m2 / (n - 1.0);
            }
        }
        let se = (0..d).map(|i| (cov[i * d + i] / n).sqrt()).collect();
        Ok(MomentEstimate {
            n: self.n + other.n,
            d,
            lambda_min: min_eigenvalue(&cov, d),
            mean,
            cov,
            se,
            lambda_min_ci: None,
            bootstrap: None,
        })
    }
}

/// Sample moments of `count` vectors drawn from `iter`.
pub fn estimate_moments<I>(
    d: usize,
    iter: I,
    count: u64,
    bootstrap: Option<BootstrapConfig>,
) -> Result<MomentEstimate, ExcursionError>
where
    I: IntoIterator<Item = Result<Vec<u32>, ExcursionError>>,
{
    if count < 2 {
        return Err(ExcursionError::TooFewSamples(count));
    }
    ExcursionTable::collect(d, iter, count)?.moments(bootstrap)
}

/// Two-pass weighted mean and unbiased covariance.
fn weighted_moments(rows: &[(&[u32], u64)], w: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n: f64 = w.iter().sum();
    let mut mean = vec![0.0; d];
    for ((y, _), &c) in rows.iter().zip(w) {
        for (m, &v) in mean.iter_mut().zip(*y) {
            *m += c * v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for ((y, _), &c) in rows.iter().zip(w) {
        if c == 0.0 {
            continue;
        }
        for i in 0..d {
            centered[i] = y[i] as f64 - mean[i];
        }
        for i in 0..d {
            let ci = c * centered[i];
            for j in i..d {
                cov[i * d + j] += ci * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / (n - 1.0);
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    (mean, cov)
}

pub(crate) fn min_eigenvalue(cov: &[f64], d: usize) -> f64 {
    let m = DMatrix::from_row_slice(d, d, cov);
    SymmetricEigen::try_new(m, 1e-10, 0)
        .map(|e| e.eigenvalues.min())
        .unwrap_or(f64::NAN)
}

fn bootstrap_lambda_min(
    rows: &[(&[u32], u64)],
    n: u64,
    d: usize,
    cfg: BootstrapConfig,
) -> (f64, f64) {
    let mut stats: Vec<f64> = (0..cfg.resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let w = multinomial(rows, n, &mut rng);
            let (_, cov) = weighted_moments(rows, &w, d);
            min_eigenvalue(&cov, d)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - cfg.level) / 2.0;
    (quantile(&stats, tail), quantile(&stats, 1.0 - tail))
}

/// Multinomial resample of `n` draws over the rows, by sequential
/// conditional binomials.
fn multinomial(rows: &[(&[u32], u64)], n: u64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut left = n;
    let mut mass_left = n;
    rows.iter()
        .map(|&(_, c)| {
            if left == 0 || mass_left == 0 {
                return 0.0;
            }
            let p = (c as f64 / mass_left as f64).min(1.0);
            let draw = if p >= 1.0 {
                left
            } else {
                Binomial::new(left, p).expect("valid binomial").sample(rng)
            };
            left -= draw;
            mass_left -= c;
            draw as f64
        })
        .collect()
}

/// Linear-interpolated quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanRow {
    pub coordinate: usize,
    pub mean_1: f64,
    pub mean_2: f64,
    pub combined_se: f64,
    pub z: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanComparison {
    pub rows: Vec<MeanRow>,
    pub tolerance_se: f64,
    pub passed: bool,
}

/// Coordinate-wise comparison of two independent mean estimates, each
/// difference measured in combined standard errors.
pub fn compare_means(a: &MomentEstimate, b: &MomentEstimate, tolerance_se: f64) -> MeanComparison {
    let rows: Vec<MeanRow> = (0..a.d.min(b.d))
        .map(|i| {
            let diff = a.mean[i] - b.mean[i];
            let se = (a.se[i].powi(2) + b.se[i].powi(2)).sqrt();
            let z = z_score(diff, se);
            MeanRow {
                coordinate: i,
                mean_1: a.mean[i],
                mean_2: b.mean[i],
                combined_se: se,
                z,
                passed: z.abs() <= tolerance_se,
            }
        })
        .collect();
    let passed = a.d == b.d && rows.iter().all(|r| r.passed);
    MeanComparison {
        rows,
        tolerance_se,
        passed,
    }
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryRow {
    /// Coordinates in the Bp block and the Cp block.
    pub coordinates: (usize, usize),
    pub diff: f64,
    pub se: f64,
    pub z: f64,
    pub passed: bool,
}

/// Compares the Bp-block and Cp-block means within one sample, using the
/// standard error of the paired difference.
pub fn block_symmetry(e: &MomentEstimate, k: usize, tolerance_se: f64) -> Vec<SymmetryRow> {
    let h = h_size(k);
    (0..h)
        .map(|r| {
            let (i, j) = (1 + h + r, 1 + 2 * h + r);
            let diff = e.mean[i] - e.mean[j];
            let var = e.cov_at(i, i) + e.cov_at(j, j) - 2.0 * e.cov_at(i, j);
            let se = (var.max(0.0) / e.n as f64).sqrt();
            let z = z_score(diff, se);
            SymmetryRow {
                coordinates: (i, j),
                diff,
                se,
                z,
                passed: z.abs() <= tolerance_se,
            }
        })
        .collect()
}

/// Multivariate normal with a positive definite covariance.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    mean: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    log_norm: f64,
}

impl GaussianModel {
    pub fn new(mean: &[f64], cov: DMatrix<f64>) -> Result<Self, ExcursionError> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(ExcursionError::Dimension {
                expected: d,
                got: cov.nrows(),
            });
        }
        let chol = cov.cholesky().ok_or(ExcursionError::NotPositiveDefinite)?;
        let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        if !log_det.is_finite() {
            return Err(ExcursionError::NotPositiveDefinite);
        }
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self {
            mean: DVector::from_column_slice(mean),
            chol,
            log_norm,
        })
    }

    pub fn from_estimate(e: &MomentEstimate) -> Result<Self, ExcursionError> {
        Self::new(&e.mean, e.cov_matrix())
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    /// `x^T S^-1 x` for the covariance `S`, without centering.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        v.dot(&self.chol.solve(&v))
    }

    /// Squared Mahalanobis distance of `x` from the mean.
    pub fn mahalanobis(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x) - &self.mean;
        v.dot(&self.chol.solve(&v))
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis(x)
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(rows: Vec<Vec<u32>>) -> impl Iterator<Item = Result<Vec<u32>, ExcursionError>> {
        rows.into_iter().map(Ok)
    }

    #[test]
    fn constant_stream_has_zero_covariance() {
        let e = estimate_moments(3, stream(vec![vec![2, 1, 1]; 50]), 50, Some(BootstrapConfig::default()))
            .unwrap();
        assert_eq!(e.mean, vec![2.0, 1.0, 1.0]);
        assert!(e.cov.iter().all(|&c| c == 0.0));
        assert_eq!(e.lambda_min, 0.0);
        assert_eq!(e.lambda_min_ci, Some((0.0, 0.0)));
    }

    #[test]
    fn rejects_single_sample() {
        assert!(matches!(
            estimate_moments(1, stream(vec![vec![1]]), 1, None),
            Err(ExcursionError::TooFewSamples(1))
        ));
    }

    #[test]
    fn matches_direct_formula() {
        let rows = vec![vec![1, 0], vec![2, 1], vec![4, 1], vec![2, 1], vec![3, 0]];
        let e = estimate_moments(2, stream(rows.clone()), 5, None).unwrap();
        let n = rows.len() as f64;
        let m: Vec<f64> = (0..2).map(|i| rows.iter().map(|r| r[i] as f64).sum::<f64>() / n).collect();
        for i in 0..2 {
            for j in 0..2 {
                let c: f64 = rows.iter().map(|r| (r[i] as f64 - m[i]) * (r[j] as f64 - m[j])).sum::<f64>()
                    / (n - 1.0);
                assert!((e.cov_at(i, j) - c).abs() < 1e-12);
            }
        }
        assert!((e.mean[0] - m[0]).abs() < 1e-12);
    }

    #[test]
    fn merge_equals_pooled() {
        let a_rows = vec![vec![1, 0], vec![2, 1], vec![4, 1]];
        let b_rows = vec![vec![2, 1], vec![3, 0], vec![7, 2], vec![1, 1]];
        let a = estimate_moments(2, stream(a_rows.clone()), 3, None).unwrap();
        let b = estimate_moments(2, stream(b_rows.clone()), 4, None).unwrap();
        let all: Vec<_> = a_rows.into_iter().chain(b_rows).collect();
        let p = estimate_moments(2, stream(all), 7, None).unwrap();
        let m = a.merge(&b).unwrap();
        for (x, y) in m.cov.iter().zip(&p.cov) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in m.mean.iter().zip(&p.mean) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_density_standard() {
        let g = GaussianModel::new(&[0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let want = 1.0 / (2.0 * std::f64::consts::PI);
        assert!((g.density(&[0.0, 0.0]) - want).abs() < 1e-15);
        assert!((g.mahalanobis(&[3.0, 4.0]) - 25.0).abs() < 1e-12);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            GaussianModel::new(&[0.0, 0.0], singular),
            Err(ExcursionError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn bootstrap_is_seeded() {
        let rows: Vec<Vec<u32>> = (0..200).map(|i| vec![i % 7, (i * i) % 5]).collect();
        let cfg = BootstrapConfig {
            resamples: 50,
            seed: 3,
            level: 0.9,
        };
        let a = estimate_moments(2, stream(rows.clone()), 200, Some(cfg)).unwrap();
        let b = estimate_moments(2, stream(rows), 200, Some(cfg)).unwrap();
        assert_eq!(a.lambda_min_ci, b.lambda_min_ci);
        let (lo, hi) = a.lambda_min_ci.unwrap();
        assert!(lo <= a.lambda_min && a.lambda_min <= hi + 0.5);
    }
}

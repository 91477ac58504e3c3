use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::moments::{ExcursionTable, GaussianModel, MomentEstimate};
use super::{coordinate_labels, excursion_from_cycle, pack_triple, ExcursionError, TripleBlockLaw};
use crate::kmer::{all_ones, h_pairs, h_size};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionARow {
    pub coordinate: usize,
    pub label: String,
    pub base_cycle: Vec<u32>,
    pub plus_cycle: Vec<u32>,
    pub base_point: Vec<u32>,
    pub plus_point: Vec<u32>,
    /// The two points differ by exactly the unit vector of this coordinate.
    pub differs_by_unit: bool,
    pub base_cycle_probability: f64,
    pub plus_cycle_probability: f64,
    pub base_count: u64,
    pub plus_count: u64,
}

impl ConditionARow {
    pub fn passed(&self) -> bool {
        self.differs_by_unit && self.base_count > 0 && self.plus_count > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionAReport {
    pub k: usize,
    pub samples: u64,
    pub rows: Vec<ConditionARow>,
}

impl ConditionAReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(ConditionARow::passed)
    }
}

/// The pair of explicit cycles witnessing that both `x_r` and `x_r + e_r`
/// carry positive mass, for every coordinate `r`.
pub fn witness_cycles(k: usize) -> Vec<(Vec<u32>, Vec<u32>)> {
    let ones = all_ones(k);
    let full = pack_triple(ones, ones, ones, k);
    let mut out = vec![(vec![0, 0, full, 0, 0], vec![0, 0, full, full, 0, 0])];
    for v in 0..3 {
        let put = |x: u32| {
            let mut t = [ones; 3];
            t[v] = x;
            pack_triple(t[0], t[1], t[2], k)
        };
        for (a, b) in h_pairs(k) {
            out.push((
                vec![0, 0, full, full, put(b), 0, 0],
                vec![0, 0, full, put(a), put(b), 0, 0],
            ));
        }
    }
    out
}

/// Maps each witness cycle to its excursion vector, checks the unit-step
/// relation and looks both points up in an empirical sample.
pub fn condition_a_probe(
    law: &TripleBlockLaw,
    sample: &ExcursionTable,
) -> Result<ConditionAReport, ExcursionError> {
    let k = law.k;
    let d = 1 + 3 * h_size(k);
    if sample.dimension() != d {
        return Err(ExcursionError::Dimension {
            expected: d,
            got: sample.dimension(),
        });
    }
    let labels = coordinate_labels(k);
    let mut rows = Vec::with_capacity(d);
    for (r, (base, plus)) in witness_cycles(k).into_iter().enumerate() {
        let x = excursion_from_cycle(&base, k)?;
        let xp = excursion_from_cycle(&plus, k)?;
        let differs_by_unit = (0..d).all(|i| xp[i] as i64 - x[i] as i64 == (i == r) as i64);
        rows.push(ConditionARow {
            coordinate: r,
            label: labels[r].clone(),
            base_cycle_probability: law.cycle_probability(&base),
            plus_cycle_probability: law.cycle_probability(&plus),
            base_count: sample.count_of(&x),
            plus_count: sample.count_of(&xp),
            base_cycle: base,
            plus_cycle: plus,
            base_point: x,
            plus_point: xp,
            differs_by_unit,
        });
    }
    Ok(ConditionAReport {
        k,
        samples: sample.samples(),
        rows,
    })
}

/// `count` directions drawn uniformly from the unit sphere in `R^d`.
pub fn random_unit_directions(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-9 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionRow {
    pub direction: usize,
    pub ell: usize,
    pub replicates: usize,
    pub variance: f64,
    pub ks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionReport {
    pub directions: Vec<Vec<f64>>,
    pub rows: Vec<ProjectionRow>,
}

impl ProjectionReport {
    pub fn row(&self, direction: usize, ell: usize) -> Option<&ProjectionRow> {
        self.rows.iter().find(|r| r.direction == direction && r.ell == ell)
    }
}

/// Kolmogorov-Smirnov distance between the law of `u^T (S_l - l m) / sqrt(l)`
/// over disjoint windows of `l` excursions and `N(0, u^T S u)`.
///
/// Draws `replicates * max(ells)` excursions from `iter`; every `l` gets
/// exactly `replicates` sums.
pub fn clt_projection_check<I>(
    iter: I,
    moments: &MomentEstimate,
    directions: &[Vec<f64>],
    ells: &[usize],
    replicates: usize,
) -> Result<ProjectionReport, ExcursionError>
where
    I: IntoIterator<Item = Result<Vec<u32>, ExcursionError>>,
{
    let d = moments.d;
    let mut variances = Vec::with_capacity(directions.len());
    for (i, u) in directions.iter().enumerate() {
        if u.len() != d {
            return Err(ExcursionError::Dimension {
                expected: d,
                got: u.len(),
            });
        }
        let mut v = 0.0;
        for a in 0..d {
            for b in 0..d {
                v += u[a] * moments.cov_at(a, b) * u[b];
            }
        }
        if !(v > 1e-12) {
            return Err(ExcursionError::InvalidArgument(format!(
                "direction {i} is degenerate: u^T S u = {v:e}"
            )));
        }
        variances.push(v);
    }
    if ells.is_empty() || ells.contains(&0) || replicates == 0 {
        return Err(ExcursionError::InvalidArgument("empty window schedule".into()));
    }
    let max_ell = *ells.iter().max().unwrap();
    let shifts: Vec<f64> = directions
        .iter()
        .map(|u| u.iter().zip(&moments.mean).map(|(a, b)| a * b).sum())
        .collect();
    let nd = directions.len();
    let mut acc = vec![vec![0.0f64; nd]; ells.len()];
    let mut sums: Vec<Vec<Vec<f64>>> = vec![vec![Vec::with_capacity(replicates); nd]; ells.len()];
    let mut it = iter.into_iter();
    let mut proj = vec![0.0; nd];
    for i in 0..replicates * max_ell {
        let y = it
            .next()
            .ok_or_else(|| ExcursionError::InvalidArgument("stream ended early".into()))??;
        for (p, u) in proj.iter_mut().zip(directions) {
            *p = u.iter().zip(&y).map(|(a, &b)| a * b as f64).sum();
        }
        for (li, &ell) in ells.iter().enumerate() {
            if sums[li][0].len() == replicates {
                continue;
            }
            for j in 0..nd {
                acc[li][j] += proj[j];
            }
            if (i + 1) % ell == 0 {
                let scale = (ell as f64).sqrt();
                for j in 0..nd {
                    sums[li][j].push((acc[li][j] - ell as f64 * shifts[j]) / scale);
                    acc[li][j] = 0.0;
                }
            }
        }
    }
    let mut rows = Vec::new();
    for (j, &var) in variances.iter().enumerate() {
        let normal = Normal::new(0.0, var.sqrt()).expect("positive variance");
        for (li, &ell) in ells.iter().enumerate() {
            let mut v = std::mem::take(&mut sums[li][j]);
            rows.push(ProjectionRow {
                direction: j,
                ell,
                replicates: v.len(),
                variance: var,
                ks: ks_statistic(&mut v, |x| normal.cdf(x)),
            });
        }
    }
    Ok(ProjectionReport {
        directions: directions.to_vec(),
        rows,
    })
}

/// Two-sided one-sample KS statistic. Sorts `data` in place.
pub(crate) fn ks_statistic(data: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    data.sort_by(f64::total_cmp);
    let n = data.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < data.len() {
        // Ties are a single jump of the empirical CDF.
        let mut j = i;
        while j + 1 < data.len() && data[j + 1] == data[i] {
            j += 1;
        }
        let f = cdf(data[i]);
        d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalCltRow {
    pub ell: usize,
    pub windows: usize,
    pub lattice_points: usize,
    /// `max |sqrt(l) P(S_l = y) - phi((y - l m) / sqrt(l))|` over the window.
    pub max_deviation: f64,
    pub argmax: i64,
    /// Empirical mass inside `|y - l m| <= 3 sqrt(l var)`.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalCltReport {
    pub samples: usize,
    pub mean: f64,
    pub variance: f64,
    pub rows: Vec<LocalCltRow>,
}

impl LocalCltReport {
    pub fn monotone_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].max_deviation < w[0].max_deviation)
    }

    pub fn coverage_ok(&self, min: f64) -> bool {
        self.rows.iter().all(|r| r.coverage >= min)
    }
}

/// One-dimensional lattice local CLT check on an integer coordinate.
/// Point probabilities of `S_l` are estimated from all sliding windows of
/// `l` consecutive values; mean and variance come from the values.
pub fn local_clt_lattice_check(values: &[u32], ells: &[usize]) -> Result<LocalCltReport, ExcursionError> {
    let n = values.len();
    if n < 2 {
        return Err(ExcursionError::TooFewSamples(n as u64));
    }
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let variance = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(variance > 0.0) {
        return Err(ExcursionError::InvalidArgument("coordinate has zero variance".into()));
    }
    let mut rows = Vec::with_capacity(ells.len());
    for &ell in ells {
        if ell == 0 || ell > n {
            return Err(ExcursionError::InvalidArgument(format!("window {ell} for {n} samples")));
        }
        let mut hist: HashMap<u64, u64> = HashMap::new();
        let mut s: u64 = values[..ell].iter().map(|&v| v as u64).sum();
        *hist.entry(s).or_insert(0) += 1;
        for i in ell..n {
            s = s + values[i] as u64 - values[i - ell] as u64;
            *hist.entry(s).or_insert(0) += 1;
        }
        let windows = n - ell + 1;
        rows.push(lattice_deviation(&hist, windows, ell, mean, variance));
    }
    Ok(LocalCltReport {
        samples: n,
        mean,
        variance,
        rows,
    })
}

fn lattice_deviation(hist: &HashMap<u64, u64>, windows: usize, ell: usize, mean: f64, var: f64) -> LocalCltRow {
    let l = ell as f64;
    let center = l * mean;
    let half = 3.0 * (l * var).sqrt();
    let lo = (center - half).ceil().max(0.0) as i64;
    let hi = (center + half).floor() as i64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
    let mut max_deviation: f64 = 0.0;
    let mut argmax = lo;
    let mut coverage = 0.0;
    for y in lo..=hi {
        let p = hist.get(&(y as u64)).copied().unwrap_or(0) as f64 / windows as f64;
        coverage += p;
        let x = (y as f64 - center) / l.sqrt();
        let phi = norm * (-0.5 * x * x / var).exp();
        let dev = (l.sqrt() * p - phi).abs();
        if dev > max_deviation {
            max_deviation = dev;
            argmax = y;
        }
    }
    LocalCltRow {
        ell,
        windows,
        lattice_points: (hi - lo + 1).max(0) as usize,
        max_deviation,
        argmax,
        coverage,
    }
}

/// Sample lag-1 autocorrelation and its null standard error `1/sqrt(n)`.
pub fn lag1_correlation(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n < 3 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let cov: f64 = values.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    (cov / var, 1.0 / (n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailHazardReport {
    /// Band edges `[t0, t1)` and `[t1, t2)`.
    pub bands: [(u64, u64); 2],
    pub hazards: [f64; 2],
    pub standard_errors: [f64; 2],
    pub z: f64,
    pub passed: bool,
}

/// Compares the discrete hazard `P(tau = t | tau >= t)` pooled over two
/// tail bands. A geometric tail has a constant hazard, equivalently a
/// straight log-survival curve. Bands run from the median to the 90%
/// quantile and from there to the 99.5% quantile.
pub fn tail_hazard_check(taus: &[u32], tolerance_se: f64) -> Result<TailHazardReport, ExcursionError> {
    if taus.len() < 100 {
        return Err(ExcursionError::TooFewSamples(taus.len() as u64));
    }
    let mut sorted = taus.to_vec();
    sorted.sort_unstable();
    let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p) as usize] as u64;
    let (t0, t1, t2) = (q(0.5), q(0.9), q(0.995));
    if !(t0 < t1 && t1 < t2) {
        return Err(ExcursionError::InvalidArgument(format!(
            "tail bands collapse: {t0}, {t1}, {t2}"
        )));
    }
    let band = |a: u64, b: u64| {
        let (mut events, mut at_risk) = (0u64, 0u64);
        for &t in taus {
            let t = t as u64;
            if t >= a {
                at_risk += t.min(b - 1) - a + 1;
                if t < b {
                    events += 1;
                }
            }
        }
        let h = events as f64 / at_risk as f64;
        (h, (h * (1.0 - h) / at_risk as f64).sqrt())
    };
    let (h0, s0) = band(t0, t1);
    let (h1, s1) = band(t1, t2);
    let z = (h0 - h1) / (s0 * s0 + s1 * s1).sqrt();
    Ok(TailHazardReport {
        bands: [(t0, t1), (t1, t2)],
        hazards: [h0, h1],
        standard_errors: [s0, s1],
        z,
        passed: z.abs() <= tolerance_se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipsoidReport {
    pub ell: usize,
    pub mu: i64,
    pub lambda_min: [f64; 2],
    pub c3: f64,
    pub center_in_ball: bool,
    pub center_in_ellipsoids: [bool; 2],
    pub sampled_points: usize,
    pub sampled_in_both: usize,
    /// Integer range of the level set at `ell`.
    pub level_set: (i64, i64),
    pub mu_in_level_set: bool,
    /// Range membership agrees with the defining inequality at every `mu`
    /// nearby, and every slice radius in the set is at least `c3 sqrt(l)`.
    pub level_set_consistent: bool,
    pub slice_radius_sq: f64,
    pub slice_count: Option<u64>,
    pub c4: Option<f64>,
}

impl EllipsoidReport {
    pub fn ball_inside_ellipsoids(&self) -> bool {
        self.sampled_in_both == self.sampled_points
    }
}

/// Largest slice dimension counted exactly.
const MAX_SLICE_DIM: usize = 8;

/// Ellipsoid, ball and level-set diagnostics at scale `ell`, centred at the
/// pooled mean of the two estimates.
pub fn ellipsoid_diagnostics(
    m1: &MomentEstimate,
    m2: &MomentEstimate,
    ell: usize,
    mu: Option<i64>,
    samples: usize,
    seed: u64,
) -> Result<EllipsoidReport, ExcursionError> {
    let d = m1.d;
    let g1 = GaussianModel::from_estimate(m1)?;
    let g2 = GaussianModel::from_estimate(m2)?;
    let pooled = m1.merge(m2)?;
    let l = ell as f64;
    let center: Vec<f64> = pooled.mean.iter().map(|m| l * m).collect();
    let lambda = m1.lambda_min.min(m2.lambda_min);
    if !(lambda > 0.0) {
        return Err(ExcursionError::NotPositiveDefinite);
    }
    let c3 = lambda.sqrt();
    let ball_r2 = 2.0 * l * lambda;
    let in_ellipsoid = |g: &GaussianModel, y: &[f64]| {
        let diff: Vec<f64> = y.iter().zip(&center).map(|(a, b)| a - b).collect();
        g.quadratic_form(&diff) <= 2.0 * l
    };
    let dist2 = |y: &[f64]| y.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum::<f64>();

    let rounded: Vec<f64> = center.iter().map(|c| c.round()).collect();
    let center_in_ball = dist2(&rounded) <= ball_r2;
    let center_in_ellipsoids = [in_ellipsoid(&g1, &rounded), in_ellipsoid(&g2, &rounded)];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = ball_r2.sqrt();
    let (mut sampled_points, mut sampled_in_both) = (0, 0);
    let mut attempts = 0usize;
    while sampled_points < samples && attempts < samples * 1000 {
        attempts += 1;
        let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
        let y: Vec<f64> = dir
            .iter()
            .zip(&center)
            .map(|(u, c)| (c + r * u / norm).round())
            .collect();
        if dist2(&y) > ball_r2 {
            continue;
        }
        sampled_points += 1;
        if in_ellipsoid(&g1, &y) && in_ellipsoid(&g2, &y) {
            sampled_in_both += 1;
        }
    }

    let m1c = center[0];
    let half = c3 * l.sqrt();
    let level_set = ((m1c - half).ceil() as i64, (m1c + half).floor() as i64);
    let mu = mu.unwrap_or(m1c.round() as i64);
    let in_level = |x: i64| (x as f64 - m1c).abs() <= half;
    let mu_in_level_set = level_set.0 <= mu && mu <= level_set.1;
    let span = (half.ceil() as i64) + 2;
    let level_set_consistent = in_level(mu) == mu_in_level_set
        && ((m1c.round() as i64 - span)..=(m1c.round() as i64 + span)).all(|x| {
            let by_range = level_set.0 <= x && x <= level_set.1;
            let r2 = ball_r2 - (x as f64 - m1c).powi(2);
            by_range == in_level(x) && (!by_range || r2 >= l * lambda - 1e-9)
        });

    let slice_radius_sq = ball_r2 - (mu as f64 - m1c).powi(2);
    let (slice_count, c4) = if d - 1 <= MAX_SLICE_DIM && slice_radius_sq >= 0.0 {
        let count = lattice_points_in_ball(&center[1..], slice_radius_sq);
        let scale = c3.powi(d as i32 - 1) * l.powf((d - 1) as f64 / 2.0);
        (Some(count), Some(count as f64 / scale))
    } else {
        (None, None)
    };

    Ok(EllipsoidReport {
        ell,
        mu,
        lambda_min: [m1.lambda_min, m2.lambda_min],
        c3,
        center_in_ball,
        center_in_ellipsoids,
        sampled_points,
        sampled_in_both,
        level_set,
        mu_in_level_set,
        level_set_consistent,
        slice_radius_sq,
        slice_count,
        c4,
    })
}

/// Number of integer points within squared distance `r2` of `center`.
pub fn lattice_points_in_ball(center: &[f64], r2: f64) -> u64 {
    if r2 < 0.0 {
        return 0;
    }
    let c = center[0];
    let r = r2.sqrt();
    let lo = (c - r).ceil() as i64;
    let hi = (c + r).floor() as i64;
    if center.len() == 1 {
        return (hi - lo + 1).max(0) as u64;
    }
    (lo..=hi)
        .map(|z| lattice_points_in_ball(&center[1..], r2 - (z as f64 - c).powi(2)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursion::{estimate_moments, ExcursionSource};
    use crate::phylo::{build_paper_trees, PaperTreeParams};

    #[test]
    fn witness_cycles_step_by_unit() {
        for k in 1..=2 {
            let cycles = witness_cycles(k);
            assert_eq!(cycles.len(), 1 + 3 * h_size(k));
            for (r, (base, plus)) in cycles.iter().enumerate() {
                let x = excursion_from_cycle(base, k).unwrap();
                let xp = excursion_from_cycle(plus, k).unwrap();
                for i in 0..x.len() {
                    assert_eq!(xp[i] as i64 - x[i] as i64, (i == r) as i64, "k={k} r={r} i={i}");
                }
            }
        }
    }

    #[test]
    fn tau_witness_point() {
        // 0,0 | 1 | 0,0 at every point: steps 0->0, 0->1, 1->0 before the
        // return, and 1->0 leaves the all-ones row so is not counted.
        let (base, _) = &witness_cycles(1)[0];
        assert_eq!(excursion_from_cycle(base, 1).unwrap(), vec![3, 1, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut v: Vec<f64> = (0..n).map(|i| normal.inverse_cdf((i as f64 + 0.5) / n as f64)).collect();
        let ks = ks_statistic(&mut v, |x| normal.cdf(x));
        assert!((ks - 0.5 / n as f64).abs() < 1e-9);
    }

    #[test]
    fn ks_with_ties() {
        let mut v = vec![0.0; 10];
        // One jump of height 1 at 0 against a CDF of 1/2 there.
        let ks = ks_statistic(&mut v, |x| if x < 0.0 { 0.0 } else { 0.5 });
        assert!((ks - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lattice_ball_counts() {
        assert_eq!(lattice_points_in_ball(&[0.0, 0.0], 1.0), 5);
        assert_eq!(lattice_points_in_ball(&[0.0, 0.0], 2.0), 9);
        assert_eq!(lattice_points_in_ball(&[0.5], 0.25), 2);
        assert_eq!(lattice_points_in_ball(&[0.0, 0.0, 0.0], 1.0), 7);
        assert_eq!(lattice_points_in_ball(&[0.0], -1.0), 0);
    }

    #[test]
    fn degenerate_direction_rejected() {
        let rows: Vec<Vec<u32>> = (0..100u32).map(|i| vec![i % 3, 1]).collect();
        let e = estimate_moments(2, rows.clone().into_iter().map(Ok), 100, None).unwrap();
        let err = clt_projection_check(rows.into_iter().map(Ok), &e, &[vec![0.0, 1.0]], &[4], 10);
        assert!(matches!(err, Err(ExcursionError::InvalidArgument(_))));
    }

    #[test]
    fn lag1_of_alternating_is_negative() {
        let v: Vec<f64> = (0..1000).map(|i| (i % 2) as f64).collect();
        assert!(lag1_correlation(&v).0 < -0.99);
    }

    #[test]
    fn geometric_tail_passes_hazard_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = rand_distr::Geometric::new(0.2).unwrap();
        let taus: Vec<u32> = (0..200_000).map(|_| 1 + rng.sample(g) as u32).collect();
        let r = tail_hazard_check(&taus, 4.0).unwrap();
        assert!(r.passed, "{r:?}");
        assert!((r.hazards[0] - 0.2).abs() < 0.01);
    }

    #[test]
    fn probe_on_small_sample() {
        let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        let src = ExcursionSource::for_tree(&pair.t1, 1, 1.0).unwrap();
        let table = ExcursionTable::collect(7, src.stream(2, 0), 50_000).unwrap();
        let rep = condition_a_probe(src.law(), &table).unwrap();
        assert_eq!(rep.rows.len(), 7);
        for row in &rep.rows {
            assert!(row.differs_by_unit);
            assert!(row.base_cycle_probability > 0.0 && row.plus_cycle_probability > 0.0);
        }
        // The tau witness is the most likely cycle of length 3 after 0,0,0.
        assert!(rep.rows[0].base_count > 0);
    }
}

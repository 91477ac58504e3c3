use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::TvError;
use crate::cf_sim::{simulate_marked, SimulationConfig};
use crate::kmer::kmer_count_vector;
use crate::phylo::PaperTreePair;

/// Histogram classifier over a hashed coarsening of the leaf count vectors.
/// Fixed up front; nothing is tuned on the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    /// Counts are divided by this before hashing; `None` uses
    /// `ceil(sqrt(m - k + 1) / 2)`.
    pub bucket_width: Option<usize>,
    pub hash_bits: u32,
    pub level: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            bucket_width: None,
            hash_bits: 16,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub m: usize,
    pub k: usize,
    pub samples: usize,
    pub holdout: usize,
    pub accuracy: f64,
    /// `2 * accuracy - 1`, a lower bound on the distance for any classifier.
    pub bound: f64,
    pub ci: (f64, f64),
    pub level: f64,
    pub seed: u64,
    pub bucket_width: usize,
    pub hash_bits: u32,
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, level: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Monte Carlo lower bound on the distance between the leaf count laws.
/// `samples` is split evenly between the trees; even-numbered replicates
/// train the histogram and odd-numbered ones measure its accuracy.
pub fn mc_tv_lower_bound(
    pair: &PaperTreePair,
    k: usize,
    m: usize,
    alpha: f64,
    samples: usize,
    seed: u64,
    config: ClassifierConfig,
) -> Result<McEstimate, TvError> {
    if samples < 4 {
        return Err(TvError::InvalidQuery(format!("need at least 4 samples, got {samples}")));
    }
    let leaves = pair.leaf_labels();
    let leaves: Vec<&str> = leaves.iter().map(String::as_str).collect();
    let windows = (m + 1).saturating_sub(k).max(1);
    let width = config
        .bucket_width
        .unwrap_or_else(|| ((windows as f64).sqrt() / 2.0).ceil() as usize)
        .max(1);
    let mask = (1u64 << config.hash_bits) - 1;
    let per_tree = samples / 2;
    let features: Vec<(usize, usize, u64)> = (0..2 * per_tree)
        .into_par_iter()
        .map(|i| {
            let (r, tree) = (i / 2, i % 2);
            let t = if tree == 0 { &pair.t1 } else { &pair.t2 };
            let cfg = SimulationConfig::new(alpha, m, seed).with_replicate(i as u64);
            let seqs = simulate_marked(t, &leaves, &cfg)?;
            let mut h = DefaultHasher::new();
            for s in &seqs {
                for c in kmer_count_vector(s, k).map_err(|e| TvError::InvalidQuery(e.to_string()))?.counts {
                    (c as usize / width).hash(&mut h);
                }
            }
            Ok((r, tree, h.finish() & mask))
        })
        .collect::<Result<_, TvError>>()?;
    let mut hist: HashMap<u64, [u64; 2]> = HashMap::new();
    for &(r, tree, bin) in &features {
        if r % 2 == 0 {
            hist.entry(bin).or_default()[tree] += 1;
        }
    }
    let (mut correct, mut holdout) = (0, 0);
    for &(r, tree, bin) in &features {
        if r % 2 == 1 {
            let c = hist.get(&bin).copied().unwrap_or_default();
            let guess = if c[0] >= c[1] { 0 } else { 1 };
            holdout += 1;
            correct += (guess == tree) as usize;
        }
    }
    let accuracy = correct as f64 / holdout as f64;
    let (lo, hi) = wilson_interval(correct, holdout, config.level);
    Ok(McEstimate {
        m,
        k,
        samples: 2 * per_tree,
        holdout,
        accuracy,
        bound: 2.0 * accuracy - 1.0,
        ci: (2.0 * lo - 1.0, 2.0 * hi - 1.0),
        level: config.level,
        seed,
        bucket_width: width,
        hash_bits: config.hash_bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phylo::{build_paper_trees, PaperTreeParams};

    #[test]
    fn wilson_known_value() {
        // 50/100 at 95%: centre 0.5, half width 1.96 * sqrt(0.25/100 + 1.96^2/40000) / (1 + 1.96^2/100).
        let (lo, hi) = wilson_interval(50, 100, 0.95);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn identical_trees_bound_near_zero() {
        let p = build_paper_trees(PaperTreeParams::default()).unwrap();
        let same = PaperTreePair::identical(p.t1.clone(), p.params);
        let e = mc_tv_lower_bound(&same, 1, 20, 1.0, 10_000, 3, ClassifierConfig::default()).unwrap();
        assert!(e.ci.0 <= 0.0 && 0.0 <= e.ci.1, "{e:?}");
    }

    #[test]
    fn reproducible() {
        let p = build_paper_trees(PaperTreeParams::default()).unwrap();
        let a = mc_tv_lower_bound(&p, 1, 10, 1.0, 2000, 8, ClassifierConfig::default()).unwrap();
        let b = mc_tv_lower_bound(&p, 1, 10, 1.0, 2000, 8, ClassifierConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}

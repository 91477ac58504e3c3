//! Simulation of the two-state symmetric substitution process at named tree
//! points, with reproducible, chunk-keyed randomness.
//!
//! Randomness: sites are processed in chunks of [`CHUNK_SITES`]. Chunk `c` of
//! replicate `r` under seed `s` draws from a ChaCha8 generator seeded with
//! `s`, stream `r`, starting at word position `c << 40`. Output therefore
//! does not depend on how chunks are scheduled across threads.

mod dump;
mod sequence;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phylo::paper::TRIPLE_POINTS;
use crate::phylo::site_law::{flip_prob, materialized_points};
use crate::phylo::{site_column_distribution, PhyloError, SiteDistribution, Tree};

pub use dump::SequenceDump;
pub use sequence::BinarySequence;

/// Sites per independently keyed RNG chunk (64 packed words).
pub const CHUNK_SITES: usize = 4096;

/// Word position at which the conditioning window's generator starts; far
/// beyond any chunk's range.
const CONDITION_WORD_POS: u128 = 1 << 66;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("flip rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("time must be non-negative and finite, got {0}")]
    NegativeTime(f64),
    #[error("sequence length must be at least 1")]
    EmptySequence,
    #[error("k and the block count must be at least 1 (k = {k}, blocks = {mu})")]
    InvalidBlocks { k: usize, mu: usize },
    #[error("malformed sequence dump: {0}")]
    BadDump(String),
    #[error(transparent)]
    Phylo(#[from] PhyloError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub alpha: f64,
    pub m: usize,
    pub seed: u64,
    pub replicate: u64,
}

impl SimulationConfig {
    pub fn new(alpha: f64, m: usize, seed: u64) -> Self {
        Self {
            alpha,
            m,
            seed,
            replicate: 0,
        }
    }

    pub fn with_replicate(mut self, replicate: u64) -> Self {
        self.replicate = replicate;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(SimError::InvalidRate(self.alpha));
        }
        if self.m == 0 {
            return Err(SimError::EmptySequence);
        }
        Ok(())
    }
}

/// `(1 - exp(-2 alpha t)) / 2`, the chance that the two ends of a time-`t`
/// path disagree at a site.
pub fn flip_probability(alpha: f64, t: f64) -> Result<f64, SimError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(SimError::InvalidRate(alpha));
    }
    if t.is_nan() || t < 0.0 {
        return Err(SimError::NegativeTime(t));
    }
    Ok(flip_prob(alpha, t))
}

/// Generator for one chunk of one replicate.
pub fn chunk_rng(seed: u64, replicate: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng.set_word_pos((chunk as u128) << 40);
    rng
}

/// Walks the substitution process down a tree one site at a time.
#[derive(Debug, Clone)]
pub struct ProcessSampler {
    /// Non-root nodes in preorder, with their parent and edge flip chance.
    edges: Vec<(usize, usize, f64)>,
    root: usize,
    nodes: usize,
    point_nodes: Vec<usize>,
}

impl ProcessSampler {
    pub fn new(tree: &Tree, points: &[&str], alpha: f64) -> Result<Self, SimError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(SimError::InvalidRate(alpha));
        }
        let (work, point_nodes) = materialized_points(tree, points)?;
        let edges = work
            .preorder()
            .into_iter()
            .filter_map(|v| {
                let n = &work.nodes()[v];
                n.parent.map(|p| (v, p, flip_prob(alpha, n.length)))
            })
            .collect();
        Ok(Self {
            edges,
            root: work.root(),
            nodes: work.len(),
            point_nodes,
        })
    }

    pub fn points(&self) -> usize {
        self.point_nodes.len()
    }

    /// One column: point `j` of `p` is bit `p - 1 - j` of the result.
    pub fn column<R: Rng + ?Sized>(&self, rng: &mut R, state: &mut Vec<u8>) -> usize {
        state.resize(self.nodes, 0);
        state[self.root] = rng.random::<bool>() as u8;
        for &(v, p, q) in &self.edges {
            let flip = rng.random::<f64>() < q;
            state[v] = state[p] ^ flip as u8;
        }
        self.point_nodes
            .iter()
            .fold(0usize, |acc, &id| (acc << 1) | state[id] as usize)
    }
}

/// Simulates `config.m` i.i.d. sites and returns one sequence per point, in
/// the order given.
pub fn simulate_marked(
    tree: &Tree,
    points: &[&str],
    config: &SimulationConfig,
) -> Result<Vec<BinarySequence>, SimError> {
    config.validate()?;
    let sampler = ProcessSampler::new(tree, points, config.alpha)?;
    let p = points.len();
    let chunks = config.m.div_ceil(CHUNK_SITES);
    let words_per_chunk = CHUNK_SITES / 64;
    let blocks: Vec<Vec<Vec<u64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(config.seed, config.replicate, c as u64);
            let start = c * CHUNK_SITES;
            let end = (start + CHUNK_SITES).min(config.m);
            let mut words = vec![vec![0u64; words_per_chunk]; p];
            let mut state = Vec::new();
            for i in 0..(end - start) {
                let col = sampler.column(&mut rng, &mut state);
                for (j, w) in words.iter_mut().enumerate() {
                    let bit = ((col >> (p - 1 - j)) & 1) as u64;
                    w[i >> 6] |= bit << (i & 63);
                }
            }
            words
        })
        .collect();
    let total_words = config.m.div_ceil(64);
    (0..p)
        .map(|j| {
            let mut words: Vec<u64> = blocks.iter().flat_map(|b| b[j].iter().copied()).collect();
            words.truncate(total_words);
            BinarySequence::from_words(words, config.m)
        })
        .collect()
}

/// Output of the conditioned sampler.
#[derive(Debug, Clone)]
pub struct ConditionedSample {
    /// Sequences at A, Bp, Cp, each of length `(mu + 1) k`.
    pub sequences: Vec<BinarySequence>,
    /// Number of `2k`-column windows drawn before one was all-zero.
    pub attempts: u64,
}

/// Sequences at (A, Bp, Cp) of length `(mu + 1) k`, conditioned on the first
/// two blocks being all-zero at all three points. The window is drawn by
/// rejection; the remaining sites are unconditioned.
pub fn simulate_conditional_e(
    tree: &Tree,
    mu: usize,
    k: usize,
    config: &SimulationConfig,
) -> Result<ConditionedSample, SimError> {
    if mu == 0 || k == 0 {
        return Err(SimError::InvalidBlocks { k, mu });
    }
    let m = (mu + 1) * k;
    let cfg = SimulationConfig { m, ..*config };
    let mut sequences = simulate_marked(tree, &TRIPLE_POINTS, &cfg)?;
    let sampler = ProcessSampler::new(tree, &TRIPLE_POINTS, config.alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(config.replicate);
    rng.set_word_pos(CONDITION_WORD_POS);
    let mut state = Vec::new();
    let mut window = vec![0usize; 2 * k];
    let mut attempts = 0u64;
    loop {
        attempts += 1;
        for col in window.iter_mut() {
            *col = sampler.column(&mut rng, &mut state);
        }
        if window.iter().all(|&c| c == 0) {
            break;
        }
    }
    for (i, &col) in window.iter().enumerate() {
        for (j, seq) in sequences.iter_mut().enumerate() {
            seq.set(i, ((col >> (2 - j)) & 1) as u8);
        }
    }
    Ok(ConditionedSample {
        sequences,
        attempts,
    })
}

/// Chance that the first two blocks of length `k` are all-zero at A, Bp and
/// Cp: `q^(2k)` with `q` the all-zero mass of one column.
pub fn event_e_probability(tree: &Tree, k: usize, alpha: f64) -> Result<f64, SimError> {
    Ok(event_probability(tree, &TRIPLE_POINTS, k, alpha)?)
}

/// `q^(2k)` for an arbitrary point list.
pub fn event_probability(
    tree: &Tree,
    points: &[&str],
    k: usize,
    alpha: f64,
) -> Result<f64, PhyloError> {
    let q = site_column_distribution(tree, points, alpha)?.probs[0];
    Ok(q.powi(2 * k as i32))
}

/// Draws whole columns from a precomputed column law by the alias method.
/// Equivalent in law to [`ProcessSampler`] and much cheaper per site.
#[derive(Debug, Clone)]
pub struct ColumnSampler {
    alias: WeightedAliasIndex<f64>,
    points: usize,
}

impl ColumnSampler {
    pub fn new(law: &SiteDistribution) -> Self {
        Self {
            alias: WeightedAliasIndex::new(law.probs.clone())
                .expect("column law has positive finite total mass"),
            points: law.points(),
        }
    }

    pub fn points(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phylo::{build_paper_trees, PaperTreeParams};

    #[test]
    fn flip_probability_cases() {
        assert_eq!(flip_probability(1.0, 0.0).unwrap(), 0.0);
        assert!((flip_probability(1.0, 1e3).unwrap() - 0.5).abs() < 1e-15);
        let q = flip_probability(1.0, 0.5 * std::f64::consts::LN_2).unwrap();
        assert!((q - 0.25).abs() < 1e-15);
        assert!(matches!(
            flip_probability(1.0, -1.0),
            Err(SimError::NegativeTime(_))
        ));
        assert!(flip_probability(0.0, 1.0).is_err());
    }

    #[test]
    fn flip_probability_matches_discretised_chain() {
        // Two-state chain with per-step flip chance alpha * dt.
        let (alpha, t, steps) = (1.0, 0.5 * std::f64::consts::LN_2, 1_000_000);
        let dt = t / steps as f64;
        let mut p_diff = 0.0;
        for _ in 0..steps {
            p_diff = p_diff * (1.0 - alpha * dt) + (1.0 - p_diff) * alpha * dt;
        }
        assert!((p_diff - 0.25).abs() < 1e-6);
    }

    #[test]
    fn deterministic_and_replicate_sensitive() {
        let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        let cfg = SimulationConfig::new(1.0, 10_000, 7);
        let a = simulate_marked(&pair.t1, &["A", "B", "C"], &cfg).unwrap();
        let b = simulate_marked(&pair.t1, &["A", "B", "C"], &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_marked(&pair.t1, &["A", "B", "C"], &cfg.with_replicate(1)).unwrap();
        assert_ne!(a, c);
        assert_eq!(a[0].len(), 10_000);
    }

    #[test]
    fn prefix_stable_across_lengths() {
        let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        let short = simulate_marked(&pair.t1, &["A"], &SimulationConfig::new(1.0, 5000, 3)).unwrap();
        let long = simulate_marked(&pair.t1, &["A"], &SimulationConfig::new(1.0, 9000, 3)).unwrap();
        assert_eq!(short[0], long[0].slice(0, 5000));
    }

    #[test]
    fn conditioned_window_is_zero() {
        let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        for rep in 0..20 {
            let cfg = SimulationConfig::new(1.0, 1, 11).with_replicate(rep);
            let s = simulate_conditional_e(&pair.t2, 5, 2, &cfg).unwrap();
            assert!(s.attempts >= 1);
            for seq in &s.sequences {
                assert_eq!(seq.len(), 12);
                assert!((0..4).all(|i| seq.get(i) == 0));
            }
        }
    }

    #[test]
    fn coincident_points_give_half_per_column() {
        let t = crate::phylo::parse_newick("(A:0.0,B:0.0)root;").unwrap();
        let p = event_probability(&t, &["A", "B", "root"], 2, 1.0).unwrap();
        assert!((p - 0.5f64.powi(4)).abs() < 1e-15);
    }
}

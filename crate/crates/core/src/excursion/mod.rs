//! Regeneration structure of the block-triple chain at (A, Bp, Cp).
//!
//! Blocks `X_n = (x_n^A, x_n^Bp, x_n^Cp)` are i.i.d. for `n >= 2` and forced
//! to all-zero for `n = 0, 1`. The pair chain `M_n = (X_n, X_{n+1})` regenerates
//! whenever it returns to all-zero; the excursion vector of one cycle is its
//! length followed by the restricted transition counts it adds at A, Bp and
//! Cp, in that order (each block in restricted-pair index order).
//!
//! A triple is packed as `(xA << 2k) | (xB << k) | xC`.

mod checks;
mod moments;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::Serialize;
use thiserror::Error;

use crate::kmer::{all_ones, h_pairs, h_size, kmer_string, project_to_h, transition_counts_from_blocks};
use crate::phylo::paper::TRIPLE_POINTS;
use crate::phylo::{site_column_distribution, PhyloError, SiteDistribution, Tree};

pub use checks::{
    clt_projection_check, condition_a_probe, ellipsoid_diagnostics, lag1_correlation,
    lattice_points_in_ball, local_clt_lattice_check, random_unit_directions, tail_hazard_check,
    witness_cycles, ConditionAReport, ConditionARow, EllipsoidReport, LocalCltReport, LocalCltRow,
    ProjectionReport, ProjectionRow, TailHazardReport,
};
pub use moments::{
    block_symmetry, compare_means, estimate_moments, BootstrapConfig, ExcursionTable,
    GaussianModel, MeanComparison, MeanRow, MomentEstimate, SymmetryRow,
};

/// Longest excursion tolerated before the stream reports an error.
pub const MAX_EXCURSION_BLOCKS: u64 = 1_000_000;

/// Largest k for which the block law is tabulated (`2^(3k)` triples).
pub const MAX_STREAM_K: usize = 4;

#[derive(Debug, Error)]
pub enum ExcursionError {
    #[error("k must be between 1 and {MAX_STREAM_K}, got {0}")]
    InvalidK(usize),
    #[error("excursion exceeded {MAX_EXCURSION_BLOCKS} blocks")]
    Truncated,
    #[error("at least 2 samples are needed, got {0}")]
    TooFewSamples(u64),
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("sample has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("block sequence is not a single excursion: {0}")]
    NotACycle(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("output error: {0}")]
    Io(String),
    #[error(transparent)]
    Phylo(#[from] PhyloError),
}

/// `1 + 3 (2^(2k) - 2^k)`.
pub fn dimension(k: usize) -> usize {
    1 + 3 * h_size(k)
}

/// Human-readable coordinate names, e.g. `tau`, `A:0->1`.
pub fn coordinate_labels(k: usize) -> Vec<String> {
    let mut out = vec!["tau".to_string()];
    for v in ["A", "Bp", "Cp"] {
        for (y, z) in h_pairs(k) {
            out.push(format!("{v}:{}->{}", kmer_string(y, k), kmer_string(z, k)));
        }
    }
    out
}

/// Exact law of one block triple, tabulated over all `2^(3k)` values.
#[derive(Debug, Clone, Serialize)]
pub struct TripleBlockLaw {
    pub k: usize,
    pub probs: Vec<f64>,
}

impl TripleBlockLaw {
    /// `column` is the joint law at (A, Bp, Cp) of one site.
    pub fn from_column(column: &SiteDistribution, k: usize) -> Result<Self, ExcursionError> {
        if k == 0 || k > MAX_STREAM_K {
            return Err(ExcursionError::InvalidK(k));
        }
        if column.points() != 3 {
            return Err(ExcursionError::InvalidArgument(format!(
                "column law must cover 3 points, got {}",
                column.points()
            )));
        }
        let mask = all_ones(k);
        let probs = (0..1u32 << (3 * k))
            .map(|t| {
                let (a, b, c) = ((t >> (2 * k)) & mask, (t >> k) & mask, t & mask);
                (0..k)
                    .map(|i| {
                        let bit = |x: u32| ((x >> (k - 1 - i)) & 1) as usize;
                        column.probs[(bit(a) << 2) | (bit(b) << 1) | bit(c)]
                    })
                    .product()
            })
            .collect();
        Ok(Self { k, probs })
    }

    pub fn for_tree(tree: &Tree, k: usize, alpha: f64) -> Result<Self, ExcursionError> {
        let column = site_column_distribution(tree, &TRIPLE_POINTS, alpha)?;
        Self::from_column(&column, k)
    }

    pub fn prob(&self, triple: u32) -> f64 {
        self.probs[triple as usize]
    }

    /// Probability that blocks `2..` of an all-zero-started chain follow
    /// `cycle[2..]`; the first two blocks are fixed by conditioning.
    pub fn cycle_probability(&self, cycle: &[u32]) -> f64 {
        cycle.iter().skip(2).map(|&t| self.prob(t)).product()
    }
}

/// Packs three k-mers into a triple.
pub fn pack_triple(a: u32, b: u32, c: u32, k: usize) -> u32 {
    (a << (2 * k)) | (b << k) | c
}

/// Adds the restricted transitions of one step `cur -> next` to `buf`.
#[inline]
fn accumulate(buf: &mut [u32], cur: u32, next: u32, k: usize, h: usize, ones: u32) {
    for v in 0..3 {
        let shift = (2 - v) * k;
        let y = (cur >> shift) & ones;
        if y != ones {
            let z = (next >> shift) & ones;
            buf[1 + v * h + ((y as usize) << k | z as usize)] += 1;
        }
    }
}

/// Shared sampling state for excursion streams over one tree.
#[derive(Debug, Clone)]
pub struct ExcursionSource {
    k: usize,
    alias: Arc<WeightedAliasIndex<f64>>,
    law: Arc<TripleBlockLaw>,
}

impl ExcursionSource {
    pub fn new(law: TripleBlockLaw) -> Self {
        let alias = WeightedAliasIndex::new(law.probs.clone()).expect("block law has positive mass");
        Self {
            k: law.k,
            alias: Arc::new(alias),
            law: Arc::new(law),
        }
    }

    pub fn for_tree(tree: &Tree, k: usize, alpha: f64) -> Result<Self, ExcursionError> {
        Ok(Self::new(TripleBlockLaw::for_tree(tree, k, alpha)?))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dimension(&self) -> usize {
        dimension(self.k)
    }

    pub fn law(&self) -> &TripleBlockLaw {
        &self.law
    }

    /// Stream `stream_id` under `seed`; distinct ids give independent
    /// streams and the same pair always gives the same excursions.
    pub fn stream(&self, seed: u64, stream_id: u64) -> ExcursionStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        ExcursionStream {
            k: self.k,
            h: h_size(self.k),
            ones: all_ones(self.k),
            alias: Arc::clone(&self.alias),
            rng,
            record: None,
        }
    }
}

/// Lazily generated i.i.d. excursion vectors from one continuous chain.
#[derive(Debug, Clone)]
pub struct ExcursionStream {
    k: usize,
    h: usize,
    ones: u32,
    alias: Arc<WeightedAliasIndex<f64>>,
    rng: ChaCha8Rng,
    record: Option<Vec<u32>>,
}

impl ExcursionStream {
    /// Keeps every block triple drawn, starting with the two conditioned
    /// all-zero blocks. Must be called before the first excursion.
    pub fn with_recording(mut self) -> Self {
        self.record = Some(vec![0, 0]);
        self
    }

    pub fn recorded(&self) -> Option<&[u32]> {
        self.record.as_deref()
    }

    pub fn dimension(&self) -> usize {
        1 + 3 * self.h
    }

    /// Writes the next excursion vector into `buf` (length `d`) and returns
    /// its length.
    pub fn next_into(&mut self, buf: &mut [u32]) -> Result<u32, ExcursionError> {
        if buf.len() != self.dimension() {
            return Err(ExcursionError::Dimension {
                expected: self.dimension(),
                got: buf.len(),
            });
        }
        buf.fill(0);
        let mut cur = 0u32;
        let mut next = 0u32;
        let mut t = 0u64;
        loop {
            accumulate(buf, cur, next, self.k, self.h, self.ones);
            t += 1;
            if t > MAX_EXCURSION_BLOCKS {
                return Err(ExcursionError::Truncated);
            }
            cur = next;
            next = self.alias.sample(&mut self.rng) as u32;
            if let Some(r) = self.record.as_mut() {
                r.push(next);
            }
            if cur == 0 && next == 0 {
                break;
            }
        }
        buf[0] = t as u32;
        Ok(t as u32)
    }
}

impl Iterator for ExcursionStream {
    type Item = Result<Vec<u32>, ExcursionError>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut buf = vec![0; self.dimension()];
        Some(self.next_into(&mut buf).map(|_| buf))
    }
}

/// Excursion vector of an explicit block-triple cycle. The cycle must start
/// with two all-zero triples and first return to a pair of all-zero triples
/// at its last two entries.
pub fn excursion_from_cycle(cycle: &[u32], k: usize) -> Result<Vec<u32>, ExcursionError> {
    let n = cycle.len();
    if n < 3 || cycle[0] != 0 || cycle[1] != 0 {
        return Err(ExcursionError::NotACycle("must start with two all-zero triples".into()));
    }
    let first_return = (1..n - 1)
        .find(|&i| cycle[i] == 0 && cycle[i + 1] == 0)
        .ok_or_else(|| ExcursionError::NotACycle("never returns to all-zero".into()))?;
    if first_return != n - 2 {
        return Err(ExcursionError::NotACycle(format!(
            "returns to all-zero at block {first_return}, before the end"
        )));
    }
    let h = h_size(k);
    let mut buf = vec![0u32; 1 + 3 * h];
    for j in 0..first_return {
        accumulate(&mut buf, cycle[j], cycle[j + 1], k, h, all_ones(k));
    }
    buf[0] = first_return as u32;
    Ok(buf)
}

/// One CSV row per excursion vector, header from [`coordinate_labels`].
pub fn write_excursions_csv<W, I>(w: W, k: usize, rows: I) -> Result<(), ExcursionError>
where
    W: std::io::Write,
    I: IntoIterator<Item = Result<Vec<u32>, ExcursionError>>,
{
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| ExcursionError::Io(e.to_string());
    out.write_record(coordinate_labels(k)).map_err(csv_err)?;
    for row in rows {
        out.serialize(row?).map_err(csv_err)?;
    }
    out.flush().map_err(|e| ExcursionError::Io(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialSumReport {
    pub excursions: u64,
    pub checkpoints: u64,
    pub mismatches: u64,
    pub passed: bool,
}

/// Generates `count` excursions with recording switched on and compares
/// running sums of the excursion vectors with the regeneration times and
/// restricted transition counts recomputed from the raw block record.
pub fn verify_partial_sums(
    source: &ExcursionSource,
    seed: u64,
    stream_id: u64,
    count: u64,
) -> Result<PartialSumReport, ExcursionError> {
    let k = source.k();
    let d = source.dimension();
    let mut stream = source.stream(seed, stream_id).with_recording();
    let mut sums = Vec::with_capacity(count as usize);
    let mut running = vec![0u64; d];
    let mut buf = vec![0u32; d];
    for _ in 0..count {
        stream.next_into(&mut buf)?;
        for (s, &b) in running.iter_mut().zip(&buf) {
            *s += b as u64;
        }
        sums.push(running.clone());
    }
    let record = stream.recorded().expect("recording enabled").to_vec();
    // Regeneration times straight from the definition.
    let mut taus = Vec::with_capacity(count as usize);
    let mut prev = 0usize;
    for n in 1..record.len() - 1 {
        if n > prev && record[n] == 0 && record[n + 1] == 0 {
            taus.push(n);
            prev = n;
        }
    }
    let mask = all_ones(k);
    let mut checkpoints = 0;
    let mut mismatches = 0;
    for l in 1..=count as usize {
        if !(l <= 32 || l.is_power_of_two() || l == count as usize) {
            continue;
        }
        checkpoints += 1;
        let Some(&tau) = taus.get(l - 1) else {
            mismatches += 1;
            continue;
        };
        let mut expected = vec![tau as u64];
        for v in 0..3 {
            let shift = (2 - v) * k;
            let blocks: Vec<u32> = record[..=tau].iter().map(|&t| (t >> shift) & mask).collect();
            let table = transition_counts_from_blocks(&blocks, k);
            expected.extend(project_to_h(&table).to_vec());
        }
        if expected != sums[l - 1] {
            mismatches += 1;
        }
    }
    Ok(PartialSumReport {
        excursions: count,
        checkpoints,
        mismatches,
        passed: mismatches == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phylo::{build_paper_trees, PaperTreeParams};

    fn source(k: usize) -> ExcursionSource {
        let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        ExcursionSource::for_tree(&pair.t1, k, 1.0).unwrap()
    }

    #[test]
    fn dimensions() {
        assert_eq!(dimension(1), 7);
        assert_eq!(dimension(2), 37);
        assert_eq!(dimension(3), 169);
        assert_eq!(dimension(4), 721);
        assert_eq!(coordinate_labels(1)[1], "A:0->0");
        assert_eq!(coordinate_labels(1).len(), 7);
    }

    #[test]
    fn block_law_sums_to_one() {
        for k in 1..=3 {
            let s: f64 = source(k).law().probs.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coordinates_bounded_by_length() {
        let mut st = source(2).stream(5, 0);
        for _ in 0..2000 {
            let y = st.next().unwrap().unwrap();
            assert!(y[0] >= 1);
            assert!(y.iter().all(|&c| c <= y[0]));
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let s = source(1);
        let a: Vec<_> = s.stream(9, 3).take(100).map(Result::unwrap).collect();
        let b: Vec<_> = s.stream(9, 3).take(100).map(Result::unwrap).collect();
        let c: Vec<_> = s.stream(9, 4).take(100).map(Result::unwrap).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn partial_sums_match_record() {
        for k in 1..=2 {
            let r = verify_partial_sums(&source(k), 1, 0, 3000).unwrap();
            assert!(r.passed, "{r:?}");
            assert!(r.checkpoints > 32);
        }
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        write_excursions_csv(&mut buf, 1, source(1).stream(0, 0).take(3)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("tau,A:0->0,A:0->1,Bp:0->0,"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn cycle_extraction() {
        let one = pack_triple(1, 1, 1, 1);
        let y = excursion_from_cycle(&[0, 0, one, 0, 0], 1).unwrap();
        // Steps 0->0, 0->1, 1->0 at each point; only the first two are counted.
        assert_eq!(y, vec![3, 1, 1, 1, 1, 1, 1]);
        assert!(excursion_from_cycle(&[0, 0, 0, 0], 1).is_err());
        assert!(excursion_from_cycle(&[0, 1, 0, 0], 1).is_err());
    }
}

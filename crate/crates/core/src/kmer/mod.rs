//! k-mer combinatorics on binary sequences.
//!
//! A k-mer is identified with its binary value, first character most
//! significant, so `"01"` is index 1 and `"10"` index 2. Count vectors list
//! counts in index order.

mod export;
mod restricted;
mod transitions;
mod verify;

use serde::Serialize;
use thiserror::Error;

use crate::cf_sim::BinarySequence;

pub use export::{write_count_vectors_csv, write_transition_table_csv};
pub use restricted::{
    find_z_collision, h_index, h_pairs, h_size, project_to_h, restore_from_h, assemble_z,
    assemble_zprime, RestrictedTransitions, ZPrimeStatistic, ZStatistic,
};
pub use transitions::{
    check_flow, check_flow_table, constraint_matrix, constraint_rank, reconstruct_counts,
    split_nonoverlapping, theta_pairs, transition_counts, transition_counts_from_blocks,
    FlowCheck, FlowReport, TransitionTable,
};
pub use verify::{
    exhaustive_suites, verify_flow, verify_reconstruction, verify_restore, verify_suite, Suite,
    SuiteReport, MAX_EXHAUSTIVE_BITS,
};

/// Largest supported word size. Transition tables are dense up to
/// [`MAX_DENSE_K`] and sparse above.
pub const MAX_K: usize = 16;
pub const MAX_DENSE_K: usize = 4;

#[derive(Debug, Error)]
pub enum KmerError {
    #[error("k must be between 1 and {MAX_K}, got {0}")]
    InvalidK(usize),
    #[error("length {len} is not a valid block length for k = {k}")]
    BadLength { len: usize, k: usize },
    #[error("sequence of length {len} is shorter than the required {need}")]
    TooShort { len: usize, need: usize },
    #[error("inconsistent transition data: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Read access to the sites of a binary sequence.
pub trait SiteBits {
    fn site_len(&self) -> usize;
    fn site(&self, i: usize) -> u8;
}

impl SiteBits for BinarySequence {
    fn site_len(&self) -> usize {
        self.len()
    }
    #[inline]
    fn site(&self, i: usize) -> u8 {
        self.get(i)
    }
}

impl SiteBits for [u8] {
    fn site_len(&self) -> usize {
        self.len()
    }
    #[inline]
    fn site(&self, i: usize) -> u8 {
        self[i]
    }
}

impl SiteBits for Vec<u8> {
    fn site_len(&self) -> usize {
        self.len()
    }
    #[inline]
    fn site(&self, i: usize) -> u8 {
        self[i]
    }
}

pub(crate) fn check_k(k: usize) -> Result<(), KmerError> {
    if k == 0 || k > MAX_K {
        return Err(KmerError::InvalidK(k));
    }
    Ok(())
}

/// The k-mer with index `idx` as a string of `0`/`1`.
pub fn kmer_string(idx: u32, k: usize) -> String {
    (0..k)
        .map(|i| if (idx >> (k - 1 - i)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// The index of the all-ones k-mer.
pub fn all_ones(k: usize) -> u32 {
    ((1u64 << k) - 1) as u32
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct KmerCountVector {
    pub k: usize,
    pub counts: Vec<u64>,
}

impl KmerCountVector {
    pub fn zeros(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; 1 << k],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, kmer: u32) -> u64 {
        self.counts[kmer as usize]
    }
}

/// Sliding-window counts over all `m - k + 1` windows; all zero when the
/// sequence is shorter than `k`.
pub fn kmer_count_vector<S: SiteBits + ?Sized>(
    seq: &S,
    k: usize,
) -> Result<KmerCountVector, KmerError> {
    check_k(k)?;
    let mut out = KmerCountVector::zeros(k);
    let m = seq.site_len();
    if m < k {
        return Ok(out);
    }
    let mask = all_ones(k);
    let mut w = 0u32;
    for i in 0..m {
        w = ((w << 1) | seq.site(i) as u32) & mask;
        if i + 1 >= k {
            out.counts[w as usize] += 1;
        }
    }
    Ok(out)
}

/// Count vector together with the last `2k` sites, verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct HatF {
    pub counts: KmerCountVector,
    pub last: Vec<u8>,
    /// Length of the sequence the pair was taken from.
    pub len: usize,
}

pub fn hat_f<S: SiteBits + ?Sized>(seq: &S, k: usize) -> Result<HatF, KmerError> {
    check_k(k)?;
    let m = seq.site_len();
    if m < 2 * k {
        return Err(KmerError::TooShort { len: m, need: 2 * k });
    }
    Ok(HatF {
        counts: kmer_count_vector(seq, k)?,
        last: (m - 2 * k..m).map(|i| seq.site(i)).collect(),
        len: m,
    })
}

/// Count vector of the first `prefix` sites, computed from [`HatF`] alone.
/// Requires `len - prefix < k`, so that every dropped window lies inside the
/// retained last `2k` sites.
pub fn truncated_counts(hat: &HatF, prefix: usize) -> Result<KmerCountVector, KmerError> {
    let k = hat.counts.k;
    let m = hat.len;
    if prefix > m || m - prefix >= k {
        return Err(KmerError::Inconsistent(format!(
            "prefix {prefix} must lie within k = {k} sites of the length {m}"
        )));
    }
    if prefix < k {
        return Ok(KmerCountVector::zeros(k));
    }
    let mut out = hat.counts.clone();
    // Windows starting at 0-based positions prefix-k+1 ..= m-k are dropped.
    let base = m - 2 * k;
    let mask = all_ones(k);
    for start in (prefix + 1 - k)..=(m - k) {
        let off = start - base;
        let w = hat.last[off..off + k]
            .iter()
            .fold(0u32, |acc, &b| ((acc << 1) | b as u32) & mask);
        out.counts[w as usize] -= 1;
    }
    Ok(out)
}

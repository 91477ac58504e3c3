use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::transitions::{reconstruct_counts, split_nonoverlapping, transition_counts_from_blocks};
use super::{all_ones, HatF, KmerError, SiteBits, TransitionTable};
use crate::cf_sim::BinarySequence;

/// Number of pairs `(y, z)` whose source `y` is not the all-ones k-mer.
pub fn h_size(k: usize) -> usize {
    (1usize << (2 * k)) - (1usize << k)
}

/// Position of `(y, z)` among the restricted pairs, `y * 2^k + z`.
/// Only meaningful when `y` is not all ones.
#[inline]
pub fn h_index(y: u32, z: u32, k: usize) -> usize {
    ((y as usize) << k) | z as usize
}

/// Restricted pairs in index order.
pub fn h_pairs(k: usize) -> impl Iterator<Item = (u32, u32)> {
    let ones = all_ones(k);
    (0..ones).flat_map(move |y| (0..=ones).map(move |z| (y, z)))
}

/// Transition counts on the restricted pairs; zero entries are not stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RestrictedTransitions {
    pub k: usize,
    entries: BTreeMap<(u32, u32), u64>,
}

impl RestrictedTransitions {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            entries: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        h_size(self.k)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, y: u32, z: u32) -> u64 {
        self.entries.get(&(y, z)).copied().unwrap_or(0)
    }

    pub fn set(&mut self, y: u32, z: u32, value: u64) -> Result<(), KmerError> {
        if y == all_ones(self.k) {
            return Err(KmerError::Inconsistent(format!(
                "source {y} is the all-ones k-mer, which is not a restricted pair"
            )));
        }
        if value == 0 {
            self.entries.remove(&(y, z));
        } else {
            self.entries.insert((y, z), value);
        }
        Ok(())
    }

    /// All `2^(2k) - 2^k` values in index order.
    pub fn to_vec(&self) -> Vec<u64> {
        h_pairs(self.k).map(|(y, z)| self.get(y, z)).collect()
    }
}

/// Drops every row whose source is the all-ones k-mer.
pub fn project_to_h(table: &TransitionTable) -> RestrictedTransitions {
    let ones = all_ones(table.k());
    let mut out = RestrictedTransitions::new(table.k());
    for ((y, z), c) in table.nonzero() {
        if y != ones {
            out.entries.insert((y, z), c);
        }
    }
    out
}

/// Recovers the full table from the restricted counts, the first and last
/// blocks and `mu`, using the balance equations for the all-ones row and the
/// total count for the all-ones diagonal entry.
pub fn restore_from_h(
    nh: &RestrictedTransitions,
    x0: u32,
    x_mu: u32,
    mu: usize,
) -> Result<TransitionTable, KmerError> {
    let k = nh.k;
    let ones = all_ones(k);
    let mut table = TransitionTable::new(k, mu);
    for (&(y, z), &c) in &nh.entries {
        table.set(y, z, c);
    }
    for z in 0..ones {
        let out_flow: i64 = (0..=ones).filter(|&y| y != z).map(|y| nh.get(z, y) as i64).sum();
        let in_flow: i64 = (0..ones).filter(|&y| y != z).map(|y| nh.get(y, z) as i64).sum();
        let v = (x_mu == z) as i64 - (x0 == z) as i64 + out_flow - in_flow;
        if v < 0 {
            return Err(KmerError::Inconsistent(format!(
                "balance equation at z = {z} forces N[{ones}][{z}] = {v}"
            )));
        }
        table.set(ones, z, v as u64);
    }
    let rest = table.total();
    if rest > mu as u64 {
        return Err(KmerError::Inconsistent(format!(
            "total count equation forces N[{ones}][{ones}] = {}",
            mu as i64 - rest as i64
        )));
    }
    table.set(ones, ones, mu as u64 - rest);
    Ok(table)
}

/// First pair of blocks, last pair of blocks and the full transition table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ZStatistic {
    pub first: (u32, u32),
    pub last: (u32, u32),
    pub table: TransitionTable,
}

/// Same as [`ZStatistic`] with only the restricted transition counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ZPrimeStatistic {
    pub first: (u32, u32),
    pub last: (u32, u32),
    pub mu: usize,
    pub restricted: RestrictedTransitions,
}

fn blocks_for_z<S: SiteBits + ?Sized>(seq: &S, k: usize) -> Result<Vec<u32>, KmerError> {
    let blocks = split_nonoverlapping(seq, k)?;
    if blocks.len() < 2 {
        return Err(KmerError::BadLength {
            len: seq.site_len(),
            k,
        });
    }
    Ok(blocks)
}

pub fn assemble_z<S: SiteBits + ?Sized>(seq: &S, k: usize) -> Result<ZStatistic, KmerError> {
    let b = blocks_for_z(seq, k)?;
    let mu = b.len() - 1;
    Ok(ZStatistic {
        first: (b[0], b[1]),
        last: (b[mu - 1], b[mu]),
        table: transition_counts_from_blocks(&b, k),
    })
}

pub fn assemble_zprime<S: SiteBits + ?Sized>(seq: &S, k: usize) -> Result<ZPrimeStatistic, KmerError> {
    Ok(assemble_z(seq, k)?.project())
}

impl ZStatistic {
    pub fn k(&self) -> usize {
        self.table.k()
    }

    pub fn project(&self) -> ZPrimeStatistic {
        ZPrimeStatistic {
            first: self.first,
            last: self.last,
            mu: self.table.mu(),
            restricted: project_to_h(&self.table),
        }
    }

    /// Count vector and last `2k` sites of the underlying sequence.
    pub fn hat_f(&self) -> HatF {
        let k = self.k();
        let mut last = Vec::with_capacity(2 * k);
        for block in [self.last.0, self.last.1] {
            last.extend((0..k).map(|i| ((block >> (k - 1 - i)) & 1) as u8));
        }
        HatF {
            counts: reconstruct_counts(self.last.1, &self.table),
            last,
            len: (self.table.mu() + 1) * k,
        }
    }
}

impl ZPrimeStatistic {
    pub fn to_z(&self) -> Result<ZStatistic, KmerError> {
        Ok(ZStatistic {
            first: self.first,
            last: self.last,
            table: restore_from_h(&self.restricted, self.first.0, self.last.1, self.mu)?,
        })
    }
}

/// Exhaustive search for two distinct sequences of length `(mu+1)k` with the
/// same Z statistic. Returns the first pair in enumeration order.
pub fn find_z_collision(k: usize, mu: usize) -> Result<Option<(BinarySequence, BinarySequence)>, KmerError> {
    let len = (mu + 1) * k;
    if mu == 0 || len > 24 {
        return Err(KmerError::BadLength { len, k });
    }
    let mut seen: HashMap<ZStatistic, u64> = HashMap::new();
    for v in 0..(1u64 << len) {
        let s = BinarySequence::from_int(v, len);
        let z = assemble_z(&s, k)?;
        if let Some(&prev) = seen.get(&z) {
            return Ok(Some((BinarySequence::from_int(prev, len), s)));
        }
        seen.insert(z, v);
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmer::transition_counts;

    fn seq(s: &str) -> BinarySequence {
        s.parse().unwrap()
    }

    #[test]
    fn h_for_k1() {
        assert_eq!(h_pairs(1).collect::<Vec<_>>(), vec![(0, 0), (0, 1)]);
        for k in 1..=4 {
            assert_eq!(h_pairs(k).count(), h_size(k));
        }
    }

    #[test]
    fn restore_example() {
        let s = seq("0110");
        let t = transition_counts(&s, 1).unwrap();
        let back = restore_from_h(&project_to_h(&t), 0, 0, 3).unwrap();
        assert_eq!((back.get(1, 0), back.get(1, 1)), (1, 1));
        assert_eq!(back, t);
    }

    #[test]
    fn restore_all_ones() {
        let back = restore_from_h(&RestrictedTransitions::new(2), 3, 3, 2).unwrap();
        assert_eq!(back.nonzero(), vec![((3, 3), 2)]);
    }

    #[test]
    fn restore_rejects_inconsistent() {
        let mut nh = RestrictedTransitions::new(1);
        nh.set(0, 0, 5).unwrap();
        assert!(matches!(
            restore_from_h(&nh, 0, 0, 3),
            Err(KmerError::Inconsistent(_))
        ));
        let mut nh = RestrictedTransitions::new(1);
        assert!(restore_from_h(&nh, 0, 1, 1).is_err());
        assert!(nh.set(1, 0, 1).is_err());
    }

    #[test]
    fn zprime_example() {
        let z = assemble_zprime(&seq("0011"), 1).unwrap();
        assert_eq!((z.first, z.last), ((0, 0), (1, 1)));
        assert_eq!(z.restricted.to_vec(), vec![1, 1]);
        assert_eq!(z.to_z().unwrap(), assemble_z(&seq("0011"), 1).unwrap());
    }

    #[test]
    fn z_collisions() {
        assert!(find_z_collision(1, 3).unwrap().is_none());
        assert!(find_z_collision(1, 4).unwrap().is_none());
        let (a, b) = find_z_collision(1, 5).unwrap().unwrap();
        assert_ne!(a, b);
        assert_eq!(assemble_z(&a, 1).unwrap(), assemble_z(&b, 1).unwrap());
    }
}

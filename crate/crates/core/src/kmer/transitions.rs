use std::collections::BTreeMap;

use num_rational::Rational64;
use num_traits::Zero;
use serde::Serialize;

use super::{check_k, KmerCountVector, KmerError, SiteBits, MAX_DENSE_K};

/// Splits a length-`(mu+1)k` sequence into its `mu + 1` disjoint blocks.
pub fn split_nonoverlapping<S: SiteBits + ?Sized>(seq: &S, k: usize) -> Result<Vec<u32>, KmerError> {
    check_k(k)?;
    let m = seq.site_len();
    if m == 0 || m % k != 0 {
        return Err(KmerError::BadLength { len: m, k });
    }
    Ok((0..m / k)
        .map(|b| (0..k).fold(0u32, |acc, i| (acc << 1) | seq.site(b * k + i) as u32))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
enum Storage {
    Dense(Vec<u64>),
    Sparse(BTreeMap<(u32, u32), u64>),
}

/// Counts `N[y][z]` of adjacent block pairs, plus the number of transitions
/// `mu` the table was built from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TransitionTable {
    k: usize,
    mu: usize,
    storage: Storage,
}

impl TransitionTable {
    pub fn new(k: usize, mu: usize) -> Self {
        let storage = if k <= MAX_DENSE_K {
            Storage::Dense(vec![0; 1 << (2 * k)])
        } else {
            Storage::Sparse(BTreeMap::new())
        };
        Self { k, mu, storage }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn set_mu(&mut self, mu: usize) {
        self.mu = mu;
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    #[inline]
    pub fn get(&self, y: u32, z: u32) -> u64 {
        match &self.storage {
            Storage::Dense(v) => v[((y as usize) << self.k) | z as usize],
            Storage::Sparse(m) => m.get(&(y, z)).copied().unwrap_or(0),
        }
    }

    pub fn set(&mut self, y: u32, z: u32, value: u64) {
        let k = self.k;
        match &mut self.storage {
            Storage::Dense(v) => v[((y as usize) << k) | z as usize] = value,
            Storage::Sparse(m) => {
                if value == 0 {
                    m.remove(&(y, z));
                } else {
                    m.insert((y, z), value);
                }
            }
        }
    }

    #[inline]
    pub fn add(&mut self, y: u32, z: u32, delta: u64) {
        let k = self.k;
        match &mut self.storage {
            Storage::Dense(v) => v[((y as usize) << k) | z as usize] += delta,
            Storage::Sparse(m) => *m.entry((y, z)).or_insert(0) += delta,
        }
    }

    pub fn total(&self) -> u64 {
        match &self.storage {
            Storage::Dense(v) => v.iter().sum(),
            Storage::Sparse(m) => m.values().sum(),
        }
    }

    /// Non-zero entries in `(y, z)` order.
    pub fn nonzero(&self) -> Vec<((u32, u32), u64)> {
        match &self.storage {
            Storage::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (((i >> self.k) as u32, (i & ((1 << self.k) - 1)) as u32), c))
                .collect(),
            Storage::Sparse(m) => m.iter().map(|(&p, &c)| (p, c)).collect(),
        }
    }

    /// Row sum `sum_z N[y][z]`.
    pub fn row_sum(&self, y: u32) -> u64 {
        (0..1u32 << self.k).map(|z| self.get(y, z)).sum()
    }

    pub fn col_sum(&self, z: u32) -> u64 {
        (0..1u32 << self.k).map(|y| self.get(y, z)).sum()
    }
}

pub fn transition_counts_from_blocks(blocks: &[u32], k: usize) -> TransitionTable {
    let mu = blocks.len().saturating_sub(1);
    let mut t = TransitionTable::new(k, mu);
    for w in blocks.windows(2) {
        t.add(w[0], w[1], 1);
    }
    t
}

pub fn transition_counts<S: SiteBits + ?Sized>(seq: &S, k: usize) -> Result<TransitionTable, KmerError> {
    Ok(transition_counts_from_blocks(&split_nonoverlapping(seq, k)?, k))
}

/// The pairs `(y, z)` whose transitions contribute an occurrence of `w`
/// starting `a` sites into `y` (`1 <= a < k`): `y` ends with the first
/// `k - a` characters of `w` and `z` starts with the remaining `a`.
pub fn theta_pairs(a: usize, w: u32, k: usize) -> impl Iterator<Item = (u32, u32)> {
    debug_assert!(a >= 1 && a < k);
    let low = k - a;
    let low_mask = (1u32 << low) - 1;
    let a_mask = (1u32 << a) - 1;
    (0..1u32 << k).map(move |theta| {
        let head = theta >> low;
        let tail = theta & low_mask;
        let y = (head << low) | (w >> a);
        let z = ((w & a_mask) << low) | tail;
        (y, z)
    })
}

/// Rebuilds the sliding-window counts of a `(mu+1)k`-site sequence from its
/// last block and its transition table.
pub fn reconstruct_counts(x_mu: u32, table: &TransitionTable) -> KmerCountVector {
    let k = table.k();
    let mut out = KmerCountVector::zeros(k);
    for w in 0..1u32 << k {
        let mut f = (x_mu == w) as u64 + table.row_sum(w);
        for a in 1..k {
            f += theta_pairs(a, w, k).map(|(y, z)| table.get(y, z)).sum::<u64>();
        }
        out.counts[w as usize] = f;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowCheck {
    pub z: u32,
    pub lhs: u64,
    pub rhs: u64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowReport {
    /// One balance equation per k-mer `z`: inflow plus a start at `z` equals
    /// outflow plus an end at `z`.
    pub equations: Vec<FlowCheck>,
    pub total: u64,
    pub mu: usize,
    pub sum_passed: bool,
}

impl FlowReport {
    pub fn passed(&self) -> bool {
        self.sum_passed && self.equations.iter().all(|e| e.passed)
    }

    pub fn failed_equations(&self) -> usize {
        self.equations.iter().filter(|e| !e.passed).count()
    }
}

pub fn check_flow_table(x0: u32, x_mu: u32, table: &TransitionTable) -> FlowReport {
    let k = table.k();
    let equations = (0..1u32 << k)
        .map(|z| {
            let diag = table.get(z, z);
            let lhs = (x0 == z) as u64 + table.col_sum(z) - diag;
            let rhs = (x_mu == z) as u64 + table.row_sum(z) - diag;
            FlowCheck {
                z,
                lhs,
                rhs,
                passed: lhs == rhs,
            }
        })
        .collect();
    let total = table.total();
    FlowReport {
        equations,
        total,
        mu: table.mu(),
        sum_passed: total == table.mu() as u64,
    }
}

pub fn check_flow<S: SiteBits + ?Sized>(seq: &S, k: usize) -> Result<FlowReport, KmerError> {
    let blocks = split_nonoverlapping(seq, k)?;
    let table = transition_counts_from_blocks(&blocks, k);
    Ok(check_flow_table(blocks[0], *blocks.last().unwrap(), &table))
}

/// Coefficients of the balance equations (one row per `z`, as left side
/// minus right side) and of the total-count equation, over the unknowns
/// `N[y][z]` in index order `y * 2^k + z`.
pub fn constraint_matrix(k: usize) -> Vec<Vec<i64>> {
    let n = 1usize << k;
    let mut rows = Vec::with_capacity(n + 1);
    for target in 0..n {
        let mut row = vec![0i64; n * n];
        for y in 0..n {
            for z in 0..n {
                if y == z {
                    continue;
                }
                if z == target {
                    row[y * n + z] += 1;
                }
                if y == target {
                    row[y * n + z] -= 1;
                }
            }
        }
        rows.push(row);
    }
    rows.push(vec![1; n * n]);
    rows
}

/// Rank over the rationals by Gaussian elimination.
pub fn constraint_rank(matrix: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<Rational64>> = matrix
        .iter()
        .map(|r| r.iter().map(|&x| Rational64::from_integer(x)).collect())
        .collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&r| !m[r][c].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank][c];
        for r in 0..m.len() {
            if r != rank && !m[r][c].is_zero() {
                let factor = m[r][c] / pivot;
                for j in c..cols {
                    let delta = factor * m[rank][j];
                    m[r][j] -= delta;
                }
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf_sim::BinarySequence;

    fn seq(s: &str) -> BinarySequence {
        s.parse().unwrap()
    }

    #[test]
    fn splits_blocks() {
        assert_eq!(split_nonoverlapping(&seq("0011"), 2).unwrap(), [0b00, 0b11]);
        assert_eq!(split_nonoverlapping(&seq("010101"), 3).unwrap(), [0b010, 0b101]);
        assert!(split_nonoverlapping(&seq("01010"), 2).is_err());
    }

    #[test]
    fn transition_examples() {
        let t = transition_counts(&seq("0011"), 2).unwrap();
        assert_eq!(t.nonzero(), vec![((0, 3), 1)]);
        assert_eq!(t.mu(), 1);
        let t = transition_counts(&seq("0110"), 1).unwrap();
        assert_eq!((t.get(0, 1), t.get(1, 1), t.get(1, 0), t.get(0, 0)), (1, 1, 1, 0));
        assert_eq!(t.total(), 3);
    }

    #[test]
    fn reconstruct_example() {
        let t = transition_counts(&seq("0011"), 2).unwrap();
        assert_eq!(reconstruct_counts(0b11, &t).counts, [1, 1, 0, 1]);
    }

    #[test]
    fn flow_example() {
        let r = check_flow(&seq("0011"), 2).unwrap();
        assert_eq!((r.equations[0].lhs, r.equations[0].rhs), (1, 1));
        assert!(r.passed());
    }

    #[test]
    fn mutations_break_flow() {
        let s = seq("011010");
        let blocks = split_nonoverlapping(&s, 1).unwrap();
        let mut t = transition_counts(&s, 1).unwrap();
        t.add(0, 0, 1);
        let r = check_flow_table(blocks[0], blocks[5], &t);
        assert_eq!((r.failed_equations(), r.sum_passed), (0, false));
        let mut t = transition_counts(&s, 1).unwrap();
        t.add(0, 1, 1);
        let r = check_flow_table(blocks[0], blocks[5], &t);
        assert_eq!((r.failed_equations(), r.sum_passed), (2, false));
    }

    #[test]
    fn constraint_rank_is_two_to_the_k() {
        for k in 1..=3 {
            assert_eq!(constraint_rank(&constraint_matrix(k)), 1 << k);
        }
    }

    #[test]
    fn sparse_tables_match_dense() {
        let s: BinarySequence = "01101001110100101100".repeat(3).parse().unwrap();
        let t5 = transition_counts(&s, 5).unwrap();
        assert!(!t5.is_dense());
        assert_eq!(reconstruct_counts(*split_nonoverlapping(&s, 5).unwrap().last().unwrap(), &t5),
                   super::super::kmer_count_vector(&s, 5).unwrap());
        assert!(check_flow(&s, 5).unwrap().passed());
    }
}

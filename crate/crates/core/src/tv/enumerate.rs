//! Exhaustive enumeration of joint sequences at a set of points.
//!
//! Sites are i.i.d., so the probability of a joint assignment is the
//! product of the column law over its columns. The enumeration walks
//! sites depth first and carries the prefix product down, so each partial
//! product is formed once.
//!
//! Outcome layout (all integers little-endian): one tag byte
//! ([`Statistic::tag`]), then for every point in query order
//!
//! ```text
//! raw               u32 sequence word, site 0 most significant
//! counts            2^k x u16 window counts in k-mer index order
//! counts-with-last  2^k x u16 counts, u32 last 2k sites
//! z                 4 x u16 blocks x0 x1 x(mu-1) x(mu), 2^(2k) x u16 table
//! z-prime           4 x u16 blocks, u16 mu, (2^(2k) - 2^k) x u16 restricted counts
//! ```

use std::collections::HashMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{tv, FiniteDistribution, Statistic, TVReport, TvError, TvExact};
use crate::kmer::{all_ones, MAX_DENSE_K};
use crate::numeric::Scalar;
use crate::phylo::{site_column_law, Tree};

/// Default limit on `points * m`.
pub const DEFAULT_CAP_BITS: usize = 24;

const MAX_COUNT_K: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatQuery {
    pub statistic: Statistic,
    pub m: usize,
    pub k: usize,
    /// Restrict to the first `2k` sites being zero at every point and
    /// renormalize.
    pub conditioned: bool,
}

impl StatQuery {
    pub fn new(statistic: Statistic, m: usize, k: usize) -> Self {
        Self {
            statistic,
            m,
            k,
            conditioned: false,
        }
    }

    pub fn conditioned(mut self) -> Self {
        self.conditioned = true;
        self
    }

    pub fn validate(&self, points: usize, cap: usize) -> Result<(), TvError> {
        let (m, k) = (self.m, self.k);
        let bad = |msg: String| Err(TvError::InvalidQuery(msg));
        if points == 0 {
            return bad("no points".into());
        }
        if k == 0 || m == 0 || m > 32 {
            return bad(format!("need k >= 1 and 1 <= m <= 32, got k = {k}, m = {m}"));
        }
        if points * m > cap {
            return Err(TvError::CapExceeded {
                bits: points * m,
                cap,
            });
        }
        match self.statistic {
            Statistic::Raw => {}
            Statistic::Counts if k > MAX_COUNT_K => return bad(format!("k = {k} above {MAX_COUNT_K}")),
            Statistic::Counts => {}
            Statistic::CountsWithLast => {
                if k > MAX_COUNT_K || m < 2 * k {
                    return bad(format!("counts with last sites need 2k <= m and k <= {MAX_COUNT_K}"));
                }
            }
            Statistic::Z | Statistic::ZPrime => {
                if k > MAX_DENSE_K || m % k != 0 || m / k < 2 {
                    return bad(format!(
                        "block statistics need m a multiple of k with at least 2 blocks and k <= {MAX_DENSE_K}, got m = {m}, k = {k}"
                    ));
                }
            }
        }
        if self.conditioned && m < 2 * k {
            return bad(format!("conditioning needs m >= 2k, got m = {m}, k = {k}"));
        }
        Ok(())
    }
}

fn put_u16(out: &mut Vec<u8>, v: u32) {
    debug_assert!(v <= u16::MAX as u32);
    out.extend_from_slice(&(v as u16).to_le_bytes());
}

/// Appends the encoding of `statistic` over the sequence words to `out`.
/// Each word holds the `m` sites of one point, site 0 most significant.
pub fn encode_outcome(statistic: Statistic, words: &[u32], m: usize, k: usize, out: &mut Vec<u8>) {
    out.push(statistic.tag());
    let mask = all_ones(k);
    for &w in words {
        match statistic {
            Statistic::Raw => out.extend_from_slice(&w.to_le_bytes()),
            Statistic::Counts | Statistic::CountsWithLast => {
                let mut counts = [0u32; 1 << MAX_COUNT_K];
                if m >= k {
                    for i in 0..=m - k {
                        counts[((w >> (m - k - i)) & mask) as usize] += 1;
                    }
                }
                for &c in &counts[..1 << k] {
                    put_u16(out, c);
                }
                if statistic == Statistic::CountsWithLast {
                    let last = w & (((1u64 << (2 * k)) - 1) as u32);
                    out.extend_from_slice(&last.to_le_bytes());
                }
            }
            Statistic::Z | Statistic::ZPrime => {
                let nb = m / k;
                let block = |j: usize| (w >> (m - (j + 1) * k)) & mask;
                let mut table = [0u32; 1 << (2 * MAX_DENSE_K)];
                for j in 0..nb - 1 {
                    table[((block(j) << k) | block(j + 1)) as usize] += 1;
                }
                for b in [block(0), block(1), block(nb - 2), block(nb - 1)] {
                    put_u16(out, b);
                }
                if statistic == Statistic::Z {
                    for &c in &table[..1 << (2 * k)] {
                        put_u16(out, c);
                    }
                } else {
                    put_u16(out, (nb - 1) as u32);
                    // The all-ones source row is the last row.
                    for &c in &table[..(1 << (2 * k)) - (1 << k)] {
                        put_u16(out, c);
                    }
                }
            }
        }
    }
}

/// Probability weight accumulated during enumeration.
trait Accum: Clone + Send + Sync {
    fn is_zero(&self) -> bool;
    fn times(&self, other: &Self) -> Self;
    fn plus(&mut self, other: &Self);
}

impl Accum for f64 {
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn plus(&mut self, other: &Self) {
        *self += other;
    }
}

/// Numerators over a common power-of-two denominator.
impl Accum for BigUint {
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn plus(&mut self, other: &Self) {
        *self += other;
    }
}

struct Walk<'a, A> {
    col: &'a [A],
    p: usize,
    query: StatQuery,
    forced: usize,
    out: HashMap<Vec<u8>, A>,
    buf: Vec<u8>,
}

impl<A: Accum> Walk<'_, A> {
    fn dfs(&mut self, site: usize, words: &mut [u32], prefix: &A) {
        let q = self.query;
        if site == q.m {
            self.buf.clear();
            encode_outcome(q.statistic, words, q.m, q.k, &mut self.buf);
            match self.out.get_mut(self.buf.as_slice()) {
                Some(v) => v.plus(prefix),
                None => {
                    self.out.insert(self.buf.clone(), prefix.clone());
                }
            }
            return;
        }
        let patterns = if site < self.forced { 1 } else { 1usize << self.p };
        for c in 0..patterns {
            if self.col[c].is_zero() {
                continue;
            }
            push_column(words, c, self.p);
            let next = prefix.times(&self.col[c]);
            self.dfs(site + 1, words, &next);
            for w in words.iter_mut() {
                *w >>= 1;
            }
        }
    }
}

fn push_column(words: &mut [u32], c: usize, p: usize) {
    for (j, w) in words.iter_mut().enumerate() {
        *w = (*w << 1) | ((c >> (p - 1 - j)) & 1) as u32;
    }
}

/// Enumerates every joint assignment and returns the summed weights per
/// outcome in outcome order. Work is split over the first two sites.
fn enumerate<A: Accum>(col: &[A], p: usize, query: StatQuery, one: A) -> Vec<(Vec<u8>, A)> {
    let forced = if query.conditioned { 2 * query.k } else { 0 };
    let split = query.m.min(2);
    let width = |site: usize| if site < forced { 1 } else { 1usize << p };
    let mut prefixes: Vec<Vec<usize>> = vec![vec![]];
    for site in 0..split {
        prefixes = prefixes
            .into_iter()
            .flat_map(|pre| {
                (0..width(site)).map(move |c| {
                    let mut v = pre.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    let parts: Vec<HashMap<Vec<u8>, A>> = prefixes
        .par_iter()
        .map(|pre| {
            let mut walk = Walk {
                col,
                p,
                query,
                forced,
                out: HashMap::new(),
                buf: Vec::new(),
            };
            let mut words = vec![0u32; p];
            let mut weight = one.clone();
            for &c in pre {
                if col[c].is_zero() {
                    return walk.out;
                }
                push_column(&mut words, c, p);
                weight = weight.times(&col[c]);
            }
            walk.dfs(split, &mut words, &weight);
            walk.out
        })
        .collect();
    let mut merged: std::collections::BTreeMap<Vec<u8>, A> = std::collections::BTreeMap::new();
    for part in parts {
        let mut entries: Vec<_> = part.into_iter().collect();
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        for (k, v) in entries {
            match merged.get_mut(&k) {
                Some(x) => x.plus(&v),
                None => {
                    merged.insert(k, v);
                }
            }
        }
    }
    merged.into_iter().collect()
}

/// Scalars with an exact enumeration routine.
pub trait EnumerationBackend: Scalar + TvExact + Sized {
    fn enumerate_law(
        tree: &Tree,
        points: &[&str],
        query: StatQuery,
        alpha: f64,
    ) -> Result<FiniteDistribution<Self>, TvError>;
}

impl EnumerationBackend for f64 {
    fn enumerate_law(
        tree: &Tree,
        points: &[&str],
        query: StatQuery,
        alpha: f64,
    ) -> Result<FiniteDistribution<Self>, TvError> {
        let col = site_column_law::<f64>(tree, points, alpha)?;
        let entries = enumerate(&col, points.len(), query, 1.0);
        let norm = if query.conditioned {
            let total: f64 = entries.iter().map(|(_, v)| v).sum();
            if total == 0.0 {
                return Err(TvError::NullEvent);
            }
            total
        } else {
            1.0
        };
        Ok(FiniteDistribution {
            outcomes: entries.into_iter().map(|(k, v)| (k, v / norm)).collect(),
        })
    }
}

impl EnumerationBackend for BigRational {
    fn enumerate_law(
        tree: &Tree,
        points: &[&str],
        query: StatQuery,
        alpha: f64,
    ) -> Result<FiniteDistribution<Self>, TvError> {
        let col = site_column_law::<BigRational>(tree, points, alpha)?;
        // Every column probability is dyadic; put them over one 2^shift.
        let shift = col
            .iter()
            .map(|q| {
                let den = q.denom();
                debug_assert!(den.bits() > 0 && (den - 1u32) & den == num_bigint::BigInt::zero());
                den.bits() - 1
            })
            .max()
            .unwrap_or(0);
        let ints: Vec<BigUint> = col
            .iter()
            .map(|q| {
                let scaled = q * BigRational::from_integer(num_bigint::BigInt::one() << shift);
                debug_assert!(scaled.is_integer());
                scaled.to_integer().to_biguint().expect("non-negative probability")
            })
            .collect();
        let entries = enumerate(&ints, points.len(), query, BigUint::one());
        let den: BigUint = if query.conditioned {
            let total = entries.iter().fold(<BigUint as Zero>::zero(), |acc, (_, v)| acc + v);
            if Zero::is_zero(&total) {
                return Err(TvError::NullEvent);
            }
            total
        } else {
            BigUint::one() << (shift * query.m as u64)
        };
        let den = num_bigint::BigInt::from(den);
        Ok(FiniteDistribution {
            outcomes: entries
                .into_iter()
                .map(|(k, v)| (k, BigRational::new(v.into(), den.clone())))
                .collect(),
        })
    }
}

/// Exact law of `query.statistic` over the joint sequences at `points`.
pub fn exact_joint_distribution<T: EnumerationBackend>(
    tree: &Tree,
    points: &[&str],
    query: StatQuery,
    alpha: f64,
    cap: usize,
) -> Result<FiniteDistribution<T>, TvError> {
    query.validate(points.len(), cap)?;
    T::enumerate_law(tree, points, query, alpha)
}

/// Exact distance between the laws of one statistic under two trees.
pub fn exact_tv(
    t1: &Tree,
    t2: &Tree,
    points: &[&str],
    query: StatQuery,
    alpha: f64,
    backend: super::Backend,
    cap: usize,
) -> Result<TVReport, TvError> {
    Ok(match backend {
        super::Backend::Float => tv(
            &exact_joint_distribution::<f64>(t1, points, query, alpha, cap)?,
            &exact_joint_distribution::<f64>(t2, points, query, alpha, cap)?,
        ),
        super::Backend::Rational => tv(
            &exact_joint_distribution::<BigRational>(t1, points, query, alpha, cap)?,
            &exact_joint_distribution::<BigRational>(t2, points, query, alpha, cap)?,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf_sim::BinarySequence;
    use crate::kmer::{assemble_z, assemble_zprime, hat_f, kmer_count_vector};
    use crate::phylo::paper::{LEAF_A, TRIPLE_POINTS};
    use crate::phylo::{build_paper_trees, PaperTreeParams};

    fn word(s: &BinarySequence) -> u32 {
        (0..s.len()).fold(0, |acc, i| (acc << 1) | s.get(i) as u32)
    }

    fn u16s(b: &[u8]) -> Vec<u32> {
        b.chunks(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as u32).collect()
    }

    #[test]
    fn encodings_agree_with_kmer_module() {
        let (m, k) = (6, 2);
        for v in 0..(1u64 << m) {
            let s = BinarySequence::from_int(v, m);
            let w = [word(&s)];
            let mut out = Vec::new();
            encode_outcome(Statistic::Counts, &w, m, k, &mut out);
            let want: Vec<u32> = kmer_count_vector(&s, k).unwrap().counts.iter().map(|&c| c as u32).collect();
            assert_eq!(u16s(&out[1..]), want);

            out.clear();
            encode_outcome(Statistic::CountsWithLast, &w, m, k, &mut out);
            let h = hat_f(&s, k).unwrap();
            let last = u32::from_le_bytes(out[out.len() - 4..].try_into().unwrap());
            let want_last = h.last.iter().fold(0u32, |a, &b| (a << 1) | b as u32);
            assert_eq!(last, want_last);

            out.clear();
            encode_outcome(Statistic::Z, &w, m, k, &mut out);
            let z = assemble_z(&s, k).unwrap();
            let f = u16s(&out[1..]);
            assert_eq!((f[0], f[1], f[2], f[3]), (z.first.0, z.first.1, z.last.0, z.last.1));
            for y in 0..4u32 {
                for x in 0..4u32 {
                    assert_eq!(f[4 + (y * 4 + x) as usize] as u64, z.table.get(y, x));
                }
            }

            out.clear();
            encode_outcome(Statistic::ZPrime, &w, m, k, &mut out);
            let zp = assemble_zprime(&s, k).unwrap();
            let f = u16s(&out[1..]);
            assert_eq!(f[4] as usize, zp.mu);
            let want: Vec<u32> = zp.restricted.to_vec().iter().map(|&c| c as u32).collect();
            assert_eq!(f[5..].to_vec(), want);
        }
    }

    #[test]
    fn single_leaf_raw_is_uniform() {
        let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        let d = exact_joint_distribution::<BigRational>(&pair.t1, &[LEAF_A], StatQuery::new(Statistic::Raw, 1, 1), 1.0, 24)
            .unwrap();
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(d.len(), 2);
        assert!(d.outcomes.values().all(|p| *p == half));
    }

    #[test]
    fn rational_sums_to_one_and_matches_float() {
        let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        for stat in [Statistic::Raw, Statistic::Counts, Statistic::Z, Statistic::ZPrime] {
            let q = StatQuery::new(stat, 4, 1);
            let r = exact_joint_distribution::<BigRational>(&pair.t1, &TRIPLE_POINTS, q, 1.0, 24).unwrap();
            let f = exact_joint_distribution::<f64>(&pair.t1, &TRIPLE_POINTS, q, 1.0, 24).unwrap();
            assert!(r.total().is_one());
            assert_eq!(r.len(), f.len());
            for (k, v) in &r.outcomes {
                assert!((v.to_f64() - f.prob(k)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn counts_sum_to_window_number() {
        let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        let (m, k) = (5, 2);
        let d = exact_joint_distribution::<f64>(&pair.t2, &TRIPLE_POINTS, StatQuery::new(Statistic::Counts, m, k), 1.0, 24)
            .unwrap();
        for key in d.outcomes.keys() {
            for point in u16s(&key[1..]).chunks(4) {
                assert_eq!(point.iter().sum::<u32>() as usize, m - k + 1);
            }
        }
    }

    #[test]
    fn conditioning_fixes_first_blocks() {
        let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        let q = StatQuery::new(Statistic::Raw, 4, 1).conditioned();
        let d = exact_joint_distribution::<BigRational>(&pair.t1, &TRIPLE_POINTS, q, 1.0, 24).unwrap();
        assert!(d.total().is_one());
        for key in d.outcomes.keys() {
            for c in key[1..].chunks(4) {
                assert_eq!(u32::from_le_bytes(c.try_into().unwrap()) >> 2, 0);
            }
        }
    }

    #[test]
    fn identical_trees_have_zero_tv() {
        let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        let q = StatQuery::new(Statistic::Counts, 4, 1);
        let r = exact_tv(&pair.t1, &pair.t1, &TRIPLE_POINTS, q, 1.0, super::super::Backend::Rational, 24).unwrap();
        assert_eq!(r.tv, 0.0);
        assert_eq!(r.exact.as_deref(), Some("0"));
    }

    #[test]
    fn cap_is_enforced() {
        let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        let q = StatQuery::new(Statistic::Raw, 9, 1);
        assert!(matches!(
            exact_joint_distribution::<f64>(&pair.t1, &TRIPLE_POINTS, q, 1.0, 24),
            Err(TvError::CapExceeded { bits: 27, cap: 24 })
        ));
    }
}

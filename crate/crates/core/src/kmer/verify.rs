//! Exhaustive checks of the block identities over every sequence of a given
//! length.

use serde::Serialize;

use super::{
    all_ones, check_flow_table, check_k, kmer_count_vector, project_to_h, reconstruct_counts,
    restore_from_h, split_nonoverlapping, transition_counts_from_blocks, KmerError,
};
use crate::cf_sim::BinarySequence;

/// Longest sequence the exhaustive suites will enumerate.
pub const MAX_EXHAUSTIVE_BITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Sliding counts rebuilt from the last block and the transition table.
    Reconstruction,
    /// Balance equations and the total count.
    Flow,
    /// Restricted table round trip.
    Restore,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Reconstruction, Suite::Flow, Suite::Restore];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Reconstruction => "reconstruction",
            Suite::Flow => "flow",
            Suite::Restore => "restore",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub k: usize,
    pub mu: usize,
    pub cases: u64,
    pub failures: u64,
    /// Corrupted inputs tried, zero for suites without a mutation check.
    pub mutations: u64,
    pub mutations_detected: u64,
    /// First failing sequence, if any.
    pub first_failure: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.mutations_detected == self.mutations
    }
}

fn sequences(k: usize, mu: usize) -> Result<impl Iterator<Item = BinarySequence>, KmerError> {
    check_k(k)?;
    let len = (mu + 1) * k;
    if mu == 0 || len > MAX_EXHAUSTIVE_BITS {
        return Err(KmerError::BadLength { len, k });
    }
    Ok((0..1u64 << len).map(move |v| BinarySequence::from_int(v, len)))
}

fn report(suite: Suite, k: usize, mu: usize) -> SuiteReport {
    SuiteReport {
        suite,
        k,
        mu,
        cases: 0,
        failures: 0,
        mutations: 0,
        mutations_detected: 0,
        first_failure: None,
    }
}

fn fail(r: &mut SuiteReport, s: &BinarySequence) {
    r.failures += 1;
    if r.first_failure.is_none() {
        r.first_failure = Some(s.to_string());
    }
}

pub fn verify_reconstruction(k: usize, mu: usize) -> Result<SuiteReport, KmerError> {
    let mut r = report(Suite::Reconstruction, k, mu);
    for s in sequences(k, mu)? {
        let blocks = split_nonoverlapping(&s, k)?;
        let table = transition_counts_from_blocks(&blocks, k);
        r.cases += 1;
        if reconstruct_counts(blocks[mu], &table) != kmer_count_vector(&s, k)? {
            fail(&mut r, &s);
        }
    }
    Ok(r)
}

/// Every sequence satisfies the constraints, and incrementing any single
/// entry of its table breaks them.
pub fn verify_flow(k: usize, mu: usize) -> Result<SuiteReport, KmerError> {
    let mut r = report(Suite::Flow, k, mu);
    let n = 1u32 << k;
    for s in sequences(k, mu)? {
        let blocks = split_nonoverlapping(&s, k)?;
        let table = transition_counts_from_blocks(&blocks, k);
        r.cases += 1;
        if !check_flow_table(blocks[0], blocks[mu], &table).passed() {
            fail(&mut r, &s);
        }
        for y in 0..n {
            for z in 0..n {
                let mut bad = table.clone();
                bad.add(y, z, 1);
                r.mutations += 1;
                r.mutations_detected += !check_flow_table(blocks[0], blocks[mu], &bad).passed() as u64;
            }
        }
    }
    Ok(r)
}

/// `restore . project` is the identity on genuine tables. A table whose
/// all-ones row is corrupted does not survive the round trip.
pub fn verify_restore(k: usize, mu: usize) -> Result<SuiteReport, KmerError> {
    let mut r = report(Suite::Restore, k, mu);
    let ones = all_ones(k);
    for s in sequences(k, mu)? {
        let blocks = split_nonoverlapping(&s, k)?;
        let (x0, xmu) = (blocks[0], blocks[mu]);
        let table = transition_counts_from_blocks(&blocks, k);
        r.cases += 1;
        match restore_from_h(&project_to_h(&table), x0, xmu, mu) {
            Ok(back) if back == table => {}
            _ => fail(&mut r, &s),
        }
        for z in 0..=ones {
            let mut bad = table.clone();
            bad.add(ones, z, 1);
            r.mutations += 1;
            let survived = matches!(restore_from_h(&project_to_h(&bad), x0, xmu, mu), Ok(t) if t == bad);
            r.mutations_detected += !survived as u64;
        }
    }
    Ok(r)
}

pub fn verify_suite(suite: Suite, k: usize, mu: usize) -> Result<SuiteReport, KmerError> {
    match suite {
        Suite::Reconstruction => verify_reconstruction(k, mu),
        Suite::Flow => verify_flow(k, mu),
        Suite::Restore => verify_restore(k, mu),
    }
}

/// All three suites for each `mu` in `1..=max_mu`.
pub fn exhaustive_suites(k: usize, max_mu: usize) -> Result<Vec<SuiteReport>, KmerError> {
    let mut out = Vec::new();
    for mu in 1..=max_mu {
        for suite in Suite::ALL {
            out.push(verify_suite(suite, k, mu)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_ranges_pass() {
        for r in exhaustive_suites(2, 2).unwrap() {
            assert!(r.passed(), "{r:?}");
            assert_eq!(r.cases, 1 << ((r.mu + 1) * 2));
        }
    }

    #[test]
    fn counts_mutations() {
        let r = verify_flow(1, 1).unwrap();
        assert_eq!((r.cases, r.mutations), (4, 16));
        let r = verify_restore(1, 1).unwrap();
        assert_eq!(r.mutations, 8);
        assert!(r.passed());
    }

    #[test]
    fn rejects_oversized() {
        assert!(verify_flow(3, 8).is_err());
        assert!(verify_flow(1, 0).is_err());
    }
}

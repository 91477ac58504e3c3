use cfkmer_core::kmer::{
    all_ones, check_flow, kmer_count_vector, project_to_h, reconstruct_counts, restore_from_h, split_nonoverlapping,
    transition_counts,
};
use cfkmer_core::BinarySequence;
use proptest::prelude::*;

fn naive_counts(bits: &[u8], k: usize) -> Vec<u64> {
    let mut c = vec![0u64; 1 << k];
    for w in bits.windows(k) {
        c[w.iter().fold(0usize, |a, &b| (a << 1) | b as usize)] += 1;
    }
    c
}

fn bits_and_k() -> impl Strategy<Value = (Vec<u8>, usize)> {
    (1usize..=4).prop_flat_map(|k| (prop::collection::vec(0u8..=1, 0..300), Just(k)))
}

/// Sequences of `(mu + 1) k` sites, so every site belongs to a block.
fn blocked() -> impl Strategy<Value = (Vec<u8>, usize)> {
    (1usize..=4, 1usize..=40).prop_flat_map(|(k, mu)| (prop::collection::vec(0u8..=1, (mu + 1) * k), Just(k)))
}

proptest! {
    #[test]
    fn counts_match_sliding_windows((bits, k) in bits_and_k()) {
        let s = BinarySequence::from_bits(&bits);
        let v = kmer_count_vector(&s, k).unwrap();
        prop_assert_eq!(&v.counts, &naive_counts(&bits, k));
        prop_assert_eq!(v.total(), bits.len().saturating_sub(k - 1) as u64);
    }

    #[test]
    fn complement_reverses_index((bits, k) in bits_and_k()) {
        let s = BinarySequence::from_bits(&bits);
        let a = kmer_count_vector(&s, k).unwrap().counts;
        let b = kmer_count_vector(&s.complement(), k).unwrap().counts;
        let ones = all_ones(k) as usize;
        for i in 0..a.len() {
            prop_assert_eq!(a[i], b[ones ^ i]);
        }
    }

    #[test]
    fn transitions_rebuild_counts((bits, k) in blocked()) {
        let s = BinarySequence::from_bits(&bits);
        let blocks = split_nonoverlapping(&s, k).unwrap();
        let table = transition_counts(&s, k).unwrap();
        prop_assert_eq!(table.total() as usize, blocks.len() - 1);
        let rebuilt = reconstruct_counts(*blocks.last().unwrap(), &table);
        prop_assert_eq!(rebuilt.counts, naive_counts(&bits, k));
    }

    #[test]
    fn flow_balances((bits, k) in blocked()) {
        let s = BinarySequence::from_bits(&bits);
        prop_assert!(check_flow(&s, k).unwrap().passed());
    }

    #[test]
    fn restricted_table_restores((bits, k) in blocked()) {
        let s = BinarySequence::from_bits(&bits);
        let blocks = split_nonoverlapping(&s, k).unwrap();
        let table = transition_counts(&s, k).unwrap();
        let mu = blocks.len() - 1;
        let back = restore_from_h(&project_to_h(&table), blocks[0], blocks[mu], mu).unwrap();
        for y in 0..1u32 << k {
            for z in 0..1u32 << k {
                prop_assert_eq!(back.get(y, z), table.get(y, z));
            }
        }
    }
}

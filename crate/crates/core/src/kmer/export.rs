use std::io::Write;

use super::{kmer_string, KmerCountVector, KmerError, TransitionTable};

/// One row per labelled count vector; the header names each k-mer.
pub fn write_count_vectors_csv<W: Write>(
    w: W,
    k: usize,
    rows: &[(String, KmerCountVector)],
) -> Result<(), KmerError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["label".to_string()];
    header.extend((0..1u32 << k).map(|i| kmer_string(i, k)));
    out.write_record(&header)?;
    for (label, v) in rows {
        let mut rec = vec![label.clone()];
        rec.extend(v.counts.iter().map(u64::to_string));
        out.write_record(&rec)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Row `y` lists `N[y][z]` for every `z`; the first column names `y`.
pub fn write_transition_table_csv<W: Write>(w: W, table: &TransitionTable) -> Result<(), KmerError> {
    let k = table.k();
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["from".to_string()];
    header.extend((0..1u32 << k).map(|i| kmer_string(i, k)));
    out.write_record(&header)?;
    for y in 0..1u32 << k {
        let mut rec = vec![kmer_string(y, k)];
        rec.extend((0..1u32 << k).map(|z| table.get(y, z).to_string()));
        out.write_record(&rec)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf_sim::BinarySequence;
    use crate::kmer::{kmer_count_vector, transition_counts};

    #[test]
    fn headers_are_kmer_strings() {
        let s: BinarySequence = "001111000".parse().unwrap();
        let mut buf = Vec::new();
        write_count_vectors_csv(&mut buf, 2, &[("s".into(), kmer_count_vector(&s, 2).unwrap())])
            .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "label,00,01,10,11\ns,3,1,1,3\n");
        let t = transition_counts(&"0110".parse::<BinarySequence>().unwrap(), 1).unwrap();
        let mut buf = Vec::new();
        write_transition_table_csv(&mut buf, &t).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "from,0,1\n0,0,1\n1,1,1\n");
    }
}

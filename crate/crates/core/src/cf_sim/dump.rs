//! Sequence dumps.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! b"CFKSEQ01"            magic
//! u32 k                  word size the sequences were produced for
//! u64 m                  sites per sequence
//! u32 p                  number of points
//! p x (u32 len, bytes)   UTF-8 point labels
//! p x ceil(m/64) x u64   packed sites, see BinarySequence
//! ```
//!
//! Text layout: a `# labels` line listing the labels separated by spaces,
//! then one line of `0`/`1` characters per point.

use std::io::{BufRead, Read, Write};

use super::{BinarySequence, SimError};

const MAGIC: &[u8; 8] = b"CFKSEQ01";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceDump {
    pub k: u32,
    pub labels: Vec<String>,
    pub sequences: Vec<BinarySequence>,
}

impl SequenceDump {
    pub fn new(k: u32, labels: Vec<String>, sequences: Vec<BinarySequence>) -> Result<Self, SimError> {
        if labels.len() != sequences.len() {
            return Err(SimError::BadDump(format!(
                "{} labels for {} sequences",
                labels.len(),
                sequences.len()
            )));
        }
        if let Some(first) = sequences.first() {
            if sequences.iter().any(|s| s.len() != first.len()) {
                return Err(SimError::BadDump("sequences differ in length".into()));
            }
        }
        Ok(Self {
            k,
            labels,
            sequences,
        })
    }

    pub fn sites(&self) -> usize {
        self.sequences.first().map_or(0, BinarySequence::len)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), SimError> {
        w.write_all(MAGIC)?;
        w.write_all(&self.k.to_le_bytes())?;
        w.write_all(&(self.sites() as u64).to_le_bytes())?;
        w.write_all(&(self.labels.len() as u32).to_le_bytes())?;
        for l in &self.labels {
            w.write_all(&(l.len() as u32).to_le_bytes())?;
            w.write_all(l.as_bytes())?;
        }
        for s in &self.sequences {
            for word in s.words() {
                w.write_all(&word.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, SimError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SimError::BadDump("bad magic".into()));
        }
        let k = read_u32(&mut r)?;
        let m = read_u64(&mut r)? as usize;
        let p = read_u32(&mut r)? as usize;
        let mut labels = Vec::with_capacity(p);
        for _ in 0..p {
            let len = read_u32(&mut r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            labels.push(
                String::from_utf8(buf).map_err(|_| SimError::BadDump("label is not UTF-8".into()))?,
            );
        }
        let n_words = m.div_ceil(64);
        let mut sequences = Vec::with_capacity(p);
        for _ in 0..p {
            let words = (0..n_words)
                .map(|_| read_u64(&mut r))
                .collect::<Result<Vec<_>, _>>()?;
            sequences.push(BinarySequence::from_words(words, m)?);
        }
        Self::new(k, labels, sequences)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<(), SimError> {
        writeln!(w, "# {}", self.labels.join(" "))?;
        for s in &self.sequences {
            writeln!(w, "{s}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R, k: u32) -> Result<Self, SimError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| SimError::BadDump("empty input".into()))??;
        let labels: Vec<String> = header
            .strip_prefix('#')
            .ok_or_else(|| SimError::BadDump("missing '# labels' header".into()))?
            .split_whitespace()
            .map(str::to_string)
            .collect();
        let mut sequences = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            sequences.push(line.parse()?);
        }
        Self::new(k, labels, sequences)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, SimError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, SimError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SequenceDump {
        let a: BinarySequence = "0110100101110".repeat(11).parse().unwrap();
        let b = a.complement();
        SequenceDump::new(2, vec!["A".into(), "Bp".into()], vec![a, b]).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let d = sample();
        let mut buf = Vec::new();
        d.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"CFKSEQ01");
        assert_eq!(SequenceDump::read_binary(&buf[..]).unwrap(), d);
        assert!(SequenceDump::read_binary(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let d = sample();
        let mut buf = Vec::new();
        d.write_text(&mut buf).unwrap();
        assert!(buf.starts_with(b"# A Bp\n"));
        assert_eq!(SequenceDump::read_text(&buf[..], 2).unwrap(), d);
    }
}

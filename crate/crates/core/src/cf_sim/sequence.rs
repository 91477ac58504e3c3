use std::fmt;
use std::str::FromStr;

use super::SimError;

/// Bit string of length `m`, packed into 64-bit words. Site `i` lives in
/// word `i / 64` at bit `i % 64` (little-endian within each word).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinarySequence {
    words: Vec<u64>,
    len: usize,
}

impl BinarySequence {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// The low `len` bits of `value`, most significant first. Handy for
    /// enumerating every sequence of a given length.
    pub fn from_int(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut s = Self::zeros(len);
        for i in 0..len {
            s.set(i, ((value >> (len - 1 - i)) & 1) as u8);
        }
        s
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Result<Self, SimError> {
        if words.len() != len.div_ceil(64) {
            return Err(SimError::BadDump(format!(
                "{} words cannot hold exactly {len} sites",
                words.len()
            )));
        }
        let mut s = Self { words, len };
        s.clear_tail();
        Ok(s)
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        debug_assert!(i < self.len);
        ((self.words[i >> 6] >> (i & 63)) & 1) as u8
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: u8) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i & 63);
        if bit & 1 == 1 {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    pub fn push(&mut self, bit: u8) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, bit);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        let mut s = Self {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        s.clear_tail();
        s
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        let mut s = Self::zeros(end - start);
        for i in start..end {
            s.set(i - start, self.get(i));
        }
        s
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.iter().collect()
    }
}

impl fmt::Display for BinarySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BinarySequence {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Self::zeros(0);
        for (i, c) in s.trim().chars().enumerate() {
            match c {
                '0' => out.push(0),
                '1' => out.push(1),
                _ => {
                    return Err(SimError::BadDump(format!(
                        "character {c:?} at position {i} is not 0 or 1"
                    )))
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn little_endian_within_words() {
        let mut s = BinarySequence::zeros(70);
        s.set(0, 1);
        s.set(65, 1);
        assert_eq!(s.words(), &[1, 2]);
        assert_eq!(s.to_string().len(), 70);
    }

    #[test]
    fn parse_and_display() {
        let s: BinarySequence = "0011010".parse().unwrap();
        assert_eq!(s.to_string(), "0011010");
        assert_eq!(s.count_ones(), 3);
        assert_eq!(s.complement().to_string(), "1100101");
        assert!("01a".parse::<BinarySequence>().is_err());
    }

    #[test]
    fn from_int_is_msb_first() {
        assert_eq!(BinarySequence::from_int(0b0011, 4).to_string(), "0011");
    }

    #[test]
    fn tail_bits_cleared() {
        let s = BinarySequence::from_words(vec![u64::MAX], 3).unwrap();
        assert_eq!(s.words(), &[7]);
        assert_eq!(s.complement().words(), &[0]);
    }
}

use crate::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// Fixed-length bit vector. Position 0 is the first clock cycle.
///
/// Bits are packed little-endian into 64-bit words: position `j` lives in
/// bit `j % 64` of word `j / 64`. Bits past `len` are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Bitstream {
    len: usize,
    words: Vec<u64>,
}

pub(crate) fn word_count(len: usize) -> usize {
    len.div_ceil(64)
}

pub(crate) fn tail_mask(len: usize) -> u64 {
    match len % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

impl Bitstream {
    pub fn zeros(len: usize) -> Self {
        Bitstream {
            len,
            words: vec![0; word_count(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut bs = Bitstream {
            len,
            words: vec![u64::MAX; word_count(len)],
        };
        bs.clear_tail();
        bs
    }

    /// `1010…`, with `ceil(len/2)` ones.
    pub fn alternating(len: usize) -> Self {
        Self::from_fn(len, |j| j % 2 == 0)
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut bs = Self::zeros(len);
        for j in 0..len {
            if f(j) {
                bs.words[j / 64] |= 1 << (j % 64);
            }
        }
        bs
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Self::from_fn(bits.len(), |j| bits[j])
    }

    pub(crate) fn from_words(len: usize, words: Vec<u64>) -> Self {
        debug_assert_eq!(words.len(), word_count(len));
        let mut bs = Bitstream { len, words };
        bs.clear_tail();
        bs
    }

    fn clear_tail(&mut self) {
        if let Some(last) = self.words.last_mut() {
            *last &= tail_mask(self.len);
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

    pub fn get(&self, j: usize) -> bool {
        assert!(j < self.len, "bit index {j} out of range for length {}", self.len);
        self.words[j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, j: usize, value: bool) {
        assert!(j < self.len, "bit index {j} out of range for length {}", self.len);
        let mask = 1u64 << (j % 64);
        if value {
            self.words[j / 64] |= mask;
        } else {
            self.words[j / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |j| self.get(j))
    }

    pub fn to_bits(&self) -> Vec<bool> {
        self.iter().collect()
    }

    /// True when every one in `self` is also a one in `other`.
    pub fn implies(&self, other: &Bitstream) -> bool {
        self.len == other.len && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_constant(&self) -> bool {
        let ones = self.count_ones();
        ones == 0 || ones == self.len
    }

    fn zip_with(&self, other: &Bitstream, f: impl Fn(u64, u64) -> u64) -> Result<Bitstream> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                got: other.len,
            });
        }
        let words = self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect();
        Ok(Bitstream::from_words(self.len, words))
    }

    pub fn and(&self, other: &Bitstream) -> Result<Bitstream> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Bitstream) -> Result<Bitstream> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn xor(&self, other: &Bitstream) -> Result<Bitstream> {
        self.zip_with(other, |a, b| a ^ b)
    }

    pub fn not(&self) -> Bitstream {
        Bitstream::from_words(self.len, self.words.iter().map(|w| !w).collect())
    }

    /// Stream delayed by one cycle: output bit `j` is input bit `j-1`.
    /// Bit 0 is `first`.
    pub fn delayed(&self, first: bool) -> Bitstream {
        Bitstream::from_fn(self.len, |j| if j == 0 { first } else { self.get(j - 1) })
    }

    /// Apply a position permutation: output bit `j` is input bit `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Bitstream {
        assert_eq!(perm.len(), self.len);
        Bitstream::from_fn(self.len, |j| self.get(perm[j]))
    }
}

impl fmt::Display for Bitstream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bitstream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bitstream({self})")
    }
}

impl FromStr for Bitstream {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .trim()
            .chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit `{other}` at offset {i}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if bits.is_empty() {
            return Err(Error::Parse("empty bit string".into()));
        }
        Ok(Bitstream::from_bits(&bits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let bs: Bitstream = "0110".parse().unwrap();
        assert_eq!(bs.to_string(), "0110");
        assert!(!bs.get(0) && bs.get(1));
        assert_eq!(bs.count_ones(), 2);
        assert!("01x0".parse::<Bitstream>().is_err());
        assert!("".parse::<Bitstream>().is_err());
    }

    #[test]
    fn multiword_tail_is_clean() {
        let bs = Bitstream::ones(130);
        assert_eq!(bs.count_ones(), 130);
        assert_eq!(bs.not().count_ones(), 0);
        let alt = Bitstream::alternating(129);
        assert_eq!(alt.count_ones(), 65);
        assert_eq!(alt.delayed(false).count_ones(), 64);
    }

    #[test]
    fn gate_ops() {
        let x: Bitstream = "1100".parse().unwrap();
        let y: Bitstream = "1010".parse().unwrap();
        assert_eq!(x.and(&y).unwrap().to_string(), "1000");
        assert_eq!(x.or(&y).unwrap().to_string(), "1110");
        assert_eq!(x.xor(&y).unwrap().to_string(), "0110");
        assert_eq!(x.delayed(false).to_string(), "0110");
        assert_eq!(x.delayed(true).to_string(), "1110");
        assert!(x.and(&Bitstream::zeros(3)).is_err());
    }
}

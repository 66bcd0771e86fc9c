//! Stochastic-number primitives.
//!
//! An SN of length `N` is generated by comparing each entry of a number
//! sequence (a permutation of `0..N`) against a target count: position `j`
//! carries a one iff `seq[j] < target`. Decoding counts the ones.

pub(crate) mod bitstream;
mod generators;
mod scc;
mod sequence;

pub use bitstream::Bitstream;
pub use generators::{baseline_sequence, lfsr_taps, GeneratorKind};
pub use scc::{average_scc, scc};
pub use sequence::{generate, NumberSequence};

use crate::{Rational, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Value encoding of a stochastic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    #[default]
    Unipolar,
    Bipolar,
}

impl Encoding {
    /// Value of a stream of length `n` holding `ones` ones.
    pub fn decode_count(self, ones: usize, n: usize) -> Rational {
        let (ones, n) = (ones as i128, n as i128);
        match self {
            Encoding::Unipolar => Rational::new(ones, n),
            Encoding::Bipolar => Rational::new(2 * ones - n, n),
        }
    }

    /// Expected number of ones for value `p` in a stream of length `n`.
    /// Not rounded: the result may be fractional.
    pub fn encode_value(self, p: Rational, n: usize) -> Rational {
        let n = Rational::from_integer(n as i128);
        match self {
            Encoding::Unipolar => p * n,
            Encoding::Bipolar => (p + Rational::from_integer(1)) * n / Rational::from_integer(2),
        }
    }

    /// Value-domain weight of a single one-bit: `1/N` or `2/N`.
    pub fn count_scale(self, n: usize) -> Rational {
        match self {
            Encoding::Unipolar => Rational::new(1, n as i128),
            Encoding::Bipolar => Rational::new(2, n as i128),
        }
    }

    pub fn range(self) -> (Rational, Rational) {
        match self {
            Encoding::Unipolar => (Rational::from_integer(0), Rational::from_integer(1)),
            Encoding::Bipolar => (Rational::from_integer(-1), Rational::from_integer(1)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Encoding::Unipolar => "unipolar",
            Encoding::Bipolar => "bipolar",
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Encoding {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unipolar" => Ok(Encoding::Unipolar),
            "bipolar" => Ok(Encoding::Bipolar),
            other => Err(crate::Error::Config(format!("unknown encoding `{other}`"))),
        }
    }
}

/// Decode a bitstream under the given encoding.
pub fn decode(bs: &Bitstream, enc: Encoding) -> Rational {
    enc.decode_count(bs.count_ones(), bs.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    #[test]
    fn decode_examples() {
        let bs: Bitstream = "10100000".parse().unwrap();
        assert_eq!(decode(&bs, Encoding::Unipolar), rat(1, 4));
        assert_eq!(decode(&bs, Encoding::Bipolar), rat(-1, 2));
        let zero: Bitstream = "0000".parse().unwrap();
        assert_eq!(decode(&zero, Encoding::Unipolar), rat(0, 1));
        let x: Bitstream = "10100100".parse().unwrap();
        assert_eq!(decode(&x, Encoding::Unipolar), rat(3, 8));
    }

    #[test]
    fn enc_inverts_dec() {
        for n in [4usize, 7, 16] {
            for h in 0..=n {
                for enc in [Encoding::Unipolar, Encoding::Bipolar] {
                    let p = enc.decode_count(h, n);
                    assert_eq!(enc.encode_value(p, n), Rational::from_integer(h as i128));
                }
            }
        }
        assert_eq!(Encoding::Bipolar.encode_value(rat(0, 1), 4), rat(2, 1));
    }
}

use super::NumberSequence;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Built-in number-sequence generators used as baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GeneratorKind {
    Ramp,
    ReverseRamp,
    /// Base-2 bit reversal of a counter.
    Vdc,
    /// Base-`b` digit reversal of a counter; needs `N = b^k`.
    Halton(u32),
    /// Maximal-length Fibonacci LFSR of width `log2 N`, seeded all-ones,
    /// with value 0 appended after the `2^w - 1` register states.
    Lfsr,
}

/// Feedback taps (1-based bit positions) for maximal-length Fibonacci LFSRs.
pub fn lfsr_taps(width: u32) -> Option<&'static [u32]> {
    Some(match width {
        2 => &[2, 1],
        3 => &[3, 2],
        4 => &[4, 3],
        5 => &[5, 3],
        6 => &[6, 5],
        7 => &[7, 6],
        8 => &[8, 6, 5, 4],
        _ => return None,
    })
}

fn exact_log(n: usize, base: usize) -> Option<u32> {
    let mut k = 0;
    let mut p = 1usize;
    while p < n {
        p = p.checked_mul(base)?;
        k += 1;
    }
    (p == n).then_some(k)
}

fn digit_reversal(n: usize, base: usize, digits: u32) -> Vec<usize> {
    (0..n)
        .map(|mut i| {
            let mut r = 0;
            for _ in 0..digits {
                r = r * base + i % base;
                i /= base;
            }
            r
        })
        .collect()
}

fn lfsr_states(width: u32) -> Vec<usize> {
    let taps = lfsr_taps(width).expect("width checked by caller");
    let mask = (1usize << width) - 1;
    let mut state = mask;
    let mut out = Vec::with_capacity(1 << width);
    for _ in 0..mask {
        out.push(state);
        let fb = taps.iter().fold(0, |acc, &t| acc ^ (state >> (t - 1)) & 1);
        state = ((state << 1) | fb) & mask;
    }
    out.push(0);
    out
}

/// Deterministic baseline permutation of `0..n` for the given generator.
pub fn baseline_sequence(kind: GeneratorKind, n: usize) -> Result<NumberSequence> {
    if n == 0 {
        return Err(Error::Config("sequence length must be positive".into()));
    }
    let values = match kind {
        GeneratorKind::Ramp => (0..n).collect(),
        GeneratorKind::ReverseRamp => (0..n).rev().collect(),
        GeneratorKind::Vdc => {
            let k = exact_log(n, 2)
                .ok_or_else(|| Error::Config(format!("vdc needs a power-of-two length, got {n}")))?;
            digit_reversal(n, 2, k)
        }
        GeneratorKind::Halton(b) => {
            if b < 2 {
                return Err(Error::Config(format!("halton base must be >= 2, got {b}")));
            }
            let k = exact_log(n, b as usize).ok_or_else(|| {
                Error::Config(format!("halton base {b} needs a length that is a power of {b}, got {n}"))
            })?;
            digit_reversal(n, b as usize, k)
        }
        GeneratorKind::Lfsr => {
            let w = exact_log(n, 2)
                .filter(|w| lfsr_taps(*w).is_some())
                .ok_or_else(|| Error::Config(format!("lfsr supports lengths 4..=256 (powers of two), got {n}")))?;
            lfsr_states(w)
        }
    };
    NumberSequence::new(values)
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorKind::Ramp => f.write_str("ramp"),
            GeneratorKind::ReverseRamp => f.write_str("reverse_ramp"),
            GeneratorKind::Vdc => f.write_str("vdc"),
            GeneratorKind::Halton(b) => write!(f, "halton{b}"),
            GeneratorKind::Lfsr => f.write_str("lfsr"),
        }
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "ramp" => GeneratorKind::Ramp,
            "reverse_ramp" | "reverse-ramp" | "rramp" => GeneratorKind::ReverseRamp,
            "vdc" => GeneratorKind::Vdc,
            "lfsr" => GeneratorKind::Lfsr,
            _ => match s.strip_prefix("halton").map(|b| b.trim_start_matches([':', '_'])) {
                Some(b) => GeneratorKind::Halton(
                    b.parse()
                        .map_err(|_| Error::Config(format!("bad halton base in `{s}`")))?,
                ),
                None => return Err(Error::Config(format!("unknown generator `{s}`"))),
            },
        })
    }
}

impl TryFrom<String> for GeneratorKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GeneratorKind> for String {
    fn from(k: GeneratorKind) -> String {
        k.to_string()
    }
}

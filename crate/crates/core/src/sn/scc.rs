use super::{generate, Bitstream, NumberSequence};
use crate::{Error, Rational, Result};

/// Stochastic computing correlation of two equal-length streams.
///
/// With `d = p(x∧y) - p(x)p(y)`, the result is `d / (min(px,py) - px·py)`
/// for `d > 0`, `d / (px·py - max(px+py-1, 0))` for `d < 0`, and 0 when
/// `d = 0`. Returns `None` when either operand is constant or the
/// normalizer vanishes.
pub fn scc(x: &Bitstream, y: &Bitstream) -> Result<Option<Rational>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_constant() || y.is_constant() {
        return Ok(None);
    }
    let n = x.len() as i128;
    let px = Rational::new(x.count_ones() as i128, n);
    let py = Rational::new(y.count_ones() as i128, n);
    let pxy = Rational::new(x.and(y)?.count_ones() as i128, n);
    let zero = Rational::from_integer(0);
    let delta = pxy - px * py;
    let denom = if delta > zero {
        px.min(py) - px * py
    } else if delta < zero {
        px * py - (px + py - Rational::from_integer(1)).max(zero)
    } else {
        return Ok(Some(zero));
    };
    Ok((denom != zero).then(|| delta / denom))
}

/// Mean SCC over every pair of streams the two sequences can generate,
/// skipping pairs where SCC is undefined. `None` when no pair is defined.
pub fn average_scc(sx: &NumberSequence, sy: &NumberSequence) -> Result<Option<Rational>> {
    let n = sx.len();
    if sy.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: sy.len(),
        });
    }
    let xs = (0..=n).map(|t| generate(sx, t)).collect::<Result<Vec<_>>>()?;
    let ys = (0..=n).map(|t| generate(sy, t)).collect::<Result<Vec<_>>>()?;
    let mut sum = Rational::from_integer(0);
    let mut count = 0i128;
    for x in &xs {
        for y in &ys {
            if let Some(v) = scc(x, y)? {
                sum += v;
                count += 1;
            }
        }
    }
    Ok((count > 0).then(|| sum / Rational::from_integer(count)))
}

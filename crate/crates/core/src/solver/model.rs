//! Count-domain cost of a problem as a function of its symbolic sequences.
//!
//! Every input contributes a list of options: the N+1 comparator levels of
//! a (symbolic or fixed) sequence, or the rows of an upstream SN set. A
//! cell is one option per input; its target is `enc(f(values))` and its
//! cost is `weight · |popcount − target|`. Costs are kept as integers
//! scaled by `d`, the LCM of all target denominators.

use crate::circuit::program::Program;
use crate::circuit::{CircuitSpec, FunctionSpec};
use crate::sn::{generate, Bitstream, NumberSequence};
use crate::{Error, Rational, Result};
use num_integer::Integer;

#[derive(Debug, Clone)]
pub(crate) enum Source {
    Symbolic,
    Fixed(NumberSequence),
    /// `(stream, value, multiplicity)` rows.
    Rows(Vec<(Bitstream, Rational, i128)>),
}

#[derive(Debug, Clone)]
struct Input {
    /// Symbol index for symbolic inputs.
    symbol: Option<usize>,
    fixed: Option<NumberSequence>,
    options: usize,
    /// `options × words` stream words.
    streams: Vec<u64>,
}

#[derive(Debug, Clone)]
pub(crate) struct CostModel {
    pub n: usize,
    program: Program,
    words: usize,
    inputs: Vec<Input>,
    symbols: Vec<usize>,
    strides: Vec<usize>,
    targets: Vec<i128>,
    weights: Vec<i128>,
    pub d: i128,
    pub total_weight: i128,
}

fn product(radix: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &r in radix {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..r).map(move |l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
    }
    out
}

impl CostModel {
    pub fn new(circuit: &CircuitSpec, f: &FunctionSpec, n: usize, sources: Vec<Source>) -> Result<Self> {
        if sources.len() != circuit.inputs().len() {
            return Err(Error::ArityMismatch {
                expected: circuit.inputs().len(),
                got: sources.len(),
            });
        }
        if f.arity() != sources.len() {
            return Err(Error::ArityMismatch {
                expected: sources.len(),
                got: f.arity(),
            });
        }
        let enc = f.encoding();
        let program = Program::compile(circuit, n)?;
        let words = program.words();
        let mut inputs = Vec::new();
        let mut symbols = Vec::new();
        let mut values: Vec<Vec<Rational>> = Vec::new();
        let mut mults: Vec<Vec<i128>> = Vec::new();
        for (i, src) in sources.into_iter().enumerate() {
            let levels: Vec<Rational> = (0..=n).map(|t| enc.decode_count(t, n)).collect();
            match src {
                Source::Symbolic => {
                    symbols.push(i);
                    inputs.push(Input {
                        symbol: Some(symbols.len() - 1),
                        fixed: None,
                        options: n + 1,
                        streams: vec![0; (n + 1) * words],
                    });
                    values.push(levels);
                    mults.push(vec![1; n + 1]);
                }
                Source::Fixed(seq) => {
                    if seq.len() != n {
                        return Err(Error::LengthMismatch { expected: n, got: seq.len() });
                    }
                    let mut streams = Vec::with_capacity((n + 1) * words);
                    for t in 0..=n {
                        streams.extend_from_slice(generate(&seq, t)?.words());
                    }
                    inputs.push(Input {
                        symbol: None,
                        fixed: Some(seq),
                        options: n + 1,
                        streams,
                    });
                    values.push(levels);
                    mults.push(vec![1; n + 1]);
                }
                Source::Rows(rows) => {
                    if rows.is_empty() {
                        return Err(Error::Config("upstream SN set is empty".into()));
                    }
                    let mut streams = Vec::with_capacity(rows.len() * words);
                    for (bs, _, w) in &rows {
                        if bs.len() != n {
                            return Err(Error::LengthMismatch { expected: n, got: bs.len() });
                        }
                        if *w < 1 {
                            return Err(Error::Config(format!("row multiplicity {w} < 1")));
                        }
                        streams.extend_from_slice(bs.words());
                    }
                    inputs.push(Input {
                        symbol: None,
                        fixed: None,
                        options: rows.len(),
                        streams,
                    });
                    values.push(rows.iter().map(|r| r.1).collect());
                    mults.push(rows.iter().map(|r| r.2).collect());
                }
            }
        }
        let radix: Vec<usize> = inputs.iter().map(|i| i.options).collect();
        let mut strides = vec![1; radix.len()];
        for k in (0..radix.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * radix[k + 1];
        }
        let cells = product(&radix);
        let mut raw_targets = Vec::with_capacity(cells.len());
        let mut weights = Vec::with_capacity(cells.len());
        for c in &cells {
            let vals: Vec<Rational> = c.iter().enumerate().map(|(i, &o)| values[i][o]).collect();
            raw_targets.push(enc.encode_value(f.eval(&vals)?, n));
            weights.push(c.iter().enumerate().map(|(i, &o)| mults[i][o]).product::<i128>());
        }
        let d = raw_targets.iter().fold(1i128, |d, t| d.lcm(t.denom()));
        let targets = raw_targets.iter().map(|t| (t * Rational::from_integer(d)).to_integer()).collect();
        let total_weight = weights.iter().sum();
        Ok(CostModel {
            n,
            program,
            words,
            inputs,
            symbols,
            strides,
            targets,
            weights,
            d,
            total_weight,
        })
    }

    pub fn symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn cells(&self) -> usize {
        self.targets.len()
    }

    /// Load the symbolic sequences into the stream tables.
    pub fn set_sequences(&mut self, seqs: &[NumberSequence]) -> Result<()> {
        if seqs.len() != self.symbols.len() {
            return Err(Error::ArityMismatch {
                expected: self.symbols.len(),
                got: seqs.len(),
            });
        }
        let (n, w) = (self.n, self.words);
        for (s, seq) in seqs.iter().enumerate() {
            if seq.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: seq.len() });
            }
            let input = &mut self.inputs[self.symbols[s]];
            for t in 0..=n {
                input.streams[t * w..(t + 1) * w].copy_from_slice(generate(seq, t)?.words());
            }
        }
        Ok(())
    }

    /// All inputs' sequences, for inputs that have one: symbolic ones from
    /// `seqs`, fixed ones as configured.
    pub fn full_sequences(&self, seqs: &[NumberSequence]) -> Vec<NumberSequence> {
        self.inputs
            .iter()
            .filter_map(|i| match (i.symbol, &i.fixed) {
                (Some(s), _) => Some(seqs[s].clone()),
                (None, Some(f)) => Some(f.clone()),
                _ => None,
            })
            .collect()
    }

    fn coords(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.strides
            .iter()
            .zip(&self.inputs)
            .map(move |(s, i)| cell / s % i.options)
    }

    /// Output popcount of one cell.
    pub fn popcount(&self, cell: usize, scratch: &mut [u64]) -> u32 {
        let w = self.words;
        let coords: Vec<usize> = self.coords(cell).collect();
        for (i, (input, o)) in self.inputs.iter().zip(coords).enumerate() {
            self.program
                .input_mut(scratch, i)
                .copy_from_slice(&input.streams[o * w..(o + 1) * w]);
        }
        self.program.run(scratch)
    }

    #[inline]
    pub fn cell_cost(&self, cell: usize, h: u32) -> i128 {
        self.weights[cell] * (i128::from(h) * self.d - self.targets[cell]).abs()
    }

    pub fn scratch(&self) -> Vec<u64> {
        self.program.scratch()
    }

    /// Popcount of every cell and the total scaled cost.
    pub fn evaluate(&self) -> (Vec<u32>, i128) {
        let mut scratch = self.scratch();
        let mut total = 0;
        let hs = (0..self.cells())
            .map(|c| {
                let h = self.popcount(c, &mut scratch);
                total += self.cell_cost(c, h);
                h
            })
            .collect();
        (hs, total)
    }

    pub fn cost_of(&mut self, seqs: &[NumberSequence]) -> Result<i128> {
        self.set_sequences(seqs)?;
        Ok(self.evaluate().1)
    }

    pub fn to_counts(&self, scaled: i128) -> Rational {
        Rational::new(scaled, self.d)
    }

    /// Σ weight·dist(target, ℤ): no integral popcount does better.
    pub fn rounding_floor(&self) -> i128 {
        self.targets
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| {
                let r = t.rem_euclid(self.d);
                w * r.min(self.d - r)
            })
            .sum()
    }

    /// Apply the stream change of swapping positions `a`, `b` of symbol
    /// `s`, whose values are `va < vb`: levels in `(va, vb]` flip both
    /// bits. Applying it twice undoes it.
    pub fn toggle_swap(&mut self, s: usize, a: usize, b: usize, va: usize, vb: usize) {
        let w = self.words;
        let input = &mut self.inputs[self.symbols[s]];
        for t in va + 1..=vb {
            input.streams[t * w + a / 64] ^= 1 << (a % 64);
            input.streams[t * w + b / 64] ^= 1 << (b % 64);
        }
    }

    /// Visit every cell whose option for symbol `s` lies in `lo..=hi`.
    pub fn for_each_cell_in(&self, s: usize, lo: usize, hi: usize, mut f: impl FnMut(usize)) {
        let i = self.symbols[s];
        let stride = self.strides[i];
        let outer = self.cells() / (stride * self.inputs[i].options);
        let block = stride * self.inputs[i].options;
        for o in 0..outer {
            for l in lo..=hi {
                let base = o * block + l * stride;
                for inner in 0..stride {
                    f(base + inner);
                }
            }
        }
    }

    /// Admissible bound for a partial assignment. `assigned[s][j]` is the
    /// value at position `j` of symbol `s`, if fixed; `free[s]` are the
    /// unused values, sorted.
    pub fn partial_bound(&self, assigned: &[Vec<Option<usize>>], free: &[Vec<usize>]) -> i128 {
        let (n, w) = (self.n, self.words);
        // Per symbol and level: (one, zero) planes.
        let planes: Vec<Vec<(Vec<u64>, Vec<u64>)>> = assigned
            .iter()
            .zip(free)
            .map(|(pos, free)| {
                let (fmin, fmax) = (free.first().copied(), free.last().copied());
                (0..=n)
                    .map(|t| {
                        let mut one = vec![0u64; w];
                        let mut zero = vec![0u64; w];
                        for (j, v) in pos.iter().enumerate() {
                            let (is1, is0) = match v {
                                Some(v) => (*v < t, *v >= t),
                                None => (fmax.is_some_and(|m| m < t), fmin.is_some_and(|m| m >= t)),
                            };
                            one[j / 64] |= u64::from(is1) << (j % 64);
                            zero[j / 64] |= u64::from(is0) << (j % 64);
                        }
                        (one, zero)
                    })
                    .collect()
            })
            .collect();
        let (mut one, mut zero) = self.program.ternary_scratch();
        let (base1, base0) = (one.clone(), zero.clone());
        let mut total = 0;
        for cell in 0..self.cells() {
            one.copy_from_slice(&base1);
            zero.copy_from_slice(&base0);
            for (i, (input, o)) in self.inputs.iter().zip(self.coords(cell)).enumerate() {
                match input.symbol {
                    Some(s) => {
                        let (p1, p0) = &planes[s][o];
                        self.program.input_mut(&mut one, i).copy_from_slice(p1);
                        self.program.input_mut(&mut zero, i).copy_from_slice(p0);
                    }
                    None => {
                        let bits = &input.streams[o * w..(o + 1) * w];
                        self.program.input_mut(&mut one, i).copy_from_slice(bits);
                        let z = self.program.input_mut(&mut zero, i);
                        for (k, (z, b)) in z.iter_mut().zip(bits).enumerate() {
                            *z = !b;
                            if k == w - 1 && n % 64 != 0 {
                                *z &= (1u64 << (n % 64)) - 1;
                            }
                        }
                    }
                }
            }
            let (lo, hi) = self.program.run_ternary(&mut one, &mut zero);
            let t = self.targets[cell];
            let (lo, hi) = (i128::from(lo) * self.d, i128::from(hi) * self.d);
            let dist = if t <= lo {
                lo - t
            } else if t >= hi {
                t - hi
            } else {
                let r = t.rem_euclid(self.d);
                r.min(self.d - r)
            };
            total += self.weights[cell] * dist;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::library;
    use crate::sn::Encoding;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn perm(n: usize, rng: &mut ChaCha8Rng) -> NumberSequence {
        let mut v: Vec<usize> = (0..n).collect();
        v.shuffle(rng);
        NumberSequence::new(v).unwrap()
    }

    #[test]
    fn incremental_swap_matches_full_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in [library::multiplier(Encoding::Bipolar, 10), library::squarer(10), library::adder(Encoding::Unipolar, 10)] {
            let k = p.circuit.inputs().len();
            let mut m = CostModel::new(&p.circuit, &p.function, 10, vec![Source::Symbolic; k]).unwrap();
            let mut seqs: Vec<NumberSequence> = (0..k).map(|_| perm(10, &mut rng)).collect();
            m.set_sequences(&seqs).unwrap();
            let (mut hs, mut total) = m.evaluate();
            let mut scratch = m.scratch();
            for _ in 0..50 {
                let s = rng.gen_range(0..k);
                let (a, b) = (rng.gen_range(0..10), rng.gen_range(0..10));
                if a == b {
                    continue;
                }
                let mut v = seqs[s].clone().into_values();
                let (va, vb) = (v[a].min(v[b]), v[a].max(v[b]));
                let (pa, pb) = if v[a] < v[b] { (a, b) } else { (b, a) };
                m.toggle_swap(s, pa, pb, va, vb);
                m.for_each_cell_in(s, va + 1, vb, |c| {
                    let h = m.popcount(c, &mut scratch);
                    total += m.cell_cost(c, h) - m.cell_cost(c, hs[c]);
                    hs[c] = h;
                });
                v.swap(a, b);
                seqs[s] = NumberSequence::new(v).unwrap();
                let mut fresh = m.clone();
                assert_eq!(fresh.cost_of(&seqs).unwrap(), total);
            }
        }
    }

    #[test]
    fn floor_and_partial_bounds_are_admissible() {
        let p = library::multiplier(Encoding::Unipolar, 4);
        let mut m = CostModel::new(&p.circuit, &p.function, 4, vec![Source::Fixed(NumberSequence::ramp(4)), Source::Symbolic]).unwrap();
        assert_eq!(m.to_counts(m.rounding_floor()), crate::rat(3, 1));
        let root = m.partial_bound(&[vec![None; 4]], &[vec![0, 1, 2, 3]]);
        assert!(root >= m.rounding_floor());
        let s = NumberSequence::new(vec![1, 3, 0, 2]).unwrap();
        let full = m.cost_of(std::slice::from_ref(&s)).unwrap();
        let closed = m.partial_bound(&[s.values().iter().map(|&v| Some(v)).collect()], &[vec![]]);
        assert_eq!(closed, full);
        let half = m.partial_bound(&[vec![Some(1), Some(3), None, None]], &[vec![0, 2]]);
        assert!(root <= half && half <= full);
    }

    #[test]
    fn rows_weight_cells() {
        let p = library::saturating_adder(4);
        let ones = Bitstream::ones(4);
        let rows = vec![(ones.clone(), crate::rat(1, 1), 3)];
        let mut m = CostModel::new(&p.circuit, &p.function, 4, vec![Source::Rows(rows), Source::Symbolic]).unwrap();
        assert_eq!(m.total_weight, 15);
        assert_eq!(m.cost_of(&[NumberSequence::ramp(4)]).unwrap(), 0);
    }
}

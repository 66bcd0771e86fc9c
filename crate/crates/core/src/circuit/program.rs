//! Circuits compiled to word-parallel straight-line code.
//!
//! Used on hot paths (search, sweeps). Slot layout: circuit inputs first,
//! then the select stream, then one slot per gate; each slot holds
//! `words` 64-bit words. `circuit::evaluate` is the reference path.

use super::{CircuitSpec, GateOp, Signal};
use crate::sn::bitstream::{tail_mask, word_count};
use crate::Result;

#[derive(Debug, Clone, Copy)]
enum Instr {
    And(usize, usize, usize),
    Or(usize, usize, usize),
    Xor(usize, usize, usize),
    Xnor(usize, usize, usize),
    Not(usize, usize),
    Mux(usize, usize, usize, usize),
    Dff(usize, usize),
}

#[derive(Debug, Clone)]
pub(crate) struct Program {
    n: usize,
    words: usize,
    slots: usize,
    instrs: Vec<Instr>,
    out: usize,
    select: Option<(usize, Vec<u64>)>,
    wrap: bool,
    mask: u64,
}

impl Program {
    pub fn compile(circuit: &CircuitSpec, n: usize) -> Result<Program> {
        let words = word_count(n);
        let n_inputs = circuit.inputs().len();
        let select_slot = circuit.uses_select().then_some(n_inputs);
        let base = n_inputs + usize::from(select_slot.is_some());
        let slot = |s: Signal| match s {
            Signal::Input(i) => i,
            Signal::Select => select_slot.expect("select slot"),
            Signal::Gate(g) => base + g,
        };
        let instrs = circuit
            .gates()
            .iter()
            .enumerate()
            .map(|(g, gate)| {
                let d = base + g;
                let a = |k: usize| slot(gate.args[k]);
                match gate.op {
                    GateOp::And => Instr::And(d, a(0), a(1)),
                    GateOp::Or => Instr::Or(d, a(0), a(1)),
                    GateOp::Xor => Instr::Xor(d, a(0), a(1)),
                    GateOp::Xnor => Instr::Xnor(d, a(0), a(1)),
                    GateOp::Not => Instr::Not(d, a(0)),
                    GateOp::Mux => Instr::Mux(d, a(0), a(1), a(2)),
                    GateOp::Dff => Instr::Dff(d, a(0)),
                }
            })
            .collect();
        let select = match select_slot {
            Some(s) => Some((s, circuit.select_for(n)?.words().to_vec())),
            None => None,
        };
        Ok(Program {
            n,
            words,
            slots: base + circuit.gates().len(),
            instrs,
            out: base + circuit.output(),
            select,
            wrap: circuit.dff_wraparound(),
            mask: tail_mask(n),
        })
    }

    pub fn words(&self) -> usize {
        self.words
    }

    /// Zeroed scratch with the select stream preloaded.
    pub fn scratch(&self) -> Vec<u64> {
        let mut s = vec![0u64; self.slots * self.words];
        if let Some((slot, words)) = &self.select {
            s[slot * self.words..(slot + 1) * self.words].copy_from_slice(words);
        }
        s
    }

    /// Ternary scratch: (definitely-one, definitely-zero) planes.
    pub fn ternary_scratch(&self) -> (Vec<u64>, Vec<u64>) {
        let one = self.scratch();
        let mut zero = vec![0u64; self.slots * self.words];
        if let Some((slot, words)) = &self.select {
            for (w, z) in words.iter().zip(&mut zero[slot * self.words..(slot + 1) * self.words]) {
                *z = !w;
            }
            zero[(slot + 1) * self.words - 1] &= self.mask;
        }
        (one, zero)
    }

    #[inline]
    pub fn input_mut<'a>(&self, scratch: &'a mut [u64], input: usize) -> &'a mut [u64] {
        &mut scratch[input * self.words..(input + 1) * self.words]
    }

    #[inline]
    fn bit(&self, s: &[u64], slot: usize, j: usize) -> u64 {
        s[slot * self.words + j / 64] >> (j % 64) & 1
    }

    /// Evaluate with inputs already loaded; returns the output popcount.
    pub fn run(&self, s: &mut [u64]) -> u32 {
        let w = self.words;
        let last = w - 1;
        for ins in &self.instrs {
            match *ins {
                Instr::Dff(d, a) => {
                    let first = if self.wrap { self.bit(s, a, self.n - 1) } else { 0 };
                    let mut carry = first;
                    for k in 0..w {
                        let v = s[a * w + k];
                        s[d * w + k] = (v << 1) | carry;
                        carry = v >> 63;
                    }
                    s[d * w + last] &= self.mask;
                }
                _ => {
                    for k in 0..w {
                        let v = match *ins {
                            Instr::And(_, a, b) => s[a * w + k] & s[b * w + k],
                            Instr::Or(_, a, b) => s[a * w + k] | s[b * w + k],
                            Instr::Xor(_, a, b) => s[a * w + k] ^ s[b * w + k],
                            Instr::Xnor(_, a, b) => !(s[a * w + k] ^ s[b * w + k]),
                            Instr::Not(_, a) => !s[a * w + k],
                            Instr::Mux(_, a, b, c) => {
                                let sel = s[c * w + k];
                                (sel & s[a * w + k]) | (!sel & s[b * w + k])
                            }
                            Instr::Dff(..) => unreachable!(),
                        };
                        s[dst(ins) * w + k] = v;
                    }
                    s[dst(ins) * w + last] &= self.mask;
                }
            }
        }
        s[self.out * w..(self.out + 1) * w].iter().map(|x| x.count_ones()).sum()
    }

    /// Three-valued evaluation. Returns bounds `(lo, hi)` on the output
    /// popcount over every completion of the unknown input bits.
    pub fn run_ternary(&self, one: &mut [u64], zero: &mut [u64]) -> (u32, u32) {
        let w = self.words;
        let last = w - 1;
        for ins in &self.instrs {
            match *ins {
                Instr::Dff(d, a) => {
                    let (mut c1, mut c0) = if self.wrap {
                        (self.bit(one, a, self.n - 1), self.bit(zero, a, self.n - 1))
                    } else {
                        (0, 1)
                    };
                    for k in 0..w {
                        let (v1, v0) = (one[a * w + k], zero[a * w + k]);
                        one[d * w + k] = (v1 << 1) | c1;
                        zero[d * w + k] = (v0 << 1) | c0;
                        c1 = v1 >> 63;
                        c0 = v0 >> 63;
                    }
                }
                _ => {
                    for k in 0..w {
                        let (v1, v0) = match *ins {
                            Instr::And(_, a, b) => {
                                (one[a * w + k] & one[b * w + k], zero[a * w + k] | zero[b * w + k])
                            }
                            Instr::Or(_, a, b) => {
                                (one[a * w + k] | one[b * w + k], zero[a * w + k] & zero[b * w + k])
                            }
                            Instr::Xor(_, a, b) | Instr::Xnor(_, a, b) => {
                                let (a1, a0, b1, b0) = (one[a * w + k], zero[a * w + k], one[b * w + k], zero[b * w + k]);
                                let x1 = (a1 & b0) | (a0 & b1);
                                let x0 = (a1 & b1) | (a0 & b0);
                                if matches!(ins, Instr::Xor(..)) {
                                    (x1, x0)
                                } else {
                                    (x0, x1)
                                }
                            }
                            Instr::Not(_, a) => (zero[a * w + k], one[a * w + k]),
                            Instr::Mux(_, a, b, c) => {
                                let (a1, a0, b1, b0) = (one[a * w + k], zero[a * w + k], one[b * w + k], zero[b * w + k]);
                                let (s1, s0) = (one[c * w + k], zero[c * w + k]);
                                ((s1 & a1) | (s0 & b1) | (a1 & b1), (s1 & a0) | (s0 & b0) | (a0 & b0))
                            }
                            Instr::Dff(..) => unreachable!(),
                        };
                        one[dst(ins) * w + k] = v1;
                        zero[dst(ins) * w + k] = v0;
                    }
                }
            }
            let d = dst(ins);
            one[d * w + last] &= self.mask;
            zero[d * w + last] &= self.mask;
        }
        let o = self.out;
        let lo: u32 = one[o * w..(o + 1) * w].iter().map(|x| x.count_ones()).sum();
        let z: u32 = zero[o * w..(o + 1) * w].iter().map(|x| x.count_ones()).sum();
        (lo, self.n as u32 - z)
    }
}

fn dst(ins: &Instr) -> usize {
    match *ins {
        Instr::And(d, ..)
        | Instr::Or(d, ..)
        | Instr::Xor(d, ..)
        | Instr::Xnor(d, ..)
        | Instr::Not(d, ..)
        | Instr::Mux(d, ..)
        | Instr::Dff(d, ..) => d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{evaluate, library};
    use crate::sn::{Bitstream, Encoding};
    use rand::{Rng, SeedableRng};
    use std::collections::HashMap;

    fn all_library(n: usize) -> Vec<CircuitSpec> {
        vec![
            library::multiplier(Encoding::Unipolar, n).circuit,
            library::multiplier(Encoding::Bipolar, n).circuit,
            library::adder(Encoding::Unipolar, n).circuit,
            library::squarer(n).circuit,
            library::squarer(n).circuit.with_dff_wraparound(true),
            library::saturating_adder(n).circuit,
            library::fma(n).circuit,
        ]
    }

    #[test]
    fn compiled_matches_reference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [3usize, 16, 64, 100, 130] {
            for c in all_library(n) {
                let p = Program::compile(&c, n).unwrap();
                for _ in 0..20 {
                    let streams: Vec<Bitstream> =
                        c.inputs().iter().map(|_| Bitstream::from_fn(n, |_| rng.gen())).collect();
                    let named: HashMap<String, Bitstream> =
                        c.inputs().iter().cloned().zip(streams.iter().cloned()).collect();
                    let want = evaluate(&c, &named).unwrap().count_ones() as u32;
                    let mut s = p.scratch();
                    for (i, st) in streams.iter().enumerate() {
                        p.input_mut(&mut s, i).copy_from_slice(st.words());
                    }
                    assert_eq!(p.run(&mut s), want);

                    // Fully known ternary evaluation is exact.
                    let (mut one, mut zero) = p.ternary_scratch();
                    for (i, st) in streams.iter().enumerate() {
                        p.input_mut(&mut one, i).copy_from_slice(st.words());
                        p.input_mut(&mut zero, i).copy_from_slice(st.not().words());
                    }
                    assert_eq!(p.run_ternary(&mut one, &mut zero), (want, want));
                }
            }
        }
    }

    #[test]
    fn ternary_bounds_are_sound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 12;
        for c in all_library(n) {
            let p = Program::compile(&c, n).unwrap();
            for _ in 0..50 {
                let k = c.inputs().len();
                let known: Vec<Bitstream> = (0..k).map(|_| Bitstream::from_fn(n, |_| rng.gen_bool(0.7))).collect();
                let vals: Vec<Bitstream> = (0..k).map(|_| Bitstream::from_fn(n, |_| rng.gen())).collect();
                let (mut one, mut zero) = p.ternary_scratch();
                for i in 0..k {
                    let o = vals[i].and(&known[i]).unwrap();
                    let z = vals[i].not().and(&known[i]).unwrap();
                    p.input_mut(&mut one, i).copy_from_slice(o.words());
                    p.input_mut(&mut zero, i).copy_from_slice(z.words());
                }
                let (lo, hi) = p.run_ternary(&mut one, &mut zero);
                for _ in 0..20 {
                    let mut s = p.scratch();
                    for i in 0..k {
                        let fill = Bitstream::from_fn(n, |j| if known[i].get(j) { vals[i].get(j) } else { rng.gen() });
                        p.input_mut(&mut s, i).copy_from_slice(fill.words());
                    }
                    let h = p.run(&mut s);
                    assert!(lo <= h && h <= hi, "{h} not in [{lo}, {hi}]");
                }
            }
        }
    }
}

use super::system::{ConstraintSystem, Relation, VarKind};
use crate::circuit::{trace, CircuitSpec, CycleTrace, FunctionSpec, GateOp, Signal};
use crate::mip::Assignment;
use crate::sn::{generate, Bitstream, NumberSequence};
use crate::{Error, Rational, Result};
use std::collections::HashMap;

/// Knobs for [`build_program`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodeOptions {
    /// Replace rows 0 and N of every symbolic matrix by constants.
    pub fix_boundary_rows: bool,
    /// Fix the first input's matrix to this sequence. Only applied to
    /// two-input combinational circuits, where joint position permutations
    /// preserve accuracy.
    pub fix_first_sequence: Option<NumberSequence>,
    /// Make the MUX select stream binary variables `r_j` instead of
    /// constants.
    pub symbolic_select: bool,
    /// DFF state at cycle 0 is the operand's last bit instead of 0.
    pub dff_wraparound: bool,
    /// Declare gate variables binary instead of continuous in [0, 1].
    pub strict_binary_gates: bool,
}

impl EncodeOptions {
    /// Defaults for `n`: ramp-fixed first sequence, nothing else.
    pub fn new(n: usize) -> Self {
        EncodeOptions {
            fix_boundary_rows: false,
            fix_first_sequence: Some(NumberSequence::ramp(n)),
            symbolic_select: false,
            dff_wraparound: false,
            strict_binary_gates: false,
        }
    }

    /// Defaults with DFF semantics taken from the circuit.
    pub fn for_circuit(circuit: &CircuitSpec, n: usize) -> Self {
        EncodeOptions {
            dff_wraparound: circuit.dff_wraparound(),
            ..Self::new(n)
        }
    }

    /// Whether the first sequence is actually fixed for this circuit.
    pub fn fixes_first(&self, circuit: &CircuitSpec) -> bool {
        self.fix_first_sequence.is_some() && circuit.inputs().len() == 2 && circuit.is_combinational()
    }
}

/// A matrix entry, select bit or gate operand: constant or variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sig {
    Const(bool),
    Var(usize),
}

/// Per-input SN matrix: `cells[i][j]` is bit `j` of the SN for count `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixLayout {
    pub input: String,
    pub prefix: String,
    pub fixed: Option<NumberSequence>,
    pub cells: Vec<Vec<Sig>>,
}

/// What a variable stands for; used to build assignments from sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarOrigin {
    Matrix { input: usize, row: usize, col: usize },
    Select { col: usize },
    /// Output of `gate` (or one of its helper variables, `aux > 0`) at a
    /// grid cell and cycle.
    Gate { cell: usize, gate: usize, aux: u8, cycle: usize },
    CostError { cell: usize },
    CostPos { cell: usize },
    CostNeg { cell: usize },
}

/// Structure of a system built by [`build_program`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub matrices: Vec<MatrixLayout>,
    /// Input count levels of each grid cell.
    pub cells: Vec<Vec<usize>>,
    pub targets: Vec<Rational>,
    pub origins: Vec<VarOrigin>,
    /// Effective DFF mode: the option or the circuit's own flag.
    pub dff_wraparound: bool,
}

// Helper-variable tags for composed gates.
const AUX_MUX_NOT: u8 = 1;
const AUX_MUX_HI: u8 = 2;
const AUX_MUX_LO: u8 = 3;
const AUX_XNOR_XOR: u8 = 4;

#[derive(Debug, Clone, Default)]
struct Lin {
    terms: Vec<(usize, Rational)>,
    constant: Rational,
}

impl Lin {
    fn sig(s: Sig) -> Lin {
        match s {
            Sig::Const(b) => Lin::constant(i128::from(b)),
            Sig::Var(v) => Lin {
                terms: vec![(v, Rational::from_integer(1))],
                constant: Rational::from_integer(0),
            },
        }
    }

    fn constant(c: i128) -> Lin {
        Lin {
            terms: Vec::new(),
            constant: Rational::from_integer(c),
        }
    }

    fn plus(mut self, other: Lin, sign: i128) -> Lin {
        let s = Rational::from_integer(sign);
        self.terms.extend(other.terms.into_iter().map(|(v, c)| (v, c * s)));
        self.constant += other.constant * s;
        self
    }
}

fn add(a: Sig, b: Sig) -> Lin {
    Lin::sig(a).plus(Lin::sig(b), 1)
}

fn sub(a: Sig, b: Sig) -> Lin {
    Lin::sig(a).plus(Lin::sig(b), -1)
}

/// Add `lhs (rel) rhs` after moving constants right and merging terms.
/// Constraints without variables are checked and dropped.
fn constrain(sys: &mut ConstraintSystem, name: String, lhs: Lin, rel: Relation, rhs: Lin) -> Result<()> {
    let diff = lhs.plus(rhs, -1);
    let mut merged: Vec<(usize, Rational)> = Vec::with_capacity(diff.terms.len());
    for (v, c) in diff.terms {
        match merged.iter_mut().find(|(w, _)| *w == v) {
            Some((_, acc)) => *acc += c,
            None => merged.push((v, c)),
        }
    }
    merged.retain(|(_, c)| *c != Rational::from_integer(0));
    let rhs = -diff.constant;
    if merged.is_empty() {
        let zero = Rational::from_integer(0);
        return if rel.holds(zero, rhs, zero) {
            Ok(())
        } else {
            Err(Error::Config(format!("constraint `{name}` is infeasible on constants")))
        };
    }
    sys.add_constraint(name, merged, rel, rhs)
}

struct Emitter<'a> {
    sys: &'a mut ConstraintSystem,
    origins: &'a mut Vec<VarOrigin>,
    strict: bool,
}

impl Emitter<'_> {
    fn gate_var(&mut self, name: String, origin: VarOrigin) -> Result<usize> {
        let kind = if self.strict { VarKind::Binary } else { VarKind::Continuous };
        let v = self.sys.add_variable(name, kind, Some(Rational::from_integer(0)), Some(Rational::from_integer(1)))?;
        self.origins.push(origin);
        Ok(v)
    }

    /// Table-1 encodings; `z` must already be declared.
    fn basic(&mut self, op: GateOp, z: usize, args: &[Sig], tag: &str) -> Result<()> {
        let zs = Sig::Var(z);
        let zl = || Lin::sig(zs);
        let name = |k: usize| format!("{}{k}_{tag}", op.name().to_ascii_lowercase());
        use Relation::*;
        match op {
            GateOp::And => {
                let (x, y) = (args[0], args[1]);
                constrain(self.sys, name(1), zl(), Ge, add(x, y).plus(Lin::constant(1), -1))?;
                constrain(self.sys, name(2), zl(), Le, Lin::sig(x))?;
                constrain(self.sys, name(3), zl(), Le, Lin::sig(y))
            }
            GateOp::Or => {
                let (x, y) = (args[0], args[1]);
                constrain(self.sys, name(1), zl(), Le, add(x, y))?;
                constrain(self.sys, name(2), zl(), Ge, Lin::sig(x))?;
                constrain(self.sys, name(3), zl(), Ge, Lin::sig(y))
            }
            GateOp::Xor => {
                let (x, y) = (args[0], args[1]);
                constrain(self.sys, name(1), zl(), Le, add(x, y))?;
                constrain(self.sys, name(2), zl(), Ge, sub(x, y))?;
                constrain(self.sys, name(3), zl(), Ge, sub(y, x))?;
                constrain(self.sys, name(4), zl(), Le, Lin::constant(2).plus(add(x, y), -1))
            }
            GateOp::Not => constrain(self.sys, name(1), zl(), Eq, Lin::constant(1).plus(Lin::sig(args[0]), -1)),
            _ => unreachable!("composed gate"),
        }
    }
}

/// Emit the constraints for one gate instance with output variable `z`.
///
/// `fresh` declares helper variables for composed gates: XNOR is NOT∘XOR
/// and `MUX(a, b, s) = OR(AND(s, a), AND(NOT s, b))`. A DFF is not a
/// combinational gate and is handled by the caller.
pub fn encode_gate(
    sys: &mut ConstraintSystem,
    op: GateOp,
    z: usize,
    args: &[Sig],
    tag: &str,
    fresh: &mut dyn FnMut(&mut ConstraintSystem, u8) -> Result<usize>,
) -> Result<()> {
    let mut origins = Vec::new();
    let mut em = Emitter {
        sys,
        origins: &mut origins,
        strict: false,
    };
    match op {
        GateOp::And | GateOp::Or | GateOp::Xor | GateOp::Not => em.basic(op, z, args, tag),
        GateOp::Xnor => {
            let x = fresh(em.sys, AUX_XNOR_XOR)?;
            em.basic(GateOp::Xor, x, args, &format!("{tag}.x"))?;
            em.basic(GateOp::Not, z, &[Sig::Var(x)], tag)
        }
        GateOp::Mux => {
            let (a, b, s) = (args[0], args[1], args[2]);
            let ns = fresh(em.sys, AUX_MUX_NOT)?;
            em.basic(GateOp::Not, ns, &[s], &format!("{tag}.ns"))?;
            let hi = fresh(em.sys, AUX_MUX_HI)?;
            em.basic(GateOp::And, hi, &[s, a], &format!("{tag}.p"))?;
            let lo = fresh(em.sys, AUX_MUX_LO)?;
            em.basic(GateOp::And, lo, &[Sig::Var(ns), b], &format!("{tag}.q"))?;
            em.basic(GateOp::Or, z, &[Sig::Var(hi), Sig::Var(lo)], tag)
        }
        GateOp::Dff => Err(Error::Unsupported("DFF has no single-cycle encoding".into())),
    }
}

fn aux_name(tag: u8) -> &'static str {
    match tag {
        AUX_MUX_NOT => "ns",
        AUX_MUX_HI => "p",
        AUX_MUX_LO => "q",
        AUX_XNOR_XOR => "x",
        _ => "aux",
    }
}

/// Singleton system for one gate with constant binary inputs. Returns the
/// system and the output variable.
pub fn gate_truth_system(op: GateOp, inputs: &[bool]) -> Result<(ConstraintSystem, usize)> {
    if inputs.len() != op.arity() || op == GateOp::Dff {
        return Err(Error::Unsupported(format!("{op} with {} inputs", inputs.len())));
    }
    let mut sys = ConstraintSystem::new();
    let zero = Some(Rational::from_integer(0));
    let one = Some(Rational::from_integer(1));
    let z = sys.add_variable("z", VarKind::Continuous, zero, one)?;
    let args: Vec<Sig> = inputs.iter().map(|&b| Sig::Const(b)).collect();
    encode_gate(&mut sys, op, z, &args, "g", &mut |s, tag| {
        s.add_variable(format!("z.{}", aux_name(tag)), VarKind::Continuous, zero, one)
    })?;
    Ok((sys, z))
}

fn grid(levels: usize, dims: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dims {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..levels).map(move |l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
    }
    out
}

fn suffix(levels: &[usize]) -> String {
    levels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("_")
}

/// Count-domain target `enc(f(dec(levels)))` for every grid cell.
pub(crate) fn cell_targets(f: &FunctionSpec, n: usize, cells: &[Vec<usize>]) -> Result<Vec<Rational>> {
    let enc = f.encoding();
    cells
        .iter()
        .map(|c| {
            let vals: Vec<Rational> = c.iter().map(|&l| enc.decode_count(l, n)).collect();
            Ok(enc.encode_value(f.eval(&vals)?, n))
        })
        .collect()
}

/// Build the synthesis program for a one- or two-input circuit.
pub fn build_program(circuit: &CircuitSpec, f: &FunctionSpec, n: usize, opts: &EncodeOptions) -> Result<ConstraintSystem> {
    let k = circuit.inputs().len();
    if n < 2 {
        return Err(Error::Config(format!("n must be at least 2, got {n}")));
    }
    if k == 0 || k > 2 {
        return Err(Error::Unsupported(format!(
            "{k}-input circuit; split it into two-input stages with the decompose module"
        )));
    }
    if f.arity() != k {
        return Err(Error::ArityMismatch { expected: k, got: f.arity() });
    }
    let wrap = opts.dff_wraparound || circuit.dff_wraparound();
    if let Some(s) = &opts.fix_first_sequence {
        if s.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: s.len() });
        }
    }
    let fixed_first = opts.fixes_first(circuit);
    let mut sys = ConstraintSystem::new();
    let mut origins: Vec<VarOrigin> = Vec::new();
    let zero = Some(Rational::from_integer(0));
    let one = Some(Rational::from_integer(1));

    // Input matrices.
    let mut matrices = Vec::with_capacity(k);
    for (input, name) in circuit.inputs().iter().enumerate() {
        let prefix = ["x", "y"][input].to_string();
        let fixed = (input == 0 && fixed_first).then(|| opts.fix_first_sequence.clone().unwrap());
        let mut cells = Vec::with_capacity(n + 1);
        for row in 0..=n {
            let mut r = Vec::with_capacity(n);
            for col in 0..n {
                let sig = if let Some(seq) = &fixed {
                    Sig::Const(seq.values()[col] < row)
                } else if opts.fix_boundary_rows && (row == 0 || row == n) {
                    Sig::Const(row == n)
                } else {
                    let v = sys.add_variable(format!("{prefix}_{row}_{col}"), VarKind::Binary, None, None)?;
                    origins.push(VarOrigin::Matrix { input, row, col });
                    Sig::Var(v)
                };
                r.push(sig);
            }
            cells.push(r);
        }
        if fixed.is_none() {
            for (row, r) in cells.iter().enumerate() {
                let sum = r.iter().fold(Lin::default(), |acc, s| acc.plus(Lin::sig(*s), 1));
                constrain(&mut sys, format!("val_{prefix}_{row}"), sum, Relation::Eq, Lin::constant(row as i128))?;
            }
            for row in 0..n {
                for col in 0..n {
                    constrain(
                        &mut sys,
                        format!("mono_{prefix}_{row}_{col}"),
                        Lin::sig(cells[row][col]),
                        Relation::Le,
                        Lin::sig(cells[row + 1][col]),
                    )?;
                }
            }
        }
        matrices.push(MatrixLayout {
            input: name.clone(),
            prefix,
            fixed,
            cells,
        });
    }

    // Select stream.
    let select: Vec<Sig> = if circuit.uses_select() {
        if opts.symbolic_select {
            (0..n)
                .map(|col| {
                    let v = sys.add_variable(format!("r_{col}"), VarKind::Binary, None, None)?;
                    origins.push(VarOrigin::Select { col });
                    Ok(Sig::Var(v))
                })
                .collect::<Result<_>>()?
        } else {
            circuit.select_for(n)?.iter().map(Sig::Const).collect()
        }
    } else {
        Vec::new()
    };

    let cells = grid(n + 1, k);
    let targets = cell_targets(f, n, &cells)?;
    let mut objective = Vec::with_capacity(2 * cells.len());
    let gates = circuit.gates();

    for (cell, levels) in cells.iter().enumerate() {
        let sfx = suffix(levels);
        // gate_vars[g][j]
        let mut gate_vars: Vec<Vec<usize>> = Vec::with_capacity(gates.len());
        for (g, gate) in gates.iter().enumerate() {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let name = format!("g_{}_{sfx}_{j}", gate.id);
                let mut em = Emitter {
                    sys: &mut sys,
                    origins: &mut origins,
                    strict: opts.strict_binary_gates,
                };
                let z = em.gate_var(name, VarOrigin::Gate { cell, gate: g, aux: 0, cycle: j })?;
                row.push(z);
            }
            let operand = |s: Signal, j: usize, gate_vars: &Vec<Vec<usize>>| -> Sig {
                match s {
                    Signal::Input(i) => matrices[i].cells[levels[i]][j],
                    Signal::Gate(h) => Sig::Var(gate_vars[h][j]),
                    Signal::Select => select[j],
                }
            };
            for j in 0..n {
                let tag = format!("{}_{sfx}_{j}", gate.id);
                let z = row[j];
                if gate.op == GateOp::Dff {
                    let a = gate.args[0];
                    let prev = if j > 0 {
                        Lin::sig(operand(a, j - 1, &gate_vars))
                    } else if wrap {
                        Lin::sig(operand(a, n - 1, &gate_vars))
                    } else {
                        Lin::constant(0)
                    };
                    constrain(&mut sys, format!("dff_{tag}"), Lin::sig(Sig::Var(z)), Relation::Eq, prev)?;
                    continue;
                }
                let args: Vec<Sig> = gate.args.iter().map(|a| operand(*a, j, &gate_vars)).collect();
                let strict = opts.strict_binary_gates;
                let id = gate.id.clone();
                let sfx2 = sfx.clone();
                let origins_ref = &mut origins;
                encode_gate(&mut sys, gate.op, z, &args, &tag, &mut |s, aux| {
                    let kind = if strict { VarKind::Binary } else { VarKind::Continuous };
                    let v = s.add_variable(format!("g_{id}.{}_{sfx2}_{j}", aux_name(aux)), kind, zero, one)?;
                    origins_ref.push(VarOrigin::Gate { cell, gate: g, aux, cycle: j });
                    Ok(v)
                })?;
            }
            gate_vars.push(row);
        }

        // Cost: Σ_j out_j - c = target;  tpos - tneg - c = 0.
        let c = sys.add_variable(format!("c_{sfx}"), VarKind::Continuous, None, None)?;
        origins.push(VarOrigin::CostError { cell });
        let tpos = sys.add_variable(format!("tpos_{sfx}"), VarKind::Continuous, zero, None)?;
        origins.push(VarOrigin::CostPos { cell });
        let tneg = sys.add_variable(format!("tneg_{sfx}"), VarKind::Continuous, zero, None)?;
        origins.push(VarOrigin::CostNeg { cell });
        let out = &gate_vars[circuit.output()];
        let mut terms: Vec<(usize, Rational)> = out.iter().map(|&v| (v, Rational::from_integer(1))).collect();
        terms.push((c, Rational::from_integer(-1)));
        sys.add_constraint(format!("cost_{sfx}"), terms, Relation::Eq, targets[cell])?;
        sys.add_constraint(
            format!("abs_{sfx}"),
            vec![(tpos, Rational::from_integer(1)), (tneg, Rational::from_integer(-1)), (c, Rational::from_integer(-1))],
            Relation::Eq,
            Rational::from_integer(0),
        )?;
        objective.push((tpos, Rational::from_integer(1)));
        objective.push((tneg, Rational::from_integer(1)));
    }
    sys.set_objective(objective);
    debug_assert_eq!(origins.len(), sys.variables().len());
    sys.layout = Some(Layout {
        n,
        matrices,
        cells,
        targets,
        origins,
        dff_wraparound: wrap,
    });
    Ok(sys)
}

/// The assignment a pair (or single) of sequences induces on a system
/// built by [`build_program`]: matrices from comparator generation, gate
/// variables from simulation, cost variables from the resulting errors.
pub fn induced_assignment(sys: &ConstraintSystem, circuit: &CircuitSpec, sequences: &[NumberSequence]) -> Result<Assignment> {
    let layout = sys
        .layout()
        .ok_or_else(|| Error::Config("system has no synthesis layout".into()))?;
    let n = layout.n;
    if sequences.len() != layout.matrices.len() {
        return Err(Error::ArityMismatch {
            expected: layout.matrices.len(),
            got: sequences.len(),
        });
    }
    for (m, s) in layout.matrices.iter().zip(sequences) {
        if s.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: s.len() });
        }
        if let Some(fixed) = &m.fixed {
            if fixed != s {
                return Err(Error::Config(format!("input `{}` is fixed to {fixed}, got {s}", m.input)));
            }
        }
    }
    let streams: Vec<Vec<Bitstream>> = sequences
        .iter()
        .map(|s| (0..=n).map(|t| generate(s, t)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let circuit = &circuit.clone().with_dff_wraparound(layout.dff_wraparound);
    let select = if circuit.uses_select() {
        Some(circuit.select_for(n)?)
    } else {
        None
    };
    let traces: Vec<CycleTrace> = layout
        .cells
        .iter()
        .map(|levels| {
            let inputs: HashMap<String, Bitstream> = circuit
                .inputs()
                .iter()
                .enumerate()
                .map(|(i, name)| (name.clone(), streams[i][levels[i]].clone()))
                .collect();
            trace(circuit, &inputs)
        })
        .collect::<Result<_>>()?;

    let bit = |b: bool| Rational::from_integer(i128::from(b));
    let errors: Vec<Rational> = traces
        .iter()
        .zip(&layout.targets)
        .map(|(t, target)| Rational::from_integer(t.streams[circuit.output()].count_ones() as i128) - target)
        .collect();
    let zero = Rational::from_integer(0);
    let mut values = std::collections::BTreeMap::new();
    for (v, origin) in layout.origins.iter().enumerate() {
        let value = match *origin {
            VarOrigin::Matrix { input, row, col } => bit(streams[input][row].get(col)),
            VarOrigin::Select { col } => bit(select.as_ref().expect("select").get(col)),
            VarOrigin::Gate { cell, gate, aux, cycle } => {
                let t = &traces[cell];
                let g = &circuit.gates()[gate];
                let levels = &layout.cells[cell];
                let operand = |k: usize| -> bool {
                    match g.args[k] {
                        Signal::Input(i) => streams[i][levels[i]].get(cycle),
                        Signal::Gate(h) => t.streams[h].get(cycle),
                        Signal::Select => select.as_ref().expect("select").get(cycle),
                    }
                };
                bit(match aux {
                    0 => t.streams[gate].get(cycle),
                    AUX_MUX_NOT => !operand(2),
                    AUX_MUX_HI => operand(2) && operand(0),
                    AUX_MUX_LO => !operand(2) && operand(1),
                    AUX_XNOR_XOR => operand(0) ^ operand(1),
                    _ => unreachable!(),
                })
            }
            VarOrigin::CostError { cell } => errors[cell],
            VarOrigin::CostPos { cell } => errors[cell].max(zero),
            VarOrigin::CostNeg { cell } => (-errors[cell]).max(zero),
        };
        values.insert(sys.variables()[v].name.clone(), value);
    }
    Ok(Assignment::from_map(values))
}

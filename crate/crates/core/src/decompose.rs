//! Multi-input circuits as chains of two-input stages.
//!
//! Each two-operand gate (AND, OR, XOR, XNOR, or a MUX driven by the fixed
//! select stream) starts a stage; NOT and DFF gates are absorbed into the
//! stage that consumes them. A stage's operands are circuit inputs, whose
//! sequences are synthesized, or the output of an earlier stage, which is
//! replaced by the deduplicated set of every stream that stage can emit.
//! Stage functions are supplied by the problem document.

use crate::circuit::{evaluate, CircuitSpec, FunctionSpec, GateDecl, GateOp, ProblemSpec, Signal, StageSpec};
use crate::mip::EncodeOptions;
use crate::solver::model::{CostModel, Source};
use crate::solver::{classify, grid_error, optimize, SolveConfig, SynthesisResult, VerifyReport};
use crate::sn::{generate, Bitstream, Encoding, NumberSequence};
use crate::{Error, Rational, Result};
use num_traits::Signed;
use std::collections::HashMap;
use std::time::Instant;

/// Where a stage operand comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputRole {
    /// A circuit input whose sequence this stage synthesizes.
    Symbolic,
    /// A circuit input driven by a given sequence.
    Fixed(NumberSequence),
    /// The output set of stage `stage`.
    Upstream { stage: usize },
}

/// One two-input stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subproblem {
    /// Stage hardware; its inputs are named after circuit inputs or after
    /// the upstream gate they stand for.
    pub circuit: CircuitSpec,
    /// Stage function over `circuit.inputs()`; `None` when the document
    /// declares no stages.
    pub function: Option<FunctionSpec>,
    pub roles: Vec<InputRole>,
    /// Id of the gate in the original circuit this stage ends at.
    pub output: String,
}

impl Subproblem {
    pub fn upstream(&self) -> Vec<usize> {
        self.roles
            .iter()
            .filter_map(|r| match r {
                InputRole::Upstream { stage } => Some(*stage),
                _ => None,
            })
            .collect()
    }
}

fn is_binary(circuit: &CircuitSpec, g: usize) -> Result<bool> {
    let gate = &circuit.gates()[g];
    Ok(match gate.op {
        GateOp::And | GateOp::Or | GateOp::Xor | GateOp::Xnor => true,
        GateOp::Mux if gate.args[2] == Signal::Select => true,
        GateOp::Mux => {
            return Err(Error::Unsupported(format!(
                "MUX `{}` has a data-dependent select and is not a two-input stage",
                gate.id
            )))
        }
        GateOp::Not | GateOp::Dff => false,
    })
}

/// Split a circuit into two-input stages, in topological order.
///
/// `stages` gives the per-stage functions, matched to derived stages by
/// position; pass an empty slice to get the structure only (a circuit with
/// a single stage then uses `f`).
pub fn decompose_circuit(circuit: &CircuitSpec, f: &FunctionSpec, stages: &[StageSpec]) -> Result<Vec<Subproblem>> {
    let gates = circuit.gates();
    let mut heads = Vec::new();
    for g in 0..gates.len() {
        if is_binary(circuit, g)? {
            heads.push(g);
        }
    }
    if heads.is_empty() {
        return Err(Error::Unsupported("circuit has no two-input gate".into()));
    }
    let stage_of: HashMap<usize, usize> = heads.iter().enumerate().map(|(k, &g)| (g, k)).collect();

    // Trace an operand back through unary gates to its source.
    #[derive(Clone, Copy, PartialEq, Eq)]
    enum Src {
        Input(usize),
        Stage(usize),
    }
    let source = |mut s: Signal, chain: &mut Vec<usize>| -> Src {
        loop {
            match s {
                Signal::Input(i) => return Src::Input(i),
                Signal::Gate(g) if stage_of.contains_key(&g) => return Src::Stage(stage_of[&g]),
                Signal::Gate(g) => {
                    chain.push(g);
                    s = gates[g].args[0];
                }
                Signal::Select => unreachable!("select is not an operand"),
            }
        }
    };

    // Unary gates between the last stage and the output belong to it.
    let mut tail = Vec::new();
    let last = match source(Signal::Gate(circuit.output()), &mut tail) {
        Src::Stage(k) => k,
        Src::Input(_) => return Err(Error::Unsupported("output does not depend on a two-input gate".into())),
    };

    let mut consumers = vec![0usize; heads.len()];
    let mut input_stage: HashMap<usize, usize> = HashMap::new();
    let mut out = Vec::with_capacity(heads.len());
    for (k, &h) in heads.iter().enumerate() {
        let mut chain = Vec::new();
        let mut names: Vec<String> = Vec::new();
        let mut roles = Vec::new();
        let operands: Vec<Signal> = gates[h].args.iter().take(2).copied().collect();
        for &op in &operands {
            let src = source(op, &mut chain);
            let (name, role) = match src {
                Src::Input(i) => {
                    if let Some(&other) = input_stage.get(&i) {
                        if other != k {
                            return Err(Error::Unsupported(format!(
                                "input `{}` feeds more than one stage",
                                circuit.inputs()[i]
                            )));
                        }
                    }
                    input_stage.insert(i, k);
                    (circuit.inputs()[i].clone(), InputRole::Symbolic)
                }
                Src::Stage(j) => (gates[heads[j]].id.clone(), InputRole::Upstream { stage: j }),
            };
            if !names.contains(&name) {
                if let InputRole::Upstream { stage } = role {
                    consumers[stage] += 1;
                }
                names.push(name);
                roles.push(role);
            }
        }
        if k == last {
            chain.extend(tail.iter().copied());
        }
        chain.sort_unstable();
        chain.dedup();

        // Stage netlist: absorbed unary gates, then the head, then the tail.
        let rename = |s: Signal| -> String {
            match s {
                Signal::Input(i) => circuit.inputs()[i].clone(),
                Signal::Gate(g) => gates[g].id.clone(),
                Signal::Select => circuit.select_name().unwrap_or("R").to_string(),
            }
        };
        let mut decls = Vec::new();
        for &g in chain.iter().filter(|&&g| g < h).chain(std::iter::once(&h)).chain(chain.iter().filter(|&&g| g > h)) {
            decls.push(GateDecl {
                id: gates[g].id.clone(),
                op: gates[g].op,
                args: gates[g].args.iter().map(|&a| rename(a)).collect(),
            });
        }
        let output = if k == last {
            circuit.output_gate().id.clone()
        } else {
            gates[h].id.clone()
        };
        let stage_circuit = CircuitSpec::new(
            names.clone(),
            decls,
            &output,
            if gates[h].op == GateOp::Mux { circuit.explicit_select_stream().cloned() } else { None },
        )?
        .with_dff_wraparound(circuit.dff_wraparound());

        let function = if stages.is_empty() {
            (heads.len() == 1).then(|| f.clone())
        } else {
            let st = stages.get(k).ok_or_else(|| {
                Error::Config(format!("{} stages derived but only {} declared", heads.len(), stages.len()))
            })?;
            check_roles(k, st, &names, &roles)?;
            Some(FunctionSpec::parse(&st.function, &names, f.encoding())?)
        };
        out.push(Subproblem {
            circuit: stage_circuit,
            function,
            roles,
            output: gates[h].id.clone(),
        });
    }
    if !stages.is_empty() && stages.len() != heads.len() {
        return Err(Error::Config(format!(
            "{} stages declared but the circuit has {}",
            stages.len(),
            heads.len()
        )));
    }
    for (k, &c) in consumers.iter().enumerate() {
        if k != last && c != 1 {
            return Err(Error::Unsupported(format!(
                "stage output `{}` is used by {c} stages; only chains and trees decompose",
                gates[heads[k]].id
            )));
        }
    }
    Ok(out)
}

fn check_roles(k: usize, st: &StageSpec, names: &[String], roles: &[InputRole]) -> Result<()> {
    let mut symbolic: Vec<&str> = names
        .iter()
        .zip(roles)
        .filter(|(_, r)| **r == InputRole::Symbolic)
        .map(|(n, _)| n.as_str())
        .collect();
    let mut declared: Vec<&str> = st.symbolic_inputs.iter().map(String::as_str).collect();
    symbolic.sort_unstable();
    declared.sort_unstable();
    if symbolic != declared {
        return Err(Error::Config(format!(
            "stage {k}: declared symbolic inputs {declared:?}, circuit gives {symbolic:?}"
        )));
    }
    let upstream: Vec<&str> = names
        .iter()
        .zip(roles)
        .filter(|(_, r)| matches!(r, InputRole::Upstream { .. }))
        .map(|(n, _)| n.as_str())
        .collect();
    let declared_up: Vec<&str> = st.upstream_input.iter().map(String::as_str).collect();
    if upstream.len() <= 1 && upstream != declared_up {
        return Err(Error::Config(format!(
            "stage {k}: declared upstream input {declared_up:?}, circuit gives {upstream:?}"
        )));
    }
    Ok(())
}

/// Decompose a problem document.
pub fn decompose(problem: &ProblemSpec) -> Result<Vec<Subproblem>> {
    decompose_circuit(&problem.circuit, &problem.function, &problem.stages)
}

/// A distinct output stream, its decoded value and how many grid points
/// produce it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnRow {
    pub bits: Bitstream,
    pub value: Rational,
    pub multiplicity: u64,
}

/// Deduplicated set of streams a stage can emit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SnSet {
    rows: Vec<SnRow>,
}

impl SnSet {
    /// Merge equal streams, keeping first-appearance order.
    pub fn from_streams(streams: impl IntoIterator<Item = (Bitstream, u64)>, encoding: Encoding) -> Self {
        let mut rows: Vec<SnRow> = Vec::new();
        let mut index: HashMap<Bitstream, usize> = HashMap::new();
        for (bits, m) in streams {
            match index.get(&bits) {
                Some(&k) => rows[k].multiplicity += m,
                None => {
                    index.insert(bits.clone(), rows.len());
                    let value = encoding.decode_count(bits.count_ones(), bits.len());
                    rows.push(SnRow {
                        bits,
                        value,
                        multiplicity: m,
                    });
                }
            }
        }
        SnSet { rows }
    }

    /// One row per stream, duplicates kept. Solving against this gives the
    /// same objective as against the merged set.
    pub fn without_dedup(streams: impl IntoIterator<Item = (Bitstream, u64)>, encoding: Encoding) -> Self {
        SnSet {
            rows: streams
                .into_iter()
                .map(|(bits, multiplicity)| SnRow {
                    value: encoding.decode_count(bits.count_ones(), bits.len()),
                    bits,
                    multiplicity,
                })
                .collect(),
        }
    }

    pub fn rows(&self) -> &[SnRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.rows.iter().map(|r| r.multiplicity).sum()
    }

    pub fn multiplicity_of(&self, bits: &Bitstream) -> u64 {
        self.rows.iter().find(|r| &r.bits == bits).map_or(0, |r| r.multiplicity)
    }

    fn source(&self) -> Source {
        Source::Rows(
            self.rows
                .iter()
                .map(|r| (r.bits.clone(), r.value, r.multiplicity as i128))
                .collect(),
        )
    }
}

/// Concrete driver of a stage input.
#[derive(Debug, Clone, Copy)]
pub enum StageInput<'a> {
    Sequence(&'a NumberSequence),
    Set(&'a SnSet),
}

/// Every output stream of `circuit` over its input grid (all comparator
/// levels of sequence inputs, all rows of set inputs), with multiplicity.
pub fn enumerate_outputs(circuit: &CircuitSpec, inputs: &[StageInput<'_>], encoding: Encoding) -> Result<SnSet> {
    if inputs.len() != circuit.inputs().len() {
        return Err(Error::ArityMismatch {
            expected: circuit.inputs().len(),
            got: inputs.len(),
        });
    }
    let options: Vec<Vec<(Bitstream, u64)>> = inputs
        .iter()
        .map(|i| match i {
            StageInput::Sequence(s) => (0..=s.len()).map(|t| Ok((generate(s, t)?, 1))).collect::<Result<Vec<_>>>(),
            StageInput::Set(set) => Ok(set.rows.iter().map(|r| (r.bits.clone(), r.multiplicity)).collect()),
        })
        .collect::<Result<_>>()?;
    let mut raw = Vec::new();
    let mut idx = vec![0usize; options.len()];
    'grid: loop {
        let map: HashMap<String, Bitstream> = circuit
            .inputs()
            .iter()
            .zip(&idx)
            .enumerate()
            .map(|(i, (name, &o))| (name.clone(), options[i][o].0.clone()))
            .collect();
        let m: u64 = idx.iter().enumerate().map(|(i, &o)| options[i][o].1).product();
        raw.push((evaluate(circuit, &map)?, m));
        let mut d = idx.len();
        loop {
            if d == 0 {
                break 'grid;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < options[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(SnSet::from_streams(raw, encoding))
}

/// Count-domain objective of a stage with given sequences, recomputed with
/// the reference simulator: `Σ multiplicity·|popcount − enc(f(values))|`.
pub fn stage_objective(sub: &Subproblem, inputs: &[StageInput<'_>]) -> Result<Rational> {
    let f = sub
        .function
        .as_ref()
        .ok_or_else(|| Error::Config("stage has no function".into()))?;
    let enc = f.encoding();
    let n = match inputs.first() {
        Some(StageInput::Sequence(s)) => s.len(),
        Some(StageInput::Set(s)) => s.rows.first().map_or(0, |r| r.bits.len()),
        None => 0,
    };
    let options: Vec<Vec<(Bitstream, Rational, u64)>> = inputs
        .iter()
        .map(|i| match i {
            StageInput::Sequence(s) => (0..=s.len())
                .map(|t| Ok((generate(s, t)?, enc.decode_count(t, s.len()), 1)))
                .collect::<Result<Vec<_>>>(),
            StageInput::Set(set) => Ok(set.rows.iter().map(|r| (r.bits.clone(), r.value, r.multiplicity)).collect()),
        })
        .collect::<Result<_>>()?;
    let mut total = Rational::from_integer(0);
    let mut idx = vec![0usize; options.len()];
    'grid: loop {
        let map: HashMap<String, Bitstream> = sub
            .circuit
            .inputs()
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), options[i][idx[i]].0.clone()))
            .collect();
        let vals: Vec<Rational> = idx.iter().enumerate().map(|(i, &o)| options[i][o].1).collect();
        let m: u64 = idx.iter().enumerate().map(|(i, &o)| options[i][o].2).product();
        let h = Rational::from_integer(evaluate(&sub.circuit, &map)?.count_ones() as i128);
        total += Rational::from_integer(m as i128) * (h - enc.encode_value(f.eval(&vals)?, n)).abs();
        let mut d = idx.len();
        loop {
            if d == 0 {
                break 'grid;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < options[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(total)
}

/// Synthesize the symbolic sequences of one stage against its upstream
/// set. Targets use each row's achieved value.
pub fn solve_stage(sub: &Subproblem, upstream: Option<&SnSet>, n: usize, opts: &EncodeOptions, cfg: &SolveConfig) -> Result<SynthesisResult> {
    let start = Instant::now();
    let f = sub
        .function
        .as_ref()
        .ok_or_else(|| Error::Config("stage has no function; declare stages in the problem document".into()))?;
    let ups = sub.upstream();
    if ups.len() > 1 {
        return Err(Error::Unsupported(format!(
            "stage `{}` has {} upstream inputs; at most one is supported",
            sub.output,
            ups.len()
        )));
    }
    if !sub.roles.iter().any(|r| *r == InputRole::Symbolic) {
        return Err(Error::Config(format!("stage `{}` has no symbolic input", sub.output)));
    }
    if ups.len() == 1 && upstream.map_or(true, SnSet::is_empty) {
        return Err(Error::Config(format!("stage `{}` needs a nonempty upstream set", sub.output)));
    }
    let fix_first = opts.fixes_first(&sub.circuit) && ups.is_empty();
    let sources: Vec<Source> = sub
        .roles
        .iter()
        .enumerate()
        .map(|(i, r)| match r {
            InputRole::Symbolic if i == 0 && fix_first => Source::Fixed(opts.fix_first_sequence.clone().expect("fixed")),
            InputRole::Symbolic => Source::Symbolic,
            InputRole::Fixed(s) => Source::Fixed(s.clone()),
            InputRole::Upstream { .. } => upstream.expect("checked").source(),
        })
        .collect();
    let mut model = CostModel::new(&sub.circuit, f, n, sources)?;
    let found = optimize(&mut model, cfg)?;
    let objective = model.to_counts(found.cost);
    let lower_bound = model.to_counts(found.lower);
    let (status, gap_achieved) = classify(objective, lower_bound, cfg.gap);
    let sequences = model.full_sequences(&found.symbolic);

    // Independent re-derivation.
    let mut seq_iter = sequences.iter();
    let inputs: Vec<StageInput<'_>> = sub
        .roles
        .iter()
        .map(|r| match r {
            InputRole::Upstream { .. } => StageInput::Set(upstream.expect("checked")),
            _ => StageInput::Sequence(seq_iter.next().expect("one sequence per input")),
        })
        .collect();
    let check = stage_objective(sub, &inputs)?;
    if check != objective {
        return Err(Error::Consistency(format!(
            "stage objective {objective} but the simulator gives {check}"
        )));
    }
    Ok(SynthesisResult {
        objective,
        lower_bound,
        status,
        gap_achieved,
        avg_abs_error: objective * f.encoding().count_scale(n) / Rational::from_integer(model.total_weight),
        mode: found.mode,
        sequences,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// Per-stage results and the end-to-end accuracy of the assembled
/// sequences on the original circuit.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub stages: Vec<SynthesisResult>,
    pub outputs: Vec<SnSet>,
    /// One sequence per circuit input, in input order.
    pub sequences: Vec<NumberSequence>,
    pub end_to_end: VerifyReport,
}

/// Solve all stages in order, feeding each stage's output set downstream.
pub fn pipeline(problem: &ProblemSpec, n: usize, opts: &EncodeOptions, cfg: &SolveConfig) -> Result<PipelineResult> {
    let subs = decompose(problem)?;
    let enc = problem.function.encoding();
    let mut stages: Vec<SynthesisResult> = Vec::new();
    let mut outputs: Vec<SnSet> = Vec::new();
    let mut assigned: HashMap<String, NumberSequence> = HashMap::new();
    for sub in &subs {
        let ups = sub.upstream();
        let upstream = ups.first().map(|&k| &outputs[k]);
        let r = solve_stage(sub, upstream, n, opts, cfg)?;
        let mut seq_iter = r.sequences.iter();
        let mut inputs = Vec::new();
        for (name, role) in sub.circuit.inputs().iter().zip(&sub.roles) {
            match role {
                InputRole::Upstream { stage } => inputs.push(StageInput::Set(&outputs[*stage])),
                _ => {
                    let s = seq_iter.next().expect("sequence per input");
                    assigned.insert(name.clone(), s.clone());
                    inputs.push(StageInput::Sequence(s));
                }
            }
        }
        let set = enumerate_outputs(&sub.circuit, &inputs, enc)?;
        outputs.push(set);
        stages.push(r);
    }
    let sequences: Vec<NumberSequence> = problem
        .circuit
        .inputs()
        .iter()
        .map(|name| {
            assigned
                .get(name)
                .cloned()
                .ok_or_else(|| Error::Consistency(format!("no stage synthesized input `{name}`")))
        })
        .collect::<Result<_>>()?;
    let end_to_end = grid_error(&problem.circuit, &problem.function, &sequences)?;
    Ok(PipelineResult {
        stages,
        outputs,
        sequences,
        end_to_end,
    })
}

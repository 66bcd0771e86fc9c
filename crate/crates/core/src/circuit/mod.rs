//! Hardware specifications (gate netlists), function specifications and the
//! problem document that pairs them.

mod document;
mod eval;
mod function;
pub mod library;
pub(crate) mod program;

pub use document::{parse_spec, ProblemSpec, StageSpec};
pub use eval::{evaluate, trace, CycleTrace};
pub use function::{eval_function, Expr, FunctionSpec};

use crate::sn::Bitstream;
use crate::{Error, Result};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateOp {
    And,
    Or,
    Xor,
    Xnor,
    Not,
    /// `MUX(d0, d1, s)` outputs `d0` where `s` is 1 and `d1` where `s` is 0.
    Mux,
    /// One-cycle delay.
    Dff,
}

impl GateOp {
    pub fn arity(self) -> usize {
        match self {
            GateOp::Not | GateOp::Dff => 1,
            GateOp::Mux => 3,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateOp::And => "AND",
            GateOp::Or => "OR",
            GateOp::Xor => "XOR",
            GateOp::Xnor => "XNOR",
            GateOp::Not => "NOT",
            GateOp::Mux => "MUX",
            GateOp::Dff => "DFF",
        }
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "AND" => GateOp::And,
            "OR" => GateOp::Or,
            "XOR" => GateOp::Xor,
            "XNOR" => GateOp::Xnor,
            "NOT" => GateOp::Not,
            "MUX" => GateOp::Mux,
            "DFF" => GateOp::Dff,
            _ => {
                return Err(Error::UnknownOp {
                    location: crate::error::Location("op".into()),
                    op: s.into(),
                })
            }
        })
    }
}

/// A resolved gate operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    Input(usize),
    Gate(usize),
    /// The circuit's fixed MUX select stream.
    Select,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub id: String,
    pub op: GateOp,
    pub args: Vec<Signal>,
}

/// Unresolved gate declaration, as written in a problem document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateDecl {
    pub id: String,
    pub op: GateOp,
    pub args: Vec<String>,
}

impl GateDecl {
    pub fn new(id: &str, op: GateOp, args: &[&str]) -> Self {
        GateDecl {
            id: id.into(),
            op,
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Gate netlist with named inputs and a single output.
///
/// Gates are stored in topological order. A DFF reads its operand from the
/// previous cycle; its state at cycle 0 is 0, or the operand's last bit
/// when `dff_wraparound` is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitSpec {
    inputs: Vec<String>,
    gates: Vec<Gate>,
    output: usize,
    select_name: Option<String>,
    select_stream: Option<Bitstream>,
    dff_wraparound: bool,
}

pub(crate) fn valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl CircuitSpec {
    /// Resolve names, check arities and sort gates topologically.
    ///
    /// A MUX select operand that names neither an input nor a gate binds to
    /// the circuit's select stream (explicit `select_stream`, or `1010…`).
    /// `locations[i]` labels gate `i` in error messages.
    pub fn new(
        inputs: Vec<String>,
        decls: Vec<GateDecl>,
        output: &str,
        select_stream: Option<Bitstream>,
    ) -> Result<Self> {
        let locations = (0..decls.len()).map(|i| format!("gates[{i}]")).collect::<Vec<_>>();
        Self::with_locations(inputs, decls, &locations, output, select_stream)
    }

    pub(crate) fn with_locations(
        inputs: Vec<String>,
        decls: Vec<GateDecl>,
        locations: &[String],
        output: &str,
        select_stream: Option<Bitstream>,
    ) -> Result<Self> {
        let mut names: HashMap<&str, Signal> = HashMap::new();
        for (i, name) in inputs.iter().enumerate() {
            if !valid_ident(name) {
                return Err(Error::schema(format!("inputs[{i}]"), format!("invalid name `{name}`")));
            }
            if names.insert(name, Signal::Input(i)).is_some() {
                return Err(Error::schema(format!("inputs[{i}]"), format!("duplicate name `{name}`")));
            }
        }
        for (i, g) in decls.iter().enumerate() {
            let loc = &locations[i];
            if !valid_ident(&g.id) {
                return Err(Error::schema(format!("{loc}.id"), format!("invalid id `{}`", g.id)));
            }
            if names.insert(&g.id, Signal::Gate(i)).is_some() {
                return Err(Error::schema(format!("{loc}.id"), format!("duplicate id `{}`", g.id)));
            }
            if g.args.len() != g.op.arity() {
                return Err(Error::Arity {
                    location: crate::error::Location(format!("{loc}.args")),
                    op: g.op.name().into(),
                    expected: g.op.arity(),
                    got: g.args.len(),
                });
            }
        }

        let mut select_name: Option<String> = None;
        let mut resolved: Vec<Vec<Signal>> = Vec::with_capacity(decls.len());
        for (i, g) in decls.iter().enumerate() {
            let mut args = Vec::with_capacity(g.args.len());
            for (k, a) in g.args.iter().enumerate() {
                let sig = match names.get(a.as_str()) {
                    Some(s) => *s,
                    None if g.op == GateOp::Mux && k == 2 && valid_ident(a) => {
                        match &select_name {
                            Some(existing) if existing != a => {
                                return Err(Error::schema(
                                    format!("{}.args[2]", locations[i]),
                                    format!("second select stream `{a}` (already using `{existing}`)"),
                                ))
                            }
                            _ => select_name = Some(a.clone()),
                        }
                        Signal::Select
                    }
                    None => {
                        return Err(Error::schema(
                            format!("{}.args[{k}]", locations[i]),
                            format!("unknown signal `{a}`"),
                        ))
                    }
                };
                args.push(sig);
            }
            resolved.push(args);
        }
        if select_stream.is_some() && select_name.is_none() {
            return Err(Error::schema("select_stream", "given but no MUX uses a select stream"));
        }

        // Kahn's algorithm, always taking the earliest-declared ready gate.
        let n = decls.len();
        let mut indegree = vec![0usize; n];
        let mut users: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, args) in resolved.iter().enumerate() {
            for a in args {
                if let Signal::Gate(j) = a {
                    indegree[i] += 1;
                    users[*j].push(i);
                }
            }
        }
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &u in &users[i] {
                indegree[u] -= 1;
                if indegree[u] == 0 {
                    ready.insert(u);
                }
            }
        }
        if order.len() < n {
            let stuck: Vec<&str> = (0..n).filter(|&i| indegree[i] > 0).map(|i| decls[i].id.as_str()).collect();
            return Err(Error::Cycle(stuck.join(", ")));
        }
        let mut position = vec![0usize; n];
        for (pos, &i) in order.iter().enumerate() {
            position[i] = pos;
        }
        let gates = order
            .iter()
            .map(|&i| Gate {
                id: decls[i].id.clone(),
                op: decls[i].op,
                args: resolved[i]
                    .iter()
                    .map(|s| match s {
                        Signal::Gate(j) => Signal::Gate(position[*j]),
                        other => *other,
                    })
                    .collect(),
            })
            .collect::<Vec<_>>();

        let output = match names.get(output) {
            Some(Signal::Gate(j)) => position[*j],
            Some(_) => return Err(Error::schema("output", format!("`{output}` is an input, not a gate"))),
            None => return Err(Error::schema("output", format!("unknown gate `{output}`"))),
        };
        Ok(CircuitSpec {
            inputs,
            gates,
            output,
            select_name,
            select_stream,
            dff_wraparound: false,
        })
    }

    pub fn with_dff_wraparound(mut self, wrap: bool) -> Self {
        self.dff_wraparound = wrap;
        self
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn output_gate(&self) -> &Gate {
        &self.gates[self.output]
    }

    pub fn dff_wraparound(&self) -> bool {
        self.dff_wraparound
    }

    pub fn select_name(&self) -> Option<&str> {
        self.select_name.as_deref()
    }

    pub fn uses_select(&self) -> bool {
        self.select_name.is_some()
    }

    pub fn explicit_select_stream(&self) -> Option<&Bitstream> {
        self.select_stream.as_ref()
    }

    /// Select stream at length `n`: the explicit one, or `1010…`.
    pub fn select_for(&self, n: usize) -> Result<Bitstream> {
        match &self.select_stream {
            Some(s) if s.len() != n => Err(Error::LengthMismatch {
                expected: n,
                got: s.len(),
            }),
            Some(s) => Ok(s.clone()),
            None => Ok(Bitstream::alternating(n)),
        }
    }

    /// No state elements.
    pub fn is_combinational(&self) -> bool {
        self.gates.iter().all(|g| g.op != GateOp::Dff)
    }

    pub fn gate_index(&self, id: &str) -> Option<usize> {
        self.gates.iter().position(|g| g.id == id)
    }

    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|i| i == name)
    }

    pub fn signal_name(&self, s: Signal) -> &str {
        match s {
            Signal::Input(i) => &self.inputs[i],
            Signal::Gate(g) => &self.gates[g].id,
            Signal::Select => self.select_name.as_deref().unwrap_or("select"),
        }
    }

    /// Gate declarations in topological order (round-trips through `new`).
    pub fn decls(&self) -> Vec<GateDecl> {
        self.gates
            .iter()
            .map(|g| GateDecl {
                id: g.id.clone(),
                op: g.op,
                args: g.args.iter().map(|a| self.signal_name(*a).to_string()).collect(),
            })
            .collect()
    }
}

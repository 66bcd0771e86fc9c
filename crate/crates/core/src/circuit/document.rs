use super::{CircuitSpec, FunctionSpec, GateDecl, GateOp};
use crate::error::Location;
use crate::sn::{Bitstream, Encoding};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// A validated problem document: circuit `h`, function `f`, length `n`,
/// and optional per-stage functions for decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemSpec {
    pub name: Option<String>,
    pub n: usize,
    pub encoding: Encoding,
    pub circuit: CircuitSpec,
    pub function: FunctionSpec,
    pub stages: Vec<StageSpec>,
}

/// One two-input stage of a decomposed circuit, as declared in a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSpec {
    /// Stage function over the stage's operand names.
    pub function: String,
    pub symbolic_inputs: Vec<String>,
    pub upstream_input: Option<String>,
}

impl ProblemSpec {
    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("circuit")
    }

    /// Same problem at another stream length. Fails if an explicit select
    /// stream or the function's range does not fit `n`.
    pub fn with_n(&self, n: usize) -> Result<ProblemSpec> {
        if n < 1 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.circuit.uses_select() {
            self.circuit.select_for(n)?;
        }
        self.function.check_range(n)?;
        Ok(ProblemSpec { n, ..self.clone() })
    }

    /// Load and validate a problem document from disk.
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<ProblemSpec> {
        parse_spec(&std::fs::read_to_string(path)?)
    }

    /// JSON document that parses back to an equivalent problem.
    pub fn to_document(&self) -> String {
        let doc = Document {
            name: self.name.clone(),
            n: self.n,
            encoding: self.encoding,
            inputs: self.circuit.inputs().to_vec(),
            gates: self
                .circuit
                .decls()
                .into_iter()
                .map(|d| GateDoc {
                    id: d.id,
                    op: d.op.name().into(),
                    args: d.args,
                })
                .collect(),
            output: Some(self.circuit.output_gate().id.clone()),
            function: self.function.source().into(),
            select_stream: self.circuit.explicit_select_stream().map(|s| s.to_string()),
            dff_wraparound: self.circuit.dff_wraparound(),
            stages: self
                .stages
                .iter()
                .map(|s| StageDoc {
                    gates: Vec::new(),
                    function: s.function.clone(),
                    symbolic_inputs: s.symbolic_inputs.clone(),
                    upstream_input: s.upstream_input.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("document serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateDoc {
    id: String,
    op: String,
    args: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    gates: Vec<GateDoc>,
    function: String,
    #[serde(default)]
    symbolic_inputs: Vec<String>,
    #[serde(default)]
    upstream_input: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    n: usize,
    encoding: Encoding,
    inputs: Vec<String>,
    #[serde(default)]
    gates: Vec<GateDoc>,
    #[serde(default)]
    output: Option<String>,
    function: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    select_stream: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    dff_wraparound: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    stages: Vec<StageDoc>,
}

fn to_decl(g: &GateDoc, loc: &str) -> Result<GateDecl> {
    let op: GateOp = g.op.parse().map_err(|_| Error::UnknownOp {
        location: Location(format!("{loc}.op")),
        op: g.op.clone(),
    })?;
    Ok(GateDecl {
        id: g.id.clone(),
        op,
        args: g.args.clone(),
    })
}

/// Parse and validate a JSON problem document.
///
/// ```json
/// {"n": 16, "encoding": "unipolar", "inputs": ["X", "Y"],
///  "gates": [{"id": "Z", "op": "AND", "args": ["X", "Y"]}],
///  "output": "Z", "function": "product"}
/// ```
///
/// Optional keys: `name`, `select_stream` (bit string, index 0 first),
/// `dff_wraparound`, and `stages` (ordered list of
/// `{gates, function, symbolic_inputs, upstream_input}`; stage gates are
/// appended to the top-level gates).
pub fn parse_spec(document: &str) -> Result<ProblemSpec> {
    let doc: Document = serde_json::from_str(document)
        .map_err(|e| Error::schema(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    if doc.n < 1 {
        return Err(Error::schema("n", "must be positive"));
    }
    if doc.inputs.is_empty() {
        return Err(Error::schema("inputs", "at least one input is required"));
    }

    let mut decls = Vec::new();
    let mut locations = Vec::new();
    for (i, g) in doc.gates.iter().enumerate() {
        let loc = format!("gates[{i}]");
        decls.push(to_decl(g, &loc)?);
        locations.push(loc);
    }
    for (k, st) in doc.stages.iter().enumerate() {
        for (i, g) in st.gates.iter().enumerate() {
            let loc = format!("stages[{k}].gates[{i}]");
            decls.push(to_decl(g, &loc)?);
            locations.push(loc);
        }
    }
    if decls.is_empty() {
        return Err(Error::schema("gates", "at least one gate is required"));
    }
    let output = match &doc.output {
        Some(o) => o.clone(),
        None if !doc.stages.is_empty() => decls.last().map(|d| d.id.clone()).unwrap_or_default(),
        None => return Err(Error::schema("output", "missing")),
    };
    let select = match &doc.select_stream {
        Some(s) => {
            let bs = s.parse::<Bitstream>().map_err(|e| Error::schema("select_stream", e.to_string()))?;
            if bs.len() != doc.n {
                return Err(Error::schema(
                    "select_stream",
                    format!("length {} does not match n = {}", bs.len(), doc.n),
                ));
            }
            Some(bs)
        }
        None => None,
    };
    let circuit = CircuitSpec::with_locations(doc.inputs.clone(), decls, &locations, &output, select)?
        .with_dff_wraparound(doc.dff_wraparound);

    let function = FunctionSpec::parse(&doc.function, &doc.inputs, doc.encoding).map_err(|e| match e {
        Error::Expression { offset, message } => {
            Error::schema("function", format!("offset {offset}: {message}"))
        }
        other => Error::schema("function", other.to_string()),
    })?;
    function
        .check_range(doc.n)
        .map_err(|e| Error::schema("function", e.to_string()))?;

    let stages = doc
        .stages
        .iter()
        .map(|s| StageSpec {
            function: s.function.clone(),
            symbolic_inputs: s.symbolic_inputs.clone(),
            upstream_input: s.upstream_input.clone(),
        })
        .collect();

    Ok(ProblemSpec {
        name: doc.name,
        n: doc.n,
        encoding: doc.encoding,
        circuit,
        function,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::library;

    const MULTIPLIER: &str = r#"{"n": 16, "encoding": "unipolar", "inputs": ["X", "Y"],
        "gates": [{"id": "Z", "op": "AND", "args": ["X", "Y"]}],
        "output": "Z", "function": "product"}"#;

    #[test]
    fn multiplier_document() {
        let p = parse_spec(MULTIPLIER).unwrap();
        assert_eq!(p.n, 16);
        assert_eq!(p.circuit.gates().len(), 1);
        assert_eq!(p.circuit.gates()[0].op, GateOp::And);
        assert_eq!(p.function.source(), "product");
    }

    #[test]
    fn squarer_document_has_one_state_element() {
        let p = parse_spec(
            r#"{"n": 16, "encoding": "unipolar", "inputs": ["X"],
                "gates": [{"id": "W", "op": "DFF", "args": ["X"]},
                          {"id": "Z", "op": "AND", "args": ["X", "W"]}],
                "output": "Z", "function": "X*X"}"#,
        )
        .unwrap();
        let dffs = p.circuit.gates().iter().filter(|g| g.op == GateOp::Dff).count();
        assert_eq!(dffs, 1);
        assert!(!p.circuit.is_combinational());
    }

    #[test]
    fn arity_error_has_location() {
        let doc = MULTIPLIER.replace(r#"["X", "Y"]}"#, r#"["X", "Y", "X"]}"#);
        let err = parse_spec(&doc).unwrap_err();
        assert!(matches!(err, Error::Arity { .. }));
        assert!(err.to_string().starts_with("gates[0].args"), "{err}");
    }

    #[test]
    fn schema_errors() {
        let bad_op = MULTIPLIER.replace("\"AND\"", "\"NAND\"");
        let err = parse_spec(&bad_op).unwrap_err();
        assert!(matches!(err, Error::UnknownOp { .. }), "{err}");
        assert!(err.to_string().contains("gates[0].op"));

        let err = parse_spec(&MULTIPLIER.replace("\"n\": 16", "\"n\": \"x\"")).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");

        let err = parse_spec(&MULTIPLIER.replace("product", "X + Y")).unwrap_err();
        assert!(err.to_string().starts_with("function"), "{err}");

        let err = parse_spec(&MULTIPLIER.replace("\"output\": \"Z\",", "\"colour\": 1,")).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }));
    }

    #[test]
    fn select_stream_length_checked() {
        let doc = r#"{"n": 4, "encoding": "unipolar", "inputs": ["X", "Y"],
            "gates": [{"id": "Z", "op": "MUX", "args": ["X", "Y", "R"]}],
            "output": "Z", "function": "mean", "select_stream": "10"}"#;
        assert!(parse_spec(doc).unwrap_err().to_string().contains("select_stream"));
        let ok = doc.replace("\"10\"", "\"0110\"");
        let p = parse_spec(&ok).unwrap();
        assert_eq!(p.circuit.select_for(4).unwrap().to_string(), "0110");
    }

    #[test]
    fn staged_document() {
        let doc = r#"{"n": 8, "encoding": "unipolar", "inputs": ["A", "B", "C"],
            "function": "min(1, A*B + C)",
            "stages": [
              {"gates": [{"id": "P", "op": "AND", "args": ["A", "B"]}],
               "function": "A*B", "symbolic_inputs": ["A", "B"]},
              {"gates": [{"id": "Z", "op": "OR", "args": ["P", "C"]}],
               "function": "min(1, P + C)", "symbolic_inputs": ["C"], "upstream_input": "P"}
            ]}"#;
        let p = parse_spec(doc).unwrap();
        assert_eq!(p.circuit.output_gate().id, "Z");
        assert_eq!(p.stages.len(), 2);
        assert_eq!(p.stages[1].upstream_input.as_deref(), Some("P"));
    }

    #[test]
    fn documents_round_trip() {
        for p in [library::fma(8), library::adder(Encoding::Bipolar, 16), library::squarer(4)] {
            let back = parse_spec(&p.to_document()).unwrap();
            assert_eq!(back, p);
        }
    }
}

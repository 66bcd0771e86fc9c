//! Ready-made problem specifications for the standard SC arithmetic
//! circuits.

use super::{CircuitSpec, FunctionSpec, GateDecl, GateOp, ProblemSpec, StageSpec};
use crate::sn::Encoding;

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn problem(
    name: &str,
    n: usize,
    encoding: Encoding,
    inputs: &[&str],
    gates: Vec<GateDecl>,
    output: &str,
    function: &str,
) -> ProblemSpec {
    let circuit = CircuitSpec::new(names(inputs), gates, output, None).expect("library circuit");
    let function = FunctionSpec::parse(function, &names(inputs), encoding).expect("library function");
    ProblemSpec {
        name: Some(name.into()),
        n,
        encoding,
        circuit,
        function,
        stages: Vec::new(),
    }
}

/// `f = X·Y`: AND for unipolar, XNOR for bipolar.
pub fn multiplier(encoding: Encoding, n: usize) -> ProblemSpec {
    let op = match encoding {
        Encoding::Unipolar => GateOp::And,
        Encoding::Bipolar => GateOp::Xnor,
    };
    problem("multiplier", n, encoding, &["X", "Y"], vec![GateDecl::new("Z", op, &["X", "Y"])], "Z", "product")
}

/// `f = (X+Y)/2` with `Z = MUX(X, Y, R)`, `R = 1010…`.
pub fn adder(encoding: Encoding, n: usize) -> ProblemSpec {
    problem(
        "adder",
        n,
        encoding,
        &["X", "Y"],
        vec![GateDecl::new("Z", GateOp::Mux, &["X", "Y", "R"])],
        "Z",
        "mean",
    )
}

/// `f = X²` with `W = DFF(X)`, `Z = AND(X, W)`.
pub fn squarer(n: usize) -> ProblemSpec {
    problem(
        "squarer",
        n,
        Encoding::Unipolar,
        &["X"],
        vec![GateDecl::new("W", GateOp::Dff, &["X"]), GateDecl::new("Z", GateOp::And, &["X", "W"])],
        "Z",
        "square",
    )
}

/// `f = min(1, X+Y)` with `Z = OR(X, Y)`.
pub fn saturating_adder(n: usize) -> ProblemSpec {
    problem(
        "saturating_adder",
        n,
        Encoding::Unipolar,
        &["X", "Y"],
        vec![GateDecl::new("Z", GateOp::Or, &["X", "Y"])],
        "Z",
        "saturating_sum",
    )
}

/// Fused multiply-add `min(1, A·B + C)`: `P = AND(A, B)`, `Z = OR(P, C)`,
/// split into a multiplier stage and a saturating-adder stage.
pub fn fma(n: usize) -> ProblemSpec {
    let mut p = problem(
        "fma",
        n,
        Encoding::Unipolar,
        &["A", "B", "C"],
        vec![GateDecl::new("P", GateOp::And, &["A", "B"]), GateDecl::new("Z", GateOp::Or, &["P", "C"])],
        "Z",
        "min(1, A*B + C)",
    );
    p.stages = vec![
        StageSpec {
            function: "A*B".into(),
            symbolic_inputs: names(&["A", "B"]),
            upstream_input: None,
        },
        StageSpec {
            function: "min(1, P + C)".into(),
            symbolic_inputs: names(&["C"]),
            upstream_input: Some("P".into()),
        },
    ];
    p
}

/// Library problem by name: `multiplier`, `adder`, `squarer`,
/// `saturating_adder`, `fma`. Circuits that only exist in one encoding
/// reject the other.
pub fn by_name(name: &str, encoding: Encoding, n: usize) -> crate::Result<ProblemSpec> {
    let unipolar_only = |p: ProblemSpec| {
        if encoding == Encoding::Unipolar {
            Ok(p)
        } else {
            Err(crate::Error::Config(format!("`{name}` is only defined for unipolar encoding")))
        }
    };
    match name {
        "multiplier" => Ok(multiplier(encoding, n)),
        "adder" => Ok(adder(encoding, n)),
        "squarer" => unipolar_only(squarer(n)),
        "saturating_adder" => unipolar_only(saturating_adder(n)),
        "fma" => unipolar_only(fma(n)),
        _ => Err(crate::Error::Config(format!("unknown library circuit `{name}`"))),
    }
}

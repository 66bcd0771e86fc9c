use super::{CircuitSpec, GateOp, Signal};
use crate::sn::Bitstream;
use crate::{Error, Result};
use std::collections::HashMap;

/// Every gate's output stream for one simulation, in gate order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleTrace {
    pub ids: Vec<String>,
    pub streams: Vec<Bitstream>,
}

impl CycleTrace {
    pub fn get(&self, id: &str) -> Option<&Bitstream> {
        self.ids.iter().position(|i| i == id).map(|k| &self.streams[k])
    }
}

/// Simulate the circuit over whole streams, gate by gate.
pub fn trace(circuit: &CircuitSpec, inputs: &HashMap<String, Bitstream>) -> Result<CycleTrace> {
    let streams = circuit
        .inputs()
        .iter()
        .map(|name| inputs.get(name).ok_or_else(|| Error::MissingInput(name.clone())))
        .collect::<Result<Vec<_>>>()?;
    let n = streams.first().map(|s| s.len()).unwrap_or(0);
    for s in &streams {
        if s.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: s.len(),
            });
        }
    }
    let select = if circuit.uses_select() {
        Some(circuit.select_for(n)?)
    } else {
        None
    };
    let mut out: Vec<Bitstream> = Vec::with_capacity(circuit.gates().len());
    for gate in circuit.gates() {
        let arg = |k: usize| -> &Bitstream {
            match gate.args[k] {
                Signal::Input(i) => streams[i],
                Signal::Gate(g) => &out[g],
                Signal::Select => select.as_ref().expect("select stream resolved"),
            }
        };
        let z = match gate.op {
            GateOp::And => arg(0).and(arg(1))?,
            GateOp::Or => arg(0).or(arg(1))?,
            GateOp::Xor => arg(0).xor(arg(1))?,
            GateOp::Xnor => arg(0).xor(arg(1))?.not(),
            GateOp::Not => arg(0).not(),
            GateOp::Mux => {
                let s = arg(2);
                s.and(arg(0))?.or(&s.not().and(arg(1))?)?
            }
            GateOp::Dff => {
                let a = arg(0);
                let first = circuit.dff_wraparound() && n > 0 && a.get(n - 1);
                a.delayed(first)
            }
        };
        out.push(z);
    }
    Ok(CycleTrace {
        ids: circuit.gates().iter().map(|g| g.id.clone()).collect(),
        streams: out,
    })
}

/// Output stream of the circuit for the given input streams.
pub fn evaluate(circuit: &CircuitSpec, inputs: &HashMap<String, Bitstream>) -> Result<Bitstream> {
    let mut t = trace(circuit, inputs)?;
    Ok(t.streams.swap_remove(circuit.output()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::library;
    use crate::sn::{decode, generate, Encoding, NumberSequence};
    use crate::rat;

    fn bs(s: &str) -> Bitstream {
        s.parse().unwrap()
    }

    fn inputs(pairs: &[(&str, Bitstream)]) -> HashMap<String, Bitstream> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn and_gate() {
        let p = library::multiplier(Encoding::Unipolar, 4);
        let z = evaluate(&p.circuit, &inputs(&[("X", bs("1100")), ("Y", bs("1010"))])).unwrap();
        assert_eq!(z.to_string(), "1000");
    }

    #[test]
    fn or_gate_saturates() {
        let p = library::saturating_adder(4);
        let x = generate(&NumberSequence::ramp(4), 2).unwrap();
        let y = generate(&NumberSequence::new(vec![3, 2, 1, 0]).unwrap(), 3).unwrap();
        assert_eq!((x.to_string().as_str(), y.to_string().as_str()), ("1100", "0111"));
        let z = evaluate(&p.circuit, &inputs(&[("X", x), ("Y", y)])).unwrap();
        assert_eq!(z.to_string(), "1111");
        assert_eq!(decode(&z, Encoding::Unipolar), rat(1, 1));
    }

    #[test]
    fn squarer_uses_delayed_copy() {
        let p = library::squarer(4);
        let t = trace(&p.circuit, &inputs(&[("X", bs("1100"))])).unwrap();
        assert_eq!(t.get("W").unwrap().to_string(), "0110");
        assert_eq!(t.get("Z").unwrap().to_string(), "0100");
        assert_eq!(decode(t.get("Z").unwrap(), Encoding::Unipolar), rat(1, 4));

        let wrap = p.circuit.clone().with_dff_wraparound(true);
        let t = trace(&wrap, &inputs(&[("X", bs("1001"))])).unwrap();
        assert_eq!(t.get("W").unwrap().to_string(), "1100");
    }

    #[test]
    fn mux_selects_first_operand_on_one() {
        let p = library::adder(Encoding::Unipolar, 4);
        let z = evaluate(&p.circuit, &inputs(&[("X", bs("1000")), ("Y", bs("1100"))])).unwrap();
        assert_eq!(z.to_string(), "1100");
        assert_eq!(z.count_ones(), 2);
    }

    #[test]
    fn evaluation_errors() {
        let p = library::multiplier(Encoding::Unipolar, 4);
        let err = evaluate(&p.circuit, &inputs(&[("X", bs("1100"))])).unwrap_err();
        assert!(matches!(err, Error::MissingInput(ref s) if s == "Y"));
        let err = evaluate(&p.circuit, &inputs(&[("X", bs("1100")), ("Y", bs("110"))])).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }));
        let a = library::adder(Encoding::Unipolar, 4);
        let err = evaluate(&a.circuit.clone(), &inputs(&[("X", bs("10")), ("Y", bs("11"))]));
        assert!(err.is_ok(), "default select adapts to any length");
    }
}

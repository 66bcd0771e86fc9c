//! Python bindings: problems, synthesis, evaluation and LP export.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use scsynth::bench::sweep_error;
use scsynth::circuit::library;
use scsynth::mip::{build_program, export_lp, EncodeOptions};
use scsynth::sn::{average_scc, baseline_sequence};
use scsynth::{Encoding, GeneratorKind, NumberSequence, ProblemSpec, Rational, SolveConfig, SolveMode, Status};
use std::time::Duration;

fn err(e: scsynth::Error) -> PyErr {
    match e {
        scsynth::Error::Io(_) | scsynth::Error::Consistency(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn f64_of(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn sequences(v: Vec<Vec<usize>>) -> PyResult<Vec<NumberSequence>> {
    v.into_iter().map(|s| NumberSequence::new(s).map_err(err)).collect()
}

/// A circuit, its target function and a stream length.
#[pyclass(name = "Problem", module = "scsynth_py", frozen)]
struct PyProblem {
    inner: ProblemSpec,
}

#[pymethods]
impl PyProblem {
    /// Parse a JSON problem document.
    #[staticmethod]
    fn from_json(document: &str) -> PyResult<Self> {
        Ok(PyProblem {
            inner: scsynth::parse_spec(document).map_err(err)?,
        })
    }

    /// Built-in circuit: multiplier, adder, squarer, saturating_adder, fma.
    #[staticmethod]
    #[pyo3(signature = (name, n, encoding = "unipolar"))]
    fn library(name: &str, n: usize, encoding: &str) -> PyResult<Self> {
        let encoding: Encoding = encoding.parse().map_err(err)?;
        Ok(PyProblem {
            inner: library::by_name(name, encoding, n).map_err(err)?,
        })
    }

    fn with_n(&self, n: usize) -> PyResult<Self> {
        Ok(PyProblem {
            inner: self.inner.with_n(n).map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn inputs(&self) -> Vec<String> {
        self.inner.circuit.inputs().to_vec()
    }

    #[getter]
    fn encoding(&self) -> &'static str {
        self.inner.encoding.as_str()
    }

    fn to_json(&self) -> String {
        self.inner.to_document()
    }

    /// `(avg_abs_error, mse)` over every input combination.
    fn evaluate(&self, sequences_: Vec<Vec<usize>>) -> PyResult<(f64, f64)> {
        let seqs = sequences(sequences_)?;
        let (avg, mse) = sweep_error(&self.inner.circuit, &self.inner.function, &seqs, self.inner.n).map_err(err)?;
        Ok((f64_of(avg), f64_of(mse)))
    }

    /// Exact average error as a `(numerator, denominator)` pair.
    fn evaluate_exact(&self, sequences_: Vec<Vec<usize>>) -> PyResult<(i128, i128)> {
        let seqs = sequences(sequences_)?;
        let (avg, _) = sweep_error(&self.inner.circuit, &self.inner.function, &seqs, self.inner.n).map_err(err)?;
        Ok((*avg.numer(), *avg.denom()))
    }

    /// The mixed-integer program in LP format.
    #[pyo3(signature = (fix_first = true, boundary_rows = false))]
    fn export_lp(&self, fix_first: bool, boundary_rows: bool) -> PyResult<String> {
        let mut opts = EncodeOptions::for_circuit(&self.inner.circuit, self.inner.n);
        if !fix_first {
            opts.fix_first_sequence = None;
        }
        opts.fix_boundary_rows = boundary_rows;
        let sys = build_program(&self.inner.circuit, &self.inner.function, self.inner.n, &opts).map_err(err)?;
        Ok(export_lp(&sys))
    }

    /// Synthesize sequences. `mode` is `exact`, `anneal` or `auto`.
    #[pyo3(signature = (mode = "auto", seed = 0, time = None, gap = 0.0, restarts = 4, steps = None))]
    fn synthesize(
        &self,
        py: Python<'_>,
        mode: &str,
        seed: u64,
        time: Option<f64>,
        gap: f64,
        restarts: usize,
        steps: Option<u64>,
    ) -> PyResult<PySynthesisResult> {
        let mode: SolveMode = mode.parse().map_err(err)?;
        let gap = scsynth::parse_decimal(&gap.to_string()).map_err(PyValueError::new_err)?;
        let time_budget = match time {
            Some(t) if t.is_finite() && t >= 0.0 => Some(Duration::from_secs_f64(t)),
            Some(t) => return Err(PyValueError::new_err(format!("time must be non-negative, got {t}"))),
            None => None,
        };
        let cfg = SolveConfig {
            gap,
            time_budget,
            seed,
            restarts,
            mode,
            anneal_steps: steps,
        };
        let p = &self.inner;
        let opts = EncodeOptions::for_circuit(&p.circuit, p.n);
        let r = py
            .detach(|| scsynth::solve(&p.circuit, &p.function, p.n, &opts, &cfg))
            .map_err(err)?;
        Ok(PySynthesisResult { inner: r })
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(name={:?}, n={}, encoding={}, inputs={:?})",
            self.inner.label(),
            self.inner.n,
            self.inner.encoding,
            self.inner.circuit.inputs()
        )
    }
}

#[pyclass(name = "SynthesisResult", module = "scsynth_py", frozen)]
struct PySynthesisResult {
    inner: scsynth::SynthesisResult,
}

#[pymethods]
impl PySynthesisResult {
    #[getter]
    fn sequences(&self) -> Vec<Vec<usize>> {
        self.inner.sequences.iter().map(|s| s.values().to_vec()).collect()
    }

    /// Count-domain objective.
    #[getter]
    fn objective(&self) -> f64 {
        f64_of(self.inner.objective)
    }

    #[getter]
    fn lower_bound(&self) -> f64 {
        f64_of(self.inner.lower_bound)
    }

    #[getter]
    fn avg_abs_error(&self) -> f64 {
        f64_of(self.inner.avg_abs_error)
    }

    #[getter]
    fn status(&self) -> &'static str {
        match self.inner.status {
            Status::Optimal => "optimal",
            Status::Feasible => "feasible",
            Status::Infeasible => "infeasible",
            Status::Timeout => "timeout",
        }
    }

    #[getter]
    fn elapsed(&self) -> f64 {
        self.inner.elapsed
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "SynthesisResult(status={}, objective={}, avg_abs_error={:.6})",
            self.status(),
            self.inner.objective,
            self.avg_abs_error()
        )
    }
}

/// Baseline generator output: `ramp`, `vdc`, `lfsr`, `halton3`, ...
#[pyfunction]
fn baseline(kind: &str, n: usize) -> PyResult<Vec<usize>> {
    let kind: GeneratorKind = kind.parse().map_err(err)?;
    Ok(baseline_sequence(kind, n).map_err(err)?.into_values())
}

/// Comparator output for `target` as a `0`/`1` string.
#[pyfunction]
fn generate(sequence: Vec<usize>, target: usize) -> PyResult<String> {
    let s = NumberSequence::new(sequence).map_err(err)?;
    Ok(scsynth::sn::generate(&s, target).map_err(err)?.to_string())
}

/// Mean SCC over all target pairs; `None` if every pair is degenerate.
#[pyfunction]
fn scc(x: Vec<usize>, y: Vec<usize>) -> PyResult<Option<f64>> {
    let (x, y) = (NumberSequence::new(x).map_err(err)?, NumberSequence::new(y).map_err(err)?);
    Ok(average_scc(&x, &y).map_err(err)?.map(f64_of))
}

#[pymodule]
fn scsynth_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PySynthesisResult>()?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(scc, m)?)?;
    Ok(())
}

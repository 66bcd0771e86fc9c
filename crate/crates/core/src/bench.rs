//! Exhaustive accuracy sweeps, benchmark suites and CSV/JSON reports.

use crate::circuit::{library, CircuitSpec, FunctionSpec, ProblemSpec};
use crate::decompose::pipeline;
use crate::mip::EncodeOptions;
use crate::sn::{average_scc, baseline_sequence, Encoding, GeneratorKind, NumberSequence};
use crate::solver::{grid_error, solve, SolveConfig, SolveMode, Status};
use crate::{Error, Rational, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

/// Mean absolute error and mean squared error in the value domain over
/// every input combination, exactly.
pub fn sweep_error(circuit: &CircuitSpec, f: &FunctionSpec, sequences: &[NumberSequence], n: usize) -> Result<(Rational, Rational)> {
    if let Some(s) = sequences.iter().find(|s| s.len() != n) {
        return Err(Error::LengthMismatch { expected: n, got: s.len() });
    }
    let r = grid_error(circuit, f, sequences)?;
    Ok((r.avg_abs_error, r.mse))
}

/// One row of a benchmark report.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub n: usize,
    pub circuit: String,
    pub encoding: Encoding,
    pub method: String,
    pub avg_abs_error: Rational,
    pub mse: Rational,
    pub avg_scc: Option<Rational>,
    pub elapsed: f64,
    pub status: Option<Status>,
    pub gap: Option<Rational>,
}

/// How the sequences of a report row are obtained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    /// Native solver on the whole circuit.
    Synthesized,
    /// Stage-wise synthesis (`decompose::pipeline`).
    Decomposed,
    /// One generator per input; a single kind drives every input.
    Baseline(Vec<GeneratorKind>),
    Literal { label: String, sequences: Vec<NumberSequence> },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Synthesized => "synthesized".into(),
            Method::Decomposed => "decomposed".into(),
            Method::Baseline(kinds) => kinds.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("+"),
            Method::Literal { label, .. } => label.clone(),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// `synthesized`, `decomposed`, or generator kinds joined by `+`
    /// (`ramp+vdc`, `lfsr`).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthesized" => Ok(Method::Synthesized),
            "decomposed" => Ok(Method::Decomposed),
            _ => s
                .split('+')
                .map(|k| k.trim().parse::<GeneratorKind>())
                .collect::<Result<Vec<_>>>()
                .map(Method::Baseline)
                .map_err(|_| Error::Config(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum MethodDoc {
    Name(String),
    Literal { label: String, sequences: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CircuitRef {
    Library {
        library: String,
        #[serde(default)]
        encoding: Encoding,
    },
    Spec {
        spec: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverDoc {
    #[serde(default)]
    mode: Option<SolveMode>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    restarts: Option<usize>,
    #[serde(default)]
    time_budget_s: Option<f64>,
    #[serde(default)]
    anneal_steps: Option<u64>,
    #[serde(default)]
    gap: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchDoc {
    #[serde(default)]
    ns: Vec<usize>,
    #[serde(default)]
    circuits: Vec<CircuitRef>,
    #[serde(default)]
    methods: Vec<MethodDoc>,
    #[serde(default)]
    solver: SolverDoc,
}

/// A benchmark suite: every circuit × N × method.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub circuits: Vec<CircuitRef>,
    pub ns: Vec<usize>,
    pub methods: Vec<Method>,
    pub solver: SolveConfig,
    /// Directory that relative spec paths are resolved against.
    pub base_dir: PathBuf,
}

impl BenchConfig {
    /// Parse a JSON suite description:
    ///
    /// ```json
    /// {"ns": [16, 32], "circuits": [{"library": "adder", "encoding": "bipolar"},
    ///   {"spec": "mult.json"}], "methods": ["ramp+ramp", "synthesized",
    ///   {"label": "mine", "sequences": [[0, 1, 2, 3], [1, 3, 0, 2]]}],
    ///  "solver": {"mode": "anneal", "seed": 1, "time_budget_s": 5}}
    /// ```
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let doc: BenchDoc = serde_json::from_str(text)
            .map_err(|e| Error::schema(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        let methods = doc
            .methods
            .into_iter()
            .map(|m| match m {
                MethodDoc::Name(s) => s.parse(),
                MethodDoc::Literal { label, sequences } => Ok(Method::Literal {
                    label,
                    sequences: sequences.into_iter().map(NumberSequence::new).collect::<Result<_>>()?,
                }),
            })
            .collect::<Result<_>>()?;
        let mut solver = SolveConfig::default();
        let s = doc.solver;
        if let Some(m) = s.mode {
            solver.mode = m;
        }
        if let Some(x) = s.seed {
            solver.seed = x;
        }
        if let Some(x) = s.restarts {
            solver.restarts = x;
        }
        if let Some(t) = s.time_budget_s {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::schema("solver.time_budget_s", "must be a nonnegative number"));
            }
            solver.time_budget = Some(Duration::from_secs_f64(t));
        }
        solver.anneal_steps = s.anneal_steps;
        if let Some(g) = s.gap {
            solver.gap = crate::parse_decimal(&g).map_err(|e| Error::schema("solver.gap", e))?;
        }
        solver.validate()?;
        let mut ns = doc.ns;
        ns.sort_unstable();
        ns.dedup();
        if ns.iter().any(|&n| n < 2) {
            return Err(Error::schema("ns", "every n must be at least 2"));
        }
        Ok(BenchConfig {
            circuits: doc.circuits,
            ns,
            methods,
            solver,
            base_dir: base_dir.into(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn problem(&self, c: &CircuitRef, n: usize) -> Result<ProblemSpec> {
        match c {
            CircuitRef::Library { library: name, encoding } => library::by_name(name, *encoding, n),
            CircuitRef::Spec { spec } => ProblemSpec::load(self.base_dir.join(spec))?.with_n(n),
        }
    }
}

fn sequences_for(problem: &ProblemSpec, kinds: &[GeneratorKind], n: usize) -> Result<Vec<NumberSequence>> {
    let k = problem.circuit.inputs().len();
    let kinds: Vec<GeneratorKind> = match kinds.len() {
        1 => vec![kinds[0]; k],
        m if m == k => kinds.to_vec(),
        m => return Err(Error::ArityMismatch { expected: k, got: m }),
    };
    kinds.iter().map(|&kind| baseline_sequence(kind, n)).collect()
}

/// Evaluate one method on one problem.
pub fn run_method(problem: &ProblemSpec, n: usize, method: &Method, solver: &SolveConfig) -> Result<AccuracyReport> {
    let start = Instant::now();
    let (sequences, status, gap) = match method {
        Method::Synthesized => {
            let opts = EncodeOptions::for_circuit(&problem.circuit, n);
            let r = solve(&problem.circuit, &problem.function, n, &opts, solver)?;
            (r.sequences, Some(r.status), r.gap_achieved)
        }
        Method::Decomposed => {
            let opts = EncodeOptions::for_circuit(&problem.circuit, n);
            let r = pipeline(problem, n, &opts, solver)?;
            let status = if r.stages.iter().all(|s| s.status == Status::Optimal) {
                Status::Optimal
            } else {
                Status::Feasible
            };
            (r.sequences, Some(status), None)
        }
        Method::Baseline(kinds) => (sequences_for(problem, kinds, n)?, None, None),
        Method::Literal { sequences, .. } => (sequences.clone(), None, None),
    };
    let (avg, mse) = sweep_error(&problem.circuit, &problem.function, &sequences, n)?;
    let avg_scc = match sequences.as_slice() {
        [a, b, ..] => average_scc(a, b)?,
        _ => None,
    };
    Ok(AccuracyReport {
        n,
        circuit: problem.label().to_string(),
        encoding: problem.function.encoding(),
        method: method.label(),
        avg_abs_error: avg,
        mse,
        avg_scc,
        elapsed: start.elapsed().as_secs_f64(),
        status,
        gap,
    })
}

/// Every circuit × N × method, in that nesting order (N ascending).
pub fn run_benchmark_suite(cfg: &BenchConfig) -> Result<Vec<AccuracyReport>> {
    let mut out = Vec::new();
    for c in &cfg.circuits {
        for &n in &cfg.ns {
            if cfg.methods.is_empty() {
                continue;
            }
            let problem = cfg.problem(c, n)?;
            for m in &cfg.methods {
                out.push(run_method(&problem, n, m, &cfg.solver)?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::Config(format!("unknown report format `{s}`"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 10] = [
    "n", "circuit", "encoding", "method", "avg_abs_err", "mse", "avg_scc", "elapsed_s", "status", "gap",
];

/// Decimal with eight significant digits.
fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (7 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn rat_field(r: &Rational) -> String {
    sig(crate::rat_to_f64(r))
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    n: usize,
    circuit: String,
    encoding: String,
    method: String,
    avg_abs_err: String,
    mse: String,
    avg_scc: String,
    elapsed_s: String,
    status: String,
    gap: String,
}

impl From<&AccuracyReport> for Row {
    fn from(r: &AccuracyReport) -> Self {
        Row {
            n: r.n,
            circuit: r.circuit.clone(),
            encoding: r.encoding.to_string(),
            method: r.method.clone(),
            avg_abs_err: rat_field(&r.avg_abs_error),
            mse: rat_field(&r.mse),
            avg_scc: r.avg_scc.as_ref().map(rat_field).unwrap_or_default(),
            elapsed_s: sig(r.elapsed),
            status: r.status.map(|s| s.to_string()).unwrap_or_default(),
            gap: r.gap.as_ref().map(rat_field).unwrap_or_default(),
        }
    }
}

/// Render reports as CSV (fixed column set, see [`CSV_COLUMNS`]) or as a
/// JSON array with the same keys.
pub fn emit_report(reports: &[AccuracyReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(CSV_COLUMNS).expect("in-memory write");
            for r in reports {
                w.serialize(Row::from(r)).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
        }
        ReportFormat::Json => {
            let rows: Vec<serde_json::Value> = reports
                .iter()
                .map(|r| {
                    let num = |s: String| -> serde_json::Value {
                        if s.is_empty() {
                            serde_json::Value::Null
                        } else {
                            s.parse::<f64>().map(serde_json::Value::from).unwrap_or(serde_json::Value::Null)
                        }
                    };
                    let row = Row::from(r);
                    serde_json::json!({
                        "n": row.n,
                        "circuit": row.circuit,
                        "encoding": row.encoding,
                        "method": row.method,
                        "avg_abs_err": num(row.avg_abs_err),
                        "mse": num(row.mse),
                        "avg_scc": num(row.avg_scc),
                        "elapsed_s": num(row.elapsed_s),
                        "status": if row.status.is_empty() { serde_json::Value::Null } else { row.status.into() },
                        "gap": num(row.gap),
                    })
                })
                .collect();
            serde_json::to_string_pretty(&rows).expect("serializable") + "\n"
        }
    }
}

/// Read back a CSV report. Numbers come back at their printed precision.
pub fn parse_csv(text: &str) -> Result<Vec<AccuracyReport>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let headers = rd.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
        return Err(Error::Parse(format!("unexpected header {headers:?}")));
    }
    let dec = |s: &str, col: &str| -> Result<Option<Rational>> {
        if s.is_empty() {
            return Ok(None);
        }
        crate::parse_decimal(s).map(Some).map_err(|e| Error::Parse(format!("{col}: {e}")))
    };
    rd.deserialize::<Row>()
        .map(|row| {
            let row = row.map_err(|e| Error::Parse(e.to_string()))?;
            Ok(AccuracyReport {
                n: row.n,
                circuit: row.circuit,
                encoding: row.encoding.parse()?,
                method: row.method,
                avg_abs_error: dec(&row.avg_abs_err, "avg_abs_err")?.ok_or_else(|| Error::Parse("avg_abs_err is empty".into()))?,
                mse: dec(&row.mse, "mse")?.ok_or_else(|| Error::Parse("mse is empty".into()))?,
                avg_scc: dec(&row.avg_scc, "avg_scc")?,
                elapsed: row.elapsed_s.parse().map_err(|_| Error::Parse("elapsed_s".into()))?,
                status: match row.status.as_str() {
                    "" => None,
                    "optimal" => Some(Status::Optimal),
                    "feasible" => Some(Status::Feasible),
                    "infeasible" => Some(Status::Infeasible),
                    "timeout" => Some(Status::Timeout),
                    s => return Err(Error::Parse(format!("unknown status `{s}`"))),
                },
                gap: dec(&row.gap, "gap")?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    #[test]
    fn ramp_vdc_multiplier_n4() {
        let p = library::multiplier(Encoding::Unipolar, 4);
        let seqs = [NumberSequence::ramp(4), NumberSequence::new(vec![0, 2, 1, 3]).unwrap()];
        let (avg, _) = sweep_error(&p.circuit, &p.function, &seqs, 4).unwrap();
        assert_eq!(avg, rat(4, 100));
    }

    #[test]
    fn saturating_adder_reverse_ramp_is_exact() {
        for n in [4, 8, 16] {
            let p = library::saturating_adder(n);
            let seqs = [NumberSequence::ramp(n), baseline_sequence(GeneratorKind::ReverseRamp, n).unwrap()];
            assert_eq!(sweep_error(&p.circuit, &p.function, &seqs, n).unwrap().0, rat(0, 1));
        }
    }

    #[test]
    fn methods_parse() {
        assert_eq!("synthesized".parse::<Method>().unwrap(), Method::Synthesized);
        assert_eq!(
            "ramp+vdc".parse::<Method>().unwrap(),
            Method::Baseline(vec![GeneratorKind::Ramp, GeneratorKind::Vdc])
        );
        assert!("magic".parse::<Method>().is_err());
        assert_eq!("ramp+vdc".parse::<Method>().unwrap().label(), "ramp+vdc");
    }

    #[test]
    fn empty_suite() {
        let cfg = BenchConfig::parse(r#"{"ns": [16], "circuits": [{"library": "adder"}], "methods": []}"#, ".").unwrap();
        assert!(run_benchmark_suite(&cfg).unwrap().is_empty());
        let csv = emit_report(&[], ReportFormat::Csv);
        assert_eq!(csv.trim(), CSV_COLUMNS.join(","));
        assert!(BenchConfig::parse(r#"{"methods": ["nope"]}"#, ".").is_err());
    }

    #[test]
    fn adder_suite_rows_and_round_trip() {
        let cfg = BenchConfig::parse(
            r#"{"ns": [32, 16], "circuits": [{"library": "adder", "encoding": "bipolar"}], "methods": ["ramp+ramp"]}"#,
            ".",
        )
        .unwrap();
        let reports = run_benchmark_suite(&cfg).unwrap();
        assert_eq!(reports.iter().map(|r| r.n).collect::<Vec<_>>(), vec![16, 32]);
        let csv = emit_report(&reports, ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 3);
        let back = parse_csv(&csv).unwrap();
        assert_eq!(emit_report(&back, ReportFormat::Csv), csv);
        let json: serde_json::Value = serde_json::from_str(&emit_report(&reports, ReportFormat::Json)).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 2);
        assert_eq!(json[0]["method"], "ramp+ramp");
    }

    #[test]
    fn significant_digits() {
        assert_eq!(sig(0.015570934256), "0.015570934");
        assert_eq!(sig(0.5), "0.50000000");
        assert_eq!(sig(123.456), "123.45600");
        assert_eq!(sig(0.0), "0");
    }
}

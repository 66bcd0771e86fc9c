//! `scsynth`: synthesize, evaluate, export and benchmark number sequences
//! for stochastic-computing circuits.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 infeasible solution
//! or solver timeout.

use clap::{Args, Parser, Subcommand, ValueEnum};
use scsynth::bench::{emit_report, run_benchmark_suite, run_method, BenchConfig, Method, ReportFormat};
use scsynth::circuit::library;
use scsynth::mip::{build_program, export_lp, import_solution, parse_solution, EncodeOptions};
use scsynth::solver::verify;
use scsynth::{
    parse_decimal, solve, Encoding, Error, NumberSequence, ProblemSpec, SolveConfig, SolveMode, Status, SynthesisResult,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

#[derive(Parser)]
#[command(name = "scsynth", version, about = "Number-sequence synthesis for stochastic-computing circuits")]
struct Cli {
    /// Worker threads for parallel search (default: all cores)
    #[arg(long, global = true, env = "SCSYNTH_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize optimal sequences for a circuit
    Synth {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the result JSON here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive accuracy sweep of given sequences
    Eval {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Sequence file (JSON array, synth result, or one sequence per
        /// line) or generator kinds such as `ramp+vdc`
        #[arg(long)]
        sequences: String,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the mixed-integer program in LP format
    Export {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Replace rows 0 and N of every matrix by constants
        #[arg(long)]
        boundary_rows: bool,
        /// Declare gate variables binary
        #[arg(long)]
        strict: bool,
        /// Make the MUX select stream a decision variable
        #[arg(long)]
        symbolic_select: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify an external solver's solution and recover the sequences
    Import {
        #[command(flatten)]
        problem: ProblemArgs,
        /// `name value` per line, as written by common MIP solvers
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        boundary_rows: bool,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        symbolic_select: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark configuration and print a report
    Bench {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ProblemArgs {
    /// Problem document (JSON), or `lib:NAME[:ENCODING]` for a built-in
    /// circuit (multiplier, adder, squarer, saturating_adder, fma)
    spec: String,
    /// Stream length; defaults to the document's `n`
    #[arg(long)]
    n: Option<usize>,
    /// First sequence fixed for two-input combinational circuits: `ramp`,
    /// `none`, or a comma-separated permutation
    #[arg(long, default_value = "ramp")]
    fix_first: String,
    /// DFF state at cycle 0 is the last bit instead of 0
    #[arg(long)]
    wrap: bool,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    mode: Mode,
    /// Relative optimality gap, e.g. 0.05
    #[arg(long, default_value = "0")]
    gap: String,
    /// Time budget in seconds
    #[arg(long)]
    time: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    /// Annealing steps per restart; overrides the time-derived count
    #[arg(long)]
    steps: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Anneal,
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn load_problem(args: &ProblemArgs) -> Result<ProblemSpec, Failure> {
    let problem = if let Some(rest) = args.spec.strip_prefix("lib:") {
        let mut parts = rest.splitn(2, ':');
        let name = parts.next().unwrap_or_default();
        let encoding: Encoding = parts.next().unwrap_or("unipolar").parse()?;
        library::by_name(name, encoding, args.n.unwrap_or(16))?
    } else {
        ProblemSpec::load(&args.spec).map_err(|e| usage(format!("{}: {e}", args.spec)))?
    };
    let problem = match args.n {
        Some(n) => problem.with_n(n)?,
        None => problem,
    };
    if args.wrap {
        return Ok(ProblemSpec {
            circuit: problem.circuit.clone().with_dff_wraparound(true),
            ..problem
        });
    }
    Ok(problem)
}

fn encode_options(args: &ProblemArgs, n: usize) -> Result<EncodeOptions, Failure> {
    let mut opts = EncodeOptions::new(n);
    opts.dff_wraparound = args.wrap;
    opts.fix_first_sequence = match args.fix_first.as_str() {
        "ramp" => Some(NumberSequence::ramp(n)),
        "none" => None,
        list => Some(parse_sequence(list)?),
    };
    Ok(opts)
}

fn parse_sequence(text: &str) -> Result<NumberSequence, Failure> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|_| usage(format!("bad sequence entry `{t}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NumberSequence::new(values)?)
}

/// Sequences from a JSON array of arrays, a JSON object with a
/// `sequences` key, or plain text with one sequence per line.
fn read_sequences(path: &Path) -> Result<Vec<NumberSequence>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
        let list = v.get("sequences").cloned().unwrap_or(v);
        let raw: Vec<Vec<usize>> =
            serde_json::from_value(list).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        return raw.into_iter().map(|s| NumberSequence::new(s).map_err(Failure::from)).collect();
    }
    text.lines()
        .map(|l| l.split('#').next().unwrap_or_default().trim())
        .filter(|l| !l.is_empty())
        .map(|l| parse_sequence(l.trim_matches(|c| c == '[' || c == ']')))
        .collect()
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve_config(args: &SolverArgs) -> Result<SolveConfig, Failure> {
    let gap = parse_decimal(&args.gap).map_err(|e| usage(format!("--gap: {e}")))?;
    let time_budget = match args.time {
        Some(t) if t.is_finite() && t >= 0.0 => Some(Duration::from_secs_f64(t)),
        Some(t) => return Err(usage(format!("--time must be a non-negative number of seconds, got {t}"))),
        None => None,
    };
    let cfg = SolveConfig {
        gap,
        time_budget,
        seed: args.seed,
        restarts: args.restarts,
        mode: match args.mode {
            Mode::Exact => SolveMode::Exact,
            Mode::Anneal => SolveMode::Anneal,
            Mode::Auto => SolveMode::Auto,
        },
        anneal_steps: args.steps,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn summary(r: &SynthesisResult) -> String {
    let seqs: Vec<String> = r.sequences.iter().map(|s| s.to_string()).collect();
    format!(
        "status {} ({} mode), objective {} counts, lower bound {}, avg abs error {:.6}, {:.2}s\n  {}",
        r.status,
        r.mode,
        r.objective,
        r.lower_bound,
        *r.avg_abs_error.numer() as f64 / *r.avg_abs_error.denom() as f64,
        r.elapsed,
        seqs.join("\n  ")
    )
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth { problem, solver, out } => {
            let p = load_problem(&problem)?;
            let opts = encode_options(&problem, p.n)?;
            let cfg = solve_config(&solver)?;
            let r = solve(&p.circuit, &p.function, p.n, &opts, &cfg)?;
            write_output(out.as_deref(), &(r.to_json() + "\n"))?;
            eprintln!("{}", summary(&r));
            if matches!(r.status, Status::Infeasible | Status::Timeout) {
                return Err(Failure {
                    code: 2,
                    message: format!("solver finished with status {}", r.status),
                });
            }
        }
        Command::Eval {
            problem,
            sequences,
            format,
            out,
        } => {
            let p = load_problem(&problem)?;
            let method = if Path::new(&sequences).exists() {
                let seqs = read_sequences(Path::new(&sequences))?;
                Method::Literal {
                    label: Path::new(&sequences)
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "sequences".into()),
                    sequences: seqs,
                }
            } else {
                sequences.parse::<Method>()?
            };
            if matches!(method, Method::Synthesized | Method::Decomposed) {
                return Err(usage("eval takes sequences; use `synth` or `bench` to synthesize"));
            }
            let report = run_method(&p, p.n, &method, &SolveConfig::default())?;
            write_output(out.as_deref(), &emit_report(&[report], format.into()))?;
        }
        Command::Export {
            problem,
            boundary_rows,
            strict,
            symbolic_select,
            out,
        } => {
            let p = load_problem(&problem)?;
            let mut opts = encode_options(&problem, p.n)?;
            opts.fix_boundary_rows = boundary_rows;
            opts.strict_binary_gates = strict;
            opts.symbolic_select = symbolic_select;
            let sys = build_program(&p.circuit, &p.function, p.n, &opts)?;
            write_output(Some(&out), &export_lp(&sys))?;
            eprintln!(
                "wrote {} ({} variables, {} constraints)",
                out.display(),
                sys.variables().len(),
                sys.constraints().len()
            );
        }
        Command::Import {
            problem,
            solution,
            boundary_rows,
            strict,
            symbolic_select,
            out,
        } => {
            let start = Instant::now();
            let p = load_problem(&problem)?;
            let mut opts = encode_options(&problem, p.n)?;
            opts.fix_boundary_rows = boundary_rows;
            opts.strict_binary_gates = strict;
            opts.symbolic_select = symbolic_select;
            let sys = build_program(&p.circuit, &p.function, p.n, &opts)?;
            let text = std::fs::read_to_string(&solution).map_err(|e| usage(format!("{}: {e}", solution.display())))?;
            let v = import_solution(&sys, &parse_solution(&text)?)?;
            let sequences = v
                .sequences
                .ok_or_else(|| usage("the model has no synthesis layout"))?;
            let report = scsynth::solver::grid_error(&p.circuit, &p.function, &sequences)?;
            let r = SynthesisResult {
                sequences,
                objective: v.objective,
                lower_bound: scsynth::solver::lower_bound(&p.circuit, &p.function, p.n)?,
                status: Status::Feasible,
                gap_achieved: None,
                avg_abs_error: report.avg_abs_error,
                mode: SolveMode::Exact,
                elapsed: start.elapsed().as_secs_f64(),
            };
            verify(&r, &p.circuit, &p.function, p.n)?;
            write_output(out.as_deref(), &(r.to_json() + "\n"))?;
            eprintln!("{}", summary(&r));
        }
        Command::Bench { config, format, out } => {
            let cfg = BenchConfig::load(&config).map_err(|e| usage(format!("{}: {e}", config.display())))?;
            let reports = run_benchmark_suite(&cfg)?;
            write_output(out.as_deref(), &emit_report(&reports, format.into()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

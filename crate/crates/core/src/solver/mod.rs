//! Native optimization over permutation space.
//!
//! With value and monotonicity constraints every symbolic SN matrix is
//! the comparator image of exactly one permutation, so the solver searches
//! permutations directly: exact branch-and-bound for small N, simulated
//! annealing otherwise. Every returned objective is re-derived with the
//! reference simulator before it is handed out.

pub(crate) mod model;
mod search;

use crate::circuit::{evaluate, CircuitSpec, FunctionSpec};
use crate::mip::EncodeOptions;
use crate::sn::{baseline_sequence, generate, Bitstream, GeneratorKind, NumberSequence};
use crate::{Error, Rational, Result};
use model::{CostModel, Source};
use num_traits::Signed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

pub use search::{ALPHA, T_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    Exact,
    Anneal,
    #[default]
    Auto,
}

impl fmt::Display for SolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMode::Exact => "exact",
            SolveMode::Anneal => "anneal",
            SolveMode::Auto => "auto",
        })
    }
}

impl FromStr for SolveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SolveMode::Exact),
            "anneal" => Ok(SolveMode::Anneal),
            "auto" => Ok(SolveMode::Auto),
            _ => Err(Error::Config(format!("unknown mode `{s}` (expected exact, anneal or auto)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    Timeout,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Feasible => "feasible",
            Status::Infeasible => "infeasible",
            Status::Timeout => "timeout",
        })
    }
}

/// Annealing cell evaluations per second of budget, summed over restarts.
/// Turns the time budget into a fixed step count, so results do not
/// depend on machine load or thread count.
pub const ANNEAL_WORK_PER_SECOND: f64 = 1.5e7;

/// Schedule length per restart is capped at this many steps per N²;
/// longer schedules stopped paying off in calibration runs.
pub const ANNEAL_STEPS_PER_N2: u64 = 400;

/// Budget assumed for annealing when none is given.
pub const DEFAULT_ANNEAL_BUDGET: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveConfig {
    /// Relative optimality gap `g`: a solution within `lb·(1+g)` counts
    /// as optimal.
    pub gap: Rational,
    /// Exact mode stops at this wall-clock limit; anneal mode derives its
    /// step count from it.
    pub time_budget: Option<Duration>,
    pub seed: u64,
    pub restarts: usize,
    pub mode: SolveMode,
    /// Explicit annealing step count per restart; overrides `time_budget`.
    pub anneal_steps: Option<u64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            gap: Rational::from_integer(0),
            time_budget: None,
            seed: 0,
            restarts: 4,
            mode: SolveMode::Auto,
            anneal_steps: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gap < Rational::from_integer(0) || self.gap > Rational::from_integer(1) {
            return Err(Error::Config(format!("gap must lie in [0, 1], got {}", self.gap)));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        Ok(())
    }

    /// Annealing steps per restart for a model with `cells` grid cells.
    pub fn steps_for(&self, n: usize, cells: usize) -> u64 {
        if let Some(s) = self.anneal_steps {
            return s;
        }
        let budget = self.time_budget.unwrap_or(DEFAULT_ANNEAL_BUDGET).as_secs_f64();
        let per_step = cells as f64 / 3.0 + 1.0;
        let from_budget = (budget * ANNEAL_WORK_PER_SECOND / (per_step * self.restarts as f64)) as u64;
        from_budget.clamp(1_000, ANNEAL_STEPS_PER_N2 * (n * n) as u64)
    }
}

mod rational_str {
    use crate::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
            match r {
                Some(r) => s.serialize_some(&r.to_string()),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|s| s.parse().map_err(serde::de::Error::custom))
                .transpose()
        }
    }
}

/// Outcome of a synthesis run. Objectives are in the count domain:
/// `Σ weight·|popcount − enc(f)|` over the input grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    /// One sequence per circuit input that is driven by a sequence
    /// (fixed inputs included), in input order.
    pub sequences: Vec<NumberSequence>,
    #[serde(with = "rational_str")]
    pub objective: Rational,
    #[serde(with = "rational_str")]
    pub lower_bound: Rational,
    pub status: Status,
    #[serde(rename = "gap", with = "rational_str::option")]
    pub gap_achieved: Option<Rational>,
    /// Mean absolute error in the value domain.
    #[serde(with = "rational_str")]
    pub avg_abs_error: Rational,
    pub mode: SolveMode,
    /// Wall-clock seconds; the only field that varies between identical
    /// runs.
    #[serde(rename = "elapsed_s")]
    pub elapsed: f64,
}

impl SynthesisResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    /// Equal up to `elapsed`.
    pub fn same_solution(&self, other: &SynthesisResult) -> bool {
        SynthesisResult {
            elapsed: 0.0,
            ..self.clone()
        } == SynthesisResult {
            elapsed: 0.0,
            ..other.clone()
        }
    }
}

/// `Σ dist(enc(f(dec n, dec m)), ℤ)` over the whole input grid: a lower
/// bound on every objective, since popcounts are integers.
pub fn lower_bound(circuit: &CircuitSpec, f: &FunctionSpec, n: usize) -> Result<Rational> {
    let k = circuit.inputs().len();
    if f.arity() != k {
        return Err(Error::ArityMismatch { expected: k, got: f.arity() });
    }
    let enc = f.encoding();
    let levels: Vec<Rational> = (0..=n).map(|t| enc.decode_count(t, n)).collect();
    let mut total = Rational::from_integer(0);
    let mut idx = vec![0usize; k];
    loop {
        let vals: Vec<Rational> = idx.iter().map(|&i| levels[i]).collect();
        let t = enc.encode_value(f.eval(&vals)?, n);
        let frac = t - t.floor();
        total += frac.min(Rational::from_integer(1) - frac);
        let mut d = 0;
        loop {
            if d == k {
                return Ok(total);
            }
            idx[d] += 1;
            if idx[d] <= n {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Objective recomputed with the reference simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub objective: Rational,
    pub avg_abs_error: Rational,
    pub mse: Rational,
}

/// Exhaustive count- and value-domain error of `sequences` (one per
/// input) using `circuit::evaluate`.
pub fn grid_error(circuit: &CircuitSpec, f: &FunctionSpec, sequences: &[NumberSequence]) -> Result<VerifyReport> {
    let k = circuit.inputs().len();
    if sequences.len() != k {
        return Err(Error::ArityMismatch { expected: k, got: sequences.len() });
    }
    let n = sequences.first().map(|s| s.len()).unwrap_or(0);
    let enc = f.encoding();
    let streams: Vec<Vec<Bitstream>> = sequences
        .iter()
        .map(|s| (0..=n).map(|t| generate(s, t)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let mut objective = Rational::from_integer(0);
    let mut sq = Rational::from_integer(0);
    let mut cells = 0i128;
    let mut idx = vec![0usize; k];
    let scale = enc.count_scale(n);
    'outer: loop {
        let inputs: HashMap<String, Bitstream> = circuit
            .inputs()
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), streams[i][idx[i]].clone()))
            .collect();
        let out = evaluate(circuit, &inputs)?;
        let vals: Vec<Rational> = idx.iter().map(|&i| enc.decode_count(i, n)).collect();
        let err = (Rational::from_integer(out.count_ones() as i128) - enc.encode_value(f.eval(&vals)?, n)).abs();
        objective += err;
        sq += err * scale * err * scale;
        cells += 1;
        let mut d = 0;
        loop {
            if d == k {
                break 'outer;
            }
            idx[d] += 1;
            if idx[d] <= n {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
    let cells = Rational::from_integer(cells);
    Ok(VerifyReport {
        objective,
        avg_abs_error: objective * scale / cells,
        mse: sq / cells,
    })
}

/// Re-derive a result's objective with the reference simulator.
pub fn verify(result: &SynthesisResult, circuit: &CircuitSpec, f: &FunctionSpec, n: usize) -> Result<VerifyReport> {
    if let Some(s) = result.sequences.iter().find(|s| s.len() != n) {
        return Err(Error::LengthMismatch { expected: n, got: s.len() });
    }
    let report = grid_error(circuit, f, &result.sequences)?;
    if report.objective != result.objective {
        return Err(Error::Consistency(format!(
            "reported objective {} but the simulator gives {}",
            result.objective, report.objective
        )));
    }
    Ok(report)
}

/// Baseline candidates of length `n` that exist for it.
pub(crate) fn baseline_pool(n: usize) -> Vec<NumberSequence> {
    let kinds = [
        GeneratorKind::Ramp,
        GeneratorKind::ReverseRamp,
        GeneratorKind::Vdc,
        GeneratorKind::Lfsr,
        GeneratorKind::Halton(3),
    ];
    let mut out: Vec<NumberSequence> = Vec::new();
    for k in kinds {
        if let Ok(s) = baseline_sequence(k, n) {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

pub(crate) struct Search {
    pub symbolic: Vec<NumberSequence>,
    pub cost: i128,
    pub lower: i128,
    pub mode: SolveMode,
}

fn best_baseline(model: &mut CostModel) -> Result<search::Found> {
    let pool = baseline_pool(model.n);
    let k = model.symbols();
    let mut best: Option<search::Found> = None;
    let mut idx = vec![0usize; k];
    loop {
        let seqs: Vec<NumberSequence> = idx.iter().map(|&i| pool[i].clone()).collect();
        let cost = model.cost_of(&seqs)?;
        if best.as_ref().map_or(true, |b| cost < b.cost) {
            best = Some(search::Found { cost, seqs });
        }
        let mut d = 0;
        loop {
            if d == k {
                return Ok(best.expect("at least one candidate"));
            }
            idx[d] += 1;
            if idx[d] < pool.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Resolve `auto` for a model.
pub(crate) fn pick_mode(mode: SolveMode, symbols: usize, n: usize) -> SolveMode {
    match mode {
        SolveMode::Auto if symbols <= 1 && n <= 8 || symbols == 2 && n <= 4 => SolveMode::Exact,
        SolveMode::Auto => SolveMode::Anneal,
        m => m,
    }
}

/// Optimize a cost model. Deterministic for a fixed configuration except
/// when an exact search hits its wall-clock limit.
pub(crate) fn optimize(model: &mut CostModel, cfg: &SolveConfig) -> Result<Search> {
    cfg.validate()?;
    let start = Instant::now();
    let floor = model.rounding_floor();
    let incumbent = best_baseline(model)?;
    let mode = pick_mode(cfg.mode, model.symbols(), model.n);
    match mode {
        SolveMode::Exact => {
            let deadline = cfg.time_budget.map(|b| start + b);
            let out = search::branch_and_bound(model, incumbent, cfg.gap, deadline);
            Ok(Search {
                symbolic: out.best.seqs,
                cost: out.best.cost,
                lower: out.lower.max(floor.min(out.best.cost)),
                mode,
            })
        }
        _ => {
            let steps = cfg.steps_for(model.n, model.cells());
            let k = model.symbols();
            let n = model.n;
            let base = &*model;
            let runs: Vec<search::Found> = (0..cfg.restarts)
                .into_par_iter()
                .map(|r| {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(r as u64);
                    let mut m = base.clone();
                    let init = if r == 0 {
                        incumbent.seqs.clone()
                    } else {
                        search::random_start(k, n, &mut rng)
                    };
                    search::anneal(&mut m, init, steps, &mut rng)
                })
                .collect();
            let mut best = incumbent;
            for f in runs {
                if (f.cost, &f.seqs) < (best.cost, &best.seqs) {
                    best = f;
                }
            }
            Ok(Search {
                symbolic: best.seqs,
                cost: best.cost,
                lower: floor.min(best.cost),
                mode,
            })
        }
    }
}

pub(crate) fn classify(objective: Rational, lower: Rational, gap: Rational) -> (Status, Option<Rational>) {
    let zero = Rational::from_integer(0);
    let achieved = if lower > zero {
        Some((objective - lower) / lower)
    } else if objective == zero {
        Some(zero)
    } else {
        None
    };
    let optimal = if lower > zero {
        objective <= lower * (Rational::from_integer(1) + gap)
    } else {
        objective == zero
    };
    (if optimal { Status::Optimal } else { Status::Feasible }, achieved)
}

/// Synthesize sequences for a one- or two-input circuit (any number of
/// inputs works; the cost grid grows as (N+1)^k).
pub fn solve(circuit: &CircuitSpec, f: &FunctionSpec, n: usize, opts: &EncodeOptions, cfg: &SolveConfig) -> Result<SynthesisResult> {
    let start = Instant::now();
    if n < 2 {
        return Err(Error::Config(format!("n must be at least 2, got {n}")));
    }
    if opts.symbolic_select {
        return Err(Error::Unsupported(
            "symbolic select streams are only available through the LP export".into(),
        ));
    }
    if let Some(s) = &opts.fix_first_sequence {
        if s.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: s.len() });
        }
    }
    let circuit = circuit.clone().with_dff_wraparound(opts.dff_wraparound || circuit.dff_wraparound());
    let sources: Vec<Source> = (0..circuit.inputs().len())
        .map(|i| match &opts.fix_first_sequence {
            Some(s) if i == 0 && opts.fixes_first(&circuit) => Source::Fixed(s.clone()),
            _ => Source::Symbolic,
        })
        .collect();
    let mut model = CostModel::new(&circuit, f, n, sources)?;
    let found = optimize(&mut model, cfg)?;
    let objective = model.to_counts(found.cost);
    let lower_bound = model.to_counts(found.lower);
    let (status, gap_achieved) = classify(objective, lower_bound, cfg.gap);
    let cells = Rational::from_integer(model.total_weight);
    let mut result = SynthesisResult {
        sequences: model.full_sequences(&found.symbolic),
        objective,
        lower_bound,
        status,
        gap_achieved,
        avg_abs_error: objective * f.encoding().count_scale(n) / cells,
        mode: found.mode,
        elapsed: 0.0,
    };
    verify(&result, &circuit, f, n)?;
    result.elapsed = start.elapsed().as_secs_f64();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::library;
    use crate::rat;
    use crate::sn::Encoding;

    fn exact() -> SolveConfig {
        SolveConfig {
            mode: SolveMode::Exact,
            ..SolveConfig::default()
        }
    }

    #[test]
    fn multiplier_n4_exact() {
        let p = library::multiplier(Encoding::Unipolar, 4);
        let r = solve(&p.circuit, &p.function, 4, &EncodeOptions::new(4), &exact()).unwrap();
        assert_eq!(r.objective, rat(3, 1));
        assert_eq!(r.avg_abs_error, rat(3, 100));
        assert_eq!(r.status, Status::Optimal);
        assert_eq!(r.sequences[0], NumberSequence::ramp(4));
        assert_eq!(r.gap_achieved, Some(rat(0, 1)));
    }

    #[test]
    fn saturating_adder_is_exact() {
        for n in [4, 8] {
            let p = library::saturating_adder(n);
            let r = solve(&p.circuit, &p.function, n, &EncodeOptions::new(n), &exact()).unwrap();
            assert_eq!(r.objective, rat(0, 1));
            assert_eq!(r.status, Status::Optimal);
        }
    }

    #[test]
    fn lower_bounds() {
        let p = library::multiplier(Encoding::Unipolar, 4);
        assert_eq!(lower_bound(&p.circuit, &p.function, 4).unwrap(), rat(3, 1));
        let p = library::saturating_adder(8);
        assert_eq!(lower_bound(&p.circuit, &p.function, 8).unwrap(), rat(0, 1));
        let p = library::adder(Encoding::Unipolar, 16);
        assert_eq!(lower_bound(&p.circuit, &p.function, 16).unwrap(), rat(72, 1));
    }

    #[test]
    fn tampered_objective_fails_verification() {
        let p = library::multiplier(Encoding::Unipolar, 4);
        let mut r = solve(&p.circuit, &p.function, 4, &EncodeOptions::new(4), &exact()).unwrap();
        verify(&r, &p.circuit, &p.function, 4).unwrap();
        r.objective += rat(1, 1);
        assert!(matches!(verify(&r, &p.circuit, &p.function, 4), Err(Error::Consistency(_))));
    }

    #[test]
    fn config_validation() {
        let p = library::multiplier(Encoding::Unipolar, 4);
        let bad = SolveConfig {
            restarts: 0,
            ..SolveConfig::default()
        };
        assert!(solve(&p.circuit, &p.function, 4, &EncodeOptions::new(4), &bad).is_err());
        let bad = SolveConfig {
            gap: rat(3, 2),
            ..SolveConfig::default()
        };
        assert!(solve(&p.circuit, &p.function, 4, &EncodeOptions::new(4), &bad).is_err());
    }

    #[test]
    fn classify_status() {
        assert_eq!(classify(rat(0, 1), rat(0, 1), rat(0, 1)), (Status::Optimal, Some(rat(0, 1))));
        assert_eq!(classify(rat(1, 1), rat(0, 1), rat(0, 1)), (Status::Feasible, None));
        assert_eq!(classify(rat(11, 1), rat(10, 1), rat(1, 10)), (Status::Optimal, Some(rat(1, 10))));
        assert_eq!(classify(rat(12, 1), rat(10, 1), rat(1, 10)).0, Status::Feasible);
    }

    #[test]
    fn result_json_round_trip() {
        let p = library::multiplier(Encoding::Unipolar, 4);
        let r = solve(&p.circuit, &p.function, 4, &EncodeOptions::new(4), &exact()).unwrap();
        let back: SynthesisResult = serde_json::from_str(&r.to_json()).unwrap();
        assert!(back.same_solution(&r));
        assert!(r.to_json().contains("\"status\": \"optimal\""));
    }
}

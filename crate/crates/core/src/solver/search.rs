use super::model::CostModel;
use crate::sn::NumberSequence;
use crate::Rational;
use rand::seq::SliceRandom;
use rand::Rng;
use std::time::Instant;

pub(crate) struct Found {
    pub cost: i128,
    pub seqs: Vec<NumberSequence>,
}

pub(crate) struct BnbOutcome {
    pub best: Found,
    pub lower: i128,
}

struct Bnb<'a> {
    model: &'a CostModel,
    n: usize,
    slack: Rational,
    deadline: Option<Instant>,
    assigned: Vec<Vec<Option<usize>>>,
    free: Vec<Vec<usize>>,
    best: Found,
    min_pruned: Option<i128>,
    nodes: u64,
    aborted: bool,
}

impl Bnb<'_> {
    fn prune(&self, bound: i128) -> bool {
        Rational::from_integer(bound) * self.slack >= Rational::from_integer(self.best.cost)
    }

    fn dfs(&mut self, depth: usize) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes % 512 == 0 && self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.aborted = true;
            return;
        }
        let (s, j) = (depth / self.n, depth % self.n);
        if s == self.assigned.len() {
            let cost = self.model.partial_bound(&self.assigned, &self.free);
            if cost < self.best.cost {
                self.best = Found {
                    cost,
                    seqs: self
                        .assigned
                        .iter()
                        .map(|p| NumberSequence::new_unchecked(p.iter().map(|v| v.expect("complete")).collect()))
                        .collect(),
                };
            }
            return;
        }
        let candidates = self.free[s].clone();
        for (k, &v) in candidates.iter().enumerate() {
            self.assigned[s][j] = Some(v);
            self.free[s].remove(k);
            let bound = self.model.partial_bound(&self.assigned, &self.free);
            if self.prune(bound) {
                self.min_pruned = Some(self.min_pruned.map_or(bound, |m| m.min(bound)));
            } else {
                self.dfs(depth + 1);
            }
            self.free[s].insert(k, v);
            self.assigned[s][j] = None;
            if self.aborted {
                return;
            }
        }
    }
}

/// Depth-first branch-and-bound over the symbolic sequences' positions,
/// left to right, smallest value first. Nodes whose bound `b` satisfies
/// `b·(1+gap) ≥ incumbent` are pruned.
pub(crate) fn branch_and_bound(model: &CostModel, start: Found, gap: Rational, deadline: Option<Instant>) -> BnbOutcome {
    let n = model.n;
    let k = model.symbols();
    let mut b = Bnb {
        model,
        n,
        slack: Rational::from_integer(1) + gap,
        deadline,
        assigned: vec![vec![None; n]; k],
        free: vec![(0..n).collect(); k],
        best: start,
        min_pruned: None,
        nodes: 0,
        aborted: false,
    };
    let root = model.partial_bound(&b.assigned, &b.free);
    if !b.prune(root) {
        b.dfs(0);
    } else {
        b.min_pruned = Some(root);
    }
    let lower = if b.aborted {
        root.min(b.best.cost)
    } else {
        b.min_pruned.map_or(b.best.cost, |m| m.min(b.best.cost))
    };
    BnbOutcome {
        lower: lower.max(root.min(b.best.cost)),
        best: b.best,
    }
}

pub const T_MIN: f64 = 0.01;
pub const ALPHA: f64 = 0.995;

/// Simulated annealing with two-position swaps and geometric cooling from
/// `T0 = N` down to `T_MIN`, in count units.
pub(crate) fn anneal(model: &mut CostModel, start: Vec<NumberSequence>, steps: u64, rng: &mut impl Rng) -> Found {
    let n = model.n;
    let k = model.symbols();
    let mut cur: Vec<Vec<usize>> = start.iter().map(|s| s.values().to_vec()).collect();
    model.set_sequences(&start).expect("start sequences match the model");
    let (mut hs, mut cost) = model.evaluate();
    let mut best = Found {
        cost,
        seqs: start,
    };
    if k == 0 || n < 2 || steps == 0 {
        return best;
    }
    let t0 = n as f64;
    let stages = ((T_MIN / t0).ln() / ALPHA.ln()).ceil().max(1.0) as u64;
    let per_stage = (steps / stages).max(1);
    let d = model.d as f64;
    let mut scratch = model.scratch();
    let mut pending: Vec<(usize, u32)> = Vec::new();
    let mut temp = t0;
    let mut done = 0u64;
    while done < steps {
        for _ in 0..per_stage {
            done += 1;
            let s = rng.gen_range(0..k);
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            let (pa, pb) = if cur[s][a] < cur[s][b] { (a, b) } else { (b, a) };
            let (va, vb) = (cur[s][pa], cur[s][pb]);
            model.toggle_swap(s, pa, pb, va, vb);
            pending.clear();
            let mut delta = 0i128;
            model.for_each_cell_in(s, va + 1, vb, |c| {
                let h = model.popcount(c, &mut scratch);
                delta += model.cell_cost(c, h) - model.cell_cost(c, hs[c]);
                pending.push((c, h));
            });
            let accept = delta <= 0 || rng.gen::<f64>() < (-(delta as f64) / d / temp).exp();
            if accept {
                for &(c, h) in &pending {
                    hs[c] = h;
                }
                cost += delta;
                cur[s].swap(a, b);
                if cost < best.cost {
                    best = Found {
                        cost,
                        seqs: cur.iter().map(|v| NumberSequence::new_unchecked(v.clone())).collect(),
                    };
                    if cost == 0 {
                        return best;
                    }
                }
            } else {
                model.toggle_swap(s, pa, pb, va, vb);
            }
            if done >= steps {
                break;
            }
        }
        temp = (temp * ALPHA).max(T_MIN);
    }
    best
}

pub(crate) fn random_start(k: usize, n: usize, rng: &mut impl Rng) -> Vec<NumberSequence> {
    (0..k)
        .map(|_| {
            let mut v: Vec<usize> = (0..n).collect();
            v.shuffle(rng);
            NumberSequence::new_unchecked(v)
        })
        .collect()
}

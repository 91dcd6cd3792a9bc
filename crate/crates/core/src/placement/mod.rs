//! Static content placement.
//!
//! A placement is a binary matrix `A` (caches x files). It is feasible when
//! every file is stored somewhere, no cache exceeds its storage, and every
//! cache's request load fits under its service rate. The objective is the
//! total load `sum_i alpha_i`.
//!
//! Two load accountings are supported:
//!
//! * [`FlowAccounting::Verbatim`]: `alpha` is the full input rate from the
//!   network flow balance with `pi = A`, hits included.
//! * [`FlowAccounting::MissLoad`]: `alpha_ij = (1 - A_ij)(lambda_ij +
//!   sum_k p_ki alpha_kj)`, only requests that miss at `i`. This is the flow
//!   row of the exported integer program, and equals `(1 - A) * verbatim`.
//!
//! In both cases a request that can reach a cache with no way to be served
//! (a dead end, or a region holding no replica) makes the placement
//! infeasible.

mod miqcp;
mod reduce;

pub use miqcp::{
    assignment_for, export_miqcp, parse_model, LinearTerm, ModelEvaluation, ModelRow, ParsedModel, QuadTerm, RowSense,
};
pub use reduce::{
    knapsack_optimum, knapsack_rules, partition_exists, partition_instances, partition_rules, reduce_knapsack,
    reduce_partition, verify_knapsack, verify_partition, verify_reductions, KnapsackInstance, KnapsackSweep,
    PartitionInstance, ReductionCase, ReductionKind, ReductionReport,
};

use crate::error::{domain, Error, Result};
use crate::linalg::solve_dense;
use crate::network::{routable_members, routing_matrix, solve_file, CacheNetwork, Capacity, StabilityRule};
use crate::scalar::Real;

/// Relative slack used when comparing loads, storage and objectives.
pub const PLACEMENT_TOL: f64 = 1e-9;

/// Largest `C * F` accepted by [`solve_by_enumeration`].
pub const ENUMERATION_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlacementMatrix {
    a: Vec<Vec<bool>>,
}

impl PlacementMatrix {
    pub fn new(a: Vec<Vec<bool>>) -> Result<Self> {
        let f = a.first().map_or(0, Vec::len);
        if a.is_empty() || a.iter().any(|r| r.len() != f) {
            return Err(domain("placement must be a non-empty rectangular matrix"));
        }
        Ok(Self { a })
    }

    pub fn empty(caches: usize, files: usize) -> Self {
        Self { a: vec![vec![false; files]; caches] }
    }

    /// Row-major bits, most significant bit first: bit `C*F - 1 - (i*F + f)`
    /// holds `A[i][f]`. Counting upward visits matrices in lexicographic
    /// order.
    pub fn from_bits(caches: usize, files: usize, bits: u64) -> Self {
        let n = caches * files;
        let a = (0..caches).map(|i| (0..files).map(|f| bits >> (n - 1 - (i * files + f)) & 1 == 1).collect()).collect();
        Self { a }
    }

    pub fn get(&self, cache: usize, file: usize) -> bool {
        self.a[cache][file]
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.a
    }

    pub fn caches(&self) -> usize {
        self.a.len()
    }

    pub fn files(&self) -> usize {
        self.a[0].len()
    }

    /// Caches storing `file`, as a bit mask.
    fn column_mask(&self, file: usize) -> u32 {
        (0..self.caches()).filter(|&i| self.a[i][file]).fold(0, |m, i| m | 1 << i)
    }
}

impl std::fmt::Display for PlacementMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rows: Vec<String> = self.a.iter().map(|r| r.iter().map(|&b| if b { '1' } else { '0' }).collect()).collect();
        write!(f, "{}", rows.join("/"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowAccounting {
    #[default]
    Verbatim,
    MissLoad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlacementRules {
    pub accounting: FlowAccounting,
    pub stability: StabilityRule,
}

impl PlacementRules {
    pub fn new(accounting: FlowAccounting, stability: StabilityRule) -> Self {
        Self { accounting, stability }
    }
}

/// First violated feasibility clause.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Coverage { file: usize },
    Capacity { cache: usize },
    Routing(Error),
    Stability { cache: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Coverage { file } => write!(f, "coverage: file {file} stored nowhere"),
            Violation::Capacity { cache } => write!(f, "capacity: cache {cache} over storage"),
            Violation::Routing(e) => write!(f, "routing: {e}"),
            Violation::Stability { cache } => write!(f, "stability: cache {cache} over service rate"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    pub feasible: bool,
    pub violation: Option<Violation>,
    /// `sum_i alpha_i`; `None` when the flows could not be solved.
    pub objective: Option<T>,
    pub alpha: Vec<Vec<T>>,
    pub alpha_cache: Vec<T>,
}

fn fits<T: Real>(cap: Capacity<T>, load: T, rule: StabilityRule) -> bool {
    let Capacity::Finite(c) = cap else { return true };
    let slack = T::lit(PLACEMENT_TOL) * c.abs().max(T::one());
    match rule {
        StabilityRule::Strict => load < c - slack,
        StabilityRule::NonStrict => load <= c + slack,
    }
}

fn within_storage<T: Real>(cap: Capacity<T>, used: T) -> bool {
    fits(cap, used, StabilityRule::NonStrict)
}

/// Per-cache load of one file whose replicas sit at the caches in `mask`.
pub(crate) fn file_column<T: Real>(
    net: &CacheNetwork<T>,
    routing: &[Vec<T>],
    mask: u32,
    file: usize,
    accounting: FlowAccounting,
) -> Result<Vec<T>> {
    let stored = |i: usize| mask >> i & 1 == 1;
    let pi = |i: usize| if stored(i) { T::one() } else { T::zero() };
    match accounting {
        FlowAccounting::Verbatim => solve_file(net, &pi, routing, file),
        FlowAccounting::MissLoad => {
            let members = routable_members(net, &pi, file)?;
            let mut alpha = vec![T::zero(); net.caches()];
            if members.is_empty() {
                return Ok(alpha);
            }
            let n = members.len();
            let mut a = vec![vec![T::zero(); n]; n];
            let mut b = vec![T::zero(); n];
            for (r, &j) in members.iter().enumerate() {
                a[r][r] = T::one();
                if stored(j) {
                    continue;
                }
                b[r] = net.demand()[j][file];
                for (s, &k) in members.iter().enumerate() {
                    if k != j {
                        a[r][s] = a[r][s] - routing[k][j];
                    }
                }
            }
            let x = solve_dense(a, b).map_err(|_| Error::UnplacedContent { file })?;
            for (r, &j) in members.iter().enumerate() {
                alpha[j] = x[r];
            }
            Ok(alpha)
        }
    }
}

/// Checks coverage, storage, routing and stability for `placement`, in that
/// order, and reports the total load.
pub fn evaluate<T: Real>(
    net: &CacheNetwork<T>,
    placement: &PlacementMatrix,
    rules: PlacementRules,
) -> Result<Evaluation<T>> {
    let (c, f) = (net.caches(), net.files());
    if placement.caches() != c || placement.files() != f {
        return Err(domain(format!("placement must be {c}x{f}")));
    }
    let mut ev = Evaluation {
        feasible: false,
        violation: None,
        objective: None,
        alpha: vec![vec![T::zero(); f]; c],
        alpha_cache: vec![T::zero(); c],
    };
    let uncovered = (0..f).find(|&j| (0..c).all(|i| !placement.get(i, j)));
    let over = (0..c).find(|&i| {
        let used: T = (0..f).filter(|&j| placement.get(i, j)).map(|j| net.sizes()[j]).sum();
        !within_storage(net.storage()[i], used)
    });
    let routing = routing_matrix(net);
    let mut routing_error = None;
    for j in 0..f {
        match file_column(net, &routing, placement.column_mask(j), j, rules.accounting) {
            Ok(col) => {
                for i in 0..c {
                    ev.alpha[i][j] = col[i];
                }
            }
            Err(e) => {
                routing_error = Some(e);
                break;
            }
        }
    }
    if routing_error.is_none() {
        ev.alpha_cache = ev.alpha.iter().map(|r| r.iter().copied().sum()).collect();
        ev.objective = Some(ev.alpha_cache.iter().copied().sum());
    }
    let unstable = if routing_error.is_none() {
        (0..c).find(|&i| !fits(net.service()[i], ev.alpha_cache[i], rules.stability))
    } else {
        None
    };
    ev.violation = if let Some(file) = uncovered {
        Some(Violation::Coverage { file })
    } else if let Some(cache) = over {
        Some(Violation::Capacity { cache })
    } else if let Some(e) = routing_error {
        Some(Violation::Routing(e))
    } else {
        unstable.map(|cache| Violation::Stability { cache })
    };
    ev.feasible = ev.violation.is_none();
    Ok(ev)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution<T> {
    pub placement: PlacementMatrix,
    pub objective: T,
    pub evaluation: Evaluation<T>,
}

struct Candidate<T> {
    mask: u32,
    alpha: Vec<T>,
    cost: T,
}

struct Search<'a, T> {
    net: &'a CacheNetwork<T>,
    rules: PlacementRules,
    cands: Vec<Vec<Candidate<T>>>,
    /// `suffix_min[j]`: least possible cost of files `j..F`.
    suffix_min: Vec<T>,
}

enum Goal<T> {
    /// Find the least objective.
    Minimize,
    /// Find any feasible completion with objective at most the bound.
    AtMost(T),
}

struct Frontier<T> {
    used: Vec<T>,
    load: Vec<T>,
    choice: Vec<u32>,
    best: Option<(T, Vec<u32>)>,
}

impl<'a, T: Real> Search<'a, T> {
    fn build(net: &'a CacheNetwork<T>, rules: PlacementRules) -> Result<Option<Self>> {
        let c = net.caches();
        if c > 16 {
            return Err(domain("exact placement search supports at most 16 caches"));
        }
        let routing = routing_matrix(net);
        let mut cands = Vec::with_capacity(net.files());
        for j in 0..net.files() {
            let t = net.sizes()[j];
            let mut list = Vec::new();
            for mask in 1u32..1 << c {
                if (0..c).any(|i| mask >> i & 1 == 1 && !within_storage(net.storage()[i], t)) {
                    continue;
                }
                let Ok(alpha) = file_column(net, &routing, mask, j, rules.accounting) else { continue };
                if (0..c).any(|i| !fits(net.service()[i], alpha[i], rules.stability)) {
                    continue;
                }
                let cost = alpha.iter().copied().sum();
                list.push(Candidate { mask, alpha, cost });
            }
            if list.is_empty() {
                return Ok(None);
            }
            list.sort_by(|a, b| {
                a.cost.partial_cmp(&b.cost).unwrap_or(std::cmp::Ordering::Equal).then(a.mask.cmp(&b.mask))
            });
            cands.push(list);
        }
        let mut suffix_min = vec![T::zero(); net.files() + 1];
        for j in (0..net.files()).rev() {
            suffix_min[j] = suffix_min[j + 1] + cands[j][0].cost;
        }
        Ok(Some(Self { net, rules, cands, suffix_min }))
    }

    fn eps(x: T) -> T {
        T::lit(PLACEMENT_TOL) * x.abs().max(T::one())
    }

    fn run(&self, goal: &Goal<T>, fixed: &[Vec<Option<bool>>]) -> Option<(T, Vec<u32>)> {
        let c = self.net.caches();
        let mut fr = Frontier {
            used: vec![T::zero(); c],
            load: vec![T::zero(); c],
            choice: Vec::with_capacity(self.net.files()),
            best: None,
        };
        self.dfs(0, T::zero(), goal, fixed, &mut fr);
        fr.best
    }

    fn dfs(&self, j: usize, cost: T, goal: &Goal<T>, fixed: &[Vec<Option<bool>>], fr: &mut Frontier<T>) -> bool {
        let c = self.net.caches();
        if j == self.net.files() {
            if (0..c).all(|i| fits(self.net.service()[i], fr.load[i], self.rules.stability)) {
                fr.best = Some((cost, fr.choice.clone()));
                return matches!(goal, Goal::AtMost(_));
            }
            return false;
        }
        let bound = cost + self.suffix_min[j];
        let limit = match goal {
            Goal::AtMost(v) => *v + Self::eps(*v),
            Goal::Minimize => match &fr.best {
                Some((b, _)) => *b - Self::eps(*b),
                None => T::infinity(),
            },
        };
        if bound > limit {
            return false;
        }
        let t = self.net.sizes()[j];
        for cand in &self.cands[j] {
            let stored = |i: usize| cand.mask >> i & 1 == 1;
            if (0..c).any(|i| fixed[i][j].is_some_and(|b| b != stored(i))) {
                continue;
            }
            let limit = match goal {
                Goal::AtMost(v) => *v + Self::eps(*v),
                Goal::Minimize => match &fr.best {
                    Some((b, _)) => *b - Self::eps(*b),
                    None => T::infinity(),
                },
            };
            if cost + cand.cost + self.suffix_min[j + 1] > limit {
                // candidates are sorted by cost
                break;
            }
            let ok = (0..c).all(|i| {
                (!stored(i) || within_storage(self.net.storage()[i], fr.used[i] + t))
                    && fits(self.net.service()[i], fr.load[i] + cand.alpha[i], StabilityRule::NonStrict)
            });
            if !ok {
                continue;
            }
            for i in 0..c {
                if stored(i) {
                    fr.used[i] = fr.used[i] + t;
                }
                fr.load[i] = fr.load[i] + cand.alpha[i];
            }
            fr.choice.push(cand.mask);
            let done = self.dfs(j + 1, cost + cand.cost, goal, fixed, fr);
            fr.choice.pop();
            for i in 0..c {
                if stored(i) {
                    fr.used[i] = fr.used[i] - t;
                }
                fr.load[i] = fr.load[i] - cand.alpha[i];
            }
            if done {
                return true;
            }
        }
        false
    }
}

fn placement_from_masks(caches: usize, masks: &[u32]) -> PlacementMatrix {
    let a = (0..caches).map(|i| masks.iter().map(|m| m >> i & 1 == 1).collect()).collect();
    PlacementMatrix { a }
}

/// Exact optimum by branch and bound over per-file replica sets. Among
/// optimal placements the lexicographically smallest row-major matrix is
/// returned. `Ok(None)` means no placement is feasible.
pub fn solve_exact<T: Real>(net: &CacheNetwork<T>, rules: PlacementRules) -> Result<Option<ExactSolution<T>>> {
    let Some(search) = Search::build(net, rules)? else { return Ok(None) };
    let Some((value, _)) = search.run(&Goal::Minimize, &vec![vec![None; net.files()]; net.caches()]) else {
        return Ok(None);
    };
    // fix bits in row-major order, preferring 0, while an optimum remains
    let mut fixed = vec![vec![None; net.files()]; net.caches()];
    let mut last = None;
    for i in 0..net.caches() {
        for j in 0..net.files() {
            fixed[i][j] = Some(false);
            match search.run(&Goal::AtMost(value), &fixed) {
                Some(found) => last = Some(found),
                None => fixed[i][j] = Some(true),
            }
        }
    }
    let masks = match last {
        Some((_, m)) if m.len() == net.files() => m,
        _ => search.run(&Goal::AtMost(value), &fixed).map(|(_, m)| m).ok_or(Error::Singular)?,
    };
    let placement = placement_from_masks(net.caches(), &masks);
    let evaluation = evaluate(net, &placement, rules)?;
    let objective = evaluation.objective.ok_or(Error::Singular)?;
    Ok(Some(ExactSolution { placement, objective, evaluation }))
}

/// Whether any placement is feasible; stops at the first one found.
pub fn is_feasible<T: Real>(net: &CacheNetwork<T>, rules: PlacementRules) -> Result<bool> {
    let Some(search) = Search::build(net, rules)? else { return Ok(false) };
    let fixed = vec![vec![None; net.files()]; net.caches()];
    Ok(search.run(&Goal::AtMost(T::infinity()), &fixed).is_some())
}

/// Reference optimum by evaluating all `2^(C*F)` matrices.
pub fn solve_by_enumeration<T: Real>(net: &CacheNetwork<T>, rules: PlacementRules) -> Result<Option<ExactSolution<T>>> {
    let (c, f) = (net.caches(), net.files());
    if c * f > ENUMERATION_LIMIT {
        return Err(domain(format!("enumeration limited to C*F <= {ENUMERATION_LIMIT}")));
    }
    let mut feasible = Vec::new();
    for bits in 0..1u64 << (c * f) {
        let p = PlacementMatrix::from_bits(c, f, bits);
        let ev = evaluate(net, &p, rules)?;
        if ev.feasible {
            feasible.push((p, ev));
        }
    }
    let Some(min) = feasible.iter().filter_map(|(_, e)| e.objective).reduce(T::min) else { return Ok(None) };
    let eps = T::lit(PLACEMENT_TOL) * min.abs().max(T::one());
    let (placement, evaluation) =
        feasible.into_iter().find(|(_, e)| e.objective.is_some_and(|v| v <= min + eps)).expect("minimum attained");
    let objective = evaluation.objective.expect("feasible has objective");
    Ok(Some(ExactSolution { placement, objective, evaluation }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ring2(s: (f64, f64), eta: f64, files: usize) -> CacheNetwork<f64> {
        CacheNetwork::new(
            vec![vec![false, true], vec![true, false]],
            vec![Capacity::Finite(s.0), Capacity::Finite(s.1)],
            vec![Capacity::Finite(eta); 2],
            vec![vec![1.0; files]; 2],
            vec![1.0; files],
        )
        .unwrap()
    }

    #[test]
    fn single_cache_with_everything() {
        let net = CacheNetwork::new(
            vec![vec![false]],
            vec![Capacity::Finite(3.0)],
            vec![Capacity::Unbounded],
            vec![vec![1.0, 2.0, 0.5]],
            vec![1.0; 3],
        )
        .unwrap();
        let sol = solve_exact(&net, PlacementRules::default()).unwrap().unwrap();
        assert_eq!(sol.placement.rows(), &[vec![true, true, true]]);
        assert_relative_eq!(sol.objective, 3.5);
        let miss =
            solve_exact(&net, PlacementRules::new(FlowAccounting::MissLoad, StabilityRule::Strict)).unwrap().unwrap();
        assert_eq!(miss.objective, 0.0);
    }

    #[test]
    fn clause_order() {
        let net = ring2((1.0, 1.0), 10.0, 2);
        let nowhere = PlacementMatrix::new(vec![vec![true, false], vec![true, false]]).unwrap();
        let ev = evaluate(&net, &nowhere, PlacementRules::default()).unwrap();
        assert_eq!(ev.violation, Some(Violation::Coverage { file: 1 }));
        let crowded = PlacementMatrix::new(vec![vec![true, true], vec![false, false]]).unwrap();
        let ev = evaluate(&net, &crowded, PlacementRules::default()).unwrap();
        assert_eq!(ev.violation, Some(Violation::Capacity { cache: 0 }));
        let tight = ring2((1.0, 1.0), 3.0, 2);
        let split = PlacementMatrix::new(vec![vec![true, false], vec![false, true]]).unwrap();
        let ev = evaluate(&tight, &split, PlacementRules::default()).unwrap();
        assert_eq!(ev.violation, Some(Violation::Stability { cache: 0 }));
    }

    #[test]
    fn symmetric_tie_breaks_lexicographically() {
        let net = ring2((1.0, 1.0), 10.0, 2);
        let exact = solve_exact(&net, PlacementRules::default()).unwrap().unwrap();
        let brute = solve_by_enumeration(&net, PlacementRules::default()).unwrap().unwrap();
        assert_eq!(exact.placement, brute.placement);
        assert_eq!(exact.placement.to_string(), "01/10");
        assert_relative_eq!(exact.objective, 6.0, max_relative = 1e-12);
        let other = PlacementMatrix::new(vec![vec![true, false], vec![false, true]]).unwrap();
        let ev = evaluate(&net, &other, PlacementRules::default()).unwrap();
        assert_relative_eq!(ev.objective.unwrap(), exact.objective, max_relative = 1e-12);
    }

    #[test]
    fn miss_load_is_masked_verbatim() {
        let net = ring2((2.0, 2.0), 10.0, 2);
        for bits in 0..16 {
            let p = PlacementMatrix::from_bits(2, 2, bits);
            let v = evaluate(&net, &p, PlacementRules::default()).unwrap();
            let m = evaluate(&net, &p, PlacementRules::new(FlowAccounting::MissLoad, StabilityRule::Strict)).unwrap();
            if v.objective.is_none() {
                continue;
            }
            for i in 0..2 {
                for j in 0..2 {
                    let mask = if p.get(i, j) { 0.0 } else { 1.0 };
                    assert_relative_eq!(m.alpha[i][j], mask * v.alpha[i][j], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn infeasible_instance_is_none() {
        let net = ring2((1.0, 1.0), 10.0, 3);
        assert!(solve_exact(&net, PlacementRules::default()).unwrap().is_none());
        assert!(!is_feasible(&net, PlacementRules::default()).unwrap());
    }

    #[test]
    fn bits_are_row_major_lexicographic() {
        let p = PlacementMatrix::from_bits(2, 2, 0b0110);
        assert_eq!(p.to_string(), "01/10");
        let mut prev = PlacementMatrix::from_bits(2, 3, 0);
        for bits in 1..64 {
            let p = PlacementMatrix::from_bits(2, 3, bits);
            assert!(prev < p);
            prev = p;
        }
    }
}

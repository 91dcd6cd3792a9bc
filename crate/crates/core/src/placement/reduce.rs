//! Knapsack and Partition encoded as placement instances, with brute-force
//! checks on both sides.
//!
//! Knapsack: two caches with a single link `0 -> 1`. Item `j` becomes file
//! `j` with size `w_j` and rate `v_j` at both caches. Cache 0 holds `c`,
//! cache 1 is unbounded and so are both service rates. Under miss-load
//! accounting the optimum stores everything at cache 1 and a best knapsack
//! at cache 0, for objective `sum v - knapsack optimum`.
//!
//! Partition: for each `m` in `0..=N`, two linked caches of storage `m` and
//! `N - m`, unit files with rate `v_j` at both caches and service rate
//! `sum v / 2` each. A request that misses at one cache is served by the
//! other, so each cache carries the total rate of the files stored at its
//! peer. Feasibility needs the non-strict load rule: a perfect split puts
//! exactly `sum v / 2` on each cache.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{is_feasible, solve_exact, FlowAccounting, PlacementRules};
use crate::error::{domain, Result};
use crate::network::{CacheNetwork, Capacity, StabilityRule};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnapsackInstance {
    pub capacity: u64,
    /// `(weight, value)` pairs.
    pub items: Vec<(u64, u64)>,
}

impl KnapsackInstance {
    pub fn new(capacity: u64, items: Vec<(u64, u64)>) -> Result<Self> {
        if capacity == 0 || items.is_empty() || items.iter().any(|&(w, v)| w == 0 || v == 0) {
            return Err(domain("knapsack needs a positive capacity and positive items"));
        }
        if items.len() > 24 {
            return Err(domain("knapsack brute force limited to 24 items"));
        }
        Ok(Self { capacity, items })
    }

    pub fn total_value(&self) -> u64 {
        self.items.iter().map(|&(_, v)| v).sum()
    }
}

impl std::fmt::Display for KnapsackInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let items: Vec<String> = self.items.iter().map(|(w, v)| format!("{w}/{v}")).collect();
        write!(f, "c={} items={}", self.capacity, items.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionInstance {
    pub values: Vec<u64>,
}

impl PartitionInstance {
    pub fn new(values: Vec<u64>) -> Result<Self> {
        if values.is_empty() || values.contains(&0) {
            return Err(domain("partition needs at least one positive value"));
        }
        if values.len() > 24 {
            return Err(domain("partition brute force limited to 24 values"));
        }
        Ok(Self { values })
    }

    pub fn total(&self) -> u64 {
        self.values.iter().sum()
    }
}

impl std::fmt::Display for PartitionInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v: Vec<String> = self.values.iter().map(u64::to_string).collect();
        write!(f, "{}", v.join(" "))
    }
}

/// Best value and the smallest item mask attaining it.
pub fn knapsack_optimum(kp: &KnapsackInstance) -> (u64, u32) {
    let n = kp.items.len();
    let mut best = (0, 0);
    for mask in 0u32..1 << n {
        let (w, v) =
            (0..n).filter(|&j| mask >> j & 1 == 1).fold((0, 0), |(w, v), j| (w + kp.items[j].0, v + kp.items[j].1));
        if w <= kp.capacity && v > best.0 {
            best = (v, mask);
        }
    }
    best
}

pub fn partition_exists(pt: &PartitionInstance) -> bool {
    let total = pt.total();
    if total % 2 == 1 {
        return false;
    }
    let n = pt.values.len();
    (0u32..1 << n).any(|mask| (0..n).filter(|&j| mask >> j & 1 == 1).map(|j| pt.values[j]).sum::<u64>() * 2 == total)
}

pub fn reduce_knapsack<T: Real>(kp: &KnapsackInstance) -> Result<CacheNetwork<T>> {
    let values: Vec<T> = kp.items.iter().map(|&(_, v)| T::lit(v as f64)).collect();
    CacheNetwork::new(
        vec![vec![false, true], vec![false, false]],
        vec![Capacity::Finite(T::lit(kp.capacity as f64)), Capacity::Unbounded],
        vec![Capacity::Unbounded, Capacity::Unbounded],
        vec![values.clone(), values],
        kp.items.iter().map(|&(w, _)| T::lit(w as f64)).collect(),
    )
}

/// Instances for `m = 0..=N`, in order.
pub fn reduce_partition<T: Real>(pt: &PartitionInstance) -> Result<Vec<CacheNetwork<T>>> {
    let n = pt.values.len();
    let values: Vec<T> = pt.values.iter().map(|&v| T::lit(v as f64)).collect();
    let eta = Capacity::Finite(T::lit(pt.total() as f64 / 2.0));
    (0..=n)
        .map(|m| {
            CacheNetwork::new(
                vec![vec![false, true], vec![true, false]],
                vec![Capacity::Finite(T::from_count(m)), Capacity::Finite(T::from_count(n - m))],
                vec![eta, eta],
                vec![values.clone(), values.clone()],
                vec![T::one(); n],
            )
        })
        .collect()
}

/// Rules under which the reductions are stated.
pub fn knapsack_rules() -> PlacementRules {
    PlacementRules::new(FlowAccounting::MissLoad, StabilityRule::Strict)
}

pub fn partition_rules() -> PlacementRules {
    PlacementRules::new(FlowAccounting::MissLoad, StabilityRule::NonStrict)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionKind {
    Partition,
    Knapsack,
}

impl std::fmt::Display for ReductionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReductionKind::Partition => "partition",
            ReductionKind::Knapsack => "knapsack",
        })
    }
}

/// One instance decided on both sides of a reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionCase {
    pub kind: ReductionKind,
    pub instance: String,
    /// Verdict of the brute-force oracle on the original problem.
    pub side_a: String,
    /// Verdict recovered from the placement instance(s).
    pub side_b: String,
    pub agrees: bool,
}

/// Decides one Partition instance both ways.
pub fn verify_partition(pt: &PartitionInstance) -> Result<ReductionCase> {
    let expected = partition_exists(pt);
    let mut feasible_m = None;
    for (m, net) in reduce_partition::<f64>(pt)?.iter().enumerate() {
        if is_feasible(net, partition_rules())? {
            feasible_m = Some(m);
            break;
        }
    }
    Ok(ReductionCase {
        kind: ReductionKind::Partition,
        instance: pt.to_string(),
        side_a: if expected { "yes".into() } else { "no".into() },
        side_b: feasible_m.map_or("no".into(), |m| format!("yes (m={m})")),
        agrees: expected == feasible_m.is_some(),
    })
}

/// Decides one Knapsack instance both ways: the optimum value from brute
/// force, and `sum v - objective` from the exact placement optimum. The
/// files placed at cache 0 must also form a valid knapsack of that value.
pub fn verify_knapsack(kp: &KnapsackInstance) -> Result<ReductionCase> {
    let (best, _) = knapsack_optimum(kp);
    let net = reduce_knapsack::<f64>(kp)?;
    let sol = solve_exact(&net, knapsack_rules())?;
    let (side_b, agrees) = match sol {
        None => ("infeasible".to_string(), false),
        Some(sol) => {
            let recovered = kp.total_value() as f64 - sol.objective;
            let chosen: Vec<usize> = (0..kp.items.len()).filter(|&j| sol.placement.get(0, j)).collect();
            let weight: u64 = chosen.iter().map(|&j| kp.items[j].0).sum();
            let value: u64 = chosen.iter().map(|&j| kp.items[j].1).sum();
            let ok = (recovered - best as f64).abs() < 1e-6 && value == best && weight <= kp.capacity;
            (format!("{}", recovered.round() as i64), ok)
        }
    };
    Ok(ReductionCase {
        kind: ReductionKind::Knapsack,
        instance: kp.to_string(),
        side_a: best.to_string(),
        side_b,
        agrees,
    })
}

/// Which Knapsack instances to check. Instances with at most
/// `exhaustive_max_n` items are enumerated completely (every weight, value
/// and capacity in range); larger sizes up to `max_n` are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnapsackSweep {
    pub exhaustive_max_n: usize,
    pub max_n: usize,
    pub samples_per_n: usize,
    pub max_weight: u64,
    pub max_value: u64,
    pub seed: u64,
}

impl Default for KnapsackSweep {
    fn default() -> Self {
        Self { exhaustive_max_n: 2, max_n: 12, samples_per_n: 25, max_weight: 8, max_value: 8, seed: 1 }
    }
}

impl KnapsackSweep {
    pub fn instances(&self) -> Vec<KnapsackInstance> {
        let mut out = Vec::new();
        for n in 1..=self.exhaustive_max_n.min(self.max_n) {
            let per_item = (self.max_weight * self.max_value) as usize;
            let combos = per_item.pow(n as u32);
            for code in 0..combos {
                let mut rest = code;
                let mut items = Vec::with_capacity(n);
                for _ in 0..n {
                    let k = (rest % per_item) as u64;
                    rest /= per_item;
                    items.push((k / self.max_value + 1, k % self.max_value + 1));
                }
                let total_w: u64 = items.iter().map(|&(w, _)| w).sum();
                for c in 1..=total_w {
                    out.push(KnapsackInstance { capacity: c, items: items.clone() });
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for n in self.exhaustive_max_n + 1..=self.max_n {
            for _ in 0..self.samples_per_n {
                let items: Vec<(u64, u64)> = (0..n)
                    .map(|_| (rng.random_range(1..=self.max_weight), rng.random_range(1..=self.max_value)))
                    .collect();
                let total_w: u64 = items.iter().map(|&(w, _)| w).sum();
                let capacity = rng.random_range(1..=total_w);
                out.push(KnapsackInstance { capacity, items });
            }
        }
        out
    }
}

/// Every multiset of `n` values from `1..=max_value`, `n = 1..=max_n`, as
/// non-decreasing sequences.
pub fn partition_instances(max_n: usize, max_value: u64) -> Vec<PartitionInstance> {
    fn extend(prefix: &mut Vec<u64>, n: usize, max_value: u64, out: &mut Vec<PartitionInstance>) {
        if prefix.len() == n {
            out.push(PartitionInstance { values: prefix.clone() });
            return;
        }
        let start = prefix.last().copied().unwrap_or(1);
        for v in start..=max_value {
            prefix.push(v);
            extend(prefix, n, max_value, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for n in 1..=max_n {
        extend(&mut Vec::new(), n, max_value, &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReductionReport {
    pub cases: Vec<ReductionCase>,
}

impl ReductionReport {
    pub fn counterexamples(&self) -> Vec<&ReductionCase> {
        self.cases.iter().filter(|c| !c.agrees).collect()
    }

    pub fn count(&self, kind: ReductionKind) -> usize {
        self.cases.iter().filter(|c| c.kind == kind).count()
    }

    /// `kind,instance,side_a,side_b,agrees`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,instance,side_a,side_b,agrees\n");
        for c in &self.cases {
            out.push_str(&format!("{},{},{},{},{}\n", c.kind, c.instance, c.side_a, c.side_b, c.agrees));
        }
        out
    }
}

fn run_parallel<I: Sync, F>(items: &[I], check: F) -> Result<Vec<ReductionCase>>
where
    F: Fn(&I) -> Result<ReductionCase> + Sync,
{
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(workers).max(1);
    let parts: Vec<Result<Vec<ReductionCase>>> = std::thread::scope(|s| {
        let handles: Vec<_> =
            items.chunks(chunk).map(|part| s.spawn(|| part.iter().map(&check).collect::<Result<Vec<_>>>())).collect();
        handles.into_iter().map(|h| h.join().expect("verification worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Partition over every multiset with at most `partition_max_n` values in
/// `1..=partition_max_value`, then Knapsack over `sweep`.
pub fn verify_reductions(
    partition_max_n: usize,
    partition_max_value: u64,
    sweep: &KnapsackSweep,
) -> Result<ReductionReport> {
    let parts = partition_instances(partition_max_n, partition_max_value);
    let mut cases = run_parallel(&parts, verify_partition)?;
    cases.extend(run_parallel(&sweep.instances(), verify_knapsack)?);
    Ok(ReductionReport { cases })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knapsack_mapping() {
        let kp = KnapsackInstance::new(5, vec![(3, 10), (4, 6)]).unwrap();
        let net = reduce_knapsack::<f64>(&kp).unwrap();
        assert_eq!(net.storage()[0], Capacity::Finite(5.0));
        assert_eq!(net.storage()[1], Capacity::Unbounded);
        assert_eq!(net.sizes(), &[3.0, 4.0]);
        assert_eq!(net.demand()[1], vec![10.0, 6.0]);
        assert!(net.has_link(0, 1) && !net.has_link(1, 0));
        let case = verify_knapsack(&kp).unwrap();
        assert!(case.agrees, "{case:?}");
        assert_eq!(case.side_a, "10");
    }

    #[test]
    fn heavy_item_stays_at_unbounded_cache() {
        let kp = KnapsackInstance::new(2, vec![(3, 5)]).unwrap();
        let sol = solve_exact(&reduce_knapsack::<f64>(&kp).unwrap(), knapsack_rules()).unwrap().unwrap();
        assert!(!sol.placement.get(0, 0) && sol.placement.get(1, 0));
        assert_eq!(sol.objective, 5.0);
    }

    #[test]
    fn partition_examples() {
        for (values, expect) in [(vec![1, 1, 2], true), (vec![1, 1, 1], false), (vec![2, 2], true)] {
            let pt = PartitionInstance::new(values).unwrap();
            assert_eq!(partition_exists(&pt), expect);
            let case = verify_partition(&pt).unwrap();
            assert!(case.agrees, "{case:?}");
        }
        let pt = PartitionInstance::new(vec![2, 2]).unwrap();
        assert_eq!(verify_partition(&pt).unwrap().side_b, "yes (m=1)");
    }

    #[test]
    fn strict_rule_rejects_perfect_split() {
        let pt = PartitionInstance::new(vec![2, 2]).unwrap();
        let nets = reduce_partition::<f64>(&pt).unwrap();
        let strict = PlacementRules::new(FlowAccounting::MissLoad, StabilityRule::Strict);
        assert!(!is_feasible(&nets[1], strict).unwrap());
        assert!(is_feasible(&nets[1], partition_rules()).unwrap());
    }

    #[test]
    fn small_sweep_has_no_counterexamples() {
        let sweep =
            KnapsackSweep { exhaustive_max_n: 1, max_n: 4, samples_per_n: 5, max_weight: 4, max_value: 4, seed: 9 };
        let report = verify_reductions(4, 3, &sweep).unwrap();
        assert!(report.counterexamples().is_empty());
        assert_eq!(report.count(ReductionKind::Partition), 3 + 6 + 10 + 15);
    }
}

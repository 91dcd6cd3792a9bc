//! Cache networks with random-walk request routing.
//!
//! A request for file `c` arriving at cache `j` is served there with
//! probability `pi[j][c]`; otherwise it is forwarded over a uniformly chosen
//! outgoing link. The per-file flow balance
//!
//! ```text
//! alpha_j = lambda_j + sum_{k != j} alpha_k (1 - pi_k) p_kj
//! ```
//!
//! is linear in `alpha`; each file is solved independently.

mod format;
mod multiplex;

pub use format::{parse_network, write_network, NetworkFile};
pub use multiplex::{expected_occupancy, overflow_monte_carlo, poisson_binomial_pmf, OccupancyStats, OverflowMethod};

use crate::counter::{provision_from_target, CounterParams, TargetSpec};
use crate::error::{domain, Error, Result};
use crate::linalg::solve_dense;
use crate::optimizer::{minimize, CostWeights};
use crate::output::format_sig;
use crate::scalar::Real;

/// Storage or service budget. `Unbounded` stands for an infinite budget and
/// is never approximated by a large number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity<T> {
    Finite(T),
    Unbounded,
}

impl<T: Real> Capacity<T> {
    pub fn finite(&self) -> Option<T> {
        match *self {
            Capacity::Finite(v) => Some(v),
            Capacity::Unbounded => None,
        }
    }

    /// Whether `load` fits under this budget.
    pub fn admits(&self, load: T, rule: StabilityRule) -> bool {
        match (*self, rule) {
            (Capacity::Unbounded, _) => true,
            (Capacity::Finite(c), StabilityRule::Strict) => load < c,
            (Capacity::Finite(c), StabilityRule::NonStrict) => load <= c,
        }
    }

    /// `self - load`, `None` when unbounded.
    pub fn slack(&self, load: T) -> Option<T> {
        self.finite().map(|c| c - load)
    }
}

/// Strict stability requires `alpha_i < eta_i`; the non-strict variant
/// accepts equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StabilityRule {
    #[default]
    Strict,
    NonStrict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheNetwork<T> {
    adjacency: Vec<Vec<bool>>,
    storage: Vec<Capacity<T>>,
    service: Vec<Capacity<T>>,
    demand: Vec<Vec<T>>,
    sizes: Vec<T>,
}

impl<T: Real> CacheNetwork<T> {
    /// `demand[i][f]` is the exogenous request rate for file `f` at cache `i`.
    pub fn new(
        adjacency: Vec<Vec<bool>>,
        storage: Vec<Capacity<T>>,
        service: Vec<Capacity<T>>,
        demand: Vec<Vec<T>>,
        sizes: Vec<T>,
    ) -> Result<Self> {
        let c = storage.len();
        let f = sizes.len();
        let bad = |m: String| Err(Error::InvalidNetwork(m));
        if c == 0 {
            return bad("network needs at least one cache".into());
        }
        if adjacency.len() != c || adjacency.iter().any(|r| r.len() != c) {
            return bad(format!("adjacency must be {c}x{c}"));
        }
        if service.len() != c {
            return bad(format!("expected {c} service rates, got {}", service.len()));
        }
        if demand.len() != c || demand.iter().any(|r| r.len() != f) {
            return bad(format!("demand must be {c}x{f}"));
        }
        if let Some(i) = (0..c).find(|&i| adjacency[i][i]) {
            return bad(format!("self loop at cache {i}"));
        }
        for (i, s) in storage.iter().enumerate() {
            if let Capacity::Finite(v) = s {
                if !(*v >= T::zero() && v.is_finite()) {
                    return bad(format!("storage of cache {i} must be non-negative"));
                }
            }
        }
        for (i, s) in service.iter().enumerate() {
            if let Capacity::Finite(v) = s {
                if !(*v >= T::zero() && v.is_finite()) {
                    return bad(format!("service rate of cache {i} must be non-negative"));
                }
            }
        }
        if demand.iter().flatten().any(|&x| !(x >= T::zero() && x.is_finite())) {
            return bad("demand rates must be finite and non-negative".into());
        }
        if sizes.iter().any(|&t| !(t > T::zero() && t.is_finite())) {
            return bad("file sizes must be positive".into());
        }
        Ok(Self { adjacency, storage, service, demand, sizes })
    }

    pub fn caches(&self) -> usize {
        self.storage.len()
    }

    pub fn files(&self) -> usize {
        self.sizes.len()
    }

    pub fn has_link(&self, from: usize, to: usize) -> bool {
        self.adjacency[from][to]
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    pub fn out_degree(&self, cache: usize) -> usize {
        self.adjacency[cache].iter().filter(|&&e| e).count()
    }

    pub fn neighbors(&self, cache: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[cache].iter().enumerate().filter(|(_, &e)| e).map(|(j, _)| j)
    }

    pub fn storage(&self) -> &[Capacity<T>] {
        &self.storage
    }

    pub fn service(&self) -> &[Capacity<T>] {
        &self.service
    }

    pub fn demand(&self) -> &[Vec<T>] {
        &self.demand
    }

    pub fn sizes(&self) -> &[T] {
        &self.sizes
    }

    /// Total exogenous request rate.
    pub fn total_demand(&self) -> T {
        self.demand.iter().flatten().copied().sum()
    }

    pub fn set_service(&mut self, service: Vec<Capacity<T>>) -> Result<()> {
        if service.len() != self.caches() {
            return Err(Error::InvalidNetwork("service vector length mismatch".into()));
        }
        self.service = service;
        Ok(())
    }
}

/// Per-cache, per-file probability that the file is found.
#[derive(Debug, Clone, PartialEq)]
pub struct AvailabilityProfile<T> {
    pi: Vec<Vec<T>>,
}

impl<T: Real> AvailabilityProfile<T> {
    pub fn new(pi: Vec<Vec<T>>) -> Result<Self> {
        if pi.iter().flatten().any(|&p| !(p >= T::zero() && p <= T::one())) {
            return Err(domain("availability entries must lie in [0,1]"));
        }
        Ok(Self { pi })
    }

    pub fn uniform(caches: usize, files: usize, p: T) -> Result<Self> {
        Self::new(vec![vec![p; files]; caches])
    }

    /// Static placement: `placed[i][f]` stores file `f` at cache `i`.
    pub fn from_binary(placed: &[Vec<bool>]) -> Self {
        Self { pi: placed.iter().map(|r| r.iter().map(|&b| if b { T::one() } else { T::zero() }).collect()).collect() }
    }

    pub fn get(&self, cache: usize, file: usize) -> T {
        self.pi[cache][file]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.pi
    }

    pub fn is_binary(&self) -> bool {
        self.pi.iter().flatten().all(|&p| p == T::zero() || p == T::one())
    }

    fn check_dims(&self, net: &CacheNetwork<T>) -> Result<()> {
        if self.pi.len() != net.caches() || self.pi.iter().any(|r| r.len() != net.files()) {
            return Err(domain(format!("availability must be {}x{}", net.caches(), net.files())));
        }
        Ok(())
    }
}

/// `p[h][i] = 1/d_h` on links, zero elsewhere. Caches without outgoing
/// links get a zero row.
pub fn routing_matrix<T: Real>(net: &CacheNetwork<T>) -> Vec<Vec<T>> {
    (0..net.caches())
        .map(|h| {
            let d = net.out_degree(h);
            (0..net.caches())
                .map(|i| if net.has_link(h, i) { T::one() / T::from_count(d) } else { T::zero() })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution<T> {
    /// `alpha[i][f]`: total request rate for file `f` arriving at cache `i`.
    pub alpha: Vec<Vec<T>>,
    /// `alpha_i = sum_f alpha[i][f]`.
    pub alpha_cache: Vec<T>,
}

impl<T: Real> FlowSolution<T> {
    pub fn total(&self) -> T {
        self.alpha_cache.iter().copied().sum()
    }
}

/// Caches that a request for `file` can visit, starting from exogenous
/// demand and following links out of caches that may miss.
fn miss_reachable<T: Real>(net: &CacheNetwork<T>, pi: &dyn Fn(usize) -> T, file: usize) -> Vec<bool> {
    let mut seen = vec![false; net.caches()];
    let mut stack: Vec<usize> = (0..net.caches()).filter(|&i| net.demand[i][file] > T::zero()).collect();
    for &i in &stack {
        seen[i] = true;
    }
    while let Some(h) = stack.pop() {
        if pi(h) >= T::one() {
            continue;
        }
        for j in net.neighbors(h) {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// Caches a request for `file` can visit, after checking that each of them
/// can pass a miss on and eventually reach a cache that may serve it.
pub(crate) fn routable_members<T: Real>(
    net: &CacheNetwork<T>,
    pi: &dyn Fn(usize) -> T,
    file: usize,
) -> Result<Vec<usize>> {
    let c = net.caches();
    let reach = miss_reachable(net, pi, file);
    let members: Vec<usize> = (0..c).filter(|&i| reach[i]).collect();
    for &i in &members {
        if pi(i) < T::one() && net.out_degree(i) == 0 {
            return Err(Error::SinkWithoutStorage { cache: i, file });
        }
    }
    let mut drains: Vec<bool> = (0..c).map(|i| reach[i] && pi(i) > T::zero()).collect();
    loop {
        let mut changed = false;
        for &h in &members {
            if !drains[h] && net.neighbors(h).any(|j| drains[j]) {
                drains[h] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if members.iter().any(|&i| !drains[i]) {
        return Err(Error::UnplacedContent { file });
    }
    Ok(members)
}

/// Solves the flow balance for one file. Only caches reachable from demand
/// enter the linear system; the rest carry zero flow.
pub(crate) fn solve_file<T: Real>(
    net: &CacheNetwork<T>,
    pi: &dyn Fn(usize) -> T,
    routing: &[Vec<T>],
    file: usize,
) -> Result<Vec<T>> {
    let members = routable_members(net, pi, file)?;
    let mut alpha = vec![T::zero(); net.caches()];
    if members.is_empty() {
        return Ok(alpha);
    }
    let n = members.len();
    let mut a = vec![vec![T::zero(); n]; n];
    let mut b = vec![T::zero(); n];
    for (r, &j) in members.iter().enumerate() {
        a[r][r] = T::one();
        b[r] = net.demand[j][file];
        for (s, &k) in members.iter().enumerate() {
            if k != j {
                a[r][s] = a[r][s] - (T::one() - pi(k)) * routing[k][j];
            }
        }
    }
    let x = solve_dense(a.clone(), b.clone()).map_err(|_| Error::UnplacedContent { file })?;
    let scale = b.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(1e3)) * scale.max(T::min_positive_value());
    for r in 0..n {
        let lhs = (0..n).fold(T::zero(), |s, q| s + a[r][q] * x[q]);
        if !((lhs - b[r]).abs() <= tol) {
            return Err(Error::UnplacedContent { file });
        }
    }
    for (r, &j) in members.iter().enumerate() {
        alpha[j] = x[r];
    }
    Ok(alpha)
}

/// Per-file flow balance under the mean-field miss model.
pub fn solve_flow<T: Real>(net: &CacheNetwork<T>, profile: &AvailabilityProfile<T>) -> Result<FlowSolution<T>> {
    profile.check_dims(net)?;
    let routing = routing_matrix(net);
    let (c, f) = (net.caches(), net.files());
    let mut alpha = vec![vec![T::zero(); f]; c];
    for file in 0..f {
        let col = solve_file(net, &|i| profile.get(i, file), &routing, file)?;
        for i in 0..c {
            alpha[i][file] = col[i];
        }
    }
    let alpha_cache = alpha.iter().map(|r| r.iter().copied().sum()).collect();
    Ok(FlowSolution { alpha, alpha_cache })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport<T> {
    pub stable: bool,
    /// `eta_i - alpha_i`; `None` for unbounded service.
    pub slack: Vec<Option<T>>,
}

pub fn stability<T: Real>(
    net: &CacheNetwork<T>,
    solution: &FlowSolution<T>,
    rule: StabilityRule,
) -> StabilityReport<T> {
    let stable = net.service.iter().zip(&solution.alpha_cache).all(|(cap, &a)| cap.admits(a, rule));
    let slack = net.service.iter().zip(&solution.alpha_cache).map(|(cap, &a)| cap.slack(a)).collect();
    StabilityReport { stable, slack }
}

/// How `E[N_i]` is computed from the per-cache load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueueMetric {
    /// `alpha_i / eta_i`, as in the model.
    #[default]
    Utilization,
    /// M/M/1 mean number in system `u / (1 - u)` with `u = alpha_i / eta_i`.
    Mm1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseTime<T> {
    pub en: T,
    pub et: T,
}

/// `E[N] = sum_i E[N_i]`, `E[T] = E[N] / Lambda` (Little's law).
pub fn response_time<T: Real>(
    net: &CacheNetwork<T>,
    solution: &FlowSolution<T>,
    metric: QueueMetric,
) -> Result<ResponseTime<T>> {
    let total = net.total_demand();
    if !(total > T::zero()) {
        return Err(domain("response time needs positive exogenous demand"));
    }
    let mut en = T::zero();
    for (cap, &a) in net.service.iter().zip(&solution.alpha_cache) {
        let Some(eta) = cap.finite() else { continue };
        let u = a / eta;
        en = en
            + match metric {
                QueueMetric::Utilization => u,
                QueueMetric::Mm1 if u < T::one() => u / (T::one() - u),
                QueueMetric::Mm1 => T::infinity(),
            };
    }
    Ok(ResponseTime { en, et: en / total })
}

/// How the threshold of each provisioned counter is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KPolicy<T> {
    Fixed(T),
    Optimized(CostWeights<T>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CounterPlan<T> {
    /// Target 1: the file is a static replica, no counter.
    Pinned,
    /// Target 0: never cached.
    Absent,
    /// The cache sees no requests for the file.
    Idle,
    Counter {
        params: CounterParams<T>,
        gamma: T,
        mean_return: T,
    },
}

/// Sizes one counter per `(cache, file)` so that each reaches its
/// availability target under the solved request rates.
pub fn provision_network<T: Real>(
    net: &CacheNetwork<T>,
    targets: &AvailabilityProfile<T>,
    policy: KPolicy<T>,
) -> Result<Vec<Vec<CounterPlan<T>>>> {
    let flow = solve_flow(net, targets)?;
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(1e4));
    let mut plans = Vec::with_capacity(net.caches());
    for i in 0..net.caches() {
        let mut row = Vec::with_capacity(net.files());
        for f in 0..net.files() {
            let pi = targets.get(i, f);
            let rate = flow.alpha[i][f];
            let plan = if pi >= T::one() {
                CounterPlan::Pinned
            } else if pi <= T::zero() {
                CounterPlan::Absent
            } else if !(rate > T::zero()) {
                CounterPlan::Idle
            } else {
                let k = match policy {
                    KPolicy::Fixed(k) => k,
                    KPolicy::Optimized(w) => minimize(&w, pi, rate)?.k,
                };
                let spec = TargetSpec::new(pi, rate, k)?;
                let prov = provision_from_target(&spec)?;
                let params = CounterParams::new(rate, prov.mu, k)?;
                let back = crate::counter::occupancy_probability(&params)?;
                if (back - pi).abs() > tol * pi {
                    return Err(domain(format!("occupancy round trip failed at cache {i}, file {f}")));
                }
                CounterPlan::Counter { params, gamma: prov.gamma, mean_return: prov.mean_return }
            };
            row.push(plan);
        }
        plans.push(row);
    }
    Ok(plans)
}

/// Per-cache summary: `cache,alpha,service,slack,stable`.
pub fn flow_csv<T: Real>(net: &CacheNetwork<T>, solution: &FlowSolution<T>, rule: StabilityRule) -> String {
    let mut out = String::from("cache,alpha,service,slack,stable\n");
    for (i, &a) in solution.alpha_cache.iter().enumerate() {
        let cap = net.service[i];
        let service = cap.finite().map_or("inf".to_string(), |v| format_sig(v.as_f64()));
        let slack = cap.slack(a).map_or("inf".to_string(), |v| format_sig(v.as_f64()));
        out.push_str(&format!("{i},{},{service},{slack},{}\n", format_sig(a.as_f64()), cap.admits(a, rule)));
    }
    out
}

/// Per-file detail: `cache,file,alpha`.
pub fn flow_detail_csv<T: Real>(solution: &FlowSolution<T>) -> String {
    let mut out = String::from("cache,file,alpha\n");
    for (i, row) in solution.alpha.iter().enumerate() {
        for (f, &a) in row.iter().enumerate() {
            out.push_str(&format!("{i},{f},{}\n", format_sig(a.as_f64())));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn ring(n: usize, rate: f64, eta: f64) -> CacheNetwork<f64> {
        let mut adj = vec![vec![false; n]; n];
        for i in 0..n {
            adj[i][(i + 1) % n] = true;
            adj[(i + 1) % n][i] = true;
        }
        CacheNetwork::new(
            adj,
            vec![Capacity::Finite(1.0); n],
            vec![Capacity::Finite(eta); n],
            vec![vec![rate]; n],
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn routing_examples() {
        let p = routing_matrix(&ring(2, 1.0, 4.0));
        assert_eq!(p, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let mut adj = vec![vec![false; 4]; 4];
        for leaf in 1..4 {
            adj[0][leaf] = true;
            adj[leaf][0] = true;
        }
        let star = CacheNetwork::new(
            adj,
            vec![Capacity::Finite(1.0); 4],
            vec![Capacity::Unbounded; 4],
            vec![vec![0.0]; 4],
            vec![1.0],
        )
        .unwrap();
        let p = routing_matrix(&star);
        assert_eq!(p[0], vec![0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(p[1], vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn isolated_cache_holding_content_is_accepted() {
        let net = CacheNetwork::new(
            vec![vec![false]],
            vec![Capacity::Finite(1.0)],
            vec![Capacity::Finite(2.0)],
            vec![vec![1.0]],
            vec![1.0],
        )
        .unwrap();
        assert_eq!(routing_matrix(&net), vec![vec![0.0]]);
        let sol = solve_flow(&net, &AvailabilityProfile::uniform(1, 1, 1.0).unwrap()).unwrap();
        assert_eq!(sol.alpha_cache, vec![1.0]);
        let err = solve_flow(&net, &AvailabilityProfile::uniform(1, 1, 0.5).unwrap());
        assert_eq!(err, Err(Error::SinkWithoutStorage { cache: 0, file: 0 }));
    }

    #[test]
    fn self_loops_are_rejected() {
        let r = CacheNetwork::new(
            vec![vec![true]],
            vec![Capacity::Finite(1.0)],
            vec![Capacity::Finite(1.0)],
            vec![vec![1.0]],
            vec![1.0],
        );
        assert!(matches!(r, Err(Error::InvalidNetwork(_))));
    }

    #[test]
    fn ring_flow_examples() {
        let net = ring(2, 1.0, 4.0);
        let sol = solve_flow(&net, &AvailabilityProfile::uniform(2, 1, 0.5).unwrap()).unwrap();
        assert_relative_eq!(sol.alpha_cache[0], 2.0, max_relative = 1e-14);
        assert_relative_eq!(sol.alpha_cache[1], 2.0, max_relative = 1e-14);

        let sol = solve_flow(&net, &AvailabilityProfile::uniform(2, 1, 1.0).unwrap()).unwrap();
        assert_eq!(sol.alpha_cache, vec![1.0, 1.0]);

        let mut demand = net.demand().to_vec();
        demand[1][0] = 0.0;
        let net = CacheNetwork::new(
            net.adjacency().to_vec(),
            net.storage().to_vec(),
            net.service().to_vec(),
            demand,
            vec![1.0],
        )
        .unwrap();
        let prof = AvailabilityProfile::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let sol = solve_flow(&net, &prof).unwrap();
        assert_eq!(sol.alpha_cache, vec![1.0, 1.0]);
    }

    #[test]
    fn unplaced_content_is_named() {
        let net = ring(3, 1.0, 4.0);
        let prof = AvailabilityProfile::uniform(3, 1, 0.0).unwrap();
        assert_eq!(solve_flow(&net, &prof), Err(Error::UnplacedContent { file: 0 }));
    }

    #[test]
    fn stability_examples() {
        let net = ring(2, 1.0, 3.0);
        let sol = FlowSolution { alpha: vec![vec![2.0], vec![2.0]], alpha_cache: vec![2.0, 2.0] };
        assert!(stability(&net, &sol, StabilityRule::Strict).stable);
        let net = ring(2, 1.0, 2.0);
        let rep = stability(&net, &sol, StabilityRule::Strict);
        assert!(!rep.stable);
        assert!(stability(&net, &sol, StabilityRule::NonStrict).stable);
        let mut net = ring(2, 1.0, 2.0);
        net.set_service(vec![Capacity::Finite(2.1), Capacity::Finite(1.9)]).unwrap();
        let rep = stability(&net, &sol, StabilityRule::Strict);
        assert!(!rep.stable);
        assert_relative_eq!(rep.slack[0].unwrap(), 0.1, epsilon = 1e-12);
        assert_relative_eq!(rep.slack[1].unwrap(), -0.1, epsilon = 1e-12);
    }

    #[test]
    fn response_time_examples() {
        let net = ring(2, 1.0, 4.0);
        let sol = solve_flow(&net, &AvailabilityProfile::uniform(2, 1, 0.5).unwrap()).unwrap();
        let rt = response_time(&net, &sol, QueueMetric::Utilization).unwrap();
        assert_relative_eq!(rt.en, 1.0, max_relative = 1e-14);
        assert_relative_eq!(rt.et, 0.5, max_relative = 1e-14);

        let net2 = ring(2, 1.0, 2.0);
        let sol2 = solve_flow(&net2, &AvailabilityProfile::uniform(2, 1, 1.0).unwrap()).unwrap();
        let rt2 = response_time(&net2, &sol2, QueueMetric::Utilization).unwrap();
        assert_eq!((rt2.en, rt2.et), (1.0, 0.5));

        let net3 = ring(2, 1.0, 8.0);
        let rt3 = response_time(&net3, &sol, QueueMetric::Utilization).unwrap();
        assert_relative_eq!(rt3.en, rt.en / 2.0);
        assert_relative_eq!(rt3.et, rt.et / 2.0);

        let mm1 = response_time(&net, &sol, QueueMetric::Mm1).unwrap();
        assert_relative_eq!(mm1.en, 2.0, max_relative = 1e-14);

        let idle = ring(2, 0.0, 4.0);
        let sol0 = solve_flow(&idle, &AvailabilityProfile::uniform(2, 1, 0.5).unwrap()).unwrap();
        assert!(response_time(&idle, &sol0, QueueMetric::Utilization).is_err());
    }

    #[test]
    fn provisioning_examples() {
        let net = ring(2, 1.0, 4.0);
        let targets = AvailabilityProfile::uniform(2, 1, 0.5).unwrap();
        let plans = provision_network(&net, &targets, KPolicy::Fixed(0.0)).unwrap();
        for row in &plans {
            match row[0] {
                CounterPlan::Counter { params, .. } => {
                    assert_relative_eq!(params.lambda, 2.0, max_relative = 1e-14);
                    assert_relative_eq!(params.mu, 4.0, max_relative = 1e-14);
                }
                other => panic!("unexpected plan {other:?}"),
            }
        }
        let pinned =
            provision_network(&net, &AvailabilityProfile::uniform(2, 1, 1.0).unwrap(), KPolicy::Fixed(0.0)).unwrap();
        assert_eq!(pinned[0][0], CounterPlan::Pinned);

        let w = CostWeights::with_default_k_max(1.0, 1.0).unwrap();
        let opt = provision_network(&net, &targets, KPolicy::Optimized(w)).unwrap();
        let single = minimize(&w, 0.5, 2.0).unwrap().k;
        match opt[1][0] {
            CounterPlan::Counter { params, .. } => assert_relative_eq!(params.k, single, max_relative = 1e-12),
            other => panic!("unexpected plan {other:?}"),
        }
    }

    #[test]
    fn csv_has_one_row_per_cache() {
        let net = ring(2, 1.0, 4.0);
        let sol = solve_flow(&net, &AvailabilityProfile::uniform(2, 1, 0.5).unwrap()).unwrap();
        let csv = flow_csv(&net, &sol, StabilityRule::Strict);
        assert_eq!(csv, "cache,alpha,service,slack,stable\n0,2,4,2,true\n1,2,4,2,true\n");
        assert_eq!(flow_detail_csv(&sol).lines().count(), 3);
    }
}

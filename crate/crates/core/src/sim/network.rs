//! Request-level simulation of a cache network.
//!
//! Exogenous requests arrive as Poisson streams per (cache, file). At each
//! visit the file is either found (the request ends) or missed. A miss joins
//! the cache's FIFO control-plane queue (exponential service at rate `eta`;
//! unbounded service forwards at once) and is then forwarded over a
//! uniformly chosen outgoing link. Misses at a cache with no links are lost.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{replicate, stream, BatchData, Batcher, Estimate, Metric, SimConfig, SimReport};
use crate::counter::randomized_threshold;
use crate::error::{domain, Result};
use crate::network::{AvailabilityProfile, CacheNetwork, Capacity, CounterPlan};

/// How availability is decided at each visit.
#[derive(Debug, Clone, PartialEq)]
pub enum AvailabilityMode {
    /// Independent draw with probability `pi[i][f]` at every visit.
    Frozen(AvailabilityProfile<f64>),
    /// One reinforced counter per (cache, file), driven by the requests that
    /// actually reach it.
    Live(Vec<Vec<CounterPlan<f64>>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSim {
    pub mode: AvailabilityMode,
    /// A cache is flagged unstable when its final queue exceeds
    /// `drift_fraction * eta * elapsed`.
    pub drift_fraction: f64,
}

impl NetworkSim {
    pub fn frozen(profile: AvailabilityProfile<f64>) -> Self {
        Self { mode: AvailabilityMode::Frozen(profile), drift_fraction: 0.05 }
    }

    pub fn live(plans: Vec<Vec<CounterPlan<f64>>>) -> Self {
        Self { mode: AvailabilityMode::Live(plans), drift_fraction: 0.05 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Time(f64);

impl PartialEq for Time {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Exogenous,
    Done(usize),
    Tick(usize, usize),
}

#[derive(Debug, Clone, Copy)]
struct Request {
    file: usize,
    born: f64,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Always,
    Never,
    Counter { mu: f64, k_real: f64, n: u64, k_in: u64, cached: bool },
}

struct State<'a, R: Rng> {
    net: &'a CacheNetwork<f64>,
    frozen: Option<&'a AvailabilityProfile<f64>>,
    slots: Vec<Vec<Slot>>,
    queues: Vec<VecDeque<Request>>,
    levels: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
    rng_hit: R,
    rng_route: R,
    rng_service: R,
    rng_k: R,
    services: Vec<Option<Exp<f64>>>,
}

// count metric layout
const RESPONSE_SUM: usize = 0;
const COMPLETED: usize = 1;
const LOST: usize = 2;
const FIXED_COUNTS: usize = 3;

impl<R: Rng> State<'_, R> {
    fn draw_k(&mut self, k_real: f64) -> u64 {
        let r = randomized_threshold(k_real);
        if self.rng_k.random::<f64>() < r.weight {
            r.high
        } else {
            r.low
        }
    }

    fn level_of_slot(&self, i: usize, f: usize) -> usize {
        self.net.caches() + i * self.net.files() + f
    }

    /// Processes a request arriving at `cache`; follows unbounded forwarding
    /// until the request is served, queued or lost.
    fn visit(&mut self, mut cache: usize, req: Request, t: f64, idx: u64, batcher: &mut Batcher, heap: &mut Heap) {
        let c = self.net.caches();
        loop {
            batcher.count(t, idx, FIXED_COUNTS + cache, 1.0);
            let f = req.file;
            let mut inserted = false;
            if let Slot::Counter { n, k_in, cached, .. } = &mut self.slots[cache][f] {
                *n += 1;
                if !*cached && *n > *k_in {
                    *cached = true;
                    inserted = true;
                }
            }
            if inserted {
                let l = self.level_of_slot(cache, f);
                self.levels[l] = 1.0;
            }
            let hit = match self.frozen {
                Some(p) => self.rng_hit.random::<f64>() < p.get(cache, f),
                None => match self.slots[cache][f] {
                    Slot::Always => true,
                    Slot::Never => false,
                    Slot::Counter { cached, .. } => cached,
                },
            };
            if hit {
                if batcher.in_measurement(req.born) {
                    batcher.count(t, idx, RESPONSE_SUM, t - req.born);
                    batcher.count(t, idx, COMPLETED, 1.0);
                }
                return;
            }
            batcher.count(t, idx, FIXED_COUNTS + c + cache, 1.0);
            match self.services[cache] {
                Some(exp) => {
                    self.queues[cache].push_back(req);
                    self.levels[cache] += 1.0;
                    if self.queues[cache].len() == 1 {
                        let d = exp.sample(&mut self.rng_service);
                        heap.push(t + d, Event::Done(cache));
                    }
                    return;
                }
                None => match self.forward(cache) {
                    Some(next) => cache = next,
                    None => {
                        batcher.count(t, idx, LOST, 1.0);
                        return;
                    }
                },
            }
        }
    }

    fn forward(&mut self, cache: usize) -> Option<usize> {
        let nb = &self.neighbors[cache];
        if nb.is_empty() {
            return None;
        }
        Some(nb[self.rng_route.random_range(0..nb.len())])
    }
}

struct Heap {
    inner: BinaryHeap<Reverse<(Time, u64, Event)>>,
    seq: u64,
}

impl Heap {
    fn push(&mut self, t: f64, e: Event) {
        self.inner.push(Reverse((Time(t), self.seq, e)));
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<(f64, Event)> {
        self.inner.pop().map(|Reverse((t, _, e))| (t.0, e))
    }

    fn peek_time(&self) -> f64 {
        self.inner.peek().map_or(f64::INFINITY, |Reverse((t, _, _))| t.0)
    }
}

struct RunOutput {
    batches: BatchData,
    unstable: Vec<bool>,
    events: u64,
}

fn run_once(net: &CacheNetwork<f64>, sim: &NetworkSim, cfg: &SimConfig, rep: usize) -> Result<RunOutput> {
    let (c, nf) = (net.caches(), net.files());
    let total = net.total_demand();
    let mut rng_arr = stream(cfg.seed, rep, 0);
    let mut rng_pick = stream(cfg.seed, rep, 1);
    let mut rng_tick = stream(cfg.seed, rep, 5);
    let sources: Vec<(usize, usize, f64)> = (0..c)
        .flat_map(|i| (0..nf).map(move |f| (i, f)))
        .filter_map(|(i, f)| {
            let r = net.demand()[i][f];
            (r > 0.0).then_some((i, f, r))
        })
        .collect();
    let cumulative: Vec<f64> = sources
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.2;
            Some(*acc)
        })
        .collect();
    let exo = if total > 0.0 { Some(Exp::new(total).map_err(|e| domain(e.to_string()))?) } else { None };
    let services = net
        .service()
        .iter()
        .map(|s| match s {
            Capacity::Finite(eta) if *eta > 0.0 => Exp::new(*eta).map(Some).map_err(|e| domain(e.to_string())),
            Capacity::Finite(_) => Err(domain("simulation needs positive service rates")),
            Capacity::Unbounded => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let live = matches!(sim.mode, AvailabilityMode::Live(_));
    let n_levels = c + if live { c * nf } else { 0 };
    let mut batcher = Batcher::new(cfg, n_levels, FIXED_COUNTS + 2 * c);
    let mut state = State {
        net,
        frozen: match &sim.mode {
            AvailabilityMode::Frozen(p) => Some(p),
            AvailabilityMode::Live(_) => None,
        },
        slots: vec![vec![Slot::Never; nf]; c],
        queues: vec![VecDeque::new(); c],
        levels: vec![0.0; n_levels],
        neighbors: (0..c).map(|i| net.neighbors(i).collect()).collect(),
        rng_hit: stream(cfg.seed, rep, 2),
        rng_route: stream(cfg.seed, rep, 3),
        rng_service: stream(cfg.seed, rep, 4),
        rng_k: stream(cfg.seed, rep, 6),
        services,
    };
    let mut heap = Heap { inner: BinaryHeap::new(), seq: 0 };
    if let AvailabilityMode::Live(plans) = &sim.mode {
        if plans.len() != c || plans.iter().any(|r| r.len() != nf) {
            return Err(domain(format!("counter plans must be {c}x{nf}")));
        }
        for i in 0..c {
            for f in 0..nf {
                state.slots[i][f] = match plans[i][f] {
                    CounterPlan::Pinned => Slot::Always,
                    CounterPlan::Absent | CounterPlan::Idle => Slot::Never,
                    CounterPlan::Counter { params, .. } => {
                        let k_in = state.draw_k(params.k);
                        let tick = Exp::new(params.mu).map_err(|e| domain(e.to_string()))?;
                        heap.push(tick.sample(&mut rng_tick), Event::Tick(i, f));
                        Slot::Counter { mu: params.mu, k_real: params.k, n: 0, k_in, cached: false }
                    }
                };
                if matches!(state.slots[i][f], Slot::Always) {
                    let l = state.level_of_slot(i, f);
                    state.levels[l] = 1.0;
                }
            }
        }
    }
    if let Some(exp) = exo {
        heap.push(exp.sample(&mut rng_arr), Event::Exogenous);
    }
    let mut t = 0.0;
    let mut idx: u64 = 0;
    loop {
        let t_ev = heap.peek_time();
        batcher.advance(t, t_ev, idx, &state.levels);
        if batcher.finished(t_ev, idx) || !t_ev.is_finite() {
            break;
        }
        let (_, ev) = heap.pop().expect("peeked");
        t = t_ev;
        match ev {
            Event::Exogenous => {
                let exp = exo.expect("arrivals scheduled only with demand");
                heap.push(t + exp.sample(&mut rng_arr), Event::Exogenous);
                let u = rng_pick.random::<f64>() * total;
                let s = cumulative.partition_point(|&x| x <= u).min(sources.len() - 1);
                let (i, f, _) = sources[s];
                state.visit(i, Request { file: f, born: t }, t, idx, &mut batcher, &mut heap);
            }
            Event::Done(i) => {
                let req = state.queues[i].pop_front().expect("service completes a queued request");
                state.levels[i] -= 1.0;
                if !state.queues[i].is_empty() {
                    let d = state.services[i].expect("finite service").sample(&mut state.rng_service);
                    heap.push(t + d, Event::Done(i));
                }
                match state.forward(i) {
                    Some(next) => state.visit(next, req, t, idx, &mut batcher, &mut heap),
                    None => batcher.count(t, idx, LOST, 1.0),
                }
            }
            Event::Tick(i, f) => {
                let mut evicted = None;
                if let Slot::Counter { mu, k_real, n, k_in, cached } = &mut state.slots[i][f] {
                    let tick = Exp::new(*mu).map_err(|e| domain(e.to_string()))?;
                    heap.push(t + tick.sample(&mut rng_tick), Event::Tick(i, f));
                    if *n > 0 {
                        *n -= 1;
                        if *cached && *n <= *k_in {
                            *cached = false;
                            evicted = Some(*k_real);
                            let _ = k_in;
                        }
                    }
                }
                if let Some(k_real) = evicted {
                    let k = state.draw_k(k_real);
                    if let Slot::Counter { k_in, .. } = &mut state.slots[i][f] {
                        *k_in = k;
                    }
                    let l = state.level_of_slot(i, f);
                    state.levels[l] = 0.0;
                }
            }
        }
        idx += 1;
    }
    let elapsed = t;
    let unstable = (0..c)
        .map(|i| match net.service()[i] {
            Capacity::Finite(eta) => state.queues[i].len() as f64 > sim.drift_fraction * eta * elapsed,
            Capacity::Unbounded => false,
        })
        .collect();
    Ok(RunOutput { batches: batcher.into_batches(), unstable, events: idx })
}

/// Reports per-cache arrival rates `alpha_i` (all requests reaching the
/// cache), miss rates `miss_i`, time-averaged queue lengths `queue_i`, the
/// mean time from arrival to service `mean_response`, the loss rate and, in
/// live mode, the cached fraction `pi_up_i_f` of every counter.
pub fn simulate_network(net: &CacheNetwork<f64>, sim: &NetworkSim, cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    if let AvailabilityMode::Frozen(p) = &sim.mode {
        if p.rows().len() != net.caches() || p.rows().iter().any(|r| r.len() != net.files()) {
            return Err(domain("availability dimensions do not match the network"));
        }
    }
    if !(sim.drift_fraction > 0.0) {
        return Err(domain("drift fraction must be positive"));
    }
    let runs = replicate(cfg.replications, |rep| run_once(net, sim, cfg, rep));
    let c = net.caches();
    let mut parts = Vec::new();
    let mut unstable = vec![false; c];
    let mut report = SimReport::default();
    for r in runs {
        let r = r?;
        parts.push(r.batches);
        report.events += r.events;
        for (u, v) in unstable.iter_mut().zip(r.unstable) {
            *u |= v;
        }
    }
    let data = BatchData::merge(parts);
    report.measured_time = data.measured_time();
    report.alpha = (0..c).map(|i| data.rate(FIXED_COUNTS + i)).collect();
    let mut metrics = Vec::new();
    for i in 0..c {
        metrics.push(Metric { name: format!("alpha_{i}"), estimate: report.alpha[i] });
    }
    for i in 0..c {
        metrics.push(Metric { name: format!("miss_{i}"), estimate: data.rate(FIXED_COUNTS + c + i) });
    }
    for i in 0..c {
        metrics.push(Metric { name: format!("queue_{i}"), estimate: data.level(i) });
    }
    let response = super::ratio_batches(&data.counts[RESPONSE_SUM], &data.counts[COMPLETED]);
    metrics.push(Metric { name: "mean_response".into(), estimate: response });
    metrics.push(Metric { name: "lost_rate".into(), estimate: data.rate(LOST) });
    if let AvailabilityMode::Live(_) = sim.mode {
        for i in 0..c {
            for f in 0..net.files() {
                metrics.push(Metric { name: format!("pi_up_{i}_{f}"), estimate: data.level(c + i * net.files() + f) });
            }
        }
    }
    report.metrics = metrics;
    report.unstable_caches = (0..c).filter(|&i| unstable[i]).collect();
    Ok(report)
}

impl Estimate {
    /// Estimate of a quantity known exactly.
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{solve_flow, StabilityRule};
    use crate::placement::{reduce_partition, solve_exact, FlowAccounting, PartitionInstance, PlacementRules};
    use crate::sim::Horizon;

    fn ring(eta: Capacity<f64>) -> CacheNetwork<f64> {
        CacheNetwork::new(
            vec![vec![false, true], vec![true, false]],
            vec![Capacity::Finite(1.0); 2],
            vec![eta; 2],
            vec![vec![1.0]; 2],
            vec![1.0],
        )
        .unwrap()
    }

    fn cfg(t: f64) -> SimConfig {
        SimConfig { seed: 11, horizon: Horizon::Time(t), ..SimConfig::default() }
    }

    #[test]
    fn frozen_ring_matches_flow() {
        let net = ring(Capacity::Unbounded);
        let prof = AvailabilityProfile::uniform(2, 1, 0.5).unwrap();
        let sol = solve_flow(&net, &prof).unwrap();
        let r = simulate_network(&net, &NetworkSim::frozen(prof), &cfg(20_000.0)).unwrap();
        for i in 0..2 {
            assert!(r.alpha[i].covers(sol.alpha_cache[i], 3.0), "{:?}", r.alpha[i]);
        }
        assert!(!r.unstable());
    }

    #[test]
    fn full_availability_has_no_misses() {
        let net = ring(Capacity::Finite(3.0));
        let prof = AvailabilityProfile::uniform(2, 1, 1.0).unwrap();
        let r = simulate_network(&net, &NetworkSim::frozen(prof), &cfg(2000.0)).unwrap();
        assert_eq!(r.metric("miss_0").unwrap().value, 0.0);
        assert_eq!(r.metric("miss_1").unwrap().value, 0.0);
    }

    #[test]
    fn partition_verdicts_show_in_queues() {
        let rules = PlacementRules::new(FlowAccounting::MissLoad, StabilityRule::NonStrict);
        let pt = PartitionInstance::new(vec![1, 1, 2]).unwrap();
        let net = &reduce_partition::<f64>(&pt).unwrap()[2];
        let sol = solve_exact(net, rules).unwrap().unwrap();
        let prof = AvailabilityProfile::from_binary(sol.placement.rows());
        let r = simulate_network(net, &NetworkSim::frozen(prof), &cfg(20_000.0)).unwrap();
        assert!(!r.unstable());

        let pt = PartitionInstance::new(vec![1, 1, 1]).unwrap();
        let net = &reduce_partition::<f64>(&pt).unwrap()[1];
        let prof = AvailabilityProfile::from_binary(&[vec![true, false, false], vec![false, true, true]]);
        let r = simulate_network(net, &NetworkSim::frozen(prof), &cfg(20_000.0)).unwrap();
        assert!(r.unstable());
    }

    #[test]
    fn deterministic() {
        let net = ring(Capacity::Finite(5.0));
        let prof = AvailabilityProfile::uniform(2, 1, 0.5).unwrap();
        let sim = NetworkSim::frozen(prof);
        let c = SimConfig { replications: 3, ..cfg(500.0) };
        assert_eq!(simulate_network(&net, &sim, &c).unwrap(), simulate_network(&net, &sim, &c).unwrap());
    }
}

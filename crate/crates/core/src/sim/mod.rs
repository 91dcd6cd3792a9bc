//! Discrete-event simulation of counters and cache networks.
//!
//! Every stochastic source (arrivals, ticks, routing, ...) draws from its own
//! ChaCha stream, derived from the seed, the replication index and the
//! source index. A replication is sequential; replications run on separate
//! threads and are merged in index order, so reports are bitwise
//! reproducible.

mod counter;
mod network;
mod stats;

pub use counter::{
    randomized_threshold_metrics, simulate_counter, simulate_fractional_k, CounterModel, RandomizedMetrics,
};
pub use network::{simulate_network, AvailabilityMode, NetworkSim};
pub use stats::{empirical_cdf, kolmogorov_survival, ks_test, mean_stderr, ratio_batches, thin, Estimate, KsResult};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};
use crate::output::format_sig;

/// Simulation length, counting all events or simulated time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Events(u64),
    Time(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub horizon: Horizon,
    /// Leading fraction of the horizon that is discarded.
    pub warmup: f64,
    pub replications: usize,
    /// Batches per replication for standard errors.
    pub batches: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { seed: 1, horizon: Horizon::Events(1_000_000), warmup: 0.2, replications: 1, batches: 30 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let ok_horizon = match self.horizon {
            Horizon::Events(n) => n > 0,
            Horizon::Time(t) => t > 0.0 && t.is_finite(),
        };
        if !ok_horizon {
            return Err(domain("horizon must be positive"));
        }
        if !(0.0..1.0).contains(&self.warmup) {
            return Err(domain("warmup must lie in [0, 1)"));
        }
        if self.replications == 0 || self.batches < 2 {
            return Err(domain("need at least one replication and two batches"));
        }
        if let Horizon::Events(n) = self.horizon {
            let measured = n - (n as f64 * self.warmup) as u64;
            if measured < self.batches as u64 {
                return Err(domain("fewer measured events than batches"));
            }
        }
        Ok(())
    }
}

/// Independent stream for one source of one replication.
pub(crate) fn stream(seed: u64, replication: usize, source: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64 * 64 + source);
    rng
}

/// Accumulates time integrals ("levels") and event counts per batch.
pub(crate) struct Batcher {
    window: Window,
    batches: usize,
    pub(crate) duration: Vec<f64>,
    levels: Vec<Vec<f64>>,
    counts: Vec<Vec<f64>>,
    /// Simulated time at which measurement starts, once known.
    pub(crate) start: Option<f64>,
}

enum Window {
    Events { warm: u64, per: u64 },
    Time { warm: f64, per: f64 },
}

impl Batcher {
    pub(crate) fn new(cfg: &SimConfig, n_levels: usize, n_counts: usize) -> Self {
        let b = cfg.batches;
        let window = match cfg.horizon {
            Horizon::Events(n) => {
                let warm = (n as f64 * cfg.warmup) as u64;
                Window::Events { warm, per: (n - warm) / b as u64 }
            }
            Horizon::Time(t) => {
                let warm = t * cfg.warmup;
                Window::Time { warm, per: (t - warm) / b as f64 }
            }
        };
        let start = match window {
            Window::Time { warm, .. } => Some(warm),
            Window::Events { .. } => None,
        };
        Self {
            window,
            batches: b,
            duration: vec![0.0; b],
            levels: vec![vec![0.0; b]; n_levels],
            counts: vec![vec![0.0; b]; n_counts],
            start,
        }
    }

    fn event_batch(&self, idx: u64) -> Option<usize> {
        match self.window {
            Window::Events { warm, per } if idx >= warm => {
                let b = ((idx - warm) / per) as usize;
                (b < self.batches).then_some(b)
            }
            _ => None,
        }
    }

    /// Index of the batch containing time `t` (time horizon only).
    fn time_batch(&self, t: f64) -> Option<usize> {
        match self.window {
            Window::Time { warm, per } if t >= warm => {
                let b = ((t - warm) / per) as usize;
                (b < self.batches).then_some(b)
            }
            _ => None,
        }
    }

    /// Credits `(t0, t1]` at the given levels. `idx` is the index of the event
    /// that ends the interval.
    pub(crate) fn advance(&mut self, t0: f64, t1: f64, idx: u64, levels: &[f64]) {
        match self.window {
            Window::Events { warm, .. } => {
                if idx == warm && self.start.is_none() {
                    self.start = Some(t0);
                }
                if let Some(b) = self.event_batch(idx) {
                    self.add(b, t1 - t0, levels);
                }
            }
            Window::Time { warm, per } => {
                let mut a = t0.max(warm);
                let Some(mut b) = self.time_batch(a) else { return };
                while a < t1 && b < self.batches {
                    let end = if b + 1 == self.batches {
                        warm + per * self.batches as f64
                    } else {
                        warm + per * (b + 1) as f64
                    };
                    let end = end.min(t1);
                    if end > a {
                        self.add(b, end - a, levels);
                        a = end;
                    }
                    b += 1;
                }
            }
        }
    }

    fn add(&mut self, b: usize, dt: f64, levels: &[f64]) {
        self.duration[b] += dt;
        for (acc, &l) in self.levels.iter_mut().zip(levels) {
            acc[b] += l * dt;
        }
    }

    /// Adds `amount` to count metric `m` for an event at time `t`, index `idx`.
    pub(crate) fn count(&mut self, t: f64, idx: u64, m: usize, amount: f64) {
        let b = match self.window {
            Window::Events { .. } => self.event_batch(idx),
            Window::Time { .. } => self.time_batch(t),
        };
        if let Some(b) = b {
            self.counts[m][b] += amount;
        }
    }

    /// Whether the event with index `idx` at time `t` is past the horizon.
    pub(crate) fn finished(&self, t: f64, idx: u64) -> bool {
        match self.window {
            Window::Events { warm, per } => idx >= warm + per * self.batches as u64,
            Window::Time { warm, per } => t >= warm + per * self.batches as f64,
        }
    }

    pub(crate) fn in_measurement(&self, t: f64) -> bool {
        self.start.is_some_and(|s| t >= s)
    }

    pub(crate) fn into_batches(self) -> BatchData {
        BatchData { duration: self.duration, levels: self.levels, counts: self.counts }
    }
}

/// Per-batch totals of one or more replications.
#[derive(Debug, Clone, Default)]
pub(crate) struct BatchData {
    pub(crate) duration: Vec<f64>,
    pub(crate) levels: Vec<Vec<f64>>,
    pub(crate) counts: Vec<Vec<f64>>,
}

impl BatchData {
    pub(crate) fn merge(parts: Vec<BatchData>) -> BatchData {
        let mut out = BatchData::default();
        for p in parts {
            out.duration.extend(p.duration);
            if out.levels.is_empty() {
                out.levels = vec![Vec::new(); p.levels.len()];
                out.counts = vec![Vec::new(); p.counts.len()];
            }
            for (a, b) in out.levels.iter_mut().zip(p.levels) {
                a.extend(b);
            }
            for (a, b) in out.counts.iter_mut().zip(p.counts) {
                a.extend(b);
            }
        }
        out
    }

    pub(crate) fn level(&self, m: usize) -> Estimate {
        ratio_batches(&self.levels[m], &self.duration)
    }

    pub(crate) fn rate(&self, m: usize) -> Estimate {
        ratio_batches(&self.counts[m], &self.duration)
    }

    pub(crate) fn measured_time(&self) -> f64 {
        self.duration.iter().sum()
    }
}

/// Runs `run(rep)` for every replication on scoped threads and returns the
/// results in replication order.
pub(crate) fn replicate<R: Send, F>(replications: usize, run: F) -> Vec<R>
where
    F: Fn(usize) -> R + Sync,
{
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(replications).max(1);
    let mut out: Vec<Option<R>> = (0..replications).map(|_| None).collect();
    std::thread::scope(|s| {
        let run = &run;
        let handles: Vec<_> = (0..workers)
            .map(|w| s.spawn(move || (w..replications).step_by(workers).map(|r| (r, run(r))).collect::<Vec<_>>()))
            .collect();
        for h in handles {
            for (r, res) in h.join().expect("replication panicked") {
                out[r] = Some(res);
            }
        }
    });
    out.into_iter().map(|r| r.expect("every replication ran")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimReport {
    /// Named estimates in a fixed order.
    pub metrics: Vec<Metric>,
    /// Completed residence times (single-counter runs).
    pub busy_samples: Vec<f64>,
    /// Completed return times (single-counter runs).
    pub return_samples: Vec<f64>,
    /// Per-cache arrival rate, all requests counted (network runs).
    pub alpha: Vec<Estimate>,
    /// Caches whose queue grew faster than the drift threshold.
    pub unstable_caches: Vec<usize>,
    pub events: u64,
    pub measured_time: f64,
}

impl SimReport {
    pub fn metric(&self, name: &str) -> Option<Estimate> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.estimate)
    }

    pub fn unstable(&self) -> bool {
        !self.unstable_caches.is_empty()
    }

    /// `metric,estimate,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,estimate,stderr\n");
        for m in &self.metrics {
            out.push_str(&format!("{},{},{}\n", m.name, format_sig(m.estimate.value), format_sig(m.estimate.stderr)));
        }
        out.push_str(&format!("events,{},0\n", self.events));
        out.push_str(&format!("measured_time,{},0\n", format_sig(self.measured_time)));
        if !self.alpha.is_empty() {
            out.push_str(&format!("empirically_unstable,{},0\n", u8::from(self.unstable())));
        }
        out
    }

    /// Empirical CDF file `t,P`.
    pub fn cdf_csv(samples: &[f64]) -> String {
        let mut out = String::from("t,P\n");
        for (t, p) in empirical_cdf(samples) {
            out.push_str(&format!("{},{}\n", format_sig(t), format_sig(p)));
        }
        out
    }
}

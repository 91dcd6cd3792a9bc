//! Single reinforced counter, with or without hysteresis, and with a
//! randomized real threshold.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{mean_stderr, replicate, stream, BatchData, Batcher, Metric, SimConfig, SimReport};
use crate::counter::{randomized_threshold, CounterParams};
use crate::error::{domain, Result};
use crate::hysteresis::{HysteresisParams, TRUNCATION_TAIL};
use crate::linalg::Ctmc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CounterModel {
    Single {
        lambda: f64,
        mu: f64,
        k: u64,
    },
    Hysteresis(HysteresisParams<f64>),
    /// Threshold drawn from the two nearest integers at the start of every
    /// uncached period.
    Fractional {
        lambda: f64,
        mu: f64,
        k_real: f64,
    },
}

impl CounterModel {
    /// Integer thresholds give [`CounterModel::Single`], others
    /// [`CounterModel::Fractional`].
    pub fn from_params(p: &CounterParams<f64>) -> Self {
        if p.k.fract() == 0.0 {
            CounterModel::Single { lambda: p.lambda, mu: p.mu, k: p.k as u64 }
        } else {
            CounterModel::Fractional { lambda: p.lambda, mu: p.mu, k_real: p.k }
        }
    }

    fn rates(&self) -> (f64, f64) {
        match *self {
            CounterModel::Single { lambda, mu, .. } | CounterModel::Fractional { lambda, mu, .. } => (lambda, mu),
            CounterModel::Hysteresis(h) => (h.lambda, h.mu),
        }
    }
}

struct RunOutput {
    batches: BatchData,
    busy: Vec<f64>,
    ret: Vec<f64>,
    events: u64,
}

fn run_once(model: &CounterModel, cfg: &SimConfig, rep: usize) -> Result<RunOutput> {
    let (lambda, mu) = model.rates();
    let exp_a = Exp::new(lambda).map_err(|e| domain(e.to_string()))?;
    let exp_t = Exp::new(mu).map_err(|e| domain(e.to_string()))?;
    let mut rng_a = stream(cfg.seed, rep, 0);
    let mut rng_t = stream(cfg.seed, rep, 1);
    let mut rng_k = stream(cfg.seed, rep, 2);
    // (insert when the count reaches k_in + 1, evict when it falls to k_out)
    let mut draw = || -> (u64, u64) {
        match *model {
            CounterModel::Single { k, .. } => (k, k),
            CounterModel::Hysteresis(h) => (h.k as u64, h.k_h as u64),
            CounterModel::Fractional { k_real, .. } => {
                let r = randomized_threshold(k_real);
                let k = if rng_k.random::<f64>() < r.weight { r.high } else { r.low };
                (k, k)
            }
        }
    };
    let mut batcher = Batcher::new(cfg, 1, 1);
    let (mut k_in, mut k_out) = draw();
    let mut t = 0.0;
    let mut next_a = exp_a.sample(&mut rng_a);
    let mut next_t = exp_t.sample(&mut rng_t);
    let mut n: u64 = 0;
    let mut cached = false;
    let mut inserted_at = 0.0;
    let mut evicted_at: Option<f64> = None;
    let mut busy = Vec::new();
    let mut ret = Vec::new();
    let mut idx: u64 = 0;
    loop {
        let t_ev = next_a.min(next_t);
        let level = [if cached { 1.0 } else { 0.0 }];
        batcher.advance(t, t_ev, idx, &level);
        if batcher.finished(t_ev, idx) {
            break;
        }
        t = t_ev;
        if next_a <= next_t {
            next_a += exp_a.sample(&mut rng_a);
            n += 1;
            if !cached && n > k_in {
                cached = true;
                inserted_at = t;
                batcher.count(t, idx, 0, 1.0);
                if let Some(e) = evicted_at {
                    if batcher.in_measurement(e) {
                        ret.push(t - e);
                    }
                }
            }
        } else {
            next_t += exp_t.sample(&mut rng_t);
            if n > 0 {
                n -= 1;
                if cached && n <= k_out {
                    cached = false;
                    evicted_at = Some(t);
                    if batcher.in_measurement(inserted_at) {
                        busy.push(t - inserted_at);
                    }
                    (k_in, k_out) = draw();
                }
            }
        }
        idx += 1;
    }
    Ok(RunOutput { batches: batcher.into_batches(), busy, ret, events: idx })
}

/// Event-driven run. Reports time-averaged occupancy `pi_up`, insertion
/// rate `gamma`, and the means of the completed residence (`mean_busy`) and
/// return (`mean_return`) periods that started after warmup.
pub fn simulate_counter(model: &CounterModel, cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let (lambda, mu) = model.rates();
    if !(lambda > 0.0 && mu > 0.0 && lambda.is_finite() && mu.is_finite()) {
        return Err(domain("lambda and mu must be positive"));
    }
    if let CounterModel::Fractional { k_real, .. } = model {
        if !(*k_real >= 0.0 && k_real.is_finite()) {
            return Err(domain("threshold must be finite and non-negative"));
        }
    }
    let runs = replicate(cfg.replications, |rep| run_once(model, cfg, rep));
    let mut parts = Vec::with_capacity(runs.len());
    let mut report = SimReport::default();
    for r in runs {
        let r = r?;
        parts.push(r.batches);
        report.busy_samples.extend(r.busy);
        report.return_samples.extend(r.ret);
        report.events += r.events;
    }
    let data = BatchData::merge(parts);
    report.measured_time = data.measured_time();
    report.metrics = vec![
        Metric { name: "pi_up".into(), estimate: data.level(0) },
        Metric { name: "gamma".into(), estimate: data.rate(0) },
        Metric { name: "mean_busy".into(), estimate: mean_stderr(&report.busy_samples) },
        Metric { name: "mean_return".into(), estimate: mean_stderr(&report.return_samples) },
    ];
    Ok(report)
}

/// [`simulate_counter`] with a randomized real threshold.
pub fn simulate_fractional_k(lambda: f64, mu: f64, k_real: f64, cfg: &SimConfig) -> Result<SimReport> {
    simulate_counter(&CounterModel::Fractional { lambda, mu, k_real }, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizedMetrics {
    pub pi_up: f64,
    pub gamma: f64,
}

/// Exact occupancy and insertion rate of the randomized-threshold counter,
/// from the chain over (count, cached, current threshold).
pub fn randomized_threshold_metrics(lambda: f64, mu: f64, k_real: f64) -> Result<RandomizedMetrics> {
    if !(lambda > 0.0 && mu > lambda) {
        return Err(domain("need 0 < lambda < mu"));
    }
    let r = randomized_threshold(k_real);
    let options: Vec<(u64, f64)> =
        if r.low == r.high { vec![(r.low, 1.0)] } else { vec![(r.low, 1.0 - r.weight), (r.high, r.weight)] };
    let rho = lambda / mu;
    let extra = (TRUNCATION_TAIL.ln() / rho.ln()).floor() as u64 + 2;
    let n_max = r.high + extra;
    let mut index: HashMap<(u64, bool, usize), usize> = HashMap::new();
    let mut states = Vec::new();
    for n in 0..=n_max {
        for (o, &(k, _)) in options.iter().enumerate() {
            for cached in [false, true] {
                let valid = if cached { n > k } else { n <= r.high };
                if valid {
                    index.insert((n, cached, o), states.len());
                    states.push((n, cached, o));
                }
            }
        }
    }
    let mut chain = Ctmc::new(states.len());
    let mut insert_states = Vec::new();
    for (s, &(n, cached, o)) in states.iter().enumerate() {
        let k = options[o].0;
        if n < n_max {
            let to = if cached || n + 1 > k { (n + 1, true, o) } else { (n + 1, false, o) };
            if !cached && n + 1 > k {
                insert_states.push(s);
            }
            chain.add_rate(s, index[&to], lambda);
        }
        if n > 0 {
            if cached && n - 1 <= k {
                for (o2, &(_, p)) in options.iter().enumerate() {
                    chain.add_rate(s, index[&(n - 1, false, o2)], mu * p);
                }
            } else {
                chain.add_rate(s, index[&(n - 1, cached, o)], mu);
            }
        }
    }
    let pi = chain.stationary()?;
    let pi_up = states.iter().zip(&pi).filter(|((_, c, _), _)| *c).map(|(_, p)| p).sum();
    let gamma = insert_states.iter().map(|&s| pi[s]).sum::<f64>() * lambda;
    Ok(RandomizedMetrics { pi_up, gamma })
}

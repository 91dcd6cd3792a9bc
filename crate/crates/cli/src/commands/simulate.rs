//! Simulation command.

use std::path::PathBuf;

use anyhow::{bail, Result};
use cachenet::counter::{occupancy_probability, replacement_rate, CounterParams};
use cachenet::hysteresis::{renewal_occupancy, replacement_rate_hysteresis, sojourn_cdf, HysteresisParams, Sojourn};
use cachenet::network::{provision_network, solve_flow, KPolicy};
use cachenet::sim::{
    ks_test, randomized_threshold_metrics, simulate_counter, simulate_network, thin, CounterModel, Horizon, NetworkSim,
    SimConfig, SimReport,
};

use super::net::load_network;
use crate::config::{num, Config};
use crate::{Ctx, Outcome};

/// Largest sample used in a KS comparison.
const KS_CAP: usize = 5000;

fn sim_config(cfg: &Config, seed: u64) -> Result<SimConfig> {
    let horizon = match cfg.opt_f64("time")? {
        Some(t) => Horizon::Time(t),
        None => {
            if cfg.is_none("events") {
                bail!("set either time or events");
            }
            Horizon::Events(cfg.u64("events")?)
        }
    };
    let sc = SimConfig {
        seed,
        horizon,
        warmup: cfg.f64("warmup")?,
        replications: cfg.usize("replications")?,
        batches: cfg.usize("batches")?,
    };
    sc.validate()?;
    Ok(sc)
}

pub fn simulate(ctx: &Ctx) -> Result<Outcome> {
    let mode = ctx.mode(&["counter", "hysteresis", "fractional", "network"])?;
    if mode == "network" {
        return network(ctx, mode);
    }
    let mut defaults = vec![("lambda", "1"), ("mu", "2"), ("k", "1")];
    if mode == "hysteresis" {
        defaults.push(("k_h", "0"));
    }
    defaults.extend([
        ("events", "1000000"),
        ("time", "none"),
        ("warmup", "0.2"),
        ("replications", "1"),
        ("batches", "30"),
        ("cdf_dir", "none"),
    ]);
    let cfg = Config::resolve(&defaults, ctx.input.as_deref(), &ctx.sets)?;
    let sc = sim_config(&cfg, ctx.seed)?;
    let (lambda, mu) = (cfg.f64("lambda")?, cfg.f64("mu")?);
    let stable = lambda < mu;
    let mut comments = Vec::new();
    let (model, hyst) = match mode {
        "counter" | "hysteresis" => {
            let k = cfg.usize("k")?;
            let k_h = if mode == "hysteresis" { cfg.usize("k_h")? } else { k };
            let h = HysteresisParams::new(lambda, mu, k, k_h)?;
            let model = if mode == "counter" {
                CounterModel::Single { lambda, mu, k: k as u64 }
            } else {
                CounterModel::Hysteresis(h)
            };
            if stable {
                if mode == "counter" {
                    let p = CounterParams::new(lambda, mu, k as f64)?;
                    comments.push(("analytic_pi_up", occupancy_probability(&p)?));
                    comments.push(("analytic_gamma", replacement_rate(&p)?));
                } else {
                    comments.push(("analytic_pi_up", renewal_occupancy(&h)?));
                    comments.push(("analytic_gamma", replacement_rate_hysteresis(&h)?));
                }
            }
            (model, Some(h))
        }
        _ => {
            let k_real = cfg.f64("k")?;
            if stable {
                let m = randomized_threshold_metrics(lambda, mu, k_real)?;
                comments.push(("analytic_pi_up", m.pi_up));
                comments.push(("analytic_gamma", m.gamma));
            }
            (CounterModel::Fractional { lambda, mu, k_real }, None)
        }
    };
    let report = simulate_counter(&model, &sc)?;
    if let (Some(h), true) = (hyst, stable) {
        for (name, which, samples) in [
            ("ks_busy_p", Sojourn::Busy, &report.busy_samples),
            ("ks_return_p", Sojourn::Return, &report.return_samples),
        ] {
            if samples.len() >= 2 {
                let xs = thin(samples, KS_CAP);
                let mut err = None;
                let ks = ks_test(&xs, |grid| {
                    sojourn_cdf(&h, which, grid).unwrap_or_else(|e| {
                        err = Some(e);
                        vec![0.0; grid.len()]
                    })
                });
                if let Some(e) = err {
                    return Err(e.into());
                }
                comments.push((name, ks.p_value));
            }
        }
    }
    let mut out = ctx.header(mode, &cfg);
    out.push_str(&report.to_csv());
    for (k, v) in comments {
        out.push_str(&format!("# {k}={}\n", num(v)));
    }
    let mut files = Vec::new();
    if !cfg.is_none("cdf_dir") {
        let dir = PathBuf::from(cfg.str("cdf_dir"));
        files.push((dir.join("cdf_B.csv"), SimReport::cdf_csv(&report.busy_samples)));
        files.push((dir.join("cdf_R.csv"), SimReport::cdf_csv(&report.return_samples)));
    }
    Ok(Outcome { text: out, files, verdict_failed: false })
}

fn network(ctx: &Ctx, mode: &str) -> Result<Outcome> {
    let cfg = Config::resolve(
        &[
            ("availability", "frozen"),
            ("k", "0"),
            ("time", "10000"),
            ("events", "none"),
            ("warmup", "0.2"),
            ("replications", "1"),
            ("batches", "30"),
            ("drift", "0.05"),
        ],
        None,
        &ctx.sets,
    )?;
    let sc = sim_config(&cfg, ctx.seed)?;
    let nf = load_network(ctx)?;
    let net = &nf.network;
    let Some(profile) = nf.availability.clone() else { bail!("network file has no [availability] section") };
    let mut sim = match cfg.str("availability") {
        "frozen" => NetworkSim::frozen(profile.clone()),
        "live" => NetworkSim::live(provision_network(net, &profile, KPolicy::Fixed(cfg.f64("k")?))?),
        v => bail!("availability: expected frozen or live, got '{v}'"),
    };
    sim.drift_fraction = cfg.f64("drift")?;
    let report = simulate_network(net, &sim, &sc)?;
    let mut out = ctx.header(mode, &cfg);
    out.push_str(&report.to_csv());
    if let Ok(sol) = solve_flow(net, &profile) {
        for (i, a) in sol.alpha_cache.iter().enumerate() {
            out.push_str(&format!("# solved_alpha_{i}={}\n", num(*a)));
        }
    }
    for i in &report.unstable_caches {
        out.push_str(&format!("# empirically unstable at cache {i}\n"));
    }
    Ok(Outcome { text: out, files: Vec::new(), verdict_failed: report.unstable() })
}

//! Network and placement commands.

use anyhow::{anyhow, bail, Context, Result};
use cachenet::network::{
    expected_occupancy, flow_csv, flow_detail_csv, parse_network, provision_network, response_time, solve_flow,
    stability, CounterPlan, KPolicy, NetworkFile, OverflowMethod, QueueMetric, StabilityRule,
};
use cachenet::optimizer::CostWeights;
use cachenet::placement::{
    evaluate, export_miqcp, solve_by_enumeration, solve_exact, Evaluation, FlowAccounting, PlacementMatrix,
    PlacementRules,
};

use crate::config::{num, Config};
use crate::{Ctx, Outcome};

pub fn load_network(ctx: &Ctx) -> Result<NetworkFile<f64>> {
    let path = ctx.input.as_ref().ok_or_else(|| anyhow!("{} needs --in <network file>", ctx.command))?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_network(&text).with_context(|| format!("in {}", path.display()))
}

pub fn stability_rule(cfg: &Config) -> Result<StabilityRule> {
    match cfg.str("stability") {
        "strict" => Ok(StabilityRule::Strict),
        "nonstrict" => Ok(StabilityRule::NonStrict),
        v => bail!("stability: expected strict or nonstrict, got '{v}'"),
    }
}

fn accounting(cfg: &Config) -> Result<FlowAccounting> {
    match cfg.str("accounting") {
        "verbatim" => Ok(FlowAccounting::Verbatim),
        "missload" => Ok(FlowAccounting::MissLoad),
        v => bail!("accounting: expected verbatim or missload, got '{v}'"),
    }
}

pub fn network(ctx: &Ctx) -> Result<Outcome> {
    let mode = ctx.mode(&["solve", "flows", "provision", "occupancy"])?;
    let defaults: Vec<(&str, &str)> = match mode {
        "solve" | "flows" => vec![("stability", "strict"), ("queue_metric", "utilization")],
        "provision" => vec![("k_policy", "fixed"), ("k", "0"), ("alpha", "1"), ("beta", "1"), ("k_max", "100")],
        _ => vec![("method", "exact"), ("draws", "1000000")],
    };
    // network file comes through --in, so configuration is --set only
    let cfg = Config::resolve(&defaults, None, &ctx.sets)?;
    let nf = load_network(ctx)?;
    let net = &nf.network;
    let profile = nf.availability.as_ref().ok_or_else(|| anyhow!("network file has no [availability] section"))?;
    let mut out = ctx.header(mode, &cfg);
    match mode {
        "solve" | "flows" => {
            let rule = stability_rule(&cfg)?;
            let metric = match cfg.str("queue_metric") {
                "utilization" => QueueMetric::Utilization,
                "mm1" => QueueMetric::Mm1,
                v => bail!("queue_metric: expected utilization or mm1, got '{v}'"),
            };
            let sol = solve_flow(net, profile)?;
            let report = stability(net, &sol, rule);
            if mode == "flows" {
                out.push_str(&flow_detail_csv(&sol));
            } else {
                out.push_str(&flow_csv(net, &sol, rule));
            }
            let rt = response_time(net, &sol, metric)?;
            out.push_str(&format!("# EN={}\n# ET={}\n# stable={}\n", num(rt.en), num(rt.et), report.stable));
            Ok(Outcome { text: out, files: Vec::new(), verdict_failed: !report.stable })
        }
        "provision" => {
            let policy = match cfg.str("k_policy") {
                "fixed" => KPolicy::Fixed(cfg.f64("k")?),
                "optimized" => {
                    KPolicy::Optimized(CostWeights::new(cfg.f64("alpha")?, cfg.f64("beta")?, cfg.f64("k_max")?)?)
                }
                v => bail!("k_policy: expected fixed or optimized, got '{v}'"),
            };
            let plans = provision_network(net, profile, policy)?;
            out.push_str("cache,file,plan,lambda,mu,k,gamma,mean_return\n");
            for (i, row) in plans.iter().enumerate() {
                for (f, plan) in row.iter().enumerate() {
                    let line = match plan {
                        CounterPlan::Pinned => format!("{i},{f},pinned,,,,,\n"),
                        CounterPlan::Absent => format!("{i},{f},absent,,,,,\n"),
                        CounterPlan::Idle => format!("{i},{f},idle,,,,,\n"),
                        CounterPlan::Counter { params, gamma, mean_return } => format!(
                            "{i},{f},counter,{},{},{},{},{}\n",
                            num(params.lambda),
                            num(params.mu),
                            num(params.k),
                            num(*gamma),
                            num(*mean_return)
                        ),
                    };
                    out.push_str(&line);
                }
            }
            Ok(Outcome::ok(out))
        }
        _ => {
            let method = match cfg.str("method") {
                "exact" => OverflowMethod::Exact,
                "montecarlo" => OverflowMethod::MonteCarlo { draws: cfg.usize("draws")?, seed: ctx.seed },
                v => bail!("method: expected exact or montecarlo, got '{v}'"),
            };
            let st = expected_occupancy(profile, net, method)?;
            out.push_str("cache,expected,overflow,stderr\n");
            for i in 0..net.caches() {
                out.push_str(&format!("{i},{},{},{}\n", num(st.expected[i]), num(st.overflow[i]), num(st.stderr[i])));
            }
            Ok(Outcome::ok(out))
        }
    }
}

fn placement_table(out: &mut String, placement: &PlacementMatrix, ev: &Evaluation<f64>) {
    out.push_str("cache,file,stored,alpha\n");
    for (i, row) in placement.rows().iter().enumerate() {
        for (f, &b) in row.iter().enumerate() {
            out.push_str(&format!("{i},{f},{},{}\n", u8::from(b), num(ev.alpha[i][f])));
        }
    }
}

fn parse_placement(text: &str, caches: usize, files: usize) -> Result<PlacementMatrix> {
    let rows: Vec<Vec<bool>> = text
        .split('/')
        .map(|r| {
            r.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(anyhow!("placement: rows are strings of 0 and 1 separated by '/'")),
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    if rows.len() != caches || rows.iter().any(|r| r.len() != files) {
        bail!("placement must have {caches} rows of {files} digits");
    }
    Ok(PlacementMatrix::new(rows)?)
}

pub fn placement(ctx: &Ctx) -> Result<Outcome> {
    let mode = ctx.mode(&["solve", "enumerate", "evaluate", "export"])?;
    let mut defaults = vec![("accounting", "verbatim"), ("stability", "strict")];
    if mode == "evaluate" {
        defaults.push(("placement", "none"));
    }
    if mode == "export" {
        defaults.clear();
    }
    let cfg = Config::resolve(&defaults, None, &ctx.sets)?;
    let nf = load_network(ctx)?;
    let net = &nf.network;
    let header = ctx.header(mode, &cfg);
    if mode == "export" {
        let echo: String = header.lines().map(|l| format!("\\{}\n", l.trim_start_matches('#'))).collect();
        return Ok(Outcome::ok(echo + &export_miqcp(net)));
    }
    let rules = PlacementRules::new(accounting(&cfg)?, stability_rule(&cfg)?);
    let mut out = header;
    let (placement, ev) = match mode {
        "evaluate" => {
            if cfg.is_none("placement") {
                bail!("evaluate needs --set placement=<rows>, e.g. 01/10");
            }
            let p = parse_placement(cfg.str("placement"), net.caches(), net.files())?;
            let ev = evaluate(net, &p, rules)?;
            (p, ev)
        }
        _ => {
            let sol = if mode == "solve" { solve_exact(net, rules)? } else { solve_by_enumeration(net, rules)? };
            match sol {
                Some(s) => (s.placement, s.evaluation),
                None => {
                    out.push_str(
                        "# feasible=false\n# infeasible instance: no placement satisfies coverage, storage and load\n",
                    );
                    return Ok(Outcome { text: out, files: Vec::new(), verdict_failed: true });
                }
            }
        }
    };
    placement_table(&mut out, &placement, &ev);
    out.push_str(&format!("# placement={placement}\n# feasible={}\n", ev.feasible));
    if let Some(obj) = ev.objective {
        out.push_str(&format!("# objective={}\n", num(obj)));
    }
    if let Some(v) = &ev.violation {
        out.push_str(&format!("# violation={v}\n"));
    }
    Ok(Outcome { text: out, files: Vec::new(), verdict_failed: !ev.feasible })
}

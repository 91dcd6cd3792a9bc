//! Knapsack and Partition constructions.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use cachenet::network::write_network;
use cachenet::placement::{
    is_feasible, knapsack_optimum, partition_exists, partition_rules, reduce_knapsack, reduce_partition,
    verify_knapsack, verify_reductions, KnapsackInstance, KnapsackSweep, PartitionInstance,
};

use crate::config::{num, Config};
use crate::{Ctx, Outcome};

fn read_input(ctx: &Ctx) -> Result<Option<String>> {
    match &ctx.input {
        None => Ok(None),
        Some(p) => std::fs::read_to_string(p).map(Some).with_context(|| format!("reading {}", p.display())),
    }
}

fn strip_comments(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).filter(|l| !l.is_empty())
}

/// Values separated by commas or whitespace.
fn parse_values(text: &str) -> Result<Vec<u64>> {
    strip_comments(text)
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u64>().map_err(|_| anyhow!("not a positive integer: '{s}'")))
        .collect()
}

/// `capacity C` and `item W V` lines.
fn parse_knapsack(text: &str) -> Result<KnapsackInstance> {
    let mut capacity = None;
    let mut items = Vec::new();
    for line in strip_comments(text) {
        let t: Vec<&str> = line.split_whitespace().collect();
        let int = |s: &str| s.parse::<u64>().map_err(|_| anyhow!("not a positive integer: '{s}'"));
        match t.as_slice() {
            ["capacity", c] => capacity = Some(int(c)?),
            ["item", w, v] => items.push((int(w)?, int(v)?)),
            _ => bail!("expected 'capacity C' or 'item W V', got '{line}'"),
        }
    }
    Ok(KnapsackInstance::new(capacity.ok_or_else(|| anyhow!("missing capacity line"))?, items)?)
}

pub fn reduce(ctx: &Ctx) -> Result<Outcome> {
    let mode = ctx.mode(&["partition", "knapsack", "verify"])?;
    match mode {
        "partition" => partition(ctx, mode),
        "knapsack" => knapsack(ctx, mode),
        _ => verify(ctx, mode),
    }
}

fn partition(ctx: &Ctx, mode: &str) -> Result<Outcome> {
    let cfg = Config::resolve(&[("values", "none"), ("instance_dir", "none")], None, &ctx.sets)?;
    let values = match (read_input(ctx)?, cfg.is_none("values")) {
        (Some(text), true) => parse_values(&text)?,
        (None, false) => cfg.list::<u64>("values")?,
        (Some(_), false) => bail!("give the instance either with --in or with --set values=..., not both"),
        (None, true) => bail!("partition needs --in <values file> or --set values=1,1,2"),
    };
    let pt = PartitionInstance::new(values)?;
    let nets = reduce_partition::<f64>(&pt)?;
    let mut out = ctx.header(mode, &cfg);
    out.push_str("m,storage_0,storage_1,service,feasible\n");
    let mut files = Vec::new();
    let mut any = false;
    for (m, net) in nets.iter().enumerate() {
        let feasible = is_feasible(net, partition_rules())?;
        any |= feasible;
        out.push_str(&format!("{m},{m},{},{},{feasible}\n", pt.values.len() - m, num(pt.total() as f64 / 2.0)));
        if !cfg.is_none("instance_dir") {
            files.push((PathBuf::from(cfg.str("instance_dir")).join(format!("f_{m}.net")), write_network(net, None)));
        }
    }
    let exists = partition_exists(&pt);
    out.push_str(&format!("# partition_exists={exists}\n# some_instance_feasible={any}\n# agrees={}\n", exists == any));
    Ok(Outcome { text: out, files, verdict_failed: !any })
}

fn knapsack(ctx: &Ctx, mode: &str) -> Result<Outcome> {
    let cfg = Config::resolve(&[("capacity", "none"), ("items", "none"), ("instance_dir", "none")], None, &ctx.sets)?;
    let kp = match read_input(ctx)? {
        Some(text) => {
            if !cfg.is_none("capacity") || !cfg.is_none("items") {
                bail!("give the instance either with --in or with --set capacity/items, not both");
            }
            parse_knapsack(&text)?
        }
        None => {
            if cfg.is_none("capacity") || cfg.is_none("items") {
                bail!("knapsack needs --in <instance> or --set capacity=5 --set items=3:10,4:6");
            }
            let items = cfg
                .list::<String>("items")?
                .iter()
                .map(|s| {
                    let (w, v) = s.split_once(':').ok_or_else(|| anyhow!("items are weight:value pairs, got '{s}'"))?;
                    Ok((w.parse::<u64>()?, v.parse::<u64>()?))
                })
                .collect::<Result<Vec<_>>>()?;
            KnapsackInstance::new(cfg.u64("capacity")?, items)?
        }
    };
    let (best, _) = knapsack_optimum(&kp);
    let case = verify_knapsack(&kp)?;
    let mut out = ctx.header(mode, &cfg);
    out.push_str("total_value,knapsack_optimum,recovered_from_placement,agrees\n");
    out.push_str(&format!("{},{best},{},{}\n", kp.total_value(), case.side_b, case.agrees));
    let mut files = Vec::new();
    if !cfg.is_none("instance_dir") {
        let net = reduce_knapsack::<f64>(&kp)?;
        files.push((PathBuf::from(cfg.str("instance_dir")).join("knapsack.net"), write_network(&net, None)));
    }
    Ok(Outcome { text: out, files, verdict_failed: !case.agrees })
}

fn verify(ctx: &Ctx, mode: &str) -> Result<Outcome> {
    let cfg = Config::resolve(
        &[
            ("partition_max_n", "8"),
            ("partition_max_value", "6"),
            ("knapsack_exhaustive_n", "2"),
            ("knapsack_max_n", "12"),
            ("knapsack_samples", "25"),
            ("max_weight", "8"),
            ("max_value", "8"),
        ],
        ctx.input.as_deref(),
        &ctx.sets,
    )?;
    let sweep = KnapsackSweep {
        exhaustive_max_n: cfg.usize("knapsack_exhaustive_n")?,
        max_n: cfg.usize("knapsack_max_n")?,
        samples_per_n: cfg.usize("knapsack_samples")?,
        max_weight: cfg.u64("max_weight")?,
        max_value: cfg.u64("max_value")?,
        seed: ctx.seed,
    };
    if sweep.max_weight == 0 || sweep.max_value == 0 {
        bail!("max_weight and max_value must be positive");
    }
    let report = verify_reductions(cfg.usize("partition_max_n")?, cfg.u64("partition_max_value")?, &sweep)?;
    let bad = report.counterexamples().len();
    let mut out = ctx.header(mode, &cfg);
    out.push_str(&report.to_csv());
    out.push_str(&format!("# cases={}\n# counterexamples={bad}\n", report.cases.len()));
    Ok(Outcome { text: out, files: Vec::new(), verdict_failed: bad > 0 })
}

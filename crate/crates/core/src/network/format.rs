//! Plain-text network description.
//!
//! ```text
//! # two caches on a ring
//! [topology]
//! 0 1
//! 1 0
//! [caches]
//! # storage service
//! 1 4
//! 1 inf
//! [files]
//! 1
//! [demand]
//! 0 0 1.0
//! 1 0 1.0
//! [availability]
//! 0 0 0.5
//! 1 0 0.5
//! ```
//!
//! Indices are 0-based. `inf` marks an unbounded storage or service budget.
//! Demand and availability entries that are not listed are zero. Text after
//! `#` is ignored.

use super::{AvailabilityProfile, CacheNetwork, Capacity};
use crate::error::{Error, Result};
use crate::output::format_sig;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFile<T> {
    pub network: CacheNetwork<T>,
    /// Present when the file has an `[availability]` section.
    pub availability: Option<AvailabilityProfile<T>>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Topology,
    Caches,
    Files,
    Demand,
    Availability,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn number(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| perr(line, format!("not a number: {tok}")))
}

fn index(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| perr(line, format!("not an index: {tok}")))
}

fn capacity<T: Real>(tok: &str, line: usize) -> Result<Capacity<T>> {
    if tok.eq_ignore_ascii_case("inf") {
        Ok(Capacity::Unbounded)
    } else {
        Ok(Capacity::Finite(T::lit(number(tok, line)?)))
    }
}

pub fn parse_network<T: Real>(text: &str) -> Result<NetworkFile<T>> {
    let mut section = Section::None;
    let mut edges = Vec::new();
    let mut storage = Vec::new();
    let mut service = Vec::new();
    let mut sizes = Vec::new();
    let mut demand = Vec::new();
    let mut avail = Vec::new();
    let mut has_avail = false;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            section = match line {
                "[topology]" => Section::Topology,
                "[caches]" => Section::Caches,
                "[files]" => Section::Files,
                "[demand]" => Section::Demand,
                "[availability]" => {
                    has_avail = true;
                    Section::Availability
                }
                other => return Err(perr(line_no, format!("unknown section {other}"))),
            };
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let want = |k: usize| {
            if toks.len() == k {
                Ok(())
            } else {
                Err(perr(line_no, format!("expected {k} fields, found {}", toks.len())))
            }
        };
        match section {
            Section::None => return Err(perr(line_no, "data before any section header")),
            Section::Topology => {
                want(2)?;
                edges.push((index(toks[0], line_no)?, index(toks[1], line_no)?, line_no));
            }
            Section::Caches => {
                want(2)?;
                storage.push(capacity::<T>(toks[0], line_no)?);
                service.push(capacity::<T>(toks[1], line_no)?);
            }
            Section::Files => {
                want(1)?;
                sizes.push(T::lit(number(toks[0], line_no)?));
            }
            Section::Demand | Section::Availability => {
                want(3)?;
                let entry =
                    (index(toks[0], line_no)?, index(toks[1], line_no)?, T::lit(number(toks[2], line_no)?), line_no);
                if section == Section::Demand {
                    demand.push(entry);
                } else {
                    avail.push(entry);
                }
            }
        }
    }
    let c = storage.len();
    let f = sizes.len();
    let mut adjacency = vec![vec![false; c]; c];
    for (a, b, line) in edges {
        if a >= c || b >= c {
            return Err(perr(line, format!("edge {a} {b} names a cache outside 0..{c}")));
        }
        adjacency[a][b] = true;
    }
    let fill = |entries: Vec<(usize, usize, T, usize)>| -> Result<Vec<Vec<T>>> {
        let mut m = vec![vec![T::zero(); f]; c];
        for (i, j, v, line) in entries {
            if i >= c || j >= f {
                return Err(perr(line, format!("entry ({i}, {j}) outside {c}x{f}")));
            }
            m[i][j] = v;
        }
        Ok(m)
    };
    let demand = fill(demand)?;
    let availability = if has_avail { Some(AvailabilityProfile::new(fill(avail)?)?) } else { None };
    let network = CacheNetwork::new(adjacency, storage, service, demand, sizes)?;
    Ok(NetworkFile { network, availability })
}

fn cap_text<T: Real>(c: &Capacity<T>) -> String {
    match c {
        Capacity::Finite(v) => format_sig(v.as_f64()),
        Capacity::Unbounded => "inf".into(),
    }
}

/// Writes `net` in the format read by [`parse_network`]. Zero demand and
/// availability entries are omitted.
pub fn write_network<T: Real>(net: &CacheNetwork<T>, availability: Option<&AvailabilityProfile<T>>) -> String {
    let mut out = String::from("[topology]\n");
    for i in 0..net.caches() {
        for j in net.neighbors(i) {
            out.push_str(&format!("{i} {j}\n"));
        }
    }
    out.push_str("[caches]\n");
    for (s, e) in net.storage().iter().zip(net.service()) {
        out.push_str(&format!("{} {}\n", cap_text(s), cap_text(e)));
    }
    out.push_str("[files]\n");
    for t in net.sizes() {
        out.push_str(&format!("{}\n", format_sig(t.as_f64())));
    }
    out.push_str("[demand]\n");
    for (i, row) in net.demand().iter().enumerate() {
        for (f, &v) in row.iter().enumerate() {
            if v != T::zero() {
                out.push_str(&format!("{i} {f} {}\n", format_sig(v.as_f64())));
            }
        }
    }
    if let Some(prof) = availability {
        out.push_str("[availability]\n");
        for (i, row) in prof.rows().iter().enumerate() {
            for (f, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    out.push_str(&format!("{i} {f} {}\n", format_sig(v.as_f64())));
                }
            }
        }
    }
    out
}

//! Integer program export in an LP-style text format, and a reader that
//! evaluates binary assignments against the exported rows.
//!
//! Variables are `A_i_j` (file `j` stored at cache `i`) and `alpha_i_j`
//! (rate of requests for file `j` that cache `i` must serve), both 1-based
//! and listed row-major. Each flow row encodes
//! `alpha_ij = (1 - A_ij)(lambda_ij + sum_k p_ki alpha_kj)` as
//!
//! ```text
//! alpha_ij + lambda_ij A_ij - sum_k p_ki alpha_kj + [ sum_k p_ki A_ij * alpha_kj ] = lambda_ij
//! ```

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::solve_dense_consistent;
use crate::network::{routing_matrix, CacheNetwork, Capacity};
use crate::output::format_sig;
use crate::scalar::Real;

fn a_name(i: usize, j: usize) -> String {
    format!("A_{}_{}", i + 1, j + 1)
}

fn alpha_name(i: usize, j: usize) -> String {
    format!("alpha_{}_{}", i + 1, j + 1)
}

fn push_term(out: &mut String, first: &mut bool, coef: f64, body: &str) {
    if *first {
        if coef < 0.0 {
            out.push_str(" -");
        }
        *first = false;
    } else {
        out.push_str(if coef < 0.0 { " -" } else { " +" });
    }
    out.push_str(&format!(" {} {body}", format_sig(coef.abs())));
}

/// Full model for `net`. Output depends only on the network, so repeated
/// exports are byte-identical.
pub fn export_miqcp<T: Real>(net: &CacheNetwork<T>) -> String {
    let (c, f) = (net.caches(), net.files());
    let p = routing_matrix(net);
    let mut out = format!("\\ placement model: {c} caches, {f} files\nMinimize\n obj:");
    let mut first = true;
    for i in 0..c {
        for j in 0..f {
            push_term(&mut out, &mut first, 1.0, &alpha_name(i, j));
        }
    }
    out.push_str("\nSubject To\n");
    for j in 0..f {
        out.push_str(&format!(" cover_{}:", j + 1));
        let mut first = true;
        for i in 0..c {
            push_term(&mut out, &mut first, 1.0, &a_name(i, j));
        }
        out.push_str(" >= 1\n");
    }
    for i in 0..c {
        if let Capacity::Finite(s) = net.storage()[i] {
            out.push_str(&format!(" cap_{}:", i + 1));
            let mut first = true;
            for j in 0..f {
                push_term(&mut out, &mut first, net.sizes()[j].as_f64(), &a_name(i, j));
            }
            out.push_str(&format!(" <= {}\n", format_sig(s.as_f64())));
        }
    }
    for i in 0..c {
        if let Capacity::Finite(eta) = net.service()[i] {
            out.push_str(&format!(" serv_{}:", i + 1));
            let mut first = true;
            for j in 0..f {
                push_term(&mut out, &mut first, 1.0, &alpha_name(i, j));
            }
            out.push_str(&format!(" <= {}\n", format_sig(eta.as_f64())));
        }
    }
    for i in 0..c {
        for j in 0..f {
            let lam = net.demand()[i][j].as_f64();
            out.push_str(&format!(" flow_{}_{}:", i + 1, j + 1));
            let mut first = true;
            push_term(&mut out, &mut first, 1.0, &alpha_name(i, j));
            if lam != 0.0 {
                push_term(&mut out, &mut first, lam, &a_name(i, j));
            }
            let senders: Vec<usize> = (0..c).filter(|&k| k != i && p[k][i] > T::zero()).collect();
            for &k in &senders {
                push_term(&mut out, &mut first, -p[k][i].as_f64(), &alpha_name(k, j));
            }
            if !senders.is_empty() {
                out.push_str(" + [");
                let mut inner = true;
                for &k in &senders {
                    push_term(
                        &mut out,
                        &mut inner,
                        p[k][i].as_f64(),
                        &format!("{} * {}", a_name(i, j), alpha_name(k, j)),
                    );
                }
                out.push_str(" ]");
            }
            out.push_str(&format!(" = {}\n", format_sig(lam)));
        }
    }
    out.push_str("Bounds\n");
    for i in 0..c {
        for j in 0..f {
            out.push_str(&format!(" {} >= 0\n", alpha_name(i, j)));
        }
    }
    out.push_str("Binaries\n");
    for i in 0..c {
        for j in 0..f {
            out.push_str(&format!(" {}\n", a_name(i, j)));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearTerm {
    pub coef: f64,
    pub var: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadTerm {
    pub coef: f64,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRow {
    pub name: String,
    pub linear: Vec<LinearTerm>,
    pub quadratic: Vec<QuadTerm>,
    pub sense: RowSense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedModel {
    pub objective: Vec<LinearTerm>,
    pub rows: Vec<ModelRow>,
    pub binaries: Vec<String>,
    pub continuous: Vec<String>,
}

/// Result of fixing the binaries and solving the equality rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEvaluation {
    pub objective: f64,
    /// Names of violated inequality rows and bounds.
    pub violated: Vec<String>,
    pub values: HashMap<String, f64>,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_expr(tokens: &[&str], line: usize) -> Result<(Vec<LinearTerm>, Vec<QuadTerm>)> {
    let mut linear = Vec::new();
    let mut quad = Vec::new();
    let mut idx = 0;
    let mut in_bracket = false;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    while idx < tokens.len() {
        let tok = tokens[idx];
        idx += 1;
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            "[" if !in_bracket => in_bracket = true,
            "]" if in_bracket => in_bracket = false,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    coef = Some(v);
                    continue;
                }
                let c = sign * coef.take().unwrap_or(1.0);
                sign = 1.0;
                if in_bracket {
                    if tokens.get(idx) != Some(&"*") || idx + 1 >= tokens.len() {
                        return Err(perr(line, format!("expected product after {tok}")));
                    }
                    quad.push(QuadTerm { coef: c, left: tok.to_string(), right: tokens[idx + 1].to_string() });
                    idx += 2;
                } else {
                    linear.push(LinearTerm { coef: c, var: tok.to_string() });
                }
            }
        }
    }
    if in_bracket {
        return Err(perr(line, "unclosed bracket"));
    }
    Ok((linear, quad))
}

/// Reads the format written by [`export_miqcp`].
pub fn parse_model(text: &str) -> Result<ParsedModel> {
    #[derive(PartialEq)]
    enum Part {
        Head,
        Objective,
        Rows,
        Bounds,
        Binaries,
        Done,
    }
    let mut part = Part::Head;
    let mut model =
        ParsedModel { objective: Vec::new(), rows: Vec::new(), binaries: Vec::new(), continuous: Vec::new() };
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        match line {
            "Minimize" => part = Part::Objective,
            "Subject To" => part = Part::Rows,
            "Bounds" => part = Part::Bounds,
            "Binaries" => part = Part::Binaries,
            "End" => part = Part::Done,
            _ => match part {
                Part::Objective | Part::Rows => {
                    let (name, body) = line.split_once(':').ok_or_else(|| perr(line_no, "missing row name"))?;
                    let tokens: Vec<&str> = body.split_whitespace().collect();
                    if part == Part::Objective {
                        let (lin, quad) = parse_expr(&tokens, line_no)?;
                        if !quad.is_empty() {
                            return Err(perr(line_no, "quadratic objective not supported"));
                        }
                        model.objective = lin;
                        continue;
                    }
                    let pos = tokens
                        .iter()
                        .position(|t| matches!(*t, "<=" | ">=" | "="))
                        .ok_or_else(|| perr(line_no, "missing row sense"))?;
                    let sense = match tokens[pos] {
                        "<=" => RowSense::Le,
                        ">=" => RowSense::Ge,
                        _ => RowSense::Eq,
                    };
                    if pos + 2 != tokens.len() {
                        return Err(perr(line_no, "expected a single right-hand side"));
                    }
                    let rhs = tokens[pos + 1].parse::<f64>().map_err(|_| perr(line_no, "bad right-hand side"))?;
                    let (linear, quadratic) = parse_expr(&tokens[..pos], line_no)?;
                    model.rows.push(ModelRow { name: name.trim().to_string(), linear, quadratic, sense, rhs });
                }
                Part::Bounds => {
                    let tokens: Vec<&str> = line.split_whitespace().collect();
                    match tokens.as_slice() {
                        [v, ">=", "0"] => model.continuous.push(v.to_string()),
                        _ => return Err(perr(line_no, "unsupported bound")),
                    }
                }
                Part::Binaries => model.binaries.extend(line.split_whitespace().map(str::to_string)),
                Part::Head | Part::Done => return Err(perr(line_no, "text outside model sections")),
            },
        }
    }
    if part != Part::Done {
        return Err(perr(text.lines().count(), "missing End"));
    }
    Ok(model)
}

impl ParsedModel {
    /// Fixes every binary from `assign` (missing names read as 0), solves the
    /// equality rows for the continuous variables and checks the rest. Flow
    /// variables left undetermined (closed loops without demand) read as 0.
    pub fn evaluate(&self, assign: &HashMap<String, bool>) -> Result<ModelEvaluation> {
        let bin = |v: &str| -> Option<f64> {
            self.binaries
                .iter()
                .any(|b| b == v)
                .then(|| if assign.get(v).copied().unwrap_or(false) { 1.0 } else { 0.0 })
        };
        let col: HashMap<&str, usize> = self.continuous.iter().enumerate().map(|(k, v)| (v.as_str(), k)).collect();
        let n = self.continuous.len();
        let eq_rows: Vec<&ModelRow> = self.rows.iter().filter(|r| r.sense == RowSense::Eq).collect();
        if eq_rows.len() != n {
            return Err(Error::InvalidNetwork(format!("{} equality rows for {n} continuous variables", eq_rows.len())));
        }
        let unknown = |v: &str| Error::InvalidNetwork(format!("unknown variable {v}"));
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for (r, row) in eq_rows.iter().enumerate() {
            b[r] = row.rhs;
            for t in &row.linear {
                match bin(&t.var) {
                    Some(x) => b[r] -= t.coef * x,
                    None => a[r][*col.get(t.var.as_str()).ok_or_else(|| unknown(&t.var))?] += t.coef,
                }
            }
            for q in &row.quadratic {
                let (x, cont) = match (bin(&q.left), bin(&q.right)) {
                    (Some(x), None) => (x, &q.right),
                    (None, Some(x)) => (x, &q.left),
                    _ => return Err(Error::InvalidNetwork(format!("row {} has a non-bilinear product", row.name))),
                };
                a[r][*col.get(cont.as_str()).ok_or_else(|| unknown(cont))?] += q.coef * x;
            }
        }
        let x = solve_dense_consistent(a, b)?;
        let mut values: HashMap<String, f64> = self.continuous.iter().cloned().zip(x.iter().copied()).collect();
        for v in &self.binaries {
            values.insert(v.clone(), bin(v).unwrap_or(0.0));
        }
        let value = |v: &str| values.get(v).copied().ok_or_else(|| unknown(v));
        let mut violated = Vec::new();
        for row in self.rows.iter().filter(|r| r.sense != RowSense::Eq) {
            let mut lhs = 0.0;
            for t in &row.linear {
                lhs += t.coef * value(&t.var)?;
            }
            for q in &row.quadratic {
                lhs += q.coef * value(&q.left)? * value(&q.right)?;
            }
            let tol = 1e-9 * row.rhs.abs().max(1.0);
            let ok = match row.sense {
                RowSense::Le => lhs <= row.rhs + tol,
                RowSense::Ge => lhs >= row.rhs - tol,
                RowSense::Eq => true,
            };
            if !ok {
                violated.push(row.name.clone());
            }
        }
        for v in &self.continuous {
            if values[v] < -1e-9 {
                violated.push(format!("{v} >= 0"));
            }
        }
        let mut objective = 0.0;
        for t in &self.objective {
            objective += t.coef * value(&t.var)?;
        }
        Ok(ModelEvaluation { objective, violated, values })
    }
}

/// Binary assignment for a placement matrix, keyed by model variable name.
pub fn assignment_for(placement: &super::PlacementMatrix) -> HashMap<String, bool> {
    let mut m = HashMap::new();
    for (i, row) in placement.rows().iter().enumerate() {
        for (j, &b) in row.iter().enumerate() {
            m.insert(a_name(i, j), b);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::StabilityRule;
    use crate::placement::{evaluate, FlowAccounting, PlacementMatrix, PlacementRules};
    use approx::assert_relative_eq;

    fn ring2() -> CacheNetwork<f64> {
        CacheNetwork::new(
            vec![vec![false, true], vec![true, false]],
            vec![Capacity::Finite(1.0), Capacity::Finite(2.0)],
            vec![Capacity::Finite(4.0), Capacity::Finite(5.0)],
            vec![vec![1.0, 2.0], vec![0.5, 1.5]],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn row_counts_for_two_by_two() {
        let m = parse_model(&export_miqcp(&ring2())).unwrap();
        assert_eq!(m.binaries.len(), 4);
        assert_eq!(m.continuous.len(), 4);
        let count = |p: &str| m.rows.iter().filter(|r| r.name.starts_with(p)).count();
        assert_eq!((count("cover_"), count("cap_"), count("serv_"), count("flow_")), (2, 2, 2, 4));
        assert_eq!(m.binaries[..2], ["A_1_1".to_string(), "A_1_2".to_string()]);
    }

    #[test]
    fn export_is_deterministic() {
        assert_eq!(export_miqcp(&ring2()), export_miqcp(&ring2()));
    }

    #[test]
    fn empty_demand_forces_zero_flow() {
        let mut net = ring2();
        net = CacheNetwork::new(
            net.adjacency().to_vec(),
            net.storage().to_vec(),
            net.service().to_vec(),
            vec![vec![0.0; 2]; 2],
            net.sizes().to_vec(),
        )
        .unwrap();
        let m = parse_model(&export_miqcp(&net)).unwrap();
        for r in m.rows.iter().filter(|r| r.name.starts_with("flow_")) {
            assert_eq!(r.rhs, 0.0);
        }
        let stored = PlacementMatrix::new(vec![vec![true, true], vec![false, false]]).unwrap();
        let ev = m.evaluate(&assignment_for(&stored)).unwrap();
        assert!(m.continuous.iter().all(|v| ev.values[v] == 0.0));
    }

    #[test]
    fn round_trip_matches_evaluate() {
        let net = ring2();
        let m = parse_model(&export_miqcp(&net)).unwrap();
        let rules = PlacementRules::new(FlowAccounting::MissLoad, StabilityRule::NonStrict);
        for bits in 0..16 {
            let p = PlacementMatrix::from_bits(2, 2, bits);
            let ev = evaluate(&net, &p, rules).unwrap();
            let Some(obj) = ev.objective else { continue };
            let got = m.evaluate(&assignment_for(&p)).unwrap();
            assert_relative_eq!(got.objective, obj, epsilon = 1e-9);
            assert_eq!(got.violated.is_empty(), ev.feasible, "placement {p}");
        }
    }
}

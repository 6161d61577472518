//! Text formats.
//!
//! Graph file:
//!
//! ```text
//! graph <n> <d>
//! v <id> <loops>      one per vertex; `*` for loops fills up to degree d
//! e <u> <v>           one per undirected edge, u < v
//! ```
//!
//! Labels file: one 1-based cluster id per line, vertex order.
//!
//! Weighting file: `weights <n> <d>` then `w <u> <v> <x_e>` lines; edges
//! that are not listed default to weight 1.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Labeling, RegularGraph};
use crate::error::{Error, Result};
use super::EdgeWeighting;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("malformed {what}")))
}

/// Lines that carry content: trimmed, blank lines and `#` comments skipped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn graph_to_string(g: &RegularGraph) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "graph {} {}", g.n(), g.d());
    for u in 0..g.n() {
        let _ = writeln!(s, "v {u} {}", g.self_loops(u));
    }
    for &(u, v) in g.edges() {
        let _ = writeln!(s, "e {u} {v}");
    }
    s
}

pub fn parse_graph(text: &str) -> Result<RegularGraph> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("graph") {
        return Err(parse_err(hline, "expected `graph <n> <d>` header"));
    }
    let n: usize = field(toks.next(), hline, "vertex count")?;
    let d: usize = field(toks.next(), hline, "degree")?;
    if d == 0 {
        return Err(parse_err(hline, "degree must be positive"));
    }
    let mut loops: Vec<Option<Option<usize>>> = vec![None; n];
    let mut vline = vec![0usize; n];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut seen = std::collections::HashSet::new();
    for (ln, line) in lines {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let id: usize = field(toks.next(), ln, "vertex id")?;
                if id >= n {
                    return Err(parse_err(ln, format!("vertex {id} out of range")));
                }
                if loops[id].is_some() {
                    return Err(parse_err(ln, format!("vertex {id} declared twice")));
                }
                let l = match toks.next() {
                    Some("*") | None => None,
                    Some(t) => Some(t.parse().map_err(|_| parse_err(ln, "malformed loop count"))?),
                };
                loops[id] = Some(l);
                vline[id] = ln;
            }
            Some("e") => {
                let u: usize = field(toks.next(), ln, "edge endpoint")?;
                let v: usize = field(toks.next(), ln, "edge endpoint")?;
                if u >= n || v >= n {
                    return Err(parse_err(ln, format!("edge ({u}, {v}) out of range")));
                }
                if u >= v {
                    return Err(parse_err(ln, format!("edge ({u}, {v}) must satisfy u < v")));
                }
                if !seen.insert((u, v)) {
                    return Err(parse_err(ln, format!("duplicate edge ({u}, {v})")));
                }
                adj[u].push(v);
                adj[v].push(u);
                for w in [u, v] {
                    if adj[w].len() > d {
                        return Err(parse_err(
                            ln,
                            format!("vertex {w} exceeds degree {d}"),
                        ));
                    }
                }
            }
            Some(other) => return Err(parse_err(ln, format!("unknown record `{other}`"))),
            None => unreachable!(),
        }
        if toks.next().is_some() {
            return Err(parse_err(ln, "trailing tokens"));
        }
    }
    let mut loop_counts = Vec::with_capacity(n);
    for u in 0..n {
        match loops[u] {
            None => return Err(parse_err(0, format!("vertex {u} has no `v` record"))),
            Some(None) => loop_counts.push(d - adj[u].len()),
            Some(Some(l)) => {
                if adj[u].len() + l != d {
                    return Err(parse_err(
                        vline[u],
                        format!(
                            "vertex {u}: {} edges + {l} self-loops != degree {d}",
                            adj[u].len()
                        ),
                    ));
                }
                loop_counts.push(l);
            }
        }
    }
    RegularGraph::new(d, adj, loop_counts).map_err(|e| parse_err(0, e.to_string()))
}

pub fn save_graph(g: &RegularGraph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, graph_to_string(g))?;
    Ok(())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<RegularGraph> {
    parse_graph(&fs::read_to_string(path)?)
}

pub fn labels_to_string(l: &Labeling) -> String {
    let mut s = String::with_capacity(l.len() * 2);
    for &x in l.as_slice() {
        let _ = writeln!(s, "{}", x + 1);
    }
    s
}

/// Parses 1-based ids. `k` defaults to the largest id present.
pub fn parse_labels(text: &str, k: Option<usize>) -> Result<Labeling> {
    let mut labels = Vec::new();
    for (ln, line) in content_lines(text) {
        let id: usize = line
            .parse()
            .map_err(|_| parse_err(ln, format!("malformed label `{line}`")))?;
        if id == 0 {
            return Err(parse_err(ln, "labels are 1-based"));
        }
        if let Some(k) = k {
            if id > k {
                return Err(parse_err(ln, format!("label {id} exceeds k = {k}")));
            }
        }
        labels.push(id - 1);
    }
    let k = k.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    Labeling::new(labels, k)
}

pub fn save_labels(l: &Labeling, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, labels_to_string(l))?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>, k: Option<usize>) -> Result<Labeling> {
    parse_labels(&fs::read_to_string(path)?, k)
}

pub fn weights_to_string(g: &RegularGraph, w: &EdgeWeighting) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "weights {} {}", g.n(), g.d());
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        let x = w.get(e);
        if x != 1.0 {
            let _ = writeln!(s, "w {u} {v} {x:.16e}");
        }
    }
    s
}

pub fn parse_weights(g: &RegularGraph, text: &str) -> Result<EdgeWeighting> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("weights") {
        return Err(parse_err(hline, "expected `weights <n> <d>` header"));
    }
    let n: usize = field(toks.next(), hline, "vertex count")?;
    let d: usize = field(toks.next(), hline, "degree")?;
    if n != g.n() || d != g.d() {
        return Err(parse_err(hline, format!("header ({n}, {d}) does not match graph")));
    }
    let mut x = vec![1.0; g.edge_count()];
    for (ln, line) in lines {
        let mut toks = line.split_whitespace();
        if toks.next() != Some("w") {
            return Err(parse_err(ln, "expected `w <u> <v> <x>`"));
        }
        let u: usize = field(toks.next(), ln, "edge endpoint")?;
        let v: usize = field(toks.next(), ln, "edge endpoint")?;
        let val: f64 = field(toks.next(), ln, "weight")?;
        let e = g
            .edge_index(u, v)
            .ok_or_else(|| parse_err(ln, format!("({u}, {v}) is not an edge")))?;
        if !(0.0..=1.0).contains(&val) {
            return Err(parse_err(ln, format!("weight {val} outside [0, 1]")));
        }
        x[e] = val;
    }
    EdgeWeighting::new(g, x).map_err(|e| parse_err(0, e.to_string()))
}

pub fn save_weights(g: &RegularGraph, w: &EdgeWeighting, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, weights_to_string(g, w))?;
    Ok(())
}

pub fn load_weights(g: &RegularGraph, path: impl AsRef<Path>) -> Result<EdgeWeighting> {
    parse_weights(g, &fs::read_to_string(path)?)
}

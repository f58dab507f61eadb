//! Plain-text file formats.
//!
//! Topology files:
//!
//! ```text
//! # comment
//! nodes 4
//! links 2
//! r 1 5
//! area 100 100        (optional)
//! N <id> <x> <y>
//! L <id> <sender id> <receiver id>
//! ```
//!
//! Trace files are CSV with the header `slot,total_backlog,scheduled_count,max_power`.
//! Schedule files list one link id per line plus optional `P <id> <watts>`
//! lines. Weight files hold `<link id> <weight>` pairs. Floats are written
//! with Rust's shortest round-trip formatting, so every format re-parses to
//! bit-identical values.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{LinkId, Node, NodeId, Point, Topology};
use crate::schedulers::Schedule;
use crate::simulator::BacklogTrace;

pub const TRACE_HEADER: &str = "slot,total_backlog,scheduled_count,max_power";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        message: message.into(),
    })
}

fn field<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, ParseError> {
    match tok {
        None => err(line, format!("missing {what}")),
        Some(t) => t.parse().map_err(|_| ParseError {
            line,
            message: format!("bad {what} `{t}`"),
        }),
    }
}

/// Non-empty, comment-stripped lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn finish_line(mut toks: std::str::SplitWhitespace<'_>, line: usize) -> Result<(), ParseError> {
    match toks.next() {
        Some(extra) => err(line, format!("unexpected trailing token `{extra}`")),
        None => Ok(()),
    }
}

pub fn parse_topology(text: &str) -> Result<Topology, ParseError> {
    let mut declared_nodes: Option<(usize, usize)> = None;
    let mut declared_links: Option<(usize, usize)> = None;
    let mut radius: Option<(f64, f64, usize)> = None;
    let mut area = None;
    let mut nodes: Vec<Node> = Vec::new();
    let mut node_lines: HashMap<NodeId, usize> = HashMap::new();
    let mut links: Vec<(LinkId, NodeId, NodeId, usize)> = Vec::new();
    let mut link_ids: HashMap<LinkId, usize> = HashMap::new();
    let mut last = 0;

    for (ln, line) in content_lines(text) {
        last = ln;
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or("");
        match key {
            "nodes" => declared_nodes = Some((field(toks.next(), ln, "node count")?, ln)),
            "links" => declared_links = Some((field(toks.next(), ln, "link count")?, ln)),
            "r" => {
                let lo: f64 = field(toks.next(), ln, "rMin")?;
                let hi: f64 = field(toks.next(), ln, "rMax")?;
                if !(lo > 0.0 && lo <= hi) {
                    return err(ln, format!("need 0 < rMin <= rMax, got {lo} {hi}"));
                }
                radius = Some((lo, hi, ln));
            }
            "area" => {
                area = Some((
                    field(toks.next(), ln, "area width")?,
                    field(toks.next(), ln, "area height")?,
                ))
            }
            "N" => {
                let id: NodeId = field(toks.next(), ln, "node id")?;
                let x: f64 = field(toks.next(), ln, "x")?;
                let y: f64 = field(toks.next(), ln, "y")?;
                if let Some(prev) = node_lines.insert(id, ln) {
                    return err(ln, format!("duplicate node id {id} (first on line {prev})"));
                }
                nodes.push(Node {
                    id,
                    position: Point::new(x, y),
                });
            }
            "L" => {
                let id: LinkId = field(toks.next(), ln, "link id")?;
                let s: NodeId = field(toks.next(), ln, "sender id")?;
                let t: NodeId = field(toks.next(), ln, "receiver id")?;
                if let Some(prev) = link_ids.insert(id, ln) {
                    return err(ln, format!("duplicate link id {id} (first on line {prev})"));
                }
                links.push((id, s, t, ln));
            }
            other => return err(ln, format!("unknown record `{other}`")),
        }
        finish_line(toks, ln)?;
    }

    let Some((r_min, r_max, _)) = radius else {
        return err(last, "missing `r <rMin> <rMax>` header");
    };
    if let Some((n, ln)) = declared_nodes {
        if n != nodes.len() {
            return err(ln, format!("declared {n} nodes, found {}", nodes.len()));
        }
    }
    if let Some((m, ln)) = declared_links {
        if m != links.len() {
            return err(ln, format!("declared {m} links, found {}", links.len()));
        }
    }
    let positions: HashMap<NodeId, Point> = nodes.iter().map(|n| (n.id, n.position)).collect();
    for &(id, s, t, ln) in &links {
        for end in [s, t] {
            if !positions.contains_key(&end) {
                return err(ln, format!("link {id} references missing node {end}"));
            }
        }
        if s == t {
            return err(ln, format!("link {id} has sender == receiver"));
        }
        let len = positions[&s].distance(&positions[&t]);
        if len < r_min || len > r_max {
            return err(
                ln,
                format!("link {id} length {len} outside [{r_min}, {r_max}]"),
            );
        }
    }
    let specs: Vec<_> = links.iter().map(|&(id, s, t, _)| (id, s, t)).collect();
    let topo = Topology::new(nodes, &specs, r_min, r_max).map_err(|e| ParseError {
        line: last,
        message: e.to_string(),
    })?;
    Ok(match area {
        Some((w, h)) => topo.with_area(w, h),
        None => topo,
    })
}

pub fn serialize_topology(t: &Topology) -> String {
    let mut s = String::new();
    writeln!(s, "nodes {}", t.nodes.len()).unwrap();
    writeln!(s, "links {}", t.links.len()).unwrap();
    writeln!(s, "r {} {}", t.r_min, t.r_max).unwrap();
    if let Some((w, h)) = t.area {
        writeln!(s, "area {w} {h}").unwrap();
    }
    for n in &t.nodes {
        writeln!(s, "N {} {} {}", n.id, n.position.x, n.position.y).unwrap();
    }
    for l in &t.links {
        writeln!(s, "L {} {} {}", l.id, l.sender, l.receiver).unwrap();
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub slot: usize,
    pub total_backlog: u64,
    pub scheduled_count: usize,
    pub max_power: f64,
}

pub fn trace_rows(trace: &BacklogTrace) -> impl Iterator<Item = TraceRow> + '_ {
    trace
        .per_slot_total
        .iter()
        .zip(&trace.scheduled_count)
        .zip(&trace.max_power_per_slot)
        .enumerate()
        .map(
            |(slot, ((&total_backlog, &scheduled_count), &max_power))| TraceRow {
                slot,
                total_backlog,
                scheduled_count,
                max_power,
            },
        )
}

pub fn serialize_trace(trace: &BacklogTrace) -> String {
    let mut s = String::with_capacity(32 * trace.horizon() + TRACE_HEADER.len() + 1);
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in trace_rows(trace) {
        writeln!(
            s,
            "{},{},{},{}",
            r.slot, r.total_backlog, r.scheduled_count, r.max_power
        )
        .unwrap();
    }
    s
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>, ParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => return err(1, format!("expected header `{TRACE_HEADER}`")),
    }
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let ln = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut cols = raw.split(',').map(str::trim);
        rows.push(TraceRow {
            slot: field(cols.next(), ln, "slot")?,
            total_backlog: field(cols.next(), ln, "total_backlog")?,
            scheduled_count: field(cols.next(), ln, "scheduled_count")?,
            max_power: field(cols.next(), ln, "max_power")?,
        });
        if cols.next().is_some() {
            return err(ln, "too many columns");
        }
    }
    Ok(rows)
}

/// `<link id> <weight>` per line.
pub fn parse_weights(text: &str) -> Result<BTreeMap<LinkId, f64>, ParseError> {
    let mut out = BTreeMap::new();
    for (ln, line) in content_lines(text) {
        let mut toks = line.split_whitespace();
        let id: LinkId = field(toks.next(), ln, "link id")?;
        let w: f64 = field(toks.next(), ln, "weight")?;
        if !(w >= 0.0) {
            return err(ln, format!("weight must be non-negative, got {w}"));
        }
        if out.insert(id, w).is_some() {
            return err(ln, format!("duplicate weight for link {id}"));
        }
        finish_line(toks, ln)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScheduleFile {
    pub ids: Vec<LinkId>,
    pub powers: BTreeMap<LinkId, f64>,
}

pub fn parse_schedule(text: &str) -> Result<ScheduleFile, ParseError> {
    let mut file = ScheduleFile::default();
    for (ln, line) in content_lines(text) {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("P") => {
                let id: LinkId = field(toks.next(), ln, "link id")?;
                let p: f64 = field(toks.next(), ln, "power")?;
                if !(p > 0.0) {
                    return err(ln, format!("power must be positive, got {p}"));
                }
                file.powers.insert(id, p);
            }
            first => {
                let id: LinkId = field(first, ln, "link id")?;
                if file.ids.contains(&id) {
                    return err(ln, format!("link {id} listed twice"));
                }
                file.ids.push(id);
            }
        }
        finish_line(toks, ln)?;
    }
    Ok(file)
}

pub fn serialize_schedule(schedule: &Schedule) -> String {
    let mut s = format!("# total weight {}\n", schedule.total_weight);
    for l in &schedule.links {
        writeln!(s, "{}", l.id).unwrap();
    }
    for (id, p) in schedule.powers.iter() {
        writeln!(s, "P {id} {p}").unwrap();
    }
    s
}

//! Text formats for networks, couplings, labels and partitions.
//!
//! Network file:
//!
//! ```text
//! #multiplex n=<n> L=<L>
//! # any other line starting with '#' is a comment
//! <layer> <u> <v> [weight]
//! ```
//!
//! Ids are 1-based, fields are separated by tabs or spaces, the weight
//! defaults to 1. Edges are undirected and repeated edges are summed.
//!
//! Coupling file: `<k> <l> <weight>` lines, symmetrized on load.
//! Label file: `<node> <label>` (per node, replicated across layers) or
//! `<node> <layer> <label>` (per node-layer pair), detected from the column count.
//! Partition file: `<node> <layer> <community>` sorted by layer, then node.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{all_to_all_coupling, MultiplexNetwork};
use crate::partition::Partition;
use crate::sparse::CsrMatrix;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

struct LineCtx<'a> {
    path: &'a Path,
    line: usize,
}

impl LineCtx<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            message: message.into(),
        }
    }

    fn index(&self, field: &str, what: &str, max: usize) -> Result<usize> {
        let id: usize = field
            .parse()
            .map_err(|_| self.err(format!("invalid {what} id '{field}'")))?;
        if id == 0 || id > max {
            return Err(self.err(format!("{what} id {id} out of range 1..={max}")));
        }
        Ok(id - 1)
    }

    fn weight(&self, field: Option<&str>) -> Result<f64> {
        let Some(field) = field else { return Ok(1.0) };
        let w: f64 = field
            .parse()
            .map_err(|_| self.err(format!("invalid weight '{field}'")))?;
        if !w.is_finite() {
            return Err(self.err(format!("non-finite weight '{field}'")));
        }
        if w < 0.0 {
            return Err(self.err(format!("negative weight {w}")));
        }
        Ok(w)
    }
}

/// Non-empty lines with 1-based line numbers, trimmed.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_header(ctx: &LineCtx<'_>, line: &str) -> Result<(usize, usize)> {
    let mut n = None;
    let mut l = None;
    for tok in line.trim_start_matches("#multiplex").split_whitespace() {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| ctx.err(format!("malformed header field '{tok}'")))?;
        let value: usize = value
            .parse()
            .map_err(|_| ctx.err(format!("invalid header value '{tok}'")))?;
        match key {
            "n" => n = Some(value),
            "L" => l = Some(value),
            _ => return Err(ctx.err(format!("unknown header field '{key}'"))),
        }
    }
    match (n, l) {
        (Some(n), Some(l)) if l > 0 => Ok((n, l)),
        (Some(_), Some(_)) => Err(ctx.err("header must declare at least one layer")),
        _ => Err(ctx.err("header must declare n=<nodes> and L=<layers>")),
    }
}

/// Parses the network text format. `path` is only used in error messages.
pub fn parse_network(text: &str, path: &Path) -> Result<(usize, Vec<CsrMatrix>)> {
    let mut dims: Option<(usize, usize)> = None;
    let mut edges: Vec<Vec<(usize, usize, f64)>> = Vec::new();

    for (line_no, line) in content_lines(text) {
        let ctx = LineCtx { path, line: line_no };
        if line.starts_with("#multiplex") {
            if dims.is_some() {
                return Err(ctx.err("duplicate #multiplex header"));
            }
            let (n, l) = parse_header(&ctx, line)?;
            dims = Some((n, l));
            edges = vec![Vec::new(); l];
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let Some((n, l)) = dims else {
            return Err(ctx.err("edge line before #multiplex header"));
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(ctx.err(format!("expected 'layer u v [weight]', found {} fields", fields.len())));
        }
        let layer = ctx.index(fields[0], "layer", l)?;
        let u = ctx.index(fields[1], "node", n)?;
        let v = ctx.index(fields[2], "node", n)?;
        let w = ctx.weight(fields.get(3).copied())?;
        edges[layer].push((u, v, w));
    }

    let (n, _) = dims.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: "missing #multiplex header".into(),
    })?;
    let layers = edges
        .into_iter()
        .map(|e| CsrMatrix::from_undirected_edges(n, e))
        .collect();
    Ok((n, layers))
}

/// Parses a coupling file into a symmetric `L x L` row-major matrix.
pub fn parse_coupling(text: &str, layers: usize, path: &Path) -> Result<Vec<f64>> {
    let mut coupling = vec![0.0; layers * layers];
    for (line_no, line) in content_lines(text) {
        if line.starts_with('#') {
            continue;
        }
        let ctx = LineCtx { path, line: line_no };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(ctx.err(format!("expected 'k l [weight]', found {} fields", fields.len())));
        }
        let k = ctx.index(fields[0], "layer", layers)?;
        let l = ctx.index(fields[1], "layer", layers)?;
        let w = ctx.weight(fields.get(2).copied())?;
        if k == l {
            if w != 0.0 {
                return Err(ctx.err(format!("self-referential coupling entry ({}, {})", k + 1, l + 1)));
            }
            continue;
        }
        let (a, b) = if k < l { (k, l) } else { (l, k) };
        coupling[a * layers + b] += w;
        coupling[b * layers + a] = coupling[a * layers + b];
    }
    Ok(coupling)
}

/// Loads a multiplex network. Without a coupling file, layers are coupled
/// all-to-all.
pub fn load_network(path: impl AsRef<Path>, coupling_path: Option<&Path>, omega: f64) -> Result<MultiplexNetwork> {
    let path = path.as_ref();
    let (n, layers) = parse_network(&read(path)?, path)?;
    let coupling = match coupling_path {
        Some(cp) => parse_coupling(&read(cp)?, layers.len(), cp)?,
        None => all_to_all_coupling(layers.len()),
    };
    MultiplexNetwork::new(n, layers, coupling, omega)
}

/// Canonical network text: header, then upper-triangle edges per layer.
pub fn format_network(net: &MultiplexNetwork) -> String {
    let mut out = format!("#multiplex n={} L={}\n", net.n(), net.num_layers());
    for (l, layer) in net.layers().iter().enumerate() {
        for (i, j, w) in layer.upper_entries() {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", l + 1, i + 1, j + 1, w);
        }
    }
    out
}

pub fn save_network(net: &MultiplexNetwork, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &format_network(net))
}

/// Canonical coupling text (upper triangle, non-zero entries).
pub fn format_coupling(net: &MultiplexNetwork) -> String {
    let l = net.num_layers();
    let mut out = String::new();
    for k in 0..l {
        for m in k + 1..l {
            let w = net.coupling(k, m);
            if w != 0.0 {
                let _ = writeln!(out, "{}\t{}\t{}", k + 1, m + 1, w);
            }
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum LabelFormat {
    PerNode,
    PerPair,
}

/// Loads ground-truth labels. Label strings are renumbered in order of first
/// appearance in the file.
pub fn load_labels(path: impl AsRef<Path>, net: &MultiplexNetwork) -> Result<Partition> {
    let path = path.as_ref();
    parse_labels(&read(path)?, net.n(), net.num_layers(), path)
}

pub fn parse_labels(text: &str, n: usize, layers: usize, path: &Path) -> Result<Partition> {
    let mut format = None;
    let mut ids: HashMap<String, usize> = HashMap::new();
    // indexed by node (per-node) or supra index (per-pair)
    let mut slots: Vec<Option<usize>> = Vec::new();

    for (line_no, line) in content_lines(text) {
        if line.starts_with('#') {
            continue;
        }
        let ctx = LineCtx { path, line: line_no };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let this = match fields.len() {
            2 => LabelFormat::PerNode,
            3 => LabelFormat::PerPair,
            k => return Err(ctx.err(format!("expected 2 or 3 fields, found {k}"))),
        };
        match format {
            None => {
                format = Some(this);
                slots = vec![None; if this == LabelFormat::PerNode { n } else { n * layers }];
            }
            Some(f) if f != this => return Err(ctx.err("mixed per-node and per-pair label lines")),
            Some(_) => {}
        }
        let node = ctx.index(fields[0], "node", n)?;
        let slot = match this {
            LabelFormat::PerNode => node,
            LabelFormat::PerPair => ctx.index(fields[1], "layer", layers)? * n + node,
        };
        let name = *fields.last().unwrap();
        let next = ids.len();
        let id = *ids.entry(name.to_string()).or_insert(next);
        match slots[slot] {
            Some(prev) if prev != id => {
                return Err(ctx.err(format!("conflicting label '{name}' for node {}", node + 1)));
            }
            _ => slots[slot] = Some(id),
        }
    }

    let Some(format) = format else {
        return Err(Error::InvalidLabels(format!("{}: no labels found", path.display())));
    };
    if let Some(missing) = slots.iter().position(Option::is_none) {
        let msg = match format {
            LabelFormat::PerNode => format!("missing label for node {}", missing + 1),
            LabelFormat::PerPair => format!(
                "missing label for node {} in layer {}",
                missing % n + 1,
                missing / n + 1
            ),
        };
        return Err(Error::InvalidLabels(msg));
    }
    let slots: Vec<usize> = slots.into_iter().map(Option::unwrap).collect();
    let labels = match format {
        LabelFormat::PerNode => (0..layers).flat_map(|_| slots.iter().copied()).collect(),
        LabelFormat::PerPair => slots,
    };
    Partition::new(labels, ids.len())
}

pub fn format_partition(p: &Partition, n: usize) -> String {
    let mut out = String::with_capacity(p.len() * 8);
    for (row, &c) in p.labels().iter().enumerate() {
        let _ = writeln!(out, "{}\t{}\t{}", row % n + 1, row / n + 1, c + 1);
    }
    out
}

/// Writes `node layer community` lines for all node-layer pairs.
pub fn save_partition(p: &Partition, n: usize, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &format_partition(p, n))
}

/// Reads a partition file written by [`save_partition`]; community ids are
/// kept as written (1-based).
pub fn load_partition(path: impl AsRef<Path>, n: usize, layers: usize) -> Result<Partition> {
    let path = path.as_ref();
    parse_partition(&read(path)?, n, layers, path)
}

pub fn parse_partition(text: &str, n: usize, layers: usize, path: &Path) -> Result<Partition> {
    let mut slots: Vec<Option<usize>> = vec![None; n * layers];
    for (line_no, line) in content_lines(text) {
        if line.starts_with('#') {
            continue;
        }
        let ctx = LineCtx { path, line: line_no };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(ctx.err(format!(
                "expected 'node layer community', found {} fields",
                fields.len()
            )));
        }
        let node = ctx.index(fields[0], "node", n)?;
        let layer = ctx.index(fields[1], "layer", layers)?;
        let c = ctx.index(fields[2], "community", usize::MAX)?;
        let slot = &mut slots[layer * n + node];
        match *slot {
            Some(prev) if prev != c => {
                return Err(ctx.err(format!(
                    "conflicting community for node {} in layer {}",
                    node + 1,
                    layer + 1
                )));
            }
            _ => *slot = Some(c),
        }
    }
    if let Some(missing) = slots.iter().position(Option::is_none) {
        return Err(Error::InvalidLabels(format!(
            "{}: node-layer pair ({}, {}) has no community",
            path.display(),
            missing % n + 1,
            missing / n + 1
        )));
    }
    Ok(Partition::from_labels(slots.into_iter().map(Option::unwrap).collect()))
}

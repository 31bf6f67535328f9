//! The `.mlg` multilayer text format.
//!
//! ```text
//! # comment to end of line
//! nodes <N>
//! layers <L>
//! layerinfo <α> <name> <directed|undirected>
//! e <α> <i> <β> <j> [w]        intra-layer iff α = β; w defaults to 1
//! label <i> <class>
//! feat <α> <i> <f1> <f2> ...
//! ```
//!
//! `nodes` and `layers` come first. A layer's `layerinfo`, when given, must
//! precede that layer's edges; layers without one are undirected and named
//! `l<α>`. Numbers are plain decimals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mlgraph::{LayerGraph, MultilayerNetwork, Replica, ReplicaFeatures};

/// A parsed file: the network plus any node labels.
#[derive(Clone, Debug, PartialEq)]
pub struct MlgDocument {
    pub network: MultilayerNetwork,
    pub labels: BTreeMap<usize, String>,
}

impl MlgDocument {
    pub fn new(network: MultilayerNetwork) -> Self {
        Self { network, labels: BTreeMap::new() }
    }
}

struct Builder {
    n: usize,
    layers: Vec<Option<(String, LayerGraph)>>,
    inter: Vec<(Replica, Replica, f64)>,
    labels: BTreeMap<usize, String>,
    feats: BTreeMap<usize, Vec<f64>>,
    feat_dim: Option<usize>,
}

fn err<T>(line: usize, reason: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, reason: reason.into() })
}

fn parse_index(tok: &str, bound: usize, what: &str, line: usize) -> Result<usize> {
    if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return err(line, format!("{what} {tok:?} is not a non-negative integer"));
    }
    match tok.parse::<usize>() {
        Ok(v) if v < bound => Ok(v),
        Ok(v) => err(line, format!("{what} {v} out of range (< {bound})")),
        Err(_) => err(line, format!("{what} {tok:?} is too large")),
    }
}

fn parse_decimal(tok: &str, what: &str, line: usize) -> Result<f64> {
    let ok = !tok.is_empty()
        && tok.bytes().any(|b| b.is_ascii_digit())
        && tok.bytes().enumerate().all(|(k, b)| b.is_ascii_digit() || b == b'.' || (k == 0 && (b == b'-' || b == b'+')));
    match tok.parse::<f64>() {
        Ok(v) if ok && v.is_finite() => Ok(v),
        _ => err(line, format!("{what} {tok:?} is not a decimal number")),
    }
}

pub fn parse_mlg(text: &str) -> Result<MlgDocument> {
    let mut n: Option<usize> = None;
    let mut l: Option<usize> = None;
    let mut b: Option<Builder> = None;
    let mut last_line = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("");
        let tok: Vec<&str> = content.split_whitespace().collect();
        let Some(&head) = tok.first() else { continue };
        match head {
            "nodes" | "layers" => {
                if b.is_some() {
                    return err(line, format!("`{head}` after the header"));
                }
                if tok.len() != 2 {
                    return err(line, format!("`{head}` takes one count"));
                }
                let v = parse_index(tok[1], usize::MAX, "count", line)?;
                if v == 0 {
                    return err(line, format!("`{head}` must be positive"));
                }
                let slot = if head == "nodes" { &mut n } else { &mut l };
                if slot.replace(v).is_some() {
                    return err(line, format!("repeated `{head}`"));
                }
            }
            _ => {
                if b.is_none() {
                    let (Some(nn), Some(ll)) = (n, l) else {
                        return err(line, "`nodes` and `layers` must come first");
                    };
                    b = Some(Builder {
                        n: nn,
                        layers: vec![None; ll],
                        inter: Vec::new(),
                        labels: BTreeMap::new(),
                        feats: BTreeMap::new(),
                        feat_dim: None,
                    });
                }
                record(b.as_mut().expect("initialised above"), &tok, line)?;
            }
        }
    }
    let b = match b {
        Some(b) => b,
        None => match (n, l) {
            (Some(nn), Some(ll)) => Builder {
                n: nn,
                layers: vec![None; ll],
                inter: Vec::new(),
                labels: BTreeMap::new(),
                feats: BTreeMap::new(),
                feat_dim: None,
            },
            _ => return err(last_line.max(1), "missing `nodes` or `layers`"),
        },
    };
    finish(b, last_line)
}

fn layer_mut(b: &mut Builder, a: usize) -> &mut LayerGraph {
    let n = b.n;
    &mut b.layers[a].get_or_insert_with(|| (format!("l{a}"), LayerGraph::new(n, false))).1
}

fn record(b: &mut Builder, tok: &[&str], line: usize) -> Result<()> {
    let n_layers = b.layers.len();
    match tok[0] {
        "layerinfo" => {
            if tok.len() != 4 {
                return err(line, "`layerinfo` takes <layer> <name> <directed|undirected>");
            }
            let a = parse_index(tok[1], n_layers, "layer", line)?;
            let directed = match tok[3] {
                "directed" => true,
                "undirected" => false,
                other => return err(line, format!("unknown directedness {other:?}")),
            };
            if b.layers[a].is_some() {
                return err(line, format!("layer {a} already declared or already has edges"));
            }
            b.layers[a] = Some((tok[2].to_string(), LayerGraph::new(b.n, directed)));
        }
        "e" => {
            if tok.len() != 5 && tok.len() != 6 {
                return err(line, "`e` takes <layer> <node> <layer> <node> [weight]");
            }
            let a = parse_index(tok[1], n_layers, "layer", line)?;
            let i = parse_index(tok[2], b.n, "node", line)?;
            let c = parse_index(tok[3], n_layers, "layer", line)?;
            let j = parse_index(tok[4], b.n, "node", line)?;
            let w = match tok.get(5) {
                Some(t) => parse_decimal(t, "weight", line)?,
                None => 1.0,
            };
            if a == c {
                layer_mut(b, a).add_edge(i, j, w).or_else(|e| err(line, e.to_string()))?;
            } else {
                if w <= 0.0 {
                    return err(line, format!("weight {w} must be positive"));
                }
                b.inter.push((Replica::new(i, a), Replica::new(j, c), w));
            }
        }
        "label" => {
            if tok.len() != 3 {
                return err(line, "`label` takes <node> <class>");
            }
            let i = parse_index(tok[1], b.n, "node", line)?;
            if b.labels.insert(i, tok[2].to_string()).is_some() {
                return err(line, format!("node {i} labelled twice"));
            }
        }
        "feat" => {
            if tok.len() < 4 {
                return err(line, "`feat` takes <layer> <node> <values...>");
            }
            let a = parse_index(tok[1], n_layers, "layer", line)?;
            let i = parse_index(tok[2], b.n, "node", line)?;
            let v = tok[3..].iter().map(|t| parse_decimal(t, "feature", line)).collect::<Result<Vec<_>>>()?;
            match b.feat_dim {
                Some(d) if d != v.len() => return err(line, format!("{} features, earlier rows have {d}", v.len())),
                _ => b.feat_dim = Some(v.len()),
            }
            if b.feats.insert(Replica::new(i, a).flat(b.n), v).is_some() {
                return err(line, format!("features for ({i}, {a}) given twice"));
            }
        }
        other => return err(line, format!("unknown record {other:?}")),
    }
    Ok(())
}

fn finish(b: Builder, last_line: usize) -> Result<MlgDocument> {
    let n = b.n;
    let (names, layers): (Vec<String>, Vec<LayerGraph>) = b
        .layers
        .into_iter()
        .enumerate()
        .map(|(a, s)| s.unwrap_or_else(|| (format!("l{a}"), LayerGraph::new(n, false))))
        .unzip();
    let at_end = |e: Error| Error::Parse { line: last_line, reason: e.to_string() };
    let mut net = MultilayerNetwork::new(n, layers).map_err(at_end)?.with_layer_names(names).map_err(at_end)?;
    for (s, d, w) in b.inter {
        net.add_inter_edge(s, d, w).map_err(at_end)?;
    }
    if let Some(dim) = b.feat_dim {
        if b.feats.len() != net.n_replicas() {
            return err(last_line, format!("features given for {} of {} replicas", b.feats.len(), net.n_replicas()));
        }
        let data = b.feats.into_values().flatten().collect();
        net = net.with_features(ReplicaFeatures::new(dim, data).map_err(at_end)?).map_err(at_end)?;
    }
    Ok(MlgDocument { network: net, labels: b.labels })
}

/// Canonical text: header, layer declarations, intra edges layer by layer,
/// inter edges, labels by node, features by replica. Unit weights are
/// omitted.
pub fn write_mlg(doc: &MlgDocument) -> String {
    let net = &doc.network;
    let mut s = String::new();
    let w = |s: &mut String, weight: f64| {
        if weight != 1.0 {
            write!(s, " {weight}").unwrap();
        }
    };
    writeln!(s, "nodes {}", net.n_nodes()).unwrap();
    writeln!(s, "layers {}", net.n_layers()).unwrap();
    for (a, (g, name)) in net.layers().iter().zip(net.layer_names()).enumerate() {
        let d = if g.is_directed() { "directed" } else { "undirected" };
        writeln!(s, "layerinfo {a} {name} {d}").unwrap();
    }
    for (a, g) in net.layers().iter().enumerate() {
        for e in g.edges() {
            write!(s, "e {a} {} {a} {}", e.src, e.dst).unwrap();
            w(&mut s, e.weight);
            s.push('\n');
        }
    }
    for e in net.inter_edges() {
        write!(s, "e {} {} {} {}", e.src.layer, e.src.node, e.dst.layer, e.dst.node).unwrap();
        w(&mut s, e.weight);
        s.push('\n');
    }
    for (i, c) in &doc.labels {
        writeln!(s, "label {i} {c}").unwrap();
    }
    if let Some(f) = net.features() {
        for r in 0..f.rows() {
            let rep = Replica::from_flat(r, net.n_nodes());
            write!(s, "feat {} {}", rep.layer, rep.node).unwrap();
            for v in f.row(r) {
                write!(s, " {v}").unwrap();
            }
            s.push('\n');
        }
    }
    s
}

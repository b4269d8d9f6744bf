//! Investor-stock bipartite graph, its directed stock projection, weight
//! filtering, and the persisted network artifact.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::components::weak_component_sizes;
use crate::error::{Error, Result};
use crate::ingest::AggregatedHolding;
use crate::money::Cents;
use crate::quantile::nearest_rank_value;

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Weighted bipartite graph between fund-management companies and stocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    investors: Vec<String>,
    stocks: Vec<String>,
    /// Per investor, `(stock index, held value)` sorted by stock index.
    holdings: Vec<Vec<(u32, Cents)>>,
    as_of_date: NaiveDate,
    source_hash: String,
}

impl BipartiteGraph {
    pub fn investors(&self) -> &[String] {
        &self.investors
    }

    pub fn stocks(&self) -> &[String] {
        &self.stocks
    }

    pub fn as_of_date(&self) -> NaiveDate {
        self.as_of_date
    }

    /// Hash of the canonical holdings list the graph was built from.
    pub fn source_hash(&self) -> &str {
        &self.source_hash
    }

    pub fn edge_count(&self) -> usize {
        self.holdings.iter().map(Vec::len).sum()
    }

    pub fn investor_index(&self, id: &str) -> Option<usize> {
        self.investors.binary_search_by(|s| s.as_str().cmp(id)).ok()
    }

    pub fn stock_index(&self, id: &str) -> Option<usize> {
        self.stocks.binary_search_by(|s| s.as_str().cmp(id)).ok()
    }

    /// `(stock index, value)` pairs held by an investor.
    pub fn holdings_of(&self, investor: usize) -> &[(u32, Cents)] {
        &self.holdings[investor]
    }

    /// Total fund-held value of each stock.
    pub fn stock_totals(&self) -> Vec<Cents> {
        let mut totals = vec![Cents::ZERO; self.stocks.len()];
        for h in &self.holdings {
            for &(s, v) in h {
                totals[s as usize] += v;
            }
        }
        totals
    }

    /// Holders of each stock as `(investor index, value)`.
    pub fn holders(&self) -> Vec<Vec<(u32, Cents)>> {
        let mut holders = vec![Vec::new(); self.stocks.len()];
        for (m, h) in self.holdings.iter().enumerate() {
            for &(s, v) in h {
                holders[s as usize].push((m as u32, v));
            }
        }
        holders
    }
}

/// Builds the bipartite graph. All holdings must belong to one snapshot date
/// and each (manager, stock) pair may appear once.
pub fn build_bipartite(holdings: &[AggregatedHolding]) -> Result<BipartiteGraph> {
    let first = holdings.first().ok_or(Error::EmptyInput("holdings"))?;
    let as_of_date = first.as_of_date;
    if let Some(h) = holdings.iter().find(|h| h.as_of_date != as_of_date) {
        return Err(Error::InvalidArgument(format!(
            "holdings span several snapshot dates ({as_of_date} and {})",
            h.as_of_date
        )));
    }
    let mut investors: Vec<String> = holdings.iter().map(|h| h.manager_id.clone()).collect();
    investors.sort_unstable();
    investors.dedup();
    let mut stocks: Vec<String> = holdings.iter().map(|h| h.stock_id.clone()).collect();
    stocks.sort_unstable();
    stocks.dedup();

    let inv_idx: HashMap<&str, usize> = investors.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let stock_idx: HashMap<&str, u32> = stocks.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();
    let mut per_investor: Vec<Vec<(u32, Cents)>> = vec![Vec::new(); investors.len()];
    for h in holdings {
        if h.market_value.is_zero() {
            return Err(Error::InvalidArgument(format!(
                "zero holding {} -> {}",
                h.manager_id, h.stock_id
            )));
        }
        per_investor[inv_idx[h.manager_id.as_str()]].push((stock_idx[h.stock_id.as_str()], h.market_value));
    }
    for (m, list) in per_investor.iter_mut().enumerate() {
        list.sort_unstable_by_key(|&(s, _)| s);
        if let Some(w) = list.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument(format!(
                "duplicate holding {} -> {}",
                investors[m], stocks[w[0].0 as usize]
            )));
        }
    }

    let mut canon = String::new();
    for (m, list) in per_investor.iter().enumerate() {
        for &(s, v) in list {
            let _ = writeln!(canon, "{},{},{}", investors[m], stocks[s as usize], v.0);
        }
    }
    Ok(BipartiteGraph {
        investors,
        stocks,
        holdings: per_investor,
        as_of_date,
        source_hash: sha256_hex(canon.as_bytes()),
    })
}

/// A directed edge between node indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub source: u32,
    pub target: u32,
    pub weight: Cents,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NetworkMeta {
    pub build_date: Option<NaiveDate>,
    /// Quantile used by the last weight filter, if any.
    pub k: Option<f64>,
    pub source_hash: Option<String>,
}

/// Directed weighted stock network. Nodes are kept sorted by id and edges by
/// `(source, target)`, which makes index order equal to lexicographic id order.
#[derive(Clone, Debug, PartialEq)]
pub struct StockNetwork {
    nodes: Vec<String>,
    edges: Vec<Edge>,
    /// `edges[offsets[v]..offsets[v + 1]]` are the out-edges of `v`.
    offsets: Vec<usize>,
    pub meta: NetworkMeta,
}

impl StockNetwork {
    /// Assembles a network, sorting inputs. Rejects self-loops, parallel edges
    /// and out-of-range indices.
    pub fn new(nodes: Vec<String>, mut edges: Vec<Edge>, meta: NetworkMeta) -> Result<Self> {
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by(|&a, &b| nodes[a].cmp(&nodes[b]));
        let is_sorted = order.iter().enumerate().all(|(i, &o)| i == o);
        let (nodes, edges) = if is_sorted {
            (nodes, {
                edges.sort_unstable();
                edges
            })
        } else {
            let mut remap = vec![0u32; nodes.len()];
            for (new, &old) in order.iter().enumerate() {
                remap[old] = new as u32;
            }
            let sorted_nodes = order.iter().map(|&o| nodes[o].clone()).collect();
            for e in &mut edges {
                if e.source as usize >= remap.len() || e.target as usize >= remap.len() {
                    return Err(Error::InvalidArgument("edge endpoint out of range".into()));
                }
                e.source = remap[e.source as usize];
                e.target = remap[e.target as usize];
            }
            edges.sort_unstable();
            (sorted_nodes, edges)
        };
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate node id".into()));
        }
        let n = nodes.len();
        for w in edges.windows(2) {
            if (w[0].source, w[0].target) == (w[1].source, w[1].target) {
                return Err(Error::InvalidArgument("parallel edge".into()));
            }
        }
        let mut offsets = vec![0usize; n + 1];
        for e in &edges {
            if e.source as usize >= n || e.target as usize >= n {
                return Err(Error::InvalidArgument("edge endpoint out of range".into()));
            }
            if e.source == e.target {
                return Err(Error::InvalidArgument(format!("self-loop on {}", nodes[e.source as usize])));
            }
            offsets[e.source as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Ok(StockNetwork {
            nodes,
            edges,
            offsets,
            meta,
        })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.binary_search_by(|s| s.as_str().cmp(id)).ok()
    }

    pub fn out_edges(&self, v: usize) -> &[Edge] {
        &self.edges[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn weight(&self, source: usize, target: usize) -> Option<Cents> {
        let out = self.out_edges(source);
        out.binary_search_by_key(&(target as u32), |e| e.target)
            .ok()
            .map(|i| out[i].weight)
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.nodes.len()];
        for e in &self.edges {
            d[e.target as usize] += 1;
        }
        d
    }

    pub fn out_strengths(&self) -> Vec<u64> {
        (0..self.nodes.len())
            .map(|v| self.out_edges(v).iter().map(|e| e.weight.0).sum())
            .collect()
    }

    pub fn in_strengths(&self) -> Vec<u64> {
        let mut s = vec![0u64; self.nodes.len()];
        for e in &self.edges {
            s[e.target as usize] += e.weight.0;
        }
        s
    }

    pub(crate) fn csr(&self) -> (&[usize], Vec<u32>) {
        (&self.offsets, self.edges.iter().map(|e| e.target).collect())
    }

    /// Top `n` nodes by out-degree, ties broken by ascending node id.
    pub fn top_by_out_degree(&self, n: usize) -> Vec<usize> {
        let deg = self.out_degrees();
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        // index order is id order, so a stable sort keeps the id tie-break
        order.sort_by(|&a, &b| deg[b].cmp(&deg[a]));
        order.truncate(n);
        order
    }

    /// Same node set with a different edge list.
    pub(crate) fn with_edges(&self, edges: Vec<Edge>, meta: NetworkMeta) -> StockNetwork {
        let n = self.nodes.len();
        let mut offsets = vec![0usize; n + 1];
        for e in &edges {
            offsets[e.source as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        StockNetwork {
            nodes: self.nodes.clone(),
            edges,
            offsets,
            meta,
        }
    }
}

/// Projects the bipartite graph onto stocks: for every pair with at least one
/// common investor both directed edges exist, and `w(i→j)` is the value of `i`
/// held by the common investors.
///
/// Rows are computed independently per source stock, so the result is the same
/// for any thread count.
pub fn project(b: &BipartiteGraph) -> StockNetwork {
    let n = b.stocks.len();
    let holders = b.holders();
    let rows: Vec<Vec<Edge>> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0u64; n], Vec::<u32>::new()),
            |(acc, touched), i| {
                for &(m, h_mi) in &holders[i] {
                    for &(j, _) in &b.holdings[m as usize] {
                        if j as usize == i {
                            continue;
                        }
                        if acc[j as usize] == 0 {
                            touched.push(j);
                        }
                        acc[j as usize] += h_mi.0;
                    }
                }
                touched.sort_unstable();
                let row = touched
                    .iter()
                    .map(|&j| Edge {
                        source: i as u32,
                        target: j,
                        weight: Cents(acc[j as usize]),
                    })
                    .collect();
                for &j in touched.iter() {
                    acc[j as usize] = 0;
                }
                touched.clear();
                row
            },
        )
        .collect();
    let edges: Vec<Edge> = rows.into_iter().flatten().collect();
    let mut offsets = vec![0usize; n + 1];
    for e in &edges {
        offsets[e.source as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    StockNetwork {
        nodes: b.stocks.clone(),
        edges,
        offsets,
        meta: NetworkMeta {
            build_date: Some(b.as_of_date),
            k: None,
            source_hash: Some(b.source_hash.clone()),
        },
    }
}

fn sorted_weights(net: &StockNetwork) -> Vec<Cents> {
    let mut w: Vec<Cents> = net.edges.iter().map(|e| e.weight).collect();
    w.sort_unstable();
    w
}

fn check_k(k: f64) -> Result<()> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::InvalidArgument(format!("filter quantile k={k} outside [0, 1)")));
    }
    Ok(())
}

/// Weight below which edges are removed at quantile `k`.
pub fn filter_threshold(net: &StockNetwork, k: f64) -> Result<Cents> {
    check_k(k)?;
    nearest_rank_value(&sorted_weights(net), k).ok_or(Error::EmptyInput("network has no edges"))
}

/// Drops edges whose weight is strictly below the nearest-rank `k`-quantile of
/// the current weight sequence. Ties at the threshold survive and isolated
/// nodes are kept.
pub fn filter_edges(net: &StockNetwork, k: f64) -> Result<StockNetwork> {
    let threshold = filter_threshold(net, k)?;
    let kept = net.edges.iter().copied().filter(|e| e.weight >= threshold).collect();
    let meta = NetworkMeta {
        k: Some(k),
        ..net.meta.clone()
    };
    Ok(net.with_edges(kept, meta))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilterSweepPoint {
    pub k: f64,
    /// The `100·k`-th percentile edge weight.
    pub threshold: Cents,
    /// Retained weight over total weight.
    pub ws_ratio: f64,
    pub lwcc_size: usize,
    pub edge_count: usize,
}

/// Evaluates the filter at each `k` independently against the unfiltered weights.
pub fn filter_sweep(net: &StockNetwork, ks: &[f64]) -> Result<Vec<FilterSweepPoint>> {
    if ks.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("sweep quantiles must be ascending".into()));
    }
    let weights = sorted_weights(net);
    if weights.is_empty() {
        return Err(Error::EmptyInput("network has no edges"));
    }
    let total: u128 = weights.iter().map(|w| u128::from(w.0)).sum();
    ks.iter()
        .map(|&k| {
            check_k(k)?;
            let threshold = nearest_rank_value(&weights, k).expect("non-empty");
            let kept: Vec<&Edge> = net.edges.iter().filter(|e| e.weight >= threshold).collect();
            let retained: u128 = kept.iter().map(|e| u128::from(e.weight.0)).sum();
            let lwcc = weak_component_sizes(net.node_count(), kept.iter().map(|e| (e.source, e.target)))
                .first()
                .copied()
                .unwrap_or(0);
            Ok(FilterSweepPoint {
                k,
                threshold,
                ws_ratio: retained as f64 / total as f64,
                lwcc_size: lwcc,
                edge_count: kept.len(),
            })
        })
        .collect()
}

const MAGIC: &str = "# stocknet network v1";
const CHECKSUM_PREFIX: &str = "# checksum: sha256:";
const BODY_HEADER: &str = "source,target,weight_cents";

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.starts_with('#') && !id.contains(|c: char| c == ',' || c.is_whitespace())
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

/// Renders the artifact: a `#`-prefixed header (counts, k, provenance, node
/// list, checksum) followed by a CSV edge list sorted by (source, target).
/// The checksum is SHA-256 over every line except the checksum line itself.
pub fn render_network(net: &StockNetwork) -> Result<String> {
    if let Some(bad) = net.nodes.iter().find(|id| !valid_id(id)) {
        return Err(Error::InvalidArgument(format!("node id '{bad}' cannot be persisted")));
    }
    let mut content = String::new();
    let _ = writeln!(content, "{MAGIC}");
    let _ = writeln!(content, "# node_count: {}", net.node_count());
    let _ = writeln!(content, "# edge_count: {}", net.edge_count());
    let _ = writeln!(content, "# k: {}", opt(&net.meta.k));
    let _ = writeln!(content, "# build_date: {}", opt(&net.meta.build_date));
    let _ = writeln!(content, "# source_hash: {}", opt(&net.meta.source_hash));
    let _ = writeln!(content, "# nodes: {}", net.nodes.join(","));
    let mut body = String::with_capacity(net.edge_count() * 32);
    let _ = writeln!(body, "{BODY_HEADER}");
    for e in &net.edges {
        let _ = writeln!(
            body,
            "{},{},{}",
            net.nodes[e.source as usize], net.nodes[e.target as usize], e.weight.0
        );
    }
    let mut hasher = Sha256::new();
    hasher.update(content.as_bytes());
    hasher.update(body.as_bytes());
    let checksum = hex::encode(hasher.finalize());
    Ok(format!("{content}{CHECKSUM_PREFIX}{checksum}\n{body}"))
}

pub fn save_network(net: &StockNetwork, path: &Path) -> Result<()> {
    let text = render_network(net)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_network(path: &Path) -> Result<StockNetwork> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network(&text)
}

pub fn parse_network(text: &str) -> Result<StockNetwork> {
    let fmt_err = |line: usize, message: &str| Error::Format {
        line,
        message: message.to_string(),
    };
    let mut hasher = Sha256::new();
    let mut expected = None;
    let mut header: HashMap<&str, &str> = HashMap::new();
    let mut body_start = None;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if let Some(sum) = line.strip_prefix(CHECKSUM_PREFIX) {
            expected = Some(sum.trim_end().to_string());
            continue;
        }
        hasher.update(line.as_bytes());
        if body_start.is_some() {
            continue;
        }
        let trimmed = line.trim_end_matches('\n');
        if i == 0 {
            if trimmed != MAGIC {
                return Err(fmt_err(1, "not a stocknet network artifact"));
            }
        } else if let Some(kv) = trimmed.strip_prefix("# ") {
            let (k, v) = kv.split_once(": ").ok_or_else(|| fmt_err(i + 1, "bad header line"))?;
            header.insert(k, v);
        } else if trimmed == BODY_HEADER {
            body_start = Some(i + 1);
        } else {
            return Err(fmt_err(i + 1, "unexpected line before edge list"));
        }
    }
    let found = hex::encode(hasher.finalize());
    let expected = expected.ok_or_else(|| fmt_err(0, "missing checksum line"))?;
    if expected != found {
        return Err(Error::Checksum { expected, found });
    }
    let body_start = body_start.ok_or_else(|| fmt_err(0, "missing edge list"))?;

    let get = |key: &str| header.get(key).copied().ok_or_else(|| fmt_err(0, &format!("missing header '{key}'")));
    let parse_count = |key: &str| -> Result<usize> {
        get(key)?.parse().map_err(|_| fmt_err(0, &format!("bad {key}")))
    };
    let node_count = parse_count("node_count")?;
    let edge_count = parse_count("edge_count")?;
    let k = match get("k")? {
        "none" => None,
        s => Some(s.parse::<f64>().map_err(|_| fmt_err(0, "bad k"))?),
    };
    let build_date = match get("build_date")? {
        "none" => None,
        s => Some(NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| fmt_err(0, "bad build_date"))?),
    };
    let source_hash = match get("source_hash")? {
        "none" => None,
        s => Some(s.to_string()),
    };
    let nodes_line = get("nodes")?;
    let nodes: Vec<String> = if nodes_line.is_empty() {
        Vec::new()
    } else {
        nodes_line.split(',').map(str::to_string).collect()
    };
    if nodes.len() != node_count {
        return Err(fmt_err(0, "node_count does not match node list"));
    }
    let index: HashMap<&str, u32> = nodes.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();
    let mut edges = Vec::with_capacity(edge_count);
    for (i, line) in text.lines().enumerate().skip(body_start) {
        let lineno = i + 1;
        let mut parts = line.split(',');
        let (Some(s), Some(t), Some(w), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(fmt_err(lineno, "expected source,target,weight_cents"));
        };
        let source = *index.get(s).ok_or_else(|| fmt_err(lineno, "unknown source node"))?;
        let target = *index.get(t).ok_or_else(|| fmt_err(lineno, "unknown target node"))?;
        let weight = Cents(w.parse().map_err(|_| fmt_err(lineno, "bad weight"))?);
        edges.push(Edge { source, target, weight });
    }
    if edges.len() != edge_count {
        return Err(fmt_err(0, "edge_count does not match edge list"));
    }
    StockNetwork::new(
        nodes,
        edges,
        NetworkMeta {
            build_date,
            k,
            source_hash,
        },
    )
}

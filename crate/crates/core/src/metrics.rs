//! Topology diagnostics of a stock network: summary statistics, degree
//! assortativity, out-degree partitions, group share and composition reports,
//! rich-club structure and degree/strength tables.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::components::{strong_component_sizes, weak_component_sizes};
use crate::error::{Error, Result};
use crate::ingest::StockLabel;
use crate::measure::{pearson, Measure};
use crate::money::Cents;
use crate::network::StockNetwork;
use crate::quantile::nearest_rank_value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeMode {
    In,
    Out,
}

impl fmt::Display for DegreeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DegreeMode::In => "in",
            DegreeMode::Out => "out",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkStats {
    pub density: f64,
    pub node_count: usize,
    pub edge_count: usize,
    /// Edges per node, i.e. the average out-degree.
    pub avg_degree: f64,
    pub in_assort: Measure,
    pub out_assort: Measure,
    /// Edge weight statistics in currency units; std is the population form.
    pub weight_mean: f64,
    pub weight_std: f64,
    pub weight_sum: f64,
    pub n_scc: usize,
    pub n_wcc: usize,
    pub max_scc_size: usize,
    pub max_wcc_size: usize,
}

pub fn compute_stats(net: &StockNetwork) -> Result<NetworkStats> {
    let n = net.node_count();
    if n == 0 {
        return Err(Error::EmptyInput("network has no nodes"));
    }
    let m = net.edge_count();
    let density = if n > 1 { m as f64 / (n as f64 * (n as f64 - 1.0)) } else { 0.0 };
    let sum_cents: u128 = net.edges().iter().map(|e| u128::from(e.weight.0)).sum();
    let weight_sum = sum_cents as f64 / 100.0;
    let (weight_mean, weight_std) = if m == 0 {
        (0.0, 0.0)
    } else {
        let mean = weight_sum / m as f64;
        let var = net
            .edges()
            .iter()
            .map(|e| (e.weight.as_units() - mean).powi(2))
            .sum::<f64>()
            / m as f64;
        (mean, var.sqrt())
    };
    let (offsets, targets) = net.csr();
    let scc = strong_component_sizes(offsets, &targets);
    let wcc = weak_component_sizes(n, net.edges().iter().map(|e| (e.source, e.target)));
    Ok(NetworkStats {
        density,
        node_count: n,
        edge_count: m,
        avg_degree: m as f64 / n as f64,
        in_assort: assortativity(net, DegreeMode::In),
        out_assort: assortativity(net, DegreeMode::Out),
        weight_mean,
        weight_std,
        weight_sum,
        n_scc: scc.len(),
        n_wcc: wcc.len(),
        max_scc_size: scc.first().copied().unwrap_or(0),
        max_wcc_size: wcc.first().copied().unwrap_or(0),
    })
}

fn degrees(net: &StockNetwork, mode: DegreeMode) -> Vec<usize> {
    match mode {
        DegreeMode::In => net.in_degrees(),
        DegreeMode::Out => net.out_degrees(),
    }
}

/// Pearson correlation, over all directed edges, between the `mode`-degree of
/// the source and the `mode`-degree of the target (out-out or in-in).
pub fn assortativity(net: &StockNetwork, mode: DegreeMode) -> Measure {
    if net.edge_count() < 2 {
        return Measure::undefined("fewer than two edges");
    }
    let deg = degrees(net, mode);
    let xs: Vec<f64> = net.edges().iter().map(|e| deg[e.source as usize] as f64).collect();
    let ys: Vec<f64> = net.edges().iter().map(|e| deg[e.target as usize] as f64).collect();
    match pearson(&xs, &ys) {
        Measure::Undefined { .. } => Measure::undefined("zero degree variance"),
        m => m,
    }
}

/// The five out-degree categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DegreeGroup {
    Zero,
    Low,
    MidLow,
    MidHigh,
    Top,
}

impl DegreeGroup {
    pub const ALL: [DegreeGroup; 5] = [
        DegreeGroup::Zero,
        DegreeGroup::Low,
        DegreeGroup::MidLow,
        DegreeGroup::MidHigh,
        DegreeGroup::Top,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            DegreeGroup::Zero => "d=0",
            DegreeGroup::Low => "0<d<=D0.3",
            DegreeGroup::MidLow => "D0.3<d<=D0.6",
            DegreeGroup::MidHigh => "D0.6<d<=D0.9",
            DegreeGroup::Top => "D0.9<d",
        }
    }
}

impl fmt::Display for DegreeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Out-degree categories of every node, with thresholds taken over the
/// positive out-degrees only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreePartition {
    /// `D0.3`, `D0.6`, `D0.9`.
    pub thresholds: [usize; 3],
    nodes: Vec<String>,
    groups: Vec<DegreeGroup>,
}

impl DegreePartition {
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    /// Group per node, aligned with [`DegreePartition::nodes`].
    pub fn groups(&self) -> &[DegreeGroup] {
        &self.groups
    }

    pub fn group_of(&self, id: &str) -> Option<DegreeGroup> {
        let i = self.nodes.binary_search_by(|s| s.as_str().cmp(id)).ok()?;
        Some(self.groups[i])
    }

    pub fn group_sizes(&self) -> [usize; 5] {
        let mut sizes = [0usize; 5];
        for g in &self.groups {
            sizes[g.index()] += 1;
        }
        sizes
    }

    /// Node ids in each group, in id order.
    pub fn members(&self) -> [Vec<&str>; 5] {
        let mut out: [Vec<&str>; 5] = Default::default();
        for (id, g) in self.nodes.iter().zip(&self.groups) {
            out[g.index()].push(id);
        }
        out
    }
}

pub fn degree_partition(net: &StockNetwork) -> Result<DegreePartition> {
    let deg = net.out_degrees();
    let mut positive: Vec<usize> = deg.iter().copied().filter(|&d| d > 0).collect();
    if positive.is_empty() {
        return Err(Error::Degenerate("every node has zero out-degree".into()));
    }
    positive.sort_unstable();
    let q = |k| nearest_rank_value(&positive, k).expect("non-empty");
    let thresholds = [q(0.3), q(0.6), q(0.9)];
    let groups = deg
        .iter()
        .map(|&d| match d {
            0 => DegreeGroup::Zero,
            d if d <= thresholds[0] => DegreeGroup::Low,
            d if d <= thresholds[1] => DegreeGroup::MidLow,
            d if d <= thresholds[2] => DegreeGroup::MidHigh,
            _ => DegreeGroup::Top,
        })
        .collect();
    Ok(DegreePartition {
        thresholds,
        nodes: net.nodes().to_vec(),
        groups,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupShareRow {
    pub group: DegreeGroup,
    pub out_degree: f64,
    pub out_strength: f64,
    /// `None` when no market values were supplied.
    pub market_value: Option<f64>,
    pub node_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupShares {
    pub rows: Vec<GroupShareRow>,
    /// Nodes left out because they have no market value.
    pub excluded: Vec<String>,
}

/// Fraction of total out-degree, out-strength, market value and node count
/// falling in each out-degree group.
pub fn group_feature_shares(
    net: &StockNetwork,
    partition: &DegreePartition,
    market_values: Option<&HashMap<String, Cents>>,
) -> Result<GroupShares> {
    if partition.nodes() != net.nodes() {
        return Err(Error::InvalidArgument("partition was built from a different network".into()));
    }
    let deg = net.out_degrees();
    let strength = net.out_strengths();
    let mut excluded = Vec::new();
    let mut totals = [[0f64; 4]; 5];
    for (v, id) in net.nodes().iter().enumerate() {
        let mv = match market_values {
            Some(map) => match map.get(id) {
                Some(c) => c.as_units(),
                None => {
                    tracing::debug!(node = %id, "no market value; excluded from group shares");
                    excluded.push(id.clone());
                    continue;
                }
            },
            None => 0.0,
        };
        let g = partition.groups()[v].index();
        totals[g][0] += deg[v] as f64;
        totals[g][1] += strength[v] as f64;
        totals[g][2] += mv;
        totals[g][3] += 1.0;
    }
    let sum = |c: usize| totals.iter().map(|t| t[c]).sum::<f64>();
    let col_sums = [sum(0), sum(1), sum(2), sum(3)];
    let share = |g: usize, c: usize| if col_sums[c] > 0.0 { totals[g][c] / col_sums[c] } else { 0.0 };
    let rows = DegreeGroup::ALL
        .iter()
        .map(|&group| {
            let g = group.index();
            GroupShareRow {
                group,
                out_degree: share(g, 0),
                out_strength: share(g, 1),
                market_value: market_values.map(|_| share(g, 2)),
                node_ratio: share(g, 3),
            }
        })
        .collect();
    Ok(GroupShares { rows, excluded })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelAxis {
    Sector,
    Style,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompositionRow {
    pub category: String,
    pub counts: [usize; 5],
    pub total: usize,
    /// `counts[g] / total`.
    pub row_share: [f64; 5],
    /// `counts[g] / labelled nodes in group g`.
    pub column_share: [f64; 5],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompositionReport {
    pub axis: LabelAxis,
    /// Sorted by category name.
    pub rows: Vec<CompositionRow>,
    /// Labelled node counts per group.
    pub sample: [usize; 5],
    pub sample_total: usize,
    /// Nodes of the partition with no label, per group.
    pub unlabeled: [usize; 5],
}

/// Counts of labelled nodes per (category, out-degree group) cell.
pub fn composition_report(partition: &DegreePartition, labels: &[StockLabel], axis: LabelAxis) -> CompositionReport {
    let by_id: HashMap<&str, &StockLabel> = labels.iter().map(|l| (l.stock_id.as_str(), l)).collect();
    let mut cells: BTreeMap<&str, [usize; 5]> = BTreeMap::new();
    let mut sample = [0usize; 5];
    let mut unlabeled = [0usize; 5];
    for (id, g) in partition.nodes().iter().zip(partition.groups()) {
        match by_id.get(id.as_str()) {
            Some(l) => {
                let cat = match axis {
                    LabelAxis::Sector => l.sector.as_str(),
                    LabelAxis::Style => l.style.as_str(),
                };
                cells.entry(cat).or_default()[g.index()] += 1;
                sample[g.index()] += 1;
            }
            None => unlabeled[g.index()] += 1,
        }
    }
    let rows = cells
        .into_iter()
        .map(|(cat, counts)| {
            let total: usize = counts.iter().sum();
            let mut row_share = [0f64; 5];
            let mut column_share = [0f64; 5];
            for g in 0..5 {
                row_share[g] = if total > 0 { counts[g] as f64 / total as f64 } else { 0.0 };
                column_share[g] = if sample[g] > 0 { counts[g] as f64 / sample[g] as f64 } else { 0.0 };
            }
            CompositionRow {
                category: cat.to_string(),
                counts,
                total,
                row_share,
                column_share,
            }
        })
        .collect();
    CompositionReport {
        axis,
        rows,
        sample,
        sample_total: sample.iter().sum(),
        unlabeled,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RichClubPoint {
    pub r: usize,
    /// Edges inside the subgraph induced by the top-`r` nodes.
    pub e: usize,
    pub density_rr: Measure,
    /// Density of Granger-significant edges in the same subgraph, when known.
    pub granger_density: Option<Measure>,
}

/// Induced-subgraph edge counts for the top-`r` out-degree nodes.
pub fn rich_club_curve(net: &StockNetwork, r_values: &[usize]) -> Result<Vec<RichClubPoint>> {
    let order = net.top_by_out_degree(net.node_count());
    let mut rank = vec![usize::MAX; net.node_count()];
    for (pos, &v) in order.iter().enumerate() {
        rank[v] = pos;
    }
    r_values
        .iter()
        .map(|&r| {
            if r > net.node_count() {
                return Err(Error::InvalidArgument(format!(
                    "r={r} exceeds node count {}",
                    net.node_count()
                )));
            }
            let e = net
                .edges()
                .iter()
                .filter(|edge| rank[edge.source as usize] < r && rank[edge.target as usize] < r)
                .count();
            let possible = r as f64 * (r as f64 - 1.0);
            Ok(RichClubPoint {
                r,
                e,
                density_rr: Measure::ratio(e as f64, possible, "r(r-1) is zero"),
                granger_density: None,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeStrengthRow {
    pub node: String,
    pub degree: usize,
    /// Strength in the same direction, in currency units.
    pub strength: f64,
    /// Degree in the opposite direction.
    pub other_degree: usize,
}

/// One row per node pairing its `mode`-degree with its `mode`-strength. Nodes
/// with zero out-degree are omitted in `Out` mode.
pub fn degree_strength_scatter(net: &StockNetwork, mode: DegreeMode) -> Vec<DegreeStrengthRow> {
    let (deg, strength, other) = match mode {
        DegreeMode::Out => (net.out_degrees(), net.out_strengths(), net.in_degrees()),
        DegreeMode::In => (net.in_degrees(), net.in_strengths(), net.out_degrees()),
    };
    net.nodes()
        .iter()
        .enumerate()
        .filter(|&(v, _)| !(mode == DegreeMode::Out && deg[v] == 0))
        .map(|(v, id)| DegreeStrengthRow {
            node: id.clone(),
            degree: deg[v],
            strength: Cents(strength[v]).as_units(),
            other_degree: other[v],
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeCdfPoint {
    pub degree: usize,
    pub in_cdf: f64,
    pub out_cdf: f64,
}

/// Empirical `P(degree ≤ d)` for in- and out-degrees at every observed degree.
pub fn degree_cdf(net: &StockNetwork) -> Vec<DegreeCdfPoint> {
    let n = net.node_count() as f64;
    let mut ins = net.in_degrees();
    let mut outs = net.out_degrees();
    ins.sort_unstable();
    outs.sort_unstable();
    let mut support: Vec<usize> = ins.iter().chain(&outs).copied().collect();
    support.sort_unstable();
    support.dedup();
    let cdf = |sorted: &[usize], d: usize| sorted.partition_point(|&x| x <= d) as f64 / n;
    support
        .into_iter()
        .map(|d| DegreeCdfPoint {
            degree: d,
            in_cdf: cdf(&ins, d),
            out_cdf: cdf(&outs, d),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Edge, NetworkMeta};

    fn net(n: usize, edges: &[(u32, u32, u64)]) -> StockNetwork {
        let nodes = (0..n).map(|i| format!("n{i:02}")).collect();
        let edges = edges
            .iter()
            .map(|&(s, t, w)| Edge {
                source: s,
                target: t,
                weight: Cents(w),
            })
            .collect();
        StockNetwork::new(nodes, edges, NetworkMeta::default()).unwrap()
    }

    #[test]
    fn directed_cycle_stats() {
        let s = compute_stats(&net(3, &[(0, 1, 100), (1, 2, 200), (2, 0, 300)])).unwrap();
        assert_eq!(s.density, 0.5);
        assert_eq!(s.n_scc, 1);
        assert_eq!(s.max_scc_size, 3);
        assert_eq!(s.n_wcc, 1);
        assert_eq!(s.avg_degree, 1.0);
        assert_eq!(s.weight_sum, 6.0);
        assert_eq!(s.weight_mean, 2.0);
        assert!((s.weight_std - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        // every degree is 1
        assert!(s.out_assort.value().is_none());
    }

    #[test]
    fn star_out_assortativity_is_undefined() {
        let star = net(4, &[(0, 1, 1), (0, 2, 1), (0, 3, 1)]);
        assert!(matches!(assortativity(&star, DegreeMode::Out), Measure::Undefined { .. }));
    }

    #[test]
    fn small_assortativity_by_hand() {
        // a→b, c→d, b→d; in-degree pairs (0,1), (0,2), (1,2) give r = 0.5
        let g = net(4, &[(0, 1, 1), (2, 3, 1), (1, 3, 1)]);
        assert!((assortativity(&g, DegreeMode::In).value().unwrap() - 0.5).abs() < 1e-15);
        // out-degree of every source is 1
        assert!(assortativity(&g, DegreeMode::Out).value().is_none());
    }

    #[test]
    fn partition_thresholds_by_nearest_rank() {
        // ten hubs with out-degrees 10, 20, ..., 100 and 100 leaves
        let n = 110;
        let mut edges = Vec::new();
        for h in 0..10u32 {
            for t in 0..(h as usize + 1) * 10 {
                edges.push((h, 10 + t as u32, 1));
            }
        }
        let p = degree_partition(&net(n, &edges)).unwrap();
        assert_eq!(p.thresholds, [30, 60, 90]);
        assert_eq!(p.group_sizes(), [100, 3, 3, 3, 1]);
        assert_eq!(p.group_sizes().iter().sum::<usize>(), n);
        assert_eq!(p.group_of("n09"), Some(DegreeGroup::Top));
        assert_eq!(p.group_of("n02"), Some(DegreeGroup::Low));
    }

    #[test]
    fn partition_requires_positive_degree() {
        assert!(degree_partition(&net(3, &[])).is_err());
    }

    #[test]
    fn shares_on_five_nodes() {
        // out-degrees: n0=3, n1=1, others 0; D thresholds over {1, 3} are 1, 3, 3
        let g = net(5, &[(0, 1, 300), (0, 2, 100), (0, 3, 100), (1, 0, 500)]);
        let p = degree_partition(&g).unwrap();
        assert_eq!(p.thresholds, [1, 3, 3]);
        let mv: HashMap<String, Cents> =
            (0..5).map(|i| (format!("n{i:02}"), Cents(100 * (i as u64 + 1)))).collect();
        let s = group_feature_shares(&g, &p, Some(&mv)).unwrap();
        let row = |grp: DegreeGroup| &s.rows[grp.index()];
        assert_eq!(row(DegreeGroup::Low).out_degree, 0.25);
        assert_eq!(row(DegreeGroup::MidLow).out_degree, 0.75);
        assert_eq!(row(DegreeGroup::Low).out_strength, 0.5);
        assert_eq!(row(DegreeGroup::MidLow).out_strength, 0.5);
        // market values 1..5 (×100 cents); n2..n4 sum to 12 of 15
        assert!((row(DegreeGroup::Zero).market_value.unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(row(DegreeGroup::Zero).node_ratio, 0.6);
        for col in 0..4 {
            let total: f64 = s
                .rows
                .iter()
                .map(|r| [r.out_degree, r.out_strength, r.market_value.unwrap(), r.node_ratio][col])
                .sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shares_exclude_nodes_without_market_value() {
        let g = net(2, &[(0, 1, 1)]);
        let p = degree_partition(&g).unwrap();
        let mv: HashMap<String, Cents> = [("n00".to_string(), Cents(5))].into_iter().collect();
        let s = group_feature_shares(&g, &p, Some(&mv)).unwrap();
        assert_eq!(s.excluded, vec!["n01".to_string()]);
        // single remaining node is the whole population
        let top = s.rows.iter().find(|r| r.node_ratio > 0.0).unwrap();
        assert_eq!((top.out_degree, top.market_value, top.node_ratio), (1.0, Some(1.0), 1.0));
    }

    #[test]
    fn composition_counts() {
        let g = net(4, &[(0, 1, 1), (0, 2, 1), (1, 0, 1)]);
        let p = degree_partition(&g).unwrap();
        let label = |id: &str, sector: &str| StockLabel {
            stock_id: id.into(),
            sector: sector.into(),
            style: "large-cap-value".into(),
        };
        let labels = vec![label("n00", "finance"), label("n01", "finance"), label("n02", "retail")];
        let r = composition_report(&p, &labels, LabelAxis::Sector);
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].category, "finance");
        assert_eq!(r.rows[0].total, 2);
        assert_eq!(r.unlabeled.iter().sum::<usize>(), 1);
        assert_eq!(r.sample_total, 3);
        let style = composition_report(&p, &labels, LabelAxis::Style);
        assert_eq!(style.rows.len(), 1);
        assert_eq!(style.rows[0].counts, style.sample);
    }

    #[test]
    fn rich_club_edges() {
        let complete: Vec<(u32, u32, u64)> = (0..4u32)
            .flat_map(|a| (0..4u32).filter(move |&b| b != a).map(move |b| (a, b, 1)))
            .collect();
        let pts = rich_club_curve(&net(4, &complete), &[1, 2, 3, 4]).unwrap();
        assert_eq!(pts[0].e, 0);
        assert!(pts[0].density_rr.value().is_none());
        for p in &pts[1..] {
            assert_eq!(p.density_rr.value(), Some(1.0));
        }
        assert!(rich_club_curve(&net(2, &[]), &[3]).is_err());
    }

    #[test]
    fn scatter_omits_zero_out_degree() {
        let g = net(3, &[(0, 1, 250)]);
        let rows = degree_strength_scatter(&g, DegreeMode::Out);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].strength, 2.5);
        assert_eq!(degree_strength_scatter(&g, DegreeMode::In).len(), 3);
    }

    #[test]
    fn cdf_ends_at_one() {
        let g = net(3, &[(0, 1, 1), (0, 2, 1)]);
        let cdf = degree_cdf(&g);
        assert_eq!(cdf.last().unwrap().out_cdf, 1.0);
        assert_eq!(cdf[0].degree, 0);
        assert!((cdf[0].out_cdf - 2.0 / 3.0).abs() < 1e-15);
    }
}

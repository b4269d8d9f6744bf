//! Institutional herding across out-degree groups: per-institution holding
//! matrices, one-tailed paired t-tests between adjacent groups, portfolio
//! entropy and crash-day absolute loss.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{DegreeGroup, DegreePartition};
use crate::network::BipartiteGraph;
use crate::special::student_t_cdf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HerdingMetric {
    /// Share of the group's stocks held.
    Count,
    /// Mean held value per held stock.
    Value,
}

impl fmt::Display for HerdingMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HerdingMetric::Count => "count",
            HerdingMetric::Value => "value",
        })
    }
}

/// Institution × out-degree-group holding patterns.
///
/// Rows follow the institution id order of the bipartite graph. A cell is
/// `None` only when its group has no stocks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HerdingMatrix {
    pub institutions: Vec<String>,
    pub group_sizes: [usize; 5],
    /// Held stocks in the group over the group size.
    pub cells_count: Vec<[Option<f64>; 5]>,
    /// Mean held value (currency units) over held stocks in the group; 0 when none held.
    pub cells_value: Vec<[Option<f64>; 5]>,
    pub held_in_group: Vec<[usize; 5]>,
    /// Stocks held overall, including any outside the partition.
    pub stocks_held: Vec<usize>,
}

impl HerdingMatrix {
    pub fn cells(&self, metric: HerdingMetric) -> &[[Option<f64>; 5]] {
        match metric {
            HerdingMetric::Count => &self.cells_count,
            HerdingMetric::Value => &self.cells_value,
        }
    }

    /// One group's column across institutions; `None` if the group is empty.
    pub fn column(&self, metric: HerdingMetric, group: DegreeGroup) -> Option<Vec<f64>> {
        self.cells(metric).iter().map(|row| row[group.index()]).collect()
    }

    /// Institution-mean of each group column.
    pub fn group_means(&self, metric: HerdingMetric) -> [Option<f64>; 5] {
        let mut out = [None; 5];
        for g in DegreeGroup::ALL {
            out[g.index()] = self
                .column(metric, g)
                .filter(|c| !c.is_empty())
                .map(|c| c.iter().sum::<f64>() / c.len() as f64);
        }
        out
    }

    /// Row indices sorted for heatmap display: ascending mean value held in
    /// the top group, then institution id.
    pub fn display_order(&self) -> Vec<usize> {
        let top = DegreeGroup::Top.index();
        let mut order: Vec<usize> = (0..self.institutions.len()).collect();
        order.sort_by(|&a, &b| {
            let va = self.cells_value[a][top].unwrap_or(0.0);
            let vb = self.cells_value[b][top].unwrap_or(0.0);
            va.total_cmp(&vb).then_with(|| self.institutions[a].cmp(&self.institutions[b]))
        });
        order
    }
}

pub fn herding_matrices(b: &BipartiteGraph, partition: &DegreePartition) -> HerdingMatrix {
    let group_of_stock: Vec<Option<DegreeGroup>> = b.stocks().iter().map(|s| partition.group_of(s)).collect();
    let group_sizes = partition.group_sizes();
    let mut cells_count = Vec::with_capacity(b.investors().len());
    let mut cells_value = Vec::with_capacity(b.investors().len());
    let mut held_in_group = Vec::with_capacity(b.investors().len());
    let mut stocks_held = Vec::with_capacity(b.investors().len());
    for m in 0..b.investors().len() {
        let mut held = [0usize; 5];
        let mut value = [0u128; 5];
        for &(s, v) in b.holdings_of(m) {
            if let Some(g) = group_of_stock[s as usize] {
                held[g.index()] += 1;
                value[g.index()] += u128::from(v.0);
            }
        }
        let mut count_row = [None; 5];
        let mut value_row = [None; 5];
        for g in 0..5 {
            if group_sizes[g] == 0 {
                continue;
            }
            count_row[g] = Some(held[g] as f64 / group_sizes[g] as f64);
            value_row[g] = Some(if held[g] == 0 {
                0.0
            } else {
                value[g] as f64 / 100.0 / held[g] as f64
            });
        }
        cells_count.push(count_row);
        cells_value.push(value_row);
        held_in_group.push(held);
        stocks_held.push(b.holdings_of(m).len());
    }
    HerdingMatrix {
        institutions: b.investors().to_vec(),
        group_sizes,
        cells_count,
        cells_value,
        held_in_group,
        stocks_held,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedTTest {
    pub t_stat: f64,
    /// `P(T ≤ t)` with `n − 1` degrees of freedom, for H1: mean(low − high) < 0.
    pub p_value: f64,
    pub n_pairs: usize,
    pub df: usize,
}

/// Paired t-test on `low − high` with a one-tailed alternative that the low
/// column is smaller.
pub fn paired_one_tailed_t(low: &[f64], high: &[f64]) -> Result<PairedTTest> {
    if low.len() != high.len() {
        return Err(Error::InvalidArgument("paired columns differ in length".into()));
    }
    let n = low.len();
    if n < 2 {
        return Err(Error::InvalidArgument("paired t-test needs at least two pairs".into()));
    }
    let diffs: Vec<f64> = low.iter().zip(high).map(|(a, b)| a - b).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let ss = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>();
    let var = ss / (n - 1) as f64;
    if var == 0.0 || var.sqrt() <= 1e-14 * mean.abs() {
        return Err(Error::Degenerate("differences have zero variance".into()));
    }
    let t = mean / (var / n as f64).sqrt();
    let df = n - 1;
    Ok(PairedTTest {
        t_stat: t,
        p_value: student_t_cdf(t, df as f64),
        n_pairs: n,
        df,
    })
}

/// One row of the adjacent-group test table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupTest {
    pub metric: HerdingMetric,
    pub group_low: DegreeGroup,
    pub group_high: DegreeGroup,
    pub test: Option<PairedTTest>,
    /// Why `test` is missing.
    pub note: Option<String>,
}

/// Tests every adjacent pair of groups for both metrics.
pub fn adjacent_group_tests(matrix: &HerdingMatrix) -> Vec<GroupTest> {
    let mut out = Vec::new();
    for metric in [HerdingMetric::Count, HerdingMetric::Value] {
        for pair in DegreeGroup::ALL.windows(2) {
            let (low, high) = (pair[0], pair[1]);
            let result = match (matrix.column(metric, low), matrix.column(metric, high)) {
                (Some(l), Some(h)) => paired_one_tailed_t(&l, &h).map_err(|e| e.to_string()),
                _ => Err("empty degree group".to_string()),
            };
            let (test, note) = match result {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(e)),
            };
            out.push(GroupTest {
                metric,
                group_low: low,
                group_high: high,
                test,
                note,
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopGroupInvestor {
    pub institution: String,
    /// Mean held value per stock in the top group, currency units.
    pub value_per_stock: f64,
    pub held_in_top: usize,
    pub share_of_top: f64,
    pub stocks_held: usize,
}

/// Institutions investing the most per stock in the top out-degree group.
pub fn top_group_investors(matrix: &HerdingMatrix, n: usize) -> Vec<TopGroupInvestor> {
    let top = DegreeGroup::Top.index();
    let mut order: Vec<usize> = (0..matrix.institutions.len()).collect();
    order.sort_by(|&a, &b| {
        let va = matrix.cells_value[a][top].unwrap_or(0.0);
        let vb = matrix.cells_value[b][top].unwrap_or(0.0);
        vb.total_cmp(&va)
            .then_with(|| matrix.institutions[a].cmp(&matrix.institutions[b]))
    });
    order
        .into_iter()
        .take(n)
        .map(|m| TopGroupInvestor {
            institution: matrix.institutions[m].clone(),
            value_per_stock: matrix.cells_value[m][top].unwrap_or(0.0),
            held_in_top: matrix.held_in_group[m][top],
            share_of_top: matrix.cells_count[m][top].unwrap_or(0.0),
            stocks_held: matrix.stocks_held[m],
        })
        .collect()
}

fn investor(b: &BipartiteGraph, institution: &str) -> Result<usize> {
    b.investor_index(institution)
        .ok_or_else(|| Error::UnknownInstitution(institution.to_string()))
}

/// Shannon entropy (nats) of the institution's holding-value distribution.
pub fn portfolio_entropy(b: &BipartiteGraph, institution: &str) -> Result<f64> {
    let holdings = b.holdings_of(investor(b, institution)?);
    let total: u128 = holdings.iter().map(|&(_, v)| u128::from(v.0)).sum();
    if total == 0 {
        return Err(Error::Degenerate(format!("{institution} holds nothing")));
    }
    let total = total as f64;
    Ok(holdings
        .iter()
        .map(|&(_, v)| v.0 as f64 / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbsoluteLoss {
    /// `|Σ h_i d_i|` in currency units.
    pub loss: f64,
    /// Held stocks without a daily change.
    pub excluded: Vec<String>,
}

/// Absolute value of the holding-weighted sum of daily net changes.
pub fn absolute_loss(
    b: &BipartiteGraph,
    institution: &str,
    daily_changes: &HashMap<String, f64>,
) -> Result<AbsoluteLoss> {
    let mut sum = 0.0;
    let mut excluded = Vec::new();
    for &(s, v) in b.holdings_of(investor(b, institution)?) {
        let id = &b.stocks()[s as usize];
        match daily_changes.get(id) {
            Some(d) => sum += v.as_units() * d,
            None => {
                tracing::debug!(institution, stock = %id, "no daily change; excluded from loss");
                excluded.push(id.clone());
            }
        }
    }
    Ok(AbsoluteLoss {
        loss: sum.abs(),
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyLossPoint {
    pub institution: String,
    pub entropy: f64,
    pub absolute_loss: f64,
    pub excluded_stocks: usize,
}

pub fn entropy_loss_points(b: &BipartiteGraph, daily_changes: &HashMap<String, f64>) -> Result<Vec<EntropyLossPoint>> {
    b.investors()
        .iter()
        .map(|inst| {
            let loss = absolute_loss(b, inst, daily_changes)?;
            Ok(EntropyLossPoint {
                institution: inst.clone(),
                entropy: portfolio_entropy(b, inst)?,
                absolute_loss: loss.loss,
                excluded_stocks: loss.excluded.len(),
            })
        })
        .collect()
}

//! Intraday percentage changes, ten-minute windows, out-degree group means,
//! hub-versus-successor scatter data and the two randomized null experiments.

use std::collections::HashMap;

use chrono::NaiveDate;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{CloseBook, MinuteBarSeries};
use crate::metrics::{DegreeGroup, DegreePartition};
use crate::network::StockNetwork;

/// Minute-by-minute change relative to the prior close.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChangeSeries {
    pub stock_id: String,
    pub trade_date: NaiveDate,
    /// `(p_t − prev_close) / prev_close`; 0 where `valid` is false.
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl ChangeSeries {
    /// Builds a series from raw values, treating non-finite entries as missing.
    pub fn from_values(stock_id: impl Into<String>, trade_date: NaiveDate, raw: &[f64]) -> Self {
        ChangeSeries {
            stock_id: stock_id.into(),
            trade_date,
            values: raw.iter().map(|v| if v.is_finite() { *v } else { 0.0 }).collect(),
            valid: raw.iter().map(|v| v.is_finite()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn get(&self, t: usize) -> Option<f64> {
        self.valid[t].then(|| self.values[t])
    }
}

/// Percentage changes with carry-forward of the last traded price through
/// later gaps of the same day. Minutes before the first trade stay missing.
pub fn minute_changes(series: &MinuteBarSeries) -> Result<ChangeSeries> {
    let prev = series.prev_close.ok_or_else(|| {
        Error::Degenerate(format!("{} on {} has no prior close", series.stock_id, series.trade_date))
    })?;
    if !(prev > 0.0) {
        return Err(Error::Degenerate(format!("{} prior close is not positive", series.stock_id)));
    }
    let mut last = None;
    let mut values = Vec::with_capacity(series.prices.len());
    let mut valid = Vec::with_capacity(series.prices.len());
    for p in &series.prices {
        if p.is_some() {
            last = *p;
        }
        match last {
            Some(price) => {
                values.push((price - prev) / prev);
                valid.push(true);
            }
            None => {
                values.push(0.0);
                valid.push(false);
            }
        }
    }
    Ok(ChangeSeries {
        stock_id: series.stock_id.clone(),
        trade_date: series.trade_date,
        values,
        valid,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowedChanges {
    pub stock_id: String,
    pub trade_date: NaiveDate,
    pub window_minutes: usize,
    pub values: Vec<Option<f64>>,
}

/// Value of each non-overlapping window: the change at its last valid minute.
pub fn window_last(changes: &ChangeSeries, window_minutes: usize) -> Result<WindowedChanges> {
    if window_minutes == 0 || changes.len() % window_minutes != 0 {
        return Err(Error::InvalidArgument(format!(
            "window of {window_minutes} minutes does not divide a {}-minute session",
            changes.len()
        )));
    }
    let values = (0..changes.len() / window_minutes)
        .map(|w| {
            (w * window_minutes..(w + 1) * window_minutes)
                .rev()
                .find_map(|t| changes.get(t))
        })
        .collect();
    Ok(WindowedChanges {
        stock_id: changes.stock_id.clone(),
        trade_date: changes.trade_date,
        window_minutes,
        values,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupMeans {
    /// Per window, unweighted mean change per out-degree group.
    pub means: Vec<[Option<f64>; 5]>,
    /// Per window, stocks contributing to each mean.
    pub counts: Vec<[usize; 5]>,
}

/// Mean windowed change of each out-degree group. Stocks outside the partition
/// are ignored; a group with no valid stock in a window gives a missing cell.
pub fn group_mean_changes(windowed: &[WindowedChanges], partition: &DegreePartition) -> Result<GroupMeans> {
    let n_windows = windowed.first().map_or(0, |w| w.values.len());
    if windowed.iter().any(|w| w.values.len() != n_windows) {
        return Err(Error::InvalidArgument("windowed series differ in length".into()));
    }
    let mut sums = vec![[0f64; 5]; n_windows];
    let mut counts = vec![[0usize; 5]; n_windows];
    for w in windowed {
        let Some(g) = partition.group_of(&w.stock_id) else {
            continue;
        };
        for (t, v) in w.values.iter().enumerate() {
            if let Some(v) = v {
                sums[t][g.index()] += v;
                counts[t][g.index()] += 1;
            }
        }
    }
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(s, c)| {
            let mut m = [None; 5];
            for g in 0..5 {
                if c[g] > 0 {
                    m[g] = Some(s[g] / c[g] as f64);
                }
            }
            m
        })
        .collect();
    Ok(GroupMeans { means, counts })
}

/// Windowed changes aligned to the nodes of a network.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowPanel {
    windows: usize,
    rows: Vec<Option<Vec<Option<f64>>>>,
}

impl WindowPanel {
    pub fn new(net: &StockNetwork, windowed: &[WindowedChanges]) -> Result<Self> {
        let windows = windowed.first().map_or(0, |w| w.values.len());
        let mut rows = vec![None; net.node_count()];
        for w in windowed {
            if w.values.len() != windows {
                return Err(Error::InvalidArgument("windowed series differ in length".into()));
            }
            if let Some(v) = net.node_index(&w.stock_id) {
                rows[v] = Some(w.values.clone());
            }
        }
        Ok(WindowPanel { windows, rows })
    }

    pub fn windows(&self) -> usize {
        self.windows
    }

    fn value(&self, node: usize, window: usize) -> Option<f64> {
        self.rows[node].as_ref()?[window]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub hub_change: f64,
    pub successor_mean: f64,
    pub successors_used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScatterSeries {
    pub hub_id: String,
    pub successor_count: usize,
    /// One entry per window; missing when the hub or all its successors lack data.
    pub points: Vec<Option<ScatterPoint>>,
}

fn scatter_points(
    hub: usize,
    successors: impl Iterator<Item = usize> + Clone,
    label: &impl Fn(usize) -> usize,
    panel: &WindowPanel,
) -> Vec<Option<ScatterPoint>> {
    (0..panel.windows)
        .map(|w| {
            let hub_change = panel.value(label(hub), w)?;
            let (sum, used) = successors
                .clone()
                .filter(|&s| s != hub)
                .filter_map(|s| panel.value(label(s), w))
                .fold((0.0, 0usize), |(sum, n), v| (sum + v, n + 1));
            (used > 0).then(|| ScatterPoint {
                hub_change,
                successor_mean: sum / used as f64,
                successors_used: used,
            })
        })
        .collect()
}

fn check_top_n(out_degrees: &[usize], top_n: usize) -> Result<()> {
    let positive = out_degrees.iter().filter(|&&d| d > 0).count();
    if top_n == 0 || top_n > positive {
        return Err(Error::InvalidArgument(format!(
            "top_n={top_n} but only {positive} nodes have positive out-degree"
        )));
    }
    Ok(())
}

/// Windowed change of each of the `top_n` highest out-degree stocks against
/// the unweighted mean change of its successors.
pub fn hub_successor_scatter(net: &StockNetwork, panel: &WindowPanel, top_n: usize) -> Result<Vec<ScatterSeries>> {
    check_top_n(&net.out_degrees(), top_n)?;
    Ok(scatter_with_labels(net, panel, top_n, &|v| v))
}

/// Scatter on the structure of `net` where structural node `v` carries the
/// data (and id) of node `label(v)`.
fn scatter_with_labels(
    net: &StockNetwork,
    panel: &WindowPanel,
    top_n: usize,
    label: &impl Fn(usize) -> usize,
) -> Vec<ScatterSeries> {
    net.top_by_out_degree(top_n)
        .into_iter()
        .map(|hub| {
            let out = net.out_edges(hub);
            ScatterSeries {
                hub_id: net.nodes()[label(hub)].clone(),
                successor_count: out.len(),
                points: scatter_points(hub, out.iter().map(|e| e.target as usize), label, panel),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NullModel {
    /// Uniform random simple digraph with the same node and edge counts.
    RandomEdges,
    /// Node labels permuted uniformly over a fixed structure.
    ShuffledNodes,
}

/// Mean over trials for one hub rank and window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NullPoint {
    /// 0-based rank of the hub by out-degree within each trial.
    pub rank: usize,
    pub window: usize,
    pub hub_change: Option<f64>,
    pub successor_mean: Option<f64>,
    /// Standard error of `successor_mean − hub_change` across trials.
    pub diff_se: Option<f64>,
    pub trials_used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NullScatter {
    pub model: NullModel,
    pub trials: usize,
    pub seed: u64,
    pub points: Vec<NullPoint>,
    /// Per trial, mean of `successor_mean − hub_change` over all defined points.
    pub trial_mean_diffs: Vec<Option<f64>>,
}

impl NullScatter {
    /// Mean and standard error, across trials, of the per-trial mean gap
    /// between successors and hubs.
    pub fn overall_diff(&self) -> Option<(f64, f64)> {
        let d: Vec<f64> = self.trial_mean_diffs.iter().flatten().copied().collect();
        mean_se(&d)
    }
}

fn mean_se(xs: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Some((mean, f64::NAN));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((mean, (var / n as f64).sqrt()))
}

/// Per-trial RNG: the ChaCha stream number is the trial index, so trials can
/// run in any order or thread count.
fn trial_rng(seed: u64, trial: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn summarize(model: NullModel, seed: u64, top_n: usize, windows: usize, trials: Vec<Vec<Vec<Option<ScatterPoint>>>>) -> NullScatter {
    let mut points = Vec::with_capacity(top_n * windows);
    for rank in 0..top_n {
        for window in 0..windows {
            let defined: Vec<ScatterPoint> = trials
                .iter()
                .filter_map(|t| t.get(rank).and_then(|s| s[window]))
                .collect();
            let n = defined.len();
            let diffs: Vec<f64> = defined.iter().map(|p| p.successor_mean - p.hub_change).collect();
            points.push(NullPoint {
                rank,
                window,
                hub_change: (n > 0).then(|| defined.iter().map(|p| p.hub_change).sum::<f64>() / n as f64),
                successor_mean: (n > 0).then(|| defined.iter().map(|p| p.successor_mean).sum::<f64>() / n as f64),
                diff_se: mean_se(&diffs).map(|(_, se)| se).filter(|se| se.is_finite()),
                trials_used: n,
            });
        }
    }
    let trial_mean_diffs = trials
        .iter()
        .map(|t| {
            let d: Vec<f64> = t
                .iter()
                .flatten()
                .flatten()
                .map(|p| p.successor_mean - p.hub_change)
                .collect();
            mean_se(&d).map(|(m, _)| m)
        })
        .collect();
    NullScatter {
        model,
        trials: trials.len(),
        seed,
        points,
        trial_mean_diffs,
    }
}

/// Null experiment (1): per trial a uniform random simple digraph on the same
/// nodes with the same edge count, sampled as distinct ordered pairs. Hubs are
/// the top out-degree nodes of each random graph.
pub fn random_experiment_edges(
    net: &StockNetwork,
    panel: &WindowPanel,
    top_n: usize,
    trials: usize,
    seed: u64,
) -> Result<NullScatter> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let n = net.node_count();
    let m = net.edge_count();
    if n < 2 || m == 0 {
        return Err(Error::Degenerate("random graph needs two nodes and an edge".into()));
    }
    if top_n == 0 || top_n > n {
        return Err(Error::InvalidArgument(format!("top_n={top_n} exceeds node count {n}")));
    }
    let per_trial: Vec<Vec<Vec<Option<ScatterPoint>>>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
            for idx in index::sample(&mut rng, n * (n - 1), m) {
                let (s, r) = (idx / (n - 1), idx % (n - 1));
                let t = if r >= s { r + 1 } else { r };
                adj[s].push(t as u32);
            }
            // ties in out-degree are broken by a random priority, not by id
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            order.sort_by(|&a, &b| adj[b].len().cmp(&adj[a].len()));
            order
                .into_iter()
                .take(top_n)
                .map(|hub| scatter_points(hub, adj[hub].iter().map(|&t| t as usize), &|v| v, panel))
                .collect()
        })
        .collect();
    Ok(summarize(NullModel::RandomEdges, seed, top_n, panel.windows, per_trial))
}

/// Null experiment (2): per trial a uniform permutation of node labels on the
/// fixed structure, so the degree sequence is preserved exactly.
pub fn random_experiment_nodes(
    net: &StockNetwork,
    panel: &WindowPanel,
    top_n: usize,
    trials: usize,
    seed: u64,
) -> Result<NullScatter> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    check_top_n(&net.out_degrees(), top_n)?;
    let n = net.node_count();
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut trial_rng(seed, trial));
            shuffled_scatter(net, panel, top_n, &perm)
                .into_iter()
                .map(|s| s.points)
                .collect()
        })
        .collect();
    Ok(summarize(NullModel::ShuffledNodes, seed, top_n, panel.windows, per_trial))
}

/// Scatter after relabelling structural node `v` as `perm[v]`.
pub fn shuffled_scatter(net: &StockNetwork, panel: &WindowPanel, top_n: usize, perm: &[usize]) -> Vec<ScatterSeries> {
    scatter_with_labels(net, panel, top_n, &|v| perm[v])
}

/// Close-to-close change of each stock on `date`.
pub fn daily_net_changes(closes: &CloseBook, date: NaiveDate) -> HashMap<String, f64> {
    closes
        .stocks()
        .filter_map(|s| {
            let close = closes.close_on(s, date)?;
            let prev = closes.prev_close(s, date)?;
            Some((s.to_string(), (close - prev) / prev))
        })
        .collect()
}

/// Per-window count of stocks sitting at the down limit, for the
/// limit-locked check of a crash day.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitDownCounts {
    pub trade_date: NaiveDate,
    /// Stocks with at least one valid minute.
    pub active: usize,
    pub at_limit: Vec<usize>,
}

/// A stock is at the limit when its windowed change is within `tolerance` of
/// `−limit` or below it.
pub fn limit_down_counts(windowed: &[WindowedChanges], limit: f64, tolerance: f64) -> Option<LimitDownCounts> {
    let first = windowed.first()?;
    let windows = first.values.len();
    let mut at_limit = vec![0usize; windows];
    let mut active = 0;
    for w in windowed {
        if w.values.iter().any(Option::is_some) {
            active += 1;
        }
        for (t, v) in w.values.iter().enumerate().take(windows) {
            if matches!(v, Some(v) if *v <= -limit + tolerance) {
                at_limit[t] += 1;
            }
        }
    }
    Some(LimitDownCounts {
        trade_date: first.trade_date,
        active,
        at_limit,
    })
}

/// True when the stock traded at or below `−limit + tolerance` at any minute.
pub fn reached_limit(changes: &ChangeSeries, limit: f64, tolerance: f64) -> bool {
    (0..changes.len()).any(|t| matches!(changes.get(t), Some(v) if v <= -limit + tolerance))
}

/// Group labels in output order.
pub fn group_labels() -> [&'static str; 5] {
    DegreeGroup::ALL.map(DegreeGroup::label)
}

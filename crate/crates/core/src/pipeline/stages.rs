//! Stage computations. Each stage reads in-memory inputs and writes its
//! artifacts and report files into one directory.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::causality::{
    average_level, edge_pairs, rich_club_granger, run_pairs, save_outcomes, summarize_day, DayChanges, DaySummary,
    GrangerConfig, PairSampling, WEIGHT_BIN_LABELS,
};
use crate::error::{Error, Result};
use crate::herding::{
    adjacent_group_tests, entropy_loss_points, herding_matrices, top_group_investors, HerdingMetric,
};
use crate::ingest::{
    AggregatedHolding, CloseBook, EodRecord, MarketCap, MinuteBarSeries, SessionCalendar, StockLabel,
};
use crate::measure::Measure;
use crate::metrics::{
    composition_report, compute_stats, degree_cdf, degree_partition, degree_strength_scatter, group_feature_shares,
    rich_club_curve, CompositionReport, DegreeGroup, DegreeMode, DegreePartition, LabelAxis, RichClubPoint,
};
use crate::money::Cents;
use crate::network::{build_bipartite, filter_edges, filter_sweep, project, save_network, BipartiteGraph, StockNetwork};
use crate::timeseries::{
    group_mean_changes, hub_successor_scatter, minute_changes, random_experiment_edges, random_experiment_nodes,
    reached_limit, window_last, ChangeSeries, NullScatter, WindowPanel,
};

pub const TABLE1: &str = "table1_limit_down.csv";
pub const TABLE2: &str = "table2_network_stats.csv";
pub const TABLE3: &str = "table3_herding_ttests.csv";
pub const TABLE5: &str = "table5_hub_granger.csv";
pub const TABLE_A1: &str = "tableA1_group_shares.csv";
pub const TABLE_A2: &str = "tableA2_sector_composition.csv";
pub const TABLE_A3: &str = "tableA3_style_composition.csv";
pub const TABLE_A5: &str = "tableA5_top_institutions.csv";
pub const FIG3: &str = "fig3_herding_heatmap.csv";
pub const FIG4: &str = "fig4_group_means.csv";
pub const FIG5: &str = "fig5_hub_scatter.csv";
pub const FIG6: &str = "fig6_weight_bins.csv";
pub const FIG_A1: &str = "figA1_degree_cdf.csv";
pub const FIG_A2: &str = "figA2_degree_strength.csv";
pub const FIG_A3: &str = "figA3_entropy_loss.csv";
pub const FIG_A5: &str = "figA5_filter_sweep.csv";
pub const FIG_A6: &str = "figA6_rich_club.csv";

pub const HOLDINGS_FILE: &str = "holdings.csv";
pub const CLOSES_FILE: &str = "closes.csv";
pub const PRICES_FILE: &str = "minute_prices.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const CAPS_FILE: &str = "market_caps.csv";
pub const NETWORK_FILE: &str = "filtered.network";

/// Down-limit move and the tolerance for rounding of limit prices.
const DOWN_LIMIT: f64 = 0.10;
const LIMIT_TOLERANCE: f64 = 0.001;

fn num(v: f64) -> String {
    v.to_string()
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

fn measure(m: &Measure) -> String {
    opt_num(m.value())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes a CSV with optional `#` comment lines above the header.
pub(crate) fn write_csv(path: &Path, comments: &[String], header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut out = create(path)?;
    for c in comments {
        writeln!(out, "# {c}").map_err(|e| Error::io(path, e))?;
    }
    {
        let mut w = csv::WriterBuilder::new().from_writer(&mut out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn read_rows(path: &Path) -> Result<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Stage {
            stage: "read".into(),
            message: format!("{}: {e}", path.display()),
        })?;
    let header = rdr.headers()?.clone();
    let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((header, rows))
}

fn bad(path: &Path, what: &str) -> Error {
    Error::Format {
        line: 0,
        message: format!("{}: {what}", path.display()),
    }
}

/// Normalized inputs shared by every downstream stage.
#[derive(Clone, Debug, Default)]
pub struct IngestData {
    pub holdings: Vec<AggregatedHolding>,
    pub closes: Vec<EodRecord>,
    pub days: BTreeMap<NaiveDate, Vec<MinuteBarSeries>>,
    pub labels: Vec<StockLabel>,
    pub caps: Option<Vec<MarketCap>>,
}

impl IngestData {
    pub fn write(&self, dir: &Path, minutes: usize) -> Result<()> {
        crate::ingest::write_aggregated(&self.holdings, &dir.join(HOLDINGS_FILE))?;
        write_csv(
            &dir.join(CLOSES_FILE),
            &[],
            &["stock_id", "date", "close"],
            self.closes
                .iter()
                .map(|r| vec![r.stock_id.clone(), r.date.to_string(), num(r.close)])
                .collect(),
        )?;
        let mut header = vec!["date".to_string(), "stock_id".into(), "prev_close".into()];
        header.extend((0..minutes).map(|m| format!("m{m:03}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = self
            .days
            .values()
            .flatten()
            .map(|s| {
                let mut r = vec![s.trade_date.to_string(), s.stock_id.clone(), opt_num(s.prev_close)];
                r.extend(s.prices.iter().map(|p| opt_num(*p)));
                r
            })
            .collect();
        write_csv(&dir.join(PRICES_FILE), &[], &header, rows)?;
        write_csv(
            &dir.join(LABELS_FILE),
            &[],
            &["stock_id", "sector", "style"],
            self.labels
                .iter()
                .map(|l| vec![l.stock_id.clone(), l.sector.clone(), l.style.clone()])
                .collect(),
        )?;
        if let Some(caps) = &self.caps {
            write_csv(
                &dir.join(CAPS_FILE),
                &[],
                &["stock_id", "market_value"],
                caps.iter()
                    .map(|c| vec![c.stock_id.clone(), c.market_value.to_string()])
                    .collect(),
            )?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let holdings = crate::ingest::parse_aggregated(&dir.join(HOLDINGS_FILE))?;
        if holdings.rejected() > 0 {
            return Err(bad(&dir.join(HOLDINGS_FILE), "normalized holdings contain bad rows"));
        }
        let closes = crate::ingest::parse_end_of_day(&dir.join(CLOSES_FILE))?.records;
        let labels = crate::ingest::parse_labels(&dir.join(LABELS_FILE))?.records;
        let caps_path = dir.join(CAPS_FILE);
        let caps = if caps_path.exists() {
            Some(crate::ingest::parse_market_caps(&caps_path)?.records)
        } else {
            None
        };
        let path = dir.join(PRICES_FILE);
        let (header, rows) = read_rows(&path)?;
        let minutes = header.len().saturating_sub(3);
        let mut days: BTreeMap<NaiveDate, Vec<MinuteBarSeries>> = BTreeMap::new();
        for r in rows {
            let date: NaiveDate = r.get(0).and_then(|d| d.parse().ok()).ok_or_else(|| bad(&path, "bad date"))?;
            let parse = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(&path, "bad price"))
                }
            };
            let prices = (0..minutes)
                .map(|m| parse(r.get(3 + m).unwrap_or("")))
                .collect::<Result<Vec<_>>>()?;
            days.entry(date).or_default().push(MinuteBarSeries {
                stock_id: r.get(1).unwrap_or_default().to_string(),
                trade_date: date,
                prices,
                prev_close: parse(r.get(2).unwrap_or(""))?,
            });
        }
        Ok(IngestData {
            holdings: holdings.records,
            closes,
            days,
            labels,
            caps,
        })
    }

    pub fn close_book(&self) -> CloseBook {
        CloseBook::new(&self.closes)
    }

    pub fn cap_map(&self) -> Option<HashMap<String, Cents>> {
        self.caps
            .as_ref()
            .map(|c| c.iter().map(|m| (m.stock_id.clone(), m.market_value)).collect())
    }
}

/// Projects the holdings, writes the filtered network and the filter sweep.
pub fn network_stage(holdings: &[AggregatedHolding], k: f64, sweep_ks: &[f64], dir: &Path) -> Result<StockNetwork> {
    let b = build_bipartite(holdings)?;
    let full = project(&b);
    let sweep = filter_sweep(&full, sweep_ks)?;
    write_csv(
        &dir.join(FIG_A5),
        &[],
        &["k", "threshold_cents", "ws_ratio", "lwcc_size", "edge_count"],
        sweep
            .iter()
            .map(|p| {
                vec![
                    num(p.k),
                    p.threshold.0.to_string(),
                    num(p.ws_ratio),
                    p.lwcc_size.to_string(),
                    p.edge_count.to_string(),
                ]
            })
            .collect(),
    )?;
    let net = filter_edges(&full, k)?;
    save_network(&net, &dir.join(NETWORK_FILE))?;
    Ok(net)
}

fn group_header() -> Vec<&'static str> {
    DegreeGroup::ALL.iter().map(|g| g.label()).collect()
}

#[derive(Serialize)]
struct PartitionInfo<'a> {
    thresholds: [usize; 3],
    groups: Vec<&'a str>,
    sizes: [usize; 5],
}

fn composition_rows(rep: &CompositionReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for row in &rep.rows {
        for g in DegreeGroup::ALL {
            let i = g.index();
            rows.push(vec![
                row.category.clone(),
                g.label().to_string(),
                row.counts[i].to_string(),
                num(row.row_share[i]),
                num(row.column_share[i]),
            ]);
        }
        rows.push(vec![
            row.category.clone(),
            "total".into(),
            row.total.to_string(),
            "1".into(),
            num(if rep.sample_total > 0 { row.total as f64 / rep.sample_total as f64 } else { 0.0 }),
        ]);
    }
    for g in DegreeGroup::ALL {
        let i = g.index();
        rows.push(vec![
            "sample".into(),
            g.label().to_string(),
            rep.sample[i].to_string(),
            num(if rep.sample_total > 0 { rep.sample[i] as f64 / rep.sample_total as f64 } else { 0.0 }),
            "1".into(),
        ]);
    }
    rows
}

pub(crate) fn rich_club_rows(date: Option<NaiveDate>, points: &[RichClubPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| {
            vec![
                date.map_or_else(String::new, |d| d.to_string()),
                p.r.to_string(),
                p.e.to_string(),
                measure(&p.density_rr),
                p.granger_density.as_ref().map_or_else(String::new, measure),
            ]
        })
        .collect()
}

const RICH_HEADER: [&str; 5] = ["date", "r", "e", "density_rr", "granger_density"];

fn clamp_r(net: &StockNetwork, rs: &[usize]) -> Vec<usize> {
    rs.iter().copied().filter(|&r| r <= net.node_count()).collect()
}

/// Topology tables and plot data for one network.
pub fn metrics_stage(
    net: &StockNetwork,
    labels: &[StockLabel],
    caps: Option<&HashMap<String, Cents>>,
    rich_club_r: &[usize],
    dir: &Path,
) -> Result<DegreePartition> {
    let stats = compute_stats(net)?;
    let label = net.meta.build_date.map_or_else(|| "network".to_string(), |d| d.to_string());
    write_csv(
        &dir.join(TABLE2),
        &[],
        &[
            "network",
            "density",
            "node_count",
            "edge_count",
            "in_degree_assortativity",
            "out_degree_assortativity",
            "average_degree",
            "weight_mean",
            "weight_std",
            "weight_sum",
            "scc_count",
            "wcc_count",
            "largest_scc",
            "largest_wcc",
        ],
        vec![vec![
            label,
            num(stats.density),
            stats.node_count.to_string(),
            stats.edge_count.to_string(),
            measure(&stats.in_assort),
            measure(&stats.out_assort),
            num(stats.avg_degree),
            num(stats.weight_mean),
            num(stats.weight_std),
            num(stats.weight_sum),
            stats.n_scc.to_string(),
            stats.n_wcc.to_string(),
            stats.max_scc_size.to_string(),
            stats.max_wcc_size.to_string(),
        ]],
    )?;

    let partition = degree_partition(net)?;
    write_json(
        &dir.join("partition.json"),
        &PartitionInfo {
            thresholds: partition.thresholds,
            groups: group_header(),
            sizes: partition.group_sizes(),
        },
    )?;
    let shares = group_feature_shares(net, &partition, caps)?;
    let mut rows: Vec<Vec<String>> = shares
        .rows
        .iter()
        .map(|r| {
            vec![
                r.group.label().to_string(),
                num(r.out_degree),
                num(r.out_strength),
                opt_num(r.market_value),
                num(r.node_ratio),
            ]
        })
        .collect();
    let total = |f: &dyn Fn(&crate::metrics::GroupShareRow) -> f64| num(shares.rows.iter().map(f).sum());
    rows.push(vec![
        "total".into(),
        total(&|r| r.out_degree),
        total(&|r| r.out_strength),
        if caps.is_some() { total(&|r| r.market_value.unwrap_or(0.0)) } else { String::new() },
        total(&|r| r.node_ratio),
    ]);
    write_csv(
        &dir.join(TABLE_A1),
        &[],
        &["category", "out_degree", "out_strength", "market_value", "sample_ratio"],
        rows,
    )?;

    let comp_header = ["category", "group", "count", "row_share", "column_share"];
    for (axis, file) in [(LabelAxis::Sector, TABLE_A2), (LabelAxis::Style, TABLE_A3)] {
        let rep = composition_report(&partition, labels, axis);
        write_csv(&dir.join(file), &[], &comp_header, composition_rows(&rep))?;
    }

    write_csv(
        &dir.join(FIG_A1),
        &[],
        &["degree", "in_cdf", "out_cdf"],
        degree_cdf(net)
            .iter()
            .map(|p| vec![p.degree.to_string(), num(p.in_cdf), num(p.out_cdf)])
            .collect(),
    )?;
    let mut rows = Vec::new();
    for mode in [DegreeMode::Out, DegreeMode::In] {
        for r in degree_strength_scatter(net, mode) {
            rows.push(vec![
                mode.to_string(),
                r.node,
                r.degree.to_string(),
                num(r.strength),
                r.other_degree.to_string(),
            ]);
        }
    }
    write_csv(&dir.join(FIG_A2), &[], &["mode", "node", "degree", "strength", "other_degree"], rows)?;

    let points = rich_club_curve(net, &clamp_r(net, rich_club_r))?;
    write_csv(&dir.join(FIG_A6), &[], &RICH_HEADER, rich_club_rows(None, &points))?;
    Ok(partition)
}

fn metric_name(m: HerdingMetric) -> &'static str {
    match m {
        HerdingMetric::Count => "count_share",
        HerdingMetric::Value => "value_per_stock",
    }
}

/// Institution-by-group herding matrices, adjacent-group tests, top
/// institutions and the entropy/loss scatter for each crash date.
pub fn herding_stage(
    b: &BipartiteGraph,
    net: &StockNetwork,
    closes: &CloseBook,
    dates: &[NaiveDate],
    dir: &Path,
) -> Result<()> {
    let partition = degree_partition(net)?;
    let matrix = herding_matrices(b, &partition);
    let mut rows = Vec::new();
    for (rank, m) in matrix.display_order().into_iter().enumerate() {
        for metric in [HerdingMetric::Count, HerdingMetric::Value] {
            for g in DegreeGroup::ALL {
                rows.push(vec![
                    matrix.institutions[m].clone(),
                    (rank + 1).to_string(),
                    g.label().to_string(),
                    metric_name(metric).to_string(),
                    opt_num(matrix.cells(metric)[m][g.index()]),
                ]);
            }
        }
    }
    write_csv(
        &dir.join(FIG3),
        &[],
        &["institution", "display_rank", "group", "metric", "value"],
        rows,
    )?;

    let rows = adjacent_group_tests(&matrix)
        .into_iter()
        .map(|t| {
            vec![
                format!("H0: '{}' no less than '{}'", t.group_low.label(), t.group_high.label()),
                metric_name(t.metric).to_string(),
                opt_num(t.test.as_ref().map(|x| x.t_stat)),
                opt_num(t.test.as_ref().map(|x| x.p_value)),
                t.test.as_ref().map_or_else(String::new, |x| x.n_pairs.to_string()),
                t.note.unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &dir.join(TABLE3),
        &[],
        &["hypothesis", "metric", "t_stat", "p_value", "n_pairs", "note"],
        rows,
    )?;

    write_csv(
        &dir.join(TABLE_A5),
        &[],
        &["institution", "value_per_stock", "held_in_top", "share_of_top", "stocks_held"],
        top_group_investors(&matrix, 5)
            .into_iter()
            .map(|t| {
                vec![
                    t.institution,
                    num(t.value_per_stock),
                    t.held_in_top.to_string(),
                    num(t.share_of_top),
                    t.stocks_held.to_string(),
                ]
            })
            .collect(),
    )?;

    let mut rows = Vec::new();
    for &date in dates {
        let changes = crate::timeseries::daily_net_changes(closes, date);
        if changes.is_empty() {
            tracing::warn!(%date, "no closes for date; entropy/loss skipped");
            continue;
        }
        for p in entropy_loss_points(b, &changes)? {
            rows.push(vec![
                date.to_string(),
                p.institution,
                num(p.entropy),
                num(p.absolute_loss),
                p.excluded_stocks.to_string(),
            ]);
        }
    }
    write_csv(
        &dir.join(FIG_A3),
        &[],
        &["date", "institution", "entropy", "absolute_loss", "excluded_stocks"],
        rows,
    )
}

/// Change series for the usable stocks of one day.
pub fn day_changes(series: &[MinuteBarSeries]) -> (Vec<ChangeSeries>, usize) {
    let mut unusable = 0;
    let changes = series
        .iter()
        .filter_map(|s| match minute_changes(s) {
            Ok(c) => Some(c),
            Err(_) => {
                unusable += 1;
                None
            }
        })
        .collect();
    (changes, unusable)
}

#[derive(Clone, Debug)]
pub struct TimeseriesOptions {
    pub window_minutes: usize,
    pub top_n: usize,
    pub trials: usize,
    pub calendar: SessionCalendar,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NullSummary {
    pub trials: usize,
    pub seed: u64,
    pub mean_gap: Option<f64>,
    pub std_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeseriesDay {
    pub date: NaiveDate,
    pub active_stocks: usize,
    /// Mean of `successor_mean − hub_change` over observed scatter points.
    pub observed_mean_gap: Option<f64>,
    pub points_below_diagonal: usize,
    pub points: usize,
    pub random_edges: NullSummary,
    pub shuffled_nodes: NullSummary,
}

fn null_summary(n: &NullScatter) -> NullSummary {
    let overall = n.overall_diff();
    NullSummary {
        trials: n.trials,
        seed: n.seed,
        mean_gap: overall.map(|o| o.0),
        std_error: overall.map(|o| o.1).filter(|s| s.is_finite()),
    }
}

/// Group means, hub scatter with both null experiments, and limit counts.
/// `seed_for(date, experiment)` supplies each experiment's seed.
pub fn timeseries_stage(
    net: &StockNetwork,
    days: &BTreeMap<NaiveDate, Vec<MinuteBarSeries>>,
    dates: &[NaiveDate],
    opts: &TimeseriesOptions,
    seed_for: &dyn Fn(NaiveDate, &str) -> u64,
    dir: &Path,
) -> Result<Vec<TimeseriesDay>> {
    let partition = degree_partition(net)?;
    let (mut fig4, mut fig5, mut table1, mut summary) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let empty = Vec::new();
    for &date in dates {
        let series = days.get(&date).unwrap_or(&empty);
        if series.is_empty() {
            tracing::warn!(%date, "no minute bars for date");
            continue;
        }
        let (changes, unusable) = day_changes(series);
        let active = changes.iter().filter(|c| c.valid_count() > 0).count();
        let windowed = changes
            .iter()
            .map(|c| window_last(c, opts.window_minutes))
            .collect::<Result<Vec<_>>>()?;
        let reached = changes.iter().filter(|c| reached_limit(c, DOWN_LIMIT, LIMIT_TOLERANCE)).count();
        let at_close = windowed
            .iter()
            .filter(|w| matches!(w.values.last(), Some(Some(v)) if *v <= -DOWN_LIMIT + LIMIT_TOLERANCE))
            .count();
        table1.push(vec![
            date.to_string(),
            active.to_string(),
            reached.to_string(),
            at_close.to_string(),
            (changes.len() - active).to_string(),
            unusable.to_string(),
        ]);

        let means = group_mean_changes(&windowed, &partition)?;
        for (w, (m, c)) in means.means.iter().zip(&means.counts).enumerate() {
            let end = opts
                .calendar
                .time_of((w + 1) * opts.window_minutes - 1)
                .map(|t| (t + chrono::Duration::minutes(1)).format("%H:%M").to_string())
                .unwrap_or_default();
            for g in DegreeGroup::ALL {
                fig4.push(vec![
                    date.to_string(),
                    w.to_string(),
                    end.clone(),
                    g.label().to_string(),
                    opt_num(m[g.index()]),
                    c[g.index()].to_string(),
                ]);
            }
        }

        let panel = WindowPanel::new(net, &windowed)?;
        let observed = hub_successor_scatter(net, &panel, opts.top_n)?;
        let (mut gap_sum, mut points, mut below) = (0.0, 0usize, 0usize);
        for (rank, s) in observed.iter().enumerate() {
            for (w, p) in s.points.iter().enumerate() {
                if let Some(p) = p {
                    gap_sum += p.successor_mean - p.hub_change;
                    points += 1;
                    below += (p.successor_mean < p.hub_change) as usize;
                }
                fig5.push(vec![
                    date.to_string(),
                    "observed".into(),
                    rank.to_string(),
                    s.hub_id.clone(),
                    w.to_string(),
                    opt_num(p.map(|p| p.hub_change)),
                    opt_num(p.map(|p| p.successor_mean)),
                    String::new(),
                    String::new(),
                    p.map_or_else(String::new, |p| p.successors_used.to_string()),
                ]);
            }
        }
        let edges_null = random_experiment_edges(net, &panel, opts.top_n, opts.trials, seed_for(date, "random_edges"))?;
        let nodes_null = random_experiment_nodes(net, &panel, opts.top_n, opts.trials, seed_for(date, "shuffled_nodes"))?;
        for (name, null) in [("random_edges", &edges_null), ("shuffled_nodes", &nodes_null)] {
            for p in &null.points {
                fig5.push(vec![
                    date.to_string(),
                    name.to_string(),
                    p.rank.to_string(),
                    String::new(),
                    p.window.to_string(),
                    opt_num(p.hub_change),
                    opt_num(p.successor_mean),
                    opt_num(p.diff_se),
                    p.trials_used.to_string(),
                    String::new(),
                ]);
            }
        }
        summary.push(TimeseriesDay {
            date,
            active_stocks: active,
            observed_mean_gap: (points > 0).then(|| gap_sum / points as f64),
            points_below_diagonal: below,
            points,
            random_edges: null_summary(&edges_null),
            shuffled_nodes: null_summary(&nodes_null),
        });
    }
    write_csv(
        &dir.join(TABLE1),
        &[format!("down limit {DOWN_LIMIT}, tolerance {LIMIT_TOLERANCE}")],
        &["date", "active_stocks", "reached_down_limit", "at_down_limit_at_close", "no_trades", "no_prior_close"],
        table1,
    )?;
    write_csv(
        &dir.join(FIG4),
        &[],
        &["date", "window", "window_end", "group", "mean_change", "stocks"],
        fig4,
    )?;
    write_csv(
        &dir.join(FIG5),
        &[],
        &[
            "date",
            "experiment",
            "rank",
            "hub_id",
            "window",
            "hub_change",
            "successor_mean",
            "diff_se",
            "trials_used",
            "successors_used",
        ],
        fig5,
    )?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Clone, Copy, Debug)]
pub struct CausalityOptions {
    pub top_n: usize,
    pub sample_size: usize,
    pub full_enumeration: bool,
    pub workers: usize,
}

pub fn granger_comment(cfg: &GrangerConfig) -> String {
    format!(
        "granger: alpha={} max_lag={} lag_criterion={} d_max={} min_valid_points={} min_variance={} wald=chi-square",
        cfg.alpha, cfg.max_lag, cfg.lag_criterion, cfg.d_max, cfg.min_valid_points, cfg.min_variance
    )
}

/// Runs the edge tests and the average level for every date, and writes the
/// weight-bin, hub and rich-club reports plus per-day outcome dumps.
pub fn causality_stage(
    net: &StockNetwork,
    days: &BTreeMap<NaiveDate, Vec<MinuteBarSeries>>,
    dates: &[NaiveDate],
    cfg: &GrangerConfig,
    opts: &CausalityOptions,
    rich_club_r: &[usize],
    seed_for: &dyn Fn(NaiveDate) -> u64,
    dir: &Path,
) -> Result<Vec<DaySummary>> {
    let comment = vec![granger_comment(cfg)];
    let pairs = edge_pairs(net);
    let (mut fig6, mut rich, mut summaries) = (Vec::new(), Vec::new(), Vec::new());
    let empty = Vec::new();
    for &date in dates {
        let series = days.get(&date).unwrap_or(&empty);
        if series.is_empty() {
            tracing::warn!(%date, "no minute bars for date; causality skipped");
            continue;
        }
        let (changes, _) = day_changes(series);
        let day = DayChanges::new(date, changes)?;
        let run = run_pairs(&pairs, &day, cfg, opts.workers)?;
        save_outcomes(&run.outcomes, &dir.join(format!("outcomes_{date}.csv")))?;
        let sampling = if opts.full_enumeration {
            PairSampling::Full
        } else {
            PairSampling::Sample {
                size: opts.sample_size,
                seed: seed_for(date),
            }
        };
        let avg = average_level(net.nodes(), &day, cfg, sampling, opts.workers)?;
        let summary = summarize_day(&run, net, cfg, opts.top_n, date, Some(avg))?;
        write_json(&dir.join(format!("summary_{date}.json")), &summary)?;

        let bounds = [
            Cents(0),
            summary.weight_thresholds[0],
            summary.weight_thresholds[1],
            summary.weight_thresholds[2],
        ];
        for (i, cell) in summary.weight_bins.iter().enumerate() {
            fig6.push(vec![
                date.to_string(),
                WEIGHT_BIN_LABELS[i].to_string(),
                bounds[i].0.to_string(),
                if i < 3 { summary.weight_thresholds[i].0.to_string() } else { String::new() },
                cell.edges.to_string(),
                cell.tested.to_string(),
                cell.rejected.to_string(),
                opt_num(cell.ratio),
                String::new(),
            ]);
        }
        if let Some(a) = &summary.average_level {
            fig6.push(vec![
                date.to_string(),
                "average level".into(),
                String::new(),
                String::new(),
                a.pairs.to_string(),
                a.tested.to_string(),
                a.rejected.to_string(),
                opt_num(a.ratio),
                opt_num(a.std_error),
            ]);
        }
        rich.extend(rich_club_rows(
            Some(date),
            &rich_club_granger(&run.outcomes, net, &clamp_r(net, rich_club_r))?,
        ));
        summaries.push(summary);
    }
    write_csv(
        &dir.join(FIG6),
        &comment,
        &["date", "bin", "lower_cents", "upper_cents", "edges", "tested", "rejected", "ratio", "std_error"],
        fig6,
    )?;
    write_csv(&dir.join(FIG_A6), &comment, &RICH_HEADER, rich)?;

    let mut header = vec!["node".to_string()];
    header.extend(summaries.iter().map(|s| s.date.to_string()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = vec![{
        let mut r = vec!["average level".to_string()];
        r.extend(summaries.iter().map(|s| opt_num(s.average_level.as_ref().and_then(|a| a.ratio))));
        r
    }];
    if let Some(first) = summaries.first() {
        for (i, hub) in first.hubs.iter().enumerate() {
            let mut r = vec![hub.label.clone()];
            r.extend(summaries.iter().map(|s| opt_num(s.hubs.get(i).and_then(|h| h.ratio))));
            rows.push(r);
        }
    }
    write_csv(&dir.join(TABLE5), &comment, &header, rows)?;
    Ok(summaries)
}

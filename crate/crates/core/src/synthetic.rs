//! Seeded synthetic market: holdings with a few widely held hub stocks, and
//! crash-day minute prices where hubs lead their successors.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{EodRecord, HoldingRecord, MarketCap, MinuteBarSeries, SessionCalendar, StockLabel};
use crate::money::Cents;
use crate::network::{Edge, NetworkMeta, StockNetwork};
use crate::timeseries::ChangeSeries;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarketSpec {
    pub investors: usize,
    pub funds_per_investor: usize,
    pub stocks: usize,
    pub hubs: usize,
    /// Non-hub stocks per investor.
    pub holdings_per_investor: usize,
    pub snapshot: NaiveDate,
    pub dates: Vec<NaiveDate>,
    /// Per-minute drift of hub prices, as a fraction of the prior close.
    pub hub_drift: f64,
    /// Successor drift as a multiple of `hub_drift`.
    pub successor_drift_multiple: f64,
    pub factor_sigma: f64,
    pub hub_noise: f64,
    pub successor_noise: f64,
    /// Chance that a minute has no print.
    pub missing_rate: f64,
    pub seed: u64,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

impl Default for MarketSpec {
    fn default() -> Self {
        MarketSpec {
            investors: 20,
            funds_per_investor: 2,
            stocks: 300,
            hubs: 5,
            holdings_per_investor: 30,
            snapshot: ymd(2015, 6, 30),
            dates: vec![ymd(2015, 6, 26), ymd(2015, 6, 29), ymd(2015, 7, 2), ymd(2015, 7, 3)],
            hub_drift: -0.0001,
            successor_drift_multiple: 3.0,
            factor_sigma: 0.0008,
            hub_noise: 0.0002,
            successor_noise: 0.0006,
            missing_rate: 0.01,
            seed: 20150626,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Market {
    pub holdings: Vec<HoldingRecord>,
    pub closes: Vec<EodRecord>,
    pub bars: Vec<MinuteBarSeries>,
    pub labels: Vec<StockLabel>,
    pub caps: Vec<MarketCap>,
    pub hubs: Vec<String>,
    /// Stock locked at the down limit on every day.
    pub locked: String,
    /// Stock suspended on the first day.
    pub suspended: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarketFiles {
    pub holdings: PathBuf,
    pub minute_bars: PathBuf,
    pub end_of_day: PathBuf,
    pub labels: PathBuf,
    pub market_caps: PathBuf,
}

const SECTORS: [&str; 5] = ["financials", "industrials", "materials", "consumer", "technology"];
const STYLES: [&str; 6] = [
    "large-cap-value",
    "large-cap-growth",
    "mid-cap-balance",
    "mid-cap-growth",
    "small-cap-value",
    "small-cap-growth",
];

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

pub fn generate(spec: &MarketSpec) -> Result<Market> {
    if spec.hubs + 2 > spec.stocks || spec.holdings_per_investor + spec.hubs > spec.stocks {
        return Err(Error::InvalidArgument("too few stocks for the requested hubs and holdings".into()));
    }
    if spec.investors == 0 || spec.funds_per_investor == 0 || spec.dates.is_empty() {
        return Err(Error::InvalidArgument("market needs investors, funds and dates".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let ids: Vec<String> = (0..spec.stocks).map(|i| format!("S{:04}", i + 1)).collect();
    let mut order: Vec<usize> = (0..spec.stocks).collect();
    order.shuffle(&mut rng);
    let hub_idx: Vec<usize> = order[..spec.hubs].to_vec();
    let (locked_idx, suspended_idx) = (order[spec.hubs], order[spec.hubs + 1]);
    let is_hub = |i: usize| hub_idx.contains(&i);
    let others: Vec<usize> = (0..spec.stocks).filter(|&i| !is_hub(i)).collect();

    let mut holdings = Vec::new();
    for inv in 0..spec.investors {
        let manager = format!("M{:03}", inv + 1);
        let mut held: Vec<(usize, u64)> = hub_idx
            .iter()
            .map(|&h| (h, rng.random_range(5_000_000..10_000_000u64) * 100))
            .collect();
        for k in index::sample(&mut rng, others.len(), spec.holdings_per_investor) {
            held.push((others[k], rng.random_range(10_000..100_000u64) * 100));
        }
        for (stock, cents) in held {
            let fund = rng.random_range(0..spec.funds_per_investor);
            // split across two funds sometimes, so aggregation has work to do
            let part = if spec.funds_per_investor > 1 && rng.random_bool(0.3) { cents / 3 } else { 0 };
            let mut push = |f: usize, c: u64| {
                holdings.push(HoldingRecord {
                    fund_id: format!("{manager}-F{}", f + 1),
                    manager_id: manager.clone(),
                    stock_id: ids[stock].clone(),
                    market_value: Cents(c),
                    as_of_date: spec.snapshot,
                })
            };
            push(fund, cents - part);
            if part > 0 {
                push((fund + 1) % spec.funds_per_investor, part);
            }
        }
    }
    holdings.sort();

    let minutes = SessionCalendar::default().minutes();
    let base: Vec<f64> = (0..spec.stocks).map(|_| round4(rng.random_range(5.0..60.0))).collect();
    let mut prev = base.clone();
    let first_day = spec.dates.iter().min().copied().expect("non-empty dates");
    let mut closes: Vec<EodRecord> = (0..spec.stocks)
        .map(|i| EodRecord {
            stock_id: ids[i].clone(),
            date: first_day.pred_opt().expect("date in range"),
            close: base[i],
        })
        .collect();
    let mut dates = spec.dates.clone();
    dates.sort();
    let mut bars = Vec::new();
    let normal = |s: f64| Normal::new(0.0, s).map_err(|e| Error::InvalidArgument(e.to_string()));
    let (nf, nh, ns) = (normal(spec.factor_sigma)?, normal(spec.hub_noise)?, normal(spec.successor_noise)?);
    for (day_no, &date) in dates.iter().enumerate() {
        let factor: Vec<f64> = (0..minutes).map(|_| nf.sample(&mut rng)).collect();
        let mut hub_inc = vec![0.0; minutes];
        let mut changes = vec![vec![0.0; minutes]; spec.stocks];
        for &h in &hub_idx {
            let mut level = 0.0;
            for t in 0..minutes {
                let inc = spec.hub_drift + factor[t] + nh.sample(&mut rng);
                hub_inc[t] += inc / spec.hubs as f64;
                level += inc;
                changes[h][t] = level;
            }
        }
        let extra = spec.hub_drift * (spec.successor_drift_multiple - 1.0);
        for &s in &others {
            let mut level = 0.0;
            for t in 0..minutes {
                let lead = if t == 0 { spec.hub_drift } else { hub_inc[t - 1] };
                level += lead + extra + ns.sample(&mut rng);
                changes[s][t] = level;
            }
        }
        for i in 0..spec.stocks {
            let suspended = i == suspended_idx && day_no == 0;
            let prices: Vec<Option<f64>> = (0..minutes)
                .map(|t| {
                    if suspended || (t > 0 && rng.random_bool(spec.missing_rate)) {
                        return None;
                    }
                    let change = if i == locked_idx { -0.10 } else { changes[i][t].max(-0.10) };
                    Some(round4(prev[i] * (1.0 + change)))
                })
                .collect();
            let close = prices.iter().rev().find_map(|p| *p).unwrap_or(prev[i]);
            bars.push(MinuteBarSeries {
                stock_id: ids[i].clone(),
                trade_date: date,
                prices,
                prev_close: Some(prev[i]),
            });
            closes.push(EodRecord {
                stock_id: ids[i].clone(),
                date,
                close,
            });
            prev[i] = close;
        }
    }

    let labels = (0..spec.stocks)
        .map(|i| StockLabel {
            stock_id: ids[i].clone(),
            sector: SECTORS[rng.random_range(0..SECTORS.len())].to_string(),
            style: STYLES[rng.random_range(0..STYLES.len())].to_string(),
        })
        .collect();
    let caps = (0..spec.stocks)
        .map(|i| MarketCap {
            stock_id: ids[i].clone(),
            market_value: Cents(rng.random_range(1_000_000..50_000_000u64) * 100),
        })
        .collect();
    let mut hubs: Vec<String> = hub_idx.iter().map(|&h| ids[h].clone()).collect();
    hubs.sort();
    Ok(Market {
        holdings,
        closes,
        bars,
        labels,
        caps,
        hubs,
        locked: ids[locked_idx].clone(),
        suspended: ids[suspended_idx].clone(),
    })
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(Error::from)
}

impl Market {
    /// Writes the input files in the formats the ingest layer reads.
    pub fn write(&self, dir: &Path) -> Result<MarketFiles> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = MarketFiles {
            holdings: dir.join("holdings.csv"),
            minute_bars: dir.join("minute_bars.csv"),
            end_of_day: dir.join("end_of_day.csv"),
            labels: dir.join("labels.csv"),
            market_caps: dir.join("market_caps.csv"),
        };
        crate::ingest::write_holdings(&self.holdings, &files.holdings)?;

        let calendar = SessionCalendar::default();
        let mut w = writer(&files.minute_bars)?;
        w.write_record(["stock_id", "date", "time", "last_price"])?;
        for s in &self.bars {
            let date = s.trade_date.to_string();
            for (time, price) in s.ticks(&calendar) {
                w.write_record([&s.stock_id, &date, &time.format("%H:%M").to_string(), &price.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(&files.minute_bars, e))?;

        let mut w = writer(&files.end_of_day)?;
        w.write_record(["stock_id", "date", "close"])?;
        for r in &self.closes {
            w.write_record([&r.stock_id, &r.date.to_string(), &r.close.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&files.end_of_day, e))?;

        let mut w = writer(&files.labels)?;
        w.write_record(["stock_id", "sector", "style"])?;
        for l in &self.labels {
            w.write_record([&l.stock_id, &l.sector, &l.style])?;
        }
        w.flush().map_err(|e| Error::io(&files.labels, e))?;

        let mut w = writer(&files.market_caps)?;
        w.write_record(["stock_id", "market_value"])?;
        for c in &self.caps {
            w.write_record([&c.stock_id, &c.market_value.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&files.market_caps, e))?;
        Ok(files)
    }
}

/// Uniform random simple digraph on `n` nodes with `m` edges and weights
/// drawn uniformly from 1..=`max_cents`.
pub fn random_network(n: usize, m: usize, max_cents: u64, seed: u64) -> Result<StockNetwork> {
    if n < 2 || m > n * (n - 1) || max_cents == 0 {
        return Err(Error::InvalidArgument(format!("cannot place {m} edges on {n} nodes")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let nodes: Vec<String> = (0..n).map(|i| format!("N{i:05}")).collect();
    let edges = index::sample(&mut rng, n * (n - 1), m)
        .into_iter()
        .map(|idx| {
            let (s, r) = (idx / (n - 1), idx % (n - 1));
            let t = if r >= s { r + 1 } else { r };
            Edge {
                source: s as u32,
                target: t as u32,
                weight: Cents(rng.random_range(1..=max_cents)),
            }
        })
        .collect();
    StockNetwork::new(nodes, edges, NetworkMeta::default())
}

/// Independent random-walk change series, one per id.
pub fn random_walk_day(ids: &[String], date: NaiveDate, minutes: usize, sigma: f64, seed: u64) -> Result<Vec<ChangeSeries>> {
    let dist = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut level = 0.0;
            let v: Vec<f64> = (0..minutes)
                .map(|_| {
                    level += dist.sample(&mut rng);
                    level
                })
                .collect();
            ChangeSeries::from_values(id.clone(), date, &v)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{aggregate_by_manager, parse_holdings, parse_minute_bars, parse_end_of_day, CloseBook, HoldingsSchema};

    fn small() -> MarketSpec {
        MarketSpec {
            investors: 4,
            stocks: 30,
            hubs: 2,
            holdings_per_investor: 5,
            dates: vec![ymd(2015, 6, 26), ymd(2015, 6, 29)],
            ..MarketSpec::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.holdings, b.holdings);
        assert_eq!(a.bars, b.bars);
        let c = generate(&MarketSpec { seed: 1, ..small() }).unwrap();
        assert_ne!(a.bars, c.bars);
    }

    #[test]
    fn hubs_are_held_by_everyone() {
        let m = generate(&small()).unwrap();
        let agg = aggregate_by_manager(&m.holdings);
        for hub in &m.hubs {
            assert_eq!(agg.iter().filter(|h| &h.stock_id == hub).count(), 4);
        }
    }

    #[test]
    fn files_round_trip_through_ingest() {
        let m = generate(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = m.write(dir.path()).unwrap();
        let h = parse_holdings(&files.holdings, &HoldingsSchema::default()).unwrap();
        assert_eq!(h.rejected(), 0);
        assert_eq!(h.records.len(), m.holdings.len());
        let eod = parse_end_of_day(&files.end_of_day).unwrap();
        let book = CloseBook::new(&eod.records);
        let bars = parse_minute_bars(&files.minute_bars, &book, &SessionCalendar::default()).unwrap();
        assert_eq!(bars.series.len(), m.bars.len());
        let mut expected = m.bars.clone();
        expected.sort_by(|a, b| (a.trade_date, &a.stock_id).cmp(&(b.trade_date, &b.stock_id)));
        assert_eq!(bars.series, expected);
    }

    #[test]
    fn random_network_has_requested_size() {
        let net = random_network(50, 300, 1000, 4).unwrap();
        assert_eq!((net.node_count(), net.edge_count()), (50, 300));
        assert!(random_network(3, 7, 10, 0).is_err());
    }
}

//! Parsing and normalization of holdings, price and label files.
//!
//! Every reader accepts comma-separated UTF-8 text with a header row. Rows that
//! fail validation are not fatal: they are returned as [`Rejection`]s carrying the
//! file line number, so a caller can persist them as a JSON-lines log.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Cents;

/// A row that was read but not accepted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line number in the source file (the header is line 1).
    pub row: u64,
    pub reason: String,
}

/// Accepted records plus the rows that were turned away.
#[derive(Clone, Debug, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejections: Vec<Rejection>,
}

impl<T> Parsed<T> {
    pub fn accepted(&self) -> usize {
        self.records.len()
    }

    pub fn rejected(&self) -> usize {
        self.rejections.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HoldingRecord {
    pub fund_id: String,
    /// Fund-management company.
    pub manager_id: String,
    pub stock_id: String,
    pub market_value: Cents,
    pub as_of_date: NaiveDate,
}

/// Holdings of one management company in one stock, summed over its funds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AggregatedHolding {
    pub manager_id: String,
    pub stock_id: String,
    pub market_value: Cents,
    pub as_of_date: NaiveDate,
}

/// Column names for the holdings file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HoldingsSchema {
    pub fund_id: String,
    pub manager_id: String,
    pub stock_id: String,
    pub market_value: String,
    pub as_of_date: String,
}

impl Default for HoldingsSchema {
    fn default() -> Self {
        HoldingsSchema {
            fund_id: "fund_id".into(),
            manager_id: "manager_id".into(),
            stock_id: "stock_id".into(),
            market_value: "market_value".into(),
            as_of_date: "as_of_date".into(),
        }
    }
}

const DATE_FORMAT: &str = "%Y-%m-%d";

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_reader<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(rdr)
}

/// Resolves required column names to indices in the header row.
fn column_indices<R: Read>(
    rdr: &mut csv::Reader<R>,
    origin: &Path,
    names: &[&str],
) -> Result<Vec<usize>> {
    let headers = rdr.headers()?.clone();
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim_start_matches('\u{feff}') == *name)
                .ok_or_else(|| Error::MissingColumn {
                    path: origin.to_path_buf(),
                    column: (*name).to_string(),
                })
        })
        .collect()
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn field<'r>(record: &'r csv::StringRecord, idx: usize, name: &str) -> std::result::Result<&'r str, String> {
    match record.get(idx) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("missing {name}")),
    }
}

fn parse_date(raw: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(raw, DATE_FORMAT).map_err(|_| format!("unparsable date '{raw}'"))
}

fn parse_price(raw: &str) -> std::result::Result<f64, String> {
    let v: f64 = raw.parse().map_err(|_| format!("unparsable price '{raw}'"))?;
    if !v.is_finite() || v <= 0.0 {
        return Err("non-positive price".into());
    }
    Ok(v)
}

/// Reads a holdings file. Zero-valued rows and repeated (fund, stock, date)
/// keys are rejected here, so the returned records are already normalized.
pub fn parse_holdings(path: &Path, schema: &HoldingsSchema) -> Result<Parsed<HoldingRecord>> {
    parse_holdings_from(open(path)?, path, schema)
}

pub fn parse_holdings_from<R: Read>(
    rdr: R,
    origin: &Path,
    schema: &HoldingsSchema,
) -> Result<Parsed<HoldingRecord>> {
    let mut rdr = csv_reader(rdr);
    let cols = column_indices(
        &mut rdr,
        origin,
        &[
            &schema.fund_id,
            &schema.manager_id,
            &schema.stock_id,
            &schema.market_value,
            &schema.as_of_date,
        ],
    )?;
    let mut out = Parsed {
        records: Vec::new(),
        rejections: Vec::new(),
    };
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let parsed = (|| -> std::result::Result<HoldingRecord, String> {
            let market_value = field(&row, cols[3], "market_value")?
                .parse::<Cents>()
                .map_err(|e| e.to_string())?;
            if market_value.is_zero() {
                return Err("zero value".into());
            }
            Ok(HoldingRecord {
                fund_id: field(&row, cols[0], "fund_id")?.to_string(),
                manager_id: field(&row, cols[1], "manager_id")?.to_string(),
                stock_id: field(&row, cols[2], "stock_id")?.to_string(),
                market_value,
                as_of_date: parse_date(field(&row, cols[4], "as_of_date")?)?,
            })
        })();
        match parsed {
            Ok(rec) => {
                let key = (rec.fund_id.clone(), rec.stock_id.clone(), rec.as_of_date);
                if seen.insert(key) {
                    out.records.push(rec);
                } else {
                    out.rejections.push(Rejection {
                        row: line,
                        reason: "duplicate record".into(),
                    });
                }
            }
            Err(reason) => out.rejections.push(Rejection { row: line, reason }),
        }
    }
    for r in &out.rejections {
        tracing::debug!(file = %origin.display(), row = r.row, reason = %r.reason, "holding row rejected");
    }
    Ok(out)
}

/// Writes holdings in the default schema; [`parse_holdings`] reads them back unchanged.
pub fn write_holdings(records: &[HoldingRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["fund_id", "manager_id", "stock_id", "market_value", "as_of_date"])?;
    for r in records {
        w.write_record([
            r.fund_id.as_str(),
            &r.manager_id,
            &r.stock_id,
            &r.market_value.to_string(),
            &r.as_of_date.format(DATE_FORMAT).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sums fund holdings per (manager, stock, date). Output is sorted by
/// (date, manager, stock), so the result does not depend on input order.
pub fn aggregate_by_manager(records: &[HoldingRecord]) -> Vec<AggregatedHolding> {
    let mut acc: BTreeMap<(NaiveDate, &str, &str), Cents> = BTreeMap::new();
    for r in records {
        *acc.entry((r.as_of_date, &r.manager_id, &r.stock_id))
            .or_default() += r.market_value;
    }
    acc.into_iter()
        .filter(|(_, v)| !v.is_zero())
        .map(|((as_of_date, m, s), market_value)| AggregatedHolding {
            manager_id: m.to_string(),
            stock_id: s.to_string(),
            market_value,
            as_of_date,
        })
        .collect()
}

pub fn write_aggregated(holdings: &[AggregatedHolding], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["manager_id", "stock_id", "market_value", "as_of_date"])?;
    for h in holdings {
        w.write_record([
            h.manager_id.as_str(),
            &h.stock_id,
            &h.market_value.to_string(),
            &h.as_of_date.format(DATE_FORMAT).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a file produced by [`write_aggregated`].
pub fn parse_aggregated(path: &Path) -> Result<Parsed<AggregatedHolding>> {
    let mut rdr = csv_reader(open(path)?);
    let cols = column_indices(&mut rdr, path, &["manager_id", "stock_id", "market_value", "as_of_date"])?;
    let mut out = Parsed {
        records: Vec::new(),
        rejections: Vec::new(),
    };
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let parsed = (|| -> std::result::Result<AggregatedHolding, String> {
            let market_value = field(&row, cols[2], "market_value")?
                .parse::<Cents>()
                .map_err(|e| e.to_string())?;
            if market_value.is_zero() {
                return Err("zero value".into());
            }
            Ok(AggregatedHolding {
                manager_id: field(&row, cols[0], "manager_id")?.to_string(),
                stock_id: field(&row, cols[1], "stock_id")?.to_string(),
                market_value,
                as_of_date: parse_date(field(&row, cols[3], "as_of_date")?)?,
            })
        })();
        match parsed {
            Ok(h) => out.records.push(h),
            Err(reason) => out.rejections.push(Rejection { row: line, reason }),
        }
    }
    Ok(out)
}

/// Writes rejections as JSON lines (`{"row":..,"reason":..}`).
pub fn write_rejections(rejections: &[Rejection], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in rejections {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Trading sessions of one day. Minute slots are labelled by their start time,
/// so a session `09:30-11:30` owns the minutes 09:30 through 11:29.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCalendar {
    pub sessions: Vec<(NaiveTime, NaiveTime)>,
}

impl Default for SessionCalendar {
    fn default() -> Self {
        let t = |h, m| NaiveTime::from_hms_opt(h, m, 0).expect("valid time");
        SessionCalendar {
            sessions: vec![(t(9, 30), t(11, 30)), (t(13, 0), t(15, 0))],
        }
    }
}

impl SessionCalendar {
    /// Parses `"09:30-11:30,13:00-15:00"`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut sessions = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (a, b) = part
                .split_once('-')
                .ok_or_else(|| Error::InvalidArgument(format!("session '{part}' is not HH:MM-HH:MM")))?;
            let parse = |s: &str| {
                NaiveTime::parse_from_str(s.trim(), "%H:%M")
                    .map_err(|_| Error::InvalidArgument(format!("bad session time '{s}'")))
            };
            sessions.push((parse(a)?, parse(b)?));
        }
        let cal = SessionCalendar { sessions };
        cal.validate()?;
        Ok(cal)
    }

    fn validate(&self) -> Result<()> {
        if self.sessions.is_empty() {
            return Err(Error::InvalidArgument("calendar has no sessions".into()));
        }
        for w in self.sessions.windows(2) {
            if w[0].1 > w[1].0 {
                return Err(Error::InvalidArgument("sessions overlap or are unordered".into()));
            }
        }
        if self.sessions.iter().any(|(o, c)| o >= c) {
            return Err(Error::InvalidArgument("session closes before it opens".into()));
        }
        Ok(())
    }

    pub fn minutes(&self) -> usize {
        self.sessions
            .iter()
            .map(|(o, c)| ((*c - *o).num_minutes()) as usize)
            .sum()
    }

    /// Minute slot for a wall-clock time, or `None` outside trading hours.
    pub fn slot_of(&self, t: NaiveTime) -> Option<usize> {
        let t = t.with_second(0)?.with_nanosecond(0)?;
        let mut offset = 0usize;
        for (open, close) in &self.sessions {
            if t >= *open && t < *close {
                return Some(offset + (t - *open).num_minutes() as usize);
            }
            offset += (*close - *open).num_minutes() as usize;
        }
        None
    }

    pub fn time_of(&self, slot: usize) -> Option<NaiveTime> {
        let mut offset = 0usize;
        for (open, close) in &self.sessions {
            let len = (*close - *open).num_minutes() as usize;
            if slot < offset + len {
                return Some(*open + chrono::Duration::minutes((slot - offset) as i64));
            }
            offset += len;
        }
        None
    }
}

/// One stock's last price per session minute on one day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinuteBarSeries {
    pub stock_id: String,
    pub trade_date: NaiveDate,
    /// Indexed by session minute; `None` where no tick was recorded.
    pub prices: Vec<Option<f64>>,
    /// Close of the prior trading day.
    pub prev_close: Option<f64>,
}

impl MinuteBarSeries {
    pub fn missing_minutes(&self) -> usize {
        self.prices.iter().filter(|p| p.is_none()).count()
    }

    /// A series without a prior close cannot produce percentage changes.
    pub fn is_usable(&self) -> bool {
        self.prev_close.is_some()
    }

    /// True when the stock never traded in the session.
    pub fn is_suspended(&self) -> bool {
        self.prices.iter().all(Option::is_none)
    }

    /// `(timestamp, price)` pairs for the minutes that have a price.
    pub fn ticks<'a>(&'a self, calendar: &'a SessionCalendar) -> impl Iterator<Item = (NaiveTime, f64)> + 'a {
        self.prices
            .iter()
            .enumerate()
            .filter_map(move |(slot, p)| Some((calendar.time_of(slot)?, (*p)?)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EodRecord {
    pub stock_id: String,
    pub date: NaiveDate,
    pub close: f64,
}

pub fn parse_end_of_day(path: &Path) -> Result<Parsed<EodRecord>> {
    parse_end_of_day_from(open(path)?, path)
}

pub fn parse_end_of_day_from<R: Read>(rdr: R, origin: &Path) -> Result<Parsed<EodRecord>> {
    let mut rdr = csv_reader(rdr);
    let cols = column_indices(&mut rdr, origin, &["stock_id", "date", "close"])?;
    let mut out = Parsed {
        records: Vec::new(),
        rejections: Vec::new(),
    };
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let parsed = (|| -> std::result::Result<EodRecord, String> {
            Ok(EodRecord {
                stock_id: field(&row, cols[0], "stock_id")?.to_string(),
                date: parse_date(field(&row, cols[1], "date")?)?,
                close: parse_price(field(&row, cols[2], "close")?)?,
            })
        })();
        match parsed {
            Ok(r) => out.records.push(r),
            Err(reason) => out.rejections.push(Rejection { row: line, reason }),
        }
    }
    Ok(out)
}

/// Closing prices by stock and date, for prior-close lookups.
#[derive(Clone, Debug, Default)]
pub struct CloseBook {
    closes: HashMap<String, BTreeMap<NaiveDate, f64>>,
}

impl CloseBook {
    pub fn new(records: &[EodRecord]) -> Self {
        let mut closes: HashMap<String, BTreeMap<NaiveDate, f64>> = HashMap::new();
        for r in records {
            closes.entry(r.stock_id.clone()).or_default().insert(r.date, r.close);
        }
        CloseBook { closes }
    }

    pub fn close_on(&self, stock: &str, date: NaiveDate) -> Option<f64> {
        self.closes.get(stock)?.get(&date).copied()
    }

    /// Latest close strictly before `date`. A stock suspended on the prior day
    /// keeps its last close, as on the exchange boards.
    pub fn prev_close(&self, stock: &str, date: NaiveDate) -> Option<f64> {
        self.closes.get(stock)?.range(..date).next_back().map(|(_, c)| *c)
    }

    pub fn stocks(&self) -> impl Iterator<Item = &str> {
        self.closes.keys().map(String::as_str)
    }
}

/// Result of reading a minute-bar file.
#[derive(Clone, Debug, PartialEq)]
pub struct MinuteBars {
    pub series: Vec<MinuteBarSeries>,
    pub rejections: Vec<Rejection>,
    /// Ticks dropped because they fall outside the session calendar.
    pub out_of_session: usize,
}

/// Reads the minute-bar file and attaches the prior close from `closes`.
///
/// Stocks with a known prior close but no ticks on a date present in the file
/// are emitted as fully-missing (suspended) series. Output is sorted by
/// (date, stock).
pub fn parse_minute_bars(path: &Path, closes: &CloseBook, calendar: &SessionCalendar) -> Result<MinuteBars> {
    parse_minute_bars_from(open(path)?, path, closes, calendar)
}

pub fn parse_minute_bars_from<R: Read>(
    rdr: R,
    origin: &Path,
    closes: &CloseBook,
    calendar: &SessionCalendar,
) -> Result<MinuteBars> {
    let mut rdr = csv_reader(rdr);
    let cols = column_indices(&mut rdr, origin, &["stock_id", "date", "time", "last_price"])?;
    let minutes = calendar.minutes();
    let mut by_key: BTreeMap<(NaiveDate, String), Vec<Option<f64>>> = BTreeMap::new();
    let mut rejections = Vec::new();
    let mut out_of_session = 0usize;
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let parsed = (|| -> std::result::Result<(String, NaiveDate, NaiveTime, f64), String> {
            let time_raw = field(&row, cols[2], "time")?;
            let time = NaiveTime::parse_from_str(time_raw, "%H:%M")
                .or_else(|_| NaiveTime::parse_from_str(time_raw, "%H:%M:%S"))
                .map_err(|_| format!("unparsable time '{time_raw}'"))?;
            Ok((
                field(&row, cols[0], "stock_id")?.to_string(),
                parse_date(field(&row, cols[1], "date")?)?,
                time,
                parse_price(field(&row, cols[3], "last_price")?)?,
            ))
        })();
        match parsed {
            Ok((stock, date, time, price)) => match calendar.slot_of(time) {
                Some(slot) => {
                    let prices = by_key.entry((date, stock)).or_insert_with(|| vec![None; minutes]);
                    // rows are in file order, so a later row for the same minute is the later print
                    prices[slot] = Some(price);
                }
                None => out_of_session += 1,
            },
            Err(reason) => rejections.push(Rejection { row: line, reason }),
        }
    }

    let dates: BTreeSet<NaiveDate> = by_key.keys().map(|(d, _)| *d).collect();
    for date in &dates {
        for stock in closes.stocks() {
            if closes.prev_close(stock, *date).is_some() {
                by_key
                    .entry((*date, stock.to_string()))
                    .or_insert_with(|| vec![None; minutes]);
            }
        }
    }

    let series = by_key
        .into_iter()
        .map(|((trade_date, stock_id), prices)| {
            let prev_close = closes.prev_close(&stock_id, trade_date);
            if prev_close.is_none() {
                tracing::warn!(stock = %stock_id, date = %trade_date, "no prior close; series unusable");
            }
            MinuteBarSeries {
                stock_id,
                trade_date,
                prices,
                prev_close,
            }
        })
        .collect();
    Ok(MinuteBars {
        series,
        rejections,
        out_of_session,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StockLabel {
    pub stock_id: String,
    pub sector: String,
    /// Cap size crossed with value/balance/growth, e.g. `large-cap-value`.
    pub style: String,
}

pub fn parse_labels(path: &Path) -> Result<Parsed<StockLabel>> {
    parse_labels_from(open(path)?, path)
}

pub fn parse_labels_from<R: Read>(rdr: R, origin: &Path) -> Result<Parsed<StockLabel>> {
    let mut rdr = csv_reader(rdr);
    let cols = column_indices(&mut rdr, origin, &["stock_id", "sector", "style"])?;
    let mut out = Parsed {
        records: Vec::new(),
        rejections: Vec::new(),
    };
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let parsed = (|| -> std::result::Result<StockLabel, String> {
            Ok(StockLabel {
                stock_id: field(&row, cols[0], "stock_id")?.to_string(),
                sector: field(&row, cols[1], "sector")?.to_string(),
                style: field(&row, cols[2], "style")?.to_string(),
            })
        })();
        match parsed {
            Ok(l) if !seen.insert(l.stock_id.clone()) => out.rejections.push(Rejection {
                row: line,
                reason: "duplicate stock_id".into(),
            }),
            Ok(l) => out.records.push(l),
            Err(reason) => out.rejections.push(Rejection { row: line, reason }),
        }
    }
    Ok(out)
}

/// Stock market capitalization, used for the value column of group share reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketCap {
    pub stock_id: String,
    pub market_value: Cents,
}

/// Reads `stock_id,market_value` rows.
pub fn parse_market_caps(path: &Path) -> Result<Parsed<MarketCap>> {
    let mut rdr = csv_reader(open(path)?);
    let cols = column_indices(&mut rdr, path, &["stock_id", "market_value"])?;
    let mut out = Parsed {
        records: Vec::new(),
        rejections: Vec::new(),
    };
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let parsed = (|| -> std::result::Result<MarketCap, String> {
            Ok(MarketCap {
                stock_id: field(&row, cols[0], "stock_id")?.to_string(),
                market_value: field(&row, cols[1], "market_value")?
                    .parse::<Cents>()
                    .map_err(|e| e.to_string())?,
            })
        })();
        match parsed {
            Ok(m) => out.records.push(m),
            Err(reason) => out.rejections.push(Rejection { row: line, reason }),
        }
    }
    Ok(out)
}

//! Pairwise lag-augmented Granger tests over one-minute change series and the
//! aggregate rejection ratios built on top of them.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, submatrix, Cholesky};
use crate::measure::Measure;
use crate::metrics::{rich_club_curve, RichClubPoint};
use crate::money::Cents;
use crate::network::StockNetwork;
use crate::quantile::nearest_rank_value;
use crate::special::chi_square_sf;
use crate::timeseries::ChangeSeries;

const PIVOT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LagCriterion {
    Aic,
    Bic,
}

impl std::str::FromStr for LagCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AIC" => Ok(LagCriterion::Aic),
            "BIC" => Ok(LagCriterion::Bic),
            _ => Err(Error::InvalidArgument(format!("unknown lag criterion {s:?}"))),
        }
    }
}

impl fmt::Display for LagCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LagCriterion::Aic => "AIC",
            LagCriterion::Bic => "BIC",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrangerConfig {
    pub alpha: f64,
    pub max_lag: usize,
    pub lag_criterion: LagCriterion,
    /// Extra lags added to both variables and left unrestricted in the Wald test.
    pub d_max: usize,
    pub min_valid_points: usize,
    pub min_variance: f64,
}

impl Default for GrangerConfig {
    fn default() -> Self {
        GrangerConfig {
            alpha: 0.05,
            max_lag: 10,
            lag_criterion: LagCriterion::Bic,
            d_max: 1,
            min_valid_points: 60,
            min_variance: 1e-12,
        }
    }
}

impl GrangerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.max_lag == 0 {
            return Err(Error::Config("max_lag must be at least 1".into()));
        }
        if self.d_max > 2 {
            return Err(Error::Config(format!("d_max must be 0, 1 or 2, got {}", self.d_max)));
        }
        if !(self.min_variance >= 0.0) {
            return Err(Error::Config("min_variance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    InsufficientData,
    DegenerateSeries,
    SingularFit,
    /// No series for one of the stocks on that day.
    MissingSeries,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::InsufficientData => "insufficient data",
            SkipReason::DegenerateSeries => "degenerate series",
            SkipReason::SingularFit => "singular fit",
            SkipReason::MissingSeries => "missing series",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum OutcomeStatus {
    Tested,
    Skipped(SkipReason),
}

impl fmt::Display for OutcomeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeStatus::Tested => f.write_str("tested"),
            OutcomeStatus::Skipped(r) => write!(f, "skipped({})", r.as_str()),
        }
    }
}

/// Verdict for the null "source does not Granger-cause target".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrangerOutcome {
    pub source: String,
    pub target: String,
    pub date: NaiveDate,
    pub status: OutcomeStatus,
    pub p_value: Option<f64>,
    pub wald_stat: Option<f64>,
    pub lag_m: Option<usize>,
    pub reject: Option<bool>,
}

impl GrangerOutcome {
    fn skipped(source: &str, target: &str, date: NaiveDate, reason: SkipReason) -> Self {
        GrangerOutcome {
            source: source.to_string(),
            target: target.to_string(),
            date,
            status: OutcomeStatus::Skipped(reason),
            p_value: None,
            wald_stat: None,
            lag_m: None,
            reject: None,
        }
    }

    pub fn is_tested(&self) -> bool {
        self.status == OutcomeStatus::Tested
    }

    pub fn rejected(&self) -> bool {
        self.reject == Some(true)
    }
}

struct WaldResult {
    lag: usize,
    wald: f64,
    p: f64,
}

/// Tests whether `x` Granger-causes `y`.
pub fn ty_granger(x: &ChangeSeries, y: &ChangeSeries, cfg: &GrangerConfig) -> GrangerOutcome {
    let date = x.trade_date;
    match granger_core(x, y, cfg) {
        Ok(r) => GrangerOutcome {
            source: x.stock_id.clone(),
            target: y.stock_id.clone(),
            date,
            status: OutcomeStatus::Tested,
            p_value: Some(r.p),
            wald_stat: Some(r.wald),
            lag_m: Some(r.lag),
            reject: Some(r.p < cfg.alpha),
        },
        Err(reason) => GrangerOutcome::skipped(&x.stock_id, &y.stock_id, date, reason),
    }
}

fn granger_core(x: &ChangeSeries, y: &ChangeSeries, cfg: &GrangerConfig) -> std::result::Result<WaldResult, SkipReason> {
    if x.len() != y.len() || x.trade_date != y.trade_date {
        return Err(SkipReason::InsufficientData);
    }
    let joint: Vec<bool> = x.valid.iter().zip(&y.valid).map(|(a, b)| *a && *b).collect();
    let n_joint = joint.iter().filter(|v| **v).count();
    if n_joint < cfg.min_valid_points.max(2) {
        return Err(SkipReason::InsufficientData);
    }
    let (mx, vx) = masked_moments(&x.values, &joint);
    let (my, vy) = masked_moments(&y.values, &joint);
    if vx < cfg.min_variance || vy < cfg.min_variance || vx == 0.0 || vy == 0.0 {
        return Err(SkipReason::DegenerateSeries);
    }
    let (sx, sy) = (vx.sqrt(), vy.sqrt());
    let xs: Vec<f64> = x.values.iter().map(|v| (v - mx) / sx).collect();
    let ys: Vec<f64> = y.values.iter().map(|v| (v - my) / sy).collect();

    let big_l = cfg.max_lag + cfg.d_max;
    let rows = usable_rows(&joint, big_l);
    let t = rows.len();
    if t < 2 * big_l + 3 {
        return Err(SkipReason::InsufficientData);
    }

    // Columns: 1, y lags 1..L, x lags 1..L, y_t, x_t.
    let p = 2 * big_l + 3;
    let (col_y, col_x) = (2 * big_l + 1, 2 * big_l + 2);
    let zz = cross_products(&xs, &ys, &rows, big_l);

    let lag_columns = |q: usize| -> Vec<usize> {
        let mut idx = Vec::with_capacity(1 + 2 * q);
        idx.push(0);
        idx.extend(1..=q);
        idx.extend(big_l + 1..=big_l + q);
        idx
    };
    let column = |idx: &[usize], c: usize| -> Vec<f64> { idx.iter().map(|&i| zz[i * p + c]).collect() };

    let tf = t as f64;
    let mut best: Option<(f64, usize)> = None;
    for lag in 1..=cfg.max_lag {
        let idx = lag_columns(lag);
        let Some(chol) = Cholesky::factor(&submatrix(&zz, p, &idx), idx.len(), PIVOT_TOL) else {
            continue;
        };
        let (xy, xx) = (column(&idx, col_y), column(&idx, col_x));
        let (b1, b2) = (chol.solve(&xy), chol.solve(&xx));
        let s11 = zz[col_y * p + col_y] - dot(&b1, &xy);
        let s22 = zz[col_x * p + col_x] - dot(&b2, &xx);
        let s12 = zz[col_y * p + col_x] - dot(&b1, &xx);
        let det = (s11 * s22 - s12 * s12) / (tf * tf);
        if !(det > 0.0) {
            continue;
        }
        let params = (lag * 4) as f64;
        let penalty = match cfg.lag_criterion {
            LagCriterion::Aic => 2.0 * params / tf,
            LagCriterion::Bic => tf.ln() * params / tf,
        };
        let crit = det.ln() + penalty;
        if best.is_none_or(|(b, _)| crit < b) {
            best = Some((crit, lag));
        }
    }
    let Some((_, m)) = best else {
        return Err(SkipReason::SingularFit);
    };

    let q = m + cfg.d_max;
    let idx = lag_columns(q);
    let k = idx.len();
    let chol = Cholesky::factor(&submatrix(&zz, p, &idx), k, PIVOT_TOL).ok_or(SkipReason::SingularFit)?;
    let xy = column(&idx, col_y);
    let b = chol.solve(&xy);
    let ssr = zz[col_y * p + col_y] - dot(&b, &xy);
    let sigma2 = ssr / (t - k) as f64;
    if !(sigma2 > 0.0) {
        return Err(SkipReason::SingularFit);
    }
    // First m lags of x sit right after the intercept and the q lags of y.
    let restricted: Vec<usize> = (1 + q..1 + q + m).collect();
    let v = Cholesky::factor(&chol.inverse_block(&restricted), m, 0.0).ok_or(SkipReason::SingularFit)?;
    let b_r: Vec<f64> = restricted.iter().map(|&i| b[i]).collect();
    let wald = dot(&b_r, &v.solve(&b_r)) / sigma2;
    if !wald.is_finite() {
        return Err(SkipReason::SingularFit);
    }
    Ok(WaldResult {
        lag: m,
        wald,
        p: chi_square_sf(wald, m as f64).clamp(0.0, 1.0),
    })
}

fn masked_moments(v: &[f64], mask: &[bool]) -> (f64, f64) {
    let (sum, n) = v
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .fold((0.0, 0usize), |(s, n), (x, _)| (s + x, n + 1));
    let mean = sum / n as f64;
    let var = v
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(x, _)| (x - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    (mean, var)
}

/// Times `t` whose window `[t − lags, t]` is jointly valid.
fn usable_rows(joint: &[bool], lags: usize) -> Vec<usize> {
    let mut run = 0usize;
    let mut rows = Vec::new();
    for (t, ok) in joint.iter().enumerate() {
        run = if *ok { run + 1 } else { 0 };
        if run > lags {
            rows.push(t);
        }
    }
    rows
}

fn cross_products(xs: &[f64], ys: &[f64], rows: &[usize], lags: usize) -> Vec<f64> {
    let p = 2 * lags + 3;
    let mut zz = vec![0.0; p * p];
    let mut z = vec![0.0; p];
    for &t in rows {
        z[0] = 1.0;
        for l in 1..=lags {
            z[l] = ys[t - l];
            z[lags + l] = xs[t - l];
        }
        z[p - 2] = ys[t];
        z[p - 1] = xs[t];
        for i in 0..p {
            let zi = z[i];
            let row = &mut zz[i * p..i * p + p];
            for j in i..p {
                row[j] += zi * z[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            zz[i * p + j] = zz[j * p + i];
        }
    }
    zz
}

/// Change series of every stock on one trading day.
#[derive(Clone, Debug)]
pub struct DayChanges {
    date: NaiveDate,
    series: Vec<ChangeSeries>,
    index: HashMap<String, usize>,
}

impl DayChanges {
    pub fn new(date: NaiveDate, series: Vec<ChangeSeries>) -> Result<Self> {
        let mut index = HashMap::with_capacity(series.len());
        for (i, s) in series.iter().enumerate() {
            if s.trade_date != date {
                return Err(Error::InvalidArgument(format!(
                    "series for {} is dated {}, expected {date}",
                    s.stock_id, s.trade_date
                )));
            }
            if s.len() != series[0].len() {
                return Err(Error::InvalidArgument("series lengths differ".into()));
            }
            if index.insert(s.stock_id.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate series for {}", s.stock_id)));
            }
        }
        Ok(DayChanges { date, series, index })
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn get(&self, id: &str) -> Option<&ChangeSeries> {
        self.index.get(id).map(|&i| &self.series[i])
    }

    pub fn series(&self) -> &[ChangeSeries] {
        &self.series
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRun {
    pub outcomes: Vec<GrangerOutcome>,
    pub tested: usize,
    pub skipped: usize,
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Tests every distinct ordered pair, in input order of first occurrence.
/// `workers = 0` uses the global thread pool.
pub fn run_pairs(pairs: &[(String, String)], day: &DayChanges, cfg: &GrangerConfig, workers: usize) -> Result<PairRun> {
    cfg.validate()?;
    let mut seen = HashSet::with_capacity(pairs.len());
    let unique: Vec<&(String, String)> = pairs.iter().filter(|p| seen.insert((&p.0, &p.1))).collect();
    let outcomes: Vec<GrangerOutcome> = with_workers(workers, || {
        unique
            .par_iter()
            .map(|(s, t)| match (day.get(s), day.get(t)) {
                (Some(x), Some(y)) => ty_granger(x, y, cfg),
                _ => GrangerOutcome::skipped(s, t, day.date, SkipReason::MissingSeries),
            })
            .collect()
    })?;
    let tested = outcomes.iter().filter(|o| o.is_tested()).count();
    Ok(PairRun {
        skipped: outcomes.len() - tested,
        tested,
        outcomes,
    })
}

/// Ordered (source, target) pairs for every edge of a network.
pub fn edge_pairs(net: &StockNetwork) -> Vec<(String, String)> {
    net.edges()
        .iter()
        .map(|e| (net.nodes()[e.source as usize].clone(), net.nodes()[e.target as usize].clone()))
        .collect()
}

/// Edge bins cut at the 40th, 70th and 90th nearest-rank weight percentiles.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightPartition {
    pub thresholds: [Cents; 3],
    /// Bin of each edge, aligned with `StockNetwork::edges`.
    pub bins: Vec<usize>,
}

pub const WEIGHT_BIN_LABELS: [&str; 4] = ["0<w<=W0.4", "W0.4<w<=W0.7", "W0.7<w<=W0.9", "W0.9<w"];

pub fn weight_partition(net: &StockNetwork) -> Result<WeightPartition> {
    let mut w: Vec<Cents> = net.edges().iter().map(|e| e.weight).collect();
    w.sort_unstable();
    let q = |k| nearest_rank_value(&w, k).ok_or(Error::EmptyInput("network has no edges"));
    let thresholds = [q(0.4)?, q(0.7)?, q(0.9)?];
    let bins = net
        .edges()
        .iter()
        .map(|e| thresholds.iter().take_while(|&&th| e.weight > th).count())
        .collect();
    Ok(WeightPartition { thresholds, bins })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioCell {
    pub label: String,
    pub edges: usize,
    pub tested: usize,
    pub rejected: usize,
    /// `rejected / tested`; missing when nothing was tested.
    pub ratio: Option<f64>,
}

impl RatioCell {
    fn new(label: String) -> Self {
        RatioCell {
            label,
            edges: 0,
            tested: 0,
            rejected: 0,
            ratio: None,
        }
    }

    fn add(&mut self, outcome: Option<&GrangerOutcome>) {
        self.edges += 1;
        if let Some(o) = outcome.filter(|o| o.is_tested()) {
            self.tested += 1;
            self.rejected += o.rejected() as usize;
        }
    }

    fn finish(mut self) -> Self {
        self.ratio = (self.tested > 0).then(|| self.rejected as f64 / self.tested as f64);
        self
    }
}

fn outcome_index(outcomes: &[GrangerOutcome]) -> HashMap<(&str, &str), &GrangerOutcome> {
    outcomes
        .iter()
        .map(|o| ((o.source.as_str(), o.target.as_str()), o))
        .collect()
}

fn edge_outcome<'a>(
    idx: &HashMap<(&str, &str), &'a GrangerOutcome>,
    net: &StockNetwork,
    source: usize,
    target: usize,
) -> Option<&'a GrangerOutcome> {
    idx.get(&(net.nodes()[source].as_str(), net.nodes()[target].as_str())).copied()
}

/// Share of tested edges in each weight bin whose source Granger-causes its target.
pub fn ratio_by_weight_bin(outcomes: &[GrangerOutcome], net: &StockNetwork, partition: &WeightPartition) -> Vec<RatioCell> {
    let idx = outcome_index(outcomes);
    let mut cells: Vec<RatioCell> = WEIGHT_BIN_LABELS.iter().map(|l| RatioCell::new(l.to_string())).collect();
    for (e, &bin) in net.edges().iter().zip(&partition.bins) {
        cells[bin].add(edge_outcome(&idx, net, e.source as usize, e.target as usize));
    }
    cells.into_iter().map(RatioCell::finish).collect()
}

/// Per top-out-degree hub, share of its tested successors it Granger-causes.
pub fn ratio_for_hubs(outcomes: &[GrangerOutcome], net: &StockNetwork, top_n: usize) -> Vec<RatioCell> {
    let idx = outcome_index(outcomes);
    net.top_by_out_degree(top_n)
        .into_iter()
        .map(|hub| {
            let mut cell = RatioCell::new(net.nodes()[hub].clone());
            for e in net.out_edges(hub) {
                cell.add(edge_outcome(&idx, net, hub, e.target as usize));
            }
            cell.finish()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PairSampling {
    Sample { size: usize, seed: u64 },
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AverageLevel {
    pub sampling: PairSampling,
    pub stocks: usize,
    pub pairs: usize,
    pub tested: usize,
    pub rejected: usize,
    pub ratio: Option<f64>,
    /// Binomial standard error `sqrt(p(1 − p) / tested)`.
    pub std_error: Option<f64>,
}

/// Rejection ratio over ordered pairs of distinct stocks drawn from `stocks`.
/// A sample at least as large as the pair population enumerates every pair.
pub fn average_level(
    stocks: &[String],
    day: &DayChanges,
    cfg: &GrangerConfig,
    sampling: PairSampling,
    workers: usize,
) -> Result<AverageLevel> {
    let n = stocks.len();
    let total = n * n.saturating_sub(1);
    let chosen: Vec<usize> = match sampling {
        PairSampling::Sample { size, .. } if size < 1000 => {
            return Err(Error::InvalidArgument(format!("sample size {size} is below 1000")));
        }
        PairSampling::Sample { size, seed } if size < total => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut v = index::sample(&mut rng, total, size).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..total).collect(),
    };
    let pairs: Vec<(String, String)> = chosen
        .into_iter()
        .map(|idx| {
            let (i, r) = (idx / (n - 1), idx % (n - 1));
            let j = if r >= i { r + 1 } else { r };
            (stocks[i].clone(), stocks[j].clone())
        })
        .collect();
    let run = run_pairs(&pairs, day, cfg, workers)?;
    let rejected = run.outcomes.iter().filter(|o| o.rejected()).count();
    let ratio = (run.tested > 0).then(|| rejected as f64 / run.tested as f64);
    Ok(AverageLevel {
        sampling,
        stocks: n,
        pairs: run.outcomes.len(),
        tested: run.tested,
        rejected,
        ratio,
        std_error: ratio.map(|p| (p * (1.0 - p) / run.tested as f64).sqrt()),
    })
}

/// Rich-club curve with the density of Granger-significant edges among the top-`r` nodes.
pub fn rich_club_granger(outcomes: &[GrangerOutcome], net: &StockNetwork, r_values: &[usize]) -> Result<Vec<RichClubPoint>> {
    let idx = outcome_index(outcomes);
    let order = net.top_by_out_degree(net.node_count());
    let mut rank = vec![usize::MAX; net.node_count()];
    for (pos, &v) in order.iter().enumerate() {
        rank[v] = pos;
    }
    let mut points = rich_club_curve(net, r_values)?;
    for pt in &mut points {
        let passing = net
            .edges()
            .iter()
            .filter(|e| rank[e.source as usize] < pt.r && rank[e.target as usize] < pt.r)
            .filter(|e| edge_outcome(&idx, net, e.source as usize, e.target as usize).is_some_and(|o| o.rejected()))
            .count();
        let possible = pt.r as f64 * (pt.r as f64 - 1.0);
        pt.granger_density = Some(if pt.r < 2 {
            Measure::undefined("r < 2")
        } else {
            Measure::ratio(passing as f64, possible, "r(r-1) is zero")
        });
    }
    Ok(points)
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn write_outcomes_csv<W: Write>(outcomes: &[GrangerOutcome], mut out: W) -> std::io::Result<()> {
    writeln!(out, "source,target,date,status,lag,wald,p,reject")?;
    for o in outcomes {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            o.source,
            o.target,
            o.date,
            o.status,
            opt(o.lag_m),
            opt(o.wald_stat),
            opt(o.p_value),
            opt(o.reject)
        )?;
    }
    Ok(())
}

pub fn save_outcomes(outcomes: &[GrangerOutcome], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_outcomes_csv(outcomes, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// One day's causality results in report layout.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DaySummary {
    pub date: NaiveDate,
    pub config: GrangerConfig,
    pub edges: usize,
    pub tested: usize,
    pub skipped: usize,
    pub skip_reasons: Vec<(String, usize)>,
    pub weight_thresholds: [Cents; 3],
    pub weight_bins: Vec<RatioCell>,
    pub hubs: Vec<RatioCell>,
    pub average_level: Option<AverageLevel>,
}

pub fn summarize_day(
    run: &PairRun,
    net: &StockNetwork,
    cfg: &GrangerConfig,
    top_n: usize,
    date: NaiveDate,
    average: Option<AverageLevel>,
) -> Result<DaySummary> {
    let partition = weight_partition(net)?;
    let mut reasons: Vec<(String, usize)> = Vec::new();
    for o in &run.outcomes {
        if let OutcomeStatus::Skipped(r) = o.status {
            match reasons.iter_mut().find(|(k, _)| k == r.as_str()) {
                Some((_, n)) => *n += 1,
                None => reasons.push((r.as_str().to_string(), 1)),
            }
        }
    }
    reasons.sort();
    Ok(DaySummary {
        date,
        config: cfg.clone(),
        edges: net.edge_count(),
        tested: run.tested,
        skipped: run.skipped,
        skip_reasons: reasons,
        weight_thresholds: partition.thresholds,
        weight_bins: ratio_by_weight_bin(&run.outcomes, net, &partition),
        hubs: ratio_for_hubs(&run.outcomes, net, top_n),
        average_level: average,
    })
}

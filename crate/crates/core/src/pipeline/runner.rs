//! Sequential stage execution with checksum-validated caching.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{RunConfig, Stage};
use super::stages::*;
use crate::error::{Error, Result};
use crate::ingest::{
    aggregate_by_manager, parse_end_of_day, parse_holdings, parse_labels, parse_market_caps, parse_minute_bars,
    write_rejections, CloseBook, HoldingsSchema, Rejection,
};
use crate::network::{build_bipartite, load_network, StockNetwork};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.txt";
pub const STAGES_DIR: &str = "stages";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Completed,
    Cached,
    NotRequested,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    pub key: Option<String>,
    pub seed: Option<u64>,
    /// Artifact path relative to the stage directory, mapped to its SHA-256.
    pub artifacts: BTreeMap<String, String>,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn record(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|r| r.stage == stage)
    }

    pub fn status(&self, stage: Stage) -> StageStatus {
        self.record(stage).map_or(StageStatus::NotRequested, |r| r.status)
    }
}

/// Seed for a named consumer: the first eight bytes of
/// SHA-256(`"{seed}:{part}:{part}..."`), read little-endian.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_string());
    for p in parts {
        h.update(":");
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

pub fn stage_dir(output_dir: &Path, stage: Stage) -> PathBuf {
    output_dir.join(STAGES_DIR).join(stage.name())
}

fn partial_dir(output_dir: &Path, stage: Stage) -> PathBuf {
    output_dir.join(STAGES_DIR).join(format!("{}.partial", stage.name()))
}

fn hash_dir(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() {
            out.insert(entry.file_name().to_string_lossy().into_owned(), file_sha256(&path)?);
        }
    }
    Ok(out)
}

fn artifacts_intact(dir: &Path, artifacts: &BTreeMap<String, String>) -> bool {
    !artifacts.is_empty()
        && artifacts
            .iter()
            .all(|(name, sum)| file_sha256(&dir.join(name)).is_ok_and(|s| &s == sum))
}

fn stage_key(cfg: &RunConfig, stage: Stage, upstream: &[&StageRecord]) -> Result<String> {
    let canonical = cfg.canonical();
    let mut h = Sha256::new();
    h.update(format!("stage={stage}\nversion={VERSION}\n"));
    for k in RunConfig::stage_keys(stage) {
        h.update(format!("{k}={}\n", canonical.get(k).map_or("", String::as_str)));
    }
    if stage == Stage::Ingest {
        let mut inputs = vec![&cfg.holdings, &cfg.minute_bars, &cfg.end_of_day, &cfg.labels];
        inputs.extend(cfg.market_caps.as_ref());
        for p in inputs {
            h.update(format!("input={}\n", file_sha256(p)?));
        }
    }
    for r in upstream {
        for (name, sum) in &r.artifacts {
            h.update(format!("{}/{name}={sum}\n", r.stage));
        }
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Serialize)]
struct IngestSummary {
    snapshot_date: NaiveDate,
    holdings_rows: usize,
    holdings_rejected: usize,
    holdings_other_dates: usize,
    aggregated_holdings: usize,
    eod_rows: usize,
    eod_rejected: usize,
    minute_series: BTreeMap<NaiveDate, usize>,
    minute_rejected: usize,
    minute_out_of_session: usize,
    labels: usize,
    labels_rejected: usize,
    market_caps: Option<usize>,
}

fn log_rejections(dir: &Path, name: &str, rejections: &[Rejection]) -> Result<()> {
    write_rejections(rejections, &dir.join(format!("rejected_{name}.jsonl")))
}

/// Parses and normalizes every input file into `dir`.
pub fn ingest_stage(cfg: &RunConfig, dir: &Path) -> Result<IngestData> {
    let holdings = parse_holdings(&cfg.holdings, &HoldingsSchema::default())?;
    log_rejections(dir, "holdings", &holdings.rejections)?;
    let on_snapshot: Vec<_> = holdings
        .records
        .iter()
        .filter(|r| r.as_of_date == cfg.snapshot_date)
        .cloned()
        .collect();
    if on_snapshot.is_empty() {
        return Err(Error::Degenerate(format!("no holdings dated {}", cfg.snapshot_date)));
    }
    let aggregated = aggregate_by_manager(&on_snapshot);

    let eod = parse_end_of_day(&cfg.end_of_day)?;
    log_rejections(dir, "end_of_day", &eod.rejections)?;
    let book = CloseBook::new(&eod.records);
    let bars = parse_minute_bars(&cfg.minute_bars, &book, &cfg.sessions)?;
    log_rejections(dir, "minute_bars", &bars.rejections)?;
    let mut days: BTreeMap<NaiveDate, Vec<_>> = BTreeMap::new();
    for s in bars.series {
        if cfg.crash_dates.contains(&s.trade_date) {
            days.entry(s.trade_date).or_default().push(s);
        }
    }
    for d in &cfg.crash_dates {
        if !days.contains_key(d) {
            tracing::warn!(date = %d, "no minute bars on crash date");
        }
    }

    let labels = parse_labels(&cfg.labels)?;
    log_rejections(dir, "labels", &labels.rejections)?;
    let caps = match &cfg.market_caps {
        Some(p) => {
            let c = parse_market_caps(p)?;
            log_rejections(dir, "market_caps", &c.rejections)?;
            Some(c.records)
        }
        None => None,
    };

    let data = IngestData {
        holdings: aggregated,
        closes: eod.records,
        days,
        labels: labels.records,
        caps,
    };
    data.write(dir, cfg.sessions.minutes())?;
    write_json(
        &dir.join("summary.json"),
        &IngestSummary {
            snapshot_date: cfg.snapshot_date,
            holdings_rows: holdings.records.len(),
            holdings_rejected: holdings.rejections.len(),
            holdings_other_dates: holdings.records.len() - on_snapshot.len(),
            aggregated_holdings: data.holdings.len(),
            eod_rows: data.closes.len(),
            eod_rejected: eod.rejections.len(),
            minute_series: data.days.iter().map(|(d, s)| (*d, s.len())).collect(),
            minute_rejected: bars.rejections.len(),
            minute_out_of_session: bars.out_of_session,
            labels: data.labels.len(),
            labels_rejected: labels.rejections.len(),
            market_caps: data.caps.as_ref().map(Vec::len),
        },
    )?;
    Ok(data)
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    previous: Option<RunManifest>,
    records: Vec<StageRecord>,
    ingest: Option<IngestData>,
    network: Option<StockNetwork>,
}

impl Runner<'_> {
    fn upstream(&self, stage: Stage) -> Vec<&StageRecord> {
        stage
            .dependencies()
            .iter()
            .filter_map(|d| self.records.iter().find(|r| r.stage == *d))
            .collect()
    }

    fn cached(&self, stage: Stage, key: &str) -> Option<BTreeMap<String, String>> {
        let prev = self.previous.as_ref()?.record(stage)?;
        let ok = matches!(prev.status, StageStatus::Completed | StageStatus::Cached)
            && prev.key.as_deref() == Some(key)
            && artifacts_intact(&stage_dir(&self.cfg.output_dir, stage), &prev.artifacts);
        ok.then(|| prev.artifacts.clone())
    }

    fn ingest(&mut self) -> Result<&IngestData> {
        if self.ingest.is_none() {
            self.ingest = Some(IngestData::read(&stage_dir(&self.cfg.output_dir, Stage::Ingest))?);
        }
        Ok(self.ingest.as_ref().expect("just loaded"))
    }

    fn network(&mut self) -> Result<&StockNetwork> {
        if self.network.is_none() {
            self.network = Some(load_network(
                &stage_dir(&self.cfg.output_dir, Stage::Network).join(NETWORK_FILE),
            )?);
        }
        Ok(self.network.as_ref().expect("just loaded"))
    }

    fn compute(&mut self, stage: Stage, seed: u64, dir: &Path) -> Result<()> {
        let cfg = self.cfg;
        match stage {
            Stage::Ingest => {
                self.ingest = Some(ingest_stage(cfg, dir)?);
            }
            Stage::Network => {
                let holdings = self.ingest()?.holdings.clone();
                self.network = Some(network_stage(&holdings, cfg.filter_k, &cfg.sweep_ks, dir)?);
            }
            Stage::Metrics => {
                let (labels, caps) = {
                    let d = self.ingest()?;
                    (d.labels.clone(), d.cap_map())
                };
                metrics_stage(self.network()?, &labels, caps.as_ref(), &cfg.rich_club_r, dir)?;
            }
            Stage::Herding => {
                let (b, book) = {
                    let d = self.ingest()?;
                    (build_bipartite(&d.holdings)?, d.close_book())
                };
                herding_stage(&b, self.network()?, &book, &cfg.crash_dates, dir)?;
            }
            Stage::Timeseries => {
                let days = self.ingest()?.days.clone();
                let opts = TimeseriesOptions {
                    window_minutes: cfg.window_minutes,
                    top_n: cfg.top_n,
                    trials: cfg.trials,
                    calendar: cfg.sessions.clone(),
                };
                let seed_for = |d: NaiveDate, exp: &str| derive_seed(seed, &[&d.to_string(), exp]);
                timeseries_stage(self.network()?, &days, &cfg.crash_dates, &opts, &seed_for, dir)?;
            }
            Stage::Causality => {
                let days = self.ingest()?.days.clone();
                let opts = CausalityOptions {
                    top_n: cfg.top_n,
                    sample_size: cfg.average_level_sample,
                    full_enumeration: cfg.average_level_full,
                    workers: 0,
                };
                let seed_for = |d: NaiveDate| derive_seed(seed, &[&d.to_string(), "average_level"]);
                causality_stage(
                    self.network()?,
                    &days,
                    &cfg.crash_dates,
                    &cfg.granger,
                    &opts,
                    &cfg.rich_club_r,
                    &seed_for,
                    dir,
                )?;
            }
        }
        Ok(())
    }

    fn manifest(&self) -> RunManifest {
        RunManifest {
            tool_version: VERSION.to_string(),
            config_hash: sha256_hex(self.cfg.render().as_bytes()),
            seed: self.cfg.seed,
            stages: self.records.clone(),
        }
    }

    fn run_stage(&mut self, stage: Stage) -> Result<()> {
        let out = &self.cfg.output_dir;
        let seed = derive_seed(self.cfg.seed, &[stage.name()]);
        let start = Instant::now();
        let key = stage_key(self.cfg, stage, &self.upstream(stage))?;
        if let Some(artifacts) = self.cached(stage, &key) {
            tracing::info!(%stage, "cached");
            self.records.push(StageRecord {
                stage,
                status: StageStatus::Cached,
                key: Some(key),
                seed: Some(seed),
                artifacts,
                seconds: start.elapsed().as_secs_f64(),
                error: None,
            });
            return Ok(());
        }
        tracing::info!(%stage, "running");
        let partial = partial_dir(out, stage);
        if partial.exists() {
            fs::remove_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;
        }
        fs::create_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;
        let result = self.compute(stage, seed, &partial).and_then(|()| {
            let done = stage_dir(out, stage);
            if done.exists() {
                fs::remove_dir_all(&done).map_err(|e| Error::io(&done, e))?;
            }
            fs::rename(&partial, &done).map_err(|e| Error::io(&done, e))?;
            hash_dir(&done)
        });
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok(artifacts) => {
                self.records.push(StageRecord {
                    stage,
                    status: StageStatus::Completed,
                    key: Some(key),
                    seed: Some(seed),
                    artifacts,
                    seconds,
                    error: None,
                });
                Ok(())
            }
            Err(e) => {
                self.records.push(StageRecord {
                    stage,
                    status: StageStatus::Failed,
                    key: Some(key),
                    seed: Some(seed),
                    artifacts: BTreeMap::new(),
                    seconds,
                    error: Some(e.to_string()),
                });
                Err(Error::Stage {
                    stage: stage.name().to_string(),
                    message: e.to_string(),
                })
            }
        }
    }
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<()> {
    write_json(&out.join(MANIFEST_FILE), manifest)
}

/// Runs the requested stages in order and writes the manifest last. A failed
/// stage stops the run; its outputs stay in `<stage>.partial` and the
/// manifest records the failure.
pub fn run(cfg: &RunConfig) -> Result<RunManifest> {
    let out = &cfg.output_dir;
    fs::create_dir_all(out.join(STAGES_DIR)).map_err(|e| Error::io(out, e))?;
    let previous = RunManifest::load(&out.join(MANIFEST_FILE)).ok();
    fs::write(out.join(CONFIG_FILE), cfg.render()).map_err(|e| Error::io(out, e))?;
    let mut runner = Runner {
        cfg,
        previous,
        records: Vec::new(),
        ingest: None,
        network: None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let result = pool.install(|| {
        for stage in Stage::ALL {
            if cfg.stages.contains(&stage) {
                runner.run_stage(stage)?;
            } else {
                runner.records.push(StageRecord {
                    stage,
                    status: StageStatus::NotRequested,
                    key: None,
                    seed: None,
                    artifacts: BTreeMap::new(),
                    seconds: 0.0,
                    error: None,
                });
            }
        }
        Ok(())
    });
    let manifest = runner.manifest();
    write_manifest(out, &manifest)?;
    result.map(|()| manifest)
}

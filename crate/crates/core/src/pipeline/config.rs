//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::causality::{GrangerConfig, LagCriterion};
use crate::error::{Error, Result};
use crate::ingest::SessionCalendar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Network,
    Metrics,
    Herding,
    Timeseries,
    Causality,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Network,
        Stage::Metrics,
        Stage::Herding,
        Stage::Timeseries,
        Stage::Causality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Network => "network",
            Stage::Metrics => "metrics",
            Stage::Herding => "herding",
            Stage::Timeseries => "timeseries",
            Stage::Causality => "causality",
        }
    }

    pub fn dependencies(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Network => &[Stage::Ingest],
            Stage::Metrics | Stage::Herding | Stage::Timeseries | Stage::Causality => {
                &[Stage::Ingest, Stage::Network]
            }
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub holdings: PathBuf,
    pub minute_bars: PathBuf,
    pub end_of_day: PathBuf,
    pub labels: PathBuf,
    pub market_caps: Option<PathBuf>,
    pub snapshot_date: NaiveDate,
    pub crash_dates: Vec<NaiveDate>,
    pub filter_k: f64,
    pub sweep_ks: Vec<f64>,
    pub window_minutes: usize,
    pub top_n: usize,
    pub trials: usize,
    pub rich_club_r: Vec<usize>,
    pub sessions: SessionCalendar,
    pub granger: GrangerConfig,
    pub average_level_sample: usize,
    pub average_level_full: bool,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub stages: Vec<Stage>,
}

pub const DEFAULT_CRASH_DATES: [&str; 4] = ["2015-06-26", "2015-06-29", "2015-07-02", "2015-07-03"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.key {
            Some(k) => write!(f, "{level}: {k}: {}", self.message),
            None => write!(f, "{level}: {}", self.message),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Validation {
    pub config: Option<RunConfig>,
    pub findings: Vec<Finding>,
}

impl Validation {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }

    pub fn is_ok(&self) -> bool {
        self.errors().next().is_none()
    }

    /// The config, or an error listing every hard finding.
    pub fn into_config(self) -> Result<RunConfig> {
        if let (true, Some(cfg)) = (self.is_ok(), self.config) {
            return Ok(cfg);
        }
        let msgs: Vec<String> = self.findings.iter().filter(|f| f.severity == Severity::Error).map(|f| f.to_string()).collect();
        Err(Error::Config(msgs.join("; ")))
    }
}

const KNOWN_KEYS: [&str; 26] = [
    "holdings",
    "minute_bars",
    "end_of_day",
    "labels",
    "market_caps",
    "snapshot_date",
    "crash_dates",
    "filter_k",
    "sweep_ks",
    "window_minutes",
    "top_n",
    "trials",
    "rich_club_r",
    "sessions",
    "alpha",
    "max_lag",
    "lag_criterion",
    "d_max",
    "min_valid_points",
    "min_variance",
    "average_level_sample",
    "average_level_full",
    "seed",
    "workers",
    "output_dir",
    "stages",
];

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
    findings: Vec<Finding>,
    base: &'a Path,
}

impl Reader<'_> {
    fn error(&mut self, key: &str, message: impl Into<String>) {
        self.findings.push(Finding {
            severity: Severity::Error,
            key: Some(key.to_string()),
            message: message.into(),
        });
    }

    fn warn(&mut self, key: &str, message: impl Into<String>) {
        self.findings.push(Finding {
            severity: Severity::Warning,
            key: Some(key.to_string()),
            message: message.into(),
        });
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, default: Option<T>) -> Option<T> {
        match self.map.get(key) {
            Some(raw) => match raw.parse() {
                Ok(v) => Some(v),
                Err(_) => {
                    self.error(key, format!("cannot parse '{raw}'"));
                    None
                }
            },
            None if default.is_some() => default,
            None => {
                self.error(key, "required key is missing");
                None
            }
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str, default: Vec<T>) -> Option<Vec<T>> {
        let Some(raw) = self.map.get(key) else {
            return Some(default);
        };
        let mut out = Vec::new();
        for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.parse() {
                Ok(v) => out.push(v),
                Err(_) => {
                    self.error(key, format!("cannot parse list item '{part}'"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn path(&mut self, key: &str, required: bool, must_exist: bool) -> Option<PathBuf> {
        let Some(raw) = self.map.get(key) else {
            if required {
                self.error(key, "required key is missing");
            }
            return None;
        };
        let p = Path::new(raw);
        let p = if p.is_absolute() { p.to_path_buf() } else { self.base.join(p) };
        if must_exist && !p.exists() {
            self.error(key, format!("input not found: {}", p.display()));
        }
        Some(p)
    }
}

/// Splits `key = value` lines; `#` starts a comment line.
pub fn parse_pairs(text: &str) -> (BTreeMap<String, String>, Vec<Finding>) {
    let mut map = BTreeMap::new();
    let mut findings = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            findings.push(Finding {
                severity: Severity::Error,
                key: None,
                message: format!("line {}: expected key = value", no + 1),
            });
            continue;
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if map.insert(k.clone(), v).is_some() {
            findings.push(Finding {
                severity: Severity::Error,
                key: Some(k),
                message: format!("line {}: key given twice", no + 1),
            });
        }
    }
    (map, findings)
}

fn default_sweep() -> Vec<f64> {
    let mut ks: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
    ks.push(0.99);
    ks
}

/// Parses and checks a configuration. Relative paths resolve against `base`.
pub fn validate_text(text: &str, base: &Path) -> Validation {
    let (map, mut findings) = parse_pairs(text);
    let mut r = Reader {
        map: &map,
        findings: Vec::new(),
        base,
    };
    for key in map.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            r.warn(key, "unknown key ignored");
        }
    }

    let holdings = r.path("holdings", true, true);
    let minute_bars = r.path("minute_bars", true, true);
    let end_of_day = r.path("end_of_day", true, true);
    let labels = r.path("labels", true, true);
    let market_caps = r.path("market_caps", false, true);
    let output_dir = r.path("output_dir", true, false);
    let snapshot_date: Option<NaiveDate> = r.parsed("snapshot_date", None);
    let defaults: Vec<NaiveDate> = DEFAULT_CRASH_DATES.iter().map(|d| d.parse().expect("valid date")).collect();
    let crash_dates = r.list("crash_dates", defaults);

    let filter_k = r.parsed("filter_k", Some(0.95));
    if let Some(k) = filter_k {
        if !(0.0..1.0).contains(&k) {
            r.error("filter_k", format!("{k} is outside [0, 1)"));
        }
    }
    let sweep_ks = r.list("sweep_ks", default_sweep());
    if let Some(ks) = &sweep_ks {
        if ks.iter().any(|k| !(0.0..=1.0).contains(k)) || ks.windows(2).any(|w| w[0] > w[1]) {
            r.error("sweep_ks", "values must be ascending within [0, 1]");
        }
    }
    let sessions = match map.get("sessions") {
        Some(raw) => match SessionCalendar::parse(raw) {
            Ok(c) => Some(c),
            Err(e) => {
                r.error("sessions", e.to_string());
                None
            }
        },
        None => Some(SessionCalendar::default()),
    };
    let window_minutes = r.parsed("window_minutes", Some(10usize));
    if let (Some(w), Some(cal)) = (window_minutes, &sessions) {
        if w == 0 || cal.minutes() % w != 0 {
            r.error("window_minutes", format!("{w} does not divide the {}-minute session", cal.minutes()));
        }
    }
    let top_n = r.parsed("top_n", Some(5usize));
    if top_n == Some(0) {
        r.error("top_n", "must be at least 1");
    }
    let trials = r.parsed("trials", Some(100usize));
    if trials == Some(0) {
        r.error("trials", "must be at least 1");
    }
    let rich_club_r = r.list("rich_club_r", (1..=30).collect());

    let d = GrangerConfig::default();
    let granger = (|| {
        Some(GrangerConfig {
            alpha: r.parsed("alpha", Some(d.alpha))?,
            max_lag: r.parsed("max_lag", Some(d.max_lag))?,
            lag_criterion: r.parsed::<LagCriterion>("lag_criterion", Some(d.lag_criterion))?,
            d_max: r.parsed("d_max", Some(d.d_max))?,
            min_valid_points: r.parsed("min_valid_points", Some(d.min_valid_points))?,
            min_variance: r.parsed("min_variance", Some(d.min_variance))?,
        })
    })();
    if let Some(g) = &granger {
        if let Err(e) = g.validate() {
            r.error("granger", e.to_string());
        }
    }
    let average_level_sample = r.parsed("average_level_sample", Some(100_000usize));
    if matches!(average_level_sample, Some(s) if s < 1000) {
        r.error("average_level_sample", "must be at least 1000");
    }
    let average_level_full = r.parsed("average_level_full", Some(false));
    let seed = r.parsed("seed", Some(42u64));
    let workers = r.parsed("workers", Some(0usize));
    let stages = r.list::<Stage>("stages", Stage::ALL.to_vec());
    if let Some(stages) = &stages {
        for s in stages {
            for dep in s.dependencies() {
                if !stages.contains(dep) {
                    r.error("stages", format!("{s} needs {dep}"));
                }
            }
        }
    }
    if let (Some(snap), Some(dates)) = (snapshot_date, &crash_dates) {
        if dates.is_empty() {
            r.error("crash_dates", "at least one date is required");
        }
        for d in dates {
            if (*d - snap).num_days().abs() > 31 {
                r.warn("crash_dates", format!("{d} is more than a month from the holdings snapshot"));
            }
        }
    }

    findings.append(&mut r.findings);
    let config = (|| {
        Some(RunConfig {
            holdings: holdings?,
            minute_bars: minute_bars?,
            end_of_day: end_of_day?,
            labels: labels?,
            market_caps,
            snapshot_date: snapshot_date?,
            crash_dates: {
                let mut d = crash_dates?;
                d.sort();
                d.dedup();
                d
            },
            filter_k: filter_k?,
            sweep_ks: sweep_ks?,
            window_minutes: window_minutes?,
            top_n: top_n?,
            trials: trials?,
            rich_club_r: rich_club_r?,
            sessions: sessions?,
            granger: granger?,
            average_level_sample: average_level_sample?,
            average_level_full: average_level_full?,
            seed: seed?,
            workers: workers?,
            output_dir: output_dir?,
            stages: {
                let mut s = stages?;
                s.sort();
                s.dedup();
                s
            },
        })
    })();
    Validation { config, findings }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<Validation> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(validate_text(&text, base))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn sessions_string(c: &SessionCalendar) -> String {
    c.sessions
        .iter()
        .map(|(a, b)| format!("{}-{}", a.format("%H:%M"), b.format("%H:%M")))
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Canonical `key=value` lines; input paths are rendered as given.
    pub fn canonical(&self) -> BTreeMap<&'static str, String> {
        let g = &self.granger;
        let mut m = BTreeMap::new();
        m.insert("holdings", self.holdings.display().to_string());
        m.insert("minute_bars", self.minute_bars.display().to_string());
        m.insert("end_of_day", self.end_of_day.display().to_string());
        m.insert("labels", self.labels.display().to_string());
        m.insert(
            "market_caps",
            self.market_caps.as_ref().map_or_else(String::new, |p| p.display().to_string()),
        );
        m.insert("snapshot_date", self.snapshot_date.to_string());
        m.insert("crash_dates", join(&self.crash_dates));
        m.insert("filter_k", self.filter_k.to_string());
        m.insert("sweep_ks", join(&self.sweep_ks));
        m.insert("window_minutes", self.window_minutes.to_string());
        m.insert("top_n", self.top_n.to_string());
        m.insert("trials", self.trials.to_string());
        m.insert("rich_club_r", join(&self.rich_club_r));
        m.insert("sessions", sessions_string(&self.sessions));
        m.insert("alpha", g.alpha.to_string());
        m.insert("max_lag", g.max_lag.to_string());
        m.insert("lag_criterion", g.lag_criterion.to_string());
        m.insert("d_max", g.d_max.to_string());
        m.insert("min_valid_points", g.min_valid_points.to_string());
        m.insert("min_variance", g.min_variance.to_string());
        m.insert("average_level_sample", self.average_level_sample.to_string());
        m.insert("average_level_full", self.average_level_full.to_string());
        m.insert("seed", self.seed.to_string());
        m
    }

    pub fn render(&self) -> String {
        self.canonical()
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Keys whose values feed a stage's outputs.
    pub(crate) fn stage_keys(stage: Stage) -> &'static [&'static str] {
        match stage {
            Stage::Ingest => &["snapshot_date", "crash_dates", "sessions"],
            Stage::Network => &["filter_k", "sweep_ks"],
            Stage::Metrics => &["rich_club_r"],
            Stage::Herding => &["crash_dates"],
            Stage::Timeseries => &["crash_dates", "window_minutes", "top_n", "trials", "seed"],
            Stage::Causality => &[
                "crash_dates",
                "top_n",
                "rich_club_r",
                "alpha",
                "max_lag",
                "lag_criterion",
                "d_max",
                "min_valid_points",
                "min_variance",
                "average_level_sample",
                "average_level_full",
                "seed",
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (tempfile::TempDir, String) {
        let dir = tempfile::tempdir().unwrap();
        for f in ["h.csv", "b.csv", "e.csv", "l.csv"] {
            std::fs::write(dir.path().join(f), "x\n").unwrap();
        }
        let text = "holdings = h.csv\nminute_bars = b.csv\nend_of_day = e.csv\nlabels = l.csv\n\
                    snapshot_date = 2015-06-30\noutput_dir = out\n"
            .to_string();
        (dir, text)
    }

    #[test]
    fn complete_config_has_no_findings() {
        let (dir, text) = fixture();
        let v = validate_text(&text, dir.path());
        assert!(v.findings.is_empty(), "{:?}", v.findings);
        let cfg = v.config.unwrap();
        assert_eq!(cfg.filter_k, 0.95);
        assert_eq!(cfg.crash_dates.len(), 4);
        assert_eq!(cfg.stages, Stage::ALL.to_vec());
        assert_eq!(cfg.holdings, dir.path().join("h.csv"));
    }

    #[test]
    fn out_of_range_k_is_hard_error() {
        let (dir, text) = fixture();
        let v = validate_text(&format!("{text}filter_k = 1.2\n"), dir.path());
        assert!(!v.is_ok());
        assert_eq!(v.errors().next().unwrap().key.as_deref(), Some("filter_k"));
    }

    #[test]
    fn missing_input_names_path() {
        let (dir, text) = fixture();
        std::fs::remove_file(dir.path().join("h.csv")).unwrap();
        let v = validate_text(&text, dir.path());
        let e = v.errors().next().unwrap();
        assert!(e.message.contains("h.csv"), "{e}");
    }

    #[test]
    fn unknown_keys_warn() {
        let (dir, text) = fixture();
        let v = validate_text(&format!("{text}colour = blue\n"), dir.path());
        assert!(v.is_ok());
        assert_eq!(v.warnings().count(), 1);
    }

    #[test]
    fn stage_dependencies_are_checked() {
        let (dir, text) = fixture();
        let v = validate_text(&format!("{text}stages = ingest,metrics\n"), dir.path());
        assert!(!v.is_ok());
        let v = validate_text(&format!("{text}stages = ingest,network,metrics\n"), dir.path());
        assert!(v.is_ok());
    }

    #[test]
    fn window_must_divide_session() {
        let (dir, text) = fixture();
        assert!(!validate_text(&format!("{text}window_minutes = 7\n"), dir.path()).is_ok());
    }
}

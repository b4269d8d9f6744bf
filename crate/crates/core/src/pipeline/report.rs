//! Consolidated report bundle assembled from completed stage outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Stage;
use super::runner::{file_sha256, stage_dir, RunManifest, StageStatus, CONFIG_FILE, MANIFEST_FILE};
use super::stages::*;
use crate::error::{Error, Result};

pub const REPORT_DIR: &str = "report";
pub const INDEX_FILE: &str = "index.json";

/// Every report file with the stages that can supply it, most preferred first.
pub const LAYOUT: [(&str, &[Stage]); 17] = [
    (TABLE1, &[Stage::Timeseries]),
    (TABLE2, &[Stage::Metrics]),
    (TABLE3, &[Stage::Herding]),
    (TABLE5, &[Stage::Causality]),
    (TABLE_A1, &[Stage::Metrics]),
    (TABLE_A2, &[Stage::Metrics]),
    (TABLE_A3, &[Stage::Metrics]),
    (TABLE_A5, &[Stage::Herding]),
    (FIG3, &[Stage::Herding]),
    (FIG4, &[Stage::Timeseries]),
    (FIG5, &[Stage::Timeseries]),
    (FIG6, &[Stage::Causality]),
    (FIG_A1, &[Stage::Metrics]),
    (FIG_A2, &[Stage::Metrics]),
    (FIG_A3, &[Stage::Herding]),
    (FIG_A5, &[Stage::Network]),
    (FIG_A6, &[Stage::Causality, Stage::Metrics]),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub name: String,
    pub stage: Stage,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmittedFile {
    pub name: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportIndex {
    pub tool_version: String,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    pub files: Vec<ReportFile>,
    pub omitted: Vec<OmittedFile>,
}

fn available(manifest: &RunManifest, stage: Stage) -> bool {
    matches!(manifest.status(stage), StageStatus::Completed | StageStatus::Cached)
}

/// Copies the report files of a finished run into `output_dir/report` and
/// writes `index.json`. Files whose stage did not run are listed as omitted.
pub fn report(output_dir: &Path) -> Result<ReportIndex> {
    let manifest = RunManifest::load(&output_dir.join(MANIFEST_FILE))?;
    let config_path = output_dir.join(CONFIG_FILE);
    let config_text = fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
    let config = config_text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();

    let dir = output_dir.join(REPORT_DIR);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let (mut files, mut omitted) = (Vec::new(), Vec::new());
    for (name, sources) in LAYOUT {
        match sources.iter().find(|s| available(&manifest, **s)) {
            Some(&stage) => {
                let src = stage_dir(output_dir, stage).join(name);
                let dst = dir.join(name);
                fs::copy(&src, &dst).map_err(|e| Error::io(&src, e))?;
                files.push(ReportFile {
                    name: name.to_string(),
                    stage,
                    sha256: file_sha256(&dst)?,
                });
            }
            None => {
                let wanted: Vec<&str> = sources.iter().map(|s| s.name()).collect();
                omitted.push(OmittedFile {
                    name: name.to_string(),
                    reason: format!("stage {} not run", wanted.join(" or ")),
                });
            }
        }
    }
    let index = ReportIndex {
        tool_version: manifest.tool_version,
        config_hash: manifest.config_hash,
        config,
        files,
        omitted,
    };
    write_json(&dir.join(INDEX_FILE), &index)?;
    Ok(index)
}

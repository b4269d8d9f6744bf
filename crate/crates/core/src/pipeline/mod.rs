//! Staged, cached pipeline driven by a flat run configuration.
//!
//! Seeds: stage `s` uses `derive_seed(seed, &[s])`; inside a stage each date
//! and experiment derives again from the stage seed.

mod config;
mod report;
mod runner;
mod stages;

pub use config::{
    load_config, parse_pairs, validate_text, Finding, RunConfig, Severity, Stage, Validation, DEFAULT_CRASH_DATES,
};
pub use report::{report, OmittedFile, ReportFile, ReportIndex, INDEX_FILE, LAYOUT, REPORT_DIR};
pub use runner::{
    derive_seed, file_sha256, ingest_stage, run, sha256_hex, stage_dir, RunManifest, StageRecord, StageStatus,
    CONFIG_FILE, MANIFEST_FILE, STAGES_DIR, VERSION,
};
pub use stages::*;

use std::fs;
use std::path::Path;

use stocknet::pipeline::{
    report, run, stage_dir, validate_text, RunConfig, Stage, StageStatus, LAYOUT, REPORT_DIR,
};
use stocknet::synthetic::{generate, MarketSpec};

fn small_spec() -> MarketSpec {
    MarketSpec {
        stocks: 120,
        investors: 12,
        holdings_per_investor: 20,
        dates: MarketSpec::default().dates[..2].to_vec(),
        ..MarketSpec::default()
    }
}

fn config(dir: &Path, extra: &str) -> RunConfig {
    let files = generate(&small_spec()).unwrap().write(dir).unwrap();
    let text = format!(
        "holdings = {}\nminute_bars = {}\nend_of_day = {}\nlabels = {}\nmarket_caps = {}\n\
         snapshot_date = 2015-06-30\ncrash_dates = 2015-06-26,2015-06-29\ntrials = 20\n\
         average_level_sample = 1000\noutput_dir = out\n{extra}",
        files.holdings.display(),
        files.minute_bars.display(),
        files.end_of_day.display(),
        files.labels.display(),
        files.market_caps.display(),
    );
    let v = validate_text(&text, dir);
    assert!(v.is_ok(), "{:?}", v.findings);
    v.into_config().unwrap()
}

fn statuses(m: &stocknet::pipeline::RunManifest) -> Vec<StageStatus> {
    m.stages.iter().map(|r| r.status).collect()
}

#[test]
fn full_run_then_cached_rerun_and_recompute_on_corruption() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let first = run(&cfg).unwrap();
    assert_eq!(statuses(&first), vec![StageStatus::Completed; 6]);
    let index = report(&cfg.output_dir).unwrap();
    assert_eq!(index.files.len(), LAYOUT.len());
    assert!(index.omitted.is_empty());
    let snapshot: Vec<Vec<u8>> = index
        .files
        .iter()
        .map(|f| fs::read(cfg.output_dir.join(REPORT_DIR).join(&f.name)).unwrap())
        .collect();
    let index_bytes = fs::read(cfg.output_dir.join(REPORT_DIR).join("index.json")).unwrap();

    let second = run(&cfg).unwrap();
    assert_eq!(statuses(&second), vec![StageStatus::Cached; 6]);

    // Corrupt one metrics artifact: only metrics is recomputed.
    let table = stage_dir(&cfg.output_dir, Stage::Metrics).join("table2_network_stats.csv");
    fs::write(&table, "tampered\n").unwrap();
    let third = run(&cfg).unwrap();
    let s = statuses(&third);
    assert_eq!(s[2], StageStatus::Completed);
    assert!(s.iter().enumerate().all(|(i, st)| i == 2 || *st == StageStatus::Cached), "{s:?}");

    let again = report(&cfg.output_dir).unwrap();
    assert_eq!(again, index);
    for (f, bytes) in index.files.iter().zip(&snapshot) {
        assert_eq!(&fs::read(cfg.output_dir.join(REPORT_DIR).join(&f.name)).unwrap(), bytes, "{}", f.name);
    }
    assert_eq!(fs::read(cfg.output_dir.join(REPORT_DIR).join("index.json")).unwrap(), index_bytes);
}

#[test]
fn fresh_directories_give_identical_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let extra = "stages = ingest,network,metrics,herding,timeseries\n";
    let (ca, cb) = (config(a.path(), extra), config(b.path(), extra));
    run(&ca).unwrap();
    run(&cb).unwrap();
    let (ia, ib) = (report(&ca.output_dir).unwrap(), report(&cb.output_dir).unwrap());
    let sums = |i: &stocknet::pipeline::ReportIndex| i.files.iter().map(|f| f.sha256.clone()).collect::<Vec<_>>();
    assert_eq!(sums(&ia), sums(&ib));
    let omitted: Vec<&str> = ia.omitted.iter().map(|o| o.name.as_str()).collect();
    assert_eq!(omitted, ["table5_hub_granger.csv", "fig6_weight_bins.csv"]);
    let rich = ia.files.iter().find(|f| f.name == "figA6_rich_club.csv").unwrap();
    assert_eq!(rich.stage, Stage::Metrics);
}

#[test]
fn failing_stage_keeps_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), "");
    cfg.snapshot_date = chrono::NaiveDate::from_ymd_opt(2015, 6, 1).unwrap();
    let err = run(&cfg).unwrap_err();
    assert!(err.to_string().contains("ingest"), "{err}");
    assert!(cfg.output_dir.join("stages/ingest.partial").is_dir());
    let m = stocknet::pipeline::RunManifest::load(&cfg.output_dir.join("manifest.json")).unwrap();
    assert_eq!(m.stages.len(), 1);
    assert_eq!(m.stages[0].status, StageStatus::Failed);
}

#[test]
fn deleting_network_artifact_recomputes_dependents_only_when_changed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "stages = ingest,network,metrics\n");
    run(&cfg).unwrap();
    fs::remove_file(stage_dir(&cfg.output_dir, Stage::Network).join("filtered.network")).unwrap();
    let m = run(&cfg).unwrap();
    assert_eq!(m.stages[0].status, StageStatus::Cached);
    assert_eq!(m.stages[1].status, StageStatus::Completed);
    // Rebuilt network is byte-identical, so downstream keys still match.
    assert_eq!(m.stages[2].status, StageStatus::Cached);

    let mut changed = cfg.clone();
    changed.filter_k = 0.9;
    let m = run(&changed).unwrap();
    assert_eq!(m.stages[0].status, StageStatus::Cached);
    assert_eq!(m.stages[1].status, StageStatus::Completed);
    assert_eq!(m.stages[2].status, StageStatus::Completed);
}

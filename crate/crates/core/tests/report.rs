//! Report files: exact round trips and byte-for-byte reproducibility.

use std::fs;

use semv2x::pipeline::{
    compute_metrics, metrics_rows, parse_metrics_csv, read_report, run_e2e, write_report,
    E2eOptions, METRICS_CSV, REPORT_JSON,
};
use semv2x::scenario::PostProcess;
use semv2x::ExperimentConfig;

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk_scale();
    cfg.dataset.n_safe = 24;
    cfg.dataset.n_collision = 12;
    cfg.encoder.embed_dim = 8;
    cfg.train.epochs = 5;
    cfg.seed = 21;
    cfg
}

#[test]
fn tables_parse_back_to_the_report() {
    let cfg = small();
    let mut opts = E2eOptions::single(&cfg, PostProcess::Hybrid, 4);
    opts.quant = semv2x::config::QuantFormat::Fp16;
    let run = run_e2e(&cfg, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_report(&run.report, Some(&run.log), dir.path()).unwrap();

    let text = fs::read_to_string(dir.path().join(METRICS_CSV)).unwrap();
    let rows = parse_metrics_csv(&text).unwrap();
    assert_eq!(rows, metrics_rows(&run.report));
    for (row, cond) in rows.iter().zip(&run.report.conditions) {
        assert_eq!(row.metrics(), cond.metrics);
        assert_eq!(compute_metrics(&row.confusion()), cond.metrics);
        assert_eq!(row.confusion().total() as usize, cond.predictions.len());
    }
    assert_eq!(
        read_report(dir.path().join(REPORT_JSON)).unwrap(),
        run.report
    );

    let summary = fs::read_to_string(dir.path().join("summary.toml")).unwrap();
    assert!(summary.contains(&format!("config_hash = \"{}\"", cfg.hash())));
    let log = fs::read_to_string(dir.path().join("run.log")).unwrap();
    assert!(log.contains("HYBRID/gap4: trained probe"));
}

#[test]
fn same_config_and_seed_give_identical_files() {
    let cfg = small();
    let opts = E2eOptions::single(&cfg, PostProcess::Mask, 8);
    let dirs: Vec<_> = (0..2)
        .map(|_| {
            let run = run_e2e(&cfg, &opts).unwrap();
            let dir = tempfile::tempdir().unwrap();
            write_report(&run.report, None, dir.path()).unwrap();
            dir
        })
        .collect();
    for file in [
        "payload.csv",
        "latency.csv",
        "flops.csv",
        "metrics.csv",
        "predictions.csv",
        "summary.toml",
        "report.json",
    ] {
        let a = fs::read(dirs[0].path().join(file)).unwrap();
        let b = fs::read(dirs[1].path().join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }

    let mut other = cfg.clone();
    other.seed += 1;
    let run = run_e2e(&other, &opts).unwrap();
    let first = read_report(dirs[0].path().join(REPORT_JSON)).unwrap();
    assert_ne!(
        run.report.conditions[0].predictions,
        first.conditions[0].predictions
    );
}

#[test]
fn an_empty_dataset_is_a_config_error() {
    let mut cfg = small();
    cfg.dataset.n_safe = 0;
    cfg.dataset.n_collision = 0;
    let err = run_e2e(&cfg, &E2eOptions::standard(&cfg)).unwrap_err();
    assert!(err.is_config_error(), "{err}");
}

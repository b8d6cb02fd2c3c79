use std::path::{Path, PathBuf};
use std::process::Command;

use anomaly_forecast::pipeline::dataset::{build_pools, leaked_windows, SentimentSource, SymbolData};
use anomaly_forecast::pipeline::report::{
    read_report, results_csv, RESULTS_FILE, RESULTS_HEADER, WINDOWS_TEST_FILE, WINDOWS_TRAIN_FILE,
};
use anomaly_forecast::pipeline::{
    day_accuracy, detect, ingest, report, run_experiment, ExperimentConfig, ModelClass, Scale,
};
use anomaly_forecast::sample::sample_files;
use anomaly_forecast::series::{PriceSeries, SentimentSeries};
use anomaly_forecast::Error;
use chrono::{Datelike, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn sample_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/sample")
}

fn sample_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(&sample_dir().join("config.toml")).unwrap();
    cfg.paths.output = out.to_path_buf();
    cfg
}

#[test]
fn shipped_sample_matches_generator() {
    for (rel, text) in sample_files() {
        let on_disk = std::fs::read_to_string(sample_dir().join(&rel)).unwrap();
        assert!(on_disk == text, "{} is stale; rerun the make_sample example", rel.display());
    }
}

#[test]
fn sample_sentiment_sources() {
    let dir = tempfile::tempdir().unwrap();
    let data = ingest(&sample_config(dir.path())).unwrap();
    let source = |sym: &str| data.iter().find(|d| d.prices.symbol() == sym).unwrap().source;
    assert_eq!(source("AIRA"), SentimentSource::ScoreFile);
    assert_eq!(source("BNKA"), SentimentSource::Comments);
    assert_eq!(source("BNKB"), SentimentSource::Missing);
    let bnkb = data.iter().find(|d| d.prices.symbol() == "BNKB").unwrap();
    assert!(bnkb.sentiments.is_empty());
}

#[test]
fn sample_off_shock_returns_are_bounded() {
    let dir = tempfile::tempdir().unwrap();
    for d in ingest(&sample_config(dir.path())).unwrap() {
        let p = d.prices.prices();
        let returns: Vec<f64> = p.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
        let big = returns.iter().filter(|r| r.abs() > 0.05).count();
        // Only the injected shocks exceed 5%; they are at least 8%.
        assert!(returns.iter().all(|r| r.abs() <= 0.0451 || r.abs() >= 0.079));
        assert!((36..=44).contains(&big), "{}: {big} shocks", d.prices.symbol());
    }
}

#[test]
fn run_all_outputs_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sample_config(dir.path());
    let exp = run_experiment(&cfg).unwrap();
    let rep = report::emit_results(&exp, dir.path()).unwrap();

    for f in [RESULTS_FILE, WINDOWS_TRAIN_FILE, WINDOWS_TEST_FILE, "report.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    assert_eq!(read_report(&dir.path().join("report.json")).unwrap(), rep);
    assert_eq!(rep.cells.len(), 6);
    for m in ModelClass::ALL {
        for s in Scale::ALL {
            assert!(dir.path().join(format!("models/{m}_{s}.json")).is_file());
        }
    }

    // Cell accuracy is the plain mean of its windows, and each window the
    // mean of its three day accuracies recomputed from the prices.
    for c in &rep.cells {
        let ws: Vec<_> = rep.windows.iter().filter(|w| w.model == c.model && w.scale == c.scale).collect();
        assert_eq!(ws.len(), c.n_windows);
        let mean = ws.iter().map(|w| w.accuracy).sum::<f64>() / ws.len() as f64;
        assert!((mean - c.accuracy.unwrap()).abs() < 1e-9);
        for w in &ws {
            let days: Vec<f64> = (0..3)
                .map(|k| day_accuracy(w.predicted_prices[k], w.actual_prices[k]).unwrap())
                .collect();
            assert!((days.iter().sum::<f64>() / 3.0 - w.accuracy).abs() < 1e-9);
        }
    }

    // Every test window is scored by every cell.
    let n_test: usize = exp.detection.symbols.iter().map(|s| s.windows.test.len()).sum();
    assert!(rep.cells.iter().all(|c| c.n_windows == n_test && c.failures == 0));

    let text = std::fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), RESULTS_HEADER.join(","));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6 * n_test * 7);
    for block in rows.chunks(7) {
        assert!(block[..4].iter().all(|r| r[8] == "N/A"));
        assert!(block[4..].iter().all(|r| r[8].parse::<f64>().unwrap() > 0.0));
        assert_eq!(block[3][4], "1");
    }

    let plots = std::fs::read_dir(dir.path().join("plots")).unwrap().count();
    assert_eq!(plots, n_test);
}

#[test]
fn train_and_test_years_do_not_leak() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sample_config(dir.path());
    let det = detect(&cfg, &ingest(&cfg).unwrap());
    let windows = det.windows();
    for s in &windows {
        assert!(s.train.iter().all(|w| w.days.iter().all(|d| d.date.year() == cfg.train_window_year)));
        assert!(s.test.iter().all(|w| w.days.iter().all(|d| d.date.year() == cfg.test_window_year)));
    }
    let test: Vec<_> = windows.iter().flat_map(|s| &s.test).collect();
    for scale in Scale::ALL {
        assert!(leaked_windows(&build_pools(&windows, scale), test.iter().copied()).is_empty());
    }
}

#[test]
fn pools_partition_the_training_windows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sample_config(dir.path());
    let windows = detect(&cfg, &ingest(&cfg).unwrap()).windows();
    let total: usize = windows.iter().map(|s| s.train.len()).sum();
    let universal = build_pools(&windows, Scale::Universal);
    assert_eq!(universal.keys().collect::<Vec<_>>(), ["all"]);
    assert_eq!(universal["all"].len(), total);
    let industry = build_pools(&windows, Scale::Industry);
    assert_eq!(industry.keys().collect::<Vec<_>>(), ["Airlines", "Banks"]);
    assert_eq!(industry.values().map(Vec::len).sum::<usize>(), total);
    let single = build_pools(&windows, Scale::Single);
    assert_eq!(single.len(), 5);
    for s in &windows {
        assert_eq!(single[&s.symbol].len(), s.train.len());
    }
}

#[test]
fn detection_ignores_price_scale() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sample_config(dir.path());
    let data = ingest(&cfg).unwrap();
    let scaled: Vec<SymbolData> = data
        .iter()
        .map(|d| SymbolData {
            prices: PriceSeries::new(
                d.prices.symbol(),
                d.prices.industry(),
                d.prices.points().iter().map(|p| (p.day.date, p.adj_close * 7.5)),
            )
            .unwrap(),
            ..d.clone()
        })
        .collect();
    let dates = |data: &[SymbolData]| -> Vec<(String, NaiveDate)> {
        detect(&cfg, data)
            .windows()
            .iter()
            .flat_map(|s| s.train.iter().chain(&s.test))
            .map(|w| (w.symbol.clone(), w.outlier_day().date))
            .collect()
    };
    assert_eq!(dates(&data), dates(&scaled));
}

#[test]
fn constant_training_year_falls_back() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = sample_config(dir.path());
    cfg.training_year = 2017;
    cfg.fallback_year = 2018;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut level = 40.0;
    let mut rows = Vec::new();
    let mut d = NaiveDate::from_ymd_opt(2017, 1, 2).unwrap();
    while d.year() < 2020 {
        if d.year() > 2017 {
            level *= 1.0 + noise.sample(&mut rng);
        }
        rows.push((d, level));
        d = d.succ_opt().unwrap();
    }
    let data = SymbolData {
        prices: PriceSeries::new("FLAT", "Banks", rows).unwrap(),
        sentiments: SentimentSeries::empty("FLAT"),
        source: SentimentSource::Missing,
    };
    let det = detect(&cfg, &[data]);
    assert!(det.failures.is_empty(), "{:?}", det.failures);
    assert_eq!(det.symbols[0].fit_year, 2018);
}

#[test]
fn ingest_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices");
    std::fs::create_dir_all(&prices).unwrap();
    let config = dir.path().join("config.toml");
    std::fs::write(
        &config,
        "training_year = 2018\nfallback_year = 2017\ntrain_window_year = 2018\ntest_window_year = 2019\n\
         [paths]\nprices = \"prices\"\noutput = \"out\"\n[[symbols]]\nsymbol = \"AAL\"\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&config).unwrap();
    assert_eq!(cfg.resolve_symbols().unwrap()[0].industry, "Airlines");
    assert!(matches!(ingest(&cfg), Err(Error::Io { .. })));

    std::fs::write(prices.join("AAL.csv"), "Date,AdjClose\n2018-01-02,10.5\n2018-01-03,-2\n").unwrap();
    match ingest(&cfg) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }

    std::fs::write(&config, "training_year = 2018\n[paths]\nprices = \"p\"\noutput = \"o\"\n").unwrap();
    assert!(matches!(ExperimentConfig::load(&config), Err(Error::Config(_))));
}

#[test]
fn empty_predictions_give_header_only_results() {
    let bytes = results_csv(&[]).unwrap();
    assert_eq!(String::from_utf8(bytes).unwrap().trim_end(), RESULTS_HEADER.join(","));
}

#[test]
fn staged_cli_matches_run_all() {
    let exe = env!("CARGO_BIN_EXE_anomaly-forecast");
    let config = sample_dir().join("config.toml");
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, out: &Path| {
        let status = Command::new(exe)
            .args([sub, "--config"])
            .arg(&config)
            .args(["--model", "sarimax", "--scale", "single", "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{sub}: {}", String::from_utf8_lossy(&status.stderr));
        String::from_utf8(status.stdout).unwrap()
    };
    let (staged, whole) = (dir.path().join("staged"), dir.path().join("whole"));
    for sub in ["detect", "train", "evaluate"] {
        run(sub, &staged);
    }
    let table = run("report", &staged);
    assert!(table.contains("sarimax acc (%)") && table.contains("single"));
    run("run-all", &whole);
    for f in [RESULTS_FILE, WINDOWS_TRAIN_FILE, WINDOWS_TEST_FILE, "models/sarimax_single.json"] {
        let a = std::fs::read(staged.join(f)).unwrap();
        let b = std::fs::read(whole.join(f)).unwrap();
        if f.ends_with(".json") {
            // Training time differs between runs; the fitted models must not.
            let strip = |v: &[u8]| {
                let mut j: serde_json::Value = serde_json::from_slice(v).unwrap();
                j.as_object_mut().unwrap().remove("train_secs");
                j
            };
            assert_eq!(strip(&a), strip(&b));
        } else {
            assert!(a == b, "{f} differs between staged and run-all");
        }
    }

    let bad = Command::new(exe).args(["evaluate", "--config"]).arg(&config).arg("--out").arg(dir.path().join("none")).output().unwrap();
    assert!(!bad.status.success());
}

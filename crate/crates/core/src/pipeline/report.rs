//! Result files: scored windows as CSV, per-window plot data, the JSON report
//! and serialized models.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::config::{ModelClass, Scale};
use super::dataset::{write_windows_csv, Detection};
use super::{CellFailure, CellSummary, Experiment, TrainedCell, WindowPrediction};
use crate::error::Error;
use crate::io;
use crate::outlier::WindowDiagnostics;
use crate::series::{AnomalyWindow, CONTEXT_LEN, HORIZON, OUTLIER_POS, WINDOW_LEN};

pub const RESULTS_HEADER: [&str; 9] = [
    "Model",
    "Scale",
    "Symbols",
    "Date",
    "Outliers",
    "Actuals",
    "Percentage",
    "S_Scores",
    "Predicted Price",
];

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Validation(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Validation(e.to_string()))
}

/// Seven rows per predicted window; `Predicted Price` is `N/A` on the four
/// conditioning rows.
pub fn results_csv(predictions: &[WindowPrediction]) -> Result<Vec<u8>, Error> {
    let rows = predictions.iter().flat_map(|p| {
        let w = &p.window;
        (0..WINDOW_LEN).map(move |k| {
            vec![
                p.model.to_string(),
                p.scale.to_string(),
                w.symbol.clone(),
                w.days[k].date.to_string(),
                u8::from(k == OUTLIER_POS).to_string(),
                w.actual_prices[k].to_string(),
                w.returns[k].to_string(),
                w.sentiments[k].to_string(),
                if k < CONTEXT_LEN {
                    "N/A".to_owned()
                } else {
                    p.predicted_prices[k - CONTEXT_LEN].to_string()
                },
            ]
        })
    });
    csv_bytes(&RESULTS_HEADER, rows)
}

fn variant_name(model: ModelClass, scale: Scale) -> String {
    format!("{model}_{scale}")
}

/// One file per predicted test window, `<symbol>_<n>.csv` with `n` counting
/// that symbol's windows from 1 in date order. Returns the paths written.
pub fn write_plots(
    predictions: &[WindowPrediction],
    variants: &[(ModelClass, Scale)],
    dir: &Path,
) -> Result<Vec<PathBuf>, Error> {
    type Variants<'a> = BTreeMap<(ModelClass, Scale), &'a WindowPrediction>;
    let mut by_window: BTreeMap<(String, NaiveDate), (&AnomalyWindow, Variants<'_>)> = BTreeMap::new();
    for p in predictions {
        by_window
            .entry((p.window.symbol.clone(), p.window.outlier_day().date))
            .or_insert_with(|| (&p.window, BTreeMap::new()))
            .1
            .insert((p.model, p.scale), p);
    }
    let mut header = vec!["day".to_owned(), "date".to_owned(), "actual".to_owned()];
    header.extend(variants.iter().map(|&(m, s)| variant_name(m, s)));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
    let mut written = Vec::new();
    for ((symbol, _), (w, preds)) in &by_window {
        let n = counters.entry(symbol.as_str()).or_insert(0);
        *n += 1;
        let rows = (0..WINDOW_LEN).map(|k| {
            let mut row = vec![k.to_string(), w.days[k].date.to_string(), w.actual_prices[k].to_string()];
            for v in variants {
                row.push(match preds.get(v) {
                    Some(p) if k >= CONTEXT_LEN => p.predicted_prices[k - CONTEXT_LEN].to_string(),
                    _ => String::new(),
                });
            }
            row
        });
        let path = dir.join(format!("{symbol}_{n}.csv"));
        io::write_atomic(&path, &csv_bytes(&header_refs, rows)?)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEntry {
    pub model: ModelClass,
    pub scale: Scale,
    pub pool: String,
    pub symbol: String,
    pub outlier_date: NaiveDate,
    pub predicted_prices: [f64; HORIZON],
    pub actual_prices: [f64; HORIZON],
    pub day_accuracies: [f64; HORIZON],
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEntry {
    pub symbol: String,
    pub industry: String,
    pub arima_order: String,
    pub fit_year: i32,
    pub train_windows: usize,
    pub test_windows: usize,
    pub diagnostics: WindowDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub model: Option<ModelClass>,
    pub scale: Option<Scale>,
    pub symbol: Option<String>,
    pub pool: Option<String>,
    pub outlier_date: Option<NaiveDate>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub cells: Vec<CellSummary>,
    pub windows: Vec<WindowEntry>,
    pub detection: Vec<DetectionEntry>,
    pub failures: Vec<FailureEntry>,
}

fn detection_entries(d: &Detection) -> (Vec<DetectionEntry>, Vec<FailureEntry>) {
    let entries = d
        .symbols
        .iter()
        .map(|s| DetectionEntry {
            symbol: s.symbol.clone(),
            industry: s.industry.clone(),
            arima_order: s.model.order.to_string(),
            fit_year: s.fit_year,
            train_windows: s.windows.train.len(),
            test_windows: s.windows.test.len(),
            diagnostics: s.diagnostics.clone(),
        })
        .collect();
    let failures = d
        .failures
        .iter()
        .map(|f| FailureEntry {
            model: None,
            scale: None,
            symbol: Some(f.symbol.clone()),
            pool: None,
            outlier_date: None,
            reason: format!("detection: {}", f.reason),
        })
        .collect();
    (entries, failures)
}

fn cell_failure_entry(model: ModelClass, scale: Scale, f: &CellFailure) -> FailureEntry {
    FailureEntry {
        model: Some(model),
        scale: Some(scale),
        symbol: f.symbol.clone(),
        pool: Some(f.pool.clone()),
        outlier_date: f.outlier_date,
        reason: f.reason.clone(),
    }
}

pub fn build_report(detection: Option<&Detection>, cells: &[super::CellOutcome]) -> Report {
    let (det, mut failures) = detection.map(detection_entries).unwrap_or_default();
    let mut windows = Vec::new();
    for c in cells {
        failures.extend(c.failures.iter().map(|f| cell_failure_entry(c.summary.model, c.summary.scale, f)));
        windows.extend(c.predictions.iter().map(|p| WindowEntry {
            model: p.model,
            scale: p.scale,
            pool: p.pool.clone(),
            symbol: p.window.symbol.clone(),
            outlier_date: p.window.outlier_day().date,
            predicted_prices: p.predicted_prices,
            actual_prices: p.window.target_prices(),
            day_accuracies: p.day_accuracies,
            accuracy: p.accuracy,
        }));
    }
    Report {
        cells: cells.iter().map(|c| c.summary.clone()).collect(),
        windows,
        detection: det,
        failures,
    }
}

pub fn read_report(path: &Path) -> Result<Report, Error> {
    Ok(serde_json::from_str(&io::read_to_string(path)?)?)
}

/// Accuracy and time grid, one row per scale, one column pair per class.
pub fn format_table(cells: &[CellSummary]) -> String {
    let mut classes: Vec<ModelClass> = Vec::new();
    let mut scales: Vec<Scale> = Vec::new();
    for c in cells {
        if !classes.contains(&c.model) {
            classes.push(c.model);
        }
        if !scales.contains(&c.scale) {
            scales.push(c.scale);
        }
    }
    let mut out = format!("{:<10}", "scale");
    for m in &classes {
        let _ = write!(out, " {:>14} {:>10} {:>8}", format!("{m} acc (%)"), "time (s)", "windows");
    }
    out.push('\n');
    for s in &scales {
        let _ = write!(out, "{:<10}", s.as_str());
        for m in &classes {
            match cells.iter().find(|c| c.model == *m && c.scale == *s) {
                Some(c) => {
                    let acc = c.accuracy.map_or("n/a".to_owned(), |a| format!("{a:.2}"));
                    let _ = write!(out, " {acc:>14} {:>10.3} {:>8}", c.time_secs, c.n_windows);
                }
                None => {
                    let _ = write!(out, " {:>14} {:>10} {:>8}", "-", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn trained_path(dir: &Path, model: ModelClass, scale: Scale) -> PathBuf {
    dir.join(format!("{model}_{scale}.json"))
}

pub fn write_trained(cell: &TrainedCell, dir: &Path) -> Result<PathBuf, Error> {
    let path = trained_path(dir, cell.model, cell.scale);
    io::write_atomic(&path, serde_json::to_string_pretty(cell)?.as_bytes())?;
    Ok(path)
}

pub fn read_trained(path: &Path) -> Result<TrainedCell, Error> {
    Ok(serde_json::from_str(&io::read_to_string(path)?)?)
}

pub const WINDOWS_TRAIN_FILE: &str = "windows_train.csv";
pub const WINDOWS_TEST_FILE: &str = "windows_test.csv";
pub const RESULTS_FILE: &str = "results.csv";
pub const REPORT_FILE: &str = "report.json";
pub const PLOTS_DIR: &str = "plots";
pub const MODELS_DIR: &str = "models";

pub fn write_window_sets(detection: &Detection, out: &Path) -> Result<(), Error> {
    let train: Vec<AnomalyWindow> = detection.symbols.iter().flat_map(|s| s.windows.train.clone()).collect();
    let test: Vec<AnomalyWindow> = detection.symbols.iter().flat_map(|s| s.windows.test.clone()).collect();
    write_windows_csv(&train, &out.join(WINDOWS_TRAIN_FILE))?;
    write_windows_csv(&test, &out.join(WINDOWS_TEST_FILE))
}

/// Writes results, plots, report and models of a finished evaluation.
pub fn emit_evaluation(
    detection: Option<&Detection>,
    trained: &[TrainedCell],
    cells: &[super::CellOutcome],
    out: &Path,
) -> Result<Report, Error> {
    let predictions: Vec<WindowPrediction> = cells.iter().flat_map(|c| c.predictions.clone()).collect();
    io::write_atomic(&out.join(RESULTS_FILE), &results_csv(&predictions)?)?;
    let variants: Vec<(ModelClass, Scale)> = cells.iter().map(|c| (c.summary.model, c.summary.scale)).collect();
    write_plots(&predictions, &variants, &out.join(PLOTS_DIR))?;
    for t in trained {
        write_trained(t, &out.join(MODELS_DIR))?;
    }
    let report = build_report(detection, cells);
    io::write_atomic(&out.join(REPORT_FILE), serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok(report)
}

/// Everything a full run produces.
pub fn emit_results(experiment: &Experiment, out: &Path) -> Result<Report, Error> {
    write_window_sets(&experiment.detection, out)?;
    emit_evaluation(Some(&experiment.detection), &experiment.trained, &experiment.cells, out)
}

//! End-to-end experiment: ingest, detect, pool, train, forecast, score.

pub mod config;
pub mod dataset;
pub mod report;
pub mod taxonomy;

use std::collections::BTreeMap;
use std::time::Instant;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, ModelClass, Scale, SymbolSpec};
pub use dataset::{build_pools, detect, ingest, pool_key, Detection, SymbolWindows};

use crate::error::Error;
use crate::lstm::{self, LstmModel, LstmShape};
use crate::sarimax::{auto_fit_sarimax, fit_segments, forecast_window, SarimaxModel, Segment};
use crate::series::{reconstruct_prices, AnomalyWindow, HORIZON};

/// Per-day accuracy in percent: `(1 - |A - F| / A) * 100`.
pub fn day_accuracy(predicted: f64, actual: f64) -> Result<f64, Error> {
    if !(actual > 0.0) {
        return Err(Error::Validation(format!("actual price must be positive, got {actual}")));
    }
    Ok((1.0 - (actual - predicted).abs() / actual) * 100.0)
}

/// Mean of the per-day accuracies, i.e. `(1 - MAPE) * 100`.
pub fn accuracy(predicted: &[f64], actual: &[f64]) -> Result<f64, Error> {
    if predicted.len() != actual.len() || actual.is_empty() {
        return Err(Error::Validation(format!(
            "need equally many predictions and actuals, got {} and {}",
            predicted.len(),
            actual.len()
        )));
    }
    let mut sum = 0.0;
    for (f, a) in predicted.iter().zip(actual) {
        sum += day_accuracy(*f, *a)?;
    }
    Ok(sum / actual.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", content = "model", rename_all = "lowercase")]
pub enum TrainedModel {
    Sarimax(SarimaxModel),
    Lstm(LstmModel),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFailure {
    pub pool: String,
    pub symbol: Option<String>,
    pub outlier_date: Option<NaiveDate>,
    pub reason: String,
}

/// Models of one (class, scale) cell, keyed by pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedCell {
    pub model: ModelClass,
    pub scale: Scale,
    pub models: BTreeMap<String, TrainedModel>,
    pub train_secs: f64,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPrediction {
    pub model: ModelClass,
    pub scale: Scale,
    pub pool: String,
    pub window: AnomalyWindow,
    pub predicted_returns: [f64; HORIZON],
    pub predicted_prices: [f64; HORIZON],
    pub day_accuracies: [f64; HORIZON],
    pub accuracy: f64,
}

/// One cell of the accuracy/time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub model: ModelClass,
    pub scale: Scale,
    /// Uniform mean over predicted windows; `None` if nothing was predicted.
    pub accuracy: Option<f64>,
    /// Training plus prediction wall time.
    pub time_secs: f64,
    pub n_windows: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub summary: CellSummary,
    pub predictions: Vec<WindowPrediction>,
    pub failures: Vec<CellFailure>,
}

fn pool_failure(pool: &str, reason: String) -> CellFailure {
    CellFailure {
        pool: pool.to_owned(),
        symbol: None,
        outlier_date: None,
        reason,
    }
}

/// Trains one model per pool at `scale`.
pub fn train_cell(cfg: &ExperimentConfig, class: ModelClass, scale: Scale, windows: &[SymbolWindows]) -> TrainedCell {
    let start = Instant::now();
    let mut models = BTreeMap::new();
    let mut failures = Vec::new();
    for (key, pool) in build_pools(windows, scale) {
        let trained = match class {
            ModelClass::Sarimax => auto_fit_sarimax(&pool, cfg.sarimax_grid)
                .map(TrainedModel::Sarimax)
                .map_err(|e| e.to_string()),
            ModelClass::Lstm => lstm::train(
                LstmModel::init(LstmShape::default(), cfg.seed),
                &pool,
                &cfg.lstm_train_config(),
            )
            .map(|o| TrainedModel::Lstm(o.model))
            .map_err(|e| e.to_string()),
        };
        match trained {
            Ok(m) => {
                models.insert(key, m);
            }
            Err(reason) => {
                log::warn!("{class}/{scale}: pool {key} not trained: {reason}");
                failures.push(pool_failure(&key, reason));
            }
        }
    }
    TrainedCell {
        model: class,
        scale,
        models,
        train_secs: start.elapsed().as_secs_f64(),
        failures,
    }
}

fn predict_returns(
    cfg: &ExperimentConfig,
    model: &TrainedModel,
    pool: &[AnomalyWindow],
    w: &AnomalyWindow,
) -> Result<[f64; HORIZON], String> {
    let (r, s) = (w.context_returns(), w.context_sentiments());
    match model {
        TrainedModel::Lstm(m) => m.forward(&r, &s).map_err(|e| e.to_string()),
        TrainedModel::Sarimax(m) => {
            // Update the pool fit with the window's own conditioning days
            // before forecasting, starting from the pool coefficients.
            let mut segments: Vec<Segment<'_>> = pool.iter().map(Segment::from_window).collect();
            segments.push(Segment { y: &r, x: &s });
            let updated = fit_segments(&segments, m.order, Some(m)).unwrap_or_else(|e| {
                log::debug!("{}: keeping pool coefficients ({e})", w.symbol);
                m.clone()
            });
            forecast_window(&updated, &r, &s, cfg.exog_policy, Some(&w.future_sentiments())).map_err(|e| e.to_string())
        }
    }
}

/// Forecasts every test window whose pool has a trained model.
pub fn predict_cell(cfg: &ExperimentConfig, trained: &TrainedCell, windows: &[SymbolWindows]) -> CellOutcome {
    let start = Instant::now();
    let pools = build_pools(windows, trained.scale);
    let mut predictions = Vec::new();
    let mut failures = trained.failures.clone();
    let mut failed_windows = 0;
    for s in windows {
        let key = pool_key(trained.scale, &s.symbol, &s.industry);
        for w in &s.test {
            let fail = |reason: String| CellFailure {
                pool: key.clone(),
                symbol: Some(s.symbol.clone()),
                outlier_date: Some(w.outlier_day().date),
                reason,
            };
            let Some(model) = trained.models.get(&key) else {
                failures.push(fail(format!("no trained model for pool {key}")));
                failed_windows += 1;
                continue;
            };
            let pool = pools.get(&key).map(Vec::as_slice).unwrap_or_default();
            let scored = predict_returns(cfg, model, pool, w).and_then(|ret| {
                let prices = reconstruct_prices(w.anchor_price(), &ret).map_err(|e| e.to_string())?;
                let actual = w.target_prices();
                let mut days = [0.0; HORIZON];
                for k in 0..HORIZON {
                    days[k] = day_accuracy(prices[k], actual[k]).map_err(|e| e.to_string())?;
                }
                Ok((ret, prices, days))
            });
            match scored {
                Ok((ret, prices, days)) => predictions.push(WindowPrediction {
                    model: trained.model,
                    scale: trained.scale,
                    pool: key.clone(),
                    window: w.clone(),
                    predicted_returns: ret,
                    predicted_prices: std::array::from_fn(|k| prices[k]),
                    day_accuracies: days,
                    accuracy: days.iter().sum::<f64>() / HORIZON as f64,
                }),
                Err(reason) => {
                    log::warn!("{}/{}: {} at {}: {reason}", trained.model, trained.scale, s.symbol, w.outlier_day().date);
                    failures.push(fail(reason));
                    failed_windows += 1;
                }
            }
        }
    }
    let n = predictions.len();
    let summary = CellSummary {
        model: trained.model,
        scale: trained.scale,
        accuracy: (n > 0).then(|| predictions.iter().map(|p| p.accuracy).sum::<f64>() / n as f64),
        time_secs: trained.train_secs + start.elapsed().as_secs_f64(),
        n_windows: n,
        failures: failed_windows,
    };
    CellOutcome {
        summary,
        predictions,
        failures,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub detection: Detection,
    pub trained: Vec<TrainedCell>,
    pub cells: Vec<CellOutcome>,
}

/// Trains and evaluates every configured (class, scale) cell on `windows`.
pub fn run_models(cfg: &ExperimentConfig, windows: &[SymbolWindows]) -> Result<(Vec<TrainedCell>, Vec<CellOutcome>), Error> {
    let test: Vec<&AnomalyWindow> = windows.iter().flat_map(|s| &s.test).collect();
    let mut trained = Vec::new();
    let mut cells = Vec::new();
    for &class in &cfg.models {
        for &scale in &cfg.scales {
            let leaked = dataset::leaked_windows(&build_pools(windows, scale), test.iter().copied());
            if !leaked.is_empty() {
                return Err(Error::Validation(format!("test windows found in training pools: {leaked:?}")));
            }
            let t = train_cell(cfg, class, scale, windows);
            let outcome = predict_cell(cfg, &t, windows);
            log::info!(
                "{class}/{scale}: {} windows, accuracy {:?}, {:.3}s",
                outcome.summary.n_windows,
                outcome.summary.accuracy,
                outcome.summary.time_secs
            );
            trained.push(t);
            cells.push(outcome);
        }
    }
    Ok((trained, cells))
}

/// Full run from the configured inputs. Detection failures of single symbols
/// are recorded, not fatal.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment, Error> {
    let data = ingest(cfg)?;
    let detection = detect(cfg, &data);
    if detection.symbols.is_empty() {
        return Err(Error::Validation("outlier detection failed for every symbol".into()));
    }
    let (trained, cells) = run_models(cfg, &detection.windows())?;
    Ok(Experiment {
        detection,
        trained,
        cells,
    })
}

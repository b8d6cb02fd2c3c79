//! Ingestion, outlier detection and training pools.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scale, SymbolSpec};
use crate::arima::{auto_fit, one_step_residuals, residual_offset, studentize, ArimaError, ArimaModel};
use crate::error::Error;
use crate::io;
use crate::outlier::{extract_windows, filter_year_crossing, flag_outliers, WindowDiagnostics};
use crate::sentiment::{load_scores, read_comments, series_from_comments, Comment, Lexicon};
use crate::series::{
    csv_error, parse_date, pct_change, AnomalyWindow, PriceSeries, SentimentSeries, TradingDay, WINDOW_LEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SentimentSource {
    ScoreFile,
    Comments,
    /// No sentiment available; every day scores 0.
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolData {
    pub prices: PriceSeries,
    pub sentiments: SentimentSeries,
    pub source: SentimentSource,
}

/// Loads every configured symbol. A missing or malformed price file is fatal;
/// missing sentiment only produces a warning and an all-zero series.
pub fn ingest(cfg: &ExperimentConfig) -> Result<Vec<SymbolData>, Error> {
    let specs = cfg.resolve_symbols()?;
    let comments: Option<(Vec<Comment>, Lexicon)> = match (&cfg.paths.comments, &cfg.paths.lexicon) {
        (Some(c), Some(l)) => Some((read_comments(c)?, Lexicon::read(l)?)),
        _ => None,
    };
    specs
        .iter()
        .map(|spec| {
            let path = cfg.paths.prices.join(format!("{}.csv", spec.symbol));
            let prices = PriceSeries::read_csv(&path, &spec.symbol, &spec.industry)?;
            let score_file = cfg
                .paths
                .sentiments
                .as_ref()
                .map(|d| d.join(format!("{}.csv", spec.symbol)))
                .filter(|p| p.exists());
            let (sentiments, source) = if let Some(p) = score_file {
                (load_scores(&p, &spec.symbol)?, SentimentSource::ScoreFile)
            } else if let Some((list, lex)) = comments
                .as_ref()
                .filter(|(list, _)| list.iter().any(|c| c.symbol == spec.symbol))
            {
                (series_from_comments(&spec.symbol, list, lex)?, SentimentSource::Comments)
            } else {
                log::warn!("{}: no sentiment data, using 0 for every day", spec.symbol);
                (SentimentSeries::empty(&spec.symbol), SentimentSource::Missing)
            };
            Ok(SymbolData {
                prices,
                sentiments,
                source,
            })
        })
        .collect()
}

/// Train- and test-year windows of one symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolWindows {
    pub symbol: String,
    pub industry: String,
    pub train: Vec<AnomalyWindow>,
    pub test: Vec<AnomalyWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolDetection {
    pub symbol: String,
    pub industry: String,
    pub model: ArimaModel,
    pub fit_year: i32,
    pub diagnostics: WindowDiagnostics,
    pub windows: SymbolWindows,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolFailure {
    pub symbol: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub symbols: Vec<SymbolDetection>,
    pub failures: Vec<SymbolFailure>,
}

impl Detection {
    pub fn windows(&self) -> Vec<SymbolWindows> {
        self.symbols.iter().map(|s| s.windows.clone()).collect()
    }
}

fn year_prices(prices: &PriceSeries, year: i32) -> Vec<f64> {
    prices.points()[prices.year_range(year)]
        .iter()
        .map(|p| p.adj_close)
        .collect()
}

/// Fits on the training year, falling back to the fallback year when the
/// training year is degenerate or has too little data.
fn fit_detector(cfg: &ExperimentConfig, prices: &PriceSeries) -> Result<(ArimaModel, i32), ArimaError> {
    match auto_fit(&year_prices(prices, cfg.training_year), cfg.max_order_sum) {
        Ok(m) => Ok((m, cfg.training_year)),
        Err(e @ (ArimaError::Degenerate(_) | ArimaError::TooShort { .. })) => {
            log::info!(
                "{}: cannot fit {} ({e}); using {}",
                prices.symbol(),
                cfg.training_year,
                cfg.fallback_year
            );
            let m = auto_fit(&year_prices(prices, cfg.fallback_year), cfg.max_order_sum)?;
            Ok((m, cfg.fallback_year))
        }
        Err(e) => Err(e),
    }
}

fn detect_symbol(cfg: &ExperimentConfig, data: &SymbolData) -> Result<SymbolDetection, Error> {
    let prices = &data.prices;
    let (model, fit_year) = fit_detector(cfg, prices)?;
    let all = prices.prices();
    let residuals = one_step_residuals(&model, &all)?;
    let offset = residual_offset(model.order);
    let returns = pct_change(prices)?;
    let mut diagnostics = WindowDiagnostics::default();
    let mut by_year: BTreeMap<i32, Vec<AnomalyWindow>> = BTreeMap::new();
    for year in [cfg.train_window_year, cfg.test_window_year] {
        let range = prices.year_range(year);
        let start = range.start.max(offset);
        if start >= range.end {
            log::warn!("{}: no residuals in {year}", prices.symbol());
            continue;
        }
        let z = studentize(&residuals[start - offset..range.end - offset])?;
        let days: Vec<(TradingDay, f64)> = prices.points()[start..range.end]
            .iter()
            .zip(z)
            .map(|(p, z)| (p.day, z))
            .collect();
        let flags = flag_outliers(&days, cfg.outlier_threshold);
        let extracted = extract_windows(&flags, prices, &returns, &data.sentiments, &mut diagnostics);
        let before = extracted.len();
        let kept = filter_year_crossing(extracted);
        diagnostics.dropped_year_crossing += before - kept.len();
        by_year.insert(year, kept);
    }
    Ok(SymbolDetection {
        symbol: prices.symbol().to_owned(),
        industry: prices.industry().to_owned(),
        model,
        fit_year,
        diagnostics,
        windows: SymbolWindows {
            symbol: prices.symbol().to_owned(),
            industry: prices.industry().to_owned(),
            train: by_year.remove(&cfg.train_window_year).unwrap_or_default(),
            test: by_year.remove(&cfg.test_window_year).unwrap_or_default(),
        },
    })
}

/// Runs detection per symbol. Failures are recorded and the symbol skipped.
pub fn detect(cfg: &ExperimentConfig, data: &[SymbolData]) -> Detection {
    let mut out = Detection::default();
    for d in data {
        match detect_symbol(cfg, d) {
            Ok(s) => out.symbols.push(s),
            Err(e) => {
                log::warn!("{}: detection failed: {e}", d.prices.symbol());
                out.failures.push(SymbolFailure {
                    symbol: d.prices.symbol().to_owned(),
                    reason: e.to_string(),
                });
            }
        }
    }
    out
}

/// Name of the pool a symbol trains in at `scale`.
pub fn pool_key(scale: Scale, symbol: &str, industry: &str) -> String {
    match scale {
        Scale::Universal => "all".to_owned(),
        Scale::Industry => industry.to_owned(),
        Scale::Single => symbol.to_owned(),
    }
}

/// Train-year windows grouped into pools. Symbols without windows contribute
/// nothing; a pool with no windows is absent.
pub fn build_pools(windows: &[SymbolWindows], scale: Scale) -> BTreeMap<String, Vec<AnomalyWindow>> {
    let mut pools: BTreeMap<String, Vec<AnomalyWindow>> = BTreeMap::new();
    for s in windows.iter().filter(|s| !s.train.is_empty()) {
        pools
            .entry(pool_key(scale, &s.symbol, &s.industry))
            .or_default()
            .extend(s.train.iter().cloned());
    }
    pools
}

/// Windows that appear both in a training pool and among the test windows.
pub fn leaked_windows<'a>(
    pools: &'a BTreeMap<String, Vec<AnomalyWindow>>,
    test: impl IntoIterator<Item = &'a AnomalyWindow>,
) -> Vec<(String, NaiveDate)> {
    let train: HashSet<(&str, NaiveDate)> = pools
        .values()
        .flatten()
        .flat_map(|w| w.days.iter().map(move |d| (w.symbol.as_str(), d.date)))
        .collect();
    test.into_iter()
        .filter(|w| w.days.iter().any(|d| train.contains(&(w.symbol.as_str(), d.date))))
        .map(|w| (w.symbol.clone(), w.outlier_day().date))
        .collect()
}

pub const WINDOW_HEADER: [&str; 7] = ["Symbols", "Date", "Outliers", "Actuals", "Percentage", "S_Scores", "Ordinal"];

/// Writes windows as blocks of seven rows; `Outliers` is 1 on the fourth row.
pub fn write_windows_csv(windows: &[AnomalyWindow], path: &Path) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| csv_error(path, e);
    w.write_record(WINDOW_HEADER).map_err(err)?;
    for win in windows {
        for k in 0..WINDOW_LEN {
            w.write_record([
                win.symbol.clone(),
                win.days[k].date.to_string(),
                u8::from(k == crate::series::OUTLIER_POS).to_string(),
                win.actual_prices[k].to_string(),
                win.returns[k].to_string(),
                win.sentiments[k].to_string(),
                win.days[k].ordinal.to_string(),
            ])
            .map_err(err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(e.to_string()))?;
    io::write_atomic(path, &bytes)
}

pub fn read_windows_csv(path: &Path) -> Result<Vec<AnomalyWindow>, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() != WINDOW_HEADER.len() {
            return Err(Error::parse(path, line, format!("expected {} columns", WINDOW_HEADER.len())));
        }
        let num = |k: usize| -> Result<f64, Error> {
            rec[k]
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad number {:?}", &rec[k])))
        };
        let date = parse_date(&rec[1]).map_err(|m| Error::parse(path, line, m))?;
        let ordinal = rec[6]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad ordinal {:?}", &rec[6])))?;
        let flag = &rec[2];
        let expected = if rows.len() % WINDOW_LEN == crate::series::OUTLIER_POS { "1" } else { "0" };
        if flag != expected {
            return Err(Error::parse(path, line, "outlier flag must be 1 exactly on the fourth row of a block"));
        }
        rows.push((rec[0].to_owned(), TradingDay { date, ordinal }, num(3)?, num(4)?, num(5)?, line));
    }
    if rows.len() % WINDOW_LEN != 0 {
        return Err(Error::parse(path, rows.len() + 1, "row count is not a multiple of 7"));
    }
    rows.chunks(WINDOW_LEN)
        .map(|block| {
            let line = block[0].5;
            if block.iter().any(|r| r.0 != block[0].0) {
                return Err(Error::parse(path, line, "window block mixes symbols"));
            }
            AnomalyWindow::new(
                block[0].0.clone(),
                std::array::from_fn(|k| block[k].1),
                std::array::from_fn(|k| block[k].3),
                std::array::from_fn(|k| block[k].4),
                std::array::from_fn(|k| block[k].2),
            )
            .map_err(|e| Error::parse(path, line, e.to_string()))
        })
        .collect()
}

/// Regroups flat window lists by symbol, in `specs` order.
pub fn group_windows(
    specs: &[SymbolSpec],
    train: Vec<AnomalyWindow>,
    test: Vec<AnomalyWindow>,
) -> Vec<SymbolWindows> {
    let mut map: HashMap<&str, SymbolWindows> = specs
        .iter()
        .map(|s| {
            (
                s.symbol.as_str(),
                SymbolWindows {
                    symbol: s.symbol.clone(),
                    industry: s.industry.clone(),
                    train: Vec::new(),
                    test: Vec::new(),
                },
            )
        })
        .collect();
    for w in train {
        if let Some(s) = map.get_mut(w.symbol.as_str()) {
            s.train.push(w);
        }
    }
    for w in test {
        if let Some(s) = map.get_mut(w.symbol.as_str()) {
            s.test.push(w);
        }
    }
    specs
        .iter()
        .filter_map(|s| map.remove(s.symbol.as_str()))
        .collect()
}

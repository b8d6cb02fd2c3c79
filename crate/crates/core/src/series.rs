//! Time-series containers shared by every stage: adjusted closing prices on a
//! data-derived trading calendar, daily percentage changes, daily sentiment
//! scores and the 7-day anomaly window.
//!
//! A date is a trading day iff the price input has a row for it. No exchange
//! holiday table is consulted.

use std::collections::HashMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Number of trading days in an anomaly window.
pub const WINDOW_LEN: usize = 7;
/// Position of the outlier day inside a window (`t0`).
pub const OUTLIER_POS: usize = 3;
/// Days the forecasters may observe: `t-3 ..= t0`.
pub const CONTEXT_LEN: usize = 4;
/// Days the forecasters predict: `t+1 ..= t+3`.
pub const HORIZON: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("series needs at least {needed} points, got {got}")]
    EmptySeries { needed: usize, got: usize },
    #[error("non-positive price {price} on {date}")]
    NonPositivePrice { date: NaiveDate, price: f64 },
    #[error("return {value} at position {index} is not > -1")]
    ReturnOutOfDomain { index: usize, value: f64 },
    #[error("anchor price {0} must be positive")]
    NonPositiveAnchor(f64),
    #[error("dates must be strictly increasing ({prev} then {next})")]
    UnorderedDates { prev: NaiveDate, next: NaiveDate },
    #[error("symbol mismatch: {left} vs {right}")]
    SymbolMismatch { left: String, right: String },
    #[error("{0} is not a trading day")]
    NotATradingDay(NaiveDate),
    #[error("no trading day in {0}")]
    NoTradingDayInYear(i32),
    #[error("{date} precedes the first trading day of {year}")]
    BeforeReferenceYear { date: NaiveDate, year: i32 },
    #[error("sentiment score {score} on {date} is outside [-1, 1]")]
    ScoreOutOfRange { date: NaiveDate, score: f64 },
    #[error("malformed anomaly window: {0}")]
    MalformedWindow(String),
}

/// A calendar date together with its position on the series' trading calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TradingDay {
    pub date: NaiveDate,
    pub ordinal: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub day: TradingDay,
    pub adj_close: f64,
}

/// Adjusted closing prices of one symbol. Prices are strictly positive and
/// dates strictly increasing; ordinals count rows from the first one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    symbol: String,
    industry: String,
    points: Vec<PricePoint>,
}

impl PriceSeries {
    pub fn new(
        symbol: impl Into<String>,
        industry: impl Into<String>,
        rows: impl IntoIterator<Item = (NaiveDate, f64)>,
    ) -> Result<Self, SeriesError> {
        let mut points: Vec<PricePoint> = Vec::new();
        for (ordinal, (date, price)) in rows.into_iter().enumerate() {
            if !(price > 0.0 && price.is_finite()) {
                return Err(SeriesError::NonPositivePrice { date, price });
            }
            if let Some(prev) = points.last() {
                if prev.day.date >= date {
                    return Err(SeriesError::UnorderedDates {
                        prev: prev.day.date,
                        next: date,
                    });
                }
            }
            points.push(PricePoint {
                day: TradingDay { date, ordinal },
                adj_close: price,
            });
        }
        Ok(Self {
            symbol: symbol.into(),
            industry: industry.into(),
            points,
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn industry(&self) -> &str {
        &self.industry
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.adj_close).collect()
    }

    /// Index of `date` in the series, if it is a trading day.
    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.points.binary_search_by(|p| p.day.date.cmp(&date)).ok()
    }

    /// Rows whose date falls in `year`.
    pub fn year_range(&self, year: i32) -> std::ops::Range<usize> {
        let start = self.points.partition_point(|p| p.day.date.year() < year);
        let end = self.points.partition_point(|p| p.day.date.year() <= year);
        start..end
    }

    /// Reads the price CSV format: header row, then `Date,AdjClose` per line.
    pub fn read_csv(
        path: &Path,
        symbol: impl Into<String>,
        industry: impl Into<String>,
    ) -> Result<Self, Error> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| csv_error(path, e))?;
            if record.len() < 2 {
                return Err(Error::parse(path, line, "expected Date,AdjClose"));
            }
            let date = parse_date(&record[0]).map_err(|m| Error::parse(path, line, m))?;
            let price: f64 = record[1]
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad price {:?}", &record[1])))?;
            if !(price > 0.0 && price.is_finite()) {
                return Err(Error::parse(
                    path,
                    line,
                    SeriesError::NonPositivePrice { date, price }.to_string(),
                ));
            }
            rows.push((date, price));
        }
        Ok(Self::new(symbol, industry, rows)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), Error> {
        let mut out = String::from("Date,AdjClose\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.day.date, p.adj_close));
        }
        crate::io::write_atomic(path, out.as_bytes())
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::parse(path, line, format!("{kind:?}")),
    }
}

pub(crate) fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| format!("bad date {s:?}: {e}"))
}

/// Daily percentage changes, each paired with the later of the two days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub symbol: String,
    pub points: Vec<(TradingDay, f64)>,
}

impl ReturnSeries {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, r)| r).collect()
    }
}

/// Daily sentiment scores in `[-1, 1]`, sorted by date. Days without comments
/// are either absent or carry exactly 0.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SentimentSeries {
    symbol: String,
    points: Vec<(NaiveDate, f64)>,
}

impl SentimentSeries {
    pub fn new(
        symbol: impl Into<String>,
        points: impl IntoIterator<Item = (NaiveDate, f64)>,
    ) -> Result<Self, SeriesError> {
        let points: Vec<_> = points.into_iter().collect();
        for w in points.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(SeriesError::UnorderedDates {
                    prev: w[0].0,
                    next: w[1].0,
                });
            }
        }
        if let Some(&(date, score)) = points.iter().find(|(_, s)| !(-1.0..=1.0).contains(s)) {
            return Err(SeriesError::ScoreOutOfRange { date, score });
        }
        Ok(Self {
            symbol: symbol.into(),
            points,
        })
    }

    pub fn empty(symbol: impl Into<String>) -> Self {
        Self {
            symbol: symbol.into(),
            points: Vec::new(),
        }
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Score on `date`, 0 when the day has no entry.
    pub fn score_on(&self, date: NaiveDate) -> f64 {
        match self.points.binary_search_by(|(d, _)| d.cmp(&date)) {
            Ok(i) => self.points[i].1,
            Err(_) => 0.0,
        }
    }
}

/// One joined trading day: price plus sentiment (0 when missing).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedDay {
    pub day: TradingDay,
    pub price: f64,
    pub sentiment: f64,
}

/// The 7 trading days `t-3 ..= t+3` around a flagged outlier day.
///
/// `returns[k]` is the percentage change from the trading day before
/// `days[k]` to `days[k]`. Windows coming out of window extraction may still
/// span a year boundary; `is_single_year` is the check applied before they
/// enter any dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyWindow {
    pub symbol: String,
    pub days: [TradingDay; WINDOW_LEN],
    pub returns: [f64; WINDOW_LEN],
    pub sentiments: [f64; WINDOW_LEN],
    pub actual_prices: [f64; WINDOW_LEN],
}

impl AnomalyWindow {
    pub fn new(
        symbol: impl Into<String>,
        days: [TradingDay; WINDOW_LEN],
        returns: [f64; WINDOW_LEN],
        sentiments: [f64; WINDOW_LEN],
        actual_prices: [f64; WINDOW_LEN],
    ) -> Result<Self, SeriesError> {
        for w in days.windows(2) {
            if w[0].date >= w[1].date {
                return Err(SeriesError::UnorderedDates {
                    prev: w[0].date,
                    next: w[1].date,
                });
            }
        }
        for (k, &p) in actual_prices.iter().enumerate() {
            if !(p > 0.0 && p.is_finite()) {
                return Err(SeriesError::NonPositivePrice {
                    date: days[k].date,
                    price: p,
                });
            }
        }
        for (k, &r) in returns.iter().enumerate() {
            if !(r > -1.0 && r.is_finite()) {
                return Err(SeriesError::ReturnOutOfDomain { index: k, value: r });
            }
        }
        for (k, &s) in sentiments.iter().enumerate() {
            if !(-1.0..=1.0).contains(&s) {
                return Err(SeriesError::ScoreOutOfRange {
                    date: days[k].date,
                    score: s,
                });
            }
        }
        Ok(Self {
            symbol: symbol.into(),
            days,
            returns,
            sentiments,
            actual_prices,
        })
    }

    pub fn outlier_day(&self) -> TradingDay {
        self.days[OUTLIER_POS]
    }

    pub fn is_single_year(&self) -> bool {
        let y = self.days[0].date.year();
        self.days.iter().all(|d| d.date.year() == y)
    }

    pub fn year(&self) -> i32 {
        self.outlier_day().date.year()
    }

    pub fn context_returns(&self) -> [f64; CONTEXT_LEN] {
        std::array::from_fn(|k| self.returns[k])
    }

    pub fn context_sentiments(&self) -> [f64; CONTEXT_LEN] {
        std::array::from_fn(|k| self.sentiments[k])
    }

    pub fn target_returns(&self) -> [f64; HORIZON] {
        std::array::from_fn(|k| self.returns[CONTEXT_LEN + k])
    }

    pub fn future_sentiments(&self) -> [f64; HORIZON] {
        std::array::from_fn(|k| self.sentiments[CONTEXT_LEN + k])
    }

    pub fn target_prices(&self) -> [f64; HORIZON] {
        std::array::from_fn(|k| self.actual_prices[CONTEXT_LEN + k])
    }

    /// Actual price on the outlier day, the anchor for price reconstruction.
    pub fn anchor_price(&self) -> f64 {
        self.actual_prices[OUTLIER_POS]
    }
}

/// `out[i] = p[i+1] / p[i] - 1`, paired with the later day.
pub fn pct_change(prices: &PriceSeries) -> Result<ReturnSeries, SeriesError> {
    let pts = prices.points();
    if pts.len() < 2 {
        return Err(SeriesError::EmptySeries {
            needed: 2,
            got: pts.len(),
        });
    }
    if let Some(p) = pts.iter().find(|p| !(p.adj_close > 0.0)) {
        return Err(SeriesError::NonPositivePrice {
            date: p.day.date,
            price: p.adj_close,
        });
    }
    let points = pts
        .windows(2)
        .map(|w| (w[1].day, w[1].adj_close / w[0].adj_close - 1.0))
        .collect();
    Ok(ReturnSeries {
        symbol: prices.symbol().to_owned(),
        points,
    })
}

/// Compounds `returns` forward from `anchor_price`; inverse of [`pct_change`].
pub fn reconstruct_prices(anchor_price: f64, returns: &[f64]) -> Result<Vec<f64>, SeriesError> {
    if !(anchor_price > 0.0 && anchor_price.is_finite()) {
        return Err(SeriesError::NonPositiveAnchor(anchor_price));
    }
    let mut level = anchor_price;
    returns
        .iter()
        .enumerate()
        .map(|(index, &r)| {
            if !(r > -1.0 && r.is_finite()) {
                return Err(SeriesError::ReturnOutOfDomain { index, value: r });
            }
            level *= 1.0 + r;
            Ok(level)
        })
        .collect()
}

/// Joins prices with sentiment by date. Every price day is kept; sentiment days
/// without a price row are dropped.
pub fn align(
    prices: &PriceSeries,
    sentiments: &SentimentSeries,
) -> Result<Vec<AlignedDay>, SeriesError> {
    if prices.symbol() != sentiments.symbol() {
        return Err(SeriesError::SymbolMismatch {
            left: prices.symbol().to_owned(),
            right: sentiments.symbol().to_owned(),
        });
    }
    Ok(prices
        .points()
        .iter()
        .map(|p| AlignedDay {
            day: p.day,
            price: p.adj_close,
            sentiment: sentiments.score_on(p.day.date),
        })
        .collect())
}

/// Trading-day ordinals counted from the first trading day of a reference year.
#[derive(Debug, Clone)]
pub struct OrdinalIndex {
    reference_year: i32,
    dates: Vec<NaiveDate>,
    lookup: HashMap<NaiveDate, usize>,
}

impl OrdinalIndex {
    pub fn reference_year(&self) -> i32 {
        self.reference_year
    }

    pub fn ordinal_of(&self, date: NaiveDate) -> Result<usize, SeriesError> {
        if let Some(&o) = self.lookup.get(&date) {
            return Ok(o);
        }
        match self.dates.first() {
            Some(&first) if date < first => Err(SeriesError::BeforeReferenceYear {
                date,
                year: self.reference_year,
            }),
            _ => Err(SeriesError::NotATradingDay(date)),
        }
    }

    pub fn date_of(&self, ordinal: usize) -> Option<NaiveDate> {
        self.dates.get(ordinal).copied()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Maps the first trading day of `reference_year` to 0 and counts forward
/// through the rest of the series.
pub fn ordinal_index(series: &PriceSeries, reference_year: i32) -> Result<OrdinalIndex, SeriesError> {
    if series.is_empty() {
        return Err(SeriesError::EmptySeries { needed: 1, got: 0 });
    }
    let range = series.year_range(reference_year);
    if range.is_empty() {
        return Err(SeriesError::NoTradingDayInYear(reference_year));
    }
    let dates: Vec<NaiveDate> = series.points()[range.start..]
        .iter()
        .map(|p| p.day.date)
        .collect();
    let lookup = dates.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    Ok(OrdinalIndex {
        reference_year,
        dates,
        lookup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn series(prices: &[f64]) -> PriceSeries {
        let start = d(2018, 1, 1);
        PriceSeries::new(
            "TEST",
            "Banks",
            prices
                .iter()
                .enumerate()
                .map(|(i, &p)| (start + chrono::Days::new(i as u64), p)),
        )
        .unwrap()
    }

    #[test]
    fn pct_change_tsla_rows() {
        let s = PriceSeries::new(
            "TSLA",
            "Auto Manufactures",
            [(d(2018, 3, 9), 327.170013), (d(2018, 3, 12), 345.51001)],
        )
        .unwrap();
        let r = pct_change(&s).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.points[0].0.date, d(2018, 3, 12));
        assert!((r.points[0].1 - 0.05605647).abs() < 1e-7);
    }

    #[test]
    fn pct_change_small_cases() {
        assert_eq!(pct_change(&series(&[100.0, 100.0, 100.0])).unwrap().values(), vec![0.0, 0.0]);
        let r = pct_change(&series(&[100.0, 110.0, 99.0])).unwrap().values();
        assert!((r[0] - 0.10).abs() < 1e-12);
        assert!((r[1] + 0.10).abs() < 1e-12);
        assert!(matches!(
            pct_change(&series(&[100.0])),
            Err(SeriesError::EmptySeries { .. })
        ));
    }

    #[test]
    fn non_positive_price_rejected() {
        let err = PriceSeries::new("X", "Banks", [(d(2018, 1, 2), 10.0), (d(2018, 1, 3), -1.0)]);
        assert!(matches!(err, Err(SeriesError::NonPositivePrice { .. })));
    }

    #[test]
    fn reconstruct_examples() {
        let out = reconstruct_prices(329.100006, &[-0.0058645]).unwrap();
        assert!((out[0] - 327.170013).abs() < 1e-4);
        assert!(reconstruct_prices(250.0, &[]).unwrap().is_empty());
        let out = reconstruct_prices(100.0, &[0.1, -0.1]).unwrap();
        assert!((out[0] - 110.0).abs() < 1e-9 && (out[1] - 99.0).abs() < 1e-9);
        assert!(matches!(
            reconstruct_prices(100.0, &[-1.0]),
            Err(SeriesError::ReturnOutOfDomain { .. })
        ));
        assert!(reconstruct_prices(0.0, &[0.1]).is_err());
    }

    #[test]
    fn align_fills_missing_days_with_zero() {
        let p = series(&[10.0, 11.0, 12.0]);
        let days: Vec<_> = p.points().iter().map(|x| x.day.date).collect();
        let s = SentimentSeries::new("TEST", [(days[0], 0.5), (days[2], -0.25), (d(2019, 6, 1), 0.9)])
            .unwrap();
        let joined = align(&p, &s).unwrap();
        let scores: Vec<f64> = joined.iter().map(|a| a.sentiment).collect();
        assert_eq!(scores, vec![0.5, 0.0, -0.25]);

        let joined = align(&p, &SentimentSeries::empty("TEST")).unwrap();
        assert!(joined.iter().all(|a| a.sentiment == 0.0));

        let full = SentimentSeries::new("TEST", days.iter().map(|&d| (d, 0.1))).unwrap();
        let joined = align(&p, &full).unwrap();
        assert!(joined.iter().zip(p.points()).all(|(a, p)| a.price == p.adj_close && a.sentiment == 0.1));

        assert!(matches!(
            align(&p, &SentimentSeries::empty("OTHER")),
            Err(SeriesError::SymbolMismatch { .. })
        ));
    }

    #[test]
    fn ordinal_index_counts_trading_days() {
        // 2017-12-29 (Fri), then 2018 business days starting Tue Jan 2.
        let dates = [
            d(2017, 12, 29),
            d(2018, 1, 2),
            d(2018, 1, 3),
            d(2018, 1, 4),
            d(2018, 1, 5),
            d(2018, 1, 8),
            d(2018, 1, 9),
        ];
        let s = PriceSeries::new("X", "Banks", dates.iter().map(|&d| (d, 1.0))).unwrap();
        let idx = ordinal_index(&s, 2018).unwrap();
        assert_eq!(idx.ordinal_of(d(2018, 1, 2)).unwrap(), 0);
        assert_eq!(idx.ordinal_of(d(2018, 1, 8)).unwrap(), 4);
        assert_eq!(idx.date_of(4), Some(d(2018, 1, 8)));
        assert_eq!(
            idx.ordinal_of(d(2018, 1, 6)),
            Err(SeriesError::NotATradingDay(d(2018, 1, 6)))
        );
        assert!(matches!(
            idx.ordinal_of(d(2017, 12, 29)),
            Err(SeriesError::BeforeReferenceYear { .. })
        ));
        assert_eq!(
            ordinal_index(&s, 2016).unwrap_err(),
            SeriesError::NoTradingDayInYear(2016)
        );
    }

    #[test]
    fn sentiment_series_rejects_out_of_range() {
        assert!(SentimentSeries::new("X", [(d(2018, 1, 2), 1.5)]).is_err());
        assert!(SentimentSeries::new("X", [(d(2018, 1, 2), 1.0), (d(2018, 1, 3), -1.0)]).is_ok());
    }
}

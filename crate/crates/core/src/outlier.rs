//! Contextual outlier flags from studentized one-step residuals, and the 7-day
//! anomaly windows built around them.

use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::series::{
    AnomalyWindow, PriceSeries, ReturnSeries, SentimentSeries, TradingDay, OUTLIER_POS, WINDOW_LEN,
};

pub const DEFAULT_THRESHOLD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierFlag {
    pub day: TradingDay,
    pub studentized_residual: f64,
    pub flagged: bool,
}

/// Per-symbol tally of what detection produced and what it threw away.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowDiagnostics {
    pub flagged_days: usize,
    pub windows_extracted: usize,
    pub dropped_insufficient_context: usize,
    pub dropped_year_crossing: usize,
}

/// Flags every day whose |studentized residual| is strictly above `threshold`.
///
/// # Panics
/// If `threshold` is not positive.
pub fn flag_outliers(studentized: &[(TradingDay, f64)], threshold: f64) -> Vec<OutlierFlag> {
    assert!(threshold > 0.0, "outlier threshold must be positive");
    studentized
        .iter()
        .map(|&(day, z)| OutlierFlag {
            day,
            studentized_residual: z,
            flagged: z.abs() > threshold,
        })
        .collect()
}

/// Builds one window per flagged day from the three trading days either side.
///
/// Windows without three prior and three following trading days (or whose
/// first day has no preceding price, and so no return) are dropped and counted
/// in `diag`. Overlapping windows are all kept. Sentiment gaps read as 0.
pub fn extract_windows(
    flags: &[OutlierFlag],
    prices: &PriceSeries,
    returns: &ReturnSeries,
    sentiments: &SentimentSeries,
    diag: &mut WindowDiagnostics,
) -> Vec<AnomalyWindow> {
    let return_on: HashMap<NaiveDate, f64> =
        returns.points.iter().map(|(d, r)| (d.date, *r)).collect();
    let pts = prices.points();
    let mut out = Vec::new();
    for flag in flags.iter().filter(|f| f.flagged) {
        diag.flagged_days += 1;
        let Some(centre) = prices.position(flag.day.date) else {
            diag.dropped_insufficient_context += 1;
            continue;
        };
        if centre < OUTLIER_POS || centre + (WINDOW_LEN - OUTLIER_POS) > pts.len() {
            diag.dropped_insufficient_context += 1;
            continue;
        }
        let span = &pts[centre - OUTLIER_POS..centre - OUTLIER_POS + WINDOW_LEN];
        let rets: Option<Vec<f64>> = span.iter().map(|p| return_on.get(&p.day.date).copied()).collect();
        let Some(rets) = rets else {
            diag.dropped_insufficient_context += 1;
            continue;
        };
        let window = AnomalyWindow::new(
            prices.symbol(),
            std::array::from_fn(|k| span[k].day),
            std::array::from_fn(|k| rets[k]),
            std::array::from_fn(|k| sentiments.score_on(span[k].day.date)),
            std::array::from_fn(|k| span[k].adj_close),
        );
        match window {
            Ok(w) => {
                diag.windows_extracted += 1;
                out.push(w);
            }
            Err(e) => {
                log::warn!("{}: dropping window at {}: {e}", prices.symbol(), flag.day.date);
                diag.dropped_insufficient_context += 1;
            }
        }
    }
    out
}

/// Keeps only windows whose seven days share one calendar year.
pub fn filter_year_crossing(windows: Vec<AnomalyWindow>) -> Vec<AnomalyWindow> {
    windows.into_iter().filter(AnomalyWindow::is_single_year).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::pct_change;

    fn day(ordinal: usize) -> TradingDay {
        TradingDay {
            date: NaiveDate::from_ymd_opt(2018, 1, 1).unwrap() + chrono::Days::new(ordinal as u64),
            ordinal,
        }
    }

    fn fixture(n: usize) -> (PriceSeries, ReturnSeries, SentimentSeries) {
        let start = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap();
        let prices = PriceSeries::new(
            "SYM",
            "Banks",
            (0..n).map(|i| (start + chrono::Days::new(i as u64), 100.0 + (i % 7) as f64)),
        )
        .unwrap();
        let returns = pct_change(&prices).unwrap();
        let sent = SentimentSeries::new("SYM", [(start + chrono::Days::new(9), 0.5)]).unwrap();
        (prices, returns, sent)
    }

    fn flags_at(ordinals: &[usize]) -> Vec<OutlierFlag> {
        ordinals
            .iter()
            .map(|&o| OutlierFlag {
                day: day(o),
                studentized_residual: 3.0,
                flagged: true,
            })
            .collect()
    }

    #[test]
    fn threshold_is_strict() {
        let input: Vec<_> = [1.9, 2.1, -2.5, 2.0, 0.0]
            .iter()
            .enumerate()
            .map(|(i, &z)| (day(i), z))
            .collect();
        let flags: Vec<bool> = flag_outliers(&input, 2.0).iter().map(|f| f.flagged).collect();
        assert_eq!(flags, vec![false, true, true, false, false]);
        let zeros: Vec<_> = (0..5).map(|i| (day(i), 0.0)).collect();
        assert!(flag_outliers(&zeros, 2.0).iter().all(|f| !f.flagged));
    }

    #[test]
    fn window_covers_three_days_each_side() {
        let (p, r, s) = fixture(300);
        let mut diag = WindowDiagnostics::default();
        let w = extract_windows(&flags_at(&[10]), &p, &r, &s, &mut diag);
        assert_eq!(w.len(), 1);
        let ords: Vec<usize> = w[0].days.iter().map(|d| d.ordinal).collect();
        assert_eq!(ords, (7..=13).collect::<Vec<_>>());
        assert_eq!(w[0].outlier_day().ordinal, 10);
        assert_eq!(w[0].sentiments[2], 0.5);
        assert_eq!(w[0].sentiments[0], 0.0);
        assert_eq!(w[0].actual_prices[3], p.points()[10].adj_close);
        assert_eq!(w[0].returns[3], r.points[9].1);
    }

    #[test]
    fn boundary_windows_dropped() {
        let (p, r, s) = fixture(300);
        let mut diag = WindowDiagnostics::default();
        // 1: no left context; 3: first day has no return; 297: no right context.
        let w = extract_windows(&flags_at(&[1, 3, 297, 296]), &p, &r, &s, &mut diag);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].outlier_day().ordinal, 296);
        assert_eq!(diag.flagged_days, 4);
        assert_eq!(diag.dropped_insufficient_context, 3);
        assert_eq!(diag.windows_extracted, 1);
    }

    #[test]
    fn overlapping_windows_are_both_kept() {
        let (p, r, s) = fixture(300);
        let mut diag = WindowDiagnostics::default();
        let w = extract_windows(&flags_at(&[10, 12]), &p, &r, &s, &mut diag);
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].days[5], w[1].days[3]);
    }

    #[test]
    fn year_crossing_windows_removed() {
        let start = NaiveDate::from_ymd_opt(2018, 12, 20).unwrap();
        let prices = PriceSeries::new(
            "SYM",
            "Banks",
            (0..30).map(|i| (start + chrono::Days::new(i), 50.0 + i as f64)),
        )
        .unwrap();
        let returns = pct_change(&prices).unwrap();
        let sent = SentimentSeries::empty("SYM");
        let pos = |d: u32, m: u32, y: i32| prices.position(NaiveDate::from_ymd_opt(y, m, d).unwrap()).unwrap();
        // Dec 31 window spans Dec 28 .. Jan 3; Jan 15 window is inside January.
        let flags: Vec<OutlierFlag> = [pos(31, 12, 2018), pos(15, 1, 2019)]
            .iter()
            .map(|&i| OutlierFlag {
                day: prices.points()[i].day,
                studentized_residual: 5.0,
                flagged: true,
            })
            .collect();
        let mut diag = WindowDiagnostics::default();
        let windows = extract_windows(&flags, &prices, &returns, &sent, &mut diag);
        assert_eq!(windows.len(), 2);
        let kept = filter_year_crossing(windows.clone());
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0], windows[1]);
        assert!(filter_year_crossing(Vec::new()).is_empty());
    }
}

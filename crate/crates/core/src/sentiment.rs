//! Daily per-symbol sentiment scores in `[-1, 1]`.
//!
//! Scores normally come precomputed in a `Date,Score` CSV. For offline runs a
//! lexicon scorer turns raw comments into the same scale: valences of matched
//! tokens are summed and squashed with `s / sqrt(s^2 + 15)`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::io;
use crate::series::{csv_error, parse_date, SentimentSeries, SeriesError};

/// Normalisation constant of the compound score.
pub const COMPOUND_ALPHA: f64 = 15.0;
pub const MAX_VALENCE: f64 = 4.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: HashMap<String, f64>,
}

impl Lexicon {
    pub fn new<S: AsRef<str>>(entries: impl IntoIterator<Item = (S, f64)>) -> Result<Self, Error> {
        let mut map = HashMap::new();
        for (token, valence) in entries {
            let token = token.as_ref().trim().to_lowercase();
            if token.is_empty() {
                return Err(Error::Validation("empty lexicon token".into()));
            }
            if !(-MAX_VALENCE..=MAX_VALENCE).contains(&valence) {
                return Err(Error::Validation(format!(
                    "valence {valence} for {token:?} outside [-4, 4]"
                )));
            }
            if map.insert(token.clone(), valence).is_some() {
                return Err(Error::Validation(format!("duplicate lexicon token {token:?}")));
            }
        }
        Ok(Self { entries: map })
    }

    /// Parses `token<TAB>valence` lines. Extra tab-separated columns are ignored,
    /// so the common `token, mean, sd, ratings` layout also loads.
    pub fn parse(text: &str, origin: &Path) -> Result<Self, Error> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let token = cols.next().unwrap_or_default();
            let valence = cols
                .next()
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::parse(origin, i + 1, "expected token<TAB>valence"))?;
            rows.push((token.to_owned(), valence));
        }
        Self::new(rows)
    }

    pub fn read(path: &Path) -> Result<Self, Error> {
        Self::parse(&io::read_to_string(path)?, path)
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The same lexicon with every valence negated.
    pub fn negated(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|(k, v)| (k.clone(), -v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySentiment {
    pub symbol: String,
    pub date: NaiveDate,
    pub score: f64,
    pub comment_count: usize,
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\'').to_lowercase())
        .filter(|t| !t.is_empty())
}

pub fn normalize_compound(sum: f64) -> f64 {
    sum / (sum * sum + COMPOUND_ALPHA).sqrt()
}

/// Compound score of `text`: lowercase tokens split on whitespace and
/// punctuation, valences summed, then normalised into `(-1, 1)`.
pub fn lexicon_compound(text: &str, lexicon: &Lexicon) -> f64 {
    let sum: f64 = tokens(text).filter_map(|t| lexicon.valence(&t)).sum();
    normalize_compound(sum)
}

/// Scores one day's comments as a single concatenated text.
pub fn daily_compound<S: AsRef<str>>(comments: &[S], lexicon: &Lexicon) -> f64 {
    if comments.is_empty() {
        return 0.0;
    }
    let joined = comments.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
    lexicon_compound(&joined, lexicon)
}

pub fn score_day<S: AsRef<str>>(
    symbol: &str,
    date: NaiveDate,
    comments: &[S],
    lexicon: &Lexicon,
) -> DailySentiment {
    DailySentiment {
        symbol: symbol.to_owned(),
        date,
        score: daily_compound(comments, lexicon),
        comment_count: comments.len(),
    }
}

/// One line of the comments JSON-lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub date: NaiveDate,
    pub symbol: String,
    pub body: String,
}

pub fn read_comments(path: &Path) -> Result<Vec<Comment>, Error> {
    let text = io::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}

/// Daily scores for `symbol` from raw comments; other symbols are ignored.
pub fn series_from_comments(
    symbol: &str,
    comments: &[Comment],
    lexicon: &Lexicon,
) -> Result<SentimentSeries, SeriesError> {
    let mut by_day: BTreeMap<NaiveDate, Vec<&str>> = BTreeMap::new();
    for c in comments.iter().filter(|c| c.symbol == symbol) {
        by_day.entry(c.date).or_default().push(&c.body);
    }
    SentimentSeries::new(
        symbol,
        by_day
            .into_iter()
            .map(|(date, bodies)| (date, score_day(symbol, date, &bodies, lexicon).score)),
    )
}

/// Reads a `Date,Score` CSV. Scores outside `[-1, 1]` are rejected; repeated
/// dates keep the last row.
pub fn load_scores(path: &Path, symbol: &str) -> Result<SentimentSeries, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() < 2 {
            return Err(Error::parse(path, line, "expected Date,Score"));
        }
        let date = parse_date(&record[0]).map_err(|m| Error::parse(path, line, m))?;
        let score: f64 = record[1]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad score {:?}", &record[1])))?;
        if !(-1.0..=1.0).contains(&score) {
            return Err(Error::Validation(format!(
                "{}:{line}: {}",
                path.display(),
                SeriesError::ScoreOutOfRange { date, score }
            )));
        }
        if rows.insert(date, score).is_some() {
            log::warn!("{}:{line}: duplicate date {date}, keeping the last row", path.display());
        }
    }
    Ok(SentimentSeries::new(symbol, rows)?)
}

pub fn save_scores(series: &SentimentSeries, path: &Path) -> Result<(), Error> {
    let mut out = String::from("Date,Score\n");
    for (date, score) in series.points() {
        out.push_str(&format!("{date},{score}\n"));
    }
    io::write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> Lexicon {
        Lexicon::new([("good", 1.9), ("bad", -2.5), ("great", 3.1), ("two", 2.0)]).unwrap()
    }

    #[test]
    fn compound_examples() {
        assert_eq!(lexicon_compound("", &lex()), 0.0);
        assert_eq!(lexicon_compound("nothing matches here", &lex()), 0.0);
        assert!((lexicon_compound("two", &lex()) - 2.0 / 19f64.sqrt()).abs() < 1e-12);
        assert!((lexicon_compound("two", &lex()) - 0.4588).abs() < 1e-4);
        let pm = Lexicon::new([("up", 1.3), ("down", -1.3)]).unwrap();
        assert_eq!(lexicon_compound("up, DOWN!", &pm), 0.0);
    }

    #[test]
    fn tokenizer_lowercases_and_splits_punctuation() {
        assert!((lexicon_compound("GOOD!!!", &lex()) - lexicon_compound("good", &lex())).abs() < 1e-15);
        assert!(lexicon_compound("not-bad", &lex()) < 0.0);
    }

    #[test]
    fn daily_examples() {
        let empty: [&str; 0] = [];
        assert_eq!(daily_compound(&empty, &lex()), 0.0);
        let d = score_day("X", NaiveDate::from_ymd_opt(2018, 3, 13).unwrap(), &empty, &lex());
        assert_eq!((d.score, d.comment_count), (0.0, 0));
        assert!((daily_compound(&["good"], &lex()) - 0.4404).abs() < 1e-4);
        let twice = daily_compound(&["good", "good"], &lex());
        assert!((twice - 3.8 / (3.8f64 * 3.8 + 15.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn lexicon_validation() {
        assert!(Lexicon::new([("x", 4.5)]).is_err());
        assert!(Lexicon::new([("x", 1.0), ("X", 2.0)]).is_err());
        assert!(Lexicon::new([("", 1.0)]).is_err());
        let parsed = Lexicon::parse("good\t1.9\t0.9\t[1,2]\nbad\t-2.5\n", Path::new("lex")).unwrap();
        assert_eq!(parsed.valence("good"), Some(1.9));
        assert!(Lexicon::parse("good 1.9\n", Path::new("lex")).is_err());
    }

    #[test]
    fn load_scores_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "Date,Score\n2018-03-13,0.889\n").unwrap();
        let s = load_scores(&path, "TSLA").unwrap();
        assert_eq!(s.score_on(NaiveDate::from_ymd_opt(2018, 3, 13).unwrap()), 0.889);

        std::fs::write(&path, "").unwrap();
        assert!(load_scores(&path, "TSLA").unwrap().is_empty());

        std::fs::write(&path, "Date,Score\n2018-03-13,1.5\n").unwrap();
        assert!(matches!(load_scores(&path, "TSLA"), Err(Error::Validation(_))));

        std::fs::write(&path, "Date,Score\n2018-03-13,0.1\n2018-03-14,abc\n").unwrap();
        match load_scores(&path, "TSLA") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }

        std::fs::write(&path, "Date,Score\n2018-03-14,0.2\n2018-03-13,0.1\n2018-03-14,-0.3\n").unwrap();
        let s = load_scores(&path, "TSLA").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.score_on(NaiveDate::from_ymd_opt(2018, 3, 14).unwrap()), -0.3);
    }

    #[test]
    fn comments_to_series() {
        let d1 = NaiveDate::from_ymd_opt(2018, 1, 2).unwrap();
        let d2 = NaiveDate::from_ymd_opt(2018, 1, 3).unwrap();
        let comments = vec![
            Comment { date: d2, symbol: "A".into(), body: "bad".into() },
            Comment { date: d1, symbol: "A".into(), body: "good".into() },
            Comment { date: d1, symbol: "A".into(), body: "great".into() },
            Comment { date: d1, symbol: "B".into(), body: "bad".into() },
        ];
        let s = series_from_comments("A", &comments, &lex()).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.score_on(d1) - normalize_compound(5.0)).abs() < 1e-12);
        assert!(s.score_on(d2) < 0.0);
    }
}

//! Synthetic demo dataset: five symbols in two industries over 2018-2019.
//!
//! Daily returns follow a seeded AR(1) with Gaussian noise, clipped to 4.5%
//! in magnitude, plus a handful of 8-15% shock days per year. Sentiment
//! tracks the day's return through a noisy tanh and is absent on ~30% of
//! days. Three symbols ship precomputed scores, one ships raw comments to be
//! scored with the bundled lexicon, and one has no sentiment at all.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Error;
use crate::io;
use crate::sentiment::Comment;

pub const SAMPLE_SEED: u64 = 20_180_102;
pub const FIRST_YEAR: i32 = 2018;
pub const LAST_YEAR: i32 = 2019;
const NOISE_SD: f64 = 0.012;
const RETURN_CLIP: f64 = 0.045;
const SENTIMENT_GAIN: f64 = 20.0;
const SHOCKS_PER_YEAR: std::ops::RangeInclusive<usize> = 18..=22;
const SHOCK_SPACING: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSentiment {
    Scores,
    Comments,
    None,
}

#[derive(Debug, Clone, Copy)]
pub struct SampleSymbol {
    pub symbol: &'static str,
    pub industry: &'static str,
    pub phi: f64,
    pub start_price: f64,
    pub sentiment: SampleSentiment,
}

pub const SAMPLE_SYMBOLS: [SampleSymbol; 5] = [
    SampleSymbol { symbol: "AIRA", industry: "Airlines", phi: 0.05, start_price: 54.2, sentiment: SampleSentiment::Scores },
    SampleSymbol { symbol: "AIRB", industry: "Airlines", phi: 0.15, start_price: 38.75, sentiment: SampleSentiment::Scores },
    SampleSymbol { symbol: "AIRC", industry: "Airlines", phi: 0.25, start_price: 71.1, sentiment: SampleSentiment::Scores },
    SampleSymbol { symbol: "BNKA", industry: "Banks", phi: 0.10, start_price: 102.4, sentiment: SampleSentiment::Comments },
    SampleSymbol { symbol: "BNKB", industry: "Banks", phi: 0.20, start_price: 61.9, sentiment: SampleSentiment::None },
];

const POSITIVE_WORDS: [&str; 10] = ["good", "great", "bullish", "rally", "gain", "strong", "buy", "moon", "profit", "win"];
const NEGATIVE_WORDS: [&str; 10] = ["bad", "crash", "bearish", "panic", "loss", "weak", "sell", "dump", "fear", "worst"];
const FILLER_WORDS: [&str; 10] = ["the", "stock", "today", "shares", "market", "guys", "this", "is", "price", "chart"];

fn business_days() -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(FIRST_YEAR, 1, 1).expect("valid date");
    let end = NaiveDate::from_ymd_opt(LAST_YEAR, 12, 31).expect("valid date");
    let mut out = Vec::new();
    while d <= end {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("in range");
    }
    out
}

struct Generated {
    prices: Vec<(NaiveDate, f64)>,
    returns: Vec<f64>,
    sentiment: Vec<Option<f64>>,
}

fn generate_symbol(spec: &SampleSymbol, days: &[NaiveDate], rng: &mut ChaCha8Rng) -> Generated {
    let noise = Normal::new(0.0, NOISE_SD).expect("valid sd");
    let sent_noise = Normal::new(0.0, 0.3).expect("valid sd");
    let n = days.len();
    let mut shock = vec![0.0; n];
    for year in FIRST_YEAR..=LAST_YEAR {
        let idx: Vec<usize> = (0..n).filter(|&i| days[i].year() == year).collect();
        let count = rng.random_range(SHOCKS_PER_YEAR);
        let mut placed: Vec<usize> = Vec::new();
        while placed.len() < count {
            let i = idx[rng.random_range(5..idx.len() - 5)];
            // Keep shocks a full window apart so no window holds two.
            if placed.iter().any(|&j| i.abs_diff(j) < SHOCK_SPACING) {
                continue;
            }
            placed.push(i);
            let size = rng.random_range(0.08..0.15);
            shock[i] = if rng.random_bool(0.5) { size } else { -size };
        }
    }
    let mut returns = vec![0.0; n];
    let mut prev = 0.0;
    for i in 1..n {
        let r = if shock[i] != 0.0 {
            shock[i]
        } else {
            (spec.phi * prev + noise.sample(rng)).clamp(-RETURN_CLIP, RETURN_CLIP)
        };
        returns[i] = r;
        prev = r;
    }
    let mut level = spec.start_price;
    let mut prices = Vec::with_capacity(n);
    for i in 0..n {
        level *= 1.0 + returns[i];
        // Stored prices are rounded; returns are recomputed from them later.
        prices.push((days[i], (level * 1e4).round() / 1e4));
    }
    let sentiment = returns
        .iter()
        .map(|r| {
            let s = (SENTIMENT_GAIN * r + sent_noise.sample(rng)).tanh();
            (!rng.random_bool(0.3)).then_some((s * 1e4).round() / 1e4)
        })
        .collect();
    Generated {
        prices,
        returns,
        sentiment,
    }
}

fn comments_for(symbol: &str, days: &[NaiveDate], g: &Generated, rng: &mut ChaCha8Rng) -> Vec<Comment> {
    let mut out = Vec::new();
    for (i, d) in days.iter().enumerate() {
        if g.sentiment[i].is_none() {
            continue;
        }
        let lean = (SENTIMENT_GAIN * g.returns[i]).tanh();
        for _ in 0..rng.random_range(1..=3) {
            let mut words = Vec::new();
            for _ in 0..rng.random_range(3..=6) {
                let u: f64 = rng.random_range(-1.0..1.0);
                let pool: &[&str] = if u < lean - 0.6 {
                    &NEGATIVE_WORDS
                } else if u > lean + 0.6 {
                    &POSITIVE_WORDS
                } else if rng.random_bool(0.5) {
                    &FILLER_WORDS
                } else if lean >= 0.0 {
                    &POSITIVE_WORDS
                } else {
                    &NEGATIVE_WORDS
                };
                words.push(*pool.choose(rng).expect("non-empty"));
            }
            out.push(Comment {
                date: *d,
                symbol: symbol.to_owned(),
                body: words.join(" "),
            });
        }
    }
    out
}

fn config_text() -> String {
    let mut s = String::from(
        "# Demo experiment on the bundled synthetic data.\n\
         training_year = 2018\n\
         fallback_year = 2017\n\
         train_window_year = 2018\n\
         test_window_year = 2019\n\
         outlier_threshold = 2.0\n\
         exog_policy = \"hold-last\"\n\
         scales = [\"universal\", \"industry\", \"single\"]\n\
         models = [\"sarimax\", \"lstm\"]\n\
         seed = 7\n\
         \n\
         [lstm]\n\
         epochs = 100\n\
         \n\
         [paths]\n\
         prices = \"prices\"\n\
         sentiments = \"sentiments\"\n\
         comments = \"comments.jsonl\"\n\
         lexicon = \"../lexicon.tsv\"\n\
         output = \"../../../../target/sample-run\"\n",
    );
    for spec in &SAMPLE_SYMBOLS {
        let _ = write!(s, "\n[[symbols]]\nsymbol = \"{}\"\nindustry = \"{}\"\n", spec.symbol, spec.industry);
    }
    s
}

/// The sample dataset as relative path -> file contents.
pub fn sample_files() -> BTreeMap<PathBuf, String> {
    let days = business_days();
    let mut files = BTreeMap::new();
    let mut comments = Vec::new();
    for (k, spec) in SAMPLE_SYMBOLS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED + k as u64);
        let g = generate_symbol(spec, &days, &mut rng);
        let mut prices = String::from("Date,AdjClose\n");
        for (d, p) in &g.prices {
            let _ = writeln!(prices, "{d},{p:.4}");
        }
        files.insert(PathBuf::from("prices").join(format!("{}.csv", spec.symbol)), prices);
        match spec.sentiment {
            SampleSentiment::Scores => {
                let mut text = String::from("Date,Score\n");
                for (d, s) in days.iter().zip(&g.sentiment) {
                    if let Some(s) = s {
                        let _ = writeln!(text, "{d},{s}");
                    }
                }
                files.insert(PathBuf::from("sentiments").join(format!("{}.csv", spec.symbol)), text);
            }
            SampleSentiment::Comments => comments.extend(comments_for(spec.symbol, &days, &g, &mut rng)),
            SampleSentiment::None => {}
        }
    }
    let mut jsonl = String::new();
    for c in &comments {
        jsonl.push_str(&serde_json::to_string(c).expect("comment serializes"));
        jsonl.push('\n');
    }
    files.insert(PathBuf::from("comments.jsonl"), jsonl);
    files.insert(PathBuf::from("config.toml"), config_text());
    files
}

/// Writes the sample dataset under `dir`.
pub fn write_sample(dir: &Path) -> Result<(), Error> {
    for (rel, text) in sample_files() {
        io::write_atomic(&dir.join(rel), text.as_bytes())?;
    }
    Ok(())
}

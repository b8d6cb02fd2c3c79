//! Experiment configuration, read from a TOML file.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::taxonomy::Taxonomy;
use crate::error::Error;
use crate::io;
use crate::lstm::TrainConfig;
use crate::outlier::DEFAULT_THRESHOLD;
use crate::sarimax::{ExogPolicy, SarimaxGrid};

/// Which symbols' windows are pooled to train one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Universal,
    Industry,
    Single,
}

impl Scale {
    pub const ALL: [Scale; 3] = [Scale::Universal, Scale::Industry, Scale::Single];

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Universal => "universal",
            Scale::Industry => "industry",
            Scale::Single => "single",
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scale::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown scale {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelClass {
    Sarimax,
    Lstm,
}

impl ModelClass {
    pub const ALL: [ModelClass; 2] = [ModelClass::Sarimax, ModelClass::Lstm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelClass::Sarimax => "sarimax",
            ModelClass::Lstm => "lstm",
        }
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelClass::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown model class {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolEntry {
    pub symbol: String,
    /// Looked up in the taxonomy when omitted.
    #[serde(default)]
    pub industry: Option<String>,
}

/// Input and output locations. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Directory of `<SYMBOL>.csv` price files.
    pub prices: PathBuf,
    /// Directory of `<SYMBOL>.csv` sentiment score files.
    #[serde(default)]
    pub sentiments: Option<PathBuf>,
    /// JSON-lines file of raw comments, scored with `lexicon`.
    #[serde(default)]
    pub comments: Option<PathBuf>,
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    pub output: PathBuf,
    /// Industry taxonomy; the bundled table when omitted.
    #[serde(default)]
    pub industries: Option<PathBuf>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_scales() -> Vec<Scale> {
    Scale::ALL.to_vec()
}

fn default_models() -> Vec<ModelClass> {
    ModelClass::ALL.to_vec()
}

fn default_max_order_sum() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Year whose prices fit the outlier-detection ARIMA model.
    pub training_year: i32,
    /// Used instead when the training year cannot be fitted.
    pub fallback_year: i32,
    /// Windows from this year train the forecasters.
    pub train_window_year: i32,
    /// Windows from this year are forecast and scored.
    pub test_window_year: i32,
    #[serde(default = "default_threshold")]
    pub outlier_threshold: f64,
    #[serde(default = "default_max_order_sum")]
    pub max_order_sum: usize,
    #[serde(default)]
    pub exog_policy: ExogPolicy,
    #[serde(default)]
    pub sarimax_grid: SarimaxGrid,
    #[serde(default = "default_scales")]
    pub scales: Vec<Scale>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelClass>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lstm: TrainConfig,
    pub paths: Paths,
    pub symbols: Vec<SymbolEntry>,
}

/// A configured symbol with its resolved industry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSpec {
    pub symbol: String,
    pub industry: String,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, Error> {
        let mut cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))?;
        let base = origin.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut cfg.paths;
        resolve(&mut paths.prices);
        resolve(&mut paths.output);
        for p in [
            &mut paths.sentiments,
            &mut paths.comments,
            &mut paths.lexicon,
            &mut paths.industries,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        Self::parse(&io::read_to_string(path)?, path)
    }

    /// The training config the LSTM actually uses: the `[lstm]` table with the
    /// run seed.
    pub fn lstm_train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.lstm
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let fail = |m: String| Err(Error::Config(m));
        if self.train_window_year == self.test_window_year {
            return fail("train_window_year and test_window_year must differ".into());
        }
        if !(self.outlier_threshold > 0.0) {
            return fail(format!("outlier_threshold must be positive, got {}", self.outlier_threshold));
        }
        if self.max_order_sum == 0 {
            return fail("max_order_sum must be at least 1".into());
        }
        if self.scales.is_empty() || self.models.is_empty() {
            return fail("scales and models must not be empty".into());
        }
        if self.symbols.is_empty() {
            return fail("no symbols configured".into());
        }
        let mut seen = HashSet::new();
        for s in &self.symbols {
            if !seen.insert(&s.symbol) {
                return fail(format!("symbol {} configured twice", s.symbol));
            }
        }
        if self.paths.comments.is_some() != self.paths.lexicon.is_some() {
            return fail("paths.comments and paths.lexicon must be given together".into());
        }
        self.lstm
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn taxonomy(&self) -> Result<Taxonomy, Error> {
        match &self.paths.industries {
            Some(p) => Taxonomy::read(p),
            None => Ok(Taxonomy::default()),
        }
    }

    /// Every configured symbol with exactly one industry.
    pub fn resolve_symbols(&self) -> Result<Vec<SymbolSpec>, Error> {
        let taxonomy = self.taxonomy()?;
        self.symbols
            .iter()
            .map(|s| {
                let industry = match (&s.industry, taxonomy.industry_of(&s.symbol)) {
                    (Some(given), Some(listed)) if given != listed => {
                        return Err(Error::Config(format!(
                            "{} is configured under {given:?} but the taxonomy lists {listed:?}",
                            s.symbol
                        )))
                    }
                    (Some(given), _) => given.clone(),
                    (None, Some(listed)) => listed.to_owned(),
                    (None, None) => {
                        return Err(Error::Config(format!("no industry known for {}", s.symbol)))
                    }
                };
                Ok(SymbolSpec {
                    symbol: s.symbol.clone(),
                    industry,
                })
            })
            .collect()
    }
}

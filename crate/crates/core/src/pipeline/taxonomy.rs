//! Symbol to industry mapping, loaded from TOML.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::io;

const DEFAULT_TAXONOMY: &str = include_str!("../../data/industries.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Industry {
    pub name: String,
    pub symbols: Vec<String>,
    /// Symbols known to need the fallback training year.
    #[serde(default)]
    pub fallback: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    industries: Vec<Industry>,
    by_symbol: HashMap<String, usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyDoc {
    industry: Vec<Industry>,
}

impl Taxonomy {
    pub fn new(industries: Vec<Industry>) -> Result<Self, Error> {
        let mut by_symbol = HashMap::new();
        for (i, ind) in industries.iter().enumerate() {
            for s in &ind.symbols {
                if let Some(prev) = by_symbol.insert(s.clone(), i) {
                    return Err(Error::Validation(format!(
                        "symbol {s} listed under both {:?} and {:?}",
                        industries[prev].name, ind.name
                    )));
                }
            }
            if let Some(f) = ind.fallback.iter().find(|f| !ind.symbols.contains(f)) {
                return Err(Error::Validation(format!(
                    "fallback symbol {f} is not in industry {:?}",
                    ind.name
                )));
            }
        }
        Ok(Self {
            industries,
            by_symbol,
        })
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self, Error> {
        let doc: TaxonomyDoc =
            toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))?;
        Self::new(doc.industry)
    }

    pub fn read(path: &Path) -> Result<Self, Error> {
        Self::parse(&io::read_to_string(path)?, path)
    }

    pub fn industries(&self) -> &[Industry] {
        &self.industries
    }

    pub fn industry_of(&self, symbol: &str) -> Option<&str> {
        self.by_symbol
            .get(symbol)
            .map(|&i| self.industries[i].name.as_str())
    }

    pub fn n_symbols(&self) -> usize {
        self.by_symbol.len()
    }
}

impl Default for Taxonomy {
    /// The bundled 20-industry, 100-symbol table.
    fn default() -> Self {
        Self::parse(DEFAULT_TAXONOMY, Path::new("industries.toml")).expect("bundled taxonomy is valid")
    }
}

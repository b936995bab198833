use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{EtfId, IngestError, Symbol};

/// ETF symbol to sector assignment.
///
/// Config layout (TOML):
///
/// ```toml
/// [[etf]]
/// symbol = "XLF"
/// sector = "financials"
/// ```
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SectorMap {
    entries: BTreeMap<Symbol, String>,
}

#[derive(Deserialize)]
struct SectorFile {
    #[serde(default)]
    etf: Vec<SectorEntry>,
}

#[derive(Deserialize)]
struct SectorEntry {
    symbol: String,
    sector: String,
}

impl SectorMap {
    pub fn from_entries<I, S, T>(entries: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (sym, sector) in entries {
            let sym = Symbol::new(sym)?;
            let sector: String = sector.into();
            if sector.trim().is_empty() {
                return Err(IngestError::SectorConfig(format!("{sym}: empty sector name")));
            }
            if map.insert(sym.clone(), sector).is_some() {
                return Err(IngestError::DuplicateEtf(sym.to_string()));
            }
        }
        Ok(SectorMap { entries: map })
    }

    pub fn lookup(&self, symbol: &str) -> Option<&str> {
        let sym = Symbol::new(symbol).ok()?;
        self.entries.get(&sym).map(String::as_str)
    }

    pub fn etf(&self, symbol: &Symbol) -> Result<EtfId, IngestError> {
        self.entries
            .get(symbol)
            .map(|sector| EtfId {
                symbol: symbol.clone(),
                sector: sector.clone(),
            })
            .ok_or_else(|| IngestError::MissingEtf(symbol.to_string()))
    }

    pub fn require(&self, symbols: &[Symbol]) -> Result<(), IngestError> {
        match symbols.iter().find(|s| !self.entries.contains_key(*s)) {
            Some(s) => Err(IngestError::MissingEtf(s.to_string())),
            None => Ok(()),
        }
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.entries.keys()
    }

    pub fn sectors(&self) -> std::collections::BTreeSet<String> {
        self.entries.values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn parse_sector_map(text: &str) -> Result<SectorMap, IngestError> {
    let file: SectorFile = toml::from_str(text).map_err(|e| IngestError::SectorConfig(e.to_string()))?;
    SectorMap::from_entries(file.etf.into_iter().map(|e| (e.symbol, e.sector)))
}

/// Load the sector map and check that every requested symbol is present.
pub fn load_sector_map(path: &Path, requested: &[Symbol]) -> Result<SectorMap, IngestError> {
    let text = std::fs::read_to_string(path)?;
    let map = parse_sector_map(&text)?;
    map.require(requested)?;
    Ok(map)
}

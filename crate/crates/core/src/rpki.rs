//! Route origin validation against a validated ROA cache export.
//!
//! ROAs are loaded from the CSV format relying-party software exports
//! (`ASN,IP Prefix,Max Length,Trust Anchor`) and indexed in a prefix trie.
//! Classification follows the usual three-state origin validation rules:
//!
//! * a ROA *covers* a route if its prefix covers the route's prefix;
//! * a covering ROA *matches* if the route's length is within the ROA's
//!   `max_length` and the route's origin equals the ROA's ASN;
//! * Valid if some ROA matches, Invalid if ROAs cover but none match,
//!   NotFound if nothing covers.
//!
//! A route whose origin cannot be determined (AS_SET tail, empty path)
//! never matches, so it is Invalid when covered.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Asn, IpPrefix, OriginResult};
use crate::trie::PrefixTrie;

pub const ROA_CSV_HEADER: [&str; 4] = ["ASN", "IP Prefix", "Max Length", "Trust Anchor"];

//------------ Roa -----------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Roa {
    pub prefix: IpPrefix,
    pub max_length: u8,
    pub origin: Asn,
    pub trust_anchor: String,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("max length {max_length} outside {prefix_len}..={family_max}")]
pub struct MaxLengthError {
    pub prefix_len: u8,
    pub max_length: u8,
    pub family_max: u8,
}

impl Roa {
    pub fn new(
        prefix: IpPrefix,
        max_length: u8,
        origin: Asn,
        trust_anchor: impl Into<String>,
    ) -> Result<Self, MaxLengthError> {
        let family_max = prefix.afi().max_len();
        if max_length < prefix.len() || max_length > family_max {
            return Err(MaxLengthError {
                prefix_len: prefix.len(),
                max_length,
                family_max,
            });
        }
        Ok(Roa {
            prefix,
            max_length,
            origin,
            trust_anchor: trust_anchor.into(),
        })
    }

    /// Whether this ROA authorizes `origin` announcing `prefix`.
    pub fn matches(&self, prefix: &IpPrefix, origin: OriginResult) -> bool {
        self.prefix.covers(prefix)
            && prefix.len() <= self.max_length
            && origin == OriginResult::Origin(self.origin)
    }
}

impl fmt::Display for Roa {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.origin, self.prefix, self.max_length, self.trust_anchor
        )
    }
}

//------------ ValidationState / Outcome -------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidationState {
    Valid,
    Invalid,
    NotFound,
}

impl fmt::Display for ValidationState {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            ValidationState::Valid => "Valid",
            ValidationState::Invalid => "Invalid",
            ValidationState::NotFound => "NotFound",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OriginValidationOutcome {
    pub state: ValidationState,
    /// Covering ROAs that authorize the route. Sorted.
    pub matched: Vec<Roa>,
    /// All ROAs whose prefix covers the route. Sorted.
    pub covering: Vec<Roa>,
}

impl OriginValidationOutcome {
    pub fn not_found() -> Self {
        OriginValidationOutcome {
            state: ValidationState::NotFound,
            matched: Vec::new(),
            covering: Vec::new(),
        }
    }
}

//------------ RoaStore ------------------------------------------------------

/// Immutable-after-load ROA index.
///
/// Reloading builds a new store; callers swap it in (e.g. behind an `Arc`).
#[derive(Clone, Debug, Default)]
pub struct RoaStore {
    trie: PrefixTrie<Vec<Roa>>,
    count: usize,
}

impl RoaStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_roas(roas: impl IntoIterator<Item = Roa>) -> Self {
        let mut store = RoaStore::new();
        for roa in roas {
            store.insert(roa);
        }
        store
    }

    /// Adds a ROA. Exact duplicates are dropped and reported as `false`.
    pub fn insert(&mut self, roa: Roa) -> bool {
        let slot = self.trie.get_or_insert_with(roa.prefix, Vec::new);
        match slot.binary_search(&roa) {
            Ok(_) => false,
            Err(pos) => {
                slot.insert(pos, roa);
                self.count += 1;
                true
            }
        }
    }

    pub fn remove(&mut self, roa: &Roa) -> bool {
        let Some(slot) = self.trie.get_mut(&roa.prefix) else {
            return false;
        };
        let Ok(pos) = slot.binary_search(roa) else {
            return false;
        };
        slot.remove(pos);
        if slot.is_empty() {
            self.trie.remove(&roa.prefix);
        }
        self.count -= 1;
        true
    }

    /// Number of distinct ROAs held.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn roas(&self) -> impl Iterator<Item = &Roa> + '_ {
        self.trie.iter().flat_map(|(_, v)| v.iter())
    }

    /// All ROAs whose prefix covers `prefix`, shortest ROA prefix first.
    pub fn covering<'a>(&'a self, prefix: &IpPrefix) -> impl Iterator<Item = &'a Roa> + 'a {
        self.trie.covering(prefix).flat_map(|(_, v)| v.iter())
    }

    pub fn is_covered(&self, prefix: &IpPrefix) -> bool {
        self.trie.covering(prefix).next().is_some()
    }

    pub fn validate_origin(&self, prefix: &IpPrefix, origin: OriginResult) -> OriginValidationOutcome {
        let mut covering: Vec<Roa> = self.covering(prefix).cloned().collect();
        covering.sort();
        let matched: Vec<Roa> = covering
            .iter()
            .filter(|roa| roa.matches(prefix, origin))
            .cloned()
            .collect();
        let state = if !matched.is_empty() {
            ValidationState::Valid
        } else if !covering.is_empty() {
            ValidationState::Invalid
        } else {
            ValidationState::NotFound
        };
        OriginValidationOutcome {
            state,
            matched,
            covering,
        }
    }

    /// Cheaper classification that skips collecting the ROA lists.
    pub fn state_of(&self, prefix: &IpPrefix, origin: OriginResult) -> ValidationState {
        let mut covered = false;
        for roa in self.covering(prefix) {
            if roa.matches(prefix, origin) {
                return ValidationState::Valid;
            }
            covered = true;
        }
        if covered {
            ValidationState::Invalid
        } else {
            ValidationState::NotFound
        }
    }

    /// Fraction of `universe` with at least one covering ROA.
    pub fn coverage_stats(&self, universe: &[IpPrefix]) -> Result<CoverageStats, CoverageError> {
        if universe.is_empty() {
            return Err(CoverageError::EmptyUniverse);
        }
        let covered = universe.iter().filter(|p| self.is_covered(p)).count();
        Ok(CoverageStats {
            universe: universe.len(),
            covered,
            states: None,
        })
    }

    /// Like [`coverage_stats`](Self::coverage_stats) and also classifies
    /// each route.
    pub fn coverage_stats_with_origins(
        &self,
        routes: &[(IpPrefix, OriginResult)],
    ) -> Result<CoverageStats, CoverageError> {
        if routes.is_empty() {
            return Err(CoverageError::EmptyUniverse);
        }
        let mut states = StateCounts::default();
        let mut covered = 0;
        for (prefix, origin) in routes {
            match self.state_of(prefix, *origin) {
                ValidationState::Valid => states.valid += 1,
                ValidationState::Invalid => states.invalid += 1,
                ValidationState::NotFound => states.not_found += 1,
            }
            if self.is_covered(prefix) {
                covered += 1;
            }
        }
        Ok(CoverageStats {
            universe: routes.len(),
            covered,
            states: Some(states),
        })
    }
}

//------------ Coverage ------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CoverageError {
    #[error("coverage universe is empty")]
    EmptyUniverse,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCounts {
    pub valid: usize,
    pub invalid: usize,
    pub not_found: usize,
}

/// Exact counts; the fraction is derived from them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub universe: usize,
    pub covered: usize,
    pub states: Option<StateCounts>,
}

impl CoverageStats {
    pub fn fraction(&self) -> f64 {
        self.covered as f64 / self.universe as f64
    }
}

impl fmt::Display for CoverageStats {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(
            f,
            "coverage {:.3} ({}/{})",
            self.fraction(),
            self.covered,
            self.universe
        )?;
        if let Some(s) = self.states {
            write!(
                f,
                " valid={} invalid={} not-found={}",
                s.valid, s.invalid, s.not_found
            )?;
        }
        Ok(())
    }
}

//------------ CSV loading ---------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RoaCsvError {
    #[error("missing header row \"ASN,IP Prefix,Max Length,Trust Anchor\"")]
    MissingHeader,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct RowError {
    pub line: u64,
    pub reason: String,
}

/// A loaded store plus the rows that were rejected.
#[derive(Clone, Debug)]
pub struct RoaLoad {
    pub store: RoaStore,
    pub rejected: Vec<RowError>,
    /// Rows accepted but identical to an earlier row.
    pub duplicates: usize,
}

pub fn load_roa_csv(text: &str) -> Result<RoaLoad, RoaCsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    match reader.headers() {
        Ok(h) if h.iter().eq(ROA_CSV_HEADER.iter().copied()) => {}
        _ => return Err(RoaCsvError::MissingHeader),
    }

    let mut store = RoaStore::new();
    let mut rejected = Vec::new();
    let mut duplicates = 0;
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                rejected.push(RowError {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&record) {
            Ok(roa) => {
                if !store.insert(roa) {
                    duplicates += 1;
                }
            }
            Err(reason) => rejected.push(RowError { line, reason }),
        }
    }
    Ok(RoaLoad {
        store,
        rejected,
        duplicates,
    })
}

fn parse_row(record: &csv::StringRecord) -> Result<Roa, String> {
    if record.len() != 4 {
        return Err(format!("expected 4 fields, found {}", record.len()));
    }
    let origin: Asn = record[0].parse().map_err(|e| format!("{e}"))?;
    let prefix: IpPrefix = record[1].parse().map_err(|e| format!("{e}"))?;
    // An absent max length means exactly the prefix length.
    let max_length = if record[2].is_empty() {
        prefix.len()
    } else {
        record[2]
            .parse::<u8>()
            .map_err(|_| format!("invalid max length '{}'", &record[2]))?
    };
    Roa::new(prefix, max_length, origin, &record[3]).map_err(|e| e.to_string())
}

//============ Tests =========================================================

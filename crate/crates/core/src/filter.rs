//! Member prefix whitelists and their cluster merge.
//!
//! A whitelist lists, per IXP member, the prefixes that member may
//! announce, optionally allowing more-specifics down to a length. Whitelists
//! from several IXPs merge by per-member union into a cluster whitelist.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Asn, IpPrefix, RouteAnnouncement};

//------------ Types ---------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WhitelistEntry {
    pub member: Asn,
    pub allowed: BTreeSet<IpPrefix>,
    pub allow_more_specifics_up_to: Option<u8>,
}

impl WhitelistEntry {
    pub fn new(
        member: Asn,
        allowed: impl IntoIterator<Item = IpPrefix>,
        allow_more_specifics_up_to: Option<u8>,
    ) -> Self {
        WhitelistEntry {
            member,
            allowed: allowed.into_iter().collect(),
            allow_more_specifics_up_to,
        }
    }

    /// The allowed prefix that authorizes `prefix`, preferring the most
    /// specific one.
    pub fn authorizing(&self, prefix: &IpPrefix) -> Option<IpPrefix> {
        if self.allowed.contains(prefix) {
            return Some(*prefix);
        }
        let max = self.allow_more_specifics_up_to?;
        if prefix.len() > max {
            return None;
        }
        (0..prefix.len())
            .rev()
            .filter_map(|len| prefix.truncate(len))
            .find(|candidate| self.allowed.contains(candidate))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WhitelistDocument", into = "WhitelistDocument")]
pub struct Whitelist {
    pub source_ixp: String,
    pub version: u64,
    pub entries: BTreeMap<Asn, WhitelistEntry>,
}

impl Whitelist {
    pub fn new(source_ixp: impl Into<String>, version: u64) -> Self {
        Whitelist {
            source_ixp: source_ixp.into(),
            version,
            entries: BTreeMap::new(),
        }
    }

    /// Adds an entry; a second entry for the same member is an error.
    pub fn add(&mut self, entry: WhitelistEntry) -> Result<(), WhitelistError> {
        if self.entries.contains_key(&entry.member) {
            return Err(WhitelistError::DuplicateMember(entry.member));
        }
        self.entries.insert(entry.member, entry);
        Ok(())
    }

    pub fn entry(&self, member: Asn) -> Option<&WhitelistEntry> {
        self.entries.get(&member)
    }

    pub fn check(&self, ann: &RouteAnnouncement) -> FilterResult {
        check_whitelist(self, ann)
    }

    /// Deterministic byte form: entries by member ASN, prefixes by their
    /// CIDR text. Source and version are not part of it.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        for entry in self.entries.values() {
            out.push_str(&format!("member {}", entry.member.value()));
            if let Some(max) = entry.allow_more_specifics_up_to {
                out.push_str(&format!(" up-to {max}"));
            }
            out.push('\n');
            let mut texts: Vec<String> = entry.allowed.iter().map(|p| p.to_string()).collect();
            texts.sort();
            for t in texts {
                out.push_str("  ");
                out.push_str(&t);
                out.push('\n');
            }
        }
        out.into_bytes()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&WhitelistDocument::from(self.clone()))
            .expect("whitelist document always serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum FilterResult {
    Pass { matched: IpPrefix },
    Violation,
    NoPolicy,
}

impl FilterResult {
    pub fn matched_entry(&self) -> Option<IpPrefix> {
        match self {
            FilterResult::Pass { matched } => Some(*matched),
            _ => None,
        }
    }
}

impl fmt::Display for FilterResult {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            FilterResult::Pass { matched } => write!(f, "pass({matched})"),
            FilterResult::Violation => f.write_str("violation"),
            FilterResult::NoPolicy => f.write_str("no-policy"),
        }
    }
}

//------------ Operations ----------------------------------------------------

/// Checks the announcing member against its whitelist entry. Withdrawals
/// are outside any policy and yield `NoPolicy`.
pub fn check_whitelist(wl: &Whitelist, ann: &RouteAnnouncement) -> FilterResult {
    if !ann.is_announce() {
        return FilterResult::NoPolicy;
    }
    match wl.entries.get(&ann.announcing_member) {
        None => FilterResult::NoPolicy,
        Some(entry) => match entry.authorizing(&ann.prefix) {
            Some(matched) => FilterResult::Pass { matched },
            None => FilterResult::Violation,
        },
    }
}

/// Per-member union of several whitelists. Returns `None` for no input.
///
/// The more-specifics bound is the largest bound present, raised to the
/// longest allowed prefix when union brought in a longer one.
pub fn merge_cluster<'a>(whitelists: impl IntoIterator<Item = &'a Whitelist>) -> Option<Whitelist> {
    let mut iter = whitelists.into_iter().peekable();
    iter.peek()?;
    let mut merged = Whitelist::new("cluster", 0);
    for wl in iter {
        merged.version = merged.version.max(wl.version);
        for entry in wl.entries.values() {
            let slot = merged
                .entries
                .entry(entry.member)
                .or_insert_with(|| WhitelistEntry::new(entry.member, [], None));
            slot.allowed.extend(entry.allowed.iter().copied());
            slot.allow_more_specifics_up_to = match (slot.allow_more_specifics_up_to, entry.allow_more_specifics_up_to) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
        }
    }
    for entry in merged.entries.values_mut() {
        if let Some(max) = entry.allow_more_specifics_up_to.as_mut() {
            let longest = entry.allowed.iter().map(|p| p.len()).max().unwrap_or(0);
            *max = (*max).max(longest);
        }
    }
    Some(merged)
}

//------------ Document format -----------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum WhitelistError {
    #[error("schema error at {path}: {reason}")]
    SchemaError { path: String, reason: String },
    #[error("duplicate member {0}")]
    DuplicateMember(Asn),
}

fn schema(path: impl Into<String>, reason: impl Into<String>) -> WhitelistError {
    WhitelistError::SchemaError {
        path: path.into(),
        reason: reason.into(),
    }
}

/// On-disk shape of a whitelist file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhitelistDocument {
    pub ixp: String,
    pub version: u64,
    #[serde(default)]
    pub members: Vec<MemberDocument>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberDocument {
    pub asn: u32,
    pub prefixes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_more_specifics_up_to: Option<u8>,
}

impl TryFrom<WhitelistDocument> for Whitelist {
    type Error = WhitelistError;

    fn try_from(doc: WhitelistDocument) -> Result<Self, Self::Error> {
        let mut wl = Whitelist::new(doc.ixp, doc.version);
        for (i, member) in doc.members.into_iter().enumerate() {
            let mut allowed = BTreeSet::new();
            for (j, text) in member.prefixes.iter().enumerate() {
                let prefix: IpPrefix = text
                    .parse()
                    .map_err(|e| schema(format!("members[{i}].prefixes[{j}]"), format!("{e}")))?;
                allowed.insert(prefix);
            }
            if let Some(max) = member.allow_more_specifics_up_to {
                let longest = allowed.iter().map(|p| p.len()).max().unwrap_or(0);
                if max < longest || max > 128 {
                    return Err(schema(
                        format!("members[{i}].allow_more_specifics_up_to"),
                        format!("{max} is not within {longest}..=128"),
                    ));
                }
            }
            wl.add(WhitelistEntry {
                member: Asn::new(member.asn),
                allowed,
                allow_more_specifics_up_to: member.allow_more_specifics_up_to,
            })?;
        }
        Ok(wl)
    }
}

impl From<Whitelist> for WhitelistDocument {
    fn from(wl: Whitelist) -> Self {
        WhitelistDocument {
            ixp: wl.source_ixp,
            version: wl.version,
            members: wl
                .entries
                .into_values()
                .map(|e| MemberDocument {
                    asn: e.member.value(),
                    prefixes: e.allowed.iter().map(|p| p.to_string()).collect(),
                    allow_more_specifics_up_to: e.allow_more_specifics_up_to,
                })
                .collect(),
        }
    }
}

/// Parses a whitelist file (TOML).
pub fn load_whitelist(text: &str) -> Result<Whitelist, WhitelistError> {
    let doc: WhitelistDocument = toml::from_str(text).map_err(|e| {
        let path = e.span().map(|s| format!("byte {}", s.start)).unwrap_or_default();
        schema(path, e.message())
    })?;
    Whitelist::try_from(doc)
}

//============ Tests =========================================================

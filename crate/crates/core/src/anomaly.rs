//! Observation history and the three hijack signatures run against it.
//!
//! * MOAS: a new origin appears for a prefix that has been stable under a
//!   different origin.
//! * Sub-prefix: a more specific of a stable prefix appears with an origin
//!   outside that prefix's stable origins.
//! * New edge: the path contains an AS adjacency never seen before, once
//!   the history is warmed up.
//!
//! The history is fed from local announcements and from observations
//! pushed by federated IXPs, so detection sees the union of both.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::federation::{IxpId, ObservationClaim};
use crate::model::{Asn, IpPrefix, RouteAnnouncement};
use crate::trie::PrefixTrie;

//------------ Parameters ----------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalyParams {
    /// Seconds an origin must have been observed to count as stable.
    pub stability_window: u64,
    /// Observations required before new-edge alarms are raised.
    pub warmup_observations: u64,
    /// Optional cap on stored prefixes; least recently updated go first.
    pub max_prefixes: Option<usize>,
}

impl Default for AnomalyParams {
    fn default() -> Self {
        AnomalyParams {
            stability_window: 86_400,
            warmup_observations: 1_000,
            max_prefixes: None,
        }
    }
}

//------------ History -------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OriginRecord {
    pub first_seen: u64,
    pub last_seen: u64,
    pub sources: BTreeSet<IxpId>,
}

impl OriginRecord {
    pub fn is_stable(&self, window: u64) -> bool {
        self.last_seen - self.first_seen >= window
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrefixRecord {
    pub origins: BTreeMap<Asn, OriginRecord>,
    touched: u64,
}

impl PrefixRecord {
    pub fn stable_origins(&self, window: u64) -> BTreeSet<Asn> {
        self.origins
            .iter()
            .filter(|(_, r)| r.is_stable(window))
            .map(|(a, _)| *a)
            .collect()
    }
}

/// Per-prefix origin memory plus the set of AS adjacencies seen.
///
/// Single writer; detectors only read.
#[derive(Clone, Debug, Default)]
pub struct ObservationHistory {
    prefixes: PrefixTrie<PrefixRecord>,
    adjacency: HashSet<(Asn, Asn)>,
    observations: u64,
    clock: u64,
    max_prefixes: Option<usize>,
    recency: BTreeSet<(u64, IpPrefix)>,
    tick: u64,
}

impl ObservationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_params(params: &AnomalyParams) -> Self {
        ObservationHistory {
            max_prefixes: params.max_prefixes,
            ..Self::default()
        }
    }

    /// Observations that changed the history. Re-recording an identical
    /// announcement is a no-op and does not count.
    pub fn observations(&self) -> u64 {
        self.observations
    }

    /// Latest timestamp recorded.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn prefix_count(&self) -> usize {
        self.prefixes.len()
    }

    pub fn record(&self, prefix: &IpPrefix) -> Option<&PrefixRecord> {
        self.prefixes.get(prefix)
    }

    pub fn covering<'a>(&'a self, prefix: &IpPrefix) -> impl Iterator<Item = (IpPrefix, &'a PrefixRecord)> + 'a {
        self.prefixes.covering(prefix)
    }

    pub fn has_edge(&self, a: Asn, b: Asn) -> bool {
        self.adjacency.contains(&(a.min(b), a.max(b)))
    }

    pub fn edges(&self) -> BTreeSet<(Asn, Asn)> {
        self.adjacency.iter().copied().collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = (IpPrefix, &PrefixRecord)> + '_ {
        self.prefixes.iter()
    }

    /// Records an announcement seen at `source`. Withdrawals are ignored.
    pub fn record_observation(&mut self, ann: &RouteAnnouncement, source: &IxpId) {
        if !ann.is_announce() {
            return;
        }
        let mut changed = false;
        if let Some(origin) = ann.origin().asn() {
            changed |= self.touch(ann.prefix, origin, ann.timestamp, ann.timestamp, source);
        }
        for edge in ann.as_path.edges() {
            changed |= self.adjacency.insert(edge);
        }
        if changed {
            self.observations += 1;
        }
        self.clock = self.clock.max(ann.timestamp);
    }

    /// Folds a peer's claim in, tagged with the claimant.
    pub fn record_claim(&mut self, claim: &ObservationClaim) {
        let mut changed = false;
        for origin in &claim.origins_seen {
            changed |= self.touch(claim.prefix, *origin, claim.first_seen, claim.last_seen, &claim.claimant);
        }
        if changed {
            self.observations += 1;
        }
        self.clock = self.clock.max(claim.last_seen);
    }

    fn touch(&mut self, prefix: IpPrefix, origin: Asn, first: u64, last: u64, source: &IxpId) -> bool {
        let is_new_prefix = self.prefixes.get(&prefix).is_none();
        let record = self.prefixes.get_or_insert_with(prefix, PrefixRecord::default);
        let mut changed = false;
        match record.origins.get_mut(&origin) {
            Some(r) => {
                if first < r.first_seen {
                    r.first_seen = first;
                    changed = true;
                }
                if last > r.last_seen {
                    r.last_seen = last;
                    changed = true;
                }
                if !r.sources.contains(source) {
                    r.sources.insert(source.clone());
                    changed = true;
                }
            }
            None => {
                record.origins.insert(
                    origin,
                    OriginRecord {
                        first_seen: first,
                        last_seen: last,
                        sources: [source.clone()].into_iter().collect(),
                    },
                );
                changed = true;
            }
        }
        if changed {
            self.tick += 1;
            let old = std::mem::replace(&mut record.touched, self.tick);
            if self.max_prefixes.is_some() {
                if !is_new_prefix {
                    self.recency.remove(&(old, prefix));
                }
                self.recency.insert((self.tick, prefix));
                self.evict();
            }
        }
        changed
    }

    fn evict(&mut self) {
        let Some(cap) = self.max_prefixes else { return };
        while self.prefixes.len() > cap {
            let Some((_, victim)) = self.recency.pop_first() else { break };
            self.prefixes.remove(&victim);
        }
    }

    /// Claims for `prefix` and every stored prefix covering it.
    pub fn claims_for(&self, prefix: &IpPrefix, claimant: &IxpId) -> Vec<ObservationClaim> {
        self.prefixes
            .covering(prefix)
            .filter(|(_, rec)| !rec.origins.is_empty())
            .map(|(stored, rec)| ObservationClaim {
                prefix: stored,
                origins_seen: rec.origins.keys().copied().collect(),
                first_seen: rec.origins.values().map(|r| r.first_seen).min().unwrap_or(0),
                last_seen: rec.origins.values().map(|r| r.last_seen).max().unwrap_or(0),
                claimant: claimant.clone(),
            })
            .collect()
    }
}

//------------ Alarms --------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Critical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlarmKind {
    Moas,
    SubPrefix,
    NewEdge,
}

impl fmt::Display for AlarmKind {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            AlarmKind::Moas => "moas",
            AlarmKind::SubPrefix => "sub-prefix",
            AlarmKind::NewEdge => "new-edge",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlarmDetail {
    Moas {
        /// Stable origins the prefix was known under.
        established: Vec<Asn>,
        announced: Asn,
    },
    SubPrefix {
        /// Stable covering prefixes whose origins exclude `announced`.
        covering: Vec<IpPrefix>,
        expected: Vec<Asn>,
        announced: Asn,
    },
    NewEdge {
        edges: Vec<(Asn, Asn)>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alarm {
    pub prefix: IpPrefix,
    pub severity: Severity,
    #[serde(flatten)]
    pub detail: AlarmDetail,
}

impl Alarm {
    pub fn kind(&self) -> AlarmKind {
        match self.detail {
            AlarmDetail::Moas { .. } => AlarmKind::Moas,
            AlarmDetail::SubPrefix { .. } => AlarmKind::SubPrefix,
            AlarmDetail::NewEdge { .. } => AlarmKind::NewEdge,
        }
    }

    /// One log line: timestamp, kind, prefix, detail, severity.
    pub fn log_line(&self, timestamp: u64) -> String {
        format!(
            "ts={timestamp} kind={} prefix={} detail={} severity={}",
            self.kind(),
            self.prefix,
            self.detail_text(),
            serde_json::to_value(self.severity).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
        )
    }

    fn detail_text(&self) -> String {
        let asns = |v: &[Asn]| v.iter().map(|a| a.value().to_string()).collect::<Vec<_>>().join(",");
        match &self.detail {
            AlarmDetail::Moas { established, announced } => {
                format!("{}->{}", asns(established), announced.value())
            }
            AlarmDetail::SubPrefix { covering, expected, announced } => {
                let cov = covering.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
                format!("{cov}:{}->{}", asns(expected), announced.value())
            }
            AlarmDetail::NewEdge { edges } => edges
                .iter()
                .map(|(a, b)| format!("{}-{}", a.value(), b.value()))
                .collect::<Vec<_>>()
                .join(","),
        }
    }
}

//------------ Detectors -----------------------------------------------------

pub fn detect_moas(h: &ObservationHistory, ann: &RouteAnnouncement, params: &AnomalyParams) -> Option<Alarm> {
    let origin = ann.origin().asn()?;
    let record = h.record(&ann.prefix)?;
    if record.origins.contains_key(&origin) {
        return None;
    }
    let established: Vec<Asn> = record.stable_origins(params.stability_window).into_iter().collect();
    if established.is_empty() {
        return None;
    }
    Some(Alarm {
        prefix: ann.prefix,
        severity: Severity::Warning,
        detail: AlarmDetail::Moas {
            established,
            announced: origin,
        },
    })
}

/// `roa_covered` tells whether a covering prefix is protected by ROAs;
/// such hits are Critical.
pub fn detect_subprefix(
    h: &ObservationHistory,
    ann: &RouteAnnouncement,
    params: &AnomalyParams,
    roa_covered: &dyn Fn(&IpPrefix) -> bool,
) -> Option<Alarm> {
    let origin = ann.origin().asn()?;
    let mut covering = Vec::new();
    let mut expected = BTreeSet::new();
    for (stored, record) in h.covering(&ann.prefix) {
        if stored.len() >= ann.prefix.len() {
            continue;
        }
        let stable = record.stable_origins(params.stability_window);
        if !stable.is_empty() && !stable.contains(&origin) {
            covering.push(stored);
            expected.extend(stable);
        }
    }
    if covering.is_empty() {
        return None;
    }
    let severity = if covering.iter().any(roa_covered) {
        Severity::Critical
    } else {
        Severity::Warning
    };
    Some(Alarm {
        prefix: ann.prefix,
        severity,
        detail: AlarmDetail::SubPrefix {
            covering,
            expected: expected.into_iter().collect(),
            announced: origin,
        },
    })
}

pub fn detect_new_edge(h: &ObservationHistory, ann: &RouteAnnouncement, params: &AnomalyParams) -> Option<Alarm> {
    if h.observations() < params.warmup_observations {
        return None;
    }
    let edges: BTreeSet<(Asn, Asn)> = ann.as_path.edges().filter(|(a, b)| !h.has_edge(*a, *b)).collect();
    if edges.is_empty() {
        return None;
    }
    Some(Alarm {
        prefix: ann.prefix,
        severity: Severity::Info,
        detail: AlarmDetail::NewEdge {
            edges: edges.into_iter().collect(),
        },
    })
}

/// Runs all detectors in a fixed order: MOAS, sub-prefix, new edge.
pub fn detect_all(
    h: &ObservationHistory,
    ann: &RouteAnnouncement,
    params: &AnomalyParams,
    roa_covered: &dyn Fn(&IpPrefix) -> bool,
) -> Vec<Alarm> {
    if !ann.is_announce() {
        return Vec::new();
    }
    [
        detect_moas(h, ann, params),
        detect_subprefix(h, ann, params, roa_covered),
        detect_new_edge(h, ann, params),
    ]
    .into_iter()
    .flatten()
    .collect()
}

//============ Tests =========================================================

//! Inter-IXP federation: authenticated frames, observation queries,
//! quorum cross-validation and whitelist synchronization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anomaly::ObservationHistory;
use crate::filter::Whitelist;
use crate::model::{Asn, IpPrefix, RouteAnnouncement};

pub mod client;
pub mod daemon;
pub mod peers;
pub mod wire;

pub use client::{FederationClient, NoFederation, TcpFederationClient};
pub use peers::{PeerConfig, PeerSet, PeersError};
pub use wire::{
    decode_message, encode_frame, encode_message, FederationError, FederationMessage, Key, MessageType,
    Payload, Session,
};

//------------ IxpId ---------------------------------------------------------

/// Short printable-ASCII identifier of an IXP, at most 32 octets.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct IxpId(String);

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid IXP id {0:?}: expected 1-32 printable ASCII characters")]
pub struct IxpIdError(pub String);

impl IxpId {
    pub const MAX_LEN: usize = 32;

    pub fn new(id: impl Into<String>) -> Result<Self, IxpIdError> {
        let id = id.into();
        let ok = !id.is_empty() && id.len() <= Self::MAX_LEN && id.bytes().all(|b| b.is_ascii_graphic());
        if ok {
            Ok(IxpId(id))
        } else {
            Err(IxpIdError(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for IxpId {
    type Error = IxpIdError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        IxpId::new(value)
    }
}

impl From<IxpId> for String {
    fn from(id: IxpId) -> String {
        id.0
    }
}

impl FromStr for IxpId {
    type Err = IxpIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IxpId::new(s)
    }
}

impl fmt::Display for IxpId {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(&self.0)
    }
}

//------------ Claims and cross-validation -----------------------------------

/// What one IXP has seen for a prefix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationClaim {
    pub prefix: IpPrefix,
    pub origins_seen: BTreeSet<Asn>,
    pub first_seen: u64,
    pub last_seen: u64,
    pub claimant: IxpId,
}

impl ObservationClaim {
    pub fn is_well_formed(&self) -> bool {
        !self.origins_seen.is_empty() && self.first_seen <= self.last_seen
    }
}

/// A fraction `num/den`, written as `"1/2"` in config files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Option<Self> {
        (den > 0 && num <= den).then_some(Ratio { num, den })
    }
}

impl FromStr for Ratio {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (n, d) = s.split_once('/').ok_or_else(|| format!("expected a fraction like 1/2, got {s:?}"))?;
        let n = n.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
        let d = d.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
        Ratio::new(n, d).ok_or_else(|| format!("fraction {s:?} must lie in [0, 1]"))
    }
}

impl TryFrom<String> for Ratio {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Ratio> for String {
    fn from(r: Ratio) -> String {
        r.to_string()
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuorumPolicy {
    pub min_responders: u32,
    pub quorum_fraction: Ratio,
}

impl Default for QuorumPolicy {
    fn default() -> Self {
        QuorumPolicy {
            min_responders: 2,
            quorum_fraction: Ratio { num: 1, den: 2 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossStatus {
    Corroborated,
    Disputed,
    Unknown,
}

impl fmt::Display for CrossStatus {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            CrossStatus::Corroborated => "corroborated",
            CrossStatus::Disputed => "disputed",
            CrossStatus::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub status: CrossStatus,
    pub responders: u32,
    pub agreeing: u32,
}

impl fmt::Display for CrossValidation {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{}({}/{})", self.status, self.agreeing, self.responders)
    }
}

/// Applies the quorum rule to peer claims.
///
/// Responders are distinct claimants with a claim covering the route;
/// a responder agrees when any of its covering claims lists the route's
/// origin.
pub fn cross_validate(ann: &RouteAnnouncement, claims: &[ObservationClaim], policy: &QuorumPolicy) -> CrossValidation {
    let origin = ann.origin().asn();
    let mut by_claimant: BTreeMap<&IxpId, bool> = BTreeMap::new();
    for claim in claims.iter().filter(|c| c.prefix.covers(&ann.prefix)) {
        let agrees = origin.is_some_and(|o| claim.origins_seen.contains(&o));
        *by_claimant.entry(&claim.claimant).or_default() |= agrees;
    }
    let responders = by_claimant.len() as u32;
    let agreeing = by_claimant.values().filter(|a| **a).count() as u32;
    CrossValidation {
        status: quorum_status(responders, agreeing, policy),
        responders,
        agreeing,
    }
}

/// The threshold rule on its own.
pub fn quorum_status(responders: u32, agreeing: u32, policy: &QuorumPolicy) -> CrossStatus {
    let q = policy.quorum_fraction;
    if responders < policy.min_responders {
        CrossStatus::Unknown
    } else if agreeing as u64 * q.den >= q.num * responders as u64 {
        CrossStatus::Corroborated
    } else {
        CrossStatus::Disputed
    }
}

//------------ Query handling and whitelist digests --------------------------

pub fn handle_query(history: &ObservationHistory, prefix: &IpPrefix, local: &IxpId) -> Vec<ObservationClaim> {
    history.claims_for(prefix, local)
}

pub fn whitelist_digest(wl: &Whitelist) -> [u8; 32] {
    Sha256::digest(wl.canonical_bytes()).into()
}

/// A digest exchange calls for a full transfer when digests differ.
pub fn needs_sync(local: &Whitelist, remote_digest: &[u8; 32]) -> bool {
    whitelist_digest(local) != *remote_digest
}

//============ Tests =========================================================

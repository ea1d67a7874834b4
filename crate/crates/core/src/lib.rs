//! IXP-hosted defenses against BGP prefix hijacking.
//!
//! Four defenses run over each intercepted announcement: RPKI origin
//! validation ([`rpki`]), member prefix whitelists ([`filter`]),
//! cross-validation with federated IXPs ([`federation`]) and anomaly
//! detection over the observation history ([`anomaly`]). The [`policy`]
//! engine fuses their evidence into a verdict and a filter directive.
//!
//! Announcements come from BGP UPDATE messages and MRT traces ([`bgp`]) or
//! from the multi-IXP attack simulator ([`sim`]).

pub mod anomaly;
pub mod bgp;
pub mod cli;
pub mod federation;
pub mod filter;
pub mod model;
pub mod policy;
pub mod rpki;
pub mod scenarios;
pub mod sim;
pub mod trie;

pub use model::{Afi, AsPath, Asn, IpPrefix, OriginResult, RouteAnnouncement, Segment};

//! Deterministic multi-IXP attack simulator.
//!
//! A scenario declares IXPs with their ROAs, whitelists and policies, the
//! federation links between them, legitimate routes and attacks. A run
//! shuffles the legitimate routes with a seeded RNG, slots the attacks in
//! at their event indices and pushes every announcement through the entry
//! IXP's engine. Federation traffic between linked IXPs goes through the
//! real frame codec, delivered in order within the same event step.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::federation::{IxpId, Key};
use crate::filter::{load_whitelist, Whitelist};
use crate::model::{AsPath, Asn, IpPrefix};
use crate::policy::PolicyConfig;
use crate::rpki::{load_roa_csv, RoaStore};

mod report;
mod run;

pub use report::{render_json, render_table, parse_json};
pub use run::{run, Event, EventLog, FederationCounters, KindMetrics, Label, RunMetrics, RunOutput};

//------------ Scenario ------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    ExactPrefixHijack,
    SubPrefixHijack,
    RouteLeak,
}

impl AttackKind {
    pub const ALL: [AttackKind; 3] = [AttackKind::ExactPrefixHijack, AttackKind::SubPrefixHijack, AttackKind::RouteLeak];
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            AttackKind::ExactPrefixHijack => "exact-prefix-hijack",
            AttackKind::SubPrefixHijack => "sub-prefix-hijack",
            AttackKind::RouteLeak => "route-leak",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub victim: IpPrefix,
    pub attacker: Asn,
    pub entry: IxpId,
    /// Position in the global event order.
    pub inject_at: usize,
    /// The announced prefix: the victim, or a strict more-specific of it.
    pub prefix: IpPrefix,
    pub path: AsPath,
}

#[derive(Clone, Debug)]
pub struct IxpSetup {
    pub id: IxpId,
    pub roas: Arc<RoaStore>,
    pub whitelist: Arc<Whitelist>,
    pub policy: PolicyConfig,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LegitRoute {
    pub ixp: IxpId,
    pub member: Asn,
    pub prefix: IpPrefix,
    pub path: AsPath,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub seed: u64,
    pub start_time: u64,
    pub event_interval_secs: u64,
    /// Share each processed announcement with linked peers.
    pub push_observations: bool,
    pub ixps: Vec<IxpSetup>,
    /// Undirected; keyed with the smaller id first.
    pub links: BTreeMap<(IxpId, IxpId), Key>,
    /// One entry per announcement; repeats are already expanded.
    pub routes: Vec<LegitRoute>,
    pub attacks: Vec<AttackSpec>,
}

impl Scenario {
    pub fn ixp_index(&self, id: &IxpId) -> Option<usize> {
        self.ixps.iter().position(|i| &i.id == id)
    }

    pub fn link_key(&self, a: &IxpId, b: &IxpId) -> Option<&Key> {
        let k = if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        self.links.get(&k)
    }

    pub fn neighbours(&self, id: &IxpId) -> Vec<IxpId> {
        let mut out: BTreeSet<IxpId> = BTreeSet::new();
        for (a, b) in self.links.keys() {
            if a == id {
                out.insert(b.clone());
            } else if b == id {
                out.insert(a.clone());
            }
        }
        out.into_iter().collect()
    }

    /// Number of events a run will process.
    pub fn event_count(&self) -> usize {
        self.routes.len() + self.attacks.len()
    }
}

//------------ Config document -----------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("scenario syntax: {0}")]
    Syntax(String),
    #[error("unknown IXP {0}")]
    UnknownIxp(String),
    #[error("IXP {0} declared twice")]
    DuplicateIxp(String),
    #[error("link {a}-{b} declared twice with different keys")]
    AsymmetricLink { a: String, b: String },
    #[error("link {0} connects an IXP to itself")]
    SelfLink(String),
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("bad file {}: {reason}", .path.display())]
    BadFile { path: PathBuf, reason: String },
    #[error("invalid attack #{index}: {reason}")]
    InvalidAttack { index: usize, reason: String },
    #[error("invalid route #{index}: {reason}")]
    InvalidRoute { index: usize, reason: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDocument {
    seed: u64,
    #[serde(default = "default_start")]
    start_time: u64,
    #[serde(default = "default_interval")]
    event_interval_secs: u64,
    #[serde(default = "default_true")]
    push_observations: bool,
    /// Applied to every IXP without its own policy file.
    #[serde(default)]
    policy: Option<PolicyConfig>,
    ixps: Vec<IxpDocument>,
    #[serde(default)]
    links: Vec<LinkDocument>,
    #[serde(default)]
    routes: Vec<RouteDocument>,
    #[serde(default)]
    attacks: Vec<AttackDocument>,
}

fn default_start() -> u64 {
    1_700_000_000
}

fn default_interval() -> u64 {
    60
}

fn default_true() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IxpDocument {
    id: String,
    roas: Option<PathBuf>,
    whitelist: Option<PathBuf>,
    policy: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDocument {
    a: String,
    b: String,
    /// Hex key; derived from the scenario seed and the two ids if absent.
    key: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteDocument {
    ixp: String,
    prefix: IpPrefix,
    path: AsPath,
    member: Option<Asn>,
    #[serde(default = "one")]
    repeat: usize,
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AttackDocument {
    kind: AttackKind,
    victim: IpPrefix,
    attacker: Asn,
    entry: String,
    inject_at: usize,
    sub_prefix: Option<IpPrefix>,
    /// For route leaks: the legitimate origin. Looked up from the routes
    /// when absent.
    victim_origin: Option<Asn>,
}

fn read(path: &Path) -> Result<String, SimError> {
    std::fs::read_to_string(path).map_err(|_| SimError::MissingFile(path.to_owned()))
}

fn bad(path: &Path, reason: impl ToString) -> SimError {
    SimError::BadFile { path: path.to_owned(), reason: reason.to_string() }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, SimError> {
    let text = read(path)?;
    build_scenario(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Resolves a scenario document. Relative file names are taken from
/// `base`.
pub fn build_scenario(text: &str, base: &Path) -> Result<Scenario, SimError> {
    let doc: ScenarioDocument = toml::from_str(text).map_err(|e| SimError::Syntax(e.to_string()))?;
    let default_policy = doc.policy.clone().unwrap_or_default();

    let mut ixps: Vec<IxpSetup> = Vec::new();
    for ixp in &doc.ixps {
        let id = IxpId::new(&ixp.id).map_err(|e| SimError::Syntax(e.to_string()))?;
        if ixps.iter().any(|i| i.id == id) {
            return Err(SimError::DuplicateIxp(ixp.id.clone()));
        }
        let roas = match &ixp.roas {
            Some(rel) => {
                let path = base.join(rel);
                let load = load_roa_csv(&read(&path)?).map_err(|e| bad(&path, e))?;
                if let Some(row) = load.rejected.first() {
                    return Err(bad(&path, format!("line {}: {}", row.line, row.reason)));
                }
                load.store
            }
            None => RoaStore::new(),
        };
        let whitelist = match &ixp.whitelist {
            Some(rel) => {
                let path = base.join(rel);
                load_whitelist(&read(&path)?).map_err(|e| bad(&path, e))?
            }
            None => Whitelist::new(id.as_str(), 0),
        };
        let policy = match &ixp.policy {
            Some(rel) => {
                let path = base.join(rel);
                PolicyConfig::load(&read(&path)?).map_err(|e| bad(&path, e))?
            }
            None => default_policy.clone(),
        };
        ixps.push(IxpSetup { id, roas: Arc::new(roas), whitelist: Arc::new(whitelist), policy });
    }
    let known = |name: &str| -> Result<IxpId, SimError> {
        ixps.iter()
            .map(|i| &i.id)
            .find(|id| id.as_str() == name)
            .cloned()
            .ok_or_else(|| SimError::UnknownIxp(name.to_owned()))
    };

    let mut links = BTreeMap::new();
    for link in &doc.links {
        let (a, b) = (known(&link.a)?, known(&link.b)?);
        if a == b {
            return Err(SimError::SelfLink(link.a.clone()));
        }
        let pair = if a < b { (a, b) } else { (b, a) };
        let key = match &link.key {
            Some(hex) => Key::from_hex(hex).map_err(SimError::Syntax)?,
            None => derived_key(doc.seed, &pair.0, &pair.1),
        };
        if let Some(prev) = links.insert(pair.clone(), key.clone()) {
            if prev != key {
                return Err(SimError::AsymmetricLink { a: pair.0.to_string(), b: pair.1.to_string() });
            }
        }
    }

    let mut routes = Vec::new();
    for (index, r) in doc.routes.iter().enumerate() {
        let ixp = known(&r.ixp)?;
        let member = r
            .member
            .or_else(|| r.path.asns().next())
            .ok_or_else(|| SimError::InvalidRoute { index, reason: "empty path and no member".into() })?;
        if r.path.is_empty() {
            return Err(SimError::InvalidRoute { index, reason: "announcements need a path".into() });
        }
        for _ in 0..r.repeat {
            routes.push(LegitRoute { ixp: ixp.clone(), member, prefix: r.prefix, path: r.path.clone() });
        }
    }

    let mut attacks = Vec::new();
    for (index, a) in doc.attacks.iter().enumerate() {
        let entry = known(&a.entry)?;
        let invalid = |reason: &str| SimError::InvalidAttack { index, reason: reason.to_owned() };
        let (prefix, path) = match a.kind {
            AttackKind::ExactPrefixHijack => (a.victim, AsPath::from_sequence([a.attacker])),
            AttackKind::SubPrefixHijack => {
                let sub = match a.sub_prefix {
                    Some(sub) => sub,
                    None => a.victim.split(false).ok_or_else(|| invalid("victim prefix has no more-specific"))?,
                };
                if !a.victim.strictly_covers(&sub) {
                    return Err(invalid("sub_prefix is not strictly inside the victim prefix"));
                }
                (sub, AsPath::from_sequence([a.attacker]))
            }
            AttackKind::RouteLeak => {
                let origin = a
                    .victim_origin
                    .or_else(|| routes.iter().find(|r| r.prefix == a.victim).and_then(|r| r.path.origin().asn()))
                    .ok_or_else(|| invalid("no legitimate origin known for the leaked prefix"))?;
                (a.victim, AsPath::from_sequence([a.attacker, origin]))
            }
        };
        attacks.push(AttackSpec {
            kind: a.kind,
            victim: a.victim,
            attacker: a.attacker,
            entry,
            inject_at: a.inject_at,
            prefix,
            path,
        });
    }

    Ok(Scenario {
        seed: doc.seed,
        start_time: doc.start_time,
        event_interval_secs: doc.event_interval_secs,
        push_observations: doc.push_observations,
        ixps,
        links,
        routes,
        attacks,
    })
}

fn derived_key(seed: u64, a: &IxpId, b: &IxpId) -> Key {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    h.update(a.as_str());
    h.update([0]);
    h.update(b.as_str());
    Key::new(h.finalize().into())
}

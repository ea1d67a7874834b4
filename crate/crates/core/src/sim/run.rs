use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AttackKind, Scenario};
use crate::federation::wire::{PushBody, QueryBody, ResponseBody};
use crate::federation::{
    encode_message, handle_query, CrossStatus, FederationClient, FederationError, FederationMessage, IxpId,
    ObservationClaim, Payload, Session,
};
use crate::model::{IpPrefix, RouteAnnouncement};
use crate::policy::{Action, Engine, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Legitimate,
    /// Index into the scenario's attack list.
    Attack(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub index: usize,
    pub ixp: IxpId,
    pub label: Label,
    pub announcement: RouteAnnouncement,
    pub verdict: Verdict,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FederationCounters {
    pub queries: u64,
    pub responses: u64,
    pub pushes: u64,
    /// Frames the receiving side refused.
    pub rejected: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindMetrics {
    pub injected: u64,
    /// Rejected or flagged at the entry IXP.
    pub detected: u64,
    /// Peers disputed the origin.
    pub disputed: u64,
}

impl KindMetrics {
    pub fn detection_rate(&self) -> f64 {
        if self.injected == 0 {
            0.0
        } else {
            self.detected as f64 / self.injected as f64
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub events: u64,
    pub attacks: BTreeMap<AttackKind, KindMetrics>,
    pub legitimate: u64,
    /// Legitimate announcements that were rejected or flagged.
    pub false_positives: u64,
    /// Per attack, in scenario order: events from injection to the first
    /// alarm on the attacked route at any IXP.
    pub detection_latency: Vec<Option<u64>>,
    pub federation: FederationCounters,
}

impl RunMetrics {
    pub fn kind(&self, kind: AttackKind) -> KindMetrics {
        self.attacks.get(&kind).copied().unwrap_or_default()
    }

    pub fn false_positive_rate(&self) -> f64 {
        if self.legitimate == 0 {
            0.0
        } else {
            self.false_positives as f64 / self.legitimate as f64
        }
    }
}

/// One key=value line per event.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    pub lines: Vec<String>,
}

impl EventLog {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

fn log_line(ev: &Event, scenario: &Scenario) -> String {
    let ann = &ev.announcement;
    let label = match ev.label {
        Label::Legitimate => "legitimate".to_string(),
        Label::Attack(i) => format!("{}#{i}", scenario.attacks[i].kind),
    };
    let mut line = format!(
        "event={} ts={} ixp={} member={} prefix={} path=\"{}\" label={} action={}",
        ev.index, ann.timestamp, ev.ixp, ann.announcing_member.value(), ann.prefix, ann.as_path, label, ev.verdict.action
    );
    let reasons = if ev.verdict.reasons.is_empty() { "-".to_string() } else { ev.verdict.reasons.join(",") };
    let _ = write!(line, " reasons={reasons}");
    if let Some(evid) = &ev.verdict.evidence {
        let fed = evid.federation.as_ref().map_or("-".to_string(), |f| f.to_string());
        let alarms: Vec<String> = evid.anomalies.iter().map(|a| format!("{}:{:?}", a.kind(), a.severity).to_lowercase()).collect();
        let alarms = if alarms.is_empty() { "-".to_string() } else { alarms.join(",") };
        let _ = write!(line, " roa={} whitelist={} federation={fed} alarms={alarms}", evid.roa.state, evid.whitelist);
    }
    line
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub events: Vec<Event>,
    pub log: EventLog,
    pub metrics: RunMetrics,
    pub engines: Vec<Engine>,
}

/// The shared medium between simulated IXPs: every frame is encoded with
/// the link key and checked by the receiver's replay guard.
struct Fabric {
    sessions: Vec<Session>,
    sequences: Vec<u64>,
    counters: FederationCounters,
}

impl Fabric {
    fn send(&mut self, from: usize, to: usize, sender: &IxpId, payload: Payload, scenario: &Scenario) -> Option<FederationMessage> {
        let key = scenario.link_key(sender, &scenario.ixps[to].id)?;
        self.sequences[from] += 1;
        let msg = FederationMessage { sender: sender.clone(), sequence: self.sequences[from], payload };
        let accepted = encode_message(&msg, key).and_then(|frame| self.sessions[to].accept(&frame, key));
        match accepted {
            Ok(msg) => Some(msg),
            Err(e) => {
                warn!("{} -> {} dropped: {e}", sender, scenario.ixps[to].id);
                self.counters.rejected += 1;
                None
            }
        }
    }
}

struct SimClient<'a> {
    me: usize,
    neighbours: &'a [usize],
    engines: &'a [Option<Engine>],
    fabric: &'a mut Fabric,
    scenario: &'a Scenario,
}

impl FederationClient for SimClient<'_> {
    fn query(&mut self, prefix: &IpPrefix) -> Result<Vec<ObservationClaim>, FederationError> {
        let local = &self.scenario.ixps[self.me].id;
        let mut claims = Vec::new();
        let mut answered = 0;
        for &j in self.neighbours {
            let peer = &self.scenario.ixps[j].id;
            self.fabric.counters.queries += 1;
            let Some(msg) = self.fabric.send(self.me, j, local, Payload::Query(QueryBody { prefix: *prefix }), self.scenario) else {
                continue;
            };
            let Payload::Query(q) = msg.payload else { continue };
            let engine = self.engines[j].as_ref().expect("peer engine present");
            let found = handle_query(engine.history(), &q.prefix, peer);
            let reply = Payload::Response(ResponseBody { prefix: q.prefix, claims: found });
            let Some(back) = self.fabric.send(j, self.me, peer, reply, self.scenario) else { continue };
            self.fabric.counters.responses += 1;
            if let Payload::Response(r) = back.payload {
                answered += 1;
                claims.extend(r.claims.into_iter().filter(|c| &c.claimant == peer));
            }
        }
        if answered == 0 && !self.neighbours.is_empty() {
            return Err(FederationError::Unavailable);
        }
        Ok(claims)
    }

    fn has_peers(&self) -> bool {
        !self.neighbours.is_empty()
    }
}

/// Builds the global event order: shuffled legitimate routes with each
/// attack slotted in at its index.
fn schedule(scenario: &Scenario) -> Vec<(Label, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut order: Vec<(Label, usize)> = (0..scenario.routes.len()).map(|i| (Label::Legitimate, i)).collect();
    order.shuffle(&mut rng);
    let mut attacks: Vec<usize> = (0..scenario.attacks.len()).collect();
    attacks.sort_by_key(|&i| (scenario.attacks[i].inject_at, i));
    for i in attacks {
        let at = scenario.attacks[i].inject_at.min(order.len());
        order.insert(at, (Label::Attack(i), i));
    }
    order
}

pub fn run(scenario: &Scenario) -> RunOutput {
    let n = scenario.ixps.len();
    let mut engines: Vec<Option<Engine>> = scenario
        .ixps
        .iter()
        .map(|s| Some(Engine::new(s.id.clone(), s.roas.clone(), s.whitelist.clone(), s.policy.clone())))
        .collect();
    let neighbours: Vec<Vec<usize>> = scenario
        .ixps
        .iter()
        .map(|s| scenario.neighbours(&s.id).iter().filter_map(|id| scenario.ixp_index(id)).collect())
        .collect();
    let mut fabric = Fabric { sessions: vec![Session::new(); n], sequences: vec![0; n], counters: Default::default() };

    let mut events = Vec::new();
    for (index, (label, i)) in schedule(scenario).into_iter().enumerate() {
        let ts = scenario.start_time + index as u64 * scenario.event_interval_secs;
        let (ixp, ann) = match label {
            Label::Legitimate => {
                let r = &scenario.routes[i];
                (r.ixp.clone(), RouteAnnouncement::announce(r.prefix, r.path.clone(), r.member, ts))
            }
            Label::Attack(_) => {
                let a = &scenario.attacks[i];
                (a.entry.clone(), RouteAnnouncement::announce(a.prefix, a.path.clone(), a.attacker, ts))
            }
        };
        let me = scenario.ixp_index(&ixp).expect("validated at build time");
        let mut engine = engines[me].take().expect("engine present");
        let processed = {
            let mut client =
                SimClient { me, neighbours: &neighbours[me], engines: &engines, fabric: &mut fabric, scenario };
            engine.process(&ann, &mut client)
        };
        if scenario.push_observations {
            let claims: Vec<ObservationClaim> =
                engine.history().claims_for(&ann.prefix, &ixp).into_iter().filter(|c| c.prefix == ann.prefix).collect();
            if !claims.is_empty() {
                for &j in &neighbours[me] {
                    let push = Payload::ObservationPush(PushBody { claims: claims.clone() });
                    fabric.counters.pushes += 1;
                    if let Some(msg) = fabric.send(me, j, &ixp, push, scenario) {
                        if let Payload::ObservationPush(body) = msg.payload {
                            let peer = engines[j].as_mut().expect("peer engine present");
                            for claim in body.claims.iter().filter(|c| c.claimant == msg.sender && c.is_well_formed()) {
                                peer.history_mut().record_claim(claim);
                            }
                        }
                    }
                }
            }
        }
        engines[me] = Some(engine);
        events.push(Event { index, ixp, label, announcement: ann, verdict: processed.verdict });
    }

    let log = EventLog { lines: events.iter().map(|e| log_line(e, scenario)).collect() };
    let metrics = score(scenario, &events, fabric.counters);
    RunOutput { events, log, metrics, engines: engines.into_iter().map(|e| e.expect("engine present")).collect() }
}

fn alarmed(v: &Verdict) -> bool {
    v.action != Action::Accept
}

fn score(scenario: &Scenario, events: &[Event], federation: FederationCounters) -> RunMetrics {
    let mut m = RunMetrics { events: events.len() as u64, federation, ..Default::default() };
    for kind in AttackKind::ALL {
        m.attacks.insert(kind, KindMetrics::default());
    }
    m.detection_latency = vec![None; scenario.attacks.len()];
    for ev in events {
        match ev.label {
            Label::Legitimate => {
                m.legitimate += 1;
                if alarmed(&ev.verdict) {
                    m.false_positives += 1;
                }
            }
            Label::Attack(i) => {
                let k = m.attacks.get_mut(&scenario.attacks[i].kind).expect("all kinds present");
                k.injected += 1;
                if alarmed(&ev.verdict) {
                    k.detected += 1;
                }
                let disputed = ev
                    .verdict
                    .evidence
                    .as_ref()
                    .and_then(|e| e.federation.as_ref())
                    .is_some_and(|f| f.status == CrossStatus::Disputed);
                if disputed {
                    k.disputed += 1;
                }
                let attack = &scenario.attacks[i];
                m.detection_latency[i] = events[ev.index..]
                    .iter()
                    .find(|later| {
                        alarmed(&later.verdict)
                            && later.announcement.prefix == attack.prefix
                            && later.announcement.origin().asn() == Some(attack.attacker)
                    })
                    .map(|later| (later.index - ev.index) as u64);
            }
        }
    }
    m
}

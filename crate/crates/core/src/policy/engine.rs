use std::sync::Arc;

use log::{debug, warn};

use super::{emit_directive, evaluate, Action, DefenseEvidence, FilterDirective, PolicyConfig, QueryTrigger, Verdict};
use crate::anomaly::{detect_all, ObservationHistory};
use crate::federation::{cross_validate, FederationClient, IxpId};
use crate::filter::{check_whitelist, FilterResult, Whitelist};
use crate::model::RouteAnnouncement;
use crate::rpki::{OriginValidationOutcome, RoaStore, ValidationState};

/// Outcome of running one announcement through the pipeline.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Processed {
    pub verdict: Verdict,
    pub directive: Option<FilterDirective>,
    /// Whether peers were asked, successfully or not.
    pub queried: bool,
}

/// Per-IXP pipeline state: the loaded stores plus the observation history.
///
/// Stores are shared behind `Arc` so reloads can swap them in wholesale.
/// The history has a single writer, this engine.
#[derive(Clone, Debug)]
pub struct Engine {
    pub local: IxpId,
    roas: Arc<RoaStore>,
    whitelist: Arc<Whitelist>,
    history: ObservationHistory,
    config: PolicyConfig,
}

impl Engine {
    pub fn new(local: IxpId, roas: Arc<RoaStore>, whitelist: Arc<Whitelist>, config: PolicyConfig) -> Self {
        Engine {
            local,
            roas,
            whitelist,
            history: ObservationHistory::with_params(&config.anomaly),
            config,
        }
    }

    pub fn roas(&self) -> &RoaStore {
        &self.roas
    }

    pub fn whitelist(&self) -> &Whitelist {
        &self.whitelist
    }

    pub fn set_whitelist(&mut self, wl: Arc<Whitelist>) {
        self.whitelist = wl;
    }

    pub fn set_roas(&mut self, roas: Arc<RoaStore>) {
        self.roas = roas;
    }

    pub fn history(&self) -> &ObservationHistory {
        &self.history
    }

    pub fn history_mut(&mut self) -> &mut ObservationHistory {
        &mut self.history
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    /// Gathers evidence without touching the history or the network.
    pub fn local_evidence(&self, ann: &RouteAnnouncement) -> DefenseEvidence {
        let d = self.config.defenses;
        let roa = if d.roa {
            self.roas.validate_origin(&ann.prefix, ann.origin())
        } else {
            OriginValidationOutcome::not_found()
        };
        let whitelist = if d.whitelist {
            check_whitelist(&self.whitelist, ann)
        } else {
            FilterResult::NoPolicy
        };
        let anomalies = if d.anomaly {
            let roas = &self.roas;
            let covered = |p: &crate::model::IpPrefix| d.roa && roas.is_covered(p);
            detect_all(&self.history, ann, &self.config.anomaly, &covered)
        } else {
            Vec::new()
        };
        DefenseEvidence { roa, whitelist, federation: None, anomalies }
    }

    fn should_query(&self, ev: &DefenseEvidence, client: &dyn FederationClient) -> bool {
        if !self.config.defenses.federation || !client.has_peers() {
            return false;
        }
        match self.config.query_federation_on {
            QueryTrigger::Never => false,
            QueryTrigger::Always => true,
            QueryTrigger::Suspicion => ev.roa.state == ValidationState::NotFound || !ev.anomalies.is_empty(),
        }
    }

    /// roa, whitelist, anomaly detection, optional federation query,
    /// evaluation, history update, directive. Federation errors degrade to
    /// "no answer" and never block a verdict.
    pub fn process(&mut self, ann: &RouteAnnouncement, client: &mut dyn FederationClient) -> Processed {
        if !ann.is_announce() {
            return Processed {
                verdict: Verdict {
                    action: Action::Accept,
                    reasons: Vec::new(),
                    announcement: ann.clone(),
                    evidence: None,
                },
                directive: None,
                queried: false,
            };
        }
        let mut ev = self.local_evidence(ann);
        let queried = self.should_query(&ev, client);
        if queried {
            match client.query(&ann.prefix) {
                Ok(claims) => ev.federation = Some(cross_validate(ann, &claims, &self.config.quorum)),
                Err(e) => warn!("federation query for {} failed, continuing without: {e}", ann.prefix),
            }
        }
        let verdict = evaluate(ann, &ev, &self.config);
        self.history.record_observation(ann, &self.local);
        let directive = emit_directive(&verdict, &self.config);
        debug!("{} {} -> {}", ann.announcing_member, ann.prefix, verdict.action);
        Processed { verdict, directive, queried }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federation::{FederationError, NoFederation, ObservationClaim};
    use crate::filter::WhitelistEntry;
    use crate::model::{Asn, AsPath, IpPrefix};
    use crate::policy::Defenses;
    use crate::rpki::Roa;

    fn p(s: &str) -> IpPrefix {
        s.parse().unwrap()
    }

    fn ann(prefix: &str, path: &str) -> RouteAnnouncement {
        let path: AsPath = path.parse().unwrap();
        let member = path.asns().next().unwrap();
        RouteAnnouncement::announce(p(prefix), path, member, 1000)
    }

    struct Scripted {
        claims: Vec<ObservationClaim>,
        calls: usize,
        fail: bool,
    }

    impl FederationClient for Scripted {
        fn query(&mut self, _: &IpPrefix) -> Result<Vec<ObservationClaim>, FederationError> {
            self.calls += 1;
            if self.fail {
                Err(FederationError::Unavailable)
            } else {
                Ok(self.claims.clone())
            }
        }
    }

    fn scripted(origins: &[u32]) -> Scripted {
        let claims = origins
            .iter()
            .enumerate()
            .map(|(i, o)| ObservationClaim {
                prefix: p("198.51.100.0/24"),
                origins_seen: [Asn::new(*o)].into_iter().collect(),
                first_seen: 0,
                last_seen: 1,
                claimant: IxpId::new(format!("peer{i}")).unwrap(),
            })
            .collect();
        Scripted { claims, calls: 0, fail: false }
    }

    fn engine(cfg: PolicyConfig) -> Engine {
        let roas = RoaStore::from_roas([Roa::new(p("192.0.2.0/24"), 24, Asn::new(65001), "ta").unwrap()]);
        let mut wl = Whitelist::new("local", 1);
        wl.add(WhitelistEntry::new(Asn::new(65010), [p("203.0.113.0/24")], None)).unwrap();
        Engine::new(IxpId::new("local").unwrap(), Arc::new(roas), Arc::new(wl), cfg)
    }

    #[test]
    fn roa_hijack_rejected_without_query() {
        let mut e = engine(PolicyConfig::default());
        let mut fed = scripted(&[65001, 65001, 65001]);
        let out = e.process(&ann("192.0.2.0/24", "64666"), &mut fed);
        assert_eq!(out.verdict.action, Action::Reject);
        assert_eq!(out.verdict.reasons, vec!["roa-invalid"]);
        assert_eq!(fed.calls, 0);
        assert!(!out.queried);
    }

    #[test]
    fn clean_route_generates_no_traffic() {
        let mut e = engine(PolicyConfig::default());
        let mut fed = scripted(&[65001]);
        let out = e.process(&ann("192.0.2.0/24", "65001"), &mut fed);
        assert_eq!(out.verdict.action, Action::Accept);
        assert_eq!(fed.calls, 0);
        assert!(out.directive.is_none());
    }

    #[test]
    fn disputed_by_peers() {
        let mut e = engine(PolicyConfig::default());
        let mut fed = scripted(&[65020, 65020, 65020]);
        let out = e.process(&ann("198.51.100.0/24", "64666"), &mut fed);
        assert_eq!(fed.calls, 1);
        assert_eq!(out.verdict.action, Action::Flag);
        assert_eq!(out.verdict.reasons, vec!["federation-disputed"]);
        assert_eq!(out.verdict.evidence.unwrap().federation.unwrap().responders, 3);
    }

    #[test]
    fn outage_degrades() {
        let mut e = engine(PolicyConfig::default());
        let mut fed = Scripted { fail: true, ..scripted(&[]) };
        let out = e.process(&ann("198.51.100.0/24", "64666"), &mut fed);
        assert!(out.queried);
        assert_eq!(out.verdict.action, Action::Accept);
        assert!(out.verdict.evidence.unwrap().federation.is_none());
        let out = e.process(&ann("203.0.113.0/24", "65010"), &mut fed);
        assert_eq!(out.verdict.action, Action::Accept);
        let out = e.process(&ann("198.51.100.0/24", "65010"), &mut fed);
        assert_eq!(out.verdict.action, Action::Reject);
    }

    #[test]
    fn withdrawals_pass_through() {
        let mut e = engine(PolicyConfig::default());
        let w = RouteAnnouncement::withdraw(p("192.0.2.0/24"), Asn::new(64666), 5);
        let out = e.process(&w, &mut NoFederation);
        assert_eq!(out.verdict.action, Action::Accept);
        assert!(out.verdict.evidence.is_none());
        assert_eq!(e.history().observations(), 0);
    }

    #[test]
    fn disabled_defenses_are_neutral() {
        let cfg = PolicyConfig { defenses: Defenses::only(false, false, false, false), ..Default::default() };
        let mut e = engine(cfg);
        let mut fed = scripted(&[65020, 65020]);
        let out = e.process(&ann("192.0.2.0/24", "64666"), &mut fed);
        assert_eq!(out.verdict.action, Action::Accept);
        assert_eq!(fed.calls, 0);
    }
}

use serde::{Deserialize, Serialize};

use super::{Action, DefenseEvidence, FilterDirective, Verdict};
use crate::anomaly::AlarmKind;
use crate::model::{Asn, IpPrefix, OriginResult};

/// One verdict log line. The flat fields are for grepping; `evidence`
/// lets the verdict be re-derived later.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictLogEntry {
    pub timestamp: u64,
    pub member: Asn,
    pub prefix: IpPrefix,
    pub kind: crate::model::AnnouncementKind,
    pub origin: OriginResult,
    pub roa: Option<String>,
    pub whitelist: Option<String>,
    pub federation: Option<String>,
    pub alarms: Vec<AlarmKind>,
    pub action: Action,
    pub reasons: Vec<String>,
    pub directive: Option<FilterDirective>,
    pub evidence: Option<DefenseEvidence>,
}

impl VerdictLogEntry {
    pub fn new(v: &Verdict, directive: Option<&FilterDirective>) -> Self {
        let ann = &v.announcement;
        let ev = v.evidence.as_ref();
        VerdictLogEntry {
            timestamp: ann.timestamp,
            member: ann.announcing_member,
            prefix: ann.prefix,
            kind: ann.kind,
            origin: ann.origin(),
            roa: ev.map(|e| e.roa.state.to_string()),
            whitelist: ev.map(|e| e.whitelist.to_string()),
            federation: ev.and_then(|e| e.federation.map(|f| f.to_string())),
            alarms: ev.map(|e| e.anomalies.iter().map(|a| a.kind()).collect()).unwrap_or_default(),
            action: v.action,
            reasons: v.reasons.clone(),
            directive: directive.copied(),
            evidence: v.evidence.clone(),
        }
    }
}

pub fn verdict_log_line(v: &Verdict, directive: Option<&FilterDirective>) -> String {
    serde_json::to_string(&VerdictLogEntry::new(v, directive)).expect("log entries always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::FilterResult;
    use crate::model::{AsPath, RouteAnnouncement};
    use crate::policy::{emit_directive, evaluate, PolicyConfig};
    use crate::rpki::{OriginValidationOutcome, ValidationState};

    #[test]
    fn line_round_trips_and_replays() {
        let ann = RouteAnnouncement::announce(
            "198.51.100.0/24".parse().unwrap(),
            "65010 65020".parse::<AsPath>().unwrap(),
            Asn::new(65010),
            42,
        );
        let ev = DefenseEvidence {
            roa: OriginValidationOutcome { state: ValidationState::Invalid, ..OriginValidationOutcome::not_found() },
            whitelist: FilterResult::NoPolicy,
            federation: None,
            anomalies: vec![],
        };
        let cfg = PolicyConfig::default();
        let v = evaluate(&ann, &ev, &cfg);
        let d = emit_directive(&v, &cfg);
        let line = verdict_log_line(&v, d.as_ref());
        assert!(!line.contains('\n'));
        let back: VerdictLogEntry = serde_json::from_str(&line).unwrap();
        assert_eq!(back.roa.as_deref(), Some("Invalid"));
        assert_eq!(back.action, Action::Reject);
        let again = evaluate(&ann, back.evidence.as_ref().unwrap(), &cfg);
        assert_eq!(again.reasons, back.reasons);
    }
}

//! Fusing defense evidence into verdicts and filter directives.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::anomaly::{Alarm, AnomalyParams, Severity};
use crate::federation::{CrossStatus, CrossValidation, QuorumPolicy};
use crate::filter::FilterResult;
use crate::model::{Asn, IpPrefix, RouteAnnouncement};
use crate::rpki::{OriginValidationOutcome, ValidationState};

mod engine;
mod log;

pub use engine::{Engine, Processed};
pub use log::{verdict_log_line, VerdictLogEntry};

//------------ Evidence and verdicts -----------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefenseEvidence {
    pub roa: OriginValidationOutcome,
    pub whitelist: FilterResult,
    /// Present only when peers were queried and answered.
    pub federation: Option<CrossValidation>,
    pub anomalies: Vec<Alarm>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Accept,
    Reject,
    Flag,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            Action::Accept => "accept",
            Action::Reject => "reject",
            Action::Flag => "flag",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub action: Action,
    pub reasons: Vec<String>,
    pub announcement: RouteAnnouncement,
    /// `None` for withdrawals, which bypass the defenses.
    pub evidence: Option<DefenseEvidence>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Directive {
    Drop,
    Quarantine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDirective {
    pub member: Asn,
    pub prefix: IpPrefix,
    pub directive: Directive,
    pub ttl_seconds: Option<u64>,
}

//------------ Configuration -------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    RoaInvalid,
    RoaNotFound,
    RoaValid,
    WhitelistViolation,
    WhitelistNoPolicy,
    WhitelistPass,
    FederationDisputed,
    FederationCorroborated,
    AnomalyCritical,
    /// Any Warning or Info alarm.
    Anomaly,
    Always,
}

impl Condition {
    pub fn matches(self, ev: &DefenseEvidence) -> bool {
        let fed = ev.federation.map(|f| f.status);
        match self {
            Condition::RoaInvalid => ev.roa.state == ValidationState::Invalid,
            Condition::RoaNotFound => ev.roa.state == ValidationState::NotFound,
            Condition::RoaValid => ev.roa.state == ValidationState::Valid,
            Condition::WhitelistViolation => ev.whitelist == FilterResult::Violation,
            Condition::WhitelistNoPolicy => ev.whitelist == FilterResult::NoPolicy,
            Condition::WhitelistPass => matches!(ev.whitelist, FilterResult::Pass { .. }),
            Condition::FederationDisputed => fed == Some(CrossStatus::Disputed),
            Condition::FederationCorroborated => fed == Some(CrossStatus::Corroborated),
            Condition::AnomalyCritical => ev.anomalies.iter().any(|a| a.severity == Severity::Critical),
            Condition::Anomaly => ev.anomalies.iter().any(|a| a.severity < Severity::Critical),
            Condition::Always => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleAction {
    Accept,
    Reject,
    Flag,
    /// Whatever `treat_no_policy_as` says.
    TreatNoPolicyAs,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyRule {
    pub id: String,
    pub when: Condition,
    pub then: RuleAction,
}

impl PolicyRule {
    pub fn new(id: &str, when: Condition, then: RuleAction) -> Self {
        PolicyRule { id: id.to_owned(), when, then }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryTrigger {
    Never,
    /// ROA NotFound or any anomaly alarm.
    #[default]
    Suspicion,
    Always,
}

/// Switches for running a subset of the defenses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defenses {
    pub roa: bool,
    pub whitelist: bool,
    pub federation: bool,
    pub anomaly: bool,
}

impl Default for Defenses {
    fn default() -> Self {
        Defenses { roa: true, whitelist: true, federation: true, anomaly: true }
    }
}

impl Defenses {
    pub fn only(roa: bool, whitelist: bool, federation: bool, anomaly: bool) -> Self {
        Defenses { roa, whitelist, federation, anomaly }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub rules: Vec<PolicyRule>,
    pub treat_no_policy_as: Action,
    pub query_federation_on: QueryTrigger,
    pub quorum: QuorumPolicy,
    pub anomaly: AnomalyParams,
    pub directive_ttl_seconds: Option<u64>,
    pub defenses: Defenses,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            rules: default_rules(),
            treat_no_policy_as: Action::Accept,
            query_federation_on: QueryTrigger::Suspicion,
            quorum: QuorumPolicy::default(),
            anomaly: AnomalyParams::default(),
            directive_ttl_seconds: Some(3600),
            defenses: Defenses::default(),
        }
    }
}

pub fn default_rules() -> Vec<PolicyRule> {
    use Condition::*;
    vec![
        PolicyRule::new("roa-invalid", RoaInvalid, RuleAction::Reject),
        PolicyRule::new("whitelist-violation", WhitelistViolation, RuleAction::Reject),
        PolicyRule::new("federation-disputed", FederationDisputed, RuleAction::Flag),
        PolicyRule::new("anomaly-critical", AnomalyCritical, RuleAction::Flag),
        PolicyRule::new("anomaly", Anomaly, RuleAction::Flag),
        PolicyRule::new("whitelist-no-policy", WhitelistNoPolicy, RuleAction::TreatNoPolicyAs),
    ]
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("policy config: {0}")]
    Syntax(String),
    #[error("policy config: duplicate or empty rule id {0:?}")]
    RuleId(String),
    #[error("policy config: treat_no_policy_as must be accept or flag")]
    NoPolicyAction,
}

impl PolicyConfig {
    pub fn load(text: &str) -> Result<Self, PolicyError> {
        let cfg: PolicyConfig = toml::from_str(text).map_err(|e| PolicyError::Syntax(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let mut seen = std::collections::HashSet::new();
        for rule in &self.rules {
            if rule.id.is_empty() || !seen.insert(rule.id.as_str()) {
                return Err(PolicyError::RuleId(rule.id.clone()));
            }
        }
        if self.treat_no_policy_as == Action::Reject {
            return Err(PolicyError::NoPolicyAction);
        }
        Ok(())
    }

    fn resolve(&self, action: RuleAction) -> Action {
        match action {
            RuleAction::Accept => Action::Accept,
            RuleAction::Reject => Action::Reject,
            RuleAction::Flag => Action::Flag,
            RuleAction::TreatNoPolicyAs => self.treat_no_policy_as,
        }
    }
}

//------------ Operations ----------------------------------------------------

/// First matching rule decides. Reasons list every matching rule with a
/// non-accept action, in table order; an accept carries none. Falls back
/// to accept when nothing matches.
pub fn evaluate(ann: &RouteAnnouncement, ev: &DefenseEvidence, cfg: &PolicyConfig) -> Verdict {
    let (action, reasons) = decide(ev, cfg);
    Verdict {
        action,
        reasons,
        announcement: ann.clone(),
        evidence: Some(ev.clone()),
    }
}

pub(crate) fn decide(ev: &DefenseEvidence, cfg: &PolicyConfig) -> (Action, Vec<String>) {
    let mut action = None;
    let mut reasons = Vec::new();
    for rule in cfg.rules.iter().filter(|r| r.when.matches(ev)) {
        let a = cfg.resolve(rule.then);
        action.get_or_insert(a);
        if a != Action::Accept {
            reasons.push(rule.id.clone());
        }
    }
    let action = action.unwrap_or(Action::Accept);
    if action == Action::Accept {
        reasons.clear();
    }
    (action, reasons)
}

pub fn emit_directive(v: &Verdict, cfg: &PolicyConfig) -> Option<FilterDirective> {
    let directive = match v.action {
        Action::Accept => return None,
        Action::Reject => Directive::Drop,
        Action::Flag => Directive::Quarantine,
    };
    Some(FilterDirective {
        member: v.announcement.announcing_member,
        prefix: v.announcement.prefix,
        directive,
        ttl_seconds: cfg.directive_ttl_seconds,
    })
}

//============ Tests =========================================================

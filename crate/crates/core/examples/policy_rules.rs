//! A custom rule table loaded from TOML and applied to one announcement.

use std::sync::Arc;

use bgpsecx::federation::{IxpId, NoFederation};
use bgpsecx::filter::Whitelist;
use bgpsecx::policy::{verdict_log_line, Engine, PolicyConfig};
use bgpsecx::rpki::{Roa, RoaStore};
use bgpsecx::{AsPath, Asn, RouteAnnouncement};

const POLICY: &str = r#"
treat_no_policy_as = "flag"
directive_ttl_seconds = 600

[[rules]]
id = "roa-invalid"
when = "roa-invalid"
then = "reject"

[[rules]]
id = "roa-valid"
when = "roa-valid"
then = "accept"

[[rules]]
id = "unlisted-member"
when = "whitelist-no-policy"
then = "treat-no-policy-as"
"#;

fn main() {
    let config = PolicyConfig::load(POLICY).unwrap();
    let roas = RoaStore::from_roas([Roa::new("192.0.2.0/24".parse().unwrap(), 24, Asn::new(65020), "demo").unwrap()]);
    let mut engine = Engine::new(IxpId::new("ix-demo").unwrap(), Arc::new(roas), Arc::new(Whitelist::new("ix-demo", 1)), config);

    for (prefix, path) in [("192.0.2.0/24", "65010 65020"), ("192.0.2.0/24", "64666"), ("203.0.113.0/24", "65030")] {
        let path: AsPath = path.parse().unwrap();
        let member = path.asns().next().unwrap();
        let ann = RouteAnnouncement::announce(prefix.parse().unwrap(), path, member, 1_700_000_000);
        let out = engine.process(&ann, &mut NoFederation);
        println!("{}", verdict_log_line(&out.verdict, out.directive.as_ref()));
    }
}

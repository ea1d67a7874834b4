//! Origin validation against a small ROA set.

use bgpsecx::rpki::{Roa, RoaStore};
use bgpsecx::{Asn, IpPrefix, OriginResult};

fn main() {
    let p = |s: &str| s.parse::<IpPrefix>().unwrap();
    let roas = RoaStore::from_roas([
        Roa::new(p("10.0.0.0/16"), 24, Asn::new(65001), "demo").unwrap(),
        Roa::new(p("10.0.1.0/24"), 24, Asn::new(65002), "demo").unwrap(),
        Roa::new(p("2001:db8::/32"), 48, Asn::new(65003), "demo").unwrap(),
    ]);

    for (prefix, origin) in [
        ("10.0.0.0/16", 65001),
        ("10.0.1.0/24", 65002),
        ("10.0.1.0/25", 65001),
        ("10.0.5.0/24", 65009),
        ("2001:db8:1::/48", 65003),
        ("192.0.2.0/24", 65001),
    ] {
        let out = roas.validate_origin(&p(prefix), OriginResult::Origin(Asn::new(origin)));
        println!("{prefix:<18} AS{origin:<6} {:<9} covering {}", out.state.to_string(), out.covering.len());
    }
}

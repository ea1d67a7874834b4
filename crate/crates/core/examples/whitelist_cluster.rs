//! Two IXPs' member whitelists merged into a cluster list.

use bgpsecx::filter::{check_whitelist, load_whitelist, merge_cluster};
use bgpsecx::{AsPath, Asn, RouteAnnouncement};

const NORTH: &str = r#"
ixp = "ix-north"
version = 3

[[members]]
asn = 65010
prefixes = ["192.0.2.0/24"]
"#;

const SOUTH: &str = r#"
ixp = "ix-south"
version = 7

[[members]]
asn = 65010
prefixes = ["203.0.113.0/24"]
allow_more_specifics_up_to = 26

[[members]]
asn = 65020
prefixes = ["198.51.100.0/24"]
"#;

fn main() {
    let north = load_whitelist(NORTH).unwrap();
    let south = load_whitelist(SOUTH).unwrap();
    let cluster = merge_cluster([&north, &south]).unwrap();
    print!("{}", cluster.to_toml());

    for (prefix, member) in [("192.0.2.0/24", 65010), ("203.0.113.64/26", 65010), ("198.51.100.0/24", 65010), ("192.0.2.0/24", 65099)] {
        let ann = RouteAnnouncement::announce(prefix.parse().unwrap(), AsPath::from_sequence([Asn::new(member)]), Asn::new(member), 0);
        println!("AS{member} {prefix:<16} north {:<22} cluster {}", check_whitelist(&north, &ann).to_string(), check_whitelist(&cluster, &ann));
    }
}

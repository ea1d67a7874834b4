//! Builds a BGP UPDATE, prints its bytes and decodes it again.

use bgpsecx::bgp::{encode_update, parse_update_with, AsnWidth, BgpUpdate};
use bgpsecx::{AsPath, Asn, IpPrefix};

fn main() {
    let update = BgpUpdate {
        withdrawn: vec!["192.0.2.0/25".parse().unwrap()],
        as_path: Some(AsPath::from_sequence([Asn::new(65010), Asn::new(65020)])),
        next_hop: Some("192.0.2.1".parse().unwrap()),
        nlri: vec!["198.51.100.0/24".parse::<IpPrefix>().unwrap(), "2001:db8:7::/48".parse().unwrap()],
        ..BgpUpdate::default()
    };
    for width in [AsnWidth::Four, AsnWidth::Two] {
        let bytes = encode_update(&update, width);
        println!("{width:?}-byte ASNs, {} bytes: {}", bytes.len(), hex::encode(&bytes));
        let back = parse_update_with(&bytes, width).unwrap();
        println!("  withdrawn {:?}", back.withdrawn.iter().map(|p| p.to_string()).collect::<Vec<_>>());
        println!("  nlri      {:?}", back.nlri.iter().map(|p| p.to_string()).collect::<Vec<_>>());
        println!("  as_path   {}", back.as_path.unwrap());
    }
}

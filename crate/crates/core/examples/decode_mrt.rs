//! Streams an MRT file (optionally gzipped) and prints what it contains.
//!
//!     cargo run --example decode_mrt -- crates/core/data/traces/sample.mrt

use std::collections::BTreeMap;
use std::path::PathBuf;

use bgpsecx::bgp::{open_trace, AnnouncementStream};

fn main() {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/traces/sample.mrt")
    });
    let mut stream = AnnouncementStream::new(open_trace(&path).expect("readable trace"));
    let mut origins: BTreeMap<String, usize> = BTreeMap::new();
    for (i, ann) in stream.by_ref().enumerate() {
        if i < 5 {
            println!("{} {:?} {} via {} path {}", ann.timestamp, ann.kind, ann.prefix, ann.announcing_member, ann.as_path);
        }
        if let Some(origin) = ann.origin().asn() {
            *origins.entry(origin.to_string()).or_default() += 1;
        }
    }
    println!("{:?}", stream.stats());
    println!("{} peers in the index table, {} distinct origins", stream.peers().peers.len(), origins.len());
}

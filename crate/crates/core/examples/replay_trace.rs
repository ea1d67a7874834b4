//! Replays the clean fixture trace against its ROAs and whitelist.

use std::sync::Arc;

use bgpsecx::bgp::open_trace;
use bgpsecx::cli::replay_trace;
use bgpsecx::federation::{IxpId, NoFederation};
use bgpsecx::filter::load_whitelist;
use bgpsecx::policy::{Engine, PolicyConfig};
use bgpsecx::rpki::load_roa_csv;

fn main() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/traces");
    let roas = load_roa_csv(&std::fs::read_to_string(dir.join("clean_roas.csv")).unwrap()).unwrap().store;
    let wl = load_whitelist(&std::fs::read_to_string(dir.join("clean_whitelist.toml")).unwrap()).unwrap();
    let mut engine = Engine::new(IxpId::new("ix-lab").unwrap(), Arc::new(roas), Arc::new(wl), PolicyConfig::default());

    let start = std::time::Instant::now();
    let counts = replay_trace(&mut engine, open_trace(&dir.join("clean.mrt")).unwrap(), &mut NoFederation, None).unwrap();
    println!("{}", counts.render());
    println!("{:.1} ms", start.elapsed().as_secs_f64() * 1e3);
}

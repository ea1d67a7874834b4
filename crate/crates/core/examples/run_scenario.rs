//! Runs a bundled attack scenario and prints its event log and metrics.
//!
//!     cargo run --example run_scenario -- s3

use bgpsecx::scenarios::{default_data_dir, scenario_catalog};
use bgpsecx::sim::{render_table, run};

fn main() {
    let id = std::env::args().nth(1).unwrap_or_else(|| "s3".into());
    let dir = default_data_dir();
    let fixture = scenario_catalog(&dir).unwrap().into_iter().find(|f| f.id == id).expect("known scenario id");
    println!("{}: {}", fixture.id, fixture.summary);
    let scenario = fixture.load_scenario(&dir).unwrap();
    let out = run(&scenario);
    print!("{}", out.log.render());
    print!("{}", render_table(&out.metrics));
}

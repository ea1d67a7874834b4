//! MOAS and sub-prefix alarms from an observation history.

use bgpsecx::anomaly::{detect_all, AnomalyParams, ObservationHistory};
use bgpsecx::federation::IxpId;
use bgpsecx::rpki::RoaStore;
use bgpsecx::{AsPath, Asn, RouteAnnouncement};

fn ann(prefix: &str, origin: u32, ts: u64) -> RouteAnnouncement {
    RouteAnnouncement::announce(prefix.parse().unwrap(), AsPath::from_sequence([Asn::new(65100), Asn::new(origin)]), Asn::new(65100), ts)
}

fn main() {
    let params = AnomalyParams { warmup_observations: 2, ..AnomalyParams::default() };
    let mut history = ObservationHistory::with_params(&params);
    let here = IxpId::new("ix-demo").unwrap();
    let roas = RoaStore::new();

    let day = 86_400;
    let feed = [
        ann("198.51.100.0/24", 65001, 0),
        ann("203.0.113.0/24", 65002, 10),
        ann("198.51.100.0/24", 65001, day),
        ann("203.0.113.0/24", 65002, day + 10),
        ann("198.51.100.0/24", 64999, day + 60),
        ann("203.0.113.128/25", 64998, day + 120),
    ];
    for a in &feed {
        let alarms = detect_all(&history, a, &params, &|p| roas.is_covered(p));
        for alarm in &alarms {
            println!("{}", alarm.log_line(a.timestamp));
        }
        if alarms.is_empty() {
            println!("ts={} {} origin {} quiet", a.timestamp, a.prefix, a.origin().asn().unwrap());
        }
        history.record_observation(a, &here);
    }
}

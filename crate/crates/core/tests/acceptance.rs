//! Acceptance checks. Each criterion prints one PASS or FAIL line; the
//! binary exits non-zero if any failed.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Cursor;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bgpsecx::bgp::mrt::{self, MrtRecord};
use bgpsecx::bgp::{encode_update, open_trace, parse_update, AnnouncementStream, AsnWidth, BgpUpdate};
use bgpsecx::cli::replay_trace;
use bgpsecx::federation::wire::{DigestBody, PushBody, QueryBody, ResponseBody, SyncBody};
use bgpsecx::federation::{
    cross_validate, decode_message, encode_message, CrossStatus, FederationError, FederationMessage, IxpId, Key,
    NoFederation, ObservationClaim, Payload, QuorumPolicy, Session,
};
use bgpsecx::filter::{load_whitelist, merge_cluster, Whitelist, WhitelistEntry};
use bgpsecx::policy::{Defenses, Engine, PolicyConfig};
use bgpsecx::rpki::{load_roa_csv, Roa, RoaStore, ValidationState};
use bgpsecx::scenarios::{default_data_dir, scenario_catalog, FixtureKind, FixtureManifest};
use bgpsecx::sim::{self, AttackKind, Label};
use bgpsecx::{AsPath, Asn, IpPrefix, OriginResult, RouteAnnouncement};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn data() -> PathBuf {
    default_data_dir()
}

fn fixture(id: &str) -> FixtureManifest {
    scenario_catalog(&data()).unwrap().into_iter().find(|f| f.id == id).unwrap()
}

//------------ 1: ROA oracle -------------------------------------------------

/// A prefix the way the oracle sees it: family, left-aligned bits, length.
#[derive(Clone, Copy)]
struct Net {
    v6: bool,
    bits: u128,
    len: u8,
}

impl Net {
    fn width(&self) -> u8 {
        if self.v6 {
            128
        } else {
            32
        }
    }

    fn random(rng: &mut ChaCha8Rng, v6: bool) -> Net {
        let width = if v6 { 128 } else { 32 };
        let len = rng.gen_range(0..=width);
        // Few distinct high bits so ROAs and routes overlap often.
        let top: u128 = rng.gen_range(0..4);
        let raw: u128 = (top << 126) | (rng.gen::<u128>() >> 2);
        Net { v6, bits: mask(raw, len), len }
    }

    fn narrow(&self, rng: &mut ChaCha8Rng) -> Net {
        let len = rng.gen_range(self.len..=self.width());
        let raw = self.bits | (rng.gen::<u128>() & !mask(u128::MAX, self.len));
        Net { v6: self.v6, bits: mask(raw, len), len }
    }

    fn covers(&self, other: &Net) -> bool {
        self.v6 == other.v6 && self.len <= other.len && mask(other.bits, self.len) == self.bits
    }

    fn to_prefix(self) -> IpPrefix {
        let addr = if self.v6 {
            IpAddr::V6(Ipv6Addr::from(self.bits))
        } else {
            IpAddr::V4(Ipv4Addr::from((self.bits >> 96) as u32))
        };
        format!("{addr}/{}", self.len).parse().unwrap()
    }
}

fn mask(bits: u128, len: u8) -> u128 {
    if len == 0 {
        0
    } else {
        bits & (u128::MAX << (128 - len as u32))
    }
}

type RoaKey = (String, u8, u32);

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let instances = 10_000;
    for i in 0..instances {
        let v6 = rng.gen_bool(0.3);
        let n = rng.gen_range(0..=50);
        let mut roas: Vec<(Net, u8, u32)> = Vec::new();
        for _ in 0..n {
            let family = v6 ^ rng.gen_bool(0.1);
            let net = Net::random(&mut rng, family);
            let max = rng.gen_range(net.len..=net.width());
            roas.push((net, max, rng.gen_range(1..6)));
        }
        let store = RoaStore::from_roas(
            roas.iter().map(|(net, max, asn)| Roa::new(net.to_prefix(), *max, Asn::new(*asn), "ta").unwrap()),
        );
        let route = match roas.get(rng.gen_range(0..roas.len().max(1))) {
            Some((net, _, _)) if rng.gen_bool(0.8) => net.narrow(&mut rng),
            _ => Net::random(&mut rng, v6),
        };
        let origin = if rng.gen_bool(0.05) { OriginResult::Indeterminate } else { OriginResult::Origin(Asn::new(rng.gen_range(1..6))) };

        let mut covering = BTreeSet::new();
        let mut matched = BTreeSet::new();
        for (net, max, asn) in &roas {
            if net.covers(&route) {
                let key: RoaKey = (net.to_prefix().to_string(), *max, *asn);
                if route.len <= *max && origin == OriginResult::Origin(Asn::new(*asn)) {
                    matched.insert(key.clone());
                }
                covering.insert(key);
            }
        }
        let expected = if !matched.is_empty() {
            ValidationState::Valid
        } else if !covering.is_empty() {
            ValidationState::Invalid
        } else {
            ValidationState::NotFound
        };

        let got = store.validate_origin(&route.to_prefix(), origin);
        let keys = |v: &[Roa]| -> BTreeSet<RoaKey> {
            v.iter().map(|r| (r.prefix.to_string(), r.max_length, r.origin.value())).collect()
        };
        check(got.state == expected, || format!("instance {i}: state {} expected {expected}", got.state))?;
        check(keys(&got.matched) == matched, || format!("instance {i}: matched sets differ"))?;
        check(keys(&got.covering) == covering, || format!("instance {i}: covering sets differ"))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{instances} instances agree with the linear scan in {:.2} s", elapsed.as_secs_f64()))
}

//------------ 2: scenario suite ---------------------------------------------

fn criterion_2() -> Outcome {
    let dir = data();
    let mut notes = Vec::new();
    for f in scenario_catalog(&dir).unwrap().into_iter().filter(|f| f.kind == FixtureKind::Scenario) {
        check(f.stale_files(&dir).is_empty(), || format!("{}: digest mismatch", f.id))?;
        let scenario = f.load_scenario(&dir).map_err(|e| format!("{}: {e}", f.id))?;
        let runs: Vec<_> = (0..3).map(|_| sim::run(&scenario)).collect();
        let first = runs[0].log.render();
        for r in &runs[1..] {
            check(r.log.render().as_bytes() == first.as_bytes(), || format!("{}: event logs differ between runs", f.id))?;
            check(r.metrics == runs[0].metrics, || format!("{}: metrics differ between runs", f.id))?;
        }
        let out = &runs[0];
        let kind: AttackKind = f.expected.attack.unwrap();
        let k = out.metrics.kind(kind);
        check(k.injected > 0 && format!("{:.3}", k.detection_rate()) == "1.000", || {
            format!("{}: {kind} detected {}/{}", f.id, k.detected, k.injected)
        })?;
        check(out.metrics.false_positives == 0, || format!("{}: {} false positives", f.id, out.metrics.false_positives))?;
        for ev in out.events.iter().filter(|e| matches!(e.label, Label::Attack(_))) {
            let want = f.expected.action.unwrap();
            check(ev.verdict.action == want, || format!("{}: attack verdict {} expected {want}", f.id, ev.verdict.action))?;
            check(ev.verdict.reasons.iter().any(|r| f.expected.reasons.contains(r)), || {
                format!("{}: reasons {:?} expected one of {:?}", f.id, ev.verdict.reasons, f.expected.reasons)
            })?;
        }
        notes.push(format!("{} {}/{}", f.id, k.detected, k.injected));
    }
    check(notes.len() == 4, || format!("expected four scenarios, found {}", notes.len()))?;
    Ok(format!("detection 1.000, 0 false positives, 3 identical runs each ({})", notes.join(", ")))
}

//------------ 3: clean replay -----------------------------------------------

fn criterion_3() -> Outcome {
    let f = fixture("clean-trace");
    let dir = data();
    check(f.stale_files(&dir).is_empty(), || "clean fixture digest mismatch".into())?;
    let traces = dir.join("traces");
    let roas = load_roa_csv(&std::fs::read_to_string(traces.join("clean_roas.csv")).unwrap()).unwrap();
    check(roas.rejected.is_empty(), || "clean ROA file has bad rows".into())?;
    let wl = load_whitelist(&std::fs::read_to_string(traces.join("clean_whitelist.toml")).unwrap()).unwrap();
    let mut engine = Engine::new(IxpId::new("ix-lab").unwrap(), Arc::new(roas.store), Arc::new(wl), PolicyConfig::default());
    let counts = replay_trace(&mut engine, open_trace(&f.entry_path(&dir)).unwrap(), &mut NoFederation, None).unwrap();
    check(counts.reject == 0 && counts.flag == 0, || format!("reject {} flag {}", counts.reject, counts.flag))?;
    check(counts.accept == counts.trace.announcements && counts.trace.announcements > 0, || {
        format!("accept {} of {} announcements", counts.accept, counts.trace.announcements)
    })?;
    Ok(format!("{} announcements, 0 reject, 0 flag", counts.trace.announcements))
}

//------------ 4: federation integrity ---------------------------------------

fn random_prefix(rng: &mut ChaCha8Rng) -> IpPrefix {
    if rng.gen_bool(0.5) {
        let len = rng.gen_range(0..=32);
        IpPrefix::new(IpAddr::V4(Ipv4Addr::from(rng.gen::<u32>())), len).unwrap()
    } else {
        let len = rng.gen_range(0..=128);
        IpPrefix::new(IpAddr::V6(Ipv6Addr::from(rng.gen::<u128>())), len).unwrap()
    }
}

fn random_id(rng: &mut ChaCha8Rng) -> IxpId {
    let len = rng.gen_range(1..=32);
    IxpId::new((0..len).map(|_| rng.gen_range(b'!'..=b'~') as char).collect::<String>()).unwrap()
}

fn random_claim(rng: &mut ChaCha8Rng) -> ObservationClaim {
    let first = rng.gen_range(0..u32::MAX as u64);
    ObservationClaim {
        prefix: random_prefix(rng),
        origins_seen: (0..rng.gen_range(1..4)).map(|_| Asn::new(rng.gen())).collect(),
        first_seen: first,
        last_seen: first + rng.gen_range(0..1_000_000),
        claimant: random_id(rng),
    }
}

fn random_whitelist(rng: &mut ChaCha8Rng, members: u32, max_prefixes: usize) -> Whitelist {
    let mut wl = Whitelist::new("ix-random", rng.gen_range(0..100));
    for m in 0..rng.gen_range(0..=members) {
        let prefixes: Vec<IpPrefix> = (0..rng.gen_range(1..=max_prefixes)).map(|_| random_prefix(rng)).collect();
        let bound = if rng.gen_bool(0.5) { Some(prefixes.iter().map(|p| p.len()).max().unwrap()) } else { None };
        let _ = wl.add(WhitelistEntry::new(Asn::new(64512 + m * 7 % 13), prefixes, bound));
    }
    wl
}

fn random_message(rng: &mut ChaCha8Rng) -> FederationMessage {
    let payload = match rng.gen_range(0..5) {
        0 => Payload::Query(QueryBody { prefix: random_prefix(rng) }),
        1 => Payload::Response(ResponseBody {
            prefix: random_prefix(rng),
            claims: (0..rng.gen_range(0..4)).map(|_| random_claim(rng)).collect(),
        }),
        2 => Payload::ObservationPush(PushBody { claims: (0..rng.gen_range(0..4)).map(|_| random_claim(rng)).collect() }),
        3 => Payload::WhitelistDigest(DigestBody { digest: rng.gen(), version: rng.gen() }),
        _ => Payload::WhitelistSync(SyncBody { whitelist: random_whitelist(rng, 4, 3) }),
    };
    FederationMessage { sender: random_id(rng), sequence: rng.gen(), payload }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let key = Key::new(rng.gen());

    // Every byte of one frame of each type, flipped two ways.
    let mut flips = 0;
    for payload_type in 0..5 {
        let msg = loop {
            let m = random_message(&mut rng);
            if m.payload.msg_type() as u8 == payload_type + 1 {
                break m;
            }
        };
        let frame = encode_message(&msg, &key).unwrap();
        for pos in 0..frame.len() {
            for bit in [0x01u8, 0xff] {
                let mut bad = frame.clone();
                bad[pos] ^= bit;
                let err = decode_message(&bad, &key);
                check(matches!(err, Err(FederationError::AuthFailure)), || {
                    format!("type {} byte {pos} ^ {bit:#04x}: {err:?}", payload_type + 1)
                })?;
                flips += 1;
            }
        }
    }

    let round_trips = 10_000;
    for i in 0..round_trips {
        let msg = random_message(&mut rng);
        let back = decode_message(&encode_message(&msg, &key).unwrap(), &key);
        check(back.as_ref().ok() == Some(&msg), || format!("message {i} did not survive: {back:?}"))?;
    }

    let sender = IxpId::new("ix-a").unwrap();
    let frame = |seq: u64| {
        let m = FederationMessage { sender: sender.clone(), sequence: seq, payload: Payload::Query(QueryBody { prefix: IpPrefix::DEFAULT_V4 }) };
        encode_message(&m, &key).unwrap()
    };
    let mut session = Session::new();
    session.accept(&frame(10), &key).map_err(|e| e.to_string())?;
    let again = session.accept(&frame(10), &key);
    let older = session.accept(&frame(9), &key);
    check(matches!(again, Err(FederationError::ReplayDetected { .. })), || format!("replay accepted: {again:?}"))?;
    check(matches!(older, Err(FederationError::ReplayDetected { .. })), || format!("older frame accepted: {older:?}"))?;
    session.accept(&frame(11), &key).map_err(|e| e.to_string())?;
    Ok(format!("{flips}/{flips} flips rejected, {round_trips} round trips, replays refused"))
}

//------------ 5: quorum table -----------------------------------------------

fn criterion_5() -> Outcome {
    let policy = QuorumPolicy::default();
    let prefix: IpPrefix = "198.51.100.0/24".parse().unwrap();
    let origin = Asn::new(65020);
    let ann = RouteAnnouncement::announce(prefix, AsPath::from_sequence([Asn::new(64666), origin]), Asn::new(64666), 0);
    let mut cases = 0;
    for responders in 0u32..=5 {
        for agreeing in 0..=responders {
            let claims: Vec<ObservationClaim> = (0..responders)
                .map(|i| ObservationClaim {
                    prefix,
                    origins_seen: BTreeSet::from([if i < agreeing { origin } else { Asn::new(65099) }]),
                    first_seen: 1,
                    last_seen: 2,
                    claimant: IxpId::new(format!("ix-{i}")).unwrap(),
                })
                .collect();
            // min_responders 2, quorum fraction 1/2.
            let expected = if responders < 2 {
                CrossStatus::Unknown
            } else if 2 * agreeing >= responders {
                CrossStatus::Corroborated
            } else {
                CrossStatus::Disputed
            };
            let got = cross_validate(&ann, &claims, &policy);
            check(got.status == expected && got.responders == responders && got.agreeing == agreeing, || {
                format!("({responders}, {agreeing}): got {got}, expected {expected:?}")
            })?;
            cases += 1;
        }
    }
    check(cases == 21, || format!("{cases} cases"))?;
    Ok(format!("{cases}/21 cases match"))
}

//------------ 6: MRT parity and fuzzing -------------------------------------

fn bgpkit_counts(path: &Path) -> (u64, u64, u64) {
    use bgpkit_parser::models::ElemType;
    let bytes = std::fs::read(path).unwrap();
    let mut cur = Cursor::new(bytes);
    let mut elementor = bgpkit_parser::Elementor::new();
    let (mut records, mut ann, mut wd) = (0, 0, 0);
    while let Ok(rec) = bgpkit_parser::parse_mrt_record(&mut cur) {
        records += 1;
        for elem in elementor.record_to_elems(rec) {
            match elem.elem_type {
                ElemType::ANNOUNCE => ann += 1,
                ElemType::WITHDRAW => wd += 1,
            }
        }
    }
    (records, ann, wd)
}

fn criterion_6() -> Outcome {
    let dir = data();
    let mut notes = Vec::new();
    for f in scenario_catalog(&dir).unwrap().into_iter().filter(|f| f.kind == FixtureKind::Trace) {
        check(f.stale_files(&dir).is_empty(), || format!("{}: digest mismatch", f.id))?;
        let mut stream = AnnouncementStream::new(open_trace(&f.entry_path(&dir)).unwrap());
        stream.by_ref().for_each(drop);
        let st = *stream.stats();
        let ours = (st.records, st.announcements, st.withdrawals);
        let frozen = (f.expected.records.unwrap(), f.expected.announcements.unwrap(), f.expected.withdrawals.unwrap());
        check(ours == frozen, || format!("{}: ours {ours:?}, mrtparse {frozen:?}", f.id))?;
        let live = bgpkit_counts(&f.entry_path(&dir));
        check(ours == live, || format!("{}: ours {ours:?}, bgpkit-parser {live:?}", f.id))?;
        check(st.malformed == 0 && !st.truncated, || format!("{}: {st:?}", f.id))?;
        notes.push(format!("{} {}/{}/{}", f.id, ours.0, ours.1, ours.2));
    }

    // Random bytes, and valid messages with random damage.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let seed_msg = encode_update(
        &BgpUpdate {
            withdrawn: vec!["192.0.2.0/25".parse().unwrap()],
            as_path: Some(AsPath::from_sequence([Asn::new(65010), Asn::new(65020)])),
            next_hop: Some("192.0.2.1".parse().unwrap()),
            nlri: vec!["198.51.100.0/24".parse().unwrap(), "2001:db8::/32".parse().unwrap()],
            ..BgpUpdate::default()
        },
        AsnWidth::Four,
    );
    let inputs = 100_000;
    let mut panics = 0;
    let mut accepted = 0;
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    for i in 0..inputs {
        let input: Vec<u8> = if i % 2 == 0 {
            let len = rng.gen_range(0..96);
            let mut v: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            if rng.gen_bool(0.5) && v.len() >= 19 {
                v[..16].fill(0xff);
                v[16..18].copy_from_slice(&(len as u16).to_be_bytes());
                v[18] = 2;
            }
            v
        } else {
            let mut v = seed_msg.clone();
            for _ in 0..rng.gen_range(1..4) {
                let pos = rng.gen_range(16..v.len());
                v[pos] = rng.gen();
            }
            if rng.gen_bool(0.2) {
                v.truncate(rng.gen_range(0..v.len()));
            }
            v
        };
        match std::panic::catch_unwind(|| parse_update(&input)) {
            Ok(Ok(_)) => accepted += 1,
            Ok(Err(_)) => {}
            Err(_) => panics += 1,
        }
    }
    std::panic::set_hook(hook);
    check(panics == 0, || format!("{panics} of {inputs} inputs panicked"))?;
    Ok(format!("counts match mrtparse and bgpkit-parser ({}); {inputs} fuzz inputs, 0 crashes, {accepted} parsed", notes.join(", ")))
}

//------------ 7: coverage ---------------------------------------------------

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // Disjoint /24s, so a ROA on one never covers another.
    let mut picks: BTreeSet<u32> = BTreeSet::new();
    while picks.len() < 4000 {
        picks.insert(rng.gen_range(0..1 << 24));
    }
    let universe: Vec<IpPrefix> =
        picks.iter().map(|n| format!("{}/24", Ipv4Addr::from(n << 8)).parse().unwrap()).collect();
    let mut chosen: Vec<usize> = (0..universe.len()).collect();
    for i in (1..chosen.len()).rev() {
        chosen.swap(i, rng.gen_range(0..=i));
    }
    let roas = RoaStore::from_roas(
        chosen[..200].iter().map(|&i| Roa::new(universe[i], 24, Asn::new(64512 + i as u32 % 1000), "ta").unwrap()),
    );
    let stats = roas.coverage_stats(&universe).unwrap();
    check(stats.covered * 20 == stats.universe, || format!("{}/{}", stats.covered, stats.universe))?;
    check(format!("{:.3}", stats.fraction()) == "0.050", || format!("{:.6}", stats.fraction()))?;
    Ok(format!("coverage {:.3} ({}/{})", stats.fraction(), stats.covered, stats.universe))
}

//------------ 8: whitelist algebra ------------------------------------------

fn union_oracle(lists: &[&Whitelist]) -> BTreeMap<Asn, BTreeSet<IpPrefix>> {
    let mut out: BTreeMap<Asn, BTreeSet<IpPrefix>> = BTreeMap::new();
    for wl in lists {
        for (asn, e) in &wl.entries {
            out.entry(*asn).or_default().extend(e.allowed.iter().copied());
        }
    }
    out
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let triples = 2000;
    let merge = |ws: &[&Whitelist]| merge_cluster(ws.iter().copied()).unwrap();
    for i in 0..triples {
        let (a, b, c) = (random_whitelist(&mut rng, 6, 4), random_whitelist(&mut rng, 6, 4), random_whitelist(&mut rng, 6, 4));
        let ab = merge(&[&a, &b]);
        let ba = merge(&[&b, &a]);
        check(ab.entries == ba.entries, || format!("triple {i}: not commutative"))?;
        let left = merge(&[&ab, &c]);
        let bc = merge(&[&b, &c]);
        let right = merge(&[&a, &bc]);
        check(left.entries == right.entries, || format!("triple {i}: not associative"))?;
        let once = merge(&[&a]);
        check(merge(&[&a, &a]).entries == once.entries && merge(&[&once]).entries == once.entries, || {
            format!("triple {i}: not idempotent")
        })?;
        let all = merge(&[&a, &b, &c]);
        let got: BTreeMap<Asn, BTreeSet<IpPrefix>> = all.entries.iter().map(|(k, e)| (*k, e.allowed.clone())).collect();
        check(got == union_oracle(&[&a, &b, &c]), || format!("triple {i}: not the per-member union"))?;
    }
    Ok(format!("{triples} triples: commutative, associative, idempotent, union"))
}

//------------ 9: throughput -------------------------------------------------

fn synthetic_trace(announcements: usize, rng: &mut ChaCha8Rng) -> (Vec<u8>, RoaStore, Whitelist) {
    let members: Vec<Asn> = (0..40).map(|i| Asn::new(65000 + i)).collect();
    let prefixes: Vec<(IpPrefix, Asn)> = (0..20_000u32)
        .map(|i| (format!("{}/24", Ipv4Addr::from((10 << 24) | (i << 8))).parse().unwrap(), Asn::new(64600 + i % 300)))
        .collect();
    let roas = RoaStore::from_roas(
        prefixes.iter().step_by(2).map(|(p, a)| Roa::new(*p, 24, *a, "ta").unwrap()),
    );
    let mut wl = Whitelist::new("ix-bench", 1);
    for (i, m) in members.iter().enumerate() {
        let mine = prefixes.iter().enumerate().filter(|(j, _)| j % members.len() == i).map(|(_, (p, _))| *p);
        wl.add(WhitelistEntry::new(*m, mine, None)).unwrap();
    }
    let mut out = Vec::new();
    let mut n = 0;
    let mut ts = 1_700_000_000;
    while n < announcements {
        let mi = rng.gen_range(0..members.len());
        let picks: Vec<usize> =
            (0..4).map(|_| rng.gen_range(0..prefixes.len() / members.len()) * members.len() + mi).collect();
        let origin = prefixes[picks[0]].1;
        let nlri: Vec<IpPrefix> = picks.iter().map(|&j| prefixes[j].0).collect();
        let update = BgpUpdate {
            as_path: Some(AsPath::from_sequence([members[mi], origin])),
            next_hop: Some("192.0.2.1".parse().unwrap()),
            nlri,
            ..BgpUpdate::default()
        };
        let body = mrt::encode_bgp4mp(
            members[mi],
            Asn::new(65535),
            "192.0.2.1".parse().unwrap(),
            "192.0.2.254".parse().unwrap(),
            true,
            &encode_update(&update, AsnWidth::Four),
        );
        ts += 1;
        mrt::write_record(&mut out, &MrtRecord { timestamp: ts, mrt_type: mrt::BGP4MP, subtype: mrt::BGP4MP_MESSAGE_AS4, payload: body }).unwrap();
        n += 4;
    }
    (out, roas, wl)
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (trace, roas, wl) = synthetic_trace(200_000, &mut rng);
    let config = PolicyConfig { defenses: Defenses { federation: false, ..Defenses::default() }, ..PolicyConfig::default() };
    let mut engine = Engine::new(IxpId::new("ix-bench").unwrap(), Arc::new(roas), Arc::new(wl), config);
    let start = Instant::now();
    let counts = replay_trace(&mut engine, &trace[..], &mut NoFederation, None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let rate = counts.trace.announcements as f64 / secs;
    check(counts.accept + counts.reject + counts.flag == counts.trace.announcements, || "verdicts lost".into())?;
    check(rate >= 50_000.0, || format!("{rate:.0} announcements/s"))?;
    Ok(format!("{} announcements in {secs:.2} s = {rate:.0}/s", counts.trace.announcements))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("roa oracle equivalence", criterion_1),
        ("scenario suite s1-s4", criterion_2),
        ("clean replay, no reject or flag", criterion_3),
        ("federation frame integrity", criterion_4),
        ("cross-validation quorum table", criterion_5),
        ("mrt parity and update fuzzing", criterion_6),
        ("roa coverage statistic", criterion_7),
        ("whitelist merge algebra", criterion_8),
        ("replay throughput", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

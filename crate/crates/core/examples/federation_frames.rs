//! Frame encoding, tamper detection and the replay guard.

use std::collections::BTreeSet;

use bgpsecx::federation::wire::{PushBody, QueryBody};
use bgpsecx::federation::{decode_message, encode_message, FederationMessage, IxpId, Key, ObservationClaim, Payload, Session};
use bgpsecx::Asn;

fn main() {
    let key = Key::new([7; 32]);
    let sender = IxpId::new("ix-a").unwrap();
    let query = FederationMessage {
        sender: sender.clone(),
        sequence: 1,
        payload: Payload::Query(QueryBody { prefix: "198.51.100.0/24".parse().unwrap() }),
    };
    let frame = encode_message(&query, &key).unwrap();
    println!("query frame, {} bytes: {}", frame.len(), hex::encode(&frame));
    println!("decoded: {:?}", decode_message(&frame, &key).unwrap().payload);

    let mut tampered = frame.clone();
    tampered[frame.len() / 2] ^= 0x01;
    println!("one flipped bit: {}", decode_message(&tampered, &key).unwrap_err());
    println!("wrong key: {}", decode_message(&frame, &Key::new([8; 32])).unwrap_err());

    let claim = ObservationClaim {
        prefix: "198.51.100.0/24".parse().unwrap(),
        origins_seen: BTreeSet::from([Asn::new(65020)]),
        first_seen: 1_700_000_000,
        last_seen: 1_700_086_400,
        claimant: sender.clone(),
    };
    let push = FederationMessage { sender, sequence: 2, payload: Payload::ObservationPush(PushBody { claims: vec![claim] }) };
    let push_frame = encode_message(&push, &key).unwrap();

    let mut session = Session::new();
    println!("first delivery: seq {}", session.accept(&frame, &key).unwrap().sequence);
    println!("next: seq {}", session.accept(&push_frame, &key).unwrap().sequence);
    println!("replayed: {}", session.accept(&frame, &key).unwrap_err());
}

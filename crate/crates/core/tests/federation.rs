use std::sync::Arc;

use bgpsecx::federation::daemon::Daemon;
use bgpsecx::federation::{IxpId, Key, PeerConfig, PeerSet, TcpFederationClient};
use bgpsecx::filter::load_whitelist;
use bgpsecx::policy::{Engine, PolicyConfig};
use bgpsecx::rpki::RoaStore;
use bgpsecx::Asn;

const SERVER_LIST: &str = "ixp = \"ix-b\"\nversion = 3\n[[members]]\nasn = 65010\nprefixes = [\"198.51.100.0/24\"]\n";
const CLIENT_LIST: &str = "ixp = \"ix-a\"\nversion = 5\n[[members]]\nasn = 65020\nprefixes = [\"192.0.2.0/24\"]\n";

async fn sync_with(trust: bool) -> (Option<bgpsecx::filter::Whitelist>, Engine) {
    let (a, b) = (IxpId::new("ix-a").unwrap(), IxpId::new("ix-b").unwrap());
    let key = Key::new([7; 32]);
    let server_list = load_whitelist(SERVER_LIST).unwrap();
    let engine = Engine::new(b.clone(), Arc::new(RoaStore::new()), Arc::new(server_list), PolicyConfig::default());
    let mut peers = PeerSet::new(b.clone());
    peers.add(PeerConfig { id: a.clone(), address: String::new(), key: key.clone(), trust_whitelist: trust }).unwrap();
    let daemon = Daemon::bind("127.0.0.1:0", peers, engine).await.unwrap();
    let addr = daemon.local_addr().unwrap();
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(daemon.run(async {
        let _ = stopped.await;
    }));
    let got = tokio::task::spawn_blocking(move || {
        let mut peers = PeerSet::new(a);
        peers.add(PeerConfig { id: b.clone(), address: addr.to_string(), key, trust_whitelist: true }).unwrap();
        TcpFederationClient::new(peers).sync_whitelist(&b, &load_whitelist(CLIENT_LIST).unwrap())
    })
    .await
    .unwrap()
    .unwrap();
    let _ = stop.send(());
    (got, server.await.unwrap().engine)
}

#[tokio::test]
async fn trusted_sync_merges_both_ways() {
    let (got, engine) = sync_with(true).await;
    assert_eq!(got.unwrap(), load_whitelist(SERVER_LIST).unwrap());
    assert!(engine.whitelist().entry(Asn::new(65010)).is_some());
    assert!(engine.whitelist().entry(Asn::new(65020)).is_some());
}

#[tokio::test]
async fn untrusted_sync_is_ignored() {
    let (got, engine) = sync_with(false).await;
    assert!(got.is_some());
    assert!(engine.whitelist().entry(Asn::new(65020)).is_none());
    assert!(engine.whitelist().entry(Asn::new(65010)).is_some());
}

#[tokio::test]
async fn equal_lists_skip_the_transfer() {
    let (a, b) = (IxpId::new("ix-a").unwrap(), IxpId::new("ix-b").unwrap());
    let key = Key::new([9; 32]);
    let list = load_whitelist(SERVER_LIST).unwrap();
    let engine = Engine::new(b.clone(), Arc::new(RoaStore::new()), Arc::new(list.clone()), PolicyConfig::default());
    let mut peers = PeerSet::new(b.clone());
    peers.add(PeerConfig { id: a.clone(), address: String::new(), key: key.clone(), trust_whitelist: true }).unwrap();
    let daemon = Daemon::bind("127.0.0.1:0", peers, engine).await.unwrap();
    let addr = daemon.local_addr().unwrap();
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(daemon.run(async {
        let _ = stopped.await;
    }));
    let got = tokio::task::spawn_blocking(move || {
        let mut peers = PeerSet::new(a);
        peers.add(PeerConfig { id: b.clone(), address: addr.to_string(), key, trust_whitelist: true }).unwrap();
        TcpFederationClient::new(peers).sync_whitelist(&b, &list)
    })
    .await
    .unwrap()
    .unwrap();
    assert!(got.is_none());
    let _ = stop.send(());
    assert_eq!(server.await.unwrap().stats.auth_failures, 0);
}

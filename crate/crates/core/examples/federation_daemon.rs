//! Two IXPs on localhost: ix-b serves its history, ix-a queries it.

use std::sync::Arc;

use bgpsecx::federation::daemon::Daemon;
use bgpsecx::federation::{FederationClient, IxpId, Key, NoFederation, PeerConfig, PeerSet, TcpFederationClient};
use bgpsecx::filter::Whitelist;
use bgpsecx::policy::{Engine, PolicyConfig};
use bgpsecx::rpki::RoaStore;
use bgpsecx::{AsPath, Asn, RouteAnnouncement};

#[tokio::main]
async fn main() {
    let (a, b) = (IxpId::new("ix-a").unwrap(), IxpId::new("ix-b").unwrap());
    let key = Key::new([42; 32]);

    let mut engine = Engine::new(b.clone(), Arc::new(RoaStore::new()), Arc::new(Whitelist::new("ix-b", 1)), PolicyConfig::default());
    let seen = RouteAnnouncement::announce("198.51.100.0/24".parse().unwrap(), AsPath::from_sequence([Asn::new(65020)]), Asn::new(65020), 1_700_000_000);
    engine.process(&seen, &mut NoFederation);

    let mut b_peers = PeerSet::new(b.clone());
    b_peers.add(PeerConfig { id: a.clone(), address: String::new(), key: key.clone(), trust_whitelist: false }).unwrap();
    let daemon = Daemon::bind("127.0.0.1:0", b_peers, engine).await.unwrap();
    let addr = daemon.local_addr().unwrap();
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(daemon.run(async {
        let _ = stopped.await;
    }));

    let claims = tokio::task::spawn_blocking(move || {
        let mut a_peers = PeerSet::new(a);
        a_peers.add(PeerConfig { id: b, address: addr.to_string(), key, trust_whitelist: false }).unwrap();
        TcpFederationClient::new(a_peers).query(&"198.51.100.0/25".parse().unwrap())
    })
    .await
    .unwrap()
    .unwrap();
    for c in &claims {
        println!("{} says {} was originated by {:?}", c.claimant, c.prefix, c.origins_seen);
    }

    let _ = stop.send(());
    let report = server.await.unwrap();
    println!("{:?}", report.stats);
}

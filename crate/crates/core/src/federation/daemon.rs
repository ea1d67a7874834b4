//! The long-running federation endpoint.
//!
//! Connections run as independent tasks. Every decoded frame is handed to
//! one owner task, which holds the engine, the replay guard and the synced
//! whitelists, so all state changes happen in one place.

use std::collections::BTreeMap;
use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use log::{debug, info, warn};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinSet;

use super::wire::{frame_length, peek_sender, DigestBody, ResponseBody, SyncBody};
use super::{
    encode_message, handle_query, needs_sync, whitelist_digest, FederationError, FederationMessage, IxpId, Key,
    Payload, PeerSet, Session,
};
use crate::filter::{merge_cluster, Whitelist};
use crate::policy::Engine;

const SHUTDOWN_GRACE: Duration = Duration::from_secs(2);

#[derive(Debug, Default)]
pub struct DaemonStats {
    pub connections: AtomicU64,
    pub frames: AtomicU64,
    pub auth_failures: AtomicU64,
    pub replays: AtomicU64,
    pub unknown_peers: AtomicU64,
    pub malformed: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StatsSnapshot {
    pub connections: u64,
    pub frames: u64,
    pub auth_failures: u64,
    pub replays: u64,
    pub unknown_peers: u64,
    pub malformed: u64,
}

impl DaemonStats {
    pub fn snapshot(&self) -> StatsSnapshot {
        let get = |c: &AtomicU64| c.load(Ordering::Relaxed);
        StatsSnapshot {
            connections: get(&self.connections),
            frames: get(&self.frames),
            auth_failures: get(&self.auth_failures),
            replays: get(&self.replays),
            unknown_peers: get(&self.unknown_peers),
            malformed: get(&self.malformed),
        }
    }
}

struct Request {
    frame: Vec<u8>,
    key: Key,
    reply: oneshot::Sender<Result<Option<Vec<u8>>, FederationError>>,
}

/// State owned by the single writer.
struct Owner {
    engine: Engine,
    peers: Arc<PeerSet>,
    session: Session,
    local_whitelist: Whitelist,
    synced: BTreeMap<IxpId, Whitelist>,
    sequence: u64,
}

impl Owner {
    fn handle(&mut self, frame: &[u8], key: &Key) -> Result<Option<Vec<u8>>, FederationError> {
        let msg = self.session.accept(frame, key)?;
        let reply = match msg.payload {
            Payload::Query(q) => {
                let claims = handle_query(self.engine.history(), &q.prefix, &self.engine.local);
                Some(Payload::Response(ResponseBody { prefix: q.prefix, claims }))
            }
            Payload::ObservationPush(push) => {
                for claim in push.claims.iter().filter(|c| c.claimant == msg.sender && c.is_well_formed()) {
                    self.engine.history_mut().record_claim(claim);
                }
                None
            }
            Payload::WhitelistDigest(d) => Some(if needs_sync(&self.local_whitelist, &d.digest) {
                Payload::WhitelistSync(SyncBody { whitelist: self.local_whitelist.clone() })
            } else {
                Payload::WhitelistDigest(DigestBody {
                    digest: whitelist_digest(&self.local_whitelist),
                    version: self.local_whitelist.version,
                })
            }),
            Payload::WhitelistSync(s) => {
                let trusted = self.peers.get(&msg.sender).is_some_and(|p| p.trust_whitelist);
                if trusted {
                    self.synced.insert(msg.sender.clone(), s.whitelist);
                    self.rebuild_whitelist();
                } else {
                    debug!("ignoring whitelist from untrusted peer {}", msg.sender);
                }
                None
            }
            Payload::Response(_) => None,
        };
        match reply {
            None => Ok(None),
            Some(payload) => {
                self.sequence += 1;
                let out = FederationMessage { sender: self.engine.local.clone(), sequence: self.sequence, payload };
                encode_message(&out, key).map(Some)
            }
        }
    }

    fn rebuild_whitelist(&mut self) {
        let merged = merge_cluster(std::iter::once(&self.local_whitelist).chain(self.synced.values()))
            .expect("local whitelist always present");
        info!("cluster whitelist now has {} members", merged.entries.len());
        self.engine.set_whitelist(Arc::new(merged));
    }
}

pub struct Daemon {
    listener: TcpListener,
    peers: Arc<PeerSet>,
    engine: Engine,
    stats: Arc<DaemonStats>,
}

/// What the daemon hands back after shutdown.
pub struct DaemonReport {
    pub engine: Engine,
    pub stats: StatsSnapshot,
}

impl Daemon {
    pub async fn bind(addr: &str, peers: PeerSet, engine: Engine) -> io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        Ok(Daemon { listener, peers: Arc::new(peers), engine, stats: Arc::default() })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn stats(&self) -> Arc<DaemonStats> {
        self.stats.clone()
    }

    /// Serves until `shutdown` resolves.
    pub async fn run(self, shutdown: impl Future<Output = ()>) -> DaemonReport {
        let Daemon { listener, peers, engine, stats } = self;
        let start = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_micros() as u64).unwrap_or(0);
        let mut owner = Owner {
            local_whitelist: engine.whitelist().clone(),
            engine,
            peers: peers.clone(),
            session: Session::new(),
            synced: BTreeMap::new(),
            sequence: start,
        };
        let (tx, mut rx) = mpsc::channel::<Request>(256);
        let owner_task = tokio::spawn(async move {
            while let Some(req) = rx.recv().await {
                let _ = req.reply.send(owner.handle(&req.frame, &req.key));
            }
            owner
        });
        let mut connections = JoinSet::new();

        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                Some(_) = connections.join_next(), if !connections.is_empty() => {}
                accepted = listener.accept() => match accepted {
                    Ok((stream, remote)) => {
                        stats.connections.fetch_add(1, Ordering::Relaxed);
                        let (peers, stats, tx) = (peers.clone(), stats.clone(), tx.clone());
                        connections.spawn(async move {
                            if let Err(e) = connection(stream, peers, stats, tx).await {
                                debug!("connection from {remote} closed: {e}");
                            }
                        });
                    }
                    Err(e) => warn!("accept failed: {e}"),
                },
            }
        }
        drop(listener);
        // Open connections get a moment to finish what they already sent.
        let drained = tokio::time::timeout(SHUTDOWN_GRACE, async {
            while connections.join_next().await.is_some() {}
        })
        .await;
        if drained.is_err() {
            connections.shutdown().await;
        }
        drop(tx);
        let owner = owner_task.await.expect("federation owner task panicked");
        DaemonReport { engine: owner.engine, stats: stats.snapshot() }
    }
}

async fn connection(
    mut stream: TcpStream,
    peers: Arc<PeerSet>,
    stats: Arc<DaemonStats>,
    tx: mpsc::Sender<Request>,
) -> Result<(), FederationError> {
    loop {
        let mut header = [0u8; 4];
        match stream.read_exact(&mut header).await {
            Ok(_) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e.into()),
        }
        let len = frame_length(header).inspect_err(|_| {
            stats.malformed.fetch_add(1, Ordering::Relaxed);
        })?;
        let mut frame = vec![0u8; len];
        frame[..4].copy_from_slice(&header);
        stream.read_exact(&mut frame[4..]).await?;
        stats.frames.fetch_add(1, Ordering::Relaxed);

        let key = match peek_sender(&frame).ok().and_then(|id| peers.get(&id)) {
            Some(peer) => peer.key.clone(),
            None => {
                stats.unknown_peers.fetch_add(1, Ordering::Relaxed);
                return Err(FederationError::UnknownPeer("frame from unconfigured sender".into()));
            }
        };
        let (reply_tx, reply_rx) = oneshot::channel();
        if tx.send(Request { frame, key, reply: reply_tx }).await.is_err() {
            return Ok(());
        }
        let Ok(result) = reply_rx.await else { return Ok(()) };
        match result {
            Ok(Some(bytes)) => stream.write_all(&bytes).await?,
            Ok(None) => {}
            Err(e) => {
                let counter = match e {
                    FederationError::AuthFailure => &stats.auth_failures,
                    FederationError::ReplayDetected { .. } => &stats.replays,
                    _ => &stats.malformed,
                };
                counter.fetch_add(1, Ordering::Relaxed);
                warn!("dropping connection: {e}");
                return Err(e);
            }
        }
    }
}

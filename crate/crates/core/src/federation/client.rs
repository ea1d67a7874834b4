//! Outbound side of the federation: asking peers what they have seen.

use std::io::Write;
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use log::{debug, warn};

use super::wire::{read_frame, DigestBody, PushBody, QueryBody, SyncBody};
use super::{
    encode_message, whitelist_digest, FederationError, FederationMessage, IxpId, ObservationClaim, Payload,
    PeerConfig, PeerSet, Session,
};
use crate::filter::Whitelist;
use crate::model::IpPrefix;

/// Source of peer claims for the policy pipeline.
pub trait FederationClient {
    /// Claims from all reachable peers. An error means no peer answered.
    fn query(&mut self, prefix: &IpPrefix) -> Result<Vec<ObservationClaim>, FederationError>;

    /// Whether there is anyone to ask.
    fn has_peers(&self) -> bool {
        true
    }
}

/// Stand-alone operation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoFederation;

impl FederationClient for NoFederation {
    fn query(&mut self, _prefix: &IpPrefix) -> Result<Vec<ObservationClaim>, FederationError> {
        Ok(Vec::new())
    }

    fn has_peers(&self) -> bool {
        false
    }
}

/// Blocking TCP client, one short connection per exchange.
///
/// Sequence numbers start at the current time in microseconds so a
/// restarted client stays ahead of what peers remember.
pub struct TcpFederationClient {
    peers: PeerSet,
    sequence: u64,
    timeout: Duration,
    replies: Session,
}

impl TcpFederationClient {
    pub fn new(peers: PeerSet) -> Self {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_micros() as u64).unwrap_or(0);
        TcpFederationClient {
            peers,
            sequence: now,
            timeout: Duration::from_secs(2),
            replies: Session::new(),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn local(&self) -> &IxpId {
        &self.peers.local
    }

    fn next_message(&mut self, payload: Payload) -> FederationMessage {
        self.sequence += 1;
        FederationMessage {
            sender: self.peers.local.clone(),
            sequence: self.sequence,
            payload,
        }
    }

    fn connect(&self, peer: &PeerConfig) -> Result<TcpStream, FederationError> {
        let addr = peer
            .address
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| FederationError::UnknownPeer(peer.address.clone()))?;
        let stream = TcpStream::connect_timeout(&addr, self.timeout)?;
        stream.set_read_timeout(Some(self.timeout))?;
        stream.set_write_timeout(Some(self.timeout))?;
        Ok(stream)
    }

    /// Sends one message and, if `expect_reply`, waits for one frame back.
    fn exchange(
        &mut self,
        peer: &PeerConfig,
        stream: &mut TcpStream,
        payload: Payload,
        expect_reply: bool,
    ) -> Result<Option<FederationMessage>, FederationError> {
        let msg = self.next_message(payload);
        stream.write_all(&encode_message(&msg, &peer.key)?)?;
        if !expect_reply {
            return Ok(None);
        }
        let frame = read_frame(stream)?.ok_or(FederationError::Truncated)?;
        let reply = self.replies.accept(&frame, &peer.key)?;
        if reply.sender != peer.id {
            return Err(FederationError::UnexpectedReply(format!("sender {}", reply.sender)));
        }
        Ok(Some(reply))
    }

    fn query_peer(&mut self, peer: &PeerConfig, prefix: &IpPrefix) -> Result<Vec<ObservationClaim>, FederationError> {
        let mut stream = self.connect(peer)?;
        let reply = self.exchange(peer, &mut stream, Payload::Query(QueryBody { prefix: *prefix }), true)?;
        match reply.map(|m| m.payload) {
            Some(Payload::Response(body)) if body.prefix == *prefix => {
                // A peer may only speak for itself.
                Ok(body.claims.into_iter().filter(|c| c.claimant == peer.id && c.is_well_formed()).collect())
            }
            other => Err(FederationError::UnexpectedReply(format!("{other:?}"))),
        }
    }

    /// Pushes local claims to every peer; returns how many accepted the
    /// connection.
    pub fn push_observations(&mut self, claims: &[ObservationClaim]) -> usize {
        let peers: Vec<PeerConfig> = self.peers.iter().cloned().collect();
        let mut sent = 0;
        for peer in &peers {
            let res = self.connect(peer).and_then(|mut s| {
                self.exchange(peer, &mut s, Payload::ObservationPush(PushBody { claims: claims.to_vec() }), false)
            });
            match res {
                Ok(_) => sent += 1,
                Err(e) => warn!("push to {} failed: {e}", peer.id),
            }
        }
        sent
    }

    /// Digest exchange with one peer. Returns the peer's whitelist when
    /// the two differ; our own list is sent back in that case.
    pub fn sync_whitelist(&mut self, peer_id: &IxpId, local: &Whitelist) -> Result<Option<Whitelist>, FederationError> {
        let peer = self
            .peers
            .get(peer_id)
            .cloned()
            .ok_or_else(|| FederationError::UnknownPeer(peer_id.to_string()))?;
        let mut stream = self.connect(&peer)?;
        let digest = DigestBody { digest: whitelist_digest(local), version: local.version };
        let reply = self.exchange(&peer, &mut stream, Payload::WhitelistDigest(digest), true)?;
        match reply.map(|m| m.payload) {
            Some(Payload::WhitelistDigest(_)) => Ok(None),
            Some(Payload::WhitelistSync(body)) => {
                let ours = Payload::WhitelistSync(SyncBody { whitelist: local.clone() });
                self.exchange(&peer, &mut stream, ours, false)?;
                Ok(Some(body.whitelist))
            }
            other => Err(FederationError::UnexpectedReply(format!("{other:?}"))),
        }
    }
}

impl FederationClient for TcpFederationClient {
    fn query(&mut self, prefix: &IpPrefix) -> Result<Vec<ObservationClaim>, FederationError> {
        let peers: Vec<PeerConfig> = self.peers.iter().cloned().collect();
        let mut claims = Vec::new();
        let mut answered = 0;
        for peer in &peers {
            match self.query_peer(peer, prefix) {
                Ok(c) => {
                    debug!("{} answered {} claims for {prefix}", peer.id, c.len());
                    answered += 1;
                    claims.extend(c);
                }
                Err(e) => warn!("query to {} failed: {e}", peer.id),
            }
        }
        if answered == 0 && !peers.is_empty() {
            return Err(FederationError::Unavailable);
        }
        Ok(claims)
    }

    fn has_peers(&self) -> bool {
        !self.peers.is_empty()
    }
}

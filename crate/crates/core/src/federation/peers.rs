//! Peer configuration file.
//!
//! ```toml
//! ixp = "ix-a"
//!
//! [[peers]]
//! id = "ix-b"
//! address = "127.0.0.1:7179"
//! key = "<64 hex digits>"
//! trust_whitelist = true
//! ```

use std::collections::BTreeMap;

use serde::Deserialize;

use super::{IxpId, Key};

#[derive(Clone, Debug)]
pub struct PeerConfig {
    pub id: IxpId,
    pub address: String,
    pub key: Key,
    /// Whether whitelists synced from this peer join the cluster list.
    pub trust_whitelist: bool,
}

#[derive(Clone, Debug)]
pub struct PeerSet {
    pub local: IxpId,
    peers: BTreeMap<IxpId, PeerConfig>,
}

#[derive(Debug, thiserror::Error)]
pub enum PeersError {
    #[error("peer config: {0}")]
    Syntax(String),
    #[error("peer {id}: {reason}")]
    BadPeer { id: String, reason: String },
    #[error("peer {0} listed twice")]
    Duplicate(IxpId),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PeersDocument {
    ixp: IxpId,
    #[serde(default)]
    peers: Vec<PeerDocument>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PeerDocument {
    id: IxpId,
    address: String,
    key: String,
    #[serde(default)]
    trust_whitelist: bool,
}

impl PeerSet {
    pub fn new(local: IxpId) -> Self {
        PeerSet { local, peers: BTreeMap::new() }
    }

    pub fn add(&mut self, peer: PeerConfig) -> Result<(), PeersError> {
        if self.peers.contains_key(&peer.id) || peer.id == self.local {
            return Err(PeersError::Duplicate(peer.id));
        }
        self.peers.insert(peer.id.clone(), peer);
        Ok(())
    }

    pub fn load(text: &str) -> Result<Self, PeersError> {
        let doc: PeersDocument = toml::from_str(text).map_err(|e| PeersError::Syntax(e.to_string()))?;
        let mut set = PeerSet::new(doc.ixp);
        for p in doc.peers {
            let key = Key::from_hex(&p.key).map_err(|reason| PeersError::BadPeer { id: p.id.to_string(), reason })?;
            set.add(PeerConfig {
                id: p.id,
                address: p.address,
                key,
                trust_whitelist: p.trust_whitelist,
            })?;
        }
        Ok(set)
    }

    pub fn get(&self, id: &IxpId) -> Option<&PeerConfig> {
        self.peers.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PeerConfig> {
        self.peers.values()
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: &str = "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f";

    #[test]
    fn load_example() {
        let text = format!(
            "ixp = \"ix-a\"\n[[peers]]\nid = \"ix-b\"\naddress = \"127.0.0.1:7000\"\nkey = \"{K}\"\ntrust_whitelist = true\n"
        );
        let set = PeerSet::load(&text).unwrap();
        assert_eq!(set.local.as_str(), "ix-a");
        let b = set.get(&"ix-b".parse().unwrap()).unwrap();
        assert!(b.trust_whitelist);
        assert_eq!(b.key.to_hex(), K);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(PeerSet::load("ixp = \"a\"\n[[peers]]\nid = \"b\"\naddress = \"x\"\nkey = \"00\"\n"), Err(PeersError::BadPeer { .. })));
        let dup = format!("ixp = \"a\"\n[[peers]]\nid = \"b\"\naddress = \"x\"\nkey = \"{K}\"\n[[peers]]\nid = \"b\"\naddress = \"y\"\nkey = \"{K}\"\n");
        assert!(matches!(PeerSet::load(&dup), Err(PeersError::Duplicate(_))));
        assert!(matches!(PeerSet::load("ixp = \"a\"\nbogus = 1\n"), Err(PeersError::Syntax(_))));
    }
}

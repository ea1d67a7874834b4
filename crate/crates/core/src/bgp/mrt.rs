//! MRT trace files (RFC 6396): record framing, TABLE_DUMP_V2 RIB dumps
//! and BGP4MP update streams.

use std::io::{self, Read, Write};
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use super::update::{parse_attributes, parse_update_with, AsnWidth, BgpUpdate, UpdateError};
use crate::model::{Afi, Asn, IpPrefix, RouteAnnouncement};

pub const TABLE_DUMP_V2: u16 = 13;
pub const BGP4MP: u16 = 16;
pub const BGP4MP_ET: u16 = 17;

pub const PEER_INDEX_TABLE: u16 = 1;
pub const RIB_IPV4_UNICAST: u16 = 2;
pub const RIB_IPV6_UNICAST: u16 = 4;

pub const BGP4MP_STATE_CHANGE: u16 = 0;
pub const BGP4MP_MESSAGE: u16 = 1;
pub const BGP4MP_MESSAGE_AS4: u16 = 4;

pub const COMMON_HEADER_LEN: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MrtRecord {
    pub timestamp: u32,
    pub mrt_type: u16,
    pub subtype: u16,
    /// Exactly the declared length. For BGP4MP_ET this starts with the
    /// 4-octet microsecond field.
    pub payload: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
pub enum MrtError {
    #[error("record truncated by end of input")]
    TruncatedRecord,
    #[error("unsupported MRT type {0}")]
    UnsupportedType(u16),
    #[error("unsupported subtype {subtype} of MRT type {mrt_type}")]
    UnknownSubtype { mrt_type: u16, subtype: u16 },
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("peer index {0} not in peer table")]
    UnknownPeer(u16),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl MrtError {
    /// Unsupported content that a replay skips rather than counts as bad.
    pub fn is_skip(&self) -> bool {
        matches!(self, MrtError::UnsupportedType(_) | MrtError::UnknownSubtype { .. })
    }
}

//------------ Framing -------------------------------------------------------

/// Iterator over the records of an MRT byte stream. Stops after the first
/// error.
pub struct MrtReader<R> {
    inner: R,
    done: bool,
}

pub fn read_mrt_stream<R: Read>(source: R) -> MrtReader<R> {
    MrtReader { inner: source, done: false }
}

/// Fills `buf`, returning how many octets were read before EOF.
fn read_full(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(n)
}

impl<R: Read> Iterator for MrtReader<R> {
    type Item = Result<MrtRecord, MrtError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut header = [0u8; COMMON_HEADER_LEN];
        let res = (|| {
            match read_full(&mut self.inner, &mut header)? {
                0 => return Ok(None),
                COMMON_HEADER_LEN => {}
                _ => return Err(MrtError::TruncatedRecord),
            }
            let len = u32::from_be_bytes(header[8..12].try_into().unwrap()) as usize;
            let mut payload = Vec::new();
            let got = (&mut self.inner).take(len as u64).read_to_end(&mut payload)?;
            if got < len {
                return Err(MrtError::TruncatedRecord);
            }
            Ok(Some(MrtRecord {
                timestamp: u32::from_be_bytes(header[0..4].try_into().unwrap()),
                mrt_type: u16::from_be_bytes([header[4], header[5]]),
                subtype: u16::from_be_bytes([header[6], header[7]]),
                payload,
            }))
        })();
        match res {
            Ok(Some(rec)) => Some(Ok(rec)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub fn write_record(w: &mut impl Write, rec: &MrtRecord) -> io::Result<()> {
    w.write_all(&rec.timestamp.to_be_bytes())?;
    w.write_all(&rec.mrt_type.to_be_bytes())?;
    w.write_all(&rec.subtype.to_be_bytes())?;
    w.write_all(&(rec.payload.len() as u32).to_be_bytes())?;
    w.write_all(&rec.payload)
}

//------------ Peer table ----------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Peer {
    pub bgp_id: Ipv4Addr,
    pub address: IpAddr,
    pub asn: Asn,
}

/// State carried between records: the most recent PEER_INDEX_TABLE.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PeerTable {
    pub collector_id: Option<Ipv4Addr>,
    pub view_name: String,
    pub peers: Vec<Peer>,
}

impl PeerTable {
    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
}

fn short() -> MrtError {
    MrtError::MalformedPayload("record payload too short".into())
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MrtError> {
        if self.buf.len() < n {
            return Err(short());
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, MrtError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, MrtError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, MrtError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn addr(&mut self, v6: bool) -> Result<IpAddr, MrtError> {
        Ok(if v6 {
            IpAddr::V6(Ipv6Addr::from(<[u8; 16]>::try_from(self.take(16)?).unwrap()))
        } else {
            IpAddr::V4(Ipv4Addr::from(<[u8; 4]>::try_from(self.take(4)?).unwrap()))
        })
    }
}

//------------ Decoding to announcements -------------------------------------

/// Turns one record into announcements. PEER_INDEX_TABLE only updates
/// `peers`. Unsupported types and subtypes come back as skip errors.
pub fn mrt_to_announcements(rec: &MrtRecord, peers: &mut PeerTable) -> Result<Vec<RouteAnnouncement>, MrtError> {
    match (rec.mrt_type, rec.subtype) {
        (TABLE_DUMP_V2, PEER_INDEX_TABLE) => {
            *peers = parse_peer_index(&rec.payload)?;
            Ok(Vec::new())
        }
        (TABLE_DUMP_V2, RIB_IPV4_UNICAST) => parse_rib(&rec.payload, Afi::Ipv4, peers),
        (TABLE_DUMP_V2, RIB_IPV6_UNICAST) => parse_rib(&rec.payload, Afi::Ipv6, peers),
        (BGP4MP | BGP4MP_ET, BGP4MP_MESSAGE | BGP4MP_MESSAGE_AS4) => {
            let payload = if rec.mrt_type == BGP4MP_ET {
                rec.payload.get(4..).ok_or_else(short)?
            } else {
                &rec.payload[..]
            };
            let as4 = rec.subtype == BGP4MP_MESSAGE_AS4;
            parse_bgp4mp_message(payload, as4, rec.timestamp as u64)
        }
        (TABLE_DUMP_V2 | BGP4MP | BGP4MP_ET, subtype) => Err(MrtError::UnknownSubtype { mrt_type: rec.mrt_type, subtype }),
        (other, _) => Err(MrtError::UnsupportedType(other)),
    }
}

pub fn parse_peer_index(payload: &[u8]) -> Result<PeerTable, MrtError> {
    let mut c = Cursor { buf: payload };
    let collector = Ipv4Addr::from(c.u32()?);
    let name_len = c.u16()? as usize;
    let view_name = String::from_utf8_lossy(c.take(name_len)?).into_owned();
    let count = c.u16()?;
    let mut peers = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let ty = c.u8()?;
        let bgp_id = Ipv4Addr::from(c.u32()?);
        let address = c.addr(ty & 0x01 != 0)?;
        let asn = if ty & 0x02 != 0 { c.u32()? } else { c.u16()? as u32 };
        peers.push(Peer { bgp_id, address, asn: Asn::new(asn) });
    }
    Ok(PeerTable { collector_id: Some(collector), view_name, peers })
}

fn parse_rib(payload: &[u8], afi: Afi, peers: &PeerTable) -> Result<Vec<RouteAnnouncement>, MrtError> {
    let mut c = Cursor { buf: payload };
    let _sequence = c.u32()?;
    let len = c.u8()?;
    if len > afi.max_len() {
        return Err(MrtError::Update(UpdateError::MalformedNlri));
    }
    let raw = c.take((len as usize).div_ceil(8))?;
    let mut octets = [0u8; 16];
    octets[..raw.len()].copy_from_slice(raw);
    let prefix = IpPrefix::canonicalize(afi, &octets[..afi.octets()], len)
        .map_err(|_| MrtError::Update(UpdateError::MalformedNlri))?;
    let count = c.u16()?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let index = c.u16()?;
        let originated = c.u32()?;
        let attr_len = c.u16()? as usize;
        let attrs = c.take(attr_len)?;
        let peer = peers.peers.get(index as usize).ok_or(MrtError::UnknownPeer(index))?;
        let mut u = BgpUpdate::default();
        parse_attributes(attrs, AsnWidth::Four, true, &mut u)?;
        let mut ann = RouteAnnouncement::announce(prefix, u.as_path.unwrap_or_default(), peer.asn, originated as u64);
        ann.next_hop = u.next_hop;
        out.push(ann);
    }
    Ok(out)
}

fn parse_bgp4mp_message(payload: &[u8], as4: bool, timestamp: u64) -> Result<Vec<RouteAnnouncement>, MrtError> {
    let mut c = Cursor { buf: payload };
    let peer_as = if as4 { c.u32()? } else { c.u16()? as u32 };
    let _local_as = if as4 { c.u32()? } else { c.u16()? as u32 };
    let _ifindex = c.u16()?;
    let afi = c.u16()?;
    let v6 = match afi {
        1 => false,
        2 => true,
        other => return Err(MrtError::MalformedPayload(format!("address family {other}"))),
    };
    c.addr(v6)?;
    c.addr(v6)?;
    let width = if as4 { AsnWidth::Four } else { AsnWidth::Two };
    let update = match parse_update_with(c.buf, width) {
        Ok(u) => u,
        // OPEN, KEEPALIVE and friends carry no routes.
        Err(UpdateError::NotAnUpdate(_)) => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let member = Asn::new(peer_as);
    let mut out = Vec::with_capacity(update.withdrawn.len() + update.nlri.len());
    out.extend(update.withdrawn.iter().map(|p| RouteAnnouncement::withdraw(*p, member, timestamp)));
    if let Some(path) = &update.as_path {
        for p in &update.nlri {
            let mut ann = RouteAnnouncement::announce(*p, path.clone(), member, timestamp);
            ann.next_hop = update.next_hop;
            out.push(ann);
        }
    }
    Ok(out)
}

//------------ Encoding ------------------------------------------------------

pub fn encode_peer_index(table: &PeerTable) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&table.collector_id.unwrap_or(Ipv4Addr::UNSPECIFIED).octets());
    out.extend_from_slice(&(table.view_name.len() as u16).to_be_bytes());
    out.extend_from_slice(table.view_name.as_bytes());
    out.extend_from_slice(&(table.peers.len() as u16).to_be_bytes());
    for p in &table.peers {
        let ty = if p.address.is_ipv6() { 0x03 } else { 0x02 };
        out.push(ty);
        out.extend_from_slice(&p.bgp_id.octets());
        match p.address {
            IpAddr::V4(a) => out.extend_from_slice(&a.octets()),
            IpAddr::V6(a) => out.extend_from_slice(&a.octets()),
        }
        out.extend_from_slice(&p.asn.value().to_be_bytes());
    }
    out
}

/// One RIB entry: (peer index, originated time, route attributes).
pub fn encode_rib(sequence: u32, prefix: &IpPrefix, entries: &[(u16, u32, BgpUpdate)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&sequence.to_be_bytes());
    super::update::encode_nlri(std::slice::from_ref(prefix), &mut out);
    out.extend_from_slice(&(entries.len() as u16).to_be_bytes());
    for (index, originated, attrs) in entries {
        let attrs = super::update::encode_attributes(attrs, AsnWidth::Four, true);
        out.extend_from_slice(&index.to_be_bytes());
        out.extend_from_slice(&originated.to_be_bytes());
        out.extend_from_slice(&(attrs.len() as u16).to_be_bytes());
        out.extend_from_slice(&attrs);
    }
    out
}

/// BGP4MP MESSAGE or MESSAGE_AS4 body around an encoded BGP message.
pub fn encode_bgp4mp(peer_as: Asn, local_as: Asn, peer: IpAddr, local: IpAddr, as4: bool, message: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    if as4 {
        out.extend_from_slice(&peer_as.value().to_be_bytes());
        out.extend_from_slice(&local_as.value().to_be_bytes());
    } else {
        out.extend_from_slice(&(peer_as.value() as u16).to_be_bytes());
        out.extend_from_slice(&(local_as.value() as u16).to_be_bytes());
    }
    out.extend_from_slice(&0u16.to_be_bytes());
    match (peer, local) {
        (IpAddr::V4(p), IpAddr::V4(l)) => {
            out.extend_from_slice(&1u16.to_be_bytes());
            out.extend_from_slice(&p.octets());
            out.extend_from_slice(&l.octets());
        }
        (p, l) => {
            let v6 = |a: IpAddr| match a {
                IpAddr::V6(a) => a,
                IpAddr::V4(a) => a.to_ipv6_mapped(),
            };
            out.extend_from_slice(&2u16.to_be_bytes());
            out.extend_from_slice(&v6(p).octets());
            out.extend_from_slice(&v6(l).octets());
        }
    }
    out.extend_from_slice(message);
    out
}

//============ Tests =========================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AsPath;

    fn p(s: &str) -> IpPrefix {
        s.parse().unwrap()
    }

    #[test]
    fn empty_and_truncated_streams() {
        assert_eq!(read_mrt_stream(&[][..]).count(), 0);
        let mut bytes = vec![0, 0, 0, 1, 0, 13, 0, 1, 0, 0, 0, 10];
        bytes.extend_from_slice(&[1, 2, 3]);
        let items: Vec<_> = read_mrt_stream(&bytes[..]).collect();
        assert_eq!(items.len(), 1);
        assert!(matches!(items[0], Err(MrtError::TruncatedRecord)));
        let items: Vec<_> = read_mrt_stream(&bytes[..5]).collect();
        assert!(matches!(items[..], [Err(MrtError::TruncatedRecord)]));
    }

    /// PEER_INDEX_TABLE with two peers and a RIB_IPV4_UNICAST entry,
    /// assembled by hand from the RFC 6396 field layout.
    fn hand_fixture() -> Vec<u8> {
        let mut pit = vec![192, 0, 2, 254, 0, 0, 0, 2];
        pit.extend_from_slice(&[0x02, 10, 0, 0, 1, 192, 0, 2, 10, 0, 0, 0xfd, 0xf2]); // AS65010
        pit.extend_from_slice(&[0x00, 10, 0, 0, 2, 192, 0, 2, 11, 0xfd, 0xe8]); // AS65000, 2-byte
        let mut rib = vec![0, 0, 0, 0, 24, 203, 0, 113, 0, 1];
        let attrs = [
            0x40, 0x01, 0x01, 0x00, // ORIGIN
            0x40, 0x02, 0x0a, 0x02, 0x02, 0, 0, 0xfd, 0xf2, 0, 0, 0xfd, 0xfc, // SEQUENCE 65010 65020
            0x40, 0x03, 0x04, 192, 0, 2, 10,
        ];
        rib.extend_from_slice(&[0, 0, 0x65, 0x00, 0x00, 0x00, 0, attrs.len() as u8]);
        rib.extend_from_slice(&attrs);
        let mut out = Vec::new();
        for (subtype, body) in [(1u16, pit), (2u16, rib)] {
            out.extend_from_slice(&[0x65, 0, 0, 0, 0, 13]);
            out.extend_from_slice(&subtype.to_be_bytes());
            out.extend_from_slice(&(body.len() as u32).to_be_bytes());
            out.extend_from_slice(&body);
        }
        out
    }

    #[test]
    fn rib_dump_by_hand() {
        let bytes = hand_fixture();
        let recs: Vec<MrtRecord> = read_mrt_stream(&bytes[..]).map(Result::unwrap).collect();
        assert_eq!(recs.len(), 2);
        let mut peers = PeerTable::default();
        assert!(mrt_to_announcements(&recs[0], &mut peers).unwrap().is_empty());
        assert_eq!(peers.len(), 2);
        assert_eq!(peers.peers[1].asn, Asn::new(65000));
        let anns = mrt_to_announcements(&recs[1], &mut peers).unwrap();
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].prefix, p("203.0.113.0/24"));
        assert_eq!(anns[0].announcing_member, Asn::new(65010));
        assert_eq!(anns[0].origin().asn(), Some(Asn::new(65020)));
        assert_eq!(anns[0].timestamp, 0x6500_0000);

        // Re-encoding gives the same bytes.
        let mut again = Vec::new();
        write_record(&mut again, &recs[0]).unwrap();
        write_record(&mut again, &recs[1]).unwrap();
        assert_eq!(again, bytes);
        assert_eq!(encode_peer_index(&peers)[..8], recs[0].payload[..8]);
    }

    #[test]
    fn bgp4mp_variants() {
        let eor = super::super::update::encode_update(&BgpUpdate::default(), AsnWidth::Four);
        let body = encode_bgp4mp(Asn::new(65010), Asn::new(65000), "192.0.2.10".parse().unwrap(), "192.0.2.1".parse().unwrap(), true, &eor);
        let rec = MrtRecord { timestamp: 5, mrt_type: BGP4MP, subtype: BGP4MP_MESSAGE_AS4, payload: body };
        assert!(mrt_to_announcements(&rec, &mut PeerTable::default()).unwrap().is_empty());

        let u = BgpUpdate {
            withdrawn: vec![p("192.0.2.0/24")],
            origin_attr: None,
            as_path: Some(AsPath::from_sequence([Asn::new(65010), Asn::new(65020)])),
            next_hop: Some("192.0.2.10".parse().unwrap()),
            nlri: vec![p("198.51.100.0/24"), p("203.0.113.0/24")],
            skipped_attributes: 0,
        };
        let msg = super::super::update::encode_update(&u, AsnWidth::Two);
        let mut body = 7u32.to_be_bytes().to_vec();
        body.extend(encode_bgp4mp(Asn::new(65010), Asn::new(65000), "2001:db8::a".parse().unwrap(), "2001:db8::1".parse().unwrap(), false, &msg));
        let rec = MrtRecord { timestamp: 9, mrt_type: BGP4MP_ET, subtype: BGP4MP_MESSAGE, payload: body };
        let anns = mrt_to_announcements(&rec, &mut PeerTable::default()).unwrap();
        assert_eq!(anns.len(), 3);
        assert!(!anns[0].is_announce());
        assert_eq!(anns[2].origin().asn(), Some(Asn::new(65020)));
        assert!(anns.iter().all(|a| a.announcing_member == Asn::new(65010) && a.timestamp == 9));

        let keepalive = super::super::update::encode_keepalive();
        let body = encode_bgp4mp(Asn::new(1), Asn::new(2), "192.0.2.1".parse().unwrap(), "192.0.2.2".parse().unwrap(), true, &keepalive);
        let rec = MrtRecord { timestamp: 1, mrt_type: BGP4MP, subtype: BGP4MP_MESSAGE_AS4, payload: body };
        assert!(mrt_to_announcements(&rec, &mut PeerTable::default()).unwrap().is_empty());
    }

    #[test]
    fn skips_and_errors() {
        let mut peers = PeerTable::default();
        let rec = MrtRecord { timestamp: 0, mrt_type: BGP4MP, subtype: BGP4MP_STATE_CHANGE, payload: vec![] };
        assert!(mrt_to_announcements(&rec, &mut peers).unwrap_err().is_skip());
        let rec = MrtRecord { timestamp: 0, mrt_type: 12, subtype: 1, payload: vec![] };
        assert!(mrt_to_announcements(&rec, &mut peers).unwrap_err().is_skip());
        let rec = MrtRecord { timestamp: 0, mrt_type: TABLE_DUMP_V2, subtype: RIB_IPV4_UNICAST, payload: vec![0, 0] };
        assert!(!mrt_to_announcements(&rec, &mut peers).unwrap_err().is_skip());
        // RIB entry pointing at a peer that was never announced.
        let payload = encode_rib(0, &p("192.0.2.0/24"), &[(3, 0, BgpUpdate::default())]);
        let rec = MrtRecord { timestamp: 0, mrt_type: TABLE_DUMP_V2, subtype: RIB_IPV4_UNICAST, payload };
        assert!(matches!(mrt_to_announcements(&rec, &mut peers), Err(MrtError::UnknownPeer(3))));
    }

    #[test]
    fn ipv6_rib_round_trip() {
        let peers = PeerTable {
            collector_id: Some("192.0.2.254".parse().unwrap()),
            view_name: "v".into(),
            peers: vec![Peer { bgp_id: "192.0.2.1".parse().unwrap(), address: "2001:db8::1".parse().unwrap(), asn: Asn::new(4_200_000_000) }],
        };
        let u = BgpUpdate {
            as_path: Some("4200000000 65020".parse().unwrap()),
            next_hop: Some("2001:db8::1".parse().unwrap()),
            ..BgpUpdate::default()
        };
        let mut table = PeerTable::default();
        let pit = MrtRecord { timestamp: 0, mrt_type: TABLE_DUMP_V2, subtype: PEER_INDEX_TABLE, payload: encode_peer_index(&peers) };
        mrt_to_announcements(&pit, &mut table).unwrap();
        assert_eq!(table, peers);
        let rib = MrtRecord { timestamp: 0, mrt_type: TABLE_DUMP_V2, subtype: RIB_IPV6_UNICAST, payload: encode_rib(1, &p("2001:db8:1::/48"), &[(0, 77, u)]) };
        let anns = mrt_to_announcements(&rib, &mut table).unwrap();
        assert_eq!(anns[0].prefix, p("2001:db8:1::/48"));
        assert_eq!(anns[0].next_hop, Some("2001:db8::1".parse().unwrap()));
        assert_eq!(anns[0].announcing_member, Asn::new(4_200_000_000));
    }
}

//! BGP UPDATE messages (RFC 4271 section 4.3, RFC 4760 for IPv6).

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use crate::model::{Afi, AsPath, Asn, IpPrefix, Segment};

pub const MARKER: [u8; 16] = [0xff; 16];
pub const HEADER_LEN: usize = 19;
pub const MAX_MESSAGE_LEN: usize = 4096;

const ATTR_ORIGIN: u8 = 1;
const ATTR_AS_PATH: u8 = 2;
const ATTR_NEXT_HOP: u8 = 3;
const ATTR_MP_REACH: u8 = 14;
const ATTR_MP_UNREACH: u8 = 15;

const FLAG_OPTIONAL: u8 = 0x80;
const FLAG_TRANSITIVE: u8 = 0x40;
const FLAG_EXTENDED: u8 = 0x10;

const SEG_SET: u8 = 1;
const SEG_SEQUENCE: u8 = 2;
const SEG_CONFED_SEQUENCE: u8 = 3;
const SEG_CONFED_SET: u8 = 4;

/// Width of AS numbers inside AS_PATH.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AsnWidth {
    Two,
    #[default]
    Four,
}

impl AsnWidth {
    fn octets(self) -> usize {
        match self {
            AsnWidth::Two => 2,
            AsnWidth::Four => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OriginAttr {
    Igp,
    Egp,
    Incomplete,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BgpUpdate {
    pub withdrawn: Vec<IpPrefix>,
    pub origin_attr: Option<OriginAttr>,
    pub as_path: Option<AsPath>,
    pub next_hop: Option<IpAddr>,
    /// IPv4 NLRI followed by any MP_REACH_NLRI prefixes.
    pub nlri: Vec<IpPrefix>,
    /// Path attributes skipped by length, including unsupported AFI/SAFI.
    pub skipped_attributes: u32,
}

impl BgpUpdate {
    pub fn is_end_of_rib(&self) -> bool {
        self.withdrawn.is_empty() && self.nlri.is_empty() && self.as_path.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum UpdateError {
    #[error("truncated message")]
    TruncatedMessage,
    #[error("bad marker")]
    BadMarker,
    #[error("message type {0} is not UPDATE")]
    NotAnUpdate(u8),
    #[error("malformed path attribute {0}")]
    MalformedAttribute(u8),
    #[error("missing mandatory attribute {0}")]
    MissingAttribute(u8),
    #[error("malformed NLRI")]
    MalformedNlri,
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.buf.len() < n {
            return None;
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Some(head)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_be_bytes([b[0], b[1]]))
    }
}

//------------ Parsing -------------------------------------------------------

/// Parses one complete BGP message that must be an UPDATE.
pub fn parse_update(bytes: &[u8]) -> Result<BgpUpdate, UpdateError> {
    parse_update_with(bytes, AsnWidth::Four)
}

pub fn parse_update_with(bytes: &[u8], width: AsnWidth) -> Result<BgpUpdate, UpdateError> {
    let body = message_body(bytes)?;
    let mut cur = Cursor { buf: body };
    let wlen = cur.u16().ok_or(UpdateError::TruncatedMessage)? as usize;
    let withdrawn = cur.take(wlen).ok_or(UpdateError::TruncatedMessage)?;
    let alen = cur.u16().ok_or(UpdateError::TruncatedMessage)? as usize;
    let attrs = cur.take(alen).ok_or(UpdateError::TruncatedMessage)?;

    let mut update = BgpUpdate {
        withdrawn: parse_nlri(withdrawn, Afi::Ipv4)?,
        ..BgpUpdate::default()
    };
    parse_attributes(attrs, width, false, &mut update)?;
    let v4 = parse_nlri(cur.buf, Afi::Ipv4)?;
    if !v4.is_empty() {
        if update.as_path.is_none() {
            return Err(UpdateError::MissingAttribute(ATTR_AS_PATH));
        }
        if update.next_hop.is_none() {
            return Err(UpdateError::MissingAttribute(ATTR_NEXT_HOP));
        }
    }
    // Classic NLRI first, then MP_REACH.
    let mp = std::mem::take(&mut update.nlri);
    update.nlri = v4;
    update.nlri.extend(mp);
    Ok(update)
}

/// Checks the header and returns the bytes after it.
fn message_body(bytes: &[u8]) -> Result<&[u8], UpdateError> {
    if bytes.len() < HEADER_LEN {
        return Err(UpdateError::TruncatedMessage);
    }
    if bytes[..16] != MARKER {
        return Err(UpdateError::BadMarker);
    }
    let len = u16::from_be_bytes([bytes[16], bytes[17]]) as usize;
    if !(HEADER_LEN..=MAX_MESSAGE_LEN).contains(&len) || bytes.len() < len {
        return Err(UpdateError::TruncatedMessage);
    }
    if bytes[18] != 2 {
        return Err(UpdateError::NotAnUpdate(bytes[18]));
    }
    Ok(&bytes[HEADER_LEN..len])
}

/// Message type of a BGP message, if the header is sound.
pub fn message_type(bytes: &[u8]) -> Option<u8> {
    (bytes.len() >= HEADER_LEN && bytes[..16] == MARKER).then(|| bytes[18])
}

/// Parses path attributes into `update`. In RIB entries MP_REACH_NLRI is
/// abbreviated to next-hop length and next hop (RFC 6396 section 4.3.4).
pub(crate) fn parse_attributes(
    mut buf: &[u8],
    width: AsnWidth,
    rib: bool,
    update: &mut BgpUpdate,
) -> Result<(), UpdateError> {
    while !buf.is_empty() {
        let mut cur = Cursor { buf };
        let flags = cur.u8().ok_or(UpdateError::MalformedAttribute(0))?;
        let code = cur.u8().ok_or(UpdateError::MalformedAttribute(0))?;
        let len = if flags & FLAG_EXTENDED != 0 {
            cur.u16().ok_or(UpdateError::MalformedAttribute(code))? as usize
        } else {
            cur.u8().ok_or(UpdateError::MalformedAttribute(code))? as usize
        };
        let value = cur.take(len).ok_or(UpdateError::MalformedAttribute(code))?;
        buf = cur.buf;
        match code {
            ATTR_ORIGIN => {
                update.origin_attr = Some(match value {
                    [0] => OriginAttr::Igp,
                    [1] => OriginAttr::Egp,
                    [2] => OriginAttr::Incomplete,
                    _ => return Err(UpdateError::MalformedAttribute(code)),
                });
            }
            ATTR_AS_PATH => update.as_path = Some(parse_as_path(value, width)?),
            ATTR_NEXT_HOP => {
                let octets: [u8; 4] = value.try_into().map_err(|_| UpdateError::MalformedAttribute(code))?;
                update.next_hop = Some(IpAddr::V4(Ipv4Addr::from(octets)));
            }
            // Some writers put the full form into RIB entries anyway.
            ATTR_MP_REACH if rib && value.first().is_some_and(|l| *l as usize + 1 == value.len()) => {
                let mut c = Cursor { buf: value };
                let nh_len = c.u8().ok_or(UpdateError::MalformedAttribute(code))? as usize;
                let nh = c.take(nh_len).ok_or(UpdateError::MalformedAttribute(code))?;
                update.next_hop = next_hop(nh).or(update.next_hop);
            }
            ATTR_MP_REACH => {
                let mut c = Cursor { buf: value };
                let afi = c.u16().ok_or(UpdateError::MalformedAttribute(code))?;
                let safi = c.u8().ok_or(UpdateError::MalformedAttribute(code))?;
                let nh_len = c.u8().ok_or(UpdateError::MalformedAttribute(code))? as usize;
                let nh = c.take(nh_len).ok_or(UpdateError::MalformedAttribute(code))?;
                c.u8().ok_or(UpdateError::MalformedAttribute(code))?;
                match unicast_afi(afi, safi) {
                    Some(afi) => {
                        update.next_hop = next_hop(nh).or(update.next_hop);
                        update.nlri.extend(parse_nlri(c.buf, afi)?);
                    }
                    None => update.skipped_attributes += 1,
                }
            }
            ATTR_MP_UNREACH => {
                let mut c = Cursor { buf: value };
                let afi = c.u16().ok_or(UpdateError::MalformedAttribute(code))?;
                let safi = c.u8().ok_or(UpdateError::MalformedAttribute(code))?;
                match unicast_afi(afi, safi) {
                    Some(afi) => update.withdrawn.extend(parse_nlri(c.buf, afi)?),
                    None => update.skipped_attributes += 1,
                }
            }
            _ => update.skipped_attributes += 1,
        }
    }
    Ok(())
}

fn unicast_afi(afi: u16, safi: u8) -> Option<Afi> {
    match (afi, safi) {
        (1, 1) => Some(Afi::Ipv4),
        (2, 1) => Some(Afi::Ipv6),
        _ => None,
    }
}

/// First address of an MP next-hop field (global address for 32-octet
/// IPv6 next hops).
fn next_hop(nh: &[u8]) -> Option<IpAddr> {
    match nh.len() {
        4 => Some(IpAddr::V4(Ipv4Addr::from(<[u8; 4]>::try_from(nh).ok()?))),
        16 | 32 => Some(IpAddr::V6(Ipv6Addr::from(<[u8; 16]>::try_from(&nh[..16]).ok()?))),
        _ => None,
    }
}

pub fn parse_as_path(buf: &[u8], width: AsnWidth) -> Result<AsPath, UpdateError> {
    let err = UpdateError::MalformedAttribute(ATTR_AS_PATH);
    let mut cur = Cursor { buf };
    let mut segments = Vec::new();
    while !cur.buf.is_empty() {
        let ty = cur.u8().ok_or(err.clone())?;
        let count = cur.u8().ok_or(err.clone())? as usize;
        let raw = cur.take(count * width.octets()).ok_or(err.clone())?;
        let asns = raw.chunks_exact(width.octets()).map(|c| match width {
            AsnWidth::Two => Asn::new(u16::from_be_bytes([c[0], c[1]]) as u32),
            AsnWidth::Four => Asn::new(u32::from_be_bytes([c[0], c[1], c[2], c[3]])),
        });
        match ty {
            SEG_SEQUENCE => segments.push(Segment::Sequence(asns.collect())),
            SEG_SET => segments.push(Segment::set(asns)),
            // Confederation segments are local to the confederation.
            SEG_CONFED_SEQUENCE | SEG_CONFED_SET => {}
            _ => return Err(err),
        }
    }
    Ok(AsPath::new(segments))
}

/// Decodes packed (length, prefix) NLRI.
pub fn parse_nlri(mut buf: &[u8], afi: Afi) -> Result<Vec<IpPrefix>, UpdateError> {
    let mut out = Vec::new();
    while let Some((&len, rest)) = buf.split_first() {
        if len > afi.max_len() {
            return Err(UpdateError::MalformedNlri);
        }
        let n = (len as usize).div_ceil(8);
        if rest.len() < n {
            return Err(UpdateError::MalformedNlri);
        }
        let mut octets = [0u8; 16];
        octets[..n].copy_from_slice(&rest[..n]);
        let prefix = IpPrefix::canonicalize(afi, &octets[..afi.octets()], len).map_err(|_| UpdateError::MalformedNlri)?;
        out.push(prefix);
        buf = &rest[n..];
    }
    Ok(out)
}

//------------ Encoding ------------------------------------------------------

pub fn encode_nlri(prefixes: &[IpPrefix], out: &mut Vec<u8>) {
    for p in prefixes {
        out.push(p.len());
        let n = (p.len() as usize).div_ceil(8);
        out.extend_from_slice(&p.octets()[..n]);
    }
}

pub fn encode_as_path(path: &AsPath, width: AsnWidth) -> Vec<u8> {
    let mut out = Vec::new();
    for seg in path.segments() {
        // Segments hold at most 255 ASNs; longer ones are split.
        for chunk in seg.asns().chunks(255) {
            out.push(match seg {
                Segment::Sequence(_) => SEG_SEQUENCE,
                Segment::Set(_) => SEG_SET,
            });
            out.push(chunk.len() as u8);
            for asn in chunk {
                match width {
                    AsnWidth::Two => out.extend_from_slice(&(asn.value() as u16).to_be_bytes()),
                    AsnWidth::Four => out.extend_from_slice(&asn.value().to_be_bytes()),
                }
            }
        }
    }
    out
}

fn push_attr(out: &mut Vec<u8>, flags: u8, code: u8, value: &[u8]) {
    if value.len() > 255 {
        out.extend_from_slice(&[flags | FLAG_EXTENDED, code]);
        out.extend_from_slice(&(value.len() as u16).to_be_bytes());
    } else {
        out.extend_from_slice(&[flags, code, value.len() as u8]);
    }
    out.extend_from_slice(value);
}

/// Path attributes for `update`. IPv6 prefixes travel in MP_REACH_NLRI
/// and MP_UNREACH_NLRI; with `rib` set, MP_REACH is the abbreviated RIB
/// form and carries no NLRI.
pub fn encode_attributes(update: &BgpUpdate, width: AsnWidth, rib: bool) -> Vec<u8> {
    let mut attrs = Vec::new();
    if let Some(origin) = update.origin_attr {
        let v = match origin {
            OriginAttr::Igp => 0,
            OriginAttr::Egp => 1,
            OriginAttr::Incomplete => 2,
        };
        push_attr(&mut attrs, FLAG_TRANSITIVE, ATTR_ORIGIN, &[v]);
    }
    if let Some(path) = &update.as_path {
        push_attr(&mut attrs, FLAG_TRANSITIVE, ATTR_AS_PATH, &encode_as_path(path, width));
    }
    let v6: Vec<IpPrefix> = update.nlri.iter().filter(|p| p.afi() == Afi::Ipv6).copied().collect();
    match update.next_hop {
        Some(IpAddr::V4(nh)) => push_attr(&mut attrs, FLAG_TRANSITIVE, ATTR_NEXT_HOP, &nh.octets()),
        Some(IpAddr::V6(nh)) if rib => {
            let mut v = vec![16];
            v.extend_from_slice(&nh.octets());
            push_attr(&mut attrs, FLAG_OPTIONAL, ATTR_MP_REACH, &v);
        }
        _ => {}
    }
    if !v6.is_empty() && !rib {
        let mut v = vec![0, 2, 1, 16];
        let nh = match update.next_hop {
            Some(IpAddr::V6(nh)) => nh,
            _ => Ipv6Addr::UNSPECIFIED,
        };
        v.extend_from_slice(&nh.octets());
        v.push(0);
        encode_nlri(&v6, &mut v);
        push_attr(&mut attrs, FLAG_OPTIONAL, ATTR_MP_REACH, &v);
    }
    let w6: Vec<IpPrefix> = update.withdrawn.iter().filter(|p| p.afi() == Afi::Ipv6).copied().collect();
    if !w6.is_empty() {
        let mut v = vec![0, 2, 1];
        encode_nlri(&w6, &mut v);
        push_attr(&mut attrs, FLAG_OPTIONAL, ATTR_MP_UNREACH, &v);
    }
    attrs
}

/// Encodes a full UPDATE message.
pub fn encode_update(update: &BgpUpdate, width: AsnWidth) -> Vec<u8> {
    let v4 = |ps: &[IpPrefix]| -> Vec<IpPrefix> { ps.iter().filter(|p| p.afi() == Afi::Ipv4).copied().collect() };
    let mut withdrawn = Vec::new();
    encode_nlri(&v4(&update.withdrawn), &mut withdrawn);
    let attrs = encode_attributes(update, width, false);
    let mut nlri = Vec::new();
    encode_nlri(&v4(&update.nlri), &mut nlri);

    let len = HEADER_LEN + 2 + withdrawn.len() + 2 + attrs.len() + nlri.len();
    let mut out = Vec::with_capacity(len);
    out.extend_from_slice(&MARKER);
    out.extend_from_slice(&(len as u16).to_be_bytes());
    out.push(2);
    out.extend_from_slice(&(withdrawn.len() as u16).to_be_bytes());
    out.extend_from_slice(&withdrawn);
    out.extend_from_slice(&(attrs.len() as u16).to_be_bytes());
    out.extend_from_slice(&attrs);
    out.extend_from_slice(&nlri);
    out
}

/// A KEEPALIVE, for traces that need non-UPDATE messages.
pub fn encode_keepalive() -> Vec<u8> {
    let mut out = MARKER.to_vec();
    out.extend_from_slice(&(HEADER_LEN as u16).to_be_bytes());
    out.push(4);
    out
}

//============ Tests =========================================================

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> IpPrefix {
        s.parse().unwrap()
    }

    #[test]
    fn end_of_rib() {
        let mut m = vec![0xff; 16];
        m.extend_from_slice(&[0, 23, 2, 0, 0, 0, 0]);
        let u = parse_update(&m).unwrap();
        assert_eq!(u, BgpUpdate::default());
        assert!(u.is_end_of_rib());
    }

    #[test]
    fn header_errors() {
        let mut m = vec![0xff; 16];
        m.extend_from_slice(&[0, 18, 2]);
        assert_eq!(parse_update(&m), Err(UpdateError::TruncatedMessage));
        m[17] = 19;
        m[0] = 0;
        assert_eq!(parse_update(&m), Err(UpdateError::BadMarker));
        m[0] = 0xff;
        m[18] = 4;
        assert_eq!(parse_update(&m), Err(UpdateError::NotAnUpdate(4)));
        assert_eq!(parse_update(&[0xff; 10]), Err(UpdateError::TruncatedMessage));
        // Declared length beyond the buffer.
        let mut m = vec![0xff; 16];
        m.extend_from_slice(&[0, 30, 2, 0, 0, 0, 0]);
        assert_eq!(parse_update(&m), Err(UpdateError::TruncatedMessage));
    }

    /// Hand-assembled per RFC 4271 section 4.3, field by field.
    const ONE_ROUTE: &[u8] = &[
        0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff,
        0x00, 0x2f, // length 47
        0x02, // UPDATE
        0x00, 0x00, // no withdrawn routes
        0x00, 0x14, // 20 octets of attributes
        0x40, 0x01, 0x01, 0x00, // ORIGIN IGP
        0x40, 0x02, 0x06, 0x02, 0x01, 0x00, 0x00, 0xfd, 0xe9, // AS_PATH SEQUENCE [65001]
        0x40, 0x03, 0x04, 0xc0, 0x00, 0x02, 0x01, // NEXT_HOP 192.0.2.1
        0x18, 0xc6, 0x33, 0x64, // 198.51.100.0/24
    ];

    #[test]
    fn hand_assembled_update() {
        assert_eq!(ONE_ROUTE.len(), 47);
        let u = parse_update(ONE_ROUTE).unwrap();
        assert_eq!(u.origin_attr, Some(OriginAttr::Igp));
        assert_eq!(u.as_path, Some(AsPath::from_sequence([Asn::new(65001)])));
        assert_eq!(u.next_hop, Some("192.0.2.1".parse().unwrap()));
        assert_eq!(u.nlri, vec![p("198.51.100.0/24")]);
        assert!(u.withdrawn.is_empty());
        assert_eq!(encode_update(&u, AsnWidth::Four), ONE_ROUTE);
    }

    #[test]
    fn missing_mandatory() {
        let mut m = ONE_ROUTE.to_vec();
        // Turn NEXT_HOP into an unknown attribute 99.
        m[37] = 99;
        assert_eq!(parse_update(&m), Err(UpdateError::MissingAttribute(3)));
    }

    #[test]
    fn ipv6_and_two_byte() {
        let u = BgpUpdate {
            withdrawn: vec![p("2001:db8:ff::/48"), p("192.0.2.0/25")],
            origin_attr: Some(OriginAttr::Incomplete),
            as_path: Some("65010 {65020,65021}".parse().unwrap()),
            next_hop: Some("2001:db8::1".parse().unwrap()),
            nlri: vec![p("2001:db8:1::/48"), p("2001:db8::/32")],
            skipped_attributes: 0,
        };
        for w in [AsnWidth::Two, AsnWidth::Four] {
            let bytes = encode_update(&u, w);
            let back = parse_update_with(&bytes, w).unwrap();
            assert_eq!(back.nlri, u.nlri);
            assert_eq!(back.as_path, u.as_path);
            assert_eq!(back.next_hop, u.next_hop);
            let mut wd = back.withdrawn.clone();
            wd.sort();
            let mut expect = u.withdrawn.clone();
            expect.sort();
            assert_eq!(wd, expect);
        }
    }

    #[test]
    fn unknown_attributes_are_skipped() {
        let mut m = ONE_ROUTE[..19].to_vec();
        m.extend_from_slice(&[0, 0, 0, 0x1b]);
        m.extend_from_slice(&ONE_ROUTE[23..43]);
        m.extend_from_slice(&[0xc0, 0x08, 0x04, 1, 2, 3, 4]); // COMMUNITIES
        m.extend_from_slice(&ONE_ROUTE[43..]);
        let len = m.len() as u16;
        m[16..18].copy_from_slice(&len.to_be_bytes());
        let u = parse_update(&m).unwrap();
        assert_eq!(u.skipped_attributes, 1);
        assert_eq!(u.nlri.len(), 1);
    }

    #[test]
    fn nlri_errors() {
        assert_eq!(parse_nlri(&[33, 1, 2, 3, 4, 5], Afi::Ipv4), Err(UpdateError::MalformedNlri));
        assert_eq!(parse_nlri(&[24, 1, 2], Afi::Ipv4), Err(UpdateError::MalformedNlri));
        assert_eq!(parse_nlri(&[0], Afi::Ipv4).unwrap(), vec![p("0.0.0.0/0")]);
        // Host bits are cleared.
        assert_eq!(parse_nlri(&[23, 198, 51, 101], Afi::Ipv4).unwrap(), vec![p("198.51.100.0/23")]);
    }

    fn arb_prefix() -> impl Strategy<Value = IpPrefix> {
        prop_oneof![
            (any::<u32>(), 0u8..=32).prop_map(|(b, l)| IpPrefix::from_bits(Afi::Ipv4, b as u128, l).unwrap()),
            (any::<u128>(), 0u8..=128).prop_map(|(b, l)| IpPrefix::from_bits(Afi::Ipv6, b, l).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn encode_parse_round_trip(
            path in proptest::collection::vec(1u32..65535, 1..8),
            nlri in proptest::collection::vec(arb_prefix(), 1..10),
            withdrawn in proptest::collection::vec(arb_prefix(), 0..5),
        ) {
            let u = BgpUpdate {
                withdrawn,
                origin_attr: Some(OriginAttr::Igp),
                as_path: Some(AsPath::from_sequence(path.into_iter().map(Asn::new))),
                next_hop: Some("192.0.2.1".parse().unwrap()),
                nlri,
                skipped_attributes: 0,
            };
            let back = parse_update(&encode_update(&u, AsnWidth::Four)).unwrap();
            let split = |v: &[IpPrefix]| -> (Vec<IpPrefix>, Vec<IpPrefix>) { v.iter().partition(|p| p.afi() == Afi::Ipv4) };
            prop_assert_eq!(split(&back.nlri), split(&u.nlri));
            prop_assert_eq!(split(&back.withdrawn), split(&u.withdrawn));
            prop_assert_eq!(back.as_path, u.as_path);
        }

        #[test]
        fn parser_is_total(tail in proptest::collection::vec(any::<u8>(), 0..4096), len in any::<u16>()) {
            let mut m = MARKER.to_vec();
            m.extend_from_slice(&len.to_be_bytes());
            m.push(2);
            m.extend_from_slice(&tail);
            let _ = parse_update(&m);
            let _ = parse_update_with(&m, AsnWidth::Two);
        }
    }
}

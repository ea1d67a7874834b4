//! Routing domain types shared by every defense.
//!
//! Prefixes are kept in canonical form (host bits zeroed) and carry their
//! address family. The prefix algebra here, [`IpPrefix::covers`] in
//! particular, is what ROA lookup, whitelist matching and sub-prefix
//! detection are built on.

use std::collections::BTreeSet;
use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

//------------ Asn -----------------------------------------------------------

/// An autonomous system number. 2-byte numbers are stored widened.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[derive(Serialize, Deserialize)]
#[serde(transparent)]
pub struct Asn(u32);

impl Asn {
    pub const fn new(value: u32) -> Self {
        Asn(value)
    }

    pub const fn value(self) -> u32 {
        self.0
    }
}

impl From<u32> for Asn {
    fn from(value: u32) -> Self {
        Asn(value)
    }
}

impl From<u16> for Asn {
    fn from(value: u16) -> Self {
        Asn(value.into())
    }
}

impl FromStr for Asn {
    type Err = ParseError;

    /// Accepts `AS65001`, `as65001` or a bare `65001`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let digits = s
            .strip_prefix("AS")
            .or_else(|| s.strip_prefix("as"))
            .unwrap_or(s);
        digits
            .parse::<u32>()
            .map(Asn)
            .map_err(|_| ParseError::Asn(s.to_string()))
    }
}

impl fmt::Display for Asn {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "AS{}", self.0)
    }
}

//------------ Afi -----------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Afi {
    Ipv4,
    Ipv6,
}

impl Afi {
    /// Address width in bits, which is also the maximum prefix length.
    pub const fn max_len(self) -> u8 {
        match self {
            Afi::Ipv4 => 32,
            Afi::Ipv6 => 128,
        }
    }

    pub const fn octets(self) -> usize {
        match self {
            Afi::Ipv4 => 4,
            Afi::Ipv6 => 16,
        }
    }
}

impl fmt::Display for Afi {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            Afi::Ipv4 => "IPv4",
            Afi::Ipv6 => "IPv6",
        })
    }
}

//------------ Errors --------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PrefixError {
    #[error("prefix length {len} out of range for {afi}")]
    LengthOutOfRange { afi: Afi, len: u8 },
    #[error("{afi} address needs {expected} octets, got {got}")]
    AddressLength { afi: Afi, expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("invalid AS number '{0}'")]
    Asn(String),
    #[error("invalid prefix '{0}'")]
    Prefix(String),
    #[error(transparent)]
    PrefixRange(#[from] PrefixError),
    #[error("invalid AS path '{0}'")]
    AsPath(String),
}

//------------ IpPrefix ------------------------------------------------------

/// A canonical IPv4 or IPv6 prefix.
///
/// The address is held right-aligned in a `u128`, i.e. an IPv4 address
/// occupies the low 32 bits. All bits beyond `len` are zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IpPrefix {
    afi: Afi,
    bits: u128,
    len: u8,
}

fn width_mask(afi: Afi) -> u128 {
    match afi {
        Afi::Ipv4 => u32::MAX as u128,
        Afi::Ipv6 => u128::MAX,
    }
}

fn net_mask(afi: Afi, len: u8) -> u128 {
    let width = afi.max_len() as u32;
    if len == 0 {
        0
    } else {
        (u128::MAX << (128 - len as u32)) >> (128 - width)
    }
}

impl IpPrefix {
    pub const DEFAULT_V4: IpPrefix = IpPrefix { afi: Afi::Ipv4, bits: 0, len: 0 };
    pub const DEFAULT_V6: IpPrefix = IpPrefix { afi: Afi::Ipv6, bits: 0, len: 0 };

    /// Builds a prefix from raw address octets, zeroing host bits.
    pub fn canonicalize(afi: Afi, octets: &[u8], len: u8) -> Result<Self, PrefixError> {
        if octets.len() != afi.octets() {
            return Err(PrefixError::AddressLength {
                afi,
                expected: afi.octets(),
                got: octets.len(),
            });
        }
        let bits = octets.iter().fold(0u128, |acc, &b| (acc << 8) | b as u128);
        Self::from_bits(afi, bits, len)
    }

    pub fn new(addr: IpAddr, len: u8) -> Result<Self, PrefixError> {
        match addr {
            IpAddr::V4(a) => Self::from_bits(Afi::Ipv4, u32::from(a) as u128, len),
            IpAddr::V6(a) => Self::from_bits(Afi::Ipv6, u128::from(a), len),
        }
    }

    /// Builds a prefix from a right-aligned address, zeroing host bits.
    pub fn from_bits(afi: Afi, bits: u128, len: u8) -> Result<Self, PrefixError> {
        if len > afi.max_len() {
            return Err(PrefixError::LengthOutOfRange { afi, len });
        }
        Ok(IpPrefix {
            afi,
            bits: bits & width_mask(afi) & net_mask(afi, len),
            len,
        })
    }

    pub fn afi(&self) -> Afi {
        self.afi
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    /// Right-aligned address bits.
    pub fn bits(&self) -> u128 {
        self.bits
    }

    pub fn addr(&self) -> IpAddr {
        match self.afi {
            Afi::Ipv4 => IpAddr::V4(Ipv4Addr::from(self.bits as u32)),
            Afi::Ipv6 => IpAddr::V6(Ipv6Addr::from(self.bits)),
        }
    }

    /// Address octets in network order.
    pub fn octets(&self) -> Vec<u8> {
        let all = self.bits.to_be_bytes();
        all[16 - self.afi.octets()..].to_vec()
    }

    /// Bit `index` of the address counted from the most significant bit.
    pub fn bit(&self, index: u8) -> bool {
        debug_assert!(index < self.afi.max_len());
        let shift = self.afi.max_len() - 1 - index;
        (self.bits >> shift) & 1 == 1
    }

    /// True iff `self` covers `other`: same family, not longer, and equal in
    /// the first `self.len()` bits. Reflexive.
    pub fn covers(&self, other: &IpPrefix) -> bool {
        self.afi == other.afi
            && self.len <= other.len
            && other.bits & net_mask(self.afi, self.len) == self.bits
    }

    /// Covers `other` and is strictly shorter.
    pub fn strictly_covers(&self, other: &IpPrefix) -> bool {
        self.len < other.len && self.covers(other)
    }

    /// The covering prefix of length `len`, or `None` if `len` is longer.
    pub fn truncate(&self, len: u8) -> Option<IpPrefix> {
        if len > self.len {
            return None;
        }
        Some(IpPrefix {
            afi: self.afi,
            bits: self.bits & net_mask(self.afi, len),
            len,
        })
    }

    /// The first (`half == false`) or second half one bit longer.
    pub fn split(&self, half: bool) -> Option<IpPrefix> {
        if self.len >= self.afi.max_len() {
            return None;
        }
        let len = self.len + 1;
        let mut bits = self.bits;
        if half {
            bits |= 1u128 << (self.afi.max_len() - len);
        }
        Some(IpPrefix {
            afi: self.afi,
            bits,
            len,
        })
    }
}

/// Free-function form of [`IpPrefix::covers`].
pub fn covers(outer: &IpPrefix, inner: &IpPrefix) -> bool {
    outer.covers(inner)
}

impl fmt::Display for IpPrefix {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{}/{}", self.addr(), self.len)
    }
}

impl FromStr for IpPrefix {
    type Err = ParseError;

    /// Parses CIDR notation. Host bits are zeroed rather than rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (addr, len) = s
            .split_once('/')
            .ok_or_else(|| ParseError::Prefix(s.to_string()))?;
        let addr: IpAddr = addr.parse().map_err(|_| ParseError::Prefix(s.to_string()))?;
        let len: u8 = len.parse().map_err(|_| ParseError::Prefix(s.to_string()))?;
        Ok(IpPrefix::new(addr, len)?)
    }
}

impl Serialize for IpPrefix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IpPrefix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

//------------ AsPath --------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Segment {
    Sequence(Vec<Asn>),
    /// Unordered; kept sorted and deduplicated.
    Set(Vec<Asn>),
}

impl Segment {
    pub fn set(asns: impl IntoIterator<Item = Asn>) -> Segment {
        let set: BTreeSet<Asn> = asns.into_iter().collect();
        Segment::Set(set.into_iter().collect())
    }

    pub fn asns(&self) -> &[Asn] {
        match self {
            Segment::Sequence(v) | Segment::Set(v) => v,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.asns().is_empty()
    }
}

/// Result of extracting the originating AS from a path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OriginResult {
    Origin(Asn),
    Indeterminate,
}

impl OriginResult {
    pub fn asn(self) -> Option<Asn> {
        match self {
            OriginResult::Origin(asn) => Some(asn),
            OriginResult::Indeterminate => None,
        }
    }
}

impl fmt::Display for OriginResult {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            OriginResult::Origin(asn) => asn.fmt(f),
            OriginResult::Indeterminate => f.write_str("indeterminate"),
        }
    }
}

/// An AS path as a list of non-empty segments.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct AsPath {
    segments: Vec<Segment>,
}

impl AsPath {
    /// Builds a path, dropping empty segments.
    pub fn new(segments: impl IntoIterator<Item = Segment>) -> Self {
        AsPath {
            segments: segments
                .into_iter()
                .filter(|seg| !seg.is_empty())
                .map(|seg| match seg {
                    Segment::Set(v) => Segment::set(v),
                    seq => seq,
                })
                .collect(),
        }
    }

    pub fn from_sequence(asns: impl IntoIterator<Item = Asn>) -> Self {
        AsPath::new([Segment::Sequence(asns.into_iter().collect())])
    }

    pub fn empty() -> Self {
        AsPath::default()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn origin(&self) -> OriginResult {
        origin_of(self)
    }

    /// Adjacent distinct AS pairs inside SEQUENCE segments, each ordered
    /// smaller-first. Prepending (a repeated AS) yields no pair.
    pub fn edges(&self) -> impl Iterator<Item = (Asn, Asn)> + '_ {
        self.segments
            .iter()
            .filter_map(|seg| match seg {
                Segment::Sequence(v) => Some(v),
                Segment::Set(_) => None,
            })
            .flat_map(|v| v.windows(2))
            .filter(|w| w[0] != w[1])
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    }

    /// All ASNs on the path in order of appearance.
    pub fn asns(&self) -> impl Iterator<Item = Asn> + '_ {
        self.segments.iter().flat_map(|seg| seg.asns().iter().copied())
    }
}

/// The origin is the last ASN of a trailing SEQUENCE segment.
pub fn origin_of(path: &AsPath) -> OriginResult {
    match path.segments.last() {
        Some(Segment::Sequence(v)) => v
            .last()
            .copied()
            .map(OriginResult::Origin)
            .unwrap_or(OriginResult::Indeterminate),
        _ => OriginResult::Indeterminate,
    }
}

impl fmt::Display for AsPath {
    /// bgpdump style: `65001 65002 {65003,65004}`.
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        let mut first = true;
        for seg in &self.segments {
            match seg {
                Segment::Sequence(v) => {
                    for asn in v {
                        if !first {
                            f.write_str(" ")?;
                        }
                        first = false;
                        write!(f, "{}", asn.value())?;
                    }
                }
                Segment::Set(v) => {
                    if !first {
                        f.write_str(" ")?;
                    }
                    first = false;
                    f.write_str("{")?;
                    for (i, asn) in v.iter().enumerate() {
                        if i > 0 {
                            f.write_str(",")?;
                        }
                        write!(f, "{}", asn.value())?;
                    }
                    f.write_str("}")?;
                }
            }
        }
        Ok(())
    }
}

impl FromStr for AsPath {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseError::AsPath(s.to_string());
        let mut segments = Vec::new();
        let mut sequence = Vec::new();
        let mut rest = s.trim();
        while !rest.is_empty() {
            if let Some(after) = rest.strip_prefix('{') {
                let (inner, tail) = after.split_once('}').ok_or_else(err)?;
                if !sequence.is_empty() {
                    segments.push(Segment::Sequence(std::mem::take(&mut sequence)));
                }
                let set = inner
                    .split(',')
                    .map(|t| t.trim().parse::<Asn>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| err())?;
                if set.is_empty() {
                    return Err(err());
                }
                segments.push(Segment::set(set));
                rest = tail.trim_start();
            } else {
                let end = rest
                    .find(|c: char| c.is_whitespace() || c == '{')
                    .unwrap_or(rest.len());
                sequence.push(rest[..end].parse::<Asn>().map_err(|_| err())?);
                rest = rest[end..].trim_start();
            }
        }
        if !sequence.is_empty() {
            segments.push(Segment::Sequence(sequence));
        }
        Ok(AsPath::new(segments))
    }
}

impl Serialize for AsPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AsPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

//------------ RouteAnnouncement ---------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnouncementKind {
    Announce,
    Withdraw,
}

/// One intercepted route as seen by the IXP.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RouteAnnouncement {
    pub prefix: IpPrefix,
    pub as_path: AsPath,
    /// The IXP member that sent the route.
    pub announcing_member: Asn,
    pub next_hop: Option<IpAddr>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub kind: AnnouncementKind,
}

impl RouteAnnouncement {
    pub fn announce(prefix: IpPrefix, as_path: AsPath, member: Asn, timestamp: u64) -> Self {
        RouteAnnouncement {
            prefix,
            as_path,
            announcing_member: member,
            next_hop: None,
            timestamp,
            kind: AnnouncementKind::Announce,
        }
    }

    pub fn withdraw(prefix: IpPrefix, member: Asn, timestamp: u64) -> Self {
        RouteAnnouncement {
            prefix,
            as_path: AsPath::empty(),
            announcing_member: member,
            next_hop: None,
            timestamp,
            kind: AnnouncementKind::Withdraw,
        }
    }

    pub fn with_next_hop(mut self, next_hop: IpAddr) -> Self {
        self.next_hop = Some(next_hop);
        self
    }

    pub fn origin(&self) -> OriginResult {
        origin_of(&self.as_path)
    }

    pub fn is_announce(&self) -> bool {
        self.kind == AnnouncementKind::Announce
    }
}

//============ Tests =========================================================

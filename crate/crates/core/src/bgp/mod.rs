//! Getting announcements out of BGP messages and MRT traces.

use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use log::debug;
use serde::{Deserialize, Serialize};

use crate::model::RouteAnnouncement;

pub mod mrt;
pub mod update;

pub use mrt::{mrt_to_announcements, read_mrt_stream, MrtError, MrtReader, MrtRecord, PeerTable};
pub use update::{encode_update, parse_update, parse_update_with, AsnWidth, BgpUpdate, OriginAttr, UpdateError};

/// Opens a trace file, gunzipping when the name ends in `.gz`.
pub fn open_trace(path: &Path) -> io::Result<Box<dyn Read + Send>> {
    let file = BufReader::with_capacity(1 << 16, File::open(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(file))
    }
}

/// Counters kept while streaming a trace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStats {
    /// Records framed, whatever became of them.
    pub records: u64,
    /// Records of unsupported type or subtype.
    pub skipped: u64,
    /// Records that failed to decode.
    pub malformed: u64,
    pub announcements: u64,
    pub withdrawals: u64,
    /// The input ended inside a record.
    pub truncated: bool,
}

/// Flattens a trace into announcements and withdrawals, in file order.
pub struct AnnouncementStream<R> {
    records: MrtReader<R>,
    peers: PeerTable,
    pending: std::vec::IntoIter<RouteAnnouncement>,
    stats: TraceStats,
    io_error: Option<io::Error>,
}

impl<R: Read> AnnouncementStream<R> {
    pub fn new(source: R) -> Self {
        AnnouncementStream {
            records: read_mrt_stream(source),
            peers: PeerTable::default(),
            pending: Vec::new().into_iter(),
            stats: TraceStats::default(),
            io_error: None,
        }
    }

    pub fn stats(&self) -> &TraceStats {
        &self.stats
    }

    pub fn peers(&self) -> &PeerTable {
        &self.peers
    }

    /// An I/O error other than truncation that ended the stream early.
    pub fn take_io_error(&mut self) -> Option<io::Error> {
        self.io_error.take()
    }
}

impl<R: Read> Iterator for AnnouncementStream<R> {
    type Item = RouteAnnouncement;

    fn next(&mut self) -> Option<RouteAnnouncement> {
        loop {
            if let Some(ann) = self.pending.next() {
                return Some(ann);
            }
            let rec = match self.records.next()? {
                Ok(rec) => rec,
                Err(MrtError::TruncatedRecord) => {
                    self.stats.truncated = true;
                    return None;
                }
                Err(MrtError::Io(e)) => {
                    self.io_error = Some(e);
                    return None;
                }
                Err(e) => {
                    debug!("unexpected framing error: {e}");
                    return None;
                }
            };
            self.stats.records += 1;
            match mrt_to_announcements(&rec, &mut self.peers) {
                Ok(anns) => {
                    for a in &anns {
                        if a.is_announce() {
                            self.stats.announcements += 1;
                        } else {
                            self.stats.withdrawals += 1;
                        }
                    }
                    self.pending = anns.into_iter();
                }
                Err(e) if e.is_skip() => self.stats.skipped += 1,
                Err(e) => {
                    debug!("record {} malformed: {e}", self.stats.records);
                    self.stats.malformed += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AsPath, Asn, IpPrefix};
    use std::io::Write;

    fn sample() -> Vec<u8> {
        let mut out = Vec::new();
        let u = BgpUpdate {
            withdrawn: vec!["192.0.2.0/24".parse().unwrap()],
            as_path: Some(AsPath::from_sequence([Asn::new(65010), Asn::new(65020)])),
            next_hop: Some("192.0.2.10".parse().unwrap()),
            nlri: vec!["198.51.100.0/24".parse::<IpPrefix>().unwrap()],
            ..BgpUpdate::default()
        };
        let body = mrt::encode_bgp4mp(Asn::new(65010), Asn::new(65000), "192.0.2.10".parse().unwrap(), "192.0.2.1".parse().unwrap(), true, &encode_update(&u, AsnWidth::Four));
        for (ty, sub, payload) in [
            (mrt::BGP4MP, mrt::BGP4MP_MESSAGE_AS4, body.clone()),
            (mrt::BGP4MP, mrt::BGP4MP_STATE_CHANGE, vec![0; 20]),
            (mrt::BGP4MP, mrt::BGP4MP_MESSAGE_AS4, vec![0; 3]),
            (mrt::BGP4MP, mrt::BGP4MP_MESSAGE_AS4, body),
        ] {
            mrt::write_record(&mut out, &MrtRecord { timestamp: 1, mrt_type: ty, subtype: sub, payload }).unwrap();
        }
        out
    }

    #[test]
    fn stream_counts() {
        let bytes = sample();
        let mut s = AnnouncementStream::new(&bytes[..]);
        let anns: Vec<_> = s.by_ref().collect();
        assert_eq!(anns.len(), 4);
        let st = *s.stats();
        assert_eq!((st.records, st.skipped, st.malformed, st.announcements, st.withdrawals), (4, 1, 1, 2, 2));
        assert!(!st.truncated);

        // Same counts on a second read; cut mid-record is flagged.
        assert_eq!(AnnouncementStream::new(&bytes[..]).count(), 4);
        let mut cut = AnnouncementStream::new(&bytes[..bytes.len() - 5]);
        assert_eq!(cut.by_ref().count(), 2);
        assert!(cut.stats().truncated);
    }

    #[test]
    fn gzip_by_suffix() {
        let dir = tempfile::tempdir().unwrap();
        let bytes = sample();
        let plain = dir.path().join("t.mrt");
        std::fs::write(&plain, &bytes).unwrap();
        let gz = dir.path().join("t.mrt.gz");
        let mut enc = flate2::write::GzEncoder::new(File::create(&gz).unwrap(), flate2::Compression::default());
        enc.write_all(&bytes).unwrap();
        enc.finish().unwrap();
        let a: Vec<_> = AnnouncementStream::new(open_trace(&plain).unwrap()).collect();
        let b: Vec<_> = AnnouncementStream::new(open_trace(&gz).unwrap()).collect();
        assert_eq!(a, b);
    }
}

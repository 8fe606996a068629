//! Classic libpcap capture files (not pcapng).
//!
//! Both byte orders and both timestamp resolutions are read. Records are
//! yielded in file order.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use super::packet::{decode_packet, Decoded, LinkType, PacketSummary, SkipReason};
use crate::flow::Timestamp;

const MAGIC_USEC: u32 = 0xa1b2_c3d4;
const MAGIC_NSEC: u32 = 0xa1b2_3c4d;
/// Records larger than this are treated as corruption, not allocated.
const MAX_RECORD_LEN: u32 = 256 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("not a pcap file (magic {0:#010x})")]
    BadMagic(u32),
    #[error("truncated record {index}: {detail}")]
    TruncatedRecord { index: u64, detail: String },
    #[error("unsupported link type {0}")]
    UnsupportedLinkType(u32),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

impl Endian {
    fn u32(self, b: [u8; 4]) -> u32 {
        match self {
            Endian::Little => u32::from_le_bytes(b),
            Endian::Big => u32::from_be_bytes(b),
        }
    }
}

/// One record as stored in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub timestamp: Timestamp,
    pub orig_len: u32,
    pub data: Vec<u8>,
}

/// Reads fails-fast over records; yields `Err` once then stops.
pub struct PcapReader<R> {
    inner: R,
    endian: Endian,
    nanos: bool,
    linktype: u32,
    index: u64,
    done: bool,
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R) -> Result<Self, PcapError> {
        let mut hdr = [0u8; 24];
        let n = read_full(&mut inner, &mut hdr)?;
        let magic_le = u32::from_le_bytes([hdr[0], hdr[1], hdr[2], hdr[3]]);
        let (endian, nanos) = match magic_le {
            MAGIC_USEC => (Endian::Little, false),
            MAGIC_NSEC => (Endian::Little, true),
            m if m.swap_bytes() == MAGIC_USEC => (Endian::Big, false),
            m if m.swap_bytes() == MAGIC_NSEC => (Endian::Big, true),
            m => return Err(PcapError::BadMagic(m)),
        };
        if n < 24 {
            return Err(PcapError::TruncatedRecord {
                index: 0,
                detail: format!("global header has {n} of 24 bytes"),
            });
        }
        let linktype = endian.u32([hdr[20], hdr[21], hdr[22], hdr[23]]) & 0x0fff_ffff;
        Ok(PcapReader {
            inner,
            endian,
            nanos,
            linktype,
            index: 0,
            done: false,
        })
    }

    pub fn linktype(&self) -> u32 {
        self.linktype
    }

    pub fn link(&self) -> Option<LinkType> {
        LinkType::from_pcap(self.linktype)
    }

    fn next_record(&mut self) -> Result<Option<RawRecord>, PcapError> {
        let mut hdr = [0u8; 16];
        let n = read_full(&mut self.inner, &mut hdr)?;
        if n == 0 {
            return Ok(None);
        }
        let index = self.index;
        if n < 16 {
            return Err(PcapError::TruncatedRecord {
                index,
                detail: format!("record header has {n} of 16 bytes"),
            });
        }
        let e = self.endian;
        let secs = e.u32([hdr[0], hdr[1], hdr[2], hdr[3]]) as i64;
        let frac = e.u32([hdr[4], hdr[5], hdr[6], hdr[7]]) as i64;
        let incl = e.u32([hdr[8], hdr[9], hdr[10], hdr[11]]);
        let orig = e.u32([hdr[12], hdr[13], hdr[14], hdr[15]]);
        if incl > MAX_RECORD_LEN {
            return Err(PcapError::TruncatedRecord {
                index,
                detail: format!("implausible captured length {incl}"),
            });
        }
        let mut data = vec![0u8; incl as usize];
        let got = read_full(&mut self.inner, &mut data)?;
        if got < data.len() {
            return Err(PcapError::TruncatedRecord {
                index,
                detail: format!("payload has {got} of {incl} bytes"),
            });
        }
        let micros = if self.nanos { frac / 1000 } else { frac };
        self.index += 1;
        Ok(Some(RawRecord {
            timestamp: Timestamp(secs * 1_000_000 + micros),
            orig_len: orig,
            data,
        }))
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<RawRecord, PcapError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
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

/// Per-capture counters of frames that did not become packets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeStats {
    pub records: u64,
    pub packets: u64,
    pub non_ip: u64,
    pub ipv6: u64,
    pub fragments: u64,
    pub malformed: u64,
}

impl DecodeStats {
    pub fn record(&mut self, d: &Result<Decoded, super::packet::DecodeError>) {
        self.records += 1;
        match d {
            Ok(Decoded::Packet(_)) => self.packets += 1,
            Ok(Decoded::Skip(SkipReason::NonIp)) => self.non_ip += 1,
            Ok(Decoded::Skip(SkipReason::Ipv6)) => self.ipv6 += 1,
            Ok(Decoded::Skip(SkipReason::Fragment)) => self.fragments += 1,
            Ok(Decoded::Skip(SkipReason::BadIpHeader)) | Err(_) => self.malformed += 1,
        }
    }
}

/// Decoded packet stream over a pcap source. Frames that do not decode
/// are skipped and counted in [`PacketStream::stats`].
pub struct PacketStream<R> {
    reader: PcapReader<R>,
    link: LinkType,
    stats: DecodeStats,
}

impl<R: Read> PacketStream<R> {
    pub fn new(reader: PcapReader<R>) -> Result<Self, PcapError> {
        let link = reader
            .link()
            .ok_or(PcapError::UnsupportedLinkType(reader.linktype()))?;
        Ok(PacketStream {
            reader,
            link,
            stats: DecodeStats::default(),
        })
    }

    pub fn stats(&self) -> DecodeStats {
        self.stats
    }
}

impl<R: Read> Iterator for PacketStream<R> {
    type Item = Result<PacketSummary, PcapError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let rec = match self.reader.next()? {
                Ok(r) => r,
                Err(e) => return Some(Err(e)),
            };
            let decoded = decode_packet(&rec.data, self.link, rec.timestamp);
            self.stats.record(&decoded);
            if let Ok(Decoded::Packet(p)) = decoded {
                return Some(Ok(p));
            }
        }
    }
}

/// Opens a capture file and decodes it lazily.
pub fn read_pcap(path: &Path) -> Result<PacketStream<std::io::BufReader<std::fs::File>>, PcapError> {
    let f = std::fs::File::open(path)?;
    PacketStream::new(PcapReader::new(std::io::BufReader::new(f))?)
}

/// Writes little-endian microsecond pcap files.
pub struct PcapWriter<W: Write> {
    inner: W,
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut inner: W, link: LinkType) -> std::io::Result<Self> {
        let mut hdr = Vec::with_capacity(24);
        hdr.extend_from_slice(&MAGIC_USEC.to_le_bytes());
        hdr.extend_from_slice(&2u16.to_le_bytes());
        hdr.extend_from_slice(&4u16.to_le_bytes());
        hdr.extend_from_slice(&0i32.to_le_bytes());
        hdr.extend_from_slice(&0u32.to_le_bytes());
        hdr.extend_from_slice(&65535u32.to_le_bytes());
        hdr.extend_from_slice(&link.pcap_code().to_le_bytes());
        inner.write_all(&hdr)?;
        Ok(PcapWriter { inner })
    }

    pub fn write_frame(&mut self, ts: Timestamp, frame: &[u8]) -> std::io::Result<()> {
        let us = ts.micros();
        let secs = us.div_euclid(1_000_000) as u32;
        let frac = us.rem_euclid(1_000_000) as u32;
        let mut hdr = Vec::with_capacity(16);
        hdr.extend_from_slice(&secs.to_le_bytes());
        hdr.extend_from_slice(&frac.to_le_bytes());
        hdr.extend_from_slice(&(frame.len() as u32).to_le_bytes());
        hdr.extend_from_slice(&(frame.len() as u32).to_le_bytes());
        self.inner.write_all(&hdr)?;
        self.inner.write_all(frame)
    }

    pub fn into_inner(mut self) -> std::io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

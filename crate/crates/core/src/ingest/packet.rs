//! Link-layer frame decoding down to the header fields flows need.

use thiserror::Error;

use crate::flow::Timestamp;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("truncated frame: {layer} header needs {needed} bytes, {available} available")]
    TruncatedFrame {
        layer: &'static str,
        needed: usize,
        available: usize,
    },
}

/// How the captured bytes begin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkType {
    Ethernet,
    RawIp,
}

impl LinkType {
    /// Maps a pcap link-type number; `None` for unsupported links.
    pub fn from_pcap(linktype: u32) -> Option<Self> {
        match linktype {
            1 => Some(LinkType::Ethernet),
            12 | 101 | 228 => Some(LinkType::RawIp),
            _ => None,
        }
    }

    pub fn pcap_code(self) -> u32 {
        match self {
            LinkType::Ethernet => 1,
            LinkType::RawIp => 101,
        }
    }
}

/// TCP control bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct TcpFlags(pub u8);

impl TcpFlags {
    pub const FIN: u8 = 0x01;
    pub const SYN: u8 = 0x02;
    pub const RST: u8 = 0x04;
    pub const PSH: u8 = 0x08;
    pub const ACK: u8 = 0x10;
    pub const URG: u8 = 0x20;

    pub fn has(self, bit: u8) -> bool {
        self.0 & bit != 0
    }

    pub fn syn(self) -> bool {
        self.has(Self::SYN)
    }
    pub fn ack(self) -> bool {
        self.has(Self::ACK)
    }
    pub fn fin(self) -> bool {
        self.has(Self::FIN)
    }
    pub fn rst(self) -> bool {
        self.has(Self::RST)
    }
}

/// Decoded header view of one IPv4 packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketSummary {
    pub timestamp: Timestamp,
    pub src_addr: std::net::Ipv4Addr,
    pub dst_addr: std::net::Ipv4Addr,
    /// IP protocol number (6 TCP, 17 UDP, 1 ICMP, ...).
    pub proto: u8,
    pub sport: Option<u16>,
    pub dport: Option<u16>,
    pub ttl: u8,
    pub tos: u8,
    pub ip_total_len: u32,
    pub l4_payload_len: u32,
    pub tcp_flags: TcpFlags,
    pub tcp_window: u32,
}

impl PacketSummary {
    pub fn proto_name(&self) -> String {
        proto_name(self.proto)
    }
}

pub fn proto_name(proto: u8) -> String {
    match proto {
        1 => "icmp".into(),
        6 => "tcp".into(),
        17 => "udp".into(),
        n => n.to_string(),
    }
}

/// Why a frame produced no packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    NonIp,
    Ipv6,
    /// Non-first IPv4 fragment: no transport header to read.
    Fragment,
    BadIpHeader,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    Packet(PacketSummary),
    Skip(SkipReason),
}

fn need(layer: &'static str, needed: usize, available: usize) -> Result<(), DecodeError> {
    if available < needed {
        Err(DecodeError::TruncatedFrame {
            layer,
            needed,
            available,
        })
    } else {
        Ok(())
    }
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

/// Decodes one captured frame.
///
/// Payload length comes from the IP header, so frames cut short by a
/// capture snap length still decode as long as their headers are intact.
pub fn decode_packet(raw: &[u8], link: LinkType, ts: Timestamp) -> Result<Decoded, DecodeError> {
    let ip = match link {
        LinkType::Ethernet => {
            need("ethernet", 14, raw.len())?;
            match be16(raw, 12) {
                0x0800 => &raw[14..],
                0x86dd => return Ok(Decoded::Skip(SkipReason::Ipv6)),
                _ => return Ok(Decoded::Skip(SkipReason::NonIp)),
            }
        }
        LinkType::RawIp => {
            if raw.is_empty() {
                need("ip", 1, 0)?;
            }
            match raw[0] >> 4 {
                4 => raw,
                6 => return Ok(Decoded::Skip(SkipReason::Ipv6)),
                _ => return Ok(Decoded::Skip(SkipReason::NonIp)),
            }
        }
    };
    need("ipv4", 20, ip.len())?;
    if ip[0] >> 4 != 4 {
        return Ok(Decoded::Skip(SkipReason::BadIpHeader));
    }
    let ihl = ((ip[0] & 0x0f) as usize) * 4;
    if ihl < 20 {
        return Ok(Decoded::Skip(SkipReason::BadIpHeader));
    }
    need("ipv4", ihl, ip.len())?;
    let tos = ip[1];
    let total_len = be16(ip, 2) as u32;
    if (total_len as usize) < ihl {
        return Ok(Decoded::Skip(SkipReason::BadIpHeader));
    }
    let frag_offset = be16(ip, 6) & 0x1fff;
    if frag_offset != 0 {
        return Ok(Decoded::Skip(SkipReason::Fragment));
    }
    let ttl = ip[8];
    let proto = ip[9];
    let src = std::net::Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst = std::net::Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);
    let l4 = &ip[ihl..];
    let l4_len = total_len - ihl as u32;

    let mut summary = PacketSummary {
        timestamp: ts,
        src_addr: src,
        dst_addr: dst,
        proto,
        sport: None,
        dport: None,
        ttl,
        tos,
        ip_total_len: total_len,
        l4_payload_len: l4_len,
        tcp_flags: TcpFlags::default(),
        tcp_window: 0,
    };
    match proto {
        6 => {
            need("tcp", 20, l4.len())?;
            let data_off = ((l4[12] >> 4) as usize) * 4;
            if data_off < 20 {
                return Ok(Decoded::Skip(SkipReason::BadIpHeader));
            }
            need("tcp", data_off, l4.len())?;
            summary.sport = Some(be16(l4, 0));
            summary.dport = Some(be16(l4, 2));
            summary.tcp_flags = TcpFlags(l4[13] & 0x3f);
            summary.tcp_window = be16(l4, 14) as u32;
            summary.l4_payload_len = l4_len.saturating_sub(data_off as u32);
        }
        17 => {
            need("udp", 8, l4.len())?;
            summary.sport = Some(be16(l4, 0));
            summary.dport = Some(be16(l4, 2));
            summary.l4_payload_len = l4_len.saturating_sub(8);
        }
        1 => {
            need("icmp", 4, l4.len())?;
            summary.l4_payload_len = l4_len.saturating_sub(8.min(l4_len));
        }
        _ => {}
    }
    Ok(Decoded::Packet(summary))
}

/// Builds Ethernet/IPv4 frames; used by tests, fuzz seeds and fixtures.
pub mod build {
    use super::TcpFlags;
    use std::net::Ipv4Addr;

    fn checksum(header: &[u8]) -> u16 {
        let mut sum = 0u32;
        for pair in header.chunks(2) {
            let word = u16::from_be_bytes([pair[0], *pair.get(1).unwrap_or(&0)]) as u32;
            sum += word;
        }
        while sum > 0xffff {
            sum = (sum & 0xffff) + (sum >> 16);
        }
        !(sum as u16)
    }

    fn ipv4(src: Ipv4Addr, dst: Ipv4Addr, proto: u8, ttl: u8, tos: u8, l4: &[u8]) -> Vec<u8> {
        let total = 20 + l4.len();
        let mut ip = vec![0u8; 20];
        ip[0] = 0x45;
        ip[1] = tos;
        ip[2..4].copy_from_slice(&(total as u16).to_be_bytes());
        ip[6] = 0x40; // DF
        ip[8] = ttl;
        ip[9] = proto;
        ip[12..16].copy_from_slice(&src.octets());
        ip[16..20].copy_from_slice(&dst.octets());
        let c = checksum(&ip);
        ip[10..12].copy_from_slice(&c.to_be_bytes());
        ip.extend_from_slice(l4);
        ip
    }

    fn ethernet(ip: Vec<u8>) -> Vec<u8> {
        let mut f = vec![0x02, 0, 0, 0, 0, 0x02, 0x02, 0, 0, 0, 0, 0x01, 0x08, 0x00];
        f.extend(ip);
        f
    }

    /// TCP segment with a 20-byte MSS/SACK/timestamp/NOP/wscale option
    /// block when `options` is set, giving the classic 74-byte SYN.
    #[allow(clippy::too_many_arguments)]
    pub fn tcp_frame(
        src: (Ipv4Addr, u16),
        dst: (Ipv4Addr, u16),
        flags: u8,
        window: u16,
        ttl: u8,
        options: bool,
        payload: &[u8],
    ) -> Vec<u8> {
        let opts: &[u8] = if options {
            &[
                0x02, 0x04, 0x05, 0xb4, 0x04, 0x02, 0x08, 0x0a, 0, 0, 0, 1, 0, 0, 0, 0, 0x01, 0x03,
                0x03, 0x07,
            ]
        } else {
            &[]
        };
        let hlen = 20 + opts.len();
        let mut tcp = vec![0u8; 20];
        tcp[0..2].copy_from_slice(&src.1.to_be_bytes());
        tcp[2..4].copy_from_slice(&dst.1.to_be_bytes());
        tcp[4..8].copy_from_slice(&1000u32.to_be_bytes());
        tcp[12] = ((hlen / 4) as u8) << 4;
        tcp[13] = flags & 0x3f;
        tcp[14..16].copy_from_slice(&window.to_be_bytes());
        tcp.extend_from_slice(opts);
        tcp.extend_from_slice(payload);
        ethernet(ipv4(src.0, dst.0, 6, ttl, 0, &tcp))
    }

    pub fn udp_frame(src: (Ipv4Addr, u16), dst: (Ipv4Addr, u16), ttl: u8, payload: &[u8]) -> Vec<u8> {
        let mut udp = vec![0u8; 8];
        udp[0..2].copy_from_slice(&src.1.to_be_bytes());
        udp[2..4].copy_from_slice(&dst.1.to_be_bytes());
        udp[4..6].copy_from_slice(&((8 + payload.len()) as u16).to_be_bytes());
        udp.extend_from_slice(payload);
        ethernet(ipv4(src.0, dst.0, 17, ttl, 0, &udp))
    }

    pub fn icmp_echo_frame(src: Ipv4Addr, dst: Ipv4Addr, ttl: u8, payload: &[u8]) -> Vec<u8> {
        let mut icmp = vec![8u8, 0, 0, 0, 0, 1, 0, 1];
        icmp.extend_from_slice(payload);
        ethernet(ipv4(src, dst, 1, ttl, 0, &icmp))
    }

    pub fn arp_frame() -> Vec<u8> {
        let mut f = vec![0xff; 6];
        f.extend_from_slice(&[0x02, 0, 0, 0, 0, 1, 0x08, 0x06]);
        f.extend_from_slice(&[0, 1, 8, 0, 6, 4, 0, 1]);
        f.extend(std::iter::repeat_n(0u8, 20));
        f
    }

    pub const SYN: u8 = TcpFlags::SYN;
    pub const SYN_ACK: u8 = TcpFlags::SYN | TcpFlags::ACK;
    pub const ACK: u8 = TcpFlags::ACK;
}
